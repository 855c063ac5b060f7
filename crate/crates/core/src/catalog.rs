//! Catalogue of small manifolds with samplers, used by the verification
//! suites and tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Manifold, SmoothScalarFn};

type Sampler = Box<dyn Fn(&mut ChaCha8Rng) -> DVector<f64> + Send + Sync>;

/// A named manifold together with a sampler producing on-manifold points.
pub struct CatalogManifold {
    pub name: &'static str,
    pub manifold: Manifold,
    sampler: Sampler,
}

impl CatalogManifold {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        (self.sampler)(rng)
    }
}

/// Unit circle in the plane.
pub fn unit_circle() -> Manifold {
    Manifold::new(2, vec![SmoothScalarFn::sphere(DVector::zeros(2), 1.0)]).unwrap()
}

/// Unit sphere in R^3.
pub fn unit_sphere3() -> Manifold {
    Manifold::new(3, vec![SmoothScalarFn::sphere(DVector::zeros(3), 1.0)]).unwrap()
}

/// Ellipse `x^2 / 4 + y^2 = 1`.
pub fn ellipse() -> Manifold {
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.25, 1.0]));
    Manifold::new(2, vec![SmoothScalarFn::quadric(q, 1.0)]).unwrap()
}

/// Horizontal unit circle `{x_3 = 0} ∩ {x_1^2 + x_2^2 = 1}` in R^3
/// (two constraints, dimension one).
pub fn circle_plane_pair() -> Manifold {
    let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0]));
    Manifold::new(
        3,
        vec![
            SmoothScalarFn::coordinate(3, 2, 0.0),
            SmoothScalarFn::quadric(q, 1.0),
        ],
    )
    .unwrap()
}

/// Diagonal line `x_1 = x_2` in the plane.
pub fn diagonal_line() -> Manifold {
    Manifold::new(
        2,
        vec![SmoothScalarFn::affine(
            DVector::from_vec(vec![1.0, -1.0]),
            0.0,
        )],
    )
    .unwrap()
}

/// The four manifolds exercised by the second-order verification suites.
pub fn manifold_catalog() -> Vec<CatalogManifold> {
    vec![
        CatalogManifold {
            name: "circle",
            manifold: unit_circle(),
            sampler: Box::new(|rng| {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                DVector::from_vec(vec![phi.cos(), phi.sin()])
            }),
        },
        CatalogManifold {
            name: "sphere3",
            manifold: unit_sphere3(),
            sampler: Box::new(|rng| {
                use rand_distr::{Distribution, StandardNormal};
                loop {
                    let v = DVector::from_fn(3, |_, _| -> f64 { StandardNormal.sample(rng) });
                    let n = v.norm();
                    if n > 1e-3 {
                        return v / n;
                    }
                }
            }),
        },
        CatalogManifold {
            name: "ellipse",
            manifold: ellipse(),
            sampler: Box::new(|rng| {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                DVector::from_vec(vec![2.0 * phi.cos(), phi.sin()])
            }),
        },
        CatalogManifold {
            name: "circle-plane-pair",
            manifold: circle_plane_pair(),
            sampler: Box::new(|rng| {
                let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                DVector::from_vec(vec![phi.cos(), phi.sin(), 0.0])
            }),
        },
    ]
}
