//! Constraint-defined manifolds.
//!
//! A manifold is the zero set `{x : h_i(x) = 0, i = 1..m}` of twice
//! differentiable scalar constraints whose gradients are linearly
//! independent at the points of interest (LICQ). The tangent space is the
//! null space of the constraint Jacobian and the normal space is its row
//! space. `m = 0` is allowed and denotes the whole ambient space.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative rank tolerance used for LICQ detection: singular values below
/// `DEFAULT_RANK_TOL * sigma_max` are treated as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Default stopping tolerance for nearest-point projection.
pub const DEFAULT_PROJECT_TOL: f64 = 1e-12;

/// Default iteration budget for nearest-point projection.
pub const DEFAULT_PROJECT_MAX_ITER: usize = 50;

type ValueFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type HessianFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A twice differentiable scalar function with explicit derivative
/// evaluators. Instances are immutable and cheap to clone.
#[derive(Clone)]
pub struct SmoothScalarFn {
    value: ValueFn,
    gradient: GradientFn,
    hessian: HessianFn,
}

impl SmoothScalarFn {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: Arc::new(hessian),
        }
    }

    /// Affine constraint `a . x - b`.
    pub fn affine(a: DVector<f64>, b: f64) -> Self {
        let n = a.len();
        let grad = a.clone();
        Self::new(
            move |x| a.dot(x) - b,
            move |_| grad.clone(),
            move |_| DMatrix::zeros(n, n),
        )
    }

    /// Coordinate bound `x_i - b` in dimension `n`.
    pub fn coordinate(n: usize, i: usize, b: f64) -> Self {
        let mut a = DVector::zeros(n);
        a[i] = 1.0;
        Self::affine(a, b)
    }

    /// Sphere constraint `|x - c|^2 - r^2`.
    pub fn sphere(center: DVector<f64>, radius: f64) -> Self {
        let n = center.len();
        let c1 = center.clone();
        let c2 = center;
        Self::new(
            move |x| (x - &c1).norm_squared() - radius * radius,
            move |x| 2.0 * (x - &c2),
            move |_| 2.0 * DMatrix::identity(n, n),
        )
    }

    /// Quadric constraint `x^T Q x - rhs` for symmetric `Q`.
    pub fn quadric(q: DMatrix<f64>, rhs: f64) -> Self {
        let q1 = q.clone();
        let q2 = q.clone();
        Self::new(
            move |x| (x.transpose() * &q1 * x)[(0, 0)] - rhs,
            move |x| 2.0 * (&q2 * x),
            move |_| 2.0 * q.clone(),
        )
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// An equality-constrained manifold `{x in R^n : h_i(x) = 0}`.
#[derive(Clone)]
pub struct Manifold {
    ambient_dim: usize,
    constraints: Vec<SmoothScalarFn>,
    rank_tol: f64,
}

impl Manifold {
    /// Requires `constraints.len() <= n`; more equations than unknowns can
    /// never satisfy LICQ.
    pub fn new(ambient_dim: usize, constraints: Vec<SmoothScalarFn>) -> Result<Self> {
        if constraints.len() > ambient_dim {
            return Err(Error::InvalidParameter(format!(
                "manifold with {} constraints in dimension {}",
                constraints.len(),
                ambient_dim
            )));
        }
        Ok(Self {
            ambient_dim,
            constraints,
            rank_tol: DEFAULT_RANK_TOL,
        })
    }

    /// The whole space `R^n` (no constraints).
    pub fn free(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            constraints: Vec::new(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    /// Overrides the relative rank tolerance used for LICQ detection.
    pub fn with_rank_tol(mut self, rank_tol: f64) -> Self {
        self.rank_tol = rank_tol;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Manifold dimension `n - m`.
    pub fn dim(&self) -> usize {
        self.ambient_dim - self.constraints.len()
    }

    pub fn constraints(&self) -> &[SmoothScalarFn] {
        &self.constraints
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.ambient_dim {
            return Err(Error::DimensionMismatch {
                what: "point",
                expected: self.ambient_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Vector of constraint values `h(x)`.
    pub fn constraint_values(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(DVector::from_iterator(
            self.constraints.len(),
            self.constraints.iter().map(|c| c.value(x)),
        ))
    }

    /// m x n Jacobian; row i is `grad h_i(x)^T`.
    pub fn constraint_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x)?;
        let m = self.constraints.len();
        let n = self.ambient_dim;
        let mut jac = DMatrix::zeros(m, n);
        for (i, c) in self.constraints.iter().enumerate() {
            let g = c.gradient(x);
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "constraint gradient",
                    expected: n,
                    got: g.len(),
                });
            }
            jac.row_mut(i).copy_from(&g.transpose());
        }
        Ok(jac)
    }

    fn split(&self, x: &DVector<f64>) -> Result<linalg::SpanSplit> {
        let jac = self.constraint_jacobian(x)?;
        let split = linalg::row_space_split(&jac, self.rank_tol);
        if split.rank < self.constraints.len() {
            return Err(Error::RankDeficient {
                sigma_min: split.sigma_min,
                tol: self.rank_tol * split.sigma_max,
            });
        }
        Ok(split)
    }

    /// Orthonormal basis of the tangent space (null space of the Jacobian),
    /// as an n x (n - m) matrix. Column sign and orientation are not
    /// specified; callers must be basis-invariant.
    pub fn tangent_basis(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.split(x)?.tangent)
    }

    /// Orthonormal basis of the normal space (row space of the Jacobian),
    /// as an n x m matrix.
    pub fn normal_basis(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        Ok(self.split(x)?.normal)
    }

    /// Smallest singular value of the constraint Jacobian; `+inf` for m = 0.
    pub fn licq_margin(&self, x: &DVector<f64>) -> Result<f64> {
        if self.constraints.is_empty() {
            self.check_dim(x)?;
            return Ok(f64::INFINITY);
        }
        let jac = self.constraint_jacobian(x)?;
        let (lo, _) = linalg::sigma_extremes(&jac);
        Ok(lo)
    }

    /// Nearest-point projection onto the manifold.
    ///
    /// Newton iteration on the stationarity system
    /// `y - x0 = J(y)^T mu`, `h(y) = 0` in the variables `(y, mu)`, started
    /// at `y = x0`, `mu = 0`. Whenever the full Newton system is singular a
    /// Gauss-Newton feasibility step `y <- y - J^T (J J^T)^{-1} h(y)` is
    /// taken instead. The caller is responsible for `x0` lying inside the
    /// region where the nearest point is unique.
    pub fn project(&self, x0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        self.check_dim(x0)?;
        if tol <= 0.0 {
            return Err(Error::InvalidParameter("projection tol must be > 0".into()));
        }
        let m = self.constraints.len();
        if m == 0 {
            return Ok(x0.clone());
        }
        let n = self.ambient_dim;
        let mut y = x0.clone();
        let mut mu = DVector::zeros(m);
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let h = self.constraint_values(&y)?;
            let jac = self.constraint_jacobian(&y)?;
            let split = linalg::row_space_split(&jac, self.rank_tol);
            if split.rank < m {
                return Err(Error::RankDeficient {
                    sigma_min: split.sigma_min,
                    tol: self.rank_tol * split.sigma_max,
                });
            }
            let stationarity = split.tangent.transpose() * (&y - x0);
            residual = h.amax().max(stationarity.norm());
            if residual <= tol {
                return Ok(y);
            }

            // Full KKT Newton step on the stationarity system.
            let mut weighted = DMatrix::zeros(n, n);
            for (i, c) in self.constraints.iter().enumerate() {
                weighted += mu[i] * c.hessian(&y);
            }
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n))
                .copy_from(&(DMatrix::identity(n, n) - &weighted));
            kkt.view_mut((0, n), (n, m)).copy_from(&(-jac.transpose()));
            kkt.view_mut((n, 0), (m, n)).copy_from(&jac);
            let mut rhs = DVector::zeros(n + m);
            let r1 = &y - x0 - jac.transpose() * &mu;
            rhs.rows_mut(0, n).copy_from(&(-&r1));
            rhs.rows_mut(n, m).copy_from(&(-&h));

            if let Some(delta) = linalg::solve_lu(&kkt, &rhs) {
                y += delta.rows(0, n).into_owned();
                mu += delta.rows(n, m).into_owned();
            } else {
                // Gauss-Newton feasibility fallback.
                let jjt = &jac * jac.transpose();
                let nu = linalg::solve_lu(&jjt, &h).ok_or(Error::RankDeficient {
                    sigma_min: split.sigma_min,
                    tol: self.rank_tol * split.sigma_max,
                })?;
                y -= jac.transpose() * nu;
                mu = linalg::least_squares(&jac.transpose(), &(&y - x0));
            }
        }
        Err(Error::NoConvergence {
            what: "manifold projection",
            max_iter,
            residual,
        })
    }

    /// `project` with the default tolerance and budget.
    pub fn project_default(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        self.project(x0, DEFAULT_PROJECT_TOL, DEFAULT_PROJECT_MAX_ITER)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn circle() -> Manifold {
        Manifold::new(2, vec![SmoothScalarFn::sphere(DVector::zeros(2), 1.0)]).unwrap()
    }

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn constraint_values_on_circle() {
        let m = circle();
        assert_abs_diff_eq!(m.constraint_values(&vec2(1.0, 0.0)).unwrap()[0], 0.0);
        assert_abs_diff_eq!(m.constraint_values(&vec2(2.0, 0.0)).unwrap()[0], 3.0);
        let line = Manifold::new(2, vec![SmoothScalarFn::affine(vec2(1.0, -1.0), 0.0)]).unwrap();
        assert_abs_diff_eq!(line.constraint_values(&vec2(1.0, 3.0)).unwrap()[0], -2.0);
    }

    #[test]
    fn constraint_jacobian_rows_are_gradients() {
        let m = circle();
        let j = m.constraint_jacobian(&vec2(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], 2.0);
        assert_abs_diff_eq!(j[(0, 1)], 0.0);
        let j = m.constraint_jacobian(&vec2(0.6, 0.8)).unwrap();
        assert_abs_diff_eq!(j[(0, 0)], 1.2, epsilon = 1e-15);
        assert_abs_diff_eq!(j[(0, 1)], 1.6, epsilon = 1e-15);

        let axes = Manifold::new(
            3,
            vec![
                SmoothScalarFn::coordinate(3, 0, 0.0),
                SmoothScalarFn::coordinate(3, 1, 0.0),
            ],
        )
        .unwrap();
        let j = axes.constraint_jacobian(&DVector::zeros(3)).unwrap();
        assert_eq!(j.shape(), (2, 3));
        assert_abs_diff_eq!(j[(0, 0)], 1.0);
        assert_abs_diff_eq!(j[(1, 1)], 1.0);
        assert_abs_diff_eq!(j[(0, 1)], 0.0);
    }

    #[test]
    fn tangent_basis_spans_null_space() {
        let m = circle();
        let b = m.tangent_basis(&vec2(1.0, 0.0)).unwrap();
        assert_eq!(b.shape(), (2, 1));
        // spans {(0, 1)} up to sign
        assert_abs_diff_eq!(b[(0, 0)].abs(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b[(1, 0)].abs(), 1.0, epsilon = 1e-12);

        let free = Manifold::free(3);
        let b = free.tangent_basis(&DVector::zeros(3)).unwrap();
        assert_eq!(b.shape(), (3, 3));
        assert_abs_diff_eq!((b.transpose() * &b - DMatrix::identity(3, 3)).norm(), 0.0, epsilon = 1e-12);

        let sphere =
            Manifold::new(3, vec![SmoothScalarFn::sphere(DVector::zeros(3), 1.0)]).unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        let b = sphere.tangent_basis(&x).unwrap();
        assert_eq!(b.shape(), (3, 2));
        // orthogonal to the pole, so third row vanishes
        assert_abs_diff_eq!(b.row(2).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn normal_basis_spans_row_space() {
        let m = circle();
        let nb = m.normal_basis(&vec2(1.0, 0.0)).unwrap();
        assert_eq!(nb.shape(), (2, 1));
        assert_abs_diff_eq!(nb[(0, 0)].abs(), 1.0, epsilon = 1e-12);

        let tb = m.tangent_basis(&vec2(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!((tb.transpose() * &nb).norm(), 0.0, epsilon = 1e-12);

        assert_eq!(Manifold::free(3).normal_basis(&DVector::zeros(3)).unwrap().shape(), (3, 0));
    }

    #[test]
    fn tangent_basis_reports_licq_failure() {
        let m = circle();
        match m.tangent_basis(&vec2(0.0, 0.0)) {
            Err(Error::RankDeficient { .. }) => {}
            other => panic!("expected RankDeficient, got {other:?}"),
        }
    }

    #[test]
    fn projection_examples() {
        let m = circle();
        let p = m.project_default(&vec2(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-10);

        let fixed = m.project_default(&vec2(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!((fixed - vec2(1.0, 0.0)).norm(), 0.0, epsilon = 1e-12);

        let line = Manifold::new(2, vec![SmoothScalarFn::affine(vec2(1.0, -1.0), 0.0)]).unwrap();
        let p = line.project_default(&vec2(2.0, 0.0)).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_is_idempotent() {
        let m = circle();
        let p = m.project_default(&vec2(0.9, -1.3)).unwrap();
        let q = m.project_default(&p).unwrap();
        assert!((p - q).norm() <= 1e-12);
    }

    #[test]
    fn projection_reports_exhausted_budget() {
        let m = circle();
        assert!(matches!(
            m.project(&vec2(3.0, 4.0), 1e-12, 1),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn licq_margin_examples() {
        let m = circle();
        assert_abs_diff_eq!(m.licq_margin(&vec2(1.0, 0.0)).unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.licq_margin(&vec2(0.0, 0.0)).unwrap(), 0.0, epsilon = 1e-12);
        assert!(Manifold::free(2).licq_margin(&vec2(0.0, 0.0)).unwrap().is_infinite());
    }

    #[test]
    fn rank_tolerance_is_overridable() {
        // near-parallel affine constraints: dependent at tol 1e-2,
        // independent at the default
        let near = Manifold::new(
            2,
            vec![
                SmoothScalarFn::affine(vec2(1.0, 0.0), 0.0),
                SmoothScalarFn::affine(vec2(1.0, 1e-4), 0.0),
            ],
        )
        .unwrap();
        assert!(near.tangent_basis(&vec2(0.0, 0.0)).is_ok());
        let strict = near.clone().with_rank_tol(1e-2);
        assert!(matches!(
            strict.tangent_basis(&vec2(0.0, 0.0)),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let m = circle();
        assert!(matches!(
            m.constraint_values(&DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
