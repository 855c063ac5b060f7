//! Second-order variational calculus on manifold normal-cone maps:
//! multiplier estimation, weighted constraint Hessians, membership tests
//! for the graphical derivative and coderivative of `N_M`, and
//! transversality diagnostics.
//!
//! For a manifold `M = {h = 0}`, a point `u` on `M`, and a normal vector
//! `v = sum_i lambda_i grad h_i(u)`, the pair `(w, z)` belongs to the
//! tangent space of `gph N_M` at `(u, v)` exactly when
//!
//! ```text
//! w in T_M(u)   and   z - H w in N_M(u),      H = sum_i lambda_i hess h_i(u).
//! ```
//!
//! The same condition decides coderivative membership, so the derivative
//! and coderivative of `N_M` coincide; both public membership tests reduce
//! to it.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Manifold;
use crate::linalg;

/// Least-squares multiplier of a vector against the constraint gradients.
#[derive(Debug, Clone)]
pub struct MultiplierResult {
    /// Minimizer of `|v - J^T lambda|` (minimum-norm among minimizers).
    pub lambda: DVector<f64>,
    /// The attained residual `|v - J^T lambda|`.
    pub residual_norm: f64,
}

/// Default relative tolerance for the membership tests.
pub const DEFAULT_MEMBER_TOL: f64 = 1e-8;

/// Best multiplier expressing `v` over the constraint gradients at `x`.
/// With LICQ the minimizer is unique; `residual_norm` is zero exactly when
/// `v` lies in the normal space.
pub fn multiplier_from_normal(
    m: &Manifold,
    x: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<MultiplierResult> {
    if v.len() != m.ambient_dim() {
        return Err(Error::DimensionMismatch {
            what: "normal vector",
            expected: m.ambient_dim(),
            got: v.len(),
        });
    }
    if m.num_constraints() == 0 {
        m.constraint_values(x)?;
        return Ok(MultiplierResult {
            lambda: DVector::zeros(0),
            residual_norm: v.norm(),
        });
    }
    let jac = m.constraint_jacobian(x)?;
    // LICQ check
    m.tangent_basis(x)?;
    let jt = jac.transpose();
    let lambda = linalg::least_squares(&jt, v);
    let residual_norm = (v - &jt * &lambda).norm();
    Ok(MultiplierResult {
        lambda,
        residual_norm,
    })
}

/// Multiplier-weighted sum of constraint Hessians `H = sum_i lambda_i hess h_i(x)`.
pub fn weighted_hessian(
    m: &Manifold,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if lambda.len() != m.num_constraints() {
        return Err(Error::DimensionMismatch {
            what: "multiplier",
            expected: m.num_constraints(),
            got: lambda.len(),
        });
    }
    let n = m.ambient_dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            what: "point",
            expected: n,
            got: x.len(),
        });
    }
    let mut h = DMatrix::zeros(n, n);
    for (i, c) in m.constraints().iter().enumerate() {
        h += lambda[i] * c.hessian(x);
    }
    Ok(h)
}

/// The shared decision rule: `w in T_M(u)` and `z - H w in N_M(u)`, with
/// relative tolerances scaled by operand magnitude. `basis` must hold an
/// orthonormal tangent basis at `u` when supplied; decisions are invariant
/// under that choice.
fn tangent_pair_condition(
    m: &Manifold,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
    tol: f64,
    basis: Option<&DMatrix<f64>>,
) -> Result<bool> {
    let h = m.constraint_values(u)?;
    if h.norm() > tol * (1.0 + u.norm()) {
        return Err(Error::PreconditionViolated(format!(
            "point is off the manifold: |h(u)| = {:.3e}",
            h.norm()
        )));
    }
    let mult = multiplier_from_normal(m, u, v)?;
    if mult.residual_norm > tol * (1.0 + v.norm()) {
        return Err(Error::PreconditionViolated(format!(
            "v is not a normal vector: residual {:.3e}",
            mult.residual_norm
        )));
    }
    let jac = m.constraint_jacobian(u)?;
    let owned_basis;
    let b = match basis {
        Some(b) => b,
        None => {
            owned_basis = m.tangent_basis(u)?;
            &owned_basis
        }
    };
    let hess = weighted_hessian(m, u, &mult.lambda)?;

    let tangent_ok = (&jac * w).norm() <= tol * (1.0 + w.norm());
    let residual = z - &hess * w;
    let scale = 1.0 + z.norm() + hess.norm() * w.norm();
    let normal_ok = (b.transpose() * residual).norm() <= tol * scale;
    Ok(tangent_ok && normal_ok)
}

/// Decides `(w, z) in T_{gph N_M}(u, v)`, i.e. `z in DN_M(u | v)(w)`.
pub fn graph_tangent_member(
    m: &Manifold,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    tangent_pair_condition(m, u, v, w, z, tol, None)
}

/// Decides `z in D*N_M(u | v)(w)`. For manifold normal maps the
/// coderivative coincides with the graphical derivative, so this applies
/// the same decision rule as [`graph_tangent_member`]; it exists as a
/// separate operation so the equality is an executable statement.
pub fn graph_normal_member(
    m: &Manifold,
    u: &DVector<f64>,
    v: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    tangent_pair_condition(m, u, v, w, z, tol, None)
}

/// [`graph_tangent_member`] with an explicit orthonormal tangent basis,
/// for basis-invariance checks.
pub fn graph_tangent_member_with_basis(
    m: &Manifold,
    u: &DVector<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    z: &DVector<f64>,
    tol: f64,
    basis: &DMatrix<f64>,
) -> Result<bool> {
    tangent_pair_condition(m, u, v, w, z, tol, Some(basis))
}

/// [`graph_normal_member`] with an explicit orthonormal tangent basis.
pub fn graph_normal_member_with_basis(
    m: &Manifold,
    u: &DVector<f64>,
    v: &DVector<f64>,
    z: &DVector<f64>,
    w: &DVector<f64>,
    tol: f64,
    basis: &DMatrix<f64>,
) -> Result<bool> {
    tangent_pair_condition(m, u, v, w, z, tol, Some(basis))
}

/// Smallest singular value of the tangent-space reduction
/// `B^T (DF(u) + H(u, lambda)) B`. A positive margin certifies the
/// transversality condition for `F + N_M` at `(u, lambda)`; dimension
/// zero tangent spaces return `+inf`.
pub fn transversality_margin(
    m: &Manifold,
    f_jacobian_at: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64> {
    let b = m.tangent_basis(u)?;
    if b.ncols() == 0 {
        return Ok(f64::INFINITY);
    }
    let dl = f_jacobian_at(u) + weighted_hessian(m, u, lambda)?;
    let reduced = b.transpose() * dl * b;
    let (lo, _) = linalg::sigma_extremes(&reduced);
    Ok(lo)
}

/// Secondary diagnostic: smallest singular value of the full KKT matrix
/// `[[DL, J^T], [J, 0]]` at `(u, lambda)`.
pub fn full_kkt_margin(
    m: &Manifold,
    f_jacobian_at: &dyn Fn(&DVector<f64>) -> DMatrix<f64>,
    u: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64> {
    let n = m.ambient_dim();
    let mm = m.num_constraints();
    let jac = m.constraint_jacobian(u)?;
    let dl = f_jacobian_at(u) + weighted_hessian(m, u, lambda)?;
    let mut kkt = DMatrix::zeros(n + mm, n + mm);
    kkt.view_mut((0, 0), (n, n)).copy_from(&dl);
    kkt.view_mut((0, n), (n, mm)).copy_from(&jac.transpose());
    kkt.view_mut((n, 0), (mm, n)).copy_from(&jac);
    let (lo, _) = linalg::sigma_extremes(&kkt);
    Ok(lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::unit_circle;
    use approx::assert_abs_diff_eq;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn multiplier_closed_form_on_circle() {
        let m = unit_circle();
        let r = multiplier_from_normal(&m, &vec2(0.6, 0.8), &DVector::from_vec(vec![3.0, 4.0]))
            .unwrap();
        assert_abs_diff_eq!(r.lambda[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.residual_norm, 0.0, epsilon = 1e-12);

        let r = multiplier_from_normal(&m, &vec2(1.0, 0.0), &vec2(0.0, 1.0)).unwrap();
        assert_abs_diff_eq!(r.lambda[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.residual_norm, 1.0, epsilon = 1e-12);

        let free = Manifold::free(2);
        let r = multiplier_from_normal(&free, &vec2(0.0, 0.0), &vec2(3.0, 4.0)).unwrap();
        assert_eq!(r.lambda.len(), 0);
        assert_abs_diff_eq!(r.residual_norm, 5.0, epsilon = 1e-12);
    }

    #[test]
    fn weighted_hessian_examples() {
        let m = unit_circle();
        let h = weighted_hessian(&m, &vec2(0.3, 0.1), &DVector::from_vec(vec![1.0])).unwrap();
        let expected: DMatrix<f64> = 2.0 * DMatrix::identity(2, 2);
        assert_abs_diff_eq!((h - expected).norm(), 0.0, epsilon = 1e-14);

        let h = weighted_hessian(&m, &vec2(0.3, 0.1), &DVector::from_vec(vec![0.0])).unwrap();
        assert_abs_diff_eq!(h.norm(), 0.0);

        let q1 = DMatrix::from_diagonal(&vec2(1.0, 0.0));
        let q2 = DMatrix::from_diagonal(&vec2(0.0, 1.0));
        let two = Manifold::new(
            2,
            vec![
                crate::geometry::SmoothScalarFn::quadric(q1, 0.0),
                crate::geometry::SmoothScalarFn::quadric(q2, 0.0),
            ],
        )
        .unwrap();
        let h = weighted_hessian(&two, &vec2(0.5, 0.5), &vec2(1.0, 2.0)).unwrap();
        assert_abs_diff_eq!(h[(0, 0)], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h[(1, 1)], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h[(0, 1)], 0.0);
    }

    #[test]
    fn graph_membership_hand_cases() {
        let m = unit_circle();
        let u = vec2(1.0, 0.0);
        let v = vec2(2.0, 0.0); // lambda = 1, H = 2 I
        let tol = 1e-8;

        // z - H w = 0
        assert!(graph_tangent_member(&m, &u, &v, &vec2(0.0, 1.0), &vec2(0.0, 2.0), tol).unwrap());
        // w not tangent
        assert!(!graph_tangent_member(&m, &u, &v, &vec2(1.0, 0.0), &vec2(0.0, 0.0), tol).unwrap());
        // z - H w has tangent component -2
        assert!(!graph_tangent_member(&m, &u, &v, &vec2(0.0, 1.0), &vec2(0.0, 0.0), tol).unwrap());

        // the coderivative test gives identical answers
        assert!(graph_normal_member(&m, &u, &v, &vec2(0.0, 2.0), &vec2(0.0, 1.0), tol).unwrap());
        assert!(!graph_normal_member(&m, &u, &v, &vec2(0.0, 0.0), &vec2(1.0, 0.0), tol).unwrap());
        assert!(!graph_normal_member(&m, &u, &v, &vec2(0.0, 0.0), &vec2(0.0, 1.0), tol).unwrap());
    }

    #[test]
    fn membership_preconditions_are_checked() {
        let m = unit_circle();
        // off the manifold
        assert!(matches!(
            graph_tangent_member(&m, &vec2(2.0, 0.0), &vec2(2.0, 0.0), &vec2(0.0, 1.0), &vec2(0.0, 0.0), 1e-8),
            Err(Error::PreconditionViolated(_))
        ));
        // v not normal
        assert!(matches!(
            graph_tangent_member(&m, &vec2(1.0, 0.0), &vec2(0.0, 1.0), &vec2(0.0, 1.0), &vec2(0.0, 0.0), 1e-8),
            Err(Error::PreconditionViolated(_))
        ));
    }

    #[test]
    fn transversality_margin_examples() {
        // maximizing c.x over the disk: DL = 2 lambda I restricted to the tangent line
        let m = unit_circle();
        let zero_jac = |_: &DVector<f64>| DMatrix::zeros(2, 2);
        let margin = transversality_margin(
            &m,
            &zero_jac,
            &vec2(0.6, 0.8),
            &DVector::from_vec(vec![2.5]),
        )
        .unwrap();
        assert_abs_diff_eq!(margin, 5.0, epsilon = 1e-10);

        let free = Manifold::free(2);
        let id_jac = |_: &DVector<f64>| DMatrix::identity(2, 2);
        let margin =
            transversality_margin(&free, &id_jac, &vec2(0.0, 0.0), &DVector::zeros(0)).unwrap();
        assert_abs_diff_eq!(margin, 1.0, epsilon = 1e-12);

        let margin =
            transversality_margin(&free, &zero_jac, &vec2(0.0, 0.0), &DVector::zeros(0)).unwrap();
        assert_abs_diff_eq!(margin, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn full_kkt_margin_positive_at_disk_solution() {
        let m = unit_circle();
        let zero_jac = |_: &DVector<f64>| DMatrix::zeros(2, 2);
        // KKT matrix [[5 I, 2 u], [2 u^T, 0]]: smallest singular value is
        // (sqrt(41) - 5) / 2 from the radial 2 x 2 block
        let margin = full_kkt_margin(
            &m,
            &zero_jac,
            &vec2(0.6, 0.8),
            &DVector::from_vec(vec![2.5]),
        )
        .unwrap();
        assert_abs_diff_eq!(margin, (41.0_f64.sqrt() - 5.0) / 2.0, epsilon = 1e-10);
    }
}
