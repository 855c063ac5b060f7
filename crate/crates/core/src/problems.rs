//! Catalogue of test problems with closed-form solutions, seeded random
//! instance generators, and independent brute-force oracles.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geneq::{ConvexSet, GenEqProblem, OperatorPart};
use crate::geometry::{Manifold, SmoothScalarFn};
use crate::linalg;

/// Serializable description of a catalogued problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: String,
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// The problem families the solver and its oracles are exercised on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ProblemKind {
    /// Maximize `c . x` over the unit ball: `0 in -c + N_K(u)`.
    /// Solution `c / |c|` with ball multiplier `|c| / 2`.
    DiskNlp { c: Vec<f64> },
    /// `F(x) = x - p` over the unit sphere (an equality manifold);
    /// requires `|p| > 1` and solves at `p / |p|`.
    SphereVi { p: Vec<f64> },
    /// Affine variational inequality `F(u) = A u + b` over the orthant.
    OrthantAffineVi {
        a_mat: Vec<Vec<f64>>,
        b_vec: Vec<f64>,
    },
    /// Affine variational inequality over a box.
    BoxAffineVi {
        lower: Vec<f64>,
        upper: Vec<f64>,
        a_mat: Vec<Vec<f64>>,
        b_vec: Vec<f64>,
    },
    /// Scalar root finding `u^2 - target = 0` with no operator part.
    ScalarRoot { target: f64 },
    /// `F(u) = u + u^3 - d` restricted to the span of the given basis
    /// columns, with `d` chosen so that `basis * coeffs` solves exactly.
    SubspaceNewton {
        basis: Vec<Vec<f64>>,
        coeffs: Vec<f64>,
    },
    /// `F(u) = (u_1, 0)` in the plane: the Jacobian is singular at the
    /// solution, so the transversality certificate fails.
    SingularDemo,
    /// Seeded random orthant instance, materialized through
    /// [`random_orthant_vi`] on demand.
    RandomOrthantVi { n: usize },
}

/// Built-in problem names accepted by the command-line tools.
pub const BUILTIN_NAMES: [&str; 6] = [
    "disk-nlp",
    "sphere-vi",
    "orthant-vi",
    "scalar-root",
    "subspace-newton",
    "singular-demo",
];

/// Look up a built-in problem by name.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    let kind = match name {
        "disk-nlp" => ProblemKind::DiskNlp { c: vec![3.0, 4.0] },
        "sphere-vi" => ProblemKind::SphereVi {
            p: vec![0.0, 0.0, 2.0],
        },
        "orthant-vi" => ProblemKind::OrthantAffineVi {
            a_mat: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            b_vec: vec![-1.0, 1.0],
        },
        "scalar-root" => ProblemKind::ScalarRoot { target: 2.0 },
        "subspace-newton" => ProblemKind::SubspaceNewton {
            basis: vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]],
            coeffs: vec![0.9, -0.4],
        },
        "singular-demo" => ProblemKind::SingularDemo,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "unknown built-in problem '{name}'"
            )))
        }
    };
    Ok(ProblemSpec {
        name: name.to_string(),
        kind,
        seed: None,
    })
}

/// A sensible default starting point for each problem family.
pub fn default_start(spec: &ProblemSpec) -> Result<DVector<f64>> {
    Ok(match &spec.kind {
        ProblemKind::DiskNlp { c } => DVector::zeros(c.len()),
        ProblemKind::SphereVi { p } => {
            // a point on the sphere at angle 0.3 from the solution axis
            let n = p.len();
            let mut u = DVector::zeros(n);
            u[0] = 0.3_f64.sin();
            u[n - 1] = 0.3_f64.cos();
            u
        }
        ProblemKind::OrthantAffineVi { b_vec, .. } => DVector::zeros(b_vec.len()),
        ProblemKind::BoxAffineVi { lower, .. } => DVector::from_vec(lower.clone()),
        ProblemKind::ScalarRoot { .. } => DVector::from_vec(vec![1.5]),
        ProblemKind::SubspaceNewton { basis, coeffs } => {
            let b = columns_matrix(basis)?;
            let t = DVector::from_vec(coeffs.clone());
            let shifted = t.map(|v| v + 0.25);
            &b * shifted
        }
        ProblemKind::SingularDemo => DVector::from_vec(vec![0.3, 0.4]),
        ProblemKind::RandomOrthantVi { n } => DVector::zeros(*n),
    })
}

fn columns_matrix(cols: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    if cols.is_empty() {
        return Err(Error::InvalidParameter("empty basis".into()));
    }
    let n = cols[0].len();
    if cols.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidParameter("ragged basis columns".into()));
    }
    Ok(DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i]))
}

fn square_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("matrix is not square".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Construct the generalized equation described by `spec`, attaching the
/// known solution when one is available in closed form or via an oracle.
pub fn build(spec: &ProblemSpec) -> Result<GenEqProblem> {
    match &spec.kind {
        ProblemKind::DiskNlp { c } => {
            let c = DVector::from_vec(c.clone());
            let norm = c.norm();
            if norm == 0.0 {
                return Err(Error::InvalidParameter("disk-nlp needs c != 0".into()));
            }
            let n = c.len();
            let f_c = c.clone();
            let ubar = &c / norm;
            let lambda = DVector::from_vec(vec![norm / 2.0]);
            Ok(GenEqProblem::new(
                move |_: &DVector<f64>| -f_c.clone(),
                move |_: &DVector<f64>| DMatrix::zeros(n, n),
                OperatorPart::NormalCone(ConvexSet::unit_ball(n)),
            )
            .with_known_solution(ubar, Some(lambda)))
        }
        ProblemKind::SphereVi { p } => {
            let p = DVector::from_vec(p.clone());
            let norm = p.norm();
            if norm <= 1.0 {
                return Err(Error::InvalidParameter("sphere-vi needs |p| > 1".into()));
            }
            let n = p.len();
            let sphere = Manifold::new(n, vec![SmoothScalarFn::sphere(DVector::zeros(n), 1.0)])?;
            let f_p = p.clone();
            let ubar = &p / norm;
            let lambda = DVector::from_vec(vec![(norm - 1.0) / 2.0]);
            Ok(GenEqProblem::new(
                move |u: &DVector<f64>| u - &f_p,
                move |_: &DVector<f64>| DMatrix::identity(n, n),
                OperatorPart::NormalSpace(sphere),
            )
            .with_known_solution(ubar, Some(lambda)))
        }
        ProblemKind::OrthantAffineVi { a_mat, b_vec } => {
            let a = square_matrix(a_mat)?;
            let b = DVector::from_vec(b_vec.clone());
            if a.nrows() != b.len() {
                return Err(Error::InvalidParameter("A and b sizes disagree".into()));
            }
            let n = b.len();
            let known = if n <= 10 {
                lcp_bruteforce(&a, &b).ok()
            } else {
                None
            };
            let fa = a.clone();
            let fb = b.clone();
            let ja = a.clone();
            let mut problem = GenEqProblem::new(
                move |u: &DVector<f64>| &fa * u + &fb,
                move |_: &DVector<f64>| ja.clone(),
                OperatorPart::NormalCone(ConvexSet::orthant(n)),
            );
            if let Some(ubar) = known {
                // manifold multiplier on {u_i = 0 : i active}: the negated slacks
                let slack = &a * &ubar + &b;
                let active: Vec<usize> = (0..n).filter(|&i| ubar[i].abs() <= 1e-9).collect();
                let lambda = DVector::from_iterator(active.len(), active.iter().map(|&i| -slack[i]));
                problem = problem.with_known_solution(ubar, Some(lambda));
            }
            Ok(problem)
        }
        ProblemKind::BoxAffineVi {
            lower,
            upper,
            a_mat,
            b_vec,
        } => {
            let lo = DVector::from_vec(lower.clone());
            let hi = DVector::from_vec(upper.clone());
            if lo.len() != hi.len() || (0..lo.len()).any(|i| lo[i] > hi[i]) {
                return Err(Error::InvalidParameter("box bounds invalid".into()));
            }
            let a = square_matrix(a_mat)?;
            let b = DVector::from_vec(b_vec.clone());
            let n = b.len();
            let known = if n <= 8 {
                box_vi_bruteforce(&lo, &hi, &a, &b).ok()
            } else {
                None
            };
            let fa = a.clone();
            let fb = b.clone();
            let ja = a.clone();
            let mut problem = GenEqProblem::new(
                move |u: &DVector<f64>| &fa * u + &fb,
                move |_: &DVector<f64>| ja.clone(),
                OperatorPart::NormalCone(ConvexSet::Box {
                    lower: lo.clone(),
                    upper: hi.clone(),
                }),
            );
            if let Some(ubar) = known {
                problem = problem.with_known_solution(ubar, None);
            }
            Ok(problem)
        }
        ProblemKind::ScalarRoot { target } => {
            if *target <= 0.0 {
                return Err(Error::InvalidParameter("scalar-root needs target > 0".into()));
            }
            let t = *target;
            Ok(GenEqProblem::new(
                move |u: &DVector<f64>| DVector::from_vec(vec![u[0] * u[0] - t]),
                move |u: &DVector<f64>| DMatrix::from_element(1, 1, 2.0 * u[0]),
                OperatorPart::Zero,
            )
            .with_known_solution(DVector::from_vec(vec![t.sqrt()]), Some(DVector::zeros(0))))
        }
        ProblemKind::SubspaceNewton { basis, coeffs } => {
            let b = columns_matrix(basis)?;
            let (n, k) = b.shape();
            if coeffs.len() != k {
                return Err(Error::InvalidParameter(
                    "subspace-newton coefficient length mismatch".into(),
                ));
            }
            // normal-space constraints from an orthonormal basis of span(B)^perp
            let split = linalg::row_space_split(&b.transpose(), 1e-12);
            if split.rank < k {
                return Err(Error::InvalidParameter(
                    "subspace-newton basis is rank deficient".into(),
                ));
            }
            let mut constraints = Vec::new();
            for j in 0..split.tangent.ncols() {
                constraints.push(SmoothScalarFn::affine(
                    split.tangent.column(j).into_owned(),
                    0.0,
                ));
            }
            let subspace = Manifold::new(n, constraints)?;
            let ubar = &b * DVector::from_vec(coeffs.clone());
            let d = &ubar + ubar.map(|v| v * v * v);
            let fd = d.clone();
            Ok(GenEqProblem::new(
                move |u: &DVector<f64>| u + u.map(|v| v * v * v) - &fd,
                move |u: &DVector<f64>| {
                    DMatrix::from_diagonal(&u.map(|v| 1.0 + 3.0 * v * v))
                },
                OperatorPart::NormalSpace(subspace),
            )
            .with_known_solution(ubar, Some(DVector::zeros(n - k))))
        }
        ProblemKind::SingularDemo => Ok(GenEqProblem::new(
            |u: &DVector<f64>| DVector::from_vec(vec![u[0], 0.0]),
            |_: &DVector<f64>| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            OperatorPart::Zero,
        )
        .with_known_solution(DVector::zeros(2), Some(DVector::zeros(0)))),
        ProblemKind::RandomOrthantVi { n } => {
            let materialized = random_orthant_vi(*n, spec.seed.unwrap_or(0))?;
            build(&materialized)
        }
    }
}

/// Brute-force oracle for the linear complementarity problem
/// `u >= 0, A u + b >= 0, u . (A u + b) = 0`, enumerating all 2^n active
/// sets. Errors unless exactly one candidate point passes.
pub fn lcp_bruteforce(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let n = b.len();
    if a.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            what: "lcp matrix",
            expected: n,
            got: a.nrows(),
        });
    }
    if n > 10 {
        return Err(Error::InvalidParameter("lcp oracle supports n <= 10".into()));
    }
    let tol = 1e-10 * (1.0 + b.amax());
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    for mask in 0_u32..(1 << n) {
        // coordinates in the mask are pinned to zero, the rest solve (Au + b) = 0
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) == 0).collect();
        let mut u = DVector::zeros(n);
        if !free.is_empty() {
            let sub = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -b[i]));
            let Some(sol) = linalg::solve_lu(&sub, &rhs) else {
                continue;
            };
            for (pos, &i) in free.iter().enumerate() {
                u[i] = sol[pos];
            }
        }
        let slack = a * &u + b;
        if u.iter().all(|&v| v >= -tol)
            && slack.iter().all(|&v| v >= -tol)
            && !candidates.iter().any(|c| (c - &u).amax() <= 1e-8)
        {
            candidates.push(u);
        }
    }
    match candidates.len() {
        1 => Ok(candidates.pop().unwrap()),
        0 => Err(Error::Degenerate("lcp oracle found no solution".into())),
        k => Err(Error::Degenerate(format!(
            "lcp oracle found {k} distinct solutions"
        ))),
    }
}

/// Brute-force oracle for the affine box variational inequality,
/// enumerating 3^n bound patterns.
pub fn box_vi_bruteforce(
    lower: &DVector<f64>,
    upper: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = b.len();
    if n > 8 {
        return Err(Error::InvalidParameter("box oracle supports n <= 8".into()));
    }
    let tol = 1e-10 * (1.0 + b.amax());
    let mut candidates: Vec<DVector<f64>> = Vec::new();
    let total = 3_u32.pow(n as u32);
    for code in 0..total {
        // digit 0: at lower, 1: free, 2: at upper
        let mut digits = Vec::with_capacity(n);
        let mut c = code;
        for _ in 0..n {
            digits.push(c % 3);
            c /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| digits[i] == 1).collect();
        let mut u = DVector::zeros(n);
        for i in 0..n {
            u[i] = match digits[i] {
                0 => lower[i],
                2 => upper[i],
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let sub = DMatrix::from_fn(free.len(), free.len(), |i, j| a[(free[i], free[j])]);
            let mut rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| -b[i]));
            for (pos, &i) in free.iter().enumerate() {
                for j in 0..n {
                    if digits[j] != 1 {
                        rhs[pos] -= a[(i, j)] * u[j];
                    }
                }
            }
            let Some(sol) = linalg::solve_lu(&sub, &rhs) else {
                continue;
            };
            for (pos, &i) in free.iter().enumerate() {
                u[i] = sol[pos];
            }
        }
        let slack = a * &u + b;
        let mut ok = true;
        for i in 0..n {
            ok &= match digits[i] {
                0 => slack[i] >= -tol,
                2 => slack[i] <= tol,
                _ => u[i] >= lower[i] - tol && u[i] <= upper[i] + tol && slack[i].abs() <= 1e-8,
            };
        }
        if ok && !candidates.iter().any(|c| (c - &u).amax() <= 1e-8) {
            candidates.push(u);
        }
    }
    match candidates.len() {
        1 => Ok(candidates.pop().unwrap()),
        0 => Err(Error::Degenerate("box oracle found no solution".into())),
        k => Err(Error::Degenerate(format!(
            "box oracle found {k} distinct solutions"
        ))),
    }
}

/// Seeded nondegenerate random orthant instance: `A = M^T M + I` with
/// standard-normal `M`, standard-normal `b`, rejection-resampled until the
/// oracle solution has all active multipliers and inactive slacks at least
/// `1e-3`. Deterministic for a fixed `(n, seed)`.
pub fn random_orthant_vi(n: usize, seed: u64) -> Result<ProblemSpec> {
    if n == 0 || n > 6 {
        return Err(Error::InvalidParameter(
            "random orthant instances support 1 <= n <= 6".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..100 {
        let m = DMatrix::from_fn(n, n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let a = m.transpose() * &m + DMatrix::identity(n, n);
        let b = DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        let Ok(u) = lcp_bruteforce(&a, &b) else {
            continue;
        };
        let slack = &a * &u + &b;
        let margin = 1e-3;
        let nondegenerate = (0..n).all(|i| {
            let active = u[i].abs() <= 1e-9;
            let binding = slack[i].abs() <= 1e-9;
            (active && slack[i] >= margin) || (binding && u[i] >= margin)
        });
        if !nondegenerate {
            continue;
        }
        let a_rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)]).collect())
            .collect();
        return Ok(ProblemSpec {
            name: format!("random-orthant-vi-n{n}-seed{seed}"),
            kind: ProblemKind::OrthantAffineVi {
                a_mat: a_rows,
                b_vec: b.iter().copied().collect(),
            },
            seed: Some(seed),
        });
    }
    Err(Error::Degenerate(
        "random orthant generator exceeded its resample budget".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn disk_nlp_known_solution() {
        let spec = builtin("disk-nlp").unwrap();
        let p = build(&spec).unwrap();
        let known = p.known_solution.as_ref().unwrap();
        assert_abs_diff_eq!(known.u[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(known.u[1], 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(known.lambda.as_ref().unwrap()[0], 2.5, epsilon = 1e-15);
        assert!(p.natural_residual(1.0, &known.u).unwrap() <= 1e-10);
    }

    #[test]
    fn scalar_root_known_solution() {
        let p = build(&builtin("scalar-root").unwrap()).unwrap();
        let known = p.known_solution.as_ref().unwrap();
        assert_abs_diff_eq!(known.u[0], 2.0_f64.sqrt(), epsilon = 1e-15);
        assert!(p.f_value(&known.u).norm() <= 1e-12);
    }

    #[test]
    fn orthant_vi_solution_from_oracle() {
        let p = build(&builtin("orthant-vi").unwrap()).unwrap();
        let known = p.known_solution.as_ref().unwrap();
        assert_abs_diff_eq!(known.u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(known.u[1], 0.0, epsilon = 1e-12);
        assert!(p.natural_residual(1.0, &known.u).unwrap() <= 1e-10);
    }

    #[test]
    fn sphere_vi_and_subspace_known_solutions_are_zeros() {
        for name in ["sphere-vi", "subspace-newton"] {
            let p = build(&builtin(name).unwrap()).unwrap();
            let known = p.known_solution.clone().unwrap();
            // v = -F(ubar) must lie in the operator part at ubar
            let w = -p.f_value(&known.u);
            assert!(p.psi.member(&known.u, &w, 1e-9).unwrap(), "{name}");
        }
    }

    #[test]
    fn lcp_bruteforce_hand_cases() {
        let id = DMatrix::identity(2, 2);
        let u = lcp_bruteforce(&id, &DVector::from_vec(vec![-1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.0, epsilon = 1e-12);

        let u = lcp_bruteforce(&id, &DVector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_abs_diff_eq!(u.norm(), 0.0, epsilon = 1e-12);

        let u = lcp_bruteforce(&id, &DVector::from_vec(vec![-1.0, -1.0])).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn lcp_bruteforce_rejects_degenerate() {
        // b = 0 makes u = 0 with zero slack: two index sets, one point; fine.
        let id = DMatrix::identity(1, 1);
        let u = lcp_bruteforce(&id, &DVector::zeros(1)).unwrap();
        assert_abs_diff_eq!(u[0], 0.0);
        // A = -I, b = 1: u = 0 and u = 1 both pass, genuinely degenerate
        let neg = -DMatrix::identity(1, 1);
        assert!(matches!(
            lcp_bruteforce(&neg, &DVector::from_vec(vec![1.0])),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn box_oracle_matches_clamp_for_separable_case() {
        let lo = DVector::from_vec(vec![0.0, 0.0]);
        let hi = DVector::from_vec(vec![1.0, 1.0]);
        let a = DMatrix::identity(2, 2);
        // F(u) = u - (2, 0.5): solution clamps to (1, 0.5)
        let b = DVector::from_vec(vec![-2.0, -0.5]);
        let u = box_vi_bruteforce(&lo, &hi, &a, &b).unwrap();
        assert_abs_diff_eq!(u[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn random_orthant_vi_is_deterministic_and_nondegenerate() {
        let s1 = random_orthant_vi(4, 42).unwrap();
        let s2 = random_orthant_vi(4, 42).unwrap();
        assert_eq!(
            serde_json::to_string(&s1).unwrap(),
            serde_json::to_string(&s2).unwrap()
        );
        let ProblemKind::OrthantAffineVi { a_mat, b_vec } = &s1.kind else {
            panic!("unexpected kind");
        };
        let a = square_matrix(a_mat).unwrap();
        let b = DVector::from_vec(b_vec.clone());
        assert!(lcp_bruteforce(&a, &b).is_ok());
    }

    #[test]
    fn scalar_random_instance_has_closed_form() {
        let spec = random_orthant_vi(1, 3).unwrap();
        let ProblemKind::OrthantAffineVi { a_mat, b_vec } = &spec.kind else {
            panic!("unexpected kind");
        };
        let u = lcp_bruteforce(
            &square_matrix(a_mat).unwrap(),
            &DVector::from_vec(b_vec.clone()),
        )
        .unwrap();
        let expected = (-b_vec[0] / a_mat[0][0]).max(0.0);
        assert_abs_diff_eq!(u[0], expected, epsilon = 1e-10);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(builtin("no-such-problem").is_err());
        assert!(build(&ProblemSpec {
            name: "bad".into(),
            kind: ProblemKind::DiskNlp { c: vec![0.0, 0.0] },
            seed: None,
        })
        .is_err());
        assert!(build(&ProblemSpec {
            name: "bad".into(),
            kind: ProblemKind::SphereVi { p: vec![0.5, 0.0] },
            seed: None,
        })
        .is_err());
        assert!(build(&ProblemSpec {
            name: "bad".into(),
            kind: ProblemKind::ScalarRoot { target: -1.0 },
            seed: None,
        })
        .is_err());
    }
}
