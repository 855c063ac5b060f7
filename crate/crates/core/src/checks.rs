//! Seeded property suites behind the `verify` command. Each suite runs the
//! invariants of one module and reports one result per property.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::catalog::{self, manifold_catalog};
use crate::geneq::{ConvexSet, GenEqProblem, OperatorPart};
use crate::geometry::{Manifold, SmoothScalarFn};
use crate::linalg;
use crate::problems::{self, build, builtin, ProblemKind};
use crate::solver::{
    self, newton_step_manifold, newton_step_manifold_with_basis, restore, solve_two_phase,
    NewtonOptions, Phase, SolveStatus,
};
use crate::varcalc::{
    graph_normal_member, graph_normal_member_with_basis, graph_tangent_member,
    graph_tangent_member_with_basis, multiplier_from_normal, transversality_margin,
    weighted_hessian,
};

/// Outcome of one verification property.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, body: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match body() {
        Ok(detail) => CheckResult {
            name: name.to_string(),
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name: name.to_string(),
            passed: false,
            detail,
        },
    }
}

fn randn(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| -> f64 { StandardNormal.sample(rng) })
}

fn err<T: std::fmt::Display>(e: T) -> String {
    e.to_string()
}

/// Geometry invariants: basis orthogonality, projection idempotence and
/// closed-form agreement, and finite-difference validation of the
/// catalogued constraint evaluators.
pub fn geometry_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("geometry/bases-orthonormal-complementary", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for entry in manifold_catalog() {
            let n = entry.manifold.ambient_dim();
            for _ in 0..20 {
                let x = entry.sample(&mut rng);
                let b = entry.manifold.tangent_basis(&x).map_err(err)?;
                let nb = entry.manifold.normal_basis(&x).map_err(err)?;
                let tol = 1e-10;
                let eye_t = DMatrix::identity(b.ncols(), b.ncols());
                let eye_n = DMatrix::identity(nb.ncols(), nb.ncols());
                if (b.transpose() * &b - eye_t).norm() > tol
                    || (nb.transpose() * &nb - eye_n).norm() > tol
                    || (b.transpose() * &nb).norm() > tol
                {
                    return Err(format!("{}: basis orthogonality violated", entry.name));
                }
                // joint span: B B^T + N N^T = I
                let full = &b * b.transpose() + &nb * nb.transpose();
                if (full - DMatrix::identity(n, n)).norm() > tol {
                    return Err(format!("{}: bases do not span the space", entry.name));
                }
            }
        }
        Ok("orthonormal, mutually orthogonal, jointly spanning".into())
    }));

    out.push(check("geometry/projection-idempotent", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1);
        for entry in manifold_catalog() {
            let n = entry.manifold.ambient_dim();
            for _ in 0..20 {
                // bounded perturbation, inside the region where the nearest
                // point is unique
                let mut d = randn(&mut rng, n);
                if d.norm() > 1.0 {
                    d /= d.norm();
                }
                let x = entry.sample(&mut rng) + 0.25 * d;
                let p = entry.manifold.project_default(&x).map_err(err)?;
                let q = entry.manifold.project_default(&p).map_err(err)?;
                if (&p - &q).norm() > 1e-12 {
                    return Err(format!(
                        "{}: re-projection moved by {:.3e}",
                        entry.name,
                        (&p - &q).norm()
                    ));
                }
            }
        }
        Ok("re-projection is a fixed point to 1e-12".into())
    }));

    out.push(check("geometry/projection-matches-radial", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2);
        for manifold in [catalog::unit_circle(), catalog::unit_sphere3()] {
            let n = manifold.ambient_dim();
            for _ in 0..50 {
                let dir = randn(&mut rng, n).normalize();
                let radius: f64 = rng.random_range(0.5..2.0);
                let x = dir * radius;
                let p = manifold.project_default(&x).map_err(err)?;
                let closed_form = &x / x.norm();
                if (&p - &closed_form).norm() > 1e-11 {
                    return Err(format!(
                        "radial disagreement {:.3e} at radius {radius:.3}",
                        (&p - &closed_form).norm()
                    ));
                }
            }
        }
        Ok("Newton projection agrees with radial closed form".into())
    }));

    out.push(check("geometry/derivative-finite-difference", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x3);
        for entry in manifold_catalog() {
            let n = entry.manifold.ambient_dim();
            for c in entry.manifold.constraints() {
                for _ in 0..100 {
                    let x = 2.0 * randn(&mut rng, n);
                    let g = c.gradient(&x);
                    let h = c.hessian(&x);
                    if (&h - h.transpose()).norm() > 1e-12 {
                        return Err(format!("{}: Hessian asymmetric", entry.name));
                    }
                    let step = 1e-5;
                    for j in 0..n {
                        let mut up = x.clone();
                        let mut dn = x.clone();
                        up[j] += step;
                        dn[j] -= step;
                        let fd = (c.value(&up) - c.value(&dn)) / (2.0 * step);
                        if (fd - g[j]).abs() / (1.0 + g[j].abs()) > 1e-6 {
                            return Err(format!("{}: gradient FD mismatch", entry.name));
                        }
                        let fd_col = (c.gradient(&up) - c.gradient(&dn)) / (2.0 * step);
                        for i in 0..n {
                            if (fd_col[i] - h[(i, j)]).abs() / (1.0 + h[(i, j)].abs()) > 1e-6 {
                                return Err(format!("{}: Hessian FD mismatch", entry.name));
                            }
                        }
                    }
                }
            }
        }
        Ok("gradients and Hessians match central differences".into())
    }));

    out
}

type MemberTuple = (DVector<f64>, DVector<f64>, DVector<f64>);

/// A mix of random and deliberately constructed membership tuples at a
/// point `u` with normal `v`.
fn membership_tuple(
    m: &Manifold,
    u: &DVector<f64>,
    rng: &mut ChaCha8Rng,
    constructed: bool,
) -> Result<MemberTuple, String> {
    let n = m.ambient_dim();
    let jac = m.constraint_jacobian(u).map_err(err)?;
    let lambda = randn(rng, m.num_constraints());
    let v = jac.transpose() * &lambda;
    if constructed {
        // an actual member: w tangent, z = H w + normal part
        let b = m.tangent_basis(u).map_err(err)?;
        let w = &b * randn(rng, b.ncols());
        let h = weighted_hessian(m, u, &lambda).map_err(err)?;
        let z = &h * &w + jac.transpose() * randn(rng, m.num_constraints());
        Ok((v, w, z))
    } else {
        Ok((v, randn(rng, n), randn(rng, n)))
    }
}

/// Second-order calculus invariants. `break_equality` deliberately flips
/// one coderivative answer so the harness can prove it detects failures.
pub fn varcalc_suite(seed: u64, break_equality: bool) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let tol = crate::varcalc::DEFAULT_MEMBER_TOL;

    out.push(check("varcalc/derivative-coderivative-equality", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x10);
        let mut flipped = break_equality;
        for entry in manifold_catalog() {
            for trial in 0..100 {
                let u = entry.sample(&mut rng);
                let (v, w, z) =
                    membership_tuple(&entry.manifold, &u, &mut rng, trial % 3 == 0)?;
                let tangent =
                    graph_tangent_member(&entry.manifold, &u, &v, &w, &z, tol).map_err(err)?;
                let mut normal =
                    graph_normal_member(&entry.manifold, &u, &v, &z, &w, tol).map_err(err)?;
                if flipped {
                    normal = !normal;
                    flipped = false;
                }
                if tangent != normal {
                    return Err(format!(
                        "{}: derivative and coderivative disagree on trial {trial}",
                        entry.name
                    ));
                }
            }
        }
        Ok("graphical derivative equals coderivative on 400 tuples".into())
    }));

    out.push(check("varcalc/membership-basis-invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
        for entry in manifold_catalog() {
            for trial in 0..10 {
                let u = entry.sample(&mut rng);
                let (v, w, z) =
                    membership_tuple(&entry.manifold, &u, &mut rng, trial % 2 == 0)?;
                let basis = entry.manifold.tangent_basis(&u).map_err(err)?;
                let q = linalg::random_orthogonal(basis.ncols(), &mut rng);
                let rotated = &basis * q;
                let t0 =
                    graph_tangent_member(&entry.manifold, &u, &v, &w, &z, tol).map_err(err)?;
                let t1 = graph_tangent_member_with_basis(
                    &entry.manifold,
                    &u,
                    &v,
                    &w,
                    &z,
                    tol,
                    &rotated,
                )
                .map_err(err)?;
                let n0 =
                    graph_normal_member(&entry.manifold, &u, &v, &z, &w, tol).map_err(err)?;
                let n1 = graph_normal_member_with_basis(
                    &entry.manifold,
                    &u,
                    &v,
                    &z,
                    &w,
                    tol,
                    &rotated,
                )
                .map_err(err)?;
                if t0 != t1 || n0 != n1 {
                    return Err(format!("{}: decision changed under re-basing", entry.name));
                }
            }
        }
        Ok("membership decisions are invariant under re-basing".into())
    }));

    out.push(check("varcalc/membership-homogeneity", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x12);
        for entry in manifold_catalog() {
            for trial in 0..40 {
                let u = entry.sample(&mut rng);
                let (v, w, z) =
                    membership_tuple(&entry.manifold, &u, &mut rng, trial % 2 == 0)?;
                let base = graph_tangent_member(&entry.manifold, &u, &v, &w, &z, tol)
                    .map_err(err)?;
                for t in [0.5, 2.0] {
                    let scaled = graph_tangent_member(
                        &entry.manifold,
                        &u,
                        &v,
                        &(&w * t),
                        &(&z * t),
                        tol,
                    )
                    .map_err(err)?;
                    if scaled != base {
                        return Err(format!(
                            "{}: membership not homogeneous at t = {t}",
                            entry.name
                        ));
                    }
                }
            }
        }
        Ok("graph tangent cone is positively homogeneous".into())
    }));

    out.push(check("varcalc/multiplier-round-trip", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x13);
        for entry in manifold_catalog() {
            for _ in 0..50 {
                let u = entry.sample(&mut rng);
                let lambda = randn(&mut rng, entry.manifold.num_constraints());
                let jac = entry.manifold.constraint_jacobian(&u).map_err(err)?;
                let v = jac.transpose() * &lambda;
                let result = multiplier_from_normal(&entry.manifold, &u, &v).map_err(err)?;
                if (&result.lambda - &lambda).norm() > 1e-10 {
                    return Err(format!("{}: multiplier round trip drifted", entry.name));
                }
                if result.residual_norm > 1e-10 * (1.0 + v.norm()) {
                    return Err(format!("{}: normal vector left residual", entry.name));
                }
            }
        }
        Ok("lambda -> J^T lambda -> lambda is the identity".into())
    }));

    out
}

/// Test problems exercised by the restoration and gap checks.
fn geneq_problem_zoo() -> Vec<(String, GenEqProblem)> {
    let mut zoo: Vec<(String, GenEqProblem)> = Vec::new();
    for name in ["disk-nlp", "orthant-vi", "sphere-vi", "scalar-root", "subspace-newton"] {
        zoo.push((name.to_string(), build(&builtin(name).unwrap()).unwrap()));
    }
    // box variational inequality
    zoo.push((
        "box-vi".into(),
        build(&crate::problems::ProblemSpec {
            name: "box-vi".into(),
            kind: ProblemKind::BoxAffineVi {
                lower: vec![0.0, 0.0],
                upper: vec![1.0, 1.0],
                a_mat: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                b_vec: vec![-2.0, -0.5],
            },
            seed: None,
        })
        .unwrap(),
    ));
    // soft-thresholding operator part
    let d = DVector::from_vec(vec![2.0, -0.3, 0.7]);
    zoo.push((
        "lasso".into(),
        GenEqProblem::new(
            move |u: &DVector<f64>| u - &d,
            |_| DMatrix::identity(3, 3),
            OperatorPart::ScaledL1 { weight: 1.0 },
        ),
    ));
    zoo
}

/// Keeps samples inside the region where a manifold nearest-point
/// projection is single-valued.
fn sample_for_problem(problem: &GenEqProblem, rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    match &problem.psi {
        OperatorPart::NormalSpace(m) if m.constraints().len() == 1 => {
            // sphere-like: stay in an annulus around the manifold
            let dir = randn(rng, n).normalize();
            let radius: f64 = rng.random_range(0.6..1.8);
            dir * radius
        }
        _ => randn(rng, n),
    }
}

/// Generalized-equation invariants: resolvent nonexpansiveness, graph
/// restoration, merit-function signs, the natural-residual solution
/// characterization, and oracle KKT verification.
pub fn geneq_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();

    out.push(check("geneq/resolvent-nonexpansive", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x20);
        let poly = ConvexSet::Polyhedron {
            a: DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.5, 0.0, -1.0]),
            b: DVector::from_vec(vec![1.0, 0.5, 0.25]),
        };
        let variants: Vec<(&str, OperatorPart, usize)> = vec![
            ("zero", OperatorPart::Zero, 3),
            ("scaled-l1", OperatorPart::ScaledL1 { weight: 1.0 }, 3),
            (
                "normal-cone-box",
                OperatorPart::NormalCone(ConvexSet::Box {
                    lower: DVector::from_vec(vec![-1.0, 0.0]),
                    upper: DVector::from_vec(vec![1.0, 2.0]),
                }),
                2,
            ),
            (
                "normal-cone-orthant",
                OperatorPart::NormalCone(ConvexSet::orthant(3)),
                3,
            ),
            (
                "normal-cone-ball",
                OperatorPart::NormalCone(ConvexSet::unit_ball(2)),
                2,
            ),
            ("normal-cone-polyhedron", OperatorPart::NormalCone(poly), 2),
            (
                "normal-space-line",
                OperatorPart::NormalSpace(catalog::diagonal_line()),
                2,
            ),
        ];
        for (name, psi, n) in &variants {
            for _ in 0..100 {
                let x = 2.0 * randn(&mut rng, *n);
                let y = 2.0 * randn(&mut rng, *n);
                let rx = psi.resolvent(0.7, &x).map_err(err)?;
                let ry = psi.resolvent(0.7, &y).map_err(err)?;
                if (rx - ry).norm() > (&x - &y).norm() + 1e-10 {
                    return Err(format!("{name}: resolvent expanded a pair"));
                }
            }
        }
        // the circle normal-space resolvent is nonexpansive outside the
        // unit disk, where the nearest point is single-valued
        let circle = OperatorPart::NormalSpace(catalog::unit_circle());
        for _ in 0..100 {
            let dx = randn(&mut rng, 2).normalize() * rng.random_range(1.0..2.0);
            let dy = randn(&mut rng, 2).normalize() * rng.random_range(1.0..2.0);
            let rx = circle.resolvent(0.7, &dx).map_err(err)?;
            let ry = circle.resolvent(0.7, &dy).map_err(err)?;
            if (rx - ry).norm() > (&dx - &dy).norm() + 1e-10 {
                return Err("circle: resolvent expanded a pair in the annulus".into());
            }
        }
        Ok("resolvents are nonexpansive on 800 pairs".into())
    }));

    out.push(check("geneq/projection-variational-characterization", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x24);
        let sets: Vec<(&str, ConvexSet, usize)> = vec![
            (
                "box",
                ConvexSet::Box {
                    lower: DVector::from_vec(vec![-1.0, 0.0]),
                    upper: DVector::from_vec(vec![1.0, 2.0]),
                },
                2,
            ),
            ("orthant", ConvexSet::orthant(3), 3),
            ("ball", ConvexSet::unit_ball(2), 2),
            (
                "polyhedron",
                ConvexSet::Polyhedron {
                    a: DMatrix::from_row_slice(3, 2, &[1.0, 1.0, -1.0, 0.5, 0.0, -1.0]),
                    b: DVector::from_vec(vec![1.0, 0.5, 0.25]),
                },
                2,
            ),
            (
                "smooth-disk",
                ConvexSet::SmoothIneq {
                    constraints: vec![SmoothScalarFn::sphere(DVector::zeros(2), 1.0)],
                },
                2,
            ),
        ];
        for (name, k, n) in &sets {
            for _ in 0..100 {
                let x = 2.0 * randn(&mut rng, *n);
                let p = k.project(&x).map_err(err)?;
                if !k.contains(&p, 1e-9) {
                    return Err(format!("{name}: projection left the set"));
                }
                // <x - p, y - p> <= 0 for any y in the set
                let y = k.project(&(2.0 * randn(&mut rng, *n))).map_err(err)?;
                if (&x - &p).dot(&(&y - &p)) > 1e-10 {
                    return Err(format!("{name}: variational characterization violated"));
                }
            }
        }
        Ok("projections satisfy the variational characterization".into())
    }));

    out.push(check("geneq/resolvent-graph-membership", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x25);
        let variants: Vec<(&str, OperatorPart, usize)> = vec![
            ("zero", OperatorPart::Zero, 2),
            ("scaled-l1", OperatorPart::ScaledL1 { weight: 0.8 }, 3),
            (
                "normal-cone-orthant",
                OperatorPart::NormalCone(ConvexSet::orthant(3)),
                3,
            ),
            (
                "normal-cone-ball",
                OperatorPart::NormalCone(ConvexSet::unit_ball(2)),
                2,
            ),
            (
                "normal-space-line",
                OperatorPart::NormalSpace(catalog::diagonal_line()),
                2,
            ),
        ];
        for (name, psi, n) in &variants {
            for _ in 0..100 {
                let x = 2.0 * randn(&mut rng, *n);
                let step = 0.7;
                let r = psi.resolvent(step, &x).map_err(err)?;
                let w = (&x - &r) / step;
                if !psi.member(&r, &w, 1e-10).map_err(err)? {
                    return Err(format!("{name}: (x - r)/step is not in Psi(r)"));
                }
            }
        }
        Ok("resolvent outputs satisfy the graph inclusion".into())
    }));

    out.push(check("geneq/restore-graph-membership", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x21);
        for (name, problem) in geneq_problem_zoo() {
            let n = problem
                .known_solution
                .as_ref()
                .map(|k| k.u.len())
                .unwrap_or(3);
            for _ in 0..100 {
                let u = sample_for_problem(&problem, &mut rng, n);
                let (u_plus, v_plus) = problem.restore_to_graph(0.7, &u).map_err(err)?;
                let w = &v_plus - problem.f_value(&u_plus);
                if !problem.psi.member(&u_plus, &w, 1e-10).map_err(err)? {
                    return Err(format!("{name}: restored pair left the graph"));
                }
            }
        }
        Ok("restored pairs satisfy v+ - F(u+) in Psi(u+)".into())
    }));

    out.push(check("geneq/gap-functions", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
        for name in ["disk-nlp", "orthant-vi"] {
            let problem = build(&builtin(name).unwrap()).unwrap();
            let OperatorPart::NormalCone(k) = &problem.psi else {
                unreachable!()
            };
            let known = problem.known_solution.clone().unwrap();
            let n = known.u.len();
            for _ in 0..100 {
                let feasible = k.project(&(2.0 * randn(&mut rng, n))).map_err(err)?;
                let gap = problem.regularized_gap(crate::geneq::DEFAULT_GAP_A, &feasible).map_err(err)?;
                if gap < -1e-12 {
                    return Err(format!("{name}: regularized gap negative ({gap:.3e})"));
                }
                let anywhere = 3.0 * randn(&mut rng, n);
                let dgap = problem.d_gap(crate::geneq::DEFAULT_GAP_A, crate::geneq::DEFAULT_GAP_B, &anywhere).map_err(err)?;
                if dgap < -1e-12 {
                    return Err(format!("{name}: d-gap negative ({dgap:.3e})"));
                }
                // away from the solution both merit functions are positive
                if (&anywhere - &known.u).norm() >= 1e-3 && dgap <= 1e-12 {
                    return Err(format!("{name}: d-gap vanished off the solution"));
                }
            }
            if problem.regularized_gap(crate::geneq::DEFAULT_GAP_A, &known.u).map_err(err)?.abs() > 1e-10 {
                return Err(format!("{name}: regularized gap nonzero at the solution"));
            }
            if problem.d_gap(crate::geneq::DEFAULT_GAP_A, crate::geneq::DEFAULT_GAP_B, &known.u).map_err(err)?.abs() > 1e-10 {
                return Err(format!("{name}: d-gap nonzero at the solution"));
            }
            // parameter scaling moves the value but not the zero set
            let probe = &known.u + DVector::from_vec(vec![0.3, 0.2]);
            let d1 = problem.d_gap(2.0, 1.0, &probe).map_err(err)?;
            let d2 = problem.d_gap(crate::geneq::DEFAULT_GAP_A, crate::geneq::DEFAULT_GAP_B, &probe).map_err(err)?;
            if d1 <= 0.0 || d2 <= 0.0 {
                return Err(format!("{name}: scaled d-gap lost positivity"));
            }
            if (d1 - d2).abs() <= 1e-12 {
                return Err(format!("{name}: scaled d-gaps unexpectedly coincide"));
            }
        }
        Ok("gap functions are nonnegative and vanish only at solutions".into())
    }));

    out.push(check("geneq/natural-residual-characterization", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x23);
        for (name, problem) in geneq_problem_zoo() {
            let Some(known) = problem.known_solution.clone() else {
                continue;
            };
            let residual = problem.natural_residual(1.0, &known.u).map_err(err)?;
            if residual > 1e-10 {
                return Err(format!("{name}: natural residual {residual:.3e} at solution"));
            }
            for _ in 0..100 {
                let mut u = &known.u + 0.5 * randn(&mut rng, known.u.len());
                if (&u - &known.u).norm() < 1e-3 {
                    u[0] += 0.01;
                }
                if problem.natural_residual(1.0, &u).map_err(err)? <= 1e-9 {
                    return Err(format!("{name}: natural residual vanished off-solution"));
                }
            }
        }
        Ok("natural residual vanishes exactly at catalogued solutions".into())
    }));

    out.push(check("geneq/lcp-oracle-kkt", || {
        let mut checked = 0;
        for seed_offset in 0..50_u64 {
            let n = 1 + (seed_offset as usize) % 6;
            let spec = problems::random_orthant_vi(n, seed ^ (1000 + seed_offset)).map_err(err)?;
            let ProblemKind::OrthantAffineVi { a_mat, b_vec } = &spec.kind else {
                return Err("generator returned an unexpected kind".into());
            };
            let a = DMatrix::from_fn(n, n, |i, j| a_mat[i][j]);
            let b = DVector::from_vec(b_vec.clone());
            let u = problems::lcp_bruteforce(&a, &b).map_err(err)?;
            let slack = &a * &u + &b;
            if u.min() < -1e-10 || slack.min() < -1e-10 || u.dot(&slack).abs() > 1e-8 {
                return Err(format!("instance {seed_offset}: oracle output violates KKT"));
            }
            // fixed-point characterization: zero residual at the solution,
            // positive residual away from it
            let problem = build(&spec).map_err(err)?;
            if problem.natural_residual(1.0, &u).map_err(err)? > 1e-8 {
                return Err(format!("instance {seed_offset}: solution fails the residual test"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (2000 + seed_offset));
            for _ in 0..5 {
                let mut probe = &u + 0.4 * randn(&mut rng, n);
                if (&probe - &u).norm() < 1e-3 {
                    probe[0] += 0.01;
                }
                if problem.natural_residual(1.0, &probe).map_err(err)? <= 1e-8 {
                    return Err(format!(
                        "instance {seed_offset}: residual vanished off the solution"
                    ));
                }
            }
            checked += 1;
        }
        Ok(format!(
            "{checked} oracle solutions pass independent KKT and residual checks"
        ))
    }));

    out
}

/// Perturbs a known solution along its active manifold to the requested
/// distance. Returns the start point and its manifold.
fn perturbed_start(
    problem: &GenEqProblem,
    manifold: &Manifold,
    distance: f64,
    rng: &mut ChaCha8Rng,
) -> Result<DVector<f64>, String> {
    let known = problem
        .known_solution
        .as_ref()
        .ok_or("problem has no known solution")?;
    let basis = manifold.tangent_basis(&known.u).map_err(err)?;
    if basis.ncols() == 0 {
        return Err("active manifold has no tangent directions".into());
    }
    let dir = (&basis * randn(rng, basis.ncols())).normalize();
    // scale slightly inward so curvature cannot push the realized
    // distance past the requested one
    let trial = &known.u + dir * (0.999 * distance);
    manifold.project_default(&trial).map_err(err)
}

fn known_manifold(problem: &GenEqProblem) -> Result<Manifold, String> {
    solver::known_active_manifold(problem).map_err(err)
}

/// Solver invariants: contraction constants, solution fixed points,
/// finite identification, basis invariance, and the transversality
/// safeguard.
pub fn solver_suite(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let opts = NewtonOptions::default();

    out.push(check("solver/quadratic-contraction", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x30);
        for name in ["scalar-root", "subspace-newton", "disk-nlp", "sphere-vi"] {
            let problem = build(&builtin(name).unwrap()).unwrap();
            let manifold = known_manifold(&problem)?;
            let mut constants: Vec<f64> = Vec::new();
            let mut exact_runs = 0;
            for distance in [1e-1, 1e-2] {
                let u0 = perturbed_start(&problem, &manifold, distance, &mut rng)?;
                let (_, lambda0) = restore(&problem, &manifold, &u0).map_err(err)?;
                let report =
                    solver::run_newton_phase(&problem, &manifold, &u0, &lambda0, &opts)
                        .map_err(err)?;
                if report.status != SolveStatus::Converged {
                    return Err(format!("{name}: newton phase failed from {distance:.0e}"));
                }
                let es: Vec<f64> = report
                    .history
                    .iter()
                    .filter_map(|r| r.dist_to_solution)
                    .collect();
                let mut c_run: Option<f64> = None;
                for w in es.windows(2) {
                    // pairs at the projection-accuracy floor measure noise,
                    // not contraction
                    if w[0] > 1e-11 && w[1] > 1e-11 {
                        let c = w[1] / (w[0] * w[0]);
                        c_run = Some(c_run.map_or(c, |prev: f64| prev.max(c)));
                    }
                }
                match c_run {
                    Some(c) => constants.push(c),
                    None => exact_runs += 1,
                }
            }
            if constants.len() == 2 {
                let ratio = (constants[0] / constants[1]).max(constants[1] / constants[0]);
                if ratio > 10.0 {
                    return Err(format!(
                        "{name}: contraction constant unstable ({constants:?})"
                    ));
                }
            } else if exact_runs == 0 {
                return Err(format!("{name}: no contraction data"));
            }
        }
        Ok("contraction constants stable (or convergence exact) on 4 problems".into())
    }));

    out.push(check("solver/fixed-point-at-solution", || {
        for name in ["disk-nlp", "sphere-vi", "scalar-root", "subspace-newton"] {
            let problem = build(&builtin(name).unwrap()).unwrap();
            let manifold = known_manifold(&problem)?;
            let known = problem.known_solution.clone().unwrap();
            let (u0, lambda0) = restore(&problem, &manifold, &known.u).map_err(err)?;
            let (w, _) = newton_step_manifold(&problem, &manifold, &u0, &lambda0).map_err(err)?;
            let (u1, _) = restore(&problem, &manifold, &w).map_err(err)?;
            if (&u1 - &known.u).norm() > 1e-10 {
                return Err(format!(
                    "{name}: full iteration moved the solution by {:.3e}",
                    (&u1 - &known.u).norm()
                ));
            }
        }
        Ok("one Newton + restore iteration fixes every catalogued solution".into())
    }));

    out.push(check("solver/identification-finiteness", || {
        // disk from the origin at two step parameters, plus the orthant
        for (name, a) in [("disk-nlp", 1.0), ("disk-nlp", 4.0), ("orthant-vi", 1.0)] {
            let problem = build(&builtin(name).unwrap()).unwrap();
            let known = problem.known_solution.clone().unwrap();
            let OperatorPart::NormalCone(k) = &problem.psi else {
                unreachable!()
            };
            let expected = k.active_set(&known.u, 1e-8);
            let u0 = DVector::zeros(known.u.len());
            let report = solve_two_phase(&problem, &u0, a, &opts).map_err(err)?;
            if report.status != SolveStatus::Converged {
                return Err(format!("{name}: driver did not converge"));
            }
            let switch = report.switch_iteration.ok_or("missing switch iteration")?;
            if switch > 200 {
                return Err(format!("{name}: identification took {switch} iterations"));
            }
            // once identified, every projected iterate carries the final set
            let identify: Vec<_> = report
                .history
                .iter()
                .filter(|r| r.phase == Phase::Identify)
                .collect();
            let k_identify = identify
                .iter()
                .position(|r| r.active_set == expected)
                .ok_or_else(|| format!("{name}: expected active set never appeared"))?;
            for r in &identify[k_identify..] {
                if r.active_set != expected {
                    return Err(format!("{name}: active set changed after identification"));
                }
            }
        }
        // seeded random instances with a contraction-safe step parameter
        let mut verified = 0;
        for s in 0..10_u64 {
            let n = 2 + (s as usize) % 5;
            let spec = problems::random_orthant_vi(n, seed ^ (7000 + s)).map_err(err)?;
            let ProblemKind::OrthantAffineVi { a_mat, .. } = &spec.kind else {
                unreachable!()
            };
            let a_matrix = DMatrix::from_fn(n, n, |i, j| a_mat[i][j]);
            let l_max = nalgebra::SymmetricEigen::new(a_matrix).eigenvalues.max();
            let problem = build(&spec).map_err(err)?;
            let known = problem.known_solution.clone().unwrap();
            let OperatorPart::NormalCone(k) = &problem.psi else {
                unreachable!()
            };
            let expected = k.active_set(&known.u, 1e-8);
            let report =
                solve_two_phase(&problem, &DVector::zeros(n), 1.05 * l_max, &opts).map_err(err)?;
            if report.status != SolveStatus::Converged {
                return Err(format!("random instance {s}: driver did not converge"));
            }
            let identify: Vec<_> = report
                .history
                .iter()
                .filter(|r| r.phase == Phase::Identify)
                .collect();
            let last = identify.last().ok_or("no identify records")?;
            if last.active_set != expected {
                return Err(format!("random instance {s}: identified the wrong set"));
            }
            verified += 1;
        }
        Ok(format!(
            "identification finite and correct on 3 catalogued runs and {verified} random instances"
        ))
    }));

    out.push(check("solver/newton-step-basis-invariance", || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x31);
        for name in ["disk-nlp", "sphere-vi"] {
            let problem = build(&builtin(name).unwrap()).unwrap();
            let manifold = known_manifold(&problem)?;
            for _ in 0..10 {
                let known = problem.known_solution.clone().unwrap();
                let trial = &known.u + 0.2 * randn(&mut rng, known.u.len());
                let u = manifold.project_default(&trial).map_err(err)?;
                let (_, lambda) = restore(&problem, &manifold, &u).map_err(err)?;
                let (w_ref, _) =
                    newton_step_manifold(&problem, &manifold, &u, &lambda).map_err(err)?;
                let basis = manifold.tangent_basis(&u).map_err(err)?;
                let q = linalg::random_orthogonal(basis.ncols(), &mut rng);
                let (w, _) = newton_step_manifold_with_basis(
                    &problem, &manifold, &u, &lambda, &(&basis * q),
                )
                .map_err(err)?;
                if (&w - &w_ref).norm() > 1e-10 {
                    return Err(format!("{name}: newton step changed under re-basing"));
                }
            }
        }
        Ok("newton step invariant under tangent re-basing".into())
    }));

    out.push(check("solver/transversality-safeguard", || {
        let problem = build(&builtin("singular-demo").unwrap()).unwrap();
        let known = problem.known_solution.clone().unwrap();
        let free = Manifold::free(2);
        let f_jac = |x: &DVector<f64>| problem.f_jacobian(x);
        let margin =
            transversality_margin(&free, &f_jac, &known.u, &DVector::zeros(0)).map_err(err)?;
        if margin > 1e-10 {
            return Err(format!("singular demo has margin {margin:.3e}"));
        }
        let report = solve_two_phase(
            &problem,
            &DVector::from_vec(vec![0.3, 0.4]),
            1.0,
            &opts,
        )
        .map_err(err)?;
        if report.status == SolveStatus::Converged {
            return Err("solver claimed convergence on the singular instance".into());
        }
        if report.status != SolveStatus::TransversalityFail {
            return Err(format!("expected transversality failure, got {:?}", report.status));
        }
        Ok("singular instance is rejected with a transversality failure".into())
    }));

    out
}

/// Suites accepted by the verify command.
pub const SUITES: [&str; 5] = ["geometry", "varcalc", "geneq", "solver", "all"];

/// Runs the named suite. `break_equality` is a harness self-test hook that
/// flips one coderivative answer inside the varcalc suite.
pub fn run_suite(
    name: &str,
    seed: u64,
    break_equality: bool,
) -> crate::error::Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    match name {
        "geometry" => results.extend(geometry_suite(seed)),
        "varcalc" => results.extend(varcalc_suite(seed, break_equality)),
        "geneq" => results.extend(geneq_suite(seed)),
        "solver" => results.extend(solver_suite(seed)),
        "all" => {
            results.extend(geometry_suite(seed));
            results.extend(varcalc_suite(seed, break_equality));
            results.extend(geneq_suite(seed));
            results.extend(solver_suite(seed));
        }
        other => {
            return Err(crate::error::Error::InvalidParameter(format!(
                "unknown suite '{other}'"
            )))
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_suites_pass_with_default_seed() {
        let results = run_suite("all", 7, false).unwrap();
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert!(results.len() >= 12);
    }

    #[test]
    fn sabotage_flag_trips_the_equality_check() {
        let results = varcalc_suite(7, true);
        let eq = results
            .iter()
            .find(|r| r.name.contains("derivative-coderivative"))
            .unwrap();
        assert!(!eq.passed);
    }
}
