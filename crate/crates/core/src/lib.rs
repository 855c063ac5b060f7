//! Two-phase active-set Newton methods for variational inequalities and
//! generalized equations `0 in F(u) + Psi(u)`.
//!
//! The first phase iterates a projection-type map and identifies, in
//! finitely many steps, the manifold of constraints active at the
//! solution. The second phase solves the reduced equation
//! `0 in F(u) + N_M(u)` by semi-linearization: a tangent-space Newton step
//! followed by restoration onto the manifold (nearest-point projection
//! plus a least-squares multiplier refresh), which converges quadratically
//! under a transversality condition.
//!
//! Modules:
//!
//! - [`geometry`]: equality-constrained manifolds, tangent/normal bases,
//!   nearest-point projection, LICQ diagnostics.
//! - [`varcalc`]: multipliers, weighted Hessians, graphical
//!   derivative/coderivative membership, transversality margins.
//! - [`geneq`]: convex sets, operator parts and resolvents, the
//!   forward-backward map, graph restoration, merit functions.
//! - [`solver`]: semi-linearization, the manifold Newton phase, active-set
//!   identification, and the two-phase driver.
//! - [`problems`]: catalogued test problems, random instance generators,
//!   and brute-force oracles.
//! - [`checks`]: seeded verification suites behind the `verify` command.
//!
//! ```
//! use asnewton::{build, builtin, solve_two_phase, NewtonOptions, SolveStatus};
//! use nalgebra::DVector;
//!
//! // maximize 3 x1 + 4 x2 over the unit disk: the active constraint is
//! // identified in finitely many steps, then a manifold Newton phase
//! // polishes the solution (0.6, 0.8)
//! let problem = build(&builtin("disk-nlp")?)?;
//! let report = solve_two_phase(&problem, &DVector::zeros(2), 1.0, &NewtonOptions::default())?;
//! assert_eq!(report.status, SolveStatus::Converged);
//! let u = report.final_u().unwrap();
//! assert!((u[0] - 0.6).abs() < 1e-9 && (u[1] - 0.8).abs() < 1e-9);
//! # Ok::<(), asnewton::Error>(())
//! ```

pub mod catalog;
pub mod checks;
pub mod error;
pub mod geneq;
pub mod geometry;
mod linalg;
pub mod problems;
pub mod solver;
pub mod varcalc;

pub use error::{Error, Result};
pub use geneq::{ConvexSet, GenEqProblem, KnownSolution, OperatorPart};
pub use geometry::{Manifold, SmoothScalarFn};
pub use problems::{build, builtin, ProblemKind, ProblemSpec};
pub use solver::{
    fit_convergence_order, identify_phase, run_newton_phase, semi_linearize_intersection,
    solve_two_phase, IterateRecord, NewtonOptions, Phase, SolveStatus, SolverReport,
};
pub use varcalc::MultiplierResult;
