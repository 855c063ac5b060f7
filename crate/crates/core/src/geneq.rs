//! Generalized-equation plumbing: convex set descriptions with projections,
//! operator parts with single-valued resolvents, the forward-backward map,
//! restoration onto the graph of `F + Psi`, the natural residual, and the
//! regularized gap and D-gap merit functions.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::{Manifold, SmoothScalarFn};
use crate::linalg;

/// Default activity tolerance for `active_set`.
pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-6;

/// Default regularized-gap parameter.
pub const DEFAULT_GAP_A: f64 = 1.0;

/// Default second D-gap parameter (must stay below [`DEFAULT_GAP_A`]).
pub const DEFAULT_GAP_B: f64 = 0.5;

/// Desk-scale limits for the enumerative polyhedron projection.
const POLY_MAX_ROWS: usize = 16;
const POLY_MAX_DIM: usize = 8;

/// Description of a closed convex set.
///
/// For `Box`, active-set indices encode the side: `i` means `x_i` at the
/// lower bound and `n + i` means `x_i` at the upper bound.
#[derive(Clone)]
pub enum ConvexSet {
    /// `{x : lower <= x <= upper}` componentwise.
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Nonnegative orthant `{x >= 0}` in dimension `dim`.
    Orthant { dim: usize },
    /// Euclidean ball `{ |x - center| <= radius }`.
    Ball { center: DVector<f64>, radius: f64 },
    /// `{x : A x <= b}` row by row.
    Polyhedron { a: DMatrix<f64>, b: DVector<f64> },
    /// `{x : g_i(x) <= 0}` for smooth `g_i`. Projection is a local
    /// active-set computation and is flagged `Unsupported` when it cannot
    /// certify a nearest point (possibly nonconvex region).
    SmoothIneq { constraints: Vec<SmoothScalarFn> },
}

impl ConvexSet {
    pub fn orthant(dim: usize) -> Self {
        ConvexSet::Orthant { dim }
    }

    pub fn unit_ball(dim: usize) -> Self {
        ConvexSet::Ball {
            center: DVector::zeros(dim),
            radius: 1.0,
        }
    }

    /// Worst constraint violation at `x` (zero inside the set).
    pub fn violation(&self, x: &DVector<f64>) -> f64 {
        match self {
            ConvexSet::Box { lower, upper } => {
                let mut v = 0.0_f64;
                for i in 0..x.len() {
                    v = v.max(lower[i] - x[i]).max(x[i] - upper[i]);
                }
                v.max(0.0)
            }
            ConvexSet::Orthant { .. } => (-x.min()).max(0.0),
            ConvexSet::Ball { center, radius } => ((x - center).norm() - radius).max(0.0),
            ConvexSet::Polyhedron { a, b } => {
                let r = a * x - b;
                r.iter().fold(0.0_f64, |acc, v| acc.max(*v))
            }
            ConvexSet::SmoothIneq { constraints } => constraints
                .iter()
                .fold(0.0_f64, |acc, g| acc.max(g.value(x))),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.violation(x) <= tol
    }

    /// Nearest-point projection onto the set.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            ConvexSet::Box { lower, upper } => {
                let mut p = x.clone();
                for i in 0..p.len() {
                    p[i] = p[i].max(lower[i]).min(upper[i]);
                }
                Ok(p)
            }
            ConvexSet::Orthant { .. } => Ok(x.map(|v| v.max(0.0))),
            ConvexSet::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + d * (*radius / n))
                }
            }
            ConvexSet::Polyhedron { a, b } => project_polyhedron(a, b, x),
            ConvexSet::SmoothIneq { constraints } => project_smooth_ineq(constraints, x),
        }
    }

    /// Indices of constraints active at `y` within `tol`. `y` is expected
    /// to be feasible up to `tol`.
    pub fn active_set(&self, y: &DVector<f64>, tol: f64) -> Vec<usize> {
        let mut idx = Vec::new();
        match self {
            ConvexSet::Box { lower, upper } => {
                let n = y.len();
                for i in 0..n {
                    if (y[i] - lower[i]).abs() <= tol {
                        idx.push(i);
                    } else if (y[i] - upper[i]).abs() <= tol {
                        idx.push(n + i);
                    }
                }
            }
            ConvexSet::Orthant { .. } => {
                for i in 0..y.len() {
                    if y[i].abs() <= tol {
                        idx.push(i);
                    }
                }
            }
            ConvexSet::Ball { center, radius } => {
                if ((y - center).norm() - radius).abs() <= tol {
                    idx.push(0);
                }
            }
            ConvexSet::Polyhedron { a, b } => {
                let r = a * y - b;
                for i in 0..r.len() {
                    if r[i].abs() <= tol {
                        idx.push(i);
                    }
                }
            }
            ConvexSet::SmoothIneq { constraints } => {
                for (i, g) in constraints.iter().enumerate() {
                    if g.value(y).abs() <= tol {
                        idx.push(i);
                    }
                }
            }
        }
        idx
    }

    /// Equality-constrained manifold cut out by the active constraints.
    /// An empty index set yields the whole space.
    pub fn active_manifold(&self, active: &[usize], ambient_dim: usize) -> Result<Manifold> {
        let mut constraints = Vec::with_capacity(active.len());
        match self {
            ConvexSet::Box { lower, upper } => {
                let n = lower.len();
                for &i in active {
                    if i < n {
                        constraints.push(SmoothScalarFn::coordinate(n, i, lower[i]));
                    } else if i < 2 * n {
                        constraints.push(SmoothScalarFn::coordinate(n, i - n, upper[i - n]));
                    } else {
                        return Err(Error::InvalidParameter(format!(
                            "box active index {i} out of range"
                        )));
                    }
                }
            }
            ConvexSet::Orthant { dim } => {
                for &i in active {
                    if i >= *dim {
                        return Err(Error::InvalidParameter(format!(
                            "orthant active index {i} out of range"
                        )));
                    }
                    constraints.push(SmoothScalarFn::coordinate(*dim, i, 0.0));
                }
            }
            ConvexSet::Ball { center, radius } => {
                for &i in active {
                    if i != 0 {
                        return Err(Error::InvalidParameter(format!(
                            "ball active index {i} out of range"
                        )));
                    }
                    constraints.push(SmoothScalarFn::sphere(center.clone(), *radius));
                }
            }
            ConvexSet::Polyhedron { a, b } => {
                for &i in active {
                    if i >= a.nrows() {
                        return Err(Error::InvalidParameter(format!(
                            "polyhedron active index {i} out of range"
                        )));
                    }
                    constraints.push(SmoothScalarFn::affine(a.row(i).transpose(), b[i]));
                }
            }
            ConvexSet::SmoothIneq { constraints: g } => {
                for &i in active {
                    if i >= g.len() {
                        return Err(Error::InvalidParameter(format!(
                            "inequality active index {i} out of range"
                        )));
                    }
                    constraints.push(g[i].clone());
                }
            }
        }
        Manifold::new(ambient_dim, constraints)
    }

    /// Outward gradients of the active inequality constraints at `y`,
    /// as matrix columns. Used by the nondegeneracy test.
    fn active_gradients(&self, active: &[usize], y: &DVector<f64>) -> Result<DMatrix<f64>> {
        let n = y.len();
        let mut cols: Vec<DVector<f64>> = Vec::with_capacity(active.len());
        match self {
            ConvexSet::Box { lower, .. } => {
                let nb = lower.len();
                for &i in active {
                    let mut g = DVector::zeros(n);
                    if i < nb {
                        g[i] = -1.0; // lower bound: -x_i + l_i <= 0
                    } else {
                        g[i - nb] = 1.0; // upper bound: x_i - u_i <= 0
                    }
                    cols.push(g);
                }
            }
            ConvexSet::Orthant { .. } => {
                for &i in active {
                    let mut g = DVector::zeros(n);
                    g[i] = -1.0;
                    cols.push(g);
                }
            }
            ConvexSet::Ball { center, .. } => {
                for &i in active {
                    if i != 0 {
                        return Err(Error::InvalidParameter("ball active index".into()));
                    }
                    cols.push(2.0 * (y - center));
                }
            }
            ConvexSet::Polyhedron { a, .. } => {
                for &i in active {
                    cols.push(a.row(i).transpose());
                }
            }
            ConvexSet::SmoothIneq { constraints } => {
                for &i in active {
                    cols.push(constraints[i].gradient(y));
                }
            }
        }
        Ok(if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        })
    }
}

/// Canonical JSON shape of the data-carrying set variants.
#[derive(Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
enum ConvexSetRepr {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Orthant { dim: usize },
    Ball { center: Vec<f64>, radius: f64 },
    Polyhedron { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl Serialize for ConvexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let repr = match self {
            ConvexSet::Box { lower, upper } => ConvexSetRepr::Box {
                lower: lower.iter().copied().collect(),
                upper: upper.iter().copied().collect(),
            },
            ConvexSet::Orthant { dim } => ConvexSetRepr::Orthant { dim: *dim },
            ConvexSet::Ball { center, radius } => ConvexSetRepr::Ball {
                center: center.iter().copied().collect(),
                radius: *radius,
            },
            ConvexSet::Polyhedron { a, b } => ConvexSetRepr::Polyhedron {
                a: (0..a.nrows())
                    .map(|i| a.row(i).iter().copied().collect())
                    .collect(),
                b: b.iter().copied().collect(),
            },
            ConvexSet::SmoothIneq { .. } => {
                return Err(S::Error::custom(
                    "smooth-inequality sets carry closures and have no canonical encoding",
                ))
            }
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ConvexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        Ok(match ConvexSetRepr::deserialize(deserializer)? {
            ConvexSetRepr::Box { lower, upper } => ConvexSet::Box {
                lower: DVector::from_vec(lower),
                upper: DVector::from_vec(upper),
            },
            ConvexSetRepr::Orthant { dim } => ConvexSet::Orthant { dim },
            ConvexSetRepr::Ball { center, radius } => ConvexSet::Ball {
                center: DVector::from_vec(center),
                radius,
            },
            ConvexSetRepr::Polyhedron { a, b } => {
                let rows = a.len();
                let cols = a.first().map_or(0, Vec::len);
                if a.iter().any(|r| r.len() != cols) {
                    return Err(D::Error::custom("ragged polyhedron rows"));
                }
                ConvexSet::Polyhedron {
                    a: DMatrix::from_fn(rows, cols, |i, j| a[i][j]),
                    b: DVector::from_vec(b),
                }
            }
        })
    }
}

/// Projection onto `{A x <= b}` by enumerating candidate active facets and
/// keeping the feasible KKT point nearest to `x`. Exact at desk scale.
fn project_polyhedron(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (rows, n) = a.shape();
    if rows > POLY_MAX_ROWS || n > POLY_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "polyhedron projection supports at most {POLY_MAX_ROWS} rows in dimension {POLY_MAX_DIM}"
        )));
    }
    let feas_tol = 1e-10 * (1.0 + b.amax());
    let slack = a * x - b;
    if slack.iter().all(|&v| v <= feas_tol) {
        return Ok(x.clone());
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1_u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        if active.len() > n {
            continue;
        }
        let a_s = DMatrix::from_rows(
            &active
                .iter()
                .map(|&i| a.row(i).into_owned())
                .collect::<Vec<_>>(),
        );
        let b_s = DVector::from_iterator(active.len(), active.iter().map(|&i| b[i]));
        let gram = &a_s * a_s.transpose();
        let rhs = &a_s * x - b_s;
        let Some(nu) = linalg::solve_lu(&gram, &rhs) else {
            continue;
        };
        if nu.iter().any(|&v| v < -1e-10) {
            continue;
        }
        let y = x - a_s.transpose() * nu;
        let viol = (a * &y - b).iter().fold(0.0_f64, |acc, v| acc.max(*v));
        if viol > 1e-9 * (1.0 + b.amax()) {
            continue;
        }
        let dist = (x - &y).norm();
        if best.as_ref().is_none_or(|(d, _)| dist < *d) {
            best = Some((dist, y));
        }
    }
    best.map(|(_, y)| y).ok_or_else(|| {
        Error::Degenerate("no feasible KKT candidate found for polyhedron projection".into())
    })
}

/// Local projection onto `{g <= 0}` via an active-set loop over equality
/// projections. Certifies the KKT sign conditions; bails out as
/// `Unsupported` when they cannot be met (possibly nonconvex region).
fn project_smooth_ineq(constraints: &[SmoothScalarFn], x: &DVector<f64>) -> Result<DVector<f64>> {
    let n = x.len();
    let feas_tol = 1e-10;
    let values: Vec<f64> = constraints.iter().map(|g| g.value(x)).collect();
    if values.iter().all(|&v| v <= feas_tol) {
        return Ok(x.clone());
    }
    let mut active: Vec<usize> = (0..constraints.len())
        .filter(|&i| values[i] > 0.0)
        .collect();
    for _ in 0..4 * constraints.len().max(4) {
        active.sort_unstable();
        active.dedup();
        let manifold = Manifold::new(
            n,
            active.iter().map(|&i| constraints[i].clone()).collect(),
        )?;
        let y = manifold.project(x, 1e-12, 50)?;
        let mult = crate::varcalc::multiplier_from_normal(&manifold, &y, &(x - &y))?;
        // drop the most negative multiplier, if any
        if let Some((pos, _)) = mult
            .lambda
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < -1e-10)
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        {
            active.remove(pos);
            if active.is_empty() {
                break;
            }
            continue;
        }
        // add the most violated inactive constraint, if any
        let mut worst: Option<(usize, f64)> = None;
        for (i, g) in constraints.iter().enumerate() {
            if active.contains(&i) {
                continue;
            }
            let v = g.value(&y);
            if v > feas_tol && worst.is_none_or(|(_, w)| v > w) {
                worst = Some((i, v));
            }
        }
        if let Some((i, _)) = worst {
            active.push(i);
            continue;
        }
        return Ok(y);
    }
    Err(Error::Unsupported(
        "projection onto smooth-inequality set is only local and could not be certified".into(),
    ))
}

/// The set-valued part of a generalized equation `0 in F(u) + Psi(u)`.
/// Every variant has a single-valued resolvent `(I + step Psi)^{-1}`.
#[derive(Clone)]
pub enum OperatorPart {
    /// Zero map; the equation reduces to `F(u) = 0`.
    Zero,
    /// Normal cone of a convex set; the equation is the variational
    /// inequality over that set.
    NormalCone(ConvexSet),
    /// Normal space map of an equality-constrained manifold.
    NormalSpace(Manifold),
    /// Subdifferential of `weight * |.|_1`.
    ScaledL1 { weight: f64 },
}

impl OperatorPart {
    /// `(I + step Psi)^{-1} x`.
    pub fn resolvent(&self, step: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
        if step <= 0.0 {
            return Err(Error::InvalidParameter("resolvent step must be > 0".into()));
        }
        match self {
            OperatorPart::Zero => Ok(x.clone()),
            OperatorPart::NormalCone(k) => k.project(x),
            OperatorPart::NormalSpace(m) => m.project_default(x),
            OperatorPart::ScaledL1 { weight } => {
                let t = step * weight;
                Ok(x.map(|v| {
                    if v > t {
                        v - t
                    } else if v < -t {
                        v + t
                    } else {
                        0.0
                    }
                }))
            }
        }
    }

    /// Membership test `w in Psi(u)` up to `tol`, variant by variant.
    pub fn member(&self, u: &DVector<f64>, w: &DVector<f64>, tol: f64) -> Result<bool> {
        match self {
            OperatorPart::Zero => Ok(w.norm() <= tol),
            OperatorPart::NormalCone(k) => normal_cone_member(k, u, w, tol),
            OperatorPart::NormalSpace(m) => {
                let h = m.constraint_values(u)?;
                if h.norm() > tol * (1.0 + u.norm()) {
                    return Ok(false);
                }
                let mult = crate::varcalc::multiplier_from_normal(m, u, w)?;
                Ok(mult.residual_norm <= tol * (1.0 + w.norm()))
            }
            OperatorPart::ScaledL1 { weight } => {
                for i in 0..u.len() {
                    if u[i].abs() > tol {
                        if (w[i] - weight * u[i].signum()).abs() > tol {
                            return Ok(false);
                        }
                    } else if w[i].abs() > weight + tol {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
}

/// `w in N_K(u)`?
fn normal_cone_member(k: &ConvexSet, u: &DVector<f64>, w: &DVector<f64>, tol: f64) -> Result<bool> {
    if !k.contains(u, tol * (1.0 + u.norm())) {
        return Ok(false);
    }
    match k {
        ConvexSet::Box { lower, upper } => {
            for i in 0..u.len() {
                let at_lower = (u[i] - lower[i]).abs() <= tol;
                let at_upper = (u[i] - upper[i]).abs() <= tol;
                let ok = match (at_lower, at_upper) {
                    (true, true) => true,
                    (true, false) => w[i] <= tol,
                    (false, true) => w[i] >= -tol,
                    (false, false) => w[i].abs() <= tol,
                };
                if !ok {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ConvexSet::Orthant { .. } => {
            for i in 0..u.len() {
                if w[i] > tol || (u[i] > tol && w[i].abs() > tol) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        ConvexSet::Ball { center, radius } => {
            let d = u - center;
            if d.norm() < radius - tol {
                return Ok(w.norm() <= tol);
            }
            let t = w.dot(&d) / d.norm_squared();
            Ok(t >= -tol && (w - d * t).norm() <= tol * (1.0 + w.norm()))
        }
        ConvexSet::Polyhedron { .. } | ConvexSet::SmoothIneq { .. } => {
            let active = k.active_set(u, tol.max(1e-9));
            let grads = k.active_gradients(&active, u)?;
            conic_combination_exists(&grads, w, tol)
        }
    }
}

/// Is `w` a nonnegative combination of the columns of `g`? Desk-scale
/// enumeration over support sets.
fn conic_combination_exists(g: &DMatrix<f64>, w: &DVector<f64>, tol: f64) -> Result<bool> {
    let k = g.ncols();
    if k == 0 {
        return Ok(w.norm() <= tol);
    }
    if k > POLY_MAX_ROWS {
        return Err(Error::Unsupported(
            "normal-cone membership supports at most 16 active constraints".into(),
        ));
    }
    let scale = tol * (1.0 + w.norm());
    for mask in 0_u32..(1 << k) {
        let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let cols = if support.is_empty() {
            DMatrix::zeros(g.nrows(), 0)
        } else {
            DMatrix::from_columns(&support.iter().map(|&i| g.column(i).into_owned()).collect::<Vec<_>>())
        };
        let mu = linalg::least_squares(&cols, w);
        if mu.iter().any(|&v| v < -tol) {
            continue;
        }
        let residual = if support.is_empty() {
            w.norm()
        } else {
            (w - &cols * &mu).norm()
        };
        if residual <= scale {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Known solution attached to a test problem.
#[derive(Debug, Clone)]
pub struct KnownSolution {
    pub u: DVector<f64>,
    /// Multiplier of the active manifold, when meaningful.
    pub lambda: Option<DVector<f64>>,
}

type MapFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A generalized equation `0 in F(u) + Psi(u)` with explicit Jacobian.
#[derive(Clone)]
pub struct GenEqProblem {
    f: MapFn,
    jac: JacFn,
    pub psi: OperatorPart,
    pub known_solution: Option<KnownSolution>,
}

impl GenEqProblem {
    pub fn new(
        f: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
        psi: OperatorPart,
    ) -> Self {
        Self {
            f: Arc::new(f),
            jac: Arc::new(jac),
            psi,
            known_solution: None,
        }
    }

    pub fn with_known_solution(mut self, u: DVector<f64>, lambda: Option<DVector<f64>>) -> Self {
        self.known_solution = Some(KnownSolution { u, lambda });
        self
    }

    pub fn f_value(&self, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(u)
    }

    pub fn f_jacobian(&self, u: &DVector<f64>) -> DMatrix<f64> {
        (self.jac)(u)
    }

    /// Checks the Jacobian evaluator against central finite differences of
    /// `F` at `u`; returns the worst relative entry error.
    pub fn jacobian_fd_error(&self, u: &DVector<f64>, step: f64) -> f64 {
        let n = u.len();
        let jac = self.f_jacobian(u);
        let mut worst = 0.0_f64;
        for j in 0..n {
            let mut up = u.clone();
            let mut dn = u.clone();
            up[j] += step;
            dn[j] -= step;
            let col = (self.f_value(&up) - self.f_value(&dn)) / (2.0 * step);
            for i in 0..col.len() {
                let denom = 1.0 + jac[(i, j)].abs();
                worst = worst.max((col[i] - jac[(i, j)]).abs() / denom);
            }
        }
        worst
    }

    /// Forward-backward map `(I + step Psi)^{-1} (u - step F(u))`.
    pub fn forward_backward(&self, step: f64, u: &DVector<f64>) -> Result<DVector<f64>> {
        if step <= 0.0 {
            return Err(Error::InvalidParameter(
                "forward-backward step must be > 0".into(),
            ));
        }
        let inner = u - self.f_value(u) * step;
        self.psi.resolvent(step, &inner)
    }

    /// Restores `u` to a point on the graph of `F + Psi`:
    /// `u+ = (I + step Psi)^{-1}(u - step F(u))` and
    /// `v+ = (u - u+) / step - F(u) + F(u+)`, so `(u+, v+)` lies on the graph.
    pub fn restore_to_graph(&self, step: f64, u: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let u_plus = self.forward_backward(step, u)?;
        let v_plus = (u - &u_plus) / step - self.f_value(u) + self.f_value(&u_plus);
        Ok((u_plus, v_plus))
    }

    /// Natural residual `|u - (I + (1/a) Psi)^{-1}(u - (1/a) F(u))|`.
    pub fn natural_residual(&self, a: f64, u: &DVector<f64>) -> Result<f64> {
        if a <= 0.0 {
            return Err(Error::InvalidParameter("natural residual needs a > 0".into()));
        }
        Ok((u - self.forward_backward(1.0 / a, u)?).norm())
    }

    fn normal_cone_set(&self) -> Result<&ConvexSet> {
        match &self.psi {
            OperatorPart::NormalCone(k) => Ok(k),
            _ => Err(Error::Unsupported(
                "gap functions require a normal-cone operator part".into(),
            )),
        }
    }

    /// Regularized gap `theta_a(u) = <F(u), u - y> - (a/2)|u - y|^2` with
    /// `y = Proj_K(u - F(u)/a)`, the closed-form maximizer. Requires `u in K`.
    pub fn regularized_gap(&self, a: f64, u: &DVector<f64>) -> Result<f64> {
        let k = self.normal_cone_set()?;
        let violation = k.violation(u);
        if violation > 1e-8 * (1.0 + u.norm()) {
            return Err(Error::InfeasiblePoint { violation });
        }
        self.gap_value(a, u)
    }

    fn gap_value(&self, a: f64, u: &DVector<f64>) -> Result<f64> {
        if a <= 0.0 {
            return Err(Error::InvalidParameter("gap parameter must be > 0".into()));
        }
        let y = self.forward_backward(1.0 / a, u)?;
        let d = u - &y;
        Ok(self.f_value(u).dot(&d) - 0.5 * a * d.norm_squared())
    }

    /// D-gap in the nonnegative orientation `theta_b - theta_a` for
    /// `0 < b < a`; needs no feasibility and vanishes exactly at solutions.
    pub fn d_gap(&self, a: f64, b: f64, u: &DVector<f64>) -> Result<f64> {
        if !(0.0 < b && b < a) {
            return Err(Error::InvalidParameter(format!(
                "d-gap needs 0 < b < a, got a = {a}, b = {b}"
            )));
        }
        self.normal_cone_set()?;
        Ok(self.gap_value(b, u)? - self.gap_value(a, u)?)
    }
}

/// Strict complementarity at `ubar`: `-F(ubar)` must be a strictly positive
/// combination of the active outward constraint gradients (all multipliers
/// at least `tol`). An empty active set passes vacuously; for an interior
/// solution the condition carries no content beyond `F(ubar) = 0`, which
/// the surrounding iteration drives separately.
pub fn nondegeneracy_check(
    k: &ConvexSet,
    f_value: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    ubar: &DVector<f64>,
    tol: f64,
) -> Result<bool> {
    let active = k.active_set(ubar, tol.max(1e-9));
    if active.is_empty() {
        return Ok(true);
    }
    let grads = k.active_gradients(&active, ubar)?;
    let (sigma_min, sigma_max) = linalg::sigma_extremes(&grads);
    if grads.ncols() > 0 && sigma_min <= 1e-10 * sigma_max.max(1.0) {
        return Err(Error::RankDeficient {
            sigma_min,
            tol: 1e-10 * sigma_max.max(1.0),
        });
    }
    let target = -f_value(ubar);
    let mu = linalg::least_squares(&grads, &target);
    Ok(mu.iter().all(|&v| v >= tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vec2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    /// F(u) = u - (1, -1) over the nonnegative orthant; solution (1, 0).
    fn orthant_problem() -> GenEqProblem {
        GenEqProblem::new(
            |u: &DVector<f64>| u - vec2(1.0, -1.0),
            |_| DMatrix::identity(2, 2),
            OperatorPart::NormalCone(ConvexSet::orthant(2)),
        )
        .with_known_solution(vec2(1.0, 0.0), None)
    }

    #[test]
    fn projection_examples() {
        let orthant = ConvexSet::orthant(2);
        assert_eq!(orthant.project(&vec2(1.0, -1.0)).unwrap(), vec2(1.0, 0.0));

        let ball = ConvexSet::unit_ball(2);
        let p = ball.project(&vec2(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-14);

        let boxset = ConvexSet::Box {
            lower: vec2(0.0, 0.0),
            upper: vec2(1.0, 1.0),
        };
        assert_eq!(boxset.project(&vec2(2.0, 0.5)).unwrap(), vec2(1.0, 0.5));
    }

    #[test]
    fn polyhedron_projection_matches_halfplane() {
        // {x + y <= 1} in the plane
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let k = ConvexSet::Polyhedron { a, b };
        let p = k.project(&vec2(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.5, epsilon = 1e-12);
        // interior point is fixed
        assert_eq!(k.project(&vec2(0.0, 0.0)).unwrap(), vec2(0.0, 0.0));
    }

    #[test]
    fn smooth_ineq_projection_on_disk() {
        let k = ConvexSet::SmoothIneq {
            constraints: vec![SmoothScalarFn::sphere(DVector::zeros(2), 1.0)],
        };
        let p = k.project(&vec2(3.0, 4.0)).unwrap();
        assert_abs_diff_eq!(p[0], 0.6, epsilon = 1e-10);
        assert_abs_diff_eq!(p[1], 0.8, epsilon = 1e-10);
        assert_eq!(k.project(&vec2(0.1, 0.2)).unwrap(), vec2(0.1, 0.2));
    }

    #[test]
    fn resolvent_examples() {
        let nk = OperatorPart::NormalCone(ConvexSet::orthant(1));
        let r = nk.resolvent(1.0, &DVector::from_vec(vec![-2.0])).unwrap();
        assert_abs_diff_eq!(r[0], 0.0);

        let l1 = OperatorPart::ScaledL1 { weight: 1.0 };
        let r = l1.resolvent(1.0, &DVector::from_vec(vec![2.0])).unwrap();
        assert_abs_diff_eq!(r[0], 1.0);
        let r = l1.resolvent(1.0, &DVector::from_vec(vec![-0.5])).unwrap();
        assert_abs_diff_eq!(r[0], 0.0);

        let z = OperatorPart::Zero;
        let x = vec2(0.3, -0.7);
        assert_eq!(z.resolvent(0.5, &x).unwrap(), x);
    }

    #[test]
    fn forward_backward_examples() {
        // zero operator: u - step (u - 1), step 1 at u = 3 gives 1
        let p = GenEqProblem::new(
            |u: &DVector<f64>| u - DVector::from_element(1, 1.0),
            |_| DMatrix::identity(1, 1),
            OperatorPart::Zero,
        );
        let y = p.forward_backward(1.0, &DVector::from_vec(vec![3.0])).unwrap();
        assert_abs_diff_eq!(y[0], 1.0);

        let p = orthant_problem();
        let y = p.forward_backward(1.0, &vec2(0.0, 0.0)).unwrap();
        assert_eq!(y, vec2(1.0, 0.0));
        // the solution is a fixed point
        let y = p.forward_backward(1.0, &vec2(1.0, 0.0)).unwrap();
        assert_eq!(y, vec2(1.0, 0.0));
    }

    #[test]
    fn restore_to_graph_examples() {
        // at the solution the pair is (ubar, 0)
        let p = orthant_problem();
        let (u, v) = p.restore_to_graph(1.0, &vec2(1.0, 0.0)).unwrap();
        assert_eq!(u, vec2(1.0, 0.0));
        assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);

        // scalar zero-operator case by hand
        let scalar = GenEqProblem::new(
            |u: &DVector<f64>| u - DVector::from_element(1, 1.0),
            |_| DMatrix::identity(1, 1),
            OperatorPart::Zero,
        );
        let (u, v) = scalar
            .restore_to_graph(1.0, &DVector::from_vec(vec![3.0]))
            .unwrap();
        assert_abs_diff_eq!(u[0], 1.0);
        assert_abs_diff_eq!(v[0], 0.0);

        // orthant case: u+ = (1,0), v+ = (u - u+) - F(u) + F(u+) = 0,
        // and v+ - F(u+) = (0,-1) is an admissible normal at (1,0)
        let (u, v) = p.restore_to_graph(1.0, &vec2(0.0, 0.0)).unwrap();
        assert_eq!(u, vec2(1.0, 0.0));
        assert_abs_diff_eq!(v.norm(), 0.0, epsilon = 1e-14);
        let w = &v - p.f_value(&u);
        assert!(p.psi.member(&u, &w, 1e-10).unwrap());
    }

    #[test]
    fn natural_residual_examples() {
        let p = orthant_problem();
        assert_abs_diff_eq!(p.natural_residual(1.0, &vec2(1.0, 0.0)).unwrap(), 0.0);
        assert_abs_diff_eq!(p.natural_residual(1.0, &vec2(0.0, 0.0)).unwrap(), 1.0);
        assert_abs_diff_eq!(p.natural_residual(1.0, &vec2(2.0, 0.0)).unwrap(), 1.0);
    }

    #[test]
    fn regularized_gap_examples() {
        let p = orthant_problem();
        assert_abs_diff_eq!(p.regularized_gap(1.0, &vec2(1.0, 0.0)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(p.regularized_gap(1.0, &vec2(2.0, 0.0)).unwrap(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(p.regularized_gap(1.0, &vec2(0.0, 0.0)).unwrap(), 0.5, epsilon = 1e-14);
        assert!(matches!(
            p.regularized_gap(1.0, &vec2(-1.0, 0.0)),
            Err(Error::InfeasiblePoint { .. })
        ));
    }

    #[test]
    fn d_gap_examples() {
        let p = orthant_problem();
        assert_abs_diff_eq!(p.d_gap(1.0, 0.5, &vec2(1.0, 0.0)).unwrap(), 0.0, epsilon = 1e-14);
        assert!(p.d_gap(1.0, 0.5, &vec2(2.0, 0.0)).unwrap() > 1e-3);
        // d-gap is defined off the feasible set as well
        assert!(p.d_gap(1.0, 0.5, &vec2(-1.0, 2.0)).unwrap() > 0.0);
        assert!(matches!(
            p.d_gap(0.5, 1.0, &vec2(0.0, 0.0)),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn operator_membership_variants() {
        let orthant = OperatorPart::NormalCone(ConvexSet::orthant(2));
        // at (1, 0): first coordinate free, second at its bound
        assert!(orthant.member(&vec2(1.0, 0.0), &vec2(0.0, -3.0), 1e-10).unwrap());
        assert!(!orthant.member(&vec2(1.0, 0.0), &vec2(0.0, 1.0), 1e-10).unwrap());
        assert!(!orthant.member(&vec2(1.0, 0.0), &vec2(-0.5, 0.0), 1e-10).unwrap());
        // infeasible base point has an empty normal cone
        assert!(!orthant.member(&vec2(-1.0, 0.0), &vec2(0.0, 0.0), 1e-10).unwrap());

        let ball = OperatorPart::NormalCone(ConvexSet::unit_ball(2));
        assert!(ball.member(&vec2(0.6, 0.8), &vec2(0.6, 0.8), 1e-10).unwrap());
        assert!(!ball.member(&vec2(0.6, 0.8), &vec2(-0.6, -0.8), 1e-10).unwrap());
        assert!(ball.member(&vec2(0.1, 0.0), &vec2(0.0, 0.0), 1e-10).unwrap());

        let l1 = OperatorPart::ScaledL1 { weight: 2.0 };
        let u = DVector::from_vec(vec![1.5, 0.0]);
        assert!(l1.member(&u, &vec2(2.0, -1.3), 1e-10).unwrap());
        assert!(!l1.member(&u, &vec2(-2.0, 0.0), 1e-10).unwrap());
        assert!(!l1.member(&u, &vec2(2.0, 2.5), 1e-10).unwrap());
    }

    #[test]
    fn convex_set_json_round_trip() {
        let sets = vec![
            ConvexSet::Box {
                lower: vec2(0.0, -1.0),
                upper: vec2(1.0, 2.0),
            },
            ConvexSet::orthant(3),
            ConvexSet::unit_ball(2),
            ConvexSet::Polyhedron {
                a: DMatrix::from_row_slice(2, 2, &[1.0, 1.0, -1.0, 0.0]),
                b: DVector::from_vec(vec![1.0, 0.5]),
            },
        ];
        for set in sets {
            let text = serde_json::to_string(&set).unwrap();
            let back: ConvexSet = serde_json::from_str(&text).unwrap();
            assert_eq!(serde_json::to_string(&back).unwrap(), text);
        }
        let smooth = ConvexSet::SmoothIneq {
            constraints: vec![SmoothScalarFn::sphere(DVector::zeros(2), 1.0)],
        };
        assert!(serde_json::to_string(&smooth).is_err());
    }

    #[test]
    fn active_set_examples() {
        let orthant = ConvexSet::orthant(2);
        assert_eq!(orthant.active_set(&vec2(1.0, 0.0), 1e-8), vec![1]);

        let ball = ConvexSet::unit_ball(2);
        assert_eq!(ball.active_set(&vec2(0.6, 0.8), 1e-8), vec![0]);

        let boxset = ConvexSet::Box {
            lower: vec2(0.0, 0.0),
            upper: vec2(1.0, 1.0),
        };
        assert!(boxset.active_set(&vec2(0.5, 0.5), 1e-8).is_empty());
        // upper bound on coordinate 0 encodes as n + 0
        assert_eq!(boxset.active_set(&vec2(1.0, 0.5), 1e-8), vec![2]);
    }

    #[test]
    fn active_manifold_examples() {
        let orthant = ConvexSet::orthant(2);
        let m = orthant.active_manifold(&[1], 2).unwrap();
        assert_eq!(m.num_constraints(), 1);
        assert_abs_diff_eq!(m.constraint_values(&vec2(3.0, 0.0)).unwrap()[0], 0.0);

        let ball = ConvexSet::unit_ball(2);
        let m = ball.active_manifold(&[0], 2).unwrap();
        assert_abs_diff_eq!(m.constraint_values(&vec2(0.6, 0.8)).unwrap()[0], 0.0, epsilon = 1e-14);

        let m = orthant.active_manifold(&[], 2).unwrap();
        assert_eq!(m.num_constraints(), 0);
    }

    #[test]
    fn nondegeneracy_examples() {
        let orthant = ConvexSet::orthant(2);
        let f = |u: &DVector<f64>| u - vec2(1.0, -1.0);
        assert!(nondegeneracy_check(&orthant, &f, &vec2(1.0, 0.0), 1e-6).unwrap());

        // multiplier exactly zero fails strict complementarity
        let f_degenerate = |u: &DVector<f64>| u - vec2(1.0, 0.0);
        assert!(!nondegeneracy_check(&orthant, &f_degenerate, &vec2(1.0, 0.0), 1e-6).unwrap());

        let ball = ConvexSet::unit_ball(2);
        let f_disk = |_: &DVector<f64>| vec2(-3.0, -4.0);
        assert!(nondegeneracy_check(&ball, &f_disk, &vec2(0.6, 0.8), 1e-6).unwrap());
    }
}
