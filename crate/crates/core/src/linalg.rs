//! Small dense linear-algebra helpers shared by the other modules.

use nalgebra::{DMatrix, DVector};

/// Orthonormal bases for the row space and null space of a wide matrix,
/// together with its extreme singular values.
pub(crate) struct SpanSplit {
    /// n x rank, orthonormal columns spanning the row space.
    pub normal: DMatrix<f64>,
    /// n x (n - rank), orthonormal columns spanning the null space.
    pub tangent: DMatrix<f64>,
    /// Smallest singular value over the first `nrows` values (+inf when nrows = 0).
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rank: usize,
}

/// Rank-revealing split of an m x n matrix (m <= n) via the SVD of the
/// zero-padded square matrix, so that the full right factor is available.
/// Rank counts singular values above `rel_tol * sigma_max`.
pub(crate) fn row_space_split(mat: &DMatrix<f64>, rel_tol: f64) -> SpanSplit {
    let (m, n) = mat.shape();
    if m == 0 {
        return SpanSplit {
            normal: DMatrix::zeros(n, 0),
            tangent: DMatrix::identity(n, n),
            sigma_min: f64::INFINITY,
            sigma_max: 0.0,
            rank: 0,
        };
    }
    let mut padded = DMatrix::zeros(n.max(m), n);
    padded.view_mut((0, 0), (m, n)).copy_from(mat);
    let svd = padded.svd(false, true);
    let sv = &svd.singular_values;
    let v_t = svd.v_t.expect("svd requested v_t");
    let sigma_max = sv[0];
    let threshold = rel_tol * sigma_max;
    let mut rank = 0;
    for i in 0..sv.len().min(m) {
        if sv[i] > threshold {
            rank += 1;
        }
    }
    let v = v_t.transpose();
    SpanSplit {
        normal: v.columns(0, rank).into_owned(),
        tangent: v.columns(rank, n - rank).into_owned(),
        sigma_min: sv[m - 1],
        sigma_max,
        rank,
    }
}

/// Minimum-norm least-squares solution of `a x = b`.
pub(crate) fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    if a.nrows() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let eps = 1e-13 * svd.singular_values[0].max(1.0);
    svd.solve(b, eps).expect("svd solve with u and v_t computed")
}

/// LU solve of a square system; `None` when the factorization is singular.
pub(crate) fn solve_lu(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Extreme values among the min(m, n) singular values of a matrix.
pub(crate) fn sigma_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    if a.nrows() == 0 || a.ncols() == 0 {
        return (f64::INFINITY, 0.0);
    }
    let sv = a.clone().singular_values();
    (sv.min(), sv.max())
}

/// Frobenius-orthonormal random rotation, used by basis-invariance checks.
pub(crate) fn random_orthogonal<R: rand::Rng>(dim: usize, rng: &mut R) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    if dim == 0 {
        return DMatrix::zeros(0, 0);
    }
    let g = DMatrix::from_fn(dim, dim, |_, _| -> f64 { StandardNormal.sample(rng) });
    g.qr().q()
}
