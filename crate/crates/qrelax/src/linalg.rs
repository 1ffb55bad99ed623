//! Dense complex linear algebra shared by every other module.
//!
//! Everything here operates on `ndarray::Array2<c64>` and is a pure function
//! of its inputs; no shared state, safe to call from any number of threads.
//! Eigendecompositions and SVDs are delegated to LAPACK (zgeev/zgesvd/zheev)
//! through `ndarray-linalg`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eig, EigValsh, Eigh, Inverse, Norm, SVD, UPLO};
use thiserror::Error;

/// Errors from the dense linear algebra layer.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not diagonalizable within tolerance: {detail}")]
    NonDiagonalizable { detail: String },
    #[error("LAPACK backend failure: {0}")]
    Backend(String),
}

/// Which tensor factor `partial_trace` keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    A,
    B,
}

/// `d x d` identity.
pub fn identity(d: usize) -> Array2<c64> {
    Array2::eye(d)
}

/// Conjugate transpose.
pub fn adjoint(a: &Array2<c64>) -> Array2<c64> {
    let mut out = a.t().to_owned();
    out.mapv_inplace(|z| z.conj());
    out
}

/// Matrix trace.
pub fn trace(a: &Array2<c64>) -> c64 {
    a.diag().sum()
}

/// Hilbert-Schmidt inner product `⟨A, B⟩ = tr(A†B)`.
pub fn hs_inner(a: &Array2<c64>, b: &Array2<c64>) -> c64 {
    debug_assert_eq!(a.dim(), b.dim());
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Frobenius (Hilbert-Schmidt) norm.
pub fn fro_norm(a: &Array2<c64>) -> f64 {
    a.norm_l2()
}

/// Max-abs distance from Hermiticity.
pub fn hermiticity_defect(a: &Array2<c64>) -> f64 {
    let adj = adjoint(a);
    (a - &adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(a: &Array2<c64>, tol: f64) -> bool {
    hermiticity_defect(a) <= tol
}

/// Kronecker product `a ⊗ b`, with the composite index `(i, k) ↦ i·rows(b) + k`.
pub fn kron(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == c64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[Array2<c64>]) -> Array2<c64> {
    assert!(!factors.is_empty());
    let mut out = factors[0].clone();
    for f in &factors[1..] {
        out = kron(&out, f);
    }
    out
}

/// Partial trace of an operator on `H_A ⊗ H_B` (composite index `a·dim_b + b`).
///
/// Keeps the requested factor; the result always has the same trace as `x`.
pub fn partial_trace(
    x: &Array2<c64>,
    dim_a: usize,
    dim_b: usize,
    keep: Keep,
) -> Result<Array2<c64>, LinalgError> {
    let n = dim_a * dim_b;
    if x.nrows() != x.ncols() {
        return Err(LinalgError::NotSquare {
            rows: x.nrows(),
            cols: x.ncols(),
        });
    }
    if x.nrows() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: x.nrows(),
        });
    }
    match keep {
        Keep::A => {
            let mut out = Array2::zeros((dim_a, dim_a));
            for a1 in 0..dim_a {
                for a2 in 0..dim_a {
                    let mut s = c64::new(0.0, 0.0);
                    for b in 0..dim_b {
                        s += x[(a1 * dim_b + b, a2 * dim_b + b)];
                    }
                    out[(a1, a2)] = s;
                }
            }
            Ok(out)
        }
        Keep::B => {
            let mut out = Array2::zeros((dim_b, dim_b));
            for b1 in 0..dim_b {
                for b2 in 0..dim_b {
                    let mut s = c64::new(0.0, 0.0);
                    for a in 0..dim_a {
                        s += x[(a * dim_b + b1, a * dim_b + b2)];
                    }
                    out[(b1, b2)] = s;
                }
            }
            Ok(out)
        }
    }
}

/// The three Schatten norms used throughout: trace norm `‖A‖₁`,
/// Hilbert-Schmidt norm `‖A‖₂`, and operator norm `‖A‖_∞`.
#[derive(Debug, Clone, Copy)]
pub struct SchattenNorms {
    pub trace: f64,
    pub hs: f64,
    pub operator: f64,
}

/// Schatten norms via singular values (SVD, not eigenvalues of `A†A`, so
/// small singular values keep full accuracy).
pub fn schatten_norms(a: &Array2<c64>) -> SchattenNorms {
    let (_, sv, _) = a.svd(false, false).expect("LAPACK SVD failed");
    let trace: f64 = sv.iter().sum();
    let hs: f64 = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
    let operator = sv.iter().cloned().fold(0.0, f64::max);
    SchattenNorms {
        trace,
        hs,
        operator,
    }
}

/// Trace norm `‖A‖₁` alone.
pub fn trace_norm(a: &Array2<c64>) -> f64 {
    schatten_norms(a).trace
}

/// Operator norm `‖A‖_∞` alone.
pub fn operator_norm(a: &Array2<c64>) -> f64 {
    schatten_norms(a).operator
}

/// Eigendecomposition of a general (non-Hermitian) square matrix.
///
/// Columns of `right` are right eigenvectors (unit 2-norm, as returned by
/// LAPACK); columns of `left` are left eigenvectors, i.e. eigenvectors of
/// the adjoint. They are constructed from the inverse of the right
/// eigenvector matrix, so `left† · right = I` holds to inversion accuracy
/// and `left[:,k]† right[:,j] = δ_kj` without further rescaling.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Array1<c64>,
    pub right: Array2<c64>,
    pub left: Array2<c64>,
}

/// Group eigenvalues into clusters of mutual distance at most `tol`.
///
/// Greedy: each value joins the first cluster whose representative (first
/// member) is within `tol`. Returned clusters are sorted by first index.
pub fn cluster_eigenvalues(values: &Array1<c64>, tol: f64) -> Vec<Vec<usize>> {
    let mut reps: Vec<c64> = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match reps.iter().position(|&r| (r - v).norm() <= tol) {
            Some(c) => clusters[c].push(i),
            None => {
                reps.push(v);
                clusters.push(vec![i]);
            }
        }
    }
    clusters
}

/// Relative tolerance used to group eigenvalues into degenerate clusters.
pub const CLUSTER_REL_TOL: f64 = 1e-8;

/// Threshold on the smallest singular value of a degenerate cluster's
/// eigenvector block below which the matrix is declared defective.
const DEFECT_TOL: f64 = 1e-10;

/// General complex eigendecomposition with biorthogonal left vectors.
///
/// Fails with [`LinalgError::NonDiagonalizable`] when a degenerate
/// eigenvalue cluster carries a (numerically) rank-deficient eigenvector
/// block — the signature of a Jordan block — or when the eigenvector
/// matrix cannot be inverted.
pub fn eig_general(m: &Array2<c64>) -> Result<EigenSystem, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let scale = fro_norm(m).max(f64::MIN_POSITIVE);
    let (values, right) = m
        .eig()
        .map_err(|e| LinalgError::Backend(format!("zgeev: {e}")))?;

    // Jordan blocks show up as (near-)parallel eigenvectors inside a
    // degenerate cluster.
    let clusters = cluster_eigenvalues(&values, CLUSTER_REL_TOL * scale);
    for cluster in clusters.iter().filter(|c| c.len() > 1) {
        let mut block = Array2::zeros((m.nrows(), cluster.len()));
        for (j, &idx) in cluster.iter().enumerate() {
            block.column_mut(j).assign(&right.column(idx));
        }
        let (_, sv, _) = block
            .svd(false, false)
            .map_err(|e| LinalgError::Backend(format!("zgesvd: {e}")))?;
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin < DEFECT_TOL {
            return Err(LinalgError::NonDiagonalizable {
                detail: format!(
                    "eigenvalue cluster at {:.6e}{:+.6e}i (size {}) has defective rank (σ_min = {:.3e})",
                    values[cluster[0]].re,
                    values[cluster[0]].im,
                    cluster.len(),
                    smin
                ),
            });
        }
    }

    let w = right.inv().map_err(|_| LinalgError::NonDiagonalizable {
        detail: "right eigenvector matrix is numerically singular".to_string(),
    })?;
    // Row k of W is the k-th left eigenvector as a row; store its conjugate
    // transpose column-wise so that left[:,k]† m = λ_k left[:,k]†.
    let mut left = Array2::zeros(w.raw_dim());
    for k in 0..w.nrows() {
        for i in 0..w.ncols() {
            left[(i, k)] = w[(k, i)].conj();
        }
    }
    Ok(EigenSystem {
        values,
        right,
        left,
    })
}

/// Hermitian eigendecomposition with eigenvector columns satisfying
/// `A v_k = λ_k v_k`.
///
/// ndarray-linalg's `eigh` hands back the conjugate of the eigenvector
/// matrix for complex Hermitian input (a row-major/column-major layout
/// artifact of the LAPACK call); this wrapper corrects that, and the unit
/// tests pin the residual.
pub fn eigh_hermitian(a: &Array2<c64>) -> Result<(Array1<f64>, Array2<c64>), LinalgError> {
    let (vals, vecs) = a
        .eigh(UPLO::Lower)
        .map_err(|e| LinalgError::Backend(format!("zheev: {e}")))?;
    Ok((vals, vecs.mapv(|z| z.conj())))
}

fn rotated_hermitian_max_eig(a: &Array2<c64>, theta: f64) -> f64 {
    let phase = c64::from_polar(1.0, -theta);
    let rotated = a.mapv(|z| phase * z);
    let herm = (&rotated + &adjoint(&rotated)).mapv(|z| z * 0.5);
    let evals = herm
        .eigvalsh(UPLO::Lower)
        .expect("LAPACK Hermitian eigensolver failed");
    evals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Numerical radius `w(A) = max_θ λ_max[(e^{-iθ}A + e^{iθ}A†)/2]`.
///
/// The objective is smooth and 2π-periodic; a `theta_grid`-point scan
/// brackets the global maximum and a golden-section pass refines it to
/// `refine_tol` in θ. Satisfies `‖A‖_∞/2 ≤ w(A) ≤ ‖A‖_∞`.
pub fn numerical_radius(a: &Array2<c64>, theta_grid: usize, refine_tol: f64) -> f64 {
    assert!(theta_grid >= 64, "theta grid must have at least 64 points");
    let two_pi = std::f64::consts::TAU;
    let f = |theta: f64| rotated_hermitian_max_eig(a, theta);

    let mut best_j = 0usize;
    let mut best = f64::NEG_INFINITY;
    let mut values = Vec::with_capacity(theta_grid);
    for j in 0..theta_grid {
        let v = f(two_pi * j as f64 / theta_grid as f64);
        values.push(v);
        if v > best {
            best = v;
            best_j = j;
        }
    }

    // Golden-section refinement on the bracketing interval around the grid max.
    let step = two_pi / theta_grid as f64;
    let center = two_pi * best_j as f64 / theta_grid as f64;
    let (mut lo, mut hi) = (center - step, center + step);
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > refine_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    best.max(f1).max(f2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<c64> {
        Array2::from_shape_fn((rows, cols), |_| {
            c(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_density(rng: &mut ChaCha8Rng, d: usize) -> Array2<c64> {
        let g = random_matrix(rng, d, d);
        let gg = g.dot(&adjoint(&g));
        let t = trace(&gg);
        gg.mapv(|z| z / t)
    }

    fn max_abs_diff(a: &Array2<c64>, b: &Array2<c64>) -> f64 {
        (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn kron_identity_case() {
        let i2 = identity(2);
        assert_eq!(kron(&i2, &i2), identity(4));
    }

    #[test]
    fn kron_diagonal_case() {
        let z = array![[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]];
        let k = kron(&z, &z);
        let expected = Array2::from_diag(&array![c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(k, expected);
    }

    #[test]
    fn kron_matches_index_formula() {
        // Brute-force oracle: C[(i p + k), (j q + l)] = A[i,j] B[k,l].
        let sm = array![[c(0.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
        let k = kron(&sm, &sm);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        let expected = sm[(i, j)] * sm[(p, q)];
                        assert_eq!(k[(i * 2 + p, j * 2 + q)], expected);
                    }
                }
            }
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random_density(&mut rng, 3);
        let sigma = random_density(&mut rng, 4);
        let composite = kron(&rho, &sigma);
        let back = partial_trace(&composite, 3, 4, Keep::A).unwrap();
        // tr(sigma) = 1, so the A factor comes back unchanged.
        assert!(max_abs_diff(&back, &rho) < 1e-12);
        let back_b = partial_trace(&composite, 3, 4, Keep::B).unwrap();
        assert!(max_abs_diff(&back_b, &sigma) < 1e-12);
    }

    #[test]
    fn partial_trace_maximally_mixed() {
        let x = identity(4).mapv(|z| z / 4.0);
        let a = partial_trace(&x, 2, 2, Keep::A).unwrap();
        assert!(max_abs_diff(&a, &identity(2).mapv(|z| z / 2.0)) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let x = identity(6);
        assert!(partial_trace(&x, 2, 2, Keep::A).is_err());
    }

    #[test]
    fn schatten_norms_identity() {
        let n = schatten_norms(&identity(5));
        assert!((n.trace - 5.0).abs() < 1e-12);
        assert!((n.hs - 5.0_f64.sqrt()).abs() < 1e-12);
        assert!((n.operator - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schatten_norms_damped_qubit_slow_population_mode() {
        // L₄ = (2/Γ) diag(γ₀, -γ₁) has ‖L₄‖₂ = 2√(γ₀²+γ₁²)/(γ₀+γ₁).
        let (g0, g1) = (0.3_f64, 0.7_f64);
        let gsum = g0 + g1;
        let l4 = Array2::from_diag(&array![
            c(2.0 * g0 / gsum, 0.0),
            c(-2.0 * g1 / gsum, 0.0)
        ]);
        let n = schatten_norms(&l4);
        let expected = 2.0 * (g0 * g0 + g1 * g1).sqrt() / gsum;
        assert!((n.hs - expected).abs() < 1e-12);
    }

    #[test]
    fn schatten_norms_match_gram_eigenvalue_route() {
        // Independent oracle: singular values from eigenvalues of A†A.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 5, 5);
        let gram = adjoint(&a).dot(&a);
        let evals = gram.eigvalsh(UPLO::Lower).unwrap();
        let sv: Vec<f64> = evals.iter().map(|e| e.max(0.0).sqrt()).collect();
        let trace: f64 = sv.iter().sum();
        let hs: f64 = sv.iter().map(|s| s * s).sum::<f64>().sqrt();
        let op = sv.iter().cloned().fold(0.0, f64::max);
        let n = schatten_norms(&a);
        assert!((n.trace - trace).abs() < 1e-12 * trace.max(1.0));
        assert!((n.hs - hs).abs() < 1e-12 * hs.max(1.0));
        assert!((n.operator - op).abs() < 1e-12 * op.max(1.0));
    }

    #[test]
    fn eig_diagonal_input() {
        let m = Array2::from_diag(&array![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0)]);
        let es = eig_general(&m).unwrap();
        let mut vals: Vec<f64> = es.values.iter().map(|v| v.re).collect();
        vals.sort_by(f64::total_cmp);
        assert!((vals[0] - 1.0).abs() < 1e-12);
        assert!((vals[1] - 2.0).abs() < 1e-12);
        assert!((vals[2] - 3.0).abs() < 1e-12);
        // Eigenvectors are the standard basis up to phase.
        for k in 0..3 {
            let col = es.right.column(k);
            let nlarge = col.iter().filter(|z| z.norm() > 1e-9).count();
            assert_eq!(nlarge, 1);
        }
    }

    #[test]
    fn eig_single_qubit_lindblad_superoperator() {
        // Hardcoded 4x4 generator matrix for E, γ₀, γ₁ (column-stacking order
        // of a damped/pumped qubit); eigenvalues are
        // {0, -Γ/2 ± iE, -Γ} with Γ = γ₀+γ₁.
        let (e, g0, g1) = (1.0, 0.3, 0.7);
        let gs = g0 + g1;
        let m = array![
            [c(-g0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(g1, 0.0)],
            [c(0.0, 0.0), c(-gs / 2.0, -e), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(-gs / 2.0, e), c(0.0, 0.0)],
            [c(g0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-g1, 0.0)],
        ];
        let es = eig_general(&m).unwrap();
        let mut vals: Vec<c64> = es.values.to_vec();
        vals.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
        assert!(vals[0].norm() < 1e-12);
        assert!((vals[1] - c(-gs / 2.0, -e)).norm() < 1e-12);
        assert!((vals[2] - c(-gs / 2.0, e)).norm() < 1e-12);
        assert!((vals[3] - c(-gs, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn eig_reconstructs_random_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_matrix(&mut rng, 8, 8);
        let es = eig_general(&m).unwrap();
        // m = V Λ V⁻¹, with V⁻¹ = left†.
        let lam = Array2::from_diag(&es.values);
        let reconstructed = es.right.dot(&lam).dot(&adjoint(&es.left));
        assert!(max_abs_diff(&reconstructed, &m) < 1e-8);
        // Residuals and biorthogonality.
        let scale = fro_norm(&m);
        for k in 0..8 {
            let v = es.right.column(k);
            let resid = (m.dot(&v) - v.mapv(|z| z * es.values[k]))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(resid < 1e-9 * scale);
        }
        let gram = adjoint(&es.left).dot(&es.right);
        assert!(max_abs_diff(&gram, &identity(8)) < 1e-9);
    }

    #[test]
    fn eig_detects_jordan_block() {
        let m = array![[c(1.0, 0.0), c(1.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        match eig_general(&m) {
            Err(LinalgError::NonDiagonalizable { .. }) => {}
            other => panic!("expected NonDiagonalizable, got {other:?}"),
        }
    }

    #[test]
    fn eigh_hermitian_vectors_satisfy_eigen_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let g = random_matrix(&mut rng, 5, 5);
        let h = (&g + &adjoint(&g)).mapv(|z| z * 0.5);
        let (vals, vecs) = eigh_hermitian(&h).unwrap();
        for k in 0..5 {
            let v = vecs.column(k).to_owned();
            let resid = (h.dot(&v) - v.mapv(|z| z * vals[k]))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(resid < 1e-12 * fro_norm(&h).max(1.0), "column {k}: {resid:e}");
        }
        // Reconstruction A = V Λ V†.
        let lam = Array2::from_diag(&vals.mapv(|x| c64::new(x, 0.0)));
        let rec = vecs.dot(&lam).dot(&adjoint(&vecs));
        assert!(max_abs_diff(&rec, &h) < 1e-12);
    }

    #[test]
    fn numerical_radius_hermitian_is_spectral_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let g = random_matrix(&mut rng, 5, 5);
        let h = (&g + &adjoint(&g)).mapv(|z| z * 0.5);
        let evals = h.eigvalsh(UPLO::Lower).unwrap();
        let rad = evals.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let w = numerical_radius(&h, 256, 1e-10);
        assert!((w - rad).abs() < 1e-8);
    }

    #[test]
    fn numerical_radius_nilpotent_is_half() {
        let l2 = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let w = numerical_radius(&l2, 256, 1e-10);
        assert!((w - 0.5).abs() < 1e-9);
    }

    #[test]
    fn numerical_radius_matches_dense_theta_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 6, 6);
        let w = numerical_radius(&a, 256, 1e-10);
        let mut dense_best = f64::NEG_INFINITY;
        let n = 100_000;
        for j in 0..n {
            let v = rotated_hermitian_max_eig(&a, std::f64::consts::TAU * j as f64 / n as f64);
            dense_best = dense_best.max(v);
        }
        assert!((w - dense_best).abs() < 1e-6);
        let op = schatten_norms(&a).operator;
        assert!(w >= op / 2.0 - 1e-9 && w <= op + 1e-9);
    }

    #[test]
    fn numerical_radius_dominates_state_overlaps() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 4, 4);
        let w = numerical_radius(&a, 256, 1e-10);
        for _ in 0..1000 {
            let rho = random_density(&mut rng, 4);
            let ov = trace(&adjoint(&a).dot(&rho)).norm();
            assert!(ov <= w + 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn norm_ordering_holds(seed in 0u64..1000, d in 2usize..7) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, d, d);
            let n = schatten_norms(&a);
            prop_assert!(n.hs <= n.trace + 1e-12);
            prop_assert!(n.trace <= (d as f64).sqrt() * n.hs + 1e-12);
        }

        #[test]
        fn kron_mixed_product(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, 2, 2);
            let b = random_matrix(&mut rng, 3, 3);
            let cm = random_matrix(&mut rng, 2, 2);
            let dm = random_matrix(&mut rng, 3, 3);
            let lhs = kron(&a, &b).dot(&kron(&cm, &dm));
            let rhs = kron(&a.dot(&cm), &b.dot(&dm));
            prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-12 * fro_norm(&lhs).max(1.0));
        }

        #[test]
        fn partial_trace_preserves_trace_and_positivity(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, 6);
            let a = partial_trace(&rho, 2, 3, Keep::A).unwrap();
            prop_assert!((trace(&a) - c64::new(1.0, 0.0)).norm() < 1e-12);
            let evals = a.eigvalsh(UPLO::Lower).unwrap();
            prop_assert!(evals.iter().all(|e| *e > -1e-12));
        }
    }
}
