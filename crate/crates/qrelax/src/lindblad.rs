//! Lindblad generators: superoperator assembly, normalized spectral
//! decomposition, state propagation, and eigenvalue perturbation.
//!
//! Vectorization is column-stacking throughout: `vec(M)[j·d + i] = M[i, j]`,
//! so `vec(A X B) = (Bᵀ ⊗ A) vec(X)`. Every reshape in this module is
//! written against that convention.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{
    self, adjoint, cluster_eigenvalues, eig_general, fro_norm, hermiticity_defect, identity, kron,
    schatten_norms, trace, LinalgError, CLUSTER_REL_TOL,
};

/// Absolute tolerance for identifying the stationary (zero) eigenvalue.
pub const ZERO_MODE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum LindbladError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("no eigenvalue within {ZERO_MODE_TOL:e} of zero; generator is not trace-preserving?")]
    NoStationaryMode,
    #[error("{count} eigenvalues within {ZERO_MODE_TOL:e} of zero: multistable generator")]
    DegenerateSteadyState { count: usize },
    #[error("mode {index} belongs to a degenerate cluster of size {cluster_size}")]
    DegenerateMode { index: usize, cluster_size: usize },
    #[error("mode index {index} out of range 1..={max}")]
    ModeOutOfRange { index: usize, max: usize },
    #[error("cache i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache format: {0}")]
    CacheFormat(String),
}

/// A Lindblad master-equation model: Hamiltonian plus jump operators on a
/// `d`-dimensional Hilbert space.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    pub hamiltonian: Array2<c64>,
    pub jumps: Vec<Array2<c64>>,
    pub label: String,
}

impl LindbladModel {
    pub fn new(hamiltonian: Array2<c64>, jumps: Vec<Array2<c64>>, label: impl Into<String>) -> Self {
        Self {
            hamiltonian,
            jumps,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn validate(&self) -> Result<(), LindbladError> {
        let d = self.dim();
        if self.hamiltonian.ncols() != d {
            return Err(LindbladError::InvalidModel("Hamiltonian is not square".into()));
        }
        let defect = hermiticity_defect(&self.hamiltonian);
        if defect > 1e-12 * fro_norm(&self.hamiltonian).max(1.0) {
            return Err(LindbladError::InvalidModel(format!(
                "Hamiltonian is not Hermitian (defect {defect:.3e})"
            )));
        }
        for (i, j) in self.jumps.iter().enumerate() {
            if j.nrows() != d || j.ncols() != d {
                return Err(LindbladError::InvalidModel(format!(
                    "jump operator {i} has shape {}x{}, expected {d}x{d}",
                    j.nrows(),
                    j.ncols()
                )));
            }
        }
        Ok(())
    }
}

/// Column-stacking vectorization.
pub fn vectorize(m: &Array2<c64>) -> Array1<c64> {
    let (d, dc) = m.dim();
    let mut v = Array1::zeros(d * dc);
    for j in 0..dc {
        for i in 0..d {
            v[j * d + i] = m[(i, j)];
        }
    }
    v
}

/// Inverse of [`vectorize`] for square matrices.
pub fn unvectorize(v: &Array1<c64>, d: usize) -> Array2<c64> {
    assert_eq!(v.len(), d * d);
    let mut m = Array2::zeros((d, d));
    for j in 0..d {
        for i in 0..d {
            m[(i, j)] = v[j * d + i];
        }
    }
    m
}

/// Apply the generator directly: `-i[H,ρ] + Σᵢ JᵢρJᵢ† - ½{Jᵢ†Jᵢ, ρ}`.
pub fn apply(model: &LindbladModel, rho: &Array2<c64>) -> Array2<c64> {
    let h = &model.hamiltonian;
    let comm = h.dot(rho) - rho.dot(h);
    let mut out = comm.mapv(|z| z * c64::new(0.0, -1.0));
    for j in &model.jumps {
        let jd = adjoint(j);
        out = out + j.dot(rho).dot(&jd);
        let jdj = jd.dot(j);
        out = out - (jdj.dot(rho) + rho.dot(&jdj)).mapv(|z| z * 0.5);
    }
    out
}

/// Apply the adjoint generator (Heisenberg picture):
/// `i[H,O] + Σᵢ Jᵢ†OJᵢ - ½{Jᵢ†Jᵢ, O}`.
pub fn apply_adjoint(model: &LindbladModel, obs: &Array2<c64>) -> Array2<c64> {
    let h = &model.hamiltonian;
    let comm = h.dot(obs) - obs.dot(h);
    let mut out = comm.mapv(|z| z * c64::new(0.0, 1.0));
    for j in &model.jumps {
        let jd = adjoint(j);
        out = out + jd.dot(obs).dot(j);
        let jdj = jd.dot(j);
        out = out - (jdj.dot(obs) + obs.dot(&jdj)).mapv(|z| z * 0.5);
    }
    out
}

/// The `d² × d²` matrix of the generator under column-stacking:
/// `-i(I⊗H - Hᵀ⊗I) + Σᵢ [J̄ᵢ⊗Jᵢ - ½(I⊗Jᵢ†Jᵢ + (Jᵢ†Jᵢ)ᵀ⊗I)]`.
pub fn build_superoperator(model: &LindbladModel) -> Array2<c64> {
    let d = model.dim();
    let eye = identity(d);
    let h = &model.hamiltonian;
    let ht = h.t().to_owned();
    let mut sup = (kron(&eye, h) - kron(&ht, &eye)).mapv(|z| z * c64::new(0.0, -1.0));
    for j in &model.jumps {
        let jconj = j.mapv(|z| z.conj());
        let jdj = adjoint(j).dot(j);
        let jdjt = jdj.t().to_owned();
        sup = sup + kron(&jconj, j)
            - (kron(&eye, &jdj) + kron(&jdjt, &eye)).mapv(|z| z * 0.5);
    }
    sup
}

/// The matrix of the adjoint generator; equals the conjugate transpose of
/// [`build_superoperator`]'s output under the Hilbert-Schmidt pairing.
pub fn build_adjoint_superoperator(model: &LindbladModel) -> Array2<c64> {
    let d = model.dim();
    let eye = identity(d);
    let h = &model.hamiltonian;
    let ht = h.t().to_owned();
    let mut sup = (kron(&eye, h) - kron(&ht, &eye)).mapv(|z| z * c64::new(0.0, 1.0));
    for j in &model.jumps {
        let jd = adjoint(j);
        let jt = j.t().to_owned();
        let jdj = jd.dot(j);
        let jdjt = jdj.t().to_owned();
        sup = sup + kron(&jt, &jd)
            - (kron(&eye, &jdj) + kron(&jdjt, &eye)).mapv(|z| z * 0.5);
    }
    sup
}

/// Normalization convention for the right eigenmatrices `R_k`, `k ≥ 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Normalization {
    /// `‖R_k‖₁ = 1` (trace norm).
    TraceNorm,
    /// `‖R_k‖₂ = 1` (Hilbert-Schmidt norm).
    HsNorm,
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Normalization::TraceNorm => write!(f, "trace"),
            Normalization::HsNorm => write!(f, "hs"),
        }
    }
}

/// Spectral decomposition of a generator with a unique stationary state.
///
/// Modes are indexed `1..=d²` (mode 1 is stationary with `λ₁ = 0`,
/// `R₁ = ρ_ss`, `L₁ = I`); the rest are sorted by nonincreasing `Re λ`,
/// ties by increasing `Im λ`. Arrays are positional, so mode `k` lives at
/// position `k - 1`. Biorthonormality `tr(L_j†R_k) = δ_jk` holds for all
/// pairs; `O_k = ‖L_k‖₂‖R_k‖₂`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub d: usize,
    pub eigenvalues: Vec<c64>,
    pub right_modes: Vec<Array2<c64>>,
    pub left_modes: Vec<Array2<c64>>,
    pub condition_numbers: Vec<f64>,
    pub stationary: Array2<c64>,
    pub normalization: Normalization,
    /// Degenerate clusters as lists of 1-based mode indices.
    pub clusters: Vec<Vec<usize>>,
}

impl SpectralDecomposition {
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    fn check_mode(&self, k: usize) -> Result<usize, LindbladError> {
        if k == 0 || k > self.n_modes() {
            return Err(LindbladError::ModeOutOfRange {
                index: k,
                max: self.n_modes(),
            });
        }
        Ok(k - 1)
    }

    pub fn eigenvalue(&self, k: usize) -> Result<c64, LindbladError> {
        Ok(self.eigenvalues[self.check_mode(k)?])
    }

    pub fn right(&self, k: usize) -> Result<&Array2<c64>, LindbladError> {
        let pos = self.check_mode(k)?;
        Ok(&self.right_modes[pos])
    }

    pub fn left(&self, k: usize) -> Result<&Array2<c64>, LindbladError> {
        let pos = self.check_mode(k)?;
        Ok(&self.left_modes[pos])
    }

    pub fn condition_number(&self, k: usize) -> Result<f64, LindbladError> {
        Ok(self.condition_numbers[self.check_mode(k)?])
    }

    /// Spectral gap `|Re λ₂|`.
    pub fn gap(&self) -> f64 {
        self.eigenvalues.get(1).map(|l| l.re.abs()).unwrap_or(0.0)
    }

    /// The degenerate cluster containing mode `k` (1-based indices).
    pub fn cluster_of(&self, k: usize) -> &[usize] {
        self.clusters
            .iter()
            .find(|c| c.contains(&k))
            .map(|c| c.as_slice())
            .expect("every mode belongs to a cluster")
    }

    pub fn is_degenerate(&self, k: usize) -> bool {
        self.cluster_of(k).len() > 1
    }
}

/// Per-mode scalar summary, computable without materializing eigenmatrices.
#[derive(Debug, Clone, Copy)]
pub struct ModeStats {
    /// 1-based mode index after sorting.
    pub index: usize,
    pub lambda: c64,
    pub left_hs_norm: f64,
    pub right_hs_norm: f64,
    pub left_trace: c64,
    pub condition_number: f64,
}

/// Intermediate eigendecomposition of a generator, holding raw (unit-norm)
/// eigenvector columns plus per-mode normalization scalars. Materializing a
/// mode is `O(d²)`; the full set is `O(d⁴)` memory, so size sweeps extract
/// only the modes they need.
pub struct SpectralPipeline {
    d: usize,
    values: Vec<c64>,
    right_cols: Array2<c64>,
    left_cols: Array2<c64>,
    clusters: Vec<Vec<usize>>,
    normalization: Normalization,
    /// `R_k = α_k · unvec(v_k)`; `L_k = conj(α_k)⁻¹ · unvec(l_k)`.
    alpha: Vec<c64>,
    o_k: Vec<f64>,
}

/// Phase convention for `R_k`, `k ≥ 2`: the first (row-major) entry within
/// `1 - 1e-9` of the largest magnitude is made real positive.
fn leading_entry_phase(m: &Array2<c64>) -> c64 {
    let max = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return c64::new(1.0, 0.0);
    }
    for z in m.iter() {
        if z.norm() >= max * (1.0 - 1e-9) {
            return c64::from_polar(1.0, z.arg());
        }
    }
    unreachable!()
}

impl SpectralPipeline {
    pub fn new(model: &LindbladModel, normalization: Normalization) -> Result<Self, LindbladError> {
        model.validate()?;
        let d = model.dim();
        let sup = build_superoperator(model);
        Self::from_superoperator(d, &sup, normalization)
    }

    /// Decompose an already-assembled `d² × d²` generator matrix.
    pub fn from_superoperator(
        d: usize,
        sup: &Array2<c64>,
        normalization: Normalization,
    ) -> Result<Self, LindbladError> {
        let scale = fro_norm(sup).max(f64::MIN_POSITIVE);
        let eig = eig_general(sup)?;

        // Unique stationary mode within absolute tolerance of zero.
        let zero_modes: Vec<usize> = (0..eig.values.len())
            .filter(|&k| eig.values[k].norm() <= ZERO_MODE_TOL)
            .collect();
        match zero_modes.len() {
            0 => return Err(LindbladError::NoStationaryMode),
            1 => {}
            count => return Err(LindbladError::DegenerateSteadyState { count }),
        }
        let zero = zero_modes[0];

        // Sort: stationary first, then Re descending, ties Im ascending.
        let mut order: Vec<usize> = (0..eig.values.len()).collect();
        order.sort_by(|&a, &b| {
            let (za, zb) = (a == zero, b == zero);
            zb.cmp(&za).then_with(|| {
                let (la, lb) = (eig.values[a], eig.values[b]);
                lb.re
                    .partial_cmp(&la.re)
                    .unwrap()
                    .then(la.im.partial_cmp(&lb.im).unwrap())
            })
        });

        let n = order.len();
        let mut values = Vec::with_capacity(n);
        let mut right_cols = Array2::zeros((n, n));
        let mut left_cols = Array2::zeros((n, n));
        for (pos, &src) in order.iter().enumerate() {
            values.push(eig.values[src]);
            right_cols.column_mut(pos).assign(&eig.right.column(src));
            left_cols.column_mut(pos).assign(&eig.left.column(src));
        }

        let clusters_0 = cluster_eigenvalues(
            &Array1::from_vec(values.clone()),
            CLUSTER_REL_TOL * scale,
        );
        let clusters: Vec<Vec<usize>> = clusters_0
            .into_iter()
            .map(|c| c.into_iter().map(|i| i + 1).collect())
            .collect();

        // Per-mode normalization scalar α_k.
        let mut alpha = Vec::with_capacity(n);
        let mut o_k = Vec::with_capacity(n);
        for pos in 0..n {
            let rtilde = unvectorize(&right_cols.column(pos).to_owned(), d);
            let a = if pos == 0 {
                // R₁ = ρ_ss normalized to unit trace (also fixes the phase).
                let t = trace(&rtilde);
                c64::new(1.0, 0.0) / t
            } else {
                let norms = schatten_norms(&rtilde);
                let s = match normalization {
                    Normalization::TraceNorm => norms.trace,
                    Normalization::HsNorm => norms.hs,
                };
                let phase = leading_entry_phase(&rtilde);
                phase.conj() / s
            };
            alpha.push(a);
            // O_k is invariant under the α rescaling: with unit-norm right
            // columns it is just the left column norm.
            let lnorm = left_cols.column(pos).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let rnorm = right_cols.column(pos).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            o_k.push(lnorm * rnorm);
        }

        Ok(Self {
            d,
            values,
            right_cols,
            left_cols,
            clusters,
            normalization,
            alpha,
            o_k,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_modes(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.values
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Normalized right eigenmatrix of mode `k` (1-based).
    pub fn right_mode(&self, k: usize) -> Array2<c64> {
        let a = self.alpha[k - 1];
        unvectorize(&self.right_cols.column(k - 1).to_owned(), self.d).mapv(|z| z * a)
    }

    /// Normalized left eigenmatrix of mode `k` (1-based).
    pub fn left_mode(&self, k: usize) -> Array2<c64> {
        let b = (c64::new(1.0, 0.0) / self.alpha[k - 1]).conj();
        unvectorize(&self.left_cols.column(k - 1).to_owned(), self.d).mapv(|z| z * b)
    }

    /// Scalar summaries for all modes under the chosen normalization.
    pub fn stats(&self) -> Vec<ModeStats> {
        (0..self.n_modes())
            .map(|pos| {
                let a = self.alpha[pos];
                let b = (c64::new(1.0, 0.0) / a).conj();
                let lcol = self.left_cols.column(pos);
                let rcol = self.right_cols.column(pos);
                let lnorm_raw = lcol.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let rnorm_raw = rcol.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                // tr(L) read off the vectorized diagonal.
                let mut ltr = c64::new(0.0, 0.0);
                for i in 0..self.d {
                    ltr += lcol[i * self.d + i];
                }
                ModeStats {
                    index: pos + 1,
                    lambda: self.values[pos],
                    left_hs_norm: b.norm() * lnorm_raw,
                    right_hs_norm: a.norm() * rnorm_raw,
                    left_trace: b * ltr,
                    condition_number: self.o_k[pos],
                }
            })
            .collect()
    }

    /// Materialize the full decomposition (all `d²` eigenmatrix pairs).
    pub fn into_decomposition(self) -> SpectralDecomposition {
        let n = self.n_modes();
        let mut right_modes = Vec::with_capacity(n);
        let mut left_modes = Vec::with_capacity(n);
        for k in 1..=n {
            right_modes.push(self.right_mode(k));
            left_modes.push(self.left_mode(k));
        }
        let stationary = right_modes[0].clone();
        SpectralDecomposition {
            d: self.d,
            eigenvalues: self.values,
            right_modes,
            left_modes,
            condition_numbers: self.o_k,
            stationary,
            normalization: self.normalization,
            clusters: self.clusters,
        }
    }
}

/// Full normalized spectral decomposition of a model's generator.
pub fn spectral_decompose(
    model: &LindbladModel,
    normalization: Normalization,
) -> Result<SpectralDecomposition, LindbladError> {
    Ok(SpectralPipeline::new(model, normalization)?.into_decomposition())
}

/// Spectral propagation `ρ(t) = ρ_ss + Σ_{k≥2} e^{λ_k t} tr(L_k†ρ₀) R_k`.
pub fn propagate(decomp: &SpectralDecomposition, rho0: &Array2<c64>, t: f64) -> Array2<c64> {
    let mut out = decomp.stationary.clone();
    for k in 1..decomp.n_modes() {
        let a = linalg::hs_inner(&decomp.left_modes[k], rho0);
        let w = (decomp.eigenvalues[k] * t).exp() * a;
        out = out + decomp.right_modes[k].mapv(|z| z * w);
    }
    out
}

/// First-order eigenvalue shift `δλ_k = tr(L_k† δℒ(R_k))` for a
/// superoperator perturbation `δℒ` (a `d² × d²` matrix).
///
/// Only defined for non-degenerate modes; satisfies
/// `|δλ_k| ≤ O_k ‖δℒ‖_op`.
pub fn perturb_eigenvalue(
    decomp: &SpectralDecomposition,
    delta: &Array2<c64>,
    k: usize,
) -> Result<c64, LindbladError> {
    let pos = decomp.check_mode(k)?;
    let cluster = decomp.cluster_of(k);
    if cluster.len() > 1 {
        return Err(LindbladError::DegenerateMode {
            index: k,
            cluster_size: cluster.len(),
        });
    }
    let vl = vectorize(&decomp.left_modes[pos]);
    let vr = vectorize(&decomp.right_modes[pos]);
    let dv = delta.dot(&vr);
    Ok(vl.iter().zip(dv.iter()).map(|(l, x)| l.conj() * x).sum())
}

// ---------------------------------------------------------------------------
// Decomposition cache: versioned binary format keyed by a model hash, so
// parameter sweeps do not re-diagonalize.
// ---------------------------------------------------------------------------

const CACHE_MAGIC: &[u8; 8] = b"QRLXDEC\x01";
const CACHE_VERSION: u32 = 1;

/// Hash of the model's numerical content (dimensions, Hamiltonian, jumps);
/// the label is excluded so equal generators share a cache entry.
pub fn model_hash(model: &LindbladModel) -> String {
    let mut h = Sha256::new();
    h.update((model.dim() as u64).to_le_bytes());
    for z in model.hamiltonian.iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.update((model.jumps.len() as u64).to_le_bytes());
    for j in &model.jumps {
        for z in j.iter() {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
    }
    let digest = h.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn write_c64_slice<W: Write>(w: &mut W, data: impl Iterator<Item = c64>) -> std::io::Result<()> {
    for z in data {
        w.write_all(&z.re.to_le_bytes())?;
        w.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64<R: Read>(r: &mut R) -> std::io::Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> std::io::Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_c64<R: Read>(r: &mut R) -> std::io::Result<c64> {
    let re = read_f64(r)?;
    let im = read_f64(r)?;
    Ok(c64::new(re, im))
}

fn read_matrix<R: Read>(r: &mut R, d: usize) -> std::io::Result<Array2<c64>> {
    let mut m = Array2::zeros((d, d));
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = read_c64(r)?;
        }
    }
    Ok(m)
}

/// Serialize a decomposition to `path` (versioned binary, little-endian,
/// row-major eigenmatrix data).
pub fn save_decomposition(
    decomp: &SpectralDecomposition,
    path: &Path,
) -> Result<(), LindbladError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(decomp.d as u64).to_le_bytes())?;
    let norm_tag: u8 = match decomp.normalization {
        Normalization::TraceNorm => 0,
        Normalization::HsNorm => 1,
    };
    w.write_all(&[norm_tag])?;
    let n = decomp.n_modes();
    w.write_all(&(n as u64).to_le_bytes())?;
    write_c64_slice(&mut w, decomp.eigenvalues.iter().cloned())?;
    for &o in &decomp.condition_numbers {
        w.write_all(&o.to_le_bytes())?;
    }
    w.write_all(&(decomp.clusters.len() as u64).to_le_bytes())?;
    for c in &decomp.clusters {
        w.write_all(&(c.len() as u64).to_le_bytes())?;
        for &i in c {
            w.write_all(&(i as u64).to_le_bytes())?;
        }
    }
    write_c64_slice(&mut w, decomp.stationary.iter().cloned())?;
    for m in &decomp.right_modes {
        write_c64_slice(&mut w, m.iter().cloned())?;
    }
    for m in &decomp.left_modes {
        write_c64_slice(&mut w, m.iter().cloned())?;
    }
    w.flush()?;
    Ok(())
}

/// Read a decomposition written by [`save_decomposition`].
pub fn load_decomposition(path: &Path) -> Result<SpectralDecomposition, LindbladError> {
    let file = std::fs::File::open(path)?;
    let mut r = std::io::BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CACHE_MAGIC {
        return Err(LindbladError::CacheFormat("bad magic".into()));
    }
    let mut vbuf = [0u8; 4];
    r.read_exact(&mut vbuf)?;
    let version = u32::from_le_bytes(vbuf);
    if version != CACHE_VERSION {
        return Err(LindbladError::CacheFormat(format!(
            "unsupported version {version}"
        )));
    }
    let d = read_u64(&mut r)? as usize;
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let normalization = match tag[0] {
        0 => Normalization::TraceNorm,
        1 => Normalization::HsNorm,
        t => {
            return Err(LindbladError::CacheFormat(format!(
                "bad normalization tag {t}"
            )))
        }
    };
    let n = read_u64(&mut r)? as usize;
    if n != d * d {
        return Err(LindbladError::CacheFormat(format!(
            "mode count {n} does not match dimension {d}"
        )));
    }
    let mut eigenvalues = Vec::with_capacity(n);
    for _ in 0..n {
        eigenvalues.push(read_c64(&mut r)?);
    }
    let mut condition_numbers = Vec::with_capacity(n);
    for _ in 0..n {
        condition_numbers.push(read_f64(&mut r)?);
    }
    let n_clusters = read_u64(&mut r)? as usize;
    let mut clusters = Vec::with_capacity(n_clusters);
    for _ in 0..n_clusters {
        let len = read_u64(&mut r)? as usize;
        let mut c = Vec::with_capacity(len);
        for _ in 0..len {
            c.push(read_u64(&mut r)? as usize);
        }
        clusters.push(c);
    }
    let stationary = read_matrix(&mut r, d)?;
    let mut right_modes = Vec::with_capacity(n);
    for _ in 0..n {
        right_modes.push(read_matrix(&mut r, d)?);
    }
    let mut left_modes = Vec::with_capacity(n);
    for _ in 0..n {
        left_modes.push(read_matrix(&mut r, d)?);
    }
    Ok(SpectralDecomposition {
        d,
        eigenvalues,
        right_modes,
        left_modes,
        condition_numbers,
        stationary,
        normalization,
        clusters,
    })
}

/// Cache path for a model/normalization pair inside `dir`.
pub fn cache_path(dir: &Path, model: &LindbladModel, normalization: Normalization) -> PathBuf {
    dir.join(format!("{}-{}.qrlx", model_hash(model), normalization))
}

/// Decompose with a disk cache: loads when a valid entry exists, otherwise
/// computes and writes one.
pub fn decompose_cached(
    model: &LindbladModel,
    normalization: Normalization,
    dir: &Path,
) -> Result<SpectralDecomposition, LindbladError> {
    let path = cache_path(dir, model, normalization);
    if path.exists() {
        if let Ok(d) = load_decomposition(&path) {
            return Ok(d);
        }
    }
    let decomp = spectral_decompose(model, normalization)?;
    std::fs::create_dir_all(dir)?;
    save_decomposition(&decomp, &path)?;
    Ok(decomp)
}
