//! Random initial-state ensembles with deterministic, splittable seeding.
//!
//! Four families are supported:
//!
//! * [`EnsembleKind::TwoDesign`] — a fixed reference state conjugated by a
//!   Haar-random unitary (exact Haar matches the first two moments of any
//!   unitary 2-design, which is all the closed-form statistics use).
//! * [`EnsembleKind::HilbertSchmidt`] — normalized Ginibre `GG†/tr(GG†)`
//!   with `G` a `d×d` complex Gaussian matrix; identical in distribution to
//!   partial-tracing a Haar pure state on a doubled space, at a fraction of
//!   the cost.
//! * [`EnsembleKind::Induced`] — the same with a rectangular `d×d_B` Ginibre
//!   matrix (environment of dimension `d_B`).
//! * [`EnsembleKind::ConstrainedPure`] — a Haar pure state drawn from the
//!   range of a projector on `H_S ⊗ H_E`, reduced over the environment
//!   factor.
//!
//! Seeding contract: every sampler is a pure function of `(spec, seed)`.
//! Monte-Carlo drivers derive the per-sample generator as ChaCha8 keyed by
//! the base seed with the sample index as the stream counter
//! ([`stream_rng`]), so parallel sampling is reproducible regardless of
//! worker scheduling.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, EigValsh, QRSquare, UPLO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{adjoint, fro_norm, hermiticity_defect, partial_trace, trace, Keep};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
}

/// Which measure the initial state is drawn from.
#[derive(Debug, Clone)]
pub enum EnsembleKind {
    /// `ρ = U ρ' U†` with `U` Haar; the reference `ρ'` fixes the spectrum.
    TwoDesign { reference: Array2<c64> },
    /// Normalized `d×d` Ginibre, `GG†/tr(GG†)`.
    HilbertSchmidt,
    /// Normalized `d×d_B` Ginibre (induced measure with environment `d_B`).
    Induced { env_dim: usize },
    /// Haar pure state on `range(P)` in `H_S ⊗ H_E`, reduced over `H_E`.
    ConstrainedPure { projector: Array2<c64>, env_dim: usize },
}

/// An ensemble of random density matrices on a `dim`-dimensional system.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
}

impl EnsembleSpec {
    pub fn two_design(reference: Array2<c64>) -> Self {
        let dim = reference.nrows();
        Self {
            kind: EnsembleKind::TwoDesign { reference },
            dim,
        }
    }

    /// Haar-random pure states: a 2-design applied to `|0⟩⟨0|`.
    pub fn haar_pure(dim: usize) -> Self {
        let mut reference = Array2::zeros((dim, dim));
        reference[(0, 0)] = c64::new(1.0, 0.0);
        Self::two_design(reference)
    }

    pub fn hilbert_schmidt(dim: usize) -> Self {
        Self {
            kind: EnsembleKind::HilbertSchmidt,
            dim,
        }
    }

    pub fn induced(dim: usize, env_dim: usize) -> Self {
        Self {
            kind: EnsembleKind::Induced { env_dim },
            dim,
        }
    }

    pub fn constrained(projector: Array2<c64>, system_dim: usize, env_dim: usize) -> Self {
        Self {
            kind: EnsembleKind::ConstrainedPure { projector, env_dim },
            dim: system_dim,
        }
    }

    /// Short label used in reports and CSV rows.
    pub fn label(&self) -> &'static str {
        match &self.kind {
            EnsembleKind::TwoDesign { .. } => "two-design",
            EnsembleKind::HilbertSchmidt => "hilbert-schmidt",
            EnsembleKind::Induced { .. } => "induced",
            EnsembleKind::ConstrainedPure { .. } => "constrained",
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.dim == 0 {
            return Err(EnsembleError::InvalidSpec("dimension must be positive".into()));
        }
        match &self.kind {
            EnsembleKind::TwoDesign { reference } => {
                if reference.nrows() != self.dim || reference.ncols() != self.dim {
                    return Err(EnsembleError::InvalidSpec(format!(
                        "reference state is {}x{}, expected {}x{}",
                        reference.nrows(),
                        reference.ncols(),
                        self.dim,
                        self.dim
                    )));
                }
                if hermiticity_defect(reference) > 1e-10 {
                    return Err(EnsembleError::InvalidSpec(
                        "reference state is not Hermitian".into(),
                    ));
                }
                if (trace(reference) - c64::new(1.0, 0.0)).norm() > 1e-10 {
                    return Err(EnsembleError::InvalidSpec("reference state trace is not 1".into()));
                }
                let evals = reference
                    .eigvalsh(UPLO::Lower)
                    .map_err(|e| EnsembleError::InvalidSpec(format!("reference eigensolve: {e}")))?;
                if evals.iter().any(|&p| p < -1e-10) {
                    return Err(EnsembleError::InvalidSpec(
                        "reference state has negative eigenvalues".into(),
                    ));
                }
            }
            EnsembleKind::HilbertSchmidt => {}
            EnsembleKind::Induced { env_dim } => {
                if *env_dim == 0 {
                    return Err(EnsembleError::InvalidSpec(
                        "environment dimension must be positive".into(),
                    ));
                }
            }
            EnsembleKind::ConstrainedPure { projector, env_dim } => {
                if *env_dim == 0 {
                    return Err(EnsembleError::InvalidSpec(
                        "environment dimension must be positive".into(),
                    ));
                }
                let full = self.dim * env_dim;
                if projector.nrows() != full || projector.ncols() != full {
                    return Err(EnsembleError::InvalidSpec(format!(
                        "projector is {}x{}, expected {full}x{full}",
                        projector.nrows(),
                        projector.ncols()
                    )));
                }
                if hermiticity_defect(projector) > 1e-10 {
                    return Err(EnsembleError::InvalidSpec("projector is not Hermitian".into()));
                }
                let idem = projector.dot(projector) - projector;
                if fro_norm(&idem) > 1e-10 * fro_norm(projector).max(1.0) {
                    return Err(EnsembleError::InvalidSpec("projector is not idempotent".into()));
                }
                let rank = trace(projector).re.round();
                if rank < 1.0 {
                    return Err(EnsembleError::InvalidSpec("projector has rank zero".into()));
                }
            }
        }
        Ok(())
    }

    /// Rank of the constrained subspace, `d_R = round(tr P)`, when applicable.
    pub fn constrained_rank(&self) -> Option<usize> {
        match &self.kind {
            EnsembleKind::ConstrainedPure { projector, .. } => {
                Some(trace(projector).re.round() as usize)
            }
            _ => None,
        }
    }
}

/// Deterministic per-sample generator: ChaCha8 keyed by `seed` with the
/// sample index as the stream counter.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Rectangular complex Ginibre matrix with unit-variance entries.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Array2<c64> {
    Array2::from_shape_fn((rows, cols), |_| complex_gaussian(rng))
}

/// Haar-distributed unitary: Ginibre followed by QR with the R-diagonal
/// phase correction that makes the factorization unique.
pub fn haar_unitary<R: Rng>(rng: &mut R, d: usize) -> Array2<c64> {
    let g = ginibre(rng, d, d);
    let (q, r) = g.qr_square().expect("LAPACK QR failed");
    let mut u = q;
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() == 0.0 {
            c64::new(1.0, 0.0)
        } else {
            rjj / rjj.norm()
        };
        u.column_mut(j).mapv_inplace(|z| z * phase);
    }
    u
}

/// Seeded Haar unitary.
pub fn sample_haar_unitary(d: usize, seed: u64) -> Array2<c64> {
    haar_unitary(&mut ChaCha8Rng::seed_from_u64(seed), d)
}

/// Haar pure state vector of dimension `d`.
pub fn haar_state_vector<R: Rng>(rng: &mut R, d: usize) -> Array1<c64> {
    let mut v = Array1::from_shape_fn(d, |_| complex_gaussian(rng));
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);
    v
}

fn outer(v: &Array1<c64>) -> Array2<c64> {
    let d = v.len();
    Array2::from_shape_fn((d, d), |(i, j)| v[i] * v[j].conj())
}

/// Draw one density matrix with an explicit generator.
pub fn sample_state_with<R: Rng>(spec: &EnsembleSpec, rng: &mut R) -> Array2<c64> {
    match &spec.kind {
        EnsembleKind::TwoDesign { reference } => {
            let u = haar_unitary(rng, spec.dim);
            u.dot(reference).dot(&adjoint(&u))
        }
        EnsembleKind::HilbertSchmidt => {
            let g = ginibre(rng, spec.dim, spec.dim);
            let gg = g.dot(&adjoint(&g));
            let t = trace(&gg);
            gg.mapv(|z| z / t)
        }
        EnsembleKind::Induced { env_dim } => {
            let g = ginibre(rng, spec.dim, *env_dim);
            let gg = g.dot(&adjoint(&g));
            let t = trace(&gg);
            gg.mapv(|z| z / t)
        }
        EnsembleKind::ConstrainedPure { projector, env_dim } => {
            // Orthonormal basis of range(P) once, then rotate a Haar vector
            // of dimension d_R into it (no rejection sampling).
            let basis = projector_range_basis(projector);
            let z = haar_state_vector(rng, basis.ncols());
            let psi = basis.dot(&z);
            let full = outer(&psi);
            partial_trace(&full, spec.dim, *env_dim, Keep::A).expect("projector dimensions validated")
        }
    }
}

/// Seeded draw; identical `(spec, seed)` gives bit-identical output.
pub fn sample_state(spec: &EnsembleSpec, seed: u64) -> Array2<c64> {
    sample_state_with(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Orthonormal basis (columns) of the range of an orthogonal projector,
/// via the Hermitian eigenvectors with eigenvalue near 1.
pub fn projector_range_basis(projector: &Array2<c64>) -> Array2<c64> {
    let (evals, evecs) =
        crate::linalg::eigh_hermitian(projector).expect("LAPACK Hermitian eigensolver failed");
    let keep: Vec<usize> = evals
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0.5)
        .map(|(i, _)| i)
        .collect();
    let mut basis = Array2::zeros((projector.nrows(), keep.len()));
    for (j, &i) in keep.iter().enumerate() {
        basis.column_mut(j).assign(&evecs.column(i));
    }
    basis
}
