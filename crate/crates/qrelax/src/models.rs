//! Physical generators: damped qubit chains (with a closed-form spectral
//! oracle), the dissipative transverse-field Ising chain, and thermalizing
//! Davies generators with detailed-balance diagnostics.
//!
//! Single-qubit conventions, used consistently everywhere: the local basis
//! is ordered (ground, excited); `sz = diag(-1, +1)` so the excited state
//! carries +1; the decay operator is `|g⟩⟨e|` and the pump operator
//! `|e⟩⟨g|`. With splitting `E`, pump rate γ₀ and decay rate γ₁, the four
//! single-qubit modes are (Γ = γ₀+γ₁):
//!
//! | k | λ                | R                 | L                    |
//! |---|------------------|-------------------|----------------------|
//! | 1 | 0                | diag(γ₁,γ₀)/Γ     | I                    |
//! | 2 | -Γ/2 - iE        | \|e⟩⟨g\|          | \|e⟩⟨g\|             |
//! | 3 | -Γ/2 + iE        | \|g⟩⟨e\|          | \|g⟩⟨e\|             |
//! | 4 | -Γ               | diag(1,-1)/2      | (2/Γ)·diag(γ₀,-γ₁)   |
//!
//! Dephasing at rate γ_D shifts λ₂,₃ by -2γ_D per dephased site and leaves
//! every eigenmatrix (and λ₁, λ₄) unchanged.

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use rand::Rng;
use thiserror::Error;

use crate::ensembles::ginibre;
use crate::linalg::{
    adjoint, fro_norm, hermiticity_defect, hs_inner, identity, kron_all, schatten_norms, trace,
};
use crate::lindblad::{
    apply, build_superoperator, spectral_decompose, LindbladError, LindbladModel, Normalization,
    SpectralDecomposition,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("rate profile violates detailed balance at ω = {omega}: γ(-ω) = {got}, expected {expected}")]
    RateProfileViolation { omega: f64, got: f64, expected: f64 },
    #[error(transparent)]
    Lindblad(#[from] LindbladError),
}

fn c(re: f64, im: f64) -> c64 {
    c64::new(re, im)
}

/// `diag(-1, +1)` in the (ground, excited) ordering.
pub fn sz() -> Array2<c64> {
    Array2::from_diag(&Array1::from_vec(vec![c(-1.0, 0.0), c(1.0, 0.0)]))
}

pub fn sx() -> Array2<c64> {
    let mut m = Array2::zeros((2, 2));
    m[(0, 1)] = c(1.0, 0.0);
    m[(1, 0)] = c(1.0, 0.0);
    m
}

/// Decay operator `|g⟩⟨e|`.
pub fn lowering() -> Array2<c64> {
    let mut m = Array2::zeros((2, 2));
    m[(0, 1)] = c(1.0, 0.0);
    m
}

/// Pump operator `|e⟩⟨g|`.
pub fn raising() -> Array2<c64> {
    let mut m = Array2::zeros((2, 2));
    m[(1, 0)] = c(1.0, 0.0);
    m
}

/// Embed a single-site operator at `site` in an `n`-qubit register.
pub fn op_at_site(op: &Array2<c64>, site: usize, n: usize) -> Array2<c64> {
    let factors: Vec<Array2<c64>> = (0..n)
        .map(|i| if i == site { op.clone() } else { identity(2) })
        .collect();
    kron_all(&factors)
}

// ---------------------------------------------------------------------------
// Non-interacting damped chain
// ---------------------------------------------------------------------------

/// Parameters of the non-interacting damped qubit chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainParams {
    pub n: usize,
    /// Level splitting E.
    pub splitting: f64,
    /// Pump rate γ₀ (ground → excited).
    pub pump: f64,
    /// Decay rate γ₁ (excited → ground).
    pub decay: f64,
    /// Dephasing rate γ_D (0 disables the dephasing jumps).
    pub dephasing: f64,
}

impl ChainParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n == 0 {
            return Err(ModelError::InvalidParams("chain needs at least one qubit".into()));
        }
        if self.pump < 0.0 || self.decay < 0.0 || self.dephasing < 0.0 {
            return Err(ModelError::InvalidParams("rates must be nonnegative".into()));
        }
        if self.pump + self.decay <= 0.0 {
            return Err(ModelError::InvalidParams("pump + decay must be positive".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

/// `H = Σᵢ (E/2)·szᵢ` with per-site pump, decay, and optional dephasing jumps.
pub fn build_chain(p: &ChainParams) -> Result<LindbladModel, ModelError> {
    p.validate()?;
    let d = p.dim();
    let mut h = Array2::<c64>::zeros((d, d));
    let mut jumps = Vec::new();
    for site in 0..p.n {
        h = h + op_at_site(&sz(), site, p.n).mapv(|z| z * (p.splitting / 2.0));
        jumps.push(op_at_site(&lowering(), site, p.n).mapv(|z| z * p.decay.sqrt()));
        jumps.push(op_at_site(&raising(), site, p.n).mapv(|z| z * p.pump.sqrt()));
        if p.dephasing > 0.0 {
            jumps.push(op_at_site(&sz(), site, p.n).mapv(|z| z * p.dephasing.sqrt()));
        }
    }
    Ok(LindbladModel::new(
        h,
        jumps,
        format!("chain n={} E={} γ0={} γ1={} γD={}", p.n, p.splitting, p.pump, p.decay, p.dephasing),
    ))
}

/// One single-qubit mode of the analytic table.
struct SingleQubitMode {
    lambda: c64,
    right: Array2<c64>,
    left: Array2<c64>,
}

fn single_qubit_table(p: &ChainParams) -> [SingleQubitMode; 4] {
    let (e, g0, g1, gd) = (p.splitting, p.pump, p.decay, p.dephasing);
    let gs = g0 + g1;
    let r1 = Array2::from_diag(&Array1::from_vec(vec![c(g1 / gs, 0.0), c(g0 / gs, 0.0)]));
    let r4 = Array2::from_diag(&Array1::from_vec(vec![c(0.5, 0.0), c(-0.5, 0.0)]));
    let l4 = Array2::from_diag(&Array1::from_vec(vec![
        c(2.0 * g0 / gs, 0.0),
        c(-2.0 * g1 / gs, 0.0),
    ]));
    [
        SingleQubitMode {
            lambda: c(0.0, 0.0),
            right: r1,
            left: identity(2),
        },
        SingleQubitMode {
            lambda: c(-gs / 2.0 - 2.0 * gd, -e),
            right: raising(),
            left: raising(),
        },
        SingleQubitMode {
            lambda: c(-gs / 2.0 - 2.0 * gd, e),
            right: lowering(),
            left: lowering(),
        },
        SingleQubitMode {
            lambda: c(-gs, 0.0),
            right: r4,
            left: l4,
        },
    ]
}

/// Scalar data of one chain mode from the closed-form tensor construction.
#[derive(Debug, Clone)]
pub struct ChainModeInfo {
    /// 1-based index after sorting (matches the decomposition ordering).
    pub index: usize,
    /// Per-site single-qubit mode labels, each in 1..=4.
    pub multi_index: Vec<u8>,
    pub lambda: c64,
    pub left_hs_norm: f64,
    pub right_hs_norm: f64,
    pub left_trace: c64,
    pub condition_number: f64,
    /// Mean overlap `⟨a_k⟩ = tr(L_k†)/d` over unitarily-invariant ensembles.
    pub mean_overlap: c64,
}

fn chain_mode_order(lambdas: &[(c64, Vec<u8>)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..lambdas.len()).collect();
    order.sort_by(|&a, &b| {
        let (la, ka) = &lambdas[a];
        let (lb, kb) = &lambdas[b];
        let za = la.norm() == 0.0;
        let zb = lb.norm() == 0.0;
        zb.cmp(&za)
            .then(lb.re.partial_cmp(&la.re).unwrap())
            .then(la.im.partial_cmp(&lb.im).unwrap())
            .then(ka.cmp(kb))
    });
    order
}

/// Closed-form per-mode scalars for all `4^N` chain modes, any `N`, without
/// materializing eigenmatrices (norms and traces multiply across sites).
///
/// Uses the trace-norm convention; the tensor-product eigenmatrices satisfy
/// `‖R‖₁ = 1` as built, so no rescaling enters.
pub fn chain_analytic_stats(p: &ChainParams) -> Result<Vec<ChainModeInfo>, ModelError> {
    p.validate()?;
    let table = single_qubit_table(p);
    let per_site: Vec<(c64, f64, f64, c64)> = table
        .iter()
        .map(|m| {
            (
                m.lambda,
                schatten_norms(&m.left).hs,
                schatten_norms(&m.right).hs,
                trace(&m.left),
            )
        })
        .collect();
    let n_modes = 4usize.pow(p.n as u32);
    let d = p.dim() as f64;
    let mut raw: Vec<(c64, Vec<u8>)> = Vec::with_capacity(n_modes);
    let mut scalars: Vec<(f64, f64, c64)> = Vec::with_capacity(n_modes);
    for code in 0..n_modes {
        let mut rest = code;
        let mut lambda = c(0.0, 0.0);
        let mut lnorm = 1.0;
        let mut rnorm = 1.0;
        let mut ltr = c(1.0, 0.0);
        let mut multi = Vec::with_capacity(p.n);
        for _ in 0..p.n {
            let k = rest % 4;
            rest /= 4;
            multi.push((k + 1) as u8);
            let (lam, ln, rn, lt) = per_site[k];
            lambda += lam;
            lnorm *= ln;
            rnorm *= rn;
            ltr *= lt;
        }
        raw.push((lambda, multi));
        scalars.push((lnorm, rnorm, ltr));
    }
    let order = chain_mode_order(&raw);
    Ok(order
        .iter()
        .enumerate()
        .map(|(pos, &src)| {
            let (lambda, multi) = raw[src].clone();
            let (lnorm, rnorm, ltr) = scalars[src];
            ChainModeInfo {
                index: pos + 1,
                multi_index: multi,
                lambda,
                left_hs_norm: lnorm,
                right_hs_norm: rnorm,
                left_trace: ltr,
                condition_number: lnorm * rnorm,
                mean_overlap: ltr.conj() / d,
            }
        })
        .collect())
}

/// The chain's closed-form spectral decomposition plus per-mode metadata.
pub struct ChainOracle {
    pub decomposition: SpectralDecomposition,
    pub info: Vec<ChainModeInfo>,
}

/// Materialize the full tensor-product eigensystem: `Λ = Σᵢ λ_{kᵢ}`,
/// `R = ⊗ᵢ R_{kᵢ}`, `L = ⊗ᵢ L_{kᵢ}`.
///
/// Memory is `O(16^N)`; intended for `N ≤ 6`. Dephasing enters as the
/// eigenvalue shift only, matching [`build_chain`] with the same `γ_D`.
pub fn analytic_chain_oracle(
    p: &ChainParams,
    normalization: Normalization,
) -> Result<ChainOracle, ModelError> {
    p.validate()?;
    let table = single_qubit_table(p);
    let d = p.dim();
    let n_modes = 4usize.pow(p.n as u32);

    let mut raw: Vec<(c64, Vec<u8>)> = Vec::with_capacity(n_modes);
    for code in 0..n_modes {
        let mut rest = code;
        let mut lambda = c(0.0, 0.0);
        let mut multi = Vec::with_capacity(p.n);
        for _ in 0..p.n {
            let k = rest % 4;
            rest /= 4;
            multi.push((k + 1) as u8);
            lambda += table[k].lambda;
        }
        raw.push((lambda, multi));
    }
    let order = chain_mode_order(&raw);

    let mut eigenvalues = Vec::with_capacity(n_modes);
    let mut right_modes = Vec::with_capacity(n_modes);
    let mut left_modes = Vec::with_capacity(n_modes);
    let mut condition_numbers = Vec::with_capacity(n_modes);
    let mut info = Vec::with_capacity(n_modes);
    for (pos, &src) in order.iter().enumerate() {
        let (lambda, multi) = raw[src].clone();
        let rf: Vec<Array2<c64>> = multi
            .iter()
            .map(|&k| table[(k - 1) as usize].right.clone())
            .collect();
        let lf: Vec<Array2<c64>> = multi
            .iter()
            .map(|&k| table[(k - 1) as usize].left.clone())
            .collect();
        let mut right = kron_all(&rf);
        let mut left = kron_all(&lf);
        // Tensor products carry ‖R‖₁ = 1 already; rescale only for the HS
        // convention (and never the stationary mode).
        if pos > 0 && normalization == Normalization::HsNorm {
            let s = schatten_norms(&right).hs;
            right.mapv_inplace(|z| z / s);
            left.mapv_inplace(|z| z * s);
        }
        let ln = schatten_norms(&left).hs;
        let rn = schatten_norms(&right).hs;
        let ltr = trace(&left);
        info.push(ChainModeInfo {
            index: pos + 1,
            multi_index: multi,
            lambda,
            left_hs_norm: ln,
            right_hs_norm: rn,
            left_trace: ltr,
            condition_number: ln * rn,
            mean_overlap: ltr.conj() / d as f64,
        });
        eigenvalues.push(lambda);
        condition_numbers.push(ln * rn);
        right_modes.push(right);
        left_modes.push(left);
    }

    // Cluster structure from exact eigenvalue ties.
    let scale = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max).max(1.0);
    let clusters_0 = crate::linalg::cluster_eigenvalues(
        &Array1::from_vec(eigenvalues.clone()),
        crate::linalg::CLUSTER_REL_TOL * scale,
    );
    let clusters = clusters_0
        .into_iter()
        .map(|cl| cl.into_iter().map(|i| i + 1).collect())
        .collect();

    let stationary = right_modes[0].clone();
    Ok(ChainOracle {
        decomposition: SpectralDecomposition {
            d,
            eigenvalues,
            right_modes,
            left_modes,
            condition_numbers,
            stationary,
            normalization,
            clusters,
        },
        info,
    })
}

/// Discrepancies between the chain oracle and the numerical decomposition
/// of the same generator. All residuals are absolute except the right/left
/// eigen-residuals, which are relative to the generator's Frobenius norm.
#[derive(Debug, Clone, Copy)]
pub struct OracleCheckReport {
    pub max_right_residual: f64,
    pub max_left_residual: f64,
    pub max_biorthonormality_defect: f64,
    pub completeness_defect: f64,
    pub max_eigenvalue_mismatch: f64,
    pub max_nondegenerate_mode_defect: f64,
    pub max_cluster_projector_defect: f64,
}

impl OracleCheckReport {
    pub fn max_defect(&self) -> f64 {
        [
            self.max_right_residual,
            self.max_left_residual,
            self.max_biorthonormality_defect,
            self.completeness_defect,
            self.max_eigenvalue_mismatch,
            self.max_nondegenerate_mode_defect,
            self.max_cluster_projector_defect,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Check the closed-form oracle against the numerical spectral
/// decomposition of [`build_chain`] on the same parameters.
///
/// Inside exactly degenerate clusters the eigenbasis is not unique, so
/// per-mode comparisons are restricted to non-degenerate modes and clusters
/// are compared through their (basis-invariant) spectral projectors
/// `Σ_k vec(R_k)vec(L_k)†`.
pub fn verify_chain_oracle(
    p: &ChainParams,
    normalization: Normalization,
) -> Result<OracleCheckReport, ModelError> {
    let model = build_chain(p)?;
    let oracle = analytic_chain_oracle(p, normalization)?;
    let numeric = spectral_decompose(&model, normalization)?;
    let sup = build_superoperator(&model);
    let sup_adj = adjoint(&sup);
    let scale = fro_norm(&sup).max(1.0);
    let d = model.dim();
    let n = oracle.decomposition.n_modes();

    let odec = &oracle.decomposition;
    let mut report = OracleCheckReport {
        max_right_residual: 0.0,
        max_left_residual: 0.0,
        max_biorthonormality_defect: 0.0,
        completeness_defect: 0.0,
        max_eigenvalue_mismatch: 0.0,
        max_nondegenerate_mode_defect: 0.0,
        max_cluster_projector_defect: 0.0,
    };

    // Oracle modes are genuine eigenpairs of the assembled generator.
    let vec_r: Vec<Array1<c64>> = odec.right_modes.iter().map(crate::lindblad::vectorize).collect();
    let vec_l: Vec<Array1<c64>> = odec.left_modes.iter().map(crate::lindblad::vectorize).collect();
    for k in 0..n {
        let lam = odec.eigenvalues[k];
        let r_res = (&sup.dot(&vec_r[k]) - &vec_r[k].mapv(|z| z * lam))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            / (scale * vec_r[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        let l_res = (&sup_adj.dot(&vec_l[k]) - &vec_l[k].mapv(|z| z * lam.conj()))
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
            / (scale * vec_l[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        report.max_right_residual = report.max_right_residual.max(r_res);
        report.max_left_residual = report.max_left_residual.max(l_res);
    }

    // Biorthonormality and completeness of the oracle family.
    for j in 0..n {
        for k in 0..n {
            let ip = hs_inner(&odec.left_modes[j], &odec.right_modes[k]);
            let expected = if j == k { c(1.0, 0.0) } else { c(0.0, 0.0) };
            report.max_biorthonormality_defect =
                report.max_biorthonormality_defect.max((ip - expected).norm());
        }
    }
    let mut completeness = Array2::<c64>::zeros((n, n));
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                completeness[(i, j)] += vec_r[k][i] * vec_l[k][j].conj();
            }
        }
    }
    report.completeness_defect = (&completeness - &identity(d * d))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);

    // Greedy eigenvalue matching oracle → numeric.
    let mut used = vec![false; n];
    let mut matched = vec![0usize; n];
    for k in 0..n {
        let lam = odec.eigenvalues[k];
        let (best, dist) = numeric
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, &m)| (i, (m - lam).norm()))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("mode counts match");
        used[best] = true;
        matched[k] = best;
        report.max_eigenvalue_mismatch = report.max_eigenvalue_mismatch.max(dist);
    }

    // Per-mode comparison where the eigenbasis is unique; projector
    // comparison inside degenerate clusters.
    for cluster in &odec.clusters {
        if cluster.len() == 1 {
            let k = cluster[0];
            let nk = matched[k - 1] + 1;
            let l_o = &odec.left_modes[k - 1];
            let l_n = &numeric.left_modes[nk - 1];
            let r_o = &odec.right_modes[k - 1];
            let r_n = &numeric.right_modes[nk - 1];
            let defect = [
                (schatten_norms(l_o).hs - schatten_norms(l_n).hs).abs(),
                (trace(l_o) - trace(l_n)).norm(),
                (l_o - l_n).iter().map(|z| z.norm()).fold(0.0, f64::max),
                (r_o - r_n).iter().map(|z| z.norm()).fold(0.0, f64::max),
            ]
            .into_iter()
            .fold(0.0, f64::max);
            report.max_nondegenerate_mode_defect = report.max_nondegenerate_mode_defect.max(defect);
        } else {
            let mut p_o = Array2::<c64>::zeros((n, n));
            let mut p_n = Array2::<c64>::zeros((n, n));
            for &k in cluster {
                let vr_n = crate::lindblad::vectorize(&numeric.right_modes[matched[k - 1]]);
                let vl_n = crate::lindblad::vectorize(&numeric.left_modes[matched[k - 1]]);
                for i in 0..n {
                    for j in 0..n {
                        p_o[(i, j)] += vec_r[k - 1][i] * vec_l[k - 1][j].conj();
                        p_n[(i, j)] += vr_n[i] * vl_n[j].conj();
                    }
                }
            }
            let defect = (&p_o - &p_n).iter().map(|z| z.norm()).fold(0.0, f64::max);
            report.max_cluster_projector_defect = report.max_cluster_projector_defect.max(defect);
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Dissipative transverse-field Ising chain
// ---------------------------------------------------------------------------

/// Parameters of the open-boundary dissipative TFIM.
#[derive(Debug, Clone, Copy)]
pub struct TfimParams {
    pub n: usize,
    /// Ising coupling J.
    pub coupling: f64,
    /// Transverse field g.
    pub field: f64,
    /// Inverse bath temperature β.
    pub beta: f64,
    /// Overall rate scale γ; the pump/decay split keeps γ₀ + γ₁ = 2γ.
    pub gamma: f64,
    /// Local splitting E entering the detailed-balance ratio γ₁/γ₀ = e^{βE}.
    pub splitting: f64,
}

impl TfimParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n < 2 {
            return Err(ModelError::InvalidParams("TFIM needs at least two qubits".into()));
        }
        if self.gamma < 0.0 {
            return Err(ModelError::InvalidParams("gamma must be nonnegative".into()));
        }
        Ok(())
    }

    /// `(γ₀, γ₁)` with `γ₁/γ₀ = e^{βE}` and `γ₀ + γ₁ = 2γ` (the sum
    /// normalization keeps the single-site gap β-independent). Evaluated in
    /// the overflow-safe form `2γ/(1+e^{∓βE})`.
    pub fn rates(&self) -> (f64, f64) {
        let be = self.beta * self.splitting;
        let pump = 2.0 * self.gamma / (1.0 + be.exp());
        let decay = 2.0 * self.gamma / (1.0 + (-be).exp());
        (pump, decay)
    }
}

/// `H = -J Σ szᵢszᵢ₊₁ - g Σ sxᵢ` (open boundaries) with the chain's local
/// pump/decay jumps at thermal rates.
pub fn build_tfim(p: &TfimParams) -> Result<LindbladModel, ModelError> {
    p.validate()?;
    let d = 1usize << p.n;
    let mut h = Array2::<c64>::zeros((d, d));
    for site in 0..p.n - 1 {
        let zz = op_at_site(&sz(), site, p.n).dot(&op_at_site(&sz(), site + 1, p.n));
        h = h + zz.mapv(|z| z * (-p.coupling));
    }
    for site in 0..p.n {
        h = h + op_at_site(&sx(), site, p.n).mapv(|z| z * (-p.field));
    }
    let (pump, decay) = p.rates();
    let mut jumps = Vec::new();
    for site in 0..p.n {
        jumps.push(op_at_site(&lowering(), site, p.n).mapv(|z| z * decay.sqrt()));
        jumps.push(op_at_site(&raising(), site, p.n).mapv(|z| z * pump.sqrt()));
    }
    Ok(LindbladModel::new(
        h,
        jumps,
        format!(
            "tfim n={} J={} g={} β={} γ={} E={}",
            p.n, p.coupling, p.field, p.beta, p.gamma, p.splitting
        ),
    ))
}

// ---------------------------------------------------------------------------
// Davies generators
// ---------------------------------------------------------------------------

/// A thermalizing Davies generator together with its Gibbs data.
#[derive(Debug, Clone)]
pub struct DaviesModel {
    pub model: LindbladModel,
    pub h0: Array2<c64>,
    pub beta: f64,
    /// Gibbs state `e^{-βH₀}/Z`.
    pub gibbs: Array2<c64>,
    /// Energy range `E_max - E_min` of `H₀`.
    pub delta_e: f64,
    /// Eigenbasis of `H₀` (columns).
    pub basis: Array2<c64>,
    pub energies: Array1<f64>,
    /// Gibbs populations in the energy basis.
    pub weights: Array1<f64>,
}

/// KMS-symmetric rate profile `γ(ω) = γ·e^{βω/2}`, the simplest profile
/// with `γ(-ω) = e^{-βω}γ(ω)`. `ω` is the energy emitted to the bath.
pub fn kms_rate_profile(gamma: f64, beta: f64) -> impl Fn(f64) -> f64 {
    move |omega: f64| gamma * (beta * omega / 2.0).exp()
}

/// Build a Davies generator from `H₀`, coupling operators, and a rate
/// profile satisfying `γ(-ω) = e^{-βω}γ(ω)` (checked on every realized
/// Bohr frequency).
///
/// Each coupling `A` is decomposed into Bohr-frequency components
/// `A(ω) = Σ_{E_j - E_i = ω} Πᵢ A Πⱼ` (frequencies merged within
/// `1e-9·‖H₀‖`), and each nonzero component becomes a jump `√γ(ω)·A(ω)`.
pub fn build_davies<F: Fn(f64) -> f64>(
    h0: &Array2<c64>,
    couplings: &[Array2<c64>],
    beta: f64,
    rate_profile: F,
    label: impl Into<String>,
) -> Result<DaviesModel, ModelError> {
    if hermiticity_defect(h0) > 1e-12 * fro_norm(h0).max(1.0) {
        return Err(ModelError::InvalidParams("H₀ is not Hermitian".into()));
    }
    let d = h0.nrows();
    let (energies, basis) = crate::linalg::eigh_hermitian(h0)
        .map_err(|e| ModelError::InvalidParams(format!("H₀ eigensolve failed: {e}")))?;
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_max = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let delta_e = e_max - e_min;
    let freq_tol = 1e-9 * energies.iter().map(|e| e.abs()).fold(1.0, f64::max);

    // Distinct Bohr frequencies ω = E_j - E_i (energy emitted on j → i).
    let mut omegas: Vec<f64> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let w = energies[j] - energies[i];
            if !omegas.iter().any(|&x| (x - w).abs() <= freq_tol) {
                omegas.push(w);
            }
        }
    }

    // Detailed balance of the profile on every realized ±ω pair.
    for &w in &omegas {
        let expected = (-beta * w).exp() * rate_profile(w);
        let got = rate_profile(-w);
        if (got - expected).abs() > 1e-9 * expected.abs().max(got.abs()).max(1e-300) {
            return Err(ModelError::RateProfileViolation {
                omega: w,
                got,
                expected,
            });
        }
        if rate_profile(w) < 0.0 {
            return Err(ModelError::InvalidParams(format!("negative rate at ω = {w}")));
        }
    }

    let basis_dag = adjoint(&basis);
    let mut jumps = Vec::new();
    for a in couplings {
        if a.nrows() != d || a.ncols() != d {
            return Err(ModelError::InvalidParams("coupling dimension mismatch".into()));
        }
        let a_eig = basis_dag.dot(a).dot(&basis);
        let a_scale = fro_norm(&a_eig).max(f64::MIN_POSITIVE);
        for &w in &omegas {
            let mut comp = Array2::<c64>::zeros((d, d));
            for i in 0..d {
                for j in 0..d {
                    if ((energies[j] - energies[i]) - w).abs() <= freq_tol {
                        comp[(i, j)] = a_eig[(i, j)];
                    }
                }
            }
            if fro_norm(&comp) <= 1e-12 * a_scale {
                continue;
            }
            let jump = basis.dot(&comp).dot(&basis_dag);
            jumps.push(jump.mapv(|z| z * rate_profile(w).sqrt()));
        }
    }

    // Gibbs state, overflow-safe.
    let weights_raw: Array1<f64> = energies.mapv(|e| (-beta * (e - e_min)).exp());
    let z: f64 = weights_raw.sum();
    let weights = weights_raw.mapv(|w| w / z);
    let mut gibbs = Array2::<c64>::zeros((d, d));
    for k in 0..d {
        let col = basis.column(k);
        for i in 0..d {
            for j in 0..d {
                gibbs[(i, j)] += c(weights[k], 0.0) * col[i] * col[j].conj();
            }
        }
    }

    let model = LindbladModel::new(h0.clone(), jumps, label);
    let davies = DaviesModel {
        model,
        h0: h0.clone(),
        beta,
        gibbs,
        delta_e,
        basis,
        energies,
        weights,
    };

    // The Gibbs state must be stationary by construction.
    let resid = fro_norm(&apply(&davies.model, &davies.gibbs));
    let scale = 1.0
        + fro_norm(h0)
        + davies.model.jumps.iter().map(|j| fro_norm(j).powi(2)).sum::<f64>();
    if resid > 1e-9 * scale {
        return Err(ModelError::InvalidParams(format!(
            "Gibbs state is not stationary (residual {resid:.3e})"
        )));
    }
    Ok(davies)
}

impl DaviesModel {
    /// `ρ_β^p` from the stored spectral data (stable for negative powers of
    /// a full-rank Gibbs state).
    pub fn gibbs_power(&self, p: f64) -> Array2<c64> {
        let d = self.model.dim();
        let mut out = Array2::<c64>::zeros((d, d));
        for k in 0..d {
            let col = self.basis.column(k);
            let w = self.weights[k].powf(p);
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += c(w, 0.0) * col[i] * col[j].conj();
                }
            }
        }
        out
    }
}

/// Superoperator of the dissipative part alone (Hamiltonian dropped).
pub fn dissipator_superoperator(model: &LindbladModel) -> Array2<c64> {
    let d = model.dim();
    let no_h = LindbladModel::new(Array2::zeros((d, d)), model.jumps.clone(), "dissipator");
    build_superoperator(&no_h)
}

fn conjugation_superoperator(m: &Array2<c64>) -> Array2<c64> {
    // X ↦ M X M under column-stacking is Mᵀ ⊗ M for Hermitian M.
    crate::linalg::kron(&m.t().to_owned(), m)
}

/// Detailed-balance diagnostics and the condition-number bound for a
/// Davies model.
///
/// Quantum detailed balance is a property of the Heisenberg-picture
/// (dual) dissipator `D†`: it is self-adjoint with respect to the
/// GNS inner product `⟨A,B⟩_ρ = tr(ρ_β A†B)` and the KMS inner product
/// `⟨A,B⟩ = tr(A† ρ_β^{1/2} B ρ_β^{1/2})`. The Schrödinger-picture
/// generator is the similarity transform `G ∘ D† ∘ G⁻¹` of the dual one,
/// and the coherent part is anti-self-adjoint, so it is excluded from
/// both residuals.
#[derive(Debug, Clone, Copy)]
pub struct QdbBoundReport {
    pub max_condition_number: f64,
    /// `√(p_max/p_min) = e^{βΔE/2}`.
    pub bound: f64,
    /// `‖D† - G⁻¹∘D∘G‖_F` with `G(A) = ρ_β^{1/2} A ρ_β^{1/2}`.
    pub kms_residual: f64,
    /// `‖M∘D† - D∘M‖_F` with `M(A) = A ρ_β` the GNS weight.
    pub gns_residual: f64,
}

impl QdbBoundReport {
    pub fn violated(&self) -> bool {
        self.max_condition_number > self.bound * (1.0 + 1e-8)
    }
}

/// Check `O_k ≤ e^{βΔE/2}` and the GNS/KMS self-adjointness of the
/// dissipator.
pub fn qdb_bound_check(davies: &DaviesModel, decomp: &SpectralDecomposition) -> QdbBoundReport {
    let max_condition_number = decomp
        .condition_numbers
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let bound = (davies.beta * davies.delta_e / 2.0).exp();

    let diss = dissipator_superoperator(&davies.model);
    let diss_dag = adjoint(&diss);
    let d = davies.model.dim();

    let sqrt_g = davies.gibbs_power(0.5);
    let inv_sqrt_g = davies.gibbs_power(-0.5);
    let g_sup = conjugation_superoperator(&sqrt_g);
    let g_inv_sup = conjugation_superoperator(&inv_sqrt_g);
    let kms_residual = fro_norm(&(&diss_dag - &g_inv_sup.dot(&diss).dot(&g_sup)));

    // GNS weight M: X ↦ Xρ_β, i.e. ρ_βᵀ ⊗ I.
    let m_sup = crate::linalg::kron(&davies.gibbs.t().to_owned(), &identity(d));
    let gns_residual = fro_norm(&(m_sup.dot(&diss_dag) - diss.dot(&m_sup)));

    QdbBoundReport {
        max_condition_number,
        bound,
        kms_residual,
        gns_residual,
    }
}

/// Residual of the eigenmode pairing `L_k ∝ R_k ρ_β⁻¹` (valid on
/// non-degenerate modes of a Davies generator): Frobenius distance between
/// the normalized directions after optimal phase alignment.
///
/// The pairing follows from Heisenberg-picture detailed balance: if
/// `D = M ∘ D† ∘ M⁻¹` with the GNS weight `M(X) = Xρ_β`, a right
/// eigenmatrix `R` gives `D†(Rρ_β⁻¹) = ν·(Rρ_β⁻¹)`, so `Rρ_β⁻¹` is the
/// matching left eigenmatrix up to normalization. (On the stationary mode
/// this is `ρ_β ρ_β⁻¹ = I`, as it must be.)
pub fn davies_lemma1_residual(
    davies: &DaviesModel,
    decomp: &SpectralDecomposition,
    k: usize,
) -> Result<f64, LindbladError> {
    let l = decomp.left(k)?;
    let r = decomp.right(k)?;
    let x = r.dot(&davies.gibbs_power(-1.0));
    let xn = fro_norm(&x);
    let ln = fro_norm(l);
    let ip = hs_inner(&x, l);
    let phase = if ip.norm() == 0.0 {
        c(1.0, 0.0)
    } else {
        ip / ip.norm()
    };
    let diff = l.mapv(|z| z / ln) - x.mapv(|z| z * phase / xn);
    Ok(fro_norm(&diff))
}

/// GUE-like random Hermitian matrix normalized to unit operator norm.
pub fn random_hermitian_unit_norm<R: Rng>(rng: &mut R, d: usize) -> Array2<c64> {
    let g = ginibre(rng, d, d);
    let h = (&g + &adjoint(&g)).mapv(|z| z * 0.5);
    let op = schatten_norms(&h).operator;
    h.mapv(|z| z / op)
}

/// Random Davies instance: normalized GUE `H₀` plus `n_couplings` random
/// Hermitian couplings under the KMS-symmetric profile.
pub fn random_davies<R: Rng>(
    rng: &mut R,
    d: usize,
    beta: f64,
    gamma: f64,
    n_couplings: usize,
) -> Result<DaviesModel, ModelError> {
    let h0 = random_hermitian_unit_norm(rng, d);
    let couplings: Vec<Array2<c64>> = (0..n_couplings)
        .map(|_| {
            let g = ginibre(rng, d, d);
            (&g + &adjoint(&g)).mapv(|z| z * 0.5)
        })
        .collect();
    build_davies(
        &h0,
        &couplings,
        beta,
        kms_rate_profile(gamma, beta),
        format!("random davies d={d} β={beta}"),
    )
}
