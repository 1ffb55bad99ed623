//! Spectral analysis of Lindblad relaxation and the statistics of mode
//! overlaps over random initial-state ensembles.
//!
//! The crate is organized around a fixed pipeline:
//!
//! * [`linalg`] — dense complex primitives: Kronecker products, partial
//!   traces, Schatten norms, general (non-Hermitian) eigendecomposition
//!   with biorthogonal left/right vectors, and the numerical radius.
//! * [`lindblad`] — builds the generator of the quantum master equation as
//!   a `d² × d²` superoperator, produces its normalized spectral
//!   decomposition (eigenvalues, left/right eigenmatrices, condition
//!   numbers), propagates states, and evaluates first-order eigenvalue
//!   perturbations. Decompositions can be cached on disk.
//! * [`ensembles`] — deterministic, seedable samplers for random initial
//!   states: unitary-rotated reference states, Hilbert-Schmidt and induced
//!   measures, and Haar states on a constrained subspace.
//! * [`models`] — the physical generators used throughout: a non-interacting
//!   damped qubit chain (with a closed-form spectral oracle), a dissipative
//!   transverse-field Ising chain, and thermalizing Davies generators.
//! * [`typicality`] — overlap coefficients, their closed-form ensemble
//!   moments and Monte-Carlo estimates, concentration bounds, scaling fits,
//!   and relaxation/mixing-time diagnostics.

pub mod ensembles;
pub mod linalg;
pub mod lindblad;
pub mod models;
pub mod slow;
pub mod typicality;

pub use ndarray_linalg::c64;
