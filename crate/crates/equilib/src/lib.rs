//! Finite-time equilibration bounds for Hamiltonians with continuous spectrum.
//!
//! A Hamiltonian with purely continuous spectrum never dephases completely:
//! the infinite-time ergodic average of its dynamics vanishes, so equilibration
//! statements must be made at a finite averaging time `T` and a finite spectral
//! resolution `Δ`. This crate models such systems on quadrature-discretized
//! spectra and provides two independent tool sets:
//!
//! * a **bound engine** ([`bounds`], [`kernels`]) that assembles the
//!   four-term estimate `𝓑(T, Δ)` on the time-averaged variance
//!   `σ²_A(T)` of any observable with `‖A‖ ≤ 1`, together with an analytic
//!   toy closed form and the finite-dimensional effective-dimension baseline;
//! * a **brute-force oracle** ([`oracle`]) that integrates the exact
//!   discretized dynamics in time and checks every inequality the bound
//!   engine relies on (coherence-subsector estimates, the dephasing-term
//!   estimate, the cross-term estimate, an integration-by-parts identity and
//!   a fidelity inequality) against direct evaluation.
//!
//! The two paths share nothing beyond `sinc`, so their agreement is evidence
//! rather than tautology. [`povm`] adds POVM distinguishability and the
//! effective-equilibration corollary.
//!
//! All types are immutable after construction and all operations are pure
//! functions, so everything here is safe to drive in parallel.

pub mod bounds;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod povm;
pub mod quad;
pub mod spectral;

pub use bounds::{BoundBreakdown, FiniteDimSystem, ShortBound, ToyParams};
pub use kernels::{KernelParams, Transform};
pub use spectral::{DensityMatrix, Observable, Partition, SpectralState, SpectrumGrid};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("invalid observable: {0}")]
    InvalidObservable(String),
    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),
    #[error("cell index {index} out of range (partition has {count} cells)")]
    CellOutOfRange { index: usize, count: usize },
    #[error("invalid kernel parameters: {0}")]
    InvalidKernelParams(String),
    #[error("cell indices must differ (got i = j = {0})")]
    EqualCells(usize),
    #[error("time average undersampled: requested {requested} samples, need at least {minimum}")]
    Undersampled { requested: usize, minimum: usize },
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("degenerate energy gaps: {0}")]
    DegenerateGaps(String),
    #[error("doubled-space dimension {dim} exceeds cap {cap}")]
    DoubledSpaceTooLarge { dim: usize, cap: usize },
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
