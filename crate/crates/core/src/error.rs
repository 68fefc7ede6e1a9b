use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("periodic axis {axis} has extent {extent}; periodic axes need at least 3 sites")]
    PeriodicTooSmall { axis: usize, extent: usize },

    #[error("coupling set does not match model: {0}")]
    CouplingMismatch(String),

    #[error("site {site} out of range for {n_qubits} qubits")]
    SiteOutOfRange { site: usize, n_qubits: usize },

    #[error("two-qubit gate needs distinct sites, got {0} twice")]
    DuplicateSites(usize),

    #[error("{what} needs {n_qubits} qubits but is capped at {cap}")]
    CapExceeded {
        what: &'static str,
        n_qubits: usize,
        cap: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("Trotter number must be at least 1")]
    InvalidTrotterNumber,

    #[error("unsupported Suzuki order {0}; expected 1, 2, 4, 6 or 8")]
    UnsupportedOrder(u32),

    #[error("axis {0} must be periodic for this operation")]
    NotPeriodic(usize),

    #[error("open training size {0} must be even")]
    OddOpenSize(usize),

    #[error("gluing blocks below minimal size: {0}")]
    BlockTooSmall(String),

    #[error("Hamiltonian assembly is not Hermitian (max asymmetry {0:e})")]
    NonHermitian(f64),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("Krylov propagation did not converge after {substeps} sub-steps")]
    KrylovNotConverged { substeps: usize },

    #[error("Krylov propagation drifted in norm by {0:e}")]
    KrylovNorm(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
