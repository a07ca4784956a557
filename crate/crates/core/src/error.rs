use std::path::PathBuf;

/// Everything that can go wrong while loading, reducing or verifying a model.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("invalid manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("dimension mismatch in {matrix}: expected {expected}, found {found}")]
    DimensionMismatch { matrix: String, expected: String, found: String },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("matrix {matrix} is not symmetric (asymmetry {asymmetry:e})")]
    NotSymmetric { matrix: String, asymmetry: f64 },

    #[error("matrix {matrix} is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { matrix: String, min_eigenvalue: f64 },

    #[error("system is not asymptotically stable (spectral abscissa {abscissa:e}, margin {margin:e})")]
    Unstable { abscissa: f64, margin: f64 },

    #[error(
        "{gramian} gramian is numerically singular (eigenvalue ratio {ratio:e}); \
         the realization is not minimal, remove uncontrollable/unobservable states first"
    )]
    NotMinimal { gramian: &'static str, ratio: f64 },

    #[error("invalid abstraction order k={k}: need p < k <= n with p={p}, n={n}")]
    InvalidOrder { k: usize, p: usize, n: usize },

    #[error("Schur decomposition failed to converge for a {0}x{0} matrix")]
    SchurFailed(usize),

    #[error("symmetric eigendecomposition failed to converge for a {0}x{0} matrix")]
    EigenFailed(usize),

    #[error("Lyapunov equation residual {residual:e} exceeds tolerance {tolerance:e}")]
    LyapunovResidual { residual: f64, tolerance: f64 },

    #[error("initial set has {vertices} vertices, above the simulation cap of {cap}")]
    VertexCap { vertices: String, cap: usize },

    #[error(
        "augmented dynamics are not monotonically convergent \
         (largest eigenvalue of A+A^T is {max_eigenvalue:e})"
    )]
    NotMonotone { max_eigenvalue: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
