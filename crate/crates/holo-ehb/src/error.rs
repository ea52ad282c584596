use thiserror::Error;

#[derive(Debug, Error)]
pub enum EhbError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("ill-posed spherical wave expansion: condition number {0:.3e}")]
    IllPosedExpansion(f64),
    #[error("coupling not identifiable: uncoupled coefficients have rank {rank}, need {needed}")]
    UnidentifiableCoupling { rank: usize, needed: usize },
    #[error("degenerate radiated power: i^H Z i = {0:.3e}")]
    DegeneratePower(f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("ill-conditioned coupling matrix: condition number {0:.3e}")]
    IllConditionedCoupling(f64),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("insufficient paths: L = {paths} < K = {users}")]
    InsufficientPaths { paths: usize, users: usize },
    #[error("invalid conic problem: {0}")]
    InvalidProblem(String),
    #[error("matrix is not positive semidefinite: min eigenvalue {0:.3e}")]
    NotPsd(f64),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("invalid experiment spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EhbError>;
