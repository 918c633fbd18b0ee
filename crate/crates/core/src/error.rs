use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("a Blaschke product needs at least one zero")]
    EmptyZeros,

    #[error("zero #{index} has modulus {modulus}, zeros must lie in the open unit disc")]
    ZeroOutsideDisc { index: usize, modulus: f64 },

    #[error("evaluation point ({re}, {im}) coincides with a pole")]
    Pole { re: f64, im: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("argument table is not strictly increasing at cell {cell}")]
    NonMonotoneTable { cell: usize },

    #[error("table size {size} is below the minimum {minimum}")]
    TableTooSmall { size: usize, minimum: usize },

    #[error("point is not on the unit circle (|z| = {modulus})")]
    NotOnCircle { modulus: f64 },

    #[error("point is within {distance:e} of the branch point b(1)")]
    BranchPoint { distance: f64 },

    #[error("grid size {0} is not a power of two")]
    GridSize(usize),

    #[error("mode window {window} does not fit a grid of {grid} nodes")]
    WindowTooLarge { window: usize, grid: usize },

    #[error("boundary functions live on different grids ({left} vs {right})")]
    GridMismatch { left: usize, right: usize },

    #[error("outer function input must be positive (minimum {min:e})")]
    NonPositive { min: f64 },

    #[error("negative-mode energy {energy:e} exceeds tolerance {tol:e}")]
    NotAnalytic { energy: f64, tol: f64 },

    #[error("matrix is not unitary (deviation {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("family fails the Gram check (deviation {deviation:e})")]
    GramCheck { deviation: f64 },

    #[error("basis element {index} is not in the model space: {reason}")]
    NotInModelSpace { index: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
