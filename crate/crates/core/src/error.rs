use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {0} must be a power of two and at least 8")]
    GridSize(usize),
    #[error("degenerate box: x_min = {x_min}, x_max = {x_max}")]
    DegenerateBox { x_min: f64, x_max: f64 },
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("wavepacket support [{lo}, {hi}] does not fit in box [{x_min}, {x_max}]")]
    SupportOutsideBox {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("zero-norm input")]
    ZeroNorm,
    #[error("edge density {density:.3e} exceeds threshold {threshold:.1e} (box too small)")]
    EdgeBreach { density: f64, threshold: f64 },
    #[error("transmitted mass {mass:.3e} below threshold: no transmission")]
    NoTransmission { mass: f64 },
    #[error("intervention profile negative ({value}) at x = {x}")]
    NegativeProfile { x: f64, value: f64 },
    #[error("probe (t = {t}, x = {x}) is inside the light cone (front at {front})")]
    ProbeInsideCone { t: f64, x: f64, front: f64 },
    #[error("toy model has {0} modes; the exact oracle supports at most 4")]
    TooManyModes(usize),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
