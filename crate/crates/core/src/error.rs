use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("point {point:?} lies outside the domain box")]
    OutsideDomain { point: Vec<f64> },
    #[error("requested jet order {requested} exceeds the supported maximum {max}")]
    OrderTooHigh { requested: usize, max: usize },
    #[error("non-finite value while evaluating {what}")]
    NonFinite { what: String },
    #[error("singular linear system (pivot {pivot:e})")]
    Singular { pivot: f64 },
    #[error("frame is not transversal at {point:?}")]
    Frame { point: Vec<f64> },
    #[error("degenerate second fundamental form (|det h| = {det:e})")]
    Degenerate { det: f64 },
    #[error("transversal field is not a Blaschke field (tau residual {tau:e}, volume residual {volume:e})")]
    NotBlaschke { tau: f64, volume: f64 },
    #[error("J~C is not tangent (normalized determinant {residual:e})")]
    NotJTangent { residual: f64 },
    #[error("structure error: {0}")]
    Structure(String),
    #[error("ambient dimension {0} is odd; the para-complex structure needs an even dimension")]
    OddDimension(usize),
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("transversal field is not a constant multiple of the position vector")]
    NotCentroAffine,
    #[error("eigen-projection rank drop (pivot {pivot:e})")]
    RankDrop { pivot: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub type Result<T> = std::result::Result<T, GeomError>;
