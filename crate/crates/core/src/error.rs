use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown name `{0}`")]
    UnknownName(String),

    #[error("point {point:?} lies outside the domain (|p| = {value:e} below floor {floor:e})")]
    DomainViolation {
        point: Vec<[f64; 2]>,
        value: f64,
        floor: f64,
    },

    #[error("non-finite value while evaluating {what}")]
    Evaluation { what: String },

    #[error("cannot compose paths: {0}")]
    Composition(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("step size underflow at t = {t}")]
    Convergence { t: f64 },

    #[error("quadrature oracle supports at most {max} forms, got {got}")]
    UnsupportedOracle { max: usize, got: usize },

    #[error("invalid connection: {0}")]
    InvalidConnection(String),

    #[error("malformed word: {0}")]
    MalformedWord(String),

    #[error("exponent `{0}` is not in the form module")]
    ModuleClosure(String),

    #[error("position {pos} out of range for a word with {len} exponents")]
    Position { pos: usize, len: usize },

    #[error("exponent is not exact: {0}")]
    NotExact(String),

    #[error("form `{0}` is not closed")]
    NotClosed(String),

    #[error("word is not of the cover-reducible shape: {0}")]
    Shape(String),

    #[error("connection is not flat: homotopic loops differ by {deviation:e}")]
    Flatness { deviation: f64 },

    #[error("perturbation left the domain after {halvings} halvings")]
    Perturbation { halvings: usize },

    #[error("branch continuation failed near s = {s}")]
    Branch { s: f64 },

    #[error("invalid scene: {0}")]
    Scene(String),
}
