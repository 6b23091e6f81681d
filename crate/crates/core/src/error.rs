use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { pos: usize, name: String },
    #[error("exponent at byte {pos} is not a constant")]
    NonConstantExponent { pos: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("fractional power of a negative base")]
    NegativeBase,
    #[error("zero raised to a negative power")]
    PowerPole,
    #[error("non-finite intermediate value")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("evaluation failed at phi = {at}: {source}")]
    Eval { at: f64, source: EvalError },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("could not bracket {what} after expansion")]
    Bracket { what: String },
    #[error("speed {c} is not admissible")]
    NotAdmissible { c: f64 },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("integral diverges: {0}")]
    Divergent(String),
    #[error("plateau rejected: {0}")]
    PlateauRejected(String),
    #[error("empty interval ({lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
