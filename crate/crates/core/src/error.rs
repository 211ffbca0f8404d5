use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("pair separation kr must be positive, got {0}")]
    NonPositiveSeparation(f64),

    #[error("log-gamma pole at z = {re} + {im}i")]
    GammaPole { re: f64, im: f64 },

    #[error("index {index} out of range 0..={max}")]
    IndexOutOfRange { index: u32, max: u32 },

    #[error("oracle supports at most {cap} atoms, got {requested}")]
    OracleCapExceeded { requested: u32, cap: u32 },

    #[error("steady-state system is singular")]
    SingularSystem,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no resolvable intensity dip")]
    NoDip,

    #[error("expected exactly 2 resolvable dips, found {0}")]
    DipCount(usize),
}
