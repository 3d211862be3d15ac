use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("bit width {0} outside the tabulated range 1..=5")]
    BitWidthOutOfRange(u8),

    #[error("channel rank below requested stream count: sigma[{index}] = {value:e}")]
    RankDeficient { index: usize, value: f64 },

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(&'static str),

    #[error("closed form disagrees with matrix form by {0:e}")]
    ClosedFormMismatch(f64),

    #[error("non-finite result: {0}")]
    NonFinite(&'static str),

    #[error("Lloyd-Max iteration did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("feasible set has more than {cap} allocations")]
    FeasibleSetTooLarge { cap: usize },

    #[error("no allocation satisfies the ADC power budget")]
    Infeasible,

    #[error("config error: {0}")]
    Config(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
