use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("region not resolvable on a depth-{mesh_depth} mesh (needs depth {needed}); build a finer mesh")]
    Unresolvable { mesh_depth: u32, needed: u32 },
    #[error("non-finite value {value} in cell {cell}")]
    NonFinite { cell: usize, value: f64 },
    #[error("weight value {value:e} in cell {cell} is not admissible")]
    BadWeight { cell: usize, value: f64 },
    #[error("quadrature did not converge: estimate {estimate} with error {error:e} after {evals} evaluations")]
    Quadrature { estimate: f64, error: f64, evals: usize },
    #[error("iteration did not converge: best estimate {estimate}")]
    NoConvergence { estimate: f64 },
    #[error("overflow: {0}")]
    Overflow(String),
    #[error("symbol {0} has no Taylor coefficients")]
    NoCoefficients(String),
    #[error("evaluation at a singular point: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
