use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("polygon inconsistency: {0}")]
    Inconsistency(String),

    #[error("parameter problem did not converge after {iterations} iterations (residual trace: {trace:?})")]
    ParameterProblem { iterations: usize, trace: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("inverse map failed for z = {z}")]
    Inversion { z: Complex64 },

    #[error("discretization error: {0}")]
    Discretization(String),

    #[error("singular gradient near z = {z}")]
    SingularGradient { z: Complex64 },

    #[error("solver did not converge within {iterations} iterations (last max residual {last_residual:.3e})")]
    Nonconvergence {
        iterations: usize,
        last_residual: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
