use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for {what}: {value}")]
    InvalidValue { what: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {what}: expected {expected} cells, found {found}")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-positive density {rho:e} in species {species} at cell {cell} (t = {time})")]
    Positivity {
        species: usize,
        cell: usize,
        time: f64,
        rho: f64,
    },

    #[error("step rejected: courant number max|u|dt/eps = {courant} exceeds 1")]
    CflViolation { courant: f64 },

    #[error("time step collapsed to {dt:e}; the state has non-finite speeds or forces")]
    StepCollapse { dt: f64 },

    #[error(
        "degenerate mollifier: support radius {support:e} is below the cell size {epsilon:e}; \
         increase alpha or refine the grid"
    )]
    DegenerateKernel { support: f64, epsilon: f64 },

    #[error("bodies {i} and {j} coincide with zero softening")]
    Singularity { i: usize, j: usize },

    #[error("body {index} lies outside the domain")]
    BodyOutside { index: usize },

    #[error("step {step} at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("snapshot format: {0}")]
    Format(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category, used by the command-line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidValue { .. } | Error::Config(_) | Error::Shape { .. } => "config",
            Error::Positivity { .. } => "positivity",
            Error::CflViolation { .. } | Error::StepCollapse { .. } => "cfl",
            Error::DegenerateKernel { .. } => "kernel",
            Error::Singularity { .. } | Error::BodyOutside { .. } => "bodies",
            Error::Step { source, .. } => source.category(),
            Error::Format(_) => "format",
            Error::Csv(_) | Error::Io(_) => "io",
        }
    }
}
