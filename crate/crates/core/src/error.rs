use alloc::string::String;

/// Errors raised by the simulation and verification routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("constraint violated: {rule}")]
    ConstraintViolation { rule: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("kernel `{kernel}` requires parameter `{param}`")]
    MissingParameter { kernel: String, param: String },

    #[error("kernel `{kernel}` does not accept parameter `{param}`")]
    UnknownParameter { kernel: String, param: String },

    #[error("parameter `{param}` of kernel `{kernel}` out of range: {detail}")]
    ParameterOutOfRange {
        kernel: String,
        param: String,
        detail: String,
    },

    #[error("kernel `{0}` claims the localized condition but has no tail function")]
    MissingH2Tail(String),

    #[error("inadmissible exponents: (q-2)/q - d/p = {0} is not positive")]
    InadmissibleExponent(f64),

    #[error("quadrature did not converge: last estimates {previous} and {last}")]
    NumericalFailure { previous: f64, last: f64 },

    #[error("non-finite position for particle {particle} at time {time}")]
    BlowUp { particle: usize, time: f64 },

    #[error("estimation failed: {0}")]
    EstimationFailure(String),

    #[error("CFL condition could not be met after {refinements} refinements (dt = {dt})")]
    Cfl { refinements: u32, dt: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn constraint(rule: impl Into<String>) -> Self {
        Error::ConstraintViolation { rule: rule.into() }
    }

    /// Name of the module family the error originates from, used by the CLI
    /// error records.
    pub fn origin(&self) -> &'static str {
        match self {
            Error::UnknownKernel(_)
            | Error::MissingParameter { .. }
            | Error::UnknownParameter { .. }
            | Error::ParameterOutOfRange { .. }
            | Error::MissingH2Tail(_) => "kernels",
            Error::InadmissibleExponent(_) | Error::NumericalFailure { .. } => "gauss_oracle",
            Error::BlowUp { .. } => "sde_engine",
            Error::EstimationFailure(_) => "girsanov_lab",
            Error::Cfl { .. } => "meanfield_ref",
            Error::ConstraintViolation { .. } | Error::Domain(_) | Error::Usage(_) => "core",
        }
    }
}
