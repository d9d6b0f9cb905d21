use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NotScalar(Vec<usize>),

    #[error("non-finite loss when perturbing parameter `{0}`")]
    NonFiniteProbe(String),

    #[error("non-finite stage value at t = {t}, component {component}")]
    NonFiniteStage { t: f64, component: usize },

    #[error("step size underflow at t = {t} (h = {h:e}); the problem may be stiff or the solution may blow up")]
    StepUnderflow { t: f64, h: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("training diverged at epoch {epoch} (last finite loss {last_finite:e}); try lowering the learning rate")]
    Diverged { epoch: usize, last_finite: f64 },

    #[error("constant state dimension {0}: normalization scale is zero")]
    ConstantDimension(usize),

    #[error("polynomial variable count mismatch: {0} vs {1}")]
    VarCountMismatch(usize, usize),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed data: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
