use thiserror::Error;

/// Errors raised by configuration validation and the analysis entry points.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("number of users must be positive")]
    NoUsers,
    #[error("configuration needs at least one slot class")]
    NoClasses,
    #[error("mean degree {beta} of slot class {class} is outside [0, {users}]")]
    MeanDegreeOutOfRange {
        class: usize,
        beta: f64,
        users: usize,
    },
    #[error("slot order: {0}")]
    SlotOrder(String),
    #[error("target {target} is outside 1..={users}")]
    TargetOutOfRange { target: usize, users: usize },
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("decoder state needs {bits} bits, more than a 64-bit key can hold")]
    StateSpaceTooLarge { bits: u32 },
}

pub type Result<T> = std::result::Result<T, Error>;
