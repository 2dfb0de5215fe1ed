//! Error type shared by all kernel modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the numeric kernels and model plumbing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    /// Two operands cannot be combined; both shapes are named so the
    /// offending call site is identifiable from the message alone.
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A vector operand has the wrong length.
    DimMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    /// A cell or model configuration violates one of its constraints.
    InvalidConfig(String),
    /// An input or intermediate value is NaN or infinite.
    NonFinite { what: &'static str },
    /// A cache/params or grads/params pairing with mismatched variants.
    VariantMismatch {
        expected: &'static str,
        got: &'static str,
    },
    /// A token id or coordinate outside its valid range.
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::ShapeMismatch { op, left, right } => write!(
                f,
                "{op}: shape mismatch, left is {}x{}, right is {}x{}",
                left.0, left.1, right.0, right.1
            ),
            CoreError::DimMismatch { op, expected, got } => {
                write!(f, "{op}: expected dim {expected}, got {got}")
            }
            CoreError::InvalidConfig(reason) => write!(f, "invalid config: {reason}"),
            CoreError::NonFinite { what } => write!(f, "non-finite value in {what}"),
            CoreError::VariantMismatch { expected, got } => {
                write!(f, "variant mismatch: expected {expected}, got {got}")
            }
            CoreError::IndexOutOfRange { what, index, bound } => {
                write!(f, "{what} {index} out of range (bound {bound})")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for CoreError {}

pub type Result<T> = core::result::Result<T, CoreError>;
