//! Exit-code classification for command failures.

use std::fmt;

use quilt_core::QuiltError;

/// A rejected input that is not already a typed parse or core error.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// 3 for solver non-convergence anywhere in the chain, 2 for malformed or
/// invalid input, 4 for everything else.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    let mut input = false;
    for cause in err.chain() {
        if let Some(q) = cause.downcast_ref::<QuiltError>() {
            match q {
                QuiltError::NotConverged { .. } => return EXIT_NOT_CONVERGED,
                QuiltError::InvalidInput(_)
                | QuiltError::DimensionMismatch { .. }
                | QuiltError::IndexOutOfRange { .. }
                | QuiltError::UnobservedVariable { .. }
                | QuiltError::NonFinite { .. }
                | QuiltError::NotCompletable(_) => input = true,
                QuiltError::NotPositiveDefinite | QuiltError::Numerical(_) => {}
            }
        } else if cause.is::<InputError>()
            || cause.is::<std::io::Error>()
            || cause.is::<csv::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<std::num::ParseFloatError>()
        {
            input = true;
        }
    }
    if input {
        EXIT_INPUT
    } else {
        EXIT_INTERNAL
    }
}
