//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tick interval or position fell outside the valid span.
    TickRange { start: u32, end: u32, limit: u32 },
    /// A pitch left the 0..=127 MIDI range.
    PitchRange { value: i32 },
    /// A caller-supplied argument violated a precondition.
    InvalidArgument(String),
    /// A domain invariant did not hold (lead sheet consistency, model rows).
    Validation(String),
    /// No sequence satisfies the duration, pin and support constraints.
    /// `stuck_at` is the last tick any partial sequence could reach.
    Infeasible { stuck_at: u32, total_ticks: u32 },
    /// A structure plan is malformed (coverage, ranges, cycles).
    Plan(String),
    /// A schedule step could not be generated.
    StructuralInfeasibility { step: usize, detail: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TickRange { start, end, limit } => {
                write!(f, "tick interval [{start}, {end}) outside span of {limit} ticks")
            }
            Error::PitchRange { value } => {
                write!(f, "pitch {value} outside the MIDI range 0..=127")
            }
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Validation(msg) => write!(f, "validation failed: {msg}"),
            Error::Infeasible { stuck_at, total_ticks } => write!(
                f,
                "infeasible model: no admissible sequence of {total_ticks} ticks \
                 (forward frontier empty beyond tick {stuck_at})"
            ),
            Error::Plan(msg) => write!(f, "invalid plan: {msg}"),
            Error::StructuralInfeasibility { step, detail } => {
                write!(f, "structure step {step} is infeasible: {detail}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
