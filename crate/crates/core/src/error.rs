use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "adaptive quadrature on [{a}, {b}] did not reach tolerance within depth {max_depth} \
         (partial value {partial}, error estimate {error_estimate:e})"
    )]
    QuadratureDiverged {
        a: f64,
        b: f64,
        max_depth: u32,
        partial: Complex64,
        error_estimate: f64,
    },

    #[error("characteristic function vanishes at t = {t}; it cannot come from a quasi-infinitely divisible law")]
    VanishingCf { t: f64 },

    #[error("grid too coarse: phase increment {increment:.4} rad on [{left}, {right}]")]
    GridTooCoarse { left: f64, right: f64, increment: f64 },

    #[error("value at t = 0 is {value}, expected 1")]
    NotNormalized { value: Complex64 },

    #[error("grid does not contain t = 0")]
    MissingOrigin,

    #[error("grid point x = {x} coincides with an atom of the limit")]
    GridHitsAtom { x: f64 },

    #[error("sequence element {index} is not non-decreasing")]
    NotMonotone { index: usize },

    #[error("inversion integral did not converge (partial value {partial}, tail estimate {tail:e})")]
    NonConvergentTail { partial: f64, tail: f64 },

    #[error("scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
