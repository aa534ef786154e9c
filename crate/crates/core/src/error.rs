//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    /// The requested mode box does not fit under the hard cap.
    #[error(
        "truncation infeasible on axis {axis}: need {required} levels, \
         total box {total_modes} modes exceeds cap {cap} (raise max_modes, \
         lower the temperature, or set explicit vmax)"
    )]
    TruncationInfeasible {
        axis: &'static str,
        required: usize,
        total_modes: usize,
        cap: usize,
    },

    /// Doubled-node quadrature disagrees with the production grid.
    #[error("angular quadrature did not converge: {0}")]
    QuadratureNonConvergence(String),

    /// The step bound would require more RK4 steps than allowed.
    #[error(
        "step control infeasible: {needed} steps needed for this span \
         (cap {cap}); use coarser sampling or a smaller basis"
    )]
    StepControlInfeasible { needed: u64, cap: u64 },

    #[error("pulse starts at t = {pulse_start} s but state time is {state_time} s")]
    TimeMismatch { state_time: f64, pulse_start: f64 },

    /// The two-level reduction needs the trap detuning to dominate the
    /// fine-structure splitting.
    #[error(
        "trap laser detuning too small for the two-level reduction: \
         |detuning| = {ratio:.2}x the fine-structure splitting (need >= {min_ratio}x)"
    )]
    DetuningTooSmall { ratio: f64, min_ratio: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

impl CoreError {
    pub fn config(msg: impl Into<String>) -> Self {
        CoreError::ConfigInvalid(msg.into())
    }
}
