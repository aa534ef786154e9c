//! Deterministic simulator of a hyperfine clock-state qubit in a
//! far-off-resonant optical dipole trap with fully quantized atomic motion.
//!
//! The atom's vibrational state lives in a truncated three-dimensional
//! oscillator basis; microwave pulse sequences (Rabi, Ramsey, spin echo) act
//! as per-mode 2×2 block propagators, and free evolution integrates a
//! reduced master equation whose relaxation matrices come from trap
//! intensity noise and incoherent photon scattering.
//!
//! Everything is deterministic: there is no randomness anywhere, so
//! identical configurations produce byte-identical outputs.

pub mod config;
pub mod constants;
pub mod error;
pub mod evolve;
pub mod modes;
pub mod oscillator;
pub mod pulse;
pub mod quadrature;
pub mod rates;
pub mod state;
pub mod trap;
pub mod units;

pub use config::RunConfig;
pub use constants::{gamma0, PhysicalConstants};
pub use error::CoreError;
pub use evolve::{
    coherence_halftime, fit_exponential, free_evolve, ramsey_dephasing_oracle, run_gap_scan,
    run_protocol, scan_carrier, GapScan, PulseMode, SequenceKind, StepControl, TimeSeries,
};
pub use modes::{enumerate_modes, Mode, ModeSpace};
pub use oscillator::{debye_waller_1d, mode_overlap_diagnostic, osc_elem_position_quadratic};
pub use pulse::{apply_delta_pulse, apply_pulse, block_unitary, Event, Protocol, PulseSpec};
pub use quadrature::angular_weight;
pub use rates::{
    assemble_rates, fluct_rates, photon_flux_from_depth, scatter_rates, total_cross_section,
    Channel, ChannelRates, NoiseModel, RateMatrices, ScatteringModel,
};
pub use state::{thermal_state, QubitVibState, Spin, ThermalSpec};
pub use trap::{derive_trap, Axis, DerivedTrap, TrapConfig};
