//! Trap geometry: potentials per spin state, oscillator frequencies,
//! zero-point lengths and Lamb-Dicke parameters.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::constants::PhysicalConstants;
use crate::error::CoreError;

/// Minimum ratio of trap detuning to fine-structure splitting accepted by
/// [`derive_trap`]. Below this the two-level reduction is meaningless.
pub const MIN_DETUNING_RATIO: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

pub const AXES: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Physical inputs describing one dipole trap. SI units, angular frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapConfig {
    /// Well depth |U0|, J (positive magnitude).
    pub depth: f64,
    /// 1/e² intensity waist, m.
    pub waist: f64,
    /// Trap laser wavelength, m.
    pub wavelength: f64,
    /// Transverse trap frequency, rad/s. `None` derives it from depth and waist.
    pub omega_perp: Option<f64>,
    /// Axial trap frequency, rad/s. `None` derives it from depth and geometry.
    pub omega_par: Option<f64>,
    /// Atom temperature, K. Zero is allowed and means the motional ground state.
    pub temperature: f64,
    /// Explicit per-axis mode cutoffs (vx_max, vy_max, vz_max).
    pub vmax: Option<[u32; 3]>,
    /// Boltzmann-weight truncation tolerance used when `vmax` is absent.
    pub occupancy_eps: f64,
    /// Hard cap on the total number of modes a box may hold.
    pub max_modes: usize,
    /// Override for the differential-shift scalar (diagnostic knob; measured
    /// values can be injected here).
    pub s_diff_override: Option<f64>,
    /// Override for the per-axis Lamb-Dicke parameters (diagnostic knob).
    pub eta_override: Option<[f64; 3]>,
}

impl TrapConfig {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.depth > 0.0) {
            return Err(CoreError::config("trap depth must be > 0"));
        }
        if !(self.waist > 0.0) || !(self.wavelength > 0.0) {
            return Err(CoreError::config("waist and wavelength must be > 0"));
        }
        if self.temperature < 0.0 {
            return Err(CoreError::config("temperature must be >= 0"));
        }
        if let (Some(wp), Some(wz)) = (self.omega_perp, self.omega_par) {
            if !(wz > 0.0) || wp < wz {
                return Err(CoreError::config(
                    "need omega_perp >= omega_par > 0 for a focused-beam trap",
                ));
            }
        }
        if !(self.occupancy_eps > 0.0 && self.occupancy_eps < 1.0) {
            return Err(CoreError::config("occupancy_eps must lie in (0, 1)"));
        }
        if self.max_modes == 0 {
            return Err(CoreError::config("max_modes must be positive"));
        }
        Ok(())
    }
}

/// Quantities derived from [`TrapConfig`] that the rest of the simulator
/// consumes. Axis order is (x, y, z) = (transverse, transverse, axial).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedTrap {
    /// Fractional depth difference between the two spin-state potentials.
    pub s_diff: f64,
    /// Mean-potential oscillator frequencies per axis, rad/s.
    pub omega_mean: [f64; 3],
    /// Oscillator frequencies in the lower-spin-state potential, rad/s.
    pub omega_a: [f64; 3],
    /// Oscillator frequencies in the upper-spin-state potential, rad/s.
    pub omega_b: [f64; 3],
    /// Zero-point lengths √(ħ/2mω) per axis, m.
    pub x_zpf: [f64; 3],
    /// Lamb-Dicke parameters k_L·x_zpf per axis.
    pub eta: [f64; 3],
    /// Trap laser detuning ω_L − ω0, rad/s (negative for a red trap).
    pub detuning: f64,
    /// Trap laser frequency, rad/s.
    pub omega_laser: f64,
    /// Effective dipole moment, C·m.
    pub d0: f64,
    /// Well depth magnitude, J (copied from config for convenience).
    pub depth: f64,
}

impl DerivedTrap {
    /// Per-mode shift of the vibrational energy between the spin states:
    /// (vx+vy+1)(ω⊥ᵇ−ω⊥ᵃ) + (vz+½)(ω∥ᵇ−ω∥ᵃ), rad/s.
    pub fn delta_omega_v(&self, v: [u32; 3]) -> f64 {
        let dperp = self.omega_b[0] - self.omega_a[0];
        let dpar = self.omega_b[2] - self.omega_a[2];
        (v[0] as f64 + v[1] as f64 + 1.0) * dperp + (v[2] as f64 + 0.5) * dpar
    }
}

/// Build all derived trap quantities.
///
/// The two spin states see scaled copies of the mean potential,
/// U_m = U0·(1 ± s/2), so their oscillator frequencies split as
/// ω^(a) = ω(1 − s/4), ω^(b) = ω(1 + s/4). With no override, the
/// differential-shift scalar is the far-detuned two-level value
/// s = ω_hpf/(ω0 − ω_L).
pub fn derive_trap(
    constants: &PhysicalConstants,
    config: &TrapConfig,
) -> Result<DerivedTrap, CoreError> {
    constants.validate()?;
    config.validate()?;

    let omega_laser = TAU * constants.c / config.wavelength;
    let omega0 = constants.omega_mean();
    let detuning = omega_laser - omega0;
    let fine_structure = constants.omega_d2 - constants.omega_d1;
    let ratio = detuning.abs() / fine_structure;
    if ratio < MIN_DETUNING_RATIO {
        return Err(CoreError::DetuningTooSmall {
            ratio,
            min_ratio: MIN_DETUNING_RATIO,
        });
    }

    let s_diff = config
        .s_diff_override
        .unwrap_or(constants.omega_hpf / (omega0 - omega_laser));

    // Parabolic expansion of a focused Gaussian beam:
    //   transverse  U ≈ −U0(1 − 2r²/w0²)  →  ω⊥ = (2/w0)√(U0/m)
    //   axial       U ≈ −U0(1 − z²/zR²)   →  ω∥ = (1/zR)√(2U0/m)
    let m = constants.atom_mass;
    let omega_perp = match config.omega_perp {
        Some(w) => w,
        None => 2.0 / config.waist * (config.depth / m).sqrt(),
    };
    let omega_par = match config.omega_par {
        Some(w) => w,
        None => {
            let z_r = std::f64::consts::PI * config.waist * config.waist / config.wavelength;
            (2.0 * config.depth / m).sqrt() / z_r
        }
    };
    if !(omega_par > 0.0) || omega_perp < omega_par {
        return Err(CoreError::config(
            "derived trap frequencies violate omega_perp >= omega_par > 0",
        ));
    }

    let omega_mean = [omega_perp, omega_perp, omega_par];
    let mut omega_a = [0.0; 3];
    let mut omega_b = [0.0; 3];
    let mut x_zpf = [0.0; 3];
    let mut eta = [0.0; 3];
    let k_l = TAU / config.wavelength;
    for i in 0..3 {
        omega_a[i] = omega_mean[i] * (1.0 - s_diff / 4.0);
        omega_b[i] = omega_mean[i] * (1.0 + s_diff / 4.0);
        x_zpf[i] = (constants.hbar / (2.0 * m * omega_mean[i])).sqrt();
        eta[i] = k_l * x_zpf[i];
    }
    if let Some(over) = config.eta_override {
        eta = over;
    }

    Ok(DerivedTrap {
        s_diff,
        omega_mean,
        omega_a,
        omega_b,
        x_zpf,
        eta,
        detuning,
        omega_laser,
        d0: constants.dipole_moment(),
        depth: config.depth,
    })
}
