//! Physical constants and species data.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use crate::error::CoreError;

/// Fundamental constants (CODATA 2018) plus the species data the simulator
/// needs. Everything is SI; frequencies are angular (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Speed of light, m/s.
    pub c: f64,
    /// Boltzmann constant, J/K.
    pub kb: f64,
    /// Bohr magneton, J/T.
    pub mu_bohr: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Electron g-factor (−2 in the convention used here).
    pub g_electron: f64,
    /// Atomic mass, kg.
    pub atom_mass: f64,
    /// Nuclear spin (half-integer allowed).
    pub nuclear_spin: f64,
    /// Ground-state hyperfine splitting, rad/s.
    pub omega_hpf: f64,
    /// D1 transition frequency, rad/s.
    pub omega_d1: f64,
    /// D2 transition frequency, rad/s.
    pub omega_d2: f64,
    /// Natural linewidth of the D2 line, rad/s. Fixes the effective dipole
    /// moment of the two-level reduction.
    pub gamma_d2: f64,
}

pub const HBAR: f64 = 1.054571817e-34;
pub const C_LIGHT: f64 = 2.99792458e8;
pub const KB: f64 = 1.380649e-23;
pub const MU_BOHR: f64 = 9.2740100783e-24;
pub const EPS0: f64 = 8.8541878128e-12;
pub const AMU: f64 = 1.66053906660e-27;

impl PhysicalConstants {
    /// Rubidium-87 with Steck-table line data.
    pub fn rb87() -> Self {
        PhysicalConstants {
            hbar: HBAR,
            c: C_LIGHT,
            kb: KB,
            mu_bohr: MU_BOHR,
            eps0: EPS0,
            g_electron: -2.0,
            atom_mass: 86.909180531 * AMU,
            nuclear_spin: 1.5,
            omega_hpf: TAU * 6.834682610904e9,
            omega_d1: TAU * C_LIGHT / 794.978851e-9,
            omega_d2: TAU * C_LIGHT / 780.241209e-9,
            gamma_d2: TAU * 6.0666e6,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let pos = [
            ("hbar", self.hbar),
            ("c", self.c),
            ("kb", self.kb),
            ("mu_bohr", self.mu_bohr),
            ("eps0", self.eps0),
            ("atom_mass", self.atom_mass),
            ("nuclear_spin", self.nuclear_spin),
            ("omega_hpf", self.omega_hpf),
            ("omega_d1", self.omega_d1),
            ("omega_d2", self.omega_d2),
            ("gamma_d2", self.gamma_d2),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CoreError::config(format!(
                    "constant `{name}` must be strictly positive, got {v}"
                )));
            }
        }
        if self.omega_d2 <= self.omega_d1 {
            return Err(CoreError::config("omega_d2 must exceed omega_d1"));
        }
        Ok(())
    }

    /// Line-center frequency of the two-level reduction,
    /// ω0 = (2 ω_D2 + ω_D1)/3 (oscillator-strength-weighted mean).
    pub fn omega_mean(&self) -> f64 {
        (2.0 * self.omega_d2 + self.omega_d1) / 3.0
    }

    /// Effective S→P dipole moment (C·m), fixed by the D2 natural linewidth
    /// through γ = d₀² ω³ / (3π ε0 ħ c³).
    pub fn dipole_moment(&self) -> f64 {
        let d0sq = 3.0 * PI * self.eps0 * self.hbar * self.c.powi(3) * self.gamma_d2
            / self.omega_d2.powi(3);
        d0sq.sqrt()
    }

    /// Spontaneous-emission rate of the two-level reduction evaluated at an
    /// arbitrary frequency, Γ(ω) = d₀² ω³ / (3π ε0 ħ c³).
    pub fn natural_rate_at(&self, omega: f64) -> f64 {
        self.gamma_d2 * (omega / self.omega_d2).powi(3)
    }
}

/// Magnetic-dipole spontaneous decay rate of the hyperfine transition, 1/s.
///
/// Γ0 = [4 I g² / 3(2I+1)] · (μ0/4π) · ω_hpf³ μB² / (ħ c³)
///
/// The rate is astronomically small (~1e-13 1/s for Rb-87); it sets the
/// fundamental floor the simulated dephasing channels are compared against.
pub fn gamma0(constants: &PhysicalConstants) -> f64 {
    let i = constants.nuclear_spin;
    let g2 = constants.g_electron * constants.g_electron;
    let prefactor = 4.0 * i * g2 / (3.0 * (2.0 * i + 1.0));
    // μ0/4π expressed through 1/(4π ε0 c²)
    let mu0_over_4pi = 1.0 / (4.0 * PI * constants.eps0 * constants.c * constants.c);
    prefactor * mu0_over_4pi * constants.omega_hpf.powi(3) * constants.mu_bohr.powi(2)
        / (constants.hbar * constants.c.powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma0_rb87_magnitude() {
        let c = PhysicalConstants::rb87();
        let g0 = gamma0(&c);
        // frozen from direct evaluation of the formula with CODATA constants
        assert_relative_eq!(g0, 4.794259e-13, max_relative = 1e-5);
        assert!(g0 > 1e-14 && g0 < 1e-12);
    }

    #[test]
    fn gamma0_limits() {
        let mut c = PhysicalConstants::rb87();
        c.omega_hpf = 0.0;
        assert_eq!(gamma0(&c), 0.0);
        c.omega_hpf = TAU * 6.834682610904e9;
        let base = gamma0(&c);
        c.omega_hpf *= 2.0;
        assert_relative_eq!(gamma0(&c), 8.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn dipole_moment_consistency() {
        let c = PhysicalConstants::rb87();
        // invert the linewidth relation
        let d0 = c.dipole_moment();
        let gamma = d0 * d0 * c.omega_d2.powi(3) / (3.0 * PI * c.eps0 * c.hbar * c.c.powi(3));
        assert_relative_eq!(gamma, c.gamma_d2, max_relative = 1e-12);
        assert_relative_eq!(d0, 2.534452e-29, max_relative = 1e-5);
    }

    #[test]
    fn rejects_inverted_lines() {
        let mut c = PhysicalConstants::rb87();
        std::mem::swap(&mut c.omega_d1, &mut c.omega_d2);
        assert!(c.validate().is_err());
    }
}
