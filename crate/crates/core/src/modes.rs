//! Truncated three-dimensional vibrational mode space.

use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::CoreError;
use crate::trap::{DerivedTrap, TrapConfig};

/// One vibrational mode v = (vx, vy, vz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mode {
    pub vx: u32,
    pub vy: u32,
    pub vz: u32,
}

impl Mode {
    pub fn as_array(self) -> [u32; 3] {
        [self.vx, self.vy, self.vz]
    }
}

/// The enumerated, truncated set of vibrational modes with per-mode energies
/// in the two spin-state potentials and the differential shift δω_v.
///
/// Modes are stored in lexicographic (vx, vy, vz) order with the axial index
/// vz fastest; the axial axis holds the most levels, so rate assembly walks
/// it contiguously.
#[derive(Debug, Clone)]
pub struct ModeSpace {
    modes: Vec<Mode>,
    dims: [usize; 3],
    energies_a: Vec<f64>,
    energies_b: Vec<f64>,
    delta_omega: Vec<f64>,
    /// Fraction of the analytic thermal weight the box captures at the
    /// enumeration temperature (1.0 when T = 0 or no temperature was used).
    boltzmann_capture: f64,
}

impl ModeSpace {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Box dimensions (vmax + 1) per axis.
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn mode(&self, index: usize) -> Mode {
        self.modes[index]
    }

    /// Linear index of a mode, or `None` when it lies outside the box.
    pub fn index_of(&self, m: Mode) -> Option<usize> {
        let [nx, ny, nz] = self.dims;
        if (m.vx as usize) < nx && (m.vy as usize) < ny && (m.vz as usize) < nz {
            Some(((m.vx as usize) * ny + m.vy as usize) * nz + m.vz as usize)
        } else {
            None
        }
    }

    /// Vibrational energy in the lower-spin-state potential, J.
    pub fn energies_a(&self) -> &[f64] {
        &self.energies_a
    }

    /// Vibrational energy in the upper-spin-state potential, J.
    pub fn energies_b(&self) -> &[f64] {
        &self.energies_b
    }

    /// δω_v per mode, rad/s.
    pub fn delta_omega(&self) -> &[f64] {
        &self.delta_omega
    }

    pub fn boltzmann_capture(&self) -> f64 {
        self.boltzmann_capture
    }
}

/// Enumerate the truncated mode box.
///
/// With an explicit `vmax` the box is taken as given. Otherwise the per-axis
/// cutoffs are chosen so the captured Boltzmann weight is at least
/// 1 − occupancy_eps (each axis is budgeted eps/3, which guarantees the
/// product bound). T = 0 with no vmax yields the single mode (0,0,0).
pub fn enumerate_modes(
    constants: &PhysicalConstants,
    config: &TrapConfig,
    derived: &DerivedTrap,
) -> Result<ModeSpace, CoreError> {
    let cutoffs: [usize; 3] = match config.vmax {
        Some(v) => [v[0] as usize, v[1] as usize, v[2] as usize],
        None => {
            let mut cut = [0usize; 3];
            if config.temperature > 0.0 {
                let beta = 1.0 / (constants.kb * config.temperature);
                let per_axis_eps = config.occupancy_eps / 3.0;
                let log_target = (1.0 / per_axis_eps).ln();
                for i in 0..3 {
                    // smallest N with q^(N+1) <= eps/3, q = exp(−βħω)
                    let log_q_inv = beta * constants.hbar * derived.omega_a[i];
                    let levels = (log_target / log_q_inv).ceil() as usize;
                    cut[i] = levels.saturating_sub(1);
                }
            }
            cut
        }
    };

    let dims = [cutoffs[0] + 1, cutoffs[1] + 1, cutoffs[2] + 1];
    let total = dims[0]
        .checked_mul(dims[1])
        .and_then(|p| p.checked_mul(dims[2]))
        .unwrap_or(usize::MAX);
    if total > config.max_modes {
        let widest = (0..3).max_by_key(|&i| dims[i]).unwrap();
        return Err(CoreError::TruncationInfeasible {
            axis: ["x", "y", "z"][widest],
            required: dims[widest],
            total_modes: total,
            cap: config.max_modes,
        });
    }

    let mut modes = Vec::with_capacity(total);
    let mut energies_a = Vec::with_capacity(total);
    let mut energies_b = Vec::with_capacity(total);
    let mut delta_omega = Vec::with_capacity(total);
    let hbar = constants.hbar;
    for vx in 0..dims[0] as u32 {
        for vy in 0..dims[1] as u32 {
            for vz in 0..dims[2] as u32 {
                let v = [vx, vy, vz];
                let mut ea = 0.0;
                let mut eb = 0.0;
                for i in 0..3 {
                    let n = v[i] as f64 + 0.5;
                    ea += hbar * derived.omega_a[i] * n;
                    eb += hbar * derived.omega_b[i] * n;
                }
                modes.push(Mode { vx, vy, vz });
                energies_a.push(ea);
                energies_b.push(eb);
                delta_omega.push(derived.delta_omega_v(v));
            }
        }
    }

    let boltzmann_capture = if config.temperature > 0.0 {
        let beta = 1.0 / (constants.kb * config.temperature);
        let mut cap = 1.0;
        for i in 0..3 {
            let q = (-beta * hbar * derived.omega_a[i]).exp();
            cap *= 1.0 - q.powi(dims[i] as i32);
        }
        cap
    } else {
        1.0
    };

    Ok(ModeSpace {
        modes,
        dims,
        energies_a,
        energies_b,
        delta_omega,
        boltzmann_capture,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trap::test_fixtures::reference_config;
    use crate::trap::derive_trap;
    use approx::assert_relative_eq;

    fn setup(vmax: Option<[u32; 3]>, temp_uk: f64) -> (PhysicalConstants, TrapConfig, DerivedTrap) {
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = vmax;
        cfg.temperature = temp_uk * 1e-6;
        let d = derive_trap(&c, &cfg).unwrap();
        (c, cfg, d)
    }

    #[test]
    fn zero_temperature_gives_ground_mode_only() {
        let (c, cfg, d) = setup(None, 0.0);
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        assert_eq!(ms.len(), 1);
        assert_eq!(ms.mode(0), Mode { vx: 0, vy: 0, vz: 0 });
        assert_eq!(ms.boltzmann_capture(), 1.0);
    }

    #[test]
    fn explicit_box_is_lexicographic() {
        let (c, cfg, d) = setup(Some([2, 2, 2]), 40.0);
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        assert_eq!(ms.len(), 27);
        // vz varies fastest
        assert_eq!(ms.mode(0), Mode { vx: 0, vy: 0, vz: 0 });
        assert_eq!(ms.mode(1), Mode { vx: 0, vy: 0, vz: 1 });
        assert_eq!(ms.mode(3), Mode { vx: 0, vy: 1, vz: 0 });
        assert_eq!(ms.mode(9), Mode { vx: 1, vy: 0, vz: 0 });
        for (i, m) in ms.modes().iter().enumerate() {
            assert_eq!(ms.index_of(*m), Some(i));
        }
        assert_eq!(ms.index_of(Mode { vx: 3, vy: 0, vz: 0 }), None);
    }

    #[test]
    fn occupancy_driven_box_captures_weight() {
        let (c, mut cfg, d) = setup(None, 40.0);
        cfg.occupancy_eps = 1e-3;
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        assert!(ms.boltzmann_capture() >= 0.999, "capture = {}", ms.boltzmann_capture());
        // mean axial occupation at 40 μK and 9.6 kHz is ~86; the box must
        // extend far beyond it
        let nz = ms.dims()[2];
        assert!(nz > 86, "nz = {nz}");
    }

    #[test]
    fn mean_axial_occupation_reference() {
        // Bose occupation 1/(exp(ħω/kT) − 1), frozen from direct evaluation
        let (c, cfg, d) = setup(None, 40.0);
        let nbar = 1.0
            / ((c.hbar * d.omega_mean[2] / (c.kb * cfg.temperature)).exp() - 1.0);
        assert_relative_eq!(nbar, 86.320, max_relative = 1e-3);
    }

    #[test]
    fn infeasible_box_names_axis() {
        let (c, mut cfg, d) = setup(Some([100, 100, 4000]), 40.0);
        cfg.max_modes = 100_000;
        match enumerate_modes(&c, &cfg, &d) {
            Err(CoreError::TruncationInfeasible { axis, .. }) => assert_eq!(axis, "z"),
            other => panic!("expected TruncationInfeasible, got {other:?}"),
        }
    }

    #[test]
    fn energies_match_delta_omega() {
        let (c, cfg, d) = setup(Some([3, 2, 5]), 40.0);
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        for i in 0..ms.len() {
            let dw = (ms.energies_b()[i] - ms.energies_a()[i]) / c.hbar;
            assert_relative_eq!(dw, ms.delta_omega()[i], max_relative = 1e-10);
        }
    }

    #[test]
    fn delta_omega_collinear_in_each_index() {
        // δω is exactly linear in each vibrational index: a three-point
        // collinearity check along every axis
        let (c, cfg, d) = setup(Some([6, 6, 6]), 40.0);
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let dw = |v: [u32; 3]| ms.delta_omega()[ms.index_of(Mode { vx: v[0], vy: v[1], vz: v[2] }).unwrap()];
        for base in [[0, 0, 0], [1, 2, 3], [4, 4, 4]] {
            for axis in 0..3 {
                let mut v1 = base;
                let mut v2 = base;
                v1[axis] += 1;
                v2[axis] += 2;
                let (a, b, c3) = (dw(base), dw(v1), dw(v2));
                assert!(((c3 - b) - (b - a)).abs() <= 1e-15 * c3.abs().max(1.0));
            }
        }
    }
}
