//! Spin ⊗ vibration density matrix in the slow (co-rotating) frame.
//!
//! Vibrational off-diagonal elements are never stored: each mode carries one
//! 2×2 spin block, and the four block entries live in four contiguous
//! complex arrays (structure-of-arrays over modes).

use num_complex::Complex64 as C64;

use crate::error::CoreError;
use crate::modes::ModeSpace;

/// Thermal preparation parameters.
#[derive(Debug, Clone, Copy)]
pub struct ThermalSpec {
    /// Inverse temperature 1/(kB T), 1/J. `f64::INFINITY` means T = 0.
    pub beta: f64,
    /// Spin state the atom is pumped into before the sequence.
    pub initial_spin: Spin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin {
    A,
    B,
}

/// Block density matrix: per-mode 2×2 spin blocks in the slow frame.
#[derive(Debug, Clone)]
pub struct QubitVibState {
    /// Absolute time, s. Pulse-frame bookkeeping depends on it.
    pub time: f64,
    /// Carrier frequency the running protocol uses, rad/s (bookkeeping only).
    pub carrier: f64,
    pub rho_aa: Vec<C64>,
    pub rho_bb: Vec<C64>,
    pub rho_ba: Vec<C64>,
    pub rho_ab: Vec<C64>,
    /// Fraction of the analytic thermal ensemble the truncated basis held at
    /// preparation time (diagnostic, copied into run metadata).
    pub captured_weight: f64,
}

impl QubitVibState {
    pub fn n_modes(&self) -> usize {
        self.rho_aa.len()
    }

    /// Total population per spin state: (P_a, P_b).
    pub fn populations(&self) -> (f64, f64) {
        let pa: f64 = self.rho_aa.iter().map(|z| z.re).sum();
        let pb: f64 = self.rho_bb.iter().map(|z| z.re).sum();
        (pa, pb)
    }

    pub fn trace(&self) -> f64 {
        let (pa, pb) = self.populations();
        pa + pb
    }

    /// Coherence magnitudes: (|Σ_v ρ_ba,v|, Σ_v |ρ_ba,v|).
    ///
    /// The aggregate sets the Ramsey fringe contrast; the total is blind to
    /// mode-dependent phase spread and isolates amplitude damping.
    pub fn coherence_magnitude(&self) -> (f64, f64) {
        let sum: C64 = self.rho_ba.iter().sum();
        let total: f64 = self.rho_ba.iter().map(|z| z.norm()).sum();
        (sum.norm(), total)
    }

    /// Debug-grade structural checks: hermiticity, diagonal realness, block
    /// positivity down to −1e-12.
    pub fn check_physical(&self) -> Result<(), CoreError> {
        for i in 0..self.n_modes() {
            let (aa, bb) = (self.rho_aa[i], self.rho_bb[i]);
            if aa.im.abs() > 1e-10 || bb.im.abs() > 1e-10 {
                return Err(CoreError::DimensionMismatch(format!(
                    "non-real diagonal in block {i}"
                )));
            }
            if (self.rho_ab[i] - self.rho_ba[i].conj()).norm() > 1e-10 {
                return Err(CoreError::DimensionMismatch(format!(
                    "non-hermitian block {i}"
                )));
            }
            // eigenvalues of [[bb, c],[c*, aa]]
            let tr = aa.re + bb.re;
            let det = aa.re * bb.re - self.rho_ba[i].norm_sqr();
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            if tr / 2.0 - disc < -1e-12 {
                return Err(CoreError::DimensionMismatch(format!(
                    "negative block eigenvalue in block {i}"
                )));
            }
        }
        Ok(())
    }

    /// Columnar CSV snapshot (mode indices + the four block entries).
    pub fn to_csv(&self, modespace: &ModeSpace) -> String {
        let mut out = String::from(
            "vx,vy,vz,rho_aa_re,rho_aa_im,rho_bb_re,rho_bb_im,rho_ba_re,rho_ba_im,rho_ab_re,rho_ab_im\n",
        );
        for (i, m) in modespace.modes().iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                m.vx,
                m.vy,
                m.vz,
                self.rho_aa[i].re,
                self.rho_aa[i].im,
                self.rho_bb[i].re,
                self.rho_bb[i].im,
                self.rho_ba[i].re,
                self.rho_ba[i].im,
                self.rho_ab[i].re,
                self.rho_ab[i].im,
            ));
        }
        out
    }
}

/// Boltzmann-populated state in the requested spin manifold, normalized over
/// the truncated mode set. Coherences start at zero.
///
/// The captured weight compares the truncated partition sum against the
/// analytic geometric-series partition function, so truncation error is
/// visible to callers.
pub fn thermal_state(
    modespace: &ModeSpace,
    thermal: ThermalSpec,
) -> Result<QubitVibState, CoreError> {
    if modespace.is_empty() {
        return Err(CoreError::config("mode space is empty"));
    }
    let n = modespace.len();
    let energies = match thermal.initial_spin {
        Spin::A => modespace.energies_a(),
        Spin::B => modespace.energies_b(),
    };
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut weights = vec![0.0f64; n];
    if thermal.beta.is_infinite() {
        let i0 = energies
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        weights[i0] = 1.0;
    } else {
        if !(thermal.beta > 0.0) {
            return Err(CoreError::config("beta must be positive or infinite"));
        }
        for (w, &e) in weights.iter_mut().zip(energies) {
            *w = (-(thermal.beta) * (e - e0)).exp();
        }
    }
    let z: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= z;
    }

    let zero = vec![C64::new(0.0, 0.0); n];
    let pops: Vec<C64> = weights.iter().map(|&w| C64::new(w, 0.0)).collect();
    let (rho_aa, rho_bb) = match thermal.initial_spin {
        Spin::A => (pops, zero.clone()),
        Spin::B => (zero.clone(), pops),
    };

    Ok(QubitVibState {
        time: 0.0,
        carrier: 0.0,
        rho_aa,
        rho_bb,
        rho_ba: zero.clone(),
        rho_ab: zero,
        captured_weight: modespace.boltzmann_capture(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::PhysicalConstants;
    use crate::modes::{enumerate_modes, Mode};
    use crate::trap::test_fixtures::reference_config;
    use crate::trap::derive_trap;
    use approx::assert_abs_diff_eq;

    fn space(vmax: [u32; 3], temp_uk: f64) -> (PhysicalConstants, ModeSpace) {
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = Some(vmax);
        cfg.temperature = temp_uk * 1e-6;
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        (c, ms)
    }

    #[test]
    fn zero_temperature_occupies_ground_mode() {
        let (_, ms) = space([4, 4, 4], 40.0);
        let st = thermal_state(
            &ms,
            ThermalSpec { beta: f64::INFINITY, initial_spin: Spin::A },
        )
        .unwrap();
        let i0 = ms.index_of(Mode { vx: 0, vy: 0, vz: 0 }).unwrap();
        assert_abs_diff_eq!(st.rho_aa[i0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.trace(), 1.0, epsilon = 1e-15);
        let (pa, pb) = st.populations();
        assert_eq!((pa, pb), (1.0, 0.0));
    }

    #[test]
    fn equal_energies_get_equal_weights() {
        // transverse x and y are degenerate: (1,0,0) and (0,1,0)
        let (c, ms) = space([1, 1, 0], 40.0);
        let beta = 1.0 / (c.kb * 40e-6);
        let st = thermal_state(&ms, ThermalSpec { beta, initial_spin: Spin::A }).unwrap();
        let i = ms.index_of(Mode { vx: 1, vy: 0, vz: 0 }).unwrap();
        let j = ms.index_of(Mode { vx: 0, vy: 1, vz: 0 }).unwrap();
        assert_abs_diff_eq!(st.rho_aa[i].re, st.rho_aa[j].re, epsilon = 1e-15);
    }

    #[test]
    fn eps_driven_box_reports_captured_weight() {
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = None;
        cfg.occupancy_eps = 1e-3;
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let beta = 1.0 / (c.kb * cfg.temperature);
        let st = thermal_state(&ms, ThermalSpec { beta, initial_spin: Spin::A }).unwrap();
        assert!(st.captured_weight >= 0.999);
        // ~6M-term normalization sum: rounding accumulates past 1e-12
        assert_abs_diff_eq!(st.trace(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fresh_state_has_no_coherence() {
        let (c, ms) = space([3, 3, 6], 40.0);
        let beta = 1.0 / (c.kb * 40e-6);
        let st = thermal_state(&ms, ThermalSpec { beta, initial_spin: Spin::A }).unwrap();
        let (agg, tot) = st.coherence_magnitude();
        assert_eq!((agg, tot), (0.0, 0.0));
        st.check_physical().unwrap();
    }

    #[test]
    fn csv_snapshot_round_shape() {
        let (c, ms) = space([1, 1, 1], 40.0);
        let beta = 1.0 / (c.kb * 40e-6);
        let st = thermal_state(&ms, ThermalSpec { beta, initial_spin: Spin::A }).unwrap();
        let csv = st.to_csv(&ms);
        assert_eq!(csv.lines().count(), 1 + ms.len());
        assert!(csv.starts_with("vx,vy,vz,"));
    }
}
