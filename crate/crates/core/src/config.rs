//! Run configuration: a single TOML document with lab units at the boundary.
//!
//! Unknown keys are rejected. Parsing converts everything to SI/angular once;
//! the resolved document can be re-serialized for embedding in run outputs
//! and must round-trip to an equivalent configuration.

use serde::{Deserialize, Serialize};

use crate::constants::{PhysicalConstants, AMU};
use crate::error::CoreError;
use crate::rates::{NoiseModel, ScatteringModel};
use crate::trap::{DerivedTrap, TrapConfig};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub constants: ConstantsSection,
    pub trap: TrapSection,
    pub noise: NoiseSection,
    pub scattering: ScatteringSection,
    pub protocol: ProtocolSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            constants: ConstantsSection::default(),
            trap: TrapSection::default(),
            noise: NoiseSection::default(),
            scattering: ScatteringSection::default(),
            protocol: ProtocolSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Species data. The `species` preset seeds every value; explicit fields
/// override it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    pub species: String,
    pub mass_amu: Option<f64>,
    pub nuclear_spin: Option<f64>,
    pub hyperfine_ghz: Option<f64>,
    pub d1_nm: Option<f64>,
    pub d2_nm: Option<f64>,
    pub d2_linewidth_mhz: Option<f64>,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        ConstantsSection {
            species: "rb87".into(),
            mass_amu: None,
            nuclear_spin: None,
            hyperfine_ghz: None,
            d1_nm: None,
            d2_nm: None,
            d2_linewidth_mhz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub depth_uk: f64,
    pub waist_um: f64,
    pub wavelength_nm: f64,
    /// Measured transverse frequency; omitted means derive from geometry.
    pub freq_perp_khz: Option<f64>,
    /// Measured axial frequency; omitted means derive from geometry.
    pub freq_axial_khz: Option<f64>,
    pub temperature_uk: f64,
    pub vmax: Option<[u32; 3]>,
    pub occupancy_eps: f64,
    pub max_modes: usize,
    pub s_diff_override: Option<f64>,
    pub eta_override: Option<[f64; 3]>,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            depth_uk: 300.0,
            waist_um: 1.4,
            wavelength_nm: 852.0,
            freq_perp_khz: Some(72.0),
            freq_axial_khz: Some(9.6),
            temperature_uk: 40.0,
            vmax: None,
            occupancy_eps: 1e-3,
            max_modes: 8_000_000,
            s_diff_override: None,
            eta_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Relative-intensity-noise spectral density at low frequency, 1/Hz.
    /// Zero disables the fluctuation channel.
    pub rin_psd_inv_hz: f64,
    /// Set when the quoted PSD is a one-sided measurement; the solver works
    /// with the two-sided density, i.e. the value is halved on resolve.
    pub one_sided: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection { rin_psd_inv_hz: 0.0, one_sided: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScatteringSection {
    pub enabled: bool,
    pub quad_theta: usize,
    pub quad_phi: usize,
    pub dv_max: u32,
}

impl Default for ScatteringSection {
    fn default() -> Self {
        ScatteringSection { enabled: false, quad_theta: 24, quad_phi: 48, dv_max: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolSection {
    /// rabi | ramsey | echo
    pub kind: String,
    /// delta | rect
    pub pulse: String,
    pub rabi_khz: f64,
    /// Opening-pulse area in units of π. Omitted: 1.5 for Ramsey (the
    /// reference sequence), 0.5 for echo.
    pub first_pulse_area_pi: Option<f64>,
    pub gap_max_ms: f64,
    pub gap_count: usize,
    /// Rabi-trace duration; omitted means two resonant Rabi periods.
    pub rabi_duration_ms: Option<f64>,
    pub sample_every_us: f64,
    /// shifted (ω_hpf + δω of the ground mode) | bare | scan
    pub carrier: String,
    /// Explicit carrier offset from the hyperfine splitting; overrides
    /// `carrier` when set.
    pub carrier_offset_hz: Option<f64>,
    pub scan_span_hz: f64,
    pub scan_steps: usize,
    pub step_factor: f64,
    pub max_steps: u64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            kind: "ramsey".into(),
            pulse: "delta".into(),
            rabi_khz: 1.5,
            first_pulse_area_pi: None,
            gap_max_ms: 10.0,
            gap_count: 60,
            rabi_duration_ms: None,
            sample_every_us: 50.0,
            carrier: "shifted".into(),
            carrier_offset_hz: None,
            scan_span_hz: 800.0,
            scan_steps: 41,
            step_factor: 0.05,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    pub plot: bool,
    pub metadata: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), plot: false, metadata: true }
    }
}

/// Everything downstream code consumes, in SI.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub constants: PhysicalConstants,
    pub trap: TrapConfig,
    pub derived: DerivedTrap,
    pub noise: NoiseModel,
    /// `None` when the scattering channel is disabled.
    pub scattering: Option<ScatteringModel>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CoreError> {
        toml::from_str(text).map_err(|e| CoreError::config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn build_constants(&self) -> Result<PhysicalConstants, CoreError> {
        let mut c = match self.constants.species.to_ascii_lowercase().as_str() {
            "rb87" => PhysicalConstants::rb87(),
            other => {
                return Err(CoreError::config(format!(
                    "unknown species `{other}`; give explicit overrides on top of rb87"
                )))
            }
        };
        let s = &self.constants;
        if let Some(m) = s.mass_amu {
            c.atom_mass = m * AMU;
        }
        if let Some(i) = s.nuclear_spin {
            c.nuclear_spin = i;
        }
        if let Some(f) = s.hyperfine_ghz {
            c.omega_hpf = units::ghz_to_angular(f);
        }
        if let Some(l) = s.d1_nm {
            c.omega_d1 = std::f64::consts::TAU * c.c / units::nm_to_m(l);
        }
        if let Some(l) = s.d2_nm {
            c.omega_d2 = std::f64::consts::TAU * c.c / units::nm_to_m(l);
        }
        if let Some(g) = s.d2_linewidth_mhz {
            c.gamma_d2 = units::mhz_to_angular(g);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn build_trap(&self) -> TrapConfig {
        let t = &self.trap;
        TrapConfig {
            depth: units::uk_to_joule(t.depth_uk),
            waist: units::um_to_m(t.waist_um),
            wavelength: units::nm_to_m(t.wavelength_nm),
            omega_perp: t.freq_perp_khz.map(units::khz_to_angular),
            omega_par: t.freq_axial_khz.map(units::khz_to_angular),
            temperature: units::uk_to_kelvin(t.temperature_uk),
            vmax: t.vmax,
            occupancy_eps: t.occupancy_eps,
            max_modes: t.max_modes,
            s_diff_override: t.s_diff_override,
            eta_override: t.eta_override,
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CoreError> {
        self.validate_protocol()?;
        let constants = self.build_constants()?;
        let trap = self.build_trap();
        let derived = crate::trap::derive_trap(&constants, &trap)?;

        if self.noise.rin_psd_inv_hz < 0.0 {
            return Err(CoreError::config("rin_psd_inv_hz must be >= 0"));
        }
        let rin = if self.noise.one_sided {
            self.noise.rin_psd_inv_hz / 2.0
        } else {
            self.noise.rin_psd_inv_hz
        };
        let noise = NoiseModel { rin_psd: rin };

        let scattering = if self.scattering.enabled {
            let sigma0 = crate::rates::total_cross_section(
                derived.omega_laser,
                derived.omega_laser - derived.detuning,
                derived.d0,
                &constants,
            );
            let model = ScatteringModel {
                sigma0,
                photon_flux: crate::rates::photon_flux_from_depth(&derived, &constants),
                k_laser: derived.omega_laser / constants.c,
                n_theta: self.scattering.quad_theta,
                n_phi: self.scattering.quad_phi,
                dv_max: self.scattering.dv_max,
            };
            model.validate()?;
            Some(model)
        } else {
            None
        };

        Ok(Resolved { constants, trap, derived, noise, scattering })
    }

    fn validate_protocol(&self) -> Result<(), CoreError> {
        let p = &self.protocol;
        match p.kind.as_str() {
            "rabi" | "ramsey" | "echo" => {}
            other => return Err(CoreError::config(format!("unknown protocol kind `{other}`"))),
        }
        match p.pulse.as_str() {
            "delta" | "rect" => {}
            other => return Err(CoreError::config(format!("unknown pulse type `{other}`"))),
        }
        match p.carrier.as_str() {
            "shifted" | "bare" | "scan" => {}
            other => return Err(CoreError::config(format!("unknown carrier choice `{other}`"))),
        }
        if !(p.rabi_khz > 0.0) {
            return Err(CoreError::config("rabi_khz must be > 0"));
        }
        if p.gap_count == 0 || !(p.gap_max_ms > 0.0) {
            return Err(CoreError::config("gap grid needs gap_count >= 1 and gap_max_ms > 0"));
        }
        if !(p.step_factor > 0.0 && p.step_factor <= 0.1) {
            return Err(CoreError::config("step_factor must lie in (0, 0.1]"));
        }
        if p.scan_steps < 2 {
            return Err(CoreError::config("scan_steps must be >= 2"));
        }
        Ok(())
    }

    /// Opening-pulse area in radians for the configured sequence.
    pub fn first_pulse_area(&self) -> f64 {
        let pi = std::f64::consts::PI;
        match self.protocol.first_pulse_area_pi {
            Some(a) => a * pi,
            None => match self.protocol.kind.as_str() {
                "echo" => 0.5 * pi,
                _ => 1.5 * pi,
            },
        }
    }

    /// The free-gap grid, s.
    pub fn gap_grid(&self) -> Vec<f64> {
        let n = self.protocol.gap_count;
        let t_max = units::ms_to_s(self.protocol.gap_max_ms);
        if n == 1 {
            return vec![t_max];
        }
        (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn default_config_resolves() {
        let cfg = RunConfig::default();
        let r = cfg.resolve().unwrap();
        assert_relative_eq!(r.derived.s_diff, 2.279210e-4, max_relative = 1e-5);
        assert!(r.scattering.is_none());
        assert_eq!(r.noise.rin_psd, 0.0);
    }

    #[test]
    fn toml_round_trip_is_equivalent() {
        let mut cfg = RunConfig::default();
        cfg.trap.vmax = Some([12, 12, 48]);
        cfg.noise.rin_psd_inv_hz = 1e-13;
        cfg.scattering.enabled = true;
        cfg.protocol.kind = "echo".into();
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "[trap]\ndepth_uk = 300.0\nnot_a_key = 1\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn one_sided_psd_is_halved() {
        let mut cfg = RunConfig::default();
        cfg.noise.rin_psd_inv_hz = 1e-13;
        cfg.noise.one_sided = true;
        let r = cfg.resolve().unwrap();
        assert_relative_eq!(r.noise.rin_psd, 0.5e-13, max_relative = 1e-12);
    }

    #[test]
    fn scattering_model_built_when_enabled() {
        let mut cfg = RunConfig::default();
        cfg.scattering.enabled = true;
        let r = cfg.resolve().unwrap();
        let m = r.scattering.unwrap();
        assert_relative_eq!(m.sigma0, 2.091795e-27, max_relative = 1e-5);
        // 300 μK default depth: frozen flux·σ0 from the depth identity
        assert_relative_eq!(m.photon_flux * m.sigma0, 6.1025, max_relative = 1e-4);
    }

    #[test]
    fn bad_protocol_kind_rejected() {
        let mut cfg = RunConfig::default();
        cfg.protocol.kind = "spinlock".into();
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn default_first_area_depends_on_kind() {
        let mut cfg = RunConfig::default();
        assert_relative_eq!(cfg.first_pulse_area(), 1.5 * std::f64::consts::PI);
        cfg.protocol.kind = "echo".into();
        assert_relative_eq!(cfg.first_pulse_area(), 0.5 * std::f64::consts::PI);
        cfg.protocol.first_pulse_area_pi = Some(0.5);
        assert_relative_eq!(cfg.first_pulse_area(), 0.5 * std::f64::consts::PI);
    }
}
