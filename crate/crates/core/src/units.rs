//! Unit conversions used at the configuration boundary.
//!
//! All internal math is SI with angular frequencies (rad/s). Config files
//! speak the lab dialect: μK for energies and temperatures, kHz/MHz/GHz for
//! frequencies, nm/μm for lengths, μs/ms for times. Conversion happens once
//! at parse time.

use std::f64::consts::TAU;

pub const KB: f64 = 1.380649e-23;

/// Trap depth or thermal energy given in μK, as an energy in J.
pub fn uk_to_joule(uk: f64) -> f64 {
    uk * 1e-6 * KB
}

/// Temperature in μK as K.
pub fn uk_to_kelvin(uk: f64) -> f64 {
    uk * 1e-6
}

/// Ordinary frequency in kHz as angular frequency in rad/s.
pub fn khz_to_angular(khz: f64) -> f64 {
    TAU * khz * 1e3
}

pub fn mhz_to_angular(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

pub fn ghz_to_angular(ghz: f64) -> f64 {
    TAU * ghz * 1e9
}

pub fn hz_to_angular(hz: f64) -> f64 {
    TAU * hz
}

pub fn angular_to_hz(w: f64) -> f64 {
    w / TAU
}

pub fn nm_to_m(nm: f64) -> f64 {
    nm * 1e-9
}

pub fn um_to_m(um: f64) -> f64 {
    um * 1e-6
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

pub fn ms_to_s(ms: f64) -> f64 {
    ms * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrips() {
        assert!((angular_to_hz(khz_to_angular(72.0)) - 72.0e3).abs() < 1e-6);
        assert!((uk_to_joule(300.0) - 300.0e-6 * KB).abs() < 1e-35);
        assert!((us_to_s(100.0) - 1e-4).abs() < 1e-18);
    }
}
