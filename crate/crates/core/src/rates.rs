//! Relaxation-rate assembly: trap-intensity-noise rates from harmonic matrix
//! elements of the mean potential, and photon-scattering rates from
//! angle-averaged displacement amplitudes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::PhysicalConstants;
use crate::error::CoreError;
use crate::modes::ModeSpace;
use crate::oscillator::debye_waller_1d;
use crate::quadrature::{angular_grid, AngularNode};
use crate::trap::DerivedTrap;

/// Trap-laser relative intensity noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Two-sided spectral density (ξ²)₀ of the fractional intensity
    /// fluctuations at low frequency, 1/Hz. Zero disables the channel.
    pub rin_psd: f64,
}

/// Incoherent photon-scattering channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringModel {
    /// Free-atom total cross section σ0, m².
    pub sigma0: f64,
    /// Photon flux at the trap focus, 1/(m²·s).
    pub photon_flux: f64,
    /// Trap-laser wavevector magnitude |k_L|, rad/m. The beam propagates
    /// along +z with linear polarization along x; the scattered photon
    /// keeps |k| = |k_L| (elastic kinematics).
    pub k_laser: f64,
    /// Gauss-Legendre nodes in cosθ.
    pub n_theta: usize,
    /// Uniform nodes in φ.
    pub n_phi: usize,
    /// Per-axis |Δv| cutoff for kept in-scattering entries.
    pub dv_max: u32,
}

impl ScatteringModel {
    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.sigma0 > 0.0) || self.photon_flux < 0.0 || !(self.k_laser > 0.0) {
            return Err(CoreError::config(
                "scattering model needs sigma0 > 0, photon_flux >= 0, k_laser > 0",
            ));
        }
        if self.n_theta < 2 || self.n_phi < 2 {
            return Err(CoreError::config("quadrature needs at least 2 nodes per angle"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    Fluctuation,
    Scattering,
}

impl Channel {
    pub fn tag(self) -> &'static str {
        match self {
            Channel::Fluctuation => "fl",
            Channel::Scattering => "sc",
        }
    }
}

/// Rates of one relaxation channel on a fixed mode space: diagonal out-rates
/// Γ_v plus sparse in-rates Γ_vv' stored as (destination, source, rate)
/// triplets sorted by destination then source.
#[derive(Debug, Clone)]
pub struct ChannelRates {
    pub channel: Channel,
    pub gamma_out: Vec<f64>,
    pub in_dest: Vec<u32>,
    pub in_src: Vec<u32>,
    pub in_rate: Vec<f64>,
}

impl ChannelRates {
    pub fn empty(channel: Channel, dim: usize) -> Self {
        ChannelRates {
            channel,
            gamma_out: vec![0.0; dim],
            in_dest: Vec::new(),
            in_src: Vec::new(),
            in_rate: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma_out.len()
    }

    /// Sum of kept in-rates out of each source, Σ_v Γ_vv'.
    pub fn in_rate_per_source(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (&s, &r) in self.in_src.iter().zip(&self.in_rate) {
            out[s as usize] += r;
        }
        out
    }

    /// Captured fraction Σ_v Γ_vv' / Γ_v' per source (1 when Γ_v' = 0).
    /// Values near 1 mean the kept destination set nearly conserves the
    /// source's out-flow; the balance leaks out of the truncated box.
    pub fn captured_fraction(&self) -> Vec<f64> {
        self.in_rate_per_source()
            .iter()
            .zip(&self.gamma_out)
            .map(|(&inr, &out)| if out > 0.0 { inr / out } else { 1.0 })
            .collect()
    }
}

/// Combined relaxation matrices, channel provenance preserved.
#[derive(Debug, Clone)]
pub struct RateMatrices {
    dim: usize,
    pub channels: Vec<ChannelRates>,
}

impl RateMatrices {
    pub fn empty(dim: usize) -> Self {
        RateMatrices { dim, channels: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.channels.iter().all(|c| {
            c.in_rate.is_empty() && c.gamma_out.iter().all(|&g| g == 0.0)
        })
    }

    /// Total out-rate per mode, summed over channels.
    pub fn total_out(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for ch in &self.channels {
            for (o, g) in out.iter_mut().zip(&ch.gamma_out) {
                *o += g;
            }
        }
        out
    }

    /// Channel-merged in-rate triplets, sorted by (dest, src).
    pub fn merged_in_rates(&self) -> (Vec<u32>, Vec<u32>, Vec<f64>) {
        let mut map: std::collections::BTreeMap<(u32, u32), f64> = std::collections::BTreeMap::new();
        for ch in &self.channels {
            for k in 0..ch.in_rate.len() {
                *map.entry((ch.in_dest[k], ch.in_src[k])).or_insert(0.0) += ch.in_rate[k];
            }
        }
        let mut dest = Vec::with_capacity(map.len());
        let mut src = Vec::with_capacity(map.len());
        let mut rate = Vec::with_capacity(map.len());
        for ((d, s), r) in map {
            dest.push(d);
            src.push(s);
            rate.push(r);
        }
        (dest, src, rate)
    }

    pub fn channel(&self, which: Channel) -> Option<&ChannelRates> {
        self.channels.iter().find(|c| c.channel == which)
    }

    /// Sparse triplet CSV (dest_index, src_index, rate, channel) for audit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dest_index,src_index,rate_per_s,channel\n");
        for ch in &self.channels {
            for k in 0..ch.in_rate.len() {
                out.push_str(&format!(
                    "{},{},{:.12e},{}\n",
                    ch.in_dest[k],
                    ch.in_src[k],
                    ch.in_rate[k],
                    ch.channel.tag()
                ));
            }
        }
        out
    }
}

/// Elementwise sum of per-channel rates; provenance kept for reporting.
pub fn assemble_rates(channels: Vec<ChannelRates>) -> Result<RateMatrices, CoreError> {
    let dim = channels.first().map(|c| c.dim()).unwrap_or(0);
    for ch in &channels {
        if ch.dim() != dim {
            return Err(CoreError::DimensionMismatch(
                "rate channels built on different mode spaces".into(),
            ));
        }
    }
    Ok(RateMatrices { dim, channels })
}

/// Free-atom scattering cross section of the two-level reduction:
/// σ0 = d0⁴ ω_L⁴ / (6π ε0² ħ² c⁴ (ω_L − ω0)²).
pub fn total_cross_section(
    omega_laser: f64,
    omega_atom: f64,
    d0: f64,
    constants: &PhysicalConstants,
) -> f64 {
    let det = omega_laser - omega_atom;
    let d0sq = d0 * d0;
    d0sq * d0sq * omega_laser.powi(4)
        / (6.0 * std::f64::consts::PI
            * constants.eps0.powi(2)
            * constants.hbar.powi(2)
            * constants.c.powi(4)
            * det
            * det)
}

/// Photon flux at the focus implied by the trap depth:
/// Ī = 2 ε0 c |U0| |Δ_L| / (d0² ω_L).
///
/// Consistency with the cross section is pinned by the exact identity
/// σ0·Ī·ħ|Δ_L|/|U0| = Γ_nat(ω_L), which ties both back to the measured
/// linewidth.
pub fn photon_flux_from_depth(derived: &DerivedTrap, constants: &PhysicalConstants) -> f64 {
    2.0 * constants.eps0 * constants.c * derived.depth * derived.detuning.abs()
        / (derived.d0 * derived.d0 * derived.omega_laser)
}

/// Intensity-fluctuation rates.
///
/// Out-rate: Γ_v = (ξ²)₀/ħ² · [⟨v|U0²|v⟩ − ⟨v|U0|v⟩²]; the variance
/// factorizes over axes, with per-axis value (ħω/4)²[(n+1)(n+2) + n(n−1)].
/// In-rates: Γ_vv' = (ξ²)₀/ħ² · |⟨v|U0|v'⟩|², nonzero only for Δn = ±2 on
/// exactly one axis. Constant offsets of the potential drop out of both.
pub fn fluct_rates(
    modespace: &ModeSpace,
    constants: &PhysicalConstants,
    derived: &DerivedTrap,
    noise: &NoiseModel,
) -> Result<ChannelRates, CoreError> {
    if noise.rin_psd < 0.0 {
        return Err(CoreError::config("rin_psd must be >= 0"));
    }
    let n = modespace.len();
    let mut rates = ChannelRates::empty(Channel::Fluctuation, n);
    if noise.rin_psd == 0.0 {
        return Ok(rates);
    }
    let xi2 = noise.rin_psd;
    let hbar = constants.hbar;
    let dims = modespace.dims();
    let omegas = [derived.omega_mean[0], derived.omega_mean[1], derived.omega_mean[2]];

    for (i, m) in modespace.modes().iter().enumerate() {
        let v = m.as_array();
        let mut var = 0.0;
        for ax in 0..3 {
            let nf = v[ax] as f64;
            let q = hbar * omegas[ax] / 4.0;
            var += q * q * ((nf + 1.0) * (nf + 2.0) + nf * (nf - 1.0));
        }
        rates.gamma_out[i] = xi2 * var / (hbar * hbar);

        for ax in 0..3 {
            for step in [-2i64, 2] {
                let dest_n = v[ax] as i64 + step;
                if dest_n < 0 || dest_n >= dims[ax] as i64 {
                    continue;
                }
                let mut dv = v;
                dv[ax] = dest_n as u32;
                let j = modespace
                    .index_of(crate::modes::Mode { vx: dv[0], vy: dv[1], vz: dv[2] })
                    .expect("destination inside box");
                let k = v[ax].min(dest_n as u32) as f64;
                let elem = hbar * omegas[ax] / 4.0 * ((k + 1.0) * (k + 2.0)).sqrt();
                rates.in_dest.push(j as u32);
                rates.in_src.push(i as u32);
                rates.in_rate.push(xi2 * elem * elem / (hbar * hbar));
            }
        }
    }
    sort_triplets(&mut rates);
    Ok(rates)
}

fn sort_triplets(rates: &mut ChannelRates) {
    let mut idx: Vec<usize> = (0..rates.in_rate.len()).collect();
    idx.sort_by_key(|&k| (rates.in_dest[k], rates.in_src[k]));
    rates.in_dest = idx.iter().map(|&k| rates.in_dest[k]).collect();
    rates.in_src = idx.iter().map(|&k| rates.in_src[k]).collect();
    rates.in_rate = idx.iter().map(|&k| rates.in_rate[k]).collect();
}

/// Per-axis squared displacement amplitudes |⟨n|e^{iqx}|n'⟩|² at one
/// direction node, tabulated for |Δn| ≤ dv_max.
struct AxisTable {
    levels: usize,
    band: usize,
    // [n][n' − n + band], zero-padded outside the box
    probs: Vec<f64>,
}

impl AxisTable {
    fn build(levels: usize, band: usize, eta: f64) -> Self {
        let width = 2 * band + 1;
        let mut probs = vec![0.0; levels * width];
        for n in 0..levels {
            for d in 0..width {
                let m = n as i64 + d as i64 - band as i64;
                if m < 0 || m >= levels as i64 {
                    continue;
                }
                probs[n * width + d] = debye_waller_1d(n as u32, m as u32, eta).norm_sqr();
            }
        }
        AxisTable { levels, band, probs }
    }

    #[inline]
    fn get(&self, n: usize, m: i64) -> f64 {
        let d = m - n as i64 + self.band as i64;
        debug_assert!(m >= 0 && (m as usize) < self.levels);
        self.probs[n * (2 * self.band + 1) + d as usize]
    }

    #[inline]
    fn diag(&self, n: usize) -> f64 {
        self.probs[n * (2 * self.band + 1) + self.band]
    }
}

/// Per-node banded amplitude tables for all three axes.
fn node_tables(
    modespace: &ModeSpace,
    derived: &DerivedTrap,
    model: &ScatteringModel,
    grid: &[AngularNode],
    band: usize,
) -> Vec<[AxisTable; 3]> {
    let dims = modespace.dims();
    let k = model.k_laser;
    grid.par_iter()
        .map(|node| {
            let q = momentum_transfer(k, node);
            [
                AxisTable::build(dims[0], band, q[0] * x_eff(derived, 0)),
                AxisTable::build(dims[1], band, q[1] * x_eff(derived, 1)),
                AxisTable::build(dims[2], band, q[2] * x_eff(derived, 2)),
            ]
        })
        .collect()
}

/// Angle-averaged elastic-peak survival ⟨|⟨v|e^{-i(k−k_L)·r}|v⟩|²⟩ for every
/// mode, from precomputed node tables.
fn averaged_diagonal(
    modespace: &ModeSpace,
    grid: &[AngularNode],
    tables: &[[AxisTable; 3]],
) -> Vec<f64> {
    modespace
        .modes()
        .par_iter()
        .map(|m| {
            let v = m.as_array();
            grid.iter()
                .zip(tables)
                .map(|(node, t)| {
                    node.weight
                        * t[0].diag(v[0] as usize)
                        * t[1].diag(v[1] as usize)
                        * t[2].diag(v[2] as usize)
                })
                .sum()
        })
        .collect()
}

#[inline]
fn momentum_transfer(k: f64, node: &AngularNode) -> [f64; 3] {
    [
        -k * node.sin_theta * node.phi.cos(),
        -k * node.sin_theta * node.phi.sin(),
        k * (1.0 - node.cos_theta),
    ]
}

/// Effective zero-point length per axis. An η override rescales the
/// wavevector-times-length product while leaving the physical x_zpf alone,
/// so overriding η only touches the scattering kinematics.
#[inline]
fn x_eff(derived: &DerivedTrap, ax: usize) -> f64 {
    let k_l = derived.omega_laser / crate::constants::C_LIGHT;
    derived.eta[ax] / k_l
}

/// Photon-scattering rates by product quadrature over scattering directions.
///
/// Out-rate: Γ_v = Ī σ0 [1 − ⟨|⟨v|e^{-i(k−k_L)·r}|v⟩|²⟩].
/// In-rates:  Γ_vv' = Ī σ0 ⟨|⟨v|e^{-i(k−k_L)·r}|v'⟩|²⟩ for v ≠ v', kept for
/// per-axis |Δv| ≤ dv_max. The three-dimensional amplitude factorizes into
/// the 1-D displacement amplitudes at q = (−k sinθ cosφ, −k sinθ sinφ,
/// k(1−cosθ)).
///
/// The production grid is checked against a doubled grid on the elastic
/// diagonal; disagreement beyond 1e-6 of the total rate is an error.
pub fn scatter_rates(
    modespace: &ModeSpace,
    derived: &DerivedTrap,
    model: &ScatteringModel,
) -> Result<ChannelRates, CoreError> {
    model.validate()?;
    let n = modespace.len();
    let mut rates = ChannelRates::empty(Channel::Scattering, n);
    let total_rate = model.photon_flux * model.sigma0;
    if total_rate == 0.0 {
        return Ok(rates);
    }

    let band = model.dv_max as usize;
    let grid = angular_grid(model.n_theta, model.n_phi);
    let tables = node_tables(modespace, derived, model, &grid, band);
    let diag = averaged_diagonal(modespace, &grid, &tables);

    // convergence canary: elastic averages on a doubled grid
    let grid2 = angular_grid(2 * model.n_theta, 2 * model.n_phi);
    let tables2 = node_tables(modespace, derived, model, &grid2, 0);
    let diag2 = averaged_diagonal(modespace, &grid2, &tables2);
    for i in 0..n {
        let dev = (diag[i] - diag2[i]).abs();
        if dev > 1e-6 {
            return Err(CoreError::QuadratureNonConvergence(format!(
                "elastic average for mode {} differs by {:.3e} between {}x{} and doubled grids",
                i, dev, model.n_theta, model.n_phi
            )));
        }
    }
    drop(tables2);

    for (g, &d) in rates.gamma_out.iter_mut().zip(&diag) {
        *g = total_rate * (1.0 - d);
    }

    // destination stencil: per-axis |Δn| ≤ dv_max, clipped at the box
    let dims = modespace.dims();

    // accumulate per-source rows in parallel, then flatten in source order
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|src| {
            let v = modespace.mode(src).as_array();
            let lo = |ax: usize| (v[ax] as i64 - band as i64).max(0);
            let hi = |ax: usize| (v[ax] as i64 + band as i64).min(dims[ax] as i64 - 1);
            let mut row: Vec<(u32, f64)> = Vec::new();
            for ux in lo(0)..=hi(0) {
                for uy in lo(1)..=hi(1) {
                    for uz in lo(2)..=hi(2) {
                        if ux == v[0] as i64 && uy == v[1] as i64 && uz == v[2] as i64 {
                            continue;
                        }
                        let dest = (ux as usize * dims[1] + uy as usize) * dims[2] + uz as usize;
                        row.push((dest as u32, 0.0));
                    }
                }
            }
            for (node, t) in grid.iter().zip(&tables) {
                let w = node.weight;
                for (dest, acc) in row.iter_mut() {
                    let d = *dest as usize;
                    let uz = d % dims[2];
                    let uy = (d / dims[2]) % dims[1];
                    let ux = d / (dims[1] * dims[2]);
                    *acc += w
                        * t[0].get(v[0] as usize, ux as i64)
                        * t[1].get(v[1] as usize, uy as i64)
                        * t[2].get(v[2] as usize, uz as i64);
                }
            }
            row
        })
        .collect();

    for (src, row) in rows.into_iter().enumerate() {
        for (dest, acc) in row {
            rates.in_dest.push(dest);
            rates.in_src.push(src as u32);
            rates.in_rate.push(total_rate * acc);
        }
    }
    sort_triplets(&mut rates);
    Ok(rates)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::{enumerate_modes, Mode};
    use crate::trap::test_fixtures::reference_config;
    use crate::trap::{derive_trap, TrapConfig};
    use crate::units;
    use approx::assert_relative_eq;

    fn setup(vmax: [u32; 3]) -> (PhysicalConstants, TrapConfig, DerivedTrap, ModeSpace) {
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = Some(vmax);
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        (c, cfg, d, ms)
    }

    fn scattering_model(d: &DerivedTrap, c: &PhysicalConstants, dv_max: u32) -> ScatteringModel {
        ScatteringModel {
            sigma0: total_cross_section(d.omega_laser, d.omega_laser - d.detuning, d.d0, c),
            photon_flux: photon_flux_from_depth(d, c),
            k_laser: d.omega_laser / c.c,
            n_theta: 24,
            n_phi: 48,
            dv_max,
        }
    }

    #[test]
    fn cross_section_scaling_and_golden() {
        let c = PhysicalConstants::rb87();
        let d = derive_trap(&c, &reference_config()).unwrap();
        let w0 = d.omega_laser - d.detuning;
        let s1 = total_cross_section(d.omega_laser, w0, d.d0, &c);
        // frozen from direct evaluation at 852 nm with the linewidth-derived d0
        assert_relative_eq!(s1, 2.091795e-27, max_relative = 1e-5);
        // doubling the detuning quarters the cross section (at fixed ω_L)
        let s2 = total_cross_section(d.omega_laser, d.omega_laser - 2.0 * d.detuning, d.d0, &c);
        assert_relative_eq!(s2, s1 / 4.0, max_relative = 1e-12);
    }

    #[test]
    fn flux_identity_ties_to_natural_rate() {
        // σ0·Ī·ħ|Δ|/|U0| must equal Γ_nat(ω_L): two independent routes
        let c = PhysicalConstants::rb87();
        for depth_uk in [300.0, 1000.0, 5000.0] {
            let mut cfg = reference_config();
            cfg.depth = units::uk_to_joule(depth_uk);
            let d = derive_trap(&c, &cfg).unwrap();
            let sigma0 = total_cross_section(d.omega_laser, d.omega_laser - d.detuning, d.d0, &c);
            let flux = photon_flux_from_depth(&d, &c);
            let lhs = sigma0 * flux * c.hbar * d.detuning.abs() / d.depth;
            let rhs = c.natural_rate_at(d.omega_laser);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn flux_scales_linearly_with_depth() {
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.depth = units::uk_to_joule(1000.0);
        let d1 = derive_trap(&c, &cfg).unwrap();
        cfg.depth = units::uk_to_joule(2000.0);
        let d2 = derive_trap(&c, &cfg).unwrap();
        let f1 = photon_flux_from_depth(&d1, &c);
        let f2 = photon_flux_from_depth(&d2, &c);
        assert_relative_eq!(f2, 2.0 * f1, max_relative = 1e-12);
        // total scattering rate at 1 mK: frozen oracle Γ_nat|U0|/(ħ|Δ|)
        let sigma0 = total_cross_section(d1.omega_laser, d1.omega_laser - d1.detuning, d1.d0, &c);
        assert_relative_eq!(f1 * sigma0, 20.3417, max_relative = 1e-4);
    }

    #[test]
    fn fluct_rates_zero_noise() {
        let (c, _, d, ms) = setup([2, 2, 2]);
        let r = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: 0.0 }).unwrap();
        assert!(r.gamma_out.iter().all(|&g| g == 0.0));
        assert!(r.in_rate.is_empty());
    }

    #[test]
    fn fluct_ground_state_rate_matches_dense_oracle() {
        // 1-D brute force: U = ½mω²X² from a dense 40-level ladder matrix;
        // Γ_0 = (ξ²)₀[⟨0|U²|0⟩−⟨0|U|0⟩²]/ħ² = (ξ²)₀ ω²/8
        let (c, _, d, _) = setup([0, 0, 0]);
        let mut cfg = reference_config();
        cfg.vmax = Some([0, 0, 39]);
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let xi2 = 1e-13;
        let r = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: xi2 }).unwrap();

        let nlev = 40;
        let omega = d.omega_mean[2];
        let xz = d.x_zpf[2];
        let mut x = vec![vec![0.0f64; nlev]; nlev];
        for k in 0..nlev - 1 {
            x[k][k + 1] = xz * ((k + 1) as f64).sqrt();
            x[k + 1][k] = x[k][k + 1];
        }
        let mut u = vec![vec![0.0f64; nlev]; nlev];
        let pref = 0.5 * c.atom_mass * omega * omega;
        // include an arbitrary constant offset: it must drop out
        let offset = -units::uk_to_joule(300.0);
        for i in 0..nlev {
            for j in 0..nlev {
                u[i][j] = pref * (0..nlev).map(|k| x[i][k] * x[k][j]).sum::<f64>();
            }
            u[i][i] += offset;
        }
        let u2_00: f64 = (0..nlev).map(|k| u[0][k] * u[k][0]).sum();
        let var = u2_00 - u[0][0] * u[0][0];
        let expect = xi2 * var / (c.hbar * c.hbar);
        let i0 = ms.index_of(Mode { vx: 0, vy: 0, vz: 0 }).unwrap();
        // the x and y ground-state variances add on top of the z part
        let hw = c.hbar * d.omega_mean[0];
        let perp = 2.0 * xi2 * (hw * hw / 8.0) / (c.hbar * c.hbar);
        assert_relative_eq!(r.gamma_out[i0], expect + perp, max_relative = 1e-10);
        assert_relative_eq!(
            expect,
            xi2 * omega * omega / 8.0,
            max_relative = 1e-10
        );
    }

    #[test]
    fn fluct_source_conservation_and_symmetry() {
        // Σ_v Γ_vv' = Γ_v' exactly for interior sources on a 1-D 30-level box
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = Some([0, 0, 29]);
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let r = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: 1e-13 }).unwrap();
        let per_source = r.in_rate_per_source();
        for src in 0..ms.len() {
            let v = ms.mode(src);
            // drop the transverse ground-state variance, which has no
            // destination on this 1-D box
            let hw = c.hbar * d.omega_mean[0];
            let perp = 2.0 * 1e-13 * (hw * hw / 8.0) / (c.hbar * c.hbar);
            if v.vz + 2 < 30 {
                assert_relative_eq!(
                    per_source[src],
                    r.gamma_out[src] - perp,
                    max_relative = 1e-10
                );
            }
        }
        // detailed symmetry Γ_vv' = Γ_v'v
        let mut map = std::collections::HashMap::new();
        for k in 0..r.in_rate.len() {
            map.insert((r.in_dest[k], r.in_src[k]), r.in_rate[k]);
        }
        for (&(d_, s_), &v) in &map {
            assert_relative_eq!(v, map[&(s_, d_)], max_relative = 1e-12);
        }
    }

    #[test]
    fn scatter_lamb_dicke_limit() {
        // η → 0: out-rates vanish, in-rates vanish, even though Īσ0 > 0
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = Some([2, 2, 2]);
        cfg.eta_override = Some([1e-6, 1e-6, 1e-6]);
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let model = scattering_model(&d, &c, 2);
        assert!(model.photon_flux * model.sigma0 > 1.0);
        let r = scatter_rates(&ms, &d, &model).unwrap();
        for &g in &r.gamma_out {
            assert!(g.abs() < 1e-10 * model.photon_flux * model.sigma0);
        }
        for &v in &r.in_rate {
            assert!(v.abs() < 1e-10 * model.photon_flux * model.sigma0);
        }
    }

    #[test]
    fn scatter_ground_out_rate_positive_and_monotone() {
        let (c, _, d, ms) = setup([10, 0, 0]);
        let model = scattering_model(&d, &c, 4);
        let r = scatter_rates(&ms, &d, &model).unwrap();
        let mut prev = -1.0;
        for vx in 0..=10u32 {
            let i = ms.index_of(Mode { vx, vy: 0, vz: 0 }).unwrap();
            assert!(r.gamma_out[i] > prev, "out-rate not nondecreasing at vx={vx}");
            prev = r.gamma_out[i];
        }
        assert!(r.gamma_out[0] > 0.0);
    }

    #[test]
    fn scatter_completeness_from_ground_mode() {
        // total in-rate out of source (0,0,0) must reproduce its out-rate at
        // dv_max = 6 on a generous destination box
        let c = PhysicalConstants::rb87();
        let mut cfg = reference_config();
        cfg.vmax = Some([6, 6, 6]);
        // keep η ≤ 0.3 on every axis for the capture bound
        cfg.eta_override = Some([0.21, 0.21, 0.3]);
        let d = derive_trap(&c, &cfg).unwrap();
        let ms = enumerate_modes(&c, &cfg, &d).unwrap();
        let model = scattering_model(&d, &c, 6);
        let r = scatter_rates(&ms, &d, &model).unwrap();
        let i0 = ms.index_of(Mode { vx: 0, vy: 0, vz: 0 }).unwrap();
        let total_in: f64 = (0..r.in_rate.len())
            .filter(|&k| r.in_src[k] == i0 as u32)
            .map(|k| r.in_rate[k])
            .sum();
        assert_relative_eq!(total_in, r.gamma_out[i0], max_relative = 1e-4);
    }

    #[test]
    fn scatter_rates_symmetric() {
        let (c, _, d, ms) = setup([3, 3, 3]);
        let model = scattering_model(&d, &c, 3);
        let r = scatter_rates(&ms, &d, &model).unwrap();
        let mut map = std::collections::HashMap::new();
        for k in 0..r.in_rate.len() {
            map.insert((r.in_dest[k], r.in_src[k]), r.in_rate[k]);
        }
        for (&(d_, s_), &v) in &map {
            let sym = map[&(s_, d_)];
            assert_relative_eq!(v, sym, max_relative = 1e-10);
        }
    }

    #[test]
    fn assemble_sums_channels() {
        let (c, _, d, ms) = setup([2, 2, 4]);
        let fl = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: 1e-13 }).unwrap();
        let sc = scatter_rates(&ms, &d, &scattering_model(&d, &c, 3)).unwrap();
        let fl_out = fl.gamma_out.clone();
        let sc_out = sc.gamma_out.clone();
        let all = assemble_rates(vec![fl, sc]).unwrap();
        let tot = all.total_out();
        for i in 0..ms.len() {
            assert_relative_eq!(tot[i], fl_out[i] + sc_out[i], max_relative = 1e-14);
        }
        // zeroing one channel leaves the other
        let fl2 = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: 0.0 }).unwrap();
        let sc2 = scatter_rates(&ms, &d, &scattering_model(&d, &c, 3)).unwrap();
        let only_sc = assemble_rates(vec![fl2, sc2]).unwrap();
        for i in 0..ms.len() {
            assert_relative_eq!(only_sc.total_out()[i], sc_out[i], max_relative = 1e-14);
        }
    }

    #[test]
    fn per_channel_ground_rate_grows_with_depth() {
        let c = PhysicalConstants::rb87();
        let mut prev_sc = 0.0;
        let mut prev_fl = 0.0;
        for depth_uk in [500.0, 1000.0, 5000.0] {
            let mut cfg = reference_config();
            let scale = (depth_uk / 300.0f64).sqrt();
            cfg.depth = units::uk_to_joule(depth_uk);
            cfg.omega_perp = Some(units::khz_to_angular(72.0) * scale);
            cfg.omega_par = Some(units::khz_to_angular(9.6) * scale);
            cfg.vmax = Some([0, 0, 0]);
            let d = derive_trap(&c, &cfg).unwrap();
            let ms = enumerate_modes(&c, &cfg, &d).unwrap();
            let fl = fluct_rates(&ms, &c, &d, &NoiseModel { rin_psd: 1e-13 }).unwrap();
            let sc = scatter_rates(&ms, &d, &scattering_model(&d, &c, 2)).unwrap();
            assert!(sc.gamma_out[0] > prev_sc);
            assert!(fl.gamma_out[0] > prev_fl);
            prev_sc = sc.gamma_out[0];
            prev_fl = fl.gamma_out[0];
        }
    }
}
