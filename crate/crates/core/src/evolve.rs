//! Free evolution under the reduced master equation, protocol execution,
//! and the closed-form dephasing oracle.
//!
//! In the slow frame the kept density-matrix elements obey, per mode v,
//!
//! ```text
//! d/dt ρ_ba,v = −Γ_v ρ_ba,v + Σ'_{v'≠v} e^{+i δω_vv' t} Γ_vv' ρ_ba,v'
//! d/dt ρ_ab,v = −Γ_v ρ_ab,v + Σ'_{v'≠v} e^{−i δω_vv' t} Γ_vv' ρ_ab,v'
//! d/dt ρ_mm,v = −Γ_v ρ_mm,v + Σ'_{v'≠v} Γ_vv' ρ_mm,v'     (m = a, b)
//! ```
//!
//! with δω_vv' = δω_v − δω_v' and absolute time t in the oscillatory
//! factors. The system is linear with constant rates, so a fixed-step
//! classical RK4 with an a-priori step bound integrates it reproducibly.

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::CoreError;
use crate::modes::ModeSpace;
use crate::pulse::{apply_pulse, Event, Protocol, PulseSpec};
use crate::rates::RateMatrices;
use crate::state::QubitVibState;

/// Fixed-step integration control.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Step bound h ≤ factor/max(Γ) and factor/max|δω_vv'|.
    pub factor: f64,
    /// Hard cap on steps per free-evolution span.
    pub max_steps: u64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl { factor: 0.05, max_steps: 50_000_000 }
    }
}

/// Observable time series of one run plus run metadata.
#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_b: Vec<f64>,
    pub coh_aggregate: Vec<f64>,
    pub coh_total: Vec<f64>,
    pub metadata: Vec<(String, String)>,
}

impl TimeSeries {
    fn push_sample(&mut self, t: f64, state: &QubitVibState) {
        let (pa, pb) = state.populations();
        let (agg, tot) = state.coherence_magnitude();
        self.times.push(t);
        self.p_a.push(pa);
        self.p_b.push(pb);
        self.coh_aggregate.push(agg);
        self.coh_total.push(tot);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with metadata as leading `# key=value` comment lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str("time_s,P_a,P_b,coh_aggregate,coh_total\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.times[i], self.p_a[i], self.p_b[i], self.coh_aggregate[i], self.coh_total[i]
            ));
        }
        out
    }
}

struct Workspace {
    k: [Vec<C64>; 4],
    stage: Vec<C64>,
}

/// One array's RHS: out[i] = −Γ_i y_i + Σ entries rate·phase·y_src.
#[inline]
fn rhs_into(
    gamma: &[f64],
    dest: &[u32],
    src: &[u32],
    rate: &[f64],
    phase: Option<&[C64]>,
    conj_phase: bool,
    y: &[C64],
    out: &mut [C64],
) {
    for i in 0..y.len() {
        out[i] = -gamma[i] * y[i];
    }
    match phase {
        Some(ph) => {
            if conj_phase {
                for e in 0..rate.len() {
                    out[dest[e] as usize] += ph[e].conj() * rate[e] * y[src[e] as usize];
                }
            } else {
                for e in 0..rate.len() {
                    out[dest[e] as usize] += ph[e] * rate[e] * y[src[e] as usize];
                }
            }
        }
        None => {
            for e in 0..rate.len() {
                out[dest[e] as usize] += rate[e] * y[src[e] as usize];
            }
        }
    }
}

/// Advance the state through `duration` of pulse-free evolution.
///
/// Step bound: h ≤ min(factor/max Γ_v, factor/max|δω_vv'|, duration/4),
/// with the oscillatory factors advanced by per-entry phase rotators so the
/// integration stays trigonometry-free in the hot loop. With all rates zero
/// the slow-frame equations are identically zero and only the clock moves.
pub fn free_evolve(
    state: &mut QubitVibState,
    modespace: &ModeSpace,
    rates: &RateMatrices,
    duration: f64,
    ctrl: &StepControl,
) -> Result<(), CoreError> {
    if duration < 0.0 {
        return Err(CoreError::config("free evolution duration must be >= 0"));
    }
    if modespace.len() != state.n_modes() {
        return Err(CoreError::DimensionMismatch(format!(
            "state has {} blocks, mode space {}",
            state.n_modes(),
            modespace.len()
        )));
    }
    let t0 = state.time;
    if duration == 0.0 || rates.is_zero() {
        state.time = t0 + duration;
        return Ok(());
    }
    if rates.dim() != state.n_modes() {
        return Err(CoreError::DimensionMismatch(format!(
            "rates built for {} modes, state has {}",
            rates.dim(),
            state.n_modes()
        )));
    }

    let gamma = rates.total_out();
    let (dest, src, rate) = rates.merged_in_rates();
    let dw = modespace.delta_omega();
    let pair_dw: Vec<f64> = dest
        .iter()
        .zip(&src)
        .map(|(&d, &s)| dw[d as usize] - dw[s as usize])
        .collect();

    let max_gamma = gamma.iter().cloned().fold(0.0f64, f64::max);
    let max_dw = pair_dw.iter().map(|x| x.abs()).fold(0.0f64, f64::max);
    let mut h_bound = duration / 4.0;
    if max_gamma > 0.0 {
        h_bound = h_bound.min(ctrl.factor / max_gamma);
    }
    if max_dw > 0.0 {
        h_bound = h_bound.min(ctrl.factor / max_dw);
    }
    let n_steps = (duration / h_bound).ceil().max(1.0) as u64;
    if n_steps > ctrl.max_steps {
        return Err(CoreError::StepControlInfeasible { needed: n_steps, cap: ctrl.max_steps });
    }
    let h = duration / n_steps as f64;

    // phase rotators: e^{iδω t} advanced in half-step increments
    let mut phase: Vec<C64> = pair_dw.iter().map(|&w| C64::from_polar(1.0, w * t0)).collect();
    let rot: Vec<C64> = pair_dw.iter().map(|&w| C64::from_polar(1.0, w * h / 2.0)).collect();
    let mut ph_half = vec![C64::new(0.0, 0.0); phase.len()];
    let mut ph_full = vec![C64::new(0.0, 0.0); phase.len()];

    let n = state.n_modes();
    let mut ws: [Workspace; 4] = std::array::from_fn(|_| Workspace {
        k: std::array::from_fn(|_| vec![C64::new(0.0, 0.0); n]),
        stage: vec![C64::new(0.0, 0.0); n],
    });

    for step in 0..n_steps {
        for e in 0..phase.len() {
            ph_half[e] = phase[e] * rot[e];
            ph_full[e] = ph_half[e] * rot[e];
        }
        // arrays in fixed order: ba (phase +), ab (phase −), aa, bb
        {
            let fields: [(&Vec<C64>, Option<&[C64]>, bool); 4] = [
                (&state.rho_ba, Some(&phase), false),
                (&state.rho_ab, Some(&phase), true),
                (&state.rho_aa, None, false),
                (&state.rho_bb, None, false),
            ];
            // stage 1 at t, stages 2-3 at t + h/2, stage 4 at t + h
            for (f, (y0, _, conj)) in fields.iter().enumerate() {
                let ph_of = |stage: usize| -> Option<&[C64]> {
                    match fields[f].1 {
                        None => None,
                        Some(_) => Some(match stage {
                            0 => phase.as_slice(),
                            1 | 2 => ph_half.as_slice(),
                            _ => ph_full.as_slice(),
                        }),
                    }
                };
                let w = &mut ws[f];
                let y = y0.as_slice();
                rhs_into(&gamma, &dest, &src, &rate, ph_of(0), *conj, y, &mut w.k[0]);
                for i in 0..n {
                    w.stage[i] = y[i] + 0.5 * h * w.k[0][i];
                }
                let stage1 = w.stage.clone();
                rhs_into(&gamma, &dest, &src, &rate, ph_of(1), *conj, &stage1, &mut w.k[1]);
                for i in 0..n {
                    w.stage[i] = y[i] + 0.5 * h * w.k[1][i];
                }
                let stage2 = w.stage.clone();
                rhs_into(&gamma, &dest, &src, &rate, ph_of(2), *conj, &stage2, &mut w.k[2]);
                for i in 0..n {
                    w.stage[i] = y[i] + h * w.k[2][i];
                }
                let stage3 = w.stage.clone();
                rhs_into(&gamma, &dest, &src, &rate, ph_of(3), *conj, &stage3, &mut w.k[3]);
            }
        }
        let sixth = h / 6.0;
        for i in 0..n {
            state.rho_ba[i] +=
                sixth * (ws[0].k[0][i] + 2.0 * ws[0].k[1][i] + 2.0 * ws[0].k[2][i] + ws[0].k[3][i]);
            state.rho_ab[i] +=
                sixth * (ws[1].k[0][i] + 2.0 * ws[1].k[1][i] + 2.0 * ws[1].k[2][i] + ws[1].k[3][i]);
            state.rho_aa[i] +=
                sixth * (ws[2].k[0][i] + 2.0 * ws[2].k[1][i] + 2.0 * ws[2].k[2][i] + ws[2].k[3][i]);
            state.rho_bb[i] +=
                sixth * (ws[3].k[0][i] + 2.0 * ws[3].k[1][i] + 2.0 * ws[3].k[2][i] + ws[3].k[3][i]);
        }
        for e in 0..phase.len() {
            phase[e] = ph_full[e];
        }
        // keep the rotators on the unit circle against rounding drift
        if step % 4096 == 4095 {
            for p in phase.iter_mut() {
                *p /= p.norm();
            }
        }
    }
    state.time = t0 + duration;
    Ok(())
}

/// Execute a protocol, sampling observables at the requested cadence.
///
/// Pulses and gaps alternate on a single time line. A positive
/// `sample_every` additionally samples inside gaps and inside pulses (the
/// pulse is split exactly at sample boundaries; composition of the block
/// propagator is exact). Samples at event boundaries are always taken.
pub fn run_protocol(
    protocol: &Protocol,
    initial: &QubitVibState,
    modespace: &ModeSpace,
    rates: &RateMatrices,
    omega_hpf: f64,
    ctrl: &StepControl,
    sample_every: Option<f64>,
) -> Result<TimeSeries, CoreError> {
    protocol.validate()?;
    let mut state = initial.clone();
    let mut series = TimeSeries::default();
    series.push_sample(state.time, &state);

    for event in &protocol.events {
        match event {
            Event::Pulse(p) => {
                let chunks = match sample_every {
                    Some(dt) if p.duration > dt => (p.duration / dt).ceil() as usize,
                    _ => 1,
                };
                let tau = p.duration / chunks as f64;
                for k in 0..chunks {
                    let sub = PulseSpec {
                        duration: tau,
                        area: p.rabi * tau,
                        start: p.start + k as f64 * tau,
                        ..*p
                    };
                    apply_pulse(&mut state, modespace, &sub, omega_hpf)?;
                    series.push_sample(state.time, &state);
                }
            }
            Event::FreeGap { duration } => {
                let chunks = match sample_every {
                    Some(dt) if *duration > dt => (*duration / dt).ceil() as usize,
                    _ => 1,
                };
                let tau = duration / chunks as f64;
                for _ in 0..chunks {
                    free_evolve(&mut state, modespace, rates, tau, ctrl)?;
                    series.push_sample(state.time, &state);
                }
            }
        }
    }
    Ok(series)
}

/// Pulse realization used by the canned interferometry protocols.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseMode {
    /// Ideal zero-duration rotations.
    Delta,
    /// Rectangular pulses at the given Rabi frequency; durations follow from
    /// the areas.
    Rectangular { rabi: f64 },
}

/// One canned interferometry sequence as a function of the free gap time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceKind {
    /// first pulse (area configurable) — gap t — π/2 closing pulse.
    Ramsey,
    /// π/2 — gap t — π — gap t — π/2.
    Echo,
}

/// Gap-scan specification for Ramsey/echo signals.
#[derive(Debug, Clone)]
pub struct GapScan {
    pub kind: SequenceKind,
    /// Area of the opening pulse, rad (3π/2 reproduces the reference Ramsey
    /// runs; π/2 is the textbook variant).
    pub first_area: f64,
    pub pulse_mode: PulseMode,
    /// Carrier frequency ω, rad/s.
    pub carrier: f64,
    /// Free-gap values to scan, s.
    pub gaps: Vec<f64>,
}

/// Build the concrete event list for one gap value. Gaps are free-evolution
/// durations (pulse end to next pulse start); pulse areas use the common
/// phase φ = 0.
pub fn sequence_events(scan: &GapScan, gap: f64) -> Vec<Event> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let pi = std::f64::consts::PI;
    let mk = |area: f64, start: f64| -> PulseSpec {
        match scan.pulse_mode {
            PulseMode::Delta => PulseSpec::delta(area, 0.0, scan.carrier, start),
            PulseMode::Rectangular { rabi } => {
                PulseSpec::rectangular(rabi, area, 0.0, scan.carrier, start)
            }
        }
    };
    match scan.kind {
        SequenceKind::Ramsey => {
            let p1 = mk(scan.first_area, 0.0);
            let p2 = mk(half_pi, p1.end() + gap);
            vec![Event::Pulse(p1), Event::FreeGap { duration: gap }, Event::Pulse(p2)]
        }
        SequenceKind::Echo => {
            let p1 = mk(scan.first_area, 0.0);
            let p2 = mk(pi, p1.end() + gap);
            let p3 = mk(half_pi, p2.end() + gap);
            vec![
                Event::Pulse(p1),
                Event::FreeGap { duration: gap },
                Event::Pulse(p2),
                Event::FreeGap { duration: gap },
                Event::Pulse(p3),
            ]
        }
    }
}

/// Run a Ramsey/echo gap scan: one row per gap value, re-run from the stored
/// initial state (runs are independent and execute in parallel).
///
/// Row semantics: `times` holds the total free-precession time (t for
/// Ramsey, 2t for echo), `p_a`/`p_b` are the populations after the closing
/// pulse, and the coherence columns are sampled just before the closing
/// pulse (they set the attainable fringe contrast).
pub fn run_gap_scan(
    scan: &GapScan,
    initial: &QubitVibState,
    modespace: &ModeSpace,
    rates: &RateMatrices,
    omega_hpf: f64,
    ctrl: &StepControl,
) -> Result<TimeSeries, CoreError> {
    if scan.gaps.is_empty() {
        return Err(CoreError::config("gap scan needs at least one gap value"));
    }
    let rows: Result<Vec<_>, CoreError> = scan
        .gaps
        .par_iter()
        .map(|&gap| -> Result<_, CoreError> {
            let events = sequence_events(scan, gap);
            let protocol = Protocol { name: "scan".into(), events };
            let n_events = protocol.events.len();
            let mut state = initial.clone();
            let mut pre_close = (0.0, 0.0);
            for (k, event) in protocol.events.iter().enumerate() {
                if k == n_events - 1 {
                    pre_close = state.coherence_magnitude();
                }
                match event {
                    Event::Pulse(p) => apply_pulse(&mut state, modespace, p, omega_hpf)?,
                    Event::FreeGap { duration } => {
                        free_evolve(&mut state, modespace, rates, *duration, ctrl)?
                    }
                }
            }
            let (pa, pb) = state.populations();
            let free_time = match scan.kind {
                SequenceKind::Ramsey => gap,
                SequenceKind::Echo => 2.0 * gap,
            };
            Ok((free_time, pa, pb, pre_close.0, pre_close.1))
        })
        .collect();
    let rows = rows?;
    let mut series = TimeSeries::default();
    for (t, pa, pb, agg, tot) in rows {
        series.times.push(t);
        series.p_a.push(pa);
        series.p_b.push(pb);
        series.coh_aggregate.push(agg);
        series.coh_total.push(tot);
    }
    Ok(series)
}

/// Closed-form Ramsey signal for δ-pulses without dissipation.
///
/// Composing the two rotations with the per-mode slow-frame phase Δ_v·t and
/// tracing against the thermal weights gives
///
/// ```text
/// P_a(t) = 1/2 − sin(A1)/2 · Σ_v p_v cos(Δ_v t),   Δ_v = ω − ω_hpf − δω_v
/// ```
///
/// where A1 is the opening-pulse area and the closing pulse is π/2 at the
/// same phase. This is the independent check the simulated signal is held
/// against; it never touches the propagator or integrator code paths.
pub fn ramsey_dephasing_oracle(
    modespace: &ModeSpace,
    weights: &[f64],
    carrier: f64,
    omega_hpf: f64,
    first_area: f64,
    t: f64,
) -> f64 {
    let offset = carrier - omega_hpf;
    let mut avg = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let detuning = offset - modespace.delta_omega()[i];
        avg += w * (detuning * t).cos();
    }
    0.5 - 0.5 * first_area.sin() * avg
}

/// First time the contrast envelope crosses half its initial value, by
/// linear interpolation between samples; +∞ when it never does.
pub fn coherence_halftime(times: &[f64], contrast: &[f64]) -> f64 {
    if times.is_empty() || contrast.is_empty() {
        return f64::INFINITY;
    }
    let half = contrast[0] / 2.0;
    for i in 1..contrast.len() {
        if contrast[i] <= half {
            let (t0, t1) = (times[i - 1], times[i]);
            let (c0, c1) = (contrast[i - 1], contrast[i]);
            if c1 == c0 {
                return t1;
            }
            return t0 + (half - c0) / (c1 - c0) * (t1 - t0);
        }
    }
    f64::INFINITY
}

/// Deterministic least-squares fit of A·e^{−t/τ}: coarse log-spaced τ grid
/// with the amplitude solved in closed form, then golden-section refinement.
/// Returns (A, τ, max |residual|).
pub fn fit_exponential(times: &[f64], values: &[f64]) -> (f64, f64, f64) {
    assert_eq!(times.len(), values.len());
    let t_max = times.iter().cloned().fold(0.0f64, f64::max).max(1e-12);
    let sse_for = |tau: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&t, &v) in times.iter().zip(values) {
            let e = (-t / tau).exp();
            num += v * e;
            den += e * e;
        }
        let amp = if den > 0.0 { num / den } else { 0.0 };
        let sse: f64 = times
            .iter()
            .zip(values)
            .map(|(&t, &v)| {
                let r = v - amp * (-t / tau).exp();
                r * r
            })
            .sum();
        (sse, amp)
    };

    let mut best = (f64::INFINITY, t_max, 0.0);
    let n_grid = 400;
    for k in 0..n_grid {
        let tau = 1e-3 * t_max * (1e4f64).powf(k as f64 / (n_grid - 1) as f64);
        let (sse, amp) = sse_for(tau);
        if sse < best.0 {
            best = (sse, tau, amp);
        }
    }
    // golden-section refine around the grid optimum (log domain)
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut lo = (best.1 * 0.5).ln();
    let mut hi = (best.1 * 2.0).ln();
    for _ in 0..80 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if sse_for(m1.exp()).0 < sse_for(m2.exp()).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let tau = (0.5 * (lo + hi)).exp();
    let (_, amp) = sse_for(tau);
    let max_resid = times
        .iter()
        .zip(values)
        .map(|(&t, &v)| (v - amp * (-t / tau).exp()).abs())
        .fold(0.0f64, f64::max);
    (amp, tau, max_resid)
}

/// Scan the carrier over a range bracketing ω_hpf and return the frequency
/// maximizing the Rabi-oscillation contrast, defined as max − min of P_b
/// over the first two resonant Rabi periods. Deterministic tie-break toward
/// the lower carrier.
pub fn scan_carrier(
    initial: &QubitVibState,
    modespace: &ModeSpace,
    omega_hpf: f64,
    rabi: f64,
    range: (f64, f64),
    steps: usize,
    ctrl: &StepControl,
) -> Result<f64, CoreError> {
    if steps < 2 || !(range.1 > range.0) {
        return Err(CoreError::config("carrier scan needs an increasing range and >= 2 steps"));
    }
    let duration = 2.0 * std::f64::consts::TAU / rabi;
    let rates = RateMatrices::empty(modespace.len());
    let contrasts: Result<Vec<f64>, CoreError> = (0..steps)
        .into_par_iter()
        .map(|k| {
            let carrier =
                range.0 + (range.1 - range.0) * k as f64 / (steps - 1) as f64;
            let pulse = PulseSpec {
                rabi,
                phase: 0.0,
                carrier,
                duration,
                area: rabi * duration,
                start: 0.0,
            };
            let protocol = Protocol { name: "rabi-scan".into(), events: vec![Event::Pulse(pulse)] };
            let series = run_protocol(
                &protocol,
                initial,
                modespace,
                &rates,
                omega_hpf,
                ctrl,
                Some(duration / 128.0),
            )?;
            let max = series.p_b.iter().cloned().fold(f64::MIN, f64::max);
            let min = series.p_b.iter().cloned().fold(f64::MAX, f64::min);
            Ok(max - min)
        })
        .collect();
    let contrasts = contrasts?;
    let mut best = 0;
    for k in 1..steps {
        if contrasts[k] > contrasts[best] {
            best = k;
        }
    }
    Ok(range.0 + (range.1 - range.0) * best as f64 / (steps - 1) as f64)
}
