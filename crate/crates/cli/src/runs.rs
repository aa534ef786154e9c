//! Command implementations.

use std::fs;
use std::path::Path;

use tweezersim::config::Resolved;
use tweezersim::{
    assemble_rates, coherence_halftime, config::RunConfig, enumerate_modes, fluct_rates, gamma0,
    photon_flux_from_depth, run_gap_scan, run_protocol, scan_carrier, scatter_rates,
    thermal_state, total_cross_section, ChannelRates, Event, GapScan, ModeSpace, Protocol,
    PulseMode, PulseSpec, QubitVibState, RateMatrices, SequenceKind, Spin, StepControl,
    ThermalSpec, TimeSeries,
};

use crate::output::{config_hash, metadata_json, resolve_out_dir, series_svg, write_file};
use crate::{CliError, Common, Sweep};

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(RunConfig::from_toml_str(&text)?)
}

struct Context {
    resolved: Resolved,
    modespace: ModeSpace,
    state: QubitVibState,
    rates: RateMatrices,
    ctrl: StepControl,
}

fn build_context(config: &RunConfig) -> Result<Context, CliError> {
    let resolved = config.resolve()?;
    let modespace = enumerate_modes(&resolved.constants, &resolved.trap, &resolved.derived)?;
    let beta = if resolved.trap.temperature > 0.0 {
        1.0 / (resolved.constants.kb * resolved.trap.temperature)
    } else {
        f64::INFINITY
    };
    let state = thermal_state(&modespace, ThermalSpec { beta, initial_spin: Spin::A })?;

    let mut channels: Vec<ChannelRates> = Vec::new();
    if resolved.noise.rin_psd > 0.0 {
        channels.push(fluct_rates(
            &modespace,
            &resolved.constants,
            &resolved.derived,
            &resolved.noise,
        )?);
    }
    if let Some(model) = &resolved.scattering {
        channels.push(scatter_rates(&modespace, &resolved.derived, model)?);
    }
    let rates = if channels.is_empty() {
        RateMatrices::empty(modespace.len())
    } else {
        assemble_rates(channels)?
    };
    let ctrl = StepControl {
        factor: config.protocol.step_factor,
        max_steps: config.protocol.max_steps,
    };
    Ok(Context { resolved, modespace, state, rates, ctrl })
}

/// Resolve the carrier frequency per the protocol section.
fn resolve_carrier(config: &RunConfig, ctx: &Context) -> Result<f64, CliError> {
    let hpf = ctx.resolved.constants.omega_hpf;
    if let Some(off) = config.protocol.carrier_offset_hz {
        return Ok(hpf + std::f64::consts::TAU * off);
    }
    match config.protocol.carrier.as_str() {
        "bare" => Ok(hpf),
        "shifted" => Ok(hpf + ctx.modespace.delta_omega()[0]),
        "scan" => {
            let span = std::f64::consts::TAU * config.protocol.scan_span_hz;
            let rabi = std::f64::consts::TAU * config.protocol.rabi_khz * 1e3;
            Ok(scan_carrier(
                &ctx.state,
                &ctx.modespace,
                hpf,
                rabi,
                (hpf - span / 2.0, hpf + span / 2.0),
                config.protocol.scan_steps,
                &ctx.ctrl,
            )?)
        }
        other => Err(CliError::Core(tweezersim::CoreError::config(format!(
            "unknown carrier choice `{other}`"
        )))),
    }
}

fn run_metadata(
    config: &RunConfig,
    ctx: &Context,
    kind: &str,
    carrier: f64,
    series: &mut TimeSeries,
) {
    let dims = ctx.modespace.dims();
    let mut meta = vec![
        ("config_hash".to_string(), config_hash(config)),
        ("protocol".to_string(), kind.to_string()),
        ("pulse".to_string(), config.protocol.pulse.clone()),
        (
            "carrier_offset_hz".to_string(),
            format!("{:.6}", (carrier - ctx.resolved.constants.omega_hpf) / std::f64::consts::TAU),
        ),
        ("basis".to_string(), format!("{}x{}x{}", dims[0], dims[1], dims[2])),
        ("n_modes".to_string(), ctx.modespace.len().to_string()),
        (
            "thermal_capture".to_string(),
            format!("{:.6}", ctx.state.captured_weight),
        ),
        ("depth_uk".to_string(), format!("{}", config.trap.depth_uk)),
        ("temperature_uk".to_string(), format!("{}", config.trap.temperature_uk)),
        ("rin_psd_inv_hz".to_string(), format!("{:e}", ctx.resolved.noise.rin_psd)),
        (
            "scattering".to_string(),
            if ctx.resolved.scattering.is_some() { "on".into() } else { "off".into() },
        ),
        ("step_factor".to_string(), format!("{}", config.protocol.step_factor)),
        (
            "time_axis".to_string(),
            "total free-precession time between pulse edges".to_string(),
        ),
    ];
    if config.trap.depth_uk == 300.0 {
        meta.push((
            "depth_note".to_string(),
            "default 300 uK well depth assumed, not an independently measured value".to_string(),
        ));
    }
    for ch in &ctx.rates.channels {
        let worst = ch
            .captured_fraction()
            .iter()
            .cloned()
            .fold(1.0f64, f64::min);
        meta.push((
            format!("captured_outflow_{}", ch.channel.tag()),
            format!("{:.6}", worst),
        ));
    }
    series.metadata = meta;
}

fn emit_series(
    config: &RunConfig,
    args: &Common,
    series: &TimeSeries,
    name: &str,
) -> Result<(), CliError> {
    let dir = resolve_out_dir(&args.out, config);
    let csv = write_file(&dir, &format!("{name}.csv"), &series.to_csv())?;
    println!("wrote {}", csv.display());
    if config.output.metadata {
        let meta = write_file(&dir, &format!("{name}.meta.json"), &metadata_json(config, series))?;
        println!("wrote {}", meta.display());
    }
    if args.plot || config.output.plot {
        let svg = write_file(&dir, &format!("{name}.svg"), &series_svg(series, name))?;
        println!("wrote {}", svg.display());
    }
    Ok(())
}

pub fn cmd_constants(args: &Common) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let ctx = build_context(&config)?;
    let c = &ctx.resolved.constants;
    let d = &ctx.resolved.derived;

    let g0 = gamma0(c);
    let sigma0 = total_cross_section(d.omega_laser, d.omega_laser - d.detuning, d.d0, c);
    let flux = photon_flux_from_depth(d, c);
    let gnat = c.natural_rate_at(d.omega_laser);
    let identity = sigma0 * flux * c.hbar * d.detuning.abs() / d.depth;
    let identity_rel = (identity - gnat).abs() / gnat;
    let dw0 = ctx.modespace.delta_omega()[0];

    // ground-mode out-rates per channel (independent of the basis box)
    let mut gamma_fl0 = 0.0;
    let mut gamma_sc0 = 0.0;
    for ch in &ctx.rates.channels {
        match ch.channel {
            tweezersim::Channel::Fluctuation => gamma_fl0 = ch.gamma_out[0],
            tweezersim::Channel::Scattering => gamma_sc0 = ch.gamma_out[0],
        }
    }

    let rows: Vec<(String, String, String)> = vec![
        ("Gamma0".into(), format!("{g0:.6e}"), "1/s (hyperfine magnetic-dipole decay)".into()),
        ("sigma0".into(), format!("{sigma0:.6e}"), "m^2".into()),
        ("photon_flux".into(), format!("{flux:.6e}"), "1/(m^2 s)".into()),
        ("total_scatter_rate".into(), format!("{:.6e}", flux * sigma0), "1/s".into()),
        ("s_diff".into(), format!("{:.6e}", d.s_diff), "fractional depth difference".into()),
        ("eta_x".into(), format!("{:.6}", d.eta[0]), "Lamb-Dicke".into()),
        ("eta_y".into(), format!("{:.6}", d.eta[1]), "Lamb-Dicke".into()),
        ("eta_z".into(), format!("{:.6}", d.eta[2]), "Lamb-Dicke".into()),
        ("x_zpf_x".into(), format!("{:.6e}", d.x_zpf[0]), "m".into()),
        ("x_zpf_z".into(), format!("{:.6e}", d.x_zpf[2]), "m".into()),
        ("freq_perp".into(), format!("{:.6}", d.omega_mean[0] / std::f64::consts::TAU / 1e3), "kHz".into()),
        ("freq_axial".into(), format!("{:.6}", d.omega_mean[2] / std::f64::consts::TAU / 1e3), "kHz".into()),
        ("delta_omega_0".into(), format!("{:.6}", dw0), "rad/s (ground-mode shift)".into()),
        ("delta_omega_0_hz".into(), format!("{:.6}", dw0 / std::f64::consts::TAU), "Hz".into()),
        ("detuning".into(), format!("{:.6e}", d.detuning), "rad/s".into()),
        ("gamma_fl_ground".into(), format!("{gamma_fl0:.6e}"), "1/s (intensity noise)".into()),
        ("gamma_sc_ground".into(), format!("{gamma_sc0:.6e}"), "1/s (photon scattering)".into()),
        ("flux_identity_rel_err".into(), format!("{identity_rel:.3e}"), "sigma0*flux*hbar*|det|/U0 vs natural rate".into()),
    ];

    println!("{:<24} {:>16}   {}", "quantity", "value", "unit/note");
    for (k, v, u) in &rows {
        println!("{k:<24} {v:>16}   {u}");
    }

    let mut obj = serde_json::Map::new();
    for (k, v, u) in &rows {
        obj.insert(
            k.clone(),
            serde_json::json!({ "value": v.parse::<f64>().unwrap_or(f64::NAN), "note": u }),
        );
    }
    obj.insert("config_hash".into(), serde_json::Value::String(config_hash(&config)));
    let dir = resolve_out_dir(&args.out, &config);
    let path = write_file(
        &dir,
        "constants.json",
        &serde_json::to_string_pretty(&serde_json::Value::Object(obj)).unwrap(),
    )?;
    println!("wrote {}", path.display());
    Ok(())
}

fn execute_protocol(
    config: &RunConfig,
    ctx: &Context,
    kind: &str,
    carrier: f64,
) -> Result<TimeSeries, CliError> {
    let rabi = std::f64::consts::TAU * config.protocol.rabi_khz * 1e3;
    match kind {
        "rabi" => {
            let duration = config
                .protocol
                .rabi_duration_ms
                .map(|ms| ms * 1e-3)
                .unwrap_or(2.0 * std::f64::consts::TAU / rabi);
            let pulse = PulseSpec {
                rabi,
                phase: 0.0,
                carrier,
                duration,
                area: rabi * duration,
                start: 0.0,
            };
            let protocol = Protocol { name: "rabi".into(), events: vec![Event::Pulse(pulse)] };
            Ok(run_protocol(
                &protocol,
                &ctx.state,
                &ctx.modespace,
                &ctx.rates,
                ctx.resolved.constants.omega_hpf,
                &ctx.ctrl,
                Some(config.protocol.sample_every_us * 1e-6),
            )?)
        }
        "ramsey" | "echo" => {
            let scan = GapScan {
                kind: if kind == "echo" { SequenceKind::Echo } else { SequenceKind::Ramsey },
                first_area: config.first_pulse_area(),
                pulse_mode: if config.protocol.pulse == "rect" {
                    PulseMode::Rectangular { rabi }
                } else {
                    PulseMode::Delta
                },
                carrier,
                gaps: config.gap_grid(),
            };
            Ok(run_gap_scan(
                &scan,
                &ctx.state,
                &ctx.modespace,
                &ctx.rates,
                ctx.resolved.constants.omega_hpf,
                &ctx.ctrl,
            )?)
        }
        other => Err(CliError::Core(tweezersim::CoreError::config(format!(
            "unknown protocol `{other}`"
        )))),
    }
}

pub fn cmd_run(args: &Common, kind: &str) -> Result<(), CliError> {
    let config = load_config(&args.config)?;
    let ctx = build_context(&config)?;
    let carrier = resolve_carrier(&config, &ctx)?;
    let mut series = execute_protocol(&config, &ctx, kind, carrier)?;
    run_metadata(&config, &ctx, kind, carrier, &mut series);

    if kind != "rabi" {
        let ht = coherence_halftime(&series.times, &series.coh_aggregate);
        let label = if ht.is_infinite() { "inf".to_string() } else { format!("{:.6e}", ht) };
        series.metadata.push(("halftime_s".to_string(), label.clone()));
        println!("contrast halftime: {label} s");
    }
    emit_series(&config, args, &series, kind)?;
    Ok(())
}

pub fn cmd_sweep(args: &Sweep) -> Result<(), CliError> {
    let base = load_config(&args.common.config)?;
    if args.values.is_empty() {
        return Err(CliError::Core(tweezersim::CoreError::config("sweep needs values")));
    }
    let kind = base.protocol.kind.clone();
    let mut summary = String::from("value,halftime_s,final_p_a,final_trace,gamma_fl_ground,gamma_sc_ground\n");

    for (idx, &value) in args.values.iter().enumerate() {
        let mut config = base.clone();
        match args.axis.as_str() {
            "depth" => {
                let scale = (value / base.trap.depth_uk).sqrt();
                config.trap.depth_uk = value;
                // measured trap frequencies track the depth as √U
                if let Some(f) = base.trap.freq_perp_khz {
                    config.trap.freq_perp_khz = Some(f * scale);
                }
                if let Some(f) = base.trap.freq_axial_khz {
                    config.trap.freq_axial_khz = Some(f * scale);
                }
            }
            "temperature" => config.trap.temperature_uk = value,
            "carrier" => config.protocol.carrier_offset_hz = Some(value),
            other => {
                return Err(CliError::Core(tweezersim::CoreError::config(format!(
                    "unknown sweep axis `{other}` (depth|temperature|carrier)"
                ))))
            }
        }
        let ctx = build_context(&config)?;
        let carrier = resolve_carrier(&config, &ctx)?;
        let mut series = execute_protocol(&config, &ctx, &kind, carrier)?;
        run_metadata(&config, &ctx, &kind, carrier, &mut series);
        series
            .metadata
            .push((format!("sweep_{}", args.axis), format!("{value}")));

        let ht = coherence_halftime(&series.times, &series.coh_aggregate);
        let mut gamma_fl0 = 0.0;
        let mut gamma_sc0 = 0.0;
        for ch in &ctx.rates.channels {
            match ch.channel {
                tweezersim::Channel::Fluctuation => gamma_fl0 = ch.gamma_out[0],
                tweezersim::Channel::Scattering => gamma_sc0 = ch.gamma_out[0],
            }
        }
        let n = series.len();
        summary.push_str(&format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            value,
            if ht.is_infinite() { "inf".to_string() } else { format!("{ht:.12e}") },
            series.p_a[n - 1],
            series.p_a[n - 1] + series.p_b[n - 1],
            gamma_fl0,
            gamma_sc0,
        ));
        emit_series(&config, &args.common, &series, &format!("sweep_{}_{idx}", args.axis))?;
    }

    let dir = resolve_out_dir(&args.common.out, &base);
    let path = write_file(&dir, "sweep_summary.csv", &summary)?;
    println!("wrote {}", path.display());
    Ok(())
}
