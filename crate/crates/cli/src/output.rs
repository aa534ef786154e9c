//! Output emission: CSV files, JSON metadata sidecars, static SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use tweezersim::{RunConfig, TimeSeries};

use crate::CliError;

/// Output directory precedence: SIM_OUT env var > --out flag > config.
pub fn resolve_out_dir(args_out: &Option<PathBuf>, config: &RunConfig) -> PathBuf {
    if let Ok(dir) = std::env::var("SIM_OUT") {
        return PathBuf::from(dir);
    }
    args_out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.dir))
}

/// Hex SHA-256 of the resolved configuration document.
pub fn config_hash(config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(config.to_toml_string().as_bytes());
    let digest = h.finalize();
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

/// Metadata sidecar: resolved config (re-parseable TOML), its hash, and the
/// per-run key/value metadata that also heads the CSV.
pub fn metadata_json(config: &RunConfig, series: &TimeSeries) -> String {
    let mut meta = serde_json::Map::new();
    for (k, v) in &series.metadata {
        meta.insert(k.clone(), serde_json::Value::String(v.clone()));
    }
    let doc = serde_json::json!({
        "config_hash": config_hash(config),
        "resolved_config_toml": config.to_toml_string(),
        "run": serde_json::Value::Object(meta),
    });
    serde_json::to_string_pretty(&doc).expect("metadata serializes")
}

/// Minimal static line chart: P_a (solid) and normalized contrast (dashed)
/// against time in ms.
pub fn series_svg(series: &TimeSeries, title: &str) -> String {
    let w = 720.0;
    let h = 420.0;
    let ml = 60.0;
    let mr = 20.0;
    let mt = 30.0;
    let mb = 45.0;
    let t_max = series.times.iter().cloned().fold(1e-12f64, f64::max);
    let c0 = series.coh_aggregate.first().copied().unwrap_or(0.0);
    let xs = |t: f64| ml + (w - ml - mr) * t / t_max;
    let ys = |v: f64| mt + (h - mt - mb) * (1.0 - v.clamp(0.0, 1.0));

    let polyline = |vals: &[f64], scale: f64| -> String {
        series
            .times
            .iter()
            .zip(vals)
            .map(|(&t, &v)| format!("{:.2},{:.2}", xs(t), ys(v * scale)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n",
        ml
    ));
    // frame and gridlines at 0, 0.5, 1
    svg.push_str(&format!(
        "<rect x=\"{ml}\" y=\"{mt}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        w - ml - mr,
        h - mt - mb
    ));
    for v in [0.0, 0.5, 1.0] {
        svg.push_str(&format!(
            "<line x1=\"{ml}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#ccc\" \
             stroke-dasharray=\"2,4\"/>\n<text x=\"8\" y=\"{2:.2}\" font-family=\"sans-serif\" \
             font-size=\"11\">{v}</text>\n",
            ys(v),
            w - mr,
            ys(v) + 4.0
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\">time [ms], \
         0 to {:.3}</text>\n",
        ml,
        h - 12.0,
        t_max * 1e3
    ));
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
        polyline(&series.p_a, 1.0)
    ));
    if c0 > 0.0 {
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.2\" \
             stroke-dasharray=\"5,3\"/>\n",
            polyline(&series.coh_aggregate, 1.0 / c0)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{mt}\" font-family=\"sans-serif\" font-size=\"11\" \
         fill=\"#1f77b4\">P_a</text>\n<text x=\"{:.0}\" y=\"{mt}\" font-family=\"sans-serif\" \
         font-size=\"11\" fill=\"#d62728\">contrast</text>\n",
        w - 140.0,
        w - 80.0
    ));
    svg.push_str("</svg>\n");
    svg
}
