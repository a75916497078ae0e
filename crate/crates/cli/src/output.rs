//! Result files: a metadata header followed by data rows, as CSV or JSON.
//!
//! CSV headers are `#`-prefixed `key: value` lines; the last one embeds the
//! resolved config as JSON. Floats are written with 17 significant digits.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use qmelab_core::experiments::{ExperimentResult, Mode, Row};
use qmelab_core::fit::FitResult;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunPlan};
use crate::error::CliError;

pub const TOOL: &str = "qmelab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    /// Modeling choices that affect the numbers, by name.
    pub flags: BTreeMap<String, String>,
    pub config: Value,
}

fn model_flags(plan: &RunPlan) -> BTreeMap<String, String> {
    let mut f = BTreeMap::new();
    f.insert("leakage_correction".into(), "l2_maps_11_to_10".into());
    f.insert(
        "channel_ordering".into(),
        "dephasing_then_amplitude_damping".into(),
    );
    f.insert(
        "decoherence_window".into(),
        "gate_plus_gap_both_qubits".into(),
    );
    f.insert(
        "qme_gates".into(),
        if plan.ctx.qme_gate_duration {
            "timed"
        } else {
            "virtual"
        }
        .into(),
    );
    f
}

pub fn header(plan: &RunPlan, extra: impl IntoIterator<Item = (String, String)>) -> Header {
    let mut flags = model_flags(plan);
    flags.extend(extra);
    Header {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: plan.command.as_str().into(),
        config_sha256: plan.config_hash(),
        seed: plan.seed,
        flags,
        config: serde_json::from_str(&plan.canonical_json()).expect("canonical config is JSON"),
    }
}

pub fn experiment_flags(result: &ExperimentResult) -> Vec<(String, String)> {
    let m = &result.metadata;
    let mut out = vec![
        ("mode".to_string(), mode_label(m.mode)),
        ("spam_normalized".to_string(), m.spam_normalized.to_string()),
        (
            "preparation".to_string(),
            serde_json::to_value(m.preparation)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
        ),
        (
            "tomography".to_string(),
            "linear_inversion_psd_clip;rotate_x=H;rotate_y=H.Sdg".to_string(),
        ),
    ];
    if let Some(a) = &m.aggregation {
        out.push(("aggregation".into(), a.clone()));
    }
    if let Some(c) = m.code {
        out.push(("code".into(), c.to_string()));
    }
    if !m.preparation_gates.is_empty() {
        out.push(("preparation_gates".into(), m.preparation_gates.join(" | ")));
    }
    out
}

fn mode_label(mode: Mode) -> String {
    match mode {
        Mode::ExactChannel => "exact_channel".into(),
        Mode::Sampled { n_trajectories } => format!("sampled({n_trajectories})"),
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_preamble(h: &Header) -> String {
    let mut s = String::new();
    s.push_str(&format!("# tool: {} {}\n", h.tool, h.version));
    s.push_str(&format!("# command: {}\n", h.command));
    s.push_str(&format!("# config_sha256: {}\n", h.config_sha256));
    s.push_str(&format!("# seed: {}\n", h.seed));
    for (k, v) in &h.flags {
        s.push_str(&format!("# flag.{k}: {v}\n"));
    }
    s.push_str(&format!("# config: {}\n", h.config));
    s
}

/// Expectation labels in order of first appearance.
pub fn expectation_columns(rows: &[Row]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in rows {
        for (l, _) in &r.expectations {
            if seen.insert(l.clone()) {
                out.push(l.clone());
            }
        }
    }
    out
}

pub fn experiment_csv(h: &Header, result: &ExperimentResult) -> String {
    let cols = expectation_columns(&result.rows);
    let mut s = csv_preamble(h);
    let mut head = vec![
        "arm".to_string(),
        "x".into(),
        "trace_distance".into(),
        "fidelity".into(),
    ];
    head.extend(cols.iter().map(|c| format!("exp_{c}")));
    head.push("seed".into());
    head.push("mode".into());
    s.push_str(&head.join(","));
    s.push('\n');
    for r in &result.rows {
        let lookup: BTreeMap<&str, f64> = r
            .expectations
            .iter()
            .map(|(l, v)| (l.as_str(), *v))
            .collect();
        let mut cells = vec![
            r.arm.clone(),
            float(r.x),
            float(r.trace_distance),
            float(r.fidelity),
        ];
        cells.extend(cols.iter().map(|c| {
            lookup
                .get(c.as_str())
                .map(|v| float(*v))
                .unwrap_or_default()
        }));
        cells.push(r.seed.to_string());
        cells.push(r.mode.clone());
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn experiment_json(h: &Header, result: &ExperimentResult) -> String {
    let rows: Vec<Value> = result
        .rows
        .iter()
        .map(|r| {
            let exp: serde_json::Map<String, Value> = r
                .expectations
                .iter()
                .map(|(l, v)| (l.clone(), json!(v)))
                .collect();
            json!({
                "arm": r.arm,
                "x": r.x,
                "trace_distance": r.trace_distance,
                "fidelity": r.fidelity,
                "expectations": exp,
                "seed": r.seed,
                "mode": r.mode,
            })
        })
        .collect();
    let doc = json!({ "header": h, "metadata": result.metadata, "rows": rows });
    let mut s = serde_json::to_string_pretty(&doc).expect("serializable");
    s.push('\n');
    s
}

pub fn fit_csv(h: &Header, fit: &FitResult) -> String {
    let mut s = csv_preamble(h);
    s.push_str("phi,theta1,theta2,lam,residual_norm,iterations,converged\n");
    let p = fit.params;
    s.push_str(&format!(
        "{},{},{},{},{},{},{}\n",
        float(p.phi),
        float(p.theta1),
        float(p.theta2),
        float(p.lam),
        float(fit.residual_norm),
        fit.iterations,
        fit.converged
    ));
    s
}

pub fn fit_json(h: &Header, fit: &FitResult) -> String {
    let mut s =
        serde_json::to_string_pretty(&json!({ "header": h, "fit": fit })).expect("serializable");
    s.push('\n');
    s
}

pub fn render_experiment(format: Format, h: &Header, result: &ExperimentResult) -> String {
    match format {
        Format::Csv => experiment_csv(h, result),
        Format::Json => experiment_json(h, result),
    }
}

pub fn render_fit(format: Format, h: &Header, fit: &FitResult) -> String {
    match format {
        Format::Csv => fit_csv(h, fit),
        Format::Json => fit_json(h, fit),
    }
}

/// Writes through a temporary file in the target directory and renames it into
/// place, so a failed run never leaves a partial file. `None` means stdout.
pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(content.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::io("<stdout>", e));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| CliError::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}
