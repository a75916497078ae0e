//! JSON run configuration.
//!
//! Every key is optional; omitted values fall back to the reference device and
//! the experiment's default sweep. Unknown keys are rejected. Coherence times
//! are given in µs and gate durations in ns.
//!
//! A config is resolved against a command into a fully populated copy of
//! itself. That copy is what gets hashed and embedded in result files, so
//! feeding it back reproduces the run.

use std::fs;
use std::path::{Path, PathBuf};

use qmelab_core::codes::CodeName;
use qmelab_core::experiments::{
    default_sweep, fig3_calibrated_errors, Arm, Experiment, ExperimentContext, Mode,
    PreparationKind, Shots, SweepSpec, SweepVariable,
};
use qmelab_core::noise::{CzErrorParams, DeviceModel, GateTiming, QubitCoherence};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const DEFAULT_TRAJECTORIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Experiment(Experiment),
    Fit,
    VerifyChannels,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Experiment(e) => e.as_str(),
            Command::Fit => "fit",
            Command::VerifyChannels => "verify-channels",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<DeviceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cz_errors: Option<CzErrorsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<CodeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preparation: Option<PreparationKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitConfig>,
    /// Where results go. Not part of the hashed config.
    #[serde(default, skip_serializing)]
    pub output: Option<OutputConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit1: Option<QubitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit2: Option<QubitConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decoherence: Option<bool>,
    /// Charge decoherence for the QME gates instead of treating them as virtual.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qme_gate_duration: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2r_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1_cz_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2r_cz_us: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_1qb_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_cz_ns: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzErrorsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lam: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    ExactChannel,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactWord {
    Exact,
}

/// `"exact"` or a per-setting shot count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotsConfig {
    Count(u64),
    Word(ExactWord),
}

impl ShotsConfig {
    pub fn to_shots(self) -> Shots {
        match self {
            ShotsConfig::Count(n) => Shots::PerSetting(n),
            ShotsConfig::Word(ExactWord::Exact) => Shots::Exact,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<SweepVariable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<Arm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotsConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<CzErrorsConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub exact: bool,
    pub trajectories: Option<usize>,
    pub shots: Option<Shots>,
    pub snapshots: Option<PathBuf>,
}

/// Everything a command needs, with the resolved config it came from.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub command: Command,
    pub resolved: ConfigFile,
    pub spec: Option<SweepSpec>,
    pub ctx: ExperimentContext,
    pub fit_guess: CzErrorParams,
    pub snapshots: Option<PathBuf>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunPlan {
    /// JSON of the resolved config; the input of [`RunPlan::config_hash`].
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(&self.resolved).expect("config serializes")
    }

    /// SHA-256 of the canonical config, hex encoded.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

pub fn parse_config_str(text: &str, origin: &Path) -> Result<ConfigFile, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let parsed: Result<ConfigFile, _> = serde_path_to_error::deserialize(de);
    parsed.map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            CliError::Syntax {
                path: origin.to_path_buf(),
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        } else {
            CliError::invalid(path, inner.to_string())
        }
    })
}

pub fn parse_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingFile(path.to_path_buf()));
        }
        Err(e) => return Err(CliError::io(path, e)),
    };
    parse_config_str(&text, path)
}

fn core_field(prefix: &str, err: qmelab_core::Error, rename: &[(&str, &str)]) -> CliError {
    match err {
        qmelab_core::Error::InvalidParameter { name, reason } => {
            let key = rename
                .iter()
                .find(|(from, _)| *from == name)
                .map_or(name, |(_, to)| to);
            CliError::invalid(format!("{prefix}.{key}"), reason)
        }
        other => CliError::invalid(prefix, other.to_string()),
    }
}

fn resolve_qubit(
    cfg: Option<&QubitConfig>,
    reference: QubitCoherence,
    path: &str,
) -> Result<(QubitConfig, QubitCoherence), CliError> {
    let c = cfg.cloned().unwrap_or_default();
    let q = QubitCoherence {
        t1: c.t1_us.unwrap_or(reference.t1),
        t2r: c.t2r_us.unwrap_or(reference.t2r),
        t1_cz: c.t1_cz_us.unwrap_or(reference.t1_cz),
        t2r_cz: c.t2r_cz_us.unwrap_or(reference.t2r_cz),
    };
    qmelab_core::noise::gamma_phi(q.t1, q.t2r)
        .map_err(|e| core_field(path, e, &[("t1", "t1_us"), ("t2r", "t2r_us")]))?;
    qmelab_core::noise::gamma_phi(q.t1_cz, q.t2r_cz)
        .map_err(|e| core_field(path, e, &[("t1", "t1_cz_us"), ("t2r", "t2r_cz_us")]))?;
    let resolved = QubitConfig {
        t1_us: Some(q.t1),
        t2r_us: Some(q.t2r),
        t1_cz_us: Some(q.t1_cz),
        t2r_cz_us: Some(q.t2r_cz),
    };
    Ok((resolved, q))
}

fn resolve_cz(
    cfg: &CzErrorsConfig,
    fallback: CzErrorParams,
    path: &str,
) -> Result<(CzErrorsConfig, CzErrorParams), CliError> {
    let p = CzErrorParams {
        phi: cfg.phi.unwrap_or(fallback.phi),
        theta1: cfg.theta1.unwrap_or(fallback.theta1),
        theta2: cfg.theta2.unwrap_or(fallback.theta2),
        lam: cfg.lam.unwrap_or(fallback.lam),
    };
    p.validate().map_err(|e| core_field(path, e, &[]))?;
    let resolved = CzErrorsConfig {
        phi: Some(p.phi),
        theta1: Some(p.theta1),
        theta2: Some(p.theta2),
        lam: Some(p.lam),
    };
    Ok((resolved, p))
}

fn resolve_device(
    cfg: Option<&DeviceConfig>,
) -> Result<(DeviceConfig, DeviceModel, bool), CliError> {
    let c = cfg.cloned().unwrap_or_default();
    let (q1c, q1) = resolve_qubit(
        c.qubit1.as_ref(),
        QubitCoherence::REFERENCE_Q1,
        "device.qubit1",
    )?;
    let (q2c, q2) = resolve_qubit(
        c.qubit2.as_ref(),
        QubitCoherence::REFERENCE_Q2,
        "device.qubit2",
    )?;
    let t = c.timing.clone().unwrap_or_default();
    let timing = GateTiming {
        t_1qb: t.t_1qb_ns.unwrap_or(GateTiming::REFERENCE.t_1qb),
        t_cz: t.t_cz_ns.unwrap_or(GateTiming::REFERENCE.t_cz),
        gap: t.gap_ns.unwrap_or(GateTiming::REFERENCE.gap),
    };
    timing.validate().map_err(|e| {
        core_field(
            "device.timing",
            e,
            &[
                ("t_1qb", "t_1qb_ns"),
                ("t_cz", "t_cz_ns"),
                ("gap", "gap_ns"),
            ],
        )
    })?;
    let decoherence = c.decoherence.unwrap_or(true);
    let qme_gate_duration = c.qme_gate_duration.unwrap_or(false);
    let resolved = DeviceConfig {
        qubit1: Some(q1c),
        qubit2: Some(q2c),
        timing: Some(TimingConfig {
            t_1qb_ns: Some(timing.t_1qb),
            t_cz_ns: Some(timing.t_cz),
            gap_ns: Some(timing.gap),
        }),
        decoherence: Some(decoherence),
        qme_gate_duration: Some(qme_gate_duration),
    };
    let device = DeviceModel {
        qubits: [q1, q2],
        timing,
        decoherence,
    };
    Ok((resolved, device, qme_gate_duration))
}

fn resolve_sweep(
    cfg: Option<&SweepConfig>,
    experiment: Experiment,
    ov: &Overrides,
    seed: u64,
) -> Result<(SweepConfig, SweepSpec), CliError> {
    let c = cfg.cloned().unwrap_or_default();
    let defaults = default_sweep(experiment);
    if let Some(v) = c.variable {
        if v != experiment.variable() {
            return Err(CliError::invalid(
                "sweep.variable",
                format!("{experiment} sweeps {:?}", experiment.variable()),
            ));
        }
    }
    let mut mode = c.mode.unwrap_or(ModeName::ExactChannel);
    let mut n_traj = c.n_trajectories;
    if ov.exact {
        mode = ModeName::ExactChannel;
        n_traj = None;
    }
    if let Some(n) = ov.trajectories {
        mode = ModeName::Sampled;
        n_traj = Some(n);
    }
    let mode_value = match mode {
        ModeName::ExactChannel => {
            if n_traj.is_some() {
                return Err(CliError::invalid(
                    "sweep.n_trajectories",
                    "only meaningful with mode \"sampled\"",
                ));
            }
            Mode::ExactChannel
        }
        ModeName::Sampled => {
            let n = n_traj.unwrap_or(DEFAULT_TRAJECTORIES);
            n_traj = Some(n);
            Mode::Sampled { n_trajectories: n }
        }
    };
    let shots = ov.shots.map(|s| match s {
        Shots::Exact => ShotsConfig::Word(ExactWord::Exact),
        Shots::PerSetting(n) => ShotsConfig::Count(n),
    });
    let shots = shots
        .or(c.shots)
        .unwrap_or(ShotsConfig::Word(ExactWord::Exact));
    let spec = SweepSpec {
        variable: experiment.variable(),
        values: c.values.clone().unwrap_or(defaults.values),
        arms: c.arms.clone().unwrap_or(defaults.arms),
        mode: mode_value,
        shots: shots.to_shots(),
        master_seed: seed,
    };
    spec.validate_for(experiment)
        .map_err(|e| CliError::invalid("sweep", e.to_string()))?;
    let resolved = SweepConfig {
        variable: Some(spec.variable),
        values: Some(spec.values.clone()),
        arms: Some(spec.arms.clone()),
        mode: Some(mode),
        n_trajectories: n_traj,
        shots: Some(shots),
    };
    Ok((resolved, spec))
}

/// Fills defaults, applies overrides and validates every section.
pub fn resolve(file: &ConfigFile, command: Command, ov: &Overrides) -> Result<RunPlan, CliError> {
    if let Some(name) = &file.experiment {
        if name != command.as_str() && name.replace('_', "-") != command.as_str() {
            return Err(CliError::invalid(
                "experiment",
                format!(
                    "config is for {name:?} but the command is {}",
                    command.as_str()
                ),
            ));
        }
    }
    let seed = ov.seed.or(file.seed).unwrap_or(0);
    let (device_cfg, device, qme_gate_duration) = resolve_device(file.device.as_ref())?;
    let cz_fallback = match command {
        Command::Experiment(Experiment::Fig3) => fig3_calibrated_errors(),
        _ => CzErrorParams::default(),
    };
    let (cz_cfg, cz_errors) = resolve_cz(
        &file.cz_errors.clone().unwrap_or_default(),
        cz_fallback,
        "cz_errors",
    )?;
    let fixed_code = match command {
        Command::Experiment(Experiment::Fig2) => Some(CodeName::ZzCode),
        Command::Experiment(Experiment::Fig3) => Some(CodeName::XxCode),
        _ => None,
    };
    if let (Some(fixed), Some(given)) = (fixed_code, file.code) {
        if fixed != given {
            return Err(CliError::invalid(
                "code",
                format!("{} always uses {fixed}, got {given}", command.as_str()),
            ));
        }
    }
    let code = fixed_code.or(file.code).unwrap_or(CodeName::ZzCode);
    let preparation = file.preparation.unwrap_or_default();

    let mut resolved = ConfigFile {
        experiment: Some(command.as_str().to_string()),
        device: Some(device_cfg),
        cz_errors: Some(cz_cfg),
        code: Some(code),
        preparation: Some(preparation),
        sweep: None,
        fit: None,
        output: None,
        seed: Some(seed),
    };

    let spec = match command {
        Command::Experiment(e) => {
            let (sweep_cfg, spec) = resolve_sweep(file.sweep.as_ref(), e, ov, seed)?;
            resolved.sweep = Some(sweep_cfg);
            Some(spec)
        }
        _ => {
            if file.sweep.is_some() {
                return Err(CliError::invalid(
                    "sweep",
                    format!("not used by {}", command.as_str()),
                ));
            }
            None
        }
    };

    let mut fit_guess = CzErrorParams::default();
    let mut snapshots = None;
    if command == Command::Fit {
        let f = file.fit.clone().unwrap_or_default();
        let (guess_cfg, guess) = resolve_cz(
            &f.initial_guess.unwrap_or_default(),
            CzErrorParams::default(),
            "fit.initial_guess",
        )?;
        fit_guess = guess;
        snapshots = ov.snapshots.clone().or(f.snapshots);
        resolved.fit = Some(FitConfig {
            snapshots: snapshots.clone(),
            initial_guess: Some(guess_cfg),
        });
    } else if file.fit.is_some() {
        return Err(CliError::invalid(
            "fit",
            format!("not used by {}", command.as_str()),
        ));
    }

    let out_cfg = file.output.clone().unwrap_or_default();
    Ok(RunPlan {
        command,
        resolved,
        spec,
        ctx: ExperimentContext {
            device,
            cz_errors,
            code,
            preparation,
            qme_gate_duration,
        },
        fit_guess,
        snapshots,
        seed,
        out: ov.out.clone().or(out_cfg.path),
        format: ov.format.or(out_cfg.format).unwrap_or_default(),
    })
}
