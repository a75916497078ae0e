use std::f64::consts::FRAC_1_SQRT_2;
use std::fs;

use num_complex::Complex64;
use qmelab_core::channels::{
    dephasing_channel, measurement_channel, pauli_string, stabilizer_from_axis, Pauli,
};
use qmelab_core::codes::{make_code, CodeName, LogicalBit};
use qmelab_core::densmat::{
    apply_unitary, gates, kraus_completeness_residual, random_density_matrix, tensor,
    ComplexMatrix, DensityMatrix,
};
use qmelab_core::experiments;
use qmelab_core::fit::{fit_cz_params, FitProblem, FitResult, Snapshot};
use qmelab_core::noise::{
    amp_damp_kraus, cz_channel, decoherence_kraus, dephase_kraus, leakage_kraus, CoherenceTimes,
    CzErrorParams,
};
use qmelab_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Command, Format, RunPlan};
use crate::error::CliError;
use crate::output::{self, float, header, write_output};

pub const EQUIVALENCE_TOL: f64 = 1e-12;
pub const COMPLETENESS_TOL: f64 = 1e-10;

pub fn run_experiment(plan: &RunPlan) -> Result<String, CliError> {
    let Command::Experiment(e) = plan.command else {
        return Err(CliError::Usage(format!(
            "{} is not an experiment",
            plan.command.as_str()
        )));
    };
    let spec = plan.spec.as_ref().expect("experiment plans carry a sweep");
    let result = experiments::run(e, spec, &plan.ctx)?;
    let h = header(plan, output::experiment_flags(&result));
    Ok(output::render_experiment(plan.format, &h, &result))
}

/// Initial state of a snapshot file: a named preset or an explicit matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Matrix {
        re: Vec<Vec<f64>>,
        im: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapshotFile {
    pub initial_state: InitialState,
    pub snapshots: Vec<Snapshot>,
}

pub const INITIAL_STATE_NAMES: [&str; 6] = [
    "plus_plus",
    "zero_zero",
    "zz_code_0",
    "zz_code_1",
    "xx_code_0",
    "xx_code_1",
];

pub fn named_state(name: &str) -> Option<DensityMatrix> {
    let logical = |code, which| Some(make_code(code).logical(which).clone());
    match name {
        "plus_plus" => {
            let h = tensor(&gates::hadamard(), &gates::hadamard()).ok()?;
            apply_unitary(&DensityMatrix::basis(2, 0).ok()?, &h).ok()
        }
        "zero_zero" => DensityMatrix::basis(2, 0).ok(),
        "zz_code_0" => logical(CodeName::ZzCode, LogicalBit::Zero),
        "zz_code_1" => logical(CodeName::ZzCode, LogicalBit::One),
        "xx_code_0" => logical(CodeName::XxCode, LogicalBit::Zero),
        "xx_code_1" => logical(CodeName::XxCode, LogicalBit::One),
        _ => None,
    }
}

fn initial_state(spec: &InitialState) -> Result<DensityMatrix, CliError> {
    match spec {
        InitialState::Named(name) => named_state(name).ok_or_else(|| {
            CliError::invalid(
                "initial_state",
                format!(
                    "unknown state {name:?}; expected one of {}",
                    INITIAL_STATE_NAMES.join(", ")
                ),
            )
        }),
        InitialState::Matrix { re, im } => {
            let rows = re.len();
            if rows != im.len() || re.iter().chain(im).any(|r| r.len() != rows) {
                return Err(CliError::invalid(
                    "initial_state",
                    "re and im must be square and the same size",
                ));
            }
            let data: Vec<_> = re
                .iter()
                .flatten()
                .zip(im.iter().flatten())
                .map(|(&a, &b)| Complex64::new(a, b))
                .collect();
            let m = ComplexMatrix::new(rows, data)
                .map_err(|e| CliError::invalid("initial_state", e.to_string()))?;
            DensityMatrix::new(m).map_err(|e| CliError::invalid("initial_state", e.to_string()))
        }
    }
}

pub fn load_snapshots(plan: &RunPlan) -> Result<FitProblem, CliError> {
    let path = plan.snapshots.as_ref().ok_or_else(|| {
        CliError::invalid("fit.snapshots", "no snapshot file given (use --snapshots)")
    })?;
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingFile(path.clone()))
        }
        Err(e) => return Err(CliError::io(path, e)),
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: SnapshotFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            CliError::Syntax {
                path: path.clone(),
                line: inner.line(),
                column: inner.column(),
                message: inner.to_string(),
            }
        } else {
            CliError::invalid(format!("snapshots:{field}"), inner.to_string())
        }
    })?;
    let rho0 = initial_state(&file.initial_state)?;
    FitProblem::new(file.snapshots, rho0, plan.ctx.device)
        .map_err(|e| CliError::invalid("snapshots", e.to_string()))
}

pub fn run_fit(plan: &RunPlan) -> Result<(String, FitResult), CliError> {
    let problem = load_snapshots(plan)?;
    let fit = fit_cz_params(&problem, &plan.fit_guess)?;
    let h = header(
        plan,
        [
            (
                "fit_optimizer".to_string(),
                "nelder_mead;5_starts;lam=sin^2(v)".to_string(),
            ),
            (
                "fit_steps".to_string(),
                problem
                    .steps()
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
        ],
    );
    Ok((output::render_fit(plan.format, &h, &fit), fit))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn check(name: &str, max_residual: f64, threshold: f64) -> Check {
    Check {
        name: name.into(),
        max_residual,
        threshold,
        pass: max_residual <= threshold,
    }
}

/// Measurement ≡ dephasing on random states, and Kraus completeness of every
/// noise channel over random parameters.
pub fn verification_checks(seed: u64) -> Result<Vec<Check>, CliError> {
    let stabilizers = [
        ("Z", pauli_string(&[Pauli::Z])?),
        ("X", pauli_string(&[Pauli::X])?),
        (
            "(X+Y)/sqrt2",
            stabilizer_from_axis(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0)?,
        ),
        ("ZZ", pauli_string(&[Pauli::Z, Pauli::Z])?),
        ("XX", pauli_string(&[Pauli::X, Pauli::X])?),
    ];
    let mut checks = Vec::new();
    for (k, (label, s)) in stabilizers.iter().enumerate() {
        let mut r = rng::substream(seed, &[k as u64]);
        let mut worst: f64 = 0.0;
        for _ in 0..200 {
            let rho = random_density_matrix(s.n_qubits(), &mut r)?;
            let a = measurement_channel(&rho, s)?;
            let b = dephasing_channel(&rho, s)?;
            worst = worst.max(a.matrix().max_abs_diff(b.matrix()));
        }
        checks.push(check(
            &format!("measurement_equals_dephasing[{label}]"),
            worst,
            EQUIVALENCE_TOL,
        ));
    }

    let mut r = rng::substream(seed, &[100]);
    let (mut ad, mut dp, mut dec, mut leak, mut cz) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let t: f64 = r.random_range(0.0..10.0);
        let g1: f64 = r.random_range(0.0..2.0);
        let gphi: f64 = r.random_range(0.0..2.0);
        let t1: f64 = r.random_range(1.0..100.0);
        let t2r: f64 = r.random_range(0.1..2.0 * t1);
        let lam: f64 = r.random();
        ad = ad.max(kraus_completeness_residual(&amp_damp_kraus(g1, t)?)?);
        dp = dp.max(kraus_completeness_residual(&dephase_kraus(gphi, t)?)?);
        dec = dec.max(kraus_completeness_residual(&decoherence_kraus(
            CoherenceTimes { t1, t2r },
            t,
        )?)?);
        leak = leak.max(kraus_completeness_residual(&leakage_kraus(lam)?)?);
        let p = CzErrorParams {
            phi: r.random_range(-3.0..3.0),
            theta1: r.random_range(-3.0..3.0),
            theta2: r.random_range(-3.0..3.0),
            lam,
        };
        cz = cz.max(kraus_completeness_residual(cz_channel(&p)?.kraus())?);
    }
    checks.push(check(
        "kraus_completeness[amplitude_damping]",
        ad,
        COMPLETENESS_TOL,
    ));
    checks.push(check("kraus_completeness[dephasing]", dp, COMPLETENESS_TOL));
    checks.push(check(
        "kraus_completeness[decoherence]",
        dec,
        COMPLETENESS_TOL,
    ));
    checks.push(check("kraus_completeness[leakage]", leak, COMPLETENESS_TOL));
    checks.push(check(
        "kraus_completeness[cz_with_errors]",
        cz,
        COMPLETENESS_TOL,
    ));
    Ok(checks)
}

pub fn render_checks(format: Format, checks: &[Check]) -> String {
    match format {
        Format::Csv => {
            let mut s = String::from("check,max_residual,threshold,status\n");
            for c in checks {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    c.name,
                    float(c.max_residual),
                    float(c.threshold),
                    if c.pass { "pass" } else { "FAIL" }
                ));
            }
            s
        }
        Format::Json => {
            let mut s =
                serde_json::to_string_pretty(&json!({ "checks": checks })).expect("serializable");
            s.push('\n');
            s
        }
    }
}

pub fn run_verify(plan: &RunPlan) -> Result<String, CliError> {
    let checks = verification_checks(plan.seed)?;
    let report = render_checks(plan.format, &checks);
    write_output(plan.out.as_deref(), &report)?;
    if let Some(bad) = checks.iter().find(|c| !c.pass) {
        return Err(CliError::VerifyFailed(format!(
            "{}: {:.3e} > {:.0e}",
            bad.name, bad.max_residual, bad.threshold
        )));
    }
    Ok(report)
}
