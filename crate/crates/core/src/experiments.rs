//! Sweep harnesses: single-qubit channel comparison over a Bloch-sphere grid,
//! coherent-error sweeps with and without QME, repeated-CZ sequences on the XX
//! code, arbitrary-axis QME and a family of transversal errors.
//!
//! Every sweep point is a pure function of the context, the arm, the point index
//! and the master seed, so points run in parallel and rows come back in a fixed
//! order: arms in the order given, then sweep values in the order given.
//!
//! In sampled mode each QME event draws its branch from a substream keyed by
//! (arm label, point index, trajectory index); the reported state is the mean
//! over trajectories. With a finite shot count the reported state is the
//! tomographic reconstruction of that state instead.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::{
    dephasing_channel, measurement_channel, pauli_string, qme_sample, stabilizer_from_axis, Pauli,
    PauliString, StabilizerObservable,
};
use crate::codes::{
    apply_transversal_error, make_code, preparation_gate_list, prepare_logical, transversal_family,
    CodeName, LogicalBit, Preparation, TransversalError,
};
use crate::densmat::{
    apply_unitary, expectation, fidelity, gates, trace_distance, BlochVector, DensityMatrix,
};
use crate::error::{Error, Result};
use crate::noise::{CzErrorParams, DeviceModel, Layer, LayerKind};
use crate::rng::{self, label_key, Stream};
use crate::tomography::{measure_all_settings, reconstruct, spam_normalize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Fig1,
    Fig2,
    Fig3,
    SuppAxes,
    SuppTransversal,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Fig1,
        Experiment::Fig2,
        Experiment::Fig3,
        Experiment::SuppAxes,
        Experiment::SuppTransversal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Fig1 => "fig1",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::SuppAxes => "supp-axes",
            Experiment::SuppTransversal => "supp-transversal",
        }
    }

    pub fn variable(self) -> SweepVariable {
        match self {
            Experiment::Fig1 | Experiment::SuppAxes => SweepVariable::InitialStateGrid,
            Experiment::Fig2 | Experiment::SuppTransversal => SweepVariable::ErrorAngle,
            Experiment::Fig3 => SweepVariable::SequenceLength,
        }
    }

    fn allowed_arms(self) -> &'static [Arm] {
        match self {
            Experiment::Fig1 | Experiment::SuppAxes => &Arm::ALL,
            _ => &[Arm::None, Arm::Qme],
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s || e.as_str().replace('-', "_") == s)
            .ok_or_else(|| Error::InvalidSweep(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    InitialStateGrid,
    ErrorAngle,
    SequenceLength,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    None,
    Qme,
    RealMeasurement,
    IdentityGate,
    StabilizerGate,
}

impl Arm {
    pub const ALL: [Arm; 5] = [
        Arm::None,
        Arm::Qme,
        Arm::RealMeasurement,
        Arm::IdentityGate,
        Arm::StabilizerGate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::None => "none",
            Arm::Qme => "qme",
            Arm::RealMeasurement => "real_measurement",
            Arm::IdentityGate => "identity_gate",
            Arm::StabilizerGate => "stabilizer_gate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    ExactChannel,
    Sampled { n_trajectories: usize },
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::ExactChannel => "exact",
            Mode::Sampled { .. } => "sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shots {
    Exact,
    PerSetting(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub arms: Vec<Arm>,
    pub mode: Mode,
    pub shots: Shots,
    pub master_seed: u64,
}

pub const FIG1_GRID_LEN: usize = 18;

/// Default sweep of each experiment, exact channels, no shot noise.
pub fn default_sweep(experiment: Experiment) -> SweepSpec {
    let (values, arms) = match experiment {
        Experiment::Fig1 | Experiment::SuppAxes => (
            (0..FIG1_GRID_LEN).map(|k| k as f64).collect(),
            vec![
                Arm::IdentityGate,
                Arm::StabilizerGate,
                Arm::Qme,
                Arm::RealMeasurement,
            ],
        ),
        Experiment::Fig2 | Experiment::SuppTransversal => (
            (0..25).map(|k| 1.2 * k as f64 / 24.0).collect(),
            vec![Arm::None, Arm::Qme],
        ),
        Experiment::Fig3 => ((0..=40).map(f64::from).collect(), vec![Arm::None, Arm::Qme]),
    };
    SweepSpec {
        variable: experiment.variable(),
        values,
        arms,
        mode: Mode::ExactChannel,
        shots: Shots::Exact,
        master_seed: 0,
    }
}

impl SweepSpec {
    pub fn validate_for(&self, experiment: Experiment) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSweep(m));
        if self.values.is_empty() {
            return bad("values must not be empty".into());
        }
        if self.arms.is_empty() {
            return bad("arms must not be empty".into());
        }
        if self.variable != experiment.variable() {
            return bad(format!(
                "{experiment} sweeps {:?}, not {:?}",
                experiment.variable(),
                self.variable
            ));
        }
        if let Some(a) = self
            .arms
            .iter()
            .find(|a| !experiment.allowed_arms().contains(a))
        {
            return bad(format!(
                "arm {} is not available in {experiment}",
                a.as_str()
            ));
        }
        for (k, a) in self.arms.iter().enumerate() {
            if self.arms[..k].contains(a) {
                return bad(format!("arm {} listed twice", a.as_str()));
            }
        }
        if let Mode::Sampled { n_trajectories: 0 } = self.mode {
            return bad("n_trajectories must be at least 1".into());
        }
        if let Shots::PerSetting(0) = self.shots {
            return bad("shots must be at least 1".into());
        }
        for &v in &self.values {
            let ok = match self.variable {
                SweepVariable::InitialStateGrid => {
                    v.fract() == 0.0 && v >= 0.0 && v < FIG1_GRID_LEN as f64
                }
                SweepVariable::SequenceLength => v.fract() == 0.0 && (0.0..=1e6).contains(&v),
                SweepVariable::ErrorAngle => v.is_finite(),
            };
            if !ok {
                return bad(format!("value {v} is not valid for {:?}", self.variable));
            }
        }
        Ok(())
    }
}

/// How logical states enter the two-qubit experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreparationKind {
    #[default]
    Exact,
    Circuit,
}

/// Physical setting shared by all sweep points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentContext {
    pub device: DeviceModel,
    pub cz_errors: CzErrorParams,
    pub code: CodeName,
    pub preparation: PreparationKind,
    /// Charge a single-qubit layer of decoherence for every QME event. Off by
    /// default: the stabilizer gates are frame updates.
    pub qme_gate_duration: bool,
}

impl Default for ExperimentContext {
    fn default() -> Self {
        Self {
            device: DeviceModel::default(),
            cz_errors: CzErrorParams::default(),
            code: CodeName::ZzCode,
            preparation: PreparationKind::Exact,
            qme_gate_duration: false,
        }
    }
}

impl ExperimentContext {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.cz_errors.validate()
    }

    fn prepare(&self, code: CodeName, which: LogicalBit) -> Result<DensityMatrix> {
        let prep = match self.preparation {
            PreparationKind::Exact => Preparation::Exact,
            PreparationKind::Circuit => Preparation::Circuit(self.device),
        };
        prepare_logical(&make_code(code), which, &prep)
    }

    fn after_qme(&self, rho: DensityMatrix) -> Result<DensityMatrix> {
        if self.qme_gate_duration && rho.n_qubits() == 2 {
            self.device
                .decoherence_after(LayerKind::SingleQubit)?
                .apply(&rho)
        } else {
            Ok(rho)
        }
    }
}

/// Per-pair relative phase used for the repeated-CZ landmark: π/20, realized as
/// θ₁ = −θ₂ = π/80 on each CZ.
pub const FIG3_DELTA: f64 = PI / 20.0;

pub fn fig3_calibrated_errors() -> CzErrorParams {
    CzErrorParams {
        phi: 0.0,
        theta1: FIG3_DELTA / 4.0,
        theta2: -FIG3_DELTA / 4.0,
        lam: 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub arm: String,
    pub x: f64,
    pub trace_distance: f64,
    pub fidelity: f64,
    /// Pauli label → expectation, in a fixed order per state size.
    pub expectations: Vec<(String, f64)>,
    pub seed: u64,
    pub mode: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: Experiment,
    pub code: Option<CodeName>,
    pub mode: Mode,
    pub shots: Shots,
    pub master_seed: u64,
    /// How sampled trajectories are combined into one row.
    pub aggregation: Option<String>,
    /// Trace distance and fidelity divided by their value at the minimum x of each arm.
    pub spam_normalized: bool,
    pub preparation: PreparationKind,
    pub preparation_gates: Vec<String>,
    pub device: DeviceModel,
    pub cz_errors: CzErrorParams,
    pub qme_gate_duration: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<Row>,
    pub metadata: Metadata,
}

/// How QME events are realized while simulating one state.
enum QmeDraw<'a> {
    Exact,
    Sampled(&'a mut Stream),
}

impl QmeDraw<'_> {
    fn apply(&mut self, rho: &DensityMatrix, s: &StabilizerObservable) -> Result<DensityMatrix> {
        match self {
            QmeDraw::Exact => dephasing_channel(rho, s),
            QmeDraw::Sampled(r) => qme_sample(s, &mut **r).apply(rho),
        }
    }
}

/// Maps (point index, x, QME draw) to (reference, simulated) states.
type Simulator<'a> = Box<
    dyn Fn(usize, f64, &mut QmeDraw) -> Result<(DensityMatrix, DensityMatrix)> + Send + Sync + 'a,
>;

/// One curve of a sweep: a label, the reference state and a simulator.
struct Curve<'a> {
    label: String,
    stochastic: bool,
    spam_normalize: bool,
    simulate: Simulator<'a>,
}

fn pauli_labels(n_qubits: usize) -> Vec<PauliString> {
    PauliString::non_identity(n_qubits)
}

fn expectations_of(rho: &DensityMatrix) -> Result<Vec<(String, f64)>> {
    let labels = if rho.n_qubits() == 1 {
        [Pauli::X, Pauli::Y, Pauli::Z]
            .iter()
            .map(|&p| PauliString::new(vec![p]))
            .collect::<Result<Vec<_>>>()?
    } else {
        pauli_labels(2)
    };
    labels
        .iter()
        .map(|p| Ok((p.to_string(), expectation(rho, &p.matrix())?)))
        .collect()
}

const TOMOGRAPHY_KEY: u64 = u64::MAX;

fn evaluate_point(curve: &Curve, xi: usize, x: f64, spec: &SweepSpec) -> Result<Row> {
    let key = label_key(&curve.label);
    let (state, reference) = match spec.mode {
        Mode::Sampled { n_trajectories } if curve.stochastic => {
            let runs = (0..n_trajectories)
                .into_par_iter()
                .map(|t| {
                    let mut r = rng::substream(spec.master_seed, &[key, xi as u64, t as u64]);
                    (curve.simulate)(xi, x, &mut QmeDraw::Sampled(&mut r))
                })
                .collect::<Result<Vec<_>>>()?;
            let mean =
                DensityMatrix::mean(runs.iter().map(|r| &r.0)).expect("at least one trajectory");
            (mean, runs[0].1.clone())
        }
        _ => (curve.simulate)(xi, x, &mut QmeDraw::Exact)?,
    };
    let state = match spec.shots {
        Shots::Exact => state,
        Shots::PerSetting(shots) => {
            let seed = rng::substream_seed(spec.master_seed, &[key, xi as u64, TOMOGRAPHY_KEY]);
            reconstruct(&measure_all_settings(&state, shots, seed)?)?.rho
        }
    };
    Ok(Row {
        arm: curve.label.clone(),
        x,
        trace_distance: trace_distance(&state, &reference)?,
        fidelity: fidelity(&state, &reference)?,
        expectations: expectations_of(&state)?,
        seed: spec.master_seed,
        mode: spec.mode.label().to_string(),
    })
}

fn normalize_curve(rows: &mut [Row]) -> Result<()> {
    let survival: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, 1.0 - r.trace_distance)).collect();
    let fid: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.fidelity)).collect();
    let survival = spam_normalize(&survival)?;
    let fid = spam_normalize(&fid)?;
    for ((row, s), f) in rows.iter_mut().zip(survival).zip(fid) {
        row.trace_distance = 1.0 - s.1;
        row.fidelity = f.1;
    }
    Ok(())
}

fn run_curves(curves: &[Curve], spec: &SweepSpec) -> Result<Vec<Row>> {
    let jobs: Vec<(usize, usize)> = (0..curves.len())
        .flat_map(|c| (0..spec.values.len()).map(move |xi| (c, xi)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(c, xi)| evaluate_point(&curves[c], xi, spec.values[xi], spec))
        .collect::<Result<Vec<_>>>()?;
    let n = spec.values.len();
    for (c, chunk) in rows.chunks_mut(n).enumerate() {
        if curves[c].spam_normalize {
            normalize_curve(chunk)?;
        }
    }
    Ok(rows)
}

fn metadata(
    experiment: Experiment,
    spec: &SweepSpec,
    ctx: &ExperimentContext,
    code: Option<CodeName>,
    spam: bool,
    gates: Vec<String>,
) -> Metadata {
    Metadata {
        experiment,
        code,
        mode: spec.mode,
        shots: spec.shots,
        master_seed: spec.master_seed,
        aggregation: matches!(spec.mode, Mode::Sampled { .. }).then(|| "mean_state".to_string()),
        spam_normalized: spam,
        preparation: ctx.preparation,
        preparation_gates: gates,
        device: ctx.device,
        cz_errors: ctx.cz_errors,
        qme_gate_duration: ctx.qme_gate_duration,
    }
}

/// Initial states of the single-qubit grid: 12 points on the xz great circle
/// starting at |0⟩, then ±x, ±y, ±z.
pub fn fig1_grid() -> Vec<BlochVector> {
    let mut out: Vec<BlochVector> = (0..12)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 12.0;
            BlochVector {
                x: t.sin(),
                y: 0.0,
                z: t.cos(),
            }
        })
        .collect();
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut v = [0.0; 3];
            v[axis] = sign;
            out.push(BlochVector {
                x: v[0],
                y: v[1],
                z: v[2],
            });
        }
    }
    out
}

/// Final state of one single-qubit arm for stabilizer `s`.
pub fn single_qubit_arm(
    rho: &DensityMatrix,
    arm: Arm,
    s: &StabilizerObservable,
) -> Result<DensityMatrix> {
    arm_output(rho, arm, s, &mut QmeDraw::Exact)
}

fn arm_output(
    rho: &DensityMatrix,
    arm: Arm,
    s: &StabilizerObservable,
    draw: &mut QmeDraw,
) -> Result<DensityMatrix> {
    match arm {
        Arm::None | Arm::IdentityGate => Ok(rho.clone()),
        Arm::StabilizerGate => apply_unitary(rho, s.unitary()),
        Arm::Qme => draw.apply(rho, s),
        Arm::RealMeasurement => measurement_channel(rho, s),
    }
}

fn grid_curves<'a>(
    spec: &SweepSpec,
    axes: &'a [(String, StabilizerObservable)],
    tag_axes: bool,
) -> Vec<Curve<'a>> {
    let grid = fig1_grid();
    let mut curves = Vec::new();
    for (axis_label, s) in axes {
        for &arm in &spec.arms {
            let grid = grid.clone();
            let label = if tag_axes {
                format!("{}:{axis_label}", arm.as_str())
            } else {
                arm.as_str().to_string()
            };
            curves.push(Curve {
                label,
                stochastic: arm == Arm::Qme,
                spam_normalize: false,
                simulate: Box::new(move |_, x, draw| {
                    let rho = DensityMatrix::from_bloch(grid[x as usize]);
                    Ok((arm_output(&rho, arm, s, draw)?, rho))
                }),
            });
        }
    }
    curves
}

/// Single-qubit Z-stabilizer arms on the Bloch-sphere grid. x is the grid index.
pub fn run_fig1(spec: &SweepSpec, ctx: &ExperimentContext) -> Result<ExperimentResult> {
    spec.validate_for(Experiment::Fig1)?;
    ctx.validate()?;
    let axes = vec![("Z".to_string(), pauli_string(&[Pauli::Z])?)];
    let rows = run_curves(&grid_curves(spec, &axes, false), spec)?;
    Ok(ExperimentResult {
        rows,
        metadata: metadata(Experiment::Fig1, spec, ctx, None, false, Vec::new()),
    })
}

/// Fig-1 arms with stabilizers along x and along (x+y)/√2. Arm labels carry the
/// axis, e.g. `qme:X`, `qme:XY`.
pub fn run_supp_axes(spec: &SweepSpec, ctx: &ExperimentContext) -> Result<ExperimentResult> {
    spec.validate_for(Experiment::SuppAxes)?;
    ctx.validate()?;
    let axes = vec![
        ("X".to_string(), stabilizer_from_axis(1.0, 0.0, 0.0)?),
        (
            "XY".to_string(),
            stabilizer_from_axis(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0)?,
        ),
    ];
    let rows = run_curves(&grid_curves(spec, &axes, true), spec)?;
    Ok(ExperimentResult {
        rows,
        metadata: metadata(Experiment::SuppAxes, spec, ctx, None, false, Vec::new()),
    })
}

fn transversal_curves<'a>(
    spec: &SweepSpec,
    ctx: &'a ExperimentContext,
    code: CodeName,
    stab: &'a StabilizerObservable,
    members: Vec<(String, [[f64; 3]; 2])>,
) -> Result<Vec<Curve<'a>>> {
    let start = ctx.prepare(code, LogicalBit::One)?;
    let ideal = make_code(code).logical_one().clone();
    let mut curves = Vec::new();
    for (label, axes) in members {
        for &arm in &spec.arms {
            let (start, ideal) = (start.clone(), ideal.clone());
            curves.push(Curve {
                label: format!("{label}:{}", arm.as_str()),
                stochastic: arm == Arm::Qme,
                spam_normalize: true,
                simulate: Box::new(move |_, theta, draw| {
                    let err = TransversalError { axes, theta };
                    let mut rho = apply_transversal_error(&start, &err)?;
                    if arm == Arm::Qme {
                        rho = ctx.after_qme(draw.apply(&rho, stab)?)?;
                    }
                    Ok((rho, ideal.clone()))
                }),
            });
        }
    }
    Ok(curves)
}

/// Coherent-error sweep. Arms `1q:*`: |0⟩, R_x(θ), optional QME_Z. Arms `2q:*`:
/// |~1⟩ of the ZZ code, R_x(θ)⊗R_x(θ), optional QME_ZZ. Curves are
/// SPAM-normalized.
pub fn run_fig2(spec: &SweepSpec, ctx: &ExperimentContext) -> Result<ExperimentResult> {
    spec.validate_for(Experiment::Fig2)?;
    ctx.validate()?;
    let z = pauli_string(&[Pauli::Z])?;
    let zz = make_code(CodeName::ZzCode).stabilizer().clone();
    let zero = DensityMatrix::basis(1, 0)?;
    let mut curves = Vec::new();
    for &arm in &spec.arms {
        let (z, zero) = (z.clone(), zero.clone());
        curves.push(Curve {
            label: format!("1q:{}", arm.as_str()),
            stochastic: arm == Arm::Qme,
            spam_normalize: true,
            simulate: Box::new(move |_, theta, draw| {
                let mut rho = apply_unitary(&zero, &gates::rx(theta))?;
                if arm == Arm::Qme {
                    rho = draw.apply(&rho, &z)?;
                }
                Ok((rho, zero.clone()))
            }),
        });
    }
    let two = transversal_curves(
        spec,
        ctx,
        CodeName::ZzCode,
        &zz,
        vec![("2q".into(), [[1.0, 0.0, 0.0]; 2])],
    )?;
    curves.extend(two);
    let rows = run_curves(&curves, spec)?;
    Ok(ExperimentResult {
        rows,
        metadata: metadata(
            Experiment::Fig2,
            spec,
            ctx,
            Some(CodeName::ZzCode),
            true,
            prep_gates(ctx, CodeName::ZzCode, LogicalBit::One),
        ),
    })
}

fn prep_gates(ctx: &ExperimentContext, code: CodeName, which: LogicalBit) -> Vec<String> {
    match ctx.preparation {
        PreparationKind::Exact => Vec::new(),
        PreparationKind::Circuit => preparation_gate_list(code, which),
    }
}

/// Transversal-error family on |~1⟩ of the context's code, with and without
/// QME on the code stabilizer. Arm labels are `<member>:<arm>`.
pub fn run_supp_transversal(spec: &SweepSpec, ctx: &ExperimentContext) -> Result<ExperimentResult> {
    spec.validate_for(Experiment::SuppTransversal)?;
    ctx.validate()?;
    let stab = make_code(ctx.code).stabilizer().clone();
    let members = transversal_family()
        .into_iter()
        .map(|m| (m.label.to_string(), m.axes))
        .collect();
    let curves = transversal_curves(spec, ctx, ctx.code, &stab, members)?;
    let rows = run_curves(&curves, spec)?;
    Ok(ExperimentResult {
        rows,
        metadata: metadata(
            Experiment::SuppTransversal,
            spec,
            ctx,
            Some(ctx.code),
            true,
            prep_gates(ctx, ctx.code, LogicalBit::One),
        ),
    })
}

/// |~0⟩ of the XX code through N pairs of imperfect CZ gates, each gate followed
/// by decoherence; the `qme` arm applies QME_XX after every pair. x is N.
pub fn run_fig3(spec: &SweepSpec, ctx: &ExperimentContext) -> Result<ExperimentResult> {
    spec.validate_for(Experiment::Fig3)?;
    ctx.validate()?;
    let code = make_code(CodeName::XxCode);
    let stab = code.stabilizer().clone();
    let start = ctx.prepare(CodeName::XxCode, LogicalBit::Zero)?;
    let ideal = code.logical_zero().clone();
    let cz = Layer::Cz(ctx.cz_errors);
    let mut curves = Vec::new();
    for &arm in &spec.arms {
        let (start, ideal, stab, cz) = (start.clone(), ideal.clone(), stab.clone(), cz.clone());
        curves.push(Curve {
            label: arm.as_str().to_string(),
            stochastic: arm == Arm::Qme,
            spam_normalize: true,
            simulate: Box::new(move |_, n, draw| {
                let mut rho = start.clone();
                for _ in 0..n as usize {
                    rho = ctx.device.apply_layer(&rho, &cz)?;
                    rho = ctx.device.apply_layer(&rho, &cz)?;
                    if arm == Arm::Qme {
                        rho = ctx.after_qme(draw.apply(&rho, &stab)?)?;
                    }
                }
                Ok((rho, ideal.clone()))
            }),
        });
    }
    let rows = run_curves(&curves, spec)?;
    Ok(ExperimentResult {
        rows,
        metadata: metadata(
            Experiment::Fig3,
            spec,
            ctx,
            Some(CodeName::XxCode),
            true,
            prep_gates(ctx, CodeName::XxCode, LogicalBit::Zero),
        ),
    })
}

pub fn run(
    experiment: Experiment,
    spec: &SweepSpec,
    ctx: &ExperimentContext,
) -> Result<ExperimentResult> {
    match experiment {
        Experiment::Fig1 => run_fig1(spec, ctx),
        Experiment::Fig2 => run_fig2(spec, ctx),
        Experiment::Fig3 => run_fig3(spec, ctx),
        Experiment::SuppAxes => run_supp_axes(spec, ctx),
        Experiment::SuppTransversal => run_supp_transversal(spec, ctx),
    }
}

/// Coefficient of x in a least-squares polynomial fit of the given degree.
/// Abscissae are rescaled to [−1, 1]-sized range before solving.
pub fn linear_coefficient(points: &[(f64, f64)], degree: usize) -> Result<f64> {
    let n = degree + 1;
    if points.len() < n {
        return Err(Error::InvalidSweep(format!(
            "need at least {n} points for a degree-{degree} fit"
        )));
    }
    let scale = points.iter().map(|p| p.0.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::InvalidSweep("all abscissae are zero".into()));
    }
    let mut a = vec![vec![0.0; n + 1]; n];
    for &(x, y) in points {
        let t = x / scale;
        let pows: Vec<f64> = (0..n).map(|k| t.powi(k as i32)).collect();
        for r in 0..n {
            for c in 0..n {
                a[r][c] += pows[r] * pows[c];
            }
            a[r][n] += pows[r] * y;
        }
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        a.swap(col, pivot);
        if a[col][col].abs() < 1e-300 {
            return Err(Error::InvalidSweep("degenerate abscissae".into()));
        }
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *x -= f * p;
                }
            }
        }
    }
    Ok(a[1][n] / a[1][1] / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rows_for<'a>(r: &'a ExperimentResult, arm: &str) -> Vec<&'a Row> {
        r.rows.iter().filter(|row| row.arm == arm).collect()
    }

    fn exp(row: &Row, label: &str) -> f64 {
        row.expectations.iter().find(|(l, _)| l == label).unwrap().1
    }

    fn bloch(row: &Row) -> [f64; 3] {
        [exp(row, "X"), exp(row, "Y"), exp(row, "Z")]
    }

    fn ideal_ctx() -> ExperimentContext {
        ExperimentContext {
            device: DeviceModel::ideal(),
            ..ExperimentContext::default()
        }
    }

    #[test]
    fn fig1_plus_state() {
        let res = run_fig1(&default_sweep(Experiment::Fig1), &ideal_ctx()).unwrap();
        // grid index 3 is |+⟩
        let pick = |arm: &str| bloch(rows_for(&res, arm)[3]);
        for (arm, want) in [
            ("qme", [0.0, 0.0, 0.0]),
            ("identity_gate", [1.0, 0.0, 0.0]),
            ("stabilizer_gate", [-1.0, 0.0, 0.0]),
            ("real_measurement", [0.0, 0.0, 0.0]),
        ] {
            let got = pick(arm);
            for k in 0..3 {
                assert_abs_diff_eq!(got[k], want[k], epsilon = 1e-12);
            }
        }
        for arm in [
            "qme",
            "identity_gate",
            "stabilizer_gate",
            "real_measurement",
        ] {
            let got = bloch(rows_for(&res, arm)[0]);
            assert_abs_diff_eq!(got[2], 1.0, epsilon = 1e-12);
        }
        assert_eq!(res.rows.len(), 4 * FIG1_GRID_LEN);
    }

    #[test]
    fn fig1_qme_projects_polar_state() {
        let rho = DensityMatrix::from_bloch(BlochVector::from_angles(0.7, 0.0));
        let out = single_qubit_arm(&rho, Arm::Qme, &pauli_string(&[Pauli::Z]).unwrap()).unwrap();
        let b = crate::densmat::bloch_vector(&out).unwrap();
        assert_abs_diff_eq!(b.z, 0.7f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(b.z, 0.76484, epsilon = 1e-5);
        assert_abs_diff_eq!(b.x, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fig2_single_qubit_reference_values() {
        let mut spec = default_sweep(Experiment::Fig2);
        spec.values = vec![0.0, 0.3];
        let res = run_fig2(&spec, &ideal_ctx()).unwrap();
        let none = rows_for(&res, "1q:none");
        let qme = rows_for(&res, "1q:qme");
        assert_abs_diff_eq!(1.0 - none[1].trace_distance, 0.85056, epsilon = 1e-5);
        assert_abs_diff_eq!(1.0 - qme[1].trace_distance, 0.97767, epsilon = 1e-5);
        for arm in ["1q:none", "1q:qme", "2q:none", "2q:qme"] {
            assert_abs_diff_eq!(rows_for(&res, arm)[0].trace_distance, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(rows_for(&res, arm)[0].fidelity, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn fig2_matches_closed_forms() {
        let res = run_fig2(&default_sweep(Experiment::Fig2), &ideal_ctx()).unwrap();
        for (arm, f) in [
            (
                "1q:none",
                (|t: f64| (t / 2.0).sin().abs()) as fn(f64) -> f64,
            ),
            ("1q:qme", |t: f64| (t / 2.0).sin().powi(2)),
            ("2q:none", |t: f64| t.sin().abs()),
            ("2q:qme", |t: f64| t.sin().powi(2)),
        ] {
            for row in rows_for(&res, arm) {
                assert_abs_diff_eq!(row.trace_distance, f(row.x), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fig3_landmarks() {
        let ctx = ExperimentContext {
            cz_errors: fig3_calibrated_errors(),
            ..ideal_ctx()
        };
        let res = run_fig3(&default_sweep(Experiment::Fig3), &ctx).unwrap();
        let none = rows_for(&res, "none");
        let qme = rows_for(&res, "qme");
        for (n, row) in none.iter().enumerate() {
            assert_abs_diff_eq!(
                row.fidelity,
                (n as f64 * FIG3_DELTA / 2.0).cos().powi(2),
                epsilon = 1e-10
            );
        }
        assert_abs_diff_eq!(none[10].fidelity, 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(none[40].fidelity, 1.0, epsilon = 1e-10);
        for (n, row) in qme.iter().enumerate() {
            assert_abs_diff_eq!(
                row.fidelity,
                0.5 * (1.0 + FIG3_DELTA.cos().powi(n as i32)),
                epsilon = 1e-10
            );
        }
        assert_abs_diff_eq!(qme[10].fidelity, 0.9417, epsilon = 1e-4);
        assert!(qme.windows(2).all(|w| w[1].fidelity < w[0].fidelity));
        assert_eq!(none[0].fidelity, 1.0);
    }

    #[test]
    fn supp_axes_reference_values() {
        let res = run_supp_axes(&default_sweep(Experiment::SuppAxes), &ideal_ctx()).unwrap();
        let b = |arm: &str, idx: usize| bloch(rows_for(&res, arm)[idx]);
        let zero = b("qme:X", 0);
        let plus = b("qme:X", 3);
        let diag = b("qme:XY", 3);
        for k in 0..3 {
            assert_abs_diff_eq!(zero[k], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(plus[k], [1.0, 0.0, 0.0][k], epsilon = 1e-12);
            assert_abs_diff_eq!(diag[k], [0.5, 0.5, 0.0][k], epsilon = 1e-12);
        }
    }

    #[test]
    fn supp_transversal_reference_values() {
        let mut spec = default_sweep(Experiment::SuppTransversal);
        spec.values = vec![0.0, 0.4, PI];
        let res = run_supp_transversal(&spec, &ideal_ctx()).unwrap();
        assert_abs_diff_eq!(
            rows_for(&res, "YY:none")[0].trace_distance,
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(rows_for(&res, "XX:none")[2].fidelity, 1.0, epsilon = 1e-12);
        assert_eq!(res.rows.len(), 4 * 2 * 3);
    }

    #[test]
    fn transversal_family_is_first_order_insensitive_with_qme() {
        let mut spec = default_sweep(Experiment::SuppTransversal);
        spec.values = (0..=20).map(|k| 0.001 * k as f64).collect();
        let res = run_supp_transversal(&spec, &ideal_ctx()).unwrap();
        for m in transversal_family() {
            let curve = |arm: &str| -> Vec<(f64, f64)> {
                rows_for(&res, &format!("{}:{arm}", m.label))
                    .iter()
                    .map(|r| (r.x, 1.0 - r.trace_distance))
                    .collect()
            };
            let without = linear_coefficient(&curve("none"), 4).unwrap();
            let with = linear_coefficient(&curve("qme"), 4).unwrap();
            if m.label == "YY" {
                // Real rotations leave |00⟩ + |11⟩ invariant: no error at any order.
                assert!(curve("none").iter().all(|p| (p.1 - 1.0).abs() < 1e-12));
                assert!(with.abs() < 1e-9);
                continue;
            }
            assert!(without.abs() > 0.1, "{}: {without}", m.label);
            assert!(
                with.abs() < 0.02 * without.abs(),
                "{}: {with} vs {without}",
                m.label
            );
        }
    }

    #[test]
    fn linear_coefficient_of_polynomial() {
        let pts: Vec<(f64, f64)> = (0..=10)
            .map(|k| {
                let x = 0.002 * k as f64;
                (x, 1.0 - 0.7 * x + 3.0 * x * x - 2.0 * x.powi(4))
            })
            .collect();
        assert_abs_diff_eq!(linear_coefficient(&pts, 4).unwrap(), -0.7, epsilon = 1e-9);
        assert!(linear_coefficient(&pts[..3], 4).is_err());
    }

    #[test]
    fn exact_mode_is_thread_count_independent() {
        let spec = default_sweep(Experiment::Fig3);
        let ctx = ExperimentContext {
            cz_errors: fig3_calibrated_errors(),
            ..ExperimentContext::default()
        };
        let a = run_fig3(&spec, &ctx).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| run_fig3(&spec, &ctx).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_mode_is_reproducible_and_converges() {
        let n = 400;
        let mut spec = default_sweep(Experiment::Fig2);
        spec.values = vec![0.0, 0.3, 0.8];
        spec.master_seed = 7;
        let exact = run_fig2(&spec, &ideal_ctx()).unwrap();
        spec.mode = Mode::Sampled { n_trajectories: n };
        let a = run_fig2(&spec, &ideal_ctx()).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let b = pool.install(|| run_fig2(&spec, &ideal_ctx()).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.metadata.aggregation.as_deref(), Some("mean_state"));
        let bound = 3.0 / (n as f64).sqrt();
        for (e, s) in exact.rows.iter().zip(&a.rows) {
            assert!((e.trace_distance - s.trace_distance).abs() <= bound);
            assert!((e.fidelity - s.fidelity).abs() <= bound);
            for ((_, ev), (_, sv)) in e.expectations.iter().zip(&s.expectations) {
                assert!((ev - sv).abs() <= bound);
            }
        }
    }

    #[test]
    fn sampled_fig3_converges() {
        let n = 300;
        let mut spec = default_sweep(Experiment::Fig3);
        spec.values = vec![0.0, 5.0, 12.0];
        let ctx = ExperimentContext {
            cz_errors: fig3_calibrated_errors(),
            ..ExperimentContext::default()
        };
        let exact = run_fig3(&spec, &ctx).unwrap();
        spec.mode = Mode::Sampled { n_trajectories: n };
        let sampled = run_fig3(&spec, &ctx).unwrap();
        for (e, s) in exact.rows.iter().zip(&sampled.rows) {
            assert!((e.fidelity - s.fidelity).abs() <= 3.0 / (n as f64).sqrt());
        }
    }

    #[test]
    fn qme_does_no_harm_at_zero_error() {
        let mut spec = default_sweep(Experiment::Fig2);
        spec.values = vec![0.0];
        for mode in [Mode::ExactChannel, Mode::Sampled { n_trajectories: 50 }] {
            spec.mode = mode;
            let res = run_fig2(&spec, &ideal_ctx()).unwrap();
            for q in ["1q", "2q"] {
                let none = rows_for(&res, &format!("{q}:none"))[0].trace_distance;
                let qme = rows_for(&res, &format!("{q}:qme"))[0].trace_distance;
                assert!(qme <= none + 1e-12);
            }
        }
    }

    #[test]
    fn finite_shots_add_bounded_noise() {
        let mut spec = default_sweep(Experiment::Fig1);
        spec.values = vec![3.0];
        spec.shots = Shots::PerSetting(10_000);
        let res = run_fig1(&spec, &ideal_ctx()).unwrap();
        let row = rows_for(&res, "identity_gate")[0];
        assert!(row.trace_distance < 0.03 && row.trace_distance > 0.0);
    }

    #[test]
    fn circuit_preparation_is_spam_normalized() {
        let ctx = ExperimentContext {
            preparation: PreparationKind::Circuit,
            ..ExperimentContext::default()
        };
        let res = run_fig2(&default_sweep(Experiment::Fig2), &ctx).unwrap();
        let first = rows_for(&res, "2q:none")[0];
        assert_abs_diff_eq!(first.fidelity, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(first.trace_distance, 0.0, epsilon = 1e-15);
        assert_eq!(res.metadata.preparation_gates.len(), 3);
    }

    #[test]
    fn invalid_sweeps_rejected() {
        let mut spec = default_sweep(Experiment::Fig3);
        spec.values.clear();
        assert!(run_fig3(&spec, &ExperimentContext::default()).is_err());
        let mut spec = default_sweep(Experiment::Fig3);
        spec.arms = vec![Arm::RealMeasurement];
        assert!(run_fig3(&spec, &ExperimentContext::default()).is_err());
        let mut spec = default_sweep(Experiment::Fig1);
        spec.values = vec![18.0];
        assert!(run_fig1(&spec, &ExperimentContext::default()).is_err());
        let mut spec = default_sweep(Experiment::Fig3);
        spec.values = vec![1.5];
        assert!(run_fig3(&spec, &ExperimentContext::default()).is_err());
        assert!(run_fig2(
            &default_sweep(Experiment::Fig3),
            &ExperimentContext::default()
        )
        .is_err());
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.as_str().parse::<Experiment>().unwrap(), e);
        }
    }

    #[test]
    fn decoherence_only_decay_matches_closed_form() {
        let res = run_fig3(
            &default_sweep(Experiment::Fig3),
            &ExperimentContext::default(),
        )
        .unwrap();
        let t_step = 0.065;
        let (g1a, gpa) = (1.0 / 17.0, 1.0 / 5.0 - 0.5 / 17.0);
        let (g1b, gpb) = (1.0 / 39.0, 1.0 / 25.0 - 0.5 / 39.0);
        for row in rows_for(&res, "none") {
            let t = 2.0 * row.x * t_step;
            let f = 0.5
                * (0.5 * (-g1b * t).exp()
                    + 0.5 * (-g1a * t).exp()
                    + (-(g1a / 2.0 + gpa + g1b / 2.0 + gpb) * t).exp());
            assert_abs_diff_eq!(row.fidelity, f, epsilon = 1e-8);
        }
    }
}
