//! Least-squares estimation of CZ error parameters from snapshots taken after
//! repeated gates.
//!
//! Step k of the forward model applies k imperfect CZ gates to the initial
//! state, each followed by CZ-trajectory decoherence on both qubits. The
//! objective is the squared distance between measured and predicted values of
//! all 15 two-qubit Pauli expectations, summed over snapshots.
//!
//! λ is optimized through λ = sin²(v), which keeps it in [0, 1] while leaving
//! λ = 0 reachable.

mod nelder_mead;

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nelder_mead::{axis_simplex, minimize, Options, Outcome};

use crate::channels::PauliString;
use crate::densmat::{ComplexMatrix, DensityMatrix};
use crate::error::{Error, Result};
use crate::noise::{cz_channel, CzErrorParams, DeviceModel, LayerKind};
use crate::tomography::TomographyRecord;

pub const N_PAULI: usize = 15;

const SIMPLEX_STEP: f64 = 0.05;
const RESTART_STEP: f64 = 1e-3;
const MAX_RESTARTS: usize = 2;
const START_OFFSET: f64 = 0.1;
const GRADIENT_STEP: f64 = 1e-7;

/// Measured data at one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotData {
    Tomography(TomographyRecord),
    /// Pauli label → ⟨P⟩; must cover all 15 non-identity two-qubit strings.
    Expectations(BTreeMap<String, f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub data: SnapshotData,
}

impl Snapshot {
    fn values(&self) -> Result<[f64; N_PAULI]> {
        let map = match &self.data {
            SnapshotData::Tomography(rec) => rec.expectations()?,
            SnapshotData::Expectations(m) => m.clone(),
        };
        let mut out = [0.0; N_PAULI];
        for (slot, p) in out.iter_mut().zip(PauliString::non_identity(2)) {
            let label = p.to_string();
            *slot = *map.get(&label).ok_or_else(|| {
                Error::InvalidProblem(format!("snapshot at step {} lacks ⟨{label}⟩", self.step))
            })?;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct FitProblem {
    snapshots: Vec<Snapshot>,
    initial_state: DensityMatrix,
    device: DeviceModel,
}

impl FitProblem {
    /// Sorts snapshots by step; rejects fewer than two or repeated steps.
    pub fn new(
        mut snapshots: Vec<Snapshot>,
        initial_state: DensityMatrix,
        device: DeviceModel,
    ) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(Error::InvalidProblem(format!(
                "need at least 2 snapshots, got {}",
                snapshots.len()
            )));
        }
        if initial_state.n_qubits() != 2 {
            return Err(Error::QubitCount {
                expected: 2,
                got: initial_state.n_qubits(),
            });
        }
        device.validate()?;
        snapshots.sort_by_key(|s| s.step);
        if let Some(w) = snapshots.windows(2).find(|w| w[0].step == w[1].step) {
            return Err(Error::InvalidProblem(format!(
                "duplicate step {}",
                w[0].step
            )));
        }
        for s in &snapshots {
            s.values()?;
        }
        Ok(Self {
            snapshots,
            initial_state,
            device,
        })
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn steps(&self) -> Vec<usize> {
        self.snapshots.iter().map(|s| s.step).collect()
    }

    pub fn initial_state(&self) -> &DensityMatrix {
        &self.initial_state
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: CzErrorParams,
    /// Euclidean norm of the residual vector over all snapshots.
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// 16×16 superoperator on row-major vec(ρ).
#[derive(Clone)]
struct Superop(Vec<Complex64>);

impl Superop {
    fn identity() -> Self {
        let mut m = vec![Complex64::new(0.0, 0.0); 256];
        for k in 0..16 {
            m[k * 16 + k] = Complex64::new(1.0, 0.0);
        }
        Self(m)
    }

    fn from_kraus(kraus: &[ComplexMatrix]) -> Self {
        let mut m = vec![Complex64::new(0.0, 0.0); 256];
        for k in kraus {
            for i in 0..4 {
                for j in 0..4 {
                    for a in 0..4 {
                        let kia = k[(i, a)];
                        if kia == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        for b in 0..4 {
                            m[(i * 4 + j) * 16 + a * 4 + b] += kia * k[(j, b)].conj();
                        }
                    }
                }
            }
        }
        Self(m)
    }

    /// `self` applied after `first`.
    fn after(&self, first: &Superop) -> Superop {
        let mut m = vec![Complex64::new(0.0, 0.0); 256];
        for r in 0..16 {
            for k in 0..16 {
                let a = self.0[r * 16 + k];
                for c in 0..16 {
                    m[r * 16 + c] += a * first.0[k * 16 + c];
                }
            }
        }
        Superop(m)
    }

    fn apply(&self, v: &[Complex64; 16]) -> [Complex64; 16] {
        let mut out = [Complex64::new(0.0, 0.0); 16];
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.0[r * 16..r * 16 + 16]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum();
        }
        out
    }
}

/// Precomputed pieces of the forward model that do not depend on the CZ params.
struct Model {
    decoherence: Superop,
    initial: [Complex64; 16],
    steps: Vec<usize>,
    measured: Vec<[f64; N_PAULI]>,
    /// Transposed Pauli matrices so that ⟨P⟩ = Σ ρ_ij Pᵀ_ij.
    paulis: Vec<[Complex64; 16]>,
}

impl Model {
    fn new(problem: &FitProblem) -> Result<Self> {
        let layer = problem.device.decoherence_after(LayerKind::Cz)?;
        let decoherence = layer
            .channels()
            .iter()
            .fold(Superop::identity(), |acc, ch| {
                Superop::from_kraus(ch.kraus()).after(&acc)
            });
        let mut initial = [Complex64::new(0.0, 0.0); 16];
        initial.copy_from_slice(problem.initial_state.matrix().as_slice());
        let paulis = PauliString::non_identity(2)
            .iter()
            .map(|p| {
                let m = p.matrix();
                let mut t = [Complex64::new(0.0, 0.0); 16];
                for i in 0..4 {
                    for j in 0..4 {
                        t[i * 4 + j] = m[(j, i)];
                    }
                }
                t
            })
            .collect();
        Ok(Self {
            decoherence,
            initial,
            steps: problem.steps(),
            measured: problem
                .snapshots
                .iter()
                .map(Snapshot::values)
                .collect::<Result<_>>()?,
            paulis,
        })
    }

    fn predict(&self, p: &CzErrorParams) -> Result<Vec<[f64; N_PAULI]>> {
        let step = self
            .decoherence
            .after(&Superop::from_kraus(cz_channel(p)?.kraus()));
        let mut v = self.initial;
        let mut done = 0;
        let mut out = Vec::with_capacity(self.steps.len());
        for &target in &self.steps {
            while done < target {
                v = step.apply(&v);
                done += 1;
            }
            let mut e = [0.0; N_PAULI];
            for (slot, pt) in e.iter_mut().zip(&self.paulis) {
                *slot = v.iter().zip(pt).map(|(a, b)| (a * b).re).sum();
            }
            out.push(e);
        }
        Ok(out)
    }

    fn objective(&self, p: &CzErrorParams) -> Result<f64> {
        let pred = self.predict(p)?;
        Ok(pred
            .iter()
            .zip(&self.measured)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
            .sum())
    }
}

/// Forward-simulated Pauli expectations at every snapshot step, in step order
/// and in [`PauliString::non_identity`] order.
pub fn predict_expectations(
    params: &CzErrorParams,
    problem: &FitProblem,
) -> Result<Vec<[f64; N_PAULI]>> {
    params.validate()?;
    Model::new(problem)?.predict(params)
}

/// Sum of squared residuals at `params`.
pub fn objective(problem: &FitProblem, params: &CzErrorParams) -> Result<f64> {
    params.validate()?;
    Model::new(problem)?.objective(params)
}

fn from_internal(u: &[f64]) -> CzErrorParams {
    CzErrorParams {
        phi: u[0],
        theta1: u[1],
        theta2: u[2],
        lam: u[3].sin().powi(2),
    }
}

fn to_internal(p: &CzErrorParams) -> Vec<f64> {
    vec![p.phi, p.theta1, p.theta2, p.lam.sqrt().asin()]
}

fn gradient(model: &Model, p: &CzErrorParams) -> Result<[f64; 4]> {
    let x = p.as_array();
    let mut g = [0.0; 4];
    for (i, gi) in g.iter_mut().enumerate() {
        let shifted = |d: f64| {
            let mut y = x;
            y[i] += d;
            CzErrorParams {
                phi: y[0],
                theta1: y[1],
                theta2: y[2],
                lam: y[3],
            }
        };
        let h = GRADIENT_STEP;
        // λ sits on a bound: fall back to one-sided differences there.
        let (lo, hi) = if i == 3 {
            ((x[3] - h).max(0.0), (x[3] + h).min(1.0))
        } else {
            (x[i] - h, x[i] + h)
        };
        let f_hi = model.objective(&shifted(hi - x[i]))?;
        let f_lo = model.objective(&shifted(lo - x[i]))?;
        *gi = (f_hi - f_lo) / (hi - lo);
    }
    Ok(g)
}

/// Negative finite-difference gradient of the objective in (φ, θ₁, θ₂, λ).
/// The fitter orients its initial simplex along the signs of this vector.
pub fn descent_direction(problem: &FitProblem, params: &CzErrorParams) -> Result<[f64; 4]> {
    params.validate()?;
    let g = gradient(&Model::new(problem)?, params)?;
    Ok(g.map(|v| -v))
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let y = x.rem_euclid(two_pi);
    if y > std::f64::consts::PI {
        y - two_pi
    } else {
        y
    }
}

fn fit_from(model: &Model, start: &CzErrorParams) -> Result<Outcome> {
    let dir = gradient(model, start)?.map(|g| if g > 0.0 { -1.0 } else { 1.0 });
    let f = |u: &[f64]| model.objective(&from_internal(u)).unwrap_or(f64::INFINITY);
    let opts = Options::default();
    let x0 = to_internal(start);
    let mut best = minimize(f, axis_simplex(&x0, &dir.map(|d| d * SIMPLEX_STEP)), opts);
    let mut iterations = best.iterations;
    for _ in 0..MAX_RESTARTS {
        let again = minimize(
            f,
            axis_simplex(&best.x, &dir.map(|d| d * RESTART_STEP)),
            opts,
        );
        iterations += again.iterations;
        let improved = again.f < best.f;
        if again.f <= best.f {
            best = again;
        }
        if !improved {
            break;
        }
    }
    best.iterations = iterations;
    Ok(best)
}

fn param_norm(p: &CzErrorParams) -> f64 {
    p.as_array().iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn wrapped(p: CzErrorParams) -> CzErrorParams {
    CzErrorParams {
        phi: wrap_angle(p.phi),
        theta1: wrap_angle(p.theta1),
        theta2: wrap_angle(p.theta2),
        lam: p.lam.clamp(0.0, 1.0),
    }
}

/// Nelder–Mead fit from the guess and the four (θ₁, θ₂) corners at ±0.1 around
/// it. The lowest residual wins; near-ties go to the smallest parameter norm.
pub fn fit_cz_params(problem: &FitProblem, initial_guess: &CzErrorParams) -> Result<FitResult> {
    initial_guess.validate()?;
    let model = Model::new(problem)?;
    let mut starts = vec![*initial_guess];
    for s1 in [-1.0, 1.0] {
        for s2 in [-1.0, 1.0] {
            starts.push(CzErrorParams {
                theta1: initial_guess.theta1 + s1 * START_OFFSET,
                theta2: initial_guess.theta2 + s2 * START_OFFSET,
                ..*initial_guess
            });
        }
    }
    let outcomes = starts
        .par_iter()
        .map(|s| fit_from(&model, s))
        .collect::<Result<Vec<_>>>()?;

    let iterations = outcomes.iter().map(|o| o.iterations).sum();
    let best = outcomes
        .into_iter()
        .map(|o| (wrapped(from_internal(&o.x)), o))
        .reduce(|a, b| {
            let tol = 1e-12 * (1.0 + a.1.f.abs().max(b.1.f.abs()));
            let better = if (a.1.f - b.1.f).abs() <= tol {
                param_norm(&b.0) < param_norm(&a.0)
            } else {
                b.1.f < a.1.f
            };
            if better {
                b
            } else {
                a
            }
        })
        .expect("at least one start");
    Ok(FitResult {
        params: best.0,
        residual_norm: best.1.f.max(0.0).sqrt(),
        iterations,
        converged: best.1.converged,
    })
}
