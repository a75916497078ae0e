//! Decoherence and CZ-gate error model.
//!
//! Times for coherence are in microseconds and gate durations in nanoseconds,
//! matching how device tables usually report them; rates are in µs⁻¹ and every
//! channel takes its duration in µs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::Channel;
use crate::densmat::{embed, gates, tensor, ComplexMatrix, DensityMatrix, ONE};
use crate::error::{invalid, Error, Result};

/// T1 / T2R pair for one operating point, µs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceTimes {
    pub t1: f64,
    pub t2r: f64,
}

impl CoherenceTimes {
    pub fn gamma1(&self) -> Result<f64> {
        gamma1(self.t1)
    }

    pub fn gamma_phi(&self) -> Result<f64> {
        gamma_phi(self.t1, self.t2r)
    }
}

/// Coherence of one qubit at its idle point and along the CZ trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitCoherence {
    pub t1: f64,
    pub t2r: f64,
    pub t1_cz: f64,
    pub t2r_cz: f64,
}

impl QubitCoherence {
    /// Qubit 1 of the reference device (the one driven through the CZ trajectory).
    pub const REFERENCE_Q1: QubitCoherence = QubitCoherence {
        t1: 23.0,
        t2r: 13.0,
        t1_cz: 17.0,
        t2r_cz: 5.0,
    };

    /// Qubit 2 of the reference device; its CZ-trajectory values equal idle.
    pub const REFERENCE_Q2: QubitCoherence = QubitCoherence {
        t1: 39.0,
        t2r: 25.0,
        t1_cz: 39.0,
        t2r_cz: 25.0,
    };

    pub fn new(t1: f64, t2r: f64, t1_cz: f64, t2r_cz: f64) -> Result<Self> {
        let c = Self {
            t1,
            t2r,
            t1_cz,
            t2r_cz,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        gamma_phi(self.t1, self.t2r)?;
        gamma_phi(self.t1_cz, self.t2r_cz)?;
        Ok(())
    }

    pub fn idle(&self) -> CoherenceTimes {
        CoherenceTimes {
            t1: self.t1,
            t2r: self.t2r,
        }
    }

    pub fn cz(&self) -> CoherenceTimes {
        CoherenceTimes {
            t1: self.t1_cz,
            t2r: self.t2r_cz,
        }
    }
}

/// Gate durations and the inter-pulse gap, ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateTiming {
    pub t_1qb: f64,
    pub t_cz: f64,
    pub gap: f64,
}

impl GateTiming {
    pub const REFERENCE: GateTiming = GateTiming {
        t_1qb: 30.0,
        t_cz: 60.0,
        gap: 5.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_1qb", self.t_1qb),
            ("t_cz", self.t_cz),
            ("gap", self.gap),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(
                    name,
                    format!("must be a finite non-negative duration, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Decoherence window of a single-qubit layer, µs.
    pub fn single_qubit_step_us(&self) -> f64 {
        ns_to_us(self.t_1qb + self.gap)
    }

    /// Decoherence window of a CZ layer, µs.
    pub fn cz_step_us(&self) -> f64 {
        ns_to_us(self.t_cz + self.gap)
    }
}

pub fn ns_to_us(ns: f64) -> f64 {
    ns * 1e-3
}

/// Coherent and leakage error parameters of one CZ gate.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CzErrorParams {
    /// CPHASE over-rotation, rad.
    pub phi: f64,
    /// Single-qubit Z over-rotations, rad.
    pub theta1: f64,
    pub theta2: f64,
    /// Leakage probability from |11⟩ per gate.
    pub lam: f64,
}

impl CzErrorParams {
    pub fn new(phi: f64, theta1: f64, theta2: f64, lam: f64) -> Result<Self> {
        let p = Self {
            phi,
            theta1,
            theta2,
            lam,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lam) {
            return Err(invalid(
                "lam",
                format!("leakage rate must lie in [0, 1], got {}", self.lam),
            ));
        }
        for (name, v) in [
            ("phi", self.phi),
            ("theta1", self.theta1),
            ("theta2", self.theta2),
        ] {
            if !v.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.phi, self.theta1, self.theta2, self.lam]
    }
}

pub fn gamma1(t1: f64) -> Result<f64> {
    if t1.is_nan() || t1 <= 0.0 {
        return Err(invalid("t1", format!("must be positive, got {t1}")));
    }
    Ok(1.0 / t1)
}

/// Pure-dephasing rate 1/T2R − 1/(2 T1).
pub fn gamma_phi(t1: f64, t2r: f64) -> Result<f64> {
    gamma1(t1)?;
    if t2r.is_nan() || t2r <= 0.0 {
        return Err(invalid("t2r", format!("must be positive, got {t2r}")));
    }
    if t2r > 2.0 * t1 {
        return Err(invalid(
            "t2r",
            format!(
                "T2R = {t2r} exceeds 2·T1 = {} (negative dephasing rate)",
                2.0 * t1
            ),
        ));
    }
    Ok((1.0 / t2r - 1.0 / (2.0 * t1)).max(0.0))
}

fn check_rate_time(rate: f64, t: f64) -> Result<()> {
    if rate.is_nan() || rate < 0.0 {
        return Err(invalid("rate", format!("must be non-negative, got {rate}")));
    }
    if t.is_nan() || t < 0.0 {
        return Err(invalid("t", format!("must be non-negative, got {t}")));
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn m2(a: f64, b: f64, cc: f64, d: f64) -> ComplexMatrix {
    ComplexMatrix::from_real(2, &[a, b, cc, d]).expect("2x2")
}

/// A₁ = diag(1, e^{−Γ₁t/2}), A₂ = √(1 − e^{−Γ₁t}) |0⟩⟨1|.
pub fn amp_damp_kraus(g1: f64, t: f64) -> Result<[ComplexMatrix; 2]> {
    check_rate_time(g1, t)?;
    let decay = (-g1 * t).exp();
    Ok([
        m2(1.0, 0.0, 0.0, (-g1 * t / 2.0).exp()),
        m2(0.0, (1.0 - decay).sqrt(), 0.0, 0.0),
    ])
}

/// D₁ = e^{−Γφt/2} 1, D₂ = √(1 − e^{−Γφt}) |0⟩⟨0|, D₃ = √(1 − e^{−Γφt}) |1⟩⟨1|.
pub fn dephase_kraus(gphi: f64, t: f64) -> Result<[ComplexMatrix; 3]> {
    check_rate_time(gphi, t)?;
    let keep = (-gphi * t / 2.0).exp();
    let s = (1.0 - (-gphi * t).exp()).sqrt();
    Ok([
        m2(keep, 0.0, 0.0, keep),
        m2(s, 0.0, 0.0, 0.0),
        m2(0.0, 0.0, 0.0, s),
    ])
}

/// Single-qubit Kraus set {A_i D_j}: dephasing followed by amplitude damping.
pub fn decoherence_kraus(times: CoherenceTimes, t: f64) -> Result<Vec<ComplexMatrix>> {
    let a = amp_damp_kraus(times.gamma1()?, t)?;
    let d = dephase_kraus(times.gamma_phi()?, t)?;
    let mut out = Vec::with_capacity(6);
    for ai in &a {
        for dj in &d {
            out.push(ai.matmul(dj));
        }
    }
    Ok(out)
}

/// Decoherence channel for duration `t` (µs) on `qubit` of the register.
pub fn decoherence_channel_for(
    times: CoherenceTimes,
    t: f64,
    qubit: usize,
    n_qubits: usize,
) -> Result<Channel> {
    let kraus = decoherence_kraus(times, t)?
        .iter()
        .map(|k| embed(k, qubit, n_qubits))
        .collect::<Result<Vec<_>>>()?;
    Channel::new(kraus)
}

pub fn decoherence_channel(
    rho: &DensityMatrix,
    qubit_index: usize,
    times: CoherenceTimes,
    t: f64,
) -> Result<DensityMatrix> {
    if qubit_index >= rho.n_qubits() {
        return Err(Error::QubitIndex {
            index: qubit_index,
            n_qubits: rho.n_qubits(),
        });
    }
    decoherence_channel_for(times, t, qubit_index, rho.n_qubits())?.apply(rho)
}

/// L₁ = diag(1, 1, 1, √(1−λ)), L₂ = √λ |10⟩⟨11|.
pub fn leakage_kraus(lam: f64) -> Result<[ComplexMatrix; 2]> {
    check_lam(lam)?;
    let mut l1 = ComplexMatrix::identity(4)?;
    l1[(3, 3)] = c((1.0 - lam).sqrt());
    let mut l2 = ComplexMatrix::zeros(4)?;
    l2[(2, 3)] = c(lam.sqrt());
    Ok([l1, l2])
}

/// The leakage pair with √λ on the |10⟩⟨10| diagonal entry instead of
/// |10⟩⟨11|. Σ K†K = diag(1, 1, 1 + λ, 1 − λ), so this set is not trace
/// preserving; it exists to document why [`leakage_kraus`] differs.
pub fn leakage_kraus_diagonal_placement(lam: f64) -> Result<[ComplexMatrix; 2]> {
    check_lam(lam)?;
    let [l1, _] = leakage_kraus(lam)?;
    let mut l2 = ComplexMatrix::zeros(4)?;
    l2[(2, 2)] = c(lam.sqrt());
    Ok([l1, l2])
}

fn check_lam(lam: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&lam) {
        return Err(invalid(
            "lam",
            format!("leakage rate must lie in [0, 1], got {lam}"),
        ));
    }
    Ok(())
}

pub fn cz_ideal() -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, ONE, ONE, -ONE]).expect("4x4")
}

/// diag(1, 1, 1, e^{iφ}).
pub fn cphase(phi: f64) -> ComplexMatrix {
    ComplexMatrix::diagonal(&[ONE, ONE, ONE, Complex64::from_polar(1.0, phi)]).expect("4x4")
}

/// (R_Z(θ₁) ⊗ R_Z(θ₂)) · CPHASE(φ) · CZ. All three factors are diagonal.
pub fn cz_error_unitary(p: &CzErrorParams) -> ComplexMatrix {
    let rz = tensor(&gates::rz(p.theta1), &gates::rz(p.theta2)).expect("2x2 factors");
    rz.matmul(&cphase(p.phi)).matmul(&cz_ideal())
}

/// Imperfect CZ as a channel: coherent part, then leakage.
pub fn cz_channel(p: &CzErrorParams) -> Result<Channel> {
    p.validate()?;
    let u = cz_error_unitary(p);
    let [l1, l2] = leakage_kraus(p.lam)?;
    let mut kraus = vec![l1.matmul(&u)];
    if p.lam > 0.0 {
        kraus.push(l2.matmul(&u));
    }
    Channel::new(kraus)
}

/// Ideal CZ, CPHASE(φ), R_Z(θ₁)⊗R_Z(θ₂), then leakage(λ).
pub fn cz_with_errors(rho: &DensityMatrix, p: &CzErrorParams) -> Result<DensityMatrix> {
    if rho.n_qubits() != 2 {
        return Err(Error::QubitCount {
            expected: 2,
            got: rho.n_qubits(),
        });
    }
    cz_channel(p)?.apply(rho)
}

/// One time step of a two-qubit circuit.
#[derive(Debug, Clone)]
pub enum Layer {
    /// One single-qubit gate per qubit (use the identity for idle qubits).
    SingleQubit([ComplexMatrix; 2]),
    /// A CZ with the given error parameters.
    Cz(CzErrorParams),
}

/// Two-qubit device: coherence of each qubit, gate timing, and whether
/// decoherence is applied after each layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub qubits: [QubitCoherence; 2],
    pub timing: GateTiming,
    pub decoherence: bool,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            qubits: [QubitCoherence::REFERENCE_Q1, QubitCoherence::REFERENCE_Q2],
            timing: GateTiming::REFERENCE,
            decoherence: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    SingleQubit,
    Cz,
}

/// Decoherence applied to both qubits after one layer.
#[derive(Debug, Clone)]
pub struct DecoherenceLayer {
    channels: Vec<Channel>,
}

impl DecoherenceLayer {
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let mut out = rho.clone();
        for ch in &self.channels {
            out = ch.apply(&out)?;
        }
        Ok(out)
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }
}

impl DeviceModel {
    /// Noise-free device: decoherence disabled.
    pub fn ideal() -> Self {
        Self {
            decoherence: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for q in &self.qubits {
            q.validate()?;
        }
        self.timing.validate()
    }

    /// Channels applied after a layer of the given kind: each qubit decays for
    /// gate time + gap, using CZ-trajectory coherence during CZ layers.
    pub fn decoherence_after(&self, kind: LayerKind) -> Result<DecoherenceLayer> {
        if !self.decoherence {
            return Ok(DecoherenceLayer {
                channels: Vec::new(),
            });
        }
        let t = match kind {
            LayerKind::SingleQubit => self.timing.single_qubit_step_us(),
            LayerKind::Cz => self.timing.cz_step_us(),
        };
        let channels = self
            .qubits
            .iter()
            .enumerate()
            .map(|(k, q)| {
                let times = match kind {
                    LayerKind::SingleQubit => q.idle(),
                    LayerKind::Cz => q.cz(),
                };
                decoherence_channel_for(times, t, k, 2)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DecoherenceLayer { channels })
    }

    pub fn apply_layer(&self, rho: &DensityMatrix, layer: &Layer) -> Result<DensityMatrix> {
        if rho.n_qubits() != 2 {
            return Err(Error::QubitCount {
                expected: 2,
                got: rho.n_qubits(),
            });
        }
        let (out, kind) = match layer {
            Layer::SingleQubit([a, b]) => {
                let u = tensor(a, b)?;
                (
                    crate::densmat::apply_unitary(rho, &u)?,
                    LayerKind::SingleQubit,
                )
            }
            Layer::Cz(p) => (cz_with_errors(rho, p)?, LayerKind::Cz),
        };
        self.decoherence_after(kind)?.apply(&out)
    }

    pub fn run(&self, rho: &DensityMatrix, layers: &[Layer]) -> Result<DensityMatrix> {
        layers
            .iter()
            .try_fold(rho.clone(), |acc, l| self.apply_layer(&acc, l))
    }
}
