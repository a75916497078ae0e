//! Two-qubit Bell-state stabilizer codes, logical-state preparation and
//! transversal coherent errors.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channels::{pauli_string, Pauli, StabilizerObservable};
use crate::densmat::{apply_unitary, gates, tensor, ComplexMatrix, DensityMatrix};
use crate::error::{invalid, Error, Result};
use crate::noise::{CzErrorParams, DeviceModel, Layer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodeName {
    #[serde(rename = "ZZ_code")]
    ZzCode,
    #[serde(rename = "XX_code")]
    XxCode,
}

impl CodeName {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeName::ZzCode => "ZZ_code",
            CodeName::XxCode => "XX_code",
        }
    }
}

impl fmt::Display for CodeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CodeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ZZ_code" | "zz" | "ZZ" => Ok(CodeName::ZzCode),
            "XX_code" | "xx" | "XX" => Ok(CodeName::XxCode),
            other => Err(invalid("code", format!("unknown code {other:?}"))),
        }
    }
}

/// Logical basis state of a code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LogicalBit {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

#[derive(Debug, Clone)]
pub struct BellCode {
    name: CodeName,
    stabilizer: StabilizerObservable,
    logical_zero: DensityMatrix,
    logical_one: DensityMatrix,
    zero_ket: [Complex64; 4],
    one_ket: [Complex64; 4],
}

fn bell_ket(amps: [f64; 4]) -> [Complex64; 4] {
    amps.map(|a| Complex64::new(a * FRAC_1_SQRT_2, 0.0))
}

pub fn make_code(name: CodeName) -> BellCode {
    let phi_plus = bell_ket([1.0, 0.0, 0.0, 1.0]);
    let (stab, zero_ket) = match name {
        CodeName::ZzCode => ([Pauli::Z, Pauli::Z], bell_ket([1.0, 0.0, 0.0, -1.0])),
        CodeName::XxCode => ([Pauli::X, Pauli::X], bell_ket([0.0, 1.0, 1.0, 0.0])),
    };
    let stabilizer = pauli_string(&stab).expect("two-qubit Pauli string");
    BellCode {
        name,
        stabilizer,
        logical_zero: DensityMatrix::from_pure(&zero_ket).expect("normalized Bell state"),
        logical_one: DensityMatrix::from_pure(&phi_plus).expect("normalized Bell state"),
        zero_ket,
        one_ket: phi_plus,
    }
}

impl BellCode {
    pub fn name(&self) -> CodeName {
        self.name
    }

    pub fn stabilizer(&self) -> &StabilizerObservable {
        &self.stabilizer
    }

    pub fn logical(&self, which: LogicalBit) -> &DensityMatrix {
        match which {
            LogicalBit::Zero => &self.logical_zero,
            LogicalBit::One => &self.logical_one,
        }
    }

    pub fn logical_zero(&self) -> &DensityMatrix {
        &self.logical_zero
    }

    pub fn logical_one(&self) -> &DensityMatrix {
        &self.logical_one
    }

    pub fn logical_ket(&self, which: LogicalBit) -> [Complex64; 4] {
        match which {
            LogicalBit::Zero => self.zero_ket,
            LogicalBit::One => self.one_ket,
        }
    }

    /// α|~0⟩ + β|~1⟩, normalized.
    pub fn superposition(&self, alpha: Complex64, beta: Complex64) -> Result<DensityMatrix> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if norm == 0.0 {
            return Err(invalid("amplitudes", "both zero"));
        }
        let psi: Vec<Complex64> = (0..4)
            .map(|k| (alpha * self.zero_ket[k] + beta * self.one_ket[k]) / norm)
            .collect();
        DensityMatrix::from_pure(&psi)
    }

    /// Tr(P₊ρP₊) = Tr(P₊ρ).
    pub fn codespace_population(&self, rho: &DensityMatrix) -> Result<f64> {
        crate::densmat::expectation(rho, self.stabilizer.projector_plus())
    }
}

/// Rotation by `theta` about `axes[k]` on qubit k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransversalError {
    pub axes: [[f64; 3]; 2],
    pub theta: f64,
}

const AXIS_TOL: f64 = 1e-10;

impl TransversalError {
    pub fn new(axes: [[f64; 3]; 2], theta: f64) -> Result<Self> {
        let e = Self { axes, theta };
        e.validate()?;
        Ok(e)
    }

    /// Rx(θ)⊗Rx(θ).
    pub fn xx(theta: f64) -> Self {
        Self {
            axes: [[1.0, 0.0, 0.0]; 2],
            theta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for a in &self.axes {
            let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (n - 1.0).abs() > AXIS_TOL || !n.is_finite() {
                return Err(Error::NotUnitVector(n));
            }
        }
        if !self.theta.is_finite() {
            return Err(invalid("theta", "must be finite"));
        }
        Ok(())
    }

    pub fn unitary(&self) -> Result<ComplexMatrix> {
        self.validate()?;
        let u1 = gates::rotation(self.axes[0], self.theta);
        let u2 = gates::rotation(self.axes[1], self.theta);
        tensor(&u1, &u2)
    }
}

pub fn apply_transversal_error(
    rho: &DensityMatrix,
    err: &TransversalError,
) -> Result<DensityMatrix> {
    if rho.n_qubits() != 2 {
        return Err(Error::QubitCount {
            expected: 2,
            got: rho.n_qubits(),
        });
    }
    apply_unitary(rho, &err.unitary()?)
}

/// A named transversal-error axis pair, swept over θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransversalFamilyMember {
    pub label: &'static str,
    pub axes: [[f64; 3]; 2],
}

impl TransversalFamilyMember {
    pub fn at(&self, theta: f64) -> TransversalError {
        TransversalError {
            axes: self.axes,
            theta,
        }
    }
}

/// Representative transversal errors: X⊗X, Y⊗Y, X⊗Y and an xy-plane tilt by π/8
/// on both qubits.
pub fn transversal_family() -> Vec<TransversalFamilyMember> {
    let t = std::f64::consts::FRAC_PI_8;
    let tilt = [t.cos(), t.sin(), 0.0];
    vec![
        TransversalFamilyMember {
            label: "XX",
            axes: [[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
        },
        TransversalFamilyMember {
            label: "YY",
            axes: [[0.0, 1.0, 0.0], [0.0, 1.0, 0.0]],
        },
        TransversalFamilyMember {
            label: "XY",
            axes: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
        },
        TransversalFamilyMember {
            label: "tilted",
            axes: [tilt, tilt],
        },
    ]
}

/// How logical states are produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preparation {
    Exact,
    /// Run the preparation circuit on |00⟩ through the given device.
    Circuit(DeviceModel),
}

/// Circuit layers taking |00⟩ to the requested logical state: H⊗H, CZ, then H on
/// qubit 2 combined with the logical flip (Z on qubit 1 or X on qubit 2).
pub fn preparation_layers(code: CodeName, which: LogicalBit) -> Vec<Layer> {
    let h = gates::hadamard();
    let id = gates::id();
    let last = match (code, which) {
        (_, LogicalBit::One) => [id, h.clone()],
        (CodeName::ZzCode, LogicalBit::Zero) => [gates::z(), h.clone()],
        (CodeName::XxCode, LogicalBit::Zero) => [id, gates::x().matmul(&h)],
    };
    vec![
        Layer::SingleQubit([h.clone(), h]),
        Layer::Cz(CzErrorParams::default()),
        Layer::SingleQubit(last),
    ]
}

/// Human-readable gate list of [`preparation_layers`].
pub fn preparation_gate_list(code: CodeName, which: LogicalBit) -> Vec<String> {
    let last = match (code, which) {
        (_, LogicalBit::One) => "H(q2)",
        (CodeName::ZzCode, LogicalBit::Zero) => "Z(q1) H(q2)",
        (CodeName::XxCode, LogicalBit::Zero) => "X.H(q2)",
    };
    vec!["H(q1) H(q2)".into(), "CZ(q1,q2)".into(), last.into()]
}

pub fn prepare_logical(
    code: &BellCode,
    which: LogicalBit,
    prep: &Preparation,
) -> Result<DensityMatrix> {
    match prep {
        Preparation::Exact => Ok(code.logical(which).clone()),
        Preparation::Circuit(device) => {
            device.validate()?;
            let start = DensityMatrix::basis(2, 0)?;
            device.run(&start, &preparation_layers(code.name(), which))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{average_over_branches, BranchChoice};
    use crate::densmat::{expectation, fidelity, trace_distance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn codes() -> [BellCode; 2] {
        [make_code(CodeName::ZzCode), make_code(CodeName::XxCode)]
    }

    #[test]
    fn logical_states_are_stabilized_and_orthogonal() {
        for code in codes() {
            let s = code.stabilizer().unitary().clone();
            for which in [LogicalBit::Zero, LogicalBit::One] {
                let ket = code.logical_ket(which);
                let sk = s.mul_vec(&ket);
                for k in 0..4 {
                    assert!((sk[k] - ket[k]).norm() <= 1e-12);
                }
                assert_abs_diff_eq!(
                    expectation(code.logical(which), &s).unwrap(),
                    1.0,
                    epsilon = 1e-12
                );
            }
            let overlap: Complex64 = (0..4)
                .map(|k| {
                    code.logical_ket(LogicalBit::Zero)[k].conj()
                        * code.logical_ket(LogicalBit::One)[k]
                })
                .sum();
            assert!(overlap.norm() <= 1e-12);
        }
    }

    #[test]
    fn xx_expectation_outside_codespace() {
        let code = make_code(CodeName::XxCode);
        let singlet = bell_ket([0.0, 1.0, -1.0, 0.0]);
        let rho = DensityMatrix::from_pure(&singlet).unwrap();
        assert_abs_diff_eq!(
            expectation(&rho, code.stabilizer().unitary()).unwrap(),
            -1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn code_names_round_trip() {
        for name in [CodeName::ZzCode, CodeName::XxCode] {
            assert_eq!(name.as_str().parse::<CodeName>().unwrap(), name);
        }
        assert!("YY_code".parse::<CodeName>().is_err());
    }

    #[test]
    fn zero_angle_is_identity() {
        let code = make_code(CodeName::ZzCode);
        let rho = code.logical_one();
        let out = apply_transversal_error(rho, &TransversalError::xx(0.0)).unwrap();
        assert!(out.matrix().max_abs_diff(rho.matrix()) <= 1e-15);
    }

    #[test]
    fn pi_rotation_about_x_stabilizes_phi_plus() {
        let code = make_code(CodeName::ZzCode);
        let out = apply_transversal_error(
            code.logical_one(),
            &TransversalError::xx(std::f64::consts::PI),
        )
        .unwrap();
        assert_abs_diff_eq!(
            fidelity(&out, code.logical_one()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn rx_error_matches_brute_force_evolution() {
        let code = make_code(CodeName::ZzCode);
        let theta: f64 = 0.3;
        // Rx(θ) = cos(θ/2) 𝟙 − i sin(θ/2) X, expanded by hand on 4 amplitudes.
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let m = Complex64::new(0.0, -s);
        let rx = [[Complex64::new(c, 0.0), m], [m, Complex64::new(c, 0.0)]];
        let psi = code.logical_ket(LogicalBit::One);
        let mut out = [Complex64::new(0.0, 0.0); 4];
        for (i, o) in out.iter_mut().enumerate() {
            for (j, p) in psi.iter().enumerate() {
                *o += rx[i >> 1][j >> 1] * rx[i & 1][j & 1] * p;
            }
        }
        let expected = DensityMatrix::from_pure(&out).unwrap();
        let got =
            apply_transversal_error(code.logical_one(), &TransversalError::xx(theta)).unwrap();
        assert!(got.matrix().max_abs_diff(expected.matrix()) <= 1e-12);

        // Linear growth in θ for small angles.
        let t1 = trace_distance(
            &apply_transversal_error(code.logical_one(), &TransversalError::xx(1e-3)).unwrap(),
            code.logical_one(),
        )
        .unwrap();
        let t2 = trace_distance(
            &apply_transversal_error(code.logical_one(), &TransversalError::xx(2e-3)).unwrap(),
            code.logical_one(),
        )
        .unwrap();
        assert_abs_diff_eq!(t2 / t1, 2.0, epsilon = 1e-5);
    }

    #[test]
    fn rejects_non_unit_axes() {
        let e = TransversalError {
            axes: [[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]],
            theta: 0.1,
        };
        let rho = make_code(CodeName::XxCode).logical_one().clone();
        assert!(matches!(
            apply_transversal_error(&rho, &e),
            Err(Error::NotUnitVector(_))
        ));
        assert!(TransversalError::new([[0.0; 3]; 2], 0.1).is_err());
    }

    #[test]
    fn rejects_single_qubit_states() {
        let rho = DensityMatrix::basis(1, 0).unwrap();
        assert!(apply_transversal_error(&rho, &TransversalError::xx(0.1)).is_err());
    }

    #[test]
    fn exact_preparation_is_analytic() {
        let code = make_code(CodeName::XxCode);
        let rho = prepare_logical(&code, LogicalBit::Zero, &Preparation::Exact).unwrap();
        let analytic = DensityMatrix::from_pure(&bell_ket([0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(trace_distance(&rho, &analytic).unwrap(), 0.0);
    }

    #[test]
    fn noiseless_circuit_matches_exact_states() {
        for code in codes() {
            for which in [LogicalBit::Zero, LogicalBit::One] {
                let got =
                    prepare_logical(&code, which, &Preparation::Circuit(DeviceModel::ideal()))
                        .unwrap();
                assert!(got.matrix().max_abs_diff(code.logical(which).matrix()) <= 1e-12);
            }
        }
    }

    #[test]
    fn noisy_circuit_has_high_but_imperfect_fidelity() {
        for code in codes() {
            for which in [LogicalBit::Zero, LogicalBit::One] {
                let got =
                    prepare_logical(&code, which, &Preparation::Circuit(DeviceModel::default()))
                        .unwrap();
                let f = fidelity(&got, code.logical(which)).unwrap();
                assert!(f < 1.0 && f > 0.98, "fidelity {f}");
            }
        }
    }

    #[test]
    fn gate_list_has_one_entry_per_layer() {
        for name in [CodeName::ZzCode, CodeName::XxCode] {
            for which in [LogicalBit::Zero, LogicalBit::One] {
                assert_eq!(
                    preparation_gate_list(name, which).len(),
                    preparation_layers(name, which).len()
                );
            }
        }
    }

    #[test]
    fn transversal_family_is_valid() {
        for m in transversal_family() {
            m.at(0.2).validate().unwrap();
        }
    }

    proptest! {
        #[test]
        fn qme_preserves_codespace(re_a in -1.0f64..1.0, im_a in -1.0f64..1.0, re_b in -1.0f64..1.0, im_b in -1.0f64..1.0) {
            prop_assume!(re_a.abs() + im_a.abs() + re_b.abs() + im_b.abs() > 1e-3);
            for code in codes() {
                let rho = code.superposition(Complex64::new(re_a, im_a), Complex64::new(re_b, im_b)).unwrap();
                for choice in [BranchChoice::Identity, BranchChoice::Stabilizer] {
                    let out = average_over_branches(&rho, code.stabilizer(), [choice]).unwrap();
                    prop_assert!(out.matrix().max_abs_diff(rho.matrix()) <= 1e-12);
                }
            }
        }

        #[test]
        fn transversal_error_preserves_purity(
            theta in -6.0f64..6.0,
            a in prop::array::uniform3(-1.0f64..1.0),
            b in prop::array::uniform3(-1.0f64..1.0),
        ) {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(na > 1e-3 && nb > 1e-3);
            let err = TransversalError::new([a.map(|v| v / na), b.map(|v| v / nb)], theta).unwrap();
            let rho = make_code(CodeName::XxCode).logical_zero().clone();
            let out = apply_transversal_error(&rho, &err).unwrap();
            prop_assert!((out.purity() - rho.purity()).abs() <= 1e-12);
        }
    }

    #[test]
    fn generic_errors_leak_out_of_codespace() {
        let generic = [[0.48, 0.6, 0.64], [0.0, 0.8, 0.6]];
        for code in codes() {
            for which in [LogicalBit::Zero, LogicalBit::One] {
                let rho = code.logical(which);
                for k in 1..=20 {
                    let theta = 0.15 * k as f64;
                    let err = TransversalError::new(generic, theta).unwrap();
                    let out = apply_transversal_error(rho, &err).unwrap();
                    let p = code.codespace_population(&out).unwrap();
                    assert!(p < 1.0 - 1e-9, "{} {which:?} θ={theta}: {p}", code.name());
                }
            }
        }
    }
}
