//! Measurement channels, dephasing channels along arbitrary stabilizers, and the
//! stochastic QME sampler.
//!
//! For an involutive observable `S` with eigenprojectors `P± = (1 ± S)/2`, the
//! non-selective measurement `ρ ↦ P₊ρP₊ + P₋ρP₋` equals the dephasing map
//! `ρ ↦ ½ρ + ½SρS†`. QME realises the right-hand side by applying `S` (as a
//! product of single-qubit gates) with probability ½ on each run.

use std::fmt;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::densmat::{
    apply_kraus_unchecked, gates, kraus_completeness_residual, tensor, ComplexMatrix, DensityMatrix,
};
use crate::error::{invalid, Error, Result};

const UNIT_TOL: f64 = 1e-10;
const KRAUS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> ComplexMatrix {
        match self {
            Pauli::I => gates::id(),
            Pauli::X => gates::x(),
            Pauli::Y => gates::y(),
            Pauli::Z => gates::z(),
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Tensor product of Paulis, one per qubit (leftmost = qubit 0).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString(Vec<Pauli>);

impl PauliString {
    pub fn new(labels: Vec<Pauli>) -> Result<Self> {
        if labels.is_empty() || labels.len() > 2 {
            return Err(invalid(
                "labels",
                format!("expected 1 or 2 Paulis, got {}", labels.len()),
            ));
        }
        Ok(Self(labels))
    }

    pub fn parse(s: &str) -> Result<Self> {
        let labels = s
            .chars()
            .map(|c| {
                Pauli::from_char(c)
                    .ok_or_else(|| invalid("labels", format!("unknown Pauli `{c}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(labels)
    }

    pub fn labels(&self) -> &[Pauli] {
        &self.0
    }

    pub fn n_qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    pub fn matrix(&self) -> ComplexMatrix {
        match self.0.as_slice() {
            [p] => p.matrix(),
            [a, b] => tensor(&a.matrix(), &b.matrix()).expect("2x2 factors"),
            _ => unreachable!("length checked at construction"),
        }
    }

    /// All 4ⁿ − 1 non-identity strings, singles first in interleaved qubit
    /// order (XI, IX, YI, IY, ZI, IZ), then correlators XX … ZZ.
    pub fn non_identity(n_qubits: usize) -> Vec<PauliString> {
        let xyz = [Pauli::X, Pauli::Y, Pauli::Z];
        match n_qubits {
            1 => xyz.iter().map(|&p| PauliString(vec![p])).collect(),
            2 => {
                let mut out = Vec::with_capacity(15);
                for &p in &xyz {
                    out.push(PauliString(vec![p, Pauli::I]));
                    out.push(PauliString(vec![Pauli::I, p]));
                }
                for &a in &xyz {
                    for &b in &xyz {
                        out.push(PauliString(vec![a, b]));
                    }
                }
                out
            }
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.as_char())?;
        }
        Ok(())
    }
}

/// Unitary, Hermitian, involutive observable with its ±1 eigenprojectors and
/// a per-qubit gate decomposition.
#[derive(Debug, Clone)]
pub struct StabilizerObservable {
    unitary: ComplexMatrix,
    projector_plus: ComplexMatrix,
    projector_minus: ComplexMatrix,
    gate_list: Vec<ComplexMatrix>,
    label: String,
}

impl StabilizerObservable {
    fn from_gates(gate_list: Vec<ComplexMatrix>, label: String) -> Self {
        let unitary = match gate_list.as_slice() {
            [g] => g.clone(),
            [a, b] => tensor(a, b).expect("2x2 factors"),
            _ => unreachable!("one or two factors"),
        };
        let id = ComplexMatrix::identity(unitary.dim()).expect("valid dim");
        let projector_plus = (&id + &unitary).scale_real(0.5);
        let projector_minus = (&id - &unitary).scale_real(0.5);
        Self {
            unitary,
            projector_plus,
            projector_minus,
            gate_list,
            label,
        }
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }

    pub fn projector_plus(&self) -> &ComplexMatrix {
        &self.projector_plus
    }

    pub fn projector_minus(&self) -> &ComplexMatrix {
        &self.projector_minus
    }

    /// Single-qubit gates whose tensor product is the stabilizer.
    pub fn gate_list(&self) -> &[ComplexMatrix] {
        &self.gate_list
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.gate_list.len()
    }

    fn check_dim(&self, rho: &DensityMatrix) -> Result<()> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(rho.dim(), self.dim()));
        }
        Ok(())
    }
}

/// S = n·σ for a unit axis.
pub fn stabilizer_from_axis(nx: f64, ny: f64, nz: f64) -> Result<StabilizerObservable> {
    let norm = (nx * nx + ny * ny + nz * nz).sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitVector(norm));
    }
    let s = &(&gates::x().scale_real(nx) + &gates::y().scale_real(ny)) + &gates::z().scale_real(nz);
    let label = match (nx, ny, nz) {
        (x, y, z) if y == 0.0 && z == 0.0 && x == 1.0 => "X".to_string(),
        (x, y, z) if x == 0.0 && z == 0.0 && y == 1.0 => "Y".to_string(),
        (x, y, z) if x == 0.0 && y == 0.0 && z == 1.0 => "Z".to_string(),
        _ => format!("axis({nx:.4},{ny:.4},{nz:.4})"),
    };
    Ok(StabilizerObservable::from_gates(vec![s], label))
}

pub fn pauli_string(labels: &[Pauli]) -> Result<StabilizerObservable> {
    let ps = PauliString::new(labels.to_vec())?;
    let gates = ps.labels().iter().map(|p| p.matrix()).collect();
    Ok(StabilizerObservable::from_gates(gates, ps.to_string()))
}

/// P₊ρP₊ + P₋ρP₋.
pub fn measurement_channel(rho: &DensityMatrix, s: &StabilizerObservable) -> Result<DensityMatrix> {
    s.check_dim(rho)?;
    let out = apply_kraus_unchecked(
        rho.matrix(),
        &[s.projector_plus.clone(), s.projector_minus.clone()],
    );
    Ok(DensityMatrix::from_channel_output(out))
}

/// ½ρ + ½SρS†.
pub fn dephasing_channel(rho: &DensityMatrix, s: &StabilizerObservable) -> Result<DensityMatrix> {
    s.check_dim(rho)?;
    let conj = s.unitary.conjugate(rho.matrix());
    Ok(DensityMatrix::from_channel_output(
        (rho.matrix() + &conj).scale_real(0.5),
    ))
}

/// Which operation a QME event applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchChoice {
    Identity,
    Stabilizer,
}

/// One realisation of a QME event: per-qubit gates to apply.
#[derive(Debug, Clone)]
pub struct QmeBranch {
    pub choice: BranchChoice,
    pub gate_list: Vec<ComplexMatrix>,
}

impl QmeBranch {
    pub fn for_choice(s: &StabilizerObservable, choice: BranchChoice) -> Self {
        let gate_list = match choice {
            BranchChoice::Identity => vec![gates::id(); s.n_qubits()],
            BranchChoice::Stabilizer => s.gate_list.clone(),
        };
        Self { choice, gate_list }
    }

    /// Tensor product of the branch gates.
    pub fn unitary(&self) -> ComplexMatrix {
        match self.gate_list.as_slice() {
            [g] => g.clone(),
            [a, b] => tensor(a, b).expect("2x2 factors"),
            _ => unreachable!("one or two factors"),
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let u = self.unitary();
        if u.dim() != rho.dim() {
            return Err(Error::DimensionMismatch(rho.dim(), u.dim()));
        }
        Ok(match self.choice {
            BranchChoice::Identity => rho.clone(),
            BranchChoice::Stabilizer => {
                DensityMatrix::from_channel_output(u.conjugate(rho.matrix()))
            }
        })
    }
}

/// Draws one uniform variate: below ½ picks the stabilizer branch.
pub fn qme_sample<R: Rng + ?Sized>(s: &StabilizerObservable, rng: &mut R) -> QmeBranch {
    let u: f64 = rng.random();
    let choice = if u < 0.5 {
        BranchChoice::Stabilizer
    } else {
        BranchChoice::Identity
    };
    QmeBranch::for_choice(s, choice)
}

/// Mean of the states produced by the given branch choices.
pub fn average_over_branches(
    rho: &DensityMatrix,
    s: &StabilizerObservable,
    choices: impl IntoIterator<Item = BranchChoice>,
) -> Result<DensityMatrix> {
    s.check_dim(rho)?;
    let flipped = s.unitary.conjugate(rho.matrix());
    let (mut n_id, mut n_s) = (0usize, 0usize);
    for c in choices {
        match c {
            BranchChoice::Identity => n_id += 1,
            BranchChoice::Stabilizer => n_s += 1,
        }
    }
    let n = n_id + n_s;
    if n == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let mixed = &rho.matrix().scale_real(n_id as f64 / n as f64)
        + &flipped.scale_real(n_s as f64 / n as f64);
    Ok(DensityMatrix::from_channel_output(mixed))
}

/// Empirical mean over `n_samples` independent QME trajectories.
pub fn qme_trajectory_average<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    s: &StabilizerObservable,
    n_samples: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    s.check_dim(rho)?;
    let choices: Vec<BranchChoice> = (0..n_samples).map(|_| qme_sample(s, rng).choice).collect();
    average_over_branches(rho, s, choices)
}

/// Completeness-checked Kraus representation of a CPTP map.
#[derive(Debug, Clone)]
pub struct Channel {
    kraus: Vec<ComplexMatrix>,
}

impl Channel {
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let residual = kraus_completeness_residual(&kraus)?;
        if residual > KRAUS_TOL {
            return Err(Error::IncompleteKraus(residual));
        }
        Ok(Self { kraus })
    }

    pub fn measurement(s: &StabilizerObservable) -> Self {
        Self {
            kraus: vec![s.projector_plus.clone(), s.projector_minus.clone()],
        }
    }

    pub fn dephasing(s: &StabilizerObservable) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let id = ComplexMatrix::identity(s.dim()).expect("valid dim");
        Self {
            kraus: vec![id.scale_real(h), s.unitary.scale_real(h)],
        }
    }

    pub fn unitary(u: ComplexMatrix) -> Result<Self> {
        Self::new(vec![u])
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dim() != self.dim() {
            return Err(Error::DimensionMismatch(rho.dim(), self.dim()));
        }
        Ok(DensityMatrix::from_channel_output(apply_kraus_unchecked(
            rho.matrix(),
            &self.kraus,
        )))
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &Channel) -> Result<Channel> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for b in &other.kraus {
            for a in &self.kraus {
                let k = b.matmul(a);
                if k.as_slice().iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                    kraus.push(k);
                }
            }
        }
        if kraus.is_empty() {
            return Err(Error::EmptyKraus);
        }
        Ok(Channel { kraus })
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_1_SQRT_2;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::densmat::{bloch_vector, expectation, random_density_matrix, BlochVector};
    use crate::rng::stream;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn plus() -> DensityMatrix {
        DensityMatrix::from_bloch(BlochVector::new(1.0, 0.0, 0.0).unwrap())
    }

    fn bell(a: usize, b: usize) -> DensityMatrix {
        let mut v = vec![c(0.0); 4];
        v[a] = c(FRAC_1_SQRT_2);
        v[b] = c(FRAC_1_SQRT_2);
        DensityMatrix::from_pure(&v).unwrap()
    }

    fn supported() -> Vec<StabilizerObservable> {
        vec![
            pauli_string(&[Pauli::Z]).unwrap(),
            pauli_string(&[Pauli::X]).unwrap(),
            stabilizer_from_axis(FRAC_1_SQRT_2, FRAC_1_SQRT_2, 0.0).unwrap(),
            pauli_string(&[Pauli::Z, Pauli::Z]).unwrap(),
            pauli_string(&[Pauli::X, Pauli::X]).unwrap(),
        ]
    }

    #[test]
    fn axis_observables() {
        let z = stabilizer_from_axis(0.0, 0.0, 1.0).unwrap();
        assert_eq!(z.unitary(), &gates::z());
        assert_eq!(
            z.projector_plus(),
            &ComplexMatrix::from_real(2, &[1., 0., 0., 0.]).unwrap()
        );
        assert_eq!(
            z.projector_minus(),
            &ComplexMatrix::from_real(2, &[0., 0., 0., 1.]).unwrap()
        );
        assert_eq!(z.label(), "Z");

        let x = stabilizer_from_axis(1.0, 0.0, 0.0).unwrap();
        assert_eq!(x.unitary(), &gates::x());

        let h = FRAC_1_SQRT_2;
        let xy = stabilizer_from_axis(h, h, 0.0).unwrap();
        let expected = (&gates::x() + &gates::y()).scale_real(h);
        assert!(xy.unitary().max_abs_diff(&expected) < 1e-15);
        let sq = xy.unitary().matmul(xy.unitary());
        assert!(sq.max_abs_diff(&gates::id()) < 1e-12);
    }

    #[test]
    fn non_unit_axis_rejected() {
        assert!(matches!(
            stabilizer_from_axis(1.0, 1.0, 0.0),
            Err(Error::NotUnitVector(_))
        ));
    }

    #[test]
    fn observable_invariants() {
        for s in supported() {
            let u = s.unitary();
            assert!(u.is_unitary(1e-12) && u.is_hermitian(1e-12));
            let id = ComplexMatrix::identity(s.dim()).unwrap();
            assert!(u.matmul(u).max_abs_diff(&id) < 1e-12);
            let sum = s.projector_plus() + s.projector_minus();
            let diff = s.projector_plus() - s.projector_minus();
            assert!(sum.max_abs_diff(&id) < 1e-12);
            assert!(diff.max_abs_diff(u) < 1e-12);
            for choice in [BranchChoice::Identity, BranchChoice::Stabilizer] {
                let b = QmeBranch::for_choice(&s, choice);
                let target = if choice == BranchChoice::Identity {
                    &id
                } else {
                    u
                };
                assert!(b.unitary().max_abs_diff(target) < 1e-12);
            }
        }
    }

    #[test]
    fn pauli_strings() {
        let zz = pauli_string(&[Pauli::Z, Pauli::Z]).unwrap();
        assert_eq!(zz.unitary(), &tensor(&gates::z(), &gates::z()).unwrap());
        assert_eq!(zz.gate_list(), &[gates::z(), gates::z()]);
        assert_eq!(zz.label(), "ZZ");
        let xx = pauli_string(&[Pauli::X, Pauli::X]).unwrap();
        assert_eq!(xx.unitary(), &tensor(&gates::x(), &gates::x()).unwrap());
        let ii = pauli_string(&[Pauli::I, Pauli::I]).unwrap();
        assert_eq!(ii.unitary(), &ComplexMatrix::identity(4).unwrap());
        assert!(pauli_string(&[]).is_err());
        assert!(pauli_string(&[Pauli::X; 3]).is_err());
        assert_eq!(PauliString::parse("XY").unwrap().to_string(), "XY");
        assert!(PauliString::parse("XQ").is_err());
        assert_eq!(PauliString::non_identity(2).len(), 15);
    }

    #[test]
    fn z_measurement_keeps_diagonal() {
        let rho = DensityMatrix::from_bloch(BlochVector::new(0.2, 0.5, -0.6).unwrap());
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let m = rho.matrix();
        let expected = ComplexMatrix::diagonal(&[m[(0, 0)], m[(1, 1)]]).unwrap();
        assert!(
            measurement_channel(&rho, &z)
                .unwrap()
                .matrix()
                .max_abs_diff(&expected)
                < 1e-15
        );
        assert!(
            dephasing_channel(&rho, &z)
                .unwrap()
                .matrix()
                .max_abs_diff(&expected)
                < 1e-15
        );
        let out = dephasing_channel(&plus(), &z).unwrap();
        assert!(
            out.matrix()
                .max_abs_diff(DensityMatrix::maximally_mixed(1).unwrap().matrix())
                < 1e-15
        );
    }

    #[test]
    fn maximally_mixed_is_fixed() {
        for s in supported() {
            let mixed = DensityMatrix::maximally_mixed(s.n_qubits()).unwrap();
            let out = measurement_channel(&mixed, &s).unwrap();
            assert!(out.matrix().max_abs_diff(mixed.matrix()) < 1e-15);
        }
    }

    #[test]
    fn bell_state_is_stabilizer_eigenstate() {
        let zz = pauli_string(&[Pauli::Z, Pauli::Z]).unwrap();
        let phi = bell(0, 3);
        // ZZ |Φ+> by matrix product
        let v = [c(FRAC_1_SQRT_2), c(0.0), c(0.0), c(FRAC_1_SQRT_2)];
        let sv = zz.unitary().mul_vec(&v);
        assert!(sv.iter().zip(&v).all(|(a, b)| (a - b).norm() < 1e-15));
        let out = measurement_channel(&phi, &zz).unwrap();
        assert!(out.matrix().max_abs_diff(phi.matrix()) < 1e-15);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let zz = pauli_string(&[Pauli::Z, Pauli::Z]).unwrap();
        assert!(measurement_channel(&plus(), &zz).is_err());
        assert!(dephasing_channel(&plus(), &zz).is_err());
    }

    #[test]
    fn measurement_equals_dephasing_on_random_states() {
        let mut rng = stream(11);
        for s in supported() {
            for _ in 0..200 {
                let rho = random_density_matrix(s.n_qubits(), &mut rng).unwrap();
                let m = measurement_channel(&rho, &s).unwrap();
                let d = dephasing_channel(&rho, &s).unwrap();
                assert!(
                    m.matrix().max_abs_diff(d.matrix()) <= 1e-12,
                    "{}",
                    s.label()
                );

                let dd = dephasing_channel(&d, &s).unwrap();
                assert!(dd.matrix().max_abs_diff(d.matrix()) <= 1e-12);

                let before = expectation(&rho, s.unitary()).unwrap();
                let after = expectation(&d, s.unitary()).unwrap();
                assert_abs_diff_eq!(before, after, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn exact_branch_average_is_dephasing() {
        let mut rng = stream(5);
        for s in supported() {
            let rho = random_density_matrix(s.n_qubits(), &mut rng).unwrap();
            let avg =
                average_over_branches(&rho, &s, [BranchChoice::Identity, BranchChoice::Stabilizer])
                    .unwrap();
            let d = dephasing_channel(&rho, &s).unwrap();
            assert!(avg.matrix().max_abs_diff(d.matrix()) < 1e-15);

            let id_branch = QmeBranch::for_choice(&s, BranchChoice::Identity)
                .apply(&rho)
                .unwrap();
            let s_branch = QmeBranch::for_choice(&s, BranchChoice::Stabilizer)
                .apply(&rho)
                .unwrap();
            let manual = (id_branch.matrix() + s_branch.matrix()).scale_real(0.5);
            assert!(manual.max_abs_diff(d.matrix()) < 1e-15);
        }
    }

    #[test]
    fn seeded_sampler_is_reproducible() {
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let draw = |seed| {
            let mut rng = stream(seed);
            (0..64)
                .map(|_| qme_sample(&z, &mut rng).choice)
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn sampled_qme_on_plus_converges() {
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let mut rng = stream(42);
        let n = 100_000;
        let avg = qme_trajectory_average(&plus(), &z, n, &mut rng).unwrap();
        // binomial 3σ on the mean ⟨X⟩ is 3/√N ≈ 0.0095
        assert!(bloch_vector(&avg).unwrap().x.abs() < 0.02);
        let mixed = DensityMatrix::maximally_mixed(1).unwrap();
        assert!(avg.matrix().max_abs_diff(mixed.matrix()) < 0.02);
    }

    #[test]
    fn sampled_qme_keeps_codespace_state() {
        let xx = pauli_string(&[Pauli::X, Pauli::X]).unwrap();
        let psi = bell(1, 2);
        let mut rng = stream(3);
        for n in [1, 7, 100] {
            let out = qme_trajectory_average(&psi, &xx, n, &mut rng).unwrap();
            assert!(out.matrix().max_abs_diff(psi.matrix()) < 1e-15);
        }
        assert!(qme_trajectory_average(&psi, &xx, 0, &mut rng).is_err());
    }

    #[test]
    fn channel_wrappers() {
        let xx = pauli_string(&[Pauli::X, Pauli::X]).unwrap();
        let mut rng = stream(9);
        let rho = random_density_matrix(2, &mut rng).unwrap();
        let m = Channel::measurement(&xx).apply(&rho).unwrap();
        let d = Channel::dephasing(&xx).apply(&rho).unwrap();
        assert!(m.matrix().max_abs_diff(d.matrix()) < 1e-12);
        let twice = Channel::dephasing(&xx)
            .then(&Channel::dephasing(&xx))
            .unwrap();
        assert!(twice.apply(&rho).unwrap().matrix().max_abs_diff(d.matrix()) < 1e-12);
        assert!(Channel::new(vec![gates::id().scale_real(0.9)]).is_err());
    }
}
