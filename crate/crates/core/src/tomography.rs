//! Pauli-basis state tomography with simulated shot noise.
//!
//! Each setting assigns X, Y or Z to every qubit. Before sampling in the
//! computational basis ρ is rotated by H for X and by H·S† (S† first) for Y, so
//! outcome bit 0 always corresponds to the +1 eigenvalue. Outcome indices use
//! qubit 0 as the most significant bit.
//!
//! Reconstruction is linear inversion over the Pauli basis followed by
//! eigenvalue clipping and trace renormalization.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::channels::{Pauli, PauliString};
use crate::densmat::{gates, hermitian_eigen, tensor, ComplexMatrix, DensityMatrix};
use crate::error::{invalid, Error, Result};
use crate::rng;

pub const DEFAULT_SHOTS_PER_SETTING: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub basis_settings: Vec<String>,
    pub shots_per_setting: u64,
    /// Outcome histogram per setting, indexed by bitstring.
    pub counts: Vec<Vec<u64>>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct ReconstructedState {
    pub rho: DensityMatrix,
    /// Estimated ⟨P⟩ for every non-identity Pauli string.
    pub raw_expectations: BTreeMap<String, f64>,
    /// Trace distance between the linear-inversion estimate and its projection.
    pub psd_projection_distance: f64,
}

/// The 3ⁿ measurement settings, in lexicographic X < Y < Z order.
pub fn full_settings(n_qubits: usize) -> Result<Vec<PauliString>> {
    let xyz = [Pauli::X, Pauli::Y, Pauli::Z];
    match n_qubits {
        1 => xyz.iter().map(|&p| PauliString::new(vec![p])).collect(),
        2 => xyz
            .iter()
            .flat_map(|&a| xyz.iter().map(move |&b| PauliString::new(vec![a, b])))
            .collect(),
        n => Err(Error::UnsupportedDimension(1 << n)),
    }
}

fn basis_change(p: Pauli) -> ComplexMatrix {
    match p {
        Pauli::I | Pauli::Z => gates::id(),
        Pauli::X => gates::hadamard(),
        Pauli::Y => gates::hadamard().matmul(&gates::s_dag()),
    }
}

/// Born probabilities of each computational outcome after rotating into `basis`.
pub fn outcome_probabilities(rho: &DensityMatrix, basis: &PauliString) -> Result<Vec<f64>> {
    if basis.n_qubits() != rho.n_qubits() {
        return Err(Error::QubitCount {
            expected: rho.n_qubits(),
            got: basis.n_qubits(),
        });
    }
    let v = match basis.labels() {
        [p] => basis_change(*p),
        [a, b] => tensor(&basis_change(*a), &basis_change(*b))?,
        _ => unreachable!("PauliString has 1 or 2 labels"),
    };
    let rotated = v.conjugate(rho.matrix());
    let mut probs: Vec<f64> = (0..rho.dim())
        .map(|k| rotated[(k, k)].re.max(0.0))
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// Multinomial outcome histogram of `shots` measurements in `basis`.
pub fn simulate_measurement<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    basis: &PauliString,
    shots: u64,
    rng: &mut R,
) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(invalid("shots", "must be at least 1"));
    }
    let probs = outcome_probabilities(rho, basis)?;
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = remaining;
            break;
        }
        let q = if mass > 0.0 {
            (p / mass).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let n = Binomial::new(remaining, q)
            .map_err(|e| invalid("probability", e.to_string()))?
            .sample(rng);
        counts[k] = n;
        remaining -= n;
        mass -= p;
    }
    Ok(counts)
}

/// Measures every setting of [`full_settings`] with its own substream of `seed`.
pub fn measure_all_settings(
    rho: &DensityMatrix,
    shots: u64,
    seed: u64,
) -> Result<TomographyRecord> {
    let settings = full_settings(rho.n_qubits())?;
    let counts = settings
        .iter()
        .enumerate()
        .map(|(k, basis)| {
            simulate_measurement(rho, basis, shots, &mut rng::substream(seed, &[k as u64]))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TomographyRecord {
        basis_settings: settings.iter().map(ToString::to_string).collect(),
        shots_per_setting: shots,
        counts,
        seed,
    })
}

fn parity_sign(outcome: usize, n_qubits: usize, mask: &[bool]) -> f64 {
    let mut ones = 0;
    for (q, &on) in mask.iter().enumerate() {
        if on && (outcome >> (n_qubits - 1 - q)) & 1 == 1 {
            ones += 1;
        }
    }
    if ones % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl TomographyRecord {
    fn parsed_settings(&self) -> Result<(usize, Vec<PauliString>)> {
        if self.shots_per_setting == 0 {
            return Err(Error::InvalidRecord(
                "shots_per_setting must be at least 1".into(),
            ));
        }
        if self.counts.len() != self.basis_settings.len() {
            return Err(Error::InvalidRecord(format!(
                "{} settings but {} histograms",
                self.basis_settings.len(),
                self.counts.len()
            )));
        }
        let settings = self
            .basis_settings
            .iter()
            .map(|s| {
                PauliString::parse(s)
                    .map_err(|_| Error::InvalidRecord(format!("bad setting {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = settings
            .first()
            .map(PauliString::n_qubits)
            .ok_or_else(|| Error::IncompleteBasis("no settings".into()))?;
        for (s, c) in settings.iter().zip(&self.counts) {
            if s.n_qubits() != n {
                return Err(Error::InvalidRecord(format!(
                    "setting {s} has the wrong qubit count"
                )));
            }
            if c.len() != 1 << n {
                return Err(Error::InvalidRecord(format!(
                    "setting {s}: {} outcome bins",
                    c.len()
                )));
            }
            let total: u64 = c.iter().sum();
            if total != self.shots_per_setting {
                return Err(Error::InvalidRecord(format!(
                    "setting {s}: counts sum to {total}, expected {}",
                    self.shots_per_setting
                )));
            }
        }
        for needed in full_settings(n)? {
            if !settings.contains(&needed) {
                return Err(Error::IncompleteBasis(format!("missing setting {needed}")));
            }
        }
        Ok((n, settings))
    }

    /// ⟨P⟩ for every non-identity P, averaged over all settings that agree with P
    /// on its non-identity qubits.
    pub fn expectations(&self) -> Result<BTreeMap<String, f64>> {
        let (n, settings) = self.parsed_settings()?;
        let mut out = BTreeMap::new();
        for p in PauliString::non_identity(n) {
            let mask: Vec<bool> = p.labels().iter().map(|&l| l != Pauli::I).collect();
            let mut sum = 0.0;
            let mut used = 0usize;
            for (s, c) in settings.iter().zip(&self.counts) {
                let compatible = p
                    .labels()
                    .iter()
                    .zip(s.labels())
                    .all(|(&a, &b)| a == Pauli::I || a == b);
                if !compatible {
                    continue;
                }
                let signed: f64 = c
                    .iter()
                    .enumerate()
                    .map(|(k, &m)| parity_sign(k, n, &mask) * m as f64)
                    .sum();
                sum += signed / self.shots_per_setting as f64;
                used += 1;
            }
            out.insert(p.to_string(), sum / used as f64);
        }
        Ok(out)
    }
}

/// Exact ⟨P⟩ for every non-identity Pauli string.
pub fn exact_expectations(rho: &DensityMatrix) -> BTreeMap<String, f64> {
    PauliString::non_identity(rho.n_qubits())
        .into_iter()
        .map(|p| {
            let v = rho.matrix().trace_product(&p.matrix()).re;
            (p.to_string(), v)
        })
        .collect()
}

/// Linear inversion ρ = 2⁻ⁿ (𝟙 + Σ ⟨P⟩ P), then PSD projection.
pub fn reconstruct_from_expectations(
    n_qubits: usize,
    expectations: &BTreeMap<String, f64>,
) -> Result<ReconstructedState> {
    let dim = 1usize << n_qubits;
    let mut lin = ComplexMatrix::identity(dim)?;
    for p in PauliString::non_identity(n_qubits) {
        let label = p.to_string();
        let v = *expectations
            .get(&label)
            .ok_or_else(|| Error::IncompleteBasis(format!("missing expectation {label}")))?;
        lin = &lin + &p.matrix().scale_real(v);
    }
    let lin = lin.scale_real(1.0 / dim as f64);

    let eig = hermitian_eigen(&lin);
    let clipped_sum: f64 = eig.values.iter().map(|&l| l.max(0.0)).sum();
    if clipped_sum <= 0.0 {
        return Err(invalid(
            "expectations",
            "no positive spectrum to project onto",
        ));
    }
    let projected = eig.map(|l| l.max(0.0) / clipped_sum);
    let distance = 0.5
        * eig
            .values
            .iter()
            .map(|&l| (l - l.max(0.0) / clipped_sum).abs())
            .sum::<f64>();
    Ok(ReconstructedState {
        rho: DensityMatrix::from_channel_output(projected),
        raw_expectations: expectations.clone(),
        psd_projection_distance: distance,
    })
}

pub fn reconstruct(record: &TomographyRecord) -> Result<ReconstructedState> {
    let expectations = record.expectations()?;
    let (n, _) = record.parsed_settings()?;
    reconstruct_from_expectations(n, &expectations)
}

/// Divides every value by the value at the minimum-x point.
pub fn spam_normalize(curve: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let reference = curve
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| invalid("curve", "empty"))?
        .1;
    if !reference.is_finite() || reference <= 0.0 {
        return Err(invalid(
            "curve",
            format!("reference value {reference} is not positive"),
        ));
    }
    Ok(curve.iter().map(|&(x, y)| (x, y / reference)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densmat::{random_density_matrix, trace_distance, BlochVector};
    use approx::assert_abs_diff_eq;

    fn plus() -> DensityMatrix {
        DensityMatrix::from_bloch(BlochVector::new(1.0, 0.0, 0.0).unwrap())
    }

    fn z1() -> PauliString {
        PauliString::parse("Z").unwrap()
    }

    #[test]
    fn ground_state_always_reads_zero() {
        let rho = DensityMatrix::basis(1, 0).unwrap();
        let c = simulate_measurement(&rho, &z1(), 777, &mut rng::stream(1)).unwrap();
        assert_eq!(c, vec![777, 0]);
    }

    #[test]
    fn plus_state_in_z_is_balanced() {
        let c = simulate_measurement(&plus(), &z1(), 10_000, &mut rng::stream(2)).unwrap();
        assert!((c[0] as f64 / 1e4 - 0.5).abs() < 0.015);
    }

    #[test]
    fn bell_state_in_zz_gives_correlated_outcomes() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let z = num_complex::Complex64::new(0.0, 0.0);
        let psi = [
            num_complex::Complex64::new(s, 0.0),
            z,
            z,
            num_complex::Complex64::new(s, 0.0),
        ];
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let c = simulate_measurement(
            &rho,
            &PauliString::parse("ZZ").unwrap(),
            10_000,
            &mut rng::stream(3),
        )
        .unwrap();
        assert_eq!(c[1] + c[2], 0);
        assert!((c[0] as f64 / 1e4 - 0.5).abs() < 0.015);
    }

    #[test]
    fn y_basis_maps_plus_i_to_zero() {
        let rho = DensityMatrix::from_bloch(BlochVector::new(0.0, 1.0, 0.0).unwrap());
        let p = outcome_probabilities(&rho, &PauliString::parse("Y").unwrap()).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_shots_rejected() {
        assert!(simulate_measurement(&plus(), &z1(), 0, &mut rng::stream(0)).is_err());
    }

    #[test]
    fn exact_expectations_round_trip_random_states() {
        let mut r = rng::stream(11);
        for k in 0..500 {
            let n = 1 + k % 2;
            let rho = random_density_matrix(n, &mut r).unwrap();
            let rec = reconstruct_from_expectations(n, &exact_expectations(&rho)).unwrap();
            assert!(rec.rho.matrix().max_abs_diff(rho.matrix()) <= 1e-12);
        }
    }

    #[test]
    fn plus_state_reconstructs_from_shots() {
        let rec = reconstruct(&measure_all_settings(&plus(), 10_000, 5).unwrap()).unwrap();
        assert!(trace_distance(&rec.rho, &plus()).unwrap() < 0.03);
    }

    #[test]
    fn unphysical_expectations_are_projected() {
        let e: BTreeMap<String, f64> = [("X", 1.0), ("Y", 1.0), ("Z", 1.0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let rec = reconstruct_from_expectations(1, &e).unwrap();
        assert!(rec.psd_projection_distance > 0.0);
        assert!(rec.rho.eigenvalues().iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn physical_expectations_are_not_projected() {
        let rec = reconstruct_from_expectations(1, &exact_expectations(&plus())).unwrap();
        assert!(rec.psd_projection_distance < 1e-12);
    }

    #[test]
    fn incomplete_or_inconsistent_records_rejected() {
        let mut rec =
            measure_all_settings(&DensityMatrix::maximally_mixed(2).unwrap(), 100, 1).unwrap();
        let mut missing = rec.clone();
        missing.basis_settings.pop();
        missing.counts.pop();
        assert!(matches!(
            reconstruct(&missing),
            Err(Error::IncompleteBasis(_))
        ));
        rec.counts[0][0] += 1;
        assert!(matches!(reconstruct(&rec), Err(Error::InvalidRecord(_))));
    }

    #[test]
    fn median_error_decreases_with_shots() {
        let mut r = rng::stream(99);
        let truth = random_density_matrix(2, &mut r).unwrap();
        let median = |shots: u64| {
            let mut errs: Vec<f64> = (0..50)
                .map(|seed| {
                    let rec =
                        reconstruct(&measure_all_settings(&truth, shots, seed).unwrap()).unwrap();
                    trace_distance(&rec.rho, &truth).unwrap()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            errs[25]
        };
        let (m2, m3, m4) = (median(100), median(1000), median(10_000));
        assert!(m4 < m3 && m3 < m2, "{m2} {m3} {m4}");
    }

    #[test]
    fn marginals_converge_to_born_probabilities() {
        let mut r = rng::stream(17);
        for shots in [100u64, 1000, 10_000] {
            for _ in 0..20 {
                let rho = random_density_matrix(2, &mut r).unwrap();
                for basis in full_settings(2).unwrap() {
                    let p = outcome_probabilities(&rho, &basis).unwrap();
                    let c = simulate_measurement(&rho, &basis, shots, &mut r).unwrap();
                    for (k, &pk) in p.iter().enumerate() {
                        let f = c[k] as f64 / shots as f64;
                        assert!((f - pk).abs() <= 3.0 / (shots as f64).sqrt());
                    }
                }
            }
        }
    }

    #[test]
    fn record_is_reproducible() {
        let rho = plus();
        assert_eq!(
            measure_all_settings(&rho, 500, 8).unwrap(),
            measure_all_settings(&rho, 500, 8).unwrap()
        );
    }

    #[test]
    fn spam_normalization() {
        let out = spam_normalize(&[(0.0, 0.95), (0.1, 0.80)]).unwrap();
        assert_abs_diff_eq!(out[0].1, 1.0);
        assert_abs_diff_eq!(out[1].1, 0.8421, epsilon = 1e-4);
        let clean = [(0.0, 1.0), (0.5, 0.7)];
        assert_eq!(spam_normalize(&clean).unwrap(), clean.to_vec());
        assert!(spam_normalize(&[(0.0, 0.0), (1.0, 0.5)]).is_err());
        assert!(spam_normalize(&[(0.0, -0.1)]).is_err());
        assert!(spam_normalize(&[]).is_err());
    }
}
