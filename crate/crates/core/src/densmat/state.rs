use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eigen::{hermitian_eigen, hermitian_eigenvalues};
use super::matrix::{gates, ComplexMatrix};
use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = -1e-10;

const UNITARY_TOL: f64 = 1e-12;
const KRAUS_TOL: f64 = 1e-10;
const PURE_THRESHOLD: f64 = 1.0 - 1e-9;

/// Hermitian, unit-trace, positive semidefinite operator on one or two qubits.
#[derive(Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl std::fmt::Debug for DensityMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DensityMatrix {:?}", self.matrix)
    }
}

impl DensityMatrix {
    /// Validates Hermiticity, trace and positivity.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let herm = matrix.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::NotHermitian(herm));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidTrace(tr.re));
        }
        let min = hermitian_eigenvalues(&matrix)[0];
        if min < PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(Self { matrix })
    }

    /// Wraps the output of a completeness-checked CPTP map. Positivity is
    /// guaranteed by construction, so only the cheap checks run.
    pub(crate) fn from_channel_output(matrix: ComplexMatrix) -> Self {
        let matrix = matrix.hermitian_part();
        debug_assert!(
            (matrix.trace().re - 1.0).abs() < 1e-8,
            "channel broke trace"
        );
        Self { matrix }
    }

    /// |psi><psi| for a normalised state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidTrace(norm * norm));
        }
        Self::new(ComplexMatrix::outer(psi, psi)?)
    }

    /// Computational basis state |index> on `n_qubits` qubits.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let dim = dim_for(n_qubits)?;
        if index >= dim {
            return Err(Error::QubitIndex { index, n_qubits });
        }
        let mut m = ComplexMatrix::zeros(dim)?;
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Ok(Self { matrix: m })
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = dim_for(n_qubits)?;
        Ok(Self {
            matrix: ComplexMatrix::identity(dim)?.scale_real(1.0 / dim as f64),
        })
    }

    /// (1 + x X + y Y + z Z) / 2.
    pub fn from_bloch(b: BlochVector) -> Self {
        let m = &(&gates::id() + &gates::x().scale_real(b.x))
            + &(&gates::y().scale_real(b.y) + &gates::z().scale_real(b.z));
        Self {
            matrix: m.scale_real(0.5),
        }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn n_qubits(&self) -> usize {
        self.matrix.n_qubits()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.trace_product(&self.matrix).re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
    }

    /// Elementwise mean of equally sized states.
    pub fn mean<'a>(states: impl IntoIterator<Item = &'a DensityMatrix>) -> Option<Self> {
        let mut it = states.into_iter();
        let first = it.next()?;
        let mut acc = first.matrix.clone();
        let mut n = 1usize;
        for s in it {
            acc = &acc + &s.matrix;
            n += 1;
        }
        Some(Self::from_channel_output(acc.scale_real(1.0 / n as f64)))
    }
}

fn dim_for(n_qubits: usize) -> Result<usize> {
    match n_qubits {
        1 => Ok(2),
        2 => Ok(4),
        other => Err(Error::UnsupportedDimension(1 << other.min(16))),
    }
}

/// Bloch-sphere coordinates (<X>, <Y>, <Z>) of a single-qubit state.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let b = Self { x, y, z };
        if b.norm_sqr() > 1.0 + 1e-10 {
            return Err(Error::InvalidParameter {
                name: "bloch",
                reason: format!("norm {} exceeds 1", b.norm_sqr().sqrt()),
            });
        }
        Ok(b)
    }

    /// Pure state at polar angle `theta` from +z and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            x: theta.sin() * phi.cos(),
            y: theta.sin() * phi.sin(),
            z: theta.cos(),
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// U rho U†.
pub fn apply_unitary(rho: &DensityMatrix, u: &ComplexMatrix) -> Result<DensityMatrix> {
    if u.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), u.dim()));
    }
    let err = u.unitarity_error();
    if err > UNITARY_TOL {
        return Err(Error::NotUnitary(err));
    }
    Ok(DensityMatrix::from_channel_output(u.conjugate(&rho.matrix)))
}

/// Largest elementwise deviation of sum K† K from the identity.
pub fn kraus_completeness_residual(kraus: &[ComplexMatrix]) -> Result<f64> {
    let first = kraus.first().ok_or(Error::EmptyKraus)?;
    let dim = first.dim();
    let mut sum = ComplexMatrix::zeros(dim)?;
    for k in kraus {
        if k.dim() != dim {
            return Err(Error::DimensionMismatch(dim, k.dim()));
        }
        sum = &sum + &k.adjoint().matmul(k);
    }
    Ok(sum.max_abs_diff(&ComplexMatrix::identity(dim)?))
}

/// sum_i K_i rho K_i†, after checking the Kraus set is complete to 1e-10.
pub fn apply_kraus(rho: &DensityMatrix, kraus: &[ComplexMatrix]) -> Result<DensityMatrix> {
    let residual = kraus_completeness_residual(kraus)?;
    if kraus[0].dim() != rho.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), kraus[0].dim()));
    }
    if residual > KRAUS_TOL {
        return Err(Error::IncompleteKraus(residual));
    }
    let out = apply_kraus_unchecked(rho.matrix(), kraus);
    DensityMatrix::new(out.hermitian_part())
}

pub(crate) fn apply_kraus_unchecked(rho: &ComplexMatrix, kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let mut acc = ComplexMatrix::zeros(rho.dim()).expect("valid dim");
    for k in kraus {
        acc = &acc + &k.conjugate(rho);
    }
    acc
}

pub fn bloch_vector(rho: &DensityMatrix) -> Result<BlochVector> {
    if rho.n_qubits() != 1 {
        return Err(Error::QubitCount {
            expected: 1,
            got: rho.n_qubits(),
        });
    }
    let m = rho.matrix();
    Ok(BlochVector {
        x: 2.0 * m[(0, 1)].re,
        y: -2.0 * m[(0, 1)].im,
        z: (m[(0, 0)] - m[(1, 1)]).re,
    })
}

/// Half the trace norm of rho - sigma.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    let diff = rho.matrix() - sigma.matrix();
    let t = 0.5
        * hermitian_eigenvalues(&diff)
            .iter()
            .map(|l| l.abs())
            .sum::<f64>();
    Ok(t.clamp(0.0, 1.0))
}

/// Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2. Reduces to
/// Tr(rho sigma) when either argument is pure.
pub fn fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    if sigma.purity() > PURE_THRESHOLD || rho.purity() > PURE_THRESHOLD {
        let f = rho.matrix().trace_product(sigma.matrix()).re;
        return Ok(f.clamp(0.0, 1.0));
    }
    let sqrt_rho = hermitian_eigen(rho.matrix()).map(|l| l.max(0.0).sqrt());
    let inner = sqrt_rho.matmul(sigma.matrix()).matmul(&sqrt_rho);
    let root_trace: f64 = hermitian_eigenvalues(&inner)
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    Ok((root_trace * root_trace).clamp(0.0, 1.0))
}

/// Re Tr(rho O) for a Hermitian observable.
pub fn expectation(rho: &DensityMatrix, obs: &ComplexMatrix) -> Result<f64> {
    if obs.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), obs.dim()));
    }
    let herm = obs.hermiticity_error();
    if herm > HERMITIAN_TOL {
        return Err(Error::NotHermitian(herm));
    }
    let v = rho.matrix().trace_product(obs);
    debug_assert!(v.im.abs() <= 1e-12, "imaginary expectation {}", v.im);
    Ok(v.re)
}

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im)
}

/// Haar-random pure state vector.
pub fn random_pure_state<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<Vec<Complex64>> {
    let dim = dim_for(n_qubits)?;
    let mut v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.iter_mut().for_each(|z| *z /= norm);
    Ok(v)
}

/// Random full-rank state from the Hilbert-Schmidt (Ginibre) ensemble.
pub fn random_density_matrix<R: Rng + ?Sized>(
    n_qubits: usize,
    rng: &mut R,
) -> Result<DensityMatrix> {
    let dim = dim_for(n_qubits)?;
    let g = ComplexMatrix::new(dim, (0..dim * dim).map(|_| gaussian_complex(rng)).collect())?;
    let w = g.matmul(&g.adjoint());
    let tr = w.trace().re;
    let mut m = w.scale_real(1.0 / tr).hermitian_part();
    for i in 0..dim {
        m[(i, i)].im = 0.0;
    }
    DensityMatrix::new(m)
}
