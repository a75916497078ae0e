use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense row-major complex matrix over one or two qubits (dimension 2 or 4).
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(Error::EntryCount {
                dim,
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self { dim, data })
    }

    /// Builds a matrix from real entries, row-major.
    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::new(
            dim,
            entries.iter().map(|&r| Complex64::new(r, 0.0)).collect(),
        )
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            data: vec![ZERO; dim * dim],
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let mut m = Self::zeros(dim)?;
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        Ok(m)
    }

    pub fn diagonal(diag: &[Complex64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len())?;
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        Ok(m)
    }

    /// |u><v| for column vectors `u` and `v`.
    pub fn outer(u: &[Complex64], v: &[Complex64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch(u.len(), v.len()));
        }
        let dim = u.len();
        let mut m = Self::zeros(dim)?;
        for r in 0..dim {
            for c in 0..dim {
                m[(r, c)] = u[r] * v[c].conj();
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_qubits(&self) -> usize {
        if self.dim == 2 {
            1
        } else {
            2
        }
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                out.data[r * n + c] = self.data[c * n + r].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    /// Matrix product; panics on mismatched dimensions (use `try_mul` for checked input).
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let n = self.dim;
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.data[r * n + k];
                if a == ZERO {
                    continue;
                }
                for c in 0..n {
                    out[r * n + c] += a * other.data[k * n + c];
                }
            }
        }
        Self { dim: n, data: out }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(self.dim, other.dim));
        }
        Ok(self.matmul(other))
    }

    /// A X A† without materialising A† separately.
    pub fn conjugate(&self, x: &Self) -> Self {
        assert_eq!(self.dim, x.dim, "conjugate dimension mismatch");
        let n = self.dim;
        let ax = self.matmul(x);
        let mut out = vec![ZERO; n * n];
        for r in 0..n {
            for c in 0..n {
                let mut acc = ZERO;
                for k in 0..n {
                    acc += ax.data[r * n + k] * self.data[c * n + k].conj();
                }
                out[r * n + c] = acc;
            }
        }
        Self { dim: n, data: out }
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, v.len(), "mul_vec dimension mismatch");
        let n = self.dim;
        (0..n)
            .map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum())
            .collect()
    }

    /// Largest elementwise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "max_abs_diff dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn unitarity_error(&self) -> f64 {
        let id = Self::identity(self.dim).expect("valid dim");
        self.adjoint().matmul(self).max_abs_diff(&id)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_error() <= tol
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() <= tol
    }

    /// Symmetrised copy (A + A†)/2.
    pub(crate) fn hermitian_part(&self) -> Self {
        let n = self.dim;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                out.data[r * n + c] = (self.data[r * n + c] + self.data[c * n + r].conj()) * 0.5;
            }
        }
        out
    }

    /// Re Tr(A B), used for expectation values of Hermitian products.
    pub(crate) fn trace_product(&self, other: &Self) -> Complex64 {
        let n = self.dim;
        let mut acc = ZERO;
        for r in 0..n {
            for k in 0..n {
                acc += self.data[r * n + k] * other.data[k * n + r];
            }
        }
        acc
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 2 || dim == 4 {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Kronecker product of two single-qubit operators.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.dim != 2 {
        return Err(Error::DimensionMismatch(a.dim, 2));
    }
    if b.dim != 2 {
        return Err(Error::DimensionMismatch(b.dim, 2));
    }
    let mut out = ComplexMatrix::zeros(4)?;
    for ar in 0..2 {
        for ac in 0..2 {
            let s = a[(ar, ac)];
            for br in 0..2 {
                for bc in 0..2 {
                    out[(2 * ar + br, 2 * ac + bc)] = s * b[(br, bc)];
                }
            }
        }
    }
    Ok(out)
}

/// Lifts a single-qubit operator onto `qubit` (0 = leftmost tensor factor) of
/// an `n_qubits` register.
pub fn embed(op: &ComplexMatrix, qubit: usize, n_qubits: usize) -> Result<ComplexMatrix> {
    if op.dim != 2 {
        return Err(Error::DimensionMismatch(op.dim, 2));
    }
    if qubit >= n_qubits {
        return Err(Error::QubitIndex {
            index: qubit,
            n_qubits,
        });
    }
    match (n_qubits, qubit) {
        (1, _) => Ok(op.clone()),
        (2, 0) => tensor(op, &gates::id()),
        (2, _) => tensor(&gates::id(), op),
        _ => Err(Error::UnsupportedDimension(1 << n_qubits.min(16))),
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "add dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim, rhs.dim, "sub dimension mismatch");
        ComplexMatrix {
            dim: self.dim,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs)
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix({}x{})", self.dim, self.dim)?;
        for r in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|c| {
                    let z = self[(r, c)];
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Standard single-qubit gates and Paulis.
pub mod gates {
    use std::f64::consts::FRAC_1_SQRT_2;

    use num_complex::Complex64;

    use super::{ComplexMatrix, I, ONE, ZERO};

    fn m2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> ComplexMatrix {
        ComplexMatrix {
            dim: 2,
            data: vec![a, b, c, d],
        }
    }

    pub fn id() -> ComplexMatrix {
        m2(ONE, ZERO, ZERO, ONE)
    }

    pub fn x() -> ComplexMatrix {
        m2(ZERO, ONE, ONE, ZERO)
    }

    pub fn y() -> ComplexMatrix {
        m2(ZERO, -I, I, ZERO)
    }

    pub fn z() -> ComplexMatrix {
        m2(ONE, ZERO, ZERO, -ONE)
    }

    pub fn hadamard() -> ComplexMatrix {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        m2(h, h, h, -h)
    }

    /// Phase gate S = diag(1, i).
    pub fn s() -> ComplexMatrix {
        m2(ONE, ZERO, ZERO, I)
    }

    pub fn s_dag() -> ComplexMatrix {
        m2(ONE, ZERO, ZERO, -I)
    }

    /// exp(-i theta (n . sigma) / 2) for a unit axis `n`.
    pub fn rotation(axis: [f64; 3], theta: f64) -> ComplexMatrix {
        let (s, c) = (theta / 2.0).sin_cos();
        let [nx, ny, nz] = axis;
        let c = Complex64::new(c, 0.0);
        m2(
            c - I * (s * nz),
            -I * (s * nx) - s * ny,
            -I * (s * nx) + s * ny,
            c + I * (s * nz),
        )
    }

    pub fn rx(theta: f64) -> ComplexMatrix {
        rotation([1.0, 0.0, 0.0], theta)
    }

    pub fn ry(theta: f64) -> ComplexMatrix {
        rotation([0.0, 1.0, 0.0], theta)
    }

    /// R_Z(theta) = diag(e^{-i theta/2}, e^{i theta/2}).
    pub fn rz(theta: f64) -> ComplexMatrix {
        let h = theta / 2.0;
        m2(
            Complex64::from_polar(1.0, -h),
            ZERO,
            ZERO,
            Complex64::from_polar(1.0, h),
        )
    }
}
