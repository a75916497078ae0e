//! Cyclic Jacobi eigensolver for small Hermitian matrices.
//!
//! Each rotation zeroes one off-diagonal pair (p, q). For a Hermitian pair with
//! `a_pq = r e^{i phi}` the rotation is the real Jacobi rotation of
//! `[[a_pp, r], [r, a_qq]]` dressed with the phase `diag(e^{i phi}, 1)`. A 2x2
//! input converges after a single rotation, which is the closed-form solution.

use num_complex::Complex64;

use super::matrix::{ComplexMatrix, ZERO};

const OFF_DIAGONAL_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `A = V diag(values) V†` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Applies `f` to the spectrum: `V diag(f(values)) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.vectors.dim();
        let mut out = ComplexMatrix::zeros(n).expect("valid dim");
        for (k, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for r in 0..n {
                let vr = self.vectors[(r, k)] * w;
                for c in 0..n {
                    out[(r, c)] += vr * self.vectors[(c, k)].conj();
                }
            }
        }
        out
    }
}

fn off_norm(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                s += a[r * n + c].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Decomposes a Hermitian matrix. Only the Hermitian part of the input is used.
pub fn hermitian_eigen(m: &ComplexMatrix) -> HermitianEigen {
    let n = m.dim();
    let herm = m.hermitian_part();
    let mut a: Vec<Complex64> = herm.as_slice().to_vec();
    let mut v: Vec<Complex64> = ComplexMatrix::identity(n)
        .expect("valid dim")
        .as_slice()
        .to_vec();

    let scale = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);

    for _ in 0..MAX_SWEEPS {
        if off_norm(&a, n) <= OFF_DIAGONAL_TOL * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                let r = apq.norm();
                if r <= f64::MIN_POSITIVE {
                    continue;
                }
                let phase = apq / r;
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Rotation U restricted to (p, q): [[phase*c, phase*s], [-s, c]].
                let u_pp = phase * c;
                let u_pq = phase * s;
                let u_qp = Complex64::new(-s, 0.0);
                let u_qq = Complex64::new(c, 0.0);

                // A <- A U (columns p, q)
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = akp * u_pp + akq * u_qp;
                    a[k * n + q] = akp * u_pq + akq * u_qq;
                }
                // A <- U† A (rows p, q)
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[p * n + q] = ZERO;
                a[q * n + p] = ZERO;
                a[p * n + p].im = 0.0;
                a[q * n + q].im = 0.0;
                // V <- V U
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = vkp * u_pp + vkq * u_qp;
                    v[k * n + q] = vkp * u_pq + vkq * u_qq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let mut vectors = ComplexMatrix::zeros(n).expect("valid dim");
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            vectors[(r, col)] = v[r * n + src];
        }
    }
    HermitianEigen { values, vectors }
}

pub fn hermitian_eigenvalues(m: &ComplexMatrix) -> Vec<f64> {
    hermitian_eigen(m).values
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densmat::matrix::gates;
    use proptest::prelude::*;

    fn random_hermitian(dim: usize, entries: &[f64]) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(dim).unwrap();
        let mut it = entries.iter();
        for r in 0..dim {
            for c in r..dim {
                let re = *it.next().unwrap();
                let im = if r == c { 0.0 } else { *it.next().unwrap() };
                m[(r, c)] = Complex64::new(re, im);
                m[(c, r)] = Complex64::new(re, -im);
            }
        }
        m
    }

    #[test]
    fn pauli_spectra() {
        for p in [gates::x(), gates::y(), gates::z()] {
            let vals = hermitian_eigenvalues(&p);
            assert!((vals[0] + 1.0).abs() < 1e-15 && (vals[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_spectrum() {
        let id = ComplexMatrix::identity(4).unwrap();
        let e = hermitian_eigen(&id);
        assert!(e.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn reconstructs_random_hermitian(entries in prop::collection::vec(-1.0f64..1.0, 16)) {
            let m = random_hermitian(4, &entries);
            let e = hermitian_eigen(&m);
            prop_assert!(e.vectors.is_unitary(1e-12));
            let back = e.map(|x| x);
            prop_assert!(back.max_abs_diff(&m) < 1e-12);
            for w in e.values.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
            let tr: f64 = e.values.iter().sum();
            prop_assert!((tr - m.trace().re).abs() < 1e-12);
        }

        #[test]
        fn two_by_two_matches_closed_form(entries in prop::collection::vec(-1.0f64..1.0, 4)) {
            let m = random_hermitian(2, &entries);
            let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
            let b = m[(0, 1)].norm();
            let mid = (a + d) / 2.0;
            let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
            let vals = hermitian_eigenvalues(&m);
            prop_assert!((vals[0] - (mid - rad)).abs() < 1e-13);
            prop_assert!((vals[1] - (mid + rad)).abs() < 1e-13);
        }
    }
}
