use std::cmp::Ordering;

use nalgebra::linalg::SymmetricEigen;

use super::operator::{c, CMat};
use crate::config::EIG_TIE_TOL;
use crate::error::{Result, RmpError};

/// Spectral decomposition `a = Σ λₖ vₖ vₖ†` with eigenvalues ascending and
/// eigenvectors stored as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl Eigen {
    pub fn reconstruct(&self) -> CMat {
        let n = self.vectors.nrows();
        let mut m = CMat::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            let v = self.vectors.column(k);
            m += (v * v.adjoint()).scale(lam);
        }
        m
    }
}

const MAX_SWEEPS_PER_DIM: usize = 500;

/// Eigendecomposition of a Hermitian matrix with a reproducible basis.
///
/// Each eigenvector is rescaled so that its first entry of non-negligible
/// modulus is real and positive. Eigenvalues closer than the tie tolerance
/// keep their vectors in descending lexicographic order of `(re, im)` entries.
pub fn eig_hermitian_mat(a: &CMat) -> Result<Eigen> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Eigen {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        });
    }
    let sym = (a + a.adjoint()).scale(0.5);
    let scale = sym.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_SWEEPS_PER_DIM * n).ok_or(RmpError::EigenConvergence)?;

    let mut cols: Vec<(f64, Vec<num_complex::Complex64>)> = (0..n)
        .map(|k| {
            let mut v: Vec<_> = eig.eigenvectors.column(k).iter().copied().collect();
            normalize_phase(&mut v);
            (eig.eigenvalues[k], v)
        })
        .collect();

    let tie = EIG_TIE_TOL * scale.max(1.0);
    cols.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    // Resolve near-ties group by group so that the order is a total order.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && cols[end].0 - cols[end - 1].0 <= tie {
            end += 1;
        }
        if end - start > 1 {
            cols[start..end].sort_by(|x, y| lex_desc(&x.1, &y.1));
        }
        start = end;
    }

    let values = cols.iter().map(|(l, _)| *l).collect();
    let vectors = CMat::from_fn(n, n, |i, k| cols[k].1[i]);
    Ok(Eigen { values, vectors })
}

fn normalize_phase(v: &mut [num_complex::Complex64]) {
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let thresh = 1e-10 * norm.max(f64::MIN_POSITIVE);
    if let Some(p) = v.iter().find(|z| z.norm() > thresh).copied() {
        let phase = p.conj() / p.norm();
        for z in v.iter_mut() {
            *z *= phase;
        }
        // The pivot is now real by construction; drop the rounding residue.
        if let Some(z) = v.iter_mut().find(|z| z.norm() > thresh) {
            *z = c(z.norm(), 0.0);
        }
    }
}

fn lex_desc(a: &[num_complex::Complex64], b: &[num_complex::Complex64]) -> Ordering {
    const EPS: f64 = 1e-12;
    for (x, y) in a.iter().zip(b) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > EPS {
                return q.partial_cmp(&p).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(rows: &[&[f64]]) -> CMat {
        let n = rows.len();
        CMat::from_fn(n, n, |i, j| c(rows[i][j], 0.0))
    }

    #[test]
    fn diagonal_sorted_ascending() {
        let e = eig_hermitian_mat(&real(&[&[3.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 2.0]])).unwrap();
        assert_eq!(e.values.len(), 3);
        for (got, want) in e.values.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((e.vectors[(1, 0)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pauli_x_spectrum_and_phase_convention() {
        let e = eig_hermitian_mat(&real(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        for k in 0..2 {
            assert!(e.vectors[(0, k)].re > 0.0);
            assert!(e.vectors[(0, k)].im.abs() < 1e-15);
        }
    }

    #[test]
    fn degenerate_ordering_is_deterministic() {
        let m = CMat::identity(3, 3);
        let e = eig_hermitian_mat(&m).unwrap();
        let again = eig_hermitian_mat(&m).unwrap();
        assert_eq!(e.vectors, again.vectors);
        assert!((e.reconstruct() - m).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn complex_reconstruction() {
        let m = CMat::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0),
                c(0.5, -1.0),
                c(0.0, 0.3),
                c(0.5, 1.0),
                c(-1.0, 0.0),
                c(0.2, 0.0),
                c(0.0, -0.3),
                c(0.2, 0.0),
                c(0.7, 0.0),
            ],
        );
        let e = eig_hermitian_mat(&m).unwrap();
        let err = (e.reconstruct() - &m).iter().fold(0.0f64, |a, z| a.max(z.norm()));
        assert!(err < 1e-13);
        let u = &e.vectors;
        let id = u.adjoint() * u;
        assert!((id - CMat::identity(3, 3)).iter().all(|z| z.norm() < 1e-13));
    }
}
