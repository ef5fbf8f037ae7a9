use nalgebra::{DMatrix, DVector};

use super::operator::{c, CMat, HermitianOperator};

/// `[[Re a, −Im a], [Im a, Re a]]`.
pub fn real_embedding_mat(a: &CMat) -> DMatrix<f64> {
    let n = a.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

pub fn real_embedding(a: &HermitianOperator) -> DMatrix<f64> {
    real_embedding_mat(a.matrix())
}

/// Adjoint of the embedding: for symmetric `z = [[P, Q], [R, S]]` returns the
/// Hermitian `Y = (P + S) + i(R − Q)`, so that `tr(Y F) = ⟨z, embed(F)⟩` for
/// every Hermitian `F`. Maps PSD matrices to PSD matrices.
pub fn embedding_adjoint(z: &DMatrix<f64>) -> CMat {
    let n = z.nrows() / 2;
    let y = CMat::from_fn(n, n, |i, j| {
        c(z[(i, j)] + z[(i + n, j + n)], z[(i + n, j)] - z[(i, j + n)])
    });
    (&y + y.adjoint()).scale(0.5)
}

/// Number of entries in the symmetric vectorization of an `n × n` matrix.
pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Lower-triangle column-major vectorization with off-diagonals scaled by √2,
/// so that `svec(a)·svec(b) = tr(ab)`.
pub fn svec(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(svec_len(n));
    let mut k = 0;
    for j in 0..n {
        v[k] = m[(j, j)];
        k += 1;
        for i in j + 1..n {
            v[k] = std::f64::consts::SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]);
            k += 1;
        }
    }
    v
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        m[(j, j)] = v[k];
        k += 1;
        for i in j + 1..n {
            let x = v[k] * std::f64::consts::FRAC_1_SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}
