//! Seeded randomness.
//!
//! Every stream is ChaCha20 (`rand_chacha::ChaCha20Rng::seed_from_u64`).
//! Uniform doubles take the top 53 bits of each `u64`, and normals use the
//! Box–Muller transform on two such uniforms, so a seed yields the same
//! numbers on any platform that implements these three steps.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::hermitian::{c, CMat, CVec};

pub struct Rng {
    inner: ChaCha20Rng,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Stream for one sample of an experiment: seed `seed ⊕ index`.
    pub fn for_sample(seed: u64, index: u64) -> Self {
        Self::new(seed ^ index)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let t = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * t.sin());
        r * t.cos()
    }

    /// Complex Gaussian with `E|z|² = 1`.
    pub fn complex_normal(&mut self) -> num_complex::Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        c(self.normal() * s, self.normal() * s)
    }

    pub fn ginibre(&mut self, rows: usize, cols: usize) -> CMat {
        // Filled row by row so the stream order is explicit.
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.complex_normal();
            }
        }
        m
    }

    /// Haar-random unitary: Ginibre matrix, QR, then the phases of `R`'s
    /// diagonal moved into `Q`.
    pub fn haar_unitary(&mut self, dim: usize) -> CMat {
        let g = self.ginibre(dim, dim);
        let qr = g.qr();
        let mut q = qr.q();
        let r = qr.r();
        for k in 0..dim {
            let d = r[(k, k)];
            let n = d.norm();
            let phase = if n > 0.0 { d / n } else { c(1.0, 0.0) };
            for i in 0..dim {
                q[(i, k)] *= phase;
            }
        }
        q
    }

    /// Uniformly random unit vector.
    pub fn unit_vector(&mut self, dim: usize) -> CVec {
        let v = CVec::from_iterator(dim, (0..dim).map(|_| self.complex_normal()));
        let n = v.norm();
        v.unscale(n)
    }

    /// Random density matrix `G G† / tr(G G†)` with a `dim × rank` Ginibre `G`.
    pub fn density_matrix(&mut self, dim: usize, rank: usize) -> CMat {
        let g = self.ginibre(dim, rank);
        let m = &g * g.adjoint();
        let t: f64 = m.diagonal().iter().map(|z| z.re).sum();
        let m = m.unscale(t);
        (&m + m.adjoint()).scale(0.5)
    }
}

/// Haar-random unitary of the given dimension, deterministic per seed.
pub fn haar_unitary(dim: usize, seed: u64) -> CMat {
    Rng::new(seed).haar_unitary(dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dim_one_is_a_phase() {
        let u = haar_unitary(1, 7);
        assert!((u[(0, 0)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unitarity() {
        let mut rng = Rng::new(1);
        for _ in 0..1000 {
            let u = rng.haar_unitary(4);
            let e = (u.adjoint() * &u - CMat::identity(4, 4))
                .iter()
                .fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(e < 1e-12);
        }
    }

    #[test]
    fn first_moment_at_dim_four() {
        let mut rng = Rng::new(2024);
        let n = 10_000;
        let mean: f64 = (0..n).map(|_| rng.haar_unitary(4)[(0, 0)].norm_sqr()).sum::<f64>() / n as f64;
        assert!((mean - 0.25).abs() < 0.01, "{mean}");
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(haar_unitary(3, 99), haar_unitary(3, 99));
        assert_ne!(haar_unitary(3, 99), haar_unitary(3, 98));
    }

    #[test]
    fn normal_moments() {
        let mut rng = Rng::new(5);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.01);
        assert!((v - 1.0).abs() < 0.01);
    }
}
