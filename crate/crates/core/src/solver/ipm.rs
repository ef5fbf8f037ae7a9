//! Primal-dual interior-point method on the homogeneous self-dual embedding
//! of `min c'x  s.t.  Gx + s = h,  s ∈ K`, where `K` is a product of real
//! PSD cones in scaled vectorized (svec) form, with Nesterov–Todd scaling.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use super::{Settings, SolveStatus};
use crate::hermitian::{smat, svec, svec_len};

pub(crate) struct StandardForm {
    pub c: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub blocks: Vec<usize>,
}

pub(crate) struct IpmOutput {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Per-block scaling `W(u) = R'uR`, with `λ = R'ZR = R⁻¹SR⁻ᵀ` diagonal.
#[derive(Clone)]
struct BlockScaling {
    r: DMatrix<f64>,
    rti: DMatrix<f64>,
    lam: DVector<f64>,
}

struct Cone {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    len: usize,
}

impl Cone {
    fn new(dims: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(dims.len());
        let mut o = 0;
        for &d in dims {
            offsets.push(o);
            o += svec_len(d);
        }
        Self {
            dims: dims.to_vec(),
            offsets,
            len: o,
        }
    }

    fn order(&self) -> usize {
        self.dims.iter().sum()
    }

    fn block<'a>(&self, v: &'a [f64], k: usize) -> &'a [f64] {
        &v[self.offsets[k]..self.offsets[k] + svec_len(self.dims[k])]
    }

    fn identity(&self) -> DVector<f64> {
        let mut e = DVector::zeros(self.len);
        for (k, &d) in self.dims.iter().enumerate() {
            e.rows_mut(self.offsets[k], svec_len(d))
                .copy_from(&svec(&DMatrix::identity(d, d)));
        }
        e
    }

    /// Applies `u ↦ Lᵀ u L` per block, with `L` given by `pick`.
    fn congruence(
        &self,
        v: &[f64],
        sc: &[BlockScaling],
        pick: impl Fn(&BlockScaling) -> (&DMatrix<f64>, bool),
    ) -> DVector<f64> {
        let mut out = DVector::zeros(self.len);
        for (k, &d) in self.dims.iter().enumerate() {
            let u = smat(self.block(v, k), d);
            let (l, transpose_left) = pick(&sc[k]);
            let m = if transpose_left {
                l.transpose() * u * l
            } else {
                l * u * l.transpose()
            };
            out.rows_mut(self.offsets[k], svec_len(d)).copy_from(&svec(&m));
        }
        out
    }

    /// `W⁻ᵀ(u) = Rtiᵀ u Rti`.
    fn w_inv_t(&self, v: &[f64], sc: &[BlockScaling]) -> DVector<f64> {
        self.congruence(v, sc, |b| (&b.rti, true))
    }

    /// `Wᵀ(u) = R u Rᵀ`.
    fn w_t(&self, v: &[f64], sc: &[BlockScaling]) -> DVector<f64> {
        self.congruence(v, sc, |b| (&b.r, false))
    }

    /// `W⁻¹(u) = Rti u Rtiᵀ`.
    fn w_inv(&self, v: &[f64], sc: &[BlockScaling]) -> DVector<f64> {
        self.congruence(v, sc, |b| (&b.rti, false))
    }

    fn lambda_vec(&self, sc: &[BlockScaling]) -> DVector<f64> {
        let mut out = DVector::zeros(self.len);
        for (k, &d) in self.dims.iter().enumerate() {
            out.rows_mut(self.offsets[k], svec_len(d))
                .copy_from(&svec(&DMatrix::from_diagonal(&sc[k].lam)));
        }
        out
    }

    /// Jordan product `(uv + vu)/2` blockwise.
    fn jordan(&self, u: &[f64], v: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.len);
        for (k, &d) in self.dims.iter().enumerate() {
            let a = smat(self.block(u, k), d);
            let b = smat(self.block(v, k), d);
            let m = (&a * &b + &b * &a) * 0.5;
            out.rows_mut(self.offsets[k], svec_len(d)).copy_from(&svec(&m));
        }
        out
    }

    /// Solves `λ ∘ x = r` for diagonal `λ`: `x_ij = 2 r_ij / (λ_i + λ_j)`.
    fn lambda_solve(&self, r: &[f64], sc: &[BlockScaling]) -> DVector<f64> {
        let mut out = DVector::zeros(self.len);
        for (k, &d) in self.dims.iter().enumerate() {
            let m = smat(self.block(r, k), d);
            let lam = &sc[k].lam;
            let x = DMatrix::from_fn(d, d, |i, j| 2.0 * m[(i, j)] / (lam[i] + lam[j]));
            out.rows_mut(self.offsets[k], svec_len(d)).copy_from(&svec(&x));
        }
        out
    }

    /// Largest `α` with `λ + α·d ⪰ 0` in every block (infinite if unconstrained).
    fn max_step(&self, d: &[f64], sc: &[BlockScaling]) -> f64 {
        let mut alpha = f64::INFINITY;
        for (k, &n) in self.dims.iter().enumerate() {
            let m = smat(self.block(d, k), n);
            let lam = &sc[k].lam;
            let scaled = DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (lam[i] * lam[j]).sqrt());
            let min = if n == 1 {
                scaled[(0, 0)]
            } else {
                SymmetricEigen::new(scaled).eigenvalues.min()
            };
            if min < 0.0 {
                alpha = alpha.min(-1.0 / min);
            }
        }
        alpha
    }
}

/// NT scaling of a pair of PD matrices: `R = Ls V Λ^{-1/2}`, `Rti = Lz U Λ^{-1/2}`
/// where `Lzᵀ Ls = U Λ Vᵀ`.
fn nt_scaling(s: DMatrix<f64>, z: DMatrix<f64>) -> Option<BlockScaling> {
    let ls = Cholesky::new(s)?.l();
    let lz = Cholesky::new(z)?.l();
    let svd = (lz.transpose() * &ls).svd(true, true);
    let u = svd.u?;
    let vt = svd.v_t?;
    let lam = svd.singular_values;
    if lam.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
        return None;
    }
    let isq = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
    Some(BlockScaling {
        r: ls * vt.transpose() * &isq,
        rti: lz * u * isq,
        lam,
    })
}

/// Cholesky factor of the normal matrix `ĜᵀĜ`, with a tiny Tikhonov shift
/// when the matrix is numerically singular.
fn factor_normal(h: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(h.clone()).or_else(|| {
        let n = h.nrows();
        let shift = 1e-14 * h.diagonal().max().max(1.0);
        Cholesky::new(h + DMatrix::identity(n, n) * shift)
    })
}

/// Solves `ĜᵀĜ x = r`, refining against `Ĝ` itself so the dual residual of
/// the step does not inherit the squared condition number of `ĜᵀĜ`.
fn solve_normal(chol: &Cholesky<f64, Dyn>, g: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let mut x = chol.solve(r);
    let mut last = f64::INFINITY;
    for _ in 0..3 {
        let res = r - g.tr_mul(&(g * &x));
        let n = res.norm();
        if !(n < 0.5 * last) || n <= 1e-15 * r.norm() {
            break;
        }
        x += chol.solve(&res);
        last = n;
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

pub(crate) fn solve_standard(p: &StandardForm, settings: &Settings) -> IpmOutput {
    let n = p.c.len();
    let cone = Cone::new(&p.blocks);
    let m = cone.len;
    let nu = cone.order() as f64;
    let trace = std::env::var_os("RMP_SOLVER_TRACE").is_some();

    let normc = p.c.norm().max(1.0);
    let normh = p.h.norm().max(1.0);

    let mut x = DVector::zeros(n);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;
    let mut sc: Vec<BlockScaling> = p
        .blocks
        .iter()
        .map(|&d| BlockScaling {
            r: DMatrix::identity(d, d),
            rti: DMatrix::identity(d, d),
            lam: DVector::from_element(d, 1.0),
        })
        .collect();

    let mut out = IpmOutput {
        status: SolveStatus::NumericalFailure,
        x: DVector::zeros(n),
        s: DVector::zeros(m),
        z: DVector::zeros(m),
        iterations: 0,
        primal_residual: f64::INFINITY,
        dual_residual: f64::INFINITY,
    };

    // Slacks are stored directly and the scaling is recomputed from them each
    // iteration, so no error accumulates in products of scaling factors.
    let mut s = cone.identity();
    let mut z = cone.identity();

    for it in 0..=settings.max_iters {
        let lam = cone.lambda_vec(&sc);

        let gtz = p.g.tr_mul(&z);
        let gx = &p.g * &x;
        let rx = &gtz + &p.c * tau;
        let rz = &s + &gx - &p.h * tau;
        let cx = p.c.dot(&x);
        let hz = p.h.dot(&z);
        let rt = kappa + cx + hz;
        let sz = s.dot(&z);
        let mu = (sz + tau * kappa) / (nu + 1.0);

        let pcost = cx / tau;
        let dcost = -hz / tau;
        let pres = rz.norm() / tau / normh;
        let dres = rx.norm() / tau / normc;
        let gap = sz / (tau * tau);
        out.iterations = it;
        out.primal_residual = pres;
        out.dual_residual = dres;

        if trace {
            eprintln!(
                "ipm it={it:3} pcost={pcost:+.10e} dcost={dcost:+.10e} gap={gap:.2e} pres={pres:.2e} dres={dres:.2e} tau={tau:.2e} kappa={kappa:.2e}"
            );
        }

        let gap_ok = (pcost - dcost).abs() <= settings.gap_tol * (1.0 + pcost.abs())
            && gap <= settings.gap_tol * (1.0 + pcost.abs());
        if pres <= settings.feas_tol && dres <= settings.feas_tol && gap_ok {
            out.status = SolveStatus::Optimal;
            out.x = &x / tau;
            out.s = &s / tau;
            out.z = &z / tau;
            return out;
        }
        if hz < 0.0 && gtz.norm() / normc / (-hz) <= settings.feas_tol {
            out.status = SolveStatus::Infeasible;
            out.z = &z / (-hz);
            out.x = DVector::zeros(n);
            out.s = DVector::zeros(m);
            return out;
        }
        if cx < 0.0 && (&s + &gx).norm() / normh / (-cx) <= settings.feas_tol {
            out.status = SolveStatus::Unbounded;
            out.x = &x / (-cx);
            out.s = &s / (-cx);
            out.z = DVector::zeros(m);
            return out;
        }
        if it == settings.max_iters {
            break;
        }

        // Scaled data for this iteration.
        let mut ghat = DMatrix::zeros(m, n);
        for j in 0..n {
            let col: Vec<f64> = p.g.column(j).iter().copied().collect();
            ghat.set_column(j, &cone.w_inv_t(&col, &sc));
        }
        let hhat = cone.w_inv_t(p.h.as_slice(), &sc);
        let rzhat = cone.w_inv_t(rz.as_slice(), &sc);
        let Some(chol) = factor_normal(&ghat.tr_mul(&ghat)) else {
            break;
        };
        let g1 = ghat.tr_mul(&hhat) - &p.c;
        let Some(dx1) = solve_normal(&chol, &ghat, &g1) else {
            break;
        };
        let dz1 = &ghat * &dx1 - &hhat;
        let denom = p.c.dot(&dx1) + hhat.dot(&dz1) - kappa / tau;

        let lamsq = cone.jordan(lam.as_slice(), lam.as_slice());
        let solve_dir = |rs: &DVector<f64>, rk: f64, eta: f64| -> Option<Dir> {
            let q = cone.lambda_solve(rs.as_slice(), &sc);
            let rhs = -(&rx * eta) - ghat.tr_mul(&(&rzhat * eta + &q));
            let dx0 = solve_normal(&chol, &ghat, &rhs)?;
            let dz0 = &ghat * &dx0 + &rzhat * eta + &q;
            let dtau = (-eta * rt - rk / tau - p.c.dot(&dx0) - hhat.dot(&dz0)) / denom;
            let dx = dx0 + &dx1 * dtau;
            let dz = dz0 + &dz1 * dtau;
            let ds = &q - &dz;
            let dkappa = (rk - kappa * dtau) / tau;
            Some(Dir {
                dx,
                ds,
                dz,
                dtau,
                dkappa,
            })
        };
        let step_to_boundary = |d: &Dir| -> f64 {
            let mut a = cone
                .max_step(d.ds.as_slice(), &sc)
                .min(cone.max_step(d.dz.as_slice(), &sc));
            if d.dtau < 0.0 {
                a = a.min(-tau / d.dtau);
            }
            if d.dkappa < 0.0 {
                a = a.min(-kappa / d.dkappa);
            }
            a
        };

        let Some(aff) = solve_dir(&(-&lamsq), -tau * kappa, 1.0) else {
            break;
        };
        let alpha_aff = step_to_boundary(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);
        let rs = -&lamsq - cone.jordan(aff.ds.as_slice(), aff.dz.as_slice()) + cone.identity() * (sigma * mu);
        let rk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        let Some(dir) = solve_dir(&rs, rk, 1.0 - sigma) else {
            break;
        };
        let alpha = (0.99 * step_to_boundary(&dir)).min(1.0);
        if !(alpha > 1e-14) {
            break;
        }

        x += &dir.dx * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        s += cone.w_t(dir.ds.as_slice(), &sc) * alpha;
        z += cone.w_inv(dir.dz.as_slice(), &sc) * alpha;
        let mut next = Vec::with_capacity(sc.len());
        for (k, &d) in cone.dims.iter().enumerate() {
            let fresh = nt_scaling(
                smat(cone.block(s.as_slice(), k), d),
                smat(cone.block(z.as_slice(), k), d),
            );
            let upd = match fresh {
                Some(u) => u,
                None => {
                    // Near the boundary the stored slacks may lose definiteness
                    // in floating point; update the scaling in the scaled frame.
                    let lamd = DMatrix::from_diagonal(&sc[k].lam);
                    let st = &lamd + smat(cone.block(dir.ds.as_slice(), k), d) * alpha;
                    let zt = &lamd + smat(cone.block(dir.dz.as_slice(), k), d) * alpha;
                    let Some(u) = nt_scaling(st, zt) else {
                        return finish_failure(out, &x, tau, &s, &z);
                    };
                    let u = BlockScaling {
                        r: &sc[k].r * u.r,
                        rti: &sc[k].rti * u.rti,
                        lam: u.lam,
                    };
                    let lm = DMatrix::from_diagonal(&u.lam);
                    let off = cone.offsets[k];
                    let len = svec_len(d);
                    s.rows_mut(off, len).copy_from(&svec(&(&u.r * &lm * u.r.transpose())));
                    z.rows_mut(off, len)
                        .copy_from(&svec(&(&u.rti * &lm * u.rti.transpose())));
                    u
                }
            };
            next.push(upd);
        }
        sc = next;
    }
    finish_failure(out, &x, tau, &s, &z)
}

struct Dir {
    dx: DVector<f64>,
    ds: DVector<f64>,
    dz: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

fn finish_failure(mut out: IpmOutput, x: &DVector<f64>, tau: f64, s: &DVector<f64>, z: &DVector<f64>) -> IpmOutput {
    out.status = SolveStatus::NumericalFailure;
    out.x = x / tau;
    out.s = s / tau;
    out.z = z / tau;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(c: &[f64], g: &[&[f64]], h: &[f64]) -> StandardForm {
        let m = g.len();
        let n = c.len();
        StandardForm {
            c: DVector::from_column_slice(c),
            g: DMatrix::from_fn(m, n, |i, j| g[i][j]),
            h: DVector::from_column_slice(h),
            blocks: vec![1; m],
        }
    }

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0; optimum at (1.6, 1.2).
        let p = lp(
            &[-1.0, -1.0],
            &[&[1.0, 2.0], &[3.0, 1.0], &[-1.0, 0.0], &[0.0, -1.0]],
            &[4.0, 6.0, 0.0, 0.0],
        );
        let out = solve_standard(&p, &Settings::default());
        assert_eq!(out.status, SolveStatus::Optimal);
        assert!((out.x[0] - 1.6).abs() < 1e-7);
        assert!((out.x[1] - 1.2).abs() < 1e-7);
    }

    #[test]
    fn infeasible_lp() {
        // x <= -1, x >= 0
        let p = lp(&[1.0], &[&[1.0], &[-1.0]], &[-1.0, 0.0]);
        let out = solve_standard(&p, &Settings::default());
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!((p.h.dot(&out.z) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn unbounded_lp() {
        // min -x s.t. x >= 0
        let p = lp(&[-1.0], &[&[-1.0]], &[0.0]);
        let out = solve_standard(&p, &Settings::default());
        assert_eq!(out.status, SolveStatus::Unbounded);
    }
}
