//! Dense semidefinite programming with primal/dual certificates.

mod expr;
mod ipm;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use expr::{ConicProgram, MatExpr, ProgramBuilder, PsdHandle, ScalarExpr, Sense, VarHandle};
use ipm::{solve_standard, StandardForm};

use crate::error::{Result, RmpError};
use crate::hermitian::{c, embedding_adjoint, real_embedding_mat, smat, svec, svec_len, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::Unbounded => "Unbounded",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_iters: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iters: 200,
        }
    }
}

/// Evidence accompanying a non-optimal status.
#[derive(Debug, Clone)]
pub enum Certificate {
    /// Dual multipliers `{Y_k ⪰ 0}` and equality multipliers `y` whose
    /// combination annihilates every variable while the constants give
    /// `Σ tr(Y_k F_k0) + Σ y_j b_j = -1`: no feasible point exists.
    PrimalInfeasible { psd: Vec<CMat>, equalities: Vec<f64> },
    /// Recession direction `d` of the feasible set along which the
    /// (minimization-oriented) objective decreases by one unit.
    Unbounded { direction: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// Objective at the returned point, in the program's own sense. `±∞` for
    /// infeasible or unbounded programs.
    pub primal_value: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub x: Vec<f64>,
    /// Values of the declared matrix variables.
    pub primal_blocks: Vec<CMat>,
    /// Hermitian multiplier `Y_k ⪰ 0` of each PSD constraint, paired as
    /// `tr(Y_k F_k(x))`.
    pub dual_multipliers: Vec<CMat>,
    pub equality_multipliers: Vec<f64>,
    pub certificate: Option<Certificate>,
}

impl SolveResult {
    pub fn dual(&self, h: PsdHandle) -> &CMat {
        &self.dual_multipliers[h.0]
    }

    pub fn var(&self, v: VarHandle) -> &CMat {
        &self.primal_blocks[v.0]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Errors unless the status is optimal.
    pub fn require_optimal(&self, what: &str) -> Result<()> {
        if self.is_optimal() {
            Ok(())
        } else {
            Err(RmpError::Solver {
                status: self.status,
                detail: format!(
                    "{what}: status {} after {} iterations (primal residual {:.2e}, dual residual {:.2e})",
                    self.status, self.iterations, self.primal_residual, self.dual_residual
                ),
            })
        }
    }
}

struct BlockInfo {
    offset: usize,
    /// Order of the real block.
    order: usize,
    complex: bool,
}

fn lmi_vec(m: &CMat, info: &BlockInfo) -> DVector<f64> {
    if info.complex {
        svec(&real_embedding_mat(m))
    } else {
        svec(&m.map(|z| z.re))
    }
}

/// Solves a [`ConicProgram`].
pub fn solve(p: &ConicProgram, settings: &Settings) -> SolveResult {
    let n = p.num_vars;
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };

    let mut cvec = DVector::zeros(n);
    for &(i, v) in &p.objective.terms {
        cvec[i] += sign * v;
    }
    let c0 = sign * p.objective.constant;

    // Cone blocks.
    let mut infos = Vec::with_capacity(p.psd.len());
    let mut rows = 0;
    for con in &p.psd {
        let d = con.expr.dim();
        let complex = d > 1 && !con.expr.is_real();
        let order = if complex { 2 * d } else { d };
        infos.push(BlockInfo {
            offset: rows,
            order,
            complex,
        });
        rows += svec_len(order);
    }
    let mut g = DMatrix::zeros(rows, n);
    let mut h = DVector::zeros(rows);
    for (con, info) in p.psd.iter().zip(&infos) {
        let len = svec_len(info.order);
        h.rows_mut(info.offset, len)
            .copy_from(&lmi_vec(con.expr.constant_part(), info));
        for (i, coef) in con.expr.terms() {
            let v = lmi_vec(coef, info);
            let mut col = g.view_mut((info.offset, *i), (len, 1));
            col -= &v;
        }
    }

    // Equalities a'x = b.
    let meq = p.equalities.len();
    let mut a = DMatrix::zeros(meq, n);
    let mut b = DVector::zeros(meq);
    for (r, e) in p.equalities.iter().enumerate() {
        for &(i, v) in &e.terms {
            a[(r, i)] += v;
        }
        b[r] = -e.constant;
    }

    let elim = eliminate_equalities(&a, &b);
    let blocks: Vec<usize> = infos.iter().map(|i| i.order).collect();

    let finish = |status: SolveStatus,
                  x: DVector<f64>,
                  z: DVector<f64>,
                  iterations: usize,
                  pres: f64,
                  dres: f64,
                  certificate: Option<Certificate>| {
        let xs: Vec<f64> = x.iter().copied().collect();
        let dual_multipliers: Vec<CMat> = p
            .psd
            .iter()
            .zip(&infos)
            .map(|(con, info)| {
                let zb = smat(
                    &z.as_slice()[info.offset..info.offset + svec_len(info.order)],
                    info.order,
                );
                if info.complex {
                    embedding_adjoint(&zb)
                } else {
                    let _ = con;
                    zb.map(|v| c(v, 0.0))
                }
            })
            .collect();
        let (pv, dv, eqd) = match status {
            SolveStatus::Optimal | SolveStatus::NumericalFailure => {
                let pv = cvec.dot(&x) + c0;
                let gtz = g.tr_mul(&z);
                let r = -(&cvec + &gtz);
                let y = elim.least_squares_multipliers(&r);
                let dv = -h.dot(&z) - b.dot(&y) + c0;
                (pv, dv, y.iter().copied().collect())
            }
            SolveStatus::Infeasible => (f64::INFINITY, f64::INFINITY, vec![0.0; meq]),
            SolveStatus::Unbounded => (f64::NEG_INFINITY, f64::NEG_INFINITY, vec![0.0; meq]),
        };
        let eq_mult: Vec<f64> = match &certificate {
            Some(Certificate::PrimalInfeasible { equalities, .. }) => equalities.clone(),
            _ => eqd,
        };
        let cert = match (status, certificate) {
            (SolveStatus::Infeasible, None) => Some(Certificate::PrimalInfeasible {
                psd: dual_multipliers.clone(),
                equalities: eq_mult.clone(),
            }),
            (_, c) => c,
        };
        SolveResult {
            status,
            primal_value: sign * pv,
            dual_value: sign * dv,
            gap: if pv.is_finite() { (pv - dv).abs() } else { 0.0 },
            iterations,
            primal_residual: pres,
            dual_residual: dres,
            primal_blocks: p.vars.iter().map(|v| v.expr.value(&xs)).collect(),
            x: xs,
            dual_multipliers,
            equality_multipliers: eq_mult,
            certificate: cert,
        }
    };

    if !elim.consistent {
        let y = elim.inconsistency.clone();
        return finish(
            SolveStatus::Infeasible,
            DVector::zeros(n),
            DVector::zeros(rows),
            0,
            f64::INFINITY,
            0.0,
            Some(Certificate::PrimalInfeasible {
                psd: p.psd.iter().map(|c| CMat::zeros(c.expr.dim(), c.expr.dim())).collect(),
                equalities: y.iter().copied().collect(),
            }),
        );
    }

    let nmat = &elim.null;
    let x0 = &elim.x0;
    let mut ct = nmat.tr_mul(&cvec);
    let mut gt = &g * nmat;
    let ht = &h - &g * x0;
    let const_x0 = cvec.dot(x0);

    // Directions invisible to every cone either leave the objective unchanged
    // (dropped) or make a feasible program unbounded.
    let (range, null_cost) = column_range(&gt, &ct);
    let mut basis = nmat.clone();
    if let Some(rb) = range {
        basis = nmat * &rb;
        ct = rb.tr_mul(&ct);
        gt = &gt * &rb;
    }
    let _ = const_x0;

    let r = basis.ncols();
    if r == 0 || blocks.is_empty() {
        // No free coordinates reach a cone: the slack is fixed.
        let x = x0.clone();
        if let Some(d) = &null_cost {
            if slack_in_cone(&ht, &blocks, settings.feas_tol * ht.norm().max(1.0)).is_none() {
                let dir = nmat * d;
                return finish(
                    SolveStatus::Unbounded,
                    DVector::zeros(n),
                    DVector::zeros(rows),
                    0,
                    0.0,
                    0.0,
                    Some(Certificate::Unbounded {
                        direction: dir.iter().copied().collect(),
                    }),
                );
            }
        }
        return match slack_in_cone(&ht, &blocks, settings.feas_tol * ht.norm().max(1.0)) {
            None => finish(SolveStatus::Optimal, x, DVector::zeros(rows), 0, 0.0, 0.0, None),
            Some(zc) => {
                let hz = ht.dot(&zc);
                finish(
                    SolveStatus::Infeasible,
                    DVector::zeros(n),
                    zc / (-hz),
                    0,
                    f64::INFINITY,
                    0.0,
                    None,
                )
            }
        };
    }

    let sf = StandardForm {
        c: ct,
        g: gt,
        h: ht,
        blocks,
    };
    let out = solve_standard(&sf, settings);

    let status = match (out.status, &null_cost) {
        (SolveStatus::Optimal, Some(_)) => SolveStatus::Unbounded,
        (s, _) => s,
    };
    match status {
        SolveStatus::Unbounded => {
            let dir = match (&null_cost, out.status) {
                (Some(d), SolveStatus::Optimal) => nmat * d,
                _ => &basis * &out.x,
            };
            finish(
                SolveStatus::Unbounded,
                DVector::zeros(n),
                DVector::zeros(rows),
                out.iterations,
                out.primal_residual,
                out.dual_residual,
                Some(Certificate::Unbounded {
                    direction: dir.iter().copied().collect(),
                }),
            )
        }
        SolveStatus::Infeasible => finish(
            SolveStatus::Infeasible,
            DVector::zeros(n),
            out.z,
            out.iterations,
            out.primal_residual,
            out.dual_residual,
            None,
        ),
        s => {
            let x = x0 + &basis * &out.x;
            finish(
                s,
                x,
                out.z,
                out.iterations,
                out.primal_residual,
                out.dual_residual,
                None,
            )
        }
    }
}

/// Checks `h ∈ K` up to `tol`; on failure returns a separating `z ∈ K` with `h'z < 0`.
fn slack_in_cone(h: &DVector<f64>, blocks: &[usize], tol: f64) -> Option<DVector<f64>> {
    let mut off = 0;
    for &d in blocks {
        let len = svec_len(d);
        let m = smat(&h.as_slice()[off..off + len], d);
        let eig = m.symmetric_eigen();
        let (k, &min) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty block");
        if min < -tol {
            let v = eig.eigenvectors.column(k);
            let mut z = DVector::zeros(h.len());
            z.rows_mut(off, len).copy_from(&svec(&(v * v.transpose())));
            return Some(z);
        }
        off += len;
    }
    None
}

struct Elimination {
    consistent: bool,
    x0: DVector<f64>,
    null: DMatrix<f64>,
    inconsistency: DVector<f64>,
    /// Thin SVD factors of `A` restricted to its numerical range.
    u: DMatrix<f64>,
    sv: Vec<f64>,
    v: DMatrix<f64>,
}

impl Elimination {
    /// Minimum-norm `y` with `A'y ≈ r`.
    fn least_squares_multipliers(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.u.nrows());
        for (k, &s) in self.sv.iter().enumerate() {
            let coef = self.v.column(k).dot(r) / s;
            y += self.u.column(k) * coef;
        }
        y
    }
}

const RANK_TOL: f64 = 1e-10;

fn eliminate_equalities(a: &DMatrix<f64>, b: &DVector<f64>) -> Elimination {
    let (m, n) = a.shape();
    if m == 0 {
        return Elimination {
            consistent: true,
            x0: DVector::zeros(n),
            null: DMatrix::identity(n, n),
            inconsistency: DVector::zeros(0),
            u: DMatrix::zeros(0, 0),
            sv: vec![],
            v: DMatrix::zeros(n, 0),
        };
    }
    // Pad to at least n rows so the SVD returns a full right basis.
    let rows = m.max(n);
    let mut ap = DMatrix::zeros(rows, n);
    ap.view_mut((0, 0), (m, n)).copy_from(a);
    let svd = ap.svd(true, true);
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let smax = svd.singular_values.max();
    let tol = RANK_TOL * smax.max(1e-300);
    let mut range = vec![];
    let mut null = vec![];
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > tol {
            range.push(k);
        } else {
            null.push(k);
        }
    }
    let mut bp = DVector::zeros(rows);
    bp.rows_mut(0, m).copy_from(b);
    let mut x0 = DVector::zeros(n);
    let mut uu = DMatrix::zeros(m, range.len());
    let mut vv = DMatrix::zeros(n, range.len());
    let mut sv = Vec::with_capacity(range.len());
    for (col, &k) in range.iter().enumerate() {
        let s = svd.singular_values[k];
        let uk = u.column(k);
        let vk = vt.row(k).transpose();
        x0 += &vk * (uk.dot(&bp) / s);
        uu.set_column(col, &uk.rows(0, m).into_owned());
        vv.set_column(col, &vk);
        sv.push(s);
    }
    let mut nmat = DMatrix::zeros(n, null.len());
    for (col, &k) in null.iter().enumerate() {
        nmat.set_column(col, &vt.row(k).transpose());
    }
    let resid = a * &x0 - b;
    let consistent = resid.norm() <= 1e-9 * b.norm().max(1.0);
    Elimination {
        consistent,
        x0,
        null: nmat,
        inconsistency: if consistent {
            DVector::zeros(m)
        } else {
            resid.clone() / (-resid.norm_squared())
        },
        u: uu,
        sv,
        v: vv,
    }
}

/// Splits the columns of `g` into numerical range and null directions.
/// Returns a basis of the range (None if full rank) and, if the cost has a
/// component along the null space, that component.
fn column_range(g: &DMatrix<f64>, c: &DVector<f64>) -> (Option<DMatrix<f64>>, Option<DVector<f64>>) {
    let (m, n) = g.shape();
    if n == 0 {
        return (None, None);
    }
    let rows = m.max(n);
    let mut gp = DMatrix::zeros(rows, n);
    gp.view_mut((0, 0), (m, n)).copy_from(g);
    let sv = gp.svd(false, true);
    let vt = sv.v_t.expect("requested");
    let smax = sv.singular_values.max();
    let tol = RANK_TOL * smax.max(1e-300);
    let keep: Vec<usize> = (0..n).filter(|&k| sv.singular_values[k] > tol).collect();
    if keep.len() == n {
        return (None, None);
    }
    let mut range = DMatrix::zeros(n, keep.len());
    for (col, &k) in keep.iter().enumerate() {
        range.set_column(col, &vt.row(k).transpose());
    }
    let mut null_comp = DVector::zeros(n);
    for k in 0..n {
        if sv.singular_values[k] <= tol {
            let v = vt.row(k).transpose();
            null_comp += &v * v.dot(c);
        }
    }
    let cost = if null_comp.norm() > 1e-9 * c.norm().max(1.0) {
        Some(-null_comp.clone() / null_comp.norm_squared())
    } else {
        None
    };
    (Some(range), cost)
}
