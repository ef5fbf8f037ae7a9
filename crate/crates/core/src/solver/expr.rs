//! Affine expressions over real scalar variables and the program builder.

use crate::error::{Result, RmpError};
use crate::hermitian::{
    c, extend_identity_raw, hs_inner, partial_trace_raw, partial_transpose_raw, permutation_between, permute_raw, CMat,
    HermitianOperator, SubsystemLayout, SubsystemSet,
};

/// Real affine function `constant + Σ coeff·x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScalarExpr {
    pub constant: f64,
    /// Sorted by variable index, no duplicates.
    pub terms: Vec<(usize, f64)>,
}

impl ScalarExpr {
    pub fn constant(v: f64) -> Self {
        Self {
            constant: v,
            terms: vec![],
        }
    }

    pub fn var(idx: usize) -> Self {
        Self {
            constant: 0.0,
            terms: vec![(idx, 1.0)],
        }
    }

    fn from_unsorted(constant: f64, mut terms: Vec<(usize, f64)>) -> Self {
        terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, v) in terms {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += v,
                _ => merged.push((i, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        Self {
            constant,
            terms: merged,
        }
    }

    pub fn add(&self, other: &ScalarExpr) -> Self {
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Self::from_unsorted(self.constant + other.constant, t)
    }

    pub fn sub(&self, other: &ScalarExpr) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(i, v)| (i, v * s)).collect(),
        }
    }

    pub fn add_constant(&self, v: f64) -> Self {
        let mut out = self.clone();
        out.constant += v;
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, v)| v * x[i]).sum::<f64>()
    }
}

/// Hermitian-valued affine expression `constant + Σ x[var]·coeff` over a layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MatExpr {
    layout: SubsystemLayout,
    constant: CMat,
    /// Sorted by variable index, no duplicates.
    terms: Vec<(usize, CMat)>,
}

impl MatExpr {
    pub fn constant(op: &HermitianOperator) -> Self {
        Self {
            layout: op.layout().clone(),
            constant: op.matrix().clone(),
            terms: vec![],
        }
    }

    pub fn zeros(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            constant: CMat::zeros(d, d),
            terms: vec![],
        }
    }

    /// `s · m` for a scalar expression `s` and a fixed Hermitian matrix `m`.
    pub fn scalar_times(s: &ScalarExpr, m: &HermitianOperator) -> Self {
        Self {
            layout: m.layout().clone(),
            constant: m.matrix().scale(s.constant),
            terms: s.terms.iter().map(|&(i, v)| (i, m.matrix().scale(v))).collect(),
        }
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.constant.nrows()
    }

    pub(crate) fn constant_part(&self) -> &CMat {
        &self.constant
    }

    pub(crate) fn terms(&self) -> &[(usize, CMat)] {
        &self.terms
    }

    fn map(&self, layout: SubsystemLayout, f: impl Fn(&CMat) -> CMat) -> Self {
        Self {
            layout,
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(i, m)| (*i, f(m))).collect(),
        }
    }

    fn require_layout(&self, other: &MatExpr) -> Result<()> {
        if self.layout != other.layout {
            return Err(RmpError::DimensionMismatch(format!(
                "expression layouts {:?} and {:?} differ",
                self.layout.labels(),
                other.layout.labels()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &MatExpr) -> Result<Self> {
        self.require_layout(other)?;
        let mut terms: Vec<(usize, CMat)> = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (mut a, mut b) = (self.terms.iter().peekable(), other.terms.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some(x), Some(y)) if x.0 == y.0 => {
                    terms.push((x.0, &x.1 + &y.1));
                    a.next();
                    b.next();
                }
                (Some(x), Some(y)) if x.0 < y.0 => {
                    terms.push((*x).clone());
                    a.next();
                }
                (Some(_), Some(y)) => {
                    terms.push((*y).clone());
                    b.next();
                }
                (Some(x), None) => {
                    terms.push((*x).clone());
                    a.next();
                }
                (None, Some(y)) => {
                    terms.push((*y).clone());
                    b.next();
                }
                (None, None) => break,
            }
        }
        Ok(Self {
            layout: self.layout.clone(),
            constant: &self.constant + &other.constant,
            terms,
        })
    }

    pub fn sub(&self, other: &MatExpr) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(self.layout.clone(), |m| m.scale(s))
    }

    pub fn add_constant(&self, op: &HermitianOperator) -> Result<Self> {
        self.add(&MatExpr::constant(op))
    }

    pub fn sub_constant(&self, op: &HermitianOperator) -> Result<Self> {
        self.add(&MatExpr::constant(&op.scale(-1.0)))
    }

    /// Reduction onto `keep` in layout order.
    pub fn partial_trace(&self, keep: &SubsystemSet) -> Result<Self> {
        let mask = self.layout.mask(keep.labels())?;
        let dims = self.layout.dims();
        Ok(self.map(self.layout.select(&mask), |m| partial_trace_raw(m, &dims, &mask)))
    }

    pub fn trace_out<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let mut mask = vec![true; self.layout.len()];
        for l in labels {
            let p = self
                .layout
                .position(l.as_ref())
                .ok_or_else(|| RmpError::UnknownLabel(l.as_ref().to_string()))?;
            mask[p] = false;
        }
        let dims = self.layout.dims();
        Ok(self.map(self.layout.select(&mask), |m| partial_trace_raw(m, &dims, &mask)))
    }

    pub fn partial_transpose(&self, part: &SubsystemSet) -> Result<Self> {
        let mask = self.layout.mask(part.labels())?;
        let dims = self.layout.dims();
        Ok(self.map(self.layout.clone(), |m| partial_transpose_raw(m, &dims, &mask)))
    }

    pub fn reorder(&self, to: &SubsystemLayout) -> Result<Self> {
        let perm = permutation_between(&self.layout, to)?;
        let dims = self.layout.dims();
        Ok(self.map(to.clone(), |m| permute_raw(m, &dims, &perm)))
    }

    /// `self ⊗ I` on the rest of `full`, in `full`'s order.
    pub fn extend_identity(&self, full: &SubsystemLayout) -> Result<Self> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (i, m) in &self.terms {
            out.push((*i, extend_identity_raw(m, &self.layout, full)?));
        }
        Ok(Self {
            layout: full.clone(),
            constant: extend_identity_raw(&self.constant, &self.layout, full)?,
            terms: out,
        })
    }

    /// `u · self · u†` with `u` square of the same dimension.
    pub fn conjugate(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(RmpError::DimensionMismatch(
                "conjugating matrix has the wrong shape".into(),
            ));
        }
        let ua = u.adjoint();
        Ok(self.map(self.layout.clone(), |m| u * m * &ua))
    }

    /// `v · self · v†` for a `D × d` matrix `v`, landing on `layout` of dimension `D`.
    pub fn congruence(&self, v: &CMat, layout: SubsystemLayout) -> Result<Self> {
        if v.ncols() != self.dim() || v.nrows() != layout.total_dim() {
            return Err(RmpError::DimensionMismatch(
                "congruence matrix has the wrong shape".into(),
            ));
        }
        let va = v.adjoint();
        Ok(self.map(layout, |m| v * m * &va))
    }

    /// Entries off the diagonal only.
    pub fn off_diagonal(&self) -> Self {
        self.map(self.layout.clone(), |m| {
            let mut o = m.clone();
            for k in 0..o.nrows() {
                o[(k, k)] = c(0.0, 0.0);
            }
            o
        })
    }

    pub fn relabel(&self, layout: SubsystemLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(RmpError::DimensionMismatch(
                "relabeled layout has a different dimension".into(),
            ));
        }
        Ok(Self { layout, ..self.clone() })
    }

    pub fn trace(&self) -> ScalarExpr {
        let tr = |m: &CMat| m.diagonal().iter().map(|z| z.re).sum::<f64>();
        ScalarExpr::from_unsorted(
            tr(&self.constant),
            self.terms.iter().map(|(i, m)| (*i, tr(m))).collect(),
        )
    }

    /// `tr(h · self)`, real for Hermitian `h`.
    pub fn inner(&self, h: &HermitianOperator) -> Result<ScalarExpr> {
        if h.layout() != &self.layout {
            return Err(RmpError::DimensionMismatch(format!(
                "observable layout {:?} differs from expression layout {:?}",
                h.layout().labels(),
                self.layout.labels()
            )));
        }
        let hm = h.matrix();
        Ok(ScalarExpr::from_unsorted(
            hs_inner(hm, &self.constant),
            self.terms.iter().map(|(i, m)| (*i, hs_inner(hm, m))).collect(),
        ))
    }

    pub fn value(&self, x: &[f64]) -> CMat {
        let mut m = self.constant.clone();
        for (i, t) in &self.terms {
            m += t.scale(x[*i]);
        }
        m
    }

    pub fn value_op(&self, x: &[f64]) -> HermitianOperator {
        HermitianOperator::from_hermitian(self.layout.clone(), self.value(x))
    }

    pub(crate) fn is_real(&self) -> bool {
        self.constant.iter().all(|z| z.im == 0.0) && self.terms.iter().all(|(_, m)| m.iter().all(|z| z.im == 0.0))
    }
}

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Handle to a PSD constraint, used to look up its dual multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PsdHandle(pub(crate) usize);

/// Handle to a declared matrix variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarHandle(pub(crate) usize);

#[derive(Debug, Clone)]
pub(crate) struct PsdConstraint {
    pub expr: MatExpr,
}

#[derive(Debug, Clone)]
pub(crate) struct MatrixVar {
    pub expr: MatExpr,
}

/// A block-structured semidefinite program over real scalar variables.
///
/// Matrix variables are Hermitian and stored as `d²` real coordinates. Every
/// inequality is a Hermitian linear matrix inequality, complex ones entering
/// the solver through the real embedding.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub(crate) num_vars: usize,
    pub(crate) sense: Sense,
    pub(crate) objective: ScalarExpr,
    pub(crate) equalities: Vec<ScalarExpr>,
    pub(crate) psd: Vec<PsdConstraint>,
    pub(crate) vars: Vec<MatrixVar>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_equalities(&self) -> usize {
        self.equalities.len()
    }

    pub fn num_psd(&self) -> usize {
        self.psd.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Checks every constraint at `x`, returning the worst violation.
    pub fn max_violation(&self, x: &[f64]) -> Result<f64> {
        let mut worst = 0.0f64;
        for e in &self.equalities {
            worst = worst.max(e.value(x).abs());
        }
        for p in &self.psd {
            let v = p.expr.value_op(x).min_eigenvalue()?;
            worst = worst.max(-v);
        }
        Ok(worst)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }
}

/// Incrementally assembles a [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    num_vars: usize,
    objective: Option<(Sense, ScalarExpr)>,
    equalities: Vec<ScalarExpr>,
    psd: Vec<PsdConstraint>,
    vars: Vec<MatrixVar>,
}

impl Default for ProgramBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self {
            num_vars: 0,
            objective: None,
            equalities: vec![],
            psd: vec![],
            vars: vec![],
        }
    }

    pub fn scalar(&mut self) -> ScalarExpr {
        let e = ScalarExpr::var(self.num_vars);
        self.num_vars += 1;
        e
    }

    /// Scalar constrained to be nonnegative.
    pub fn nonneg_scalar(&mut self) -> ScalarExpr {
        let s = self.scalar();
        self.nonneg(&s);
        s
    }

    /// Free Hermitian matrix variable on `layout`.
    pub fn hermitian(&mut self, layout: &SubsystemLayout) -> (VarHandle, MatExpr) {
        let d = layout.total_dim();
        let mut terms = Vec::with_capacity(d * d);
        for k in 0..d {
            let mut m = CMat::zeros(d, d);
            m[(k, k)] = c(1.0, 0.0);
            terms.push((self.num_vars, m));
            self.num_vars += 1;
            for l in k + 1..d {
                let mut re = CMat::zeros(d, d);
                re[(k, l)] = c(1.0, 0.0);
                re[(l, k)] = c(1.0, 0.0);
                terms.push((self.num_vars, re));
                self.num_vars += 1;
                let mut im = CMat::zeros(d, d);
                im[(k, l)] = c(0.0, 1.0);
                im[(l, k)] = c(0.0, -1.0);
                terms.push((self.num_vars, im));
                self.num_vars += 1;
            }
        }
        let expr = MatExpr {
            layout: layout.clone(),
            constant: CMat::zeros(d, d),
            terms,
        };
        self.vars.push(MatrixVar { expr: expr.clone() });
        (VarHandle(self.vars.len() - 1), expr)
    }

    /// Hermitian variable constrained PSD.
    pub fn psd_variable(&mut self, layout: &SubsystemLayout) -> (VarHandle, MatExpr, PsdHandle) {
        let (v, e) = self.hermitian(layout);
        let h = self.psd(&e);
        (v, e, h)
    }

    pub fn psd(&mut self, expr: &MatExpr) -> PsdHandle {
        self.psd.push(PsdConstraint { expr: expr.clone() });
        PsdHandle(self.psd.len() - 1)
    }

    pub fn nonneg(&mut self, s: &ScalarExpr) -> PsdHandle {
        let l = SubsystemLayout::trivial();
        let mut terms: Vec<(usize, CMat)> = s
            .terms
            .iter()
            .map(|&(i, v)| (i, CMat::from_element(1, 1, c(v, 0.0))))
            .collect();
        terms.sort_by_key(|t| t.0);
        self.psd(&MatExpr {
            layout: l,
            constant: CMat::from_element(1, 1, c(s.constant, 0.0)),
            terms,
        })
    }

    /// `a ⪰ b`.
    pub fn psd_geq(&mut self, a: &MatExpr, b: &MatExpr) -> Result<PsdHandle> {
        let d = a.sub(b)?;
        Ok(self.psd(&d))
    }

    pub fn eq_scalar(&mut self, s: &ScalarExpr) {
        self.equalities.push(s.clone());
    }

    /// Entrywise `expr = 0`, expanded into real equations on the upper triangle.
    pub fn eq_zero(&mut self, expr: &MatExpr) {
        let d = expr.dim();
        for i in 0..d {
            for j in i..d {
                let re = ScalarExpr::from_unsorted(
                    expr.constant[(i, j)].re,
                    expr.terms.iter().map(|(k, m)| (*k, m[(i, j)].re)).collect(),
                );
                self.push_eq(re);
                if i != j {
                    let im = ScalarExpr::from_unsorted(
                        expr.constant[(i, j)].im,
                        expr.terms.iter().map(|(k, m)| (*k, m[(i, j)].im)).collect(),
                    );
                    self.push_eq(im);
                }
            }
        }
    }

    pub fn eq(&mut self, a: &MatExpr, b: &MatExpr) -> Result<()> {
        let d = a.sub(b)?;
        self.eq_zero(&d);
        Ok(())
    }

    fn push_eq(&mut self, e: ScalarExpr) {
        if e.terms.is_empty() && e.constant == 0.0 {
            return;
        }
        self.equalities.push(e);
    }

    pub fn minimize(&mut self, obj: &ScalarExpr) {
        self.objective = Some((Sense::Minimize, obj.clone()));
    }

    pub fn maximize(&mut self, obj: &ScalarExpr) {
        self.objective = Some((Sense::Maximize, obj.clone()));
    }

    pub fn build(self) -> ConicProgram {
        let (sense, objective) = self.objective.unwrap_or((Sense::Minimize, ScalarExpr::constant(0.0)));
        ConicProgram {
            num_vars: self.num_vars,
            sense,
            objective,
            equalities: self.equalities,
            psd: self.psd,
            vars: self.vars,
        }
    }
}
