use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::eig::{eig_hermitian_mat, Eigen};
use super::layout::SubsystemLayout;
use crate::config::{HERMITIAN_TOL, PSD_TOL, TRACE_TOL};
use crate::error::{Result, RmpError};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise deviation `max |a - a†|`.
pub fn hermiticity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(a + a†) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Dense Hermitian operator on a labeled tensor-product space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    layout: SubsystemLayout,
    mat: CMat,
}

impl HermitianOperator {
    /// Validates shape and Hermiticity, then stores the exact Hermitian part.
    pub fn new(layout: SubsystemLayout, mat: CMat) -> Result<Self> {
        let d = layout.total_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(RmpError::DimensionMismatch(format!(
                "matrix is {}x{} but layout has dimension {}",
                mat.nrows(),
                mat.ncols(),
                d
            )));
        }
        let defect = hermiticity_defect(&mat);
        if defect > HERMITIAN_TOL {
            return Err(RmpError::NotHermitian(defect));
        }
        Ok(Self {
            layout,
            mat: hermitian_part(&mat),
        })
    }

    /// Symmetrizes without checking; for results of exact Hermitian-preserving maps.
    pub(crate) fn from_hermitian(layout: SubsystemLayout, mat: CMat) -> Self {
        debug_assert_eq!(mat.nrows(), layout.total_dim());
        Self {
            layout,
            mat: hermitian_part(&mat),
        }
    }

    pub fn from_real(layout: SubsystemLayout, mat: &DMatrix<f64>) -> Result<Self> {
        Self::new(layout, mat.map(|x| c(x, 0.0)))
    }

    pub fn zeros(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            mat: CMat::zeros(d, d),
        }
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            layout,
            mat: CMat::identity(d, d),
        }
    }

    /// `|v⟩⟨v|` (not normalized).
    pub fn projector(layout: SubsystemLayout, v: &CVec) -> Result<Self> {
        if v.len() != layout.total_dim() {
            return Err(RmpError::DimensionMismatch(format!(
                "vector of length {} for layout of dimension {}",
                v.len(),
                layout.total_dim()
            )));
        }
        Ok(Self::from_hermitian(layout, v * v.adjoint()))
    }

    pub fn diagonal(layout: SubsystemLayout, diag: &[f64]) -> Result<Self> {
        if diag.len() != layout.total_dim() {
            return Err(RmpError::DimensionMismatch(format!(
                "{} diagonal entries for dimension {}",
                diag.len(),
                layout.total_dim()
            )));
        }
        let m = CMat::from_diagonal(&DVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x, 0.0))));
        Ok(Self { layout, mat: m })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.mat.diagonal().iter().map(|z| z.re).sum()
    }

    /// Hilbert–Schmidt inner product `tr(self · other)`, real for Hermitian pairs.
    pub fn inner(&self, other: &HermitianOperator) -> Result<f64> {
        self.require_same_layout(other)?;
        Ok(hs_inner(&self.mat, &other.mat))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            layout: self.layout.clone(),
            mat: self.mat.scale(s),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        self.require_same_layout(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<Self> {
        self.require_same_layout(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            mat: &self.mat - &other.mat,
        })
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &HermitianOperator, b: f64) -> Result<Self> {
        self.require_same_layout(other)?;
        Ok(Self {
            layout: self.layout.clone(),
            mat: self.mat.scale(a) + other.mat.scale(b),
        })
    }

    /// `u · self · u†`.
    pub fn conjugate(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(RmpError::DimensionMismatch(
                "conjugating matrix has the wrong shape".into(),
            ));
        }
        Ok(Self::from_hermitian(self.layout.clone(), u * &self.mat * u.adjoint()))
    }

    pub fn eig(&self) -> Result<Eigen> {
        eig_hermitian_mat(&self.mat)
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(self.eig()?.values)
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.first().copied().unwrap_or(0.0))
    }

    pub fn max_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.last().copied().unwrap_or(0.0))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    /// Spectral norm, the largest absolute eigenvalue.
    pub fn operator_norm(&self) -> Result<f64> {
        let v = self.eigenvalues()?;
        Ok(v.iter().fold(0.0f64, |m, x| m.max(x.abs())))
    }

    /// Trace norm `Σ |λᵢ|`.
    pub fn trace_norm(&self) -> Result<f64> {
        Ok(self.eigenvalues()?.iter().map(|x| x.abs()).sum())
    }

    /// Positive and negative parts with `self = plus - minus`, both PSD.
    pub fn jordan_parts(&self) -> Result<(Self, Self)> {
        let e = self.eig()?;
        let d = self.dim();
        let mut plus = CMat::zeros(d, d);
        let mut minus = CMat::zeros(d, d);
        for (k, &lam) in e.values.iter().enumerate() {
            let v = e.vectors.column(k);
            let p = v * v.adjoint();
            if lam > 0.0 {
                plus += p.scale(lam);
            } else {
                minus += p.scale(-lam);
            }
        }
        Ok((
            Self::from_hermitian(self.layout.clone(), plus),
            Self::from_hermitian(self.layout.clone(), minus),
        ))
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        max_abs_diff(&self.mat, &other.mat)
    }

    pub fn with_layout(&self, layout: SubsystemLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(RmpError::DimensionMismatch(
                "relabeled layout has a different dimension".into(),
            ));
        }
        Ok(Self {
            layout,
            mat: self.mat.clone(),
        })
    }

    pub(crate) fn require_same_layout(&self, other: &HermitianOperator) -> Result<()> {
        if self.layout != other.layout {
            return Err(RmpError::DimensionMismatch(format!(
                "layouts {:?} and {:?} differ",
                self.layout.labels(),
                other.layout.labels()
            )));
        }
        Ok(())
    }
}

pub(crate) fn hs_inner(a: &CMat, b: &CMat) -> f64 {
    // tr(a b) = Σ_ij a_ij b_ji
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)] * b[(j, i)];
            s += x.re;
        }
    }
    s
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

/// Unit-trace positive semidefinite operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let t = op.trace();
        if (t - 1.0).abs() > TRACE_TOL {
            return Err(RmpError::NotDensity(format!("trace is {t}")));
        }
        let m = op.min_eigenvalue()?;
        if m < -PSD_TOL {
            return Err(RmpError::NotDensity(format!("minimum eigenvalue is {m}")));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(layout: SubsystemLayout, mat: CMat) -> Result<Self> {
        Self::new(HermitianOperator::new(layout, mat)?)
    }

    /// Normalized `|v⟩⟨v| / ⟨v|v⟩`.
    pub fn pure(layout: SubsystemLayout, v: &CVec) -> Result<Self> {
        let n = v.norm();
        if n == 0.0 {
            return Err(RmpError::NotDensity("zero state vector".into()));
        }
        let op = HermitianOperator::projector(layout, &v.unscale(n))?;
        Ok(Self { op })
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim() as f64;
        Self {
            op: HermitianOperator::identity(layout).scale(1.0 / d),
        }
    }

    /// Renormalizes a PSD operator, clipping tiny negative eigenvalues caused by round-off.
    pub fn from_psd_clipped(op: &HermitianOperator) -> Result<Self> {
        let e = op.eig()?;
        let d = op.dim();
        let mut m = CMat::zeros(d, d);
        for (k, &lam) in e.values.iter().enumerate() {
            if lam > 0.0 {
                let v = e.vectors.column(k);
                m += (v * v.adjoint()).scale(lam);
            }
        }
        let t: f64 = m.diagonal().iter().map(|z| z.re).sum();
        if t <= 0.0 {
            return Err(RmpError::NotDensity("no positive spectrum".into()));
        }
        Ok(Self {
            op: HermitianOperator::from_hermitian(op.layout().clone(), m.unscale(t)),
        })
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn into_op(self) -> HermitianOperator {
        self.op
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.op.layout()
    }

    pub fn matrix(&self) -> &CMat {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Convex mixture `p·self + (1-p)·other`.
    pub fn mix(&self, p: f64, other: &DensityMatrix) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(RmpError::InvalidArgument(format!("mixing weight {p} outside [0, 1]")));
        }
        Ok(Self {
            op: self.op.combine(p, &other.op, 1.0 - p)?,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixJson {
    layout: SubsystemLayout,
    entries: Vec<Vec<[f64; 2]>>,
}

pub(crate) fn entries_to_json(m: &CMat) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub(crate) fn entries_from_json(rows: &[Vec<[f64; 2]>]) -> std::result::Result<CMat, String> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err("matrix entries must form a square array".into());
    }
    Ok(CMat::from_fn(n, n, |i, j| c(rows[i][j][0], rows[i][j][1])))
}

impl Serialize for HermitianOperator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixJson {
            layout: self.layout.clone(),
            entries: entries_to_json(&self.mat),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MatrixJson::deserialize(d)?;
        let mat = entries_from_json(&raw.entries).map_err(serde::de::Error::custom)?;
        HermitianOperator::new(raw.layout, mat).map_err(serde::de::Error::custom)
    }
}

impl Serialize for DensityMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.op.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let op = HermitianOperator::deserialize(d)?;
        DensityMatrix::new(op).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_hermitian() {
        let l = SubsystemLayout::qubits(&["A"]);
        let m = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(l, m), Err(RmpError::NotHermitian(_))));
    }

    #[test]
    fn density_checks_trace_and_positivity() {
        let l = SubsystemLayout::qubits(&["A"]);
        assert!(DensityMatrix::new(HermitianOperator::identity(l.clone())).is_err());
        let bad = HermitianOperator::diagonal(l.clone(), &[1.5, -0.5]).unwrap();
        assert!(DensityMatrix::new(bad).is_err());
        let ok = HermitianOperator::diagonal(l, &[0.25, 0.75]).unwrap();
        assert!(DensityMatrix::new(ok).is_ok());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let l = SubsystemLayout::from_pairs([("A", 2), ("B", 3)]).unwrap();
        let m = CMat::from_fn(6, 6, |i, j| {
            let (a, b) = (i.min(j) as f64, i.max(j) as f64);
            let im = if i < j {
                0.1 / 3.0
            } else if i > j {
                -0.1 / 3.0
            } else {
                0.0
            };
            c(1.0 / (1.0 + a + b * 7.0), im)
        });
        let op = HermitianOperator::new(l, m).unwrap();
        let s = serde_json::to_string(&op).unwrap();
        let back: HermitianOperator = serde_json::from_str(&s).unwrap();
        assert_eq!(back, op);
    }

    #[test]
    fn jordan_parts_match_trace_norm() {
        let l = SubsystemLayout::qubits(&["A"]);
        let sx = CMat::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let op = HermitianOperator::new(l, sx).unwrap();
        let (p, m) = op.jordan_parts().unwrap();
        assert!((op.trace_norm().unwrap() - (p.trace() + m.trace())).abs() < 1e-14);
        assert!(op.max_abs_diff(&p.sub(&m).unwrap()) < 1e-14);
    }
}
