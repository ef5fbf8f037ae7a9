use serde::{Deserialize, Serialize};

use crate::config::PSD_TOL;
use crate::error::{Result, RmpError};
use crate::hermitian::{
    c, kron, partial_trace_raw, reorder, CMat, CVec, DensityMatrix, HermitianOperator, SubsystemLayout,
};

/// Suffix appended to input labels that collide with output labels.
pub const INPUT_SUFFIX: &str = "'";

/// A channel given by its normalized Choi matrix
/// `J = (E ⊗ id)(|Φ⟩⟨Φ|)` on `out ⊗ in`, so that `tr_out J = I/d_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    in_layout: SubsystemLayout,
    out_layout: SubsystemLayout,
    choi: HermitianOperator,
}

/// Input layout with labels renamed where they collide with the output.
pub fn input_alias(input: &SubsystemLayout, output: &SubsystemLayout) -> Result<SubsystemLayout> {
    SubsystemLayout::from_pairs(input.factors().iter().map(|f| {
        let label = if output.contains(&f.label) {
            format!("{}{INPUT_SUFFIX}", f.label)
        } else {
            f.label.clone()
        };
        (label, f.dim)
    }))
}

pub fn choi_layout(input: &SubsystemLayout, output: &SubsystemLayout) -> Result<SubsystemLayout> {
    output.concat(&input_alias(input, output)?)
}

impl ChannelSpec {
    /// Validates complete positivity and trace preservation within the PSD tolerance.
    pub fn new(in_layout: SubsystemLayout, out_layout: SubsystemLayout, choi: CMat) -> Result<Self> {
        let layout = choi_layout(&in_layout, &out_layout)?;
        let choi = HermitianOperator::new(layout, choi)?;
        let ch = Self {
            in_layout,
            out_layout,
            choi,
        };
        ch.validate()?;
        Ok(ch)
    }

    fn validate(&self) -> Result<()> {
        let m = self.choi.min_eigenvalue()?;
        if m < -PSD_TOL {
            return Err(RmpError::InvalidChannel(format!(
                "Choi matrix has eigenvalue {m}: not completely positive"
            )));
        }
        let din = self.in_layout.total_dim();
        let dout = self.out_layout.total_dim();
        let mut keep = vec![false; 2];
        keep[1] = true;
        let rin = partial_trace_raw(self.choi.matrix(), &[dout, din], &keep);
        let dev = (rin - CMat::identity(din, din).unscale(din as f64))
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if dev > PSD_TOL {
            return Err(RmpError::InvalidChannel(format!(
                "input marginal deviates from I/d by {dev:.2e}: not trace preserving"
            )));
        }
        Ok(())
    }

    pub fn from_kraus(in_layout: SubsystemLayout, out_layout: SubsystemLayout, kraus: &[CMat]) -> Result<Self> {
        let din = in_layout.total_dim();
        let dout = out_layout.total_dim();
        let mut j = CMat::zeros(dout * din, dout * din);
        for k in kraus {
            if k.nrows() != dout || k.ncols() != din {
                return Err(RmpError::DimensionMismatch(format!(
                    "Kraus operator is {}x{}, expected {dout}x{din}",
                    k.nrows(),
                    k.ncols()
                )));
            }
            let v = CVec::from_fn(dout * din, |r, _| k[(r / din, r % din)]);
            j += &v * v.adjoint();
        }
        Self::new(in_layout, out_layout, j.unscale(din as f64))
    }

    /// `ρ ↦ UρU†` on `layout`.
    pub fn unitary(layout: SubsystemLayout, u: &CMat) -> Result<Self> {
        let d = layout.total_dim();
        let dev = (u.adjoint() * u - CMat::identity(d, d))
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if dev > 1e-10 {
            return Err(RmpError::InvalidChannel(format!(
                "matrix is not unitary (deviation {dev:.2e})"
            )));
        }
        Self::from_kraus(layout.clone(), layout, std::slice::from_ref(u))
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self::unitary(layout, &CMat::identity(d, d)).expect("identity is a channel")
    }

    /// `ρ ↦ tr(ρ)·τ`.
    pub fn replacement(in_layout: SubsystemLayout, tau: &DensityMatrix) -> Result<Self> {
        let din = in_layout.total_dim();
        let out = tau.layout().clone();
        let j = kron(tau.matrix(), &CMat::identity(din, din).unscale(din as f64));
        Self::new(in_layout, out, j)
    }

    pub fn depolarizing(layout: SubsystemLayout) -> Self {
        let tau = DensityMatrix::maximally_mixed(layout.clone());
        Self::replacement(layout, &tau).expect("valid replacement channel")
    }

    pub fn in_layout(&self) -> &SubsystemLayout {
        &self.in_layout
    }

    pub fn out_layout(&self) -> &SubsystemLayout {
        &self.out_layout
    }

    pub fn choi(&self) -> &HermitianOperator {
        &self.choi
    }

    pub fn din(&self) -> usize {
        self.in_layout.total_dim()
    }

    pub fn dout(&self) -> usize {
        self.out_layout.total_dim()
    }

    /// `E(ρ) = d_in tr_in[(I ⊗ ρᵀ) J]`.
    pub fn apply_mat(&self, rho: &CMat) -> CMat {
        let (din, dout) = (self.din(), self.dout());
        let j = self.choi.matrix();
        let mut out = CMat::zeros(dout, dout);
        for a in 0..dout {
            for b in 0..dout {
                let mut s = c(0.0, 0.0);
                for i in 0..din {
                    for k in 0..din {
                        s += j[(a * din + i, b * din + k)] * rho[(i, k)];
                    }
                }
                out[(a, b)] = s * din as f64;
            }
        }
        out
    }

    /// Heisenberg-picture adjoint `E†(O)`, so that `tr(O E(ρ)) = tr(E†(O) ρ)`.
    pub fn adjoint_mat(&self, o: &CMat) -> CMat {
        let (din, dout) = (self.din(), self.dout());
        let j = self.choi.matrix();
        let mut out = CMat::zeros(din, din);
        for k in 0..din {
            for i in 0..din {
                let mut s = c(0.0, 0.0);
                for a in 0..dout {
                    for b in 0..dout {
                        s += o[(b, a)] * j[(a * din + i, b * din + k)];
                    }
                }
                out[(k, i)] = s * din as f64;
            }
        }
        out
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let r = self.align_input(rho.op())?;
        let out = HermitianOperator::new(
            self.out_layout.clone(),
            crate::hermitian::hermitian_part(&self.apply_mat(r.matrix())),
        )?;
        DensityMatrix::from_psd_clipped(&out)
    }

    pub fn apply_op(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        let r = self.align_input(x)?;
        HermitianOperator::new(
            self.out_layout.clone(),
            crate::hermitian::hermitian_part(&self.apply_mat(r.matrix())),
        )
    }

    pub fn adjoint_op(&self, o: &HermitianOperator) -> Result<HermitianOperator> {
        let o = if o.layout() == &self.out_layout {
            o.clone()
        } else {
            reorder(o, &self.out_layout)?
        };
        HermitianOperator::new(
            self.in_layout.clone(),
            crate::hermitian::hermitian_part(&self.adjoint_mat(o.matrix())),
        )
    }

    fn align_input(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.layout() == &self.in_layout {
            Ok(x.clone())
        } else {
            reorder(x, &self.in_layout).map_err(|_| {
                RmpError::DimensionMismatch(format!(
                    "input layout {:?} does not match channel input {:?}",
                    x.layout().labels(),
                    self.in_layout.labels()
                ))
            })
        }
    }

    /// Sequential composition `other ∘ self`.
    pub fn then(&self, other: &ChannelSpec) -> Result<ChannelSpec> {
        if !other.in_layout.same_factors(&self.out_layout) {
            return Err(RmpError::DimensionMismatch(
                "output of the first channel does not feed the second".into(),
            ));
        }
        // Columns of the Choi matrix: apply `other` to each block E(|i⟩⟨k|).
        let din = self.din();
        let dout2 = other.dout();
        let mut j = CMat::zeros(dout2 * din, dout2 * din);
        for i in 0..din {
            for k in 0..din {
                let mut e = CMat::zeros(din, din);
                e[(i, k)] = c(1.0, 0.0);
                let mid = self.apply_mat(&e);
                let mid = if other.in_layout == self.out_layout {
                    mid
                } else {
                    let perm = crate::hermitian::permutation_between(&self.out_layout, &other.in_layout)?;
                    crate::hermitian::permute_raw(&mid, &self.out_layout.dims(), &perm)
                };
                let out = other.apply_mat(&mid);
                for a in 0..dout2 {
                    for b in 0..dout2 {
                        j[(a * din + i, b * din + k)] = out[(a, b)] / din as f64;
                    }
                }
            }
        }
        ChannelSpec::new(self.in_layout.clone(), other.out_layout.clone(), j)
    }

    /// Parallel composition on the concatenated layouts.
    pub fn tensor(&self, other: &ChannelSpec) -> Result<ChannelSpec> {
        let in_l = self.in_layout.concat(&other.in_layout)?;
        let out_l = self.out_layout.concat(&other.out_layout)?;
        let (d1i, d1o, d2i, d2o) = (self.din(), self.dout(), other.din(), other.dout());
        let (j1, j2) = (self.choi.matrix(), other.choi.matrix());
        let din = d1i * d2i;
        let n = d1o * d2o * din;
        // Index (a1 a2, i1 i2) from (a1 i1) and (a2 i2).
        let j = CMat::from_fn(n, n, |r, s| {
            let (ra, ri) = (r / din, r % din);
            let (sa, si) = (s / din, s % din);
            let (a1, a2, i1, i2) = (ra / d2o, ra % d2o, ri / d2i, ri % d2i);
            let (b1, b2, k1, k2) = (sa / d2o, sa % d2o, si / d2i, si % d2i);
            j1[(a1 * d1i + i1, b1 * d1i + k1)] * j2[(a2 * d2i + i2, b2 * d2i + k2)]
        });
        ChannelSpec::new(in_l, out_l, j)
    }
}

#[derive(Serialize, Deserialize)]
struct ChannelJson {
    input_layout: SubsystemLayout,
    output_layout: SubsystemLayout,
    choi: HermitianOperator,
}

impl Serialize for ChannelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ChannelJson {
            input_layout: self.in_layout.clone(),
            output_layout: self.out_layout.clone(),
            choi: self.choi.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChannelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = ChannelJson::deserialize(d)?;
        let want = choi_layout(&raw.input_layout, &raw.output_layout).map_err(D::Error::custom)?;
        let choi = if raw.choi.layout() == &want {
            raw.choi
        } else {
            reorder(&raw.choi, &want).map_err(D::Error::custom)?
        };
        ChannelSpec::new(raw.input_layout, raw.output_layout, choi.into_matrix()).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::states;
    use crate::rng::Rng;

    #[test]
    fn identity_channel_acts_trivially() {
        let l = SubsystemLayout::qubits(&["A", "B"]);
        let id = ChannelSpec::identity(l.clone());
        assert_eq!(id.choi().layout().labels(), vec!["A", "B", "A'", "B'"]);
        let w = states::w_marginal("A", "B");
        let out = id.apply(&w).unwrap();
        assert!(out.op().max_abs_diff(w.op()) < 1e-14);
    }

    #[test]
    fn unitary_apply_and_adjoint() {
        let l = SubsystemLayout::from_pairs([("A", 3)]).unwrap();
        let mut rng = Rng::new(3);
        let u = rng.haar_unitary(3);
        let ch = ChannelSpec::unitary(l.clone(), &u).unwrap();
        let rho = rng.density_matrix(3, 3);
        let out = ch.apply_mat(&rho);
        let want = &u * &rho * u.adjoint();
        assert!(crate::hermitian::max_abs_diff(&out, &want) < 1e-13);
        let o = rng.density_matrix(3, 2);
        let lhs: f64 = (&o * &out).trace().re;
        let rhs: f64 = (ch.adjoint_mat(&o) * &rho).trace().re;
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let l = SubsystemLayout::qubits(&["A"]);
        let k = CMat::identity(2, 2).scale(0.5);
        assert!(ChannelSpec::from_kraus(l.clone(), l, &[k]).is_err());
    }

    #[test]
    fn composition_and_tensor() {
        let a = SubsystemLayout::qubits(&["A"]);
        let b = SubsystemLayout::qubits(&["B"]);
        let mut rng = Rng::new(11);
        let (u, v) = (rng.haar_unitary(2), rng.haar_unitary(2));
        let cu = ChannelSpec::unitary(a.clone(), &u).unwrap();
        let cv = ChannelSpec::unitary(a.clone(), &v).unwrap();
        let composed = cu.then(&cv).unwrap();
        let direct = ChannelSpec::unitary(a.clone(), &(&v * &u)).unwrap();
        assert!(composed.choi().max_abs_diff(direct.choi()) < 1e-13);
        let tb = ChannelSpec::unitary(b.clone(), &v).unwrap();
        let t = cu.tensor(&tb).unwrap();
        let direct = ChannelSpec::unitary(a.concat(&b).unwrap(), &u.kronecker(&v)).unwrap();
        assert!(t.choi().max_abs_diff(direct.choi()) < 1e-13);
    }

    #[test]
    fn json_round_trip() {
        let l = SubsystemLayout::qubits(&["A"]);
        let ch = ChannelSpec::depolarizing(l);
        let s = serde_json::to_string(&ch).unwrap();
        let back: ChannelSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, ch);
    }
}
