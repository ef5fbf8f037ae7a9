//! Free-state and free-channel sets as conic constraints.
//!
//! A free set is described by linear maps `L` applied to the (unnormalized)
//! target marginal `X`, each required to be either PSD or zero. Every such
//! description is a closed convex cone, so the same constraints serve for
//! normalized members and for the scaled cone used by the robustness program.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::PSD_TOL;
use crate::error::{Result, RmpError};
use crate::hermitian::{
    entries_from_json, entries_to_json, partial_transpose, reorder, CMat, DensityMatrix, HermitianOperator,
    SubsystemLayout, SubsystemSet,
};
use crate::solver::{MatExpr, ProgramBuilder, PsdHandle};

/// Linear maps used by free-set constraints.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    Identity,
    PartialTranspose(SubsystemSet),
    /// `X ↦ U†XU − diag(U†XU)`, with `U` the identity when absent.
    OffDiagonal(Option<CMat>),
    /// `X ↦ X − tr(X)·ρ`.
    TraceDeviation(HermitianOperator),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreeConstraint {
    Psd(LinearMap),
    Zero(LinearMap),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FreeSetKind {
    AllStates,
    /// PPT across each listed part; an empty list means every bipartition.
    SeparablePpt {
        bipartitions: Vec<SubsystemSet>,
    },
    /// Diagonal in the orthonormal basis given by the columns of `basis`
    /// (computational basis when absent).
    Incoherent {
        basis: Option<CMat>,
    },
    Singleton {
        state: DensityMatrix,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeSetSpec {
    pub kind: FreeSetKind,
    pub target: SubsystemSet,
}

/// Describes how the modeled set relates to the intended one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relaxation {
    pub name: String,
    /// True when the modeled set equals the intended one.
    pub exact: bool,
}

impl FreeSetSpec {
    pub fn all_states(target: SubsystemSet) -> Self {
        Self {
            kind: FreeSetKind::AllStates,
            target,
        }
    }

    pub fn separable_ppt(target: SubsystemSet) -> Self {
        Self {
            kind: FreeSetKind::SeparablePpt { bipartitions: vec![] },
            target,
        }
    }

    pub fn incoherent(target: SubsystemSet) -> Self {
        Self {
            kind: FreeSetKind::Incoherent { basis: None },
            target,
        }
    }

    pub fn singleton(state: DensityMatrix) -> Result<Self> {
        let target = SubsystemSet::new(state.layout().labels())?;
        Ok(Self {
            kind: FreeSetKind::Singleton { state },
            target,
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FreeSetKind::AllStates => "all_states",
            FreeSetKind::SeparablePpt { .. } => "separable_ppt",
            FreeSetKind::Incoherent { .. } => "incoherent",
            FreeSetKind::Singleton { .. } => "singleton",
        }
    }

    /// Bipartitions to transpose for a target laid out as `layout`.
    fn parts(&self, layout: &SubsystemLayout, listed: &[SubsystemSet]) -> Result<Vec<SubsystemSet>> {
        if !listed.is_empty() {
            for p in listed {
                p.check_in(layout)?;
            }
            return Ok(listed.to_vec());
        }
        // Every cut up to complement: subsets avoiding the first factor.
        let labels = layout.labels();
        let k = labels.len();
        let mut out = vec![];
        if k < 2 {
            return Ok(out);
        }
        for mask in 1u64..(1u64 << (k - 1)) {
            let part: Vec<&str> = (0..k - 1)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| labels[b + 1])
                .collect();
            out.push(SubsystemSet::new(part)?);
        }
        Ok(out)
    }

    /// Symbolic constraint list for a target marginal laid out as `layout`.
    pub fn constraints(&self, layout: &SubsystemLayout) -> Result<Vec<FreeConstraint>> {
        self.check_layout(layout)?;
        let mut out = vec![FreeConstraint::Psd(LinearMap::Identity)];
        match &self.kind {
            FreeSetKind::AllStates => {}
            FreeSetKind::SeparablePpt { bipartitions } => {
                for p in self.parts(layout, bipartitions)? {
                    out.push(FreeConstraint::Psd(LinearMap::PartialTranspose(p)));
                }
            }
            FreeSetKind::Incoherent { basis } => {
                if let Some(u) = basis {
                    check_basis(u, layout.total_dim())?;
                }
                out.push(FreeConstraint::Zero(LinearMap::OffDiagonal(basis.clone())));
            }
            FreeSetKind::Singleton { state } => {
                let rho = reorder(state.op(), layout)?;
                out.push(FreeConstraint::Zero(LinearMap::TraceDeviation(rho)));
            }
        }
        Ok(out)
    }

    fn check_layout(&self, layout: &SubsystemLayout) -> Result<()> {
        let target_layout = layout.restrict(self.target.labels())?;
        if target_layout.len() != layout.len() {
            return Err(RmpError::DimensionMismatch(format!(
                "variable layout {:?} does not match free-set target {}",
                layout.labels(),
                self.target
            )));
        }
        if let FreeSetKind::Singleton { state } = &self.kind {
            if !state.layout().same_factors(layout) {
                return Err(RmpError::DimensionMismatch(format!(
                    "singleton state layout {:?} does not match target {:?}",
                    state.layout().labels(),
                    layout.labels()
                )));
            }
        }
        Ok(())
    }

    /// Adds the cone constraints on `x` to `b`. The plain `x ⪰ 0` constraint
    /// is skipped when `x_is_psd` (for example, a partial trace of a PSD variable).
    pub fn emit(&self, b: &mut ProgramBuilder, x: &MatExpr, x_is_psd: bool) -> Result<Vec<PsdHandle>> {
        let mut handles = vec![];
        for con in self.constraints(x.layout())? {
            match con {
                FreeConstraint::Psd(LinearMap::Identity) if x_is_psd => {}
                FreeConstraint::Psd(map) => handles.push(b.psd(&apply_expr(&map, x)?)),
                FreeConstraint::Zero(map) => b.eq_zero(&apply_expr(&map, x)?),
            }
        }
        Ok(handles)
    }

    /// True iff `state` satisfies every emitted constraint within `tol`.
    pub fn check_membership(&self, state: &DensityMatrix, tol: f64) -> Result<bool> {
        let layout = state.layout();
        for con in self.constraints(layout)? {
            match con {
                FreeConstraint::Psd(map) => {
                    if apply_op(&map, state.op())?.min_eigenvalue()? < -tol {
                        return Ok(false);
                    }
                }
                FreeConstraint::Zero(map) => {
                    let m = apply_op(&map, state.op())?;
                    if m.matrix().iter().any(|z| z.norm() > tol) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Relaxation metadata for a target laid out as `layout`.
    pub fn relaxation_for(&self, layout: &SubsystemLayout) -> Option<Relaxation> {
        match &self.kind {
            FreeSetKind::SeparablePpt { .. } => {
                let dims = layout.dims();
                let exact = dims.len() <= 1 || (dims.len() == 2 && dims[0] * dims[1] <= 6);
                Some(Relaxation {
                    name: "ppt-outer".into(),
                    exact,
                })
            }
            _ => None,
        }
    }

    /// Conditions under which strong duality guarantees may fail.
    pub fn warnings(&self) -> Vec<String> {
        match &self.kind {
            FreeSetKind::Singleton { state } => match state.op().min_eigenvalue() {
                Ok(m) if m <= PSD_TOL => vec![
                    "singleton free state is not full rank: free extensions with full-rank marginals may not exist and the robustness can be infinite".into(),
                ],
                _ => vec![],
            },
            _ => vec![],
        }
    }

    /// A full-rank free state on `layout`, when one is known.
    pub fn full_rank_member(&self, layout: &SubsystemLayout) -> Result<Option<DensityMatrix>> {
        match &self.kind {
            FreeSetKind::Singleton { state } => {
                let s = DensityMatrix::new(reorder(state.op(), layout)?)?;
                Ok(if s.op().min_eigenvalue()? > PSD_TOL {
                    Some(s)
                } else {
                    None
                })
            }
            _ => Ok(Some(DensityMatrix::maximally_mixed(layout.clone()))),
        }
    }
}

fn check_basis(u: &CMat, d: usize) -> Result<()> {
    if u.nrows() != d || u.ncols() != d {
        return Err(RmpError::DimensionMismatch(format!(
            "incoherent basis is {}x{} but target dimension is {d}",
            u.nrows(),
            u.ncols()
        )));
    }
    let dev = (u.adjoint() * u - CMat::identity(d, d))
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    if dev > 1e-10 {
        return Err(RmpError::InvalidArgument(format!(
            "incoherent basis is not orthonormal (deviation {dev:.2e})"
        )));
    }
    Ok(())
}

fn apply_expr(map: &LinearMap, x: &MatExpr) -> Result<MatExpr> {
    match map {
        LinearMap::Identity => Ok(x.clone()),
        LinearMap::PartialTranspose(p) => x.partial_transpose(p),
        LinearMap::OffDiagonal(None) => Ok(x.off_diagonal()),
        LinearMap::OffDiagonal(Some(u)) => Ok(x.conjugate(&u.adjoint())?.off_diagonal()),
        LinearMap::TraceDeviation(rho) => x.sub(&MatExpr::scalar_times(&x.trace(), rho)),
    }
}

pub fn apply_op(map: &LinearMap, x: &HermitianOperator) -> Result<HermitianOperator> {
    match map {
        LinearMap::Identity => Ok(x.clone()),
        LinearMap::PartialTranspose(p) => partial_transpose(x, p),
        LinearMap::OffDiagonal(basis) => {
            let y = match basis {
                Some(u) => x.conjugate(&u.adjoint())?,
                None => x.clone(),
            };
            let mut m = y.matrix().clone();
            for k in 0..m.nrows() {
                m[(k, k)] = num_complex::Complex64::new(0.0, 0.0);
            }
            HermitianOperator::new(y.layout().clone(), m)
        }
        LinearMap::TraceDeviation(rho) => x.combine(1.0, rho, -x.trace()),
    }
}

#[derive(Serialize, Deserialize)]
struct FreeSetJson {
    kind: String,
    target: SubsystemSet,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    params: Value,
}

impl Serialize for FreeSetSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let params = match &self.kind {
            FreeSetKind::AllStates => Value::Null,
            FreeSetKind::SeparablePpt { bipartitions } => {
                serde_json::json!({ "bipartitions": bipartitions })
            }
            FreeSetKind::Incoherent { basis: None } => Value::Null,
            FreeSetKind::Incoherent { basis: Some(u) } => {
                serde_json::json!({ "basis": entries_to_json(u) })
            }
            FreeSetKind::Singleton { state } => serde_json::json!({ "state": state }),
        };
        FreeSetJson {
            kind: self.kind_name().into(),
            target: self.target.clone(),
            params,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FreeSetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = FreeSetJson::deserialize(d)?;
        let param = |name: &str| raw.params.get(name).cloned();
        let kind = match raw.kind.as_str() {
            "all_states" => FreeSetKind::AllStates,
            "separable_ppt" => FreeSetKind::SeparablePpt {
                bipartitions: match param("bipartitions") {
                    Some(v) => serde_json::from_value(v).map_err(D::Error::custom)?,
                    None => vec![],
                },
            },
            "incoherent" => FreeSetKind::Incoherent {
                basis: match param("basis") {
                    Some(v) => {
                        let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(v).map_err(D::Error::custom)?;
                        Some(entries_from_json(&rows).map_err(D::Error::custom)?)
                    }
                    None => None,
                },
            },
            "singleton" => FreeSetKind::Singleton {
                state: serde_json::from_value(param("state").ok_or_else(|| D::Error::missing_field("params.state"))?)
                    .map_err(D::Error::custom)?,
            },
            other => {
                return Err(D::Error::unknown_variant(
                    other,
                    &["all_states", "separable_ppt", "incoherent", "singleton"],
                ))
            }
        };
        Ok(FreeSetSpec {
            kind,
            target: raw.target,
        })
    }
}

/// Free-channel sets on a target input/output pair `T' → T`.
#[derive(Debug, Clone, PartialEq)]
pub enum FreeChannelKind {
    AllChannels,
    /// Replacement channels `ρ ↦ tr(ρ)·τ` with `τ` in the wrapped free set.
    FreeOutputState(FreeSetSpec),
    /// A single channel, given by its normalized Choi matrix on `T ⊗ T'`.
    SingletonChannel(HermitianOperator),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeChannelSetSpec {
    pub kind: FreeChannelKind,
    pub input: SubsystemSet,
    pub output: SubsystemSet,
}

impl FreeChannelSetSpec {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            FreeChannelKind::AllChannels => "all_channels",
            FreeChannelKind::FreeOutputState(_) => "free_output_state",
            FreeChannelKind::SingletonChannel(_) => "singleton_channel",
        }
    }
}
