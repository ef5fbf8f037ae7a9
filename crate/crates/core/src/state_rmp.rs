//! Compatibility of marginal families with a free global extension, the
//! robustness of incompatibility and its dual witnesses.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::config::PSD_TOL;
use crate::error::{Result, RmpError};
use crate::free_sets::{apply_op, FreeConstraint, FreeSetSpec, LinearMap, Relaxation};
use crate::hermitian::{
    c, eig_hermitian_mat, extend_identity, partial_trace, reorder, CMat, CVec, DensityMatrix, HermitianOperator,
    SubsystemLayout, SubsystemSet,
};
use crate::rng::Rng;
use crate::solver::{self, MatExpr, ProgramBuilder, PsdHandle, Settings, SolveStatus, VarHandle};

/// Marginal states `σ_X` on subsets `X` of a global layout `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalFamily {
    layout: SubsystemLayout,
    entries: Vec<(SubsystemSet, DensityMatrix)>,
}

impl MarginalFamily {
    /// Each `σ_X` is stored with its factors in the global layout's order.
    pub fn new(layout: SubsystemLayout, entries: Vec<(SubsystemSet, DensityMatrix)>) -> Result<Self> {
        let mut stored = Vec::with_capacity(entries.len());
        for (x, sigma) in entries {
            x.check_in(&layout)?;
            let want = x.layout_in(&layout)?;
            if !sigma.layout().same_factors(&want) {
                return Err(RmpError::DimensionMismatch(format!(
                    "marginal on {x} has layout {:?}, expected factors {:?}",
                    sigma.layout().labels(),
                    want.labels()
                )));
            }
            let sigma = if sigma.layout() == &want {
                sigma
            } else {
                DensityMatrix::new(reorder(sigma.op(), &want)?)?
            };
            stored.push((x, sigma));
        }
        Ok(Self {
            layout,
            entries: stored,
        })
    }

    /// Marginals of a global state on the given subsets.
    pub fn from_global(rho: &DensityMatrix, sets: &[SubsystemSet]) -> Result<Self> {
        let entries = sets
            .iter()
            .map(|x| Ok((x.clone(), DensityMatrix::new(partial_trace(rho.op(), x)?)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(rho.layout().clone(), entries)
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn entries(&self) -> &[(SubsystemSet, DensityMatrix)] {
        &self.entries
    }

    pub fn sets(&self) -> Vec<SubsystemSet> {
        self.entries.iter().map(|e| e.0.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entrywise mixture `p·self + (1-p)·other` on matching subsets.
    pub fn mix(&self, p: f64, other: &MarginalFamily) -> Result<Self> {
        if self.layout != other.layout || self.len() != other.len() {
            return Err(RmpError::DimensionMismatch("families differ in shape".into()));
        }
        let mut entries = Vec::with_capacity(self.len());
        for ((x, a), (y, b)) in self.entries.iter().zip(&other.entries) {
            if !x.same_members(y) {
                return Err(RmpError::DimensionMismatch(format!("subsets {x} and {y} differ")));
            }
            entries.push((x.clone(), a.mix(p, b)?));
        }
        Self::new(self.layout.clone(), entries)
    }

    /// Largest disagreement between two marginals on their common factors.
    pub fn overlap_inconsistency(&self) -> Result<f64> {
        let mut worst = 0.0f64;
        for (i, (x, a)) in self.entries.iter().enumerate() {
            for (y, b) in &self.entries[i + 1..] {
                let common: Vec<&str> = x
                    .labels()
                    .iter()
                    .filter(|l| y.contains(l))
                    .map(String::as_str)
                    .collect();
                if common.is_empty() {
                    continue;
                }
                let s = SubsystemSet::new(common)?;
                let ra = partial_trace(a.op(), &s)?;
                let rb = partial_trace(b.op(), &s)?;
                worst = worst.max(ra.max_abs_diff(&rb));
            }
        }
        Ok(worst)
    }

    /// `σ_X ↦ E_X(σ_X)` with one channel per subset, each mapping `X` to `X`.
    pub fn apply_free_operation(&self, channels: &[(SubsystemSet, ChannelSpec)]) -> Result<Self> {
        let mut entries = Vec::with_capacity(self.len());
        for (x, sigma) in &self.entries {
            let (_, ch) = channels
                .iter()
                .find(|(y, _)| y.same_members(x))
                .ok_or_else(|| RmpError::InvalidArgument(format!("no channel given for {x}")))?;
            let want = x.layout_in(&self.layout)?;
            if !ch.in_layout().same_factors(&want) || !ch.out_layout().same_factors(&want) {
                return Err(RmpError::DimensionMismatch(format!(
                    "channel for {x} must map {:?} to itself",
                    want.labels()
                )));
            }
            let out = ch.apply_op(sigma.op())?;
            let out = DensityMatrix::new(out.clone()).or_else(|_| DensityMatrix::from_psd_clipped(&out))?;
            entries.push((x.clone(), out));
        }
        Self::new(self.layout.clone(), entries)
    }
}

/// The set of marginal families arising from a global state whose target
/// reduction is free.
#[derive(Debug, Clone, PartialEq)]
pub struct CompatibleSet {
    pub layout: SubsystemLayout,
    pub target: SubsystemSet,
    pub free: FreeSetSpec,
}

impl CompatibleSet {
    pub fn new(layout: SubsystemLayout, target: SubsystemSet, free: FreeSetSpec) -> Result<Self> {
        target.check_in(&layout)?;
        if !free.target.same_members(&target) {
            return Err(RmpError::InvalidArgument(format!(
                "free set targets {} but the instance targets {}",
                free.target, target
            )));
        }
        free.constraints(&target.layout_in(&layout)?)?;
        Ok(Self { layout, target, free })
    }

    pub fn target_layout(&self) -> SubsystemLayout {
        self.target.layout_in(&self.layout).expect("validated")
    }

    pub fn relaxation(&self) -> Option<Relaxation> {
        self.free.relaxation_for(&self.target_layout())
    }
}

/// A marginal family, a target subsystem and a free set on the target.
#[derive(Debug, Clone, PartialEq)]
pub struct RmpInstance {
    pub marginals: MarginalFamily,
    pub target: SubsystemSet,
    pub free: FreeSetSpec,
}

impl RmpInstance {
    pub fn new(marginals: MarginalFamily, target: SubsystemSet, free: FreeSetSpec) -> Result<Self> {
        CompatibleSet::new(marginals.layout().clone(), target.clone(), free.clone())?;
        Ok(Self {
            marginals,
            target,
            free,
        })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        self.marginals.layout()
    }

    pub fn compatible_set(&self) -> CompatibleSet {
        CompatibleSet {
            layout: self.layout().clone(),
            target: self.target.clone(),
            free: self.free.clone(),
        }
    }

    pub fn with_marginals(&self, marginals: MarginalFamily) -> Result<Self> {
        Self::new(marginals, self.target.clone(), self.free.clone())
    }

    pub fn with_free(&self, free: FreeSetSpec) -> Result<Self> {
        Self::new(self.marginals.clone(), self.target.clone(), free)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RobustnessResult {
    pub status: SolveStatus,
    /// `log₂ tr V*`, clamped at zero; `+∞` when the program is infeasible.
    pub value_log2: f64,
    /// `tr V*` as returned by the solver.
    pub primal_trace: f64,
    /// `Σ tr(σ_X Y_X)` at the dual point.
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub optimizer: Option<HermitianOperator>,
    #[serde(skip)]
    pub duals: Vec<(SubsystemSet, HermitianOperator)>,
    pub relaxation: Option<Relaxation>,
    pub diagnostics: Vec<String>,
}

struct RobustnessProgram {
    program: solver::ConicProgram,
    v: VarHandle,
    sigma: Vec<PsdHandle>,
}

fn build_robustness(inst: &RmpInstance) -> Result<RobustnessProgram> {
    let mut b = ProgramBuilder::new();
    let (vh, v, _) = b.psd_variable(inst.layout());
    let vt = v.partial_trace(&inst.target)?;
    inst.free.emit(&mut b, &vt, true)?;
    let mut sigma = vec![];
    for (x, s) in inst.marginals.entries() {
        let vx = v.partial_trace(x)?;
        sigma.push(b.psd_geq(&vx, &MatExpr::constant(s.op()))?);
    }
    b.minimize(&v.trace());
    Ok(RobustnessProgram {
        program: b.build(),
        v: vh,
        sigma,
    })
}

fn infeasible_diagnosis(inst: &RmpInstance) -> Vec<String> {
    let mut d = vec!["robustness program is infeasible: the robustness is infinite".to_string()];
    match inst.free.full_rank_member(&inst.compatible_set().target_layout()) {
        Ok(None) => d.push(
            "the free set has no full-rank member, so no scaled free extension can dominate full-rank marginals".into(),
        ),
        Ok(Some(_)) => {}
        Err(e) => d.push(format!("could not probe the free set: {e}")),
    }
    d.extend(inst.free.warnings());
    d
}

/// Solves `min tr V` over the free cone with `σ_X ⪯ tr_{S∖X} V`.
pub fn robustness(inst: &RmpInstance, settings: &Settings) -> Result<RobustnessResult> {
    let rp = build_robustness(inst)?;
    let r = solver::solve(&rp.program, settings);
    let relaxation = inst.compatible_set().relaxation();
    match r.status {
        SolveStatus::Optimal => {
            let v = HermitianOperator::from_hermitian(inst.layout().clone(), r.var(rp.v).clone());
            let duals = inst
                .marginals
                .entries()
                .iter()
                .zip(&rp.sigma)
                .map(|((x, s), h)| {
                    Ok((
                        x.clone(),
                        HermitianOperator::from_hermitian(s.layout().clone(), r.dual(*h).clone()),
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut diagnostics = inst.free.warnings();
            if let Some(rel) = &relaxation {
                if !rel.exact {
                    diagnostics.push("separability is modeled by PPT constraints: the value is a lower bound".into());
                }
            }
            Ok(RobustnessResult {
                status: r.status,
                value_log2: r.primal_value.log2().max(0.0),
                primal_trace: r.primal_value,
                dual_value: r.dual_value,
                gap: r.gap,
                iterations: r.iterations,
                optimizer: Some(v),
                duals,
                relaxation,
                diagnostics,
            })
        }
        SolveStatus::Infeasible => Ok(RobustnessResult {
            status: r.status,
            value_log2: f64::INFINITY,
            primal_trace: f64::INFINITY,
            dual_value: f64::INFINITY,
            gap: 0.0,
            iterations: r.iterations,
            optimizer: None,
            duals: vec![],
            relaxation,
            diagnostics: infeasible_diagnosis(inst),
        }),
        _ => {
            r.require_optimal("robustness")?;
            unreachable!()
        }
    }
}

/// Adjoint of a free-set map, used by the explicit dual program.
fn map_adjoint_expr(map: &LinearMap, y: &MatExpr) -> Result<MatExpr> {
    match map {
        LinearMap::Identity => Ok(y.clone()),
        LinearMap::PartialTranspose(p) => y.partial_transpose(p),
        LinearMap::OffDiagonal(None) => Ok(y.off_diagonal()),
        LinearMap::OffDiagonal(Some(u)) => y.off_diagonal().conjugate(u),
        LinearMap::TraceDeviation(rho) => {
            let id = HermitianOperator::identity(y.layout().clone());
            y.sub(&MatExpr::scalar_times(&y.inner(rho)?, &id))
        }
    }
}

/// Value of the robustness dual `max Σ tr(σ_X Y_X)` over `Y_X ⪰ 0` with
/// `Σ_X tr(τ_X Y_X) ≤ 1` on the compatible set, written through the dual
/// cone of the free constraints. Independent of the primal program.
pub fn robustness_dual(inst: &RmpInstance, settings: &Settings) -> Result<solver::SolveResult> {
    let layout = inst.layout().clone();
    let tl = inst.compatible_set().target_layout();
    let mut b = ProgramBuilder::new();
    let mut slack = MatExpr::constant(&HermitianOperator::identity(layout.clone()));
    let mut obj = crate::solver::ScalarExpr::constant(0.0);
    for (_, s) in inst.marginals.entries() {
        let (_, y, _) = b.psd_variable(s.layout());
        obj = obj.add(&y.inner(s.op())?);
        slack = slack.sub(&y.extend_identity(&layout)?)?;
    }
    for con in inst.free.constraints(&tl)? {
        let term = match con {
            FreeConstraint::Psd(LinearMap::Identity) => continue,
            FreeConstraint::Psd(map) => {
                let (_, q, _) = b.psd_variable(&tl);
                map_adjoint_expr(&map, &q)?
            }
            FreeConstraint::Zero(map) => {
                let (_, z) = b.hermitian(&tl);
                map_adjoint_expr(&map, &z)?
            }
        };
        slack = slack.sub(&term.extend_identity(&layout)?)?;
    }
    b.psd(&slack);
    b.maximize(&obj);
    Ok(solver::solve(&b.build(), settings))
}

/// A family of observables separating a marginal family from the compatible set.
#[derive(Debug, Clone)]
pub struct Witness {
    pub blocks: Vec<(SubsystemSet, HermitianOperator)>,
    /// `sup Σ tr(τ_X W_X)` over the compatible set, recomputed independently.
    pub free_sup: f64,
    /// `Σ tr(σ_X W_X)`.
    pub value_at_sigma: f64,
    pub robustness_log2: f64,
    pub notes: Vec<String>,
}

impl Witness {
    pub fn gap(&self) -> f64 {
        self.value_at_sigma - self.free_sup
    }

    pub fn evaluate(&self, family: &MarginalFamily) -> Result<f64> {
        evaluate_observables(&self.blocks, family)
    }
}

/// `Σ_X tr(σ_X O_X)`.
pub fn evaluate_observables(obs: &[(SubsystemSet, HermitianOperator)], family: &MarginalFamily) -> Result<f64> {
    let mut s = 0.0;
    for (x, o) in obs {
        let (_, sigma) = family
            .entries()
            .iter()
            .find(|(y, _)| y.same_members(x))
            .ok_or_else(|| RmpError::InvalidArgument(format!("family has no marginal on {x}")))?;
        let o = if o.layout() == sigma.layout() {
            o.clone()
        } else {
            reorder(o, sigma.layout())?
        };
        s += sigma.op().inner(&o)?;
    }
    Ok(s)
}

/// Smallest robustness treated as a genuine incompatibility.
pub const WITNESS_THRESHOLD_LOG2: f64 = 1e-6;

/// Dual optimum of the robustness program as a witness.
pub fn extract_witness(inst: &RmpInstance, settings: &Settings) -> Result<Witness> {
    let r = robustness(inst, settings)?;
    if r.status != SolveStatus::Optimal {
        return Err(RmpError::Solver {
            status: r.status,
            detail: r.diagnostics.join("; "),
        });
    }
    if r.value_log2 <= WITNESS_THRESHOLD_LOG2 {
        return Err(RmpError::NoWitness(format!(
            "robustness {:.3e} is zero within tolerance: the family is compatible",
            r.value_log2
        )));
    }
    let blocks = r.duals.clone();
    for (x, w) in &blocks {
        let m = w.min_eigenvalue()?;
        if m < -PSD_TOL {
            return Err(RmpError::Solver {
                status: SolveStatus::NumericalFailure,
                detail: format!("witness block on {x} has eigenvalue {m}"),
            });
        }
    }
    let value_at_sigma = evaluate_observables(&blocks, &inst.marginals)?;
    let sup = linear_max_over_set(&blocks, &inst.compatible_set(), settings)?;
    let mut notes =
        vec!["dual optima can be degenerate; the reported blocks are the interior-point limit point".to_string()];
    if let Some(rel) = inst.compatible_set().relaxation() {
        if !rel.exact {
            notes.push("the free set is a PPT outer approximation; the witness remains a valid certificate".into());
        }
    }
    Ok(Witness {
        blocks,
        free_sup: sup.value,
        value_at_sigma,
        robustness_log2: r.value_log2,
        notes,
    })
}

#[derive(Debug, Clone)]
pub struct LinearMaxResult {
    pub value: f64,
    /// Global state attaining the maximum.
    pub state: DensityMatrix,
    pub iterations: usize,
}

/// `sup Σ_X tr(τ_X O_X)` over families `τ` in the compatible set.
pub fn linear_max_over_set(
    objective: &[(SubsystemSet, HermitianOperator)],
    set: &CompatibleSet,
    settings: &Settings,
) -> Result<LinearMaxResult> {
    let mut b = ProgramBuilder::new();
    let (rh, rho, _) = b.psd_variable(&set.layout);
    b.eq_scalar(&rho.trace().add_constant(-1.0));
    set.free.emit(&mut b, &rho.partial_trace(&set.target)?, true)?;
    let mut obj = crate::solver::ScalarExpr::constant(0.0);
    for (x, o) in objective {
        let rx = rho.partial_trace(x)?;
        let o = if o.layout() == rx.layout() {
            o.clone()
        } else {
            reorder(o, rx.layout())?
        };
        obj = obj.add(&rx.inner(&o)?);
    }
    b.maximize(&obj);
    let r = solver::solve(&b.build(), settings);
    r.require_optimal("linear maximization over the compatible set")?;
    let state = DensityMatrix::from_psd_clipped(&HermitianOperator::from_hermitian(
        set.layout.clone(),
        r.var(rh).clone(),
    ))?;
    Ok(LinearMaxResult {
        value: r.primal_value,
        state,
        iterations: r.iterations,
    })
}

#[derive(Debug, Clone)]
pub enum Compatibility {
    Compatible {
        state: DensityMatrix,
        /// Largest marginal mismatch of `state`.
        residual: f64,
    },
    Incompatible {
        robustness_log2: f64,
        /// Dual certificate value `Σ tr(σ_X Y_X) > 1` when finite.
        certificate_value: f64,
    },
}

impl Compatibility {
    pub fn is_compatible(&self) -> bool {
        matches!(self, Compatibility::Compatible { .. })
    }
}

fn marginal_residual(state: &DensityMatrix, family: &MarginalFamily) -> Result<f64> {
    let mut worst = 0.0f64;
    for (x, s) in family.entries() {
        worst = worst.max(partial_trace(state.op(), x)?.max_abs_diff(s.op()));
    }
    Ok(worst)
}

/// Decides R-free compatibility through the robustness: compatible iff
/// `2^R − 1 ≤ tol`, in which case `V*/tr V*` is a free extension.
pub fn check_rfree_compatible(inst: &RmpInstance, tol: f64, settings: &Settings) -> Result<Compatibility> {
    let r = robustness(inst, settings)?;
    match r.status {
        SolveStatus::Optimal if r.primal_trace - 1.0 <= tol => {
            let v = r.optimizer.expect("optimal result carries the optimizer");
            let state = DensityMatrix::from_psd_clipped(&v)?;
            let residual = marginal_residual(&state, &inst.marginals)?;
            Ok(Compatibility::Compatible { state, residual })
        }
        _ => Ok(Compatibility::Incompatible {
            robustness_log2: r.value_log2,
            certificate_value: r.dual_value,
        }),
    }
}

#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub status: SolveStatus,
    pub state: Option<DensityMatrix>,
}

/// Direct feasibility program: `ρ ⪰ 0`, `tr_{S∖X} ρ = σ_X`, free `ρ_T`.
pub fn marginal_feasibility(inst: &RmpInstance, settings: &Settings) -> Result<FeasibilityResult> {
    let mut b = ProgramBuilder::new();
    let (rh, rho, _) = b.psd_variable(inst.layout());
    for (x, s) in inst.marginals.entries() {
        b.eq(&rho.partial_trace(x)?, &MatExpr::constant(s.op()))?;
    }
    b.eq_scalar(&rho.trace().add_constant(-1.0));
    inst.free.emit(&mut b, &rho.partial_trace(&inst.target)?, true)?;
    let r = solver::solve(&b.build(), settings);
    match r.status {
        SolveStatus::Optimal => {
            let op = HermitianOperator::from_hermitian(inst.layout().clone(), r.var(rh).clone());
            Ok(FeasibilityResult {
                feasible: true,
                status: r.status,
                state: Some(DensityMatrix::from_psd_clipped(&op)?),
            })
        }
        SolveStatus::Infeasible => Ok(FeasibilityResult {
            feasible: false,
            status: r.status,
            state: None,
        }),
        _ => {
            r.require_optimal("marginal feasibility")?;
            unreachable!()
        }
    }
}

/// Orthonormal basis (columns) of the subspace every compatible global state
/// is supported on: the intersection of `range(σ_X) ⊗ H_{S∖X}` over `X`.
pub fn compatible_support(family: &MarginalFamily) -> Result<CMat> {
    let layout = family.layout();
    let d = layout.total_dim();
    let mut m = CMat::zeros(d, d);
    for (_, s) in family.entries() {
        let e = s.op().eig()?;
        let scale = e.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
        let dx = s.dim();
        let mut kernel = CMat::zeros(dx, dx);
        for (k, &lam) in e.values.iter().enumerate() {
            if lam <= 1e-10 * scale {
                let v = e.vectors.column(k);
                kernel += v * v.adjoint();
            }
        }
        let k_op = HermitianOperator::from_hermitian(s.layout().clone(), kernel);
        m += extend_identity(&k_op, layout)?.matrix();
    }
    let e = eig_hermitian_mat(&m)?;
    let keep: Vec<usize> = (0..d).filter(|&k| e.values[k] <= 1e-9).collect();
    Ok(CMat::from_fn(d, keep.len(), |i, j| e.vectors[(i, keep[j])]))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FidelityRange {
    pub max_fid: f64,
    pub min_fid: f64,
}

/// Extremes of `⟨ψ|ρ|ψ⟩` over global states `ρ` with the given marginals.
///
/// The search is restricted to [`compatible_support`], which every
/// compatible state lives on; this removes directions in which the
/// feasible set has no interior.
pub fn fidelity_range(family: &MarginalFamily, psi: &CVec, settings: &Settings) -> Result<FidelityRange> {
    let layout = family.layout();
    if psi.len() != layout.total_dim() {
        return Err(RmpError::DimensionMismatch("state vector has the wrong length".into()));
    }
    let basis = compatible_support(family)?;
    if basis.ncols() == 0 {
        return Err(RmpError::Solver {
            status: SolveStatus::Infeasible,
            detail: "no global state is compatible with the marginals".into(),
        });
    }
    let face = SubsystemLayout::from_pairs([("support", basis.ncols())])?;
    let target = HermitianOperator::projector(layout.clone(), &psi.unscale(psi.norm()))?;
    let mut out = [0.0; 2];
    for (slot, maximize) in [(0, true), (1, false)] {
        let mut b = ProgramBuilder::new();
        let (_, r, _) = b.psd_variable(&face);
        let rho = r.congruence(&basis, layout.clone())?;
        for (x, s) in family.entries() {
            b.eq(&rho.partial_trace(x)?, &MatExpr::constant(s.op()))?;
        }
        b.eq_scalar(&rho.trace().add_constant(-1.0));
        let obj = rho.inner(&target)?;
        if maximize {
            b.maximize(&obj);
        } else {
            b.minimize(&obj);
        }
        let res = solver::solve(&b.build(), settings);
        res.require_optimal("fidelity extremum")?;
        out[slot] = res.primal_value;
    }
    Ok(FidelityRange {
        max_fid: out[0],
        min_fid: out[1],
    })
}

/// Fidelity range of the W state over states compatible with its AB and BC marginals.
pub fn verify_w_uniqueness(settings: &Settings) -> Result<FidelityRange> {
    let family = crate::instances::w_family()?;
    fidelity_range(&family, &crate::hermitian::states::w_vec(), settings)
}

/// `Σ_k |k⟩|k+1 mod d⟩ / √d`, which is `(|01⟩ + |10⟩)/√2` for qubits.
pub fn shifted_max_entangled(d: usize) -> CVec {
    let mut v = CVec::zeros(d * d);
    for k in 0..d {
        v[k * d + (k + 1) % d] = c(1.0, 0.0);
    }
    v.unscale((d as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationSearch {
    /// Only `U = I`.
    Identity,
    /// Best of `samples` Haar-random unitaries and the identity.
    Grid { samples: usize, seed: u64 },
    /// Fixed-point ascent `U ← polar(tr_Y[P (U⊗I) ρ])` from the identity and
    /// from `restarts` Haar-random starts.
    Iterative {
        restarts: usize,
        seed: u64,
        max_iters: usize,
    },
}

fn check_bipartite_equal(rho: &DensityMatrix) -> Result<usize> {
    let dims = rho.layout().dims();
    if dims.len() != 2 || dims[0] != dims[1] {
        return Err(RmpError::InvalidArgument(format!(
            "activation criterion needs a bipartite state of equal local dimensions, got {dims:?}"
        )));
    }
    Ok(dims[0])
}

/// `⟨ψ|(U⊗I)ρ(U†⊗I)|ψ⟩` with `ψ` the shifted maximally entangled vector.
pub fn overlap_at(rho: &DensityMatrix, u: &CMat) -> Result<f64> {
    let d = check_bipartite_equal(rho)?;
    let psi = shifted_max_entangled(d);
    let uu = u.kronecker(&CMat::identity(d, d));
    let phi = uu.adjoint() * &psi;
    Ok((phi.adjoint() * rho.matrix() * &phi)[(0, 0)].re)
}

/// Lower bound on `max_U ⟨ψ|(U⊗I)ρ(U†⊗I)|ψ⟩`; a value above `1/d` flags
/// activation of nonlocality from many copies.
pub fn activation_criterion(rho: &DensityMatrix, search: ActivationSearch) -> Result<f64> {
    let d = check_bipartite_equal(rho)?;
    let id = CMat::identity(d, d);
    let mut best = overlap_at(rho, &id)?;
    match search {
        ActivationSearch::Identity => {}
        ActivationSearch::Grid { samples, seed } => {
            let mut rng = Rng::new(seed);
            for _ in 0..samples {
                best = best.max(overlap_at(rho, &rng.haar_unitary(d))?);
            }
        }
        ActivationSearch::Iterative {
            restarts,
            seed,
            max_iters,
        } => {
            let mut rng = Rng::new(seed);
            let psi = shifted_max_entangled(d);
            let p = &psi * psi.adjoint();
            let mut starts = vec![id.clone()];
            for _ in 0..restarts {
                starts.push(rng.haar_unitary(d));
            }
            for mut u in starts {
                let mut val = overlap_at(rho, &u)?;
                for _ in 0..max_iters {
                    let a_full = &p * u.kronecker(&id) * rho.matrix();
                    let a = crate::hermitian::partial_trace_raw(&a_full, &[d, d], &[true, false]);
                    let svd = a.svd(true, true);
                    let (Some(w), Some(vt)) = (svd.u, svd.v_t) else { break };
                    let next = w * vt;
                    let nv = overlap_at(rho, &next)?;
                    u = next;
                    if nv <= val + 1e-15 {
                        val = val.max(nv);
                        break;
                    }
                    val = nv;
                }
                best = best.max(val);
            }
        }
    }
    Ok(best)
}

/// Evaluates each free-set constraint map on `x`: used to report how a
/// reduced state satisfies the free set.
pub fn free_constraint_values(free: &FreeSetSpec, x: &HermitianOperator) -> Result<Vec<f64>> {
    free.constraints(x.layout())?
        .into_iter()
        .map(|con| match con {
            FreeConstraint::Psd(map) => apply_op(&map, x)?.min_eigenvalue(),
            FreeConstraint::Zero(map) => Ok(apply_op(&map, x)?.matrix().iter().fold(0.0f64, |a, z| a.max(z.norm()))),
        })
        .collect()
}
