use serde::Serialize;

use crate::config::PSD_TOL;
use crate::error::{Result, RmpError};
use crate::free_sets::{FreeChannelKind, FreeChannelSetSpec};
use crate::hermitian::{
    c, eig_hermitian_mat, extend_identity, partial_trace, reorder, CMat, DensityMatrix, HermitianOperator,
    SubsystemLayout, SubsystemSet,
};
use crate::rng::Rng;
use crate::solver::{self, MatExpr, ProgramBuilder, PsdHandle, ScalarExpr, Settings, SolveStatus, VarHandle};

use super::spec::{input_alias, ChannelSpec};

/// An input-output pair `X' → X`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ChannelPair {
    pub input: SubsystemSet,
    pub output: SubsystemSet,
}

impl ChannelPair {
    pub fn new(input: SubsystemSet, output: SubsystemSet) -> Self {
        Self { input, output }
    }
}

impl std::fmt::Display for ChannelPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}->{}", self.input, self.output)
    }
}

/// Labelling of a global Choi matrix on `S ⊗ S'`, with input labels renamed
/// where they collide with output labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiFrame {
    pub input: SubsystemLayout,
    pub output: SubsystemLayout,
    alias: SubsystemLayout,
    layout: SubsystemLayout,
}

impl ChoiFrame {
    pub fn new(input: SubsystemLayout, output: SubsystemLayout) -> Result<Self> {
        let alias = input_alias(&input, &output)?;
        let layout = output.concat(&alias)?;
        Ok(Self {
            input,
            output,
            alias,
            layout,
        })
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    fn alias_labels(&self, input: &SubsystemSet) -> Result<Vec<String>> {
        input
            .labels()
            .iter()
            .map(|l| {
                let k = self
                    .input
                    .position(l)
                    .ok_or_else(|| RmpError::UnknownLabel(l.clone()))?;
                Ok(self.alias.factors()[k].label.clone())
            })
            .collect()
    }

    /// Choi-matrix labels of `X X'`.
    pub fn pair_set(&self, pair: &ChannelPair) -> Result<SubsystemSet> {
        pair.output.check_in(&self.output)?;
        let mut labels: Vec<String> = pair.output.labels().to_vec();
        labels.extend(self.alias_labels(&pair.input)?);
        SubsystemSet::new(labels)
    }

    /// Labels of `X S'`.
    fn output_with_all_inputs(&self, pair: &ChannelPair) -> Result<SubsystemSet> {
        let mut labels: Vec<String> = pair.output.labels().to_vec();
        labels.extend(self.alias.labels().iter().map(|s| s.to_string()));
        SubsystemSet::new(labels)
    }

    fn all_inputs(&self) -> SubsystemSet {
        SubsystemSet::new(self.alias.labels()).expect("distinct labels")
    }

    /// Layout of the Choi matrix of `X' → X` within this frame.
    pub fn pair_layout(&self, pair: &ChannelPair) -> Result<SubsystemLayout> {
        self.pair_set(pair)?.layout_in(&self.layout)
    }

    /// Input dimension left out of a pair, `d_{S'∖X'}`.
    fn rest_input_dim(&self, pair: &ChannelPair) -> Result<usize> {
        pair.input.check_in(&self.input)?;
        Ok(self.input.total_dim() / pair.input.layout_in(&self.input)?.total_dim())
    }

    /// Choi matrix of a channel for `pair`, relabelled into this frame.
    pub fn embed(&self, pair: &ChannelPair, ch: &ChannelSpec) -> Result<HermitianOperator> {
        let want_in = pair.input.layout_in(&self.input)?;
        let want_out = pair.output.layout_in(&self.output)?;
        if !ch.in_layout().same_factors(&want_in) || !ch.out_layout().same_factors(&want_out) {
            return Err(RmpError::DimensionMismatch(format!(
                "channel for {pair} maps {:?} to {:?}",
                ch.in_layout().labels(),
                ch.out_layout().labels()
            )));
        }
        let in_alias: Vec<(String, usize)> = ch
            .in_layout()
            .factors()
            .iter()
            .map(|f| {
                let k = self.input.position(&f.label).expect("checked above");
                (self.alias.factors()[k].label.clone(), f.dim)
            })
            .collect();
        let own = ch.out_layout().concat(&SubsystemLayout::from_pairs(in_alias)?)?;
        let j = ch.choi().with_layout(own)?;
        reorder(&j, &self.pair_layout(pair)?)
    }

    /// Wraps a Choi matrix laid out as [`Self::pair_layout`] into a channel.
    pub fn unembed(&self, pair: &ChannelPair, choi: &HermitianOperator) -> Result<ChannelSpec> {
        let in_l = pair.input.layout_in(&self.input)?;
        let out_l = pair.output.layout_in(&self.output)?;
        ChannelSpec::new(in_l, out_l, choi.matrix().clone())
    }

    /// `tr_{SS'∖XX'}(J) ⊗ I_{S'∖X'}/d_{S'∖X'} − tr_{S∖X}(J)` as an expression.
    fn existence_defect(&self, v: &MatExpr, pair: &ChannelPair) -> Result<MatExpr> {
        let keep = self.pair_set(pair)?;
        let wide = self.output_with_all_inputs(pair)?;
        let wide_l = wide.layout_in(&self.layout)?;
        let d_rest = self.rest_input_dim(pair)? as f64;
        let left = v.partial_trace(&keep)?.extend_identity(&wide_l)?.scale(1.0 / d_rest);
        left.sub(&v.partial_trace(&wide)?)
    }
}

/// The marginal of `global` on `pair`, if it exists.
pub fn marginal_channel(global: &ChannelSpec, pair: &ChannelPair) -> Result<Option<ChannelSpec>> {
    let frame = ChoiFrame::new(global.in_layout().clone(), global.out_layout().clone())?;
    let j = frame.choi_of(global)?;
    let keep = frame.pair_set(pair)?;
    let wide = frame.output_with_all_inputs(pair)?;
    let d_rest = frame.rest_input_dim(pair)? as f64;
    let m = partial_trace(&j, &keep)?;
    let left = extend_identity(&m, &wide.layout_in(frame.layout())?)?.scale(1.0 / d_rest);
    let right = partial_trace(&j, &wide)?;
    if left.max_abs_diff(&right) > PSD_TOL {
        return Ok(None);
    }
    Ok(Some(frame.unembed(pair, &m)?))
}

impl ChoiFrame {
    /// The global channel's Choi matrix in this frame.
    pub fn choi_of(&self, global: &ChannelSpec) -> Result<HermitianOperator> {
        let all = ChannelPair::new(
            SubsystemSet::new(self.input.labels())?,
            SubsystemSet::new(self.output.labels())?,
        );
        self.embed(&all, global)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMarginalFamily {
    frame: ChoiFrame,
    entries: Vec<(ChannelPair, ChannelSpec)>,
}

impl ChannelMarginalFamily {
    pub fn new(
        global_in: SubsystemLayout,
        global_out: SubsystemLayout,
        entries: Vec<(ChannelPair, ChannelSpec)>,
    ) -> Result<Self> {
        let frame = ChoiFrame::new(global_in, global_out)?;
        for (p, ch) in &entries {
            frame.embed(p, ch)?;
        }
        Ok(Self { frame, entries })
    }

    /// Marginals of a global channel on the given pairs; errors when one does not exist.
    pub fn from_global(global: &ChannelSpec, pairs: &[ChannelPair]) -> Result<Self> {
        let entries = pairs
            .iter()
            .map(|p| {
                let m = marginal_channel(global, p)?
                    .ok_or_else(|| RmpError::InvalidChannel(format!("global channel has no marginal on {p}")))?;
                Ok((p.clone(), m))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(global.in_layout().clone(), global.out_layout().clone(), entries)
    }

    pub fn frame(&self) -> &ChoiFrame {
        &self.frame
    }

    pub fn global_in(&self) -> &SubsystemLayout {
        &self.frame.input
    }

    pub fn global_out(&self) -> &SubsystemLayout {
        &self.frame.output
    }

    pub fn entries(&self) -> &[(ChannelPair, ChannelSpec)] {
        &self.entries
    }

    pub fn pairs(&self) -> Vec<ChannelPair> {
        self.entries.iter().map(|e| e.0.clone()).collect()
    }

    /// Entrywise mixture `p·self + (1-p)·other` of the Choi matrices.
    pub fn mix(&self, p: f64, other: &ChannelMarginalFamily) -> Result<Self> {
        if self.frame != other.frame || self.entries.len() != other.entries.len() {
            return Err(RmpError::DimensionMismatch("families differ in shape".into()));
        }
        let mut entries = vec![];
        for ((pa, a), (pb, b)) in self.entries.iter().zip(&other.entries) {
            if pa != pb {
                return Err(RmpError::DimensionMismatch(format!("pairs {pa} and {pb} differ")));
            }
            let ja = self.frame.embed(pa, a)?;
            let jb = self.frame.embed(pb, b)?;
            entries.push((pa.clone(), self.frame.unembed(pa, &ja.combine(p, &jb, 1.0 - p)?)?));
        }
        Self::new(self.global_in().clone(), self.global_out().clone(), entries)
    }

    fn embedded(&self) -> Result<Vec<(ChannelPair, HermitianOperator)>> {
        self.entries
            .iter()
            .map(|(p, ch)| Ok((p.clone(), self.frame.embed(p, ch)?)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRmpInstance {
    pub family: ChannelMarginalFamily,
    pub target: ChannelPair,
    pub free: FreeChannelSetSpec,
}

impl ChannelRmpInstance {
    pub fn new(family: ChannelMarginalFamily, target: ChannelPair, free: FreeChannelSetSpec) -> Result<Self> {
        if !free.input.same_members(&target.input) || !free.output.same_members(&target.output) {
            return Err(RmpError::InvalidArgument(format!(
                "free set acts on {}->{} but the target is {target}",
                free.input, free.output
            )));
        }
        target.input.check_in(family.global_in())?;
        target.output.check_in(family.global_out())?;
        let inst = Self { family, target, free };
        inst.check_free()?;
        Ok(inst)
    }

    fn check_free(&self) -> Result<()> {
        let tl = self.family.frame.pair_layout(&self.target)?;
        match &self.free.kind {
            FreeChannelKind::AllChannels => Ok(()),
            FreeChannelKind::FreeOutputState(spec) => {
                spec.constraints(&self.target.output.layout_in(self.family.global_out())?)?;
                Ok(())
            }
            FreeChannelKind::SingletonChannel(j) => {
                if j.dim() != tl.total_dim() {
                    return Err(RmpError::DimensionMismatch(format!(
                        "singleton Choi matrix has dimension {}, target pair needs {}",
                        j.dim(),
                        tl.total_dim()
                    )));
                }
                Ok(())
            }
        }
    }

    /// Heuristic check that a full-rank state preparation is free.
    pub fn warnings(&self) -> Vec<String> {
        match &self.free.kind {
            FreeChannelKind::AllChannels => vec![],
            FreeChannelKind::FreeOutputState(spec) => match self
                .target
                .output
                .layout_in(self.family.global_out())
                .and_then(|l| spec.full_rank_member(&l))
            {
                Ok(Some(_)) => vec![],
                _ => vec!["no full-rank state preparation is known to be free: strong duality is not guaranteed".into()],
            },
            FreeChannelKind::SingletonChannel(_) => vec![
                "a single free channel contains no full-rank state preparation unless it is one: strong duality is not guaranteed".into(),
            ],
        }
    }
}

/// Emits the Choi-cone constraints shared by every channel program: global
/// trace preservation (up to scale), marginal existence on each pair and on
/// the target, and the free-channel constraint on the target marginal.
fn emit_channel_cone(
    b: &mut ProgramBuilder,
    frame: &ChoiFrame,
    v: &MatExpr,
    pairs: &[ChannelPair],
    target: Option<(&ChannelPair, &FreeChannelSetSpec)>,
) -> Result<()> {
    let inputs = frame.all_inputs().layout_in(frame.layout())?;
    let scale = 1.0 / inputs.total_dim() as f64;
    let id_in = HermitianOperator::identity(inputs.clone()).scale(scale);
    b.eq(
        &v.partial_trace(&frame.all_inputs())?,
        &MatExpr::scalar_times(&v.trace(), &id_in),
    )?;
    let mut all = pairs.to_vec();
    if let Some((t, _)) = target {
        all.push(t.clone());
    }
    for p in &all {
        b.eq_zero(&frame.existence_defect(v, p)?);
    }
    if let Some((t, free)) = target {
        let tl = frame.pair_layout(t)?;
        let m = v.partial_trace(&frame.pair_set(t)?)?;
        match &free.kind {
            FreeChannelKind::AllChannels => {}
            FreeChannelKind::FreeOutputState(spec) => {
                let out = m.partial_trace(&t.output)?;
                let d_in = (tl.total_dim() / out.dim()) as f64;
                b.eq(&m, &out.extend_identity(&tl)?.scale(1.0 / d_in))?;
                let spec_layout = t.output.layout_in(&frame.output)?;
                let out = out.reorder(&spec_layout)?;
                spec.emit(b, &out, true)?;
            }
            FreeChannelKind::SingletonChannel(j) => {
                let j = j.with_layout(tl.clone())?;
                b.eq(&m, &MatExpr::scalar_times(&v.trace(), &j))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct ChannelRobustnessResult {
    pub status: SolveStatus,
    pub value_log2: f64,
    pub primal_trace: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub optimizer: Option<HermitianOperator>,
    #[serde(skip)]
    pub duals: Vec<(ChannelPair, HermitianOperator)>,
    pub diagnostics: Vec<String>,
}

struct ChannelProgram {
    program: solver::ConicProgram,
    v: VarHandle,
    doms: Vec<PsdHandle>,
}

fn build_channel_robustness(inst: &ChannelRmpInstance) -> Result<ChannelProgram> {
    let frame = inst.family.frame();
    let mut b = ProgramBuilder::new();
    let (vh, v, _) = b.psd_variable(frame.layout());
    emit_channel_cone(
        &mut b,
        frame,
        &v,
        &inst.family.pairs(),
        Some((&inst.target, &inst.free)),
    )?;
    let mut doms = vec![];
    for (p, j) in inst.family.embedded()? {
        let vx = v.partial_trace(&frame.pair_set(&p)?)?;
        doms.push(b.psd_geq(&vx, &MatExpr::constant(&j))?);
    }
    b.minimize(&v.trace());
    Ok(ChannelProgram {
        program: b.build(),
        v: vh,
        doms,
    })
}

/// `min tr V` over scaled Choi matrices of compatible global channels with
/// free target marginal, subject to `J_{XX'} ⪯ tr_{SS'∖XX'} V`.
pub fn channel_robustness(inst: &ChannelRmpInstance, settings: &Settings) -> Result<ChannelRobustnessResult> {
    let cp = build_channel_robustness(inst)?;
    let r = solver::solve(&cp.program, settings);
    let frame = inst.family.frame();
    match r.status {
        SolveStatus::Optimal => {
            let duals = inst
                .family
                .pairs()
                .into_iter()
                .zip(&cp.doms)
                .map(|(p, h)| {
                    let l = frame.pair_layout(&p)?;
                    Ok((p, HermitianOperator::from_hermitian(l, r.dual(*h).clone())))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ChannelRobustnessResult {
                status: r.status,
                value_log2: r.primal_value.log2().max(0.0),
                primal_trace: r.primal_value,
                dual_value: r.dual_value,
                gap: r.gap,
                iterations: r.iterations,
                optimizer: Some(HermitianOperator::from_hermitian(
                    frame.layout().clone(),
                    r.var(cp.v).clone(),
                )),
                duals,
                diagnostics: inst.warnings(),
            })
        }
        SolveStatus::Infeasible => {
            let mut diagnostics =
                vec!["channel robustness program is infeasible: the robustness is infinite".to_string()];
            diagnostics.extend(inst.warnings());
            Ok(ChannelRobustnessResult {
                status: r.status,
                value_log2: f64::INFINITY,
                primal_trace: f64::INFINITY,
                dual_value: f64::INFINITY,
                gap: 0.0,
                iterations: r.iterations,
                optimizer: None,
                duals: vec![],
                diagnostics,
            })
        }
        _ => {
            r.require_optimal("channel robustness")?;
            unreachable!()
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelFeasibility {
    pub feasible: bool,
    pub status: SolveStatus,
    /// Choi matrix of a compatible global channel, in the family's frame.
    pub global_choi: Option<HermitianOperator>,
}

/// Direct feasibility program: a normalized global Choi matrix whose
/// marginals exist and equal the given ones, with no free-set constraint.
pub fn channel_marginal_feasibility(family: &ChannelMarginalFamily, settings: &Settings) -> Result<ChannelFeasibility> {
    let frame = family.frame();
    let mut b = ProgramBuilder::new();
    let (vh, v, _) = b.psd_variable(frame.layout());
    b.eq_scalar(&v.trace().add_constant(-1.0));
    emit_channel_cone(&mut b, frame, &v, &family.pairs(), None)?;
    for (p, j) in family.embedded()? {
        b.eq(&v.partial_trace(&frame.pair_set(&p)?)?, &MatExpr::constant(&j))?;
    }
    let r = solver::solve(&b.build(), settings);
    match r.status {
        SolveStatus::Optimal => Ok(ChannelFeasibility {
            feasible: true,
            status: r.status,
            global_choi: Some(HermitianOperator::from_hermitian(
                frame.layout().clone(),
                r.var(vh).clone(),
            )),
        }),
        SolveStatus::Infeasible => Ok(ChannelFeasibility {
            feasible: false,
            status: r.status,
            global_choi: None,
        }),
        _ => {
            r.require_optimal("channel marginal feasibility")?;
            unreachable!()
        }
    }
}

/// Compatibility through the robustness: compatible iff `2^R − 1 ≤ tol`.
pub fn check_channel_compatible(inst: &ChannelRmpInstance, tol: f64, settings: &Settings) -> Result<bool> {
    let r = channel_robustness(inst, settings)?;
    Ok(r.status == SolveStatus::Optimal && r.primal_trace - 1.0 <= tol)
}

/// `sup Σ tr(J^L_{XX'} O_{XX'})` over families in the compatible set.
pub fn channel_linear_max(
    objective: &[(ChannelPair, HermitianOperator)],
    inst: &ChannelRmpInstance,
    settings: &Settings,
) -> Result<f64> {
    let frame = inst.family.frame();
    let mut b = ProgramBuilder::new();
    let (_, v, _) = b.psd_variable(frame.layout());
    b.eq_scalar(&v.trace().add_constant(-1.0));
    let pairs: Vec<ChannelPair> = objective.iter().map(|o| o.0.clone()).collect();
    emit_channel_cone(&mut b, frame, &v, &pairs, Some((&inst.target, &inst.free)))?;
    let mut obj = ScalarExpr::constant(0.0);
    for (p, o) in objective {
        let vx = v.partial_trace(&frame.pair_set(p)?)?;
        let o = o.with_layout(vx.layout().clone())?;
        obj = obj.add(&vx.inner(&o)?);
    }
    b.maximize(&obj);
    let r = solver::solve(&b.build(), settings);
    r.require_optimal("linear maximization over compatible channels")?;
    Ok(r.primal_value)
}

/// `Σ tr(J_{XX'} O_{XX'})` for the family's own channels.
pub fn channel_observable_value(
    objective: &[(ChannelPair, HermitianOperator)],
    family: &ChannelMarginalFamily,
) -> Result<f64> {
    let mut s = 0.0;
    for (p, o) in objective {
        let (_, ch) = family
            .entries()
            .iter()
            .find(|(q, _)| q == p)
            .ok_or_else(|| RmpError::InvalidArgument(format!("family has no channel on {p}")))?;
        let j = family.frame().embed(p, ch)?;
        s += j.inner(&o.with_layout(j.layout().clone())?)?;
    }
    Ok(s)
}

/// States `|k⟩`, `(|j⟩+|k⟩)/√2` and `(|j⟩+i|k⟩)/√2` for `j < k`: `d²`
/// pure states spanning the Hermitian operators.
pub fn frame_states(d: usize) -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = vec![];
    let proj = |v: Vec<(usize, num_complex::Complex64)>| {
        let mut x = crate::hermitian::CVec::zeros(d);
        for (k, a) in v {
            x[k] = a;
        }
        &x * x.adjoint()
    };
    for k in 0..d {
        out.push(proj(vec![(k, c(1.0, 0.0))]));
    }
    for j in 0..d {
        for k in j + 1..d {
            out.push(proj(vec![(j, c(s, 0.0)), (k, c(s, 0.0))]));
            out.push(proj(vec![(j, c(s, 0.0)), (k, c(0.0, s))]));
        }
    }
    out
}

fn hermitian_coords(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.push(m[(i, i)].re);
        for j in i + 1..n {
            v.push(m[(i, j)].re);
            v.push(m[(i, j)].im);
        }
    }
    v
}

/// Observables and input states for one pair.
#[derive(Debug, Clone)]
pub struct PairWitness {
    pub pair: ChannelPair,
    pub observables: Vec<HermitianOperator>,
    pub inputs: Vec<DensityMatrix>,
    /// The dual block `E_{XX'}` the observables were folded from.
    pub choi_observable: HermitianOperator,
}

#[derive(Debug, Clone)]
pub struct ChannelWitness {
    pub pairs: Vec<PairWitness>,
    /// Common length of the observable lists.
    pub n: usize,
    pub value_at_family: f64,
    pub free_sup: f64,
    pub robustness_log2: f64,
}

impl ChannelWitness {
    pub fn gap(&self) -> f64 {
        self.value_at_family - self.free_sup
    }

    /// `Σ tr[W_j E(ρ_j)]` for the given family.
    pub fn evaluate(&self, family: &ChannelMarginalFamily) -> Result<f64> {
        let mut s = 0.0;
        for pw in &self.pairs {
            let (_, ch) = family
                .entries()
                .iter()
                .find(|(q, _)| q == &pw.pair)
                .ok_or_else(|| RmpError::InvalidArgument(format!("family has no channel on {}", pw.pair)))?;
            for (w, rho) in pw.observables.iter().zip(&pw.inputs) {
                let out = ch.apply_op(rho.op())?;
                s += out.inner(&w.with_layout(out.layout().clone())?)?;
            }
        }
        Ok(s)
    }
}

/// `E = Σ_{ij} ω_ij ξ_i ⊗ ρ_jᵀ` solved for `ω`, folded into
/// `W_j = Σ_i ω_ij ξ_i / d_{X'}`.
fn decompose(e: &CMat, d_out: usize, d_in: usize) -> Result<(Vec<CMat>, Vec<CMat>)> {
    let xi = frame_states(d_out);
    let rho = frame_states(d_in);
    let n = d_out * d_out * d_in * d_in;
    let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut col = 0;
    for x in &xi {
        for r in &rho {
            let basis = crate::hermitian::kron(x, &r.transpose());
            for (row, val) in hermitian_coords(&basis).into_iter().enumerate() {
                a[(row, col)] = val;
            }
            col += 1;
        }
    }
    let b = nalgebra::DVector::from_vec(hermitian_coords(e));
    let omega = a
        .lu()
        .solve(&b)
        .ok_or_else(|| RmpError::InvalidArgument("frame operators are not linearly independent".into()))?;
    let mut ws = vec![CMat::zeros(d_out, d_out); rho.len()];
    for (i, x) in xi.iter().enumerate() {
        for (j, w) in ws.iter_mut().enumerate() {
            *w += x.scale(omega[i * rho.len() + j] / d_in as f64);
        }
    }
    Ok((ws, rho))
}

pub const CHANNEL_WITNESS_THRESHOLD_LOG2: f64 = 1e-6;

/// Observables `W_{j|X'→X}` and input states `ρ_{j|X'→X}` from the dual
/// optimum, padded with zero observables to a common length
/// `(max_pairs max(d_X, d_X'))² + 3`.
pub fn channel_witness(inst: &ChannelRmpInstance, settings: &Settings) -> Result<ChannelWitness> {
    let r = channel_robustness(inst, settings)?;
    if r.status != SolveStatus::Optimal {
        return Err(RmpError::Solver {
            status: r.status,
            detail: r.diagnostics.join("; "),
        });
    }
    if r.value_log2 <= CHANNEL_WITNESS_THRESHOLD_LOG2 {
        return Err(RmpError::NoWitness(format!(
            "robustness {:.3e} is zero within tolerance: the channels are compatible",
            r.value_log2
        )));
    }
    let frame = inst.family.frame();
    let n = inst
        .family
        .entries()
        .iter()
        .map(|(_, ch)| ch.din().max(ch.dout()))
        .max()
        .unwrap_or(1)
        .pow(2)
        + 3;
    let mut pairs = vec![];
    for (p, e) in &r.duals {
        let in_l = p.input.layout_in(&frame.input)?;
        let out_l = p.output.layout_in(&frame.output)?;
        let (ws, rhos) = decompose(e.matrix(), out_l.total_dim(), in_l.total_dim())?;
        let mut observables: Vec<HermitianOperator> = ws
            .into_iter()
            .map(|w| HermitianOperator::from_hermitian(out_l.clone(), w))
            .collect();
        let mut inputs = rhos
            .into_iter()
            .map(|m| DensityMatrix::from_matrix(in_l.clone(), m))
            .collect::<Result<Vec<_>>>()?;
        while observables.len() < n {
            observables.push(HermitianOperator::zeros(out_l.clone()));
            inputs.push(DensityMatrix::maximally_mixed(in_l.clone()));
        }
        pairs.push(PairWitness {
            pair: p.clone(),
            observables,
            inputs,
            choi_observable: e.clone(),
        });
    }
    let mut w = ChannelWitness {
        pairs,
        n,
        value_at_family: 0.0,
        free_sup: channel_linear_max(&r.duals, inst, settings)?,
        robustness_log2: r.value_log2,
    };
    w.value_at_family = w.evaluate(&inst.family)?;
    Ok(w)
}

/// Per-pair part of an ensemble state discrimination task.
#[derive(Debug, Clone)]
pub struct EnsemblePart {
    pub pair: ChannelPair,
    pub weight: f64,
    pub priors: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub povm: Vec<HermitianOperator>,
}

#[derive(Debug, Clone)]
pub struct EnsembleTask {
    parts: Vec<EnsemblePart>,
    pub epsilon: f64,
    pub deltas: Option<(f64, f64)>,
}

impl EnsembleTask {
    /// Checks normalization, positivity and completeness of every part.
    pub fn new(parts: Vec<EnsemblePart>, epsilon: f64) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > 1e-9 || parts.iter().any(|p| p.weight < 0.0) {
            return Err(RmpError::InvalidArgument(format!("pair weights sum to {total}")));
        }
        for p in &parts {
            if p.priors.is_empty() || p.priors.len() != p.states.len() || p.priors.len() != p.povm.len() {
                return Err(RmpError::InvalidArgument(format!(
                    "pair {} has mismatched lists",
                    p.pair
                )));
            }
            if p.priors.iter().any(|&q| q < 0.0) || (p.priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(RmpError::InvalidArgument(format!(
                    "priors on {} are not a distribution",
                    p.pair
                )));
            }
            let layout = p.povm[0].layout().clone();
            let mut sum = HermitianOperator::zeros(layout.clone());
            for e in &p.povm {
                if e.min_eigenvalue()? < -PSD_TOL {
                    return Err(RmpError::InvalidArgument(format!(
                        "POVM element on {} is not positive",
                        p.pair
                    )));
                }
                sum = sum.add(&e.with_layout(layout.clone())?)?;
            }
            if sum.max_abs_diff(&HermitianOperator::identity(layout)) > 1e-9 {
                return Err(RmpError::InvalidArgument(format!("POVM on {} is incomplete", p.pair)));
            }
        }
        Ok(Self {
            parts,
            epsilon,
            deltas: None,
        })
    }

    /// Like [`Self::new`], additionally requiring every probability to be
    /// positive and every POVM element positive definite.
    pub fn strictly_positive(parts: Vec<EnsemblePart>, epsilon: f64) -> Result<Self> {
        let t = Self::new(parts, epsilon)?;
        if !t.is_strictly_positive()? {
            return Err(RmpError::InvalidArgument(
                "task is not strictly positive: every probability and POVM element must be positive".into(),
            ));
        }
        Ok(t)
    }

    pub fn is_strictly_positive(&self) -> Result<bool> {
        for p in &self.parts {
            if p.weight <= 0.0 || p.priors.iter().any(|&q| q <= 0.0) {
                return Ok(false);
            }
            for e in &p.povm {
                if e.min_eigenvalue()? <= 0.0 {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn parts(&self) -> &[EnsemblePart] {
        &self.parts
    }

    /// Choi-space observables `O = d_{X'} Σᵢ p p_i Eᵢ ⊗ σᵢᵀ`, so that
    /// `P_{D_S}(L) = Σ tr(J^L O)`.
    pub fn choi_observables(&self, frame: &ChoiFrame) -> Result<Vec<(ChannelPair, HermitianOperator)>> {
        self.parts
            .iter()
            .map(|p| {
                let l = frame.pair_layout(&p.pair)?;
                let d_in = p.states[0].dim() as f64;
                let mut o = CMat::zeros(l.total_dim(), l.total_dim());
                for ((q, s), e) in p.priors.iter().zip(&p.states).zip(&p.povm) {
                    o += crate::hermitian::kron(e.matrix(), &s.matrix().transpose()).scale(d_in * p.weight * q);
                }
                Ok((p.pair.clone(), HermitianOperator::from_hermitian(l, o)))
            })
            .collect()
    }
}

/// `P_{D_S} = Σ_pairs Σᵢ p p_i tr[Eᵢ E(σᵢ)]`.
pub fn channel_success_probability(task: &EnsembleTask, family: &ChannelMarginalFamily) -> Result<f64> {
    let mut s = 0.0;
    for p in &task.parts {
        let (_, ch) = family
            .entries()
            .iter()
            .find(|(q, _)| q == &p.pair)
            .ok_or_else(|| RmpError::DimensionMismatch(format!("family has no channel on {}", p.pair)))?;
        for ((q, st), e) in p.priors.iter().zip(&p.states).zip(&p.povm) {
            let out = ch.apply_op(st.op())?;
            s += p.weight * q * out.inner(&e.with_layout(out.layout().clone())?)?;
        }
    }
    Ok(s)
}

/// Shifts each observable to `W + Δ I ≻ 0` and scales all by one `κ` so the
/// sum stays below the identity; `shift` is the margin added above the
/// smallest eigenvalue.
fn positive_povm(observables: &[HermitianOperator], shift: f64) -> Result<Vec<HermitianOperator>> {
    let layout = observables[0].layout().clone();
    let id = HermitianOperator::identity(layout.clone());
    let mut shifted = vec![];
    let mut sum = HermitianOperator::zeros(layout);
    for w in observables {
        let s = w.combine(1.0, &id, shift - w.min_eigenvalue()?)?;
        sum = sum.add(&s)?;
        shifted.push(s);
    }
    let kappa = 1.0 / (sum.max_eigenvalue()? + shift);
    let mut povm: Vec<HermitianOperator> = shifted.iter().map(|s| s.scale(kappa)).collect();
    let mut rest = id;
    for e in &povm {
        rest = rest.sub(e)?;
    }
    povm.push(rest);
    Ok(povm)
}

fn ensemble_parts(w: &ChannelWitness, epsilon: f64, shift: f64) -> Result<Vec<EnsemblePart>> {
    let weight = 1.0 / w.pairs.len() as f64;
    w.pairs
        .iter()
        .map(|pw| {
            let n = pw.observables.len();
            let mut priors = vec![(1.0 - epsilon) / n as f64; n];
            priors.push(epsilon);
            let mut states = pw.inputs.clone();
            states.push(DensityMatrix::maximally_mixed(pw.inputs[0].layout().clone()));
            Ok(EnsemblePart {
                pair: pw.pair.clone(),
                weight,
                priors,
                states,
                povm: positive_povm(&pw.observables, shift)?,
            })
        })
        .collect()
}

/// Ensemble state discrimination task from a channel witness; the task is
/// required to be strictly positive.
pub fn state_discrimination_task(
    w: &ChannelWitness,
    inst: &ChannelRmpInstance,
    rule: crate::discrimination::EpsilonRule,
    settings: &Settings,
) -> Result<EnsembleTask> {
    let degenerate = w.pairs.iter().all(|p| {
        p.observables
            .iter()
            .all(|o| o.matrix().iter().all(|z| z.norm() < 1e-12))
    });
    if degenerate {
        return Err(RmpError::InvalidArgument("witness observables are all zero".into()));
    }
    let shift = 0.01;
    match rule {
        crate::discrimination::EpsilonRule::Fixed(eps) => {
            EnsembleTask::strictly_positive(ensemble_parts(w, eps, shift)?, eps)
        }
        crate::discrimination::EpsilonRule::HalfBound => {
            let frame = inst.family.frame();
            let probe = ensemble_parts(w, 0.5, shift)?;
            let mut minus = vec![];
            let mut gamma = vec![];
            for p in &probe {
                let l = frame.pair_layout(&p.pair)?;
                let n = p.priors.len() - 1;
                let d_in = p.states[0].dim() as f64;
                let mut m = CMat::zeros(l.total_dim(), l.total_dim());
                for i in 0..n {
                    m += crate::hermitian::kron(p.povm[i].matrix(), &p.states[i].matrix().transpose())
                        .scale(d_in * p.weight / n as f64);
                }
                let last = crate::hermitian::kron(p.povm[n].matrix(), &p.states[n].matrix().transpose())
                    .scale(d_in * p.weight);
                gamma.push((p.pair.clone(), HermitianOperator::from_hermitian(l.clone(), last - &m)));
                minus.push((p.pair.clone(), HermitianOperator::from_hermitian(l, m)));
            }
            let d1 = channel_observable_value(&minus, &inst.family)? - channel_linear_max(&minus, inst, settings)?;
            let d2 = channel_linear_max(&gamma, inst, settings)? - channel_observable_value(&gamma, &inst.family)?;
            if d1 <= 0.0 {
                return Err(RmpError::InvalidArgument(format!(
                    "witness does not separate the channels from the compatible set (Δ₁ = {d1:.3e})"
                )));
            }
            let eps = if d2 <= 0.0 { 0.5 } else { (d1 / d2).min(1.0) / 2.0 };
            let mut t = EnsembleTask::strictly_positive(ensemble_parts(w, eps, shift)?, eps)?;
            t.deltas = Some((d1, d2));
            Ok(t)
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChannelAdvantage {
    pub delta_p: f64,
    pub p_family: f64,
    pub p_free_max: f64,
}

pub fn channel_advantage(
    task: &EnsembleTask,
    inst: &ChannelRmpInstance,
    settings: &Settings,
) -> Result<ChannelAdvantage> {
    let obs = task.choi_observables(inst.family.frame())?;
    let p_family = channel_success_probability(task, &inst.family)?;
    let p_free_max = channel_linear_max(&obs, inst, settings)?;
    Ok(ChannelAdvantage {
        delta_p: p_family - p_free_max,
        p_family,
        p_free_max,
    })
}

/// Random channel with `kraus` Kraus operators from a Haar-like isometry:
/// a Ginibre matrix `G` orthonormalized as `G (G†G)^{-1/2}`.
pub fn random_channel(
    rng: &mut Rng,
    input: SubsystemLayout,
    output: SubsystemLayout,
    kraus: usize,
) -> Result<ChannelSpec> {
    let (din, dout) = (input.total_dim(), output.total_dim());
    let g = rng.ginibre(dout * kraus, din);
    let e = eig_hermitian_mat(&(g.adjoint() * &g))?;
    let inv_sqrt = &e.vectors
        * CMat::from_diagonal(&crate::hermitian::CVec::from_iterator(
            din,
            e.values.iter().map(|v| c(1.0 / v.sqrt(), 0.0)),
        ))
        * e.vectors.adjoint();
    let iso = g * inv_sqrt;
    let ks: Vec<CMat> = (0..kraus).map(|k| iso.rows(k * dout, dout).into_owned()).collect();
    ChannelSpec::from_kraus(input, output, &ks)
}

/// `ρ ↦ (1-p)ρ + p·tr(ρ)I/d` from `in_label` to `out_label` on a qubit.
pub fn noisy_identity(in_label: &str, out_label: &str, p: f64) -> Result<ChannelSpec> {
    let inl = SubsystemLayout::qubits(&[in_label]);
    let outl = SubsystemLayout::qubits(&[out_label]);
    let id = ChannelSpec::from_kraus(inl.clone(), outl.clone(), &[CMat::identity(2, 2)])?;
    let dep = ChannelSpec::replacement(inl.clone(), &DensityMatrix::maximally_mixed(outl.clone()))?;
    let j = id
        .choi()
        .combine(1.0 - p, &dep.choi().with_layout(id.choi().layout().clone())?, p)?;
    ChannelSpec::new(inl, outl, j.into_matrix())
}

fn set(labels: &[&str]) -> SubsystemSet {
    SubsystemSet::new(labels.iter().copied()).expect("distinct labels")
}

/// Qubit `A` broadcast to `A` and `B` through noisy identities of noise `p`.
pub fn broadcasting_family(p: f64) -> Result<ChannelMarginalFamily> {
    ChannelMarginalFamily::new(
        SubsystemLayout::qubits(&["A"]),
        SubsystemLayout::qubits(&["A", "B"]),
        vec![
            (ChannelPair::new(set(&["A"]), set(&["A"])), noisy_identity("A", "A", p)?),
            (ChannelPair::new(set(&["A"]), set(&["B"])), noisy_identity("A", "B", p)?),
        ],
    )
}

fn all_channels(target: &ChannelPair) -> FreeChannelSetSpec {
    FreeChannelSetSpec {
        kind: FreeChannelKind::AllChannels,
        input: target.input.clone(),
        output: target.output.clone(),
    }
}

/// Whole-space target with every channel free.
pub fn plain_channel_instance(family: ChannelMarginalFamily) -> Result<ChannelRmpInstance> {
    let target = ChannelPair::new(
        SubsystemSet::new(family.global_in().labels())?,
        SubsystemSet::new(family.global_out().labels())?,
    );
    let free = all_channels(&target);
    ChannelRmpInstance::new(family, target, free)
}

/// Noiseless qubit broadcasting with every channel free.
pub fn broadcasting_instance() -> Result<ChannelRmpInstance> {
    plain_channel_instance(broadcasting_family(0.0)?)
}

/// Marginals on `A→A` and `B→B` of a random product channel on two qubits.
pub fn random_product_family(rng: &mut Rng) -> Result<ChannelMarginalFamily> {
    let a = SubsystemLayout::qubits(&["A"]);
    let b = SubsystemLayout::qubits(&["B"]);
    let ea = random_channel(rng, a.clone(), a.clone(), 2)?;
    let eb = random_channel(rng, b.clone(), b.clone(), 2)?;
    let global = ea.tensor(&eb)?;
    ChannelMarginalFamily::from_global(
        &global,
        &[
            ChannelPair::new(set(&["A"]), set(&["A"])),
            ChannelPair::new(set(&["B"]), set(&["B"])),
        ],
    )
}
