//! Sub-channel discrimination games built from incompatibility witnesses,
//! and the random-unitary advantage experiment.

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::ChannelSpec;
use crate::error::{Result, RmpError};
use crate::hermitian::{c, reorder, CMat, CVec, HermitianOperator, SubsystemLayout, SubsystemSet};
use crate::rng::Rng;
use crate::solver::Settings;
use crate::state_rmp::{evaluate_observables, linear_max_over_set, CompatibleSet, MarginalFamily};

/// Tolerance for POVM completeness and unitarity checks.
const COMPLETENESS_TOL: f64 = 1e-9;

/// The part of a task acting on one marginal `X`.
#[derive(Debug, Clone)]
pub struct SubTask {
    pub set: SubsystemSet,
    pub weight: f64,
    pub priors: Vec<f64>,
    pub channels: Vec<ChannelSpec>,
    pub povm: Vec<HermitianOperator>,
}

#[derive(Debug, Clone)]
pub struct DiscriminationTask {
    parts: Vec<SubTask>,
}

impl DiscriminationTask {
    pub fn new(parts: Vec<SubTask>) -> Result<Self> {
        let total: f64 = parts.iter().map(|p| p.weight).sum();
        if (total - 1.0).abs() > COMPLETENESS_TOL || parts.iter().any(|p| p.weight < 0.0) {
            return Err(RmpError::InvalidArgument(format!("subset weights sum to {total}")));
        }
        for p in &parts {
            let n = p.priors.len();
            if n == 0 || p.channels.len() != n || p.povm.len() != n {
                return Err(RmpError::InvalidArgument(format!(
                    "part on {} needs equally many priors, channels and POVM elements",
                    p.set
                )));
            }
            let s: f64 = p.priors.iter().sum();
            if (s - 1.0).abs() > COMPLETENESS_TOL || p.priors.iter().any(|&q| q < 0.0) {
                return Err(RmpError::InvalidArgument(format!("priors on {} sum to {s}", p.set)));
            }
            let layout = p.povm[0].layout().clone();
            let mut sum = HermitianOperator::zeros(layout.clone());
            for e in &p.povm {
                if e.min_eigenvalue()? < -COMPLETENESS_TOL {
                    return Err(RmpError::InvalidArgument(format!(
                        "POVM element on {} is not positive",
                        p.set
                    )));
                }
                sum = sum.add(e)?;
            }
            let dev = sum.max_abs_diff(&HermitianOperator::identity(layout.clone()));
            if dev > COMPLETENESS_TOL {
                return Err(RmpError::InvalidArgument(format!(
                    "POVM on {} misses completeness by {dev:.2e}",
                    p.set
                )));
            }
            for ch in &p.channels {
                if !ch.out_layout().same_factors(&layout) || !ch.in_layout().same_factors(&layout) {
                    return Err(RmpError::DimensionMismatch(format!(
                        "sub-channel on {} does not act on {:?}",
                        p.set,
                        layout.labels()
                    )));
                }
            }
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[SubTask] {
        &self.parts
    }

    /// All weights and priors positive and every POVM element positive definite.
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

    /// `O_X = Σᵢ p_X p_{i|X} E_{i|X}†(E_{i|X})`, so that `P_D(κ) = Σ_X tr(κ_X O_X)`.
    pub fn effective_observables(&self) -> Result<Vec<(SubsystemSet, HermitianOperator)>> {
        self.parts
            .iter()
            .map(|p| {
                let mut o = HermitianOperator::zeros(p.channels[0].in_layout().clone());
                for ((q, ch), e) in p.priors.iter().zip(&p.channels).zip(&p.povm) {
                    o = o.combine(1.0, &ch.adjoint_op(e)?, p.weight * q)?;
                }
                Ok((p.set.clone(), o))
            })
            .collect()
    }
}

/// `P_D = Σ_X Σᵢ p_X p_{i|X} tr[E_{i|X} 𝓔_{i|X}(σ_X)]`.
pub fn success_probability(task: &DiscriminationTask, inputs: &MarginalFamily) -> Result<f64> {
    let mut total = 0.0;
    for p in &task.parts {
        let (_, sigma) = inputs
            .entries()
            .iter()
            .find(|(y, _)| y.same_members(&p.set))
            .ok_or_else(|| RmpError::DimensionMismatch(format!("no input on {}", p.set)))?;
        for ((q, ch), e) in p.priors.iter().zip(&p.channels).zip(&p.povm) {
            let out = ch.apply_op(sigma.op())?;
            let e = if e.layout() == out.layout() {
                e.clone()
            } else {
                reorder(e, out.layout())?
            };
            total += p.weight * q * out.inner(&e)?;
        }
    }
    Ok(total)
}

/// How the weight `ε` of the completing element is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonRule {
    Fixed(f64),
    /// `ε = 1/2` if `Δ₂ ≤ 0`, else `min(Δ₁/Δ₂, 1)/2`.
    HalfBound,
}

/// Spectral data `W_X + δI = Σᵢ ωᵢ |ψᵢ⟩⟨ψᵢ|` recorded during construction.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub set: SubsystemSet,
    pub omega: Vec<f64>,
    pub psi: Vec<CVec>,
    /// `μ_X` used to rescale the POVM.
    pub mu: f64,
}

#[derive(Debug, Clone)]
pub struct WitnessTask {
    pub task: DiscriminationTask,
    pub spectra: Vec<SpectralData>,
    pub epsilon: f64,
    /// `(Δ₁, Δ₂)` when `ε` came from [`EpsilonRule::HalfBound`].
    pub deltas: Option<(f64, f64)>,
}

/// Builds the incomplete POVM `Eᵢ = (Mᵢ + δI)/(μ + δ)` from
/// `Mᵢ = d ωᵢ Uᵢ|ψᵢ⟩⟨ψᵢ|Uᵢ†`, where `μ = λ_max(Σᵢ Mᵢ) + dδ` keeps the
/// completing element `I − Σᵢ Eᵢ` positive definite.
fn povm_from_spectrum(
    layout: &SubsystemLayout,
    omega: &[f64],
    psi: &[CVec],
    unitaries: &[CMat],
    delta: f64,
) -> Result<(Vec<HermitianOperator>, f64)> {
    let d = layout.total_dim();
    let mut ms = Vec::with_capacity(d);
    let mut sum = CMat::zeros(d, d);
    for i in 0..d {
        let v = &unitaries[i] * &psi[i];
        let m = (&v * v.adjoint()).scale(d as f64 * omega[i]);
        sum += &m;
        ms.push(m);
    }
    let sum = HermitianOperator::from_hermitian(layout.clone(), sum);
    let mu = sum.max_eigenvalue()? + d as f64 * delta;
    let id = CMat::identity(d, d);
    let mut povm: Vec<HermitianOperator> = ms
        .into_iter()
        .map(|m| HermitianOperator::from_hermitian(layout.clone(), (m + id.scale(delta)).unscale(mu + delta)))
        .collect();
    let mut rest = HermitianOperator::identity(layout.clone());
    for e in &povm {
        rest = rest.sub(e)?;
    }
    povm.push(rest);
    Ok((povm, mu))
}

fn check_unitary(u: &CMat, d: usize) -> Result<()> {
    if u.nrows() != d || u.ncols() != d {
        return Err(RmpError::DimensionMismatch(format!("unitary must be {d}x{d}")));
    }
    let dev = (u.adjoint() * u - CMat::identity(d, d))
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if dev > 1e-10 {
        return Err(RmpError::InvalidArgument(format!(
            "matrix is not unitary (deviation {dev:.2e})"
        )));
    }
    Ok(())
}

fn assemble(
    blocks: &[(SubsystemSet, HermitianOperator)],
    unitaries: &[(SubsystemSet, Vec<CMat>)],
    delta: f64,
    epsilon: f64,
) -> Result<(DiscriminationTask, Vec<SpectralData>)> {
    if delta <= 0.0 {
        return Err(RmpError::InvalidArgument("delta must be positive".into()));
    }
    let weight = 1.0 / blocks.len() as f64;
    let mut parts = vec![];
    let mut spectra = vec![];
    for (x, w) in blocks {
        let layout = w.layout().clone();
        let d = layout.total_dim();
        if w.min_eigenvalue()? < -crate::config::PSD_TOL {
            return Err(RmpError::InvalidArgument(format!(
                "witness block on {x} is not positive"
            )));
        }
        let (_, us) = unitaries
            .iter()
            .find(|(y, _)| y.same_members(x))
            .ok_or_else(|| RmpError::InvalidArgument(format!("no unitaries given for {x}")))?;
        if us.len() != d && us.len() != d + 1 {
            return Err(RmpError::InvalidArgument(format!(
                "{x} needs {d} unitaries, or {} including the completing channel",
                d + 1
            )));
        }
        for u in us {
            check_unitary(u, d)?;
        }
        let shifted = w.combine(1.0, &HermitianOperator::identity(layout.clone()), delta)?;
        let e = shifted.eig()?;
        let psi: Vec<CVec> = (0..d).map(|k| e.vectors.column(k).into_owned()).collect();
        let (povm, mu) = povm_from_spectrum(&layout, &e.values, &psi, us, delta)?;
        let mut channels = us[..d]
            .iter()
            .map(|u| ChannelSpec::unitary(layout.clone(), u))
            .collect::<Result<Vec<_>>>()?;
        channels.push(match us.get(d) {
            Some(u) => ChannelSpec::unitary(layout.clone(), u)?,
            None => ChannelSpec::identity(layout.clone()),
        });
        let mut priors = vec![(1.0 - epsilon) / d as f64; d];
        priors.push(epsilon);
        parts.push(SubTask {
            set: x.clone(),
            weight,
            priors,
            channels,
            povm,
        });
        spectra.push(SpectralData {
            set: x.clone(),
            omega: e.values,
            psi,
            mu,
        });
    }
    Ok((DiscriminationTask::new(parts)?, spectra))
}

/// The two pieces of `P_D = P₋ + ε Γ` as observable families.
fn split_observables(
    task: &DiscriminationTask,
) -> Result<(
    Vec<(SubsystemSet, HermitianOperator)>,
    Vec<(SubsystemSet, HermitianOperator)>,
)> {
    let mut minus = vec![];
    let mut gamma = vec![];
    for p in task.parts() {
        let n = p.priors.len() - 1;
        let layout = p.channels[0].in_layout().clone();
        let mut m = HermitianOperator::zeros(layout.clone());
        for i in 0..n {
            m = m.combine(1.0, &p.channels[i].adjoint_op(&p.povm[i])?, p.weight / n as f64)?;
        }
        let last = p.channels[n].adjoint_op(&p.povm[n])?;
        gamma.push((p.set.clone(), last.combine(p.weight, &m, -1.0)?));
        minus.push((p.set.clone(), m));
    }
    Ok((minus, gamma))
}

/// `(Δ₁, Δ₂)` with `Δ₁ = P₋(σ) − sup P₋` and `Δ₂ = sup Γ − Γ(σ)`.
pub fn epsilon_deltas(
    task: &DiscriminationTask,
    sigma: &MarginalFamily,
    set: &CompatibleSet,
    settings: &Settings,
) -> Result<(f64, f64)> {
    let (minus, gamma) = split_observables(task)?;
    let d1 = evaluate_observables(&minus, sigma)? - linear_max_over_set(&minus, set, settings)?.value;
    let d2 = linear_max_over_set(&gamma, set, settings)?.value - evaluate_observables(&gamma, sigma)?;
    Ok((d1, d2))
}

/// Discrimination task from witness blocks `W_X ⪰ 0`.
///
/// `unitaries` lists `d_X` unitaries per subset, optionally followed by one
/// more for the completing channel (the identity otherwise). `context` is
/// needed only by [`EpsilonRule::HalfBound`].
pub fn task_from_witness(
    blocks: &[(SubsystemSet, HermitianOperator)],
    unitaries: &[(SubsystemSet, Vec<CMat>)],
    delta: f64,
    rule: EpsilonRule,
    context: Option<(&MarginalFamily, &CompatibleSet)>,
    settings: &Settings,
) -> Result<WitnessTask> {
    match rule {
        EpsilonRule::Fixed(eps) => {
            if !(0.0..=1.0).contains(&eps) {
                return Err(RmpError::InvalidArgument(format!("epsilon {eps} outside [0, 1]")));
            }
            let (task, spectra) = assemble(blocks, unitaries, delta, eps)?;
            Ok(WitnessTask {
                task,
                spectra,
                epsilon: eps,
                deltas: None,
            })
        }
        EpsilonRule::HalfBound => {
            let (sigma, set) = context.ok_or_else(|| {
                RmpError::InvalidArgument("the epsilon bound needs the marginals and the compatible set".into())
            })?;
            // P₋ and Γ do not depend on ε; any value works for the probe.
            let (probe, _) = assemble(blocks, unitaries, delta, 0.5)?;
            let (d1, d2) = epsilon_deltas(&probe, sigma, set, settings)?;
            if d1 <= 0.0 {
                return Err(RmpError::InvalidArgument(format!(
                    "witness does not separate the marginals from the compatible set (Δ₁ = {d1:.3e})"
                )));
            }
            let eps = if d2 <= 0.0 { 0.5 } else { (d1 / d2).min(1.0) / 2.0 };
            let (task, spectra) = assemble(blocks, unitaries, delta, eps)?;
            Ok(WitnessTask {
                task,
                spectra,
                epsilon: eps,
                deltas: Some((d1, d2)),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Advantage {
    pub delta_p: f64,
    pub p_sigma: f64,
    pub p_free_max: f64,
}

/// `ΔP = P_D(σ) − max over the compatible set of P_D(τ)`.
pub fn advantage(
    task: &DiscriminationTask,
    sigma: &MarginalFamily,
    set: &CompatibleSet,
    settings: &Settings,
) -> Result<Advantage> {
    let obs = task.effective_observables()?;
    let p_sigma = evaluate_observables(&obs, sigma)?;
    let p_free_max = linear_max_over_set(&obs, set, settings)?.value;
    Ok(Advantage {
        delta_p: p_sigma - p_free_max,
        p_sigma,
        p_free_max,
    })
}

/// Eigenvalues of `W_X + 0.01·I` for the reference W-marginal witness.
pub const W_WITNESS_OMEGA: [f64; 4] = [
    0.010000027026545,
    0.010000058075968,
    0.458638621962197,
    0.537143367559183,
];

/// Matching eigenvectors, in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub fn w_witness_psi() -> [CVec; 4] {
    let (a, b) = (0.668877697040469, 0.743372468148935);
    let v = |x: [f64; 4]| CVec::from_iterator(4, x.iter().map(|&r| c(r, 0.0)));
    [
        v([0.0, a, -b, 0.0]),
        v([0.0, 0.0, 0.0, 1.0]),
        v([1.0, 0.0, 0.0, 0.0]),
        v([0.0, b, a, 0.0]),
    ]
}

pub const W_WITNESS_DELTA: f64 = 0.01;

/// `W = Σᵢ ωᵢ|ψᵢ⟩⟨ψᵢ| − 0.01·I` on the given two-qubit layout.
pub fn w_witness_block(layout: SubsystemLayout) -> HermitianOperator {
    let mut m = CMat::identity(4, 4).scale(-W_WITNESS_DELTA);
    for (w, p) in W_WITNESS_OMEGA.iter().zip(w_witness_psi()) {
        m += (&p * p.adjoint()).scale(*w);
    }
    HermitianOperator::from_hermitian(layout, m)
}

/// Witness blocks on `AB` and `BC` of the reference W-marginal witness.
///
/// The blocks are tabulated with the shared qubit first, so on `AB`, where the
/// shared qubit `B` comes second, the block is conjugated by the swap.
pub fn w_witness() -> Vec<(SubsystemSet, HermitianOperator)> {
    let ab = SubsystemLayout::qubits(&["A", "B"]);
    let shared_first = w_witness_block(SubsystemLayout::qubits(&["B", "A"]));
    let ab_block = reorder(&shared_first, &ab).expect("same factors");
    vec![
        (SubsystemSet::new(["A", "B"]).expect("distinct labels"), ab_block),
        (
            SubsystemSet::new(["B", "C"]).expect("distinct labels"),
            w_witness_block(SubsystemLayout::qubits(&["B", "C"])),
        ),
    ]
}

/// Weight of the completing element in the reference histogram experiment.
pub const W_TASK_EPSILON: f64 = 0.01;

/// Five Haar unitaries per subset: four for the sub-channels, one for the
/// completing channel. Drawn for `AB` first, then `BC`.
pub fn draw_unitaries(rng: &mut Rng, sets: &[SubsystemSet], dim: usize) -> Vec<(SubsystemSet, Vec<CMat>)> {
    sets.iter()
        .map(|x| (x.clone(), (0..=dim).map(|_| rng.haar_unitary(dim)).collect()))
        .collect()
}

/// The reference W-marginal task with the given unitaries.
pub fn w_task(unitaries: &[(SubsystemSet, Vec<CMat>)], settings: &Settings) -> Result<DiscriminationTask> {
    Ok(task_from_witness(
        &w_witness(),
        unitaries,
        W_WITNESS_DELTA,
        EpsilonRule::Fixed(W_TASK_EPSILON),
        None,
        settings,
    )?
    .task)
}

/// `ΔP` of sample `index`, using the stream `seed ⊕ index`.
pub fn histogram_sample(seed: u64, index: u64, settings: &Settings) -> Result<f64> {
    let inst = crate::instances::w_instance()?;
    let mut rng = Rng::for_sample(seed, index);
    let us = draw_unitaries(&mut rng, &inst.marginals.sets(), 4);
    let task = w_task(&us, settings)?;
    Ok(advantage(&task, &inst.marginals, &inst.compatible_set(), settings)?.delta_p)
}

pub const BIN_WIDTH: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct HistogramSummary {
    pub n: usize,
    pub seed: u64,
    pub mean: f64,
    /// Sample standard deviation (divisor `n − 1`); zero for one sample.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub bin_width: f64,
    /// Left edge of the first bin, a multiple of the bin width.
    pub bin_start: f64,
    pub bin_counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramResult {
    pub samples: Vec<f64>,
    pub summary: HistogramSummary,
}

impl HistogramResult {
    /// `sample_index,delta_p` rows in index order.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample_index,delta_p\n");
        for (i, v) in self.samples.iter().enumerate() {
            s.push_str(&format!("{i},{v:e}\n"));
        }
        s
    }
}

pub fn summarize(samples: &[f64], seed: u64) -> HistogramSummary {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start_bin = (min / BIN_WIDTH).floor();
    let nbins = ((max / BIN_WIDTH).floor() - start_bin) as usize + 1;
    let mut counts = vec![0; nbins];
    for x in samples {
        let k = ((x / BIN_WIDTH).floor() - start_bin) as usize;
        counts[k.min(nbins - 1)] += 1;
    }
    HistogramSummary {
        n,
        seed,
        mean,
        std: var.sqrt(),
        min,
        max,
        bin_width: BIN_WIDTH,
        bin_start: start_bin * BIN_WIDTH,
        bin_counts: counts,
    }
}

/// Runs `n` independent samples on `jobs` worker threads. Results are
/// merged by sample index, so they do not depend on `jobs`.
pub fn histogram_experiment(n: usize, seed: u64, jobs: usize, settings: &Settings) -> Result<HistogramResult> {
    if n == 0 {
        return Err(RmpError::InvalidArgument("sample count must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| RmpError::InvalidArgument(format!("thread pool: {e}")))?;
    let samples = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                histogram_sample(seed, i as u64, settings).map_err(|e| RmpError::Sample {
                    index: i as u64,
                    source: Box::new(e),
                })
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let summary = summarize(&samples, seed);
    Ok(HistogramResult { samples, summary })
}
