//! Ready-made instances used by tests, benches and the command line.

use crate::error::Result;
use crate::free_sets::{FreeSetKind, FreeSetSpec};
use crate::hermitian::{states, DensityMatrix, HermitianOperator, SubsystemLayout, SubsystemSet};
use crate::rng::Rng;
use crate::solver::{ConicProgram, MatExpr, ProgramBuilder};
use crate::state_rmp::{MarginalFamily, RmpInstance};

fn set(labels: &[&str]) -> SubsystemSet {
    SubsystemSet::new(labels.iter().copied()).expect("distinct labels")
}

pub fn abc() -> SubsystemLayout {
    SubsystemLayout::qubits(&["A", "B", "C"])
}

pub fn overlapping_pairs() -> Vec<SubsystemSet> {
    vec![set(&["A", "B"]), set(&["B", "C"])]
}

/// `{W_AB, W_BC}` on three qubits.
pub fn w_family() -> Result<MarginalFamily> {
    MarginalFamily::from_global(&states::w_state(["A", "B", "C"]), &overlapping_pairs())
}

/// W marginals with separable (PPT) free states on `AC`.
pub fn w_instance() -> Result<RmpInstance> {
    RmpInstance::new(
        w_family()?,
        set(&["A", "C"]),
        FreeSetSpec::separable_ppt(set(&["A", "C"])),
    )
}

/// Marginals of `I₈/8` with separable free states on `AC`.
pub fn white_noise_instance() -> Result<RmpInstance> {
    let mm = DensityMatrix::maximally_mixed(abc());
    RmpInstance::new(
        MarginalFamily::from_global(&mm, &overlapping_pairs())?,
        set(&["A", "C"]),
        FreeSetSpec::separable_ppt(set(&["A", "C"])),
    )
}

/// `σ_AB = σ_BC = |Ψ⁺⟩⟨Ψ⁺|` with `Ψ⁺ = (|01⟩ + |10⟩)/√2`, target the whole
/// system and every state free.
pub fn monogamy_family() -> Result<MarginalFamily> {
    let psi = states::single_excitation_vec();
    let ab = DensityMatrix::pure(SubsystemLayout::qubits(&["A", "B"]), &psi)?;
    let bc = DensityMatrix::pure(SubsystemLayout::qubits(&["B", "C"]), &psi)?;
    MarginalFamily::new(abc(), vec![(set(&["A", "B"]), ab), (set(&["B", "C"]), bc)])
}

pub fn monogamy_instance() -> Result<RmpInstance> {
    RmpInstance::new(
        monogamy_family()?,
        set(&["A", "B", "C"]),
        FreeSetSpec::all_states(set(&["A", "B", "C"])),
    )
}

/// Marginals on `AB`, `BC` of a random global three-qubit state of the given rank.
pub fn random_compatible_family(rng: &mut Rng, rank: usize) -> Result<MarginalFamily> {
    let rho = DensityMatrix::from_matrix(abc(), rng.density_matrix(8, rank))?;
    MarginalFamily::from_global(&rho, &overlapping_pairs())
}

/// Independent random full-rank marginals on `AB` and `BC`; usually
/// inconsistent on `B`.
pub fn random_independent_family(rng: &mut Rng) -> Result<MarginalFamily> {
    let ab = DensityMatrix::from_matrix(SubsystemLayout::qubits(&["A", "B"]), rng.density_matrix(4, 4))?;
    let bc = DensityMatrix::from_matrix(SubsystemLayout::qubits(&["B", "C"]), rng.density_matrix(4, 4))?;
    MarginalFamily::new(abc(), vec![(set(&["A", "B"]), ab), (set(&["B", "C"]), bc)])
}

/// A random free set on `AC` with a full-rank member: every state,
/// separable, incoherent, or a random full-rank singleton.
pub fn random_free_set(rng: &mut Rng) -> Result<FreeSetSpec> {
    let t = set(&["A", "C"]);
    Ok(match rng.next_u64() % 4 {
        0 => FreeSetSpec::all_states(t),
        1 => FreeSetSpec::separable_ppt(t),
        2 => FreeSetSpec::incoherent(t),
        _ => FreeSetSpec::singleton(DensityMatrix::from_matrix(
            SubsystemLayout::qubits(&["A", "C"]),
            rng.density_matrix(4, 4),
        )?)?,
    })
}

/// Random instance for duality checks: independent marginals and a random
/// free set with a full-rank member.
pub fn random_duality_instance(rng: &mut Rng) -> Result<RmpInstance> {
    let fam = random_independent_family(rng)?;
    let free = random_free_set(rng)?;
    RmpInstance::new(fam, set(&["A", "C"]), free)
}

/// `tr_A` of `W_AB` replaced into a `BC` marginal: `diag(2/3, 1/3) ⊗ I/2`.
pub fn w_ab_with_noisy_bc() -> Result<MarginalFamily> {
    let w = w_family()?;
    let ab = w.entries()[0].1.clone();
    let b = HermitianOperator::diagonal(
        SubsystemLayout::qubits(&["B", "C"]),
        &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    )?;
    MarginalFamily::new(
        abc(),
        vec![(set(&["A", "B"]), ab), (set(&["B", "C"]), DensityMatrix::new(b)?)],
    )
}

/// A primal/dual pair without Slater points: `min α` subject to
/// `α|0⟩⟨0| ⪰ I/2` has no feasible point, while its dual
/// `max tr(Y)/2` over `Y ⪰ 0` with `Y₀₀ ≤ 1` is unbounded along `|1⟩⟨1|`.
pub fn degenerate_cone_pair() -> (ConicProgram, ConicProgram) {
    let q = SubsystemLayout::qubits(&["A"]);
    let half = HermitianOperator::identity(q.clone()).scale(0.5);
    let ket0 = HermitianOperator::diagonal(q.clone(), &[1.0, 0.0]).expect("diagonal");

    let mut p = ProgramBuilder::new();
    let alpha = p.scalar();
    p.psd(
        &MatExpr::scalar_times(&alpha, &ket0)
            .sub_constant(&half)
            .expect("same layout"),
    );
    p.minimize(&alpha);

    let mut d = ProgramBuilder::new();
    let (_, y, _) = d.psd_variable(&q);
    d.nonneg(&y.inner(&ket0).expect("same layout").scale(-1.0).add_constant(1.0));
    d.maximize(&y.trace().scale(0.5));
    (p.build(), d.build())
}

/// True for specs of the given kind; handy for filtering random draws.
pub fn is_singleton(spec: &FreeSetSpec) -> bool {
    matches!(spec.kind, FreeSetKind::Singleton { .. })
}
