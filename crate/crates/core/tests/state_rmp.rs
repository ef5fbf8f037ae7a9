use std::sync::OnceLock;

use proptest::prelude::*;
use rmp_core::channel::ChannelSpec;
use rmp_core::hermitian::{states, DensityMatrix};
use rmp_core::instances::{
    abc, monogamy_instance, overlapping_pairs, random_compatible_family, random_duality_instance, w_ab_with_noisy_bc,
    w_family, w_instance, white_noise_instance,
};
use rmp_core::rng::Rng;
use rmp_core::state_rmp::{
    activation_criterion, check_rfree_compatible, extract_witness, fidelity_range, linear_max_over_set,
    marginal_feasibility, robustness, robustness_dual, ActivationSearch, MarginalFamily,
};
use rmp_core::*;

fn s() -> Settings {
    Settings::default()
}

fn set(l: &[&str]) -> SubsystemSet {
    SubsystemSet::new(l.iter().copied()).unwrap()
}

fn white() -> MarginalFamily {
    MarginalFamily::from_global(&DensityMatrix::maximally_mixed(abc()), &overlapping_pairs()).unwrap()
}

/// Smallest white-noise weight making the W marginals free-compatible.
fn w_noise_threshold() -> f64 {
    static P: OnceLock<f64> = OnceLock::new();
    *P.get_or_init(|| {
        let inst = w_instance().unwrap();
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..30 {
            let mid = 0.5 * (lo + hi);
            let mixed = inst
                .with_marginals(white().mix(mid, &w_family().unwrap()).unwrap())
                .unwrap();
            if check_rfree_compatible(&mixed, 1e-7, &s()).unwrap().is_compatible() {
                hi = mid
            } else {
                lo = mid
            }
        }
        hi
    })
}

#[test]
fn compatibility_examples() {
    assert!(check_rfree_compatible(&white_noise_instance().unwrap(), 1e-6, &s())
        .unwrap()
        .is_compatible());
    assert!(!check_rfree_compatible(&monogamy_instance().unwrap(), 1e-6, &s())
        .unwrap()
        .is_compatible());
    assert!(!check_rfree_compatible(&w_instance().unwrap(), 1e-6, &s())
        .unwrap()
        .is_compatible());
}

#[test]
fn w_robustness_regression_and_scan_bound() {
    let r = robustness(&w_instance().unwrap(), &s()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!(r.gap.abs() <= 1e-7 * r.primal_trace);
    assert!((r.value_log2 - 0.067329829).abs() < 1e-7, "{}", r.value_log2);
    // White noise is one admissible mixing partner, so the scan bounds R from above.
    let bound = -(1.0 - w_noise_threshold()).log2();
    assert!(r.value_log2 <= bound + 1e-6, "{} > {bound}", r.value_log2);
    assert!(r.value_log2 > 0.0);
}

#[test]
fn monogamy_robustness_matches_dual() {
    let inst = monogamy_instance().unwrap();
    let p = robustness(&inst, &s()).unwrap();
    let d = robustness_dual(&inst, &s()).unwrap();
    assert!(p.value_log2 > 0.1);
    assert!((p.primal_trace - d.primal_value).abs() <= 1e-7 * p.primal_trace);
}

#[test]
fn witness_free_sup_is_reproduced() {
    let inst = w_instance().unwrap();
    let w = extract_witness(&inst, &s()).unwrap();
    assert!(w.gap() >= 1e-4);
    for (_, b) in &w.blocks {
        assert!(b.min_eigenvalue().unwrap() >= -1e-9);
    }
    let again = linear_max_over_set(&w.blocks, &inst.compatible_set(), &s()).unwrap();
    assert!((again.value - w.free_sup).abs() < 1e-6);
    assert!(matches!(
        extract_witness(&white_noise_instance().unwrap(), &s()),
        Err(RmpError::NoWitness(_))
    ));
}

#[test]
fn linear_max_examples() {
    let inst = w_instance().unwrap();
    let ids: Vec<_> = inst
        .marginals
        .entries()
        .iter()
        .map(|(x, m)| (x.clone(), HermitianOperator::identity(m.layout().clone())))
        .collect();
    let r = linear_max_over_set(&ids, &inst.compatible_set(), &s()).unwrap();
    assert!((r.value - 2.0).abs() < 1e-7);
}

#[test]
fn free_operations_on_marginals() {
    let fam = w_family().unwrap();
    let ids: Vec<_> = overlapping_pairs()
        .into_iter()
        .map(|x| {
            let l = x.layout_in(&abc()).unwrap();
            (x, ChannelSpec::identity(l))
        })
        .collect();
    assert_eq!(fam.apply_free_operation(&ids).unwrap(), fam);

    let mut rng = Rng::new(9);
    let us: Vec<CMat> = (0..3).map(|_| rng.haar_unitary(2)).collect();
    let q = |l: &str| SubsystemLayout::qubits(&[l]);
    let ch = |k: usize, l: &str| ChannelSpec::unitary(q(l), &us[k]).unwrap();
    let ops = vec![
        (set(&["A", "B"]), ch(0, "A").tensor(&ch(1, "B")).unwrap()),
        (set(&["B", "C"]), ch(1, "B").tensor(&ch(2, "C")).unwrap()),
    ];
    let out = fam.apply_free_operation(&ops).unwrap();
    for ((_, before), (_, after), (a, b)) in fam
        .entries()
        .iter()
        .zip(out.entries())
        .zip([(0, 1), (1, 2)])
        .map(|((x, y), z)| (x, y, z))
    {
        let u = us[a].kronecker(&us[b]);
        let want = before.op().conjugate(&u).unwrap();
        assert!(after.op().max_abs_diff(&want) < 1e-12);
    }
}

#[test]
fn uniqueness_fails_off_the_w_family() {
    let psi = states::w_vec();
    let f = fidelity_range(&w_ab_with_noisy_bc().unwrap(), &psi, &s()).unwrap();
    assert!(f.min_fid < 0.99, "{f:?}");
    assert!(f.max_fid <= 1.0 + 1e-6);
    // With σ_BC = I/4 the B marginals disagree, so no global state exists.
    let ab = w_family().unwrap().entries()[0].1.clone();
    let bc = DensityMatrix::maximally_mixed(SubsystemLayout::qubits(&["B", "C"]));
    let fam = MarginalFamily::new(abc(), vec![(set(&["A", "B"]), ab), (set(&["B", "C"]), bc)]).unwrap();
    assert!(fam.overlap_inconsistency().unwrap() > 0.1);
    let inst = RmpInstance::new(
        fam,
        set(&["A", "B", "C"]),
        FreeSetSpec::all_states(set(&["A", "B", "C"])),
    )
    .unwrap();
    assert!(!marginal_feasibility(&inst, &s()).unwrap().feasible);
}

#[test]
fn activation_examples() {
    let mm = DensityMatrix::maximally_mixed(SubsystemLayout::qubits(&["A", "C"]));
    let mut rng = Rng::new(4);
    for _ in 0..20 {
        let u = rng.haar_unitary(2);
        assert!((rmp_core::state_rmp::overlap_at(&mm, &u).unwrap() - 0.25).abs() < 1e-12);
    }
    let grid = activation_criterion(&mm, ActivationSearch::Grid { samples: 50, seed: 1 }).unwrap();
    assert!((grid - 0.25).abs() < 1e-12);
    let psi = DensityMatrix::pure(SubsystemLayout::qubits(&["A", "C"]), &states::single_excitation_vec()).unwrap();
    assert!((activation_criterion(&psi, ActivationSearch::Identity).unwrap() - 1.0).abs() < 1e-12);
    let w = states::w_marginal("A", "C");
    let it = activation_criterion(
        &w,
        ActivationSearch::Iterative {
            restarts: 4,
            seed: 2,
            max_iters: 100,
        },
    )
    .unwrap();
    assert!(it >= 2.0 / 3.0 - 1e-12);
}

#[test]
fn whole_system_reduces_to_plain_marginal_problem() {
    let whole = set(&["A", "B", "C"]);
    let mut rng = Rng::new(31);
    for k in 0..50 {
        let fam = random_compatible_family(&mut rng, 1 + k % 8).unwrap();
        let inst = RmpInstance::new(fam, whole.clone(), FreeSetSpec::all_states(whole.clone())).unwrap();
        assert!(
            check_rfree_compatible(&inst, 1e-6, &s()).unwrap().is_compatible(),
            "family {k}"
        );
        assert!(marginal_feasibility(&inst, &s()).unwrap().feasible);
    }
    let mono = monogamy_instance().unwrap();
    assert!(!check_rfree_compatible(&mono, 1e-6, &s()).unwrap().is_compatible());
    assert!(!marginal_feasibility(&mono, &s()).unwrap().feasible);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn zero_robustness_iff_free_extension_exists(p in 0.0f64..1.0) {
        prop_assume!((p - w_noise_threshold()).abs() > 1e-3);
        let inst = w_instance().unwrap().with_marginals(white().mix(p, &w_family().unwrap()).unwrap()).unwrap();
        let zero = robustness(&inst, &s()).unwrap().value_log2 <= 1e-6;
        let feasible = marginal_feasibility(&inst, &s()).unwrap().feasible;
        prop_assert_eq!(zero, feasible);
        prop_assert_eq!(zero, p > w_noise_threshold());
    }

    #[test]
    fn strong_duality_on_random_instances(seed in any::<u64>()) {
        let inst = random_duality_instance(&mut Rng::new(seed)).unwrap();
        let p = robustness(&inst, &s()).unwrap();
        let d = robustness_dual(&inst, &s()).unwrap();
        prop_assert!((p.primal_trace - d.primal_value).abs() <= 1e-7 * p.primal_trace.max(1.0));
    }

    #[test]
    fn larger_free_sets_never_raise_robustness(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let inst = random_duality_instance(&mut rng).unwrap().with_free(FreeSetSpec::separable_ppt(set(&["A", "C"]))).unwrap();
        let ppt = robustness(&inst, &s()).unwrap().value_log2;
        let all = robustness(&inst.with_free(FreeSetSpec::all_states(set(&["A", "C"]))).unwrap(), &s()).unwrap().value_log2;
        prop_assert!(all <= ppt + 1e-7, "{} > {}", all, ppt);
    }

    #[test]
    fn product_unitaries_preserve_robustness(seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let inst = w_instance().unwrap();
        let base = robustness(&inst, &s()).unwrap().value_log2;
        let q = |l: &str| SubsystemLayout::qubits(&[l]);
        let [a, b, c] = ["A", "B", "C"].map(|l| ChannelSpec::unitary(q(l), &rng.haar_unitary(2)).unwrap());
        let ops = vec![(set(&["A", "B"]), a.tensor(&b).unwrap()), (set(&["B", "C"]), b.tensor(&c).unwrap())];
        let moved = inst.with_marginals(inst.marginals.apply_free_operation(&ops).unwrap()).unwrap();
        prop_assert!((robustness(&moved, &s()).unwrap().value_log2 - base).abs() <= 1e-6);
    }
}
