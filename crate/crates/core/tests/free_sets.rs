use proptest::prelude::*;
use rmp_core::free_sets::{apply_op, FreeConstraint};
use rmp_core::hermitian::{states, tensor};
use rmp_core::rng::Rng;
use rmp_core::*;

fn set(l: &[&str]) -> SubsystemSet {
    SubsystemSet::new(l.iter().copied()).unwrap()
}

fn ab() -> SubsystemLayout {
    SubsystemLayout::qubits(&["A", "B"])
}

/// Mixture of `terms` random pure product states.
fn random_separable(rng: &mut Rng, terms: usize) -> DensityMatrix {
    let mut acc = HermitianOperator::zeros(ab());
    let weights: Vec<f64> = (0..terms).map(|_| rng.uniform() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    for w in weights {
        let a = DensityMatrix::pure(SubsystemLayout::qubits(&["A"]), &rng.unit_vector(2)).unwrap();
        let b = DensityMatrix::pure(SubsystemLayout::qubits(&["B"]), &rng.unit_vector(2)).unwrap();
        acc = acc.add(&tensor(a.op(), b.op()).unwrap().scale(w / total)).unwrap();
    }
    DensityMatrix::new(acc).unwrap()
}

fn random_diagonal(rng: &mut Rng) -> DensityMatrix {
    let p: Vec<f64> = (0..4).map(|_| rng.uniform()).collect();
    let t: f64 = p.iter().sum();
    DensityMatrix::new(HermitianOperator::diagonal(ab(), &p.iter().map(|x| x / t).collect::<Vec<_>>()).unwrap())
        .unwrap()
}

fn satisfies(spec: &FreeSetSpec, x: &HermitianOperator, tol: f64) -> bool {
    spec.constraints(x.layout()).unwrap().into_iter().all(|con| match con {
        FreeConstraint::Psd(map) => apply_op(&map, x).unwrap().min_eigenvalue().unwrap() >= -tol,
        FreeConstraint::Zero(map) => apply_op(&map, x).unwrap().matrix().iter().all(|z| z.norm() <= tol),
    })
}

#[test]
fn membership_examples() {
    let sep = FreeSetSpec::separable_ppt(set(&["A", "B"]));
    assert!(!sep.check_membership(&states::phi_plus("A", "B"), 1e-9).unwrap());
    assert!(sep
        .check_membership(&DensityMatrix::maximally_mixed(ab()), 1e-9)
        .unwrap());
    let sep_ac = FreeSetSpec::separable_ppt(set(&["A", "C"]));
    assert!(!sep_ac.check_membership(&states::w_marginal("A", "C"), 1e-9).unwrap());
}

#[test]
fn ppt_agrees_with_separability_on_two_qubits() {
    let sep = FreeSetSpec::separable_ppt(set(&["A", "B"]));
    let mut rng = Rng::new(17);
    for k in 0..200 {
        let terms = 1 + k % 6;
        assert!(sep.check_membership(&random_separable(&mut rng, terms), 1e-9).unwrap());
    }
    let mut rejected = 0;
    while rejected < 1000 {
        let v = rng.unit_vector(4);
        // Concurrence of a pure two-qubit state: 2|v00 v11 − v01 v10|.
        let concurrence = 2.0 * (v[0] * v[3] - v[1] * v[2]).norm();
        if concurrence < 1e-6 {
            continue;
        }
        assert!(!sep
            .check_membership(&DensityMatrix::pure(ab(), &v).unwrap(), 1e-9)
            .unwrap());
        rejected += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn membership_is_convex(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let mut rng = Rng::new(seed);
        let cases = [
            (FreeSetSpec::all_states(set(&["A", "B"])), DensityMatrix::from_matrix(ab(), rng.density_matrix(4, 4)).unwrap(), DensityMatrix::from_matrix(ab(), rng.density_matrix(4, 2)).unwrap()),
            (FreeSetSpec::separable_ppt(set(&["A", "B"])), random_separable(&mut rng, 3), random_separable(&mut rng, 2)),
            (FreeSetSpec::incoherent(set(&["A", "B"])), random_diagonal(&mut rng), random_diagonal(&mut rng)),
        ];
        for (spec, a, b) in cases {
            prop_assert!(spec.check_membership(&a, 1e-9).unwrap() && spec.check_membership(&b, 1e-9).unwrap());
            prop_assert!(spec.check_membership(&a.mix(p, &b).unwrap(), 1e-9).unwrap());
        }
    }

    #[test]
    fn emitted_cone_is_scale_invariant(seed in any::<u64>(), alpha in 0.0f64..50.0) {
        let mut rng = Rng::new(seed);
        let singleton_state = DensityMatrix::from_matrix(ab(), rng.density_matrix(4, 4)).unwrap();
        let cases = [
            (FreeSetSpec::separable_ppt(set(&["A", "B"])), random_separable(&mut rng, 4)),
            (FreeSetSpec::incoherent(set(&["A", "B"])), random_diagonal(&mut rng)),
            (FreeSetSpec::singleton(singleton_state.clone()).unwrap(), singleton_state),
        ];
        for (spec, x) in cases {
            prop_assert!(satisfies(&spec, x.op(), 1e-9));
            prop_assert!(satisfies(&spec, &x.op().scale(alpha), 1e-9 * (1.0 + alpha)));
        }
    }
}
