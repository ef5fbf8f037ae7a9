use proptest::prelude::*;
use rmp_core::channel::{
    broadcasting_family, broadcasting_instance, channel_advantage, channel_linear_max, channel_marginal_feasibility,
    channel_robustness, channel_success_probability, channel_witness, marginal_channel, plain_channel_instance,
    random_channel, EnsemblePart, EnsembleTask,
};
use rmp_core::rng::Rng;
use rmp_core::*;

fn s() -> Settings {
    Settings::default()
}

fn set(l: &[&str]) -> SubsystemSet {
    SubsystemSet::new(l.iter().copied()).unwrap()
}

fn q(l: &str) -> SubsystemLayout {
    SubsystemLayout::qubits(&[l])
}

fn pair(i: &[&str], o: &[&str]) -> ChannelPair {
    ChannelPair::new(set(i), set(o))
}

fn choi_diff(a: &ChannelSpec, b: &ChannelSpec) -> f64 {
    a.choi()
        .matrix()
        .iter()
        .zip(b.choi().matrix().iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn projectors(l: &SubsystemLayout) -> Vec<HermitianOperator> {
    (0..2)
        .map(|k| {
            let mut d = [0.0; 2];
            d[k] = 1.0;
            HermitianOperator::diagonal(l.clone(), &d).unwrap()
        })
        .collect()
}

/// Two-outcome POVM `{ρ, I − ρ}` and two random input states on a qubit.
fn random_part(rng: &mut Rng, p: ChannelPair, weight: f64) -> EnsemblePart {
    let rho = DensityMatrix::from_matrix(q("A"), rng.density_matrix(2, 2)).unwrap();
    let e = rho.op().clone();
    let rest = HermitianOperator::identity(q("A")).sub(&e).unwrap();
    let states = (0..2)
        .map(|_| DensityMatrix::from_matrix(q("A"), rng.density_matrix(2, 1)).unwrap())
        .collect();
    let a = rng.uniform();
    EnsemblePart {
        pair: p,
        weight,
        priors: vec![a, 1.0 - a],
        states,
        povm: vec![e, rest],
    }
}

#[test]
fn product_channels_have_local_marginals() {
    let mut rng = Rng::new(100);
    for k in 0..100 {
        let ea = random_channel(&mut rng, q("A"), q("A"), 1 + k % 3).unwrap();
        let eb = random_channel(&mut rng, q("B"), q("B"), 1 + (k / 3) % 3).unwrap();
        let global = ea.tensor(&eb).unwrap();
        let ma = marginal_channel(&global, &pair(&["A"], &["A"]))
            .unwrap()
            .expect("A→A exists");
        let mb = marginal_channel(&global, &pair(&["B"], &["B"]))
            .unwrap()
            .expect("B→B exists");
        assert!(choi_diff(&ma, &ea) < 1e-10 && choi_diff(&mb, &eb) < 1e-10, "draw {k}");
        // B's output depends on its own input unless eb is a replacement channel.
        assert!(
            marginal_channel(&global, &pair(&["A"], &["B"])).unwrap().is_none(),
            "draw {k}"
        );
    }
}

#[test]
fn broadcasting_threshold_is_one_third() {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..12 {
        let mid = 0.5 * (lo + hi);
        if channel_marginal_feasibility(&broadcasting_family(mid).unwrap(), &s())
            .unwrap()
            .feasible
        {
            hi = mid
        } else {
            lo = mid
        }
    }
    assert!((hi - 1.0 / 3.0).abs() < 1e-3, "{hi}");
}

#[test]
fn free_output_duality_gap() {
    let target = pair(&["A"], &["A", "B"]);
    let inst = broadcasting_instance().unwrap();
    for free in [
        FreeSetSpec::all_states(set(&["A", "B"])),
        FreeSetSpec::separable_ppt(set(&["A", "B"])),
    ] {
        let spec = FreeChannelSetSpec {
            kind: FreeChannelKind::FreeOutputState(free),
            input: target.input.clone(),
            output: target.output.clone(),
        };
        let i2 = ChannelRmpInstance::new(inst.family.clone(), target.clone(), spec).unwrap();
        let r = channel_robustness(&i2, &s()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.gap.abs() <= 1e-7 * r.primal_trace.max(1.0), "{r:?}");
        // Replacement channels are a subset of all channels.
        assert!(r.value_log2 >= channel_robustness(&inst, &s()).unwrap().value_log2 - 1e-7);
    }
}

#[test]
fn perfect_task_succeeds_with_certainty() {
    let l = q("A");
    let id = ChannelSpec::identity(l.clone());
    let p = pair(&["A"], &["A"]);
    let fam = ChannelMarginalFamily::new(l.clone(), l.clone(), vec![(p.clone(), id)]).unwrap();
    let states = projectors(&l)
        .into_iter()
        .map(|e| DensityMatrix::new(e).unwrap())
        .collect();
    let part = EnsemblePart {
        pair: p,
        weight: 1.0,
        priors: vec![0.5, 0.5],
        states,
        povm: projectors(&l),
    };
    let task = EnsembleTask::new(vec![part], 0.0).unwrap();
    assert!(!task.is_strictly_positive().unwrap());
    assert!((channel_success_probability(&task, &fam).unwrap() - 1.0).abs() < 1e-14);
}

#[test]
fn depolarizing_ignores_the_states() {
    let l = q("A");
    let p = pair(&["A"], &["A"]);
    let fam =
        ChannelMarginalFamily::new(l.clone(), l.clone(), vec![(p.clone(), ChannelSpec::depolarizing(l))]).unwrap();
    let mut rng = Rng::new(7);
    for _ in 0..20 {
        let part = random_part(&mut rng, p.clone(), 1.0);
        let want: f64 = part
            .priors
            .iter()
            .zip(&part.povm)
            .map(|(q, e)| q * e.trace() / 2.0)
            .sum();
        let task = EnsembleTask::new(vec![part], 0.0).unwrap();
        assert!((channel_success_probability(&task, &fam).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn identity_singleton_bounds_success() {
    let l = q("A");
    let id = ChannelSpec::identity(l.clone());
    let p = pair(&["A"], &["A"]);
    let fam = ChannelMarginalFamily::new(l.clone(), l.clone(), vec![(p.clone(), id.clone())]).unwrap();
    let free = FreeChannelSetSpec {
        kind: FreeChannelKind::SingletonChannel(id.choi().clone()),
        input: p.input.clone(),
        output: p.output.clone(),
    };
    let inst = ChannelRmpInstance::new(fam, p.clone(), free).unwrap();
    let mut rng = Rng::new(3);
    for _ in 0..10 {
        let task = EnsembleTask::new(vec![random_part(&mut rng, p.clone(), 1.0)], 0.0).unwrap();
        let a = channel_advantage(&task, &inst, &s()).unwrap();
        assert!(a.p_free_max <= 1.0 + 1e-7 && a.p_family <= 1.0 + 1e-12);
        assert!(a.delta_p.abs() < 1e-6, "{a:?}");
    }
}

#[test]
fn witness_evaluation_matches_choi_inner_products() {
    let inst = broadcasting_instance().unwrap();
    let w = channel_witness(&inst, &s()).unwrap();
    assert!(w.gap() >= 1e-4);
    let obs: Vec<_> = w
        .pairs
        .iter()
        .map(|p| (p.pair.clone(), p.choi_observable.clone()))
        .collect();
    assert!((channel_linear_max(&obs, &inst, &s()).unwrap() - w.free_sup).abs() < 1e-6);
    for noise in [0.0, 0.3, 0.8] {
        let fam = broadcasting_family(noise).unwrap();
        let direct: f64 = w
            .pairs
            .iter()
            .map(|p| {
                let (_, ch) = fam.entries().iter().find(|(q, _)| q == &p.pair).unwrap();
                fam.frame()
                    .embed(&p.pair, ch)
                    .unwrap()
                    .inner(&p.choi_observable)
                    .unwrap()
            })
            .sum();
        assert!((w.evaluate(&fam).unwrap() - direct).abs() < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn zero_robustness_iff_broadcast_exists(p in 0.0f64..1.0) {
        prop_assume!((p - 1.0 / 3.0).abs() > 0.02);
        let fam = broadcasting_family(p).unwrap();
        let zero = channel_robustness(&plain_channel_instance(fam.clone()).unwrap(), &s()).unwrap().value_log2 <= 1e-6;
        prop_assert_eq!(zero, channel_marginal_feasibility(&fam, &s()).unwrap().feasible);
        prop_assert_eq!(zero, p > 1.0 / 3.0);
    }

    #[test]
    fn success_probability_is_affine_in_channels(seed in any::<u64>(), t in 0.0f64..=1.0) {
        let mut rng = Rng::new(seed);
        let a = broadcasting_family(rng.uniform()).unwrap();
        let b = broadcasting_family(rng.uniform()).unwrap();
        let parts = vec![
            random_part(&mut rng, pair(&["A"], &["A"]), 0.5),
            random_part(&mut rng, pair(&["A"], &["B"]), 0.5),
        ];
        let task = EnsembleTask::new(parts, 0.0).unwrap();
        let lhs = channel_success_probability(&task, &a.mix(t, &b).unwrap()).unwrap();
        let rhs = t * channel_success_probability(&task, &a).unwrap() + (1.0 - t) * channel_success_probability(&task, &b).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
