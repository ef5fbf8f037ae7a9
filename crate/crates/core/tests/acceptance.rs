//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on failure.

use std::time::Instant;

use rmp_core::channel::{
    broadcasting_family, broadcasting_instance, channel_marginal_feasibility, channel_success_probability,
    channel_witness, check_channel_compatible, plain_channel_instance, random_channel, random_product_family,
    state_discrimination_task, ChannelSpec,
};
use rmp_core::discrimination::{
    draw_unitaries, histogram_experiment, success_probability, task_from_witness, w_task, w_witness, EpsilonRule,
    W_TASK_EPSILON, W_WITNESS_DELTA, W_WITNESS_OMEGA,
};
use rmp_core::free_sets::FreeSetSpec;
use rmp_core::hermitian::{partial_trace, partial_transpose, reorder, states, trace_out};
use rmp_core::instances::{
    abc, degenerate_cone_pair, monogamy_family, monogamy_instance, random_compatible_family, random_duality_instance,
    w_family, w_instance, white_noise_instance,
};
use rmp_core::rng::Rng;
use rmp_core::state_rmp::{
    activation_criterion, check_rfree_compatible, extract_witness, marginal_feasibility, robustness, robustness_dual,
    verify_w_uniqueness, ActivationSearch,
};
use rmp_core::*;

type Check = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn set(l: &[&str]) -> SubsystemSet {
    SubsystemSet::new(l.iter().copied()).unwrap()
}

fn criterion_1(s: &Settings) -> Check {
    let start = Instant::now();
    let inst = w_instance().map_err(e2s)?;
    let mut rng = Rng::new(1);
    let us = draw_unitaries(&mut rng, &inst.marginals.sets(), 4);
    let wt = task_from_witness(
        &w_witness(),
        &us,
        W_WITNESS_DELTA,
        EpsilonRule::Fixed(W_TASK_EPSILON),
        None,
        s,
    )
    .map_err(e2s)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut want = W_WITNESS_OMEGA.to_vec();
    want.sort_by(f64::total_cmp);
    let mut worst_eig: f64 = 0.0;
    for sp in &wt.spectra {
        let mut got = sp.omega.clone();
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            worst_eig = worst_eig.max((g - w).abs());
        }
    }
    let mut worst_sum: f64 = 0.0;
    for part in wt.task.parts() {
        let layout = part.povm[0].layout().clone();
        let mut sum = HermitianOperator::zeros(layout.clone());
        for e in &part.povm {
            sum = sum.add(e).map_err(e2s)?;
        }
        worst_sum = worst_sum.max(sum.max_abs_diff(&HermitianOperator::identity(layout)));
    }
    ensure(worst_eig <= 1e-12, format!("eigenvalue error {worst_eig:.2e}"))?;
    ensure(worst_sum <= 1e-9, format!("completeness error {worst_sum:.2e}"))?;
    ensure(elapsed < 1.0, format!("took {elapsed:.3} s"))?;
    Ok(format!(
        "eigenvalue error {worst_eig:.1e}, completeness error {worst_sum:.1e}, {elapsed:.3} s"
    ))
}

fn criterion_2(s: &Settings) -> Check {
    let start = Instant::now();
    let jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let r = histogram_experiment(1000, 2024, jobs, s).map_err(e2s)?;
    let m = &r.summary;
    ensure((m.mean - 0.0066818).abs() <= 0.0005, format!("mean {:.7}", m.mean))?;
    ensure(
        r.samples.iter().all(|&x| (0.0015..=0.0110).contains(&x)),
        format!("range [{:.5}, {:.5}]", m.min, m.max),
    )?;
    ensure(r.samples.iter().all(|&x| x > 0.0), "non-positive sample")?;
    Ok(format!(
        "mean {:.7}, std {:.7}, range [{:.5}, {:.5}], {:.0} s",
        m.mean,
        m.std,
        m.min,
        m.max,
        start.elapsed().as_secs_f64()
    ))
}

fn criterion_3(s: &Settings) -> Check {
    let f = verify_w_uniqueness(s).map_err(e2s)?;
    ensure((f.max_fid - 1.0).abs() <= 1e-6, format!("max fidelity {}", f.max_fid))?;
    ensure((f.min_fid - 1.0).abs() <= 1e-6, format!("min fidelity {}", f.min_fid))?;
    let a = activation_criterion(&states::w_marginal("A", "C"), ActivationSearch::Identity).map_err(e2s)?;
    ensure((a - 2.0 / 3.0).abs() <= 1e-12, format!("activation value {a}"))?;
    ensure(a > 0.5, "activation not above 1/2")?;
    Ok(format!(
        "fidelity range [{:.9}, {:.9}], activation {a:.15}",
        f.min_fid, f.max_fid
    ))
}

fn criterion_4(s: &Settings) -> Check {
    let mut rng = Rng::new(404);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let inst = random_duality_instance(&mut rng).map_err(e2s)?;
        let p = robustness(&inst, s).map_err(e2s)?;
        let d = robustness_dual(&inst, s).map_err(e2s)?;
        ensure(
            p.status == SolveStatus::Optimal && d.status == SolveStatus::Optimal,
            format!("instance {k}: statuses {:?}/{:?}", p.status, d.status),
        )?;
        let rel = (p.primal_trace - d.primal_value).abs() / p.primal_trace.abs().max(1.0);
        worst = worst.max(rel);
    }
    ensure(worst <= 1e-7, format!("relative disagreement {worst:.2e}"))?;
    let (primal, dual) = degenerate_cone_pair();
    let rp = solver::solve(&primal, s);
    let rd = solver::solve(&dual, s);
    ensure(
        rp.status == SolveStatus::Infeasible,
        format!("degenerate primal {:?}", rp.status),
    )?;
    ensure(
        rd.status == SolveStatus::Unbounded,
        format!("degenerate dual {:?}", rd.status),
    )?;
    Ok(format!(
        "worst relative disagreement {worst:.1e}; degenerate pair Infeasible/Unbounded"
    ))
}

fn criterion_5(s: &Settings) -> Check {
    let w = extract_witness(&w_instance().map_err(e2s)?, s).map_err(e2s)?;
    let m = extract_witness(&monogamy_instance().map_err(e2s)?, s).map_err(e2s)?;
    let b = channel_witness(&broadcasting_instance().map_err(e2s)?, s).map_err(e2s)?;
    for (name, gap) in [("W", w.gap()), ("monogamy", m.gap()), ("broadcasting", b.gap())] {
        ensure(gap >= 1e-4, format!("{name} gap {gap:.2e}"))?;
    }
    let mut rng = Rng::new(55);
    let compat_state = RmpInstance::new(
        random_compatible_family(&mut rng, 8).map_err(e2s)?,
        set(&["A", "B", "C"]),
        FreeSetSpec::all_states(set(&["A", "B", "C"])),
    )
    .map_err(e2s)?;
    for inst in [white_noise_instance().map_err(e2s)?, compat_state] {
        ensure(
            matches!(extract_witness(&inst, s), Err(RmpError::NoWitness(_))),
            "compatible state instance produced a witness",
        )?;
    }
    let compat_channel = plain_channel_instance(random_product_family(&mut rng).map_err(e2s)?).map_err(e2s)?;
    ensure(
        matches!(channel_witness(&compat_channel, s), Err(RmpError::NoWitness(_))),
        "compatible channel instance produced a witness",
    )?;
    Ok(format!(
        "gaps W {:.4}, monogamy {:.4}, broadcasting {:.4}; compatible instances refused",
        w.gap(),
        m.gap(),
        b.gap()
    ))
}

fn local_channels(per_qubit: &[ChannelSpec; 3]) -> std::result::Result<Vec<(SubsystemSet, ChannelSpec)>, String> {
    let [a, b, c] = per_qubit;
    Ok(vec![
        (set(&["A", "B"]), a.tensor(b).map_err(e2s)?),
        (set(&["B", "C"]), b.tensor(c).map_err(e2s)?),
    ])
}

fn criterion_6(s: &Settings) -> Check {
    let inst = w_instance().map_err(e2s)?;
    let base = robustness(&inst, s).map_err(e2s)?.value_log2;
    let mut rng = Rng::new(606);
    let q = |l: &str| SubsystemLayout::qubits(&[l]);
    let mut worst_unitary: f64 = 0.0;
    for _ in 0..20 {
        let chans = ["A", "B", "C"].map(|l| ChannelSpec::unitary(q(l), &rng.haar_unitary(2)).unwrap());
        let fam = inst
            .marginals
            .apply_free_operation(&local_channels(&chans)?)
            .map_err(e2s)?;
        let r = robustness(&inst.with_marginals(fam).map_err(e2s)?, s)
            .map_err(e2s)?
            .value_log2;
        worst_unitary = worst_unitary.max((r - base).abs());
    }
    let mut worst_increase = f64::NEG_INFINITY;
    for _ in 0..20 {
        let chans = ["A", "B", "C"].map(|l| random_channel(&mut rng, q(l), q(l), 2).unwrap());
        let fam = inst
            .marginals
            .apply_free_operation(&local_channels(&chans)?)
            .map_err(e2s)?;
        let r = robustness(&inst.with_marginals(fam).map_err(e2s)?, s)
            .map_err(e2s)?
            .value_log2;
        worst_increase = worst_increase.max(r - base);
    }
    ensure(worst_unitary <= 1e-6, format!("unitary change {worst_unitary:.2e}"))?;
    ensure(worst_increase <= 1e-6, format!("channel increase {worst_increase:.2e}"))?;
    Ok(format!(
        "R = {base:.6}; unitary drift {worst_unitary:.1e}; largest change under channels {worst_increase:.4}"
    ))
}

fn criterion_7(s: &Settings) -> Check {
    let mut rng = Rng::new(707);
    let whole = set(&["A", "B", "C"]);
    let mono = monogamy_family().map_err(e2s)?;
    let (mut yes, mut no) = (0, 0);
    for k in 0..50 {
        let rank = 1 + (rng.next_u64() % 8) as usize;
        let base = random_compatible_family(&mut rng, rank).map_err(e2s)?;
        let p = rng.uniform();
        let fam = mono.mix(p, &base).map_err(e2s)?;
        let inst = RmpInstance::new(fam, whole.clone(), FreeSetSpec::all_states(whole.clone())).map_err(e2s)?;
        let a = check_rfree_compatible(&inst, 1e-6, s).map_err(e2s)?.is_compatible();
        let b = marginal_feasibility(&inst, s).map_err(e2s)?.feasible;
        ensure(
            a == b,
            format!("family {k} (p = {p:.4}): robustness says {a}, feasibility says {b}"),
        )?;
        if a {
            yes += 1
        } else {
            no += 1
        }
    }
    let mut channel_cases = vec![];
    for noise in [0.0, 0.1, 0.2, 0.5, 0.7, 1.0] {
        channel_cases.push(plain_channel_instance(broadcasting_family(noise).map_err(e2s)?).map_err(e2s)?);
    }
    for _ in 0..4 {
        channel_cases.push(plain_channel_instance(random_product_family(&mut rng).map_err(e2s)?).map_err(e2s)?);
    }
    let mut channel_yes = 0;
    for (k, inst) in channel_cases.iter().enumerate() {
        let a = check_channel_compatible(inst, 1e-6, s).map_err(e2s)?;
        let b = channel_marginal_feasibility(&inst.family, s).map_err(e2s)?.feasible;
        ensure(
            a == b,
            format!("channel family {k}: robustness says {a}, feasibility says {b}"),
        )?;
        channel_yes += a as usize;
    }
    let bc = broadcasting_instance().map_err(e2s)?;
    ensure(
        !check_channel_compatible(&bc, 1e-6, s).map_err(e2s)?,
        "qubit broadcasting reported compatible",
    )?;
    Ok(format!(
        "states: {yes} compatible, {no} incompatible, all agree; channels: {channel_yes}/{} compatible, all agree; broadcasting incompatible",
        channel_cases.len()
    ))
}

fn criterion_8(s: &Settings) -> Check {
    let mut rng = Rng::new(808);
    // Affinity of P_D.
    let inst = w_instance().map_err(e2s)?;
    let us = draw_unitaries(&mut rng, &inst.marginals.sets(), 4);
    let task = w_task(&us, s).map_err(e2s)?;
    let mut worst_pd: f64 = 0.0;
    for _ in 0..10 {
        let a = random_compatible_family(&mut rng, 3).map_err(e2s)?;
        let b = w_family().map_err(e2s)?;
        let p = rng.uniform();
        let lhs = success_probability(&task, &a.mix(p, &b).map_err(e2s)?).map_err(e2s)?;
        let rhs = p * success_probability(&task, &a).map_err(e2s)?
            + (1.0 - p) * success_probability(&task, &b).map_err(e2s)?;
        worst_pd = worst_pd.max((lhs - rhs).abs());
    }
    ensure(worst_pd <= 1e-12, format!("P_D affinity defect {worst_pd:.2e}"))?;

    // Affinity of P_DS.
    let bi = broadcasting_instance().map_err(e2s)?;
    let w = channel_witness(&bi, s).map_err(e2s)?;
    let ctask = state_discrimination_task(&w, &bi, EpsilonRule::HalfBound, s).map_err(e2s)?;
    let mut worst_pds: f64 = 0.0;
    for _ in 0..10 {
        let (p, q) = (rng.uniform(), rng.uniform());
        let a = broadcasting_family(q).map_err(e2s)?;
        let b = broadcasting_family(0.0).map_err(e2s)?;
        let lhs = channel_success_probability(&ctask, &a.mix(p, &b).map_err(e2s)?).map_err(e2s)?;
        let rhs = p * channel_success_probability(&ctask, &a).map_err(e2s)?
            + (1.0 - p) * channel_success_probability(&ctask, &b).map_err(e2s)?;
        worst_pds = worst_pds.max((lhs - rhs).abs());
    }
    ensure(worst_pds <= 1e-12, format!("P_DS affinity defect {worst_pds:.2e}"))?;

    // Nested free sets give ordered robustness: all ⊇ PPT ⊇ incoherent.
    let ac = set(&["A", "C"]);
    for k in 0..5 {
        let fam = rmp_core::instances::random_independent_family(&mut rng).map_err(e2s)?;
        let base = RmpInstance::new(fam, ac.clone(), FreeSetSpec::all_states(ac.clone())).map_err(e2s)?;
        let r_all = robustness(&base, s).map_err(e2s)?.value_log2;
        let r_ppt = robustness(&base.with_free(FreeSetSpec::separable_ppt(ac.clone())).map_err(e2s)?, s)
            .map_err(e2s)?
            .value_log2;
        let r_inc = robustness(&base.with_free(FreeSetSpec::incoherent(ac.clone())).map_err(e2s)?, s)
            .map_err(e2s)?
            .value_log2;
        ensure(
            r_all <= r_ppt + 1e-7 && r_ppt <= r_inc + 1e-7,
            format!("instance {k}: {r_all} / {r_ppt} / {r_inc}"),
        )?;
    }

    // Hermitian-core identities.
    let l = abc();
    let mut worst_h: f64 = 0.0;
    for _ in 0..10 {
        let rho = DensityMatrix::from_matrix(l.clone(), rng.density_matrix(8, 8)).map_err(e2s)?;
        let x = rho.op();
        let pt = partial_transpose(&partial_transpose(x, &set(&["B"])).map_err(e2s)?, &set(&["B"])).map_err(e2s)?;
        worst_h = worst_h.max(pt.max_abs_diff(x));
        let ab = partial_trace(x, &set(&["A", "B"])).map_err(e2s)?;
        worst_h = worst_h.max((ab.trace() - x.trace()).abs());
        let a1 = trace_out(&ab, &["B"]).map_err(e2s)?;
        let a2 = partial_trace(x, &set(&["A"])).map_err(e2s)?;
        worst_h = worst_h.max(a1.max_abs_diff(&a2));
        let perm = SubsystemLayout::qubits(&["C", "A", "B"]);
        let back = reorder(&reorder(x, &perm).map_err(e2s)?, &l).map_err(e2s)?;
        worst_h = worst_h.max(back.max_abs_diff(x));
    }
    ensure(worst_h <= 1e-12, format!("hermitian identity defect {worst_h:.2e}"))?;

    // Seeded runs are byte-identical, whatever the worker count.
    let a = histogram_experiment(12, 99, 1, s).map_err(e2s)?.to_csv();
    let b = histogram_experiment(12, 99, 3, s).map_err(e2s)?.to_csv();
    ensure(a == b, "histogram CSV differs between runs")?;

    Ok(format!(
        "P_D defect {worst_pd:.1e}, P_DS defect {worst_pds:.1e}, nested free sets ordered, identities {worst_h:.1e}, CSV identical"
    ))
}

fn main() {
    let s = Settings::default();
    let criteria: [(&str, fn(&Settings) -> Check); 8] = [
        ("reference witness spectrum and completeness", criterion_1),
        ("histogram of the discrimination advantage", criterion_2),
        ("W-state uniqueness and activation", criterion_3),
        ("strong duality and the degenerate cone", criterion_4),
        ("witness soundness", criterion_5),
        ("monotonicity under free operations", criterion_6),
        ("reductions to plain marginal problems", criterion_7),
        ("property suite", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        match run(&s) {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id} {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
