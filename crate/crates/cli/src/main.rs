//! `rmp`: command-line front end for resource marginal problems.
//!
//! Exit codes: 0 on success, 2 for unusable input, 3 when a solve fails.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use rmp_core::channel::{
    channel_advantage, channel_marginal_feasibility, channel_robustness, channel_witness, check_channel_compatible,
    state_discrimination_task,
};
use rmp_core::discrimination::{advantage, draw_unitaries, histogram_experiment, task_from_witness, EpsilonRule};
use rmp_core::hermitian::states;
use rmp_core::io::{error_position, LabelledOperator};
use rmp_core::rng::Rng;
use rmp_core::state_rmp::{
    activation_criterion, check_rfree_compatible, extract_witness, robustness, verify_w_uniqueness, ActivationSearch,
    Compatibility,
};
use rmp_core::{ChannelRmpInstance, Instance, Provenance, RmpError, RmpInstance, Settings};

#[derive(Parser)]
#[command(
    name = "rmp",
    version,
    about = "Resource marginal problems for quantum states and channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Args)]
struct Opts {
    /// Instance file (JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Result file; standard output when omitted.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1000)]
    samples: usize,
    /// Worker threads for the histogram.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Relative duality-gap tolerance of the solver [default: 1e-8]
    #[arg(long, global = true)]
    gap_tol: Option<f64>,
    /// Primal and dual residual tolerance of the solver [default: 1e-8]
    #[arg(long, global = true)]
    feas_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Robustness of a state or channel instance.
    Robustness,
    /// Witness observables certifying incompatibility.
    Witness,
    /// Discrimination task built from the witness and its advantage.
    Discriminate,
    /// Advantage histogram over random unitary encodings of the W-state task.
    Histogram,
    /// Robustness of a channel instance.
    ChannelRobustness,
    /// Decide free compatibility.
    CheckCompat,
    /// Uniqueness of the W state given its two-body marginals.
    VerifyW,
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<RmpError> for Failure {
    fn from(e: RmpError) -> Self {
        let msg = match error_position(&e) {
            Some((line, col)) => format!("line {line}, column {col}: {e}"),
            None => e.to_string(),
        };
        match root(&e) {
            RmpError::Solver { .. } | RmpError::EigenConvergence => Failure::Solver(msg),
            _ => Failure::Input(msg),
        }
    }
}

fn root(e: &RmpError) -> &RmpError {
    match e {
        RmpError::Sample { source, .. } => root(source),
        other => other,
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

impl Opts {
    fn settings(&self) -> Outcome<Settings> {
        let mut s = Settings::default();
        if let Some(g) = self.gap_tol {
            s.gap_tol = g;
        }
        if let Some(f) = self.feas_tol {
            s.feas_tol = f;
        }
        if !(s.gap_tol > 0.0 && s.feas_tol > 0.0) {
            return Err(Failure::Input("tolerances must be positive".into()));
        }
        Ok(s)
    }

    fn instance(&self) -> Outcome<Instance> {
        let path = self
            .input
            .as_ref()
            .ok_or_else(|| Failure::Input("--input is required".into()))?;
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
        Ok(Instance::from_json(&text)?)
    }

    fn write(&self, text: &str) -> Outcome<()> {
        match &self.output {
            Some(p) => {
                std::fs::write(p, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))
            }
            None => {
                let _ = writeln!(std::io::stdout(), "{text}");
                Ok(())
            }
        }
    }
}

fn provenance(s: Settings, inst: Option<&Instance>, seed: Option<u64>) -> Provenance {
    let relaxation = match inst {
        Some(Instance::State(i)) => i.compatible_set().relaxation(),
        _ => None,
    };
    Provenance::new(s, relaxation, seed)
}

fn with_provenance(mut body: Value, p: Provenance) -> Value {
    body["provenance"] = serde_json::to_value(p).expect("plain data");
    body
}

fn labelled<K: ToString>(items: &[(K, rmp_core::HermitianOperator)]) -> Vec<Value> {
    items
        .iter()
        .map(|(k, op)| json!({ "pair_or_set": k.to_string(), "operator": op }))
        .collect()
}

fn state_robustness(i: &RmpInstance, s: &Settings) -> Outcome<Value> {
    let r = robustness(i, s)?;
    let blocks: Vec<LabelledOperator> = r
        .duals
        .iter()
        .map(|(set, op)| LabelledOperator {
            set: set.clone(),
            operator: op.clone(),
        })
        .collect();
    Ok(json!({ "kind": "state", "result": r, "certificates": blocks }))
}

fn channel_robustness_json(i: &ChannelRmpInstance, s: &Settings) -> Outcome<Value> {
    let r = channel_robustness(i, s)?;
    Ok(json!({ "kind": "channel", "result": r, "certificates": labelled(&r.duals) }))
}

fn cmd_robustness(o: &Opts, channel_only: bool) -> Outcome<Value> {
    let s = o.settings()?;
    let inst = o.instance()?;
    let body = match &inst {
        Instance::State(_) if channel_only => {
            return Err(Failure::Input("channel-robustness needs a channel instance".into()))
        }
        Instance::State(i) => state_robustness(i, &s)?,
        Instance::Channel(i) => channel_robustness_json(i, &s)?,
    };
    Ok(with_provenance(body, provenance(s, Some(&inst), None)))
}

fn cmd_witness(o: &Opts) -> Outcome<Value> {
    let s = o.settings()?;
    let inst = o.instance()?;
    let body = match &inst {
        Instance::State(i) => {
            let w = extract_witness(i, &s)?;
            json!({
                "kind": "state",
                "blocks": w.blocks.iter().map(|(set, op)| LabelledOperator { set: set.clone(), operator: op.clone() }).collect::<Vec<_>>(),
                "value_at_marginals": w.value_at_sigma,
                "free_sup": w.free_sup,
                "gap": w.gap(),
                "robustness_log2": w.robustness_log2,
                "notes": w.notes,
            })
        }
        Instance::Channel(i) => {
            let w = channel_witness(i, &s)?;
            let pairs: Vec<Value> = w
                .pairs
                .iter()
                .map(|p| {
                    json!({
                        "input": p.pair.input,
                        "output": p.pair.output,
                        "observables": p.observables,
                        "inputs": p.inputs,
                    })
                })
                .collect();
            json!({
                "kind": "channel",
                "n": w.n,
                "pairs": pairs,
                "value_at_family": w.value_at_family,
                "free_sup": w.free_sup,
                "gap": w.gap(),
                "robustness_log2": w.robustness_log2,
            })
        }
    };
    Ok(with_provenance(body, provenance(s, Some(&inst), None)))
}

fn cmd_discriminate(o: &Opts) -> Outcome<Value> {
    let s = o.settings()?;
    let inst = o.instance()?;
    let body = match &inst {
        Instance::State(i) => {
            let w = extract_witness(i, &s)?;
            let mut rng = Rng::new(o.seed);
            let dims: Vec<usize> = w.blocks.iter().map(|(_, b)| b.dim()).collect();
            let us: Vec<_> = w
                .blocks
                .iter()
                .zip(&dims)
                .flat_map(|((set, _), &d)| draw_unitaries(&mut rng, std::slice::from_ref(set), d))
                .collect();
            let set = i.compatible_set();
            let wt = task_from_witness(
                &w.blocks,
                &us,
                0.01,
                EpsilonRule::HalfBound,
                Some((&i.marginals, &set)),
                &s,
            )?;
            let a = advantage(&wt.task, &i.marginals, &set, &s)?;
            json!({
                "kind": "state",
                "epsilon": wt.epsilon,
                "deltas": wt.deltas,
                "advantage": a,
                "povms": wt.task.parts().iter().map(|p| json!({ "set": p.set, "priors": p.priors, "elements": p.povm })).collect::<Vec<_>>(),
            })
        }
        Instance::Channel(i) => {
            let w = channel_witness(i, &s)?;
            let t = state_discrimination_task(&w, i, EpsilonRule::HalfBound, &s)?;
            let a = channel_advantage(&t, i, &s)?;
            json!({
                "kind": "channel",
                "epsilon": t.epsilon,
                "deltas": t.deltas,
                "advantage": a,
                "ensembles": t.parts().iter().map(|p| json!({
                    "input": p.pair.input, "output": p.pair.output, "weight": p.weight,
                    "priors": p.priors, "states": p.states, "povm": p.povm,
                })).collect::<Vec<_>>(),
            })
        }
    };
    Ok(with_provenance(body, provenance(s, Some(&inst), Some(o.seed))))
}

fn cmd_histogram(o: &Opts) -> Outcome<Value> {
    let s = o.settings()?;
    if o.jobs == 0 {
        return Err(Failure::Input("--jobs must be at least 1".into()));
    }
    let r = histogram_experiment(o.samples, o.seed, o.jobs, &s)?;
    let csv = r.to_csv();
    match &o.output {
        Some(p) => std::fs::write(p, csv).map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))?,
        None => {
            let _ = write!(std::io::stdout(), "{csv}");
        }
    }
    Ok(with_provenance(
        json!({ "summary": r.summary }),
        provenance(s, None, Some(o.seed)),
    ))
}

fn cmd_check_compat(o: &Opts) -> Outcome<Value> {
    let s = o.settings()?;
    let tol = 10.0 * s.feas_tol.max(s.gap_tol);
    let inst = o.instance()?;
    let body = match &inst {
        Instance::State(i) => match check_rfree_compatible(i, tol, &s)? {
            Compatibility::Compatible { state, residual } => {
                json!({ "kind": "state", "compatible": true, "certificate": { "global_state": state, "residual": residual } })
            }
            Compatibility::Incompatible {
                robustness_log2,
                certificate_value,
            } => json!({
                "kind": "state",
                "compatible": false,
                "certificate": { "robustness_log2": finite(robustness_log2), "dual_value": finite(certificate_value) },
            }),
        },
        Instance::Channel(i) => {
            let compatible = check_channel_compatible(i, tol, &s)?;
            let certificate = if compatible {
                let f = channel_marginal_feasibility(&i.family, &s)?;
                json!({ "global_choi": f.global_choi })
            } else {
                let r = channel_robustness(i, &s)?;
                json!({ "robustness_log2": finite(r.value_log2), "dual_value": finite(r.dual_value) })
            };
            json!({ "kind": "channel", "compatible": compatible, "certificate": certificate })
        }
    };
    Ok(with_provenance(body, provenance(s, Some(&inst), None)))
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!("inf")
    }
}

fn cmd_verify_w(o: &Opts) -> Outcome<Value> {
    let s = o.settings()?;
    let f = verify_w_uniqueness(&s)?;
    let rho = states::w_marginal("A", "C");
    let at_identity = activation_criterion(&rho, ActivationSearch::Identity)?;
    let searched = activation_criterion(
        &rho,
        ActivationSearch::Iterative {
            restarts: 8,
            seed: o.seed,
            max_iters: 200,
        },
    )?;
    #[derive(Serialize)]
    struct Out {
        max_fid: f64,
        min_fid: f64,
        unique: bool,
        activation_at_identity: f64,
        activation_searched: f64,
        threshold: f64,
    }
    let body = serde_json::to_value(Out {
        max_fid: f.max_fid,
        min_fid: f.min_fid,
        unique: (f.max_fid - 1.0).abs() <= 1e-6 && (f.min_fid - 1.0).abs() <= 1e-6,
        activation_at_identity: at_identity,
        activation_searched: searched,
        threshold: 0.5,
    })
    .expect("plain data");
    Ok(with_provenance(body, provenance(s, None, Some(o.seed))))
}

fn run(cli: &Cli) -> Outcome<()> {
    let o = &cli.opts;
    let (value, to_stdout_only) = match cli.command {
        Command::Robustness => (cmd_robustness(o, false)?, false),
        Command::ChannelRobustness => (cmd_robustness(o, true)?, false),
        Command::Witness => (cmd_witness(o)?, false),
        Command::Discriminate => (cmd_discriminate(o)?, false),
        Command::Histogram => (cmd_histogram(o)?, true),
        Command::CheckCompat => (cmd_check_compat(o)?, false),
        Command::VerifyW => (cmd_verify_w(o)?, false),
    };
    let text = serde_json::to_string_pretty(&value).expect("plain data");
    if to_stdout_only {
        if o.output.is_some() {
            let _ = writeln!(std::io::stdout(), "{text}");
        } else {
            let _ = writeln!(std::io::stderr(), "{text}");
        }
        Ok(())
    } else {
        o.write(&text)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.opts.samples == 0 {
        eprintln!("error: --samples must be at least 1");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver error: {m}");
            ExitCode::from(3)
        }
    }
}
