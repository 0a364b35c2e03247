//! Command-line driver: validate models, build joints and marginals, apply
//! reductions, surgeries, and intervention sequences.
//!
//! Exit codes: 0 success, 1 validation/semantic failure, 2 usage or parse
//! error, 3 numeric failure (e.g. zero-probability conditioning).

use clap::{Parser, Subcommand};
use qcn::intervene::{
    enumerate_sequence, outcome_by_label, rd_general, sample_sequence, Intervention,
};
use qcn::model::report::{
    report_do, report_joint, report_marginal, report_outcomes, report_trajectory, report_tree,
    report_validation,
};
use qcn::model::{load_qcn, parse_model, LoadedModel, ModelError};
use qcn::network::RespectsPolicy;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qcn", about = "Quantum causal network toolkit", version)]
struct Cli {
    /// Numerical tolerance for validation and linear algebra.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
    /// Number of random basis families used by the respects checks.
    #[arg(long, global = true, default_value_t = 8)]
    fiducial_samples: usize,
    /// Maximum joint dimension.
    #[arg(long, global = true, default_value_t = qcn::DEFAULT_DIM_CAP)]
    dim_cap: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check model structure and that local distributions respect the graph.
    Validate { file: PathBuf },
    /// Build and print the joint density operator.
    Joint { file: PathBuf },
    /// Print the reduced density operator of the given nodes.
    Marginal {
        file: PathBuf,
        /// Comma-separated node ids.
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<String>,
    },
    /// Apply a projective reduction at a node.
    Reduce {
        file: PathBuf,
        #[arg(long)]
        target: String,
        /// Name of a projset declared in the model on the target node.
        #[arg(long)]
        projset: String,
        /// Condition on one outcome label (e.g. `o1`).
        #[arg(long, conflicts_with = "enumerate")]
        outcome: Option<String>,
        /// Report every outcome (the default).
        #[arg(long)]
        enumerate: bool,
    },
    /// Set a node to a declared state by local surgery.
    Do {
        file: PathBuf,
        #[arg(long)]
        target: String,
        /// Name of a state declared in the model on the target node.
        #[arg(long)]
        state: String,
    },
    /// Apply an ordered intervention script.
    Sequence {
        file: PathBuf,
        /// Script file: one `reduce <target> <projset>` or
        /// `do <target> <state>` per line.
        #[arg(long)]
        script: PathBuf,
        /// Sample one trajectory instead of enumerating the tree.
        #[arg(long, requires = "seed")]
        sample: bool,
        /// Seed for trajectory sampling.
        #[arg(long)]
        seed: Option<u64>,
        /// Enumerate the full outcome tree (the default).
        #[arg(long, conflicts_with = "sample")]
        enumerate: bool,
    },
}

/// Process failure with the exit code the error class maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn semantic(message: impl Into<String>) -> Failure {
    Failure { code: 1, message: message.into() }
}

fn numeric(message: impl Into<String>) -> Failure {
    Failure { code: 3, message: message.into() }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Parse(_) => usage(e.to_string()),
            ModelError::Semantic { .. } => semantic(e.to_string()),
        }
    }
}

impl From<qcn::network::NetworkError> for Failure {
    fn from(e: qcn::network::NetworkError) -> Self {
        numeric(e.to_string())
    }
}

impl From<qcn::intervene::IntervError> for Failure {
    fn from(e: qcn::intervene::IntervError) -> Self {
        numeric(e.to_string())
    }
}

fn load(path: &PathBuf, tolerance: f64) -> Result<LoadedModel, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let doc = parse_model(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    load_qcn(&doc, tolerance).map_err(|e| semantic(format!("{}: {e}", path.display())))
}

fn projset_for(
    model: &LoadedModel,
    name: &str,
    target: &str,
) -> Result<qcn::ProjectionSet, Failure> {
    let (node, ps) = model
        .projsets
        .get(name)
        .ok_or_else(|| usage(format!("no projset named `{name}` in the model")))?;
    if node != target {
        return Err(usage(format!(
            "projset `{name}` is declared on `{node}`, not `{target}`"
        )));
    }
    Ok(ps.clone())
}

fn state_for(
    model: &LoadedModel,
    name: &str,
    target: &str,
) -> Result<qcn::DensityOperator, Failure> {
    let (node, dm) = model
        .states
        .get(name)
        .ok_or_else(|| usage(format!("no state named `{name}` in the model")))?;
    if node != target {
        return Err(usage(format!(
            "state `{name}` is declared on `{node}`, not `{target}`"
        )));
    }
    Ok(dm.clone())
}

fn parse_script(model: &LoadedModel, text: &str) -> Result<Vec<Intervention>, Failure> {
    let mut ivs = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let words: Vec<&str> = line.split_whitespace().collect();
        if words.is_empty() {
            continue;
        }
        let bad = |msg: String| usage(format!("script line {}: {msg}", li + 1));
        match words.as_slice() {
            ["reduce", target, projset] => {
                let ps = projset_for(model, projset, target)
                    .map_err(|f| bad(f.message))?;
                ivs.push(Intervention::reduction(*target, ps));
            }
            ["do", target, state] => {
                let dm = state_for(model, state, target).map_err(|f| bad(f.message))?;
                ivs.push(Intervention::surgery(*target, dm));
            }
            _ => {
                return Err(bad(format!(
                    "expected `reduce <target> <projset>` or `do <target> <state>`, got `{}`",
                    line.trim()
                )))
            }
        }
    }
    Ok(ivs)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { file } => {
            let model = load(&file, cli.tolerance)?;
            let policy = RespectsPolicy {
                random_sets: cli.fiducial_samples,
                seed: 7,
                tol: cli.tolerance.max(1e-7),
            };
            let rep = model.network.check_respects(&policy)?;
            print!("{}", report_validation(&model.network, &rep));
            if rep.ok {
                Ok(())
            } else {
                Err(semantic("local distributions do not respect the graph"))
            }
        }
        Command::Joint { file } => {
            let model = load(&file, cli.tolerance)?;
            let js = model.network.build_joint_capped(cli.dim_cap)?;
            print!("{}", report_joint(&js));
            Ok(())
        }
        Command::Marginal { file, nodes } => {
            let model = load(&file, cli.tolerance)?;
            for n in &nodes {
                model
                    .network
                    .graph()
                    .node_index(n)
                    .map_err(|_| usage(format!("unknown node `{n}`")))?;
            }
            let js = model.network.build_joint_capped(cli.dim_cap)?;
            let dm = model.network.marginal(&js, &nodes)?;
            print!("{}", report_marginal(&nodes, &dm));
            Ok(())
        }
        Command::Reduce { file, target, projset, outcome, enumerate: _ } => {
            let model = load(&file, cli.tolerance)?;
            let ps = projset_for(&model, &projset, &target)?;
            let iv = Intervention::reduction(target.clone(), ps);
            let outcomes = rd_general(&model.network, &iv)?;
            match outcome {
                Some(label) => {
                    let o = outcome_by_label(&outcomes, &label)?;
                    print!("{}", report_outcomes(&target, std::slice::from_ref(o))?);
                }
                None => print!("{}", report_outcomes(&target, &outcomes)?),
            }
            Ok(())
        }
        Command::Do { file, target, state } => {
            let model = load(&file, cli.tolerance)?;
            let dm = state_for(&model, &state, &target)?;
            let q2 = qcn::intervene::do_set(&model.network, &target, &dm)?;
            print!("{}", report_do(&target, &q2)?);
            Ok(())
        }
        Command::Sequence { file, script, sample, seed, enumerate: _ } => {
            let model = load(&file, cli.tolerance)?;
            let text = std::fs::read_to_string(&script)
                .map_err(|e| usage(format!("cannot read {}: {e}", script.display())))?;
            let ivs = parse_script(&model, &text)?;
            if sample {
                let seed = seed.expect("clap requires --seed with --sample");
                let t = sample_sequence(&model.network, &ivs, seed)?;
                print!("{}", report_trajectory(&t)?);
            } else {
                let tree = enumerate_sequence(&model.network, &ivs)?;
                print!("{}", report_tree(&tree));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
