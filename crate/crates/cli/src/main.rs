use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use dnc_core::entanglement::entropy_report;
use dnc_core::experiments::{
    self, EngineSettings, ExperimentConfig, ExperimentKind, ModelConfig, OutputSettings, RlbMode,
};
use dnc_core::fermion::{build_molecular, jw_self_check, support_interval, BodyTensors};
use dnc_core::prep::QpeModel;
use dnc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "dnc", version, about = "Divide-and-conquer ground-state preparation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a Hamiltonian into a tree and summarize every node.
    TreeInfo(ModelArgs),
    /// Monte Carlo runs of the merge protocol.
    Prepare(PrepareArgs),
    /// Randomized checks of every perturbation bound.
    BoundsSweep(SweepArgs),
    /// Naive and per-layer ground-state overlaps of the Ising chain.
    FigureOverlaps(FigureArgs),
    /// Spectral gap and root interaction norm of the Ising chain.
    FigureGaps(FigureArgs),
    /// Largest overlap compatible with a given entanglement entropy.
    Entropy(EntropyArgs),
    /// Verify the Jordan-Wigner mapping, optionally on a tensor file.
    JwCheck(JwArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Config file; replaces all other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ising chain of 2^p spins.
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    h: f64,
    #[arg(long = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    /// Operator file to use instead of the Ising chain.
    #[arg(long, requires = "spans")]
    operator: Option<PathBuf>,
    /// Leaf spans as `lo:hi` pairs, e.g. `0:1,1:2`.
    #[arg(long, value_delimiter = ',')]
    spans: Vec<String>,
}

impl ModelArgs {
    fn model(&self) -> Result<ModelConfig> {
        match &self.operator {
            None => Ok(ModelConfig::Tfim { p: self.p, h: self.h, j: self.j }),
            Some(path) => {
                let spans = self
                    .spans
                    .iter()
                    .map(|s| {
                        let (lo, hi) = s
                            .split_once(':')
                            .ok_or_else(|| Error::Parse(format!("span {s:?} is not lo:hi")))?;
                        let num = |x: &str| x.trim().parse::<usize>().map_err(|e| Error::Parse(format!("span {s:?}: {e}")));
                        Ok([num(lo)?, num(hi)?])
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ModelConfig::OperatorFile { path: path.clone(), spans })
            }
        }
    }
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Structured JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl OutputArgs {
    fn settings(&self) -> OutputSettings {
        OutputSettings { csv_path: self.csv.clone(), report_path: self.report.clone() }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QpeArg {
    Ideal,
    Cleve,
}

#[derive(Clone, Copy, ValueEnum)]
enum RlbArg {
    Measured,
    Fixed,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = QpeArg::Ideal)]
    qpe_model: QpeArg,
    #[arg(long, default_value_t = 1.0)]
    c_qpe: f64,
    #[arg(long, value_enum, default_value_t = RlbArg::Measured)]
    r_lb_mode: RlbArg,
    #[arg(long)]
    r_lb_value: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    runs: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instances per suite.
    #[arg(long, default_value_t = 200)]
    instances: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct FigureArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    p_max: usize,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    h: f64,
    #[arg(long = "J", default_value_t = 1.0, allow_negative_numbers = true)]
    j: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EntropyArgs {
    /// Entanglement entropy in nats.
    #[arg(long)]
    entropy: f64,
    #[arg(long)]
    dim_a: u64,
}

#[derive(Args)]
struct JwArgs {
    #[arg(long, default_value_t = 6)]
    n_modes: usize,
    /// Tensor file to assemble and check.
    #[arg(long)]
    tensors: Option<PathBuf>,
}

fn load_config(path: &PathBuf, kind: ExperimentKind) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(&fs::read_to_string(path)?)?;
    cfg.experiment = kind;
    cfg.validate()?;
    Ok(cfg)
}

fn run_experiment(cfg: ExperimentConfig) -> Result<bool> {
    let outcome = experiments::run(&cfg)?;
    if cfg.output.csv_path.is_none() {
        emit(&outcome.csv)?;
    }
    if cfg.output.report_path.is_none() {
        eprintln!("{}", serde_json::to_string_pretty(&outcome.report)?);
    }
    Ok(outcome.passed)
}

fn print_json(v: &Value) -> Result<()> {
    emit(&format!("{}\n", serde_json::to_string_pretty(v)?))
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::TreeInfo(m) => {
            let cfg = match &m.config {
                Some(path) => load_config(path, ExperimentKind::Prepare)?,
                None => ExperimentConfig {
                    experiment: ExperimentKind::Prepare,
                    model: m.model()?,
                    engine: EngineSettings::default(),
                    output: OutputSettings::default(),
                },
            };
            let info = experiments::tree_info(cfg.tree()?)?;
            print_json(&info)?;
            Ok(info["valid"].as_bool().unwrap_or(false))
        }
        Command::Prepare(a) => {
            let cfg = match &a.model.config {
                Some(path) => load_config(path, ExperimentKind::Prepare)?,
                None => ExperimentConfig {
                    experiment: ExperimentKind::Prepare,
                    model: a.model.model()?,
                    engine: EngineSettings {
                        delta: a.delta,
                        qpe_model: match a.qpe_model {
                            QpeArg::Ideal => QpeModel::IdealProjective,
                            QpeArg::Cleve => QpeModel::PessimisticCleve,
                        },
                        c_qpe: a.c_qpe,
                        r_lb_mode: match a.r_lb_mode {
                            RlbArg::Measured => RlbMode::Measured,
                            RlbArg::Fixed => RlbMode::Fixed,
                        },
                        r_lb_value: a.r_lb_value,
                        master_seed: a.seed,
                        n_runs: a.runs,
                    },
                    output: a.output.settings(),
                },
            };
            run_experiment(cfg)
        }
        Command::BoundsSweep(a) => {
            let cfg = match &a.config {
                Some(path) => load_config(path, ExperimentKind::BoundsSweep)?,
                None => ExperimentConfig {
                    experiment: ExperimentKind::BoundsSweep,
                    model: ModelConfig::Tfim { p: 0, h: 1.0, j: 1.0 },
                    engine: EngineSettings { n_runs: a.instances, master_seed: a.seed, ..EngineSettings::default() },
                    output: a.output.settings(),
                },
            };
            run_experiment(cfg)
        }
        Command::FigureOverlaps(a) => run_experiment(figure_config(a, ExperimentKind::FigureOverlaps)?),
        Command::FigureGaps(a) => run_experiment(figure_config(a, ExperimentKind::FigureGaps)?),
        Command::Entropy(a) => {
            print_json(&serde_json::to_value(entropy_report(a.entropy, a.dim_a)?)?)?;
            Ok(true)
        }
        Command::JwCheck(a) => {
            let report = jw_self_check(a.n_modes)?;
            let mut out = serde_json::to_value(&report)?;
            let mut passed = report.passed;
            if let Some(path) = &a.tensors {
                let tensors = BodyTensors::from_json(&fs::read_to_string(path)?)?;
                let h = build_molecular(&tensors)?;
                let support = support_interval(&h).ok();
                out["molecular"] = json!({
                    "n_modes": tensors.n_modes,
                    "n_terms": h.terms().len(),
                    "hermitian": h.is_hermitian(),
                    "support": support,
                });
                passed &= h.is_hermitian();
            }
            print_json(&out)?;
            Ok(passed)
        }
    }
}

fn figure_config(a: FigureArgs, kind: ExperimentKind) -> Result<ExperimentConfig> {
    match &a.config {
        Some(path) => load_config(path, kind),
        None => Ok(ExperimentConfig {
            experiment: kind,
            model: ModelConfig::Tfim { p: a.p_max, h: a.h, j: a.j },
            engine: EngineSettings::default(),
            output: a.output.settings(),
        }),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let record = json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{record}");
            ExitCode::from(2)
        }
    }
}
