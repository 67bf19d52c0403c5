//! Transverse-field Ising experiments, config-driven runs and file outputs.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bounds::{self, SweepSummary};
use crate::error::{Error, Result};
use crate::fmt::sig17;
use crate::operator::{OperatorSum, Pauli, PauliTerm, StateVector};
use crate::prep::{run_monte_carlo, EngineConfig, ProtocolPlan, QpeModel, RetryPolicy, RunReport};
use crate::spectra::{self, DEFAULT_TOL};
use crate::tree::{unit_spans, HamiltonianTree, NodeLabel};

/// Largest chain exponent for the figure curves (16 spins).
pub const MAX_CURVE_P: usize = 4;
const MAX_TFIM_P: usize = 6;

/// Open chain `h Σ Z_i + J Σ X_i X_{i+1}` on `2^p` spins with one leaf per spin.
pub fn build_tfim(p: usize, h: f64, j: f64) -> Result<(OperatorSum, Vec<Range<usize>>)> {
    if p > MAX_TFIM_P {
        return Err(Error::InvalidArgument(format!("p = {p} exceeds the supported maximum {MAX_TFIM_P}")));
    }
    let n = 1usize << p;
    let mut terms: Vec<PauliTerm> = (0..n).map(|i| PauliTerm::new(h, [(i, Pauli::Z)])).collect();
    terms.extend((0..n - 1).map(|i| PauliTerm::new(j, [(i, Pauli::X), (i + 1, Pauli::X)])));
    Ok((OperatorSum::new(n, terms)?, unit_spans(n)))
}

pub fn tfim_tree(p: usize, h: f64, j: f64) -> Result<HamiltonianTree> {
    let (op, spans) = build_tfim(p, h, j)?;
    HamiltonianTree::decompose(op, spans, p)
}

fn check_curve_args(p_max: usize, h: f64, j: f64) -> Result<()> {
    if p_max > MAX_CURVE_P {
        return Err(Error::InvalidArgument(format!("p_max = {p_max} exceeds {MAX_CURVE_P}")));
    }
    if !h.is_finite() || !j.is_finite() {
        return Err(Error::InvalidArgument("h and J must be finite".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NaiveRow {
    pub p: usize,
    pub overlap: f64,
    pub degenerate: bool,
}

/// `|<ψ(2^p spins)| ψ_leaf^{⊗2^p}>|` for `p = 0..=p_max`.
pub fn naive_overlap_curve(p_max: usize, h: f64, j: f64) -> Result<Vec<NaiveRow>> {
    check_curve_args(p_max, h, j)?;
    let (single, _) = build_tfim(0, h, j)?;
    let leaf = spectra::lowest_eigenpairs(&single, 2, DEFAULT_TOL)?;
    let leaf_degenerate = spectra::spectral_gap(&leaf)?.degenerate;
    let leaf_state = leaf.ground_state().clone();
    (0..=p_max)
        .map(|p| {
            let (op, _) = build_tfim(p, h, j)?;
            let spec = spectra::lowest_eigenpairs(&op, 2, DEFAULT_TOL)?;
            let gap = spectra::spectral_gap(&spec)?;
            let product = tensor_power(&leaf_state, 1 << p)?;
            Ok(NaiveRow {
                p,
                overlap: spectra::overlap_abs(spec.ground_state(), &product)?,
                degenerate: gap.degenerate || leaf_degenerate,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerRow {
    pub p: usize,
    /// Minimum child-product overlap over merges producing `2^p`-spin blocks.
    pub min_overlap: f64,
    pub per_node: Vec<(String, f64)>,
    pub degenerate: bool,
}

/// Child-product overlaps at every merge level of the `p_max` tree. Row `p`
/// covers the nodes whose blocks hold `2^p` spins; row 0 has no merges.
pub fn layer_overlap_curve(p_max: usize, h: f64, j: f64) -> Result<Vec<LayerRow>> {
    check_curve_args(p_max, h, j)?;
    let plan = ProtocolPlan::build(tfim_tree(p_max, h, j)?)?;
    layer_rows(&plan)
}

fn layer_rows(plan: &ProtocolPlan) -> Result<Vec<LayerRow>> {
    let p_max = plan.tree().p();
    let mut rows = vec![LayerRow { p: 0, min_overlap: 1.0, per_node: Vec::new(), degenerate: false }];
    for p in 1..=p_max {
        let mut per_node = Vec::new();
        let mut degenerate = false;
        for label in plan.tree().labels_at_depth(p_max - p) {
            per_node.push((label.to_string(), plan.child_overlap(&label)?));
            let [c0, c1] = label.children();
            degenerate |= [&label, &c0, &c1].iter().any(|l| plan.node(l).map(|d| d.degenerate).unwrap_or(false));
        }
        let min_overlap = per_node.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        rows.push(LayerRow { p, min_overlap, per_node, degenerate });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub p: usize,
    pub gamma_root: f64,
    pub interaction_norm_root: f64,
    pub degenerate: bool,
}

/// Gap of the `2^p`-spin chain and the norm of the interaction across its
/// root cut (0 for a single spin).
pub fn gap_interaction_curve(p_max: usize, h: f64, j: f64) -> Result<Vec<GapRow>> {
    check_curve_args(p_max, h, j)?;
    (0..=p_max)
        .map(|p| {
            let tree = tfim_tree(p, h, j)?;
            let spec = spectra::lowest_eigenpairs(tree.full(), 2, DEFAULT_TOL)?;
            let gap = spectra::spectral_gap(&spec)?;
            let interaction_norm_root = if p == 0 {
                0.0
            } else {
                tree.local_interaction(&NodeLabel::root())?.spectral_norm()?
            };
            Ok(GapRow { p, gamma_root: gap.value, interaction_norm_root, degenerate: gap.degenerate })
        })
        .collect()
}

/// Structural and spectral summary of every node.
pub fn tree_info(tree: HamiltonianTree) -> Result<Value> {
    let report = tree.validate();
    let plan = ProtocolPlan::build(tree)?;
    let tree = plan.tree();
    let mut nodes = Vec::new();
    for label in tree.labels() {
        let d = plan.node(label)?;
        let span = tree.node_span(label);
        let mut entry = json!({
            "label": label.to_string(),
            "span": [span.start, span.end],
            "terms": tree.node_term_indices(label)?.len(),
            "ground_energy": d.energy,
            "gap": d.gap,
            "degenerate": d.degenerate,
            "norm": d.norm,
        });
        if !tree.is_leaf(label) {
            entry["interaction_norm"] = json!(tree.local_interaction(label)?.spectral_norm()?);
            entry["child_overlap"] = json!(plan.child_overlap(label)?);
        }
        nodes.push(entry);
    }
    Ok(json!({
        "p": tree.p(),
        "n_qubits": tree.n_qubits(),
        "n_terms": tree.full().terms().len(),
        "valid": report.passed(),
        "checks": report.checks,
        "nodes": nodes,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Tfim {
        p: usize,
        h: f64,
        #[serde(rename = "J")]
        j: f64,
    },
    OperatorFile {
        path: PathBuf,
        /// Half-open qubit ranges, one per leaf.
        spans: Vec<[usize; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RlbMode {
    Measured,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    #[default]
    Prepare,
    FigureOverlaps,
    FigureGaps,
    BoundsSweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineSettings {
    pub delta: f64,
    #[serde(default = "default_model")]
    pub qpe_model: QpeModel,
    #[serde(default = "default_c_qpe")]
    pub c_qpe: f64,
    #[serde(default = "default_rlb_mode")]
    pub r_lb_mode: RlbMode,
    #[serde(default)]
    pub r_lb_value: Option<f64>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: u64,
}

fn default_model() -> QpeModel {
    QpeModel::IdealProjective
}
fn default_c_qpe() -> f64 {
    1.0
}
fn default_rlb_mode() -> RlbMode {
    RlbMode::Measured
}
fn default_runs() -> u64 {
    1000
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            delta: 0.1,
            qpe_model: default_model(),
            c_qpe: default_c_qpe(),
            r_lb_mode: default_rlb_mode(),
            r_lb_value: None,
            master_seed: 0,
            n_runs: default_runs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub report_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    #[serde(default)]
    pub engine: EngineSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match &self.model {
            ModelConfig::Tfim { p, h, j } => {
                if !h.is_finite() || !j.is_finite() {
                    return bad("h and J must be finite".into());
                }
                let limit = if self.experiment == ExperimentKind::Prepare { MAX_TFIM_P } else { MAX_CURVE_P };
                if *p > limit {
                    return bad(format!("p = {p} exceeds {limit}"));
                }
            }
            ModelConfig::OperatorFile { spans, .. } => {
                if self.experiment != ExperimentKind::Prepare {
                    return bad("operator-file models only support the prepare experiment".into());
                }
                if !spans.len().is_power_of_two() {
                    return bad(format!("{} leaf spans is not a power of two", spans.len()));
                }
            }
        }
        let e = &self.engine;
        if !(e.delta > 0.0 && e.delta < 1.0) {
            return bad(format!("delta must be in (0, 1), got {}", e.delta));
        }
        if e.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if !(e.c_qpe > 0.0 && e.c_qpe.is_finite()) {
            return bad(format!("c_qpe must be positive, got {}", e.c_qpe));
        }
        if e.r_lb_mode == RlbMode::Fixed {
            match e.r_lb_value {
                Some(r) if r > 0.0 && r <= 1.0 => {}
                other => return bad(format!("fixed r_lb_value must be in (0, 1], got {other:?}")),
            }
        }
        Ok(())
    }

    /// Builds the tree the config describes; operator files are read here.
    pub fn tree(&self) -> Result<HamiltonianTree> {
        match &self.model {
            ModelConfig::Tfim { p, h, j } => tfim_tree(*p, *h, *j),
            ModelConfig::OperatorFile { path, spans } => {
                let op = OperatorSum::from_json(&fs::read_to_string(path)?)?;
                let spans: Vec<Range<usize>> = spans.iter().map(|s| s[0]..s[1]).collect();
                let p = spans.len().trailing_zeros() as usize;
                HamiltonianTree::decompose(op, spans, p)
            }
        }
    }

    fn model_name(&self) -> &'static str {
        match self.model {
            ModelConfig::Tfim { .. } => "tfim",
            ModelConfig::OperatorFile { .. } => "operator-file",
        }
    }
}

/// CSV text plus a JSON report, and whether every internal check passed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub passed: bool,
    pub csv: String,
    pub report: Value,
}

impl RunOutcome {
    /// Writes the configured outputs. Called once, after all computation.
    pub fn write(&self, output: &OutputSettings) -> Result<()> {
        if let Some(path) = &output.csv_path {
            write_file(path, self.csv.as_bytes())?;
        }
        if let Some(path) = &output.report_path {
            let mut text = serde_json::to_string_pretty(&self.report)?;
            text.push('\n');
            write_file(path, text.as_bytes())?;
        }
        Ok(())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, bytes)?)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(&row).map_err(csv_error)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_error(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv: {e}"))
}

pub const OVERLAP_HEADER: [&str; 3] = ["p", "overlap_naive", "overlap_layer_min"];
pub const GAP_HEADER: [&str; 3] = ["p", "gamma_root", "interaction_norm_root"];
pub const PREPARE_HEADER: [&str; 9] =
    ["model", "p", "delta", "failure_rate", "mean_N_V", "mean_N_U", "bound_N_V", "bound_N_U", "seed"];
pub const SWEEP_HEADER: [&str; 4] = ["suite", "instances", "passed", "worst_margin"];

pub fn overlaps_csv(naive: &[NaiveRow], layer: &[LayerRow]) -> Result<String> {
    csv_text(
        &OVERLAP_HEADER,
        naive.iter().zip(layer).map(|(n, l)| vec![n.p.to_string(), sig17(n.overlap), sig17(l.min_overlap)]),
    )
}

pub fn gaps_csv(rows: &[GapRow]) -> Result<String> {
    csv_text(
        &GAP_HEADER,
        rows.iter().map(|r| vec![r.p.to_string(), sig17(r.gamma_root), sig17(r.interaction_norm_root)]),
    )
}

pub fn prepare_csv(report: &RunReport) -> Result<String> {
    let model = serde_json::to_value(report.model)?.as_str().unwrap_or_default().to_string();
    csv_text(
        &PREPARE_HEADER,
        [vec![
            model,
            report.p.to_string(),
            sig17(report.delta),
            sig17(report.failure_rate),
            sig17(report.mean_n_v),
            sig17(report.mean_n_u),
            sig17(report.bound_n_v),
            sig17(report.bound_n_u),
            report.master_seed.to_string(),
        ]],
    )
}

pub fn sweep_csv(rows: &[SweepSummary]) -> Result<String> {
    csv_text(
        &SWEEP_HEADER,
        rows.iter().map(|s| vec![s.name.clone(), s.instances.to_string(), s.passed.to_string(), sig17(s.worst_margin)]),
    )
}

/// All randomized bound suites with `instances` draws each.
pub fn bounds_sweep(instances: usize, master_seed: u64) -> Result<Vec<SweepSummary>> {
    type Suite = fn(usize, u64) -> Result<SweepSummary>;
    let suites: [Suite; 6] = [
        bounds::davis_kahan_sweep,
        bounds::weyl_sweep,
        bounds::matrix_log_sweep,
        bounds::effective_error_sweep,
        bounds::perturbed_overlap_sweep,
        bounds::sufficiency_sweep,
    ];
    suites
        .par_iter()
        .enumerate()
        .map(|(k, f)| f(instances, master_seed.wrapping_add(k as u64)))
        .collect()
}

fn prepare(config: &ExperimentConfig) -> Result<RunOutcome> {
    let e = &config.engine;
    let plan = ProtocolPlan::build(config.tree()?)?;
    let root = NodeLabel::root();
    let measured = plan.min_child_overlap(&root)?;
    let r_lb = match e.r_lb_mode {
        RlbMode::Measured => measured,
        RlbMode::Fixed => e.r_lb_value.expect("validated"),
    };
    let engine = EngineConfig { model: e.qpe_model, c_qpe: e.c_qpe, retry: RetryPolicy::Capped };
    let report = run_monte_carlo(&plan, &root, e.delta, r_lb, &engine, e.master_seed, e.n_runs)?;
    let csv = prepare_csv(&report)?;
    let passed = report.within_bounds();
    let mut value = serde_json::to_value(&report)?;
    value["model_type"] = json!(config.model_name());
    value["measured_min_overlap"] = json!(measured);
    value["r_lb_mode"] = serde_json::to_value(e.r_lb_mode)?;
    value["passed"] = json!(passed);
    Ok(RunOutcome { passed, csv, report: value })
}

fn figure_overlaps(p_max: usize, h: f64, j: f64) -> Result<RunOutcome> {
    let naive = naive_overlap_curve(p_max, h, j)?;
    let layer = layer_overlap_curve(p_max, h, j)?;
    let passed = !naive.iter().any(|r| r.degenerate) && !layer.iter().any(|r| r.degenerate);
    Ok(RunOutcome {
        passed,
        csv: overlaps_csv(&naive, &layer)?,
        report: json!({ "experiment": "figure-overlaps", "h": h, "J": j, "naive": naive, "layer": layer, "passed": passed }),
    })
}

fn figure_gaps(p_max: usize, h: f64, j: f64) -> Result<RunOutcome> {
    let rows = gap_interaction_curve(p_max, h, j)?;
    let passed = !rows.iter().any(|r| r.degenerate);
    Ok(RunOutcome {
        passed,
        csv: gaps_csv(&rows)?,
        report: json!({ "experiment": "figure-gaps", "h": h, "J": j, "rows": rows, "passed": passed }),
    })
}

fn sweep(config: &ExperimentConfig) -> Result<RunOutcome> {
    let rows = bounds_sweep(config.engine.n_runs as usize, config.engine.master_seed)?;
    let passed = rows.iter().all(SweepSummary::all_passed);
    Ok(RunOutcome {
        passed,
        csv: sweep_csv(&rows)?,
        report: json!({ "experiment": "bounds-sweep", "suites": rows, "passed": passed }),
    })
}

/// Validates the config, runs the experiment and returns its outputs
/// without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    config.validate()?;
    let tfim = match config.model {
        ModelConfig::Tfim { p, h, j } => Some((p, h, j)),
        ModelConfig::OperatorFile { .. } => None,
    };
    match (config.experiment, tfim) {
        (ExperimentKind::Prepare, _) => prepare(config),
        (ExperimentKind::FigureOverlaps, Some((p, h, j))) => figure_overlaps(p, h, j),
        (ExperimentKind::FigureGaps, Some((p, h, j))) => figure_gaps(p, h, j),
        (ExperimentKind::BoundsSweep, _) => sweep(config),
        _ => Err(Error::InvalidArgument("figure experiments need a tfim model".into())),
    }
}

/// [`execute`] followed by a single write of the configured outputs.
pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome = execute(config)?;
    outcome.write(&config.output)?;
    Ok(outcome)
}

/// `state^{⊗count}`.
pub fn tensor_power(state: &StateVector, count: usize) -> Result<StateVector> {
    let mut out = state.clone();
    for _ in 1..count.max(1) {
        out = out.tensor(state)?;
    }
    Ok(out)
}
