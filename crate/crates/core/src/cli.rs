//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or configuration,
//! 3 numerical failure. Results go to stdout or files; diagnostics to stderr.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fota::{self, TransportProblem};
use crate::metrics::{self, EvalConfig, HypFrame, MetricReport, TABLE_COLUMNS};
use crate::model::FrameBundle;
use crate::scenario::{self, GtFrame, Scenario, ScenarioConfig};
use crate::setloss::{self, GroundTruthTrack, LossWeights, Matching, QueryPrediction};
use crate::tracker::{self, Association, DistanceMetric, FrameResult, TrackerConfig};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "fota", version, about = "Multi-camera 3D multi-object tracking with fractional optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic multi-camera scenario.
    Generate(GenerateArgs),
    /// Run the tracker over a frames file.
    Track(TrackArgs),
    /// Score tracker results against ground truth.
    Eval(EvalArgs),
    /// Solve one transport problem given as JSON.
    Solve(SolveArgs),
    /// Compare one-to-one and one-to-many association across distance metrics.
    Compare(CompareArgs),
    /// Evaluate the set-prediction loss on a JSON document.
    Loss(LossArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Mahalanobis,
    Giou2d,
    Giou3d,
}

impl From<MetricArg> for DistanceMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Mahalanobis => DistanceMetric::Mahalanobis,
            MetricArg::Giou2d => DistanceMetric::Giou2d,
            MetricArg::Giou3d => DistanceMetric::Giou3d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AssociationArg {
    Fota,
    Km,
}

impl From<AssociationArg> for Association {
    fn from(a: AssociationArg) -> Self {
        match a {
            AssociationArg::Fota => Association::Fota,
            AssociationArg::Km => Association::KuhnMunkres,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Scenario configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output prefix; writes PREFIX.frames.jsonl, PREFIX.gt.jsonl, PREFIX.manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub frames: Option<usize>,
    #[arg(long)]
    pub cameras: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    /// Frames file written by `generate`.
    pub frames: PathBuf,
    /// Results file (JSON Lines); a manifest is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Tracker configuration (JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub association: Option<AssociationArg>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long, default_value_t = metrics::DEFAULT_MATCH_DIST)]
    pub match_dist: f64,
    #[arg(long, default_value_t = metrics::DEFAULT_N_POINTS)]
    pub n_points: usize,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Problem document: {"cost", "p", "q", "s", "epsilon", "gamma", "max_iters", "tol"}.
    pub problem: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = fota::DEFAULT_MIN_MASS)]
    pub min_mass: f64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Frames file; with --gt, compares on this scenario only.
    #[arg(long, requires = "gt")]
    pub frames: Option<PathBuf>,
    #[arg(long, requires = "frames")]
    pub gt: Option<PathBuf>,
    /// Number of generated scenarios (seeds 0..k) when no files are given.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Scenario configuration for generated scenarios.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = metrics::DEFAULT_MATCH_DIST)]
    pub match_dist: f64,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    /// Document: {"gts": [...], "preds": [...], "weights"?: {...}, "matching"?: [...]}.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings_ms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsHeader {
    pub schema_version: u32,
    pub scenario_id: String,
    pub tracker_config: TrackerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveInput {
    pub cost: Vec<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub q: Option<Vec<f64>>,
    pub s: Option<f64>,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub plan: Vec<Vec<f64>>,
    /// Track row per detection, null when unmatched.
    pub assignment: Vec<Option<usize>>,
    pub marginal_error: f64,
    pub converged: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossInput {
    pub gts: Vec<GroundTruthTrack>,
    pub preds: Vec<QueryPrediction>,
    #[serde(default)]
    pub weights: LossWeights,
    pub matching: Option<Matching>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossOutput {
    pub matching: Matching,
    pub per_query: Vec<f64>,
    pub loss: f64,
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub metric: DistanceMetric,
    pub association: Association,
    /// One report per scenario.
    pub reports: Vec<MetricReport>,
    pub fps: Vec<f64>,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io { .. } => 1,
        Error::Numerical(_) | Error::FilterDivergence(_) => 3,
        _ => 2,
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Generate(a) => cmd_generate(a),
        Command::Track(a) => cmd_track(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Loss(a) => cmd_loss(a),
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(io_err(path))
}

fn digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(FileDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(manifest)? + "\n"))
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let mut config: ScenarioConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(f) = a.frames {
        config.num_frames = f;
    }
    if let Some(k) = a.cameras {
        config.num_cameras = k;
        config.rig.yaw_offsets_deg = None;
    }
    let start = Instant::now();
    let scenario = scenario::generate(&config)?;
    let gen_ms = ms(start);
    let start = Instant::now();
    scenario.save(&a.out)?;
    let save_ms = ms(start);

    let frames = scenario::frames_path(&a.out);
    let gt = scenario::gt_path(&a.out);
    let mut inputs = Vec::new();
    if let Some(p) = &a.config {
        inputs.push(digest(p)?);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "generate".into(),
        config: serde_json::to_value(&config)?,
        inputs,
        outputs: vec![digest(&frames)?, digest(&gt)?],
        timings_ms: BTreeMap::from([("generate".into(), gen_ms), ("save".into(), save_ms)]),
    };
    let mpath = manifest_path(&a.out);
    write_manifest(&mpath, &manifest)?;
    let detections: usize = scenario.frames.iter().map(|f| f.detections.len()).sum();
    let gt_boxes: usize = scenario.gt.iter().map(|f| f.objects.len()).sum();
    match a.format {
        Format::Json => emit(&(serde_json::to_string_pretty(&serde_json::json!({
            "scenario_id": scenario.scenario_id,
            "frames": frames.display().to_string(),
            "gt": gt.display().to_string(),
            "manifest": mpath.display().to_string(),
            "num_frames": scenario.frames.len(),
            "num_detections": detections,
            "num_gt_boxes": gt_boxes,
            "overlap_fraction": scenario.overlap_fraction(),
        }))? + "\n")),
        Format::Table => emit(&format!(
            "scenario {}\n  frames      {}\n  gt          {}\n  manifest    {}\n  detections  {detections}\n  gt boxes    {gt_boxes}\n  multi-view  {:.1}%\n",
            scenario.scenario_id,
            frames.display(),
            gt.display(),
            mpath.display(),
            100.0 * scenario.overlap_fraction()
        )),
    }
}

fn tracker_config(config: &Option<PathBuf>, association: Option<AssociationArg>, metric: Option<MetricArg>) -> Result<TrackerConfig> {
    let mut cfg: TrackerConfig = match config {
        Some(p) => read_json(p)?,
        None => TrackerConfig::default(),
    };
    if let Some(a) = association {
        cfg.association = a.into();
    }
    if let Some(m) = metric {
        cfg.distance_metric = m.into();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a results file: header plus one frame result per line.
pub fn load_results(path: &Path) -> Result<(ResultsHeader, Vec<FrameResult>)> {
    scenario::read_jsonl(path)
}

fn load_hyp(path: &Path) -> Result<(ResultsHeader, Vec<HypFrame>)> {
    scenario::read_jsonl(path)
}

fn cmd_track(a: &TrackArgs) -> Result<()> {
    let cfg = tracker_config(&a.config, a.association, a.metric)?;
    let start = Instant::now();
    let (header, frames) = scenario::load_frames(&a.frames)?;
    let load_ms = ms(start);
    let start = Instant::now();
    let results = tracker::run(&frames, &cfg)?;
    let track_ms = ms(start);
    let out_header = ResultsHeader {
        schema_version: RESULTS_SCHEMA_VERSION,
        scenario_id: header.scenario_id,
        tracker_config: cfg.clone(),
    };
    scenario::write_jsonl(&a.out, &out_header, &results)?;
    let mut inputs = vec![digest(&a.frames)?];
    if let Some(p) = &a.config {
        inputs.push(digest(p)?);
    }
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: "track".into(),
        config: serde_json::to_value(&cfg)?,
        inputs,
        outputs: vec![digest(&a.out)?],
        timings_ms: BTreeMap::from([("load".into(), load_ms), ("track".into(), track_ms)]),
    };
    write_manifest(&manifest_path(&a.out), &manifest)?;
    let tracks: std::collections::BTreeSet<u64> = results.iter().flat_map(|r| r.outputs.iter().map(|o| o.track_id)).collect();
    eprintln!(
        "tracked {} frames ({} {}) -> {} reported tracks, {:.1} fps",
        results.len(),
        cfg.association.name(),
        cfg.distance_metric.name(),
        tracks.len(),
        results.len() as f64 / (track_ms / 1e3).max(1e-9)
    );
    Ok(())
}

fn report_rows(label: &str, r: &MetricReport) -> Vec<Vec<String>> {
    let mut row = vec![label.to_string()];
    row.extend(r.table_cells(None));
    vec![row]
}

/// Table used by `eval --format table`: overall and per-class rows.
pub fn eval_table(report: &MetricReport) -> String {
    let mut header = vec![""];
    header.extend(TABLE_COLUMNS);
    let mut rows = report_rows("all", report);
    for c in &report.per_class {
        let cr = MetricReport {
            amota: c.amota,
            amotp: c.amotp,
            motar: c.clear.motar,
            mota: c.clear.mota,
            motp: c.clear.motp,
            recall: c.clear.recall,
            mt: c.clear.mt,
            ml: c.clear.ml,
            ids: c.clear.ids,
            frag: c.clear.frag,
            fp: c.clear.fp,
            fn_: c.clear.fn_,
            num_gt: c.clear.num_gt,
            num_matches: c.clear.num_matches,
            motion: Default::default(),
            per_class: vec![],
        };
        rows.extend(report_rows(&format!("class {}", c.class_id), &cr));
    }
    let mut text = metrics::render_table(&header, &rows);
    text.push_str(&format!(
        "recall {:.3}  fp {}  fn {}  gt {}  ATE {:.3}  ASE {:.3}  AOE {:.3}  AVE {:.3}\n",
        report.recall, report.fp, report.fn_, report.num_gt, report.motion.ate, report.motion.ase, report.motion.aoe, report.motion.ave
    ));
    text
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (gt_header, gt) = scenario::load_gt(&a.gt)?;
    let (res_header, hyp) = load_hyp(&a.results)?;
    if gt_header.scenario_id != res_header.scenario_id {
        return Err(Error::Invalid(format!(
            "results are for scenario {} but ground truth is {}",
            res_header.scenario_id, gt_header.scenario_id
        )));
    }
    let report = metrics::evaluate(
        &gt,
        &hyp,
        &EvalConfig {
            match_dist: a.match_dist,
            n_points: a.n_points,
        },
    )?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    if let Some(p) = &a.report {
        write_text(p, &json)?;
    }
    match a.format {
        Format::Json => emit(&json),
        Format::Table => emit(&eval_table(&report)),
    }
}

/// Builds the transport problem described by a solve document.
pub fn solve_problem(input: &SolveInput) -> Result<TransportProblem> {
    let n = input.cost.len();
    let m = input.cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 || input.cost.iter().any(|r| r.len() != m) {
        return Err(Error::Invalid("cost must be a non-empty rectangular matrix".into()));
    }
    let cost = nalgebra::DMatrix::from_fn(n, m, |i, j| input.cost[i][j]);
    let mut problem = TransportProblem::new(
        cost,
        input.p.clone().unwrap_or_else(|| vec![1.0; n]),
        input.q.clone().unwrap_or_else(|| vec![1.0; m]),
    );
    if let Some(s) = input.s {
        problem.s = s;
    }
    if let Some(e) = input.epsilon {
        problem.epsilon = e;
    }
    if let Some(g) = input.gamma {
        problem.gamma = g;
    }
    if let Some(t) = input.max_iters {
        problem.max_iters = t;
    }
    if let Some(t) = input.tol {
        problem.tol = t;
    }
    problem.validate()?;
    Ok(problem)
}

pub fn solve_document(input: &SolveInput, min_mass: f64) -> Result<SolveOutput> {
    let problem = solve_problem(input)?;
    let (plan, assignment) = fota::solve_with(&problem, min_mass)?;
    Ok(SolveOutput {
        plan: plan.plan.row_iter().map(|r| r.iter().copied().collect()).collect(),
        assignment: assignment.detection_to_track,
        marginal_error: plan.marginal_error,
        converged: plan.converged,
        iterations_used: plan.iterations_used,
    })
}

fn cmd_solve(a: &SolveArgs) -> Result<()> {
    let input: SolveInput = read_json(&a.problem)?;
    let out = solve_document(&input, a.min_mass)?;
    let json = serde_json::to_string_pretty(&out)? + "\n";
    match &a.out {
        Some(p) => write_text(p, &json),
        None => emit(&json),
    }
}

pub fn loss_document(input: &LossInput) -> Result<LossOutput> {
    let matching = match &input.matching {
        Some(m) => m.clone(),
        None => setloss::match_queries(&input.gts, &input.preds, &input.weights)?,
    };
    let per_query = setloss::query_losses(&input.gts, &input.preds, &matching, &input.weights)?;
    Ok(LossOutput {
        loss: per_query.iter().sum(),
        matching,
        per_query,
    })
}

fn cmd_loss(a: &LossArgs) -> Result<()> {
    let input: LossInput = read_json(&a.input)?;
    let out = loss_document(&input)?;
    match a.format {
        Format::Json => emit(&(serde_json::to_string_pretty(&out)? + "\n")),
        Format::Table => {
            let rows: Vec<Vec<String>> = out
                .matching
                .iter()
                .zip(&out.per_query)
                .enumerate()
                .map(|(k, (m, l))| vec![k.to_string(), m.map_or("background".into(), |g| g.to_string()), format!("{l:.6}")])
                .collect();
            let mut text = metrics::render_table(&["query", "match", "loss"], &rows);
            text.push_str(&format!("total {:.6}\n", out.loss));
            emit(&text)
        }
    }
}

/// Tracks one scenario with every metric/associator pair, in parallel.
pub fn compare_scenarios(scenarios: &[(Vec<FrameBundle>, Vec<GtFrame>)], match_dist: f64) -> Result<Vec<CompareRow>> {
    let variants: Vec<(DistanceMetric, Association)> = DistanceMetric::ALL
        .iter()
        .flat_map(|m| [(*m, Association::KuhnMunkres), (*m, Association::Fota)])
        .collect();
    let jobs: Vec<(usize, usize)> = (0..variants.len()).flat_map(|v| (0..scenarios.len()).map(move |s| (v, s))).collect();
    let eval = EvalConfig {
        match_dist,
        ..EvalConfig::default()
    };
    let done: Vec<(MetricReport, f64)> = jobs
        .par_iter()
        .map(|&(v, s)| {
            let (metric, association) = variants[v];
            let (frames, gt) = &scenarios[s];
            let cfg = TrackerConfig::new(metric, association);
            let start = Instant::now();
            let results = tracker::run(frames, &cfg)?;
            let secs = start.elapsed().as_secs_f64().max(1e-9);
            let report = metrics::evaluate(gt, &metrics::hyp_frames(&results), &eval)?;
            Ok((report, frames.len() as f64 / secs))
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<CompareRow> = variants
        .iter()
        .map(|&(metric, association)| CompareRow {
            metric,
            association,
            reports: vec![],
            fps: vec![],
        })
        .collect();
    for ((v, _), (report, fps)) in jobs.into_iter().zip(done) {
        rows[v].reports.push(report);
        rows[v].fps.push(fps);
    }
    Ok(rows)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Comparison table; columns become `mean±std` when several scenarios are pooled.
pub fn compare_table(rows: &[CompareRow]) -> String {
    let mut header = vec!["Cost matrix", "Association"];
    header.extend(TABLE_COLUMNS);
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut cells = vec![r.metric.name().to_string(), r.association.name().to_string()];
            let pick: [(fn(&MetricReport) -> f64, usize); 9] = [
                (|m| m.amota, 3),
                (|m| m.amotp, 3),
                (|m| m.motar, 3),
                (|m| m.mota, 3),
                (|m| m.motp, 3),
                (|m| m.mt as f64, 0),
                (|m| m.ml as f64, 0),
                (|m| m.ids as f64, 0),
                (|m| m.frag as f64, 0),
            ];
            for (f, prec) in pick {
                let xs: Vec<f64> = r.reports.iter().map(f).collect();
                cells.push(fmt_stat(&xs, prec));
            }
            cells.push(fmt_stat(&r.fps, 1));
            cells
        })
        .collect();
    // the first column is the only left-aligned one; fold the label pair into it
    let merged_header: Vec<String> = std::iter::once(format!("{:<12}{}", header[0], header[1]))
        .chain(header[2..].iter().map(|s| s.to_string()))
        .collect();
    let merged_rows: Vec<Vec<String>> = body
        .into_iter()
        .map(|mut c| {
            let label = format!("{:<12}{}", c[0], c[1]);
            c.drain(..2);
            c.insert(0, label);
            c
        })
        .collect();
    let header_refs: Vec<&str> = merged_header.iter().map(String::as_str).collect();
    metrics::render_table(&header_refs, &merged_rows)
}

fn fmt_stat(xs: &[f64], prec: usize) -> String {
    let (mean, std) = mean_std(xs);
    if xs.len() > 1 {
        format!("{mean:.prec$}±{std:.prec$}")
    } else {
        format!("{mean:.prec$}")
    }
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let scenarios: Vec<(Vec<FrameBundle>, Vec<GtFrame>)> = match (&a.frames, &a.gt) {
        (Some(f), Some(g)) => {
            let (fh, frames) = scenario::load_frames(f)?;
            let (gh, gt) = scenario::load_gt(g)?;
            if fh.scenario_id != gh.scenario_id {
                return Err(Error::Invalid("frames and ground truth belong to different scenarios".into()));
            }
            vec![(frames, gt)]
        }
        _ => {
            if a.seeds == 0 {
                return Err(Error::Invalid("--seeds must be >= 1".into()));
            }
            let base: ScenarioConfig = match &a.config {
                Some(p) => read_json(p)?,
                None => ScenarioConfig::default(),
            };
            (0..a.seeds)
                .into_par_iter()
                .map(|s| scenario::generate(&base.clone().with_seed(s)).map(|sc: Scenario| (sc.frames, sc.gt)))
                .collect::<Result<_>>()?
        }
    };
    let rows = compare_scenarios(&scenarios, a.match_dist)?;
    match a.format {
        Format::Json => emit(&(serde_json::to_string_pretty(&rows)? + "\n")),
        Format::Table => emit(&compare_table(&rows)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Invalid("x".into())), 2);
        assert_eq!(exit_code(&Error::Numerical("x".into())), 3);
        let io = Error::Io {
            path: "p".into(),
            source: std::io::Error::other("x"),
        };
        assert_eq!(exit_code(&io), 1);
    }

    #[test]
    fn unknown_enum_is_a_usage_error() {
        assert_eq!(main_with_args(["fota", "track", "f", "--out", "o", "--association", "greedy"]), 2);
        assert_eq!(main_with_args(["fota", "track", "f", "--out", "o", "--metric", "iou"]), 2);
    }

    #[test]
    fn solve_document_examples() {
        let input: SolveInput = serde_json::from_str(r#"{"cost": [[1, 1]], "p": [2], "q": [1, 1], "s": 2}"#).unwrap();
        let out = solve_document(&input, fota::DEFAULT_MIN_MASS).unwrap();
        assert_eq!(out.assignment, vec![Some(0), Some(0)]);
        assert!((out.plan[0][0] - 1.0).abs() < 1e-9);
        let ragged: SolveInput = serde_json::from_str(r#"{"cost": [[1, 1], [2]]}"#).unwrap();
        assert!(solve_problem(&ragged).is_err());
    }

    #[test]
    fn stats_format() {
        assert_eq!(fmt_stat(&[1.0, 3.0], 1), "2.0±1.4");
        assert_eq!(fmt_stat(&[5.0], 0), "5");
    }
}
