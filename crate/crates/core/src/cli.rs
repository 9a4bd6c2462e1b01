//! The `glrd` command line: refinement runs, one-shot solves, balancing
//! simulations, evaluation and synthetic fixtures.
//!
//! Exit codes: 0 success, 1 input error, 2 provider error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::balancers::{
    assign_foreground_labels, baol_compress, baol_loss, sbc_loop, BalancerError, DbcState,
    ProposalSet, PseudoLabelPool, PseudoLabelRecord, SbcState,
};
use crate::commonsense::{HttpLlmClient, KnowledgeBase, KnowledgeProvider, LlmClient, RemoteProvider};
use crate::config::RunConfig;
use crate::geometry::{soft_nms, Box7DoF, ScoredBox, DEFAULT_SCORE_FLOOR, DEFAULT_SIGMA};
use crate::pipeline::{
    eval_ap25, generate_synthetic_scenes, read_jsonl_file, read_scenes, write_ground_truth,
    write_jsonl_file, write_scenes, DebateOracle, OfflineDebate, PipelineError, Refiner,
    RemoteDebate,
};
use crate::psl::{build_glrd_rules, decide, solve, ConstraintVector, RuleWeights, SelectionPolicy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_PROVIDER: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Provider(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Provider(_) => EXIT_PROVIDER,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_provider() {
            CliError::Provider(e.to_string())
        } else {
            CliError::Input(e.to_string())
        }
    }
}

impl From<BalancerError> for CliError {
    fn from(e: BalancerError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn input<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LlmMode {
    /// Knowledge base only.
    Off,
    /// Remote model, with the knowledge base as fallback.
    Remote,
}

#[derive(Debug, Parser)]
#[command(name = "glrd", version, about = "Common-sense refinement of open-vocabulary 3D detections")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub detections: Option<PathBuf>,
    #[arg(long, global = true)]
    pub kb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub gt: Option<PathBuf>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub log: Option<PathBuf>,
    #[arg(long, global = true)]
    pub policy: Option<SelectionPolicy>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = LlmMode::Off)]
    pub llm: LlmMode,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct PslFlags {
    /// Rule weights as three comma-separated numbers.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub phi_keep: Option<f64>,
    #[arg(long)]
    pub phi_recls: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Keep, remove or relabel novel-class detections scene by scene.
    Refine {
        #[command(flatten)]
        psl: PslFlags,
    },
    /// Solve the rule set for one constraint vector and print the decision.
    SolvePsl {
        x_conf: f64,
        x_size: f64,
        x_scene: f64,
        #[command(flatten)]
        psl: PslFlags,
        /// Print the full solver output as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Circulate per-class pseudo-label thresholds over a label file.
    Balance {
        /// Pseudo labels, one image per line.
        #[arg(long)]
        labels: PathBuf,
        /// Classes to balance; defaults to the knowledge base's novel classes,
        /// or every labeled class when no knowledge base is given.
        #[arg(long, value_delimiter = ',')]
        classes: Option<Vec<String>>,
        #[arg(long)]
        phi_clip: Option<f64>,
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Replay a loss stream through the per-class weight schedule.
    DbcSim {
        /// Class-to-loss records, one iteration per line.
        #[arg(long)]
        losses: PathBuf,
        #[arg(long)]
        i_dbc: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        delta_w: Option<f64>,
    },
    /// Compress proposals, assign foreground labels and compute the loss.
    Baol {
        /// JSON object with `boxes`, `classScores`, `fgScores` and `labels`.
        #[arg(long)]
        proposals: PathBuf,
        #[arg(long)]
        k_pro: Option<usize>,
        #[arg(long)]
        iou_lo: Option<f64>,
        #[arg(long)]
        iou_hi: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Per-class AP at IoU 0.25 of `--detections` against `--gt`.
    Eval,
    /// Write seeded synthetic detections (`--out`) and ground truth (`--gt`).
    GenSynthetic {
        #[arg(long)]
        scenes: Option<usize>,
        #[arg(long)]
        corruption_rate: Option<f64>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(input)?,
        None => RunConfig::default(),
    };
    let paths = &mut cfg.paths;
    for (flag, slot) in [
        (&cli.detections, &mut paths.detections),
        (&cli.kb, &mut paths.kb),
        (&cli.gt, &mut paths.gt),
        (&cli.out, &mut paths.out),
        (&cli.log, &mut paths.log),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if let Some(p) = cli.policy {
        cfg.psl.policy = p;
    }
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn apply_psl_flags(cfg: &mut RunConfig, flags: &PslFlags) {
    if let Some(w) = &flags.weights {
        cfg.psl.weights = [w[0], w[1], w[2]];
    }
    if let Some(v) = flags.phi_keep {
        cfg.psl.phi_keep = v;
    }
    if let Some(v) = flags.phi_recls {
        cfg.psl.phi_recls = v;
    }
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
    path.as_deref()
        .ok_or_else(|| CliError::Input(format!("missing --{flag}")))
}

fn load_kb(cfg: &RunConfig) -> Result<KnowledgeBase, CliError> {
    KnowledgeBase::load(required(&cfg.paths.kb, "kb")?).map_err(input)
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(cli)?;
    match &cli.command {
        Command::Refine { psl } => {
            apply_psl_flags(&mut cfg, psl);
            cfg.validate().map_err(input)?;
            cmd_refine(&cfg, cli.llm, stdout)
        }
        Command::SolvePsl {
            x_conf,
            x_size,
            x_scene,
            psl,
            json,
        } => {
            apply_psl_flags(&mut cfg, psl);
            cfg.validate().map_err(input)?;
            cmd_solve_psl(&cfg, [*x_conf, *x_size, *x_scene], *json, stdout)
        }
        Command::Balance {
            labels,
            classes,
            phi_clip,
            max_iters,
        } => {
            if let Some(v) = phi_clip {
                cfg.rplg.phi_clip = *v;
            }
            if let Some(v) = max_iters {
                cfg.sbc.max_iters = *v;
            }
            cfg.validate().map_err(input)?;
            cmd_balance(&cfg, labels, classes.as_deref(), stdout)
        }
        Command::DbcSim { losses, i_dbc, k, delta_w } => {
            if let Some(v) = i_dbc {
                cfg.dbc.i_dbc = *v;
            }
            if let Some(v) = k {
                cfg.dbc.k = *v;
            }
            if let Some(v) = delta_w {
                cfg.dbc.delta_w = *v;
            }
            cfg.validate().map_err(input)?;
            cmd_dbc_sim(&cfg, losses, stdout)
        }
        Command::Baol {
            proposals,
            k_pro,
            iou_lo,
            iou_hi,
            lambda,
        } => {
            if let Some(v) = k_pro {
                cfg.baol.k_pro = *v;
            }
            if let Some(v) = iou_lo {
                cfg.baol.iou_lo = *v;
            }
            if let Some(v) = iou_hi {
                cfg.baol.iou_hi = *v;
            }
            if lambda.is_some() {
                cfg.baol.lambda = *lambda;
            }
            cfg.validate().map_err(input)?;
            cmd_baol(&cfg, proposals, stdout)
        }
        Command::Eval => {
            cfg.validate().map_err(input)?;
            cmd_eval(&cfg, stdout)
        }
        Command::GenSynthetic { scenes, corruption_rate } => {
            if let Some(v) = scenes {
                cfg.synthetic.scenes = *v;
            }
            if let Some(v) = corruption_rate {
                cfg.synthetic.corruption_rate = *v;
            }
            cfg.validate().map_err(input)?;
            cmd_gen_synthetic(&cfg, stdout)
        }
    }
}

pub fn cmd_refine(cfg: &RunConfig, llm: LlmMode, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scenes = read_scenes(required(&cfg.paths.detections, "detections")?)?;
    let kb = load_kb(cfg)?;
    let (provider, oracle): (Box<dyn KnowledgeProvider>, Box<dyn DebateOracle>) = match llm {
        LlmMode::Off => (Box::new(kb.clone()), Box::new(OfflineDebate)),
        LlmMode::Remote => {
            let client: Arc<dyn LlmClient> = Arc::new(
                HttpLlmClient::new(cfg.llm.clone().with_env())
                    .map_err(|e| CliError::Provider(e.to_string()))?,
            );
            (
                Box::new(RemoteProvider::new(client.clone(), Some(kb.clone()))),
                Box::new(RemoteDebate::new(client)),
            )
        }
    };
    let refiner = Refiner {
        provider: provider.as_ref(),
        oracle: oracle.as_ref(),
        novel_classes: &kb.novel_classes,
        config: cfg.refine_config(),
    };
    let run = refiner.refine_all(&scenes, cfg.worker_count())?;
    if let Some(out) = &cfg.paths.out {
        write_scenes(out, &run.scenes)?;
    }
    if let Some(log) = &cfg.paths.log {
        write_jsonl_file(log, &run.logs)?;
    }
    writeln!(stdout, "{}", run.counts).map_err(input)?;
    match run.errors.into_iter().next() {
        None => Ok(()),
        Some((scene, e)) => {
            let message = format!("scene `{scene}` skipped: {e}");
            Err(if e.is_provider() {
                CliError::Provider(message)
            } else {
                CliError::Input(message)
            })
        }
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    #[serde(flatten)]
    solution: &'a crate::psl::SolverOutput,
    decision: crate::psl::Decision,
}

pub fn cmd_solve_psl(cfg: &RunConfig, x: [f64; 3], json: bool, stdout: &mut dyn Write) -> Result<(), CliError> {
    let x = ConstraintVector::new(x[0], x[1], x[2]).map_err(input)?;
    let rules = build_glrd_rules(&x, RuleWeights(cfg.psl.weights));
    let sol = solve(&rules, cfg.psl.policy).map_err(input)?;
    let decision = decide(&sol, cfg.psl.phi_keep, cfg.psl.phi_recls);
    if json {
        let report = SolveReport {
            solution: &sol,
            decision,
        };
        serde_json::to_writer_pretty(&mut *stdout, &report).map_err(input)?;
        writeln!(stdout).map_err(input)?;
    } else {
        writeln!(stdout, "yKeep {:.6}", sol.y_keep).map_err(input)?;
        writeln!(stdout, "yRecls {:.6}", sol.y_recls).map_err(input)?;
        writeln!(stdout, "objective {:.6}", sol.objective).map_err(input)?;
        writeln!(stdout, "decision {decision}").map_err(input)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SbcTraceRow<'a> {
    iteration: usize,
    thresholds: &'a BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    counts: Option<&'a BTreeMap<String, usize>>,
}

pub fn cmd_balance(
    cfg: &RunConfig,
    labels: &Path,
    classes: Option<&[String]>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let records: Vec<PseudoLabelRecord> = read_jsonl_file(labels)?;
    let all: Vec<_> = records.into_iter().flat_map(|r| r.labels).collect();
    for l in &all {
        l.validate()?;
    }
    let classes: BTreeSet<String> = match (classes, &cfg.paths.kb) {
        (Some(c), _) => c.iter().cloned().collect(),
        (None, Some(_)) => load_kb(cfg)?.novel_classes,
        (None, None) => all.iter().map(|l| l.class.clone()).collect(),
    };
    let pool = PseudoLabelPool::new(&all, cfg.rplg.phi_clip);
    let state = SbcState::new(classes, cfg.sbc)?;
    let outcome = sbc_loop(|t| pool.counts(t), state)?;

    if let Some(out) = &cfg.paths.out {
        let rows: Vec<SbcTraceRow> = outcome
            .trace
            .iter()
            .enumerate()
            .map(|(i, t)| SbcTraceRow {
                iteration: i,
                thresholds: t,
                counts: outcome.counts.get(i),
            })
            .collect();
        write_jsonl_file(out, &rows)?;
    }
    writeln!(
        stdout,
        "iterations {}, {}",
        outcome.iterations,
        if outcome.converged { "converged" } else { "stopped at cap" }
    )
    .map_err(input)?;
    let final_counts = pool.counts(&outcome.state.phi_by_class);
    for (class, phi) in &outcome.state.phi_by_class {
        writeln!(stdout, "{class}\t{phi:.4}\t{}", final_counts[class]).map_err(input)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DbcTraceRow {
    iteration: usize,
    raised: Vec<String>,
    lowered: Vec<String>,
    weights: BTreeMap<String, f64>,
}

pub fn cmd_dbc_sim(cfg: &RunConfig, losses: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let stream: Vec<BTreeMap<String, f64>> = read_jsonl_file(losses)?;
    let classes: BTreeSet<&String> = stream.iter().flat_map(|m| m.keys()).collect();
    let mut state = DbcState::new(classes.into_iter().cloned(), cfg.dbc)?;
    let mut trace = vec![];
    for (i, step) in stream.iter().enumerate() {
        if let Some(up) = state.accumulate(step)? {
            trace.push(DbcTraceRow {
                iteration: i + 1,
                raised: up.raised,
                lowered: up.lowered,
                weights: up.weights,
            });
        }
    }
    if let Some(out) = &cfg.paths.out {
        write_jsonl_file(out, &trace)?;
    }
    writeln!(stdout, "updates {}", trace.len()).map_err(input)?;
    for (class, w) in &state.w_by_class {
        writeln!(stdout, "{class}\t{w:.4}").map_err(input)?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct BaolInput {
    #[serde(flatten)]
    proposals: ProposalSet,
    #[serde(default)]
    labels: Vec<Box7DoF>,
}

#[derive(Serialize)]
struct BaolReport {
    #[serde(rename = "boxIndices")]
    box_indices: Vec<usize>,
    /// Compressed proposals surviving Soft-NMS on their best class score.
    #[serde(rename = "afterSoftNms")]
    after_soft_nms: usize,
    foreground: Vec<bool>,
    loss: f64,
}

pub fn cmd_baol(cfg: &RunConfig, proposals: &Path, stdout: &mut dyn Write) -> Result<(), CliError> {
    let lambda = cfg
        .baol
        .lambda
        .ok_or_else(|| CliError::Input("baol.lambda has no default; pass --lambda".into()))?;
    let text = std::fs::read_to_string(proposals)
        .map_err(|e| CliError::Input(format!("{}: {e}", proposals.display())))?;
    let inp: BaolInput = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", proposals.display())))?;
    let p = &inp.proposals;
    let compressed = baol_compress(p, cfg.baol.k_pro.min(p.boxes.len() * p.n_class()).max(1))?;
    let scored: Vec<ScoredBox> = compressed
        .box_indices
        .iter()
        .zip(&compressed.scores)
        .map(|(&i, row)| {
            let (class, score) = row
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |best, (j, &s)| if s > best.1 { (j, s) } else { best });
            ScoredBox::new(p.boxes[i], score, class as i64)
        })
        .collect();
    let survivors = soft_nms(&scored, DEFAULT_SIGMA, DEFAULT_SCORE_FLOOR).len();
    let foreground = assign_foreground_labels(&p.boxes, &inp.labels, cfg.baol.iou_lo, cfg.baol.iou_hi)?;
    let loss = baol_loss(&foreground, &p.fg_scores, lambda)?;
    let report = BaolReport {
        box_indices: compressed.box_indices,
        after_soft_nms: survivors,
        foreground,
        loss,
    };
    if let Some(out) = &cfg.paths.out {
        let file = std::fs::File::create(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
        serde_json::to_writer_pretty(file, &report).map_err(input)?;
    }
    writeln!(
        stdout,
        "kept {} of {} proposals, {} after soft-nms, {} foreground, loss {:.6}",
        report.box_indices.len(),
        p.boxes.len(),
        report.after_soft_nms,
        report.foreground.iter().filter(|f| **f).count(),
        report.loss
    )
    .map_err(input)?;
    Ok(())
}

pub fn cmd_eval(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let preds = read_scenes(required(&cfg.paths.detections, "detections")?)?;
    let gt = read_scenes(required(&cfg.paths.gt, "gt")?)?;
    let report = eval_ap25(&preds, &gt)?;
    for (class, ap) in &report.per_class {
        writeln!(stdout, "{class}\t{ap:.4}").map_err(input)?;
    }
    writeln!(stdout, "mAP@0.25\t{:.4}", report.mean).map_err(input)?;
    if let Some(out) = &cfg.paths.out {
        let file = std::fs::File::create(out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
        serde_json::to_writer_pretty(file, &report).map_err(input)?;
    }
    Ok(())
}

pub fn cmd_gen_synthetic(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<(), CliError> {
    let kb = load_kb(cfg)?;
    let data = generate_synthetic_scenes(&kb, cfg.seed, &cfg.synthetic)?;
    write_scenes(required(&cfg.paths.out, "out")?, &data.detections)?;
    if let Some(gt) = &cfg.paths.gt {
        write_ground_truth(gt, &data.ground_truth)?;
    }
    if let Some(log) = &cfg.paths.log {
        write_jsonl_file(log, &data.corruptions)?;
    }
    let objects: usize = data.ground_truth.iter().map(|s| s.detections.len()).sum();
    writeln!(
        stdout,
        "{} scenes, {} objects, {} corrupted",
        data.ground_truth.len(),
        objects,
        data.corruptions.len()
    )
    .map_err(input)?;
    Ok(())
}
