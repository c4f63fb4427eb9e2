use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use jointtrack::graph::read_graph;
use jointtrack::graph::write_graph;
use jointtrack::ilp::IlpInstance;
use jointtrack::metrics::{evaluate, tracks_from_annotations, PckhConfig, DEFAULT_PCKH_RATIO};
use jointtrack::model::{
    read_annotations, read_correspondences, read_detections, read_tracks, write_atomic,
    write_tracks, DEFAULT_JOINT_COUNT,
};
use jointtrack::potentials::{
    read_potentials, train_spatial_model, train_temporal_model, write_potentials,
    CorrespondenceIndex, LogisticModel, SpatialModel, TrainConfig,
};
use jointtrack::solver::{brute_force, check, solve, SolverConfig, BRUTE_FORCE_MAX_VARS};
use jointtrack::synth::{generate, random_problem, SynthConfig};
use jointtrack::tracker::{track_observed, Models, TrackerConfig};

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (format revision 1)");

#[derive(Parser)]
#[command(name = "jointtrack", version = VERSION, arg_required_else_help = true)]
#[command(about = "Multi-person pose tracking by spatio-temporal graph partitioning")]
struct Cli {
    /// Log filter, for example `info` or `jointtrack=debug`.
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene.
    Synth(SynthArgs),
    /// Fit the temporal edge model.
    TrainTemporal(TrainTemporalArgs),
    /// Fit the geometric cross-type spatial model.
    TrainSpatial(TrainSpatialArgs),
    /// Track people through a video.
    Track(TrackArgs),
    /// Solve a dumped instance.
    Solve(SolveArgs),
    /// Score tracks against annotations.
    Eval(EvalArgs),
    /// Compare the solver with exhaustive search on random instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with generator settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    persons: Option<usize>,
    #[arg(long)]
    frames: Option<u32>,
    /// Detection position noise in pixels.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    miss: Option<f64>,
    #[arg(long)]
    fp: Option<f64>,
    #[arg(long)]
    occlusions: Option<usize>,
    /// Horizontal distance between neighbouring people in pixels.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// TOML file with `l2`, `lr` and `epochs`; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Accepted for reproducibility records; training is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_PCKH_RATIO)]
    pckh_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_JOINT_COUNT)]
    joint_count: usize,
}

#[derive(Args)]
struct TrainTemporalArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    correspondences: PathBuf,
    #[arg(long, default_value_t = jointtrack::graph::DEFAULT_TAU)]
    tau: u32,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainSpatialArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum Family {
    #[value(name = "trans_spatial")]
    TransSpatial,
    #[value(name = "trans_temporal")]
    TransTemporal,
    #[value(name = "trans_st")]
    TransSt,
    #[value(name = "consist_st")]
    ConsistSt,
}

#[derive(Args)]
struct TrackArgs {
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    correspondences: PathBuf,
    #[arg(long)]
    temporal_model: PathBuf,
    /// Geometric cross-type model.
    #[arg(long, conflicts_with = "spatial_edges")]
    spatial_model: Option<PathBuf>,
    /// Cross-type edge probabilities, one `{"a","b","p"}` record per line.
    #[arg(long)]
    spatial_edges: Option<PathBuf>,
    /// TOML file with tracker settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<u32>,
    #[arg(long)]
    tau: Option<u32>,
    #[arg(long)]
    min_frames: Option<u32>,
    #[arg(long)]
    min_avg_nodes: Option<f64>,
    #[arg(long)]
    nms_iou: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long)]
    time_limit: Option<f64>,
    /// Leave out a constraint family; may be repeated.
    #[arg(long, value_enum)]
    disable: Vec<Family>,
    #[arg(long, default_value_t = DEFAULT_JOINT_COUNT)]
    joint_count: usize,
    #[arg(long)]
    out: PathBuf,
    /// Per-window solver statistics as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Write every window's graph, potentials and LP file here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    potentials: PathBuf,
    /// TOML file with solver settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long)]
    node_limit: Option<u64>,
    #[arg(long, value_enum)]
    disable: Vec<Family>,
    /// Also run exhaustive search and compare objectives.
    #[arg(long)]
    oracle: bool,
    /// Write the instance in LP format.
    #[arg(long)]
    lp: Option<PathBuf>,
    /// Write the solution as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Annotations.
    #[arg(long)]
    gt: PathBuf,
    /// Tracks, or annotations standing in for tracks.
    #[arg(long)]
    pred: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PCKH_RATIO)]
    pckh_ratio: f64,
    #[arg(long)]
    occlusion_aware: bool,
    #[arg(long, default_value_t = DEFAULT_JOINT_COUNT)]
    joint_count: usize,
    /// Report file; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, default_value_t = 22)]
    max_vars: usize,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::TrainTemporal(a) => train_temporal(a),
        Command::TrainSpatial(a) => train_spatial(a),
        Command::Track(a) => track_cmd(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn say(line: std::fmt::Arguments<'_>) -> Result<()> {
    use std::io::Write;
    writeln!(std::io::stdout().lock(), "{line}")?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg: SynthConfig = load_config(a.config.as_deref())?;
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.persons, a.persons);
    set(&mut cfg.frames, a.frames);
    set(&mut cfg.noise, a.noise);
    set(&mut cfg.miss, a.miss);
    set(&mut cfg.fp, a.fp);
    set(&mut cfg.occlusions, a.occlusions);
    if a.spacing.is_some() {
        cfg.spacing = a.spacing;
    }
    let scene = generate(&cfg)?;
    scene.write(&a.out_dir)?;
    log::info!(
        "wrote {} detections and {} annotated poses to {}",
        scene.detections.len(),
        scene.annotations.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = load_config(a.config.as_deref())?;
    set(&mut cfg.l2, a.l2);
    set(&mut cfg.lr, a.lr);
    set(&mut cfg.epochs, a.epochs);
    if let Some(seed) = a.seed {
        log::debug!("seed {seed} ignored: training is deterministic");
    }
    Ok(cfg)
}

fn train_temporal(a: TrainTemporalArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let dets = read_detections(&a.detections, a.train.joint_count)?;
    let gt = read_annotations(&a.annotations, a.train.joint_count)?;
    let corr = CorrespondenceIndex::new(read_correspondences(&a.correspondences)?);
    let model = train_temporal_model(&dets, &gt, &corr, a.tau, a.train.pckh_ratio, &cfg)?;
    model.save(&a.out)?;
    Ok(())
}

fn train_spatial(a: TrainSpatialArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let dets = read_detections(&a.detections, a.train.joint_count)?;
    let gt = read_annotations(&a.annotations, a.train.joint_count)?;
    let model = train_spatial_model(&dets, &gt, a.train.joint_count, a.train.pckh_ratio, &cfg)?;
    model.save(&a.out)?;
    Ok(())
}

fn disable(families: &mut jointtrack::ilp::Families, which: &[Family]) {
    for f in which {
        match f {
            Family::TransSpatial => families.trans_spatial = false,
            Family::TransTemporal => families.trans_temporal = false,
            Family::TransSt => families.trans_st = false,
            Family::ConsistSt => families.consist_st = false,
        }
    }
}

fn track_cmd(a: TrackArgs) -> Result<()> {
    let mut cfg: TrackerConfig = load_config(a.config.as_deref())?;
    set(&mut cfg.batch_size, a.batch_size);
    set(&mut cfg.tau, a.tau);
    set(&mut cfg.min_frames, a.min_frames);
    set(&mut cfg.min_avg_nodes, a.min_avg_nodes);
    set(&mut cfg.nms_iou, a.nms_iou);
    set(&mut cfg.solver.node_limit, a.node_limit);
    set(&mut cfg.solver.time_limit, a.time_limit);
    disable(&mut cfg.families, &a.disable);

    let dets = read_detections(&a.detections, a.joint_count)?;
    let corr = CorrespondenceIndex::new(read_correspondences(&a.correspondences)?);
    let spatial = match (&a.spatial_model, &a.spatial_edges) {
        (Some(p), _) => Some(SpatialModel::geometric(LogisticModel::load(p)?)?),
        (None, Some(p)) => Some(SpatialModel::read_edge_table(p)?),
        (None, None) => None,
    };
    let models = Models {
        temporal: LogisticModel::load(&a.temporal_model)?,
        spatial,
    };
    if let Some(dir) = &a.dump_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let out = track_observed(&dets, &corr, &models, &cfg, |w| {
        if let Some(dir) = &a.dump_dir {
            let stem = format!("window_{:03}", w.index);
            write_graph(dir.join(format!("{stem}.graph.jsonl")), w.graph)?;
            write_potentials(dir.join(format!("{stem}.potentials.jsonl")), w.potentials)?;
            write_atomic(dir.join(format!("{stem}.lp")), w.instance.to_lp().as_bytes())?;
        }
        Ok(())
    })?;
    write_tracks(&a.out, &out.tracks)?;
    if let Some(p) = &a.stats {
        write_json(p, &out.stats)?;
    }
    log::info!(
        "{} tracks from {} detections",
        out.stats.tracks,
        out.stats.detections
    );
    Ok(())
}

#[derive(Serialize)]
struct Solution {
    objective: f64,
    proven_optimal: bool,
    nodes_explored: u64,
    /// Names of the variables set to 1.
    active: Vec<String>,
}

fn solve_cmd(a: SolveArgs) -> Result<()> {
    let mut cfg: SolverConfig = load_config(a.config.as_deref())?;
    set(&mut cfg.time_limit, a.time_limit);
    set(&mut cfg.node_limit, a.node_limit);
    let mut families = jointtrack::ilp::Families::default();
    disable(&mut families, &a.disable);
    let g = read_graph(&a.graph)?;
    let pot = read_potentials(&a.potentials)?;
    let inst = IlpInstance::build(&g, &pot, &BTreeMap::new(), families)?;
    if a.oracle && inst.var_count() > BRUTE_FORCE_MAX_VARS {
        bail!(jointtrack::Error::TooLarge {
            vars: inst.var_count(),
            max: BRUTE_FORCE_MAX_VARS
        });
    }
    if let Some(p) = &a.lp {
        write_atomic(p, inst.to_lp().as_bytes())?;
    }
    let (sol, stats) = solve(&inst, &cfg)?;
    say(format_args!("variables {}", inst.var_count()))?;
    say(format_args!("objective {}", sol.objective))?;
    say(format_args!("proven_optimal {}", stats.proven_optimal))?;
    if a.oracle {
        let (best, visited) = brute_force(&inst)?;
        say(format_args!("oracle_objective {}", best.objective))?;
        say(format_args!("oracle_assignments {visited}"))?;
        if best.objective != sol.objective {
            bail!(
                "solver objective {} differs from exhaustive search {}",
                sol.objective,
                best.objective
            );
        }
        say(format_args!("match true"))?;
    }
    if let Some(p) = &a.out {
        let active = (0..inst.var_count())
            .filter(|&v| sol.values[v])
            .map(|v| inst.index.name(v))
            .collect();
        write_json(
            p,
            &Solution {
                objective: sol.objective,
                proven_optimal: stats.proven_optimal,
                nodes_explored: stats.nodes_explored,
                active,
            },
        )?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let gt = read_annotations(&a.gt, a.joint_count)?;
    let pred = match read_tracks(&a.pred) {
        Ok(t) => t,
        Err(track_err) => match read_annotations(&a.pred, a.joint_count) {
            Ok(poses) => tracks_from_annotations(&poses),
            Err(_) => return Err(track_err.into()),
        },
    };
    let report = evaluate(&pred, &gt, &PckhConfig { ratio: a.pckh_ratio }, a.occlusion_aware)?;
    match &a.out {
        Some(p) => write_json(p, &report)?,
        None => say(format_args!("{}", serde_json::to_string_pretty(&report)?))?,
    }
    Ok(())
}

fn oracle(a: OracleArgs) -> Result<()> {
    if a.max_vars > BRUTE_FORCE_MAX_VARS {
        bail!(jointtrack::Error::TooLarge {
            vars: a.max_vars,
            max: BRUTE_FORCE_MAX_VARS
        });
    }
    let mut failures = 0;
    for seed in a.first_seed..a.first_seed + a.seeds {
        let (g, pot) = random_problem(seed, a.max_vars)?;
        let inst = IlpInstance::build(&g, &pot, &BTreeMap::new(), Default::default())?;
        let (sol, _) = solve(&inst, &SolverConfig::default())?;
        let (best, _) = brute_force(&inst)?;
        let ok = sol.objective == best.objective && check(&inst, &sol.values);
        if !ok {
            failures += 1;
        }
        say(format_args!(
            "seed {seed} vars {} solve {} brute {} {}",
            inst.var_count(),
            sol.objective,
            best.objective,
            if ok { "ok" } else { "MISMATCH" }
        ))?;
    }
    say(format_args!("{} of {} instances agree", a.seeds - failures, a.seeds))?;
    if failures > 0 {
        bail!("{failures} instances disagree");
    }
    Ok(())
}
