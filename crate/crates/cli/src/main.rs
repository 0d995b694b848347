use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use echotrace::config::RunConfig;
use echotrace::decide::strategy::GroupTables;
use echotrace::decide::{self, LabeledStrokeSample, Mode, ModelBundle, Observation, Strategy};
use echotrace::echo::{self, Matrix};
use echotrace::experiment::{self, run_experiment};
use echotrace::patterns::{self, PatternCatalog, TableMode, UnlockPattern};
use echotrace::pipeline::Analyzer;
use echotrace::sim::{self, PatternTiming};
use echotrace::{io, ofdm, segment, Error, Mic};

#[derive(Parser)]
#[command(name = "echotrace", version, about = "Active acoustic side-channel toolkit for unlock-pattern inference")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config file with dotted section keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set sim.snr_db=15`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Master seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Decision mode such as D2.1 (same as `--set mode=...`).
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Pattern catalog file, one `id: p0 p1 ...` line per pattern.
    #[arg(long, global = true)]
    catalog: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the emitted OFDM stream as a mono PCM16 WAV.
    Gen(GenArgs),
    /// Simulate a pattern entry and write the microphone traces.
    Simulate(SimulateArgs),
    /// Analyze traces and infer candidate patterns.
    Analyze(AnalyzeArgs),
    /// Train stroke and group classifiers.
    Train(TrainArgs),
    /// Score a trained model on simulated users.
    Eval(EvalArgs),
    /// Run the simulated user study.
    Experiment(ExperimentArgs),
    /// Count Android unlock patterns and print the catalog grouping tables.
    Enumerate(EnumerateArgs),
    /// Render an echo profile, differential or binary matrix as a PGM heatmap.
    Render(RenderArgs),
    /// Print the resolved configuration.
    Config,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, short)]
    out: PathBuf,
    /// Number of frames.
    #[arg(long, conflicts_with = "duration")]
    frames: Option<usize>,
    /// Duration in seconds; only whole frames are emitted.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args, Clone)]
struct SimSource {
    /// Catalog id of the pattern to simulate.
    #[arg(long)]
    pattern: Option<u32>,
    /// Explicit grid points, e.g. "0 1 2 5".
    #[arg(long, conflicts_with = "pattern")]
    points: Option<String>,
    /// Finger speed in mm/s.
    #[arg(long, default_value_t = 250.0)]
    speed: f64,
    /// Pause at each inflection in seconds; defaults to experiment.pause.
    #[arg(long)]
    pause: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: SimSource,
    /// Output directory for bottom.wav, top.wav and truth.json.
    #[arg(long, short)]
    out_dir: PathBuf,
    /// Write one stereo file (channel 0 bottom, channel 1 top) instead.
    #[arg(long)]
    stereo: bool,
}

#[derive(Args, Clone)]
struct TraceInput {
    /// Bottom microphone WAV (mono).
    #[arg(long)]
    bottom: Option<PathBuf>,
    /// Top microphone WAV (mono).
    #[arg(long)]
    top: Option<PathBuf>,
    /// Stereo WAV: channel 0 bottom, channel 1 top.
    #[arg(long, conflicts_with_all = ["bottom", "top"])]
    stereo: Option<PathBuf>,
    /// Simulate this catalog pattern instead of reading files.
    #[arg(long, conflicts_with_all = ["bottom", "top", "stereo"])]
    simulate: Option<u32>,
    /// Finger speed for `--simulate`, mm/s.
    #[arg(long, default_value_t = 250.0)]
    speed: f64,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    input: TraceInput,
    /// Trained model bundle (needed by D1 and D3 modes).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Known pattern id, adds correctness flags to the report.
    #[arg(long)]
    truth: Option<u32>,
    /// Write the report here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write per-mic component and feature CSV files into this directory.
    #[arg(long)]
    csv_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Where to write the model bundle.
    #[arg(long, short)]
    out: PathBuf,
    /// Train from this sample file instead of simulating training users.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Write the training samples used.
    #[arg(long)]
    samples_out: Option<PathBuf>,
    /// Classifier preset, e.g. medium-gaussian-svm, fine-knn, bagged-trees.
    #[arg(long)]
    classifier: Option<String>,
    /// Report k-fold cross-validation accuracy per microphone mode.
    #[arg(long, value_name = "FOLDS")]
    cv: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Comma-separated decision modes; defaults to the configured mode.
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated decision modes; defaults to the configured mode.
    #[arg(long)]
    modes: Option<String>,
    /// Classifier preset for D1 and D3 modes.
    #[arg(long)]
    classifier: Option<String>,
    /// Write the JSON report here.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Args)]
struct EnumerateArgs {
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderKind {
    Profile,
    Diff,
    Binary,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    input: TraceInput,
    #[arg(long, default_value = "bottom")]
    mic: Mic,
    #[arg(long, value_enum, default_value_t = RenderKind::Diff)]
    kind: RenderKind,
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the matrix as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Errors caused by how the tool was invoked.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn load_config(g: &Global) -> anyhow::Result<RunConfig> {
    let mut overrides = g.overrides.clone();
    if let Some(seed) = g.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(mode) = &g.mode {
        overrides.push(format!("mode=\"{mode}\""));
    }
    Ok(RunConfig::load(g.config.as_deref(), &overrides)?)
}

fn load_catalog(g: &Global) -> anyhow::Result<PatternCatalog> {
    match &g.catalog {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(PatternCatalog::parse(&text)?)
        }
        None => Ok(PatternCatalog::default()),
    }
}

fn parse_modes(list: Option<&str>, default: Mode) -> anyhow::Result<Vec<Mode>> {
    match list {
        None => Ok(vec![default]),
        Some(s) => s.split(',').map(|m| m.trim().parse::<Mode>().map_err(anyhow::Error::from)).collect(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn resolve_pattern(catalog: &PatternCatalog, id: Option<u32>, points: Option<&str>) -> anyhow::Result<UnlockPattern> {
    match (id, points) {
        (Some(id), _) => catalog.get(id).cloned().ok_or_else(|| usage(format!("pattern {id} is not in the catalog"))),
        (None, Some(text)) => {
            let pts = text
                .split(|c: char| c.is_whitespace() || c == ',' || c == '-')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<u8>().map_err(|_| usage(format!("bad grid point '{t}'"))))
                .collect::<anyhow::Result<Vec<u8>>>()?;
            Ok(UnlockPattern::new(pts)?)
        }
        (None, None) => Err(usage("give --pattern or --points")),
    }
}

fn simulate_pattern(cfg: &RunConfig, pattern: &UnlockPattern, speed: f64, pause: Option<f64>) -> anyhow::Result<sim::PatternTrace> {
    let n = pattern.strokes().len();
    let pause = pause.unwrap_or(cfg.experiment.pause);
    let timing = PatternTiming { lead_in: cfg.experiment.lead_in, ..PatternTiming::uniform(n, speed, pause) };
    let sim_cfg = sim::SimConfig { seed: experiment::split_seed(cfg.seed, &[pattern.id as u64]), ..cfg.sim.clone() };
    Ok(sim::synth_pattern_trace(pattern, &cfg.geometry, &cfg.frame, &sim_cfg, &timing)?)
}

fn check_rate(cfg: &RunConfig, rate: u32, path: &Path) -> anyhow::Result<()> {
    if (rate as f64 - cfg.frame.sample_rate).abs() > 0.5 {
        bail!(Error::Input(format!("{}: sample rate {rate} Hz, expected {}", path.display(), cfg.frame.sample_rate)));
    }
    Ok(())
}

fn read_mono(cfg: &RunConfig, path: &Path) -> anyhow::Result<Vec<f64>> {
    let wav = io::read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    check_rate(cfg, wav.sample_rate, path)?;
    if wav.channels.len() != 1 {
        return Err(usage(format!("{} is not mono; use --stereo", path.display())));
    }
    Ok(wav.channels.into_iter().next().unwrap())
}

struct Traces {
    bottom: Option<Vec<f64>>,
    top: Option<Vec<f64>>,
    simulated: Option<u32>,
}

fn load_traces(cfg: &RunConfig, catalog: &PatternCatalog, input: &TraceInput) -> anyhow::Result<Traces> {
    if let Some(id) = input.simulate {
        let pattern = resolve_pattern(catalog, Some(id), None)?;
        let t = simulate_pattern(cfg, &pattern, input.speed, None)?;
        return Ok(Traces { bottom: Some(t.bottom), top: Some(t.top), simulated: Some(id) });
    }
    if let Some(path) = &input.stereo {
        let wav = io::read_wav(path).with_context(|| format!("reading {}", path.display()))?;
        check_rate(cfg, wav.sample_rate, path)?;
        if wav.channels.len() != 2 {
            return Err(usage(format!("{} is not stereo", path.display())));
        }
        let mut ch = wav.channels.into_iter();
        return Ok(Traces { bottom: ch.next(), top: ch.next(), simulated: None });
    }
    let bottom = input.bottom.as_deref().map(|p| read_mono(cfg, p)).transpose()?;
    let top = input.top.as_deref().map(|p| read_mono(cfg, p)).transpose()?;
    if bottom.is_none() && top.is_none() {
        return Err(usage("no input: give --bottom/--top, --stereo or --simulate"));
    }
    Ok(Traces { bottom, top, simulated: None })
}

fn analyzer(cfg: &RunConfig) -> anyhow::Result<Analyzer> {
    Ok(Analyzer::new(cfg.frame.clone(), cfg.segment.clone(), cfg.gabor.clone())?)
}

fn cmd_gen(cfg: &RunConfig, args: &GenArgs) -> anyhow::Result<()> {
    let frames = match (args.frames, args.duration) {
        (Some(n), _) => n,
        (None, Some(s)) if s > 0.0 => ofdm::frames_for_duration(&cfg.frame, s),
        (None, Some(_)) => return Err(usage("--duration must be positive")),
        (None, None) => ofdm::frames_for_duration(&cfg.frame, 1.0),
    };
    if frames == 0 {
        return Err(usage("the stream needs at least one frame"));
    }
    let stream = ofdm::emit_stream(&ofdm::build_frame(&cfg.frame)?, frames)?;
    io::write_wav(&args.out, &[&stream], cfg.frame.sample_rate as u32)?;
    eprintln!("wrote {} frames ({} samples) to {}", frames, stream.len(), args.out.display());
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, catalog: &PatternCatalog, args: &SimulateArgs) -> anyhow::Result<()> {
    let pattern = resolve_pattern(catalog, args.source.pattern, args.source.points.as_deref())?;
    if !(args.source.speed > 0.0) {
        return Err(usage("--speed must be positive"));
    }
    let trace = simulate_pattern(cfg, &pattern, args.source.speed, args.source.pause)?;
    std::fs::create_dir_all(&args.out_dir)?;
    let rate = cfg.frame.sample_rate as u32;
    let mut files = Vec::new();
    let mut clipped = 0;
    if args.stereo {
        let p = args.out_dir.join("stereo.wav");
        clipped += io::write_wav(&p, &[&trace.bottom, &trace.top], rate)?;
        files.push(p);
    } else {
        for mic in Mic::BOTH {
            let p = args.out_dir.join(format!("{mic}.wav"));
            clipped += io::write_wav(&p, &[trace.trace(mic)], rate)?;
            files.push(p);
        }
    }
    let truth = json!({
        "pattern": pattern.id,
        "points": pattern.points,
        "strokes": catalog.stroke_ids(pattern.id),
        "stroke_bounds": trace.stroke_bounds,
        "samples": trace.bottom.len(),
        "clipped_samples": clipped,
        "signatures": {
            "bottom": patterns::signature(&pattern, cfg.geometry.mic(Mic::Bottom), &cfg.geometry)?.to_string(),
            "top": patterns::signature(&pattern, cfg.geometry.mic(Mic::Top), &cfg.geometry)?.to_string(),
        },
        "speed": args.source.speed,
        "config": cfg,
    });
    io::write_json(&args.out_dir.join("truth.json"), &truth)?;
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_analyze(cfg: &RunConfig, catalog: &PatternCatalog, args: &AnalyzeArgs) -> anyhow::Result<()> {
    let mode = cfg.mode;
    let traces = load_traces(cfg, catalog, &args.input)?;
    let mut inputs: Vec<(Mic, &[f64])> = Vec::new();
    for mic in mode.required_mics() {
        let t = match mic {
            Mic::Bottom => traces.bottom.as_deref(),
            Mic::Top => traces.top.as_deref(),
        };
        match t {
            Some(t) => inputs.push((mic, t)),
            None => return Err(usage(format!("mode {mode} needs the {mic} microphone trace"))),
        }
    }
    let models: Option<ModelBundle> = args.model.as_deref().map(read_json).transpose()?;
    if let Some(m) = &models {
        m.check_version()?;
    }
    if mode.strategy != Strategy::D2 && models.is_none() {
        return Err(usage(format!("mode {mode} needs --model")));
    }
    let analyses = analyzer(cfg)?.analyze(&inputs)?;
    let obs = Observation::from_analyses(&analyses);
    let tables = GroupTables::build(catalog, &cfg.geometry)?;
    let candidates = decide::infer(&obs, &tables, models.as_ref(), catalog, mode)?;
    if let Some(dir) = &args.csv_dir {
        std::fs::create_dir_all(dir)?;
        for a in &analyses {
            std::fs::write(dir.join(format!("{}_components.csv", a.mic)), io::components_csv(&a.components))?;
            std::fs::write(dir.join(format!("{}_features.csv", a.mic)), io::features_csv(&a.features))?;
        }
    }
    let mut report = json!({
        "config": cfg,
        "mode": mode,
        "mics": analyses,
        "signatures": {
            "bottom": obs.signature(Mic::Bottom).map(|s| s.to_string()),
            "top": obs.signature(Mic::Top).map(|s| s.to_string()),
        },
        "candidates": candidates,
        "ranking": decide::rank_candidates(std::slice::from_ref(&candidates)),
    });
    if let Some(id) = args.truth.or(traces.simulated) {
        let pattern = resolve_pattern(catalog, Some(id), None)?;
        let mut sig_ok = serde_json::Map::new();
        for a in &analyses {
            let expected = patterns::signature(&pattern, cfg.geometry.mic(a.mic), &cfg.geometry)?;
            let seen = obs.signature(a.mic);
            sig_ok.insert(
                a.mic.to_string(),
                json!({ "expected": expected.to_string(), "correct": seen.as_ref() == Some(&expected) }),
            );
        }
        report["truth"] = json!({
            "pattern": id,
            "in_candidates": candidates.contains(id),
            "signatures": sig_ok,
        });
    }
    emit(args.out.as_deref(), &io::to_json(&report)?)
}

fn cmd_train(cfg: &RunConfig, catalog: &PatternCatalog, args: &TrainArgs) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    if let Some(name) = &args.classifier {
        cfg.classifier = name.parse()?;
    }
    let tables = GroupTables::build(catalog, &cfg.geometry)?;
    let (models, samples) = match &args.samples {
        Some(path) => {
            let samples: Vec<LabeledStrokeSample> = read_json(path)?;
            (decide::train_models(&samples, catalog, &tables, &cfg.classifier)?, samples)
        }
        None => {
            let (m, summary, samples) = experiment::train_on_simulation(&cfg, &analyzer(&cfg)?, catalog, &tables)?;
            eprintln!("simulated {} training entries, {} samples", summary.trials, summary.samples);
            (m, samples)
        }
    };
    for (table, group, why) in &models.skipped {
        eprintln!("skipped {table:?} {group:?}: {why}");
    }
    if let Some(folds) = args.cv {
        for table in [TableMode::Both, TableMode::Bottom, TableMode::Top] {
            let acc = decide::cross_validate(&samples, &cfg.classifier, table, folds, cfg.seed)?;
            let mean = acc.iter().sum::<f64>() / acc.len() as f64;
            let folds: Vec<String> = acc.iter().map(|a| format!("{a:.3}")).collect();
            println!("{table:?}: mean {mean:.3}  folds [{}]", folds.join(", "));
        }
    }
    if let Some(p) = &args.samples_out {
        io::write_json(p, &samples)?;
    }
    io::write_json(&args.out, &models)?;
    eprintln!("wrote {} group models to {}", models.groups.len(), args.out.display());
    Ok(())
}

fn apply_size(cfg: &mut RunConfig, users: Option<usize>, reps: Option<usize>) -> anyhow::Result<()> {
    if let Some(u) = users {
        cfg.experiment.users = u;
    }
    if let Some(r) = reps {
        cfg.experiment.reps = r;
    }
    Ok(cfg.validate()?)
}

fn print_report(report: &experiment::ExperimentReport, out: Option<&Path>, format: Format) -> anyhow::Result<()> {
    let text = io::to_json(report)?;
    if let Some(p) = out {
        std::fs::write(p, &text).with_context(|| format!("writing {}", p.display()))?;
    }
    match format {
        Format::Table => print!("{}", report.to_table()),
        Format::Json if out.is_none() => print!("{text}"),
        Format::Json => {}
    }
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, catalog: &PatternCatalog, args: &EvalArgs) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    apply_size(&mut cfg, args.users, args.reps)?;
    let models: ModelBundle = read_json(&args.model)?;
    let modes = parse_modes(args.modes.as_deref(), cfg.mode)?;
    let report = run_experiment(&cfg, &modes, catalog, Some(&models))?;
    print_report(&report, args.out.as_deref(), args.format)
}

fn cmd_experiment(cfg: &RunConfig, catalog: &PatternCatalog, args: &ExperimentArgs) -> anyhow::Result<()> {
    let mut cfg = cfg.clone();
    apply_size(&mut cfg, args.users, args.reps)?;
    if let Some(name) = &args.classifier {
        cfg.classifier = name.parse()?;
    }
    let modes = parse_modes(args.modes.as_deref(), cfg.mode)?;
    let report = run_experiment(&cfg, &modes, catalog, None)?;
    print_report(&report, args.out.as_deref(), args.format)
}

fn cmd_enumerate(cfg: &RunConfig, catalog: &PatternCatalog, args: &EnumerateArgs) -> anyhow::Result<()> {
    let counts = patterns::enumerate_android_patterns();
    let tables = GroupTables::build(catalog, &cfg.geometry)?;
    if args.json {
        let by_length: Vec<_> = (4..=9).map(|n| json!({ "length": n, "count": counts.by_length[n] })).collect();
        let strokes: Vec<_> = catalog
            .strokes()
            .iter()
            .enumerate()
            .map(|(i, s)| json!({ "id": i + 1, "stroke": s.to_string() }))
            .collect();
        let out = json!({ "total": counts.total(), "by_length": by_length, "strokes": strokes, "tables": tables });
        print!("{}", io::to_json(&out)?);
        return Ok(());
    }
    println!("{:>6}  {:>8}", "length", "patterns");
    for n in 4..=9 {
        println!("{n:>6}  {:>8}", counts.by_length[n]);
    }
    println!("{:>6}  {:>8}", "total", counts.total());
    println!("\ncatalog strokes: {}", catalog.strokes().len());
    for table in [TableMode::Bottom, TableMode::Top, TableMode::Both] {
        let t = tables.get(table);
        println!("\n{table:?} microphone groups: {}", t.groups.len());
        for g in &t.groups {
            let ids: Vec<String> = g.patterns.iter().map(|p| p.to_string()).collect();
            println!("  {:<28} {}", g.key.to_string(), ids.join(", "));
        }
    }
    Ok(())
}

fn cmd_render(cfg: &RunConfig, catalog: &PatternCatalog, args: &RenderArgs) -> anyhow::Result<()> {
    let traces = load_traces(cfg, catalog, &args.input)?;
    let trace = match args.mic {
        Mic::Bottom => traces.bottom,
        Mic::Top => traces.top,
    }
    .ok_or_else(|| usage(format!("no {} microphone trace given", args.mic)))?;
    let an = analyzer(cfg)?;
    let matrix: Matrix = match args.kind {
        RenderKind::Profile => echo::fold(&echo::correlate(&trace, an.pulse())?, cfg.frame.frame_len)?.matrix,
        RenderKind::Diff => an.diff(&trace, args.mic)?.matrix,
        RenderKind::Binary => {
            let b = segment::binarize(&an.diff(&trace, args.mic)?.matrix, cfg.segment.percentile)?;
            Matrix::from_fn(b.rows, b.cols, |r, c| if b.get(r, c) { 1.0 } else { 0.0 })
        }
    };
    io::write_pgm(&args.out, &matrix)?;
    if let Some(p) = &args.csv {
        std::fs::write(p, io::matrix_csv(&matrix))?;
    }
    eprintln!("wrote {}x{} heatmap to {}", matrix.cols, matrix.rows, args.out.display());
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli.global)?;
    let catalog = load_catalog(&cli.global)?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(&cfg, a),
        Command::Simulate(a) => cmd_simulate(&cfg, &catalog, a),
        Command::Analyze(a) => cmd_analyze(&cfg, &catalog, a),
        Command::Train(a) => cmd_train(&cfg, &catalog, a),
        Command::Eval(a) => cmd_eval(&cfg, &catalog, a),
        Command::Experiment(a) => cmd_experiment(&cfg, &catalog, a),
        Command::Enumerate(a) => cmd_enumerate(&cfg, &catalog, a),
        Command::Render(a) => cmd_render(&cfg, &catalog, a),
        Command::Config => {
            print!("{}", cfg.to_flat()?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let is_usage = e.downcast_ref::<Usage>().is_some()
                || matches!(e.downcast_ref::<Error>(), Some(Error::Config(_)));
            ExitCode::from(if is_usage { 2 } else { 1 })
        }
    }
}
