//! `ravu`: build video graphs, ask questions over them, and evaluate.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing_subscriber::EnvFilter;

use ravu_core::builder::{self, BuildOutput, BuildReport};
use ravu_core::graph;
use ravu_core::harness::{
    self, ask, eval_localization, eval_qa, load_video, synth_corpus, write_video, Category, LocMethod, QaSettings,
    RetrievalMode, SynthParams, Video,
};
use ravu_core::ingest::{self, Association};
use ravu_core::{Backend, Config};

#[derive(Parser)]
#[command(name = "ravu", version, about = "Spatio-temporal video graphs and compositional retrieval")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "RAVU_CONFIG")]
    config: Option<PathBuf>,

    /// Log at debug level (otherwise RAVU_LOG or warnings only).
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assign consistent entity ids from observations and tracklets.
    Ingest {
        #[arg(long)]
        observations: PathBuf,
        #[arg(long)]
        tracklets: PathBuf,
        /// Association document; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build full graphs: edges, descriptions, events and embeddings.
    Build(BuildArgs),
    /// Recompute node embeddings of a built graph directory.
    Embed {
        #[arg(long)]
        graph_dir: PathBuf,
    },
    /// Recompute entity events of a built graph directory.
    Events {
        #[arg(long)]
        graph_dir: PathBuf,
    },
    /// Answer one question over a built graph.
    Ask(AskArgs),
    /// Evaluate question answering or localization over a dataset.
    Eval {
        #[command(subcommand)]
        kind: EvalKind,
    },
    /// Generate a synthetic corpus with ground truth.
    Synth {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        videos: usize,
        #[arg(long, default_value_t = SynthParams::default().n_frames)]
        frames: usize,
        #[arg(long, default_value_t = SynthParams::default().n_entities)]
        entities: usize,
        #[arg(long, default_value_t = SynthParams::default().n_questions)]
        questions: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct BuildArgs {
    /// Directory with observations.jsonl and tracklets.json, or a corpus
    /// directory with one such subdirectory per video.
    #[arg(long, conflicts_with_all = ["observations", "association"])]
    input: Option<PathBuf>,
    #[arg(long, requires = "tracklets")]
    observations: Option<PathBuf>,
    #[arg(long)]
    tracklets: Option<PathBuf>,
    /// Association document written by `ingest`.
    #[arg(long, conflicts_with = "observations")]
    association: Option<PathBuf>,
    /// Output directory; for a corpus, one subdirectory per video.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Auto,
    Plan,
    Global,
}

impl From<Mode> for RetrievalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Auto => RetrievalMode::Auto,
            Mode::Plan => RetrievalMode::Plan,
            Mode::Global => RetrievalMode::Global,
        }
    }
}

#[derive(Args)]
struct AskArgs {
    #[arg(long)]
    graph_dir: PathBuf,
    #[arg(long)]
    question: String,
    /// Answer options; repeat the flag once per option.
    #[arg(long = "option")]
    options: Vec<String>,
    /// Question category, used by `--mode auto` to route global questions.
    #[arg(long)]
    category: Option<Category>,
    /// Frame budget; the configured budget when omitted.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Rerank,
    TextEmbedding,
    RawVector,
}

impl From<Method> for LocMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Rerank => LocMethod::Rerank,
            Method::TextEmbedding => LocMethod::TextEmbedding,
            Method::RawVector => LocMethod::RawVector,
        }
    }
}

#[derive(Args)]
struct EvalCommon {
    /// `mcq.jsonl` or `loc.jsonl`.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory holding one built graph directory per video id.
    #[arg(long)]
    graphs: PathBuf,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, value_enum, default_value = "auto")]
    mode: Mode,
    /// Report path prefix; writes `<out>.csv` and `<out>.json`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum EvalKind {
    Qa(EvalCommon),
    Loc {
        #[command(flatten)]
        common: EvalCommon,
        #[arg(long, value_enum, default_value = "rerank")]
        method: Method,
    },
}

fn init_logging(verbose: bool) {
    let filter = if verbose {
        EnvFilter::new("debug")
    } else {
        EnvFilter::try_from_env("RAVU_LOG").unwrap_or_else(|_| EnvFilter::new("warn"))
    };
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

fn stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn association_json(association: &Association) -> Result<String> {
    let v = serde_json::to_value(association)?;
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn associate_files(observations: &Path, tracklets: &Path, config: &Config) -> Result<Association> {
    let obs = ingest::parse_observations(&read(observations)?)
        .with_context(|| format!("parsing {}", observations.display()))?;
    let tracks =
        ingest::parse_tracklets(&read(tracklets)?).with_context(|| format!("parsing {}", tracklets.display()))?;
    Ok(ingest::associate(&obs, &tracks, harness::associate_options(config))?)
}

fn summarize(name: &str, report: &BuildReport) {
    eprintln!(
        "{name}: {} frames, {} nodes, {} edges, {} dropped edge lines, {} event fallbacks",
        report.frames,
        report.nodes,
        report.edges,
        report.dropped_edge_lines,
        report.event_fallbacks.len()
    );
}

fn build_one(association: &Association, out: &Path, backend: &dyn Backend, config: &Config) -> Result<BuildOutput> {
    let built = builder::build_graph(association, backend, harness::build_options(config))?;
    write_video(out, &built).with_context(|| format!("writing {}", out.display()))?;
    Ok(built)
}

fn cmd_build(args: &BuildArgs, backend: &dyn Backend, config: &Config) -> Result<()> {
    if let Some(path) = &args.association {
        let association: Association = serde_json::from_str(&read(path)?).context("parsing association")?;
        let built = build_one(&association, &args.out, backend, config)?;
        summarize(&args.out.display().to_string(), &built.report);
        return Ok(());
    }
    if let (Some(obs), Some(tracks)) = (&args.observations, &args.tracklets) {
        let built = build_one(&associate_files(obs, tracks, config)?, &args.out, backend, config)?;
        summarize(&args.out.display().to_string(), &built.report);
        return Ok(());
    }
    let Some(input) = &args.input else {
        bail!("give --input, --association, or --observations with --tracklets");
    };
    if input.join("observations.jsonl").exists() {
        let association =
            associate_files(&input.join("observations.jsonl"), &input.join("tracklets.json"), config)?;
        let built = build_one(&association, &args.out, backend, config)?;
        summarize(&args.out.display().to_string(), &built.report);
        return Ok(());
    }
    let mut videos: Vec<PathBuf> = fs::read_dir(input)
        .with_context(|| format!("reading {}", input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("observations.jsonl").exists())
        .collect();
    videos.sort();
    if videos.is_empty() {
        bail!("{} has no observations.jsonl and no video subdirectories", input.display());
    }
    for dir in videos {
        let name = dir.file_name().unwrap().to_string_lossy().into_owned();
        let association = associate_files(&dir.join("observations.jsonl"), &dir.join("tracklets.json"), config)
            .with_context(|| name.clone())?;
        let built = build_one(&association, &args.out.join(&name), backend, config).with_context(|| name.clone())?;
        summarize(&name, &built.report);
    }
    Ok(())
}

fn load_graph(dir: &Path) -> Result<graph::SpatioTemporalGraph> {
    graph::deserialize(&read(&dir.join("graph.json"))?).with_context(|| format!("parsing {}/graph.json", dir.display()))
}

fn cmd_embed(dir: &Path, backend: &dyn Backend) -> Result<()> {
    let g = load_graph(dir)?;
    let records = builder::embed_graph(&g, backend)?;
    let (bin, index) = builder::encode_embeddings(&records)?;
    fs::write(dir.join("embeddings.bin"), bin)?;
    write(&dir.join("embeddings.index.jsonl"), &index)?;
    eprintln!("{}: embedded {} nodes", dir.display(), records.len());
    Ok(())
}

fn cmd_events(dir: &Path, backend: &dyn Backend, config: &Config) -> Result<()> {
    let g = load_graph(dir)?;
    let (g, fallbacks) = builder::segment_all_events(&g, backend, harness::build_options(config))?;
    write(&dir.join("graph.json"), &graph::serialize(&g))?;
    eprintln!(
        "{}: {} events, fallback for entities {:?}",
        dir.display(),
        g.all_events().count(),
        fallbacks
    );
    Ok(())
}

fn settings(config: &Config, mode: Mode, budget: Option<usize>) -> QaSettings {
    let mut s = QaSettings::from_config(config, mode.into());
    if let Some(b) = budget {
        s.budget = b;
    }
    s
}

fn cmd_ask(args: &AskArgs, backend: &dyn Backend, config: &Config) -> Result<()> {
    let video = load_video(&args.graph_dir).with_context(|| format!("loading {}", args.graph_dir.display()))?;
    let answered = ask(
        &video,
        &args.question,
        &args.options,
        args.category,
        backend,
        &settings(config, args.mode, args.budget),
    )?;
    stdout(&(serde_json::to_string_pretty(&answered)? + "\n"))
}

fn load_videos(root: &Path, ids: impl IntoIterator<Item = String>) -> BTreeMap<String, Video> {
    let mut out = BTreeMap::new();
    for id in ids {
        if out.contains_key(&id) {
            continue;
        }
        match load_video(&root.join(&id)) {
            Ok(v) => {
                out.insert(id, v);
            }
            // The item is reported as errored by the evaluation.
            Err(e) => eprintln!("warning: {id}: graph unavailable: {e}"),
        }
    }
    out
}

fn emit(out: Option<&Path>, csv: &str, json: &str) -> Result<()> {
    stdout(csv)?;
    if let Some(prefix) = out {
        write(&prefix.with_extension("csv"), csv)?;
        write(&prefix.with_extension("json"), json)?;
    }
    Ok(())
}

fn cmd_eval(kind: &EvalKind, backend: &dyn Backend, config: &Config) -> Result<()> {
    match kind {
        EvalKind::Qa(c) => {
            let items = harness::parse_mcq(&read(&c.dataset)?).context("parsing dataset")?;
            let videos = load_videos(&c.graphs, items.iter().map(|i| i.video_id.clone()));
            let report = eval_qa(&items, &videos, backend, &settings(config, c.mode, c.budget));
            emit(c.out.as_deref(), &report.to_csv(), &report.to_json())
        }
        EvalKind::Loc { common: c, method } => {
            let ann = harness::parse_loc(&read(&c.dataset)?).context("parsing dataset")?;
            let videos = load_videos(&c.graphs, ann.iter().map(|a| a.video_id.clone()));
            let report =
                eval_localization(&ann, &videos, (*method).into(), backend, &settings(config, c.mode, c.budget));
            emit(c.out.as_deref(), &report.to_csv(), &report.to_json())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = Config::load(cli.config.as_deref()).context("loading configuration")?;
    let backend = || -> Result<Arc<dyn Backend>> { Ok(config.make_backend()?) };
    match &cli.command {
        Command::Ingest { observations, tracklets, out } => {
            let doc = association_json(&associate_files(observations, tracklets, &config)?)?;
            match out {
                Some(p) => write(p, &doc),
                None => stdout(&doc),
            }
        }
        Command::Build(args) => cmd_build(args, &*backend()?, &config),
        Command::Embed { graph_dir } => cmd_embed(graph_dir, &*backend()?),
        Command::Events { graph_dir } => cmd_events(graph_dir, &*backend()?, &config),
        Command::Ask(args) => cmd_ask(args, &*backend()?, &config),
        Command::Eval { kind } => cmd_eval(kind, &*backend()?, &config),
        Command::Synth { seed, videos, frames, entities, questions, out } => {
            let params = SynthParams { n_frames: *frames, n_entities: *entities, n_questions: *questions };
            let corpus = synth_corpus(*seed, *videos, params)?;
            for (rel, text) in corpus.documents() {
                write(&out.join(rel), &text)?;
            }
            eprintln!(
                "{}: {} videos, {} questions",
                out.display(),
                corpus.videos.len(),
                corpus.items().len()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
