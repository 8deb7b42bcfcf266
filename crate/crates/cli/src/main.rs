//! `bsc`: synthesize datasets, build subspace databases, train and apply
//! binary codes, run queries and score them.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
//! failure.

mod config;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsc_core::eval::{evaluate, GroundTruth};
use bsc_core::format::{self, IndexFile, Manifest, ModelFile, Run};
use bsc_core::pipeline::{self, Dataset, DeltaSource};
use bsc_core::synth::{self, Split, SynthParams};
use bsc_core::{BasisOptions, BbcParams, CorrelationMode, Error, ErrorKind, IbcParams};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use config::{Config, ConfigError};

#[derive(Parser, Debug)]
#[command(name = "bsc", version, about = "Binary subspace coding for image-to-video retrieval")]
struct Cli {
    /// TOML file with per-command defaults; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a clustered synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Build the subspace database from a manifest's videos.
    Build(BuildArgs),
    /// Train an inner-product (full projection) hashing model.
    TrainIbc(TrainIbcArgs),
    /// Train a bilinear hashing model.
    TrainBbc(TrainBbcArgs),
    /// Encode a subspace database into a binary index.
    Encode(EncodeArgs),
    /// Rank videos for query images.
    Query(QueryArgs),
    /// Score a run file against manifest categories.
    Eval(EvalArgs),
}

#[derive(clap::Args, Debug)]
struct SynthArgs {
    /// Output directory; receives manifest.tsv, videos/ and images/.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    videos_per_cluster: Option<usize>,
    /// Frames per video.
    #[arg(long)]
    frames: Option<usize>,
    /// Feature dimension.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    subspace_dim: Option<usize>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    queries_per_cluster: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args, Debug)]
struct BuildArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output subspace database file.
    #[arg(long)]
    out: PathBuf,
    /// Keep singular directions above this fraction of the largest.
    #[arg(long)]
    rel_tol: Option<f64>,
    /// Cap on each video's subspace dimension.
    #[arg(long)]
    max_rank: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Correlation {
    Raw,
    TopM,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Delta {
    Categories,
    Sources,
}

#[derive(clap::Args, Debug)]
struct TrainIbcArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    database: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Code length [default: 64].
    #[arg(long)]
    bits: Option<usize>,
    /// Quantization weight [default: 100].
    #[arg(long)]
    lambda: Option<f64>,
    /// Code/projection passes per side per outer iteration [default: 2].
    #[arg(long)]
    iters: Option<usize>,
    /// Alternations between the image and video sides [default: 10].
    #[arg(long)]
    outer_iters: Option<usize>,
    /// How the image/video correlation is formed [default: top-m].
    #[arg(long, value_enum)]
    correlation: Option<Correlation>,
    /// Entries kept per column for top-m [default: ceil(n/10)].
    #[arg(long)]
    top_m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args, Debug)]
struct TrainBbcArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    database: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Code length, split as c1 x c2 with c1 the largest divisor <= d [default: 64].
    #[arg(long)]
    bits: Option<usize>,
    /// Explicit code rows; requires --c2.
    #[arg(long, requires = "c2")]
    c1: Option<usize>,
    /// Explicit code columns; requires --c1.
    #[arg(long, requires = "c1")]
    c2: Option<usize>,
    /// Weight of the image/video agreement term [default: 1].
    #[arg(long)]
    mu: Option<f64>,
    /// Maximum sweeps [default: 10].
    #[arg(long)]
    iters: Option<usize>,
    /// Similarity source [default: categories].
    #[arg(long, value_enum)]
    delta: Option<Delta>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(clap::Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    database: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args, Debug)]
#[command(group(ArgGroup::new("mode").required(true).args(["exact", "model"])))]
#[command(group(ArgGroup::new("input").required(true).args(["image", "manifest"])))]
struct QueryArgs {
    /// Rank by exact point-to-subspace distance.
    #[arg(long, requires = "database")]
    exact: bool,
    /// Subspace database (exact search).
    #[arg(long)]
    database: Option<PathBuf>,
    /// Hashing model (Hamming search); requires --index.
    #[arg(long, requires = "index")]
    model: Option<PathBuf>,
    #[arg(long)]
    index: Option<PathBuf>,
    /// Query vector file; repeatable. The query id is the file stem.
    #[arg(long)]
    image: Vec<PathBuf>,
    /// Use every query-split image of this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Results per query [default: all videos].
    #[arg(long)]
    k: Option<usize>,
    /// Run file to write; prints to stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Cutoff for precision@k [default: 500].
    #[arg(long)]
    k: Option<usize>,
    /// Also write the key=value summary here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Per-query table (tab-separated) output.
    #[arg(long)]
    table: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Config(ConfigError),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Core(e) => match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Numerical => 3,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Config(e) => write!(f, "{}: {}", e.path.display(), e.message),
            Failure::Core(e) => write!(f, "{e}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

fn parse_enum<T: ValueEnum>(key: &str, raw: Option<&String>) -> Result<Option<T>, Failure> {
    raw.map(|s| T::from_str(s, false).map_err(|_| Failure::Usage(format!("config value {key} = {s:?} is not recognized"))))
        .transpose()
}

fn note(msg: impl std::fmt::Display) {
    eprintln!("{msg}");
}

fn synth_cmd(args: SynthArgs, cfg: &Config) -> CmdResult {
    let c = &cfg.synth;
    let d = SynthParams::default();
    let params = SynthParams {
        clusters: pick(args.clusters, c.clusters, d.clusters),
        videos_per_cluster: pick(args.videos_per_cluster, c.videos_per_cluster, d.videos_per_cluster),
        frames_per_video: pick(args.frames, c.frames, d.frames_per_video),
        d: pick(args.dim, c.dim, d.d),
        subspace_dim: pick(args.subspace_dim, c.subspace_dim, d.subspace_dim),
        noise: pick(args.noise, c.noise, d.noise),
        queries_per_cluster: pick(args.queries_per_cluster, c.queries_per_cluster, d.queries_per_cluster),
        seed: pick(args.seed, c.seed, d.seed),
    };
    let ds = Dataset::from_synth(synth::generate(&params)?);
    let manifest = ds.write(&args.out)?;
    note(format_args!(
        "wrote {} videos and {} images; manifest {}",
        ds.videos.len(),
        ds.images.len(),
        manifest.display()
    ));
    Ok(())
}

fn build_cmd(args: BuildArgs, cfg: &Config) -> CmdResult {
    let opts = BasisOptions {
        rel_tol: pick(args.rel_tol, cfg.build.rel_tol, BasisOptions::default().rel_tol),
        max_rank: args.max_rank.or(cfg.build.max_rank),
    };
    if !(opts.rel_tol > 0.0 && opts.rel_tol < 1.0) {
        return Err(Failure::Usage(format!("--rel-tol must lie in (0, 1), got {}", opts.rel_tol)));
    }
    if opts.max_rank == Some(0) {
        return Err(Failure::Usage("--max-rank must be at least 1".into()));
    }
    let ds = Dataset::load(&args.manifest)?;
    let db = pipeline::build_database(&ds.videos, opts)?;
    format::write_database(&args.out, &db)?;
    note(format_args!("wrote {} subspaces to {}", db.len(), args.out.display()));
    Ok(())
}

fn train_ibc_cmd(args: TrainIbcArgs, cfg: &Config) -> CmdResult {
    let c = &cfg.train_ibc;
    let defaults = IbcParams::default();
    let correlation = pick(args.correlation, parse_enum("train-ibc.correlation", c.correlation.as_ref())?, Correlation::TopM);
    let top_m = args.top_m.or(c.top_m);
    if top_m.is_some() && matches!(correlation, Correlation::Raw) {
        return Err(Failure::Usage("--top-m only applies to --correlation top-m".into()));
    }
    let params = IbcParams {
        bits: pick(args.bits, c.bits, defaults.bits),
        lambda: pick(args.lambda, c.lambda, defaults.lambda),
        outer_iters: pick(args.outer_iters, c.outer_iters, defaults.outer_iters),
        inner_iters: pick(args.iters, c.iters, defaults.inner_iters),
        seed: pick(args.seed, c.seed, defaults.seed),
    };
    let ds = Dataset::load(&args.manifest)?;
    let db = format::read_database(&args.database)?;
    let n = pipeline::training_images(&ds)?.len();
    let mode = match correlation {
        Correlation::Raw => CorrelationMode::Raw,
        Correlation::TopM => CorrelationMode::TopM(top_m.unwrap_or_else(|| pipeline::default_top_m(n))),
    };
    let train = pipeline::ibc_training(&ds, &db, mode)?;
    let model = pipeline::train_ibc_model(&train, params, mode)?;
    model.save(&args.out)?;
    note(format_args!("trained {}-bit ibc model on {n} images and {} videos; wrote {}", params.bits, db.len(), args.out.display()));
    Ok(())
}

fn train_bbc_cmd(args: TrainBbcArgs, cfg: &Config) -> CmdResult {
    let c = &cfg.train_bbc;
    let defaults = BbcParams::default();
    let ds = Dataset::load(&args.manifest)?;
    let db = format::read_database(&args.database)?;
    let d = db.first().map(|s| s.dim()).ok_or(Error::EmptyInput("subspace database"))?;
    let bits = args.bits.or(c.bits);
    let (c1, c2) = match (args.c1.or(c.c1), args.c2.or(c.c2)) {
        (Some(c1), Some(c2)) => {
            if let Some(b) = bits.filter(|&b| b != c1 * c2) {
                return Err(Failure::Usage(format!("--bits {b} contradicts --c1 {c1} x --c2 {c2}")));
            }
            (c1, c2)
        }
        (None, None) => pipeline::bbc_shape(bits.unwrap_or(64), d)?,
        _ => return Err(Failure::Usage("c1 and c2 must be given together".into())),
    };
    let params = BbcParams {
        c1,
        c2,
        mu: pick(args.mu, c.mu, defaults.mu),
        iters: pick(args.iters, c.iters, defaults.iters),
        seed: pick(args.seed, c.seed, defaults.seed),
    };
    let delta = match pick(args.delta, parse_enum("train-bbc.delta", c.delta.as_ref())?, Delta::Categories) {
        Delta::Categories => DeltaSource::Categories,
        Delta::Sources => DeltaSource::Sources,
    };
    let train = pipeline::bbc_training(&ds, &db, delta)?;
    let model = pipeline::train_bbc_model(&train, params)?;
    model.save(&args.out)?;
    note(format_args!("trained {c1}x{c2} bbc model; wrote {}", args.out.display()));
    Ok(())
}

fn encode_cmd(args: EncodeArgs) -> CmdResult {
    let model = ModelFile::load(&args.model)?;
    let db = format::read_database(&args.database)?;
    let index = pipeline::encode_index(&model, &db)?;
    index.save(&args.out)?;
    note(format_args!("encoded {} videos at {} bits; wrote {}", index.index.len(), model.bits(), args.out.display()));
    Ok(())
}

fn load_queries(args: &QueryArgs) -> Result<Vec<pipeline::Query>, Failure> {
    if let Some(m) = &args.manifest {
        let ds = Dataset::load(m)?;
        let qs = pipeline::queries(&ds);
        if qs.is_empty() {
            return Err(Error::EmptyInput("query images in manifest").into());
        }
        return Ok(qs);
    }
    args.image
        .iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, format::read_vector(p)?))
        })
        .collect()
}

fn query_cmd(args: QueryArgs, cfg: &Config) -> CmdResult {
    let queries = load_queries(&args)?;
    let k = args.k.or(cfg.query.k);
    let run = if args.exact {
        let db_path = args.database.as_deref().expect("clap requires --database");
        let db = format::read_database(db_path)?;
        pipeline::query_exact(&db, &queries, k.unwrap_or(db.len()))?
    } else {
        let model = ModelFile::load(args.model.as_deref().expect("mode group"))?;
        let index = IndexFile::load(args.index.as_deref().expect("clap requires --index"))?;
        pipeline::query_hashed(&model, &index, &queries, k.unwrap_or(index.index.len()))?
    };
    match &args.out {
        Some(p) => {
            run.save(p)?;
            note(format_args!("wrote {} queries to {}", run.queries.len(), p.display()));
        }
        None => print!("{}", run.to_text()),
    }
    Ok(())
}

fn ground_truth(manifest: &Manifest) -> GroundTruth {
    GroundTruth {
        queries: manifest
            .images
            .iter()
            .filter(|i| i.split == Split::Query)
            .map(|i| (i.id.clone(), i.category.clone()))
            .collect(),
        videos: manifest.videos.iter().map(|v| (v.id.clone(), v.category.clone())).collect(),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    Ok(format::write_atomic(path, text.as_bytes())?)
}

fn eval_cmd(args: EvalArgs, cfg: &Config) -> CmdResult {
    let k = pick(args.k, cfg.eval.k, 500);
    if k == 0 {
        return Err(Failure::Usage("--k must be at least 1".into()));
    }
    let manifest = Manifest::load(&args.manifest)?;
    let run = Run::load(&args.run)?;
    let report = evaluate(&run.rankings(), &ground_truth(&manifest), k)?;
    let summary = report.to_key_values();
    print!("{summary}");
    let _ = std::io::stdout().flush();
    for id in report.without_relevant() {
        note(format_args!("warning: no relevant video retrieved for query {id}"));
    }
    if let Some(p) = &args.report {
        write_text(p, &summary)?;
    }
    if let Some(p) = &args.table {
        write_text(p, &report.to_table())?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    let cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(Failure::Config)?,
        None => Config::default(),
    };
    match cli.command {
        Command::Synth(a) => synth_cmd(a, &cfg),
        Command::Build(a) => build_cmd(a, &cfg),
        Command::TrainIbc(a) => train_ibc_cmd(a, &cfg),
        Command::TrainBbc(a) => train_bbc_cmd(a, &cfg),
        Command::Encode(a) => encode_cmd(a),
        Command::Query(a) => query_cmd(a, &cfg),
        Command::Eval(a) => eval_cmd(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}
