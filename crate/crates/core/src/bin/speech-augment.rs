use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use speech_augment::audio_io::{canonicalize, load_wav, save_wav, save_wav_f32};
use speech_augment::eval::{crossfold_report, parse_trn, score};
use speech_augment::manifest::{load_manifest, make_folds_for, plan_doubling, to_jsonl, Group, Method};
use speech_augment::pipeline::{augment_clip, run_augmentation, Augmentation, MethodParams, RunConfig};
use speech_augment::pitch::{compute_beta, PitchModSpec};
use speech_augment::reverb::{default_room, generate_rir, ImpulseResponse, RoomSpec};
use speech_augment::spectral::{extract_features, read_features, synthesize_from_features, write_features};
use speech_augment::vtlp::{sample_alpha, WarpSpec};
use speech_augment::{seed, Error};

#[derive(Parser)]
#[command(name = "speech-augment", version, about = "Deterministic speech data augmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment a manifest (batch) or a single file.
    Augment(AugmentArgs),
    /// Simulate a shoebox-room impulse response and write it as float WAV.
    Rir(RirArgs),
    /// Phone error rate of hypotheses against references (.trn files).
    Score(ScoreArgs),
    /// Validate manifests, build folds, plan doubling.
    #[command(subcommand)]
    Manifest(ManifestCommand),
    /// Mel-cepstral feature files (MCP1).
    #[command(subcommand)]
    Features(FeaturesCommand),
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, requires = "out", conflicts_with_all = ["input", "output"])]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, requires = "output")]
    input: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Fixed VTLP warp factor (default: drawn per record from the grid).
    #[arg(long)]
    alpha: Option<f64>,
    /// Impulse response WAV (default: simulated room per record).
    #[arg(long)]
    rir: Option<PathBuf>,
    #[arg(long, conflicts_with = "beta_from_stats")]
    beta: Option<f64>,
    /// JSON arrays of per-speaker mean F0 for the CLP and normal groups.
    #[arg(long, num_args = 2, value_names = ["CLP_JSON", "NORMAL_JSON"])]
    beta_from_stats: Option<Vec<PathBuf>>,
    #[arg(long)]
    factor: Option<f64>,
    /// CLP recording to match the speaking rate of (single-file mode).
    #[arg(long)]
    pair: Option<PathBuf>,
    /// Pairing file `<normal-id> <clp-wav>` per line (batch mode).
    #[arg(long)]
    pairs: Option<PathBuf>,
}

#[derive(Args)]
struct RirArgs {
    #[arg(long)]
    out: PathBuf,
    /// Seed for the default room's source/microphone jitter.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Room size in metres, `Lx,Ly,Lz`.
    #[arg(long, value_parser = parse_triple)]
    room: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple)]
    source: Option<[f64; 3]>,
    #[arg(long, value_parser = parse_triple)]
    mic: Option<[f64; 3]>,
    /// Reflection coefficient for all six walls.
    #[arg(long)]
    reflection: Option<f64>,
    #[arg(long)]
    order: Option<u32>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long = "ref", required = true)]
    refs: Vec<PathBuf>,
    #[arg(long = "hyp", required = true)]
    hyps: Vec<PathBuf>,
    /// Write the per-utterance TSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum ManifestCommand {
    Validate {
        path: PathBuf,
    },
    Folds {
        path: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "CLP", value_parser = parse_group)]
        group: Group,
    },
    Double {
        path: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum FeaturesCommand {
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    Synth {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: speech_augment::manifest::ManifestError| e.to_string())
}

fn parse_group(s: &str) -> Result<Group, String> {
    match s.to_ascii_uppercase().as_str() {
        "CLP" => Ok(Group::Clp),
        "NORMAL" => Ok(Group::Normal),
        _ => Err(format!("unknown group {s:?}")),
    }
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let v: Vec<f64> = s.split(',').map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected three comma-separated numbers, got {s:?}"))
}

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPEECH_AUGMENT_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Augment(args) => augment(args),
        Command::Rir(args) => rir(args),
        Command::Score(args) => score_cmd(args),
        Command::Manifest(cmd) => manifest_cmd(cmd),
        Command::Features(cmd) => features_cmd(cmd),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn read_f0_list(path: &Path) -> Result<Vec<f64>, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn resolve_beta(args: &AugmentArgs) -> Result<Option<f64>, Box<dyn std::error::Error>> {
    if let Some(files) = &args.beta_from_stats {
        let est = compute_beta(&read_f0_list(&files[0])?, &read_f0_list(&files[1])?)?;
        log::info!("pitch factor from statistics: {}", est.beta);
        return Ok(Some(est.beta));
    }
    Ok(args.beta)
}

fn augment(args: AugmentArgs) -> CliResult {
    let beta = resolve_beta(&args)?;
    if let (Some(manifest), Some(out)) = (&args.manifest, &args.out) {
        let config = RunConfig {
            method: args.method,
            seed: args.seed,
            input_manifest: manifest.clone(),
            output_dir: out.clone(),
            params: MethodParams { alpha: args.alpha, rir: args.rir, beta, factor: args.factor, pairs: args.pairs },
            worker_count: args.workers,
        };
        let summary = run_augmentation(&config)?;
        println!("{} of {} augmented records written; manifest {}", summary.succeeded, summary.planned, summary.output_manifest.display());
        if summary.is_success() {
            return Ok(ExitCode::SUCCESS);
        }
        eprintln!("{} record(s) failed:", summary.failures.len());
        for f in &summary.failures {
            eprintln!("  {} (from {}): {}", f.id, f.source_id, f.error);
        }
        return Ok(ExitCode::from(2));
    }

    let (Some(input), Some(output)) = (&args.input, &args.output) else {
        return Err("give either --manifest with --out, or --input with --output".into());
    };
    let clip = canonicalize(&load_wav(input)?)?;
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let record_seed = seed::record_seed(args.seed, &stem);
    let aug = match args.method {
        Method::Vtlp => Augmentation::Vtlp(WarpSpec::new(args.alpha.unwrap_or_else(|| sample_alpha(record_seed)))?),
        Method::Reverb => match &args.rir {
            Some(path) => Augmentation::Reverb(ImpulseResponse::from_clip(&canonicalize(&load_wav(path)?)?)),
            None => Augmentation::Reverb(generate_rir(&default_room(record_seed))?),
        },
        Method::Pitch => Augmentation::Pitch(PitchModSpec::new(beta.ok_or("pitch needs --beta or --beta-from-stats")?)?),
        Method::Rate => match (&args.pair, args.factor) {
            (Some(pair), _) => Augmentation::RateMatch(canonicalize(&load_wav(pair)?)?),
            (None, Some(f)) => Augmentation::RateFactor(f),
            (None, None) => return Err("rate needs --pair or --factor".into()),
        },
        Method::CycleganFeatures => {
            let (features, pitch) = extract_features(&clip)?;
            write_features(output, &features, &pitch)?;
            println!("{} frames × {} written to {}", features.frame_count, features.dim, output.display());
            return Ok(ExitCode::SUCCESS);
        }
    };
    let out = augment_clip(&clip, &aug)?;
    let clipped = save_wav(&out, output)?;
    if clipped > 0 {
        log::warn!("{clipped} samples clipped");
    }
    Ok(ExitCode::SUCCESS)
}

fn rir(args: RirArgs) -> CliResult {
    let mut room: RoomSpec = default_room(args.seed);
    if let Some(d) = args.room {
        room.dimensions = d;
    }
    if let Some(s) = args.source {
        room.source = s;
    }
    if let Some(m) = args.mic {
        room.mic = m;
    }
    if let Some(b) = args.reflection {
        room.reflection_coeffs = [b; 6];
    }
    if let Some(o) = args.order {
        room.max_order = o;
    }
    let ir = generate_rir(&room)?;
    save_wav_f32(&ir.to_clip("rir"), &args.out)?;
    println!("{} taps at {} Hz written to {}", ir.samples.len(), ir.sample_rate, args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn read_trn(path: &Path) -> Result<Vec<(String, speech_augment::eval::PhoneSequence)>, Box<dyn std::error::Error>> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(parse_trn(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn score_cmd(args: ScoreArgs) -> CliResult {
    if args.refs.len() != args.hyps.len() {
        return Err(format!("{} --ref files but {} --hyp files", args.refs.len(), args.hyps.len()).into());
    }
    let mut tsv = String::new();
    let mut fold_pers = Vec::new();
    for (k, (r, h)) in args.refs.iter().zip(&args.hyps).enumerate() {
        let report = score(&read_trn(r)?, &read_trn(h)?)?;
        if args.refs.len() > 1 {
            tsv.push_str(&format!("# fold {}\t{}\t{}\n", k + 1, r.display(), h.display()));
        }
        tsv.push_str(&report.to_tsv());
        fold_pers.push(report.corpus_per);
    }
    if fold_pers.len() == 3 {
        let cf = crossfold_report(&fold_pers)?;
        tsv.push_str(&format!(
            "# fold_per\t{:.2}\t{:.2}\t{:.2}\n# crossfold_mean_per\t{:.2}\n",
            cf.folds[0], cf.folds[1], cf.folds[2], cf.mean
        ));
    } else if fold_pers.len() > 1 {
        log::warn!("cross-fold mean needs exactly 3 ref/hyp pairs; got {}", fold_pers.len());
    }
    match args.out {
        Some(path) => std::fs::write(&path, tsv).map_err(|e| format!("{}: {e}", path.display()))?,
        None => print!("{tsv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn manifest_cmd(cmd: ManifestCommand) -> CliResult {
    match cmd {
        ManifestCommand::Validate { path } => {
            let records = load_manifest(&path)?;
            let originals = records.iter().filter(|r| r.is_original()).count();
            println!("{}: {} records ({} original, {} augmented)", path.display(), records.len(), originals, records.len() - originals);
        }
        ManifestCommand::Folds { path, seed, group } => {
            let plan = make_folds_for(&load_manifest(&path)?, group, seed)?;
            println!("{}", serde_json::to_string_pretty(&plan)?);
        }
        ManifestCommand::Double { path, method, seed, out } => {
            let plan = plan_doubling(&load_manifest(&path)?, method, seed);
            let text = to_jsonl(&plan);
            match out {
                Some(out) => std::fs::write(&out, text).map_err(|e| format!("{}: {e}", out.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn features_cmd(cmd: FeaturesCommand) -> CliResult {
    match cmd {
        FeaturesCommand::Extract { input, output } => {
            let clip = canonicalize(&load_wav(&input)?)?;
            let (features, pitch) = extract_features(&clip).map_err(Error::from)?;
            write_features(&output, &features, &pitch)?;
        }
        FeaturesCommand::Synth { input, output } => {
            let (features, pitch) = read_features(&input)?;
            let clip = synthesize_from_features(&features, &pitch)?;
            save_wav(&clip, &output)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}
