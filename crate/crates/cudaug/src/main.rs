use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cudaug::augment::{self, AugmentJob, StrengthSource};
use cudaug::config::RunConfig;
use cudaug::error::{Error, Result};
use cudaug::{formats, server, simulate};
use cudaug_core::analysis::{accuracy_breakdown, alignment_gain, feature_alignment, weight_norm_variance};
use cudaug_core::longtail::{categorize, exp_profile, pareto_profile, subsample, PARETO_ALPHA};
use cudaug_core::rng::{derived_stream, domain};
use cudaug_core::MAX_STRENGTH;

/// Curriculum data augmentation for long-tailed recognition.
///
/// Set CUDAUG_LOG (error, warn, info, debug, trace) to control logging.
#[derive(Parser)]
#[command(name = "cudaug", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Augment every PNG in a directory.
    Augment(AugmentArgs),
    /// Write a long-tailed class profile as CSV (class_id,count).
    #[command(subcommand)]
    Profile(ProfileCmd),
    /// Select a long-tailed subset of a labelled dataset.
    Subsample(SubsampleArgs),
    /// Run the curriculum against the simulated learner.
    Simulate(SimulateArgs),
    /// Diagnostics over trainer-exported arrays.
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    /// Run the line-delimited JSON sidecar on stdio or TCP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Fixed strength for every file.
    #[arg(long, conflicts_with = "lol", required_unless_present = "lol")]
    strength: Option<u32>,
    /// LoL history CSV; files use the last epoch's level of their class.
    #[arg(long, requires = "labels")]
    lol: Option<PathBuf>,
    /// Labels CSV (sample,class_id) keyed by file name.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum ProfileCmd {
    /// Exponential decay from n_max with the given imbalance ratio.
    Exp {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        n_max: u32,
        #[arg(long)]
        imbalance: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power-law decay between n_max and n_min.
    Pareto {
        #[arg(long)]
        classes: usize,
        #[arg(long)]
        n_max: u32,
        #[arg(long)]
        n_min: u32,
        #[arg(long, default_value_t = PARETO_ALPHA)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SubsampleArgs {
    /// Labels CSV (sample,class_id).
    #[arg(long)]
    labels: PathBuf,
    /// Profile CSV (class_id,count).
    #[arg(long)]
    profile: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Kept sample names, one per line.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// LoL history CSV (epoch,class_id,level).
    #[arg(long)]
    history: PathBuf,
    /// JSON run manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// PNG line chart of mean level per class decile.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Variance of per-class L1 norms of classifier weights (one row per class).
    Weights {
        #[arg(long)]
        weights: PathBuf,
    },
    /// Per-class mean pairwise cosine of features (vector columns, then label).
    Alignment {
        #[arg(long)]
        features: PathBuf,
        /// Baseline features; when given, the output is the per-class gain.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overall and Many/Med/Few accuracy.
    Accuracy {
        /// Predictions CSV (prediction,label).
        #[arg(long)]
        predictions: PathBuf,
        /// Training profile CSV defining the categories.
        #[arg(long)]
        profile: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Listen on this address (e.g. 127.0.0.1:7070) instead of stdio.
    #[arg(long)]
    tcp: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CUDAUG_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::Batch { failures, .. } = &e {
                for (path, msg) in failures {
                    eprintln!("  {}: {msg}", path.display());
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Augment(a) => cmd_augment(a),
        Command::Profile(p) => cmd_profile(p),
        Command::Subsample(s) => cmd_subsample(s),
        Command::Simulate(s) => cmd_simulate(s),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Serve(s) => cmd_serve(s),
    }
}

fn cmd_augment(a: AugmentArgs) -> Result<()> {
    let strength = match (a.strength, a.lol, a.labels) {
        (Some(s), _, _) if s > MAX_STRENGTH => return Err(Error::Usage(format!("--strength must be at most {MAX_STRENGTH}"))),
        (Some(s), _, _) => StrengthSource::Fixed(s),
        (None, Some(lol), Some(labels)) => {
            let table = formats::load_history(&lol)?;
            if table.history().is_empty() {
                return Err(Error::Data(format!("{}: empty history", lol.display())));
            }
            StrengthSource::per_class(table.levels().to_vec(), &formats::load_labels(&labels)?)
        }
        _ => return Err(Error::Usage("give --strength, or --lol with --labels".into())),
    };
    let job = AugmentJob { input: a.input, output: a.output, strength, seed: a.seed, threads: a.threads };
    let manifest = augment::run(&job)?;
    log::info!("augmented {} files", manifest.files.len());
    Ok(())
}

fn cmd_profile(p: ProfileCmd) -> Result<()> {
    let (profile, out) = match p {
        ProfileCmd::Exp { classes, n_max, imbalance, out } => (exp_profile(classes, n_max, imbalance)?, out),
        ProfileCmd::Pareto { classes, n_max, n_min, alpha, out } => (pareto_profile(classes, n_max, n_min, alpha)?, out),
    };
    formats::write_profile(&profile, output(out.as_deref())?)
}

fn cmd_subsample(s: SubsampleArgs) -> Result<()> {
    let labels = formats::load_labels(&s.labels)?;
    let profile = formats::load_profile(&s.profile)?;
    let ids: Vec<usize> = labels.iter().map(|r| r.class_id).collect();
    let kept = subsample(&ids, &profile, &mut derived_stream(s.seed, &[domain::SUBSAMPLE]))?;
    let mut out = output(s.out.as_deref())?;
    let path = s.out.unwrap_or_else(|| "<stdout>".into());
    for i in kept {
        writeln!(out, "{}", labels[i].sample).map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))
}

fn cmd_simulate(s: SimulateArgs) -> Result<()> {
    let cfg = RunConfig::load(&s.config)?;
    let base = s.config.parent().unwrap_or(Path::new("."));
    let setup = cfg.setup(base)?;
    let run = simulate::simulate(&setup).map_err(|e| Error::Data(e.to_string()))?;
    formats::save_history(&run.table, &s.history)?;
    if let Some(path) = &s.manifest {
        let json = serde_json::to_vec_pretty(&run.manifest).expect("manifest serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path, e))?;
    }
    if let Some(path) = &s.plot {
        std::fs::write(path, simulate::render_plot(&run.table)).map_err(|e| Error::io(path, e))?;
    }
    log::info!("simulated {} epochs in {} us", run.manifest.epochs.len(), run.manifest.total_micros);
    Ok(())
}

fn cmd_analyze(a: AnalyzeCmd) -> Result<()> {
    match a {
        AnalyzeCmd::Weights { weights } => {
            let w = formats::load_weights(&weights)?;
            let v = weight_norm_variance(&w)?;
            println!("metric,value\nweight_norm_variance,{v}");
            Ok(())
        }
        AnalyzeCmd::Alignment { features, base, out } => {
            let treated = feature_alignment(&formats::load_features(&features)?);
            for w in &treated.skipped {
                log::warn!("class {} has {} sample(s); alignment skipped", w.class_id, w.samples);
            }
            match base {
                None => formats::write_alignment(&treated, output(out.as_deref())?),
                Some(base) => {
                    let base = feature_alignment(&formats::load_features(&base)?);
                    let gain = alignment_gain(&base, &treated)?;
                    formats::write_gain(&gain, output(out.as_deref())?)
                }
            }
        }
        AnalyzeCmd::Accuracy { predictions, profile, out } => {
            let (pred, labels) = formats::load_predictions(&predictions)?;
            let masks = categorize(&formats::load_profile(&profile)?);
            let b = accuracy_breakdown(&pred, &labels, &masks)?;
            formats::write_breakdown(&b, output(out.as_deref())?)
        }
    }
}

fn cmd_serve(s: ServeArgs) -> Result<()> {
    match s.tcp {
        None => server::serve_stdio().map_err(|e| Error::io("<stdio>", e)),
        Some(addr) => {
            let listener = server::bind(&addr).map_err(|e| Error::io(&addr, e))?;
            let local = listener.local_addr().map_err(|e| Error::io(&addr, e))?;
            eprintln!("listening on {local}");
            server::serve_listener(listener).map_err(|e| Error::io(&addr, e))
        }
    }
}
