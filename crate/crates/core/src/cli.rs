//! `voxdx` command-line driver.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::dsp::decode_wav;
use crate::error::{Error, Result};
use crate::features::{batch_extract, extract, load_cache, save_cache, FeatureCache, Manifest};
use crate::pipeline::{
    cross_validate, load_hyperparams, load_model, train_pipeline, tune, HyperparamsFile, ModelFile,
    ModelKind, ReportFile,
};
use crate::synth::{gen_corpus, CorpusSpec, MANIFEST_NAME};

#[derive(Debug, Parser)]
#[command(
    name = "voxdx",
    version,
    about = "Voice-disorder classification from sustained vowels"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,

    /// Override the seed (corpus seed for `synth`, evaluation seed otherwise).
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus and its manifest.
    Synth(SynthArgs),
    /// Extract per-clip feature vectors into a cache file.
    Extract(ExtractArgs),
    /// Search hyperparameters with SHAC.
    Tune(TuneArgs),
    /// Fit a model on the whole cache.
    Train(TrainArgs),
    /// Cross-validate tuned hyperparameters and report scores.
    Evaluate(EvaluateArgs),
    /// Label WAV files with a trained model.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// TOML corpus specification.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Total clip count, split in the spec's class proportions.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Number of cepstral coefficients d (vectors have 3d values).
    #[arg(long)]
    pub n_mfcc: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub cache: PathBuf,
    /// Best-hyperparameters file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Search log; defaults to the output path with a `.log` extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, default_value = "svm-pipeline")]
    pub model_kind: ModelKind,
    /// Evaluation budget, capped at the configured budget.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub hyperparams: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub cache: PathBuf,
    #[arg(long)]
    pub hyperparams: PathBuf,
    /// JSON report to write; the table is printed to stdout.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false, id = "input")]
pub struct PredictInput {
    #[arg(long)]
    pub wav: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub input: PredictInput,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.cv.seed = seed;
    }
    Ok(cfg)
}

fn parent_dir(path: &Path) -> &Path {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<CorpusSpec>(&text)
                .map_err(|e| Error::Config(format!("{}: {}", p.display(), e.message())))?
        }
        None => CorpusSpec::default(),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    if let Some(n) = a.n {
        spec = spec.with_total(n);
    }
    let manifest = gen_corpus(&spec, &a.out)?;
    eprintln!(
        "wrote {} clips (seed {}) and {}",
        manifest.len(),
        spec.seed,
        a.out.join(MANIFEST_NAME).display()
    );
    Ok(())
}

fn cmd_extract(cli: &Cli, a: &ExtractArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(d) = a.n_mfcc {
        cfg.features.mfcc.n_mfcc = d;
        cfg.features.validate()?;
    }
    let manifest = Manifest::read(&a.manifest)?;
    let table = batch_extract(&manifest, parent_dir(&a.manifest), &cfg.features)?;
    save_cache(&a.out, &FeatureCache::new(cfg.features, table.clone()))?;
    eprintln!(
        "extracted {} rows x {} features to {}",
        table.len(),
        table.width(),
        a.out.display()
    );
    Ok(())
}

fn cmd_tune(cli: &Cli, a: &TuneArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(b) = a.budget {
        cfg.shac.budget = b.min(cfg.shac.budget);
    }
    if let Some(k) = a.k {
        cfg.cv.k = k;
    }
    cfg.validate()?;
    let cache = load_cache(&a.cache)?;
    let space = cfg.space(a.model_kind);
    let out = tune(
        &cache.table,
        a.model_kind,
        &space,
        &cfg.shac,
        &cfg.eval_settings(),
        cfg.cv.tune_seed,
        cfg.cv.seed,
    )?;
    HyperparamsFile::new(
        out.best,
        Some(out.d),
        cfg.cv.tune_seed,
        cfg.cv.seed,
        out.eval_score,
        out.fallback,
    )
    .save(&a.out)?;
    let log = a.log.clone().unwrap_or_else(|| a.out.with_extension("log"));
    write_text(&log, &out.log(&space))?;
    eprintln!(
        "{} evaluations, {} candidates{}; best evaluation-fold score {:.4}",
        out.search.n_evaluations(),
        out.candidates.len(),
        if out.fallback {
            " (fallback to best evaluated)"
        } else {
            ""
        },
        out.eval_score
    );
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let cache = load_cache(&a.cache)?;
    let hp = load_hyperparams(&a.hyperparams)?;
    let (table, extract_cfg) = hp.select(&cache)?;
    let labels: Vec<_> = table.rows().iter().map(|r| r.label).collect();
    let pipeline = train_pipeline(
        &table.features(),
        &table.labels(),
        &hp.hyperparams,
        cfg.cv.seed,
        &cfg.model,
    )?;
    let n_selected = pipeline.n_selected();
    ModelFile::new(
        extract_cfg,
        cfg.model,
        pipeline,
        cfg.cv.seed,
        &labels,
        Some(hp.eval_score),
    )
    .save(&a.out)?;
    eprintln!(
        "trained {} on {} rows ({} of {} features selected)",
        hp.hyperparams.kind(),
        labels.len(),
        n_selected,
        table.width()
    );
    Ok(())
}

fn cmd_evaluate(cli: &Cli, a: &EvaluateArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(k) = a.k {
        cfg.cv.k = k;
    }
    cfg.validate()?;
    let cache = load_cache(&a.cache)?;
    let hp = load_hyperparams(&a.hyperparams)?;
    let (table, _) = hp.select(&cache)?;
    let cv = cross_validate(&table, &hp.hyperparams, cfg.cv.seed, &cfg.eval_settings())?;
    let report = ReportFile::new(hp.hyperparams, table.d(), &cv);
    report.save(&a.out)?;
    print!("{}", report.to_table());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let classify = |path: &Path| -> Result<String> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let fv = extract(&decode_wav(&bytes)?, &model.extract)?;
        Ok(model.pipeline.predict(fv.values())?.to_string())
    };
    if let Some(wav) = &a.input.wav {
        println!("{}", classify(wav)?);
    } else if let Some(m) = &a.input.manifest {
        let manifest = Manifest::read(m)?;
        let base = parent_dir(m);
        for e in &manifest.entries {
            println!("{}", classify(&base.join(&e.path))?);
        }
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cli.jobs)))?;
    pool.install(|| match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Extract(a) => cmd_extract(cli, a),
        Command::Tune(a) => cmd_tune(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Evaluate(a) => cmd_evaluate(cli, a),
        Command::Predict(a) => cmd_predict(a),
    })
}

/// Parse `args`, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.category().exit_code()
        }
    }
}
