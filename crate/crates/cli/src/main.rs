use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use patchad::evalkit;
use patchad::ipca::IpcaModel;
use patchad::normlib::{self, SavedNormalizer};
use patchad::runner::{self, ExperimentConfig, GridConfig};

#[derive(Parser)]
#[command(name = "patchad", version, about = "Patch-feature anomaly detection experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a manifest and both feature stores against each other.
    Validate(ExperimentArgs),
    /// Fit the normalizer and IPCA on the training store and save them.
    Fit(ExperimentArgs),
    /// Score the test store using models saved by `fit`.
    Score {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Directory holding normalizer.json and ipca.ipc (defaults to --out).
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Compute AUC and EER from a per-frame scores CSV.
    Eval {
        #[arg(long)]
        scores: PathBuf,
    },
    /// Run one experiment end to end.
    Run(ExperimentArgs),
    /// Sweep extractors x dims x normalizations from a grid config.
    Grid(GridArgs),
}

#[derive(Args, Clone, Default)]
struct AnnArgs {
    /// Nearest-neighbour backend: exact or approx.
    #[arg(long)]
    ann_mode: Option<String>,
    #[arg(long)]
    ann_trees: Option<usize>,
    /// Maximum leaf visits per approximate query.
    #[arg(long)]
    ann_budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML experiment config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    train_store: Option<PathBuf>,
    #[arg(long)]
    test_store: Option<PathBuf>,
    /// zscore, zeroone, l1 or l2.
    #[arg(long)]
    norm: Option<String>,
    #[arg(long)]
    dims: Option<usize>,
    #[command(flatten)]
    ann: AnnArgs,
}

#[derive(Args, Clone)]
struct GridArgs {
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    ann: AnnArgs,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let (Some(m), Some(tr), Some(te)) = (&self.manifest, &self.train_store, &self.test_store) else {
                    bail!("--manifest, --train-store and --test-store are required without --config");
                };
                ExperimentConfig::new(m, tr, te)
            }
        };
        if let Some(m) = &self.manifest {
            cfg.manifest = m.clone();
        }
        if let Some(p) = &self.train_store {
            cfg.train_store = p.clone();
        }
        if let Some(p) = &self.test_store {
            cfg.test_store = p.clone();
        }
        if let Some(n) = &self.norm {
            cfg.norm = n.clone();
        }
        if let Some(d) = self.dims {
            cfg.dims = d;
        }
        let a = &self.ann;
        if let Some(m) = &a.ann_mode {
            cfg.ann.mode = m.clone();
        }
        if let Some(t) = a.ann_trees {
            cfg.ann.trees = t;
        }
        if let Some(b) = a.ann_budget {
            cfg.ann.budget = b;
        }
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
        if let Some(o) = &a.out {
            cfg.out = Some(o.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn require_out(cfg: &ExperimentConfig) -> Result<&Path> {
    cfg.out.as_deref().context("--out is required for this command")
}

fn validate(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let inputs = runner::load_inputs(&cfg)?;
    println!(
        "ok: dataset {} extractor {} dim {} train {} frames / {} rows, test {} frames / {} rows",
        inputs.manifest.name,
        inputs.train.header().extractor_name,
        inputs.train.dim(),
        inputs.train.n_frames(),
        inputs.train.n_rows(),
        inputs.test.n_frames(),
        inputs.test.n_rows(),
    );
    Ok(())
}

fn fit(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let out = require_out(&cfg)?;
    let inputs = runner::load_inputs(&cfg)?;
    let (normalizer, ipca) = runner::fit_models(&cfg, &inputs.train)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    normalizer.save().write(out.join(runner::NORMALIZER_FILE))?;
    ipca.write(out.join(runner::IPCA_FILE))?;
    println!(
        "fitted {} normalizer and {}-component IPCA on {} rows into {}",
        cfg.norm,
        ipca.n_components(),
        ipca.n_seen(),
        out.display()
    );
    Ok(())
}

fn score(args: &ExperimentArgs, models: Option<&Path>) -> Result<()> {
    let cfg = args.resolve()?;
    let out = require_out(&cfg)?;
    let models = models.unwrap_or(out);
    let normalizer = normlib::restore(&SavedNormalizer::read(models.join(runner::NORMALIZER_FILE))?)?;
    let ipca = IpcaModel::read(models.join(runner::IPCA_FILE))?;
    let inputs = runner::load_inputs(&cfg)?;
    if ipca.n_features() != inputs.train.dim() {
        bail!("IPCA model expects dim {} but stores have dim {}", ipca.n_features(), inputs.train.dim());
    }
    let index = runner::build_index(&cfg, &inputs.train, normalizer.as_ref(), &ipca)?;
    let scores = runner::score_test(
        &cfg,
        &inputs.manifest,
        &inputs.test,
        normalizer.as_ref(),
        &ipca,
        index.as_ref(),
    )?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let path = out.join(runner::SCORES_FILE);
    evalkit::write_scores_csv(&path, &scores)?;
    println!("scored {} test frames into {}", scores.len(), path.display());
    Ok(())
}

fn eval(scores: &Path) -> Result<()> {
    let scores = evalkit::read_scores_csv(scores)?;
    let report = evalkit::roc_auc(&scores)?;
    println!(
        "frames {} positives {} negatives {} auc {:.4} eer {:.4}",
        scores.len(),
        report.positives,
        report.negatives,
        report.auc,
        report.eer
    );
    Ok(())
}

fn run(args: &ExperimentArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let record = runner::run_experiment(&cfg)?;
    for t in &record.timings {
        log::info!("stage {} took {:.3}s", t.stage, t.seconds);
    }
    println!(
        "{} {} k={} {} auc {:.4} eer {:.4}",
        record.dataset, record.extractor, cfg.dims, cfg.norm, record.auc, record.eer
    );
    Ok(())
}

fn grid(args: &GridArgs) -> Result<()> {
    let mut cfg = GridConfig::load(&args.config)?;
    let a = &args.ann;
    if let Some(m) = &a.ann_mode {
        cfg.ann.mode = m.clone();
    }
    if let Some(t) = a.ann_trees {
        cfg.ann.trees = t;
    }
    if let Some(b) = a.ann_budget {
        cfg.ann.budget = b;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = &a.out {
        cfg.out = Some(o.clone());
    }
    let rows = runner::run_grid(&cfg, |row| match (row.auc, row.eer) {
        (Some(auc), Some(eer)) => println!(
            "{} k={} {}: auc {:.4} eer {:.4}",
            row.extractor, row.ipca_dims, row.normalization, auc, eer
        ),
        _ => println!("{} k={} {}: failed: {}", row.extractor, row.ipca_dims, row.normalization, row.error),
    })?;
    let failed = rows.iter().filter(|(r, _)| !r.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} of {} cells failed", rows.len());
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Fit(a) => fit(a),
        Command::Score { exp, models } => score(exp, models.as_deref()),
        Command::Eval { scores } => eval(scores),
        Command::Run(a) => run(a),
        Command::Grid(a) => grid(a),
    }
}
