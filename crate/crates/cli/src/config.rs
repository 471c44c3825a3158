//! Run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use drugrank::experiment::ExperimentConfig;
use drugrank::metrics::DEFAULT_KS;
use drugrank::pretrain::PretrainConfig;
use drugrank::ranker::TrainConfig;
use drugrank::LossKind;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Fold whose model embeds cells and drugs.
    pub fold: usize,
    pub knn_ks: Vec<usize>,
    pub cell_clusters: usize,
    pub drug_clusters: usize,
    pub top_clusters: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            fold: 0,
            knn_ks: vec![1, 3, 5],
            cell_clusters: 20,
            drug_clusters: 10,
            top_clusters: 10,
        }
    }
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub responses: Option<PathBuf>,
    pub expression: Option<PathBuf>,
    pub fingerprints: Option<PathBuf>,
    /// `[n_cells, n_drugs, n_types]` of a generated benchmark.
    pub synthetic: Option<[usize; 3]>,
    /// Directory of per-fold checkpoints (default `<output>/checkpoints`).
    pub checkpoint: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub loss: LossKind,
    pub percentile: f64,
    pub n_folds: usize,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub tau: f64,
    #[serde(alias = "M")]
    pub drug_dim: usize,
    pub drug_hidden: usize,
    pub latent_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub seed: u64,
    pub ks: Vec<usize>,
    pub jobs: usize,
    pub analysis: AnalysisConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            responses: None,
            expression: None,
            fingerprints: None,
            synthetic: None,
            checkpoint: None,
            output: None,
            loss: LossKind::ListAll,
            percentile: 5.0,
            n_folds: 5,
            pretrain_epochs: 100,
            epochs: 300,
            batch_size: 32,
            lr: 1e-3,
            tau: 0.5,
            drug_dim: 100,
            drug_hidden: 128,
            latent_dim: 128,
            encoder_hidden: vec![4096, 1024],
            seed: 0,
            ks: DEFAULT_KS.to_vec(),
            jobs: 1,
            analysis: AnalysisConfig::default(),
        }
    }
}

/// Flags shared by every subcommand; each overrides the config-file value.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// JSON config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    pub expression: Option<PathBuf>,
    #[arg(long)]
    pub fingerprints: Option<PathBuf>,
    /// Generate a planted benchmark instead of reading data files
    #[arg(long, num_args = 3, value_names = ["N_CELLS", "N_DRUGS", "N_TYPES"])]
    pub synthetic: Option<Vec<usize>>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Output directory
    #[arg(long = "out")]
    pub output: Option<PathBuf>,
    /// list_one or list_all
    #[arg(long)]
    pub loss: Option<LossKind>,
    #[arg(long)]
    pub percentile: Option<f64>,
    #[arg(long)]
    pub n_folds: Option<usize>,
    #[arg(long)]
    pub pretrain_epochs: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Drug embedding width M
    #[arg(long)]
    pub drug_dim: Option<usize>,
    #[arg(long)]
    pub drug_hidden: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Comma-separated hidden widths of the expression encoder
    #[arg(long, value_delimiter = ',')]
    pub encoder_hidden: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated cut-offs
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    /// Folds trained in parallel
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Fold whose model `analyze` uses
    #[arg(long)]
    pub fold: Option<usize>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::config(msg)
}

impl RunConfig {
    /// Reads `path` (an empty file means all defaults).
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        if text.trim().is_empty() {
            return Ok(RunConfig::default());
        }
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    pub fn apply_flags(&mut self, f: &ConfigFlags) -> Result<(), CliError> {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &f.$field {
                    self.$field = v.clone().into();
                }
            )*};
        }
        set!(responses, expression, fingerprints, checkpoint, output);
        set!(loss, percentile, n_folds, pretrain_epochs, epochs, batch_size, lr, tau);
        set!(drug_dim, drug_hidden, latent_dim, encoder_hidden, seed, ks, jobs);
        if let Some(s) = &f.synthetic {
            let shape: [usize; 3] = s
                .as_slice()
                .try_into()
                .map_err(|_| config_err("synthetic takes exactly three values"))?;
            self.synthetic = Some(shape);
        }
        if let Some(fold) = f.fold {
            self.analysis.fold = fold;
        }
        Ok(())
    }

    /// Resolves file then flags, and validates the result.
    pub fn resolve(flags: &ConfigFlags) -> Result<Self, CliError> {
        let mut cfg = match &flags.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        cfg.apply_flags(flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: usize| {
            if v == 0 {
                Err(config_err(format!("{name} must be at least 1")))
            } else {
                Ok(())
            }
        };
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(config_err("percentile must be in (0,100)"));
        }
        if self.n_folds < 2 {
            return Err(config_err("n_folds must be at least 2"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(config_err("lr must be positive and finite"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(config_err("tau must be positive and finite"));
        }
        positive("epochs", self.epochs)?;
        positive("batch_size", self.batch_size)?;
        positive("drug_dim", self.drug_dim)?;
        positive("drug_hidden", self.drug_hidden)?;
        positive("latent_dim", self.latent_dim)?;
        positive("jobs", self.jobs)?;
        if self.encoder_hidden.contains(&0) {
            return Err(config_err("encoder_hidden widths must be at least 1"));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(config_err("ks must be a non-empty list of positive cut-offs"));
        }
        if self.analysis.knn_ks.is_empty() || self.analysis.knn_ks.contains(&0) {
            return Err(config_err("analysis.knn_ks must be a non-empty list of positive values"));
        }
        positive("analysis.cell_clusters", self.analysis.cell_clusters)?;
        positive("analysis.drug_clusters", self.analysis.drug_clusters)?;
        positive("analysis.top_clusters", self.analysis.top_clusters)?;
        if self.analysis.fold >= self.n_folds {
            return Err(config_err("analysis.fold must be below n_folds"));
        }
        if let Some([cells, drugs, types]) = self.synthetic {
            if types == 0 || cells < self.n_folds.max(types) {
                return Err(config_err(
                    "synthetic needs at least one cancer type and at least max(n_folds, n_types) cells",
                ));
            }
            if drugs < 2 {
                return Err(config_err("synthetic needs at least 2 drugs"));
            }
            if self.responses.is_some() || self.expression.is_some() || self.fingerprints.is_some() {
                return Err(config_err("synthetic cannot be combined with responses/expression/fingerprints"));
            }
        }
        Ok(())
    }

    pub fn output_dir(&self) -> Result<&Path, CliError> {
        self.output
            .as_deref()
            .ok_or_else(|| config_err("output must be set (--out)"))
    }

    pub fn checkpoint_dir(&self) -> Result<PathBuf, CliError> {
        Ok(match &self.checkpoint {
            Some(p) => p.clone(),
            None => self.output_dir()?.join("checkpoints"),
        })
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            percentile: self.percentile,
            n_folds: self.n_folds,
            seed: self.seed,
            encoder_hidden: self.encoder_hidden.clone(),
            latent_dim: self.latent_dim,
            pretrain: PretrainConfig {
                epochs: self.pretrain_epochs,
                batch_size: self.batch_size,
                lr: self.lr,
                seed: self.seed,
            },
            train: TrainConfig {
                loss: self.loss,
                epochs: self.epochs,
                lr: self.lr,
                tau: self.tau,
                drug_hidden: self.drug_hidden,
                drug_dim: self.drug_dim,
                seed: self.seed,
            },
            ks: self.ks.clone(),
        }
    }
}
