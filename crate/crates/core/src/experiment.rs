//! Leave-cell-lines-out harness: for every fold, fit the expression
//! standardizer and pretrain the autoencoder on the training cells only,
//! finetune the ranker on the training cells' lists, and score the held-out
//! cells.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FoldAssignment, Standardizer};
use crate::error::{Error, Result};
use crate::losses::{top_one_target, ListTarget, LossKind};
use crate::metrics::{aggregate, evaluate_cell, CellMetrics, MetricReport, DEFAULT_KS};
use crate::pretrain::{
    pretrain, AutoencoderDims, EncoderCheckpoint, EpochLoss, GeneAutoencoder, PretrainConfig,
};
use crate::ranker::{train, RankModel, TrainConfig, TrainingList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub percentile: f64,
    pub n_folds: usize,
    pub seed: u64,
    pub encoder_hidden: Vec<usize>,
    pub latent_dim: usize,
    pub pretrain: PretrainConfig,
    pub train: TrainConfig,
    pub ks: Vec<usize>,
}

impl ExperimentConfig {
    /// Encoder 4,096/1,024/128, drug encoder 128/100, 100 pretraining and
    /// 300 ranking epochs at learning rate 0.001.
    pub fn full_scale(loss: LossKind, seed: u64) -> Self {
        ExperimentConfig {
            percentile: 5.0,
            n_folds: 5,
            seed,
            encoder_hidden: vec![4096, 1024],
            latent_dim: 128,
            pretrain: PretrainConfig {
                seed,
                ..PretrainConfig::default()
            },
            train: TrainConfig {
                loss,
                seed,
                ..TrainConfig::default()
            },
            ks: DEFAULT_KS.to_vec(),
        }
    }

    /// Same schedule with layer widths small enough for a laptop core:
    /// encoder 64/32/16, drug encoder 32/16.
    pub fn desk(loss: LossKind, seed: u64) -> Self {
        let mut cfg = Self::full_scale(loss, seed);
        cfg.encoder_hidden = vec![64, 32];
        cfg.latent_dim = 16;
        cfg.train.drug_hidden = 32;
        cfg.train.drug_dim = 16;
        cfg
    }

    pub fn autoencoder_dims(&self, genes: usize) -> AutoencoderDims {
        AutoencoderDims {
            input: genes,
            hidden: self.encoder_hidden.clone(),
            latent: self.latent_dim,
        }
    }

    fn fold_seed(&self, fold: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(fold as u64)
    }
}

/// A finetuned ranker for one fold with the expression transform it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldModel {
    pub fold: usize,
    pub loss: LossKind,
    pub standardizer: Standardizer,
    pub model: RankModel<f64>,
}

pub const MODEL_CHECKPOINT_KIND: &str = "rank_model";

impl FoldModel {
    pub fn embed_cell(&self, expression: &[f64]) -> Result<Vec<f64>> {
        self.model.encode_cell(&self.standardizer.apply(expression)?)
    }
}

pub fn fingerprints(dataset: &Dataset) -> Vec<Vec<f64>> {
    dataset.drugs.iter().map(|d| d.fingerprint_f64()).collect()
}

fn check_folds(dataset: &Dataset, folds: &FoldAssignment, fold: usize) -> Result<()> {
    if folds.folds.len() != dataset.cells.len() {
        return Err(Error::shape(format!(
            "fold assignment covers {} cells, dataset has {}",
            folds.folds.len(),
            dataset.cells.len()
        )));
    }
    if fold >= folds.n_folds {
        return Err(Error::Config(format!("fold {fold} out of range (n_folds = {})", folds.n_folds)));
    }
    if folds.train_cells(fold).is_empty() {
        return Err(Error::domain(format!("fold {fold} leaves no training cells")));
    }
    Ok(())
}

/// Fits the standardizer and pretrains the autoencoder on the fold's training cells.
pub fn pretrain_fold(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    cfg: &ExperimentConfig,
) -> Result<(EncoderCheckpoint, Vec<EpochLoss>)> {
    check_folds(dataset, folds, fold)?;
    let train_cells = folds.train_cells(fold);
    let standardizer = Standardizer::fit(
        train_cells
            .iter()
            .map(|&c| dataset.cells[c].expression.as_slice()),
    )?;
    let inputs = train_cells
        .iter()
        .map(|&c| standardizer.apply(&dataset.cells[c].expression))
        .collect::<Result<Vec<_>>>()?;
    let dims = cfg.autoencoder_dims(dataset.n_genes());
    let seed = cfg.fold_seed(fold);
    let init = GeneAutoencoder::new(&dims, seed);
    let pcfg = PretrainConfig {
        seed,
        ..cfg.pretrain
    };
    let outcome = pretrain(init, &inputs, &pcfg)?;
    Ok((
        EncoderCheckpoint {
            dims,
            standardizer,
            autoencoder: outcome.autoencoder,
        },
        outcome.log,
    ))
}

/// Training lists of the given cells with targets for `loss`.
pub fn training_lists(
    dataset: &Dataset,
    cells: &[usize],
    standardizer: &Standardizer,
    loss: LossKind,
) -> Result<Vec<TrainingList<f64>>> {
    cells
        .iter()
        .map(|&c| {
            let list = dataset.labeled.cell_list(c);
            let target = match loss {
                LossKind::ListOne => ListTarget::TopOne(top_one_target(&list.aucs)?),
                LossKind::ListAll => ListTarget::Labels(list.labels),
            };
            Ok(TrainingList {
                expression: standardizer.apply(&dataset.cells[c].expression)?,
                drugs: list.drugs,
                target,
            })
        })
        .collect()
}

/// Finetunes the pretrained encoder together with a fresh drug encoder and scorer.
pub fn train_fold(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    encoder: &EncoderCheckpoint,
    cfg: &ExperimentConfig,
) -> Result<(FoldModel, Vec<EpochLoss>)> {
    check_folds(dataset, folds, fold)?;
    if encoder.dims.input != dataset.n_genes() {
        return Err(Error::Config(format!(
            "encoder checkpoint expects {} genes, data has {}",
            encoder.dims.input,
            dataset.n_genes()
        )));
    }
    let seed = cfg.fold_seed(fold);
    let lists = training_lists(dataset, &folds.train_cells(fold), &encoder.standardizer, cfg.train.loss)?;
    let init = RankModel::new(
        encoder.autoencoder.encoder.clone(),
        dataset.n_bits(),
        cfg.train.drug_hidden,
        cfg.train.drug_dim,
        seed ^ 0xd5c6,
    )?;
    let tcfg = TrainConfig { seed, ..cfg.train };
    let outcome = train(init, &lists, &fingerprints(dataset), &tcfg)?;
    Ok((
        FoldModel {
            fold,
            loss: cfg.train.loss,
            standardizer: encoder.standardizer.clone(),
            model: outcome.model,
        },
        outcome.log,
    ))
}

/// Metrics of `cells` under an arbitrary scorer `(cell, drugs) → scores`.
pub fn evaluate_cells_with<F>(
    dataset: &Dataset,
    cells: &[usize],
    fold: usize,
    ks: &[usize],
    mut scorer: F,
) -> Result<Vec<CellMetrics>>
where
    F: FnMut(usize, &[usize]) -> Result<Vec<f64>>,
{
    cells
        .iter()
        .map(|&c| {
            let list = dataset.labeled.cell_list(c);
            let scores = scorer(c, &list.drugs)?;
            evaluate_cell(fold, &dataset.cells[c].cell_id, &list.aucs, &scores, &list.labels, ks)
        })
        .collect()
}

/// Metrics of the fold's held-out cells.
pub fn evaluate_fold(
    dataset: &Dataset,
    folds: &FoldAssignment,
    model: &FoldModel,
    ks: &[usize],
) -> Result<Vec<CellMetrics>> {
    check_folds(dataset, folds, model.fold)?;
    let fps = fingerprints(dataset);
    evaluate_cells_with(dataset, &folds.test_cells(model.fold), model.fold, ks, |c, drugs| {
        let x = model.standardizer.apply(&dataset.cells[c].expression)?;
        Ok(model.model.score_list(&x, drugs, &fps)?.scores)
    })
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub model: FoldModel,
    pub encoder: EncoderCheckpoint,
    pub pretrain_log: Vec<EpochLoss>,
    pub train_log: Vec<EpochLoss>,
    pub cells: Vec<CellMetrics>,
    pub report: MetricReport,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: Vec<FoldResult>,
    /// Means over every held-out cell of every fold.
    pub overall: MetricReport,
}

pub fn run_fold(
    dataset: &Dataset,
    folds: &FoldAssignment,
    fold: usize,
    cfg: &ExperimentConfig,
) -> Result<FoldResult> {
    let (encoder, pretrain_log) = pretrain_fold(dataset, folds, fold, cfg)?;
    let (model, train_log) = train_fold(dataset, folds, fold, &encoder, cfg)?;
    let cells = evaluate_fold(dataset, folds, &model, &cfg.ks)?;
    let report = aggregate(&cells, Some(fold))?;
    Ok(FoldResult {
        fold,
        model,
        encoder,
        pretrain_log,
        train_log,
        cells,
        report,
    })
}

/// Runs `f(fold)` for every fold on up to `jobs` threads; results come back in fold order.
pub fn map_folds<R, F>(n_folds: usize, jobs: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync,
{
    let jobs = jobs.clamp(1, n_folds.max(1));
    if jobs == 1 {
        return (0..n_folds).map(&f).collect();
    }
    let mut slots: Vec<Option<Result<R>>> = (0..n_folds).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..jobs)
            .map(|worker| {
                scope.spawn(move || {
                    (worker..n_folds)
                        .step_by(jobs)
                        .map(|fold| (fold, f(fold)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (fold, r) in h.join().expect("fold worker panicked") {
                slots[fold] = Some(r);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every fold ran")).collect()
}

pub fn run_cv(
    dataset: &Dataset,
    folds: &FoldAssignment,
    cfg: &ExperimentConfig,
    jobs: usize,
) -> Result<CvResult> {
    let results = map_folds(folds.n_folds, jobs, |fold| run_fold(dataset, folds, fold, cfg))?;
    let all_cells: Vec<CellMetrics> = results.iter().flat_map(|r| r.cells.clone()).collect();
    let overall = aggregate(&all_cells, None)?;
    Ok(CvResult {
        folds: results,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_lco_folds;
    use crate::synth::{generate, SyntheticSpec};

    fn tiny() -> (Dataset, FoldAssignment, ExperimentConfig) {
        let mut spec = SyntheticSpec::new(20, 12, 2, 4);
        spec.n_genes = 6;
        spec.n_bits = 16;
        let data = generate(&spec).unwrap();
        let ds = Dataset::assemble(&data.responses, &data.cells, &data.drugs, 5.0).unwrap();
        let folds = make_lco_folds(&ds.cells, 3, 4).unwrap();
        let mut cfg = ExperimentConfig::desk(LossKind::ListAll, 4);
        cfg.n_folds = 3;
        cfg.encoder_hidden = vec![8];
        cfg.latent_dim = 4;
        cfg.train.drug_hidden = 8;
        cfg.train.drug_dim = 4;
        cfg.pretrain.epochs = 3;
        cfg.train.epochs = 3;
        (ds, folds, cfg)
    }

    #[test]
    fn parallel_matches_sequential() {
        let (ds, folds, cfg) = tiny();
        let a = run_cv(&ds, &folds, &cfg, 1).unwrap();
        let b = run_cv(&ds, &folds, &cfg, 3).unwrap();
        assert_eq!(a.overall, b.overall);
        for (x, y) in a.folds.iter().zip(&b.folds) {
            assert_eq!(x.model, y.model);
        }
        assert_eq!(a.overall.n_cells, 20);
    }

    #[test]
    fn pretraining_sees_only_training_cells() {
        let (ds, folds, cfg) = tiny();
        let (ckpt, _) = pretrain_fold(&ds, &folds, 1, &cfg).unwrap();
        let train: Vec<&[f64]> = folds
            .train_cells(1)
            .iter()
            .map(|&c| ds.cells[c].expression.as_slice())
            .collect();
        assert_eq!(ckpt.standardizer, Standardizer::fit(train).unwrap());
    }

    #[test]
    fn fold_out_of_range() {
        let (ds, folds, cfg) = tiny();
        assert!(matches!(pretrain_fold(&ds, &folds, 7, &cfg), Err(Error::Config(_))));
    }
}
