//! Subcommand implementations. Every command reads its inputs, writes into
//! the output directory (or the checkpoint directory) and stamps each
//! directory it wrote with config and provenance.

use std::path::{Path, PathBuf};

use drugrank::analysis::{
    category_distributions, cell_response_similarity, cluster_overlap_similarity,
    drug_sensitivity_similarity, intra_cluster_summary, kmeans_cluster, knn_accuracy, rbf_similarity,
    similarity_correlation, top_compact_clusters, ClusterSummary, KnnAccuracy, ResponseIndex,
    SimilarityCorrelation,
};
use drugrank::checkpoint;
use drugrank::dataset::{
    load_expression, load_fingerprints, load_responses, make_lco_folds, write_expression_csv,
    write_fingerprints_csv, Dataset, FoldAssignment,
};
use drugrank::experiment::{
    evaluate_fold, map_folds, pretrain_fold, train_fold, FoldModel, MODEL_CHECKPOINT_KIND,
};
use drugrank::metrics::{aggregate, write_cell_report_csv, CellMetrics, MetricReport};
use drugrank::pretrain::{EncoderCheckpoint, EpochLoss, ENCODER_CHECKPOINT_KIND};
use drugrank::synth::{generate, SyntheticSpec};
use drugrank::LossKind;
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::provenance::{create_dir, stamp, write_json};
use crate::{CliError, RunConfig};

pub const FOLDS_FILE: &str = "folds.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const METRICS_FILE: &str = "metrics.json";

struct Loaded {
    dataset: Dataset,
    inputs: Vec<PathBuf>,
}

/// Loads the three input tables, generating them first for `--synthetic`.
fn load_data(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let (responses, expression, fingerprints) = match cfg.synthetic {
        Some([n_cells, n_drugs, n_types]) => {
            let dir = cfg.output_dir()?.join("data");
            create_dir(&dir)?;
            let spec = SyntheticSpec::new(n_cells, n_drugs, n_types, cfg.seed);
            let paths = (dir.join("responses.csv"), dir.join("expression.csv"), dir.join("fingerprints.csv"));
            // Regenerate only when the recorded spec differs, so later
            // commands read the same files instead of rewriting them.
            let spec_path = dir.join("synthetic.json");
            let current = serde_json::to_string_pretty(&spec).expect("spec serializes") + "\n";
            let fresh = std::fs::read_to_string(&spec_path).ok().as_deref() == Some(current.as_str())
                && [&paths.0, &paths.1, &paths.2].iter().all(|p| p.exists());
            if !fresh {
                let data = generate(&spec)?;
                data.responses.write_csv(&paths.0)?;
                write_expression_csv(&paths.1, &data.cells)?;
                write_fingerprints_csv(&paths.2, &data.drugs)?;
                std::fs::write(&spec_path, current)
                    .map_err(|e| CliError::data(format!("{}: {e}", spec_path.display())))?;
            }
            paths
        }
        None => {
            let need = |p: &Option<PathBuf>, key: &str| {
                p.clone()
                    .ok_or_else(|| CliError::config(format!("{key} must be set (or use --synthetic)")))
            };
            (
                need(&cfg.responses, "responses")?,
                need(&cfg.expression, "expression")?,
                need(&cfg.fingerprints, "fingerprints")?,
            )
        }
    };
    let dataset = Dataset::assemble(
        &load_responses(&responses)?,
        &load_expression(&expression)?,
        &load_fingerprints(&fingerprints)?,
        cfg.percentile,
    )?;
    Ok(Loaded {
        dataset,
        inputs: vec![responses, expression, fingerprints],
    })
}

/// Reads the fold file written by `split`.
fn load_folds(cfg: &RunConfig, loaded: &mut Loaded) -> Result<FoldAssignment, CliError> {
    let path = cfg.output_dir()?.join(FOLDS_FILE);
    if !path.exists() {
        return Err(CliError::data(format!(
            "missing fold assignment {} (run `split` first)",
            path.display()
        )));
    }
    let folds = FoldAssignment::read_csv(&path, &loaded.dataset.cells, cfg.seed)?;
    if folds.n_folds != cfg.n_folds {
        return Err(CliError::config(format!(
            "n_folds is {} but {} holds {} folds",
            cfg.n_folds,
            path.display(),
            folds.n_folds
        )));
    }
    loaded.inputs.push(path);
    Ok(folds)
}

fn fold_dir(cfg: &RunConfig, fold: usize) -> Result<PathBuf, CliError> {
    Ok(cfg.checkpoint_dir()?.join(format!("fold{fold}")))
}

fn encoder_path(cfg: &RunConfig, fold: usize) -> Result<PathBuf, CliError> {
    Ok(fold_dir(cfg, fold)?.join("encoder.json"))
}

fn model_path(cfg: &RunConfig, fold: usize) -> Result<PathBuf, CliError> {
    Ok(fold_dir(cfg, fold)?.join("model.json"))
}

fn write_loss_log(path: &Path, log: &[EpochLoss]) -> Result<(), CliError> {
    let mut text = String::from("epoch,loss\n");
    for e in log {
        text.push_str(&format!("{},{}\n", e.epoch, e.loss));
    }
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn load_model(cfg: &RunConfig, fold: usize) -> Result<(FoldModel, PathBuf), CliError> {
    let path = model_path(cfg, fold)?;
    if !path.exists() {
        return Err(CliError::data(format!(
            "missing model checkpoint {} (run `train` first)",
            path.display()
        )));
    }
    let model: FoldModel = checkpoint::load(&path, MODEL_CHECKPOINT_KIND)?;
    if model.fold != fold {
        return Err(CliError::data(format!("{} holds fold {}, expected {fold}", path.display(), model.fold)));
    }
    if model.loss != cfg.loss {
        return Err(CliError::config(format!(
            "loss is {} but {} was trained with {}",
            cfg.loss,
            path.display(),
            model.loss
        )));
    }
    Ok((model, path))
}

pub fn split(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let out = cfg.output_dir()?.to_path_buf();
    create_dir(&out)?;
    let loaded = load_data(cfg)?;
    let folds = make_lco_folds(&loaded.dataset.cells, cfg.n_folds, cfg.seed)?;
    folds.write_csv(&out.join(FOLDS_FILE))?;
    stamp(&out, cfg, command, &loaded.inputs)
}

pub fn pretrain(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let out = cfg.output_dir()?.to_path_buf();
    let mut loaded = load_data(cfg)?;
    let folds = load_folds(cfg, &mut loaded)?;
    let exp = cfg.experiment();
    let results = map_folds(folds.n_folds, cfg.jobs, |fold| pretrain_fold(&loaded.dataset, &folds, fold, &exp))?;
    let logs = out.join("logs");
    create_dir(&logs)?;
    for (fold, (encoder, log)) in results.iter().enumerate() {
        create_dir(&fold_dir(cfg, fold)?)?;
        checkpoint::save(&encoder_path(cfg, fold)?, ENCODER_CHECKPOINT_KIND, encoder)?;
        write_loss_log(&logs.join(format!("pretrain_fold{fold}.csv")), log)?;
    }
    stamp(&cfg.checkpoint_dir()?, cfg, command, &loaded.inputs)?;
    stamp(&out, cfg, command, &loaded.inputs)
}

pub fn train(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let out = cfg.output_dir()?.to_path_buf();
    let mut loaded = load_data(cfg)?;
    let folds = load_folds(cfg, &mut loaded)?;
    let mut encoders = Vec::with_capacity(folds.n_folds);
    for fold in 0..folds.n_folds {
        let path = encoder_path(cfg, fold)?;
        if !path.exists() {
            return Err(CliError::data(format!(
                "missing encoder checkpoint {} (run `pretrain` first)",
                path.display()
            )));
        }
        let enc: EncoderCheckpoint = checkpoint::load(&path, ENCODER_CHECKPOINT_KIND)?;
        encoders.push(enc);
        loaded.inputs.push(path);
    }
    let exp = cfg.experiment();
    let results = map_folds(folds.n_folds, cfg.jobs, |fold| {
        train_fold(&loaded.dataset, &folds, fold, &encoders[fold], &exp)
    })?;
    let logs = out.join("logs");
    create_dir(&logs)?;
    for (fold, (model, log)) in results.iter().enumerate() {
        checkpoint::save(&model_path(cfg, fold)?, MODEL_CHECKPOINT_KIND, model)?;
        write_loss_log(&logs.join(format!("train_fold{fold}.csv")), log)?;
    }
    stamp(&cfg.checkpoint_dir()?, cfg, command, &loaded.inputs)?;
    stamp(&out, cfg, command, &loaded.inputs)
}

/// A metric report laid out like a results-table row: `AP@k` and `AH@k`
/// columns in cut-off order, then CI and sCI, then skip counts.
pub struct TableRow<'a>(pub &'a MetricReport);

impl Serialize for TableRow<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let r = self.0;
        let mut m = s.serialize_map(None)?;
        m.serialize_entry("fold", &r.fold)?;
        m.serialize_entry("n_cells", &r.n_cells)?;
        for a in &r.at_k {
            m.serialize_entry(&format!("AP@{}", a.k), &a.ap)?;
        }
        for a in &r.at_k {
            m.serialize_entry(&format!("AH@{}", a.k), &a.ah)?;
        }
        m.serialize_entry("CI", &r.ci)?;
        m.serialize_entry("sCI", &r.sci)?;
        for a in &r.at_k {
            m.serialize_entry(&format!("AP@{}_skipped", a.k), &a.ap_skipped)?;
        }
        m.serialize_entry("CI_skipped", &r.ci_skipped)?;
        m.serialize_entry("sCI_skipped", &r.sci_skipped)?;
        m.end()
    }
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    loss: LossKind,
    n_folds: usize,
    seed: u64,
    overall: TableRow<'a>,
    folds: Vec<TableRow<'a>>,
}

pub fn evaluate(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let out = cfg.output_dir()?.to_path_buf();
    let mut loaded = load_data(cfg)?;
    let folds = load_folds(cfg, &mut loaded)?;
    let mut models = Vec::with_capacity(folds.n_folds);
    for fold in 0..folds.n_folds {
        let (model, path) = load_model(cfg, fold)?;
        models.push(model);
        loaded.inputs.push(path);
    }
    let per_fold: Vec<Vec<CellMetrics>> = map_folds(folds.n_folds, cfg.jobs, |fold| {
        evaluate_fold(&loaded.dataset, &folds, &models[fold], &cfg.ks)
    })?;
    let reports = per_fold
        .iter()
        .enumerate()
        .map(|(fold, cells)| aggregate(cells, Some(fold)))
        .collect::<drugrank::Result<Vec<_>>>()?;
    let all: Vec<CellMetrics> = per_fold.into_iter().flatten().collect();
    let overall = aggregate(&all, None)?;

    create_dir(&out)?;
    write_cell_report_csv(&out.join(REPORT_FILE), &all)?;
    write_json(
        &out.join(METRICS_FILE),
        &MetricsDocument {
            loss: cfg.loss,
            n_folds: folds.n_folds,
            seed: cfg.seed,
            overall: TableRow(&overall),
            folds: reports.iter().map(TableRow).collect(),
        },
    )?;
    stamp(&out, cfg, command, &loaded.inputs)
}

#[derive(Serialize)]
struct ClusterReport {
    k: usize,
    summaries: Vec<ClusterSummary>,
    top_compact: Vec<usize>,
}

#[derive(Serialize)]
struct AnalysisSummary {
    fold: usize,
    corr_c_latent_vs_response: SimilarityCorrelation,
    corr_d_latent_vs_sensitivity: SimilarityCorrelation,
    knn: Vec<KnnAccuracy>,
    cell_clusters: ClusterReport,
    drug_clusters: ClusterReport,
    cancer_types: Vec<String>,
}

fn write_embeddings(path: &Path, ids: &[String], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut text = String::from("id");
    for j in 0..dim {
        text.push_str(&format!(",e_{j}"));
    }
    text.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        text.push_str(id);
        for v in row {
            text.push_str(&format!(",{v}"));
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn analyze(cfg: &RunConfig, command: &str) -> Result<(), CliError> {
    let out = cfg.output_dir()?.to_path_buf();
    let dir = out.join("analysis");
    let mut loaded = load_data(cfg)?;
    let fold = cfg.analysis.fold;
    let (model, path) = load_model(cfg, fold)?;
    loaded.inputs.push(path);
    let ds = &loaded.dataset;

    let cell_emb = ds
        .cells
        .iter()
        .map(|c| model.embed_cell(&c.expression))
        .collect::<drugrank::Result<Vec<_>>>()?;
    let drug_emb = ds
        .drugs
        .iter()
        .map(|d| model.model.encode_drug(&d.fingerprint_f64()))
        .collect::<drugrank::Result<Vec<_>>>()?;
    let cell_ids: Vec<String> = ds.cells.iter().map(|c| c.cell_id.clone()).collect();
    let drug_ids: Vec<String> = ds.drugs.iter().map(|d| d.drug_id.clone()).collect();
    let types: Vec<String> = ds.cells.iter().map(|c| c.cancer_type.clone()).collect();

    let index = ResponseIndex::new(&ds.labeled);
    let all_cells: Vec<usize> = (0..ds.cells.len()).collect();
    let all_drugs: Vec<usize> = (0..ds.drugs.len()).collect();
    let cell_latent = rbf_similarity(&cell_emb, None)?;
    let cell_response = cell_response_similarity(&index, &all_cells);
    let drug_latent = rbf_similarity(&drug_emb, None)?;
    let drug_sens = drug_sensitivity_similarity(&index, &all_drugs, &all_cells);

    let knn = cfg
        .analysis
        .knn_ks
        .iter()
        .filter(|&&k| k < cell_emb.len())
        .map(|&k| knn_accuracy(&cell_emb, &types, k))
        .collect::<drugrank::Result<Vec<_>>>()?;

    let cluster = |emb: &[Vec<f64>], k: usize| kmeans_cluster(emb, k.min(emb.len()), cfg.seed);
    let cell_clustering = cluster(&cell_emb, cfg.analysis.cell_clusters)?;
    let drug_clustering = cluster(&drug_emb, cfg.analysis.drug_clusters)?;
    let cell_summary = intra_cluster_summary(&cell_clustering, &cell_latent, &cell_response)?;
    let drug_summary = intra_cluster_summary(&drug_clustering, &drug_latent, &drug_sens)?;
    let cell_top = top_compact_clusters(&cell_summary, cfg.analysis.top_clusters);
    let drug_top = top_compact_clusters(&drug_summary, cfg.analysis.top_clusters);
    let (type_names, dists) = category_distributions(&cell_clustering, &types, &cell_top)?;
    let overlap = cluster_overlap_similarity(&dists)?;

    create_dir(&dir)?;
    write_embeddings(&dir.join("cell_embeddings.csv"), &cell_ids, &cell_emb)?;
    write_embeddings(&dir.join("drug_embeddings.csv"), &drug_ids, &drug_emb)?;
    cell_latent.write_csv(&dir.join("cell_latent_similarity.csv"), &cell_ids)?;
    cell_response.write_csv(&dir.join("cell_response_similarity.csv"), &cell_ids)?;
    drug_latent.write_csv(&dir.join("drug_latent_similarity.csv"), &drug_ids)?;
    drug_sens.write_csv(&dir.join("drug_sensitivity_similarity.csv"), &drug_ids)?;
    cell_clustering.write_csv(&dir.join("cell_clusters.csv"), &cell_ids)?;
    drug_clustering.write_csv(&dir.join("drug_clusters.csv"), &drug_ids)?;
    overlap.write_csv(&dir.join("cancer_type_overlap.csv"), &type_names)?;

    let summary = AnalysisSummary {
        fold,
        corr_c_latent_vs_response: similarity_correlation(&cell_latent, &cell_response)?,
        corr_d_latent_vs_sensitivity: similarity_correlation(&drug_latent, &drug_sens)?,
        knn,
        cell_clusters: ClusterReport {
            k: cell_clustering.k,
            summaries: cell_summary,
            top_compact: cell_top,
        },
        drug_clusters: ClusterReport {
            k: drug_clustering.k,
            summaries: drug_summary,
            top_compact: drug_top,
        },
        cancer_types: type_names,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    stamp(&dir, cfg, command, &loaded.inputs)
}
