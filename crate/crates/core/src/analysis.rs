//! Embedding-quality analyses: similarity matrices, correlations between
//! similarity structures, kNN cancer-type accuracy, k-means clustering and
//! intra-cluster summaries.
//!
//! Pairs that are undefined (too few shared drugs, no positives, zero
//! variance) are stored as `None` and counted, never imputed.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::squared_distance;
use crate::scalar::Scalar;

const SYMMETRY_TOL: f64 = 1e-12;
const KMEANS_MAX_ITER: usize = 300;
const KMEANS_SHIFT_TOL: f64 = 1e-8;
/// Minimum number of shared drugs for a Spearman correlation between cells.
pub const MIN_SHARED_DRUGS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    RbfLatent,
    SpearmanResponse,
    JaccardSensitivity,
    ClusterOverlap,
}

impl SimilarityKind {
    /// Entries must lie in `[0, 1]`.
    fn unit_range(self) -> bool {
        !matches!(self, SimilarityKind::SpearmanResponse)
    }

    /// Defined diagonal entries must equal 1.
    fn unit_diagonal(self) -> bool {
        matches!(
            self,
            SimilarityKind::RbfLatent | SimilarityKind::JaccardSensitivity
        )
    }
}

/// Symmetric `n × n` similarity matrix; `None` marks an undefined pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix<T> {
    pub kind: SimilarityKind,
    n: usize,
    entries: Vec<Option<T>>,
}

impl<T: Scalar> SimilarityMatrix<T> {
    /// Builds the matrix from a pair function evaluated on `i <= j` and mirrored.
    pub fn from_fn(kind: SimilarityKind, n: usize, mut f: impl FnMut(usize, usize) -> Option<T>) -> Self {
        let mut entries = vec![None; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        SimilarityMatrix { kind, n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.entries[i * self.n + j]
    }

    /// Number of undefined unordered off-diagonal pairs.
    pub fn undefined_pairs(&self) -> usize {
        self.upper_pairs().filter(|&(_, _, v)| v.is_none()).count()
    }

    /// Off-diagonal unordered pairs `(i, j, value)` with `i < j`.
    pub fn upper_pairs(&self) -> impl Iterator<Item = (usize, usize, Option<T>)> + '_ {
        (0..self.n).flat_map(move |i| (i + 1..self.n).map(move |j| (i, j, self.get(i, j))))
    }

    /// Checks symmetry, range and diagonal invariants for this kind.
    pub fn validate(&self) -> Result<()> {
        let lo = if self.kind.unit_range() { 0.0 } else { -1.0 };
        for i in 0..self.n {
            for j in 0..self.n {
                let a = self.get(i, j);
                match (a, self.get(j, i)) {
                    (Some(x), Some(y)) if (x.as_f64() - y.as_f64()).abs() <= SYMMETRY_TOL => {}
                    (None, None) => {}
                    _ => return Err(Error::domain(format!("similarity not symmetric at ({i}, {j})"))),
                }
                if let Some(x) = a {
                    let x = x.as_f64();
                    if !(lo..=1.0).contains(&x) {
                        return Err(Error::domain(format!("similarity {x} out of range at ({i}, {j})")));
                    }
                    if i == j && self.kind.unit_diagonal() && x != 1.0 {
                        return Err(Error::domain(format!("diagonal entry {i} is {x}, expected 1")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Dense CSV with a header row of labels; undefined entries are empty.
    pub fn write_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        if labels.len() != self.n {
            return Err(Error::shape(format!("{} labels for {} rows", labels.len(), self.n)));
        }
        let mut out = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header = vec![String::from("id")];
        header.extend(labels.iter().cloned());
        out.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (i, label) in labels.iter().enumerate() {
            let mut row = vec![label.clone()];
            row.extend((0..self.n).map(|j| self.get(i, j).map(|v| v.to_string()).unwrap_or_default()));
            out.write_record(&row).map_err(|e| csv_err(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn check_embeddings<T: Scalar>(embeddings: &[Vec<T>]) -> Result<usize> {
    let dim = embeddings.first().map_or(0, Vec::len);
    if let Some((i, e)) = embeddings.iter().enumerate().find(|(_, e)| e.len() != dim) {
        return Err(Error::shape(format!("embedding {i} has length {}, expected {dim}", e.len())));
    }
    Ok(dim)
}

/// `1 / median` of the pairwise squared distances (1 if the median is zero).
pub fn median_gamma<T: Scalar>(embeddings: &[Vec<T>]) -> T {
    let mut d: Vec<f64> = Vec::new();
    for i in 0..embeddings.len() {
        for j in i + 1..embeddings.len() {
            d.push(squared_distance(&embeddings[i], &embeddings[j]).as_f64());
        }
    }
    if d.is_empty() {
        return T::one();
    }
    d.sort_by(f64::total_cmp);
    let m = d.len();
    let median = if m % 2 == 1 { d[m / 2] } else { 0.5 * (d[m / 2 - 1] + d[m / 2]) };
    if median > 0.0 {
        T::lit(1.0 / median)
    } else {
        T::one()
    }
}

/// `S[i][j] = exp(-gamma · ‖e_i - e_j‖²)`; `gamma = None` uses [`median_gamma`].
pub fn rbf_similarity<T: Scalar>(embeddings: &[Vec<T>], gamma: Option<T>) -> Result<SimilarityMatrix<T>> {
    check_embeddings(embeddings)?;
    let gamma = gamma.unwrap_or_else(|| median_gamma(embeddings));
    if !(gamma >= T::zero()) || !gamma.is_finite() {
        return Err(Error::domain(format!("rbf gamma must be finite and non-negative, got {gamma}")));
    }
    Ok(SimilarityMatrix::from_fn(SimilarityKind::RbfLatent, embeddings.len(), |i, j| {
        if i == j {
            Some(T::one())
        } else {
            Some((-gamma * squared_distance(&embeddings[i], &embeddings[j])).exp())
        }
    }))
}

/// Pearson correlation of two equal-length samples.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("pearson: lengths {} and {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::domain(format!("pearson needs at least 3 points, got {}", x.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::domain("pearson: zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks with ties replaced by their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman's rho: Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("spearman: lengths {} and {}", x.len(), y.len())));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Dense cell × drug view of a labeled dataset for pairwise lookups.
#[derive(Clone, Debug)]
pub struct ResponseIndex {
    n_cells: usize,
    n_drugs: usize,
    auc: Vec<Option<f64>>,
    sensitive: Vec<bool>,
}

impl ResponseIndex {
    pub fn new(labeled: &LabeledDataset) -> Self {
        let n_cells = labeled.table.cells().len();
        let n_drugs = labeled.table.drugs().len();
        let mut auc = vec![None; n_cells * n_drugs];
        let mut sensitive = vec![false; n_cells * n_drugs];
        for (obs, &label) in labeled.table.observations().iter().zip(&labeled.labels) {
            auc[obs.cell * n_drugs + obs.drug] = Some(obs.auc);
            sensitive[obs.cell * n_drugs + obs.drug] = label;
        }
        ResponseIndex {
            n_cells,
            n_drugs,
            auc,
            sensitive,
        }
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_drugs(&self) -> usize {
        self.n_drugs
    }

    pub fn auc(&self, cell: usize, drug: usize) -> Option<f64> {
        self.auc[cell * self.n_drugs + drug]
    }

    /// `Some(label)` when the pair was observed.
    pub fn label(&self, cell: usize, drug: usize) -> Option<bool> {
        self.auc(cell, drug).map(|_| self.sensitive[cell * self.n_drugs + drug])
    }
}

/// Spearman correlation between two cells' AUCs over their shared drugs.
///
/// `None` when fewer than [`MIN_SHARED_DRUGS`] drugs are shared or either side
/// is constant.
pub fn spearman_shared(index: &ResponseIndex, p: usize, q: usize) -> Option<f64> {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for d in 0..index.n_drugs {
        if let (Some(x), Some(y)) = (index.auc(p, d), index.auc(q, d)) {
            a.push(x);
            b.push(y);
        }
    }
    if a.len() < MIN_SHARED_DRUGS {
        return None;
    }
    spearman(&a, &b).ok()
}

/// Jaccard coefficient of two drugs' sensitivity sets over their shared cells.
///
/// `None` when no cell is shared or neither drug is sensitive in any of them.
pub fn jaccard_sensitivity(index: &ResponseIndex, a: usize, b: usize) -> Option<f64> {
    let (mut both, mut either) = (0usize, 0usize);
    for c in 0..index.n_cells {
        if let (Some(x), Some(y)) = (index.label(c, a), index.label(c, b)) {
            both += usize::from(x && y);
            either += usize::from(x || y);
        }
    }
    (either > 0).then(|| both as f64 / either as f64)
}

/// Response-based similarity among `cells` (indices into the response table).
pub fn cell_response_similarity(index: &ResponseIndex, cells: &[usize]) -> SimilarityMatrix<f64> {
    SimilarityMatrix::from_fn(SimilarityKind::SpearmanResponse, cells.len(), |i, j| {
        spearman_shared(index, cells[i], cells[j])
    })
}

/// Sensitivity-profile similarity among `drugs`, computed over `cells` only.
pub fn drug_sensitivity_similarity(index: &ResponseIndex, drugs: &[usize], cells: &[usize]) -> SimilarityMatrix<f64> {
    let mut sub = ResponseIndex {
        n_cells: cells.len(),
        n_drugs: drugs.len(),
        auc: Vec::with_capacity(cells.len() * drugs.len()),
        sensitive: Vec::with_capacity(cells.len() * drugs.len()),
    };
    for &c in cells {
        for &d in drugs {
            sub.auc.push(index.auc(c, d));
            sub.sensitive.push(index.label(c, d).unwrap_or(false));
        }
    }
    SimilarityMatrix::from_fn(SimilarityKind::JaccardSensitivity, drugs.len(), |i, j| {
        jaccard_sensitivity(&sub, i, j)
    })
}

/// Pearson correlation between two similarity structures over off-diagonal pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCorrelation {
    pub pearson: Option<f64>,
    pub n_pairs: usize,
    pub skipped_pairs: usize,
}

pub fn similarity_correlation<T: Scalar, U: Scalar>(
    a: &SimilarityMatrix<T>,
    b: &SimilarityMatrix<U>,
) -> Result<SimilarityCorrelation> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("similarity sizes {} and {}", a.len(), b.len())));
    }
    let (mut x, mut y, mut skipped) = (Vec::new(), Vec::new(), 0);
    for (i, j, va) in a.upper_pairs() {
        match (va, b.get(i, j)) {
            (Some(u), Some(v)) => {
                x.push(u.as_f64());
                y.push(v.as_f64());
            }
            _ => skipped += 1,
        }
    }
    Ok(SimilarityCorrelation {
        pearson: pearson(&x, &y).ok(),
        n_pairs: x.len(),
        skipped_pairs: skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnAccuracy {
    pub k: usize,
    pub per_item: Vec<f64>,
    pub mean: f64,
}

/// Fraction of each item's `k` nearest neighbors (Euclidean, self excluded,
/// ties to the lower index) sharing its type.
pub fn knn_accuracy<T: Scalar, L: PartialEq>(embeddings: &[Vec<T>], types: &[L], k: usize) -> Result<KnnAccuracy> {
    check_embeddings(embeddings)?;
    let n = embeddings.len();
    if types.len() != n {
        return Err(Error::shape(format!("{} types for {n} embeddings", types.len())));
    }
    if k == 0 || k >= n {
        return Err(Error::domain(format!("knn k must be in [1, {n}), got {k}")));
    }
    let mut per_item = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| (squared_distance(&embeddings[i], &embeddings[j]).as_f64(), j))
            .collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits = others[..k].iter().filter(|&&(_, j)| types[j] == types[i]).count();
        per_item.push(hits as f64 / k as f64);
    }
    let mean = per_item.iter().sum::<f64>() / n as f64;
    Ok(KnnAccuracy { k, per_item, mean })
}

/// Hard assignment of items to `k` clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl Clustering {
    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == cluster).collect()
    }

    pub fn write_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        if labels.len() != self.assignment.len() {
            return Err(Error::shape(format!(
                "{} labels for {} items",
                labels.len(),
                self.assignment.len()
            )));
        }
        let mut out = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        out.write_record(["id", "cluster"]).map_err(|e| csv_err(path, e))?;
        for (label, c) in labels.iter().zip(&self.assignment) {
            out.write_record([label.as_str(), &c.to_string()]).map_err(|e| csv_err(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }
}

/// Full k-means result, including the objective after every assignment step.
#[derive(Clone, Debug)]
pub struct KMeansRun<T> {
    pub clustering: Clustering,
    pub centroids: Vec<Vec<T>>,
    /// Within-cluster sum of squares after each assignment step.
    pub objective: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans_cluster<T: Scalar>(embeddings: &[Vec<T>], k: usize, seed: u64) -> Result<Clustering> {
    kmeans_run(embeddings, k, seed).map(|r| r.clustering)
}

pub fn kmeans_run<T: Scalar>(embeddings: &[Vec<T>], k: usize, seed: u64) -> Result<KMeansRun<T>> {
    let dim = check_embeddings(embeddings)?;
    let n = embeddings.len();
    if k == 0 || k > n {
        return Err(Error::domain(format!("k-means k must be in [1, {n}], got {k}")));
    }
    let mut centroids = kmeans_pp(embeddings, k, seed);
    let mut assignment = vec![0usize; n];
    let mut objective = Vec::new();
    let mut iterations = 0;
    loop {
        let mut wcss = 0.0;
        for (i, e) in embeddings.iter().enumerate() {
            let (best, d) = nearest(e, &centroids);
            assignment[i] = best;
            wcss += d;
        }
        objective.push(wcss);
        if iterations == KMEANS_MAX_ITER {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for (e, &c) in embeddings.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(e) {
                *s += x;
            }
        }
        let mut shift = 0.0f64;
        for c in 0..k {
            // Empty clusters keep their previous centroid.
            if counts[c] == 0 {
                continue;
            }
            let m = T::lit(counts[c] as f64);
            let next: Vec<T> = sums[c].iter().map(|&s| s / m).collect();
            shift = shift.max(squared_distance(&next, &centroids[c]).as_f64().sqrt());
            centroids[c] = next;
        }
        if shift < KMEANS_SHIFT_TOL {
            let final_wcss = embeddings
                .iter()
                .zip(&assignment)
                .map(|(e, &c)| squared_distance(e, &centroids[c]).as_f64())
                .sum::<f64>();
            let stable = embeddings
                .iter()
                .zip(&assignment)
                .all(|(e, &c)| nearest(e, &centroids).0 == c);
            if stable {
                objective.push(final_wcss);
                break;
            }
        }
    }
    Ok(KMeansRun {
        clustering: Clustering { assignment, k, seed },
        centroids,
        objective,
        iterations,
    })
}

/// Nearest centroid and its squared distance; ties go to the lower index.
fn nearest<T: Scalar>(x: &[T], centroids: &[Vec<T>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let d = squared_distance(x, mu).as_f64();
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn kmeans_pp<T: Scalar>(embeddings: &[Vec<T>], k: usize, seed: u64) -> Vec<Vec<T>> {
    let n = embeddings.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = embeddings
        .iter()
        .map(|e| squared_distance(e, &embeddings[chosen[0]]).as_f64())
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // Guard against rounding landing on an already-covered point.
            if d2[pick] == 0.0 {
                pick = (0..n).rev().find(|&i| d2[i] > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            // Every point coincides with a centroid: fall back to the first unchosen index.
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, e) in embeddings.iter().enumerate() {
            d2[i] = d2[i].min(squared_distance(e, &embeddings[next]).as_f64());
        }
    }
    chosen.into_iter().map(|i| embeddings[i].clone()).collect()
}

/// Mean within-cluster similarity under two similarity structures.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub cluster: usize,
    pub size: usize,
    pub latent: Option<f64>,
    pub reference: Option<f64>,
    /// Within-cluster pairs whose reference similarity is undefined.
    pub reference_skipped: usize,
}

/// Per-cluster averages over unordered within-cluster pairs; singletons and
/// empty clusters are omitted.
pub fn intra_cluster_summary<T: Scalar, U: Scalar>(
    clustering: &Clustering,
    latent: &SimilarityMatrix<T>,
    reference: &SimilarityMatrix<U>,
) -> Result<Vec<ClusterSummary>> {
    let n = clustering.assignment.len();
    if latent.len() != n || reference.len() != n {
        return Err(Error::shape(format!(
            "clustering of {n} items vs similarity sizes {} and {}",
            latent.len(),
            reference.len()
        )));
    }
    let mut out = Vec::new();
    for c in 0..clustering.k {
        let members = clustering.members(c);
        if members.len() < 2 {
            continue;
        }
        let (mut ls, mut ln, mut rs, mut rn, mut skipped) = (0.0, 0usize, 0.0, 0usize, 0usize);
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if let Some(v) = latent.get(i, j) {
                    ls += v.as_f64();
                    ln += 1;
                }
                match reference.get(i, j) {
                    Some(v) => {
                        rs += v.as_f64();
                        rn += 1;
                    }
                    None => skipped += 1,
                }
            }
        }
        out.push(ClusterSummary {
            cluster: c,
            size: members.len(),
            latent: (ln > 0).then(|| ls / ln as f64),
            reference: (rn > 0).then(|| rs / rn as f64),
            reference_skipped: skipped,
        });
    }
    Ok(out)
}

/// Ids of the `n` clusters with the highest mean latent similarity.
pub fn top_compact_clusters(summaries: &[ClusterSummary], n: usize) -> Vec<usize> {
    let mut ranked: Vec<&ClusterSummary> = summaries.iter().filter(|s| s.latent.is_some()).collect();
    ranked.sort_by(|a, b| {
        b.latent
            .unwrap()
            .total_cmp(&a.latent.unwrap())
            .then(a.cluster.cmp(&b.cluster))
    });
    ranked.into_iter().take(n).map(|s| s.cluster).collect()
}

/// Normalized distribution of each category's items over `selected` clusters.
///
/// Returns the distinct categories in first-seen order and one distribution per
/// category (all zeros if none of its items fall in a selected cluster).
pub fn category_distributions<L: Clone + PartialEq>(
    clustering: &Clustering,
    categories: &[L],
    selected: &[usize],
) -> Result<(Vec<L>, Vec<Vec<f64>>)> {
    if categories.len() != clustering.assignment.len() {
        return Err(Error::shape(format!(
            "{} categories for {} items",
            categories.len(),
            clustering.assignment.len()
        )));
    }
    let mut names: Vec<L> = Vec::new();
    let mut counts: Vec<Vec<f64>> = Vec::new();
    for (cat, &c) in categories.iter().zip(&clustering.assignment) {
        let row = match names.iter().position(|n| n == cat) {
            Some(r) => r,
            None => {
                names.push(cat.clone());
                counts.push(vec![0.0; selected.len()]);
                names.len() - 1
            }
        };
        if let Some(slot) = selected.iter().position(|&s| s == c) {
            counts[row][slot] += 1.0;
        }
    }
    for row in &mut counts {
        let total: f64 = row.iter().sum();
        if total > 0.0 {
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    Ok((names, counts))
}

/// Generalized Jaccard `Σ min / Σ max` between distributions; undefined when both are zero.
pub fn generalized_jaccard(a: &[f64], b: &[f64]) -> Option<f64> {
    let (mut lo, mut hi) = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        lo += x.min(y);
        hi += x.max(y);
    }
    (hi > 0.0).then(|| lo / hi)
}

pub fn cluster_overlap_similarity(distributions: &[Vec<f64>]) -> Result<SimilarityMatrix<f64>> {
    check_embeddings(distributions)?;
    if distributions.iter().flatten().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain("cluster distributions must be finite and non-negative"));
    }
    Ok(SimilarityMatrix::from_fn(
        SimilarityKind::ClusterOverlap,
        distributions.len(),
        |i, j| generalized_jaccard(&distributions[i], &distributions[j]),
    ))
}

/// Writes any serializable analysis summary as pretty JSON.
pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Numeric(e.to_string()))?;
    writeln!(f).map_err(|e| Error::io(path, e))
}
