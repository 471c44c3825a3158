//! Ranking-quality metrics for one cell line's predicted drug list, and their
//! aggregation over test cell lines.
//!
//! AP@K is normalized by `min(K, #sensitive)`, so it lies in `[0, 1]` and
//! AP@1 reduces to "is the top-ranked drug sensitive". Concordance counts a
//! score tie as half a concordant pair; pairs with tied AUCs are not comparable.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cut-offs reported for AP@K and AH@K.
pub const DEFAULT_KS: [usize; 7] = [1, 3, 5, 10, 20, 40, 60];

/// Indices sorted by descending score; ties go to the lower index.
pub fn rank_descending<T: Scalar>(scores: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

/// Sensitive drugs among the first `min(k, n)` ranked positions.
pub fn hits_at_k(ranking: &[usize], labels: &[bool], k: usize) -> usize {
    ranking.iter().take(k).filter(|&&i| labels[i]).count()
}

/// Average precision over the top `k`; `None` when the list has no sensitive drug.
pub fn ap_at_k(ranking: &[usize], labels: &[bool], k: usize) -> Option<f64> {
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || k == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (pos, &i) in ranking.iter().take(k).enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (pos + 1) as f64;
        }
    }
    Some(sum / k.min(positives) as f64)
}

fn concordance<T: Scalar>(aucs: &[T], scores: &[T], include: impl Fn(usize) -> bool) -> Option<f64> {
    assert_eq!(aucs.len(), scores.len());
    let mut pairs = 0u64;
    let mut concordant = 0.0;
    for i in 0..aucs.len() {
        if !include(i) {
            continue;
        }
        for j in 0..aucs.len() {
            // i truly more sensitive than j
            if i == j || !include(j) || !(aucs[i] < aucs[j]) {
                continue;
            }
            pairs += 1;
            match scores[i].partial_cmp(&scores[j]) {
                Some(Ordering::Greater) => concordant += 1.0,
                Some(Ordering::Equal) => concordant += 0.5,
                _ => {}
            }
        }
    }
    (pairs > 0).then(|| concordant / pairs as f64)
}

/// Fraction of strictly AUC-ordered pairs whose scores agree; `None` without such pairs.
pub fn concordance_index<T: Scalar>(aucs: &[T], scores: &[T]) -> Option<f64> {
    concordance(aucs, scores, |_| true)
}

/// [`concordance_index`] restricted to pairs of sensitive drugs.
pub fn sensitive_ci<T: Scalar>(aucs: &[T], scores: &[T], labels: &[bool]) -> Option<f64> {
    concordance(aucs, scores, |i| labels[i])
}

/// Metrics for one test cell line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub fold: usize,
    pub cell_id: String,
    pub n_drugs: usize,
    pub n_sensitive: usize,
    pub ks: Vec<usize>,
    pub ap: Vec<Option<f64>>,
    pub ah: Vec<f64>,
    pub ci: Option<f64>,
    pub sci: Option<f64>,
}

pub fn evaluate_cell<T: Scalar>(
    fold: usize,
    cell_id: &str,
    aucs: &[T],
    scores: &[T],
    labels: &[bool],
    ks: &[usize],
) -> Result<CellMetrics> {
    if aucs.len() != scores.len() || aucs.len() != labels.len() {
        return Err(Error::shape(format!(
            "cell {cell_id}: {} AUCs, {} scores, {} labels",
            aucs.len(),
            scores.len(),
            labels.len()
        )));
    }
    if ks.iter().any(|&k| k == 0) {
        return Err(Error::domain("cut-off K must be at least 1"));
    }
    let ranking = rank_descending(scores);
    Ok(CellMetrics {
        fold,
        cell_id: cell_id.to_owned(),
        n_drugs: aucs.len(),
        n_sensitive: labels.iter().filter(|&&l| l).count(),
        ks: ks.to_vec(),
        ap: ks.iter().map(|&k| ap_at_k(&ranking, labels, k)).collect(),
        ah: ks.iter().map(|&k| hits_at_k(&ranking, labels, k) as f64).collect(),
        ci: concordance_index(aucs, scores),
        sci: sensitive_ci(aucs, scores, labels),
    })
}

/// Mean of one metric at one cut-off, with the number of cells left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtK {
    pub k: usize,
    pub ap: Option<f64>,
    pub ah: Option<f64>,
    pub ap_skipped: usize,
}

/// Means over the non-skipped cells of a fold (or of all folds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fold: Option<usize>,
    pub n_cells: usize,
    pub at_k: Vec<AtK>,
    pub ci: Option<f64>,
    pub sci: Option<f64>,
    pub ci_skipped: usize,
    pub sci_skipped: usize,
}

impl MetricReport {
    pub fn at(&self, k: usize) -> Option<&AtK> {
        self.at_k.iter().find(|m| m.k == k)
    }

    pub fn ap_at(&self, k: usize) -> Option<f64> {
        self.at(k).and_then(|m| m.ap)
    }

    pub fn ah_at(&self, k: usize) -> Option<f64> {
        self.at(k).and_then(|m| m.ah)
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, usize) {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut skipped = 0usize;
    for v in values {
        match v {
            Some(x) => {
                sum += x;
                n += 1;
            }
            None => skipped += 1,
        }
    }
    ((n > 0).then(|| sum / n as f64), skipped)
}

/// Arithmetic means over cells; all cells must share the same cut-offs.
pub fn aggregate(cells: &[CellMetrics], fold: Option<usize>) -> Result<MetricReport> {
    let ks = cells.first().map(|c| c.ks.clone()).unwrap_or_default();
    if cells.iter().any(|c| c.ks != ks) {
        return Err(Error::shape("cells were evaluated at different cut-offs"));
    }
    let at_k = ks
        .iter()
        .enumerate()
        .map(|(idx, &k)| {
            let (ap, ap_skipped) = mean_of(cells.iter().map(|c| c.ap[idx]));
            let (ah, _) = mean_of(cells.iter().map(|c| Some(c.ah[idx])));
            AtK {
                k,
                ap,
                ah,
                ap_skipped,
            }
        })
        .collect();
    let (ci, ci_skipped) = mean_of(cells.iter().map(|c| c.ci));
    let (sci, sci_skipped) = mean_of(cells.iter().map(|c| c.sci));
    Ok(MetricReport {
        fold,
        n_cells: cells.len(),
        at_k,
        ci,
        sci,
        ci_skipped,
        sci_skipped,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// One row per (fold, cell); skipped metrics are left empty.
pub fn write_cell_report_csv(path: &Path, cells: &[CellMetrics]) -> Result<()> {
    let ks = cells.first().map(|c| c.ks.clone()).unwrap_or_default();
    let mut out = Vec::new();
    let mut header = vec!["fold".to_owned(), "cell_id".into(), "n_drugs".into(), "n_sensitive".into()];
    header.extend(ks.iter().map(|k| format!("AP@{k}")));
    header.extend(ks.iter().map(|k| format!("AH@{k}")));
    header.extend(["CI".into(), "sCI".into()]);
    writeln!(out, "{}", header.join(",")).unwrap();
    for c in cells {
        let mut row = vec![
            c.fold.to_string(),
            c.cell_id.clone(),
            c.n_drugs.to_string(),
            c.n_sensitive.to_string(),
        ];
        row.extend(c.ap.iter().map(|&v| fmt_opt(v)));
        row.extend(c.ah.iter().map(|v| format!("{v}")));
        row.push(fmt_opt(c.ci));
        row.push(fmt_opt(c.sci));
        writeln!(out, "{}", row.join(",")).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking_of_labels(labels_by_rank: &[bool]) -> (Vec<usize>, Vec<bool>) {
        ((0..labels_by_rank.len()).collect(), labels_by_rank.to_vec())
    }

    #[test]
    fn hits_examples() {
        let (r, l) = ranking_of_labels(&[true, true, true, false]);
        assert_eq!(hits_at_k(&r, &l, 3), 3);
        let (r, l) = ranking_of_labels(&[false, false, false]);
        assert_eq!(hits_at_k(&r, &l, 2), 0);
        let (r, l) = ranking_of_labels(&[true, false, true, false]);
        assert_eq!(hits_at_k(&r, &l, 3), 2);
        assert_eq!(hits_at_k(&r, &l, 60), 2);
    }

    #[test]
    fn ap_examples() {
        let (r, l) = ranking_of_labels(&[true, false, false]);
        assert_eq!(ap_at_k(&r, &l, 1), Some(1.0));
        let (r, l) = ranking_of_labels(&[true, true, false, false]);
        assert_eq!(ap_at_k(&r, &l, 3), Some(1.0));
        let (r, l) = ranking_of_labels(&[false, true, false, true, false]);
        assert_eq!(ap_at_k(&r, &l, 5), Some(0.5));
        let (r, l) = ranking_of_labels(&[false, false]);
        assert_eq!(ap_at_k(&r, &l, 1), None);
    }

    #[test]
    fn ci_examples() {
        let aucs = [0.1, 0.2, 0.3];
        let neg: Vec<f64> = aucs.iter().map(|a| -a).collect();
        assert_eq!(concordance_index(&aucs, &neg), Some(1.0));
        assert_eq!(concordance_index(&aucs, &aucs), Some(0.0));
        let ci = concordance_index(&aucs, &[3.0, 1.0, 2.0]).unwrap();
        assert!((ci - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(concordance_index(&[0.5, 0.5], &[1.0, 2.0]), None);
        assert_eq!(concordance_index(&[0.1, 0.5], &[1.0, 1.0]), Some(0.5));
    }

    #[test]
    fn sci_examples() {
        let aucs = [0.1, 0.2, 0.3, 0.9];
        assert_eq!(sensitive_ci(&aucs, &[1.0, 0.0, 0.0, 0.0], &[true, false, false, false]), None);
        let labels = [true, true, true, false];
        assert_eq!(sensitive_ci(&aucs, &[3.0, 2.0, 1.0, 9.0], &labels), Some(1.0));
        let v = sensitive_ci(&aucs, &[3.0, 1.0, 2.0, 9.0], &labels).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ranking_ties_by_index() {
        assert_eq!(rank_descending(&[1.0, 2.0, 2.0, 0.5]), vec![1, 2, 0, 3]);
        assert_eq!(rank_descending(&[7.0]), vec![0]);
    }

    fn cell(ah5: f64, ap1: Option<f64>) -> CellMetrics {
        CellMetrics {
            fold: 0,
            cell_id: "c".into(),
            n_drugs: 10,
            n_sensitive: 1,
            ks: vec![1, 5],
            ap: vec![ap1, ap1],
            ah: vec![0.0, ah5],
            ci: Some(0.5),
            sci: None,
        }
    }

    #[test]
    fn aggregate_means_and_skips() {
        let single = aggregate(&[cell(4.0, Some(1.0))], Some(0)).unwrap();
        assert_eq!(single.ah_at(5), Some(4.0));
        assert_eq!(single.ap_at(1), Some(1.0));

        let two = aggregate(&[cell(4.0, Some(1.0)), cell(2.0, None)], Some(0)).unwrap();
        assert_eq!(two.ah_at(5), Some(3.0));
        assert_eq!(two.ap_at(1), Some(1.0));
        assert_eq!(two.at(1).unwrap().ap_skipped, 1);
        assert_eq!(two.sci, None);
        assert_eq!(two.sci_skipped, 2);
    }

    #[test]
    fn evaluate_cell_checks_lengths() {
        assert!(evaluate_cell(0, "c", &[0.1, 0.2], &[1.0], &[true, false], &[1]).is_err());
        assert!(evaluate_cell(0, "c", &[0.1], &[1.0], &[true], &[0]).is_err());
    }
}
