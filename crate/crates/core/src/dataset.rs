//! Response/expression/fingerprint ingestion, percentile sensitivity labels,
//! and cancer-type-stratified leave-cell-lines-out folds.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub cell: usize,
    pub drug: usize,
    pub auc: f64,
}

/// Sparse (cell, drug, AUC) observations. Missing pairs are simply absent.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseTable {
    cells: Vec<String>,
    drugs: Vec<String>,
    observations: Vec<Observation>,
    by_cell: Vec<Vec<usize>>,
}

impl ResponseTable {
    pub fn new(cells: Vec<String>, drugs: Vec<String>, observations: Vec<Observation>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(observations.len());
        let mut by_cell = vec![Vec::new(); cells.len()];
        for (i, o) in observations.iter().enumerate() {
            if o.cell >= cells.len() || o.drug >= drugs.len() {
                return Err(Error::domain(format!("observation {i} references an unknown cell or drug")));
            }
            if !o.auc.is_finite() {
                return Err(Error::domain(format!("observation {i} has a non-finite AUC")));
            }
            if !seen.insert((o.cell, o.drug)) {
                return Err(Error::domain(format!(
                    "duplicate observation for ({}, {})",
                    cells[o.cell], drugs[o.drug]
                )));
            }
            by_cell[o.cell].push(i);
        }
        Ok(ResponseTable {
            cells,
            drugs,
            observations,
            by_cell,
        })
    }

    pub fn cells(&self) -> &[String] {
        &self.cells
    }

    pub fn drugs(&self) -> &[String] {
        &self.drugs
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    /// Observation indices of one cell, in insertion order.
    pub fn cell_observations(&self, cell: usize) -> &[usize] {
        &self.by_cell[cell]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "cell_id,drug_id,auc").unwrap();
        for o in &self.observations {
            writeln!(out, "{},{},{}", self.cells[o.cell], self.drugs[o.drug], o.auc).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellProfile {
    pub cell_id: String,
    pub cancer_type: String,
    pub expression: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugProfile {
    pub drug_id: String,
    pub fingerprint: Vec<u32>,
}

impl DrugProfile {
    pub fn fingerprint_f64(&self) -> Vec<f64> {
        self.fingerprint.iter().map(|&c| f64::from(c)).collect()
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line as usize,
        message: message.into(),
    }
}

fn open_csv(path: &Path) -> Result<(csv::Reader<std::fs::File>, csv::StringRecord)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    Ok((reader, header))
}

fn records<'r>(
    path: &Path,
    reader: &'r mut csv::Reader<std::fs::File>,
) -> impl Iterator<Item = Result<(u64, csv::StringRecord)>> + 'r {
    let path = path.to_path_buf();
    reader.records().map(move |r| match r {
        Ok(rec) => {
            let line = rec.position().map_or(0, |p| p.line());
            Ok((line, rec))
        }
        Err(e) => {
            let line = e.position().map_or(0, |p| p.line());
            Err(parse_err(&path, line, e.to_string()))
        }
    })
}

/// Reads `cell_id,drug_id,auc`. Cells and drugs are indexed in order of first appearance.
pub fn load_responses(path: &Path) -> Result<ResponseTable> {
    let (mut reader, header) = open_csv(path)?;
    let expected = ["cell_id", "drug_id", "auc"];
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(parse_err(path, 1, "expected header `cell_id,drug_id,auc`"));
    }
    let mut cells = Vec::new();
    let mut drugs = Vec::new();
    let mut cell_ix: HashMap<String, usize> = HashMap::new();
    let mut drug_ix: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<(usize, usize), u64> = HashMap::new();
    let mut observations = Vec::new();
    for rec in records(path, &mut reader) {
        let (line, rec) = rec?;
        if rec.len() != 3 {
            return Err(parse_err(path, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let auc: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(path, line, format!("AUC `{}` is not a number", &rec[2])))?;
        if !auc.is_finite() {
            return Err(parse_err(path, line, "AUC must be finite"));
        }
        let intern = |ids: &mut Vec<String>, ix: &mut HashMap<String, usize>, id: &str| {
            *ix.entry(id.to_owned()).or_insert_with(|| {
                ids.push(id.to_owned());
                ids.len() - 1
            })
        };
        let cell = intern(&mut cells, &mut cell_ix, &rec[0]);
        let drug = intern(&mut drugs, &mut drug_ix, &rec[1]);
        if let Some(first) = seen.insert((cell, drug), line) {
            return Err(parse_err(
                path,
                line,
                format!("duplicate pair ({}, {}), first seen on line {first}", &rec[0], &rec[1]),
            ));
        }
        observations.push(Observation { cell, drug, auc });
    }
    ResponseTable::new(cells, drugs, observations)
}

/// Reads `cell_id,cancer_type,<gene columns…>`.
pub fn load_expression(path: &Path) -> Result<Vec<CellProfile>> {
    let (mut reader, header) = open_csv(path)?;
    if header.len() < 2 || &header[0] != "cell_id" || &header[1] != "cancer_type" {
        return Err(parse_err(path, 1, "expected header `cell_id,cancer_type,<genes…>`"));
    }
    let width = header.len();
    let mut out = Vec::new();
    for rec in records(path, &mut reader) {
        let (line, rec) = rec?;
        if rec.len() != width {
            return Err(parse_err(path, line, format!("expected {width} fields, found {}", rec.len())));
        }
        let expression = rec
            .iter()
            .skip(2)
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(parse_err(path, line, format!("expression value `{v}` is not a finite number"))),
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(CellProfile {
            cell_id: rec[0].to_owned(),
            cancer_type: rec[1].to_owned(),
            expression,
        });
    }
    Ok(out)
}

/// Reads `drug_id,<count columns…>`; counts must be non-negative integers.
pub fn load_fingerprints(path: &Path) -> Result<Vec<DrugProfile>> {
    let (mut reader, header) = open_csv(path)?;
    if header.is_empty() || &header[0] != "drug_id" {
        return Err(parse_err(path, 1, "expected header `drug_id,<bits…>`"));
    }
    let width = header.len();
    let mut out = Vec::new();
    for rec in records(path, &mut reader) {
        let (line, rec) = rec?;
        if rec.len() != width {
            return Err(parse_err(path, line, format!("expected {width} fields, found {}", rec.len())));
        }
        let fingerprint = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.parse::<u32>().map_err(|_| {
                    parse_err(path, line, format!("fingerprint count `{v}` is not a non-negative integer"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(DrugProfile {
            drug_id: rec[0].to_owned(),
            fingerprint,
        });
    }
    Ok(out)
}

pub fn write_expression_csv(path: &Path, cells: &[CellProfile]) -> Result<()> {
    let genes = cells.first().map_or(0, |c| c.expression.len());
    let mut out = Vec::new();
    write!(out, "cell_id,cancer_type").unwrap();
    for g in 1..=genes {
        write!(out, ",g_{g}").unwrap();
    }
    writeln!(out).unwrap();
    for c in cells {
        write!(out, "{},{}", c.cell_id, c.cancer_type).unwrap();
        for v in &c.expression {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_fingerprints_csv(path: &Path, drugs: &[DrugProfile]) -> Result<()> {
    let bits = drugs.first().map_or(0, |d| d.fingerprint.len());
    let mut out = Vec::new();
    write!(out, "drug_id").unwrap();
    for b in 1..=bits {
        write!(out, ",f_{b}").unwrap();
    }
    writeln!(out).unwrap();
    for d in drugs {
        write!(out, "{}", d.drug_id).unwrap();
        for v in &d.fingerprint {
            write!(out, ",{v}").unwrap();
        }
        writeln!(out).unwrap();
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Percentile with linear interpolation between order statistics
/// (position `p/100·(n−1)` in the sorted sample).
pub fn percentile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 >= sorted.len() || frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// One cell line's observed drugs with their responses and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CellList {
    pub drugs: Vec<usize>,
    pub aucs: Vec<f64>,
    pub labels: Vec<bool>,
}

/// Responses with a per-cell percentile threshold and a binary label per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub table: ResponseTable,
    pub labels: Vec<bool>,
    pub thresholds: Vec<f64>,
}

impl LabeledDataset {
    pub fn cell_list(&self, cell: usize) -> CellList {
        let obs = self.table.cell_observations(cell);
        CellList {
            drugs: obs.iter().map(|&i| self.table.observations()[i].drug).collect(),
            aucs: obs.iter().map(|&i| self.table.observations()[i].auc).collect(),
            labels: obs.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}

/// Labels a drug sensitive in a cell when its AUC is at or below the cell's
/// `percentile`-th AUC percentile. Ties at the threshold are all sensitive.
pub fn label_sensitivity(table: ResponseTable, percentile_p: f64) -> Result<LabeledDataset> {
    if !(percentile_p > 0.0 && percentile_p < 100.0) {
        return Err(Error::domain("percentile must be in (0,100)"));
    }
    let mut labels = vec![false; table.observations().len()];
    let mut thresholds = Vec::with_capacity(table.cells().len());
    for cell in 0..table.cells().len() {
        let obs = table.cell_observations(cell);
        if obs.is_empty() {
            return Err(Error::domain(format!(
                "cell {} has no observations",
                table.cells()[cell]
            )));
        }
        let aucs: Vec<f64> = obs.iter().map(|&i| table.observations()[i].auc).collect();
        let threshold = percentile(&aucs, percentile_p);
        for &i in obs {
            labels[i] = table.observations()[i].auc <= threshold;
        }
        thresholds.push(threshold);
    }
    Ok(LabeledDataset {
        table,
        labels,
        thresholds,
    })
}

/// Labeled responses joined with the expression and fingerprint of every
/// cell and drug they mention. Index `i` of `cells`/`drugs` is index `i` in
/// the response table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cells: Vec<CellProfile>,
    pub drugs: Vec<DrugProfile>,
    pub labeled: LabeledDataset,
    /// Observations dropped because their cell or drug has no profile.
    pub dropped_observations: usize,
}

impl Dataset {
    /// Joins the three inputs on their ids. Cells and drugs keep profile-file
    /// order; profiles without any response are left out.
    pub fn assemble(
        responses: &ResponseTable,
        cells: &[CellProfile],
        drugs: &[DrugProfile],
        percentile_p: f64,
    ) -> Result<Self> {
        if let Some(first) = cells.first() {
            if cells.iter().any(|c| c.expression.len() != first.expression.len()) {
                return Err(Error::shape("expression profiles differ in length"));
            }
        }
        if let Some(first) = drugs.first() {
            if drugs.iter().any(|d| d.fingerprint.len() != first.fingerprint.len()) {
                return Err(Error::shape("fingerprints differ in length"));
            }
        }
        let unique = |ids: Vec<&str>, what: &str| -> Result<()> {
            let mut set = HashSet::new();
            for id in ids {
                if !set.insert(id) {
                    return Err(Error::domain(format!("duplicate {what} id `{id}`")));
                }
            }
            Ok(())
        };
        unique(cells.iter().map(|c| c.cell_id.as_str()).collect(), "cell")?;
        unique(drugs.iter().map(|d| d.drug_id.as_str()).collect(), "drug")?;

        let cell_pos: HashMap<&str, usize> = responses
            .cells()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let drug_pos: HashMap<&str, usize> = responses
            .drugs()
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut has_cell = vec![false; responses.cells().len()];
        let mut has_drug = vec![false; responses.drugs().len()];
        for o in responses.observations() {
            has_cell[o.cell] = true;
            has_drug[o.drug] = true;
        }

        let kept_cells: Vec<CellProfile> = cells
            .iter()
            .filter(|c| cell_pos.get(c.cell_id.as_str()).is_some_and(|&i| has_cell[i]))
            .cloned()
            .collect();
        let kept_drugs: Vec<DrugProfile> = drugs
            .iter()
            .filter(|d| drug_pos.get(d.drug_id.as_str()).is_some_and(|&i| has_drug[i]))
            .cloned()
            .collect();
        let new_cell: HashMap<usize, usize> = kept_cells
            .iter()
            .enumerate()
            .map(|(new, c)| (cell_pos[c.cell_id.as_str()], new))
            .collect();
        let new_drug: HashMap<usize, usize> = kept_drugs
            .iter()
            .enumerate()
            .map(|(new, d)| (drug_pos[d.drug_id.as_str()], new))
            .collect();

        let mut observations = Vec::with_capacity(responses.observations().len());
        let mut dropped = 0;
        for o in responses.observations() {
            match (new_cell.get(&o.cell), new_drug.get(&o.drug)) {
                (Some(&cell), Some(&drug)) => observations.push(Observation {
                    cell,
                    drug,
                    auc: o.auc,
                }),
                _ => dropped += 1,
            }
        }
        // Cells whose every drug lacked a fingerprint end up empty.
        let mut nonempty = vec![false; kept_cells.len()];
        for o in &observations {
            nonempty[o.cell] = true;
        }
        if let Some(i) = nonempty.iter().position(|&n| !n) {
            return Err(Error::domain(format!(
                "cell {} has no responses for drugs with fingerprints",
                kept_cells[i].cell_id
            )));
        }

        let table = ResponseTable::new(
            kept_cells.iter().map(|c| c.cell_id.clone()).collect(),
            kept_drugs.iter().map(|d| d.drug_id.clone()).collect(),
            observations,
        )?;
        Ok(Dataset {
            cells: kept_cells,
            drugs: kept_drugs,
            labeled: label_sensitivity(table, percentile_p)?,
            dropped_observations: dropped,
        })
    }

    pub fn n_genes(&self) -> usize {
        self.cells.first().map_or(0, |c| c.expression.len())
    }

    pub fn n_bits(&self) -> usize {
        self.drugs.first().map_or(0, |d| d.fingerprint.len())
    }
}

/// Fold index per cell (aligned with the cell list it was built from).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub cell_ids: Vec<String>,
    pub folds: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
}

impl FoldAssignment {
    pub fn test_cells(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_cells(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn fold_of(&self, cell_id: &str) -> Option<usize> {
        self.cell_ids
            .iter()
            .position(|c| c == cell_id)
            .map(|i| self.folds[i])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "cell_id,fold").unwrap();
        for (id, fold) in self.cell_ids.iter().zip(&self.folds) {
            writeln!(out, "{id},{fold}").unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads `cell_id,fold` and orders it to match `cells`.
    pub fn read_csv(path: &Path, cells: &[CellProfile], seed: u64) -> Result<Self> {
        let (mut reader, header) = open_csv(path)?;
        if header.iter().collect::<Vec<_>>() != ["cell_id", "fold"] {
            return Err(parse_err(path, 1, "expected header `cell_id,fold`"));
        }
        let mut by_id = HashMap::new();
        for rec in records(path, &mut reader) {
            let (line, rec) = rec?;
            let fold: usize = rec
                .get(1)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| parse_err(path, line, "fold must be a non-negative integer"))?;
            by_id.insert(rec[0].to_owned(), fold);
        }
        let folds = cells
            .iter()
            .map(|c| {
                by_id.get(&c.cell_id).copied().ok_or_else(|| {
                    Error::domain(format!("cell {} has no fold in {}", c.cell_id, path.display()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n_folds = folds.iter().max().map_or(0, |m| m + 1);
        Ok(FoldAssignment {
            cell_ids: cells.iter().map(|c| c.cell_id.clone()).collect(),
            folds,
            n_folds,
            seed,
        })
    }
}

/// Shuffles each cancer type's cells with `seed` and deals them round-robin
/// into `n_folds` folds. Dealing continues across types, so the overall fold
/// sizes stay balanced too.
pub fn make_lco_folds(cells: &[CellProfile], n_folds: usize, seed: u64) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::domain("at least two folds are required"));
    }
    let mut by_type: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in cells.iter().enumerate() {
        by_type.entry(c.cancer_type.as_str()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![0; cells.len()];
    let mut next = 0usize;
    for members in by_type.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[i] = next % n_folds;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        cell_ids: cells.iter().map(|c| c.cell_id.clone()).collect(),
        folds,
        n_folds,
        seed,
    })
}

/// Per-gene standardization fit on a subset of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Genes with zero variance get unit scale.
    pub fn fit<'a>(profiles: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = profiles.into_iter().collect();
        let Some(first) = rows.first() else {
            return Err(Error::domain("cannot fit a standardizer on zero cells"));
        };
        let g = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; g];
        for r in &rows {
            if r.len() != g {
                return Err(Error::shape("expression profiles differ in length"));
            }
            for (m, v) in mean.iter_mut().zip(*r) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; g];
        for r in &rows {
            for ((s, v), m) in var.iter_mut().zip(*r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = var
            .into_iter()
            .map(|v| if v > 1e-24 { v.sqrt() } else { 1.0 })
            .collect();
        Ok(Standardizer { mean, std })
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.mean.len() {
            return Err(Error::shape(format!(
                "standardizer fit on {} genes, profile has {}",
                self.mean.len(),
                x.len()
            )));
        }
        Ok(x
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use std::fs;

    use proptest::prelude::*;

    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn table_for(aucs: &[f64]) -> ResponseTable {
        let drugs = (0..aucs.len()).map(|d| format!("d{d}")).collect();
        let obs = aucs
            .iter()
            .enumerate()
            .map(|(d, &auc)| Observation { cell: 0, drug: d, auc })
            .collect();
        ResponseTable::new(vec!["c0".into()], drugs, obs).unwrap()
    }

    fn cell(id: &str, ty: &str) -> CellProfile {
        CellProfile {
            cell_id: id.into(),
            cancer_type: ty.into(),
            expression: vec![0.0],
        }
    }

    #[test]
    fn load_responses_counts() {
        let dir = tempfile::tempdir().unwrap();
        let empty = load_responses(&write(&dir, "e.csv", "cell_id,drug_id,auc\n")).unwrap();
        assert_eq!(empty.observations().len(), 0);

        let t = load_responses(&write(
            &dir,
            "r.csv",
            "cell_id,drug_id,auc\nc1,d1,0.5\nc1,d2,0.7\nc2,d1,0.2\n",
        ))
        .unwrap();
        assert_eq!(t.observations().len(), 3);
        assert_eq!(t.cells().len(), 2);
        assert_eq!(t.drugs().len(), 2);
        assert_eq!(t.cell_observations(0), &[0, 1]);
    }

    #[test]
    fn load_responses_rejects_duplicates_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let dup = load_responses(&write(
            &dir,
            "d.csv",
            "cell_id,drug_id,auc\nc1,d1,0.5\nc2,d1,0.1\nc1,d1,0.7\n",
        ));
        match dup {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad = load_responses(&write(&dir, "b.csv", "cell_id,drug_id,auc\nc1,d1,abc\n"));
        assert!(matches!(bad, Err(Error::Parse { line: 2, .. })));
        let short = load_responses(&write(&dir, "s.csv", "cell_id,drug_id,auc\nc1,d1\n"));
        assert!(matches!(short, Err(Error::Parse { line: 2, .. })));
        let header = load_responses(&write(&dir, "h.csv", "cell,drug,auc\n"));
        assert!(matches!(header, Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn expression_and_fingerprint_loaders() {
        let dir = tempfile::tempdir().unwrap();
        let cells = load_expression(&write(
            &dir,
            "x.csv",
            "cell_id,cancer_type,g1,g2,g3\nc1,lung,1,2,3\nc2,skin,0.5,0,-1\n",
        ))
        .unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].expression, vec![1.0, 2.0, 3.0]);
        assert_eq!(cells[1].cancer_type, "skin");

        let ragged = load_expression(&write(
            &dir,
            "y.csv",
            "cell_id,cancer_type,g1,g2\nc1,lung,1,2\nc2,lung,1\n",
        ));
        assert!(matches!(ragged, Err(Error::Parse { line: 3, .. })));

        assert!(load_expression(&write(&dir, "z.csv", "cell_id,cancer_type,g1\n"))
            .unwrap()
            .is_empty());

        let fps = load_fingerprints(&write(&dir, "f.csv", "drug_id,f1,f2\nd1,0,3\n")).unwrap();
        assert_eq!(fps[0].fingerprint, vec![0, 3]);
        let neg = load_fingerprints(&write(&dir, "n.csv", "drug_id,f1,f2\nd1,0,-1\n"));
        assert!(matches!(neg, Err(Error::Parse { line: 2, .. })));
        assert!(load_fingerprints(&write(&dir, "g.csv", "drug_id,f1\n")).unwrap().is_empty());
    }

    #[test]
    fn twenty_distinct_gives_one_sensitive() {
        let aucs: Vec<f64> = (0..20).map(|i| 0.9 - 0.03 * i as f64).collect();
        let l = label_sensitivity(table_for(&aucs), 5.0).unwrap();
        assert_eq!(l.labels.iter().filter(|&&x| x).count(), 1);
        assert!(l.labels[19]);
    }

    #[test]
    fn hundred_distinct_gives_five_sensitive() {
        let aucs: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64 / 100.0).collect();
        let l = label_sensitivity(table_for(&aucs), 5.0).unwrap();
        let sensitive: Vec<f64> = aucs
            .iter()
            .zip(&l.labels)
            .filter(|(_, &s)| s)
            .map(|(&a, _)| a)
            .collect();
        assert_eq!(sensitive.len(), 5);
        assert!(sensitive.iter().all(|&a| a < 0.05));
    }

    #[test]
    fn all_equal_all_sensitive() {
        let l = label_sensitivity(table_for(&[0.4; 12]), 5.0).unwrap();
        assert!(l.labels.iter().all(|&x| x));
        assert!(label_sensitivity(table_for(&[0.4]), 0.0).is_err());
        assert!(label_sensitivity(table_for(&[0.4]), 100.0).is_err());
    }

    #[test]
    fn fold_examples() {
        let ten: Vec<_> = (0..10).map(|i| cell(&format!("c{i}"), "A")).collect();
        let f = make_lco_folds(&ten, 5, 1).unwrap();
        for k in 0..5 {
            assert_eq!(f.test_cells(k).len(), 2);
        }

        let seven: Vec<_> = (0..7).map(|i| cell(&format!("c{i}"), "A")).collect();
        let f = make_lco_folds(&seven, 5, 1).unwrap();
        let mut sizes: Vec<usize> = (0..5).map(|k| f.test_cells(k).len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);

        let mixed: Vec<_> = (0..10)
            .map(|i| cell(&format!("c{i}"), if i < 5 { "A" } else { "B" }))
            .collect();
        let f = make_lco_folds(&mixed, 5, 9).unwrap();
        for k in 0..5 {
            let test = f.test_cells(k);
            assert_eq!(test.iter().filter(|&&i| i < 5).count(), 1);
            assert_eq!(test.iter().filter(|&&i| i >= 5).count(), 1);
        }
        assert!(make_lco_folds(&mixed, 1, 0).is_err());
    }

    #[test]
    fn folds_roundtrip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cells: Vec<_> = (0..9).map(|i| cell(&format!("c{i}"), ["A", "B"][i % 2])).collect();
        let f = make_lco_folds(&cells, 3, 4).unwrap();
        let p = dir.path().join("folds.csv");
        f.write_csv(&p).unwrap();
        assert_eq!(FoldAssignment::read_csv(&p, &cells, 4).unwrap(), f);
    }

    #[test]
    fn assemble_joins_and_drops_unprofiled() {
        let table = ResponseTable::new(
            vec!["c1".into(), "c2".into(), "c3".into()],
            vec!["d1".into(), "d2".into()],
            vec![
                Observation { cell: 0, drug: 0, auc: 0.3 },
                Observation { cell: 0, drug: 1, auc: 0.1 },
                Observation { cell: 1, drug: 1, auc: 0.5 },
                Observation { cell: 2, drug: 0, auc: 0.5 },
            ],
        )
        .unwrap();
        let cells = vec![cell("c2", "A"), cell("c1", "B")];
        let drugs = vec![
            DrugProfile { drug_id: "d2".into(), fingerprint: vec![1, 0] },
            DrugProfile { drug_id: "d1".into(), fingerprint: vec![0, 1] },
        ];
        let ds = Dataset::assemble(&table, &cells, &drugs, 5.0).unwrap();
        assert_eq!(ds.dropped_observations, 1);
        assert_eq!(ds.labeled.table.cells(), &["c2".to_owned(), "c1".to_owned()]);
        let c1 = ds.labeled.cell_list(1);
        assert_eq!(c1.drugs, vec![1, 0]);
        assert_eq!(c1.labels, vec![false, true]);
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let rows = [vec![1.0, 5.0], vec![3.0, 5.0], vec![5.0, 5.0]];
        let s = Standardizer::fit(rows.iter().map(Vec::as_slice)).unwrap();
        assert_eq!(s.mean, vec![3.0, 5.0]);
        assert_eq!(s.std[1], 1.0);
        let z = s.apply(&[5.0, 5.0]).unwrap();
        assert!((z[0] - 2.0 / (8.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!(s.apply(&[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn labeling_invariant_under_monotone_transform(
            aucs in prop::collection::hash_set(0u32..10_000, 1..80)
        ) {
            let aucs: Vec<f64> = aucs.into_iter().map(|v| v as f64 / 10_000.0).collect();
            let transformed: Vec<f64> = aucs.iter().map(|a| (3.0 * a).exp() - 7.0).collect();
            let a = label_sensitivity(table_for(&aucs), 5.0).unwrap();
            let b = label_sensitivity(table_for(&transformed), 5.0).unwrap();
            prop_assert_eq!(&a.labels, &b.labels);
            prop_assert!(a.labels.iter().any(|&l| l));
        }

        #[test]
        fn folds_stratified(types in prop::collection::vec(0u8..5, 1..60), seed in any::<u64>()) {
            let cells: Vec<_> = types.iter().enumerate()
                .map(|(i, t)| cell(&format!("c{i}"), &format!("t{t}"))).collect();
            let a = make_lco_folds(&cells, 5, seed).unwrap();
            prop_assert_eq!(&a, &make_lco_folds(&cells, 5, seed).unwrap());
            for t in 0..5u8 {
                let mut counts = [0usize; 5];
                for (i, ty) in types.iter().enumerate() {
                    if *ty == t { counts[a.folds[i]] += 1; }
                }
                let max = counts.iter().max().unwrap();
                let min = counts.iter().min().unwrap();
                prop_assert!(max - min <= 1);
            }
        }
    }
}
