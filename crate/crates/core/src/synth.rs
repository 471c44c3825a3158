//! Planted-model benchmark data.
//!
//! Each cancer type has a centroid expression profile; a cell's profile is
//! its centroid plus Gaussian noise. Each drug has a Gaussian latent factor
//! and a sparse count fingerprint read out from it. True scores come from a
//! planted low-rank bilinear model between a linear projection of expression
//! and the drug factor, plus a cell-independent drug effect (some compounds
//! are broadly more potent, as in real screens). Each AUC is a
//! sigmoid-squashed negative true score plus noise (high score ⇒ low AUC ⇒
//! sensitive). A fraction of (cell, drug) pairs is withheld as missing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{CellProfile, DrugProfile, Observation, ResponseTable};
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_cells: usize,
    pub n_drugs: usize,
    pub n_types: usize,
    pub n_genes: usize,
    pub n_bits: usize,
    /// Rank of the planted bilinear model.
    pub rank: usize,
    /// Probability that a (cell, drug) pair is unobserved.
    pub missing: f64,
    /// Per-gene standard deviation of a cell around its type centroid.
    pub expression_noise: f64,
    /// Baseline probability that a fingerprint bit is set.
    pub bit_density: f64,
    /// Weight of a cell-independent drug effect (a fixed direction in drug-factor space).
    ///
    /// Cell factors have a spread near √genes per component, so with the
    /// default 32 genes a weight of 20 gives shared potency about three times
    /// the spread of the cell-specific interaction. The interaction still
    /// decides which drugs clear each cell's sensitivity threshold.
    pub drug_effect: f64,
    /// Slope of the sigmoid mapping true scores to AUCs.
    pub auc_slope: f64,
    /// Standard deviation of additive AUC noise.
    pub auc_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n_cells: usize, n_drugs: usize, n_types: usize, seed: u64) -> Self {
        SyntheticSpec {
            n_cells,
            n_drugs,
            n_types,
            n_genes: 32,
            n_bits: 1024,
            rank: 3,
            missing: 0.15,
            expression_noise: 0.5,
            bit_density: 0.1,
            drug_effect: 20.0,
            auc_slope: 1.0,
            auc_noise: 0.01,
            seed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub responses: ResponseTable,
    pub cells: Vec<CellProfile>,
    pub drugs: Vec<DrugProfile>,
    /// Planted score of every (cell, drug) pair, observed or not.
    pub true_scores: Matrix<f64>,
}

impl SyntheticData {
    /// Planted scores of the observed drugs of `cell` (by response-table indices).
    pub fn oracle_scores(&self, cell: usize, drugs: &[usize]) -> Vec<f64> {
        drugs.iter().map(|&d| self.true_scores[(cell, d)]).collect()
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    if spec.n_cells == 0 || spec.n_drugs == 0 || spec.n_types == 0 {
        return Err(Error::Config("synthetic data needs cells, drugs and types".into()));
    }
    if spec.n_types > spec.n_cells {
        return Err(Error::Config("more cancer types than cells".into()));
    }
    if !(0.0..1.0).contains(&spec.missing) {
        return Err(Error::Config("missing fraction must be in [0,1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let centroids: Vec<Vec<f64>> = (0..spec.n_types)
        .map(|_| (0..spec.n_genes).map(|_| normal(&mut rng)).collect())
        .collect();
    let cells: Vec<CellProfile> = (0..spec.n_cells)
        .map(|i| {
            let t = i % spec.n_types;
            CellProfile {
                cell_id: format!("cell{i:04}"),
                cancer_type: format!("type{t}"),
                expression: centroids[t]
                    .iter()
                    .map(|c| c + spec.expression_noise * normal(&mut rng))
                    .collect(),
            }
        })
        .collect();

    // Each drug has a latent factor; its fingerprint bits are noisy
    // thresholded readouts of that factor, so structurally similar drugs
    // have similar factors.
    let drug_factors: Vec<Vec<f64>> = (0..spec.n_drugs)
        .map(|_| (0..spec.rank).map(|_| normal(&mut rng)).collect())
        .collect();
    let bit_loadings: Vec<Vec<f64>> = (0..spec.n_bits)
        .map(|_| (0..spec.rank).map(|_| normal(&mut rng)).collect())
        .collect();
    let base_logit = (spec.bit_density / (1.0 - spec.bit_density)).ln();
    let drugs: Vec<DrugProfile> = drug_factors
        .iter()
        .enumerate()
        .map(|(d, z)| {
            let mut fingerprint: Vec<u32> = bit_loadings
                .iter()
                .map(|load| {
                    let logit = base_logit + load.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                    let p_on = 1.0 / (1.0 + (-logit).exp());
                    if rng.gen_bool(p_on) {
                        1 + u32::from(logit > 1.0) + u32::from(logit > 2.5)
                    } else {
                        0
                    }
                })
                .collect();
            if fingerprint.iter().all(|&c| c == 0) {
                fingerprint[rng.gen_range(0..spec.n_bits)] = 1;
            }
            DrugProfile {
                drug_id: format!("drug{d:04}"),
                fingerprint,
            }
        })
        .collect();

    let cell_proj: Vec<Vec<f64>> = (0..spec.rank)
        .map(|_| (0..spec.n_genes).map(|_| normal(&mut rng)).collect())
        .collect();
    let cell_factors: Vec<Vec<f64>> = cells
        .iter()
        .map(|c| {
            cell_proj
                .iter()
                .map(|row| row.iter().zip(&c.expression).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();

    let effect_dir: Vec<f64> = (0..spec.rank).map(|_| normal(&mut rng)).collect();
    let mut raw = Matrix::zeros(spec.n_cells, spec.n_drugs);
    for (c, u) in cell_factors.iter().enumerate() {
        for (d, v) in drug_factors.iter().enumerate() {
            let interaction: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let effect: f64 = effect_dir.iter().zip(v).map(|(a, b)| a * b).sum();
            raw[(c, d)] = interaction + spec.drug_effect * effect;
        }
    }
    // unit variance over all pairs, so the AUC sigmoid sees comparable spreads
    let n = (spec.n_cells * spec.n_drugs) as f64;
    let mean = raw.as_slice().iter().sum::<f64>() / n;
    let var = raw.as_slice().iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    for s in raw.as_mut_slice() {
        *s = (*s - mean) / sd;
    }
    let true_scores = raw;

    let mut observations = Vec::new();
    for c in 0..spec.n_cells {
        let before = observations.len();
        for d in 0..spec.n_drugs {
            let observed = !rng.gen_bool(spec.missing);
            let noise = spec.auc_noise * normal(&mut rng);
            if observed {
                let auc = 1.0 / (1.0 + (spec.auc_slope * true_scores[(c, d)]).exp()) + noise;
                observations.push(Observation { cell: c, drug: d, auc });
            }
        }
        if observations.len() == before {
            let d = rng.gen_range(0..spec.n_drugs);
            let auc = 1.0 / (1.0 + (spec.auc_slope * true_scores[(c, d)]).exp());
            observations.push(Observation { cell: c, drug: d, auc });
        }
    }

    let responses = ResponseTable::new(
        cells.iter().map(|c| c.cell_id.clone()).collect(),
        drugs.iter().map(|d| d.drug_id.clone()).collect(),
        observations,
    )?;
    Ok(SyntheticData {
        responses,
        cells,
        drugs,
        true_scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_missing_rate() {
        let data = generate(&SyntheticSpec::new(100, 60, 4, 1)).unwrap();
        assert_eq!(data.cells.len(), 100);
        assert_eq!(data.drugs.len(), 60);
        let observed = data.responses.observations().len() as f64 / 6000.0;
        assert!((observed - 0.85).abs() < 0.03, "{observed}");
        let types: std::collections::BTreeSet<_> = data.cells.iter().map(|c| &c.cancer_type).collect();
        assert_eq!(types.len(), 4);
    }

    #[test]
    fn lower_auc_for_higher_true_score() {
        let mut spec = SyntheticSpec::new(10, 30, 2, 3);
        spec.auc_noise = 0.0;
        let data = generate(&spec).unwrap();
        for o in data.responses.observations() {
            for p in data.responses.observations() {
                if o.cell == p.cell && data.true_scores[(o.cell, o.drug)] > data.true_scores[(p.cell, p.drug)] {
                    assert!(o.auc <= p.auc);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&SyntheticSpec::new(20, 10, 2, 5)).unwrap();
        let b = generate(&SyntheticSpec::new(20, 10, 2, 5)).unwrap();
        assert_eq!(a.responses, b.responses);
        assert_eq!(a.cells, b.cells);
        assert_eq!(a.drugs, b.drugs);
    }
}
