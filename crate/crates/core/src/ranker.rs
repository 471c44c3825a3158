//! Cell encoder + drug encoder + bilinear scorer `f_c(d) = u_cᵀ W v_d`, and
//! the listwise training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{list_loss, ListTarget, LossKind};
use crate::metrics::rank_descending;
use crate::nn::layer::fill_glorot;
use crate::nn::matrix::{axpy, dot};
use crate::nn::{Activation, Adam, AdamConfig, Matrix, Mlp, Parameters};
use crate::pretrain::EpochLoss;
use crate::scalar::Scalar;

/// `uᵀ W v`.
pub fn score<T: Scalar>(u: &[T], v: &[T], w: &Matrix<T>) -> Result<T> {
    if u.len() != w.rows() || v.len() != w.cols() {
        return Err(Error::shape(format!(
            "bilinear form is {}x{}, embeddings have {} and {} entries",
            w.rows(),
            w.cols(),
            u.len(),
            v.len()
        )));
    }
    Ok(dot(u, &w.matvec(v)?))
}

/// Scores for one cell's drug list with the induced ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector<T> {
    pub drugs: Vec<usize>,
    pub scores: Vec<T>,
    /// Positions into `drugs`, best first; equal scores go to the lower drug index.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RankModel<T> {
    pub cell_encoder: Mlp<T>,
    pub drug_encoder: Mlp<T>,
    pub scorer: Matrix<T>,
}

impl<T: Scalar> RankModel<T> {
    /// Fresh drug encoder (`bits → drug_hidden → drug_dim`) and scorer around
    /// an existing (usually pretrained) cell encoder.
    pub fn new(cell_encoder: Mlp<T>, bits: usize, drug_hidden: usize, drug_dim: usize, seed: u64) -> Result<Self> {
        if drug_dim == 0 || drug_hidden == 0 {
            return Err(Error::Config("drug encoder widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let drug_encoder = Mlp::glorot(&[bits, drug_hidden, drug_dim], Activation::Identity, &mut rng);
        let mut scorer = Matrix::zeros(cell_encoder.out_dim(), drug_dim);
        fill_glorot(&mut scorer, &mut rng);
        Self::from_parts(cell_encoder, drug_encoder, scorer)
    }

    pub fn from_parts(cell_encoder: Mlp<T>, drug_encoder: Mlp<T>, scorer: Matrix<T>) -> Result<Self> {
        if scorer.rows() != cell_encoder.out_dim() || scorer.cols() != drug_encoder.out_dim() {
            return Err(Error::shape(format!(
                "scorer is {}x{} but embeddings are {} and {}",
                scorer.rows(),
                scorer.cols(),
                cell_encoder.out_dim(),
                drug_encoder.out_dim()
            )));
        }
        Ok(RankModel {
            cell_encoder,
            drug_encoder,
            scorer,
        })
    }

    pub fn zeros_like(&self) -> Self {
        RankModel {
            cell_encoder: self.cell_encoder.zeros_like(),
            drug_encoder: self.drug_encoder.zeros_like(),
            scorer: Matrix::zeros(self.scorer.rows(), self.scorer.cols()),
        }
    }

    pub fn encode_cell(&self, x: &[T]) -> Result<Vec<T>> {
        self.cell_encoder.forward(x)
    }

    pub fn encode_drug(&self, fingerprint: &[T]) -> Result<Vec<T>> {
        self.drug_encoder.forward(fingerprint)
    }

    /// Scores `drugs` (indices into `fingerprints`) for the cell with expression `x`.
    pub fn score_list(&self, x: &[T], drugs: &[usize], fingerprints: &[Vec<T>]) -> Result<ScoreVector<T>> {
        let u = self.encode_cell(x)?;
        let wt_u = self.scorer.matvec_t(&u)?;
        let scores = drugs
            .iter()
            .map(|&d| {
                let fp = fingerprints
                    .get(d)
                    .ok_or_else(|| Error::shape(format!("drug index {d} has no fingerprint")))?;
                Ok(dot(&wt_u, &self.encode_drug(fp)?))
            })
            .collect::<Result<Vec<T>>>()?;
        // rank_descending breaks ties by position; map to drug-index order first.
        let mut by_drug: Vec<usize> = (0..drugs.len()).collect();
        by_drug.sort_by_key(|&p| drugs[p]);
        let sorted_scores: Vec<T> = by_drug.iter().map(|&p| scores[p]).collect();
        let order = rank_descending(&sorted_scores)
            .into_iter()
            .map(|i| by_drug[i])
            .collect();
        Ok(ScoreVector {
            drugs: drugs.to_vec(),
            scores,
            order,
        })
    }

    /// Listwise loss of one cell; gradients are accumulated into `grads`.
    pub fn list_loss_and_grad(
        &self,
        x: &[T],
        drugs: &[usize],
        fingerprints: &[Vec<T>],
        target: &ListTarget<T>,
        tau: T,
        grads: &mut RankModel<T>,
    ) -> Result<T> {
        if target.len() != drugs.len() {
            return Err(Error::shape(format!(
                "target covers {} drugs, list has {}",
                target.len(),
                drugs.len()
            )));
        }
        let cell_trace = self.cell_encoder.forward_trace(x)?;
        let u = cell_trace.output().to_vec();
        let wt_u = self.scorer.matvec_t(&u)?;

        let mut drug_traces = Vec::with_capacity(drugs.len());
        let mut scores = Vec::with_capacity(drugs.len());
        for &d in drugs {
            let fp = fingerprints
                .get(d)
                .ok_or_else(|| Error::shape(format!("drug index {d} has no fingerprint")))?;
            let trace = self.drug_encoder.forward_trace(fp)?;
            scores.push(dot(&wt_u, trace.output()));
            drug_traces.push(trace);
        }

        let out = list_loss(&scores, target, tau)?;

        // ∂f_d/∂u = W v_d, ∂f_d/∂W = u v_dᵀ, ∂f_d/∂v_d = Wᵀ u
        let mut grad_u = vec![T::zero(); u.len()];
        for (trace, &g) in drug_traces.iter().zip(&out.grad) {
            if g == T::zero() {
                continue;
            }
            let v = trace.output();
            axpy(g, &self.scorer.matvec(v)?, &mut grad_u);
            grads.scorer.add_outer(g, &u, v);
            let grad_v: Vec<T> = wt_u.iter().map(|&w| g * w).collect();
            self.drug_encoder
                .backward(trace, &grad_v, &mut grads.drug_encoder, false);
        }
        self.cell_encoder
            .backward(&cell_trace, &grad_u, &mut grads.cell_encoder, false);
        Ok(out.loss)
    }
}

impl<T: Scalar> Parameters<T> for RankModel<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.cell_encoder.tensors();
        t.extend(self.drug_encoder.tensors());
        t.push(self.scorer.as_slice());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.cell_encoder.tensors_mut();
        t.extend(self.drug_encoder.tensors_mut());
        t.push(self.scorer.as_mut_slice());
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub epochs: usize,
    pub lr: f64,
    /// List-All temperature; List-One always uses 1.
    pub tau: f64,
    pub drug_hidden: usize,
    pub drug_dim: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossKind::ListAll,
            epochs: 300,
            lr: 1e-3,
            tau: 0.5,
            drug_hidden: 128,
            drug_dim: 100,
            seed: 0,
        }
    }
}

/// One training list: a cell's (standardized) expression, its observed drugs
/// and the matching target.
#[derive(Debug, Clone)]
pub struct TrainingList<T> {
    pub expression: Vec<T>,
    pub drugs: Vec<usize>,
    pub target: ListTarget<T>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: RankModel<T>,
    /// Sum over lists of the pre-update loss, one entry per epoch (1-based).
    pub log: Vec<EpochLoss>,
}

/// Adam over all parameters, one step per list, lists shuffled every epoch.
pub fn train<T: Scalar>(
    init: RankModel<T>,
    lists: &[TrainingList<T>],
    fingerprints: &[Vec<T>],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>> {
    if lists.is_empty() {
        return Err(Error::domain("training needs at least one cell line"));
    }
    if !(config.tau > 0.0) {
        return Err(Error::Config("tau must be positive".into()));
    }
    let tau = match config.loss {
        LossKind::ListAll => T::lit(config.tau),
        LossKind::ListOne => T::one(),
    };
    let mut model = init;
    let mut adam = Adam::new(&model, AdamConfig::with_lr(T::lit(config.lr)));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7a11_0000);
    let mut order: Vec<usize> = (0..lists.len()).collect();
    let mut grads = model.zeros_like();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let list = &lists[i];
            for t in grads.tensors_mut() {
                t.fill(T::zero());
            }
            let loss = model.list_loss_and_grad(
                &list.expression,
                &list.drugs,
                fingerprints,
                &list.target,
                tau,
                &mut grads,
            )?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "list loss is not finite".into(),
                });
            }
            total += loss.as_f64();
            adam.step(&mut model, &grads)?;
        }
        if !model.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(Error::Divergence {
                epoch,
                message: "parameters became non-finite".into(),
            });
        }
        log.push(EpochLoss { epoch, loss: total });
    }
    Ok(TrainOutcome { model, log })
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::losses::top_one_target;
    use crate::nn::{assign_flat, finite_diff_grad, flatten, relative_error, DenseLayer};

    fn hand_mlp(rows: &[&[f64]], bias: &[f64], act: Activation) -> Mlp<f64> {
        let w = Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
        // Rows are written output-major for readability; layers store input-major.
        Mlp::new(vec![DenseLayer::new(w.transpose(), bias.to_vec(), act).unwrap()]).unwrap()
    }

    fn two_layer(l1: (&[&[f64]], &[f64]), l2: (&[&[f64]], &[f64])) -> Mlp<f64> {
        let a = hand_mlp(l1.0, l1.1, Activation::Relu).layers.remove(0);
        let b = hand_mlp(l2.0, l2.1, Activation::Identity).layers.remove(0);
        Mlp::new(vec![a, b]).unwrap()
    }

    #[test]
    fn bilinear_score_examples() {
        let w = Matrix::identity(2);
        assert_eq!(score(&[1.0, 2.0], &[1.0, 2.0], &w).unwrap(), 5.0);
        let w = Matrix::from_rows(&[vec![0.0, 3.0], vec![7.0, 0.0]]).unwrap();
        assert_eq!(score(&[0.0, 0.0], &[5.0, -1.0], &w).unwrap(), 0.0);
        assert_eq!(score(&[1.0, 0.0], &[0.0, 1.0], &w).unwrap(), 3.0);
        assert!(matches!(score(&[1.0], &[0.0, 1.0], &w), Err(Error::Shape(_))));
    }

    #[test]
    fn hand_encoders() {
        // relu([[1,-1],[2,0]]·[3,1] + [0,-1]) = [2,5]; [[1,1]]·[2,5] + 0.5 = 7.5
        let enc = two_layer(
            (&[&[1.0, -1.0], &[2.0, 0.0]], &[0.0, -1.0]),
            (&[&[1.0, 1.0]], &[0.5]),
        );
        let model = RankModel::from_parts(enc.clone(), enc.clone(), Matrix::identity(1)).unwrap();
        assert_eq!(model.encode_cell(&[3.0, 1.0]).unwrap(), vec![7.5]);
        assert_eq!(model.encode_drug(&[3.0, 1.0]).unwrap(), vec![7.5]);
        // relu(−1·… ) path: [[1,-1],[2,0]]·[1,3] = [−2, 2] → relu [0,1] → 1.5
        assert_eq!(model.encode_drug(&[1.0, 3.0]).unwrap(), vec![1.5]);

        let zero = model.zeros_like();
        assert_eq!(zero.encode_cell(&[3.0, 1.0]).unwrap(), vec![0.0]);
        assert_eq!(zero.encode_drug(&[0.0, 0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identical_fingerprints_identical_embeddings() {
        let enc = Mlp::<f64>::glorot(&[3, 4, 2], Activation::Identity, &mut ChaCha8Rng::seed_from_u64(1));
        let model = RankModel::new(enc, 8, 5, 3, 2).unwrap();
        let fp = vec![1.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert_eq!(model.encode_drug(&fp).unwrap(), model.encode_drug(&fp.clone()).unwrap());
        let x = [0.2, -0.4, 0.9];
        assert_eq!(model.encode_cell(&x).unwrap(), model.encode_cell(&x).unwrap());
    }

    #[test]
    fn score_list_orders_and_breaks_ties() {
        // u = x, v = fp, W = I  → score = x·fp
        let ident = hand_mlp(&[&[1.0, 0.0], &[0.0, 1.0]], &[0.0, 0.0], Activation::Identity);
        let model = RankModel::from_parts(ident.clone(), ident, Matrix::identity(2)).unwrap();
        let fps = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![2.0, 0.0]];

        let one = model.score_list(&[1.0, 2.0], &[2], &fps).unwrap();
        assert_eq!(one.order, vec![0]);

        let ranked = model.score_list(&[1.0, 2.0], &[0, 1, 2], &fps).unwrap();
        assert_eq!(ranked.scores, vec![1.0, 2.0, 3.0]);
        assert_eq!(ranked.order, vec![2, 1, 0]);

        // equal scores: drug 1 (x·[0,1]=1) and drug 0 (x·[1,0]=1), listed as [1, 0]
        let tied = model.score_list(&[1.0, 1.0], &[1, 0], &fps).unwrap();
        assert_eq!(tied.scores, vec![1.0, 1.0]);
        assert_eq!(tied.order, vec![1, 0], "lower drug index first");
    }

    fn random_problem(seed: u64) -> (RankModel<f64>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Mlp::<f64>::glorot(&[5, 6, 4], Activation::Identity, &mut rng);
        let mut model = RankModel::new(enc, 7, 6, 3, seed + 1).unwrap();
        // nonzero biases keep relu pre-activations off their kink
        let jittered: Vec<f64> = flatten(&model).iter().map(|w| w + rng.gen_range(-0.3..0.3)).collect();
        assign_flat(&mut model, &jittered);
        let x: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fps: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..7).map(|_| if rng.gen_bool(0.5) { rng.gen_range(1..3) as f64 } else { 0.0 }).collect())
            .collect();
        let aucs: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut labels: Vec<bool> = (0..6).map(|_| rng.gen_bool(0.3)).collect();
        labels[2] = true;
        (model, x, fps, aucs, labels)
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        for seed in 0..10u64 {
            let (model, x, fps, aucs, labels) = random_problem(seed);
            let drugs: Vec<usize> = (0..6).collect();
            for target in [
                ListTarget::TopOne(top_one_target(&aucs).unwrap()),
                ListTarget::Labels(labels.clone()),
            ] {
                let mut grads = model.zeros_like();
                model
                    .list_loss_and_grad(&x, &drugs, &fps, &target, 0.5, &mut grads)
                    .unwrap();
                let numeric = finite_diff_grad(
                    |p| {
                        let mut m = model.clone();
                        assign_flat(&mut m, p);
                        let mut scratch = m.zeros_like();
                        m.list_loss_and_grad(&x, &drugs, &fps, &target, 0.5, &mut scratch)
                            .unwrap()
                    },
                    &flatten(&model),
                    1e-5,
                )
                .unwrap();
                let err = relative_error(&flatten(&grads), &numeric);
                assert!(err < 1e-6, "seed {seed}: {err}");
            }
        }
    }

    #[test]
    fn loss_invariant_to_list_order() {
        let (model, x, fps, _aucs, labels) = random_problem(42);
        let drugs: Vec<usize> = (0..6).collect();
        let perm = [4, 2, 0, 5, 1, 3];
        let pdrugs: Vec<usize> = perm.iter().map(|&i| drugs[i]).collect();
        let plabels: Vec<bool> = perm.iter().map(|&i| labels[i]).collect();
        let mut g = model.zeros_like();
        let a = model
            .list_loss_and_grad(&x, &drugs, &fps, &ListTarget::Labels(labels), 0.5, &mut g)
            .unwrap();
        let b = model
            .list_loss_and_grad(&x, &pdrugs, &fps, &ListTarget::Labels(plabels), 0.5, &mut g)
            .unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_keeps_parameters() {
        let (model, x, fps, _aucs, labels) = random_problem(7);
        let lists = vec![TrainingList {
            expression: x,
            drugs: (0..6).collect(),
            target: ListTarget::Labels(labels),
        }];
        let cfg = TrainConfig {
            epochs: 1,
            lr: 0.0,
            ..Default::default()
        };
        let out = train(model.clone(), &lists, &fps, &cfg).unwrap();
        assert_eq!(out.model, model);
        assert_eq!(out.log.len(), 1);
    }

    #[test]
    fn training_reduces_loss_and_is_deterministic() {
        let (model, x, fps, aucs, labels) = random_problem(8);
        let lists = vec![
            TrainingList {
                expression: x.clone(),
                drugs: (0..6).collect(),
                target: ListTarget::Labels(labels),
            },
            TrainingList {
                expression: x.iter().map(|v| -v).collect(),
                drugs: vec![0, 2, 4],
                target: ListTarget::TopOne(top_one_target(&[aucs[0], aucs[2], aucs[4]]).unwrap()),
            },
        ];
        let cfg = TrainConfig {
            epochs: 30,
            lr: 1e-2,
            ..Default::default()
        };
        let a = train(model.clone(), &lists, &fps, &cfg).unwrap();
        let b = train(model, &lists, &fps, &cfg).unwrap();
        assert_eq!(a.model, b.model);
        assert!(a.log.last().unwrap().loss <= a.log[0].loss);
    }

    #[test]
    fn bilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut w = Matrix::<f64>::zeros(4, 3);
        fill_glorot(&mut w, &mut rng);
        for _ in 0..50 {
            let u1: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let u2: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let alpha = rng.gen_range(-3.0..3.0);
            let scaled: Vec<f64> = u1.iter().map(|x| alpha * x).collect();
            let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
            let s1 = score(&u1, &v, &w).unwrap();
            assert!((score(&scaled, &v, &w).unwrap() - alpha * s1).abs() < 1e-9);
            assert!((score(&sum, &v, &w).unwrap() - s1 - score(&u2, &v, &w).unwrap()).abs() < 1e-9);
        }
    }
}
