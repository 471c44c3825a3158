//! Stacked autoencoder over expression profiles. The encoder half produces the
//! cell embeddings that the ranker later finetunes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Standardizer;
use crate::error::{Error, Result};
use crate::nn::{Activation, Adam, AdamConfig, Mlp, Parameters};
use crate::scalar::Scalar;

/// Widths of the encoder; the decoder mirrors them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutoencoderDims {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub latent: usize,
}

impl AutoencoderDims {
    /// 4,096 → 1,024 → 128.
    pub fn full_scale(input: usize) -> Self {
        AutoencoderDims {
            input,
            hidden: vec![4096, 1024],
            latent: 128,
        }
    }

    pub fn encoder_widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend(&self.hidden);
        w.push(self.latent);
        w
    }

    pub fn decoder_widths(&self) -> Vec<usize> {
        let mut w = self.encoder_widths();
        w.reverse();
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeneAutoencoder<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
}

impl<T: Scalar> GeneAutoencoder<T> {
    pub fn new(dims: &AutoencoderDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Mlp::glorot(&dims.encoder_widths(), Activation::Identity, &mut rng);
        let decoder = Mlp::glorot(&dims.decoder_widths(), Activation::Identity, &mut rng);
        GeneAutoencoder { encoder, decoder }
    }

    pub fn from_parts(encoder: Mlp<T>, decoder: Mlp<T>) -> Result<Self> {
        if encoder.out_dim() != decoder.in_dim() || decoder.out_dim() != encoder.in_dim() {
            return Err(Error::shape(format!(
                "encoder {:?} and decoder {:?} do not chain",
                encoder.dims(),
                decoder.dims()
            )));
        }
        Ok(GeneAutoencoder { encoder, decoder })
    }

    pub fn zeros_like(&self) -> Self {
        GeneAutoencoder {
            encoder: self.encoder.zeros_like(),
            decoder: self.decoder.zeros_like(),
        }
    }

    /// Returns the embedding and the reconstruction.
    pub fn autoencode(&self, x: &[T]) -> Result<(Vec<T>, Vec<T>)> {
        let u = self.encoder.forward(x)?;
        let recon = self.decoder.forward(&u)?;
        Ok((u, recon))
    }

    /// Mean over cells of `‖x − x̃‖²`.
    pub fn reconstruction_loss(&self, batch: &[Vec<T>]) -> Result<T> {
        if batch.is_empty() {
            return Err(Error::domain("reconstruction loss of an empty batch"));
        }
        let mut total = T::zero();
        for x in batch {
            let (_, recon) = self.autoencode(x)?;
            total += squared_error(x, &recon);
        }
        Ok(total / T::lit(batch.len() as f64))
    }

    /// Loss and its gradient with respect to every encoder and decoder parameter.
    pub fn loss_and_grad(&self, batch: &[&[T]]) -> Result<(T, GeneAutoencoder<T>)> {
        if batch.is_empty() {
            return Err(Error::domain("reconstruction loss of an empty batch"));
        }
        let scale = T::lit(batch.len() as f64).recip();
        let mut grads = self.zeros_like();
        let mut total = T::zero();
        for x in batch {
            let enc = self.encoder.forward_trace(x)?;
            let dec = self.decoder.forward_trace(enc.output())?;
            let recon = dec.output();
            total += squared_error(x, recon);
            let upstream: Vec<T> = recon
                .iter()
                .zip(x.iter())
                .map(|(&r, &xi)| T::lit(2.0) * scale * (r - xi))
                .collect();
            let grad_u = self
                .decoder
                .backward(&dec, &upstream, &mut grads.decoder, true)
                .expect("input gradient requested");
            self.encoder.backward(&enc, &grad_u, &mut grads.encoder, false);
        }
        Ok((total * scale, grads))
    }
}

fn squared_error<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum()
}

impl<T: Scalar> Parameters<T> for GeneAutoencoder<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.encoder.tensors();
        t.extend(self.decoder.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.encoder.tensors_mut();
        t.extend(self.decoder.tensors_mut());
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome<T> {
    pub autoencoder: GeneAutoencoder<T>,
    /// Full-set loss after each epoch; entry 0 is the initialization.
    pub log: Vec<EpochLoss>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

/// Mini-batch Adam on the reconstruction loss of `cells` (already standardized).
///
/// Returns the parameters with the lowest full-set training loss seen, so the
/// result never reconstructs worse than the initialization.
pub fn pretrain<T: Scalar>(
    init: GeneAutoencoder<T>,
    cells: &[Vec<T>],
    config: &PretrainConfig,
) -> Result<PretrainOutcome<T>> {
    if cells.is_empty() {
        return Err(Error::domain("pretraining needs at least one cell"));
    }
    if config.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let mut ae = init;
    let mut adam = Adam::new(&ae, AdamConfig::with_lr(T::lit(config.lr)));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_ae00);
    let mut order: Vec<usize> = (0..cells.len()).collect();

    let initial = ae.reconstruction_loss(cells)?.as_f64();
    let mut log = vec![EpochLoss { epoch: 0, loss: initial }];
    let mut best = (initial, 0, ae.clone());

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&[T]> = chunk.iter().map(|&i| cells[i].as_slice()).collect();
            let (loss, grads) = ae.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    message: "reconstruction loss is not finite".into(),
                });
            }
            adam.step(&mut ae, &grads)?;
        }
        let loss = ae.reconstruction_loss(cells)?.as_f64();
        if !loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                message: "reconstruction loss is not finite".into(),
            });
        }
        log.push(EpochLoss { epoch, loss });
        if loss < best.0 {
            best = (loss, epoch, ae.clone());
        }
    }
    Ok(PretrainOutcome {
        autoencoder: best.2,
        log,
        best_epoch: best.1,
    })
}

/// Pretrained encoder plus the expression standardization it was fit with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderCheckpoint {
    pub dims: AutoencoderDims,
    pub standardizer: Standardizer,
    pub autoencoder: GeneAutoencoder<f64>,
}

pub const ENCODER_CHECKPOINT_KIND: &str = "gene_autoencoder";

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{assign_flat, finite_diff_grad, flatten, relative_error};

    fn small_dims() -> AutoencoderDims {
        AutoencoderDims {
            input: 4,
            hidden: vec![6, 5],
            latent: 2,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let ae = GeneAutoencoder::<f64>::new(&small_dims(), 0);
        let zero = ae.zeros_like();
        let (u, r) = zero.autoencode(&[1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(u, vec![0.0; 2]);
        assert_eq!(r, vec![0.0; 4]);
    }

    #[test]
    fn shapes_and_determinism() {
        let dims = AutoencoderDims {
            input: 2,
            hidden: vec![2],
            latent: 1,
        };
        let ae = GeneAutoencoder::<f64>::new(&dims, 5);
        let (u, r) = ae.autoencode(&[0.3, -0.7]).unwrap();
        assert_eq!(u.len(), 1);
        assert_eq!(r.len(), 2);
        assert!(r.iter().all(|v| v.is_finite()));
        assert_eq!(ae.autoencode(&[0.3, -0.7]).unwrap(), (u, r));
        assert_eq!(ae, GeneAutoencoder::new(&dims, 5));
        assert!(matches!(ae.autoencode(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn reconstruction_loss_examples() {
        let dims = AutoencoderDims {
            input: 2,
            hidden: vec![],
            latent: 2,
        };
        let mut ae = GeneAutoencoder::<f64>::new(&dims, 0).zeros_like();
        // zero net reconstructs 0: one cell [1,0] has error 1
        assert_eq!(ae.reconstruction_loss(&[vec![1.0, 0.0]]).unwrap(), 1.0);
        // errors 1 and 3 average to 2
        let l = ae
            .reconstruction_loss(&[vec![1.0, 0.0], vec![1.0, 2f64.sqrt()]])
            .unwrap();
        assert!((l - 2.0).abs() < 1e-14);
        ae.encoder.layers[0].weights = crate::nn::Matrix::identity(2);
        ae.decoder.layers[0].weights = crate::nn::Matrix::identity(2);
        assert_eq!(ae.reconstruction_loss(&[vec![0.5, -0.25]]).unwrap(), 0.0);
        assert!(ae.reconstruction_loss(&[]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        for seed in 0..10u64 {
            let mut ae = GeneAutoencoder::<f64>::new(&small_dims(), seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            // nonzero biases keep relu pre-activations off their kink
            let jittered: Vec<f64> = flatten(&ae).iter().map(|w| w + rng.gen_range(-0.3..0.3)).collect();
            assign_flat(&mut ae, &jittered);
            let batch: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = batch.iter().map(Vec::as_slice).collect();
            let (_, grads) = ae.loss_and_grad(&refs).unwrap();
            let numeric = finite_diff_grad(
                |p| {
                    let mut m = ae.clone();
                    assign_flat(&mut m, p);
                    m.reconstruction_loss(&batch).unwrap()
                },
                &flatten(&ae),
                1e-5,
            )
            .unwrap();
            let err = relative_error(&flatten(&grads), &numeric);
            assert!(err < 1e-6, "seed {seed}: {err}");
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let ae = GeneAutoencoder::<f64>::new(&small_dims(), 1);
        let cells = vec![vec![0.1, 0.2, 0.3, 0.4]];
        let cfg = PretrainConfig {
            epochs: 0,
            ..Default::default()
        };
        let out = pretrain(ae.clone(), &cells, &cfg).unwrap();
        assert_eq!(out.autoencoder, ae);
        assert_eq!(out.log.len(), 1);
    }

    fn line_data() -> Vec<Vec<f64>> {
        let dir = [0.5, -1.0, 0.25, 0.8];
        (0..40)
            .map(|i| {
                let t = (i as f64 / 39.0) * 2.0 - 1.0;
                dir.iter().map(|d| d * t).collect()
            })
            .collect()
    }

    #[test]
    fn learns_one_dimensional_data() {
        let ae = GeneAutoencoder::<f64>::new(&small_dims(), 2);
        let cfg = PretrainConfig {
            epochs: 200,
            batch_size: 32,
            lr: 1e-2,
            seed: 2,
        };
        let out = pretrain(ae, &line_data(), &cfg).unwrap();
        let initial = out.log[0].loss;
        let final_loss = out.log.last().unwrap().loss;
        assert!(final_loss < 0.1 * initial, "{initial} -> {final_loss}");
    }

    #[test]
    fn linear_full_batch_is_monotone() {
        let dims = AutoencoderDims {
            input: 4,
            hidden: vec![],
            latent: 1,
        };
        let mut ae = GeneAutoencoder::<f64>::new(&dims, 3);
        ae.encoder.layers[0].activation = Activation::Identity;
        let cfg = PretrainConfig {
            epochs: 50,
            batch_size: 1000,
            lr: 1e-3,
            seed: 3,
        };
        let out = pretrain(ae, &line_data(), &cfg).unwrap();
        for pair in out.log.windows(2) {
            assert!(pair[1].loss <= pair[0].loss + 1e-12);
        }
    }

    #[test]
    fn same_seed_same_parameters() {
        let cfg = PretrainConfig {
            epochs: 5,
            batch_size: 8,
            lr: 1e-3,
            seed: 9,
        };
        let run = || {
            pretrain(GeneAutoencoder::<f64>::new(&small_dims(), 9), &line_data(), &cfg)
                .unwrap()
                .autoencoder
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn divergence_names_epoch() {
        let ae = GeneAutoencoder::<f64>::new(&small_dims(), 4);
        let cells = vec![vec![1e200, -1e200, 1e200, 1e200]];
        let cfg = PretrainConfig {
            epochs: 3,
            ..Default::default()
        };
        match pretrain(ae, &cells, &cfg) {
            Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 1),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.log)),
        }
    }
}
