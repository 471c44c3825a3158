use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamConfig<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> Default for AdamConfig<T> {
    fn default() -> Self {
        AdamConfig {
            lr: T::lit(1e-3),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> AdamConfig<T> {
    pub fn with_lr(lr: T) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

/// Moment estimates for one flat tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub config: AdamConfig<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, config: AdamConfig<T>) -> Self {
        AdamState {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            config,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.first_moment.len() {
            return Err(Error::shape(format!(
                "adam: {} params, {} grads, {} moment entries",
                params.len(),
                grads.len(),
                self.first_moment.len()
            )));
        }
        self.step_count += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = T::one() - beta1.powi(t);
        let bias2 = T::one() - beta2.powi(t);
        let tiny = T::min_positive_value();
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = beta1 * *m + (T::one() - beta1) * g;
            *v = beta2 * *v + (T::one() - beta2) * g * g;
            // A moment that stops receiving gradient decays into the subnormal
            // range and stalls there (β·x rounds back to x), slowing every
            // later step; at that size it cannot move the parameter anyway.
            if m.abs() < tiny {
                *m = T::zero();
            }
            if *v < tiny {
                *v = T::zero();
            }
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Adam over every tensor of a [`Parameters`] model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Adam<T> {
    pub states: Vec<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<P: Parameters<T> + ?Sized>(model: &P, config: AdamConfig<T>) -> Self {
        Adam {
            states: model
                .tensors()
                .iter()
                .map(|t| AdamState::new(t.len(), config))
                .collect(),
        }
    }

    pub fn step<P: Parameters<T> + ?Sized>(&mut self, model: &mut P, grads: &P) -> Result<()> {
        let grad_tensors = grads.tensors();
        let mut param_tensors = model.tensors_mut();
        if grad_tensors.len() != param_tensors.len() || param_tensors.len() != self.states.len() {
            return Err(Error::shape("adam: tensor count mismatch"));
        }
        for ((p, g), state) in param_tensors
            .iter_mut()
            .zip(grad_tensors)
            .zip(&mut self.states)
        {
            state.step(p, g)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut state = AdamState::new(3, AdamConfig::default());
        let mut p = vec![1.0, -2.0, 0.5];
        state.step(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(state.step_count, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        // t=1: m̂ = g, v̂ = g², so Δ = lr·g/(|g|+ε)
        let mut state = AdamState::new(1, AdamConfig::with_lr(0.001));
        let mut p = vec![0.0f64];
        state.step(&mut p, &[1.0]).unwrap();
        let expected = -0.001 * 1.0 / (1.0 + 1e-8);
        assert!((p[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn identical_entries_get_identical_updates() {
        let mut state = AdamState::new(2, AdamConfig::default());
        let mut p = vec![0.3, 0.3];
        for g in [0.5, -1.5, 2.0] {
            state.step(&mut p, &[g, g]).unwrap();
            assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn deterministic_and_moments_nonnegative() {
        let run = || {
            let mut state = AdamState::new(2, AdamConfig::default());
            let mut p = vec![1.0, 2.0];
            for k in 0..5 {
                state.step(&mut p, &[k as f64 - 2.0, 0.1 * k as f64]).unwrap();
            }
            (p, state)
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
        assert!(sa.second_moment.iter().all(|&v| v >= 0.0));
        assert_eq!(sa.step_count, 5);
    }

    #[test]
    fn starved_moments_reach_exact_zero() {
        let mut state = AdamState::new(1, AdamConfig::default());
        let mut p = vec![0.0f64];
        state.step(&mut p, &[1.0]).unwrap();
        for _ in 0..8000 {
            state.step(&mut p, &[0.0]).unwrap();
            assert!(!state.first_moment[0].is_subnormal());
        }
        assert_eq!(state.first_moment[0], 0.0);
    }

    #[test]
    fn shape_mismatch() {
        let mut state = AdamState::<f64>::new(2, AdamConfig::default());
        assert!(matches!(
            state.step(&mut [0.0, 0.0], &[1.0]),
            Err(Error::Shape(_))
        ));
    }
}
