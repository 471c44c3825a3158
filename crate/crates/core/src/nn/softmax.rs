use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A categorical distribution over the items of one ranked list.
///
/// Entries sum to one; an entry may underflow to zero when score gaps exceed
/// the scalar's exponent range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ProbVector<T>(Vec<T>);

impl<T: Scalar> ProbVector<T> {
    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Wraps values that are already a distribution (non-negative, sum 1 within 1e-9).
    pub fn from_probs(probs: Vec<T>) -> Result<Self> {
        if probs.iter().any(|p| !p.is_finite() || *p < T::zero()) {
            return Err(Error::domain("probabilities must be finite and non-negative"));
        }
        let total: T = probs.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::domain(format!("probabilities sum to {total}, not 1")));
        }
        Ok(ProbVector(probs))
    }
}

impl<T> std::ops::Index<usize> for ProbVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Temperature softmax `exp(s_i/τ) / Σ_j exp(s_j/τ)` with max-subtraction.
pub fn softmax<T: Scalar>(scores: &[T], tau: T) -> Result<ProbVector<T>> {
    if scores.is_empty() {
        return Err(Error::domain("softmax of an empty list"));
    }
    if !(tau > T::zero()) || !tau.is_finite() {
        return Err(Error::domain(format!("temperature must be positive, got {tau}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::domain("softmax input contains a non-finite score"));
    }
    let max = scores.iter().copied().fold(T::neg_infinity(), T::max);
    let mut exps: Vec<T> = scores.iter().map(|&s| ((s - max) / tau).exp()).collect();
    let total: T = exps.iter().copied().sum();
    for e in &mut exps {
        *e /= total;
    }
    Ok(ProbVector(exps))
}

/// `−Σ targets[i]·ln(probs[i])`, with zero-target terms skipped and
/// probabilities floored at [`Scalar::prob_floor`].
///
/// Targets need not sum to one.
pub fn cross_entropy<T: Scalar>(targets: &[T], probs: &ProbVector<T>) -> Result<T> {
    if targets.len() != probs.len() {
        return Err(Error::shape(format!(
            "{} targets for {} probabilities",
            targets.len(),
            probs.len()
        )));
    }
    let mut loss = T::zero();
    for (&t, &p) in targets.iter().zip(probs.as_slice()) {
        if t < T::zero() || !t.is_finite() {
            return Err(Error::domain(format!("target {t} is not a finite non-negative weight")));
        }
        if t == T::zero() {
            continue;
        }
        loss -= t * p.max(T::prob_floor()).ln();
    }
    if !loss.is_finite() {
        return Err(Error::Numeric("cross-entropy is not finite".into()));
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn uniform_on_equal_scores() {
        let p = softmax(&[0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(close(p.as_slice(), &[1.0 / 3.0; 3], 1e-15));
        for tau in [0.1, 0.5, 3.0] {
            let p = softmax(&[4.2, 4.2], tau).unwrap();
            assert!(close(p.as_slice(), &[0.5, 0.5], 1e-15));
        }
    }

    #[test]
    fn log_two_gap_gives_one_third_two_thirds() {
        let p = softmax(&[0.0, 2f64.ln()], 1.0).unwrap();
        assert!(close(p.as_slice(), &[1.0 / 3.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax::<f64>(&[], 1.0), Err(Error::Domain(_))));
        assert!(matches!(softmax(&[1.0, f64::NAN], 1.0), Err(Error::Domain(_))));
        assert!(matches!(softmax(&[1.0, f64::INFINITY], 1.0), Err(Error::Domain(_))));
        assert!(softmax(&[1.0], 0.0).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let perfect = ProbVector(vec![1.0, 0.0]);
        assert_eq!(cross_entropy(&[1.0, 0.0], &perfect).unwrap(), 0.0);

        let half = ProbVector(vec![0.5, 0.5]);
        let h = cross_entropy(&[0.5, 0.5], &half).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);

        let third = ProbVector(vec![1.0 / 3.0; 3]);
        let l = cross_entropy(&[1.0, 1.0, 0.0], &third).unwrap();
        assert!((l - 2.0 * 3f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cross_entropy_stays_finite_on_underflow() {
        let p = softmax(&[0.0f64, 2000.0], 1.0).unwrap();
        assert_eq!(p[0], 0.0);
        let l = cross_entropy(&[1.0, 0.0], &p).unwrap();
        assert!(l.is_finite() && l > 600.0);
        assert!(cross_entropy(&[1.0], &p).is_err());
        assert!(cross_entropy(&[-1.0, 0.0], &p).is_err());
    }

    #[test]
    fn f32_softmax_sums_to_one() {
        let p = softmax(&[1.0f32, 2.0, 3.0], 0.5).unwrap();
        let s: f32 = p.as_slice().iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }

    fn scores_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (0.05f64..5.0).prop_flat_map(|tau| {
            let bound = 500.0 * tau;
            (prop::collection::vec(-bound..bound, 1..30), Just(tau))
        })
    }

    proptest! {
        #[test]
        fn sums_to_one((s, tau) in scores_strategy()) {
            let p = softmax(&s, tau).unwrap();
            let total: f64 = p.as_slice().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }

        #[test]
        fn shift_invariant(s in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0, tau in 0.1f64..4.0) {
            let shifted: Vec<f64> = s.iter().map(|v| v + c).collect();
            let a = softmax(&s, tau).unwrap();
            let b = softmax(&shifted, tau).unwrap();
            prop_assert!(close(a.as_slice(), b.as_slice(), 1e-12));
        }

        #[test]
        fn lower_temperature_sharpens(s in prop::collection::vec(-10.0f64..10.0, 2..20), t1 in 0.2f64..5.0, frac in 0.05f64..0.95) {
            let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assume!(s.iter().filter(|&&v| v == max).count() == 1);
            let t2 = t1 * frac;
            let p1 = softmax(&s, t1).unwrap();
            let p2 = softmax(&s, t2).unwrap();
            let argmax = |p: &ProbVector<f64>| {
                let v = p.as_slice();
                (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
            };
            prop_assert_eq!(argmax(&p1), argmax(&p2));
            prop_assert!(p2[argmax(&p2)] >= p1[argmax(&p1)] - 1e-15);
        }
    }
}
