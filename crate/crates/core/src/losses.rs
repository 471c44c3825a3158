//! Listwise objectives over one cell line's drug list.
//!
//! * List-One: cross-entropy between the top-one distribution induced by
//!   negated AUCs and `softmax(scores)`.
//! * List-All: cross-entropy between raw binary sensitivity labels and
//!   `softmax(scores / τ)`. Labels are not normalized, so a list with more
//!   sensitive drugs contributes proportionally more loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{cross_entropy, softmax, ProbVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    ListOne,
    ListAll,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::ListOne => "list_one",
            LossKind::ListAll => "list_all",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "list_one" | "list-one" => Ok(LossKind::ListOne),
            "list_all" | "list-all" => Ok(LossKind::ListAll),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected list_one or list_all)"
            ))),
        }
    }
}

/// Ground truth for one list.
#[derive(Debug, Clone, PartialEq)]
pub enum ListTarget<T> {
    TopOne(ProbVector<T>),
    Labels(Vec<bool>),
}

impl<T: Scalar> ListTarget<T> {
    pub fn len(&self) -> usize {
        match self {
            ListTarget::TopOne(p) => p.len(),
            ListTarget::Labels(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Loss value and its gradient with respect to the scores.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub loss: T,
    pub grad: Vec<T>,
}

/// Ground-truth top-one probabilities: `softmax(−aucs)` at unit temperature.
pub fn top_one_target<T: Scalar>(aucs: &[T]) -> Result<ProbVector<T>> {
    let negated: Vec<T> = aucs.iter().map(|&a| -a).collect();
    softmax(&negated, T::one())
}

pub fn listone_loss<T: Scalar>(scores: &[T], target: &ProbVector<T>) -> Result<LossGrad<T>> {
    if scores.len() != target.len() {
        return Err(Error::shape(format!(
            "{} scores for a target over {} drugs",
            scores.len(),
            target.len()
        )));
    }
    let p = softmax(scores, T::one())?;
    let loss = cross_entropy(target.as_slice(), &p)?;
    let grad = p
        .as_slice()
        .iter()
        .zip(target.as_slice())
        .map(|(&pi, &qi)| pi - qi)
        .collect();
    Ok(LossGrad { loss, grad })
}

pub fn listall_loss<T: Scalar>(scores: &[T], labels: &[bool], tau: T) -> Result<LossGrad<T>> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::domain("list has no sensitive drug"));
    }
    let s = softmax(scores, tau)?;
    let targets: Vec<T> = labels.iter().map(|&l| if l { T::one() } else { T::zero() }).collect();
    let loss = cross_entropy(&targets, &s)?;
    let total = T::lit(positives as f64);
    let grad = s
        .as_slice()
        .iter()
        .zip(&targets)
        .map(|(&si, &li)| (total * si - li) / tau)
        .collect();
    Ok(LossGrad { loss, grad })
}

/// Dispatches to the objective matching `target`.
pub fn list_loss<T: Scalar>(scores: &[T], target: &ListTarget<T>, tau: T) -> Result<LossGrad<T>> {
    match target {
        ListTarget::TopOne(p) => listone_loss(scores, p),
        ListTarget::Labels(l) => listall_loss(scores, l, tau),
    }
}
