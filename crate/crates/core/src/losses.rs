//! Focal and smooth-L1 losses with analytic derivatives, the eight-way
//! regression loss, per-map aggregation and the weighted total.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::targets::Label;

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig<T> {
    pub alpha_t: T,
    pub gamma: T,
    pub lambda1: T,
    pub lambda2: T,
    pub lambda3: T,
    pub smooth_l1_beta: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        Self {
            alpha_t: T::lit(0.25),
            gamma: T::lit(2.0),
            lambda1: T::one(),
            lambda2: T::one(),
            lambda3: T::one(),
            smooth_l1_beta: T::one(),
        }
    }
}

impl<T: Scalar> LossConfig<T> {
    // Negated comparisons so that NaN fails every check.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.alpha_t > T::zero() && self.alpha_t < T::one()) {
            return bad("alpha_t must lie in (0, 1)");
        }
        if !(self.gamma >= T::zero()) {
            return bad("gamma must be non-negative");
        }
        if !(self.lambda1 > T::zero() && self.lambda2 > T::zero() && self.lambda3 > T::zero()) {
            return bad("loss weights must be positive");
        }
        if !(self.smooth_l1_beta > T::zero()) {
            return bad("smooth_l1_beta must be positive");
        }
        Ok(())
    }
}

/// A loss value and its derivative with respect to the prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrad<T> {
    pub value: T,
    pub grad: T,
}

/// `-alpha_t (1 - p_t)^gamma ln p_t` with `p_t = p` for positives and
/// `1 - p` otherwise. The derivative is zero where the clamp is active.
pub fn focal_loss<T: Scalar>(p: T, positive: bool, cfg: &LossConfig<T>) -> LossGrad<T> {
    let eps = T::lit(PROB_EPS);
    let clamped = p.max(eps).min(T::one() - eps);
    let pt = if positive { clamped } else { T::one() - clamped };
    let q = T::one() - pt;
    let ln_pt = pt.ln();
    let value = -cfg.alpha_t * q.powf(cfg.gamma) * ln_pt;

    if clamped != p {
        return LossGrad { value, grad: T::zero() };
    }
    // d/dpt of -a q^g ln pt = a (g q^(g-1) ln pt - q^g / pt)
    let dq = if cfg.gamma == T::zero() { T::zero() } else { cfg.gamma * q.powf(cfg.gamma - T::one()) * ln_pt };
    let d_pt = cfg.alpha_t * (dq - q.powf(cfg.gamma) / pt);
    LossGrad { value, grad: if positive { d_pt } else { -d_pt } }
}

/// Quadratic below `beta`, linear above; continuous with continuous slope
/// at the knee.
pub fn smooth_l1<T: Scalar>(d: T, beta: T) -> LossGrad<T> {
    let half = T::lit(0.5);
    if d.abs() < beta {
        LossGrad { value: half * d * d / beta, grad: d / beta }
    } else {
        LossGrad { value: d.abs() - half * beta, grad: d.signum() }
    }
}

/// Mean smooth-L1 over the eight corner coordinates.
pub fn regression_loss<T: Scalar>(pred: &[T; 8], target: &[T; 8], beta: T) -> T {
    let sum: T = pred.iter().zip(target).map(|(p, t)| smooth_l1(*p - *t, beta).value).sum();
    sum / T::lit(8.0)
}

/// Mean focal loss over every non-ignored bin (zero if there are none).
pub fn classification_loss<T: Scalar>(probs: &[T], labels: &[Label], cfg: &LossConfig<T>) -> Result<T> {
    if probs.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores for {} labels", probs.len(), labels.len())));
    }
    let mut sum = T::zero();
    let mut count = 0usize;
    for (p, l) in probs.iter().zip(labels) {
        match l {
            Label::Ignore => continue,
            Label::Positive => sum += focal_loss(*p, true, cfg).value,
            Label::Negative => sum += focal_loss(*p, false, cfg).value,
        }
        count += 1;
    }
    Ok(if count == 0 { T::zero() } else { sum / T::from_usize_lossy(count) })
}

/// Mean [`regression_loss`] over positive bins (zero if there are none).
/// `pred` and `target` carry eight values per bin.
pub fn mean_regression_loss<T: Scalar>(pred: &[T], target: &[T], labels: &[Label], beta: T) -> Result<T> {
    if pred.len() != labels.len() * 8 || target.len() != labels.len() * 8 {
        return Err(Error::ShapeMismatch(format!(
            "expected {} offsets, got pred {} target {}",
            labels.len() * 8,
            pred.len(),
            target.len()
        )));
    }
    let mut sum = T::zero();
    let mut count = 0usize;
    for (i, _) in labels.iter().enumerate().filter(|(_, l)| **l == Label::Positive) {
        let p: [T; 8] = std::array::from_fn(|k| pred[i * 8 + k]);
        let t: [T; 8] = std::array::from_fn(|k| target[i * 8 + k]);
        sum += regression_loss(&p, &t, beta);
        count += 1;
    }
    Ok(if count == 0 { T::zero() } else { sum / T::from_usize_lossy(count) })
}

/// The four aggregated terms combined by [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms<T> {
    pub cls_initial: T,
    pub reg_initial: T,
    pub cls_refined: T,
    pub reg_refined: T,
}

/// `cls_i + l1 reg_i + l3 (cls_r + l2 reg_r)`.
pub fn total_loss<T: Scalar>(terms: &LossTerms<T>, cfg: &LossConfig<T>) -> T {
    terms.cls_initial
        + cfg.lambda1 * terms.reg_initial
        + cfg.lambda3 * (terms.cls_refined + cfg.lambda2 * terms.reg_refined)
}
