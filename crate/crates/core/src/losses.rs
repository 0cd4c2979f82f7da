//! Segmentation losses over per-pixel class probabilities, with analytic
//! gradients taken through the softmax.
//!
//! Region losses (Jaccard, Dice, Tversky) are soft, computed per class
//! over the whole tensor and macro-averaged. Every region score is
//! smoothed the same way, `(I + eps) / (D + eps)` with `I = sum p*g` and
//! `D` the kind's denominator (Dice uses `D = (sum p + sum g) / 2`), so
//! Tversky with alpha = beta = 1/2 coincides with Dice exactly rather than
//! up to `O(eps)`. Focal loss is averaged over pixels. Combined kinds add a weighted focal term to a region term.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{ClassMask, Tensor};
use crate::scalar::Scalar;

/// Channel-sum tolerance accepted for probability inputs.
pub const PROBABILITY_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Jaccard,
    Dice,
    Tversky,
    Focal,
    #[default]
    JaccardPlusFocal,
    DicePlusFocal,
    TverskyPlusFocal,
}

impl LossKind {
    pub const ALL: [LossKind; 7] = [
        LossKind::Jaccard,
        LossKind::Dice,
        LossKind::Tversky,
        LossKind::Focal,
        LossKind::JaccardPlusFocal,
        LossKind::DicePlusFocal,
        LossKind::TverskyPlusFocal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Jaccard => "jaccard",
            LossKind::Dice => "dice",
            LossKind::Tversky => "tversky",
            LossKind::Focal => "focal",
            LossKind::JaccardPlusFocal => "jaccard-plus-focal",
            LossKind::DicePlusFocal => "dice-plus-focal",
            LossKind::TverskyPlusFocal => "tversky-plus-focal",
        }
    }

    fn parts(self) -> (Option<Region>, bool) {
        match self {
            LossKind::Jaccard => (Some(Region::Jaccard), false),
            LossKind::Dice => (Some(Region::Dice), false),
            LossKind::Tversky => (Some(Region::Tversky), false),
            LossKind::Focal => (None, true),
            LossKind::JaccardPlusFocal => (Some(Region::Jaccard), true),
            LossKind::DicePlusFocal => (Some(Region::Dice), true),
            LossKind::TverskyPlusFocal => (Some(Region::Tversky), true),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss kind {s:?}")))
    }
}

#[derive(Clone, Copy)]
enum Region {
    Jaccard,
    Dice,
    Tversky,
}

/// Loss settings. Missing keys take their defaults when deserialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    rename_all = "kebab-case",
    default,
    deny_unknown_fields,
    bound(serialize = "T: Serialize", deserialize = "T: Scalar + Deserialize<'de>")
)]
pub struct LossConfig<T = f64> {
    pub kind: LossKind,
    /// Smoothing added to numerators and denominators of region losses and
    /// inside the focal logarithm.
    pub epsilon: T,
    pub focal_gamma: T,
    pub focal_alpha: T,
    /// Tversky false-positive weight.
    pub tversky_alpha: T,
    /// Tversky false-negative weight.
    pub tversky_beta: T,
    pub region_weight: T,
    pub focal_weight: T,
}

impl<T: Scalar> Default for LossConfig<T> {
    fn default() -> Self {
        LossConfig {
            kind: LossKind::JaccardPlusFocal,
            epsilon: T::lit(1e-6),
            focal_gamma: T::lit(2.0),
            focal_alpha: T::one(),
            tversky_alpha: T::lit(0.3),
            tversky_beta: T::lit(0.7),
            region_weight: T::one(),
            focal_weight: T::one(),
        }
    }
}

impl<T: Scalar> LossConfig<T> {
    pub fn of_kind(kind: LossKind) -> Self {
        LossConfig {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.epsilon > T::zero(), "epsilon must be > 0"),
            (self.focal_gamma >= T::zero(), "focal gamma must be >= 0"),
            (self.focal_alpha >= T::zero(), "focal alpha must be >= 0"),
            (self.tversky_alpha >= T::zero(), "tversky alpha must be >= 0"),
            (self.tversky_beta >= T::zero(), "tversky beta must be >= 0"),
            (self.region_weight >= T::zero(), "region weight must be >= 0"),
            (self.focal_weight >= T::zero(), "focal weight must be >= 0"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}

/// Exact one-hot target stored as per-pixel class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneHotTarget {
    height: usize,
    width: usize,
    channels: usize,
    classes: Vec<u8>,
}

impl OneHotTarget {
    pub fn new(height: usize, width: usize, channels: usize, classes: Vec<u8>) -> Result<Self> {
        if classes.len() != height * width {
            return Err(Error::InvalidTarget(format!(
                "{height}x{width} target needs {} classes, got {}",
                height * width,
                classes.len()
            )));
        }
        if let Some(c) = classes.iter().find(|&&c| c as usize >= channels) {
            return Err(Error::InvalidTarget(format!(
                "class {c} out of range for {channels} channels"
            )));
        }
        Ok(OneHotTarget {
            height,
            width,
            channels,
            classes,
        })
    }

    pub fn from_mask(mask: &ClassMask) -> Self {
        OneHotTarget {
            height: mask.height(),
            width: mask.width(),
            channels: 3,
            classes: mask.data().iter().map(|c| c.index() as u8).collect(),
        }
    }

    /// Accepts only tensors whose every pixel is exactly one-hot.
    pub fn from_tensor<T: Scalar>(t: &Tensor<T>) -> Result<Self> {
        let mut classes = Vec::with_capacity(t.pixel_count());
        for (i, px) in t.pixels().enumerate() {
            let ones: Vec<usize> = (0..px.len()).filter(|&c| px[c] == T::one()).collect();
            let zeros = px.iter().filter(|v| **v == T::zero()).count();
            if ones.len() != 1 || zeros != px.len() - 1 {
                return Err(Error::InvalidTarget(format!("pixel {i} is not one-hot")));
            }
            classes.push(ones[0] as u8);
        }
        OneHotTarget::new(t.height(), t.width(), t.channels(), classes)
    }

    pub fn to_tensor<T: Scalar>(&self) -> Tensor<T> {
        let mut t = Tensor::zeros(self.height, self.width, self.channels);
        for (i, &c) in self.classes.iter().enumerate() {
            t.data_mut()[i * self.channels + c as usize] = T::one();
        }
        t
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    fn check_shape<T: Scalar>(&self, t: &Tensor<T>) -> Result<()> {
        if t.height() != self.height || t.width() != self.width || t.channels() != self.channels {
            return Err(Error::SizeMismatch {
                left: t.shape_string(),
                right: format!("{}x{}x{}", self.height, self.width, self.channels),
            });
        }
        Ok(())
    }

    #[inline]
    fn g<T: Scalar>(&self, pixel: usize, ch: usize) -> T {
        if self.classes[pixel] as usize == ch {
            T::one()
        } else {
            T::zero()
        }
    }
}

/// Per-pixel softmax over channels with max subtraction.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    logits.validate_logits()?;
    let mut out = logits.clone();
    let ch = logits.channels().max(1);
    for px in out.data_mut().chunks_exact_mut(ch) {
        let max = px.iter().copied().fold(T::neg_infinity(), T::max);
        let mut sum = T::zero();
        for v in px.iter_mut() {
            *v = (*v - max).exp();
            sum = sum + *v;
        }
        for v in px.iter_mut() {
            *v = *v / sum;
        }
    }
    Ok(out)
}

/// Loss value for probabilities `p` against target `g`.
pub fn loss_eval<T: Scalar>(p: &Tensor<T>, g: &OneHotTarget, cfg: &LossConfig<T>) -> Result<T> {
    cfg.validate()?;
    g.check_shape(p)?;
    p.validate_probabilities(T::lit(PROBABILITY_TOLERANCE))?;
    Ok(loss_and_prob_grad(p, g, cfg, false).0)
}

/// Gradient of `loss_eval(softmax(logits), g, cfg)` with respect to the
/// logits.
pub fn loss_grad<T: Scalar>(
    logits: &Tensor<T>,
    g: &OneHotTarget,
    cfg: &LossConfig<T>,
) -> Result<Tensor<T>> {
    cfg.validate()?;
    g.check_shape(logits)?;
    let p = softmax(logits)?;
    let (_, dp) = loss_and_prob_grad(&p, g, cfg, true);
    let ch = p.channels().max(1);
    let mut out = Tensor::zeros(p.height(), p.width(), p.channels());
    for ((dz, pp), dpp) in out
        .data_mut()
        .chunks_exact_mut(ch)
        .zip(p.data().chunks_exact(ch))
        .zip(dp.chunks_exact(ch))
    {
        // softmax Jacobian: dz_k = p_k (dp_k - sum_j p_j dp_j)
        let dot: T = pp.iter().zip(dpp).map(|(&a, &b)| a * b).sum();
        for k in 0..ch {
            dz[k] = pp[k] * (dpp[k] - dot);
        }
    }
    Ok(out)
}

/// Largest relative error between [`loss_grad`] and central differences
/// of the loss with respect to each logit. The denominator is floored at
/// `1e-8`; an empty tensor yields zero.
pub fn finite_diff_check<T: Scalar>(
    logits: &Tensor<T>,
    g: &OneHotTarget,
    cfg: &LossConfig<T>,
    step: T,
) -> Result<T> {
    if step <= T::zero() {
        return Err(Error::Config("finite-difference step must be > 0".into()));
    }
    let analytic = loss_grad(logits, g, cfg)?;
    let floor = T::lit(1e-8);
    let two = T::lit(2.0);
    let mut worst = T::zero();
    let mut probe = logits.clone();
    for i in 0..logits.data().len() {
        let orig = logits.data()[i];
        probe.data_mut()[i] = orig + step;
        let plus = loss_eval(&softmax(&probe)?, g, cfg)?;
        probe.data_mut()[i] = orig - step;
        let minus = loss_eval(&softmax(&probe)?, g, cfg)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (two * step);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(floor);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Loss value and, when `want_grad`, its gradient with respect to each
/// probability.
fn loss_and_prob_grad<T: Scalar>(
    p: &Tensor<T>,
    g: &OneHotTarget,
    cfg: &LossConfig<T>,
    want_grad: bool,
) -> (T, Vec<T>) {
    let mut grad = if want_grad {
        vec![T::zero(); p.data().len()]
    } else {
        Vec::new()
    };
    let (region, focal) = cfg.kind.parts();
    let mut total = T::zero();
    if let Some(r) = region {
        let scale = if focal { cfg.region_weight } else { T::one() };
        total = total + scale * region_loss(r, p, g, cfg, scale, &mut grad);
    }
    if focal {
        let scale = if region.is_some() { cfg.focal_weight } else { T::one() };
        total = total + scale * focal_loss(p, g, cfg, scale, &mut grad);
    }
    (total, grad)
}

/// Adds `scale * d(loss)/dp` into `grad` when it is non-empty.
fn region_loss<T: Scalar>(
    kind: Region,
    p: &Tensor<T>,
    g: &OneHotTarget,
    cfg: &LossConfig<T>,
    scale: T,
    grad: &mut [T],
) -> T {
    let ch = p.channels();
    if ch == 0 {
        return T::zero();
    }
    let n = p.pixel_count();
    let eps = cfg.epsilon;
    let half = T::lit(0.5);
    let inv_c = T::one() / T::from_count(ch);
    let mut index_sum = T::zero();
    for c in 0..ch {
        let (mut inter, mut psum, mut gsum) = (T::zero(), T::zero(), T::zero());
        for i in 0..n {
            let pv = p.data()[i * ch + c];
            let gv: T = g.g(i, c);
            inter = inter + pv * gv;
            psum = psum + pv;
            gsum = gsum + gv;
        }
        let (num, den) = match kind {
            Region::Jaccard => (inter + eps, psum + gsum - inter + eps),
            Region::Dice => (inter + eps, half * (psum + gsum) + eps),
            Region::Tversky => (
                inter + eps,
                inter + cfg.tversky_alpha * (psum - inter) + cfg.tversky_beta * (gsum - inter) + eps,
            ),
        };
        index_sum = index_sum + num / den;
        if grad.is_empty() {
            continue;
        }
        for i in 0..n {
            let gv: T = g.g(i, c);
            let (dnum, dden) = match kind {
                Region::Jaccard => (gv, T::one() - gv),
                Region::Dice => (gv, half),
                Region::Tversky => (
                    gv,
                    gv + cfg.tversky_alpha * (T::one() - gv) - cfg.tversky_beta * gv,
                ),
            };
            let dindex = (dnum * den - num * dden) / (den * den);
            grad[i * ch + c] = grad[i * ch + c] - scale * inv_c * dindex;
        }
    }
    T::one() - inv_c * index_sum
}

fn focal_loss<T: Scalar>(
    p: &Tensor<T>,
    g: &OneHotTarget,
    cfg: &LossConfig<T>,
    scale: T,
    grad: &mut [T],
) -> T {
    let n = p.pixel_count();
    if n == 0 {
        return T::zero();
    }
    let ch = p.channels();
    let inv_n = T::one() / T::from_count(n);
    let (gamma, alpha, eps) = (cfg.focal_gamma, cfg.focal_alpha, cfg.epsilon);
    let mut sum = T::zero();
    for i in 0..n {
        // only the target channel contributes for a one-hot g
        let c = g.classes()[i] as usize;
        let pv = p.data()[i * ch + c];
        let q = T::one() - pv;
        let log = (pv + eps).ln();
        let modulating = q.powf(gamma);
        sum = sum - alpha * modulating * log;
        if !grad.is_empty() {
            // d/dp of -(1-p)^gamma ln(p+eps); the first term tends to 0 as p -> 1
            let d_mod = if gamma == T::zero() || q == T::zero() {
                T::zero()
            } else {
                gamma * q.powf(gamma - T::one()) * log
            };
            let dp = alpha * (d_mod - modulating / (pv + eps));
            grad[i * ch + c] = grad[i * ch + c] + scale * inv_n * dp;
        }
    }
    sum * inv_n
}
