//! Fair Identity Scaling: per-sample weights mixing individual difficulty
//! (softmax over batch losses) with group discrepancy (softmax over exact
//! 1-Wasserstein distances between each group's loss distribution and the
//! batch's), combined as w = (1−c)·sᴵ + c·sᴳ and applied to the batch
//! objective. All weights are computed per mini-batch and treated as
//! constants by the backward pass.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Attribute;
use crate::error::{Error, Result};
use crate::nn::{self, DenseNet, Head};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightRescale {
    /// weights sum to N (mean weight 1), keeping the effective step size
    /// comparable across c values
    #[default]
    SumToN,
    /// raw convex combination, sums to 1
    SumToOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisConfig {
    /// individual/group mixing in [0, 1]: 0 = individual only, 1 = group only
    pub c: f64,
    #[serde(default)]
    pub weight_rescale: WeightRescale,
}

impl FisConfig {
    pub fn new(c: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::InvalidParameter(format!("c must be in [0,1], got {c}")));
        }
        Ok(Self {
            c,
            weight_rescale: WeightRescale::SumToN,
        })
    }
}

impl Default for FisConfig {
    fn default() -> Self {
        Self {
            c: 0.5,
            weight_rescale: WeightRescale::SumToN,
        }
    }
}

/// Individual scaling weights: softmax over the batch's per-sample losses,
/// so harder samples get larger weight. Sums to 1.
pub fn individual_weights(batch_losses: &[f64]) -> Result<Vec<f64>> {
    if batch_losses.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch_losses.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidInput("non-finite loss".into()));
    }
    nn::softmax(batch_losses)
}

/// Exact 1-Wasserstein distance between two empirical distributions of
/// scalars, each point carrying equal mass within its sample. Computed as
/// ∫|F_a(t) − F_b(t)| dt over the merged breakpoints, which equals the
/// quantile-function integral and is exact for unequal sample sizes.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite distribution value".into()));
    }
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);

    let mut merged: Vec<f64> = Vec::with_capacity(sa.len() + sb.len());
    merged.extend_from_slice(&sa);
    merged.extend_from_slice(&sb);
    merged.sort_by(f64::total_cmp);

    let na = sa.len() as f64;
    let nb = sb.len() as f64;
    let mut dist = 0.0;
    let mut ia = 0usize;
    let mut ib = 0usize;
    for w in merged.windows(2) {
        // counts of points ≤ w[0]
        while ia < sa.len() && sa[ia] <= w[0] {
            ia += 1;
        }
        while ib < sb.len() && sb[ib] <= w[0] {
            ib += 1;
        }
        let cdf_gap = (ia as f64 / na - ib as f64 / nb).abs();
        dist += cdf_gap * (w[1] - w[0]);
    }
    Ok(dist)
}

/// Group scaling weights: softmax over groups of the OT distance between
/// each group's loss distribution and the whole batch's. Requested groups
/// with no samples in the batch are dropped. Weights over the returned
/// groups sum to 1.
pub fn group_weights(
    losses: &[f64],
    attributes: &[Attribute],
    requested: &[Attribute],
) -> Result<BTreeMap<Attribute, f64>> {
    if losses.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if losses.len() != attributes.len() {
        return Err(Error::Shape("losses/attributes length mismatch".into()));
    }
    let mut per_group: BTreeMap<Attribute, Vec<f64>> = BTreeMap::new();
    for (&l, &a) in losses.iter().zip(attributes) {
        if requested.contains(&a) {
            per_group.entry(a).or_default().push(l);
        }
    }
    if per_group.is_empty() {
        return Err(Error::InvalidInput(
            "no requested group has samples in the batch".into(),
        ));
    }
    let groups: Vec<Attribute> = per_group.keys().copied().collect();
    let distances: Vec<f64> = groups
        .iter()
        .map(|g| wasserstein_1d(losses, &per_group[g]))
        .collect::<Result<_>>()?;
    let soft = nn::softmax(&distances)?;
    Ok(groups.into_iter().zip(soft).collect())
}

/// Combined per-sample weights w = (1−c)·sᴵ + c·sᴳ(a), rescaled per config.
pub fn fis_weights(
    losses: &[f64],
    attributes: &[Attribute],
    cfg: &FisConfig,
) -> Result<Vec<f64>> {
    if losses.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let s_ind = individual_weights(losses)?;
    let present: Vec<Attribute> = {
        let mut v: Vec<Attribute> = attributes.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let s_grp = group_weights(losses, attributes, &present)?;
    let mut weights: Vec<f64> = s_ind
        .iter()
        .zip(attributes)
        .map(|(&si, a)| (1.0 - cfg.c) * si + cfg.c * s_grp[a])
        .collect();
    match cfg.weight_rescale {
        WeightRescale::SumToN => {
            let sum: f64 = weights.iter().sum();
            let scale = losses.len() as f64 / sum;
            for w in &mut weights {
                *w *= scale;
            }
        }
        WeightRescale::SumToOne => {
            let sum: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
        }
    }
    Ok(weights)
}

/// Output of one FIS objective evaluation.
#[derive(Debug, Clone)]
pub struct FisLoss {
    /// (1/N)·Σ wᵢ·ℓᵢ
    pub loss: f64,
    pub weights: Vec<f64>,
    pub sample_losses: Vec<f64>,
}

/// Evaluates the FIS batch objective for the current model: per-sample
/// cross-entropy losses, weights from those losses (stop-gradient), and the
/// weighted mean. Targets are soft label distributions.
pub fn fis_loss(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    attributes: &[Attribute],
    net: &DenseNet,
    head: &Head,
    cfg: &FisConfig,
) -> Result<FisLoss> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != targets.len() || inputs.len() != attributes.len() {
        return Err(Error::Shape("batch component lengths differ".into()));
    }
    let mut sample_losses = Vec::with_capacity(inputs.len());
    for (x, t) in inputs.iter().zip(targets) {
        let trace = nn::forward(net, head, x)?;
        let l = nn::cross_entropy_soft(&trace.probs, t)?;
        if !l.is_finite() {
            return Err(Error::Numeric("non-finite sample loss".into()));
        }
        sample_losses.push(l);
    }
    let weights = fis_weights(&sample_losses, attributes, cfg)?;
    let n = inputs.len() as f64;
    let loss = weights
        .iter()
        .zip(&sample_losses)
        .map(|(w, l)| w * l)
        .sum::<f64>()
        / n;
    Ok(FisLoss {
        loss,
        weights,
        sample_losses,
    })
}
