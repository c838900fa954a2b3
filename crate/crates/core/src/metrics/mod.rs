//! Evaluation and fairness metrics: AUC (Mann–Whitney with tie averaging),
//! worst-case AUC, AUC gap, equity-scaled AUC, performance-scaled
//! disparities, Dice/IoU overlap with their equity-scaled variants, and the
//! per-group report that ties them together.
//!
//! Two equity scalings are deliberately different: the AUC variant divides
//! the discrepancy sum by the number of groups, the overlap variant uses
//! the raw sum.

mod io;

pub use io::{
    load_classification_csv, load_mask, load_segmentation_index, report_to_csv, roc_points,
    save_mask, write_classification_csv, RocPoint,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Attribute;
use crate::error::{Error, Result};

/// AUC as the Mann–Whitney statistic: the probability that a random
/// positive outscores a random negative, ties counted 0.5. Rank-based,
/// O(N log N).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("scores/labels length mismatch".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidInput("non-finite score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // fractional ranks (1-based) with tie averaging
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let u = rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0;
    Ok(u / (n_pos_f * n_neg as f64))
}

/// Equity-scaled AUC: overall / (1 + mean absolute cohort discrepancy).
pub fn es_auc(overall: f64, per_group: &BTreeMap<Attribute, f64>) -> Result<f64> {
    if per_group.is_empty() {
        return Err(Error::InvalidInput("empty group map".into()));
    }
    let a = per_group.len() as f64;
    let discrepancy: f64 = per_group.values().map(|g| (overall - g).abs()).sum();
    Ok(overall / (1.0 + discrepancy / a))
}

/// Performance-scaled disparities: (population std of group values,
/// max − min of group values), each divided by the overall score.
pub fn psd(overall: f64, per_group: &BTreeMap<Attribute, f64>) -> Result<(f64, f64)> {
    if per_group.len() < 2 {
        return Err(Error::InvalidInput("PSD needs at least two groups".into()));
    }
    if overall <= 0.0 {
        return Err(Error::UndefinedMetric("PSD undefined for overall <= 0".into()));
    }
    let values: Vec<f64> = per_group.values().copied().collect();
    let std = population_std(&values);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok((std / overall, (max - min) / overall))
}

/// Population standard deviation. The two-point case reduces algebraically
/// to half the gap; computing it that way keeps MaxPSD = 2·MeanPSD exact in
/// floating point as well.
fn population_std(values: &[f64]) -> f64 {
    match values {
        [] => 0.0,
        [_] => 0.0,
        [a, b] => (a - b).abs() / 2.0,
        _ => {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
        }
    }
}

/// Binary mask with explicit shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "mask data length {} does not match {height}×{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

fn overlap_counts(y: &Mask, yhat: &Mask) -> Result<(usize, usize, usize)> {
    if y.height != yhat.height || y.width != yhat.width {
        return Err(Error::Shape(format!(
            "mask shapes differ: {}×{} vs {}×{}",
            y.height, y.width, yhat.height, yhat.width
        )));
    }
    let mut inter = 0;
    for (&a, &b) in y.data.iter().zip(&yhat.data) {
        inter += usize::from(a && b);
    }
    Ok((inter, y.count(), yhat.count()))
}

/// Dice overlap 2|y ∩ ŷ| / (|y| + |ŷ|); two empty masks score 1.
pub fn dice(y: &Mask, yhat: &Mask) -> Result<f64> {
    let (inter, ny, nyhat) = overlap_counts(y, yhat)?;
    if ny + nyhat == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (ny + nyhat) as f64)
}

/// Intersection over union |y ∩ ŷ| / |y ∪ ŷ|; two empty masks score 1.
pub fn iou(y: &Mask, yhat: &Mask) -> Result<f64> {
    let (inter, ny, nyhat) = overlap_counts(y, yhat)?;
    let union = ny + nyhat - inter;
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Equity-scaled overlap score: overall / (1 + Δ) with Δ the *sum* (not
/// mean) of absolute cohort discrepancies.
pub fn es_overlap(overall: f64, per_group: &BTreeMap<Attribute, f64>) -> Result<f64> {
    if per_group.is_empty() {
        return Err(Error::InvalidInput("empty group map".into()));
    }
    let delta: f64 = per_group.values().map(|g| (overall - g).abs()).sum();
    Ok(overall / (1.0 + delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Segmentation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRecord {
    pub id: String,
    pub score: f64,
    pub label: u8,
    pub attribute: Attribute,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationRecord {
    pub id: String,
    pub pred: Mask,
    pub truth: Mask,
    pub attribute: Attribute,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PredictionSet {
    Classification(Vec<ClassificationRecord>),
    Segmentation(Vec<SegmentationRecord>),
}

impl PredictionSet {
    pub fn len(&self) -> usize {
        match self {
            PredictionSet::Classification(v) => v.len(),
            PredictionSet::Segmentation(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One metric family (AUC, Dice, or IoU) with its per-group breakdown and
/// derived fairness numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricBlock {
    pub metric: String,
    pub overall: f64,
    pub per_group: BTreeMap<Attribute, f64>,
    pub worst_case: f64,
    pub gap: f64,
    pub equity_scaled: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_psd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_psd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub primary: MetricBlock,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secondary: Option<MetricBlock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EsVariant {
    /// mean discrepancy (AUC tables)
    MeanDiscrepancy,
    /// summed discrepancy Δ (overlap tables)
    SumDiscrepancy,
}

fn build_block(
    metric: &str,
    overall: f64,
    per_group: BTreeMap<Attribute, f64>,
    es: EsVariant,
    with_psd: bool,
) -> Result<MetricBlock> {
    if per_group.is_empty() {
        return Err(Error::InvalidInput("empty group map".into()));
    }
    let worst = per_group.values().cloned().fold(f64::INFINITY, f64::min);
    let best = per_group.values().cloned().fold(f64::NEG_INFINITY, f64::max);
    let equity_scaled = match es {
        EsVariant::MeanDiscrepancy => es_auc(overall, &per_group)?,
        EsVariant::SumDiscrepancy => es_overlap(overall, &per_group)?,
    };
    let (mean_psd, max_psd) = if with_psd {
        if per_group.len() >= 2 {
            let (m, x) = psd(overall, &per_group)?;
            (Some(m), Some(x))
        } else {
            (Some(0.0), Some(0.0))
        }
    } else {
        (None, None)
    };
    Ok(MetricBlock {
        metric: metric.to_string(),
        overall,
        per_group,
        worst_case: worst,
        gap: best - worst,
        equity_scaled,
        mean_psd,
        max_psd,
    })
}

/// Builds the AUC metric block directly from known group values (fixture
/// mode: reproduces a results-table row without sample-level data).
pub fn classification_block_from_group_aucs(
    overall: f64,
    per_group: &BTreeMap<Attribute, f64>,
) -> Result<MetricBlock> {
    build_block("auc", overall, per_group.clone(), EsVariant::MeanDiscrepancy, true)
}

/// Same for an overlap metric (Dice or IoU) with the Δ-sum scaling.
pub fn overlap_block_from_group_values(
    metric: &str,
    overall: f64,
    per_group: &BTreeMap<Attribute, f64>,
) -> Result<MetricBlock> {
    build_block(metric, overall, per_group.clone(), EsVariant::SumDiscrepancy, false)
}

/// Full evaluation of a prediction set: overall + per-group metric, then
/// gap, worst-case, equity-scaled, and (for classification) the PSDs.
/// Classification pools all samples for the overall AUC; segmentation
/// macro-averages per-image scores.
pub fn report(preds: &PredictionSet, task: Task) -> Result<MetricsReport> {
    match (preds, task) {
        (PredictionSet::Classification(records), Task::Classification) => {
            if records.is_empty() {
                return Err(Error::InvalidInput("empty prediction set".into()));
            }
            let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
            let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
            let overall = auc(&scores, &labels)?;
            let mut groups: BTreeMap<Attribute, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
            for r in records {
                let e = groups.entry(r.attribute).or_default();
                e.0.push(r.score);
                e.1.push(r.label);
            }
            let mut per_group = BTreeMap::new();
            for (g, (s, l)) in &groups {
                let v = auc(s, l).map_err(|e| match e {
                    Error::UndefinedMetric(m) => {
                        Error::UndefinedMetric(format!("group {g}: {m}"))
                    }
                    other => other,
                })?;
                per_group.insert(*g, v);
            }
            let primary = build_block("auc", overall, per_group, EsVariant::MeanDiscrepancy, true)?;
            Ok(MetricsReport {
                task,
                primary,
                secondary: None,
            })
        }
        (PredictionSet::Segmentation(records), Task::Segmentation) => {
            if records.is_empty() {
                return Err(Error::InvalidInput("empty prediction set".into()));
            }
            let mut dices = Vec::with_capacity(records.len());
            let mut ious = Vec::with_capacity(records.len());
            for r in records {
                dices.push(dice(&r.truth, &r.pred)?);
                ious.push(iou(&r.truth, &r.pred)?);
            }
            let macro_avg = |values: &[f64], idx: &[usize]| -> f64 {
                idx.iter().map(|&i| values[i]).sum::<f64>() / idx.len() as f64
            };
            let all: Vec<usize> = (0..records.len()).collect();
            let mut by_group: BTreeMap<Attribute, Vec<usize>> = BTreeMap::new();
            for (i, r) in records.iter().enumerate() {
                by_group.entry(r.attribute).or_default().push(i);
            }
            let overall_dice = macro_avg(&dices, &all);
            let overall_iou = macro_avg(&ious, &all);
            let group_dice: BTreeMap<Attribute, f64> = by_group
                .iter()
                .map(|(g, idx)| (*g, macro_avg(&dices, idx)))
                .collect();
            let group_iou: BTreeMap<Attribute, f64> = by_group
                .iter()
                .map(|(g, idx)| (*g, macro_avg(&ious, idx)))
                .collect();
            let primary =
                build_block("dice", overall_dice, group_dice, EsVariant::SumDiscrepancy, false)?;
            let secondary =
                build_block("iou", overall_iou, group_iou, EsVariant::SumDiscrepancy, false)?;
            Ok(MetricsReport {
                task,
                primary,
                secondary: Some(secondary),
            })
        }
        _ => Err(Error::InvalidInput(
            "prediction set does not match the requested task".into(),
        )),
    }
}
