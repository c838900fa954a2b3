//! Student objective: temperature-scaled KL from the matching cohort
//! teacher plus the reweighted classification term, mixed by λ. Teachers
//! and the shared backbone stay out of the gradient entirely; only the
//! student head learns.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Attribute;
use crate::error::{Error, Result};
use crate::fis::{self, FisConfig};
use crate::nn::{self, DenseNet, ForwardTrace, Head};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// KL[student ‖ teacher], the objective as stated
    #[default]
    StudentFirst,
    /// KL[teacher ‖ student], the classical distillation direction
    TeacherFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    /// distillation-vs-classification mix in [0, 1]
    pub lambda: f64,
    /// temperature applied to teacher logits (and the τ² loss factor)
    pub tau: f64,
    pub fis: FisConfig,
    #[serde(default)]
    pub kl_direction: KlDirection,
    /// also soften the student with τ (off by default: the objective
    /// softens only the teacher side)
    #[serde(default)]
    pub temp_on_student: bool,
}

impl DistillConfig {
    pub fn new(lambda: f64, tau: f64, fis: FisConfig) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be in [0,1], got {lambda}"
            )));
        }
        if tau <= 0.0 || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {tau}"
            )));
        }
        Ok(Self {
            lambda,
            tau,
            fis,
            kl_direction: KlDirection::StudentFirst,
            temp_on_student: false,
        })
    }
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            lambda: 0.95,
            tau: 1.5,
            fis: FisConfig::default(),
            kl_direction: KlDirection::StudentFirst,
            temp_on_student: false,
        }
    }
}

const Q_FLOOR: f64 = 1e-12;

/// KL divergence Σ p·log(p/q) with 0·log 0 := 0 and q clamped at 1e-12.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::InvalidInput("distribution length mismatch".into()));
    }
    for dist in [p, q] {
        if dist.iter().any(|&v| !(0.0..=1.0 + 1e-9).contains(&v)) {
            return Err(Error::InvalidInput("not a probability vector".into()));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
    }
    Ok(p
        .iter()
        .zip(q)
        .map(|(&pi, &qi)| {
            if pi == 0.0 {
                0.0
            } else {
                pi * (pi / qi.max(Q_FLOOR)).ln()
            }
        })
        .sum::<f64>()
        .max(0.0))
}

#[derive(Debug, Clone)]
pub struct StudentLoss {
    /// batch mean of λ·τ²·KLᵢ + (1−λ)·wᵢ·ℓᵢ
    pub loss: f64,
    /// batch mean of the λ·τ²·KL part
    pub distill_term: f64,
    /// batch mean of the (1−λ)·w·ℓ part
    pub classification_term: f64,
    pub weights: Vec<f64>,
}

/// Per-batch evaluation with everything the training step needs.
pub(crate) struct StudentBatchEval {
    pub loss: StudentLoss,
    pub traces: Vec<ForwardTrace>,
    /// ∂(batch loss)/∂(student logits) per sample
    pub dlogits: Vec<Vec<f64>>,
}

/// Evaluates the student objective. Each sample is distilled only from the
/// teacher of its own attribute; teacher outputs are constants.
pub fn student_loss(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    attributes: &[Attribute],
    backbone: &DenseNet,
    student_head: &Head,
    teacher_heads: &BTreeMap<Attribute, Head>,
    cfg: &DistillConfig,
) -> Result<StudentLoss> {
    Ok(student_batch_eval(
        inputs,
        targets,
        attributes,
        backbone,
        student_head,
        teacher_heads,
        cfg,
    )?
    .loss)
}

pub(crate) fn student_batch_eval(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    attributes: &[Attribute],
    backbone: &DenseNet,
    student_head: &Head,
    teacher_heads: &BTreeMap<Attribute, Head>,
    cfg: &DistillConfig,
) -> Result<StudentBatchEval> {
    if inputs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if inputs.len() != targets.len() || inputs.len() != attributes.len() {
        return Err(Error::Shape("batch component lengths differ".into()));
    }
    for &a in attributes {
        if !teacher_heads.contains_key(&a) {
            return Err(Error::MissingTeacher { attribute: a });
        }
    }

    let n = inputs.len();
    let student_tau = if cfg.temp_on_student {
        cfg.tau
    } else {
        student_head.temperature
    };

    let mut traces = Vec::with_capacity(n);
    let mut kl_terms = Vec::with_capacity(n);
    let mut ce_losses = Vec::with_capacity(n);
    let mut student_probs = Vec::with_capacity(n);
    let mut teacher_probs = Vec::with_capacity(n);
    for ((x, t), &a) in inputs.iter().zip(targets).zip(attributes) {
        let trace = nn::forward(backbone, student_head, x)?;
        let p_s = nn::softmax_temp(&trace.logits, student_tau)?;
        let teacher = &teacher_heads[&a];
        let t_logits = teacher.linear.weight.matvec(&trace.features);
        let t_logits: Vec<f64> = t_logits
            .iter()
            .zip(&teacher.linear.bias)
            .map(|(z, b)| z + b)
            .collect();
        let q_t = nn::softmax_temp(&t_logits, cfg.tau)?;
        let kl = match cfg.kl_direction {
            KlDirection::StudentFirst => kl_divergence(&p_s, &q_t)?,
            KlDirection::TeacherFirst => kl_divergence(&q_t, &p_s)?,
        };
        kl_terms.push(kl);
        let ce = nn::cross_entropy_soft(&trace.probs, t)?;
        if !ce.is_finite() || !kl.is_finite() {
            return Err(Error::Numeric("non-finite loss term".into()));
        }
        ce_losses.push(ce);
        student_probs.push(p_s);
        teacher_probs.push(q_t);
        traces.push(trace);
    }

    let weights = fis::fis_weights(&ce_losses, attributes, &cfg.fis)?;
    let tau_sq = cfg.tau * cfg.tau;
    let nf = n as f64;
    let distill_term = cfg.lambda * tau_sq * kl_terms.iter().sum::<f64>() / nf;
    let classification_term = (1.0 - cfg.lambda)
        * weights
            .iter()
            .zip(&ce_losses)
            .map(|(w, l)| w * l)
            .sum::<f64>()
        / nf;

    // ∂loss/∂(student logits); weights and teacher outputs are constants
    let mut dlogits = Vec::with_capacity(n);
    for i in 0..n {
        let p_s = &student_probs[i];
        let q_t = &teacher_probs[i];
        let kl = kl_terms[i];
        let y = p_s.len();
        let mut d = vec![0.0; y];
        let kd_scale = cfg.lambda * tau_sq / (nf * student_tau);
        match cfg.kl_direction {
            KlDirection::StudentFirst => {
                for k in 0..y {
                    let log_ratio = if p_s[k] == 0.0 {
                        0.0
                    } else {
                        (p_s[k] / q_t[k].max(Q_FLOOR)).ln()
                    };
                    d[k] += kd_scale * p_s[k] * (log_ratio - kl);
                }
            }
            KlDirection::TeacherFirst => {
                for k in 0..y {
                    d[k] += kd_scale * (p_s[k] - q_t[k]);
                }
            }
        }
        let ce_scale =
            (1.0 - cfg.lambda) * weights[i] / (nf * student_head.temperature);
        for k in 0..y {
            d[k] += ce_scale * (traces[i].probs[k] - targets[i][k]);
        }
        dlogits.push(d);
    }

    Ok(StudentBatchEval {
        loss: StudentLoss {
            loss: distill_term + classification_term,
            distill_term,
            classification_term,
            weights,
        },
        traces,
        dlogits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_dense_net, init_head, Activation, DenseLayer, Mat};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kl_of_identical_distributions_is_zero() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn kl_hand_values() {
        let ln2 = std::f64::consts::LN_2;
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - ln2).abs() < 1e-12);
        let want = 0.5 * 3.0f64.ln();
        assert!((kl_divergence(&[0.75, 0.25], &[0.25, 0.75]).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn kl_nonnegative_and_zero_iff_equal() {
        let mut rng = StdRng::seed_from_u64(4);
        for _ in 0..200 {
            let a = rng.random_range(0.01..0.99);
            let b = rng.random_range(0.01..0.99);
            let kl = kl_divergence(&[a, 1.0 - a], &[b, 1.0 - b]).unwrap();
            assert!(kl >= 0.0);
            if (a - b).abs() > 1e-6 {
                assert!(kl > 0.0);
            }
        }
    }

    #[test]
    fn kl_rejects_invalid_distributions() {
        assert!(kl_divergence(&[0.9, 0.9], &[0.5, 0.5]).is_err());
        assert!(kl_divergence(&[0.5, 0.5], &[0.5]).is_err());
    }

    #[allow(clippy::type_complexity)]
    fn toy_problem(
        seed: u64,
        n: usize,
    ) -> (
        DenseNet,
        Head,
        BTreeMap<u32, Head>,
        Vec<Vec<f64>>,
        Vec<Vec<f64>>,
        Vec<u32>,
    ) {
        let mut rng = StdRng::seed_from_u64(seed);
        let backbone = init_dense_net(&[3, 5, 4], &mut rng).unwrap();
        let student = init_head(4, 2, 1.0, &mut rng).unwrap();
        let mut teachers = BTreeMap::new();
        teachers.insert(0u32, init_head(4, 2, 1.0, &mut rng).unwrap());
        teachers.insert(1u32, init_head(4, 2, 1.0, &mut rng).unwrap());
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                if rng.random_bool(0.5) {
                    vec![1.0, 0.0]
                } else {
                    vec![0.0, 1.0]
                }
            })
            .collect();
        let attrs: Vec<u32> = (0..n).map(|i| (i % 2) as u32).collect();
        (backbone, student, teachers, inputs, targets, attrs)
    }

    #[test]
    fn lambda_one_with_matching_teacher_is_zero() {
        let (backbone, student, _, inputs, targets, attrs) = toy_problem(31, 6);
        let mut teachers = BTreeMap::new();
        teachers.insert(0u32, student.clone());
        teachers.insert(1u32, student.clone());
        let cfg = DistillConfig::new(1.0, 1.0, FisConfig::default()).unwrap();
        let out = student_loss(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();
        assert!(out.loss.abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_reduces_to_fis_loss() {
        let (backbone, student, teachers, inputs, targets, attrs) = toy_problem(32, 8);
        let fis_cfg = FisConfig::new(0.5).unwrap();
        let cfg = DistillConfig::new(0.0, 1.5, fis_cfg).unwrap();
        let out = student_loss(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();
        let fis_out =
            fis::fis_loss(&inputs, &targets, &attrs, &backbone, &student, &fis_cfg).unwrap();
        assert_eq!(out.loss, fis_out.loss);
        assert_eq!(out.weights, fis_out.weights);
    }

    #[test]
    fn lambda_one_ignores_labels() {
        let (backbone, student, teachers, inputs, targets, attrs) = toy_problem(33, 6);
        let cfg = DistillConfig::new(1.0, 1.5, FisConfig::default()).unwrap();
        let a = student_loss(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();
        let flipped: Vec<Vec<f64>> = targets
            .iter()
            .map(|t| vec![t[1], t[0]])
            .collect();
        let b = student_loss(
            &inputs, &flipped, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();
        assert_eq!(a.loss, b.loss);
    }

    #[test]
    fn tau_squared_factor_is_exact() {
        // teacher with zero parameters emits uniform probabilities at any
        // temperature, so scaling τ must scale the distillation term by τ²
        let (backbone, student, _, inputs, targets, attrs) = toy_problem(34, 5);
        let uniform_teacher = Head::new(
            DenseLayer::new(Mat::zeros(2, 4), vec![0.0; 2], Activation::Identity).unwrap(),
            1.0,
        )
        .unwrap();
        let mut teachers = BTreeMap::new();
        teachers.insert(0u32, uniform_teacher.clone());
        teachers.insert(1u32, uniform_teacher);
        let term_at = |tau: f64| {
            let cfg = DistillConfig::new(1.0, tau, FisConfig::default()).unwrap();
            student_loss(
                &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
            )
            .unwrap()
            .distill_term
        };
        let base = term_at(1.0);
        assert!(base > 0.0);
        for &tau in &[1.5, 2.0, 3.0] {
            assert!((term_at(tau) - tau * tau * base).abs() < 1e-12);
        }
    }

    #[test]
    fn missing_teacher_names_the_attribute() {
        let (backbone, student, mut teachers, inputs, targets, attrs) = toy_problem(35, 4);
        teachers.remove(&1);
        let cfg = DistillConfig::default();
        let err = student_loss(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingTeacher { attribute: 1 }));
    }

    #[test]
    fn student_loss_matches_straightline_recomputation() {
        let (backbone, student, teachers, inputs, targets, attrs) = toy_problem(36, 8);
        let cfg = DistillConfig::default(); // λ=0.95, τ=1.5, c=0.5
        let got = student_loss(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();

        // --- oracle: plain loops, no shared helpers ---
        let forward_feats = |x: &[f64]| -> Vec<f64> {
            let mut a = x.to_vec();
            for layer in &backbone.layers {
                let mut next = vec![0.0; layer.out_dim()];
                for (r, n) in next.iter_mut().enumerate() {
                    let mut z = layer.bias[r];
                    for (c, &ac) in a.iter().enumerate() {
                        z += layer.weight.get(r, c) * ac;
                    }
                    *n = z.max(0.0);
                }
                a = next;
            }
            a
        };
        let head_probs = |h: &Head, f: &[f64], tau: f64| -> Vec<f64> {
            let mut logits = [0.0; 2];
            for (r, l) in logits.iter_mut().enumerate() {
                let mut z = h.linear.bias[r];
                for (c, &fc) in f.iter().enumerate() {
                    z += h.linear.weight.get(r, c) * fc;
                }
                *l = z;
            }
            let m = logits[0].max(logits[1]);
            let e: Vec<f64> = logits.iter().map(|l| ((l - m) / tau).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        };
        let n = inputs.len();
        let mut kls = vec![0.0; n];
        let mut ces = vec![0.0; n];
        for i in 0..n {
            let f = forward_feats(&inputs[i]);
            let p_s = head_probs(&student, &f, 1.0);
            let q_t = head_probs(&teachers[&attrs[i]], &f, 1.5);
            kls[i] = p_s
                .iter()
                .zip(&q_t)
                .map(|(&p, &q)| if p == 0.0 { 0.0 } else { p * (p / q.max(1e-12)).ln() })
                .sum();
            ces[i] = -targets[i]
                .iter()
                .zip(&p_s)
                .map(|(&t, &p)| t * p.max(1e-12).ln())
                .sum::<f64>();
        }
        // FIS weights on the CE losses (c = 0.5, rescale to N)
        let m = ces.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = ces.iter().map(|l| (l - m).exp()).collect();
        let se: f64 = e.iter().sum();
        let s_i: Vec<f64> = e.iter().map(|v| v / se).collect();
        let w1 = |a: &[f64], b: &[f64]| -> f64 {
            let mut all = a.to_vec();
            all.extend_from_slice(b);
            all.sort_by(f64::total_cmp);
            let mut acc = 0.0;
            for w in all.windows(2) {
                let fa = a.iter().filter(|&&v| v <= w[0]).count() as f64 / a.len() as f64;
                let fb = b.iter().filter(|&&v| v <= w[0]).count() as f64 / b.len() as f64;
                acc += (fa - fb).abs() * (w[1] - w[0]);
            }
            acc
        };
        let g0: Vec<f64> = (0..n).filter(|i| attrs[*i] == 0).map(|i| ces[i]).collect();
        let g1: Vec<f64> = (0..n).filter(|i| attrs[*i] == 1).map(|i| ces[i]).collect();
        let d = [w1(&ces, &g0), w1(&ces, &g1)];
        let dm = d[0].max(d[1]);
        let de: Vec<f64> = d.iter().map(|v| (v - dm).exp()).collect();
        let ds: f64 = de.iter().sum();
        let s_g = [de[0] / ds, de[1] / ds];
        let raw: Vec<f64> = (0..n)
            .map(|i| 0.5 * s_i[i] + 0.5 * s_g[attrs[i] as usize])
            .collect();
        let rs: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v * n as f64 / rs).collect();

        let nf = n as f64;
        let want = 0.95 * 1.5 * 1.5 * kls.iter().sum::<f64>() / nf
            + 0.05
                * w.iter()
                    .zip(&ces)
                    .map(|(wi, li)| wi * li)
                    .sum::<f64>()
                / nf;
        assert!((got.loss - want).abs() < 1e-12, "{} vs {}", got.loss, want);
    }

    #[test]
    fn student_gradient_matches_finite_differences() {
        let (backbone, mut student, teachers, inputs, targets, attrs) = toy_problem(37, 6);
        let cfg = DistillConfig::default();

        let eval = student_batch_eval(
            &inputs, &targets, &attrs, &backbone, &student, &teachers, &cfg,
        )
        .unwrap();
        // weights are stop-gradient: finite differences must hold them fixed
        let frozen_weights = eval.loss.weights.clone();
        let grads =
            nn::backward_from_dlogits(&backbone, &student, &eval.traces, &eval.dlogits).unwrap();

        let loss_with_fixed_weights = |student: &Head| -> f64 {
            let n = inputs.len() as f64;
            let mut total = 0.0;
            for i in 0..inputs.len() {
                let trace = nn::forward(&backbone, student, &inputs[i]).unwrap();
                let teacher = &teachers[&attrs[i]];
                let t_logits: Vec<f64> = teacher
                    .linear
                    .weight
                    .matvec(&trace.features)
                    .iter()
                    .zip(&teacher.linear.bias)
                    .map(|(z, b)| z + b)
                    .collect();
                let q_t = nn::softmax_temp(&t_logits, cfg.tau).unwrap();
                let kl = kl_divergence(&trace.probs, &q_t).unwrap();
                let ce = nn::cross_entropy_soft(&trace.probs, &targets[i]).unwrap();
                total += cfg.lambda * cfg.tau * cfg.tau * kl
                    + (1.0 - cfg.lambda) * frozen_weights[i] * ce;
            }
            total / n
        };

        let h = 1e-5;
        for r in 0..student.linear.weight.rows() {
            for c in 0..student.linear.weight.cols() {
                let orig = student.linear.weight.get(r, c);
                student.linear.weight.set(r, c, orig + h);
                let up = loss_with_fixed_weights(&student);
                student.linear.weight.set(r, c, orig - h);
                let down = loss_with_fixed_weights(&student);
                student.linear.weight.set(r, c, orig);
                let fd = (up - down) / (2.0 * h);
                let an = grads.head.weight.get(r, c);
                let denom = an.abs().max(fd.abs()).max(1e-5);
                assert!(
                    ((an - fd) / denom).abs() < 1e-4,
                    "weight ({r},{c}): analytic {an} vs fd {fd}"
                );
            }
        }
        // frozen backbone receives no gradient at all
        let mut frozen = backbone.clone();
        frozen.frozen = true;
        let g2 = nn::backward_from_dlogits(&frozen, &student, &eval.traces, &eval.dlogits).unwrap();
        assert!(g2.backbone.is_none());
    }
}
