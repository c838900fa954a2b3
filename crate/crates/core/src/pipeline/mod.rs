//! Training orchestration: the ERM baseline and the three-stage fair
//! distillation pipeline (reweighted backbone → per-cohort teacher heads on
//! the frozen backbone → distilled student head), with stratified batching,
//! CutMix, early stopping on validation worst-case AUC, and deterministic
//! seeding throughout.

mod cutmix;
mod early_stop;
mod sampler;
mod split;

pub use cutmix::{apply_cutmix_pair, cutmix_batch, MixRegion};
pub use early_stop::EarlyStopper;
pub use sampler::stratified_batches;
pub use split::{split, SplitIndices, SplitRatios};

use std::collections::BTreeMap;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, Attribute, Dataset};
use crate::distill::{self, DistillConfig, KlDirection};
use crate::error::{Error, Result};
use crate::fis::{self, FisConfig, WeightRescale};
use crate::metrics;
use crate::nn::{self, DenseNet, Head, Optimizer, OptimizerKind};

// RNG stream ids off a stage's master seed
const STREAM_INIT: u64 = 0x10;
const STREAM_EPOCH: u64 = 0x1000;
const STREAM_TEACHER: u64 = 0x20_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Erm,
    Step0Fis,
    Step1Teacher,
    Step2Student,
}

impl StageKind {
    fn name(self) -> &'static str {
        match self {
            StageKind::Erm => "erm",
            StageKind::Step0Fis => "step0_fis",
            StageKind::Step1Teacher => "step1_teacher",
            StageKind::Step2Student => "step2_student",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub every_epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    #[serde(default)]
    pub lr_decay: Option<LrDecay>,
}

impl OptimizerSettings {
    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_decay {
            Some(decay) if decay.every_epochs > 0 => {
                let steps = (epoch - 1) / decay.every_epochs;
                self.learning_rate * decay.factor.powi(steps as i32)
            }
            _ => self.learning_rate,
        }
    }

    fn build(&self) -> Result<Optimizer> {
        Optimizer::new(self.kind, self.learning_rate, self.weight_decay)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub stage: StageKind,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    /// individual/group mixing of the reweighted loss
    pub c: f64,
    #[serde(default)]
    pub weight_rescale: WeightRescale,
    /// distillation mix (stage 2)
    pub lambda: f64,
    /// distillation temperature (stage 2)
    pub tau: f64,
    #[serde(default)]
    pub kl_direction: KlDirection,
    #[serde(default)]
    pub temp_on_student: bool,
    /// Some(β) applies CutMix with Beta(β, β) mixing
    pub cutmix_beta: Option<f64>,
    /// backbone hidden layer widths (stages that build a backbone)
    pub hidden_dims: Vec<usize>,
    pub rng_seed: u64,
}

impl TrainPlan {
    /// Backbone pre-training: Adam at 1e-4 with 1e-4 weight decay, rate
    /// decayed ×0.1 every 10 epochs, at most 30 epochs, balanced mixing.
    pub fn stage0(rng_seed: u64) -> Self {
        Self {
            stage: StageKind::Step0Fis,
            max_epochs: 30,
            patience: 5,
            batch_size: 32,
            optimizer: OptimizerSettings {
                kind: OptimizerKind::Adam {
                    beta1: 0.9,
                    beta2: 0.999,
                    epsilon: 1e-8,
                },
                learning_rate: 1e-4,
                weight_decay: 1e-4,
                lr_decay: Some(LrDecay {
                    factor: 0.1,
                    every_epochs: 10,
                }),
            },
            c: 0.5,
            weight_rescale: WeightRescale::SumToN,
            lambda: 0.95,
            tau: 1.5,
            kl_direction: KlDirection::StudentFirst,
            temp_on_student: false,
            cutmix_beta: Some(1.0),
            hidden_dims: vec![64, 64],
            rng_seed,
        }
    }

    /// Uniform-weight baseline with the stage-0 protocol.
    pub fn erm(rng_seed: u64) -> Self {
        Self {
            stage: StageKind::Erm,
            c: 0.0,
            ..Self::stage0(rng_seed)
        }
    }

    /// Teacher fine-tuning: fresh head, frozen backbone, SGD momentum 0.9,
    /// individual scaling only (c = 0).
    pub fn stage1(rng_seed: u64) -> Self {
        Self {
            stage: StageKind::Step1Teacher,
            max_epochs: 60,
            patience: 5,
            batch_size: 32,
            optimizer: OptimizerSettings {
                kind: OptimizerKind::SgdMomentum { momentum: 0.9 },
                learning_rate: 1e-3,
                weight_decay: 0.0,
                lr_decay: None,
            },
            c: 0.0,
            weight_rescale: WeightRescale::SumToN,
            lambda: 0.95,
            tau: 1.5,
            kl_direction: KlDirection::StudentFirst,
            temp_on_student: false,
            cutmix_beta: Some(1.0),
            hidden_dims: Vec::new(),
            rng_seed,
        }
    }

    /// Student distillation: fresh head, frozen backbone, SGD momentum 0.9,
    /// λ = 0.95, τ = 1.5, c = 0.5.
    pub fn stage2(rng_seed: u64) -> Self {
        Self {
            stage: StageKind::Step2Student,
            c: 0.5,
            ..Self::stage1(rng_seed)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::InvalidParameter("patience must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return Err(Error::InvalidParameter(format!(
                "c must be in [0,1], got {}",
                self.c
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be in [0,1], got {}",
                self.lambda
            )));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        Ok(())
    }

    fn fis_config(&self) -> FisConfig {
        FisConfig {
            c: self.c,
            weight_rescale: self.weight_rescale,
        }
    }

    fn distill_config(&self) -> DistillConfig {
        DistillConfig {
            lambda: self.lambda,
            tau: self.tau,
            fis: self.fis_config(),
            kl_direction: self.kl_direction,
            temp_on_student: self.temp_on_student,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_overall_auc: f64,
    pub val_worst_auc: f64,
}

/// Per-stage training record. Wall time is tracked in memory but not
/// serialized: record files must be bit-identical across reruns of the
/// same (seed, config), so timings land in a separate file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub stage: String,
    pub rng_seed: u64,
    pub epochs: Vec<EpochLog>,
    /// 0 means the initialization was never improved on (max_epochs = 0)
    pub best_epoch: usize,
    pub checkpoint_id: String,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub backbone: DenseNet,
    pub head: Head,
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone)]
pub struct TrainedHead {
    pub head: Head,
    pub record: ExperimentRecord,
}

/// P(class 1) for every sample.
pub fn predict_scores(backbone: &DenseNet, head: &Head, ds: &Dataset) -> Result<Vec<f64>> {
    ds.features
        .iter()
        .map(|x| Ok(nn::forward(backbone, head, x)?.probs[1]))
        .collect()
}

/// (overall AUC, worst-case group AUC) on a dataset. Groups where the AUC
/// is undefined (single-class) are skipped in the worst-case.
pub fn validation_aucs(backbone: &DenseNet, head: &Head, ds: &Dataset) -> Result<(f64, f64)> {
    let scores = predict_scores(backbone, head, ds)?;
    let overall = metrics::auc(&scores, &ds.labels)?;
    let mut worst = f64::INFINITY;
    for g in ds.groups() {
        let idx = ds.group_indices(g);
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let l: Vec<u8> = idx.iter().map(|&i| ds.labels[i]).collect();
        if let Ok(a) = metrics::auc(&s, &l) {
            worst = worst.min(a);
        }
    }
    if !worst.is_finite() {
        worst = overall;
    }
    Ok((overall, worst))
}

fn one_hot(label: u8) -> Vec<f64> {
    if label == 1 {
        vec![0.0, 1.0]
    } else {
        vec![1.0, 0.0]
    }
}

enum Objective<'a> {
    /// uniform weights: plain mean cross-entropy
    Uniform,
    /// loss-reweighted cross-entropy
    Fis(FisConfig),
    /// cohort-teacher distillation
    Distill {
        cfg: DistillConfig,
        teachers: &'a BTreeMap<Attribute, Head>,
    },
}

/// Shared epoch loop. Trains the head, and the backbone too unless it is
/// frozen; selects the epoch with the best validation worst-case AUC and
/// restores it.
fn fit(
    train: &Dataset,
    val: &Dataset,
    mut backbone: DenseNet,
    mut head: Head,
    objective: Objective,
    plan: &TrainPlan,
    stage_name: String,
) -> Result<TrainedModel> {
    plan.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let started = Instant::now();
    let train_backbone = !backbone.frozen;
    let mut opt_backbone = if train_backbone {
        Some(plan.optimizer.build()?)
    } else {
        None
    };
    let mut opt_head = plan.optimizer.build()?;

    let mut best_params: Option<(DenseNet, Head)> = None;
    let mut stopper = EarlyStopper::new(plan.patience);
    let mut epochs = Vec::new();

    for epoch in 1..=plan.max_epochs {
        let lr = plan.optimizer.lr_at(epoch);
        if let Some(opt) = opt_backbone.as_mut() {
            opt.set_learning_rate(lr);
        }
        opt_head.set_learning_rate(lr);

        let mut rng =
            StdRng::seed_from_u64(derive_seed(plan.rng_seed, STREAM_EPOCH + epoch as u64));
        let batches = stratified_batches(&train.attributes, plan.batch_size, &mut rng);
        let mut loss_sum = 0.0;
        for batch in &batches {
            let mut inputs: Vec<Vec<f64>> =
                batch.iter().map(|&i| train.features[i].clone()).collect();
            let mut targets: Vec<Vec<f64>> =
                batch.iter().map(|&i| one_hot(train.labels[i])).collect();
            let attrs: Vec<Attribute> = batch.iter().map(|&i| train.attributes[i]).collect();
            if let Some(beta) = plan.cutmix_beta {
                cutmix_batch(&mut inputs, &mut targets, train.image_side, beta, &mut rng)?;
            }

            let n = inputs.len() as f64;
            let (batch_loss, grads) = match &objective {
                Objective::Uniform | Objective::Fis(_) => {
                    let mut traces = Vec::with_capacity(inputs.len());
                    let mut losses = Vec::with_capacity(inputs.len());
                    for (x, t) in inputs.iter().zip(&targets) {
                        let trace = nn::forward(&backbone, &head, x).map_err(|e| match e {
                            Error::Numeric(m) => Error::Numeric(format!(
                                "epoch {epoch}: {m} (aborting {stage_name})"
                            )),
                            other => other,
                        })?;
                        let l = nn::cross_entropy_soft(&trace.probs, t)?;
                        if !l.is_finite() {
                            return Err(Error::Numeric(format!(
                                "non-finite loss at epoch {epoch} in {stage_name}"
                            )));
                        }
                        losses.push(l);
                        traces.push(trace);
                    }
                    let weights = match &objective {
                        Objective::Fis(cfg) => fis::fis_weights(&losses, &attrs, cfg)?,
                        _ => vec![1.0; inputs.len()],
                    };
                    let dlogits: Vec<Vec<f64>> = traces
                        .iter()
                        .zip(&targets)
                        .zip(&weights)
                        .map(|((trace, t), &w)| {
                            let scale = w / (n * head.temperature);
                            trace
                                .probs
                                .iter()
                                .zip(t)
                                .map(|(&p, &ti)| scale * (p - ti))
                                .collect()
                        })
                        .collect();
                    let grads = nn::backward_from_dlogits(&backbone, &head, &traces, &dlogits)?;
                    let loss = weights
                        .iter()
                        .zip(&losses)
                        .map(|(w, l)| w * l)
                        .sum::<f64>()
                        / n;
                    (loss, grads)
                }
                Objective::Distill { cfg, teachers } => {
                    let eval = distill::student_batch_eval(
                        &inputs, &targets, &attrs, &backbone, &head, teachers, cfg,
                    )?;
                    let grads =
                        nn::backward_from_dlogits(&backbone, &head, &eval.traces, &eval.dlogits)?;
                    (eval.loss.loss, grads)
                }
            };

            if let (Some(opt), Some(bg)) = (opt_backbone.as_mut(), grads.backbone.as_ref()) {
                opt.step(&mut backbone.layers, bg)?;
            }
            opt_head.step(std::slice::from_mut(&mut head.linear), &[grads.head])?;
            loss_sum += batch_loss * n;
        }

        let train_loss = loss_sum / train.len() as f64;
        let (val_overall, val_worst) = validation_aucs(&backbone, &head, val)?;
        epochs.push(EpochLog {
            epoch,
            train_loss,
            val_overall_auc: val_overall,
            val_worst_auc: val_worst,
        });
        let stop = stopper.observe(val_worst);
        if stopper.just_improved() {
            best_params = Some((backbone.clone(), head.clone()));
        }
        if stop {
            break;
        }
    }

    if let Some((b, h)) = best_params {
        backbone = b;
        head = h;
    }
    let best_epoch = stopper.best_epoch();
    let record = ExperimentRecord {
        checkpoint_id: format!("{stage_name}-epoch{best_epoch}"),
        stage: stage_name,
        rng_seed: plan.rng_seed,
        epochs,
        best_epoch,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(TrainedModel {
        backbone,
        head,
        record,
    })
}

fn init_models(train: &Dataset, plan: &TrainPlan) -> Result<(DenseNet, Head)> {
    let mut dims = vec![train.feature_dim()];
    dims.extend_from_slice(&plan.hidden_dims);
    let mut rng = StdRng::seed_from_u64(derive_seed(plan.rng_seed, STREAM_INIT));
    let backbone = nn::init_dense_net(&dims, &mut rng)?;
    let head = nn::init_head(backbone.out_dim(), 2, 1.0, &mut rng)?;
    Ok((backbone, head))
}

/// Backbone pre-training with the reweighted objective (c from the plan).
pub fn train_stage0(train: &Dataset, val: &Dataset, plan: &TrainPlan) -> Result<TrainedModel> {
    let (backbone, head) = init_models(train, plan)?;
    fit(
        train,
        val,
        backbone,
        head,
        Objective::Fis(plan.fis_config()),
        plan,
        StageKind::Step0Fis.name().to_string(),
    )
}

/// Uniform-weight baseline: plain mean cross-entropy, same protocol.
pub fn train_erm(train: &Dataset, val: &Dataset, plan: &TrainPlan) -> Result<TrainedModel> {
    let (backbone, head) = init_models(train, plan)?;
    fit(
        train,
        val,
        backbone,
        head,
        Objective::Uniform,
        plan,
        StageKind::Erm.name().to_string(),
    )
}

/// Cohort teacher: fresh random head on the frozen backbone, trained on
/// that cohort only and early-stopped on the cohort's validation AUC.
pub fn train_stage1(
    train: &Dataset,
    val: &Dataset,
    backbone: &DenseNet,
    group: Attribute,
    plan: &TrainPlan,
) -> Result<TrainedHead> {
    let cohort_train = train.subset(&train.group_indices(group));
    let cohort_val = val.subset(&val.group_indices(group));
    if cohort_train.is_empty() || cohort_val.is_empty() {
        return Err(Error::CohortEmpty { attribute: group });
    }
    let mut frozen = backbone.clone();
    frozen.frozen = true;
    let mut rng = StdRng::seed_from_u64(derive_seed(plan.rng_seed, STREAM_INIT));
    let head = nn::init_head(frozen.out_dim(), 2, 1.0, &mut rng)?;
    let out = fit(
        &cohort_train,
        &cohort_val,
        frozen,
        head,
        Objective::Fis(plan.fis_config()),
        plan,
        format!("{}_{group}", StageKind::Step1Teacher.name()),
    )?;
    Ok(TrainedHead {
        head: out.head,
        record: out.record,
    })
}

/// Student head distilled from the cohort teachers on the frozen backbone.
pub fn train_stage2(
    train: &Dataset,
    val: &Dataset,
    backbone: &DenseNet,
    teachers: &BTreeMap<Attribute, Head>,
    plan: &TrainPlan,
) -> Result<TrainedHead> {
    for g in train.groups().into_iter().chain(val.groups()) {
        if !teachers.contains_key(&g) {
            return Err(Error::MissingTeacher { attribute: g });
        }
    }
    let mut frozen = backbone.clone();
    frozen.frozen = true;
    let mut rng = StdRng::seed_from_u64(derive_seed(plan.rng_seed, STREAM_INIT));
    let head = nn::init_head(frozen.out_dim(), 2, 1.0, &mut rng)?;
    let out = fit(
        train,
        val,
        frozen,
        head,
        Objective::Distill {
            cfg: plan.distill_config(),
            teachers,
        },
        plan,
        StageKind::Step2Student.name().to_string(),
    )?;
    Ok(TrainedHead {
        head: out.head,
        record: out.record,
    })
}

/// Per-stage plans for a full pipeline run, derived from one master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairdiPlans {
    pub stage0: TrainPlan,
    pub stage1: TrainPlan,
    pub stage2: TrainPlan,
}

impl FairdiPlans {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            stage0: TrainPlan::stage0(derive_seed(seed, 0xA0)),
            stage1: TrainPlan::stage1(derive_seed(seed, 0xA1)),
            stage2: TrainPlan::stage2(derive_seed(seed, 0xA2)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FairdiOutcome {
    /// stage-0 model (shared backbone plus its own head)
    pub stage0: TrainedModel,
    pub teachers: BTreeMap<Attribute, TrainedHead>,
    pub student: TrainedHead,
}

/// The full pipeline: backbone, one teacher per group present in the
/// training split, then the student. Teachers are independent given the
/// frozen backbone and run on their own threads with disjoint RNG streams
/// derived from the stage-1 seed, so the result does not depend on
/// scheduling.
pub fn train_fairdi(train: &Dataset, val: &Dataset, plans: &FairdiPlans) -> Result<FairdiOutcome> {
    let stage0 = train_stage0(train, val, &plans.stage0)?;
    let groups = train.groups();
    let results: Vec<(Attribute, Result<TrainedHead>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = groups
            .iter()
            .map(|&g| {
                let mut plan = plans.stage1.clone();
                plan.rng_seed = derive_seed(plans.stage1.rng_seed, STREAM_TEACHER + u64::from(g));
                let backbone = &stage0.backbone;
                scope.spawn(move || (g, train_stage1(train, val, backbone, g, &plan)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("teacher thread")).collect()
    });
    let mut teachers = BTreeMap::new();
    for (g, result) in results {
        teachers.insert(g, result?);
    }
    let teacher_heads: BTreeMap<Attribute, Head> = teachers
        .iter()
        .map(|(g, t)| (*g, t.head.clone()))
        .collect();
    let student = train_stage2(train, val, &stage0.backbone, &teacher_heads, &plans.stage2)?;
    Ok(FairdiOutcome {
        stage0,
        teachers,
        student,
    })
}
