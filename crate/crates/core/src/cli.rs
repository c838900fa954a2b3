//! Command implementations behind the binary: generate, train, evaluate,
//! stats, report. Each writes only under its output directory and echoes
//! the effective configuration for reproducibility.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::derive_seed;
use crate::datagen::{self, GenSpec};
use crate::error::{Error, Result};
use crate::metrics::{self, MetricsReport, PredictionSet, Task};
use crate::nn::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::pipeline::{self, split, FairdiPlans, SplitIndices, SplitRatios, TrainPlan};
use crate::stats::{self, Alpha};

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// generate: dataset CSV + analytic oracle JSON + spec echo.
pub fn cmd_generate(spec: &GenSpec, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let (ds, oracle) = datagen::generate(spec)?;
    datagen::save_dataset(&ds, &out_dir.join("dataset.csv"))?;
    datagen::save_oracle(&oracle, &out_dir.join("oracle.json"))?;
    datagen::save_spec(spec, &out_dir.join("genspec.json"))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMethod {
    /// uniform-weight baseline
    Erm,
    /// stage-0 reweighted model only
    Fis,
    /// full three-stage pipeline
    Fairdi,
}

impl TrainMethod {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "erm" => Ok(Self::Erm),
            "fis" => Ok(Self::Fis),
            "fairdi" => Ok(Self::Fairdi),
            other => Err(Error::Config(format!(
                "unknown method {other:?}; expected erm, fis, or fairdi"
            ))),
        }
    }
}

/// Effective training configuration. JSON-loadable; every stage plan is
/// explicit so the echoed config fully reproduces a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dataset: PathBuf,
    pub out_dir: PathBuf,
    pub method: TrainMethod,
    pub seed: u64,
    pub split: SplitRatios,
    pub stage0: TrainPlan,
    pub stage1: TrainPlan,
    pub stage2: TrainPlan,
}

impl TrainConfig {
    pub fn new(dataset: PathBuf, out_dir: PathBuf, method: TrainMethod, seed: u64) -> Self {
        let plans = FairdiPlans::with_seed(seed);
        let mut stage0 = plans.stage0;
        if method == TrainMethod::Erm {
            stage0 = TrainPlan {
                stage: pipeline::StageKind::Erm,
                c: 0.0,
                ..stage0
            };
        }
        Self {
            dataset,
            out_dir,
            method,
            seed,
            split: SplitRatios::default(),
            stage0,
            stage1: plans.stage1,
            stage2: plans.stage2,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn write_record(record: &pipeline::ExperimentRecord, out_dir: &Path) -> Result<()> {
    write_json(record, &out_dir.join(format!("record_{}.json", record.stage)))?;
    let mut csv = String::from("epoch,train_loss,val_overall_auc,val_worst_auc\n");
    for e in &record.epochs {
        csv.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e}\n",
            e.epoch, e.train_loss, e.val_overall_auc, e.val_worst_auc
        ));
    }
    fs::write(out_dir.join(format!("log_{}.csv", record.stage)), csv)?;
    Ok(())
}

/// train: checkpoints, per-stage records and CSV logs, split indices,
/// timing file, and the effective config echo.
pub fn cmd_train(cfg: &TrainConfig) -> Result<()> {
    ensure_dir(&cfg.out_dir)?;
    let ds = datagen::load_dataset(&cfg.dataset)?;
    let indices = split(&ds, &cfg.split, derive_seed(cfg.seed, 0x51))?;
    write_json(&indices, &cfg.out_dir.join("splits.json"))?;
    let train = ds.subset(&indices.train);
    let val = ds.subset(&indices.val);

    write_json(cfg, &cfg.out_dir.join("config.json"))?;

    let mut timings: BTreeMap<String, f64> = BTreeMap::new();
    match cfg.method {
        TrainMethod::Erm => {
            let model = pipeline::train_erm(&train, &val, &cfg.stage0)?;
            timings.insert(model.record.stage.clone(), model.record.wall_time_secs);
            save_checkpoint(
                &Checkpoint::new(model.backbone.clone(), model.head.clone(), cfg.stage0.rng_seed),
                &cfg.out_dir.join("erm.ckpt.json"),
            )?;
            write_record(&model.record, &cfg.out_dir)?;
        }
        TrainMethod::Fis => {
            let model = pipeline::train_stage0(&train, &val, &cfg.stage0)?;
            timings.insert(model.record.stage.clone(), model.record.wall_time_secs);
            save_checkpoint(
                &Checkpoint::new(model.backbone.clone(), model.head.clone(), cfg.stage0.rng_seed),
                &cfg.out_dir.join("stage0.ckpt.json"),
            )?;
            write_record(&model.record, &cfg.out_dir)?;
        }
        TrainMethod::Fairdi => {
            let plans = FairdiPlans {
                stage0: cfg.stage0.clone(),
                stage1: cfg.stage1.clone(),
                stage2: cfg.stage2.clone(),
            };
            let out = pipeline::train_fairdi(&train, &val, &plans)?;
            timings.insert(
                out.stage0.record.stage.clone(),
                out.stage0.record.wall_time_secs,
            );
            save_checkpoint(
                &Checkpoint::new(
                    out.stage0.backbone.clone(),
                    out.stage0.head.clone(),
                    cfg.stage0.rng_seed,
                ),
                &cfg.out_dir.join("backbone.ckpt.json"),
            )?;
            write_record(&out.stage0.record, &cfg.out_dir)?;
            for (g, teacher) in &out.teachers {
                timings.insert(teacher.record.stage.clone(), teacher.record.wall_time_secs);
                save_checkpoint(
                    &Checkpoint::new(
                        out.stage0.backbone.clone(),
                        teacher.head.clone(),
                        teacher.record.rng_seed,
                    ),
                    &cfg.out_dir.join(format!("teacher_{g}.ckpt.json")),
                )?;
                write_record(&teacher.record, &cfg.out_dir)?;
            }
            timings.insert(
                out.student.record.stage.clone(),
                out.student.record.wall_time_secs,
            );
            save_checkpoint(
                &Checkpoint::new(
                    out.stage0.backbone.clone(),
                    out.student.head.clone(),
                    out.student.record.rng_seed,
                ),
                &cfg.out_dir.join("student.ckpt.json"),
            )?;
            write_record(&out.student.record, &cfg.out_dir)?;
        }
    }
    let total: f64 = timings.values().sum();
    write_json(
        &json!({ "stage_wall_time_secs": timings, "total_secs": total }),
        &cfg.out_dir.join("timing.json"),
    )?;
    Ok(())
}

/// Which rows of the dataset an evaluation covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

impl SplitChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "val" => Ok(Self::Val),
            "test" => Ok(Self::Test),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }
}

/// What cmd_evaluate consumes.
pub enum EvaluateInput {
    /// model checkpoint applied to (a split of) a dataset
    Checkpoint {
        checkpoint: PathBuf,
        dataset: PathBuf,
        splits: Option<PathBuf>,
        split: SplitChoice,
    },
    /// classification predictions CSV (id, score, label, attribute)
    Predictions(PathBuf),
    /// segmentation index CSV (id, pred_path, truth_path, attribute)
    SegmentationIndex(PathBuf),
    /// fixture mode: known per-group values, derived columns recomputed
    GroupValues(PathBuf),
}

/// Group-value fixture file: {"metric": "auc", "overall": ..,
/// "groups": {"0": ..}} — reproduces a results-table row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupValuesFixture {
    pub metric: String,
    pub overall: f64,
    pub groups: BTreeMap<u32, f64>,
}

/// evaluate: metrics report as JSON + CSV, per-group ROC points for
/// classification, plus the predictions CSV in checkpoint mode. An
/// undefined metric is reported as a field, not a failure.
pub fn cmd_evaluate(input: &EvaluateInput, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let (preds, task) = match input {
        EvaluateInput::Checkpoint {
            checkpoint,
            dataset,
            splits,
            split,
        } => {
            let ckpt = load_checkpoint(checkpoint)?;
            let ds = datagen::load_dataset(dataset)?;
            let ds = match (splits, split) {
                (_, SplitChoice::All) => ds,
                (None, _) => {
                    return Err(Error::Config(
                        "evaluating a named split needs --splits from the training run".into(),
                    ))
                }
                (Some(p), choice) => {
                    let idx: SplitIndices = serde_json::from_str(&fs::read_to_string(p)?)?;
                    let rows = match choice {
                        SplitChoice::Train => &idx.train,
                        SplitChoice::Val => &idx.val,
                        SplitChoice::Test => &idx.test,
                        SplitChoice::All => unreachable!(),
                    };
                    ds.subset(rows)
                }
            };
            let scores = pipeline::predict_scores(&ckpt.backbone, &ckpt.head, &ds)?;
            let records: Vec<metrics::ClassificationRecord> = scores
                .iter()
                .enumerate()
                .map(|(i, &score)| metrics::ClassificationRecord {
                    id: i.to_string(),
                    score,
                    label: ds.labels[i],
                    attribute: ds.attributes[i],
                })
                .collect();
            metrics::write_classification_csv(&records, &out_dir.join("predictions.csv"))?;
            (PredictionSet::Classification(records), Task::Classification)
        }
        EvaluateInput::Predictions(path) => (
            PredictionSet::Classification(metrics::load_classification_csv(path)?),
            Task::Classification,
        ),
        EvaluateInput::SegmentationIndex(path) => (
            PredictionSet::Segmentation(metrics::load_segmentation_index(path)?),
            Task::Segmentation,
        ),
        EvaluateInput::GroupValues(path) => {
            let fixture: GroupValuesFixture = serde_json::from_str(&fs::read_to_string(path)?)?;
            let block = match fixture.metric.as_str() {
                "auc" => metrics::classification_block_from_group_aucs(
                    fixture.overall,
                    &fixture.groups,
                )?,
                m @ ("dice" | "iou") => {
                    metrics::overlap_block_from_group_values(m, fixture.overall, &fixture.groups)?
                }
                other => {
                    return Err(Error::Config(format!(
                        "fixture metric must be auc, dice, or iou, got {other:?}"
                    )))
                }
            };
            let report = MetricsReport {
                task: if fixture.metric == "auc" {
                    Task::Classification
                } else {
                    Task::Segmentation
                },
                primary: block,
                secondary: None,
            };
            write_json(&report, &out_dir.join("report.json"))?;
            fs::write(out_dir.join("report.csv"), metrics::report_to_csv(&report))?;
            return Ok(());
        }
    };

    match metrics::report(&preds, task) {
        Ok(report) => {
            write_json(&report, &out_dir.join("report.json"))?;
            fs::write(out_dir.join("report.csv"), metrics::report_to_csv(&report))?;
            if let PredictionSet::Classification(records) = &preds {
                let mut by_group: BTreeMap<u32, (Vec<f64>, Vec<u8>)> = BTreeMap::new();
                for r in records {
                    let e = by_group.entry(r.attribute).or_default();
                    e.0.push(r.score);
                    e.1.push(r.label);
                }
                for (g, (s, l)) in &by_group {
                    if let Ok(points) = metrics::roc_points(s, l) {
                        let mut csv = String::from("threshold,fpr,tpr\n");
                        for p in points {
                            csv.push_str(&format!("{},{},{}\n", p.threshold, p.fpr, p.tpr));
                        }
                        fs::write(out_dir.join(format!("roc_group_{g}.csv")), csv)?;
                    }
                }
            }
            Ok(())
        }
        Err(Error::UndefinedMetric(reason)) => {
            write_json(&json!({ "undefined": reason }), &out_dir.join("report.json"))?;
            Ok(())
        }
        Err(e) => Err(e),
    }
}

/// stats: rank/Friedman/Nemenyi pipeline on a scores CSV.
pub fn cmd_stats(
    scores_csv: &Path,
    alpha: f64,
    higher_is_better: bool,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let table = stats::load_scores_csv(scores_csv, higher_is_better)?;
    let alpha = Alpha::from_f64(alpha)?;
    let diagram = stats::cd_diagram_data(&table, alpha)?;
    write_json(&diagram, &out_dir.join("stats.json"))?;
    fs::write(out_dir.join("ranks.csv"), stats::ranks_to_csv(&table))?;
    Ok(())
}

/// report: consolidated summary of an experiment directory (markdown +
/// JSON). Values are copied from the underlying files, never recomputed.
pub fn cmd_report(dir: &Path, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let mut records = Vec::new();
    let mut missing: Vec<String> = Vec::new();

    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for path in &entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("record_") && name.ends_with(".json") {
            let rec: pipeline::ExperimentRecord =
                serde_json::from_str(&fs::read_to_string(path)?)?;
            records.push(rec);
        }
    }
    if records.is_empty() {
        return Err(Error::Config(format!(
            "no record_*.json files in {}; expected training outputs \
             (record_*.json, timing.json, config.json)",
            dir.display()
        )));
    }

    let timing: Option<serde_json::Value> = match fs::read_to_string(dir.join("timing.json")) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => {
            missing.push("timing.json".into());
            None
        }
    };
    let config: Option<serde_json::Value> = match fs::read_to_string(dir.join("config.json")) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(_) => {
            missing.push("config.json".into());
            None
        }
    };
    let eval_report: Option<serde_json::Value> =
        match fs::read_to_string(dir.join("report.json")) {
            Ok(text) => Some(serde_json::from_str(&text)?),
            Err(_) => None,
        };

    let mut md = String::from("# Experiment summary\n\n");
    md.push_str("| stage | epochs run | best epoch | best val worst-case AUC | wall time (s) |\n");
    md.push_str("|---|---|---|---|---|\n");
    let mut stage_rows = Vec::new();
    for rec in &records {
        let best = rec
            .epochs
            .iter()
            .find(|e| e.epoch == rec.best_epoch)
            .map(|e| e.val_worst_auc);
        let wall = timing
            .as_ref()
            .and_then(|t| t["stage_wall_time_secs"][&rec.stage].as_f64());
        md.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            rec.stage,
            rec.epochs.len(),
            rec.best_epoch,
            best.map_or("-".into(), |v| format!("{v:.4}")),
            wall.map_or("-".into(), |v| format!("{v:.2}")),
        ));
        stage_rows.push(json!({
            "stage": rec.stage,
            "epochs_run": rec.epochs.len(),
            "best_epoch": rec.best_epoch,
            "best_val_worst_auc": best,
            "wall_time_secs": wall,
        }));
    }
    if let Some(rep) = &eval_report {
        md.push_str("\n## Evaluation\n\n```json\n");
        md.push_str(&serde_json::to_string_pretty(rep)?);
        md.push_str("\n```\n");
    }
    if !missing.is_empty() {
        md.push_str(&format!("\n_missing inputs: {}_\n", missing.join(", ")));
    }
    fs::write(out_dir.join("summary.md"), md)?;
    write_json(
        &json!({
            "stages": stage_rows,
            "timing": timing,
            "config": config,
            "evaluation": eval_report,
            "missing": missing,
        }),
        &out_dir.join("summary.json"),
    )?;
    Ok(())
}
