//! Synthetic fairness benchmark: two-class Gaussian mixtures with a
//! planted, controllable per-group bias. Higher-index groups get a smaller
//! class-mean separation and a larger label-flip rate, so they are harder
//! by construction and the per-group Bayes-optimal AUC is known in closed
//! form — an analytic oracle for every downstream fairness metric.
//!
//! Layout of the class signal: group g's classes are separated along
//! feature coordinate g, and the last coordinate carries a group marker, so
//! group membership is recoverable from the features and a model with
//! enough capacity can learn group-conditional readouts. In image mode the
//! class signal lives in a centered patch instead and the marker in the
//! top-left pixel.

use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, Attribute, Dataset};
use crate::error::{Error, Result};
use crate::special::normal_cdf;

const MARKER_SCALE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub n_samples: usize,
    /// flat-mode feature count; ignored in image mode
    pub n_features: usize,
    /// Some(h) switches to h×h image mode
    #[serde(default)]
    pub image_side: Option<usize>,
    pub n_groups: usize,
    pub group_proportions: Vec<f64>,
    /// class-mean distance for group 0 (unit-variance features)
    pub base_separation: f64,
    /// per-group degradation of separation and label noise, ≥ 0
    pub bias_strength: f64,
    /// label flip rate for group 0, in [0, 0.5]
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            n_samples: 8000,
            n_features: 8,
            image_side: None,
            n_groups: 2,
            group_proportions: vec![0.65, 0.35],
            base_separation: 2.4,
            bias_strength: 0.0,
            label_noise: 0.05,
            seed: 7,
        }
    }
}

impl GenSpec {
    pub fn feature_dim(&self) -> usize {
        self.image_side.map_or(self.n_features, |h| h * h)
    }

    /// Separation of group g's class means.
    pub fn separation(&self, g: usize) -> f64 {
        let frac = if self.n_groups > 1 {
            g as f64 / (self.n_groups - 1) as f64
        } else {
            0.0
        };
        self.base_separation * (1.0 - self.bias_strength * frac)
    }

    /// Label flip rate for group g, clamped at 1/2.
    pub fn flip_rate(&self, g: usize) -> f64 {
        let frac = if self.n_groups > 1 {
            g as f64 / (self.n_groups - 1) as f64
        } else {
            0.0
        };
        (self.label_noise * (1.0 + self.bias_strength * frac)).min(0.5)
    }

    fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidSpec("n_samples must be positive".into()));
        }
        if self.n_groups < 2 {
            return Err(Error::InvalidSpec("need at least 2 groups".into()));
        }
        if self.group_proportions.len() != self.n_groups {
            return Err(Error::InvalidSpec(format!(
                "{} proportions for {} groups",
                self.group_proportions.len(),
                self.n_groups
            )));
        }
        let sum: f64 = self.group_proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.group_proportions.iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidSpec(
                "group proportions must be positive and sum to 1".into(),
            ));
        }
        if self.base_separation <= 0.0 {
            return Err(Error::InvalidSpec("base_separation must be positive".into()));
        }
        if self.bias_strength < 0.0 {
            return Err(Error::InvalidSpec("bias_strength must be >= 0".into()));
        }
        if !(0.0..=0.5).contains(&self.label_noise) {
            return Err(Error::InvalidSpec("label_noise must be in [0, 0.5]".into()));
        }
        for g in 0..self.n_groups {
            if self.separation(g) < 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "bias_strength {} drives group {g} separation negative",
                    self.bias_strength
                )));
            }
        }
        let dim = self.feature_dim();
        if self.image_side.is_none() && dim < self.n_groups + 1 {
            return Err(Error::InvalidSpec(format!(
                "flat mode needs n_features >= n_groups + 1, got {dim}"
            )));
        }
        if let Some(h) = self.image_side {
            if h < 2 {
                return Err(Error::InvalidSpec("image side must be >= 2".into()));
            }
        }
        Ok(())
    }
}

/// Closed-form per-group ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupOracle {
    pub attribute: Attribute,
    pub separation: f64,
    pub label_flip_rate: f64,
    /// Φ(d/√2): AUC of the group's Bayes-optimal scorer against clean labels
    pub bayes_auc: f64,
    /// the same scorer against flip-noised labels: (1−2ρ)·AUC + ρ
    pub noisy_label_bayes_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInfo {
    pub per_group: Vec<GroupOracle>,
}

pub fn oracle_info(spec: &GenSpec) -> Result<OracleInfo> {
    spec.validate()?;
    let per_group = (0..spec.n_groups)
        .map(|g| {
            let d = spec.separation(g);
            let rho = spec.flip_rate(g);
            let bayes = normal_cdf(d / std::f64::consts::SQRT_2);
            GroupOracle {
                attribute: g as Attribute,
                separation: d,
                label_flip_rate: rho,
                bayes_auc: bayes,
                noisy_label_bayes_auc: (1.0 - 2.0 * rho) * bayes + rho,
            }
        })
        .collect();
    Ok(OracleInfo { per_group })
}

/// Integer allocation of `total` across `fractions` by largest remainder.
fn largest_remainder(total: usize, fractions: &[f64]) -> Vec<usize> {
    let ideals: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = ideals.iter().map(|&x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideals[a] - ideals[a].floor();
        let rb = ideals[b] - ideals[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    counts
}

/// Deterministic synthetic dataset plus its analytic oracle.
pub fn generate(spec: &GenSpec) -> Result<(Dataset, OracleInfo)> {
    spec.validate()?;
    let oracle = oracle_info(spec)?;
    let dim = spec.feature_dim();
    let group_sizes = largest_remainder(spec.n_samples, &spec.group_proportions);

    let mut features = Vec::with_capacity(spec.n_samples);
    let mut labels = Vec::with_capacity(spec.n_samples);
    let mut attributes = Vec::with_capacity(spec.n_samples);
    for (g, &size) in group_sizes.iter().enumerate() {
        let mut rng = StdRng::seed_from_u64(derive_seed(spec.seed, 1000 + g as u64));
        let d = spec.separation(g);
        let rho = spec.flip_rate(g);
        // zero-mean bipolar group marker, ±MARKER_SCALE at the extremes
        let marker = MARKER_SCALE * (2.0 * g as f64 / (spec.n_groups - 1) as f64 - 1.0);
        let n_pos = largest_remainder(size, &[0.5, 0.5])[0];
        for i in 0..size {
            let class = u8::from(i < n_pos);
            let sign = if class == 1 { 0.5 } else { -0.5 };
            let mut x: Vec<f64> = (0..dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            match spec.image_side {
                None => {
                    x[g] += sign * d;
                    x[dim - 1] += marker;
                }
                Some(h) => {
                    // class signal spread over a centered patch, group
                    // marker in the top-left pixel
                    let side = h.div_ceil(2);
                    let r0 = (h - side) / 2;
                    let per_pixel = sign * d / ((side * side) as f64).sqrt();
                    for r in r0..r0 + side {
                        for c in r0..r0 + side {
                            x[r * h + c] += per_pixel;
                        }
                    }
                    x[0] += marker;
                }
            }
            let label = if rho > 0.0 && rng.random_bool(rho) {
                1 - class
            } else {
                class
            };
            features.push(x);
            labels.push(label);
            attributes.push(g as Attribute);
        }
    }

    // seeded global shuffle so file order mixes groups and classes
    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    let mut rng = StdRng::seed_from_u64(derive_seed(spec.seed, 1));
    order.shuffle(&mut rng);
    let ds = Dataset::new(
        order.iter().map(|&i| features[i].clone()).collect(),
        order.iter().map(|&i| labels[i]).collect(),
        order.iter().map(|&i| attributes[i]).collect(),
        spec.image_side,
    )?;
    Ok((ds, oracle))
}

/// The group-conditional Bayes-optimal score for each sample: the
/// projection of its features onto its own group's class direction.
pub fn analytic_scores(ds: &Dataset, spec: &GenSpec) -> Vec<f64> {
    match spec.image_side {
        None => ds
            .features
            .iter()
            .zip(&ds.attributes)
            .map(|(x, &a)| x[a as usize])
            .collect(),
        Some(h) => {
            let side = h.div_ceil(2);
            let r0 = (h - side) / 2;
            ds.features
                .iter()
                .map(|x| {
                    let mut s = 0.0;
                    for r in r0..r0 + side {
                        for c in r0..r0 + side {
                            s += x[r * h + c];
                        }
                    }
                    s
                })
                .collect()
        }
    }
}

/// Writes the dataset CSV: feature columns (f0.. or px0..), then label and
/// attribute. 17 significant digits so reloading is lossless.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let dim = ds.feature_dim();
    let prefix = if ds.image_side.is_some() { "px" } else { "f" };
    let mut out = String::new();
    for j in 0..dim {
        out.push_str(&format!("{prefix}{j},"));
    }
    out.push_str("label,attribute\n");
    for i in 0..ds.len() {
        for v in &ds.features[i] {
            out.push_str(&format!("{v:.16e},"));
        }
        out.push_str(&format!("{},{}\n", ds.labels[i], ds.attributes[i]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Loads a dataset CSV. Pixel columns (px0..) restore image mode when the
/// count is a perfect square.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty dataset file".into(),
    })?;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.len() < 3 {
        return Err(Error::Parse {
            line: 1,
            message: "expected feature columns plus label,attribute".into(),
        });
    }
    let dim = cols.len() - 2;
    let image_mode = cols[0].starts_with("px");
    for (j, c) in cols[..dim].iter().enumerate() {
        let want_f = format!("f{j}");
        let want_px = format!("px{j}");
        if **c != want_f && **c != want_px {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected feature column {c:?} at position {j}"),
            });
        }
    }
    if cols[dim] != "label" || cols[dim + 1] != "attribute" {
        return Err(Error::Parse {
            line: 1,
            message: "last columns must be label,attribute".into(),
        });
    }
    let image_side = if image_mode {
        let h = (dim as f64).sqrt().round() as usize;
        if h * h != dim {
            return Err(Error::Parse {
                line: 1,
                message: format!("{dim} pixel columns is not a square image"),
            });
        }
        Some(h)
    } else {
        None
    };

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut attributes = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} fields, got {}", dim + 2, fields.len()),
            });
        }
        let row: Vec<f64> = fields[..dim]
            .iter()
            .map(|v| {
                v.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad feature value {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        let label: u8 = match fields[dim].trim() {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        let attribute: Attribute = fields[dim + 1].trim().parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("unknown attribute token {:?}", fields[dim + 1]),
        })?;
        features.push(row);
        labels.push(label);
        attributes.push(attribute);
    }
    Dataset::new(features, labels, attributes, image_side)
}

pub fn save_oracle(oracle: &OracleInfo, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(oracle)?)?;
    Ok(())
}

pub fn save_spec(spec: &GenSpec, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(spec)?)?;
    Ok(())
}

pub fn load_spec(path: &Path) -> Result<GenSpec> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::auc;

    #[test]
    fn unbiased_spec_has_equal_group_oracles() {
        let spec = GenSpec {
            bias_strength: 0.0,
            ..GenSpec::default()
        };
        let oracle = oracle_info(&spec).unwrap();
        let first = oracle.per_group[0].bayes_auc;
        for g in &oracle.per_group {
            assert_eq!(g.bayes_auc, first);
        }
    }

    #[test]
    fn equal_proportions_give_balanced_groups() {
        let spec = GenSpec {
            n_samples: 1000,
            group_proportions: vec![0.5, 0.5],
            ..GenSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        let n0 = ds.attributes.iter().filter(|&&a| a == 0).count();
        assert!((n0 as i64 - 500).abs() <= 1);
    }

    #[test]
    fn bayes_auc_closed_form_and_empirical_check() {
        let spec = GenSpec {
            n_samples: 2000,
            base_separation: 2.0,
            bias_strength: 0.0,
            label_noise: 0.0,
            seed: 3,
            ..GenSpec::default()
        };
        let oracle = oracle_info(&spec).unwrap();
        assert!((oracle.per_group[0].bayes_auc - 0.9214).abs() < 1e-4);

        let (ds, _) = generate(&spec).unwrap();
        let scores = analytic_scores(&ds, &spec);
        for g in ds.groups() {
            let idx = ds.group_indices(g);
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l: Vec<u8> = idx.iter().map(|&i| ds.labels[i]).collect();
            let emp = auc(&s, &l).unwrap();
            assert!(
                (emp - 0.9214).abs() < 0.02,
                "group {g}: empirical {emp} vs analytic 0.9214"
            );
        }
    }

    #[test]
    fn planted_bias_is_monotone_in_group_index() {
        let spec = GenSpec {
            n_groups: 3,
            group_proportions: vec![0.4, 0.3, 0.3],
            bias_strength: 0.6,
            ..GenSpec::default()
        };
        let oracle = oracle_info(&spec).unwrap();
        for pair in oracle.per_group.windows(2) {
            assert!(pair[1].bayes_auc <= pair[0].bayes_auc);
            assert!(pair[1].noisy_label_bayes_auc < pair[0].noisy_label_bayes_auc);
        }
    }

    #[test]
    fn generator_is_deterministic_to_the_byte() {
        let spec = GenSpec {
            n_samples: 300,
            bias_strength: 0.5,
            ..GenSpec::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        let (d1, _) = generate(&spec).unwrap();
        let (d2, _) = generate(&spec).unwrap();
        save_dataset(&d1, &p1).unwrap();
        save_dataset(&d2, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn csv_round_trip_is_lossless() {
        let spec = GenSpec {
            n_samples: 50,
            ..GenSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn image_mode_round_trip_restores_side() {
        let spec = GenSpec {
            n_samples: 20,
            image_side: Some(4),
            ..GenSpec::default()
        };
        let (ds, _) = generate(&spec).unwrap();
        assert_eq!(ds.feature_dim(), 16);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.csv");
        save_dataset(&ds, &path).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.image_side, Some(4));
        assert_eq!(loaded, ds);
    }

    #[test]
    fn bad_label_cites_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let mut text = String::from("f0,f1,f2,label,attribute\n");
        for i in 0..6 {
            let label = if i == 5 { 2 } else { 0 };
            text.push_str(&format!("0.0,0.0,0.0,{label},0\n"));
        }
        std::fs::write(&path, text).unwrap();
        match load_dataset(&path) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 7);
                assert!(message.contains('2'));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn handcrafted_csv_parses_to_expected_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tiny.csv");
        std::fs::write(
            &path,
            "f0,f1,label,attribute\n1.5,-2.0,1,0\n0.0,3.25,0,1\n-1.0,0.5,1,1\n",
        )
        .unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.features[0], vec![1.5, -2.0]);
        assert_eq!(ds.labels, vec![1, 0, 1]);
        assert_eq!(ds.attributes, vec![0, 1, 1]);
        assert_eq!(ds.image_side, None);
    }

    #[test]
    fn infeasible_spec_rejected() {
        let spec = GenSpec {
            bias_strength: 1.5,
            ..GenSpec::default()
        };
        assert!(matches!(generate(&spec), Err(Error::InvalidSpec(_))));
    }
}
