//! Stratified train/val/test splitting: disjoint, exhaustive, deterministic
//! under a seed, with per-(label, attribute) proportions preserved to ±1
//! sample and global split sizes hit exactly (largest-remainder totals).

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::data::{derive_seed, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let s = Self { train, val, test };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter("split ratios must be in [0,1]".into()));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "split ratios sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// stratification fallbacks, if any
    pub warnings: Vec<String>,
}

fn largest_remainder_targets(total: usize, ratios: &[f64; 3]) -> [usize; 3] {
    let ideals: Vec<f64> = ratios.iter().map(|r| r * total as f64).collect();
    let mut counts: Vec<usize> = ideals.iter().map(|&x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = ideals[a] - ideals[a].floor();
        let rb = ideals[b] - ideals[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(total - assigned) {
        counts[i] += 1;
    }
    [counts[0], counts[1], counts[2]]
}

/// Splits by (label, attribute) strata. Strata too small to reach every
/// active split trigger a warning and a fallback to label-only strata.
pub fn split(ds: &Dataset, ratios: &SplitRatios, seed: u64) -> Result<SplitIndices> {
    ratios.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidInput("cannot split an empty dataset".into()));
    }
    let mut warnings = Vec::new();
    let active_splits = ratios.as_array().iter().filter(|&&r| r > 0.0).count();

    let strata = build_strata(ds, true);
    let strata = if strata.values().any(|v| v.len() < active_splits) {
        warnings.push(format!(
            "a (label, attribute) stratum has fewer than {active_splits} samples; \
             falling back to label-only stratification"
        ));
        build_strata(ds, false)
    } else {
        strata
    };

    let targets = largest_remainder_targets(ds.len(), &ratios.as_array());
    let mut allocated = [0usize; 3];
    // floor allocation per stratum, remembering fractional remainders
    struct StratumAlloc {
        members: Vec<usize>,
        counts: [usize; 3],
        fracs: [f64; 3],
        leftover: usize,
    }
    let mut allocs: Vec<StratumAlloc> = Vec::new();
    for (key, members) in &strata {
        let mut rng = StdRng::seed_from_u64(derive_seed(seed, 0x5117 ^ *key));
        let mut members = members.clone();
        members.shuffle(&mut rng);
        let n = members.len();
        let mut counts = [0usize; 3];
        let mut fracs = [0f64; 3];
        for (k, &r) in ratios.as_array().iter().enumerate() {
            let ideal = r * n as f64;
            counts[k] = ideal.floor() as usize;
            fracs[k] = ideal - ideal.floor();
            allocated[k] += counts[k];
        }
        let leftover = n - counts.iter().sum::<usize>();
        allocs.push(StratumAlloc {
            members,
            counts,
            fracs,
            leftover,
        });
    }

    // hand out each stratum's leftover samples against the global deficits,
    // at most one extra per (stratum, split) so per-stratum error stays ≤ 1
    let mut deficits = [
        targets[0] - allocated[0].min(targets[0]),
        targets[1] - allocated[1].min(targets[1]),
        targets[2] - allocated[2].min(targets[2]),
    ];
    for alloc in &mut allocs {
        let mut used = [false; 3];
        for _ in 0..alloc.leftover {
            let pick = (0..3)
                .filter(|&k| deficits[k] > 0 && !used[k])
                .max_by(|&a, &b| {
                    alloc.fracs[a]
                        .total_cmp(&alloc.fracs[b])
                        .then(deficits[a].cmp(&deficits[b]))
                        .then(b.cmp(&a))
                })
                .or_else(|| {
                    // all candidate splits already used in this stratum
                    (0..3)
                        .filter(|&k| deficits[k] > 0)
                        .max_by_key(|&k| deficits[k])
                });
            let k = pick.ok_or_else(|| {
                Error::Numeric("split leftover allocation ran out of capacity".into())
            })?;
            alloc.counts[k] += 1;
            used[k] = true;
            deficits[k] -= 1;
        }
    }

    let mut out = SplitIndices {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
        warnings,
    };
    for alloc in &allocs {
        let (a, b) = (alloc.counts[0], alloc.counts[0] + alloc.counts[1]);
        out.train.extend_from_slice(&alloc.members[..a]);
        out.val.extend_from_slice(&alloc.members[a..b]);
        out.test.extend_from_slice(&alloc.members[b..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}

/// stratum key: label * 2^32 + attribute (or label alone)
fn build_strata(ds: &Dataset, by_attribute: bool) -> BTreeMap<u64, Vec<usize>> {
    let mut strata: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for i in 0..ds.len() {
        let key = if by_attribute {
            (u64::from(ds.labels[i]) << 32) | u64::from(ds.attributes[i])
        } else {
            u64::from(ds.labels[i]) << 32
        };
        strata.entry(key).or_default().push(i);
    }
    strata
}
