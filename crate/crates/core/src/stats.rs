//! Cross-task significance machinery: fractional ranking, the Friedman
//! test (χ² form, with an exact permutation mode for tiny tables), the
//! Nemenyi post-hoc critical difference, and machine-readable
//! critical-difference diagram data.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::chi2_sf;

/// Algorithms × tasks score matrix with per-task fractional ranks
/// (1 = best, ties averaged).
#[derive(Debug, Clone, PartialEq)]
pub struct RankTable {
    pub algorithms: Vec<String>,
    pub tasks: Vec<String>,
    /// scores[task][algorithm]
    pub scores: Vec<Vec<f64>>,
    pub higher_is_better: bool,
    /// ranks[task][algorithm]
    pub ranks: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn new(
        algorithms: Vec<String>,
        tasks: Vec<String>,
        scores: Vec<Vec<f64>>,
        higher_is_better: bool,
    ) -> Result<Self> {
        let k = algorithms.len();
        let n = tasks.len();
        if k < 2 {
            return Err(Error::InvalidInput("need at least 2 algorithms".into()));
        }
        if n == 0 || scores.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} score rows, got {}",
                scores.len()
            )));
        }
        for (i, row) in scores.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidInput(format!(
                    "task {:?} has {} scores, expected {k}",
                    tasks[i],
                    row.len()
                )));
            }
            for (j, v) in row.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::InvalidInput(format!(
                        "NaN score for task {:?}, algorithm {:?}",
                        tasks[i], algorithms[j]
                    )));
                }
            }
        }
        let ranks = scores
            .iter()
            .map(|row| rank_row(row, higher_is_better))
            .collect();
        Ok(Self {
            algorithms,
            tasks,
            scores,
            higher_is_better,
            ranks,
        })
    }

    pub fn n_algorithms(&self) -> usize {
        self.algorithms.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    /// Column means of the rank matrix.
    pub fn average_ranks(&self) -> Vec<f64> {
        let k = self.n_algorithms();
        let n = self.n_tasks() as f64;
        let mut avg = vec![0.0; k];
        for row in &self.ranks {
            for (a, r) in avg.iter_mut().zip(row) {
                *a += r;
            }
        }
        for a in &mut avg {
            *a /= n;
        }
        avg
    }
}

/// Fractional ranking of one row: rank 1 for the best score, ties averaged.
pub fn rank_row(row: &[f64], higher_is_better: bool) -> Vec<f64> {
    let k = row.len();
    let mut order: Vec<usize> = (0..k).collect();
    if higher_is_better {
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
    } else {
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]));
    }
    let mut ranks = vec![0.0; k];
    let mut i = 0;
    while i < k {
        let mut j = i;
        while j + 1 < k && row[order[j + 1]] == row[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub chi2: f64,
    pub p_value: f64,
}

/// Friedman test in the column-rank-sum form:
/// χ² = 12/(N·k·(k+1))·Σ Rⱼ² − 3·N·(k+1), p from χ²_{k−1}.
pub fn friedman(table: &RankTable) -> Result<FriedmanResult> {
    let k = table.n_algorithms();
    let n = table.n_tasks();
    if n < 2 {
        return Err(Error::InvalidInput(
            "Friedman test needs at least 2 tasks".into(),
        ));
    }
    let chi2 = friedman_chi2_from_ranks(&table.ranks, k, n);
    let p_value = chi2_sf(chi2, k - 1);
    Ok(FriedmanResult { chi2, p_value })
}

fn friedman_chi2_from_ranks(ranks: &[Vec<f64>], k: usize, n: usize) -> f64 {
    let mut col_sums = vec![0.0; k];
    for row in ranks {
        for (s, r) in col_sums.iter_mut().zip(row) {
            *s += r;
        }
    }
    friedman_chi2_from_col_sums(&col_sums, k, n)
}

fn friedman_chi2_from_col_sums(col_sums: &[f64], k: usize, n: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    let sum_sq: f64 = col_sums.iter().map(|s| s * s).sum();
    // clamp tiny negative rounding residue for fully tied tables
    (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0)
}

/// Exact permutation distribution summary for the Friedman statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FriedmanExact {
    /// P(χ² ≥ observed), the standard (valid, conservative) permutation p
    pub p_value: f64,
    /// P(χ² > observed) + ·½·P(χ² = observed): the mid-p variant, the
    /// right comparison point for a continuous approximation because it
    /// removes the discreteness bias
    pub mid_p: f64,
}

/// Exact permutation test: enumerates all (k!)^N within-row rearrangements
/// of the observed rank vectors and tallies the χ² distribution. Refuses
/// tables beyond `max_combos`.
pub fn friedman_exact(table: &RankTable, max_combos: u64) -> Result<FriedmanExact> {
    let k = table.n_algorithms();
    let n = table.n_tasks();
    let k_fact: u64 = (1..=k as u64).product();
    let combos = (k_fact as f64).powi(n as i32);
    if combos > max_combos as f64 {
        return Err(Error::InvalidInput(format!(
            "(k!)^N = {combos:.0} exceeds the permutation budget {max_combos}"
        )));
    }
    let observed = friedman_chi2_from_ranks(&table.ranks, k, n);

    // all k! arrangements of each row's rank vector
    let row_perms: Vec<Vec<Vec<f64>>> = table.ranks.iter().map(|row| permutations(row)).collect();

    struct Tally {
        above: u64,
        equal: u64,
        total: u64,
    }

    fn recurse(
        depth: usize,
        row_perms: &[Vec<Vec<f64>>],
        col_sums: &mut Vec<f64>,
        k: usize,
        n: usize,
        observed: f64,
        tally: &mut Tally,
    ) {
        if depth == row_perms.len() {
            let chi2 = friedman_chi2_from_col_sums(col_sums, k, n);
            tally.total += 1;
            if chi2 > observed + 1e-9 {
                tally.above += 1;
            } else if chi2 >= observed - 1e-9 {
                tally.equal += 1;
            }
            return;
        }
        for perm in &row_perms[depth] {
            for (s, r) in col_sums.iter_mut().zip(perm) {
                *s += r;
            }
            recurse(depth + 1, row_perms, col_sums, k, n, observed, tally);
            for (s, r) in col_sums.iter_mut().zip(perm) {
                *s -= r;
            }
        }
    }

    let mut tally = Tally {
        above: 0,
        equal: 0,
        total: 0,
    };
    let mut col_sums = vec![0.0; k];
    recurse(0, &row_perms, &mut col_sums, k, n, observed, &mut tally);
    let total = tally.total as f64;
    Ok(FriedmanExact {
        p_value: (tally.above + tally.equal) as f64 / total,
        mid_p: (tally.above as f64 + 0.5 * tally.equal as f64) / total,
    })
}

/// Standard (inclusive) exact permutation p-value.
pub fn friedman_exact_p(table: &RankTable, max_combos: u64) -> Result<f64> {
    Ok(friedman_exact(table, max_combos)?.p_value)
}

fn permutations(row: &[f64]) -> Vec<Vec<f64>> {
    // Heap's algorithm
    let mut out = Vec::new();
    let mut a = row.to_vec();
    let n = a.len();
    let mut c = vec![0usize; n];
    out.push(a.clone());
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alpha {
    #[serde(rename = "0.05")]
    A05,
    #[serde(rename = "0.10")]
    A10,
}

impl Alpha {
    pub fn from_f64(alpha: f64) -> Result<Self> {
        if (alpha - 0.05).abs() < 1e-9 {
            Ok(Alpha::A05)
        } else if (alpha - 0.10).abs() < 1e-9 {
            Ok(Alpha::A10)
        } else {
            Err(Error::InvalidParameter(format!(
                "alpha must be 0.05 or 0.10, got {alpha}"
            )))
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Alpha::A05 => 0.05,
            Alpha::A10 => 0.10,
        }
    }
}

// Two-tailed Nemenyi constants: studentized range q divided by √2,
// for k = 2..=10 (standard published table).
const Q_ALPHA_05: [f64; 9] = [
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948319, 3.030879, 3.101730, 3.163684,
];
const Q_ALPHA_10: [f64; 9] = [
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884, 2.854606, 2.919888,
];

/// Nemenyi critical difference CD = q_α(k)·√(k(k+1)/(6N)). Average-rank
/// differences above the CD are significant.
pub fn nemenyi_cd(k: usize, n: usize, alpha: Alpha) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::UnsupportedK { k });
    }
    if n == 0 {
        return Err(Error::InvalidInput("need at least one task".into()));
    }
    let q = match alpha {
        Alpha::A05 => Q_ALPHA_05[k - 2],
        Alpha::A10 => Q_ALPHA_10[k - 2],
    };
    let kf = k as f64;
    Ok(q * (kf * (kf + 1.0) / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgorithmRank {
    pub algorithm: String,
    pub average_rank: f64,
}

/// Machine-readable CD-diagram description (no rendering).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdDiagram {
    pub chi2: f64,
    pub p_value: f64,
    pub alpha: f64,
    /// false when the Friedman gate failed (p ≥ α): no cliques are emitted
    pub gate_passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critical_difference: Option<f64>,
    /// ascending average rank (best first)
    pub average_ranks: Vec<AlgorithmRank>,
    /// maximal groups of mutually non-significant algorithms ("connected
    /// by a line"), as contiguous intervals over the sorted ranks
    pub cliques: Vec<Vec<String>>,
}

/// Runs the Friedman gate, then the Nemenyi CD and clique construction.
pub fn cd_diagram_data(table: &RankTable, alpha: Alpha) -> Result<CdDiagram> {
    let fr = friedman(table)?;
    let avg = table.average_ranks();
    let mut order: Vec<usize> = (0..avg.len()).collect();
    order.sort_by(|&a, &b| avg[a].total_cmp(&avg[b]));
    let average_ranks: Vec<AlgorithmRank> = order
        .iter()
        .map(|&i| AlgorithmRank {
            algorithm: table.algorithms[i].clone(),
            average_rank: avg[i],
        })
        .collect();

    if fr.p_value >= alpha.as_f64() {
        return Ok(CdDiagram {
            chi2: fr.chi2,
            p_value: fr.p_value,
            alpha: alpha.as_f64(),
            gate_passed: false,
            critical_difference: None,
            average_ranks,
            cliques: Vec::new(),
        });
    }

    let cd = nemenyi_cd(table.n_algorithms(), table.n_tasks(), alpha)?;
    let sorted: Vec<f64> = average_ranks.iter().map(|ar| ar.average_rank).collect();
    let names: Vec<&str> = average_ranks
        .iter()
        .map(|ar| ar.algorithm.as_str())
        .collect();
    let cliques = cliques_from_sorted_ranks(&sorted, cd)
        .into_iter()
        .map(|(lo, hi)| names[lo..=hi].iter().map(|s| s.to_string()).collect())
        .collect();

    Ok(CdDiagram {
        chi2: fr.chi2,
        p_value: fr.p_value,
        alpha: alpha.as_f64(),
        gate_passed: true,
        critical_difference: Some(cd),
        average_ranks,
        cliques,
    })
}

/// Maximal contiguous intervals of sorted average ranks whose spread stays
/// within the CD. Intervals contained in another are dropped; an algorithm
/// no interval reaches forms a singleton.
pub fn cliques_from_sorted_ranks(sorted_ranks: &[f64], cd: f64) -> Vec<(usize, usize)> {
    let n = sorted_ranks.len();
    let mut out: Vec<(usize, usize)> = Vec::new();
    let mut j = 0;
    for i in 0..n {
        if j < i {
            j = i;
        }
        while j + 1 < n && sorted_ranks[j + 1] - sorted_ranks[i] <= cd {
            j += 1;
        }
        match out.last() {
            Some(&(_, last_hi)) if last_hi >= j => {} // contained in previous
            _ => out.push((i, j)),
        }
    }
    out
}

/// Parses a scores CSV: header row of algorithm names, one row per task.
/// If the first header cell is empty or "task", the first column carries
/// task names; otherwise tasks are numbered.
pub fn load_scores_csv(path: &Path, higher_is_better: bool) -> Result<RankTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty scores file".into(),
    })?;
    let cells: Vec<&str> = header.split(',').map(str::trim).collect();
    let named_tasks = cells
        .first()
        .is_some_and(|c| c.is_empty() || c.eq_ignore_ascii_case("task"));
    let algorithms: Vec<String> = if named_tasks {
        cells[1..].iter().map(|s| s.to_string()).collect()
    } else {
        cells.iter().map(|s| s.to_string()).collect()
    };
    if algorithms.len() < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "need at least 2 algorithm columns".into(),
        });
    }
    let mut tasks = Vec::new();
    let mut scores = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let (task, values) = if named_tasks {
            (
                fields.first().map(|s| s.to_string()).unwrap_or_default(),
                &fields[1..],
            )
        } else {
            (format!("task{}", tasks.len() + 1), &fields[..])
        };
        if values.len() != algorithms.len() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} scores, got {}", algorithms.len(), values.len()),
            });
        }
        let row: Vec<f64> = values
            .iter()
            .map(|v| {
                v.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("bad score {v:?}"),
                })
            })
            .collect::<Result<_>>()?;
        tasks.push(task);
        scores.push(row);
    }
    RankTable::new(algorithms, tasks, scores, higher_is_better)
}

/// Ranks as CSV, mirroring the input layout.
pub fn ranks_to_csv(table: &RankTable) -> String {
    let mut out = String::from("task");
    for a in &table.algorithms {
        out.push(',');
        out.push_str(a);
    }
    out.push('\n');
    for (t, row) in table.tasks.iter().zip(&table.ranks) {
        out.push_str(t);
        for r in row {
            out.push_str(&format!(",{r}"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn table(scores: Vec<Vec<f64>>, higher: bool) -> RankTable {
        let k = scores[0].len();
        let algorithms = (0..k).map(|i| format!("algo{i}")).collect();
        let tasks = (0..scores.len()).map(|i| format!("task{i}")).collect();
        RankTable::new(algorithms, tasks, scores, higher).unwrap()
    }

    #[test]
    fn rank_row_examples() {
        assert_eq!(rank_row(&[0.9, 0.8, 0.7], true), vec![1.0, 2.0, 3.0]);
        assert_eq!(rank_row(&[0.5, 0.5, 0.5], true), vec![2.0, 2.0, 2.0]);
        assert_eq!(rank_row(&[0.9, 0.9, 0.7], true), vec![1.5, 1.5, 3.0]);
        assert_eq!(rank_row(&[0.1, 0.3, 0.2], false), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn nan_scores_name_the_cell() {
        let err = RankTable::new(
            vec!["a".into(), "b".into()],
            vec!["t1".into()],
            vec![vec![0.5, f64::NAN]],
            true,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t1") && msg.contains('b'), "{msg}");
    }

    #[test]
    fn row_rank_sums_are_conserved() {
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.random_range(2..7);
            // draw from a tiny grid so ties are common
            let row: Vec<f64> = (0..k).map(|_| f64::from(rng.random_range(0..4))).collect();
            let ranks = rank_row(&row, rng.random_bool(0.5));
            let sum: f64 = ranks.iter().sum();
            let want = (k * (k + 1)) as f64 / 2.0;
            assert!((sum - want).abs() < 1e-12);
        }
    }

    #[test]
    fn friedman_all_equal_scores() {
        let t = table(vec![vec![1.0, 1.0, 1.0]; 4], true);
        let fr = friedman(&t).unwrap();
        assert_eq!(fr.chi2, 0.0);
        assert_eq!(fr.p_value, 1.0);
    }

    #[test]
    fn friedman_consistent_ordering_fixture() {
        // ranks always (1,2,3) over 4 tasks → χ² = 8
        let t = table(vec![vec![0.9, 0.8, 0.7]; 4], true);
        let fr = friedman(&t).unwrap();
        assert!((fr.chi2 - 8.0).abs() < 1e-12);
        // df = 2: p = exp(−χ²/2)
        assert!((fr.p_value - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn friedman_matches_textbook_formula_reimplementation() {
        let mut rng = StdRng::seed_from_u64(44);
        for _ in 0..50 {
            let k = rng.random_range(2..6);
            let n = rng.random_range(2..8);
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let t = table(scores, true);
            let fr = friedman(&t).unwrap();

            // independent path: mean-rank form
            // χ² = (12N/(k(k+1)))·Σ(R̄ⱼ − (k+1)/2)²
            let avg = t.average_ranks();
            let kf = k as f64;
            let nf = n as f64;
            let center = (kf + 1.0) / 2.0;
            let want: f64 = 12.0 * nf / (kf * (kf + 1.0))
                * avg.iter().map(|r| (r - center) * (r - center)).sum::<f64>();
            assert!((fr.chi2 - want).abs() < 1e-10, "{} vs {}", fr.chi2, want);
            assert!(fr.chi2 >= 0.0);
            assert!((0.0..=1.0).contains(&fr.p_value));
        }
    }

    #[test]
    fn friedman_invariant_under_row_monotone_transforms() {
        let mut rng = StdRng::seed_from_u64(45);
        let scores: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let base = friedman(&table(scores.clone(), true)).unwrap();
        // per-row strictly increasing warps
        let warped: Vec<Vec<f64>> = scores
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|v| (i as f64 + 1.0) * v.exp() + v.powi(3))
                    .collect()
            })
            .collect();
        let w = friedman(&table(warped, true)).unwrap();
        assert!((base.chi2 - w.chi2).abs() < 1e-12);
    }

    #[test]
    fn exact_permutation_brackets_chi2_approximation() {
        // The permutation null is discrete: at an atom the exact p is only
        // defined up to the convention bracket [P(>obs), P(≥obs)]. The χ²
        // curve must pass within 0.1 of that bracket; for shapes where the
        // approximation is meant to apply (k ≥ 3, N ≥ 3) its midpoint
        // already sits within 0.1.
        let mut rng = StdRng::seed_from_u64(46);
        for _ in 0..16 {
            let k = rng.random_range(2..5usize);
            let n = rng.random_range(2..5);
            let scores: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect())
                .collect();
            let t = table(scores, true);
            let fr = friedman(&t).unwrap();
            let exact = friedman_exact(&t, 10_000_000).unwrap();
            let above = 2.0 * exact.mid_p - exact.p_value; // P(χ² > obs)
            let dist = (above - fr.p_value).max(fr.p_value - exact.p_value).max(0.0);
            assert!(
                dist < 0.1,
                "chi2 p {} vs exact bracket [{above}, {}] (k={k}, n={n})",
                fr.p_value,
                exact.p_value
            );
            if k >= 3 && n >= 3 {
                assert!((fr.p_value - exact.mid_p).abs() < 0.1);
            }
            assert!(exact.p_value >= exact.mid_p);
            assert!((0.0..=1.0).contains(&exact.p_value));
        }
    }

    #[test]
    fn exact_permutation_rejects_oversized_tables() {
        let t = table(vec![vec![0.1, 0.2, 0.3, 0.4, 0.5]; 20], true);
        assert!(friedman_exact_p(&t, 1_000_000).is_err());
    }

    #[test]
    fn nemenyi_cd_hand_values() {
        // q(2) = 1.960: CD = 1.960·√(6/60)
        let cd = nemenyi_cd(2, 10, Alpha::A05).unwrap();
        assert!((cd - 0.6198).abs() < 1e-4);
        // the 5-algorithm / 11-task configuration
        let cd = nemenyi_cd(5, 11, Alpha::A05).unwrap();
        assert!((cd - 1.839).abs() < 1e-3);
    }

    #[test]
    fn nemenyi_cd_decreases_with_n() {
        for k in 2..=10 {
            let mut prev = f64::INFINITY;
            for n in [2, 5, 10, 50, 200] {
                let cd = nemenyi_cd(k, n, Alpha::A05).unwrap();
                assert!(cd < prev);
                prev = cd;
            }
        }
    }

    #[test]
    fn nemenyi_out_of_table_k() {
        assert!(matches!(
            nemenyi_cd(11, 5, Alpha::A05),
            Err(Error::UnsupportedK { k: 11 })
        ));
        assert!(matches!(
            nemenyi_cd(1, 5, Alpha::A10),
            Err(Error::UnsupportedK { k: 1 })
        ));
    }

    #[test]
    fn cliques_two_separated_algorithms() {
        let cliques = cliques_from_sorted_ranks(&[1.0, 3.0], 0.5);
        assert_eq!(cliques, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn cliques_all_within_cd() {
        let cliques = cliques_from_sorted_ranks(&[1.0, 1.5, 2.0], 2.0);
        assert_eq!(cliques, vec![(0, 2)]);
    }

    #[test]
    fn cliques_reference_rank_profile() {
        // five average ranks with CD ≈ 1.839: contiguous-interval rule
        let ranks = [1.55, 2.55, 2.91, 3.55, 4.45];
        let cliques = cliques_from_sorted_ranks(&ranks, 1.839);
        assert_eq!(cliques, vec![(0, 2), (1, 3), (2, 4)]);
    }

    #[test]
    fn cd_diagram_gate_failure_has_no_cliques() {
        let t = table(vec![vec![1.0, 1.0, 1.0]; 4], true);
        let d = cd_diagram_data(&t, Alpha::A05).unwrap();
        assert!(!d.gate_passed);
        assert_eq!(d.p_value, 1.0);
        assert!(d.cliques.is_empty());
        assert!(d.critical_difference.is_none());
    }

    #[test]
    fn cd_diagram_orders_algorithms_by_rank() {
        // algo1 always best, algo0 always worst over 12 tasks
        let scores: Vec<Vec<f64>> = (0..12).map(|_| vec![0.1, 0.9, 0.5]).collect();
        let d = cd_diagram_data(&table(scores, true), Alpha::A05).unwrap();
        assert!(d.gate_passed);
        assert_eq!(d.average_ranks[0].algorithm, "algo1");
        assert_eq!(d.average_ranks[2].algorithm, "algo0");
        assert_eq!(d.average_ranks[0].average_rank, 1.0);
    }

    #[test]
    fn scores_csv_with_and_without_task_column() {
        let dir = tempfile::tempdir().unwrap();
        let with = dir.path().join("with.csv");
        std::fs::write(&with, "task,a,b\nt1,0.9,0.8\nt2,0.7,0.6\n").unwrap();
        let t = load_scores_csv(&with, true).unwrap();
        assert_eq!(t.algorithms, vec!["a", "b"]);
        assert_eq!(t.tasks, vec!["t1", "t2"]);

        let without = dir.path().join("without.csv");
        std::fs::write(&without, "a,b\n0.9,0.8\n0.7,0.6\n").unwrap();
        let t = load_scores_csv(&without, true).unwrap();
        assert_eq!(t.tasks, vec!["task1", "task2"]);
        assert_eq!(t.ranks, vec![vec![1.0, 2.0], vec![1.0, 2.0]]);
    }

    #[test]
    fn scores_csv_bad_cell_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "a,b\n0.9,0.8\n0.7,oops\n").unwrap();
        match load_scores_csv(&p, true) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
