//! CutMix augmentation with soft labels. The batch is paired off at
//! random; each pair swaps a random region (a box for image grids, a
//! contiguous span for flat vectors) and both labels are mixed by the
//! realized kept-area fraction.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};

/// The feature region a pair exchanges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixRegion {
    Span { start: usize, len: usize },
    Box { row: usize, col: usize, height: usize, width: usize },
}

impl MixRegion {
    fn cell_count(&self) -> usize {
        match *self {
            MixRegion::Span { len, .. } => len,
            MixRegion::Box { height, width, .. } => height * width,
        }
    }
}

/// Swaps `region` between two samples and mixes both soft labels by the
/// realized kept fraction λ = 1 − |region|/dim. Returns λ.
pub fn apply_cutmix_pair(
    xa: &mut [f64],
    xb: &mut [f64],
    ta: &mut [f64],
    tb: &mut [f64],
    region: MixRegion,
    image_side: Option<usize>,
) -> Result<f64> {
    let dim = xa.len();
    if xb.len() != dim {
        return Err(Error::Shape("paired samples have different dims".into()));
    }
    match region {
        MixRegion::Span { start, len } => {
            if start + len > dim {
                return Err(Error::Shape("span outside feature vector".into()));
            }
            for j in start..start + len {
                std::mem::swap(&mut xa[j], &mut xb[j]);
            }
        }
        MixRegion::Box {
            row,
            col,
            height,
            width,
        } => {
            let side = image_side
                .ok_or_else(|| Error::InvalidParameter("box region needs image mode".into()))?;
            if row + height > side || col + width > side {
                return Err(Error::Shape("box outside image".into()));
            }
            for r in row..row + height {
                for c in col..col + width {
                    let j = r * side + c;
                    std::mem::swap(&mut xa[j], &mut xb[j]);
                }
            }
        }
    }
    let lambda = 1.0 - region.cell_count() as f64 / dim as f64;
    let old_ta = ta.to_vec();
    for (a, &b) in ta.iter_mut().zip(tb.iter()) {
        *a = lambda * *a + (1.0 - lambda) * b;
    }
    for (b, &a) in tb.iter_mut().zip(&old_ta) {
        *b = lambda * *b + (1.0 - lambda) * a;
    }
    Ok(lambda)
}

/// Draws the region for one pair: area ratio 1 − λ with λ ~ Beta(β, β).
fn draw_region(
    dim: usize,
    image_side: Option<usize>,
    beta: f64,
    rng: &mut StdRng,
) -> Result<MixRegion> {
    let lambda = if (beta - 1.0).abs() < 1e-12 {
        rng.random_range(0.0..1.0)
    } else {
        let b = Beta::new(beta, beta)
            .map_err(|e| Error::InvalidParameter(format!("bad Beta parameter: {e}")))?;
        b.sample(rng)
    };
    match image_side {
        None => {
            let len = ((1.0 - lambda) * dim as f64).round() as usize;
            let len = len.min(dim);
            let start = if len == dim {
                0
            } else {
                rng.random_range(0..=dim - len)
            };
            Ok(MixRegion::Span { start, len })
        }
        Some(side) => {
            // square box of side ≈ H·√(1−λ), clipped at the borders
            let cut = (1.0 - lambda).sqrt();
            let bh = ((side as f64) * cut).round() as usize;
            let bw = bh;
            let bh = bh.min(side);
            let bw = bw.min(side);
            let row = if bh == side { 0 } else { rng.random_range(0..=side - bh) };
            let col = if bw == side { 0 } else { rng.random_range(0..=side - bw) };
            Ok(MixRegion::Box {
                row,
                col,
                height: bh,
                width: bw,
            })
        }
    }
}

/// In-place CutMix over a batch: random disjoint pairing, one region swap
/// per pair. Batches of one (or an odd leftover sample) pass through
/// unchanged.
pub fn cutmix_batch(
    inputs: &mut [Vec<f64>],
    targets: &mut [Vec<f64>],
    image_side: Option<usize>,
    beta: f64,
    rng: &mut StdRng,
) -> Result<()> {
    if beta <= 0.0 || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "cutmix beta must be positive, got {beta}"
        )));
    }
    let n = inputs.len();
    if n != targets.len() {
        return Err(Error::Shape("inputs/targets length mismatch".into()));
    }
    if n < 2 {
        return Ok(());
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for pair in order.chunks_exact(2) {
        let (i, j) = (pair[0], pair[1]);
        let dim = inputs[i].len();
        let region = draw_region(dim, image_side, beta, rng)?;
        // split borrows: i != j by construction
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        let (left_in, right_in) = inputs.split_at_mut(hi);
        let (left_t, right_t) = targets.split_at_mut(hi);
        apply_cutmix_pair(
            &mut left_in[lo],
            &mut right_in[0],
            &mut left_t[lo],
            &mut right_t[0],
            region,
            image_side,
        )?;
    }
    Ok(())
}
