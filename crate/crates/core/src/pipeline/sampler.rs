//! Stratified mini-batch construction: each group's shuffled samples are
//! dealt round-robin across the epoch's batches, so every batch sees every
//! group whenever the group has at least as many samples as there are
//! batches. This keeps the group term of the reweighted loss defined for
//! essentially every batch.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Attribute;

/// One epoch's batches over `0..attributes.len()`.
pub fn stratified_batches(
    attributes: &[Attribute],
    batch_size: usize,
    rng: &mut StdRng,
) -> Vec<Vec<usize>> {
    let n = attributes.len();
    if n == 0 {
        return Vec::new();
    }
    let batch_size = batch_size.max(1);
    let n_batches = n.div_ceil(batch_size);
    let mut by_group: BTreeMap<Attribute, Vec<usize>> = BTreeMap::new();
    for (i, &a) in attributes.iter().enumerate() {
        by_group.entry(a).or_default().push(i);
    }
    let mut batches: Vec<Vec<usize>> = vec![Vec::new(); n_batches];
    for members in by_group.values() {
        let mut members = members.clone();
        members.shuffle(rng);
        let offset = rng.random_range(0..n_batches);
        for (t, idx) in members.into_iter().enumerate() {
            batches[(offset + t) % n_batches].push(idx);
        }
    }
    batches.retain(|b| !b.is_empty());
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn epoch_covers_every_sample_once() {
        let attrs: Vec<u32> = (0..103).map(|i| (i % 3) as u32).collect();
        let mut rng = StdRng::seed_from_u64(5);
        let batches = stratified_batches(&attrs, 16, &mut rng);
        let mut seen: Vec<usize> = batches.iter().flatten().copied().collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn every_batch_contains_every_group() {
        // group sizes comfortably exceed the batch count
        let attrs: Vec<u32> = (0..120)
            .map(|i| if i < 80 { 0 } else { 1 })
            .collect();
        for seed in 0..20 {
            let mut rng = StdRng::seed_from_u64(seed);
            let batches = stratified_batches(&attrs, 8, &mut rng);
            for batch in &batches {
                let has0 = batch.iter().any(|&i| attrs[i] == 0);
                let has1 = batch.iter().any(|&i| attrs[i] == 1);
                assert!(has0 && has1, "seed {seed}: batch missing a group");
            }
        }
    }

    #[test]
    fn batch_sizes_stay_near_nominal() {
        let attrs: Vec<u32> = (0..200).map(|i| (i % 2) as u32).collect();
        let mut rng = StdRng::seed_from_u64(1);
        let batches = stratified_batches(&attrs, 32, &mut rng);
        assert_eq!(batches.len(), 7);
        for b in &batches {
            assert!(b.len() >= 28 && b.len() <= 32, "batch size {}", b.len());
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let attrs: Vec<u32> = (0..50).map(|i| (i % 2) as u32).collect();
        let a = stratified_batches(&attrs, 10, &mut StdRng::seed_from_u64(9));
        let b = stratified_batches(&attrs, 10, &mut StdRng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
