//! Per-state maximizer sets and the inertia update shared by BRPI and the learners.
//!
//! A set of deterministic single-agent policies that is a Cartesian product over
//! states is stored as one bit mask per state (bit `p` = action position `p`).

use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GreedySet {
    masks: Vec<u64>,
}

impl GreedySet {
    pub fn from_masks(masks: Vec<u64>) -> Self {
        debug_assert!(masks.iter().all(|&m| m != 0));
        Self { masks }
    }

    /// `{a : v(s,a) ≥ max_b v(s,b) − tol}` per state; `values[s]` lists the action values at `s`.
    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a [f64]>, tol: f64) -> Self {
        let masks = values
            .into_iter()
            .map(|row| {
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let cut = max - tol;
                row.iter().enumerate().filter(|(_, &v)| v >= cut).fold(0u64, |m, (p, _)| m | (1 << p))
            })
            .collect();
        Self { masks }
    }

    /// Every policy over the given per-state action counts.
    pub fn full(counts: &[usize]) -> Self {
        Self { masks: counts.iter().map(|&k| if k == 64 { u64::MAX } else { (1u64 << k) - 1 }).collect() }
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn allows(&self, s: usize, pos: usize) -> bool {
        self.masks[s] >> pos & 1 == 1
    }

    pub fn contains(&self, policy: &[usize]) -> bool {
        policy.iter().zip(&self.masks).all(|(&p, &m)| m >> p & 1 == 1)
    }

    /// Number of maximizing actions at each state.
    pub fn counts(&self) -> Vec<u32> {
        self.masks.iter().map(|m| m.count_ones()).collect()
    }

    /// Size of the product set (as a float; it can be astronomically large).
    pub fn size(&self) -> f64 {
        self.masks.iter().map(|m| m.count_ones() as f64).product()
    }

    /// Uniform draw from the set: each state's action uniformly from its mask.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.masks
            .iter()
            .map(|&m| {
                let k = rng.gen_range(0..m.count_ones());
                nth_bit(m, k)
            })
            .collect()
    }
}

fn nth_bit(mut m: u64, k: u32) -> usize {
    for _ in 0..k {
        m &= m - 1;
    }
    m.trailing_zeros() as usize
}

/// Keep `current` if it lies in `set`; otherwise keep it with probability `lambda` and
/// jump to a uniform element of `set` with probability `1 − lambda`.
///
/// No randomness is consumed when `current` is already in the set.
pub fn inertia_update<R: Rng + ?Sized>(current: &[usize], set: &GreedySet, lambda: f64, rng: &mut R) -> Vec<usize> {
    if set.contains(current) {
        return current.to_vec();
    }
    if rng.gen::<f64>() < lambda {
        current.to_vec()
    } else {
        set.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tolerance_is_inclusive() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0, 0.5, 0.75], vec![2.0]];
        let set = GreedySet::from_values(rows.iter().map(Vec::as_slice), 0.25);
        assert_eq!(set.masks(), &[0b101, 0b1]);
        assert_eq!(set.size(), 2.0);
        assert!(set.contains(&[2, 0]));
        assert!(!set.contains(&[1, 0]));
    }

    #[test]
    fn sampling_is_uniform_over_the_product() {
        let set = GreedySet::from_masks(vec![0b1011, 0b110]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut hits = std::collections::HashMap::new();
        let n = 60_000;
        for _ in 0..n {
            *hits.entry(set.sample(&mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(hits.len(), 6);
        let p = 1.0 / 6.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        for (k, &c) in &hits {
            assert!(set.contains(k));
            assert!((c as f64 / n as f64 - p).abs() < 4.0 * se);
        }
    }

    #[test]
    fn inertia_switch_frequency() {
        let set = GreedySet::from_masks(vec![0b10]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let lambda = 0.3;
        let switched = (0..n).filter(|_| inertia_update(&[0], &set, lambda, &mut rng) == [1]).count();
        let p = switched as f64 / n as f64;
        let se = (0.7f64 * 0.3 / n as f64).sqrt();
        assert!((p - 0.7).abs() < 3.0 * se, "p = {p}");
    }
}
