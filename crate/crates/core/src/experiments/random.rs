use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{square, SandpileConfig};
use crate::lattice::LatticePoint;

pub const RANDOM_SQUARE_RADIUS: u64 = 5;
pub const RANDOM_MAX_HEIGHT: u64 = 6;

fn fill(rng: &mut ChaCha8Rng) -> SandpileConfig {
    let b = square(2, RANDOM_SQUARE_RADIUS).expect("positive radius");
    let heights = (0..b.len())
        .map(|_| rng.random_range(0..=RANDOM_MAX_HEIGHT))
        .collect();
    SandpileConfig::from_heights(b, 0, heights).expect("sizes match")
}

/// Heights uniform in 0..=6 on `S_5`, ground 0, fully determined by `seed`.
pub fn random_config(seed: u64) -> SandpileConfig {
    fill(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// A random base and a copy with 1..=8 extra piles of 1..=3 particles
/// dropped on `S_7`, so `a <= b` pointwise.
pub fn random_bumped_pair(seed: u64) -> (SandpileConfig, SandpileConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = fill(&mut rng);
    let mut b = a.clone();
    let reach = RANDOM_SQUARE_RADIUS as i64 + 1;
    for _ in 0..rng.random_range(1..=8) {
        let p = LatticePoint::new(&[
            rng.random_range(-reach..=reach),
            rng.random_range(-reach..=reach),
        ]);
        b.add_at(&p, rng.random_range(1..=3));
    }
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::config_leq;

    #[test]
    fn seeded_and_bounded() {
        let a = random_config(11);
        assert_eq!(a, random_config(11));
        assert_ne!(a, random_config(12));
        assert_eq!(a.bbox().len(), 81);
        assert!(a.heights().iter().all(|&h| h <= RANDOM_MAX_HEIGHT));
        assert_eq!(a.background(), 0);
    }

    #[test]
    fn bumped_pairs_are_ordered() {
        for seed in 0..20 {
            let (a, b) = random_bumped_pair(seed);
            assert!(config_leq(&a, &b).unwrap());
            assert_ne!(a, b);
        }
    }
}
