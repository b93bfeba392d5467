//! Seed derivation.
//!
//! Every stochastic component (initialization, batch order, bootstrap
//! resampling, dropout, synthetic draws) gets its own stream derived from a
//! single root seed, so adding or removing one component never perturbs
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    /// Child seed for a named component and an index within it.
    pub fn derive(self, component: &str, index: u64) -> RngSeed {
        let mut h = splitmix64(self.0 ^ 0x5EED_0FD1_u64);
        for b in component.bytes() {
            h = splitmix64(h ^ u64::from(b));
        }
        RngSeed(splitmix64(h ^ splitmix64(index)))
    }

    pub fn rng(self) -> Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_seeds_are_stable_and_distinct() {
        let root = RngSeed(42);
        assert_eq!(root.derive("ae-init", 8), root.derive("ae-init", 8));
        assert_ne!(root.derive("ae-init", 8), root.derive("ae-init", 16));
        assert_ne!(root.derive("ae-init", 8), root.derive("forest", 8));
        assert_ne!(root.derive("ae-init", 8), RngSeed(43).derive("ae-init", 8));
    }

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = (0..5)
            .map(|_| 0)
            .scan(RngSeed(7).rng(), |r, _: u64| Some(r.random()))
            .collect();
        let b: Vec<u64> = (0..5)
            .map(|_| 0)
            .scan(RngSeed(7).rng(), |r, _: u64| Some(r.random()))
            .collect();
        assert_eq!(a, b);
    }
}
