//! Counter-based seed derivation.
//!
//! Every random stream in a run is keyed by `(master, stream, index)`, so
//! adding a new stream or a new scenario never shifts the draws of the
//! existing ones. Streams are small constants; indices count episodes,
//! trials or scenario cells.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for item `index` of stream `stream` under `master`.
pub fn derive(master: u64, stream: u64, index: u64) -> u64 {
    mix(mix(mix(master) ^ stream) ^ index)
}

/// Stream keys used by training, calibration and evaluation.
pub mod stream {
    pub const AGENT_INIT: u64 = 1;
    pub const ENV_RESET: u64 = 2;
    pub const EXPLORATION: u64 = 3;
    pub const REPLAY_SAMPLING: u64 = 4;
    pub const CALIBRATION: u64 = 5;
    pub const EVALUATION: u64 = 6;
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of SplitMix64 seeded with 0, as published with the generator.
        assert_eq!(mix(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(mix(0x9E37_79B9_7F4A_7C15), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn derived_seeds_do_not_collide_on_a_grid() {
        let mut seen = HashSet::new();
        for master in 0..4 {
            for stream in 0..8 {
                for index in 0..256 {
                    assert!(seen.insert(derive(master, stream, index)));
                }
            }
        }
    }

    #[test]
    fn derivation_is_order_free() {
        let a = derive(42, stream::ENV_RESET, 7);
        let _ = derive(42, stream::EVALUATION, 0);
        assert_eq!(a, derive(42, stream::ENV_RESET, 7));
        assert_ne!(derive(42, 2, 3), derive(42, 3, 2));
    }
}
