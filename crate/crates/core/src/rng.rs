//! Seeded, splittable random streams.
//!
//! A run is driven by one `u64` seed. Work is cut into partitions and each
//! partition draws from its own ChaCha20 stream (`set_stream(k)`), so results
//! depend only on the seed and the partition count, not on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Partition count used by the sampled estimators unless told otherwise.
pub const DEFAULT_PARTITIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn substream(&self, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}

/// Sizes of `partitions` contiguous chunks covering `total` items.
pub fn partition_sizes(total: usize, partitions: usize) -> Vec<usize> {
    let partitions = partitions.max(1);
    let base = total / partitions;
    let extra = total % partitions;
    (0..partitions)
        .map(|k| base + usize::from(k < extra))
        .collect()
}
