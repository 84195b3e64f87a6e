use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-epoch permutations keyed by `(seed, epoch)`.
///
/// A permutation of `[0, n)` is built by inserting `k = 0, 1, ...` at a
/// uniform position among the `k + 1` slots. The draws for the first `n`
/// insertions do not depend on how many follow, so the permutation of
/// `[0, n + 1)` with `n` deleted is exactly the permutation of `[0, n)`.
/// Fits on `D` and on `D` plus one appended point are therefore coupled the
/// way the leave-one-out argument for SGD requires.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationStream {
    pub seed: u64,
}

impl PermutationStream {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn permutation(&self, epoch: u64, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(epoch);
        let mut perm = Vec::with_capacity(n);
        for k in 0..n {
            let pos = rng.random_range(0..=k as u64) as usize;
            perm.insert(pos, k);
        }
        perm
    }
}
