//! Missing-completely-at-random block masks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{FaceError, Result};
use crate::incomplete::Mask;

/// Length of one missing block as a fraction of `J`.
pub const BLOCK_FRACTION: f64 = 0.065;

const MAX_PLACEMENT_TRIES: usize = 10_000;

/// Block length `floor(0.065 J)`.
pub fn block_len(j: usize) -> usize {
    (BLOCK_FRACTION * j as f64).floor() as usize
}

/// Start indices of the missing blocks of each subject: `b` uniform on
/// `{1, 2, 3}` blocks of length [`block_len`], placed uniformly without
/// overlap.
pub fn mcar_blocks(j: usize, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let len = block_len(j);
    if len == 0 || 3 * len >= j {
        return Err(FaceError::InvalidInput(format!(
            "cannot place three blocks of length {len} in {j} grid points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|subject| {
            let b = rng.random_range(1..=3usize);
            for _ in 0..MAX_PLACEMENT_TRIES {
                let mut starts: Vec<usize> = (0..b).map(|_| rng.random_range(0..=j - len)).collect();
                starts.sort_unstable();
                if starts.windows(2).all(|w| w[1] - w[0] >= len) {
                    return Ok(starts);
                }
            }
            Err(FaceError::InvalidInput(format!(
                "could not place {b} non-overlapping blocks for subject {subject}"
            )))
        })
        .collect()
}

/// `J x I` observation mask with MCAR missing blocks.
pub fn mcar_mask(j: usize, n: usize, seed: u64) -> Result<Mask> {
    let blocks = mcar_blocks(j, n, seed)?;
    let len = block_len(j);
    Ok(Mask::from_fn(j, n, |r, c| !blocks[c].iter().any(|&s| (s..s + len).contains(&r))))
}
