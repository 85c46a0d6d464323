use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::asymptotics::Truth;
use crate::data::Dataset;
use crate::error::{Error, Result};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the substream `(seed, a, b)`; distinct triples give unrelated
/// streams.
pub fn substream_seed(seed: u64, a: u64, b: u64) -> u64 {
    splitmix(splitmix(splitmix(seed) ^ a.wrapping_mul(0x2545_f491_4f6c_dd1d)) ^ b)
}

pub fn substream(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(seed, a, b))
}

/// `n` independent observations `(Y, Delta, W)` drawn from `truth`.
pub fn sample_dataset(truth: &Truth, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::usage("sample size must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = Dataset::new(truth.tau(), truth.dim())?;
    for _ in 0..n {
        let r = truth.sample_latent(&mut rng)?;
        d.push(r.y(), r.delta(), &r.w())?;
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_data() {
        let t = Truth::default_fixture();
        let a = sample_dataset(&t, 50, 9).unwrap();
        let b = sample_dataset(&t, 50, 9).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        let c = sample_dataset(&t, 50, 10).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn substreams_differ() {
        assert_ne!(substream_seed(1, 0, 1), substream_seed(1, 1, 0));
        assert_ne!(substream_seed(1, 0, 0), substream_seed(2, 0, 0));
    }
}
