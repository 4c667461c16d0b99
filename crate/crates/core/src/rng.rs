//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in the crate takes an [`RngStream`]. A stream is
//! fully identified by `(seed, stream_id)`; the ChaCha stream counter keeps
//! different ids on disjoint keystreams, so per-location and per-candidate
//! work can fan out across threads without changing results.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    inner: ChaCha8Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a list of keys into a single stream id.
pub fn derive_stream_id(keys: &[u64]) -> u64 {
    keys.iter().fold(0x6A09_E667_F3BC_C908, |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream under the same seed, keyed by this stream's id and `key`.
    ///
    /// The child does not depend on how many draws the parent has made.
    pub fn substream(&self, key: u64) -> Self {
        Self::new(self.seed, derive_stream_id(&[self.stream_id, key]))
    }

    /// Multi-key variant of [`RngStream::substream`].
    pub fn substream_keyed(&self, keys: &[u64]) -> Self {
        let mut all = Vec::with_capacity(keys.len() + 1);
        all.push(self.stream_id);
        all.extend_from_slice(keys);
        Self::new(self.seed, derive_stream_id(&all))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 3);
        let va: Vec<u64> = (0..32).map(|_| a.random()).collect();
        let vb: Vec<u64> = (0..32).map(|_| b.random()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 3);
        let mut b = RngStream::new(7, 4);
        let va: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_ne!(va, vb);
    }

    #[test]
    fn substream_ignores_parent_position() {
        let parent = RngStream::new(11, 0);
        let mut advanced = parent.clone();
        let _: u64 = advanced.random();
        let mut c1 = parent.substream(5);
        let mut c2 = advanced.substream(5);
        assert_eq!(c1.random::<u64>(), c2.random::<u64>());
    }

    #[test]
    fn streams_look_uncorrelated() {
        let mut a = RngStream::new(1, 0);
        let mut b = RngStream::new(1, 1);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>() - 0.5).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random::<f64>() - 0.5).collect();
        let cov: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // sd of the estimate is 1/12/sqrt(n) ~ 5.9e-4
        assert!(cov.abs() < 3e-3, "cov {cov}");
    }
}
