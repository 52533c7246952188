//! Seedable, splittable random streams.
//!
//! The generator is xoshiro256++ seeded through SplitMix64
//! (`Xoshiro256PlusPlus::seed_from_u64`). Each stream carries a 64-bit key;
//! the key of child `i` is `mix64(key * K1 ^ (i + K2))`, where `mix64` is the
//! SplitMix64 finalizer, so children depend only on the parent's key and
//! never on how many values the parent has produced.
//!
//! Variates:
//! * uniform `[0, 1)`: top 53 bits of `next_u64`, times `2^-53`;
//! * standard normal: polar Box–Muller, both variates of an accepted pair are
//!   used (the second one is returned by the following call);
//! * bounded integers: Lemire's multiply-and-reject method;
//! * permutations: Fisher–Yates from the identity, swapping position `i`
//!   with a uniform index in `0..=i` for `i = n-1, ..., 1`.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};

const CHILD_MUL: u64 = 0xD1B5_4A32_D192_ED03;
const CHILD_ADD: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the simulated null law that accompanies a run with root `seed`.
/// Salted so that it never coincides with the root stream, also for seed 0
/// (where `mix64` has a fixed point).
pub fn null_seed(seed: u64) -> u64 {
    mix64(seed ^ NULL_SALT)
}

const NULL_SALT: u64 = 0x6A09_E667_F3BC_C909;

/// Deterministic random stream identified by a seed and a substream path.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    seed: u64,
    path: Vec<u64>,
    gen: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::from_key(seed, seed, Vec::new())
    }

    fn from_key(key: u64, seed: u64, path: Vec<u64>) -> Self {
        Self {
            key,
            seed,
            path,
            gen: Xoshiro256PlusPlus::seed_from_u64(key),
            spare_normal: None,
        }
    }

    /// Child stream `index`; depends only on `(seed, path, index)`.
    pub fn substream(&self, index: u64) -> Self {
        let key = mix64(self.key.wrapping_mul(CHILD_MUL) ^ index.wrapping_add(CHILD_ADD));
        let mut path = self.path.clone();
        path.push(index);
        Self::from_key(key, self.seed, path)
    }

    /// Convenience for a nested path of substreams.
    pub fn descend(&self, path: &[u64]) -> Self {
        path.iter().fold(self.clone(), |s, &i| s.substream(i))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Substream indices leading from the root stream to this one.
    pub fn path(&self) -> &[u64] {
        &self.path
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.gen.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[a, b)`.
    pub fn uniform(&mut self, a: f64, b: f64) -> Result<f64> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Input(format!("uniform bounds need a < b, got [{a}, {b})")));
        }
        let x = a + (b - a) * self.next_f64();
        // rounding can land exactly on b for wide intervals
        Ok(if x < b { x } else { b.next_down() })
    }

    /// Standard normal variate (polar Box–Muller).
    pub fn std_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.next_f64() - 1.0;
            let v = 2.0 * self.next_f64() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let factor = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * factor);
                return u * factor;
            }
        }
    }

    pub fn fill_std_normal(&mut self, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = self.std_normal());
    }

    /// Uniform integer in `0..bound`; `bound` must be positive.
    #[inline]
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let mut m = u128::from(self.next_u64()) * u128::from(bound);
        if (m as u64) < bound {
            let threshold = bound.wrapping_neg() % bound;
            while (m as u64) < threshold {
                m = u128::from(self.next_u64()) * u128::from(bound);
            }
        }
        (m >> 64) as u64
    }

    /// Uniformly random permutation of `0..n`.
    pub fn random_permutation(&mut self, n: usize) -> Result<Vec<usize>> {
        if n == 0 {
            return Err(Error::Input("permutation size must be at least 1".into()));
        }
        let mut perm = Vec::with_capacity(n);
        self.permutation_into(n, &mut perm);
        Ok(perm)
    }

    /// Writes a uniformly random permutation of `0..n` into `buf`.
    pub fn permutation_into(&mut self, n: usize, buf: &mut Vec<usize>) {
        buf.clear();
        buf.extend(0..n);
        for i in (1..n).rev() {
            let j = self.below(i as u64 + 1) as usize;
            buf.swap(i, j);
        }
    }
}
