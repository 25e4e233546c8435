//! Exact enumeration and seeded sampling over the free input cells of a cone.

use rand::Rng;
use rayon::prelude::*;

use crate::engine::{chunk_rng, Cone, Dynamics, Scratch, SAMPLE_CHUNK};
use crate::error::{checked_pow, ensure_cap, Result};
use crate::lattice::Region;

const ENUM_CHUNK: u128 = 4096;

/// Initial states that agree with `base` except on `free`, which ranges over
/// all of `A^free` (exactly) or is drawn i.i.d. uniform (sampled).
pub(crate) struct Ensemble<'a> {
    pub dynamics: &'a Dynamics,
    pub cone: Cone,
    pub base: Vec<u8>,
    pub free: Vec<usize>,
}

impl<'a> Ensemble<'a> {
    /// Only cone inputs accepted by `is_free` are varied; free cells outside the
    /// cone cannot affect any checkpoint.
    pub fn new(
        dynamics: &'a Dynamics,
        checkpoints: &[(u64, &Region)],
        start_clock: i64,
        base: Vec<u8>,
        is_free: impl Fn(usize) -> bool,
    ) -> Self {
        let cone = Cone::new(dynamics, checkpoints, start_clock);
        let free = cone.inputs().iter().copied().filter(|&c| is_free(c)).collect();
        Ensemble {
            dynamics,
            cone,
            base,
            free,
        }
    }

    pub fn alphabet(&self) -> u32 {
        self.dynamics.geometry().alphabet()
    }

    /// Number of initial states enumerated in exact mode.
    pub fn size(&self) -> u128 {
        checked_pow(self.alphabet(), self.free.len())
    }

    fn load(&self, init: &mut [u8], mut index: u128) {
        let a = self.alphabet() as u128;
        for &c in self.free.iter().rev() {
            init[c] = (index % a) as u8;
            index /= a;
        }
    }

    /// Folds `visit(acc, rank, outputs)` over every free assignment, ranked
    /// lexicographically with the first free cell most significant. `merge`
    /// must be associative and commutative for the result to be
    /// schedule-independent (integer counts are).
    pub fn exact<T, I, V, M>(&self, cap: u64, identity: I, visit: V, merge: M) -> Result<T>
    where
        T: Send,
        I: Fn() -> T + Sync + Send,
        V: Fn(&mut T, u128, &[u8]) + Sync + Send,
        M: Fn(T, T) -> T + Sync + Send,
    {
        let total = self.size();
        ensure_cap(total, cap)?;
        let chunks = total.div_ceil(ENUM_CHUNK) as u64;
        let cells = self.dynamics.geometry().cell_count();
        Ok((0..chunks)
            .into_par_iter()
            .map(|j| {
                let mut acc = identity();
                let mut init = self.base.clone();
                let mut scratch = Scratch::new(cells);
                let mut out = Vec::new();
                let start = j as u128 * ENUM_CHUNK;
                for rank in start..(start + ENUM_CHUNK).min(total) {
                    self.load(&mut init, rank);
                    self.cone.run(self.dynamics, &init, &mut scratch, &mut out);
                    visit(&mut acc, rank, &out);
                }
                acc
            })
            .reduce(&identity, &merge))
    }

    /// Number of exact states whose outputs satisfy `pred`.
    pub fn count(&self, cap: u64, pred: impl Fn(&[u8]) -> bool + Sync + Send) -> Result<u128> {
        self.exact(
            cap,
            || 0u128,
            |acc, _, out| {
                if pred(out) {
                    *acc += 1
                }
            },
            |x, y| x + y,
        )
    }

    /// Number of `samples` seeded draws whose outputs satisfy `pred`. Draw `i`
    /// comes from chunk `i / SAMPLE_CHUNK`'s own stream.
    pub fn sample_count(&self, samples: u64, seed: u64, pred: impl Fn(&[u8]) -> bool + Sync + Send) -> u64 {
        let chunks = samples.div_ceil(SAMPLE_CHUNK);
        let cells = self.dynamics.geometry().cell_count();
        let a = self.alphabet();
        (0..chunks)
            .into_par_iter()
            .map(|j| {
                let mut rng = chunk_rng(seed, j);
                let mut init = self.base.clone();
                let mut scratch = Scratch::new(cells);
                let mut out = Vec::new();
                let len = (samples - j * SAMPLE_CHUNK).min(SAMPLE_CHUNK);
                let mut hits = 0u64;
                for _ in 0..len {
                    for &c in &self.free {
                        init[c] = rng.gen_range(0..a) as u8;
                    }
                    self.cone.run(self.dynamics, &init, &mut scratch, &mut out);
                    if pred(&out) {
                        hits += 1;
                    }
                }
                hits
            })
            .sum()
    }
}
