//! Deterministic ensemble reduction.
//!
//! Paths are grouped into fixed chunks of consecutive indices. Each chunk is
//! folded sequentially in ascending index order, and chunk results are merged
//! in ascending chunk order, so the result never depends on the worker count.

use crate::error::{Result, SpdeError};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CHUNK: u64 = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ensemble {
    pub seed: u64,
    pub paths: u64,
    #[serde(default = "default_chunk")]
    pub chunk: u64,
}

fn default_chunk() -> u64 {
    DEFAULT_CHUNK
}

impl Ensemble {
    pub fn new(seed: u64, paths: u64) -> Self {
        Ensemble {
            seed,
            paths,
            chunk: DEFAULT_CHUNK,
        }
    }

    fn chunks(&self) -> Vec<(u64, u64)> {
        let chunk = self.chunk.max(1);
        let mut out = Vec::new();
        let mut lo = 0;
        while lo < self.paths {
            let hi = (lo + chunk).min(self.paths);
            out.push((lo, hi));
            lo = hi;
        }
        out
    }

    /// Folds `fold(acc, path_index)` over all paths and merges chunk results.
    pub fn try_map_reduce<A, I, F, M>(&self, init: I, fold: F, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, u64) -> Result<()> + Sync + Send,
        M: Fn(&mut A, A),
    {
        if self.paths == 0 {
            return Err(SpdeError::EmptyEnsemble);
        }
        let chunks = self.chunks();
        let run = |&(lo, hi): &(u64, u64)| -> Result<A> {
            let mut acc = init();
            for i in lo..hi {
                fold(&mut acc, i)?;
            }
            Ok(acc)
        };
        #[cfg(feature = "parallel")]
        let parts: Vec<Result<A>> = {
            use rayon::prelude::*;
            chunks.par_iter().map(run).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let parts: Vec<Result<A>> = chunks.iter().map(run).collect();
        let mut iter = parts.into_iter();
        let mut total = iter.next().expect("non-empty")?;
        for p in iter {
            merge(&mut total, p?);
        }
        Ok(total)
    }

    pub fn map_reduce<A, I, F, M>(&self, init: I, fold: F, merge: M) -> Result<A>
    where
        A: Send,
        I: Fn() -> A + Sync + Send,
        F: Fn(&mut A, u64) + Sync + Send,
        M: Fn(&mut A, A),
    {
        self.try_map_reduce(
            init,
            |a, i| {
                fold(a, i);
                Ok(())
            },
            merge,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_fixed() {
        let e = Ensemble {
            seed: 0,
            paths: 1000,
            chunk: 7,
        };
        let v = e.map_reduce(Vec::new, |a: &mut Vec<u64>, i| a.push(i), |a, b| a.extend(b)).unwrap();
        assert_eq!(v, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn empty_is_error() {
        let e = Ensemble::new(0, 0);
        assert!(e.map_reduce(|| 0u64, |_, _| {}, |_, _| {}).is_err());
    }
}
