//! Uniform minibatch draws without replacement.

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// A set of distinct datum indices, stored in ascending order.
///
/// Ascending order fixes the summation order of every gradient accumulated
/// over the set, which makes results bit-reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MinibatchIndexSet {
    indices: Vec<usize>,
    population: usize,
}

impl MinibatchIndexSet {
    /// Validates and sorts an explicit index list drawn from `0..population`.
    pub fn new(mut indices: Vec<usize>, population: usize) -> Result<Self> {
        if indices.is_empty() || indices.len() > population {
            return Err(Error::invalid(format!(
                "minibatch size {} outside 1..={population}",
                indices.len()
            )));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("minibatch indices must be distinct"));
        }
        if let Some(&last) = indices.last() {
            if last >= population {
                return Err(Error::invalid(format!(
                    "index {last} out of range for {population} data"
                )));
            }
        }
        Ok(MinibatchIndexSet {
            indices,
            population,
        })
    }

    /// The whole population `0..population`.
    pub fn full(population: usize) -> Result<Self> {
        Self::new((0..population).collect(), population)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Cardinality `n`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Size `N` of the population the set was drawn from.
    pub fn population(&self) -> usize {
        self.population
    }

    /// `N / n`, the weight that makes a minibatch sum unbiased for the full sum.
    pub fn scale(&self) -> f64 {
        self.population as f64 / self.indices.len() as f64
    }
}

fn check_sizes(population: usize, n: usize) -> Result<()> {
    if n == 0 || n > population {
        return Err(Error::invalid(format!(
            "cannot draw {n} of {population} items without replacement"
        )));
    }
    Ok(())
}

/// Draws `n` distinct indices uniformly from `0..population`.
///
/// Runs a partial Fisher–Yates shuffle over a fresh identity permutation, so
/// every size-`n` subset is equally likely. Chains that draw repeatedly should
/// hold an [`IndexSampler`] instead to reuse the permutation buffer.
pub fn sample_without_replacement(
    population: usize,
    n: usize,
    rng: &mut RngStream,
) -> Result<MinibatchIndexSet> {
    IndexSampler::new(population)?.draw(n, rng)
}

/// Reusable partial Fisher–Yates sampler.
///
/// The buffer always holds a permutation of `0..N`. A partial shuffle of the
/// first `n` slots yields a uniform size-`n` subset from any starting
/// permutation, so the buffer never needs resetting between draws.
#[derive(Debug, Clone)]
pub struct IndexSampler {
    perm: Vec<usize>,
}

impl IndexSampler {
    pub fn new(population: usize) -> Result<Self> {
        if population == 0 {
            return Err(Error::invalid("cannot sample from an empty population"));
        }
        Ok(IndexSampler {
            perm: (0..population).collect(),
        })
    }

    pub fn population(&self) -> usize {
        self.perm.len()
    }

    pub fn draw(&mut self, n: usize, rng: &mut RngStream) -> Result<MinibatchIndexSet> {
        let population = self.perm.len();
        check_sizes(population, n)?;
        if n == population {
            return MinibatchIndexSet::full(population);
        }
        for k in 0..n {
            let j = k + rng.below((population - k) as u64) as usize;
            self.perm.swap(k, j);
        }
        let mut indices = self.perm[..n].to_vec();
        indices.sort_unstable();
        Ok(MinibatchIndexSet {
            indices,
            population,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use std::collections::HashMap;

    fn rng(seed: u64) -> RngStream {
        RngStream::for_chain(seed, 0, Purpose::Minibatch)
    }

    #[test]
    fn full_batch_is_forced() {
        let s = sample_without_replacement(5, 5, &mut rng(1)).unwrap();
        assert_eq!(s.indices(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(sample_without_replacement(5, 0, &mut rng(1)).is_err());
        assert!(sample_without_replacement(5, 6, &mut rng(1)).is_err());
        assert!(MinibatchIndexSet::new(vec![1, 1], 4).is_err());
        assert!(MinibatchIndexSet::new(vec![4], 4).is_err());
    }

    #[test]
    fn cardinality_and_range() {
        let s = sample_without_replacement(1000, 10, &mut rng(3)).unwrap();
        assert_eq!(s.len(), 10);
        assert!(s.indices().iter().all(|&i| i < 1000));
        assert!(s.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn subsets_of_four_choose_two_are_uniform() {
        // Oracle: the C(4,2) = 6 subsets are equally likely.
        let draws = 60_000;
        let mut sampler = IndexSampler::new(4).unwrap();
        let mut r = rng(11);
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for _ in 0..draws {
            let s = sampler.draw(2, &mut r).unwrap();
            *counts.entry(s.indices().to_vec()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        let p = 1.0 / 6.0;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        for (subset, c) in counts {
            let dev = (c as f64 - draws as f64 * p).abs();
            assert!(dev < 3.0 * sigma, "{subset:?}: {c}");
        }
    }

    #[test]
    fn same_stream_same_draws() {
        let mut a = IndexSampler::new(100).unwrap();
        let mut b = IndexSampler::new(100).unwrap();
        let (mut ra, mut rb) = (rng(5), rng(5));
        for _ in 0..50 {
            assert_eq!(a.draw(7, &mut ra).unwrap(), b.draw(7, &mut rb).unwrap());
        }
    }
}
