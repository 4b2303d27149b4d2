//! Multi-treebank batch sampling, proportional to the square root of each
//! treebank's sentence count.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::conllu::{Sentence, Treebank};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SamplerError {
    #[error("no treebanks given")]
    EmptyInput,
    #[error("treebank {0} has no sentences")]
    ZeroCount(usize),
    #[error("{weights} weights for {treebanks} treebanks")]
    LengthMismatch { weights: usize, treebanks: usize },
}

/// Per-treebank selection probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingWeights(Vec<f64>);

impl SamplingWeights {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sqrt(count_i) / sum_j sqrt(count_j)`.
pub fn treebank_weights(counts: &[usize]) -> Result<SamplingWeights, SamplerError> {
    if counts.is_empty() {
        return Err(SamplerError::EmptyInput);
    }
    if let Some(i) = counts.iter().position(|&c| c == 0) {
        return Err(SamplerError::ZeroCount(i));
    }
    let roots: Vec<f64> = counts.iter().map(|&c| (c as f64).sqrt()).collect();
    let total: f64 = roots.iter().sum();
    Ok(SamplingWeights(roots.into_iter().map(|r| r / total).collect()))
}

/// Position of a sampled sentence: treebank index, sentence index.
pub type SampleIndex = (usize, usize);

/// Draws batch slots independently: a treebank by weight, then a sentence
/// uniformly with replacement.
pub struct BatchSampler {
    rng: ChaCha8Rng,
    choose: WeightedIndex<f64>,
    sizes: Vec<usize>,
}

impl BatchSampler {
    pub fn new(seed: u64, sizes: &[usize], weights: &SamplingWeights) -> Result<Self, SamplerError> {
        if sizes.len() != weights.len() {
            return Err(SamplerError::LengthMismatch {
                weights: weights.len(),
                treebanks: sizes.len(),
            });
        }
        if let Some(i) = sizes.iter().position(|&c| c == 0) {
            return Err(SamplerError::ZeroCount(i));
        }
        let choose = WeightedIndex::new(weights.as_slice()).map_err(|_| SamplerError::EmptyInput)?;
        Ok(BatchSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            choose,
            sizes: sizes.to_vec(),
        })
    }

    pub fn sample(&mut self) -> SampleIndex {
        let tb = self.choose.sample(&mut self.rng);
        let sent = self.rng.gen_range(0..self.sizes[tb]);
        (tb, sent)
    }

    pub fn next_batch(&mut self, batch_size: usize) -> Vec<SampleIndex> {
        (0..batch_size).map(|_| self.sample()).collect()
    }
}

/// Deterministic stream of `n_batches` batches drawn from `treebanks`.
pub fn sample_batches<'a>(
    seed: u64,
    treebanks: &'a [Treebank],
    weights: &SamplingWeights,
    batch_size: usize,
    n_batches: usize,
) -> Result<impl Iterator<Item = Vec<&'a Sentence>> + 'a, SamplerError> {
    let sizes: Vec<usize> = treebanks.iter().map(Treebank::sentence_count).collect();
    let mut sampler = BatchSampler::new(seed, &sizes, weights)?;
    Ok((0..n_batches).map(move |_| {
        sampler
            .next_batch(batch_size)
            .into_iter()
            .map(|(t, s)| &treebanks[t].sentences[s])
            .collect()
    }))
}
