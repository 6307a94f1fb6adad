use log::warn;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::data::apportion;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Epoch-shuffled index sampler.
///
/// Batches are drawn without replacement from a shuffled pass; when the pass
/// cannot fill a batch the order is reshuffled. Requests larger than the
/// dataset fall back to sampling with replacement.
#[derive(Debug, Clone)]
pub struct EpochSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: Rng,
    warned: bool,
}

impl EpochSampler {
    pub fn new(len: usize, seed: u64, tag: u64) -> Self {
        let mut rng = rng::stream(seed, tag);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Self { order, cursor: 0, rng, warned: false }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn next_batch(&mut self, size: usize) -> Result<Vec<usize>> {
        let len = self.order.len();
        if len == 0 {
            return Err(Error::EmptyDataset("batch sampler"));
        }
        if size > len {
            if !self.warned {
                warn!("batch size {size} exceeds dataset size {len}; sampling with replacement");
                self.warned = true;
            }
            return Ok((0..size).map(|_| self.rng.random_range(0..len)).collect());
        }
        if self.cursor + size > len {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let batch = self.order[self.cursor..self.cursor + size].to_vec();
        self.cursor += size;
        Ok(batch)
    }
}

/// Two-stratum sampler that keeps both classes in every batch.
#[derive(Debug, Clone)]
pub struct StratifiedSampler {
    negatives: Vec<usize>,
    positives: Vec<usize>,
    neg: EpochSampler,
    pos: EpochSampler,
}

impl StratifiedSampler {
    /// `is_positive[i]` is the class of item `i`.
    pub fn new(is_positive: &[bool], seed: u64, tag: u64) -> Result<Self> {
        let negatives: Vec<usize> = (0..is_positive.len()).filter(|&i| !is_positive[i]).collect();
        let positives: Vec<usize> = (0..is_positive.len()).filter(|&i| is_positive[i]).collect();
        if negatives.is_empty() {
            return Err(Error::EmptyStratum("negative"));
        }
        if positives.is_empty() {
            return Err(Error::EmptyStratum("positive"));
        }
        Ok(Self {
            neg: EpochSampler::new(negatives.len(), seed, tag ^ 0x4e),
            pos: EpochSampler::new(positives.len(), seed, tag ^ 0x50),
            negatives,
            positives,
        })
    }

    /// Proportional allocation with at least one item per class; `size >= 2`.
    pub fn next_batch(&mut self, size: usize) -> Result<Vec<usize>> {
        if size < 2 {
            return Err(Error::Config(format!("stratified batch size must be >= 2, got {size}")));
        }
        let mut alloc = apportion(size, &[self.negatives.len(), self.positives.len()]);
        if alloc[0] == 0 {
            alloc = vec![1, size - 1];
        } else if alloc[1] == 0 {
            alloc = vec![size - 1, 1];
        }
        let mut out = Vec::with_capacity(size);
        out.extend(self.neg.next_batch(alloc[0])?.into_iter().map(|i| self.negatives[i]));
        out.extend(self.pos.next_batch(alloc[1])?.into_iter().map(|i| self.positives[i]));
        Ok(out)
    }
}
