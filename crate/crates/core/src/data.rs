//! Observation types shared by the bundled models.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sparse bag-of-words: `(term index, count)` pairs, sorted by term index,
/// unique, counts positive.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Document {
    terms: Vec<(usize, u32)>,
}

impl Document {
    /// Builds a document from term counts. Zero counts are dropped; a
    /// repeated term index is an error.
    pub fn from_counts<I: IntoIterator<Item = (usize, u32)>>(counts: I) -> Result<Self> {
        let mut terms: Vec<(usize, u32)> = counts.into_iter().filter(|&(_, c)| c > 0).collect();
        terms.sort_unstable_by_key(|&(t, _)| t);
        if terms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Input("duplicate term index in document".into()));
        }
        Ok(Self { terms })
    }

    /// Builds a document from a dense count vector.
    pub fn from_dense(counts: &[u32]) -> Self {
        Self {
            terms: counts.iter().enumerate().filter(|(_, &c)| c > 0).map(|(i, &c)| (i, c)).collect(),
        }
    }

    /// Builds a document from a token list (term indices, repeats allowed).
    pub fn from_tokens(tokens: &[usize]) -> Self {
        let mut sorted = tokens.to_vec();
        sorted.sort_unstable();
        let mut terms: Vec<(usize, u32)> = Vec::new();
        for t in sorted {
            match terms.last_mut() {
                Some((last, c)) if *last == t => *c += 1,
                _ => terms.push((t, 1)),
            }
        }
        Self { terms }
    }

    pub fn terms(&self) -> &[(usize, u32)] {
        &self.terms
    }

    pub fn num_unique(&self) -> usize {
        self.terms.len()
    }

    pub fn total(&self) -> u64 {
        self.terms.iter().map(|&(_, c)| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn count(&self, term: usize) -> u32 {
        self.terms
            .binary_search_by_key(&term, |&(t, _)| t)
            .map(|i| self.terms[i].1)
            .unwrap_or(0)
    }

    /// Largest term index plus one (0 for an empty document).
    pub fn min_vocab(&self) -> usize {
        self.terms.last().map(|&(t, _)| t + 1).unwrap_or(0)
    }

    /// Expands into one term index per token, in term order.
    pub fn tokens(&self) -> Vec<usize> {
        self.terms
            .iter()
            .flat_map(|&(t, c)| std::iter::repeat_n(t, c as usize))
            .collect()
    }

    pub fn to_dense(&self, vocab_size: usize) -> Vec<u32> {
        let mut v = vec![0; vocab_size];
        for &(t, c) in &self.terms {
            v[t] = c;
        }
        v
    }

    /// Remaps term indices through `perm` (`new index = perm[old]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self::from_counts(self.terms.iter().map(|&(t, c)| (perm[t], c))).expect("permutation is injective")
    }
}

/// One binary-classification example: covariates `t` and a label encoded as
/// the indicator pair `(z₁, z₂)`; `positive` means `z = (1, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance<T> {
    pub covariates: Vec<T>,
    pub positive: bool,
}

impl<T: Real> LabeledInstance<T> {
    pub fn new(covariates: Vec<T>, positive: bool) -> Self {
        Self { covariates, positive }
    }

    /// `(z₁, z₂)`.
    pub fn indicator(&self) -> (T, T) {
        if self.positive {
            (T::one(), T::zero())
        } else {
            (T::zero(), T::one())
        }
    }

    pub fn dim(&self) -> usize {
        self.covariates.len()
    }

    /// Same covariates, opposite label.
    pub fn flipped(&self) -> Self {
        Self {
            covariates: self.covariates.clone(),
            positive: !self.positive,
        }
    }
}
