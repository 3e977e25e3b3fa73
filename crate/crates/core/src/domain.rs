//! Enumerable sequence spaces and prefix indexing.

use crate::vocab::TokenId;
use crate::{Error, Result};

/// Upper bound on the number of sequences any exact operation will enumerate.
pub const DEFAULT_ENUMERATION_BUDGET: usize = 2_000_000;

/// All `n^N` sequences of length `N` over `n` tokens, in lexicographic id order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Domain {
    vocab_size: usize,
    len: usize,
    size: usize,
}

impl Domain {
    pub fn new(vocab_size: usize, len: usize, budget: usize) -> Result<Self> {
        if vocab_size == 0 || len == 0 {
            return Err(Error::InvalidParameter(format!(
                "domain needs n >= 1 and N >= 1 (got n={vocab_size}, N={len})"
            )));
        }
        let size = checked_pow(vocab_size, len)
            .filter(|&s| s <= budget)
            .ok_or(Error::BudgetExceeded {
                vocab_size,
                len,
                budget,
            })?;
        Ok(Domain {
            vocab_size,
            len,
            size,
        })
    }

    pub fn with_default_budget(vocab_size: usize, len: usize) -> Result<Self> {
        Self::new(vocab_size, len, DEFAULT_ENUMERATION_BUDGET)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn index_of(&self, x: &[TokenId]) -> Option<usize> {
        if x.len() != self.len {
            return None;
        }
        let mut idx = 0usize;
        for &t in x {
            if t >= self.vocab_size {
                return None;
            }
            idx = idx * self.vocab_size + t;
        }
        Some(idx)
    }

    pub fn sequence_at(&self, mut idx: usize) -> Vec<TokenId> {
        debug_assert!(idx < self.size);
        let mut out = vec![0; self.len];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.vocab_size;
            idx /= self.vocab_size;
        }
        out
    }

    pub fn iter(&self) -> DomainIter {
        DomainIter {
            domain: *self,
            next: 0,
        }
    }
}

pub struct DomainIter {
    domain: Domain,
    next: usize,
}

impl Iterator for DomainIter {
    type Item = Vec<TokenId>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.domain.size {
            return None;
        }
        let s = self.domain.sequence_at(self.next);
        self.next += 1;
        Some(s)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = self.domain.size - self.next;
        (r, Some(r))
    }
}

impl ExactSizeIterator for DomainIter {}

/// Every prefix of length `0..=max_len`, shortest first, lexicographic within
/// a length.
pub fn prefixes(vocab_size: usize, max_len: usize) -> impl Iterator<Item = Vec<TokenId>> {
    (0..=max_len).flat_map(move |len| {
        let count = checked_pow(vocab_size, len).expect("prefix count fits in usize");
        (0..count).map(move |mut idx| {
            let mut out = vec![0; len];
            for slot in out.iter_mut().rev() {
                *slot = idx % vocab_size;
                idx /= vocab_size;
            }
            out
        })
    })
}

/// Dense index over every prefix whose length lies in `min_len..=max_len`.
#[derive(Debug, Clone)]
pub(crate) struct PrefixIndex {
    vocab_size: usize,
    min_len: usize,
    offsets: Vec<usize>,
}

impl PrefixIndex {
    pub(crate) fn new(
        vocab_size: usize,
        min_len: usize,
        max_len: usize,
        budget: usize,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(max_len - min_len + 2);
        let mut total = 0usize;
        offsets.push(0);
        for l in min_len..=max_len {
            let count = checked_pow(vocab_size, l).ok_or(Error::BudgetExceeded {
                vocab_size,
                len: max_len,
                budget,
            })?;
            total =
                total
                    .checked_add(count)
                    .filter(|&t| t <= budget)
                    .ok_or(Error::BudgetExceeded {
                        vocab_size,
                        len: max_len,
                        budget,
                    })?;
            offsets.push(total);
        }
        Ok(PrefixIndex {
            vocab_size,
            min_len,
            offsets,
        })
    }

    pub(crate) fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub(crate) fn index(&self, prefix: &[TokenId]) -> Option<usize> {
        let l = prefix.len().checked_sub(self.min_len)?;
        let base = *self.offsets.get(l)?;
        if l + 1 >= self.offsets.len() {
            return None;
        }
        let mut idx = 0usize;
        for &t in prefix {
            if t >= self.vocab_size {
                return None;
            }
            idx = idx * self.vocab_size + t;
        }
        Some(base + idx)
    }

    /// Every indexed prefix in index order.
    pub(crate) fn prefixes(&self) -> impl Iterator<Item = Vec<TokenId>> + '_ {
        (0..self.offsets.len() - 1).flat_map(move |l| {
            let len = l + self.min_len;
            let count = self.offsets[l + 1] - self.offsets[l];
            let n = self.vocab_size;
            (0..count).map(move |mut idx| {
                let mut out = vec![0; len];
                for slot in out.iter_mut().rev() {
                    *slot = idx % n;
                    idx /= n;
                }
                out
            })
        })
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let mut acc = 1usize;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexicographic_order_and_index_round_trip() {
        let d = Domain::with_default_budget(3, 2).unwrap();
        let all: Vec<_> = d.iter().collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], vec![0, 0]);
        assert_eq!(all[1], vec![0, 1]);
        assert_eq!(all[3], vec![1, 0]);
        for (i, x) in all.iter().enumerate() {
            assert_eq!(d.index_of(x), Some(i));
        }
        assert_eq!(d.index_of(&[3, 0]), None);
        assert_eq!(d.index_of(&[0]), None);
    }

    #[test]
    fn prefixes_by_length() {
        let all: Vec<_> = prefixes(2, 2).collect();
        assert_eq!(
            all,
            vec![
                vec![],
                vec![0],
                vec![1],
                vec![0, 0],
                vec![0, 1],
                vec![1, 0],
                vec![1, 1]
            ]
        );
    }

    #[test]
    fn budget_refused() {
        let e = Domain::new(10, 7, DEFAULT_ENUMERATION_BUDGET).unwrap_err();
        assert!(e.to_string().contains("enumeration budget exceeded"));
        assert!(Domain::new(usize::MAX, 3, usize::MAX).is_err());
    }

    #[test]
    fn prefix_index_is_dense() {
        let p = PrefixIndex::new(2, 0, 2, 100).unwrap();
        assert_eq!(p.total(), 1 + 2 + 4);
        let all: Vec<_> = p.prefixes().collect();
        assert_eq!(all.len(), 7);
        for (i, x) in all.iter().enumerate() {
            assert_eq!(p.index(x), Some(i));
        }
        assert_eq!(p.index(&[0, 0, 0]), None);
        let q = PrefixIndex::new(2, 1, 2, 100).unwrap();
        assert_eq!(q.index(&[]), None);
        assert_eq!(q.index(&[1]), Some(1));
    }
}
