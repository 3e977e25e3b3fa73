//! Fixed-length padded sequences and training samples.

use std::fs;
use std::path::Path;

use crate::math::ordered_sum;
use crate::scalar::Real;
use crate::vocab::{TokenId, Vocabulary, PAD_ID};
use crate::{Error, Result};

/// Exactly `N` token ids; positions at or beyond `true_length` hold the pad id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sequence {
    ids: Vec<TokenId>,
    true_length: usize,
}

impl Sequence {
    pub fn new(ids: Vec<TokenId>, true_length: usize) -> Result<Self> {
        if true_length == 0 || true_length > ids.len() {
            return Err(Error::InvalidSequence(format!(
                "true length {true_length} not in 1..={}",
                ids.len()
            )));
        }
        if ids[true_length..].iter().any(|&t| t != PAD_ID) {
            return Err(Error::InvalidSequence(
                "non-pad token after true length".into(),
            ));
        }
        Ok(Sequence { ids, true_length })
    }

    /// A sequence with no padding (`true_length == N`).
    pub fn full(ids: Vec<TokenId>) -> Result<Self> {
        let n = ids.len();
        Self::new(ids, n)
    }

    /// Pads `tokens` on the right to `len`.
    pub fn padded(tokens: &[TokenId], len: usize) -> Result<Self> {
        if tokens.len() > len {
            return Err(Error::InvalidSequence(format!(
                "{} tokens exceed length {len}",
                tokens.len()
            )));
        }
        let mut ids = tokens.to_vec();
        ids.resize(len, PAD_ID);
        Self::new(ids, tokens.len())
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn true_length(&self) -> usize {
        self.true_length
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A nonempty sample of sequences sharing one length `N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    sequences: Vec<Sequence>,
    seq_len: usize,
}

impl Corpus {
    pub fn new(sequences: Vec<Sequence>) -> Result<Self> {
        let first = sequences.first().ok_or(Error::EmptyCorpus)?;
        let seq_len = first.len();
        if let Some(i) = sequences.iter().position(|s| s.len() != seq_len) {
            return Err(Error::InvalidSequence(format!(
                "sequence {i} has length {} but corpus length is {seq_len}",
                sequences[i].len()
            )));
        }
        Ok(Corpus { sequences, seq_len })
    }

    /// Corpus of unpadded sequences given as raw id vectors.
    pub fn from_ids<I>(seqs: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<TokenId>>,
    {
        Self::new(
            seqs.into_iter()
                .map(Sequence::full)
                .collect::<Result<_>>()?,
        )
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    /// Number of sequences `m`.
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Common padded length `N`.
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn max_token(&self) -> TokenId {
        self.sequences
            .iter()
            .flat_map(|s| s.ids.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// `(1/m) Σ_i h(x_i)`, accumulated in index order.
    pub fn empirical_expectation<T, H>(&self, mut h: H) -> T
    where
        T: Real,
        H: FnMut(&Sequence) -> T,
    {
        let total = ordered_sum(self.sequences.iter().map(&mut h));
        total / T::from_count(self.len())
    }

    /// Corpus file text: one line per sequence, unpadded tokens joined by single spaces.
    pub fn to_text(&self, vocab: &Vocabulary) -> String {
        let mut s = String::new();
        for seq in &self.sequences {
            s.push_str(&vocab.render(&seq.ids[..seq.true_length]));
            s.push('\n');
        }
        s
    }
}

/// Parses corpus text. With `vocab = None` a vocabulary is built from
/// observed tokens with `pad` as id 0; otherwise every token must already be in `vocab`.
pub fn parse_corpus(
    text: &str,
    vocab: Option<Vocabulary>,
    pad: &str,
    len: usize,
) -> Result<(Corpus, Vocabulary)> {
    if len == 0 {
        return Err(Error::InvalidParameter(
            "sequence length N must be >= 1".into(),
        ));
    }
    let fixed = vocab.is_some();
    let mut vocab = match vocab {
        Some(v) => v,
        None => Vocabulary::new(pad)?,
    };
    let mut sequences = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() > len {
            return Err(Error::LineTooLong {
                line: line_no,
                found: toks.len(),
                max: len,
            });
        }
        let mut ids = Vec::with_capacity(len);
        for t in toks {
            if t == vocab.pad_token() {
                return Err(Error::PadInCorpus {
                    token: t.to_owned(),
                    line: line_no,
                });
            }
            let id = if fixed {
                vocab.id(t).ok_or_else(|| Error::UnknownToken {
                    token: t.to_owned(),
                    line: line_no,
                })?
            } else {
                vocab.intern(t)?
            };
            ids.push(id);
        }
        sequences.push(Sequence::padded(&ids, len)?);
    }
    Ok((Corpus::new(sequences)?, vocab))
}

pub fn load_corpus(
    path: &Path,
    vocab: Option<Vocabulary>,
    pad: &str,
    len: usize,
) -> Result<(Corpus, Vocabulary)> {
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, vocab, pad, len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pads_short_lines_and_builds_vocab() {
        let (c, v) = parse_corpus("a a b\nb a\n", None, "⊥", 3).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(v.tokens(), &["⊥", "a", "b"]);
        assert_eq!(c.sequences()[0].ids(), &[1, 1, 2]);
        assert_eq!(c.sequences()[1].ids(), &[2, 1, 0]);
        assert_eq!(c.sequences()[1].true_length(), 2);
    }

    #[test]
    fn empty_file_is_empty_corpus() {
        let e = parse_corpus("", None, "⊥", 3).unwrap_err();
        assert_eq!(e.to_string(), "empty corpus");
        let e = parse_corpus("\n  \n", None, "⊥", 3).unwrap_err();
        assert_eq!(e.to_string(), "empty corpus");
    }

    #[test]
    fn unknown_token_names_token_and_line() {
        let v = Vocabulary::from_tokens("⊥", ["a", "b"]).unwrap();
        let e = parse_corpus("a a a\na b c\n", Some(v), "⊥", 3).unwrap_err();
        match &e {
            Error::UnknownToken { token, line } => {
                assert_eq!(token, "c");
                assert_eq!(*line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(e.to_string().contains("\"c\"") && e.to_string().contains("line 2"));
    }

    #[test]
    fn long_line_reports_line_number() {
        let e = parse_corpus("a\na b c d\n", None, "⊥", 3).unwrap_err();
        assert!(matches!(
            e,
            Error::LineTooLong {
                line: 2,
                found: 4,
                max: 3
            }
        ));
    }

    #[test]
    fn pad_token_inside_line_rejected() {
        assert!(matches!(
            parse_corpus("a ⊥ b\n", None, "⊥", 3),
            Err(Error::PadInCorpus { line: 1, .. })
        ));
    }

    #[test]
    fn empirical_expectation_examples() {
        let c = Corpus::from_ids(vec![vec![1], vec![1], vec![1], vec![2]]).unwrap();
        let e: f64 = c.empirical_expectation(|s| if s.ids()[0] == 2 { 1.0 } else { 0.0 });
        assert_eq!(e, 0.25);
        assert_eq!(c.empirical_expectation(|_| 1.0f64), 1.0);
        assert_eq!(c.empirical_expectation(|_| 0.0f64), 0.0);
    }

    #[test]
    fn sequence_invariants() {
        assert!(Sequence::new(vec![1, 0], 0).is_err());
        assert!(Sequence::new(vec![1, 2], 1).is_err());
        assert!(Sequence::new(vec![1, 0], 1).is_ok());
        assert!(Corpus::new(vec![]).is_err());
        assert!(Corpus::from_ids(vec![vec![1], vec![1, 2]]).is_err());
    }
}
