//! Token-id mapping.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

pub type TokenId = usize;

pub const DEFAULT_PAD: &str = "<pad>";
pub const PAD_ID: TokenId = 0;

/// Ordered set of distinct tokens. The pad token always has id 0; the rest
/// are numbered in first-appearance order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
}

impl Vocabulary {
    pub fn new(pad: &str) -> Result<Self> {
        check_token(pad)?;
        let mut v = Vocabulary {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.push(pad);
        Ok(v)
    }

    /// Builds a vocabulary from `pad` followed by `tokens`; duplicates are an error.
    pub fn from_tokens<I, S>(pad: &str, tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self::new(pad)?;
        for t in tokens {
            let t = t.as_ref();
            check_token(t)?;
            if v.index.contains_key(t) {
                return Err(Error::InvalidVocabulary(format!("duplicate token {t:?}")));
            }
            v.push(t);
        }
        Ok(v)
    }

    /// Returns the id of `token`, adding it if absent.
    pub fn intern(&mut self, token: &str) -> Result<TokenId> {
        if let Some(&id) = self.index.get(token) {
            return Ok(id);
        }
        check_token(token)?;
        Ok(self.push(token))
    }

    fn push(&mut self, token: &str) -> TokenId {
        let id = self.tokens.len();
        self.tokens.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn pad_token(&self) -> &str {
        &self.tokens[PAD_ID]
    }

    pub fn pad_id(&self) -> TokenId {
        PAD_ID
    }

    /// Vocabulary size `n`, pad included.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Renders ids as a space-joined token string, falling back to `#id`.
    pub fn render(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&i| {
                self.token(i)
                    .map(str::to_owned)
                    .unwrap_or_else(|| format!("#{i}"))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line; line number minus one is the id.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for t in &self.tokens {
            s.push_str(t);
            s.push('\n');
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let pad = lines
            .next()
            .ok_or_else(|| Error::InvalidVocabulary("empty vocabulary file".into()))?;
        Self::from_tokens(pad, lines)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

fn check_token(t: &str) -> Result<()> {
    if t.is_empty() || t.chars().any(char::is_whitespace) {
        return Err(Error::InvalidVocabulary(format!(
            "token {t:?} is empty or contains whitespace"
        )));
    }
    Ok(())
}
