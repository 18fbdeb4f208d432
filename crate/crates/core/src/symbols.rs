//! Special symbols and the per-document token vocabulary.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Document;

/// Index into a [`Vocab`].
pub type TokenId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymbolError {
    #[error("special symbol `{0}` is used for two roles")]
    Ambiguous(String),
    #[error("special symbol `{0}` is empty or contains whitespace")]
    Malformed(String),
    #[error("document `{doc_key}` token {position} `{token}` collides with a special symbol")]
    Collision { doc_key: String, position: usize, token: String },
    #[error("cluster family size must be at least 1")]
    NoClusters,
}

/// Surface forms of every special symbol used by the codecs.
///
/// Cluster integers are spelled in canonical decimal, one token per integer.
/// Per-cluster mention ends are `{cluster_end_prefix}{l}{cluster_end_suffix}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SymbolTable {
    pub mention_start: String,
    pub mention_end: String,
    pub separator: String,
    pub copy: String,
    pub new_cluster: String,
    pub seq_start: String,
    pub seq_end: String,
    pub sentence_start: String,
    pub sentence_end: String,
    pub cluster_end_prefix: String,
    pub cluster_end_suffix: String,
    /// Size of the `</m_l>` family and of the integer lexicon.
    pub max_clusters: usize,
}

impl Default for SymbolTable {
    fn default() -> Self {
        SymbolTable {
            mention_start: "<m>".into(),
            mention_end: "</m>".into(),
            separator: "|".into(),
            copy: "<c>".into(),
            new_cluster: "<new>".into(),
            seq_start: "<s>".into(),
            seq_end: "</s>".into(),
            sentence_start: "<sentence>".into(),
            sentence_end: "</sentence>".into(),
            cluster_end_prefix: "</m_".into(),
            cluster_end_suffix: ">".into(),
            max_clusters: 256,
        }
    }
}

impl SymbolTable {
    pub fn with_max_clusters(mut self, max_clusters: usize) -> Self {
        self.max_clusters = max_clusters;
        self
    }

    fn fixed(&self) -> [&str; 9] {
        [
            &self.mention_start,
            &self.mention_end,
            &self.separator,
            &self.copy,
            &self.new_cluster,
            &self.seq_start,
            &self.seq_end,
            &self.sentence_start,
            &self.sentence_end,
        ]
    }

    pub fn cluster_end(&self, label: usize) -> String {
        format!("{}{}{}", self.cluster_end_prefix, label, self.cluster_end_suffix)
    }

    /// Label of a `</m_l>` token, for any `l` (including ones beyond the family).
    pub fn parse_cluster_end(&self, token: &str) -> Option<usize> {
        let digits = token
            .strip_prefix(self.cluster_end_prefix.as_str())?
            .strip_suffix(self.cluster_end_suffix.as_str())?;
        parse_decimal(digits)
    }

    pub fn integer(&self, label: usize) -> String {
        label.to_string()
    }

    /// Value of a canonical decimal integer token.
    pub fn parse_integer(&self, token: &str) -> Option<usize> {
        parse_decimal(token)
    }

    /// True for fixed specials and any `</m_l>`-shaped token.
    pub fn is_special(&self, token: &str) -> bool {
        self.fixed().contains(&token) || self.parse_cluster_end(token).is_some()
    }

    pub fn check(&self) -> Result<(), SymbolError> {
        if self.max_clusters == 0 {
            return Err(SymbolError::NoClusters);
        }
        let fixed = self.fixed();
        for (i, a) in fixed.iter().enumerate() {
            if a.is_empty() || a.chars().any(char::is_whitespace) {
                return Err(SymbolError::Malformed(a.to_string()));
            }
            if fixed[i + 1..].contains(a) || self.parse_cluster_end(a).is_some() || parse_decimal(a).is_some() {
                return Err(SymbolError::Ambiguous(a.to_string()));
            }
        }
        if self.cluster_end_prefix.is_empty() || self.parse_integer(&self.cluster_end(1)).is_some() {
            return Err(SymbolError::Malformed(self.cluster_end(1)));
        }
        Ok(())
    }

    /// Rejects documents containing any special symbol as a plain token.
    pub fn check_document(&self, doc: &Document) -> Result<(), SymbolError> {
        for (i, t) in doc.tokens.iter().enumerate() {
            if self.is_special(t) {
                return Err(SymbolError::Collision {
                    doc_key: doc.doc_key.clone(),
                    position: i + 1,
                    token: t.clone(),
                });
            }
        }
        Ok(())
    }
}

fn parse_decimal(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) || (s.len() > 1 && s.starts_with('0')) {
        return None;
    }
    s.parse().ok()
}

/// Ids of the fixed special symbols inside a [`Vocab`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub mention_start: TokenId,
    pub mention_end: TokenId,
    pub separator: TokenId,
    pub copy: TokenId,
    pub new_cluster: TokenId,
    pub seq_start: TokenId,
    pub seq_end: TokenId,
    pub sentence_start: TokenId,
    pub sentence_end: TokenId,
}

/// Token inventory seen by a scorer: specials, integers `1..=C`, the
/// `</m_l>` family, then document tokens. A document token that spells an
/// integer shares that integer's id.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    pub special: SpecialIds,
    integer_base: TokenId,
    cluster_end_base: TokenId,
    max_clusters: usize,
}

impl Vocab {
    pub fn new(symbols: &SymbolTable) -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
            special: SpecialIds {
                mention_start: 0,
                mention_end: 0,
                separator: 0,
                copy: 0,
                new_cluster: 0,
                seq_start: 0,
                seq_end: 0,
                sentence_start: 0,
                sentence_end: 0,
            },
            integer_base: 0,
            cluster_end_base: 0,
            max_clusters: symbols.max_clusters,
        };
        v.special = SpecialIds {
            seq_start: v.intern(&symbols.seq_start),
            seq_end: v.intern(&symbols.seq_end),
            mention_start: v.intern(&symbols.mention_start),
            mention_end: v.intern(&symbols.mention_end),
            separator: v.intern(&symbols.separator),
            copy: v.intern(&symbols.copy),
            new_cluster: v.intern(&symbols.new_cluster),
            sentence_start: v.intern(&symbols.sentence_start),
            sentence_end: v.intern(&symbols.sentence_end),
        };
        v.integer_base = v.tokens.len() as TokenId;
        for l in 1..=symbols.max_clusters {
            v.intern(&symbols.integer(l));
        }
        v.cluster_end_base = v.tokens.len() as TokenId;
        for l in 1..=symbols.max_clusters {
            v.intern(&symbols.cluster_end(l));
        }
        v
    }

    pub fn for_document(symbols: &SymbolTable, doc: &Document) -> Self {
        let mut v = Vocab::new(symbols);
        v.extend(doc.tokens.iter().map(String::as_str));
        v
    }

    pub fn extend<'a>(&mut self, tokens: impl IntoIterator<Item = &'a str>) {
        for t in tokens {
            self.intern(t);
        }
    }

    fn intern(&mut self, token: &str) -> TokenId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn max_clusters(&self) -> usize {
        self.max_clusters
    }

    /// Id of integer `label` (1-based, at most `max_clusters`).
    pub fn integer(&self, label: usize) -> TokenId {
        debug_assert!(label >= 1 && label <= self.max_clusters);
        self.integer_base + (label as TokenId - 1)
    }

    pub fn integer_value(&self, id: TokenId) -> Option<usize> {
        let k = id.checked_sub(self.integer_base)? as usize;
        (k < self.max_clusters).then_some(k + 1)
    }

    pub fn cluster_end(&self, label: usize) -> TokenId {
        debug_assert!(label >= 1 && label <= self.max_clusters);
        self.cluster_end_base + (label as TokenId - 1)
    }

    pub fn cluster_end_value(&self, id: TokenId) -> Option<usize> {
        let k = id.checked_sub(self.cluster_end_base)? as usize;
        (k < self.max_clusters).then_some(k + 1)
    }

    pub fn ids_of<'a>(&self, tokens: impl IntoIterator<Item = &'a str>) -> Option<Vec<TokenId>> {
        tokens.into_iter().map(|t| self.id(t)).collect()
    }

    pub fn strings(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&i| self.token(i).to_string()).collect()
    }
}
