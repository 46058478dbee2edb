//! Frequency distribution, rank-indexed vocabulary and fixed-length encoding.
//!
//! Index 0 is padding, indices `1..=V` are vocabulary tokens in frequency
//! rank order, and `V + 1` stands for any out-of-vocabulary token.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use thiserror::Error;

use crate::corpus::{preprocess, Label, LabeledText, PreprocessConfig};

/// Default fixed sequence length.
pub const DEFAULT_MAX_LEN: usize = 50;

pub const PADDING_INDEX: u32 = 0;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("max_len must be at least 1")]
    ZeroMaxLen,
}

/// Token occurrence counts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: BTreeMap<String, u64>,
}

impl FrequencyTable {
    pub fn get(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total token occurrences.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Entries sorted by count descending, then token ascending.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut entries: Vec<(&str, u64)> = self.iter().collect();
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries
    }
}

impl<S: AsRef<str>> FromIterator<S> for FrequencyTable {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        let mut counts = BTreeMap::new();
        for token in iter {
            *counts.entry(token.as_ref().to_string()).or_insert(0) += 1;
        }
        FrequencyTable { counts }
    }
}

/// Counts every token over a corpus of token sequences.
pub fn build_frequency<S: AsRef<str>>(token_corpus: &[Vec<S>]) -> FrequencyTable {
    token_corpus.iter().flatten().collect()
}

/// Token to index map, with index 1 for the most frequent token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    index_of: BTreeMap<String, u32>,
    tokens_by_index: Vec<String>,
    counts: Vec<u64>,
}

impl Vocabulary {
    /// Number of real tokens (V).
    pub fn len(&self) -> usize {
        self.tokens_by_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens_by_index.is_empty()
    }

    pub fn oov_index(&self) -> u32 {
        self.len() as u32 + 1
    }

    pub fn index(&self, token: &str) -> Option<u32> {
        self.index_of.get(token).copied()
    }

    /// Token at `index`, or `None` for padding, OOV and out-of-range indices.
    pub fn token(&self, index: u32) -> Option<&str> {
        let i = index as usize;
        if i == 0 || i > self.len() {
            return None;
        }
        Some(&self.tokens_by_index[i - 1])
    }

    /// Occurrence count recorded for the token at `index`.
    pub fn count(&self, index: u32) -> Option<u64> {
        let i = index as usize;
        (1..=self.len()).contains(&i).then(|| self.counts[i - 1])
    }

    /// Tokens in index order (index 1 first).
    pub fn tokens(&self) -> &[String] {
        &self.tokens_by_index
    }

    /// Encodes a token sequence into exactly `max_len` indices. Unknown
    /// tokens map to V+1, the tail is padded with 0 and long inputs are
    /// truncated at the end.
    pub fn encode<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Vec<u32> {
        let oov = self.oov_index();
        let mut out: Vec<u32> = tokens
            .iter()
            .take(max_len)
            .map(|t| self.index(t.as_ref()).unwrap_or(oov))
            .collect();
        out.resize(max_len, PADDING_INDEX);
        out
    }

    /// Maps indices back to tokens, skipping padding. OOV indices become
    /// `None`.
    pub fn decode(&self, indices: &[u32]) -> Vec<Option<&str>> {
        indices
            .iter()
            .filter(|&&i| i != PADDING_INDEX)
            .map(|&i| self.token(i))
            .collect()
    }

    /// Serializes as one `token<TAB>index<TAB>count` line per token.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (tok, count)) in self.tokens_by_index.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}", tok, i + 1, count);
        }
        out
    }

    /// Parses the format written by [`Vocabulary::to_tsv`]. Indices must run
    /// 1, 2, 3, ... in file order.
    pub fn from_tsv(text: &str) -> Result<Self, VocabError> {
        let mut vocab = Vocabulary::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| VocabError::Parse { line: line_no, reason };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let token = fields[0];
            if token.is_empty() || token.chars().any(char::is_whitespace) {
                return Err(err(format!("invalid token {token:?}")));
            }
            let index: u32 = fields[1]
                .parse()
                .map_err(|_| err(format!("invalid index {:?}", fields[1])))?;
            let count: u64 = fields[2]
                .parse()
                .map_err(|_| err(format!("invalid count {:?}", fields[2])))?;
            let expected = vocab.len() as u32 + 1;
            if index != expected {
                return Err(err(format!("expected index {expected}, found {index}")));
            }
            if count == 0 {
                return Err(err("count must be at least 1".to_string()));
            }
            if vocab.index_of.insert(token.to_string(), index).is_some() {
                return Err(err(format!("duplicate token {token:?}")));
            }
            vocab.tokens_by_index.push(token.to_string());
            vocab.counts.push(count);
        }
        Ok(vocab)
    }
}

/// Ranks tokens by count (descending, ties lexicographic) and assigns
/// indices 1..=V, keeping the top `max_size` when capped.
pub fn build_vocabulary(freq: &FrequencyTable, max_size: Option<usize>) -> Vocabulary {
    let mut ranked = freq.ranked();
    if let Some(cap) = max_size {
        ranked.truncate(cap);
    }
    let mut vocab = Vocabulary::default();
    for (i, (tok, count)) in ranked.into_iter().enumerate() {
        vocab.index_of.insert(tok.to_string(), i as u32 + 1);
        vocab.tokens_by_index.push(tok.to_string());
        vocab.counts.push(count);
    }
    vocab
}

pub fn encode_sequence<S: AsRef<str>>(
    tokens: &[S],
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<Vec<u32>, VocabError> {
    if max_len == 0 {
        return Err(VocabError::ZeroMaxLen);
    }
    Ok(vocab.encode(tokens, max_len))
}

/// Parallel tweet/label/id vectors.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EncodedDataset {
    pub tweets: Vec<Vec<u32>>,
    pub labels: Vec<Label>,
    pub ids: Vec<String>,
    pub max_len: usize,
}

impl EncodedDataset {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            tweets: indices.iter().map(|&i| self.tweets[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            max_len: self.max_len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u32], Label)> {
        self.tweets.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }
}

/// Preprocesses and encodes every record. Records that normalize to no
/// tokens are kept as all-padding rows.
pub fn encode_dataset(
    corpus: &[LabeledText],
    config: &PreprocessConfig,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<EncodedDataset, VocabError> {
    if max_len == 0 {
        return Err(VocabError::ZeroMaxLen);
    }
    let mut ds = EncodedDataset {
        max_len,
        ..EncodedDataset::default()
    };
    for rec in corpus {
        let tokens = preprocess(&rec.text, config);
        ds.tweets.push(vocab.encode(&tokens, max_len));
        ds.labels.push(rec.label);
        ds.ids.push(rec.id.clone());
    }
    Ok(ds)
}

/// Frequency table over the preprocessed texts of a corpus.
pub fn corpus_frequency(corpus: &[LabeledText], config: &PreprocessConfig) -> FrequencyTable {
    corpus
        .iter()
        .flat_map(|rec| preprocess(&rec.text, config))
        .collect()
}
