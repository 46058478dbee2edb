//! Labeled short-text corpora: keyword filtering, normalization and a seeded
//! synthetic generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::rng;
use crate::zipf::ZipfSampler;

const BULLYING_KEYWORDS: &str = include_str!("../data/keywords_bullying.txt");
const NO_BULLYING_KEYWORDS: &str = include_str!("../data/keywords_no_bullying.txt");
const SPANISH_STOPWORDS: &str = include_str!("../data/stopwords_es.txt");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorpusError {
    #[error("label must be 0 or 1, got {0}")]
    InvalidLabel(i64),
    #[error("record id must not be empty")]
    EmptyId,
    #[error("duplicate id {id:?} at record {record}")]
    DuplicateId { id: String, record: usize },
    #[error("line {line}: {reason}")]
    InvalidKeyword { line: usize, reason: String },
    #[error("line {line}: stop word {word:?} contains whitespace")]
    InvalidStopword { line: usize, word: String },
    #[error("keyword set is empty")]
    EmptyKeywordSet,
    #[error("zipf exponent must be positive and finite, got {0}")]
    InvalidZipfAlpha(f64),
    #[error("filler vocabulary size must be at least 1")]
    EmptyFillerVocabulary,
}

/// Binary class of a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    NoBullying = 0,
    Bullying = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }
}

impl TryFrom<i64> for Label {
    type Error = CorpusError;

    fn try_from(value: i64) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Label::NoBullying),
            1 => Ok(Label::Bullying),
            other => Err(CorpusError::InvalidLabel(other)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// One labeled example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledText {
    pub id: String,
    pub text: String,
    pub label: Label,
}

impl LabeledText {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Label) -> Self {
        LabeledText {
            id: id.into(),
            text: text.into(),
            label,
        }
    }
}

/// Checks that every id is non-empty and unique. `record` in the error is
/// the 1-based position of the offending record.
pub fn validate_ids(corpus: &[LabeledText]) -> Result<(), CorpusError> {
    let mut seen = BTreeSet::new();
    for (i, rec) in corpus.iter().enumerate() {
        if rec.id.is_empty() {
            return Err(CorpusError::EmptyId);
        }
        if !seen.insert(rec.id.as_str()) {
            return Err(CorpusError::DuplicateId {
                id: rec.id.clone(),
                record: i + 1,
            });
        }
    }
    Ok(())
}

/// Which class a keyword set is meant to retrieve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Bullying,
    NoBullying,
}

impl Polarity {
    pub fn label(self) -> Label {
        match self {
            Polarity::Bullying => Label::Bullying,
            Polarity::NoBullying => Label::NoBullying,
        }
    }
}

/// Ordered, duplicate-free list of lowercase keyword phrases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    phrases: Vec<String>,
    polarity: Polarity,
}

impl KeywordSet {
    pub fn new(phrases: Vec<String>, polarity: Polarity) -> Result<Self, CorpusError> {
        let mut seen = BTreeSet::new();
        for (i, phrase) in phrases.iter().enumerate() {
            let line = i + 1;
            if phrase.trim().is_empty() {
                return Err(CorpusError::InvalidKeyword {
                    line,
                    reason: "empty phrase".to_string(),
                });
            }
            if phrase.to_lowercase() != *phrase {
                return Err(CorpusError::InvalidKeyword {
                    line,
                    reason: format!("phrase {phrase:?} is not lowercase"),
                });
            }
            if !seen.insert(phrase.as_str()) {
                return Err(CorpusError::InvalidKeyword {
                    line,
                    reason: format!("duplicate phrase {phrase:?}"),
                });
            }
        }
        Ok(KeywordSet { phrases, polarity })
    }

    /// Parses the keyword file format: one phrase per line, `#` starts a
    /// comment line, blank lines ignored. Phrases are lowercased and their
    /// inner whitespace collapsed; duplicates are rejected with the line
    /// number.
    pub fn parse(text: &str, polarity: Polarity) -> Result<Self, CorpusError> {
        let mut phrases = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let phrase = trimmed
                .to_lowercase()
                .split_whitespace()
                .collect::<Vec<_>>()
                .join(" ");
            if !seen.insert(phrase.clone()) {
                return Err(CorpusError::InvalidKeyword {
                    line: i + 1,
                    reason: format!("duplicate phrase {phrase:?}"),
                });
            }
            phrases.push(phrase);
        }
        KeywordSet::new(phrases, polarity)
    }

    /// Bullying keywords shipped with the crate.
    pub fn default_bullying() -> Self {
        KeywordSet::parse(BULLYING_KEYWORDS, Polarity::Bullying).expect("shipped keyword file")
    }

    /// Harmless-text keywords shipped with the crate.
    pub fn default_no_bullying() -> Self {
        KeywordSet::parse(NO_BULLYING_KEYWORDS, Polarity::NoBullying)
            .expect("shipped keyword file")
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }

    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// Every distinct token appearing in any phrase.
    pub fn tokens(&self) -> BTreeSet<String> {
        self.phrases
            .iter()
            .flat_map(|p| match_tokens(p))
            .collect()
    }
}

/// Text normalization options.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub stopwords: BTreeSet<String>,
    pub fold_accents: bool,
    pub keep_letters_only: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopwords: BTreeSet::new(),
            fold_accents: false,
            keep_letters_only: true,
        }
    }
}

impl PreprocessConfig {
    /// Default options with the shipped Spanish stop-word list.
    pub fn spanish() -> Self {
        PreprocessConfig {
            stopwords: default_stopwords(),
            ..PreprocessConfig::default()
        }
    }

    pub fn with_stopwords(mut self, stopwords: BTreeSet<String>) -> Self {
        self.stopwords = stopwords;
        self
    }
}

/// Parses a stop-word list: one token per line, blank lines and `#`
/// comments skipped, entries lowercased.
pub fn parse_stopwords(text: &str) -> Result<BTreeSet<String>, CorpusError> {
    let mut words = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidStopword {
                line: i + 1,
                word: trimmed.to_string(),
            });
        }
        words.insert(trimmed.to_lowercase());
    }
    Ok(words)
}

/// The shipped Spanish stop-word list.
pub fn default_stopwords() -> BTreeSet<String> {
    parse_stopwords(SPANISH_STOPWORDS).expect("shipped stop-word file")
}

fn is_url(token: &str) -> bool {
    token.starts_with("http") || token.starts_with("www")
}

/// A character kept by the letters-only pass. Uppercase letters without a
/// lowercase mapping (e.g. mathematical capitals) are treated as non-letters.
fn is_kept_letter(c: char) -> bool {
    c.is_alphabetic() && !c.is_uppercase()
}

fn fold_accent(c: char) -> char {
    match c {
        'á' | 'à' | 'â' | 'ä' | 'ã' | 'å' => 'a',
        'é' | 'è' | 'ê' | 'ë' => 'e',
        'í' | 'ì' | 'î' | 'ï' => 'i',
        'ó' | 'ò' | 'ô' | 'ö' | 'õ' => 'o',
        'ú' | 'ù' | 'û' | 'ü' => 'u',
        'ý' | 'ÿ' => 'y',
        'ç' => 'c',
        other => other,
    }
}

/// Normalizes a raw text into tokens.
///
/// Steps, in order:
/// 1. lowercase;
/// 2. drop whitespace-delimited tokens starting with `http` or `www`;
/// 3. drop tokens starting with `@`;
/// 4. replace every non-letter with a space (when `keep_letters_only`);
/// 5. fold accents (when `fold_accents`; `ñ` is kept);
/// 6. split on whitespace, dropping pieces that still start with
///    `http`/`www` (remnants such as `x.http`);
/// 7. drop stop words.
pub fn preprocess(text: &str, config: &PreprocessConfig) -> Vec<String> {
    let lowered = text.to_lowercase();

    let mut kept = String::with_capacity(lowered.len());
    for token in lowered.split_whitespace() {
        if is_url(token) || token.starts_with('@') {
            continue;
        }
        kept.push_str(token);
        kept.push(' ');
    }

    let mut normalized: String = if config.keep_letters_only {
        kept.chars()
            .map(|c| if is_kept_letter(c) { c } else { ' ' })
            .collect()
    } else {
        kept
    };
    if config.fold_accents {
        normalized = normalized.chars().map(fold_accent).collect();
    }

    normalized
        .split_whitespace()
        .filter(|t| !is_url(t))
        .filter(|t| !config.stopwords.contains(*t))
        .map(String::from)
        .collect()
}

/// Tokens used for keyword matching: lowercase, letters only, no stop-word
/// or URL handling.
fn match_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .map(|c| if is_kept_letter(c) { c } else { ' ' })
        .collect::<String>()
        .split_whitespace()
        .map(String::from)
        .collect()
}

fn contains_phrase(haystack: &[String], phrase: &[String]) -> bool {
    !phrase.is_empty() && haystack.windows(phrase.len()).any(|w| w == phrase)
}

/// Keeps the records whose text contains at least one keyword phrase as a
/// contiguous run of tokens (case-insensitive, punctuation ignored).
/// Input order is preserved.
pub fn keyword_filter(
    corpus: &[LabeledText],
    keywords: &KeywordSet,
) -> Result<Vec<LabeledText>, CorpusError> {
    if keywords.is_empty() {
        return Err(CorpusError::EmptyKeywordSet);
    }
    let phrases: Vec<Vec<String>> = keywords.phrases.iter().map(|p| match_tokens(p)).collect();
    Ok(corpus
        .iter()
        .filter(|rec| {
            let tokens = match_tokens(&rec.text);
            phrases.iter().any(|p| contains_phrase(&tokens, p))
        })
        .cloned()
        .collect())
}

const CONSONANTS: &[u8] = b"bcdfgjklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Deterministic pseudo-words made of consonant-vowel syllables, skipping
/// anything in `exclude`.
pub fn filler_vocabulary(size: usize, exclude: &BTreeSet<String>) -> Vec<String> {
    let n_syll = CONSONANTS.len() * VOWELS.len();
    let mut words = Vec::with_capacity(size);
    let mut syllables = 2u32;
    let mut i: usize = 0;
    while words.len() < size {
        let capacity = n_syll.pow(syllables);
        if i >= capacity {
            syllables += 1;
            i = 0;
            continue;
        }
        // Stride through the space so neighbouring ranks don't share prefixes.
        let code = (i * 7919 + 13) % capacity;
        i += 1;
        let mut word = String::with_capacity(2 * syllables as usize);
        let mut c = code;
        for _ in 0..syllables {
            let s = c % n_syll;
            c /= n_syll;
            word.push(CONSONANTS[s / VOWELS.len()] as char);
            word.push(VOWELS[s % VOWELS.len()] as char);
        }
        if !exclude.contains(&word) {
            words.push(word);
        }
    }
    words
}

/// Parameters of [`generate_synthetic_corpus`].
#[derive(Debug, Clone)]
pub struct SyntheticSpec<'a> {
    pub n_bullying: usize,
    pub n_clean: usize,
    pub keywords_pos: &'a KeywordSet,
    pub keywords_neg: &'a KeywordSet,
    pub filler_vocab_size: usize,
    pub zipf_alpha: f64,
    pub seed: u64,
}

/// Filler words a synthetic corpus draws from, in rank order.
pub fn synthetic_filler(spec: &SyntheticSpec<'_>) -> Vec<String> {
    let mut exclude = default_stopwords();
    exclude.extend(spec.keywords_pos.tokens());
    exclude.extend(spec.keywords_neg.tokens());
    filler_vocabulary(spec.filler_vocab_size, &exclude)
}

/// Builds a labeled corpus where each text is one class keyword phrase
/// placed among 3 to 12 filler words drawn from a rank-Zipf distribution.
/// Record order is shuffled and ids are `syn-000001`, `syn-000002`, ...
pub fn generate_synthetic_corpus(spec: &SyntheticSpec<'_>) -> Result<Vec<LabeledText>, CorpusError> {
    if !(spec.zipf_alpha > 0.0 && spec.zipf_alpha.is_finite()) {
        return Err(CorpusError::InvalidZipfAlpha(spec.zipf_alpha));
    }
    if (spec.n_bullying > 0 && spec.keywords_pos.is_empty())
        || (spec.n_clean > 0 && spec.keywords_neg.is_empty())
    {
        return Err(CorpusError::EmptyKeywordSet);
    }
    if spec.n_bullying + spec.n_clean == 0 {
        return Ok(Vec::new());
    }
    if spec.filler_vocab_size == 0 {
        return Err(CorpusError::EmptyFillerVocabulary);
    }

    let filler = synthetic_filler(spec);
    let sampler = ZipfSampler::new(filler.len(), spec.zipf_alpha)
        .map_err(|_| CorpusError::InvalidZipfAlpha(spec.zipf_alpha))?;
    let mut rng = rng::seeded(spec.seed);

    let make = |keywords: &KeywordSet, label: Label, rng: &mut rng::Rng| {
        let n_filler = rng.gen_range(3..=12usize);
        let mut words: Vec<&str> = (0..n_filler)
            .map(|_| filler[sampler.sample(rng)].as_str())
            .collect();
        let phrase = &keywords.phrases[rng.gen_range(0..keywords.len())];
        let at = rng.gen_range(0..=n_filler);
        words.insert(at, phrase.as_str());
        (words.join(" "), label)
    };

    let mut texts = Vec::with_capacity(spec.n_bullying + spec.n_clean);
    for _ in 0..spec.n_bullying {
        texts.push(make(spec.keywords_pos, Label::Bullying, &mut rng));
    }
    for _ in 0..spec.n_clean {
        texts.push(make(spec.keywords_neg, Label::NoBullying, &mut rng));
    }
    texts.shuffle(&mut rng);

    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(i, (text, label))| LabeledText::new(format!("syn-{:06}", i + 1), text, label))
        .collect())
}
