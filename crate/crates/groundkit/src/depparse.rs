//! CoNLL-U ingestion with tree validation, root detection, word-to-subword
//! alignment, and the per-token weight vectors used by weighted fusion.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::heatmap::TokenInfo;

#[derive(Debug, Error)]
pub enum ConlluError {
    #[error("line {line}: expected 10 tab-separated columns, found {columns}")]
    MalformedLine { line: usize, columns: usize },
    #[error("line {line}: token id `{id}` is not the expected sequence number")]
    BadTokenId { line: usize, id: String },
    #[error("line {line}: HEAD column `{value}` is not a number")]
    NonNumericHead { line: usize, value: String },
    #[error("line {line}: head {head} exceeds sentence length {token_count}")]
    HeadOutOfRange {
        line: usize,
        head: usize,
        token_count: usize,
    },
    #[error("sentence starting at line {line} has no root token (no HEAD = 0)")]
    NoRoot { line: usize },
    #[error("line {line}: second root in one sentence (multiple HEAD = 0)")]
    MultipleRoots { line: usize },
    #[error("line {line}: head links form a cycle through this token")]
    CyclicHeads { line: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum AlignmentError {
    #[error("token {token_index} `{token}` does not continue word {word_index} `{word}`")]
    ResidueMismatch {
        token_index: usize,
        token: String,
        word_index: usize,
        word: String,
    },
    #[error("continuation token {token_index} `{token}` has no word in progress")]
    DanglingContinuation { token_index: usize, token: String },
    #[error("word {word_index} `{word}` is only partially covered when tokens end")]
    IncompleteWord { word_index: usize, word: String },
    #[error("{remaining} words starting at {word_index} are not covered by any token")]
    UncoveredWords { word_index: usize, remaining: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("alpha {0} outside [0, 1]")]
    AlphaOutOfRange(f64),
    #[error("root word {root_word} not present in the alignment ({word_count} words)")]
    RootWordMissing { root_word: usize, word_count: usize },
}

/// One word of a dependency parse: surface form, 1-based head index
/// (0 = root) and the relation label on the arc to its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DepToken {
    pub form: String,
    pub head: usize,
    pub relation: String,
}

/// A validated dependency tree: exactly one root, all heads in range,
/// no cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSentence {
    tokens: Vec<DepToken>,
    root: usize,
}

impl ParsedSentence {
    pub fn tokens(&self) -> &[DepToken] {
        &self.tokens
    }

    /// 0-based index of the token whose head is 0.
    pub fn root_index(&self) -> usize {
        self.root
    }

    pub fn root_form(&self) -> &str {
        &self.tokens[self.root].form
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Parses a CoNLL-U document into validated sentences.
///
/// Consumes the ID, FORM, HEAD and DEPREL columns; comment lines are skipped
/// and multiword-range (`4-5`) and empty-node (`5.1`) lines are ignored.
/// Sentences are separated by blank lines.
pub fn parse_conllu(text: &str) -> Result<Vec<ParsedSentence>, ConlluError> {
    let mut sentences = Vec::new();
    let mut block: Vec<(DepToken, usize)> = Vec::new();
    let mut block_start = 0usize;
    let mut expected_id = 1usize;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            if !block.is_empty() {
                sentences.push(validate_tree(std::mem::take(&mut block), block_start)?);
            }
            expected_id = 1;
            continue;
        }
        if raw.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 10 {
            return Err(ConlluError::MalformedLine {
                line,
                columns: cols.len(),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            // multiword range or empty node: not part of the basic tree
            continue;
        }
        let id_num: usize = id.parse().map_err(|_| ConlluError::BadTokenId {
            line,
            id: id.to_string(),
        })?;
        if id_num != expected_id {
            return Err(ConlluError::BadTokenId {
                line,
                id: id.to_string(),
            });
        }
        let head: usize = cols[6].parse().map_err(|_| ConlluError::NonNumericHead {
            line,
            value: cols[6].to_string(),
        })?;
        if block.is_empty() {
            block_start = line;
        }
        block.push((
            DepToken {
                form: cols[1].to_string(),
                head,
                relation: cols[7].to_string(),
            },
            line,
        ));
        expected_id += 1;
    }
    if !block.is_empty() {
        sentences.push(validate_tree(block, block_start)?);
    }
    Ok(sentences)
}

/// Reads and parses a CoNLL-U file.
pub fn parse_conllu_file(path: impl AsRef<Path>) -> Result<Vec<ParsedSentence>, ConlluError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConlluError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_conllu(&text)
}

fn validate_tree(
    block: Vec<(DepToken, usize)>,
    block_start: usize,
) -> Result<ParsedSentence, ConlluError> {
    let n = block.len();
    let mut root = None;
    for (idx, (token, line)) in block.iter().enumerate() {
        if token.head > n {
            return Err(ConlluError::HeadOutOfRange {
                line: *line,
                head: token.head,
                token_count: n,
            });
        }
        if token.head == idx + 1 {
            return Err(ConlluError::CyclicHeads { line: *line });
        }
        if token.head == 0 {
            if root.is_some() {
                return Err(ConlluError::MultipleRoots { line: *line });
            }
            root = Some(idx);
        }
    }
    let root = root.ok_or(ConlluError::NoRoot { line: block_start })?;

    // Walk each head chain; a chain that revisits a node before reaching the
    // root is a cycle. `mark` remembers which walk last touched a node so
    // finished chains are not re-traversed.
    let mut mark = vec![0usize; n];
    for start in 0..n {
        let stamp = start + 1;
        let mut at = start;
        while block[at].0.head != 0 {
            if mark[at] == stamp {
                return Err(ConlluError::CyclicHeads { line: block[at].1 });
            }
            if mark[at] != 0 {
                break; // joins a chain already proven to reach the root
            }
            mark[at] = stamp;
            at = block[at].0.head - 1;
        }
    }

    let tokens = block.into_iter().map(|(t, _)| t).collect();
    Ok(ParsedSentence { tokens, root })
}

/// Where one model token lands: inside a word, or a tokenizer delimiter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenAlignment {
    Word(usize),
    Special,
}

/// Maps every model token to the word it spells, or marks it special.
#[derive(Debug, Clone, PartialEq)]
pub struct SubwordAlignment {
    entries: Vec<TokenAlignment>,
    word_count: usize,
}

impl SubwordAlignment {
    pub fn entries(&self) -> &[TokenAlignment] {
        &self.entries
    }

    pub fn word_count(&self) -> usize {
        self.word_count
    }

    /// Model-token index of the last subword piece of `word`.
    pub fn last_token_of_word(&self, word: usize) -> Option<usize> {
        self.entries
            .iter()
            .rposition(|e| *e == TokenAlignment::Word(word))
    }
}

/// Greedy left-to-right alignment of model tokens onto words.
///
/// Tokens beginning with `continuation_marker` extend the word in progress;
/// other tokens start the next word. Matching is case-insensitive and every
/// word must be fully covered, otherwise the mismatch is reported with both
/// positions.
pub fn align_subwords(
    words: &[&str],
    model_tokens: &[TokenInfo],
    continuation_marker: &str,
) -> Result<SubwordAlignment, AlignmentError> {
    let lowered: Vec<String> = words.iter().map(|w| w.to_lowercase()).collect();
    let mut entries = Vec::with_capacity(model_tokens.len());
    let mut word_index = 0usize; // word currently being assembled (or next to start)
    let mut remaining: &str = ""; // unmatched suffix of that word

    for (token_index, token) in model_tokens.iter().enumerate() {
        if token.special {
            entries.push(TokenAlignment::Special);
            continue;
        }
        let text = token.text.to_lowercase();
        let is_continuation = !continuation_marker.is_empty()
            && text.starts_with(continuation_marker)
            && !remaining.is_empty();
        let piece = if is_continuation {
            &text[continuation_marker.len()..]
        } else if !continuation_marker.is_empty() && text.starts_with(continuation_marker) {
            return Err(AlignmentError::DanglingContinuation {
                token_index,
                token: token.text.clone(),
            });
        } else {
            text.as_str()
        };
        if !is_continuation {
            if !remaining.is_empty() {
                return Err(AlignmentError::ResidueMismatch {
                    token_index,
                    token: token.text.clone(),
                    word_index,
                    word: words[word_index].to_string(),
                });
            }
            word_index = next_word_index(&entries);
            if word_index >= words.len() {
                return Err(AlignmentError::ResidueMismatch {
                    token_index,
                    token: token.text.clone(),
                    word_index,
                    word: String::from("<none>"),
                });
            }
            remaining = &lowered[word_index];
        }
        match remaining.strip_prefix(piece) {
            Some(rest) if !piece.is_empty() => {
                entries.push(TokenAlignment::Word(word_index));
                remaining = rest;
            }
            _ => {
                return Err(AlignmentError::ResidueMismatch {
                    token_index,
                    token: token.text.clone(),
                    word_index,
                    word: words[word_index].to_string(),
                });
            }
        }
    }

    if !remaining.is_empty() {
        return Err(AlignmentError::IncompleteWord {
            word_index,
            word: words[word_index].to_string(),
        });
    }
    let covered = next_word_index(&entries);
    if covered < words.len() {
        return Err(AlignmentError::UncoveredWords {
            word_index: covered,
            remaining: words.len() - covered,
        });
    }
    Ok(SubwordAlignment {
        entries,
        word_count: words.len(),
    })
}

fn next_word_index(entries: &[TokenAlignment]) -> usize {
    entries
        .iter()
        .rev()
        .find_map(|e| match e {
            TokenAlignment::Word(w) => Some(w + 1),
            TokenAlignment::Special => None,
        })
        .unwrap_or(0)
}

/// Per-token fusion weights: 1 up to and including the root word's last
/// subword token, `alpha` afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
    alpha: f64,
    root_token: usize,
    include_special: bool,
}

impl WeightVector {
    /// Wraps precomputed weights without re-deriving them from an alignment.
    pub fn from_raw(
        weights: Vec<f64>,
        alpha: f64,
        root_token: usize,
        include_special: bool,
    ) -> Self {
        Self {
            weights,
            alpha,
            root_token,
            include_special,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Raw model-token index of the root word's last subword piece.
    pub fn root_token(&self) -> usize {
        self.root_token
    }

    pub fn includes_special(&self) -> bool {
        self.include_special
    }
}

/// Builds the weight vector for one query: tokens at or before the root
/// word's last subword keep weight 1, later tokens get `alpha`.
///
/// With `include_special` set, delimiter tokens receive weights by the same
/// positional rule; otherwise they are skipped and carry no weight.
pub fn weight_vector(
    alignment: &SubwordAlignment,
    root_word: usize,
    alpha: f64,
    include_special: bool,
) -> Result<WeightVector, WeightError> {
    if !alpha.is_finite() || !(0.0..=1.0).contains(&alpha) {
        return Err(WeightError::AlphaOutOfRange(alpha));
    }
    let root_token =
        alignment
            .last_token_of_word(root_word)
            .ok_or(WeightError::RootWordMissing {
                root_word,
                word_count: alignment.word_count(),
            })?;
    let mut weights = Vec::new();
    for (i, entry) in alignment.entries().iter().enumerate() {
        let included = match entry {
            TokenAlignment::Word(_) => true,
            TokenAlignment::Special => include_special,
        };
        if included {
            weights.push(if i <= root_token { 1.0 } else { alpha });
        }
    }
    Ok(WeightVector {
        weights,
        alpha,
        root_token,
        include_special,
    })
}
