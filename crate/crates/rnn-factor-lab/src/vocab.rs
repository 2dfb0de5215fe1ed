//! Vocabulary construction and token encoding.
//!
//! Two reserved ids: `UNK = 0` catches every token that did not make the
//! frequency cut, `EOS = 1` is appended after every corpus line. Real tokens
//! get dense ids from 2 upward, ordered by descending frequency with
//! lexicographic tie-break, so a vocabulary is a pure function of
//! `(corpus bytes, mode, max_size)`.

use std::collections::HashMap;

use serde::Deserialize;

use crate::{LabError, Result};

pub const UNK_ID: usize = 0;
pub const EOS_ID: usize = 1;
pub const UNK_TOKEN: &str = "<unk>";
pub const EOS_TOKEN: &str = "<eos>";

/// How corpus lines are split into tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    /// Split on whitespace.
    Word,
    /// One token per Unicode scalar value.
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

fn tokenize_line(line: &str, mode: TokenMode) -> Vec<String> {
    match mode {
        TokenMode::Word => line.split_whitespace().map(str::to_string).collect(),
        TokenMode::Char => line.chars().map(String::from).collect(),
    }
}

impl Vocabulary {
    /// Builds the vocabulary from corpus text: the `max_size - 2` most
    /// frequent tokens are kept, the rest map to `UNK`.
    pub fn build(corpus: &str, mode: TokenMode, max_size: usize) -> Result<Self> {
        if max_size < 2 {
            return Err(LabError::config(format!(
                "max_vocab must be at least 2 (for the reserved ids), got {max_size}"
            )));
        }
        let mut freqs: HashMap<String, u64> = HashMap::new();
        for line in corpus.lines() {
            for token in tokenize_line(line, mode) {
                *freqs.entry(token).or_insert(0) += 1;
            }
        }
        if freqs.is_empty() {
            return Err(LabError::data("corpus contains no tokens"));
        }
        let mut ranked: Vec<(String, u64)> = freqs.into_iter().collect();
        ranked.sort_by(|(ta, fa), (tb, fb)| fb.cmp(fa).then_with(|| ta.cmp(tb)));
        ranked.truncate(max_size - 2);

        let mut id_to_token = vec![UNK_TOKEN.to_string(), EOS_TOKEN.to_string()];
        id_to_token.extend(ranked.into_iter().map(|(t, _)| t));
        let token_to_id = id_to_token
            .iter()
            .enumerate()
            .map(|(id, t)| (t.clone(), id))
            .collect();
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
        })
    }

    pub fn size(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn id_of(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    /// Encodes text into one flat id stream, appending `EOS` per line.
    pub fn encode(&self, text: &str, mode: TokenMode) -> Vec<usize> {
        let mut out = Vec::new();
        for line in text.lines() {
            for token in tokenize_line(line, mode) {
                out.push(self.id_of(&token));
            }
            out.push(EOS_ID);
        }
        out
    }
}
