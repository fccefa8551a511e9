//! Copy-augmented vocabulary: four specials, then mask sentinels, then OCR
//! sentinels, then the base word pieces in sorted order. OCR and text tokens
//! share this one id space (and therefore one embedding table).

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SPECIALS: [&str; 4] = ["<pad>", "<s>", "</s>", "<unk>"];

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("base token {0:?} collides with a reserved sentinel or special")]
    Reserved(String),
    #[error("base token {0:?} contains whitespace")]
    Whitespace(String),
    #[error("vocab file line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    n_masks: usize,
    n_ocr: usize,
}

impl Vocab {
    /// Builds the partitioned id space. Base tokens that spell like
    /// sentinels or specials are rejected — the partitions must stay
    /// disjoint.
    pub fn build(
        base: impl IntoIterator<Item = String>,
        n_masks: usize,
        n_ocr: usize,
    ) -> Result<Vocab, VocabError> {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for k in 1..=n_masks {
            tokens.push(format!("<mask_{k}>"));
        }
        for i in 1..=n_ocr {
            tokens.push(format!("<ocr_{i}>"));
        }
        let reserved: BTreeSet<String> = tokens.iter().cloned().collect();
        let base: BTreeSet<String> = base.into_iter().collect();
        for token in base {
            if token.chars().any(char::is_whitespace) || token.is_empty() {
                return Err(VocabError::Whitespace(token));
            }
            if reserved.contains(&token) {
                return Err(VocabError::Reserved(token));
            }
            tokens.push(token);
        }
        let index = tokens.iter().cloned().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(Vocab { tokens, index, n_masks, n_ocr })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn n_masks(&self) -> usize {
        self.n_masks
    }

    pub fn n_ocr(&self) -> usize {
        self.n_ocr
    }

    /// Token id, falling back to `<unk>`.
    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_of(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    /// Id of `<mask_k>` (1-based k).
    pub fn mask_id(&self, k: usize) -> Option<usize> {
        (k >= 1 && k <= self.n_masks).then(|| 4 + (k - 1))
    }

    /// Id of `<ocr_i>` (1-based i).
    pub fn ocr_id(&self, i: usize) -> Option<usize> {
        (i >= 1 && i <= self.n_ocr).then(|| 4 + self.n_masks + (i - 1))
    }

    /// If `id` is an OCR sentinel, its 1-based index.
    pub fn ocr_index(&self, id: usize) -> Option<usize> {
        let lo = 4 + self.n_masks;
        (id >= lo && id < lo + self.n_ocr).then(|| id - lo + 1)
    }

    pub fn is_mask(&self, id: usize) -> bool {
        id >= 4 && id < 4 + self.n_masks
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Rebuilds a vocab from its serialized token list (one per line).
    pub fn from_lines(lines: &[String], n_masks: usize, n_ocr: usize) -> Result<Vocab, VocabError> {
        let reserved_len = 4 + n_masks + n_ocr;
        if lines.len() < reserved_len {
            return Err(VocabError::Malformed {
                line: lines.len(),
                message: format!("expected at least {reserved_len} tokens, found {}", lines.len()),
            });
        }
        let rebuilt = Vocab::build(
            lines[reserved_len..].iter().cloned(),
            n_masks,
            n_ocr,
        )?;
        for (i, line) in lines.iter().enumerate() {
            if rebuilt.tokens.get(i).map(String::as_str) != Some(line.as_str()) {
                return Err(VocabError::Malformed {
                    line: i + 1,
                    message: format!(
                        "token {line:?} out of place; expected {:?}",
                        rebuilt.tokens.get(i)
                    ),
                });
            }
        }
        Ok(rebuilt)
    }
}
