//! Scene-text copy: pair OCR tokens with table cells whose normalized
//! surfaces agree, substitute `<ocr_i>` sentinels into the flat-table target,
//! and invert the substitution when decoding model output.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ocr::OcrToken;
use crate::table::{
    canonical_number_string, flatten_table, flatten_with_overrides, CellRef, Table,
};

pub const DEFAULT_MAX_OCR: usize = 64;

#[derive(Debug, Error)]
pub enum StcError {
    #[error("{count} OCR tokens exceed the {limit}-sentinel vocabulary <ocr_1>..<ocr_{limit}>")]
    TooManyTokens { count: usize, limit: usize },
    #[error("matching references OCR index {index} but the vocabulary stops at <ocr_{limit}>")]
    SentinelOutOfRange { index: usize, limit: usize },
    #[error("cell {cell:?} surface {surface:?} collides with the sentinel vocabulary")]
    SentinelCollision { cell: CellRef, surface: String },
    #[error("prefix {0:?} collides with the sentinel vocabulary")]
    PrefixCollision(String),
    #[error("sequence references {sentinel} but only {available} OCR tokens are present")]
    DanglingSentinel { sentinel: String, available: usize },
}

/// The ordered sentinel names `<ocr_1>` … `<ocr_N>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentinelVocab {
    n: usize,
}

impl SentinelVocab {
    pub fn new(n: usize) -> SentinelVocab {
        SentinelVocab { n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Sentinel for the 0-based reading-order index `i`: `<ocr_{i+1}>`.
    pub fn name(&self, index: usize) -> Option<String> {
        (index < self.n).then(|| format!("<ocr_{}>", index + 1))
    }

    pub fn names(&self) -> impl Iterator<Item = String> + '_ {
        (0..self.n).map(|i| format!("<ocr_{}>", i + 1))
    }

    /// Inverse of [`SentinelVocab::name`]: `<ocr_k>` → `k-1` when in range.
    pub fn parse(&self, token: &str) -> Option<usize> {
        let inner = token.strip_prefix("<ocr_")?.strip_suffix('>')?;
        if inner.is_empty() || inner.starts_with('0') || !inner.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let k: usize = inner.parse().ok()?;
        (k >= 1 && k <= self.n).then(|| k - 1)
    }
}

impl Default for SentinelVocab {
    fn default() -> Self {
        SentinelVocab::new(DEFAULT_MAX_OCR)
    }
}

/// Comparison key shared by OCR tokens and table cells: trimmed, case-folded,
/// with canonically-numeric strings collapsed to one spelling ("25" ≡ "25.0").
pub fn normalize_surface(s: &str) -> String {
    let t = s.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => canonical_number_string(v),
        _ => t.to_lowercase(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMatching {
    /// (OCR reading-order index, cell) pairs; each cell appears at most once,
    /// one OCR token may serve several cells.
    pub pairs: Vec<(usize, CellRef)>,
    pub unmatched_ocr: Vec<usize>,
    pub unmatched_cells: Vec<CellRef>,
}

/// Maps each sample's OCR tokens to its sentinels positionally.
pub fn assign_sentinels(
    tokens: &[OcrToken],
    vocab: &SentinelVocab,
) -> Result<Vec<String>, StcError> {
    if tokens.len() > vocab.len() {
        return Err(StcError::TooManyTokens { count: tokens.len(), limit: vocab.len() });
    }
    Ok(tokens.iter().enumerate().map(|(i, _)| vocab.name(i).expect("checked above")).collect())
}

/// Matches every table cell (headers and values) against the OCR tokens by
/// normalized equality; ties go to the smallest reading-order index.
pub fn match_ocr_to_cells(table: &Table, tokens: &[OcrToken]) -> CellMatching {
    let normalized: Vec<String> = tokens.iter().map(|t| normalize_surface(&t.text)).collect();
    let mut pairs = Vec::new();
    let mut unmatched_cells = Vec::new();
    let mut used = vec![false; tokens.len()];

    let mut refs = table.header_refs();
    for i in 0..table.n_rows() {
        for j in 0..table.n_cols() {
            refs.push(CellRef::Value(i, j));
        }
    }
    refs.sort();

    for r in refs {
        let key = normalize_surface(&table.surface_of(r));
        match normalized.iter().position(|n| *n == key) {
            Some(pos) => {
                used[pos] = true;
                pairs.push((tokens[pos].index, r));
            }
            None => unmatched_cells.push(r),
        }
    }
    let unmatched_ocr =
        tokens.iter().zip(&used).filter(|(_, u)| !**u).map(|(t, _)| t.index).collect();
    CellMatching { pairs, unmatched_ocr, unmatched_cells }
}

/// One OCR token as the encoder sees it: its sentinel identity plus the
/// original surface text and position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentinelView {
    pub sentinel: String,
    pub text: String,
    pub bbox: crate::synth::BBox,
    pub location_vec: [f64; 5],
}

#[derive(Debug, Clone, PartialEq)]
pub struct StcEncoding {
    pub table: Table,
    pub prefix: String,
    /// Encoder-side OCR sequence, sentinel view.
    pub input: Vec<SentinelView>,
    /// Flat table with matched cell surfaces replaced by sentinels.
    pub target: String,
    /// Plain flat table (no substitutions).
    pub plain_target: String,
    /// Which sentinel stands where.
    pub substituted: BTreeMap<CellRef, String>,
}

fn scan_sentinel_shape(s: &str) -> Option<&str> {
    let mut rest = s;
    while let Some(start) = rest.find("<ocr_") {
        let tail = &rest[start..];
        if let Some(end) = tail.find('>') {
            let candidate = &tail[..=end];
            if SentinelVocab::new(usize::MAX).parse(candidate).is_some() {
                return Some(candidate);
            }
        }
        rest = &rest[start + 5..];
    }
    None
}

/// Builds the STC view of a sample: sentinel-viewed OCR input and a flat
/// target whose matched cells are sentinels.
pub fn encode_with_copy(
    table: &Table,
    prefix: &str,
    tokens: &[OcrToken],
    matching: &CellMatching,
    vocab: &SentinelVocab,
) -> Result<StcEncoding, StcError> {
    let sentinels = assign_sentinels(tokens, vocab)?;
    if scan_sentinel_shape(prefix).is_some() {
        return Err(StcError::PrefixCollision(prefix.to_string()));
    }

    let mut substituted = BTreeMap::new();
    for (ocr_index, cell) in &matching.pairs {
        let name = vocab
            .name(*ocr_index)
            .ok_or(StcError::SentinelOutOfRange { index: *ocr_index, limit: vocab.len() })?;
        substituted.insert(*cell, name);
    }
    // Unsubstituted surfaces must not impersonate sentinels, or decoding
    // would not invert the encoding.
    for cell in table.header_refs().into_iter().chain(
        (0..table.n_rows()).flat_map(|i| (0..table.n_cols()).map(move |j| CellRef::Value(i, j))),
    ) {
        if substituted.contains_key(&cell) {
            continue;
        }
        let surface = table.surface_of(cell);
        if scan_sentinel_shape(&surface).is_some() {
            return Err(StcError::SentinelCollision { cell, surface });
        }
    }

    let input = tokens
        .iter()
        .zip(sentinels)
        .map(|(t, sentinel)| SentinelView {
            sentinel,
            text: t.text.clone(),
            bbox: t.bbox,
            location_vec: t.location_vec,
        })
        .collect();
    Ok(StcEncoding {
        table: table.clone(),
        prefix: prefix.to_string(),
        input,
        target: flatten_with_overrides(table, prefix, &substituted),
        plain_target: flatten_table(table, prefix).text,
        substituted,
    })
}

/// Replaces every in-vocabulary sentinel in `sequence` with its OCR token's
/// surface text; everything else passes through verbatim.
pub fn decode_copy(
    sequence: &str,
    tokens: &[OcrToken],
    vocab: &SentinelVocab,
) -> Result<String, StcError> {
    let mut out = String::with_capacity(sequence.len());
    let mut rest = sequence;
    while let Some(start) = rest.find("<ocr_") {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let candidate_end = tail.find('>');
        let parsed = candidate_end.and_then(|end| {
            let candidate = &tail[..=end];
            vocab.parse(candidate).map(|idx| (candidate, idx))
        });
        match parsed {
            Some((candidate, idx)) => {
                let token = tokens.iter().find(|t| t.index == idx).ok_or_else(|| {
                    StcError::DanglingSentinel {
                        sentinel: candidate.to_string(),
                        available: tokens.len(),
                    }
                })?;
                out.push_str(&token.text);
                rest = &tail[candidate.len()..];
            }
            None => {
                out.push_str("<ocr_");
                rest = &tail[5..];
            }
        }
    }
    out.push_str(rest);
    Ok(out)
}
