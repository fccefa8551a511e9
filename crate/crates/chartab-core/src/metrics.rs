//! Evaluation measures for table reconstruction and summarization: relaxed
//! accuracy, BLEU-4, content selection, and a templated extractive QA
//! generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::Table;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("cannot average an empty evaluation set")]
    EmptySet,
    #[error("BLEU needs at least one reference")]
    NoReferences,
    #[error("table has no cells")]
    EmptyTable,
    #[error("asked for {wanted} questions but the table has {available} cells")]
    TooManyQuestions { wanted: usize, available: usize },
}

fn parse_number(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// 1 if `pred` answers `gold` under the relaxed rule: numeric answers may
/// deviate up to 5% of the gold magnitude (gold 0 demands pred 0); text
/// answers must match after trimming and case folding.
pub fn relaxed_accuracy(pred: &str, gold: &str) -> u8 {
    relaxed_accuracy_with(pred, gold, false)
}

/// [`relaxed_accuracy`] with `strict_case` disabling the case fold on the
/// text path.
pub fn relaxed_accuracy_with(pred: &str, gold: &str, strict_case: bool) -> u8 {
    if let (Some(p), Some(g)) = (parse_number(pred), parse_number(gold)) {
        let ok = if g == 0.0 { p == 0.0 } else { (p - g).abs() <= 0.05 * g.abs() };
        return ok as u8;
    }
    let (p, g) = (pred.trim(), gold.trim());
    let ok = if strict_case { p == g } else { p.to_lowercase() == g.to_lowercase() };
    ok as u8
}

/// Mean relaxed accuracy over aligned prediction/gold lists.
pub fn relaxed_accuracy_set<P: AsRef<str>, G: AsRef<str>>(
    preds: &[P],
    golds: &[G],
) -> Result<f64, MetricError> {
    relaxed_accuracy_set_with(preds, golds, false)
}

pub fn relaxed_accuracy_set_with<P: AsRef<str>, G: AsRef<str>>(
    preds: &[P],
    golds: &[G],
    strict_case: bool,
) -> Result<f64, MetricError> {
    if preds.len() != golds.len() {
        return Err(MetricError::LengthMismatch { preds: preds.len(), golds: golds.len() });
    }
    if preds.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let hits: u32 = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| relaxed_accuracy_with(p.as_ref(), g.as_ref(), strict_case) as u32)
        .sum();
    Ok(hits as f64 / preds.len() as f64)
}

/// BLEU tokenization, pinned exactly: every ASCII punctuation byte becomes
/// its own token, everything else splits on Unicode whitespace. Case is
/// preserved.
pub fn bleu_tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for ch in text.chars() {
        if ch.is_ascii_punctuation() {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<&[String], usize> {
    let mut counts = std::collections::HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU-4: geometric mean of clipped n-gram precisions for n = 1..4 with a
/// brevity penalty. Zero-count precisions for n ≥ 2 get add-one smoothing
/// ((0+1)/(possible+1)), so `bleu4(x, [x]) = 1` for any nonempty `x`; a zero
/// unigram precision stays zero.
pub fn bleu4<R: AsRef<str>>(candidate: &str, references: &[R]) -> Result<f64, MetricError> {
    if references.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let cand = bleu_tokenize(candidate);
    if cand.is_empty() {
        return Ok(0.0);
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| bleu_tokenize(r.as_ref())).collect();

    let mut log_sum = 0.0;
    for n in 1..=4usize {
        let cand_counts = ngram_counts(&cand, n);
        let ref_counts: Vec<_> = refs.iter().map(|r| ngram_counts(r, n)).collect();
        let possible: usize = cand_counts.values().sum();
        let mut matched = 0usize;
        for (gram, &count) in &cand_counts {
            let best_ref =
                ref_counts.iter().map(|rc| rc.get(gram).copied().unwrap_or(0)).max().unwrap_or(0);
            matched += count.min(best_ref);
        }
        let precision = if matched == 0 {
            if n == 1 {
                return Ok(0.0);
            }
            (matched + 1) as f64 / (possible + 1) as f64
        } else {
            matched as f64 / possible as f64
        };
        log_sum += precision.ln();
    }

    // Brevity penalty against the reference length closest to the candidate
    // (ties favor the shorter reference).
    let c = cand.len() as f64;
    let r = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| ((len as f64 - c).abs() * 1e9) as u64 * 2 + (len as f64 > c) as u64)
        .unwrap() as f64;
    let bp = if c >= r { 1.0 } else { (1.0 - r / c).exp() };
    Ok((bp * (log_sum / 4.0).exp()).clamp(0.0, 1.0))
}

/// Numbers mentioned in free text: whitespace tokens with surrounding
/// punctuation stripped — all of it on the right (so "4.3." reads 4.3),
/// everything but a sign on the left — that parse as finite floats.
fn numbers_in(text: &str) -> Vec<f64> {
    text.split_whitespace()
        .filter_map(|tok| {
            let t = tok
                .trim_start_matches(|c: char| {
                    c.is_ascii_punctuation() && !matches!(c, '-' | '+')
                })
                .trim_end_matches(|c: char| c.is_ascii_punctuation());
            parse_number(t)
        })
        .collect()
}

/// Fraction of table records a summary covers. A record (row header, column
/// header, value) counts as selected when the summary mentions the value —
/// any number within 5% of a numeric value, or the exact surface as a
/// substring — and at least one of its headers as a case-folded substring.
pub fn content_selection(summary: &str, table: &Table) -> Result<f64, MetricError> {
    let total = table.n_rows() * table.n_cols();
    if total == 0 {
        return Err(MetricError::EmptyTable);
    }
    let folded = summary.to_lowercase();
    let numbers = numbers_in(summary);
    let mut selected = 0usize;
    for (i, row_header) in table.row_headers().iter().enumerate() {
        for (j, col_header) in table.col_headers().iter().enumerate() {
            let cell = table.cell(i, j);
            let surface = cell.surface();
            let value_hit = match cell.as_num() {
                Some(v) => {
                    numbers.iter().any(|&s| {
                        if v == 0.0 {
                            s == 0.0
                        } else {
                            (s - v).abs() <= 0.05 * v.abs()
                        }
                    }) || summary.contains(&surface)
                }
                None => summary.contains(&surface),
            };
            let header_hit = folded.contains(&row_header.to_lowercase())
                || folded.contains(&col_header.to_lowercase());
            if value_hit && header_hit {
                selected += 1;
            }
        }
    }
    Ok(selected as f64 / total as f64)
}

/// A templated lookup question over one table cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaPair {
    pub question: String,
    /// The referenced cell's surface form, verbatim.
    pub answer: String,
    pub row: usize,
    pub col: usize,
}

/// Draws `n` distinct cells under `seed` and asks
/// "What is the value of ROW in COL?" for each. Deterministic for a given
/// (table shape, n, seed).
pub fn generate_extractive_qa(table: &Table, n: usize, seed: u64) -> Result<Vec<QaPair>, MetricError> {
    let total = table.n_rows() * table.n_cols();
    if total == 0 {
        return Err(MetricError::EmptyTable);
    }
    if n > total {
        return Err(MetricError::TooManyQuestions { wanted: n, available: total });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = rand::seq::index::sample(&mut rng, total, n).into_vec();
    chosen.sort_unstable();
    Ok(chosen
        .into_iter()
        .map(|flat| {
            let (row, col) = (flat / table.n_cols(), flat % table.n_cols());
            QaPair {
                question: format!(
                    "What is the value of {} in {}?",
                    table.row_headers()[row],
                    table.col_headers()[col]
                ),
                answer: table.cell(row, col).surface(),
                row,
                col,
            }
        })
        .collect())
}
