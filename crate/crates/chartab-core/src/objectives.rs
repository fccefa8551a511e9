//! Masked-cell pretraining pairs: header prediction masks header cells,
//! value prediction masks numeric value cells, both at a configurable rate
//! with whole cells as the masking unit.

use rand::seq::index::sample as sample_indices;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ocr::{build_regions, extract_ocr, NoiseModel, RegionFeature};
use crate::stc::{encode_with_copy, match_ocr_to_cells, SentinelView, SentinelVocab, StcEncoding};
use crate::synth::ChartSample;
use crate::table::{flatten_with_overrides, mix64, sample_seed, CellRef};

pub const MASKED_PAIR_SCHEMA: &str = "maskedpair/1";
pub const DEFAULT_MASK_RATE: f64 = 0.45;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("mask rate {0} outside (0, 1]")]
    BadRate(f64),
    #[error("table has no numeric value cells; unsuitable for value masking")]
    NoNumericCells,
    #[error("sample {id}: {message}")]
    Sample { id: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "MHP")]
    MaskedHeader,
    #[serde(rename = "MVP")]
    MaskedValue,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Objective::MaskedHeader => "MHP",
            Objective::MaskedValue => "MVP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedPair {
    pub objective: Objective,
    /// Flat table with each masked cell replaced by its `<mask_k>` sentinel.
    pub input: String,
    /// `<mask_1> surface1 <mask_2> surface2 …` in flatten order; a masked
    /// cell that was sentinel-substituted contributes its OCR sentinel.
    pub target: String,
    pub masked: Vec<CellRef>,
}

/// `k = max(1, round_half_up(rate × candidates))`.
pub(crate) fn mask_count(rate: f64, candidates: usize) -> usize {
    let k = (rate * candidates as f64 + 0.5).floor() as usize;
    k.clamp(1, candidates)
}

fn mask_sentinel(k: usize) -> String {
    format!("<mask_{k}>")
}

fn mask_cells(
    stc: &StcEncoding,
    candidates: Vec<CellRef>,
    objective: Objective,
    rate: f64,
    seed: u64,
) -> Result<MaskedPair, ObjectiveError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(ObjectiveError::BadRate(rate));
    }
    let k = mask_count(rate, candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<CellRef> =
        sample_indices(&mut rng, candidates.len(), k).iter().map(|i| candidates[i]).collect();
    chosen.sort();

    let mut overrides = stc.substituted.clone();
    let mut target = String::new();
    for (j, cell) in chosen.iter().enumerate() {
        let sentinel = mask_sentinel(j + 1);
        // The target reveals what the input hides: the OCR sentinel if this
        // cell was copy-substituted, its plain surface otherwise.
        let surface = match stc.substituted.get(cell) {
            Some(ocr_sentinel) => ocr_sentinel.clone(),
            None => stc.table.surface_of(*cell),
        };
        if j > 0 {
            target.push(' ');
        }
        target.push_str(&sentinel);
        target.push(' ');
        target.push_str(&surface);
        overrides.insert(*cell, sentinel);
    }
    Ok(MaskedPair {
        objective,
        input: flatten_with_overrides(&stc.table, &stc.prefix, &overrides),
        target,
        masked: chosen,
    })
}

/// Masked header prediction: masks `rate` of the header cells (columns and
/// rows), never value cells.
pub fn mask_headers(stc: &StcEncoding, rate: f64, seed: u64) -> Result<MaskedPair, ObjectiveError> {
    mask_cells(stc, stc.table.header_refs(), Objective::MaskedHeader, rate, seed)
}

/// Masked value prediction: masks `rate` of the numeric value cells, never
/// headers or text cells.
pub fn mask_values(stc: &StcEncoding, rate: f64, seed: u64) -> Result<MaskedPair, ObjectiveError> {
    let candidates = stc.table.numeric_value_refs();
    if candidates.is_empty() {
        return Err(ObjectiveError::NoNumericCells);
    }
    mask_cells(stc, candidates, Objective::MaskedValue, rate, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveSelector {
    /// MHP on even sample indices, MVP on odd ones.
    Alternate,
    /// MHP with the given probability, decided by the sample's seed.
    Weighted { mhp: f64 },
}

impl ObjectiveSelector {
    pub fn pick(&self, index: u64, seed: u64) -> Objective {
        match self {
            ObjectiveSelector::Alternate => {
                if index % 2 == 0 {
                    Objective::MaskedHeader
                } else {
                    Objective::MaskedValue
                }
            }
            ObjectiveSelector::Weighted { mhp } => {
                use rand::Rng;
                let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ 0x9e37_79b9_7f4a_7c15));
                if rng.gen::<f64>() < *mhp {
                    Objective::MaskedHeader
                } else {
                    Objective::MaskedValue
                }
            }
        }
    }
}

/// Model-ready pretraining record, one JSONL line under `maskedpair/1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainRecord {
    pub schema: String,
    pub id: String,
    pub objective: Objective,
    pub input_tokens: Vec<String>,
    pub target_tokens: Vec<String>,
    pub regions: Vec<RegionFeature>,
    pub ocr: Vec<SentinelView>,
    pub masked: Vec<CellRef>,
}

#[derive(Debug, Clone, Copy)]
pub struct PretrainOptions<'a> {
    pub selector: ObjectiveSelector,
    pub noise: Option<&'a NoiseModel>,
    pub rate: f64,
    pub d_region: usize,
    pub max_ocr: usize,
}

impl Default for PretrainOptions<'_> {
    fn default() -> Self {
        PretrainOptions {
            selector: ObjectiveSelector::Alternate,
            noise: None,
            rate: DEFAULT_MASK_RATE,
            d_region: 16,
            max_ocr: crate::stc::DEFAULT_MAX_OCR,
        }
    }
}

/// Bundles one sample into a model-ready record: region features, sentinel-
/// viewed OCR, masked input and target. All randomness is derived from
/// `(global_seed, index)`.
pub fn make_pretraining_example(
    sample: &ChartSample,
    prefix: &str,
    opts: &PretrainOptions,
    index: u64,
    global_seed: u64,
) -> Result<PretrainRecord, ObjectiveError> {
    let fail = |message: String| ObjectiveError::Sample { id: sample.id.clone(), message };
    let base = sample_seed(global_seed, index);
    let noise_seed = mix64(base ^ 1);
    let mask_seed = mix64(base ^ 2);
    let region_seed = mix64(base ^ 3);

    let tokens =
        extract_ocr(&sample.annotation, opts.noise, noise_seed).map_err(|e| fail(e.to_string()))?;
    let vocab = SentinelVocab::new(opts.max_ocr);
    let matching = match_ocr_to_cells(&sample.table, &tokens);
    let stc = encode_with_copy(&sample.table, prefix, &tokens, &matching, &vocab)
        .map_err(|e| fail(e.to_string()))?;

    let objective = opts.selector.pick(index, base);
    let pair = match objective {
        Objective::MaskedHeader => mask_headers(&stc, opts.rate, mask_seed),
        Objective::MaskedValue => mask_values(&stc, opts.rate, mask_seed),
    }
    .map_err(|e| match e {
        ObjectiveError::Sample { .. } => e,
        other => fail(other.to_string()),
    })?;

    let regions = build_regions(&sample.annotation, opts.d_region, region_seed)
        .map_err(|e| fail(e.to_string()))?;
    Ok(PretrainRecord {
        schema: MASKED_PAIR_SCHEMA.to_string(),
        id: sample.id.clone(),
        objective,
        input_tokens: pair.input.split_whitespace().map(str::to_string).collect(),
        target_tokens: pair.target.split_whitespace().map(str::to_string).collect(),
        regions,
        ocr: stc.input,
        masked: pair.masked,
    })
}
