//! Bridges pretraining records to model tensors, and builds the fixed-shape
//! micro corpus used to demonstrate the copy mechanism end to end.

use std::collections::HashMap;
use std::path::PathBuf;

use thiserror::Error;

use chartab_core::table::{generate_random_table, ChartWeights, TableGenConfig, DEFAULT_PREFIX};
use chartab_core::{
    emit_annotations, layout_chart, make_pretraining_example, ChartSample, ChartType,
    ObjectiveError, ObjectiveSelector, Orientation, PretrainOptions, PretrainRecord, SpecConfig,
};

use crate::model::{
    greedy_decode, MicroModelParams, ModelError, MultimodalInput, OcrIn, RegionIn,
};
use crate::vocab::{Vocab, VocabError, EOS, SPECIALS};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("record {id}: {message}")]
    Record { id: String, message: String },
    #[error("could not collect {wanted} uniform samples in {tried} draws")]
    Exhausted { wanted: usize, tried: usize },
    #[error("{0}")]
    Synth(String),
}

/// `<mask_k>` / `<ocr_i>` shaped, for any index.
fn is_sentinel_shaped(token: &str) -> bool {
    let body = match token.strip_prefix("<mask_").or_else(|| token.strip_prefix("<ocr_")) {
        Some(rest) => rest,
        None => return false,
    };
    match body.strip_suffix('>') {
        Some(digits) => !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()),
        None => false,
    }
}

/// Word vocabulary over every non-sentinel token seen in the records'
/// inputs and targets.
pub fn vocab_from_records(
    records: &[PretrainRecord],
    n_masks: usize,
    n_ocr: usize,
) -> Result<Vocab, DatasetError> {
    let mut base = Vec::new();
    for r in records {
        for t in r.input_tokens.iter().chain(&r.target_tokens) {
            if !is_sentinel_shaped(t) && !SPECIALS.contains(&t.as_str()) {
                base.push(t.clone());
            }
        }
    }
    Ok(Vocab::build(base, n_masks, n_ocr)?)
}

/// One model-ready pair plus its provenance id.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroExample {
    pub id: String,
    pub input: MultimodalInput,
    /// Target ids, EOS-terminated.
    pub target: Vec<usize>,
}

/// Converts a record into model tensors under `vocab`. Region features and
/// OCR sentinels keep their 5-d locations; the target gains a final EOS.
pub fn example_from_record(
    record: &PretrainRecord,
    vocab: &Vocab,
) -> Result<MicroExample, DatasetError> {
    let fail = |message: String| DatasetError::Record { id: record.id.clone(), message };
    if record.target_tokens.is_empty() {
        return Err(fail("empty target".into()));
    }
    let regions = record
        .regions
        .iter()
        .map(|r| RegionIn { features: r.feature_vec.clone(), loc: r.location_vec })
        .collect();
    let mut ocr = Vec::with_capacity(record.ocr.len());
    for sv in &record.ocr {
        let id = vocab.id_of(&sv.sentinel);
        if vocab.ocr_index(id).is_none() {
            return Err(fail(format!("{} is not an OCR sentinel in this vocabulary", sv.sentinel)));
        }
        ocr.push(OcrIn { id, loc: sv.location_vec });
    }
    let text = record.input_tokens.iter().map(|t| vocab.id_of(t)).collect();
    let mut target: Vec<usize> = record.target_tokens.iter().map(|t| vocab.id_of(t)).collect();
    target.push(EOS);
    Ok(MicroExample {
        id: record.id.clone(),
        input: MultimodalInput { regions, ocr, text },
        target,
    })
}

#[derive(Debug, Clone)]
pub struct MicroCorpus {
    pub vocab: Vocab,
    pub train: Vec<MicroExample>,
    pub heldout: Vec<MicroExample>,
    /// Records behind `train ++ heldout`, same order.
    pub records: Vec<PretrainRecord>,
}

const MICRO_D_REGION: usize = 16;
const MICRO_N_MASKS: usize = 16;
const MICRO_N_OCR: usize = 64;

fn micro_record(index: u64, seed: u64) -> Result<PretrainRecord, DatasetError> {
    // Fixed 3×2 integer tables drawn as vertical bar charts keep the OCR
    // reading order stable, so each masked header maps to a sentinel the
    // model can learn to copy.
    let gen_cfg = TableGenConfig {
        chart_weights: ChartWeights { bar: 1.0, line: 0.0, pie: 0.0 },
        rows: (3, 3),
        cols: (2, 2),
        value_range: (10.0, 99.0),
        value_decimals: 0,
        vertical_weight: 1.0,
        ..TableGenConfig::default()
    };
    let opts = PretrainOptions {
        selector: ObjectiveSelector::Weighted { mhp: 1.0 },
        d_region: MICRO_D_REGION,
        max_ocr: MICRO_N_OCR,
        ..PretrainOptions::default()
    };
    let sample_seed = chartab_core::sample_seed(seed, index);
    let (table, chart_type) = generate_random_table(&gen_cfg, sample_seed)
        .map_err(|e| DatasetError::Synth(e.to_string()))?;
    let spec = SpecConfig::default().spec_for(ChartType::Bar, Orientation::Vertical);
    let layout = layout_chart(&table, &spec, sample_seed)
        .map_err(|e| DatasetError::Synth(e.to_string()))?;
    let sample = ChartSample {
        id: format!("micro-{index:05}"),
        chart_type,
        table,
        spec,
        image_path: PathBuf::new(),
        annotation: emit_annotations(&layout),
    };
    Ok(make_pretraining_example(&sample, DEFAULT_PREFIX, &opts, index, seed)?)
}

/// Builds `n_train` + `n_heldout` masked-header samples over fixed-shape
/// tables, keeping only the modal OCR-stream length so the copy mapping is
/// stationary, and fits a vocabulary over the result.
pub fn build_micro_corpus(
    n_train: usize,
    n_heldout: usize,
    seed: u64,
) -> Result<MicroCorpus, DatasetError> {
    let wanted = n_train + n_heldout;
    let probe: Vec<PretrainRecord> =
        (0..50).map(|i| micro_record(i, seed)).collect::<Result<_, _>>()?;
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for r in &probe {
        *counts.entry(r.ocr.len()).or_insert(0) += 1;
    }
    // Modal length; ties break toward the longer stream.
    let modal = counts
        .iter()
        .max_by_key(|(len, n)| (**n, **len))
        .map(|(len, _)| *len)
        .expect("probe batch is non-empty");

    let cap = 60 * wanted.max(1);
    let mut records = Vec::with_capacity(wanted);
    let mut index = 0u64;
    while records.len() < wanted && (index as usize) < cap {
        let r = if (index as usize) < probe.len() {
            probe[index as usize].clone()
        } else {
            micro_record(index, seed)?
        };
        if r.ocr.len() == modal && !r.masked.is_empty() {
            records.push(r);
        }
        index += 1;
    }
    if records.len() < wanted {
        return Err(DatasetError::Exhausted { wanted, tried: index as usize });
    }

    let vocab = vocab_from_records(&records, MICRO_N_MASKS, MICRO_N_OCR)?;
    let examples: Vec<MicroExample> =
        records.iter().map(|r| example_from_record(r, &vocab)).collect::<Result<_, _>>()?;
    let (train, heldout) = examples.split_at(n_train);
    Ok(MicroCorpus {
        vocab,
        train: train.to_vec(),
        heldout: heldout.to_vec(),
        records,
    })
}

/// `<mask_k> …` segments of a target/decode stream: mask id → the ids that
/// follow it, up to the next mask sentinel or EOS.
fn mask_segments(ids: &[usize], vocab: &Vocab) -> Vec<(usize, Vec<usize>)> {
    let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
    for &id in ids {
        if id == EOS {
            break;
        }
        if vocab.is_mask(id) {
            out.push((id, Vec::new()));
        } else if let Some(last) = out.last_mut() {
            last.1.push(id);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CopyReport {
    pub slots: usize,
    pub correct: usize,
}

impl CopyReport {
    pub fn fraction(&self) -> f64 {
        if self.slots == 0 {
            return 0.0;
        }
        self.correct as f64 / self.slots as f64
    }
}

/// Greedy-decodes each example and scores masked slots: a slot counts as
/// correct when the decoded segment after its mask sentinel equals the gold
/// segment exactly.
pub fn copy_accuracy(
    params: &MicroModelParams,
    examples: &[MicroExample],
    vocab: &Vocab,
) -> Result<CopyReport, ModelError> {
    let mut report = CopyReport { slots: 0, correct: 0 };
    for ex in examples {
        let decoded = greedy_decode(params, &ex.input, ex.target.len() + 4, EOS)?;
        let gold = mask_segments(&ex.target, vocab);
        let pred = mask_segments(&decoded, vocab);
        for (mask_id, gold_seg) in &gold {
            report.slots += 1;
            if pred
                .iter()
                .any(|(m, seg)| m == mask_id && seg == gold_seg)
            {
                report.correct += 1;
            }
        }
    }
    Ok(report)
}
