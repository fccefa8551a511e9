//! Flat-file checkpoints, schema `microckpt/1`: a raw little-endian f64
//! blob, a text index with the config and tensor shapes, and the vocabulary
//! one token per line.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::model::{MicroModelParams, ModelConfig, ModelError};
use crate::vocab::{Vocab, VocabError};

pub const CHECKPOINT_SCHEMA: &str = "microckpt/1";
const BIN_FILE: &str = "model.bin";
const IDX_FILE: &str = "model.idx";
const VOCAB_FILE: &str = "model.vocab";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint index: {0}")]
    Index(String),
    #[error("checkpoint schema {found:?} is not {CHECKPOINT_SCHEMA:?}")]
    Schema { found: String },
    #[error("config line is not valid JSON: {0}")]
    Config(#[from] serde_json::Error),
    #[error("tensor {name}: index says {idx_rows}x{idx_cols}, model needs {want_rows}x{want_cols}")]
    Shape { name: String, idx_rows: usize, idx_cols: usize, want_rows: usize, want_cols: usize },
    #[error("weight blob holds {found} bytes, index needs {expected}")]
    BlobSize { expected: usize, found: usize },
    #[error("tensor {0} contains non-finite values")]
    NonFinite(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Writes `model.bin`, `model.idx`, and `model.vocab` under `dir`.
pub fn save_checkpoint(
    params: &MicroModelParams,
    vocab: &Vocab,
    dir: &Path,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir)?;
    let tensors = params.tensors();

    let mut idx = String::new();
    idx.push_str(CHECKPOINT_SCHEMA);
    idx.push('\n');
    idx.push_str(&serde_json::to_string(&params.config)?);
    idx.push('\n');
    idx.push_str(&format!("vocab {} {}\n", vocab.n_masks(), vocab.n_ocr()));
    let mut blob: Vec<u8> = Vec::new();
    for (name, m) in &tensors {
        idx.push_str(&format!("{name} {} {}\n", m.rows, m.cols));
        for v in &m.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(dir.join(BIN_FILE), &blob)?;
    fs::write(dir.join(IDX_FILE), idx.as_bytes())?;
    let mut vf = fs::File::create(dir.join(VOCAB_FILE))?;
    for t in vocab.tokens() {
        writeln!(vf, "{t}")?;
    }
    Ok(())
}

/// Loads a `microckpt/1` directory back into parameters and vocabulary,
/// verifying the schema line, every tensor shape, and the blob length.
pub fn load_checkpoint(dir: &Path) -> Result<(MicroModelParams, Vocab), CheckpointError> {
    let idx = fs::read_to_string(dir.join(IDX_FILE))?;
    let mut lines = idx.lines();
    let schema = lines.next().ok_or_else(|| CheckpointError::Index("empty index".into()))?;
    if schema != CHECKPOINT_SCHEMA {
        return Err(CheckpointError::Schema { found: schema.to_string() });
    }
    let config_line =
        lines.next().ok_or_else(|| CheckpointError::Index("missing config line".into()))?;
    let config: ModelConfig = serde_json::from_str(config_line)?;
    config.validate()?;
    let vocab_line =
        lines.next().ok_or_else(|| CheckpointError::Index("missing vocab line".into()))?;
    let mut vit = vocab_line.split_whitespace();
    let (n_masks, n_ocr) = match (vit.next(), vit.next(), vit.next(), vit.next()) {
        (Some("vocab"), Some(m), Some(o), None) => {
            let m: usize =
                m.parse().map_err(|_| CheckpointError::Index(format!("bad vocab line {vocab_line:?}")))?;
            let o: usize =
                o.parse().map_err(|_| CheckpointError::Index(format!("bad vocab line {vocab_line:?}")))?;
            (m, o)
        }
        _ => return Err(CheckpointError::Index(format!("bad vocab line {vocab_line:?}"))),
    };

    let mut params = MicroModelParams::zeros_like(&config);
    let blob = fs::read(dir.join(BIN_FILE))?;
    let mut offset = 0usize;
    let mut expected_total = 0usize;
    {
        let mut tensors = params.tensors_mut();
        let mut ti = 0usize;
        for line in lines {
            let mut it = line.split_whitespace();
            let (name, rows, cols) = match (it.next(), it.next(), it.next(), it.next()) {
                (Some(n), Some(r), Some(c), None) => {
                    let r: usize = r
                        .parse()
                        .map_err(|_| CheckpointError::Index(format!("bad tensor line {line:?}")))?;
                    let c: usize = c
                        .parse()
                        .map_err(|_| CheckpointError::Index(format!("bad tensor line {line:?}")))?;
                    (n, r, c)
                }
                _ => return Err(CheckpointError::Index(format!("bad tensor line {line:?}"))),
            };
            let Some((want_name, m)) = tensors.get_mut(ti) else {
                return Err(CheckpointError::Index(format!("unexpected extra tensor {name}")));
            };
            if *want_name != name || m.rows != rows || m.cols != cols {
                return Err(CheckpointError::Shape {
                    name: name.to_string(),
                    idx_rows: rows,
                    idx_cols: cols,
                    want_rows: m.rows,
                    want_cols: m.cols,
                });
            }
            let n_bytes = m.data.len() * 8;
            expected_total += n_bytes;
            if blob.len() < offset + n_bytes {
                return Err(CheckpointError::BlobSize {
                    expected: expected_total,
                    found: blob.len(),
                });
            }
            for (i, v) in m.data.iter_mut().enumerate() {
                let at = offset + i * 8;
                *v = f64::from_le_bytes(blob[at..at + 8].try_into().expect("8-byte window"));
            }
            if !m.all_finite() {
                return Err(CheckpointError::NonFinite(name.to_string()));
            }
            offset += n_bytes;
            ti += 1;
        }
        if ti != tensors.len() {
            return Err(CheckpointError::Index(format!(
                "index lists {ti} tensors, model needs {}",
                tensors.len()
            )));
        }
    }
    if blob.len() != expected_total {
        return Err(CheckpointError::BlobSize { expected: expected_total, found: blob.len() });
    }

    let vocab_text = fs::read_to_string(dir.join(VOCAB_FILE))?;
    let vocab_lines: Vec<String> = vocab_text.lines().map(str::to_string).collect();
    let vocab = Vocab::from_lines(&vocab_lines, n_masks, n_ocr)?;
    Ok((params, vocab))
}
