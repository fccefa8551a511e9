//! JSONL manifests: one schema-tagged record per line, with strict
//! line-numbered validation on import so foreign corpora fail loudly.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synth::{Annotation, BBox, ChartSample, ChartSpec, Region, TextBox};
use crate::table::{ChartType, Table};

pub const CHART_SAMPLE_SCHEMA: &str = "chartsample/1";

#[derive(Debug, Error)]
pub enum ImportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Invalid { path: PathBuf, line: usize, message: String },
}

/// One manifest line for a synthesized chart sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSampleRecord {
    pub schema: String,
    pub id: String,
    pub chart_type: ChartType,
    pub table: Table,
    pub spec: ChartSpec,
    pub image_path: String,
    pub ocr_tokens: Vec<TextBox>,
    pub regions: Vec<Region>,
}

impl From<&ChartSample> for ChartSampleRecord {
    fn from(s: &ChartSample) -> Self {
        ChartSampleRecord {
            schema: CHART_SAMPLE_SCHEMA.to_string(),
            id: s.id.clone(),
            chart_type: s.chart_type,
            table: s.table.clone(),
            spec: s.spec.clone(),
            image_path: s.image_path.to_string_lossy().into_owned(),
            ocr_tokens: s.annotation.ocr_tokens.clone(),
            regions: s.annotation.regions.clone(),
        }
    }
}

impl ChartSampleRecord {
    pub fn into_sample(self) -> ChartSample {
        let annotation = Annotation {
            width: self.spec.width,
            height: self.spec.height,
            ocr_tokens: self.ocr_tokens,
            regions: self.regions,
        };
        ChartSample {
            id: self.id,
            chart_type: self.chart_type,
            table: self.table,
            spec: self.spec,
            image_path: PathBuf::from(self.image_path),
            annotation,
        }
    }

    /// Structural checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema != CHART_SAMPLE_SCHEMA {
            return Err(format!(
                "schema {:?} is not {CHART_SAMPLE_SCHEMA:?}",
                self.schema
            ));
        }
        self.spec.validate().map_err(|e| e.to_string())?;
        let check_box = |what: String, b: &BBox| -> Result<(), String> {
            if !b.is_valid() {
                return Err(format!(
                    "{what} has invalid bbox [{}, {}, {}, {}] (needs x1 < x2 and y1 < y2)",
                    b.x1, b.y1, b.x2, b.y2
                ));
            }
            if b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > self.spec.width as f64 || b.y2 > self.spec.height as f64 {
                return Err(format!(
                    "{what} bbox [{}, {}, {}, {}] exceeds the {}x{} image",
                    b.x1, b.y1, b.x2, b.y2, self.spec.width, self.spec.height
                ));
            }
            Ok(())
        };
        for (i, t) in self.ocr_tokens.iter().enumerate() {
            check_box(format!("ocr token {i} ({:?})", t.text), &t.bbox)?;
        }
        for (i, r) in self.regions.iter().enumerate() {
            check_box(format!("region {i} ({})", r.category), &r.bbox)?;
        }
        Ok(())
    }
}

pub struct ManifestWriter {
    out: BufWriter<File>,
}

impl ManifestWriter {
    pub fn create(path: &Path) -> io::Result<ManifestWriter> {
        Ok(ManifestWriter { out: BufWriter::new(File::create(path)?) })
    }

    pub fn write(&mut self, sample: &ChartSample) -> io::Result<()> {
        self.write_record(&ChartSampleRecord::from(sample))
    }

    pub fn write_record<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let line = serde_json::to_string(record)?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        out.write_all(serde_json::to_string(r)?.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a JSONL file, reporting the 1-based line number of the first bad
/// record. Blank lines are rejected rather than skipped.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ImportError> {
    let io_err = |source| ImportError::Io { path: path.to_path_buf(), source };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ImportError::Io { path: path.to_path_buf(), source })?;
        let record = serde_json::from_str(&line).map_err(|e| ImportError::Invalid {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Loads and fully validates a chart-sample manifest.
pub fn read_corpus(path: &Path) -> Result<Vec<ChartSample>, ImportError> {
    let records: Vec<ChartSampleRecord> = read_jsonl(path)?;
    let mut samples = Vec::with_capacity(records.len());
    for (i, record) in records.into_iter().enumerate() {
        record.validate().map_err(|message| ImportError::Invalid {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        samples.push(record.into_sample());
    }
    Ok(samples)
}
