//! JSONL record schemas the subcommands exchange, plus generic line-oriented
//! readers/writers. Every schema carries a version tag so stale files are
//! rejected by name instead of failing somewhere downstream.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chartab_core::{CellRef, ChartType, RegionFeature, SentinelView, StcEncoding, Table};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{runtime, CliError};

pub const STC_SCHEMA: &str = "stc/1";

/// One sentinel-encoded sample: everything `mask` needs to build model-ready
/// records without going back to the manifest. `index` is the sample's
/// position in the source manifest, kept so downstream per-sample seeds match
/// a single-pass pipeline over the same corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StcRecord {
    pub schema: String,
    pub id: String,
    pub index: u64,
    pub chart_type: ChartType,
    pub prefix: String,
    pub table: Table,
    pub ocr: Vec<SentinelView>,
    pub regions: Vec<RegionFeature>,
    pub target: String,
    pub plain_target: String,
    /// Cell → OCR sentinel substitutions, in cell order.
    pub substituted: Vec<(CellRef, String)>,
    pub matched_headers: usize,
    pub total_headers: usize,
    pub matched_cells: usize,
    pub total_cells: usize,
}

/// How much of a sample's table the OCR matching covered.
#[derive(Debug, Clone, Copy, Default)]
pub struct MatchStats {
    pub matched_headers: usize,
    pub total_headers: usize,
    pub matched_cells: usize,
    pub total_cells: usize,
}

impl StcRecord {
    pub fn from_encoding(
        id: &str,
        index: u64,
        chart_type: ChartType,
        enc: &StcEncoding,
        regions: Vec<RegionFeature>,
        stats: MatchStats,
    ) -> StcRecord {
        StcRecord {
            schema: STC_SCHEMA.to_string(),
            id: id.to_string(),
            index,
            chart_type,
            prefix: enc.prefix.clone(),
            table: enc.table.clone(),
            ocr: enc.input.clone(),
            regions,
            target: enc.target.clone(),
            plain_target: enc.plain_target.clone(),
            substituted: enc.substituted.iter().map(|(r, s)| (*r, s.clone())).collect(),
            matched_headers: stats.matched_headers,
            total_headers: stats.total_headers,
            matched_cells: stats.matched_cells,
            total_cells: stats.total_cells,
        }
    }

    pub fn to_encoding(&self) -> StcEncoding {
        StcEncoding {
            table: self.table.clone(),
            prefix: self.prefix.clone(),
            input: self.ocr.clone(),
            target: self.target.clone(),
            plain_target: self.plain_target.clone(),
            substituted: self.substituted.iter().map(|(r, s)| (*r, s.clone())).collect(),
        }
    }
}

/// Reads one JSONL record per line; errors carry the 1-based line number.
/// Schema tags are checked by `expect_schema` against the named field.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file =
        File::open(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            return Err(CliError::Validation(format!(
                "{}:{}: blank line in JSONL input",
                path.display(),
                lineno + 1
            )));
        }
        let record: T = serde_json::from_str(&line).map_err(|e| {
            CliError::Validation(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn expect_schema(path: &Path, lineno: usize, found: &str, want: &str) -> Result<(), CliError> {
    if found != want {
        return Err(CliError::Validation(format!(
            "{}:{}: schema {found:?}, expected {want:?}",
            path.display(),
            lineno + 1
        )));
    }
    Ok(())
}

/// Writes records one JSON object per line through a single buffered writer,
/// in input order, so outputs are byte-stable.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    let file =
        File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut w, record).map_err(runtime)?;
        w.write_all(b"\n").map_err(runtime)?;
    }
    w.flush().map_err(runtime)
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(runtime)?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(runtime)?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chartab_core::{Cell, CellRef};

    fn record() -> StcRecord {
        let table = Table::new(
            vec!["A".into(), "B".into()],
            vec!["r1".into()],
            vec![vec![Cell::Num(1.0), Cell::Num(2.0)]],
            None,
        )
        .unwrap();
        StcRecord {
            schema: STC_SCHEMA.into(),
            id: "s000000".into(),
            index: 0,
            chart_type: ChartType::Bar,
            prefix: "table parse:".into(),
            table,
            ocr: Vec::new(),
            regions: Vec::new(),
            target: "t".into(),
            plain_target: "t".into(),
            substituted: vec![(CellRef::ColHeader(0), "<ocr_1>".into())],
            matched_headers: 1,
            total_headers: 3,
            matched_cells: 1,
            total_cells: 5,
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_records() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let records = vec![record()];
        write_jsonl(&path, &records).unwrap();
        let back: Vec<StcRecord> = read_jsonl(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn encoding_round_trip_restores_the_substitution_map() {
        let rec = record();
        let enc = rec.to_encoding();
        assert_eq!(enc.substituted.get(&CellRef::ColHeader(0)).unwrap(), "<ocr_1>");
        assert_eq!(enc.table, rec.table);
    }

    #[test]
    fn blank_lines_and_bad_schemas_are_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        std::fs::write(&path, "\n").unwrap();
        let err = read_jsonl::<StcRecord>(&path).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains(":1:"), "{err}");

        assert!(expect_schema(&path, 4, "stc/0", STC_SCHEMA).is_err());
        assert!(expect_schema(&path, 4, STC_SCHEMA, STC_SCHEMA).is_ok());
    }
}
