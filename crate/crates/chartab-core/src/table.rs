//! Tables, the canonical flat-text grammar, seeded random generation, and
//! tolerance-aware comparison.
//!
//! The flat grammar is the single serialization used by every downstream
//! stage, so `parse_flat_table(flatten_table(t, p))` must reproduce `t`
//! exactly. Literal `|`, `:` and `\` inside labels are escaped; numeric cells
//! use the shortest decimal form that round-trips through `f64`.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 64-bit finalizer (splitmix64) used to derive independent per-sample seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for sample `index` under `global_seed`; order-independent, so corpora
/// can be generated in any order or in parallel.
pub fn sample_seed(global_seed: u64, index: u64) -> u64 {
    mix64(global_seed ^ index)
}

/// Shortest decimal string that parses back to exactly `v`.
pub fn canonical_number_string(v: f64) -> String {
    format!("{v}")
}

/// Parses `s` as a numeric cell iff it is the canonical form of a finite
/// `f64`. Non-canonical spellings ("25.0", "+5", "1e3") stay textual.
pub fn canonical_numeric(s: &str) -> Option<f64> {
    let v: f64 = s.parse().ok()?;
    if v.is_finite() && canonical_number_string(v) == s {
        Some(v)
    } else {
        None
    }
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("table has no columns")]
    NoColumns,
    #[error("table has no rows")]
    NoRows,
    #[error("row {row} has {got} cells, expected {expected}")]
    RaggedRow { row: usize, got: usize, expected: usize },
    #[error("{got} row headers for {expected} rows")]
    RowHeaderCount { got: usize, expected: usize },
    #[error("empty {which} header at index {index}")]
    EmptyHeader { which: &'static str, index: usize },
    #[error("duplicate {which} header {label:?}")]
    DuplicateHeader { which: &'static str, label: String },
    #[error("non-finite numeric cell at row {row}, col {col}")]
    NonFiniteCell { row: usize, col: usize },
    #[error("invalid table generation config: {0}")]
    InvalidConfig(String),
    #[error("invalid comparison tolerance {0}")]
    InvalidTolerance(f64),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("flat-table parse error at byte {offset}: {message}")]
pub struct FlatParseError {
    pub offset: usize,
    pub message: String,
}

fn parse_err<T>(offset: usize, message: impl Into<String>) -> Result<T, FlatParseError> {
    Err(FlatParseError { offset, message: message.into() })
}

/// A table cell: a finite number or free text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    /// Surface form as it appears in the flat grammar and on rendered charts.
    pub fn surface(&self) -> String {
        match self {
            Cell::Num(v) => canonical_number_string(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    /// Text cells written in canonical numeric form collapse to `Num`, which
    /// keeps the flat grammar lossless: the parser classifies cells by the
    /// same rule.
    fn normalized(self) -> Cell {
        match self {
            Cell::Text(s) => match canonical_numeric(&s) {
                Some(v) => Cell::Num(v),
                None => Cell::Text(s),
            },
            num => num,
        }
    }
}

/// Addresses one cell in flatten order (column headers, then each row header
/// followed by its values).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellRef {
    ColHeader(usize),
    RowHeader(usize),
    Value(usize, usize),
}

impl CellRef {
    fn order_key(self) -> (usize, usize, usize) {
        match self {
            CellRef::ColHeader(j) => (0, 0, j),
            CellRef::RowHeader(i) => (1, i, 0),
            CellRef::Value(i, j) => (1, i, j + 1),
        }
    }
}

impl Ord for CellRef {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.order_key().cmp(&other.order_key())
    }
}

impl PartialOrd for CellRef {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRepr {
    col_headers: Vec<String>,
    row_headers: Vec<String>,
    values: Vec<Vec<Cell>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
}

/// A rectangular table with named columns and rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct Table {
    col_headers: Vec<String>,
    row_headers: Vec<String>,
    values: Vec<Vec<Cell>>,
    title: Option<String>,
}

impl TryFrom<TableRepr> for Table {
    type Error = TableError;
    fn try_from(r: TableRepr) -> Result<Table, TableError> {
        Table::new(r.col_headers, r.row_headers, r.values, r.title)
    }
}

impl From<Table> for TableRepr {
    fn from(t: Table) -> TableRepr {
        TableRepr {
            col_headers: t.col_headers,
            row_headers: t.row_headers,
            values: t.values,
            title: t.title,
        }
    }
}

impl Table {
    pub fn new(
        col_headers: Vec<String>,
        row_headers: Vec<String>,
        values: Vec<Vec<Cell>>,
        title: Option<String>,
    ) -> Result<Table, TableError> {
        if col_headers.is_empty() {
            return Err(TableError::NoColumns);
        }
        if row_headers.is_empty() || values.is_empty() {
            return Err(TableError::NoRows);
        }
        if row_headers.len() != values.len() {
            return Err(TableError::RowHeaderCount { got: row_headers.len(), expected: values.len() });
        }
        for (which, headers) in [("column", &col_headers), ("row", &row_headers)] {
            for (index, h) in headers.iter().enumerate() {
                if h.is_empty() {
                    return Err(TableError::EmptyHeader { which, index });
                }
                if headers[..index].contains(h) {
                    return Err(TableError::DuplicateHeader { which, label: h.clone() });
                }
            }
        }
        let values: Vec<Vec<Cell>> = values
            .into_iter()
            .map(|row| row.into_iter().map(Cell::normalized).collect())
            .collect();
        for (row, cells) in values.iter().enumerate() {
            if cells.len() != col_headers.len() {
                return Err(TableError::RaggedRow { row, got: cells.len(), expected: col_headers.len() });
            }
            for (col, cell) in cells.iter().enumerate() {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        return Err(TableError::NonFiniteCell { row, col });
                    }
                }
            }
        }
        Ok(Table { col_headers, row_headers, values, title })
    }

    pub fn col_headers(&self) -> &[String] {
        &self.col_headers
    }

    pub fn row_headers(&self) -> &[String] {
        &self.row_headers
    }

    pub fn values(&self) -> &[Vec<Cell>] {
        &self.values
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn n_rows(&self) -> usize {
        self.row_headers.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_headers.len()
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.values[row][col]
    }

    /// Header cells (columns then rows) — the masking unit of header
    /// prediction.
    pub fn header_refs(&self) -> Vec<CellRef> {
        (0..self.n_cols())
            .map(CellRef::ColHeader)
            .chain((0..self.n_rows()).map(CellRef::RowHeader))
            .collect()
    }

    /// Numeric value cells in flatten order — the masking unit of value
    /// prediction.
    pub fn numeric_value_refs(&self) -> Vec<CellRef> {
        let mut out = Vec::new();
        for (i, row) in self.values.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if matches!(cell, Cell::Num(_)) {
                    out.push(CellRef::Value(i, j));
                }
            }
        }
        out
    }

    /// Surface form of the cell addressed by `r`.
    pub fn surface_of(&self, r: CellRef) -> String {
        match r {
            CellRef::ColHeader(j) => self.col_headers[j].clone(),
            CellRef::RowHeader(i) => self.row_headers[i].clone(),
            CellRef::Value(i, j) => self.values[i][j].surface(),
        }
    }
}

/// Escapes `|`, `:` and `\` so a label can sit inside the flat grammar.
pub fn escape_label(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            ':' => out.push_str("\\:"),
            other => out.push(other),
        }
    }
    out
}

/// Inverse of [`escape_label`]; `base` is the absolute byte offset of `s`
/// inside the enclosing flat text, used for error reporting.
fn unescape_label(s: &str, base: usize) -> Result<String, FlatParseError> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.char_indices();
    while let Some((i, c)) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some((_, e @ ('\\' | '|' | ':'))) => out.push(e),
            Some((j, other)) => {
                return parse_err(base + j, format!("invalid escape '\\{other}'"));
            }
            None => return parse_err(base + i, "dangling escape at end of label"),
        }
    }
    Ok(out)
}

/// A flattened table: `text` starts with `prefix` verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTable {
    pub text: String,
    pub prefix: String,
}

/// Flattens `table` behind `prefix` using the canonical grammar.
///
/// The grammar carries headers and cells only; an optional title is chart
/// presentation metadata and is not serialized, so parsing always yields an
/// untitled table.
/// Task prefix used by the pipelines unless a caller overrides it.
pub const DEFAULT_PREFIX: &str = "table parse:";

pub fn flatten_table(table: &Table, prefix: &str) -> FlatTable {
    FlatTable {
        text: flatten_with_overrides(table, prefix, &BTreeMap::new()),
        prefix: prefix.to_string(),
    }
}

/// Flatten with per-cell surface overrides. Overrides are emitted verbatim
/// (not escaped): they carry sentinel tokens such as `<ocr_3>`.
pub(crate) fn flatten_with_overrides(
    table: &Table,
    prefix: &str,
    overrides: &BTreeMap<CellRef, String>,
) -> String {
    let emit = |r: CellRef| -> String {
        match overrides.get(&r) {
            Some(s) => s.clone(),
            None => escape_label(&table.surface_of(r)),
        }
    };
    let mut out = String::new();
    out.push_str(prefix);
    out.push_str(" table: c: ");
    let cols: Vec<String> = (0..table.n_cols()).map(|j| emit(CellRef::ColHeader(j))).collect();
    out.push_str(&cols.join(" | "));
    for i in 0..table.n_rows() {
        out.push_str(" r: ");
        out.push_str(&emit(CellRef::RowHeader(i)));
        out.push_str(" : ");
        let vals: Vec<String> = (0..table.n_cols()).map(|j| emit(CellRef::Value(i, j))).collect();
        out.push_str(&vals.join(" | "));
    }
    out
}

/// Splits `s` on unescaped occurrences of `marker`, returning each piece with
/// its byte offset inside `s`.
fn split_unescaped<'a>(s: &'a str, marker: &str) -> Vec<(usize, &'a str)> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let bytes = s.as_bytes();
    while i < s.len() {
        if bytes[i] == b'\\' {
            i += 1;
            if i < s.len() {
                // Skip the escaped character, which may be multi-byte.
                i += s[i..].chars().next().map_or(0, char::len_utf8);
            }
            continue;
        }
        if s[i..].starts_with(marker) {
            pieces.push((start, &s[start..i]));
            i += marker.len();
            start = i;
            continue;
        }
        i += s[i..].chars().next().map_or(1, char::len_utf8);
    }
    pieces.push((start, &s[start..]));
    pieces
}

/// Parses the canonical flat grammar back into a [`Table`].
pub fn parse_flat_table(flat: &FlatTable) -> Result<Table, FlatParseError> {
    let text = &flat.text;
    if !text.starts_with(&flat.prefix) {
        return parse_err(0, "text does not start with the declared prefix");
    }
    let mut pos = flat.prefix.len();
    let intro = " table: c: ";
    if !text[pos..].starts_with(intro) {
        return parse_err(pos, format!("expected {intro:?} after prefix"));
    }
    pos += intro.len();
    let body = &text[pos..];

    let segments = split_unescaped(body, " r: ");
    if segments.len() < 2 {
        return parse_err(pos + body.len(), "expected ' r: ' row marker");
    }

    let (header_off, header_seg) = segments[0];
    let mut col_headers = Vec::new();
    for (off, raw) in split_unescaped(header_seg, " | ") {
        let label = unescape_label(raw, pos + header_off + off)?;
        if label.is_empty() {
            return parse_err(pos + header_off + off, "empty column header");
        }
        col_headers.push(label);
    }

    let mut row_headers = Vec::new();
    let mut values = Vec::new();
    for &(row_off, row_seg) in &segments[1..] {
        let abs_row = pos + row_off;
        let divider = split_unescaped(row_seg, " : ");
        if divider.len() < 2 {
            return parse_err(abs_row, "expected ' : ' between row header and values");
        }
        let (rh_off, rh_raw) = divider[0];
        let row_header = unescape_label(rh_raw, abs_row + rh_off)?;
        if row_header.is_empty() {
            return parse_err(abs_row + rh_off, "empty row header");
        }
        // Only the first unescaped " : " divides header from values; cells
        // cannot contain one, so any further split would be malformed.
        if divider.len() > 2 {
            return parse_err(abs_row + divider[2].0, "unexpected ' : ' inside row values");
        }
        let (vals_off, vals_seg) = divider[1];
        let mut row = Vec::new();
        for (off, raw) in split_unescaped(vals_seg, " | ") {
            let surface = unescape_label(raw, abs_row + vals_off + off)?;
            row.push(match canonical_numeric(&surface) {
                Some(v) => Cell::Num(v),
                None => Cell::Text(surface),
            });
        }
        row_headers.push(row_header);
        values.push(row);
    }

    Table::new(col_headers, row_headers, values, None)
        .map_err(|e| FlatParseError { offset: pos, message: e.to_string() })
}

/// Chart family a generated table is destined for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Bar,
    Line,
    Pie,
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChartType::Bar => write!(f, "bar"),
            ChartType::Line => write!(f, "line"),
            ChartType::Pie => write!(f, "pie"),
        }
    }
}

/// Relative draw weights per chart type. Defaults follow the corpus mix of
/// large chart-QA datasets: roughly 78% bar, 18% line, 4% pie.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChartWeights {
    pub bar: f64,
    pub line: f64,
    pub pie: f64,
}

impl Default for ChartWeights {
    fn default() -> Self {
        ChartWeights { bar: 387_101.0, line: 88_133.0, pie: 20_001.0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableGenConfig {
    pub chart_weights: ChartWeights,
    /// Inclusive row-count range. Pie charts clamp the lower end to 2 slices.
    pub rows: (usize, usize),
    /// Inclusive column-count range; pie tables always get exactly one
    /// value column.
    pub cols: (usize, usize),
    pub value_range: (f64, f64),
    /// Decimal places values are rounded to.
    pub value_decimals: u32,
    pub col_header_pool: Vec<String>,
    pub row_header_pool: Vec<String>,
    /// Probability that a bar chart is vertical rather than horizontal.
    pub vertical_weight: f64,
}

const COL_POOL: &[&str] = &[
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec", "Q1",
    "Q2", "Q3", "Q4", "North", "South", "East", "West", "Spring", "Summer", "Autumn", "Winter",
];

const ROW_POOL: &[&str] = &[
    "Alpha", "Beta", "Gamma", "Delta", "Omega", "Acme", "Zenith", "Apex", "Nova", "Orion",
    "Vega", "Lyra",
];

impl Default for TableGenConfig {
    fn default() -> Self {
        TableGenConfig {
            chart_weights: ChartWeights::default(),
            rows: (1, 4),
            cols: (2, 6),
            value_range: (10.0, 100.0),
            value_decimals: 1,
            col_header_pool: COL_POOL.iter().map(|s| s.to_string()).collect(),
            row_header_pool: ROW_POOL.iter().map(|s| s.to_string()).collect(),
            vertical_weight: 0.75,
        }
    }
}

impl TableGenConfig {
    pub fn validate(&self) -> Result<(), TableError> {
        let bad = |msg: String| Err(TableError::InvalidConfig(msg));
        let w = &self.chart_weights;
        if !(w.bar >= 0.0 && w.line >= 0.0 && w.pie >= 0.0) || w.bar + w.line + w.pie <= 0.0 {
            return bad(format!("chart weights must be non-negative with a positive sum, got {w:?}"));
        }
        if self.rows.0 == 0 || self.rows.0 > self.rows.1 {
            return bad(format!("rows range {:?} is empty", self.rows));
        }
        if self.cols.0 == 0 || self.cols.0 > self.cols.1 {
            return bad(format!("cols range {:?} is empty", self.cols));
        }
        if !self.value_range.0.is_finite()
            || !self.value_range.1.is_finite()
            || self.value_range.0 > self.value_range.1
        {
            return bad(format!("value range {:?} is empty or non-finite", self.value_range));
        }
        if self.value_decimals > 6 {
            return bad(format!("value_decimals {} exceeds 6", self.value_decimals));
        }
        if w.pie > 0.0 && round_to(self.value_range.0, self.value_decimals) <= 0.0 {
            return bad("pie charts need strictly positive values after rounding".to_string());
        }
        if self.col_header_pool.len() < self.cols.1 {
            return bad(format!(
                "column header pool has {} entries but up to {} are drawn",
                self.col_header_pool.len(),
                self.cols.1
            ));
        }
        let max_rows = self.rows.1.max(if w.pie > 0.0 { 2 } else { 0 });
        if self.row_header_pool.len() < max_rows {
            return bad(format!(
                "row header pool has {} entries but up to {} are drawn",
                self.row_header_pool.len(),
                max_rows
            ));
        }
        if !(0.0..=1.0).contains(&self.vertical_weight) {
            return bad(format!("vertical_weight {} outside [0, 1]", self.vertical_weight));
        }
        Ok(())
    }
}

fn round_to(v: f64, decimals: u32) -> f64 {
    let factor = 10f64.powi(decimals as i32);
    (v * factor).round() / factor
}

fn sample_distinct(pool: &[String], k: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut idx: Vec<usize> = (0..pool.len()).collect();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.gen_range(i..idx.len());
        idx.swap(i, j);
        out.push(pool[idx[i]].clone());
    }
    out
}

/// Draws a table and its chart-type tag from `config` under `seed`. Identical
/// inputs produce identical tables on every platform.
pub fn generate_random_table(config: &TableGenConfig, seed: u64) -> Result<(Table, ChartType), TableError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_with_rng(config, &mut rng)
}

pub(crate) fn generate_with_rng(
    config: &TableGenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Table, ChartType), TableError> {
    let w = &config.chart_weights;
    let x = rng.gen::<f64>() * (w.bar + w.line + w.pie);
    let chart_type = if x < w.bar {
        ChartType::Bar
    } else if x < w.bar + w.line {
        ChartType::Line
    } else {
        ChartType::Pie
    };

    let (n_rows, n_cols) = match chart_type {
        ChartType::Pie => {
            let lo = config.rows.0.max(2);
            let hi = config.rows.1.max(2);
            (rng.gen_range(lo..=hi), 1)
        }
        _ => (
            rng.gen_range(config.rows.0..=config.rows.1),
            rng.gen_range(config.cols.0..=config.cols.1),
        ),
    };

    let col_headers = sample_distinct(&config.col_header_pool, n_cols, rng);
    let row_headers = sample_distinct(&config.row_header_pool, n_rows, rng);
    let (lo, hi) = config.value_range;
    let values: Vec<Vec<Cell>> = (0..n_rows)
        .map(|_| {
            (0..n_cols)
                .map(|_| Cell::Num(round_to(lo + rng.gen::<f64>() * (hi - lo), config.value_decimals)))
                .collect()
        })
        .collect();

    // Titles never enter the flat grammar, so generated tables stay untitled;
    // chart synthesis draws its decorative title text separately.
    let table = Table::new(col_headers, row_headers, values, None)?;
    Ok((table, chart_type))
}

/// One discrepancy found by [`table_close`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum CloseIssue {
    Shape { a_rows: usize, a_cols: usize, b_rows: usize, b_cols: usize },
    ColHeader { index: usize, a: String, b: String },
    RowHeader { index: usize, a: String, b: String },
    CellType { row: usize, col: usize },
    CellText { row: usize, col: usize, a: String, b: String },
    CellNumeric { row: usize, col: usize, a: f64, b: f64, allowed: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct CloseReport {
    pub ok: bool,
    pub issues: Vec<CloseIssue>,
}

/// Compares `a` against reference `b`: shapes and headers must match exactly,
/// numeric cells satisfy `|a - b| <= rel_tol * |b|` (a zero reference demands
/// an exact zero), text cells compare exactly.
pub fn table_close(a: &Table, b: &Table, rel_tol: f64) -> Result<CloseReport, TableError> {
    if !rel_tol.is_finite() || rel_tol < 0.0 {
        return Err(TableError::InvalidTolerance(rel_tol));
    }
    let mut issues = Vec::new();
    if a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        issues.push(CloseIssue::Shape {
            a_rows: a.n_rows(),
            a_cols: a.n_cols(),
            b_rows: b.n_rows(),
            b_cols: b.n_cols(),
        });
        return Ok(CloseReport { ok: false, issues });
    }
    for (index, (ha, hb)) in a.col_headers().iter().zip(b.col_headers()).enumerate() {
        if ha != hb {
            issues.push(CloseIssue::ColHeader { index, a: ha.clone(), b: hb.clone() });
        }
    }
    for (index, (ha, hb)) in a.row_headers().iter().zip(b.row_headers()).enumerate() {
        if ha != hb {
            issues.push(CloseIssue::RowHeader { index, a: ha.clone(), b: hb.clone() });
        }
    }
    for row in 0..a.n_rows() {
        for col in 0..a.n_cols() {
            match (a.cell(row, col), b.cell(row, col)) {
                (Cell::Num(x), Cell::Num(y)) => {
                    let allowed = rel_tol * y.abs();
                    let close = if *y == 0.0 { *x == 0.0 } else { (x - y).abs() <= allowed };
                    if !close {
                        issues.push(CloseIssue::CellNumeric { row, col, a: *x, b: *y, allowed });
                    }
                }
                (Cell::Text(x), Cell::Text(y)) => {
                    if x != y {
                        issues.push(CloseIssue::CellText { row, col, a: x.clone(), b: y.clone() });
                    }
                }
                _ => issues.push(CloseIssue::CellType { row, col }),
            }
        }
    }
    Ok(CloseReport { ok: issues.is_empty(), issues })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_table() -> Table {
        Table::new(
            vec!["Year".into(), "GDP".into()],
            vec!["India".into()],
            vec![vec![Cell::Num(2020.0), Cell::Num(1.18)]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn flatten_matches_grammar() {
        let flat = flatten_table(&demo_table(), "table parse:");
        assert_eq!(flat.text, "table parse: table: c: Year | GDP r: India : 2020 | 1.18");
        assert_eq!(flat.prefix, "table parse:");
    }

    #[test]
    fn parse_inverts_flatten() {
        let t = demo_table();
        let flat = flatten_table(&t, "table parse:");
        assert_eq!(parse_flat_table(&flat).unwrap(), t);
    }

    #[test]
    fn separator_characters_round_trip() {
        let t = Table::new(
            vec!["a|b".into(), "x: y".into(), "p\\q".into()],
            vec!["r".into(), "r: s".into()],
            vec![
                vec![Cell::Text("v|1".into()), Cell::Num(5.0), Cell::Text(" c : d ".into())],
                vec![Cell::Text("".into()), Cell::Text("\\".into()), Cell::Num(-0.5)],
            ],
            None,
        )
        .unwrap();
        let flat = flatten_table(&t, "summarize:");
        assert_eq!(parse_flat_table(&flat).unwrap(), t);
    }

    #[test]
    fn multi_row_flatten_layout() {
        let t = Table::new(
            vec!["A".into()],
            vec!["r1".into(), "r2".into()],
            vec![vec![Cell::Num(1.0)], vec![Cell::Num(2.0)]],
            None,
        )
        .unwrap();
        let flat = flatten_table(&t, "p:");
        assert_eq!(flat.text, "p: table: c: A r: r1 : 1 r: r2 : 2");
    }

    #[test]
    fn missing_row_marker_reports_offset() {
        let flat = FlatTable { text: "p: table: c: A | B".into(), prefix: "p:".into() };
        let err = parse_flat_table(&flat).unwrap_err();
        assert_eq!(err.offset, flat.text.len());
        assert!(err.message.contains("r:"), "{}", err.message);
    }

    #[test]
    fn invalid_escape_reports_offset() {
        let flat = FlatTable { text: "p: table: c: A\\z r: r : 1".into(), prefix: "p:".into() };
        let err = parse_flat_table(&flat).unwrap_err();
        assert_eq!(&flat.text[err.offset..err.offset + 1], "z");
    }

    #[test]
    fn wrong_prefix_rejected() {
        let flat = FlatTable { text: "q: table: c: A r: r : 1".into(), prefix: "p:".into() };
        assert_eq!(parse_flat_table(&flat).unwrap_err().offset, 0);
    }

    #[test]
    fn numeric_classification_is_canonical() {
        assert_eq!(canonical_numeric("2020"), Some(2020.0));
        assert_eq!(canonical_numeric("1.18"), Some(1.18));
        assert_eq!(canonical_numeric("-0.5"), Some(-0.5));
        // Non-canonical spellings survive as text.
        assert_eq!(canonical_numeric("25.0"), None);
        assert_eq!(canonical_numeric("+5"), None);
        assert_eq!(canonical_numeric("1e3"), None);
        assert_eq!(canonical_numeric("NaN"), None);
        assert_eq!(canonical_numeric("inf"), None);
    }

    #[test]
    fn non_canonical_numeric_text_round_trips() {
        let t = Table::new(
            vec!["A".into()],
            vec!["r".into()],
            vec![vec![Cell::Text("25.0".into())]],
            None,
        )
        .unwrap();
        assert_eq!(t.cell(0, 0), &Cell::Text("25.0".into()));
        let flat = flatten_table(&t, "p:");
        assert_eq!(parse_flat_table(&flat).unwrap(), t);
    }

    #[test]
    fn canonical_numeric_text_normalizes_to_num() {
        let t = Table::new(
            vec!["A".into()],
            vec!["r".into()],
            vec![vec![Cell::Text("25".into())]],
            None,
        )
        .unwrap();
        assert_eq!(t.cell(0, 0), &Cell::Num(25.0));
    }

    #[test]
    fn validation_rejects_bad_tables() {
        assert!(matches!(
            Table::new(vec![], vec!["r".into()], vec![vec![]], None),
            Err(TableError::NoColumns)
        ));
        assert!(matches!(
            Table::new(vec!["A".into()], vec![], vec![], None),
            Err(TableError::NoRows)
        ));
        assert!(matches!(
            Table::new(
                vec!["A".into(), "A".into()],
                vec!["r".into()],
                vec![vec![Cell::Num(1.0), Cell::Num(2.0)]],
                None
            ),
            Err(TableError::DuplicateHeader { .. })
        ));
        assert!(matches!(
            Table::new(
                vec!["A".into(), "B".into()],
                vec!["r".into()],
                vec![vec![Cell::Num(1.0)]],
                None
            ),
            Err(TableError::RaggedRow { .. })
        ));
        assert!(matches!(
            Table::new(
                vec!["A".into()],
                vec!["r".into()],
                vec![vec![Cell::Num(f64::INFINITY)]],
                None
            ),
            Err(TableError::NonFiniteCell { .. })
        ));
    }

    #[test]
    fn mix64_scrambles_and_is_stable() {
        // Zero is the finalizer's only fixed point; everything else scrambles.
        assert_ne!(mix64(1), 1);
        assert_eq!(mix64(42), mix64(42));
        assert_ne!(sample_seed(7, 0), sample_seed(7, 1));
        // Seeds must be order-independent functions of (global, index).
        assert_eq!(sample_seed(7, 3), sample_seed(7, 3));
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = TableGenConfig::default();
        let a = generate_random_table(&cfg, 99).unwrap();
        let b = generate_random_table(&cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_random_table(&cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn chart_type_mix_follows_default_weights() {
        let cfg = TableGenConfig::default();
        let n = 10_000;
        let mut counts = [0usize; 3];
        for i in 0..n {
            let (_, ct) = generate_random_table(&cfg, sample_seed(11, i)).unwrap();
            counts[match ct {
                ChartType::Bar => 0,
                ChartType::Line => 1,
                ChartType::Pie => 2,
            }] += 1;
        }
        let frac = |c: usize| c as f64 / n as f64;
        assert!((frac(counts[0]) - 0.7816).abs() < 0.02, "bar {}", frac(counts[0]));
        assert!((frac(counts[1]) - 0.1780).abs() < 0.02, "line {}", frac(counts[1]));
        assert!((frac(counts[2]) - 0.0404).abs() < 0.015, "pie {}", frac(counts[2]));
    }

    #[test]
    fn pie_tables_have_one_positive_column() {
        let cfg = TableGenConfig::default();
        let mut seen = 0;
        for i in 0..2000 {
            let (t, ct) = generate_random_table(&cfg, sample_seed(5, i)).unwrap();
            if ct != ChartType::Pie {
                continue;
            }
            seen += 1;
            assert_eq!(t.n_cols(), 1);
            assert!(t.n_rows() >= 2);
            for row in t.values() {
                assert!(row[0].as_num().unwrap() > 0.0);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn generated_tables_round_trip() {
        let cfg = TableGenConfig::default();
        for i in 0..1000 {
            let (t, _) = generate_random_table(&cfg, sample_seed(3, i)).unwrap();
            let flat = flatten_table(&t, "table parse:");
            assert_eq!(parse_flat_table(&flat).unwrap(), t, "sample {i}");
        }
    }

    #[test]
    fn close_is_reflexive_at_zero_tolerance() {
        let t = demo_table();
        assert!(table_close(&t, &t, 0.0).unwrap().ok);
    }

    #[test]
    fn close_respects_relative_tolerance() {
        let mk = |v: f64| {
            Table::new(
                vec!["A".into()],
                vec!["r".into()],
                vec![vec![Cell::Num(v)]],
                None,
            )
            .unwrap()
        };
        let gold = mk(100.0);
        assert!(table_close(&mk(105.0), &gold, 0.05).unwrap().ok);
        assert!(!table_close(&mk(105.1), &gold, 0.05).unwrap().ok);
        // Wider tolerance keeps every previously-close pair close.
        assert!(table_close(&mk(105.0), &gold, 0.10).unwrap().ok);
        // A zero reference requires an exact zero.
        let zero = mk(0.0);
        assert!(!table_close(&mk(1e-9), &zero, 0.05).unwrap().ok);
        assert!(table_close(&mk(0.0), &zero, 0.05).unwrap().ok);
    }

    #[test]
    fn close_reports_shape_mismatch_without_error() {
        let a = demo_table();
        let b = Table::new(
            vec!["Year".into()],
            vec!["India".into()],
            vec![vec![Cell::Num(2020.0)]],
            None,
        )
        .unwrap();
        let report = table_close(&a, &b, 0.05).unwrap();
        assert!(!report.ok);
        assert!(matches!(report.issues[0], CloseIssue::Shape { .. }));
    }

    #[test]
    fn close_rejects_bad_tolerance() {
        let t = demo_table();
        assert!(table_close(&t, &t, -0.1).is_err());
        assert!(table_close(&t, &t, f64::NAN).is_err());
    }

    #[test]
    fn cellref_order_matches_flatten_order() {
        let mut refs = vec![
            CellRef::Value(1, 0),
            CellRef::RowHeader(0),
            CellRef::ColHeader(1),
            CellRef::Value(0, 1),
            CellRef::ColHeader(0),
            CellRef::RowHeader(1),
        ];
        refs.sort();
        assert_eq!(
            refs,
            vec![
                CellRef::ColHeader(0),
                CellRef::ColHeader(1),
                CellRef::RowHeader(0),
                CellRef::Value(0, 1),
                CellRef::RowHeader(1),
                CellRef::Value(1, 0),
            ]
        );
    }
}
