//! In-memory synth → OCR → geometric-parse → QA harness. Builds each sample
//! exactly as the corpus writer would (same per-index seeds), so fidelity
//! numbers here describe the on-disk pipeline without touching pixels.

use std::collections::BTreeMap;
use std::time::Instant;

use chartab_core::metrics::relaxed_accuracy_with;
use chartab_core::synth::compose_sample;
use chartab_core::{
    extract_ocr, generate_extractive_qa, mix64, parse_chart, sample_seed, ChartType, NoiseModel,
    SpecConfig, Table, TableGenConfig,
};
use serde::Serialize;

use crate::{runtime, CliError};

pub const ROUNDTRIP_SCHEMA: &str = "roundtrip/1";

#[derive(Debug, Clone)]
pub struct RoundtripOptions {
    pub table_cfg: TableGenConfig,
    pub spec_cfg: SpecConfig,
    pub n: u64,
    pub seed: u64,
    pub noise: Option<NoiseModel>,
    pub qa_per_sample: usize,
    pub strict_case: bool,
}

impl Default for RoundtripOptions {
    fn default() -> Self {
        RoundtripOptions {
            table_cfg: TableGenConfig::default(),
            spec_cfg: SpecConfig::default(),
            n: 500,
            seed: 0,
            noise: None,
            qa_per_sample: 3,
            strict_case: false,
        }
    }
}

/// Parse fidelity for one chart type (or the whole corpus).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct TypeFidelity {
    pub n: u64,
    /// Samples the geometric parser returned a table for.
    pub parsed: u64,
    /// Parsed samples whose headers all match the source exactly.
    pub headers_exact: u64,
    /// Parsed samples with every numeric cell inside the per-pixel
    /// quantization bound of the calibrated axis (pie: label-exact).
    pub within_bound: u64,
    /// All header + value cells of all samples, and how many of them the
    /// parsed table reproduces under relaxed (5%-tolerance) matching.
    pub cells: u64,
    pub cells_relaxed_ok: u64,
}

impl TypeFidelity {
    pub fn cell_accuracy(&self) -> f64 {
        if self.cells == 0 {
            return 0.0;
        }
        self.cells_relaxed_ok as f64 / self.cells as f64
    }
}

/// Why an extractive question was answered wrongly.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct QaBreakdown {
    /// The sample's chart failed to parse at all.
    pub parse_failed: u64,
    /// The question's row header is absent from the parsed table.
    pub row_missing: u64,
    /// The question's column header is absent from the parsed table.
    pub col_missing: u64,
    /// Cell found but its value missed the relaxed tolerance.
    pub value_mismatch: u64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct QaSection {
    pub questions: u64,
    pub correct: u64,
    pub relaxed_accuracy: f64,
    pub errors: QaBreakdown,
}

#[derive(Debug, Serialize)]
pub struct RoundtripReport {
    pub schema: String,
    pub n: u64,
    pub seed: u64,
    /// Noise model applied to the OCR stream, if any.
    pub noise: Option<NoiseModel>,
    pub overall: TypeFidelity,
    pub by_type: BTreeMap<String, TypeFidelity>,
    /// Relaxed accuracy over every header and value cell of the corpus.
    pub cell_relaxed_accuracy: f64,
    pub qa: QaSection,
    pub elapsed_s: f64,
}

/// Answers `question about truth table` by header lookup in the parsed
/// table; `None` distinguishes which side of the lookup failed.
fn answer_from_parsed(
    parsed: &Table,
    truth: &Table,
    row: usize,
    col: usize,
) -> Result<String, LookupMiss> {
    let row_name = &truth.row_headers()[row];
    let col_name = &truth.col_headers()[col];
    let ri = parsed
        .row_headers()
        .iter()
        .position(|h| h == row_name)
        .ok_or(LookupMiss::Row)?;
    let cj = parsed
        .col_headers()
        .iter()
        .position(|h| h == col_name)
        .ok_or(LookupMiss::Col)?;
    Ok(parsed.cell(ri, cj).surface())
}

enum LookupMiss {
    Row,
    Col,
}

pub fn roundtrip_report(opts: &RoundtripOptions) -> Result<RoundtripReport, CliError> {
    let start = Instant::now();
    let noise = opts.noise.as_ref().filter(|n| !n.is_identity());
    let mut overall = TypeFidelity::default();
    let mut by_type: BTreeMap<String, TypeFidelity> = BTreeMap::new();
    let mut qa = QaSection::default();

    for index in 0..opts.n {
        let (sample, _layout) =
            compose_sample(&opts.table_cfg, &opts.spec_cfg, index, opts.seed).map_err(runtime)?;
        let base = sample_seed(opts.seed, index);
        let tokens =
            extract_ocr(&sample.annotation, noise, mix64(base ^ 1)).map_err(runtime)?;
        let truth = &sample.table;
        let parsed = parse_chart(&sample.annotation, &tokens).ok();

        let bucket = by_type.entry(sample.chart_type.to_string()).or_default();
        for b in [&mut overall, bucket] {
            b.n += 1;
            b.cells += (truth.n_rows() * truth.n_cols() + truth.n_rows() + truth.n_cols()) as u64;
        }

        if let Some((table, report)) = &parsed {
            let headers_exact = table.col_headers() == truth.col_headers()
                && table.row_headers() == truth.row_headers();
            let tol = match sample.chart_type {
                ChartType::Pie => 1e-9,
                _ => report.value_per_pixel.unwrap_or(f64::INFINITY) * 1.01,
            };
            let shapes_match =
                table.n_rows() == truth.n_rows() && table.n_cols() == truth.n_cols();
            let mut within_bound = shapes_match
                && (sample.chart_type == ChartType::Pie || report.value_per_pixel.is_some());
            let mut relaxed_ok = 0u64;
            if shapes_match {
                for (p, t) in table.col_headers().iter().zip(truth.col_headers()) {
                    relaxed_ok += u64::from(relaxed_accuracy_with(p, t, opts.strict_case) == 1);
                }
                for (p, t) in table.row_headers().iter().zip(truth.row_headers()) {
                    relaxed_ok += u64::from(relaxed_accuracy_with(p, t, opts.strict_case) == 1);
                }
                for i in 0..truth.n_rows() {
                    for j in 0..truth.n_cols() {
                        let p = table.cell(i, j);
                        let t = truth.cell(i, j);
                        relaxed_ok += u64::from(
                            relaxed_accuracy_with(&p.surface(), &t.surface(), opts.strict_case)
                                == 1,
                        );
                        match (p.as_num(), t.as_num()) {
                            (Some(a), Some(b)) => {
                                if (a - b).abs() > tol {
                                    within_bound = false;
                                }
                            }
                            (a, b) => {
                                if a != b || p.surface() != t.surface() {
                                    within_bound = false;
                                }
                            }
                        }
                    }
                }
            } else {
                within_bound = false;
            }
            for b in [&mut overall, by_type.get_mut(&sample.chart_type.to_string()).unwrap()] {
                b.parsed += 1;
                b.headers_exact += u64::from(headers_exact);
                b.within_bound += u64::from(within_bound);
                b.cells_relaxed_ok += relaxed_ok;
            }
        }

        let k = opts.qa_per_sample.min(truth.n_rows() * truth.n_cols());
        if k == 0 {
            continue;
        }
        let questions =
            generate_extractive_qa(truth, k, mix64(base ^ 4)).map_err(runtime)?;
        for q in &questions {
            qa.questions += 1;
            match &parsed {
                None => qa.errors.parse_failed += 1,
                Some((table, _)) => match answer_from_parsed(table, truth, q.row, q.col) {
                    Err(LookupMiss::Row) => qa.errors.row_missing += 1,
                    Err(LookupMiss::Col) => qa.errors.col_missing += 1,
                    Ok(pred) => {
                        if relaxed_accuracy_with(&pred, &q.answer, opts.strict_case) == 1 {
                            qa.correct += 1;
                        } else {
                            qa.errors.value_mismatch += 1;
                        }
                    }
                },
            }
        }
    }

    if qa.questions > 0 {
        qa.relaxed_accuracy = qa.correct as f64 / qa.questions as f64;
    }
    Ok(RoundtripReport {
        schema: ROUNDTRIP_SCHEMA.to_string(),
        n: opts.n,
        seed: opts.seed,
        noise: noise.cloned(),
        cell_relaxed_accuracy: overall.cell_accuracy(),
        overall,
        by_type,
        qa,
        elapsed_s: start.elapsed().as_secs_f64(),
    })
}
