//! Subcommand implementations. Each takes the loaded pipeline config plus
//! its own flags, prints a short human summary to stdout, and writes
//! machine-readable JSON/JSONL artifacts.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use chartab_core::manifest::{read_corpus, read_jsonl as read_manifest_records, ChartSampleRecord};
use chartab_core::metrics::relaxed_accuracy_set_with;
use chartab_core::objectives::MASKED_PAIR_SCHEMA;
use chartab_core::stc::SentinelVocab;
use chartab_core::{
    bleu4, build_regions, content_selection, encode_with_copy, extract_ocr, flatten_table,
    generate_extractive_qa, mask_headers, mask_values, match_ocr_to_cells, mix64, parse_chart,
    sample_seed, synth_corpus, NoiseModel, Objective, PretrainRecord, Table, DEFAULT_PREFIX,
};
use chartab_model::{
    build_micro_corpus, copy_accuracy, save_checkpoint, train_micro, MicroModelParams, ModelError,
};
use serde::{Deserialize, Serialize};

use crate::config::{check_rate, ObjectiveChoice, PipelineConfig};
use crate::harness::{roundtrip_report, RoundtripOptions, RoundtripReport, TypeFidelity};
use crate::records::{
    expect_schema, read_jsonl, write_json_pretty, write_jsonl, MatchStats, StcRecord, STC_SCHEMA,
};
use crate::{runtime, validation, CliError};

fn import_error(e: chartab_core::manifest::ImportError) -> CliError {
    use chartab_core::manifest::ImportError;
    match e {
        ImportError::Io { .. } => runtime(e),
        ImportError::Invalid { .. } => validation(e),
    }
}

/// Renders `n` samples under the configured chart mix and writes
/// `manifest.jsonl` plus `images/` into `out`. Refuses to clobber an
/// existing manifest unless `force` is set.
pub fn cmd_synth(cfg: &PipelineConfig, n: u64, out: &Path, force: bool) -> Result<(), CliError> {
    let manifest = out.join("manifest.jsonl");
    if manifest.exists() && !force {
        return Err(CliError::Validation(format!(
            "{} already exists; pass --force to overwrite",
            manifest.display()
        )));
    }
    let stats = synth_corpus(&cfg.table_gen, &cfg.chart, n, cfg.seed, out).map_err(|e| {
        use chartab_core::SynthError;
        match e {
            SynthError::SampleIo { .. } => runtime(e),
            other => validation(other),
        }
    })?;
    println!(
        "synth: wrote {} samples to {} (bar {}, line {}, pie {})",
        stats.n,
        stats.manifest_path.display(),
        stats.by_type[0],
        stats.by_type[1],
        stats.by_type[2]
    );
    Ok(())
}

/// Validates an external manifest, echoes its row count and chart-type mix,
/// and optionally rewrites it in normalized form.
pub fn cmd_import(manifest: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let records: Vec<ChartSampleRecord> =
        read_manifest_records(manifest).map_err(import_error)?;
    for (i, record) in records.iter().enumerate() {
        record.validate().map_err(|message| {
            CliError::Validation(format!("{}:{}: {message}", manifest.display(), i + 1))
        })?;
    }
    let mut by_type: BTreeMap<String, u64> = BTreeMap::new();
    for r in &records {
        *by_type.entry(r.chart_type.to_string()).or_default() += 1;
    }
    let mix = by_type
        .iter()
        .map(|(t, n)| format!("{t} {n}"))
        .collect::<Vec<_>>()
        .join(", ");
    println!("import: {} valid rows ({mix})", records.len());
    if let Some(out) = out {
        write_jsonl(out, &records)?;
        println!("import: normalized copy written to {}", out.display());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct PreprocessSummary {
    schema: &'static str,
    samples: usize,
    header_match_rate: f64,
    cell_match_rate: f64,
    samples_fully_matched: usize,
}

/// Reads a manifest, extracts (optionally noisy) OCR, sentinel-encodes every
/// sample, and writes one `stc/1` record per line. Prints match-rate stats;
/// on a noise-free corpus the header match rate is 100%.
pub fn cmd_preprocess(
    cfg: &PipelineConfig,
    manifest: &Path,
    out: &Path,
    ocr_noise: Option<f64>,
) -> Result<(), CliError> {
    let noise = noise_override(cfg, ocr_noise)?;
    let samples = read_corpus(manifest).map_err(import_error)?;
    let vocab = SentinelVocab::new(cfg.objectives.max_ocr);
    let mut records = Vec::with_capacity(samples.len());
    let (mut matched_headers, mut total_headers) = (0usize, 0usize);
    let (mut matched_cells, mut total_cells) = (0usize, 0usize);
    let mut fully_matched = 0usize;
    for (index, sample) in samples.iter().enumerate() {
        let base = sample_seed(cfg.seed, index as u64);
        let tokens = extract_ocr(&sample.annotation, noise.as_ref(), mix64(base ^ 1))
            .map_err(validation)?;
        let matching = match_ocr_to_cells(&sample.table, &tokens);
        let enc = encode_with_copy(&sample.table, DEFAULT_PREFIX, &tokens, &matching, &vocab)
            .map_err(validation)?;
        let regions = build_regions(&sample.annotation, cfg.model.d_region, mix64(base ^ 3))
            .map_err(validation)?;

        let headers = sample.table.header_refs();
        let mh = headers.iter().filter(|r| enc.substituted.contains_key(r)).count();
        let mc = matching.pairs.len();
        let tc = mc + matching.unmatched_cells.len();
        matched_headers += mh;
        total_headers += headers.len();
        matched_cells += mc;
        total_cells += tc;
        fully_matched += usize::from(mh == headers.len());

        records.push(StcRecord::from_encoding(
            &sample.id,
            index as u64,
            sample.chart_type,
            &enc,
            regions,
            MatchStats {
                matched_headers: mh,
                total_headers: headers.len(),
                matched_cells: mc,
                total_cells: tc,
            },
        ));
    }
    write_jsonl(out, &records)?;
    let summary = PreprocessSummary {
        schema: "stcstats/1",
        samples: records.len(),
        header_match_rate: ratio_of(matched_headers, total_headers),
        cell_match_rate: ratio_of(matched_cells, total_cells),
        samples_fully_matched: fully_matched,
    };
    println!(
        "preprocess: {} records -> {}; header match {:.1}% ({} of {} samples fully matched), cell match {:.1}%",
        summary.samples,
        out.display(),
        100.0 * summary.header_match_rate,
        summary.samples_fully_matched,
        records.len(),
        100.0 * summary.cell_match_rate,
    );
    Ok(())
}

fn ratio_of(num: usize, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    num as f64 / den as f64
}

/// `--ocr-noise R` overrides the configured model's character-substitution
/// rate; without the flag the `[ocr_noise]` section applies as-is.
fn noise_override(
    cfg: &PipelineConfig,
    ocr_noise: Option<f64>,
) -> Result<Option<NoiseModel>, CliError> {
    let model = match ocr_noise {
        Some(rate) => {
            let mut m = cfg.ocr_noise.clone();
            m.char_sub_rate = rate;
            m.validate().map_err(validation)?;
            m
        }
        None => cfg.ocr_noise.clone(),
    };
    Ok(Some(model).filter(|m| !m.is_identity()))
}

/// Applies the masking objective to preprocessed records and writes
/// model-ready `maskedpair/1` lines. Seeds are derived from each record's
/// manifest index, so the output matches a single-pass pipeline.
pub fn cmd_mask(
    cfg: &PipelineConfig,
    records_path: &Path,
    out: &Path,
    objective: Option<ObjectiveChoice>,
    rate_flag: Option<f64>,
) -> Result<(), CliError> {
    let rate = rate_flag.unwrap_or(cfg.objectives.rate);
    check_rate(rate)?;
    let selector = objective.unwrap_or(cfg.objectives.objective).selector();

    let records: Vec<StcRecord> = read_jsonl(records_path)?;
    let mut out_records = Vec::with_capacity(records.len());
    let (mut masked_total, mut candidates_total) = (0u64, 0u64);
    let mut purity_violations = 0u64;
    for (lineno, rec) in records.iter().enumerate() {
        expect_schema(records_path, lineno, &rec.schema, STC_SCHEMA)?;
        let enc = rec.to_encoding();
        let base = sample_seed(cfg.seed, rec.index);
        let objective = selector.pick(rec.index, base);
        let pair = match objective {
            Objective::MaskedHeader => mask_headers(&enc, rate, mix64(base ^ 2)),
            Objective::MaskedValue => mask_values(&enc, rate, mix64(base ^ 2)),
        }
        .map_err(|e| CliError::Validation(format!("{}:{}: {e}", records_path.display(), lineno + 1)))?;

        let candidates = match objective {
            Objective::MaskedHeader => enc.table.header_refs(),
            Objective::MaskedValue => enc.table.numeric_value_refs(),
        };
        masked_total += pair.masked.len() as u64;
        candidates_total += candidates.len() as u64;
        purity_violations +=
            pair.masked.iter().filter(|r| !candidates.contains(r)).count() as u64;

        out_records.push(PretrainRecord {
            schema: MASKED_PAIR_SCHEMA.to_string(),
            id: rec.id.clone(),
            objective,
            input_tokens: pair.input.split_whitespace().map(str::to_string).collect(),
            target_tokens: pair.target.split_whitespace().map(str::to_string).collect(),
            regions: rec.regions.clone(),
            ocr: enc.input,
            masked: pair.masked,
        });
    }
    write_jsonl(out, &out_records)?;
    println!(
        "mask: {} records -> {}; aggregate mask rate {:.1}% ({masked_total}/{candidates_total} candidate cells), purity violations {purity_violations}",
        out_records.len(),
        out.display(),
        100.0 * ratio_of(masked_total as usize, candidates_total as usize),
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct ParsedLine {
    id: String,
    table: Table,
}

#[derive(Debug, Serialize)]
struct ParseLine {
    id: String,
    chart_type: String,
    parsed: bool,
    error: Option<String>,
    axis_residual: Option<f64>,
    value_per_pixel: Option<f64>,
    ticks_used: usize,
    warnings: Vec<String>,
    flags: Vec<String>,
    headers_exact: bool,
    within_bound: bool,
}

#[derive(Debug, Serialize)]
struct ParseSummary {
    schema: &'static str,
    samples: usize,
    overall: TypeFidelity,
    by_type: BTreeMap<String, TypeFidelity>,
}

/// Geometrically parses every manifest sample back into a table, compares
/// against the stored truth, and writes `parsed.jsonl`, a per-sample
/// `report.jsonl` (residuals, flags), and `summary.json` under `out`.
pub fn cmd_parse(
    cfg: &PipelineConfig,
    manifest: &Path,
    out: &Path,
    ocr_noise: Option<f64>,
) -> Result<(), CliError> {
    let noise = noise_override(cfg, ocr_noise)?;
    let samples = read_corpus(manifest).map_err(import_error)?;
    std::fs::create_dir_all(out).map_err(runtime)?;

    let mut parsed_lines = Vec::new();
    let mut report_lines = Vec::with_capacity(samples.len());
    let mut overall = TypeFidelity::default();
    let mut by_type: BTreeMap<String, TypeFidelity> = BTreeMap::new();
    for (index, sample) in samples.iter().enumerate() {
        let base = sample_seed(cfg.seed, index as u64);
        let tokens = extract_ocr(&sample.annotation, noise.as_ref(), mix64(base ^ 1))
            .map_err(validation)?;
        let truth = &sample.table;
        let bucket = by_type.entry(sample.chart_type.to_string()).or_default();
        overall.n += 1;
        bucket.n += 1;
        match parse_chart(&sample.annotation, &tokens) {
            Err(e) => report_lines.push(ParseLine {
                id: sample.id.clone(),
                chart_type: sample.chart_type.to_string(),
                parsed: false,
                error: Some(e.to_string()),
                axis_residual: None,
                value_per_pixel: None,
                ticks_used: 0,
                warnings: Vec::new(),
                flags: Vec::new(),
                headers_exact: false,
                within_bound: false,
            }),
            Ok((table, report)) => {
                let headers_exact = table.col_headers() == truth.col_headers()
                    && table.row_headers() == truth.row_headers();
                let within_bound = cells_within_bound(
                    &table,
                    truth,
                    sample.chart_type,
                    report.value_per_pixel,
                );
                overall.parsed += 1;
                overall.headers_exact += u64::from(headers_exact);
                overall.within_bound += u64::from(within_bound);
                let bucket = by_type.get_mut(&sample.chart_type.to_string()).unwrap();
                bucket.parsed += 1;
                bucket.headers_exact += u64::from(headers_exact);
                bucket.within_bound += u64::from(within_bound);
                report_lines.push(ParseLine {
                    id: sample.id.clone(),
                    chart_type: sample.chart_type.to_string(),
                    parsed: true,
                    error: None,
                    axis_residual: report.axis_residual,
                    value_per_pixel: report.value_per_pixel,
                    ticks_used: report.ticks_used,
                    warnings: report.warnings.clone(),
                    flags: report.flags.clone(),
                    headers_exact,
                    within_bound,
                });
                parsed_lines.push(ParsedLine { id: sample.id.clone(), table });
            }
        }
    }
    write_jsonl(&out.join("parsed.jsonl"), &parsed_lines)?;
    write_jsonl(&out.join("report.jsonl"), &report_lines)?;
    let summary = ParseSummary {
        schema: "parsereport/1",
        samples: samples.len(),
        overall,
        by_type,
    };
    write_json_pretty(&out.join("summary.json"), &summary)?;
    println!(
        "parse: {}/{} parsed, {}/{} headers exact, {}/{} within the quantization bound -> {}",
        overall.parsed,
        overall.n,
        overall.headers_exact,
        overall.n,
        overall.within_bound,
        overall.n,
        out.display(),
    );
    Ok(())
}

/// True when every numeric cell of `table` is within one pixel's worth of
/// value of `truth` (pie charts: label-exact) and non-numeric cells match.
fn cells_within_bound(
    table: &Table,
    truth: &Table,
    chart_type: chartab_core::ChartType,
    value_per_pixel: Option<f64>,
) -> bool {
    if table.n_rows() != truth.n_rows() || table.n_cols() != truth.n_cols() {
        return false;
    }
    let tol = match chart_type {
        chartab_core::ChartType::Pie => 1e-9,
        _ => match value_per_pixel {
            Some(vpp) => vpp * 1.01,
            None => return false,
        },
    };
    for i in 0..truth.n_rows() {
        for j in 0..truth.n_cols() {
            match (table.cell(i, j).as_num(), truth.cell(i, j).as_num()) {
                (Some(a), Some(b)) => {
                    if (a - b).abs() > tol {
                        return false;
                    }
                }
                (a, b) => {
                    if a != b || table.cell(i, j).surface() != truth.cell(i, j).surface() {
                        return false;
                    }
                }
            }
        }
    }
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredLine {
    id: String,
    pred: String,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    schema: &'static str,
    n: usize,
    relaxed_accuracy: f64,
    bleu4: f64,
    content_selection: f64,
    strict_case: bool,
}

/// Scores `{id, pred}` lines against the manifest's flattened truth tables:
/// relaxed accuracy + BLEU-4 against the flat serialization, and content
/// selection against the table records themselves.
pub fn cmd_eval(
    cfg: &PipelineConfig,
    pred_path: &Path,
    manifest: &Path,
    out: Option<&Path>,
    strict_case_flag: bool,
) -> Result<(), CliError> {
    let strict_case = strict_case_flag || cfg.eval.strict_case;
    let samples = read_corpus(manifest).map_err(import_error)?;
    let by_id: HashMap<&str, &Table> =
        samples.iter().map(|s| (s.id.as_str(), &s.table)).collect();
    let preds: Vec<PredLine> = read_jsonl(pred_path)?;
    if preds.is_empty() {
        return Err(CliError::Validation(format!("{}: no predictions", pred_path.display())));
    }

    let mut golds = Vec::with_capacity(preds.len());
    let (mut bleu_sum, mut cs_sum) = (0.0, 0.0);
    for (lineno, p) in preds.iter().enumerate() {
        let table = by_id.get(p.id.as_str()).ok_or_else(|| {
            CliError::Validation(format!(
                "{}:{}: id {:?} not in manifest",
                pred_path.display(),
                lineno + 1,
                p.id
            ))
        })?;
        let gold = flatten_table(table, DEFAULT_PREFIX).text;
        bleu_sum += bleu4(&p.pred, &[gold.as_str()]).map_err(validation)?;
        cs_sum += content_selection(&p.pred, table).map_err(validation)?;
        golds.push(gold);
    }
    let pred_texts: Vec<&str> = preds.iter().map(|p| p.pred.as_str()).collect();
    let relaxed =
        relaxed_accuracy_set_with(&pred_texts, &golds, strict_case).map_err(validation)?;
    let report = EvalReport {
        schema: "evalreport/1",
        n: preds.len(),
        relaxed_accuracy: relaxed,
        bleu4: bleu_sum / preds.len() as f64,
        content_selection: cs_sum / preds.len() as f64,
        strict_case,
    };
    println!(
        "eval: n={} relaxed {:.4}, bleu4 {:.4}, content selection {:.4}",
        report.n, report.relaxed_accuracy, report.bleu4, report.content_selection
    );
    if let Some(out) = out {
        write_json_pretty(out, &report)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct QaLine {
    id: String,
    question: String,
    answer: String,
    row: usize,
    col: usize,
}

/// Draws extractive question/answer pairs from each manifest table.
pub fn cmd_qa_gen(
    cfg: &PipelineConfig,
    manifest: &Path,
    out: &Path,
    per_sample: Option<usize>,
) -> Result<(), CliError> {
    let per_sample = per_sample.unwrap_or(cfg.eval.qa_per_sample);
    if per_sample == 0 {
        return Err(CliError::Validation("--per-sample must be positive".into()));
    }
    let samples = read_corpus(manifest).map_err(import_error)?;
    let mut lines = Vec::new();
    for (index, sample) in samples.iter().enumerate() {
        let k = per_sample.min(sample.table.n_rows() * sample.table.n_cols());
        let base = sample_seed(cfg.seed, index as u64);
        let questions =
            generate_extractive_qa(&sample.table, k, mix64(base ^ 4)).map_err(validation)?;
        for q in questions {
            lines.push(QaLine {
                id: sample.id.clone(),
                question: q.question,
                answer: q.answer,
                row: q.row,
                col: q.col,
            });
        }
    }
    write_jsonl(out, &lines)?;
    println!("qa-gen: {} questions over {} samples -> {}", lines.len(), samples.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct CopySection {
    slots: usize,
    correct: usize,
    fraction: f64,
}

#[derive(Debug, Serialize)]
struct TrainReportJson {
    schema: &'static str,
    steps: usize,
    lr: f64,
    momentum: f64,
    final_lr_fraction: f64,
    seed: u64,
    n_train: usize,
    n_heldout: usize,
    vocab_size: usize,
    ln_vocab: f64,
    initial_loss: f64,
    final_loss: f64,
    loss_ratio: f64,
    train_copy: CopySection,
    heldout_copy: CopySection,
    elapsed_s: f64,
    step_losses: Vec<f64>,
}

fn model_error(e: ModelError) -> CliError {
    match e {
        ModelError::Config(_) => validation(e),
        other => runtime(other),
    }
}

/// Builds the fixed-shape copy corpus, trains the micro encoder–decoder on
/// masked-header reconstruction, reports loss and held-out copy accuracy,
/// and writes a `microckpt/1` checkpoint plus `train_report.json`.
pub fn cmd_train_micro(
    cfg: &PipelineConfig,
    steps: Option<usize>,
    lr: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let start = Instant::now();
    let mut opts = cfg.model.train_options(cfg.seed);
    if let Some(steps) = steps {
        opts.steps = steps;
    }
    if let Some(lr) = lr {
        opts.lr = lr;
    }
    let corpus =
        build_micro_corpus(cfg.model.n_train, cfg.model.n_heldout, cfg.seed).map_err(runtime)?;
    let model_cfg = cfg.model.model_config(corpus.vocab.len(), corpus.vocab.n_ocr());
    let mut params = MicroModelParams::init(&model_cfg, cfg.seed).map_err(model_error)?;
    let pairs: Vec<_> =
        corpus.train.iter().map(|ex| (ex.input.clone(), ex.target.clone())).collect();
    println!(
        "train-micro: {} train / {} held-out, vocab {}, {} steps at lr {}",
        corpus.train.len(),
        corpus.heldout.len(),
        corpus.vocab.len(),
        opts.steps,
        opts.lr
    );
    let report = train_micro(&mut params, &pairs, &opts).map_err(model_error)?;
    let train_copy = copy_accuracy(&params, &corpus.train, &corpus.vocab).map_err(runtime)?;
    let heldout_copy = copy_accuracy(&params, &corpus.heldout, &corpus.vocab).map_err(runtime)?;

    let ckpt_dir = out.join("checkpoint");
    save_checkpoint(&params, &corpus.vocab, &ckpt_dir).map_err(runtime)?;
    let ln_vocab = (corpus.vocab.len() as f64).ln();
    let json = TrainReportJson {
        schema: "trainreport/1",
        steps: opts.steps,
        lr: opts.lr,
        momentum: opts.momentum,
        final_lr_fraction: opts.final_lr_fraction,
        seed: cfg.seed,
        n_train: corpus.train.len(),
        n_heldout: corpus.heldout.len(),
        vocab_size: corpus.vocab.len(),
        ln_vocab,
        initial_loss: report.initial_loss,
        final_loss: report.final_loss,
        loss_ratio: report.final_loss / report.initial_loss,
        train_copy: CopySection {
            slots: train_copy.slots,
            correct: train_copy.correct,
            fraction: train_copy.fraction(),
        },
        heldout_copy: CopySection {
            slots: heldout_copy.slots,
            correct: heldout_copy.correct,
            fraction: heldout_copy.fraction(),
        },
        elapsed_s: start.elapsed().as_secs_f64(),
        step_losses: report.step_losses,
    };
    write_json_pretty(&out.join("train_report.json"), &json)?;
    println!(
        "train-micro: initial loss {:.4} (ln V {:.4}), final {:.4} (ratio {:.3})",
        json.initial_loss, ln_vocab, json.final_loss, json.loss_ratio
    );
    println!(
        "train-micro: copy accuracy train {:.3}, held-out {:.3}; checkpoint -> {}",
        json.train_copy.fraction,
        json.heldout_copy.fraction,
        ckpt_dir.display()
    );
    Ok(())
}

/// Runs the in-memory synth → parse → QA round trip and writes the report.
pub fn cmd_roundtrip_report(
    cfg: &PipelineConfig,
    n: u64,
    ocr_noise: Option<f64>,
    qa_per_sample: Option<usize>,
    out: Option<&Path>,
) -> Result<RoundtripReport, CliError> {
    let opts = RoundtripOptions {
        table_cfg: cfg.table_gen.clone(),
        spec_cfg: cfg.chart.clone(),
        n,
        seed: cfg.seed,
        noise: noise_override(cfg, ocr_noise)?,
        qa_per_sample: qa_per_sample.unwrap_or(cfg.eval.qa_per_sample),
        strict_case: cfg.eval.strict_case,
    };
    if opts.n == 0 {
        return Err(CliError::Validation("--n must be positive".into()));
    }
    let report = roundtrip_report(&opts)?;
    println!(
        "roundtrip-report: n={} parsed {}/{}, headers exact {}/{}, within bound {}/{}, cell relaxed {:.4}",
        report.n,
        report.overall.parsed,
        report.overall.n,
        report.overall.headers_exact,
        report.overall.n,
        report.overall.within_bound,
        report.overall.n,
        report.cell_relaxed_accuracy,
    );
    println!(
        "roundtrip-report: qa {}/{} relaxed {:.4} (parse_failed {}, row_missing {}, col_missing {}, value_mismatch {})",
        report.qa.correct,
        report.qa.questions,
        report.qa.relaxed_accuracy,
        report.qa.errors.parse_failed,
        report.qa.errors.row_missing,
        report.qa.errors.col_missing,
        report.qa.errors.value_mismatch,
    );
    if let Some(out) = out {
        write_json_pretty(out, &report)?;
    }
    Ok(report)
}

/// Resolves the output root: explicit flag, then config `out_dir`, then cwd.
pub fn resolve_out(flag: Option<PathBuf>, cfg: &PipelineConfig, default: &str) -> PathBuf {
    flag.unwrap_or_else(|| {
        cfg.out_dir.clone().map(|d| d.join(default)).unwrap_or_else(|| PathBuf::from(default))
    })
}
