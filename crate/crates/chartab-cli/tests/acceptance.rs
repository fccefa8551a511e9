//! Desk-scale acceptance suite: every gate the pipeline promises, one test
//! (and one pass/fail line) each — corpus round-trip fidelity, extractive QA
//! under OCR noise, copy-codec identity, masking statistics, grammar
//! round-trips, gradient correctness, micro-training convergence, and the
//! metric anchors. Run with `--nocapture` to see the measured numbers.

use std::time::Instant;

use chartab_cli::harness::{roundtrip_report, RoundtripOptions};
use chartab_core::stc::SentinelVocab;
use chartab_core::synth::compose_sample;
use chartab_core::{
    bleu4, content_selection, decode_copy, encode_with_copy, extract_ocr, flatten_table,
    generate_random_table, mask_headers, mask_values, match_ocr_to_cells, mix64, parse_flat_table,
    relaxed_accuracy, sample_seed, Cell, NoiseModel, SpecConfig, Table, TableGenConfig,
    DEFAULT_PREFIX,
};
use chartab_model::{
    build_micro_corpus, copy_accuracy, grad_check, grad_check_corrupted, train_micro,
    MicroModelParams, ModelConfig, TrainOptions,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

#[test]
fn round_trip_fidelity_500_noise_free_samples() {
    let opts = RoundtripOptions { n: 500, seed: 1, ..Default::default() };
    let report = roundtrip_report(&opts).unwrap();
    let o = &report.overall;
    println!(
        "round-trip fidelity: {}/{} parsed, {}/{} headers exact, {}/{} within the per-pixel bound, \
         cell relaxed accuracy {:.4}, {:.1}s (types: {:?})",
        o.parsed,
        o.n,
        o.headers_exact,
        o.n,
        o.within_bound,
        o.n,
        report.cell_relaxed_accuracy,
        report.elapsed_s,
        report.by_type.iter().map(|(t, f)| format!("{t} {}", f.n)).collect::<Vec<_>>(),
    );
    assert_eq!(o.parsed, 500, "every sample parses");
    assert_eq!(o.headers_exact, 500, "headers recovered exactly");
    assert_eq!(o.within_bound, 500, "numeric cells within the quantization bound");
    assert_eq!(report.cell_relaxed_accuracy, 1.0, "relaxed accuracy over all cells");
    assert!(report.by_type.len() == 3, "bar, line and pie all present: {:?}", report.by_type);
    assert!(report.elapsed_s <= 120.0, "took {:.1}s, budget is 2 min", report.elapsed_s);
}

#[test]
fn extractive_qa_clean_vs_character_noise() {
    let clean = roundtrip_report(&RoundtripOptions { n: 500, seed: 1, ..Default::default() })
        .unwrap()
        .qa;
    let noise = NoiseModel { char_sub_rate: 0.1, ..NoiseModel::default() };
    let noisy = roundtrip_report(&RoundtripOptions {
        n: 500,
        seed: 1,
        noise: Some(noise),
        ..Default::default()
    })
    .unwrap()
    .qa;
    println!(
        "extractive qa: clean {:.4} ({}/{}), char-sub 0.1 {:.4} ({}/{}; parse_failed {}, \
         row_missing {}, col_missing {}, value_mismatch {})",
        clean.relaxed_accuracy,
        clean.correct,
        clean.questions,
        noisy.relaxed_accuracy,
        noisy.correct,
        noisy.questions,
        noisy.errors.parse_failed,
        noisy.errors.row_missing,
        noisy.errors.col_missing,
        noisy.errors.value_mismatch,
    );
    assert!(
        clean.relaxed_accuracy >= 0.99,
        "noise-free lookup accuracy {:.4} below 0.99",
        clean.relaxed_accuracy
    );
    assert!(
        noisy.relaxed_accuracy < clean.relaxed_accuracy,
        "noise must strictly lower the score: {:.4} vs {:.4}",
        noisy.relaxed_accuracy,
        clean.relaxed_accuracy
    );
    let e = &noisy.errors;
    assert_eq!(
        e.parse_failed + e.row_missing + e.col_missing + e.value_mismatch,
        noisy.questions - noisy.correct,
        "error classes partition the misses"
    );
}

#[test]
fn copy_codec_identity_on_1000_samples() {
    let table_cfg = TableGenConfig::default();
    let spec_cfg = SpecConfig::default();
    let vocab = SentinelVocab::new(64);
    let (mut matched_headers, mut total_headers) = (0u64, 0u64);
    for index in 0..1000u64 {
        let (sample, _) = compose_sample(&table_cfg, &spec_cfg, index, 2).unwrap();
        let tokens = extract_ocr(&sample.annotation, None, mix64(sample_seed(2, index) ^ 1))
            .unwrap();
        let matching = match_ocr_to_cells(&sample.table, &tokens);
        let enc =
            encode_with_copy(&sample.table, DEFAULT_PREFIX, &tokens, &matching, &vocab).unwrap();
        let decoded = decode_copy(&enc.target, &tokens, &vocab).unwrap();
        let plain = flatten_table(&sample.table, DEFAULT_PREFIX).text;
        assert_eq!(decoded, plain, "sample {index}: decode ∘ encode is not the plain flatten");
        assert_eq!(enc.plain_target, plain, "sample {index}");

        let headers = sample.table.header_refs();
        total_headers += headers.len() as u64;
        matched_headers +=
            headers.iter().filter(|r| enc.substituted.contains_key(r)).count() as u64;
    }
    println!(
        "copy codec: 1000/1000 decode to the plain flatten; header cells sentinel-matched \
         {matched_headers}/{total_headers}"
    );
    assert_eq!(matched_headers, total_headers, "every header cell is sentinel-matched");
}

#[test]
fn mask_rates_hold_over_10k_cells_with_zero_purity_violations() {
    let table_cfg = TableGenConfig::default();
    let spec_cfg = SpecConfig::default();
    let vocab = SentinelVocab::new(64);
    let (mut mhp_masked, mut mhp_cells) = (0u64, 0u64);
    let (mut mvp_masked, mut mvp_cells) = (0u64, 0u64);
    let mut violations = 0u64;
    let mut index = 0u64;
    while mhp_cells < 10_000 || mvp_cells < 10_000 {
        let (sample, _) = compose_sample(&table_cfg, &spec_cfg, index, 4).unwrap();
        let base = sample_seed(4, index);
        let tokens = extract_ocr(&sample.annotation, None, mix64(base ^ 1)).unwrap();
        let matching = match_ocr_to_cells(&sample.table, &tokens);
        let enc =
            encode_with_copy(&sample.table, DEFAULT_PREFIX, &tokens, &matching, &vocab).unwrap();

        let headers = enc.table.header_refs();
        let pair = mask_headers(&enc, 0.45, mix64(base ^ 2)).unwrap();
        mhp_masked += pair.masked.len() as u64;
        mhp_cells += headers.len() as u64;
        violations += pair.masked.iter().filter(|r| !headers.contains(r)).count() as u64;

        let values = enc.table.numeric_value_refs();
        let pair = mask_values(&enc, 0.45, mix64(base ^ 5)).unwrap();
        mvp_masked += pair.masked.len() as u64;
        mvp_cells += values.len() as u64;
        violations += pair.masked.iter().filter(|r| !values.contains(r)).count() as u64;
        index += 1;
    }
    let mhp_rate = mhp_masked as f64 / mhp_cells as f64;
    let mvp_rate = mvp_masked as f64 / mvp_cells as f64;
    println!(
        "mask rates over {index} samples: header objective {:.2}% of {mhp_cells} cells, \
         value objective {:.2}% of {mvp_cells} cells, purity violations {violations}",
        100.0 * mhp_rate,
        100.0 * mvp_rate,
    );
    assert!((0.43..=0.47).contains(&mhp_rate), "header mask rate {mhp_rate:.4} outside 45%±2%");
    assert!((0.43..=0.47).contains(&mvp_rate), "value mask rate {mvp_rate:.4} outside 45%±2%");
    assert_eq!(violations, 0, "masked cells must stay inside their objective's class");
}

/// Labels that attack the grammar's separators and escape character.
const HOSTILE_LABELS: &[&str] = &[
    "Q1 | Plan",
    "r: net",
    "c: north",
    "a\\b",
    "50% | rest",
    "x : y",
    "tail\\",
    "| lead",
    "mid|dle",
    "µ-éclair",
    "two  spaces",
    "colon:free",
    "r:",
    " | ",
];

#[test]
fn flat_grammar_round_trips_10k_tables_including_separator_labels() {
    let table_cfg = TableGenConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let prefixes = ["table parse:", "qa:", "summary check: "];
    let mut mismatches = 0u64;
    for index in 0..10_000u64 {
        let prefix = prefixes[(index % 3) as usize];
        let table = if index % 3 == 0 {
            // Hand-built hostile table: separator-laden labels, text cells,
            // empty cells, negative and fractional numbers.
            let mut pool: Vec<&str> = HOSTILE_LABELS.to_vec();
            pool.shuffle(&mut rng);
            let n_cols = rng.gen_range(2..=4);
            let n_rows = rng.gen_range(1..=3);
            let cols: Vec<String> = pool[..n_cols].iter().map(|s| s.to_string()).collect();
            let rows: Vec<String> =
                pool[n_cols..n_cols + n_rows].iter().map(|s| format!("{s} r")).collect();
            let values: Vec<Vec<Cell>> = (0..n_rows)
                .map(|_| {
                    (0..n_cols)
                        .map(|_| match rng.gen_range(0..4) {
                            0 => Cell::Num(rng.gen_range(-1.0e6..1.0e6)),
                            1 => Cell::Num(rng.gen_range(-10.0..10.0)),
                            2 => Cell::Text(
                                HOSTILE_LABELS[rng.gen_range(0..HOSTILE_LABELS.len())].to_string(),
                            ),
                            _ => Cell::Text(String::new()),
                        })
                        .collect()
                })
                .collect();
            Table::new(cols, rows, values, None).unwrap()
        } else {
            generate_random_table(&table_cfg, sample_seed(3, index)).unwrap().0
        };
        let flat = flatten_table(&table, prefix);
        match parse_flat_table(&flat) {
            Ok(parsed) if parsed == table => {}
            other => {
                mismatches += 1;
                if mismatches <= 3 {
                    eprintln!("index {index} failed: {other:?}\nflat: {}", flat.text);
                }
            }
        }
    }
    println!("flat grammar: 10000 tables round-tripped with {mismatches} mismatches");
    assert_eq!(mismatches, 0);
}

#[test]
fn gradient_check_small_config_with_negative_control() {
    let corpus = build_micro_corpus(2, 1, 5).unwrap();
    let mut cfg = ModelConfig::tiny(corpus.vocab.len(), corpus.vocab.n_ocr());
    cfg.d_region = 16;
    let params = MicroModelParams::init(&cfg, 5).unwrap();
    let ex = &corpus.train[0];
    let report = grad_check(&params, &ex.input, &ex.target, 1e-5, 7).unwrap();
    println!(
        "gradient check (d_model {}): max rel err {:.3e} over {} coords (worst: {}); \
         corrupted control detected",
        cfg.d_model, report.max_rel_err, report.coords_checked, report.worst_tensor
    );
    assert!(cfg.d_model <= 16);
    assert!(report.coords_checked >= 200, "only {} coords sampled", report.coords_checked);
    assert!(
        report.max_rel_err < 1e-4,
        "max rel err {:.3e} at {}",
        report.max_rel_err,
        report.worst_tensor
    );
    let corrupted = grad_check_corrupted(&params, &ex.input, &ex.target, 1e-5, 7).unwrap();
    assert!(
        corrupted.max_rel_err > 1e-2,
        "corrupted gradients slipped through: {:.3e}",
        corrupted.max_rel_err
    );
}

#[test]
fn micro_training_copies_heldout_masked_headers() {
    let start = Instant::now();
    let corpus = build_micro_corpus(200, 50, 7).unwrap();
    let cfg = ModelConfig::micro(corpus.vocab.len(), corpus.vocab.n_ocr());
    let mut params = MicroModelParams::init(&cfg, 7).unwrap();
    let pairs: Vec<_> =
        corpus.train.iter().map(|ex| (ex.input.clone(), ex.target.clone())).collect();
    let opts =
        TrainOptions { steps: 8000, lr: 0.05, momentum: 0.9, seed: 7, final_lr_fraction: 0.05 };
    let report = train_micro(&mut params, &pairs, &opts).unwrap();
    let held = copy_accuracy(&params, &corpus.heldout, &corpus.vocab).unwrap();
    let elapsed = start.elapsed().as_secs_f64();

    let ln_v = (corpus.vocab.len() as f64).ln();
    let anchor_gap = (report.initial_loss - ln_v).abs() / ln_v;
    let ratio = report.final_loss / report.initial_loss;
    println!(
        "micro training: initial loss {:.4} (ln V {:.4}, gap {:.2}%), final {:.4} (ratio {:.3}), \
         held-out copy {}/{} = {:.3}, {:.0}s",
        report.initial_loss,
        ln_v,
        100.0 * anchor_gap,
        report.final_loss,
        ratio,
        held.correct,
        held.slots,
        held.fraction(),
        elapsed,
    );
    assert!(anchor_gap <= 0.05, "initial loss {:.4} not within 5% of ln V", report.initial_loss);
    assert!(ratio <= 0.20, "final/initial loss ratio {ratio:.3} above 0.20");
    assert!(
        held.fraction() >= 0.90,
        "held-out copy accuracy {:.3} below 0.90",
        held.fraction()
    );
    assert!(elapsed <= 1800.0, "took {elapsed:.0}s, budget is 30 min");
}

#[test]
fn metric_anchors() {
    assert_eq!(relaxed_accuracy("1.18", "1.20"), 1, "1.67% off is within the 5% band");
    assert_eq!(relaxed_accuracy("105.1", "100"), 0, "5.1% off is outside the 5% band");

    let sentence = "the northern region grew by 14 percent in the final quarter";
    assert_eq!(bleu4(sentence, &[sentence]).unwrap(), 1.0, "bleu of a string with itself");

    let table = Table::new(
        vec!["North".into(), "South".into()],
        vec!["Q1".into(), "Q2".into()],
        vec![
            vec![Cell::Num(14.0), Cell::Num(9.0)],
            vec![Cell::Num(11.0), Cell::Num(16.0)],
        ],
        None,
    )
    .unwrap();
    let short = "North reached 14 in Q1.";
    let long = "North reached 14 in Q1. South closed Q2 at 16.";
    let cs_short = content_selection(short, &table).unwrap();
    let cs_long = content_selection(long, &table).unwrap();
    println!(
        "metric anchors: relaxed bands hold, bleu identity 1.0, content selection {cs_short:.3} → {cs_long:.3} under extension"
    );
    assert!(cs_long >= cs_short, "extending a summary cannot lose covered records");
    assert!(cs_short > 0.0, "mentioned record must be credited");
    for value in [
        cs_short,
        cs_long,
        bleu4("a b c", &["a b c d e"]).unwrap(),
        bleu4("", &["a"]).unwrap_or(0.0),
        content_selection("", &table).unwrap(),
    ] {
        assert!((0.0..=1.0).contains(&value), "metric output {value} outside [0, 1]");
    }
    assert!((0.0..=1.0).contains(&(relaxed_accuracy("1", "2") as f64)));
}
