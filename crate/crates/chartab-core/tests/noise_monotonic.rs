//! Raising the OCR token-drop rate must never increase the number of cells
//! the copy mechanism can tie to a token, sample by sample: the drop draw is
//! the first per-token random draw, so a token dropped at a low rate is also
//! dropped at every higher rate under the same seed.

use chartab_core::ocr::{extract_ocr, NoiseModel};
use chartab_core::stc::match_ocr_to_cells;
use chartab_core::synth::{emit_annotations, layout_chart, Orientation, SpecConfig};
use chartab_core::table::{generate_random_table, sample_seed, TableGenConfig};

#[test]
fn dropping_more_tokens_never_adds_matches() {
    let table_cfg = TableGenConfig::default();
    let spec_cfg = SpecConfig::default();
    let rates = [0.0, 0.25, 0.6, 0.95];
    let mut totals = [0usize; 4];
    for index in 0..300u64 {
        let seed = sample_seed(4242, index);
        let (table, chart_type) = generate_random_table(&table_cfg, seed).unwrap();
        let spec = spec_cfg.spec_for(chart_type, Orientation::Vertical);
        let layout = layout_chart(&table, &spec, seed).unwrap();
        let annotation = emit_annotations(&layout);

        let mut prev = usize::MAX;
        for (slot, &rate) in rates.iter().enumerate() {
            let noise = NoiseModel { token_drop_rate: rate, ..NoiseModel::default() };
            let tokens = extract_ocr(&annotation, Some(&noise), seed).unwrap();
            let matched = match_ocr_to_cells(&table, &tokens).pairs.len();
            assert!(
                matched <= prev,
                "index {index}: rate {rate} matched {matched} > previous {prev}"
            );
            totals[slot] += matched;
            prev = matched;
        }
    }
    // And the aggregate effect is strictly visible end to end.
    assert!(totals[0] > totals[3], "totals {totals:?}");
}
