//! Noise-free synthesis → annotation → geometric parse must recover the
//! source table: headers exactly, numeric cells within one pixel's worth of
//! value on the calibrated axis (pie values are label-exact).

use chartab_core::ocr::extract_ocr;
use chartab_core::parser::parse_chart;
use chartab_core::synth::{emit_annotations, layout_chart, Orientation, SpecConfig};
use chartab_core::table::{generate_random_table, sample_seed, ChartType, TableGenConfig};

#[test]
fn mixed_corpus_round_trips_through_the_parser() {
    let table_cfg = TableGenConfig::default();
    let spec_cfg = SpecConfig::default();
    let mut seen = [0usize; 3];
    // Pie is rare under the default mix; run enough indices to see each type
    // at least a few times.
    for index in 0..200u64 {
        if index >= 60 && seen.iter().all(|&n| n >= 3) {
            break;
        }
        let seed = sample_seed(97, index);
        let (table, chart_type) = generate_random_table(&table_cfg, seed).unwrap();
        let orientation = if chart_type == ChartType::Bar && index % 3 == 0 {
            Orientation::Horizontal
        } else {
            Orientation::Vertical
        };
        seen[match chart_type {
            ChartType::Bar => 0,
            ChartType::Line => 1,
            ChartType::Pie => 2,
        }] += 1;
        let spec = spec_cfg.spec_for(chart_type, orientation);
        let layout = layout_chart(&table, &spec, seed).unwrap();
        let annotation = emit_annotations(&layout);
        let tokens = extract_ocr(&annotation, None, 0).unwrap();
        let (parsed, report) = parse_chart(&annotation, &tokens)
            .unwrap_or_else(|e| panic!("index {index} ({chart_type}): {e}"));

        assert_eq!(parsed.col_headers(), table.col_headers(), "index {index}");
        assert_eq!(parsed.row_headers(), table.row_headers(), "index {index}");
        let tol = match chart_type {
            ChartType::Pie => 1e-9,
            _ => report.value_per_pixel.expect("axis calibrated") * 1.01,
        };
        if let Some(residual) = report.axis_residual {
            assert!(residual < 1e-9, "index {index}: residual {residual}");
        }
        for (i, row) in table.values().iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                let truth = cell.as_num().unwrap();
                let got = parsed.cell(i, j).as_num().unwrap();
                assert!(
                    (truth - got).abs() <= tol,
                    "index {index} ({chart_type}) cell ({i},{j}): {truth} vs {got} (tol {tol})"
                );
            }
        }
    }
    assert!(seen.iter().all(|&n| n >= 3), "corpus skipped a chart type: {seen:?}");
}
