//! Property tests for the flat-table grammar: arbitrary labels (including
//! separator and escape characters) must survive flatten → parse unchanged.

use chartab_core::{flatten_table, parse_flat_table, Cell, Table};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    // Plenty of hostile content: separators, escapes, spaces, unicode.
    proptest::string::string_regex("[ a-zA-Z0-9|:\\\\.%()µé-]{1,12}")
        .unwrap()
        .prop_filter("labels are non-empty after trim-insensitivity", |s| !s.is_empty())
}

fn distinct_labels(max: usize) -> impl Strategy<Value = Vec<String>> {
    proptest::collection::btree_set(label(), 1..=max).prop_map(|s| s.into_iter().collect())
}

fn cell() -> impl Strategy<Value = Cell> {
    prop_oneof![
        (-1.0e9..1.0e9f64).prop_map(Cell::Num),
        label().prop_map(Cell::Text),
        Just(Cell::Text(String::new())),
    ]
}

proptest! {
    #[test]
    fn flatten_then_parse_is_identity(
        cols in distinct_labels(5),
        rows in distinct_labels(4),
        prefix in "[a-z :]{1,10}",
        seed_cells in proptest::collection::vec(cell(), 20),
    ) {
        let values: Vec<Vec<Cell>> = (0..rows.len())
            .map(|i| (0..cols.len()).map(|j| seed_cells[(i * 5 + j) % seed_cells.len()].clone()).collect())
            .collect();
        let table = Table::new(cols, rows, values, None).unwrap();
        let flat = flatten_table(&table, &prefix);
        let parsed = parse_flat_table(&flat).unwrap();
        prop_assert_eq!(parsed, table);
    }

    #[test]
    fn escaped_labels_never_confuse_markers(
        hostile in proptest::string::string_regex("( r: | \\| | : |\\\\)+").unwrap(),
    ) {
        let table = Table::new(
            vec![hostile.clone(), format!("{hostile}2")],
            vec![format!("r{hostile}")],
            vec![vec![Cell::Text(hostile.clone()), Cell::Text(String::new())]],
            None,
        ).unwrap();
        let flat = flatten_table(&table, "qa:");
        let parsed = parse_flat_table(&flat).unwrap();
        prop_assert_eq!(parsed, table);
    }
}
