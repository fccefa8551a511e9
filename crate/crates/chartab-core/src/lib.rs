//! Core pipeline for synthetic chart↔table corpora: table generation and the
//! flat serialization grammar, deterministic chart layout/rendering with
//! exact annotations, a ground-truth OCR provider with an optional noise
//! model, OCR-copy (sentinel) encoding, masked pretraining objectives, a
//! geometric chart-to-table parser, and evaluation metrics.

pub mod manifest;
pub mod objectives;
pub mod metrics;
pub mod ocr;
pub mod parser;
pub mod stc;
pub mod synth;
pub mod table;

pub use objectives::{
    make_pretraining_example, mask_headers, mask_values, MaskedPair, Objective, ObjectiveError,
    ObjectiveSelector, PretrainOptions, PretrainRecord,
};
pub use metrics::{
    bleu4, content_selection, generate_extractive_qa, relaxed_accuracy, relaxed_accuracy_set,
    MetricError, QaPair,
};
pub use parser::{calibrate_axis, parse_chart, AxisMap, ParseError, ParseReport};
pub use stc::{
    assign_sentinels, decode_copy, encode_with_copy, match_ocr_to_cells, normalize_surface,
    CellMatching, SentinelView, SentinelVocab, StcEncoding, StcError,
};

pub use ocr::{
    build_regions, extract_ocr, location_vector, NoiseModel, OcrError, OcrToken, RegionFeature,
};

pub use synth::{
    compose_sample, emit_annotations, layout_chart, render, synth_corpus, Annotation, BBox,
    Category, ChartSample, ChartSpec, Color, LayoutPlan, LegendPos, Orientation, Region,
    SpecConfig, SynthError, TextBox,
};
pub use table::{
    canonical_number_string, canonical_numeric, flatten_table, generate_random_table, mix64,
    parse_flat_table, sample_seed, table_close, Cell, CellRef, ChartType, ChartWeights,
    CloseIssue, CloseReport, FlatParseError, FlatTable, Table, TableError, TableGenConfig,
    DEFAULT_PREFIX,
};
