//! Deterministic chart synthesis: layout a [`Table`] into exact pixel
//! geometry, rasterize it, and emit byte-exact annotations (OCR tokens and
//! the fixed 15-category region set).
//!
//! Layout geometry is snapped to integer pixels and the renderer draws
//! exactly what the annotation records, so a geometric parser can invert the
//! chart without ever reading pixels.

pub mod font;
mod render;
mod ticks;

pub use render::render;
pub use ticks::{choose_tick_values, Tick};

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{mix64, ChartType, Table, TableError};

pub type Color = [u8; 3];

pub const WHITE: Color = [255, 255, 255];
pub const BLACK: Color = [0, 0, 0];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid tick request: {0}")]
    InvalidTicks(String),
    #[error("invalid chart spec: {0}")]
    InvalidSpec(String),
    #[error("table does not fit the chart type: {0}")]
    TableMismatch(String),
    #[error("layout does not fit the image: {0}")]
    DoesNotFit(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("sample {index}: {source}")]
    SampleIo { index: u64, source: std::io::Error },
}

/// Pixel-space box, `x1 < x2` and `y1 < y2`, serialized as `[x1,y1,x2,y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, f64, f64)", into = "(f64, f64, f64, f64)")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl From<(f64, f64, f64, f64)> for BBox {
    fn from((x1, y1, x2, y2): (f64, f64, f64, f64)) -> Self {
        BBox { x1, y1, x2, y2 }
    }
}

impl From<BBox> for (f64, f64, f64, f64) {
    fn from(b: BBox) -> Self {
        (b.x1, b.y1, b.x2, b.y2)
    }
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox { x1, y1, x2, y2 }
    }

    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 < self.x2
            && self.y1 < self.y2
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn cx(&self) -> f64 {
        (self.x1 + self.x2) / 2.0
    }

    pub fn cy(&self) -> f64 {
        (self.y1 + self.y2) / 2.0
    }

    fn within(&self, width: u32, height: u32) -> bool {
        self.is_valid() && self.x1 >= 0.0 && self.y1 >= 0.0 && self.x2 <= width as f64 && self.y2 <= height as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegendPos {
    Right,
    Bottom,
}

/// The fixed chart-object category set shared by annotations and the parser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Category {
    Legends,
    #[serde(rename = "yAxisTitle")]
    YAxisTitle,
    ChartTitle,
    #[serde(rename = "xAxisTitle")]
    XAxisTitle,
    LegendPreview,
    PlotArea,
    #[serde(rename = "yAxisLabel")]
    YAxisLabel,
    #[serde(rename = "xAxisLabel")]
    XAxisLabel,
    LegendLabel,
    PieLabel,
    #[serde(rename = "bar")]
    Bar,
    #[serde(rename = "pie")]
    Pie,
    #[serde(rename = "pieSlice")]
    PieSlice,
    #[serde(rename = "line")]
    Line,
    #[serde(rename = "dotLine")]
    DotLine,
}

impl Category {
    pub const ALL: [Category; 15] = [
        Category::Legends,
        Category::YAxisTitle,
        Category::ChartTitle,
        Category::XAxisTitle,
        Category::LegendPreview,
        Category::PlotArea,
        Category::YAxisLabel,
        Category::XAxisLabel,
        Category::LegendLabel,
        Category::PieLabel,
        Category::Bar,
        Category::Pie,
        Category::PieSlice,
        Category::Line,
        Category::DotLine,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Category::Legends => "Legends",
            Category::YAxisTitle => "yAxisTitle",
            Category::ChartTitle => "ChartTitle",
            Category::XAxisTitle => "xAxisTitle",
            Category::LegendPreview => "LegendPreview",
            Category::PlotArea => "PlotArea",
            Category::YAxisLabel => "yAxisLabel",
            Category::XAxisLabel => "xAxisLabel",
            Category::LegendLabel => "LegendLabel",
            Category::PieLabel => "PieLabel",
            Category::Bar => "bar",
            Category::Pie => "pie",
            Category::PieSlice => "pieSlice",
            Category::Line => "line",
            Category::DotLine => "dotLine",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub orientation: Orientation,
    pub width: u32,
    pub height: u32,
    pub palette: Vec<Color>,
    pub tick_count: usize,
    pub font_px: u32,
    pub legend_pos: LegendPos,
    pub margin: u32,
}

/// Spec template shared by a whole corpus; chart type and orientation are
/// filled in per sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpecConfig {
    pub width: u32,
    pub height: u32,
    pub palette: Vec<Color>,
    pub tick_count: usize,
    pub font_px: u32,
    pub legend_pos: LegendPos,
    pub margin: u32,
}

pub const DEFAULT_PALETTE: [Color; 8] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
];

impl Default for SpecConfig {
    fn default() -> Self {
        SpecConfig {
            width: 640,
            height: 480,
            palette: DEFAULT_PALETTE.to_vec(),
            tick_count: 5,
            font_px: 8,
            legend_pos: LegendPos::Right,
            margin: 10,
        }
    }
}

impl SpecConfig {
    pub fn spec_for(&self, chart_type: ChartType, orientation: Orientation) -> ChartSpec {
        ChartSpec {
            chart_type,
            orientation,
            width: self.width,
            height: self.height,
            palette: self.palette.clone(),
            tick_count: self.tick_count,
            font_px: self.font_px,
            legend_pos: self.legend_pos,
            margin: self.margin,
        }
    }
}

impl ChartSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width < 128 || self.height < 128 {
            return bad(format!("dimensions {}x{} below 128x128", self.width, self.height));
        }
        if self.tick_count < 2 {
            return bad(format!("tick_count {} below 2", self.tick_count));
        }
        if self.palette.is_empty() {
            return bad("palette is empty".to_string());
        }
        for (i, c) in self.palette.iter().enumerate() {
            if self.palette[..i].contains(c) {
                return bad(format!("palette color {c:?} repeats"));
            }
        }
        if self.margin as f64 > self.width.min(self.height) as f64 / 8.0 {
            return bad(format!("margin {} too large for {}x{}", self.margin, self.width, self.height));
        }
        if self.orientation == Orientation::Horizontal && self.chart_type != ChartType::Bar {
            return bad("horizontal orientation applies to bar charts only".to_string());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextItem {
    pub text: String,
    pub bbox: BBox,
    pub category: Category,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mark {
    Bar { series: usize, category: usize, rect: BBox },
    Vertex { series: usize, category: usize, bbox: BBox },
    Slice { index: usize, start_deg: f64, end_deg: f64, marker: BBox },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacedTick {
    pub value: f64,
    pub label: String,
    pub pixel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueAxis {
    /// True when values run along y (vertical bars, lines).
    pub vertical: bool,
    pub axis_min: f64,
    pub axis_max: f64,
    pub ticks: Vec<PlacedTick>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LegendPlan {
    pub frame: BBox,
    /// Swatch box per series, in series order.
    pub swatches: Vec<BBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiePlan {
    pub cx: f64,
    pub cy: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutPlan {
    pub width: u32,
    pub height: u32,
    pub chart_type: ChartType,
    pub orientation: Orientation,
    pub plot: BBox,
    pub value_axis: Option<ValueAxis>,
    pub marks: Vec<Mark>,
    pub texts: Vec<TextItem>,
    pub legend: Option<LegendPlan>,
    pub pie: Option<PiePlan>,
    pub series_colors: Vec<Color>,
}

/// Affine value→pixel map sending `amin` to `lo_px` and `amax` to `hi_px`.
pub(crate) fn affine_value_px(v: f64, amin: f64, amax: f64, lo_px: f64, hi_px: f64) -> f64 {
    lo_px + (v - amin) / (amax - amin) * (hi_px - lo_px)
}

const PAD: f64 = 6.0;
const TICK_LEN: f64 = 4.0;

/// Lays `table` out as the chart described by `spec`. Geometry is a pure
/// function of `(table, spec, seed)`; the seed only rotates the palette.
pub fn layout_chart(table: &Table, spec: &ChartSpec, seed: u64) -> Result<LayoutPlan, SynthError> {
    spec.validate()?;
    match spec.chart_type {
        ChartType::Bar | ChartType::Line => layout_xy(table, spec, seed),
        ChartType::Pie => layout_pie(table, spec, seed),
    }
}

fn series_colors(spec: &ChartSpec, n: usize, seed: u64) -> Result<Vec<Color>, SynthError> {
    if spec.palette.len() < n {
        return Err(SynthError::TableMismatch(format!(
            "{n} series need {n} palette colors, palette has {}",
            spec.palette.len()
        )));
    }
    let offset = (mix64(seed) % spec.palette.len() as u64) as usize;
    Ok((0..n).map(|i| spec.palette[(offset + i) % spec.palette.len()]).collect())
}

fn numeric_matrix(table: &Table) -> Result<Vec<Vec<f64>>, SynthError> {
    table
        .values()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, c)| {
                    c.as_num().ok_or_else(|| {
                        SynthError::TableMismatch(format!("cell ({i}, {j}) is not numeric"))
                    })
                })
                .collect()
        })
        .collect()
}

fn text_box_at(text: &str, x1: f64, y1: f64, scale: u32) -> BBox {
    let (w, h) = font::text_size(text, scale);
    BBox::new(x1, y1, x1 + w as f64, y1 + h as f64)
}

fn centered_text_box(text: &str, cx: f64, y1: f64, scale: u32) -> BBox {
    let (w, h) = font::text_size(text, scale);
    let x1 = (cx - w as f64 / 2.0).round();
    BBox::new(x1, y1, x1 + w as f64, y1 + h as f64)
}

fn layout_xy(table: &Table, spec: &ChartSpec, seed: u64) -> Result<LayoutPlan, SynthError> {
    let values = numeric_matrix(table)?;
    let n_series = table.n_rows();
    let n_cat = table.n_cols();
    let colors = series_colors(spec, n_series, seed)?;

    let scale = font::scale_for(spec.font_px);
    let ch = (font::CELL_H * scale) as f64;
    let m = spec.margin as f64;
    let (w, h) = (spec.width as f64, spec.height as f64);

    let dmin = values.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
    let dmax = values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ticks = ticks::nice_ticks(dmin, dmax, spec.tick_count)?;
    let (axis_min, axis_max) = (ticks.first().unwrap().value, ticks.last().unwrap().value);

    let vertical = spec.orientation == Orientation::Vertical;
    let mut texts = Vec::new();

    // Top bands: optional title, then the y-axis title.
    let mut top = m;
    if let Some(title) = table.title() {
        texts.push(TextItem {
            text: title.to_string(),
            bbox: centered_text_box(title, w / 2.0, top, scale),
            category: Category::ChartTitle,
        });
        top += ch + PAD;
    }
    let y_title = if vertical { "value" } else { "category" };
    texts.push(TextItem {
        text: y_title.to_string(),
        bbox: text_box_at(y_title, m, top, scale),
        category: Category::YAxisTitle,
    });
    top += ch + PAD;

    // Left band: tick labels (vertical) or category labels (horizontal).
    let left_texts: Vec<&str> = if vertical {
        ticks.iter().map(|t| t.label.as_str()).collect()
    } else {
        table.col_headers().iter().map(|s| s.as_str()).collect()
    };
    let left_w = left_texts.iter().map(|t| font::text_size(t, scale).0).max().unwrap_or(0) as f64;
    let plot_x1 = (m + left_w + TICK_LEN + PAD).ceil();

    // Right band: the legend (drawn for every bar/line chart, including
    // single-series ones, so row headers are always recoverable).
    let legend_label_w =
        table.row_headers().iter().map(|t| font::text_size(t, scale).0).max().unwrap_or(0) as f64;
    let legend_right_w = ch + 4.0 + legend_label_w + 8.0;
    let plot_x2 = match spec.legend_pos {
        LegendPos::Right => (w - m - legend_right_w - PAD).floor(),
        LegendPos::Bottom => (w - m - PAD).floor(),
    };

    // Bottom bands, measured upward from the margin.
    let mut cursor = h - m;
    let mut legend_band_y = 0.0;
    if spec.legend_pos == LegendPos::Bottom {
        legend_band_y = cursor - ch - 4.0;
        cursor = legend_band_y - 4.0 - PAD;
    }
    let x_title = if vertical { "category" } else { "value" };
    let x_title_y = cursor - ch;
    cursor = x_title_y - PAD;
    let x_label_y = cursor - ch;
    let plot_y2 = (x_label_y - TICK_LEN - 2.0).floor();
    let plot_y1 = (top + PAD).ceil();

    let k = (ticks.len() - 1) as f64;
    let (plot, tick_step) = if vertical {
        let height0 = plot_y2 - plot_y1;
        let step = (height0 / k).floor();
        let plot = BBox::new(plot_x1, plot_y2 - step * k, plot_x2, plot_y2);
        (plot, step)
    } else {
        let width0 = plot_x2 - plot_x1;
        let step = (width0 / k).floor();
        let plot = BBox::new(plot_x1, plot_y1, plot_x1 + step * k, plot_y2);
        (plot, step)
    };
    if plot.width() < 30.0 || plot.height() < 30.0 || tick_step < 2.0 {
        return Err(SynthError::DoesNotFit(format!(
            "plot area {:.0}x{:.0} too small for {} ticks",
            plot.width(),
            plot.height(),
            ticks.len()
        )));
    }

    // Value axis: tick pixels are exact integers and exactly affine in value.
    let mut placed = Vec::new();
    for (i, t) in ticks.iter().enumerate() {
        let pixel = if vertical { plot.y2 - i as f64 * tick_step } else { plot.x1 + i as f64 * tick_step };
        placed.push(PlacedTick { value: t.value, label: t.label.clone(), pixel });
        let bbox = if vertical {
            let (tw, _) = font::text_size(&t.label, scale);
            BBox::new(plot.x1 - TICK_LEN - 2.0 - tw as f64, pixel - ch / 2.0, plot.x1 - TICK_LEN - 2.0, pixel + ch / 2.0)
        } else {
            centered_text_box(&t.label, pixel, x_label_y, scale)
        };
        texts.push(TextItem {
            text: t.label.clone(),
            bbox,
            category: if vertical { Category::YAxisLabel } else { Category::XAxisLabel },
        });
    }

    // Category labels and marks.
    let cat_extent = if vertical { plot.width() } else { plot.height() };
    let slot = cat_extent / n_cat as f64;
    let group = slot * 0.8;
    let per_series = group / n_series.max(1) as f64;
    if spec.chart_type == ChartType::Bar && per_series < 3.0 {
        return Err(SynthError::DoesNotFit(format!(
            "bar width {per_series:.1}px below 3px for {n_series} series x {n_cat} categories"
        )));
    }
    let mut marks = Vec::new();
    for (j, label) in table.col_headers().iter().enumerate() {
        let center = if vertical { plot.x1 + (j as f64 + 0.5) * slot } else { plot.y1 + (j as f64 + 0.5) * slot };
        let bbox = if vertical {
            centered_text_box(label, center, x_label_y, scale)
        } else {
            let (tw, _) = font::text_size(label, scale);
            BBox::new(
                plot.x1 - TICK_LEN - 2.0 - tw as f64,
                (center - ch / 2.0).round(),
                plot.x1 - TICK_LEN - 2.0,
                (center - ch / 2.0).round() + ch,
            )
        };
        texts.push(TextItem {
            text: label.clone(),
            bbox,
            category: if vertical { Category::XAxisLabel } else { Category::YAxisLabel },
        });

        for (i, series_vals) in values.iter().enumerate() {
            let v = series_vals[j];
            match (spec.chart_type, vertical) {
                (ChartType::Bar, true) => {
                    let x1 = (center - group / 2.0 + i as f64 * per_series).round();
                    let x2 = ((center - group / 2.0 + (i + 1) as f64 * per_series).round() - 1.0).max(x1 + 1.0);
                    let top_px = affine_value_px(v, axis_min, axis_max, plot.y2, plot.y1).round().min(plot.y2 - 1.0);
                    marks.push(Mark::Bar { series: i, category: j, rect: BBox::new(x1, top_px, x2, plot.y2) });
                }
                (ChartType::Bar, false) => {
                    let y1 = (center - group / 2.0 + i as f64 * per_series).round();
                    let y2 = ((center - group / 2.0 + (i + 1) as f64 * per_series).round() - 1.0).max(y1 + 1.0);
                    let end_px = affine_value_px(v, axis_min, axis_max, plot.x1, plot.x2).round().max(plot.x1 + 1.0);
                    marks.push(Mark::Bar { series: i, category: j, rect: BBox::new(plot.x1, y1, end_px, y2) });
                }
                (ChartType::Line, _) => {
                    let vx = center.round();
                    let vy = affine_value_px(v, axis_min, axis_max, plot.y2, plot.y1).round();
                    marks.push(Mark::Vertex {
                        series: i,
                        category: j,
                        bbox: BBox::new(vx - 3.0, vy - 3.0, vx + 3.0, vy + 3.0),
                    });
                }
                (ChartType::Pie, _) => unreachable!("pie handled separately"),
            }
        }
    }

    // X-axis title.
    texts.push(TextItem {
        text: x_title.to_string(),
        bbox: centered_text_box(x_title, plot.x1 + plot.width() / 2.0, x_title_y, scale),
        category: Category::XAxisTitle,
    });

    // Legend.
    let legend = match spec.legend_pos {
        LegendPos::Right => {
            let fx = w - m - legend_right_w;
            let mut swatches = Vec::new();
            for (i, name) in table.row_headers().iter().enumerate() {
                let ey = plot.y1 + i as f64 * (ch + PAD);
                let swatch = BBox::new(fx + 4.0, ey, fx + 4.0 + ch, ey + ch);
                texts.push(TextItem {
                    text: name.clone(),
                    bbox: text_box_at(name, swatch.x2 + 4.0, ey, scale),
                    category: Category::LegendLabel,
                });
                swatches.push(swatch);
            }
            let fy2 = plot.y1 + n_series as f64 * (ch + PAD) + 4.0;
            if fy2 > plot.y2 {
                return Err(SynthError::DoesNotFit(format!("legend with {n_series} entries exceeds plot height")));
            }
            LegendPlan { frame: BBox::new(fx, plot.y1 - 4.0, w - m, fy2), swatches }
        }
        LegendPos::Bottom => {
            let widths: Vec<f64> = table
                .row_headers()
                .iter()
                .map(|t| ch + 4.0 + font::text_size(t, scale).0 as f64 + 12.0)
                .collect();
            let total: f64 = widths.iter().sum();
            let mut x = ((w - total) / 2.0).round();
            let fx1 = x - 4.0;
            let ey = legend_band_y;
            let mut swatches = Vec::new();
            for (i, name) in table.row_headers().iter().enumerate() {
                let swatch = BBox::new(x, ey, x + ch, ey + ch);
                texts.push(TextItem {
                    text: name.clone(),
                    bbox: text_box_at(name, swatch.x2 + 4.0, ey, scale),
                    category: Category::LegendLabel,
                });
                swatches.push(swatch);
                x += widths[i];
            }
            LegendPlan { frame: BBox::new(fx1, ey - 4.0, x - 12.0 + 8.0, ey + ch + 4.0), swatches }
        }
    };

    let plan = LayoutPlan {
        width: spec.width,
        height: spec.height,
        chart_type: spec.chart_type,
        orientation: spec.orientation,
        plot,
        value_axis: Some(ValueAxis { vertical, axis_min, axis_max, ticks: placed }),
        marks,
        texts,
        legend: Some(legend),
        pie: None,
        series_colors: colors,
    };
    check_bounds(&plan)?;
    Ok(plan)
}

fn layout_pie(table: &Table, spec: &ChartSpec, seed: u64) -> Result<LayoutPlan, SynthError> {
    if table.n_cols() != 1 {
        return Err(SynthError::TableMismatch(format!(
            "pie charts take exactly one value column, table has {}",
            table.n_cols()
        )));
    }
    if table.title().is_some() {
        return Err(SynthError::TableMismatch(
            "pie charts draw the value-column header as their title; the table must be untitled".to_string(),
        ));
    }
    let values: Vec<f64> = numeric_matrix(table)?.into_iter().map(|r| r[0]).collect();
    if let Some(v) = values.iter().find(|v| **v <= 0.0) {
        return Err(SynthError::TableMismatch(format!("pie slices need positive values, got {v}")));
    }
    let n = values.len();
    let colors = series_colors(spec, n, seed)?;

    let scale = font::scale_for(spec.font_px);
    let ch = (font::CELL_H * scale) as f64;
    let m = spec.margin as f64;
    let (w, h) = (spec.width as f64, spec.height as f64);

    let title = table.col_headers()[0].clone();
    let mut texts = vec![TextItem {
        text: title.clone(),
        bbox: centered_text_box(&title, w / 2.0, m, scale),
        category: Category::ChartTitle,
    }];
    let avail_y1 = m + ch + PAD;
    let avail = BBox::new(m, avail_y1, w - m, h - m);

    let max_half_label = table
        .row_headers()
        .iter()
        .map(|s| s.as_str().to_string())
        .chain(values.iter().map(|v| crate::table::canonical_number_string(*v)))
        .map(|t| font::text_size(&t, scale).0 as f64 / 2.0)
        .fold(0.0, f64::max);
    let rx = (avail.width() / 2.0 - max_half_label - 4.0) / 1.22;
    let ry = (avail.height() / 2.0 - (ch + 1.0) * 2.0) / 1.22;
    let r = rx.min(ry).floor();
    if r < 24.0 {
        return Err(SynthError::DoesNotFit(format!("pie radius {r:.0}px below 24px")));
    }
    let cx = (avail.x1 + avail.width() / 2.0).round();
    let cy = (avail.y1 + avail.height() / 2.0).round();

    let total: f64 = values.iter().sum();
    let mut marks = Vec::new();
    let mut cum = 0.0;
    for (i, v) in values.iter().enumerate() {
        let start = 360.0 * cum / total;
        cum += v;
        let end = if i == n - 1 { 360.0 } else { 360.0 * cum / total };
        let mid = (start + end) / 2.0;
        let (sin, cos) = (mid.to_radians().sin(), mid.to_radians().cos());

        let mx = (cx + 0.6 * r * sin).round();
        let my = (cy - 0.6 * r * cos).round();
        marks.push(Mark::Slice {
            index: i,
            start_deg: start,
            end_deg: end,
            marker: BBox::new(mx - 4.0, my - 4.0, mx + 4.0, my + 4.0),
        });

        let ax = (cx + 1.22 * r * sin).round();
        let ay = (cy - 1.22 * r * cos).round();
        let name = &table.row_headers()[i];
        let value_text = table.cell(i, 0).surface();
        texts.push(TextItem {
            text: name.clone(),
            bbox: centered_text_box(name, ax, ay - ch - 1.0, scale),
            category: Category::PieLabel,
        });
        texts.push(TextItem {
            text: value_text.clone(),
            bbox: centered_text_box(&value_text, ax, ay + 1.0, scale),
            category: Category::PieLabel,
        });
    }

    let plan = LayoutPlan {
        width: spec.width,
        height: spec.height,
        chart_type: ChartType::Pie,
        orientation: Orientation::Vertical,
        plot: avail,
        value_axis: None,
        marks,
        texts,
        legend: None,
        pie: Some(PiePlan { cx, cy, r }),
        series_colors: colors,
    };
    check_bounds(&plan)?;
    Ok(plan)
}

fn check_bounds(plan: &LayoutPlan) -> Result<(), SynthError> {
    let (w, h) = (plan.width, plan.height);
    let check = |what: &str, b: &BBox| {
        if b.within(w, h) {
            Ok(())
        } else {
            Err(SynthError::DoesNotFit(format!("{what} {b:?} outside {w}x{h}")))
        }
    };
    check("plot area", &plan.plot)?;
    for t in &plan.texts {
        check(t.category.name(), &t.bbox)?;
    }
    for mk in &plan.marks {
        match mk {
            Mark::Bar { rect, .. } => check("bar", rect)?,
            Mark::Vertex { bbox, .. } => check("line vertex", bbox)?,
            Mark::Slice { marker, .. } => check("pie slice marker", marker)?,
        }
    }
    if let Some(legend) = &plan.legend {
        check("legend frame", &legend.frame)?;
        for s in &legend.swatches {
            check("legend swatch", s)?;
        }
    }
    if let Some(pie) = &plan.pie {
        check("pie disc", &BBox::new(pie.cx - pie.r, pie.cy - pie.r, pie.cx + pie.r, pie.cy + pie.r))?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextBox {
    pub text: String,
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub category: Category,
    pub bbox: BBox,
    pub color: Color,
}

/// Ground-truth annotation: every rendered text item once, plus one region
/// per mark and structural element.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub width: u32,
    pub height: u32,
    pub ocr_tokens: Vec<TextBox>,
    pub regions: Vec<Region>,
}

pub fn emit_annotations(layout: &LayoutPlan) -> Annotation {
    let mut regions = vec![Region { category: Category::PlotArea, bbox: layout.plot, color: WHITE }];
    let ocr_tokens: Vec<TextBox> = layout
        .texts
        .iter()
        .map(|t| TextBox { text: t.text.clone(), bbox: t.bbox })
        .collect();
    for t in &layout.texts {
        regions.push(Region { category: t.category, bbox: t.bbox, color: BLACK });
    }
    if let Some(legend) = &layout.legend {
        regions.push(Region { category: Category::Legends, bbox: legend.frame, color: WHITE });
        for (i, swatch) in legend.swatches.iter().enumerate() {
            regions.push(Region {
                category: Category::LegendPreview,
                bbox: *swatch,
                color: layout.series_colors[i],
            });
        }
    }
    if let Some(pie) = &layout.pie {
        // Dominant color of the whole disc: the largest slice's color.
        let largest = layout
            .marks
            .iter()
            .filter_map(|m| match m {
                Mark::Slice { index, start_deg, end_deg, .. } => Some((*index, end_deg - start_deg)),
                _ => None,
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        regions.push(Region {
            category: Category::Pie,
            bbox: BBox::new(pie.cx - pie.r, pie.cy - pie.r, pie.cx + pie.r, pie.cy + pie.r),
            color: layout.series_colors[largest],
        });
    }
    for mark in &layout.marks {
        let (category, bbox, color) = match mark {
            Mark::Bar { series, rect, .. } => (Category::Bar, *rect, layout.series_colors[*series]),
            Mark::Vertex { series, bbox, .. } => (Category::Line, *bbox, layout.series_colors[*series]),
            Mark::Slice { index, marker, .. } => (Category::PieSlice, *marker, layout.series_colors[*index]),
        };
        regions.push(Region { category, bbox, color });
    }
    Annotation { width: layout.width, height: layout.height, ocr_tokens, regions }
}

/// Everything known about one synthesized sample.
#[derive(Debug, Clone)]
pub struct ChartSample {
    pub id: String,
    pub chart_type: ChartType,
    pub table: Table,
    pub spec: ChartSpec,
    pub image_path: PathBuf,
    pub annotation: Annotation,
}

pub struct SynthStats {
    pub manifest_path: PathBuf,
    pub n: u64,
    pub by_type: [u64; 3],
}

/// Builds sample `index` of the corpus in memory (no pixels written); the
/// returned layout is what [`render`] consumes. Manifest-identical to what
/// [`synth_corpus`] emits for the same `(table_cfg, spec_cfg, global_seed)`.
pub fn compose_sample(
    table_cfg: &crate::table::TableGenConfig,
    spec_cfg: &SpecConfig,
    index: u64,
    global_seed: u64,
) -> Result<(ChartSample, LayoutPlan), SynthError> {
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    let seed = crate::table::sample_seed(global_seed, index);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (table, chart_type) = crate::table::generate_with_rng(table_cfg, &mut rng)?;
    let orientation = match chart_type {
        ChartType::Bar if rng.gen::<f64>() >= table_cfg.vertical_weight => Orientation::Horizontal,
        _ => Orientation::Vertical,
    };
    let spec = spec_cfg.spec_for(chart_type, orientation);
    let layout = layout_chart(&table, &spec, seed)?;
    let annotation = emit_annotations(&layout);
    let id = format!("s{index:06}");
    let sample = ChartSample {
        image_path: PathBuf::from(format!("images/{id}.png")),
        id,
        chart_type,
        table,
        spec,
        annotation,
    };
    Ok((sample, layout))
}

/// Generates `n` samples under `global_seed`, writing PNGs plus a JSONL
/// manifest into `out_dir`. Per-sample seeds come from [`sample_seed`], so
/// the corpus is identical no matter how it is chunked or ordered.
pub fn synth_corpus(
    table_cfg: &crate::table::TableGenConfig,
    spec_cfg: &SpecConfig,
    n: u64,
    global_seed: u64,
    out_dir: &Path,
) -> Result<SynthStats, SynthError> {
    table_cfg.validate()?;
    let io_err = |index: u64| move |source: std::io::Error| SynthError::SampleIo { index, source };
    std::fs::create_dir_all(out_dir.join("images")).map_err(io_err(0))?;
    let manifest_path = out_dir.join("manifest.jsonl");
    let mut writer = crate::manifest::ManifestWriter::create(&manifest_path).map_err(io_err(0))?;

    let mut by_type = [0u64; 3];
    for index in 0..n {
        let (sample, layout) = compose_sample(table_cfg, spec_cfg, index, global_seed)?;
        let image = render(&layout, &sample.spec)?;
        image
            .save(out_dir.join(&sample.image_path))
            .map_err(|e| SynthError::SampleIo { index, source: std::io::Error::other(e) })?;
        by_type[match sample.chart_type {
            ChartType::Bar => 0,
            ChartType::Line => 1,
            ChartType::Pie => 2,
        }] += 1;
        writer.write(&sample).map_err(io_err(index))?;
    }
    writer.finish().map_err(io_err(n))?;
    Ok(SynthStats { manifest_path, n, by_type })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Cell;

    fn table(cols: &[&str], rows: &[&str], vals: &[&[f64]]) -> Table {
        Table::new(
            cols.iter().map(|s| s.to_string()).collect(),
            rows.iter().map(|s| s.to_string()).collect(),
            vals.iter().map(|r| r.iter().map(|v| Cell::Num(*v)).collect()).collect(),
            None,
        )
        .unwrap()
    }

    fn spec(chart_type: ChartType, orientation: Orientation) -> ChartSpec {
        SpecConfig::default().spec_for(chart_type, orientation)
    }

    #[test]
    fn value_to_pixel_map_is_affine() {
        // Plot rows 50..350, axis [0, 100]: value 30 sits at 350 - 0.3*300.
        assert_eq!(affine_value_px(30.0, 0.0, 100.0, 350.0, 50.0), 260.0);
        assert_eq!(affine_value_px(0.0, 0.0, 100.0, 350.0, 50.0), 350.0);
        assert_eq!(affine_value_px(100.0, 0.0, 100.0, 350.0, 50.0), 50.0);
    }

    #[test]
    fn vertical_bars_emit_one_region_per_cell_and_one_label_per_category() {
        let t = table(
            &["Q1", "Q2", "Q3", "Q4"],
            &["Alpha", "Bravo"],
            &[&[10.0, 20.0, 30.0, 40.0], &[15.0, 25.0, 35.0, 45.0]],
        );
        let plan = layout_chart(&t, &spec(ChartType::Bar, Orientation::Vertical), 1).unwrap();
        let ann = emit_annotations(&plan);
        let bars = ann.regions.iter().filter(|r| r.category == Category::Bar).count();
        let x_labels = ann.regions.iter().filter(|r| r.category == Category::XAxisLabel).count();
        assert_eq!(bars, 8);
        assert_eq!(x_labels, 4);
        let legend_previews =
            ann.regions.iter().filter(|r| r.category == Category::LegendPreview).count();
        assert_eq!(legend_previews, 2);
    }

    #[test]
    fn bar_tops_invert_to_cell_values_within_one_pixel() {
        let t = table(
            &["a", "b", "c"],
            &["r1", "r2"],
            &[&[12.5, 47.1, 88.8], &[33.0, 10.0, 64.2]],
        );
        for orientation in [Orientation::Vertical, Orientation::Horizontal] {
            let plan = layout_chart(&t, &spec(ChartType::Bar, orientation), 3).unwrap();
            let axis = plan.value_axis.as_ref().unwrap();
            let span = axis.axis_max - axis.axis_min;
            let len = if axis.vertical { plan.plot.height() } else { plan.plot.width() };
            for mark in &plan.marks {
                let Mark::Bar { series, category, rect } = mark else { panic!() };
                let px = if axis.vertical { plan.plot.y2 - rect.y1 } else { rect.x2 - plan.plot.x1 };
                let recovered = axis.axis_min + px / len * span;
                let truth = t.cell(*series, *category).as_num().unwrap();
                assert!(
                    (recovered - truth).abs() <= span / len + 1e-9,
                    "series {series} cat {category}: {recovered} vs {truth}"
                );
            }
        }
    }

    #[test]
    fn tick_pixels_are_integers_and_evenly_spaced() {
        let t = table(&["a", "b"], &["r"], &[&[3.0, 97.0]]);
        let plan = layout_chart(&t, &spec(ChartType::Bar, Orientation::Vertical), 5).unwrap();
        let axis = plan.value_axis.unwrap();
        let step = axis.ticks[0].pixel - axis.ticks[1].pixel;
        for (i, t) in axis.ticks.iter().enumerate() {
            assert_eq!(t.pixel, t.pixel.round(), "tick {i} pixel {}", t.pixel);
            assert_eq!(axis.ticks[0].pixel - t.pixel, i as f64 * step);
        }
    }

    #[test]
    fn each_tick_label_is_rendered_exactly_once() {
        let t = table(&["Jan", "Feb"], &["Alpha"], &[&[3.0, 97.0]]);
        let plan = layout_chart(&t, &spec(ChartType::Bar, Orientation::Vertical), 5).unwrap();
        let ann = emit_annotations(&plan);
        let axis = plan.value_axis.unwrap();
        for tick in &axis.ticks {
            let n = ann.ocr_tokens.iter().filter(|t| t.text == tick.label).count();
            assert_eq!(n, 1, "tick label {:?} appears {n} times", tick.label);
        }
    }

    #[test]
    fn quarter_value_spans_ninety_degrees() {
        let t = table(&["share"], &["a", "b"], &[&[25.0], &[75.0]]);
        let plan = layout_chart(&t, &spec(ChartType::Pie, Orientation::Vertical), 2).unwrap();
        let Mark::Slice { start_deg, end_deg, .. } = plan.marks[0] else { panic!() };
        assert_eq!(start_deg, 0.0);
        assert_eq!(end_deg, 90.0);
        let Mark::Slice { start_deg, end_deg, .. } = plan.marks[1] else { panic!() };
        assert_eq!(start_deg, 90.0);
        assert_eq!(end_deg, 360.0);
    }

    #[test]
    fn pie_angles_cover_the_full_circle() {
        let t = table(&["v"], &["a", "b", "c"], &[&[10.0], &[20.1], &[30.7]]);
        let plan = layout_chart(&t, &spec(ChartType::Pie, Orientation::Vertical), 9).unwrap();
        let mut total = 0.0;
        let mut cursor = 0.0;
        for mark in &plan.marks {
            let Mark::Slice { start_deg, end_deg, .. } = mark else { panic!() };
            assert_eq!(*start_deg, cursor);
            cursor = *end_deg;
            total += end_deg - start_deg;
        }
        assert!((total - 360.0).abs() < 1e-6);
        assert_eq!(cursor, 360.0);
    }

    #[test]
    fn pie_draws_the_column_header_as_title_and_stacks_labels() {
        let t = table(&["Revenue"], &["North", "South"], &[&[40.0], &[60.0]]);
        let plan = layout_chart(&t, &spec(ChartType::Pie, Orientation::Vertical), 0).unwrap();
        assert_eq!(plan.texts[0].category, Category::ChartTitle);
        assert_eq!(plan.texts[0].text, "Revenue");
        let labels: Vec<&TextItem> =
            plan.texts.iter().filter(|t| t.category == Category::PieLabel).collect();
        assert_eq!(labels.len(), 4);
        // Name sits directly above its value with a shared center.
        assert_eq!(labels[0].text, "North");
        assert_eq!(labels[1].text, "40");
        assert!(labels[0].bbox.y2 <= labels[1].bbox.y1);
        assert!((labels[0].bbox.cx() - labels[1].bbox.cx()).abs() <= 0.5 + labels[0].bbox.width() / 2.0);
    }

    #[test]
    fn pie_rejects_unfit_tables() {
        let two_cols = table(&["a", "b"], &["r"], &[&[1.0, 2.0]]);
        let s = spec(ChartType::Pie, Orientation::Vertical);
        assert!(matches!(layout_chart(&two_cols, &s, 0), Err(SynthError::TableMismatch(_))));

        let negative = table(&["v"], &["r", "q"], &[&[5.0], &[-1.0]]);
        assert!(matches!(layout_chart(&negative, &s, 0), Err(SynthError::TableMismatch(_))));

        let titled = Table::new(
            vec!["v".into()],
            vec!["r".into(), "q".into()],
            vec![vec![Cell::Num(1.0)], vec![Cell::Num(2.0)]],
            Some("Budget".into()),
        )
        .unwrap();
        assert!(matches!(layout_chart(&titled, &s, 0), Err(SynthError::TableMismatch(_))));
    }

    #[test]
    fn spec_validation_rejects_bad_requests() {
        let t = table(&["a", "b"], &["r"], &[&[1.0, 2.0]]);
        let mut s = spec(ChartType::Bar, Orientation::Vertical);
        s.width = 100;
        assert!(matches!(layout_chart(&t, &s, 0), Err(SynthError::InvalidSpec(_))));

        let mut s = spec(ChartType::Bar, Orientation::Vertical);
        s.tick_count = 1;
        assert!(matches!(layout_chart(&t, &s, 0), Err(SynthError::InvalidSpec(_))));

        let mut s = spec(ChartType::Bar, Orientation::Vertical);
        s.palette.push(s.palette[0]);
        assert!(matches!(layout_chart(&t, &s, 0), Err(SynthError::InvalidSpec(_))));

        let s = spec(ChartType::Line, Orientation::Horizontal);
        assert!(matches!(layout_chart(&t, &s, 0), Err(SynthError::InvalidSpec(_))));

        let mut s = spec(ChartType::Bar, Orientation::Vertical);
        s.palette.truncate(1);
        let two_rows = table(&["a", "b"], &["r", "q"], &[&[1.0, 2.0], &[3.0, 4.0]]);
        assert!(matches!(layout_chart(&two_rows, &s, 0), Err(SynthError::TableMismatch(_))));
    }

    #[test]
    fn text_cells_cannot_be_charted() {
        let t = Table::new(
            vec!["a".into(), "b".into()],
            vec!["r".into()],
            vec![vec![Cell::Num(1.0), Cell::Text("n/a".into())]],
            None,
        )
        .unwrap();
        let s = spec(ChartType::Bar, Orientation::Vertical);
        assert!(matches!(layout_chart(&t, &s, 0), Err(SynthError::TableMismatch(_))));
    }

    #[test]
    fn layout_is_deterministic_and_seed_rotates_palette() {
        let t = table(&["a", "b", "c"], &["r1", "r2"], &[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let s = spec(ChartType::Bar, Orientation::Vertical);
        let p1 = layout_chart(&t, &s, 42).unwrap();
        let p2 = layout_chart(&t, &s, 42).unwrap();
        assert_eq!(p1, p2);
        let palette_rotations: std::collections::BTreeSet<[u8; 3]> =
            (0..32).map(|seed| layout_chart(&t, &s, seed).unwrap().series_colors[0]).collect();
        assert!(palette_rotations.len() > 1, "seed never rotates the palette");
    }

    #[test]
    fn renders_are_byte_identical_and_marks_carry_their_color() {
        let t = table(&["a", "b"], &["r1", "r2"], &[&[30.0, 70.0], &[55.0, 20.0]]);
        for (ct, orient) in [
            (ChartType::Bar, Orientation::Vertical),
            (ChartType::Bar, Orientation::Horizontal),
            (ChartType::Line, Orientation::Vertical),
        ] {
            let s = spec(ct, orient);
            let plan = layout_chart(&t, &s, 7).unwrap();
            let img1 = render(&plan, &s).unwrap();
            let img2 = render(&plan, &s).unwrap();
            assert_eq!(img1.as_raw(), img2.as_raw());
            for mark in &plan.marks {
                let (series, b) = match mark {
                    Mark::Bar { series, rect, .. } => (*series, rect),
                    Mark::Vertex { series, bbox, .. } => (*series, bbox),
                    Mark::Slice { .. } => unreachable!(),
                };
                let px = img1.get_pixel(b.cx() as u32, b.cy() as u32).0;
                assert_eq!(px, plan.series_colors[series], "{ct} mark center off-color");
            }
            // Legend swatches carry series colors too.
            let legend = plan.legend.as_ref().unwrap();
            for (i, swatch) in legend.swatches.iter().enumerate() {
                let px = img1.get_pixel(swatch.cx() as u32, swatch.cy() as u32).0;
                assert_eq!(px, plan.series_colors[i]);
            }
        }
    }

    #[test]
    fn pie_render_paints_marker_boxes_with_slice_colors() {
        let t = table(&["v"], &["a", "b", "c"], &[&[20.0], &[30.0], &[50.0]]);
        let s = spec(ChartType::Pie, Orientation::Vertical);
        let plan = layout_chart(&t, &s, 11).unwrap();
        let img = render(&plan, &s).unwrap();
        for mark in &plan.marks {
            let Mark::Slice { index, marker, .. } = mark else { panic!() };
            let px = img.get_pixel(marker.cx() as u32, marker.cy() as u32).0;
            assert_eq!(px, plan.series_colors[*index], "slice {index}");
        }
        // Disc center neighborhood is painted (no hole at the hub).
        let pie = plan.pie.unwrap();
        let px = img.get_pixel(pie.cx as u32 + 2, pie.cy as u32).0;
        assert!(plan.series_colors.contains(&px));
    }

    #[test]
    fn every_annotated_box_stays_inside_the_image() {
        let t = table(
            &["January", "February", "March"],
            &["Alpha", "Bravo", "Charlie"],
            &[&[10.0, 20.0, 30.0], &[40.0, 50.0, 60.0], &[70.0, 80.0, 90.0]],
        );
        for (ct, orient, legend_pos) in [
            (ChartType::Bar, Orientation::Vertical, LegendPos::Right),
            (ChartType::Bar, Orientation::Horizontal, LegendPos::Bottom),
            (ChartType::Line, Orientation::Vertical, LegendPos::Bottom),
        ] {
            let mut s = spec(ct, orient);
            s.legend_pos = legend_pos;
            let plan = layout_chart(&t, &s, 13).unwrap();
            let ann = emit_annotations(&plan);
            for r in &ann.regions {
                assert!(r.bbox.is_valid());
                assert!(r.bbox.x1 >= 0.0 && r.bbox.y1 >= 0.0);
                assert!(r.bbox.x2 <= ann.width as f64 && r.bbox.y2 <= ann.height as f64);
            }
        }
    }

    #[test]
    fn annotations_cover_all_header_strings() {
        let t = table(&["Q1", "Q2"], &["North", "South"], &[&[12.0, 34.0], &[56.0, 78.0]]);
        let plan = layout_chart(&t, &spec(ChartType::Line, Orientation::Vertical), 21).unwrap();
        let ann = emit_annotations(&plan);
        let texts: Vec<&str> = ann.ocr_tokens.iter().map(|t| t.text.as_str()).collect();
        for h in ["Q1", "Q2", "North", "South", "value", "category"] {
            assert!(texts.contains(&h), "missing {h:?} in {texts:?}");
        }
    }

    #[test]
    fn bars_within_a_group_never_overlap() {
        let t = table(
            &["a", "b", "c", "d", "e", "f"],
            &["r1", "r2", "r3", "r4"],
            &[
                &[10.0, 20.0, 30.0, 40.0, 50.0, 60.0],
                &[11.0, 21.0, 31.0, 41.0, 51.0, 61.0],
                &[12.0, 22.0, 32.0, 42.0, 52.0, 62.0],
                &[13.0, 23.0, 33.0, 43.0, 53.0, 63.0],
            ],
        );
        let plan = layout_chart(&t, &spec(ChartType::Bar, Orientation::Vertical), 17).unwrap();
        let mut by_cat: std::collections::BTreeMap<usize, Vec<(f64, f64)>> = Default::default();
        for mark in &plan.marks {
            let Mark::Bar { category, rect, .. } = mark else { panic!() };
            by_cat.entry(*category).or_default().push((rect.x1, rect.x2));
        }
        for (cat, mut spans) in by_cat {
            spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for pair in spans.windows(2) {
                assert!(pair[0].1 <= pair[1].0, "category {cat}: {pair:?} overlap");
            }
        }
    }

    #[test]
    fn corpus_synthesis_is_reproducible() {
        let table_cfg = crate::table::TableGenConfig::default();
        let spec_cfg = SpecConfig::default();
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let s1 = synth_corpus(&table_cfg, &spec_cfg, 6, 99, d1.path()).unwrap();
        let s2 = synth_corpus(&table_cfg, &spec_cfg, 6, 99, d2.path()).unwrap();
        assert_eq!(s1.n, 6);
        assert_eq!(s1.by_type.iter().sum::<u64>(), 6);
        let m1 = std::fs::read(&s1.manifest_path).unwrap();
        let m2 = std::fs::read(&s2.manifest_path).unwrap();
        assert!(!m1.is_empty());
        assert_eq!(m1, m2, "manifests differ between identical runs");
        for i in 0..6 {
            let rel = format!("images/s{i:06}.png");
            let p1 = std::fs::read(d1.path().join(&rel)).unwrap();
            let p2 = std::fs::read(d2.path().join(&rel)).unwrap();
            assert_eq!(p1, p2, "{rel} differs between identical runs");
        }
        let samples = crate::manifest::read_corpus(&s1.manifest_path).unwrap();
        assert_eq!(samples.len(), 6);
        for s in &samples {
            assert!(d1.path().join(&s.image_path).exists());
        }
    }

    #[test]
    fn category_names_serialize_to_the_fixed_vocabulary() {
        let expected = [
            "Legends",
            "yAxisTitle",
            "ChartTitle",
            "xAxisTitle",
            "LegendPreview",
            "PlotArea",
            "yAxisLabel",
            "xAxisLabel",
            "LegendLabel",
            "PieLabel",
            "bar",
            "pie",
            "pieSlice",
            "line",
            "dotLine",
        ];
        for (cat, name) in Category::ALL.iter().zip(expected) {
            assert_eq!(cat.name(), name);
            assert_eq!(serde_json::to_string(cat).unwrap(), format!("{name:?}"));
            assert_eq!(cat.to_string(), name);
        }
    }
}
