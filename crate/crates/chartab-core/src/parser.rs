//! Geometric chart-to-table oracle: recovers a [`Table`] from an annotation
//! (regions + OCR) by calibrating the value axis against tick labels,
//! binding marks to categories by position, and associating series through
//! legend preview colors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ocr::OcrToken;
use crate::synth::{Annotation, BBox, Category, Color};
use crate::table::{Cell, ChartType, Table, TableError};

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("axis calibration failed: {0}")]
    Calibration(String),
    #[error("series association is ambiguous: {0}")]
    Ambiguous(String),
    #[error("{what} at [{x1:.0}, {y1:.0}, {x2:.0}, {y2:.0}] has no nearby {needed}", x1 = bbox.x1, y1 = bbox.y1, x2 = bbox.x2, y2 = bbox.y2)]
    Unbound { what: &'static str, needed: &'static str, bbox: BBox },
    #[error("annotation does not describe a supported chart: {0}")]
    Unsupported(String),
    #[error("incomplete chart: {0}")]
    MissingInput(String),
    #[error("parsed cells do not form a table: {0}")]
    Table(#[from] TableError),
}

/// Affine pixel→value map `v = a·p + b` fitted to the tick labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMap {
    pub a: f64,
    pub b: f64,
    /// Root-mean-square residual of the fit, in value units.
    pub residual: f64,
    pub ticks_used: usize,
}

impl AxisMap {
    pub fn value_at(&self, pixel: f64) -> f64 {
        self.a * pixel + self.b
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub chart_type: Option<ChartType>,
    pub axis_residual: Option<f64>,
    /// |value change per pixel| along the calibrated axis.
    pub value_per_pixel: Option<f64>,
    pub ticks_used: usize,
    pub warnings: Vec<String>,
    /// Consistency findings that did not stop the parse (e.g. pie slice
    /// angles disagreeing with their labeled values).
    pub flags: Vec<String>,
}

/// Least-squares `value = a·pixel + b` over numeric tick labels. `pixel` is
/// the label-box center along the value axis. Non-numeric labels are
/// skipped with a warning; fewer than two numeric ticks is an error.
pub fn calibrate_axis(
    ticks: &[(String, BBox)],
    vertical: bool,
    warnings: &mut Vec<String>,
) -> Result<AxisMap, ParseError> {
    let mut points: Vec<(f64, f64)> = Vec::with_capacity(ticks.len());
    for (text, bbox) in ticks {
        match text.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => {
                points.push((if vertical { bbox.cy() } else { bbox.cx() }, v));
            }
            _ => warnings.push(format!("skipped non-numeric tick label {text:?}")),
        }
    }
    if points.len() < 2 {
        return Err(ParseError::Calibration(format!(
            "{} numeric tick labels of {} total; need at least 2",
            points.len(),
            ticks.len()
        )));
    }
    let n = points.len() as f64;
    let mean_p = points.iter().map(|(p, _)| p).sum::<f64>() / n;
    let mean_v = points.iter().map(|(_, v)| v).sum::<f64>() / n;
    let var_p = points.iter().map(|(p, _)| (p - mean_p) * (p - mean_p)).sum::<f64>();
    let cov = points.iter().map(|(p, v)| (p - mean_p) * (v - mean_v)).sum::<f64>();
    if var_p == 0.0 {
        return Err(ParseError::Calibration("tick centers coincide".to_string()));
    }
    let a = cov / var_p;
    if a == 0.0 {
        return Err(ParseError::Calibration("axis has zero slope".to_string()));
    }
    let b = mean_v - a * mean_p;
    let residual = (points.iter().map(|(p, v)| (a * p + b - v).powi(2)).sum::<f64>() / n).sqrt();
    Ok(AxisMap { a, b, residual, ticks_used: points.len() })
}

/// Texts of all regions of `category`, read off the OCR token whose center
/// lies closest to the region's. Regions whose nearest token center falls
/// outside the region inflated by `slack` px stay textless (dropped tokens).
fn texts_of(
    annotation: &Annotation,
    tokens: &[OcrToken],
    category: Category,
    slack: f64,
) -> Vec<(String, BBox)> {
    let mut out = Vec::new();
    for region in annotation.regions.iter().filter(|r| r.category == category) {
        let (rcx, rcy) = (region.bbox.cx(), region.bbox.cy());
        let nearest = tokens
            .iter()
            .map(|t| {
                let d = (t.bbox.cx() - rcx).powi(2) + (t.bbox.cy() - rcy).powi(2);
                (d, t)
            })
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.index.cmp(&b.1.index)));
        if let Some((_, token)) = nearest {
            let inside = token.bbox.cx() >= region.bbox.x1 - slack
                && token.bbox.cx() <= region.bbox.x2 + slack
                && token.bbox.cy() >= region.bbox.y1 - slack
                && token.bbox.cy() <= region.bbox.y2 + slack;
            if inside {
                out.push((token.text.clone(), region.bbox));
            }
        }
    }
    out
}

const TOKEN_SLACK: f64 = 10.0;

struct SeriesIndex {
    names: Vec<String>,
    colors: Vec<Option<Color>>,
}

impl SeriesIndex {
    /// Row index for a mark color: exact RGB match first, else nearest in
    /// squared RGB distance; equidistant distinct series are an error.
    fn series_of(&self, color: Color) -> Result<usize, ParseError> {
        if self.colors.len() == 1 {
            return Ok(0);
        }
        let mut best: Option<(i64, usize)> = None;
        let mut tie: Option<usize> = None;
        for (i, c) in self.colors.iter().enumerate() {
            let Some(c) = c else { continue };
            let d: i64 = c
                .iter()
                .zip(color.iter())
                .map(|(a, b)| {
                    let d = *a as i64 - *b as i64;
                    d * d
                })
                .sum();
            match best {
                Some((bd, _)) if d > bd => {}
                Some((bd, _)) if d == bd => tie = Some(i),
                _ => {
                    best = Some((d, i));
                    tie = None;
                }
            }
        }
        match (best, tie) {
            (Some((_, i)), None) => Ok(i),
            (Some((_, i)), Some(j)) => Err(ParseError::Ambiguous(format!(
                "mark color {color:?} is equally near series {:?} and {:?}",
                self.names[i], self.names[j]
            ))),
            (None, _) => Err(ParseError::MissingInput("no series colors known".to_string())),
        }
    }
}

/// Builds the series index from legend previews and labels; charts without a
/// legend get one default series.
fn read_legend(
    annotation: &Annotation,
    tokens: &[OcrToken],
    warnings: &mut Vec<String>,
) -> Result<SeriesIndex, ParseError> {
    let mut previews: Vec<(BBox, Color)> = annotation
        .regions
        .iter()
        .filter(|r| r.category == Category::LegendPreview)
        .map(|r| (r.bbox, r.color))
        .collect();
    if previews.is_empty() {
        warnings.push("no legend previews; assuming a single series".to_string());
        return Ok(SeriesIndex { names: vec!["series".to_string()], colors: vec![None] });
    }
    previews.sort_by(|a, b| (a.0.y1, a.0.x1).partial_cmp(&(b.0.y1, b.0.x1)).unwrap());
    let labels = texts_of(annotation, tokens, Category::LegendLabel, TOKEN_SLACK);
    let mut names = Vec::with_capacity(previews.len());
    for (bbox, _) in &previews {
        // A legend label sits flush right of its swatch, so measure from the
        // swatch's right-center to the label's left-center; plain center
        // distance would let a short label in the next row win.
        let (scx, scy) = (bbox.x2, bbox.cy());
        let nearest = labels
            .iter()
            .map(|(text, lb)| ((lb.x1 - scx).powi(2) + (lb.cy() - scy).powi(2), text))
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        match nearest {
            Some((_, text)) => names.push(text.clone()),
            None => {
                return Err(ParseError::MissingInput(format!(
                    "legend preview at [{:.0}, {:.0}] has no readable label",
                    bbox.x1, bbox.y1
                )))
            }
        }
    }
    for (i, (_, c)) in previews.iter().enumerate() {
        if let Some(j) = previews[..i].iter().position(|(_, o)| o == c) {
            return Err(ParseError::Ambiguous(format!(
                "series {:?} and {:?} share the legend color {c:?}",
                names[j], names[i]
            )));
        }
    }
    let colors = previews.iter().map(|(_, c)| Some(*c)).collect();
    Ok(SeriesIndex { names, colors })
}

/// Nearest category label along the category axis; ties go to label order.
fn bind_category(center: f64, label_centers: &[f64]) -> Option<usize> {
    label_centers
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - center)
                .abs()
                .partial_cmp(&(b.1 - center).abs())
                .unwrap()
                .then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
}

fn assemble_grid(
    cells: BTreeMap<(usize, usize), f64>,
    series: &SeriesIndex,
    col_headers: Vec<String>,
) -> Result<Table, ParseError> {
    let mut values = Vec::with_capacity(series.names.len());
    for (i, name) in series.names.iter().enumerate() {
        let mut row = Vec::with_capacity(col_headers.len());
        for (j, header) in col_headers.iter().enumerate() {
            match cells.get(&(i, j)) {
                Some(v) => row.push(Cell::Num(*v)),
                None => {
                    return Err(ParseError::MissingInput(format!(
                        "series {name:?} has no mark for category {header:?}"
                    )))
                }
            }
        }
        values.push(row);
    }
    Ok(Table::new(col_headers, series.names.clone(), values, None)?)
}

fn parse_xy_chart(
    annotation: &Annotation,
    tokens: &[OcrToken],
    chart_type: ChartType,
    report: &mut ParseReport,
) -> Result<Table, ParseError> {
    let mark_category = if chart_type == ChartType::Bar { Category::Bar } else { Category::Line };
    let marks: Vec<(BBox, Color)> = annotation
        .regions
        .iter()
        .filter(|r| r.category == mark_category)
        .map(|r| (r.bbox, r.color))
        .collect();
    if marks.is_empty() {
        return Err(ParseError::MissingInput(format!("no {mark_category} regions")));
    }

    // Orientation: bars grow away from a shared anchored edge. Lines are
    // always vertical. If the anchor is ambiguous (single bar), fall back to
    // whichever axis reads more numeric.
    let y_texts = texts_of(annotation, tokens, Category::YAxisLabel, TOKEN_SLACK);
    let x_texts = texts_of(annotation, tokens, Category::XAxisLabel, TOKEN_SLACK);
    let vertical = if chart_type == ChartType::Line {
        true
    } else {
        let quant = |v: f64| (v * 1024.0).round() as i64;
        let y2s: std::collections::BTreeSet<i64> = marks.iter().map(|(b, _)| quant(b.y2)).collect();
        let x1s: std::collections::BTreeSet<i64> = marks.iter().map(|(b, _)| quant(b.x1)).collect();
        if y2s.len() == 1 && x1s.len() > 1 {
            true
        } else if x1s.len() == 1 && y2s.len() > 1 {
            false
        } else {
            let numeric = |ts: &[(String, BBox)]| {
                ts.iter().filter(|(t, _)| t.trim().parse::<f64>().is_ok()).count()
            };
            numeric(&y_texts) >= numeric(&x_texts)
        }
    };

    let (tick_texts, cat_texts) = if vertical { (&y_texts, &x_texts) } else { (&x_texts, &y_texts) };
    let axis = calibrate_axis(tick_texts, vertical, &mut report.warnings)?;
    report.axis_residual = Some(axis.residual);
    report.value_per_pixel = Some(axis.a.abs());
    report.ticks_used = axis.ticks_used;

    // Category labels ordered along the category axis.
    let mut cats: Vec<(f64, String)> = cat_texts
        .iter()
        .map(|(text, b)| (if vertical { b.cx() } else { b.cy() }, text.clone()))
        .collect();
    cats.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    if cats.is_empty() {
        return Err(ParseError::MissingInput("no category labels".to_string()));
    }
    let centers: Vec<f64> = cats.iter().map(|(c, _)| *c).collect();
    let col_headers: Vec<String> = cats.into_iter().map(|(_, t)| t).collect();

    let series = read_legend(annotation, tokens, &mut report.warnings)?;

    let mut cells: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (bbox, color) in &marks {
        let i = series.series_of(*color)?;
        let (cat_pos, value_px) = match (chart_type, vertical) {
            (ChartType::Bar, true) => (bbox.cx(), bbox.y1),
            (ChartType::Bar, false) => (bbox.cy(), bbox.x2),
            (ChartType::Line, _) => (bbox.cx(), bbox.cy()),
            (ChartType::Pie, _) => unreachable!("pie dispatches elsewhere"),
        };
        let j = bind_category(cat_pos, &centers).ok_or(ParseError::Unbound {
            what: "mark",
            needed: "category label",
            bbox: *bbox,
        })?;
        if cells.insert((i, j), axis.value_at(value_px)).is_some() {
            return Err(ParseError::MissingInput(format!(
                "two {mark_category} marks claim series {:?} category {:?}",
                series.names[i], col_headers[j]
            )));
        }
    }
    assemble_grid(cells, &series, col_headers)
}

fn circular_distance_deg(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

fn clock_angle_deg(dx: f64, dy: f64) -> f64 {
    let a = dx.atan2(-dy).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

/// Numeric reading of a pie value label: plain number, or number with a
/// trailing percent sign.
fn pie_numeric(text: &str) -> Option<f64> {
    let t = text.trim();
    let t = t.strip_suffix('%').unwrap_or(t);
    t.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_pie_chart(
    annotation: &Annotation,
    tokens: &[OcrToken],
    report: &mut ParseReport,
) -> Result<Table, ParseError> {
    let slices: Vec<(BBox, Color)> = annotation
        .regions
        .iter()
        .filter(|r| r.category == Category::PieSlice)
        .map(|r| (r.bbox, r.color))
        .collect();
    if slices.is_empty() {
        return Err(ParseError::MissingInput("no pieSlice regions".to_string()));
    }

    let (cx, cy) = match annotation.regions.iter().find(|r| r.category == Category::Pie) {
        Some(disc) => (disc.bbox.cx(), disc.bbox.cy()),
        None => {
            report
                .warnings
                .push("no pie disc region; using the slice-marker centroid as center".to_string());
            let n = slices.len() as f64;
            (
                slices.iter().map(|(b, _)| b.cx()).sum::<f64>() / n,
                slices.iter().map(|(b, _)| b.cy()).sum::<f64>() / n,
            )
        }
    };

    // Slice order = clockwise from 12 o'clock, read from marker angles.
    let mut angled: Vec<(f64, BBox)> = slices
        .iter()
        .map(|(b, _)| (clock_angle_deg(b.cx() - cx, b.cy() - cy), *b))
        .collect();
    angled.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    // Pie labels split into name labels and numeric value labels.
    let labels = texts_of(annotation, tokens, Category::PieLabel, TOKEN_SLACK);
    let mut names: Vec<(f64, String)> = Vec::new();
    let mut numbers: Vec<(f64, f64, String)> = Vec::new();
    for (text, bbox) in &labels {
        let angle = clock_angle_deg(bbox.cx() - cx, bbox.cy() - cy);
        match pie_numeric(text) {
            Some(v) => numbers.push((angle, v, text.clone())),
            None => names.push((angle, text.clone())),
        }
    }

    let mut row_headers = Vec::with_capacity(angled.len());
    let mut values = Vec::with_capacity(angled.len());
    let mut used_name = vec![false; names.len()];
    let mut used_number = vec![false; numbers.len()];
    for (theta, bbox) in &angled {
        let nearest_name = names
            .iter()
            .enumerate()
            .min_by(|a, b| {
                circular_distance_deg(a.1 .0, *theta)
                    .partial_cmp(&circular_distance_deg(b.1 .0, *theta))
                    .unwrap()
            })
            .map(|(i, (_, t))| (i, t.clone()));
        let nearest_number = numbers
            .iter()
            .enumerate()
            .min_by(|a, b| {
                circular_distance_deg(a.1 .0, *theta)
                    .partial_cmp(&circular_distance_deg(b.1 .0, *theta))
                    .unwrap()
            })
            .map(|(i, (_, v, _))| (i, *v));
        let Some((ni, name)) = nearest_name else {
            return Err(ParseError::Unbound { what: "pie slice", needed: "name label", bbox: *bbox });
        };
        let Some((vi, value)) = nearest_number else {
            return Err(ParseError::Unbound {
                what: "pie slice",
                needed: "numeric label",
                bbox: *bbox,
            });
        };
        if std::mem::replace(&mut used_name[ni], true) {
            return Err(ParseError::Ambiguous(format!(
                "pie label {name:?} is nearest to two different slices"
            )));
        }
        if std::mem::replace(&mut used_number[vi], true) {
            return Err(ParseError::Ambiguous(format!(
                "pie value {:?} is nearest to two different slices",
                numbers[vi].2
            )));
        }
        row_headers.push(name);
        values.push(value);
    }

    // Checksum: marker angles must agree with the value-implied mid-angles.
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        let mut cum = 0.0;
        for ((theta, _), v) in angled.iter().zip(&values) {
            let implied_mid = (cum + v / 2.0) / total * 360.0;
            cum += v;
            let delta = circular_distance_deg(*theta, implied_mid);
            if delta > 2.0 {
                report.flags.push(format!(
                    "slice at {theta:.1} deg disagrees with its labeled value by {delta:.1} deg"
                ));
            }
        }
    }

    let col_header = match texts_of(annotation, tokens, Category::ChartTitle, TOKEN_SLACK).first()
    {
        Some((text, _)) => text.clone(),
        None => {
            report.warnings.push("no chart title; defaulting the value column header".to_string());
            "value".to_string()
        }
    };
    let cells = values.into_iter().map(|v| vec![Cell::Num(v)]).collect();
    Ok(Table::new(vec![col_header], row_headers, cells, None)?)
}

/// Parses any supported annotation, dispatching on the mark categories
/// present: `pieSlice` ⇒ pie, `line` ⇒ line, `bar` ⇒ bar.
pub fn parse_chart(
    annotation: &Annotation,
    tokens: &[OcrToken],
) -> Result<(Table, ParseReport), ParseError> {
    let mut report = ParseReport::default();
    let has = |c: Category| annotation.regions.iter().any(|r| r.category == c);
    let chart_type = if has(Category::PieSlice) {
        ChartType::Pie
    } else if has(Category::Line) {
        ChartType::Line
    } else if has(Category::Bar) {
        ChartType::Bar
    } else {
        return Err(ParseError::Unsupported(
            "no bar, line, or pieSlice mark regions present".to_string(),
        ));
    };
    report.chart_type = Some(chart_type);
    let table = match chart_type {
        ChartType::Pie => parse_pie_chart(annotation, tokens, &mut report)?,
        other => parse_xy_chart(annotation, tokens, other, &mut report)?,
    };
    Ok((table, report))
}
