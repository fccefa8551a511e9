//! Rasterizes a [`LayoutPlan`] into an RGB image. Drawing is pure integer
//! arithmetic over the already-snapped layout, so repeated renders are
//! byte-identical.

use image::{Rgb, RgbImage};

use super::font;
use super::{BBox, Category, ChartSpec, Color, LayoutPlan, Mark, SynthError, BLACK, WHITE};
use crate::table::ChartType;

struct Canvas {
    img: RgbImage,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Canvas {
        let img = RgbImage::from_pixel(width, height, Rgb(WHITE));
        Canvas { img }
    }

    fn put(&mut self, x: i64, y: i64, color: Color) {
        if x >= 0 && y >= 0 && (x as u32) < self.img.width() && (y as u32) < self.img.height() {
            self.img.put_pixel(x as u32, y as u32, Rgb(color));
        }
    }

    /// Fills the half-open pixel rectangle `[x1, x2) x [y1, y2)`.
    fn fill_rect(&mut self, b: &BBox, color: Color) {
        for y in b.y1 as i64..b.y2 as i64 {
            for x in b.x1 as i64..b.x2 as i64 {
                self.put(x, y, color);
            }
        }
    }

    fn outline_rect(&mut self, b: &BBox, color: Color) {
        let (x1, y1, x2, y2) = (b.x1 as i64, b.y1 as i64, b.x2 as i64 - 1, b.y2 as i64 - 1);
        for x in x1..=x2 {
            self.put(x, y1, color);
            self.put(x, y2, color);
        }
        for y in y1..=y2 {
            self.put(x1, y, color);
            self.put(x2, y, color);
        }
    }

    fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, color: Color) {
        let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
        let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
        let (mut x, mut y, mut err) = (x0, y0, dx + dy);
        loop {
            self.put(x, y, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }

    fn text(&mut self, text: &str, b: &BBox, scale: u32, color: Color) {
        let s = scale as i64;
        let (mut x, y) = (b.x1 as i64, b.y1 as i64);
        for ch in text.chars() {
            let rows = font::glyph(ch);
            for (r, bits) in rows.iter().enumerate() {
                for c in 0..font::GLYPH_W as usize {
                    if bits & (1 << (font::GLYPH_W as usize - 1 - c)) != 0 {
                        for dy in 0..s {
                            for dx in 0..s {
                                self.put(x + c as i64 * s + dx, y + r as i64 * s + dy, color);
                            }
                        }
                    }
                }
            }
            x += font::CELL_W as i64 * s;
        }
    }
}

/// Clockwise angle from 12 o'clock of the pixel-center vector, in degrees
/// within `[0, 360)`.
fn clock_angle_deg(dx: f64, dy: f64) -> f64 {
    let a = dx.atan2(-dy).to_degrees();
    if a < 0.0 {
        a + 360.0
    } else {
        a
    }
}

pub fn render(layout: &LayoutPlan, spec: &ChartSpec) -> Result<RgbImage, SynthError> {
    if spec.width != layout.width || spec.height != layout.height {
        return Err(SynthError::InvalidSpec(format!(
            "spec is {}x{} but the layout was built for {}x{}",
            spec.width, spec.height, layout.width, layout.height
        )));
    }
    let scale = font::scale_for(spec.font_px);
    let mut canvas = Canvas::new(layout.width, layout.height);

    if let Some(axis) = &layout.value_axis {
        let p = &layout.plot;
        canvas.line(p.x1 as i64, p.y1 as i64, p.x1 as i64, p.y2 as i64, BLACK);
        canvas.line(p.x1 as i64, p.y2 as i64, p.x2 as i64, p.y2 as i64, BLACK);
        for t in &axis.ticks {
            if axis.vertical {
                canvas.line(p.x1 as i64 - 4, t.pixel as i64, p.x1 as i64 - 1, t.pixel as i64, BLACK);
            } else {
                canvas.line(t.pixel as i64, p.y2 as i64 + 1, t.pixel as i64, p.y2 as i64 + 4, BLACK);
            }
        }
    }

    match layout.chart_type {
        ChartType::Bar => {
            for mark in &layout.marks {
                if let Mark::Bar { series, rect, .. } = mark {
                    canvas.fill_rect(rect, layout.series_colors[*series]);
                }
            }
        }
        ChartType::Line => {
            // Connect each series' vertices in category order, then draw the
            // 6x6 vertex markers on top.
            let mut by_series: Vec<Vec<(usize, i64, i64)>> = vec![Vec::new(); layout.series_colors.len()];
            for mark in &layout.marks {
                if let Mark::Vertex { series, category, bbox } = mark {
                    by_series[*series].push((*category, bbox.cx() as i64, bbox.cy() as i64));
                }
            }
            for (series, mut pts) in by_series.into_iter().enumerate() {
                pts.sort_by_key(|p| p.0);
                let color = layout.series_colors[series];
                for pair in pts.windows(2) {
                    canvas.line(pair[0].1, pair[0].2, pair[1].1, pair[1].2, color);
                }
            }
            for mark in &layout.marks {
                if let Mark::Vertex { series, bbox, .. } = mark {
                    canvas.fill_rect(bbox, layout.series_colors[*series]);
                }
            }
        }
        ChartType::Pie => {
            let pie = layout.pie.as_ref().expect("pie layout carries a disc");
            let slices: Vec<(f64, f64, Color)> = layout
                .marks
                .iter()
                .filter_map(|m| match m {
                    Mark::Slice { index, start_deg, end_deg, .. } => {
                        Some((*start_deg, *end_deg, layout.series_colors[*index]))
                    }
                    _ => None,
                })
                .collect();
            let r2 = pie.r * pie.r;
            for y in (pie.cy - pie.r) as i64..=(pie.cy + pie.r) as i64 {
                for x in (pie.cx - pie.r) as i64..=(pie.cx + pie.r) as i64 {
                    let (dx, dy) = (x as f64 + 0.5 - pie.cx, y as f64 + 0.5 - pie.cy);
                    if dx * dx + dy * dy > r2 {
                        continue;
                    }
                    let a = clock_angle_deg(dx, dy);
                    if let Some((_, _, color)) = slices.iter().find(|(s, e, _)| *s <= a && a < *e) {
                        canvas.put(x, y, *color);
                    }
                }
            }
        }
    }

    if let Some(legend) = &layout.legend {
        canvas.outline_rect(&legend.frame, BLACK);
        for (i, swatch) in legend.swatches.iter().enumerate() {
            canvas.fill_rect(swatch, layout.series_colors[i]);
        }
    }

    for t in &layout.texts {
        debug_assert!(t.category != Category::PlotArea);
        canvas.text(&t.text, &t.bbox, scale, BLACK);
    }

    Ok(canvas.img)
}
