//! Standalone SVG heatmaps of a rectangular sweep.
//!
//! One `<rect class="cell">` per grid cell, the x column along the bottom
//! axis, the y column up the left axis and a vertical color bar on the
//! right. Colors interpolate linearly in RGB between the ramp endpoints.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::SweepResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorRamp {
    pub low: [u8; 3],
    pub high: [u8; 3],
}

impl Default for ColorRamp {
    /// Dark purple `#440154` at the low end, yellow `#fde725` at the high end.
    fn default() -> Self {
        ColorRamp {
            low: [0x44, 0x01, 0x54],
            high: [0xfd, 0xe7, 0x25],
        }
    }
}

impl ColorRamp {
    /// Color for `z`, clamped into `[lo, hi]`. A degenerate range maps
    /// everything to the low color.
    pub fn color(&self, z: f64, lo: f64, hi: f64) -> String {
        let t = if hi > lo { ((z - lo) / (hi - lo)).clamp(0.0, 1.0) } else { 0.0 };
        let t = if t.is_nan() { 0.0 } else { t };
        let ch = |a: u8, b: u8| (a as f64 + t * (b as f64 - a as f64)).round() as u8;
        format!(
            "#{:02x}{:02x}{:02x}",
            ch(self.low[0], self.high[0]),
            ch(self.low[1], self.high[1]),
            ch(self.low[2], self.high[2])
        )
    }
}

#[derive(Clone, Copy, PartialEq, PartialOrd)]
struct Key(f64);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

const CELL: f64 = 24.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_BOTTOM: f64 = 60.0;
const MARGIN_TOP: f64 = 30.0;
const BAR_GAP: f64 = 30.0;
const BAR_WIDTH: f64 = 18.0;

fn short(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e12 {
        format!("{}", x as i64)
    } else {
        format!("{}", (x * 1e6).round() / 1e6)
    }
}

/// Renders `z_col` over the `(x_col, y_col)` grid. `z_range` fixes the ends
/// of the color ramp, typically the claim bounds `(L, U)`.
pub fn render_heatmap_svg(
    result: &SweepResult,
    x_col: &str,
    y_col: &str,
    z_col: &str,
    z_range: (f64, f64),
    ramp: ColorRamp,
) -> Result<String> {
    let col = |name: &str| {
        result
            .column_index(name)
            .ok_or_else(|| Error::Format(format!("no column `{name}`")))
    };
    let (xi, yi, zi) = (col(x_col)?, col(y_col)?, col(z_col)?);

    let mut cells: BTreeMap<(Key, Key), f64> = BTreeMap::new();
    let mut xs = BTreeSet::new();
    let mut ys = BTreeSet::new();
    for row in &result.rows {
        let num = |i: usize| {
            row[i]
                .as_f64()
                .ok_or_else(|| Error::Format(format!("non-numeric cell in `{}`", result.columns[i])))
        };
        let (x, y) = (Key(num(xi)?), Key(num(yi)?));
        // Failed rows have blank values; they show up as missing cells below.
        let Some(z) = row[zi].as_f64() else { continue };
        xs.insert(x);
        ys.insert(y);
        if cells.insert((x, y), z).is_some() {
            return Err(Error::Format(format!(
                "duplicate cell ({}, {})",
                short(x.0),
                short(y.0)
            )));
        }
    }
    // Grid coordinates of rows without a z value still belong to the grid.
    for row in &result.rows {
        if let (Some(x), Some(y)) = (row[xi].as_f64(), row[yi].as_f64()) {
            xs.insert(Key(x));
            ys.insert(Key(y));
        }
    }
    let missing: Vec<String> = xs
        .iter()
        .flat_map(|x| ys.iter().map(move |y| (*x, *y)))
        .filter(|k| !cells.contains_key(k))
        .map(|(x, y)| format!("({x_col}={}, {y_col}={})", short(x.0), short(y.0)))
        .collect();
    if !missing.is_empty() {
        return Err(Error::IncompleteGrid(missing.join(", ")));
    }
    if cells.is_empty() {
        return Err(Error::IncompleteGrid("empty grid".to_owned()));
    }

    let (lo, hi) = z_range;
    let nx = xs.len() as f64;
    let ny = ys.len() as f64;
    let plot_w = nx * CELL;
    let plot_h = ny * CELL;
    let bar_x = MARGIN_LEFT + plot_w + BAR_GAP;
    let width = bar_x + BAR_WIDTH + 60.0;
    let height = MARGIN_TOP + plot_h + MARGIN_BOTTOM;
    let plot_bottom = MARGIN_TOP + plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, r#"<g class="cells">"#);
    for (ix, x) in xs.iter().enumerate() {
        for (iy, y) in ys.iter().enumerate() {
            let z = cells[&(*x, *y)];
            let px = MARGIN_LEFT + ix as f64 * CELL;
            let py = plot_bottom - (iy as f64 + 1.0) * CELL;
            let _ = writeln!(
                svg,
                r#"<rect class="cell" x="{px}" y="{py}" width="{CELL}" height="{CELL}" fill="{}"><title>{x_col}={} {y_col}={} {z_col}={}</title></rect>"#,
                ramp.color(z, lo, hi),
                short(x.0),
                short(y.0),
                short(z)
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    // Axes.
    let _ = writeln!(svg, r#"<g class="axes" stroke="black">"#);
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{plot_bottom}" x2="{}" y2="{plot_bottom}"/>"#,
        MARGIN_LEFT + plot_w
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{plot_bottom}"/>"#
    );
    let _ = writeln!(svg, "</g>");
    for (ix, x) in xs.iter().enumerate() {
        let px = MARGIN_LEFT + (ix as f64 + 0.5) * CELL;
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{px}" y="{}" text-anchor="middle">{}</text>"#,
            plot_bottom + 14.0,
            short(x.0)
        );
    }
    for (iy, y) in ys.iter().enumerate() {
        let py = plot_bottom - (iy as f64 + 0.5) * CELL + 3.0;
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{}" y="{py}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            short(y.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle" font-size="13">{x_col}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        plot_bottom + 40.0
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="20" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 20 {})">{y_col}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0
    );

    // Color bar, bottom = ramp minimum.
    let _ = writeln!(svg, r#"<g class="colorbar">"#);
    let steps = 32;
    let step_h = plot_h / steps as f64;
    for s in 0..steps {
        let t = (s as f64 + 0.5) / steps as f64;
        let py = plot_bottom - (s as f64 + 1.0) * step_h;
        let _ = writeln!(
            svg,
            r#"<rect x="{bar_x}" y="{py}" width="{BAR_WIDTH}" height="{step_h}" fill="{}"/>"#,
            ramp.color(lo + t * (hi - lo), lo, hi)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{}</text>"#,
        bar_x + BAR_WIDTH + 4.0,
        plot_bottom,
        short(lo)
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}">{}</text>"#,
        bar_x + BAR_WIDTH + 4.0,
        MARGIN_TOP + 8.0,
        short(hi)
    );
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{bar_x}" y="{}" font-size="11">{z_col}</text>"#,
        MARGIN_TOP - 10.0
    );
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_heatmap_svg(
    result: &SweepResult,
    x_col: &str,
    y_col: &str,
    z_col: &str,
    z_range: (f64, f64),
    path: impl AsRef<Path>,
) -> Result<()> {
    let svg = render_heatmap_svg(result, x_col, y_col, z_col, z_range, ColorRamp::default())?;
    let path = path.as_ref();
    fs::write(path, svg).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
