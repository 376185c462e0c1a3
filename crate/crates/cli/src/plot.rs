//! SVG heatmap of a long-format CSV (`x, y, value` in the first three columns).
//!
//! Colours encode the normalised value in the red channel (`r = round(255·v)`)
//! with blue as its complement, so a reader can recover values from the file.

use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 100.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 60.0;

/// Parsed heatmap data.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub labels: [String; 3],
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `cells[ix][iy]`, `None` where the CSV had no row.
    pub cells: Vec<Vec<Option<f64>>>,
}

fn distinct_sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl Heatmap {
    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let bad = |m: String| CliError::Invalid(format!("plot input: {m}"));
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
        if header.len() < 3 {
            return Err(bad(format!("need at least 3 columns, found {}", header.len())));
        }
        let mut rows = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| bad(e.to_string()))?;
            let mut v = [0.0; 3];
            for (k, slot) in v.iter_mut().enumerate() {
                let field = record.get(k).ok_or_else(|| bad(format!("row {} is short", line + 2)))?;
                *slot = field
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| bad(format!("row {}: '{field}' is not a finite number", line + 2)))?;
            }
            rows.push(v);
        }
        if rows.is_empty() {
            return Err(bad("no data rows".into()));
        }
        let xs = distinct_sorted(rows.iter().map(|r| r[0]).collect());
        let ys = distinct_sorted(rows.iter().map(|r| r[1]).collect());
        let mut cells = vec![vec![None; ys.len()]; xs.len()];
        for r in &rows {
            let ix = xs.partition_point(|&x| x < r[0]);
            let iy = ys.partition_point(|&y| y < r[1]);
            cells[ix][iy] = Some(r[2]);
        }
        let labels = [header[0].to_string(), header[1].to_string(), header[2].to_string()];
        Ok(Heatmap { labels, xs, ys, cells })
    }

    fn range(&self) -> (f64, f64) {
        let values = self.cells.iter().flatten().flatten();
        let lo = values.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = values.copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Normalised value in [0, 1]; a constant map is drawn at 0.
    pub fn normalise(&self, v: f64) -> f64 {
        let (lo, hi) = self.range();
        if hi > lo {
            ((v - lo) / (hi - lo)).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    pub fn to_svg(&self) -> String {
        let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let cw = plot_w / self.xs.len() as f64;
        let ch = plot_h / self.ys.len() as f64;
        let (lo, hi) = self.range();
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        );
        let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        for (ix, col) in self.cells.iter().enumerate() {
            for (iy, cell) in col.iter().enumerate() {
                if let Some(v) = cell {
                    let x = MARGIN_LEFT + ix as f64 * cw;
                    // y grows upwards in the plot
                    let y = MARGIN_TOP + plot_h - (iy + 1) as f64 * ch;
                    let _ = writeln!(
                        s,
                        r#"<rect x="{x:.3}" y="{y:.3}" width="{cw:.3}" height="{ch:.3}" fill="{}"/>"#,
                        colour(self.normalise(*v))
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
        );
        let (x0, x1) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let (y0, y1) = (self.ys[0], self.ys[self.ys.len() - 1]);
        let bottom = MARGIN_TOP + plot_h;
        let text = |s: &mut String, x: f64, y: f64, anchor: &str, t: &str| {
            let _ = writeln!(
                s,
                r#"<text x="{x:.3}" y="{y:.3}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{}</text>"#,
                escape(t)
            );
        };
        text(&mut s, MARGIN_LEFT, bottom + 16.0, "start", &format!("{x0:.4}"));
        text(&mut s, MARGIN_LEFT + plot_w, bottom + 16.0, "end", &format!("{x1:.4}"));
        text(&mut s, MARGIN_LEFT + plot_w / 2.0, bottom + 40.0, "middle", &self.labels[0]);
        text(&mut s, MARGIN_LEFT - 6.0, bottom, "end", &format!("{y0:.4}"));
        text(&mut s, MARGIN_LEFT - 6.0, MARGIN_TOP + 12.0, "end", &format!("{y1:.4}"));
        let _ = writeln!(
            s,
            r#"<text x="20" y="{:.3}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 20 {:.3})">{}</text>"#,
            MARGIN_TOP + plot_h / 2.0,
            MARGIN_TOP + plot_h / 2.0,
            escape(&self.labels[1])
        );
        // colour bar
        let bx = WIDTH - MARGIN_RIGHT + 20.0;
        let steps = 32;
        for k in 0..steps {
            let v = k as f64 / (steps - 1) as f64;
            let y = bottom - (k + 1) as f64 * plot_h / steps as f64;
            let _ = writeln!(
                s,
                r#"<rect x="{bx}" y="{y:.3}" width="16" height="{:.3}" fill="{}"/>"#,
                plot_h / steps as f64,
                colour(v)
            );
        }
        text(&mut s, bx + 20.0, bottom, "start", &format!("{lo:.4}"));
        text(&mut s, bx + 20.0, MARGIN_TOP + 12.0, "start", &format!("{hi:.4}"));
        text(&mut s, bx + 8.0, MARGIN_TOP - 10.0, "middle", &self.labels[2]);
        s.push_str("</svg>\n");
        s
    }
}

/// Fill colour of a normalised value.
pub fn colour(v: f64) -> String {
    let r = (255.0 * v.clamp(0.0, 1.0)).round() as u8;
    format!("#{r:02x}40{:02x}", 255 - r)
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads `csv`, renders it and writes `out`. Nothing is written on failure.
pub fn plot_file(csv: &Path, out: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(csv).map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
    let svg = Heatmap::from_csv(&text)?.to_svg();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Io(format!("{}: {e}", parent.display())))?;
    }
    std::fs::write(out, svg).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}
