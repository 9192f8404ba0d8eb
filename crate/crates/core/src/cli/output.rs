//! CSV and SVG writers. Floats use the shortest representation that
//! round-trips, so files are byte-stable for a fixed configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::dynamics::RunRecord;
use crate::Result;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Accumulates CSV rows with LF line endings.
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.buf.push_str(&cells.join(","));
        self.buf.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.buf)?;
        Ok(())
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

pub fn series_csv(rec: &RunRecord) -> Csv {
    let mut csv = Csv::new(&["step", "time", "V_t", "mean_f", "consensus_spread", "evals"]);
    for r in &rec.series {
        csv.row(&[
            r.step.to_string(),
            fmt_f64(r.time),
            fmt_f64(r.v_t),
            fmt_f64(r.mean_f),
            fmt_f64(r.consensus_spread),
            r.evals.to_string(),
        ]);
    }
    csv
}

pub fn snapshots_csv(rec: &RunRecord) -> Csv {
    let coords: Vec<String> = (0..rec.dim).map(|k| format!("coord{k}")).collect();
    let mut header = vec!["step", "particle"];
    header.extend(coords.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for s in &rec.snapshots {
        for (i, p) in s.positions.chunks_exact(rec.dim).enumerate() {
            let mut cells = vec![s.step.to_string(), i.to_string()];
            cells.extend(p.iter().map(|x| fmt_f64(*x)));
            csv.row(&cells);
        }
    }
    csv
}

const W: f64 = 480.0;
const H: f64 = 320.0;
const PAD: f64 = 40.0;

fn svg_frame(title: &str, body: &str, x_range: (f64, f64), y_label: &str) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{cx}" y="18" text-anchor="middle" font-size="13">{title}</text>
{body}<line x1="{PAD}" y1="{yb}" x2="{xr}" y2="{yb}" stroke="black"/>
<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{yb}" stroke="black"/>
<text x="{PAD}" y="{yt}" text-anchor="middle">{lo:.3}</text>
<text x="{xr}" y="{yt}" text-anchor="middle">{hi:.3}</text>
<text x="12" y="{cy}" transform="rotate(-90 12 {cy})" text-anchor="middle">{y_label}</text>
</svg>
"#,
        cx = W / 2.0,
        cy = H / 2.0,
        yb = H - PAD,
        xr = W - PAD,
        yt = H - PAD + 14.0,
        lo = x_range.0,
        hi = x_range.1,
    );
    s
}

fn range(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, lo + 0.5)
    }
}

/// Histogram of the first coordinate (1D) or a 2D occupancy map.
pub fn histogram_svg(positions: &[f64], dim: usize, title: &str) -> String {
    const BINS: usize = 40;
    let pw = W - 2.0 * PAD;
    let ph = H - 2.0 * PAD;
    let mut body = String::new();
    let xr = range(positions.chunks_exact(dim).map(|p| p[0]));
    let bin = |x: f64, (lo, hi): (f64, f64)| (((x - lo) / (hi - lo) * BINS as f64) as usize).min(BINS - 1);
    if dim == 1 {
        let mut counts = [0usize; BINS];
        for &x in positions {
            counts[bin(x, xr)] += 1;
        }
        let top = *counts.iter().max().unwrap_or(&1) as f64;
        let bw = pw / BINS as f64;
        for (b, &c) in counts.iter().enumerate() {
            let h = ph * c as f64 / top.max(1.0);
            let _ = writeln!(
                body,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5"/>"##,
                PAD + b as f64 * bw,
                H - PAD - h,
                bw * 0.9,
                h
            );
        }
        svg_frame(title, &body, xr, "count")
    } else {
        let yr = range(positions.chunks_exact(dim).map(|p| p[1]));
        let mut counts = vec![0usize; BINS * BINS];
        for p in positions.chunks_exact(dim) {
            counts[bin(p[1], yr) * BINS + bin(p[0], xr)] += 1;
        }
        let top = *counts.iter().max().unwrap_or(&1) as f64;
        let (cw, ch) = (pw / BINS as f64, ph / BINS as f64);
        for (k, &c) in counts.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let (bx, by) = (k % BINS, k / BINS);
            let _ = writeln!(
                body,
                r##"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="#4a7ab5" fill-opacity="{:.3}"/>"##,
                PAD + bx as f64 * cw,
                H - PAD - (by + 1) as f64 * ch,
                0.15 + 0.85 * c as f64 / top
            );
        }
        let label = format!("coord1 [{:.3}, {:.3}]", yr.0, yr.1);
        svg_frame(title, &body, xr, &label)
    }
}
