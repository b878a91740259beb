//! Dependency-free SVG rendering of the CSV series written by other
//! subcommands. Output depends only on the input text.

use std::fmt::Write;

use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Table {
    headers: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(text: &str) -> CliResult<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| CliError::new("chart", e.to_string()))?
            .iter()
            .map(|h| h.trim().to_string())
            .collect();
        let rows = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::new("chart", e.to_string()))?;
        if rows.is_empty() {
            return Err(CliError::new("chart", "empty series"));
        }
        Ok(Self { headers, rows })
    }

    fn index(&self, name: &str) -> CliResult<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::new(
                "chart",
                format!("schema mismatch: missing column `{name}` (have {})", self.headers.join(",")),
            )
        })
    }

    fn number(&self, row: usize, col: usize) -> CliResult<f64> {
        let raw = self.rows[row].get(col).unwrap_or("").trim();
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                CliError::new(
                    "chart",
                    format!(
                        "line {}, column {}: `{raw}` is not a finite number",
                        row + 2,
                        self.headers[col]
                    ),
                )
            })
    }

    fn numbers(&self, name: &str) -> CliResult<Vec<f64>> {
        let c = self.index(name)?;
        (0..self.rows.len()).map(|r| self.number(r, c)).collect()
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 {
        "0".into()
    } else if !(1e-3..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else if a >= 1.0 {
        format!("{v:.2}")
    } else {
        format!("{v:.4}")
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Axis-aligned plotting frame mapping data ranges onto the canvas.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    svg: String,
    legend: usize,
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let w = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        (lo - w, hi + w)
    }
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

impl Frame {
    fn new(title: &str, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let (x, y) = (padded(x.0, x.1), padded(y.0, y.1));
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#,
            w = WIDTH,
            h = HEIGHT
        );
        let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            fmt(LEFT + (WIDTH - LEFT - RIGHT) / 2.0),
            xml_escape(title)
        );
        let mut frame = Self {
            x,
            y,
            svg,
            legend: 0,
        };
        frame.axes(x_label, y_label);
        frame
    }

    fn sx(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn axes(&mut self, x_label: &str, y_label: &str) {
        let (x0, x1) = (LEFT, WIDTH - RIGHT);
        let (y0, y1) = (HEIGHT - BOTTOM, TOP);
        let _ = writeln!(
            self.svg,
            r#"<polyline points="{},{} {},{} {},{}" fill="none" stroke="black"/>"#,
            fmt(x0),
            fmt(y1),
            fmt(x0),
            fmt(y0),
            fmt(x1),
            fmt(y0)
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let xv = self.x.0 + f * (self.x.1 - self.x.0);
            let yv = self.y.0 + f * (self.y.1 - self.y.0);
            let (px, py) = (self.sx(xv), self.sy(yv));
            let _ = writeln!(
                self.svg,
                r#"<line x1="{px}" y1="{y0}" x2="{px}" y2="{}" stroke="black"/><text x="{px}" y="{}" text-anchor="middle">{}</text>"#,
                fmt(y0 + 4.0),
                fmt(y0 + 16.0),
                tick_label(xv),
                px = fmt(px),
                y0 = fmt(y0)
            );
            let _ = writeln!(
                self.svg,
                r#"<line x1="{}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/><text x="{}" y="{}" text-anchor="end">{}</text>"#,
                fmt(x0 - 4.0),
                fmt(x0 - 6.0),
                fmt(py + 4.0),
                tick_label(yv),
                py = fmt(py),
                x0 = fmt(x0)
            );
        }
        let _ = writeln!(
            self.svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            fmt((x0 + x1) / 2.0),
            fmt(HEIGHT - 12.0),
            xml_escape(x_label)
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="16" y="{cy}" text-anchor="middle" transform="rotate(-90 16 {cy})">{}</text>"#,
            xml_escape(y_label),
            cy = fmt((y0 + y1) / 2.0)
        );
    }

    fn polyline(&mut self, pts: &[(f64, f64)], color: &str, dashed: bool, label: &str) {
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{},{}", fmt(self.sx(*x)), fmt(self.sy(*y))))
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            coords.join(" ")
        );
        self.legend_entry(color, label);
    }

    fn legend_entry(&mut self, color: &str, label: &str) {
        let y = TOP + 10.0 + 18.0 * self.legend as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            self.svg,
            r#"<rect x="{}" y="{}" width="14" height="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            fmt(x),
            fmt(y - 4.0),
            fmt(x + 20.0),
            fmt(y + 2.0),
            xml_escape(label)
        );
        self.legend += 1;
    }

    fn marker(&mut self, x: f64, y: f64, color: &str, label: &str) {
        let (px, py) = (self.sx(x), self.sy(y));
        let _ = writeln!(
            self.svg,
            r#"<circle cx="{}" cy="{}" r="4" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            fmt(px),
            fmt(py),
            fmt(px + 6.0),
            fmt(py - 6.0),
            xml_escape(label)
        );
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// First crossing of `a − b` along the grid, linearly interpolated.
fn crossing(p: &[f64], a: &[f64], b: &[f64]) -> Option<(f64, f64)> {
    for i in 1..p.len() {
        let (d0, d1) = (a[i - 1] - b[i - 1], a[i] - b[i]);
        if d0 == 0.0 {
            return Some((p[i - 1], a[i - 1]));
        }
        if d0.signum() != d1.signum() {
            let w = d0 / (d0 - d1);
            return Some((
                p[i - 1] + w * (p[i] - p[i - 1]),
                a[i - 1] + w * (a[i] - a[i - 1]),
            ));
        }
    }
    None
}

/// Demand and the two supply schedules in (quantity, price) space with the
/// market-clearing points marked.
pub fn supply_demand(text: &str) -> CliResult<String> {
    let t = Table::parse(text)?;
    let p = t.numbers("p")?;
    let d = t.numbers("demand")?;
    let s0 = t.numbers("supply_base")?;
    let s1 = t.numbers("supply_fee")?;
    let x = range(d.iter().chain(&s0).chain(&s1).copied());
    let y = range(p.iter().copied());
    let mut f = Frame::new(
        "Licensing fee shifts supply",
        "penetration q",
        "price pW",
        x,
        y,
    );
    let series = |q: &[f64]| -> Vec<(f64, f64)> { q.iter().copied().zip(p.iter().copied()).collect() };
    f.polyline(&series(&d), PALETTE[0], false, "demand");
    f.polyline(&series(&s0), PALETTE[2], false, "supply, base fee");
    f.polyline(&series(&s1), PALETTE[1], true, "supply, with fee");
    if let Some((pe, qe)) = crossing(&p, &d, &s0) {
        f.marker(qe, pe, PALETTE[2], &format!("E0 ({}, {})", tick_label(qe), tick_label(pe)));
    }
    if let Some((pe, qe)) = crossing(&p, &d, &s1) {
        f.marker(qe, pe, PALETTE[1], &format!("E1 ({}, {})", tick_label(qe), tick_label(pe)));
    }
    Ok(f.finish())
}

/// Penetration over time, one line per `path` label (if present).
pub fn diffusion(text: &str) -> CliResult<String> {
    let t = Table::parse(text)?;
    let ts = t.numbers("t")?;
    let qs = t.numbers("q")?;
    let labels: Vec<String> = match t.headers.iter().position(|h| h == "path") {
        Some(c) => t.rows.iter().map(|r| r.get(c).unwrap_or("").to_string()).collect(),
        None => vec!["q".to_string(); t.rows.len()],
    };
    let mut order: Vec<&str> = Vec::new();
    for l in &labels {
        if !order.contains(&l.as_str()) {
            order.push(l);
        }
    }
    let mut f = Frame::new(
        "Adoption paths",
        "period t",
        "penetration q",
        range(ts.iter().copied()),
        range(qs.iter().copied()),
    );
    for (k, name) in order.iter().enumerate() {
        let pts: Vec<(f64, f64)> = (0..ts.len())
            .filter(|&i| labels[i] == *name)
            .map(|i| (ts[i], qs[i]))
            .collect();
        f.polyline(&pts, PALETTE[k % PALETTE.len()], k > 0, name);
    }
    Ok(f.finish())
}

/// Histogram of one estimate column of a replication CSV; rows whose
/// `status` is not `ok` are skipped.
pub fn histogram(text: &str, column: &str, bins: usize, reference: Option<f64>) -> CliResult<String> {
    if bins == 0 {
        return Err(CliError::new("validation", "--bins must be positive"));
    }
    let t = Table::parse(text)?;
    let c = t.index(column)?;
    let status = t.headers.iter().position(|h| h == "status");
    let mut values = Vec::new();
    for r in 0..t.rows.len() {
        if status.is_some_and(|s| t.rows[r].get(s) != Some("ok")) {
            continue;
        }
        values.push(t.number(r, c)?);
    }
    if values.is_empty() {
        return Err(CliError::new("chart", "empty series"));
    }
    let (mut lo, mut hi) = range(values.iter().copied());
    if let Some(r) = reference {
        lo = lo.min(r);
        hi = hi.max(r);
    }
    if hi == lo {
        let w = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
        lo -= w;
        hi += w;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in &values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&1) as f64;
    let mut f = Frame::new(
        &format!("Estimates of {column} ({} replications)", values.len()),
        column,
        "count",
        (lo, hi),
        (0.0, top),
    );
    for (k, n) in counts.iter().enumerate() {
        let x0 = f.sx(lo + k as f64 * width);
        let x1 = f.sx(lo + (k + 1) as f64 * width);
        let y = f.sy(*n as f64);
        let base = f.sy(0.0);
        let _ = writeln!(
            f.svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="white"/>"#,
            fmt(x0),
            fmt(y),
            fmt((x1 - x0).max(0.0)),
            fmt((base - y).max(0.0)),
            PALETTE[0]
        );
    }
    f.legend_entry(PALETTE[0], "estimates");
    if let Some(r) = reference {
        f.polyline(&[(r, 0.0), (r, top)], PALETTE[1], true, "reference");
    }
    Ok(f.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_only_is_empty() {
        let e = supply_demand("p,demand,supply_base,supply_fee\n").unwrap_err();
        assert!(e.message.contains("empty"));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let e = supply_demand("p,demand\n1,2\n").unwrap_err();
        assert!(e.message.contains("schema mismatch"));
    }

    #[test]
    fn crossing_found_between_grid_points() {
        let p = [0.0, 1.0, 2.0];
        let d = [2.0, 1.0, 0.0];
        let s = [0.0, 0.5, 1.0];
        let (pe, qe) = crossing(&p, &d, &s).unwrap();
        assert!((pe - 4.0 / 3.0).abs() < 1e-12 && (qe - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn output_is_deterministic() {
        let csv = "t,q,p,g\n0,0.01,1,0.3\n1,0.013,1,0.3\n";
        assert_eq!(diffusion(csv).unwrap(), diffusion(csv).unwrap());
    }
}
