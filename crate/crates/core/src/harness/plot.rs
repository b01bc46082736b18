//! Deterministic SVG plots from harness CSV files.

use std::fmt::Write as _;
use std::path::Path;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub enum PlotSpec {
    /// One polyline per distinct combination of the `series` columns.
    Lines {
        title: String,
        x: String,
        y: String,
        series: Vec<String>,
        log_y: bool,
    },
    /// One `<rect class="cell">` per data row.
    Heatmap {
        title: String,
        x: String,
        y: String,
        value: String,
    },
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 200.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let bad = |e: csv::Error| HarnessError::SchemaMismatch(e.to_string());
        let header: Vec<String> = reader
            .headers()
            .map_err(bad)?
            .iter()
            .map(str::to_string)
            .collect();
        if header.iter().all(String::is_empty) {
            return Err(HarnessError::SchemaMismatch("missing header".into()));
        }
        let rows: Vec<Vec<String>> = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()
            .map_err(bad)?;
        if rows.is_empty() {
            return Err(HarnessError::SchemaMismatch("no data rows".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != header.len()) {
            return Err(HarnessError::SchemaMismatch(format!(
                "row {} has {} fields, header has {}",
                i + 1,
                rows[i].len(),
                header.len()
            )));
        }
        Ok(Csv { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, HarnessError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::SchemaMismatch(format!("missing column {name:?}")))
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>, HarnessError> {
        let c = self.col(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r[c].parse::<f64>().map_err(|_| {
                    HarnessError::SchemaMismatch(format!(
                        "row {} column {name:?}: {:?} is not a number",
                        i + 1,
                        r[c]
                    ))
                })
            })
            .collect()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from `[lo, hi]` to `[a, b]`; a degenerate range maps to the
/// middle.
fn scale(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

fn header(out: &mut String, title: &str, x: &str, y: &str) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>"
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, y0, x1, y1) = (LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT, TOP);
    let _ = writeln!(out, "<g class=\"axes\" stroke=\"black\"><line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\"/><line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\"/></g>");
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        escape(x)
    );
    let _ = writeln!(
        out,
        "<text x=\"20\" y=\"{:.2}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {:.2})\">{}</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y)
    );
}

fn x_ticks(out: &mut String, lo: f64, hi: f64) {
    for i in 0..=4 {
        let v = lo + (hi - lo) * f64::from(i) / 4.0;
        let px = scale(v, lo, hi, LEFT, WIDTH - RIGHT);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"black\"/><text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 5.0,
            HEIGHT - BOTTOM + 18.0,
            tick_label(v)
        );
    }
}

fn y_tick(out: &mut String, py: f64, label: &str) {
    let _ = writeln!(
        out,
        "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{LEFT}\" y2=\"{py:.2}\" stroke=\"black\"/><text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>",
        LEFT - 5.0,
        LEFT - 8.0,
        py + 4.0,
        label
    );
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

fn lines_svg(
    csv: &Csv,
    title: &str,
    x: &str,
    y: &str,
    series: &[String],
    log_y: bool,
) -> Result<String, HarnessError> {
    let xs = csv.numbers(x)?;
    let mut ys = csv.numbers(y)?;
    let keys: Vec<usize> = series
        .iter()
        .map(|s| csv.col(s))
        .collect::<Result<_, _>>()?;
    if log_y {
        // Zero and negative values sit one decade below the smallest
        // positive value.
        let min_pos = ys
            .iter()
            .copied()
            .filter(|v| *v > 0.0 && v.is_finite())
            .fold(f64::INFINITY, f64::min);
        let floor = if min_pos.is_finite() {
            min_pos / 10.0
        } else {
            1e-6
        };
        for v in ys.iter_mut() {
            *v = if *v > 0.0 && v.is_finite() {
                v.log10()
            } else {
                floor.log10()
            };
        }
    } else if ys.iter().any(|v| !v.is_finite()) || xs.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::SchemaMismatch(format!(
            "non-finite value in {x:?} or {y:?}"
        )));
    }
    let (xlo, xhi) = bounds(&xs);
    let (mut ylo, mut yhi) = bounds(&ys);
    if log_y {
        ylo = ylo.floor();
        yhi = yhi.ceil().max(ylo + 1.0);
    }

    let mut groups: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for (i, row) in csv.rows.iter().enumerate() {
        let name = keys
            .iter()
            .map(|&k| row[k].as_str())
            .collect::<Vec<_>>()
            .join(" ");
        match groups.iter_mut().find(|(g, _)| *g == name) {
            Some((_, pts)) => pts.push((xs[i], ys[i])),
            None => groups.push((name, vec![(xs[i], ys[i])])),
        }
    }

    let mut out = String::new();
    header(&mut out, title, x, y);
    x_ticks(&mut out, xlo, xhi);
    let (py0, py1) = (HEIGHT - BOTTOM, TOP);
    if log_y {
        let mut d = ylo;
        while d <= yhi {
            y_tick(
                &mut out,
                scale(d, ylo, yhi, py0, py1),
                &format!("1e{}", d as i64),
            );
            d += 1.0;
        }
    } else {
        for i in 0..=4 {
            let v = ylo + (yhi - ylo) * f64::from(i) / 4.0;
            y_tick(&mut out, scale(v, ylo, yhi, py0, py1), &tick_label(v));
        }
    }
    for (gi, (name, pts)) in groups.iter().enumerate() {
        let colour = PALETTE[gi % PALETTE.len()];
        let coords: Vec<String> = pts
            .iter()
            .map(|&(vx, vy)| {
                format!(
                    "{:.2},{:.2}",
                    scale(vx, xlo, xhi, LEFT, WIDTH - RIGHT),
                    scale(vy, ylo, yhi, py0, py1)
                )
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\" points=\"{}\"/>",
            coords.join(" ")
        );
        let ly = TOP + 10.0 + 16.0 * gi as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{colour}\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            ly - 9.0,
            lx + 14.0,
            ly,
            escape(name)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Blue to red ramp.
fn ramp(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let r = (255.0 * t).round() as u8;
    let b = (255.0 * (1.0 - t)).round() as u8;
    format!("#{r:02x}40{b:02x}")
}

fn heatmap_svg(
    csv: &Csv,
    title: &str,
    x: &str,
    y: &str,
    value: &str,
) -> Result<String, HarnessError> {
    let xs = csv.numbers(x)?;
    let ys = csv.numbers(y)?;
    let vs = csv.numbers(value)?;
    let mut ux: Vec<f64> = Vec::new();
    let mut uy: Vec<f64> = Vec::new();
    for (&a, &b) in xs.iter().zip(&ys) {
        if !ux.contains(&a) {
            ux.push(a);
        }
        if !uy.contains(&b) {
            uy.push(b);
        }
    }
    ux.sort_by(f64::total_cmp);
    uy.sort_by(f64::total_cmp);
    let (vlo, vhi) = bounds(&vs);
    let (xlo, xhi) = bounds(&xs);
    let cw = (WIDTH - RIGHT - LEFT) / ux.len() as f64;
    let ch = (HEIGHT - BOTTOM - TOP) / uy.len() as f64;

    let mut out = String::new();
    header(&mut out, title, x, y);
    x_ticks(&mut out, xlo, xhi);
    for (j, &v) in uy.iter().enumerate() {
        y_tick(
            &mut out,
            HEIGHT - BOTTOM - (j as f64 + 0.5) * ch,
            &tick_label(v),
        );
    }
    for ((&a, &b), &v) in xs.iter().zip(&ys).zip(&vs) {
        let i = ux.iter().position(|&u| u == a).expect("x value indexed");
        let j = uy.iter().position(|&u| u == b).expect("y value indexed");
        let _ = writeln!(
            out,
            "<rect class=\"cell\" x=\"{:.2}\" y=\"{:.2}\" width=\"{cw:.2}\" height=\"{ch:.2}\" fill=\"{}\"><title>{}</title></rect>",
            LEFT + i as f64 * cw,
            HEIGHT - BOTTOM - (j as f64 + 1.0) * ch,
            ramp(scale(v, vlo, vhi, 0.0, 1.0)),
            tick_label(v)
        );
    }
    let lx = WIDTH - RIGHT + 12.0;
    let _ = writeln!(
        out,
        "<text x=\"{lx:.2}\" y=\"{:.2}\">{}</text>",
        TOP + 10.0,
        escape(value)
    );
    for (k, (label, t)) in [(vhi, 1.0), (vlo, 0.0)].iter().enumerate() {
        let ly = TOP + 30.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{lx:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{ly:.2}\">{}</text>",
            ly - 9.0,
            ramp(*t),
            lx + 14.0,
            tick_label(*label)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders CSV text (comment lines starting with `#` are skipped).
pub fn render_svg(csv_text: &str, spec: &PlotSpec) -> Result<String, HarnessError> {
    let csv = Csv::parse(csv_text)?;
    match spec {
        PlotSpec::Lines {
            title,
            x,
            y,
            series,
            log_y,
        } => lines_svg(&csv, title, x, y, series, *log_y),
        PlotSpec::Heatmap { title, x, y, value } => heatmap_svg(&csv, title, x, y, value),
    }
}

/// Reads `csv_path` and writes the plot to `svg_path`.
pub fn emit_plot(csv_path: &Path, spec: &PlotSpec, svg_path: &Path) -> Result<(), HarnessError> {
    let io = |p: &Path, e: std::io::Error| HarnessError::Io {
        path: p.display().to_string(),
        message: e.to_string(),
    };
    let text = std::fs::read_to_string(csv_path).map_err(|e| io(csv_path, e))?;
    let svg = render_svg(&text, spec)?;
    std::fs::write(svg_path, svg).map_err(|e| io(svg_path, e))
}
