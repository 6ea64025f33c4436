//! SVG figures from result directories.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::experiment::results::{read_aggregate_csv, series, AggregateRow};
use crate::gridworld::{Gridworld, GridworldSpec, MOVES};
use crate::qtable::argmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    ValueCurve,
    BiasCurve,
    PolicyMap,
    ValueMap,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::ValueCurve, PlotKind::BiasCurve, PlotKind::PolicyMap, PlotKind::ValueMap];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::ValueCurve => "value-curve",
            PlotKind::BiasCurve => "bias-curve",
            PlotKind::PolicyMap => "policy-map",
            PlotKind::ValueMap => "value-map",
        }
    }
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::usage(format!("unknown plot kind `{s}` (expected value-curve, bias-curve, policy-map or value-map)")))
    }
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

struct Source {
    label: String,
    dir: PathBuf,
    rows: Vec<AggregateRow>,
}

fn sources(results: &Path) -> Result<Vec<Source>> {
    let load = |dir: &Path, label: String| -> Result<Source> {
        Ok(Source { rows: read_aggregate_csv(&dir.join("aggregate.csv"))?, dir: dir.to_path_buf(), label })
    };
    if results.is_file() {
        let dir = results.parent().unwrap_or(Path::new("."));
        return Ok(vec![load(dir, label_of(dir))?]);
    }
    if results.join("aggregate.csv").exists() {
        return Ok(vec![load(results, label_of(results))?]);
    }
    let mut found = Vec::new();
    collect(results, results, &mut found)?;
    if found.is_empty() {
        return Err(Error::usage(format!("no aggregate.csv under {}", results.display())));
    }
    found.sort();
    found.into_iter().map(|(label, dir)| load(&dir, label)).collect()
}

fn collect(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            if path.join("aggregate.csv").exists() {
                let label = path.strip_prefix(root).unwrap_or(&path).display().to_string();
                out.push((label, path));
            } else {
                collect(root, &path, out)?;
            }
        }
    }
    Ok(())
}

fn label_of(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, w: f64, h: f64) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut ticks = Vec::new();
    while t <= hi + 1e-9 * step {
        ticks.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    ticks
}

/// Line plot of one metric's mean with a +-1 std band per source, plus
/// optional horizontal reference lines.
fn curve_svg(title: &str, ylabel: &str, curves: &[(String, Vec<(u64, f64, f64)>)], refs: &[(String, f64)]) -> String {
    let mut out = String::new();
    header(&mut out, W, H);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let pts = curves.iter().flat_map(|(_, s)| s.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(step, m, s) in pts {
        x0 = x0.min(step as f64);
        x1 = x1.max(step as f64);
        y0 = y0.min(m - s);
        y1 = y1.max(m + s);
    }
    for (_, v) in refs {
        y0 = y0.min(*v);
        y1 = y1.max(*v);
    }
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if !y0.is_finite() {
        (y0, y1) = (0.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 < 1e-9 {
        (y0, y1) = (y0 - 0.5, y1 + 0.5);
    }
    let pad = 0.05 * (y1 - y0);
    (y0, y1) = (y0 - pad, y1 + pad);
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let _ = writeln!(out, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, LEFT + pw / 2.0, esc(title));
    let _ = writeln!(out, r##"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(out, r##"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="#333"/>"##, TOP + ph, TOP + ph + 5.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{t}</text>"#, TOP + ph + 18.0);
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(out, r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#333"/>"##, LEFT - 5.0);
        let _ = writeln!(out, r##"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#eee"/>"##, LEFT + pw);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, fmt_num(t));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">update</text>"#, LEFT + pw / 2.0, H - 10.0);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        esc(ylabel)
    );

    for (i, (label, s)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !s.is_empty() {
            let upper: Vec<String> = s.iter().map(|&(x, m, d)| format!("{:.2},{:.2}", sx(x as f64), sy(m + d))).collect();
            let lower: Vec<String> = s.iter().rev().map(|&(x, m, d)| format!("{:.2},{:.2}", sx(x as f64), sy(m - d))).collect();
            let _ = writeln!(out, r#"<polygon points="{} {}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#, upper.join(" "), lower.join(" "));
            let line: Vec<String> = s.iter().map(|&(x, m, _)| format!("{:.2},{:.2}", sx(x as f64), sy(m))).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.8"/>"#, line.join(" "));
        }
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(label));
    }
    for (j, (label, v)) in refs.iter().enumerate() {
        let y = sy(*v);
        let _ = writeln!(out, r#"<line x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="black" stroke-width="1.5"/>"#, LEFT + pw);
        let ly = TOP + 14.0 + 18.0 * (curves.len() + j) as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(out, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="black" stroke-width="3"/>"#, lx + 20.0);
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, esc(label));
    }
    out.push_str("</svg>\n");
    out
}

fn fmt_num(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn read_probe_truth(dir: &Path) -> Option<(Vec<usize>, Vec<f64>)> {
    let text = std::fs::read_to_string(dir.join("manifest.toml")).ok()?;
    let table: toml::Table = toml::from_str(&text).ok()?;
    let states = table.get("probe_states")?.as_array()?.iter().filter_map(|v| v.as_integer()).map(|v| v as usize).collect();
    let values = table.get("probe_v_star")?.as_array()?.iter().filter_map(|v| v.as_float()).collect();
    Some((states, values))
}

/// Mean final table over seeds from `final_q.csv`.
fn mean_final_q(dir: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let path = dir.join("final_q.csv");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut cells: Vec<(usize, usize, f64, usize)> = Vec::new();
    let (mut ns, mut na) = (0, 0);
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let parsed = (f.len() == 4)
            .then(|| Some((f[1].parse::<usize>().ok()?, f[2].parse::<usize>().ok()?, f[3].parse::<f64>().ok()?)))
            .flatten();
        let (s, a, v) = parsed.ok_or_else(|| Error::Numeric(format!("{}:{}: malformed row", path.display(), i + 1)))?;
        ns = ns.max(s + 1);
        na = na.max(a + 1);
        cells.push((s, a, v, 1));
    }
    if cells.is_empty() {
        return Err(Error::MissingMetric("final_q".into()));
    }
    let mut sum = vec![0.0; ns * na];
    let mut count = vec![0usize; ns * na];
    for (s, a, v, _) in cells {
        sum[s * na + a] += v;
        count[s * na + a] += 1;
    }
    let mean = sum.iter().zip(&count).map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 }).collect();
    Ok((ns, na, mean))
}

fn heat(t: f64) -> String {
    // White to dark blue.
    let t = t.clamp(0.0, 1.0);
    let r = (247.0 - t * (247.0 - 8.0)) as u8;
    let g = (251.0 - t * (251.0 - 48.0)) as u8;
    let b = (255.0 - t * (255.0 - 107.0)) as u8;
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn map_svg(dir: &Path, kind: PlotKind) -> Result<String> {
    let map_path = dir.join("map.txt");
    let map = std::fs::read_to_string(&map_path)
        .map_err(|_| Error::usage(format!("{} needs a gridworld run (no map.txt in {})", kind.name(), dir.display())))?;
    let world = Gridworld::build(&GridworldSpec::with_map(&map))?;
    let layout = &world.layout;
    let (ns, na, q) = mean_final_q(dir)?;
    if ns != layout.cells.len() || na != MOVES.len() {
        return Err(Error::usage("final_q.csv does not match map.txt"));
    }
    let v: Vec<f64> = (0..ns).map(|s| q[s * na..(s + 1) * na].iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let cell = 56.0;
    let (w, h) = (layout.cols as f64 * cell + 20.0, layout.rows as f64 * cell + 50.0);
    let mut out = String::new();
    header(&mut out, w, h);
    let title = format!("{} ({})", kind.name(), label_of(dir));
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(&title));
    for r in 0..layout.rows {
        for c in 0..layout.cols {
            let (x, y) = (10.0 + c as f64 * cell, 35.0 + r as f64 * cell);
            match layout.state(r, c) {
                None => {
                    let _ = writeln!(out, r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="#444"/>"##);
                }
                Some(s) => {
                    let t = if hi > lo { (v[s] - lo) / (hi - lo) } else { 1.0 };
                    let _ = writeln!(out, r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{}" stroke="#999"/>"##, heat(t));
                    let (cx, cy) = (x + cell / 2.0, y + cell / 2.0);
                    let ink = if t > 0.55 { "white" } else { "black" };
                    if s == layout.goal {
                        let _ = writeln!(out, r#"<text x="{cx}" y="{}" text-anchor="middle" font-size="16" fill="{ink}">G</text>"#, cy + 6.0);
                        continue;
                    }
                    let a = argmax(&q[s * na..(s + 1) * na]);
                    let (dr, dc) = MOVES[a];
                    let len = cell * 0.32;
                    let norm = ((dr * dr + dc * dc) as f64).sqrt();
                    let (ex, ey) = (cx + dc as f64 / norm * len, cy + dr as f64 / norm * len);
                    let (bx, by) = (cx - dc as f64 / norm * len * 0.6, cy - dr as f64 / norm * len * 0.6);
                    let _ = writeln!(out, r#"<line x1="{bx:.1}" y1="{by:.1}" x2="{ex:.1}" y2="{ey:.1}" stroke="{ink}" stroke-width="2" marker-end="url(#arrow-{ink})"/>"#);
                    if kind == PlotKind::ValueMap {
                        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="9" fill="{ink}">{}</text>"#, x + 3.0, y + 11.0, fmt_num(v[s]));
                    }
                }
            }
        }
    }
    for ink in ["black", "white"] {
        let _ = writeln!(
            out,
            r#"<defs><marker id="arrow-{ink}" markerWidth="6" markerHeight="6" refX="5" refY="3" orient="auto"><path d="M0,0 L6,3 L0,6 z" fill="{ink}"/></marker></defs>"#
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Renders `kind` from a run directory (or a directory of runs, for
/// curves) and returns the written file, `<results>/<kind>.svg` unless
/// `out` is given.
pub fn render_plot(results: &Path, kind: PlotKind, out: Option<&Path>) -> Result<PathBuf> {
    let base = if results.is_file() { results.parent().unwrap_or(Path::new(".")) } else { results };
    let target = out.map(Path::to_path_buf).unwrap_or_else(|| base.join(format!("{}.svg", kind.name())));
    let svg = match kind {
        PlotKind::PolicyMap | PlotKind::ValueMap => map_svg(base, kind)?,
        PlotKind::ValueCurve | PlotKind::BiasCurve => {
            let srcs = sources(results)?;
            let mut curves = Vec::new();
            let mut refs = Vec::new();
            for src in &srcs {
                if src.rows.is_empty() {
                    curves.push((src.label.clone(), Vec::new()));
                    continue;
                }
                let metric = match kind {
                    PlotKind::BiasCurve => "bias_mean".to_string(),
                    _ => src
                        .rows
                        .iter()
                        .find(|r| r.metric.starts_with("value["))
                        .map(|r| r.metric.clone())
                        .ok_or_else(|| Error::MissingMetric("value[<probe>]".into()))?,
                };
                let s = series(&src.rows, &metric);
                if s.is_empty() {
                    return Err(Error::MissingMetric(metric));
                }
                if kind == PlotKind::ValueCurve && refs.is_empty() {
                    if let Some((states, values)) = read_probe_truth(&src.dir) {
                        let probe = metric.trim_start_matches("value[").trim_end_matches(']');
                        if let Some(i) = states.iter().position(|s| s.to_string() == probe) {
                            if let Some(v) = values.get(i) {
                                refs.push((format!("V*[{probe}]"), *v));
                            }
                        }
                    }
                }
                curves.push((src.label.clone(), s));
            }
            if kind == PlotKind::BiasCurve {
                refs.push(("zero".into(), 0.0));
            }
            let (title, ylabel) = match kind {
                PlotKind::BiasCurve => ("estimation bias", "mean probe bias"),
                _ => ("value estimate", "probe value"),
            };
            curve_svg(title, ylabel, &curves, &refs)
        }
    };
    std::fs::write(&target, svg).map_err(|e| Error::io(&target, e))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::results::AGGREGATE_HEADER;

    #[test]
    fn empty_results_give_empty_axes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("aggregate.csv"), format!("{AGGREGATE_HEADER}\n")).unwrap();
        let path = render_plot(dir.path(), PlotKind::BiasCurve, None).unwrap();
        let svg = std::fs::read_to_string(path).unwrap();
        assert!(svg.starts_with("<svg") && !svg.contains("polyline"));
    }

    #[test]
    fn missing_metric_is_named() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("aggregate.csv"), format!("{AGGREGATE_HEADER}\n50,spread,0.1,0,2\n")).unwrap();
        let err = render_plot(dir.path(), PlotKind::BiasCurve, None).unwrap_err();
        assert!(matches!(err, Error::MissingMetric(ref m) if m == "bias_mean"));
    }

    #[test]
    fn kind_names_parse() {
        for k in PlotKind::ALL {
            assert_eq!(k.name().parse::<PlotKind>().unwrap(), k);
        }
        assert!("heatmap".parse::<PlotKind>().is_err());
    }

    #[test]
    fn ticks_cover_range() {
        let t = nice_ticks(0.0, 10_000.0);
        assert_eq!(t.first(), Some(&0.0));
        assert_eq!(t.last(), Some(&10_000.0));
    }
}
