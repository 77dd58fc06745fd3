//! Deterministic SVG charts and the results.csv reader behind `plot`.

use std::fmt::Write;

use rdfrl_core::eval::{percentile_histogram, Histogram, MethodReturns};

use crate::error::{CliError, CliResult};
use crate::run::RESULTS_HEADER;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub method: String,
    pub w: f64,
    pub seed: u64,
    pub ret: f64,
}

/// Parses a results.csv body; errors name the offending line.
pub fn read_results(text: &str) -> CliResult<Vec<CsvRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| CliError::Csv(format!("line 1: {e}")))?.clone();
    if header.iter().collect::<Vec<_>>() != RESULTS_HEADER {
        return Err(CliError::Csv(format!("line 1: expected header {}", RESULTS_HEADER.join(","))));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| CliError::Csv(format!("line {line}: {e}")))?;
        let field = |k: usize| rec.get(k).unwrap_or("");
        let num = |k: usize| -> CliResult<f64> {
            field(k)
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Csv(format!("line {line}: bad {} value {:?}", RESULTS_HEADER[k], field(k))))
        };
        let seed = field(6)
            .parse()
            .map_err(|_| CliError::Csv(format!("line {line}: bad seed value {:?}", field(6))))?;
        rows.push(CsvRow { method: field(1).to_string(), w: num(5)?, seed, ret: num(7)? });
    }
    Ok(rows)
}

fn methods_in_order(rows: &[CsvRow]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in rows {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

/// Seed-averaged return per method and w.
pub fn return_series(rows: &[CsvRow]) -> Vec<Series> {
    methods_in_order(rows)
        .into_iter()
        .map(|m| {
            let mut ws: Vec<f64> = rows.iter().filter(|r| r.method == m).map(|r| r.w).collect();
            ws.sort_by(f64::total_cmp);
            ws.dedup();
            let points = ws
                .iter()
                .map(|&w| {
                    let rets: Vec<f64> = rows.iter().filter(|r| r.method == m && r.w == w).map(|r| r.ret).collect();
                    (w, rets.iter().sum::<f64>() / rets.len() as f64)
                })
                .collect();
            Series { name: m, points }
        })
        .collect()
}

pub fn histograms(rows: &[CsvRow]) -> CliResult<Vec<Histogram>> {
    let methods: Vec<MethodReturns> = methods_in_order(rows)
        .into_iter()
        .map(|m| {
            let mut returns: Vec<(f64, u64, f64)> =
                rows.iter().filter(|r| r.method == m).map(|r| (r.w, r.seed, r.ret)).collect();
            returns.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            MethodReturns { method: m, returns }
        })
        .collect();
    if methods.is_empty() {
        return Err(CliError::Csv("no rows to plot".into()));
    }
    Ok(percentile_histogram(&methods)?)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
        (lo - pad, hi + pad)
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }
    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn open_svg(out: &mut String, title: &str, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, escape(title));
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, (LEFT + WIDTH - RIGHT) / 2.0, HEIGHT - 10.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="15" y="{:.1}" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
}

fn axes(out: &mut String, f: &Frame, x_ticks: &[(f64, String)]) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y1:.1}" x2="{x1:.1}" y2="{y1:.1}" stroke="black"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.1}" y1="{y0:.1}" x2="{x0:.1}" y2="{y1:.1}" stroke="black"/>"#);
    for (x, label) in x_ticks {
        let px = f.px(*x);
        let _ = writeln!(out, r#"<line x1="{px:.1}" y1="{y1:.1}" x2="{px:.1}" y2="{:.1}" stroke="black"/>"#, y1 + 4.0);
        let _ = writeln!(out, r#"<text x="{px:.1}" y="{:.1}" text-anchor="middle">{}</text>"#, y1 + 16.0, escape(label));
    }
    for i in 0..=4 {
        let y = f.y.0 + (f.y.1 - f.y.0) * i as f64 / 4.0;
        let py = f.py(y);
        let _ = writeln!(out, r#"<line x1="{:.1}" y1="{py:.1}" x2="{x0:.1}" y2="{py:.1}" stroke="black"/>"#, x0 - 4.0);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{y:.2}</text>"#, x0 - 6.0, py + 4.0);
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = WIDTH - RIGHT + 15.0;
        let _ = writeln!(out, r#"<rect x="{x:.1}" y="{:.1}" width="12" height="12" fill="{}"/>"#, y - 10.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}">{}</text>"#, x + 18.0, escape(name));
    }
}

/// One polyline per series; a single-point series renders as a marker.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], note: Option<&str>) -> CliResult<String> {
    let pts: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if pts.is_empty() {
        return Err(CliError::Usage("nothing to plot".into()));
    }
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (xl, xh) = fold(&mut pts.iter().map(|p| p.0));
    let (yl, yh) = fold(&mut pts.iter().map(|p| p.1));
    let f = Frame { x: nice_range(xl, xh), y: nice_range(yl, yh) };
    let mut out = String::new();
    open_svg(&mut out, title, x_label, y_label);
    let mut xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let step = xs.len().div_ceil(11).max(1);
    let ticks: Vec<(f64, String)> = xs.iter().step_by(step).map(|&x| (x, format!("{x:.3}"))).collect();
    axes(&mut out, &f, &ticks);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", f.px(x), f.py(y))).collect();
        if coords.len() > 1 {
            let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, coords.join(" "));
        }
        for &(x, y) in &s.points {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, f.px(x), f.py(y));
        }
    }
    if let Some(n) = note {
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-style="italic">{}</text>"#, LEFT + 8.0, TOP + 14.0, escape(n));
    }
    legend(&mut out, &series.iter().map(|s| s.name.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Decile counts as grouped bars, one colour per method.
pub fn histogram_chart(title: &str, hists: &[Histogram]) -> CliResult<String> {
    if hists.is_empty() {
        return Err(CliError::Usage("nothing to plot".into()));
    }
    let max = hists.iter().flat_map(|h| h.bins.iter().copied()).max().unwrap_or(0).max(1) as f64;
    let f = Frame { x: (0.0, 100.0), y: (0.0, max) };
    let mut out = String::new();
    open_svg(&mut out, title, "percentile of return range", "count");
    let ticks: Vec<(f64, String)> = (0..=10).map(|i| (i as f64 * 10.0, format!("{}", i * 10))).collect();
    axes(&mut out, &f, &ticks);
    let slot = (f.px(10.0) - f.px(0.0)) / hists.len() as f64;
    for (i, h) in hists.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for (b, &count) in h.bins.iter().enumerate() {
            let x = f.px(b as f64 * 10.0) + slot * i as f64;
            let y = f.py(count as f64);
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
                slot * 0.9,
                f.py(0.0) - y
            );
        }
    }
    legend(&mut out, &hists.iter().map(|h| h.method.as_str()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    ReturnVsW,
    Histogram,
}

pub fn cmd_plot(csv_text: &str, kind: PlotKind) -> CliResult<String> {
    let rows = read_results(csv_text)?;
    if rows.is_empty() {
        return Err(CliError::Csv("no rows to plot".into()));
    }
    match kind {
        PlotKind::ReturnVsW => line_chart("Return vs preference", "w", "return", &return_series(&rows), None),
        PlotKind::Histogram => histogram_chart("Percentile histogram", &histograms(&rows)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "experiment_id,method,env,w_train,lambda,w,seed,ret\n\
        e,A,toy,1,,0.5,0,10\ne,A,toy,1,,1,0,20\ne,B,toy,1,0,0.5,0,30\ne,B,toy,1,0,1,0,20\n";

    #[test]
    fn parses_and_averages() {
        let rows = read_results(CSV).unwrap();
        assert_eq!(rows.len(), 4);
        let s = return_series(&rows);
        assert_eq!(s[0].points, vec![(0.5, 10.0), (1.0, 20.0)]);
    }

    #[test]
    fn malformed_rows_are_named() {
        let bad = CSV.replace("0.5,0,30", "0.5,0,abc");
        let err = read_results(&bad).unwrap_err().to_string();
        assert!(err.contains("line 4"), "{err}");
        assert!(read_results("a,b\n1,2\n").is_err());
    }

    #[test]
    fn histogram_bins_extremes() {
        let h = histograms(&read_results(CSV).unwrap()).unwrap();
        assert_eq!(h[0].bins[0], 1);
        assert_eq!(h[0].bins[9], 1);
        assert_eq!(h[1].bins[9], 2);
    }

    #[test]
    fn output_is_deterministic() {
        for kind in [PlotKind::ReturnVsW, PlotKind::Histogram] {
            assert_eq!(cmd_plot(CSV, kind).unwrap(), cmd_plot(CSV, kind).unwrap());
        }
    }

    #[test]
    fn single_point_and_empty_inputs() {
        let one = [Series { name: "A".into(), points: vec![(1.0, 5.0)] }];
        assert!(line_chart("t", "w", "J", &one, None).unwrap().contains("<circle"));
        assert!(line_chart("t", "w", "J", &[], None).is_err());
        assert!(histogram_chart("t", &[]).is_err());
        assert!(cmd_plot(RESULTS_HEADER.join(",").as_str(), PlotKind::Histogram).is_err());
    }
}
