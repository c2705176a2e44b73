//! CSV tables, per-block traces and SVG plots.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use privnet_core::harq::TrafficKind;
use privnet_core::sim::BlockRecord;
use serde::Serialize;

use crate::error::CliError;
use crate::sweep::ResultRow;

/// Column order of every result CSV. Changing it breaks downstream scripts.
pub const CSV_HEADER: [&str; 13] = [
    "axis_value",
    "realization",
    "seed",
    "private_rate",
    "open_rate",
    "effective_private_rate",
    "empirical_outage",
    "markov_bound",
    "avg_power",
    "avg_Qp",
    "avg_Qo",
    "utility",
    "decode_failures",
];

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` to `path`. Refuses to create a file for an empty table.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::EmptyRows(path.to_path_buf()));
    }
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).map_err(|source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, buf).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, CliError> {
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_HEADER) {
        return Err(CliError::Validation(vec![format!(
            "{}: unexpected header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )]));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(csv_err)
}

#[derive(Serialize)]
struct TraceRow {
    block: u64,
    node: usize,
    a_p: f64,
    a_pe: f64,
    a_o: f64,
    mode: &'static str,
    power: f64,
    r_p: f64,
    r_o: f64,
    r_pe: f64,
    q_p: f64,
    q_o: f64,
    q_pe: f64,
    z: f64,
    y: f64,
}

/// Streams one row per node per block.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn record(&mut self, rec: &BlockRecord) -> Result<(), csv::Error> {
        for (j, q) in rec.queues.iter().enumerate() {
            let tx = rec.transmission.filter(|t| t.node == j);
            let s = rec.service[j];
            let adm = rec.admissions[j];
            self.inner.serialize(TraceRow {
                block: rec.block_index,
                node: j,
                a_p: adm.a_p,
                a_pe: adm.a_pe,
                a_o: adm.a_o,
                mode: match tx.map(|t| t.mode) {
                    None => "idle",
                    Some(TrafficKind::Private) => "private",
                    Some(TrafficKind::Open) => "open",
                },
                power: tx.map_or(0.0, |t| t.power),
                r_p: s.r_p,
                r_o: s.r_o,
                r_pe: s.r_pe,
                q_p: q.q_p,
                q_o: q.q_o,
                q_pe: q.q_pe,
                z: q.z,
                y: q.y,
            })?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), csv::Error> {
        self.inner.flush()?;
        Ok(())
    }
}

const SERIES: [(&str, &str); 3] = [
    ("private", "#1f77b4"),
    ("open", "#d62728"),
    ("effective private", "#2ca02c"),
];

/// One point per axis value: the aggregated row when present, otherwise the
/// mean of the run rows at that value. Rows without an axis value are
/// plotted at 0.
fn plot_points(rows: &[ResultRow]) -> Vec<(f64, [f64; 3])> {
    let mut xs: Vec<f64> = rows.iter().map(|r| r.axis_value.unwrap_or(0.0)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs.into_iter()
        .map(|x| {
            let at: Vec<&ResultRow> = rows.iter().filter(|r| r.axis_value.unwrap_or(0.0) == x).collect();
            let row = match at.iter().find(|r| r.is_aggregate()) {
                Some(r) => (*r).clone(),
                None => ResultRow::mean(Some(x), &at),
            };
            (x, [row.private_rate, row.open_rate, row.effective_private_rate])
        })
        .collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static SVG of rate against the swept parameter, one series per rate type.
pub fn render_svg(rows: &[ResultRow], x_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 420.0;
    const LEFT: f64 = 70.0;
    const RIGHT: f64 = 170.0;
    const TOP: f64 = 30.0;
    const BOTTOM: f64 = 60.0;
    let pts = plot_points(rows);
    let (mut x0, mut x1) = (pts.first().map_or(0.0, |p| p.0), pts.last().map_or(1.0, |p| p.0));
    if x1 <= x0 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    let y_max = pts
        .iter()
        .flat_map(|p| p.1)
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::max);
    let y1 = if y_max > 0.0 { y_max * 1.1 } else { 1.0 };
    let y0 = pts
        .iter()
        .flat_map(|p| p.1)
        .filter(|v| v.is_finite())
        .fold(0.0_f64, f64::min);
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{}" x2="{}" y2="{}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{}"/></g>"#,
        TOP + ph,
        LEFT + pw,
        TOP + ph,
        TOP + ph
    );
    svg.push_str(r#"<g class="ticks">"#);
    for k in 0..=4 {
        let xv = x0 + (x1 - x0) * k as f64 / 4.0;
        let yv = y0 + (y1 - y0) * k as f64 / 4.0;
        let _ = write!(
            svg,
            r#"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="black"/><text x="{0:.2}" y="{3}" text-anchor="middle">{4}</text>"#,
            sx(xv),
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 20.0,
            tick_label(xv)
        );
        let _ = write!(
            svg,
            r##"<line x1="{0}" y1="{1:.2}" x2="{2}" y2="{1:.2}" stroke="#ddd"/><text x="{3}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            LEFT,
            sy(yv),
            LEFT + pw,
            LEFT - 6.0,
            sy(yv) + 4.0,
            tick_label(yv)
        );
    }
    svg.push_str("</g>\n");
    let _ = writeln!(
        svg,
        r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 15.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text class="ylabel" transform="translate(18 {}) rotate(-90)" text-anchor="middle">rate (bits/channel use/node)</text>"#,
        TOP + ph / 2.0
    );

    for (s, (name, colour)) in SERIES.iter().enumerate() {
        let coords: Vec<String> = pts
            .iter()
            .map(|(x, ys)| format!("{:.2},{:.2}", sx(*x), sy(ys[s])))
            .collect();
        let _ = write!(
            svg,
            r#"<g class="series" data-series="{name}"><polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        for (x, ys) in &pts {
            let _ = write!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#, sx(*x), sy(ys[s]));
        }
        svg.push_str("</g>\n");
        let ly = TOP + 10.0 + 20.0 * s as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{name}</text></g>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(rows: &[ResultRow], x_label: &str, path: &Path) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::EmptyRows(path.to_path_buf()));
    }
    fs::write(path, render_svg(rows, x_label)).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
