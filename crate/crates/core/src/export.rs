//! CSV and SVG emitters.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so the
//! same values always produce the same bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::curve::BoundCurve;
use crate::error::{NecError, Result};
use crate::feedback::MarginPoint;
use crate::nfold::NFoldMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    /// Multiplier taking a value in bits to this unit.
    pub fn factor(self) -> f64 {
        match self {
            Units::Bits => 1.0,
            Units::Nats => std::f64::consts::LN_2,
        }
    }

    pub fn convert(self, bits: f64) -> f64 {
        bits * self.factor()
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

fn csv_err(e: impl std::fmt::Display) -> NecError {
    NecError::InvalidArgument(format!("csv: {e}"))
}

fn number(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(csv_err)?;
    String::from_utf8(bytes).map_err(csv_err)
}

fn curve_header(units: Units) -> Vec<String> {
    ["n", "kind", "beta"]
        .iter()
        .map(|s| s.to_string())
        .chain([format!("rate_{}", units.suffix())])
        .chain(["slope", "converged", "iterations"].iter().map(|s| s.to_string()))
        .collect()
}

fn curve_rows<'a>(curve: &'a BoundCurve, units: Units) -> impl Iterator<Item = Vec<String>> + 'a {
    curve.points.iter().map(move |p| {
        vec![
            curve.n.to_string(),
            curve.kind.as_str().to_string(),
            number(p.beta),
            number(units.convert(p.rate)),
            number(units.convert(p.slope)),
            p.converged.to_string(),
            p.iterations.to_string(),
        ]
    })
}

/// Columns `n, kind, beta, rate_bits, slope, converged, iterations`, one row
/// per point, curves in the order given.
pub fn curves_csv(curves: &[&BoundCurve], units: Units) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(curve_header(units)).map_err(csv_err)?;
    for c in curves {
        for row in curve_rows(c, units) {
            w.write_record(row).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Per-`beta` outcome of the feedback comparison.
pub fn verdict_label(margin: f64, in_range: bool) -> &'static str {
    match (margin > 0.0, in_range) {
        (true, true) => "gain",
        (true, false) => "gain-outside-range",
        (false, _) => "no-gain",
    }
}

/// Curves with an extra `verdict` column, repeated on every row sharing a
/// `beta`. Without margins the column reads `unavailable`.
pub fn bounds_csv(curves: &[BoundCurve], margins: Option<&[MarginPoint]>, units: Units) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = curve_header(units);
    header.push("verdict".into());
    w.write_record(&header).map_err(csv_err)?;
    for c in curves {
        for (i, mut row) in curve_rows(c, units).enumerate() {
            let label = match margins {
                Some(m) => verdict_label(m[i].margin, m[i].in_range),
                None => "unavailable",
            };
            row.push(label.to_string());
            w.write_record(row).map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Row-major dump of `W^n(y^n | x^n)`.
///
/// A `#` comment line states the convention, then a header row of output
/// labels, then one row per input block.
pub fn nfold_csv(m: &NFoldMatrix) -> Result<String> {
    let q = m.q();
    let n = m.n();
    let rows = m.matrix().rows();
    let cols = m.matrix().cols();
    let mut out = format!(
        "# W^n(y|x), n={n}, q={q}, row-major; row index = sum_i x_i q^(n-i), column index = sum_i y_i (q+1)^(n-i), \
         x_1 is the most significant digit, erasure e is encoded as {q}\n"
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = std::iter::once("x\\y".to_string())
        .chain((0..cols).map(|y| m.label(y, true)))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for x in 0..rows {
        let row: Vec<String> = std::iter::once(m.label(x, false))
            .chain(m.matrix().row(x).iter().map(|&p| number(p)))
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    out.push_str(&finish(w)?);
    Ok(out)
}

/// Reads an `n-fold` CSV back into its row-major data.
pub fn parse_nfold_csv(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let cols = r.headers().map_err(csv_err)?.len().saturating_sub(1);
    let mut data = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        for field in rec.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(csv_err)?);
        }
        rows += 1;
    }
    Ok((rows, cols, data))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line chart of a curves or bounds CSV: one polyline per `(n, kind)`.
pub fn svg_from_csv(text: &str) -> Result<String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| csv_err(format!("missing column `{name}`")))
    };
    let (n_col, kind_col, beta_col) = (col("n")?, col("kind")?, col("beta")?);
    let (rate_col, rate_name) = headers
        .iter()
        .enumerate()
        .find(|(_, h)| h.starts_with("rate_"))
        .map(|(i, h)| (i, h.to_string()))
        .ok_or_else(|| csv_err("missing rate column"))?;
    let mut series: BTreeMap<(String, String), Vec<(f64, f64)>> = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let beta: f64 = rec[beta_col].parse().map_err(csv_err)?;
        let rate: f64 = rec[rate_col].parse().map_err(csv_err)?;
        series
            .entry((rec[kind_col].to_string(), rec[n_col].to_string()))
            .or_default()
            .push((beta, rate));
    }
    if series.is_empty() {
        return Err(csv_err("no data rows"));
    }
    let all = series.values().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    y0 = y0.min(0.0);
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{:.2} {:.2}V{:.2}H{:.2}" fill="none" stroke="black"/>"#,
        MARGIN,
        MARGIN,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    for i in 0..=4 {
        let fx = x0 + (x1 - x0) * i as f64 / 4.0;
        let fy = y0 + (y1 - y0) * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(fx),
            HEIGHT - MARGIN + 16.0,
            tick(fx)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            sy(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">beta</text>"#,
        WIDTH / 2.0,
        HEIGHT - 14.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{rate_name}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, ((kind, n), pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut pts = pts.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="1.5"/>"#,
            WIDTH - MARGIN - 150.0,
            WIDTH - MARGIN - 130.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{kind} (n={n})</text>"#,
            WIDTH - MARGIN - 124.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{BoundKind, CurvePoint};
    use crate::models;
    use crate::nfold::{build_nfold, Limits};
    use crate::ChannelFunction;

    fn toy() -> BoundCurve {
        BoundCurve {
            n: 2,
            kind: BoundKind::Nonfeedback,
            points: vec![
                CurvePoint { beta: 0.0, rate: 0.0, slope: f64::INFINITY, converged: true, iterations: 0 },
                CurvePoint { beta: 0.25, rate: 0.5, slope: 1.25, converged: true, iterations: 17 },
            ],
            offset: None,
        }
    }

    #[test]
    fn curve_columns() {
        let text = curves_csv(&[&toy()], Units::Bits).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("n,kind,beta,rate_bits,slope,converged,iterations"));
        assert_eq!(lines.next(), Some("2,nonfeedback,0,0,inf,true,0"));
        assert_eq!(lines.next(), Some("2,nonfeedback,0.25,0.5,1.25,true,17"));
        let nats = curves_csv(&[&toy()], Units::Nats).unwrap();
        assert!(nats.starts_with("n,kind,beta,rate_nats,"));
    }

    #[test]
    fn nfold_round_trip() {
        let cf = ChannelFunction::mod_add(2).unwrap();
        let m = build_nfold(&cf, &models::pi1(), 2, &Limits::default()).unwrap();
        let text = nfold_csv(&m).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("x\\y,00,01,0e,10"));
        let (rows, cols, data) = parse_nfold_csv(&text).unwrap();
        assert_eq!((rows, cols), (4, 9));
        assert_eq!(data, m.matrix().data());
    }

    #[test]
    fn svg_is_a_function_of_the_csv() {
        let text = curves_csv(&[&toy()], Units::Bits).unwrap();
        let a = svg_from_csv(&text).unwrap();
        assert_eq!(a, svg_from_csv(&text).unwrap());
        assert!(a.starts_with("<svg") && a.contains("<polyline"));
        assert!(svg_from_csv("n,kind\n").is_err());
    }
}
