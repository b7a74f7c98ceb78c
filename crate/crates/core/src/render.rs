//! Static SVG output: robot snapshots from trajectory CSVs and line plots
//! from metric CSVs. Output bytes depend only on the inputs.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::ScalarField;

const PX_PER_M: f64 = 20.0;
const GLYPH_LEN: f64 = 0.25;
const UNDERLAY_BLOCKS: usize = 60;
const PALETTE: [&str; 6] = [
    "#2a9d3a", "#d62728", "#1f77b4", "#ff7f0e", "#9467bd", "#555555",
];
const GROUP_COLORS: [&str; 2] = ["#2a9d3a", "#d62728"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorBy {
    Subgroup,
    ActiveReservoir,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapshotSpec {
    /// Index of the recorded controller tick to draw.
    pub tick: usize,
    pub color_by: ColorBy,
    pub underlay: bool,
}

#[derive(Debug, Clone, Copy)]
struct Glyph {
    subgroup: usize,
    active: usize,
    x: f64,
    y: f64,
    heading: f64,
}

fn parse_err(rec: &csv::StringRecord, msg: String) -> Error {
    Error::Parse {
        line: rec.position().map_or(0, |p| p.line() as usize),
        msg,
    }
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::MissingColumn(name.to_string()))
}

/// Groups trajectory rows by time, in file order.
fn read_trajectory(csv_text: &str) -> Result<Vec<Vec<Glyph>>> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    let idx = |n: &str| column(&headers, n);
    let (ct, cs, ca, cx, cy, ch) = (
        idx("time")?,
        idx("subgroup")?,
        idx("active_reservoir")?,
        idx("x")?,
        idx("y")?,
        idx("heading")?,
    );
    let mut ticks: Vec<Vec<Glyph>> = Vec::new();
    let mut last_time: Option<f64> = None;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?;
        let num = |k: usize| -> Result<f64> {
            let raw = rec.get(k).unwrap_or("");
            raw.parse::<f64>()
                .map_err(|_| parse_err(&rec, format!("bad number `{raw}`")))
        };
        let int = |k: usize| -> Result<usize> {
            let raw = rec.get(k).unwrap_or("");
            raw.parse::<usize>()
                .map_err(|_| parse_err(&rec, format!("bad integer `{raw}`")))
        };
        let time = num(ct)?;
        let g = Glyph {
            subgroup: int(cs)?,
            active: int(ca)?,
            x: num(cx)?,
            y: num(cy)?,
            heading: num(ch)?,
        };
        if last_time != Some(time) {
            ticks.push(Vec::new());
            last_time = Some(time);
        }
        ticks.last_mut().unwrap().push(g);
    }
    Ok(ticks)
}

/// Robots at one tick as oriented triangles, optionally over the field.
pub fn render_snapshot(
    trajectory_csv: &str,
    spec: &SnapshotSpec,
    field: Option<&ScalarField>,
) -> Result<String> {
    let ticks = read_trajectory(trajectory_csv)?;
    let glyphs = ticks.get(spec.tick).ok_or(Error::TickOutOfRange {
        tick: spec.tick,
        len: ticks.len(),
    })?;

    let (mut x0, mut y0, mut x1, mut y1) = (0.0f64, 0.0f64, 30.0f64, 30.0f64);
    if let Some(f) = field {
        x0 = f.origin()[0];
        y0 = f.origin()[1];
        x1 = x0 + f.width_cells() as f64 * f.cell_size();
        y1 = y0 + f.height_cells() as f64 * f.cell_size();
    }
    for g in glyphs {
        x0 = x0.min(g.x - 1.0);
        y0 = y0.min(g.y - 1.0);
        x1 = x1.max(g.x + 1.0);
        y1 = y1.max(g.y + 1.0);
    }
    let width = (x1 - x0) * PX_PER_M;
    let height = (y1 - y0) * PX_PER_M;
    let px = |x: f64| (x - x0) * PX_PER_M;
    let py = |y: f64| (y1 - y) * PX_PER_M;

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.1}" height="{height:.1}" viewBox="0 0 {width:.1} {height:.1}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();

    if let (true, Some(f)) = (spec.underlay, field) {
        let step = f
            .width_cells()
            .max(f.height_cells())
            .div_ceil(UNDERLAY_BLOCKS);
        svg.push_str("<g id=\"field\">\n");
        for bj in (0..f.height_cells()).step_by(step) {
            for bi in (0..f.width_cells()).step_by(step) {
                let (mut sum, mut n) = (0.0, 0usize);
                for j in bj..(bj + step).min(f.height_cells()) {
                    for i in bi..(bi + step).min(f.width_cells()) {
                        sum += f.cell(i, j);
                        n += 1;
                    }
                }
                let v = (sum / n as f64).round() as u8;
                let cs = f.cell_size();
                let wx = f.origin()[0] + bi as f64 * cs;
                let wy = f.origin()[1] + bj as f64 * cs;
                let side = step as f64 * cs * PX_PER_M;
                writeln!(
                    svg,
                    r#"<rect x="{:.2}" y="{:.2}" width="{side:.2}" height="{side:.2}" fill="rgb({v},{v},{v})"/>"#,
                    px(wx),
                    py(wy) - side,
                )
                .unwrap();
            }
        }
        svg.push_str("</g>\n");
    }

    svg.push_str("<g id=\"robots\">\n");
    for g in glyphs {
        let group = match spec.color_by {
            ColorBy::Subgroup => g.subgroup,
            ColorBy::ActiveReservoir => g.active,
        };
        let color = GROUP_COLORS[group.min(1)];
        let (s, c) = g.heading.sin_cos();
        let tip = (g.x + GLYPH_LEN * c, g.y + GLYPH_LEN * s);
        let back = GLYPH_LEN * 0.6;
        let side = GLYPH_LEN * 0.5;
        let left = (g.x - back * c - side * s, g.y - back * s + side * c);
        let right = (g.x - back * c + side * s, g.y - back * s - side * c);
        writeln!(
            svg,
            r#"<polygon class="robot" points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{color}" stroke="black" stroke-width="0.5"/>"#,
            px(tip.0),
            py(tip.1),
            px(left.0),
            py(left.1),
            px(right.0),
            py(right.1),
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

/// Parsed numeric columns of a metric CSV; empty cells become `None`.
pub fn read_columns(csv_text: &str, columns: &[&str]) -> Result<Vec<Vec<Option<f64>>>> {
    let mut rdr = csv::Reader::from_reader(csv_text.as_bytes());
    let headers = rdr.headers()?.clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<_>>()?;
    let mut out = vec![Vec::new(); columns.len()];
    for rec in rdr.records() {
        let rec = rec?;
        for (k, &i) in idx.iter().enumerate() {
            let raw = rec.get(i).unwrap_or("");
            let v = if raw.is_empty() {
                None
            } else {
                Some(
                    raw.parse::<f64>()
                        .map_err(|_| parse_err(&rec, format!("bad number `{raw}`")))?,
                )
            };
            out[k].push(v);
        }
    }
    Ok(out)
}

/// One polyline per requested column against row index, with axes and legend.
pub fn render_series(metrics_csv: &str, columns: &[&str]) -> Result<String> {
    let data = read_columns(metrics_csv, columns)?;
    let n = data.first().map_or(0, Vec::len);
    let values = data.iter().flatten().flatten().copied();
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
        (a.min(v), b.max(v))
    });
    let (lo, hi) = if !lo.is_finite() || (lo >= 0.0 && hi <= 1.0) {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    };

    let (w, h) = (640.0, 320.0);
    let (ml, mr, mt, mb) = (60.0, 130.0, 20.0, 40.0);
    let pw = w - ml - mr;
    let ph = h - mt - mb;
    let sx = |i: usize| {
        ml + if n > 1 {
            pw * i as f64 / (n - 1) as f64
        } else {
            0.0
        }
    };
    let sy = |v: f64| mt + ph * (1.0 - (v - lo) / (hi - lo));

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<g id="axes" stroke="black"><line x1="{ml}" y1="{b}" x2="{r}" y2="{b}"/><line x1="{ml}" y1="{mt}" x2="{ml}" y2="{b}"/></g>"#,
        b = mt + ph,
        r = ml + pw,
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="11" text-anchor="end">{hi}</text><text x="{x}" y="{y2}" font-size="11" text-anchor="end">{lo}</text>"#,
        x = ml - 5.0,
        y = mt + 4.0,
        y2 = mt + ph,
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{ml}" y="{y}" font-size="11">0</text><text x="{r}" y="{y}" font-size="11" text-anchor="end">{last}</text>"#,
        y = mt + ph + 15.0,
        r = ml + pw,
        last = n.saturating_sub(1),
    )
    .unwrap();

    for (k, (name, col)) in columns.iter().zip(&data).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = col
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| format!("{:.2},{:.2}", sx(i), sy(v))))
            .collect();
        writeln!(
            svg,
            r#"<polyline data-column="{name}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            points.join(" ")
        )
        .unwrap();
        let ly = mt + 15.0 + 18.0 * k as f64;
        let lx = ml + pw + 10.0;
        writeln!(
            svg,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{name}</text>"#,
            lx + 20.0,
            lx + 25.0,
            ly + 4.0,
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRAJ: &str = "time,id,subgroup,active_reservoir,x,y,heading,light\n\
        0,0,0,0,3,27,0,51\n0,1,1,1,3.5,27.2,1.5,51\n\
        0.1,0,0,1,3.1,27,0,51\n0.1,1,1,1,3.5,27.3,1.5,51\n";

    #[test]
    fn snapshot_draws_each_robot() {
        let spec = SnapshotSpec {
            tick: 0,
            color_by: ColorBy::Subgroup,
            underlay: false,
        };
        let svg = render_snapshot(TRAJ, &spec, None).unwrap();
        assert_eq!(svg.matches("class=\"robot\"").count(), 2);
        assert_eq!(svg, render_snapshot(TRAJ, &spec, None).unwrap());
    }

    #[test]
    fn color_by_reservoir_changes() {
        let at = |tick| {
            render_snapshot(
                TRAJ,
                &SnapshotSpec {
                    tick,
                    color_by: ColorBy::ActiveReservoir,
                    underlay: false,
                },
                None,
            )
            .unwrap()
        };
        assert_eq!(at(0).matches(GROUP_COLORS[0]).count(), 1);
        assert_eq!(at(1).matches(GROUP_COLORS[0]).count(), 0);
    }

    #[test]
    fn tick_out_of_range() {
        let spec = SnapshotSpec {
            tick: 5,
            color_by: ColorBy::Subgroup,
            underlay: false,
        };
        assert!(matches!(
            render_snapshot(TRAJ, &spec, None),
            Err(Error::TickOutOfRange { tick: 5, len: 2 })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let bad = "time,id,subgroup,active_reservoir,x,y,heading,light\n0,0,0,0,3,27,0,51\n0,1,1,1,oops,27,0,51\n";
        let spec = SnapshotSpec {
            tick: 0,
            color_by: ColorBy::Subgroup,
            underlay: false,
        };
        match render_snapshot(bad, &spec, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn series_polylines_and_missing_column() {
        let csv = "tick,l_t,phi,phi_green,phi_red\n0,51,1,1,\n1,60,0.5,0.4,0.6\n";
        let svg = render_series(csv, &["phi", "phi_green", "phi_red"]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(matches!(
            render_series(csv, &["nope"]),
            Err(Error::MissingColumn(c)) if c == "nope"
        ));
    }
}
