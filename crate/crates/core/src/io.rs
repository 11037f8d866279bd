//! Plain-text artifacts: CSV tables and SVG overlays.
//!
//! Every writer returns a `String` so that output bytes depend only on the
//! data; floats are printed with Rust's shortest round-trip formatting.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::Field;
use crate::fronts::Profile;
use crate::problem::Grid;
use crate::spectral::SteadyState;
use crate::verify::MeasuredShape;
use crate::wulff::{Provenance, ShapePolygon, SpeedField, SpeedSample};

fn to_csv<R: Serialize>(rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv is utf-8")
}

/// Values of a steady state and its eigenfunction at the nodes of one cell.
pub fn state_csv(grid: &Grid, state: &SteadyState) -> String {
    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: f64,
        u: f64,
        phi: f64,
    }
    to_csv((0..grid.cell_len()).map(|ph| {
        let p = grid.point(grid.phase_node(ph));
        Row {
            x: p[0],
            y: p[1],
            u: state.values[ph],
            phi: state.eigenfunction[ph],
        }
    }))
}

/// Snapshot of a field: `x,u` in one dimension; row-major `x,y,u` in two.
pub fn field_csv(grid: &Grid, field: &Field) -> String {
    if grid.dimension == 1 {
        #[derive(Serialize)]
        struct Row {
            x: f64,
            u: f64,
        }
        to_csv(field.values.iter().enumerate().map(|(i, &u)| Row {
            x: grid.point(field.node(i))[0],
            u,
        }))
    } else {
        #[derive(Serialize)]
        struct Row {
            x: f64,
            y: f64,
            u: f64,
        }
        to_csv(field.values.iter().enumerate().map(|(i, &u)| {
            let p = grid.point(field.node(i));
            Row {
                x: p[0],
                y: p[1],
                u,
            }
        }))
    }
}

/// Cell-averaged profile with its spread over the cell.
pub fn profile_csv(profile: &Profile) -> String {
    #[derive(Serialize)]
    struct Row {
        z: f64,
        mean: f64,
        min: f64,
        max: f64,
    }
    to_csv(
        (0..profile.bins)
            .filter(|&k| !profile.cell_mean[k].is_nan())
            .map(|k| Row {
                z: profile.z(k),
                mean: profile.cell_mean[k],
                min: profile.cell_min[k],
                max: profile.cell_max[k],
            }),
    )
}

pub fn polygon_csv(poly: &ShapePolygon<f64>) -> String {
    #[derive(Serialize)]
    struct Row {
        x: f64,
        y: f64,
    }
    to_csv(poly.vertices.iter().map(|v| Row { x: v[0], y: v[1] }))
}

#[derive(Serialize, Deserialize)]
struct SpeedRow {
    angle_degrees: f64,
    speed: f64,
    se: f64,
}

pub fn speed_field_csv(field: &SpeedField<f64>) -> String {
    to_csv(field.samples.iter().map(|s| SpeedRow {
        angle_degrees: s.direction[1].atan2(s.direction[0]).to_degrees(),
        speed: s.speed,
        se: s.se,
    }))
}

/// Reads `angle_degrees,speed,se` rows; `se` may be left empty.
pub fn parse_speed_field_csv(text: &str) -> Result<SpeedField<f64>> {
    #[derive(Deserialize)]
    struct Row {
        angle_degrees: f64,
        speed: f64,
        #[serde(default)]
        se: Option<f64>,
    }
    let mut rd = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut samples = Vec::new();
    for row in rd.deserialize::<Row>() {
        let r = row.map_err(|e| Error::Config(format!("speed field: {e}")))?;
        let a = r.angle_degrees.to_radians();
        samples.push(SpeedSample {
            direction: [a.cos(), a.sin()],
            speed: r.speed,
            se: r.se.unwrap_or(0.0),
        });
    }
    Ok(SpeedField {
        samples,
        provenance: Provenance::Measured,
    })
}

/// Smoothed outline of a measured shape as `angle,radius` (degrees, speed units).
pub fn outline_csv(shape: &MeasuredShape) -> String {
    #[derive(Serialize)]
    struct Row {
        angle: f64,
        radius: f64,
    }
    to_csv(
        shape
            .angles
            .iter()
            .zip(&shape.radii)
            .map(|(&angle, &radius)| Row { angle, radius }),
    )
}

/// One closed polyline of an SVG overlay.
#[derive(Clone, Debug)]
pub struct SvgLayer {
    pub label: String,
    pub points: Vec<[f64; 2]>,
    pub stroke: &'static str,
    pub dashed: bool,
}

/// Overlays closed polylines in a square viewport with the origin marked;
/// the y axis points up.
pub fn svg_overlay(layers: &[SvgLayer]) -> String {
    const SIZE: f64 = 480.0;
    let extent = layers
        .iter()
        .flat_map(|l| l.points.iter())
        .fold(1e-9_f64, |m, p| m.max(p[0].abs()).max(p[1].abs()));
    let k = 0.45 * SIZE / extent;
    let c = 0.5 * SIZE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<path d="M {c} 0 V {SIZE} M 0 {c} H {SIZE}" stroke="#ccc" stroke-width="1"/>"##
    );
    for (i, l) in layers.iter().enumerate() {
        if l.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = l
            .points
            .iter()
            .map(|p| format!("{:.3},{:.3}", c + k * p[0], c - k * p[1]))
            .collect();
        let dash = if l.dashed {
            r#" stroke-dasharray="6 4""#
        } else {
            ""
        };
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            pts.join(" "),
            l.stroke
        );
        let _ = writeln!(
            s,
            r#"<text x="8" y="{}" font-family="monospace" font-size="12" fill="{}">{}</text>"#,
            18 + 16 * i,
            l.stroke,
            escape(&l.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
