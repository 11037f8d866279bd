//! End-to-end checks: spreading of compactly supported data against predicted
//! shapes, and residual certificates for sub- and supersolutions.

mod certify;

pub use certify::{
    chi, glued_supersolution_residual, perturbation_residual, perturbation_residual_at, GlueParams,
    GlueReport, PerturbationEval, PerturbationReport, PieceResidual, SwitchCheck,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Bounds, Domain, Evolver, Field, Observer};
use crate::problem::{time_step, CellTable, RunConfig};
use crate::spectral::StateLattice;
use crate::wulff::ShapePolygon;

/// Width of the angular bins used to smooth contours, in degrees.
pub const BIN_DEGREES: f64 = 5.0;

/// Super-level set `{u >= mid-level}` of one platform pair, scaled by `1/t`.
#[derive(Clone, Debug, Serialize)]
pub struct MeasuredShape {
    pub t: f64,
    pub upper_id: String,
    pub lower_id: String,
    /// Bin centres in degrees.
    pub angles: Vec<f64>,
    /// Scaled outer radius per bin.
    pub radii: Vec<f64>,
    pub outline: Vec<[f64; 2]>,
    pub area: f64,
    /// Number of contour crossings found before smoothing.
    pub crossings: usize,
}

impl MeasuredShape {
    /// Radius at angle `theta` (radians) by linear interpolation between bins.
    pub fn radius(&self, theta: f64) -> f64 {
        let n = self.radii.len();
        let deg = theta.to_degrees().rem_euclid(360.0);
        let pos = deg / BIN_DEGREES - 0.5;
        let k = pos.floor();
        let w = pos - k;
        let i = (k as i64).rem_euclid(n as i64) as usize;
        let j = (i + 1) % n;
        (1.0 - w) * self.radii[i] + w * self.radii[j]
    }
}

#[derive(Clone, Debug)]
pub struct SpreadSetup {
    /// Radius of the ball on which the datum equals the top state.
    pub radius: f64,
    /// Half-width of the square domain, in periods.
    pub half_width: usize,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpreadingRun {
    pub shapes: Vec<MeasuredShape>,
    /// Earliest time from which the centre stayed within 1e-3 of the top state.
    pub invaded_since: Option<f64>,
    pub dt: f64,
}

struct Watch<'a> {
    lattice: &'a StateLattice,
    table: &'a CellTable,
    times: &'a [f64],
    next: usize,
    centre: usize,
    boundary: Vec<usize>,
    invaded_since: Option<f64>,
    shapes: Vec<MeasuredShape>,
}

impl Observer for Watch<'_> {
    fn observe(&mut self, field: &Field) -> Result<()> {
        let top = self.lattice.top();
        let ph = self.table.grid.phase(field.node(self.centre));
        if (field.values[self.centre] - top.values[ph]).abs() <= 1e-3 {
            self.invaded_since.get_or_insert(field.t);
        } else {
            self.invaded_since = None;
        }
        let zero = self.lattice.zero();
        let scale = top.max().max(1e-12);
        for &i in &self.boundary {
            let ph = self.table.grid.phase(field.node(i));
            if (field.values[i] - zero.values[ph]).abs() > 1e-3 * scale {
                return Err(Error::BoundaryContamination {
                    distance: 0.0,
                    t: field.t,
                });
            }
        }
        while self.next < self.times.len() && field.t >= self.times[self.next] - 1e-9 {
            for k in 1..self.lattice.stable.len() {
                self.shapes
                    .push(measure_shape(self.table, self.lattice, field, k - 1, k)?);
            }
            self.next += 1;
        }
        Ok(())
    }
}

/// Evolves a ball of the top state on a clamped square and records the
/// level sets of every consecutive pair of stable states at `times`.
pub fn spreading_run(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    setup: &SpreadSetup,
) -> Result<SpreadingRun> {
    if table.grid.dimension != 2 {
        return Err(Error::Dimension(table.grid.dimension));
    }
    let mut times = setup.times.clone();
    times.sort_by(f64::total_cmp);
    let horizon = *times
        .last()
        .ok_or_else(|| Error::Config("no output times".into()))?;
    let top = lattice.top();
    let zero = lattice.zero();
    let w = setup.half_width as i64;
    let domain = Domain::Rect {
        start: [-w, -w],
        periods: [2 * setup.half_width, 2 * setup.half_width],
        clamp: zero.values.clone(),
    };
    let dt = time_step(table, run, (zero.min(), top.max()));
    let evolver = Evolver::new(table, domain, dt);
    let grid = table.grid;
    let r2 = setup.radius * setup.radius;
    let mut field = Field::from_fn(&evolver.mesh, |n| {
        let x = grid.point(n);
        let ph = grid.phase(n);
        if x[0] * x[0] + x[1] * x[1] <= r2 {
            top.values[ph]
        } else {
            zero.values[ph]
        }
    });
    let [n0, n1] = field.shape;
    let centre = (-field.origin[1]) as usize * n0 + (-field.origin[0]) as usize;
    let mut boundary: Vec<usize> = (0..n0).chain((n1 - 1) * n0..n1 * n0).collect();
    boundary.extend((1..n1 - 1).flat_map(|j| [j * n0, j * n0 + n0 - 1]));
    let mut watch = Watch {
        lattice,
        table,
        times: &times,
        next: 0,
        centre,
        boundary,
        invaded_since: None,
        shapes: Vec::new(),
    };
    let bounds = Bounds {
        lo: zero.min(),
        hi: top.max(),
        eps: run.tolerances.eps_overshoot.max(1e-6),
    };
    evolver.run(
        &mut field,
        horizon,
        run.observe_every.max(dt),
        Some(bounds),
        &mut [&mut watch],
    )?;
    let invaded = watch.invaded_since.filter(|s| horizon - s >= 0.1 * horizon);
    if invaded.is_none() {
        return Err(Error::NoInvasion { t: horizon });
    }
    Ok(SpreadingRun {
        shapes: watch.shapes,
        invaded_since: invaded,
        dt,
    })
}

/// Contour crossings of `{w = 1/2}`, `w` normalised between two states, on
/// the edges of the node lattice (the vertices of marching squares).
pub fn level_crossings(
    table: &CellTable,
    field: &Field,
    upper: &[f64],
    lower: &[f64],
) -> Vec<[f64; 2]> {
    let grid = table.grid;
    let [n0, n1] = field.shape;
    let w: Vec<f64> = field
        .values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let ph = grid.phase(field.node(i));
            (u - lower[ph]) / (upper[ph] - lower[ph]) - 0.5
        })
        .collect();
    let mut pts = Vec::new();
    let mut edge = |a: usize, b: usize| {
        let (wa, wb) = (w[a], w[b]);
        if (wa >= 0.0) != (wb >= 0.0) {
            let s = wa / (wa - wb);
            let pa = grid.point(field.node(a));
            let pb = grid.point(field.node(b));
            pts.push([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
        }
    };
    for j in 0..n1 {
        for i in 0..n0 {
            let idx = j * n0 + i;
            if i + 1 < n0 {
                edge(idx, idx + 1);
            }
            if j + 1 < n1 {
                edge(idx, idx + n0);
            }
        }
    }
    pts
}

fn measure_shape(
    table: &CellTable,
    lattice: &StateLattice,
    field: &Field,
    hi: usize,
    lo: usize,
) -> Result<MeasuredShape> {
    let (upper, lower) = (&lattice.stable[hi], &lattice.stable[lo]);
    let pts = level_crossings(table, field, &upper.values, &lower.values);
    let bins = (360.0 / BIN_DEGREES).round() as usize;
    let mut radii = vec![f64::NAN; bins];
    for p in &pts {
        let th = p[1].atan2(p[0]).to_degrees().rem_euclid(360.0);
        let k = ((th / BIN_DEGREES) as usize).min(bins - 1);
        let r = p[0].hypot(p[1]);
        if radii[k].is_nan() || r > radii[k] {
            radii[k] = r;
        }
    }
    if radii.iter().all(|r| r.is_nan()) {
        radii.iter_mut().for_each(|r| *r = 0.0);
    }
    fill_gaps(&mut radii);
    let t = field.t.max(1e-12);
    let radii: Vec<f64> = radii.iter().map(|r| r / t).collect();
    let angles: Vec<f64> = (0..bins).map(|k| (k as f64 + 0.5) * BIN_DEGREES).collect();
    let outline: Vec<[f64; 2]> = angles
        .iter()
        .zip(&radii)
        .map(|(a, r)| {
            let th = a.to_radians();
            [r * th.cos(), r * th.sin()]
        })
        .collect();
    let area = ShapePolygon::from_vertices(outline.clone()).area();
    Ok(MeasuredShape {
        t: field.t,
        upper_id: upper.id.clone(),
        lower_id: lower.id.clone(),
        angles,
        radii,
        outline,
        area,
        crossings: pts.len(),
    })
}

/// Linear interpolation over empty bins, cyclically.
fn fill_gaps(r: &mut [f64]) {
    let n = r.len();
    let known: Vec<usize> = (0..n).filter(|&i| !r[i].is_nan()).collect();
    if known.is_empty() {
        return;
    }
    for i in 0..n {
        if !r[i].is_nan() {
            continue;
        }
        let prev = *known
            .iter()
            .rev()
            .find(|&&k| k < i)
            .unwrap_or(known.last().unwrap());
        let next = *known.iter().find(|&&k| k > i).unwrap_or(&known[0]);
        let span = (next + n - prev) % n;
        let w = ((i + n - prev) % n) as f64 / span.max(1) as f64;
        r[i] = (1.0 - w) * r[prev] + w * r[next];
    }
}

/// Radial function of a convex polygon containing the origin.
pub fn polygon_radius(poly: &ShapePolygon<f64>, theta: f64) -> f64 {
    let v = &poly.vertices;
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let u = [theta.cos(), theta.sin()];
    let mut r = f64::INFINITY;
    for i in 0..n {
        let (a, b) = (v[i], v[(i + 1) % n]);
        // Outward normal of a counterclockwise edge.
        let nrm = [b[1] - a[1], a[0] - b[0]];
        let c = nrm[0] * a[0] + nrm[1] * a[1];
        let d = nrm[0] * u[0] + nrm[1] * u[1];
        if d > 0.0 {
            r = r.min(c / d);
        }
    }
    r.max(0.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct ShapeMatch {
    pub t: f64,
    pub eps: f64,
    /// Smallest and largest ratio of measured to predicted radius.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Measured region contains `(1 - eps)` times the prediction.
    pub inner_ok: bool,
    /// Measured region lies inside `(1 + eps)` times the prediction.
    pub outer_ok: bool,
    pub hausdorff: f64,
    pub passed: bool,
}

fn polyline_distance(pts: &[[f64; 2]], x: [f64; 2]) -> f64 {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let s = if len2 > 0.0 {
                (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            (x[0] - a[0] - s * d[0]).hypot(x[1] - a[1] - s * d[1])
        })
        .fold(f64::INFINITY, f64::min)
}

/// Two-sided sandwich of a measured shape between `(1 -+ eps)` times a
/// predicted star-shaped polygon, compared along rays from the origin.
pub fn shape_match(
    measured: &MeasuredShape,
    predicted: &ShapePolygon<f64>,
    eps: f64,
) -> ShapeMatch {
    let rays = 4 * measured.radii.len();
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio: f64 = 0.0;
    let mut samples = Vec::with_capacity(rays);
    for k in 0..rays {
        let th = 2.0 * std::f64::consts::PI * k as f64 / rays as f64;
        let rp = polygon_radius(predicted, th);
        let rm = measured.radius(th);
        samples.push([rp * th.cos(), rp * th.sin()]);
        let ratio = if rp > 0.0 {
            rm / rp
        } else if rm > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    let h1 = measured
        .outline
        .iter()
        .map(|&p| predicted.boundary_distance(p))
        .fold(0.0, f64::max);
    let h2 = samples
        .iter()
        .map(|&p| polyline_distance(&measured.outline, p))
        .fold(0.0, f64::max);
    let inner_ok = min_ratio >= 1.0 - eps;
    let outer_ok = max_ratio <= 1.0 + eps;
    ShapeMatch {
        t: measured.t,
        eps,
        min_ratio,
        max_ratio,
        inner_ok,
        outer_ok,
        hausdorff: h1.max(h2),
        passed: inner_ok && outer_ok,
    }
}
