//! Pulsating-front speeds by level-set tracking, and profile extraction.
//!
//! A front run starts from the step datum `lower + (upper - lower) 1{x.e <= offset}`
//! on a domain clamped to the two states far away. One-dimensional runs use a
//! segment; two-dimensional runs use a twisted strip so that planar data in a
//! rational direction are represented exactly. The field is recentred by
//! whole periods to keep the front in the middle of the domain.

mod fit;
mod profile;

pub use fit::{fit_speed, SpeedEstimate};
pub use profile::{extract_profile, Profile};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Bounds, Clamp, Domain, Evolver, Field};
use crate::problem::{time_step, CellTable, RunConfig};

/// Parameters of one front measurement.
#[derive(Clone, Debug)]
pub struct FrontRequest {
    /// Integer direction; `[±1, 0]` in one dimension.
    pub direction: [i32; 2],
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Stable states strictly between the two, used to detect split fronts.
    pub intermediates: Vec<Vec<f64>>,
    /// Position of the datum interface along the unit direction.
    pub offset: f64,
    pub horizon: f64,
    pub extract_profile: bool,
    /// Half-width of the profile window in `z`.
    pub profile_halfwidth: f64,
}

impl FrontRequest {
    pub fn new(direction: [i32; 2], upper: Vec<f64>, lower: Vec<f64>, horizon: f64) -> Self {
        Self {
            direction,
            upper,
            lower,
            intermediates: Vec::new(),
            offset: 0.0,
            horizon,
            extract_profile: true,
            profile_halfwidth: 15.0,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct FrontFlags {
    pub zero_speed: bool,
    /// Direction was handled by exchanging the axes.
    pub transposed: bool,
    pub levels_tracked: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrontRecord {
    pub direction: [i32; 2],
    pub unit: [f64; 2],
    pub upper_id: String,
    pub lower_id: String,
    pub speed: SpeedEstimate,
    /// Speeds of every tracked level.
    pub level_speeds: Vec<SpeedEstimate>,
    pub fit_window: [f64; 2],
    #[serde(skip)]
    pub profile: Option<Profile>,
    pub flags: FrontFlags,
}

pub fn unit(direction: [i32; 2]) -> [f64; 2] {
    let n = ((direction[0] as f64).powi(2) + (direction[1] as f64).powi(2)).sqrt();
    [direction[0] as f64 / n, direction[1] as f64 / n]
}

/// A front run laid out on a concrete domain, in the axes actually simulated.
pub struct Layout {
    pub table: CellTable,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    pub intermediates: Vec<Vec<f64>>,
    pub direction: [i32; 2],
    pub unit: [f64; 2],
    pub transposed: bool,
    /// Clamped axis of the stored block.
    pub axis: usize,
    /// The upper state sits at the low end of the clamped axis.
    pub upper_low: bool,
    pub domain: Domain,
}

impl Layout {
    pub fn new(
        table: &CellTable,
        upper: &[f64],
        lower: &[f64],
        intermediates: &[Vec<f64>],
        direction: [i32; 2],
    ) -> Result<Self> {
        Self::with_extent(
            table,
            upper,
            lower,
            intermediates,
            direction,
            table.grid.extent_periods,
        )
    }

    /// Layout spanning about `extent` unit lengths along the direction.
    pub fn with_extent(
        table: &CellTable,
        upper: &[f64],
        lower: &[f64],
        intermediates: &[Vec<f64>],
        direction: [i32; 2],
        extent: usize,
    ) -> Result<Self> {
        let grid = table.grid;
        if grid.dimension == 1 {
            if direction[1] != 0 || direction[0].abs() != 1 {
                return Err(Error::Config(format!(
                    "1D direction must be ±1, got {direction:?}"
                )));
            }
        } else if direction == [0, 0] {
            return Err(Error::Config("direction must be nonzero".into()));
        }
        let transposed = grid.dimension == 2 && direction[1] == 0;
        let (table, upper, lower, intermediates, direction) = if transposed {
            (
                table.transposed(),
                grid.transpose_cell(upper),
                grid.transpose_cell(lower),
                intermediates
                    .iter()
                    .map(|s| grid.transpose_cell(s))
                    .collect(),
                [0, direction[0]],
            )
        } else {
            (
                table.clone(),
                upper.to_vec(),
                lower.to_vec(),
                intermediates.to_vec(),
                direction,
            )
        };
        let extent = extent.max(8);
        let (axis, upper_low, domain) = if grid.dimension == 1 {
            let upper_low = direction[0] > 0;
            let clamp = sides(&upper, &lower, upper_low);
            (
                0,
                upper_low,
                Domain::Line {
                    start: -(extent as i64) / 2,
                    periods: extent,
                    clamp,
                },
            )
        } else {
            let upper_low = direction[1] > 0;
            let norm = unit_norm(direction);
            // Enough rows that the strip spans `extent` lengths along e.
            let rows = ((extent as f64) * norm / direction[1].abs() as f64).ceil() as usize;
            (
                1,
                upper_low,
                Domain::Strip {
                    direction,
                    start: -(rows as i64) / 2,
                    periods: rows,
                    clamp: sides(&upper, &lower, upper_low),
                },
            )
        };
        Ok(Self {
            table,
            upper,
            lower,
            intermediates,
            direction,
            unit: unit(direction),
            transposed,
            axis,
            upper_low,
            domain,
        })
    }

    /// Length along the direction of one step of the clamped axis.
    pub fn step_length(&self) -> f64 {
        self.table.grid.dx() * self.unit[self.axis].abs()
    }

    /// Coordinate along the unit direction of a global node.
    #[inline]
    pub fn s(&self, node: [i64; 2]) -> f64 {
        let x = self.table.grid.point(node);
        x[0] * self.unit[0] + x[1] * self.unit[1]
    }
}

fn unit_norm(d: [i32; 2]) -> f64 {
    ((d[0] as f64).powi(2) + (d[1] as f64).powi(2)).sqrt()
}

fn sides(upper: &[f64], lower: &[f64], upper_low: bool) -> Clamp {
    if upper_low {
        Clamp::Sides {
            low: upper.to_vec(),
            high: lower.to_vec(),
        }
    } else {
        Clamp::Sides {
            low: lower.to_vec(),
            high: upper.to_vec(),
        }
    }
}

/// Tracks crossings of normalised, period-averaged levels along every scan
/// line of the clamped axis.
pub struct Tracker {
    /// Levels of `w = (u - lower) / (upper - lower)` in (0, 1), descending.
    pub levels: Vec<f64>,
    lower: Vec<f64>,
    inv_gap: Vec<f64>,
    ppp: usize,
}

/// Crossing positions of one observation.
pub struct Crossings {
    /// Along the unit direction, one per level.
    pub s: Vec<f64>,
    /// Mean fractional index along the clamped axis, one per level.
    pub index: Vec<f64>,
}

impl Tracker {
    pub fn new(layout: &Layout, evolver: &Evolver) -> Self {
        let phases = evolver.mesh.phases(evolver.mesh.origin);
        let lower: Vec<f64> = phases.iter().map(|&p| layout.lower[p]).collect();
        let inv_gap: Vec<f64> = phases
            .iter()
            .map(|&p| 1.0 / (layout.upper[p] - layout.lower[p]))
            .collect();
        // Cell means of the intermediate states in normalised units.
        let n = layout.upper.len() as f64;
        let mut marks = vec![1.0];
        let mut inner: Vec<f64> = layout
            .intermediates
            .iter()
            .map(|q| {
                q.iter()
                    .zip(layout.lower.iter().zip(&layout.upper))
                    .map(|(v, (l, u))| (v - l) / (u - l))
                    .sum::<f64>()
                    / n
            })
            .collect();
        inner.sort_by(|a, b| b.total_cmp(a));
        marks.extend(inner);
        marks.push(0.0);
        let levels = marks.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self {
            levels,
            lower,
            inv_gap,
            ppp: layout.table.grid.points_per_period,
        }
    }

    pub fn crossings(&self, layout: &Layout, field: &Field) -> Option<Crossings> {
        let [n0, n1] = field.shape;
        let (lines, len, stride, step) = if layout.axis == 0 {
            (n1, n0, 1, n0)
        } else {
            (n0, n1, n0, 1)
        };
        let win = self.ppp;
        let mut s_sum = vec![0.0; self.levels.len()];
        let mut i_sum = vec![0.0; self.levels.len()];
        let mut prefix = vec![0.0; len + 1];
        for line in 0..lines {
            let base = line * step;
            for k in 0..len {
                let idx = base + k * stride;
                prefix[k + 1] =
                    prefix[k] + (field.values[idx] - self.lower[idx]) * self.inv_gap[idx];
            }
            let avg = |k: usize| (prefix[k + win] - prefix[k]) / win as f64;
            let windows = len - win + 1;
            for (li, &level) in self.levels.iter().enumerate() {
                // Scan from the upper side for the first window below the level.
                let mut found = None;
                for m in 0..windows {
                    let k = if layout.upper_low { m } else { windows - 1 - m };
                    if avg(k) < level {
                        if m == 0 {
                            return None;
                        }
                        let prev = if layout.upper_low { k - 1 } else { k + 1 };
                        let (a, b) = (avg(prev), avg(k));
                        let frac = (a - level) / (a - b);
                        let pos = prev as f64 + frac * (k as f64 - prev as f64);
                        found = Some(pos + 0.5 * (win as f64 - 1.0));
                        break;
                    }
                }
                let pos = found?;
                let node = field.node(base);
                let along = field.origin[layout.axis] as f64 + pos;
                let x_perp = node[1 - layout.axis] as f64;
                let dx = layout.table.grid.dx();
                let mut x = [0.0; 2];
                x[layout.axis] = along * dx;
                x[1 - layout.axis] = x_perp * dx;
                s_sum[li] += x[0] * layout.unit[0] + x[1] * layout.unit[1];
                i_sum[li] += pos;
            }
        }
        Some(Crossings {
            s: s_sum.iter().map(|v| v / lines as f64).collect(),
            index: i_sum.iter().map(|v| v / lines as f64).collect(),
        })
    }
}

/// Result of a raw front run before interpretation.
pub(crate) struct RunOutput {
    pub times: Vec<f64>,
    /// `positions[level][sample]`.
    pub positions: Vec<Vec<f64>>,
    pub snapshots: Vec<Field>,
    pub levels: Vec<f64>,
}

/// Evolves the step datum and records level positions.
pub(crate) fn run_front(
    layout: &Layout,
    run: &RunConfig,
    offset: f64,
    horizon: f64,
    keep_snapshots: bool,
) -> Result<RunOutput> {
    let table = &layout.table;
    let lo = layout.lower.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = layout
        .upper
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let dt = time_step(table, run, (lo, hi));
    let ev = Evolver::new(table, layout.domain.clone(), dt);
    let grid = table.grid;
    let mut field = Field::from_fn(&ev.mesh, |n| {
        let ph = grid.phase(n);
        if layout.s(n) <= offset {
            layout.upper[ph]
        } else {
            layout.lower[ph]
        }
    });
    let tracker = Tracker::new(layout, &ev);
    let tol = &run.tolerances;
    let bounds = Bounds {
        lo,
        hi,
        eps: tol.eps_overshoot,
    };
    let ppp = grid.points_per_period as f64;
    let n_axis = field.shape[layout.axis] as f64;
    let margin = tol.boundary_margin * ppp;
    let cadence = ((run.observe_every / dt).round() as usize).max(1);
    let n_obs = (horizon / (cadence as f64 * dt)).ceil() as usize;
    let snapshot_every = (n_obs / 200).max(1);
    let mut times = Vec::with_capacity(n_obs);
    let mut positions = vec![Vec::with_capacity(n_obs); tracker.levels.len()];
    let mut snapshots = Vec::new();
    let mut scratch = Vec::new();
    for obs in 1..=n_obs {
        for _ in 0..cadence {
            ev.step(&mut field, &mut scratch);
        }
        crate::evolve::check(&field, Some(bounds))?;
        let c = tracker
            .crossings(layout, &field)
            .ok_or(Error::BoundaryContamination {
                distance: 0.0,
                t: field.t,
            })?;
        let first = c.index.iter().copied().fold(f64::INFINITY, f64::min);
        let last = c.index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let distance = first.min(n_axis - 1.0 - last);
        if distance < margin {
            return Err(Error::BoundaryContamination {
                distance: distance / ppp,
                t: field.t,
            });
        }
        times.push(field.t);
        for (p, s) in positions.iter_mut().zip(&c.s) {
            p.push(*s);
        }
        if keep_snapshots && field.t >= 0.5 * horizon - 1e-9 && obs % snapshot_every == 0 {
            snapshots.push(field.clone());
        }
        // Recentre on the middle of the tracked levels.
        let centre = 0.5 * (first + last);
        let off = centre - 0.5 * n_axis;
        if off.abs() > 2.0 * ppp {
            let periods = (off / ppp).round() as i64;
            let axis = layout.axis;
            let old_origin = field.origin[axis];
            let upper_low = layout.upper_low;
            field.shift_periods(axis, periods, grid.points_per_period, |n| {
                let ph = grid.phase(n);
                if (n[axis] < old_origin) == upper_low {
                    layout.upper[ph]
                } else {
                    layout.lower[ph]
                }
            });
        }
    }
    Ok(RunOutput {
        times,
        positions,
        snapshots,
        levels: tracker.levels,
    })
}

/// Measures the front connecting `upper` to `lower` in the given direction.
pub fn bistable_speed(
    table: &CellTable,
    run: &RunConfig,
    req: &FrontRequest,
) -> Result<FrontRecord> {
    let layout = Layout::new(
        table,
        &req.upper,
        &req.lower,
        &req.intermediates,
        req.direction,
    )?;
    let out = run_front(&layout, run, req.offset, req.horizon, req.extract_profile)?;
    let tol = &run.tolerances;
    let window = [0.5 * req.horizon, req.horizon];
    let fits: Vec<SpeedEstimate> = out
        .positions
        .iter()
        .map(|p| fit_speed(&out.times, p, window, tol.se_floor))
        .collect::<Result<_>>()?;
    for i in 0..fits.len() {
        for j in i + 1..fits.len() {
            let se = fits[i].se.hypot(fits[j].se);
            if (fits[i].value - fits[j].value).abs() > 3.0 * se {
                return Err(Error::MultipleSpeeds {
                    speeds: fits.iter().map(|f| f.value).collect(),
                });
            }
        }
    }
    let speed = fits
        .iter()
        .min_by(|a, b| a.se.total_cmp(&b.se))
        .cloned()
        .expect("at least one level");
    let zero_speed = speed.value.abs() < tol.zero_speed_tol;
    if !zero_speed {
        for f in &fits {
            if f.r2 < tol.r2_min {
                return Err(Error::PoorFit { r2: f.r2 });
            }
        }
    }
    let profile = if req.extract_profile && !zero_speed {
        let mut p = extract_profile(
            &layout,
            &out.snapshots,
            &speed,
            req.profile_halfwidth,
            tol.zero_speed_tol,
        )?;
        if layout.transposed {
            p.transpose_phases(&table.grid);
        }
        Some(p)
    } else {
        None
    };
    Ok(FrontRecord {
        direction: req.direction,
        unit: unit(req.direction),
        upper_id: String::new(),
        lower_id: String::new(),
        speed,
        level_speeds: fits,
        fit_window: window,
        profile,
        flags: FrontFlags {
            zero_speed,
            transposed: layout.transposed,
            levels_tracked: out.levels.len(),
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CounterPropagation {
    /// Front from the stable state above into `q`; must be positive.
    pub down_speed: SpeedEstimate,
    /// Front from `q` to the stable state below, measured through the
    /// reflected problem; must be negative.
    pub up_speed: SpeedEstimate,
    pub signs_ok: bool,
    /// At least one speed fell inside the zero-speed band.
    pub indeterminate: bool,
}

/// Sign dichotomy of the fronts adjacent to an unstable state.
pub fn counter_propagation_check(
    table: &CellTable,
    run: &RunConfig,
    q: &[f64],
    above: &[f64],
    below: &[f64],
    direction: [i32; 2],
    horizon: f64,
) -> Result<CounterPropagation> {
    let tol = run.tolerances.zero_speed_tol;
    let mut req = FrontRequest::new(direction, above.to_vec(), q.to_vec(), horizon);
    req.extract_profile = false;
    let down = bistable_speed(table, run, &req)?.speed;
    // v = above - u turns the front q -> below into (above - below) -> (above - q)
    // travelling in the opposite direction.
    let reflected = table.reflected(above);
    let refl = |s: &[f64]| -> Vec<f64> { above.iter().zip(s).map(|(a, v)| a - v).collect() };
    let mut rreq = FrontRequest::new(
        [-direction[0], -direction[1]],
        refl(below),
        refl(q),
        horizon,
    );
    rreq.extract_profile = false;
    let mut up = bistable_speed(&reflected, run, &rreq)?.speed;
    up.value = -up.value;
    let indeterminate = down.value.abs() < tol || up.value.abs() < tol;
    let violation = down.value < -tol || up.value > tol;
    if violation {
        return Err(Error::SignViolation(format!(
            "speeds into and out of the unstable state are {:.5} and {:.5}",
            down.value, up.value
        )));
    }
    Ok(CounterPropagation {
        down_speed: down,
        up_speed: up,
        signs_ok: !indeterminate,
        indeterminate,
    })
}
