use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Bounds, Evolver, Field};
use crate::fronts::{fit_speed, Layout, SpeedEstimate, Tracker};
use crate::problem::{time_step, CellTable, RunConfig};
use crate::spectral::StateLattice;

#[derive(Clone, Debug, Serialize)]
pub struct Plateau {
    pub state_id: String,
    #[serde(skip)]
    pub index: usize,
    /// Extent along the direction at the final time.
    pub range: [f64; 2],
    pub width: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Transition {
    pub upper_id: String,
    pub lower_id: String,
    pub speed: SpeedEstimate,
    pub level_speeds: Vec<SpeedEstimate>,
    /// Levels inside the transition move at distinct speeds but no plateau
    /// between them is wide enough to be claimed yet.
    pub unresolved: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ObservedTerrace {
    pub direction: [i32; 2],
    pub platforms: Vec<String>,
    #[serde(skip)]
    pub platform_indices: Vec<usize>,
    pub transitions: Vec<Transition>,
    pub plateaus: Vec<Plateau>,
    pub horizon: f64,
    pub final_extent: usize,
    pub speeds_nondecreasing: bool,
}

impl ObservedTerrace {
    pub fn summary(&self) -> super::TerraceSummary<'_> {
        super::TerraceSummary {
            platforms: self.platforms.clone(),
            speeds: self.transitions.iter().map(|t| t.speed.clone()).collect(),
            profiles: vec![None; self.transitions.len()],
        }
    }
}

/// Layout, integrator and tracker for one domain size.
struct Stage {
    layout: Layout,
    evolver: Evolver,
    tracker: Tracker,
}

impl Stage {
    fn new(
        table: &CellTable,
        lattice: &StateLattice,
        direction: [i32; 2],
        extent: usize,
        dt: f64,
    ) -> Result<Self> {
        let m = lattice.stable.len() - 1;
        let inner: Vec<Vec<f64>> = lattice.stable[1..m]
            .iter()
            .map(|s| s.values.clone())
            .collect();
        let layout = Layout::with_extent(
            table,
            &lattice.top().values,
            &lattice.zero().values,
            &inner,
            direction,
            extent,
        )?;
        let evolver = Evolver::new(&layout.table, layout.domain.clone(), dt);
        let tracker = Tracker::new(&layout, &evolver);
        Ok(Self {
            layout,
            evolver,
            tracker,
        })
    }
}

/// Copies `old` into a field on `ev`'s mesh, centred, padding with the limit states.
fn regrid(layout: &Layout, ev: &Evolver, old: &Field) -> Field {
    let grid = layout.table.grid;
    let ppp = grid.points_per_period as i64;
    let axis = layout.axis;
    let grow = ev.mesh.shape[axis] as i64 - old.shape[axis] as i64;
    let mut origin = old.origin;
    origin[axis] -= (grow / 2 / ppp) * ppp;
    let [o0, o1] = old.shape;
    let mut field = Field {
        values: vec![0.0; ev.mesh.len()],
        shape: ev.mesh.shape,
        origin,
        t: old.t,
    };
    for i in 0..field.values.len() {
        let n = field.node(i);
        let rel = [n[0] - old.origin[0], n[1] - old.origin[1]];
        field.values[i] =
            if rel[0] >= 0 && rel[1] >= 0 && (rel[0] as usize) < o0 && (rel[1] as usize) < o1 {
                old.values[rel[1] as usize * o0 + rel[0] as usize]
            } else {
                let ph = grid.phase(n);
                if (rel[axis] < 0) == layout.upper_low {
                    layout.upper[ph]
                } else {
                    layout.lower[ph]
                }
            };
    }
    field
}

/// Runs the Cauchy problem from `p̄ 1{x.e <= 0}` and reads off plateaus and
/// transition speeds. The domain doubles whenever a level nears its ends.
pub fn observe_terrace_from_cauchy(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    direction: [i32; 2],
    horizon: f64,
) -> Result<ObservedTerrace> {
    lattice.require_no_marginal()?;
    if !lattice.totally_ordered {
        return Err(Error::Unordered(lattice.intersecting.len()));
    }
    let tol = &run.tolerances;
    let top = lattice.top();
    let hi = top.max();
    let dt = time_step(table, run, (0.0, hi));
    let grid = table.grid;
    let ppp = grid.points_per_period as f64;
    let mut extent = grid.extent_periods;
    let mut st = Stage::new(table, lattice, direction, extent, dt)?;
    let mut field = Field::from_fn(&st.evolver.mesh, |n| {
        let ph = grid.phase(n);
        if st.layout.s(n) <= 0.0 {
            st.layout.upper[ph]
        } else {
            st.layout.lower[ph]
        }
    });
    let bounds = Bounds {
        lo: 0.0,
        hi,
        eps: tol.eps_overshoot,
    };
    let margin = tol.boundary_margin * ppp;
    let cadence = ((run.observe_every / dt).round() as usize).max(1);
    let n_obs = (horizon / (cadence as f64 * dt)).ceil() as usize;
    let n_levels = st.tracker.levels.len();
    let mut times = Vec::with_capacity(n_obs);
    let mut positions = vec![Vec::with_capacity(n_obs); n_levels];
    let mut scratch = Vec::new();
    for _ in 0..n_obs {
        for _ in 0..cadence {
            st.evolver.step(&mut field, &mut scratch);
        }
        crate::evolve::check(&field, Some(bounds))?;
        let c = st
            .tracker
            .crossings(&st.layout, &field)
            .ok_or(Error::BoundaryContamination {
                distance: 0.0,
                t: field.t,
            })?;
        times.push(field.t);
        for (p, s) in positions.iter_mut().zip(&c.s) {
            p.push(*s);
        }
        let n_axis = field.shape[st.layout.axis] as f64;
        let first = c.index.iter().copied().fold(f64::INFINITY, f64::min);
        let last = c.index.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if last - first + 4.0 * margin > n_axis {
            extent *= 2;
            st = Stage::new(table, lattice, direction, extent, dt)?;
            field = regrid(&st.layout, &st.evolver, &field);
            continue;
        }
        let off = 0.5 * (first + last) - 0.5 * n_axis;
        if off.abs() > 2.0 * ppp {
            let periods = (off / ppp).round() as i64;
            let axis = st.layout.axis;
            let old_origin = field.origin[axis];
            let layout = &st.layout;
            field.shift_periods(axis, periods, grid.points_per_period, |n| {
                let ph = grid.phase(n);
                if (n[axis] < old_origin) == layout.upper_low {
                    layout.upper[ph]
                } else {
                    layout.lower[ph]
                }
            });
        }
    }
    let window = [0.5 * horizon, horizon];
    let fits: Vec<SpeedEstimate> = positions
        .iter()
        .map(|p| fit_speed(&times, p, window, tol.se_floor))
        .collect::<Result<_>>()?;
    let c_min = fits.iter().map(|f| f.value).fold(f64::INFINITY, f64::min);
    let c_max = fits
        .iter()
        .map(|f| f.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_width = (0.05 * (c_max - c_min) * field.t).max(5.0);
    let plateaus = detect_plateaus(&st.layout, lattice, &field, min_width)?;
    let m = lattice.stable.len() - 1;
    let mut platform_indices = vec![0];
    platform_indices.extend(plateaus.iter().map(|p| p.index));
    platform_indices.push(m);
    let mut transitions = Vec::new();
    for w in platform_indices.windows(2) {
        let (i, j) = (w[0], w[1]);
        let level_speeds: Vec<SpeedEstimate> = fits[i..j].to_vec();
        let mut unresolved = false;
        for a in 0..level_speeds.len() {
            for b in a + 1..level_speeds.len() {
                let se = level_speeds[a].se.hypot(level_speeds[b].se);
                if (level_speeds[a].value - level_speeds[b].value).abs() > 3.0 * se {
                    unresolved = true;
                }
            }
        }
        let speed = level_speeds
            .iter()
            .min_by(|a, b| a.se.total_cmp(&b.se))
            .cloned()
            .expect("transition has a level");
        transitions.push(Transition {
            upper_id: lattice.stable[i].id.clone(),
            lower_id: lattice.stable[j].id.clone(),
            speed,
            level_speeds,
            unresolved,
        });
    }
    let speeds_nondecreasing = transitions.windows(2).all(|w| {
        let (a, b) = (&w[0].speed, &w[1].speed);
        a.value <= b.value + 3.0 * a.se.hypot(b.se)
    });
    Ok(ObservedTerrace {
        direction,
        platforms: platform_indices
            .iter()
            .map(|&i| lattice.stable[i].id.clone())
            .collect(),
        platform_indices,
        transitions,
        plateaus,
        horizon,
        final_extent: extent,
        speeds_nondecreasing,
    })
}

/// Maximal runs of the clamped axis where every node sits within
/// `1e-2 * gap` of one intermediate lattice state.
fn detect_plateaus(
    layout: &Layout,
    lattice: &StateLattice,
    field: &Field,
    min_width: f64,
) -> Result<Vec<Plateau>> {
    let grid = layout.table.grid;
    let m = lattice.stable.len() - 1;
    let means: Vec<f64> = lattice.stable.iter().map(|s| s.mean()).collect();
    let tols: Vec<f64> = (0..=m)
        .map(|k| {
            let above = if k > 0 {
                means[k - 1] - means[k]
            } else {
                f64::INFINITY
            };
            let below = if k < m {
                means[k] - means[k + 1]
            } else {
                f64::INFINITY
            };
            1e-2 * above.min(below)
        })
        .collect();
    // States are stored in run axes; transpose the lattice values if needed.
    let values: Vec<Vec<f64>> = lattice
        .stable
        .iter()
        .map(|s| {
            if layout.transposed {
                grid.transpose_cell(&s.values)
            } else {
                s.values.clone()
            }
        })
        .collect();
    let [n0, n1] = field.shape;
    let axis = layout.axis;
    let (len, lines) = if axis == 0 { (n0, n1) } else { (n1, n0) };
    let at = |r: usize, line: usize| {
        if axis == 0 {
            line * n0 + r
        } else {
            r * n0 + line
        }
    };
    let mut state_at: Vec<Option<usize>> = Vec::with_capacity(len);
    for r in 0..len {
        let mut which = None;
        for k in 0..=m {
            let ok = (0..lines).all(|line| {
                let i = at(r, line);
                let ph = grid.phase(field.node(i));
                (field.values[i] - values[k][ph]).abs() <= tols[k]
            });
            if ok {
                which = Some(k);
                break;
            }
        }
        state_at.push(which);
    }
    let step = layout.step_length();
    let s_of = |r: usize| {
        let mut node = field.node(0);
        node[axis] += r as i64;
        layout.s(node)
    };
    let mut best: Vec<Option<Plateau>> = vec![None; m + 1];
    let mut r = 0;
    while r < len {
        let k = state_at[r];
        let start = r;
        while r < len && state_at[r] == k {
            r += 1;
        }
        if let Some(k) = k {
            let width = (r - start) as f64 * step;
            if k > 0
                && k < m
                && width >= min_width
                && best[k].as_ref().is_none_or(|b| b.width < width)
            {
                let (a, b) = (s_of(start), s_of(r - 1));
                best[k] = Some(Plateau {
                    state_id: lattice.stable[k].id.clone(),
                    index: k,
                    range: [a.min(b), a.max(b)],
                    width,
                });
            }
        }
    }
    check_unknown(layout, field, &state_at, min_width, step)?;
    Ok(best.into_iter().flatten().collect())
}

/// Flat stretches of the period-averaged profile that match no known state.
fn check_unknown(
    layout: &Layout,
    field: &Field,
    state_at: &[Option<usize>],
    min_width: f64,
    step: f64,
) -> Result<()> {
    let grid = layout.table.grid;
    let ppp = grid.points_per_period;
    let [n0, _] = field.shape;
    let axis = layout.axis;
    let len = state_at.len();
    if len < ppp {
        return Ok(());
    }
    let at = |r: usize| if axis == 0 { r } else { r * n0 };
    let w: Vec<f64> = (0..len)
        .map(|r| {
            let i = at(r);
            let ph = grid.phase(field.node(i));
            (field.values[i] - layout.lower[ph]) / (layout.upper[ph] - layout.lower[ph])
        })
        .collect();
    let avg: Vec<f64> = w
        .windows(ppp)
        .map(|s| s.iter().sum::<f64>() / ppp as f64)
        .collect();
    let need = (min_width / step).ceil() as usize;
    let mut start = 0;
    while start < avg.len() {
        let mut end = start;
        while end < avg.len() && state_at[end].is_none() && (avg[end] - avg[start]).abs() < 5e-3 {
            end += 1;
        }
        if end - start >= need
            && state_at[start].is_none()
            && avg[start] > 0.02
            && avg[start] < 0.98
        {
            let mean = avg[start..end].iter().sum::<f64>() / (end - start) as f64;
            let i = at(start);
            let ph = grid.phase(field.node(i));
            let u = layout.lower[ph] + mean * (layout.upper[ph] - layout.lower[ph]);
            return Err(Error::UnknownPlateau { mean: u });
        }
        start = end.max(start + 1);
    }
    Ok(())
}
