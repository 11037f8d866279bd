//! Monotone IMEX time stepping.
//!
//! One step applies the reaction explicitly and then the diffusion implicitly,
//! one axis at a time. With `dt * Lip(f) <= 1` both stages are order preserving,
//! so the discrete semiflow satisfies the comparison principle.

mod mesh;

pub use mesh::{Clamp, Domain, Mesh};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::CellTable;

/// Nodal values on a mesh, row-major `[n1][n0]`, anchored at a global node.
#[derive(Clone, Debug, Serialize)]
pub struct Field {
    pub values: Vec<f64>,
    pub shape: [usize; 2],
    pub origin: [i64; 2],
    pub t: f64,
}

impl Field {
    pub fn from_fn(mesh: &Mesh, f: impl Fn([i64; 2]) -> f64) -> Self {
        let values = (0..mesh.len())
            .map(|i| f(mesh.node(mesh.origin, i)))
            .collect();
        Self {
            values,
            shape: mesh.shape,
            origin: mesh.origin,
            t: 0.0,
        }
    }

    /// Tiles a cell field over the mesh.
    pub fn from_cell(mesh: &Mesh, cell: &[f64]) -> Self {
        Self::from_fn(mesh, |n| cell[mesh.grid.phase(n)])
    }

    #[inline]
    pub fn node(&self, idx: usize) -> [i64; 2] {
        [
            self.origin[0] + (idx % self.shape[0]) as i64,
            self.origin[1] + (idx / self.shape[0]) as i64,
        ]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.shape[0]..(j + 1) * self.shape[0]]
    }

    /// Shifts the data by `periods` whole periods along `axis`, refilling with
    /// `fill` (a cell field). Phases of stored nodes are unchanged, so the
    /// same mesh keeps applying. The origin tracks the new global position.
    pub fn shift_periods(
        &mut self,
        axis: usize,
        periods: i64,
        ppp: usize,
        fill: impl Fn([i64; 2]) -> f64,
    ) {
        if periods == 0 {
            return;
        }
        let by = periods * ppp as i64;
        let [n0, n1] = self.shape;
        let old = self.values.clone();
        let old_origin = self.origin;
        self.origin[axis] += by;
        for j in 0..n1 {
            for i in 0..n0 {
                let mut src = [i as i64, j as i64];
                src[axis] += by;
                let inside =
                    src[0] >= 0 && src[1] >= 0 && (src[0] as usize) < n0 && (src[1] as usize) < n1;
                let idx = j * n0 + i;
                self.values[idx] = if inside {
                    old[src[1] as usize * n0 + src[0] as usize]
                } else {
                    fill([old_origin[0] + src[0], old_origin[1] + src[1]])
                };
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }
}

/// Something that watches a run at a fixed cadence.
pub trait Observer {
    fn observe(&mut self, field: &Field) -> Result<()>;
}

/// A mesh and a cell table with a fixed step.
pub struct Evolver {
    pub table: CellTable,
    pub mesh: Mesh,
    phases: Vec<usize>,
}

/// Invariant-region guard: values must stay in `[lo - eps, hi + eps]`.
#[derive(Clone, Copy, Debug)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub observations: usize,
}

impl Evolver {
    pub fn new(table: &CellTable, domain: Domain, dt: f64) -> Self {
        let mesh = Mesh::new(table, domain, dt);
        let phases = mesh.phases(mesh.origin);
        Self {
            table: table.clone(),
            mesh,
            phases,
        }
    }

    pub fn dt(&self) -> f64 {
        self.mesh.dt
    }

    /// One IMEX step in place.
    pub fn step(&self, field: &mut Field, scratch: &mut Vec<f64>) {
        let dt = self.mesh.dt;
        for (u, &ph) in field.values.iter_mut().zip(&self.phases) {
            *u += dt * self.table.f(ph, *u);
        }
        self.mesh.diffuse(&mut field.values, scratch);
        field.t += dt;
    }

    /// Discrete right-hand side `L u + f(x, u)`.
    pub fn residual(&self, field: &Field) -> Vec<f64> {
        let mut r = self.mesh.apply_operator(&field.values);
        for ((r, &u), &ph) in r.iter_mut().zip(&field.values).zip(&self.phases) {
            *r += self.table.f(ph, u);
        }
        r
    }

    /// Runs to `field.t + duration`, calling observers every `observe_every`
    /// (and once at the start). Numerical guards abort the run.
    pub fn run(
        &self,
        field: &mut Field,
        duration: f64,
        observe_every: f64,
        bounds: Option<Bounds>,
        observers: &mut [&mut dyn Observer],
    ) -> Result<RunSummary> {
        let dt = self.mesh.dt;
        let steps = (duration / dt - 1e-9).ceil().max(0.0) as usize;
        let cadence = ((observe_every / dt).round() as usize).max(1);
        let mut scratch = Vec::new();
        let mut observations = 0;
        let notify = |field: &Field, observers: &mut [&mut dyn Observer]| -> Result<()> {
            for o in observers.iter_mut() {
                o.observe(field)?;
            }
            Ok(())
        };
        notify(field, observers)?;
        observations += 1;
        for s in 1..=steps {
            self.step(field, &mut scratch);
            if s % cadence == 0 || s == steps {
                check(field, bounds)?;
                notify(field, observers)?;
                observations += 1;
            }
        }
        Ok(RunSummary {
            steps,
            dt,
            observations,
        })
    }
}

pub(crate) fn check(field: &Field, bounds: Option<Bounds>) -> Result<()> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &u in &field.values {
        if !u.is_finite() {
            return Err(Error::NonFinite { t: field.t });
        }
        lo = lo.min(u);
        hi = hi.max(u);
    }
    if let Some(b) = bounds {
        let excess = (b.lo - lo).max(hi - b.hi);
        if excess > b.eps {
            return Err(Error::Overshoot { excess, t: field.t });
        }
    }
    Ok(())
}

/// Result of running two ordered data side by side.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    /// `max (u - v)^+` over all observed times; zero when order is preserved.
    pub max_violation: f64,
    pub passed: bool,
}

/// Evolves `u <= v` together and records the worst order violation.
pub fn comparison_check(
    evolver: &Evolver,
    mut u: Field,
    mut v: Field,
    duration: f64,
    tol: f64,
) -> ComparisonReport {
    let steps = (duration / evolver.dt()).ceil() as usize;
    let mut scratch = Vec::new();
    let mut worst: f64 = 0.0;
    let violation = |u: &Field, v: &Field| {
        u.values
            .iter()
            .zip(&v.values)
            .fold(0.0, |m: f64, (a, b)| m.max(a - b))
    };
    worst = worst.max(violation(&u, &v));
    for _ in 0..steps {
        evolver.step(&mut u, &mut scratch);
        evolver.step(&mut v, &mut scratch);
        worst = worst.max(violation(&u, &v));
    }
    ComparisonReport {
        max_violation: worst,
        passed: worst <= tol,
    }
}
