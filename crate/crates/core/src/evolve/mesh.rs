//! Line-sweep discretisation of `div(A grad u)`.
//!
//! Every domain is stored as a row-major block of nodes and described as a
//! set of sweeps, one per axis. A sweep is a family of one-dimensional lines;
//! each line carries a prefactored tridiagonal system for `I - dt L_axis`
//! together with its end conditions (clamped ghost values or cyclic closure).
//! Twisted strips reuse the same machinery: their axis-0 lines are chains that
//! wrap from the right edge of the stored block onto a shifted row.

use std::collections::HashMap;
use std::rc::Rc;

use crate::problem::{CellTable, Grid};

/// Values imposed beyond clamped boundaries, as cell fields indexed by phase.
#[derive(Clone, Debug)]
pub enum Clamp {
    Uniform(Vec<f64>),
    /// `low` below the clamp axis range, `high` above it.
    Sides {
        low: Vec<f64>,
        high: Vec<f64>,
    },
}

impl Clamp {
    fn value(&self, phase: usize, high_side: bool) -> f64 {
        match self {
            Clamp::Uniform(s) => s[phase],
            Clamp::Sides { low, high } => {
                if high_side {
                    high[phase]
                } else {
                    low[phase]
                }
            }
        }
    }
}

/// Spatial domain of a run. Extents are in periods.
#[derive(Clone, Debug)]
pub enum Domain {
    /// Fully periodic box anchored at the origin.
    Periodic { periods: [usize; 2] },
    /// One-dimensional segment clamped at both ends; `low` is the left side.
    Line {
        start: i64,
        periods: usize,
        clamp: Clamp,
    },
    /// Two-dimensional rectangle clamped on all four sides.
    Rect {
        start: [i64; 2],
        periods: [usize; 2],
        clamp: Vec<f64>,
    },
    /// Strip for planar data in the integer direction `(p, q)`, `q != 0`.
    /// Periodic with `|q|` periods along `x1` up to a shift of `sgn(q) p`
    /// periods in `x2`, clamped along `x2`.
    Strip {
        direction: [i32; 2],
        start: i64,
        periods: usize,
        clamp: Clamp,
    },
}

impl Domain {
    /// Axis along which the domain is clamped with a low and a high side.
    pub fn clamp_axis(&self) -> Option<usize> {
        match self {
            Domain::Line { .. } => Some(0),
            Domain::Strip { .. } => Some(1),
            _ => None,
        }
    }

    pub fn clamp(&self) -> Option<&Clamp> {
        match self {
            Domain::Line { clamp, .. } | Domain::Strip { clamp, .. } => Some(clamp),
            _ => None,
        }
    }
}

/// Prefactored `I - dt L` along one line.
#[derive(Debug)]
pub(crate) struct Factor {
    /// Coupling to the previous node (ghost or cyclic partner for `k = 0`).
    pub lower: Vec<f64>,
    /// Coupling to the next node (ghost or cyclic partner for the last node).
    pub upper: Vec<f64>,
    cprime: Vec<f64>,
    inv: Vec<f64>,
    sub: Vec<f64>,
    cyclic: Option<CyclicCorrection>,
}

#[derive(Debug)]
struct CyclicCorrection {
    z: Vec<f64>,
    v_last: f64,
    denom: f64,
}

impl Factor {
    fn new(lower: Vec<f64>, upper: Vec<f64>, dt: f64, cyclic: bool) -> Self {
        let n = lower.len();
        let mut diag: Vec<f64> = (0..n).map(|k| 1.0 + dt * (lower[k] + upper[k])).collect();
        let sub: Vec<f64> = (0..n).map(|k| -dt * lower[k]).collect();
        let sup: Vec<f64> = (0..n).map(|k| -dt * upper[k]).collect();
        let mut correction = None;
        let mut gamma = 0.0;
        let (alpha, beta) = (sup[n - 1], sub[0]);
        if cyclic {
            gamma = -diag[0];
            diag[0] -= gamma;
            diag[n - 1] -= alpha * beta / gamma;
        }
        let mut cprime = vec![0.0; n];
        let mut inv = vec![0.0; n];
        inv[0] = 1.0 / diag[0];
        cprime[0] = sup[0] * inv[0];
        for k in 1..n {
            inv[k] = 1.0 / (diag[k] - sub[k] * cprime[k - 1]);
            cprime[k] = sup[k] * inv[k];
        }
        let mut f = Self {
            lower,
            upper,
            cprime,
            inv,
            sub,
            cyclic: None,
        };
        if cyclic {
            let mut z = vec![0.0; n];
            z[0] = gamma;
            z[n - 1] = alpha;
            f.thomas(&mut z);
            let v_last = beta / gamma;
            let denom = 1.0 + z[0] + v_last * z[n - 1];
            correction = Some(CyclicCorrection { z, v_last, denom });
        }
        f.cyclic = correction;
        f
    }

    fn len(&self) -> usize {
        self.inv.len()
    }

    #[inline]
    fn thomas(&self, d: &mut [f64]) {
        let n = d.len();
        d[0] *= self.inv[0];
        for k in 1..n {
            d[k] = (d[k] - self.sub[k] * d[k - 1]) * self.inv[k];
        }
        for k in (0..n - 1).rev() {
            d[k] -= self.cprime[k] * d[k + 1];
        }
    }

    /// Solves in place; `d` already holds the ghost contributions.
    fn solve(&self, d: &mut [f64]) {
        self.thomas(d);
        if let Some(c) = &self.cyclic {
            let n = d.len();
            let factor = (d[0] + c.v_last * d[n - 1]) / c.denom;
            for (x, z) in d.iter_mut().zip(&c.z) {
                *x -= factor * z;
            }
        }
    }
}

#[derive(Debug)]
pub(crate) enum LineNodes {
    Strided { start: usize, stride: usize },
    Explicit(Vec<u32>),
}

#[derive(Debug)]
pub(crate) struct Line {
    nodes: LineNodes,
    factor: Rc<Factor>,
    /// Ghost values beyond each end (unused for cyclic lines).
    ghost: [f64; 2],
}

impl Line {
    #[inline]
    fn node(&self, k: usize) -> usize {
        match &self.nodes {
            LineNodes::Strided { start, stride } => start + k * stride,
            LineNodes::Explicit(v) => v[k] as usize,
        }
    }
}

/// All columns of a block, each clamped at both ends, solved together row by row.
#[derive(Debug)]
pub(crate) struct ColumnBlock {
    factors: Vec<Rc<Factor>>,
    ghost_low: Vec<f64>,
    ghost_high: Vec<f64>,
}

#[derive(Debug)]
pub(crate) enum Sweep {
    Lines(Vec<Line>),
    Columns(ColumnBlock),
}

/// Discretised domain ready for time stepping with a fixed `dt`.
#[derive(Debug)]
pub struct Mesh {
    pub grid: Grid,
    pub shape: [usize; 2],
    pub origin: [i64; 2],
    pub dt: f64,
    pub(crate) sweeps: Vec<Sweep>,
    domain: Domain,
}

type FactorKey = (usize, usize, usize, bool);

struct Builder<'a> {
    table: &'a CellTable,
    dt: f64,
    cache: HashMap<FactorKey, Rc<Factor>>,
}

impl<'a> Builder<'a> {
    fn grid(&self) -> Grid {
        self.table.grid
    }

    /// Factor for a line of `len` nodes along `axis` whose first node is `first`.
    fn factor(&mut self, axis: usize, first: [i64; 2], len: usize, cyclic: bool) -> Rc<Factor> {
        let grid = self.grid();
        let key = (axis, grid.phase(first), len, cyclic);
        if let Some(f) = self.cache.get(&key) {
            return f.clone();
        }
        let coupling = &self.table.coupling[axis];
        let step = |node: [i64; 2], by: i64| {
            let mut n = node;
            n[axis] += by;
            n
        };
        let mut lower = Vec::with_capacity(len);
        let mut upper = Vec::with_capacity(len);
        for k in 0..len as i64 {
            let node = step(first, k);
            lower.push(coupling[grid.phase(step(node, -1))]);
            upper.push(coupling[grid.phase(node)]);
        }
        let f = Rc::new(Factor::new(lower, upper, self.dt, cyclic));
        self.cache.insert(key, f.clone());
        f
    }
}

impl Mesh {
    pub fn new(table: &CellTable, domain: Domain, dt: f64) -> Self {
        let grid = table.grid;
        let p = grid.points_per_period;
        let mut b = Builder {
            table,
            dt,
            cache: HashMap::new(),
        };
        let (shape, origin, sweeps) = match &domain {
            Domain::Periodic { periods } => {
                let shape = if grid.dimension == 1 {
                    [periods[0] * p, 1]
                } else {
                    [periods[0] * p, periods[1] * p]
                };
                let mut sweeps = Vec::new();
                for axis in 0..grid.dimension {
                    let (len, count, stride, step) = if axis == 0 {
                        (shape[0], shape[1], 1, shape[0])
                    } else {
                        (shape[1], shape[0], shape[0], 1)
                    };
                    let lines = (0..count)
                        .map(|m| {
                            let first = if axis == 0 {
                                [0, m as i64]
                            } else {
                                [m as i64, 0]
                            };
                            Line {
                                nodes: LineNodes::Strided {
                                    start: m * step,
                                    stride,
                                },
                                factor: b.factor(axis, first, len, true),
                                ghost: [0.0; 2],
                            }
                        })
                        .collect();
                    sweeps.push(Sweep::Lines(lines));
                }
                (shape, [0, 0], sweeps)
            }
            Domain::Line {
                start,
                periods,
                clamp,
            } => {
                assert_eq!(grid.dimension, 1, "line domains are one-dimensional");
                let n = periods * p;
                let origin = [start * p as i64, 0];
                let factor = b.factor(0, origin, n, false);
                let ghost = [
                    clamp.value(grid.phase([origin[0] - 1, 0]), false),
                    clamp.value(grid.phase([origin[0] + n as i64, 0]), true),
                ];
                let line = Line {
                    nodes: LineNodes::Strided {
                        start: 0,
                        stride: 1,
                    },
                    factor,
                    ghost,
                };
                ([n, 1], origin, vec![Sweep::Lines(vec![line])])
            }
            Domain::Rect {
                start,
                periods,
                clamp,
            } => {
                assert_eq!(grid.dimension, 2, "rectangles are two-dimensional");
                let shape = [periods[0] * p, periods[1] * p];
                let origin = [start[0] * p as i64, start[1] * p as i64];
                let rows = (0..shape[1])
                    .map(|j| {
                        let first = [origin[0], origin[1] + j as i64];
                        Line {
                            nodes: LineNodes::Strided {
                                start: j * shape[0],
                                stride: 1,
                            },
                            factor: b.factor(0, first, shape[0], false),
                            ghost: [
                                clamp[grid.phase([first[0] - 1, first[1]])],
                                clamp[grid.phase([first[0] + shape[0] as i64, first[1]])],
                            ],
                        }
                    })
                    .collect();
                let columns = column_block(&mut b, origin, shape, |phase, _| clamp[phase]);
                (
                    shape,
                    origin,
                    vec![Sweep::Lines(rows), Sweep::Columns(columns)],
                )
            }
            Domain::Strip {
                direction,
                start,
                periods,
                clamp,
            } => {
                assert_eq!(grid.dimension, 2, "strips are two-dimensional");
                let [dp, dq] = *direction;
                assert!(dq != 0, "strip directions need a nonzero x2 component");
                let wrap = dq.unsigned_abs() as usize * p;
                let twist = dq.signum() as i64 * dp as i64 * p as i64;
                let shape = [wrap, periods * p];
                let origin = [0, start * p as i64];
                let n1 = shape[1] as i64;
                let mut chains = Vec::new();
                for j in 0..n1 {
                    let prev = j - twist;
                    let starts_here = twist == 0 || prev < 0 || prev >= n1;
                    if !starts_here {
                        continue;
                    }
                    let mut nodes = Vec::new();
                    let mut row = j;
                    loop {
                        for i in 0..wrap {
                            nodes.push((row as usize * wrap + i) as u32);
                        }
                        row += twist;
                        if twist == 0 || row < 0 || row >= n1 {
                            break;
                        }
                    }
                    let first = [origin[0], origin[1] + j];
                    let len = nodes.len();
                    if twist == 0 {
                        chains.push(Line {
                            nodes: LineNodes::Explicit(nodes),
                            factor: b.factor(0, first, len, true),
                            ghost: [0.0; 2],
                        });
                    } else {
                        let before = grid.phase([first[0] - 1, first[1]]);
                        let after = grid.phase([first[0] + len as i64, first[1]]);
                        let exit_high = row >= n1;
                        chains.push(Line {
                            nodes: LineNodes::Explicit(nodes),
                            factor: b.factor(0, first, len, false),
                            ghost: [
                                clamp.value(before, !exit_high),
                                clamp.value(after, exit_high),
                            ],
                        });
                    }
                }
                let columns = column_block(&mut b, origin, shape, |phase, high| {
                    clamp.value(phase, high)
                });
                (
                    shape,
                    origin,
                    vec![Sweep::Lines(chains), Sweep::Columns(columns)],
                )
            }
        };
        Self {
            grid,
            shape,
            origin,
            dt,
            sweeps,
            domain,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.shape[0] * self.shape[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Global node of a stored index, relative to a field origin.
    #[inline]
    pub fn node(&self, origin: [i64; 2], idx: usize) -> [i64; 2] {
        [
            origin[0] + (idx % self.shape[0]) as i64,
            origin[1] + (idx / self.shape[0]) as i64,
        ]
    }

    /// Phase of every stored node, for a field whose origin is `origin`.
    pub fn phases(&self, origin: [i64; 2]) -> Vec<usize> {
        (0..self.len())
            .map(|i| self.grid.phase(self.node(origin, i)))
            .collect()
    }

    /// Implicit diffusion sweeps `(I - dt L_1)^{-1} ... (I - dt L_d)^{-1}` in place.
    pub(crate) fn diffuse(&self, u: &mut [f64], scratch: &mut Vec<f64>) {
        let dt = self.dt;
        for sweep in &self.sweeps {
            match sweep {
                Sweep::Lines(lines) => {
                    for line in lines {
                        let n = line.factor.len();
                        scratch.clear();
                        scratch.extend((0..n).map(|k| u[line.node(k)]));
                        if line.factor.cyclic.is_none() {
                            scratch[0] += dt * line.factor.lower[0] * line.ghost[0];
                            scratch[n - 1] += dt * line.factor.upper[n - 1] * line.ghost[1];
                        }
                        line.factor.solve(scratch);
                        for (k, v) in scratch.iter().enumerate() {
                            u[line.node(k)] = *v;
                        }
                    }
                }
                Sweep::Columns(block) => solve_columns(block, self.shape, dt, u),
            }
        }
    }

    /// Discrete `div(A grad u)` at every stored node.
    pub fn apply_operator(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        for sweep in &self.sweeps {
            match sweep {
                Sweep::Lines(lines) => {
                    for line in lines {
                        let f = &line.factor;
                        let n = f.len();
                        let cyclic = f.cyclic.is_some();
                        for k in 0..n {
                            let here = u[line.node(k)];
                            let left = if k > 0 {
                                u[line.node(k - 1)]
                            } else if cyclic {
                                u[line.node(n - 1)]
                            } else {
                                line.ghost[0]
                            };
                            let right = if k + 1 < n {
                                u[line.node(k + 1)]
                            } else if cyclic {
                                u[line.node(0)]
                            } else {
                                line.ghost[1]
                            };
                            out[line.node(k)] +=
                                f.lower[k] * (left - here) + f.upper[k] * (right - here);
                        }
                    }
                }
                Sweep::Columns(block) => {
                    let [n0, n1] = self.shape;
                    for (i, f) in block.factors.iter().enumerate() {
                        for k in 0..n1 {
                            let here = u[k * n0 + i];
                            let left = if k > 0 {
                                u[(k - 1) * n0 + i]
                            } else {
                                block.ghost_low[i]
                            };
                            let right = if k + 1 < n1 {
                                u[(k + 1) * n0 + i]
                            } else {
                                block.ghost_high[i]
                            };
                            out[k * n0 + i] +=
                                f.lower[k] * (left - here) + f.upper[k] * (right - here);
                        }
                    }
                }
            }
        }
        out
    }
}

fn column_block(
    b: &mut Builder<'_>,
    origin: [i64; 2],
    shape: [usize; 2],
    clamp: impl Fn(usize, bool) -> f64,
) -> ColumnBlock {
    let grid = b.grid();
    let mut factors = Vec::with_capacity(shape[0]);
    let mut ghost_low = Vec::with_capacity(shape[0]);
    let mut ghost_high = Vec::with_capacity(shape[0]);
    for i in 0..shape[0] as i64 {
        let first = [origin[0] + i, origin[1]];
        factors.push(b.factor(1, first, shape[1], false));
        ghost_low.push(clamp(grid.phase([first[0], first[1] - 1]), false));
        ghost_high.push(clamp(
            grid.phase([first[0], first[1] + shape[1] as i64]),
            true,
        ));
    }
    ColumnBlock {
        factors,
        ghost_low,
        ghost_high,
    }
}

/// Thomas sweeps over all columns at once, walking rows in memory order.
fn solve_columns(block: &ColumnBlock, shape: [usize; 2], dt: f64, u: &mut [f64]) {
    let [n0, n1] = shape;
    for (i, f) in block.factors.iter().enumerate() {
        u[i] += dt * f.lower[0] * block.ghost_low[i];
        u[(n1 - 1) * n0 + i] += dt * f.upper[n1 - 1] * block.ghost_high[i];
    }
    for (i, f) in block.factors.iter().enumerate() {
        u[i] *= f.inv[0];
    }
    for k in 1..n1 {
        let (prev, cur) = u[(k - 1) * n0..(k + 1) * n0].split_at_mut(n0);
        for (i, f) in block.factors.iter().enumerate() {
            cur[i] = (cur[i] - f.sub[k] * prev[i]) * f.inv[k];
        }
    }
    for k in (0..n1 - 1).rev() {
        let (cur, next) = u[k * n0..(k + 2) * n0].split_at_mut(n0);
        for (i, f) in block.factors.iter().enumerate() {
            cur[i] -= f.cprime[k] * next[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};

    fn dense(f: &Factor, dt: f64) -> DMatrix<f64> {
        let n = f.len();
        let mut m = DMatrix::zeros(n, n);
        for k in 0..n {
            m[(k, k)] = 1.0 + dt * (f.lower[k] + f.upper[k]);
            if k > 0 {
                m[(k, k - 1)] = -dt * f.lower[k];
            }
            if k + 1 < n {
                m[(k, k + 1)] = -dt * f.upper[k];
            }
        }
        if f.cyclic.is_some() {
            m[(0, n - 1)] = -dt * f.lower[0];
            m[(n - 1, 0)] = -dt * f.upper[n - 1];
        }
        m
    }

    #[test]
    fn thomas_and_sherman_morrison_match_dense_solves() {
        let dt = 0.3;
        for cyclic in [false, true] {
            let lower: Vec<f64> = (0..7).map(|k| 1.0 + 0.1 * k as f64).collect();
            let upper: Vec<f64> = (0..7).map(|k| 2.0 - 0.2 * k as f64).collect();
            let f = Factor::new(lower, upper, dt, cyclic);
            let rhs: Vec<f64> = (0..7).map(|k| (k as f64).sin()).collect();
            let mut x = rhs.clone();
            f.solve(&mut x);
            let exact = dense(&f, dt).lu().solve(&DVector::from_vec(rhs)).unwrap();
            for k in 0..7 {
                assert!((x[k] - exact[k]).abs() < 1e-13, "cyclic={cyclic}");
            }
        }
    }
}
