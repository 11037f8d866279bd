//! Shared setup and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_rational::BigRational;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use terracelab::problem::{CellTable, Config, Grid, PeriodicProblem};
use terracelab::spectral::{enumerate_stable_states, StateLattice};
use terracelab::wulff::{ratio, wulff_shape, ShapePolygon, SpeedField};

/// A loaded configuration with its tables and stable states.
pub struct Lab {
    pub cfg: Config,
    pub problem: PeriodicProblem,
    /// Grid over the configured extent.
    pub table: CellTable,
    /// One periodic cell.
    pub cell: CellTable,
    pub lattice: StateLattice,
}

impl Lab {
    pub fn new(toml: &str) -> Lab {
        let cfg = Config::from_toml(toml).expect("valid config");
        let ppp = cfg.grid.points_per_period;
        let problem = PeriodicProblem::new(&cfg.problem, ppp).expect("valid problem");
        let dim = problem.dimension();
        let table = CellTable::new(&problem, Grid::new(dim, ppp, cfg.grid.extent_periods));
        let cell = CellTable::new(&problem, Grid::new(dim, ppp, 1));
        let lattice = enumerate_stable_states(&cell, &cfg.run, &cfg.run.probes).expect("lattice");
        Lab {
            cfg,
            problem,
            table,
            cell,
            lattice,
        }
    }
}

pub fn cubic(dimension: usize, a: f64, ppp: usize) -> String {
    format!(
        "[problem]\ndimension = {dimension}\n[problem.reaction]\nbase = {{ kind = \"cubic\", a = {a} }}\n\
         [grid]\npoints_per_period = {ppp}\n"
    )
}

pub fn roots(roots: &[f64], scale: f64, ppp: usize, horizon: f64) -> String {
    let list: Vec<String> = roots.iter().map(|r| format!("{r:?}")).collect();
    format!(
        "[problem]\ndimension = 1\n[problem.reaction]\nscale = {scale:?}\n\
         base = {{ kind = \"roots\", roots = [{}] }}\n[grid]\npoints_per_period = {ppp}\n\
         [run]\nhorizon = {horizon:?}\n",
        list.join(", ")
    )
}

/// Three stable states, upper front slower than the lower one.
pub fn tristable_no_merge(horizon: f64) -> String {
    roots(&[0.0, 0.1, 0.5, 0.7, 1.0], 4.0, 10, horizon)
}

/// Three stable states, upper front faster than the lower one.
pub fn tristable_merge(horizon: f64) -> String {
    roots(&[0.0, 0.1, 0.4, 0.6, 1.0], 4.0, 10, horizon)
}

/// Four stable states with two consecutive descents of the adjacent speeds.
pub fn double_descent(horizon: f64) -> String {
    roots(&[0.0, 0.1, 0.3, 0.4, 0.6, 0.7, 1.0], 25.0, 10, horizon)
}

/// Travelling wave `U'' + c U' + f(U) = 0` from 1 down to 0, by shooting
/// along the unstable manifold of `(1, 0)` with classical RK4.
pub struct Shooting {
    pub c: f64,
    pub z: Vec<f64>,
    pub u: Vec<f64>,
}

impl Shooting {
    /// `f` must have stable zeros at 0 and 1; `df1 = f'(1) < 0`.
    pub fn bistable(f: impl Fn(f64) -> f64, df1: f64) -> Shooting {
        let (mut lo, mut hi) = (-2.0, 2.0);
        for _ in 0..60 {
            let c = 0.5 * (lo + hi);
            match shoot(&f, df1, c, None) {
                Outcome::Overshoot => lo = c,
                Outcome::TurnedBack => hi = c,
            }
        }
        let c = 0.5 * (lo + hi);
        let mut path = Vec::new();
        shoot(&f, df1, c, Some(&mut path));
        // Centre on the level 1/2.
        let k = path
            .iter()
            .position(|p| p.1 < 0.5)
            .expect("profile crosses 1/2");
        let (a, b) = (path[k - 1], path[k]);
        let z_half = a.0 + (a.1 - 0.5) / (a.1 - b.1) * (b.0 - a.0);
        Shooting {
            c,
            z: path.iter().map(|p| p.0 - z_half).collect(),
            u: path.iter().map(|p| p.1).collect(),
        }
    }

    pub fn cubic(a: f64) -> Shooting {
        Shooting::bistable(|u| u * (1.0 - u) * (u - a), -(1.0 - a))
    }

    /// Linear interpolation, constant beyond the computed range.
    pub fn eval(&self, z: f64) -> f64 {
        if z <= self.z[0] {
            return self.u[0];
        }
        let k = self.z.partition_point(|&s| s < z);
        if k >= self.z.len() {
            return *self.u.last().unwrap();
        }
        let w = (z - self.z[k - 1]) / (self.z[k] - self.z[k - 1]);
        self.u[k - 1] + w * (self.u[k] - self.u[k - 1])
    }
}

enum Outcome {
    Overshoot,
    TurnedBack,
}

fn shoot(
    f: &impl Fn(f64) -> f64,
    df1: f64,
    c: f64,
    mut path: Option<&mut Vec<(f64, f64)>>,
) -> Outcome {
    let mu = 0.5 * (-c + (c * c - 4.0 * df1).sqrt());
    let delta = 1e-7;
    let mut y = [1.0 - delta, -delta * mu];
    let rhs = |y: [f64; 2]| [y[1], -c * y[1] - f(y[0])];
    let h = 2e-3;
    let mut z = 0.0;
    for _ in 0..200_000 {
        if let Some(p) = path.as_deref_mut() {
            p.push((z, y[0]));
        }
        let k1 = rhs(y);
        let k2 = rhs([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        z += h;
        if y[0] < 0.0 {
            return Outcome::Overshoot;
        }
        if y[1] > 0.0 {
            return Outcome::TurnedBack;
        }
    }
    Outcome::TurnedBack
}

/// Largest eigenvalue of the periodic three-point operator
/// `(u_{i+1} - 2 u_i + u_{i-1}) / dx^2 + V(x_i) u_i`, by dense symmetric
/// eigendecomposition.
pub fn dense_top_eigenvalue(potential: impl Fn(f64) -> f64, ppp: usize) -> f64 {
    let dx = 1.0 / ppp as f64;
    let k = 1.0 / (dx * dx);
    let mut m = DMatrix::<f64>::zeros(ppp, ppp);
    for i in 0..ppp {
        m[(i, i)] = -2.0 * k + potential(i as f64 * dx);
        m[(i, (i + 1) % ppp)] += k;
        m[(i, (i + ppp - 1) % ppp)] += k;
    }
    SymmetricEigen::new(m)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Unit vector with rational coordinates `((m^2 - n^2), 2mn) / (m^2 + n^2)`,
/// randomly reflected and swapped.
pub fn pythagorean_direction(rng: &mut ChaCha8Rng) -> [BigRational; 2] {
    let m: i64 = rng.gen_range(2..12);
    let n: i64 = rng.gen_range(1..m);
    let h = m * m + n * n;
    let mut v = [m * m - n * n, 2 * m * n];
    if rng.gen_bool(0.5) {
        v.swap(0, 1);
    }
    if rng.gen_bool(0.5) {
        v[0] = -v[0];
    }
    if rng.gen_bool(0.5) {
        v[1] = -v[1];
    }
    [ratio(v[0], h), ratio(v[1], h)]
}

/// Wulff shape of random positive rational speeds on the four axis
/// directions and a few Pythagorean ones; `{0}` with probability 1/4.
pub fn random_upsilon(rng: &mut ChaCha8Rng) -> ShapePolygon<BigRational> {
    if rng.gen_bool(0.25) {
        return ShapePolygon::origin();
    }
    let one = ratio(1, 1);
    let zero = ratio(0, 1);
    let mut dirs = vec![
        [one.clone(), zero.clone()],
        [zero.clone(), one.clone()],
        [-one.clone(), zero.clone()],
        [zero.clone(), -one.clone()],
    ];
    for _ in 0..rng.gen_range(1..6) {
        dirs.push(pythagorean_direction(rng));
    }
    let field = SpeedField::synthetic(
        dirs.into_iter()
            .map(|d| (d, ratio(rng.gen_range(1..40), 8))),
    );
    wulff_shape(&field).expect("positive speeds")
}

/// `n` equally spaced directions with speeds uniform in `[lo, hi]`.
pub fn random_field(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> SpeedField<f64> {
    let mut field = SpeedField::from_fn(n, |_| 1.0);
    for s in &mut field.samples {
        s.speed = rng.gen_range(lo..hi);
    }
    field
}
