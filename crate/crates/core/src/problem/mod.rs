//! Equation data: a cell-periodic diagonal diffusion matrix and a reaction
//! term that is polynomial in `u` with cosine modulation in `x`.
//!
//! The period is one along every axis. [`CellTable`] holds the same data
//! sampled on one periodic cell of a uniform grid, which is what the solvers
//! consume.

pub mod config;
mod poly;

use serde::Serialize;

pub use config::{
    BaseReaction, Config, DiffusionConfig, GridConfig, Modulation, ReactionConfig, RunConfig,
    Tolerances, TrigSeries, TrigTerm,
};
pub use poly::Poly;

use crate::error::{Error, Result};

/// A point of the plane; one-dimensional problems ignore the second entry.
pub type Point = [f64; 2];

/// Compiled reaction term `f(x, u) = scale * (base(u) + sum_m kappa_m cos(2 pi m.x) g_m(u))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    base: Poly,
    modulation: Vec<(TrigTerm, Poly)>,
}

impl Reaction {
    pub fn from_config(cfg: &ReactionConfig) -> Result<Self> {
        let base = match &cfg.base {
            BaseReaction::Cubic { a } => Poly::from_roots(&[0.0, *a, 1.0], -1.0),
            BaseReaction::Quintic { a1, a2, a3 } => {
                Poly::from_roots(&[0.0, *a1, *a2, *a3, 1.0], -1.0)
            }
            BaseReaction::Roots { roots } => {
                if roots.is_empty() {
                    return Err(Error::Config("reaction roots are empty".into()));
                }
                Poly::from_roots(roots, -1.0)
            }
            BaseReaction::Coefficients { coefficients } => Poly(coefficients.clone()),
        };
        if !cfg.scale.is_finite() || cfg.scale <= 0.0 {
            return Err(Error::Config(format!(
                "reaction scale must be positive, got {}",
                cfg.scale
            )));
        }
        let modulation = cfg
            .modulation
            .iter()
            .map(|m| {
                (
                    TrigTerm {
                        amplitude: m.amplitude * cfg.scale,
                        wave: m.wave,
                    },
                    Poly(m.g.clone()),
                )
            })
            .collect();
        Ok(Self {
            base: base.scaled(cfg.scale),
            modulation,
        })
    }

    pub fn is_homogeneous(&self) -> bool {
        self.modulation.iter().all(|(t, _)| t.amplitude == 0.0)
    }

    /// The reaction frozen at `x`, as a polynomial in `u`.
    pub fn at(&self, x: Point) -> Poly {
        self.modulation
            .iter()
            .fold(self.base.clone(), |acc, (term, g)| {
                acc.add(&g.scaled(term.amplitude * term.phase(x).cos()))
            })
    }

    pub fn eval(&self, x: Point, u: f64) -> (f64, f64) {
        let (mut f, mut df) = self.base.eval_with_derivative(u);
        for (term, g) in &self.modulation {
            let w = term.amplitude * term.phase(x).cos();
            let (gv, gd) = g.eval_with_derivative(u);
            f += w * gv;
            df += w * gd;
        }
        (f, df)
    }
}

/// Spatially periodic reaction-diffusion problem `u_t = div(A(x) grad u) + f(x, u)`.
#[derive(Clone, Debug)]
pub struct PeriodicProblem {
    dimension: usize,
    diffusion: [TrigSeries; 2],
    reaction: Reaction,
    ellipticity: (f64, f64),
}

impl PeriodicProblem {
    /// Validates the problem on a probe grid with `points_per_period` nodes per axis.
    pub fn new(cfg: &config::ProblemConfig, points_per_period: usize) -> Result<Self> {
        if !(1..=2).contains(&cfg.dimension) {
            return Err(Error::Dimension(cfg.dimension));
        }
        if points_per_period < 3 {
            return Err(Error::Config("points_per_period must be at least 3".into()));
        }
        let mut diffusion = [cfg.diffusion.a11.clone(), cfg.diffusion.a22.clone()];
        if cfg.dimension == 1 {
            diffusion[1] = TrigSeries::one();
            let bad = diffusion[0].terms.iter().any(|t| t.wave[1] != 0)
                || cfg.reaction.modulation.iter().any(|m| m.wave[1] != 0);
            if bad {
                return Err(Error::Config(
                    "one-dimensional problem with a wave in x2".into(),
                ));
            }
        }
        let reaction = Reaction::from_config(&cfg.reaction)?;
        let mut problem = Self {
            dimension: cfg.dimension,
            diffusion,
            reaction,
            ellipticity: (0.0, 0.0),
        };
        problem.ellipticity = problem.probe_ellipticity(points_per_period)?;
        Ok(problem)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    /// Ellipticity bounds `(C1, C2)` found on the probe grid.
    pub fn ellipticity(&self) -> (f64, f64) {
        self.ellipticity
    }

    pub fn is_homogeneous(&self) -> bool {
        self.reaction.is_homogeneous()
            && self.diffusion[..self.dimension]
                .iter()
                .all(|d| d.terms.iter().all(|t| t.amplitude == 0.0))
    }

    /// Diagonal entry `A_aa(x)`.
    pub fn diffusion(&self, axis: usize, x: Point) -> f64 {
        self.diffusion[axis].eval(x)
    }

    /// `(f(x, u), d_u f(x, u))`, differentiated exactly.
    pub fn sample_reaction(&self, x: Point, u: f64) -> (f64, f64) {
        self.reaction.eval(x, u)
    }

    /// Samples nodes and flux midpoints of one cell.
    fn probe_ellipticity(&self, ppp: usize) -> Result<(f64, f64)> {
        let n = 2 * ppp;
        let h = 1.0 / n as f64;
        let ny = if self.dimension == 2 { n } else { 1 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for j in 0..ny {
            for i in 0..n {
                let x = [i as f64 * h, j as f64 * h];
                for axis in 0..self.dimension {
                    let a = self.diffusion(axis, x);
                    if a <= 0.0 {
                        return Err(Error::NonElliptic {
                            min_eig: a,
                            x: x[0],
                            y: x[1],
                        });
                    }
                    lo = lo.min(a);
                    hi = hi.max(a);
                }
            }
        }
        Ok((lo, hi))
    }
}

/// Parses a configuration and returns the validated problem.
pub fn load_problem(config_text: &str) -> Result<PeriodicProblem> {
    let cfg = Config::from_toml(config_text)?;
    PeriodicProblem::new(&cfg.problem, cfg.grid.points_per_period)
}

/// Uniform grid with an integer number of nodes per unit period.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub dimension: usize,
    pub points_per_period: usize,
    pub extent_periods: usize,
}

impl Grid {
    pub fn new(dimension: usize, points_per_period: usize, extent_periods: usize) -> Self {
        Self {
            dimension,
            points_per_period,
            extent_periods,
        }
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.points_per_period as f64
    }

    /// Number of nodes in one periodic cell.
    pub fn cell_len(&self) -> usize {
        self.points_per_period.pow(self.dimension as u32)
    }

    /// Phase index of a global node.
    #[inline]
    pub fn phase(&self, node: [i64; 2]) -> usize {
        let p = self.points_per_period as i64;
        let i = node[0].rem_euclid(p) as usize;
        if self.dimension == 1 {
            i
        } else {
            i + self.points_per_period * node[1].rem_euclid(p) as usize
        }
    }

    /// Physical coordinates of a global node.
    #[inline]
    pub fn point(&self, node: [i64; 2]) -> Point {
        let dx = self.dx();
        if self.dimension == 1 {
            [node[0] as f64 * dx, 0.0]
        } else {
            [node[0] as f64 * dx, node[1] as f64 * dx]
        }
    }

    /// Phase with the two axes exchanged (identity in one dimension).
    pub fn transpose_phase(&self, phase: usize) -> usize {
        if self.dimension == 1 {
            return phase;
        }
        let p = self.points_per_period;
        (phase / p) + p * (phase % p)
    }

    /// Cell field with the two axes exchanged.
    pub fn transpose_cell(&self, values: &[f64]) -> Vec<f64> {
        (0..values.len())
            .map(|i| values[self.transpose_phase(i)])
            .collect()
    }

    /// Global node of a phase index inside the reference cell.
    pub fn phase_node(&self, phase: usize) -> [i64; 2] {
        let p = self.points_per_period;
        [(phase % p) as i64, (phase / p) as i64]
    }
}

/// Problem data sampled on one periodic cell.
///
/// `reaction[phase]` is the local polynomial in `u`; `coupling[axis][phase]`
/// is `A_aa` at the flux midpoint between the node and its successor along
/// `axis`, divided by `dx^2`.
#[derive(Clone, Debug)]
pub struct CellTable {
    pub grid: Grid,
    pub reaction: Vec<Poly>,
    pub reaction_slope: Vec<Poly>,
    pub coupling: [Vec<f64>; 2],
}

impl CellTable {
    pub fn new(problem: &PeriodicProblem, grid: Grid) -> Self {
        assert_eq!(problem.dimension(), grid.dimension);
        let dx = grid.dx();
        let n = grid.cell_len();
        let mut reaction = Vec::with_capacity(n);
        let mut coupling = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for phase in 0..n {
            let node = grid.phase_node(phase);
            let x = grid.point(node);
            reaction.push(problem.reaction().at(x));
            for (axis, c) in coupling.iter_mut().enumerate().take(grid.dimension) {
                let mut mid = x;
                mid[axis] += 0.5 * dx;
                c.push(problem.diffusion(axis, mid) / (dx * dx));
            }
        }
        let reaction_slope = reaction.iter().map(Poly::derivative).collect();
        Self {
            grid,
            reaction,
            reaction_slope,
            coupling,
        }
    }

    /// Table of the reflected problem `v -> -f(x, p(x) - v)` about a cell field `p`.
    pub fn reflected(&self, pivot: &[f64]) -> Self {
        assert_eq!(pivot.len(), self.reaction.len());
        let reaction: Vec<Poly> = self
            .reaction
            .iter()
            .zip(pivot)
            .map(|(f, &p)| f.compose_affine(p, -1.0).scaled(-1.0))
            .collect();
        let reaction_slope = reaction.iter().map(Poly::derivative).collect();
        Self {
            grid: self.grid,
            reaction,
            reaction_slope,
            coupling: self.coupling.clone(),
        }
    }

    /// Copy with `shift` added to every reaction polynomial's linear coefficient.
    pub fn with_linear_shift(&self, shift: f64) -> Self {
        let reaction: Vec<Poly> = self
            .reaction
            .iter()
            .map(|f| f.add(&Poly(vec![0.0, shift])))
            .collect();
        let reaction_slope = reaction.iter().map(Poly::derivative).collect();
        Self {
            grid: self.grid,
            reaction,
            reaction_slope,
            coupling: self.coupling.clone(),
        }
    }

    #[inline]
    pub fn f(&self, phase: usize, u: f64) -> f64 {
        self.reaction[phase].eval(u)
    }

    #[inline]
    pub fn df(&self, phase: usize, u: f64) -> f64 {
        self.reaction_slope[phase].eval(u)
    }

    /// Largest `|d_u f|` over the cell for `u` in `[lo, hi]`.
    pub fn lipschitz(&self, lo: f64, hi: f64) -> f64 {
        let samples = 400;
        let mut best: f64 = 0.0;
        for slope in &self.reaction_slope {
            for k in 0..=samples {
                let u = lo + (hi - lo) * k as f64 / samples as f64;
                best = best.max(slope.eval(u).abs());
            }
        }
        best
    }

    /// Largest coupling coefficient, i.e. `C2 / dx^2` on the grid.
    pub fn max_coupling(&self) -> f64 {
        self.coupling
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Table of the problem with the two axes exchanged.
    pub fn transposed(&self) -> Self {
        let grid = self.grid;
        let perm: Vec<usize> = (0..grid.cell_len())
            .map(|i| grid.transpose_phase(i))
            .collect();
        let pick = |v: &[f64]| -> Vec<f64> { perm.iter().map(|&j| v[j]).collect() };
        Self {
            grid,
            reaction: perm.iter().map(|&j| self.reaction[j].clone()).collect(),
            reaction_slope: perm
                .iter()
                .map(|&j| self.reaction_slope[j].clone())
                .collect(),
            coupling: [pick(&self.coupling[1]), pick(&self.coupling[0])],
        }
    }

    /// `int_lo^hi f(x, u) du` averaged over the cell.
    pub fn mean_integral(&self, lo: f64, hi: f64) -> f64 {
        let total: f64 = self
            .reaction
            .iter()
            .map(|f| {
                let g = f.integral();
                g.eval(hi) - g.eval(lo)
            })
            .sum();
        total / self.reaction.len() as f64
    }
}

/// Fixed time step from the configured policy.
pub fn time_step(table: &CellTable, run: &RunConfig, u_range: (f64, f64)) -> f64 {
    let span = (u_range.1 - u_range.0).abs().max(1e-3);
    let lip = table.lipschitz(u_range.0 - 0.1 * span, u_range.1 + 0.1 * span);
    let dx = table.grid.dx();
    let c2 = table.max_coupling() * dx * dx;
    let mut dt = run.dt_max;
    if c2 > 0.0 {
        dt = dt.min(run.cfl_safety * dx * dx / c2);
    }
    if lip > 0.0 {
        dt = dt.min(run.reaction_limit / lip);
    }
    dt
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(a: f64) -> PeriodicProblem {
        let cfg = Config::from_toml(&format!(
            "[problem]\ndimension = 1\n[problem.reaction]\nbase = {{ kind = \"cubic\", a = {a} }}"
        ))
        .unwrap();
        PeriodicProblem::new(&cfg.problem, 20).unwrap()
    }

    #[test]
    fn identity_diffusion_has_unit_bounds() {
        let p = cubic(0.3);
        assert_eq!(p.ellipticity(), (1.0, 1.0));
        assert!(p.is_homogeneous());
    }

    #[test]
    fn cosine_diffusion_bounds_on_grid() {
        let p = load_problem(
            r#"
            [problem]
            dimension = 1
            [problem.diffusion]
            a11 = { constant = 1.0, terms = [{ amplitude = 0.5, wave = [1, 0] }] }
            [problem.reaction]
            base = { kind = "cubic", a = 0.3 }
            "#,
        )
        .unwrap();
        let (c1, c2) = p.ellipticity();
        assert!(
            (c1 - 0.5).abs() < 1e-12 && (c2 - 1.5).abs() < 1e-12,
            "{c1} {c2}"
        );
    }

    #[test]
    fn sign_changing_diffusion_is_rejected() {
        let err = load_problem(
            r#"
            [problem]
            dimension = 1
            [problem.diffusion]
            a11 = { constant = 0.0, terms = [{ amplitude = 1.0, wave = [1, 0] }] }
            [problem.reaction]
            base = { kind = "cubic", a = 0.3 }
            "#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonElliptic { .. }));
    }

    #[test]
    fn dimension_is_checked() {
        let err = load_problem(
            "[problem]\ndimension = 3\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(3)));
    }

    #[test]
    fn cubic_derivative_at_zero_is_minus_a() {
        let p = cubic(0.3);
        let (f, df) = p.sample_reaction([0.2, 0.0], 0.0);
        assert_eq!(f, 0.0);
        assert!((df + 0.3).abs() < 1e-15);
        let (f, _) = cubic(0.5).sample_reaction([0.0, 0.0], 0.5);
        assert!(f.abs() < 1e-15);
    }

    #[test]
    fn quintic_slopes_at_roots() {
        let cfg = Config::from_toml(
            "[problem]\ndimension = 1\n[problem.reaction]\nbase = { kind = \"quintic\", a1 = 0.2, a2 = 0.5, a3 = 0.8 }",
        )
        .unwrap();
        let p = PeriodicProblem::new(&cfg.problem, 10).unwrap();
        let expected = [
            (0.0, -0.08),
            (0.2, 0.0288),
            (0.5, -0.0225),
            (0.8, 0.0288),
            (1.0, -0.08),
        ];
        for (u, slope) in expected {
            let (f, df) = p.sample_reaction([0.0, 0.0], u);
            assert!(f.abs() < 1e-15);
            assert!((df - slope).abs() < 1e-12, "{u}: {df}");
        }
    }

    #[test]
    fn reflected_table_is_an_involution_about_constant_pivot() {
        let p = cubic(0.3);
        let grid = Grid::new(1, 10, 4);
        let table = CellTable::new(&p, grid);
        let pivot = vec![1.0; 10];
        let twice = table.reflected(&pivot).reflected(&pivot);
        for u in [0.1, 0.4, 0.8] {
            assert!((twice.f(3, u) - table.f(3, u)).abs() < 1e-14);
        }
        // reflected cubic about 1: -f(1 - v) has the roots 0, 0.7, 1
        let r = table.reflected(&pivot);
        assert!(r.f(0, 0.7).abs() < 1e-14);
        assert!(r.df(0, 0.0) < 0.0);
    }
}
