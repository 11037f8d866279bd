//! Periodic steady states, principal eigenpairs and the stable-state lattice.
//!
//! Everything here works on one periodic cell, where the discrete operator is
//! small enough to assemble densely.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolve::{Domain, Evolver, Field};
use crate::problem::{time_step, CellTable, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    Stable,
    Unstable,
    Marginal,
}

pub fn classify_stability(lambda: f64, tol_marginal: f64) -> Stability {
    if lambda < -tol_marginal {
        Stability::Stable
    } else if lambda > tol_marginal {
        Stability::Unstable
    } else {
        Stability::Marginal
    }
}

/// A periodic steady state on one cell, indexed by phase.
#[derive(Clone, Debug, Serialize)]
pub struct SteadyState {
    pub id: String,
    pub values: Vec<f64>,
    pub eigenvalue: f64,
    /// Positive, normalised to max 1.
    pub eigenfunction: Vec<f64>,
    pub stability: Stability,
    pub residual: f64,
    /// Newton landed far from the guess.
    pub out_of_range: bool,
}

impl SteadyState {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn distance(&self, other: &SteadyState) -> f64 {
        max_diff(&self.values, &other.values)
    }

    /// `self >= other` pointwise.
    pub fn dominates(&self, other: &SteadyState) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a >= b)
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

/// Dense periodic `div(A grad .)` on one cell.
pub fn cell_operator(table: &CellTable) -> DMatrix<f64> {
    let grid = table.grid;
    let n = grid.cell_len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let node = grid.phase_node(i);
        for axis in 0..grid.dimension {
            let mut next = node;
            next[axis] += 1;
            let j = grid.phase(next);
            let c = table.coupling[axis][i];
            m[(i, i)] -= c;
            m[(j, j)] -= c;
            m[(i, j)] += c;
            m[(j, i)] += c;
        }
    }
    m
}

/// `L u + f(x, u)` on the cell.
pub fn cell_residual(table: &CellTable, op: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    let v = DVector::from_column_slice(u);
    let lu = op * v;
    lu.iter()
        .enumerate()
        .map(|(i, l)| l + table.f(i, u[i]))
        .collect()
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

/// Damped Newton for the periodic steady problem, returning values and residual.
pub fn newton(
    table: &CellTable,
    op: &DMatrix<f64>,
    guess: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut u = guess.to_vec();
    let mut r = cell_residual(table, op, &u);
    let mut norm = sup_norm(&r);
    for _ in 0..max_iters {
        if norm <= tol {
            return Ok((u, norm));
        }
        let mut jac = op.clone();
        for (i, &ui) in u.iter().enumerate() {
            jac[(i, i)] += table.df(i, ui);
        }
        let rhs = -DVector::from_vec(r.clone());
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearSolve("singular Jacobian in Newton step".into()))?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = u
                .iter()
                .zip(step.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            let tr = cell_residual(table, op, &trial);
            let tn = sup_norm(&tr);
            if tn.is_finite() && (tn < norm || alpha < 1.0 / 1024.0) {
                u = trial;
                r = tr;
                norm = tn;
                break;
            }
            alpha *= 0.5;
        }
    }
    if norm <= tol {
        Ok((u, norm))
    } else {
        Err(Error::NewtonDiverged {
            iters: max_iters,
            residual: norm,
        })
    }
}

/// Largest eigenvalue of `L + diag(d_u f(x, p))` with its positive
/// eigenfunction, by shifted inverse iteration.
pub fn principal_eigenpair(table: &CellTable, p: &[f64]) -> Result<(f64, Vec<f64>)> {
    let mut jac = cell_operator(table);
    for (i, &pi) in p.iter().enumerate() {
        jac[(i, i)] += table.df(i, pi);
    }
    principal_eigenpair_of(&jac)
}

/// Shifted inverse iteration on a symmetric matrix whose top eigenvector is positive.
pub fn principal_eigenpair_of(jac: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
    let n = jac.nrows();
    let gershgorin = (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| jac[(i, j)].abs()).sum();
            jac[(i, i)] + off
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = jac.amax().max(1.0);
    let mut shift = gershgorin + 1.0;
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = f64::NAN;
    let mut refined = false;
    let mut residual = f64::INFINITY;
    for _ in 0..20 {
        let mut shifted = -jac.clone();
        for i in 0..n {
            shifted[(i, i)] += shift;
        }
        let lu = shifted.lu();
        for _ in 0..500 {
            let w = lu
                .solve(&v)
                .ok_or_else(|| Error::LinearSolve("singular shifted operator".into()))?;
            v = &w / w.norm();
            let jv = jac * &v;
            let rq = v.dot(&jv);
            residual = (&jv - &v * rq).amax();
            let prev = lambda;
            lambda = rq;
            if residual <= 1e-12 * scale {
                break;
            }
            if !refined && (prev - lambda).abs() <= 1e-6 * lambda.abs().max(1.0) {
                break;
            }
        }
        if residual <= 1e-12 * scale {
            break;
        }
        // Move the shift close to the converged Rayleigh quotient for fast
        // convergence; it stays above the top eigenvalue.
        shift = lambda + 1e-2 * lambda.abs().max(1.0);
        refined = true;
    }
    if residual > 1e-9 * scale {
        return Err(Error::EigenNotConverged { residual });
    }
    if v.sum() < 0.0 {
        v = -v;
    }
    let max = v.max();
    let phi: Vec<f64> = v.iter().map(|x| x / max).collect();
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::EigenSignChange { min });
    }
    Ok((lambda, phi))
}

/// Newton from `guess` followed by the principal eigenpair.
pub fn find_steady_state(
    table: &CellTable,
    guess: &[f64],
    steady_tol: f64,
    tol_marginal: f64,
) -> Result<SteadyState> {
    let op = cell_operator(table);
    let (values, residual) = newton(table, &op, guess, steady_tol, 60)?;
    let lo = guess.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = guess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let margin = 0.25;
    let out_of_range = values.iter().any(|&v| v < lo - margin || v > hi + margin);
    let (eigenvalue, eigenfunction) = principal_eigenpair(table, &values)?;
    Ok(SteadyState {
        id: String::new(),
        values,
        eigenvalue,
        eigenfunction,
        stability: classify_stability(eigenvalue, tol_marginal),
        residual,
        out_of_range,
    })
}

/// Stable states between 0 and the top state, plus everything else found.
#[derive(Clone, Debug, Serialize)]
pub struct StateLattice {
    /// Descending by mean: `p0` is the top state, the last one is 0.
    pub stable: Vec<SteadyState>,
    pub unstable: Vec<SteadyState>,
    pub marginal: Vec<SteadyState>,
    pub totally_ordered: bool,
    pub intersecting: Vec<(String, String)>,
    /// Probes whose relaxation and polish both failed.
    pub skipped_probes: Vec<f64>,
}

impl StateLattice {
    pub fn top(&self) -> &SteadyState {
        &self.stable[0]
    }

    pub fn zero(&self) -> &SteadyState {
        self.stable.last().expect("lattice has states")
    }

    pub fn get(&self, id: &str) -> Option<&SteadyState> {
        self.stable
            .iter()
            .chain(&self.unstable)
            .chain(&self.marginal)
            .find(|s| s.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.stable.iter().position(|s| s.id == id)
    }

    /// Stable state closest to `values` within `tol` in max norm.
    pub fn match_stable(&self, values: &[f64], tol: f64) -> Option<usize> {
        self.stable
            .iter()
            .enumerate()
            .map(|(i, s)| (i, max_diff(&s.values, values)))
            .filter(|(_, d)| *d <= tol)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Aborts when a marginal state makes the stability dichotomy fail.
    pub fn require_no_marginal(&self) -> Result<()> {
        match self.marginal.first() {
            Some(s) => Err(Error::MarginalState {
                id: s.id.clone(),
                lambda: s.eigenvalue,
            }),
            None => Ok(()),
        }
    }
}

/// Relaxes a cell field under the flow until its residual drops below `tol`.
fn relax(table: &CellTable, run: &RunConfig, start: f64, tol: f64) -> Vec<f64> {
    let dt = time_step(table, run, (0.0, 1.0_f64.max(start)));
    let ev = Evolver::new(table, Domain::Periodic { periods: [1, 1] }, dt);
    let mut field = Field::from_fn(&ev.mesh, |_| start);
    let mut scratch = Vec::new();
    let check_every = ((1.0 / dt).ceil() as usize).max(1);
    let steps = (run.relax_horizon / dt).ceil() as usize;
    for s in 1..=steps {
        ev.step(&mut field, &mut scratch);
        if s % check_every == 0 && sup_norm(&ev.residual(&field)) <= tol {
            break;
        }
    }
    let mut cell = vec![0.0; table.grid.cell_len()];
    for (i, v) in field.values.iter().enumerate() {
        cell[table.grid.phase(field.node(i))] = *v;
    }
    cell
}

/// Relaxes every constant probe, polishes with Newton, deduplicates and
/// classifies. Newton is also run straight from each probe so that unstable
/// states are found.
pub fn enumerate_stable_states(
    table: &CellTable,
    run: &RunConfig,
    probes: &[f64],
) -> Result<StateLattice> {
    let tol = &run.tolerances;
    let n = table.grid.cell_len();
    let mut found: Vec<SteadyState> = Vec::new();
    let mut skipped = Vec::new();
    let push = |s: SteadyState, found: &mut Vec<SteadyState>| {
        if !found.iter().any(|f| f.distance(&s) < tol.dedup_tol) {
            found.push(s);
        }
    };
    for &probe in probes {
        let relaxed = relax(table, run, probe, 1e-8);
        let polished = find_steady_state(table, &relaxed, tol.steady_tol, tol.tol_marginal);
        let direct = find_steady_state(table, &vec![probe; n], tol.steady_tol, tol.tol_marginal);
        if polished.is_err() && direct.is_err() {
            skipped.push(probe);
        }
        for s in [polished, direct].into_iter().flatten() {
            push(s, &mut found);
        }
    }
    // The extremal states are part of the hypotheses; make sure 0 is tried.
    if let Ok(s) = find_steady_state(table, &vec![0.0; n], tol.steady_tol, tol.tol_marginal) {
        push(s, &mut found);
    }
    found.sort_by(|a, b| b.mean().total_cmp(&a.mean()));
    let mut stable = Vec::new();
    let mut unstable = Vec::new();
    let mut marginal = Vec::new();
    for s in found {
        match s.stability {
            Stability::Stable => stable.push(s),
            Stability::Unstable => unstable.push(s),
            Stability::Marginal => marginal.push(s),
        }
    }
    if stable.is_empty() {
        return Err(Error::NoStableStates);
    }
    if sup_norm(&stable.last().unwrap().values) > tol.dedup_tol {
        return Err(Error::ZeroStateMissing);
    }
    for (k, s) in stable.iter_mut().enumerate() {
        s.id = format!("p{k}");
    }
    for (k, s) in unstable.iter_mut().enumerate() {
        s.id = format!("u{k}");
    }
    for (k, s) in marginal.iter_mut().enumerate() {
        s.id = format!("m{k}");
    }
    let mut intersecting = Vec::new();
    for i in 0..stable.len() {
        for j in i + 1..stable.len() {
            if !stable[i].dominates(&stable[j]) && !stable[j].dominates(&stable[i]) {
                intersecting.push((stable[i].id.clone(), stable[j].id.clone()));
            }
        }
    }
    Ok(StateLattice {
        totally_ordered: intersecting.is_empty(),
        stable,
        unstable,
        marginal,
        intersecting,
        skipped_probes: skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Config, Grid, PeriodicProblem};

    fn table(text: &str, ppp: usize) -> (CellTable, Config) {
        let cfg = Config::from_toml(text).unwrap();
        let p = PeriodicProblem::new(&cfg.problem, ppp).unwrap();
        (
            CellTable::new(&p, Grid::new(cfg.problem.dimension, ppp, 1)),
            cfg,
        )
    }

    const QUINTIC: &str = "[problem]\ndimension = 1\n[problem.reaction]\nbase = { kind = \"quintic\", a1 = 0.2, a2 = 0.5, a3 = 0.8 }";

    #[test]
    fn operator_is_symmetric_and_annihilates_constants() {
        let (t, _) = table(
            "[problem]\ndimension = 2\n[problem.diffusion]\na11 = { constant = 1.0, terms = [{ amplitude = 0.3, wave = [1, 1] }] }\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }",
            6,
        );
        let op = cell_operator(&t);
        assert!((&op - op.transpose()).amax() < 1e-12);
        let ones = DVector::from_element(36, 1.0);
        assert!((op * ones).amax() < 1e-10);
    }

    #[test]
    fn quintic_roots_from_nearby_guesses() {
        let (t, _) = table(QUINTIC, 10);
        let s = find_steady_state(&t, &[0.45; 10], 1e-10, 1e-4).unwrap();
        assert!(s.values.iter().all(|v| (v - 0.5).abs() < 1e-10));
        assert_eq!(s.stability, Stability::Stable);
        assert!((s.eigenvalue + 0.0225).abs() < 1e-10);
    }

    #[test]
    fn eigenvalue_shift_property() {
        let (t, _) = table(
            "[problem]\ndimension = 1\n[problem.diffusion]\na11 = { constant = 1.0, terms = [{ amplitude = 0.5, wave = [1, 0] }] }\n[problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }\nmodulation = [{ amplitude = 0.2, wave = [1, 0], g = [0.0, 1.0] }]",
            16,
        );
        let (l0, p0) = principal_eigenpair(&t, &[0.0; 16]).unwrap();
        let (l1, p1) = principal_eigenpair(&t.with_linear_shift(0.7), &[0.0; 16]).unwrap();
        assert!((l1 - l0 - 0.7).abs() < 1e-10);
        assert!(max_diff(&p0, &p1) < 1e-8);
    }

    #[test]
    fn quintic_lattice() {
        let (t, cfg) = table(QUINTIC, 8);
        let lattice = enumerate_stable_states(&t, &cfg.run, &cfg.run.probes).unwrap();
        let means: Vec<f64> = lattice.stable.iter().map(SteadyState::mean).collect();
        assert_eq!(means.len(), 3);
        for (m, e) in means.iter().zip([1.0, 0.5, 0.0]) {
            assert!((m - e).abs() < 1e-9);
        }
        let unstable: Vec<f64> = lattice.unstable.iter().map(SteadyState::mean).collect();
        assert_eq!(unstable.len(), 2);
        assert!((unstable[0] - 0.8).abs() < 1e-9 && (unstable[1] - 0.2).abs() < 1e-9);
        assert!(lattice.totally_ordered);
        assert_eq!(lattice.zero().id, "p2");
    }

    #[test]
    fn classification_dead_band() {
        assert_eq!(classify_stability(-0.3, 1e-4), Stability::Stable);
        assert_eq!(classify_stability(0.0, 1e-4), Stability::Marginal);
        assert_eq!(classify_stability(0.0288, 1e-4), Stability::Unstable);
    }
}
