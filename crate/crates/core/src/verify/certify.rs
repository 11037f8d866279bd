use serde::Serialize;

use crate::error::{Error, Result};
use crate::fronts::{FrontRecord, Profile};
use crate::problem::CellTable;
use crate::spectral::SteadyState;

/// Smooth nondecreasing cutoff, 0 for `z <= -1` and 1 for `z >= 1`.
pub fn chi(z: f64) -> f64 {
    let g = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let s = 0.5 * (z + 1.0);
    let (a, b) = (g(s), g(1.0 - s));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

/// Periodic `div(A grad u)` of a cell field.
fn cell_laplacian(table: &CellTable, u: &[f64]) -> Vec<f64> {
    let grid = table.grid;
    let mut out = vec![0.0; u.len()];
    for (i, o) in out.iter_mut().enumerate() {
        let node = grid.phase_node(i);
        for axis in 0..grid.dimension {
            let mut next = node;
            next[axis] += 1;
            let mut prev = node;
            prev[axis] -= 1;
            let (j, k) = (grid.phase(next), grid.phase(prev));
            *o += table.coupling[axis][i] * (u[j] - u[i]) + table.coupling[axis][k] * (u[k] - u[i]);
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationEval {
    pub delta: f64,
    pub eta: f64,
    pub sigma: f64,
    /// Smallest `R - delta eta exp(-sigma t)` over the cell and times.
    pub min_margin: f64,
    pub min_residual: f64,
    pub at_phase: usize,
    pub at_t: f64,
}

/// Residual `R = d_t u - div(A grad u) - f(x, u)` of `u = p + eta phi exp(-sigma t)`
/// on the cell at the given times, compared with `delta eta exp(-sigma t)`.
pub fn perturbation_residual_at(
    table: &CellTable,
    state: &SteadyState,
    eta: f64,
    sigma: f64,
    delta: f64,
    times: &[f64],
) -> PerturbationEval {
    let phi = &state.eigenfunction;
    let mut best = PerturbationEval {
        delta,
        eta,
        sigma,
        min_margin: f64::INFINITY,
        min_residual: f64::INFINITY,
        at_phase: 0,
        at_t: 0.0,
    };
    for &t in times {
        let decay = (-sigma * t).exp();
        let u: Vec<f64> = state
            .values
            .iter()
            .zip(phi)
            .map(|(p, f)| p + eta * f * decay)
            .collect();
        let lu = cell_laplacian(table, &u);
        for i in 0..u.len() {
            let dt = -sigma * eta * phi[i] * decay;
            let r = dt - lu[i] - table.f(i, u[i]);
            let margin = r - delta * eta * decay;
            if margin < best.min_margin {
                best.min_margin = margin;
                best.at_phase = i;
                best.at_t = t;
            }
            best.min_residual = best.min_residual.min(r);
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct PerturbationReport {
    pub state_id: String,
    pub eigenvalue: f64,
    /// Largest passing `delta`, with `eta = delta / 2` and `sigma = delta / 4`.
    pub accepted: Option<PerturbationEval>,
    /// Steady-state residual of `p`, the slack allowed on the margin.
    pub disc_err: f64,
    /// `min_margin + disc_err` of the accepted parameters.
    pub margin: f64,
    pub tried: Vec<PerturbationEval>,
    pub passed: bool,
}

/// Searches `delta` down a halving sequence from 0.1 to `delta_min` for the
/// largest value whose residual certificate holds on the time grid.
pub fn perturbation_residual(
    table: &CellTable,
    state: &SteadyState,
    times: &[f64],
    delta_min: f64,
) -> PerturbationReport {
    let disc_err = cell_laplacian(table, &state.values)
        .iter()
        .enumerate()
        .map(|(i, l)| (l + table.f(i, state.values[i])).abs())
        .fold(0.0, f64::max);
    let mut tried = Vec::new();
    let mut delta = 0.1;
    let mut accepted = None;
    while delta >= delta_min * (1.0 - 1e-12) {
        let ev = perturbation_residual_at(table, state, 0.5 * delta, 0.25 * delta, delta, times);
        let ok = ev.min_margin + disc_err > 0.0;
        tried.push(ev.clone());
        if ok {
            accepted = Some(ev);
            break;
        }
        delta *= 0.5;
    }
    let margin = accepted
        .as_ref()
        .map_or(f64::NEG_INFINITY, |a| a.min_margin + disc_err);
    PerturbationReport {
        state_id: state.id.clone(),
        eigenvalue: state.eigenvalue,
        passed: accepted.is_some(),
        accepted,
        disc_err,
        margin,
        tried,
    }
}

#[derive(Clone, Debug)]
pub struct GlueParams {
    /// Speed increments, increasing with the front index.
    pub eps: Vec<f64>,
    /// Eigenfunction weights, increasing with the front index.
    pub eta: Vec<f64>,
    /// Allowed negative residual.
    pub tol: f64,
    /// Half-width of the local quadratic smoothing applied to profiles; 0 disables it.
    pub smoothing: f64,
    /// Times at which the glued composite is checked.
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PieceResidual {
    pub front: usize,
    pub min_residual: f64,
    pub at_phase: usize,
    pub at_z: f64,
    /// Largest `|R|` of the bare profile (`eps = eta = 0`).
    pub profile_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SwitchCheck {
    /// Switch between pieces `front` and `front + 1`.
    pub front: usize,
    pub t: f64,
    /// Largest jump of the composite across the switch locus.
    pub jump: f64,
    /// The lower piece is the smaller one at the locus.
    pub ordered_at_locus: bool,
    /// The upper piece is smaller from the next locus on.
    pub ordered_beyond: bool,
    /// Value where the two pieces cross, if they do.
    pub crossing_value: Option<f64>,
    pub crossing_between_plateaus: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlueReport {
    pub pieces: Vec<PieceResidual>,
    pub switches: Vec<SwitchCheck>,
    pub min_residual: f64,
    pub passed: bool,
}

struct Piece<'a> {
    profile: &'a Profile,
    speed: f64,
    unit: [f64; 2],
    eta: f64,
    up: &'a [f64],
    lo: &'a [f64],
}

impl Piece<'_> {
    fn psi(&self, ph: usize, z: f64) -> f64 {
        let x = chi(z);
        (1.0 - x) * self.up[ph] + x * self.lo[ph]
    }

    /// `U(x, z) + eta psi` at a phase and moving coordinate.
    fn value(&self, ph: usize, z: f64) -> f64 {
        self.profile.eval(ph, z) + self.eta * self.psi(ph, z)
    }
}

/// Smallest residual of one piece over the profile window, in the moving
/// frame, with its location and the largest absolute residual.
fn piece_residual(table: &CellTable, piece: &Piece<'_>, smoothing: f64) -> (f64, usize, f64, f64) {
    let grid = table.grid;
    let p = piece.profile;
    let dx = grid.dx();
    let margin = dx + 2.0 * p.dz + smoothing;
    let mut worst = (f64::INFINITY, 0, 0.0, 0.0);
    for ph in 0..p.phases {
        let node = grid.phase_node(ph);
        for k in 0..p.bins {
            let z = p.z(k);
            if z.abs() > -p.z0 - margin || p.values[ph * p.bins + k].is_nan() {
                continue;
            }
            let u = piece.value(ph, z);
            let dz = (piece.value(ph, z + p.dz) - piece.value(ph, z - p.dz)) / (2.0 * p.dz);
            let mut lu = 0.0;
            for axis in 0..grid.dimension {
                let shift = dx * piece.unit[axis];
                let mut next = node;
                next[axis] += 1;
                let mut prev = node;
                prev[axis] -= 1;
                let (pn, pp) = (grid.phase(next), grid.phase(prev));
                lu += table.coupling[axis][ph] * (piece.value(pn, z + shift) - u)
                    + table.coupling[axis][pp] * (piece.value(pp, z - shift) - u);
            }
            let r = -piece.speed * dz - lu - table.f(ph, u);
            if r < worst.0 {
                (worst.0, worst.1, worst.2) = (r, ph, z);
            }
            worst.3 = f64::max(worst.3, r.abs());
        }
    }
    worst
}

/// Checks the perturbed profiles `U_k(x, x.e - (c_k + eps_k) t) + eta_k psi_k`
/// as supersolutions, and the continuity of their min-glued composite.
///
/// `platforms` lists the `K + 1` platform states of the `K` fronts.
pub fn glued_supersolution_residual(
    table: &CellTable,
    fronts: &[FrontRecord],
    platforms: &[&SteadyState],
    params: &GlueParams,
) -> Result<GlueReport> {
    let k_fronts = fronts.len();
    if platforms.len() != k_fronts + 1
        || params.eps.len() != k_fronts
        || params.eta.len() != k_fronts
    {
        return Err(Error::Config(
            "one eps, one eta per front and one more platform are required".into(),
        ));
    }
    let mut smoothed = Vec::with_capacity(k_fronts);
    let mut pieces = Vec::with_capacity(k_fronts);
    let mut reports = Vec::with_capacity(k_fronts);
    for (k, f) in fronts.iter().enumerate() {
        let raw = f
            .profile
            .as_ref()
            .ok_or_else(|| Error::Certificate(format!("front {k} has no profile")))?;
        smoothed.push(if params.smoothing > 0.0 {
            raw.smoothed(params.smoothing)
        } else {
            raw.clone()
        });
    }
    for (k, f) in fronts.iter().enumerate() {
        let profile = &smoothed[k];
        if f.speed.value == 0.0 {
            return Err(Error::ZeroSpeed(0.0));
        }
        let (up, lo) = (&platforms[k].eigenfunction, &platforms[k + 1].eigenfunction);
        let piece = Piece {
            profile,
            speed: f.speed.value + params.eps[k],
            unit: f.unit,
            eta: params.eta[k],
            up,
            lo,
        };
        let (r, ph, z, _) = piece_residual(table, &piece, params.smoothing);
        let bare = Piece {
            speed: f.speed.value,
            eta: 0.0,
            ..piece
        };
        let (_, _, _, profile_residual) = piece_residual(table, &bare, params.smoothing);
        reports.push(PieceResidual {
            front: k,
            min_residual: r,
            at_phase: ph,
            at_z: z,
            profile_residual,
        });
        pieces.push(piece);
    }
    let mut switches = Vec::new();
    for k in 0..k_fronts.saturating_sub(1) {
        let (a, b) = (&pieces[k], &pieces[k + 1]);
        let locus = 0.5 * (a.speed + b.speed);
        let next_locus = if k + 2 < k_fronts {
            Some(0.5 * (b.speed + pieces[k + 2].speed))
        } else {
            None
        };
        for &t in &params.times {
            let mut check = SwitchCheck {
                front: k,
                t,
                jump: 0.0,
                ordered_at_locus: true,
                ordered_beyond: true,
                crossing_value: None,
                crossing_between_plateaus: true,
            };
            let s0 = locus * t;
            let s1 = next_locus.map_or(b.speed * t + 2.0 * -b.profile.z0, |c| c * t);
            let step = a.profile.dz;
            for ph in 0..a.profile.phases {
                let va = a.value(ph, s0 - a.speed * t);
                let vb = b.value(ph, s0 - b.speed * t);
                let left = if k == 0 {
                    va
                } else {
                    let prev = &pieces[k - 1];
                    prev.value(ph, s0 - prev.speed * t).min(va)
                };
                check.jump = check.jump.max((left - va.min(vb)).abs());
                check.ordered_at_locus &= va < vb;
                let (wa, wb) = (a.value(ph, s1 - a.speed * t), b.value(ph, s1 - b.speed * t));
                check.ordered_beyond &= wa > wb;
                let mut s = s0;
                let mut prev_sign = va < vb;
                while s < s1 {
                    s += step;
                    let (xa, xb) = (a.value(ph, s - a.speed * t), b.value(ph, s - b.speed * t));
                    let sign = xa < xb;
                    if sign != prev_sign {
                        let v = xa.min(xb);
                        let top = platforms[k].values[ph];
                        let bottom = platforms[k + 2].values[ph];
                        check.crossing_between_plateaus &= v > bottom && v < top;
                        check.crossing_value =
                            Some(check.crossing_value.map_or(v, |c: f64| c.max(v)));
                        break;
                    }
                    prev_sign = sign;
                }
            }
            switches.push(check);
        }
    }
    let min_residual = reports
        .iter()
        .map(|r| r.min_residual)
        .fold(f64::INFINITY, f64::min);
    let passed = min_residual >= -params.tol
        && switches.iter().all(|s| {
            s.ordered_at_locus
                && s.ordered_beyond
                && s.crossing_between_plateaus
                && s.jump <= params.tol
        });
    Ok(GlueReport {
        pieces: reports,
        switches,
        min_residual,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_is_a_monotone_cutoff() {
        assert_eq!(chi(-1.0), 0.0);
        assert_eq!(chi(-3.0), 0.0);
        assert_eq!(chi(1.0), 1.0);
        assert!((chi(0.0) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for k in -200..=200 {
            let v = chi(k as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }
}
