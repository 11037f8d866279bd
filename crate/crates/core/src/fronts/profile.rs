use serde::Serialize;

use super::{Layout, SpeedEstimate};
use crate::error::{Error, Result};
use crate::evolve::Field;
use crate::problem::Grid;

/// Samples of `U(x, z)` on (cell phase) x (z bins).
#[derive(Clone, Debug, Serialize)]
pub struct Profile {
    /// Position along the direction of `z = 0` at `t = 0`; absolute
    /// coordinates are `x.e - c t = z + center`.
    pub center: f64,
    pub dz: f64,
    /// Centre of the first bin.
    pub z0: f64,
    pub bins: usize,
    pub phases: usize,
    /// `values[phase * bins + k]`; NaN where no sample fell.
    pub values: Vec<f64>,
    pub cell_mean: Vec<f64>,
    pub cell_min: Vec<f64>,
    pub cell_max: Vec<f64>,
    /// Largest increase of `U` in `z` at fixed phase.
    pub monotonicity_defect: f64,
    /// Largest deviation of samples from their bin's linear fit.
    pub periodicity_defect: f64,
    pub upper_limit_defect: f64,
    pub lower_limit_defect: f64,
    /// Largest excursion outside `[lower, upper]`.
    pub bounds_defect: f64,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
    /// Exponential decay rates towards `upper` and `lower` beyond the window.
    pub tail_rates: [f64; 2],
}

#[derive(Clone, Copy, Default)]
struct Acc {
    n: f64,
    z: f64,
    u: f64,
    zz: f64,
    zu: f64,
}

impl Acc {
    /// Local linear fit `(value at z, slope)`.
    fn fit(&self) -> (f64, f64, f64) {
        let zm = self.z / self.n;
        let um = self.u / self.n;
        let var = self.zz / self.n - zm * zm;
        let slope = if var > 1e-14 {
            (self.zu / self.n - zm * um) / var
        } else {
            0.0
        };
        (zm, um, slope)
    }
}

impl Profile {
    pub fn z(&self, k: usize) -> f64 {
        self.z0 + k as f64 * self.dz
    }

    fn at(&self, phase: usize, k: usize) -> f64 {
        self.values[phase * self.bins + k]
    }

    /// Linear interpolation in `z` at fixed phase between the nearest filled
    /// bins, continued by the exponential tails outside the window.
    pub fn eval(&self, phase: usize, z: f64) -> f64 {
        let last = self.z(self.bins - 1);
        if z < self.z0 {
            let q = self.upper[phase];
            return q
                + (self.eval(phase, self.z0) - q) * (-self.tail_rates[0] * (self.z0 - z)).exp();
        }
        if z > last {
            let q = self.lower[phase];
            return q + (self.eval(phase, last) - q) * (-self.tail_rates[1] * (z - last)).exp();
        }
        let pos = ((z - self.z0) / self.dz).clamp(0.0, (self.bins - 1) as f64);
        let k = pos.floor() as usize;
        let left = (0..=k).rev().find(|&j| !self.at(phase, j).is_nan());
        let right = (k + 1..self.bins).find(|&j| !self.at(phase, j).is_nan());
        match (left, right) {
            (Some(a), Some(b)) => {
                let w = (pos - a as f64) / (b - a) as f64;
                let (ua, ub) = (self.at(phase, a), self.at(phase, b));
                ua + w * (ub - ua)
            }
            (Some(a), None) => self.at(phase, a),
            (None, Some(b)) => self.at(phase, b),
            (None, None) => f64::NAN,
        }
    }

    /// Local quadratic regression in `z` at fixed phase over windows of
    /// half-width `h`, evaluated at every bin centre.
    pub fn smoothed(&self, h: f64) -> Profile {
        let mut out = self.clone();
        let reach = (h / self.dz).ceil() as usize;
        for phase in 0..self.phases {
            for k in 0..self.bins {
                let lo = k.saturating_sub(reach);
                let hi = (k + reach).min(self.bins - 1);
                let mut m = [[0.0; 3]; 3];
                let mut r = [0.0; 3];
                let mut n = 0;
                for j in lo..=hi {
                    let v = self.at(phase, j);
                    if v.is_nan() {
                        continue;
                    }
                    let d = (j as f64 - k as f64) * self.dz / h;
                    let w = (1.0 - d * d).max(0.0).powi(2);
                    let b = [1.0, d, d * d];
                    for a in 0..3 {
                        r[a] += w * b[a] * v;
                        for c in 0..3 {
                            m[a][c] += w * b[a] * b[c];
                        }
                    }
                    n += 1;
                }
                out.values[phase * self.bins + k] = if n >= 4 {
                    nalgebra::Matrix3::from_fn(|a, c| m[a][c])
                        .lu()
                        .solve(&nalgebra::Vector3::from_column_slice(&r))
                        .map_or(f64::NAN, |s| s[0])
                } else {
                    f64::NAN
                };
            }
        }
        out
    }

    /// Log-linear fit of the phase-averaged distance to each limit over the
    /// outer `width` of the window.
    fn fit_tails(&mut self, width: f64) {
        let mean_gap = |k: usize, limit: &[f64]| {
            let (mut s, mut n) = (0.0, 0);
            for ph in 0..self.phases {
                let v = self.at(ph, k);
                if !v.is_nan() {
                    s += (v - limit[ph]).abs();
                    n += 1;
                }
            }
            (n > 0).then(|| s / n as f64)
        };
        let span = ((width / self.dz) as usize).min(self.bins / 2);
        let rate = |ks: Vec<usize>, limit: &[f64], sign: f64| {
            let pts: Vec<(f64, f64)> = ks
                .into_iter()
                .filter_map(|k| {
                    mean_gap(k, limit)
                        .filter(|g| *g > 1e-13)
                        .map(|g| (sign * self.z(k), g.ln()))
                })
                .collect();
            if pts.len() < 4 {
                return 0.0;
            }
            let n = pts.len() as f64;
            let zm = pts.iter().map(|p| p.0).sum::<f64>() / n;
            let lm = pts.iter().map(|p| p.1).sum::<f64>() / n;
            let szz: f64 = pts.iter().map(|p| (p.0 - zm).powi(2)).sum();
            let szl: f64 = pts.iter().map(|p| (p.0 - zm) * (p.1 - lm)).sum();
            (-szl / szz).max(0.0)
        };
        let upper = self.upper.clone();
        let lower = self.lower.clone();
        self.tail_rates = [
            rate((0..span).collect(), &upper, -1.0),
            rate((self.bins - span..self.bins).collect(), &lower, 1.0),
        ];
    }

    /// Re-indexes phases after a run in exchanged axes.
    pub(crate) fn transpose_phases(&mut self, grid: &Grid) {
        let mut values = vec![f64::NAN; self.values.len()];
        for phase in 0..self.phases {
            let from = grid.transpose_phase(phase);
            values[phase * self.bins..(phase + 1) * self.bins]
                .copy_from_slice(&self.values[from * self.bins..(from + 1) * self.bins]);
        }
        self.values = values;
        self.upper = grid.transpose_cell(&self.upper);
        self.lower = grid.transpose_cell(&self.lower);
    }
}

/// Resamples snapshots at `z = x.e - (c t + b)` over `|z| <= halfwidth`.
pub fn extract_profile(
    layout: &Layout,
    snapshots: &[Field],
    speed: &SpeedEstimate,
    halfwidth: f64,
    zero_speed_tol: f64,
) -> Result<Profile> {
    if speed.value.abs() < zero_speed_tol {
        return Err(Error::ZeroSpeed(speed.value));
    }
    if snapshots.len() < 2 {
        return Err(Error::ShortWindow(snapshots.len()));
    }
    let grid = layout.table.grid;
    let dx = grid.dx();
    let dz = if grid.dimension == 1 {
        0.25 * dx
    } else {
        0.5 * dx
    };
    let bins = (2.0 * halfwidth / dz).ceil() as usize;
    let phases = grid.cell_len();
    let z0 = -halfwidth + 0.5 * dz;
    let bin_of = |z: f64| -> Option<usize> {
        let k = ((z + halfwidth) / dz).floor();
        (k >= 0.0 && (k as usize) < bins).then_some(k as usize)
    };
    let mut acc = vec![Acc::default(); phases * bins];
    let visit = |f: &mut dyn FnMut(usize, f64, f64)| {
        for snap in snapshots {
            let shift = speed.value * snap.t + speed.intercept;
            for (i, &u) in snap.values.iter().enumerate() {
                let node = snap.node(i);
                let z = layout.s(node) - shift;
                if let Some(k) = bin_of(z) {
                    f(grid.phase(node) * bins + k, z, u);
                }
            }
        }
    };
    visit(&mut |slot, z, u| {
        let a = &mut acc[slot];
        a.n += 1.0;
        a.z += z;
        a.u += u;
        a.zz += z * z;
        a.zu += z * u;
    });
    let fits: Vec<Option<(f64, f64, f64)>> =
        acc.iter().map(|a| (a.n > 0.0).then(|| a.fit())).collect();
    let mut spread: f64 = 0.0;
    visit(&mut |slot, z, u| {
        if let Some((zm, um, slope)) = fits[slot] {
            spread = spread.max((u - um - slope * (z - zm)).abs());
        }
    });
    let mut values = vec![f64::NAN; phases * bins];
    for (slot, fit) in fits.iter().enumerate() {
        if let Some((zm, um, slope)) = fit {
            let centre = z0 + (slot % bins) as f64 * dz;
            values[slot] = um + slope * (centre - zm);
        }
    }
    let mut monotone: f64 = 0.0;
    let mut upper_defect: f64 = 0.0;
    let mut lower_defect: f64 = 0.0;
    let mut bounds: f64 = 0.0;
    for phase in 0..phases {
        let row = &values[phase * bins..(phase + 1) * bins];
        let present: Vec<f64> = row.iter().copied().filter(|v| !v.is_nan()).collect();
        for w in present.windows(2) {
            monotone = monotone.max(w[1] - w[0]);
        }
        if let (Some(first), Some(last)) = (present.first(), present.last()) {
            upper_defect = upper_defect.max((first - layout.upper[phase]).abs());
            lower_defect = lower_defect.max((last - layout.lower[phase]).abs());
        }
        for v in &present {
            bounds = bounds
                .max(layout.lower[phase] - v)
                .max(v - layout.upper[phase]);
        }
    }
    let mut cell_mean = vec![f64::NAN; bins];
    let mut cell_min = vec![f64::NAN; bins];
    let mut cell_max = vec![f64::NAN; bins];
    for k in 0..bins {
        let col: Vec<f64> = (0..phases)
            .map(|p| values[p * bins + k])
            .filter(|v| !v.is_nan())
            .collect();
        if !col.is_empty() {
            cell_mean[k] = col.iter().sum::<f64>() / col.len() as f64;
            cell_min[k] = col.iter().copied().fold(f64::INFINITY, f64::min);
            cell_max[k] = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
    }
    let mut profile = Profile {
        center: speed.intercept,
        dz,
        z0,
        bins,
        phases,
        values,
        cell_mean,
        cell_min,
        cell_max,
        monotonicity_defect: monotone,
        periodicity_defect: spread,
        upper_limit_defect: upper_defect,
        lower_limit_defect: lower_defect,
        bounds_defect: bounds,
        upper: layout.upper.clone(),
        lower: layout.lower.clone(),
        tail_rates: [0.0; 2],
    };
    profile.fit_tails(0.25 * halfwidth);
    Ok(profile)
}
