use serde::Serialize;

use crate::fronts::{Profile, SpeedEstimate};

/// The parts of a terrace that two constructions must agree on.
#[derive(Clone, Debug)]
pub struct TerraceSummary<'a> {
    pub platforms: Vec<String>,
    pub speeds: Vec<SpeedEstimate>,
    pub profiles: Vec<Option<&'a Profile>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub same_k: bool,
    pub same_platforms: bool,
    pub speed_diffs: Vec<f64>,
    pub speed_match: Vec<bool>,
    /// Optimal shifts `xi` with `U_b(x, z) ≈ U_a(x, z - xi)`, where both profiles exist.
    pub shifts: Vec<Option<f64>>,
    pub profile_errors: Vec<Option<f64>>,
    pub passed: bool,
}

/// Checks equal `K`, identical platforms, speeds within 3 SE and profiles
/// equal up to a shift.
pub fn compare_terraces(
    a: &TerraceSummary<'_>,
    b: &TerraceSummary<'_>,
    profile_match_tol: f64,
) -> CompareReport {
    let same_k = a.speeds.len() == b.speeds.len();
    let same_platforms = a.platforms == b.platforms;
    let mut speed_diffs = Vec::new();
    let mut speed_match = Vec::new();
    let mut shifts = Vec::new();
    let mut profile_errors = Vec::new();
    if same_k {
        for k in 0..a.speeds.len() {
            let (x, y) = (&a.speeds[k], &b.speeds[k]);
            let d = (x.value - y.value).abs();
            speed_diffs.push(d);
            speed_match.push(d <= 3.0 * x.se.hypot(y.se));
            match (
                a.profiles.get(k).copied().flatten(),
                b.profiles.get(k).copied().flatten(),
            ) {
                (Some(p), Some(q)) => {
                    let (xi, err) = best_shift(p, q);
                    shifts.push(Some(xi));
                    profile_errors.push(Some(err));
                }
                _ => {
                    shifts.push(None);
                    profile_errors.push(None);
                }
            }
        }
    }
    let passed = same_k
        && same_platforms
        && speed_match.iter().all(|&m| m)
        && profile_errors
            .iter()
            .flatten()
            .all(|&e| e <= profile_match_tol);
    CompareReport {
        same_k,
        same_platforms,
        speed_diffs,
        speed_match,
        shifts,
        profile_errors,
        passed,
    }
}

/// `max |U_a(x, y - xi) - U_b(x, y)|` over absolute positions `y` of `b`'s window.
fn mismatch(a: &Profile, b: &Profile, xi: f64, phases: &[usize], ks: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for &ph in phases {
        for &k in ks {
            let vb = b.values[ph * b.bins + k];
            if vb.is_nan() {
                continue;
            }
            let y = b.z(k) + b.center;
            let va = a.eval(ph, y - xi - a.center);
            worst = worst.max((va - vb).abs());
        }
    }
    worst
}

/// Grid search followed by golden-section refinement of the shift.
pub(crate) fn best_shift(a: &Profile, b: &Profile) -> (f64, f64) {
    let phase_step = (b.phases / 50).max(1);
    let phases: Vec<usize> = (0..b.phases.min(a.phases)).step_by(phase_step).collect();
    let ks: Vec<usize> = (0..b.bins).step_by((b.bins / 400).max(1)).collect();
    let centre = b.center - a.center;
    let f = |xi: f64| mismatch(a, b, xi, &phases, &ks);
    let mut best = (centre, f(centre));
    let h = 0.05;
    for i in -100..=100 {
        let xi = centre + i as f64 * h;
        let v = f(xi);
        if v < best.1 {
            best = (xi, v);
        }
    }
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..40 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let xi = 0.5 * (lo + hi);
    let v = f(xi);
    if v < best.1 {
        (xi, v)
    } else {
        best
    }
}
