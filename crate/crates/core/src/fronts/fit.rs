use serde::Serialize;

use crate::error::{Error, Result};

/// Least-squares speed of a tracked position.
#[derive(Clone, Debug, Serialize)]
pub struct SpeedEstimate {
    pub value: f64,
    /// Regression error combined with `drift`, floored.
    pub se: f64,
    pub r2: f64,
    /// Half the difference between the slopes over the two halves of the window.
    pub drift: f64,
    pub intercept: f64,
    pub samples: usize,
}

struct Line {
    slope: f64,
    intercept: f64,
    se: f64,
    r2: f64,
}

fn ols(t: &[f64], x: &[f64]) -> Line {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let xm = x.iter().sum::<f64>() / n;
    let stt: f64 = t.iter().map(|v| (v - tm).powi(2)).sum();
    let stx: f64 = t.iter().zip(x).map(|(a, b)| (a - tm) * (b - xm)).sum();
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let slope = stx / stt;
    let intercept = xm - slope * tm;
    let ssr: f64 = t
        .iter()
        .zip(x)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if t.len() > 2 {
        (ssr / (n - 2.0) / stt).sqrt()
    } else {
        f64::INFINITY
    };
    let r2 = if sxx > 0.0 { 1.0 - ssr / sxx } else { 1.0 };
    Line {
        slope,
        intercept,
        se,
        r2,
    }
}

/// Fits `x = c t + b` over samples with `t` in `window`.
pub fn fit_speed(
    times: &[f64],
    positions: &[f64],
    window: [f64; 2],
    se_floor: f64,
) -> Result<SpeedEstimate> {
    let (t, x): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(positions)
        .filter(|(t, _)| **t >= window[0] - 1e-9 && **t <= window[1] + 1e-9)
        .map(|(a, b)| (*a, *b))
        .unzip();
    if t.len() < 8 {
        return Err(Error::ShortWindow(t.len()));
    }
    let all = ols(&t, &x);
    let half = t.len() / 2;
    let a = ols(&t[..half], &x[..half]);
    let b = ols(&t[half..], &x[half..]);
    let drift = 0.5 * (a.slope - b.slope).abs();
    Ok(SpeedEstimate {
        value: all.slope,
        se: all.se.hypot(drift).max(se_floor),
        r2: all.r2,
        drift,
        intercept: all.intercept,
        samples: t.len(),
    })
}
