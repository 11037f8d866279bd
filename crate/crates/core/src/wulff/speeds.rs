use serde::Serialize;

use super::{Provenance, SpeedField, SpeedSample};
use crate::error::{Error, Result};
use crate::fronts::{unit, SpeedEstimate};
use crate::terrace::Terrace;

/// The front of `terrace` whose lower platform is at or below the stable
/// state `p` and whose upper platform lies above it.
fn front_through(terrace: &Terrace, p: usize) -> Option<&SpeedEstimate> {
    let idx = &terrace.platform_indices;
    (0..terrace.fronts.len())
        .find(|&k| idx[k] < p && idx[k + 1] >= p)
        .map(|k| &terrace.fronts[k].speed)
}

/// `c[p](e)` over the directions of `terraces`, for the stable state with
/// lattice index `p`.
pub fn c_of_p(terraces: &[Terrace], p: usize) -> Result<SpeedField<f64>> {
    let mut samples = Vec::with_capacity(terraces.len());
    for t in terraces {
        let s = front_through(t, p).ok_or_else(|| {
            Error::Geometry(format!(
                "no front of the terrace in direction {:?} crosses state {p}",
                t.direction
            ))
        })?;
        samples.push(SpeedSample {
            direction: unit(t.direction),
            speed: s.value,
            se: s.se,
        });
    }
    Ok(SpeedField {
        samples,
        provenance: Provenance::Measured,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyKind {
    /// `c[p_k] <= c[p_{k+1}]`.
    Monotone,
    /// `c[p_{k+1}] = c_1^{p_k}` with `p_k` a platform.
    PlatformUpper,
    /// `c[p_{k+1}] = c[p_k]` with `p_k` skipped.
    SkippedState,
    /// `c_1^{p_k} <= c[p_k]` with `p_k` skipped.
    UpperBelow,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyItem {
    pub direction: [i32; 2],
    pub state: usize,
    pub kind: ConsistencyKind,
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of the two sides.
    pub se: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConsistencyReport {
    pub items: Vec<ConsistencyItem>,
    pub passed: bool,
}

/// Checks the identities between `c[p_k]` and the uppermost speeds `c_1^{p_k}`
/// within 3 combined standard errors. At a platform `c_1^{p_k}` equals
/// `c[p_{k+1}]` and so bounds `c[p_k]` from above, not below.
///
/// `full[d]` connects the top state to 0 in direction `d`; `sub[d][k]`
/// connects `p_k` to 0 in the same direction (so `sub[d][0]` may equal `full[d]`).
pub fn speed_consistency_check(
    full: &[Terrace],
    sub: &[Vec<Terrace>],
) -> Result<ConsistencyReport> {
    if full.len() != sub.len() {
        return Err(Error::Config(
            "one list of sub-terraces per direction is required".into(),
        ));
    }
    let mut items = Vec::new();
    for (t, subs) in full.iter().zip(sub) {
        let m = *t.platform_indices.last().unwrap_or(&0);
        let c = |k: usize| front_through(t, k).cloned();
        let mut push = |state, kind, lhs: &SpeedEstimate, rhs: &SpeedEstimate| {
            let se = lhs.se.hypot(rhs.se);
            let ok = match kind {
                ConsistencyKind::Monotone | ConsistencyKind::UpperBelow => {
                    lhs.value <= rhs.value + 3.0 * se
                }
                _ => (lhs.value - rhs.value).abs() <= 3.0 * se,
            };
            items.push(ConsistencyItem {
                direction: t.direction,
                state,
                kind,
                lhs: lhs.value,
                rhs: rhs.value,
                se,
                ok,
            });
        };
        for k in 1..m {
            let (Some(ck), Some(cn)) = (c(k), c(k + 1)) else {
                return Err(Error::Geometry(format!(
                    "state {k} is not crossed in direction {:?}",
                    t.direction
                )));
            };
            push(k, ConsistencyKind::Monotone, &ck, &cn);
            let upper = subs
                .get(k)
                .and_then(|s| s.fronts.first())
                .map(|f| f.speed.clone())
                .ok_or_else(|| Error::Config(format!("missing sub-terrace from state {k}")))?;
            if t.platform_indices.contains(&k) {
                push(k, ConsistencyKind::PlatformUpper, &cn, &upper);
            } else {
                push(k, ConsistencyKind::SkippedState, &cn, &ck);
                push(k, ConsistencyKind::UpperBelow, &upper, &ck);
            }
        }
    }
    let passed = items.iter().all(|i| i.ok);
    Ok(ConsistencyReport { items, passed })
}
