//! Propagating terraces: construction by merging fronts, observation from the
//! Cauchy problem, and comparison of the two.

mod compare;
mod observe;

pub use compare::{compare_terraces, CompareReport, TerraceSummary};
pub use observe::{observe_terrace_from_cauchy, ObservedTerrace, Plateau, Transition};

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fronts::{bistable_speed, FrontRecord, FrontRequest};
use crate::problem::{CellTable, RunConfig};
use crate::spectral::StateLattice;

/// Which descent to resolve first when several are present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MergePolicy {
    LeftmostFirst,
    RightmostFirst,
}

#[derive(Clone, Debug, Serialize)]
pub struct MergeEvent {
    pub upper_id: String,
    pub removed_id: String,
    pub lower_id: String,
    /// Speeds of the upper and lower fronts before the merge.
    pub c_upper: f64,
    pub c_lower: f64,
    pub merged: Option<f64>,
    pub bracket: [f64; 2],
    /// The direct front still split into several speeds.
    pub still_split: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct TerraceFlags {
    pub unique_certified: bool,
    pub zero_speed: bool,
    pub still_split: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Terrace {
    pub direction: [i32; 2],
    /// Platform ids from the top state down to 0.
    pub platforms: Vec<String>,
    /// Indices of the platforms in the lattice's stable list.
    #[serde(skip)]
    pub platform_indices: Vec<usize>,
    pub fronts: Vec<FrontRecord>,
    pub merges: Vec<MergeEvent>,
    pub flags: TerraceFlags,
}

impl Terrace {
    pub fn speeds(&self) -> Vec<f64> {
        self.fronts.iter().map(|f| f.speed.value).collect()
    }

    /// Speeds nondecreasing up to `k` combined standard errors.
    pub fn speeds_nondecreasing(&self, k: f64) -> bool {
        self.fronts.windows(2).all(|w| {
            let se = w[0].speed.se.hypot(w[1].speed.se);
            w[0].speed.value <= w[1].speed.value + k * se
        })
    }

    pub fn summary(&self) -> TerraceSummary<'_> {
        TerraceSummary {
            platforms: self.platforms.clone(),
            speeds: self.fronts.iter().map(|f| f.speed.clone()).collect(),
            profiles: self.fronts.iter().map(|f| f.profile.as_ref()).collect(),
        }
    }
}

/// Front measurements keyed by lattice index pair, shared across builds.
#[derive(Default)]
pub struct FrontCache {
    map: HashMap<(usize, usize), std::result::Result<FrontRecord, Vec<f64>>>,
}

/// Settings shared by every front of a terrace.
#[derive(Clone, Debug)]
pub struct TerraceOptions {
    pub direction: [i32; 2],
    pub horizon: f64,
    pub extract_profiles: bool,
}

fn measure(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    opts: &TerraceOptions,
    cache: &mut FrontCache,
    i: usize,
    j: usize,
) -> Result<std::result::Result<FrontRecord, Vec<f64>>> {
    if let Some(hit) = cache.map.get(&(i, j)) {
        return Ok(hit.clone());
    }
    let mut req = FrontRequest::new(
        opts.direction,
        lattice.stable[i].values.clone(),
        lattice.stable[j].values.clone(),
        opts.horizon,
    );
    req.intermediates = lattice.stable[i + 1..j]
        .iter()
        .map(|s| s.values.clone())
        .collect();
    req.extract_profile = opts.extract_profiles;
    let out = match bistable_speed(table, run, &req) {
        Ok(mut rec) => {
            rec.upper_id = lattice.stable[i].id.clone();
            rec.lower_id = lattice.stable[j].id.clone();
            Ok(rec)
        }
        Err(Error::MultipleSpeeds { speeds }) => Err(speeds),
        Err(e) => return Err(e),
    };
    cache.map.insert((i, j), out.clone());
    Ok(out)
}

fn check_lattice(lattice: &StateLattice) -> Result<()> {
    lattice.require_no_marginal()?;
    if !lattice.totally_ordered {
        return Err(Error::Unordered(lattice.intersecting.len()));
    }
    Ok(())
}

/// Builds the terrace by starting from adjacent fronts and merging every
/// descent `c_{J-1} > c_J` until the speeds are nondecreasing.
pub fn build_terrace(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    opts: &TerraceOptions,
    policy: MergePolicy,
    cache: &mut FrontCache,
) -> Result<Terrace> {
    build_terrace_from(table, run, lattice, opts, policy, cache, 0)
}

/// As [`build_terrace`], connecting the stable state `top` to 0.
pub fn build_terrace_from(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    opts: &TerraceOptions,
    policy: MergePolicy,
    cache: &mut FrontCache,
    top: usize,
) -> Result<Terrace> {
    check_lattice(lattice)?;
    let m = lattice.stable.len() - 1;
    if top >= m {
        return Err(Error::Config(format!("no state below index {top}")));
    }
    let mut platforms: Vec<usize> = (top..=m).collect();
    let mut fronts = Vec::with_capacity(m - top);
    for k in top + 1..=m {
        match measure(table, run, lattice, opts, cache, k - 1, k)? {
            Ok(rec) => fronts.push(rec),
            Err(speeds) => return Err(Error::MultipleSpeeds { speeds }),
        }
    }
    let mut merges = Vec::new();
    let mut split_pairs: Vec<usize> = Vec::new();
    loop {
        // Descents between consecutive fronts, by the index of the lower front.
        let descents: Vec<usize> = (1..fronts.len())
            .filter(|&j| {
                let (a, b) = (&fronts[j - 1].speed, &fronts[j].speed);
                a.value - b.value > 2.0 * a.se.hypot(b.se)
                    && !split_pairs.contains(&platforms[j - 1])
            })
            .collect();
        let pick = match policy {
            MergePolicy::LeftmostFirst => descents.first(),
            MergePolicy::RightmostFirst => descents.last(),
        };
        let Some(&j) = pick else { break };
        let (top, mid, bottom) = (platforms[j - 1], platforms[j], platforms[j + 1]);
        let (upper, lower) = (fronts[j - 1].speed.clone(), fronts[j].speed.clone());
        let mut event = MergeEvent {
            upper_id: lattice.stable[top].id.clone(),
            removed_id: lattice.stable[mid].id.clone(),
            lower_id: lattice.stable[bottom].id.clone(),
            c_upper: upper.value,
            c_lower: lower.value,
            merged: None,
            bracket: [lower.value, upper.value],
            still_split: false,
        };
        match measure(table, run, lattice, opts, cache, top, bottom)? {
            Ok(rec) => {
                let c = &rec.speed;
                let low = lower.value - 2.0 * lower.se.hypot(c.se);
                let high = upper.value + 2.0 * upper.se.hypot(c.se);
                event.merged = Some(c.value);
                event.bracket = [low, high];
                if c.value < low || c.value > high {
                    return Err(Error::BracketViolation {
                        merged: c.value,
                        low,
                        high,
                    });
                }
                fronts.splice(j - 1..=j, [rec]);
                platforms.remove(j);
            }
            Err(_) => {
                event.still_split = true;
                split_pairs.push(top);
            }
        }
        merges.push(event);
    }
    let zero_speed = fronts
        .iter()
        .any(|f| f.speed.value.abs() < run.tolerances.zero_speed_tol);
    let still_split = !split_pairs.is_empty();
    Ok(Terrace {
        direction: opts.direction,
        platforms: platforms
            .iter()
            .map(|&i| lattice.stable[i].id.clone())
            .collect(),
        platform_indices: platforms,
        fronts,
        merges,
        flags: TerraceFlags {
            unique_certified: !zero_speed && !still_split,
            zero_speed,
            still_split,
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderInvarianceReport {
    pub leftmost: Vec<String>,
    pub rightmost: Vec<String>,
    pub leftmost_speeds: Vec<f64>,
    pub rightmost_speeds: Vec<f64>,
    pub same_platforms: bool,
    pub speeds_match: bool,
    pub passed: bool,
}

/// Builds the terrace under both merge policies and compares the outcomes.
pub fn merge_order_invariance_check(
    table: &CellTable,
    run: &RunConfig,
    lattice: &StateLattice,
    opts: &TerraceOptions,
    cache: &mut FrontCache,
) -> Result<OrderInvarianceReport> {
    let a = build_terrace(table, run, lattice, opts, MergePolicy::LeftmostFirst, cache)?;
    let b = build_terrace(
        table,
        run,
        lattice,
        opts,
        MergePolicy::RightmostFirst,
        cache,
    )?;
    let same_platforms = a.platforms == b.platforms;
    let speeds_match = same_platforms
        && a.fronts.iter().zip(&b.fronts).all(|(x, y)| {
            (x.speed.value - y.speed.value).abs() <= 3.0 * x.speed.se.hypot(y.speed.se)
        });
    Ok(OrderInvarianceReport {
        leftmost_speeds: a.speeds(),
        rightmost_speeds: b.speeds(),
        leftmost: a.platforms,
        rightmost: b.platforms,
        same_platforms,
        speeds_match,
        passed: same_platforms && speeds_match,
    })
}
