use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use terracelab::fronts::{bistable_speed, FrontRequest};
use terracelab::io::{self, SvgLayer};
use terracelab::problem::{CellTable, Config, Grid, PeriodicProblem};
use terracelab::spectral::{enumerate_stable_states, StateLattice, SteadyState};
use terracelab::terrace::{
    build_terrace, build_terrace_from, compare_terraces, merge_order_invariance_check,
    observe_terrace_from_cauchy, FrontCache, MergePolicy, Terrace, TerraceOptions,
};
use terracelab::verify::{
    glued_supersolution_residual, perturbation_residual, shape_match, spreading_run, GlueParams,
    SpreadSetup,
};
use terracelab::wulff::{
    c_of_p, corner_demo, freidlin_gartner, intersect_half_planes, upsilon, wulff_shape,
    ShapePolygon, SpeedField, SpeedSample,
};

use crate::output::Output;
use crate::Diagnostic;

pub struct Setup {
    pub cfg: Config,
    pub problem: PeriodicProblem,
    /// Grid over the configured extent, for front and Cauchy runs.
    pub table: CellTable,
    /// One periodic cell, for steady states and certificates.
    pub cell: CellTable,
    pub lattice: StateLattice,
}

pub fn setup(out: &mut Output, path: &Path) -> Result<Setup> {
    let text = out.read_input(path)?;
    let cfg = Config::from_toml(&text)?;
    let ppp = cfg.grid.points_per_period;
    let problem = PeriodicProblem::new(&cfg.problem, ppp)?;
    let dim = problem.dimension();
    let table = CellTable::new(&problem, Grid::new(dim, ppp, cfg.grid.extent_periods));
    let cell = CellTable::new(&problem, Grid::new(dim, ppp, 1));
    let lattice = enumerate_stable_states(&cell, &cfg.run, &cfg.run.probes)?;
    Ok(Setup {
        cfg,
        problem,
        table,
        cell,
        lattice,
    })
}

impl Setup {
    fn state_index(&self, id: &str) -> Result<usize> {
        self.lattice
            .index_of(id)
            .with_context(|| format!("no stable state with id {id:?}"))
    }

    fn check_direction(&self, dir: [i32; 2]) -> Result<()> {
        if dir == [0, 0] {
            bail!(terracelab::Error::Config(
                "direction must be nonzero".into()
            ));
        }
        if self.problem.dimension() == 1 && dir[1] != 0 {
            bail!(terracelab::Error::Config(format!(
                "direction {dir:?} has an x2 component in a one-dimensional problem"
            )));
        }
        Ok(())
    }

    fn options(&self, dir: [i32; 2], profiles: bool) -> TerraceOptions {
        TerraceOptions {
            direction: dir,
            horizon: self.cfg.run.horizon,
            extract_profiles: profiles,
        }
    }
}

/// Maps `f` over `items` on up to `jobs` threads, keeping the input order.
fn par_map<T: Sync, R: Send>(
    jobs: usize,
    items: &[T],
    f: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    if items.is_empty() {
        return Ok(Vec::new());
    }
    let chunk = items.len().div_ceil(jobs.clamp(1, items.len()));
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

fn angle_deg(v: [f64; 2]) -> f64 {
    v[1].atan2(v[0]).to_degrees()
}

fn unit_at(deg: f64) -> [f64; 2] {
    let a = deg.to_radians();
    [a.cos(), a.sin()]
}

#[derive(Serialize)]
struct StateRow<'a> {
    id: &'a str,
    lambda: f64,
    stability: terracelab::spectral::Stability,
    residual: f64,
    mean: f64,
    min: f64,
    max: f64,
    out_of_range: bool,
    values_csv_path: String,
}

pub fn states(out: &mut Output, s: &Setup) -> Result<()> {
    let lat = &s.lattice;
    let mut rows = Vec::new();
    for st in lat.stable.iter().chain(&lat.unstable).chain(&lat.marginal) {
        let path = out.write(
            &format!("states/{}.csv", st.id),
            &io::state_csv(&s.cell.grid, st),
        )?;
        rows.push(StateRow {
            id: &st.id,
            lambda: st.eigenvalue,
            stability: st.stability,
            residual: st.residual,
            mean: st.mean(),
            min: st.min(),
            max: st.max(),
            out_of_range: st.out_of_range,
            values_csv_path: path,
        });
    }
    let doc = json!({
        "states": rows,
        "stable_order": lat.stable.iter().map(|x| &x.id).collect::<Vec<_>>(),
        "totally_ordered": lat.totally_ordered,
        "intersecting": lat.intersecting,
        "skipped_probes": lat.skipped_probes,
        "ellipticity": s.problem.ellipticity(),
    });
    out.write_json("states.json", &doc)?;
    for st in &lat.stable {
        println!(
            "{:>4}  mean {:.6}  lambda {:+.6e}  stable",
            st.id,
            st.mean(),
            st.eigenvalue
        );
    }
    for st in lat.unstable.iter().chain(&lat.marginal) {
        println!(
            "{:>4}  mean {:.6}  lambda {:+.6e}  {:?}",
            st.id,
            st.mean(),
            st.eigenvalue,
            st.stability
        );
    }
    Ok(())
}

pub fn front(
    out: &mut Output,
    s: &Setup,
    dir: [i32; 2],
    upper: Option<&str>,
    lower: Option<&str>,
) -> Result<()> {
    s.check_direction(dir)?;
    let n = s.lattice.stable.len();
    let i = upper.map_or(Ok(0), |id| s.state_index(id))?;
    let j = lower.map_or(Ok(n - 1), |id| s.state_index(id))?;
    if i >= j {
        bail!(terracelab::Error::Config(
            "the upper state must lie above the lower one".into()
        ));
    }
    let st = &s.lattice.stable;
    let mut req = FrontRequest::new(
        dir,
        st[i].values.clone(),
        st[j].values.clone(),
        s.cfg.run.horizon,
    );
    req.intermediates = st[i + 1..j].iter().map(|x| x.values.clone()).collect();
    let mut rec = bistable_speed(&s.table, &s.cfg.run, &req)?;
    rec.upper_id = st[i].id.clone();
    rec.lower_id = st[j].id.clone();
    let profile_path = match &rec.profile {
        Some(p) => Some(out.write("front_profile.csv", &io::profile_csv(p))?),
        None => None,
    };
    let doc = front_json(&rec, profile_path);
    out.write_json("front.json", &doc)?;
    println!(
        "front {} -> {} along {:?}: c = {:.6} +- {:.2e}",
        rec.upper_id, rec.lower_id, dir, rec.speed.value, rec.speed.se
    );
    Ok(())
}

fn front_json(rec: &terracelab::fronts::FrontRecord, profile_csv_path: Option<String>) -> Value {
    let quality = rec.profile.as_ref().map(|p| {
        json!({
            "monotonicity_defect": p.monotonicity_defect,
            "periodicity_defect": p.periodicity_defect,
            "upper_limit_defect": p.upper_limit_defect,
            "lower_limit_defect": p.lower_limit_defect,
            "bounds_defect": p.bounds_defect,
        })
    });
    json!({
        "e": rec.direction,
        "unit": rec.unit,
        "q_upper_id": rec.upper_id,
        "q_lower_id": rec.lower_id,
        "c": rec.speed.value,
        "se": rec.speed.se,
        "r2": rec.speed.r2,
        "drift": rec.speed.drift,
        "fit_window": rec.fit_window,
        "level_speeds": rec.level_speeds.iter().map(|l| json!({"c": l.value, "se": l.se})).collect::<Vec<_>>(),
        "flags": rec.flags,
        "profile_quality": quality,
        "profile_csv_path": profile_csv_path,
    })
}

fn terrace_json(out: &mut Output, t: &Terrace, prefix: &str) -> Result<Value> {
    let mut fronts = Vec::new();
    for (k, f) in t.fronts.iter().enumerate() {
        let path = match &f.profile {
            Some(p) => Some(out.write(&format!("{prefix}_profile_{k}.csv"), &io::profile_csv(p))?),
            None => None,
        };
        fronts.push(front_json(f, path));
    }
    Ok(json!({
        "e": t.direction,
        "platforms": t.platforms,
        "speeds": t.fronts.iter().map(|f| json!({"c": f.speed.value, "se": f.speed.se})).collect::<Vec<_>>(),
        "fronts": fronts,
        "merges": t.merges,
        "flags": t.flags,
    }))
}

pub struct TerraceArgs {
    pub dir: [i32; 2],
    pub policy: MergePolicy,
    pub observe: bool,
    pub check_order: bool,
}

pub fn terrace(out: &mut Output, s: &Setup, a: &TerraceArgs) -> Result<()> {
    s.check_direction(a.dir)?;
    let opts = s.options(a.dir, true);
    let mut cache = FrontCache::default();
    let t = build_terrace(
        &s.table, &s.cfg.run, &s.lattice, &opts, a.policy, &mut cache,
    )?;
    let mut doc = terrace_json(out, &t, "terrace")?;
    println!("terrace along {:?}: K = {}", a.dir, t.fronts.len());
    for f in &t.fronts {
        println!(
            "  {} -> {}  c = {:.6} +- {:.2e}",
            f.upper_id, f.lower_id, f.speed.value, f.speed.se
        );
    }
    let mut failures = Vec::new();
    if a.check_order {
        let r = merge_order_invariance_check(&s.table, &s.cfg.run, &s.lattice, &opts, &mut cache)?;
        println!(
            "merge order invariance: {}",
            if r.passed { "pass" } else { "FAIL" }
        );
        if !r.passed {
            failures.push("merge order changes the terrace");
        }
        doc["order_invariance"] = serde_json::to_value(&r)?;
    }
    if a.observe {
        let obs = observe_terrace_from_cauchy(
            &s.table,
            &s.cfg.run,
            &s.lattice,
            a.dir,
            s.cfg.run.horizon,
        )?;
        let cmp = compare_terraces(
            &t.summary(),
            &obs.summary(),
            s.cfg.run.tolerances.profile_match_tol,
        );
        println!(
            "observed platforms {:?}, speeds {:?}: {}",
            obs.platforms,
            obs.transitions
                .iter()
                .map(|x| x.speed.value)
                .collect::<Vec<_>>(),
            if cmp.passed { "match" } else { "MISMATCH" }
        );
        if !cmp.passed {
            failures.push("constructed and observed terraces differ");
        }
        doc["observed"] = serde_json::to_value(&obs)?;
        doc["comparison"] = serde_json::to_value(&cmp)?;
    }
    out.write_json("terrace.json", &doc)?;
    if !failures.is_empty() {
        bail!(Diagnostic(failures.join("; ")));
    }
    Ok(())
}

/// Where a speed field comes from when it is measured from the problem.
pub struct Sweep {
    pub dirs: Vec<[i32; 2]>,
    /// Measure along `e1` only and assume rotation invariance.
    pub isotropic: bool,
    pub jobs: usize,
}

impl Sweep {
    fn directions(&self, s: &Setup) -> Result<Vec<[i32; 2]>> {
        if s.problem.dimension() != 2 {
            bail!(terracelab::Error::Dimension(s.problem.dimension()));
        }
        if self.isotropic {
            if !s.problem.is_homogeneous() {
                bail!(terracelab::Error::Config(
                    "--isotropic needs a homogeneous problem".into()
                ));
            }
            return Ok(vec![[1, 0]]);
        }
        for d in &self.dirs {
            s.check_direction(*d)?;
        }
        Ok(self.dirs.clone())
    }

    /// Terraces from the stable state `top` down to 0 along every direction.
    fn terraces(&self, s: &Setup, top: usize) -> Result<Vec<Terrace>> {
        let dirs = self.directions(s)?;
        par_map(self.jobs, &dirs, |&d| {
            let mut cache = FrontCache::default();
            Ok(build_terrace_from(
                &s.table,
                &s.cfg.run,
                &s.lattice,
                &s.options(d, false),
                MergePolicy::LeftmostFirst,
                &mut cache,
                top,
            )?)
        })
    }

    /// Replicates a single measured speed over 360 directions when isotropic.
    fn expand(&self, field: SpeedField<f64>) -> SpeedField<f64> {
        if !self.isotropic {
            return field;
        }
        let s = &field.samples[0];
        let mut out = SpeedField::from_fn(360, |_| s.speed);
        for x in &mut out.samples {
            x.se = s.se;
        }
        out.provenance = field.provenance;
        out
    }
}

pub enum FieldSource<'a> {
    File(&'a Path),
    State {
        setup: &'a Setup,
        id: &'a str,
        upsilon: bool,
        sweep: Sweep,
    },
}

pub fn wulff(out: &mut Output, src: FieldSource<'_>, fg: Option<f64>) -> Result<()> {
    let (field, source, zero_tol, want_upsilon) = match src {
        FieldSource::File(path) => {
            let text = out.read_input(path)?;
            (
                io::parse_speed_field_csv(&text)?,
                path.display().to_string(),
                5e-3,
                false,
            )
        }
        FieldSource::State {
            setup,
            id,
            upsilon,
            sweep,
        } => {
            let p = setup.state_index(id)?;
            let field = if upsilon {
                let ts = sweep.terraces(setup, p)?;
                SpeedField {
                    samples: ts
                        .iter()
                        .map(|t| SpeedSample {
                            direction: t.fronts[0].unit,
                            speed: t.fronts[0].speed.value,
                            se: t.fronts[0].speed.se,
                        })
                        .collect(),
                    provenance: terracelab::wulff::Provenance::Measured,
                }
            } else {
                c_of_p(&sweep.terraces(setup, 0)?, p)?
            };
            let name = if upsilon {
                "uppermost speed c_1"
            } else {
                "terrace speed c"
            };
            let tol = setup.cfg.run.tolerances.zero_speed_tol;
            (
                sweep.expand(field),
                format!("{name} at state {id}"),
                tol,
                upsilon,
            )
        }
    };
    out.write("speed_field.csv", &io::speed_field_csv(&field))?;
    let (shape, kind) = if want_upsilon {
        let u = upsilon(&field, &zero_tol)?;
        (u.shape, Some(u.kind))
    } else {
        (wulff_shape(&field)?, None)
    };
    out.write("wulff_polygon.csv", &io::polygon_csv(&shape))?;
    let reach = field
        .samples
        .iter()
        .fold(0.0_f64, |m, x| m.max(x.speed.abs()))
        .max(1e-9);
    out.write(
        "wulff.svg",
        &io::svg_overlay(&[SvgLayer {
            label: source.clone(),
            points: clipped(&shape, 3.0 * reach).vertices,
            stroke: "black",
            dashed: false,
        }]),
    )?;
    let fg_doc = match fg {
        Some(deg) => {
            let e = unit_at(deg);
            let w = freidlin_gartner(&field, &e)?;
            let point = [w.value * e[0], w.value * e[1]];
            println!(
                "w({deg} deg) = {:.9} attained at {:.3} deg",
                w.value,
                angle_deg(field.samples[w.argmin].direction)
            );
            Some(json!({
                "angle_degrees": deg,
                "value": w.value,
                "argmin_angle_degrees": angle_deg(field.samples[w.argmin].direction),
                "point": point,
                "boundary_distance": shape.boundary_distance(point),
            }))
        }
        None => None,
    };
    let doc = json!({
        "source": source,
        "provenance": field.provenance,
        "directions": field.samples.len(),
        "shape": {
            "vertices": shape.vertices,
            "area": shape.area(),
            "contains_origin": shape.contains_origin,
            "unbounded": shape.unbounded,
        },
        "upsilon_kind": kind,
        "fg": fg_doc,
    });
    out.write_json("wulff.json", &doc)?;
    println!(
        "{} vertices, area {:.6}",
        shape.vertices.len(),
        shape.area()
    );
    Ok(())
}

/// The shape cut to `[-r, r]^2` for drawing.
fn clipped(shape: &ShapePolygon<f64>, r: f64) -> ShapePolygon<f64> {
    if !shape.unbounded || shape.vertices.len() < 3 {
        return shape.clone();
    }
    let n = shape.vertices.len();
    let mut planes: Vec<([f64; 2], f64)> = (0..n)
        .map(|i| {
            let (a, b) = (shape.vertices[i], shape.vertices[(i + 1) % n]);
            let nrm = [b[1] - a[1], a[0] - b[0]];
            (nrm, nrm[0] * a[0] + nrm[1] * a[1])
        })
        .collect();
    planes.extend([
        ([1.0, 0.0], r),
        ([-1.0, 0.0], r),
        ([0.0, 1.0], r),
        ([0.0, -1.0], r),
    ]);
    intersect_half_planes(&planes, &(10.0 * r))
}

pub struct SpreadArgs<'a> {
    pub times: Vec<f64>,
    pub radius: f64,
    pub half_width: usize,
    pub eps: f64,
    pub field: Option<&'a Path>,
    pub sweep: Sweep,
}

pub fn spread(out: &mut Output, s: &Setup, a: SpreadArgs<'_>) -> Result<()> {
    if s.problem.dimension() != 2 {
        bail!(terracelab::Error::Dimension(s.problem.dimension()));
    }
    let n = s.lattice.stable.len();
    let predicted: Vec<ShapePolygon<f64>> = match a.field {
        Some(path) => {
            if n != 2 {
                bail!(terracelab::Error::Config(
                    "--field predicts a single shape; the problem has more than two stable states"
                        .into()
                ));
            }
            let text = out.read_input(path)?;
            vec![wulff_shape(&io::parse_speed_field_csv(&text)?)?]
        }
        None => {
            let ts = a.sweep.terraces(s, 0)?;
            (1..n)
                .map(|k| {
                    let field = a.sweep.expand(c_of_p(&ts, k)?);
                    out.write(
                        &format!("spread_speed_field_{}.csv", s.lattice.stable[k].id),
                        &io::speed_field_csv(&field),
                    )?;
                    Ok(wulff_shape(&field)?)
                })
                .collect::<Result<_>>()?
        }
    };
    let setup = SpreadSetup {
        radius: a.radius,
        half_width: a.half_width,
        times: a.times.clone(),
    };
    let run = spreading_run(&s.cell, &s.cfg.run, &s.lattice, &setup)?;
    let mut shapes = Vec::new();
    let mut per_pair: Vec<Vec<(f64, bool, bool, f64)>> = vec![Vec::new(); n - 1];
    for (i, m) in run.shapes.iter().enumerate() {
        let k = s.state_index(&m.lower_id)?;
        let pred = &predicted[k - 1];
        let r = shape_match(m, pred, a.eps);
        let stem = format!("shape_t{}_{}", m.t.round() as i64, m.lower_id);
        let csv = out.write(&format!("{stem}.csv"), &io::outline_csv(m))?;
        let svg = out.write(
            &format!("{stem}.svg"),
            &io::svg_overlay(&[
                SvgLayer {
                    label: format!("measured t = {}", m.t.round()),
                    points: m.outline.clone(),
                    stroke: "#c0392b",
                    dashed: false,
                },
                SvgLayer {
                    label: "predicted".into(),
                    points: pred.vertices.clone(),
                    stroke: "black",
                    dashed: false,
                },
                SvgLayer {
                    label: format!("(1 -+ {}) predicted", a.eps),
                    points: pred.scaled(&(1.0 - a.eps)).vertices,
                    stroke: "#7f8c8d",
                    dashed: true,
                },
                SvgLayer {
                    label: String::new(),
                    points: pred.scaled(&(1.0 + a.eps)).vertices,
                    stroke: "#7f8c8d",
                    dashed: true,
                },
            ]),
        )?;
        println!(
            "t {:>7.1}  {} -> {}  ratio [{:.4}, {:.4}]  hausdorff {:.4}  {}",
            m.t,
            m.upper_id,
            m.lower_id,
            r.min_ratio,
            r.max_ratio,
            r.hausdorff,
            if r.passed { "pass" } else { "fail" }
        );
        per_pair[k - 1].push((r.hausdorff, r.inner_ok, r.outer_ok, m.t));
        shapes.push(json!({
            "index": i,
            "t": m.t,
            "upper_id": m.upper_id,
            "lower_id": m.lower_id,
            "area": m.area,
            "crossings": m.crossings,
            "outline_csv_path": csv,
            "svg_path": svg,
            "match": r,
        }));
    }
    let pairs: Vec<Value> = per_pair
        .iter()
        .enumerate()
        .map(|(k, rows)| {
            let first =
                |f: fn(&(f64, bool, bool, f64)) -> bool| rows.iter().find(|r| f(r)).map(|r| r.3);
            json!({
                "lower_id": s.lattice.stable[k + 1].id,
                "predicted_vertices": predicted[k].vertices,
                "hausdorff_nonincreasing": rows.windows(2).all(|w| w[1].0 <= w[0].0 + 1e-2),
                "first_outer_ok": first(|r| r.2),
                "first_inner_ok": first(|r| r.1),
            })
        })
        .collect();
    let doc = json!({
        "times": a.times,
        "radius": a.radius,
        "half_width": a.half_width,
        "eps": a.eps,
        "dt": run.dt,
        "invaded_since": run.invaded_since,
        "shapes": shapes,
        "pairs": pairs,
    });
    out.write_json("spread.json", &doc)?;
    Ok(())
}

pub fn corner(out: &mut Output) -> Result<()> {
    let d = corner_demo()?;
    let non_flat = d.corner_angle < PI - 1e-9;
    let passed = !d.supporting && non_flat;
    out.write("corner_polygon.csv", &io::polygon_csv(&d.shape))?;
    out.write(
        "corner.svg",
        &io::svg_overlay(&[SvgLayer {
            label: "W_c with c(e1) = c(e2) = 1, c(3/5, 4/5) = 2".into(),
            points: clipped(&d.shape, 3.0).vertices,
            stroke: "black",
            dashed: false,
        }]),
    )?;
    let mut doc = serde_json::to_value(&d)?;
    doc["non_flat_corner"] = json!(non_flat);
    doc["passed"] = json!(passed);
    out.write_json("corner_demo.json", &doc)?;
    println!(
        "max x.e over W at e = (3/5, 4/5): {} (speed {}), supporting: {}",
        d.support, d.query_speed, d.supporting
    );
    println!(
        "vertex ({}, {}) with interior angle {:.6} rad; w(e) = {}",
        d.corner[0], d.corner[1], d.corner_angle, d.fg_value
    );
    if !passed {
        bail!(Diagnostic("corner geometry check failed".into()));
    }
    Ok(())
}

pub enum Certificate {
    Perturbation {
        times: Vec<f64>,
        delta_min: f64,
    },
    Glue {
        dir: [i32; 2],
        eps: f64,
        eta: f64,
        smoothing: f64,
        tol: f64,
        times: Vec<f64>,
    },
}

pub fn certify(out: &mut Output, s: &Setup, which: Certificate) -> Result<()> {
    match which {
        Certificate::Perturbation { times, delta_min } => {
            let reports: Vec<_> = s
                .lattice
                .stable
                .iter()
                .map(|st| perturbation_residual(&s.cell, st, &times, delta_min))
                .collect();
            for r in &reports {
                println!(
                    "{:>4}  delta {:<8}  margin {:+.3e}  {}",
                    r.state_id,
                    r.accepted
                        .as_ref()
                        .map_or("none".to_string(), |a| a.delta.to_string()),
                    r.margin,
                    if r.passed { "pass" } else { "FAIL" }
                );
            }
            let passed = reports.iter().all(|r| r.passed);
            out.write_json(
                "certify_perturbation.json",
                &json!({"times": times, "delta_min": delta_min, "reports": reports, "passed": passed}),
            )?;
            if !passed {
                bail!(Diagnostic("perturbation certificate failed".into()));
            }
        }
        Certificate::Glue {
            dir,
            eps,
            eta,
            smoothing,
            tol,
            times,
        } => {
            s.check_direction(dir)?;
            let mut cache = FrontCache::default();
            let t = build_terrace(
                &s.table,
                &s.cfg.run,
                &s.lattice,
                &s.options(dir, true),
                MergePolicy::LeftmostFirst,
                &mut cache,
            )?;
            let k = t.fronts.len();
            let params = GlueParams {
                eps: (0..k).map(|i| eps * (i + 1) as f64).collect(),
                eta: (0..k).map(|i| eta * (i + 1) as f64).collect(),
                tol,
                smoothing,
                times,
            };
            let plats: Vec<&SteadyState> = t
                .platform_indices
                .iter()
                .map(|&i| &s.lattice.stable[i])
                .collect();
            let r = glued_supersolution_residual(&s.table, &t.fronts, &plats, &params)?;
            for p in &r.pieces {
                println!(
                    "front {}  min residual {:+.3e} at z = {:.3}",
                    p.front, p.min_residual, p.at_z
                );
            }
            println!(
                "glued composite: {}",
                if r.passed { "pass" } else { "FAIL" }
            );
            out.write_json(
                "certify_glue.json",
                &json!({
                    "e": dir,
                    "platforms": t.platforms,
                    "speeds": t.speeds(),
                    "eps": params.eps,
                    "eta": params.eta,
                    "tol": tol,
                    "smoothing": smoothing,
                    "report": r,
                }),
            )?;
            if !r.passed {
                bail!(Diagnostic("glued supersolution certificate failed".into()));
            }
        }
    }
    Ok(())
}
