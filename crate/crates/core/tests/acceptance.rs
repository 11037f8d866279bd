//! One PASS/FAIL line per acceptance criterion, on stderr.

mod common;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::{dense_top_eigenvalue, random_field, random_upsilon, Lab, Shooting};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terracelab::evolve::{comparison_check, Domain, Evolver, Field};
use terracelab::fronts::{bistable_speed, FrontRecord, FrontRequest};
use terracelab::problem::{time_step, CellTable, Config, Grid, PeriodicProblem, RunConfig};
use terracelab::spectral::principal_eigenpair;
use terracelab::terrace::{
    build_terrace, compare_terraces, merge_order_invariance_check, observe_terrace_from_cauchy,
    FrontCache, MergePolicy, Terrace, TerraceOptions,
};
use terracelab::verify::{
    glued_supersolution_residual, perturbation_residual, shape_match, spreading_run, GlueParams,
    SpreadSetup,
};
use terracelab::wulff::{
    cumulative_hulls, freidlin_gartner, minkowski_union_hulls, ratio, supporting_hyperplane_test,
    wulff_shape, ShapePolygon, SpeedField,
};

const CLOSED_FORM: f64 = 0.282842712474619;

type Outcome = (bool, String);

fn front(lab: &Lab, profile: bool) -> FrontRecord {
    let mut req = FrontRequest::new(
        [1, 0],
        lab.lattice.top().values.clone(),
        lab.lattice.zero().values.clone(),
        lab.cfg.run.horizon,
    );
    req.extract_profile = profile;
    bistable_speed(&lab.table, &lab.cfg.run, &req).unwrap()
}

fn opts(lab: &Lab, profiles: bool) -> TerraceOptions {
    TerraceOptions {
        direction: [1, 0],
        horizon: lab.cfg.run.horizon,
        extract_profiles: profiles,
    }
}

fn terrace(lab: &Lab, profiles: bool) -> Terrace {
    build_terrace(
        &lab.table,
        &lab.cfg.run,
        &lab.lattice,
        &opts(lab, profiles),
        MergePolicy::LeftmostFirst,
        &mut FrontCache::default(),
    )
    .unwrap()
}

fn c1() -> Outcome {
    let lab = Lab::new(&common::cubic(1, 0.3, 50));
    let oracle = Shooting::cubic(0.3).c;
    let c = front(&lab, false).speed.value;
    let ok = (c - oracle).abs() <= 0.02 * oracle && (c - CLOSED_FORM).abs() <= 0.02 * CLOSED_FORM;
    (
        ok,
        format!("c = {c:.6}, shooting {oracle:.6}, closed form {CLOSED_FORM:.6}"),
    )
}

fn c2() -> Outcome {
    let lab = Lab::new(&common::cubic(1, 0.5, 50));
    let c = front(&lab, false).speed.value;
    (c.abs() <= 5e-3, format!("|c| = {:.2e}", c.abs()))
}

const POTENTIAL: &str = "[problem]\ndimension = 1\n[problem.reaction]\n\
                         base = { kind = \"coefficients\", coefficients = [0.0, -1.0] }\n\
                         modulation = [{ amplitude = 0.5, wave = [1, 0], g = [0.0, 1.0] }]\n\
                         [grid]\npoints_per_period = 50\n";

fn c3() -> Outcome {
    let lab = Lab::new(&common::cubic(1, 0.3, 20));
    let lz = lab.lattice.zero().eigenvalue;
    let hetero = Lab::new(POTENTIAL);
    let (l, _) = principal_eigenpair(&hetero.cell, &[0.0; 50]).unwrap();
    let oracle = dense_top_eigenvalue(|x| -1.0 + 0.5 * (2.0 * std::f64::consts::PI * x).cos(), 50);
    let ok = (lz + 0.3).abs() <= 1e-10 && (l - oracle).abs() <= 1e-8;
    (
        ok,
        format!(
            "lambda(0) + a = {:.1e}, dense gap {:.1e}",
            lz + 0.3,
            (l - oracle).abs()
        ),
    )
}

fn c4() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, text) in [
        ("no-merge", common::tristable_no_merge(600.0)),
        ("merge", common::tristable_merge(600.0)),
        ("double descent", common::double_descent(600.0)),
    ] {
        let lab = Lab::new(&text);
        let m = lab.lattice.stable.len() - 1;
        let t = terrace(&lab, false);
        let merges: Vec<_> = t.merges.iter().filter(|e| e.merged.is_some()).collect();
        ok &= t.speeds().windows(2).all(|w| w[0] <= w[1]) && merges.len() < m;
        for ev in &merges {
            let c = ev.merged.unwrap();
            let [lo, hi] = ev.bracket;
            // The bracket widens [c_J, c_{J-1}] by two standard errors on each side.
            ok &= lo <= ev.c_lower
                && ev.c_lower - lo <= 1e-3
                && hi >= ev.c_upper
                && hi - ev.c_upper <= 1e-3;
            ok &= (lo..=hi).contains(&c);
        }
        notes.push(format!(
            "{name}: K = {}, {} merges (M = {m})",
            t.fronts.len(),
            merges.len()
        ));
    }
    (ok, notes.join("; "))
}

fn c5() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for (name, text) in [
        ("bistable", common::cubic(1, 0.3, 20)),
        ("no-merge", common::tristable_no_merge(600.0)),
        ("merge", common::tristable_merge(600.0)),
    ] {
        let lab = Lab::new(&text);
        let t = terrace(&lab, false);
        let obs = observe_terrace_from_cauchy(
            &lab.table,
            &lab.cfg.run,
            &lab.lattice,
            [1, 0],
            lab.cfg.run.horizon,
        )
        .unwrap();
        let cmp = compare_terraces(
            &t.summary(),
            &obs.summary(),
            lab.cfg.run.tolerances.profile_match_tol,
        );
        ok &= cmp.same_k && cmp.same_platforms && cmp.speed_match.iter().all(|&m| m);
        notes.push(format!(
            "{name} {}",
            if cmp.passed { "agrees" } else { "differs" }
        ));
    }
    let lab = Lab::new(&common::double_descent(600.0));
    let inv = merge_order_invariance_check(
        &lab.table,
        &lab.cfg.run,
        &lab.lattice,
        &opts(&lab, false),
        &mut FrontCache::default(),
    )
    .unwrap();
    ok &= inv.passed;
    notes.push(format!(
        "merge order {}",
        if inv.passed { "invariant" } else { "dependent" }
    ));
    (ok, notes.join(", "))
}

fn c6() -> Outcome {
    let lab = Lab::new(&common::cubic(2, 0.3, 10));
    let setup = SpreadSetup {
        radius: 8.0,
        half_width: 66,
        times: vec![200.0],
    };
    let run = spreading_run(&lab.cell, &lab.cfg.run, &lab.lattice, &setup).unwrap();
    let disk = ShapePolygon::circumscribed(720, CLOSED_FORM);
    let m = shape_match(&run.shapes[0], &disk, 0.1);
    (
        m.passed,
        format!(
            "t = 200: radius ratio in [{:.4}, {:.4}]",
            m.min_ratio, m.max_ratio
        ),
    )
}

fn c7() -> Outcome {
    let one = ratio(1, 1);
    let zero = ratio(0, 1);
    let e_hat = [ratio(3, 5), ratio(4, 5)];
    let field = SpeedField::synthetic([
        ([one.clone(), zero.clone()], one.clone()),
        ([zero.clone(), one.clone()], one.clone()),
        (e_hat.clone(), ratio(2, 1)),
    ]);
    let w = wulff_shape(&field).unwrap();
    let support = w.support(&e_hat).unwrap();
    let touches = supporting_hyperplane_test(&w, &e_hat, &ratio(2, 1), &zero);
    let i = w
        .vertices
        .iter()
        .position(|v| *v == [one.clone(), one.clone()]);
    let angle = i.map(|i| w.to_f64().interior_angles()[i]);
    let corner = angle.is_some_and(|a| a < std::f64::consts::PI - 1e-9);
    let ok = !touches && support == ratio(7, 5) && corner;
    (
        ok,
        format!("max x.e = {support}, supporting {touches}, angle at (1,1) {angle:?}"),
    )
}

fn c8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let field = random_field(&mut rng, 360, 0.5, 2.0);
        let w = wulff_shape(&field).unwrap();
        for _ in 0..72 {
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let e = [th.cos(), th.sin()];
            let fg = freidlin_gartner(&field, &e).unwrap();
            worst = worst.max(w.boundary_distance([fg.value * e[0], fg.value * e[1]]));
        }
    }
    let mut equal = 0;
    for family in 0..20 {
        let ys: Vec<_> = (0..2 + family % 4)
            .map(|_| random_upsilon(&mut rng))
            .collect();
        if cumulative_hulls(&ys) == minkowski_union_hulls(&ys, 4) {
            equal += 1;
        }
    }
    let ok = worst <= 1e-9 && equal == 20;
    (
        ok,
        format!("FG boundary gap {worst:.1e}, hull recursion exact on {equal}/20 families"),
    )
}

fn c9() -> Outcome {
    let mut ok = true;
    let mut count = 0;
    let mut min_margin = f64::INFINITY;
    for text in [
        common::cubic(1, 0.3, 20),
        common::cubic(2, 0.3, 6),
        common::tristable_no_merge(200.0),
        common::tristable_merge(200.0),
        common::double_descent(200.0),
    ] {
        let lab = Lab::new(&text);
        for s in &lab.lattice.stable {
            let r = perturbation_residual(&lab.cell, s, &[0.0, 1.0, 5.0, 20.0, 100.0], 1e-4);
            ok &= r.passed && r.margin > 0.0;
            min_margin = min_margin.min(r.margin);
            count += 1;
        }
    }
    let lab = Lab::new(&common::cubic(1, 0.3, 50));
    let t = terrace(&lab, true);
    let plats: Vec<_> = t
        .platform_indices
        .iter()
        .map(|&i| &lab.lattice.stable[i])
        .collect();
    let params = GlueParams {
        eps: vec![0.05],
        eta: vec![1e-3],
        tol: 1e-3,
        smoothing: 0.4,
        times: vec![1000.0, 2000.0],
    };
    let g = glued_supersolution_residual(&lab.table, &t.fronts, &plats, &params).unwrap();
    ok &= g.passed && g.min_residual >= -1e-3;
    (
        ok,
        format!(
            "{count} stable states certified (min margin {min_margin:.1e}); glue residual {:.2e}",
            g.min_residual
        ),
    )
}

const HETERO_1D: &str = "[problem]\ndimension = 1\n[problem.diffusion]\n\
                         a11 = { constant = 1.0, terms = [{ amplitude = 0.4, wave = [1, 0] }] }\n\
                         [problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }\n\
                         modulation = [{ amplitude = 0.1, wave = [1, 0], g = [0.0, 1.0, -1.0] }]\n\
                         [grid]\npoints_per_period = 16\n";

fn c10() -> Outcome {
    let cfg = Config::from_toml(HETERO_1D).unwrap();
    let p = PeriodicProblem::new(&cfg.problem, 16).unwrap();
    let table = CellTable::new(&p, Grid::new(1, 16, 4));
    let dt = time_step(&table, &RunConfig::default(), (0.0, 1.0));
    let ev = Evolver::new(&table, Domain::Periodic { periods: [4, 1] }, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut violation: f64 = 0.0;
    for _ in 0..50 {
        let mut u = Field::from_fn(&ev.mesh, |_| 0.0);
        let mut v = u.clone();
        for (a, b) in u.values.iter_mut().zip(&mut v.values) {
            *a = rng.gen_range(0.0..1.0);
            *b = rng.gen_range(*a..=1.0);
        }
        violation = violation.max(comparison_check(&ev, u, v, 3.0, 1e-10).max_violation);
    }

    let ev = Evolver::new(&table, Domain::Periodic { periods: [4, 1] }, 0.01);
    let g = |n: [i64; 2]| 0.5 + 0.45 * ((n[0].rem_euclid(64) * 7) as f64 * 0.37).sin();
    let mut a = Field::from_fn(&ev.mesh, g);
    let mut b = Field::from_fn(&ev.mesh, |n| g([n[0] - 16, n[1]]));
    let mut scratch = Vec::new();
    for _ in 0..40 {
        ev.step(&mut a, &mut scratch);
        ev.step(&mut b, &mut scratch);
    }
    let shift = (0..64).fold(0.0_f64, |m, i| {
        m.max((b.values[(i + 16) % 64] - a.values[i]).abs())
    });

    let oracle = Shooting::cubic(0.3).c;
    let err: Vec<f64> = [10, 20, 40]
        .iter()
        .map(|&ppp| {
            (front(&Lab::new(&common::cubic(1, 0.3, ppp)), false)
                .speed
                .value
                - oracle)
                .abs()
        })
        .collect();
    let (r1, r2) = (err[0] / err[1], err[1] / err[2]);
    let second_order = [r1, r2].iter().all(|r| (3.0..=5.0).contains(r));
    let ok = violation <= 1e-10 && shift <= 1e-13 && second_order;
    (
        ok,
        format!("comparison violation {violation:.1e}, shift defect {shift:.1e}, error ratios {r1:.2}, {r2:.2}"),
    )
}

#[test]
fn acceptance() {
    let criteria: [(fn() -> Outcome, Duration); 10] = [
        (c1, Duration::from_secs(60)),
        (c2, Duration::from_secs(60)),
        (c3, Duration::from_secs(10)),
        (c4, Duration::from_secs(600)),
        (c5, Duration::from_secs(600)),
        (c6, Duration::from_secs(1800)),
        (c7, Duration::from_secs(1)),
        (c8, Duration::from_secs(10)),
        (c9, Duration::from_secs(300)),
        (c10, Duration::from_secs(600)),
    ];
    let results: Vec<(bool, String)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|&(check, budget)| {
                s.spawn(move || {
                    let start = Instant::now();
                    let out = catch_unwind(AssertUnwindSafe(check));
                    let took = start.elapsed();
                    match out {
                        Ok((ok, note)) => (
                            ok && took <= budget,
                            format!(
                                "{note} [{:.1} s of {} s]",
                                took.as_secs_f64(),
                                budget.as_secs()
                            ),
                        ),
                        Err(_) => (false, "panicked".to_string()),
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    // Written to the raw handle so the lines show up without `--nocapture`.
    let mut err = std::io::stderr().lock();
    writeln!(err).unwrap();
    for (i, (ok, note)) in results.iter().enumerate() {
        let verdict = if *ok { "PASS" } else { "FAIL" };
        writeln!(err, "criterion {}: {verdict} {note}", i + 1).unwrap();
    }
    drop(err);
    let failed: Vec<usize> = (1..=10).filter(|i| !results[i - 1].0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
