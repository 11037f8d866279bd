mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terracelab::evolve::{comparison_check, Bounds, Clamp, Domain, Evolver, Field};
use terracelab::problem::{time_step, CellTable, Config, Grid, PeriodicProblem, RunConfig};
use terracelab::spectral::find_steady_state;

fn table(text: &str, extent: usize) -> CellTable {
    let cfg = Config::from_toml(text).unwrap();
    let ppp = cfg.grid.points_per_period;
    let p = PeriodicProblem::new(&cfg.problem, ppp).unwrap();
    CellTable::new(&p, Grid::new(p.dimension(), ppp, extent))
}

const HEAT: &str = "[problem]\ndimension = 1\n[problem.reaction]\n\
                    base = { kind = \"coefficients\", coefficients = [0.0] }\n[grid]\npoints_per_period = 50\n";

const HETERO_1D: &str = "[problem]\ndimension = 1\n[problem.diffusion]\n\
                         a11 = { constant = 1.0, terms = [{ amplitude = 0.4, wave = [1, 0] }] }\n\
                         [problem.reaction]\nbase = { kind = \"cubic\", a = 0.3 }\n\
                         modulation = [{ amplitude = 0.1, wave = [1, 0], g = [0.0, 1.0, -1.0] }]\n\
                         [grid]\npoints_per_period = 16\n";

const HETERO_2D: &str = "[problem]\ndimension = 2\n[problem.diffusion]\n\
                         a11 = { constant = 1.0, terms = [{ amplitude = 0.4, wave = [1, 1] }] }\n\
                         a22 = { constant = 1.0, terms = [{ amplitude = 0.2, wave = [0, 1] }] }\n\
                         [problem.reaction]\nbase = { kind = \"cubic\", a = 0.4 }\n\
                         modulation = [{ amplitude = 0.1, wave = [1, 2], g = [0.0, 1.0, -1.0] }]\n\
                         [grid]\npoints_per_period = 8\n";

fn run_steps(ev: &Evolver, f: &mut Field, n: usize) {
    let mut scratch = Vec::new();
    for _ in 0..n {
        ev.step(f, &mut scratch);
    }
}

#[test]
fn implicit_heat_step_decay_factor() {
    let t = table(HEAT, 1);
    let dt = 0.01;
    let ev = Evolver::new(&t, Domain::Periodic { periods: [1, 1] }, dt);
    let grid = t.grid;
    let mut f = Field::from_fn(&ev.mesh, |n| {
        (2.0 * std::f64::consts::PI * grid.point(n)[0]).cos()
    });
    let u0 = f.values.clone();
    run_steps(&ev, &mut f, 1);
    let dx = grid.dx();
    let symbol = 4.0 / (dx * dx) * (std::f64::consts::PI * dx).sin().powi(2);
    let exact_discrete = 1.0 / (1.0 + dt * symbol);
    let continuum = 1.0 / (1.0 + 4.0 * std::f64::consts::PI.powi(2) * dt);
    for (a, b) in f.values.iter().zip(&u0) {
        if b.abs() > 0.1 {
            let factor = a / b;
            assert!(
                (factor - exact_discrete).abs() < 1e-12,
                "{factor} vs {exact_discrete}"
            );
            assert!(
                (factor - continuum).abs() < 2e-3 * continuum,
                "{factor} vs {continuum}"
            );
        }
    }
}

#[test]
fn discrete_steady_state_is_preserved() {
    let t = table(HETERO_1D, 4);
    let cell = table(HETERO_1D, 1);
    let p = find_steady_state(&cell, &[1.0; 16], 1e-13, 1e-4).unwrap();
    let ev = Evolver::new(&t, Domain::Periodic { periods: [4, 1] }, 0.01);
    let mut f = Field::from_cell(&ev.mesh, &p.values);
    let r0 = ev.residual(&f).iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    let mut scratch = Vec::new();
    let mut prev = r0;
    for _ in 0..100 {
        ev.step(&mut f, &mut scratch);
        let r = ev.residual(&f).iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        assert!(r - prev <= 1e-12, "residual grew from {prev:e} to {r:e}");
        prev = r;
    }
    let moved = f.values.iter().enumerate().fold(0.0_f64, |m, (i, u)| {
        m.max((u - p.values[t.grid.phase(f.node(i))]).abs())
    });
    assert!(moved < 1e-10, "{moved:e}");
}

#[test]
fn identical_data_never_separate() {
    let t = table(HETERO_1D, 4);
    let dt = time_step(&t, &RunConfig::default(), (0.0, 1.0));
    let ev = Evolver::new(&t, Domain::Periodic { periods: [4, 1] }, dt);
    let u = Field::from_fn(&ev.mesh, |n| ((n[0] % 7) as f64) / 7.0);
    let r = comparison_check(&ev, u.clone(), u, 5.0, 1e-10);
    assert_eq!(r.max_violation, 0.0);
    assert!(r.passed);
}

#[test]
fn ordered_bumps_stay_ordered() {
    let t = table(&common::cubic(1, 0.3, 20), 6);
    let dt = time_step(&t, &RunConfig::default(), (0.0, 1.0));
    let ev = Evolver::new(&t, Domain::Periodic { periods: [6, 1] }, dt);
    let grid = t.grid;
    let bump = |n: [i64; 2]| {
        let x = grid.point(n)[0] - 3.0;
        (-(x * x)).exp()
    };
    let u = Field::from_fn(&ev.mesh, |n| 0.3 * bump(n));
    let v = Field::from_fn(&ev.mesh, |n| 0.6 * bump(n));
    let r = comparison_check(&ev, u, v, 20.0, 1e-10);
    assert!(r.max_violation <= 1e-10, "{}", r.max_violation);
}

#[test]
fn random_ordered_pairs_stay_ordered() {
    let tol = RunConfig::default().tolerances.comparison_tol;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (text, periods) in [(HETERO_1D, [4, 1]), (HETERO_2D, [2, 2])] {
        let t = table(text, 4);
        let dt = time_step(&t, &RunConfig::default(), (0.0, 1.0));
        let ev = Evolver::new(&t, Domain::Periodic { periods }, dt);
        let seeds = if t.grid.dimension == 1 { 50 } else { 10 };
        for seed in 0..seeds {
            let lower: Vec<f64> = (0..ev.mesh.len())
                .map(|_| rng.gen_range(0.0..1.0))
                .collect();
            let upper: Vec<f64> = lower.iter().map(|&a| rng.gen_range(a..=1.0)).collect();
            let mut u = Field::from_fn(&ev.mesh, |_| 0.0);
            let mut v = u.clone();
            u.values = lower;
            v.values = upper;
            let r = comparison_check(&ev, u, v, 3.0, tol);
            assert!(r.passed, "seed {seed}: violation {:e}", r.max_violation);
        }
    }
}

#[test]
fn periodic_shift_equivariance() {
    for (text, periods, shift) in [(HETERO_1D, [4, 1], [1i64, 0]), (HETERO_2D, [3, 3], [1, 2])] {
        let t = table(text, 4);
        let ev = Evolver::new(&t, Domain::Periodic { periods }, 0.01);
        let ppp = t.grid.points_per_period as i64;
        let [n0, n1] = ev.mesh.shape;
        let wrap = |n: [i64; 2]| [n[0].rem_euclid(n0 as i64), n[1].rem_euclid(n1 as i64)];
        let g = |n: [i64; 2]| {
            let m = wrap(n);
            0.5 + 0.45 * ((m[0] * 7 + m[1] * 3) as f64 * 0.37).sin()
        };
        let h = [shift[0] * ppp, shift[1] * ppp];
        let mut a = Field::from_fn(&ev.mesh, g);
        let mut b = Field::from_fn(&ev.mesh, |n| g([n[0] - h[0], n[1] - h[1]]));
        run_steps(&ev, &mut a, 40);
        run_steps(&ev, &mut b, 40);
        let idx = |n: [i64; 2]| {
            let m = wrap(n);
            m[1] as usize * n0 + m[0] as usize
        };
        let mut worst: f64 = 0.0;
        for i in 0..a.values.len() {
            let n = a.node(i);
            worst = worst.max((b.values[idx([n[0] + h[0], n[1] + h[1]])] - a.values[i]).abs());
        }
        assert!(worst <= 1e-13, "dimension {}: {worst:e}", t.grid.dimension);
    }
}

#[test]
fn invariant_region_and_bare_run() {
    let t = table(HETERO_2D, 4);
    let dt = time_step(&t, &RunConfig::default(), (0.0, 1.0));
    let ev = Evolver::new(&t, Domain::Periodic { periods: [2, 2] }, dt);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut f = Field::from_fn(&ev.mesh, |_| 0.0);
    for v in &mut f.values {
        *v = rng.gen_range(0.0..1.0);
    }
    let bounds = Bounds {
        lo: 0.0,
        hi: 1.0,
        eps: 1e-8,
    };
    let summary = ev.run(&mut f, 10.0, 1.0, Some(bounds), &mut []).unwrap();
    assert!(summary.steps > 0);
    assert!((f.t - summary.steps as f64 * dt).abs() < 1e-9);
    assert!(f.values.iter().all(|&u| (-1e-8..=1.0 + 1e-8).contains(&u)));
}

#[test]
fn step_datum_stays_monotone_along_the_line() {
    let t = table(&common::cubic(1, 0.3, 20), 20);
    let dt = time_step(&t, &RunConfig::default(), (0.0, 1.0));
    let ppp = t.grid.points_per_period;
    let ev = Evolver::new(
        &t,
        Domain::Line {
            start: -10,
            periods: 20,
            clamp: Clamp::Sides {
                low: vec![1.0; ppp],
                high: vec![0.0; ppp],
            },
        },
        dt,
    );
    let grid = t.grid;
    let mut f = Field::from_fn(
        &ev.mesh,
        |n| if grid.point(n)[0] <= 0.0 { 1.0 } else { 0.0 },
    );
    let mut scratch = Vec::new();
    for _ in 0..(10.0 / dt) as usize {
        ev.step(&mut f, &mut scratch);
        assert!(f.values.windows(2).all(|w| w[1] <= w[0] + 1e-14));
    }
}
