mod common;

use std::f64::consts::PI;

use common::{random_field, random_upsilon, Lab};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use terracelab::terrace::{build_terrace_from, FrontCache, MergePolicy, TerraceOptions};
use terracelab::wulff::{
    c_of_p, corner_demo, cumulative_hulls, freidlin_gartner, hausdorff, intersect_half_planes,
    minkowski_union_hulls, ratio, spreading_shape_recursion, supporting_hyperplane_test, upsilon,
    wulff_shape, ShapePolygon, SpeedField, UpsilonKind,
};

fn q(n: i64, d: i64) -> BigRational {
    ratio(n, d)
}

fn axes() -> [[BigRational; 2]; 4] {
    [
        [q(1, 1), q(0, 1)],
        [q(0, 1), q(1, 1)],
        [q(-1, 1), q(0, 1)],
        [q(0, 1), q(-1, 1)],
    ]
}

#[test]
fn constant_speed_gives_the_circumscribed_polygon() {
    let field = SpeedField::from_fn(360, |_| 2.0);
    let w = wulff_shape(&field).unwrap();
    assert_eq!(w.vertices.len(), 360);
    assert!(!w.unbounded && w.contains_origin);
    // Vertices of the regular 360-gon around the radius-2 disk sit at 2 sec(pi/360).
    let bound = 2.0 * (1.0 / (PI / 360.0).cos() - 1.0);
    for v in &w.vertices {
        let r = v[0].hypot(v[1]);
        assert!(r >= 2.0 - 1e-12 && r - 2.0 <= bound + 1e-12, "{r}");
    }
    let reference = ShapePolygon::circumscribed(360, 2.0);
    assert!(hausdorff(&w, &reference) <= 1e-9);
}

#[test]
fn too_few_directions_is_an_error() {
    let field =
        SpeedField::synthetic([([q(1, 1), q(0, 1)], q(1, 1)), ([q(0, 1), q(1, 1)], q(1, 1))]);
    assert!(wulff_shape(&field).is_err());
}

#[test]
fn corner_demo_values() {
    let d = corner_demo().unwrap();
    // (1, 1) is the farthest point of the square corner along (3, 4)/5.
    assert_eq!(d.support, "7/5");
    assert_eq!(d.query_speed, "2");
    assert!(!d.supporting);
    assert_eq!(d.fg_value, "5/4");
    assert_eq!(d.corner, ["1".to_string(), "1".to_string()]);
    assert!((d.corner_angle - PI / 2.0).abs() < 1e-12);
    assert!(!d.query_active);
}

#[test]
fn inactive_direction_leaves_the_shape_unchanged() {
    let [e1, e2, m1, m2] = axes();
    let base = vec![
        (e1.clone(), q(1, 1)),
        (e2.clone(), q(1, 1)),
        (m1.clone(), q(1, 1)),
        (m2.clone(), q(1, 1)),
    ];
    let mut with = base.clone();
    with.push(([q(3, 5), q(4, 5)], q(2, 1)));
    let a = wulff_shape(&SpeedField::synthetic(base.clone())).unwrap();
    let b = wulff_shape(&SpeedField::synthetic(with.clone())).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, intersect_half_planes(&base, &q(1000, 1)));
    // Slower along (3, 4)/5 the constraint cuts the corner off.
    with.last_mut().unwrap().1 = q(6, 5);
    let c = wulff_shape(&SpeedField::synthetic(with)).unwrap();
    assert_ne!(a, c);
    assert!(supporting_hyperplane_test(
        &c,
        &[q(3, 5), q(4, 5)],
        &q(6, 5),
        &q(0, 1)
    ));
    assert!(c.to_f64().area() < a.to_f64().area());
}

#[test]
fn freidlin_gartner_examples() {
    let field = SpeedField::from_fn(360, |_| 0.7);
    for th in [0.0, 0.3, 2.0, 5.5] {
        let w = freidlin_gartner(&field, &[f64::cos(th), f64::sin(th)]).unwrap();
        assert!((w.value - 0.7).abs() <= 0.7 * (1.0 / (PI / 360.0).cos() - 1.0) + 1e-12);
    }
    let three = SpeedField::synthetic([
        ([q(1, 1), q(0, 1)], q(1, 1)),
        ([q(0, 1), q(1, 1)], q(1, 1)),
        ([q(3, 5), q(4, 5)], q(2, 1)),
    ]);
    let w = freidlin_gartner(&three, &[q(3, 5), q(4, 5)]).unwrap();
    assert_eq!(w.value, q(5, 4));
    assert_eq!(w.argmin, 1);
    let single = SpeedField::synthetic([([q(1, 1), q(0, 1)], q(3, 1))]);
    assert_eq!(
        freidlin_gartner(&single, &[q(1, 1), q(0, 1)])
            .unwrap()
            .value,
        q(3, 1)
    );
    assert!(freidlin_gartner(&single, &[q(-1, 1), q(0, 1)]).is_err());
}

#[test]
fn supporting_hyperplanes_of_a_square() {
    let square = wulff_shape(&SpeedField::synthetic(
        axes().into_iter().map(|d| (d, q(1, 1))),
    ))
    .unwrap();
    for d in axes() {
        assert!(supporting_hyperplane_test(&square, &d, &q(1, 1), &q(0, 1)));
        assert!(!supporting_hyperplane_test(
            &square,
            &d,
            &q(11, 10),
            &q(0, 1)
        ));
        assert!(supporting_hyperplane_test(
            &square,
            &d,
            &q(11, 10),
            &q(1, 5)
        ));
    }
    assert!(!supporting_hyperplane_test(
        &ShapePolygon::<BigRational>::from_vertices(vec![]),
        &axes()[0],
        &q(0, 1),
        &q(1, 1)
    ));
}

#[test]
fn upsilon_cases() {
    let disk = upsilon(&SpeedField::from_fn(90, |_| 1.0), &1e-3).unwrap();
    assert_eq!(disk.kind, UpsilonKind::Positive);
    assert_eq!(disk.shape.vertices.len(), 90);
    let neg = upsilon(&SpeedField::from_fn(90, |th| th.cos()), &1e-3).unwrap();
    assert_eq!(neg.kind, UpsilonKind::Degenerate);
    assert_eq!(neg.shape, ShapePolygon::origin());
    let band = upsilon(
        &SpeedField::from_fn(90, |th| if th == 0.0 { 5e-4 } else { 1.0 }),
        &1e-3,
    )
    .unwrap();
    assert_eq!(band.kind, UpsilonKind::Indeterminate);
    assert_eq!(band.shape, ShapePolygon::origin());
    let zero_tol = upsilon(&SpeedField::from_fn(8, |_| 0.0), &0.0).unwrap();
    assert_eq!(zero_tol.kind, UpsilonKind::Degenerate);
}

#[test]
fn hull_and_recursive_shapes_agree_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for family in 0..20 {
        let n = 2 + family % 4;
        let ys: Vec<ShapePolygon<BigRational>> = (0..n).map(|_| random_upsilon(&mut rng)).collect();
        let hulls = cumulative_hulls(&ys);
        let rec = minkowski_union_hulls(&ys, 4);
        assert_eq!(hulls, rec, "family {family}");
        let (w, report) = spreading_shape_recursion(&ys, 4, 0.0).unwrap();
        assert_eq!(w, hulls);
        assert!(report.vertex_counts_match && report.max_vertex_gap == 0.0);
        for k in 1..w.len() {
            // Each shape contains the previous one and the new upsilon.
            for v in w[k - 1].vertices.iter().chain(&ys[k].vertices) {
                assert!(w[k].to_f64().distance([v[0].to_f(), v[1].to_f()]) == 0.0);
            }
        }
    }
}

trait ToF {
    fn to_f(&self) -> f64;
}

impl ToF for BigRational {
    fn to_f(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap()
    }
}

#[test]
fn freidlin_gartner_points_lie_on_the_boundary() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..5 {
        let field = random_field(&mut rng, 360, 0.5, 2.0);
        let w = wulff_shape(&field).unwrap();
        for k in 0..36 {
            let th = 2.0 * PI * (k as f64 + 0.37) / 36.0;
            let e = [th.cos(), th.sin()];
            let fg = freidlin_gartner(&field, &e).unwrap();
            let x = [fg.value * e[0], fg.value * e[1]];
            assert!(w.boundary_distance(x) <= 1e-9, "{}", w.boundary_distance(x));
        }
    }
}

fn line_terraces(lab: &Lab, top: usize) -> Vec<terracelab::terrace::Terrace> {
    let mut cache = FrontCache::default();
    [[1, 0], [-1, 0]]
        .into_iter()
        .map(|direction| {
            let opts = TerraceOptions {
                direction,
                horizon: lab.cfg.run.horizon,
                extract_profiles: false,
            };
            build_terrace_from(
                &lab.table,
                &lab.cfg.run,
                &lab.lattice,
                &opts,
                MergePolicy::LeftmostFirst,
                &mut cache,
                top,
            )
            .unwrap()
        })
        .collect()
}

fn consistency(lab: &Lab) -> terracelab::wulff::ConsistencyReport {
    let full = line_terraces(lab, 0);
    let from_middle = line_terraces(lab, 1);
    let sub: Vec<Vec<_>> = (0..2)
        .map(|d| vec![full[d].clone(), from_middle[d].clone()])
        .collect();
    terracelab::wulff::speed_consistency_check(&full, &sub).unwrap()
}

#[test]
fn speeds_through_states_without_merge() {
    let lab = Lab::new(&common::tristable_no_merge(200.0));
    let full = line_terraces(&lab, 0);
    let c1 = c_of_p(&full, 1).unwrap();
    let c2 = c_of_p(&full, 2).unwrap();
    for d in 0..2 {
        assert_eq!(c1.samples[d].speed, full[d].fronts[0].speed.value);
        assert_eq!(c2.samples[d].speed, full[d].fronts[1].speed.value);
        assert!(c1.samples[d].speed < c2.samples[d].speed);
    }
    assert_eq!(c1.samples[1].direction, [-1.0, 0.0]);
    assert!(c_of_p(&full, 0).is_err());
    let r = consistency(&lab);
    assert!(r.passed, "{r:?}");
}

#[test]
fn speeds_through_a_skipped_state() {
    let lab = Lab::new(&common::tristable_merge(200.0));
    let full = line_terraces(&lab, 0);
    let (c1, c2) = (c_of_p(&full, 1).unwrap(), c_of_p(&full, 2).unwrap());
    for d in 0..2 {
        assert_eq!(c1.samples[d].speed, c2.samples[d].speed);
    }
    let r = consistency(&lab);
    assert!(r.passed, "{r:?}");
    assert!(r
        .items
        .iter()
        .any(|i| i.kind == terracelab::wulff::ConsistencyKind::SkippedState));
}
