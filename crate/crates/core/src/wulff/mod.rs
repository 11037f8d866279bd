//! Planar geometry of direction-indexed speed fields: Wulff shapes,
//! Freidlin-Gärtner speeds, spreading shapes and supporting hyperplanes.

mod hull;
mod speeds;

pub use hull::{
    convex_hull, cumulative_hulls, jarvis_hull, minkowski_sum, minkowski_union_hulls,
    spreading_shape_recursion, RecursionReport,
};
pub use speeds::{
    c_of_p, speed_consistency_check, ConsistencyItem, ConsistencyKind, ConsistencyReport,
};

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive};
use serde::Serialize;

use crate::error::{Error, Result};

/// Arithmetic used by the geometry: `f64` for measured data, `BigRational`
/// for exact synthetic fields.
pub trait Scalar: Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive {
    /// Turns whose cross product is at most this, for adjacent edges with
    /// squared lengths summing to `scale2`, are treated as straight.
    fn turn_tol(scale2: &Self) -> Self;

    fn to_f(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn turn_tol(scale2: &Self) -> Self {
        1e-12 * scale2
    }
}

impl Scalar for BigRational {
    fn turn_tol(_: &Self) -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
}

/// Exact rational `n / d`.
pub fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub type Pt<T> = [T; 2];

pub(crate) fn dot<T: Scalar>(a: &Pt<T>, b: &Pt<T>) -> T {
    a[0].clone() * b[0].clone() + a[1].clone() * b[1].clone()
}

pub(crate) fn sub<T: Scalar>(a: &Pt<T>, b: &Pt<T>) -> Pt<T> {
    [a[0].clone() - b[0].clone(), a[1].clone() - b[1].clone()]
}

pub(crate) fn add<T: Scalar>(a: &Pt<T>, b: &Pt<T>) -> Pt<T> {
    [a[0].clone() + b[0].clone(), a[1].clone() + b[1].clone()]
}

pub(crate) fn scale<T: Scalar>(k: &T, a: &Pt<T>) -> Pt<T> {
    [k.clone() * a[0].clone(), k.clone() * a[1].clone()]
}

/// `(b - a) x (c - a)`.
pub(crate) fn cross<T: Scalar>(a: &Pt<T>, b: &Pt<T>, c: &Pt<T>) -> T {
    let u = sub(b, a);
    let v = sub(c, a);
    u[0].clone() * v[1].clone() - u[1].clone() * v[0].clone()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Synthetic,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedSample<T> {
    pub direction: Pt<T>,
    pub speed: T,
    pub se: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedField<T> {
    pub samples: Vec<SpeedSample<T>>,
    pub provenance: Provenance,
}

impl<T: Scalar> SpeedField<T> {
    pub fn synthetic(samples: impl IntoIterator<Item = (Pt<T>, T)>) -> Self {
        Self {
            samples: samples
                .into_iter()
                .map(|(direction, speed)| SpeedSample {
                    direction,
                    speed,
                    se: 0.0,
                })
                .collect(),
            provenance: Provenance::Synthetic,
        }
    }

    pub fn scaled(&self, k: &T) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.speed = k.clone() * s.speed.clone();
        }
        out
    }
}

impl SpeedField<f64> {
    /// `c(theta)` sampled at `n` equally spaced angles.
    pub fn from_fn(n: usize, c: impl Fn(f64) -> f64) -> Self {
        Self {
            samples: (0..n)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    SpeedSample {
                        direction: [th.cos(), th.sin()],
                        speed: c(th),
                        se: 0.0,
                    }
                })
                .collect(),
            provenance: Provenance::Synthetic,
        }
    }
}

/// Convex polygon with counterclockwise vertices. A single vertex is a point,
/// two vertices a segment, none the empty set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapePolygon<T> {
    pub vertices: Vec<Pt<T>>,
    pub contains_origin: bool,
    /// Clipped by the bounding box rather than by sampled half-planes.
    pub unbounded: bool,
}

impl<T: Scalar> ShapePolygon<T> {
    pub fn from_vertices(vertices: Vec<Pt<T>>) -> Self {
        let contains_origin = contains(&vertices, &[T::zero(), T::zero()]);
        Self {
            vertices,
            contains_origin,
            unbounded: false,
        }
    }

    pub fn origin() -> Self {
        Self::from_vertices(vec![[T::zero(), T::zero()]])
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `max x.e` over the shape.
    pub fn support(&self, e: &Pt<T>) -> Option<T> {
        let mut best: Option<T> = None;
        for v in &self.vertices {
            let s = dot(v, e);
            if best.as_ref().is_none_or(|b| s > *b) {
                best = Some(s);
            }
        }
        best
    }

    pub fn scaled(&self, k: &T) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| scale(k, v)).collect(),
            contains_origin: self.contains_origin,
            unbounded: self.unbounded,
        }
    }

    pub fn to_f64(&self) -> ShapePolygon<f64> {
        ShapePolygon {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0].to_f(), v[1].to_f()])
                .collect(),
            contains_origin: self.contains_origin,
            unbounded: self.unbounded,
        }
    }
}

impl ShapePolygon<f64> {
    /// Regular `n`-gon circumscribed about the disk of radius `r`.
    pub fn circumscribed(n: usize, r: f64) -> Self {
        let field = SpeedField::from_fn(n, |_| r);
        wulff_shape(&field).expect("regular polygon")
    }

    pub fn area(&self) -> f64 {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return 0.0;
        }
        0.5 * (0..n)
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
    }

    /// Distance from `x` to the closed region (zero inside).
    pub fn distance(&self, x: [f64; 2]) -> f64 {
        if contains(&self.vertices, &x) {
            0.0
        } else {
            self.boundary_distance(x)
        }
    }

    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        let v = &self.vertices;
        match v.len() {
            0 => f64::INFINITY,
            1 => (x[0] - v[0][0]).hypot(x[1] - v[0][1]),
            n => (0..n)
                .map(|i| segment_distance(x, v[i], v[(i + 1) % n]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Interior angles in radians, in vertex order.
    pub fn interior_angles(&self) -> Vec<f64> {
        let v = &self.vertices;
        let n = v.len();
        if n < 3 {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                let (p, q, r) = (v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
                let a = [p[0] - q[0], p[1] - q[1]];
                let b = [r[0] - q[0], r[1] - q[1]];
                (a[0] * b[1] - a[1] * b[0])
                    .abs()
                    .atan2(a[0] * b[0] + a[1] * b[1])
            })
            .collect()
    }
}

fn segment_distance(x: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((x[0] - a[0]) * d[0] + (x[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (x[0] - a[0] - t * d[0]).hypot(x[1] - a[1] - t * d[1])
}

/// Closed convex polygon membership.
fn contains<T: Scalar>(v: &[Pt<T>], x: &Pt<T>) -> bool {
    match v.len() {
        0 => false,
        1 => v[0] == *x,
        2 => {
            cross(&v[0], &v[1], x).is_zero() && {
                let d = sub(&v[1], &v[0]);
                let s = dot(&sub(x, &v[0]), &d);
                s >= T::zero() && s <= dot(&d, &d)
            }
        }
        n => (0..n).all(|i| cross(&v[i], &v[(i + 1) % n], x) >= T::zero()),
    }
}

/// Set Hausdorff distance between two convex polygons.
pub fn hausdorff(a: &ShapePolygon<f64>, b: &ShapePolygon<f64>) -> f64 {
    let one = |p: &ShapePolygon<f64>, q: &ShapePolygon<f64>| {
        p.vertices
            .iter()
            .map(|&v| q.distance(v))
            .fold(0.0, f64::max)
    };
    one(a, b).max(one(b, a))
}

/// Drops repeated and straight-angle vertices of a cyclic vertex list.
pub(crate) fn simplify<T: Scalar>(mut v: Vec<Pt<T>>) -> Vec<Pt<T>> {
    v.dedup();
    while v.len() > 1 && v.first() == v.last() {
        v.pop();
    }
    if v.len() < 3 {
        return v;
    }
    loop {
        let n = v.len();
        if n < 3 {
            return v;
        }
        let drop = (0..n).find(|&i| {
            let (a, b, c) = (&v[(i + n - 1) % n], &v[i], &v[(i + 1) % n]);
            let (ab, bc) = (sub(b, a), sub(c, b));
            let local = dot(&ab, &ab) + dot(&bc, &bc);
            cross(a, b, c).abs() <= T::turn_tol(&local)
        });
        match drop {
            Some(i) => {
                v.remove(i);
            }
            None => return v,
        }
    }
}

/// Keeps the part of a convex polygon where `a.x <= c`.
fn clip<T: Scalar>(poly: &[Pt<T>], a: &Pt<T>, c: &T) -> Vec<Pt<T>> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let p = &poly[i];
        let q = &poly[(i + 1) % n];
        let fp = dot(a, p) - c.clone();
        let fq = dot(a, q) - c.clone();
        if fp <= T::zero() {
            out.push(p.clone());
        }
        let zero = T::zero();
        if (fp < zero && fq > zero) || (fp > zero && fq < zero) {
            let t = fp.clone() / (fp - fq);
            out.push(add(p, &scale(&t, &sub(q, p))));
        }
    }
    simplify(out)
}

/// Intersection of half-planes `{x.a <= c}` inside a bounding box of
/// half-width `bound`.
pub fn intersect_half_planes<T: Scalar>(planes: &[(Pt<T>, T)], bound: &T) -> ShapePolygon<T> {
    let b = bound.clone();
    let mut poly = vec![
        [-b.clone(), -b.clone()],
        [b.clone(), -b.clone()],
        [b.clone(), b.clone()],
        [-b.clone(), b.clone()],
    ];
    for (a, c) in planes {
        if poly.is_empty() {
            break;
        }
        poly = clip(&poly, a, c);
    }
    let edge = b.to_f() * (1.0 - 1e-9);
    let unbounded = poly
        .iter()
        .any(|v| v[0].to_f().abs() >= edge || v[1].to_f().abs() >= edge);
    let mut shape = ShapePolygon::from_vertices(poly);
    shape.unbounded = unbounded;
    shape
}

fn bounding_box<T: Scalar>(field: &SpeedField<T>) -> T {
    let mut m = T::one();
    for s in &field.samples {
        if s.speed.abs() > m {
            m = s.speed.abs();
        }
    }
    T::from_i32(1000).expect("small integer") * m
}

/// `W_c`: intersection of `{x.e <= c(e)}` over the sampled directions, an
/// outer approximation of the shape of the underlying continuous field.
pub fn wulff_shape<T: Scalar>(field: &SpeedField<T>) -> Result<ShapePolygon<T>> {
    if field.samples.len() < 3 {
        return Err(Error::Geometry(format!(
            "need at least 3 directions, got {}",
            field.samples.len()
        )));
    }
    if field.samples.iter().any(|s| !s.speed.to_f().is_finite()) {
        return Err(Error::Geometry("non-finite speed".into()));
    }
    let planes: Vec<(Pt<T>, T)> = field
        .samples
        .iter()
        .map(|s| (s.direction.clone(), s.speed.clone()))
        .collect();
    Ok(intersect_half_planes(&planes, &bounding_box(field)))
}

#[derive(Clone, Debug, Serialize)]
pub struct FgPoint<T> {
    pub value: T,
    /// Index of the minimizing sample.
    pub argmin: usize,
}

/// `w(e) = inf { c(e') / (e'.e) : e'.e > 0 }` over the samples.
pub fn freidlin_gartner<T: Scalar>(field: &SpeedField<T>, e: &Pt<T>) -> Result<FgPoint<T>> {
    let mut best: Option<FgPoint<T>> = None;
    for (i, s) in field.samples.iter().enumerate() {
        let d = dot(&s.direction, e);
        if d <= T::zero() {
            continue;
        }
        let v = s.speed.clone() / d;
        if best.as_ref().is_none_or(|b| v < b.value) {
            best = Some(FgPoint {
                value: v,
                argmin: i,
            });
        }
    }
    best.ok_or_else(|| Error::Geometry("no sampled direction with e'.e > 0".into()))
}

/// Whether `{x.e = c_e}` touches the shape: `max x.e >= c_e - tol`.
pub fn supporting_hyperplane_test<T: Scalar>(
    shape: &ShapePolygon<T>,
    e: &Pt<T>,
    c_e: &T,
    tol: &T,
) -> bool {
    shape
        .support(e)
        .is_some_and(|m| m >= c_e.clone() - tol.clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpsilonKind {
    Positive,
    Degenerate,
    /// Smallest speed inside the zero tolerance band.
    Indeterminate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Upsilon<T> {
    pub shape: ShapePolygon<T>,
    pub kind: UpsilonKind,
}

/// `W_{c_1^p}` when every sampled uppermost speed is positive, `{0}` otherwise.
pub fn upsilon<T: Scalar>(field: &SpeedField<T>, zero_speed_tol: &T) -> Result<Upsilon<T>> {
    let min = field
        .samples
        .iter()
        .map(|s| s.speed.clone())
        .reduce(|a, b| if b < a { b } else { a })
        .ok_or_else(|| Error::Geometry("empty speed field".into()))?;
    if min > *zero_speed_tol {
        return Ok(Upsilon {
            shape: wulff_shape(field)?,
            kind: UpsilonKind::Positive,
        });
    }
    let band = *zero_speed_tol > T::zero() && min > -zero_speed_tol.clone();
    Ok(Upsilon {
        shape: ShapePolygon::origin(),
        kind: if band {
            UpsilonKind::Indeterminate
        } else {
            UpsilonKind::Degenerate
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CornerDemo {
    pub shape: ShapePolygon<f64>,
    pub query: [String; 2],
    pub query_speed: String,
    /// `max x.e` over the shape at the query direction.
    pub support: String,
    pub supporting: bool,
    pub fg_value: String,
    pub corner: [String; 2],
    pub corner_angle: f64,
    pub query_active: bool,
}

/// Speeds `1` at `e1`, `e2` and `2` at `(3/5, 4/5)` in exact arithmetic.
pub fn corner_demo() -> Result<CornerDemo> {
    let one = ratio(1, 1);
    let zero = ratio(0, 1);
    let e_hat = [ratio(3, 5), ratio(4, 5)];
    let c_hat = ratio(2, 1);
    let field = SpeedField::synthetic([
        ([one.clone(), zero.clone()], one.clone()),
        ([zero.clone(), one.clone()], one.clone()),
        (e_hat.clone(), c_hat.clone()),
    ]);
    let shape = wulff_shape(&field)?;
    let bound = bounding_box(&field);
    let without = intersect_half_planes(
        &[
            ([one.clone(), zero.clone()], one.clone()),
            ([zero.clone(), one.clone()], one.clone()),
        ],
        &bound,
    );
    let support = shape
        .support(&e_hat)
        .ok_or_else(|| Error::Geometry("empty shape".into()))?;
    let supporting = supporting_hyperplane_test(&shape, &e_hat, &c_hat, &zero);
    let fg = freidlin_gartner(&field, &e_hat)?;
    let corner = [one.clone(), one.clone()];
    let idx = shape
        .vertices
        .iter()
        .position(|v| *v == corner)
        .ok_or_else(|| Error::Geometry("no vertex at (1, 1)".into()))?;
    let f = shape.to_f64();
    let corner_angle = f.interior_angles()[idx];
    Ok(CornerDemo {
        query: [e_hat[0].to_string(), e_hat[1].to_string()],
        query_speed: c_hat.to_string(),
        support: support.to_string(),
        supporting,
        fg_value: fg.value.to_string(),
        corner: [corner[0].to_string(), corner[1].to_string()],
        corner_angle,
        query_active: shape != without,
        shape: f,
    })
}
