use serde::Serialize;

use super::{add, cross, scale, simplify, Pt, Scalar, ShapePolygon};
use crate::error::{Error, Result};

fn lex_less<T: Scalar>(a: &Pt<T>, b: &Pt<T>) -> bool {
    a[0] < b[0] || (a[0] == b[0] && a[1] < b[1])
}

fn lex_sort<T: Scalar>(pts: &mut [Pt<T>]) {
    pts.sort_by(|a, b| {
        if lex_less(a, b) {
            std::cmp::Ordering::Less
        } else if lex_less(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
}

/// Monotone chain hull, counterclockwise from the lexicographically smallest
/// point, without collinear vertices.
pub fn convex_hull<T: Scalar>(points: &[Pt<T>]) -> Vec<Pt<T>> {
    let mut pts = points.to_vec();
    lex_sort(&mut pts);
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let m = pts
        .iter()
        .flat_map(|p| p.iter().map(|c| c.abs()))
        .fold(T::zero(), |a, b| if b > a { b } else { a });
    let tol = T::turn_tol(&(m.clone() * m));
    let mut lower: Vec<Pt<T>> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= tol
        {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<Pt<T>> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= tol
        {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Gift-wrapping hull with the same vertex convention as [`convex_hull`].
pub fn jarvis_hull<T: Scalar>(points: &[Pt<T>]) -> Vec<Pt<T>> {
    let mut pts = points.to_vec();
    lex_sort(&mut pts);
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let start = pts[0].clone();
    let dist2 = |a: &Pt<T>, b: &Pt<T>| {
        let d = super::sub(b, a);
        super::dot(&d, &d)
    };
    let mut hull = vec![start.clone()];
    let mut cur = start.clone();
    loop {
        let mut next = if pts[0] == cur {
            pts[1].clone()
        } else {
            pts[0].clone()
        };
        for p in &pts {
            if *p == cur {
                continue;
            }
            let c = cross(&cur, &next, p);
            // Clockwise of the candidate edge, or farther along it.
            if c < T::zero() || (c.is_zero() && dist2(&cur, p) > dist2(&cur, &next)) {
                next = p.clone();
            }
        }
        if next == start {
            break;
        }
        hull.push(next.clone());
        cur = next;
        if hull.len() > pts.len() {
            break;
        }
    }
    simplify(hull)
}

/// Rotates a counterclockwise polygon to start at its lowest (then leftmost) vertex.
fn from_bottom<T: Scalar>(v: &[Pt<T>]) -> Vec<Pt<T>> {
    let k = (0..v.len())
        .min_by(|&i, &j| {
            let (a, b) = (&v[i], &v[j]);
            if a[1] < b[1] || (a[1] == b[1] && a[0] < b[0]) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Greater
            }
        })
        .unwrap_or(0);
    v[k..].iter().chain(&v[..k]).cloned().collect()
}

/// Minkowski sum of two convex polygons by merging their edge sequences.
pub fn minkowski_sum<T: Scalar>(a: &[Pt<T>], b: &[Pt<T>]) -> Vec<Pt<T>> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut p = from_bottom(a);
    let mut q = from_bottom(b);
    let (n, m) = (p.len(), q.len());
    p.push(p[0].clone());
    p.push(p[1 % n].clone());
    q.push(q[0].clone());
    q.push(q[1 % m].clone());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(n + m);
    while i < n || j < m {
        out.push(add(&p[i], &q[j]));
        let ep = super::sub(&p[i + 1], &p[i]);
        let eq = super::sub(&q[j + 1], &q[j]);
        let c = ep[0].clone() * eq[1].clone() - ep[1].clone() * eq[0].clone();
        let zero = T::zero();
        if c >= zero && i < n {
            i += 1;
        }
        if c <= zero && j < m {
            j += 1;
        }
    }
    simplify(out)
}

/// `Conv(Y_0 u ... u Y_k)` for every `k`.
pub fn cumulative_hulls<T: Scalar>(upsilons: &[ShapePolygon<T>]) -> Vec<ShapePolygon<T>> {
    let mut pts = Vec::new();
    upsilons
        .iter()
        .map(|u| {
            pts.extend(u.vertices.iter().cloned());
            ShapePolygon::from_vertices(convex_hull(&pts))
        })
        .collect()
}

/// The recursive form: `W_0 = Y_0` and `W_k` the union over `k' < k` and
/// `kappa` in `[0, 1]` of `kappa W_k' + (1 - kappa) Y_k`, with `kappa` on
/// `steps + 1` grid points and the union's outline traced by gift wrapping.
pub fn minkowski_union_hulls<T: Scalar>(
    upsilons: &[ShapePolygon<T>],
    steps: usize,
) -> Vec<ShapePolygon<T>> {
    let mut out: Vec<ShapePolygon<T>> = Vec::with_capacity(upsilons.len());
    for (k, y) in upsilons.iter().enumerate() {
        if k == 0 {
            out.push(ShapePolygon::from_vertices(jarvis_hull(&y.vertices)));
            continue;
        }
        let mut pts = Vec::new();
        for w in &out {
            for s in 0..=steps {
                let kappa = T::from_usize(s).expect("grid index")
                    / T::from_usize(steps.max(1)).expect("grid size");
                let rest = T::one() - kappa.clone();
                let part = if kappa.is_zero() {
                    y.vertices.clone()
                } else if rest.is_zero() {
                    w.vertices.clone()
                } else {
                    let wa: Vec<Pt<T>> = w.vertices.iter().map(|v| scale(&kappa, v)).collect();
                    let yb: Vec<Pt<T>> = y.vertices.iter().map(|v| scale(&rest, v)).collect();
                    minkowski_sum(&wa, &yb)
                };
                pts.extend(part);
            }
        }
        out.push(ShapePolygon::from_vertices(jarvis_hull(&pts)));
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct RecursionReport {
    pub hulls: Vec<ShapePolygon<f64>>,
    /// Largest distance between matched vertices of the two constructions.
    pub max_vertex_gap: f64,
    pub vertex_counts_match: bool,
}

fn vertex_gap(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    let one = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|y| (x[0] - y[0]).hypot(x[1] - y[1]))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        0.0
    } else {
        one(a, b).max(one(b, a))
    }
}

/// `W_{p_k}` for ordered states from their `Y`s, computed as cumulative hulls
/// and cross-checked against the recursive Minkowski form.
pub fn spreading_shape_recursion<T: Scalar>(
    upsilons: &[ShapePolygon<T>],
    kappa_steps: usize,
    geom_tol: f64,
) -> Result<(Vec<ShapePolygon<T>>, RecursionReport)> {
    let hulls = cumulative_hulls(upsilons);
    let rec = minkowski_union_hulls(upsilons, kappa_steps);
    let mut gap: f64 = 0.0;
    let mut counts = true;
    for (h, r) in hulls.iter().zip(&rec) {
        let (a, b) = (h.to_f64(), r.to_f64());
        counts &= a.vertices.len() == b.vertices.len();
        gap = gap.max(vertex_gap(&a.vertices, &b.vertices));
    }
    if !counts || gap > geom_tol {
        return Err(Error::Geometry(format!(
            "hull and recursive shapes differ: vertex gap {gap:e}, counts match {counts}"
        )));
    }
    let report = RecursionReport {
        hulls: hulls.iter().map(|h| h.to_f64()).collect(),
        max_vertex_gap: gap,
        vertex_counts_match: counts,
    };
    Ok((hulls, report))
}
