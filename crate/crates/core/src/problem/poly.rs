use serde::{Deserialize, Serialize};

/// Dense polynomial in one variable, coefficients in ascending order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Poly(pub Vec<f64>);

impl Poly {
    pub fn zero() -> Self {
        Poly(Vec::new())
    }

    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `scale * prod (u - r)` for the given roots.
    pub fn from_roots(roots: &[f64], scale: f64) -> Self {
        let mut p = Poly(vec![scale]);
        for &r in roots {
            p = p.mul(&Poly(vec![-r, 1.0]));
        }
        p
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * u + c)
    }

    /// Value and first derivative by a single Horner pass.
    #[inline]
    pub fn eval_with_derivative(&self, u: f64) -> (f64, f64) {
        let mut value = 0.0;
        let mut slope = 0.0;
        for &c in self.0.iter().rev() {
            slope = slope * u + value;
            value = value * u + c;
        }
        (value, slope)
    }

    pub fn derivative(&self) -> Poly {
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    /// Exact antiderivative vanishing at zero.
    pub fn integral(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|k| {
                    self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0)
                })
                .collect(),
        )
    }

    pub fn scaled(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.0.is_empty() || other.0.is_empty() {
            return Poly::zero();
        }
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    /// `v -> p(a + b v)`.
    pub fn compose_affine(&self, a: f64, b: f64) -> Poly {
        let lin = Poly(vec![a, b]);
        let mut acc = Poly::zero();
        for &c in self.0.iter().rev() {
            acc = acc.mul(&lin).add(&Poly::constant(c));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn horner_matches_naive() {
        let p = Poly(vec![1.0, -2.0, 0.5, 3.0]);
        let u: f64 = 0.7;
        let naive = 1.0 - 2.0 * u + 0.5 * u * u + 3.0 * u.powi(3);
        assert!((p.eval(u) - naive).abs() < 1e-14);
        let (v, d) = p.eval_with_derivative(u);
        assert!((v - naive).abs() < 1e-14);
        assert!((d - p.derivative().eval(u)).abs() < 1e-14);
    }

    #[test]
    fn roots_and_composition() {
        let p = Poly::from_roots(&[0.0, 0.3, 1.0], -1.0);
        for u in [0.0, 0.3, 1.0] {
            assert!(p.eval(u).abs() < 1e-15);
        }
        // u(1-u)(u-a) at u = 0.5
        assert!((p.eval(0.5) - 0.5 * 0.5 * 0.2).abs() < 1e-15);
        let q = p.compose_affine(1.0, -1.0);
        for v in [0.0, 0.25, 0.9] {
            assert!((q.eval(v) - p.eval(1.0 - v)).abs() < 1e-14);
        }
    }

    #[test]
    fn integral_inverts_derivative() {
        let p = Poly(vec![0.0, 1.0, -3.0, 2.0]);
        let back = p.integral().derivative();
        for (a, b) in p.0.iter().zip(&back.0) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
