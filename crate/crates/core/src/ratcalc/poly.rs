//! Real-coefficient polynomials in ascending-degree storage.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// A polynomial `c[0] + c[1] s + ... + c[n] s^n`.
///
/// Trailing zero coefficients are trimmed on construction, so the zero
/// polynomial has an empty coefficient vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(v: Vec<f64>) -> Self {
        Polynomial::new(v)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Polynomial::constant(1.0)
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The monomial `s`.
    pub fn s() -> Self {
        Polynomial::new(vec![0.0, 1.0])
    }

    /// Monic polynomial with the given real root: `s - r`.
    pub fn linear_root(r: f64) -> Self {
        Polynomial::new(vec![-r, 1.0])
    }

    /// Monic polynomial with roots from a real-coefficient root list.
    ///
    /// Complex roots are paired with their conjugates by sign of the
    /// imaginary part; an unpaired complex root contributes only its real
    /// quadratic factor once per positive-imaginary entry.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Polynomial::one();
        let mut pos: Vec<Complex64> = Vec::new();
        for &r in roots {
            if r.im == 0.0 {
                p = &p * &Polynomial::linear_root(r.re);
            } else if r.im > 0.0 {
                pos.push(r);
            }
        }
        for r in pos {
            let quad = Polynomial::new(vec![r.norm_sqr(), -2.0 * r.re, 1.0]);
            p = &p * &quad;
        }
        p
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports `None`.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial mapped to -1, convenient for
    /// relative-degree arithmetic.
    pub fn degree_i64(&self) -> i64 {
        self.coeffs.len() as i64 - 1
    }

    pub fn leading(&self) -> f64 {
        self.coeffs.last().copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs.get(k).copied().unwrap_or(0.0)
    }

    pub fn scale(&self, k: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_complex(&self, s: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
    }

    /// `sum |c_k| |s|^k`, the magnitude scale against which a value of
    /// the polynomial at `s` is judged small.
    pub fn abs_scale(&self, s: Complex64) -> f64 {
        let r = s.norm();
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
    }

    pub fn derivative(&self) -> Polynomial {
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| c * k as f64)
                .collect(),
        )
    }

    /// Number of roots at the origin (lowest nonzero coefficient index).
    pub fn origin_multiplicity(&self) -> usize {
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    /// Divides by `s^k`, discarding the low-order coefficients.
    pub fn shift_down(&self, k: usize) -> Polynomial {
        Polynomial::new(self.coeffs.iter().skip(k).copied().collect())
    }

    /// Quotient and remainder of long division by a nonzero divisor.
    pub fn div_rem(&self, divisor: &Polynomial) -> Option<(Polynomial, Polynomial)> {
        let dd = divisor.degree()?;
        let Some(nd) = self.degree() else {
            return Some((Polynomial::zero(), Polynomial::zero()));
        };
        if nd < dd {
            return Some((Polynomial::zero(), self.clone()));
        }
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let mut quot = vec![0.0; nd - dd + 1];
        for k in (0..=nd - dd).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
        }
        rem.truncate(dd);
        Some((Polynomial::new(quot), Polynomial::new(rem)))
    }

    /// Coefficient-wise closeness relative to the larger coefficient scale.
    pub fn approx_eq(&self, other: &Polynomial, rel: f64) -> bool {
        let n = self.coeffs.len().max(other.coeffs.len());
        let scale = self.max_abs_coeff().max(other.max_abs_coeff()).max(1e-300);
        (0..n).all(|k| (self.coeff(k) - other.coeff(k)).abs() <= rel * scale)
    }

    fn combine(&self, other: &Polynomial, sign: f64) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|k| {
                let a = self.coeff(k);
                let b = sign * other.coeff(k);
                let c = a + b;
                // rounding-level cancellation is exact cancellation
                if c.abs() <= 4.0 * f64::EPSILON * a.abs().max(b.abs()) {
                    0.0
                } else {
                    c
                }
            })
            .collect();
        Polynomial::new(coeffs)
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        if self.is_zero() || rhs.is_zero() {
            return Polynomial::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, &c) in self.coeffs.iter().enumerate().rev() {
            if c == 0.0 {
                continue;
            }
            if first {
                write!(f, "{c}")?;
                first = false;
            } else if c < 0.0 {
                write!(f, " - {}", -c)?;
            } else {
                write!(f, " + {c}")?;
            }
            match k {
                0 => {}
                1 => write!(f, "·s")?,
                _ => write!(f, "·s^{k}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), Some(1));
        assert!(Polynomial::new(vec![0.0]).is_zero());
        assert_eq!(Polynomial::zero().degree(), None);
    }

    #[test]
    fn product_is_convolution() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![2.0, 1.0]);
        assert_eq!((&a * &b).coeffs(), &[2.0, 3.0, 1.0]);
    }

    #[test]
    fn long_division() {
        let a = &Polynomial::new(vec![1.0, 2.0]) * &Polynomial::new(vec![-3.0, 0.5, 1.0]);
        let (q, r) = (&a + &Polynomial::constant(4.0))
            .div_rem(&Polynomial::new(vec![1.0, 2.0]))
            .unwrap();
        assert_eq!(q.coeffs(), [-3.0, 0.5, 1.0]);
        assert_eq!(r.coeffs(), [4.0]);
        assert!(a.div_rem(&Polynomial::zero()).is_none());
    }

    #[test]
    fn cancellation_trims_leading() {
        let a = Polynomial::new(vec![1.0, 0.1 + 0.2]);
        let b = Polynomial::new(vec![0.0, 0.3]);
        assert_eq!((&a - &b).degree(), Some(0));
    }

    #[test]
    fn from_roots_pairs_conjugates() {
        let p = Polynomial::from_roots(&[
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(-2.0, 0.0),
        ]);
        assert_eq!(p.coeffs(), &[2.0, 1.0, 2.0, 1.0]);
    }
}
