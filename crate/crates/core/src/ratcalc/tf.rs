//! Scalar rational transfer functions.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly::Polynomial;
use super::roots::{root_list, HalfPlane, RootSet, DEFAULT_AXIS_TOL, DEFAULT_ROOT_TOL};
use crate::error::{Error, Result};

/// Relative threshold on `|den(s)|` below which evaluation reports a pole.
pub const POLE_EVAL_TOL: f64 = 1e-14;

/// Arithmetic operation selector for [`tf_arith`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// `num(s) / den(s)` with a monic denominator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalTF {
    num: Polynomial,
    den: Polynomial,
}

/// A num/den root pair removed by [`RationalTF::minreal`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cancellation {
    pub zero: Complex64,
    pub pole: Complex64,
    pub half_plane: HalfPlane,
}

impl RationalTF {
    /// Canonicalizes so the denominator is monic.
    pub fn new(num: Polynomial, den: Polynomial) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::DegenerateInput("zero denominator".into()));
        }
        let lead = den.leading();
        Ok(RationalTF {
            num: num.scale(1.0 / lead),
            den: den.scale(1.0 / lead),
        })
    }

    pub fn from_coeffs(num: &[f64], den: &[f64]) -> Result<Self> {
        RationalTF::new(Polynomial::new(num.to_vec()), Polynomial::new(den.to_vec()))
    }

    pub fn constant(k: f64) -> Self {
        RationalTF {
            num: Polynomial::constant(k),
            den: Polynomial::one(),
        }
    }

    pub fn zero() -> Self {
        RationalTF::constant(0.0)
    }

    pub fn one() -> Self {
        RationalTF::constant(1.0)
    }

    pub fn num(&self) -> &Polynomial {
        &self.num
    }

    pub fn den(&self) -> &Polynomial {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    /// `deg(den) - deg(num)`; the zero function has infinite relative
    /// degree and reports `i64::MAX`.
    pub fn relative_degree(&self) -> i64 {
        if self.num.is_zero() {
            i64::MAX
        } else {
            self.den.degree_i64() - self.num.degree_i64()
        }
    }

    pub fn is_proper(&self) -> bool {
        self.relative_degree() >= 0
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.relative_degree() >= 1
    }

    pub fn scale(&self, k: f64) -> RationalTF {
        RationalTF {
            num: self.num.scale(k),
            den: self.den.clone(),
        }
    }

    pub fn neg(&self) -> RationalTF {
        self.scale(-1.0)
    }

    pub fn add(&self, other: &RationalTF) -> RationalTF {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &RationalTF) -> RationalTF {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &RationalTF, sign: f64) -> RationalTF {
        if self.den == other.den {
            let num = &self.num + &other.num.scale(sign);
            return RationalTF {
                num,
                den: self.den.clone(),
            };
        }
        let num = &(&self.num * &other.den) + &(&other.num * &self.den).scale(sign);
        let den = &self.den * &other.den;
        RationalTF { num, den }
    }

    pub fn mul(&self, other: &RationalTF) -> RationalTF {
        RationalTF {
            num: &self.num * &other.num,
            den: &self.den * &other.den,
        }
    }

    pub fn div(&self, other: &RationalTF) -> Result<RationalTF> {
        if other.num.is_zero() {
            return Err(Error::DivisionByZero);
        }
        RationalTF::new(&self.num * &other.den, &self.den * &other.num)
    }

    /// `1 / g`.
    pub fn inv(&self) -> Result<RationalTF> {
        RationalTF::one().div(self)
    }

    /// Horner evaluation of numerator and denominator.
    pub fn eval(&self, s: Complex64) -> Result<Complex64> {
        let d = self.den.eval_complex(s);
        if d.norm() <= POLE_EVAL_TOL * self.den.abs_scale(s) {
            return Err(Error::PoleProximity { re: s.re, im: s.im });
        }
        Ok(self.num.eval_complex(s) / d)
    }

    /// Evaluation on the imaginary axis, `g(iω)`.
    pub fn eval_jw(&self, omega: f64) -> Result<Complex64> {
        self.eval(Complex64::new(0.0, omega))
    }

    pub fn poles(&self) -> Result<RootSet> {
        self.poles_with_axis(DEFAULT_AXIS_TOL)
    }

    pub fn poles_with_axis(&self, axis_tol: f64) -> Result<RootSet> {
        if self.den.degree() == Some(0) {
            return Ok(RootSet::empty(axis_tol));
        }
        Ok(RootSet::from_list(&root_list(&self.den, DEFAULT_ROOT_TOL)?, axis_tol))
    }

    pub fn zeros(&self) -> Result<RootSet> {
        self.zeros_with_axis(DEFAULT_AXIS_TOL)
    }

    pub fn zeros_with_axis(&self, axis_tol: f64) -> Result<RootSet> {
        match self.num.degree() {
            None | Some(0) => Ok(RootSet::empty(axis_tol)),
            Some(_) => Ok(RootSet::from_list(&root_list(&self.num, DEFAULT_ROOT_TOL)?, axis_tol)),
        }
    }

    /// Value at infinity for proper functions (zero if strictly proper).
    pub fn high_frequency_gain(&self) -> Result<f64> {
        match self.relative_degree() {
            r if r < 0 => Err(Error::Improper(r)),
            0 => Ok(self.num.leading() / self.den.leading()),
            _ => Ok(0.0),
        }
    }

    /// Removes numerator/denominator root pairs that agree within
    /// `cancel_tol * (|pole| + 1)`. Pairs on opposite sides of the
    /// imaginary axis are never cancelled.
    pub fn minreal(&self, cancel_tol: f64) -> Result<RationalTF> {
        Ok(self.minreal_logged(cancel_tol)?.0)
    }

    pub fn minreal_logged(&self, cancel_tol: f64) -> Result<(RationalTF, Vec<Cancellation>)> {
        if self.num.is_zero() {
            return Ok((RationalTF::zero(), Vec::new()));
        }
        if self.num.degree() == Some(0) || self.den.degree() == Some(0) {
            return Ok((self.clone(), Vec::new()));
        }
        let zeros = RootSet::from_list(&root_list(&self.num, DEFAULT_ROOT_TOL)?, 0.0).expanded();
        let poles = RootSet::from_list(&root_list(&self.den, DEFAULT_ROOT_TOL)?, 0.0).expanded();
        let axis = RootSet::empty(DEFAULT_AXIS_TOL);

        let mut pole_used = vec![false; poles.len()];
        let mut log = Vec::new();
        for &z in &zeros {
            let best = poles
                .iter()
                .enumerate()
                .filter(|(k, p)| {
                    !pole_used[*k]
                        && axis.classify(**p) == axis.classify(z)
                        && (z - **p).norm() <= cancel_tol * (p.norm() + 1.0)
                })
                .min_by(|a, b| {
                    (z - *a.1)
                        .norm()
                        .partial_cmp(&(z - *b.1).norm())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            if let Some((k, &p)) = best {
                pole_used[k] = true;
                log.push(Cancellation {
                    zero: z,
                    pole: p,
                    half_plane: axis.classify(p),
                });
            }
        }
        if log.is_empty() {
            return Ok((self.clone(), log));
        }
        // deflate by the cancelled factors rather than rebuilding from
        // roots, so the surviving coefficients keep their accuracy
        // each pair is removed at whichever of its two roots fits both
        // polynomials better; a split multiple root is poorly conditioned
        let fit = |r: Complex64| {
            let bwd = |p: &Polynomial| p.eval_complex(r).norm() / p.abs_scale(r).max(f64::MIN_POSITIVE);
            bwd(&self.num).max(bwd(&self.den))
        };
        let common: Vec<Complex64> = log
            .iter()
            .map(|c| if fit(c.zero) < fit(c.pole) { c.zero } else { c.pole })
            .collect();
        let zf = Polynomial::from_roots(&common);
        if zf.degree_i64() != log.len() as i64 {
            return Err(Error::NumericalFailure("cancellation broke conjugate pairing".into()));
        }
        let deflate = |p: &Polynomial, f: &Polynomial| {
            p.div_rem(f)
                .map(|(q, _)| q)
                .ok_or_else(|| Error::NumericalFailure("deflation by a zero factor".into()))
        };
        let num = deflate(&self.num, &zf)?;
        let den = deflate(&self.den, &zf)?;
        Ok((RationalTF::new(num, den)?, log))
    }

    /// Coefficient-wise comparison of canonical forms.
    pub fn approx_eq(&self, other: &RationalTF, rel: f64) -> bool {
        self.num.approx_eq(&other.num, rel) && self.den.approx_eq(&other.den, rel)
    }

    /// True when `num == den` coefficient-wise, i.e. the function is
    /// identically one without cancellation.
    pub fn is_unity(&self, rel: f64) -> bool {
        self.num.approx_eq(&self.den, rel) && self.num.degree() == self.den.degree()
    }
}

/// Exact coefficient arithmetic; no cancellation is performed.
pub fn tf_arith(a: &RationalTF, b: &RationalTF, op: TfOp) -> Result<RationalTF> {
    match op {
        TfOp::Add => Ok(a.add(b)),
        TfOp::Sub => Ok(a.sub(b)),
        TfOp::Mul => Ok(a.mul(b)),
        TfOp::Div => a.div(b),
    }
}

pub fn tf_minreal(g: &RationalTF, cancel_tol: f64) -> Result<RationalTF> {
    g.minreal(cancel_tol)
}

pub fn tf_eval(g: &RationalTF, s: Complex64) -> Result<Complex64> {
    g.eval(s)
}

/// `lim_{s→∞} s·L(s)` for a proper `L`.
pub fn limit_sl(l: &RationalTF) -> Result<f64> {
    match l.relative_degree() {
        r if r >= 2 => Ok(0.0),
        1 => Ok(l.num().leading() / l.den().leading()),
        r => Err(Error::UnboundedLimit { relative_degree: r }),
    }
}

impl fmt::Display for RationalTF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}
