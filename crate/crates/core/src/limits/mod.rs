//! Integral and peak limits on the sensitivity function.
//!
//! Each limit has an analytic right-hand side built from the unstable
//! poles of `L`, the unstable zero of `L_h` and the buffering loop `L_b`,
//! and an independent numerical left-hand side evaluated on `S` itself.

mod report;

pub use report::{
    analyze_limits, Applicability, BodeSection, Comparison, HypothesisFlags, LimitOptions, LimitReport, PeakBoundEntry,
    PeakSection, WeightedEntry,
};

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::looptf::log_grid;
use crate::quadrature::{integrate_pieces, DEFAULT_MAX_INTERVALS};
use crate::ratcalc::{limit_sl, HalfPlane, Polynomial, RationalTF, RootSet, DEFAULT_AXIS_TOL};

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
/// Largest integration cutoff for the Bode integral.
pub const MAX_OMEGA: f64 = 1e15;
const ROOT_MATCH_TOL: f64 = 1e-6;

/// `π·Σ Re p_k − (π/2)·lim_{s→∞} s·L(s)`.
pub fn bode_rhs(l: &RationalTF, rhp_poles: &RootSet) -> Result<f64> {
    if !l.is_strictly_proper() {
        return Err(Error::UnboundedLimit {
            relative_degree: l.relative_degree(),
        });
    }
    Ok(PI * rhp_poles.rhp().real_part_sum() - FRAC_PI_2 * limit_sl(l)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BodeIntegral {
    pub value: f64,
    pub tail_estimate: f64,
    pub omega_max: f64,
    pub abs_error: f64,
}

/// `ln|S(iω)|` evaluated through `L = 1/S − 1` so that the small-`|L|`
/// regime keeps full relative precision.
struct LogSensitivity {
    l_num: Polynomial,
    l_den: Polynomial,
}

impl LogSensitivity {
    fn new(s: &RationalTF) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::DegenerateInput("sensitivity is identically zero".into()));
        }
        Ok(LogSensitivity {
            l_num: s.den() - s.num(),
            l_den: s.num().clone(),
        })
    }

    fn at(&self, omega: f64) -> f64 {
        let jw = Complex64::new(0.0, omega);
        let d = self.l_den.eval_complex(jw);
        if d == Complex64::new(0.0, 0.0) {
            return f64::NEG_INFINITY;
        }
        let l = self.l_num.eval_complex(jw) / d;
        -0.5 * (2.0 * l.re + l.norm_sqr()).ln_1p()
    }

    fn loop_tf(&self) -> Result<RationalTF> {
        RationalTF::new(self.l_num.clone(), self.l_den.clone())
    }
}

fn require_stable(s: &RationalTF, what: &str) -> Result<RootSet> {
    let poles = s.poles_with_axis(DEFAULT_AXIS_TOL)?;
    if let Some(p) = poles.roots.iter().find(|p| p.re >= -DEFAULT_AXIS_TOL) {
        return Err(Error::Unstable(format!("{what} has a pole at {p}")));
    }
    Ok(poles)
}

/// Frequencies at which `ln|S|` has structure: pole and zero moduli, and
/// imaginary-axis zeros of `S` (logarithmic singularities).
fn feature_frequencies(s: &RationalTF, poles: &RootSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let zeros = s.zeros_with_axis(DEFAULT_AXIS_TOL)?;
    let mut moduli: Vec<f64> = poles
        .roots
        .iter()
        .chain(zeros.roots.iter())
        .map(|r| r.norm())
        .filter(|&m| m > 0.0)
        .collect();
    moduli.sort_by(f64::total_cmp);
    let singular: Vec<f64> = zeros
        .roots
        .iter()
        .filter(|&&r| zeros.classify(r) == HalfPlane::OnAxis)
        .map(|r| r.im.abs())
        .collect();
    Ok((moduli, singular))
}

fn sorted_breaks(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|&p| p > lo && p < hi);
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    pts
}

/// `∫₀^∞ ln|S(iω)| dω` by adaptive quadrature on `[0, Ω]` plus the
/// asymptotic tail `κ/Ω`, where `ln|S(iω)| ≈ κ/ω²` for large `ω`.
///
/// With `L = c/s + d/s² + O(s⁻³)` the real part of `ln S(iω)` is
/// `(d − c²/2)/ω² + O(ω⁻⁴)`, so `κ = d − c²/2`.
pub fn bode_lhs_numeric(s: &RationalTF, tol: f64) -> Result<BodeIntegral> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
    }
    let poles = require_stable(s, "S")?;
    let ls = LogSensitivity::new(s)?;
    let l = ls.loop_tf()?;
    if !l.is_strictly_proper() {
        return Err(Error::DegenerateInput(
            "S(i∞) ≠ 1: the loop is not strictly proper and the integral diverges".into(),
        ));
    }
    let kappa = if l.is_zero() {
        0.0
    } else {
        let n = l.den().degree().unwrap_or(0);
        let lead = l.den().leading();
        let c = if n >= 1 { l.num().coeff(n - 1) / lead } else { 0.0 };
        let d = if n >= 2 {
            (l.num().coeff(n - 2) - c * l.den().coeff(n - 1)) / lead
        } else {
            0.0
        };
        d - 0.5 * c * c
    };

    let (moduli, singular) = feature_frequencies(s, &poles)?;
    let rho = moduli.last().copied().unwrap_or(1.0).max(1.0);
    let low = moduli.first().copied().unwrap_or(1.0).min(1.0) * 1e-3;
    let omega_max = (1e3 * rho).max(10.0 * kappa.abs() / tol).min(MAX_OMEGA);

    let mut pts = moduli;
    pts.extend(singular);
    let mut w = low;
    while w < omega_max {
        pts.push(w);
        w *= 10.0;
    }
    let breaks = sorted_breaks(pts, 0.0, omega_max);
    let q = integrate_pieces(|w| ls.at(w), &breaks, tol, tol, DEFAULT_MAX_INTERVALS)?;
    let tail = kappa / omega_max;
    Ok(BodeIntegral {
        value: q.value + tail,
        tail_estimate: tail,
        omega_max,
        abs_error: q.abs_error + (tail / omega_max).abs(),
    })
}

/// Blaschke product `Π_k |(p_k + z)/(p_k − z)|` over the unstable poles.
pub fn blaschke(z: f64, rhp_poles: &RootSet) -> Result<f64> {
    let zc = Complex64::new(z, 0.0);
    let mut prod = 1.0;
    for p in rhp_poles.rhp().expanded() {
        let gap = (p - zc).norm();
        if gap <= ROOT_MATCH_TOL * (p.norm() + 1.0) {
            return Err(Error::InvalidParameter(format!(
                "zero z = {z} coincides with unstable pole {p}"
            )));
        }
        prod *= (p + zc).norm() / gap;
    }
    Ok(prod)
}

fn check_zero(z: f64) -> Result<()> {
    if !(z.is_finite() && z > DEFAULT_AXIS_TOL) {
        return Err(Error::InvalidParameter(format!(
            "zero must lie in the open right half plane (got {z})"
        )));
    }
    Ok(())
}

fn return_difference_at(lb: &RationalTF, z: f64) -> Result<f64> {
    let v = (Complex64::new(1.0, 0.0) + lb.eval(Complex64::new(z, 0.0))?).norm();
    if v <= f64::EPSILON {
        return Err(Error::DegenerateInput(format!("1 + L_b vanishes at z = {z}")));
    }
    Ok(v)
}

/// `π·ln Π_k |(p_k + z)/(p_k − z)| − π·ln|1 + L_b(z)|`.
pub fn weighted_rhs(lb: &RationalTF, z: f64, rhp_poles: &RootSet) -> Result<f64> {
    check_zero(z)?;
    let b = blaschke(z, rhp_poles)?;
    let r = return_difference_at(lb, z)?;
    Ok(PI * b.ln() - PI * r.ln())
}

/// `∫₀^∞ ln|S(iω)|·2z/(z² + ω²) dω`, computed as
/// `∫₀^{π/2} 2·ln|S(i·z·tan θ)| dθ`.
pub fn weighted_lhs_numeric(s: &RationalTF, z: f64, tol: f64) -> Result<f64> {
    check_zero(z)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("quadrature tolerance must be positive".into()));
    }
    let poles = require_stable(s, "S")?;
    let ls = LogSensitivity::new(s)?;
    let (moduli, singular) = feature_frequencies(s, &poles)?;
    let pts = moduli.into_iter().chain(singular).map(|w| (w / z).atan()).collect();
    let breaks = sorted_breaks(pts, 0.0, FRAC_PI_2);
    let q = integrate_pieces(
        |theta: f64| 2.0 * ls.at(z * theta.tan()),
        &breaks,
        tol,
        tol,
        DEFAULT_MAX_INTERVALS,
    )?;
    Ok(q.value)
}

/// `|w_p(z)/(1 + L_b(z))|·Π_k |(p_k + z)/(p_k − z)|`.
pub fn peak_bound(wp: &RationalTF, lb: &RationalTF, z: f64, rhp_poles: &RootSet) -> Result<f64> {
    check_zero(z)?;
    let b = blaschke(z, rhp_poles)?;
    let r = return_difference_at(lb, z)?;
    Ok(wp.eval(Complex64::new(z, 0.0))?.norm() / r * b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PeakResult {
    pub peak: f64,
    /// `f64::INFINITY` when the high-frequency limit dominates.
    pub omega_at_peak: f64,
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `‖w_p·S‖_∞` by a logarithmic scan over `[1e-4, 1e4]`, the values at
/// `ω = 0` and `ω = ∞`, and golden-section refinement of the best point.
pub fn peak_numeric(wp: &RationalTF, s: &RationalTF) -> Result<PeakResult> {
    let g = wp.mul(s);
    if !g.is_proper() {
        return Err(Error::Improper(g.relative_degree()));
    }
    let poles = require_stable(&g, "w_p·S")?;
    let mag = |w: f64| {
        let jw = Complex64::new(0.0, w);
        (g.num().eval_complex(jw) / g.den().eval_complex(jw)).norm()
    };

    let mut grid = log_grid(1e-4, 1e4, 60)?;
    grid.extend(poles.roots.iter().map(|p| p.im.abs()).filter(|&w| w > 0.0));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut best = PeakResult {
        peak: mag(0.0),
        omega_at_peak: 0.0,
    };
    let at_inf = g.high_frequency_gain()?.abs();
    if at_inf > best.peak {
        best = PeakResult {
            peak: at_inf,
            omega_at_peak: f64::INFINITY,
        };
    }
    let vals: Vec<f64> = grid.iter().map(|&w| mag(w)).collect();
    let (k, &vk) = vals
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is nonempty");
    if vk > best.peak {
        best = PeakResult {
            peak: vk,
            omega_at_peak: grid[k],
        };
        let lo = if k > 0 { grid[k - 1] } else { grid[k] * 0.5 };
        let hi = if k + 1 < grid.len() { grid[k + 1] } else { grid[k] * 2.0 };
        let (lw, v) = golden_max(|lw: f64| mag(lw.exp()), lo.ln(), hi.ln(), 80);
        if v > best.peak {
            best = PeakResult {
                peak: v,
                omega_at_peak: lw.exp(),
            };
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllpassFactors {
    pub s_ap: RationalTF,
    pub s_mp: RationalTF,
}

fn matched(a: &[Complex64], b: &[Complex64]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|&x| {
        let hit = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|(_, p), (_, q)| (**p - x).norm().total_cmp(&(**q - x).norm()));
        match hit {
            Some((j, &y)) if (y - x).norm() <= ROOT_MATCH_TOL * (x.norm() + 1.0) => {
                used[j] = true;
                true
            }
            _ => false,
        }
    })
}

/// Splits `S = S_ap·S_mp` with `S_ap = Π (s − p_k)/(s + p_k)`.
pub fn allpass_factorize(s: &RationalTF, rhp_poles_of_l: &RootSet) -> Result<AllpassFactors> {
    let p = rhp_poles_of_l.rhp().expanded();
    let s = s.minreal(ROOT_MATCH_TOL)?;
    let s_zeros = s.zeros_with_axis(DEFAULT_AXIS_TOL)?.rhp().expanded();
    if !matched(&p, &s_zeros) {
        return Err(Error::AllpassMismatch);
    }
    if p.is_empty() {
        return Ok(AllpassFactors {
            s_ap: RationalTF::one(),
            s_mp: s,
        });
    }
    let mirrored: Vec<Complex64> = p.iter().map(|&r| -r).collect();
    let s_ap = RationalTF::new(Polynomial::from_roots(&p), Polynomial::from_roots(&mirrored))?;
    let s_mp = s.div(&s_ap)?.minreal(ROOT_MATCH_TOL)?;
    let rhp = |r: &RootSet| r.roots.iter().any(|&x| r.classify(x) == HalfPlane::Rhp);
    if rhp(&s_mp.zeros_with_axis(DEFAULT_AXIS_TOL)?) || rhp(&s_mp.poles_with_axis(DEFAULT_AXIS_TOL)?) {
        return Err(Error::AllpassMismatch);
    }
    Ok(AllpassFactors { s_ap, s_mp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn tf(n: &[f64], d: &[f64]) -> RationalTF {
        RationalTF::from_coeffs(n, d).unwrap()
    }

    fn glyco_poles() -> RootSet {
        RootSet::from_list(&[Complex64::new(5f64.sqrt() - 2.0, 0.0)], DEFAULT_AXIS_TOL)
    }

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn bode_rhs_examples() {
        // sigma_y = 2, C_h = 0 on the glycolysis loop
        let lb = tf(&[0.0, 2.0], &[-1.0, 4.0, 1.0]);
        let p = lb.poles().unwrap();
        let v = bode_rhs(&lb, &p).unwrap();
        assert!((v - (PI * (5f64.sqrt() - 2.0) - PI)).abs() < 1e-12);
        assert!((v + 2.4000).abs() < 1e-3);

        let l = tf(&[1.0], &[1.0, 2.0, 1.0]);
        assert_eq!(bode_rhs(&l, &l.poles().unwrap()).unwrap(), 0.0);

        let l = tf(&[0.0, 1.0], &[2.0, 3.0, 1.0]);
        assert!((bode_rhs(&l, &l.poles().unwrap()).unwrap() + FRAC_PI_2).abs() < 1e-15);

        assert!(bode_rhs(&tf(&[1.0, 1.0], &[2.0, 1.0]), &RootSet::empty(1e-9)).is_err());
    }

    #[test]
    fn bode_lhs_trivial() {
        let r = bode_lhs_numeric(&RationalTF::one(), 1e-8).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn first_order_lag_waterbed() {
        let eps = 1e-3;
        let l = tf(&[1.0], &[eps, 1.0]);
        let s = RationalTF::one().add(&l).inv().unwrap();
        let r = bode_lhs_numeric(&s, 1e-8).unwrap();
        let rhs = bode_rhs(&l, &l.poles().unwrap()).unwrap();
        assert!((r.value - rhs).abs() < 1e-6, "{} vs {}", r.value, rhs);
        assert!((r.value + FRAC_PI_2).abs() < 1e-2);
    }

    #[test]
    fn bode_lhs_relative_degree_two() {
        // L = 2/((s+1)(s+2)): lim sL = 0, no RHP poles
        let l = tf(&[2.0], &[2.0, 3.0, 1.0]);
        let s = RationalTF::one().add(&l).inv().unwrap();
        let r = bode_lhs_numeric(&s, 1e-9).unwrap();
        assert!(r.value.abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn bode_lhs_unstable_loop() {
        // L = 3/(s-1) closes to S = (s-1)/(s+2); integral = pi*1 - pi/2*3
        let l = tf(&[3.0], &[-1.0, 1.0]);
        let s = RationalTF::one().add(&l).inv().unwrap();
        let r = bode_lhs_numeric(&s, 1e-9).unwrap();
        assert!((r.value - (PI - 1.5 * PI)).abs() < 1e-7, "{}", r.value);
    }

    #[test]
    fn bode_lhs_rejects_unstable_and_biproper() {
        let s = tf(&[1.0, 1.0], &[-1.0, 1.0]);
        assert!(matches!(bode_lhs_numeric(&s, 1e-8), Err(Error::Unstable(_))));
        let s = tf(&[1.0, 2.0], &[1.0, 1.0]);
        assert!(bode_lhs_numeric(&s, 1e-8).is_err());
    }

    #[test]
    fn weighted_rhs_golden_ratio() {
        let p = glyco_poles();
        let v0 = weighted_rhs(&RationalTF::zero(), 1.0, &p).unwrap();
        assert!((v0 - PI * PHI.ln()).abs() < 1e-12);
        let lb = tf(&[0.0, 1.0], &[-1.0, 4.0, 1.0]);
        let v1 = weighted_rhs(&lb, 1.0, &p).unwrap();
        assert!((v1 - (PI * PHI.ln() - PI * 1.25f64.ln())).abs() < 1e-12);
        assert_eq!(
            weighted_rhs(&RationalTF::zero(), 2.0, &RootSet::empty(1e-9)).unwrap(),
            0.0
        );
        assert!(weighted_rhs(&RationalTF::zero(), 5f64.sqrt() - 2.0, &p).is_err());
        assert!(weighted_rhs(&RationalTF::zero(), 0.0, &p).is_err());
    }

    #[test]
    fn weight_normalization() {
        for z in [0.5, 1.0, 2.0] {
            let r = integrate(
                |w: f64| 2.0 * z / (z * z + w * w),
                0.0,
                1.0,
                1e-13,
                1e-13,
                DEFAULT_MAX_INTERVALS,
            )
            .unwrap()
            .value
                + integrate(
                    |t: f64| 2.0 * z / (z * z + 1.0 / (t * t)) / (t * t),
                    0.0,
                    1.0,
                    1e-13,
                    1e-13,
                    DEFAULT_MAX_INTERVALS,
                )
                .unwrap()
                .value;
            assert!((r - PI).abs() < 1e-9, "z = {z}: {r}");
            // the substituted form integrates 2 over [0, pi/2]
            let sub = integrate(|_t| 2.0, 0.0, FRAC_PI_2, 1e-13, 1e-13, 100).unwrap().value;
            assert!((sub - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_lhs_minimum_phase_oracle() {
        // stable minimum-phase S: the weighted integral equals pi*ln|S(z)|
        let s = tf(&[1.0, 1.0], &[2.0, 1.0]);
        for z in [0.5, 1.0, 3.0] {
            let v = weighted_lhs_numeric(&s, z, 1e-10).unwrap();
            let exact = PI * ((z + 1.0) / (z + 2.0)).ln();
            assert!((v - exact).abs() < 1e-8, "z = {z}: {v} vs {exact}");
        }
        // S = s/(s+a): a zero on the axis, at z = a the value is pi ln(1/2)
        let a = 2.0;
        let s = tf(&[0.0, 1.0], &[a, 1.0]);
        let v = weighted_lhs_numeric(&s, a, 1e-10).unwrap();
        assert!((v - PI * 0.5f64.ln()).abs() < 1e-7, "{v}");
        assert_eq!(weighted_lhs_numeric(&RationalTF::one(), 1.0, 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn peak_bound_examples() {
        let p = glyco_poles();
        let one = RationalTF::one();
        let b0 = peak_bound(&one, &RationalTF::zero(), 1.0, &p).unwrap();
        assert!((b0 - PHI).abs() < 1e-12);
        let lb = tf(&[0.0, 1.0], &[-1.0, 4.0, 1.0]);
        let b1 = peak_bound(&one, &lb, 1.0, &p).unwrap();
        assert!((b1 - PHI / 1.25).abs() < 1e-12);
        assert!((b1 - 1.29443).abs() < 1e-5);
        let b = peak_bound(&one, &RationalTF::zero(), 1.0, &RootSet::empty(1e-9)).unwrap();
        assert_eq!(b, 1.0);
    }

    #[test]
    fn peak_numeric_examples() {
        let r = peak_numeric(&RationalTF::one(), &RationalTF::one()).unwrap();
        assert_eq!(r.peak, 1.0);
        let s = tf(&[1.0, 0.1, 1.0], &[1.0, 2.0, 1.0]);
        let r = peak_numeric(&RationalTF::one(), &s).unwrap();
        assert!((r.peak - 1.0).abs() < 1e-12);
        // lightly damped resonance: |S| peaks near 1/(2*zeta) off the grid
        let s = tf(&[0.0, 0.0, 1.0], &[1.0, 0.02, 1.0]);
        let r = peak_numeric(&RationalTF::one(), &s).unwrap();
        let zeta: f64 = 0.01;
        let exact = 1.0 / (2.0 * zeta * (1.0 - zeta * zeta).sqrt());
        assert!((r.peak - exact).abs() < 1e-6 * exact, "{} vs {exact}", r.peak);
    }

    #[test]
    fn allpass_examples() {
        let p = glyco_poles();
        // S = (s - p)(s+1)/((s+2)(s+3))
        let pr = 5f64.sqrt() - 2.0;
        let num = &Polynomial::linear_root(pr) * &Polynomial::linear_root(-1.0);
        let den = Polynomial::new(vec![6.0, 5.0, 1.0]);
        let s = RationalTF::new(num, den).unwrap();
        let f = allpass_factorize(&s, &p).unwrap();
        for w in [0.1, 1.0, 10.0] {
            assert!((f.s_ap.eval_jw(w).unwrap().norm() - 1.0).abs() < 1e-12);
        }
        assert!((f.s_ap.num().coeff(0) + 0.2360680).abs() < 1e-7);
        let z = Complex64::new(0.7, 0.0);
        let back = f.s_ap.eval(z).unwrap() * f.s_mp.eval(z).unwrap();
        assert!((back - s.eval(z).unwrap()).norm() < 1e-12);

        let g = allpass_factorize(&tf(&[1.0, 1.0], &[2.0, 1.0]), &RootSet::empty(1e-9)).unwrap();
        assert!(g.s_ap.is_unity(0.0));
        assert!(allpass_factorize(&tf(&[1.0, 1.0], &[2.0, 1.0]), &p).is_err());
    }
}
