//! Polynomial root finding and half-plane classification.
//!
//! Roots come from Aberth–Ehrlich simultaneous iteration started on a circle
//! whose radius is the Cauchy bound. When the iteration stalls, the
//! eigenvalues of the companion matrix (shifted QR via a real Schur form) are
//! used instead, for degrees up to [`COMPANION_MAX_DEGREE`].

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::poly::Polynomial;
use crate::error::{Error, Result};

pub const DEFAULT_AXIS_TOL: f64 = 1e-9;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;
pub const COMPANION_MAX_DEGREE: usize = 12;

const ABERTH_MAX_ITER: usize = 500;
const PAIR_TOL: f64 = 1e-7;
const CLUSTER_TOL: f64 = 1e-6;

/// Location of a root relative to the imaginary axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfPlane {
    Lhp,
    OnAxis,
    Rhp,
}

/// Roots of a real polynomial with multiplicities and an axis band used
/// for half-plane classification.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub multiplicities: Vec<usize>,
    pub axis_tolerance: f64,
}

impl RootSet {
    pub fn empty(axis_tolerance: f64) -> Self {
        RootSet {
            roots: Vec::new(),
            multiplicities: Vec::new(),
            axis_tolerance,
        }
    }

    /// Builds a set from a flat list, merging near-coincident entries.
    pub fn from_list(list: &[Complex64], axis_tolerance: f64) -> Self {
        let (roots, multiplicities) = cluster(list);
        RootSet {
            roots,
            multiplicities,
            axis_tolerance,
        }
    }

    pub fn classify(&self, r: Complex64) -> HalfPlane {
        if r.re > self.axis_tolerance {
            HalfPlane::Rhp
        } else if r.re < -self.axis_tolerance {
            HalfPlane::Lhp
        } else {
            HalfPlane::OnAxis
        }
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Total count including multiplicity.
    pub fn count(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Every root repeated according to its multiplicity.
    pub fn expanded(&self) -> Vec<Complex64> {
        self.roots
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&r, &m)| std::iter::repeat_n(r, m))
            .collect()
    }

    fn filtered(&self, plane: HalfPlane) -> RootSet {
        let mut out = RootSet::empty(self.axis_tolerance);
        for (&r, &m) in self.roots.iter().zip(&self.multiplicities) {
            if self.classify(r) == plane {
                out.roots.push(r);
                out.multiplicities.push(m);
            }
        }
        out
    }

    pub fn rhp(&self) -> RootSet {
        self.filtered(HalfPlane::Rhp)
    }

    pub fn lhp(&self) -> RootSet {
        self.filtered(HalfPlane::Lhp)
    }

    pub fn on_axis(&self) -> RootSet {
        self.filtered(HalfPlane::OnAxis)
    }

    pub fn has_on_axis(&self) -> bool {
        self.roots.iter().any(|&r| self.classify(r) == HalfPlane::OnAxis)
    }

    /// Sum of real parts counted with multiplicity.
    pub fn real_part_sum(&self) -> f64 {
        self.roots
            .iter()
            .zip(&self.multiplicities)
            .map(|(r, &m)| r.re * m as f64)
            .sum()
    }
}

/// Finds all roots of `p`.
///
/// Every returned root satisfies `|p(r)| <= tol * sum |c_k| |r|^k`.
pub fn poly_roots(p: &Polynomial, tol: f64) -> Result<RootSet> {
    poly_roots_with_axis(p, tol, DEFAULT_AXIS_TOL)
}

pub fn poly_roots_with_axis(p: &Polynomial, tol: f64, axis_tolerance: f64) -> Result<RootSet> {
    let list = root_list(p, tol)?;
    Ok(RootSet::from_list(&list, axis_tolerance))
}

/// Flat root list (each root repeated by multiplicity), conjugate-symmetric.
pub fn root_list(p: &Polynomial, tol: f64) -> Result<Vec<Complex64>> {
    let deg = p
        .degree()
        .ok_or_else(|| Error::DegenerateInput("zero polynomial has no finite root set".into()))?;
    if deg == 0 {
        return Err(Error::DegenerateInput("constant polynomial has no roots".into()));
    }
    if p.coeffs().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficient".into()));
    }

    let zeros_at_origin = p.origin_multiplicity();
    let reduced = p.shift_down(zeros_at_origin);
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros_at_origin];

    let monic = reduced.scale(1.0 / reduced.leading());
    let found = match monic.degree().unwrap_or(0) {
        0 => Vec::new(),
        1 => vec![Complex64::new(-monic.coeff(0), 0.0)],
        _ => match aberth(&monic) {
            Some(r) => r,
            None => companion_roots(&monic)?,
        },
    };
    let found = symmetrize(&monic, found).or_else(|| companion_roots(&monic).ok().and_then(|r| symmetrize(&monic, r)));
    let found = found.ok_or_else(|| Error::NumericalFailure("roots do not form conjugate pairs".into()))?;

    for r in &found {
        let resid = monic.eval_complex(*r).norm() / monic.abs_scale(*r).max(f64::MIN_POSITIVE);
        if resid > tol {
            return Err(Error::NonConvergence {
                what: "polynomial root finder",
                iterations: ABERTH_MAX_ITER,
                residual: resid,
            });
        }
    }
    roots.extend(found);
    roots.sort_by(cmp_roots);
    Ok(roots)
}

fn cmp_roots(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.partial_cmp(&b.re)
        .unwrap_or(Ordering::Equal)
        .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
}

/// Positive root of `x^n - sum_{k<n} |a_k| x^k` for a monic polynomial.
fn cauchy_radius(monic: &Polynomial) -> f64 {
    let n = monic.degree().unwrap_or(0);
    let abs: Vec<f64> = monic.coeffs()[..n].iter().map(|c| c.abs()).collect();
    let f = |x: f64| x.powi(n as i32) - abs.iter().enumerate().map(|(k, a)| a * x.powi(k as i32)).sum::<f64>();
    let mut hi = 1.0 + abs.iter().cloned().fold(0.0, f64::max);
    if abs.iter().all(|&a| a == 0.0) {
        return 0.0;
    }
    let mut lo = 0.0;
    // f(lo) <= 0 < f(hi); bisect to modest precision, only a starting radius
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    hi
}

fn aberth(monic: &Polynomial) -> Option<Vec<Complex64>> {
    let n = monic.degree()?;
    let dp = monic.derivative();
    let radius = cauchy_radius(monic).max(1e-12);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(radius, 2.0 * PI * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];
    let stop = 8.0 * n as f64 * f64::EPSILON;

    for _ in 0..ABERTH_MAX_ITER {
        for i in 0..n {
            if done[i] {
                continue;
            }
            let zi = z[i];
            let pv = monic.eval_complex(zi);
            let scale = monic.abs_scale(zi);
            if pv.norm() <= stop * scale {
                done[i] = true;
                continue;
            }
            let dpv = dp.eval_complex(zi);
            let ratio = pv / dpv;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = zi - z[j];
                    if d.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        d.inv()
                    }
                })
                .sum();
            let w = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !w.re.is_finite() || !w.im.is_finite() {
                return None;
            }
            z[i] = zi - w;
            if w.norm() <= f64::EPSILON * z[i].norm() {
                done[i] = true;
            }
        }
        if done.iter().all(|&d| d) {
            return Some(z);
        }
    }
    None
}

fn companion_roots(monic: &Polynomial) -> Result<Vec<Complex64>> {
    let n = monic.degree().unwrap_or(0);
    if n > COMPANION_MAX_DEGREE {
        return Err(Error::NumericalFailure(format!(
            "root iteration failed and degree {n} exceeds companion fallback limit"
        )));
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -monic.coeff(i);
    }
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::NumericalFailure("companion matrix QR iteration failed".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect())
}

fn backward_error(p: &Polynomial, r: Complex64) -> f64 {
    p.eval_complex(r).norm() / p.abs_scale(r).max(f64::MIN_POSITIVE)
}

/// A few Newton steps, each kept only if it lowers the backward error.
fn polish(p: &Polynomial, dp: &Polynomial, mut r: Complex64) -> Complex64 {
    let mut err = backward_error(p, r);
    for _ in 0..3 {
        let d = dp.eval_complex(r);
        if d.norm() == 0.0 {
            break;
        }
        let mut next = r - p.eval_complex(r) / d;
        if r.im == 0.0 {
            next.im = 0.0;
        }
        let e = backward_error(p, next);
        if !(e < err) {
            break;
        }
        r = next;
        err = e;
    }
    r
}

/// Forces exact conjugate symmetry on the roots of a real polynomial.
///
/// Near-real roots are snapped onto the axis; if the half-planes are still
/// unbalanced (split multiple roots), the roots closest to the axis on the
/// heavier side are snapped as well. Each pair keeps its more accurate
/// member.
fn symmetrize(p: &Polynomial, mut roots: Vec<Complex64>) -> Option<Vec<Complex64>> {
    for r in roots.iter_mut() {
        if r.im.abs() <= PAIR_TOL * (1.0 + r.norm()) {
            r.im = 0.0;
        }
    }
    let (mut real, complex): (Vec<Complex64>, Vec<Complex64>) = roots.into_iter().partition(|r| r.im == 0.0);
    let (mut upper, mut lower): (Vec<Complex64>, Vec<Complex64>) = complex.into_iter().partition(|r| r.im > 0.0);
    let by_abs_im = |a: &Complex64, b: &Complex64| b.im.abs().total_cmp(&a.im.abs());
    upper.sort_by(by_abs_im);
    lower.sort_by(by_abs_im);
    while upper.len() != lower.len() {
        let heavy = if upper.len() > lower.len() {
            &mut upper
        } else {
            &mut lower
        };
        let r = heavy.pop()?;
        real.push(Complex64::new(r.re, 0.0));
    }
    let dp = p.derivative();
    let mut out: Vec<Complex64> = real.into_iter().map(|r| polish(p, &dp, r)).collect();
    upper.sort_by(cmp_roots);
    for u in upper {
        let (idx, _) = lower
            .iter()
            .enumerate()
            .map(|(k, l)| (k, (l.conj() - u).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        let l = lower.swap_remove(idx).conj();
        let best = if backward_error(p, l) < backward_error(p, u) {
            l
        } else {
            u
        };
        let polished = polish(p, &dp, best);
        let best = if polished.im > 0.0 { polished } else { best };
        out.push(best);
        out.push(best.conj());
    }
    Some(out)
}

/// Groups near-coincident roots; each group is replaced by its mean.
fn cluster(list: &[Complex64]) -> (Vec<Complex64>, Vec<usize>) {
    let mut groups: Vec<Vec<Complex64>> = Vec::new();
    for &r in list {
        match groups.iter_mut().find(|g| {
            let c = g[0];
            (c - r).norm() <= CLUSTER_TOL * (1.0 + c.norm())
        }) {
            Some(g) => g.push(r),
            None => groups.push(vec![r]),
        }
    }
    let mut pairs: Vec<(Complex64, usize)> = groups
        .into_iter()
        .map(|g| {
            let m = g.len();
            let mean = g.iter().sum::<Complex64>() / m as f64;
            (mean, m)
        })
        .collect();
    pairs.sort_by(|a, b| cmp_roots(&a.0, &b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_re(rs: &RootSet) -> Vec<f64> {
        rs.roots.iter().map(|r| r.re).collect()
    }

    #[test]
    fn quadratic_matches_formula() {
        let p = Polynomial::new(vec![-1.0, 4.0, 1.0]);
        let rs = poly_roots(&p, 1e-12).unwrap();
        let oracle = [-2.0 - 5f64.sqrt(), -2.0 + 5f64.sqrt()];
        for (got, want) in sorted_re(&rs).iter().zip(oracle) {
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
        assert_eq!(rs.rhp().count(), 1);
    }

    #[test]
    fn linear_root() {
        let rs = poly_roots(&Polynomial::new(vec![1.0, 1.0]), 1e-12).unwrap();
        assert_eq!(rs.roots, vec![Complex64::new(-1.0, 0.0)]);
    }

    #[test]
    fn imaginary_pair_is_on_axis() {
        let rs = poly_roots(&Polynomial::new(vec![1.0, 0.0, 1.0]), 1e-12).unwrap();
        assert_eq!(rs.len(), 2);
        for &r in &rs.roots {
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert_eq!(rs.classify(r), HalfPlane::OnAxis);
        }
        assert_eq!(rs.roots[0], rs.roots[1].conj());
    }

    #[test]
    fn constant_is_degenerate() {
        assert!(matches!(
            poly_roots(&Polynomial::constant(3.0), 1e-12),
            Err(Error::DegenerateInput(_))
        ));
        assert!(poly_roots(&Polynomial::zero(), 1e-12).is_err());
    }

    #[test]
    fn origin_roots_are_exact() {
        let p = Polynomial::new(vec![0.0, 0.0, 2.0, 1.0]);
        let rs = poly_roots(&p, 1e-12).unwrap();
        assert_eq!(rs.count(), 3);
        let zero = rs.roots.iter().position(|r| r.norm() == 0.0).unwrap();
        assert_eq!(rs.multiplicities[zero], 2);
    }

    #[test]
    fn double_root_has_multiplicity_two() {
        // (s + 1)^2 (s - 3)
        let p = Polynomial::new(vec![-3.0, -5.0, -1.0, 1.0]);
        let rs = poly_roots(&p, 1e-10).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.count(), 3);
        assert!((rs.roots[0].re + 1.0).abs() < 1e-7);
        assert_eq!(rs.multiplicities[0], 2);
    }

    #[test]
    fn wilkinson_like_degree_ten() {
        let roots: Vec<Complex64> = (1..=10).map(|k| Complex64::new(-(k as f64), 0.0)).collect();
        let p = Polynomial::from_roots(&roots);
        let rs = poly_roots(&p, 1e-10).unwrap();
        assert_eq!(rs.count(), 10);
        let back = Polynomial::from_roots(&rs.expanded());
        assert!(back.approx_eq(&p, 1e-8));
    }

    #[test]
    fn companion_fallback_agrees() {
        let p = Polynomial::new(vec![6.0, 11.0, 6.0, 1.0]);
        let mut r = companion_roots(&p).unwrap();
        r.sort_by(cmp_roots);
        for (got, want) in r.iter().zip([-3.0, -2.0, -1.0]) {
            assert!((got.re - want).abs() < 1e-10);
        }
    }
}
