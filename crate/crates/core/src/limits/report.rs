use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use super::{
    allpass_factorize, blaschke, bode_lhs_numeric, bode_rhs, peak_bound, peak_numeric, weighted_lhs_numeric,
    weighted_rhs, DEFAULT_QUAD_TOL,
};
use crate::error::Result;
use crate::looptf::{analyze_plant, unstable_poles_in_lh, LoopSet, DEFAULT_CANCEL_TOL};
use crate::plantmodel::{is_internally_stable, realize_closed_loop, LinearPlant, SpectralReport};
use crate::ratcalc::{limit_sl, HalfPlane, RationalTF, RootSet, DEFAULT_AXIS_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LimitOptions {
    pub quad_tol: f64,
    /// Relative tolerance for LHS/RHS comparisons, applied as
    /// `rel_tol·max(1, |rhs|)`.
    pub compare_tol: f64,
    /// Slack allowed in the peak inequality.
    pub peak_slack: f64,
    pub cancel_tol: f64,
    pub axis_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            quad_tol: DEFAULT_QUAD_TOL,
            compare_tol: 1e-2,
            peak_slack: 1e-6,
            cancel_tol: DEFAULT_CANCEL_TOL,
            axis_tol: DEFAULT_AXIS_TOL,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Applicability {
    #[serde(rename = "exact")]
    Exact,
    #[serde(rename = "generalized")]
    Generalized,
    #[serde(rename = "not applicable")]
    NotApplicable,
}

/// A numeric-vs-analytic check and the tolerance it was tested at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Comparison {
    pub fn relative(lhs: f64, rhs: f64, rel_tol: f64) -> Self {
        let tolerance = rel_tol * rhs.abs().max(1.0);
        let abs_diff = (lhs - rhs).abs();
        Comparison {
            lhs,
            rhs,
            abs_diff,
            tolerance,
            passed: abs_diff <= tolerance,
        }
    }

    /// Checks `lhs ≥ rhs − slack`.
    pub fn at_least(lhs: f64, rhs: f64, slack: f64) -> Self {
        Comparison {
            lhs,
            rhs,
            abs_diff: (lhs - rhs).abs(),
            tolerance: slack,
            passed: lhs >= rhs - slack,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HypothesisFlags {
    pub ch_proper: bool,
    pub gh_strictly_proper: bool,
    pub closed_loop_stable: bool,
    pub z_distinct_from_pk: bool,
    pub single_rhp_zero: bool,
    /// Whether every unstable pole of `L` is also a pole of `L_h`.
    /// Reported only; no result depends on it.
    pub rhp_poles_in_lh: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BodeSection {
    pub label: Applicability,
    pub lhs_numeric: Option<f64>,
    pub rhs_analytic: Option<f64>,
    /// `π·Σ Re p_k − (π/2)·σ_y`, given only when the flags hold.
    pub rhs_buffer_only: Option<f64>,
    pub lim_sl: Option<f64>,
    pub tail_estimate: Option<f64>,
    pub omega_max: Option<f64>,
    pub comparison: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeightedEntry {
    pub z: Complex64,
    pub label: Applicability,
    pub lhs_numeric: Option<f64>,
    pub rhs_analytic: Option<f64>,
    pub lb_at_z: Option<Complex64>,
    pub blaschke: Option<f64>,
    /// `π·ln|S_mp(z)|` from the all-pass factorization.
    pub smp_identity: Option<f64>,
    pub comparison: Option<Comparison>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakBoundEntry {
    pub z: Complex64,
    pub label: Applicability,
    pub bound_analytic: Option<f64>,
    pub comparison: Option<Comparison>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PeakSection {
    /// Largest applicable bound over all zeros.
    pub bound_analytic: Option<f64>,
    pub peak_numeric: Option<f64>,
    pub omega_at_peak: Option<f64>,
    pub wp_used: RationalTF,
    pub wp_s_stable: bool,
    pub bounds: Vec<PeakBoundEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitReport {
    pub rhp_poles: RootSet,
    pub rhp_zeros_h: RootSet,
    pub bode: BodeSection,
    pub weighted: Vec<WeightedEntry>,
    pub peak: PeakSection,
    pub hypothesis_flags: HypothesisFlags,
    pub spectrum: SpectralReport,
    pub options: LimitOptions,
}

impl LimitReport {
    /// Every comparison made under applicable hypotheses.
    pub fn comparisons(&self) -> Vec<Comparison> {
        let mut out = Vec::new();
        if self.bode.label != Applicability::NotApplicable {
            out.extend(self.bode.comparison);
        }
        for w in &self.weighted {
            if w.label != Applicability::NotApplicable {
                out.extend(w.comparison);
            }
        }
        for b in &self.peak.bounds {
            if b.label != Applicability::NotApplicable {
                out.extend(b.comparison);
            }
        }
        out
    }

    pub fn all_passed(&self) -> bool {
        self.comparisons().iter().all(|c| c.passed)
    }
}

fn unstable_part(r: &RootSet) -> RootSet {
    RootSet::from_list(
        &r.roots
            .iter()
            .zip(&r.multiplicities)
            .filter(|(x, _)| r.classify(**x) == HalfPlane::Rhp)
            .flat_map(|(x, &m)| std::iter::repeat_n(*x, m))
            .collect::<Vec<_>>(),
        r.axis_tolerance,
    )
}

fn bode_section(
    loops: &LoopSet,
    p: &LinearPlant,
    poles: &RootSet,
    flags: &HypothesisFlags,
    o: &LimitOptions,
) -> BodeSection {
    let mut sec = BodeSection {
        label: Applicability::NotApplicable,
        lhs_numeric: None,
        rhs_analytic: None,
        rhs_buffer_only: None,
        lim_sl: None,
        tail_estimate: None,
        omega_max: None,
        comparison: None,
    };
    let Ok(rhs) = bode_rhs(&loops.l, poles) else {
        return sec;
    };
    sec.rhs_analytic = Some(rhs);
    sec.lim_sl = limit_sl(&loops.l).ok();
    let exact = flags.ch_proper && flags.gh_strictly_proper;
    sec.label = if exact {
        sec.rhs_buffer_only = Some(PI * poles.real_part_sum() - FRAC_PI_2 * p.buffer.sigma_y);
        Applicability::Exact
    } else {
        Applicability::Generalized
    };
    if flags.closed_loop_stable {
        match bode_lhs_numeric(&loops.s, o.quad_tol) {
            Ok(b) => {
                sec.lhs_numeric = Some(b.value);
                sec.tail_estimate = Some(b.tail_estimate);
                sec.omega_max = Some(b.omega_max);
                sec.comparison = Some(Comparison::relative(b.value, rhs, o.compare_tol));
            }
            Err(e) => log::warn!("Bode integral not evaluated: {e}"),
        }
    }
    sec
}

fn weighted_entry(
    loops: &LoopSet,
    z: Complex64,
    poles: &RootSet,
    flags: &HypothesisFlags,
    o: &LimitOptions,
) -> WeightedEntry {
    let mut e = WeightedEntry {
        z,
        label: Applicability::NotApplicable,
        lhs_numeric: None,
        rhs_analytic: None,
        lb_at_z: loops.lb.eval(z).ok(),
        blaschke: None,
        smp_identity: None,
        comparison: None,
        note: None,
    };
    if z.im.abs() > o.axis_tol {
        e.note = Some("complex zero: the real-axis weight does not apply".into());
        return e;
    }
    let zr = z.re;
    e.blaschke = blaschke(zr, poles).ok();
    let Ok(rhs) = weighted_rhs(&loops.lb, zr, poles) else {
        e.note = Some("zero coincides with an unstable pole or 1 + L_b(z) = 0".into());
        return e;
    };
    e.rhs_analytic = Some(rhs);
    e.label = if flags.single_rhp_zero && flags.ch_proper {
        Applicability::Exact
    } else {
        Applicability::Generalized
    };
    if flags.closed_loop_stable {
        match weighted_lhs_numeric(&loops.s, zr, o.quad_tol) {
            Ok(v) => {
                e.lhs_numeric = Some(v);
                e.comparison = Some(Comparison::relative(v, rhs, o.compare_tol));
            }
            Err(err) => log::warn!("weighted integral at z = {zr} not evaluated: {err}"),
        }
        if let Ok(f) = allpass_factorize(&loops.s, poles) {
            e.smp_identity = f.s_mp.eval(Complex64::new(zr, 0.0)).ok().map(|v| PI * v.norm().ln());
        }
    }
    e
}

fn peak_section(
    loops: &LoopSet,
    wp: &RationalTF,
    zeros: &RootSet,
    poles: &RootSet,
    flags: &HypothesisFlags,
    o: &LimitOptions,
) -> PeakSection {
    let wps = wp.mul(&loops.s).minreal(o.cancel_tol).ok();
    let wp_s_stable = flags.closed_loop_stable
        && wps
            .as_ref()
            .and_then(|g| g.poles_with_axis(o.axis_tol).ok())
            .is_some_and(|r| r.roots.iter().all(|x| x.re < -o.axis_tol));
    let numeric = if wp_s_stable {
        peak_numeric(wp, &loops.s).ok()
    } else {
        None
    };
    let bounds: Vec<PeakBoundEntry> = zeros
        .roots
        .iter()
        .map(|&z| {
            let mut b = PeakBoundEntry {
                z,
                label: Applicability::NotApplicable,
                bound_analytic: None,
                comparison: None,
            };
            if z.im.abs() > o.axis_tol || !wp.is_proper() {
                return b;
            }
            if let Ok(v) = peak_bound(wp, &loops.lb, z.re, poles) {
                b.bound_analytic = Some(v);
                b.label = if flags.single_rhp_zero {
                    Applicability::Exact
                } else {
                    Applicability::Generalized
                };
                if let Some(n) = numeric {
                    b.comparison = Some(Comparison::at_least(n.peak, v, o.peak_slack));
                }
            }
            b
        })
        .collect();
    PeakSection {
        bound_analytic: bounds.iter().filter_map(|b| b.bound_analytic).max_by(f64::total_cmp),
        peak_numeric: numeric.map(|n| n.peak),
        omega_at_peak: numeric.map(|n| n.omega_at_peak),
        wp_used: wp.clone(),
        wp_s_stable,
        bounds,
    }
}

/// Evaluates all three limits for a plant and controller. Numerical
/// left-hand sides are computed only when the state-space closed loop is
/// internally stable; otherwise they are left empty.
pub fn analyze_limits(p: &LinearPlant, c_h: &RationalTF, wp: &RationalTF, o: &LimitOptions) -> Result<LimitReport> {
    let (_, _, loops) = analyze_plant(p, c_h, o.cancel_tol)?;
    let ss = realize_closed_loop(p, c_h)?;
    let (stable, spectrum) = is_internally_stable(&ss, o.axis_tol)?;

    let rhp_poles = unstable_part(&loops.l.poles_with_axis(o.axis_tol)?);
    let rhp_zeros_h = if loops.lh.is_zero() {
        RootSet::empty(o.axis_tol)
    } else {
        unstable_part(&loops.lh.zeros_with_axis(o.axis_tol)?)
    };
    let z_distinct = rhp_zeros_h
        .roots
        .iter()
        .all(|z| rhp_poles.roots.iter().all(|p| (p - z).norm() > 1e-6 * (p.norm() + 1.0)));
    let flags = HypothesisFlags {
        ch_proper: c_h.is_proper(),
        gh_strictly_proper: loops.gh.is_strictly_proper(),
        closed_loop_stable: stable,
        z_distinct_from_pk: z_distinct,
        single_rhp_zero: rhp_zeros_h.count() == 1,
        rhp_poles_in_lh: unstable_poles_in_lh(&loops, 1e-6)?,
    };

    let bode = bode_section(&loops, p, &rhp_poles, &flags, o);
    let weighted = rhp_zeros_h
        .roots
        .iter()
        .map(|&z| weighted_entry(&loops, z, &rhp_poles, &flags, o))
        .collect();
    let peak = peak_section(&loops, wp, &rhp_zeros_h, &rhp_poles, &flags, o);
    Ok(LimitReport {
        rhp_poles,
        rhp_zeros_h,
        bode,
        weighted,
        peak,
        hypothesis_flags: flags,
        spectrum,
        options: *o,
    })
}
