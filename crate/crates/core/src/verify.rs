//! The acceptance suite: twelve end-to-end checks on the glycolysis
//! case study and on randomly generated plants.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glycolysis::{build_plant, closed_form_tfs, lb_at_rhp_zero, GlycolysisParams};
use crate::limits::{
    allpass_factorize, bode_lhs_numeric, bode_rhs, peak_bound, peak_numeric, weighted_lhs_numeric, weighted_rhs,
    DEFAULT_QUAD_TOL,
};
use crate::looptf::{analyze_plant, build_buffer, closed_loop_characteristic, LoopSet, DEFAULT_CANCEL_TOL};
use crate::plantmodel::{
    fd_jacobians, is_internally_stable, mass_action_jacobians, mass_action_model, realize_closed_loop,
    solve_steady_state, BufferParams, Channel, DisturbanceScales, Jacobians, LinearPlant, MassActionParams, Scaling,
    SteadyGuess, SteadyPin,
};
use crate::ratcalc::{limit_sl, poly_roots, Polynomial, RationalTF, DEFAULT_AXIS_TOL, DEFAULT_ROOT_TOL};
use crate::simkit::{default_timing, sinusoid_response, stability_boundary_gain, step_response};

/// Golden ratio `(1 + √5)/2`.
pub const PHI: f64 = 1.618_033_988_749_895;
/// Reference values quoted to five decimals.
pub const WEIGHTED_REF_SY0: f64 = 1.51152;
pub const WEIGHTED_REF_SY1: f64 = 0.81052;
pub const PEAK_REF_SY1: f64 = 1.29443;
const SEED: u64 = 0x5eed_b0ff;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VerifyConfig {
    /// Relative tolerance for comparisons involving quadrature.
    pub compare_tol: f64,
    /// Target accuracy handed to the integrator.
    pub quad_tol: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            compare_tol: 1e-2,
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }
}

impl VerifyConfig {
    /// Comparison tolerance `tol`; the integrator target follows it down
    /// to 1e-10.
    pub fn with_tolerance(tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive (got {tol})"
            )));
        }
        Ok(VerifyConfig {
            compare_tol: tol,
            quad_tol: (tol * 1e-2).clamp(1e-10, DEFAULT_QUAD_TOL),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub detail: String,
    pub metrics: BTreeMap<String, f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {}: {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title,
            self.detail
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub config: VerifyConfig,
    pub passed: bool,
    pub criteria: Vec<CriterionResult>,
}

/// Accumulates named checks for one criterion.
struct Checks {
    ok: bool,
    failures: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl Checks {
    fn new() -> Self {
        Checks {
            ok: true,
            failures: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    fn check(&mut self, cond: bool, what: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.failures.push(what.into());
        }
    }

    fn metric(&mut self, name: impl Into<String>, v: f64) {
        self.metrics.insert(name.into(), v);
    }

    fn error(&mut self, e: &Error, ctx: &str) {
        self.check(false, format!("{ctx}: {e}"));
    }

    fn finish(self, id: u8, title: &str, summary: String) -> CriterionResult {
        let detail = if self.ok {
            summary
        } else {
            format!("{summary}; failed: {}", self.failures.join("; "))
        };
        CriterionResult {
            id,
            title: title.to_string(),
            passed: self.ok,
            detail,
            metrics: self.metrics,
        }
    }
}

fn within_rel(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

fn fig3(sigma_y: f64, h: f64) -> GlycolysisParams {
    GlycolysisParams::default().with_sigma_y(sigma_y).with_h(h)
}

fn loops_for(p: &LinearPlant, c_h: &RationalTF) -> Result<LoopSet> {
    Ok(analyze_plant(p, c_h, DEFAULT_CANCEL_TOL)?.2)
}

fn is_stable(p: &LinearPlant, c_h: &RationalTF) -> Result<bool> {
    Ok(is_internally_stable(&realize_closed_loop(p, c_h)?, DEFAULT_AXIS_TOL)?.0)
}

/// Midpoint of the first stable run of gains `h·shape` on `[h_min, h_max]`.
pub fn find_stabilizing_gain(
    p: &LinearPlant,
    shape: &RationalTF,
    h_min: f64,
    h_max: f64,
    n: usize,
) -> Result<Option<f64>> {
    let mut first = None;
    let mut last = None;
    for k in 0..=n {
        let h = h_min + (h_max - h_min) * k as f64 / n as f64;
        if is_stable(p, &shape.scale(h))? {
            first.get_or_insert(h);
            last = Some(h);
        } else if first.is_some() {
            break;
        }
    }
    Ok(first.zip(last).map(|(a, b)| 0.5 * (a + b)))
}

fn proportional_gain(sigma_y: f64) -> Result<f64> {
    let p = build_plant(&fig3(sigma_y, 0.0))?;
    find_stabilizing_gain(&p, &RationalTF::one(), 0.0, 5.0, 200)?
        .ok_or_else(|| Error::Unstable(format!("no stabilizing proportional gain at sigma_y = {sigma_y}")))
}

pub fn criterion_1() -> CriterionResult {
    let mut c = Checks::new();
    let run = |c: &mut Checks| -> Result<()> {
        let gp = fig3(0.0, 0.5);
        let p = build_plant(&gp)?;
        let (ol, _, loops) = analyze_plant(&p, &gp.controller(), DEFAULT_CANCEL_TOL)?;
        let poles = loops.gy.poles()?;
        let s5 = 5f64.sqrt();
        for target in [-2.0 + s5, -2.0 - s5] {
            let err = poles
                .roots
                .iter()
                .map(|r| (r - Complex64::new(target, 0.0)).norm())
                .fold(f64::INFINITY, f64::min);
            c.metric(format!("pole_err_{target:.6}"), err);
            c.check(err <= 1e-9, format!("open-loop pole {target} off by {err:e}"));
        }
        let zeros = loops.lh.zeros()?.rhp();
        c.check(zeros.count() == 1, "L_h must have exactly one RHP zero");
        if let Some(z) = zeros.roots.first() {
            c.metric("z_rhp", z.re);
            c.check(z.im == 0.0 && (z.re - 1.0).abs() <= 1e-12, format!("RHP zero at {z}"));
        }
        let gz = &ol.gz[0];
        c.check(
            gz.num().coeffs() == [2.0] && gz.den().coeffs() == [1.0, 1.0],
            format!("Ĝ_z = {gz}"),
        );
        Ok(())
    };
    if let Err(e) = run(&mut c) {
        c.error(&e, "evaluation");
    }
    c.finish(
        1,
        "glycolysis structure",
        "open-loop poles -2±√5, RHP zero 1, Ĝ_z = 2/(s+1)".into(),
    )
}

pub fn criterion_2() -> CriterionResult {
    let mut c = Checks::new();
    for sy in [0.5, 1.0, 2.0, 4.0] {
        let run = |c: &mut Checks| -> Result<()> {
            let gp = fig3(sy, 0.5);
            let closed = lb_at_rhp_zero(&gp)?;
            let loops = loops_for(&build_plant(&gp)?, &gp.controller())?;
            let v = loops.lb.eval(Complex64::new(gp.z_rhp(), 0.0))?;
            let d = (v - Complex64::new(closed, 0.0)).norm();
            c.metric(format!("lb_z_sy{sy}"), closed);
            c.check(d <= 1e-12, format!("sigma_y={sy}: closed form vs eval differ by {d:e}"));
            c.check(
                (closed - sy / 4.0).abs() <= 1e-12,
                format!("sigma_y={sy}: L_b(z) = {closed}"),
            );
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error(&e, &format!("sigma_y={sy}"));
        }
    }
    c.finish(
        2,
        "L_b(z) closed form",
        "L_b(1) = σ_y/4 for σ_y ∈ {0.5, 1, 2, 4}".into(),
    )
}

pub fn criterion_3(cfg: &VerifyConfig) -> CriterionResult {
    let mut c = Checks::new();
    let start = Instant::now();
    let shape = RationalTF::from_coeffs(&[1.0], &[1.0, 1.0]).expect("valid controller");
    let mut pairs = 0;
    for sy in [0.0, 1.0, 2.0, 4.0] {
        let run = |c: &mut Checks| -> Result<bool> {
            let p = build_plant(&fig3(sy, 0.0))?;
            let Some(h) = find_stabilizing_gain(&p, &shape, 0.0, 5.0, 100)? else {
                return Ok(false);
            };
            let loops = loops_for(&p, &shape.scale(h))?;
            let poles = loops.l.poles()?;
            let rhs = bode_rhs(&loops.l, &poles)?;
            let lhs = bode_lhs_numeric(&loops.s, cfg.quad_tol)?.value;
            let tol = cfg.compare_tol * (1.0 + rhs.abs());
            c.metric(format!("sy{sy}_h"), h);
            c.metric(format!("sy{sy}_lhs"), lhs);
            c.metric(format!("sy{sy}_rhs"), rhs);
            c.check(
                (lhs - rhs).abs() <= tol,
                format!("sigma_y={sy}, h={h:.4}: |{lhs:.6} - {rhs:.6}| > {tol:e}"),
            );
            Ok(true)
        };
        match run(&mut c) {
            Ok(true) => pairs += 1,
            Ok(false) => {}
            Err(e) => c.error(&e, &format!("sigma_y={sy}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    c.metric("pairs", pairs as f64);
    c.metric("seconds", secs);
    c.check(pairs >= 3, format!("only {pairs} stabilizing pairs found"));
    c.check(secs < 5.0, format!("took {secs:.2} s"));
    c.finish(
        3,
        "generalized Bode integral",
        format!("{pairs} stabilizing (h, σ_y) pairs with C_h = h/(s+1), {secs:.2} s"),
    )
}

pub fn criterion_4(cfg: &VerifyConfig) -> CriterionResult {
    let mut c = Checks::new();
    let mut n = 0;
    for alpha_f in [-0.5, -1.0] {
        for sy in [0.5, 1.0, 2.0, 4.0] {
            let run = |c: &mut Checks| -> Result<()> {
                let gp = GlycolysisParams {
                    alpha_f,
                    ..fig3(sy, 0.0)
                };
                let p = build_plant(&gp)?;
                let zero = RationalTF::zero();
                if !is_stable(&p, &zero)? {
                    return Err(Error::Unstable(format!("alpha_f={alpha_f}, sigma_y={sy}")));
                }
                let loops = loops_for(&p, &zero)?;
                let poles = loops.l.poles()?.rhp();
                let expected = -PI / 2.0 * sy + PI * poles.real_part_sum();
                let lhs = bode_lhs_numeric(&loops.s, cfg.quad_tol)?.value;
                c.metric(format!("af{alpha_f}_sy{sy}"), lhs);
                c.check(
                    within_rel(lhs, expected, cfg.compare_tol),
                    format!("alpha_f={alpha_f}, sigma_y={sy}: {lhs:.6} vs {expected:.6}"),
                );
                Ok(())
            };
            match run(&mut c) {
                Ok(()) => n += 1,
                Err(e) => c.error(&e, "configuration"),
            }
        }
    }
    c.finish(
        4,
        "buffering term of the Bode integral",
        format!("{n} configurations with C_h = 0 match -(π/2)σ_y"),
    )
}

fn weighted_case(c: &mut Checks, cfg: &VerifyConfig, sy: f64, reference: f64) -> Result<()> {
    let h = proportional_gain(sy)?;
    let gp = fig3(sy, h);
    let loops = loops_for(&build_plant(&gp)?, &gp.controller())?;
    let poles = loops.l.poles()?.rhp();
    let z = gp.z_rhp();
    let rhs = weighted_rhs(&loops.lb, z, &poles)?;
    let lhs = weighted_lhs_numeric(&loops.s, z, cfg.quad_tol)?;
    c.metric(format!("sy{sy}_h"), h);
    c.metric(format!("sy{sy}_lhs"), lhs);
    c.metric(format!("sy{sy}_rhs"), rhs);
    c.check(
        within_rel(lhs, reference, cfg.compare_tol),
        format!("sigma_y={sy}: quadrature {lhs:.6} vs reference {reference}"),
    );
    c.check(
        within_rel(lhs, rhs, cfg.compare_tol),
        format!("sigma_y={sy}: quadrature {lhs:.6} vs analytic {rhs:.6}"),
    );
    Ok(())
}

pub fn criterion_5(cfg: &VerifyConfig) -> CriterionResult {
    let mut c = Checks::new();
    for (sy, r) in [(0.0, WEIGHTED_REF_SY0), (1.0, WEIGHTED_REF_SY1)] {
        if let Err(e) = weighted_case(&mut c, cfg, sy, r) {
            c.error(&e, &format!("sigma_y={sy}"));
        }
    }
    c.finish(
        5,
        "weighted sensitivity integral",
        "σ_y = 0 → π ln φ, σ_y = 1 → π ln φ − π ln 1.25".into(),
    )
}

pub fn criterion_6() -> CriterionResult {
    let mut c = Checks::new();
    let one = RationalTF::one();
    let mut tested = 0;
    let mut bounds = Vec::new();
    for sy in [0.0, 1.0, 2.0, 4.0] {
        let run = |c: &mut Checks, tested: &mut usize| -> Result<f64> {
            let base = build_plant(&fig3(sy, 0.0))?;
            let mut bound = f64::NAN;
            for k in 1..=20 {
                let h = 0.15 * k as f64;
                let gp = fig3(sy, h);
                let loops = loops_for(&base, &gp.controller())?;
                let poles = loops.l.poles()?.rhp();
                bound = peak_bound(&one, &loops.lb, gp.z_rhp(), &poles)?;
                if !is_stable(&base, &gp.controller())? {
                    continue;
                }
                *tested += 1;
                let pk = peak_numeric(&one, &loops.s)?.peak;
                c.check(
                    pk >= bound - 1e-6,
                    format!("sigma_y={sy}, h={h:.2}: peak {pk} < bound {bound}"),
                );
            }
            Ok(bound)
        };
        match run(&mut c, &mut tested) {
            Ok(b) => {
                c.metric(format!("bound_sy{sy}"), b);
                bounds.push(b);
            }
            Err(e) => c.error(&e, &format!("sigma_y={sy}")),
        }
    }
    if bounds.len() == 4 {
        c.check(
            (bounds[0] - PHI).abs() <= 1e-5,
            format!("bound at sigma_y=0 is {}", bounds[0]),
        );
        c.check(
            (bounds[1] - PEAK_REF_SY1).abs() <= 1e-5,
            format!("bound at sigma_y=1 is {}", bounds[1]),
        );
        c.check(
            bounds.windows(2).all(|w| w[1] < w[0]),
            format!("bounds not decreasing: {bounds:?}"),
        );
    }
    c.metric("stable_configurations", tested as f64);
    c.check(tested > 0, "no stable configuration tested");
    c.finish(
        6,
        "sensitivity peak bound",
        format!("‖S‖∞ ≥ bound on {tested} stable configurations; bound decreasing in σ_y"),
    )
}

pub fn criterion_7(cfg: &VerifyConfig) -> CriterionResult {
    let mut c = Checks::new();
    for sy in [0.0, 1.0] {
        let run = |c: &mut Checks| -> Result<()> {
            let h = proportional_gain(sy)?;
            let gp = fig3(sy, h);
            let loops = loops_for(&build_plant(&gp)?, &gp.controller())?;
            let poles = loops.l.poles()?.rhp();
            let f = allpass_factorize(&loops.s, &poles)?;
            let z = gp.z_rhp();
            let identity = PI * f.s_mp.eval(Complex64::new(z, 0.0))?.norm().ln();
            let lhs = weighted_lhs_numeric(&loops.s, z, cfg.quad_tol)?;
            c.metric(format!("sy{sy}_smp"), identity);
            c.check(
                within_rel(lhs, identity, cfg.compare_tol),
                format!("sigma_y={sy}: π ln|S_mp(z)| = {identity:.6}, quadrature {lhs:.6}"),
            );
            Ok(())
        };
        if let Err(e) = run(&mut c) {
            c.error(&e, &format!("sigma_y={sy}"));
        }
    }
    c.finish(
        7,
        "all-pass factorization identity",
        "π ln|S_mp(z)| equals the weighted integral".into(),
    )
}

pub fn criterion_8() -> CriterionResult {
    let mut c = Checks::new();
    let run = |c: &mut Checks| -> Result<()> {
        let p0 = build_plant(&fig3(0.0, 0.0))?;
        let p4 = build_plant(&fig3(4.0, 0.0))?;
        let h0 = stability_boundary_gain(&p0, 0.5, 10.0, 1e-4)?;
        let h4 = stability_boundary_gain(&p4, 0.5, 10.0, 1e-4)?;
        c.metric("h_crit_sy0", h0);
        c.metric("h_crit_sy4", h4);
        c.check(h4 > h0, format!("h_crit(4) = {h4:.4} not above h_crit(0) = {h0:.4}"));

        let h = 0.8;
        let ctrl = RationalTF::constant(h);
        let ss0 = realize_closed_loop(&p0, &ctrl)?;
        let ss4 = realize_closed_loop(&p4, &ctrl)?;
        let (dt, t0) = default_timing(&ss0)?;
        let (_, t4) = default_timing(&ss4)?;
        let t_end = t0.max(t4);
        let a0 = step_response(&ss0, Channel::Dy, 1.0, dt, t_end)?.peak_to_peak_after(1.0);
        let a4 = step_response(&ss4, Channel::Dy, 1.0, dt, t_end)?.peak_to_peak_after(1.0);
        c.metric("oscillation_sy0", a0);
        c.metric("oscillation_sy4", a4);
        c.check(a4 < a0, format!("oscillation {a4:.4} at sigma_y=4 not below {a0:.4}"));
        Ok(())
    };
    if let Err(e) = run(&mut c) {
        c.error(&e, "evaluation");
    }
    c.finish(
        8,
        "buffering extends the stable gain range",
        "h_crit(σ_y=4) > h_crit(σ_y=0); smaller oscillation at h = 0.8".into(),
    )
}

/// Random plant with `0..=3` intermediates and a random proper, stable
/// controller of degree `0..=2`.
pub fn random_plant(rng: &mut StdRng) -> Result<(LinearPlant, RationalTF)> {
    let nz = rng.gen_range(0..=3);
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let a_yy = u(-3.0, 1.0);
    let a_yz: Vec<f64> = (0..nz).map(|_| u(-2.0, 2.0)).collect();
    let a_zy: Vec<f64> = (0..nz).map(|_| u(-2.0, 2.0)).collect();
    let a_zz = DMatrix::from_fn(nz, nz, |i, j| if i == j { u(-3.0, 0.5) } else { u(-1.0, 1.0) });
    let b_yh = u(-2.0, 2.0);
    let b_zh: Vec<f64> = (0..nz).map(|_| u(-2.0, 2.0)).collect();
    let buffer = BufferParams {
        sigma_y: u(0.0, 5.0),
        sigma_x: u(0.1, 5.0),
        a_xx: u(0.0, 2.0),
    };
    let scaling = Scaling {
        ybar: u(0.5, 2.0),
        phat: u(0.5, 2.0),
        dhat: DisturbanceScales {
            dy: u(-2.0, 2.0),
            dz: u(-2.0, 2.0),
            dx: u(-2.0, 2.0),
            db: u(-2.0, 2.0),
        },
    };
    let deg = rng.gen_range(0..=2usize);
    let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let den_roots: Vec<f64> = (0..deg).map(|_| -u(0.2, 4.0)).collect();
    let den = den_roots
        .iter()
        .fold(Polynomial::one(), |acc, &r| &acc * &Polynomial::linear_root(r));
    let num_deg = if deg == 0 { 0 } else { rng.gen_range(0..=deg) };
    let num = Polynomial::new((0..=num_deg).map(|_| rng.gen_range(-2.0..2.0)).collect());
    let plant = LinearPlant::new(a_yy, a_yz, a_zy, a_zz, b_yh, b_zh, buffer, scaling)?;
    Ok((plant, RationalTF::new(num, den)?))
}

pub fn criterion_9() -> CriterionResult {
    let mut c = Checks::new();
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst_s = 0.0f64;
    let mut worst_lim = 0.0f64;
    let mut done = 0;
    for i in 0..200 {
        let mut run = |c: &mut Checks, rng: &mut StdRng| -> Result<()> {
            let (p, ch) = random_plant(rng)?;
            let b = build_buffer(&p)?;
            let sum = b.cb.add(&b.cb_lp);
            c.check(
                sum.num().coeffs() == sum.den().coeffs(),
                format!("plant {i}: C_b + C_b^lp = {sum}"),
            );
            let loops = loops_for(&p, &ch)?;
            let rd = RationalTF::one().add(&loops.l);
            for _ in 0..5 {
                let s = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0));
                let (Ok(sv), Ok(rv)) = (loops.s.eval(s), rd.eval(s)) else {
                    continue;
                };
                worst_s = worst_s.max((sv * rv - 1.0).norm());
            }
            let lim = limit_sl(&loops.lb)?;
            let sy = p.buffer.sigma_y;
            worst_lim = worst_lim.max((lim - sy).abs() / sy.max(1.0));
            Ok(())
        };
        match run(&mut c, &mut rng) {
            Ok(()) => done += 1,
            Err(e) => c.error(&e, &format!("plant {i}")),
        }
    }
    c.metric("max_s_identity_err", worst_s);
    c.metric("max_limit_err", worst_lim);
    c.check(worst_s <= 1e-9, format!("S(1+L) deviates from 1 by {worst_s:e}"));
    c.check(
        worst_lim <= 1e-9,
        format!("lim sL_b deviates from σ_y by {worst_lim:e}"),
    );
    c.finish(
        9,
        "algebraic identities",
        format!("{done} random plants: C_b + C_b^lp = 1, S(1+L) = 1, lim sL_b = σ_y"),
    )
}

fn rel_err(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Largest distance from each root in `a` to its nearest partner in `b`,
/// matched one-to-one, relative to `1 + |root|`.
fn multiset_gap(a: &[Complex64], b: &[Complex64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("equal lengths");
        used[j] = true;
        worst = worst.max(d / (1.0 + x.norm()));
    }
    worst
}

pub fn criterion_10() -> CriterionResult {
    let mut c = Checks::new();
    let mut rng = StdRng::seed_from_u64(SEED ^ 0xa5a5);
    let mut worst_tf = 0.0f64;
    let mut worst_pole = 0.0f64;
    let mut cases: Vec<(String, LinearPlant, RationalTF)> = Vec::new();
    for (sy, h) in [(0.0, 0.5), (1.0, 0.8), (4.0, 1.5)] {
        let gp = fig3(sy, h);
        if let Ok(p) = build_plant(&gp) {
            cases.push((format!("glycolysis sy={sy} h={h}"), p, gp.controller()));
        }
    }
    for i in 0..20 {
        match random_plant(&mut rng) {
            Ok((p, ch)) => cases.push((format!("random plant {i}"), p, ch)),
            Err(e) => c.error(&e, "plant generation"),
        }
    }
    let per_case = 50usize.div_ceil(cases.len()).max(1);
    for (name, p, ch) in &cases {
        let mut run = |c: &mut Checks, rng: &mut StdRng| -> Result<()> {
            let loops = loops_for(p, ch)?;
            let ss = realize_closed_loop(p, ch)?;
            let mut chans = vec![Channel::Dy, Channel::Dx, Channel::Db];
            chans.extend((0..p.n_intermediates()).map(Channel::Dz));
            for _ in 0..per_case.max(50) {
                let s = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0));
                for &chn in &chans {
                    let (Ok(a), Ok(b)) = (loops.closed_loop(chn)?.eval(s), ss.transfer_at(s, chn)) else {
                        continue;
                    };
                    worst_tf = worst_tf.max(rel_err(a, b));
                }
            }
            let char_poly = closed_loop_characteristic(p, ch)?;
            let rational = poly_roots(&char_poly, DEFAULT_ROOT_TOL)?.expanded();
            let eig = ss.eigenvalues()?;
            let gap = multiset_gap(&rational, &eig);
            worst_pole = worst_pole.max(gap);
            c.check(gap <= 1e-8, format!("{name}: poles vs eigenvalues differ by {gap:e}"));
            Ok(())
        };
        if let Err(e) = run(&mut c, &mut rng) {
            c.error(&e, name);
        }
    }
    c.metric("max_tf_rel_err", worst_tf);
    c.metric("max_pole_gap", worst_pole);
    c.check(
        worst_tf <= 1e-8,
        format!("rational vs state-space maps differ by {worst_tf:e}"),
    );
    c.finish(
        10,
        "rational vs state-space",
        format!("{} systems, 50 complex points each", cases.len()),
    )
}

fn jac_entries(j: &Jacobians) -> Vec<f64> {
    let mut v = vec![j.a_yy, j.b_yh];
    v.extend(&j.a_yz);
    v.extend(&j.a_zy);
    v.extend(j.a_zz.iter());
    v.extend(&j.b_zh);
    v.extend([j.buffer.sigma_y, j.buffer.sigma_x, j.buffer.a_xx]);
    v
}

pub fn criterion_11() -> CriterionResult {
    let mut c = Checks::new();
    let mut rng = StdRng::seed_from_u64(SEED ^ 0x1111);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let mut u = |lo: f64, hi: f64| rng.gen_range(lo..hi);
        let k = MassActionParams {
            k_prod: u(0.5, 2.0),
            k_deg: u(0.2, 2.0),
            k_in: u(0.5, 3.0),
            k_conv: u(0.5, 2.0),
            k1: u(0.1, 4.0),
            k2: u(0.1, 3.0),
            k3: u(0.0, 1.0),
        };
        let ybar = u(0.5, 2.0);
        let run = || -> Result<f64> {
            let m = mass_action_model(k, false);
            let z = k.k_in / (k.k_conv * ybar);
            let x = k.k1 * ybar / (k.k2 + k.k3);
            let uh = (k.k_deg * ybar * ybar + k.k1 * ybar - k.k2 * x) / (k.k_prod * z);
            let guess = SteadyGuess {
                y: ybar,
                z: vec![1.1 * z],
                x: 0.9 * x,
                u_h: 1.05 * uh,
            };
            let ss = solve_steady_state(&m, SteadyPin::Setpoint(ybar), &guess, 1e-12, 100)?;
            let fd = jac_entries(&fd_jacobians(&m, &ss, 1e-6)?);
            let an = jac_entries(&mass_action_jacobians(&k, &ss));
            let scale = an.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let diff = fd.iter().zip(&an).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            Ok(diff / scale)
        };
        match run() {
            Ok(e) => worst = worst.max(e),
            Err(e) => c.error(&e, &format!("draw {i}")),
        }
    }
    c.metric("max_rel_err", worst);
    c.check(worst <= 1e-6, format!("finite differences off by {worst:e}"));
    c.finish(
        11,
        "finite-difference linearization",
        format!("100 mass-action draws, worst relative error {worst:.2e}"),
    )
}

pub fn criterion_12() -> CriterionResult {
    let mut c = Checks::new();
    let mut traces = 0;
    let mut worst_fv = 0.0f64;
    for sy in [0.0, 1.0, 4.0] {
        for h in [0.5, 1.0, 1.5] {
            let run = |c: &mut Checks, traces: &mut usize, worst_fv: &mut f64| -> Result<()> {
                let gp = fig3(sy, h);
                let p = build_plant(&gp)?;
                let ss = realize_closed_loop(&p, &gp.controller())?;
                if !is_internally_stable(&ss, DEFAULT_AXIS_TOL)?.0 {
                    return Ok(());
                }
                let loops = loops_for(&p, &gp.controller())?;
                let (dt, t_end) = default_timing(&ss)?;
                for ch in [Channel::Dy, Channel::Dz(0), Channel::Dx, Channel::Db] {
                    let tr = step_response(&ss, ch, 1.0, dt, t_end)?;
                    let dc = loops.closed_loop(ch)?.eval(Complex64::new(0.0, 0.0))?.re;
                    let err = (tr.final_value() - dc).abs();
                    *worst_fv = worst_fv.max(err);
                    *traces += 1;
                    c.check(
                        err <= 1e-6,
                        format!("sigma_y={sy}, h={h}, {ch}: final value off by {err:e}"),
                    );
                }
                Ok(())
            };
            if let Err(e) = run(&mut c, &mut traces, &mut worst_fv) {
                c.error(&e, &format!("sigma_y={sy}, h={h}"));
            }
        }
    }
    c.metric("traces", traces as f64);
    c.metric("max_final_value_err", worst_fv);
    c.check(traces > 0, "no stable trace");

    let run = |c: &mut Checks| -> Result<()> {
        let gp = fig3(1.0, 0.8);
        let p = build_plant(&gp)?;
        let ss = realize_closed_loop(&p, &gp.controller())?;
        let loops = loops_for(&p, &gp.controller())?;
        for w in [0.1, 1.0, 10.0] {
            let fit = sinusoid_response(&ss, Channel::Dy, w)?;
            let exact = loops.t_dyz[0].eval_jw(w)?.norm();
            let rel = (fit.amplitude - exact).abs() / exact;
            c.metric(format!("sin_rel_err_w{w}"), rel);
            c.check(
                rel <= 1e-3,
                format!("omega={w}: amplitude {} vs {exact}", fit.amplitude),
            );
        }
        Ok(())
    };
    if let Err(e) = run(&mut c) {
        c.error(&e, "sinusoid");
    }
    c.finish(
        12,
        "simulation consistency",
        format!("{traces} step traces reach their DC gains; sinusoid amplitudes match |T_dy(iω)|"),
    )
}

/// Runs every criterion; results are returned in criterion order.
pub fn run_all(cfg: &VerifyConfig) -> VerifySummary {
    let cfg = *cfg;
    let jobs: Vec<Box<dyn Fn() -> CriterionResult + Send + Sync>> = vec![
        Box::new(criterion_1),
        Box::new(criterion_2),
        Box::new(move || criterion_3(&cfg)),
        Box::new(move || criterion_4(&cfg)),
        Box::new(move || criterion_5(&cfg)),
        Box::new(criterion_6),
        Box::new(move || criterion_7(&cfg)),
        Box::new(criterion_8),
        Box::new(criterion_9),
        Box::new(criterion_10),
        Box::new(criterion_11),
        Box::new(criterion_12),
    ];
    let criteria: Vec<CriterionResult> = jobs.par_iter().map(|f| f()).collect();
    VerifySummary {
        config: cfg,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    }
}

/// Cross-check of the closed-form glycolysis transfer functions against
/// the generic assembly, used by the `glycolysis` command.
pub fn glycolysis_oracle_gap(gp: &GlycolysisParams) -> Result<f64> {
    let loops = loops_for(&build_plant(gp)?, &gp.controller())?;
    let t = closed_form_tfs(gp)?;
    let mut worst = 0.0f64;
    for s in [
        Complex64::new(0.3, 0.7),
        Complex64::new(2.0, -1.0),
        Complex64::new(-0.4, 3.0),
    ] {
        for (a, b) in [
            (&t.gy, &loops.gy),
            (&t.gh, &loops.gh),
            (&t.lb, &loops.lb),
            (&t.lh, &loops.lh),
        ] {
            worst = worst.max(rel_err(a.eval(s)?, b.eval(s)?));
        }
    }
    Ok(worst)
}
