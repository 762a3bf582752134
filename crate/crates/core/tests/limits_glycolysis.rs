use std::f64::consts::PI;

use bufferloop::glycolysis::{build_plant, lb_at_rhp_zero, GlycolysisParams};
use bufferloop::limits::{allpass_factorize, analyze_limits, peak_numeric, Applicability, LimitOptions};
use bufferloop::looptf::{analyze_plant, DEFAULT_CANCEL_TOL};
use bufferloop::ratcalc::{Polynomial, RationalTF};
use num_complex::Complex64;

const PHI: f64 = 1.618_033_988_749_895;

fn report(sigma_y: f64, c_h: &RationalTF) -> bufferloop::limits::LimitReport {
    let gp = GlycolysisParams::default().with_sigma_y(sigma_y);
    let p = build_plant(&gp).unwrap();
    analyze_limits(&p, c_h, &RationalTF::one(), &LimitOptions::default()).unwrap()
}

#[test]
fn proportional_feedback_without_buffer() {
    let r = report(0.0, &RationalTF::constant(0.7));
    let f = r.hypothesis_flags;
    assert!(f.closed_loop_stable && f.single_rhp_zero && f.z_distinct_from_pk);
    assert!(!f.gh_strictly_proper);
    assert_eq!(r.bode.label, Applicability::Generalized);
    assert!(r.bode.rhs_buffer_only.is_none());
    let c = r.bode.comparison.unwrap();
    assert!(c.passed, "{c:?}");
    let expected = PI * (5f64.sqrt() - 2.0) + PI / 2.0 * 3.5 * 0.7;
    assert!((r.bode.rhs_analytic.unwrap() - expected).abs() < 1e-9);

    assert_eq!(r.weighted.len(), 1);
    let w = &r.weighted[0];
    assert!((w.z.re - 1.0).abs() < 1e-9);
    assert!((w.rhs_analytic.unwrap() - PI * PHI.ln()).abs() < 1e-9);
    assert!((w.lhs_numeric.unwrap() - PI * PHI.ln()).abs() < 1e-6);
    assert!((w.smp_identity.unwrap() - w.lhs_numeric.unwrap()).abs() < 1e-6);

    assert!((r.peak.bound_analytic.unwrap() - PHI).abs() < 1e-9);
    assert!(r.peak.peak_numeric.unwrap() >= PHI - 1e-6);
    assert!(r.all_passed());
}

#[test]
fn buffered_weighted_integral() {
    let r = report(1.0, &RationalTF::constant(0.7));
    assert!(r.hypothesis_flags.closed_loop_stable);
    let w = &r.weighted[0];
    let exact = PI * PHI.ln() - PI * 1.25f64.ln();
    assert!((w.rhs_analytic.unwrap() - exact).abs() < 1e-9);
    assert!((w.lhs_numeric.unwrap() - exact).abs() < 1e-6);
    assert!((w.lb_at_z.unwrap().re - 0.25).abs() < 1e-12);
    assert!((r.peak.bound_analytic.unwrap() - PHI / 1.25).abs() < 1e-9);
    assert!(r.all_passed());
}

#[test]
fn strictly_proper_controller_bode() {
    // C_h = h/(s+1) makes the feedback loop rolloff faster than the buffer
    let mut checked = 0;
    for (sy, h) in [(0.0, 0.6), (1.0, 0.8), (4.0, 1.5)] {
        let c = RationalTF::from_coeffs(&[h], &[1.0, 1.0]).unwrap();
        let r = report(sy, &c);
        if !r.hypothesis_flags.closed_loop_stable {
            continue;
        }
        let cmp = r.bode.comparison.unwrap();
        assert!(cmp.abs_diff <= 1e-6, "sy={sy} h={h}: {cmp:?}");
        assert!((r.bode.lim_sl.unwrap() - sy).abs() < 1e-9);
        checked += 1;
    }
    assert!(checked >= 2, "only {checked} stable configurations");
}

#[test]
fn unstable_configuration_has_no_lhs() {
    let r = report(0.0, &RationalTF::constant(0.1));
    assert!(!r.hypothesis_flags.closed_loop_stable);
    assert!(r.bode.lhs_numeric.is_none());
    assert!(r.weighted[0].lhs_numeric.is_none());
    assert!(r.peak.peak_numeric.is_none());
    assert!(r.bode.rhs_analytic.is_some());
}

#[test]
fn bound_decreases_with_buffering() {
    let bounds: Vec<f64> = [0.0, 1.0, 2.0, 4.0]
        .iter()
        .map(|&sy| report(sy, &RationalTF::constant(0.7)).peak.bound_analytic.unwrap())
        .collect();
    for w in bounds.windows(2) {
        assert!(w[1] < w[0], "{bounds:?}");
    }
    for (sy, b) in [0.0, 1.0, 2.0, 4.0].iter().zip(&bounds) {
        let gp = GlycolysisParams::default().with_sigma_y(*sy);
        assert!((b - PHI / (1.0 + lb_at_rhp_zero(&gp).unwrap())).abs() < 1e-9);
    }
}

#[test]
fn allpass_on_glycolysis_loop() {
    let gp = GlycolysisParams::default().with_h(0.7);
    let p = build_plant(&gp).unwrap();
    let (_, _, loops) = analyze_plant(&p, &gp.controller(), DEFAULT_CANCEL_TOL).unwrap();
    let poles = loops.l.poles().unwrap().rhp();
    let f = allpass_factorize(&loops.s, &poles).unwrap();
    let expected = RationalTF::new(
        Polynomial::linear_root(5f64.sqrt() - 2.0),
        Polynomial::linear_root(2.0 - 5f64.sqrt()),
    )
    .unwrap();
    assert!(f.s_ap.approx_eq(&expected, 1e-9));
    let smp = f.s_mp.eval(Complex64::new(1.0, 0.0)).unwrap().norm();
    assert!((smp - PHI).abs() < 1e-9);
    let pk = peak_numeric(&RationalTF::one(), &loops.s).unwrap();
    assert!(pk.peak >= PHI - 1e-6);
}
