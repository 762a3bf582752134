//! Minimal glycolysis model: ATP `y`, lumped intermediates `z` and
//! creatine phosphate `x` as the buffer.
//!
//! ```text
//! ẏ = -q·f(y,u_h) + (q+1)·w(y)·z - g_y + g_x - V_y(1 + d_y)
//! ż = f(y,u_h) - w(y)·z
//! ẋ = g_y - g_x
//! ```
//!
//! The symbol `z` is overloaded in the literature: `zbar` is the steady
//! state of the intermediates, while `z_rhp` is the unstable zero of the
//! feedback loop `L_h`, located at `wbar/q`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plantmodel::{BufferParams, DisturbanceScales, LinearPlant, NonlinearModel, Scaling};
use crate::ratcalc::{Polynomial, RationalTF};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlycolysisParams {
    /// Autocatalytic investment-return ratio.
    pub q: f64,
    /// Nominal ATP demand.
    #[serde(rename = "V_y")]
    pub v_y: f64,
    /// PK rate slope term `w(ȳ)`.
    pub wbar: f64,
    pub zbar: f64,
    pub ybar: f64,
    /// `∂f/∂y`.
    pub alpha_f: f64,
    /// `∂w/∂y`.
    pub alpha_w: f64,
    /// `∂f/∂u_h`.
    pub beta_f: f64,
    pub sigma_y: f64,
    pub sigma_x: f64,
    /// Proportional feedback gain.
    pub h: f64,
}

impl Default for GlycolysisParams {
    fn default() -> Self {
        GlycolysisParams {
            q: 1.0,
            v_y: 1.0,
            wbar: 1.0,
            zbar: 1.0,
            ybar: 1.0,
            alpha_f: 1.0,
            alpha_w: -1.0,
            beta_f: 3.5,
            sigma_y: 0.0,
            sigma_x: 1.0,
            h: 0.5,
        }
    }
}

impl GlycolysisParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.q,
            self.v_y,
            self.wbar,
            self.zbar,
            self.ybar,
            self.alpha_f,
            self.alpha_w,
            self.beta_f,
            self.sigma_y,
            self.sigma_x,
            self.h,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("glycolysis parameters must be finite".into()));
        }
        for (name, v) in [
            ("q", self.q),
            ("V_y", self.v_y),
            ("wbar", self.wbar),
            ("zbar", self.zbar),
            ("ybar", self.ybar),
            ("beta_f", self.beta_f),
            ("sigma_x", self.sigma_x),
        ] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be positive (got {v})")));
            }
        }
        if self.sigma_y < 0.0 {
            return Err(Error::InvalidParameter("sigma_y must be nonnegative".into()));
        }
        let ss = self.wbar * self.zbar;
        if (self.v_y - ss).abs() > 1e-12 * self.v_y.abs().max(ss.abs()) {
            return Err(Error::InvalidParameter(format!(
                "steady state requires V_y = wbar·zbar ({} ≠ {})",
                self.v_y, ss
            )));
        }
        Ok(())
    }

    pub fn with_sigma_y(self, sigma_y: f64) -> Self {
        GlycolysisParams { sigma_y, ..self }
    }

    pub fn with_h(self, h: f64) -> Self {
        GlycolysisParams { h, ..self }
    }

    /// Unstable zero of the feedback loop, `wbar/q`.
    pub fn z_rhp(&self) -> f64 {
        self.wbar / self.q
    }

    /// Proportional controller `C_h = h`.
    pub fn controller(&self) -> RationalTF {
        RationalTF::constant(self.h)
    }

    /// Linear coefficient of the open-loop denominator
    /// `s² + b·s − wbar·alpha_f`.
    fn b1(&self) -> f64 {
        self.q * self.alpha_f - (self.q + 1.0) * self.alpha_w * self.zbar + self.wbar
    }
}

pub fn build_plant(gp: &GlycolysisParams) -> Result<LinearPlant> {
    gp.validate()?;
    let q = gp.q;
    LinearPlant::new(
        (q + 1.0) * gp.alpha_w * gp.zbar - q * gp.alpha_f,
        vec![(q + 1.0) * gp.wbar],
        vec![gp.alpha_f - gp.alpha_w * gp.zbar],
        DMatrix::from_element(1, 1, -gp.wbar),
        -q * gp.beta_f,
        vec![gp.beta_f],
        BufferParams {
            sigma_y: gp.sigma_y,
            sigma_x: gp.sigma_x,
            a_xx: 0.0,
        },
        Scaling {
            ybar: gp.ybar,
            phat: gp.v_y,
            dhat: DisturbanceScales {
                dy: -gp.v_y,
                ..Default::default()
            },
        },
    )
}

/// Closed-form transfer functions of the case study, written out
/// independently of the generic loop assembly.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GlycolysisTFs {
    pub gy: RationalTF,
    pub gh: RationalTF,
    pub gz_hat: RationalTF,
    pub lb: RationalTF,
    pub lh: RationalTF,
}

pub fn closed_form_tfs(gp: &GlycolysisParams) -> Result<GlycolysisTFs> {
    gp.validate()?;
    let (q, w) = (gp.q, gp.wbar);
    let den = Polynomial::new(vec![-w * gp.alpha_f, gp.b1(), 1.0]);
    let gy = RationalTF::new(Polynomial::new(vec![w / gp.ybar, 1.0 / gp.ybar]), den.clone())?;
    let gh = RationalTF::new(
        Polynomial::new(vec![gp.v_y * gp.beta_f * w, -gp.v_y * gp.beta_f * q]),
        Polynomial::new(vec![w, 1.0]),
    )?;
    let gz_hat = RationalTF::new(Polynomial::constant((q + 1.0) * w), Polynomial::new(vec![w, 1.0]))?;
    let lb = RationalTF::new(
        &Polynomial::new(vec![w, 1.0]) * &Polynomial::new(vec![0.0, gp.sigma_y]),
        &den * &Polynomial::new(vec![gp.sigma_x, 1.0]),
    )?;
    let k = -gp.v_y / gp.ybar * gp.beta_f * q * gp.h;
    let lh = RationalTF::new(Polynomial::new(vec![-k * w / q, k]), den)?;
    Ok(GlycolysisTFs { gy, gh, gz_hat, lb, lh })
}

/// `L_b` at the unstable zero `wbar/q`, in closed form.
pub fn lb_at_rhp_zero(gp: &GlycolysisParams) -> Result<f64> {
    gp.validate()?;
    let (q, w) = (gp.q, gp.wbar);
    let den = w + gp.b1() * q - gp.alpha_f * q * q;
    if den.abs() <= f64::EPSILON * (w.abs() + (gp.b1() * q).abs() + (gp.alpha_f * q * q).abs()) {
        return Err(Error::DegenerateInput(
            "the open-loop denominator vanishes at the unstable zero".into(),
        ));
    }
    Ok(gp.sigma_y * w / (w + gp.sigma_x * q) * q * (q + 1.0) / den)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BufferRegime {
    /// Buffer faster than the unstable zero: `sigma_x ≫ wbar/q`.
    Fast,
    /// Buffer slower than the unstable zero: `sigma_x ≪ wbar/q`.
    Slow,
    Intermediate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegimeReport {
    /// `σ_y·C_b(z)` exactly, `σ_y·wbar/(wbar + σ_x·q)`.
    pub exact_cb: f64,
    /// `(σ_y/σ_x)(wbar/q)`.
    pub fast_buffer_cb: f64,
    /// `σ_y`.
    pub slow_buffer_cb: f64,
    pub regime: BufferRegime,
}

impl RegimeReport {
    /// The asymptote matching the regime, if any.
    pub fn approximation(&self) -> Option<f64> {
        match self.regime {
            BufferRegime::Fast => Some(self.fast_buffer_cb),
            BufferRegime::Slow => Some(self.slow_buffer_cb),
            BufferRegime::Intermediate => None,
        }
    }
}

pub const FAST_RATIO: f64 = 10.0;
pub const SLOW_RATIO: f64 = 0.1;

pub fn asymptotic_regimes(gp: &GlycolysisParams) -> RegimeReport {
    let z = gp.z_rhp();
    let ratio = gp.sigma_x / z;
    let regime = if ratio >= FAST_RATIO {
        BufferRegime::Fast
    } else if ratio <= SLOW_RATIO {
        BufferRegime::Slow
    } else {
        BufferRegime::Intermediate
    };
    RegimeReport {
        exact_cb: gp.sigma_y * gp.wbar / (gp.wbar + gp.sigma_x * gp.q),
        fast_buffer_cb: gp.sigma_y / gp.sigma_x * z,
        slow_buffer_cb: gp.sigma_y,
        regime,
    }
}

/// A nonlinear realization with affine rates
/// `f = V_y + α_f(y − ȳ) + β_f·u_h` and `w = wbar + α_w(y − ȳ)`, and
/// linear buffering `g_y = σ_y·y`, `g_x = σ_x·x`. Its steady state at
/// `y = ȳ` is `z = zbar`, `u_h = 0`, and its Jacobians reproduce
/// [`build_plant`].
pub fn affine_rate_model(gp: &GlycolysisParams) -> Result<NonlinearModel> {
    gp.validate()?;
    let GlycolysisParams {
        q,
        v_y,
        wbar,
        ybar,
        alpha_f,
        alpha_w,
        beta_f,
        sigma_y,
        sigma_x,
        ..
    } = *gp;
    let f = move |y: f64, u: f64| v_y + alpha_f * (y - ybar) + beta_f * u;
    let w = move |y: f64| wbar + alpha_w * (y - ybar);
    Ok(NonlinearModel::new(
        2,
        Box::new(move |y, z, _u| (q + 1.0) * w(y) * z[0]),
        Box::new(move |y, _z, u| q * f(y, u) + v_y),
        Box::new(move |y, _z, u| vec![f(y, u)]),
        Box::new(move |y, z, _u| vec![w(y) * z[0]]),
    )
    .with_buffer(
        Box::new(move |y, _x| sigma_y * y),
        Box::new(move |_y, x| sigma_x * x),
        Box::new(|_x| 0.0),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::looptf::{analyze_plant, DEFAULT_CANCEL_TOL};
    use crate::plantmodel::{linearize, solve_steady_state, SteadyGuess, SteadyPin};
    use num_complex::Complex64;

    #[test]
    fn figure_parameters() {
        let p = build_plant(&GlycolysisParams::default()).unwrap();
        assert_eq!(p.a_yy, -3.0);
        assert_eq!(p.a_yz, vec![2.0]);
        assert_eq!(p.a_zy, vec![2.0]);
        assert_eq!(p.a_zz[(0, 0)], -1.0);
        assert_eq!(p.b_yh, -3.5);
        assert_eq!(p.b_zh, vec![3.5]);
        assert_eq!(p.scaling.dhat.dy, -1.0);
        assert_eq!(p.buffer.a_xx, 0.0);
    }

    #[test]
    fn no_autocatalytic_cost() {
        let gp = GlycolysisParams {
            q: 1e-300,
            ..Default::default()
        };
        let p = build_plant(&gp).unwrap();
        assert!((p.a_yy - gp.alpha_w * gp.zbar).abs() < 1e-12);
        assert!(p.b_yh.abs() < 1e-12);
    }

    #[test]
    fn steady_state_gate() {
        let gp = GlycolysisParams {
            v_y: 2.0,
            ..Default::default()
        };
        assert!(build_plant(&gp).is_err());
        assert!(closed_form_tfs(&gp).is_err());
    }

    #[test]
    fn closed_form_values() {
        let t = closed_form_tfs(&GlycolysisParams::default()).unwrap();
        assert_eq!(t.gy.den().coeffs(), &[-1.0, 4.0, 1.0]);
        assert_eq!(t.gz_hat.num().coeffs(), &[2.0]);
        assert_eq!(t.gz_hat.den().coeffs(), &[1.0, 1.0]);
        let zy = t.gy.zeros().unwrap();
        assert!((zy.roots[0].re + 1.0).abs() < 1e-12);
        let zl = t.gy.mul(&t.gh).zeros().unwrap();
        assert!(zl.roots.iter().any(|r| (r.re - 1.0).abs() < 1e-12));
    }

    #[test]
    fn closed_form_matches_loop_assembly() {
        for sy in [0.0, 0.5, 1.0, 4.0] {
            let gp = GlycolysisParams::default().with_sigma_y(sy).with_h(0.8);
            let p = build_plant(&gp).unwrap();
            let (ol, _, loops) = analyze_plant(&p, &gp.controller(), DEFAULT_CANCEL_TOL).unwrap();
            let t = closed_form_tfs(&gp).unwrap();
            assert!(t.gy.approx_eq(&loops.gy, 1e-12));
            assert!(t.gh.approx_eq(&loops.gh, 1e-12));
            assert!(t.gz_hat.approx_eq(&ol.gz[0], 1e-12));
            for s in [Complex64::new(0.3, 0.7), Complex64::new(2.0, -1.0)] {
                let a = t.lb.eval(s).unwrap();
                let b = loops.lb.eval(s).unwrap();
                assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
                let a = t.lh.eval(s).unwrap();
                let b = loops.lh.eval(s).unwrap();
                assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn lb_at_zero_examples() {
        let gp = GlycolysisParams::default();
        assert_eq!(lb_at_rhp_zero(&gp.with_sigma_y(0.0)).unwrap(), 0.0);
        assert!((lb_at_rhp_zero(&gp.with_sigma_y(1.0)).unwrap() - 0.25).abs() < 1e-15);
        let t = closed_form_tfs(&gp.with_sigma_y(1.0)).unwrap();
        let v = t.lb.eval(Complex64::new(gp.z_rhp(), 0.0)).unwrap();
        assert!((v.re - 0.25).abs() < 1e-12 && v.im.abs() < 1e-15);
    }

    #[test]
    fn regimes() {
        let fast = GlycolysisParams {
            sigma_x: 100.0,
            sigma_y: 50.0,
            ..Default::default()
        };
        let r = asymptotic_regimes(&fast);
        assert_eq!(r.regime, BufferRegime::Fast);
        assert!((r.approximation().unwrap() - 0.5).abs() < 1e-15);
        assert!((r.exact_cb - 50.0 / 101.0).abs() < 1e-15);
        assert!((r.approximation().unwrap() - r.exact_cb).abs() / r.exact_cb < 0.011);

        let slow = GlycolysisParams {
            sigma_x: 0.01,
            sigma_y: 2.0,
            ..Default::default()
        };
        let r = asymptotic_regimes(&slow);
        assert_eq!(r.regime, BufferRegime::Slow);
        assert_eq!(r.approximation(), Some(2.0));
        assert!((r.exact_cb - 2.0 / 1.01).abs() < 1e-14);

        let r = asymptotic_regimes(&GlycolysisParams::default());
        assert_eq!(r.regime, BufferRegime::Intermediate);
        assert_eq!(r.approximation(), None);
    }

    #[test]
    fn affine_rates_linearize_to_table() {
        let gp = GlycolysisParams {
            sigma_y: 2.0,
            ..Default::default()
        };
        let m = affine_rate_model(&gp).unwrap();
        let guess = SteadyGuess {
            y: 1.1,
            z: vec![0.9],
            x: 1.5,
            u_h: 0.1,
        };
        let ss = solve_steady_state(&m, SteadyPin::Setpoint(gp.ybar), &guess, 1e-13, 50).unwrap();
        assert!((ss.z[0] - gp.zbar).abs() < 1e-10);
        assert!(ss.u_h.abs() < 1e-10);
        let lin = linearize(&m, &ss, 1e-6).unwrap();
        let p = build_plant(&gp).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() < 1e-6;
        assert!(close(lin.a_yy, p.a_yy));
        assert!(close(lin.a_yz[0], p.a_yz[0]));
        assert!(close(lin.a_zy[0], p.a_zy[0]));
        assert!(close(lin.a_zz[(0, 0)], p.a_zz[(0, 0)]));
        assert!(close(lin.b_yh, p.b_yh));
        assert!(close(lin.b_zh[0], p.b_zh[0]));
        assert!(close(lin.buffer.sigma_y, 2.0));
        assert!(close(lin.buffer.sigma_x, 1.0));
    }

    #[test]
    fn serde_field_names() {
        let gp: GlycolysisParams = serde_json::from_str(r#"{"V_y": 1.0, "sigma_y": 4.0, "h": 1.0}"#).unwrap();
        assert_eq!(gp.sigma_y, 4.0);
        assert_eq!(gp.beta_f, 3.5);
        assert!(serde_json::from_str::<GlycolysisParams>(r#"{"Vy": 1.0}"#).is_err());
        let s = serde_json::to_string(&gp).unwrap();
        assert!(s.contains("\"V_y\""));
    }
}
