//! Time-domain simulation of the linear closed loop by exact
//! discretization.

pub mod expm;

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numfmt::g15;
use crate::plantmodel::{is_internally_stable, realize_closed_loop, Channel, LinearPlant, StateSpaceCL};
use crate::ratcalc::{RationalTF, DEFAULT_AXIS_TOL};

pub use expm::{discretize, expm};

/// Traces stop once `|y|` exceeds this.
pub const DIVERGENCE_THRESHOLD: f64 = 1e6;
pub const MAX_HORIZON: f64 = 1e4;
const FIT_PERIODS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimTrace {
    pub times: Vec<f64>,
    /// Scaled output `Δy/ȳ`.
    pub outputs: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
    pub channel: Channel,
    pub step_size: f64,
    pub dt: f64,
    /// Set when the run stopped early at the divergence threshold.
    pub truncated: bool,
}

impl SimTrace {
    pub fn final_value(&self) -> f64 {
        self.outputs.last().copied().unwrap_or(0.0)
    }

    /// `max − min` of the output over samples with `t > t0`.
    pub fn peak_to_peak_after(&self, t0: f64) -> f64 {
        let vals = self
            .times
            .iter()
            .zip(&self.outputs)
            .filter(|(t, _)| **t > t0)
            .map(|(_, y)| *y);
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| (lo.min(y), hi.max(y)));
        if hi >= lo {
            hi - lo
        } else {
            0.0
        }
    }

    /// CSV with header `t,y` (and `x1..xn` when states were recorded),
    /// 15 significant digits, LF line endings.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n_states = self.states.as_ref().and_then(|s| s.first()).map_or(0, Vec::len);
        let mut header = String::from("t,y");
        for k in 1..=n_states {
            header.push_str(&format!(",x{k}"));
        }
        writeln!(w, "{header}")?;
        for (i, (t, y)) in self.times.iter().zip(&self.outputs).enumerate() {
            let mut line = format!("{},{}", g15(*t), g15(*y));
            if let Some(states) = &self.states {
                for v in &states[i] {
                    line.push(',');
                    line.push_str(&g15(*v));
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// `dt = min(0.01, 0.1/max|λ|)` and `T = 50/|Re λ_slowest|`, capped at
/// [`MAX_HORIZON`].
pub fn default_timing(ss: &StateSpaceCL) -> Result<(f64, f64)> {
    let ev = ss.eigenvalues()?;
    let fastest = ev.iter().map(|e| e.norm()).fold(0.0, f64::max);
    let dt = if fastest > 0.0 { (0.1 / fastest).min(0.01) } else { 0.01 };
    let slowest = ev
        .iter()
        .filter(|e| e.re < -DEFAULT_AXIS_TOL)
        .map(|e| -e.re)
        .fold(f64::INFINITY, f64::min);
    let t = if slowest.is_finite() {
        (50.0 / slowest).min(MAX_HORIZON)
    } else {
        MAX_HORIZON
    };
    Ok((dt, t.max(dt)))
}

fn check_timing(dt: f64, t_end: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive (got {dt})")));
    }
    if !(t_end >= dt && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!("T must be at least dt (got {t_end})")));
    }
    Ok((t_end / dt + 1e-9).floor() as usize)
}

fn run(ss: &StateSpaceCL, channel: Channel, step: f64, dt: f64, t_end: f64, record: bool) -> Result<SimTrace> {
    let steps = check_timing(dt, t_end)?;
    let col = ss.channel_index(channel)?;
    let b = ss.input_vector(channel)?;
    let (phi, gamma) = discretize(&ss.a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()), dt)?;
    let gamma = gamma.column(0).into_owned() * step;
    let c = ss.c.row(0).transpose();
    let d = ss.d[col] * ss.channel_scales[col] * step;

    let n = ss.order();
    let mut x = DVector::zeros(n);
    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = record.then(|| Vec::with_capacity(steps + 1));
    let mut truncated = false;
    for k in 0..=steps {
        let y = c.dot(&x) + d;
        times.push(k as f64 * dt);
        outputs.push(y);
        if let Some(s) = states.as_mut() {
            s.push(x.as_slice().to_vec());
        }
        if !y.is_finite() || y.abs() > DIVERGENCE_THRESHOLD {
            truncated = true;
            break;
        }
        x = &phi * &x + &gamma;
    }
    Ok(SimTrace {
        times,
        outputs,
        states,
        channel,
        step_size: step,
        dt,
        truncated,
    })
}

/// Response to a constant input `step·d̂` on `channel` from rest.
pub fn step_response(ss: &StateSpaceCL, channel: Channel, step: f64, dt: f64, t_end: f64) -> Result<SimTrace> {
    run(ss, channel, step, dt, t_end, false)
}

/// As [`step_response`], also recording the full state history.
pub fn step_response_with_states(
    ss: &StateSpaceCL,
    channel: Channel,
    step: f64,
    dt: f64,
    t_end: f64,
) -> Result<SimTrace> {
    run(ss, channel, step, dt, t_end, true)
}

/// Free response `x_{k+1} = e^{A·dt} x_k` for `steps` steps.
pub fn free_response(a: &DMatrix<f64>, x0: &DVector<f64>, dt: f64, steps: usize) -> Result<Vec<DVector<f64>>> {
    let (phi, _) = discretize(a, &DMatrix::zeros(a.nrows(), 0), dt)?;
    let mut out = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    out.push(x.clone());
    for _ in 0..steps {
        x = &phi * &x;
        out.push(x.clone());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SinusoidFit {
    pub omega: f64,
    /// Output amplitude for a unit sinusoid scaled by the channel's `d̂`.
    pub amplitude: f64,
    pub phase_rad: f64,
    pub residual_rms: f64,
}

/// Drives `channel` with `sin(ωt)·d̂` from rest, waits for transients to
/// decay and fits `a·sin ωt + b·cos ωt + c` over whole periods.
///
/// The sinusoid is generated by an exosystem appended to the state, so
/// the whole run is an exact discretization with no input sampling error.
pub fn sinusoid_response(ss: &StateSpaceCL, channel: Channel, omega: f64) -> Result<SinusoidFit> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter("omega must be positive".into()));
    }
    let (stable, report) = is_internally_stable(ss, DEFAULT_AXIS_TOL)?;
    if !stable {
        return Err(Error::Unstable(format!("rightmost eigenvalue {:?}", report.rightmost)));
    }
    let slowest = report.eigenvalues.iter().map(|e| -e.re).fold(f64::INFINITY, f64::min);
    let fastest = report.eigenvalues.iter().map(|e| e.norm()).fold(omega, f64::max);
    let period = 2.0 * std::f64::consts::PI / omega;
    let dt = (period / 200.0).min(0.5 / fastest);
    let settle = (30.0 / slowest).max(3.0 * period);
    let per = (period / dt).ceil() as usize;
    let dt = period / per as f64;
    let settle_steps = (settle / dt).ceil() as usize;
    let fit_steps = per * FIT_PERIODS;

    let n = ss.order();
    let b = ss.input_vector(channel)?;
    let col = ss.channel_index(channel)?;
    let mut aug = DMatrix::zeros(n + 2, n + 2);
    aug.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    for i in 0..n {
        aug[(i, n)] = b[i];
    }
    aug[(n, n + 1)] = omega;
    aug[(n + 1, n)] = -omega;
    let (phi, _) = discretize(&aug, &DMatrix::zeros(n + 2, 0), dt)?;
    let mut cy = ss.c.row(0).transpose().resize_vertically(n + 2, 0.0);
    cy[n] = ss.d[col] * ss.channel_scales[col];

    let mut x = DVector::zeros(n + 2);
    x[n + 1] = 1.0;
    for _ in 0..settle_steps {
        x = &phi * &x;
    }
    let mut gram = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let mut samples = Vec::with_capacity(fit_steps);
    for k in 0..fit_steps {
        let t = (settle_steps + k) as f64 * dt;
        let y = cy.dot(&x);
        let basis = Vector3::new((omega * t).sin(), (omega * t).cos(), 1.0);
        gram += basis * basis.transpose();
        rhs += basis * y;
        samples.push((basis, y));
        x = &phi * &x;
    }
    let coef = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NumericalFailure("singular sinusoid fit".into()))?;
    let rms = (samples.iter().map(|(bs, y)| (bs.dot(&coef) - y).powi(2)).sum::<f64>() / samples.len() as f64).sqrt();
    Ok(SinusoidFit {
        omega,
        amplitude: coef[0].hypot(coef[1]),
        phase_rad: coef[1].atan2(coef[0]),
        residual_rms: rms,
    })
}

fn stable_with(p: &LinearPlant, shape: &RationalTF, h: f64) -> Result<bool> {
    let ss = realize_closed_loop(p, &shape.scale(h))?;
    Ok(is_internally_stable(&ss, DEFAULT_AXIS_TOL)?.0)
}

/// Critical gain of `C_h = h·shape` between `h_lo` and `h_hi` by
/// bisection on internal stability.
pub fn stability_boundary_gain_for(p: &LinearPlant, shape: &RationalTF, h_lo: f64, h_hi: f64, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let (mut lo, mut hi) = (h_lo, h_hi);
    let s_lo = stable_with(p, shape, lo)?;
    if s_lo == stable_with(p, shape, hi)? {
        return Err(Error::NoBracket("stability is the same at both gains"));
    }
    while (hi - lo).abs() > tol {
        let mid = 0.5 * (lo + hi);
        if stable_with(p, shape, mid)? == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Critical proportional gain `C_h = h`.
pub fn stability_boundary_gain(p: &LinearPlant, h_lo: f64, h_hi: f64, tol: f64) -> Result<f64> {
    stability_boundary_gain_for(p, &RationalTF::one(), h_lo, h_hi, tol)
}
