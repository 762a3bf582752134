//! Nonlinear process model with buffering, its steady state and its
//! linearization.

use nalgebra::{DMatrix, DVector};

use super::linear::{BufferParams, DisturbanceScales, LinearPlant, Scaling};
use crate::error::{Error, Result};

/// Scalar rate of the process states: `(y, z, u_h) -> rate`.
pub type ScalarRate = Box<dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync>;
/// Vector rate for the intermediates: `(y, z, u_h) -> rates`.
pub type VectorRate = Box<dyn Fn(f64, &[f64], f64) -> Vec<f64> + Send + Sync>;
/// Buffering reaction: `(y, x) -> rate`.
pub type BufferRate = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Removal of the buffer species: `x -> rate`.
pub type RemovalRate = Box<dyn Fn(f64) -> f64 + Send + Sync>;
/// Exact partial derivatives at a steady state.
pub type AnalyticJacobian = Box<dyn Fn(&SteadyState) -> Jacobians + Send + Sync>;

/// Partial derivatives of the rates at a steady state.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobians {
    pub a_yy: f64,
    pub a_yz: Vec<f64>,
    pub a_zy: Vec<f64>,
    pub a_zz: DMatrix<f64>,
    pub b_yh: f64,
    pub b_zh: Vec<f64>,
    pub buffer: BufferParams,
}

/// ```text
/// ẏ = p_y(y,z,u_h) - r_y(y,z,u_h) - g_y(y,x) + g_x(y,x) + d_y - d_b
/// ż = p_z(y,z,u_h) - r_z(y,z,u_h) + d_z
/// ẋ = g_y(y,x) - g_x(y,x) - r_x(x) + d_x + d_b
/// ```
///
/// Rate closures must be pure.
pub struct NonlinearModel {
    pub n: usize,
    pub p_y: ScalarRate,
    pub r_y: ScalarRate,
    pub p_z: VectorRate,
    pub r_z: VectorRate,
    pub g_y: BufferRate,
    pub g_x: BufferRate,
    pub r_x: RemovalRate,
    pub analytic: Option<AnalyticJacobian>,
}

impl NonlinearModel {
    /// Model with lossless, inactive buffering (`g_y = g_x = r_x = 0`);
    /// replace the buffer closures with [`NonlinearModel::with_buffer`].
    pub fn new(n: usize, p_y: ScalarRate, r_y: ScalarRate, p_z: VectorRate, r_z: VectorRate) -> Self {
        NonlinearModel {
            n,
            p_y,
            r_y,
            p_z,
            r_z,
            g_y: Box::new(|_, _| 0.0),
            g_x: Box::new(|_, _| 0.0),
            r_x: Box::new(|_| 0.0),
            analytic: None,
        }
    }

    pub fn with_buffer(mut self, g_y: BufferRate, g_x: BufferRate, r_x: RemovalRate) -> Self {
        self.g_y = g_y;
        self.g_x = g_x;
        self.r_x = r_x;
        self
    }

    pub fn with_analytic(mut self, jac: AnalyticJacobian) -> Self {
        self.analytic = Some(jac);
        self
    }

    /// Net rate of the regulated species without buffering, `p_y - r_y`.
    pub fn net_y(&self, y: f64, z: &[f64], u_h: f64) -> f64 {
        (self.p_y)(y, z, u_h) - (self.r_y)(y, z, u_h)
    }

    pub fn net_z(&self, y: f64, z: &[f64], u_h: f64) -> Vec<f64> {
        let p = (self.p_z)(y, z, u_h);
        let r = (self.r_z)(y, z, u_h);
        p.iter().zip(&r).map(|(a, b)| a - b).collect()
    }

    /// Right-hand side with zero disturbances, ordered `(y, z..., x)`.
    pub fn rhs(&self, y: f64, z: &[f64], x: f64, u_h: f64) -> Vec<f64> {
        let gy = (self.g_y)(y, x);
        let gx = (self.g_x)(y, x);
        let mut out = Vec::with_capacity(self.n + 1);
        out.push(self.net_y(y, z, u_h) - gy + gx);
        out.extend(self.net_z(y, z, u_h));
        out.push(gy - gx - (self.r_x)(x));
        out
    }
}

/// Nominal operating point.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub y: f64,
    pub z: Vec<f64>,
    pub x: f64,
    pub u_h: f64,
    /// `-g_y(ȳ,x̄) + g_x(ȳ,x̄)`; zero for lossless buffering.
    pub u_b: f64,
    pub residual: f64,
}

/// Which quantity is held fixed while solving for the steady state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SteadyPin {
    /// `ȳ` is the set point; the nominal input `ū_h(ȳ)` is solved for.
    Setpoint(f64),
    /// `u_h` is given; `ȳ` is solved for.
    Input(f64),
}

/// Initial iterate; the pinned quantity is taken from [`SteadyPin`].
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyGuess {
    pub y: f64,
    pub z: Vec<f64>,
    pub x: f64,
    pub u_h: f64,
}

const MAX_HALVINGS: usize = 30;
const POSITIVITY_FLOOR: f64 = 1e-12;

struct Layout<'a> {
    model: &'a NonlinearModel,
    pin: SteadyPin,
}

impl Layout<'_> {
    fn nz(&self) -> usize {
        self.model.n - 1
    }

    // unknown vector: [free (u_h or y), z..., x]
    fn unpack<'v>(&self, v: &'v DVector<f64>) -> (f64, &'v [f64], f64, f64) {
        let nz = self.nz();
        let free = v[0];
        let z = &v.as_slice()[1..1 + nz];
        let x = v[1 + nz];
        match self.pin {
            SteadyPin::Setpoint(ybar) => (ybar, z, x, free),
            SteadyPin::Input(u) => (free, z, x, u),
        }
    }

    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let (y, z, x, u) = self.unpack(v);
        DVector::from_vec(self.model.rhs(y, z, x, u))
    }

    fn positive(&self, v: &DVector<f64>, floor: f64) -> bool {
        let (y, z, x, _) = self.unpack(v);
        y > floor && z.iter().all(|&c| c > floor) && x >= floor
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
}

/// Damped Newton solve of the algebraic steady-state equations.
pub fn solve_steady_state(
    model: &NonlinearModel,
    pin: SteadyPin,
    guess: &SteadyGuess,
    tol: f64,
    max_iter: usize,
) -> Result<SteadyState> {
    let nz = model
        .n
        .checked_sub(1)
        .ok_or_else(|| Error::DimensionMismatch("model dimension n must be at least 1".into()))?;
    if guess.z.len() != nz {
        return Err(Error::DimensionMismatch(format!(
            "guess has {} intermediates, model has {nz}",
            guess.z.len()
        )));
    }
    if !(guess.y > 0.0 && guess.x > 0.0 && guess.z.iter().all(|&c| c > 0.0)) {
        return Err(Error::InvalidParameter(
            "steady-state guess must be strictly positive".into(),
        ));
    }
    let layout = Layout { model, pin };
    let mut v = DVector::zeros(nz + 2);
    v[0] = match pin {
        SteadyPin::Setpoint(_) => guess.u_h,
        SteadyPin::Input(_) => guess.y,
    };
    for (k, &c) in guess.z.iter().enumerate() {
        v[1 + k] = c;
    }
    v[1 + nz] = guess.x;
    let scale = guess
        .z
        .iter()
        .chain([guess.y, guess.x].iter())
        .fold(0.0_f64, |m, c| m.max(c.abs()));
    let floor = POSITIVITY_FLOOR * scale;

    let mut f = layout.residual(&v);
    check_finite(&f)?;
    let mut norm = inf_norm(&f);
    for iter in 0..max_iter {
        if norm <= tol {
            return Ok(finish(&layout, &v, norm));
        }
        let jac = fd_jacobian(&layout, &v)?;
        let step = jac
            .lu()
            .solve(&(-&f))
            .filter(|s| s.iter().all(|c| c.is_finite()))
            .ok_or(Error::SingularJacobian { iteration: iter })?;

        let mut lambda = 1.0;
        let mut accepted = false;
        let mut hit_floor = false;
        for _ in 0..=MAX_HALVINGS {
            let trial = &v + &step * lambda;
            if !layout.positive(&trial, floor) {
                hit_floor = true;
                lambda *= 0.5;
                continue;
            }
            let ft = layout.residual(&trial);
            let nt = inf_norm(&ft);
            if nt.is_finite() && nt < norm {
                v = trial;
                f = ft;
                norm = nt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            if norm <= tol {
                break;
            }
            return Err(if hit_floor {
                Error::NegativeConcentration
            } else {
                Error::NonConvergence {
                    what: "steady-state Newton iteration",
                    iterations: iter,
                    residual: norm,
                }
            });
        }
    }
    if norm <= tol {
        Ok(finish(&layout, &v, norm))
    } else {
        Err(Error::NonConvergence {
            what: "steady-state Newton iteration",
            iterations: max_iter,
            residual: norm,
        })
    }
}

fn check_finite(f: &DVector<f64>) -> Result<()> {
    if f.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite("steady-state residual".into()))
    }
}

fn fd_jacobian(layout: &Layout, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let m = v.len();
    let mut jac = DMatrix::zeros(m, m);
    for k in 0..m {
        let h = 1e-7 * (1.0 + v[k].abs());
        let mut plus = v.clone();
        let mut minus = v.clone();
        plus[k] += h;
        minus[k] -= h;
        let fp = layout.residual(&plus);
        let fm = layout.residual(&minus);
        check_finite(&fp)?;
        check_finite(&fm)?;
        jac.set_column(k, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

fn finish(layout: &Layout, v: &DVector<f64>, residual: f64) -> SteadyState {
    let (y, z, x, u_h) = layout.unpack(v);
    let m = layout.model;
    SteadyState {
        y,
        z: z.to_vec(),
        x,
        u_h,
        u_b: -(m.g_y)(y, x) + (m.g_x)(y, x),
        residual,
    }
}

pub const DEFAULT_H_REL: f64 = 1e-6;

fn central<F: Fn(f64) -> f64>(f: F, at: f64, h_rel: f64) -> Result<f64> {
    let h = h_rel * (1.0 + at.abs());
    let (a, b) = (f(at + h), f(at - h));
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite(format!("rate evaluation near {at}")));
    }
    Ok((a - b) / (2.0 * h))
}

/// Partial derivatives by central differences with step
/// `h_rel·(1 + |v|)`, or the model's analytic Jacobian when present.
pub fn model_jacobians(m: &NonlinearModel, ss: &SteadyState, h_rel: f64) -> Result<Jacobians> {
    if let Some(jac) = &m.analytic {
        return Ok(jac(ss));
    }
    fd_jacobians(m, ss, h_rel)
}

/// Always differences, ignoring any analytic Jacobian.
pub fn fd_jacobians(m: &NonlinearModel, ss: &SteadyState, h_rel: f64) -> Result<Jacobians> {
    let nz = m.n - 1;
    let (y, z, x, u) = (ss.y, ss.z.as_slice(), ss.x, ss.u_h);
    let with_z = |j: usize, val: f64| {
        let mut zz = z.to_vec();
        zz[j] = val;
        zz
    };

    let a_yy = central(|t| m.net_y(t, z, u), y, h_rel)?;
    let b_yh = central(|t| m.net_y(y, z, t), u, h_rel)?;
    let mut a_yz = vec![0.0; nz];
    let mut a_zy = vec![0.0; nz];
    let mut b_zh = vec![0.0; nz];
    let mut a_zz = DMatrix::zeros(nz, nz);
    for j in 0..nz {
        a_yz[j] = central(|t| m.net_y(y, &with_z(j, t), u), z[j], h_rel)?;
        a_zy[j] = central(|t| m.net_z(t, z, u)[j], y, h_rel)?;
        b_zh[j] = central(|t| m.net_z(y, z, t)[j], u, h_rel)?;
        for k in 0..nz {
            a_zz[(j, k)] = central(|t| m.net_z(y, &with_z(k, t), u)[j], z[k], h_rel)?;
        }
    }
    let sigma_y = central(|t| (m.g_y)(t, x) - (m.g_x)(t, x), y, h_rel)?;
    let sigma_x = central(|t| (m.g_x)(y, t) - (m.g_y)(y, t), x, h_rel)?;
    let a_xx = central(|t| (m.r_x)(t), x, h_rel)?;
    Ok(Jacobians {
        a_yy,
        a_yz,
        a_zy,
        a_zz,
        b_yh,
        b_zh,
        buffer: BufferParams { sigma_y, sigma_x, a_xx },
    })
}

/// Linearizes about `ss`; scaling defaults to `ȳ = ss.y`, `p̂ = 1` and unit
/// disturbance magnitudes.
pub fn linearize(m: &NonlinearModel, ss: &SteadyState, h_rel: f64) -> Result<LinearPlant> {
    let j = model_jacobians(m, ss, h_rel)?;
    // tiny negative differencing noise on a zero derivative is not a sign error
    let clamp = |v: f64| if v < 0.0 && v > -1e-9 { 0.0 } else { v };
    let buffer = BufferParams {
        sigma_y: clamp(j.buffer.sigma_y),
        sigma_x: clamp(j.buffer.sigma_x),
        a_xx: clamp(j.buffer.a_xx),
    };
    LinearPlant::new(
        j.a_yy,
        j.a_yz,
        j.a_zy,
        j.a_zz,
        j.b_yh,
        j.b_zh,
        buffer,
        Scaling {
            ybar: ss.y,
            phat: 1.0,
            dhat: DisturbanceScales::default(),
        },
    )
}
