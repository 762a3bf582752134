//! Closed-loop state-space realization: process, buffer and controller
//! states driven by the four disturbance channels.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linear::LinearPlant;
use crate::error::{Error, Result};
use crate::ratcalc::{Polynomial, RationalTF};

/// Disturbance entry point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Dy,
    /// Disturbance on intermediate `z_k` (zero-based).
    Dz(usize),
    Dx,
    Db,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Channel::Dy => write!(f, "dy"),
            Channel::Dz(0) => write!(f, "dz"),
            Channel::Dz(k) => write!(f, "dz{}", k + 1),
            Channel::Dx => write!(f, "dx"),
            Channel::Db => write!(f, "db"),
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dy" => Ok(Channel::Dy),
            "dz" | "dz1" => Ok(Channel::Dz(0)),
            "dx" => Ok(Channel::Dx),
            "db" => Ok(Channel::Db),
            other => other
                .strip_prefix("dz")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| k >= 1)
                .map(|k| Channel::Dz(k - 1))
                .ok_or_else(|| Error::InvalidParameter(format!("unknown channel '{other}'"))),
        }
    }
}

/// `ẋ = A x + B·diag(scales)·D`, `Y = C x + D_ff·D`.
///
/// `B` holds the structural signs of each channel; the magnitudes `d̂`
/// live in `channel_scales`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSpaceCL {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: Vec<f64>,
    pub channels: Vec<Channel>,
    pub channel_scales: Vec<f64>,
}

impl StateSpaceCL {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: Vec<f64>,
        channels: Vec<Channel>,
        channel_scales: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = channels.len();
        if a.ncols() != n
            || b.nrows() != n
            || b.ncols() != m
            || c.nrows() != 1
            || c.ncols() != n
            || d.len() != m
            || channel_scales.len() != m
        {
            return Err(Error::DimensionMismatch(format!(
                "A {}x{}, B {}x{}, C {}x{}, D {}, {} channels, {} scales",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols(),
                d.len(),
                m,
                channel_scales.len()
            )));
        }
        Ok(StateSpaceCL {
            a,
            b,
            c,
            d,
            channels,
            channel_scales,
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn channel_index(&self, ch: Channel) -> Result<usize> {
        self.channels
            .iter()
            .position(|&c| c == ch)
            .ok_or_else(|| Error::InvalidParameter(format!("channel {ch} not present")))
    }

    /// Input column for channel `ch` including its magnitude `d̂`.
    pub fn input_vector(&self, ch: Channel) -> Result<DVector<f64>> {
        let j = self.channel_index(ch)?;
        Ok(self.b.column(j) * self.channel_scales[j])
    }

    pub fn feedthrough(&self, ch: Channel) -> Result<f64> {
        let j = self.channel_index(ch)?;
        Ok(self.d[j] * self.channel_scales[j])
    }

    /// `C (sI - A)^{-1} b_ch + d_ch`.
    pub fn transfer_at(&self, s: Complex64, ch: Channel) -> Result<Complex64> {
        let n = self.order();
        let b = self.input_vector(ch)?.map(|v| Complex64::new(v, 0.0));
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - self.a[(i, j)]
        });
        let x = m.lu().solve(&b).ok_or(Error::PoleProximity { re: s.re, im: s.im })?;
        let y: Complex64 = (0..n).map(|k| x[k] * self.c[(0, k)]).sum();
        Ok(y + self.feedthrough(ch)?)
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        eigenvalues(&self.a)
    }
}

/// Eigenvalues via the real Schur form, sorted by real part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("state matrix entry".into()));
    }
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NumericalFailure("eigenvalue iteration failed".into()))?;
    let mut ev: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| Complex64::new(c.re, c.im))
        .collect();
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(x.im.partial_cmp(&y.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(ev)
}

/// Eigenvalue listing returned with the stability verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<Complex64>,
    pub rightmost: Option<Complex64>,
    pub axis_tol: f64,
}

/// Stable iff every eigenvalue has `Re < -axis_tol`.
pub fn is_internally_stable(ss: &StateSpaceCL, axis_tol: f64) -> Result<(bool, SpectralReport)> {
    let ev = ss.eigenvalues()?;
    let rightmost = ev.last().copied();
    let stable = ev.iter().all(|e| e.re < -axis_tol);
    Ok((
        stable,
        SpectralReport {
            eigenvalues: ev,
            rightmost,
            axis_tol,
        },
    ))
}

/// Controllable canonical form of a proper controller, split into direct
/// feedthrough and a strictly proper remainder.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerRealization {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: Vec<f64>,
    pub d: f64,
}

pub fn controllable_canonical(c_h: &RationalTF) -> Result<ControllerRealization> {
    let rd = c_h.relative_degree();
    if rd < 0 {
        return Err(Error::Improper(rd));
    }
    let den = c_h.den();
    let m = den.degree().unwrap_or(0);
    let d = if c_h.is_zero() || rd > 0 {
        0.0
    } else {
        c_h.num().leading()
    };
    let remainder: Polynomial = c_h.num() - &den.scale(d);
    let mut a = DMatrix::zeros(m, m);
    for i in 0..m.saturating_sub(1) {
        a[(i, i + 1)] = 1.0;
    }
    if m > 0 {
        for k in 0..m {
            a[(m - 1, k)] = -den.coeff(k);
        }
    }
    let mut b = DVector::zeros(m);
    if m > 0 {
        b[m - 1] = 1.0;
    }
    let c = (0..m).map(|k| remainder.coeff(k)).collect();
    Ok(ControllerRealization { a, b, c, d })
}

/// Assembles the closed loop with feedback `Δu_h = -(p̂/ȳ)·C_h(s)·Δy`.
///
/// State order: `Δy, Δz..., Δx, controller states`. Output `Y = Δy/ȳ`.
/// Columns: `d_y, d_z..., d_x, d_b`.
pub fn realize_closed_loop(p: &LinearPlant, c_h: &RationalTF) -> Result<StateSpaceCL> {
    p.validate()?;
    let ctrl = controllable_canonical(c_h)?;
    let nz = p.n_intermediates();
    let mc = ctrl.a.nrows();
    let ix = 1 + nz;
    let n = ix + 1 + mc;
    let k = p.scaling.phat / p.scaling.ybar;
    let buf = p.buffer;

    let mut a = DMatrix::zeros(n, n);
    a[(0, 0)] = p.a_yy - buf.sigma_y - k * p.b_yh * ctrl.d;
    for j in 0..nz {
        a[(0, 1 + j)] = p.a_yz[j];
        a[(1 + j, 0)] = p.a_zy[j] - k * p.b_zh[j] * ctrl.d;
        for l in 0..nz {
            a[(1 + j, 1 + l)] = p.a_zz[(j, l)];
        }
    }
    a[(0, ix)] = buf.sigma_x;
    a[(ix, 0)] = buf.sigma_y;
    a[(ix, ix)] = -(buf.sigma_x + buf.a_xx);
    for q in 0..mc {
        let col = ix + 1 + q;
        a[(0, col)] = -k * p.b_yh * ctrl.c[q];
        for j in 0..nz {
            a[(1 + j, col)] = -k * p.b_zh[j] * ctrl.c[q];
        }
        a[(col, 0)] = ctrl.b[q];
        for r in 0..mc {
            a[(col, ix + 1 + r)] = ctrl.a[(q, r)];
        }
    }

    let mut channels = vec![Channel::Dy];
    channels.extend((0..nz).map(Channel::Dz));
    channels.push(Channel::Dx);
    channels.push(Channel::Db);
    let nch = channels.len();
    let mut b = DMatrix::zeros(n, nch);
    b[(0, 0)] = 1.0;
    for j in 0..nz {
        b[(1 + j, 1 + j)] = 1.0;
    }
    b[(ix, nz + 1)] = 1.0;
    b[(0, nz + 2)] = -1.0;
    b[(ix, nz + 2)] = 1.0;

    let d = &p.scaling.dhat;
    let mut scales = vec![d.dy];
    scales.extend(std::iter::repeat_n(d.dz, nz));
    scales.push(d.dx);
    scales.push(d.db);

    let mut c = DMatrix::zeros(1, n);
    c[(0, 0)] = 1.0 / p.scaling.ybar;
    StateSpaceCL::new(a, b, c, vec![0.0; nch], channels, scales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plantmodel::{BufferParams, DisturbanceScales, Scaling};

    fn glyco(sigma_y: f64) -> LinearPlant {
        LinearPlant::new(
            -3.0,
            vec![2.0],
            vec![2.0],
            DMatrix::from_element(1, 1, -1.0),
            -3.5,
            vec![3.5],
            BufferParams {
                sigma_y,
                sigma_x: 1.0,
                a_xx: 0.0,
            },
            Scaling {
                ybar: 1.0,
                phat: 1.0,
                dhat: DisturbanceScales::default(),
            },
        )
        .unwrap()
    }

    #[test]
    fn open_loop_block_eigenvalues() {
        let ss = realize_closed_loop(&glyco(0.0), &RationalTF::zero()).unwrap();
        let block = ss.a.view((0, 0), (2, 2)).into_owned();
        assert_eq!(block, DMatrix::from_row_slice(2, 2, &[-3.0, 2.0, 2.0, -1.0]));
        let ev = eigenvalues(&block).unwrap();
        let s5 = 5f64.sqrt();
        assert!((ev[0].re - (-2.0 - s5)).abs() < 1e-12);
        assert!((ev[1].re - (-2.0 + s5)).abs() < 1e-12);
        let (stable, report) = is_internally_stable(&ss, 1e-9).unwrap();
        assert!(!stable);
        assert!((report.rightmost.unwrap().re - 0.2360679774997897).abs() < 1e-12);
    }

    #[test]
    fn proportional_gain_enters_y_row() {
        let h = 0.7;
        let ss = realize_closed_loop(&glyco(1.5), &RationalTF::constant(h)).unwrap();
        assert!((ss.a[(0, 0)] - (-3.0 - 1.5 + 3.5 * h)).abs() < 1e-15);
        assert!((ss.a[(1, 0)] - (2.0 - 3.5 * h)).abs() < 1e-15);
        assert_eq!(ss.order(), 3);
    }

    #[test]
    fn buffer_decouples_without_feedback() {
        let mut p = glyco(0.0);
        p.buffer.a_xx = 0.5;
        let ss = realize_closed_loop(&p, &RationalTF::zero()).unwrap();
        let ev = ss.eigenvalues().unwrap();
        assert!(ev.iter().any(|e| (e.re + 1.5).abs() < 1e-12 && e.im == 0.0));
    }

    #[test]
    fn diagonal_is_stable_and_origin_is_not() {
        let mk = |a: DMatrix<f64>| {
            StateSpaceCL::new(
                a,
                DMatrix::from_element(2, 1, 1.0),
                DMatrix::from_element(1, 2, 1.0),
                vec![0.0],
                vec![Channel::Dy],
                vec![1.0],
            )
            .unwrap()
        };
        let stable = mk(DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0])));
        assert!(is_internally_stable(&stable, 1e-9).unwrap().0);
        let marginal = mk(DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -2.0])));
        assert!(!is_internally_stable(&marginal, 1e-9).unwrap().0);
    }

    #[test]
    fn buffer_disturbance_signs() {
        let ss = realize_closed_loop(&glyco(1.0), &RationalTF::constant(0.5)).unwrap();
        let b = ss.input_vector(Channel::Db).unwrap();
        assert!(b[0] < 0.0 && b[2] > 0.0);
    }

    #[test]
    fn dynamic_controller_is_realized() {
        // C_h = (2s + 3)/(s + 1) = 2 + 1/(s+1)
        let c = RationalTF::from_coeffs(&[3.0, 2.0], &[1.0, 1.0]).unwrap();
        let r = controllable_canonical(&c).unwrap();
        assert_eq!(r.d, 2.0);
        assert_eq!(r.c, vec![1.0]);
        assert_eq!(r.a[(0, 0)], -1.0);
        let improper = RationalTF::from_coeffs(&[0.0, 0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!(matches!(controllable_canonical(&improper), Err(Error::Improper(-1))));
    }

    #[test]
    fn channel_names_round_trip() {
        for ch in [Channel::Dy, Channel::Dz(0), Channel::Dz(2), Channel::Dx, Channel::Db] {
            assert_eq!(ch.to_string().parse::<Channel>().unwrap(), ch);
        }
        assert!("dq".parse::<Channel>().is_err());
    }
}
