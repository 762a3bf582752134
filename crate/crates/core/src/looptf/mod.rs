//! Open-loop, buffer, loop and closed-loop transfer functions of a
//! linearized buffer-feedback process.
//!
//! Everything here is built by rational elimination on polynomial
//! coefficients. The state-space route in [`crate::plantmodel`] computes the
//! same closed-loop maps independently.

mod freq;

pub use freq::{frequency_response, log_grid, FreqRow, FrequencyResponse, MIN_POINTS_PER_DECADE};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::plantmodel::{Channel, LinearPlant};
use crate::ratcalc::{Cancellation, HalfPlane, Polynomial, RationalTF, RootSet, DEFAULT_AXIS_TOL};

pub const DEFAULT_CANCEL_TOL: f64 = 1e-8;

/// Characteristic polynomial and adjugate coefficients of `sI - A`.
///
/// `adj(sI - A) = sum_{k=1}^{m} adj[k-1] · s^{m-k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolvent {
    pub char_poly: Polynomial,
    pub adj: Vec<DMatrix<f64>>,
}

/// Faddeev–LeVerrier recursion.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> Resolvent {
    let m = a.nrows();
    let mut c = vec![0.0; m + 1];
    c[m] = 1.0;
    let mut adj = Vec::with_capacity(m);
    let mut prev = DMatrix::<f64>::zeros(m, m);
    for k in 1..=m {
        let mk = a * &prev + DMatrix::identity(m, m) * c[m - k + 1];
        c[m - k] = -(a * &mk).trace() / k as f64;
        adj.push(mk.clone());
        prev = mk;
    }
    Resolvent {
        char_poly: Polynomial::new(c),
        adj,
    }
}

impl Resolvent {
    fn dim(&self) -> usize {
        self.adj.len()
    }

    /// Polynomial `row · adj(sI - A) · col`.
    pub fn bilinear(&self, row: &[f64], col: &[f64]) -> Polynomial {
        let m = self.dim();
        let mut coeffs = vec![0.0; m.max(1)];
        for (k, mk) in self.adj.iter().enumerate() {
            let mut v = 0.0;
            for i in 0..m {
                for j in 0..m {
                    v += row[i] * mk[(i, j)] * col[j];
                }
            }
            coeffs[m - 1 - k] = v;
        }
        Polynomial::new(coeffs)
    }

    /// Polynomial entries of the row vector `row · adj(sI - A)`.
    pub fn row_times_adj(&self, row: &[f64]) -> Vec<Polynomial> {
        let m = self.dim();
        (0..m)
            .map(|j| {
                let mut unit = vec![0.0; m];
                unit[j] = 1.0;
                self.bilinear(row, &unit)
            })
            .collect()
    }
}

/// Unscaled open-loop maps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpenLoopTFs {
    /// Entries of `A_yz (sI - A_zz)^{-1}`.
    pub gz: Vec<RationalTF>,
    pub gy_hat: RationalTF,
    pub gh_hat: RationalTF,
    /// `[1, gz...]`.
    pub gd_hat: Vec<RationalTF>,
    /// `det(sI - A_zz)`.
    pub char_zz: Polynomial,
}

pub fn build_open_loop(p: &LinearPlant) -> Result<OpenLoopTFs> {
    p.validate()?;
    let res = faddeev_leverrier(&p.a_zz);
    let c = res.char_poly.clone();

    let gz: Vec<RationalTF> = res
        .row_times_adj(&p.a_yz)
        .into_iter()
        .map(|num| RationalTF::new(num, c.clone()))
        .collect::<Result<_>>()?;

    let coupling = res.bilinear(&p.a_yz, &p.a_zy);
    let s_minus_ayy = Polynomial::new(vec![-p.a_yy, 1.0]);
    let gy_den = &(&s_minus_ayy * &c) - &coupling;
    let gy_hat = RationalTF::new(c.clone(), gy_den)?;

    let gh_num = &c.scale(p.b_yh) + &res.bilinear(&p.a_yz, &p.b_zh);
    let gh_hat = RationalTF::new(gh_num, c.clone())?;

    let mut gd_hat = vec![RationalTF::one()];
    gd_hat.extend(gz.iter().cloned());
    Ok(OpenLoopTFs {
        gz,
        gy_hat,
        gh_hat,
        gd_hat,
        char_zz: c,
    })
}

/// Buffer lead element and its low-pass complement.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BufferTFs {
    pub cb: RationalTF,
    pub cb_lp: RationalTF,
}

pub fn build_buffer(p: &LinearPlant) -> Result<BufferTFs> {
    let b = p.buffer;
    if b.sigma_x + b.a_xx <= 0.0 {
        return Err(Error::InvalidParameter("sigma_x + a_xx must be positive".into()));
    }
    let den = Polynomial::new(vec![b.sigma_x + b.a_xx, 1.0]);
    Ok(BufferTFs {
        cb: RationalTF::new(Polynomial::new(vec![b.a_xx, 1.0]), den.clone())?,
        cb_lp: RationalTF::new(Polynomial::constant(b.sigma_x), den)?,
    })
}

/// A cancellation recorded while reducing one of the loop maps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CancellationRecord {
    pub map: String,
    pub cancellation: Cancellation,
}

/// Scaled loop pieces and the disturbance-to-output maps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoopSet {
    pub gy: RationalTF,
    pub gh: RationalTF,
    pub gd: Vec<RationalTF>,
    pub ch: RationalTF,
    pub lb: RationalTF,
    pub lh: RationalTF,
    pub l: RationalTF,
    pub s: RationalTF,
    /// `d_y` followed by each `d_z` channel.
    pub t_dyz: Vec<RationalTF>,
    pub t_dx: RationalTF,
    pub t_db: RationalTF,
    pub cancellations: Vec<CancellationRecord>,
}

impl LoopSet {
    /// Closed-loop map for a disturbance channel.
    pub fn closed_loop(&self, ch: Channel) -> Result<&RationalTF> {
        match ch {
            Channel::Dy => Ok(&self.t_dyz[0]),
            Channel::Dz(k) => self
                .t_dyz
                .get(k + 1)
                .ok_or_else(|| Error::InvalidParameter(format!("channel {ch} not present"))),
            Channel::Dx => Ok(&self.t_dx),
            Channel::Db => Ok(&self.t_db),
        }
    }
}

struct Reducer {
    tol: f64,
    log: Vec<CancellationRecord>,
}

impl Reducer {
    fn reduce(&mut self, name: &str, g: RationalTF) -> Result<RationalTF> {
        let (r, cancelled) = g.minreal_logged(self.tol)?;
        self.log.extend(cancelled.into_iter().map(|c| CancellationRecord {
            map: name.to_string(),
            cancellation: c,
        }));
        Ok(r)
    }
}

fn unstable(r: &RootSet) -> Vec<num_complex::Complex64> {
    r.roots
        .iter()
        .copied()
        .filter(|&z| r.classify(z) != HalfPlane::Lhp)
        .collect()
}

/// Rejects controllers that cancel an unstable pole or zero of `gh`.
pub fn check_unstable_cancellation(gh: &RationalTF, c_h: &RationalTF, tol: f64) -> Result<()> {
    if c_h.is_zero() || gh.is_zero() {
        return Ok(());
    }
    let pairs = [
        (unstable(&gh.poles()?), c_h.zeros()?),
        (unstable(&gh.zeros()?), c_h.poles()?),
        (unstable(&c_h.poles()?), gh.zeros()?),
        (unstable(&c_h.zeros()?), gh.poles()?),
    ];
    for (bad, other) in pairs {
        for b in bad {
            if other.roots.iter().any(|&o| (o - b).norm() <= tol * (b.norm() + 1.0)) {
                return Err(Error::UnstableCancellation { re: b.re, im: b.im });
            }
        }
    }
    Ok(())
}

/// Assembles `L_b`, `L_h`, `L = L_b + L_h`, `S = 1/(1+L)` and the
/// closed-loop maps, all reduced with `cancel_tol`.
///
/// Every map is formed over the closed-loop characteristic polynomial
/// directly, so factors shared by `G_y`, `G_h` and the disturbance gains
/// never appear in the first place; `cancel_tol` only removes genuine
/// coincidences (for example a controller pole at the buffer pole).
pub fn build_loops(
    ol: &OpenLoopTFs,
    b: &BufferTFs,
    p: &LinearPlant,
    c_h: &RationalTF,
    cancel_tol: f64,
) -> Result<LoopSet> {
    if !c_h.is_proper() {
        return Err(Error::Improper(c_h.relative_degree()));
    }
    let sc = p.scaling;
    let gy = ol.gy_hat.scale(1.0 / sc.ybar);
    let gh = ol.gh_hat.scale(sc.phat);
    check_unstable_cancellation(&gh, c_h, cancel_tol)?;
    let gd: Vec<RationalTF> = ol
        .gd_hat
        .iter()
        .enumerate()
        .map(|(k, g)| g.scale(if k == 0 { sc.dhat.dy } else { sc.dhat.dz }))
        .collect();

    let c = &ol.char_zz;
    let q = ol.gy_hat.den();
    let h = ol.gh_hat.num();
    let (nb, db) = (b.cb.num(), b.cb.den());
    let (nc, dc) = (c_h.num(), c_h.den());
    let k = sc.phat / sc.ybar;
    let sy = p.buffer.sigma_y;

    let buffer_num = (c * nb).scale(sy);
    let feedback_num = (h * nc).scale(k);
    let open = &(q * db) * dc;
    let l_num = &(&buffer_num * dc) + &(&feedback_num * db);
    let chi = &open + &l_num;

    let mut red = Reducer {
        tol: cancel_tol,
        log: Vec::new(),
    };
    let mut map = |name: &str, num: Polynomial, den: &Polynomial| -> Result<RationalTF> {
        red.reduce(name, RationalTF::new(num, den.clone())?)
    };
    let lb = map("Lb", buffer_num.clone(), &(q * db))?;
    let lh = map("Lh", feedback_num.clone(), &(q * dc))?;
    let no_loop = l_num.is_zero();
    let l = map("L", l_num, &open)?;
    // without any loop the shared factor db·dc of S and G_y·C_b is exact
    let (s, chi, common, x_den) = if no_loop {
        (
            RationalTF::one(),
            q.clone(),
            Polynomial::constant(1.0 / sc.ybar),
            q * db,
        )
    } else {
        let s = map("S", open.clone(), &chi)?;
        (s, chi.clone(), (db * dc).scale(1.0 / sc.ybar), chi)
    };
    let x_common = if no_loop {
        Polynomial::constant(1.0 / sc.ybar)
    } else {
        dc.scale(1.0 / sc.ybar)
    };

    let mut t_dyz = Vec::with_capacity(gd.len());
    t_dyz.push(map("T_dy", (c * &common).scale(sc.dhat.dy), &chi)?);
    for (j, g) in ol.gz.iter().enumerate() {
        let num = (g.num() * &common).scale(sc.dhat.dz);
        t_dyz.push(map(&format!("T_dz{}", j + 1), num, &chi)?);
    }
    let cd = c * &x_common;
    let t_dx = map("T_dx", (&cd * b.cb_lp.num()).scale(sc.dhat.dx), &x_den)?;
    let t_db = map("T_db", (&cd * nb).scale(-sc.dhat.db), &x_den)?;

    Ok(LoopSet {
        gy,
        gh,
        gd,
        ch: c_h.clone(),
        lb,
        lh,
        l,
        s,
        t_dyz,
        t_dx,
        t_db,
        cancellations: red.log,
    })
}

/// Convenience: open loop, buffer and loops in one call.
pub fn analyze_plant(p: &LinearPlant, c_h: &RationalTF, cancel_tol: f64) -> Result<(OpenLoopTFs, BufferTFs, LoopSet)> {
    let ol = build_open_loop(p)?;
    let b = build_buffer(p)?;
    let loops = build_loops(&ol, &b, p, c_h, cancel_tol)?;
    Ok((ol, b, loops))
}

/// `det(sI - A_cl)` of the closed loop assembled by rational elimination:
/// the open-loop characteristic polynomial times the return difference.
pub fn closed_loop_characteristic(p: &LinearPlant, c_h: &RationalTF) -> Result<Polynomial> {
    if !c_h.is_proper() {
        return Err(Error::Improper(c_h.relative_degree()));
    }
    let res = faddeev_leverrier(&p.a_zz);
    let c = &res.char_poly;
    let q = &(&Polynomial::new(vec![-p.a_yy, 1.0]) * c) - &res.bilinear(&p.a_yz, &p.a_zy);
    let h = &c.scale(p.b_yh) + &res.bilinear(&p.a_yz, &p.b_zh);
    let buf = p.buffer;
    let xpole = Polynomial::new(vec![buf.sigma_x + buf.a_xx, 1.0]);
    let xzero = Polynomial::new(vec![buf.a_xx, 1.0]);
    let k = p.scaling.phat / p.scaling.ybar;
    let dc = c_h.den();
    let nc = c_h.num();
    let open = &(&q * &xpole) * dc;
    let buffer_term = (&(c * &xzero) * dc).scale(buf.sigma_y);
    let feedback_term = (&(&h * &xpole) * nc).scale(k);
    Ok(&(&open + &buffer_term) + &feedback_term)
}

/// True when every unstable pole of `L` is also a pole of `L_h`.
pub fn unstable_poles_in_lh(loops: &LoopSet, tol: f64) -> Result<bool> {
    let l_rhp = loops.l.poles_with_axis(DEFAULT_AXIS_TOL)?.rhp();
    let lh_poles = loops.lh.poles_with_axis(DEFAULT_AXIS_TOL)?;
    Ok(l_rhp
        .roots
        .iter()
        .all(|&p| lh_poles.roots.iter().any(|&q| (p - q).norm() <= tol * (p.norm() + 1.0))))
}
