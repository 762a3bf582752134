//! Mass-action test family with closed-form Jacobians.
//!
//! ```text
//! ẏ = k_prod·z·u_h - k_deg·y² - k1·y + k2·x
//! ż = k_in - k_conv·z·y
//! ẋ = k1·y - k2·x - k3·x
//! ```

use nalgebra::DMatrix;

use super::linear::BufferParams;
use super::nonlinear::{Jacobians, NonlinearModel, SteadyState};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MassActionParams {
    pub k_prod: f64,
    pub k_deg: f64,
    pub k_in: f64,
    pub k_conv: f64,
    /// Buffer forward rate, `g_y = k1·y`.
    pub k1: f64,
    /// Buffer reverse rate, `g_x = k2·x`.
    pub k2: f64,
    /// Buffer removal, `r_x = k3·x`.
    pub k3: f64,
}

impl Default for MassActionParams {
    fn default() -> Self {
        MassActionParams {
            k_prod: 1.0,
            k_deg: 1.0,
            k_in: 1.0,
            k_conv: 1.0,
            k1: 2.0,
            k2: 1.0,
            k3: 0.0,
        }
    }
}

/// Builds the nonlinear model. With `analytic = true` the exact
/// Jacobians are attached and [`super::linearize`] skips differencing.
pub fn mass_action_model(k: MassActionParams, analytic: bool) -> NonlinearModel {
    let MassActionParams {
        k_prod,
        k_deg,
        k_in,
        k_conv,
        k1,
        k2,
        k3,
    } = k;
    let model = NonlinearModel::new(
        2,
        Box::new(move |_y, z, u| k_prod * z[0] * u),
        Box::new(move |y, _z, _u| k_deg * y * y),
        Box::new(move |_y, _z, _u| vec![k_in]),
        Box::new(move |y, z, _u| vec![k_conv * z[0] * y]),
    )
    .with_buffer(
        Box::new(move |y, _x| k1 * y),
        Box::new(move |_y, x| k2 * x),
        Box::new(move |x| k3 * x),
    );
    if analytic {
        model.with_analytic(Box::new(move |ss| mass_action_jacobians(&k, ss)))
    } else {
        model
    }
}

pub fn mass_action_jacobians(k: &MassActionParams, ss: &SteadyState) -> Jacobians {
    let (y, z, u) = (ss.y, ss.z[0], ss.u_h);
    Jacobians {
        a_yy: -2.0 * k.k_deg * y,
        a_yz: vec![k.k_prod * u],
        a_zy: vec![-k.k_conv * z],
        a_zz: DMatrix::from_element(1, 1, -k.k_conv * y),
        b_yh: k.k_prod * z,
        b_zh: vec![0.0],
        buffer: BufferParams {
            sigma_y: k.k1,
            sigma_x: k.k2,
            a_xx: k.k3,
        },
    }
}
