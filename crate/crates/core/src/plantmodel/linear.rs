use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Buffer exchange constants of the linearized model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BufferParams {
    /// `∂(g_y - g_x)/∂y`, forward buffering rate.
    pub sigma_y: f64,
    /// `∂(g_x - g_y)/∂x`, reverse buffering rate.
    pub sigma_x: f64,
    /// `∂r_x/∂x`, removal of the buffer species (zero when lossless).
    pub a_xx: f64,
}

/// Disturbance magnitudes `d̂` per channel. `dz` applies to every
/// intermediate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceScales {
    pub dy: f64,
    pub dz: f64,
    pub dx: f64,
    pub db: f64,
}

impl Default for DisturbanceScales {
    fn default() -> Self {
        DisturbanceScales {
            dy: 1.0,
            dz: 1.0,
            dx: 1.0,
            db: 1.0,
        }
    }
}

/// Output and input scaling. The buffer input scale `ĝ` always equals `ȳ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub ybar: f64,
    pub phat: f64,
    pub dhat: DisturbanceScales,
}

impl Scaling {
    pub fn ghat(&self) -> f64 {
        self.ybar
    }
}

/// Linearized process about a nominal steady state, with `n - 1`
/// intermediates `z`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearPlant {
    pub a_yy: f64,
    pub a_yz: Vec<f64>,
    pub a_zy: Vec<f64>,
    pub a_zz: DMatrix<f64>,
    pub b_yh: f64,
    pub b_zh: Vec<f64>,
    pub buffer: BufferParams,
    pub scaling: Scaling,
}

impl LinearPlant {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a_yy: f64,
        a_yz: Vec<f64>,
        a_zy: Vec<f64>,
        a_zz: DMatrix<f64>,
        b_yh: f64,
        b_zh: Vec<f64>,
        buffer: BufferParams,
        scaling: Scaling,
    ) -> Result<Self> {
        let p = LinearPlant {
            a_yy,
            a_yz,
            a_zy,
            a_zz,
            b_yh,
            b_zh,
            buffer,
            scaling,
        };
        p.validate()?;
        Ok(p)
    }

    /// A plant with no intermediates: `Δẏ = a_yy Δy + b_yh Δu_h`.
    pub fn first_order(a_yy: f64, b_yh: f64, buffer: BufferParams, scaling: Scaling) -> Result<Self> {
        LinearPlant::new(
            a_yy,
            Vec::new(),
            Vec::new(),
            DMatrix::zeros(0, 0),
            b_yh,
            Vec::new(),
            buffer,
            scaling,
        )
    }

    /// Number of process states (`y` plus intermediates).
    pub fn n(&self) -> usize {
        1 + self.a_yz.len()
    }

    pub fn n_intermediates(&self) -> usize {
        self.a_yz.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.a_yz.len();
        if self.a_zy.len() != m || self.b_zh.len() != m || self.a_zz.nrows() != m || self.a_zz.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "A_yz has {m} entries but A_zy has {}, B_zh has {}, A_zz is {}x{}",
                self.a_zy.len(),
                self.b_zh.len(),
                self.a_zz.nrows(),
                self.a_zz.ncols()
            )));
        }
        let all = [self.a_yy, self.b_yh]
            .into_iter()
            .chain(self.a_yz.iter().copied())
            .chain(self.a_zy.iter().copied())
            .chain(self.b_zh.iter().copied())
            .chain(self.a_zz.iter().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("plant matrix entry".into()));
        }
        let b = &self.buffer;
        if !(b.sigma_y >= 0.0 && b.sigma_x >= 0.0 && b.a_xx >= 0.0) {
            return Err(Error::InvalidParameter(
                "buffer constants sigma_y, sigma_x, a_xx must be nonnegative".into(),
            ));
        }
        if b.sigma_x + b.a_xx <= 0.0 {
            return Err(Error::InvalidParameter("sigma_x + a_xx must be positive".into()));
        }
        let s = &self.scaling;
        if !(s.ybar > 0.0 && s.ybar.is_finite()) {
            return Err(Error::InvalidParameter("ybar must be positive".into()));
        }
        if s.phat == 0.0 || !s.phat.is_finite() {
            return Err(Error::InvalidParameter("phat must be nonzero".into()));
        }
        Ok(())
    }

    pub fn with_sigma_y(&self, sigma_y: f64) -> Result<LinearPlant> {
        let mut p = self.clone();
        p.buffer.sigma_y = sigma_y;
        p.validate()?;
        Ok(p)
    }

    /// Dense `(y, z)` block of the open-loop state matrix without buffering.
    pub fn process_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        a[(0, 0)] = self.a_yy;
        for j in 0..n - 1 {
            a[(0, j + 1)] = self.a_yz[j];
            a[(j + 1, 0)] = self.a_zy[j];
            for k in 0..n - 1 {
                a[(j + 1, k + 1)] = self.a_zz[(j, k)];
            }
        }
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaling() -> Scaling {
        Scaling {
            ybar: 1.0,
            phat: 1.0,
            dhat: DisturbanceScales::default(),
        }
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let buf = BufferParams {
            sigma_y: 1.0,
            sigma_x: 1.0,
            a_xx: 0.0,
        };
        let err = LinearPlant::new(
            -1.0,
            vec![1.0],
            vec![],
            DMatrix::zeros(1, 1),
            1.0,
            vec![0.0],
            buf,
            scaling(),
        );
        assert!(matches!(err, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn rejects_degenerate_buffer_pole() {
        let buf = BufferParams {
            sigma_y: 1.0,
            sigma_x: 0.0,
            a_xx: 0.0,
        };
        assert!(LinearPlant::first_order(-1.0, 1.0, buf, scaling()).is_err());
    }

    #[test]
    fn rejects_zero_phat() {
        let buf = BufferParams {
            sigma_y: 1.0,
            sigma_x: 1.0,
            a_xx: 0.0,
        };
        let mut s = scaling();
        s.phat = 0.0;
        assert!(LinearPlant::first_order(-1.0, 1.0, buf, s).is_err());
    }
}
