//! JSON model descriptors.
//!
//! A descriptor is either a linear plant
//!
//! ```json
//! { "n": 2, "A_yy": -1, "A_yz": [0.5], "A_zy": [1], "A_zz": [[-2]],
//!   "B_yh": -1, "B_zh": [0], "sigma_y": 1, "sigma_x": 1, "a_xx": 0,
//!   "ybar": 1, "phat": 1, "dhat": {"dy": 1, "dz": 1, "dx": 1, "db": 1},
//!   "controller": {"type": "proportional", "h": 0.5} }
//! ```
//!
//! or a `glycolysis` object holding the case-study parameters, optionally
//! with its own `controller`.

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::glycolysis::{build_plant, GlycolysisParams};
use crate::plantmodel::{BufferParams, DisturbanceScales, LinearPlant, Scaling};
use crate::ratcalc::RationalTF;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ControllerDescriptor {
    Proportional { h: f64 },
    Rational { num: Vec<f64>, den: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearDescriptor {
    n: usize,
    #[serde(rename = "A_yy")]
    a_yy: f64,
    #[serde(rename = "A_yz", default)]
    a_yz: Vec<f64>,
    #[serde(rename = "A_zy", default)]
    a_zy: Vec<f64>,
    #[serde(rename = "A_zz", default)]
    a_zz: Vec<Vec<f64>>,
    #[serde(rename = "B_yh")]
    b_yh: f64,
    #[serde(rename = "B_zh", default)]
    b_zh: Vec<f64>,
    sigma_y: f64,
    sigma_x: f64,
    #[serde(default)]
    a_xx: f64,
    ybar: f64,
    phat: f64,
    #[serde(default)]
    dhat: DisturbanceScales,
    controller: ControllerDescriptor,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct GlycolysisDescriptor {
    glycolysis: GlycolysisParams,
    #[serde(default)]
    controller: Option<ControllerDescriptor>,
}

/// Controller of a model. Sweeping `h` sets the gain of a proportional
/// controller and multiplies a rational one.
#[derive(Clone, Debug, PartialEq)]
pub enum ControllerSpec {
    Proportional(f64),
    Rational(RationalTF),
}

impl ControllerSpec {
    fn from_descriptor(d: ControllerDescriptor) -> Result<Self> {
        match d {
            ControllerDescriptor::Proportional { h } if h.is_finite() => Ok(ControllerSpec::Proportional(h)),
            ControllerDescriptor::Proportional { h } => Err(Error::InvalidParameter(format!(
                "controller gain must be finite (got {h})"
            ))),
            ControllerDescriptor::Rational { num, den } => {
                let tf = RationalTF::from_coeffs(&num, &den)?;
                if !tf.is_proper() {
                    return Err(Error::Improper(tf.relative_degree()));
                }
                Ok(ControllerSpec::Rational(tf))
            }
        }
    }

    /// Nominal value of `h`: the gain, or 1 for a rational controller.
    pub fn nominal_h(&self) -> f64 {
        match self {
            ControllerSpec::Proportional(h) => *h,
            ControllerSpec::Rational(_) => 1.0,
        }
    }

    pub fn at(&self, h: f64) -> RationalTF {
        match self {
            ControllerSpec::Proportional(_) => RationalTF::constant(h),
            ControllerSpec::Rational(tf) => tf.scale(h),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub plant: LinearPlant,
    pub controller: ControllerSpec,
    pub glycolysis: Option<GlycolysisParams>,
}

impl Model {
    pub fn glycolysis(gp: GlycolysisParams, controller: Option<ControllerSpec>) -> Result<Self> {
        gp.validate()?;
        Ok(Model {
            plant: build_plant(&gp)?,
            controller: controller.unwrap_or(ControllerSpec::Proportional(gp.h)),
            glycolysis: Some(gp),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("model JSON: {e}")))?;
        let bad = |e: serde_json::Error| Error::InvalidParameter(format!("model descriptor: {e}"));
        if value.get("glycolysis").is_some() {
            let d: GlycolysisDescriptor = serde_json::from_value(value).map_err(bad)?;
            let controller = d.controller.map(ControllerSpec::from_descriptor).transpose()?;
            return Model::glycolysis(d.glycolysis, controller);
        }
        let d: LinearDescriptor = serde_json::from_value(value).map_err(bad)?;
        let m =
            d.n.checked_sub(1)
                .ok_or_else(|| Error::DimensionMismatch("n counts y and must be at least 1".into()))?;
        if d.a_zz.len() != m || d.a_zz.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch(format!("A_zz must be {m}×{m}")));
        }
        let a_zz = DMatrix::from_fn(m, m, |i, j| d.a_zz[i][j]);
        let plant = LinearPlant::new(
            d.a_yy,
            d.a_yz,
            d.a_zy,
            a_zz,
            d.b_yh,
            d.b_zh,
            BufferParams {
                sigma_y: d.sigma_y,
                sigma_x: d.sigma_x,
                a_xx: d.a_xx,
            },
            Scaling {
                ybar: d.ybar,
                phat: d.phat,
                dhat: d.dhat,
            },
        )?;
        Ok(Model {
            plant,
            controller: ControllerSpec::from_descriptor(d.controller)?,
            glycolysis: None,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Model::from_json(&text)
    }

    pub fn sigma_y(&self) -> f64 {
        self.plant.buffer.sigma_y
    }

    /// Plant and controller at one sweep point.
    pub fn at(&self, sigma_y: f64, h: f64) -> Result<(LinearPlant, RationalTF)> {
        let plant = match &self.glycolysis {
            Some(gp) => build_plant(&gp.with_sigma_y(sigma_y))?,
            None => self.plant.with_sigma_y(sigma_y)?,
        };
        Ok((plant, self.controller.at(h)))
    }
}
