use serde::Serialize;

use crate::error::{Error, Result};
use crate::ratcalc::RationalTF;

/// Grids coarser than this may unwrap phase incorrectly.
pub const MIN_POINTS_PER_DECADE: f64 = 40.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreqRow {
    pub omega: f64,
    pub mag_db: f64,
    pub phase_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrequencyResponse {
    pub rows: Vec<FreqRow>,
    pub warnings: Vec<String>,
}

impl FrequencyResponse {
    /// Row with the largest magnitude.
    pub fn peak(&self) -> Option<FreqRow> {
        self.rows
            .iter()
            .copied()
            .max_by(|a, b| a.mag_db.partial_cmp(&b.mag_db).unwrap_or(std::cmp::Ordering::Equal))
    }
}

/// Logarithmic grid from `wmin` to `wmax` with `ppd` points per decade;
/// both endpoints included. `wmin == wmax` yields a single point.
pub fn log_grid(wmin: f64, wmax: f64, ppd: usize) -> Result<Vec<f64>> {
    if !(wmin > 0.0 && wmax >= wmin && wmin.is_finite() && wmax.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "frequency range must satisfy 0 < wmin <= wmax (got {wmin}, {wmax})"
        )));
    }
    if wmin == wmax {
        return Ok(vec![wmin]);
    }
    if ppd == 0 {
        return Err(Error::InvalidParameter("points per decade must be positive".into()));
    }
    let decades = (wmax / wmin).log10();
    let steps = (decades * ppd as f64).ceil() as usize;
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                wmax
            } else {
                wmin * 10f64.powf(decades * k as f64 / steps as f64)
            }
        })
        .collect())
}

/// Bode magnitude (dB) and continuously unwrapped phase (degrees).
pub fn frequency_response(g: &RationalTF, grid: &[f64]) -> Result<FrequencyResponse> {
    if grid.iter().any(|&w| !(w > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "frequency grid must be positive and strictly increasing".into(),
        ));
    }
    let mut warnings = Vec::new();
    if grid.len() > 1 {
        let density = (grid.len() - 1) as f64 / (grid[grid.len() - 1] / grid[0]).log10();
        if density < MIN_POINTS_PER_DECADE {
            let msg =
                format!("grid has {density:.1} points/decade; phase unwrapping needs at least {MIN_POINTS_PER_DECADE}");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let mut rows = Vec::with_capacity(grid.len());
    let mut prev: Option<f64> = None;
    for &omega in grid {
        let v = g.eval_jw(omega)?;
        let raw = v.arg().to_degrees();
        let phase = match prev {
            None => raw,
            Some(p) => raw + 360.0 * ((p - raw) / 360.0).round(),
        };
        prev = Some(phase);
        rows.push(FreqRow {
            omega,
            mag_db: 20.0 * v.norm().log10(),
            phase_deg: phase,
        });
    }
    Ok(FrequencyResponse { rows, warnings })
}
