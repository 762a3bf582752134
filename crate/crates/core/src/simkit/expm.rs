//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant, and exact zero-order-hold discretization.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::plantmodel::eigenvalues;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn overflow(a: &DMatrix<f64>) -> Error {
    let ev = eigenvalues(a).unwrap_or_default();
    let worst = ev.into_iter().max_by(|x, y| x.re.total_cmp(&y.re)).unwrap_or_default();
    Error::ExpOverflow {
        re: worst.re,
        im: worst.im,
    }
}

pub fn expm(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("expm needs a square matrix".into()));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    let nrm = norm1(a);
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = a / 2f64.powi(s);
    let b = &PADE13;
    let id = DMatrix::<f64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9]) + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1];
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8]) + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::NumericalFailure("singular Padé denominator".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(overflow(&(a * 2f64.powi(s))));
    }
    Ok(r)
}

/// `Φ = e^{A·dt}` and `Γ = ∫₀^dt e^{A·τ} dτ · B` from the exponential of
/// the augmented matrix `[[A, B], [0, 0]]·dt`.
pub fn discretize(a: &DMatrix<f64>, b: &DMatrix<f64>, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time step must be positive (got {dt})"
        )));
    }
    let n = a.nrows();
    let m = b.ncols();
    if b.nrows() != n {
        return Err(Error::DimensionMismatch("B must have as many rows as A".into()));
    }
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b * dt));
    let e = expm(&aug).map_err(|err| match err {
        Error::ExpOverflow { .. } => overflow(a),
        other => other,
    })?;
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_and_diagonal() {
        let e = expm(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert!((e[(0, 0)] - std::f64::consts::E).abs() < 1e-15);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-30.0, 0.5, 2.0]));
        let e = expm(&d).unwrap();
        for (k, v) in [-30.0f64, 0.5, 2.0].iter().enumerate() {
            assert!((e[(k, k)] - v.exp()).abs() <= 1e-14 * 2f64.exp(), "{k}");
        }
    }

    #[test]
    fn rotation() {
        let t = 7.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-13);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-13);
    }

    #[test]
    fn nilpotent() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let e = expm(&a).unwrap();
        assert!((e[(0, 2)] - 0.5).abs() < 1e-15);
        assert!((e[(0, 1)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_first_order() {
        let (phi, gamma) = discretize(
            &DMatrix::from_element(1, 1, -1.0),
            &DMatrix::from_element(1, 1, 1.0),
            0.5,
        )
        .unwrap();
        assert!((phi[(0, 0)] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gamma[(0, 0)] - (1.0 - (-0.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn overflow_reports_eigenvalue() {
        let a = DMatrix::from_element(1, 1, 1000.0);
        match discretize(&a, &DMatrix::from_element(1, 1, 1.0), 10.0) {
            Err(Error::ExpOverflow { re, .. }) => assert_eq!(re, 1000.0),
            other => panic!("{other:?}"),
        }
        assert!(discretize(&a, &DMatrix::from_element(1, 1, 1.0), 0.0).is_err());
    }
}
