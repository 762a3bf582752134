//! Fixed-precision number formatting for CSV and JSON artifacts.

/// Formats like C's `%.{sig}g`: `sig` significant digits, trailing zeros
/// removed, scientific notation outside `1e-4 <= |v| < 10^sig`.
pub fn fmt_g(v: f64, sig: usize) -> String {
    let sig = sig.max(1);
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", sig - 1, v);
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        strip_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `fmt_g` with 15 significant digits.
pub fn g15(v: f64) -> String {
    fmt_g(v, 15)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf() {
        assert_eq!(g15(0.0), "0");
        assert_eq!(g15(1.0), "1");
        assert_eq!(g15(-2.5), "-2.5");
        assert_eq!(g15(0.1), "0.1");
        assert_eq!(g15(1.0 / 3.0), "0.333333333333333");
        assert_eq!(g15(0.632120558828558), "0.632120558828558");
        assert_eq!(g15(1e-5), "1e-05");
        assert_eq!(g15(1.5e-7), "1.5e-07");
        assert_eq!(g15(123456789012345.0), "123456789012345");
        assert_eq!(g15(1e15), "1e+15");
        assert_eq!(g15(0.0001), "0.0001");
        assert_eq!(g15(999999999999999.9), "1e+15");
        assert_eq!(fmt_g(4.56789, 3), "4.57");
    }
}
