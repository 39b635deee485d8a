//! Bit-stable text output: `%.9g` floats, `\n` line endings.

use std::fmt::Write as _;

use crate::spectra::{DipReport, SensingCurve, Spectrum};
use crate::tmm::ReflectivityMap;

/// Formats like C's `%.9g`: 9 significant digits, trailing zeros removed,
/// exponent form outside `1e-4 <= |x| < 1e9`. Non-finite values print as
/// `nan`, `inf`, `-inf`.
pub fn fmt_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // rounding to 9 digits fixes the decimal exponent
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (P - 1 - exp) as usize;
        strip_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

pub const MAP_HEADER: &str = "lambda_nm,theta_deg,R";
pub const SENSING_HEADER: &str = "C_molar,dip_count,lambda1_nm,lambda2_nm,Rmin1,splitting_meV";
pub const DIPS_HEADER: &str = "lambda_nm,R_min,prominence";

pub fn map_csv(map: &ReflectivityMap) -> String {
    let mut out = String::with_capacity(map.values.len() * 32);
    out.push_str(MAP_HEADER);
    out.push('\n');
    for (i, &l) in map.lambdas.iter().enumerate() {
        let l = fmt_g9(l * 1e9);
        for (j, &t) in map.thetas.iter().enumerate() {
            let _ = writeln!(out, "{l},{},{}", fmt_g9(t.to_degrees()), fmt_g9(map.get(i, j)));
        }
    }
    out
}

/// A single-angle spectrum in the map layout.
pub fn spectrum_csv(spectrum: &Spectrum) -> String {
    let theta = spectrum.meta.theta.map(|t| fmt_g9(t.to_degrees())).unwrap_or_default();
    let mut out = String::from(MAP_HEADER);
    out.push('\n');
    for (&l, &r) in spectrum.lambdas.iter().zip(&spectrum.reflectance) {
        let _ = writeln!(out, "{},{theta},{}", fmt_g9(l * 1e9), fmt_g9(r));
    }
    out
}

pub fn dips_csv(report: &DipReport) -> String {
    let mut out = String::from(DIPS_HEADER);
    out.push('\n');
    for d in &report.dips {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_g9(d.lambda_min * 1e9),
            fmt_g9(d.r_min),
            fmt_g9(d.prominence)
        );
    }
    out
}

pub fn sensing_csv(curve: &SensingCurve) -> String {
    let mut out = String::from(SENSING_HEADER);
    out.push('\n');
    for r in &curve.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_g9(r.concentration),
            r.dip_count,
            opt(r.lambda_1.map(|l| l * 1e9)),
            opt(r.lambda_2.map(|l| l * 1e9)),
            opt(r.r_min_1),
            opt(r.splitting_mev)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g9() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (0.1, "0.1"),
            (1.0 / 3.0, "0.333333333"),
            (498.123456789, "498.123457"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (9999999995.0, "1e+10"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (3.7662e14, "3.7662e+14"),
            (1e-300, "1e-300"),
            (999999999.5, "1e+09"),
            (f64::NAN, "nan"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g9(x), want, "{x:e}");
        }
    }

    #[test]
    fn g9_roundtrips_to_nine_digits() {
        for &x in &[1.2345678912345e-7, 6.02214076e23, 299792458.0, 0.02] {
            let back: f64 = fmt_g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9);
        }
    }
}
