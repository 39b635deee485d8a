//! Dispersive permittivity models for the constituent media.
//!
//! All models follow the `exp(-i omega t)` time convention, so passive media
//! have `Im eps >= 0`. Frequencies are angular frequencies in rad/s and
//! wavelengths are vacuum wavelengths in metres.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// CODATA 2018 values (SI).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Elementary charge [C].
    pub e: f64,
    /// Electron mass [kg].
    pub m: f64,
    /// Vacuum permittivity [F/m].
    pub eps0: f64,
    /// Speed of light [m/s].
    pub c: f64,
    /// Reduced Planck constant [J s].
    pub hbar: f64,
    /// Avogadro constant [1/mol].
    pub n_a: f64,
}

impl PhysicalConstants {
    pub const CODATA2018: PhysicalConstants = PhysicalConstants {
        e: 1.602_176_634e-19,
        m: 9.109_383_701_5e-31,
        eps0: 8.854_187_812_8e-12,
        c: 299_792_458.0,
        hbar: 1.054_571_817e-34,
        n_a: 6.022_140_76e23,
    };

    /// Photon energy in meV for an angular frequency in rad/s.
    pub fn omega_to_mev(&self, omega: f64) -> f64 {
        self.hbar * omega / self.e * 1e3
    }

    pub fn wavelength_to_omega(&self, lambda: f64) -> f64 {
        2.0 * PI * self.c / lambda
    }

    pub fn omega_to_wavelength(&self, omega: f64) -> f64 {
        2.0 * PI * self.c / omega
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::CODATA2018
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("wavelength {lambda_nm:.4} nm is outside the tabulated range [{min_nm:.4}, {max_nm:.4}] nm")]
    OutOfRange {
        lambda_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("frequency must be positive and finite, got {0}")]
    InvalidFrequency(f64),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("table error: {0}")]
    Table(String),
}

/// A single tabulated sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TablePoint {
    /// Vacuum wavelength [m].
    pub lambda: f64,
    pub eps: Complex64,
}

/// Permittivity samples on a strictly increasing wavelength grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<TablePoint>", into = "Vec<TablePoint>")]
pub struct PermittivityTable {
    points: Vec<TablePoint>,
}

impl PermittivityTable {
    pub fn new(points: Vec<TablePoint>) -> Result<Self, MaterialError> {
        if points.len() < 2 {
            return Err(MaterialError::Table(format!(
                "need at least 2 samples, got {}",
                points.len()
            )));
        }
        for (i, w) in points.windows(2).enumerate() {
            if !(w[1].lambda > w[0].lambda) {
                return Err(MaterialError::Table(format!(
                    "wavelengths must be strictly increasing (row {})",
                    i + 1
                )));
            }
        }
        if let Some(p) = points
            .iter()
            .find(|p| !p.lambda.is_finite() || !p.eps.re.is_finite() || !p.eps.im.is_finite())
        {
            return Err(MaterialError::Table(format!("non-finite sample at {} m", p.lambda)));
        }
        if let Some(p) = points.iter().find(|p| p.eps.im < 0.0) {
            return Err(MaterialError::Table(format!(
                "gain sample (Im eps < 0) at {:.4} nm",
                p.lambda * 1e9
            )));
        }
        Ok(Self { points })
    }

    /// Reads `wavelength_nm, eps_re, eps_im` rows. A header row is allowed.
    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self, MaterialError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut points = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| MaterialError::Table(e.to_string()))?;
            if rec.len() != 3 {
                return Err(MaterialError::Table(format!(
                    "row {}: expected 3 columns, got {}",
                    row + 1,
                    rec.len()
                )));
            }
            let parsed: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => points.push(TablePoint {
                    lambda: v[0] * 1e-9,
                    eps: Complex64::new(v[1], v[2]),
                }),
                // header line
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(MaterialError::Table(format!("row {}: {e}", row + 1)));
                }
            }
        }
        Self::new(points)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, MaterialError> {
        let file = std::fs::File::open(path)
            .map_err(|e| MaterialError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn points(&self) -> &[TablePoint] {
        &self.points
    }

    pub fn range(&self) -> (f64, f64) {
        (self.points[0].lambda, self.points[self.points.len() - 1].lambda)
    }

    /// Linear interpolation in wavelength, real and imaginary parts separately.
    pub fn interpolate(&self, lambda: f64) -> Result<Complex64, MaterialError> {
        let (lo, hi) = self.range();
        if !(lambda >= lo && lambda <= hi) {
            return Err(MaterialError::OutOfRange {
                lambda_nm: lambda * 1e9,
                min_nm: lo * 1e9,
                max_nm: hi * 1e9,
            });
        }
        let idx = self.points.partition_point(|p| p.lambda <= lambda);
        if idx == self.points.len() {
            return Ok(self.points[idx - 1].eps);
        }
        let (a, b) = (self.points[idx - 1], self.points[idx]);
        let t = (lambda - a.lambda) / (b.lambda - a.lambda);
        Ok(a.eps + (b.eps - a.eps) * t)
    }
}

impl TryFrom<Vec<TablePoint>> for PermittivityTable {
    type Error = MaterialError;
    fn try_from(points: Vec<TablePoint>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<PermittivityTable> for Vec<TablePoint> {
    fn from(t: PermittivityTable) -> Self {
        t.points
    }
}

/// Closed-form or tabulated description of `eps(omega)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DispersionModel {
    Constant {
        eps: Complex64,
    },
    /// `eps_inf - omega_p^2 / (omega^2 + i gamma omega)`
    Drude {
        eps_inf: f64,
        omega_p: f64,
        gamma: f64,
    },
    /// `eps_b + omega_p^2 / (omega_0^2 - omega^2 - i omega gamma)`
    Lorentz {
        eps_b: f64,
        omega_p: f64,
        omega_0: f64,
        gamma: f64,
    },
    Tabulated {
        table: PermittivityTable,
    },
}

impl DispersionModel {
    pub fn constant(eps: f64) -> Self {
        DispersionModel::Constant {
            eps: Complex64::new(eps, 0.0),
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match *self {
            DispersionModel::Constant { eps } if eps.im < 0.0 || !eps.is_finite() => Err(
                MaterialError::InvalidParameter(format!("constant eps {eps} must be finite with Im >= 0")),
            ),
            DispersionModel::Drude { omega_p, gamma, .. } if omega_p < 0.0 || gamma < 0.0 => {
                Err(MaterialError::InvalidParameter(
                    "Drude omega_p and gamma must be >= 0".into(),
                ))
            }
            DispersionModel::Lorentz {
                omega_p,
                omega_0,
                gamma,
                ..
            } if omega_p < 0.0 || omega_0 < 0.0 || gamma < 0.0 => Err(
                MaterialError::InvalidParameter("Lorentz omega_p, omega_0 and gamma must be >= 0".into()),
            ),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, omega: f64) -> Result<Complex64, MaterialError> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(MaterialError::InvalidFrequency(omega));
        }
        Ok(match self {
            DispersionModel::Constant { eps } => *eps,
            DispersionModel::Drude {
                eps_inf,
                omega_p,
                gamma,
            } => {
                let denom = Complex64::new(omega * omega, gamma * omega);
                Complex64::new(*eps_inf, 0.0) - omega_p * omega_p / denom
            }
            DispersionModel::Lorentz {
                eps_b,
                omega_p,
                omega_0,
                gamma,
            } => lorentz_term(*eps_b, *omega_p, *omega_0, *gamma, omega),
            DispersionModel::Tabulated { table } => {
                let lambda = PhysicalConstants::CODATA2018.omega_to_wavelength(omega);
                table.interpolate(lambda)?
            }
        })
    }
}

fn lorentz_term(eps_b: f64, omega_p: f64, omega_0: f64, gamma: f64, omega: f64) -> Complex64 {
    if omega_p == 0.0 {
        return Complex64::new(eps_b, 0.0);
    }
    let denom = Complex64::new(omega_0 * omega_0 - omega * omega, -omega * gamma);
    Complex64::new(eps_b, 0.0) + omega_p * omega_p / denom
}

/// Free-function form of [`DispersionModel::evaluate`].
pub fn evaluate_permittivity(model: &DispersionModel, omega: f64) -> Result<Complex64, MaterialError> {
    model.evaluate(omega)
}

/// Dye solution modelled as a Lorentz ensemble whose plasma frequency follows
/// from the molar concentration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyeModel {
    /// Transition frequency [rad/s].
    pub omega_0: f64,
    /// Damping [rad/s].
    pub gamma: f64,
    /// Oscillator strength factor, in (0, 1].
    pub h: f64,
    /// Concentration [mol/l].
    pub concentration: f64,
    /// Background permittivity of the host solution.
    #[serde(default = "one")]
    pub host_eps: f64,
}

fn one() -> f64 {
    1.0
}

impl DyeModel {
    /// Rhodamine 6G defaults.
    pub fn r6g(concentration: f64) -> Self {
        Self {
            omega_0: 3.5e15,
            gamma: 2.07e14,
            h: 0.74,
            concentration,
            host_eps: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.concentration >= 0.0 && self.concentration.is_finite()) {
            return Err(MaterialError::InvalidParameter(format!(
                "dye concentration must be >= 0, got {}",
                self.concentration
            )));
        }
        if !(self.h > 0.0 && self.h <= 1.0) {
            return Err(MaterialError::InvalidParameter(format!(
                "dye oscillator strength h must lie in (0, 1], got {}",
                self.h
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(MaterialError::InvalidParameter(format!(
                "dye damping must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.omega_0 > 0.0) {
            return Err(MaterialError::InvalidParameter(format!(
                "dye omega_0 must be > 0, got {}",
                self.omega_0
            )));
        }
        Ok(())
    }

    /// Molecules per cubic metre.
    pub fn number_density(&self, constants: &PhysicalConstants) -> f64 {
        self.concentration * 1000.0 * constants.n_a
    }

    pub fn with_concentration(mut self, concentration: f64) -> Self {
        self.concentration = concentration;
        self
    }

    /// Equivalent Lorentz dispersion model.
    pub fn to_lorentz(&self, constants: &PhysicalConstants) -> DispersionModel {
        DispersionModel::Lorentz {
            eps_b: self.host_eps,
            omega_p: dye_plasma_frequency(self, constants),
            omega_0: self.omega_0,
            gamma: self.gamma,
        }
    }
}

/// `omega_p = sqrt(n h e^2 / (m eps0))` with `n = C * 1000 * N_A`.
pub fn dye_plasma_frequency(dye: &DyeModel, constants: &PhysicalConstants) -> f64 {
    let n = dye.number_density(constants);
    (n * dye.h * constants.e * constants.e / (constants.m * constants.eps0)).sqrt()
}

pub fn dye_permittivity(dye: &DyeModel, omega: f64, constants: &PhysicalConstants) -> Complex64 {
    let omega_p = dye_plasma_frequency(dye, constants);
    lorentz_term(dye.host_eps, omega_p, dye.omega_0, dye.gamma, omega)
}

/// Any isotropic medium that can be referenced from a stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Material {
    Dye(DyeModel),
    Dispersion(DispersionModel),
}

impl Material {
    pub fn permittivity(&self, omega: f64, constants: &PhysicalConstants) -> Result<Complex64, MaterialError> {
        match self {
            Material::Dispersion(m) => m.evaluate(omega),
            Material::Dye(d) => {
                if !(omega > 0.0 && omega.is_finite()) {
                    return Err(MaterialError::InvalidFrequency(omega));
                }
                Ok(dye_permittivity(d, omega, constants))
            }
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        match self {
            Material::Dispersion(m) => m.validate(),
            Material::Dye(d) => d.validate(),
        }
    }
}

impl From<DispersionModel> for Material {
    fn from(m: DispersionModel) -> Self {
        Material::Dispersion(m)
    }
}

impl From<DyeModel> for Material {
    fn from(d: DyeModel) -> Self {
        Material::Dye(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const K: PhysicalConstants = PhysicalConstants::CODATA2018;

    #[test]
    fn empty_lorentz_is_background() {
        let m = DispersionModel::Lorentz {
            eps_b: 1.0,
            omega_p: 0.0,
            omega_0: 3.5e15,
            gamma: 2.07e14,
        };
        for w in [1e14, 3.5e15, 9e15] {
            assert_eq!(m.evaluate(w).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn lorentz_on_resonance_is_imaginary_peak() {
        // eps = 1 + i wp^2 / (w0 gamma)
        let wp2 = 1.418e29_f64;
        let m = DispersionModel::Lorentz {
            eps_b: 1.0,
            omega_p: wp2.sqrt(),
            omega_0: 3.5e15,
            gamma: 2.07e14,
        };
        let eps = m.evaluate(3.5e15).unwrap();
        assert_relative_eq!(eps.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(eps.im, 0.196, max_relative = 0.01);
    }

    #[test]
    fn constant_model() {
        assert_eq!(
            DispersionModel::constant(2.25).evaluate(3e15).unwrap(),
            Complex64::new(2.25, 0.0)
        );
    }

    #[test]
    fn drude_is_passive_and_negative_below_plasma() {
        let m = DispersionModel::Drude {
            eps_inf: 4.0,
            omega_p: 1.33e16,
            gamma: 2.7e13,
        };
        let eps = m.evaluate(3.5e15).unwrap();
        assert!(eps.re < 0.0);
        assert!(eps.im > 0.0);
    }

    #[test]
    fn rejects_nonpositive_frequency() {
        assert!(matches!(
            DispersionModel::constant(1.0).evaluate(0.0),
            Err(MaterialError::InvalidFrequency(_))
        ));
    }

    #[test]
    fn plasma_frequency_of_r6g() {
        let wp = dye_plasma_frequency(&DyeModel::r6g(0.1), &K);
        assert_relative_eq!(wp, 3.76e14, max_relative = 0.01);
        assert_eq!(dye_plasma_frequency(&DyeModel::r6g(0.0), &K), 0.0);
        // 0.002 M is 1.2e24 molecules per m^3
        let low = DyeModel::r6g(0.002);
        assert_relative_eq!(low.number_density(&K), 1.2e24, max_relative = 0.01);
        assert_relative_eq!(dye_plasma_frequency(&low, &K), 5.33e13, max_relative = 0.01);
    }

    #[test]
    fn dye_permittivity_limits() {
        let dye = DyeModel::r6g(0.1);
        let on = dye_permittivity(&dye, dye.omega_0, &K);
        assert_relative_eq!(on.im, 0.196, max_relative = 0.01);
        let far = dye_permittivity(&dye, 100.0 * dye.omega_0, &K);
        assert!((far - Complex64::new(dye.host_eps, 0.0)).norm() < 1e-3);
        let empty = DyeModel {
            host_eps: 2.04,
            ..DyeModel::r6g(0.0)
        };
        assert_eq!(
            dye_permittivity(&empty, 2e15, &K),
            DispersionModel::constant(2.04).evaluate(2e15).unwrap()
        );
    }

    #[test]
    fn dye_to_lorentz_matches() {
        let dye = DyeModel::r6g(0.05);
        let lor = dye.to_lorentz(&K);
        for w in [2e15, 3.4e15, 4e15] {
            let a = lor.evaluate(w).unwrap();
            let b = dye_permittivity(&dye, w, &K);
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn dye_validation() {
        assert!(DyeModel::r6g(-0.1).validate().is_err());
        assert!(DyeModel { h: 0.0, ..DyeModel::r6g(0.1) }.validate().is_err());
        assert!(DyeModel { h: 1.5, ..DyeModel::r6g(0.1) }.validate().is_err());
        assert!(DyeModel { gamma: 0.0, ..DyeModel::r6g(0.1) }.validate().is_err());
        assert!(DyeModel::r6g(0.0).validate().is_ok());
    }

    #[test]
    fn table_interpolates_and_reports_range() {
        let csv = "wavelength_nm, eps_re, eps_im\n400, -4.0, 0.2\n500, -8.0, 0.4\n";
        let t = PermittivityTable::from_csv_reader(csv.as_bytes()).unwrap();
        let eps = t.interpolate(450e-9).unwrap();
        assert_relative_eq!(eps.re, -6.0, epsilon = 1e-12);
        assert_relative_eq!(eps.im, 0.3, epsilon = 1e-12);
        let end = t.interpolate(500e-9).unwrap();
        assert!((end - Complex64::new(-8.0, 0.4)).norm() < 1e-12);
        let err = t.interpolate(600e-9).unwrap_err();
        assert!(err.to_string().contains("[400.0000, 500.0000]"), "{err}");

        let model = DispersionModel::Tabulated { table: t };
        assert!(matches!(
            model.evaluate(K.wavelength_to_omega(300e-9)),
            Err(MaterialError::OutOfRange { .. })
        ));
    }

    #[test]
    fn table_rejects_bad_rows() {
        assert!(PermittivityTable::from_csv_reader("500,1,0\n400,1,0\n".as_bytes()).is_err());
        assert!(PermittivityTable::from_csv_reader("400,1,-0.1\n500,1,0\n".as_bytes()).is_err());
        assert!(PermittivityTable::from_csv_reader("400,1\n500,1\n".as_bytes()).is_err());
        assert!(PermittivityTable::from_csv_reader("400,1,0\n500,x,0\n".as_bytes()).is_err());
    }

    #[test]
    fn mev_conversion() {
        // 1 eV photon has omega = e / hbar
        assert_relative_eq!(K.omega_to_mev(K.e / K.hbar), 1000.0, epsilon = 1e-9);
    }
}
