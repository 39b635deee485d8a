//! Layered-medium effective medium theory for metal/dielectric multilayers.
//!
//! The optical axis is the multilayer normal:
//! `eps_perp = f eps_m + (1 - f) eps_d` and
//! `1 / eps_par = f / eps_m + (1 - f) / eps_d`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::{Material, MaterialError, PhysicalConstants};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomogenizationError {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("singular constituents: eps_m = {eps_m}, eps_d = {eps_d}")]
    Singular { eps_m: Complex64, eps_d: Complex64 },
    #[error("fill fraction must lie in [0, 1], got {0}")]
    FillFraction(f64),
    #[error("band edge(s) not found in [{lo_nm:.1}, {hi_nm:.1}] nm: {}", missing_names(*.enz_missing, *.enp_missing))]
    EdgeNotFound {
        enz_missing: bool,
        enp_missing: bool,
        lo_nm: f64,
        hi_nm: f64,
    },
    #[error("invalid search: {0}")]
    InvalidSearch(String),
    #[error("calibration did not converge: {0}")]
    Calibration(String),
}

fn missing_names(enz: bool, enp: bool) -> String {
    match (enz, enp) {
        (true, true) => "ENZ and ENP".into(),
        (true, false) => "ENZ".into(),
        _ => "ENP".into(),
    }
}

/// Diagonal tensor `diag(eps_perp, eps_perp, eps_par)` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniaxialPermittivity {
    /// In-plane component.
    pub eps_perp: Complex64,
    /// Component along the optical axis (surface normal).
    pub eps_par: Complex64,
}

impl UniaxialPermittivity {
    pub fn isotropic(eps: Complex64) -> Self {
        Self {
            eps_perp: eps,
            eps_par: eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogenizationSpec {
    pub metal: Material,
    pub dielectric: Material,
    pub fill_fraction: f64,
}

impl HomogenizationSpec {
    pub fn validate(&self) -> Result<(), HomogenizationError> {
        if !(0.0..=1.0).contains(&self.fill_fraction) {
            return Err(HomogenizationError::FillFraction(self.fill_fraction));
        }
        self.metal.validate()?;
        self.dielectric.validate()?;
        Ok(())
    }

    pub fn evaluate(
        &self,
        omega: f64,
        constants: &PhysicalConstants,
    ) -> Result<UniaxialPermittivity, HomogenizationError> {
        emt_uniaxial(self, omega, constants)
    }
}

/// Mixing rule on already-evaluated constituent permittivities.
pub fn mix(
    eps_m: Complex64,
    eps_d: Complex64,
    f: f64,
) -> Result<UniaxialPermittivity, HomogenizationError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(HomogenizationError::FillFraction(f));
    }
    let eps_perp = eps_m * f + eps_d * (1.0 - f);
    // Pure phases need no division, so they stay exact.
    if f == 1.0 {
        return Ok(UniaxialPermittivity::isotropic(eps_m));
    }
    if f == 0.0 {
        return Ok(UniaxialPermittivity::isotropic(eps_d));
    }
    let zero = Complex64::new(0.0, 0.0);
    if eps_m == zero || eps_d == zero {
        return Err(HomogenizationError::Singular { eps_m, eps_d });
    }
    if eps_m == eps_d {
        return Ok(UniaxialPermittivity::isotropic(eps_m));
    }
    let inv_par = f / eps_m + (1.0 - f) / eps_d;
    if inv_par == zero {
        // Exact lossless pole: report as infinite rather than dividing by zero.
        return Ok(UniaxialPermittivity {
            eps_perp,
            eps_par: Complex64::new(f64::INFINITY, 0.0),
        });
    }
    Ok(UniaxialPermittivity {
        eps_perp,
        eps_par: inv_par.inv(),
    })
}

pub fn emt_uniaxial(
    spec: &HomogenizationSpec,
    omega: f64,
    constants: &PhysicalConstants,
) -> Result<UniaxialPermittivity, HomogenizationError> {
    let eps_m = spec.metal.permittivity(omega, constants)?;
    let eps_d = spec.dielectric.permittivity(omega, constants)?;
    mix(eps_m, eps_d, spec.fill_fraction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandType {
    Dielectric,
    /// `eps_par < 0`, `eps_perp > 0`
    TypeI,
    /// `eps_par > 0`, `eps_perp < 0`
    TypeII,
    Metallic,
}

impl BandType {
    pub fn as_str(&self) -> &'static str {
        match self {
            BandType::Dielectric => "dielectric",
            BandType::TypeI => "type_I",
            BandType::TypeII => "type_II",
            BandType::Metallic => "metallic",
        }
    }
}

/// Classification by the signs of the real parts. A zero classifies by its
/// sign bit, so `+0.0` counts as positive and `-0.0` as negative.
pub fn classify_band(eps: &UniaxialPermittivity) -> BandType {
    let perp_neg = eps.eps_perp.re.is_sign_negative();
    let par_neg = eps.eps_par.re.is_sign_negative();
    match (perp_neg, par_neg) {
        (false, false) => BandType::Dielectric,
        (false, true) => BandType::TypeI,
        (true, false) => BandType::TypeII,
        (true, true) => BandType::Metallic,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandEdges {
    /// Zero of `Re eps_perp` [m].
    pub lambda_enz: f64,
    /// Pole of `eps_par`, located as the zero of `Re(1/eps_par)` [m].
    pub lambda_enp: f64,
}

const BISECTION_TOL: f64 = 1e-4 * 1e-9;

/// Locates the ENZ and ENP wavelengths by sign-change bracketing on a grid of
/// step `resolution` followed by bisection to 1e-4 nm.
///
/// `Re(1/eps_par)` also changes sign where `eps_par` itself crosses zero; among
/// several candidates the one with the largest `|eps_par|` is the pole.
pub fn find_band_edges(
    spec: &HomogenizationSpec,
    lambda_window: (f64, f64),
    resolution: f64,
    constants: &PhysicalConstants,
) -> Result<BandEdges, HomogenizationError> {
    let (lo, hi) = lambda_window;
    if !(hi > lo && lo > 0.0) {
        return Err(HomogenizationError::InvalidSearch(format!(
            "empty wavelength window [{lo}, {hi}]"
        )));
    }
    if !(resolution > 0.0) {
        return Err(HomogenizationError::InvalidSearch(format!(
            "resolution must be positive, got {resolution}"
        )));
    }
    let eval = |lambda: f64| emt_uniaxial(spec, constants.wavelength_to_omega(lambda), constants);
    let perp = |lambda: f64| eval(lambda).map(|e| e.eps_perp.re);
    let inv_par = |lambda: f64| eval(lambda).map(|e| e.eps_par.inv().re);

    let n = ((hi - lo) / resolution).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n)
        .map(|i| (lo + i as f64 * resolution).min(hi))
        .collect();

    let enz = first_root(&grid, &perp)?;
    let mut enp = None;
    let mut best = f64::NEG_INFINITY;
    for root in all_roots(&grid, &inv_par)? {
        let mag = eval(root)?.eps_par.norm();
        if mag > best {
            best = mag;
            enp = Some(root);
        }
    }
    match (enz, enp) {
        (Some(lambda_enz), Some(lambda_enp)) => Ok(BandEdges {
            lambda_enz,
            lambda_enp,
        }),
        (enz, enp) => Err(HomogenizationError::EdgeNotFound {
            enz_missing: enz.is_none(),
            enp_missing: enp.is_none(),
            lo_nm: lo * 1e9,
            hi_nm: hi * 1e9,
        }),
    }
}

fn first_root<F>(grid: &[f64], f: &F) -> Result<Option<f64>, HomogenizationError>
where
    F: Fn(f64) -> Result<f64, HomogenizationError>,
{
    Ok(all_roots(grid, f)?.into_iter().next())
}

fn all_roots<F>(grid: &[f64], f: &F) -> Result<Vec<f64>, HomogenizationError>
where
    F: Fn(f64) -> Result<f64, HomogenizationError>,
{
    let values = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>, _>>()?;
    let mut roots = Vec::new();
    for i in 0..grid.len() - 1 {
        let (fa, fb) = (values[i], values[i + 1]);
        if fa == 0.0 {
            roots.push(grid[i]);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            roots.push(bisect(f, grid[i], grid[i + 1], fa)?);
        }
    }
    if values[values.len() - 1] == 0.0 {
        roots.push(grid[grid.len() - 1]);
    }
    Ok(roots)
}

fn bisect<F>(f: &F, mut a: f64, mut b: f64, mut fa: f64) -> Result<f64, HomogenizationError>
where
    F: Fn(f64) -> Result<f64, HomogenizationError>,
{
    while b - a > BISECTION_TOL {
        let mid = 0.5 * (a + b);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Drude parameters `(eps_inf, omega_p)` of the metal that place the ENZ and
/// ENP wavelengths of a metal/dielectric stack at the requested values, for a
/// fixed metal damping and a constant real dielectric permittivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrudeCalibration {
    pub eps_inf: f64,
    pub omega_p: f64,
}

pub fn calibrate_drude_to_band_edges(
    eps_d: f64,
    gamma: f64,
    fill_fraction: f64,
    targets: BandEdges,
    constants: &PhysicalConstants,
) -> Result<DrudeCalibration, HomogenizationError> {
    let f = fill_fraction;
    if !(f > 0.0 && f < 1.0) || !(eps_d > 0.0) {
        return Err(HomogenizationError::Calibration(
            "need 0 < f < 1 and eps_d > 0".into(),
        ));
    }
    let w1 = constants.wavelength_to_omega(targets.lambda_enz);
    let w2 = constants.wavelength_to_omega(targets.lambda_enp);
    let drude = |eps_inf: f64, wp: f64, w: f64| {
        Complex64::new(eps_inf, 0.0) - wp * wp / Complex64::new(w * w, gamma * w)
    };
    let ed = Complex64::new(eps_d, 0.0);
    // residuals: Re eps_perp at ENZ, eps_d * Re(1/eps_par) at ENP
    let residual = |x: [f64; 2]| -> [f64; 2] {
        let em1 = drude(x[0], x[1], w1);
        let em2 = drude(x[0], x[1], w2);
        [
            (em1 * f + ed * (1.0 - f)).re,
            ((f / em2 + (1.0 - f) / ed) * eps_d).re,
        ]
    };

    // Lossless closed form as the starting point.
    let a = -(1.0 - f) / f * eps_d;
    let b = -f / (1.0 - f) * eps_d;
    let wp2 = (a - b) / (1.0 / (w2 * w2) - 1.0 / (w1 * w1));
    if !(wp2 > 0.0) {
        return Err(HomogenizationError::Calibration(
            "requested ENZ/ENP ordering is not reachable with a Drude metal".into(),
        ));
    }
    let mut x = [a + wp2 / (w1 * w1), wp2.sqrt()];

    for _ in 0..50 {
        let r = residual(x);
        if r[0].abs() < 1e-12 && r[1].abs() < 1e-12 {
            return Ok(DrudeCalibration {
                eps_inf: x[0],
                omega_p: x[1],
            });
        }
        let h = [1e-7 * x[0].abs().max(1.0), 1e-7 * x[1]];
        let mut jac = [[0.0; 2]; 2];
        for k in 0..2 {
            let mut xp = x;
            xp[k] += h[k];
            let rp = residual(xp);
            jac[0][k] = (rp[0] - r[0]) / h[k];
            jac[1][k] = (rp[1] - r[1]) / h[k];
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(HomogenizationError::Calibration("singular Jacobian".into()));
        }
        x[0] -= (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
        x[1] -= (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
    }
    Err(HomogenizationError::Calibration(format!(
        "Newton iteration stalled at eps_inf = {}, omega_p = {}",
        x[0], x[1]
    )))
}
