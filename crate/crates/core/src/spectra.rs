//! Reflectivity-spectrum analysis: dip detection, splitting energies,
//! concentration sweeps and inversion of sensing calibration curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::PhysicalConstants;
use crate::tmm::{Polarization, Stack, TmmError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("window [{lo_nm:.3}, {hi_nm:.3}] nm holds {points} grid point(s), need at least 5")]
    Window { lo_nm: f64, hi_nm: f64, points: usize },
    #[error("spectrum grid must be strictly increasing with one value per point")]
    Grid,
    #[error("splitting needs exactly 2 dips, found {0}")]
    Arity(usize),
    #[error("concentrations must be non-negative and sorted ascending")]
    Concentrations,
    #[error("observable {observable} is not monotone over the calibration curve")]
    NotMonotone { observable: &'static str },
    #[error("{observable} = {value} is outside the calibrated range [{lo}, {hi}]")]
    OutOfRange {
        observable: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("calibration curve has fewer than 2 usable rows for {observable}")]
    TooFewRows { observable: &'static str },
    #[error(transparent)]
    Tmm(#[from] TmmError),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumMeta {
    /// Angle of incidence [rad].
    pub theta: Option<f64>,
    pub pol: Option<Polarization>,
    /// Dye concentration [mol/l].
    pub concentration: Option<f64>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Vacuum wavelengths [m], strictly increasing.
    pub lambdas: Vec<f64>,
    pub reflectance: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(lambdas: Vec<f64>, reflectance: Vec<f64>) -> Result<Self, SpectraError> {
        if lambdas.len() != reflectance.len() || lambdas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(SpectraError::Grid);
        }
        Ok(Self {
            lambdas,
            reflectance,
            meta: SpectrumMeta::default(),
        })
    }

    /// Reflectance of `stack` on `lambdas` at a fixed angle.
    pub fn simulate(
        stack: &Stack,
        lambdas: &[f64],
        theta: f64,
        pol: Polarization,
        constants: &PhysicalConstants,
    ) -> Result<Self, SpectraError> {
        let reflectance = lambdas
            .iter()
            .map(|&l| {
                stack
                    .at_wavelength(l, constants)
                    .and_then(|s| s.reflect(theta, pol))
                    .map(|r| r.reflectance)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut s = Self::new(lambdas.to_vec(), reflectance)?;
        s.meta.theta = Some(theta);
        s.meta.pol = Some(pol);
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dip {
    /// Parabola-refined position [m].
    pub lambda_min: f64,
    /// Parabola-refined minimum reflectance.
    pub r_min: f64,
    pub prominence: f64,
    /// Grid index of the discrete minimum.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DipReport {
    /// Sorted by wavelength.
    pub dips: Vec<Dip>,
}

impl DipReport {
    pub fn count(&self) -> usize {
        self.dips.len()
    }
}

pub const DEFAULT_PROMINENCE: f64 = 0.02;

/// Local minima of `R` inside `window` whose prominence reaches
/// `prominence_threshold`.
///
/// A sample is a minimum when it is strictly below its left neighbour and not
/// above its right neighbour. Prominence is the depth below the lower of the
/// two surrounding maxima, each taken over the stretch that extends from the
/// dip until the spectrum drops below the dip again or the window ends.
pub fn find_dips(
    spectrum: &Spectrum,
    prominence_threshold: f64,
    window: (f64, f64),
) -> Result<DipReport, SpectraError> {
    let lam = &spectrum.lambdas;
    let start = lam.partition_point(|&l| l < window.0);
    let end = lam.partition_point(|&l| l <= window.1);
    let points = end.saturating_sub(start);
    if points < 5 {
        return Err(SpectraError::Window {
            lo_nm: window.0 * 1e9,
            hi_nm: window.1 * 1e9,
            points,
        });
    }
    let r = &spectrum.reflectance[start..end];
    let x = &lam[start..end];

    let mut dips = Vec::new();
    for i in 1..r.len() - 1 {
        if !(r[i] < r[i - 1] && r[i] <= r[i + 1]) {
            continue;
        }
        let left = r[..i]
            .iter()
            .rev()
            .take_while(|&&v| !(v < r[i]))
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let right = r[i + 1..]
            .iter()
            .take_while(|&&v| !(v < r[i]))
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let prominence = left.min(right) - r[i];
        if !(prominence >= prominence_threshold) {
            continue;
        }
        let (lambda_min, r_min) = parabola_vertex(
            [x[i - 1], x[i], x[i + 1]],
            [r[i - 1], r[i], r[i + 1]],
        );
        dips.push(Dip {
            lambda_min,
            r_min,
            prominence,
            index: start + i,
        });
    }
    Ok(DipReport { dips })
}

/// Vertex of the parabola through three points, clamped to the bracket.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let d1 = (y[1] - y[0]) / (x[1] - x[0]);
    let d2 = (y[2] - y[1]) / (x[2] - x[1]);
    let a = (d2 - d1) / (x[2] - x[0]);
    if !(a > 0.0) {
        return (x[1], y[1]);
    }
    let b = d1 - a * (x[0] + x[1]);
    let xv = (-b / (2.0 * a)).clamp(x[0], x[2]);
    let yv = y[1] + (xv - x[1]) * (d1 + a * (xv - x[0]));
    (xv, yv)
}

/// `(2 pi hbar c / e) (1/lambda_1 - 1/lambda_2)` in meV with `lambda_1 <= lambda_2`.
pub fn splitting_energy(dips: &DipReport, constants: &PhysicalConstants) -> Result<f64, SpectraError> {
    if dips.count() != 2 {
        return Err(SpectraError::Arity(dips.count()));
    }
    let (a, b) = (dips.dips[0].lambda_min, dips.dips[1].lambda_min);
    Ok(splitting_from_wavelengths(a.min(b), a.max(b), constants))
}

pub fn splitting_from_wavelengths(lambda_1: f64, lambda_2: f64, k: &PhysicalConstants) -> f64 {
    let hc_over_e = 2.0 * std::f64::consts::PI * k.hbar * k.c / k.e;
    hc_over_e * (1.0 / lambda_1 - 1.0 / lambda_2) * 1e3
}

/// Dip-analysis settings shared by sweeps and map analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipOptions {
    pub prominence: f64,
    /// Analysis window [m].
    pub window: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingRow {
    /// [mol/l]
    pub concentration: f64,
    pub dip_count: usize,
    /// [m]
    pub lambda_1: Option<f64>,
    /// [m]
    pub lambda_2: Option<f64>,
    pub r_min_1: Option<f64>,
    pub splitting_mev: Option<f64>,
    /// Simulation or analysis failure for this row.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SensingCurve {
    /// Sorted by concentration.
    pub rows: Vec<SensingRow>,
}

impl SensingCurve {
    /// Smallest concentration with a resolved double dip.
    pub fn splitting_onset(&self) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.dip_count == 2)
            .map(|r| r.concentration)
    }
}

fn row_from_spectrum(
    concentration: f64,
    spectrum: Result<Spectrum, SpectraError>,
    options: &DipOptions,
    constants: &PhysicalConstants,
) -> SensingRow {
    let report = spectrum.and_then(|s| find_dips(&s, options.prominence, options.window));
    match report {
        Ok(report) => SensingRow {
            concentration,
            dip_count: report.count(),
            lambda_1: report.dips.first().map(|d| d.lambda_min),
            lambda_2: report.dips.get(1).map(|d| d.lambda_min),
            r_min_1: report.dips.first().map(|d| d.r_min),
            splitting_mev: splitting_energy(&report, constants).ok(),
            error: None,
        },
        Err(e) => SensingRow {
            concentration,
            dip_count: 0,
            lambda_1: None,
            lambda_2: None,
            r_min_1: None,
            splitting_mev: None,
            error: Some(e.to_string()),
        },
    }
}

/// One spectrum and dip report per concentration. `stack_for` builds the
/// stack for a given concentration. Rows are computed in parallel on the
/// current rayon pool and assembled in input order; a failing row records
/// its error and the sweep carries on.
pub fn concentration_sweep<F>(
    stack_for: F,
    concentrations: &[f64],
    theta: f64,
    lambda_grid: &[f64],
    pol: Polarization,
    options: &DipOptions,
    constants: &PhysicalConstants,
) -> Result<SensingCurve, SpectraError>
where
    F: Fn(f64) -> Stack + Sync,
{
    if concentrations
        .iter()
        .any(|c| !(*c >= 0.0 && c.is_finite()))
        || concentrations.windows(2).any(|w| w[1] < w[0])
    {
        return Err(SpectraError::Concentrations);
    }
    crate::tmm::check_grid("wavelength", lambda_grid)?;
    let rows = concentrations
        .par_iter()
        .map(|&c| {
            let stack = stack_for(c);
            let spectrum = Spectrum::simulate(&stack, lambda_grid, theta, pol, constants).map(|mut s| {
                s.meta.concentration = Some(c);
                s
            });
            row_from_spectrum(c, spectrum, options, constants)
        })
        .collect();
    Ok(SensingCurve { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "observable", content = "value", rename_all = "snake_case")]
pub enum Observable {
    /// Minimum reflectance of the first dip.
    RMin(f64),
    /// First dip position [m].
    Lambda1(f64),
    SplittingMev(f64),
}

impl Observable {
    pub fn name(&self) -> &'static str {
        match self {
            Observable::RMin(_) => "r_min",
            Observable::Lambda1(_) => "lambda_1",
            Observable::SplittingMev(_) => "splitting_meV",
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Observable::RMin(v) | Observable::Lambda1(v) | Observable::SplittingMev(v) => v,
        }
    }

    fn pick(&self, row: &SensingRow) -> Option<f64> {
        match self {
            Observable::RMin(_) => row.r_min_1,
            Observable::Lambda1(_) => row.lambda_1,
            Observable::SplittingMev(_) => row.splitting_mev,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEstimate {
    /// [mol/l]
    pub concentration: f64,
    /// Concentrations of the two calibration rows that bracket the value.
    pub bracket: (f64, f64),
}

/// Piecewise-linear inversion of a calibration curve that is strictly
/// monotone in the chosen observable. Rows without the observable are
/// skipped.
pub fn estimate_concentration(
    observable: Observable,
    curve: &SensingCurve,
) -> Result<ConcentrationEstimate, SpectraError> {
    let name = observable.name();
    let pts: Vec<(f64, f64)> = curve
        .rows
        .iter()
        .filter(|r| r.error.is_none())
        .filter_map(|r| observable.pick(r).map(|v| (r.concentration, v)))
        .collect();
    if pts.len() < 2 {
        return Err(SpectraError::TooFewRows { observable: name });
    }
    let increasing = pts.windows(2).all(|w| w[1].1 > w[0].1);
    let decreasing = pts.windows(2).all(|w| w[1].1 < w[0].1);
    if !(increasing || decreasing) {
        return Err(SpectraError::NotMonotone { observable: name });
    }
    let value = observable.value();
    let (lo, hi) = pts
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if !(value >= lo && value <= hi) {
        return Err(SpectraError::OutOfRange {
            observable: name,
            value,
            lo,
            hi,
        });
    }
    for w in pts.windows(2) {
        let ((c0, v0), (c1, v1)) = (w[0], w[1]);
        if value == v0 {
            return Ok(ConcentrationEstimate {
                concentration: c0,
                bracket: (c0, c0),
            });
        }
        if value == v1 {
            return Ok(ConcentrationEstimate {
                concentration: c1,
                bracket: (c1, c1),
            });
        }
        if (value - v0) * (value - v1) < 0.0 {
            let t = (value - v0) / (v1 - v0);
            return Ok(ConcentrationEstimate {
                concentration: c0 + t * (c1 - c0),
                bracket: (c0, c1),
            });
        }
    }
    unreachable!("value inside [lo, hi] of a monotone curve is bracketed")
}
