//! Reflection and transmission of planar stacks with isotropic and uniaxial
//! layers (optical axis along the stack normal `z`).
//!
//! Conventions:
//! - fields vary as `exp(i (kx x + kz z - omega t))`, passive media have
//!   `Im eps >= 0` and every `kz` is taken on the branch `Im kz >= 0`
//!   (`Re kz >= 0` when `Im kz == 0`);
//! - p-polarisation amplitudes are tangential `H_y`, s-polarisation
//!   amplitudes are tangential `E_y`; single-interface transmission is
//!   therefore `t = 1 + r` for both;
//! - the stack response is built by the Airy recursion from the substrate
//!   backwards, which only ever multiplies by `exp(i kz d)` with
//!   `|exp(i kz d)| <= 1`, so evanescent or lossy layers cannot overflow.
//!
//! Power transmission into the substrate is the ratio of `z`-directed
//! Poynting flux. For p-polarisation in a uniaxial medium
//! `S_z ∝ Re(kz / eps_perp) |H_y|^2`, for s-polarisation `S_z ∝ Re(kz) |E_y|^2`.
//! A purely evanescent lossless substrate carries no flux and `T = 0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

use crate::homogenization::{HomogenizationError, HomogenizationSpec, UniaxialPermittivity};
use crate::materials::{Material, MaterialError, PhysicalConstants};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarization {
    P,
    S,
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::P => "p",
            Polarization::S => "s",
        })
    }
}

/// Where in the stack something went wrong.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Position {
    Incidence,
    Layer(usize),
    Substrate,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Position::Incidence => f.write_str("incidence medium"),
            Position::Layer(i) => write!(f, "layer {i}"),
            Position::Substrate => f.write_str("substrate"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TmmError {
    #[error("{at}: {source}")]
    Material {
        at: Position,
        #[source]
        source: MaterialError,
    },
    #[error("{at}: {source}")]
    Homogenization {
        at: Position,
        #[source]
        source: HomogenizationError,
    },
    #[error("{at}: eps_par = 0 makes the extraordinary wavevector singular")]
    Singular { at: Position },
    #[error("degenerate interface between {upper} and {lower}: vanishing denominator")]
    DegenerateInterface { upper: Position, lower: Position },
    #[error("incidence medium must be lossless with Re eps > 0, got eps = {0}")]
    LossyIncidence(Complex64),
    #[error("invalid plane wave: {0}")]
    InvalidWave(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("layer {index}: thickness must be positive, got {thickness}")]
    InvalidThickness { index: usize, thickness: f64 },
}

/// Uniaxial constituents of a stack.
#[derive(Debug, Clone, PartialEq)]
pub enum UniaxialModel {
    Emt(HomogenizationSpec),
    Explicit { perp: Material, par: Material },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Medium {
    Isotropic(Material),
    Uniaxial(UniaxialModel),
}

impl From<Material> for Medium {
    fn from(m: Material) -> Self {
        Medium::Isotropic(m)
    }
}

/// Permittivity of one medium at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalPermittivity {
    Isotropic(Complex64),
    Uniaxial(UniaxialPermittivity),
}

impl LocalPermittivity {
    /// Component parallel to the interfaces.
    pub fn in_plane(&self) -> Complex64 {
        match self {
            LocalPermittivity::Isotropic(e) => *e,
            LocalPermittivity::Uniaxial(u) => u.eps_perp,
        }
    }
}

impl Medium {
    pub fn permittivity(
        &self,
        omega: f64,
        constants: &PhysicalConstants,
        at: Position,
    ) -> Result<LocalPermittivity, TmmError> {
        let mat = |m: &Material| {
            m.permittivity(omega, constants)
                .map_err(|source| TmmError::Material { at, source })
        };
        Ok(match self {
            Medium::Isotropic(m) => LocalPermittivity::Isotropic(mat(m)?),
            Medium::Uniaxial(UniaxialModel::Explicit { perp, par }) => {
                LocalPermittivity::Uniaxial(UniaxialPermittivity {
                    eps_perp: mat(perp)?,
                    eps_par: mat(par)?,
                })
            }
            Medium::Uniaxial(UniaxialModel::Emt(spec)) => LocalPermittivity::Uniaxial(
                spec.evaluate(omega, constants)
                    .map_err(|source| TmmError::Homogenization { at, source })?,
            ),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub medium: Medium,
    /// Thickness [m].
    pub thickness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stack {
    /// Lossless incidence medium (the prism).
    pub incidence: Material,
    /// Finite layers, ordered from the incidence side.
    pub layers: Vec<Layer>,
    /// Semi-infinite exit medium.
    pub substrate: Medium,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveState {
    /// Vacuum wavelength [m].
    pub lambda0: f64,
    /// Angle of incidence in the incidence medium [rad].
    pub theta: f64,
    pub pol: Polarization,
}

impl PlaneWaveState {
    pub fn new(lambda0: f64, theta: f64, pol: Polarization) -> Self {
        Self { lambda0, theta, pol }
    }

    pub fn from_degrees(lambda0: f64, theta_deg: f64, pol: Polarization) -> Self {
        Self::new(lambda0, theta_deg.to_radians(), pol)
    }

    pub fn k0(&self) -> f64 {
        2.0 * PI / self.lambda0
    }

    /// In-plane wavevector for an incidence medium of refractive index `n`.
    pub fn kx(&self, n_incidence: f64) -> f64 {
        n_incidence * self.k0() * self.theta.sin()
    }

    fn validate(&self) -> Result<(), TmmError> {
        if !(self.lambda0 > 0.0 && self.lambda0.is_finite()) {
            return Err(TmmError::InvalidWave(format!(
                "wavelength must be positive, got {}",
                self.lambda0
            )));
        }
        if !(self.theta >= 0.0 && self.theta < PI / 2.0) {
            return Err(TmmError::InvalidWave(format!(
                "angle must lie in [0, 90) degrees, got {}",
                self.theta.to_degrees()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectivityResult {
    /// Amplitude reflection coefficient (tangential H for p, E for s).
    pub r: Complex64,
    /// `|r|^2`
    pub reflectance: f64,
    /// Power transmission into the substrate.
    pub transmittance: f64,
}

fn branch(kz: Complex64) -> Complex64 {
    if kz.im < 0.0 || (kz.im == 0.0 && kz.re < 0.0) {
        -kz
    } else {
        kz
    }
}

/// Normal wavevector component with the decaying/outgoing branch.
pub fn layer_kz(
    eps: LocalPermittivity,
    kx: f64,
    k0: f64,
    pol: Polarization,
) -> Result<Complex64, TmmError> {
    Ok(normalized_kz(eps, kx / k0, pol, Position::Layer(0))? * k0)
}

/// `kz / k0` from `kx / k0`.
fn normalized_kz(
    eps: LocalPermittivity,
    kx: f64,
    pol: Polarization,
    at: Position,
) -> Result<Complex64, TmmError> {
    let kx2 = kx * kx;
    let q2 = match (eps, pol) {
        (LocalPermittivity::Isotropic(e), _) => e - kx2,
        (LocalPermittivity::Uniaxial(u), Polarization::S) => u.eps_perp - kx2,
        (LocalPermittivity::Uniaxial(u), Polarization::P) => {
            if u.eps_par == Complex64::new(0.0, 0.0) {
                return Err(TmmError::Singular { at });
            }
            let ratio = if u.eps_par.is_infinite() {
                Complex64::new(0.0, 0.0)
            } else {
                u.eps_perp / u.eps_par
            };
            u.eps_perp - ratio * kx2
        }
    };
    Ok(branch(q2.sqrt()))
}

/// Admittance-like quantity whose mismatch sets the Fresnel coefficient:
/// `kz / eps_perp` for p, `kz` for s.
fn impedance(eps: LocalPermittivity, q: Complex64, pol: Polarization) -> Complex64 {
    match pol {
        Polarization::P => q / eps.in_plane(),
        Polarization::S => q,
    }
}

fn interface_from_impedance(
    za: Complex64,
    zb: Complex64,
    upper: Position,
    lower: Position,
) -> Result<(Complex64, Complex64), TmmError> {
    let denom = za + zb;
    if denom == Complex64::new(0.0, 0.0) || !denom.is_finite() {
        return Err(TmmError::DegenerateInterface { upper, lower });
    }
    let r = (za - zb) / denom;
    Ok((r, Complex64::new(1.0, 0.0) + r))
}

/// Single-interface Fresnel coefficients from medium `a` into medium `b`.
///
/// p: `r = (eps_b kz_a - eps_a kz_b) / (eps_b kz_a + eps_a kz_b)` with the
/// in-plane permittivities and extraordinary `kz`; s: `r = (kz_a - kz_b) /
/// (kz_a + kz_b)`. In both cases `t = 1 + r`.
pub fn interface_r_t(
    a: LocalPermittivity,
    b: LocalPermittivity,
    kx: f64,
    k0: f64,
    pol: Polarization,
) -> Result<(Complex64, Complex64), TmmError> {
    let kx = kx / k0;
    let qa = normalized_kz(a, kx, pol, Position::Incidence)?;
    let qb = normalized_kz(b, kx, pol, Position::Substrate)?;
    interface_from_impedance(
        impedance(a, qa, pol),
        impedance(b, qb, pol),
        Position::Incidence,
        Position::Substrate,
    )
}

/// All media of a stack evaluated at one vacuum wavelength.
#[derive(Debug, Clone)]
pub struct StackAtWavelength {
    lambda0: f64,
    /// Refractive index of the incidence medium.
    n_incidence: f64,
    /// incidence, layers..., substrate
    eps: Vec<LocalPermittivity>,
    thickness: Vec<f64>,
}

impl Stack {
    pub fn validate(&self) -> Result<(), TmmError> {
        for (index, layer) in self.layers.iter().enumerate() {
            if !(layer.thickness > 0.0 && layer.thickness.is_finite()) {
                return Err(TmmError::InvalidThickness {
                    index,
                    thickness: layer.thickness,
                });
            }
        }
        Ok(())
    }

    pub fn at_wavelength(
        &self,
        lambda0: f64,
        constants: &PhysicalConstants,
    ) -> Result<StackAtWavelength, TmmError> {
        if !(lambda0 > 0.0 && lambda0.is_finite()) {
            return Err(TmmError::InvalidWave(format!(
                "wavelength must be positive, got {lambda0}"
            )));
        }
        self.validate()?;
        let omega = constants.wavelength_to_omega(lambda0);
        let inc = self
            .incidence
            .permittivity(omega, constants)
            .map_err(|source| TmmError::Material {
                at: Position::Incidence,
                source,
            })?;
        if inc.im != 0.0 || !(inc.re > 0.0) {
            return Err(TmmError::LossyIncidence(inc));
        }
        let mut eps = Vec::with_capacity(self.layers.len() + 2);
        eps.push(LocalPermittivity::Isotropic(inc));
        for (i, layer) in self.layers.iter().enumerate() {
            eps.push(layer.medium.permittivity(omega, constants, Position::Layer(i))?);
        }
        eps.push(self.substrate.permittivity(omega, constants, Position::Substrate)?);
        Ok(StackAtWavelength {
            lambda0,
            n_incidence: inc.re.sqrt(),
            eps,
            thickness: self.layers.iter().map(|l| l.thickness).collect(),
        })
    }
}

impl StackAtWavelength {
    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    fn position(&self, idx: usize) -> Position {
        if idx == 0 {
            Position::Incidence
        } else if idx == self.eps.len() - 1 {
            Position::Substrate
        } else {
            Position::Layer(idx - 1)
        }
    }

    pub fn reflect(&self, theta: f64, pol: Polarization) -> Result<ReflectivityResult, TmmError> {
        PlaneWaveState::new(self.lambda0, theta, pol).validate()?;
        let k0 = 2.0 * PI / self.lambda0;
        let kx = self.n_incidence * theta.sin();
        let n = self.eps.len();

        let mut q = Vec::with_capacity(n);
        let mut z = Vec::with_capacity(n);
        for (i, &e) in self.eps.iter().enumerate() {
            let qi = normalized_kz(e, kx, pol, self.position(i))?;
            q.push(qi);
            z.push(impedance(e, qi, pol));
        }

        let (mut r, mut t) =
            interface_from_impedance(z[n - 2], z[n - 1], self.position(n - 2), self.position(n - 1))?;
        for j in (1..n - 1).rev() {
            let (r_ij, t_ij) =
                interface_from_impedance(z[j - 1], z[j], self.position(j - 1), self.position(j))?;
            let phase = (Complex64::i() * q[j] * (k0 * self.thickness[j - 1])).exp();
            let round_trip = r * phase * phase;
            let denom = Complex64::new(1.0, 0.0) + r_ij * round_trip;
            if denom == Complex64::new(0.0, 0.0) {
                return Err(TmmError::DegenerateInterface {
                    upper: self.position(j - 1),
                    lower: self.position(j),
                });
            }
            t = t_ij * t * phase / denom;
            r = (r_ij + round_trip) / denom;
        }

        let flux = |idx: usize| match pol {
            Polarization::P => (q[idx] / self.eps[idx].in_plane()).re,
            Polarization::S => q[idx].re,
        };
        let transmittance = if q[n - 1].re == 0.0 {
            0.0
        } else {
            flux(n - 1) / flux(0) * t.norm_sqr()
        };
        Ok(ReflectivityResult {
            r,
            reflectance: r.norm_sqr(),
            transmittance,
        })
    }
}

pub fn stack_reflection(
    stack: &Stack,
    wave: &PlaneWaveState,
    constants: &PhysicalConstants,
) -> Result<ReflectivityResult, TmmError> {
    wave.validate()?;
    stack
        .at_wavelength(wave.lambda0, constants)?
        .reflect(wave.theta, wave.pol)
}

/// A failed grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CellError {
    pub lambda_index: usize,
    pub theta_index: usize,
    pub error: TmmError,
}

/// Reflectance over a wavelength x angle grid, stored row-major with the
/// wavelength as the outer index.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectivityMap {
    /// Vacuum wavelengths [m].
    pub lambdas: Vec<f64>,
    /// Angles of incidence [rad].
    pub thetas: Vec<f64>,
    pub pol: Polarization,
    /// `values[i * thetas.len() + j]` is `R(lambdas[i], thetas[j])`; NaN for failed cells.
    pub values: Vec<f64>,
    pub errors: Vec<CellError>,
}

impl ReflectivityMap {
    pub fn get(&self, lambda_index: usize, theta_index: usize) -> f64 {
        self.values[lambda_index * self.thetas.len() + theta_index]
    }

    /// Spectrum `R(lambda)` at one angle.
    pub fn column(&self, theta_index: usize) -> Vec<f64> {
        (0..self.lambdas.len())
            .map(|i| self.get(i, theta_index))
            .collect()
    }
}

pub(crate) fn check_grid(name: &str, grid: &[f64]) -> Result<(), TmmError> {
    if grid.is_empty() {
        return Err(TmmError::InvalidGrid(format!("{name} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(TmmError::InvalidGrid(format!(
            "{name} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Evaluates every grid point. Rows are distributed over the current rayon
/// pool; each cell depends only on its own coordinates, so the result does
/// not depend on the number of workers. Failing cells become NaN and are
/// listed in `errors`.
pub fn reflectivity_map(
    stack: &Stack,
    lambda_grid: &[f64],
    theta_grid: &[f64],
    pol: Polarization,
    constants: &PhysicalConstants,
) -> Result<ReflectivityMap, TmmError> {
    check_grid("wavelength", lambda_grid)?;
    check_grid("angle", theta_grid)?;
    stack.validate()?;
    let nt = theta_grid.len();
    let mut values = vec![f64::NAN; lambda_grid.len() * nt];
    let row_errors: Vec<Vec<CellError>> = values
        .par_chunks_mut(nt)
        .zip(lambda_grid.par_iter())
        .enumerate()
        .map(|(i, (row, &lambda))| {
            let mut errors = Vec::new();
            match stack.at_wavelength(lambda, constants) {
                Ok(snap) => {
                    for (j, (cell, &theta)) in row.iter_mut().zip(theta_grid).enumerate() {
                        match snap.reflect(theta, pol) {
                            Ok(res) => *cell = res.reflectance,
                            Err(error) => errors.push(CellError {
                                lambda_index: i,
                                theta_index: j,
                                error,
                            }),
                        }
                    }
                }
                Err(error) => errors.extend((0..nt).map(|j| CellError {
                    lambda_index: i,
                    theta_index: j,
                    error: error.clone(),
                })),
            }
            errors
        })
        .collect();
    Ok(ReflectivityMap {
        lambdas: lambda_grid.to_vec(),
        thetas: theta_grid.to_vec(),
        pol,
        values,
        errors: row_errors.into_iter().flatten().collect(),
    })
}
