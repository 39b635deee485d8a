//! Classical coupled-oscillator description of an emitter next to a surface
//! resonance.
//!
//! The scattered Green function near the surface resonance is taken in the
//! pole form `G_zz = -chi / (omega - omega_c + i kappa_c)`. With `G_zz` in
//! 1/m, the oscillator strength `chi` carries units of rad/(s m) so that
//! `g^2 = e^2 omega_0 chi / (2 m c^2 eps0)` is in rad^2/s^2.
//!
//! The exact zz equation of motion reads
//!
//! ```text
//! A_zz(omega) = (omega_0^2 - omega^2) - 2 i gamma_vac omega
//!             + K omega^2 / (omega - omega_c + i kappa_c)
//! ```
//!
//! with the coupling prefactor `K = e^2 chi / (c^2 eps0 m)` in rad/s, so that
//! `g^2 = K omega_0 / 2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use crate::materials::PhysicalConstants;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolaritonError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "argument principle counts {counted} root(s) in Re [{re_lo:.6e}, {re_hi:.6e}], \
         Im [{im_lo:.6e}, {im_hi:.6e}] rad/s but polishing found {found}"
    )]
    RootCountMismatch {
        counted: i64,
        found: usize,
        re_lo: f64,
        re_hi: f64,
        im_lo: f64,
        im_hi: f64,
    },
    #[error("root polishing failed: |A_zz| = {residual:.3e} omega_0^2 at omega = {omega}")]
    Polishing { omega: Complex64, residual: f64 },
    #[error("resonance fit failed: {reason} (relative residual {residual:.3e})")]
    FitFailure { reason: String, residual: f64 },
}

/// Pole model of a surface resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceResonance {
    /// Resonance frequency [rad/s].
    pub omega_c: f64,
    /// Damping [rad/s].
    pub kappa_c: f64,
    /// Oscillator strength [rad/(s m)], see the module docs.
    pub chi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomModel {
    /// Transition frequency [rad/s].
    pub omega_0: f64,
    /// Vacuum emission rate [rad/s].
    pub gamma_vac: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Weak,
    Strong,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Weak => "weak",
            Regime::Strong => "strong",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledModeResult {
    pub omega_plus: Complex64,
    pub omega_minus: Complex64,
    /// Coupling constant [rad/s].
    pub g: f64,
    pub regime: Regime,
    /// `2 g / max(kappa_c, gamma_vac)`.
    pub margin: f64,
    /// `hbar Re(omega_plus - omega_minus)` in meV.
    pub splitting_mev: f64,
}

/// `gamma = omega^2 e^2 / (12 pi eps0 m c^3)`, i.e. `Im G_zz^vac = omega / (6 pi c)`.
pub fn vacuum_decay_rate(omega: f64, k: &PhysicalConstants) -> f64 {
    omega * omega * k.e * k.e / (12.0 * PI * k.eps0 * k.m * k.c.powi(3))
}

/// `g = sqrt(e^2 omega_0 chi / (2 m c^2 eps0))`.
pub fn coupling_from_strength(chi: f64, omega_0: f64, k: &PhysicalConstants) -> f64 {
    (k.e * k.e * omega_0 * chi / (2.0 * k.m * k.c * k.c * k.eps0)).sqrt()
}

/// Inverse of [`coupling_from_strength`].
pub fn strength_from_coupling(g: f64, omega_0: f64, k: &PhysicalConstants) -> f64 {
    g * g * 2.0 * k.m * k.c * k.c * k.eps0 / (k.e * k.e * omega_0)
}

/// `K = e^2 chi / (c^2 eps0 m)` [rad/s].
pub fn azz_prefactor(chi: f64, k: &PhysicalConstants) -> f64 {
    k.e * k.e * chi / (k.c * k.c * k.eps0 * k.m)
}

/// Prefactor `K = 2 g^2 / omega_0` that produces coupling `g`.
pub fn prefactor_from_coupling(g: f64, omega_0: f64) -> f64 {
    2.0 * g * g / omega_0
}

/// Strong coupling requires `2 g > max(kappa_c, gamma_vac)`.
pub fn classify_coupling(g: f64, gamma_vac: f64, kappa_c: f64) -> Regime {
    if 2.0 * g > kappa_c.max(gamma_vac) {
        Regime::Strong
    } else {
        Regime::Weak
    }
}

/// `2 g / max(kappa_c, gamma_vac)`; infinite when both losses vanish.
pub fn coupling_margin(g: f64, gamma_vac: f64, kappa_c: f64) -> f64 {
    let loss = kappa_c.max(gamma_vac);
    if loss == 0.0 {
        if g > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        2.0 * g / loss
    }
}

/// Near-resonance closed form
/// `omega = omega_0 - i (gamma + kappa)/2 ± sqrt(g^2 - (gamma - kappa)^2 / 4)`.
///
/// Valid for `omega_c ≈ omega_0`; `res.omega_c` is not used by the formula.
pub fn coupled_eigenfrequencies(
    atom: &AtomModel,
    res: &SurfaceResonance,
    g: f64,
    k: &PhysicalConstants,
) -> CoupledModeResult {
    let (gamma, kappa) = (atom.gamma_vac, res.kappa_c);
    let center = Complex64::new(atom.omega_0, -(gamma + kappa) / 2.0);
    let root = Complex64::new(g * g - (gamma - kappa).powi(2) / 4.0, 0.0).sqrt();
    let omega_plus = center + root;
    let omega_minus = center - root;
    CoupledModeResult {
        omega_plus,
        omega_minus,
        g,
        regime: classify_coupling(g, gamma, kappa),
        margin: coupling_margin(g, gamma, kappa),
        splitting_mev: k.omega_to_mev((omega_plus - omega_minus).re),
    }
}

/// Rectangle in the complex frequency plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchWindow {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl SearchWindow {
    /// `Re omega in [0.5 min(omega_0, omega_c), 1.5 max(omega_0, omega_c)]`,
    /// `Im omega in [-10 (gamma + kappa), 0]`, both widened by `1e-6 omega_0`
    /// so that undamped (real) roots stay off the contour.
    pub fn around(atom: &AtomModel, res: &SurfaceResonance) -> Self {
        let pad = 1e-6 * atom.omega_0;
        let lo = atom.omega_0.min(res.omega_c);
        let hi = atom.omega_0.max(res.omega_c);
        SearchWindow {
            re: (0.5 * lo, 1.5 * hi),
            im: (-10.0 * (atom.gamma_vac + res.kappa_c) - pad, pad),
        }
    }

    fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re.0 && z.re <= self.re.1 && z.im >= self.im.0 && z.im <= self.im.1
    }
}

/// `A_zz` in units of `omega_0^2`, as a function of `x = omega / omega_0 - 1`.
struct Dispersion {
    gamma: f64,
    kappa: f64,
    detuning: f64,
    prefactor: f64,
}

impl Dispersion {
    fn new(atom: &AtomModel, res: &SurfaceResonance, prefactor: f64) -> Self {
        let w0 = atom.omega_0;
        Self {
            gamma: atom.gamma_vac / w0,
            kappa: res.kappa_c / w0,
            detuning: res.omega_c / w0 - 1.0,
            prefactor: prefactor / w0,
        }
    }

    fn pole(&self) -> Complex64 {
        Complex64::new(self.detuning, -self.kappa)
    }

    fn free(&self, x: Complex64) -> Complex64 {
        let two = Complex64::new(2.0, 0.0);
        -x * (two + x) - Complex64::new(0.0, 2.0 * self.gamma) * (x + 1.0)
    }

    fn azz(&self, x: Complex64) -> Complex64 {
        let u = x + 1.0;
        self.free(x) + self.prefactor * u * u / (x - self.pole())
    }

    /// `A_zz * (x - pole)`, a cubic without poles, and its derivative.
    fn cubic(&self, x: Complex64) -> (Complex64, Complex64) {
        let u = x + 1.0;
        let d = x - self.pole();
        let f = self.free(x);
        let df = -(x + 1.0) * 2.0 - Complex64::new(0.0, 2.0 * self.gamma);
        (f * d + self.prefactor * u * u, df * d + f + 2.0 * self.prefactor * u)
    }

    /// All three roots of the cubic by Aberth iteration.
    fn cubic_roots(&self, seeds: [Complex64; 3]) -> [Complex64; 3] {
        let mut z = seeds;
        for _ in 0..500 {
            let mut max_step: f64 = 0.0;
            for i in 0..3 {
                let (p, dp) = self.cubic(z[i]);
                if p == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = p / dp;
                let mut sum = Complex64::new(0.0, 0.0);
                for j in 0..3 {
                    if j != i {
                        sum += (z[i] - z[j]).inv();
                    }
                }
                let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
                if step.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
                }
            }
            if max_step < 1e-17 {
                break;
            }
        }
        z
    }

    fn newton(&self, mut x: Complex64) -> Complex64 {
        for _ in 0..50 {
            let (p, dp) = self.cubic(x);
            if p == Complex64::new(0.0, 0.0) || dp == Complex64::new(0.0, 0.0) {
                break;
            }
            let step = p / dp;
            if !step.is_finite() {
                break;
            }
            x -= step;
            if step.norm() < 1e-16 * (1.0 + x.norm()) {
                break;
            }
        }
        x
    }
}

/// Net number of zeros minus poles of `f` inside the rectangle, from the
/// winding of `f` along the boundary.
fn winding_number<F: Fn(Complex64) -> Complex64>(f: &F, corners: [Complex64; 4]) -> f64 {
    fn segment<F: Fn(Complex64) -> Complex64>(
        f: &F,
        a: Complex64,
        b: Complex64,
        fa: Complex64,
        fb: Complex64,
        depth: u32,
    ) -> f64 {
        let d = (fb / fa).arg();
        if d.abs() < PI / 8.0 || depth == 0 {
            return d;
        }
        let m = (a + b) * 0.5;
        let fm = f(m);
        segment(f, a, m, fa, fm, depth - 1) + segment(f, m, b, fm, fb, depth - 1)
    }
    let mut total = 0.0;
    for i in 0..4 {
        let (a, b) = (corners[i], corners[(i + 1) % 4]);
        // coarse pre-sampling so narrow features are not skipped
        let n = 64;
        let mut prev = a;
        let mut fprev = f(a);
        for s in 1..=n {
            let z = a + (b - a) * (s as f64 / n as f64);
            let fz = f(z);
            total += segment(f, prev, z, fprev, fz, 40);
            prev = z;
            fprev = fz;
        }
    }
    total / (2.0 * PI)
}

/// Roots of `A_zz` with the pole-approximated scattered Green function,
/// located inside `window` (default [`SearchWindow::around`]) and sorted by
/// real part. `prefactor` is `K` from the module docs.
pub fn solve_azz_roots(
    atom: &AtomModel,
    res: &SurfaceResonance,
    prefactor: f64,
    window: Option<SearchWindow>,
) -> Result<Vec<Complex64>, PolaritonError> {
    if !(atom.omega_0 > 0.0) || !(res.omega_c > 0.0) {
        return Err(PolaritonError::InvalidParameter(
            "omega_0 and omega_c must be positive".into(),
        ));
    }
    if atom.gamma_vac < 0.0 || res.kappa_c < 0.0 || prefactor < 0.0 {
        return Err(PolaritonError::InvalidParameter(
            "damping rates and coupling prefactor must be non-negative".into(),
        ));
    }
    let window = window.unwrap_or_else(|| SearchWindow::around(atom, res));
    let w0 = atom.omega_0;
    let disp = Dispersion::new(atom, res, prefactor);
    let to_x = |re: f64, im: f64| Complex64::new(re / w0 - 1.0, im / w0);
    let corners = [
        to_x(window.re.0, window.im.0),
        to_x(window.re.1, window.im.0),
        to_x(window.re.1, window.im.1),
        to_x(window.re.0, window.im.1),
    ];
    let x_window = SearchWindow {
        re: (corners[0].re, corners[1].re),
        im: (corners[0].im, corners[2].im),
    };
    let poles_inside = usize::from(prefactor > 0.0 && x_window.contains(disp.pole()));
    let winding = winding_number(&|x| disp.azz(x), corners);
    let counted = winding.round() as i64 + poles_inside as i64;

    // Seeds: the two near-resonance branches and the negative-frequency root.
    let g2 = prefactor / (2.0 * w0);
    let (gh, kh) = (disp.gamma, disp.kappa);
    let centre = Complex64::new(disp.detuning / 2.0, -(gh + kh) / 2.0);
    let split = Complex64::new(g2 + disp.detuning.powi(2) / 4.0 - (gh - kh).powi(2) / 4.0, 0.0)
        .sqrt()
        + Complex64::new(1e-3, 1e-4) * (gh + kh + 1e-6);
    let seeds = [centre + split, centre - split, Complex64::new(-2.0, 0.0)];

    let mut roots = Vec::new();
    for x in disp.cubic_roots(seeds) {
        let x = disp.newton(x);
        // with K = 0 the cubic carries the pole itself as a spurious root
        if prefactor == 0.0 && (x - disp.pole()).norm() < 1e-9 {
            continue;
        }
        if !x_window.contains(x) {
            continue;
        }
        let residual = disp.azz(x).norm();
        if !(residual < 1e-8) {
            return Err(PolaritonError::Polishing {
                omega: (x + 1.0) * w0,
                residual,
            });
        }
        roots.push((x + 1.0) * w0);
    }
    if counted != roots.len() as i64 {
        return Err(PolaritonError::RootCountMismatch {
            counted,
            found: roots.len(),
            re_lo: window.re.0,
            re_hi: window.re.1,
            im_lo: window.im.0,
            im_hi: window.im.1,
        });
    }
    roots.sort_by(|a, b| a.re.total_cmp(&b.re));
    Ok(roots)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiEstimate {
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// `hbar omega_p` in meV.
    pub splitting_mev: f64,
}

/// Dense-medium estimate `omega ≈ omega_c ± omega_p / 2`, valid for
/// `gamma, kappa_c << omega_p << omega_c`.
pub fn rabi_estimate(omega_c: f64, omega_p: f64, k: &PhysicalConstants) -> RabiEstimate {
    RabiEstimate {
        omega_plus: omega_c + omega_p / 2.0,
        omega_minus: omega_c - omega_p / 2.0,
        splitting_mev: k.omega_to_mev(omega_p),
    }
}

/// Result of fitting `r(omega) ≈ a + b / (omega - omega_c + i kappa_c)`.
///
/// `resonance.chi` is set to `|b|` (rad/s), the magnitude of the residue of
/// the reflection coefficient. Mapping it onto the Green-function
/// normalisation requires a geometry-dependent factor that is not applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    pub resonance: SurfaceResonance,
    pub background: Complex64,
    pub residue: Complex64,
    /// RMS residual divided by the RMS deviation of the samples from their mean.
    pub relative_residual: f64,
}

pub const DEFAULT_FIT_TOLERANCE: f64 = 0.05;

/// Levy linearisation followed by Gauss-Newton refinement.
pub fn fit_surface_resonance(
    samples: &[(f64, Complex64)],
    max_relative_residual: f64,
) -> Result<ResonanceFit, PolaritonError> {
    use nalgebra::{DMatrix, DVector};

    let fail = |reason: &str, residual: f64| PolaritonError::FitFailure {
        reason: reason.to_string(),
        residual,
    };
    if samples.len() < 8 {
        return Err(fail(
            &format!("need at least 8 samples, got {}", samples.len()),
            f64::NAN,
        ));
    }
    if samples
        .iter()
        .any(|(w, r)| !(w.is_finite() && *w > 0.0) || !r.is_finite())
    {
        return Err(fail("non-finite sample", f64::NAN));
    }
    let n = samples.len();
    let (wmin, wmax) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (w, _)| {
            (lo.min(*w), hi.max(*w))
        });
    let centre = 0.5 * (wmin + wmax);
    let scale = 0.5 * (wmax - wmin);
    if !(scale > 0.0) {
        return Err(fail("samples span zero bandwidth", f64::NAN));
    }
    let u: Vec<f64> = samples.iter().map(|(w, _)| (w - centre) / scale).collect();
    let r: Vec<Complex64> = samples.iter().map(|s| s.1).collect();
    let mean = r.iter().sum::<Complex64>() / n as f64;
    let spread = (r.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / n as f64).sqrt();
    if !(spread > 1e-12 * (mean.norm() + f64::MIN_POSITIVE)) {
        return Err(fail("samples carry no resonant variation", f64::INFINITY));
    }

    let lstsq = |m: DMatrix<Complex64>, rhs: DVector<Complex64>| {
        m.svd(true, true).solve(&rhs, 1e-12).ok()
    };

    // r u = a u + c + p r  with  c = b - a p
    let m = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => Complex64::new(u[i], 0.0),
        1 => Complex64::new(1.0, 0.0),
        _ => r[i],
    });
    let rhs = DVector::from_fn(n, |i, _| r[i] * u[i]);
    let sol = lstsq(m, rhs).ok_or_else(|| fail("linearised system is singular", f64::NAN))?;
    let (mut a, c, mut p) = (sol[0], sol[1], sol[2]);
    let mut b = c + a * p;

    let residual_of = |a: Complex64, b: Complex64, p: Complex64| {
        (u.iter()
            .zip(&r)
            .map(|(&ui, &ri)| (a + b / (ui - p) - ri).norm_sqr())
            .sum::<f64>()
            / n as f64)
            .sqrt()
    };
    let mut best = residual_of(a, b, p);
    for _ in 0..50 {
        let jac = DMatrix::from_fn(n, 3, |i, j| {
            let d = Complex64::new(u[i], 0.0) - p;
            match j {
                0 => Complex64::new(1.0, 0.0),
                1 => d.inv(),
                _ => b / (d * d),
            }
        });
        let res = DVector::from_fn(n, |i, _| r[i] - (a + b / (u[i] - p)));
        let Some(step) = lstsq(jac, res) else { break };
        let (na, nb, np) = (a + step[0], b + step[1], p + step[2]);
        let trial = residual_of(na, nb, np);
        if !(trial.is_finite()) || trial > best {
            break;
        }
        let done = (best - trial) <= 1e-14 * best.max(1e-300);
        a = na;
        b = nb;
        p = np;
        best = trial;
        if done {
            break;
        }
    }

    let relative_residual = best / spread;
    let omega_c = centre + p.re * scale;
    let kappa_c = -p.im * scale;
    let residue = b * scale;
    if !(omega_c.is_finite() && kappa_c.is_finite() && residue.is_finite()) {
        return Err(fail("non-finite parameters", relative_residual));
    }
    if !(kappa_c > 0.0) {
        return Err(fail("fitted pole is not damped (kappa_c <= 0)", relative_residual));
    }
    if !(relative_residual <= max_relative_residual) {
        return Err(fail("residual above threshold", relative_residual));
    }
    Ok(ResonanceFit {
        resonance: SurfaceResonance {
            omega_c,
            kappa_c,
            chi: residue.norm(),
        },
        background: a,
        residue,
        relative_residual,
    })
}
