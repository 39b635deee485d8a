//! C ABI for hmmsense.
//!
//! Every function returns an [`HmsStatus`]. On failure a message is stored
//! per thread and can be read with [`hms_last_error`]. Stacks are opaque
//! handles created from a JSON job configuration and released with
//! [`hms_stack_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use hmmsense::config::{parse_config, JobConfig};
use hmmsense::homogenization::find_band_edges;
use hmmsense::materials::{dye_plasma_frequency, DyeModel, Material};
use hmmsense::polariton::{coupled_eigenfrequencies, AtomModel, Regime, SurfaceResonance};
use hmmsense::tmm::{Polarization, Stack};
use hmmsense::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::CODATA2018;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Numerical = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmsPolarization {
    P = 0,
    S = 1,
}

impl From<HmsPolarization> for Polarization {
    fn from(p: HmsPolarization) -> Self {
        match p {
            HmsPolarization::P => Polarization::P,
            HmsPolarization::S => Polarization::S,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HmsCoupledModes {
    pub omega_plus_re: f64,
    pub omega_plus_im: f64,
    pub omega_minus_re: f64,
    pub omega_minus_im: f64,
    pub g: f64,
    /// 1 for strong coupling, 0 for weak.
    pub strong: i32,
    pub margin: f64,
    pub splitting_mev: f64,
}

/// Opaque stack handle.
pub struct HmsStack {
    config: JobConfig,
    materials: BTreeMap<String, Material>,
    stack: Stack,
}

struct Failure(HmsStatus, String);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> HmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(&format!("panic: {msg}"));
            HmsStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(HmsStatus::NullPointer, format!("{what} is null"))
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure(HmsStatus::Numerical, e.to_string())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(HmsStatus::InvalidUtf8, format!("{what}: {e}")))
}

/// Message of the last failed call on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a stack from a JSON job configuration. `base_dir` resolves
/// relative table paths and may be null for the current directory.
///
/// # Safety
/// `config_json` and a non-null `base_dir` must be NUL-terminated strings;
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hms_stack_from_config_json(
    config_json: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut HmsStack,
) -> HmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let text = str_arg(config_json, "config_json")?;
        let base = if base_dir.is_null() {
            "."
        } else {
            str_arg(base_dir, "base_dir")?
        };
        let config = parse_config(text).map_err(|e| Failure(HmsStatus::Config, e.to_string()))?;
        let materials = config
            .resolve_materials(Path::new(base))
            .map_err(|e| Failure(HmsStatus::Config, e.to_string()))?;
        let stack = config.build_stack(&materials, None);
        stack.validate().map_err(|e| Failure(HmsStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(HmsStack {
            config,
            materials,
            stack,
        }));
        Ok(())
    })
}

/// Releases a stack. Null is ignored.
///
/// # Safety
/// `stack` must come from [`hms_stack_from_config_json`] and not be used
/// afterwards.
#[no_mangle]
pub unsafe extern "C" fn hms_stack_free(stack: *mut HmsStack) {
    if !stack.is_null() {
        drop(Box::from_raw(stack));
    }
}

/// Sets the concentration [mol/l] of the stack's sensing dye.
///
/// # Safety
/// `stack` must be a live handle not used concurrently.
#[no_mangle]
pub unsafe extern "C" fn hms_stack_set_concentration(stack: *mut HmsStack, molar: f64) -> HmsStatus {
    guard(|| {
        let s = stack.as_mut().ok_or_else(|| null("stack"))?;
        if !(molar >= 0.0 && molar.is_finite()) {
            return Err(Failure(
                HmsStatus::InvalidArgument,
                format!("concentration must be >= 0, got {molar}"),
            ));
        }
        if s.config.sensing_dye().is_none() {
            return Err(Failure(HmsStatus::Config, "stack has no unique dye".into()));
        }
        s.stack = s.config.build_stack(&s.materials, Some(molar));
        Ok(())
    })
}

/// Reflectance at one wavelength [nm] and angle [deg].
///
/// # Safety
/// `stack` must be a live handle, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hms_reflectance(
    stack: *const HmsStack,
    lambda_nm: f64,
    theta_deg: f64,
    pol: HmsPolarization,
    out: *mut f64,
) -> HmsStatus {
    hms_reflectance_spectrum(stack, &lambda_nm, 1, theta_deg, pol, out)
}

/// Reflectance at `n` wavelengths [nm] and one angle [deg], written to `out`.
///
/// # Safety
/// `lambda_nm` must hold `n` values and `out` room for `n` values.
#[no_mangle]
pub unsafe extern "C" fn hms_reflectance_spectrum(
    stack: *const HmsStack,
    lambda_nm: *const f64,
    n: usize,
    theta_deg: f64,
    pol: HmsPolarization,
    out: *mut f64,
) -> HmsStatus {
    guard(|| {
        let s = stack.as_ref().ok_or_else(|| null("stack"))?;
        if n == 0 {
            return Ok(());
        }
        if lambda_nm.is_null() {
            return Err(null("lambda_nm"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let lambdas = std::slice::from_raw_parts(lambda_nm, n);
        let out = std::slice::from_raw_parts_mut(out, n);
        for (l, o) in lambdas.iter().zip(out.iter_mut()) {
            if !(*l > 0.0 && l.is_finite()) {
                return Err(Failure(
                    HmsStatus::InvalidArgument,
                    format!("wavelength must be > 0, got {l}"),
                ));
            }
            *o = s
                .stack
                .at_wavelength(l * 1e-9, &K)
                .and_then(|w| w.reflect(theta_deg.to_radians(), pol.into()))
                .map_err(numerical)?
                .reflectance;
        }
        Ok(())
    })
}

/// ENZ and ENP wavelengths [nm] of the stack's first EMT layer.
///
/// # Safety
/// `stack` must be a live handle; `enz_nm` and `enp_nm` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hms_band_edges(
    stack: *const HmsStack,
    lo_nm: f64,
    hi_nm: f64,
    resolution_nm: f64,
    enz_nm: *mut f64,
    enp_nm: *mut f64,
) -> HmsStatus {
    guard(|| {
        let s = stack.as_ref().ok_or_else(|| null("stack"))?;
        if enz_nm.is_null() || enp_nm.is_null() {
            return Err(null("output"));
        }
        let spec = s
            .config
            .emt_spec(&s.materials)
            .ok_or_else(|| Failure(HmsStatus::Config, "stack has no emt layer".into()))?;
        let e = find_band_edges(&spec, (lo_nm * 1e-9, hi_nm * 1e-9), resolution_nm * 1e-9, &K)
            .map_err(numerical)?;
        *enz_nm = e.lambda_enz * 1e9;
        *enp_nm = e.lambda_enp * 1e9;
        Ok(())
    })
}

/// Collective plasma frequency [rad/s] of a dye at `molar` with oscillator
/// strength factor `h`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hms_dye_plasma_frequency(molar: f64, h: f64, out: *mut f64) -> HmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dye = DyeModel {
            h,
            ..DyeModel::r6g(molar)
        };
        dye.validate()
            .map_err(|e| Failure(HmsStatus::InvalidArgument, e.to_string()))?;
        *out = dye_plasma_frequency(&dye, &K);
        Ok(())
    })
}

/// Near-resonance coupled-mode frequencies. All rates in rad/s.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hms_coupled_modes(
    omega_0: f64,
    gamma_vac: f64,
    omega_c: f64,
    kappa_c: f64,
    g: f64,
    out: *mut HmsCoupledModes,
) -> HmsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !(omega_0 > 0.0 && ok(omega_0) && ok(gamma_vac) && ok(omega_c) && ok(kappa_c) && ok(g)) {
            return Err(Failure(
                HmsStatus::InvalidArgument,
                "rates must be finite and non-negative, omega_0 > 0".into(),
            ));
        }
        let m = coupled_eigenfrequencies(
            &AtomModel { omega_0, gamma_vac },
            &SurfaceResonance {
                omega_c,
                kappa_c,
                chi: 0.0,
            },
            g,
            &K,
        );
        *out = HmsCoupledModes {
            omega_plus_re: m.omega_plus.re,
            omega_plus_im: m.omega_plus.im,
            omega_minus_re: m.omega_minus.re,
            omega_minus_im: m.omega_minus.im,
            g: m.g,
            strong: (m.regime == Regime::Strong) as i32,
            margin: m.margin,
            splitting_mev: m.splitting_mev,
        };
        Ok(())
    })
}
