//! Job execution for the command-line tool.
//!
//! [`run_job`] is pure: it returns file contents and a JSON result, and
//! [`write_outputs`] is the only place that touches the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use num_complex::Complex64;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, JobConfig};
use crate::homogenization::{classify_band, find_band_edges, HomogenizationSpec};
use crate::materials::{dye_plasma_frequency, Material, PhysicalConstants};
use crate::output::{self, fmt_g9};
use crate::polariton::{
    coupled_eigenfrequencies, coupling_from_strength, fit_surface_resonance, prefactor_from_coupling,
    rabi_estimate, solve_azz_roots, vacuum_decay_rate, AtomModel, ResonanceFit, SurfaceResonance,
};
use crate::spectra::{self, concentration_sweep, estimate_concentration, find_dips, Spectrum};
use crate::tmm::reflectivity_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Permittivity,
    Emt,
    BandEdges,
    Reflectivity,
    Map,
    Dips,
    Sweep,
    Modes,
    FitResonance,
    Estimate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Permittivity => "permittivity",
            Command::Emt => "emt",
            Command::BandEdges => "band-edges",
            Command::Reflectivity => "reflectivity",
            Command::Map => "map",
            Command::Dips => "dips",
            Command::Sweep => "sweep",
            Command::Modes => "modes",
            Command::FitResonance => "fit-resonance",
            Command::Estimate => "estimate",
        }
    }
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("configuration: {0}")]
    Setup(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl JobError {
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) | JobError::Setup(_) => 2,
            JobError::Numerical(_) => 3,
            JobError::Io { .. } => 4,
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> JobError {
    JobError::Numerical(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutput {
    /// File name and contents, in write order.
    pub files: Vec<(String, String)>,
    pub result: Value,
}

/// JSON number rounded to 9 significant digits; non-finite values become null.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt_g9(x).parse::<f64>().expect("formatted float parses"))
    } else {
        Value::Null
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

/// SHA-256 of the canonical serialisation of the validated config.
pub fn config_hash(cfg: &JobConfig) -> String {
    hex::encode(Sha256::digest(cfg.to_json().as_bytes()))
}

struct Ctx<'a> {
    cfg: &'a JobConfig,
    materials: BTreeMap<String, Material>,
    k: &'a PhysicalConstants,
}

/// Runs one subcommand. `base_dir` anchors relative table paths.
pub fn run_job(
    cfg: &JobConfig,
    base_dir: &Path,
    command: Command,
    k: &PhysicalConstants,
) -> Result<JobOutput, JobError> {
    let ctx = Ctx {
        cfg,
        materials: cfg.resolve_materials(base_dir)?,
        k,
    };
    match command {
        Command::Permittivity => permittivity(&ctx),
        Command::Emt => emt(&ctx),
        Command::BandEdges => band_edges(&ctx),
        Command::Reflectivity => reflectivity(&ctx),
        Command::Map => map(&ctx),
        Command::Dips => dips(&ctx),
        Command::Sweep => sweep(&ctx),
        Command::Modes => modes(&ctx),
        Command::FitResonance => fit_resonance(&ctx).map(|(out, _)| out),
        Command::Estimate => estimate(&ctx),
    }
}

fn permittivity(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let mut csv = String::from("material,lambda_nm,eps_re,eps_im\n");
    for (name, m) in &ctx.materials {
        for l in ctx.cfg.lambda_grid() {
            let eps = m
                .permittivity(ctx.k.wavelength_to_omega(l), ctx.k)
                .map_err(|e| numerical(format!("{name}: {e}")))?;
            let _ = writeln!(csv, "{name},{},{},{}", fmt_g9(l * 1e9), fmt_g9(eps.re), fmt_g9(eps.im));
        }
    }
    Ok(JobOutput {
        files: vec![("permittivity.csv".into(), csv)],
        result: json!({ "materials": ctx.materials.keys().collect::<Vec<_>>() }),
    })
}

fn emt_spec(ctx: &Ctx) -> Result<HomogenizationSpec, JobError> {
    ctx.cfg
        .emt_spec(&ctx.materials)
        .ok_or_else(|| JobError::Setup("the stack has no emt layer".into()))
}

fn band_grid(cfg: &JobConfig) -> Vec<f64> {
    let [lo, hi] = cfg.analysis.band_window_nm;
    crate::config::RangeConfig {
        start: lo,
        stop: hi,
        step: cfg.analysis.band_resolution_nm,
    }
    .points()
    .into_iter()
    .map(|l| l * 1e-9)
    .collect()
}

fn emt(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let spec = emt_spec(ctx)?;
    let mut csv = String::from("lambda_nm,eps_perp_re,eps_perp_im,eps_par_re,eps_par_im,band\n");
    for l in band_grid(ctx.cfg) {
        let u = spec
            .evaluate(ctx.k.wavelength_to_omega(l), ctx.k)
            .map_err(numerical)?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_g9(l * 1e9),
            fmt_g9(u.eps_perp.re),
            fmt_g9(u.eps_perp.im),
            fmt_g9(u.eps_par.re),
            fmt_g9(u.eps_par.im),
            classify_band(&u).as_str()
        );
    }
    Ok(JobOutput {
        files: vec![("emt.csv".into(), csv)],
        result: json!({ "fill_fraction": num(spec.fill_fraction) }),
    })
}

fn band_edges(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let spec = emt_spec(ctx)?;
    let [lo, hi] = ctx.cfg.analysis.band_window_nm;
    let edges = find_band_edges(
        &spec,
        (lo * 1e-9, hi * 1e-9),
        ctx.cfg.analysis.band_resolution_nm * 1e-9,
        ctx.k,
    )
    .map_err(numerical)?;
    let result = json!({
        "lambda_enz_nm": num(edges.lambda_enz * 1e9),
        "lambda_enp_nm": num(edges.lambda_enp * 1e9),
    });
    Ok(JobOutput {
        files: vec![("band_edges.json".into(), pretty(&result))],
        result,
    })
}

fn fixed_spectrum(ctx: &Ctx, concentration: Option<f64>) -> Result<Spectrum, JobError> {
    let stack = ctx.cfg.build_stack(&ctx.materials, concentration);
    let mut s = Spectrum::simulate(
        &stack,
        &ctx.cfg.lambda_grid(),
        ctx.cfg.theta_fixed(),
        ctx.cfg.sweep.polarization,
        ctx.k,
    )
    .map_err(numerical)?;
    s.meta.concentration = concentration;
    Ok(s)
}

fn reflectivity(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let s = fixed_spectrum(ctx, None)?;
    Ok(JobOutput {
        files: vec![("reflectivity.csv".into(), output::spectrum_csv(&s))],
        result: json!({ "points": s.lambdas.len() }),
    })
}

fn map(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let stack = ctx.cfg.build_stack(&ctx.materials, None);
    let m = reflectivity_map(
        &stack,
        &ctx.cfg.lambda_grid(),
        &ctx.cfg.theta_grid(),
        ctx.cfg.sweep.polarization,
        ctx.k,
    )
    .map_err(numerical)?;
    let errors: Vec<Value> = m
        .errors
        .iter()
        .map(|e| {
            json!({
                "lambda_nm": num(m.lambdas[e.lambda_index] * 1e9),
                "theta_deg": num(m.thetas[e.theta_index].to_degrees()),
                "error": e.error.to_string(),
            })
        })
        .collect();
    let dip_counts: Vec<Value> = (0..m.thetas.len())
        .map(|j| {
            let s = Spectrum::new(m.lambdas.clone(), m.column(j)).expect("map grid is valid");
            let o = ctx.cfg.dip_options();
            json!({
                "theta_deg": num(m.thetas[j].to_degrees()),
                "dip_count": find_dips(&s, o.prominence, o.window).ok().map(|r| r.count()),
            })
        })
        .collect();
    Ok(JobOutput {
        files: vec![("map.csv".into(), output::map_csv(&m))],
        result: json!({
            "cells": m.values.len(),
            "failed_cells": errors,
            "dip_count_by_angle": dip_counts,
        }),
    })
}

fn dips(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let s = fixed_spectrum(ctx, None)?;
    let o = ctx.cfg.dip_options();
    let report = find_dips(&s, o.prominence, o.window).map_err(numerical)?;
    let splitting = spectra::splitting_energy(&report, ctx.k).ok();
    let result = json!({
        "dip_count": report.count(),
        "dips": report.dips.iter().map(|d| json!({
            "lambda_nm": num(d.lambda_min * 1e9),
            "R_min": num(d.r_min),
            "prominence": num(d.prominence),
        })).collect::<Vec<_>>(),
        "splitting_meV": opt_num(splitting),
    });
    Ok(JobOutput {
        files: vec![("dips.csv".into(), output::dips_csv(&report))],
        result,
    })
}

fn sensing_dye(ctx: &Ctx) -> Result<(), JobError> {
    ctx.cfg
        .sensing_dye()
        .map(|_| ())
        .ok_or_else(|| JobError::Setup("no unique dye in the stack; set sweep.dye".into()))
}

fn run_sweep(ctx: &Ctx, concentrations: &[f64]) -> Result<spectra::SensingCurve, JobError> {
    sensing_dye(ctx)?;
    concentration_sweep(
        |c| ctx.cfg.build_stack(&ctx.materials, Some(c)),
        concentrations,
        ctx.cfg.theta_fixed(),
        &ctx.cfg.lambda_grid(),
        ctx.cfg.sweep.polarization,
        &ctx.cfg.dip_options(),
        ctx.k,
    )
    .map_err(numerical)
}

fn curve_summary(curve: &spectra::SensingCurve) -> Value {
    json!({
        "rows": curve.rows.len(),
        "splitting_onset_molar": opt_num(curve.splitting_onset()),
        "row_errors": curve.rows.iter().filter_map(|r| r.error.as_ref().map(|e| json!({
            "C_molar": num(r.concentration),
            "error": e,
        }))).collect::<Vec<_>>(),
    })
}

fn sweep(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let curve = run_sweep(ctx, &ctx.cfg.sweep.concentrations_molar)?;
    Ok(JobOutput {
        files: vec![("sensing_curve.csv".into(), output::sensing_csv(&curve))],
        result: curve_summary(&curve),
    })
}

fn estimate(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let est = ctx
        .cfg
        .estimate
        .as_ref()
        .ok_or_else(|| JobError::Setup("missing estimate block".into()))?;
    let cs = est
        .concentrations_molar
        .as_deref()
        .unwrap_or(&ctx.cfg.sweep.concentrations_molar);
    let curve = run_sweep(ctx, cs)?;
    let e = estimate_concentration(est.observable(), &curve).map_err(numerical)?;
    let result = json!({
        "observable": est.observable().name(),
        "value": num(est.value),
        "concentration_molar": num(e.concentration),
        "bracket_molar": [num(e.bracket.0), num(e.bracket.1)],
    });
    Ok(JobOutput {
        files: vec![
            ("calibration_curve.csv".into(), output::sensing_csv(&curve)),
            ("estimate.json".into(), pretty(&result)),
        ],
        result,
    })
}

/// Fits the pole model to the complex reflection coefficient of the bare
/// (zero-concentration) stack around its most prominent dip.
fn fit_resonance(ctx: &Ctx) -> Result<(JobOutput, ResonanceFit), JobError> {
    let bare = ctx.cfg.sensing_dye().map(|_| 0.0);
    let stack = ctx.cfg.build_stack(&ctx.materials, bare);
    let (theta, pol) = (ctx.cfg.theta_fixed(), ctx.cfg.sweep.polarization);
    let grid = ctx.cfg.lambda_grid();
    let r: Vec<Complex64> = grid
        .iter()
        .map(|&l| {
            stack
                .at_wavelength(l, ctx.k)
                .and_then(|s| s.reflect(theta, pol))
                .map(|x| x.r)
        })
        .collect::<Result<_, _>>()
        .map_err(numerical)?;
    let spectrum = Spectrum::new(grid.clone(), r.iter().map(|x| x.norm_sqr()).collect())
        .map_err(numerical)?;
    let o = ctx.cfg.dip_options();
    let report = find_dips(&spectrum, o.prominence, o.window).map_err(numerical)?;
    let dip = report
        .dips
        .iter()
        .max_by(|a, b| a.prominence.total_cmp(&b.prominence))
        .ok_or_else(|| numerical("bare stack shows no dip to fit"))?;
    let hw = ctx.cfg.analysis.fit_halfwidth_nm * 1e-9;
    let samples: Vec<(f64, Complex64)> = grid
        .iter()
        .zip(&r)
        .filter(|(l, _)| (**l - dip.lambda_min).abs() <= hw)
        .map(|(&l, &r)| (ctx.k.wavelength_to_omega(l), r))
        .collect();
    let fit = fit_surface_resonance(&samples, ctx.cfg.analysis.fit_tolerance).map_err(numerical)?;
    let dip_omega = ctx.k.wavelength_to_omega(dip.lambda_min);
    let res = fit.resonance;
    let result = json!({
        "omega_c": num(res.omega_c),
        "kappa_c": num(res.kappa_c),
        "chi": num(res.chi),
        "lambda_c_nm": num(ctx.k.omega_to_wavelength(res.omega_c) * 1e9),
        "background_re": num(fit.background.re),
        "background_im": num(fit.background.im),
        "residue_re": num(fit.residue.re),
        "residue_im": num(fit.residue.im),
        "relative_residual": num(fit.relative_residual),
        "samples": samples.len(),
        "dip_lambda_nm": num(dip.lambda_min * 1e9),
        "dip_omega": num(dip_omega),
        "omega_c_offset_rel": num((res.omega_c - dip_omega) / dip_omega),
    });
    Ok((
        JobOutput {
            files: vec![("resonance.json".into(), pretty(&result))],
            result,
        },
        fit,
    ))
}

fn modes(ctx: &Ctx) -> Result<JobOutput, JobError> {
    let m = ctx.cfg.modes.clone().unwrap_or_default();
    let dye = ctx.cfg.sensing_dye().and_then(|d| match &ctx.materials[d] {
        Material::Dye(model) => Some(*model),
        _ => None,
    });
    let omega_0 = m
        .omega_0
        .or(dye.map(|d| d.omega_0))
        .ok_or_else(|| JobError::Setup("modes.omega_0 is required without a sensing dye".into()))?;
    let gamma_vac = m.gamma_vac.unwrap_or_else(|| vacuum_decay_rate(omega_0, ctx.k));
    let (res, fitted): (SurfaceResonance, bool) = match m.resonance {
        Some(r) => (r, false),
        None => (fit_resonance(ctx)?.1.resonance, true),
    };
    // collective coupling of the dye ensemble, 2 g = omega_p
    let g = match (m.g, fitted, dye) {
        (Some(g), _, _) => g,
        (None, false, _) => coupling_from_strength(res.chi, omega_0, ctx.k),
        (None, true, Some(d)) => dye_plasma_frequency(&d, ctx.k) / 2.0,
        (None, true, None) => {
            return Err(JobError::Setup(
                "modes.g is required when the resonance is fitted without a dye".into(),
            ))
        }
    };
    let atom = AtomModel { omega_0, gamma_vac };
    let cm = coupled_eigenfrequencies(&atom, &res, g, ctx.k);
    let roots = solve_azz_roots(&atom, &res, prefactor_from_coupling(g, omega_0), None);
    let mut result = json!({
        "omega_plus_re": num(cm.omega_plus.re),
        "omega_plus_im": num(cm.omega_plus.im),
        "omega_minus_re": num(cm.omega_minus.re),
        "omega_minus_im": num(cm.omega_minus.im),
        "g": num(cm.g),
        "regime": cm.regime.as_str(),
        "splitting_meV": num(cm.splitting_mev),
        "margin": num(cm.margin),
        "omega_0": num(omega_0),
        "gamma_vac": num(gamma_vac),
        "omega_c": num(res.omega_c),
        "kappa_c": num(res.kappa_c),
        "resonance_fitted": fitted,
    });
    match roots {
        Ok(r) => {
            result["azz_roots"] = r.iter().map(|w| json!([num(w.re), num(w.im)])).collect();
        }
        Err(e) => result["azz_roots_error"] = json!(e.to_string()),
    }
    if let Some(d) = dye {
        let est = rabi_estimate(res.omega_c, dye_plasma_frequency(&d, ctx.k), ctx.k);
        result["rabi_estimate_meV"] = num(est.splitting_mev);
    }
    Ok(JobOutput {
        files: vec![("modes.json".into(), pretty(&result))],
        result,
    })
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Writes the job files and `summary.json` into `dir`, returning the paths
/// written.
pub fn write_outputs(
    dir: &Path,
    command: Command,
    cfg: &JobConfig,
    out: &JobOutput,
    threads: usize,
    wall: Duration,
) -> Result<Vec<PathBuf>, JobError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| JobError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut written = Vec::new();
    for (name, contents) in &out.files {
        let path = dir.join(name);
        std::fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
    }
    let summary = json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "schema_version": cfg.schema_version,
        "subcommand": command.name(),
        "config_sha256": config_hash(cfg),
        "threads": threads,
        "wall_time_s": wall.as_secs_f64(),
        "outputs": out.files.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(),
        "result": out.result,
    });
    let path = dir.join("summary.json");
    std::fs::write(&path, pretty(&summary)).map_err(io(&path))?;
    written.push(path);
    Ok(written)
}
