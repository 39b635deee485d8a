//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one PASS/FAIL line; exits nonzero if any criterion fails.

use std::path::Path;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hmmsense::config::{parse_config, JobConfig};
use hmmsense::homogenization::mix;
use hmmsense::job::{run_job, Command};
use hmmsense::materials::{dye_plasma_frequency, DispersionModel, DyeModel, Material};
use hmmsense::polariton::{
    coupled_eigenfrequencies, prefactor_from_coupling, rabi_estimate, solve_azz_roots, AtomModel,
    SurfaceResonance,
};
use hmmsense::spectra::{concentration_sweep, find_dips, splitting_energy, Spectrum};
use hmmsense::tmm::{
    reflectivity_map, Layer, Medium, PlaneWaveState, Polarization, Stack, UniaxialModel,
};
use hmmsense::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::CODATA2018;
const CONFIG: &str = include_str!("../configs/kretschmann_r6g.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config() -> JobConfig {
    parse_config(CONFIG).expect("shipped config parses")
}

fn stack_at(cfg: &JobConfig, c: f64) -> Stack {
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    cfg.build_stack(&mats, Some(c))
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|i| (lo + i as f64 * step) * 1e-9).collect()
}

const WINDOW: (f64, f64) = (450e-9, 650e-9);

fn dips_at(stack: &Stack, theta_deg: f64, lambdas: &[f64]) -> hmmsense::spectra::DipReport {
    let s = Spectrum::simulate(stack, lambdas, theta_deg.to_radians(), Polarization::P, &K).unwrap();
    find_dips(&s, 0.02, WINDOW).unwrap()
}

fn band_edges() -> Outcome {
    let cfg = config();
    let t = Instant::now();
    let out = run_job(&cfg, Path::new("."), Command::BandEdges, &K).unwrap();
    let dt = t.elapsed();
    let enz = out.result["lambda_enz_nm"].as_f64().unwrap();
    let enp = out.result["lambda_enp_nm"].as_f64().unwrap();
    let pass = (enz - 414.0).abs() <= 5.0 && (enp - 513.0).abs() <= 5.0 && dt < Duration::from_secs(1);
    outcome(pass, format!("ENZ {enz:.2} nm, ENP {enp:.2} nm, {:.3} s", dt.as_secs_f64()))
}

fn plasma_frequency() -> Outcome {
    let wp = dye_plasma_frequency(&DyeModel::r6g(0.1), &K);
    let est = rabi_estimate(3.5e15, wp, &K);
    let pass = (wp / 3.76e14 - 1.0).abs() <= 0.01 && (est.splitting_mev - 247.0).abs() <= 3.0;
    outcome(pass, format!("omega_p {wp:.4e} rad/s, splitting {:.1} meV", est.splitting_mev))
}

fn strong_coupling_spectrum() -> Outcome {
    let cfg = config();
    let t = Instant::now();
    let rep = dips_at(&stack_at(&cfg, 0.1), 48.0, &grid(450.0, 650.0, 0.5));
    let dt = t.elapsed();
    let nm: Vec<f64> = rep.dips.iter().map(|d| d.lambda_min * 1e9).collect();
    let pass = rep.count() == 2
        && (nm[0] - 498.0).abs() <= 10.0
        && (nm[1] - 586.0).abs() <= 10.0
        && splitting_energy(&rep, &K).is_ok_and(|e| (e - 370.0).abs() <= 40.0)
        && dt < Duration::from_secs(5);
    let split = splitting_energy(&rep, &K).map(|e| format!("{e:.1}")).unwrap_or("-".into());
    outcome(pass, format!("dips {nm:.1?} nm, splitting {split} meV, {:.2} s", dt.as_secs_f64()))
}

fn weak_coupling_shift() -> Outcome {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    let curve = concentration_sweep(
        |c| cfg.build_stack(&mats, Some(c)),
        &[0.0, 0.002, 0.005, 0.01],
        48f64.to_radians(),
        &grid(450.0, 650.0, 0.5),
        Polarization::P,
        &cfg.dip_options(),
        &K,
    )
    .unwrap();
    let single = curve.rows.iter().all(|r| r.dip_count == 1);
    let r: Vec<f64> = curve.rows.iter().map(|r| r.r_min_1.unwrap_or(f64::NAN)).collect();
    let pass = single
        && (r[0] - 0.2).abs() <= 0.05
        && (r[3] - 0.04).abs() <= 0.05
        && r.windows(2).all(|w| w[1] < w[0]);
    outcome(pass, format!("single dip {single}, R_min {r:.3?}"))
}

fn splitting_robustness() -> Outcome {
    let cfg = config();
    let stack = stack_at(&cfg, 0.1);
    let lambdas = grid(450.0, 650.0, 1.0);
    let thetas: Vec<f64> = (0..=32).map(|i| (46.0 + 0.25 * i as f64).to_radians()).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let t = Instant::now();
    let map = pool
        .install(|| reflectivity_map(&stack, &lambdas, &thetas, Polarization::P, &K))
        .unwrap();
    let counts: Vec<usize> = (0..thetas.len())
        .map(|j| {
            let s = Spectrum::new(lambdas.clone(), map.column(j)).unwrap();
            find_dips(&s, 0.02, WINDOW).unwrap().count()
        })
        .collect();
    let dt = t.elapsed();
    let bad: Vec<f64> = counts
        .iter()
        .zip(&thetas)
        .filter(|(c, _)| **c != 2)
        .map(|(_, t)| t.to_degrees())
        .collect();
    let pass = bad.is_empty() && map.errors.is_empty() && dt < Duration::from_secs(60);
    outcome(
        pass,
        format!("{} angles, angles without 2 dips {bad:?}, {:.2} s", thetas.len(), dt.as_secs_f64()),
    )
}

fn shift_direction() -> Outcome {
    let cfg = config();
    let lambdas = grid(450.0, 650.0, 0.5);
    let dip = |c: f64, theta: f64| {
        let rep = dips_at(&stack_at(&cfg, c), theta, &lambdas);
        rep.dips.first().map(|d| d.lambda_min * 1e9).unwrap_or(f64::NAN)
    };
    let (b0, b1) = (dip(0.0, 47.5), dip(0.005, 47.5));
    let (r0, r1) = (dip(0.0, 49.0), dip(0.005, 49.0));
    let pass = b1 < b0 && r1 > r0;
    outcome(
        pass,
        format!("47.5 deg: {b0:.2} -> {b1:.2} nm, 49 deg: {r0:.2} -> {r1:.2} nm"),
    )
}

/// Relative error of the better pairing between numeric roots and the two
/// closed-form branches, measured against each branch's `omega - omega_0`.
fn pair_error(roots: &[Complex64], cf: [Complex64; 2], w0: f64) -> f64 {
    if roots.len() != 2 {
        return f64::INFINITY;
    }
    let rel = |a: Complex64, b: Complex64| (a - b).norm() / (b - w0).norm();
    let straight = rel(roots[0], cf[0]).max(rel(roots[1], cf[1]));
    let crossed = rel(roots[0], cf[1]).max(rel(roots[1], cf[0]));
    straight.min(crossed)
}

fn oscillator_consistency() -> Outcome {
    let w0 = 3.5e15;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut errors = Vec::with_capacity(1000);
    let mut worst = (0.0, 0.0, 0.0, 0.0);
    for _ in 0..1000 {
        // uniform on (0, 1e-3 omega_0]
        let mut draw = || (1.0 - rng.gen::<f64>()) * 1e-3 * w0;
        let (g, gamma, kappa) = (draw(), draw(), draw());
        let atom = AtomModel { omega_0: w0, gamma_vac: gamma };
        let res = SurfaceResonance { omega_c: w0, kappa_c: kappa, chi: 0.0 };
        let cf = coupled_eigenfrequencies(&atom, &res, g, &K);
        let err = match solve_azz_roots(&atom, &res, prefactor_from_coupling(g, w0), None) {
            Ok(roots) => pair_error(&roots, [cf.omega_minus, cf.omega_plus], w0),
            Err(_) => f64::INFINITY,
        };
        if err > worst.0 {
            worst = (err, g / w0, gamma / w0, kappa / w0);
        }
        errors.push(err);
    }
    let failures = errors.iter().filter(|e| !(**e < 1e-3)).count();
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let p99 = sorted[989];

    // g = 0: closed form decouples exactly, numeric root is the bare oscillator
    let (gamma, kappa) = (3e-4 * w0, 7e-4 * w0);
    let atom = AtomModel { omega_0: w0, gamma_vac: gamma };
    let res = SurfaceResonance { omega_c: w0, kappa_c: kappa, chi: 0.0 };
    let cf = coupled_eigenfrequencies(&atom, &res, 0.0, &K);
    let want = [Complex64::new(w0, -kappa), Complex64::new(w0, -gamma)];
    let mut got = [cf.omega_minus, cf.omega_plus];
    got.sort_by(|a, b| a.im.total_cmp(&b.im));
    let cf_err = got
        .iter()
        .zip(&want)
        .map(|(a, b)| (a - b).norm() / (b - w0).norm())
        .fold(0.0, f64::max);
    let bare = Complex64::new((w0 * w0 - gamma * gamma).sqrt(), -gamma);
    let num_err = match solve_azz_roots(&atom, &res, 0.0, None) {
        Ok(r) if r.len() == 1 => (r[0] - bare).norm() / (bare - w0).norm(),
        _ => f64::INFINITY,
    };
    let decoupled = cf_err < 1e-10 && num_err < 1e-10;

    let pass = failures == 0 && decoupled;
    outcome(
        pass,
        format!(
            "{failures}/1000 samples at or above 1e-3 (median {:.1e}, p99 {p99:.1e}, max {:.2e} at g={:.2e} gamma={:.2e} kappa={:.2e} omega_0); g=0 closed form {cf_err:.1e}, numeric {num_err:.1e}",
            sorted[500], worst.0, worst.1, worst.2, worst.3
        ),
    )
}

fn constant(eps: Complex64) -> Material {
    Material::Dispersion(DispersionModel::Constant { eps })
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_energy: f64 = 0.0;
    let mut worst_r: f64 = 0.0;
    let mut worst_iso: f64 = 0.0;
    let mut worst_zero: f64 = 0.0;
    for _ in 0..500 {
        let n_inc = rng.gen_range(1.0..2.0);
        let lambda = rng.gen_range(300e-9..900e-9);
        let layers: Vec<Layer> = (0..rng.gen_range(0..4))
            .map(|_| Layer {
                medium: constant(Complex64::new(rng.gen_range(1.0..10.0), 0.0)).into(),
                thickness: rng.gen_range(0.0..300e-9),
            })
            .collect();
        // substrate denser than the incidence medium keeps it propagating
        let sub = rng.gen_range(n_inc * n_inc..12.0);
        let theta = rng.gen_range(0.0..1.5);
        let pol = if rng.gen() { Polarization::P } else { Polarization::S };
        let wave = PlaneWaveState::new(lambda, theta, pol);
        let lossless = Stack {
            incidence: constant(Complex64::new(n_inc * n_inc, 0.0)),
            layers: layers.clone(),
            substrate: constant(Complex64::new(sub, 0.0)).into(),
        };
        let r = hmmsense::tmm::stack_reflection(&lossless, &wave, &K).unwrap();
        worst_energy = worst_energy.max((r.reflectance + r.transmittance - 1.0).abs());

        let lossy = Stack {
            layers: layers
                .iter()
                .map(|l| Layer {
                    medium: constant(Complex64::new(rng.gen_range(-20.0..10.0), rng.gen_range(0.0..5.0))).into(),
                    thickness: l.thickness,
                })
                .collect(),
            substrate: constant(Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(0.0..3.0))).into(),
            ..lossless.clone()
        };
        let r = hmmsense::tmm::stack_reflection(&lossy, &wave, &K).unwrap();
        worst_r = worst_r.max(r.reflectance - 1.0);

        let eps = Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(0.0..3.0));
        let iso = Stack {
            layers: vec![Layer { medium: constant(eps).into(), thickness: 80e-9 }],
            ..lossless.clone()
        };
        let uni = Stack {
            layers: vec![Layer {
                medium: Medium::Uniaxial(UniaxialModel::Explicit { perp: constant(eps), par: constant(eps) }),
                thickness: 80e-9,
            }],
            ..lossless.clone()
        };
        let a = hmmsense::tmm::stack_reflection(&iso, &wave, &K).unwrap().r;
        let b = hmmsense::tmm::stack_reflection(&uni, &wave, &K).unwrap().r;
        worst_iso = worst_iso.max((a - b).norm());

        let thin = Stack {
            layers: vec![Layer { medium: constant(eps).into(), thickness: 1e-15 }],
            ..lossless.clone()
        };
        let bare = Stack { layers: vec![], ..lossless.clone() };
        let a = hmmsense::tmm::stack_reflection(&thin, &wave, &K).unwrap().r;
        let b = hmmsense::tmm::stack_reflection(&bare, &wave, &K).unwrap().r;
        worst_zero = worst_zero.max((a - b).norm());
    }

    let (n1, n2) = (1.5f64, 1.0f64);
    let brewster = Stack {
        incidence: constant(Complex64::new(n1 * n1, 0.0)),
        layers: vec![],
        substrate: constant(Complex64::new(n2 * n2, 0.0)).into(),
    };
    let wave = PlaneWaveState::new(600e-9, (n2 / n1).atan(), Polarization::P);
    let r_brewster = hmmsense::tmm::stack_reflection(&brewster, &wave, &K).unwrap().r.norm();

    let mut emt_exact = true;
    for _ in 0..1000 {
        let e = Complex64::new(rng.gen_range(-30.0..30.0), rng.gen_range(0.0..5.0));
        let f = rng.gen_range(0.0..=1.0);
        if let Ok(u) = mix(e, e, f) {
            emt_exact &= u.eps_perp == e && u.eps_par == e;
        } else {
            emt_exact = false;
        }
    }

    let pass = worst_energy < 1e-10
        && worst_r <= 1e-12
        && worst_iso < 1e-12
        && r_brewster < 1e-10
        && worst_zero < 1e-6
        && emt_exact;
    outcome(
        pass,
        format!(
            "|R+T-1| {worst_energy:.1e}, max R-1 {worst_r:.1e}, uniaxial-isotropic {worst_iso:.1e}, Brewster |r| {r_brewster:.1e}, zero thickness {worst_zero:.1e}, EMT degeneracy exact {emt_exact}"
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("band edges", band_edges),
        ("collective plasma frequency", plasma_frequency),
        ("strong-coupling spectrum", strong_coupling_spectrum),
        ("weak-coupling shift", weak_coupling_shift),
        ("splitting robustness", splitting_robustness),
        ("shift direction", shift_direction),
        ("oscillator-model consistency", oscillator_consistency),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        println!(
            "{} criterion {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
