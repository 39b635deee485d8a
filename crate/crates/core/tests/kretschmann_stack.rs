//! Checks on the shipped prism / hyperbolic film / dye configuration.

use std::path::Path;

use hmmsense::config::{parse_config, JobConfig};
use hmmsense::homogenization::find_band_edges;
use hmmsense::materials::{dye_plasma_frequency, Material};
use hmmsense::polariton::{fit_surface_resonance, rabi_estimate};
use hmmsense::spectra::{
    concentration_sweep, estimate_concentration, find_dips, DipReport, Observable, Spectrum,
};
use hmmsense::tmm::{Layer, Medium, Polarization, Stack};
use hmmsense::PhysicalConstants;

const K: PhysicalConstants = PhysicalConstants::CODATA2018;
const WINDOW: (f64, f64) = (450e-9, 650e-9);

fn config() -> JobConfig {
    parse_config(include_str!("../configs/kretschmann_r6g.json")).unwrap()
}

fn stack(c: f64) -> Stack {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    cfg.build_stack(&mats, Some(c))
}

fn grid(step_nm: f64) -> Vec<f64> {
    let n = (200.0 / step_nm).round() as usize;
    (0..=n).map(|i| (450.0 + i as f64 * step_nm) * 1e-9).collect()
}

fn dips(stack: &Stack, theta_deg: f64, step_nm: f64) -> DipReport {
    let s = Spectrum::simulate(stack, &grid(step_nm), theta_deg.to_radians(), Polarization::P, &K).unwrap();
    find_dips(&s, 0.02, WINDOW).unwrap()
}

#[test]
fn bare_stack_has_single_dip() {
    assert_eq!(dips(&stack(0.0), 48.0, 0.5).count(), 1);
}

#[test]
fn dips_stable_under_grid_refinement() {
    for c in [0.0, 0.005, 0.1] {
        let coarse = dips(&stack(c), 48.0, 0.5);
        let fine = dips(&stack(c), 48.0, 0.25);
        assert_eq!(coarse.count(), fine.count());
        for (a, b) in coarse.dips.iter().zip(&fine.dips) {
            let shift = (a.lambda_min - b.lambda_min).abs() * 1e9;
            assert!(shift < 0.5, "C={c}: {shift} nm");
        }
    }
}

#[test]
fn splitting_grows_with_concentration_and_exceeds_estimate() {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    let cs = [0.0, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.07, 0.1];
    let curve = concentration_sweep(
        |c| cfg.build_stack(&mats, Some(c)),
        &cs,
        48f64.to_radians(),
        &grid(0.5),
        Polarization::P,
        &cfg.dip_options(),
        &K,
    )
    .unwrap();
    let split: Vec<f64> = curve.rows.iter().filter_map(|r| r.splitting_mev).collect();
    assert!(split.len() >= 2, "{curve:?}");
    assert!(split.windows(2).all(|w| w[1] >= w[0]), "{split:?}");
    for r in &curve.rows {
        assert_eq!(r.splitting_mev.is_some(), r.dip_count == 2);
        assert_eq!(r.lambda_2.is_some(), r.dip_count >= 2);
    }
    let top = curve.rows.last().unwrap();
    assert_eq!(top.dip_count, 2);
    assert_eq!(curve.rows.iter().rev().take(2).filter(|r| r.dip_count == 2).count(), 2);
    let Material::Dye(dye) = &mats["r6g"] else { panic!("r6g is a dye") };
    let wp = dye_plasma_frequency(&dye.with_concentration(0.1), &K);
    let predicted = rabi_estimate(dye.omega_0, wp, &K).splitting_mev;
    let ratio = top.splitting_mev.unwrap() / predicted;
    assert!((1.0..=2.0).contains(&ratio), "ratio {ratio}");
    assert_eq!(curve.splitting_onset(), curve.rows.iter().find(|r| r.dip_count == 2).map(|r| r.concentration));
}

#[test]
fn concentration_round_trip() {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    let run = |cs: &[f64]| {
        concentration_sweep(
            |c| cfg.build_stack(&mats, Some(c)),
            cs,
            48f64.to_radians(),
            &grid(0.5),
            Polarization::P,
            &cfg.dip_options(),
            &K,
        )
        .unwrap()
    };
    let curve = run(&[0.002, 0.005, 0.01]);
    let probe = run(&[0.004]).rows[0].r_min_1.unwrap();
    let est = estimate_concentration(Observable::RMin(probe), &curve).unwrap();
    assert!((est.concentration / 0.004 - 1.0).abs() < 0.25, "{est:?}");
    assert_eq!(est.bracket, (0.002, 0.005));
}

#[test]
fn resonance_fit_matches_bare_dip() {
    let s = stack(0.0);
    let theta = 48f64.to_radians();
    let lambdas = grid(0.5);
    let dip = dips(&s, 48.0, 0.5).dips[0];
    let samples: Vec<_> = lambdas
        .iter()
        .filter(|l| (**l - dip.lambda_min).abs() <= 30e-9)
        .map(|&l| {
            let r = s.at_wavelength(l, &K).unwrap().reflect(theta, Polarization::P).unwrap().r;
            (K.wavelength_to_omega(l), r)
        })
        .collect();
    let fit = fit_surface_resonance(&samples, 0.05).unwrap();
    let w_dip = K.wavelength_to_omega(dip.lambda_min);
    let rel = (fit.resonance.omega_c - w_dip).abs() / w_dip;
    assert!(rel < 0.02, "omega_c off by {rel}");
    assert!(fit.resonance.kappa_c > 0.0 && fit.resonance.chi > 0.0);
}

#[test]
fn reflection_is_continuous_across_the_pole() {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    let edges = find_band_edges(&cfg.emt_spec(&mats).unwrap(), (350e-9, 650e-9), 1e-9, &K).unwrap();
    let s = stack(0.0);
    let r = |l: f64| s.at_wavelength(l, &K).unwrap().reflect(0.8, Polarization::P).unwrap().r;
    let l = edges.lambda_enp;
    for h in [1e-12, 1e-13, 1e-14] {
        let jump = (r(l + h) - r(l - h)).norm();
        assert!(jump < 1e-4, "jump {jump} at h={h}");
    }
    assert!(r(l).is_finite());
}

#[test]
fn emt_versus_explicit_multilayer() {
    let cfg = config();
    let mats = cfg.resolve_materials(Path::new(".")).unwrap();
    let emt = stack(0.1);
    let period = [
        Layer { medium: Medium::Isotropic(mats["silver"].clone()), thickness: 6e-9 },
        Layer { medium: Medium::Isotropic(mats["tio2"].clone()), thickness: 4e-9 },
    ];
    let explicit = Stack {
        layers: period.iter().cycle().take(10).cloned().collect(),
        ..emt.clone()
    };
    let a = dips(&emt, 48.0, 0.5);
    let b = dips(&explicit, 48.0, 0.5);
    let fmt = |r: &DipReport| r.dips.iter().map(|d| format!("{:.1}", d.lambda_min * 1e9)).collect::<Vec<_>>();
    println!("EMT dips {:?} nm, explicit 5 x (6 nm Ag + 4 nm TiO2) dips {:?} nm", fmt(&a), fmt(&b));
    assert_eq!((a.count(), b.count()), (2, 2));
    for (x, y) in a.dips.iter().zip(&b.dips) {
        let shift = (x.lambda_min - y.lambda_min).abs() * 1e9;
        println!("dip shift {shift:.1} nm");
        assert!(shift < 20.0, "{shift}");
    }
}
