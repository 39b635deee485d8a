//! Job configuration: JSON schema, validation and resolution into stacks.
//!
//! Units in the file are nm, degrees and mol/l; frequencies and rates are
//! rad/s. Everything is converted to SI on resolution.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::homogenization::HomogenizationSpec;
use crate::materials::{DispersionModel, DyeModel, Material, PermittivityTable, TablePoint};
use crate::polariton::SurfaceResonance;
use crate::spectra::{DipOptions, Observable};
use crate::tmm::{Layer, Medium, Polarization, Stack, UniaxialModel};

pub const SCHEMA_VERSION: u32 = 1;

/// One schema problem, located by field path and, for syntax errors, by
/// line and column.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, "line {l} column {c}: {}", self.message),
            _ => write!(f, "{}: {}", self.path, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} configuration error(s)", self.violations.len())?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableSource {
    /// `wavelength_nm, eps_re, eps_im` file, relative to the config file.
    Csv(PathBuf),
    /// `[wavelength_nm, eps_re, eps_im]` rows.
    Points(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterialEntry {
    Constant {
        eps_re: f64,
        #[serde(default)]
        eps_im: f64,
    },
    Drude {
        eps_inf: f64,
        omega_p: f64,
        gamma: f64,
    },
    Lorentz {
        eps_b: f64,
        omega_p: f64,
        omega_0: f64,
        gamma: f64,
    },
    Tabulated(TableSource),
    Dye {
        omega_0: f64,
        gamma: f64,
        h: f64,
        concentration_molar: f64,
        #[serde(default = "one")]
        host_eps: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MaterialEntry {
    /// Converts to a [`Material`]; CSV tables are read relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Material, String> {
        let m: Material = match self {
            MaterialEntry::Constant { eps_re, eps_im } => DispersionModel::Constant {
                eps: Complex64::new(*eps_re, *eps_im),
            }
            .into(),
            MaterialEntry::Drude { eps_inf, omega_p, gamma } => DispersionModel::Drude {
                eps_inf: *eps_inf,
                omega_p: *omega_p,
                gamma: *gamma,
            }
            .into(),
            MaterialEntry::Lorentz { eps_b, omega_p, omega_0, gamma } => DispersionModel::Lorentz {
                eps_b: *eps_b,
                omega_p: *omega_p,
                omega_0: *omega_0,
                gamma: *gamma,
            }
            .into(),
            MaterialEntry::Tabulated(src) => {
                let table = match src {
                    TableSource::Csv(p) => PermittivityTable::from_csv_path(&base_dir.join(p)),
                    TableSource::Points(rows) => PermittivityTable::new(
                        rows.iter()
                            .map(|r| TablePoint {
                                lambda: r[0] * 1e-9,
                                eps: Complex64::new(r[1], r[2]),
                            })
                            .collect(),
                    ),
                }
                .map_err(|e| e.to_string())?;
                DispersionModel::Tabulated { table }.into()
            }
            MaterialEntry::Dye { omega_0, gamma, h, concentration_molar, host_eps } => DyeModel {
                omega_0: *omega_0,
                gamma: *gamma,
                h: *h,
                concentration: *concentration_molar,
                host_eps: *host_eps,
            }
            .into(),
        };
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }

    fn is_dye(&self) -> bool {
        matches!(self, MaterialEntry::Dye { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediumConfig {
    Material(String),
    Emt {
        metal: String,
        dielectric: String,
        fill_fraction: f64,
    },
    Uniaxial {
        perp: String,
        par: String,
    },
}

impl MediumConfig {
    fn references(&self) -> Vec<(&'static str, &str)> {
        match self {
            MediumConfig::Material(m) => vec![("material", m)],
            MediumConfig::Emt { metal, dielectric, .. } => {
                vec![("emt.metal", metal), ("emt.dielectric", dielectric)]
            }
            MediumConfig::Uniaxial { perp, par } => vec![("uniaxial.perp", perp), ("uniaxial.par", par)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub medium: MediumConfig,
    pub thickness_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub incidence: String,
    #[serde(default)]
    pub layers: Vec<LayerConfig>,
    pub substrate: MediumConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

const MAX_GRID_POINTS: f64 = 1e7;

impl RangeConfig {
    /// `start, start + step, ...` up to `stop` inclusive (with a 1e-9 step slack).
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n).map(|i| self.start + i as f64 * self.step).collect()
    }

    fn check(&self, path: &str, out: &mut Vec<Violation>) {
        let ok = self.start.is_finite() && self.stop.is_finite() && self.step.is_finite();
        if !ok || !(self.step > 0.0) || self.stop < self.start {
            out.push(violation(path, "needs finite start <= stop and step > 0"));
        } else if (self.stop - self.start) / self.step > MAX_GRID_POINTS {
            out.push(violation(path, "grid has more than 1e7 points"));
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub lambda_nm: RangeConfig,
    pub theta_deg: RangeConfig,
    /// Angle for single-angle jobs.
    pub theta_fixed_deg: f64,
    pub polarization: Polarization,
    pub concentrations_molar: Vec<f64>,
    /// Dye material whose concentration is swept; defaults to the only dye
    /// used in the stack.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dye: Option<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_nm: RangeConfig { start: 450.0, stop: 650.0, step: 0.5 },
            theta_deg: RangeConfig { start: 40.0, stop: 60.0, step: 0.25 },
            theta_fixed_deg: 48.0,
            polarization: Polarization::P,
            concentrations_molar: Vec::new(),
            dye: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub prominence: f64,
    pub window_nm: [f64; 2],
    pub band_window_nm: [f64; 2],
    pub band_resolution_nm: f64,
    /// Half width of the wavelength span around the bare dip used by
    /// `fit-resonance`.
    pub fit_halfwidth_nm: f64,
    pub fit_tolerance: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            prominence: crate::spectra::DEFAULT_PROMINENCE,
            window_nm: [450.0, 650.0],
            band_window_nm: [350.0, 650.0],
            band_resolution_nm: 1.0,
            fit_halfwidth_nm: 30.0,
            fit_tolerance: crate::polariton::DEFAULT_FIT_TOLERANCE,
        }
    }
}

/// Parameters of the `modes` job. Missing values are derived: `omega_0` from
/// the sensing dye, `gamma_vac` from the vacuum rate at `omega_0`, the
/// resonance from a fit to the bare stack and `g` from the oscillator
/// strength.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ModesConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_vac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonance: Option<SurfaceResonance>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObservableName {
    #[serde(rename = "r_min")]
    RMin,
    #[serde(rename = "lambda_1_nm")]
    Lambda1Nm,
    #[serde(rename = "splitting_meV")]
    SplittingMev,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    pub observable: ObservableName,
    pub value: f64,
    /// Calibration concentrations; defaults to the sweep list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concentrations_molar: Option<Vec<f64>>,
}

impl EstimateConfig {
    pub fn observable(&self) -> Observable {
        match self.observable {
            ObservableName::RMin => Observable::RMin(self.value),
            ObservableName::Lambda1Nm => Observable::Lambda1(self.value * 1e-9),
            ObservableName::SplittingMev => Observable::SplittingMev(self.value),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobConfig {
    pub schema_version: u32,
    pub materials: BTreeMap<String, MaterialEntry>,
    pub stack: StackConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<ModesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn violation(path: &str, message: impl Into<String>) -> Violation {
    Violation {
        path: path.to_string(),
        message: message.into(),
        line: None,
        column: None,
    }
}

/// Parses and validates a configuration. On failure every unknown field and
/// every semantic problem is reported; a syntax or type error stops parsing
/// and is reported with its line and column.
pub fn parse_config(text: &str) -> Result<JobConfig, ConfigError> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: Result<JobConfig, _> =
        serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()));
    let parsed = parsed.and_then(|c| de.end().map(|_| c));
    let mut violations: Vec<Violation> = unknown
        .iter()
        .map(|p| violation(p, "unknown field"))
        .collect();
    match parsed {
        Err(e) => {
            violations.push(Violation {
                path: String::new(),
                message: e.to_string(),
                line: Some(e.line()),
                column: Some(e.column()),
            });
            Err(ConfigError { violations })
        }
        Ok(cfg) => {
            violations.extend(cfg.violations());
            if violations.is_empty() {
                Ok(cfg)
            } else {
                Err(ConfigError { violations })
            }
        }
    }
}

pub fn load_config(path: &Path) -> Result<JobConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
        violations: vec![violation(&path.display().to_string(), e.to_string())],
    })?;
    parse_config(&text)
}

impl JobConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// All semantic problems, in document order.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            v.push(violation(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        for (name, entry) in &self.materials {
            // CSV tables are checked when loaded
            if matches!(entry, MaterialEntry::Tabulated(TableSource::Csv(_))) {
                continue;
            }
            if let Err(e) = entry.resolve(Path::new(".")) {
                v.push(violation(&format!("materials.{name}"), e));
            }
        }

        let check_ref = |path: String, name: &str, v: &mut Vec<Violation>| {
            if !self.materials.contains_key(name) {
                v.push(violation(&path, format!("undefined material '{name}'")));
            }
        };
        check_ref("stack.incidence".into(), &self.stack.incidence, &mut v);
        for (i, layer) in self.stack.layers.iter().enumerate() {
            for (field, name) in layer.medium.references() {
                check_ref(format!("stack.layers[{i}].medium.{field}"), name, &mut v);
            }
            if let MediumConfig::Emt { fill_fraction, .. } = layer.medium {
                if !(0.0..=1.0).contains(&fill_fraction) {
                    v.push(violation(
                        &format!("stack.layers[{i}].medium.emt.fill_fraction"),
                        format!("must lie in [0, 1], got {fill_fraction}"),
                    ));
                }
            }
            if !(layer.thickness_nm >= 0.0 && layer.thickness_nm.is_finite()) {
                v.push(violation(
                    &format!("stack.layers[{i}].thickness_nm"),
                    format!("must be finite and >= 0, got {}", layer.thickness_nm),
                ));
            }
        }
        for (field, name) in self.stack.substrate.references() {
            check_ref(format!("stack.substrate.{field}"), name, &mut v);
        }

        let s = &self.sweep;
        s.lambda_nm.check("sweep.lambda_nm", &mut v);
        if s.lambda_nm.start <= 0.0 {
            v.push(violation("sweep.lambda_nm", "wavelengths must be positive"));
        }
        s.theta_deg.check("sweep.theta_deg", &mut v);
        let angle_ok = |t: f64| (0.0..90.0).contains(&t);
        if !angle_ok(s.theta_deg.start) || !angle_ok(s.theta_deg.stop) {
            v.push(violation("sweep.theta_deg", "angles must lie in [0, 90)"));
        }
        if !angle_ok(s.theta_fixed_deg) {
            v.push(violation("sweep.theta_fixed_deg", "angle must lie in [0, 90)"));
        }
        check_concentrations("sweep.concentrations_molar", &s.concentrations_molar, &mut v);
        if let Some(dye) = &s.dye {
            match self.materials.get(dye) {
                None => v.push(violation("sweep.dye", format!("undefined material '{dye}'"))),
                Some(e) if !e.is_dye() => {
                    v.push(violation("sweep.dye", format!("material '{dye}' is not a dye")))
                }
                _ => {}
            }
        }

        let a = &self.analysis;
        if !(a.prominence >= 0.0 && a.prominence.is_finite()) {
            v.push(violation("analysis.prominence", "must be finite and >= 0"));
        }
        for (path, w) in [("analysis.window_nm", a.window_nm), ("analysis.band_window_nm", a.band_window_nm)] {
            if !(w[0] > 0.0 && w[1] > w[0] && w[1].is_finite()) {
                v.push(violation(path, "needs 0 < lo < hi"));
            }
        }
        for (path, x) in [
            ("analysis.band_resolution_nm", a.band_resolution_nm),
            ("analysis.fit_halfwidth_nm", a.fit_halfwidth_nm),
            ("analysis.fit_tolerance", a.fit_tolerance),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                v.push(violation(path, format!("must be finite and > 0, got {x}")));
            }
        }

        if let Some(m) = &self.modes {
            for (path, x) in [("modes.omega_0", m.omega_0), ("modes.g", m.g), ("modes.gamma_vac", m.gamma_vac)] {
                if let Some(x) = x {
                    if !(x >= 0.0 && x.is_finite()) {
                        v.push(violation(path, format!("must be finite and >= 0, got {x}")));
                    }
                }
            }
            if let Some(r) = &m.resonance {
                if !(r.omega_c > 0.0 && r.kappa_c > 0.0 && r.chi >= 0.0) {
                    v.push(violation(
                        "modes.resonance",
                        "needs omega_c > 0, kappa_c > 0 and chi >= 0",
                    ));
                }
            }
        }
        if let Some(e) = &self.estimate {
            if !e.value.is_finite() {
                v.push(violation("estimate.value", "must be finite"));
            }
            if let Some(c) = &e.concentrations_molar {
                check_concentrations("estimate.concentrations_molar", c, &mut v);
            }
        }
        v
    }

    /// Loads every material; CSV paths are relative to `base_dir`.
    pub fn resolve_materials(&self, base_dir: &Path) -> Result<BTreeMap<String, Material>, ConfigError> {
        let mut out = BTreeMap::new();
        let mut violations = Vec::new();
        for (name, entry) in &self.materials {
            match entry.resolve(base_dir) {
                Ok(m) => {
                    out.insert(name.clone(), m);
                }
                Err(e) => violations.push(violation(&format!("materials.{name}"), e)),
            }
        }
        if violations.is_empty() {
            Ok(out)
        } else {
            Err(ConfigError { violations })
        }
    }

    /// Name of the dye whose concentration the sensing jobs vary.
    pub fn sensing_dye(&self) -> Option<&str> {
        if let Some(d) = &self.sweep.dye {
            return Some(d);
        }
        let mut used: Vec<&str> = self
            .stack
            .layers
            .iter()
            .flat_map(|l| l.medium.references())
            .chain(self.stack.substrate.references())
            .map(|(_, n)| n)
            .filter(|n| self.materials.get(*n).is_some_and(MaterialEntry::is_dye))
            .collect();
        used.sort_unstable();
        used.dedup();
        match used.as_slice() {
            [one] => Some(one),
            _ => None,
        }
    }

    /// Builds the stack. With `concentration` set, the sensing dye is
    /// replaced by a copy at that concentration.
    pub fn build_stack(&self, materials: &BTreeMap<String, Material>, concentration: Option<f64>) -> Stack {
        let dye = concentration.and_then(|c| self.sensing_dye().map(|d| (d, c)));
        let get = |name: &str| -> Material {
            let m = materials[name].clone();
            match (dye, m) {
                (Some((d, c)), Material::Dye(model)) if d == name => {
                    Material::Dye(model.with_concentration(c))
                }
                (_, m) => m,
            }
        };
        let medium = |m: &MediumConfig| match m {
            MediumConfig::Material(n) => Medium::Isotropic(get(n)),
            MediumConfig::Emt { metal, dielectric, fill_fraction } => {
                Medium::Uniaxial(UniaxialModel::Emt(HomogenizationSpec {
                    metal: get(metal),
                    dielectric: get(dielectric),
                    fill_fraction: *fill_fraction,
                }))
            }
            MediumConfig::Uniaxial { perp, par } => Medium::Uniaxial(UniaxialModel::Explicit {
                perp: get(perp),
                par: get(par),
            }),
        };
        Stack {
            incidence: get(&self.stack.incidence),
            layers: self
                .stack
                .layers
                .iter()
                .map(|l| Layer {
                    medium: medium(&l.medium),
                    thickness: l.thickness_nm * 1e-9,
                })
                .collect(),
            substrate: medium(&self.stack.substrate),
        }
    }

    /// First EMT layer of the stack.
    pub fn emt_spec(&self, materials: &BTreeMap<String, Material>) -> Option<HomogenizationSpec> {
        self.stack.layers.iter().find_map(|l| match &l.medium {
            MediumConfig::Emt { metal, dielectric, fill_fraction } => Some(HomogenizationSpec {
                metal: materials[metal].clone(),
                dielectric: materials[dielectric].clone(),
                fill_fraction: *fill_fraction,
            }),
            _ => None,
        })
    }

    /// [m]
    pub fn lambda_grid(&self) -> Vec<f64> {
        self.sweep.lambda_nm.points().into_iter().map(|l| l * 1e-9).collect()
    }

    /// [rad]
    pub fn theta_grid(&self) -> Vec<f64> {
        self.sweep.theta_deg.points().into_iter().map(f64::to_radians).collect()
    }

    pub fn theta_fixed(&self) -> f64 {
        self.sweep.theta_fixed_deg.to_radians()
    }

    pub fn dip_options(&self) -> DipOptions {
        DipOptions {
            prominence: self.analysis.prominence,
            window: (self.analysis.window_nm[0] * 1e-9, self.analysis.window_nm[1] * 1e-9),
        }
    }
}

fn check_concentrations(path: &str, c: &[f64], v: &mut Vec<Violation>) {
    if c.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        v.push(violation(path, "concentrations must be finite and >= 0"));
    } else if c.windows(2).any(|w| w[1] < w[0]) {
        v.push(violation(path, "concentrations must be sorted ascending"));
    }
}
