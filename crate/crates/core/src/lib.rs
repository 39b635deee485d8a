//! Simulation of dye ensembles strongly coupled to a hyperbolic metamaterial
//! film in the prism-coupled (Kretschmann-Raether) geometry.
//!
//! Pipeline: [`materials`] evaluates permittivities, [`homogenization`] turns
//! the metal/dielectric multilayer into a uniaxial medium, [`tmm`] computes
//! reflectivities, [`spectra`] extracts dips, splittings and calibration
//! curves, and [`polariton`] holds the coupled-oscillator model. [`config`]
//! and [`job`] drive everything from a JSON job file.

pub mod config;
pub mod homogenization;
pub mod job;
pub mod materials;
pub mod output;
pub mod polariton;
pub mod spectra;
pub mod tmm;

pub use materials::PhysicalConstants;
