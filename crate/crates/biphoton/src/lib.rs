//! Simulation of a type-II quasi-phase-matched photon-pair source and its
//! polarization-entanglement measurements.
//!
//! The crate is organized along the experiment's data flow:
//!
//! * [`crystal`]: KTP dispersion, phase mismatch, quasi-phase-matching, and
//!   the degeneracy-temperature solve.
//! * [`spectral`]: joint spectral amplitude/intensity on a wavelength grid,
//!   marginal spectra, FWHM, Schmidt structure, and Hong-Ou-Mandel overlap.
//! * [`state`]: two-qubit polarization states (Sagnac-loop superposition,
//!   white-noise mixing), fringes, visibility, CHSH, fidelity, concurrence.
//! * [`counts`]: detector-count modeling with brightness calibration, an
//!   efficiency budget, accidentals, and seeded Poisson sampling.
//! * [`tomo`]: tomographic measurement sets, linear inversion, maximum-
//!   likelihood reconstruction, and Monte-Carlo fidelity uncertainties.
//!
//! All randomness is explicit: every sampling entry point takes a seed and
//! identical inputs produce bit-identical outputs.

pub mod counts;
pub mod crystal;
pub mod spectral;
pub mod state;
pub mod tomo;

pub use num_complex::Complex64;
