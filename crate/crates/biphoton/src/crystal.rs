//! Dispersion and quasi-phase-matching for periodically poled KTP under
//! collinear type-II phase matching (pump y -> signal y + idler z).
//!
//! Wavelengths are in micrometers here; the spectral module converts from
//! its nanometer grids. Phase mismatch is reported in rad/um.

use num_complex::Complex64;
use thiserror::Error;

/// Crystallographic axis seen by a polarization component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Y,
    Z,
}

/// Validity window of the adopted Sellmeier fits (um).
pub const WAVELENGTH_RANGE_UM: (f64, f64) = (0.35, 4.0);

/// Oven range (deg C). Temperatures outside are rejected.
pub const TEMPERATURE_RANGE_C: (f64, f64) = (0.0, 200.0);

/// Linear thermal-expansion coefficient applied to the poling period (1/K),
/// referenced to 25 deg C.
pub const POLING_EXPANSION_PER_K: f64 = 6.7e-6;

#[derive(Debug, Error)]
pub enum CrystalError {
    #[error("unknown dispersion model `{name}`; known: {known}")]
    UnknownDispersionModel { name: String, known: &'static str },
    #[error("wavelength {wavelength_um} um outside Sellmeier validity [{min}, {max}] um")]
    WavelengthOutOfRange { wavelength_um: f64, min: f64, max: f64 },
    #[error("temperature {temperature_c} C outside oven range [{min}, {max}] C")]
    TemperatureOutOfRange { temperature_c: f64, min: f64, max: f64 },
    #[error("invalid crystal: {reason}")]
    InvalidCrystal { reason: String },
    #[error("phase mismatch has no zero for temperatures in [{min} C, {max} C]")]
    NoDegeneracyRoot { min: f64, max: f64 },
}

/// Poled-crystal geometry and operating point.
///
/// The axis pairing is fixed to type-II y -> y+z: the pump and signal see
/// n_y, the idler sees n_z.
#[derive(Debug, Clone, PartialEq)]
pub struct CrystalSpec {
    pub length_mm: f64,
    pub poling_period_um: f64,
    pub temperature_c: f64,
    /// Registered dispersion-model identifier, e.g. "fan-fradkin".
    pub dispersion_model: String,
}

impl CrystalSpec {
    pub fn validate(&self) -> Result<(), CrystalError> {
        if !(self.length_mm > 0.0) {
            return Err(CrystalError::InvalidCrystal {
                reason: format!("length_mm must be > 0, got {}", self.length_mm),
            });
        }
        if !(self.poling_period_um > 0.0) {
            return Err(CrystalError::InvalidCrystal {
                reason: format!("poling_period_um must be > 0, got {}", self.poling_period_um),
            });
        }
        check_temperature(self.temperature_c)?;
        DispersionModel::by_name(&self.dispersion_model)?;
        Ok(())
    }

    pub fn dispersion(&self) -> Result<DispersionModel, CrystalError> {
        DispersionModel::by_name(&self.dispersion_model)
    }

    /// Poling period after linear thermal expansion from the 25 C reference.
    pub fn effective_poling_period_um(&self) -> f64 {
        self.poling_period_um * (1.0 + POLING_EXPANSION_PER_K * (self.temperature_c - 25.0))
    }

    pub fn with_temperature(&self, temperature_c: f64) -> CrystalSpec {
        CrystalSpec { temperature_c, ..self.clone() }
    }
}

/// A named pair of Sellmeier fits with temperature corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DispersionModel {
    /// n_y from Fan et al. (1987), n_z from Fradkin et al. (1999), both with
    /// the Emanueli-Arie (2003) quadratic temperature corrections.
    FanFradkin,
    /// n_y and n_z from Kato-Takaoka (2002) with their linear dn/dT fits.
    KatoTakaoka,
}

const KNOWN_MODELS: &str = "fan-fradkin, kato-takaoka";

impl DispersionModel {
    pub fn by_name(name: &str) -> Result<Self, CrystalError> {
        match name {
            "fan-fradkin" => Ok(DispersionModel::FanFradkin),
            "kato-takaoka" => Ok(DispersionModel::KatoTakaoka),
            _ => Err(CrystalError::UnknownDispersionModel {
                name: name.to_string(),
                known: KNOWN_MODELS,
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DispersionModel::FanFradkin => "fan-fradkin",
            DispersionModel::KatoTakaoka => "kato-takaoka",
        }
    }

    /// Refractive index on `axis` at `wavelength_um` and `temperature_c`.
    pub fn index(
        &self,
        axis: Axis,
        wavelength_um: f64,
        temperature_c: f64,
    ) -> Result<f64, CrystalError> {
        check_wavelength(wavelength_um)?;
        check_temperature(temperature_c)?;
        let dt = temperature_c - 25.0;
        let n = match (self, axis) {
            (DispersionModel::FanFradkin, Axis::Y) => {
                ny_fan(wavelength_um) + emanueli_arie(wavelength_um, dt, EA_Y_N1, EA_Y_N2)
            }
            (DispersionModel::FanFradkin, Axis::Z) => {
                nz_fradkin(wavelength_um) + emanueli_arie(wavelength_um, dt, EA_Z_N1, EA_Z_N2)
            }
            (DispersionModel::KatoTakaoka, Axis::Y) => {
                ny_kato(wavelength_um) + dny_dt_kato(wavelength_um) * dt
            }
            (DispersionModel::KatoTakaoka, Axis::Z) => {
                nz_kato(wavelength_um) + dnz_dt_kato(wavelength_um) * dt
            }
        };
        Ok(n)
    }
}

fn check_wavelength(wavelength_um: f64) -> Result<(), CrystalError> {
    let (min, max) = WAVELENGTH_RANGE_UM;
    if !(wavelength_um >= min && wavelength_um <= max) {
        return Err(CrystalError::WavelengthOutOfRange { wavelength_um, min, max });
    }
    Ok(())
}

fn check_temperature(temperature_c: f64) -> Result<(), CrystalError> {
    let (min, max) = TEMPERATURE_RANGE_C;
    if !(temperature_c >= min && temperature_c <= max) {
        return Err(CrystalError::TemperatureOutOfRange { temperature_c, min, max });
    }
    Ok(())
}

// n_y^2 = 2.19229 + 0.83547 / (1 - 0.04970/L^2) - 0.01621 L^2, L in um.
// Fan et al., Appl. Opt. 26, 2390 (1987).
fn ny_fan(l: f64) -> f64 {
    let l2 = l * l;
    (2.19229 + 0.83547 / (1.0 - 0.04970 / l2) - 0.01621 * l2).sqrt()
}

// n_z^2 = 2.12725 + 1.18431/(1 - 0.0514852/L^2) + 0.6603/(1 - 100.00507/L^2)
//         - 0.00968956 L^2.
// Fradkin et al., Appl. Phys. Lett. 74, 914 (1999); valid into the infrared.
fn nz_fradkin(l: f64) -> f64 {
    let l2 = l * l;
    (2.12725 + 1.18431 / (1.0 - 0.0514852 / l2) + 0.6603 / (1.0 - 100.00507 / l2)
        - 0.00968956 * l2)
        .sqrt()
}

// Kato & Takaoka, Appl. Opt. 41, 5040 (2002).
fn ny_kato(l: f64) -> f64 {
    let l2 = l * l;
    (3.45018 + 0.04341 / (l2 - 0.04597) + 16.98825 / (l2 - 39.43799)).sqrt()
}

fn nz_kato(l: f64) -> f64 {
    let l2 = l * l;
    (4.59423 + 0.06206 / (l2 - 0.04763) + 110.80672 / (l2 - 86.12171)).sqrt()
}

fn dny_dt_kato(l: f64) -> f64 {
    (0.1997 / (l * l * l) - 0.4063 / (l * l) + 0.5154 / l + 0.5425) * 1e-5
}

fn dnz_dt_kato(l: f64) -> f64 {
    (0.9221 / (l * l * l) - 2.9220 / (l * l) + 3.6677 / l - 0.1897) * 1e-5
}

// Emanueli & Arie, Appl. Opt. 42, 6661 (2003):
// dn(L, dT) = n1(L) dT + n2(L) dT^2 with dT = T - 25 C and
// n1, n2 cubic in 1/L scaled by 1e-6 and 1e-8 respectively.
const EA_Y_N1: [f64; 4] = [6.2897, 6.3061, -6.0629, 2.6486];
const EA_Y_N2: [f64; 4] = [-0.14445, 2.2244, -3.5770, 1.3470];
const EA_Z_N1: [f64; 4] = [9.9587, 9.9228, -8.9603, 4.1010];
const EA_Z_N2: [f64; 4] = [-1.1882, 10.459, -9.8136, 3.1481];

fn emanueli_arie(l: f64, dt: f64, a: [f64; 4], b: [f64; 4]) -> f64 {
    let n1 = (a[0] + a[1] / l + a[2] / (l * l) + a[3] / (l * l * l)) * 1e-6;
    let n2 = (b[0] + b[1] / l + b[2] / (l * l) + b[3] / (l * l * l)) * 1e-8;
    n1 * dt + n2 * dt * dt
}

/// Collinear quasi-phase-matched mismatch (rad/um):
///
/// dk = 2 pi ( n_y(Lp)/Lp - n_y(Ls)/Ls - n_z(Li)/Li - 1/Lambda_eff )
///
/// Energy conservation is not assumed; the triple may be arbitrary.
pub fn phase_mismatch(
    lambda_p_um: f64,
    lambda_s_um: f64,
    lambda_i_um: f64,
    crystal: &CrystalSpec,
) -> Result<f64, CrystalError> {
    let model = crystal.dispersion()?;
    let t = crystal.temperature_c;
    let np = model.index(Axis::Y, lambda_p_um, t)?;
    let ns = model.index(Axis::Y, lambda_s_um, t)?;
    let ni = model.index(Axis::Z, lambda_i_um, t)?;
    let grating = 1.0 / crystal.effective_poling_period_um();
    Ok(std::f64::consts::TAU * (np / lambda_p_um - ns / lambda_s_um - ni / lambda_i_um - grating))
}

/// Phase-matching amplitude sinc(dk L / 2) * exp(i dk L / 2) with
/// sinc(x) = sin(x)/x, sinc(0) = 1. Magnitude <= 1, equality at dk = 0.
pub fn phase_matching_function(delta_k_rad_per_um: f64, length_mm: f64) -> Complex64 {
    let x = delta_k_rad_per_um * (length_mm * 1000.0) / 2.0;
    Complex64::from_polar(sinc(x), x)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-6 {
        // series keeps the removable singularity smooth
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Bisection bracket tolerance for the degeneracy-temperature solve (deg C).
/// Tight enough that the returned root satisfies |dk| < 1e-9 rad/um.
const T_SOLVE_TOLERANCE_C: f64 = 1e-8;

/// Temperature at which the degenerate pair (2 Lp, 2 Lp) is phase matched:
/// the zero of dk(T) over the oven range, by bracket scan plus bisection.
pub fn degenerate_temperature(
    crystal: &CrystalSpec,
    lambda_p_um: f64,
) -> Result<f64, CrystalError> {
    crystal.validate()?;
    let ls = 2.0 * lambda_p_um;
    let f = |t: f64| -> Result<f64, CrystalError> {
        phase_mismatch(lambda_p_um, ls, ls, &crystal.with_temperature(t))
    };
    let (t_min, t_max) = TEMPERATURE_RANGE_C;

    // scan for a sign change in 5 C steps, then bisect
    let steps = 40;
    let dt = (t_max - t_min) / steps as f64;
    let mut lo = t_min;
    let mut f_lo = f(lo)?;
    let mut bracket = None;
    for k in 1..=steps {
        let hi = t_min + dt * k as f64;
        let f_hi = f(hi)?;
        if f_lo == 0.0 {
            return Ok(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            bracket = Some((lo, hi, f_lo));
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    let (mut lo, mut hi, mut f_lo) =
        bracket.ok_or(CrystalError::NoDegeneracyRoot { min: t_min, max: t_max })?;

    let mut iterations = 0;
    while hi - lo > T_SOLVE_TOLERANCE_C && iterations < 80 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid)?;
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    Ok(0.5 * (lo + hi))
}
