//! Joint spectral structure of the photon pairs: the amplitude f(Ls, Li) as
//! pump envelope times phase-matching function, its marginals and widths,
//! Schmidt structure, and the Hong-Ou-Mandel exchange overlap.
//!
//! Grids are in nanometers. The pump envelope is evaluated in angular
//! frequency (rad/fs) with the exact conversion w = 2 pi c / lambda, so
//! energy conservation carries no small-bandwidth approximation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::crystal::{phase_matching_function, phase_mismatch, CrystalError, CrystalSpec};

/// Speed of light in nm/fs.
pub const C_NM_PER_FS: f64 = 299.792458;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Crystal(#[from] CrystalError),
    #[error("invalid grid: {reason}")]
    InvalidGrid { reason: String },
    #[error("invalid pump: {reason}")]
    InvalidPump { reason: String },
    #[error("spectrum is edge-clipped: half maximum not bracketed on the {side} side")]
    EdgeClipped { side: &'static str },
    #[error("spectrum has no interior maximum")]
    NoInteriorPeak,
    #[error("signal and idler axes differ; exchange overlap needs a shared window")]
    MismatchedAxes,
}

/// Pump spectral model. The only supported envelope shape is Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    pub center_wavelength_nm: f64,
    pub fwhm_nm: f64,
}

impl PumpSpec {
    pub fn validate(&self) -> Result<(), SpectralError> {
        if !(self.center_wavelength_nm > 0.0) {
            return Err(SpectralError::InvalidPump {
                reason: format!("center_wavelength_nm must be > 0, got {}", self.center_wavelength_nm),
            });
        }
        if !(self.fwhm_nm > 0.0) {
            return Err(SpectralError::InvalidPump {
                reason: format!("fwhm_nm must be > 0, got {}", self.fwhm_nm),
            });
        }
        Ok(())
    }

    /// Center angular frequency (rad/fs).
    pub fn center_angular_frequency(&self) -> f64 {
        std::f64::consts::TAU * C_NM_PER_FS / self.center_wavelength_nm
    }

    /// Amplitude width parameter sigma_w (rad/fs).
    ///
    /// Convention: the quoted bandwidth maps to the Gaussian amplitude
    /// exp(-d^2 / (2 sigma_w^2)) via sigma_w = fwhm_w / sqrt(2 ln 2), i.e.
    /// the amplitude falls to 1/2 at a detuning of exactly fwhm_w. The
    /// resulting joint-spectrum marginals calibrate against the measured
    /// signal/idler bandwidths of broadband-diode-pumped sources.
    pub fn sigma_angular_frequency(&self) -> f64 {
        let fwhm_w =
            std::f64::consts::TAU * C_NM_PER_FS * self.fwhm_nm / self.center_wavelength_nm.powi(2);
        fwhm_w / (2.0 * std::f64::consts::LN_2).sqrt()
    }
}

/// Square sampling window for the two-photon spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    pub signal_range_nm: (f64, f64),
    pub idler_range_nm: (f64, f64),
    pub points_per_axis: usize,
}

impl SpectralGrid {
    pub fn validate(&self) -> Result<(), SpectralError> {
        for (name, (lo, hi)) in
            [("signal", self.signal_range_nm), ("idler", self.idler_range_nm)]
        {
            if !(lo < hi) {
                return Err(SpectralError::InvalidGrid {
                    reason: format!("{name} range [{lo}, {hi}] must have min < max"),
                });
            }
        }
        if self.points_per_axis < 16 {
            return Err(SpectralError::InvalidGrid {
                reason: format!("points_per_axis must be >= 16, got {}", self.points_per_axis),
            });
        }
        Ok(())
    }

    pub fn signal_wavelengths(&self) -> Vec<f64> {
        linspace(self.signal_range_nm, self.points_per_axis)
    }

    pub fn idler_wavelengths(&self) -> Vec<f64> {
        linspace(self.idler_range_nm, self.points_per_axis)
    }
}

fn linspace((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + step * k as f64).collect()
}

/// Joint spectral amplitude sampled on a grid, normalized to unit peak
/// magnitude. Row index runs over signal wavelength, column over idler.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    pub grid: SpectralGrid,
    amplitude: DMatrix<Complex64>,
}

impl JointSpectrum {
    pub fn amplitude(&self) -> &DMatrix<Complex64> {
        &self.amplitude
    }

    /// |f|^2 at one grid cell.
    pub fn intensity(&self, signal_idx: usize, idler_idx: usize) -> f64 {
        self.amplitude[(signal_idx, idler_idx)].norm_sqr()
    }

    pub fn intensity_matrix(&self) -> DMatrix<f64> {
        self.amplitude.map(|a| a.norm_sqr())
    }
}

/// Which marginal of the joint spectrum to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arm {
    Signal,
    Idler,
}

/// Pump amplitude at the pair (Ls, Li): a Gaussian in the summed angular
/// frequency ws + wi centered on the pump carrier. Real and nonnegative;
/// depends on the pair only through ws + wi.
pub fn pump_envelope(lambda_s_nm: f64, lambda_i_nm: f64, pump: &PumpSpec) -> f64 {
    let w_sum = std::f64::consts::TAU * C_NM_PER_FS * (1.0 / lambda_s_nm + 1.0 / lambda_i_nm);
    let d = w_sum - pump.center_angular_frequency();
    let sigma = pump.sigma_angular_frequency();
    (-d * d / (2.0 * sigma * sigma)).exp()
}

/// Sample f(Ls, Li) = PEF(ws + wi) * PMF(dk, L) over the grid and normalize
/// to unit peak magnitude. The pump wavelength entering the mismatch is
/// fixed by energy conservation, 1/Lp = 1/Ls + 1/Li.
pub fn compute_jsa(
    pump: &PumpSpec,
    crystal: &CrystalSpec,
    grid: &SpectralGrid,
) -> Result<JointSpectrum, SpectralError> {
    pump.validate()?;
    grid.validate()?;
    crystal.validate()?;
    let ls = grid.signal_wavelengths();
    let li = grid.idler_wavelengths();
    let n = grid.points_per_axis;
    let mut amp = DMatrix::<Complex64>::zeros(n, n);
    let mut peak = 0.0_f64;
    for (is, &s_nm) in ls.iter().enumerate() {
        for (ii, &i_nm) in li.iter().enumerate() {
            let pef = pump_envelope(s_nm, i_nm, pump);
            let lp_um = 1.0 / (1.0 / s_nm + 1.0 / i_nm) / 1000.0;
            let dk = phase_mismatch(lp_um, s_nm / 1000.0, i_nm / 1000.0, crystal)?;
            let f = phase_matching_function(dk, crystal.length_mm).scale(pef);
            peak = peak.max(f.norm());
            amp[(is, ii)] = f;
        }
    }
    if peak > 0.0 {
        amp.apply(|a| *a = a.unscale(peak));
    }
    Ok(JointSpectrum { grid: *grid, amplitude: amp })
}

/// One-dimensional sampled spectrum, normalized to unit maximum.
#[derive(Debug, Clone)]
pub struct Spectrum1D {
    pub wavelength_nm: Vec<f64>,
    pub intensity: Vec<f64>,
}

/// Sum the JSI over the other axis and normalize to unit maximum.
pub fn marginal_spectrum(js: &JointSpectrum, arm: Arm) -> Spectrum1D {
    let n = js.grid.points_per_axis;
    let (wavelength_nm, sum_axis): (Vec<f64>, _) = match arm {
        Arm::Signal => (js.grid.signal_wavelengths(), 1),
        Arm::Idler => (js.grid.idler_wavelengths(), 0),
    };
    let mut intensity = vec![0.0; n];
    for k in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += match sum_axis {
                1 => js.intensity(k, j),
                _ => js.intensity(j, k),
            };
        }
        intensity[k] = acc;
    }
    let max = intensity.iter().cloned().fold(0.0_f64, f64::max);
    if max > 0.0 {
        for v in &mut intensity {
            *v /= max;
        }
    }
    Spectrum1D { wavelength_nm, intensity }
}

/// Full width at half maximum of a sampled spectrum (nm). The two crossings
/// are located by linear interpolation between the bracketing samples.
pub fn fwhm(spectrum: &Spectrum1D) -> Result<f64, SpectralError> {
    let x = &spectrum.wavelength_nm;
    let y = &spectrum.intensity;
    let (imax, &ymax) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(SpectralError::NoInteriorPeak)?;
    if imax == 0 || imax == y.len() - 1 || ymax <= 0.0 {
        return Err(SpectralError::NoInteriorPeak);
    }
    let half = ymax / 2.0;
    let left = (0..imax)
        .rev()
        .find(|&i| y[i] < half)
        .ok_or(SpectralError::EdgeClipped { side: "left" })?;
    let right = (imax + 1..y.len())
        .find(|&i| y[i] < half)
        .ok_or(SpectralError::EdgeClipped { side: "right" })?;
    let cross = |i0: usize, i1: usize| -> f64 {
        // y[i0] and y[i1] bracket the half level
        x[i0] + (x[i1] - x[i0]) * (half - y[i0]) / (y[i1] - y[i0])
    };
    Ok(cross(right - 1, right) - cross(left, left + 1))
}

/// Schmidt coefficients of the JSA: the singular values of the amplitude
/// matrix, descending, normalized so the squares sum to one. Computed from
/// the eigenvalues of the Gram matrix F^dag F, which is Hermitian PSD.
pub fn schmidt_values(js: &JointSpectrum) -> Vec<f64> {
    let f = js.amplitude();
    let gram = f.adjoint() * f;
    let eigs = gram.symmetric_eigenvalues();
    let mut vals: Vec<f64> = eigs.iter().map(|&e| e.max(0.0).sqrt()).collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    let norm_sq: f64 = vals.iter().map(|v| v * v).sum();
    if norm_sq > 0.0 {
        let s = norm_sq.sqrt();
        for v in &mut vals {
            *v /= s;
        }
    }
    vals
}

/// Spectral purity P = sum of fourth powers of the normalized Schmidt
/// coefficients; the Schmidt number is 1/P.
pub fn schmidt_purity(schmidt: &[f64]) -> f64 {
    schmidt.iter().map(|v| v.powi(4)).sum()
}

/// Exchange overlap of the JSA with its signal/idler transpose:
///
/// V = Re[ sum f(Ls, Li) conj(f(Li, Ls)) ] / sum |f|^2
///
/// Equals 1 for an exchange-symmetric amplitude and bounds the achievable
/// Hong-Ou-Mandel interference visibility.
pub fn hom_visibility(js: &JointSpectrum) -> Result<f64, SpectralError> {
    if js.grid.signal_range_nm != js.grid.idler_range_nm {
        return Err(SpectralError::MismatchedAxes);
    }
    let f = js.amplitude();
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for is in 0..f.nrows() {
        for ii in 0..f.ncols() {
            num += f[(is, ii)] * f[(ii, is)].conj();
            den += f[(is, ii)].norm_sqr();
        }
    }
    Ok(num.re / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn pump() -> PumpSpec {
        PumpSpec { center_wavelength_nm: 405.0, fwhm_nm: 0.45 }
    }

    fn grid(n: usize) -> SpectralGrid {
        SpectralGrid {
            signal_range_nm: (790.0, 830.0),
            idler_range_nm: (790.0, 830.0),
            points_per_axis: n,
        }
    }

    /// Separable Gaussian product test spectrum, exchange symmetric.
    fn separable_js(n: usize) -> JointSpectrum {
        let g = grid(n);
        let ls = g.signal_wavelengths();
        let li = g.idler_wavelengths();
        let gauss = |l: f64| (-((l - 810.0) / 6.0).powi(2)).exp();
        let mut amp = DMatrix::<Complex64>::zeros(n, n);
        for (is, &s) in ls.iter().enumerate() {
            for (ii, &i) in li.iter().enumerate() {
                amp[(is, ii)] = Complex64::new(gauss(s) * gauss(i), 0.0);
            }
        }
        JointSpectrum { grid: g, amplitude: amp }
    }

    #[test]
    fn pump_envelope_peak_and_sum_dependence() {
        let p = pump();
        assert_relative_eq!(pump_envelope(810.0, 810.0, &p), 1.0, epsilon = 1e-12);
        // depends only on ws + wi: pick two pairs with equal inverse sums
        let a = pump_envelope(805.0, 815.0620155, &p);
        let l2 = 1.0 / (1.0 / 805.0 + 1.0 / 815.0620155 - 1.0 / 800.0);
        let b = pump_envelope(800.0, l2, &p);
        assert_relative_eq!(a, b, max_relative = 1e-12);
        // symmetric in the two arms
        assert_relative_eq!(
            pump_envelope(800.0, 818.0, &p),
            pump_envelope(818.0, 800.0, &p),
            max_relative = 1e-15
        );
    }

    #[test]
    fn pump_envelope_width_convention() {
        // amplitude reaches 1/2 at a detuning of fwhm_w
        let p = pump();
        let w0 = p.center_angular_frequency();
        let fwhm_w = std::f64::consts::TAU * C_NM_PER_FS * p.fwhm_nm / (405.0 * 405.0);
        // realize ws + wi = w0 + fwhm_w with a symmetric split
        let l = 2.0 * std::f64::consts::TAU * C_NM_PER_FS / (w0 + fwhm_w);
        let alpha = pump_envelope(l, l, &p);
        assert_relative_eq!(alpha, 0.5, max_relative = 1e-9);
    }

    #[test]
    fn jsa_normalized_nonnegative() {
        let js = compute_jsa(&pump(), &reference_crystal_at_degeneracy(), &grid(64)).unwrap();
        let mut max = 0.0_f64;
        for is in 0..64 {
            for ii in 0..64 {
                let v = js.intensity(is, ii);
                assert!(v >= 0.0);
                max = max.max(v);
            }
        }
        assert_relative_eq!(max, 1.0, epsilon = 1e-12);
    }

    fn reference_crystal_at_degeneracy() -> CrystalSpec {
        // frozen degeneracy temperature of the default model
        CrystalSpec {
            length_mm: 10.0,
            poling_period_um: 9.825,
            temperature_c: 94.73641779177731,
            dispersion_model: "fan-fradkin".into(),
        }
    }

    #[test]
    fn zero_bandwidth_pump_collapses_to_antidiagonal() {
        let narrow = PumpSpec { center_wavelength_nm: 405.0, fwhm_nm: 1e-4 };
        let js = compute_jsa(&narrow, &reference_crystal_at_degeneracy(), &grid(128)).unwrap();
        // cells far from the energy-conservation curve carry nothing
        let ls = js.grid.signal_wavelengths();
        let li = js.grid.idler_wavelengths();
        for (is, &s) in ls.iter().enumerate() {
            for (ii, &i) in li.iter().enumerate() {
                let lp = 1.0 / (1.0 / s + 1.0 / i);
                if (lp - 405.0).abs() > 0.05 {
                    assert!(js.intensity(is, ii) < 1e-10);
                }
            }
        }
    }

    #[test]
    fn marginals_of_separable_symmetric_jsa_match() {
        let js = separable_js(64);
        let s = marginal_spectrum(&js, Arm::Signal);
        let i = marginal_spectrum(&js, Arm::Idler);
        for k in 0..64 {
            assert_abs_diff_eq!(s.intensity[k], i.intensity[k], epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_sums_preserve_total() {
        // row sums and column sums of the JSI both add up to the same total,
        // so the two marginals agree on it before unit-max normalization
        let js = compute_jsa(&pump(), &reference_crystal_at_degeneracy(), &grid(64)).unwrap();
        let total: f64 =
            (0..64).map(|a| (0..64).map(|b| js.intensity(a, b)).sum::<f64>()).sum();
        let col_total: f64 =
            (0..64).map(|b| (0..64).map(|a| js.intensity(a, b)).sum::<f64>()).sum();
        assert_relative_eq!(col_total, total, max_relative = 1e-12);
        // normalized marginals peak at exactly one
        for arm in [Arm::Signal, Arm::Idler] {
            let m = marginal_spectrum(&js, arm);
            let max = m.intensity.iter().cloned().fold(0.0_f64, f64::max);
            assert_relative_eq!(max, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn fwhm_of_sampled_gaussian() {
        let n = 512;
        let x: Vec<f64> = (0..n).map(|k| 800.0 + 20.0 * k as f64 / (n - 1) as f64).collect();
        let y: Vec<f64> =
            x.iter().map(|&l| (-(l - 810.0f64).powi(2) / 2.0).exp()).collect();
        let w = fwhm(&Spectrum1D { wavelength_nm: x, intensity: y }).unwrap();
        let expected = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
        assert_relative_eq!(w, expected, max_relative = 5e-3);
    }

    #[test]
    fn fwhm_gaussian_accuracy_from_256_samples() {
        for n in [256usize, 384, 512] {
            let x: Vec<f64> =
                (0..n).map(|k| -10.0 + 20.0 * k as f64 / (n - 1) as f64).collect();
            let y: Vec<f64> = x.iter().map(|&u| (-u * u / 2.0f64).exp()).collect();
            let w = fwhm(&Spectrum1D { wavelength_nm: x, intensity: y }).unwrap();
            let expected = 2.0 * (2.0 * std::f64::consts::LN_2).sqrt();
            assert!((w - expected).abs() / expected < 5e-3, "n={n}: {w}");
        }
    }

    #[test]
    fn fwhm_rejects_edge_clipped() {
        let x: Vec<f64> = (0..64).map(|k| k as f64).collect();
        // rising ramp: maximum at the right edge
        let y: Vec<f64> = (0..64).map(|k| k as f64 / 63.0).collect();
        assert!(fwhm(&Spectrum1D { wavelength_nm: x.clone(), intensity: y }).is_err());
        // peak inside but left crossing missing
        let y: Vec<f64> = (0..64)
            .map(|k| if k < 32 { 0.9 + 0.1 * k as f64 / 31.0 } else { 1.0 - (k - 31) as f64 / 40.0 })
            .collect();
        let err = fwhm(&Spectrum1D { wavelength_nm: x, intensity: y }).unwrap_err();
        assert!(matches!(err, SpectralError::EdgeClipped { side: "left" }));
    }

    #[test]
    fn schmidt_separable_is_rank_one() {
        let js = separable_js(64);
        let s = schmidt_values(&js);
        assert_relative_eq!(s[0], 1.0, epsilon = 1e-10);
        // eigenvalue noise of the Gram matrix sits at machine epsilon and
        // surfaces as ~1e-8 after the square root
        for &v in &s[1..] {
            assert!(v < 1e-7);
        }
        assert_relative_eq!(schmidt_purity(&s), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn schmidt_normalization_and_scale_invariance() {
        let mut js = compute_jsa(&pump(), &reference_crystal_at_degeneracy(), &grid(64)).unwrap();
        let s1 = schmidt_values(&js);
        let sum_sq: f64 = s1.iter().map(|v| v * v).sum();
        assert_relative_eq!(sum_sq, 1.0, epsilon = 1e-9);
        assert!(s1.iter().all(|&v| v >= 0.0));
        js.amplitude.apply(|a| *a *= Complex64::new(0.0, -3.25));
        let s2 = schmidt_values(&js);
        for (a, b) in s1.iter().zip(&s2) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-7);
        }
    }

    #[test]
    fn hom_symmetric_input_gives_unity() {
        let js = separable_js(48);
        assert_relative_eq!(hom_visibility(&js).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn hom_disjoint_support_gives_zero() {
        let g = grid(32);
        let mut amp = DMatrix::<Complex64>::zeros(32, 32);
        // support strictly above the diagonal: exchange maps it strictly below
        for is in 0..32 {
            for ii in 0..32 {
                if ii > is + 2 {
                    amp[(is, ii)] = Complex64::new(1.0, 0.0);
                }
            }
        }
        let js = JointSpectrum { grid: g, amplitude: amp };
        assert_abs_diff_eq!(hom_visibility(&js).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn hom_requires_shared_window() {
        let g = SpectralGrid {
            signal_range_nm: (790.0, 830.0),
            idler_range_nm: (780.0, 840.0),
            points_per_axis: 32,
        };
        let js =
            JointSpectrum { grid: g, amplitude: DMatrix::zeros(32, 32) };
        assert!(matches!(hom_visibility(&js), Err(SpectralError::MismatchedAxes)));
    }

    #[test]
    fn grid_and_pump_validation() {
        assert!(SpectralGrid {
            signal_range_nm: (830.0, 790.0),
            idler_range_nm: (790.0, 830.0),
            points_per_axis: 64
        }
        .validate()
        .is_err());
        assert!(SpectralGrid {
            signal_range_nm: (790.0, 830.0),
            idler_range_nm: (790.0, 830.0),
            points_per_axis: 8
        }
        .validate()
        .is_err());
        assert!(PumpSpec { center_wavelength_nm: 405.0, fwhm_nm: 0.0 }.validate().is_err());
    }
}
