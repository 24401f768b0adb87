//! Two-qubit polarization states and correlation measurements.
//!
//! The computational basis is fixed as {HH, HV, VH, VV} in that order; every
//! matrix in this module and everything serialized downstream uses it.
//! Analyzer angles are degrees at the interfaces and radians internally.

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use thiserror::Error;

type C = Complex64;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("density matrix is not Hermitian: max |rho - rho^dag| = {deviation:.3e}")]
    NotHermitian { deviation: f64 },
    #[error("density matrix trace is {trace}, expected 1")]
    BadTrace { trace: f64 },
    #[error("density matrix has negative eigenvalue {eigenvalue:.3e}")]
    NotPositive { eigenvalue: f64 },
    #[error("parameter {name} is not finite")]
    NonFinite { name: &'static str },
    #[error("noise weight v = {v} outside [0, 1]")]
    NoiseWeightOutOfRange { v: f64 },
    #[error("target ket norm is {norm}, expected 1")]
    UnnormalizedKet { norm: f64 },
    #[error("fringe fit needs {reason}")]
    DegenerateFringe { reason: String },
}

const HERMITICITY_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGENVALUE_TOL: f64 = -1e-10;

/// Density matrix over {HH, HV, VH, VV}, validated Hermitian, unit trace,
/// and positive semidefinite on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<C>,
}

impl TwoQubitState {
    pub fn new(rho: Matrix4<C>) -> Result<Self, StateError> {
        let dev = (rho - rho.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > HERMITICITY_TOL {
            return Err(StateError::NotHermitian { deviation: dev });
        }
        let trace = rho.trace().re;
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(StateError::BadTrace { trace });
        }
        // eigenvalues of the Hermitized matrix; tiny negatives are rounding
        let herm = (rho + rho.adjoint()).unscale(2.0);
        let min_eig =
            herm.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < EIGENVALUE_TOL {
            return Err(StateError::NotPositive { eigenvalue: min_eig });
        }
        Ok(TwoQubitState { rho })
    }

    /// Pure state |psi><psi| from a normalized 4-component ket.
    pub fn from_ket(ket: &Vector4<C>) -> Result<Self, StateError> {
        let norm = ket.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(StateError::UnnormalizedKet { norm });
        }
        Ok(TwoQubitState { rho: ket * ket.adjoint() })
    }

    pub fn matrix(&self) -> &Matrix4<C> {
        &self.rho
    }

    /// Reduced single-arm state by partial trace. Arm 1 is the first tensor
    /// factor (rows/cols grouped as 2x2 blocks), arm 2 the second.
    pub fn reduced(&self, arm: u8) -> Matrix2<C> {
        let r = &self.rho;
        let mut out = Matrix2::zeros();
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = C::new(0.0, 0.0);
                for k in 0..2 {
                    acc += match arm {
                        1 => r[(2 * a + k, 2 * b + k)],
                        _ => r[(2 * k + a, 2 * k + b)],
                    };
                }
                out[(a, b)] = acc;
            }
        }
        out
    }
}

/// Relative phase and amplitude ratio of the counter-propagating pair
/// contributions in the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SagnacParams {
    pub phi_rad: f64,
    pub beta: f64,
}

/// Linear-polarizer analyzer pair, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting {
    pub theta1_deg: f64,
    pub theta2_deg: f64,
}

/// Normalized superposition (|HV> + e^{i phi} beta |VH>) / sqrt(1 + beta^2).
pub fn sagnac_ket(params: &SagnacParams) -> Result<Vector4<C>, StateError> {
    if !params.phi_rad.is_finite() {
        return Err(StateError::NonFinite { name: "phi_rad" });
    }
    if !params.beta.is_finite() {
        return Err(StateError::NonFinite { name: "beta" });
    }
    let norm = (1.0 + params.beta * params.beta).sqrt();
    Ok(Vector4::new(
        C::new(0.0, 0.0),
        C::new(1.0 / norm, 0.0),
        C::from_polar(params.beta / norm, params.phi_rad),
        C::new(0.0, 0.0),
    ))
}

/// The same superposition as a density matrix.
pub fn sagnac_state(params: &SagnacParams) -> Result<TwoQubitState, StateError> {
    let ket = sagnac_ket(params)?;
    Ok(TwoQubitState { rho: ket * ket.adjoint() })
}

/// (|HV> + |VH>) / sqrt(2).
pub fn bell_psi_plus() -> TwoQubitState {
    sagnac_state(&SagnacParams { phi_rad: 0.0, beta: 1.0 }).expect("fixed valid params")
}

/// (|HV> - |VH>) / sqrt(2).
pub fn bell_psi_minus() -> TwoQubitState {
    sagnac_state(&SagnacParams { phi_rad: std::f64::consts::PI, beta: 1.0 })
        .expect("fixed valid params")
}

/// v rho + (1 - v) I/4.
pub fn mix_with_white_noise(state: &TwoQubitState, v: f64) -> Result<TwoQubitState, StateError> {
    if !(0.0..=1.0).contains(&v) {
        return Err(StateError::NoiseWeightOutOfRange { v });
    }
    let noise = Matrix4::<C>::identity().map(|z| z * ((1.0 - v) / 4.0));
    Ok(TwoQubitState { rho: state.rho.map(|z| z * v) + noise })
}

/// Linear-polarizer ket cos(theta)|H> + sin(theta)|V>.
pub fn polarizer_ket(theta_deg: f64) -> Vector2<C> {
    let t = theta_deg.to_radians();
    Vector2::new(C::new(t.cos(), 0.0), C::new(t.sin(), 0.0))
}

/// Probability of a joint projection onto ket1 (x) ket2.
pub fn projector_probability(state: &TwoQubitState, ket1: &Vector2<C>, ket2: &Vector2<C>) -> f64 {
    let joint = ket1.kronecker(ket2);
    let p = (joint.adjoint() * state.rho * joint)[(0, 0)].re;
    p.clamp(0.0, 1.0)
}

/// Probability that a single arm passes its projector, the other arm ignored.
pub fn single_arm_probability(state: &TwoQubitState, arm: u8, ket: &Vector2<C>) -> f64 {
    let reduced = state.reduced(arm);
    let p = (ket.adjoint() * reduced * ket)[(0, 0)].re;
    p.clamp(0.0, 1.0)
}

/// Coincidence probability behind two linear polarizers,
/// <theta1 theta2| rho |theta1 theta2>.
pub fn coincidence_probability(state: &TwoQubitState, setting: &AnalyzerSetting) -> f64 {
    projector_probability(
        state,
        &polarizer_ket(setting.theta1_deg),
        &polarizer_ket(setting.theta2_deg),
    )
}

/// Coincidence probability with polarizer 1 fixed, swept over theta2.
pub fn fringe_curve(
    state: &TwoQubitState,
    theta1_deg: f64,
    sweep_theta2_deg: &[f64],
) -> Vec<(f64, f64)> {
    sweep_theta2_deg
        .iter()
        .map(|&t2| {
            (t2, coincidence_probability(state, &AnalyzerSetting { theta1_deg, theta2_deg: t2 }))
        })
        .collect()
}

/// Fringe visibility from a least-squares sinusoid fit.
///
/// The model A + B sin^2(theta - theta0) is fitted in its linear form
/// c0 + c1 cos 2theta + c2 sin 2theta; visibility = B / (B + 2A)
/// = sqrt(c1^2 + c2^2) / c0. Exact for noiseless fringes, least-squares
/// for sampled counts.
pub fn visibility(curve: &[(f64, f64)]) -> Result<f64, StateError> {
    if curve.len() < 3 {
        return Err(StateError::DegenerateFringe {
            reason: format!("at least 3 points, got {}", curve.len()),
        });
    }
    let span = curve.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
        - curve.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    if span < 180.0 - 1e-9 {
        return Err(StateError::DegenerateFringe {
            reason: format!("a sweep spanning >= 180 degrees, got {span:.1}"),
        });
    }
    // normal equations for the 3-parameter linear model
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut atb = nalgebra::Vector3::<f64>::zeros();
    for &(theta_deg, y) in curve {
        let t = 2.0 * theta_deg.to_radians();
        let row = nalgebra::Vector3::new(1.0, t.cos(), t.sin());
        ata += row * row.transpose();
        atb += row * y;
    }
    let c = ata.lu().solve(&atb).ok_or_else(|| StateError::DegenerateFringe {
        reason: "a non-singular fit system".to_string(),
    })?;
    let mean = c[0];
    let amp = (c[1] * c[1] + c[2] * c[2]).sqrt();
    if mean.abs() < 1e-300 {
        return Err(StateError::DegenerateFringe { reason: "a nonzero mean level".to_string() });
    }
    Ok(amp / mean)
}

/// Correlation E(t1, t2) = P(t1,t2) + P(t1+90,t2+90) - P(t1,t2+90) - P(t1+90,t2).
pub fn correlation(state: &TwoQubitState, theta1_deg: f64, theta2_deg: f64) -> f64 {
    let p = |a: f64, b: f64| {
        coincidence_probability(state, &AnalyzerSetting { theta1_deg: a, theta2_deg: b })
    };
    let (t1, t2) = (theta1_deg, theta2_deg);
    p(t1, t2) + p(t1 + 90.0, t2 + 90.0) - p(t1, t2 + 90.0) - p(t1 + 90.0, t2)
}

/// CHSH parameter: the maximum over the four placements of the single minus
/// sign among the correlations at (a,b), (a,b'), (a',b), (a',b').
pub fn chsh_s(state: &TwoQubitState, a_deg: f64, a2_deg: f64, b_deg: f64, b2_deg: f64) -> f64 {
    let e = [
        correlation(state, a_deg, b_deg),
        correlation(state, a_deg, b2_deg),
        correlation(state, a2_deg, b_deg),
        correlation(state, a2_deg, b2_deg),
    ];
    let sum: f64 = e.iter().sum();
    (0..4).map(|k| (sum - 2.0 * e[k]).abs()).fold(f64::NEG_INFINITY, f64::max)
}

/// Analyzer preset reproducing the maximal violation for |Psi->.
pub const CHSH_PRESET_PSI_MINUS: (f64, f64, f64, f64) = (0.0, 45.0, 22.5, 67.5);
/// Analyzer preset reproducing the maximal violation for |Psi+>.
pub const CHSH_PRESET_PSI_PLUS: (f64, f64, f64, f64) = (0.0, 45.0, 22.5, -22.5);

/// Overlap <psi| rho |psi> with a pure target.
pub fn fidelity_to_pure(state: &TwoQubitState, target: &Vector4<C>) -> Result<f64, StateError> {
    let norm = target.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(StateError::UnnormalizedKet { norm });
    }
    Ok((target.adjoint() * state.rho * target)[(0, 0)].re.clamp(0.0, 1.0))
}

/// Wootters concurrence.
///
/// With rho_tilde = (sy x sy) rho* (sy x sy), the concurrence is
/// max(0, l1 - l2 - l3 - l4) where lk are the descending square roots of the
/// eigenvalues of rho rho_tilde. Those are computed from the Hermitian
/// product sqrt(rho) rho_tilde sqrt(rho), which shares its spectrum.
pub fn concurrence(state: &TwoQubitState) -> f64 {
    let rho = &state.rho;
    let sy_sy = {
        let mut m = Matrix4::<C>::zeros();
        // (sy x sy)[i,j]: antidiagonal with signs -, +, +, -
        m[(0, 3)] = C::new(-1.0, 0.0);
        m[(1, 2)] = C::new(1.0, 0.0);
        m[(2, 1)] = C::new(1.0, 0.0);
        m[(3, 0)] = C::new(-1.0, 0.0);
        m
    };
    let rho_tilde = sy_sy * rho.map(|z| z.conj()) * sy_sy;

    // Hermitian square root of rho via its eigensystem
    let herm = (rho + rho.adjoint()).unscale(2.0);
    let eig = herm.symmetric_eigen();
    let mut sqrt_rho = Matrix4::<C>::zeros();
    for k in 0..4 {
        let lk = eig.eigenvalues[k].max(0.0).sqrt();
        let vk = eig.eigenvectors.column(k);
        sqrt_rho += (vk * vk.adjoint()).map(|z| z * lk);
    }

    let product = sqrt_rho * rho_tilde * sqrt_rho;
    let herm_product = (product.clone() + product.adjoint()).unscale(2.0);
    let mut lambdas: Vec<f64> =
        herm_product.symmetric_eigenvalues().iter().map(|&e| e.max(0.0).sqrt()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    (lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn psi_plus_ket() -> Vector4<C> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Vector4::new(C::new(0.0, 0.0), C::new(s, 0.0), C::new(s, 0.0), C::new(0.0, 0.0))
    }

    fn psi_minus_ket() -> Vector4<C> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Vector4::new(C::new(0.0, 0.0), C::new(s, 0.0), C::new(-s, 0.0), C::new(0.0, 0.0))
    }

    fn maximally_mixed() -> TwoQubitState {
        TwoQubitState::new(Matrix4::identity().unscale(4.0)).unwrap()
    }

    /// Random physical state from a lower-triangular square root.
    fn random_state(rng: &mut ChaCha8Rng) -> TwoQubitState {
        let mut t = Matrix4::<C>::zeros();
        for r in 0..4 {
            for c in 0..=r {
                if r == c {
                    t[(r, c)] = C::new(rng.gen_range(0.05..1.0), 0.0);
                } else {
                    t[(r, c)] = C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
        }
        let g = t.adjoint() * t;
        let rho = g.unscale(g.trace().re);
        TwoQubitState::new(rho).unwrap()
    }

    #[test]
    fn sagnac_bell_states() {
        let plus = bell_psi_plus();
        let expected = psi_plus_ket() * psi_plus_ket().adjoint();
        assert!((plus.matrix() - expected).norm() < 1e-12);
        let minus = bell_psi_minus();
        let expected = psi_minus_ket() * psi_minus_ket().adjoint();
        assert!((minus.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn sagnac_beta_zero_is_product_state() {
        let s = sagnac_state(&SagnacParams { phi_rad: 1.234, beta: 0.0 }).unwrap();
        let mut expected = Matrix4::<C>::zeros();
        expected[(1, 1)] = C::new(1.0, 0.0);
        assert!((s.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn sagnac_rejects_non_finite() {
        assert!(sagnac_state(&SagnacParams { phi_rad: f64::NAN, beta: 1.0 }).is_err());
        assert!(sagnac_state(&SagnacParams { phi_rad: 0.0, beta: f64::INFINITY }).is_err());
    }

    #[test]
    fn white_noise_mixing() {
        let bell = bell_psi_plus();
        let same = mix_with_white_noise(&bell, 1.0).unwrap();
        assert!((same.matrix() - bell.matrix()).norm() < 1e-15);
        let mixed = mix_with_white_noise(&bell, 0.0).unwrap();
        assert!((mixed.matrix() - Matrix4::<C>::identity().unscale(4.0)).norm() < 1e-15);
        // frozen eigenvalues at v = 1/2
        let half = mix_with_white_noise(&bell, 0.5).unwrap();
        let mut eigs: Vec<f64> =
            half.matrix().symmetric_eigenvalues().iter().cloned().collect();
        eigs.sort_by(|a, b| b.total_cmp(a));
        let expected = [0.625, 0.125, 0.125, 0.125];
        for (e, x) in eigs.iter().zip(expected) {
            assert_abs_diff_eq!(e, &x, epsilon = 1e-12);
        }
        assert!(mix_with_white_noise(&bell, 1.5).is_err());
    }

    #[test]
    fn coincidence_formulas_spot_checks() {
        let plus = bell_psi_plus();
        let p = coincidence_probability(&plus, &AnalyzerSetting { theta1_deg: 0.0, theta2_deg: 90.0 });
        assert_relative_eq!(p, 0.5, epsilon = 1e-12);
        let p = coincidence_probability(&plus, &AnalyzerSetting { theta1_deg: 0.0, theta2_deg: 0.0 });
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-12);
        let minus = bell_psi_minus();
        let p = coincidence_probability(&minus, &AnalyzerSetting { theta1_deg: 45.0, theta2_deg: 45.0 });
        assert_abs_diff_eq!(p, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincidence_closed_forms_on_random_angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let plus = bell_psi_plus();
        let minus = bell_psi_minus();
        for _ in 0..1000 {
            let t1: f64 = rng.gen_range(-360.0..360.0);
            let t2: f64 = rng.gen_range(-360.0..360.0);
            let setting = AnalyzerSetting { theta1_deg: t1, theta2_deg: t2 };
            let sum = (t1 + t2).to_radians();
            let diff = (t2 - t1).to_radians();
            assert_abs_diff_eq!(
                coincidence_probability(&plus, &setting),
                sum.sin().powi(2) / 2.0,
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                coincidence_probability(&minus, &setting),
                diff.sin().powi(2) / 2.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn fringe_curve_matches_pointwise_evaluation() {
        let minus = bell_psi_minus();
        let sweep: Vec<f64> = (0..36).map(|k| 10.0 * k as f64).collect();
        let curve = fringe_curve(&minus, 45.0, &sweep);
        // the 45-degree fringe is the 0-degree fringe shifted by 45 in theta2
        for k in 0..36 {
            let t2 = curve[k].0 - 45.0;
            let p0 = (t2.to_radians()).sin().powi(2) / 2.0;
            assert_abs_diff_eq!(curve[k].1, p0, epsilon = 1e-12);
        }
        // maximally mixed is flat at 1/4
        let flat = fringe_curve(&maximally_mixed(), 0.0, &sweep);
        for &(_, p) in &flat {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn visibility_identities() {
        let sweep: Vec<f64> = (0..37).map(|k| 10.0 * k as f64).collect();
        // ideal Bell fringe: exactly 1
        let v = visibility(&fringe_curve(&bell_psi_plus(), 0.0, &sweep)).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
        // Werner fringe: exactly the mixing weight, in all four bases
        for v_true in [0.962, 0.98, 0.5] {
            let w = mix_with_white_noise(&bell_psi_plus(), v_true).unwrap();
            for basis in [0.0, 45.0, 90.0, 135.0] {
                let v = visibility(&fringe_curve(&w, basis, &sweep)).unwrap();
                assert_relative_eq!(v, v_true, epsilon = 1e-9);
            }
        }
        // flat level plus a tiny modulation
        let curve: Vec<(f64, f64)> = sweep
            .iter()
            .map(|&t| (t, 0.25 + 1e-6 * (t.to_radians()).sin().powi(2)))
            .collect();
        let v = visibility(&curve).unwrap();
        assert_relative_eq!(v, 1e-6 / (1e-6 + 0.5), max_relative = 1e-6);
    }

    #[test]
    fn visibility_requires_half_period_span() {
        let sweep: Vec<f64> = (0..10).map(|k| 10.0 * k as f64).collect();
        let err = visibility(&fringe_curve(&bell_psi_plus(), 0.0, &sweep)).unwrap_err();
        assert!(matches!(err, StateError::DegenerateFringe { .. }));
    }

    #[test]
    fn chsh_bell_and_werner_values() {
        let minus = bell_psi_minus();
        let (a, a2, b, b2) = CHSH_PRESET_PSI_MINUS;
        let s = chsh_s(&minus, a, a2, b, b2);
        assert_relative_eq!(s, 2.0 * std::f64::consts::SQRT_2, epsilon = 1e-9);
        // the psi-plus preset serves psi-plus
        let plus = bell_psi_plus();
        let (a, a2, b, b2) = CHSH_PRESET_PSI_PLUS;
        assert_relative_eq!(
            chsh_s(&plus, a, a2, b, b2),
            2.0 * std::f64::consts::SQRT_2,
            epsilon = 1e-9
        );
        // Werner scaling, frozen value at v = 0.983
        let (a, a2, b, b2) = CHSH_PRESET_PSI_MINUS;
        for v in [0.983, 0.9, 0.5] {
            let w = mix_with_white_noise(&minus, v).unwrap();
            assert_relative_eq!(
                chsh_s(&w, a, a2, b, b2),
                2.0 * std::f64::consts::SQRT_2 * v,
                epsilon = 1e-9
            );
        }
        let w = mix_with_white_noise(&minus, 0.983).unwrap();
        assert_relative_eq!(chsh_s(&w, a, a2, b, b2), 2.7803438636, epsilon = 1e-9);
        // maximally mixed: S = 0
        assert_abs_diff_eq!(chsh_s(&maximally_mixed(), a, a2, b, b2), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn chsh_invariant_under_180_degree_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let state = random_state(&mut rng);
        let (a, a2, b, b2) = (10.0, 55.0, 30.0, 75.0);
        let s0 = chsh_s(&state, a, a2, b, b2);
        assert_relative_eq!(chsh_s(&state, a + 180.0, a2, b, b2), s0, epsilon = 1e-10);
        assert_relative_eq!(chsh_s(&state, a, a2 + 180.0, b, b2 + 180.0), s0, epsilon = 1e-10);
    }

    #[test]
    fn tsirelson_bound_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let (a, a2, b, b2) = CHSH_PRESET_PSI_MINUS;
        for _ in 0..100 {
            let state = random_state(&mut rng);
            let t1: f64 = rng.gen_range(0.0..180.0);
            let t2: f64 = rng.gen_range(0.0..180.0);
            let e = correlation(&state, t1, t2);
            assert!(e.abs() <= 1.0 + 1e-12, "E = {e}");
            let s = chsh_s(&state, a, a2, b, b2);
            assert!(s <= 2.0 * std::f64::consts::SQRT_2 + 1e-9, "S = {s}");
        }
    }

    #[test]
    fn fidelity_identities() {
        let minus = bell_psi_minus();
        assert_relative_eq!(fidelity_to_pure(&minus, &psi_minus_ket()).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fidelity_to_pure(&bell_psi_plus(), &psi_minus_ket()).unwrap(),
            0.0,
            epsilon = 1e-12
        );
        for v in [0.9, 0.963, 0.5] {
            let w = mix_with_white_noise(&minus, v).unwrap();
            assert_relative_eq!(
                fidelity_to_pure(&w, &psi_minus_ket()).unwrap(),
                v + (1.0 - v) / 4.0,
                epsilon = 1e-12
            );
        }
        // unnormalized target rejected
        let bad = psi_minus_ket() * C::new(1.1, 0.0);
        assert!(fidelity_to_pure(&minus, &bad).is_err());
    }

    #[test]
    fn concurrence_reference_values() {
        assert_relative_eq!(concurrence(&bell_psi_plus()), 1.0, epsilon = 1e-9);
        assert_relative_eq!(concurrence(&bell_psi_minus()), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(concurrence(&maximally_mixed()), 0.0, epsilon = 1e-12);
        // Werner closed form max(0, (3v-1)/2)
        for v in [0.9, 0.5, 0.2] {
            let w = mix_with_white_noise(&bell_psi_minus(), v).unwrap();
            let expected = (1.5 * v - 0.5).max(0.0);
            assert_abs_diff_eq!(concurrence(&w), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn reduced_states_of_bell_are_mixed() {
        let plus = bell_psi_plus();
        for arm in [1u8, 2] {
            let r = plus.reduced(arm);
            assert!((r - Matrix2::<C>::identity().unscale(2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn state_validation_rejects_bad_matrices() {
        // non-Hermitian
        let mut m = Matrix4::<C>::identity().unscale(4.0);
        m[(0, 1)] = C::new(0.3, 0.0);
        assert!(matches!(TwoQubitState::new(m), Err(StateError::NotHermitian { .. })));
        // wrong trace
        let m = Matrix4::<C>::identity();
        assert!(matches!(TwoQubitState::new(m), Err(StateError::BadTrace { .. })));
        // negative eigenvalue
        let mut m = Matrix4::<C>::zeros();
        m[(0, 0)] = C::new(1.5, 0.0);
        m[(1, 1)] = C::new(-0.5, 0.0);
        assert!(matches!(TwoQubitState::new(m), Err(StateError::NotPositive { .. })));
    }
}
