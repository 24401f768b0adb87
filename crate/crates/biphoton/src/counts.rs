//! Detector-count modeling: brightness-calibrated coincidence rates, singles
//! with dark counts, accidental coincidences, and seeded Poisson sampling.
//!
//! The calibration convention: `pair_rate_per_mw_cps` is the coincidence
//! rate per milliwatt divided by the projection probability, so a Bell-state
//! fringe maximum (probability 1/2) at power P gives rate * P / 2.

use nalgebra::Vector2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use thiserror::Error;

use crate::state::{
    polarizer_ket, projector_probability, single_arm_probability, AnalyzerSetting, TwoQubitState,
};

#[derive(Debug, Error)]
pub enum CountsError {
    #[error("source model: {reason}")]
    InvalidSource { reason: String },
    #[error("negative rate {rate_cps} cps cannot be sampled")]
    NegativeRate { rate_cps: f64 },
    #[error("efficiency budget is empty")]
    EmptyBudget,
    #[error("efficiency `{name}` = {value} outside (0, 1]")]
    EfficiencyOutOfRange { name: String, value: f64 },
}

/// Source brightness and detection parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    /// Coincidences per second per mW at unit projection probability.
    pub pair_rate_per_mw_cps: f64,
    pub pump_power_mw: f64,
    pub arm_efficiency_1: f64,
    pub arm_efficiency_2: f64,
    pub dark_rate_cps: f64,
    pub coincidence_window_ns: f64,
    pub integration_time_s: f64,
}

impl SourceModel {
    pub fn validate(&self) -> Result<(), CountsError> {
        let positive = [
            ("pair_rate_per_mw_cps", self.pair_rate_per_mw_cps, false),
            ("pump_power_mw", self.pump_power_mw, false),
            ("dark_rate_cps", self.dark_rate_cps, false),
            ("coincidence_window_ns", self.coincidence_window_ns, true),
            ("integration_time_s", self.integration_time_s, true),
        ];
        for (name, value, strict) in positive {
            let ok = if strict { value > 0.0 } else { value >= 0.0 };
            if !ok || !value.is_finite() {
                return Err(CountsError::InvalidSource {
                    reason: format!("{name} = {value} must be {}", if strict { "> 0" } else { ">= 0" }),
                });
            }
        }
        for (name, value) in [
            ("arm_efficiency_1", self.arm_efficiency_1),
            ("arm_efficiency_2", self.arm_efficiency_2),
        ] {
            if !(value > 0.0 && value <= 1.0) {
                return Err(CountsError::EfficiencyOutOfRange { name: name.into(), value });
            }
        }
        Ok(())
    }
}

/// Named multiplicative efficiency chain (coupling, filters, detector, ...).
#[derive(Debug, Clone, PartialEq)]
pub struct EfficiencyBudget {
    pub components: Vec<(String, f64)>,
}

impl EfficiencyBudget {
    pub fn new(components: Vec<(String, f64)>) -> Result<Self, CountsError> {
        if components.is_empty() {
            return Err(CountsError::EmptyBudget);
        }
        for (name, value) in &components {
            if !(*value > 0.0 && *value <= 1.0) {
                return Err(CountsError::EfficiencyOutOfRange {
                    name: name.clone(),
                    value: *value,
                });
            }
        }
        Ok(EfficiencyBudget { components })
    }
}

/// Product of all component efficiencies.
pub fn overall_efficiency(budget: &EfficiencyBudget) -> f64 {
    budget.components.iter().map(|(_, v)| v).product()
}

/// Measurement-setting identity carried by a count record.
#[derive(Debug, Clone, PartialEq)]
pub enum SettingId {
    Polarizers { theta1_deg: f64, theta2_deg: f64 },
    Projector { label: String },
}

impl std::fmt::Display for SettingId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SettingId::Polarizers { theta1_deg, theta2_deg } => {
                write!(f, "pol({theta1_deg},{theta2_deg})")
            }
            SettingId::Projector { label } => write!(f, "{label}"),
        }
    }
}

/// Simulated counts for one setting. Counts are stored as f64 so the same
/// record type carries exact expected values in noiseless mode; sampled
/// draws are integers represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct CountRecord {
    pub setting: SettingId,
    pub singles_1: f64,
    pub singles_2: f64,
    pub coincidences: f64,
    pub accidentals_estimate: f64,
    pub integration_time_s: f64,
}

/// Whether simulated counts are Poisson draws or exact expected values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Poisson,
    Expected,
}

/// Expected rates (cps) for one joint projection: coincidences, the two
/// singles, and the accidental contribution already included in the
/// coincidence rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBreakdown {
    pub coincidence_cps: f64,
    pub singles_1_cps: f64,
    pub singles_2_cps: f64,
    pub accidental_cps: f64,
}

/// Rates for a projector pair given as single-arm kets.
///
/// Pair term: pair_rate_per_mw * power * p. Singles: the pair rate behind
/// arm j's projector alone, divided by the opposite arm's efficiency (those
/// pairs reach detector j whether or not the partner is detected), plus
/// darks. Accidentals: singles_1 * singles_2 * window.
pub fn expected_rates_for_projectors(
    state: &TwoQubitState,
    ket1: &Vector2<Complex64>,
    ket2: &Vector2<Complex64>,
    source: &SourceModel,
) -> Result<RateBreakdown, CountsError> {
    source.validate()?;
    let scale = source.pair_rate_per_mw_cps * source.pump_power_mw;
    let p = projector_probability(state, ket1, ket2);
    let p1 = single_arm_probability(state, 1, ket1);
    let p2 = single_arm_probability(state, 2, ket2);
    let singles_1 = scale * p1 / source.arm_efficiency_2 + source.dark_rate_cps;
    let singles_2 = scale * p2 / source.arm_efficiency_1 + source.dark_rate_cps;
    let accidental = singles_1 * singles_2 * source.coincidence_window_ns * 1e-9;
    Ok(RateBreakdown {
        coincidence_cps: scale * p + accidental,
        singles_1_cps: singles_1,
        singles_2_cps: singles_2,
        accidental_cps: accidental,
    })
}

/// Rates behind two linear polarizers.
pub fn expected_coincidence_rate(
    state: &TwoQubitState,
    setting: &AnalyzerSetting,
    source: &SourceModel,
) -> Result<RateBreakdown, CountsError> {
    expected_rates_for_projectors(
        state,
        &polarizer_ket(setting.theta1_deg),
        &polarizer_ket(setting.theta2_deg),
        source,
    )
}

/// One Poisson draw with mean rate * time. Zero mean returns zero without
/// consuming randomness; identical inputs and seed give identical draws.
pub fn sample_counts(
    rate_cps: f64,
    integration_time_s: f64,
    seed: u64,
) -> Result<u64, CountsError> {
    if rate_cps < 0.0 {
        return Err(CountsError::NegativeRate { rate_cps });
    }
    let mean = rate_cps * integration_time_s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(poisson_draw(mean, &mut rng))
}

/// Exact Poisson sampling (no normal approximation).
pub(crate) fn poisson_draw(mean: f64, rng: &mut ChaCha8Rng) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

/// Poissonian one-sigma error sqrt(N).
pub fn count_error(counts: f64) -> f64 {
    counts.max(0.0).sqrt()
}

/// Simulate a polarizer-2 sweep at fixed polarizer 1. One rng stream drawn
/// from `seed`; per point the draw order is singles 1, singles 2,
/// coincidences.
pub fn simulate_fringe_scan(
    state: &TwoQubitState,
    theta1_deg: f64,
    sweep_theta2_deg: &[f64],
    source: &SourceModel,
    seed: u64,
    statistics: Statistics,
) -> Result<Vec<CountRecord>, CountsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = source.integration_time_s;
    let mut records = Vec::with_capacity(sweep_theta2_deg.len());
    for &theta2_deg in sweep_theta2_deg {
        let setting = AnalyzerSetting { theta1_deg, theta2_deg };
        let rates = expected_coincidence_rate(state, &setting, source)?;
        let (s1, s2, cc) = match statistics {
            Statistics::Poisson => (
                poisson_draw(rates.singles_1_cps * t, &mut rng) as f64,
                poisson_draw(rates.singles_2_cps * t, &mut rng) as f64,
                poisson_draw(rates.coincidence_cps * t, &mut rng) as f64,
            ),
            Statistics::Expected => {
                (rates.singles_1_cps * t, rates.singles_2_cps * t, rates.coincidence_cps * t)
            }
        };
        records.push(CountRecord {
            setting: SettingId::Polarizers { theta1_deg, theta2_deg },
            singles_1: s1,
            singles_2: s2,
            coincidences: cc,
            accidentals_estimate: rates.accidental_cps * t,
            integration_time_s: t,
        });
    }
    Ok(records)
}
