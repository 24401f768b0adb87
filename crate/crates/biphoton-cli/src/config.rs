//! Run configuration: one TOML file with sections per engine, overridable
//! key by key from the command line. The effective config (after overrides)
//! is what gets hashed into output headers.

use anyhow::{anyhow, bail, Context, Result};
use biphoton::counts::{EfficiencyBudget, SourceModel, Statistics};
use biphoton::crystal::CrystalSpec;
use biphoton::spectral::{PumpSpec, SpectralGrid};
use biphoton::state::SagnacParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for every random stream; subcommands derive their own.
    pub seed: i64,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    #[serde(default)]
    pub pump: PumpSection,
    #[serde(default)]
    pub crystal: CrystalSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub source: SourceSection,
    #[serde(default)]
    pub fringe: FringeSection,
    #[serde(default)]
    pub chsh: ChshSection,
    #[serde(default)]
    pub tomography: TomographySection,
    #[serde(default)]
    pub efficiency: EfficiencySection,
}

fn default_output_dir() -> String {
    "out".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub center_wavelength_nm: f64,
    pub fwhm_nm: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        PumpSection { center_wavelength_nm: 405.0, fwhm_nm: 0.45 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CrystalSection {
    pub length_mm: f64,
    pub poling_period_um: f64,
    pub dispersion_model: String,
    /// "degenerate" solves for the phase-matching temperature,
    /// "fixed" uses temperature_c as given.
    pub temperature_mode: String,
    pub temperature_c: f64,
}

impl Default for CrystalSection {
    fn default() -> Self {
        CrystalSection {
            length_mm: 10.0,
            poling_period_um: 9.825,
            dispersion_model: "fan-fradkin".to_string(),
            temperature_mode: "degenerate".to_string(),
            temperature_c: 25.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub signal_min_nm: f64,
    pub signal_max_nm: f64,
    pub idler_min_nm: f64,
    pub idler_max_nm: f64,
    pub points_per_axis: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            signal_min_nm: 790.0,
            signal_max_nm: 830.0,
            idler_min_nm: 790.0,
            idler_max_nm: 830.0,
            points_per_axis: 512,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateSection {
    pub phi_rad: f64,
    pub beta: f64,
    /// Weight of the ideal state in the white-noise mixture.
    pub noise_v: f64,
}

impl Default for StateSection {
    fn default() -> Self {
        StateSection { phi_rad: 0.0, beta: 1.0, noise_v: 0.98 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceSection {
    pub pair_rate_per_mw_cps: f64,
    pub pump_power_mw: f64,
    pub arm_efficiency_1: f64,
    pub arm_efficiency_2: f64,
    pub dark_rate_cps: f64,
    pub coincidence_window_ns: f64,
    pub integration_time_s: f64,
}

impl Default for SourceSection {
    fn default() -> Self {
        SourceSection {
            pair_rate_per_mw_cps: 2000.0,
            pump_power_mw: 7.0,
            arm_efficiency_1: 0.283,
            arm_efficiency_2: 0.283,
            dark_rate_cps: 100.0,
            coincidence_window_ns: 1.0,
            integration_time_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FringeSection {
    /// Fixed polarizer-1 angles; one sweep file per entry.
    pub theta1_deg: Vec<f64>,
    pub step_deg: f64,
    pub statistics: String,
}

impl Default for FringeSection {
    fn default() -> Self {
        FringeSection {
            theta1_deg: vec![0.0, 45.0],
            step_deg: 10.0,
            statistics: "poisson".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChshSection {
    /// "psi-plus", "psi-minus", or "custom" (then angles_deg applies).
    pub preset: String,
    pub angles_deg: [f64; 4],
}

impl Default for ChshSection {
    fn default() -> Self {
        ChshSection { preset: "psi-plus".to_string(), angles_deg: [0.0, 45.0, 22.5, -22.5] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomographySection {
    /// "standard-16" or "full-36".
    pub projectors: String,
    pub statistics: String,
    pub mc_trials: usize,
}

impl Default for TomographySection {
    fn default() -> Self {
        TomographySection {
            projectors: "full-36".to_string(),
            statistics: "poisson".to_string(),
            mc_trials: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencySection {
    #[serde(default = "default_components")]
    pub component: Vec<EfficiencyComponent>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficiencyComponent {
    pub name: String,
    pub value: f64,
}

fn default_components() -> Vec<EfficiencyComponent> {
    vec![
        EfficiencyComponent { name: "collection".to_string(), value: 0.526 },
        EfficiencyComponent { name: "transmission".to_string(), value: 0.897 },
        EfficiencyComponent { name: "detector".to_string(), value: 0.60 },
    ]
}

impl Default for EfficiencySection {
    fn default() -> Self {
        EfficiencySection { component: default_components() }
    }
}

/// Parse the config file, apply `--set section.key=value` overrides, and
/// validate everything the library types can check.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut value: toml::Value = text
        .parse()
        .with_context(|| format!("parsing config {}", path.display()))?;
    for entry in overrides {
        apply_override(&mut value, entry)?;
    }
    let config: RunConfig = value
        .try_into()
        .with_context(|| format!("validating config {}", path.display()))?;
    validate(&config)?;
    Ok(config)
}

fn apply_override(root: &mut toml::Value, entry: &str) -> Result<()> {
    let (path, raw) = entry
        .split_once('=')
        .ok_or_else(|| anyhow!("override `{entry}` is not of the form section.key=value"))?;
    // parse the right-hand side with full TOML syntax (numbers, strings,
    // arrays); bare words fall back to strings so `--set chsh.preset=custom`
    // works without quoting
    let parsed: toml::Value = match format!("x = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("x").expect("key x just inserted"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let segments: Vec<&str> = path.split('.').collect();
    for (k, segment) in segments.iter().enumerate() {
        if segment.is_empty() {
            bail!("override `{entry}` has an empty path segment");
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("override path `{path}` descends into a non-table"))?;
        if k + 1 == segments.len() {
            table.insert(segment.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(segment.to_string())
            .or_insert(toml::Value::Table(toml::Table::new()));
    }
    unreachable!("loop always returns on the last segment")
}

fn validate(config: &RunConfig) -> Result<()> {
    if config.seed < 0 {
        bail!("seed must be >= 0, got {}", config.seed);
    }
    if config.output_dir.is_empty() {
        bail!("output_dir must not be empty");
    }
    config.crystal_spec_unresolved().validate().context("crystal section")?;
    match config.crystal.temperature_mode.as_str() {
        "degenerate" | "fixed" => {}
        other => bail!(
            "crystal.temperature_mode must be \"degenerate\" or \"fixed\", got \"{other}\""
        ),
    }
    config.grid_spec().validate().context("grid section")?;
    config.pump_spec().validate().context("pump section")?;
    config.source_model().validate().context("source section")?;
    config.efficiency_budget().context("efficiency section")?;
    parse_statistics(&config.fringe.statistics).context("fringe.statistics")?;
    parse_statistics(&config.tomography.statistics).context("tomography.statistics")?;
    if config.fringe.theta1_deg.is_empty() {
        bail!("fringe.theta1_deg must list at least one angle");
    }
    if !(config.fringe.step_deg > 0.0) || config.fringe.step_deg > 180.0 {
        bail!("fringe.step_deg must be in (0, 180], got {}", config.fringe.step_deg);
    }
    match config.chsh.preset.as_str() {
        "psi-plus" | "psi-minus" | "custom" => {}
        other => bail!(
            "chsh.preset must be \"psi-plus\", \"psi-minus\", or \"custom\", got \"{other}\""
        ),
    }
    if biphoton::tomo::ProjectorSet::by_name(&config.tomography.projectors).is_none() {
        bail!(
            "tomography.projectors must be \"standard-16\" or \"full-36\", got \"{}\"",
            config.tomography.projectors
        );
    }
    if config.tomography.mc_trials < 10 {
        bail!("tomography.mc_trials must be >= 10, got {}", config.tomography.mc_trials);
    }
    if !(config.state.noise_v >= 0.0 && config.state.noise_v <= 1.0) {
        bail!("state.noise_v must be in [0, 1], got {}", config.state.noise_v);
    }
    if !(config.state.beta >= 0.0) || !config.state.beta.is_finite() {
        bail!("state.beta must be finite and >= 0, got {}", config.state.beta);
    }
    Ok(())
}

pub fn parse_statistics(name: &str) -> Result<Statistics> {
    match name {
        "poisson" => Ok(Statistics::Poisson),
        "expected" => Ok(Statistics::Expected),
        other => Err(anyhow!("statistics must be \"poisson\" or \"expected\", got \"{other}\"")),
    }
}

impl RunConfig {
    pub fn pump_spec(&self) -> PumpSpec {
        PumpSpec {
            center_wavelength_nm: self.pump.center_wavelength_nm,
            fwhm_nm: self.pump.fwhm_nm,
        }
    }

    /// Crystal spec before temperature-mode resolution.
    fn crystal_spec_unresolved(&self) -> CrystalSpec {
        CrystalSpec {
            length_mm: self.crystal.length_mm,
            poling_period_um: self.crystal.poling_period_um,
            temperature_c: self.crystal.temperature_c,
            dispersion_model: self.crystal.dispersion_model.clone(),
        }
    }

    /// Crystal spec with the operating temperature resolved: in
    /// "degenerate" mode this solves for the temperature where collinear
    /// degenerate phase matching closes.
    pub fn crystal_spec(&self) -> Result<CrystalSpec> {
        let spec = self.crystal_spec_unresolved();
        match self.crystal.temperature_mode.as_str() {
            "fixed" => Ok(spec),
            "degenerate" => {
                let t = biphoton::crystal::degenerate_temperature(
                    &spec,
                    self.pump.center_wavelength_nm / 1000.0,
                )?;
                Ok(spec.with_temperature(t))
            }
            other => bail!("unreachable temperature mode {other}"),
        }
    }

    pub fn grid_spec(&self) -> SpectralGrid {
        SpectralGrid {
            signal_range_nm: (self.grid.signal_min_nm, self.grid.signal_max_nm),
            idler_range_nm: (self.grid.idler_min_nm, self.grid.idler_max_nm),
            points_per_axis: self.grid.points_per_axis,
        }
    }

    pub fn sagnac_params(&self) -> SagnacParams {
        SagnacParams { phi_rad: self.state.phi_rad, beta: self.state.beta }
    }

    pub fn source_model(&self) -> SourceModel {
        SourceModel {
            pair_rate_per_mw_cps: self.source.pair_rate_per_mw_cps,
            pump_power_mw: self.source.pump_power_mw,
            arm_efficiency_1: self.source.arm_efficiency_1,
            arm_efficiency_2: self.source.arm_efficiency_2,
            dark_rate_cps: self.source.dark_rate_cps,
            coincidence_window_ns: self.source.coincidence_window_ns,
            integration_time_s: self.source.integration_time_s,
        }
    }

    pub fn efficiency_budget(&self) -> Result<EfficiencyBudget> {
        let components = self
            .efficiency
            .component
            .iter()
            .map(|c| (c.name.clone(), c.value))
            .collect();
        Ok(EfficiencyBudget::new(components)?)
    }

    /// Output directory, with the environment override applied. Only the
    /// directory is overridable from the environment.
    pub fn resolved_output_dir(&self) -> String {
        std::env::var("BIPHOTON_OUT").unwrap_or_else(|_| self.output_dir.clone())
    }

    /// SHA-256 of the effective config (file plus overrides), hex encoded.
    /// Stamped into every output header so files identify their run.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let out = hasher.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Random stream for one subcommand: FNV-1a over the seed bytes and the
    /// subcommand name, so streams are independent across subcommands but
    /// reproducible run to run.
    pub fn stream_seed(&self, subcommand: &str) -> u64 {
        const FNV_OFFSET: u64 = 0xcbf29ce484222325;
        const FNV_PRIME: u64 = 0x100000001b3;
        let mut h = FNV_OFFSET;
        for byte in (self.seed as u64).to_le_bytes().into_iter().chain(subcommand.bytes()) {
            h ^= byte as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        h
    }
}
