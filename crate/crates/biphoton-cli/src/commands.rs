//! Subcommand implementations. Every command resolves its inputs from the
//! config, derives its own random stream, and writes its files through the
//! atomic output layer. `report` chains all of them, reusing the same
//! per-producer stream salts so its files match stand-alone runs byte for
//! byte.

use anyhow::{anyhow, bail, Context, Result};
use biphoton::counts::{
    count_error, expected_coincidence_rate, overall_efficiency, simulate_fringe_scan,
    CountRecord, SettingId,
};
use biphoton::spectral::{
    compute_jsa, fwhm, hom_visibility, marginal_spectrum, schmidt_purity, schmidt_values, Arm,
    JointSpectrum, Spectrum1D,
};
use biphoton::state::{
    chsh_s, concurrence, correlation, mix_with_white_noise, sagnac_ket, sagnac_state, visibility,
    AnalyzerSetting, TwoQubitState, CHSH_PRESET_PSI_MINUS, CHSH_PRESET_PSI_PLUS,
};
use biphoton::tomo::{
    mle_reconstruct, monte_carlo_fidelity, simulate_tomography, MleOptions, ProjectorSet,
    TomographyResult,
};
use nalgebra::Matrix4;

use crate::config::{parse_statistics, RunConfig};
use crate::output::{fmt_f64, read_to_string, OutputDir};

pub fn run_subcommand(name: &str, config: &RunConfig) -> Result<()> {
    let out = OutputDir::new(&config.resolved_output_dir(), &config.digest(), config.seed)?;
    match name {
        "jsi" => jsi(config, &out),
        "spectrum" => spectrum(config, &out),
        "fringe" => fringe(config, &out),
        "chsh" => chsh(config, &out),
        "tomo-sim" => tomo_sim(config, &out),
        "tomo-fit" => tomo_fit(config, &out).map(|_| ()),
        "report" => report(config, &out),
        other => bail!("unknown subcommand {other}"),
    }
}

fn joint_spectrum(config: &RunConfig) -> Result<JointSpectrum> {
    let crystal = config.crystal_spec()?;
    Ok(compute_jsa(&config.pump_spec(), &crystal, &config.grid_spec())?)
}

/// Joint spectral intensity matrix: first row is the idler wavelength
/// header, first column the signal wavelength header.
fn jsi(config: &RunConfig, out: &OutputDir) -> Result<()> {
    let js = joint_spectrum(config)?;
    let mut body = String::new();
    body.push_str("signal_nm/idler_nm");
    for &li in &js.grid.idler_wavelengths() {
        body.push('\t');
        body.push_str(&fmt_f64(li));
    }
    body.push('\n');
    let signal = js.grid.signal_wavelengths();
    let intensity = js.intensity_matrix();
    for (row, &ls) in signal.iter().enumerate() {
        body.push_str(&fmt_f64(ls));
        for col in 0..js.grid.points_per_axis {
            body.push('\t');
            body.push_str(&fmt_f64(intensity[(row, col)]));
        }
        body.push('\n');
    }
    out.write("jsi.tsv", &body)?;
    Ok(())
}

fn spectrum_file(m: &Spectrum1D) -> String {
    let mut body = String::from("wavelength_nm\tintensity\n");
    for (l, v) in m.wavelength_nm.iter().zip(&m.intensity) {
        body.push_str(&fmt_f64(*l));
        body.push('\t');
        body.push_str(&fmt_f64(*v));
        body.push('\n');
    }
    body
}

struct SpectralSummary {
    temperature_c: f64,
    fwhm_signal_nm: f64,
    fwhm_idler_nm: f64,
    schmidt_purity: f64,
    schmidt_number: f64,
    hom_overlap: f64,
}

fn spectral_summary(config: &RunConfig, out: &OutputDir) -> Result<SpectralSummary> {
    let crystal = config.crystal_spec()?;
    let js = compute_jsa(&config.pump_spec(), &crystal, &config.grid_spec())?;
    let ms = marginal_spectrum(&js, Arm::Signal);
    let mi = marginal_spectrum(&js, Arm::Idler);
    out.write("marginal_signal.tsv", &spectrum_file(&ms))?;
    out.write("marginal_idler.tsv", &spectrum_file(&mi))?;
    let s = schmidt_values(&js);
    let purity = schmidt_purity(&s);
    Ok(SpectralSummary {
        temperature_c: crystal.temperature_c,
        fwhm_signal_nm: fwhm(&ms)?,
        fwhm_idler_nm: fwhm(&mi)?,
        schmidt_purity: purity,
        schmidt_number: 1.0 / purity,
        hom_overlap: hom_visibility(&js)?,
    })
}

/// Marginal spectra plus the derived scalar summary.
fn spectrum(config: &RunConfig, out: &OutputDir) -> Result<()> {
    let summary = spectral_summary(config, out)?;
    let mut body = String::new();
    body.push_str(&format!("crystal_temperature_c = {}\n", fmt_f64(summary.temperature_c)));
    body.push_str(&format!("fwhm_signal_nm = {}\n", fmt_f64(summary.fwhm_signal_nm)));
    body.push_str(&format!("fwhm_idler_nm = {}\n", fmt_f64(summary.fwhm_idler_nm)));
    body.push_str(&format!("schmidt_purity = {}\n", fmt_f64(summary.schmidt_purity)));
    body.push_str(&format!("schmidt_number = {}\n", fmt_f64(summary.schmidt_number)));
    body.push_str(&format!("hom_overlap = {}\n", fmt_f64(summary.hom_overlap)));
    out.write("spectrum_summary.txt", &body)?;
    Ok(())
}

fn configured_state(config: &RunConfig) -> Result<TwoQubitState> {
    let ideal = sagnac_state(&config.sagnac_params())?;
    Ok(mix_with_white_noise(&ideal, config.state.noise_v)?)
}

fn sweep_angles(step_deg: f64) -> Vec<f64> {
    let n = (360.0 / step_deg).floor() as usize;
    (0..n).map(|k| k as f64 * step_deg).collect()
}

fn angle_token(angle: f64) -> String {
    if angle == angle.trunc() {
        format!("{}", angle as i64)
    } else {
        fmt_f64(angle).replace('.', "p").replace('-', "m")
    }
}

fn count_file(records: &[CountRecord], with_angles: bool) -> String {
    let mut body = String::new();
    if with_angles {
        body.push_str(
            "theta1_deg\ttheta2_deg\tsingles_1\tsingles_2\tcoincidences\tcoincidence_err\taccidentals_estimate\tintegration_time_s\n",
        );
    } else {
        body.push_str(
            "setting\tsingles_1\tsingles_2\tcoincidences\tcoincidence_err\taccidentals_estimate\tintegration_time_s\n",
        );
    }
    for rec in records {
        match &rec.setting {
            SettingId::Polarizers { theta1_deg, theta2_deg } => {
                body.push_str(&fmt_f64(*theta1_deg));
                body.push('\t');
                body.push_str(&fmt_f64(*theta2_deg));
            }
            SettingId::Projector { label } => body.push_str(label),
        }
        for value in [
            rec.singles_1,
            rec.singles_2,
            rec.coincidences,
            count_error(rec.coincidences),
            rec.accidentals_estimate,
            rec.integration_time_s,
        ] {
            body.push('\t');
            body.push_str(&fmt_f64(value));
        }
        body.push('\n');
    }
    body
}

/// Polarizer-2 sweeps, one file per configured polarizer-1 angle. Scan i
/// draws from the fringe stream seed plus i.
fn fringe(config: &RunConfig, out: &OutputDir) -> Result<()> {
    fringe_files(config, out)?;
    Ok(())
}

fn fringe_files(config: &RunConfig, out: &OutputDir) -> Result<Vec<(f64, Vec<CountRecord>)>> {
    let state = configured_state(config)?;
    let source = config.source_model();
    let statistics = parse_statistics(&config.fringe.statistics)?;
    let sweep = sweep_angles(config.fringe.step_deg);
    let base_seed = config.stream_seed("fringe");
    let mut scans = Vec::new();
    for (i, &theta1) in config.fringe.theta1_deg.iter().enumerate() {
        let records = simulate_fringe_scan(
            &state,
            theta1,
            &sweep,
            &source,
            base_seed.wrapping_add(i as u64),
            statistics,
        )?;
        out.write(&format!("fringe_theta1_{}.tsv", angle_token(theta1)), &count_file(&records, true))?;
        scans.push((theta1, records));
    }
    Ok(scans)
}

fn chsh_angles(config: &RunConfig) -> (f64, f64, f64, f64) {
    match config.chsh.preset.as_str() {
        "psi-plus" => CHSH_PRESET_PSI_PLUS,
        "psi-minus" => CHSH_PRESET_PSI_MINUS,
        _ => {
            let [a, a2, b, b2] = config.chsh.angles_deg;
            (a, a2, b, b2)
        }
    }
}

/// Correlation test at two settings per arm; prints S and writes the
/// correlator breakdown.
fn chsh(config: &RunConfig, out: &OutputDir) -> Result<()> {
    let s = chsh_value(config, out)?;
    println!("S = {}", fmt_f64(s));
    Ok(())
}

fn chsh_value(config: &RunConfig, out: &OutputDir) -> Result<f64> {
    let state = configured_state(config)?;
    let (a, a2, b, b2) = chsh_angles(config);
    let s = chsh_s(&state, a, a2, b, b2);
    let mut body = String::new();
    body.push_str(&format!("preset = {}\n", config.chsh.preset));
    for (name, angle) in [("a_deg", a), ("a2_deg", a2), ("b_deg", b), ("b2_deg", b2)] {
        body.push_str(&format!("{name} = {}\n", fmt_f64(angle)));
    }
    for (name, t1, t2) in [
        ("E_a_b", a, b),
        ("E_a_b2", a, b2),
        ("E_a2_b", a2, b),
        ("E_a2_b2", a2, b2),
    ] {
        body.push_str(&format!("{name} = {}\n", fmt_f64(correlation(&state, t1, t2))));
    }
    body.push_str(&format!("S = {}\n", fmt_f64(s)));
    out.write("chsh.txt", &body)?;
    Ok(s)
}

/// Tomographic count simulation over the configured projector set.
fn tomo_sim(config: &RunConfig, out: &OutputDir) -> Result<()> {
    let state = configured_state(config)?;
    let projectors = ProjectorSet::by_name(&config.tomography.projectors)
        .ok_or_else(|| anyhow!("unknown projector set {}", config.tomography.projectors))?;
    let statistics = parse_statistics(&config.tomography.statistics)?;
    let records = simulate_tomography(
        &state,
        &projectors,
        &config.source_model(),
        config.stream_seed("tomo-sim"),
        statistics,
    )?;
    out.write("tomo_counts.tsv", &count_file(&records, false))?;
    Ok(())
}

fn parse_count_file(text: &str) -> Result<Vec<CountRecord>> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("setting\t") {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            bail!("line {}: expected 7 tab-separated fields, got {}", lineno + 1, fields.len());
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse::<f64>()
                .with_context(|| format!("line {}: field {} is not a number", lineno + 1, k + 1))
        };
        records.push(CountRecord {
            setting: SettingId::Projector { label: fields[0].to_string() },
            singles_1: num(1)?,
            singles_2: num(2)?,
            coincidences: num(3)?,
            // field 4 is the derived count error; recomputed on demand
            accidentals_estimate: num(5)?,
            integration_time_s: num(6)?,
        });
    }
    if records.is_empty() {
        bail!("no count records found");
    }
    Ok(records)
}

struct FitSummary {
    fidelity: f64,
    fidelity_std: f64,
    concurrence: f64,
    result: TomographyResult,
}

/// Maximum-likelihood reconstruction from a simulated count file, with
/// Monte-Carlo resampling for the fidelity uncertainty.
fn tomo_fit(config: &RunConfig, out: &OutputDir) -> Result<FitSummary> {
    let counts_path = out.path("tomo_counts.tsv");
    let text = read_to_string(&counts_path)
        .context("tomo-fit reads the counts written by tomo-sim; run tomo-sim first")?;
    let records = parse_count_file(&text)?;
    let projectors = ProjectorSet::by_name(&config.tomography.projectors)
        .ok_or_else(|| anyhow!("unknown projector set {}", config.tomography.projectors))?;
    let options = MleOptions::default();
    let mut result = mle_reconstruct(&records, &projectors, &options)?;
    let target = sagnac_ket(&config.sagnac_params())?;
    let statistics = parse_statistics(&config.tomography.statistics)?;
    let (fidelity, fidelity_std) = monte_carlo_fidelity(
        &records,
        &projectors,
        &target,
        config.tomography.mc_trials,
        config.stream_seed("tomo-fit"),
        statistics,
        &options,
    )?;
    result.fidelity_vs_target = Some(fidelity);
    result.fidelity_std = Some(fidelity_std);
    let c = concurrence(&result.rho);

    let mut body = String::new();
    body.push_str(&format!("projectors = {}\n", config.tomography.projectors));
    body.push_str(&format!("records = {}\n", records.len()));
    body.push_str(&format!("converged = {}\n", result.converged));
    body.push_str(&format!("iterations = {}\n", result.iterations));
    body.push_str(&format!("log_likelihood = {}\n", fmt_f64(result.log_likelihood)));
    body.push_str(&format!("fidelity_vs_target = {}\n", fmt_f64(fidelity)));
    body.push_str(&format!("fidelity_std = {}\n", fmt_f64(fidelity_std)));
    body.push_str(&format!("concurrence = {}\n", fmt_f64(c)));
    body.push_str(&format!("mc_trials = {}\n", config.tomography.mc_trials));
    body.push_str(&matrix_blocks(&result.rho.matrix()));
    out.write("tomo_fit.txt", &body)?;
    Ok(FitSummary { fidelity, fidelity_std, concurrence: c, result })
}

/// 4x4 real and imaginary blocks, one row per line.
fn matrix_blocks(m: &Matrix4<biphoton::Complex64>) -> String {
    let mut body = String::new();
    for (key, part) in [("rho_real", false), ("rho_imag", true)] {
        for row in 0..4 {
            body.push_str(&format!("{key}_{row} ="));
            for col in 0..4 {
                let z = m[(row, col)];
                body.push(' ');
                body.push_str(&fmt_f64(if part { z.im } else { z.re }));
            }
            body.push('\n');
        }
    }
    body
}

/// Full pipeline: joint spectrum, marginals, fringes, correlation test,
/// tomography, and one summary of the headline numbers.
fn report(config: &RunConfig, out: &OutputDir) -> Result<()> {
    jsi(config, out)?;
    let summary = spectral_summary(config, out)?;
    let scans = fringe_files(config, out)?;
    let s = chsh_value(config, out)?;
    tomo_sim(config, out)?;
    let fit = tomo_fit(config, out)?;

    let mut body = String::new();
    body.push_str(&format!("crystal_temperature_c = {}\n", fmt_f64(summary.temperature_c)));
    body.push_str(&format!("fwhm_signal_nm = {}\n", fmt_f64(summary.fwhm_signal_nm)));
    body.push_str(&format!("fwhm_idler_nm = {}\n", fmt_f64(summary.fwhm_idler_nm)));
    body.push_str(&format!("schmidt_purity = {}\n", fmt_f64(summary.schmidt_purity)));
    body.push_str(&format!("schmidt_number = {}\n", fmt_f64(summary.schmidt_number)));
    body.push_str(&format!("hom_overlap = {}\n", fmt_f64(summary.hom_overlap)));
    for (theta1, records) in &scans {
        // background-subtracted sinusoid fit, per fixed polarizer-1 angle
        let curve: Vec<(f64, f64)> = records
            .iter()
            .map(|r| match r.setting {
                SettingId::Polarizers { theta2_deg, .. } => {
                    (theta2_deg, r.coincidences - r.accidentals_estimate)
                }
                _ => unreachable!("fringe scans carry polarizer settings"),
            })
            .collect();
        let v = visibility(&curve)?;
        body.push_str(&format!(
            "visibility_theta1_{} = {}\n",
            angle_token(*theta1),
            fmt_f64(v)
        ));
    }
    body.push_str(&format!("chsh_s = {}\n", fmt_f64(s)));
    body.push_str(&format!("fidelity_vs_target = {}\n", fmt_f64(fit.fidelity)));
    body.push_str(&format!("fidelity_std = {}\n", fmt_f64(fit.fidelity_std)));
    body.push_str(&format!("concurrence = {}\n", fmt_f64(fit.concurrence)));
    body.push_str(&format!("tomography_converged = {}\n", fit.result.converged));
    body.push_str(&format!(
        "overall_efficiency = {}\n",
        fmt_f64(overall_efficiency(&config.efficiency_budget()?))
    ));
    let peak = expected_coincidence_rate(
        &configured_state(config)?,
        &AnalyzerSetting { theta1_deg: 45.0, theta2_deg: 45.0 },
        &config.source_model(),
    )?;
    body.push_str(&format!(
        "expected_peak_coincidence_cps = {}\n",
        fmt_f64(peak.coincidence_cps)
    ));
    out.write("report.txt", &body)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_angle_layout() {
        let s = sweep_angles(10.0);
        assert_eq!(s.len(), 36);
        assert_eq!(s[0], 0.0);
        assert_eq!(s[35], 350.0);
    }

    #[test]
    fn angle_tokens_are_filename_safe() {
        assert_eq!(angle_token(45.0), "45");
        assert_eq!(angle_token(22.5), "22p5");
        assert_eq!(angle_token(-22.5), "m22p5");
        assert_eq!(angle_token(0.0), "0");
    }

    #[test]
    fn count_file_round_trip() {
        let records = vec![CountRecord {
            setting: SettingId::Projector { label: "HV".to_string() },
            singles_1: 24734.0,
            singles_2: 24810.0,
            coincidences: 7000.0,
            accidentals_estimate: 0.61,
            integration_time_s: 1.0,
        }];
        let text = count_file(&records, false);
        let back = parse_count_file(&text).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn malformed_count_lines_are_rejected() {
        assert!(parse_count_file("HV\t1\t2\t3\n").is_err());
        assert!(parse_count_file("HV\t1\t2\tx\t4\t5\t6\n").is_err());
        assert!(parse_count_file("").is_err());
    }
}
