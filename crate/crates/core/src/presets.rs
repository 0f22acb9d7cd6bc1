//! Scenario presets. Each preset runs one canned scenario of
//! the default InGaAs quantum-dot medium and writes plottable data files plus
//! a manifest.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::analysis;
use crate::bath::CorrelationTable;
use crate::config::{parse_config, SimConfig};
use crate::error::{Result, SimError};
use crate::output::{self, Manifest};
use crate::propagation::{run_simulation, SimOutput};
use crate::rates::{compute_kernels_cached, assemble_rates_unchecked, PhiFunctions};


#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Phonon scattering-rate maps over detuning and time.
    Fig2,
    /// Pulse-area evolution with and without the bath at several temperatures.
    Fig3,
    /// Coherence spectra (absorption/dispersion) at several times.
    Fig4,
    /// Exciton population versus input pulse area.
    Fig5,
    /// 2 pi propagation: envelope normalized to the input peak.
    Fig6,
    /// 2 pi propagation: envelopes individually normalized (delay view).
    Fig7,
    /// Output pulse for several inhomogeneous widths.
    Fig8,
    /// Output pulse for several bath temperatures.
    Fig9,
    /// Output pulse for several electron-phonon couplings.
    Fig10,
    /// 4 pi pulse breakup, full space-time envelope.
    Fig11,
}

pub const ALL_PRESETS: [Preset; 10] = [
    Preset::Fig2,
    Preset::Fig3,
    Preset::Fig4,
    Preset::Fig5,
    Preset::Fig6,
    Preset::Fig7,
    Preset::Fig8,
    Preset::Fig9,
    Preset::Fig10,
    Preset::Fig11,
];

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::Fig10 => "fig10",
            Preset::Fig11 => "fig11",
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Preset::Fig2 => "phonon scattering-rate maps over (detuning, time)",
            Preset::Fig3 => "pulse-area evolution vs distance at T = off/4.2/10/20 K",
            Preset::Fig4 => "coherence spectra across detuning at several times",
            Preset::Fig5 => "exciton population vs input pulse area",
            Preset::Fig6 => "2pi propagation, envelopes normalized to the input peak",
            Preset::Fig7 => "2pi propagation, envelopes individually normalized",
            Preset::Fig8 => "output pulse shape for sigma/gamma_n = 10/15/20",
            Preset::Fig9 => "output pulse shape at T = off/4.2/10/20 K",
            Preset::Fig10 => "output pulse shape for alpha_p = 0.03/0.06/0.12 ps^2",
            Preset::Fig11 => "4pi pulse breakup, space-time envelope",
        }
    }
}

impl FromStr for Preset {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        ALL_PRESETS
            .iter()
            .find(|p| p.name() == s)
            .copied()
            .ok_or_else(|| {
                let names: Vec<&str> = ALL_PRESETS.iter().map(|p| p.name()).collect();
                SimError::Config(format!(
                    "unknown preset '{s}'; available: {}",
                    names.join(", ")
                ))
            })
    }
}

fn base_config(extra: &str) -> SimConfig {
    parse_config(extra).expect("preset configs are valid")
}

/// Medium length placing the output face at zeta eta / gamma_n = 50, the
/// distance the propagation figures are plotted at.
fn length_for_zeta_eta(config: &SimConfig, zeta_eta: f64) -> Result<f64> {
    let sim = config.resolve()?;
    Ok(zeta_eta / sim.eta)
}

/// The configuration a preset runs (the propagation presets; fig2/4/5 build
/// scans on top of a base config).
pub fn preset_config(preset: Preset) -> Result<SimConfig> {
    let mut config = match preset {
        Preset::Fig2 => base_config(""),
        Preset::Fig3 => base_config(""),
        Preset::Fig4 => base_config(
            "[ensemble]\nwindow_rad_per_ps = 15.0\nn_nodes = 301\n",
        ),
        Preset::Fig5 => base_config("[toggles]\nsingle_qd = true\n"),
        Preset::Fig6 | Preset::Fig7 => base_config(""),
        Preset::Fig8 => base_config(""),
        Preset::Fig9 => base_config(""),
        Preset::Fig10 => base_config(""),
        Preset::Fig11 => base_config("[pulse]\narea_pi = 4.0\n[grid]\ntau_max_ps = 160.0\n"),
    };
    match preset {
        Preset::Fig6 | Preset::Fig7 | Preset::Fig8 | Preset::Fig9 | Preset::Fig10 => {
            config.medium.length_mm = length_for_zeta_eta(&config, 50.0)?;
        }
        Preset::Fig11 => {
            config.medium.length_mm = length_for_zeta_eta(&config, 100.0)?;
        }
        _ => {}
    }
    Ok(config)
}

struct Writer {
    dir: PathBuf,
    config_hash: String,
    files: Vec<PathBuf>,
}

impl Writer {
    fn new(dir: &Path, config_hash: String) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Writer {
            dir: dir.to_path_buf(),
            config_hash,
            files: Vec::new(),
        })
    }

    fn table(
        &mut self,
        name: &str,
        title: &str,
        comments: &[String],
        columns: &[(&str, &[f64])],
    ) -> Result<()> {
        let path = self.dir.join(name);
        output::write_table(&path, title, &self.config_hash, comments, columns)?;
        self.files.push(path);
        Ok(())
    }

    fn heatmap(
        &mut self,
        name: &str,
        title: &str,
        comments: &[String],
        row_axis: (&str, &[f64]),
        col_axis: (&str, &[f64]),
        value_name: &str,
        values: &[f64],
    ) -> Result<()> {
        let path = self.dir.join(name);
        output::write_heatmap(
            &path,
            title,
            &self.config_hash,
            comments,
            row_axis,
            col_axis,
            value_name,
            values,
        )?;
        self.files.push(path);
        Ok(())
    }
}

fn write_slice_metrics(w: &mut Writer, out: &SimOutput, eta: f64) -> Result<()> {
    let zeta: Vec<f64> = out.slices.iter().map(|s| s.zeta).collect();
    let zeta_eta: Vec<f64> = zeta.iter().map(|z| z * eta).collect();
    let area: Vec<f64> = out.slices.iter().map(|s| s.area).collect();
    let area_signed: Vec<f64> = out.slices.iter().map(|s| s.area_signed).collect();
    let peak: Vec<f64> = out.slices.iter().map(|s| s.peak).collect();
    let peak_time: Vec<f64> = out.slices.iter().map(|s| s.peak_time).collect();
    let energy: Vec<f64> = out.slices.iter().map(|s| s.energy).collect();
    w.table(
        "slices.dat",
        "per-slice pulse metrics",
        &[],
        &[
            ("zeta_mm", &zeta),
            ("zeta_eta", &zeta_eta),
            ("area_rad", &area),
            ("area_signed_rad", &area_signed),
            ("peak_rad_per_ps", &peak),
            ("peak_time_ps", &peak_time),
            ("energy_rad2_per_ps", &energy),
        ],
    )
}

fn write_envelope_heatmap(w: &mut Writer, out: &SimOutput, stride: usize) -> Result<()> {
    let n_tau = out.grid.n_tau();
    let rows: Vec<usize> = (0..out.grid.n_zeta())
        .filter(|i| i % stride == 0 || *i == out.grid.n_zeta() - 1)
        .collect();
    let zeta: Vec<f64> = rows.iter().map(|&i| out.grid.zeta_axis[i]).collect();
    let mut values = Vec::with_capacity(rows.len() * n_tau);
    for &i in &rows {
        values.extend(out.grid.row(i).iter().map(|v| v.norm()));
    }
    w.heatmap(
        "envelope.dat",
        "envelope magnitude |Omega(zeta, tau)|",
        &[format!("slice stride: {stride}")],
        ("zeta_mm", &zeta),
        ("tau_ps", &out.grid.tau_axis),
        "abs_omega_rad_per_ps",
        &values,
    )
}

/// Profiles at zeta eta / gamma_n = 0, 10, ..., 50 in one file per distance.
fn write_profiles(
    w: &mut Writer,
    out: &SimOutput,
    eta: f64,
    normalize_to_input: bool,
) -> Result<()> {
    let input_peak = out.slices[0].peak;
    for k in 0..=5 {
        let target = 10.0 * k as f64 / eta;
        let i = out
            .grid
            .zeta_axis
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
            .unwrap();
        let row = out.grid.row(i);
        let peak = out.slices[i].peak;
        let norm = if normalize_to_input {
            input_peak
        } else if peak > 0.0 {
            peak
        } else {
            1.0
        };
        let values: Vec<f64> = row.iter().map(|v| v.norm() / norm).collect();
        w.table(
            &format!("profile_zeta_eta_{:03}.dat", 10 * k),
            "envelope profile",
            &[format!(
                "zeta = {:.6} mm (zeta eta = {:.2})",
                out.grid.zeta_axis[i],
                out.grid.zeta_axis[i] * eta
            )],
            &[("tau_ps", &out.grid.tau_axis), ("abs_omega_norm", &values)],
        )?;
    }
    Ok(())
}

fn finish(w: Writer, start: Instant, validity: f64, warnings: Vec<String>) -> Result<Vec<PathBuf>> {
    let manifest = Manifest {
        config_hash: w.config_hash.clone(),
        wall_seconds: start.elapsed().as_secs_f64(),
        validity_metric: validity,
        warnings,
        files: w.files.clone(),
    };
    let mut files = w.files;
    files.push(manifest.write(&w.dir)?);
    Ok(files)
}

/// Run a preset and write its data files under `out_dir/<preset>/`.
pub fn run_preset(preset: Preset, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    let dir = out_dir.join(preset.name());
    match preset {
        Preset::Fig2 => run_fig2(&dir, start),
        Preset::Fig3 => run_fig3(&dir, start),
        Preset::Fig4 => run_fig4(&dir, start),
        Preset::Fig5 => run_fig5(&dir, start),
        Preset::Fig6 => run_propagation_preset(Preset::Fig6, &dir, start, true),
        Preset::Fig7 => run_propagation_preset(Preset::Fig7, &dir, start, false),
        Preset::Fig8 => run_fig8(&dir, start),
        Preset::Fig9 => run_fig9(&dir, start),
        Preset::Fig10 => run_fig10(&dir, start),
        Preset::Fig11 => run_propagation_preset(Preset::Fig11, &dir, start, true),
    }
}

fn run_fig2(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let config = preset_config(Preset::Fig2)?;
    let sim = config.resolve()?;
    let mut w = Writer::new(dir, config.hash())?;

    // rates of a dot at zeta = 0 under the input sech, over detuning x time
    let n_delta = 301;
    let n_tau = 401;
    let deltas: Vec<f64> = (0..n_delta)
        .map(|i| -15.0 + 30.0 * i as f64 / (n_delta - 1) as f64)
        .collect();
    let taus: Vec<f64> = (0..n_tau)
        .map(|i| 20.0 + 40.0 * i as f64 / (n_tau - 1) as f64)
        .collect();
    let eta_max = crate::rates::generalized_rabi(1.2 * sim.omega0, 15.0);
    let corr = CorrelationTable::build_resolving(&sim.bath, eta_max)?;
    let funcs = PhiFunctions::new(&corr);
    let mean_b = corr.mean_b;

    let mut maps: [Vec<f64>; 4] = Default::default();
    let rows: Vec<[Vec<f64>; 4]> = deltas
        .par_iter()
        .map(|&delta| {
            let mut row: [Vec<f64>; 4] = Default::default();
            for r in &mut row {
                r.reserve(n_tau);
            }
            for &tau in &taus {
                let omega = num_complex::Complex64::new(
                    sim.omega0 / ((tau - sim.tau_c) / sim.tau0).cosh(),
                    0.0,
                );
                let kernels = compute_kernels_cached(mean_b * omega.norm(), delta, &funcs);
                let rates = assemble_rates_unchecked(omega, &kernels, mean_b);
                row[0].push(rates.gamma_plus);
                row[1].push(rates.gamma_minus);
                row[2].push(rates.gamma_cd);
                row[3].push(rates.delta_pm);
            }
            row
        })
        .collect();
    for row in rows {
        for (map, r) in maps.iter_mut().zip(row) {
            map.extend(r);
        }
    }
    for (name, value_name, map) in [
        ("rate_sigma_plus.dat", "gamma_sigma_plus_rad_per_ps", &maps[0]),
        ("rate_sigma_minus.dat", "gamma_sigma_minus_rad_per_ps", &maps[1]),
        ("rate_cd.dat", "gamma_cd_rad_per_ps", &maps[2]),
        ("rate_detuning_shift.dat", "delta_pm_rad_per_ps", &maps[3]),
    ] {
        w.heatmap(
            name,
            "phonon scattering rate map at zeta = 0",
            &[format!("<B> = {mean_b:.6}")],
            ("delta_rad_per_ps", &deltas),
            ("tau_ps", &taus),
            value_name,
            map,
        )?;
    }
    let validity = corr.validity_metric(sim.omega0);
    finish(w, start, validity, Vec::new())
}

fn run_fig3(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let base = preset_config(Preset::Fig3)?;
    let mut w = Writer::new(dir, base.hash())?;
    let mut validity: f64 = 0.0;
    let mut warnings = Vec::new();
    for (label, temp) in [
        ("phonons_off", None),
        ("T4p2", Some(4.2)),
        ("T10", Some(10.0)),
        ("T20", Some(20.0)),
    ] {
        let mut config = base.clone();
        match temp {
            None => config.toggles.phonons = false,
            Some(t) => config.bath.temperature_k = t,
        }
        let out = run_simulation(&config.resolve()?)?;
        validity = validity.max(out.validity_metric);
        warnings.extend(out.warnings.iter().cloned());
        let zeta: Vec<f64> = out.slices.iter().map(|s| s.zeta).collect();
        let zeta_eta: Vec<f64> = zeta.iter().map(|z| z * out.eta).collect();
        let area: Vec<f64> = out.slices.iter().map(|s| s.area).collect();
        let area_pi: Vec<f64> = area.iter().map(|a| a / std::f64::consts::PI).collect();
        w.table(
            &format!("area_{label}.dat"),
            "pulse area vs distance",
            &[format!("<B> = {:.6}", out.mean_b)],
            &[
                ("zeta_mm", &zeta),
                ("zeta_eta", &zeta_eta),
                ("area_rad", &area),
                ("area_pi", &area_pi),
            ],
        )?;
    }
    finish(w, start, validity, warnings)
}

fn run_fig4(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let config = preset_config(Preset::Fig4)?;
    let sim = config.resolve()?;
    let mut w = Writer::new(dir, config.hash())?;
    let times = [30.0, 40.0, 50.0, 60.0, 70.0, 80.0];
    let scan = analysis::coherence_spectrum_scan(&times, &sim)?;
    for (k, &t) in times.iter().enumerate() {
        let re: Vec<f64> = scan.rho12[k].iter().map(|c| c.re).collect();
        let im: Vec<f64> = scan.rho12[k].iter().map(|c| c.im).collect();
        w.table(
            &format!("coherence_tau_{:03}.dat", t as i64),
            "coherence across detuning at zeta = 0",
            &[format!("gamma_n tau = {t}")],
            &[
                ("delta_rad_per_ps", &scan.deltas),
                ("re_rho12", &re),
                ("im_rho12", &im),
            ],
        )?;
    }
    finish(w, start, 0.0, Vec::new())
}

fn run_fig5(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let config = preset_config(Preset::Fig5)?;
    let sim = config.resolve()?;
    let mut w = Writer::new(dir, config.hash())?;
    let areas: Vec<f64> = (0..=240)
        .map(|i| 6.0 * std::f64::consts::PI * i as f64 / 240.0)
        .collect();
    let curve = analysis::population_vs_area_scan(&areas, 60.0, &sim)?;
    let area_pi: Vec<f64> = curve.iter().map(|p| p.0 / std::f64::consts::PI).collect();
    let rho11: Vec<f64> = curve.iter().map(|p| p.1).collect();
    w.table(
        "population_vs_area.dat",
        "exciton population at gamma_n tau = 60 vs input area",
        &["observation_time_ps: 60".into()],
        &[("area_pi", &area_pi), ("rho11", &rho11)],
    )?;
    finish(w, start, 0.0, Vec::new())
}

fn run_propagation_preset(
    preset: Preset,
    dir: &Path,
    start: Instant,
    normalize_to_input: bool,
) -> Result<Vec<PathBuf>> {
    let config = preset_config(preset)?;
    let sim = config.resolve()?;
    let out = run_simulation(&sim)?;
    let mut w = Writer::new(dir, config.hash())?;
    write_slice_metrics(&mut w, &out, out.eta)?;
    write_envelope_heatmap(&mut w, &out, config.output.slice_stride)?;
    write_profiles(&mut w, &out, out.eta, normalize_to_input)?;
    finish(w, start, out.validity_metric, out.warnings.clone())
}

fn output_profile_table(
    w: &mut Writer,
    label: &str,
    out: &SimOutput,
) -> Result<()> {
    let row = out.grid.output_row();
    let peak = out.output_record().peak.max(1e-300);
    let values: Vec<f64> = row.iter().map(|v| v.norm() / peak).collect();
    let raw: Vec<f64> = row.iter().map(|v| v.norm()).collect();
    w.table(
        &format!("output_{label}.dat"),
        "output-face envelope",
        &[format!(
            "L = {:.6} mm, peak = {:.6e} rad/ps",
            out.grid.zeta_axis.last().unwrap(),
            out.output_record().peak
        )],
        &[
            ("tau_ps", &out.grid.tau_axis),
            ("abs_omega_norm", &values),
            ("abs_omega_rad_per_ps", &raw),
        ],
    )
}

fn run_fig8(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let base = preset_config(Preset::Fig8)?;
    let mut w = Writer::new(dir, base.hash())?;
    let mut validity: f64 = 0.0;
    for sigma in [10.0, 15.0, 20.0] {
        let mut config = base.clone();
        config.ensemble.fwhm_mev = None;
        config.ensemble.sigma_rad_per_ps = Some(sigma);
        let out = run_simulation(&config.resolve()?)?;
        validity = validity.max(out.validity_metric);
        output_profile_table(&mut w, &format!("sigma_{:02}", sigma as i64), &out)?;
    }
    finish(w, start, validity, Vec::new())
}

fn run_fig9(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let base = preset_config(Preset::Fig9)?;
    let mut w = Writer::new(dir, base.hash())?;
    let mut validity: f64 = 0.0;
    for (label, temp) in [
        ("phonons_off", None),
        ("T4p2", Some(4.2)),
        ("T10", Some(10.0)),
        ("T20", Some(20.0)),
    ] {
        let mut config = base.clone();
        match temp {
            None => config.toggles.phonons = false,
            Some(t) => config.bath.temperature_k = t,
        }
        let out = run_simulation(&config.resolve()?)?;
        validity = validity.max(out.validity_metric);
        output_profile_table(&mut w, label, &out)?;
    }
    finish(w, start, validity, Vec::new())
}

fn run_fig10(dir: &Path, start: Instant) -> Result<Vec<PathBuf>> {
    let base = preset_config(Preset::Fig10)?;
    let mut w = Writer::new(dir, base.hash())?;
    let mut validity: f64 = 0.0;
    for alpha_p in [0.03, 0.06, 0.12] {
        let mut config = base.clone();
        config.bath.alpha_p_ps2 = alpha_p;
        let out = run_simulation(&config.resolve()?)?;
        validity = validity.max(out.validity_metric);
        output_profile_table(&mut w, &format!("alpha_p_{:.2}", alpha_p), &out)?;
    }
    finish(w, start, validity, Vec::new())
}

/// Build the rate table described by a config and dump the binary cache.
pub fn dump_rate_table(config: &SimConfig, out_dir: &Path) -> Result<PathBuf> {
    let sim = config.resolve()?;
    if !sim.phonons {
        return Err(SimError::Config(
            "rates-table requires toggles.phonons = true".into(),
        ));
    }
    let (dmin, dmax) = sim.table_delta_range;
    let eta_max = crate::rates::generalized_rabi(sim.table_omega_max, dmin.abs().max(dmax.abs()));
    let corr = CorrelationTable::build_resolving(&sim.bath, eta_max)?;
    let table = crate::rates::RateTable::build(
        &corr,
        sim.table_omega_max,
        sim.table_delta_range,
        sim.table_resolution,
    )?;
    std::fs::create_dir_all(out_dir)?;
    let key = table.cache_key();
    let short: String = key[..8].iter().map(|b| format!("{b:02x}")).collect();
    let path = out_dir.join(format!("rate_table_{short}.qdrt"));
    let file = std::fs::File::create(&path)?;
    table.write_cache(std::io::BufWriter::new(file))?;
    Ok(path)
}
