//! `sitqd` -- self-induced transparency in a phonon-coupled quantum-dot
//! medium from the command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 4 hard violation of the polaron validity bound.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use sitqd::config::{parse_config, SimConfig};
use sitqd::error::SimError;
use sitqd::output::Manifest;
use sitqd::presets::{dump_rate_table, run_preset, Preset, ALL_PRESETS};
use sitqd::propagation::run_simulation;

#[derive(Parser)]
#[command(name = "sitqd", version, about = "Quantum-dot self-induced transparency simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (defaults to the available cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Force the phonon bath on or off, overriding the config.
    #[arg(long, value_parser = parse_on_off)]
    phonons: Option<bool>,
    /// Reserved: the simulator has no random number generator; accepted for
    /// interface stability.
    #[arg(long)]
    seedless: bool,
}

fn parse_on_off(s: &str) -> Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(format!("expected 'on' or 'off', got '{s}'")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation described by a config file.
    Run {
        config_file: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run a named scenario preset (fig2 .. fig11).
    Preset {
        name: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Build the phonon rate table for a config and dump its binary cache.
    RatesTable {
        config_file: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Parse and validate a config file without running anything.
    Validate { config_file: PathBuf },
}

fn load_config(path: &PathBuf) -> Result<SimConfig, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        SimError::Config(format!("cannot read config file {}: {e}", path.display()))
    })?;
    parse_config(&text)
}

fn setup_threads(common: &CommonOpts) -> Result<(), SimError> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| SimError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn apply_overrides(config: &mut SimConfig, common: &CommonOpts) {
    if let Some(phonons) = common.phonons {
        config.toggles.phonons = phonons;
    }
}

fn cmd_run(config_file: &PathBuf, common: &CommonOpts) -> Result<(), SimError> {
    setup_threads(common)?;
    let mut config = load_config(config_file)?;
    apply_overrides(&mut config, common);
    let sim = config.resolve()?;
    let start = Instant::now();
    let out = run_simulation(&sim)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }

    let dir = common.out.join("run");
    std::fs::create_dir_all(&dir)?;
    let hash = config.hash();
    let mut files = Vec::new();

    let zeta: Vec<f64> = out.slices.iter().map(|s| s.zeta).collect();
    let area: Vec<f64> = out.slices.iter().map(|s| s.area).collect();
    let area_signed: Vec<f64> = out.slices.iter().map(|s| s.area_signed).collect();
    let peak: Vec<f64> = out.slices.iter().map(|s| s.peak).collect();
    let peak_time: Vec<f64> = out.slices.iter().map(|s| s.peak_time).collect();
    let path = dir.join("slices.dat");
    sitqd::output::write_table(
        &path,
        "per-slice pulse metrics",
        &hash,
        &[],
        &[
            ("zeta_mm", &zeta),
            ("area_rad", &area),
            ("area_signed_rad", &area_signed),
            ("peak_rad_per_ps", &peak),
            ("peak_time_ps", &peak_time),
        ],
    )?;
    files.push(path);

    let stride = config.output.slice_stride;
    let rows: Vec<usize> = (0..out.grid.n_zeta())
        .filter(|i| i % stride == 0 || *i == out.grid.n_zeta() - 1)
        .collect();
    let zeta_sel: Vec<f64> = rows.iter().map(|&i| out.grid.zeta_axis[i]).collect();
    let mut values = Vec::with_capacity(rows.len() * out.grid.n_tau());
    for &i in &rows {
        values.extend(out.grid.row(i).iter().map(|v| v.norm()));
    }
    let path = dir.join("envelope.dat");
    sitqd::output::write_heatmap(
        &path,
        "envelope magnitude |Omega(zeta, tau)|",
        &hash,
        &[format!("slice stride: {stride}")],
        ("zeta_mm", &zeta_sel),
        ("tau_ps", &out.grid.tau_axis),
        "abs_omega_rad_per_ps",
        &values,
    )?;
    files.push(path);

    let manifest = Manifest {
        config_hash: hash,
        wall_seconds: start.elapsed().as_secs_f64(),
        validity_metric: out.validity_metric,
        warnings: out.warnings.clone(),
        files,
    };
    manifest.write(&dir)?;
    println!(
        "run complete: {} slices, transmitted area {:.4} pi, peak delay {:.2} ps",
        out.slices.len(),
        out.output_record().area / std::f64::consts::PI,
        out.output_record().peak_time - sim.tau_c
    );
    println!("outputs in {}", dir.display());
    Ok(())
}

fn cmd_preset(name: &str, common: &CommonOpts) -> Result<(), SimError> {
    setup_threads(common)?;
    let preset = Preset::from_str(name)?;
    let files = run_preset(preset, &common.out)?;
    println!("{}: {}", preset.name(), preset.describe());
    for f in &files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}

fn cmd_rates_table(config_file: &PathBuf, common: &CommonOpts) -> Result<(), SimError> {
    setup_threads(common)?;
    let mut config = load_config(config_file)?;
    apply_overrides(&mut config, common);
    let path = dump_rate_table(&config, &common.out)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_validate(config_file: &PathBuf) -> Result<(), SimError> {
    let config = load_config(config_file)?;
    let sim = config.resolve()?;
    println!("config ok (hash {})", config.hash());
    println!(
        "  sigma = {:.4} rad/ps, eta = {:.3} mm^-1 rad/ps, alpha = {:.3} mm^-1",
        sim.sigma, sim.eta, sim.alpha
    );
    println!(
        "  pulse area = {:.3} pi, Omega_0 = {:.4} rad/ps, ensemble nodes = {}",
        sim.theta0 / std::f64::consts::PI,
        sim.omega0,
        sim.ensemble.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config_file, common } => cmd_run(config_file, common),
        Command::Preset { name, common } => cmd_preset(name, common),
        Command::RatesTable { config_file, common } => cmd_rates_table(config_file, common),
        Command::Validate { config_file } => cmd_validate(config_file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let SimError::Config(_) = e {
                if e.to_string().contains("unknown preset") {
                    let names: Vec<&str> = ALL_PRESETS.iter().map(|p| p.name()).collect();
                    eprintln!("usage: sitqd preset <{}>", names.join("|"));
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
