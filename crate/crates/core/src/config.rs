//! Run configuration: TOML grammar, validation, defaults and the resolved
//! internal-unit parameter set.
//!
//! Config files use the units experiments are quoted in (meV, eV, K, ps, mm);
//! everything is converted to internal units (rad/ps, ps, mm) exactly once,
//! here. An empty document is a complete, valid configuration reproducing
//! the default InGaAs quantum-dot scenario.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bath::PhononBathParams;
use crate::bloch::RelaxationParams;
use crate::ensemble::DetuningEnsemble;
use crate::error::{Result, SimError};
use crate::units;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BathConfig {
    /// Electron-phonon coupling, ps^2.
    pub alpha_p_ps2: f64,
    /// Cutoff frequency, meV.
    pub omega_b_mev: f64,
    /// Bath temperature, K.
    pub temperature_k: f64,
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig {
            alpha_p_ps2: 0.03,
            omega_b_mev: 1.0,
            temperature_k: 4.2,
        }
    }
}

/// Radiative decay and pure dephasing. The default 5e-4 rad/ps corresponds
/// to a 2 ns lifetime; the often-quoted 2 ueV would instead be
/// 3.04e-3 rad/ps. Both are exposed so either convention can be configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RelaxConfig {
    pub gamma_per_ps: f64,
    pub gamma_d_per_ps: f64,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig {
            gamma_per_ps: 5e-4,
            gamma_d_per_ps: 5e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quadrature {
    /// Uniform nodes on a window around the distribution center, weighted by
    /// g(Delta). Production default for sharp-line media.
    Windowed,
    /// Gauss-Hermite rule over the full Gaussian.
    GaussHermite,
    /// Uniform nodes across +-6 sigma (validation fallback).
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleConfig {
    /// Inhomogeneous FWHM, meV. Mutually exclusive with `sigma_rad_per_ps`.
    pub fwhm_mev: Option<f64>,
    /// Gaussian standard deviation, rad/ps.
    pub sigma_rad_per_ps: Option<f64>,
    /// Center detuning Delta_c, rad/ps.
    pub delta_c: f64,
    pub quadrature: Quadrature,
    /// Node count; derived from the window and time grid when absent.
    pub n_nodes: Option<usize>,
    /// Window half-width for the windowed rule, rad/ps; derived when absent.
    pub window_rad_per_ps: Option<f64>,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            fwhm_mev: Some(23.5),
            sigma_rad_per_ps: None,
            delta_c: 0.0,
            quadrature: Quadrature::Windowed,
            n_nodes: None,
            window_rad_per_ps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MediumConfig {
    /// Dot volume density, m^-3.
    pub density_per_m3: f64,
    /// Medium length, mm.
    pub length_mm: f64,
    /// Central transition energy, eV.
    pub transition_energy_ev: f64,
}

impl Default for MediumConfig {
    fn default() -> Self {
        MediumConfig {
            density_per_m3: 5e20,
            length_mm: 1.0,
            transition_energy_ev: 1.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    /// Input pulse area in units of pi.
    pub area_pi: f64,
    /// Sech width tau_0, ps.
    pub tau0_ps: f64,
    /// Pulse center tau_c, ps.
    pub tau_c_ps: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        PulseConfig {
            area_pi: 2.0,
            tau0_ps: 6.373,
            tau_c_ps: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Retarded-time step, ps; tau0/100 when absent.
    pub dtau_ps: Option<f64>,
    /// Retarded-time window [0, tau_max], ps.
    pub tau_max_ps: f64,
    /// Space step chosen so alpha * dzeta <= this.
    pub alpha_dzeta: f64,
    /// Explicit space step, mm; overrides `alpha_dzeta` when set.
    pub dzeta_mm: Option<f64>,
    /// Rate-table resolution along the Omega_R axis.
    pub table_omega_nodes: usize,
    /// Rate-table resolution along the Delta axis; derived when absent.
    pub table_delta_nodes: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            dtau_ps: None,
            tau_max_ps: 120.0,
            alpha_dzeta: 0.05,
            dzeta_mm: None,
            table_omega_nodes: 201,
            table_delta_nodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TogglesConfig {
    /// Include the phonon bath (rates and <B> dressing).
    pub phonons: bool,
    /// Evolve a single detuning class at Delta_c instead of the ensemble.
    pub single_qd: bool,
}

impl Default for TogglesConfig {
    fn default() -> Self {
        TogglesConfig {
            phonons: true,
            single_qd: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: String,
    /// Keep every n-th spatial slice when writing the space-time grid.
    pub slice_stride: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: "out".into(),
            slice_stride: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub bath: BathConfig,
    pub relax: RelaxConfig,
    pub ensemble: EnsembleConfig,
    pub medium: MediumConfig,
    pub pulse: PulseConfig,
    pub grid: GridConfig,
    pub toggles: TogglesConfig,
    pub output: OutputConfig,
}

/// Parse a TOML configuration document. An empty document yields the full
/// default configuration; unknown keys and type mismatches are reported with
/// their location.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let config: SimConfig =
        toml::from_str(text).map_err(|e| SimError::Config(format!("parse error: {e}")))?;
    config.validate()?;
    Ok(config)
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.resolve().map(|_| ())
    }

    /// Resolve into internal units, filling every derived default.
    pub fn resolve(&self) -> Result<Simulation> {
        let bath = PhononBathParams {
            alpha_p: self.bath.alpha_p_ps2,
            omega_b: units::energy_to_angular_frequency(self.bath.omega_b_mev),
            temperature: self.bath.temperature_k,
        };
        bath.validate()?;
        let relax = RelaxationParams {
            gamma: self.relax.gamma_per_ps,
            gamma_d: self.relax.gamma_d_per_ps,
        };
        relax.validate()?;

        let sigma = match (self.ensemble.fwhm_mev, self.ensemble.sigma_rad_per_ps) {
            (Some(_), Some(_)) => {
                return Err(SimError::Config(
                    "ensemble.fwhm_mev and ensemble.sigma_rad_per_ps are mutually exclusive".into(),
                ))
            }
            (Some(fwhm), None) => {
                if !(fwhm > 0.0) {
                    return Err(SimError::Config(format!(
                        "ensemble.fwhm_mev must be positive, got {fwhm}"
                    )));
                }
                units::energy_to_angular_frequency(units::fwhm_to_sigma(fwhm))
            }
            (None, Some(s)) => {
                if !(s > 0.0) {
                    return Err(SimError::Config(format!(
                        "ensemble.sigma_rad_per_ps must be positive, got {s}"
                    )));
                }
                s
            }
            (None, None) => {
                return Err(SimError::Config(
                    "one of ensemble.fwhm_mev or ensemble.sigma_rad_per_ps is required".into(),
                ))
            }
        };

        if !(self.pulse.tau0_ps > 0.0) {
            return Err(SimError::Config(format!(
                "pulse.tau0_ps must be positive, got {}",
                self.pulse.tau0_ps
            )));
        }
        if !(self.pulse.area_pi >= 0.0) {
            return Err(SimError::Config(format!(
                "pulse.area_pi must be >= 0, got {}",
                self.pulse.area_pi
            )));
        }
        if !(self.medium.density_per_m3 >= 0.0) {
            return Err(SimError::Config(format!(
                "medium.density_per_m3 must be >= 0, got {}",
                self.medium.density_per_m3
            )));
        }
        if !(self.medium.length_mm >= 0.0) {
            return Err(SimError::Config(format!(
                "medium.length_mm must be >= 0, got {}",
                self.medium.length_mm
            )));
        }
        if !(self.grid.tau_max_ps > self.pulse.tau_c_ps) {
            return Err(SimError::Config(format!(
                "grid.tau_max_ps = {} must exceed the pulse center {}",
                self.grid.tau_max_ps, self.pulse.tau_c_ps
            )));
        }
        if !(self.grid.alpha_dzeta > 0.0) {
            return Err(SimError::Config("grid.alpha_dzeta must be positive".into()));
        }
        if self.grid.table_omega_nodes < 2 {
            return Err(SimError::Config(
                "grid.table_omega_nodes must be at least 2".into(),
            ));
        }
        if self.output.slice_stride == 0 {
            return Err(SimError::Config("output.slice_stride must be >= 1".into()));
        }

        let wavelength_nm = units::transition_wavelength(self.medium.transition_energy_ev)?;

        let tau0 = self.pulse.tau0_ps;
        let tau_max = self.grid.tau_max_ps;
        let dtau = match self.grid.dtau_ps {
            Some(dt) if dt > 0.0 => dt,
            Some(dt) => {
                return Err(SimError::Config(format!(
                    "grid.dtau_ps must be positive, got {dt}"
                )))
            }
            None => tau0 / 100.0,
        };

        // Ensemble discretization. The windowed default resolves the pulse
        // bandwidth and keeps the discrete dephasing horizon 2 pi / d(Delta)
        // beyond the simulated window.
        let delta_c = self.ensemble.delta_c;
        let ensemble = if self.toggles.single_qd {
            DetuningEnsemble::single(delta_c)
        } else {
            match self.ensemble.quadrature {
                Quadrature::Windowed => {
                    let window = match self.ensemble.window_rad_per_ps {
                        Some(w) if w > 0.0 => w,
                        Some(w) => {
                            return Err(SimError::Config(format!(
                                "ensemble.window_rad_per_ps must be positive, got {w}"
                            )))
                        }
                        None => (40.0 / tau0).min(6.0 * sigma),
                    };
                    let n = match self.ensemble.n_nodes {
                        Some(n) => n,
                        None => {
                            let spacing = 2.0 * std::f64::consts::PI / (1.4 * tau_max);
                            let mut n = (2.0 * window / spacing).ceil() as usize + 1;
                            if n % 2 == 0 {
                                n += 1;
                            }
                            n.clamp(3, 4001)
                        }
                    };
                    DetuningEnsemble::windowed(sigma, delta_c, window, n)?
                }
                Quadrature::GaussHermite => {
                    DetuningEnsemble::gauss_hermite(sigma, delta_c, self.ensemble.n_nodes.unwrap_or(63))?
                }
                Quadrature::Trapezoid => {
                    DetuningEnsemble::trapezoid(sigma, delta_c, self.ensemble.n_nodes.unwrap_or(1215))?
                }
            }
        };

        let gamma = relax.gamma;
        let eta = crate::propagation::coupling_constant(
            self.medium.density_per_m3,
            wavelength_nm,
            gamma,
        );
        let g0 = crate::ensemble::gaussian_profile(delta_c, sigma, delta_c)?;
        let alpha = crate::analysis::extinction_coefficient(eta, g0);

        let dzeta = match self.grid.dzeta_mm {
            Some(dz) if dz > 0.0 => dz,
            Some(dz) => {
                return Err(SimError::Config(format!(
                    "grid.dzeta_mm must be positive, got {dz}"
                )))
            }
            None if alpha > 0.0 => self.grid.alpha_dzeta / alpha,
            None => self.medium.length_mm.max(1e-3) / 16.0,
        };

        let theta0 = self.pulse.area_pi * std::f64::consts::PI;
        let omega0 = if tau0 > 0.0 {
            theta0 / (std::f64::consts::PI * tau0)
        } else {
            0.0
        };

        // Rate-table geometry: span the ensemble's detuning range and the
        // field range with margin; resolution targets the kernel feature
        // scale (~omega_b) along Delta.
        let table_omega_max = (1.2 * omega0).max(1e-3);
        let (dmin, dmax) = if ensemble.len() == 1 {
            (delta_c - 1.0, delta_c + 1.0)
        } else {
            (ensemble.nodes[0], *ensemble.nodes.last().unwrap())
        };
        let table_delta_nodes = match self.grid.table_delta_nodes {
            Some(n) => {
                if n < 2 {
                    return Err(SimError::Config(
                        "grid.table_delta_nodes must be at least 2".into(),
                    ));
                }
                n
            }
            None => {
                let span = dmax - dmin;
                (((span / 0.06).ceil() as usize) + 1).clamp(201, 2001)
            }
        };

        Ok(Simulation {
            config: self.clone(),
            bath,
            relax,
            sigma,
            delta_c,
            ensemble,
            density_per_m3: self.medium.density_per_m3,
            length_mm: self.medium.length_mm,
            wavelength_nm,
            eta,
            alpha,
            theta0,
            omega0,
            tau0,
            tau_c: self.pulse.tau_c_ps,
            dtau,
            tau_max,
            dzeta,
            phonons: self.toggles.phonons,
            table_omega_max,
            table_delta_range: (dmin, dmax),
            table_resolution: (self.grid.table_omega_nodes, table_delta_nodes),
        })
    }

    /// SHA-256 of the canonical serialized form; identical hashes mean
    /// byte-identical outputs.
    pub fn hash(&self) -> String {
        let text = toml::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Fully resolved simulation parameters in internal units.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimConfig,
    pub bath: PhononBathParams,
    pub relax: RelaxationParams,
    pub sigma: f64,
    pub delta_c: f64,
    pub ensemble: DetuningEnsemble,
    pub density_per_m3: f64,
    pub length_mm: f64,
    pub wavelength_nm: f64,
    /// Coupling constant, mm^-1 rad/ps.
    pub eta: f64,
    /// Extinction 2 pi eta g(0), mm^-1.
    pub alpha: f64,
    /// Input pulse area, rad.
    pub theta0: f64,
    /// Input peak Rabi frequency, rad/ps.
    pub omega0: f64,
    pub tau0: f64,
    pub tau_c: f64,
    pub dtau: f64,
    pub tau_max: f64,
    pub dzeta: f64,
    pub phonons: bool,
    pub table_omega_max: f64,
    pub table_delta_range: (f64, f64),
    pub table_resolution: (usize, usize),
}

impl Simulation {
    /// Retarded-time axis [0, tau_max] with uniform step.
    pub fn tau_axis(&self) -> Vec<f64> {
        let n = (self.tau_max / self.dtau).round() as usize;
        let dt = self.tau_max / n as f64;
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    pub fn n_slices(&self) -> usize {
        if self.length_mm == 0.0 {
            0
        } else {
            (self.length_mm / self.dzeta).ceil() as usize
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_document_is_default() {
        let parsed = parse_config("").unwrap();
        assert_eq!(parsed, SimConfig::default());
        let sim = parsed.resolve().unwrap();
        assert_relative_eq!(sim.sigma, 15.16, max_relative = 1e-3);
        assert_relative_eq!(sim.eta, 54.29, max_relative = 1e-3);
        assert_relative_eq!(sim.alpha, 8.98, max_relative = 1e-3);
        assert_relative_eq!(sim.omega0, 2.0 / 6.373, max_relative = 1e-12);
        assert_relative_eq!(sim.wavelength_nm, 953.7, max_relative = 1e-4);
    }

    #[test]
    fn override_single_field() {
        let parsed = parse_config("[bath]\ntemperature_k = 20\n").unwrap();
        let mut expected = SimConfig::default();
        expected.bath.temperature_k = 20.0;
        assert_eq!(parsed, expected);
    }

    #[test]
    fn rejects_unknown_key() {
        let err = parse_config("[bath]\ntemperatur = 20\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("temperatur"), "message should name the key: {msg}");
    }

    #[test]
    fn rejects_negative_tau0() {
        let err = parse_config("[pulse]\ntau0_ps = -1.0\n").unwrap_err();
        assert!(matches!(err, SimError::Config(_)));
    }

    #[test]
    fn rejects_conflicting_widths() {
        let err =
            parse_config("[ensemble]\nfwhm_mev = 23.5\nsigma_rad_per_ps = 15.0\n").unwrap_err();
        assert!(err.to_string().contains("mutually exclusive"));
    }

    #[test]
    fn roundtrip_is_lossless() {
        let mut config = SimConfig::default();
        config.bath.temperature_k = 10.0;
        config.pulse.area_pi = 4.0;
        config.ensemble.n_nodes = Some(301);
        let text = toml::to_string(&config).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = SimConfig::default().hash();
        let b = SimConfig::default().hash();
        assert_eq!(a, b);
        let mut config = SimConfig::default();
        config.bath.temperature_k = 4.3;
        assert_ne!(config.hash(), a);
    }

    #[test]
    fn eta_alpha_consistency() {
        for text in ["", "[ensemble]\nfwhm_mev = 40.0\n", "[relax]\ngamma_per_ps = 3.04e-3\ngamma_d_per_ps = 3.04e-3\n"] {
            let sim = parse_config(text).unwrap().resolve().unwrap();
            let g0 = crate::ensemble::gaussian_profile(sim.delta_c, sim.sigma, sim.delta_c).unwrap();
            let expected = 2.0 * std::f64::consts::PI * sim.eta * g0;
            assert_relative_eq!(sim.alpha, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn single_qd_mode() {
        let config = parse_config("[toggles]\nsingle_qd = true\n").unwrap();
        let sim = config.resolve().unwrap();
        assert_eq!(sim.ensemble.len(), 1);
        assert_eq!(sim.ensemble.nodes[0], 0.0);
    }

    #[test]
    fn windowed_defaults_resolve_bandwidth() {
        let sim = SimConfig::default().resolve().unwrap();
        assert!(sim.ensemble.len() >= 201);
        assert!(sim.ensemble.len() % 2 == 1);
        let spacing = sim.ensemble.nodes[1] - sim.ensemble.nodes[0];
        // discrete dephasing horizon beyond the simulated window
        assert!(2.0 * std::f64::consts::PI / spacing > sim.tau_max);
    }
}
