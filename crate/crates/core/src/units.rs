//! Internal unit system and physical-constant conversions.
//!
//! Everything downstream works in one unit system: angular frequencies and
//! rates in rad/ps, times in ps, lengths in mm. Quantities quoted in meV,
//! eV, nm or K are converted exactly once, when a configuration is parsed.

/// Reduced Planck constant, meV·ps (CODATA: 6.582 119 57e-16 eV·s).
pub const HBAR_MEV_PS: f64 = 0.658212;

/// Boltzmann constant, meV/K.
pub const KB_MEV_PER_K: f64 = 0.08617333262;

/// hc, eV·nm.
pub const HC_EV_NM: f64 = 1239.841984;

/// Normalization frequency gamma_n, rad/ps. Dimensionless plots use
/// gamma_n * t and delta / gamma_n; with gamma_n = 1 those are just the
/// numbers in internal units.
pub const GAMMA_N: f64 = 1.0;

/// Convert an energy in meV to an angular frequency in rad/ps (E / hbar).
pub fn energy_to_angular_frequency(energy_mev: f64) -> f64 {
    energy_mev / HBAR_MEV_PS
}

/// Convert an angular frequency in rad/ps back to an energy in meV.
pub fn angular_frequency_to_energy(omega: f64) -> f64 {
    omega * HBAR_MEV_PS
}

/// Wavelength (nm) of a transition with energy `energy_ev` (eV): hc / E.
pub fn transition_wavelength(energy_ev: f64) -> crate::Result<f64> {
    if !(energy_ev > 0.0) {
        return Err(crate::SimError::Domain(format!(
            "transition energy must be positive, got {energy_ev} eV"
        )));
    }
    Ok(HC_EV_NM / energy_ev)
}

/// Gaussian standard deviation from a full width at half maximum.
pub fn fwhm_to_sigma(fwhm: f64) -> f64 {
    fwhm / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

/// Thermal frequency k_B T / hbar in rad/ps for a temperature in Kelvin.
pub fn thermal_frequency(temperature_k: f64) -> f64 {
    KB_MEV_PER_K * temperature_k / HBAR_MEV_PS
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mev_conversion() {
        assert_eq!(energy_to_angular_frequency(0.0), 0.0);
        assert_relative_eq!(energy_to_angular_frequency(1.0), 1.5193, max_relative = 1e-4);
        assert_relative_eq!(energy_to_angular_frequency(0.658212), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn mev_roundtrip_is_involutive() {
        for e in [0.1, 1.0, 23.5, 1300.0] {
            let back = angular_frequency_to_energy(energy_to_angular_frequency(e));
            assert_relative_eq!(back, e, max_relative = 1e-12);
        }
    }

    #[test]
    fn wavelength() {
        assert_relative_eq!(transition_wavelength(1.3).unwrap(), 953.7, max_relative = 1e-4);
        assert_relative_eq!(transition_wavelength(1239.841984).unwrap(), 1.0, max_relative = 1e-12);
        assert_relative_eq!(transition_wavelength(0.62).unwrap(), 1999.7, max_relative = 1e-4);
        assert!(transition_wavelength(0.0).is_err());
        assert!(transition_wavelength(-1.0).is_err());
    }

    #[test]
    fn gaussian_width() {
        // 23.5 meV FWHM -> 9.98 meV -> 15.16 rad/ps
        let sigma_mev = fwhm_to_sigma(23.5);
        assert_relative_eq!(sigma_mev, 9.9796, max_relative = 1e-4);
        let sigma = energy_to_angular_frequency(sigma_mev);
        assert_relative_eq!(sigma, 15.16, max_relative = 1e-3);
    }
}
