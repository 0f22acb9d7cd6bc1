//! Phonon bath: spectral density, thermal displacement average, correlation
//! function and polaron Green's functions.
//!
//! The bath is a continuum of longitudinal-acoustic phonon modes with a
//! super-Ohmic spectral density
//!
//! ```text
//! J(w) = alpha_p * w^3 * exp(-w^2 / (2 wb^2))
//! ```
//!
//! Dressing the exciton with the phonon displacement multiplies the coherent
//! coupling by the thermal average <B> and funnels every scattering rate
//! through one complex correlation function phi(tau). Both are integrals of
//! J(w)/w^2 against a thermal occupation factor; phi is field-independent,
//! so it is computed once on a uniform tau grid and shared by all rate
//! integrals.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::units::{HBAR_MEV_PS, KB_MEV_PER_K};

/// Bath parameters in internal units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhononBathParams {
    /// Electron-phonon coupling, ps^2.
    pub alpha_p: f64,
    /// Cutoff frequency, rad/ps.
    pub omega_b: f64,
    /// Bath temperature, K.
    pub temperature: f64,
}

impl PhononBathParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_p >= 0.0) {
            return Err(SimError::Config(format!(
                "bath.alpha_p must be >= 0, got {}",
                self.alpha_p
            )));
        }
        if !(self.omega_b > 0.0) {
            return Err(SimError::Config(format!(
                "bath.omega_b must be > 0, got {}",
                self.omega_b
            )));
        }
        if !(self.temperature >= 0.0) {
            return Err(SimError::Config(format!(
                "bath.temperature must be >= 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }

    /// hbar / (2 kB T) in ps; `None` at T = 0 where coth is replaced by 1.
    fn half_beta(&self) -> Option<f64> {
        if self.temperature == 0.0 {
            None
        } else {
            Some(HBAR_MEV_PS / (2.0 * KB_MEV_PER_K * self.temperature))
        }
    }
}

/// J(w) in rad/ps. Errors on negative frequency.
pub fn spectral_density(omega: f64, params: &PhononBathParams) -> Result<f64> {
    if omega < 0.0 {
        return Err(SimError::Domain(format!(
            "spectral density is defined for omega >= 0, got {omega}"
        )));
    }
    let x = omega / params.omega_b;
    Ok(params.alpha_p * omega.powi(3) * (-0.5 * x * x).exp())
}

/// w * coth(a w), continued analytically through w = 0 (limit 1/a).
fn omega_coth(omega: f64, half_beta: Option<f64>) -> f64 {
    match half_beta {
        None => omega, // T = 0: coth == 1 exactly
        Some(a) => {
            let x = a * omega;
            if x < 1e-4 {
                // w coth(a w) = 1/a + a w^2/3 - a^3 w^4/45 + ...
                1.0 / a + a * omega * omega / 3.0
            } else {
                omega / x.tanh()
            }
        }
    }
}

/// Thermal part of the phi integrand: J(w)/w^2 * coth(hbar w / 2 kB T),
/// with the analytic w -> 0 limit 2 alpha_p kB T / hbar.
fn thermal_integrand(omega: f64, params: &PhononBathParams) -> f64 {
    let x = omega / params.omega_b;
    params.alpha_p * (-0.5 * x * x).exp() * omega_coth(omega, params.half_beta())
}

/// Adaptive Simpson quadrature with Richardson acceleration.
///
/// `tol` is an absolute tolerance; the caller derives it from a rough pass so
/// the overall result meets a relative target. Returns the integral and the
/// worst accepted error estimate.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> (f64, f64) {
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        worst: &mut f64,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let h = b - a;
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = h / 12.0 * (fa + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fb);
        let err = (left + right - whole) / 15.0;
        if err.abs() <= tol || depth >= 48 {
            if depth >= 48 {
                *worst = worst.max(err.abs());
            }
            return left + right + err;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, worst)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, worst)
    }

    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst = 0.0;
    let value = recurse(f, a, b, fa, fm, fb, whole, tol, 0, &mut worst);
    (value, worst)
}

/// Relative tolerance for the omega integrals.
const OMEGA_REL_TOL: f64 = 1e-9;
/// Upper cutoff in units of omega_b; the Gaussian tail beyond is < 1e-13 of peak.
const OMEGA_MAX_FACTOR: f64 = 8.0;

/// Integrate `f` over [0, 8 omega_b] to a relative tolerance of 1e-9.
fn bath_integral<F: Fn(f64) -> f64>(params: &PhononBathParams, f: F) -> Result<f64> {
    let upper = OMEGA_MAX_FACTOR * params.omega_b;
    // Rough composite pass sets the scale for the absolute tolerance.
    let n = 256;
    let h = upper / n as f64;
    let mut rough = 0.0;
    for i in 0..=n {
        let w = i as f64 * h;
        let v = f(w).abs();
        rough += if i == 0 || i == n { 0.5 * v } else { v };
    }
    rough *= h;
    let scale = rough.max(1e-300);
    let tol = OMEGA_REL_TOL * scale;
    let (value, worst) = adaptive_simpson(&f, 0.0, upper, tol);
    if worst > tol {
        return Err(SimError::Quadrature {
            requested: OMEGA_REL_TOL,
            achieved: worst / scale,
        });
    }
    Ok(value)
}

/// Thermal displacement average <B> in (0, 1].
pub fn mean_displacement(params: &PhononBathParams) -> Result<f64> {
    params.validate()?;
    if params.alpha_p == 0.0 {
        return Ok(1.0);
    }
    let integral = bath_integral(params, |w| thermal_integrand(w, params))?;
    Ok((-0.5 * integral).exp())
}

/// Phonon correlation function phi(tau).
pub fn correlation_function(tau: f64, params: &PhononBathParams) -> Result<Complex64> {
    params.validate()?;
    if tau < 0.0 {
        return Err(SimError::Domain(format!(
            "correlation function is defined for tau >= 0, got {tau}"
        )));
    }
    if params.alpha_p == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let re = bath_integral(params, |w| thermal_integrand(w, params) * (w * tau).cos())?;
    let im = if tau == 0.0 {
        0.0
    } else {
        let wb = params.omega_b;
        let ap = params.alpha_p;
        -bath_integral(params, move |w| {
            let x = w / wb;
            ap * w * (-0.5 * x * x).exp() * (w * tau).sin()
        })?
    };
    Ok(Complex64::new(re, im))
}

/// Polaron Green's functions (G_g, G_u) from phi and <B>:
/// G_g = <B>^2 (cosh phi - 1), G_u = <B>^2 sinh phi.
pub fn green_functions(phi: Complex64, mean_b: f64) -> (Complex64, Complex64) {
    let b2 = mean_b * mean_b;
    (b2 * (phi.cosh() - 1.0), b2 * phi.sinh())
}

/// Weak-field validity metric (Omega/omega_b)^2 (1 - <B>^4).
///
/// Callers treat >= 0.1 as a warning and >= 1 as a hard violation.
pub fn polaron_validity(omega_peak: f64, mean_b: f64, omega_b: f64) -> f64 {
    let r = omega_peak / omega_b;
    r * r * (1.0 - mean_b.powi(4))
}

/// Default phi-grid step in units of omega_b * dtau.
pub const PHI_STEP_FACTOR: f64 = 0.02;
/// Default phi-grid extent in units of 1/omega_b.
pub const PHI_TAU_MAX_FACTOR: f64 = 12.0;
/// Target phase step (rad) per tau sample for the fastest rate integrand.
const PHASE_RESOLUTION: f64 = 0.2;

/// Precomputed phi(tau) on a uniform grid, shared by all rate integrals.
#[derive(Debug, Clone)]
pub struct CorrelationTable {
    pub params: PhononBathParams,
    /// Uniform grid step, ps.
    pub tau_step: f64,
    /// phi at tau = i * tau_step, i = 0..n.
    pub phi: Vec<Complex64>,
    /// Thermal displacement average.
    pub mean_b: f64,
}

impl CorrelationTable {
    /// Build with the default grid (step 0.02/omega_b, extent 12/omega_b).
    pub fn build(params: &PhononBathParams) -> Result<Self> {
        Self::build_resolving(params, 0.0)
    }

    /// Build with a grid fine enough that the fastest rate integrand
    /// cos(eta tau) advances at most ~0.2 rad per sample for eta up to
    /// `eta_max`. The rate integrals run composite Simpson straight on this
    /// grid, so its step bounds their accuracy.
    pub fn build_resolving(params: &PhononBathParams, eta_max: f64) -> Result<Self> {
        params.validate()?;
        let tau_max = PHI_TAU_MAX_FACTOR / params.omega_b;
        let mut step = PHI_STEP_FACTOR / params.omega_b;
        if eta_max > 0.0 {
            step = step.min(PHASE_RESOLUTION / eta_max);
        }
        // Simpson wants an even interval count.
        let mut n = (tau_max / step).ceil() as usize;
        if n % 2 == 1 {
            n += 1;
        }
        let step = tau_max / n as f64;
        let mean_b = mean_displacement(params)?;
        let phi: Vec<Complex64> = (0..=n)
            .into_par_iter()
            .map(|i| correlation_function(i as f64 * step, params))
            .collect::<Result<_>>()?;
        Ok(Self {
            params: *params,
            tau_step: step,
            phi,
            mean_b,
        })
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_step * (self.phi.len() - 1) as f64
    }

    /// Validity metric for a peak Rabi frequency, using the cached <B>.
    pub fn validity_metric(&self, omega_peak: f64) -> f64 {
        polaron_validity(omega_peak, self.mean_b, self.params.omega_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn default_params() -> PhononBathParams {
        PhononBathParams {
            alpha_p: 0.03,
            omega_b: crate::units::energy_to_angular_frequency(1.0),
            temperature: 4.2,
        }
    }

    #[test]
    fn spectral_density_values() {
        let p = default_params();
        assert_eq!(spectral_density(0.0, &p).unwrap(), 0.0);
        // closed-form check at the cutoff
        let expected = 0.03 * p.omega_b.powi(3) * (-0.5f64).exp();
        assert_relative_eq!(
            spectral_density(p.omega_b, &p).unwrap(),
            expected,
            max_relative = 1e-12
        );
        assert_relative_eq!(expected, 0.0638, max_relative = 2e-3);
        let zero = PhononBathParams { alpha_p: 0.0, ..p };
        assert_eq!(spectral_density(1.0, &zero).unwrap(), 0.0);
        assert!(spectral_density(-1.0, &p).is_err());
    }

    #[test]
    fn mean_displacement_matches_reference() {
        // scipy reference: 0.954078 at 4.2 K
        let b = mean_displacement(&default_params()).unwrap();
        assert_relative_eq!(b, 0.954078, max_relative = 1e-5);
        assert_abs_diff_eq!(b, 0.95, epsilon = 0.005);
    }

    #[test]
    fn mean_displacement_zero_coupling() {
        let p = PhononBathParams {
            alpha_p: 0.0,
            ..default_params()
        };
        assert_eq!(mean_displacement(&p).unwrap(), 1.0);
    }

    #[test]
    fn mean_displacement_zero_temperature_closed_form() {
        // At T = 0 the integral is alpha_p * omega_b^2 in closed form.
        let p = PhononBathParams {
            temperature: 0.0,
            ..default_params()
        };
        let expected = (-0.5 * p.alpha_p * p.omega_b * p.omega_b).exp();
        assert_relative_eq!(mean_displacement(&p).unwrap(), expected, max_relative = 1e-9);
        assert_relative_eq!(expected, 0.9659699, max_relative = 1e-6);
    }

    #[test]
    fn mean_displacement_monotone_in_temperature_and_coupling() {
        let mut prev = 1.0;
        for t in [0.5, 4.2, 10.0, 20.0, 40.0] {
            let b = mean_displacement(&PhononBathParams {
                temperature: t,
                ..default_params()
            })
            .unwrap();
            assert!(b < prev, "<B> must decrease with T: {b} at {t} K");
            prev = b;
        }
        let mut prev = 1.0;
        for ap in [0.01, 0.03, 0.06, 0.12, 0.24] {
            let b = mean_displacement(&PhononBathParams {
                alpha_p: ap,
                ..default_params()
            })
            .unwrap();
            assert!(b < prev, "<B> must decrease with alpha_p: {b} at {ap}");
            prev = b;
        }
    }

    #[test]
    fn correlation_at_zero_matches_mean_displacement() {
        let p = default_params();
        let phi0 = correlation_function(0.0, &p).unwrap();
        let b = mean_displacement(&p).unwrap();
        assert_eq!(phi0.im, 0.0);
        assert_relative_eq!(phi0.re, -2.0 * b.ln(), max_relative = 1e-9);
        // scipy reference
        assert_relative_eq!(phi0.re, 0.0940202833, max_relative = 1e-6);
    }

    #[test]
    fn correlation_reference_values() {
        // scipy quad references at 4.2 K
        let p = default_params();
        let phi = correlation_function(0.5, &p).unwrap();
        assert_relative_eq!(phi.re, 5.90126526e-2, max_relative = 1e-6);
        assert_relative_eq!(phi.im, -4.94026728e-2, max_relative = 1e-6);
        let phi = correlation_function(1.0, &p).unwrap();
        assert_relative_eq!(phi.re, 8.55810009e-3, max_relative = 1e-5);
        assert_relative_eq!(phi.im, -4.15786465e-2, max_relative = 1e-6);
        let phi = correlation_function(2.0, &p).unwrap();
        assert_relative_eq!(phi.re, -3.46723730e-3, max_relative = 1e-5);
        assert_relative_eq!(phi.im, -2.60771405e-3, max_relative = 1e-5);
    }

    #[test]
    fn correlation_imaginary_closed_form() {
        // Im phi = -alpha_p sqrt(pi/2) wb^3 tau exp(-wb^2 tau^2 / 2), any T.
        let p = default_params();
        for tau in [0.3, 1.0, 2.5] {
            let wb = p.omega_b;
            let expected =
                -p.alpha_p * (std::f64::consts::PI / 2.0).sqrt() * wb.powi(3) * tau
                    * (-0.5 * wb * wb * tau * tau).exp();
            let phi = correlation_function(tau, &p).unwrap();
            // the quadrature tolerance is relative to the non-oscillating
            // scale, so deep in the tail the result is looser
            assert_relative_eq!(phi.im, expected, max_relative = 1e-6);
        }
    }

    #[test]
    fn correlation_decays() {
        let p = default_params();
        let phi0 = correlation_function(0.0, &p).unwrap();
        let tail = correlation_function(10.0 / p.omega_b, &p).unwrap();
        assert!(tail.norm() < 0.02 * phi0.norm());
    }

    #[test]
    fn zero_coupling_correlation_is_zero() {
        let p = PhononBathParams {
            alpha_p: 0.0,
            ..default_params()
        };
        assert_eq!(correlation_function(1.0, &p).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn green_function_values() {
        let (gg, gu) = green_functions(Complex64::new(0.0, 0.0), 0.9);
        assert_eq!(gg, Complex64::new(0.0, 0.0));
        assert_eq!(gu, Complex64::new(0.0, 0.0));

        let (gg, gu) = green_functions(Complex64::new(std::f64::consts::LN_2, 0.0), 1.0);
        assert_relative_eq!(gg.re, 0.25, max_relative = 1e-12);
        assert_relative_eq!(gu.re, 0.75, max_relative = 1e-12);

        // purely imaginary phi: G_g real (cosh parity)
        let (gg, _) = green_functions(Complex64::new(0.0, 0.7), 0.95);
        assert_abs_diff_eq!(gg.im, 0.0, epsilon = 1e-15);
        assert_relative_eq!(gg.re, 0.95f64.powi(2) * (0.7f64.cos() - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn validity_metric() {
        assert_eq!(polaron_validity(0.0, 0.95, 1.5), 0.0);
        assert_eq!(polaron_validity(1.0, 1.0, 1.5), 0.0);
        // spec arithmetic with <B> = 0.95 exactly
        let m = polaron_validity(0.3039, 0.95, 1.5193);
        assert_relative_eq!(m, 0.00742, max_relative = 2e-2);
    }

    #[test]
    fn table_grid_and_consistency() {
        let p = default_params();
        let table = CorrelationTable::build(&p).unwrap();
        assert_relative_eq!(table.tau_max(), 12.0 / p.omega_b, max_relative = 1e-12);
        assert!(table.phi.len() % 2 == 1);
        assert_relative_eq!(
            table.phi[0].re,
            -2.0 * table.mean_b.ln(),
            max_relative = 1e-9
        );
        assert_eq!(table.phi[0].im, 0.0);
        // |phi| bounded by |phi(0)| on the grid
        let phi0 = table.phi[0].norm();
        assert!(table.phi.iter().all(|p| p.norm() <= phi0 * (1.0 + 1e-12)));
        // finer grid on request
        let fine = CorrelationTable::build_resolving(&p, 60.0).unwrap();
        assert!(fine.tau_step < table.tau_step);
        assert!(fine.tau_step <= 0.2 / 60.0 * (1.0 + 1e-12));
    }

    #[test]
    fn quadrature_self_convergence() {
        // Halving the effective step (doubling rough resolution) is built into
        // the adaptive scheme; cross-check phi on two tolerance regimes by
        // comparing against an independent composite Simpson at fine step.
        let p = default_params();
        let tau = 1.3;
        let upper = 8.0 * p.omega_b;
        let n = 200_000;
        let h = upper / n as f64;
        let f = |w: f64| thermal_integrand(w, &p) * (w * tau).cos();
        let mut s = f(0.0) + f(upper);
        for i in 1..n {
            let w = i as f64 * h;
            s += f(w) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let brute = s * h / 3.0;
        let phi = correlation_function(tau, &p).unwrap();
        assert_relative_eq!(phi.re, brute, max_relative = 1e-8);
    }
}
