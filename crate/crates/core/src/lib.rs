//! Maxwell-Bloch simulator for self-induced transparency in a
//! phonon-coupled, inhomogeneously broadened quantum-dot medium.
//!
//! The medium is an ensemble of two-level excitonic transitions with a
//! Gaussian detuning distribution, each dressed by a longitudinal-acoustic
//! phonon bath in the polaron frame. Per detuning class the density matrix
//! follows a master equation whose dissipators carry seven phonon-induced
//! scattering quantities; the optical envelope marches through the medium in
//! the retarded frame driven by the ensemble-averaged coherence.
//!
//! Module map:
//!
//! * [`units`] -- the internal unit system (rad/ps, ps, mm) and conversions.
//! * [`bath`] -- spectral density, thermal displacement average `<B>`,
//!   correlation function phi(tau), Green's functions, validity metric.
//! * [`rates`] -- the seven scattering quantities as tau-integrals over
//!   phi(tau), their kernel factorization and the (Omega_R, Delta) lookup
//!   table.
//! * [`bloch`] -- the component master equation and its RK4 stepper.
//! * [`ensemble`] -- Gaussian broadening and its quadrature rules.
//! * [`propagation`] -- the reduced wave equation, Heun space marching.
//! * [`analysis`] -- areas, the area-theorem solution, peak/breakup
//!   detection, population and coherence scans.
//! * [`config`] / [`presets`] / [`output`] -- TOML configuration, canned
//!   scenarios, deterministic data files.

pub mod analysis;
pub mod bath;
pub mod bloch;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod output;
pub mod presets;
pub mod propagation;
pub mod rates;
pub mod units;

pub use error::{Result, SimError};

// Keep the book's code snippets compiling: every fenced Rust block in the
// guide runs as a doc-test of this crate.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            #[allow(unused)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(units, "../../../book/src/units.md");
    chapter!(phonon_bath, "../../../book/src/phonon-bath.md");
    chapter!(scattering_rates, "../../../book/src/scattering-rates.md");
    chapter!(bloch_dynamics, "../../../book/src/bloch-dynamics.md");
    chapter!(ensemble, "../../../book/src/ensemble.md");
    chapter!(propagation, "../../../book/src/propagation.md");
    chapter!(area_theorem, "../../../book/src/area-theorem.md");
    chapter!(cli, "../../../book/src/cli.md");
}
