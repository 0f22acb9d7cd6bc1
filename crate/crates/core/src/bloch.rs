//! Two-level density-matrix dynamics for one detuning class.
//!
//! State basis: |1> exciton, |2> ground, with sigma+ = |1><2|. The master
//! equation in the polaron frame, with the doubled Lindblad convention
//! L[O] rho = 2 O rho O' - O'O rho - rho O'O, reads
//!
//! ```text
//! d rho/dt = -i [H, rho]
//!          + gamma/2 L[s-] + gamma_d/2 L[s+ s-]
//!          + G+/2 L[s+] + G-/2 L[s-]
//!          - Gcd (s+ rho s+ + s- rho s-) - i Gsd (s+ rho s+ - s- rho s-)
//!          + i Dpm [s+ s-, rho]
//!          - [ i Ggu+ (s+s- rho s+ + s- rho - s+s- rho s-) + H.c. ]
//!          - [   Ggu- (s+s- rho s+ - s- rho + s+s- rho s-) + H.c. ]
//! ```
//!
//! with H/hbar = -Delta s+s- + (1/2)(<B> Omega s+ + c.c.). Expanded in
//! components (the expansion is verified term by term against a matrix-form
//! evaluation in the tests, and documented in the book's dynamics chapter):
//!
//! ```text
//! d rho11 = -Im(conj(<B>Omega) rho12) - (gamma + G-) rho11 + G+ rho22
//!           - 2 Ggu+ Im(rho12) - 2 Ggu- Re(rho12)
//! d rho22 = -d rho11
//! d rho12 = i (Delta + Dpm) rho12 - (i/2) <B>Omega (rho22 - rho11)
//!           - (gamma + gamma_d + G+ + G-)/2 rho12
//!           - (Gcd + i Gsd) conj(rho12)
//! ```
//!
//! Both gu terms cancel in the coherence row and feed the populations from
//! the coherence quadratures; every term is traceless.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rates::{PhononRates, RateSource};

/// Density matrix of one detuning class. rho21 is implicit (Hermiticity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QdState {
    /// Exciton population.
    pub rho11: f64,
    /// Ground-state population.
    pub rho22: f64,
    /// Coherence <1| rho |2>.
    pub rho12: Complex64,
}

impl QdState {
    /// All population in the ground state.
    pub fn ground() -> Self {
        QdState {
            rho11: 0.0,
            rho22: 1.0,
            rho12: Complex64::new(0.0, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho11 + self.rho22
    }

    /// How far |rho12|^2 exceeds rho11 * rho22 (<= 0 for a physical state).
    pub fn positivity_defect(&self) -> f64 {
        self.rho12.norm_sqr() - self.rho11 * self.rho22
    }

    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        if (self.trace() - 1.0).abs() > tol
            || self.rho11 < -tol
            || self.rho11 > 1.0 + tol
            || self.positivity_defect() > tol
        {
            return Err(SimError::Numerics(format!(
                "state invariant violated: trace={}, rho11={}, positivity defect={:e}",
                self.trace(),
                self.rho11,
                self.positivity_defect()
            )));
        }
        Ok(())
    }
}

/// Radiative decay and pure dephasing, rad/ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxationParams {
    pub gamma: f64,
    pub gamma_d: f64,
}

impl RelaxationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) || !(self.gamma_d >= 0.0) {
            return Err(SimError::Config(format!(
                "relaxation rates must be >= 0, got gamma={}, gamma_d={}",
                self.gamma, self.gamma_d
            )));
        }
        Ok(())
    }
}

/// Time derivative of a [`QdState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDeriv {
    pub d_rho11: f64,
    pub d_rho22: f64,
    pub d_rho12: Complex64,
}

/// Right-hand side of the simplified master equation at one instant.
pub fn master_equation_rhs(
    state: &QdState,
    omega: Complex64,
    delta: f64,
    rates: &PhononRates,
    relax: &RelaxationParams,
    mean_b: f64,
) -> StateDeriv {
    let eff = mean_b * omega;
    let inversion = state.rho22 - state.rho11;

    let drive = -(eff.conj() * state.rho12).im;
    let d_rho11 = drive - (relax.gamma + rates.gamma_minus) * state.rho11
        + rates.gamma_plus * state.rho22
        - 2.0 * rates.gamma_gu_plus * state.rho12.im
        - 2.0 * rates.gamma_gu_minus * state.rho12.re;

    let gamma2 = 0.5 * (relax.gamma + relax.gamma_d + rates.gamma_plus + rates.gamma_minus);
    let d_rho12 = Complex64::new(0.0, delta + rates.delta_pm) * state.rho12
        - Complex64::new(0.0, 0.5) * eff * inversion
        - gamma2 * state.rho12
        - Complex64::new(rates.gamma_cd, rates.gamma_sd) * state.rho12.conj();

    StateDeriv {
        d_rho11,
        d_rho22: -d_rho11,
        d_rho12,
    }
}

/// Trace drift beyond this triggers a uniform rescale of the populations.
const TRACE_RENORM_THRESHOLD: f64 = 1e-12;
/// Invariant violation beyond this aborts the step.
const INVARIANT_HARD_TOL: f64 = 1e-6;

/// One classical RK4 step of duration `dt`.
///
/// Phonon rates are re-looked-up at each stage's field value (stages 2 and 3
/// share the midpoint field). Returns the stepped state and the trace
/// correction that was applied (0.0 if none was needed).
#[allow(clippy::too_many_arguments)]
pub fn step_rk4<S: RateSource + ?Sized>(
    state: &QdState,
    field_at_t: Complex64,
    field_at_half: Complex64,
    field_at_next: Complex64,
    delta: f64,
    dt: f64,
    source: &S,
    relax: &RelaxationParams,
) -> Result<(QdState, f64)> {
    if !(dt > 0.0) {
        return Err(SimError::Domain(format!("dt must be positive, got {dt}")));
    }
    let mean_b = source.mean_b();
    let r0 = source.rates(field_at_t, delta);
    let rh = source.rates(field_at_half, delta);
    let r1 = source.rates(field_at_next, delta);

    let k1 = master_equation_rhs(state, field_at_t, delta, &r0, relax, mean_b);
    let s2 = advance(state, &k1, 0.5 * dt);
    let k2 = master_equation_rhs(&s2, field_at_half, delta, &rh, relax, mean_b);
    let s3 = advance(state, &k2, 0.5 * dt);
    let k3 = master_equation_rhs(&s3, field_at_half, delta, &rh, relax, mean_b);
    let s4 = advance(state, &k3, dt);
    let k4 = master_equation_rhs(&s4, field_at_next, delta, &r1, relax, mean_b);

    let w = dt / 6.0;
    let mut next = QdState {
        rho11: state.rho11 + w * (k1.d_rho11 + 2.0 * k2.d_rho11 + 2.0 * k3.d_rho11 + k4.d_rho11),
        rho22: state.rho22 + w * (k1.d_rho22 + 2.0 * k2.d_rho22 + 2.0 * k3.d_rho22 + k4.d_rho22),
        rho12: state.rho12 + w * (k1.d_rho12 + 2.0 * k2.d_rho12 + 2.0 * k3.d_rho12 + k4.d_rho12),
    };

    let trace = next.trace();
    if !trace.is_finite() || !next.rho12.is_finite() {
        return Err(SimError::Instability {
            what: "non-finite state after RK4 step".into(),
            suggested_dt: 0.5 * dt,
        });
    }
    let mut correction = 0.0;
    let drift = (trace - 1.0).abs();
    if drift > TRACE_RENORM_THRESHOLD {
        next.rho11 /= trace;
        next.rho22 /= trace;
        correction = drift;
    }
    if next.check_invariants(INVARIANT_HARD_TOL).is_err() {
        return Err(SimError::Instability {
            what: format!(
                "state invariants violated beyond {INVARIANT_HARD_TOL:e} (rho11={}, defect={:e})",
                next.rho11,
                next.positivity_defect()
            ),
            suggested_dt: 0.5 * dt,
        });
    }
    Ok((next, correction))
}

fn advance(state: &QdState, k: &StateDeriv, h: f64) -> QdState {
    QdState {
        rho11: state.rho11 + h * k.d_rho11,
        rho22: state.rho22 + h * k.d_rho22,
        rho12: state.rho12 + h * k.d_rho12,
    }
}
