//! Space marching of the complex envelope through the medium.
//!
//! In the retarded frame (zeta = z, tau = t - z/c) the reduced wave equation
//! is a pure spatial march,
//!
//! ```text
//! d Omega / d zeta = -i eta Int rho12(Delta, zeta, tau) g(Delta) dDelta
//! ```
//!
//! with eta = 3 N lambda^2 gamma / 4 pi > 0. The sign convention is fixed by
//! the Beer regime: a ground-state medium must attenuate a weak resonant
//! pulse, which the weak-pulse oracle test pins down.
//!
//! Each slice evolves the whole detuning ensemble across the tau window from
//! the ground state under the local field column, then advances the column
//! with a Heun (predictor-corrector) step that re-evolves the ensemble at
//! the predicted field.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis;
use crate::bath::CorrelationTable;
use crate::bloch::{step_rk4, QdState, RelaxationParams};
use crate::config::Simulation;
use crate::ensemble::DetuningEnsemble;
use crate::error::{Result, SimError};
use crate::rates::{RateSource, RateTable, ZeroRates};

/// Coupling constant eta = 3 N lambda^2 gamma / 4 pi in mm^-1 rad/ps.
///
/// Inputs: density in m^-3, wavelength in nm, radiative decay in rad/ps.
pub fn coupling_constant(density_per_m3: f64, wavelength_nm: f64, gamma: f64) -> f64 {
    let density_per_mm3 = density_per_m3 * 1e-9;
    let wavelength_mm = wavelength_nm * 1e-6;
    3.0 * density_per_mm3 * wavelength_mm * wavelength_mm * gamma
        / (4.0 * std::f64::consts::PI)
}

/// Input sech row Omega(0, tau) = theta0/(pi tau0) sech((tau - tau_c)/tau0),
/// normalized so its analytic area is exactly theta0.
pub fn sech_envelope(theta0: f64, tau0: f64, tau_c: f64, tau_axis: &[f64]) -> Vec<Complex64> {
    let omega0 = theta0 / (std::f64::consts::PI * tau0);
    tau_axis
        .iter()
        .map(|&tau| Complex64::new(omega0 / ((tau - tau_c) / tau0).cosh(), 0.0))
        .collect()
}

/// Complex envelope on the (zeta, tau) lattice, zeta-major storage.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub zeta_axis: Vec<f64>,
    pub tau_axis: Vec<f64>,
    envelope: Vec<Complex64>,
}

impl FieldGrid {
    fn with_input(zeta_axis: Vec<f64>, tau_axis: Vec<f64>, input: Vec<Complex64>) -> Self {
        assert_eq!(tau_axis.len(), input.len());
        let mut envelope = Vec::with_capacity(zeta_axis.len() * tau_axis.len());
        envelope.extend_from_slice(&input);
        FieldGrid {
            zeta_axis,
            tau_axis,
            envelope,
        }
    }

    fn push_row(&mut self, row: &[Complex64]) {
        debug_assert_eq!(row.len(), self.tau_axis.len());
        self.envelope.extend_from_slice(row);
    }

    pub fn n_zeta(&self) -> usize {
        self.zeta_axis.len()
    }

    pub fn n_tau(&self) -> usize {
        self.tau_axis.len()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        let n = self.n_tau();
        &self.envelope[i * n..(i + 1) * n]
    }

    pub fn input_row(&self) -> &[Complex64] {
        self.row(0)
    }

    pub fn output_row(&self) -> &[Complex64] {
        self.row(self.n_zeta() - 1)
    }

    pub fn tau_step(&self) -> f64 {
        self.tau_axis[1] - self.tau_axis[0]
    }
}

/// Everything a slice advance needs besides the field column.
pub struct SliceContext<'a> {
    pub ensemble: &'a DetuningEnsemble,
    pub source: &'a dyn RateSource,
    pub relax: RelaxationParams,
    pub dtau: f64,
    pub eta: f64,
}

/// Reusable per-node coherence rows (weights folded in).
pub struct SliceScratch {
    rows: Vec<Complex64>,
    n_tau: usize,
}

impl SliceScratch {
    pub fn new(n_nodes: usize, n_tau: usize) -> Self {
        SliceScratch {
            rows: vec![Complex64::new(0.0, 0.0); n_nodes * n_tau],
            n_tau,
        }
    }
}

/// RK4 stability bound: |Delta| dtau beyond this forces substeps.
const STABILITY_PHASE: f64 = 2.0;

fn substeps_for(delta: f64, dtau: f64) -> usize {
    ((delta.abs() * dtau / STABILITY_PHASE).ceil() as usize).max(1)
}

/// Evolve one detuning class across the tau window under a field column,
/// writing `weight * rho12` at every grid point into `row`.
fn evolve_node_into(
    column: &[Complex64],
    delta: f64,
    weight: f64,
    ctx: &SliceContext,
    row: &mut [Complex64],
) -> Result<f64> {
    let n = column.len();
    let n_sub = substeps_for(delta, ctx.dtau);
    let mut state = QdState::ground();
    let mut max_correction = 0.0_f64;
    row[0] = weight * state.rho12;
    for i in 0..n - 1 {
        let f0 = column[i];
        let f1 = column[i + 1];
        if n_sub == 1 {
            let (next, corr) = step_rk4(
                &state,
                f0,
                0.5 * (f0 + f1),
                f1,
                delta,
                ctx.dtau,
                ctx.source,
                &ctx.relax,
            )?;
            state = next;
            max_correction = max_correction.max(corr);
        } else {
            // Fast-rotating spectator class: substep with the field
            // interpolated linearly inside the interval.
            let h = ctx.dtau / n_sub as f64;
            let df = f1 - f0;
            for s in 0..n_sub {
                let fa = f0 + df * (s as f64 / n_sub as f64);
                let fm = f0 + df * ((s as f64 + 0.5) / n_sub as f64);
                let fb = f0 + df * ((s as f64 + 1.0) / n_sub as f64);
                let (next, corr) =
                    step_rk4(&state, fa, fm, fb, delta, h, ctx.source, &ctx.relax)?;
                state = next;
                max_correction = max_correction.max(corr);
            }
        }
        row[i + 1] = weight * state.rho12;
    }
    Ok(max_correction)
}

/// Evolve the whole ensemble under a column and reduce to the macroscopic
/// coherence Sum_k w_k rho12(Delta_k, tau). Nodes run in parallel; the
/// reduction is a fixed-order sequential sum, so results do not depend on
/// the thread count.
pub fn ensemble_coherence(
    column: &[Complex64],
    ctx: &SliceContext,
    scratch: &mut SliceScratch,
) -> Result<(Vec<Complex64>, f64)> {
    let n_tau = column.len();
    debug_assert_eq!(scratch.n_tau, n_tau);
    let corrections: Vec<f64> = scratch
        .rows
        .par_chunks_mut(n_tau)
        .zip(ctx.ensemble.nodes.par_iter().zip(ctx.ensemble.weights.par_iter()))
        .map(|(row, (&delta, &weight))| evolve_node_into(column, delta, weight, ctx, row))
        .collect::<Result<_>>()?;
    let mut coherence = vec![Complex64::new(0.0, 0.0); n_tau];
    for row in scratch.rows.chunks(n_tau) {
        for (c, r) in coherence.iter_mut().zip(row) {
            *c += *r;
        }
    }
    let max_correction = corrections.iter().fold(0.0_f64, |m, &c| m.max(c));
    Ok((coherence, max_correction))
}

/// Advance one spatial step with a Heun predictor-corrector:
/// predict with the current slice's source, re-evolve the ensemble at the
/// predicted column, correct with the averaged source.
pub fn advance_slice(
    column: &[Complex64],
    dzeta: f64,
    ctx: &SliceContext,
    scratch: &mut SliceScratch,
) -> Result<(Vec<Complex64>, f64)> {
    let (coh1, corr1) = ensemble_coherence(column, ctx, scratch)?;
    let minus_i_eta = Complex64::new(0.0, -ctx.eta);
    let predicted: Vec<Complex64> = column
        .iter()
        .zip(&coh1)
        .map(|(f, c)| f + dzeta * minus_i_eta * c)
        .collect();
    let (coh2, corr2) = ensemble_coherence(&predicted, ctx, scratch)?;
    let next: Vec<Complex64> = column
        .iter()
        .zip(coh1.iter().zip(&coh2))
        .map(|(f, (c1, c2))| f + 0.5 * dzeta * minus_i_eta * (c1 + c2))
        .collect();
    Ok((next, corr1.max(corr2)))
}

/// Per-slice observables recorded during the march.
#[derive(Debug, Clone, Copy)]
pub struct SliceRecord {
    pub zeta: f64,
    /// Modulus area Int |Omega| dtau, rad.
    pub area: f64,
    /// Signed area Int Re(Omega) dtau, rad (the area-theorem quantity).
    pub area_signed: f64,
    pub peak: f64,
    pub peak_time: f64,
    /// Int |Omega|^2 dtau.
    pub energy: f64,
    pub trace_correction: f64,
}

fn record_slice(zeta: f64, row: &[Complex64], tau_axis: &[f64], correction: f64) -> SliceRecord {
    let (peak, peak_time) = analysis::refined_peak(row, tau_axis);
    SliceRecord {
        zeta,
        area: analysis::pulse_area(row, tau_axis),
        area_signed: analysis::pulse_area_signed(row, tau_axis),
        peak,
        peak_time,
        energy: analysis::pulse_energy(row, tau_axis),
        trace_correction: correction,
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub grid: FieldGrid,
    pub slices: Vec<SliceRecord>,
    pub mean_b: f64,
    pub eta: f64,
    pub alpha: f64,
    pub validity_metric: f64,
    pub warnings: Vec<String>,
}

impl SimOutput {
    pub fn output_record(&self) -> &SliceRecord {
        self.slices.last().unwrap()
    }
}

/// Run the full space-time simulation described by a resolved configuration.
///
/// Deterministic for a given configuration, independent of thread count.
pub fn run_simulation(sim: &Simulation) -> Result<SimOutput> {
    let tau_axis = sim.tau_axis();
    let input = sech_envelope(sim.theta0, sim.tau0, sim.tau_c, &tau_axis);

    // Phonon machinery. The correlation grid is refined so the fastest
    // tabulated integrand is resolved; the table spans the ensemble range.
    let mut warnings = Vec::new();
    let mut validity_metric = 0.0;
    let (source, mean_b): (Box<dyn RateSource>, f64) = if sim.phonons {
        let (dmin, dmax) = sim.table_delta_range;
        let eta_max = crate::rates::generalized_rabi(sim.table_omega_max, dmin.abs().max(dmax.abs()));
        let corr = CorrelationTable::build_resolving(&sim.bath, eta_max)?;
        // check the weak-field bound before paying for the table
        validity_metric = corr.validity_metric(sim.omega0);
        if validity_metric >= 1.0 {
            return Err(SimError::ValidityBound {
                metric: validity_metric,
            });
        }
        if validity_metric >= 0.1 {
            warnings.push(format!(
                "polaron validity metric {validity_metric:.3} >= 0.1: weak-field assumption is strained"
            ));
        }
        let mean_b = corr.mean_b;
        let table = RateTable::build(
            &corr,
            sim.table_omega_max.max(1e-6),
            sim.table_delta_range,
            sim.table_resolution,
        )?;
        (Box::new(table), mean_b)
    } else {
        (Box::new(ZeroRates), 1.0)
    };

    let n_slices = sim.n_slices();
    let dzeta = if n_slices == 0 {
        0.0
    } else {
        sim.length_mm / n_slices as f64
    };
    let zeta_axis: Vec<f64> = (0..=n_slices).map(|i| i as f64 * dzeta).collect();

    let ctx = SliceContext {
        ensemble: &sim.ensemble,
        source: source.as_ref(),
        relax: sim.relax,
        dtau: tau_axis[1] - tau_axis[0],
        eta: sim.eta,
    };
    let mut scratch = SliceScratch::new(sim.ensemble.len(), tau_axis.len());

    let mut grid = FieldGrid::with_input(zeta_axis, tau_axis, input);
    let mut slices = vec![record_slice(0.0, grid.row(0), &grid.tau_axis, 0.0)];
    let input_energy = slices[0].energy;

    for s in 0..n_slices {
        let zeta_next = grid.zeta_axis[s + 1];
        let (next, correction) = {
            let column = grid.row(s);
            advance_slice(column, dzeta, &ctx, &mut scratch)?
        };
        if let Some(j) = next.iter().position(|v| !v.is_finite()) {
            return Err(SimError::Numerics(format!(
                "non-finite envelope at zeta = {zeta_next} mm, tau = {} ps",
                grid.tau_axis[j]
            )));
        }
        let record = record_slice(zeta_next, &next, &grid.tau_axis, correction);
        if input_energy > 0.0 && record.energy > 10.0 * input_energy {
            return Err(SimError::Numerics(format!(
                "slice energy grew by {:.1}x at zeta = {zeta_next} mm: marching instability",
                record.energy / input_energy
            )));
        }
        grid.push_row(&next);
        slices.push(record);
    }

    Ok(SimOutput {
        grid,
        slices,
        mean_b,
        eta: sim.eta,
        alpha: sim.alpha,
        validity_metric,
        warnings,
    })
}

/// Evolve the ensemble at zeta = 0 and capture per-node states at the
/// requested tau indices (for coherence spectra and population scans).
pub fn evolve_with_snapshots(
    column: &[Complex64],
    ctx: &SliceContext,
    snapshot_indices: &[usize],
) -> Result<Vec<Vec<QdState>>> {
    let n = column.len();
    let states: Vec<Vec<QdState>> = ctx
        .ensemble
        .nodes
        .par_iter()
        .map(|&delta| -> Result<Vec<QdState>> {
            let n_sub = substeps_for(delta, ctx.dtau);
            let mut state = QdState::ground();
            let mut snaps = Vec::with_capacity(snapshot_indices.len());
            let mut want = snapshot_indices.iter().peekable();
            if want.peek() == Some(&&0) {
                snaps.push(state);
                want.next();
            }
            for i in 0..n - 1 {
                let f0 = column[i];
                let f1 = column[i + 1];
                let h = ctx.dtau / n_sub as f64;
                let df = f1 - f0;
                for s in 0..n_sub {
                    let fa = f0 + df * (s as f64 / n_sub as f64);
                    let fm = f0 + df * ((s as f64 + 0.5) / n_sub as f64);
                    let fb = f0 + df * ((s as f64 + 1.0) / n_sub as f64);
                    let (next, _) = step_rk4(&state, fa, fm, fb, delta, h, ctx.source, &ctx.relax)?;
                    state = next;
                }
                if want.peek() == Some(&&(i + 1)) {
                    snaps.push(state);
                    want.next();
                }
            }
            Ok(snaps)
        })
        .collect::<Result<_>>()?;
    // transpose to [snapshot][node]
    let mut out = vec![Vec::with_capacity(ctx.ensemble.len()); snapshot_indices.len()];
    for node_states in states {
        for (k, s) in node_states.into_iter().enumerate() {
            out[k].push(s);
        }
    }
    Ok(out)
}
