//! Phonon-induced scattering rates of the simplified polaron master equation.
//!
//! Seven real quantities drive the dissipative dynamics at each space-time
//! point: an incoherent pumping rate Gamma[s+], an enhanced decay rate
//! Gamma[s-], two cross-dephasing terms Gamma[cd] / Gamma[sd] that couple the
//! coherence to its conjugate, a detuning shift Delta[s+s-], and a pair
//! Gamma[gu+-] feeding populations from the coherence quadratures.
//!
//! All seven are tau-integrals over hyperbolic functions of the phonon
//! correlation function phi(tau). The integrands factor into a field-phase
//! independent part -- which depends only on the polaron-shifted Rabi
//! magnitude Omega_R = <B>|Omega| and the detuning -- and complex prefactors
//! of <B>Omega that can be hoisted out of the integral. The factored pieces
//! ("kernels") are what gets tabulated on an (Omega_R, Delta) grid, so that a
//! complex envelope costs nothing extra during propagation.

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bath::{CorrelationTable, PhononBathParams};
use crate::error::{Result, SimError};

/// Generalized Rabi frequency eta = sqrt(Omega_R^2 + Delta^2).
pub fn generalized_rabi(omega_r: f64, delta: f64) -> f64 {
    omega_r.hypot(delta)
}

/// The seven field-phase-independent kernels at one (Omega_R, Delta) point.
///
/// With eta = sqrt(Omega_R^2 + Delta^2), f = (Delta^2 cos(eta tau) +
/// Omega_R^2)/eta^2 and h = Delta (1 - cos(eta tau))/eta^2:
///
/// ```text
/// cosh_f     = Int Re[cosh(phi) - 1] f                 dtau
/// sinh_cos   = Int Re[sinh(phi)] cos(eta tau)          dtau
/// exp_sin    = Int Im[exp(phi)] Delta sin(eta tau)/eta dtau
/// expm_sin   = Int Re[exp(-phi) - 1] Delta sin(eta tau)/eta dtau
/// exp_sin_re = Int Re[exp(phi) - 1] Delta sin(eta tau)/eta dtau
/// cosh_h     = Int Re[cosh(phi) - 1] h                 dtau
/// sinh_sin   = Int Re[sinh(phi)] sin(eta tau)/eta      dtau
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateKernels {
    pub cosh_f: f64,
    pub sinh_cos: f64,
    pub exp_sin: f64,
    pub expm_sin: f64,
    pub exp_sin_re: f64,
    pub cosh_h: f64,
    pub sinh_sin: f64,
    /// Provenance: the (Omega_R, Delta) these kernels were computed at.
    pub omega_r: f64,
    pub delta: f64,
}

impl RateKernels {
    pub fn zero(omega_r: f64, delta: f64) -> Self {
        RateKernels {
            cosh_f: 0.0,
            sinh_cos: 0.0,
            exp_sin: 0.0,
            expm_sin: 0.0,
            exp_sin_re: 0.0,
            cosh_h: 0.0,
            sinh_sin: 0.0,
            omega_r,
            delta,
        }
    }
}

/// Real integrand pieces derived from phi(tau), cached per tau sample.
///
/// Writing phi = x + i y: cosh(phi) and sinh(phi) contribute through their
/// real parts only, exp(+-phi) through Re and Im as listed in [`RateKernels`].
#[derive(Debug, Clone)]
pub struct PhiFunctions {
    pub tau_step: f64,
    /// Re cosh(phi) - 1
    cosh_re_m1: Vec<f64>,
    /// Re sinh(phi)
    sinh_re: Vec<f64>,
    /// Im exp(phi)
    exp_im: Vec<f64>,
    /// Re exp(-phi) - 1
    expm_re_m1: Vec<f64>,
    /// Re exp(phi) - 1
    exp_re_m1: Vec<f64>,
}

impl PhiFunctions {
    pub fn new(corr: &CorrelationTable) -> Self {
        let n = corr.phi.len();
        let mut cosh_re_m1 = Vec::with_capacity(n);
        let mut sinh_re = Vec::with_capacity(n);
        let mut exp_im = Vec::with_capacity(n);
        let mut expm_re_m1 = Vec::with_capacity(n);
        let mut exp_re_m1 = Vec::with_capacity(n);
        for phi in &corr.phi {
            let (x, y) = (phi.re, phi.im);
            let (sin_y, cos_y) = y.sin_cos();
            let ex = x.exp();
            let emx = (-x).exp();
            // cosh(x+iy) = cosh x cos y + i sinh x sin y
            cosh_re_m1.push(0.5 * (ex + emx) * cos_y - 1.0);
            sinh_re.push(0.5 * (ex - emx) * cos_y);
            exp_im.push(ex * sin_y);
            expm_re_m1.push(emx * cos_y - 1.0);
            exp_re_m1.push(ex * cos_y - 1.0);
        }
        PhiFunctions {
            tau_step: corr.tau_step,
            cosh_re_m1,
            sinh_re,
            exp_im,
            expm_re_m1,
            exp_re_m1,
        }
    }

    pub fn len(&self) -> usize {
        self.cosh_re_m1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cosh_re_m1.is_empty()
    }
}

/// Evaluate all seven kernels by composite Simpson on the cached phi grid.
///
/// The eta = 0 corner (Omega_R = Delta = 0) uses the analytic limits
/// sin(eta tau)/eta -> tau, f -> 1, h -> 0.
pub fn compute_kernels_cached(omega_r: f64, delta: f64, funcs: &PhiFunctions) -> RateKernels {
    debug_assert!(funcs.len() % 2 == 1, "Simpson needs an even interval count");
    let eta = generalized_rabi(omega_r, delta);
    let h_step = funcs.tau_step;
    let n = funcs.len();

    let mut acc = [0.0_f64; 7];
    for i in 0..n {
        let tau = i as f64 * h_step;
        let (f_i, sinc_i, h_i, cos_i) = if eta == 0.0 {
            (1.0, tau, 0.0, 1.0)
        } else {
            let (s, c) = (eta * tau).sin_cos();
            let inv_eta2 = 1.0 / (eta * eta);
            (
                (delta * delta * c + omega_r * omega_r) * inv_eta2,
                s / eta,
                delta * (1.0 - c) * inv_eta2,
                c,
            )
        };
        let w = if i == 0 || i == n - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let dsin = delta * sinc_i;
        acc[0] += w * funcs.cosh_re_m1[i] * f_i;
        acc[1] += w * funcs.sinh_re[i] * cos_i;
        acc[2] += w * funcs.exp_im[i] * dsin;
        acc[3] += w * funcs.expm_re_m1[i] * dsin;
        acc[4] += w * funcs.exp_re_m1[i] * dsin;
        acc[5] += w * funcs.cosh_re_m1[i] * h_i;
        acc[6] += w * funcs.sinh_re[i] * sinc_i;
    }
    let scale = h_step / 3.0;
    RateKernels {
        cosh_f: acc[0] * scale,
        sinh_cos: acc[1] * scale,
        exp_sin: acc[2] * scale,
        expm_sin: acc[3] * scale,
        exp_sin_re: acc[4] * scale,
        cosh_h: acc[5] * scale,
        sinh_sin: acc[6] * scale,
        omega_r,
        delta,
    }
}

/// Convenience wrapper that derives the phi functions on the fly.
pub fn compute_kernels(omega_r: f64, delta: f64, corr: &CorrelationTable) -> RateKernels {
    compute_kernels_cached(omega_r, delta, &PhiFunctions::new(corr))
}

/// The seven scattering quantities at one (Omega, Delta) point, rad/ps.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhononRates {
    pub gamma_plus: f64,
    pub gamma_minus: f64,
    pub gamma_cd: f64,
    pub gamma_sd: f64,
    pub delta_pm: f64,
    pub gamma_gu_plus: f64,
    pub gamma_gu_minus: f64,
}

impl PhononRates {
    pub const ZERO: PhononRates = PhononRates {
        gamma_plus: 0.0,
        gamma_minus: 0.0,
        gamma_cd: 0.0,
        gamma_sd: 0.0,
        delta_pm: 0.0,
        gamma_gu_plus: 0.0,
        gamma_gu_minus: 0.0,
    };
}

/// Combine kernels with the phase-dependent prefactors of <B>Omega.
///
/// The kernels must have been computed at Omega_R = mean_b * |omega| and the
/// same delta; a mismatch is a contract violation.
pub fn assemble_rates(
    omega: Complex64,
    delta: f64,
    kernels: &RateKernels,
    mean_b: f64,
) -> Result<PhononRates> {
    let omega_r = mean_b * omega.norm();
    let tol = 1e-9 * omega_r.max(1.0);
    if (kernels.omega_r - omega_r).abs() > tol || (kernels.delta - delta).abs() > 1e-9 * delta.abs().max(1.0) {
        return Err(SimError::Contract(format!(
            "kernels computed at (Omega_R={}, Delta={}) used with (Omega_R={omega_r}, Delta={delta})",
            kernels.omega_r, kernels.delta
        )));
    }
    Ok(assemble_rates_unchecked(omega, kernels, mean_b))
}

/// Same as [`assemble_rates`] without the provenance check (hot path).
pub fn assemble_rates_unchecked(omega: Complex64, kernels: &RateKernels, mean_b: f64) -> PhononRates {
    let eff = mean_b * omega;
    let omega_r2 = eff.norm_sqr();
    let half_r2 = 0.5 * omega_r2;
    // Omega_S = Re^2 - Im^2, Omega_T = 2 Re Im of <B>Omega
    let omega_s = eff.re * eff.re - eff.im * eff.im;
    let omega_t = 2.0 * eff.re * eff.im;

    let sum = kernels.cosh_f + kernels.sinh_cos;
    PhononRates {
        gamma_plus: half_r2 * (sum - kernels.exp_sin),
        gamma_minus: half_r2 * (sum + kernels.exp_sin),
        gamma_cd: 0.5 * (omega_s * (kernels.sinh_cos - kernels.cosh_f) + omega_t * kernels.expm_sin),
        gamma_sd: 0.5 * (omega_t * (kernels.sinh_cos - kernels.cosh_f) - omega_s * kernels.expm_sin),
        delta_pm: half_r2 * kernels.exp_sin_re,
        gamma_gu_plus: half_r2 * (eff.im * kernels.cosh_h + eff.re * kernels.sinh_sin),
        gamma_gu_minus: half_r2 * (eff.re * kernels.cosh_h - eff.im * kernels.sinh_sin),
    }
}

/// Where a slice's rates come from during time stepping.
pub trait RateSource: Sync {
    fn mean_b(&self) -> f64;
    fn rates(&self, omega: Complex64, delta: f64) -> PhononRates;
}

/// Phonons off: <B> = 1, all seven quantities zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroRates;

impl RateSource for ZeroRates {
    fn mean_b(&self) -> f64 {
        1.0
    }
    fn rates(&self, _omega: Complex64, _delta: f64) -> PhononRates {
        PhononRates::ZERO
    }
}

/// Direct (untabulated) evaluation; used by oracle tests and small scans.
pub struct DirectRates {
    pub funcs: PhiFunctions,
    pub mean_b: f64,
}

impl DirectRates {
    pub fn new(corr: &CorrelationTable) -> Self {
        DirectRates {
            funcs: PhiFunctions::new(corr),
            mean_b: corr.mean_b,
        }
    }
}

impl RateSource for DirectRates {
    fn mean_b(&self) -> f64 {
        self.mean_b
    }
    fn rates(&self, omega: Complex64, delta: f64) -> PhononRates {
        let kernels = compute_kernels_cached(self.mean_b * omega.norm(), delta, &self.funcs);
        assemble_rates_unchecked(omega, &kernels, self.mean_b)
    }
}

/// Kernel grids tabulated on a uniform (Omega_R, Delta) lattice.
///
/// Layout is Omega-major: `grid[k][i_omega * n_delta + i_delta]`.
#[derive(Debug, Clone)]
pub struct RateTable {
    pub omega_axis: Vec<f64>,
    pub delta_axis: Vec<f64>,
    pub mean_b: f64,
    pub bath: PhononBathParams,
    grids: [Vec<f64>; 7],
}


impl RateTable {
    /// Tabulate kernels over [0, omega_r_max] x [delta_min, delta_max].
    ///
    /// Rows are independent and filled in parallel.
    pub fn build(
        corr: &CorrelationTable,
        omega_r_max: f64,
        delta_range: (f64, f64),
        resolution: (usize, usize),
    ) -> Result<Self> {
        let (n_omega, n_delta) = resolution;
        if n_omega < 2 || n_delta < 2 {
            return Err(SimError::Config(format!(
                "rate table needs at least 2 nodes per axis, got {n_omega} x {n_delta}"
            )));
        }
        if !(omega_r_max > 0.0) || !(delta_range.1 > delta_range.0) {
            return Err(SimError::Config(
                "rate table domain must have positive extent".into(),
            ));
        }
        let omega_axis: Vec<f64> = (0..n_omega)
            .map(|i| omega_r_max * i as f64 / (n_omega - 1) as f64)
            .collect();
        let delta_axis: Vec<f64> = (0..n_delta)
            .map(|j| {
                delta_range.0 + (delta_range.1 - delta_range.0) * j as f64 / (n_delta - 1) as f64
            })
            .collect();
        let funcs = PhiFunctions::new(corr);
        let nodes: Vec<[f64; 7]> = (0..n_omega * n_delta)
            .into_par_iter()
            .map(|idx| {
                let k = compute_kernels_cached(
                    omega_axis[idx / n_delta],
                    delta_axis[idx % n_delta],
                    &funcs,
                );
                [
                    k.cosh_f,
                    k.sinh_cos,
                    k.exp_sin,
                    k.expm_sin,
                    k.exp_sin_re,
                    k.cosh_h,
                    k.sinh_sin,
                ]
            })
            .collect();
        let mut grids: [Vec<f64>; 7] = Default::default();
        for g in &mut grids {
            g.reserve(n_omega * n_delta);
        }
        for node in &nodes {
            for (k, g) in node.iter().zip(grids.iter_mut()) {
                g.push(*k);
            }
        }
        Ok(RateTable {
            omega_axis,
            delta_axis,
            mean_b: corr.mean_b,
            bath: corr.params,
            grids,
        })
    }

    pub fn omega_max(&self) -> f64 {
        *self.omega_axis.last().unwrap()
    }

    pub fn delta_range(&self) -> (f64, f64) {
        (self.delta_axis[0], *self.delta_axis.last().unwrap())
    }

    fn locate(axis: &[f64], x: f64) -> (usize, f64) {
        let min = axis[0];
        let step = axis[1] - axis[0];
        let t = (x - min) / step;
        let mut i = (t.floor() as isize).clamp(0, axis.len() as isize - 2) as usize;
        let mut frac = t - i as f64;
        // snap to nodes so node-aligned queries reproduce stored values exactly
        if frac < 1e-12 {
            frac = 0.0;
        } else if frac > 1.0 - 1e-12 {
            i += 1;
            frac = 0.0;
            if i == axis.len() - 1 {
                i -= 1;
                frac = 1.0;
            }
        }
        (i, frac)
    }

    fn interp(&self, grid: &[f64], io: usize, id: usize, fo: f64, fd: f64) -> f64 {
        let nd = self.delta_axis.len();
        let v00 = grid[io * nd + id];
        if fo == 0.0 && fd == 0.0 {
            return v00;
        }
        let v01 = grid[io * nd + id + 1];
        let v10 = grid[(io + 1) * nd + id];
        let v11 = grid[(io + 1) * nd + id + 1];
        (1.0 - fo) * ((1.0 - fd) * v00 + fd * v01) + fo * ((1.0 - fd) * v10 + fd * v11)
    }

    fn kernels_at(&self, io: usize, id: usize, fo: f64, fd: f64, omega_r: f64, delta: f64) -> RateKernels {
        RateKernels {
            cosh_f: self.interp(&self.grids[0], io, id, fo, fd),
            sinh_cos: self.interp(&self.grids[1], io, id, fo, fd),
            exp_sin: self.interp(&self.grids[2], io, id, fo, fd),
            expm_sin: self.interp(&self.grids[3], io, id, fo, fd),
            exp_sin_re: self.interp(&self.grids[4], io, id, fo, fd),
            cosh_h: self.interp(&self.grids[5], io, id, fo, fd),
            sinh_sin: self.interp(&self.grids[6], io, id, fo, fd),
            omega_r,
            delta,
        }
    }

    /// Bilinear kernel lookup; errors outside the table domain.
    pub fn lookup_kernels(&self, omega_r: f64, delta: f64) -> Result<RateKernels> {
        let (omin, omax) = (self.omega_axis[0], self.omega_max());
        if omega_r < omin || omega_r > omax * (1.0 + 1e-12) {
            return Err(SimError::OutOfRange {
                axis: "omega",
                value: omega_r,
                min: omin,
                max: omax,
            });
        }
        let (dmin, dmax) = self.delta_range();
        if delta < dmin - 1e-12 * dmin.abs().max(1.0) || delta > dmax + 1e-12 * dmax.abs().max(1.0) {
            return Err(SimError::OutOfRange {
                axis: "delta",
                value: delta,
                min: dmin,
                max: dmax,
            });
        }
        let (io, fo) = Self::locate(&self.omega_axis, omega_r.min(omax));
        let (id, fd) = Self::locate(&self.delta_axis, delta.clamp(dmin, dmax));
        Ok(self.kernels_at(io, id, fo, fd, omega_r, delta))
    }

    /// Lookup with both axes clamped to the table domain.
    ///
    /// Spectator detuning classes far outside the tabulated span carry
    /// negligible weight and near-zero rates; clamping them to the edge row
    /// keeps the hot path branch-light. Tables must span the physically
    /// active region.
    pub fn lookup_kernels_clamped(&self, omega_r: f64, delta: f64) -> RateKernels {
        let omega_c = omega_r.clamp(self.omega_axis[0], self.omega_max());
        let (dmin, dmax) = self.delta_range();
        let delta_c = delta.clamp(dmin, dmax);
        let (io, fo) = Self::locate(&self.omega_axis, omega_c);
        let (id, fd) = Self::locate(&self.delta_axis, delta_c);
        self.kernels_at(io, id, fo, fd, omega_r, delta)
    }

    /// Interpolated rates for a complex envelope value. Errors out of domain
    /// or if `mean_b` disagrees with the table's.
    pub fn lookup_rates(&self, omega: Complex64, delta: f64, mean_b: f64) -> Result<PhononRates> {
        if (mean_b - self.mean_b).abs() > 1e-9 {
            return Err(SimError::Contract(format!(
                "rate table built for <B> = {}, queried with {}",
                self.mean_b, mean_b
            )));
        }
        let kernels = self.lookup_kernels(mean_b * omega.norm(), delta)?;
        Ok(assemble_rates_unchecked(omega, &kernels, mean_b))
    }

    /// Cache key: hash of the bath parameters and grid geometry.
    pub fn cache_key(&self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(b"sitqd-rate-table-v1");
        for v in [
            self.bath.alpha_p,
            self.bath.omega_b,
            self.bath.temperature,
            self.mean_b,
            self.omega_axis[0],
            self.omega_max(),
            self.delta_axis[0],
            *self.delta_axis.last().unwrap(),
            self.omega_axis.len() as f64,
            self.delta_axis.len() as f64,
        ] {
            hasher.update(v.to_le_bytes());
        }
        hasher.finalize().into()
    }

    /// Serialize as the binary cache format: magic, version, key hash, axis
    /// sizes and vectors, then the seven kernel grids row-major, all
    /// little-endian f64.
    pub fn write_cache<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"QDRT")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&self.cache_key())?;
        w.write_all(&(self.omega_axis.len() as u64).to_le_bytes())?;
        w.write_all(&(self.delta_axis.len() as u64).to_le_bytes())?;
        for v in [
            self.mean_b,
            self.bath.alpha_p,
            self.bath.omega_b,
            self.bath.temperature,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for axis in [&self.omega_axis, &self.delta_axis] {
            for v in axis {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        for grid in &self.grids {
            for v in grid {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_cache<R: std::io::Read>(mut r: R) -> Result<Self> {
        fn read_f64<R: std::io::Read>(r: &mut R) -> Result<f64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(f64::from_le_bytes(b))
        }
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"QDRT" {
            return Err(SimError::Config("not a rate-table cache file".into()));
        }
        let mut ver = [0u8; 4];
        r.read_exact(&mut ver)?;
        if u32::from_le_bytes(ver) != 1 {
            return Err(SimError::Config("unsupported rate-table cache version".into()));
        }
        let mut key = [0u8; 32];
        r.read_exact(&mut key)?;
        let mut n8 = [0u8; 8];
        r.read_exact(&mut n8)?;
        let n_omega = u64::from_le_bytes(n8) as usize;
        r.read_exact(&mut n8)?;
        let n_delta = u64::from_le_bytes(n8) as usize;
        if n_omega < 2 || n_delta < 2 || n_omega * n_delta > 1 << 28 {
            return Err(SimError::Config("corrupt rate-table cache header".into()));
        }
        let mean_b = read_f64(&mut r)?;
        let bath = PhononBathParams {
            alpha_p: read_f64(&mut r)?,
            omega_b: read_f64(&mut r)?,
            temperature: read_f64(&mut r)?,
        };
        let mut omega_axis = Vec::with_capacity(n_omega);
        for _ in 0..n_omega {
            omega_axis.push(read_f64(&mut r)?);
        }
        let mut delta_axis = Vec::with_capacity(n_delta);
        for _ in 0..n_delta {
            delta_axis.push(read_f64(&mut r)?);
        }
        let mut grids: [Vec<f64>; 7] = Default::default();
        for grid in &mut grids {
            grid.reserve(n_omega * n_delta);
            for _ in 0..n_omega * n_delta {
                grid.push(read_f64(&mut r)?);
            }
        }
        let table = RateTable {
            omega_axis,
            delta_axis,
            mean_b,
            bath,
            grids,
        };
        if table.cache_key() != key {
            return Err(SimError::Config(
                "rate-table cache key mismatch (stale or corrupt file)".into(),
            ));
        }
        Ok(table)
    }
}

impl RateSource for RateTable {
    fn mean_b(&self) -> f64 {
        self.mean_b
    }
    fn rates(&self, omega: Complex64, delta: f64) -> PhononRates {
        let kernels = self.lookup_kernels_clamped(self.mean_b * omega.norm(), delta);
        assemble_rates_unchecked(omega, &kernels, self.mean_b)
    }
}
