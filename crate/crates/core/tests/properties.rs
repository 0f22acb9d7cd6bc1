//! Property tests for the module invariants.

use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;

use sitqd::analysis::{area_theorem_solution, detect_peaks, pulse_area};
use sitqd::bath::{CorrelationTable, PhononBathParams};
use sitqd::bloch::{master_equation_rhs, step_rk4, QdState, RelaxationParams};
use sitqd::ensemble::DetuningEnsemble;
use sitqd::propagation::sech_envelope;
use sitqd::rates::{compute_kernels_cached, PhiFunctions, PhononRates, ZeroRates};
use sitqd::units::energy_to_angular_frequency;

fn shared_phi() -> &'static PhiFunctions {
    static PHI: OnceLock<PhiFunctions> = OnceLock::new();
    PHI.get_or_init(|| {
        let params = PhononBathParams {
            alpha_p: 0.03,
            omega_b: energy_to_angular_frequency(1.0),
            temperature: 4.2,
        };
        PhiFunctions::new(&CorrelationTable::build_resolving(&params, 12.0).unwrap())
    })
}

fn arb_state() -> impl Strategy<Value = QdState> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(p, r, phase)| {
        let rho11 = p;
        let rho22 = 1.0 - p;
        let amp = (rho11 * rho22).sqrt() * r;
        QdState {
            rho11,
            rho22,
            rho12: Complex64::from_polar(amp, phase),
        }
    })
}

fn arb_rates() -> impl Strategy<Value = PhononRates> {
    (
        0.0..0.01f64,
        0.0..0.01f64,
        -0.005..0.005f64,
        -0.005..0.005f64,
        -0.005..0.005f64,
        -0.001..0.001f64,
        -0.001..0.001f64,
    )
        .prop_map(|(gp, gm, gcd, gsd, dpm, gup, gum)| PhononRates {
            gamma_plus: gp,
            gamma_minus: gm,
            gamma_cd: gcd,
            gamma_sd: gsd,
            delta_pm: dpm,
            gamma_gu_plus: gup,
            gamma_gu_minus: gum,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    // The master equation is exactly traceless for any state and rates.
    #[test]
    fn rhs_is_traceless(
        state in arb_state(),
        rates in arb_rates(),
        om_re in -0.5..0.5f64,
        om_im in -0.5..0.5f64,
        delta in -5.0..5.0f64,
        mean_b in 0.5..1.0f64,
    ) {
        let relax = RelaxationParams { gamma: 5e-4, gamma_d: 5e-4 };
        let d = master_equation_rhs(
            &state,
            Complex64::new(om_re, om_im),
            delta,
            &rates,
            &relax,
            mean_b,
        );
        prop_assert!((d.d_rho11 + d.d_rho22).abs() < 1e-15);
    }

    // One RK4 step from a physical state keeps trace and positivity.
    #[test]
    fn rk4_step_preserves_invariants(
        state in arb_state(),
        om_re in -0.4..0.4f64,
        om_im in -0.4..0.4f64,
        delta in -4.0..4.0f64,
        dt in 0.005..0.06f64,
    ) {
        let relax = RelaxationParams { gamma: 5e-4, gamma_d: 5e-4 };
        let om = Complex64::new(om_re, om_im);
        let (next, _) = step_rk4(&state, om, om, om, delta, dt, &ZeroRates, &relax).unwrap();
        prop_assert!((next.trace() - 1.0).abs() < 1e-9);
        prop_assert!(next.positivity_defect() < 1e-9);
    }

    // Pulse area scales linearly with the envelope.
    #[test]
    fn area_scales_linearly(theta in 0.1..20.0f64, scale in 0.1..10.0f64) {
        let tau: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.05).collect();
        let row = sech_envelope(theta, 6.373, 100.0, &tau);
        let scaled: Vec<Complex64> = row.iter().map(|v| scale * v).collect();
        let a = pulse_area(&row, &tau);
        let b = pulse_area(&scaled, &tau);
        prop_assert!((b - scale * a).abs() < 1e-9 * b.abs().max(1.0));
    }

    // detect_peaks is invariant under uniform rescaling.
    #[test]
    fn peak_detection_scale_invariant(
        theta1 in 3.0..9.0f64,
        theta2 in 3.0..9.0f64,
        scale in 0.01..100.0f64,
    ) {
        let tau: Vec<f64> = (0..=6000).map(|i| i as f64 * 0.05).collect();
        let row: Vec<Complex64> = sech_envelope(theta1, 6.373, 80.0, &tau)
            .iter()
            .zip(&sech_envelope(theta2, 6.373, 220.0, &tau))
            .map(|(a, b)| a + b)
            .collect();
        let scaled: Vec<Complex64> = row.iter().map(|v| scale * v).collect();
        let m1 = detect_peaks(&row, &tau, 0.05).unwrap();
        let m2 = detect_peaks(&scaled, &tau, 0.05).unwrap();
        prop_assert_eq!(m1.peak_count, m2.peak_count);
        prop_assert!((m2.peak_time - m1.peak_time).abs() < 1e-12);
    }

    // The area-theorem solution contracts monotonically toward the stable
    // fixed point 2 n pi.
    #[test]
    fn area_solution_contracts(
        n in 0i32..3,
        frac in -0.95..0.95f64,
        alpha in 0.5..20.0f64,
        z1 in 0.01..2.0f64,
        dz in 0.01..2.0f64,
    ) {
        let two_pi = std::f64::consts::TAU;
        let target = two_pi * n as f64;
        let theta0 = target + frac * std::f64::consts::PI * 0.999;
        prop_assume!(theta0 > 0.0);
        let a = area_theorem_solution(theta0, alpha, z1).unwrap();
        let b = area_theorem_solution(theta0, alpha, z1 + dz).unwrap();
        prop_assert!((b - target).abs() <= (a - target).abs() + 1e-12);
        prop_assert!((a - target).abs() <= (theta0 - target).abs() + 1e-12);
    }

    // Gauss-Hermite rules reproduce the Gaussian moments for any geometry.
    #[test]
    fn gauss_hermite_moments(
        sigma in 0.1..30.0f64,
        delta_c in -20.0..20.0f64,
        n in 3usize..40,
    ) {
        let e = DetuningEnsemble::gauss_hermite(sigma, delta_c, n).unwrap();
        let w: f64 = e.weights.iter().sum();
        let mean: f64 = e.nodes.iter().zip(&e.weights).map(|(d, w)| d * w).sum();
        let var: f64 = e
            .nodes
            .iter()
            .zip(&e.weights)
            .map(|(d, w)| (d - delta_c).powi(2) * w)
            .sum();
        prop_assert!((w - 1.0).abs() < 1e-11);
        prop_assert!((mean - delta_c).abs() < 1e-8 * delta_c.abs().max(1.0));
        prop_assert!((var - sigma * sigma).abs() < 1e-8 * sigma * sigma);
    }

    // Kernel parity in the detuning: even/odd exactly as the integrands say.
    #[test]
    fn kernel_parity(omega_r in 0.0..0.5f64, delta in 0.01..10.0f64) {
        let funcs = shared_phi();
        let kp = compute_kernels_cached(omega_r, delta, funcs);
        let km = compute_kernels_cached(omega_r, -delta, funcs);
        let tol = 1e-12;
        prop_assert!((kp.cosh_f - km.cosh_f).abs() < tol);
        prop_assert!((kp.sinh_cos - km.sinh_cos).abs() < tol);
        prop_assert!((kp.sinh_sin - km.sinh_sin).abs() < tol);
        prop_assert!((kp.exp_sin + km.exp_sin).abs() < tol);
        prop_assert!((kp.expm_sin + km.expm_sin).abs() < tol);
        prop_assert!((kp.exp_sin_re + km.exp_sin_re).abs() < tol);
        prop_assert!((kp.cosh_h + km.cosh_h).abs() < tol);
    }
}

// Bilinear interpolation stays within the corner values (no overshoot), and
// node queries are exact. Plain test: the table build is too heavy per case.
#[test]
fn bilinear_lookup_bounded_by_corners() {
    let params = PhononBathParams {
        alpha_p: 0.03,
        omega_b: energy_to_angular_frequency(1.0),
        temperature: 4.2,
    };
    let corr = CorrelationTable::build_resolving(&params, 6.0).unwrap();
    let table = sitqd::rates::RateTable::build(&corr, 0.4, (-4.0, 4.0), (17, 33)).unwrap();
    let mut state = 0xabcdef12u64;
    let mut rng = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..500 {
        let om = 0.4 * rng();
        let dl = -4.0 + 8.0 * rng();
        let k = table.lookup_kernels(om, dl).unwrap();
        // corners of the containing cell
        let io = ((om / 0.4) * 16.0).floor().min(15.0) as usize;
        let id = (((dl + 4.0) / 8.0) * 32.0).floor().min(31.0) as usize;
        let corners: Vec<sitqd::rates::RateKernels> = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|(a, b)| {
                table
                    .lookup_kernels(table.omega_axis[io + a], table.delta_axis[id + b])
                    .unwrap()
            })
            .collect();
        let lo = corners.iter().map(|c| c.sinh_cos).fold(f64::MAX, f64::min);
        let hi = corners.iter().map(|c| c.sinh_cos).fold(f64::MIN, f64::max);
        assert!(
            k.sinh_cos >= lo - 1e-15 && k.sinh_cos <= hi + 1e-15,
            "bilinear overshoot: {} not in [{lo}, {hi}]",
            k.sinh_cos
        );
    }
}
