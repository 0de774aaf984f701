use nalgebra::{Matrix3, Vector3};
use nvphot::constants::HZ_PER_MHZ;
use nvphot::rate_model::{
    alpha_from_contrast, detected_rate_at_flux, max_detected_rate, odmr_contrast_ratio, saturation_photon_flux,
    short_pulse_population, steady_state_at_flux, DetectionChain, OdmrData, PhotophysicsParams,
};
use proptest::prelude::*;

/// Populations `(T, T*, S)` from the rate matrix: T→T* at σI, T*→T at
/// `k + σ′I`, T*→S at `α k_TS`, S→T at `k_ST`. The balance equations with one
/// row replaced by normalisation are solved directly.
fn rate_matrix_oracle(p: &PhotophysicsParams, flux: f64) -> Vector3<f64> {
    let up = p.sigma_cm2 * flux;
    let down = p.k_mhz() * HZ_PER_MHZ + p.sigma_prime_cm2 * flux;
    let shelf = p.alpha * p.k_ts_mhz * HZ_PER_MHZ;
    let back = p.k_st_mhz * HZ_PER_MHZ;
    let m = Matrix3::new(
        1.0, 1.0, 1.0,
        up, -(down + shelf), 0.0,
        0.0, shelf, -back,
    );
    m.lu().solve(&Vector3::new(1.0, 0.0, 0.0)).expect("regular")
}

fn params() -> impl Strategy<Value = PhotophysicsParams> {
    (
        1e-18f64..1e-16,
        0.0f64..2.0,
        1.0f64..100.0,
        0.0f64..100.0,
        1.0f64..100.0,
        0.5f64..20.0,
        0.0f64..(2.0 / 3.0),
    )
        .prop_map(|(sigma, esa, k_r, k_nr, k_ts, k_st, alpha)| PhotophysicsParams {
            sigma_cm2: sigma,
            sigma_prime_cm2: esa * sigma,
            k_r_mhz: k_r,
            k_nr_mhz: k_nr,
            k_ts_mhz: k_ts,
            k_st_mhz: k_st,
            alpha,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn steady_state_matches_rate_matrix(p in params(), log_flux in 20.0f64..28.0) {
        let flux = 10f64.powf(log_flux);
        let s = steady_state_at_flux(&p, flux).unwrap();
        let o = rate_matrix_oracle(&p, flux);
        for (got, want) in [s.rho_t, s.rho_t_star, s.rho_s].iter().zip(o.iter()) {
            prop_assert!((got - want).abs() <= 1e-12 * want.abs().max(1e-3), "{} vs {}", got, want);
        }
        prop_assert!((s.total() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saturation_identity_over_five_decades(p in params(), frac in 0.0f64..1.0) {
        let det = DetectionChain::default();
        let r_max = max_detected_rate(&p, &det).unwrap();
        let i_s = saturation_photon_flux(&p).unwrap();
        let flux = i_s * 10f64.powf(-2.5 + 5.0 * frac);
        let direct = detected_rate_at_flux(&p, &det, flux).unwrap();
        let curve = r_max * flux / (flux + i_s);
        prop_assert!((direct / curve - 1.0).abs() < 1e-10);
    }

    #[test]
    fn odmr_round_trip(k_over_kts in 0.05f64..10.0, alpha in 0.0f64..(2.0 / 3.0)) {
        let c = odmr_contrast_ratio(k_over_kts, alpha);
        let est = alpha_from_contrast(&OdmrData { contrast: c, k_over_kts }).unwrap();
        prop_assert!((est.alpha - alpha).abs() < 1e-12);
        prop_assert!(est.physical);
    }
}

#[test]
fn half_saturation_is_exact() {
    for p in [PhotophysicsParams::bulk_reference(), PhotophysicsParams::nano_reference()] {
        let det = DetectionChain::default();
        let i_s = saturation_photon_flux(&p).unwrap();
        let half = detected_rate_at_flux(&p, &det, i_s).unwrap() / max_detected_rate(&p, &det).unwrap();
        assert!((half - 0.5).abs() < 1e-12, "{half}");
    }
}

/// Classic RK4 on `dρ/d𝓔 = σ(1 − ρ) − σ′ρ`.
fn rk4_pulse(fluence: f64, sigma: f64, sigma_prime: f64, steps: usize) -> f64 {
    let f = |rho: f64| sigma * (1.0 - rho) - sigma_prime * rho;
    let h = fluence / steps as f64;
    let mut rho = 0.0;
    for _ in 0..steps {
        let k1 = f(rho);
        let k2 = f(rho + 0.5 * h * k1);
        let k3 = f(rho + 0.5 * h * k2);
        let k4 = f(rho + h * k3);
        rho += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    rho
}

#[test]
fn short_pulse_matches_numerical_integration() {
    let sigma = 3.1e-17;
    for esa in [0.0, 0.3, 1.0, 2.5] {
        for x in [0.01, 0.3, 1.0, 3.0, 8.0] {
            let fluence = x / sigma;
            let r = short_pulse_population(fluence, sigma, esa * sigma).unwrap();
            let ode = rk4_pulse(fluence, sigma, esa * sigma, 4000);
            assert!((r.rho_ode - ode).abs() < 1e-9, "esa {esa} x {x}: {} vs {ode}", r.rho_ode);
        }
    }
}

#[test]
fn short_pulse_forms_coincide_without_esa() {
    for x in [1e-6, 0.1, 1.0, 10.0] {
        let r = short_pulse_population(x / 2e-17, 2e-17, 0.0).unwrap();
        let want = 1.0 - (-x).exp();
        assert!((r.rho_closed_form - want).abs() < 1e-12);
        assert!((r.rho_ode - want).abs() < 1e-12);
    }
}

#[test]
fn short_pulse_forms_diverge_with_esa() {
    let (s, sp) = (2e-17, 1e-17);
    let r = short_pulse_population(1e20, s, sp).unwrap();
    assert!((r.rho_closed_form - 1.0).abs() < 1e-12);
    assert!((r.rho_ode - s / (s + sp)).abs() < 1e-12);
}
