use nvphot::constants::SPEED_OF_LIGHT_CM_S;
use nvphot::spectra::{
    radiative_rate_from_spectra, spectral_quantities, Spectrum, SpectrumKind, SyntheticBands,
};
use proptest::prelude::*;

fn k_r(bands: &SyntheticBands, sigma_max: f64, n: f64) -> f64 {
    let (a, l) = bands.spectra();
    let q = spectral_quantities(&a, &l, sigma_max, 1.0).unwrap();
    radiative_rate_from_spectra(&q, n).unwrap().k_r_mhz
}

/// Gaussian lines of FWHM `w` much narrower than their centers: the
/// absorption integral is `w √(π / 4 ln 2) / ν_a` and `⟨ν̃⁻³⟩ = ν_l⁻³`, up to
/// relative corrections of order `(w/ν)²`.
#[test]
fn narrow_lines_match_closed_form() {
    let (nu_a, nu_l, w) = (17_900.0, 14_500.0, 20.0);
    let bands = SyntheticBands {
        absorption_center_cm1: nu_a,
        absorption_fwhm_cm1: w,
        luminescence_center_cm1: nu_l,
        luminescence_fwhm_cm1: w,
        grid_min_cm1: 14_000.0,
        grid_max_cm1: 18_400.0,
        grid_step_cm1: 0.5,
    };
    let (sigma, n) = (3.1e-17, 2.42);
    let area = w * (std::f64::consts::PI / (4.0 * std::f64::consts::LN_2)).sqrt();
    let closed = n * n * 8.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_S * nu_l.powi(3) * sigma * area / nu_a / 1e6;
    let got = k_r(&bands, sigma, n);
    assert!((got / closed - 1.0).abs() < 1e-3, "{got} vs {closed}");
}

#[test]
fn grid_refinement_converges() {
    let coarse = k_r(&SyntheticBands::nv_like().with_step(20.0), 3.1e-17, 2.42);
    let fine = k_r(&SyntheticBands::nv_like().with_step(2.5), 3.1e-17, 2.42);
    assert!((coarse / fine - 1.0).abs() < 1e-6, "{coarse} vs {fine}");
}

#[test]
fn nv_like_bands_give_bulk_scale_rate() {
    let k = k_r(&SyntheticBands::nv_like(), 3.1e-17, 2.42);
    assert!((33.0..=55.0).contains(&k), "{k}");
}

#[test]
fn wavelength_input_maps_onto_wavenumbers() {
    let (a, l) = SyntheticBands::nv_like().with_step(5.0).spectra();
    let to_nm = |s: &Spectrum| s.samples().map(|(nu, v)| (1e7 / nu, v)).collect::<Vec<_>>();
    let a2 = Spectrum::from_wavelength_samples(SpectrumKind::AbsorptionShape, &to_nm(&a)).unwrap();
    let l2 = Spectrum::from_wavelength_samples(SpectrumKind::LuminescenceDensity, &to_nm(&l)).unwrap();
    let q1 = spectral_quantities(&a, &l, 3.1e-17, 1.0).unwrap();
    let q2 = spectral_quantities(&a2, &l2, 3.1e-17, 1.0).unwrap();
    assert!((q1.absorption_integral / q2.absorption_integral - 1.0).abs() < 1e-9);
    assert!((q1.mean_inv_cubed_cm3 / q2.mean_inv_cubed_cm3 - 1.0).abs() < 1e-9);
}

#[test]
fn mirror_image_bands_are_symmetric() {
    let (a, l) = SyntheticBands::nv_like().spectra();
    let q = spectral_quantities(&a, &l, 3.1e-17, 1.0).unwrap();
    assert!(q.mirror_symmetry > 0.99, "{}", q.mirror_symmetry);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rate_is_linear_in_sigma_and_quadratic_in_n(sigma in 1e-18f64..1e-16, n in 1.0f64..3.0) {
        let base = k_r(&SyntheticBands::nv_like().with_step(50.0), 1e-17, 1.0);
        let k = k_r(&SyntheticBands::nv_like().with_step(50.0), sigma, n);
        prop_assert!((k / (base * sigma / 1e-17 * n * n) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn luminescence_scale_does_not_matter(scale in 1e-6f64..1e6) {
        let (a, l) = SyntheticBands::nv_like().with_step(50.0).spectra();
        let scaled: Vec<(f64, f64)> = l.samples().map(|(nu, v)| (nu, v * scale)).collect();
        let l2 = Spectrum::new(SpectrumKind::LuminescenceDensity, &scaled).unwrap();
        let q1 = spectral_quantities(&a, &l, 3.1e-17, 1.0).unwrap();
        let q2 = spectral_quantities(&a, &l2, 3.1e-17, 1.0).unwrap();
        prop_assert!((q1.mean_inv_cubed_cm3 / q2.mean_inv_cubed_cm3 - 1.0).abs() < 1e-12);
    }
}
