//! Radiative rate from absorption and luminescence spectra.
//!
//! ```text
//! k_r = n² · 8πc / ⟨ν̃⁻³⟩ · (g_l/g_u) · σ_max · ∫ σ̄(ν̃)/ν̃ dν̃
//! ```
//!
//! with wavenumbers in cm⁻¹, `c` in cm/s and `σ_max` in cm², giving `k_r` in s⁻¹.
//! `σ̄` is the absorption band normalised to 1 at its maximum and `⟨ν̃⁻³⟩` is
//! the luminescence-weighted mean of `ν̃⁻³`. No local-field factor enters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{HZ_PER_MHZ, SPEED_OF_LIGHT_CM_S};
use crate::ellipsoid_optics::{coupling_factors, Ellipsoid, OpticalEnvironment, OpticsError};
use crate::numeric::trapezoid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("spectrum needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("wavenumbers must be positive and strictly increasing (sample {index})")]
    NonMonotoneGrid { index: usize },
    #[error("spectral value at sample {index} is negative or non-finite: {value}")]
    InvalidValue { index: usize, value: f64 },
    #[error("spectrum is identically zero")]
    ZeroSpectrum,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
}

pub type Result<T> = std::result::Result<T, SpectrumError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// Peak-normalised absorption band `σ̄`.
    AbsorptionShape,
    /// Luminescence spectral density in arbitrary units.
    LuminescenceDensity,
}

/// Samples on a strictly increasing wavenumber grid (cm⁻¹).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    kind: SpectrumKind,
    wavenumbers: Vec<f64>,
    values: Vec<f64>,
}

impl Spectrum {
    /// Builds a spectrum from `(wavenumber_cm1, value)` pairs. Absorption
    /// spectra are rescaled so that their maximum is 1.
    pub fn new(kind: SpectrumKind, samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(SpectrumError::TooFewSamples(samples.len()));
        }
        for (i, &(nu, v)) in samples.iter().enumerate() {
            if !(nu.is_finite() && nu > 0.0) || (i > 0 && nu <= samples[i - 1].0) {
                return Err(SpectrumError::NonMonotoneGrid { index: i });
            }
            if !(v.is_finite() && v >= 0.0) {
                return Err(SpectrumError::InvalidValue { index: i, value: v });
            }
        }
        let wavenumbers: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mut values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let peak = values.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(SpectrumError::ZeroSpectrum);
        }
        if kind == SpectrumKind::AbsorptionShape {
            values.iter_mut().for_each(|v| *v /= peak);
        }
        Ok(Self {
            kind,
            wavenumbers,
            values,
        })
    }

    /// Builds a spectrum from `(wavelength_nm, value)` pairs in any order.
    /// Each point is mapped to `ν̃ = 10⁷ / λ` without a Jacobian.
    pub fn from_wavelength_samples(kind: SpectrumKind, samples: &[(f64, f64)]) -> Result<Self> {
        let mut converted = Vec::with_capacity(samples.len());
        for (i, &(lambda, v)) in samples.iter().enumerate() {
            if !(lambda.is_finite() && lambda > 0.0) {
                return Err(SpectrumError::NonMonotoneGrid { index: i });
            }
            converted.push((1e7 / lambda, v));
        }
        converted.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(kind, &converted)
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavenumbers.iter().copied().zip(self.values.iter().copied())
    }

    /// Wavenumber of the largest sample.
    pub fn peak_wavenumber(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        self.wavenumbers[i]
    }

    /// Linear interpolation, zero outside the sampled range.
    pub fn value_at(&self, nu: f64) -> f64 {
        let w = &self.wavenumbers;
        if nu < w[0] || nu > w[w.len() - 1] {
            return 0.0;
        }
        let hi = w.partition_point(|&x| x < nu).max(1);
        let lo = hi - 1;
        let t = (nu - w[lo]) / (w[hi] - w[lo]);
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }
}

/// Intermediate quantities of the spectral radiative-rate relation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralQuantities {
    /// `⟨ν̃⁻³⟩` over the luminescence, cm³.
    pub mean_inv_cubed_cm3: f64,
    /// `∫ σ̄/ν̃ dν̃`, dimensionless.
    pub absorption_integral: f64,
    pub sigma_max_cm2: f64,
    /// `g_l / g_u`.
    pub degeneracy_ratio: f64,
    /// Overlap of the peak-normalised absorption band with the luminescence
    /// band reflected about the midpoint of their maxima, in `[0, 1]`.
    /// Reported only; not used in the rate.
    pub mirror_symmetry: f64,
}

pub fn spectral_quantities(
    absorption: &Spectrum,
    luminescence: &Spectrum,
    sigma_max_cm2: f64,
    degeneracy_ratio: f64,
) -> Result<SpectralQuantities> {
    if absorption.kind != SpectrumKind::AbsorptionShape {
        return Err(SpectrumError::InvalidParameter(
            "first spectrum must be an absorption shape".into(),
        ));
    }
    if luminescence.kind != SpectrumKind::LuminescenceDensity {
        return Err(SpectrumError::InvalidParameter(
            "second spectrum must be a luminescence density".into(),
        ));
    }
    for (name, v) in [("sigma_max", sigma_max_cm2), ("degeneracy ratio", degeneracy_ratio)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(SpectrumError::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let lw = &luminescence.wavenumbers;
    let weighted: Vec<f64> = luminescence
        .samples()
        .map(|(nu, s)| s / (nu * nu * nu))
        .collect();
    let mean_inv_cubed_cm3 = trapezoid(lw, &weighted) / trapezoid(lw, &luminescence.values);

    let aw = &absorption.wavenumbers;
    let per_nu: Vec<f64> = absorption.samples().map(|(nu, s)| s / nu).collect();
    let absorption_integral = trapezoid(aw, &per_nu);

    Ok(SpectralQuantities {
        mean_inv_cubed_cm3,
        absorption_integral,
        sigma_max_cm2,
        degeneracy_ratio,
        mirror_symmetry: mirror_symmetry(absorption, luminescence),
    })
}

fn mirror_symmetry(absorption: &Spectrum, luminescence: &Spectrum) -> f64 {
    let mirror = 0.5 * (absorption.peak_wavenumber() + luminescence.peak_wavenumber());
    let lum_peak = luminescence.values.iter().copied().fold(0.0, f64::max);
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for (nu, a) in absorption.samples() {
        let l = luminescence.value_at(2.0 * mirror - nu) / lum_peak;
        lo.push(a.min(l));
        hi.push(a.max(l));
    }
    let denom = trapezoid(&absorption.wavenumbers, &hi);
    if denom > 0.0 {
        trapezoid(&absorption.wavenumbers, &lo) / denom
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiativeRate {
    pub k_r_mhz: f64,
    pub refractive_index: f64,
    /// `n² · 8πc / ⟨ν̃⁻³⟩` in s⁻¹·cm⁻².
    pub prefactor: f64,
    pub quantities: SpectralQuantities,
}

pub fn radiative_rate_from_spectra(q: &SpectralQuantities, n: f64) -> Result<RadiativeRate> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(SpectrumError::InvalidParameter(format!(
            "refractive index must be at least 1, got {n}"
        )));
    }
    let prefactor = n * n * 8.0 * std::f64::consts::PI * SPEED_OF_LIGHT_CM_S / q.mean_inv_cubed_cm3;
    let k_r_hz = prefactor * q.degeneracy_ratio * q.sigma_max_cm2 * q.absorption_integral;
    Ok(RadiativeRate {
        k_r_mhz: k_r_hz / HZ_PER_MHZ,
        refractive_index: n,
        prefactor,
        quantities: *q,
    })
}

/// Per-axis `|emission · n² / absorption − 1|` for the free-standing coupling
/// factors; zero up to rounding for every shape and environment.
pub fn thermodynamic_consistency(shape: &Ellipsoid, env: &OpticalEnvironment) -> Result<[f64; 3]> {
    let fc = coupling_factors(shape, env)?;
    let n2 = fc.n_rel * fc.n_rel;
    Ok([0, 1, 2].map(|i| (fc.emission[i] * n2 / fc.absorption[i] - 1.0).abs()))
}

/// Parameters of a Gaussian band pair standing in for measured NV spectra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBands {
    pub absorption_center_cm1: f64,
    pub absorption_fwhm_cm1: f64,
    pub luminescence_center_cm1: f64,
    pub luminescence_fwhm_cm1: f64,
    pub grid_min_cm1: f64,
    pub grid_max_cm1: f64,
    pub grid_step_cm1: f64,
}

impl SyntheticBands {
    /// Synthetic NV-like pair: absorption band at 17 900 cm⁻¹ (≈ 560 nm),
    /// luminescence at 14 500 cm⁻¹ (≈ 690 nm), both 2 000 cm⁻¹ FWHM, mirror
    /// images of each other about 16 200 cm⁻¹. Not digitised data.
    pub fn nv_like() -> Self {
        Self {
            absorption_center_cm1: 17_900.0,
            absorption_fwhm_cm1: 2_000.0,
            luminescence_center_cm1: 14_500.0,
            luminescence_fwhm_cm1: 2_000.0,
            grid_min_cm1: 8_000.0,
            grid_max_cm1: 26_000.0,
            grid_step_cm1: 10.0,
        }
    }

    pub fn with_step(self, grid_step_cm1: f64) -> Self {
        Self {
            grid_step_cm1,
            ..self
        }
    }

    fn grid(&self) -> Vec<f64> {
        let n = ((self.grid_max_cm1 - self.grid_min_cm1) / self.grid_step_cm1).round() as usize;
        (0..=n)
            .map(|i| self.grid_min_cm1 + i as f64 * self.grid_step_cm1)
            .collect()
    }

    /// `(absorption, luminescence)`.
    pub fn spectra(&self) -> (Spectrum, Spectrum) {
        let grid = self.grid();
        let band = |center: f64, fwhm: f64| -> Vec<(f64, f64)> {
            let k = 4.0 * std::f64::consts::LN_2 / (fwhm * fwhm);
            grid.iter()
                .map(|&nu| (nu, (-k * (nu - center).powi(2)).exp()))
                .collect()
        };
        let abs = Spectrum::new(
            SpectrumKind::AbsorptionShape,
            &band(self.absorption_center_cm1, self.absorption_fwhm_cm1),
        )
        .expect("synthetic grid is valid");
        let lum = Spectrum::new(
            SpectrumKind::LuminescenceDensity,
            &band(self.luminescence_center_cm1, self.luminescence_fwhm_cm1),
        )
        .expect("synthetic grid is valid");
        (abs, lum)
    }
}
