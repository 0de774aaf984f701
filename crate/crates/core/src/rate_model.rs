//! Reduced level scheme of the NV center under optical pumping.
//!
//! Three populations are tracked: the ground triplet `ρ_T`, the excited triplet
//! `ρ_T*` and the metastable singlet `ρ_S`. Optical excitation (cross-section
//! `σ`) pumps `T → T*`; `T*` decays back with total rate `k = k_r + k_nr`, is
//! re-excited to higher orbitals that relax straight to `T` (cross-section
//! `σ′`), and a fraction `α` of it (the `m = ±1` sub-levels) crosses to the
//! singlet at rate `k_TS`. The singlet returns to `T` at `k_ST`.
//!
//! Rates are in MHz. Intensities are given in kW/cm² and converted to photon
//! flux with `hc/λ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{
    kw_cm2_to_photon_flux, photon_energy_j, photon_flux_to_kw_cm2, DEFAULT_WAVELENGTH_NM,
    HZ_PER_MHZ,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RateError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("singlet cannot empty (k_ST = 0) while alpha * k_TS > 0")]
    SingularShelving,
    #[error("absorption cross-section is zero; (sigma + sigma') / sigma is undefined")]
    UndefinedRatio,
    #[error("ODMR contrast must be below 1, got {0}")]
    ContrastOutOfRange(f64),
}

pub type Result<T> = std::result::Result<T, RateError>;

/// Thermal-equilibrium value of `α`: all three spin sub-levels equally populated.
pub const ALPHA_EQUILIBRIUM: f64 = 2.0 / 3.0;

/// Singlet ¹E → ground-triplet rate for a ~300 ns lifetime, MHz.
pub const K_ST_ROOM_TEMPERATURE_MHZ: f64 = 1e3 / 300.0;

/// Bulk absorption cross-section at 532 nm, cm².
pub const SIGMA_BULK_CM2: f64 = 3.1e-17;

/// Bulk radiative rate from the absorption/emission spectra, MHz.
pub const K_R_BULK_MHZ: f64 = 44.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhotophysicsParams {
    /// Ground → excited triplet absorption cross-section, cm².
    pub sigma_cm2: f64,
    /// Excited triplet → higher orbital cross-section, cm².
    pub sigma_prime_cm2: f64,
    pub k_r_mhz: f64,
    pub k_nr_mhz: f64,
    /// Intersystem crossing from the `m = ±1` excited sub-levels.
    pub k_ts_mhz: f64,
    pub k_st_mhz: f64,
    /// Relative population of the `m = ±1` excited sub-levels.
    pub alpha: f64,
}

impl Default for PhotophysicsParams {
    fn default() -> Self {
        Self::bulk_reference()
    }
}

impl PhotophysicsParams {
    /// Bulk diamond: `k = 80 MHz`, `k_TS / k = 0.5`, `k_r = 44 MHz`.
    pub fn bulk_reference() -> Self {
        Self {
            sigma_cm2: SIGMA_BULK_CM2,
            sigma_prime_cm2: 0.0,
            k_r_mhz: K_R_BULK_MHZ,
            k_nr_mhz: 80.0 - K_R_BULK_MHZ,
            k_ts_mhz: 40.0,
            k_st_mhz: K_ST_ROOM_TEMPERATURE_MHZ,
            alpha: 0.2,
        }
    }

    /// Nanocrystal in water: `k = 40 MHz`, `k_TS / k = 1`, `k_r ≈ 0.19 × 44 MHz`,
    /// `σ ≈ 0.61 × σ_bulk`.
    pub fn nano_reference() -> Self {
        Self {
            sigma_cm2: 2.0e-17,
            sigma_prime_cm2: 0.0,
            k_r_mhz: 8.0,
            k_nr_mhz: 32.0,
            k_ts_mhz: 40.0,
            k_st_mhz: K_ST_ROOM_TEMPERATURE_MHZ,
            alpha: 0.2,
        }
    }

    /// Total decay rate of the excited triplet excluding intersystem crossing.
    pub fn k_mhz(&self) -> f64 {
        self.k_r_mhz + self.k_nr_mhz
    }

    /// `Φ_NV = k_r / k`.
    pub fn quantum_yield(&self) -> f64 {
        self.k_r_mhz / self.k_mhz()
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_cm2", self.sigma_cm2),
            ("sigma_prime_cm2", self.sigma_prime_cm2),
            ("k_r_mhz", self.k_r_mhz),
            ("k_nr_mhz", self.k_nr_mhz),
            ("k_ts_mhz", self.k_ts_mhz),
            ("k_st_mhz", self.k_st_mhz),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(RateError::InvalidParameter(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=ALPHA_EQUILIBRIUM).contains(&self.alpha) {
            return Err(RateError::InvalidParameter(format!(
                "alpha must lie in [0, 2/3], got {}",
                self.alpha
            )));
        }
        Ok(())
    }

    /// `α k_TS`, the shelving rate out of the excited triplet.
    fn shelving_mhz(&self) -> f64 {
        self.alpha * self.k_ts_mhz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExcitationConditions {
    pub wavelength_nm: f64,
    pub intensity_kw_cm2: f64,
    /// Photons per cm² delivered by one pulse, for pulsed excitation.
    pub pulse_fluence_cm2: f64,
}

impl Default for ExcitationConditions {
    fn default() -> Self {
        Self {
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            intensity_kw_cm2: 0.0,
            pulse_fluence_cm2: 0.0,
        }
    }
}

impl ExcitationConditions {
    pub fn continuous(intensity_kw_cm2: f64) -> Self {
        Self {
            intensity_kw_cm2,
            ..Self::default()
        }
    }

    /// Photon flux, photons·s⁻¹·cm⁻².
    pub fn photon_flux(&self) -> f64 {
        kw_cm2_to_photon_flux(self.intensity_kw_cm2, self.wavelength_nm)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_nm.is_finite() && self.wavelength_nm > 0.0) {
            return Err(RateError::InvalidParameter(format!(
                "wavelength must be positive, got {}",
                self.wavelength_nm
            )));
        }
        if !(self.intensity_kw_cm2.is_finite() && self.intensity_kw_cm2 >= 0.0) {
            return Err(RateError::InvalidParameter(format!(
                "intensity must be non-negative, got {}",
                self.intensity_kw_cm2
            )));
        }
        Ok(())
    }
}

/// Collection optics NA 0.9, averaged over NV orientations in bulk diamond.
pub const PHI_OPT_BULK_NA09: f64 = 0.023;
/// Collection optics NA 0.9, nanocrystal on a glass slide.
pub const PHI_OPT_NANO_GLASS_NA09: f64 = 0.14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionChain {
    /// Photodetector quantum efficiency.
    pub phi_pd: f64,
    /// Optical collection efficiency.
    pub phi_opt: f64,
}

impl Default for DetectionChain {
    /// Roughly 10 % overall, as for an NA 0.9 objective and a photon-counting camera.
    fn default() -> Self {
        Self {
            phi_pd: 0.7,
            phi_opt: PHI_OPT_NANO_GLASS_NA09,
        }
    }
}

impl DetectionChain {
    /// A chain characterised only by its total efficiency.
    pub fn with_total(phi_det: f64) -> Self {
        Self {
            phi_pd: 1.0,
            phi_opt: phi_det,
        }
    }

    pub fn phi_det(&self) -> f64 {
        self.phi_pd * self.phi_opt
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("phi_pd", self.phi_pd), ("phi_opt", self.phi_opt)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(RateError::InvalidParameter(format!(
                    "{name} must lie in (0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationState {
    pub rho_t: f64,
    pub rho_t_star: f64,
    pub rho_s: f64,
}

impl PopulationState {
    pub fn total(&self) -> f64 {
        self.rho_t + self.rho_t_star + self.rho_s
    }
}

/// Steady-state populations under continuous excitation.
pub fn steady_state(params: &PhotophysicsParams, exc: &ExcitationConditions) -> Result<PopulationState> {
    params.validate()?;
    exc.validate()?;
    steady_state_at_flux(params, exc.photon_flux())
}

/// Steady-state populations at photon flux `flux` (photons·s⁻¹·cm⁻²).
pub fn steady_state_at_flux(params: &PhotophysicsParams, flux: f64) -> Result<PopulationState> {
    let shelving = params.shelving_mhz();
    if params.k_st_mhz == 0.0 && shelving > 0.0 {
        return Err(RateError::SingularShelving);
    }
    let decay_hz = (params.k_mhz() + shelving) * HZ_PER_MHZ;
    if decay_hz <= 0.0 && flux > 0.0 {
        return Err(RateError::InvalidParameter(
            "k + alpha * k_TS must be positive".into(),
        ));
    }
    if flux == 0.0 || params.sigma_cm2 == 0.0 {
        return Ok(PopulationState {
            rho_t: 1.0,
            rho_t_star: 0.0,
            rho_s: 0.0,
        });
    }
    let pump = params.sigma_cm2 * flux;
    let shelf_ratio = if shelving > 0.0 {
        shelving / params.k_st_mhz
    } else {
        0.0
    };
    // σI · ((σ+σ′)/σ + α k_TS/k_ST) written without dividing by σ.
    let denom = (params.sigma_cm2 + params.sigma_prime_cm2) * flux + pump * shelf_ratio + decay_hz;
    let rho_t_star = pump / denom;
    let rho_s = rho_t_star * shelf_ratio;
    Ok(PopulationState {
        rho_t: 1.0 - rho_t_star - rho_s,
        rho_t_star,
        rho_s,
    })
}

/// `(σ + σ′) / σ`.
fn esa_ratio(params: &PhotophysicsParams) -> Result<f64> {
    if params.sigma_cm2 == 0.0 {
        return Err(RateError::UndefinedRatio);
    }
    Ok((params.sigma_cm2 + params.sigma_prime_cm2) / params.sigma_cm2)
}

/// Asymptotic detected photon rate at infinite intensity, MHz.
pub fn max_detected_rate(params: &PhotophysicsParams, det: &DetectionChain) -> Result<f64> {
    params.validate()?;
    let ratio = esa_ratio(params)?;
    let shelving = params.shelving_mhz();
    let trapped_fraction = if shelving == 0.0 {
        1.0 / ratio
    } else if params.k_st_mhz == 0.0 {
        return Err(RateError::SingularShelving);
    } else {
        params.k_st_mhz / (ratio * params.k_st_mhz + shelving)
    };
    Ok(params.k_r_mhz * det.phi_det() * trapped_fraction)
}

/// Photon flux (photons·s⁻¹·cm⁻²) at which the detected rate is half its asymptote.
pub fn saturation_photon_flux(params: &PhotophysicsParams) -> Result<f64> {
    params.validate()?;
    let ratio = esa_ratio(params)?;
    let shelving = params.shelving_mhz();
    if params.k_st_mhz == 0.0 && shelving > 0.0 {
        return Err(RateError::SingularShelving);
    }
    let rate_mhz = if shelving == 0.0 {
        params.k_mhz() / ratio
    } else {
        params.k_st_mhz * (shelving + params.k_mhz()) / (shelving + ratio * params.k_st_mhz)
    };
    Ok(rate_mhz * HZ_PER_MHZ / params.sigma_cm2)
}

/// Saturation intensity in kW/cm² at the wavelength of `exc`.
pub fn saturation_intensity(params: &PhotophysicsParams, exc: &ExcitationConditions) -> Result<f64> {
    exc.validate()?;
    Ok(photon_flux_to_kw_cm2(saturation_photon_flux(params)?, exc.wavelength_nm))
}

/// Detected photon rate (MHz) at photon flux `flux`.
pub fn detected_rate_at_flux(
    params: &PhotophysicsParams,
    det: &DetectionChain,
    flux: f64,
) -> Result<f64> {
    let pops = steady_state_at_flux(params, flux)?;
    Ok(params.k_r_mhz * det.phi_det() * pops.rho_t_star)
}

/// Probability that one excitation of the excited triplet yields a photon,
/// with a fraction `alpha` of excitations landing in the shelving sub-levels.
pub fn emission_probability(params: &PhotophysicsParams, alpha: f64) -> Result<f64> {
    let k = params.k_mhz();
    if k <= 0.0 {
        return Err(RateError::InvalidParameter("k must be positive".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(RateError::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    Ok((1.0 - alpha) * params.k_r_mhz / k + alpha * params.k_r_mhz / (k + params.k_ts_mhz))
}

/// Relative luminescence drop when resonant microwaves equalise the spin
/// populations, for a given `k / k_TS` and pre-microwave `alpha`.
pub fn odmr_contrast_ratio(k_over_kts: f64, alpha: f64) -> f64 {
    (ALPHA_EQUILIBRIUM - alpha) / (1.0 + k_over_kts - alpha)
}

pub fn odmr_contrast(params: &PhotophysicsParams, alpha: f64) -> Result<f64> {
    if params.k_ts_mhz <= 0.0 {
        return Err(RateError::InvalidParameter("k_TS must be positive".into()));
    }
    if !(0.0..=ALPHA_EQUILIBRIUM).contains(&alpha) {
        return Err(RateError::InvalidParameter(format!(
            "alpha must lie in [0, 2/3], got {alpha}"
        )));
    }
    Ok(odmr_contrast_ratio(params.k_mhz() / params.k_ts_mhz, alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdmrData {
    pub contrast: f64,
    pub k_over_kts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    /// `false` when `alpha` falls outside `[0, 2/3]`.
    pub physical: bool,
}

/// Inverts [`odmr_contrast_ratio`] for `alpha`.
pub fn alpha_from_contrast(data: &OdmrData) -> Result<AlphaEstimate> {
    let c = data.contrast;
    if !c.is_finite() || c >= 1.0 {
        return Err(RateError::ContrastOutOfRange(c));
    }
    if !(data.k_over_kts.is_finite() && data.k_over_kts >= 0.0) {
        return Err(RateError::InvalidParameter(format!(
            "k/k_TS must be non-negative, got {}",
            data.k_over_kts
        )));
    }
    let alpha = (ALPHA_EQUILIBRIUM - c * (1.0 + data.k_over_kts)) / (1.0 - c);
    Ok(AlphaEstimate {
        alpha,
        physical: (0.0..=ALPHA_EQUILIBRIUM).contains(&alpha),
    })
}

/// `1 + α k_TS / k`, the factor neglected in the simple quantum-yield estimate.
pub fn bracket_term(alpha: f64, kts_over_k: f64) -> f64 {
    1.0 + alpha * kts_over_k
}

/// Range of [`bracket_term`] for `α ∈ [0, 2/3]`.
pub fn bracket_bounds(kts_over_k: f64) -> (f64, f64) {
    (bracket_term(0.0, kts_over_k), bracket_term(ALPHA_EQUILIBRIUM, kts_over_k))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketCorrection {
    pub alpha: f64,
    pub kts_over_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumYieldInput {
    pub saturation_intensity_kw_cm2: f64,
    pub max_detected_rate_mhz: f64,
    pub phi_det: f64,
    pub sigma_cm2: f64,
    pub wavelength_nm: f64,
    pub correction: Option<BracketCorrection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumYieldEstimate {
    /// Estimate with the bracket term set to 1.
    pub yield_approx: f64,
    /// Bracket term when a correction was supplied.
    pub bracket: Option<f64>,
    /// `yield_approx / bracket` when a correction was supplied.
    pub yield_corrected: Option<f64>,
    /// Bracket range over `α ∈ [0, 2/3]`, when `k_TS / k` is known.
    pub bracket_bounds: Option<(f64, f64)>,
    /// `false` when the reported yield exceeds 1.
    pub physical: bool,
}

/// Quantum yield from a saturation measurement:
/// `Φ_NV = R_det (hc/λ) / (I_s φ_det σ)`, optionally divided by `1 + α k_TS / k`.
pub fn quantum_yield_from_saturation(input: &QuantumYieldInput) -> Result<QuantumYieldEstimate> {
    let positives = [
        ("saturation intensity", input.saturation_intensity_kw_cm2),
        ("max detected rate", input.max_detected_rate_mhz),
        ("phi_det", input.phi_det),
        ("sigma", input.sigma_cm2),
        ("wavelength", input.wavelength_nm),
    ];
    for (name, v) in positives {
        if !(v.is_finite() && v > 0.0) {
            return Err(RateError::InvalidParameter(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let rate_hz = input.max_detected_rate_mhz * HZ_PER_MHZ;
    let intensity_w_cm2 = input.saturation_intensity_kw_cm2 * 1e3;
    let yield_approx = rate_hz * photon_energy_j(input.wavelength_nm)
        / (intensity_w_cm2 * input.phi_det * input.sigma_cm2);
    let (bracket, yield_corrected, bounds) = match input.correction {
        Some(c) => {
            let b = bracket_term(c.alpha, c.kts_over_k);
            (Some(b), Some(yield_approx / b), Some(bracket_bounds(c.kts_over_k)))
        }
        None => (None, None, None),
    };
    let reported = yield_corrected.unwrap_or(yield_approx);
    Ok(QuantumYieldEstimate {
        yield_approx,
        bracket,
        yield_corrected,
        bracket_bounds: bounds,
        physical: reported <= 1.0,
    })
}

/// Excited-triplet population at the end of a short pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseResponse {
    /// `1 − exp(−𝓔(σ + σ′))`, the literature formula.
    pub rho_closed_form: f64,
    /// Exact solution of `dρ/d𝓔 = σ(1 − ρ) − σ′ρ`:
    /// `σ/(σ+σ′) · (1 − exp(−𝓔(σ + σ′)))`.
    pub rho_ode: f64,
}

pub fn short_pulse_population(fluence_cm2: f64, sigma_cm2: f64, sigma_prime_cm2: f64) -> Result<PulseResponse> {
    for (name, v) in [
        ("fluence", fluence_cm2),
        ("sigma", sigma_cm2),
        ("sigma_prime", sigma_prime_cm2),
    ] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(RateError::InvalidParameter(format!(
                "{name} must be non-negative, got {v}"
            )));
        }
    }
    let total = sigma_cm2 + sigma_prime_cm2;
    // 1 − e^{−x} without cancellation for small x.
    let excited = -(-fluence_cm2 * total).exp_m1();
    let rho_ode = if total == 0.0 {
        0.0
    } else {
        sigma_cm2 / total * excited
    };
    Ok(PulseResponse {
        rho_closed_form: excited,
        rho_ode,
    })
}
