//! Seeded Monte Carlo batches of NV-doped nanocrystals.
//!
//! Each crystal is a triaxial ellipsoid with a lognormal equivalent diameter,
//! uniform axis ratios, a uniformly random lattice orientation and a Poisson
//! number of NV centers. Its centers inherit the bulk photophysics scaled by the
//! crystal's local-field factors, which gives the true saturated rate and
//! saturation power that [`synthesize_observations`] turns into noisy
//! saturation curves.
//!
//! Every crystal draws from its own ChaCha stream (`stream = index`), so
//! output does not depend on thread count or scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, LogNormal, Poisson, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::HZ_PER_MHZ;
use crate::ellipsoid_optics::{coupling_factors, Ellipsoid, FieldCoupling, OpticalEnvironment, OpticsError};
use crate::rate_model::{
    max_detected_rate, saturation_intensity, DetectionChain, ExcitationConditions, PhotophysicsParams, RateError,
};
use crate::sizing::{saturation_curve, sphere_volume, IrradianceProfile, ObservationRow, SuspensionSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// Lognormal distribution of equivalent-sphere diameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizeDistribution {
    pub median_nm: f64,
    /// Standard deviation of `ln d`.
    pub sigma_ln: f64,
}

impl Default for SizeDistribution {
    fn default() -> Self {
        Self {
            median_nm: 75.0,
            sigma_ln: 0.35,
        }
    }
}

/// Bounds on the two shorter-to-longest axis ratios, drawn independently and uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeDistribution {
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl Default for ShapeDistribution {
    fn default() -> Self {
        Self {
            min_ratio: 0.5,
            max_ratio: 1.0,
        }
    }
}

/// 300 centers in a 100 nm sphere.
pub const DEFAULT_NV_DENSITY_NM3: f64 = 300.0 / (std::f64::consts::PI * 1e6 / 6.0);

/// Focal area that maps 0.05 W onto 3.5 kW/cm².
pub const DEFAULT_BEAM_AREA_CM2: f64 = 0.05 / 3.5e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub crystal_count: usize,
    pub size: SizeDistribution,
    pub shape: ShapeDistribution,
    /// NV centers per nm³.
    pub nv_density_nm3: f64,
    /// Probability that a crystal holds no NV center at all.
    pub nv_free_fraction: f64,
    pub environment: OpticalEnvironment,
    /// Bulk photophysics, scaled per crystal by its field factors.
    pub photophysics: PhotophysicsParams,
    pub detection: DetectionChain,
    pub wavelength_nm: f64,
    /// Beam area converting intensity (kW/cm²) into beam-center power (W).
    pub beam_area_cm2: f64,
    /// Crystals are scattered uniformly over a disc of this radius.
    pub field_radius_um: f64,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            crystal_count: 500,
            size: SizeDistribution::default(),
            shape: ShapeDistribution::default(),
            nv_density_nm3: DEFAULT_NV_DENSITY_NM3,
            nv_free_fraction: 0.0,
            environment: OpticalEnvironment::on_glass(),
            photophysics: PhotophysicsParams::bulk_reference(),
            detection: DetectionChain::default(),
            wavelength_nm: crate::constants::DEFAULT_WAVELENGTH_NM,
            beam_area_cm2: DEFAULT_BEAM_AREA_CM2,
            field_radius_um: 600.0,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.crystal_count == 0 {
            return bad("crystal_count must be positive".into());
        }
        if !(self.size.median_nm.is_finite() && self.size.median_nm > 0.0) {
            return bad(format!("size.median_nm must be positive, got {}", self.size.median_nm));
        }
        if !(self.size.sigma_ln.is_finite() && self.size.sigma_ln >= 0.0) {
            return bad(format!("size.sigma_ln must be non-negative, got {}", self.size.sigma_ln));
        }
        let (lo, hi) = (self.shape.min_ratio, self.shape.max_ratio);
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return bad(format!("shape ratios need 0 < min <= max <= 1, got [{lo}, {hi}]"));
        }
        if !(self.nv_density_nm3.is_finite() && self.nv_density_nm3 >= 0.0) {
            return bad(format!("nv_density_nm3 must be non-negative, got {}", self.nv_density_nm3));
        }
        if !(0.0..=1.0).contains(&self.nv_free_fraction) {
            return bad(format!("nv_free_fraction must lie in [0, 1], got {}", self.nv_free_fraction));
        }
        for (name, v) in [
            ("beam_area_cm2", self.beam_area_cm2),
            ("wavelength_nm", self.wavelength_nm),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.field_radius_um.is_finite() && self.field_radius_um >= 0.0) {
            return bad(format!("field_radius_um must be non-negative, got {}", self.field_radius_um));
        }
        self.environment.validate()?;
        self.photophysics.validate()?;
        self.detection.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCrystal {
    pub id: String,
    /// Full axis lengths in the crystal frame, nm.
    pub axes_nm: [f64; 3],
    /// Unit quaternion `[w, x, y, z]` taking lattice coordinates to the crystal frame.
    pub orientation: [f64; 4],
    pub x_um: f64,
    pub y_um: f64,
    pub nv_count: u64,
    /// Centers along each of the four lattice NV axes.
    pub nv_per_axis: [u64; 4],
    /// Emission factor averaged over the crystal's centers, substrate included.
    pub emission_factor: f64,
    /// Absorption factor averaged over the crystal's centers, substrate included.
    pub absorption_factor: f64,
    /// Bare emission factor of one uniformly random dipole in this crystal.
    pub single_dipole_emission_factor: f64,
    pub k_r_mhz: f64,
    pub sigma_cm2: f64,
    pub r_det_hz: f64,
    /// At the beam center, W.
    pub p_s_w: f64,
    pub volume_nm3: f64,
    pub diameter_nm: f64,
}

impl SyntheticCrystal {
    pub fn is_bright(&self) -> bool {
        self.nv_count > 0
    }
}

/// Lattice NV axes (the four ⟨111⟩ directions).
const NV_AXES: [[f64; 3]; 4] = {
    const S: f64 = 0.577_350_269_189_625_8;
    [[S, S, S], [S, -S, -S], [-S, S, -S], [-S, -S, S]]
};

/// Uniform random rotation (Shoemake's subgroup algorithm).
fn random_quaternion<R: Rng>(rng: &mut R) -> [f64; 4] {
    let (u1, u2, u3): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
    let tau = std::f64::consts::TAU;
    let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
    [
        b * (tau * u3).cos(),
        a * (tau * u2).sin(),
        a * (tau * u2).cos(),
        b * (tau * u3).sin(),
    ]
}

fn rotate(q: &[f64; 4], v: &[f64; 3]) -> [f64; 3] {
    let [w, x, y, z] = *q;
    let u = [x, y, z];
    let cross = |a: [f64; 3], b: [f64; 3]| {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    };
    let t = cross(u, *v).map(|c| 2.0 * c);
    let ut = cross(u, t);
    [0, 1, 2].map(|i| v[i] + w * t[i] + ut[i])
}

/// Weight of an NV's two orthogonal dipoles on each crystal axis, given the
/// NV axis `u` in the crystal frame: `(1 − u_i²) / 2`, summing to 1.
pub fn dipole_pair_weights(u: &[f64; 3]) -> [f64; 3] {
    let norm2 = u.iter().map(|c| c * c).sum::<f64>();
    u.map(|c| 0.5 * (1.0 - c * c / norm2))
}

fn weighted(w: &[f64; 3], f: &[f64; 3]) -> f64 {
    w[0] * f[0] + w[1] * f[1] + w[2] * f[2]
}

/// Photophysics of one center with field factors applied to `σ` and `k_r`.
pub fn scaled_photophysics(bulk: &PhotophysicsParams, absorption_factor: f64, emission_factor: f64) -> PhotophysicsParams {
    PhotophysicsParams {
        sigma_cm2: bulk.sigma_cm2 * absorption_factor,
        k_r_mhz: bulk.k_r_mhz * emission_factor,
        ..*bulk
    }
}

fn sample_crystal(config: &EnsembleConfig, index: usize, coupling_cache: Option<&FieldCoupling>) -> Result<SyntheticCrystal> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let diameter = LogNormal::new(config.size.median_nm.ln(), config.size.sigma_ln)
        .map_err(|e| SimError::InvalidConfig(e.to_string()))?
        .sample(&mut rng);
    let (lo, hi) = (config.shape.min_ratio, config.shape.max_ratio);
    let ratios = [1.0, rng.random_range(lo..=hi), rng.random_range(lo..=hi)];
    // Scale so that the ellipsoid volume matches the drawn diameter.
    let scale = diameter / (ratios[0] * ratios[1] * ratios[2]).cbrt();
    let axes_nm = ratios.map(|r| r * scale);
    let shape = Ellipsoid::new(axes_nm[0], axes_nm[1], axes_nm[2])?;
    let coupling = match coupling_cache {
        Some(c) => *c,
        None => coupling_factors(&shape, &config.environment)?,
    };

    let orientation = random_quaternion(&mut rng);
    let radius = config.field_radius_um * rng.random::<f64>().sqrt();
    let angle = std::f64::consts::TAU * rng.random::<f64>();
    let dipole: [f64; 3] = UnitSphere.sample(&mut rng);

    let volume_nm3 = sphere_volume(diameter);
    let dark = rng.random::<f64>() < config.nv_free_fraction;
    let mean_nv = config.nv_density_nm3 * volume_nm3;
    let nv_count = if dark || mean_nv <= 0.0 {
        0
    } else {
        Poisson::new(mean_nv)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?
            .sample(&mut rng) as u64
    };
    // Multinomial split over the four lattice axes.
    let mut nv_per_axis = [0u64; 4];
    let mut remaining = nv_count;
    for (k, slot) in nv_per_axis.iter_mut().take(3).enumerate() {
        if remaining > 0 {
            let p = 1.0 / (4 - k) as f64;
            *slot = Binomial::new(remaining, p)
                .map_err(|e| SimError::InvalidConfig(e.to_string()))?
                .sample(&mut rng);
            remaining -= *slot;
        }
    }
    nv_per_axis[3] = remaining;

    let axis_weights: Vec<[f64; 3]> = NV_AXES
        .iter()
        .map(|u| dipole_pair_weights(&rotate(&orientation, u)))
        .collect();
    let fractions: [f64; 4] = if nv_count == 0 {
        [0.25; 4]
    } else {
        nv_per_axis.map(|n| n as f64 / nv_count as f64)
    };
    let mix = |f: &[f64; 3]| {
        axis_weights
            .iter()
            .zip(fractions)
            .map(|(w, p)| p * weighted(w, f))
            .sum::<f64>()
    };
    let emission_factor = mix(&coupling.emission) * coupling.substrate_emission_factor;
    let absorption_factor = mix(&coupling.absorption) * coupling.substrate_absorption_factor;
    let single_dipole_emission_factor = weighted(&dipole.map(|c| c * c), &coupling.emission);

    let params = scaled_photophysics(&config.photophysics, absorption_factor, emission_factor);
    let per_nv_hz = max_detected_rate(&params, &config.detection)? * HZ_PER_MHZ;
    let exc = ExcitationConditions {
        wavelength_nm: config.wavelength_nm,
        ..ExcitationConditions::default()
    };
    let p_s_w = saturation_intensity(&params, &exc)? * config.beam_area_cm2 * 1e3;

    Ok(SyntheticCrystal {
        id: format!("c{index:05}"),
        axes_nm,
        orientation,
        x_um: radius * angle.cos(),
        y_um: radius * angle.sin(),
        nv_count,
        nv_per_axis,
        emission_factor,
        absorption_factor,
        single_dipole_emission_factor,
        k_r_mhz: params.k_r_mhz,
        sigma_cm2: params.sigma_cm2,
        r_det_hz: per_nv_hz * nv_count as f64,
        p_s_w,
        volume_nm3,
        diameter_nm: diameter,
    })
}

/// Draws `config.crystal_count` crystals, ordered by id.
pub fn sample_ensemble(config: &EnsembleConfig) -> Result<Vec<SyntheticCrystal>> {
    config.validate()?;
    // Equal-ratio shapes share one coupling; skip recomputing it per crystal.
    let cache = if config.shape.min_ratio == config.shape.max_ratio {
        let r = config.shape.min_ratio;
        Some(coupling_factors(&Ellipsoid::new(1.0, r, r)?, &config.environment)?)
    } else {
        None
    };
    (0..config.crystal_count)
        .into_par_iter()
        .map(|i| sample_crystal(config, i, cache.as_ref()))
        .collect()
}

/// Geometric ladder of `count` beam-center powers from `lo_factor · P` to
/// `hi_factor · P`, with `P` the median true saturation power of bright crystals.
pub fn power_ladder(crystals: &[SyntheticCrystal], count: usize, lo_factor: f64, hi_factor: f64) -> Vec<f64> {
    let mut ps: Vec<f64> = crystals.iter().filter(|c| c.is_bright()).map(|c| c.p_s_w).collect();
    if ps.is_empty() || count == 0 {
        return Vec::new();
    }
    ps.sort_by(f64::total_cmp);
    let median = ps[ps.len() / 2];
    if count == 1 {
        return vec![median];
    }
    let ratio = (hi_factor / lo_factor).ln();
    (0..count)
        .map(|i| median * lo_factor * (ratio * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Saturation-curve measurements of every bright crystal at each nominal
/// power, scaled by the local irradiance. With `dwell_s = Some(t)` the rate is
/// `Poisson(rate · t) / t`; with `None` it is the exact expected rate.
pub fn synthesize_observations(
    crystals: &[SyntheticCrystal],
    beam: &IrradianceProfile,
    powers_w: &[f64],
    dwell_s: Option<f64>,
    seed: u64,
) -> Result<Vec<ObservationRow>> {
    if let Some(t) = dwell_s {
        if !(t.is_finite() && t > 0.0) {
            return Err(SimError::InvalidConfig(format!("dwell time must be positive, got {t}")));
        }
    }
    if let Some(p) = powers_w.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
        return Err(SimError::InvalidConfig(format!("powers must be positive, got {p}")));
    }
    let per_crystal: Vec<Vec<ObservationRow>> = crystals
        .par_iter()
        .enumerate()
        .filter(|(_, c)| c.is_bright())
        .map(|(i, c)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let factor = beam.factor_at(c.x_um, c.y_um);
            powers_w
                .iter()
                .map(|&p| {
                    let expected = saturation_curve(c.r_det_hz, c.p_s_w, p * factor);
                    let rate_hz = match dwell_s {
                        Some(t) if expected * t > 0.0 => {
                            let n = Poisson::new(expected * t)
                                .map_err(|e| SimError::InvalidConfig(e.to_string()))?
                                .sample(&mut rng);
                            n / t
                        }
                        _ => expected,
                    };
                    Ok(ObservationRow {
                        crystal_id: c.id.clone(),
                        x_um: c.x_um,
                        y_um: c.y_um,
                        power_w: p,
                        rate_hz,
                        dwell_s,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_crystal.into_iter().flatten().collect())
}

/// Known specific brightness `Σ R_det / Σ V` over bright crystals, Hz/nm³.
pub fn true_beta(crystals: &[SyntheticCrystal]) -> f64 {
    let (r, v) = crystals
        .iter()
        .filter(|c| c.is_bright())
        .fold((0.0, 0.0), |(r, v), c| (r + c.r_det_hz, v + c.volume_nm3));
    r / v
}

/// Drop whose diamond volume equals the total volume of `crystals` (dark ones
/// included, as a mass measurement would).
pub fn matching_suspension(crystals: &[SyntheticCrystal], drop_volume_ml: f64, density_g_cm3: f64) -> SuspensionSpec {
    let total: f64 = crate::numeric::compensated_sum(crystals.iter().map(|c| c.volume_nm3));
    SuspensionSpec::for_total_volume(total, drop_volume_ml, density_g_cm3)
}
