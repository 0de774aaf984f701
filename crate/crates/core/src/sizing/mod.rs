//! Crystal size distribution from luminescence brightness alone.
//!
//! Every crystal's saturated count rate `R_j` is assumed proportional to its
//! volume with one shared specific brightness `β`. The total diamond volume in
//! a deposited drop, `C_D · V_drop / ρ`, then fixes `β = Σ R_j / V_tot`, and
//! each crystal gets `V_j = R_j / β` and an equivalent-sphere diameter
//! `d_j = (6 V_j / π)^{1/3}`.

pub mod fit;
pub mod histogram;
pub mod irradiance;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{DIAMOND_DENSITY_G_CM3, HZ_PER_MHZ, NM3_PER_CM3};
use crate::numeric::compensated_sum;
use crate::rate_model::DetectionChain;

pub use fit::{fit_saturation, poisson_weights, saturation_curve, FitError, Sample, SaturationFit};
pub use histogram::{compare_distributions, density_mode, Binning, DistributionComparison, Histogram};
pub use irradiance::{IrradianceMap, IrradianceProfile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SizingError {
    #[error("no crystal records")]
    EmptyRecords,
    #[error("no crystal has a usable saturated rate")]
    NoFittedCrystals,
    #[error("invalid suspension: {0}")]
    InvalidSuspension(String),
    #[error("irradiance factor for crystal {id} must be positive, got {factor}")]
    InvalidIrradiance { id: String, factor: f64 },
    #[error("{0} histogram is empty")]
    EmptyHistogram(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("crystal {id}: {source}")]
    Fit {
        id: String,
        #[source]
        source: FitError,
    },
}

pub type Result<T> = std::result::Result<T, SizingError>;

/// Drop of diamond suspension deposited on the slide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuspensionSpec {
    pub mass_concentration_mg_ml: f64,
    pub drop_volume_ml: f64,
    pub density_g_cm3: f64,
}

impl Default for SuspensionSpec {
    fn default() -> Self {
        Self {
            mass_concentration_mg_ml: 5e-4,
            drop_volume_ml: 8.4e-5,
            density_g_cm3: DIAMOND_DENSITY_G_CM3,
        }
    }
}

impl SuspensionSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mass concentration", self.mass_concentration_mg_ml),
            ("drop volume", self.drop_volume_ml),
            ("density", self.density_g_cm3),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(SizingError::InvalidSuspension(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Total diamond volume in nm³: mg / (g/cm³) = 10⁻³ cm³, and 1 cm³ = 10²¹ nm³.
    pub fn total_volume_nm3(&self) -> f64 {
        self.mass_concentration_mg_ml * self.drop_volume_ml / self.density_g_cm3 * 1e-3 * NM3_PER_CM3
    }

    /// The suspension whose drop of `drop_volume_ml` holds `total_volume_nm3` of diamond.
    pub fn for_total_volume(total_volume_nm3: f64, drop_volume_ml: f64, density_g_cm3: f64) -> Self {
        Self {
            mass_concentration_mg_ml: total_volume_nm3 / (1e-3 * NM3_PER_CM3) * density_g_cm3 / drop_volume_ml,
            drop_volume_ml,
            density_g_cm3,
        }
    }
}

/// One detected crystal and its saturation measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrystalRecord {
    pub id: String,
    pub x_um: f64,
    pub y_um: f64,
    /// Nominal (beam-center) powers and detected rates.
    pub samples: Vec<Sample>,
    /// Local irradiance relative to the beam center.
    pub irradiance_factor: f64,
    /// Fit against effective powers `irradiance_factor · P`.
    pub fit: Option<SaturationFit>,
    pub fit_error: Option<String>,
}

impl CrystalRecord {
    pub fn new(id: impl Into<String>, x_um: f64, y_um: f64, samples: Vec<Sample>) -> Self {
        Self {
            id: id.into(),
            x_um,
            y_um,
            samples,
            irradiance_factor: 1.0,
            fit: None,
            fit_error: None,
        }
    }

    /// `(irradiance_factor · P, rate)` pairs.
    pub fn effective_points(&self) -> Vec<(f64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.power_w * self.irradiance_factor, s.rate_hz))
            .collect()
    }

    /// Fits the saturation curve, recording either the fit or the error.
    pub fn fit(&mut self, weighting: Weighting) -> std::result::Result<&SaturationFit, FitError> {
        let points = self.effective_points();
        let weights = match weighting {
            Weighting::Unweighted => None,
            Weighting::Poisson => poisson_weights(&self.samples),
        };
        match fit_saturation(&points, weights.as_deref()) {
            Ok(f) => {
                self.fit_error = None;
                Ok(self.fit.insert(f))
            }
            Err(e) => {
                self.fit = None;
                self.fit_error = Some(e.to_string());
                Err(e)
            }
        }
    }
}

/// One measured point of one crystal, as tabulated in observation files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub crystal_id: String,
    pub x_um: f64,
    pub y_um: f64,
    pub power_w: f64,
    pub rate_hz: f64,
    pub dwell_s: Option<f64>,
}

/// Groups rows by crystal id, keeping first-appearance order. The position of
/// a crystal is taken from its first row.
pub fn records_from_rows(rows: &[ObservationRow]) -> Vec<CrystalRecord> {
    let mut index = std::collections::HashMap::new();
    let mut records: Vec<CrystalRecord> = Vec::new();
    for row in rows {
        let i = *index.entry(row.crystal_id.clone()).or_insert_with(|| {
            records.push(CrystalRecord::new(row.crystal_id.clone(), row.x_um, row.y_um, Vec::new()));
            records.len() - 1
        });
        records[i].samples.push(Sample {
            power_w: row.power_w,
            rate_hz: row.rate_hz,
            dwell_s: row.dwell_s,
        });
    }
    records
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Unweighted,
    /// Inverse-variance weights from dwell times; falls back to unweighted
    /// for crystals without dwell times.
    Poisson,
}

/// Sets each record's irradiance factor from `profile`.
///
/// A crystal at relative irradiance `f` shows a nominal saturation power of
/// `P_s / f`; after correction, existing fits are re-expressed in effective
/// power, so `P_s` is multiplied by `f / f_old` while `R_det` is unchanged.
pub fn apply_irradiance_correction(
    records: &[CrystalRecord],
    profile: &IrradianceProfile,
) -> Result<Vec<CrystalRecord>> {
    records
        .iter()
        .map(|r| {
            let factor = profile.factor_at(r.x_um, r.y_um);
            if !(factor.is_finite() && factor > 0.0) {
                return Err(SizingError::InvalidIrradiance {
                    id: r.id.clone(),
                    factor,
                });
            }
            let mut out = r.clone();
            out.fit = r.fit.map(|f| f.rescale_power(factor / r.irradiance_factor));
            out.irradiance_factor = factor;
            Ok(out)
        })
        .collect()
}

/// Fits every record in parallel. Failures are recorded on the record.
pub fn fit_records(records: &mut [CrystalRecord], weighting: Weighting) {
    records.par_iter_mut().for_each(|r| {
        let _ = r.fit(weighting);
    });
}

/// How each crystal's saturated rate is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RdetMode {
    /// `R_det` from each crystal's own saturation fit.
    #[default]
    PerCrystalFit,
    /// One saturation power (effective, beam-center W) shared by all crystals;
    /// `R_det` is the linear least-squares amplitude with `P_s` fixed.
    SharedSaturationPower { p_s_w: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SizingOptions {
    pub binning: Binning,
    pub rdet_mode: RdetMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizedCrystal {
    pub id: String,
    pub r_det_hz: f64,
    pub p_s_w: Option<f64>,
    pub volume_nm3: f64,
    pub diameter_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedCrystal {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeDistributionResult {
    /// Detected specific brightness, Hz/nm³.
    pub beta_hz_nm3: f64,
    /// Emitted specific brightness `β / φ_det`, photons·s⁻¹·nm⁻³.
    pub beta_absolute: f64,
    pub phi_det: f64,
    pub total_volume_nm3: f64,
    pub crystals: Vec<SizedCrystal>,
    pub excluded: Vec<ExcludedCrystal>,
    pub histogram: Histogram,
}

impl SizeDistributionResult {
    pub fn diameters(&self) -> Vec<f64> {
        self.crystals.iter().map(|c| c.diameter_nm).collect()
    }
}

/// Saturated rate with a fixed saturation power: minimises
/// `Σ w (y − R g)²` with `g = P / (P + P_s)`.
fn amplitude_with_fixed_ps(record: &CrystalRecord, p_s: f64) -> Option<f64> {
    let (num, den) = record
        .effective_points()
        .iter()
        .fold((0.0, 0.0), |(n, d), &(p, y)| {
            let g = p / (p + p_s);
            (n + y * g, d + g * g)
        });
    (den > 0.0).then(|| num / den)
}

pub fn size_distribution(
    records: &[CrystalRecord],
    spec: &SuspensionSpec,
    det: &DetectionChain,
    options: &SizingOptions,
) -> Result<SizeDistributionResult> {
    if records.is_empty() {
        return Err(SizingError::EmptyRecords);
    }
    spec.validate()?;
    det.validate()
        .map_err(|e| SizingError::InvalidParameter(e.to_string()))?;
    let total_volume_nm3 = spec.total_volume_nm3();

    let mut usable = Vec::with_capacity(records.len());
    let mut excluded = Vec::new();
    for r in records {
        let rate = match options.rdet_mode {
            RdetMode::PerCrystalFit => match (&r.fit, &r.fit_error) {
                (Some(f), _) => Ok((f.r_det, Some(f.p_s))),
                (None, Some(e)) => Err(e.clone()),
                (None, None) => Err("not fitted".to_string()),
            },
            RdetMode::SharedSaturationPower { p_s_w } => {
                if !(p_s_w.is_finite() && p_s_w > 0.0) {
                    return Err(SizingError::InvalidParameter(format!(
                        "shared saturation power must be positive, got {p_s_w}"
                    )));
                }
                amplitude_with_fixed_ps(r, p_s_w)
                    .map(|v| (v, Some(p_s_w)))
                    .ok_or_else(|| "no samples".to_string())
            }
        };
        match rate {
            Ok((r_det, p_s)) if r_det.is_finite() && r_det > 0.0 => usable.push((r, r_det, p_s)),
            Ok((r_det, _)) => excluded.push(ExcludedCrystal {
                id: r.id.clone(),
                reason: format!("non-positive saturated rate {r_det}"),
            }),
            Err(reason) => excluded.push(ExcludedCrystal {
                id: r.id.clone(),
                reason,
            }),
        }
    }
    if usable.is_empty() {
        return Err(SizingError::NoFittedCrystals);
    }

    let rate_sum = compensated_sum(usable.iter().map(|u| u.1));
    let beta = rate_sum / total_volume_nm3;
    let crystals: Vec<SizedCrystal> = usable
        .iter()
        .map(|(r, r_det, p_s)| {
            let volume_nm3 = r_det / beta;
            SizedCrystal {
                id: r.id.clone(),
                r_det_hz: *r_det,
                p_s_w: *p_s,
                volume_nm3,
                diameter_nm: diameter_from_volume(volume_nm3),
            }
        })
        .collect();
    let diameters: Vec<f64> = crystals.iter().map(|c| c.diameter_nm).collect();
    let histogram = Histogram::from_values(&diameters, &options.binning)?;
    Ok(SizeDistributionResult {
        beta_hz_nm3: beta,
        beta_absolute: absolute_brightness(beta, det),
        phi_det: det.phi_det(),
        total_volume_nm3,
        crystals,
        excluded,
        histogram,
    })
}

/// Emitted photons·s⁻¹·nm⁻³ from a detected specific brightness.
pub fn absolute_brightness(beta_hz_nm3: f64, det: &DetectionChain) -> f64 {
    beta_hz_nm3 / det.phi_det()
}

/// Equivalent-sphere diameter, `(6V/π)^{1/3}`.
pub fn diameter_from_volume(volume_nm3: f64) -> f64 {
    (6.0 * volume_nm3 / std::f64::consts::PI).cbrt()
}

pub fn sphere_volume(diameter_nm: f64) -> f64 {
    std::f64::consts::PI * diameter_nm.powi(3) / 6.0
}

/// Emission rate per center (MHz) of a crystal of diameter `diameter_nm`
/// holding `nv_count` centers, given the emitted specific brightness.
pub fn brightness_per_center(beta_absolute: f64, diameter_nm: f64, nv_count: f64) -> Result<f64> {
    if !(nv_count.is_finite() && nv_count > 0.0) {
        return Err(SizingError::InvalidParameter(format!(
            "NV count must be positive, got {nv_count}"
        )));
    }
    if !(beta_absolute > 0.0 && diameter_nm > 0.0) {
        return Err(SizingError::InvalidParameter(
            "brightness and diameter must be positive".into(),
        ));
    }
    Ok(beta_absolute * sphere_volume(diameter_nm) / nv_count / HZ_PER_MHZ)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted(id: &str, r_det: f64) -> CrystalRecord {
        let samples = [0.1, 0.5, 1.0, 3.0]
            .iter()
            .map(|&p| Sample {
                power_w: p,
                rate_hz: saturation_curve(r_det, 0.9, p),
                dwell_s: None,
            })
            .collect();
        let mut r = CrystalRecord::new(id, 0.0, 0.0, samples);
        r.fit(Weighting::Unweighted).unwrap();
        r
    }

    #[test]
    fn drop_volume_arithmetic() {
        let v = SuspensionSpec::default().total_volume_nm3();
        assert!((v / 1.2e10 - 1.0).abs() < 1e-12, "{v}");
        let back = SuspensionSpec::for_total_volume(v, 8.4e-5, 3.5);
        assert!((back.mass_concentration_mg_ml / 5e-4 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cube_root_diameters() {
        let records: Vec<_> = [1.0, 8.0, 27.0]
            .iter()
            .enumerate()
            .map(|(i, &s)| fitted(&i.to_string(), 1e5 * s))
            .collect();
        let res = size_distribution(
            &records,
            &SuspensionSpec::default(),
            &DetectionChain::with_total(0.1),
            &SizingOptions::default(),
        )
        .unwrap();
        let d = res.diameters();
        assert!((d[1] / d[0] - 2.0).abs() < 1e-8);
        assert!((d[2] / d[0] - 3.0).abs() < 1e-8);
        let vsum: f64 = res.crystals.iter().map(|c| c.volume_nm3).sum();
        assert!((vsum / res.total_volume_nm3 - 1.0).abs() < 1e-9);
        assert!((res.beta_absolute - res.beta_hz_nm3 / 0.1).abs() < 1e-12 * res.beta_absolute);
    }

    #[test]
    fn failed_fits_are_excluded() {
        let mut bad = CrystalRecord::new(
            "dark",
            0.0,
            0.0,
            vec![
                Sample {
                    power_w: 1.0,
                    rate_hz: 0.0,
                    dwell_s: None,
                },
                Sample {
                    power_w: 2.0,
                    rate_hz: 0.0,
                    dwell_s: None,
                },
            ],
        );
        assert!(bad.fit(Weighting::Unweighted).is_err());
        let res = size_distribution(
            &[fitted("a", 1e5), bad],
            &SuspensionSpec::default(),
            &DetectionChain::with_total(0.1),
            &SizingOptions::default(),
        )
        .unwrap();
        assert_eq!(res.crystals.len(), 1);
        assert_eq!(res.excluded.len(), 1);
        assert_eq!(res.excluded[0].id, "dark");
    }

    #[test]
    fn errors() {
        let det = DetectionChain::with_total(0.1);
        let opts = SizingOptions::default();
        assert_eq!(
            size_distribution(&[], &SuspensionSpec::default(), &det, &opts),
            Err(SizingError::EmptyRecords)
        );
        let spec = SuspensionSpec {
            drop_volume_ml: 0.0,
            ..SuspensionSpec::default()
        };
        assert!(matches!(
            size_distribution(&[fitted("a", 1.0)], &spec, &det, &opts),
            Err(SizingError::InvalidSuspension(_))
        ));
    }

    #[test]
    fn irradiance_correction_rescales_saturation_power() {
        let samples: Vec<Sample> = [0.2, 0.5, 1.0, 2.0, 5.0]
            .iter()
            .map(|&p| Sample {
                power_w: p,
                // Crystal at half irradiance with intrinsic P_s = 0.9 W.
                rate_hz: saturation_curve(1e6, 0.9, 0.5 * p),
                dwell_s: None,
            })
            .collect();
        let mut rec = CrystalRecord::new("edge", 300.0, 0.0, samples);
        let nominal = *rec.fit(Weighting::Unweighted).unwrap();
        assert!((nominal.p_s - 1.8).abs() < 1e-8);
        let identity = apply_irradiance_correction(std::slice::from_ref(&rec), &IrradianceProfile::Uniform).unwrap();
        assert_eq!(identity[0], rec);

        let map = IrradianceProfile::Tabulated(
            IrradianceMap::from_points(&[
                (0.0, -1.0, 1.0),
                (300.0, -1.0, 0.5),
                (0.0, 1.0, 1.0),
                (300.0, 1.0, 0.5),
            ])
            .unwrap(),
        );
        let corrected = apply_irradiance_correction(&[rec], &map).unwrap();
        let f = corrected[0].fit.unwrap();
        assert!((f.p_s - 0.9).abs() < 1e-8);
        assert_eq!(f.r_det, nominal.r_det);
        let mut refit = corrected[0].clone();
        let f2 = *refit.fit(Weighting::Unweighted).unwrap();
        assert!((f2.p_s - 0.9).abs() < 1e-8);
    }

    #[test]
    fn non_positive_irradiance_rejected() {
        let rec = fitted("a", 1e5);
        let profile = IrradianceProfile::Gaussian {
            center_x_um: 0.0,
            center_y_um: 0.0,
            radius_um: 0.0,
        };
        let moved = CrystalRecord {
            x_um: 10.0,
            ..rec
        };
        assert!(matches!(
            apply_irradiance_correction(&[moved], &profile),
            Err(SizingError::InvalidIrradiance { .. })
        ));
    }

    #[test]
    fn shared_saturation_power_mode() {
        let records = vec![fitted("a", 1e5), fitted("b", 2e5)];
        let opts = SizingOptions {
            rdet_mode: RdetMode::SharedSaturationPower { p_s_w: 0.9 },
            ..SizingOptions::default()
        };
        let res = size_distribution(&records, &SuspensionSpec::default(), &DetectionChain::with_total(0.1), &opts)
            .unwrap();
        assert!((res.crystals[0].r_det_hz - 1e5).abs() < 1e-6);
        assert!((res.crystals[1].r_det_hz - 2e5).abs() < 1e-6);
    }

    #[test]
    fn per_center_brightness() {
        let r = brightness_per_center(1.5e3, 100.0, 300.0).unwrap();
        assert!((r - 2.618).abs() < 1e-3);
        assert!((brightness_per_center(1.5e3, 100.0, 600.0).unwrap() - r / 2.0).abs() < 1e-12);
        assert!((brightness_per_center(1.5e3, 50.0, 37.5).unwrap() - r).abs() < 1e-12);
        assert!(brightness_per_center(1.5e3, 100.0, 0.0).is_err());
    }
}
