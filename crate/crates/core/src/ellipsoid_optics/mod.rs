//! Local-field corrections for emitters embedded in ellipsoidal nanocrystals.
//!
//! A uniform external field along a principal axis of a dielectric ellipsoid
//! produces a uniform internal field reduced by the shielding factor
//! `η = 1 / (1 + (n² − 1) δ)`, where `δ` is the depolarization factor of that axis
//! and `n` is the refractive index of the crystal relative to its surroundings.
//!
//! Relative to the same emitter in bulk crystal:
//!
//! * absorption cross-section scales as `η² n`
//! * radiative rate scales as `η² / n`
//!
//! so their ratio is always `n²`.

mod carlson;
pub mod table1;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constants::{N_DIAMOND, N_GLASS, N_WATER};
use crate::numeric::{mean_std, MeanStd};

pub use carlson::carlson_rd;
pub use table1::{table1_report, Table1Section};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("invalid ellipsoid shape: {0}")]
    InvalidShape(String),
    #[error("invalid optical environment: {0}")]
    InvalidEnvironment(String),
    #[error("shape set is empty")]
    EmptyShapeSet,
}

pub type Result<T> = std::result::Result<T, OpticsError>;

/// Semi-axis lengths of an ellipsoid, in the caller's axis order.
///
/// Only ratios matter. Up to two axes may be zero (a flake or a needle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let shape = Self { a, b, c };
        shape.validate()?;
        Ok(shape)
    }

    pub fn sphere() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let axes = self.axes();
        if axes.iter().any(|v| !v.is_finite()) {
            return Err(OpticsError::InvalidShape(format!(
                "non-finite semi-axis in {axes:?}"
            )));
        }
        if axes.iter().any(|&v| v < 0.0) {
            return Err(OpticsError::InvalidShape(format!(
                "negative semi-axis in {axes:?}"
            )));
        }
        if axes.iter().all(|&v| v == 0.0) {
            return Err(OpticsError::InvalidShape("all semi-axes are zero".into()));
        }
        Ok(())
    }

    pub fn axes(&self) -> [f64; 3] {
        [self.a, self.b, self.c]
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    /// Axes sorted longest first, and for each sorted slot the index of the
    /// caller's axis it came from.
    fn canonical(&self) -> ([f64; 3], [usize; 3]) {
        let axes = self.axes();
        let mut order = [0usize, 1, 2];
        // Stable sort keeps the caller's order among equal axes.
        order.sort_by(|&i, &j| axes[j].total_cmp(&axes[i]));
        ([axes[order[0]], axes[order[1]], axes[order[2]]], order)
    }

    pub fn class(&self) -> ShapeClass {
        let ([x, y, z], _) = self.canonical();
        classify(x, y, z)
    }
}

/// Which evaluation route a shape takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeClass {
    Sphere,
    /// Two axes zero.
    Needle,
    /// Shortest axis zero.
    Flake,
    /// Longest axis unique, the two shorter equal.
    Prolate,
    /// Two longer axes equal, shortest unique.
    Oblate,
    Triaxial,
}

fn classify(x: f64, y: f64, z: f64) -> ShapeClass {
    if y == 0.0 {
        ShapeClass::Needle
    } else if z == 0.0 {
        ShapeClass::Flake
    } else if x == z {
        ShapeClass::Sphere
    } else if y == z {
        ShapeClass::Prolate
    } else if x == y {
        ShapeClass::Oblate
    } else {
        ShapeClass::Triaxial
    }
}

/// Depolarization factors for fields along the caller's `a`, `b`, `c` axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepolarizationFactors {
    pub delta_a: f64,
    pub delta_b: f64,
    pub delta_c: f64,
}

impl DepolarizationFactors {
    pub fn as_array(&self) -> [f64; 3] {
        [self.delta_a, self.delta_b, self.delta_c]
    }

    pub fn sum(&self) -> f64 {
        self.delta_a + self.delta_b + self.delta_c
    }
}

/// Below this eccentricity the spheroid closed forms lose digits to
/// cancellation, so such shapes go through the Carlson route instead.
const SPHEROID_CLOSED_FORM_MIN_ECC: f64 = 0.05;

/// Depolarization factors of an ellipsoid.
///
/// Spheres, needles, flakes and spheroids use closed forms; everything else
/// evaluates `δ_i = (abc/3) R_D(j², k², i²)`, which is the standard integral
/// `(abc/2) ∫₀^∞ ds / [(s+i²)^{3/2} (s+j²)^{1/2} (s+k²)^{1/2}]` in Carlson form.
pub fn depolarization_factors(shape: &Ellipsoid) -> Result<DepolarizationFactors> {
    shape.validate()?;
    let ([x, y, z], order) = shape.canonical();
    let canonical = match classify(x, y, z) {
        ShapeClass::Sphere => [1.0 / 3.0; 3],
        ShapeClass::Needle => [0.0, 0.5, 0.5],
        ShapeClass::Flake => [0.0, 0.0, 1.0],
        ShapeClass::Prolate => {
            let e = (1.0 - (z / x).powi(2)).sqrt();
            if e < SPHEROID_CLOSED_FORM_MIN_ECC {
                carlson_factors(x, y, z)
            } else {
                let long = (1.0 - e * e) / (e * e * e) * (e.atanh() - e);
                let short = 0.5 * (1.0 - long);
                [long, short, short]
            }
        }
        ShapeClass::Oblate => {
            let e = (1.0 - (z / x).powi(2)).sqrt();
            if e < SPHEROID_CLOSED_FORM_MIN_ECC {
                carlson_factors(x, y, z)
            } else {
                let short = (1.0 - (1.0 - e * e).sqrt() / e * e.asin()) / (e * e);
                let long = 0.5 * (1.0 - short);
                [long, long, short]
            }
        }
        ShapeClass::Triaxial => carlson_factors(x, y, z),
    };
    let mut out = [0.0; 3];
    for (slot, &axis) in order.iter().enumerate() {
        out[axis] = canonical[slot];
    }
    Ok(DepolarizationFactors {
        delta_a: out[0],
        delta_b: out[1],
        delta_c: out[2],
    })
}

/// General route for `x ≥ y ≥ z > 0`.
fn carlson_factors(x: f64, y: f64, z: f64) -> [f64; 3] {
    // Scale the longest axis to 1; the factors are scale invariant.
    let (y, z) = (y / x, z / x);
    let (xx, yy, zz) = (1.0, y * y, z * z);
    let pre = y * z / 3.0;
    [
        pre * carlson_rd(yy, zz, xx),
        pre * carlson_rd(xx, zz, yy),
        pre * carlson_rd(xx, yy, zz),
    ]
}

/// Ratio of internal to external field for a field along an axis with
/// depolarization factor `delta`, for relative refractive index `n_rel`.
pub fn shielding_factor(delta: f64, n_rel: f64) -> f64 {
    1.0 / (1.0 + (n_rel * n_rel - 1.0) * delta)
}

/// Field and flux transmission at a flat interface under normal incidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BulkInterface {
    /// Internal-to-incident field ratio `2 / (n + 1)`.
    pub eta: f64,
    /// Energy-flux transmittance `4n / (n + 1)²`.
    pub transmittance: f64,
}

pub fn bulk_interface(n_rel: f64) -> BulkInterface {
    BulkInterface {
        eta: 2.0 / (n_rel + 1.0),
        transmittance: 4.0 * n_rel / ((n_rel + 1.0) * (n_rel + 1.0)),
    }
}

/// Which emission-rate enhancement a substrate applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhancementMode {
    /// Transition dipole in the substrate plane.
    Parallel,
    /// Transition dipole along the substrate normal.
    Perpendicular,
    /// Average over two in-plane and one normal dipole orientation.
    #[default]
    Average,
}

/// How a substrate modifies the internal field seen by absorbing centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubstrateAbsorption {
    /// Compact crystals: the substrate barely changes the internal field.
    #[default]
    Neglect,
    /// Thin-flake limit: the external field is the incident field reduced by
    /// the substrate's own interface factor `η_b(n_sub / n_medium)`.
    FlakeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Substrate {
    pub n_substrate: f64,
    pub enhancement_parallel: f64,
    pub enhancement_perpendicular: f64,
    pub enhancement_average: f64,
    pub emission_mode: EnhancementMode,
    pub absorption_mode: SubstrateAbsorption,
}

impl Default for Substrate {
    fn default() -> Self {
        Self {
            n_substrate: N_GLASS,
            enhancement_parallel: 1.4,
            enhancement_perpendicular: 2.3,
            enhancement_average: 1.7,
            emission_mode: EnhancementMode::Average,
            absorption_mode: SubstrateAbsorption::Neglect,
        }
    }
}

impl Substrate {
    pub fn emission_enhancement(&self) -> f64 {
        match self.emission_mode {
            EnhancementMode::Parallel => self.enhancement_parallel,
            EnhancementMode::Perpendicular => self.enhancement_perpendicular,
            EnhancementMode::Average => self.enhancement_average,
        }
    }
}

/// Refractive indices around the crystal and an optional supporting substrate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalEnvironment {
    pub n_crystal: f64,
    pub n_medium: f64,
    pub substrate: Option<Substrate>,
}

impl Default for OpticalEnvironment {
    fn default() -> Self {
        Self::air()
    }
}

impl OpticalEnvironment {
    pub fn air() -> Self {
        Self {
            n_crystal: N_DIAMOND,
            n_medium: 1.0,
            substrate: None,
        }
    }

    pub fn water() -> Self {
        Self {
            n_medium: N_WATER,
            ..Self::air()
        }
    }

    /// Crystal in air resting on a glass slide.
    pub fn on_glass() -> Self {
        Self {
            substrate: Some(Substrate::default()),
            ..Self::air()
        }
    }

    pub fn with_medium(n_medium: f64) -> Self {
        Self {
            n_medium,
            ..Self::air()
        }
    }

    pub fn n_rel(&self) -> f64 {
        self.n_crystal / self.n_medium
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(OpticsError::InvalidEnvironment(msg));
        if !(self.n_crystal.is_finite() && self.n_crystal > 1.0) {
            return bad(format!("crystal index must exceed 1, got {}", self.n_crystal));
        }
        if !(self.n_medium.is_finite() && self.n_medium >= 1.0) {
            return bad(format!("medium index must be at least 1, got {}", self.n_medium));
        }
        if self.n_rel() <= 1.0 {
            return bad(format!(
                "relative index must exceed 1, got {}",
                self.n_rel()
            ));
        }
        if let Some(sub) = &self.substrate {
            if !(sub.n_substrate.is_finite() && sub.n_substrate >= 1.0) {
                return bad(format!(
                    "substrate index must be at least 1, got {}",
                    sub.n_substrate
                ));
            }
            for (name, v) in [
                ("parallel", sub.enhancement_parallel),
                ("perpendicular", sub.enhancement_perpendicular),
                ("average", sub.enhancement_average),
            ] {
                if !(v.is_finite() && v >= 1.0) {
                    return bad(format!("{name} enhancement must be at least 1, got {v}"));
                }
            }
        }
        Ok(())
    }

    /// Multiplier on absorption factors due to the substrate.
    pub fn substrate_absorption_factor(&self) -> f64 {
        match &self.substrate {
            Some(sub) if sub.absorption_mode == SubstrateAbsorption::FlakeLimit => {
                bulk_interface(sub.n_substrate / self.n_medium).eta.powi(2)
            }
            _ => 1.0,
        }
    }

    /// Multiplier on emission factors due to the substrate.
    pub fn substrate_emission_factor(&self) -> f64 {
        self.substrate
            .as_ref()
            .map_or(1.0, Substrate::emission_enhancement)
    }
}

/// Nanocrystal-to-bulk correction factors for one shape in one environment.
///
/// Arrays are indexed by the caller's axis order. `absorption` and `emission`
/// are the free-standing values `η² n` and `η² / n`; the substrate multipliers
/// are kept separate so that the free-standing identity
/// `absorption / emission = n²` remains checkable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldCoupling {
    pub n_rel: f64,
    pub deltas: DepolarizationFactors,
    pub eta: [f64; 3],
    pub absorption: [f64; 3],
    pub emission: [f64; 3],
    pub substrate_absorption_factor: f64,
    pub substrate_emission_factor: f64,
}

impl FieldCoupling {
    pub fn absorption_avg(&self) -> f64 {
        mean3(&self.absorption)
    }

    pub fn emission_avg(&self) -> f64 {
        mean3(&self.emission)
    }

    pub fn absorption_effective(&self) -> [f64; 3] {
        self.absorption.map(|v| v * self.substrate_absorption_factor)
    }

    pub fn emission_effective(&self) -> [f64; 3] {
        self.emission.map(|v| v * self.substrate_emission_factor)
    }

    pub fn absorption_effective_avg(&self) -> f64 {
        self.absorption_avg() * self.substrate_absorption_factor
    }

    pub fn emission_effective_avg(&self) -> f64 {
        self.emission_avg() * self.substrate_emission_factor
    }
}

fn mean3(v: &[f64; 3]) -> f64 {
    (v[0] + v[1] + v[2]) / 3.0
}

pub fn coupling_factors(shape: &Ellipsoid, env: &OpticalEnvironment) -> Result<FieldCoupling> {
    env.validate()?;
    let deltas = depolarization_factors(shape)?;
    let n_rel = env.n_rel();
    let eta = deltas.as_array().map(|d| shielding_factor(d, n_rel));
    Ok(FieldCoupling {
        n_rel,
        deltas,
        eta,
        absorption: eta.map(|e| e * e * n_rel),
        emission: eta.map(|e| e * e / n_rel),
        substrate_absorption_factor: env.substrate_absorption_factor(),
        substrate_emission_factor: env.substrate_emission_factor(),
    })
}

/// Population statistics of directional factors over a set of shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeClassStats {
    /// Number of directional values pooled (three per shape).
    pub count: usize,
    pub absorption: MeanStd,
    pub emission: MeanStd,
}

/// Mean and population standard deviation of all directional factors
/// (substrate multipliers included) pooled over `shapes`.
pub fn shape_class_stats(shapes: &[Ellipsoid], env: &OpticalEnvironment) -> Result<ShapeClassStats> {
    if shapes.is_empty() {
        return Err(OpticsError::EmptyShapeSet);
    }
    let mut absorption = Vec::with_capacity(3 * shapes.len());
    let mut emission = Vec::with_capacity(3 * shapes.len());
    for shape in shapes {
        let fc = coupling_factors(shape, env)?;
        absorption.extend(fc.absorption_effective());
        emission.extend(fc.emission_effective());
    }
    Ok(ShapeClassStats {
        count: emission.len(),
        absorption: mean_std(&absorption).expect("non-empty"),
        emission: mean_std(&emission).expect("non-empty"),
    })
}

/// Compact shapes whose shortest axis is at least half the longest:
/// the prolate (1, ½, ½), the sphere, and the oblate (1, 1, ½).
pub fn compact_shape_family() -> Vec<Ellipsoid> {
    vec![
        Ellipsoid {
            a: 1.0,
            b: 0.5,
            c: 0.5,
        },
        Ellipsoid::sphere(),
        Ellipsoid {
            a: 1.0,
            b: 1.0,
            c: 0.5,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn deltas(a: f64, b: f64, c: f64) -> [f64; 3] {
        depolarization_factors(&Ellipsoid::new(a, b, c).unwrap())
            .unwrap()
            .as_array()
    }

    #[test]
    fn sphere_is_one_third() {
        for d in deltas(1.0, 1.0, 1.0) {
            assert_abs_diff_eq!(d, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn needle_and_flake_limits() {
        assert_eq!(deltas(1.0, 0.0, 0.0), [0.0, 0.5, 0.5]);
        assert_eq!(deltas(1.0, 1.0, 0.0), [0.0, 0.0, 1.0]);
        assert_eq!(deltas(0.0, 3.0, 0.0), [0.5, 0.0, 0.5]);
        assert_eq!(deltas(1.0, 0.3, 0.0), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn tabulated_spheroids() {
        let d = deltas(1.0, 0.25, 0.25);
        assert_abs_diff_eq!(d[0], 0.075, epsilon = 0.001);
        assert_abs_diff_eq!(d[1], 0.4625, epsilon = 0.001);
        let d = deltas(1.0, 1.0, 0.25);
        assert_abs_diff_eq!(d[2], 0.70, epsilon = 0.005);
        assert_abs_diff_eq!(d[0], 0.15, epsilon = 0.005);
    }

    #[test]
    fn output_follows_caller_axis_order() {
        let d = deltas(0.5, 1.0, 0.5);
        let e = deltas(1.0, 0.5, 0.5);
        assert_abs_diff_eq!(d[1], e[0], epsilon = 1e-15);
        assert_abs_diff_eq!(d[0], e[1], epsilon = 1e-15);
        assert_abs_diff_eq!(d[2], e[2], epsilon = 1e-15);
    }

    #[test]
    fn spheroid_closed_forms_agree_with_carlson() {
        for &(x, y, z) in &[(1.0, 0.5, 0.5), (1.0, 1.0, 0.5), (1.0, 0.1, 0.1), (1.0, 1.0, 0.05)] {
            let closed = deltas(x, y, z);
            let general = carlson_factors(x, y, z);
            for i in 0..3 {
                assert_abs_diff_eq!(closed[i], general[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(Ellipsoid::new(0.0, 0.0, 0.0).is_err());
        assert!(Ellipsoid::new(f64::NAN, 1.0, 1.0).is_err());
        assert!(Ellipsoid::new(1.0, f64::INFINITY, 1.0).is_err());
        assert!(Ellipsoid::new(-1.0, 1.0, 1.0).is_err());
        let raw = Ellipsoid {
            a: 0.0,
            b: 0.0,
            c: 0.0,
        };
        assert!(matches!(
            depolarization_factors(&raw),
            Err(OpticsError::InvalidShape(_))
        ));
    }

    #[test]
    fn shielding_examples() {
        assert_eq!(shielding_factor(0.0, 2.42), 1.0);
        let eta = shielding_factor(1.0 / 3.0, 2.42);
        assert_abs_diff_eq!(eta, 3.0 / (2.0 + 2.42 * 2.42), epsilon = 1e-15);
        assert_abs_diff_eq!(eta * eta * 2.42, 0.35, epsilon = 0.005);
        let n_w = 2.42 / 1.33;
        let eta_w = shielding_factor(1.0 / 3.0, n_w);
        assert_abs_diff_eq!(eta_w, 0.565, epsilon = 0.001);
        assert_abs_diff_eq!(eta_w * eta_w * n_w, 0.58, epsilon = 0.005);
    }

    #[test]
    fn bulk_interface_examples() {
        assert_eq!(
            bulk_interface(1.0),
            BulkInterface {
                eta: 1.0,
                transmittance: 1.0
            }
        );
        assert_abs_diff_eq!(bulk_interface(2.42).transmittance, 0.828, epsilon = 0.001);
        assert_abs_diff_eq!(bulk_interface(1.46).eta.powi(2), 0.66, epsilon = 0.005);
    }

    #[test]
    fn sphere_emission_matches_sphere_formula() {
        let fc = coupling_factors(&Ellipsoid::sphere(), &OpticalEnvironment::air()).unwrap();
        let n: f64 = 2.42;
        let closed = (3.0 / (2.0 + n * n)).powi(2) / n;
        for e in fc.emission {
            assert_abs_diff_eq!(e, closed, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(fc.absorption_avg(), 0.35, epsilon = 0.005);
        assert_abs_diff_eq!(fc.emission_avg(), 0.060, epsilon = 0.0005);
    }

    #[test]
    fn needle_along_field_has_unit_shielding() {
        let fc = coupling_factors(&Ellipsoid::new(1.0, 0.0, 0.0).unwrap(), &OpticalEnvironment::air())
            .unwrap();
        assert_eq!(fc.eta[0], 1.0);
        assert_abs_diff_eq!(fc.absorption[0], 2.42, epsilon = 1e-15);
    }

    #[test]
    fn substrate_multipliers() {
        let mut env = OpticalEnvironment::on_glass();
        let fc = coupling_factors(&Ellipsoid::sphere(), &env).unwrap();
        assert_eq!(fc.substrate_absorption_factor, 1.0);
        assert_eq!(fc.substrate_emission_factor, 1.7);
        assert_abs_diff_eq!(fc.emission_effective_avg(), 1.7 * fc.emission_avg(), epsilon = 1e-15);

        let sub = env.substrate.as_mut().unwrap();
        sub.absorption_mode = SubstrateAbsorption::FlakeLimit;
        sub.emission_mode = EnhancementMode::Perpendicular;
        let fc = coupling_factors(&Ellipsoid::sphere(), &env).unwrap();
        assert_abs_diff_eq!(fc.substrate_absorption_factor, (2.0 / 2.46_f64).powi(2), epsilon = 1e-15);
        assert_eq!(fc.substrate_emission_factor, 2.3);
    }

    #[test]
    fn environment_validation() {
        assert!(OpticalEnvironment::with_medium(2.5).validate().is_err());
        assert!(OpticalEnvironment::with_medium(0.9).validate().is_err());
        let mut env = OpticalEnvironment::on_glass();
        env.substrate.as_mut().unwrap().enhancement_average = 0.5;
        assert!(env.validate().is_err());
    }

    #[test]
    fn shape_stats_examples() {
        let family = compact_shape_family();
        let air = shape_class_stats(&family, &OpticalEnvironment::air()).unwrap();
        assert_eq!(air.count, 9);
        assert_abs_diff_eq!(air.emission.mean, 0.067, epsilon = 0.0005);
        assert_abs_diff_eq!(air.emission.std_dev, 0.026, epsilon = 0.0005);
        let water = shape_class_stats(&family, &OpticalEnvironment::water()).unwrap();
        assert_abs_diff_eq!(water.emission.mean, 0.19, epsilon = 0.005);
        assert_abs_diff_eq!(water.emission.std_dev, 0.05, epsilon = 0.001);
        assert_abs_diff_eq!(water.absorption.mean, 0.61, epsilon = 0.005);
        assert_eq!(
            shape_class_stats(&[], &OpticalEnvironment::air()),
            Err(OpticsError::EmptyShapeSet)
        );
    }
}
