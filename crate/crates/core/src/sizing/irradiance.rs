//! Relative excitation irradiance across the illuminated field.

use serde::{Deserialize, Serialize};

use super::SizingError;

/// Irradiance relative to the beam center (1 at the center).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum IrradianceProfile {
    #[default]
    Uniform,
    /// `exp(−2 r² / w²)` with `w` the 1/e² intensity radius.
    Gaussian {
        center_x_um: f64,
        center_y_um: f64,
        radius_um: f64,
    },
    Tabulated(IrradianceMap),
}

impl IrradianceProfile {
    pub fn gaussian(radius_um: f64) -> Self {
        Self::Gaussian {
            center_x_um: 0.0,
            center_y_um: 0.0,
            radius_um,
        }
    }

    pub fn factor_at(&self, x_um: f64, y_um: f64) -> f64 {
        match self {
            Self::Uniform => 1.0,
            Self::Gaussian {
                center_x_um,
                center_y_um,
                radius_um,
            } => {
                let r2 = (x_um - center_x_um).powi(2) + (y_um - center_y_um).powi(2);
                (-2.0 * r2 / (radius_um * radius_um)).exp()
            }
            Self::Tabulated(map) => map.factor_at(x_um, y_um),
        }
    }
}

/// Irradiance sampled on a regular rectangular grid, bilinearly interpolated
/// and clamped to the edge outside it. Values are normalised to a maximum of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrradianceMap {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Row-major: `values[iy * xs.len() + ix]`.
    values: Vec<f64>,
}

impl IrradianceMap {
    /// Builds a map from `(x_um, y_um, value)` points covering every node of a
    /// rectangular grid exactly once, in any order.
    pub fn from_points(points: &[(f64, f64, f64)]) -> Result<Self, SizingError> {
        let bad = |msg: &str| Err(SizingError::InvalidParameter(format!("irradiance map: {msg}")));
        let axis = |sel: fn(&(f64, f64, f64)) -> f64| {
            let mut v: Vec<f64> = points.iter().map(sel).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let xs = axis(|p| p.0);
        let ys = axis(|p| p.1);
        if xs.len() < 2 || ys.len() < 2 {
            return bad("need at least a 2 x 2 grid");
        }
        if xs.len() * ys.len() != points.len() {
            return bad("points do not form a complete rectangular grid");
        }
        let mut values = vec![f64::NAN; points.len()];
        for &(x, y, v) in points {
            if !(v.is_finite() && v >= 0.0) {
                return bad("values must be finite and non-negative");
            }
            let ix = xs.partition_point(|&g| g < x);
            let iy = ys.partition_point(|&g| g < y);
            let slot = &mut values[iy * xs.len() + ix];
            if !slot.is_nan() {
                return bad("duplicate grid node");
            }
            *slot = v;
        }
        let peak = values.iter().copied().fold(0.0, f64::max);
        if peak <= 0.0 {
            return bad("all values are zero");
        }
        values.iter_mut().for_each(|v| *v /= peak);
        Ok(Self { xs, ys, values })
    }

    pub fn factor_at(&self, x: f64, y: f64) -> f64 {
        let (ix, tx) = locate(&self.xs, x);
        let (iy, ty) = locate(&self.ys, y);
        let nx = self.xs.len();
        let v = |i: usize, j: usize| self.values[j * nx + i];
        let bottom = v(ix, iy) * (1.0 - tx) + v(ix + 1, iy) * tx;
        let top = v(ix, iy + 1) * (1.0 - tx) + v(ix + 1, iy + 1) * tx;
        bottom * (1.0 - ty) + top * ty
    }
}

/// Cell index and fractional position, clamped to the grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let n = grid.len();
    let x = x.clamp(grid[0], grid[n - 1]);
    let hi = grid.partition_point(|&g| g < x).clamp(1, n - 1);
    let lo = hi - 1;
    (lo, (x - grid[lo]) / (grid[hi] - grid[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_profile() {
        let g = IrradianceProfile::gaussian(100.0);
        assert_eq!(g.factor_at(0.0, 0.0), 1.0);
        assert!((g.factor_at(100.0, 0.0) - (-2.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tabulated_bilinear_and_normalised() {
        let pts = [
            (0.0, 0.0, 2.0),
            (10.0, 0.0, 1.0),
            (0.0, 10.0, 1.0),
            (10.0, 10.0, 0.0),
        ];
        let map = IrradianceMap::from_points(&pts).unwrap();
        assert_eq!(map.factor_at(0.0, 0.0), 1.0);
        assert!((map.factor_at(5.0, 5.0) - 0.5).abs() < 1e-15);
        assert!((map.factor_at(5.0, 0.0) - 0.75).abs() < 1e-15);
        // Clamped outside the grid.
        assert_eq!(map.factor_at(-50.0, -50.0), 1.0);
    }

    #[test]
    fn incomplete_grid_rejected() {
        let pts = [(0.0, 0.0, 1.0), (10.0, 0.0, 1.0), (0.0, 10.0, 1.0)];
        assert!(IrradianceMap::from_points(&pts).is_err());
    }
}
