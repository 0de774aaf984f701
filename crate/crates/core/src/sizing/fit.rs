//! Least-squares fit of the saturation curve `rate = R · P / (P + P_s)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAX_ITERATIONS: usize = 200;
const REL_STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("degenerate saturation data: {0}")]
    Degenerate(String),
    #[error(
        "fit did not converge after {iterations} iterations \
         (R = {r_det}, P_s = {p_s}, last relative step {last_rel_step:e})"
    )]
    NonConvergence {
        iterations: usize,
        r_det: f64,
        p_s: f64,
        last_rel_step: f64,
    },
}

/// One (power, rate) observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub power_w: f64,
    pub rate_hz: f64,
    /// Integration time, when known; enables Poisson weighting.
    pub dwell_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationFit {
    /// Asymptotic detected rate, in the units of the input rates.
    pub r_det: f64,
    /// Saturation power, in the units of the input powers.
    pub p_s: f64,
    /// Covariance of `(r_det, p_s)`.
    pub covariance: [[f64; 2]; 2],
    pub r_det_std_err: f64,
    pub p_s_std_err: f64,
    /// Weighted sum of squared residuals.
    pub chi_square: f64,
    pub iterations: usize,
    /// Fewer than three distinct powers, or the powers do not bracket `p_s`.
    pub low_confidence: bool,
}

impl SaturationFit {
    pub fn model(&self, power: f64) -> f64 {
        saturation_curve(self.r_det, self.p_s, power)
    }

    /// Re-expresses the fit for powers scaled by `factor` (`P' = factor · P`).
    pub fn rescale_power(&self, factor: f64) -> Self {
        let mut out = *self;
        out.p_s *= factor;
        out.p_s_std_err *= factor;
        out.covariance[0][1] *= factor;
        out.covariance[1][0] *= factor;
        out.covariance[1][1] *= factor * factor;
        out
    }
}

pub fn saturation_curve(r_det: f64, p_s: f64, power: f64) -> f64 {
    r_det * power / (power + p_s)
}

/// Inverse-variance weights for rates estimated from photon counts:
/// `var(rate) = rate / dwell`, floored at one count per dwell.
pub fn poisson_weights(samples: &[Sample]) -> Option<Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            let dwell = s.dwell_s.filter(|d| d.is_finite() && *d > 0.0)?;
            let var = s.rate_hz.max(1.0 / dwell) / dwell;
            Some(1.0 / var)
        })
        .collect()
}

/// Levenberg–Marquardt fit with the analytic Jacobian.
///
/// Starts from `R = 2 · max rate` and `P_s` at the power where linear
/// interpolation of the data reaches half the maximum rate. With `weights`
/// the covariance is `(JᵀWJ)⁻¹` (weights taken as inverse variances);
/// without, it is scaled by the residual variance `χ² / (n − 2)`.
pub fn fit_saturation(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<SaturationFit, FitError> {
    validate(points, weights)?;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);

    let chi_square = |r: f64, ps: f64| -> f64 {
        points
            .iter()
            .enumerate()
            .map(|(i, &(p, y))| {
                let res = y - saturation_curve(r, ps, p);
                w(i) * res * res
            })
            .sum()
    };

    let (mut r, mut ps) = initial_guess(points);
    let mut chi2 = chi_square(r, ps);
    let mut lambda = 1e-3;
    let mut last_rel_step = f64::INFINITY;

    for iteration in 1..=MAX_ITERATIONS {
        let (a, b) = normal_equations(points, &w, r, ps);
        let m = [
            [a[0][0] * (1.0 + lambda), a[0][1]],
            [a[1][0], a[1][1] * (1.0 + lambda)],
        ];
        let Some(step) = solve2(m, b) else {
            lambda *= 10.0;
            continue;
        };
        let (r_new, ps_new) = (r + step[0], ps + step[1]);
        last_rel_step = (step[0] / r).abs().max((step[1] / ps).abs());
        if r_new > 0.0 && ps_new > 0.0 {
            let chi2_new = chi_square(r_new, ps_new);
            if chi2_new <= chi2 {
                r = r_new;
                ps = ps_new;
                chi2 = chi2_new;
                lambda = (lambda / 10.0).max(1e-12);
            } else {
                lambda *= 10.0;
            }
        } else {
            lambda *= 10.0;
        }
        // A vanishing proposed step means the Gauss-Newton fixed point is reached,
        // whether or not rounding let the last step lower χ².
        if last_rel_step < REL_STEP_TOL {
            return Ok(finish(points, weights, &w, r, ps, chi2, iteration));
        }
    }
    Err(FitError::NonConvergence {
        iterations: MAX_ITERATIONS,
        r_det: r,
        p_s: ps,
        last_rel_step,
    })
}

fn validate(points: &[(f64, f64)], weights: Option<&[f64]>) -> Result<(), FitError> {
    let degenerate = |msg: String| Err(FitError::Degenerate(msg));
    if points.len() < 2 {
        return degenerate(format!("need at least 2 points, got {}", points.len()));
    }
    for (i, &(p, y)) in points.iter().enumerate() {
        if !(p.is_finite() && p > 0.0) {
            return degenerate(format!("power at point {i} must be positive, got {p}"));
        }
        if !(y.is_finite() && y >= 0.0) {
            return degenerate(format!("rate at point {i} must be non-negative, got {y}"));
        }
    }
    if points.iter().all(|&(_, y)| y == 0.0) {
        return degenerate("all rates are zero".into());
    }
    if distinct_powers(points) < 2 {
        return degenerate("all samples share one power".into());
    }
    if let Some(w) = weights {
        if w.len() != points.len() {
            return degenerate(format!("{} weights for {} points", w.len(), points.len()));
        }
        if w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return degenerate("weights must be positive and finite".into());
        }
    }
    Ok(())
}

fn distinct_powers(points: &[(f64, f64)]) -> usize {
    let mut powers: Vec<f64> = points.iter().map(|p| p.0).collect();
    powers.sort_by(f64::total_cmp);
    powers.dedup();
    powers.len()
}

fn initial_guess(points: &[(f64, f64)]) -> (f64, f64) {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let max_rate = sorted.iter().map(|p| p.1).fold(0.0, f64::max);
    let half = 0.5 * max_rate;
    let mut prev = (0.0, 0.0);
    let mut ps = sorted[sorted.len() - 1].0;
    for &(p, y) in &sorted {
        if y >= half {
            ps = if y > prev.1 {
                prev.0 + (half - prev.1) * (p - prev.0) / (y - prev.1)
            } else {
                p
            };
            break;
        }
        prev = (p, y);
    }
    (2.0 * max_rate, ps.max(f64::MIN_POSITIVE))
}

/// `(JᵀWJ, JᵀW r)` at `(r_det, p_s)`.
fn normal_equations(
    points: &[(f64, f64)],
    w: &impl Fn(usize) -> f64,
    r: f64,
    ps: f64,
) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut b = [0.0; 2];
    for (i, &(p, y)) in points.iter().enumerate() {
        let denom = p + ps;
        let j0 = p / denom;
        let j1 = -r * p / (denom * denom);
        let res = y - r * j0;
        let wi = w(i);
        a[0][0] += wi * j0 * j0;
        a[0][1] += wi * j0 * j1;
        a[1][1] += wi * j1 * j1;
        b[0] += wi * j0 * res;
        b[1] += wi * j1 * res;
    }
    a[1][0] = a[0][1];
    (a, b)
}

fn invert2(m: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    Some([
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ])
}

fn solve2(m: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let inv = invert2(m)?;
    Some([
        inv[0][0] * b[0] + inv[0][1] * b[1],
        inv[1][0] * b[0] + inv[1][1] * b[1],
    ])
}

fn finish(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
    w: &impl Fn(usize) -> f64,
    r: f64,
    ps: f64,
    chi2: f64,
    iterations: usize,
) -> SaturationFit {
    let (a, _) = normal_equations(points, w, r, ps);
    let dof = points.len() as f64 - 2.0;
    let scale = if weights.is_some() {
        1.0
    } else if dof > 0.0 {
        chi2 / dof
    } else {
        f64::NAN
    };
    let covariance = invert2(a)
        .map(|inv| inv.map(|row| row.map(|v| v * scale)))
        .unwrap_or([[f64::NAN; 2]; 2]);
    let powers = points.iter().map(|p| p.0);
    let min_p = powers.clone().fold(f64::INFINITY, f64::min);
    let max_p = powers.fold(0.0, f64::max);
    SaturationFit {
        r_det: r,
        p_s: ps,
        covariance,
        r_det_std_err: covariance[0][0].sqrt(),
        p_s_std_err: covariance[1][1].sqrt(),
        chi_square: chi2,
        iterations,
        low_confidence: distinct_powers(points) < 3 || min_p >= ps || max_p <= ps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(r: f64, ps: f64, powers: &[f64]) -> Vec<(f64, f64)> {
        powers.iter().map(|&p| (p, saturation_curve(r, ps, p))).collect()
    }

    #[test]
    fn recovers_noiseless_parameters() {
        let pts = synth(1e6, 0.9, &[0.05, 0.1, 0.3, 0.6, 1.0, 2.0, 4.0]);
        let fit = fit_saturation(&pts, None).unwrap();
        assert!((fit.r_det / 1e6 - 1.0).abs() < 1e-9);
        assert!((fit.p_s / 0.9 - 1.0).abs() < 1e-9);
        assert!(!fit.low_confidence);
    }

    #[test]
    fn three_point_design() {
        let pts = synth(2.5e5, 0.4, &[0.1, 0.5, 3.0]);
        let fit = fit_saturation(&pts, None).unwrap();
        assert!((fit.r_det / 2.5e5 - 1.0).abs() < 1e-9);
        assert!((fit.p_s / 0.4 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn low_confidence_when_not_bracketing() {
        let pts = synth(1e6, 0.9, &[0.01, 0.02, 0.05, 0.1]);
        let fit = fit_saturation(&pts, None).unwrap();
        assert!(fit.low_confidence);
        let fit = fit_saturation(&synth(1e6, 0.9, &[0.1, 2.0]), None).unwrap();
        assert!(fit.low_confidence);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_saturation(&[(1.0, 5.0), (1.0, 6.0), (1.0, 7.0)], None),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_saturation(&[(1.0, 0.0), (2.0, 0.0)], None),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_saturation(&[(1.0, -1.0), (2.0, 3.0)], None),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_saturation(&[(0.0, 1.0), (2.0, 3.0)], None),
            Err(FitError::Degenerate(_))
        ));
        assert!(matches!(
            fit_saturation(&[(1.0, 1.0), (2.0, 3.0)], Some(&[1.0])),
            Err(FitError::Degenerate(_))
        ));
    }

    #[test]
    fn rescale_moves_saturation_power_only() {
        let pts = synth(1e6, 0.9, &[0.1, 0.5, 1.0, 3.0]);
        let fit = fit_saturation(&pts, None).unwrap();
        let scaled = fit.rescale_power(0.5);
        assert_eq!(scaled.r_det, fit.r_det);
        assert!((scaled.p_s - 0.45).abs() < 1e-9);
    }

    #[test]
    fn poisson_weights_need_dwell() {
        let s = |dwell| Sample {
            power_w: 1.0,
            rate_hz: 100.0,
            dwell_s: dwell,
        };
        assert_eq!(poisson_weights(&[s(Some(0.5))]), Some(vec![0.5 / 100.0]));
        assert_eq!(poisson_weights(&[s(Some(0.5)), s(None)]), None);
    }
}
