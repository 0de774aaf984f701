//! Diameter histograms, re-binning, and distribution comparison.

use serde::{Deserialize, Serialize};

use super::SizingError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Binning {
    pub width_nm: f64,
    pub start_nm: f64,
}

impl Default for Binning {
    fn default() -> Self {
        Self {
            width_nm: 20.0,
            start_nm: 0.0,
        }
    }
}

/// Weighted counts over contiguous bins `[edges[i], edges[i + 1])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<f64>,
}

impl Histogram {
    /// Uniform bins from `binning.start_nm` wide enough to hold every point.
    /// Points below the start are dropped.
    pub fn from_weighted(points: &[(f64, f64)], binning: &Binning) -> Result<Self, SizingError> {
        if !(binning.width_nm.is_finite() && binning.width_nm > 0.0) {
            return Err(SizingError::InvalidParameter(format!(
                "bin width must be positive, got {}",
                binning.width_nm
            )));
        }
        let max = points
            .iter()
            .map(|p| p.0)
            .filter(|v| v.is_finite())
            .fold(binning.start_nm, f64::max);
        let nbins = (((max - binning.start_nm) / binning.width_nm).floor() as usize + 1).max(1);
        let edges: Vec<f64> = (0..=nbins)
            .map(|i| binning.start_nm + i as f64 * binning.width_nm)
            .collect();
        let mut counts = vec![0.0; nbins];
        for &(x, w) in points {
            if !x.is_finite() || x < binning.start_nm {
                continue;
            }
            let i = (((x - binning.start_nm) / binning.width_nm).floor() as usize).min(nbins - 1);
            counts[i] += w;
        }
        Ok(Self { edges, counts })
    }

    pub fn from_values(values: &[f64], binning: &Binning) -> Result<Self, SizingError> {
        let points: Vec<(f64, f64)> = values.iter().map(|&v| (v, 1.0)).collect();
        Self::from_weighted(&points, binning)
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Center of the fullest bin (first one on ties).
    pub fn mode(&self) -> Option<f64> {
        if self.total() <= 0.0 {
            return None;
        }
        let (i, _) = self
            .counts
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
        Some(0.5 * (self.edges[i] + self.edges[i + 1]))
    }

    /// Redistributes counts onto `edges`, assuming a flat density within each
    /// source bin. Counts falling outside `edges` are lost.
    pub fn rebin(&self, edges: &[f64]) -> Self {
        let mut counts = vec![0.0; edges.len().saturating_sub(1)];
        for (k, w) in self.edges.windows(2).enumerate() {
            let (lo, hi) = (w[0], w[1]);
            let c = self.counts[k];
            if c == 0.0 || hi <= lo {
                continue;
            }
            for (j, t) in edges.windows(2).enumerate() {
                let overlap = hi.min(t[1]) - lo.max(t[0]);
                if overlap > 0.0 {
                    counts[j] += c * overlap / (hi - lo);
                }
            }
        }
        Self {
            edges: edges.to_vec(),
            counts,
        }
    }

    fn min_width(&self) -> f64 {
        self.edges
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionComparison {
    pub luminescence_mode_nm: f64,
    pub dls_mode_nm: f64,
    /// `dls_mode − luminescence_mode`.
    pub mode_shift_nm: f64,
    /// `Σ min(p, q)` of the unit-normalised histograms on a common grid, in `[0, 1]`.
    pub overlap: f64,
}

pub fn compare_distributions(lum: &Histogram, dls: &Histogram) -> Result<DistributionComparison, SizingError> {
    for (name, h) in [("luminescence", lum), ("DLS", dls)] {
        if h.counts.is_empty() || h.total() <= 0.0 {
            return Err(SizingError::EmptyHistogram(name.into()));
        }
    }
    let (a, b) = if lum.edges == dls.edges {
        (lum.clone(), dls.clone())
    } else {
        let width = lum.min_width().min(dls.min_width());
        let start = lum.edges[0].min(dls.edges[0]);
        let end = lum.edges[lum.edges.len() - 1].max(dls.edges[dls.edges.len() - 1]);
        let n = ((end - start) / width).ceil() as usize;
        let edges: Vec<f64> = (0..=n).map(|i| start + i as f64 * width).collect();
        (lum.rebin(&edges), dls.rebin(&edges))
    };
    let (ta, tb) = (a.total(), b.total());
    let overlap = a
        .counts
        .iter()
        .zip(&b.counts)
        .map(|(x, y)| (x / ta).min(y / tb))
        .sum::<f64>()
        .min(1.0);
    let luminescence_mode_nm = lum.mode().expect("non-empty");
    let dls_mode_nm = dls.mode().expect("non-empty");
    Ok(DistributionComparison {
        luminescence_mode_nm,
        dls_mode_nm,
        mode_shift_nm: dls_mode_nm - luminescence_mode_nm,
        overlap,
    })
}

/// Mode of a Gaussian kernel density estimate with Silverman's bandwidth,
/// located on a 2 000-point grid spanning the data.
pub fn density_mode(values: &[f64]) -> Option<f64> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.len() < 2 {
        return v.first().copied();
    }
    let ms = crate::numeric::mean_std(&v)?;
    let iqr = crate::numeric::percentile(&v, 75.0)? - crate::numeric::percentile(&v, 25.0)?;
    let spread = if iqr > 0.0 { ms.std_dev.min(iqr / 1.34) } else { ms.std_dev };
    if spread <= 0.0 {
        return Some(ms.mean);
    }
    let h = 0.9 * spread * (v.len() as f64).powf(-0.2);
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    const N: usize = 2000;
    (0..=N)
        .map(|i| lo + (hi - lo) * i as f64 / N as f64)
        .map(|x| {
            let d: f64 = v.iter().map(|&xi| (-0.5 * ((x - xi) / h).powi(2)).exp()).sum();
            (x, d)
        })
        .fold(None, |best: Option<(f64, f64)>, cur| match best {
            Some(b) if b.1 >= cur.1 => Some(b),
            _ => Some(cur),
        })
        .map(|(x, _)| x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lognormal_hist(shift: f64) -> Histogram {
        let (mu, s): (f64, f64) = (70f64.ln(), 0.4);
        let edges: Vec<f64> = (0..=40).map(|i| i as f64 * 10.0).collect();
        let counts = edges
            .windows(2)
            .map(|w| {
                let x = 0.5 * (w[0] + w[1]) - shift;
                if x <= 0.0 {
                    0.0
                } else {
                    (-(x.ln() - mu).powi(2) / (2.0 * s * s)).exp() / x
                }
            })
            .collect();
        Histogram { edges, counts }
    }

    #[test]
    fn identical_histograms() {
        let h = lognormal_hist(0.0);
        let c = compare_distributions(&h, &h).unwrap();
        assert_eq!(c.mode_shift_nm, 0.0);
        assert!((c.overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_lognormal() {
        let c = compare_distributions(&lognormal_hist(0.0), &lognormal_hist(30.0)).unwrap();
        assert_eq!(c.mode_shift_nm, 30.0);
        assert!(c.overlap < 1.0 && c.overlap > 0.0);
    }

    #[test]
    fn rebin_conserves_mass_inside_range() {
        let h = Histogram {
            edges: vec![0.0, 20.0, 40.0],
            counts: vec![4.0, 2.0],
        };
        let fine = h.rebin(&[0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(fine.counts, vec![2.0, 2.0, 1.0, 1.0]);
    }

    #[test]
    fn different_grids_are_rebinned() {
        let a = Histogram {
            edges: vec![0.0, 20.0, 40.0],
            counts: vec![1.0, 1.0],
        };
        let b = Histogram {
            edges: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            counts: vec![1.0, 1.0, 1.0, 1.0],
        };
        let c = compare_distributions(&a, &b).unwrap();
        assert!((c.overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_histogram_rejected() {
        let h = Histogram {
            edges: vec![0.0, 1.0],
            counts: vec![0.0],
        };
        assert!(matches!(
            compare_distributions(&h, &lognormal_hist(0.0)),
            Err(SizingError::EmptyHistogram(_))
        ));
    }

    #[test]
    fn from_values_bins() {
        let h = Histogram::from_values(&[5.0, 15.0, 25.0, 39.9, 40.0], &Binning::default()).unwrap();
        assert_eq!(h.edges, vec![0.0, 20.0, 40.0, 60.0]);
        assert_eq!(h.counts, vec![2.0, 2.0, 1.0]);
    }

    #[test]
    fn density_mode_of_symmetric_sample() {
        let v: Vec<f64> = (-50..=50).map(|i: i32| 100.0 + 30.0 * (i as f64 / 50.0).powi(3)).collect();
        let m = density_mode(&v).unwrap();
        assert!((m - 100.0).abs() < 2.0, "{m}");
    }
}
