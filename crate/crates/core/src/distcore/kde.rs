// SPDX-License-Identifier: Apache-2.0

//! Weighted one-dimensional Gaussian kernel density estimation.
//!
//! The estimate is `f(x) = sum_i (w_i / W) * N(x; x_i, h^2)` with `W = sum_i w_i`.
//! Rule-of-thumb bandwidths use the weighted standard deviation of the
//! kernel centers and the effective sample size `m = W^2 / sum_i w_i^2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Bounds, Distribution, GridDistribution, GridSpec};
use super::{DistError, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Kernels extend this many bandwidths past the outermost center.
pub const KERNEL_REACH: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    Fixed(f64),
    #[default]
    Scott,
    Silverman,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeInput {
    pub points: Vec<f64>,
    /// `None` means equal weights.
    pub weights: Option<Vec<f64>>,
    pub bandwidth: Bandwidth,
}

impl KdeInput {
    pub fn new(points: Vec<f64>, bandwidth: Bandwidth) -> Self {
        KdeInput {
            points,
            weights: None,
            bandwidth,
        }
    }

    pub fn weighted(points: Vec<f64>, weights: Vec<f64>, bandwidth: Bandwidth) -> Self {
        KdeInput {
            points,
            weights: Some(weights),
            bandwidth,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(DistError::EmptyInput);
        }
        if let Some(p) = self.points.iter().find(|p| !p.is_finite()) {
            return Err(DistError::NonFinitePoint(*p));
        }
        if let Some(w) = &self.weights {
            if w.len() != self.points.len() {
                return Err(DistError::WeightLengthMismatch {
                    points: self.points.len(),
                    weights: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
                return Err(DistError::InvalidWeight(*bad));
            }
            if w.iter().sum::<f64>() <= 0.0 {
                return Err(DistError::ZeroWeightSum);
            }
        }
        if let Bandwidth::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(DistError::NonPositiveBandwidth(h));
            }
        }
        Ok(())
    }

    /// Normalized weights (sum to 1).
    pub fn normalized_weights(&self) -> Vec<f64> {
        match &self.weights {
            None => vec![1.0 / self.points.len() as f64; self.points.len()],
            Some(w) => {
                let total: f64 = w.iter().sum();
                w.iter().map(|w| w / total).collect()
            }
        }
    }

    pub fn weighted_mean(&self) -> f64 {
        self.normalized_weights()
            .iter()
            .zip(&self.points)
            .map(|(w, x)| w * x)
            .sum()
    }

    pub fn weighted_std(&self) -> f64 {
        let mu = self.weighted_mean();
        self.normalized_weights()
            .iter()
            .zip(&self.points)
            .map(|(w, x)| w * (x - mu) * (x - mu))
            .sum::<f64>()
            .sqrt()
    }

    /// Kish effective sample size `(sum w)^2 / sum w^2`.
    pub fn effective_size(&self) -> f64 {
        match &self.weights {
            None => self.points.len() as f64,
            Some(w) => {
                let s: f64 = w.iter().sum();
                let s2: f64 = w.iter().map(|w| w * w).sum();
                s * s / s2
            }
        }
    }

    /// Resolved bandwidth; zero when a rule meets zero spread.
    pub fn resolve_bandwidth(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Scott => self.weighted_std() * self.effective_size().powf(-0.2),
            Bandwidth::Silverman => self.weighted_std() * (0.75 * self.effective_size()).powf(-0.2),
        })
    }

    /// Span `[min - 4h, max + 4h]` the kernels occupy.
    pub fn required_span(&self, h: f64) -> (f64, f64) {
        let lo = self.points.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .points
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        (lo - KERNEL_REACH * h, hi + KERNEL_REACH * h)
    }
}

/// Evaluates the KDE on `grid` and renormalizes it by trapezoidal integral.
/// The grid must cover every kernel center plus four bandwidths.
pub fn kde_fit(input: &KdeInput, grid: GridSpec) -> Result<GridDistribution> {
    grid.validate()?;
    let h = input.resolve_bandwidth()?;
    if h <= 0.0 {
        return Err(DistError::NonPositiveBandwidth(h));
    }
    let (req_lo, req_hi) = input.required_span(h);
    let slack = 1e-9 * (req_hi - req_lo).abs().max(1.0);
    if grid.x_min > req_lo + slack || grid.x_max < req_hi - slack {
        return Err(DistError::GridTooNarrow {
            x_min: grid.x_min,
            x_max: grid.x_max,
            required_min: req_lo,
            required_max: req_hi,
        });
    }
    evaluate(input, h, grid)
}

/// Fits on an automatically sized grid (`n_points` spanning the kernels),
/// clipped to `bounds` and renormalized. Returns a point mass when the rule
/// bandwidth collapses because every center coincides.
pub fn kde_auto(input: &KdeInput, n_points: usize, bounds: Bounds) -> Result<Distribution> {
    let h = input.resolve_bandwidth()?;
    if h <= 0.0 {
        return Ok(Distribution::Point(bounds.clamp(input.points[0])));
    }
    let (lo, hi) = input.required_span(h);
    let spec = GridSpec::new(lo.max(bounds.lower), hi.min(bounds.upper), n_points)?;
    Ok(evaluate(input, h, spec)?.into())
}

fn evaluate(input: &KdeInput, h: f64, grid: GridSpec) -> Result<GridDistribution> {
    let weights = input.normalized_weights();
    let kernels: Vec<(f64, f64)> = input
        .points
        .iter()
        .copied()
        .zip(weights)
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let norm = INV_SQRT_2PI / h;
    let density: Vec<f64> = (0..grid.n_points)
        .into_par_iter()
        .map(|i| {
            let x = grid.x(i);
            kernels
                .iter()
                .map(|(c, w)| {
                    let z = (x - c) / h;
                    w * (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    GridDistribution::from_spec(grid, density)
}

/// Smooths a large sample into a plot-ready grid density: linear binning
/// onto the grid followed by a Gaussian convolution with Scott's bandwidth.
pub fn smooth_samples(values: &[f64], n_points: usize, bounds: Bounds) -> Result<Distribution> {
    if values.is_empty() {
        return Err(DistError::EmptySamples);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(DistError::NonFinitePoint(if lo.is_finite() {
            hi
        } else {
            lo
        }));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let h = var.sqrt() * n.powf(-0.2);
    if h <= 0.0 || hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
        return Ok(Distribution::Point(bounds.clamp(mean)));
    }
    let spec = GridSpec::new(
        (lo - KERNEL_REACH * h).max(bounds.lower),
        (hi + KERNEL_REACH * h).min(bounds.upper),
        n_points,
    )?;
    let step = spec.step();

    let mut binned = vec![0.0; n_points];
    for v in values {
        let t = ((v - spec.x_min) / step).clamp(0.0, (n_points - 1) as f64);
        let i = (t.floor() as usize).min(n_points - 2);
        let frac = t - i as f64;
        binned[i] += 1.0 - frac;
        binned[i + 1] += frac;
    }

    let reach = ((5.0 * h) / step).ceil() as usize;
    let kernel: Vec<f64> = (0..=reach)
        .map(|k| {
            let z = k as f64 * step / h;
            (-0.5 * z * z).exp()
        })
        .collect();
    let density: Vec<f64> = (0..n_points)
        .into_par_iter()
        .map(|i| {
            let start = i.saturating_sub(reach);
            let end = (i + reach).min(n_points - 1);
            (start..=end)
                .map(|j| binned[j] * kernel[i.abs_diff(j)])
                .sum()
        })
        .collect();
    Ok(GridDistribution::from_spec(spec, density)?.into())
}
