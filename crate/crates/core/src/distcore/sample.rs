// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::grid::{Distribution, GridDistribution};
use super::rng::StreamKey;
use super::{DistError, Result};

/// Monte Carlo draws tagged with the seed and label that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub seed: u64,
    pub label: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, seed: u64, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(DistError::EmptySamples);
        }
        Ok(SampleSet {
            values,
            seed,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        // shifted so that a constant sample has an exact mean
        let shift = self.values[0];
        shift + self.values.iter().map(|v| v - shift).sum::<f64>() / self.values.len() as f64
    }

    /// Unbiased sample variance (zero for a single draw).
    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mu = self.mean();
        self.values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (n - 1) as f64
    }

    /// Moment coefficient of skewness; zero when the sample has no spread.
    pub fn skewness(&self) -> f64 {
        let n = self.values.len() as f64;
        let mu = self.mean();
        let m2 = self.values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        if m2 <= 0.0 {
            return 0.0;
        }
        let m3 = self.values.iter().map(|v| (v - mu).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }
}

/// Inverse-CDF sampling from the piecewise-linear CDF of a grid.
pub fn sample(dist: &Distribution, n: usize, seed: u64) -> Result<SampleSet> {
    sample_named(dist, n, seed, "sample")
}

/// Like [`sample`] but drawing from the sub-stream keyed by `name`.
pub fn sample_named(dist: &Distribution, n: usize, seed: u64, name: &str) -> Result<SampleSet> {
    if n == 0 {
        return Err(DistError::ZeroSamples);
    }
    let values = draw(dist, n, &StreamKey::derive(seed, name));
    SampleSet::new(values, seed, name)
}

pub(crate) fn draw(dist: &Distribution, n: usize, key: &StreamKey) -> Vec<f64> {
    match dist {
        Distribution::Point(v) => vec![*v; n],
        Distribution::Grid(g) => {
            let sampler = InverseCdf::new(g);
            key.fill(n, |rng| sampler.at(rand::Rng::random::<f64>(rng)))
        }
    }
}

pub(crate) struct InverseCdf<'a> {
    grid: &'a GridDistribution,
}

impl<'a> InverseCdf<'a> {
    pub fn new(grid: &'a GridDistribution) -> Self {
        InverseCdf { grid }
    }

    #[inline]
    pub fn at(&self, u: f64) -> f64 {
        let cdf = self.grid.cdf_nodes();
        let i = cdf.partition_point(|&c| c <= u).clamp(1, cdf.len() - 1);
        let (c0, c1) = (cdf[i - 1], cdf[i]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        let spec = self.grid.spec();
        spec.x(i - 1) + frac * spec.step()
    }
}
