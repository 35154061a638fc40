// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use super::grid::{Distribution, GridDistribution};
use super::sample::SampleSet;
use super::{DistError, Result};

/// Moments, quantiles and exceedance probabilities of one distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonSummary {
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
    /// Quantile level -> value.
    pub percentiles: BTreeMap<OrderedFloat<f64>, f64>,
    /// Threshold -> P(X > threshold).
    pub prob_exceed: BTreeMap<OrderedFloat<f64>, f64>,
}

impl CarbonSummary {
    pub fn percentile(&self, q: f64) -> Option<f64> {
        self.percentiles.get(&OrderedFloat(q)).copied()
    }

    pub fn exceed(&self, threshold: f64) -> Option<f64> {
        self.prob_exceed.get(&OrderedFloat(threshold)).copied()
    }
}

/// Anything that can be reduced to a [`CarbonSummary`].
pub trait Summarize {
    fn mean_variance(&self) -> (f64, f64);
    /// Quantiles for already-validated levels, in input order.
    fn quantiles(&self, qs: &[f64]) -> Vec<f64>;
    fn exceed(&self, thresholds: &[f64]) -> Vec<f64>;
}

pub fn summarize<S: Summarize + ?Sized>(
    values: &S,
    quantiles: &[f64],
    thresholds: &[f64],
) -> Result<CarbonSummary> {
    if let Some(q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(DistError::QuantileOutOfRange(*q));
    }
    let (mean, variance) = values.mean_variance();
    let variance = variance.max(0.0);
    let mut percentiles: BTreeMap<OrderedFloat<f64>, f64> = quantiles
        .iter()
        .zip(values.quantiles(quantiles))
        .map(|(q, v)| (OrderedFloat(*q), v))
        .collect();
    // guard against rounding breaking monotonicity
    let mut running = f64::NEG_INFINITY;
    for v in percentiles.values_mut() {
        running = running.max(*v);
        *v = running;
    }
    let mut prob_exceed: BTreeMap<OrderedFloat<f64>, f64> = thresholds
        .iter()
        .zip(values.exceed(thresholds))
        .map(|(t, p)| (OrderedFloat(*t), p.clamp(0.0, 1.0)))
        .collect();
    let mut running = 1.0f64;
    for p in prob_exceed.values_mut() {
        running = running.min(*p);
        *p = running;
    }
    Ok(CarbonSummary {
        mean,
        variance,
        std: variance.sqrt(),
        percentiles,
        prob_exceed,
    })
}

impl Summarize for Distribution {
    fn mean_variance(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }
    fn quantiles(&self, qs: &[f64]) -> Vec<f64> {
        qs.iter().map(|q| self.quantile(*q)).collect()
    }
    fn exceed(&self, thresholds: &[f64]) -> Vec<f64> {
        thresholds.iter().map(|t| self.prob_exceed(*t)).collect()
    }
}

impl Summarize for GridDistribution {
    fn mean_variance(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }
    fn quantiles(&self, qs: &[f64]) -> Vec<f64> {
        qs.iter().map(|q| self.quantile(*q)).collect()
    }
    fn exceed(&self, thresholds: &[f64]) -> Vec<f64> {
        thresholds.iter().map(|t| self.prob_exceed(*t)).collect()
    }
}

impl Summarize for SampleSet {
    fn mean_variance(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }
    fn quantiles(&self, qs: &[f64]) -> Vec<f64> {
        let sorted = self.sorted();
        qs.iter().map(|q| sorted_quantile(&sorted, *q)).collect()
    }
    fn exceed(&self, thresholds: &[f64]) -> Vec<f64> {
        let sorted = self.sorted();
        let n = sorted.len() as f64;
        thresholds
            .iter()
            .map(|t| {
                let at_or_below = sorted.partition_point(|v| v <= t);
                (sorted.len() - at_or_below) as f64 / n
            })
            .collect()
    }
}

/// Linear interpolation between order statistics at `h = (n - 1) q`.
pub fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}
