// SPDX-License-Identifier: Apache-2.0

//! Per-node parameter distributions: energy per area (EPA), gas per area
//! (GPA), defect density / yield, and fab grid carbon intensity (CI).

use chrono::{Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distcore::{
    kde_auto, Bandwidth, Bounds, DistError, Distribution, GridDistribution, GridSpec, KdeInput,
    DEFAULT_GRID_POINTS,
};

/// z-score of a symmetric 95% interval.
pub const Z95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("node {node}: year {year} precedes mass production in {mass_production_year}")]
    YearBeforeMassProduction {
        node: String,
        year: i32,
        mass_production_year: i32,
    },
    #[error("node {0}: empty efficiency series")]
    EmptyEfficiencySeries(String),
    #[error("node {0}: empty gas inventory")]
    EmptyGasInventory(String),
    #[error("node {node}: no defect-density records between {start} and {end}")]
    EmptyDefectWindow {
        node: String,
        start: NaiveDate,
        end: NaiveDate,
    },
    #[error("die area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("{histories} CI histories but {weights} shares")]
    MismatchedLengths { histories: usize, weights: usize },
    #[error("capacity shares sum to {0}, expected 1")]
    SharesDontSumToOne(f64),
    #[error("utilization sample {0} is outside [0, 1]")]
    SampleOutOfUnitInterval(f64),
    #[error("node {0}: no capacity shares to weight fab carbon intensity")]
    MissingCapacityShares(String),
    #[error("no carbon-intensity history for region {0}")]
    UnknownRegion(String),
    #[error("empty carbon-intensity history for region {0}")]
    EmptyHistory(String),
    #[error(transparent)]
    Dist(#[from] DistError),
}

pub type Result<T, E = ParamError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasEmission {
    pub gas: String,
    /// kg CO2e per kg of gas.
    pub gwp: f64,
    /// kg of gas per cm2, post-abatement mean.
    pub emission_per_area: f64,
    /// Half-width of the 95% interval as a fraction of the mean.
    pub rel_error_95: f64,
    /// Abatement fraction already applied to `emission_per_area`.
    pub abatement: f64,
}

impl GasEmission {
    /// Mean CO2e per cm2.
    pub fn mean_co2e(&self) -> f64 {
        self.emission_per_area * self.gwp
    }

    pub fn std_co2e(&self) -> f64 {
        self.mean_co2e() * self.rel_error_95 / Z95
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechNode {
    pub name: String,
    /// kWh per cm2 at `epa_anchor_year`.
    pub epa_base: f64,
    pub epa_anchor_year: i32,
    /// (year, cumulative efficiency multiplier relative to mass production).
    pub efficiency_series: Vec<(i32, f64)>,
    /// (date, D0 in defects per cm2).
    pub defect_series: Vec<(NaiveDate, f64)>,
    pub gas_inventory: Vec<GasEmission>,
    /// (region id, share of production capacity).
    pub capacity_shares: Vec<(String, f64)>,
    /// Materials, kg CO2e per cm2.
    pub mpa: f64,
    pub mass_production_year: i32,
}

impl TechNode {
    /// Cumulative efficiency multiplier in `year`, carrying the last known
    /// value forward; 1 before the first record.
    pub fn efficiency_at(&self, year: i32) -> f64 {
        self.efficiency_series
            .iter()
            .filter(|(y, _)| *y <= year)
            .max_by_key(|(y, _)| *y)
            .map_or(1.0, |(_, m)| *m)
    }

    /// EPA (kWh/cm2) for each year from mass production through `as_of_year`.
    pub fn epa_by_year(&self, as_of_year: i32) -> Result<Vec<(i32, f64)>> {
        if as_of_year < self.mass_production_year {
            return Err(ParamError::YearBeforeMassProduction {
                node: self.name.clone(),
                year: as_of_year,
                mass_production_year: self.mass_production_year,
            });
        }
        if self.efficiency_series.is_empty() {
            return Err(ParamError::EmptyEfficiencySeries(self.name.clone()));
        }
        let anchor = self.efficiency_at(self.epa_anchor_year);
        Ok((self.mass_production_year..=as_of_year)
            .map(|y| (y, self.epa_base * anchor / self.efficiency_at(y)))
            .collect())
    }

    /// D0 values recorded inside `window`.
    pub fn defects_in(&self, window: DateWindow) -> Vec<f64> {
        self.defect_series
            .iter()
            .filter(|(d, _)| window.contains(*d))
            .map(|(_, v)| *v)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionCIHistory {
    pub region: String,
    /// (timestamp, g CO2e per kWh).
    pub records: Vec<(NaiveDateTime, f64)>,
}

impl RegionCIHistory {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|(_, v)| *v)
    }

    pub fn mean(&self) -> f64 {
        self.values().sum::<f64>() / self.records.len() as f64
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    /// January 1 of `from_year` through December 31 of `to_year`.
    pub fn years(from_year: i32, to_year: i32) -> Self {
        DateWindow {
            start: NaiveDate::from_ymd_opt(from_year, 1, 1).expect("valid year"),
            end: NaiveDate::from_ymd_opt(to_year, 12, 31).expect("valid year"),
        }
    }

    pub fn contains(&self, d: NaiveDate) -> bool {
        self.start <= d && d <= self.end
    }

    pub fn start_year(&self) -> i32 {
        self.start.year()
    }
}

/// KDE settings for one parameter family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub bandwidth: Bandwidth,
    pub grid_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bandwidth: Bandwidth::Scott,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

/// Equal-weight KDE over the yearly EPA values, clipped at zero.
pub fn build_epa_distribution(
    node: &TechNode,
    as_of_year: i32,
    opts: &FitOptions,
) -> Result<Distribution> {
    let values: Vec<f64> = node
        .epa_by_year(as_of_year)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    let input = KdeInput::new(values, opts.bandwidth);
    Ok(kde_auto(&input, opts.grid_points, Bounds::NON_NEGATIVE)?)
}

/// Per-gas CO2e distributions: Normal(mean, (mean * rel_error_95 / 1.96)^2)
/// truncated at zero.
pub fn gpa_components(node: &TechNode, grid_points: usize) -> Result<Vec<(String, Distribution)>> {
    if node.gas_inventory.is_empty() {
        return Err(ParamError::EmptyGasInventory(node.name.clone()));
    }
    node.gas_inventory
        .iter()
        .map(|g| {
            Ok((
                g.gas.clone(),
                truncated_normal(g.mean_co2e(), g.std_co2e(), grid_points)?,
            ))
        })
        .collect()
}

/// Sum of independent per-gas normals, rendered analytically and truncated
/// at zero.
pub fn build_gpa_distribution(node: &TechNode, grid_points: usize) -> Result<Distribution> {
    if node.gas_inventory.is_empty() {
        return Err(ParamError::EmptyGasInventory(node.name.clone()));
    }
    let mean: f64 = node.gas_inventory.iter().map(GasEmission::mean_co2e).sum();
    let var: f64 = node
        .gas_inventory
        .iter()
        .map(|g| g.std_co2e().powi(2))
        .sum();
    Ok(truncated_normal(mean, var.sqrt(), grid_points)?)
}

/// Normal density on `[max(0, mean - 8 std), mean + 8 std]`, renormalized.
pub fn truncated_normal(
    mean: f64,
    std: f64,
    grid_points: usize,
) -> std::result::Result<Distribution, DistError> {
    if std <= 0.0 {
        return Ok(Distribution::Point(mean.max(0.0)));
    }
    let hi = mean + 8.0 * std;
    if hi <= 0.0 {
        return Ok(Distribution::Point(0.0));
    }
    let spec = GridSpec::new((mean - 8.0 * std).max(0.0), hi, grid_points)?;
    let g = GridDistribution::from_fn(spec, |x| (-0.5 * ((x - mean) / std).powi(2)).exp())?;
    Ok(g.into())
}

/// Equal-weight KDE over the D0 records in `window`, clipped at zero.
pub fn build_d0_distribution(
    node: &TechNode,
    window: DateWindow,
    opts: &FitOptions,
) -> Result<Distribution> {
    let d0 = node.defects_in(window);
    if d0.is_empty() {
        return Err(ParamError::EmptyDefectWindow {
            node: node.name.clone(),
            start: window.start,
            end: window.end,
        });
    }
    let input = KdeInput::new(d0, opts.bandwidth);
    Ok(kde_auto(&input, opts.grid_points, Bounds::NON_NEGATIVE)?)
}

/// Poisson yield `exp(-D0 * area)` pushed through the D0 density.
pub fn build_yield_distribution(
    node: &TechNode,
    area_cm2: f64,
    window: DateWindow,
    opts: &FitOptions,
) -> Result<Distribution> {
    if !(area_cm2 > 0.0) {
        return Err(ParamError::NonPositiveArea(area_cm2));
    }
    let d0 = build_d0_distribution(node, window, opts)?;
    Ok(yield_from_d0(&d0, area_cm2, opts.grid_points)?)
}

/// Change of variables `y = exp(-d a)`: `f_Y(y) = f_D(-ln(y) / a) / (a y)`.
pub fn yield_from_d0(
    d0: &Distribution,
    area_cm2: f64,
    grid_points: usize,
) -> std::result::Result<Distribution, DistError> {
    let g = match d0 {
        Distribution::Point(d) => return Ok(Distribution::Point((-d * area_cm2).exp())),
        Distribution::Grid(g) => g,
    };
    let y_lo = (-g.x_max() * area_cm2).exp();
    let y_hi = (-g.x_min() * area_cm2).exp();
    if y_hi - y_lo <= 1e-12 * y_hi {
        return Ok(Distribution::Point((-g.mean() * area_cm2).exp()));
    }
    let spec = GridSpec::new(y_lo, y_hi, grid_points)?;
    let density = (0..spec.n_points)
        .map(|i| {
            let y = spec.x(i);
            let d = (-y.ln() / area_cm2).clamp(g.x_min(), g.x_max());
            g.pdf(d) / (area_cm2 * y)
        })
        .collect();
    Ok(GridDistribution::from_spec(spec, density)?.into())
}

/// Weighted KDE input for a capacity-share mixture: every record of region
/// `r` carries weight `share_r / len_r`.
pub fn ci_kde_input(
    histories: &[&RegionCIHistory],
    shares: &[f64],
    bandwidth: Bandwidth,
) -> Result<KdeInput> {
    if histories.len() != shares.len() {
        return Err(ParamError::MismatchedLengths {
            histories: histories.len(),
            weights: shares.len(),
        });
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ParamError::SharesDontSumToOne(total));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (h, share) in histories.iter().zip(shares) {
        if h.records.is_empty() {
            return Err(ParamError::EmptyHistory(h.region.clone()));
        }
        let w = share / h.records.len() as f64;
        for v in h.values() {
            points.push(v);
            weights.push(w);
        }
    }
    Ok(KdeInput::weighted(points, weights, bandwidth))
}

/// Capacity-weighted mixture of regional grid intensities, g CO2e/kWh.
pub fn build_ci_distribution(
    histories: &[&RegionCIHistory],
    shares: &[f64],
    opts: &FitOptions,
) -> Result<Distribution> {
    let input = ci_kde_input(histories, shares, opts.bandwidth)?;
    Ok(kde_auto(&input, opts.grid_points, Bounds::NON_NEGATIVE)?)
}

/// KDE of utilization fractions clipped to `[0, 1]`.
pub fn build_utilization_distribution(
    samples: &[f64],
    weights: Option<&[f64]>,
    opts: &FitOptions,
) -> Result<Distribution> {
    if let Some(bad) = samples.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(ParamError::SampleOutOfUnitInterval(*bad));
    }
    let input = KdeInput {
        points: samples.to_vec(),
        weights: weights.map(<[f64]>::to_vec),
        bandwidth: opts.bandwidth,
    };
    Ok(kde_auto(&input, opts.grid_points, Bounds::UNIT)?)
}
