// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DistError, Result};

/// Uniform grid layout: `n_points` nodes from `x_min` to `x_max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridSpec {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        let spec = GridSpec {
            x_min,
            x_max,
            n_points,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(DistError::InvalidGrid(format!(
                "non-finite bounds [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        if self.x_min >= self.x_max {
            return Err(DistError::InvalidGrid(format!(
                "x_min {} must be below x_max {}",
                self.x_min, self.x_max
            )));
        }
        if self.n_points < 2 {
            return Err(DistError::InvalidGrid(format!(
                "need at least 2 points, got {}",
                self.n_points
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn step(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.x_max
        } else {
            self.x_min + i as f64 * self.step()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }
}

/// Physical bounds used to clip densities (e.g. `[0, inf)` for emissions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const UNBOUNDED: Bounds = Bounds {
        lower: f64::NEG_INFINITY,
        upper: f64::INFINITY,
    };
    pub const NON_NEGATIVE: Bounds = Bounds {
        lower: 0.0,
        upper: f64::INFINITY,
    };
    pub const UNIT: Bounds = Bounds {
        lower: 0.0,
        upper: 1.0,
    };

    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.lower).min(self.upper)
    }
}

/// Probability density tabulated on a uniform grid, normalized so the
/// trapezoidal integral is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DistRecord", try_from = "DistRecord")]
pub struct GridDistribution {
    spec: GridSpec,
    density: Vec<f64>,
    /// Cumulative trapezoid mass at each node; last entry is 1.
    cdf: Vec<f64>,
}

impl GridDistribution {
    /// Builds a distribution from raw non-negative density values, rescaling
    /// them to unit trapezoidal mass.
    pub fn new(x_min: f64, x_max: f64, density: Vec<f64>) -> Result<Self> {
        let spec = GridSpec::new(x_min, x_max, density.len())?;
        Self::from_spec(spec, density)
    }

    pub fn from_spec(spec: GridSpec, mut density: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if density.len() != spec.n_points {
            return Err(DistError::InvalidGrid(format!(
                "density has {} values for {} grid points",
                density.len(),
                spec.n_points
            )));
        }
        if let Some(bad) = density.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(DistError::InvalidGrid(format!(
                "invalid density value {bad}"
            )));
        }
        let total = trapezoid(&density, spec.step());
        if !(total.is_finite() && total > 0.0) {
            return Err(DistError::DegenerateDensity);
        }
        for d in density.iter_mut() {
            *d /= total;
        }
        let cdf = cumulative(&density, spec.step());
        Ok(GridDistribution { spec, density, cdf })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(f64) -> f64) -> Result<Self> {
        let density = (0..spec.n_points).map(|i| f(spec.x(i))).collect();
        Self::from_spec(spec, density)
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn x_min(&self) -> f64 {
        self.spec.x_min
    }
    pub fn x_max(&self) -> f64 {
        self.spec.x_max
    }
    pub fn n_points(&self) -> usize {
        self.spec.n_points
    }
    pub fn step(&self) -> f64 {
        self.spec.step()
    }
    pub fn density(&self) -> &[f64] {
        &self.density
    }
    pub fn xs(&self) -> Vec<f64> {
        self.spec.xs()
    }

    /// Trapezoidal integral of the stored density (1 up to rounding).
    pub fn integral(&self) -> f64 {
        trapezoid(&self.density, self.step())
    }

    /// Density at `x`, linearly interpolated; zero outside the grid.
    pub fn pdf(&self, x: f64) -> f64 {
        interp_nodes(&self.spec, &self.density, x, 0.0, 0.0)
    }

    /// Piecewise-linear CDF through the cumulative trapezoid masses.
    pub fn cdf(&self, x: f64) -> f64 {
        interp_nodes(&self.spec, &self.cdf, x, 0.0, 1.0)
    }

    pub fn prob_exceed(&self, t: f64) -> f64 {
        (1.0 - self.cdf(t)).clamp(0.0, 1.0)
    }

    /// Inverse of the piecewise-linear CDF.
    pub fn quantile(&self, q: f64) -> f64 {
        let q = q.clamp(0.0, 1.0);
        let i = self.cdf.partition_point(|&c| c < q);
        if i == 0 {
            // q == 0: first node where mass starts accumulating
            let first = self.cdf.partition_point(|&c| c <= 0.0);
            return self.spec.x(first.saturating_sub(1));
        }
        if i >= self.cdf.len() {
            return self.spec.x_max;
        }
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let frac = if c1 > c0 { (q - c0) / (c1 - c0) } else { 0.0 };
        self.spec.x(i - 1) + frac * self.step()
    }

    pub fn mean(&self) -> f64 {
        let h = self.step();
        let xs = self.spec.xs();
        let weighted: Vec<f64> = xs.iter().zip(&self.density).map(|(x, d)| x * d).collect();
        trapezoid(&weighted, h)
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let h = self.step();
        let xs = self.spec.xs();
        let weighted: Vec<f64> = xs
            .iter()
            .zip(&self.density)
            .map(|(x, d)| (x - mu) * (x - mu) * d)
            .collect();
        trapezoid(&weighted, h).max(0.0)
    }

    pub(crate) fn cdf_nodes(&self) -> &[f64] {
        &self.cdf
    }

    /// Node masses under the trapezoid rule (sum to 1).
    pub fn node_masses(&self) -> Vec<f64> {
        let h = self.step();
        let last = self.density.len() - 1;
        self.density
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let w = if i == 0 || i == last { 0.5 * h } else { h };
                d * w
            })
            .collect()
    }
}

/// A distribution that may be an exact point mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DistRecord", try_from = "DistRecord")]
pub enum Distribution {
    Point(f64),
    Grid(GridDistribution),
}

impl From<GridDistribution> for Distribution {
    fn from(g: GridDistribution) -> Self {
        Distribution::Grid(g)
    }
}

impl Distribution {
    pub fn is_point(&self) -> bool {
        matches!(self, Distribution::Point(_))
    }

    pub fn as_grid(&self) -> Option<&GridDistribution> {
        match self {
            Distribution::Grid(g) => Some(g),
            Distribution::Point(_) => None,
        }
    }

    /// Closed interval containing all probability mass.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Distribution::Point(v) => (*v, *v),
            Distribution::Grid(g) => (g.x_min(), g.x_max()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            Distribution::Point(v) => *v,
            Distribution::Grid(g) => g.mean(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Distribution::Point(_) => 0.0,
            Distribution::Grid(g) => g.variance(),
        }
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Point(v) => {
                if x >= *v {
                    1.0
                } else {
                    0.0
                }
            }
            Distribution::Grid(g) => g.cdf(x),
        }
    }

    pub fn prob_exceed(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }

    pub fn quantile(&self, q: f64) -> f64 {
        match self {
            Distribution::Point(v) => *v,
            Distribution::Grid(g) => g.quantile(q),
        }
    }

    /// Density at `x` (zero for a point mass, which has no density).
    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Distribution::Point(_) => 0.0,
            Distribution::Grid(g) => g.pdf(x),
        }
    }

    /// Two-column CSV (`x,density`). A point mass is written as a single
    /// row whose second column holds its probability mass, 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,density\n");
        match self {
            Distribution::Point(v) => {
                let _ = writeln!(out, "{v},1");
            }
            Distribution::Grid(g) => {
                for (x, d) in g.xs().iter().zip(g.density()) {
                    let _ = writeln!(out, "{x},{d}");
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ds = Vec::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("x,density") => {}
            other => {
                return Err(DistError::Format(format!(
                    "expected header `x,density`, found {other:?}"
                )))
            }
        }
        for (lineno, line) in lines.enumerate() {
            let mut cols = line.split(',');
            let parse = |c: Option<&str>| -> Result<f64> {
                c.map(str::trim)
                    .ok_or_else(|| {
                        DistError::Format(format!("row {}: missing column", lineno + 2))
                    })?
                    .parse::<f64>()
                    .map_err(|e| DistError::Format(format!("row {}: {e}", lineno + 2)))
            };
            xs.push(parse(cols.next())?);
            ds.push(parse(cols.next())?);
        }
        match xs.len() {
            0 => Err(DistError::Format("no rows".into())),
            1 => Ok(Distribution::Point(xs[0])),
            n => {
                let spec = GridSpec::new(xs[0], xs[n - 1], n)?;
                Ok(GridDistribution::from_spec(spec, ds)?.into())
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distribution record is always serializable")
    }
}

/// On-disk JSON record shared by [`GridDistribution`] and [`Distribution`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DistRecord {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    density: Vec<f64>,
}

impl From<GridDistribution> for DistRecord {
    fn from(g: GridDistribution) -> Self {
        DistRecord {
            x_min: g.spec.x_min,
            x_max: g.spec.x_max,
            n_points: g.spec.n_points,
            density: g.density,
        }
    }
}

impl From<Distribution> for DistRecord {
    fn from(d: Distribution) -> Self {
        match d {
            Distribution::Point(v) => DistRecord {
                x_min: v,
                x_max: v,
                n_points: 1,
                density: vec![1.0],
            },
            Distribution::Grid(g) => g.into(),
        }
    }
}

impl TryFrom<DistRecord> for GridDistribution {
    type Error = DistError;
    fn try_from(r: DistRecord) -> Result<Self> {
        if r.density.len() != r.n_points {
            return Err(DistError::Format(format!(
                "n_points {} but {} density values",
                r.n_points,
                r.density.len()
            )));
        }
        GridDistribution::new(r.x_min, r.x_max, r.density)
    }
}

impl TryFrom<DistRecord> for Distribution {
    type Error = DistError;
    fn try_from(r: DistRecord) -> Result<Self> {
        if r.n_points == 1 && r.x_min == r.x_max {
            return Ok(Distribution::Point(r.x_min));
        }
        Ok(Distribution::Grid(r.try_into()?))
    }
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            h * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

fn cumulative(density: &[f64], h: f64) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(density.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for w in density.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        cdf.push(acc);
    }
    // absorb rounding so the table ends exactly at 1
    let total = acc;
    for c in cdf.iter_mut() {
        *c /= total;
    }
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    cdf
}

fn interp_nodes(spec: &GridSpec, values: &[f64], x: f64, below: f64, above: f64) -> f64 {
    if x < spec.x_min {
        return below;
    }
    if x > spec.x_max {
        return above;
    }
    let t = (x - spec.x_min) / spec.step();
    let i = (t.floor() as usize).min(spec.n_points - 2);
    let frac = (t - i as f64).clamp(0.0, 1.0);
    values[i] + frac * (values[i + 1] - values[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform01() -> GridDistribution {
        GridDistribution::new(0.0, 1.0, vec![1.0; 101]).unwrap()
    }

    #[test]
    fn normalizes_to_unit_mass() {
        let g = GridDistribution::new(0.0, 2.0, vec![3.0; 11]).unwrap();
        assert!((g.integral() - 1.0).abs() < 1e-12);
        assert!((g.density()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridDistribution::new(1.0, 1.0, vec![1.0, 1.0]).is_err());
        assert!(GridDistribution::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(GridDistribution::new(0.0, 1.0, vec![1.0, -1.0]).is_err());
        assert_eq!(
            GridDistribution::new(0.0, 1.0, vec![0.0, 0.0]).unwrap_err(),
            DistError::DegenerateDensity
        );
    }

    #[test]
    fn uniform_moments_and_quantiles() {
        let g = uniform01();
        assert!((g.mean() - 0.5).abs() < 1e-12);
        assert!((g.variance() - 1.0 / 12.0).abs() < 1e-4);
        assert!((g.quantile(0.25) - 0.25).abs() < 1e-12);
        assert_eq!(g.quantile(1.0), 1.0);
        assert_eq!(g.prob_exceed(0.0), 1.0);
        assert_eq!(g.prob_exceed(1.0), 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let spec = GridSpec::new(-3.0, 5.0, 801).unwrap();
        let g = GridDistribution::from_fn(spec, |x| (-(x - 1.0) * (x - 1.0)).exp()).unwrap();
        for q in [0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!((g.cdf(g.quantile(q)) - q).abs() < 1e-12);
        }
    }

    #[test]
    fn point_mass_semantics() {
        let p = Distribution::Point(2.0);
        assert_eq!(p.cdf(1.999), 0.0);
        assert_eq!(p.cdf(2.0), 1.0);
        assert_eq!(p.prob_exceed(1.0), 1.0);
        assert_eq!(p.quantile(0.3), 2.0);
        assert_eq!(p.variance(), 0.0);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let d: Distribution = uniform01().into();
        let back = Distribution::from_csv(&d.to_csv()).unwrap();
        assert_eq!(back, d);
        let json: Distribution = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(json, d);

        let p = Distribution::Point(0.25);
        assert_eq!(Distribution::from_csv(&p.to_csv()).unwrap(), p);
        let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(v["n_points"], 1);
        assert_eq!(serde_json::from_value::<Distribution>(v).unwrap(), p);
    }

    #[test]
    fn json_record_has_contract_fields() {
        let v: serde_json::Value = serde_json::to_value(uniform01()).unwrap();
        for key in ["x_min", "x_max", "n_points", "density"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["n_points"], 101);
    }
}
