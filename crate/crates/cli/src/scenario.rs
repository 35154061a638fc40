// SPDX-License-Identifier: Apache-2.0

//! Scenario files.
//!
//! A scenario is one TOML document. `dataset` is resolved relative to the
//! scenario file. `seed` and `samples` are mandatory; `grid` defaults to
//! 4096 points and `quantiles` to `[0.5, 0.95]`.
//!
//! ```toml
//! dataset = "../data/bundle"
//! seed = 7
//! samples = 1000000
//! analysis = "embodied"
//!
//! [[designs]]
//! name = "epyc_mono"
//! as_of_year = 2017
//! chiplets = [{ node = "14nm", area_cm2 = 7.77 }]
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use embodied::carbon::{ChipletSpec, DesignSpec, DrawMode};
use embodied::distcore::DEFAULT_GRID_POINTS;
use embodied::ingest::DatasetBundle;
use embodied::provision::Estimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    Cpa,
    Embodied,
    Total,
    Alpha,
    Provision,
    Diagnose,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Cpa => "cpa",
            Analysis::Embodied => "embodied",
            Analysis::Total => "total",
            Analysis::Alpha => "alpha",
            Analysis::Provision => "provision",
            Analysis::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dataset: PathBuf,
    pub seed: u64,
    pub samples: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    pub analysis: Analysis,
    #[serde(default)]
    pub quantiles: Option<Vec<f64>>,
    #[serde(default)]
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub cpa: Option<CpaSection>,
    #[serde(default)]
    pub designs: Vec<DesignEntry>,
    #[serde(default)]
    pub profiles: Vec<ProfileEntry>,
    #[serde(default)]
    pub provision: Option<ProvisionSection>,
}

fn default_grid() -> usize {
    DEFAULT_GRID_POINTS
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub draws: Draws,
    /// Restrict defect records to the last `n` calendar years.
    #[serde(default)]
    pub d0_trailing_years: Option<u32>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Draws {
    #[default]
    Shared,
    Independent,
}

impl From<Draws> for DrawMode {
    fn from(d: Draws) -> Self {
        match d {
            Draws::Shared => DrawMode::Shared,
            Draws::Independent => DrawMode::Independent,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CpaSection {
    pub nodes: Vec<String>,
    pub as_of_year: i32,
    #[serde(default = "one")]
    pub reference_area_cm2: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipletEntry {
    pub node: String,
    pub area_cm2: f64,
    #[serde(default = "one_u32")]
    pub count: u32,
    /// Multiplier for porting a block to another node.
    #[serde(default = "one")]
    pub area_scale: f64,
}

fn one_u32() -> u32 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignEntry {
    pub name: String,
    pub as_of_year: i32,
    pub chiplets: Vec<ChipletEntry>,
}

impl DesignEntry {
    pub fn to_spec(&self) -> DesignSpec {
        DesignSpec {
            name: self.name.clone(),
            as_of_year: self.as_of_year,
            chiplets: self
                .chiplets
                .iter()
                .map(|c| ChipletSpec {
                    node: c.node.clone(),
                    area_cm2: c.area_cm2 * c.area_scale,
                    count: c.count,
                })
                .collect(),
        }
    }
}

/// A use-phase carbon intensity: a bundled region history or a constant.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CiUse {
    Region(String),
    Constant { g_per_kwh: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub name: String,
    pub design: String,
    pub tdp_watts: f64,
    pub lifetime_years: f64,
    /// Name of a bundled utilization set.
    pub utilization: String,
    pub ci_use: CiUse,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaModel {
    pub base_side: u32,
    pub base_systolic_cm2: f64,
    pub base_buffer_cm2: f64,
    /// Area that does not scale with the array (I/O, control).
    #[serde(default)]
    pub fixed_cm2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateEntry {
    pub label: String,
    pub performance: f64,
    #[serde(default)]
    pub power_watts: Option<f64>,
    /// Name of a design in `[[designs]]`.
    #[serde(default)]
    pub design: Option<String>,
    /// Array side; needs `[provision.area]`, `node` and `as_of_year`.
    #[serde(default)]
    pub side: Option<u32>,
    #[serde(default)]
    pub node: Option<String>,
    #[serde(default)]
    pub as_of_year: Option<i32>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProvisionSection {
    pub budget_kgco2: f64,
    pub risk: f64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    #[serde(default = "one")]
    pub worst_case_quantile: f64,
    #[serde(default)]
    pub area: Option<AreaModel>,
    pub candidates: Vec<CandidateEntry>,
}

fn default_estimator() -> Estimator {
    Estimator::Percentile(0.95)
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        let mut s: Scenario = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
            path: path.into(),
            message: e.to_string(),
        })?;
        if s.dataset.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            s.dataset = base.join(&s.dataset);
        }
        Ok(s)
    }

    pub fn design(&self, name: &str) -> Option<&DesignEntry> {
        self.designs.iter().find(|d| d.name == name)
    }

    /// Checks the analysis body against itself and the bundle.
    pub fn check(&self, path: &Path, bundle: &DatasetBundle) -> Result<(), ScenarioError> {
        let fail = |message: String| ScenarioError::Invalid {
            path: path.into(),
            message,
        };
        if self.samples == 0 {
            return Err(fail("samples must be positive".into()));
        }
        if self.grid < 2 {
            return Err(fail("grid must have at least 2 points".into()));
        }
        let node = |n: &str| {
            if bundle.nodes.contains_key(n) {
                Ok(())
            } else {
                Err(fail(format!("unknown node `{n}`")))
            }
        };
        let mut names = BTreeSet::new();
        for d in &self.designs {
            if !names.insert(d.name.as_str()) {
                return Err(fail(format!("duplicate design `{}`", d.name)));
            }
            for c in &d.chiplets {
                node(&c.node)?;
            }
        }
        let need_designs = |what: &str| {
            if self.designs.is_empty() {
                Err(fail(format!("`{what}` analysis needs [[designs]]")))
            } else {
                Ok(())
            }
        };
        match self.analysis {
            Analysis::Cpa => {
                let cpa = self
                    .cpa
                    .as_ref()
                    .ok_or_else(|| fail("`cpa` analysis needs a [cpa] table".into()))?;
                if cpa.nodes.is_empty() {
                    return Err(fail("[cpa] nodes is empty".into()));
                }
                for n in &cpa.nodes {
                    node(n)?;
                }
            }
            Analysis::Embodied | Analysis::Diagnose => need_designs(self.analysis.name())?,
            Analysis::Total | Analysis::Alpha => {
                if self.profiles.is_empty() {
                    return Err(fail(format!(
                        "`{}` analysis needs [[profiles]]",
                        self.analysis.name()
                    )));
                }
                for p in &self.profiles {
                    if self.design(&p.design).is_none() {
                        return Err(fail(format!(
                            "profile `{}` references unknown design `{}`",
                            p.name, p.design
                        )));
                    }
                    if !bundle.utilization_sets.contains_key(&p.utilization) {
                        return Err(fail(format!(
                            "profile `{}` references unknown utilization set `{}`",
                            p.name, p.utilization
                        )));
                    }
                    if let CiUse::Region(r) = &p.ci_use {
                        if !bundle.ci_histories.contains_key(r) {
                            return Err(fail(format!(
                                "profile `{}` references unknown region `{r}`",
                                p.name
                            )));
                        }
                    }
                }
            }
            Analysis::Provision => {
                let p = self
                    .provision
                    .as_ref()
                    .ok_or_else(|| fail("`provision` analysis needs a [provision] table".into()))?;
                for c in &p.candidates {
                    match (&c.design, c.side) {
                        (Some(d), None) => {
                            if self.design(d).is_none() {
                                return Err(fail(format!(
                                    "candidate `{}` references unknown design `{d}`",
                                    c.label
                                )));
                            }
                        }
                        (None, Some(_)) => {
                            if p.area.is_none() {
                                return Err(fail(format!(
                                    "candidate `{}` gives `side` but [provision.area] is missing",
                                    c.label
                                )));
                            }
                            match (&c.node, c.as_of_year) {
                                (Some(n), Some(_)) => node(n)?,
                                _ => {
                                    return Err(fail(format!(
                                        "candidate `{}` needs `node` and `as_of_year`",
                                        c.label
                                    )))
                                }
                            }
                        }
                        _ => {
                            return Err(fail(format!(
                                "candidate `{}` needs exactly one of `design` or `side`",
                                c.label
                            )))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_scenario() {
        let s: Scenario = toml::from_str(
            r#"
            dataset = "b"
            seed = 1
            samples = 10
            analysis = "embodied"
            [[designs]]
            name = "d"
            as_of_year = 2020
            chiplets = [{ node = "7nm", area_cm2 = 1.0, area_scale = 1.5, count = 2 }]
            "#,
        )
        .unwrap();
        assert_eq!(s.grid, DEFAULT_GRID_POINTS);
        let spec = s.designs[0].to_spec();
        assert_eq!(spec.chiplets[0].area_cm2, 1.5);
        assert_eq!(spec.chiplets[0].count, 2);
    }

    #[test]
    fn seed_is_required() {
        let r: Result<Scenario, _> = toml::from_str(
            r#"
            dataset = "b"
            samples = 10
            analysis = "cpa"
            "#,
        );
        assert!(r.is_err());
    }

    #[test]
    fn ci_use_forms() {
        let p: ProfileEntry = toml::from_str(
            r#"
            name = "p"
            design = "d"
            tdp_watts = 1.0
            lifetime_years = 1.0
            utilization = "u"
            ci_use = { g_per_kwh = 390.0 }
            "#,
        )
        .unwrap();
        assert!(matches!(p.ci_use, CiUse::Constant { g_per_kwh } if g_per_kwh == 390.0));
    }

    #[test]
    fn estimator_forms() {
        let p: ProvisionSection = toml::from_str(
            r#"
            budget_kgco2 = 1.0
            risk = 0.05
            estimator = "mean"
            candidates = []
            "#,
        )
        .unwrap();
        assert_eq!(p.estimator, Estimator::Mean);
        let p: ProvisionSection = toml::from_str(
            r#"
            budget_kgco2 = 1.0
            risk = 0.05
            estimator = { percentile = 0.9 }
            candidates = []
            "#,
        )
        .unwrap();
        assert_eq!(p.estimator, Estimator::Percentile(0.9));
    }
}
