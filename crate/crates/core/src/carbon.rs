// SPDX-License-Identifier: Apache-2.0

//! Carbon composition.
//!
//! Carbon per good-die area for node `n` and die area `a`:
//!
//! ```text
//! CPA = (CI_fab * EPA + GPA + MPA) / exp(-D0 * a)      kg CO2e / cm2
//! E   = sum_i count_i * a_i * CPA(n_i, a_i)           kg CO2e per design
//! ```
//!
//! CI is carried in g CO2e/kWh and scaled to kg here. Within one Monte
//! Carlo trial, chiplets on the same node share that node's draws of CI,
//! EPA, GPA and D0 (one fab, one set of conditions); yield is then
//! evaluated per chiplet from the shared D0.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distcore::{
    propagate_mc, smooth_samples, summarize, Bounds, CarbonSummary, DistError, Distribution, Expr,
    PropagationExpr, SampleSet, DEFAULT_GRID_POINTS, DEFAULT_SAMPLES,
};
use crate::ingest::{DatasetBundle, IngestError};
use crate::params::{
    build_ci_distribution, build_d0_distribution, build_epa_distribution, build_gpa_distribution,
    DateWindow, FitOptions, ParamError,
};

pub const HOURS_PER_YEAR: f64 = 8766.0;
const G_TO_KG: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarbonError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("yield support reaches zero for node {0}")]
    YieldSupportAtZero(String),
    #[error("invalid design `{name}`: {reason}")]
    InvalidDesign { name: String, reason: String },
    #[error("invalid operational profile: {0}")]
    InvalidProfile(String),
    #[error("sample counts differ: embodied {embodied}, operational {operational}")]
    LengthMismatch { embodied: usize, operational: usize },
    #[error("embodied + operational is zero at trial {0}")]
    ZeroTotalSample(usize),
}

pub type Result<T, E = CarbonError> = std::result::Result<T, E>;

/// Monte Carlo and reporting settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    pub quantiles: Vec<f64>,
    pub thresholds: Vec<f64>,
    /// Points in plot-ready output grids.
    pub grid_points: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            samples: DEFAULT_SAMPLES,
            seed: 0,
            quantiles: vec![0.5, 0.95],
            thresholds: Vec::new(),
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl McConfig {
    pub fn with(samples: usize, seed: u64) -> Self {
        McConfig {
            samples,
            seed,
            ..McConfig::default()
        }
    }
}

/// A Monte Carlo result with its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub samples: SampleSet,
    pub summary: CarbonSummary,
}

impl Outcome {
    fn new(samples: SampleSet, mc: &McConfig) -> Result<Self> {
        let summary = summarize(&samples, &mc.quantiles, &mc.thresholds)?;
        Ok(Outcome { samples, summary })
    }

    /// Smoothed density of the samples, clipped at zero.
    pub fn grid(&self, n_points: usize) -> Result<Distribution> {
        Ok(smooth_samples(
            &self.samples.values,
            n_points,
            Bounds::NON_NEGATIVE,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipletSpec {
    pub node: String,
    pub area_cm2: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub name: String,
    pub chiplets: Vec<ChipletSpec>,
    /// Fab-condition vintage shared by every chiplet.
    pub as_of_year: i32,
}

impl DesignSpec {
    pub fn monolithic(name: &str, node: &str, area_cm2: f64, as_of_year: i32) -> Self {
        DesignSpec {
            name: name.into(),
            chiplets: vec![ChipletSpec {
                node: node.into(),
                area_cm2,
                count: 1,
            }],
            as_of_year,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| CarbonError::InvalidDesign {
            name: self.name.clone(),
            reason,
        };
        if self.chiplets.is_empty() {
            return Err(bad("no chiplets".into()));
        }
        for c in &self.chiplets {
            if !(c.area_cm2 > 0.0 && c.area_cm2.is_finite()) {
                return Err(bad(format!("chiplet area {} must be positive", c.area_cm2)));
            }
            if c.count == 0 {
                return Err(bad("chiplet count must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn total_area(&self) -> f64 {
        self.chiplets
            .iter()
            .map(|c| c.count as f64 * c.area_cm2)
            .sum()
    }
}

/// The four stochastic fab parameters of one node at one vintage, plus the
/// deterministic materials term.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeInputs {
    pub node: String,
    pub as_of_year: i32,
    /// g CO2e per kWh.
    pub ci: Distribution,
    /// kWh per cm2.
    pub epa: Distribution,
    /// kg CO2e per cm2.
    pub gpa: Distribution,
    /// Defects per cm2.
    pub d0: Distribution,
    /// kg CO2e per cm2.
    pub mpa: f64,
}

/// Per-parameter fit settings used when building [`NodeInputs`] from data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelOptions {
    pub epa: FitOptions,
    pub d0: FitOptions,
    pub ci: FitOptions,
    /// Keep only the last `n` calendar years of defect records (mature
    /// production). `None` uses everything since mass production.
    #[serde(default)]
    pub d0_trailing_years: Option<u32>,
}

impl ModelOptions {
    pub fn with_grid_points(n: usize) -> Self {
        let mut o = ModelOptions::default();
        o.epa.grid_points = n;
        o.d0.grid_points = n;
        o.ci.grid_points = n;
        o
    }
}

impl NodeInputs {
    /// Builds every parameter distribution of `node` as of `as_of_year`.
    /// Defect records are taken from mass production (or the trailing window
    /// in `opts`) through `as_of_year`.
    pub fn from_bundle(
        bundle: &DatasetBundle,
        node: &str,
        as_of_year: i32,
        opts: &ModelOptions,
    ) -> Result<Self> {
        let tech = bundle.node(node)?;
        if tech.capacity_shares.is_empty() {
            return Err(ParamError::MissingCapacityShares(node.into()).into());
        }
        let histories = tech
            .capacity_shares
            .iter()
            .map(|(r, _)| bundle.ci_history(r))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let shares: Vec<f64> = tech.capacity_shares.iter().map(|(_, s)| *s).collect();
        let first = match opts.d0_trailing_years {
            Some(n) => tech
                .mass_production_year
                .max(as_of_year - n.max(1) as i32 + 1),
            None => tech.mass_production_year,
        };
        let window = DateWindow::years(first, as_of_year);
        Ok(NodeInputs {
            node: node.into(),
            as_of_year,
            ci: build_ci_distribution(&histories, &shares, &opts.ci)?,
            epa: build_epa_distribution(tech, as_of_year, &opts.epa)?,
            gpa: build_gpa_distribution(tech, opts.epa.grid_points)?,
            d0: build_d0_distribution(tech, window, &opts.d0)?,
            mpa: tech.mpa,
        })
    }

    /// Replaces every source except `keep` by a point mass at its mean.
    pub fn frozen_except(&self, keep: UncertaintySource) -> NodeInputs {
        let freeze = |d: &Distribution, s: UncertaintySource| {
            if s == keep {
                d.clone()
            } else {
                Distribution::Point(d.mean())
            }
        };
        NodeInputs {
            node: self.node.clone(),
            as_of_year: self.as_of_year,
            ci: freeze(&self.ci, UncertaintySource::Ci),
            epa: freeze(&self.epa, UncertaintySource::Epa),
            gpa: freeze(&self.gpa, UncertaintySource::Gpa),
            d0: freeze(&self.d0, UncertaintySource::Yield),
            mpa: self.mpa,
        }
    }

    /// Single deterministic CPA from the parameter means, in the style of
    /// point-estimate carbon models.
    pub fn deterministic_cpa(&self, area_cm2: f64) -> f64 {
        let y = (-(self.d0.mean() * area_cm2)).exp();
        ((self.ci.mean() * G_TO_KG) * self.epa.mean() + self.gpa.mean() + self.mpa) / y
    }
}

/// Anything that can provide [`NodeInputs`] by node name and vintage.
pub trait NodeSource: Sync {
    fn inputs(&self, node: &str, as_of_year: i32) -> Result<Arc<NodeInputs>>;
}

/// Fixed inputs keyed by node name; the vintage is ignored.
impl NodeSource for BTreeMap<String, NodeInputs> {
    fn inputs(&self, node: &str, _as_of_year: i32) -> Result<Arc<NodeInputs>> {
        self.get(node)
            .cloned()
            .map(Arc::new)
            .ok_or_else(|| IngestError::UnknownNode(node.into()).into())
    }
}

/// Bundle-backed source that builds and caches inputs per (node, year).
pub struct BundleModel<'a> {
    bundle: &'a DatasetBundle,
    options: ModelOptions,
    cache: Mutex<BTreeMap<(String, i32), Arc<NodeInputs>>>,
}

impl<'a> BundleModel<'a> {
    pub fn new(bundle: &'a DatasetBundle, options: ModelOptions) -> Self {
        BundleModel {
            bundle,
            options,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn bundle(&self) -> &DatasetBundle {
        self.bundle
    }
}

impl NodeSource for BundleModel<'_> {
    fn inputs(&self, node: &str, as_of_year: i32) -> Result<Arc<NodeInputs>> {
        let key = (node.to_string(), as_of_year);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(NodeInputs::from_bundle(
            self.bundle,
            node,
            as_of_year,
            &self.options,
        )?);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(key, built.clone());
        Ok(built)
    }
}

/// Whether chiplets on one node share parameter draws within a trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrawMode {
    #[default]
    Shared,
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintySource {
    Epa,
    Gpa,
    Yield,
    Ci,
}

impl UncertaintySource {
    pub const ALL: [UncertaintySource; 4] = [
        UncertaintySource::Epa,
        UncertaintySource::Gpa,
        UncertaintySource::Yield,
        UncertaintySource::Ci,
    ];

    pub fn label(self) -> &'static str {
        match self {
            UncertaintySource::Epa => "epa",
            UncertaintySource::Gpa => "gpa",
            UncertaintySource::Yield => "yield",
            UncertaintySource::Ci => "ci",
        }
    }
}

struct NodeNames {
    ci: String,
    epa: String,
    gpa: String,
    d0: String,
}

impl NodeNames {
    fn new(inputs: &NodeInputs, suffix: &str) -> Self {
        let base = format!("{}@{}", inputs.node, inputs.as_of_year);
        NodeNames {
            ci: format!("{base}:ci{suffix}"),
            epa: format!("{base}:epa{suffix}"),
            gpa: format!("{base}:gpa{suffix}"),
            d0: format!("{base}:d0{suffix}"),
        }
    }

    fn bind(&self, expr: PropagationExpr, inputs: &NodeInputs) -> PropagationExpr {
        expr.bind(self.ci.clone(), inputs.ci.clone())
            .bind(self.epa.clone(), inputs.epa.clone())
            .bind(self.gpa.clone(), inputs.gpa.clone())
            .bind(self.d0.clone(), inputs.d0.clone())
    }

    /// `(CI * EPA + GPA + MPA) / exp(-D0 * area)`
    fn cpa(&self, mpa: f64, area_cm2: f64) -> Expr {
        let per_area = Expr::input(&self.ci).scale(G_TO_KG) * Expr::input(&self.epa)
            + Expr::input(&self.gpa)
            + Expr::constant(mpa);
        per_area / Expr::exp_neg_product(Expr::input(&self.d0), Expr::constant(area_cm2))
    }
}

fn run(expr: PropagationExpr, node_hint: &str, mc: &McConfig, label: &str) -> Result<Outcome> {
    let mut samples = propagate_mc(&expr, mc.samples, mc.seed).map_err(|e| match e {
        DistError::DivisionSupportIncludesZero { .. } => {
            CarbonError::YieldSupportAtZero(node_hint.to_string())
        }
        other => other.into(),
    })?;
    samples.label = label.to_string();
    Outcome::new(samples, mc)
}

/// Carbon per cm2 of good die for one node, with yield evaluated at
/// `area_cm2` (1 cm2 for the per-area view).
pub fn cpa_distribution(
    source: &dyn NodeSource,
    node: &str,
    area_cm2: f64,
    as_of_year: i32,
    mc: &McConfig,
) -> Result<Outcome> {
    if !(area_cm2 > 0.0) {
        return Err(ParamError::NonPositiveArea(area_cm2).into());
    }
    let inputs = source.inputs(node, as_of_year)?;
    let names = NodeNames::new(&inputs, "");
    let expr = names.bind(
        PropagationExpr::new(names.cpa(inputs.mpa, area_cm2)),
        &inputs,
    );
    run(expr, node, mc, &format!("cpa/{node}"))
}

/// Builds the embodied-carbon expression of a design.
pub fn embodied_expr(
    design: &DesignSpec,
    source: &dyn NodeSource,
    draws: DrawMode,
) -> Result<PropagationExpr> {
    design.validate()?;
    let mut terms: Vec<Expr> = Vec::with_capacity(design.chiplets.len());
    let mut bound: Vec<(NodeNames, Arc<NodeInputs>)> = Vec::new();
    for (i, chiplet) in design.chiplets.iter().enumerate() {
        let inputs = source.inputs(&chiplet.node, design.as_of_year)?;
        let suffix = match draws {
            DrawMode::Shared => String::new(),
            DrawMode::Independent => format!("#{i}"),
        };
        let names = NodeNames::new(&inputs, &suffix);
        let scale = chiplet.count as f64 * chiplet.area_cm2;
        terms.push(Expr::constant(scale) * names.cpa(inputs.mpa, chiplet.area_cm2));
        bound.push((names, inputs));
    }
    let root = terms
        .into_iter()
        .reduce(|acc, t| acc + t)
        .expect("validated design has chiplets");
    Ok(bound
        .iter()
        .fold(PropagationExpr::new(root), |e, (names, inputs)| {
            names.bind(e, inputs)
        }))
}

/// Embodied carbon per design instance (kg CO2e).
pub fn embodied_distribution(
    design: &DesignSpec,
    source: &dyn NodeSource,
    mc: &McConfig,
) -> Result<Outcome> {
    embodied_distribution_with(design, source, mc, DrawMode::Shared)
}

pub fn embodied_distribution_with(
    design: &DesignSpec,
    source: &dyn NodeSource,
    mc: &McConfig,
    draws: DrawMode,
) -> Result<Outcome> {
    let expr = embodied_expr(design, source, draws)?;
    run(
        expr,
        &design.chiplets[0].node,
        mc,
        &format!("embodied/{}", design.name),
    )
}

/// Use-phase profile of a device.
#[derive(Debug, Clone, PartialEq)]
pub struct OperationalProfile {
    pub tdp_watts: f64,
    pub lifetime_years: f64,
    /// Fraction of TDP drawn, on `[0, 1]`.
    pub utilization: Distribution,
    /// g CO2e per kWh.
    pub ci_use: Distribution,
}

/// Use-phase carbon: `tdp * u * lifetime_hours * ci / 1e6` kg CO2e (W x h
/// gives Wh; Wh x g/kWh / 1e6 gives kg), with `u` and `ci` independent.
pub fn operational_distribution(profile: &OperationalProfile, mc: &McConfig) -> Result<Outcome> {
    if !(profile.tdp_watts > 0.0) {
        return Err(CarbonError::InvalidProfile(format!(
            "tdp {} must be positive",
            profile.tdp_watts
        )));
    }
    if !(profile.lifetime_years > 0.0) {
        return Err(CarbonError::InvalidProfile(format!(
            "lifetime {} must be positive",
            profile.lifetime_years
        )));
    }
    let hours = profile.lifetime_years * HOURS_PER_YEAR;
    let kwh_scale = profile.tdp_watts * hours * G_TO_KG;
    let expr =
        (Expr::input("use:utilization") * Expr::input("use:ci").scale(G_TO_KG)).scale(kwh_scale);
    let expr = PropagationExpr::new(expr)
        .bind("use:utilization", profile.utilization.clone())
        .bind("use:ci", profile.ci_use.clone());
    run(expr, "use", mc, "operational")
}

/// Fixed α ranges from two-regime embodied/operational weighting, used as
/// overlays next to the modeled α distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaRegime {
    pub label: &'static str,
    pub center: f64,
    pub half_width: f64,
}

pub const FIXED_ALPHA_REGIMES: [AlphaRegime; 2] = [
    AlphaRegime {
        label: "embodied_dominated",
        center: 0.8,
        half_width: 0.1,
    },
    AlphaRegime {
        label: "operational_dominated",
        center: 0.2,
        half_width: 0.1,
    },
];

/// Per-trial totals `e + o` and embodied shares `e / (e + o)`.
pub fn total_and_alpha(
    embodied: &SampleSet,
    operational: &SampleSet,
) -> Result<(SampleSet, SampleSet)> {
    if embodied.len() != operational.len() {
        return Err(CarbonError::LengthMismatch {
            embodied: embodied.len(),
            operational: operational.len(),
        });
    }
    let mut total = Vec::with_capacity(embodied.len());
    let mut alpha = Vec::with_capacity(embodied.len());
    for (k, (e, o)) in embodied.values.iter().zip(&operational.values).enumerate() {
        let t = e + o;
        if !(t > 0.0) {
            return Err(CarbonError::ZeroTotalSample(k));
        }
        total.push(t);
        alpha.push(e / t);
    }
    Ok((
        SampleSet::new(total, embodied.seed, "total")?,
        SampleSet::new(alpha, embodied.seed, "alpha")?,
    ))
}

struct Frozen<'a> {
    inner: &'a dyn NodeSource,
    keep: UncertaintySource,
}

impl NodeSource for Frozen<'_> {
    fn inputs(&self, node: &str, as_of_year: i32) -> Result<Arc<NodeInputs>> {
        Ok(Arc::new(
            self.inner
                .inputs(node, as_of_year)?
                .frozen_except(self.keep),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceConditional {
    pub source: UncertaintySource,
    pub outcome: Outcome,
}

/// Embodied carbon with one uncertainty source active at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnoseReport {
    pub full: Outcome,
    pub conditionals: Vec<SourceConditional>,
    /// Sources ordered by conditional variance, largest first.
    pub ranking: Vec<UncertaintySource>,
    /// Sum of the conditional variances. The CI x EPA product is not
    /// additive, so this need not equal the full-model variance.
    pub conditional_variance_sum: f64,
}

impl DiagnoseReport {
    pub fn conditional(&self, s: UncertaintySource) -> &Outcome {
        &self
            .conditionals
            .iter()
            .find(|c| c.source == s)
            .expect("every source is diagnosed")
            .outcome
    }
}

/// Holds every source but one at its distribution mean (D0 at its mean for
/// the yield source) and reruns the embodied model, once per source.
pub fn diagnose_sources(
    design: &DesignSpec,
    source: &dyn NodeSource,
    mc: &McConfig,
) -> Result<DiagnoseReport> {
    let full = embodied_distribution(design, source, mc)?;
    let conditionals = UncertaintySource::ALL
        .iter()
        .map(|&keep| {
            let frozen = Frozen {
                inner: source,
                keep,
            };
            let mut outcome = embodied_distribution(design, &frozen, mc)?;
            outcome.samples.label = format!("diagnose/{}/{}", design.name, keep.label());
            Ok(SourceConditional {
                source: keep,
                outcome,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ranking: Vec<(UncertaintySource, f64)> = conditionals
        .iter()
        .map(|c| (c.source, c.outcome.summary.variance))
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let conditional_variance_sum = ranking.iter().map(|(_, v)| v).sum();
    Ok(DiagnoseReport {
        full,
        conditionals,
        ranking: ranking.into_iter().map(|(s, _)| s).collect(),
        conditional_variance_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distcore::{GridDistribution, GridSpec};

    fn point_inputs(node: &str, d0: f64) -> NodeInputs {
        NodeInputs {
            node: node.into(),
            as_of_year: 2020,
            ci: Distribution::Point(500.0),
            epa: Distribution::Point(1.2),
            gpa: Distribution::Point(0.15),
            d0: Distribution::Point(d0),
            mpa: 0.5,
        }
    }

    fn spread(center: f64, width: f64) -> Distribution {
        let spec = GridSpec::new(center - width, center + width, 257).unwrap();
        GridDistribution::from_fn(spec, |x| 1.0 + 0.5 * ((x - center) / width))
            .unwrap()
            .into()
    }

    fn source(inputs: NodeInputs) -> BTreeMap<String, NodeInputs> {
        BTreeMap::from([(inputs.node.clone(), inputs)])
    }

    #[test]
    fn degenerate_cpa_is_exact() {
        let src = source(point_inputs("n", 0.1));
        let out = cpa_distribution(&src, "n", 1.0, 2020, &McConfig::with(64, 1)).unwrap();
        let expected = ((500.0 * 1e-3) * 1.2 + 0.15 + 0.5) / (-(0.1f64 * 1.0)).exp();
        assert!(out.samples.values.iter().all(|v| *v == expected));
        assert_eq!(out.summary.variance, 0.0);
        assert_eq!(src["n"].deterministic_cpa(1.0), expected);
    }

    #[test]
    fn design_validation() {
        let src = source(point_inputs("n", 0.1));
        let mut d = DesignSpec::monolithic("d", "n", 1.0, 2020);
        d.chiplets[0].count = 0;
        assert!(matches!(
            embodied_distribution(&d, &src, &McConfig::with(8, 0)).unwrap_err(),
            CarbonError::InvalidDesign { .. }
        ));
        let missing = DesignSpec::monolithic("d", "zz", 1.0, 2020);
        assert!(matches!(
            embodied_distribution(&missing, &src, &McConfig::with(8, 0)).unwrap_err(),
            CarbonError::Ingest(IngestError::UnknownNode(_))
        ));
    }

    #[test]
    fn split_without_defects_is_sample_identical() {
        let mut inputs = point_inputs("n", 0.0);
        inputs.ci = spread(500.0, 100.0);
        inputs.epa = spread(1.2, 0.4);
        let src = source(inputs);
        let mono = DesignSpec::monolithic("m", "n", 2.0, 2020);
        let split = DesignSpec {
            name: "s".into(),
            chiplets: vec![ChipletSpec {
                node: "n".into(),
                area_cm2: 1.0,
                count: 2,
            }],
            as_of_year: 2020,
        };
        let mc = McConfig::with(20_000, 3);
        let a = embodied_distribution(&mono, &src, &mc).unwrap();
        let b = embodied_distribution(&split, &src, &mc).unwrap();
        assert_eq!(a.samples.values, b.samples.values);
    }

    #[test]
    fn independent_draws_change_only_shared_structure() {
        let mut inputs = point_inputs("n", 0.1);
        inputs.epa = spread(1.2, 0.4);
        let src = source(inputs);
        let d = DesignSpec {
            name: "two".into(),
            chiplets: vec![
                ChipletSpec {
                    node: "n".into(),
                    area_cm2: 1.0,
                    count: 1,
                },
                ChipletSpec {
                    node: "n".into(),
                    area_cm2: 1.0,
                    count: 1,
                },
            ],
            as_of_year: 2020,
        };
        let mc = McConfig::with(50_000, 8);
        let shared = embodied_distribution_with(&d, &src, &mc, DrawMode::Shared).unwrap();
        let indep = embodied_distribution_with(&d, &src, &mc, DrawMode::Independent).unwrap();
        assert!((shared.summary.mean - indep.summary.mean).abs() / shared.summary.mean < 0.01);
        // perfectly correlated halves double the variance of the sum
        let ratio = shared.summary.variance / indep.summary.variance;
        assert!((ratio - 2.0).abs() < 0.1, "variance ratio {ratio}");
    }

    #[test]
    fn operational_degenerate_cases() {
        let profile = OperationalProfile {
            tdp_watts: 10.0,
            lifetime_years: 2.0,
            utilization: Distribution::Point(1.0),
            ci_use: Distribution::Point(400.0),
        };
        let out = operational_distribution(&profile, &McConfig::with(16, 0)).unwrap();
        let expected = 10.0 * 2.0 * HOURS_PER_YEAR * 400.0 / 1e6;
        assert!(out
            .samples
            .values
            .iter()
            .all(|v| ((v - expected) / expected).abs() < 1e-14));

        let idle = OperationalProfile {
            utilization: Distribution::Point(0.0),
            ..profile.clone()
        };
        let out = operational_distribution(&idle, &McConfig::with(16, 0)).unwrap();
        assert!(out.samples.values.iter().all(|v| *v == 0.0));

        let bad = OperationalProfile {
            tdp_watts: 0.0,
            ..profile
        };
        assert!(matches!(
            operational_distribution(&bad, &McConfig::with(16, 0)).unwrap_err(),
            CarbonError::InvalidProfile(_)
        ));
    }

    #[test]
    fn alpha_symmetry_and_errors() {
        let e = SampleSet::new(vec![2.0, 3.0, 5.0], 0, "e").unwrap();
        let (total, alpha) = total_and_alpha(&e, &e).unwrap();
        assert_eq!(total.values, vec![4.0, 6.0, 10.0]);
        assert!(alpha.values.iter().all(|a| *a == 0.5));

        let short = SampleSet::new(vec![1.0], 0, "o").unwrap();
        assert!(matches!(
            total_and_alpha(&e, &short).unwrap_err(),
            CarbonError::LengthMismatch { .. }
        ));
        let zeros = SampleSet::new(vec![0.0; 3], 0, "z").unwrap();
        assert_eq!(
            total_and_alpha(&zeros, &zeros).unwrap_err(),
            CarbonError::ZeroTotalSample(0)
        );
    }

    #[test]
    fn alpha_decreases_as_operational_grows() {
        let e = SampleSet::new(vec![3.0; 5], 0, "e").unwrap();
        let o = SampleSet::new(vec![0.1, 1.0, 10.0, 100.0, 1e6], 0, "o").unwrap();
        let (_, alpha) = total_and_alpha(&e, &o).unwrap();
        assert!(alpha.values.windows(2).all(|w| w[1] < w[0]));
        assert!(alpha.values.iter().all(|a| *a > 0.0 && *a < 1.0));
    }

    #[test]
    fn diagnose_degenerate_inputs() {
        let src = source(point_inputs("n", 0.05));
        let d = DesignSpec::monolithic("d", "n", 3.0, 2020);
        let r = diagnose_sources(&d, &src, &McConfig::with(100, 2)).unwrap();
        let first = &r.conditionals[0].outcome.samples.values;
        for c in &r.conditionals {
            assert_eq!(&c.outcome.samples.values, first);
            assert_eq!(c.outcome.summary.variance, 0.0);
        }
    }

    #[test]
    fn diagnose_freezes_other_sources() {
        let mut inputs = point_inputs("n", 0.05);
        inputs.epa = spread(1.2, 0.4);
        let src = source(inputs);
        let d = DesignSpec::monolithic("d", "n", 3.0, 2020);
        let r = diagnose_sources(&d, &src, &McConfig::with(5_000, 2)).unwrap();
        assert_eq!(r.ranking[0], UncertaintySource::Epa);
        for s in [
            UncertaintySource::Gpa,
            UncertaintySource::Yield,
            UncertaintySource::Ci,
        ] {
            assert_eq!(r.conditional(s).summary.variance, 0.0);
        }
        assert_eq!(
            r.conditional(UncertaintySource::Epa).samples.values,
            r.full.samples.values
        );
    }
}
