// SPDX-License-Identifier: Apache-2.0

//! Scenario runner behind the `embodied` command.

pub mod scenario;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use embodied::carbon::{
    self, BundleModel, CarbonError, DesignSpec, McConfig, ModelOptions, NodeSource,
    OperationalProfile, Outcome, FIXED_ALPHA_REGIMES,
};
use embodied::distcore::{smooth_samples, Bounds, Distribution, SampleSet};
use embodied::ingest::{load_bundle, DatasetBundle, IngestError};
use embodied::params::{build_ci_distribution, build_utilization_distribution, FitOptions};
use embodied::provision::{
    provision, scale_accelerator_area, Candidate, ProvisionError, ProvisionPolicy,
};

use scenario::{Analysis, CiUse, Scenario, ScenarioError};

pub const DEFAULT_QUANTILES: [f64; 2] = [0.5, 0.95];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum GridFormat {
    #[default]
    Csv,
    Json,
}

impl GridFormat {
    fn extension(self) -> &'static str {
        match self {
            GridFormat::Csv => "dist.csv",
            GridFormat::Json => "dist.json",
        }
    }

    fn name(self) -> &'static str {
        match self {
            GridFormat::Csv => "csv",
            GridFormat::Json => "json",
        }
    }
}

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub grid: Option<usize>,
    pub out: Option<PathBuf>,
    pub quantiles: Option<Vec<f64>>,
    pub format: GridFormat,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Bundle {
        path: PathBuf,
        source: Box<IngestError>,
    },
    #[error("{path}: {message}")]
    Numeric { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Infeasible { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scenario(_) => 2,
            RunError::Bundle { .. } => 3,
            RunError::Numeric { .. } | RunError::Infeasible { .. } => 4,
            RunError::Io { .. } => 1,
        }
    }
}

/// What a run wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
}

/// Output file name fragment for a target.
pub fn file_stem(target: &str) -> String {
    target
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn load_validated_bundle(root: &Path) -> Result<DatasetBundle, RunError> {
    load_bundle(root).map_err(|source| RunError::Bundle {
        path: root.into(),
        source: Box::new(source),
    })
}

struct Writer {
    dir: PathBuf,
    format: GridFormat,
    grid: usize,
    files: Vec<String>,
}

impl Writer {
    fn text(&mut self, name: &str, body: &str) -> Result<(), RunError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|source| RunError::Io { path, source })?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn dist(&mut self, target: &str, d: &Distribution) -> Result<(), RunError> {
        let body = match self.format {
            GridFormat::Csv => d.to_csv(),
            GridFormat::Json => d.to_json(),
        };
        let name = format!("{}.{}", file_stem(target), self.format.extension());
        self.text(&name, &body)
    }
}

struct Ctx<'a> {
    path: &'a Path,
    scenario: &'a Scenario,
    bundle: &'a DatasetBundle,
    mc: McConfig,
}

impl Ctx<'_> {
    fn numeric(&self, e: impl std::fmt::Display) -> RunError {
        RunError::Numeric {
            path: self.path.into(),
            message: e.to_string(),
        }
    }

    fn carbon(&self, e: CarbonError) -> RunError {
        match e {
            CarbonError::Ingest(source) => RunError::Bundle {
                path: self.scenario.dataset.clone(),
                source: Box::new(source),
            },
            other => self.numeric(other),
        }
    }

    fn grid_of(&self, o: &Outcome) -> Result<Distribution, RunError> {
        o.grid(self.mc.grid_points).map_err(|e| self.carbon(e))
    }
}

fn summary_value(o: &Outcome) -> Value {
    let mut v = serde_json::to_value(&o.summary).expect("summary serializes");
    v["skewness"] = json!(finite(o.samples.skewness()));
    v
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serializes");
    s.push('\n');
    s
}

fn merged_quantiles(extra: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = DEFAULT_QUANTILES.iter().chain(extra).copied().collect();
    q.sort_by(f64::total_cmp);
    q.dedup();
    q
}

/// Runs one scenario file and writes its artifacts.
pub fn run(scenario_path: &Path, overrides: &Overrides) -> Result<RunArtifacts, RunError> {
    let mut scenario = Scenario::load(scenario_path)?;
    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    }
    if let Some(n) = overrides.samples {
        scenario.samples = n;
    }
    if let Some(g) = overrides.grid {
        scenario.grid = g;
    }
    if let Some(q) = &overrides.quantiles {
        scenario.quantiles = Some(q.clone());
    }
    let quantiles = merged_quantiles(scenario.quantiles.as_deref().unwrap_or(&[]));
    if let Some(q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(ScenarioError::Invalid {
            path: scenario_path.into(),
            message: format!("quantile {q} is outside [0, 1]"),
        }
        .into());
    }

    let bundle = load_validated_bundle(&scenario.dataset)?;
    scenario.check(scenario_path, &bundle)?;

    let out_dir = match (&overrides.out, &scenario.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_relative() => {
            scenario_path.parent().unwrap_or(Path::new(".")).join(o)
        }
        (None, Some(o)) => o.clone(),
        (None, None) => {
            let stem = scenario_path
                .file_stem()
                .map_or("scenario".into(), |s| s.to_string_lossy().into_owned());
            PathBuf::from("out").join(stem)
        }
    };
    fs::create_dir_all(&out_dir).map_err(|source| RunError::Io {
        path: out_dir.clone(),
        source,
    })?;

    let mut thresholds = scenario.thresholds.clone();
    if let (Analysis::Provision, Some(p)) = (scenario.analysis, &scenario.provision) {
        thresholds.push(p.budget_kgco2);
    }
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let mc = McConfig {
        samples: scenario.samples,
        seed: scenario.seed,
        quantiles: quantiles.clone(),
        thresholds,
        grid_points: scenario.grid,
    };
    let ctx = Ctx {
        path: scenario_path,
        scenario: &scenario,
        bundle: &bundle,
        mc,
    };
    let mut writer = Writer {
        dir: out_dir.clone(),
        format: overrides.format,
        grid: scenario.grid,
        files: Vec::new(),
    };
    let options = ModelOptions {
        d0_trailing_years: scenario.model.d0_trailing_years,
        ..ModelOptions::with_grid_points(scenario.grid)
    };
    let model = BundleModel::new(&bundle, options);

    let outcome = match scenario.analysis {
        Analysis::Cpa => run_cpa(&ctx, &model, &mut writer),
        Analysis::Embodied => run_embodied(&ctx, &model, &mut writer),
        Analysis::Diagnose => run_diagnose(&ctx, &model, &mut writer),
        Analysis::Total | Analysis::Alpha => run_operational(&ctx, &model, &mut writer),
        Analysis::Provision => run_provision(&ctx, &model, &mut writer),
    };
    let (summary, deferred) = match outcome {
        Ok(s) => (s, None),
        Err(Partial {
            summary: Some(s),
            error,
        }) => (s, Some(error)),
        Err(Partial {
            summary: None,
            error,
        }) => return Err(error),
    };
    writer.text("summary.json", &pretty(&summary))?;

    let mut outputs = writer.files.clone();
    outputs.push("run.json".into());
    outputs.sort();
    let run_record = json!({
        "tool": "embodied",
        "tool_version": env!("CARGO_PKG_VERSION"),
        "scenario": scenario_path.file_name().map(|s| s.to_string_lossy().into_owned()),
        "analysis": scenario.analysis.name(),
        "seed": scenario.seed,
        "samples": scenario.samples,
        "grid_points": writer.grid,
        "quantiles": quantiles,
        "thresholds": ctx.mc.thresholds,
        "draws": match scenario.model.draws {
            scenario::Draws::Shared => "shared",
            scenario::Draws::Independent => "independent",
        },
        "d0_trailing_years": scenario.model.d0_trailing_years,
        "grid_format": overrides.format.name(),
        "bundle_version": bundle.version,
        "outputs": outputs,
    });
    writer.text("run.json", &pretty(&run_record))?;

    if let Some(e) = deferred {
        return Err(e);
    }
    let mut files = writer.files;
    files.sort();
    Ok(RunArtifacts { out_dir, files })
}

/// An error that may still leave a summary worth writing.
struct Partial {
    summary: Option<Value>,
    error: RunError,
}

impl From<RunError> for Partial {
    fn from(error: RunError) -> Self {
        Partial {
            summary: None,
            error,
        }
    }
}

type Step = Result<Value, Partial>;

fn header(ctx: &Ctx, unit: &str) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("analysis".into(), json!(ctx.scenario.analysis.name()));
    m.insert("unit".into(), json!(unit));
    m
}

fn run_cpa(ctx: &Ctx, model: &BundleModel, w: &mut Writer) -> Step {
    let cpa = ctx.scenario.cpa.as_ref().expect("checked");
    let mut targets = Map::new();
    for node in &cpa.nodes {
        let out =
            carbon::cpa_distribution(model, node, cpa.reference_area_cm2, cpa.as_of_year, &ctx.mc)
                .map_err(|e| ctx.carbon(e))?;
        let inputs = model
            .inputs(node, cpa.as_of_year)
            .map_err(|e| ctx.carbon(e))?;
        let target = format!("cpa_{node}");
        w.dist(&target, &ctx.grid_of(&out)?)?;
        let mut v = summary_value(&out);
        v["deterministic_point"] = json!(inputs.deterministic_cpa(cpa.reference_area_cm2));
        targets.insert(target, v);
    }
    let mut m = header(ctx, "kgCO2e/cm2");
    m.insert("as_of_year".into(), json!(cpa.as_of_year));
    m.insert("reference_area_cm2".into(), json!(cpa.reference_area_cm2));
    m.insert("targets".into(), Value::Object(targets));
    Ok(Value::Object(m))
}

fn run_embodied(ctx: &Ctx, model: &BundleModel, w: &mut Writer) -> Step {
    let mut targets = Map::new();
    for d in &ctx.scenario.designs {
        let spec = d.to_spec();
        let out = carbon::embodied_distribution_with(
            &spec,
            model,
            &ctx.mc,
            ctx.scenario.model.draws.into(),
        )
        .map_err(|e| ctx.carbon(e))?;
        w.dist(&d.name, &ctx.grid_of(&out)?)?;
        let mut v = summary_value(&out);
        v["total_area_cm2"] = json!(spec.total_area());
        targets.insert(d.name.clone(), v);
    }
    let mut m = header(ctx, "kgCO2e");
    m.insert("targets".into(), Value::Object(targets));
    Ok(Value::Object(m))
}

fn run_diagnose(ctx: &Ctx, model: &BundleModel, w: &mut Writer) -> Step {
    let mut targets = Map::new();
    let mut designs = Map::new();
    for d in &ctx.scenario.designs {
        let spec = d.to_spec();
        let report = carbon::diagnose_sources(&spec, model, &ctx.mc).map_err(|e| ctx.carbon(e))?;
        let full = format!("{}.full", d.name);
        w.dist(&full, &ctx.grid_of(&report.full)?)?;
        targets.insert(full, summary_value(&report.full));
        for c in &report.conditionals {
            let target = format!("{}.{}", d.name, c.source.label());
            w.dist(&target, &ctx.grid_of(&c.outcome)?)?;
            targets.insert(target, summary_value(&c.outcome));
        }
        designs.insert(
            d.name.clone(),
            json!({
                "ranking": report.ranking.iter().map(|s| s.label()).collect::<Vec<_>>(),
                "full_variance": report.full.summary.variance,
                "conditional_variance_sum": report.conditional_variance_sum,
                "note": "conditional variances need not add up to the full variance because CI and EPA enter as a product",
            }),
        );
    }
    let mut m = header(ctx, "kgCO2e");
    m.insert("designs".into(), Value::Object(designs));
    m.insert("targets".into(), Value::Object(targets));
    Ok(Value::Object(m))
}

fn run_operational(ctx: &Ctx, model: &BundleModel, w: &mut Writer) -> Step {
    let fit = FitOptions {
        grid_points: ctx.mc.grid_points,
        ..FitOptions::default()
    };
    let mut targets = Map::new();
    let mut profiles = Map::new();
    for p in &ctx.scenario.profiles {
        let design = ctx.scenario.design(&p.design).expect("checked").to_spec();
        let utilization = build_utilization_distribution(
            ctx.bundle
                .utilization(&p.utilization)
                .map_err(|e| ctx.carbon(e.into()))?,
            None,
            &fit,
        )
        .map_err(|e| ctx.numeric(e))?;
        let ci_use = match &p.ci_use {
            CiUse::Region(r) => build_ci_distribution(
                &[ctx.bundle.ci_history(r).map_err(|e| ctx.carbon(e.into()))?],
                &[1.0],
                &fit,
            )
            .map_err(|e| ctx.numeric(e))?,
            CiUse::Constant { g_per_kwh } => Distribution::Point(*g_per_kwh),
        };
        let profile = OperationalProfile {
            tdp_watts: p.tdp_watts,
            lifetime_years: p.lifetime_years,
            utilization,
            ci_use,
        };
        let embodied = carbon::embodied_distribution_with(
            &design,
            model,
            &ctx.mc,
            ctx.scenario.model.draws.into(),
        )
        .map_err(|e| ctx.carbon(e))?;
        let operational =
            carbon::operational_distribution(&profile, &ctx.mc).map_err(|e| ctx.carbon(e))?;
        let (total, alpha) = carbon::total_and_alpha(&embodied.samples, &operational.samples)
            .map_err(|e| ctx.carbon(e))?;
        let ratio = operational.summary.percentile(0.95).unwrap_or(f64::NAN)
            / embodied.summary.percentile(0.95).unwrap_or(f64::NAN);
        profiles.insert(
            p.name.clone(),
            json!({ "operational_to_embodied_p95": finite(ratio) }),
        );
        let summarize = |s: SampleSet| -> Result<Outcome, RunError> {
            let summary = embodied::distcore::summarize(&s, &ctx.mc.quantiles, &ctx.mc.thresholds)
                .map_err(|e| ctx.numeric(e))?;
            Ok(Outcome {
                samples: s,
                summary,
            })
        };
        if ctx.scenario.analysis == Analysis::Total {
            let total = summarize(total)?;
            for (suffix, o) in [
                ("embodied", &embodied),
                ("operational", &operational),
                ("total", &total),
            ] {
                let target = format!("{}.{suffix}", p.name);
                w.dist(&target, &ctx.grid_of(o)?)?;
                targets.insert(target, summary_value(o));
            }
        } else {
            let alpha = summarize(alpha)?;
            let target = format!("{}.alpha", p.name);
            let grid = smooth_samples(&alpha.samples.values, ctx.mc.grid_points, Bounds::UNIT)
                .map_err(|e| ctx.numeric(e))?;
            w.dist(&target, &grid)?;
            targets.insert(target, summary_value(&alpha));
        }
    }
    let unit = match ctx.scenario.analysis {
        Analysis::Total => "kgCO2e",
        _ => "fraction",
    };
    let mut m = header(ctx, unit);
    if ctx.scenario.analysis == Analysis::Alpha {
        m.insert("fixed_regimes".into(), json!(FIXED_ALPHA_REGIMES));
    }
    m.insert("profiles".into(), Value::Object(profiles));
    m.insert("targets".into(), Value::Object(targets));
    Ok(Value::Object(m))
}

fn run_provision(ctx: &Ctx, model: &BundleModel, w: &mut Writer) -> Step {
    let p = ctx.scenario.provision.as_ref().expect("checked");
    let policy = ProvisionPolicy {
        budget_kgco2: p.budget_kgco2,
        risk: p.risk,
        estimator: p.estimator,
        worst_case_quantile: p.worst_case_quantile,
    };
    let prov_err = |e: ProvisionError| match e {
        ProvisionError::Carbon(c) => ctx.carbon(c),
        ProvisionError::InvalidPolicy(_) | ProvisionError::DuplicateLabel(_) => {
            RunError::Scenario(ScenarioError::Invalid {
                path: ctx.path.into(),
                message: e.to_string(),
            })
        }
        other => ctx.numeric(other),
    };
    let mut candidates = Vec::with_capacity(p.candidates.len());
    for c in &p.candidates {
        let design = match (&c.design, c.side) {
            (Some(d), _) => ctx.scenario.design(d).expect("checked").to_spec(),
            (None, Some(side)) => {
                let a = p.area.as_ref().expect("checked");
                let area = scale_accelerator_area(
                    side,
                    a.base_side,
                    a.base_systolic_cm2,
                    a.base_buffer_cm2,
                )
                .map_err(prov_err)?
                    + a.fixed_cm2;
                DesignSpec::monolithic(
                    &c.label,
                    c.node.as_deref().expect("checked"),
                    area,
                    c.as_of_year.expect("checked"),
                )
            }
            (None, None) => unreachable!("checked"),
        };
        candidates.push(Candidate {
            label: c.label.clone(),
            design,
            performance: c.performance,
            power_watts: c.power_watts,
        });
    }
    let (report, samples) = provision(&candidates, model, &policy, &ctx.mc).map_err(prov_err)?;
    let mut targets = Map::new();
    for s in samples {
        let summary = embodied::distcore::summarize(&s, &ctx.mc.quantiles, &ctx.mc.thresholds)
            .map_err(|e| ctx.numeric(e))?;
        let out = Outcome {
            samples: s,
            summary,
        };
        w.dist(&out.samples.label, &ctx.grid_of(&out)?)?;
        targets.insert(out.samples.label.clone(), summary_value(&out));
    }
    w.text("report.json", &pretty(&report))?;
    w.text("report.csv", &report.to_csv())?;
    let mut m = header(ctx, "kgCO2e");
    m.insert("selected".into(), json!(report.selected));
    m.insert("targets".into(), Value::Object(targets));
    let summary = Value::Object(m);
    match report.require_selection() {
        Ok(_) => Ok(summary),
        Err(e) => Err(Partial {
            summary: Some(summary),
            error: RunError::Infeasible {
                path: ctx.path.into(),
                message: e.to_string(),
            },
        }),
    }
}
