// SPDX-License-Identifier: Apache-2.0

//! Risk-constrained provisioning under an embodied-carbon budget.
//!
//! A candidate is feasible when `P(E > budget) <= risk`. Among feasible
//! candidates the highest-performance one wins; ties go to the lower
//! exceedance probability, then the lower mean, then the label. The report
//! also records what a mean-based and a worst-case-based rule would pick.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carbon::{embodied_distribution, CarbonError, DesignSpec, McConfig, NodeSource};
use crate::distcore::summary::sorted_quantile;
use crate::distcore::SampleSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProvisionError {
    #[error("side length must be at least 1 (side {side}, base {base_side})")]
    NonPositiveSide { side: u32, base_side: u32 },
    #[error("base areas must be non-negative")]
    NegativeBaseArea,
    #[error("no candidates")]
    NoCandidates,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("candidate `{label}` has negative performance {performance}")]
    NegativePerformance { label: String, performance: f64 },
    #[error("duplicate candidate label `{0}`")]
    DuplicateLabel(String),
    #[error("no candidate keeps P(E > {budget}) within {risk}")]
    NoFeasibleCandidate { budget: f64, risk: f64 },
    #[error(transparent)]
    Carbon(#[from] CarbonError),
}

pub type Result<T, E = ProvisionError> = std::result::Result<T, E>;

/// Accelerator area with the systolic array scaled quadratically and the
/// buffers linearly in the array side length.
pub fn scale_accelerator_area(
    side: u32,
    base_side: u32,
    base_systolic_cm2: f64,
    base_buffer_cm2: f64,
) -> Result<f64> {
    if side == 0 || base_side == 0 {
        return Err(ProvisionError::NonPositiveSide { side, base_side });
    }
    if base_systolic_cm2 < 0.0 || base_buffer_cm2 < 0.0 {
        return Err(ProvisionError::NegativeBaseArea);
    }
    let r = side as f64 / base_side as f64;
    Ok(base_systolic_cm2 * r * r + base_buffer_cm2 * r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub design: DesignSpec,
    /// Normalized performance, supplied externally.
    pub performance: f64,
    pub power_watts: Option<f64>,
}

/// Point estimate used for the report's `estimate_kgco2` column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Percentile(f64),
    Mean,
    WorstCase(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProvisionPolicy {
    pub budget_kgco2: f64,
    /// Largest tolerated exceedance probability.
    pub risk: f64,
    pub estimator: Estimator,
    /// Quantile the worst-case strawman compares against the budget.
    pub worst_case_quantile: f64,
}

impl ProvisionPolicy {
    pub fn new(budget_kgco2: f64, risk: f64) -> Self {
        ProvisionPolicy {
            budget_kgco2,
            risk,
            estimator: Estimator::Percentile(0.95),
            worst_case_quantile: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.budget_kgco2 > 0.0 && self.budget_kgco2.is_finite()) {
            return Err(ProvisionError::InvalidPolicy(format!(
                "budget {} must be positive",
                self.budget_kgco2
            )));
        }
        if !(self.risk > 0.0 && self.risk < 1.0) {
            return Err(ProvisionError::InvalidPolicy(format!(
                "risk {} must be in (0, 1)",
                self.risk
            )));
        }
        let q_ok = |q: f64| (0.0..=1.0).contains(&q);
        let est_ok = match self.estimator {
            Estimator::Percentile(q) | Estimator::WorstCase(q) => q_ok(q),
            Estimator::Mean => true,
        };
        if !est_ok || !q_ok(self.worst_case_quantile) {
            return Err(ProvisionError::InvalidPolicy(
                "quantiles must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// A candidate reduced to the statistics selection needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEval {
    pub label: String,
    pub performance: f64,
    pub power_watts: Option<f64>,
    pub area_cm2: f64,
    pub mean: f64,
    pub variance: f64,
    pub p95: f64,
    pub worst_case: f64,
    pub estimate_kgco2: f64,
    pub p_exceed: f64,
    /// Wilson 95% interval for `p_exceed`.
    pub p_exceed_ci: (f64, f64),
    pub feasible: bool,
}

impl CandidateEval {
    pub fn from_samples(
        label: &str,
        performance: f64,
        power_watts: Option<f64>,
        area_cm2: f64,
        samples: &SampleSet,
        policy: &ProvisionPolicy,
    ) -> Self {
        let sorted = samples.sorted();
        let n = sorted.len();
        let above = n - sorted.partition_point(|v| *v <= policy.budget_kgco2);
        let p_exceed = above as f64 / n as f64;
        let mean = samples.mean();
        let estimate_kgco2 = match policy.estimator {
            Estimator::Percentile(q) | Estimator::WorstCase(q) => sorted_quantile(&sorted, q),
            Estimator::Mean => mean,
        };
        CandidateEval {
            label: label.to_string(),
            performance,
            power_watts,
            area_cm2,
            mean,
            variance: samples.variance(),
            p95: sorted_quantile(&sorted, 0.95),
            worst_case: sorted_quantile(&sorted, policy.worst_case_quantile),
            estimate_kgco2,
            p_exceed,
            p_exceed_ci: wilson_interval(above, n),
            feasible: p_exceed <= policy.risk,
        }
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    let z = 1.959_963_984_540_054;
    if successes == 0 || successes == n {
        let n = n as f64;
        let edge = z * z / (n + z * z);
        return if successes == 0 {
            (0.0, edge)
        } else {
            (1.0 - edge, 1.0)
        };
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// What one selection rule picked and how it compares to the risk-aware pick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrawmanChoice {
    pub rule: String,
    pub selected: Option<String>,
    pub p_exceed: Option<f64>,
    /// `risk-aware performance / strawman performance - 1`.
    pub risk_aware_performance_gain: Option<f64>,
    /// `strawman p_exceed - risk-aware p_exceed`.
    pub extra_exceed_probability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionReport {
    pub policy: ProvisionPolicy,
    /// Sorted by label.
    pub candidates: Vec<CandidateEval>,
    pub selected: Option<String>,
    pub mean_based: StrawmanChoice,
    pub worst_case: StrawmanChoice,
}

impl ProvisionReport {
    pub fn candidate(&self, label: &str) -> Option<&CandidateEval> {
        self.candidates.iter().find(|c| c.label == label)
    }

    pub fn selected_candidate(&self) -> Option<&CandidateEval> {
        self.selected.as_deref().and_then(|l| self.candidate(l))
    }

    /// The selection, or [`ProvisionError::NoFeasibleCandidate`].
    pub fn require_selection(&self) -> Result<&CandidateEval> {
        self.selected_candidate()
            .ok_or(ProvisionError::NoFeasibleCandidate {
                budget: self.policy.budget_kgco2,
                risk: self.policy.risk,
            })
    }

    /// One row per candidate.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "label,performance,area_cm2,mean_kgco2,p95_kgco2,variance,estimate_kgco2,p_exceed,p_exceed_lo,p_exceed_hi,feasible,selected\n",
        );
        for c in &self.candidates {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                c.label,
                c.performance,
                c.area_cm2,
                c.mean,
                c.p95,
                c.variance,
                c.estimate_kgco2,
                c.p_exceed,
                c.p_exceed_ci.0,
                c.p_exceed_ci.1,
                c.feasible,
                self.selected.as_deref() == Some(c.label.as_str()),
            );
        }
        out
    }
}

fn argmax_performance(
    evals: &[CandidateEval],
    admissible: impl Fn(&CandidateEval) -> bool,
) -> Option<&CandidateEval> {
    evals.iter().filter(|c| admissible(c)).min_by(|a, b| {
        b.performance
            .total_cmp(&a.performance)
            .then(a.p_exceed.total_cmp(&b.p_exceed))
            .then(a.mean.total_cmp(&b.mean))
            .then(a.label.cmp(&b.label))
    })
}

/// Pure selection over evaluated candidates.
pub fn select(evals: Vec<CandidateEval>, policy: &ProvisionPolicy) -> Result<ProvisionReport> {
    policy.validate()?;
    if evals.is_empty() {
        return Err(ProvisionError::NoCandidates);
    }
    let mut evals = evals;
    evals.sort_by(|a, b| a.label.cmp(&b.label));
    for w in evals.windows(2) {
        if w[0].label == w[1].label {
            return Err(ProvisionError::DuplicateLabel(w[0].label.clone()));
        }
    }
    for c in evals.iter_mut() {
        if !(c.performance >= 0.0) {
            return Err(ProvisionError::NegativePerformance {
                label: c.label.clone(),
                performance: c.performance,
            });
        }
        c.feasible = c.p_exceed <= policy.risk;
    }
    let chosen = argmax_performance(&evals, |c| c.feasible).cloned();
    let budget = policy.budget_kgco2;
    let strawman = |rule: &str, pick: Option<&CandidateEval>| StrawmanChoice {
        rule: rule.to_string(),
        selected: pick.map(|c| c.label.clone()),
        p_exceed: pick.map(|c| c.p_exceed),
        risk_aware_performance_gain: match (&chosen, pick) {
            (Some(r), Some(s)) if s.performance > 0.0 => Some(r.performance / s.performance - 1.0),
            _ => None,
        },
        extra_exceed_probability: match (&chosen, pick) {
            (Some(r), Some(s)) => Some(s.p_exceed - r.p_exceed),
            _ => None,
        },
    };
    let mean_based = strawman("mean", argmax_performance(&evals, |c| c.mean <= budget));
    let worst_case = strawman(
        "worst_case",
        argmax_performance(&evals, |c| c.worst_case <= budget),
    );
    Ok(ProvisionReport {
        policy: *policy,
        selected: chosen.map(|c| c.label),
        candidates: evals,
        mean_based,
        worst_case,
    })
}

/// Evaluates every candidate's embodied carbon and selects. Each candidate
/// draws with its own seed derived from the scenario seed and its label.
pub fn provision(
    candidates: &[Candidate],
    source: &dyn NodeSource,
    policy: &ProvisionPolicy,
    mc: &McConfig,
) -> Result<(ProvisionReport, Vec<SampleSet>)> {
    policy.validate()?;
    if candidates.is_empty() {
        return Err(ProvisionError::NoCandidates);
    }
    let mut evals = Vec::with_capacity(candidates.len());
    let mut samples = Vec::with_capacity(candidates.len());
    for c in candidates {
        let cmc = McConfig {
            seed: crate::distcore::rng::derive_seed(mc.seed, &c.label),
            ..mc.clone()
        };
        let out = embodied_distribution(&c.design, source, &cmc)?;
        evals.push(CandidateEval::from_samples(
            &c.label,
            c.performance,
            c.power_watts,
            c.design.total_area(),
            &out.samples,
            policy,
        ));
        let mut s = out.samples;
        s.label = c.label.clone();
        samples.push(s);
    }
    samples.sort_by(|a, b| a.label.cmp(&b.label));
    Ok((select(evals, policy)?, samples))
}
