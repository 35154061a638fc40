// SPDX-License-Identifier: Apache-2.0

//! Uncertainty propagation.
//!
//! [`propagate_mc`] evaluates an expression tree over joint Monte Carlo
//! trials. Each input name is sampled once per trial, so an expression that
//! mentions the same name twice sees the same draw both times; that is how
//! correlated quantities (one fab's conditions shared by several chiplets)
//! are expressed. [`propagate_grid`] is the independent-inputs outer product
//! on grids and serves as a cross-check.

use std::collections::{BTreeMap, HashMap};
use std::ops;

use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Distribution, GridDistribution, GridSpec};
use super::rng::StreamKey;
use super::sample::{self, SampleSet};
use super::{DistError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Input(String),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Scale(Box<Expr>, f64),
    /// `exp(-(a * b))`, the Poisson yield kernel.
    ExpNegProduct(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn input(name: impl Into<String>) -> Expr {
        Expr::Input(name.into())
    }

    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn scale(self, c: f64) -> Expr {
        Expr::Scale(Box::new(self), c)
    }

    pub fn exp_neg_product(a: Expr, b: Expr) -> Expr {
        Expr::ExpNegProduct(Box::new(a), Box::new(b))
    }

    /// Names referenced anywhere in the tree.
    pub fn inputs(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_inputs(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_inputs<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Input(n) => out.push(n),
            Expr::Const(_) => {}
            Expr::Scale(a, _) => a.collect_inputs(out),
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::ExpNegProduct(a, b) => {
                a.collect_inputs(out);
                b.collect_inputs(out);
            }
        }
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + rhs.scale(-1.0)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::Div(Box::new(self), Box::new(rhs))
    }
}

/// Where an input's draws come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Dist(Distribution),
    Normal { mean: f64, std: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl From<Distribution> for Source {
    fn from(d: Distribution) -> Self {
        Source::Dist(d)
    }
}

impl From<GridDistribution> for Source {
    fn from(g: GridDistribution) -> Self {
        Source::Dist(g.into())
    }
}

impl Source {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = |reason: &str| {
            Err(DistError::InvalidSource {
                name: name.to_string(),
                reason: reason.to_string(),
            })
        };
        match *self {
            Source::Dist(_) => Ok(()),
            Source::Normal { mean, std }
                if !(mean.is_finite() && std.is_finite() && std >= 0.0) =>
            {
                bad("normal needs finite mean and non-negative std")
            }
            Source::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo <= hi) => {
                bad("uniform needs finite lo <= hi")
            }
            _ => Ok(()),
        }
    }

    fn support(&self) -> Interval {
        match *self {
            Source::Dist(ref d) => {
                let (lo, hi) = d.support();
                Interval { lo, hi }
            }
            Source::Normal { mean, std: 0.0 } => Interval { lo: mean, hi: mean },
            Source::Normal { .. } => Interval {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            },
            Source::Uniform { lo, hi } => Interval { lo, hi },
        }
    }

    fn draw(&self, n: usize, key: &StreamKey) -> Vec<f64> {
        match *self {
            Source::Dist(ref d) => sample::draw(d, n, key),
            Source::Normal { mean, std } => key.fill(n, |rng| {
                let z: f64 = StandardNormal.sample(rng);
                mean + std * z
            }),
            Source::Uniform { lo, hi } => {
                key.fill(n, |rng| lo + (hi - lo) * rand::Rng::random::<f64>(rng))
            }
        }
    }
}

/// Expression tree plus the sources bound to its input names.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationExpr {
    pub root: Expr,
    pub inputs: BTreeMap<String, Source>,
}

impl PropagationExpr {
    pub fn new(root: Expr) -> Self {
        PropagationExpr {
            root,
            inputs: BTreeMap::new(),
        }
    }

    pub fn bind(mut self, name: impl Into<String>, source: impl Into<Source>) -> Self {
        self.inputs.insert(name.into(), source.into());
        self
    }

    /// Checks bindings and that every divisor is strictly positive over
    /// the support of its inputs.
    pub fn validate(&self) -> Result<()> {
        for name in self.root.inputs() {
            let src = self
                .inputs
                .get(name)
                .ok_or_else(|| DistError::UnboundInput(name.to_string()))?;
            src.validate(name)?;
        }
        self.support(&self.root).map(|_| ())
    }

    fn support(&self, e: &Expr) -> Result<Interval> {
        Ok(match e {
            Expr::Input(n) => self.inputs[n].support(),
            Expr::Const(c) => Interval { lo: *c, hi: *c },
            Expr::Add(a, b) => self.support(a)?.add(self.support(b)?),
            Expr::Mul(a, b) => self.support(a)?.mul(self.support(b)?),
            Expr::Scale(a, c) => self.support(a)?.mul(Interval { lo: *c, hi: *c }),
            Expr::Div(a, b) => {
                let den = self.support(b)?;
                if !(den.lo > 0.0) {
                    return Err(DistError::DivisionSupportIncludesZero {
                        lo: den.lo,
                        hi: den.hi,
                    });
                }
                self.support(a)?.mul(Interval {
                    lo: 1.0 / den.hi,
                    hi: 1.0 / den.lo,
                })
            }
            Expr::ExpNegProduct(a, b) => {
                let p = self.support(a)?.mul(self.support(b)?);
                Interval {
                    lo: (-p.hi).exp(),
                    hi: (-p.lo).exp(),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    fn add(self, o: Interval) -> Interval {
        Interval {
            lo: self.lo + o.lo,
            hi: self.hi + o.hi,
        }
    }

    fn mul(self, o: Interval) -> Interval {
        // 0 * inf contributes 0: a zero endpoint pins that corner
        let p = |a: f64, b: f64| if a == 0.0 || b == 0.0 { 0.0 } else { a * b };
        let c = [
            p(self.lo, o.lo),
            p(self.lo, o.hi),
            p(self.hi, o.lo),
            p(self.hi, o.hi),
        ];
        Interval {
            lo: c.iter().copied().fold(f64::INFINITY, f64::min),
            hi: c.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Evaluates `expr` over `n` joint trials.
///
/// Input `name` draws from the stream keyed by `(seed, name)`, so binding an
/// extra unrelated input leaves the existing inputs' draws untouched.
pub fn propagate_mc(expr: &PropagationExpr, n: usize, seed: u64) -> Result<SampleSet> {
    if n == 0 {
        return Err(DistError::ZeroSamples);
    }
    expr.validate()?;
    let draws: HashMap<&str, Vec<f64>> = expr
        .root
        .inputs()
        .into_iter()
        .map(|name| {
            let key = StreamKey::derive(seed, name);
            (name, expr.inputs[name].draw(n, &key))
        })
        .collect();
    let values = eval(&expr.root, &draws, n);
    SampleSet::new(values, seed, "propagate_mc")
}

fn eval(e: &Expr, draws: &HashMap<&str, Vec<f64>>, n: usize) -> Vec<f64> {
    let zip = |a: Vec<f64>, b: Vec<f64>, f: fn(f64, f64) -> f64| -> Vec<f64> {
        a.par_iter()
            .zip(b.par_iter())
            .map(|(x, y)| f(*x, *y))
            .collect()
    };
    match e {
        Expr::Input(name) => draws[name.as_str()].clone(),
        Expr::Const(c) => vec![*c; n],
        Expr::Add(a, b) => zip(eval(a, draws, n), eval(b, draws, n), |x, y| x + y),
        Expr::Mul(a, b) => zip(eval(a, draws, n), eval(b, draws, n), |x, y| x * y),
        Expr::Div(a, b) => zip(eval(a, draws, n), eval(b, draws, n), |x, y| x / y),
        Expr::Scale(a, c) => {
            let c = *c;
            eval(a, draws, n).into_par_iter().map(|x| c * x).collect()
        }
        Expr::ExpNegProduct(a, b) => zip(eval(a, draws, n), eval(b, draws, n), |x, y| {
            (-(x * y)).exp()
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridOp {
    Add,
    Multiply,
    Divide,
}

impl GridOp {
    fn apply(self, x: f64, y: f64) -> f64 {
        match self {
            GridOp::Add => x + y,
            GridOp::Multiply => x * y,
            GridOp::Divide => x / y,
        }
    }
}

/// Outer-product combination of two independent distributions: the mass of
/// every node pair is deposited at `op(x_i, y_j)` by linear binning on the
/// output grid. Without `out_grid`, the grid spans the exact image of the two
/// supports with as many points as the finer input.
pub fn propagate_grid(
    op: GridOp,
    a: &Distribution,
    b: &Distribution,
    out_grid: Option<GridSpec>,
) -> Result<Distribution> {
    if op == GridOp::Divide {
        let (lo, hi) = b.support();
        if !(lo > 0.0) {
            return Err(DistError::DivisorSupportNonPositive { lo, hi });
        }
    }
    let atoms_a = atoms(a);
    let atoms_b = atoms(b);
    if let (Distribution::Point(x), Distribution::Point(y)) = (a, b) {
        return Ok(Distribution::Point(op.apply(*x, *y)));
    }

    let spec = match out_grid {
        Some(spec) => {
            spec.validate()?;
            spec
        }
        None => {
            let (alo, ahi) = a.support();
            let (blo, bhi) = b.support();
            let corners = [
                op.apply(alo, blo),
                op.apply(alo, bhi),
                op.apply(ahi, blo),
                op.apply(ahi, bhi),
            ];
            let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) {
                return Ok(Distribution::Point(0.5 * (lo + hi)));
            }
            let n = a
                .as_grid()
                .map_or(2, |g| g.n_points())
                .max(b.as_grid().map_or(2, |g| g.n_points()));
            GridSpec::new(lo, hi, n)?
        }
    };

    let step = spec.step();
    let last = spec.n_points - 1;
    let slack = 1e-9 * (spec.x_max - spec.x_min);
    let mut mass = vec![0.0; spec.n_points];
    for &(x, wa) in &atoms_a {
        for &(y, wb) in &atoms_b {
            let z = op.apply(x, y);
            if z < spec.x_min - slack || z > spec.x_max + slack {
                return Err(DistError::OutGridTooNarrow {
                    x_min: spec.x_min,
                    x_max: spec.x_max,
                    value: z,
                });
            }
            let t = ((z - spec.x_min) / step).clamp(0.0, last as f64);
            let i = (t.floor() as usize).min(last - 1);
            let frac = t - i as f64;
            let w = wa * wb;
            mass[i] += w * (1.0 - frac);
            mass[i + 1] += w * frac;
        }
    }
    let density: Vec<f64> = mass
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let width = if i == 0 || i == last {
                0.5 * step
            } else {
                step
            };
            m / width
        })
        .collect();
    Ok(GridDistribution::from_spec(spec, density)?.into())
}

fn atoms(d: &Distribution) -> Vec<(f64, f64)> {
    match d {
        Distribution::Point(v) => vec![(*v, 1.0)],
        Distribution::Grid(g) => g
            .xs()
            .into_iter()
            .zip(g.node_masses())
            .filter(|(_, m)| *m > 0.0)
            .collect(),
    }
}
