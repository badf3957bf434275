//! Monte Carlo size and power studies over shift alternatives.
//!
//! Replication `r` draws all its data from stream `r` of a generator seeded
//! with the master seed, so results do not depend on the parallel schedule.
//! Within a replication the same base samples are reused for every shift.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{elliptical_rank_test, hotelling_two_sample, pillai_manova, sphericized_center_outward_test, ScatterKind};
use crate::distributions::{shift, stream_rng, ErrorLaw};
use crate::error::{CorankError, Result};
use crate::rank_tests::{manova_test, two_sample_test, GridOptions, TestResult};
use crate::scores::ScoreFunction;
use crate::sphere_grid::Factorization;

/// Replications used by the full-scale studies.
pub const FULL_SCALE_REPLICATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Co,
    CoSphericized,
    Elliptical,
    Hotelling,
    Pillai,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Co => "co",
            Method::CoSphericized => "co-sphericized",
            Method::Elliptical => "elliptical",
            Method::Hotelling => "hotelling",
            Method::Pillai => "pillai",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    TwoSample,
    Manova,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSize {
    #[serde(alias = "n_R")]
    pub n_r: usize,
    #[serde(alias = "n_S")]
    pub n_s: usize,
}

fn default_score() -> String {
    "wilcoxon".into()
}
fn default_replications() -> usize {
    500
}
fn default_alpha() -> f64 {
    0.05
}
fn default_seed() -> u64 {
    crate::rank_tests::DEFAULT_SEED
}
fn default_true() -> bool {
    true
}

/// A study description, typically read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub study: Study,
    /// Error law name, e.g. `gauss`, `t1`, `mix2cauchy`, `skewt1.1`.
    pub law: String,
    /// Group sizes; the last group receives the shift.
    pub sizes: Vec<usize>,
    pub deltas: Vec<f64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_score")]
    pub score: String,
    #[serde(default = "default_replications", alias = "N")]
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub grid: Option<GridSize>,
    #[serde(default = "default_true")]
    pub symmetrize: bool,
    #[serde(default)]
    pub scatter: ScatterKind,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CorankError::InvalidSpec(format!("bad study config: {e}")))
    }

    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CorankError::InvalidSpec(msg));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.sizes.len() < 2 || self.sizes.iter().any(|&s| s < 2) {
            return bad("need at least two groups of size two or more".into());
        }
        if self.study == Study::TwoSample && self.sizes.len() != 2 {
            return bad("a two-sample study takes exactly two sizes".into());
        }
        if self.methods.is_empty() || self.deltas.is_empty() {
            return bad("methods and deltas must be non-empty".into());
        }
        if self.deltas.iter().any(|d| !d.is_finite()) {
            return bad("deltas must be finite".into());
        }
        if self.sizes.len() > 2 && self.methods.contains(&Method::Hotelling) {
            return bad("Hotelling's test needs exactly two groups".into());
        }
        ErrorLaw::from_name(&self.law)?;
        ScoreFunction::from_name(&self.score, 2).map_err(|e| CorankError::InvalidSpec(e.to_string()))?;
        self.grid_options().spec(self.sizes.iter().sum(), 2)?;
        Ok(())
    }

    pub fn grid_options(&self) -> GridOptions {
        let factorization = match self.grid {
            Some(g) => Factorization::Explicit { n_r: g.n_r, n_s: g.n_s },
            None => Factorization::Balanced,
        };
        GridOptions { factorization, symmetrize: self.symmetrize, seed: self.master_seed }
    }

    pub fn total_size(&self) -> usize {
        self.sizes.iter().sum()
    }
}

/// Runs one method on grouped data.
pub fn run_method(
    method: Method,
    groups: &[DMatrix<f64>],
    score: &ScoreFunction,
    opts: &GridOptions,
    scatter: ScatterKind,
) -> Result<TestResult> {
    let refs: Vec<&DMatrix<f64>> = groups.iter().collect();
    match method {
        Method::Co if groups.len() == 2 => two_sample_test(&groups[0], &groups[1], score, opts),
        Method::Co => manova_test(groups, score, opts),
        Method::CoSphericized => sphericized_center_outward_test(&refs, score, opts, scatter),
        Method::Elliptical => elliptical_rank_test(&refs, score, scatter),
        Method::Hotelling if groups.len() == 2 => hotelling_two_sample(&groups[0], &groups[1]),
        Method::Hotelling => Err(CorankError::InvalidSpec("Hotelling's test needs exactly two groups".into())),
        Method::Pillai => pillai_manova(&refs),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub method: String,
    pub delta: f64,
    pub n: usize,
    pub rejections: usize,
    #[serde(rename = "N")]
    pub replications: usize,
    pub frequency: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCurve {
    pub rows: Vec<PowerRow>,
}

impl PowerCurve {
    pub fn get(&self, method: Method, delta: f64) -> Option<&PowerRow> {
        self.rows.iter().find(|r| r.method == method.name() && r.delta == delta)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Monte Carlo standard error of a rejection frequency.
pub fn mc_standard_error(frequency: f64, replications: usize) -> f64 {
    (frequency * (1.0 - frequency) / replications as f64).sqrt()
}

struct Prepared {
    law: ErrorLaw,
    score: ScoreFunction,
    opts: GridOptions,
}

fn prepare(cfg: &SimConfig) -> Result<Prepared> {
    cfg.validate()?;
    Ok(Prepared {
        law: ErrorLaw::from_name(&cfg.law)?,
        score: ScoreFunction::from_name(&cfg.score, 2)?,
        opts: cfg.grid_options(),
    })
}

/// Runs `f` for each replication in parallel and returns the results in
/// replication order, or the error of the lowest failing replication.
fn replicate<T, F>(cfg: &SimConfig, law: &ErrorLaw, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&[DMatrix<f64>]) -> Result<T> + Sync,
{
    let outcomes: Vec<Result<T>> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(cfg.master_seed, r as u64);
            let groups: Vec<DMatrix<f64>> = cfg.sizes.iter().map(|&n| law.sample(n, &mut rng)).collect();
            f(&groups).map_err(|e| CorankError::Replication {
                replication: r,
                seed: cfg.master_seed,
                source: Box::new(e),
            })
        })
        .collect();
    outcomes.into_iter().collect()
}

fn shifted(groups: &[DMatrix<f64>], delta: f64) -> Vec<DMatrix<f64>> {
    let mut out = groups.to_vec();
    if delta != 0.0 {
        let last = out.len() - 1;
        out[last] = shift(&groups[last], delta);
    }
    out
}

/// Rejection frequencies for every (method, delta) pair.
pub fn run_power_study(cfg: &SimConfig) -> Result<PowerCurve> {
    let prep = prepare(cfg)?;
    let flags = replicate(cfg, &prep.law, |groups| {
        let mut hits = Vec::with_capacity(cfg.methods.len() * cfg.deltas.len());
        for &delta in &cfg.deltas {
            let data = shifted(groups, delta);
            for &method in &cfg.methods {
                let result = run_method(method, &data, &prep.score, &prep.opts, cfg.scatter)?;
                hits.push(result.rejects(cfg.alpha));
            }
        }
        Ok(hits)
    })?;

    let n = cfg.total_size();
    let mut rows = Vec::new();
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        for (mi, &method) in cfg.methods.iter().enumerate() {
            let idx = di * cfg.methods.len() + mi;
            let rejections = flags.iter().filter(|h| h[idx]).count();
            let frequency = rejections as f64 / cfg.replications as f64;
            rows.push(PowerRow {
                method: method.name().into(),
                delta,
                n,
                rejections,
                replications: cfg.replications,
                frequency,
                mc_se: mc_standard_error(frequency, cfg.replications),
            });
        }
    }
    Ok(PowerCurve { rows })
}

/// Test statistics under the null (no shift), one vector per method.
pub fn run_null_distribution(cfg: &SimConfig) -> Result<Vec<(Method, Vec<f64>)>> {
    let prep = prepare(cfg)?;
    let stats = replicate(cfg, &prep.law, |groups| {
        cfg.methods
            .iter()
            .map(|&m| run_method(m, groups, &prep.score, &prep.opts, cfg.scatter).map(|r| r.statistic))
            .collect::<Result<Vec<f64>>>()
    })?;
    Ok(cfg
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| (m, stats.iter().map(|s| s[mi]).collect()))
        .collect())
}
