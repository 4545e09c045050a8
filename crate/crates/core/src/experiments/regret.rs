//! Paired regret estimation against the hindsight benchmark.
//!
//! Every replication runs the policy once and evaluates the upper hybrid
//! value on the arrival counts of that same path, so the difference is
//! paired by construction.

use serde::{Deserialize, Serialize};

use super::stats::{ols, LinearFit, Summary};
use super::{par_reps, rep_seed, LongRow};
use crate::domain::Instance;
use crate::error::{Error, Result};
use crate::hybrid::{solve_ntype, upper_hp_value, CountVector, Pair};
use crate::policy::{Policy, PolicySpec};
use crate::sim::run_episode_summary;

/// Builds a fresh policy for one replication.
pub type PolicyFactory<'a> = dyn Fn(&Instance) -> Result<Box<dyn Policy>> + Sync + 'a;

/// Benchmark `w^U` on realized counts, plus whether the two-type value
/// took the degenerate branch (`Lambda_2 >= c_2`).
pub fn benchmark_value(inst: &Instance, counts: &[u32]) -> Result<(f64, bool)> {
    if inst.n_types() == 2 {
        let pair = Pair::new(
            f64::from(inst.capacity(0)),
            f64::from(inst.capacity(1)),
            inst.ladder().price(0),
            inst.ladder().price(1),
            inst.curve(0),
        );
        let (v, sol) = upper_hp_value([f64::from(counts[0]), f64::from(counts[1])], &pair);
        return Ok((v, sol.degenerate));
    }
    let caps: Vec<f64> = inst.capacities().iter().map(|&c| f64::from(c)).collect();
    let sol = solve_ntype(
        &CountVector::from_integers(counts),
        &caps,
        inst.ladder().as_slice(),
        inst.curves(),
    )?;
    Ok((sol.total, sol.pairs.iter().any(|p| p.degenerate)))
}

/// Regret at one horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretEntry {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub reps: usize,
    pub mean: f64,
    pub se: f64,
    pub mean_policy: f64,
    pub mean_benchmark: f64,
    pub degenerate_paths: usize,
}

/// Mean of `w^U - W^pi` over `reps` paired replications of stream `stream`.
pub fn estimate_regret_with(
    inst: &Instance,
    factory: &PolicyFactory<'_>,
    reps: usize,
    base_seed: u64,
    stream: u64,
) -> Result<RegretEntry> {
    if reps < 2 {
        return Err(Error::Config(format!("need at least 2 replications, got {reps}")));
    }
    let rows = par_reps(reps, |k| -> Result<(f64, f64, bool)> {
        let mut policy = factory(inst)?;
        let s = run_episode_summary(inst, policy.as_mut(), rep_seed(base_seed, stream, k as u64))?;
        let (w_u, degenerate) = benchmark_value(inst, &s.counts)?;
        Ok((w_u, s.total_revenue, degenerate))
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let diffs: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    let bench: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let pol: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let d = Summary::of(&diffs);
    Ok(RegretEntry {
        horizon: inst.horizon(),
        reps,
        mean: d.mean,
        se: d.se,
        mean_policy: Summary::of(&pol).mean,
        mean_benchmark: Summary::of(&bench).mean,
        degenerate_paths: rows.iter().filter(|r| r.2).count(),
    })
}

pub fn estimate_regret(inst: &Instance, spec: &PolicySpec, reps: usize, base_seed: u64) -> Result<RegretEntry> {
    estimate_regret_with(inst, &|i: &Instance| spec.build(i), reps, base_seed, 0)
}

/// Sweep settings. Capacities are `round(ratio_i * T)`; without explicit
/// ratios they are taken from the template as `c_i / T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub horizons: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default)]
    pub ratios: Option<Vec<f64>>,
}

/// Regret per horizon and the fit `regret ~ a + b log T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub policy: String,
    pub entries: Vec<RegretEntry>,
    pub fit: Option<LinearFit>,
}

impl RegretReport {
    /// `(regret(T_last) / T_last) / (regret(T_first) / T_first)`.
    pub fn per_period_ratio(&self) -> f64 {
        let first = &self.entries[0];
        let last = &self.entries[self.entries.len() - 1];
        (last.mean / last.horizon as f64) / (first.mean / first.horizon as f64)
    }

    pub fn rows(&self) -> Vec<LongRow> {
        let exp = format!("regret:{}", self.policy);
        let mut rows = Vec::new();
        for e in &self.entries {
            rows.push(LongRow::new(&exp, e.horizon, "mean_regret", e.mean));
            rows.push(LongRow::new(&exp, e.horizon, "se", e.se));
            rows.push(LongRow::new(&exp, e.horizon, "reps", e.reps as f64));
            rows.push(LongRow::new(&exp, e.horizon, "mean_policy_revenue", e.mean_policy));
            rows.push(LongRow::new(&exp, e.horizon, "mean_benchmark", e.mean_benchmark));
            rows.push(LongRow::new(&exp, e.horizon, "degenerate_paths", e.degenerate_paths as f64));
        }
        if let Some(f) = self.fit {
            rows.push(LongRow::new(&exp, 0, "fit_intercept", f.intercept));
            rows.push(LongRow::new(&exp, 0, "fit_slope_log_t", f.slope));
            rows.push(LongRow::new(&exp, 0, "fit_r2", f.r2));
        }
        rows
    }

    /// Whitespace-separated columns `T mean se` for plotting tools.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# T mean_regret se\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{} {} {}\n",
                e.horizon,
                crate::sim::fmt9(e.mean),
                crate::sim::fmt9(e.se)
            ));
        }
        out
    }
}

/// The template rescaled to horizon `t`.
pub fn scaled_instance(template: &Instance, horizon: usize, ratios: &[f64]) -> Result<Instance> {
    let caps = ratios
        .iter()
        .map(|r| (r * horizon as f64).round() as u32)
        .collect();
    template.with_horizon(horizon)?.with_capacities(caps)
}

pub fn regret_sweep_with(
    template: &Instance,
    name: &str,
    factory: &PolicyFactory<'_>,
    cfg: &SweepConfig,
) -> Result<RegretReport> {
    if cfg.horizons.len() < 4 || cfg.horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "sweep needs at least 4 increasing horizons, got {:?}",
            cfg.horizons
        )));
    }
    let ratios = match &cfg.ratios {
        Some(r) if r.len() == template.n_types() => r.clone(),
        Some(r) => {
            return Err(Error::Config(format!(
                "{} capacity ratios for {} types",
                r.len(),
                template.n_types()
            )))
        }
        None => template
            .capacities()
            .iter()
            .map(|&c| f64::from(c) / template.horizon() as f64)
            .collect(),
    };
    let mut entries = Vec::with_capacity(cfg.horizons.len());
    for (stream, &t) in cfg.horizons.iter().enumerate() {
        let inst = scaled_instance(template, t, &ratios)?;
        entries.push(estimate_regret_with(&inst, factory, cfg.reps, cfg.base_seed, stream as u64)?);
    }
    let x: Vec<f64> = entries.iter().map(|e| (e.horizon as f64).ln()).collect();
    let y: Vec<f64> = entries.iter().map(|e| e.mean).collect();
    Ok(RegretReport {
        policy: name.to_string(),
        fit: ols(&x, &y),
        entries,
    })
}

pub fn regret_sweep(template: &Instance, spec: &PolicySpec, cfg: &SweepConfig) -> Result<RegretReport> {
    regret_sweep_with(template, &spec.to_string(), &|i: &Instance| spec.build(i), cfg)
}
