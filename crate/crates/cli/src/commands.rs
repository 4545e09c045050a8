//! Subcommand implementations.

use std::fs;
use std::path::Path;

use dynup::domain::{AcceptanceCurve, ArrivalModel, Instance, PriceLadder};
use dynup::experiments::calibration::{fit_acceptance_curve, synthetic_samples, CalibrationFit};
use dynup::experiments::diagnostics::{
    default_checkpoints, martingale_diagnostics, pricing_loss_diagnostics, stopping_time_diagnostics,
    MartingaleReport, PricingLossEntry, StoppingReport, Tracked,
};
use dynup::experiments::hotel::{hotel_study as run_hotel_study, HotelConfig, HotelReport};
use dynup::experiments::regret::{regret_sweep, RegretReport, SweepConfig};
use dynup::experiments::stats::Summary;
use dynup::experiments::{long_csv, par_reps, rep_seed, LongRow};
use dynup::oracle::{dp_optimal_value, dp_policy_value, enumerate_hindsight_bound, grid_slack};
use dynup::policy::{DynUp2, PolicySpec};
use dynup::sim::{fmt9, run_episode, EpisodeTrace};
use serde::Serialize;

use crate::output::{tag, OutDir};
use crate::CliError;

/// Tolerance for the hindsight bound against the exact optimum.
pub const DOMINANCE_TOL: f64 = 1e-9;

fn load_instance(path: &Path) -> Result<Instance, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read instance {}: {e}", path.display())))?;
    let inst = Instance::from_toml(&text)?;
    for w in inst.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(inst)
}

/// Two-type instance small enough for the exact oracle.
pub fn default_small_instance() -> Instance {
    Instance::new(
        20,
        vec![6, 8],
        PriceLadder::new(vec![1.0, 2.0]).expect("valid ladder"),
        ArrivalModel::new(vec![0.5, 0.2]).expect("valid rates"),
        vec![AcceptanceCurve::exponential_power(2.33, 1.0).expect("valid curve")],
    )
    .expect("valid instance")
}

pub fn simulate(path: &Path, policy: &PolicySpec, reps: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    let inst = load_instance(path)?;
    let traces = par_reps(reps, |k| -> dynup::Result<EpisodeTrace> {
        let mut pol = policy.build(&inst)?;
        let trace = run_episode(&inst, pol.as_mut(), rep_seed(seed, 0, k as u64))?;
        trace.check_invariants()?;
        Ok(trace)
    })
    .into_iter()
    .collect::<dynup::Result<Vec<_>>>()?;

    let dir = OutDir::create(out)?;
    for (k, tr) in traces.iter().enumerate() {
        let stem = format!("trace_{k:04}_{}", tr.summary.seed);
        dir.write(&format!("{stem}.csv"), &tr.to_csv())?;
        dir.write(&format!("{stem}.json"), &format!("{}\n", tr.summary_json()))?;
    }
    let revenue: Vec<f64> = traces.iter().map(|t| t.summary.total_revenue).collect();
    let s = Summary::of(&revenue);
    println!(
        "{policy}: {reps} episodes, T = {}, mean revenue {} (se {})",
        inst.horizon(),
        fmt9(s.mean),
        fmt9(s.se)
    );
    println!("traces written to {}", out.display());
    Ok(())
}

pub struct RegretArgs<'a> {
    pub instance: &'a Path,
    pub policy: &'a PolicySpec,
    pub reps: usize,
    pub horizons: Vec<usize>,
    pub ratios: Option<Vec<f64>>,
    pub plot_data: bool,
    pub seed: u64,
    pub out: &'a Path,
}

#[derive(Serialize)]
struct RegretOutput<'a> {
    seed: u64,
    per_period_ratio: f64,
    #[serde(flatten)]
    report: &'a RegretReport,
}

pub fn regret(a: &RegretArgs<'_>) -> Result<(), CliError> {
    let inst = load_instance(a.instance)?;
    let cfg = SweepConfig {
        horizons: a.horizons.clone(),
        reps: a.reps,
        base_seed: a.seed,
        ratios: a.ratios.clone(),
    };
    let report = regret_sweep(&inst, a.policy, &cfg)?;
    let ratio = report.per_period_ratio();

    let dir = OutDir::create(a.out)?;
    let stem = format!("regret_{}", tag(&report.policy));
    dir.write(&format!("{stem}.csv"), &long_csv(&report.rows()))?;
    dir.write_json(
        &format!("{stem}.json"),
        &RegretOutput {
            seed: a.seed,
            per_period_ratio: ratio,
            report: &report,
        },
    )?;
    if a.plot_data {
        dir.write(&format!("{stem}.dat"), &report.plot_data())?;
    }

    println!("policy {}", report.policy);
    println!("{:>8} {:>16} {:>16}", "T", "regret", "se");
    for e in &report.entries {
        println!("{:>8} {:>16} {:>16}", e.horizon, fmt9(e.mean), fmt9(e.se));
    }
    if let Some(f) = report.fit {
        println!(
            "fit regret ~ {} + {} log T, R^2 = {}",
            fmt9(f.intercept),
            fmt9(f.slope),
            fmt9(f.r2)
        );
    }
    println!("per-period regret ratio (last/first) {}", fmt9(ratio));
    Ok(())
}

pub struct DiagnosticsArgs<'a> {
    pub instance: &'a Path,
    pub reps: usize,
    pub tracked: Vec<Tracked>,
    pub stopping_time: bool,
    pub pricing_loss: bool,
    /// Whether the selection was explicit; if not, inapplicable diagnostics
    /// are skipped instead of failing.
    pub explicit: bool,
    pub eta: f64,
    pub gamma: f64,
    pub checkpoints: usize,
    pub seed: u64,
    pub out: &'a Path,
}

#[derive(Serialize)]
struct DiagnosticsOutput {
    seed: u64,
    reps: usize,
    martingale: Vec<MartingaleReport>,
    stopping_time: Option<StoppingReport>,
    pricing_loss: Option<PricingLossEntry>,
    skipped: Vec<String>,
}

fn skippable<T>(res: dynup::Result<T>, what: &str, explicit: bool, skipped: &mut Vec<String>) -> Result<Option<T>, CliError> {
    match res {
        Ok(v) => Ok(Some(v)),
        Err(dynup::Error::InvalidInstance(msg)) if !explicit => {
            eprintln!("skipping {what}: {msg}");
            skipped.push(format!("{what}: {msg}"));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn diagnostics(a: &DiagnosticsArgs<'_>) -> Result<(), CliError> {
    if !(a.gamma > 0.0 && a.gamma <= 1.0) {
        return Err(CliError::Config(format!("--gamma must lie in (0, 1], got {}", a.gamma)));
    }
    if a.checkpoints == 0 {
        return Err(CliError::Config("--checkpoints must be at least 1".into()));
    }
    let inst = load_instance(a.instance)?;
    if inst.n_types() != 2 {
        return Err(CliError::Config("diagnostics need a two-type instance".into()));
    }
    let cps = default_checkpoints(inst.horizon(), a.gamma, a.checkpoints);
    let mut skipped = Vec::new();
    let mut martingale = Vec::new();
    for &which in &a.tracked {
        let res = martingale_diagnostics(&inst, which, a.reps, &cps, a.seed);
        if let Some(rep) = skippable(res, which.name(), a.explicit, &mut skipped)? {
            martingale.push(rep);
        }
    }
    let stopping_time = if a.stopping_time {
        let res = stopping_time_diagnostics(&inst, a.reps, a.eta, a.seed);
        skippable(res, "stopping_time", a.explicit, &mut skipped)?
    } else {
        None
    };
    let pricing_loss = if a.pricing_loss {
        let res = pricing_loss_diagnostics(&inst, a.reps, a.seed);
        skippable(res, "pricing_loss", a.explicit, &mut skipped)?
    } else {
        None
    };

    let mut rows: Vec<LongRow> = martingale.iter().flat_map(|m| m.rows()).collect();
    if let Some(s) = &stopping_time {
        rows.extend(s.rows());
    }
    if let Some(p) = &pricing_loss {
        rows.extend(p.rows());
    }
    let dir = OutDir::create(a.out)?;
    dir.write("diagnostics.csv", &long_csv(&rows))?;
    let report = DiagnosticsOutput {
        seed: a.seed,
        reps: a.reps,
        martingale,
        stopping_time,
        pricing_loss,
        skipped,
    };
    dir.write_json("diagnostics.json", &report)?;

    for m in &report.martingale {
        let max_z = m
            .checkpoints
            .iter()
            .filter(|c| c.se > 0.0)
            .map(|c| (c.mean / c.se).abs())
            .fold(0.0, f64::max);
        println!(
            "{}: max |mean/se| over {} checkpoints {}, exit fraction {}",
            m.process.name(),
            m.checkpoints.len(),
            fmt9(max_z),
            fmt9(m.exit_fraction)
        );
        if let Some(g) = m.gap {
            println!("  mean max |alpha - eps| {} (se {})", fmt9(g.mean_max_gap), fmt9(g.se));
        }
        if let Some(w) = &m.warning {
            eprintln!("warning: {w}");
        }
    }
    if let Some(s) = &report.stopping_time {
        println!(
            "stopping time: predicted tau/T {}, mean {}, fraction beyond eta {}",
            fmt9(s.predicted),
            fmt9(s.mean_tau_over_t),
            fmt9(s.violation_fraction)
        );
    }
    if let Some(p) = &report.pricing_loss {
        println!("pricing loss: mean {} (se {})", fmt9(p.mean), fmt9(p.se));
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleOutput {
    #[serde(rename = "T")]
    horizon: usize,
    c: Vec<u32>,
    grid_step: f64,
    hindsight_bound: f64,
    dp_optimal_value: f64,
    dynup2_value: f64,
    grid_slack: f64,
    bound_dominates_optimum: bool,
    optimum_dominates_policy: bool,
    warnings: Vec<String>,
}

pub fn oracle_check(path: Option<&Path>, grid_step: f64, dp_table: bool, out: &Path) -> Result<(), CliError> {
    let inst = match path {
        Some(p) => load_instance(p)?,
        None => default_small_instance(),
    };
    if inst.n_types() != 2 {
        return Err(CliError::Config("the oracle handles two-type instances only".into()));
    }
    let bound = enumerate_hindsight_bound(&inst)?;
    let table = dp_optimal_value(&inst, grid_step)?;
    let opt = table.optimal_value();
    let value = dp_policy_value(&inst, &DynUp2::new(&inst)?)?;
    let slack = grid_slack(&inst, grid_step);
    let d1 = bound >= opt - DOMINANCE_TOL;
    let d2 = opt >= value - slack;

    let dir = OutDir::create(out)?;
    dir.write_json(
        "oracle_check.json",
        &OracleOutput {
            horizon: inst.horizon(),
            c: inst.capacities().to_vec(),
            grid_step,
            hindsight_bound: bound,
            dp_optimal_value: opt,
            dynup2_value: value,
            grid_slack: slack,
            bound_dominates_optimum: d1,
            optimum_dominates_policy: d2,
            warnings: inst.warnings(),
        },
    )?;
    if dp_table {
        dir.write("dp_table.csv", &table.to_csv())?;
    }

    let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
    println!("hindsight bound      {}", fmt9(bound));
    println!("dp optimal value     {}", fmt9(opt));
    println!("dynup2 policy value  {}", fmt9(value));
    println!("grid slack           {}", fmt9(slack));
    println!("{} bound >= optimum - {DOMINANCE_TOL:e}", verdict(d1));
    println!("{} optimum >= policy - slack", verdict(d2));
    if d1 && d2 {
        Ok(())
    } else {
        Err(CliError::Check("dominance violated".into()))
    }
}

fn parse_samples(text: &str) -> Result<Vec<(f64, bool)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || CliError::Config(format!("samples line {}: expected `x,accepted`, got `{line}`", i + 1));
        let (x, acc) = line.split_once(',').ok_or_else(bad)?;
        let Ok(x) = x.trim().parse::<f64>() else {
            if out.is_empty() && i == 0 {
                continue;
            }
            return Err(bad());
        };
        let acc = match acc.trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => return Err(bad()),
        };
        out.push((x, acc));
    }
    Ok(out)
}

#[derive(Serialize)]
struct CalibrationOutput {
    source: String,
    fit: CalibrationFit,
}

pub fn calibrate(
    samples: Option<&Path>,
    synthetic: Option<&[f64]>,
    n: usize,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let (source, data) = match (samples, synthetic) {
        (Some(p), _) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read samples {}: {e}", p.display())))?;
            (p.display().to_string(), parse_samples(&text)?)
        }
        (None, Some(&[a, b])) => {
            let curve = AcceptanceCurve::exponential_power(a, b)?;
            (format!("synthetic a={a} b={b} n={n} seed={seed}"), synthetic_samples(&curve, n, seed))
        }
        _ => return Err(CliError::Config("give --samples FILE or --synthetic A,B".into())),
    };
    let fit = fit_acceptance_curve(&data)?;
    OutDir::create(out)?.write_json("calibration.json", &CalibrationOutput { source, fit })?;
    println!(
        "f(x) = exp(-a x^b): a = {}, b = {} from {} samples",
        fmt9(fit.a),
        fmt9(fit.b),
        fit.samples
    );
    Ok(())
}

pub fn hotel_study(
    config: Option<&Path>,
    permutations: Option<usize>,
    seed: Option<u64>,
    plot_data: bool,
    out: &Path,
) -> Result<(), CliError> {
    let mut cfg = match config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
            toml::from_str::<HotelConfig>(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => HotelConfig::default(),
    };
    if let Some(k) = permutations {
        cfg.permutations = k;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let report: HotelReport = run_hotel_study(&cfg)?;

    let dir = OutDir::create(out)?;
    dir.write("hotel.csv", &long_csv(&report.rows()))?;
    dir.write_json("hotel.json", &report)?;
    if plot_data {
        dir.write("hotel.dat", &report.plot_data())?;
    }

    let pct = |x: Option<f64>| x.map_or_else(|| "n/a".to_string(), |v| format!("{}%", fmt9(v)));
    println!("{:>4} {:>9} {:>14} {:>14} {:>14}", "day", "requests", "static", "dynupn", "improvement");
    for d in &report.days {
        println!(
            "{:>4} {:>9} {:>14} {:>14} {:>14}{}",
            d.day,
            d.requests.iter().sum::<u32>(),
            fmt9(d.static_mean),
            fmt9(d.dynupn_mean),
            pct(d.improvement_pct),
            if d.high_demand { " *" } else { "" }
        );
    }
    println!("aggregate improvement {}", pct(report.aggregate_improvement_pct));
    println!("high-demand improvement {}", pct(report.high_demand_improvement_pct));
    let t = report.high_demand_test;
    println!(
        "paired t-test on high-demand days: n = {}, t = {}, one-sided p = {}",
        t.n,
        fmt9(t.t),
        fmt9(t.p_value)
    );
    Ok(())
}
