//! Path diagnostics for the two-type rule.
//!
//! The tracked processes are stopped at the first period whose state leaves
//! the intended branch of the closed form (or runs out of either stock), so
//! each reported series is the stopped version of the process. A stopped
//! martingale is still a martingale, which keeps the zero-drift check exact;
//! the fraction of stopped paths is reported alongside.

use serde::{Deserialize, Serialize};

use super::stats::Summary;
use super::{par_reps, rep_seed, LongRow};
use crate::domain::Instance;
use crate::error::{Error, Result};
use crate::hybrid::closed_form_v;
use crate::policy::{Decision, DynUp2};
use crate::sim::{run_episode, run_episode_summary, EpisodeTrace};

/// Paths leaving the branch above this fraction trigger a warning.
pub const EXIT_WARNING_FRACTION: f64 = 0.05;

/// Process tracked by [`martingale_diagnostics`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tracked {
    /// `v^(1) - g_t` with `g_t = (c2 - lambda2 s) / (lambda1 s)`, abundance
    /// with the premium term binding.
    Upper,
    /// `v^(1) - h_t` with `h_t = 1 - c1 / (lambda1 s)`, abundance with the
    /// basic term binding.
    Lower,
    /// The linearized process `alpha_t` against `v^(1) - v^(t)` in scarcity.
    Alpha,
}

impl Tracked {
    pub fn name(self) -> &'static str {
        match self {
            Tracked::Upper => "eps_upper",
            Tracked::Lower => "eps_lower",
            Tracked::Alpha => "alpha",
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Ctx {
    horizon: usize,
    l1: f64,
    l2: f64,
    floor: f64,
    v_star: f64,
}

impl Ctx {
    fn new(inst: &Instance) -> Self {
        Self {
            horizon: inst.horizon(),
            l1: inst.arrivals().rate(0),
            l2: inst.arrivals().rate(1),
            floor: inst.curve(0).floor(),
            v_star: inst.curve(0).v_star(),
        }
    }

    fn s(&self, t: usize) -> f64 {
        (self.horizon + 1 - t) as f64
    }

    fn raw_v(&self, t: usize, c1: u32, c2: u32) -> f64 {
        let s = self.s(t);
        closed_form_v(self.l1 * s, self.l2 * s, f64::from(c1), f64::from(c2), self.v_star)
    }

    fn g(&self, t: usize, c2: u32) -> f64 {
        let s = self.s(t);
        (f64::from(c2) - self.l2 * s) / (self.l1 * s)
    }

    fn h(&self, t: usize, c1: u32) -> f64 {
        1.0 - f64::from(c1) / (self.l1 * self.s(t))
    }

    /// Branch value at `t`: `g_t`, `h_t`, or the scarcity re-solve.
    fn level(&self, which: Tracked, t: usize, c1: u32, c2: u32) -> f64 {
        match which {
            Tracked::Upper => self.g(t, c2),
            Tracked::Lower => self.h(t, c1),
            Tracked::Alpha => self.raw_v(t, c1, c2),
        }
    }

    /// Whether the step out of period `t` stays on the intended branch.
    fn in_branch(&self, which: Tracked, t: usize, c1: u32, c2: u32) -> bool {
        if c1 == 0 || c2 == 0 {
            return false;
        }
        let s = self.s(t);
        let supply = f64::from(c1 + c2);
        let demand = (self.l1 + self.l2) * s;
        let raw = self.raw_v(t, c1, c2);
        let inside = |x: f64| x >= self.floor && x < 1.0;
        match which {
            Tracked::Upper => supply > demand && raw == self.g(t, c2) && inside(raw),
            Tracked::Lower => supply > demand && raw == self.h(t, c1) && inside(raw),
            Tracked::Alpha => {
                supply < demand && f64::from(c2) - self.l2 * s > 0.0 && inside(raw)
            }
        }
    }

    /// Linearized increment of `v^(1) - v^(t)` for the scarcity branch.
    fn alpha_increment(&self, t: usize, c1: u32, c2: u32, arrival: Option<usize>, upgraded: bool) -> f64 {
        let d = f64::from(c1) + f64::from(c2) - self.l2 * self.s(t);
        let k = f64::from(c1) / (d * d);
        let v = self.raw_v(t, c1, c2);
        match arrival {
            None => -k * self.l2,
            Some(0) if !upgraded => -k * (v / (1.0 - v) + self.l2),
            Some(_) => k * (1.0 - self.l2),
        }
    }
}

/// Unstopped `v^(1) - level_t` for `t = 1..=T` along a trace.
pub fn process_path(inst: &Instance, trace: &EpisodeTrace, which: Tracked) -> Vec<f64> {
    let ctx = Ctx::new(inst);
    let path = trace.remaining_path();
    let v1 = ctx.raw_v(1, path[0][0], path[0][1]);
    (1..=ctx.horizon)
        .map(|t| v1 - ctx.level(which, t, path[t - 1][0], path[t - 1][1]))
        .collect()
}

struct PathOutcome {
    at_checkpoints: Vec<f64>,
    exit_before_last: bool,
    max_gap: f64,
}

fn track_path(ctx: &Ctx, trace: &EpisodeTrace, which: Tracked, checkpoints: &[usize]) -> PathOutcome {
    let path = trace.remaining_path();
    let last = *checkpoints.last().unwrap_or(&1);
    let v1 = ctx.raw_v(1, path[0][0], path[0][1]);
    let mut value = v1 - ctx.level(which, 1, path[0][0], path[0][1]);
    let mut alpha = 0.0;
    let mut stopped = false;
    let mut stop_time = usize::MAX;
    let mut max_gap = 0.0f64;
    let mut at = Vec::with_capacity(checkpoints.len());
    let mut next_cp = 0;

    for t in 1..=ctx.horizon {
        let (c1, c2) = (path[t - 1][0], path[t - 1][1]);
        if !stopped {
            let eps = v1 - ctx.level(which, t, c1, c2);
            value = if which == Tracked::Alpha { alpha } else { eps };
            if which == Tracked::Alpha && t <= last {
                max_gap = max_gap.max((alpha - eps).abs());
            }
        }
        while next_cp < checkpoints.len() && checkpoints[next_cp] == t {
            at.push(value);
            next_cp += 1;
        }
        if !stopped && !ctx.in_branch(which, t, c1, c2) {
            stopped = true;
            stop_time = t;
        }
        if !stopped && which == Tracked::Alpha {
            let r = &trace.records[t - 1];
            let upgraded = matches!(r.decision, Decision::AcceptWithOffer { .. }) && r.upgrade_accepted == Some(true);
            alpha += ctx.alpha_increment(t, c1, c2, r.arrival, upgraded);
        }
    }
    PathOutcome {
        at_checkpoints: at,
        exit_before_last: stop_time < last,
        max_gap,
    }
}

/// Mean and standard error of a process at one checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointStat {
    pub t: usize,
    pub mean: f64,
    pub se: f64,
}

/// Summary of `max_t |alpha_t - eps_t|` over paths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub mean_max_gap: f64,
    pub se: f64,
    pub largest: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub process: Tracked,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub reps: usize,
    pub checkpoints: Vec<CheckpointStat>,
    /// Fraction of paths stopped before the last checkpoint.
    pub exit_fraction: f64,
    pub warning: Option<String>,
    pub gap: Option<GapStats>,
}

impl MartingaleReport {
    /// `|mean| <= k * se` at every checkpoint.
    pub fn zero_drift(&self, k: f64) -> bool {
        self.checkpoints.iter().all(|c| c.mean.abs() <= k * c.se || (c.mean == 0.0 && c.se == 0.0))
    }

    pub fn rows(&self) -> Vec<LongRow> {
        let exp = format!("martingale:{}", self.process.name());
        let mut rows = Vec::new();
        for c in &self.checkpoints {
            rows.push(LongRow::new(&exp, c.t, "mean", c.mean));
            rows.push(LongRow::new(&exp, c.t, "se", c.se));
        }
        rows.push(LongRow::new(&exp, self.horizon, "exit_fraction", self.exit_fraction));
        if let Some(g) = self.gap {
            rows.push(LongRow::new(&exp, self.horizon, "mean_max_gap", g.mean_max_gap));
            rows.push(LongRow::new(&exp, self.horizon, "largest_gap", g.largest));
        }
        rows
    }
}

/// `k` checkpoints spread evenly over `[1, floor(gamma T)]`.
pub fn default_checkpoints(horizon: usize, gamma: f64, k: usize) -> Vec<usize> {
    let end = ((gamma * horizon as f64).floor() as usize).clamp(1, horizon);
    if k <= 1 {
        return vec![end];
    }
    let mut cps: Vec<usize> = (0..k)
        .map(|j| 1 + ((end - 1) as f64 * j as f64 / (k - 1) as f64).round() as usize)
        .collect();
    cps.dedup();
    cps
}

pub fn martingale_diagnostics(
    inst: &Instance,
    which: Tracked,
    reps: usize,
    checkpoints: &[usize],
    base_seed: u64,
) -> Result<MartingaleReport> {
    if checkpoints.is_empty()
        || checkpoints.windows(2).any(|w| w[1] <= w[0])
        || checkpoints[0] < 1
        || *checkpoints.last().unwrap() > inst.horizon()
    {
        return Err(Error::Config(format!("checkpoints must increase within [1, T]: {checkpoints:?}")));
    }
    if inst.arrivals().rate(0) <= 0.0 {
        return Err(Error::InvalidInstance("diagnostics need lambda1 > 0".into()));
    }
    let ctx = Ctx::new(inst);
    let policy = DynUp2::new(inst)?;
    let outcomes = par_reps(reps, |k| -> Result<PathOutcome> {
        let trace = run_episode(inst, &mut policy.clone(), rep_seed(base_seed, 0, k as u64))?;
        Ok(track_path(&ctx, &trace, which, checkpoints))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let stats = checkpoints
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let xs: Vec<f64> = outcomes.iter().map(|o| o.at_checkpoints[j]).collect();
            let s = Summary::of(&xs);
            CheckpointStat { t, mean: s.mean, se: s.se }
        })
        .collect();
    let exits = outcomes.iter().filter(|o| o.exit_before_last).count();
    let exit_fraction = exits as f64 / reps.max(1) as f64;
    let warning = (exit_fraction > EXIT_WARNING_FRACTION).then(|| {
        format!(
            "{:.1}% of paths left the {} branch before t = {}",
            100.0 * exit_fraction,
            which.name(),
            checkpoints.last().unwrap()
        )
    });
    let gap = (which == Tracked::Alpha).then(|| {
        let gaps: Vec<f64> = outcomes.iter().map(|o| o.max_gap).collect();
        let s = Summary::of(&gaps);
        GapStats {
            mean_max_gap: s.mean,
            se: s.se,
            largest: gaps.iter().copied().fold(0.0, f64::max),
        }
    });
    Ok(MartingaleReport {
        process: which,
        horizon: inst.horizon(),
        reps,
        checkpoints: stats,
        exit_fraction,
        warning,
        gap,
    })
}

/// Depletion time of the basic resource relative to its fluid prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub reps: usize,
    pub eta: f64,
    /// `(c1 + c2 - lambda2 T) / (lambda1 T)`.
    pub predicted: f64,
    pub mean_tau_over_t: f64,
    /// Fraction of paths with `|tau / T - predicted| > eta`.
    pub violation_fraction: f64,
    /// Paths reporting the `T + 1` sentinel.
    pub never_depleted: usize,
    /// `(lower edge, count)` of `tau / T` in bins of width 0.02.
    pub histogram: Vec<(f64, usize)>,
}

impl StoppingReport {
    pub fn rows(&self) -> Vec<LongRow> {
        let exp = "stopping_time";
        let mut rows = vec![
            LongRow::new(exp, self.horizon, "predicted", self.predicted),
            LongRow::new(exp, self.horizon, "mean_tau_over_T", self.mean_tau_over_t),
            LongRow::new(exp, self.horizon, "violation_fraction", self.violation_fraction),
            LongRow::new(exp, self.horizon, "never_depleted", self.never_depleted as f64),
        ];
        for (lo, n) in &self.histogram {
            rows.push(LongRow::new(exp, self.horizon, &format!("hist_{lo:.2}"), *n as f64));
        }
        rows
    }
}

pub fn stopping_time_diagnostics(inst: &Instance, reps: usize, eta: f64, base_seed: u64) -> Result<StoppingReport> {
    let t = inst.horizon() as f64;
    let (l1, l2) = (inst.arrivals().rate(0), inst.arrivals().rate(1));
    let (c1, c2) = (f64::from(inst.capacity(0)), f64::from(inst.capacity(1)));
    if c1 + c2 > (l1 + l2) * t || l1 <= 0.0 {
        return Err(Error::InvalidInstance(
            "stopping-time diagnostics need a scarcity instance with lambda1 > 0".into(),
        ));
    }
    let predicted = (c1 + c2 - l2 * t) / (l1 * t);
    let policy = DynUp2::new(inst)?;
    let taus = par_reps(reps, |k| {
        run_episode_summary(inst, &mut policy.clone(), rep_seed(base_seed, 0, k as u64)).map(|s| s.depletion[0])
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let fracs: Vec<f64> = taus.iter().map(|&x| x as f64 / t).collect();
    let width = 0.02;
    let nbins = ((1.0 + 1.0 / t) / width).ceil() as usize + 1;
    let mut hist = vec![0usize; nbins];
    for &f in &fracs {
        hist[((f / width).floor() as usize).min(nbins - 1)] += 1;
    }
    Ok(StoppingReport {
        horizon: inst.horizon(),
        reps,
        eta,
        predicted,
        mean_tau_over_t: Summary::of(&fracs).mean,
        violation_fraction: fracs.iter().filter(|&&f| (f - predicted).abs() > eta).count() as f64
            / reps.max(1) as f64,
        never_depleted: taus.iter().filter(|&&x| x == inst.horizon() + 1).count(),
        histogram: hist
            .into_iter()
            .enumerate()
            .map(|(i, n)| (i as f64 * width, n))
            .collect(),
    })
}

/// `sum_{t < tau} (R(v^H) - R(v^(t)))` along one trace, in proportion
/// units, with `v^H` solved on the path's realized counts.
pub fn pricing_loss_path(inst: &Instance, trace: &EpisodeTrace) -> f64 {
    let ctx = Ctx::new(inst);
    let curve = inst.curve(0);
    let counts = &trace.summary.counts;
    let v_h = curve.clamp_prob(closed_form_v(
        f64::from(counts[0]),
        f64::from(counts[1]),
        f64::from(inst.capacity(0)),
        f64::from(inst.capacity(1)),
        ctx.v_star,
    ));
    let r_h = curve.revenue_of(v_h);
    let tau = trace.summary.depletion[0];
    let path = trace.remaining_path();
    (1..tau.min(ctx.horizon + 1))
        .map(|t| r_h - curve.revenue_of(curve.clamp_prob(ctx.raw_v(t, path[t - 1][0], path[t - 1][1]))))
        .sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricingLossEntry {
    #[serde(rename = "T")]
    pub horizon: usize,
    pub reps: usize,
    pub mean: f64,
    pub se: f64,
}

pub fn pricing_loss_diagnostics(inst: &Instance, reps: usize, base_seed: u64) -> Result<PricingLossEntry> {
    if inst.arrivals().rate(0) <= 0.0 {
        return Err(Error::InvalidInstance("diagnostics need lambda1 > 0".into()));
    }
    let policy = DynUp2::new(inst)?;
    let losses = par_reps(reps, |k| {
        run_episode(inst, &mut policy.clone(), rep_seed(base_seed, 0, k as u64)).map(|tr| pricing_loss_path(inst, &tr))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let s = Summary::of(&losses);
    Ok(PricingLossEntry {
        horizon: inst.horizon(),
        reps,
        mean: s.mean,
        se: s.se,
    })
}

impl PricingLossEntry {
    pub fn rows(&self) -> Vec<LongRow> {
        vec![
            LongRow::new("pricing_loss", self.horizon, "mean", self.mean),
            LongRow::new("pricing_loss", self.horizon, "se", self.se),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AcceptanceCurve, ArrivalModel, PriceLadder};

    fn inst(horizon: usize, c: Vec<u32>, l: Vec<f64>, curve: AcceptanceCurve) -> Instance {
        Instance::new(
            horizon,
            c,
            PriceLadder::new(vec![1.0, 2.0]).unwrap(),
            ArrivalModel::new(l).unwrap(),
            vec![curve],
        )
        .unwrap()
    }

    #[test]
    fn checkpoints_cover_the_window() {
        let cps = default_checkpoints(1000, 0.7, 10);
        assert_eq!(cps.len(), 10);
        assert_eq!(cps[0], 1);
        assert_eq!(*cps.last().unwrap(), 700);
        assert!(martingale_diagnostics(
            &inst(10, vec![5, 5], vec![0.5, 0.2], AcceptanceCurve::exponential_power(2.33, 1.0).unwrap()),
            Tracked::Upper,
            10,
            &[3, 2],
            1
        )
        .is_err());
    }

    #[test]
    fn deterministic_declines_keep_lower_process_at_zero() {
        let i = inst(50, vec![50, 0], vec![1.0, 0.0], AcceptanceCurve::linear(1.0).unwrap());
        let tr = run_episode(&i, &mut DynUp2::new(&i).unwrap(), 3).unwrap();
        let xs = process_path(&i, &tr, Tracked::Lower);
        assert!(xs.iter().all(|&x| x.abs() < 1e-12), "{xs:?}");
    }

    #[test]
    fn never_depleting_paths_use_the_sentinel() {
        let i = inst(40, vec![30, 2], vec![0.2, 0.6], AcceptanceCurve::exponential_power(2.33, 1.0).unwrap());
        let r = stopping_time_diagnostics(&i, 50, 0.05, 2).unwrap();
        assert_eq!(r.never_depleted, 50);
        assert!((r.mean_tau_over_t - 41.0 / 40.0).abs() < 1e-12);
        let total: usize = r.histogram.iter().map(|h| h.1).sum();
        assert_eq!(total, 50);
    }

    #[test]
    fn abundance_with_interior_optimum_has_no_pricing_loss() {
        let c = AcceptanceCurve::exponential_power(2.33, 1.0).unwrap();
        let i = inst(200, vec![400, 400], vec![0.4, 0.3], c);
        let e = pricing_loss_diagnostics(&i, 200, 4).unwrap();
        assert!(e.mean.abs() < 1e-12 && e.se < 1e-12, "{e:?}");
    }

    #[test]
    fn pricing_loss_terms_are_non_negative_at_the_global_maximizer() {
        let c = AcceptanceCurve::exponential_power(4.4853, 0.9889).unwrap();
        let best_grid = crate::domain::grid(c.floor(), 1.0, 10_001)
            .into_iter()
            .map(|v| c.revenue_of(v))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(c.revenue_of(c.v_star()) >= best_grid - 1e-12);
        let i = inst(300, vec![500, 500], vec![0.3, 0.3], c);
        let tr = run_episode(&i, &mut DynUp2::new(&i).unwrap(), 8).unwrap();
        assert!(pricing_loss_path(&i, &tr) >= -1e-12);
    }
}
