//! Synthetic hotel study: DynUp-n against a fixed-price first-come
//! first-served baseline on permuted daily request sequences.
//!
//! A day is a multiset of requests per room type. Each replication places
//! the requests at random positions of a horizon of `horizon_factor` times
//! the day's request count (remaining periods are empty), perturbs the
//! rates DynUp-n is given, and runs both policies on the same sequence and
//! the same acceptance uniforms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{neumaier_sum, paired_t_test_greater, Summary, TTest};
use super::{par_reps, rep_seed, LongRow};
use crate::domain::{AcceptanceCurve, ArrivalModel, CurveFamily, Instance, PriceLadder};
use crate::error::{Error, Result};
use crate::policy::{DynUpN, StaticPrice};
use crate::sim::{simulate, Arrivals};

/// Requests per room type on one day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayProfile {
    pub day: usize,
    pub requests: Vec<u32>,
}

impl DayProfile {
    pub fn total(&self) -> u32 {
        self.requests.iter().sum()
    }
}

/// Study settings; fields missing from a config file take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HotelConfig {
    pub capacities: Vec<u32>,
    pub prices: Vec<f64>,
    pub curves: Vec<CurveFamily>,
    /// Baseline upgrade proportion, one value or one per edge.
    pub static_proportions: Vec<f64>,
    pub permutations: usize,
    /// `T = ceil(horizon_factor * total requests)`.
    pub horizon_factor: f64,
    /// Days with more total requests than this are high-demand days.
    pub high_demand_threshold: u32,
    pub base_seed: u64,
    pub days: Vec<DayProfile>,
}

impl Default for HotelConfig {
    fn default() -> Self {
        Self {
            capacities: vec![60, 30, 2],
            prices: vec![100.0, 140.0, 200.0],
            curves: vec![
                CurveFamily::ExponentialPower { a: 4.4853, b: 0.9889 },
                CurveFamily::ExponentialPower { a: 2.33, b: 1.0 },
            ],
            static_proportions: vec![0.45],
            permutations: 100,
            horizon_factor: 2.0,
            high_demand_threshold: 92,
            base_seed: 20_221_101,
            days: generate_profiles(30, &[0.6, 0.32, 0.08], 40, 140, 2022),
        }
    }
}

/// `n_days` profiles with totals uniform on `[min_total, max_total]` split
/// multinomially by `shares`.
pub fn generate_profiles(n_days: usize, shares: &[f64], min_total: u32, max_total: u32, seed: u64) -> Vec<DayProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let norm: f64 = shares.iter().sum();
    (0..n_days)
        .map(|day| {
            let total = rng.random_range(min_total..=max_total);
            let mut requests = vec![0u32; shares.len()];
            for _ in 0..total {
                let u = rng.random::<f64>() * norm;
                let mut acc = 0.0;
                let mut pick = shares.len() - 1;
                for (i, s) in shares.iter().enumerate() {
                    acc += s;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                requests[pick] += 1;
            }
            DayProfile { day: day + 1, requests }
        })
        .collect()
}

/// Rates `Unif(Lambda_i - sqrt(Lambda_i), Lambda_i + sqrt(Lambda_i)) / T`,
/// clipped at zero and rescaled if they would sum past one.
pub fn noisy_rates<R: Rng + ?Sized>(rng: &mut R, requests: &[u32], horizon: usize) -> Vec<f64> {
    let t = horizon as f64;
    let mut rates: Vec<f64> = requests
        .iter()
        .map(|&l| {
            let l = f64::from(l);
            let half = l.sqrt();
            let draw = if half > 0.0 { rng.random_range(l - half..l + half) } else { l };
            (draw / t).max(0.0)
        })
        .collect();
    let sum: f64 = rates.iter().sum();
    if sum > 1.0 {
        rates.iter_mut().for_each(|r| *r /= sum);
    }
    rates
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DayResult {
    pub day: usize,
    pub requests: Vec<u32>,
    pub high_demand: bool,
    pub static_mean: f64,
    pub dynupn_mean: f64,
    /// `None` when the baseline earns nothing.
    pub improvement_pct: Option<f64>,
    pub diff_mean: f64,
    pub diff_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HotelReport {
    pub base_seed: u64,
    pub days: Vec<DayResult>,
    pub aggregate_improvement_pct: Option<f64>,
    pub high_demand_improvement_pct: Option<f64>,
    /// Paired test pooled over all permutations of high-demand days.
    pub high_demand_test: TTest,
}

impl HotelReport {
    pub fn rows(&self) -> Vec<LongRow> {
        let mut rows = Vec::new();
        for d in &self.days {
            let exp = format!("hotel:day{}", d.day);
            rows.push(LongRow::new(&exp, 0, "static_mean", d.static_mean));
            rows.push(LongRow::new(&exp, 0, "dynupn_mean", d.dynupn_mean));
            rows.push(LongRow::new(&exp, 0, "diff_se", d.diff_se));
            if let Some(p) = d.improvement_pct {
                rows.push(LongRow::new(&exp, 0, "improvement_pct", p));
            }
        }
        if let Some(p) = self.aggregate_improvement_pct {
            rows.push(LongRow::new("hotel", 0, "aggregate_improvement_pct", p));
        }
        if let Some(p) = self.high_demand_improvement_pct {
            rows.push(LongRow::new("hotel", 0, "high_demand_improvement_pct", p));
        }
        rows.push(LongRow::new("hotel", 0, "high_demand_t", self.high_demand_test.t));
        rows.push(LongRow::new("hotel", 0, "high_demand_p_value", self.high_demand_test.p_value));
        rows
    }

    /// Columns `day total static dynupn` for plotting tools.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# day total_requests static_mean dynupn_mean\n");
        for d in &self.days {
            out.push_str(&format!(
                "{} {} {} {}\n",
                d.day,
                d.requests.iter().sum::<u32>(),
                crate::sim::fmt9(d.static_mean),
                crate::sim::fmt9(d.dynupn_mean)
            ));
        }
        out
    }
}

fn improvement(dyn_total: f64, static_total: f64) -> Option<f64> {
    (static_total > 0.0).then(|| 100.0 * (dyn_total - static_total) / static_total)
}

/// Paired revenues `(static, dynupn)` for each permutation of one day.
pub fn run_day(cfg: &HotelConfig, day: &DayProfile) -> Result<Vec<(f64, f64)>> {
    let n = cfg.capacities.len();
    if day.requests.len() != n {
        return Err(Error::Config(format!(
            "day {} lists {} request counts for {n} room types",
            day.day,
            day.requests.len()
        )));
    }
    let total = day.total();
    if total == 0 {
        return Ok(vec![(0.0, 0.0); cfg.permutations]);
    }
    let horizon = (cfg.horizon_factor * f64::from(total)).ceil().max(f64::from(total)) as usize;
    let curves = cfg
        .curves
        .iter()
        .map(|&f| AcceptanceCurve::new(f))
        .collect::<Result<Vec<_>>>()?;
    let ladder = PriceLadder::new(cfg.prices.clone())?;
    let mut base: Vec<Option<usize>> = day
        .requests
        .iter()
        .enumerate()
        .flat_map(|(i, &k)| std::iter::repeat_n(Some(i), k as usize))
        .collect();
    base.resize(horizon, None);
    let stream = day.day as u64;

    par_reps(cfg.permutations, |k| -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(rep_seed(cfg.base_seed, 2 * stream + 1, k as u64));
        let mut seq = base.clone();
        seq.shuffle(&mut rng);
        let rates = noisy_rates(&mut rng, &day.requests, horizon);
        let inst = Instance::new(
            horizon,
            cfg.capacities.clone(),
            ladder.clone(),
            ArrivalModel::new(rates)?,
            curves.clone(),
        )?;
        let seed = rep_seed(cfg.base_seed, 2 * stream, k as u64);
        let mut baseline = StaticPrice::new(&inst, cfg.static_proportions.clone())?;
        let mut dynup = DynUpN::new(&inst)?;
        let a = simulate(&inst, &mut baseline, seed, Arrivals::Given(&seq), false)?;
        let b = simulate(&inst, &mut dynup, seed, Arrivals::Given(&seq), false)?;
        Ok((a.summary.total_revenue, b.summary.total_revenue))
    })
    .into_iter()
    .collect()
}

pub fn hotel_study(cfg: &HotelConfig) -> Result<HotelReport> {
    if cfg.permutations < 2 {
        return Err(Error::Config("hotel study needs at least 2 permutations".into()));
    }
    let mut days = Vec::with_capacity(cfg.days.len());
    let mut pooled = Vec::new();
    let (mut all_s, mut all_d, mut hd_s, mut hd_d) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for day in &cfg.days {
        let pairs = run_day(cfg, day)?;
        let s: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let d: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let diffs: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
        let high = day.total() > cfg.high_demand_threshold;
        let (ms, md) = (Summary::of(&s).mean, Summary::of(&d).mean);
        let ds = Summary::of(&diffs);
        all_s.push(ms);
        all_d.push(md);
        if high {
            hd_s.push(ms);
            hd_d.push(md);
            pooled.extend_from_slice(&diffs);
        }
        days.push(DayResult {
            day: day.day,
            requests: day.requests.clone(),
            high_demand: high,
            static_mean: ms,
            dynupn_mean: md,
            improvement_pct: improvement(md, ms),
            diff_mean: ds.mean,
            diff_se: ds.se,
        });
    }
    Ok(HotelReport {
        base_seed: cfg.base_seed,
        days,
        aggregate_improvement_pct: improvement(neumaier_sum(all_d), neumaier_sum(all_s)),
        high_demand_improvement_pct: improvement(neumaier_sum(hd_d), neumaier_sum(hd_s)),
        high_demand_test: paired_t_test_greater(&pooled),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_demand_day_is_not_applicable() {
        let cfg = HotelConfig {
            days: vec![DayProfile { day: 1, requests: vec![0, 0, 0] }],
            permutations: 5,
            ..HotelConfig::default()
        };
        let r = hotel_study(&cfg).unwrap();
        assert_eq!(r.days[0].static_mean, 0.0);
        assert_eq!(r.days[0].dynupn_mean, 0.0);
        assert_eq!(r.days[0].improvement_pct, None);
        assert_eq!(r.aggregate_improvement_pct, None);
    }

    #[test]
    fn light_day_matches_the_abundance_formula() {
        // only type-1 requests, far below capacity: DynUp-n prices at v*
        let cfg = HotelConfig {
            days: vec![DayProfile { day: 1, requests: vec![10, 0, 0] }],
            permutations: 4000,
            ..HotelConfig::default()
        };
        let r = hotel_study(&cfg).unwrap();
        let c = AcceptanceCurve::exponential_power(4.4853, 0.9889).unwrap();
        let v_fixed = c.prob_of(0.45);
        let hand = 10.0 * (c.revenue_of(c.v_star()) - c.revenue_of(v_fixed)) * 40.0;
        let d = &r.days[0];
        assert!((d.diff_mean - hand).abs() <= 3.0 * d.diff_se, "{} vs {hand} (se {})", d.diff_mean, d.diff_se);
    }

    #[test]
    fn profiles_and_noise_are_deterministic() {
        let a = generate_profiles(10, &[0.6, 0.32, 0.08], 40, 140, 7);
        assert_eq!(a, generate_profiles(10, &[0.6, 0.32, 0.08], 40, 140, 7));
        assert!(a.iter().all(|d| (40..=140).contains(&d.total())));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = noisy_rates(&mut rng, &[16, 9, 0], 100);
        assert!((0.12..0.20).contains(&r[0]) && (0.06..0.12).contains(&r[1]) && r[2] == 0.0);
    }
}
