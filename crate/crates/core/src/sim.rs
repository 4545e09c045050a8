//! Discrete-time episode simulator.
//!
//! Each period consumes exactly two uniforms from the episode stream, the
//! arrival draw and then the acceptance draw, whether or not an offer is
//! made. Two policies run on the same seed therefore see the same arrivals
//! and the same acceptance uniforms period by period.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ArrivalModel, Instance};
use crate::error::{Error, Result};
use crate::hybrid::CountVector;
use crate::policy::{Decision, Policy};

/// Version tag written on the first line of trace CSV files.
pub const TRACE_CSV_VERSION: &str = "# dynup-trace v1";

/// Column header of trace CSV files (types are 1-based, `none` for no arrival).
pub const TRACE_CSV_HEADER: &str = "t,arrival,decision,price,accept_prob,upgrade_accepted,consumed,revenue";

/// Deterministic per-episode random stream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Categorical draw over `(lambda_1, ..., lambda_n, lambda_0)`; `None` is
/// the no-arrival outcome. Types are 0-based.
pub fn sample_arrival<R: Rng + ?Sized>(rng: &mut R, arrivals: &ArrivalModel) -> Option<usize> {
    arrival_from_uniform(rng.random::<f64>(), arrivals)
}

/// Inverse-CDF form of [`sample_arrival`] for a given uniform in `[0, 1)`.
pub fn arrival_from_uniform(u: f64, arrivals: &ArrivalModel) -> Option<usize> {
    let mut acc = 0.0;
    for (i, &l) in arrivals.rates().iter().enumerate() {
        acc += l;
        if u < acc {
            return Some(i);
        }
    }
    None
}

/// One simulated period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: usize,
    pub arrival: Option<usize>,
    pub decision: Decision,
    /// `Some` only when an offer was made.
    pub upgrade_accepted: Option<bool>,
    /// Type whose unit was consumed, if any.
    pub consumed: Option<usize>,
    pub revenue: f64,
}

/// Per-episode totals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub policy: String,
    pub horizon: usize,
    pub total_revenue: f64,
    pub base_revenue: f64,
    pub upgrade_revenue: f64,
    /// Realized arrival counts per type.
    pub counts: Vec<u32>,
    pub initial: Vec<u32>,
    pub consumed: Vec<u32>,
    pub remaining: Vec<u32>,
    /// First period at whose end a type's stock is zero; `T + 1` if never
    /// depleted, `1` if it starts empty.
    pub depletion: Vec<usize>,
    pub offers: u32,
    pub upgrades_sold: u32,
    pub free_upgrades: u32,
}

/// Result of one episode. `records` is empty for summary-only runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub records: Vec<PeriodRecord>,
    pub summary: EpisodeSummary,
}

/// Source of arrivals for an episode.
#[derive(Clone, Copy, Debug)]
pub enum Arrivals<'a> {
    Sampled,
    /// Explicit 0-based sequence of length `T`.
    Given(&'a [Option<usize>]),
}

/// Runs one episode and keeps the full trace.
pub fn run_episode(inst: &Instance, policy: &mut dyn Policy, seed: u64) -> Result<EpisodeTrace> {
    simulate(inst, policy, seed, Arrivals::Sampled, true)
}

/// Runs one episode and keeps only the summary.
pub fn run_episode_summary(inst: &Instance, policy: &mut dyn Policy, seed: u64) -> Result<EpisodeSummary> {
    Ok(simulate(inst, policy, seed, Arrivals::Sampled, false)?.summary)
}

/// Runs one episode with the given arrival source.
///
/// Acceptance uniforms come from `seed` in either case, so a given arrival
/// sequence replayed with the same seed reproduces a sampled episode.
pub fn simulate(
    inst: &Instance,
    policy: &mut dyn Policy,
    seed: u64,
    arrivals: Arrivals<'_>,
    keep_records: bool,
) -> Result<EpisodeTrace> {
    let n = inst.n_types();
    let horizon = inst.horizon();
    if let Arrivals::Given(seq) = arrivals {
        if seq.len() != horizon {
            return Err(Error::InvalidInstance(format!(
                "arrival sequence has {} periods, horizon is {horizon}",
                seq.len()
            )));
        }
        if let Some(bad) = seq.iter().flatten().find(|&&i| i >= n) {
            return Err(Error::InvalidInstance(format!("arrival type {bad} out of range")));
        }
    }

    let mut rng = RngStream::new(seed);
    let mut remaining = inst.capacities().to_vec();
    let mut s = EpisodeSummary {
        seed,
        policy: policy.name(),
        horizon,
        total_revenue: 0.0,
        base_revenue: 0.0,
        upgrade_revenue: 0.0,
        counts: vec![0; n],
        initial: remaining.clone(),
        consumed: vec![0; n],
        remaining: Vec::new(),
        depletion: remaining
            .iter()
            .map(|&c| if c == 0 { 1 } else { horizon + 1 })
            .collect(),
        offers: 0,
        upgrades_sold: 0,
        free_upgrades: 0,
    };
    let mut records = Vec::with_capacity(if keep_records { horizon } else { 0 });

    for t in 1..=horizon {
        let u_arrival = rng.uniform();
        let u_accept = rng.uniform();
        let arrival = match arrivals {
            Arrivals::Sampled => arrival_from_uniform(u_arrival, inst.arrivals()),
            Arrivals::Given(seq) => seq[t - 1],
        };
        let decision = policy.decide(t, arrival, &remaining);

        let mut upgrade_accepted = None;
        let mut consumed = None;
        let mut revenue = 0.0;
        match arrival {
            None => {
                if decision != Decision::Reject {
                    return Err(Error::Invariant {
                        t,
                        detail: format!("policy returned {decision:?} with no arrival"),
                    });
                }
            }
            Some(i) => {
                s.counts[i] += 1;
                let r_i = inst.ladder().price(i);
                let upgrade_target = || {
                    if i + 1 < n {
                        Ok(i + 1)
                    } else {
                        Err(Error::Invariant {
                            t,
                            detail: format!("upgrade offered to top type {}", i + 1),
                        })
                    }
                };
                match decision {
                    Decision::Reject => {}
                    Decision::AcceptNoOffer => {
                        consumed = Some(i);
                        revenue = r_i;
                        s.base_revenue += r_i;
                    }
                    Decision::AcceptWithOffer { price, v } => {
                        let j = upgrade_target()?;
                        if remaining[i] == 0 {
                            return Err(Error::Invariant {
                                t,
                                detail: format!("offer made without type {} stock", i + 1),
                            });
                        }
                        s.offers += 1;
                        let took = u_accept < v;
                        upgrade_accepted = Some(took);
                        s.base_revenue += r_i;
                        if took {
                            consumed = Some(j);
                            revenue = r_i + price;
                            s.upgrade_revenue += price;
                            s.upgrades_sold += 1;
                        } else {
                            consumed = Some(i);
                            revenue = r_i;
                        }
                    }
                    Decision::AcceptFreeUpgrade => {
                        consumed = Some(upgrade_target()?);
                        revenue = r_i;
                        s.base_revenue += r_i;
                        s.free_upgrades += 1;
                    }
                }
                if let Some(k) = consumed {
                    if remaining[k] == 0 {
                        return Err(Error::Invariant {
                            t,
                            detail: format!("type {} stock would go negative", k + 1),
                        });
                    }
                    remaining[k] -= 1;
                    s.consumed[k] += 1;
                    if remaining[k] == 0 {
                        s.depletion[k] = t + 1;
                    }
                }
                policy.record(i, &decision, upgrade_accepted == Some(true));
            }
        }
        s.total_revenue += revenue;
        if keep_records {
            records.push(PeriodRecord {
                t,
                arrival,
                decision,
                upgrade_accepted,
                consumed,
                revenue,
            });
        }
    }
    s.remaining = remaining;
    let trace = EpisodeTrace { records, summary: s };
    trace.check_invariants()?;
    Ok(trace)
}

impl EpisodeTrace {
    /// Capacity conservation, count and revenue identities.
    pub fn check_invariants(&self) -> Result<()> {
        let s = &self.summary;
        let t = s.horizon;
        for k in 0..s.initial.len() {
            if s.consumed[k] + s.remaining[k] != s.initial[k] || s.consumed[k] > s.initial[k] {
                return Err(Error::Invariant {
                    t,
                    detail: format!("type {} conservation broken", k + 1),
                });
            }
        }
        let arrivals: u32 = s.counts.iter().sum();
        if arrivals as usize > s.horizon {
            return Err(Error::Invariant {
                t,
                detail: "more arrivals than periods".into(),
            });
        }
        let identity = s.base_revenue + s.upgrade_revenue;
        if (identity - s.total_revenue).abs() > 1e-9 * (1.0 + s.total_revenue.abs()) {
            return Err(Error::Invariant {
                t,
                detail: format!("revenue identity: {identity} != {}", s.total_revenue),
            });
        }
        if !self.records.is_empty() {
            let mut consumed = vec![0u32; s.initial.len()];
            let mut counts = vec![0u32; s.initial.len()];
            let mut total = 0.0;
            for r in &self.records {
                if let Some(k) = r.consumed {
                    consumed[k] += 1;
                }
                if let Some(i) = r.arrival {
                    counts[i] += 1;
                }
                total += r.revenue;
            }
            if consumed != s.consumed || counts != s.counts {
                return Err(Error::Invariant {
                    t,
                    detail: "records disagree with summary".into(),
                });
            }
            if (total - s.total_revenue).abs() > 1e-9 * (1.0 + total.abs()) {
                return Err(Error::Invariant {
                    t,
                    detail: "per-period revenue does not add up".into(),
                });
            }
        }
        Ok(())
    }

    pub fn realized_counts(&self) -> CountVector {
        self.summary.realized_counts()
    }

    /// Stock at the start of each period `t = 1..=T+1`.
    pub fn remaining_path(&self) -> Vec<Vec<u32>> {
        let mut cur = self.summary.initial.clone();
        let mut path = Vec::with_capacity(self.records.len() + 1);
        path.push(cur.clone());
        for r in &self.records {
            if let Some(k) = r.consumed {
                cur[k] -= 1;
            }
            path.push(cur.clone());
        }
        path
    }

    /// Trace as versioned CSV text.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.records.len() + 2));
        out.push_str(TRACE_CSV_VERSION);
        out.push('\n');
        out.push_str(TRACE_CSV_HEADER);
        out.push('\n');
        let opt = |x: Option<usize>| x.map_or("none".to_string(), |i| (i + 1).to_string());
        for r in &self.records {
            let (price, v) = match r.decision {
                Decision::AcceptWithOffer { price, v } => (fmt9(price), fmt9(v)),
                _ => (String::new(), String::new()),
            };
            let took = r.upgrade_accepted.map_or(String::new(), |b| b.to_string());
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.t,
                opt(r.arrival),
                r.decision.label(),
                price,
                v,
                took,
                opt(r.consumed),
                fmt9(r.revenue)
            ));
        }
        out
    }

    /// Summary as pretty JSON with numbers rounded to 9 significant digits.
    pub fn summary_json(&self) -> String {
        let mut s = self.summary.clone();
        s.total_revenue = round9(s.total_revenue);
        s.base_revenue = round9(s.base_revenue);
        s.upgrade_revenue = round9(s.upgrade_revenue);
        serde_json::to_string_pretty(&s).expect("summary serializes")
    }
}

impl EpisodeSummary {
    pub fn realized_counts(&self) -> CountVector {
        CountVector::from_integers(&self.counts)
    }
}

/// `x` printed with 9 significant digits.
pub fn fmt9(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { x.to_string() };
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        let decimals = (8 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.8e}")
    }
}

/// `x` rounded to 9 significant digits.
pub fn round9(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{AcceptanceCurve, PriceLadder};
    use crate::policy::{DynUp2, RejectAll};

    fn two(horizon: usize, c: Vec<u32>, l: Vec<f64>) -> Instance {
        Instance::new(
            horizon,
            c,
            PriceLadder::new(vec![1.0, 2.0]).unwrap(),
            ArrivalModel::new(l).unwrap(),
            vec![AcceptanceCurve::exponential_power(1.0, 1.0).unwrap()],
        )
        .unwrap()
    }

    #[test]
    fn arrival_draws() {
        let single = ArrivalModel::new(vec![1.0]).unwrap();
        let none = ArrivalModel::new(vec![0.0, 0.0]).unwrap();
        let mut rng = RngStream::new(3).rng;
        for _ in 0..1000 {
            assert_eq!(sample_arrival(&mut rng, &single), Some(0));
            assert_eq!(sample_arrival(&mut rng, &none), None);
        }
    }

    #[test]
    fn premium_only_single_period() {
        let inst = two(1, vec![1, 1], vec![0.0, 1.0]);
        let tr = run_episode(&inst, &mut DynUp2::new(&inst).unwrap(), 1).unwrap();
        assert_eq!(tr.summary.total_revenue, 2.0);
        assert_eq!(tr.summary.consumed, vec![0, 1]);
    }

    #[test]
    fn declined_upgrade_pays_base() {
        let inst = two(1, vec![1, 1], vec![1.0, 0.0]);
        // find a seed whose acceptance uniform exceeds v
        let mut seen_decline = false;
        let mut seen_accept = false;
        for seed in 0..64 {
            let tr = run_episode(&inst, &mut DynUp2::new(&inst).unwrap(), seed).unwrap();
            let r = &tr.records[0];
            let Decision::AcceptWithOffer { price, v } = r.decision else {
                panic!("expected an offer");
            };
            let mut rng = RngStream::new(seed);
            rng.uniform();
            let u = rng.uniform();
            assert_eq!(r.upgrade_accepted, Some(u < v));
            if u < v {
                seen_accept = true;
                assert_eq!(tr.summary.consumed, vec![0, 1]);
                assert!((tr.summary.total_revenue - (1.0 + price)).abs() < 1e-12);
            } else {
                seen_decline = true;
                assert_eq!(tr.summary.consumed, vec![1, 0]);
                assert_eq!(tr.summary.total_revenue, 1.0);
            }
        }
        assert!(seen_accept && seen_decline);
    }

    #[test]
    fn zero_capacity_rejects_everything() {
        let inst = two(50, vec![0, 0], vec![0.4, 0.4]);
        let tr = run_episode(&inst, &mut DynUp2::new(&inst).unwrap(), 9).unwrap();
        assert_eq!(tr.summary.total_revenue, 0.0);
        assert!(tr.records.iter().all(|r| r.decision == Decision::Reject));
        assert_eq!(tr.summary.depletion, vec![1, 1]);
    }

    #[test]
    fn counts_from_given_sequence() {
        let inst = two(10, vec![5, 5], vec![0.3, 0.3]);
        let mut seq = vec![None; 10];
        seq[0] = Some(0);
        seq[1] = Some(0);
        seq[2] = Some(1);
        let tr = simulate(&inst, &mut RejectAll, 4, Arrivals::Given(&seq), true).unwrap();
        assert_eq!(tr.realized_counts().as_slice(), &[2.0, 1.0]);
        let tr = simulate(&inst, &mut RejectAll, 4, Arrivals::Given(&[None; 10]), true).unwrap();
        assert_eq!(tr.realized_counts().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn replaying_sampled_arrivals_reproduces_the_trace() {
        let inst = two(80, vec![10, 12], vec![0.3, 0.2]);
        let a = run_episode(&inst, &mut DynUp2::new(&inst).unwrap(), 77).unwrap();
        let seq: Vec<_> = a.records.iter().map(|r| r.arrival).collect();
        let b = simulate(&inst, &mut DynUp2::new(&inst).unwrap(), 77, Arrivals::Given(&seq), true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        let path = a.remaining_path();
        assert_eq!(path.len(), 81);
        assert_eq!(path[80], a.summary.remaining);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt9(0.0), "0");
        assert_eq!(fmt9(1.0), "1.00000000");
        assert_eq!(fmt9(123.456), "123.456000");
        assert_eq!(fmt9(-0.000123456789012), "-0.000123456789");
        assert_eq!(fmt9(1.5e20), "1.50000000e20");
        assert_eq!(round9(1.0 / 3.0), 0.333333333);
    }
}
