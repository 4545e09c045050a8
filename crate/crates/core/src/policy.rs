//! Online decision rules.
//!
//! [`dynup2_decide`] is the two-type rule: type-2 requests are taken while
//! premium stock lasts, type-1 requests are taken with an upgrade offer
//! priced by the per-period re-solve of the hybrid program, and once the
//! basic resource is gone type-1 requests get a free upgrade only if the
//! premium surplus over expected premium demand exceeds half the expected
//! remaining type-1 demand. [`DynUpN`] runs that rule on every adjacent
//! pair against capacity ledgers fixed at `t = 1`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{AcceptanceCurve, Instance};
use crate::error::{Error, Result};
use crate::hybrid::{closed_form_v, solve_ntype, CountVector};

/// What the supplier does with one period's request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Reject,
    /// Allocate the requested type, no upgrade offer.
    AcceptNoOffer,
    /// Allocate and offer the next type for `price` (currency); the
    /// requester takes it with probability `v`.
    AcceptWithOffer { price: f64, v: f64 },
    /// Allocate the next type at the requested type's price.
    AcceptFreeUpgrade,
}

impl Decision {
    pub fn label(&self) -> &'static str {
        match self {
            Decision::Reject => "reject",
            Decision::AcceptNoOffer => "accept",
            Decision::AcceptWithOffer { .. } => "offer",
            Decision::AcceptFreeUpgrade => "free_upgrade",
        }
    }

    pub fn is_accept(&self) -> bool {
        !matches!(self, Decision::Reject)
    }
}

/// Arrival seen by a two-type rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairArrival {
    Basic,
    Premium,
}

/// State of a two-type rule at the start of period `t` (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairState {
    pub t: usize,
    pub c1: u32,
    pub c2: u32,
}

/// Static inputs of a two-type rule.
#[derive(Clone, Copy, Debug)]
pub struct PairParams<'a> {
    pub horizon: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub curve: &'a AcceptanceCurve,
    /// `r2 - r1`, converts proportions to currency.
    pub gap: f64,
}

impl PairParams<'_> {
    fn remaining_periods(&self, t: usize) -> f64 {
        (self.horizon + 1 - t) as f64
    }
}

/// Upgrade price for period `t`: the clamped hybrid-program probability
/// and its proportion `min{max{p(v), 0}, 1}`. Returns `(proportion, v)`.
///
/// Needs `lambda1 > 0`; callers gate availability (`c1, c2 >= 1`).
pub fn optimal_upgrade_price(state: PairState, params: &PairParams<'_>) -> (f64, f64) {
    let s = params.remaining_periods(state.t);
    let raw = closed_form_v(
        params.lambda1 * s,
        params.lambda2 * s,
        f64::from(state.c1),
        f64::from(state.c2),
        params.curve.v_star(),
    );
    let v = params.curve.clamp_prob(raw);
    (params.curve.price_of(v), v)
}

/// The DynUp-2 decision for one period.
pub fn dynup2_decide(state: PairState, arrival: Option<PairArrival>, params: &PairParams<'_>) -> Decision {
    match arrival {
        None => Decision::Reject,
        Some(PairArrival::Premium) => {
            if state.c2 >= 1 {
                Decision::AcceptNoOffer
            } else {
                Decision::Reject
            }
        }
        Some(PairArrival::Basic) if state.c1 >= 1 => {
            if state.c2 >= 1 && params.lambda1 > 0.0 {
                let (x, v) = optimal_upgrade_price(state, params);
                Decision::AcceptWithOffer {
                    price: x * params.gap,
                    v,
                }
            } else {
                Decision::AcceptNoOffer
            }
        }
        Some(PairArrival::Basic) => {
            let s = params.remaining_periods(state.t);
            let surplus = (f64::from(state.c2) - params.lambda2 * s).max(0.0);
            if state.c2 >= 1 && surplus > 0.5 * params.lambda1 * s {
                Decision::AcceptFreeUpgrade
            } else {
                Decision::Reject
            }
        }
    }
}

/// A policy driven by the simulator.
///
/// `arrival` and the indices in `remaining` are 0-based types; `t` runs
/// from 1 to `T`.
pub trait Policy: Send {
    fn name(&self) -> String;

    fn decide(&mut self, t: usize, arrival: Option<usize>, remaining: &[u32]) -> Decision;

    /// Outcome of the period's decision, after consumption.
    fn record(&mut self, _arrival: usize, _decision: &Decision, _upgraded: bool) {}
}

/// DynUp-2 on a two-type instance.
#[derive(Clone, Debug)]
pub struct DynUp2 {
    horizon: usize,
    lambda1: f64,
    lambda2: f64,
    curve: AcceptanceCurve,
    gap: f64,
}

impl DynUp2 {
    pub fn new(inst: &Instance) -> Result<Self> {
        if inst.n_types() != 2 {
            return Err(Error::InvalidInstance(format!(
                "dynup2 needs exactly two types, got {}",
                inst.n_types()
            )));
        }
        Ok(Self {
            horizon: inst.horizon(),
            lambda1: inst.arrivals().rate(0),
            lambda2: inst.arrivals().rate(1),
            curve: inst.curve(0).clone(),
            gap: inst.ladder().gap(0),
        })
    }

    pub fn params(&self) -> PairParams<'_> {
        PairParams {
            horizon: self.horizon,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            curve: &self.curve,
            gap: self.gap,
        }
    }

    /// Decision as a function of `(t, c1, c2, arrival)` only.
    pub fn rule(&self, t: usize, c1: u32, c2: u32, arrival: Option<PairArrival>) -> Decision {
        dynup2_decide(PairState { t, c1, c2 }, arrival, &self.params())
    }
}

impl Policy for DynUp2 {
    fn name(&self) -> String {
        "dynup2".into()
    }

    fn decide(&mut self, t: usize, arrival: Option<usize>, remaining: &[u32]) -> Decision {
        let arrival = arrival.map(|i| {
            if i == 0 {
                PairArrival::Basic
            } else {
                PairArrival::Premium
            }
        });
        self.rule(t, remaining[0], remaining[1], arrival)
    }
}

/// Capacity partition used by DynUp-n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Capacity serving direct demand of each type.
    pub base: Vec<u32>,
    /// Capacity of each type reserved for upgrades from the type below.
    pub surplus: Vec<u32>,
    /// `v^H` per edge with a trailing `0` for the top type.
    pub v_h: Vec<f64>,
    /// Real-valued protection levels before flooring.
    pub protection: Vec<f64>,
}

/// Computes the DynUp-n partition from expected counts `lambda_i T`:
/// type `i+1` protects `(c_{i+1} - lambda_{i+1} T / (1 - v^H_{i+1}))^+`
/// units (floored to whole units) for upgrades from type `i`.
pub fn dynupn_init(inst: &Instance) -> Result<Partition> {
    let n = inst.n_types();
    let t = inst.horizon() as f64;
    let caps: Vec<f64> = inst.capacities().iter().map(|&c| f64::from(c)).collect();
    let counts = CountVector::expected(inst.arrivals().rates(), t);
    let sol = solve_ntype(&counts, &caps, inst.ladder().as_slice(), inst.curves())?;
    let mut v_h: Vec<f64> = sol.pairs.iter().map(|p| p.v_opt).collect();
    v_h.push(0.0);

    let mut protection = vec![0.0; n];
    let mut surplus = vec![0u32; n];
    for i in 1..n {
        let li = counts.get(i);
        let p = if v_h[i] >= 1.0 {
            (caps[i] - li).max(0.0)
        } else {
            (caps[i] - li / (1.0 - v_h[i])).max(0.0)
        };
        protection[i] = p;
        surplus[i] = (p.floor() as u32).min(inst.capacity(i));
    }
    let base = inst
        .capacities()
        .iter()
        .zip(&surplus)
        .map(|(&c, &s)| c - s)
        .collect();
    Ok(Partition {
        base,
        surplus,
        v_h,
        protection,
    })
}

/// DynUp-n: DynUp-2 on each adjacent pair against fixed ledgers.
#[derive(Clone, Debug)]
pub struct DynUpN {
    horizon: usize,
    rates: Vec<f64>,
    curves: Vec<AcceptanceCurve>,
    gaps: Vec<f64>,
    partition: Partition,
    base: Vec<u32>,
    surplus: Vec<u32>,
}

impl DynUpN {
    pub fn new(inst: &Instance) -> Result<Self> {
        let partition = dynupn_init(inst)?;
        Ok(Self {
            horizon: inst.horizon(),
            rates: inst.arrivals().rates().to_vec(),
            curves: inst.curves().to_vec(),
            gaps: (0..inst.n_types() - 1).map(|i| inst.ladder().gap(i)).collect(),
            base: partition.base.clone(),
            surplus: partition.surplus.clone(),
            partition,
        })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn base(&self) -> &[u32] {
        &self.base
    }

    pub fn surplus(&self) -> &[u32] {
        &self.surplus
    }

    /// Sub-instance of edge `i -> i+1`: rates `(lambda_i, 0)`.
    fn pair_params(&self, i: usize) -> PairParams<'_> {
        PairParams {
            horizon: self.horizon,
            lambda1: self.rates[i],
            lambda2: 0.0,
            curve: &self.curves[i],
            gap: self.gaps[i],
        }
    }

    pub fn dynupn_decide(&self, t: usize, arrival: Option<usize>) -> Decision {
        let n = self.base.len();
        match arrival {
            None => Decision::Reject,
            Some(i) if i == n - 1 => {
                if self.base[i] >= 1 {
                    Decision::AcceptNoOffer
                } else {
                    Decision::Reject
                }
            }
            Some(i) => {
                let state = PairState {
                    t,
                    c1: self.base[i],
                    c2: self.surplus[i + 1],
                };
                dynup2_decide(state, Some(PairArrival::Basic), &self.pair_params(i))
            }
        }
    }
}

impl Policy for DynUpN {
    fn name(&self) -> String {
        "dynupn".into()
    }

    fn decide(&mut self, t: usize, arrival: Option<usize>, _remaining: &[u32]) -> Decision {
        self.dynupn_decide(t, arrival)
    }

    fn record(&mut self, arrival: usize, decision: &Decision, upgraded: bool) {
        match decision {
            Decision::Reject => {}
            Decision::AcceptNoOffer => self.base[arrival] -= 1,
            Decision::AcceptWithOffer { .. } if upgraded => self.surplus[arrival + 1] -= 1,
            Decision::AcceptWithOffer { .. } => self.base[arrival] -= 1,
            Decision::AcceptFreeUpgrade => self.surplus[arrival + 1] -= 1,
        }
    }
}

/// First-come first-served with one fixed upgrade proportion per edge.
#[derive(Clone, Debug)]
pub struct StaticPrice {
    proportions: Vec<f64>,
    curves: Vec<AcceptanceCurve>,
    gaps: Vec<f64>,
}

impl StaticPrice {
    pub fn new(inst: &Instance, proportions: Vec<f64>) -> Result<Self> {
        let edges = inst.n_types() - 1;
        let proportions = match proportions.len() {
            1 => vec![proportions[0]; edges],
            k if k == edges => proportions,
            k => {
                return Err(Error::InvalidInstance(format!(
                    "static policy needs 1 or {edges} prices, got {k}"
                )))
            }
        };
        if proportions.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInstance(format!(
                "static prices must lie in [0, 1]: {proportions:?}"
            )));
        }
        Ok(Self {
            proportions,
            curves: inst.curves().to_vec(),
            gaps: (0..edges).map(|i| inst.ladder().gap(i)).collect(),
        })
    }

    pub fn static_policy_decide(&self, arrival: Option<usize>, remaining: &[u32]) -> Decision {
        let n = remaining.len();
        let Some(i) = arrival else {
            return Decision::Reject;
        };
        let own = remaining[i] >= 1;
        let next = i + 1 < n && remaining[i + 1] >= 1;
        match (own, next) {
            (true, true) => {
                let x = self.proportions[i];
                Decision::AcceptWithOffer {
                    price: x * self.gaps[i],
                    v: self.curves[i].prob_of(x),
                }
            }
            (true, false) => Decision::AcceptNoOffer,
            (false, true) => Decision::AcceptFreeUpgrade,
            (false, false) => Decision::Reject,
        }
    }
}

impl Policy for StaticPrice {
    fn name(&self) -> String {
        format!("static:{:?}", self.proportions)
    }

    fn decide(&mut self, _t: usize, arrival: Option<usize>, remaining: &[u32]) -> Decision {
        self.static_policy_decide(arrival, remaining)
    }
}

/// Rejects everything.
#[derive(Clone, Copy, Debug, Default)]
pub struct RejectAll;

impl Policy for RejectAll {
    fn name(&self) -> String {
        "reject".into()
    }

    fn decide(&mut self, _t: usize, _arrival: Option<usize>, _remaining: &[u32]) -> Decision {
        Decision::Reject
    }
}

/// Policy selected by name: `dynup2`, `dynupn`, `static:<price>` (one
/// proportion, or comma-separated per edge) or `reject`.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    DynUp2,
    DynUpN,
    Static(Vec<f64>),
    RejectAll,
}

impl PolicySpec {
    pub fn build(&self, inst: &Instance) -> Result<Box<dyn Policy>> {
        Ok(match self {
            PolicySpec::DynUp2 => Box::new(DynUp2::new(inst)?),
            PolicySpec::DynUpN => Box::new(DynUpN::new(inst)?),
            PolicySpec::Static(p) => Box::new(StaticPrice::new(inst, p.clone())?),
            PolicySpec::RejectAll => Box::new(RejectAll),
        })
    }
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dynup2" => Ok(PolicySpec::DynUp2),
            "dynupn" => Ok(PolicySpec::DynUpN),
            "reject" => Ok(PolicySpec::RejectAll),
            other => {
                let Some(rest) = other.strip_prefix("static:") else {
                    return Err(Error::PolicySpec(s.to_string()));
                };
                let prices = rest
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::PolicySpec(s.to_string()))?;
                if prices.is_empty() || prices.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(Error::PolicySpec(s.to_string()));
                }
                Ok(PolicySpec::Static(prices))
            }
        }
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicySpec::DynUp2 => write!(f, "dynup2"),
            PolicySpec::DynUpN => write!(f, "dynupn"),
            PolicySpec::RejectAll => write!(f, "reject"),
            PolicySpec::Static(p) => {
                let parts: Vec<String> = p.iter().map(|x| x.to_string()).collect();
                write!(f, "static:{}", parts.join(","))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ArrivalModel, PriceLadder};

    fn exp(a: f64, b: f64) -> AcceptanceCurve {
        AcceptanceCurve::exponential_power(a, b).unwrap()
    }

    fn params(curve: &AcceptanceCurve, horizon: usize, l1: f64, l2: f64) -> PairParams<'_> {
        PairParams {
            horizon,
            lambda1: l1,
            lambda2: l2,
            curve,
            gap: 1.0,
        }
    }

    #[test]
    fn price_examples() {
        let c = exp(1.0, 1.0);
        // s = T - t + 1 = 20
        let p = params(&c, 20, 0.5, 0.3);
        let (x, v) = optimal_upgrade_price(PairState { t: 1, c1: 4, c2: 8 }, &p);
        // 1/3 is below f(1) = e^-1, so both v and the price clamp
        assert_eq!(x, 1.0);
        assert!((v - c.floor()).abs() < 1e-15);

        let p = params(&c, 20, 0.3, 0.2);
        let (x, v) = optimal_upgrade_price(PairState { t: 1, c1: 8, c2: 7 }, &p);
        assert!((v - (-1.0f64).exp()).abs() < 1e-8);
        assert!((x - 1.0).abs() < 1e-7);

        let c = exp(2.33, 1.0);
        let p = params(&c, 20, 0.5, 0.3);
        let (x, v) = optimal_upgrade_price(PairState { t: 1, c1: 4, c2: 8 }, &p);
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        assert!((x - 3f64.ln() / 2.33).abs() < 1e-12);

        let big = PairState { t: 7, c1: 1_000_000, c2: 1_000_000 };
        let (x, v) = optimal_upgrade_price(big, &p);
        assert!((v - c.v_star()).abs() < 1e-12);
        assert!((x - c.price_of(c.v_star())).abs() < 1e-12);
    }

    #[test]
    fn dynup2_examples() {
        let c = exp(1.0, 1.0);
        let p = params(&c, 10, 0.4, 0.1);
        let st = |c1, c2| PairState { t: 1, c1, c2 };
        assert_eq!(dynup2_decide(st(3, 0), Some(PairArrival::Premium), &p), Decision::Reject);
        assert_eq!(dynup2_decide(st(3, 1), Some(PairArrival::Premium), &p), Decision::AcceptNoOffer);
        assert_eq!(dynup2_decide(st(0, 10), Some(PairArrival::Basic), &p), Decision::AcceptFreeUpgrade);
        assert_eq!(dynup2_decide(st(0, 2), Some(PairArrival::Basic), &p), Decision::Reject);
        assert_eq!(dynup2_decide(st(2, 0), Some(PairArrival::Basic), &p), Decision::AcceptNoOffer);
        assert_eq!(dynup2_decide(st(2, 2), None, &p), Decision::Reject);
        assert!(matches!(
            dynup2_decide(st(2, 2), Some(PairArrival::Basic), &p),
            Decision::AcceptWithOffer { .. }
        ));
        // threshold never grants a free upgrade without stock
        let p0 = params(&c, 10, 0.4, 0.0);
        assert_eq!(dynup2_decide(st(0, 0), Some(PairArrival::Basic), &p0), Decision::Reject);
        // no type-1 demand: plain accept, no pricing
        let pz = params(&c, 10, 0.0, 0.1);
        assert_eq!(dynup2_decide(st(2, 5), Some(PairArrival::Basic), &pz), Decision::AcceptNoOffer);
    }

    #[test]
    fn offers_respect_price_invariant() {
        let c = exp(4.4853, 0.9889);
        let p = PairParams { horizon: 50, lambda1: 0.4, lambda2: 0.3, curve: &c, gap: 2.5 };
        for t in 1..=50 {
            for c1 in 1..12 {
                for c2 in 1..12 {
                    if let Decision::AcceptWithOffer { price, v } =
                        dynup2_decide(PairState { t, c1, c2 }, Some(PairArrival::Basic), &p)
                    {
                        assert!((0.0..=2.5).contains(&price));
                        assert!((c.prob_of(price / 2.5) - v).abs() < 1e-9);
                    } else {
                        panic!("expected an offer");
                    }
                }
            }
        }
    }

    #[test]
    fn abundance_price_is_stationary() {
        let c = exp(2.33, 1.0);
        let p = params(&c, 200, 0.3, 0.2);
        let expected = c.price_of(c.v_star());
        for t in 1..=200 {
            let (x, _) = optimal_upgrade_price(PairState { t, c1: u32::MAX / 4, c2: u32::MAX / 4 }, &p);
            assert!((x - expected).abs() < 1e-12);
        }
    }

    fn three_type() -> Instance {
        Instance::new(
            30,
            vec![10, 8, 5],
            PriceLadder::new(vec![1.0, 1.5, 2.5]).unwrap(),
            ArrivalModel::new(vec![0.3, 0.2, 0.1]).unwrap(),
            vec![exp(4.4853, 0.9889), exp(2.33, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn dynupn_partition_examples() {
        let inst = three_type();
        let part = dynupn_init(&inst).unwrap();
        assert_eq!(part.v_h[2], 0.0);
        assert!((part.protection[2] - 2.0).abs() < 1e-9);
        assert_eq!(part.surplus[2], 2);
        assert_eq!(part.base[2], 3);
        assert_eq!(part.surplus[0], 0);
        for i in 0..3 {
            assert_eq!(part.base[i] + part.surplus[i], inst.capacity(i));
        }

        // two types: surplus_2 = (c2 - lambda2 T)^+
        let two = Instance::new(
            20,
            vec![6, 9],
            PriceLadder::new(vec![1.0, 2.0]).unwrap(),
            ArrivalModel::new(vec![0.4, 0.3]).unwrap(),
            vec![exp(2.33, 1.0)],
        )
        .unwrap();
        let part = dynupn_init(&two).unwrap();
        assert_eq!(part.surplus, vec![0, 3]);
        assert_eq!(part.base, vec![6, 6]);

        // over-demanded premium type protects nothing
        let tight = inst.with_capacities(vec![10, 8, 2]).unwrap();
        let part = dynupn_init(&tight).unwrap();
        assert_eq!(part.surplus[2], 0);
        assert_eq!(part.base[2], 2);
    }

    #[test]
    fn dynupn_routing() {
        let inst = three_type();
        let mut pol = DynUpN::new(&inst).unwrap();
        pol.base[2] = 0;
        assert!(pol.surplus[2] > 0);
        assert_eq!(pol.dynupn_decide(1, Some(2)), Decision::Reject);

        let mut pol = DynUpN::new(&inst).unwrap();
        pol.surplus[2] = 0;
        assert_eq!(pol.dynupn_decide(1, Some(1)), Decision::AcceptNoOffer);

        // ledger debits
        let mut pol = DynUpN::new(&inst).unwrap();
        pol.surplus[1] = 3;
        let before = (pol.base.clone(), pol.surplus.clone());
        let d = pol.dynupn_decide(1, Some(0));
        assert!(matches!(d, Decision::AcceptWithOffer { .. }));
        pol.record(0, &d, true);
        assert_eq!(pol.surplus[1], before.1[1] - 1);
        pol.record(0, &d, false);
        assert_eq!(pol.base[0], before.0[0] - 1);
    }

    #[test]
    fn static_examples() {
        let inst = three_type();
        let pol = StaticPrice::new(&inst, vec![0.3]).unwrap();
        let d = pol.static_policy_decide(Some(0), &[1, 1, 1]);
        assert_eq!(
            d,
            Decision::AcceptWithOffer { price: 0.3 * 0.5, v: inst.curve(0).prob_of(0.3) }
        );
        assert_eq!(pol.static_policy_decide(Some(0), &[0, 1, 1]), Decision::AcceptFreeUpgrade);
        assert_eq!(pol.static_policy_decide(Some(0), &[0, 0, 0]), Decision::Reject);
        assert_eq!(pol.static_policy_decide(Some(2), &[0, 0, 1]), Decision::AcceptNoOffer);
        assert_eq!(pol.static_policy_decide(None, &[1, 1, 1]), Decision::Reject);
        assert!(StaticPrice::new(&inst, vec![0.3, 0.2, 0.1]).is_err());
        assert!(StaticPrice::new(&inst, vec![1.3]).is_err());
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("dynup2".parse::<PolicySpec>().unwrap(), PolicySpec::DynUp2);
        assert_eq!("dynupn".parse::<PolicySpec>().unwrap(), PolicySpec::DynUpN);
        assert_eq!("static:0.3".parse::<PolicySpec>().unwrap(), PolicySpec::Static(vec![0.3]));
        assert_eq!(
            "static:0.2,0.4".parse::<PolicySpec>().unwrap(),
            PolicySpec::Static(vec![0.2, 0.4])
        );
        assert!("static:1.5".parse::<PolicySpec>().is_err());
        assert!("greedy".parse::<PolicySpec>().is_err());
        let spec = PolicySpec::Static(vec![0.25]);
        assert_eq!(spec.to_string().parse::<PolicySpec>().unwrap(), spec);
        assert!(PolicySpec::DynUp2.build(&three_type()).is_err());
    }
}
