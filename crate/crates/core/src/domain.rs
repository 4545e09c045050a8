//! Model primitives: price ladders, arrival models, acceptance curves and
//! problem instances.
//!
//! Acceptance curves live in *proportion space*: an upgrade fee `u` on the
//! edge `i -> i+1` is expressed as `x = u / (r_{i+1} - r_i)` in `[0, 1]`.
//! A curve maps `x` to the probability `f(x)` that a requester takes the
//! upgrade; its inverse `p` maps a target probability back to a proportion,
//! and `R(v) = v * p(v)` is the expected fee per offer in proportion units.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points on the validation grids.
pub const VALIDATION_GRID: usize = 1000;

/// Round-trip tolerance for `p(f(x)) = x` and `f(p(v)) = v`.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

/// Slack accepted on domain checks before a value is declared out of range.
const DOMAIN_SLACK: f64 = 1e-12;

/// Strictly increasing, strictly positive base prices `r_1 < ... < r_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceLadder {
    base_prices: Vec<f64>,
}

impl PriceLadder {
    pub fn new(base_prices: Vec<f64>) -> Result<Self> {
        if base_prices.is_empty() {
            return Err(Error::InvalidInstance("price ladder is empty".into()));
        }
        if base_prices.iter().any(|r| !r.is_finite() || *r <= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "base prices must be finite and positive: {base_prices:?}"
            )));
        }
        if base_prices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInstance(format!(
                "base prices must be strictly increasing: {base_prices:?}"
            )));
        }
        Ok(Self { base_prices })
    }

    pub fn len(&self) -> usize {
        self.base_prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base_prices.is_empty()
    }

    /// Base price of type `i` (0-based).
    pub fn price(&self, i: usize) -> f64 {
        self.base_prices[i]
    }

    /// Price gap `r_{i+1} - r_i` of the upgrade edge leaving type `i`.
    pub fn gap(&self, i: usize) -> f64 {
        self.base_prices[i + 1] - self.base_prices[i]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.base_prices
    }
}

impl TryFrom<Vec<f64>> for PriceLadder {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriceLadder> for Vec<f64> {
    fn from(l: PriceLadder) -> Self {
        l.base_prices
    }
}

/// Per-period arrival probabilities `lambda_1 .. lambda_n`; the no-arrival
/// probability is whatever mass is left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ArrivalModel {
    rates: Vec<f64>,
}

impl ArrivalModel {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::InvalidInstance(format!(
                "arrival rates must be finite and non-negative: {rates:?}"
            )));
        }
        let total: f64 = rates.iter().sum();
        if total > 1.0 + 1e-12 {
            return Err(Error::InvalidInstance(format!(
                "arrival rates sum to {total} > 1"
            )));
        }
        Ok(Self { rates })
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.rates[i]
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    /// `lambda_0 = 1 - sum(lambda_i)`, never stored.
    pub fn no_arrival_rate(&self) -> f64 {
        (1.0 - self.rates.iter().sum::<f64>()).max(0.0)
    }
}

impl TryFrom<Vec<f64>> for ArrivalModel {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ArrivalModel> for Vec<f64> {
    fn from(a: ArrivalModel) -> Self {
        a.rates
    }
}

/// Parametric acceptance-curve families over the upgrade proportion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CurveFamily {
    /// `f(x) = exp(-a x^b)`.
    ExponentialPower { a: f64, b: f64 },
    /// `f(x) = 1 - slope * x`, `slope` in `(0, 1]`.
    Linear { slope: f64 },
}

impl CurveFamily {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            CurveFamily::ExponentialPower { a, b } => (-a * x.powf(b)).exp(),
            CurveFamily::Linear { slope } => 1.0 - slope * x,
        }
    }

    fn invert(&self, v: f64) -> f64 {
        match *self {
            CurveFamily::ExponentialPower { a, b } => {
                let y = -v.ln();
                if y <= 0.0 {
                    0.0
                } else {
                    (y / a).powf(1.0 / b)
                }
            }
            CurveFamily::Linear { slope } => (1.0 - v) / slope,
        }
    }

    fn check_params(&self) -> Result<()> {
        match *self {
            CurveFamily::ExponentialPower { a, b } => {
                if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
                    return Err(Error::InvalidCurve(format!(
                        "exponential-power needs a > 0 and b > 0, got a={a}, b={b}"
                    )));
                }
            }
            CurveFamily::Linear { slope } => {
                if !(slope.is_finite() && slope > 0.0 && slope <= 1.0) {
                    return Err(Error::InvalidCurve(format!(
                        "linear slope must lie in (0, 1], got {slope}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A validated acceptance curve with its cached floor `f(1)` and revenue
/// maximizer `v*`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveFamily", into = "CurveFamily")]
pub struct AcceptanceCurve {
    family: CurveFamily,
    floor: f64,
    v_star: f64,
}

impl TryFrom<CurveFamily> for AcceptanceCurve {
    type Error = Error;
    fn try_from(f: CurveFamily) -> Result<Self> {
        Self::new(f)
    }
}

impl From<AcceptanceCurve> for CurveFamily {
    fn from(c: AcceptanceCurve) -> Self {
        c.family
    }
}

impl AcceptanceCurve {
    /// Builds and validates a curve: `f(0) = 1`, `f` strictly decreasing,
    /// `p` round-trips and `R` has no strict interior local minimum on the
    /// validation grid.
    pub fn new(family: CurveFamily) -> Result<Self> {
        family.check_params()?;
        let floor = family.eval(1.0);
        if (family.eval(0.0) - 1.0).abs() > 0.0 {
            return Err(Error::InvalidCurve("f(0) must equal 1".into()));
        }

        let xs = grid(0.0, 1.0, VALIDATION_GRID);
        let fs: Vec<f64> = xs.iter().map(|&x| family.eval(x)).collect();
        if fs.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidCurve(format!(
                "{family:?} is not strictly decreasing on [0, 1]"
            )));
        }
        for (&x, &fx) in xs.iter().zip(&fs) {
            let back = family.invert(fx);
            if (back - x).abs() > ROUND_TRIP_TOL {
                return Err(Error::InvalidCurve(format!(
                    "p(f({x})) = {back} fails to round-trip"
                )));
            }
        }

        let vs = grid(floor, 1.0, VALIDATION_GRID);
        for &v in &vs {
            let fv = family.eval(family.invert(v));
            if (fv - v).abs() > ROUND_TRIP_TOL {
                return Err(Error::InvalidCurve(format!(
                    "f(p({v})) = {fv} fails to round-trip"
                )));
            }
        }
        let rs: Vec<f64> = vs.iter().map(|&v| v * family.invert(v)).collect();
        let scale = rs.iter().cloned().fold(0.0, f64::max).max(1e-300);
        let strict_dip = rs.windows(3).any(|w| {
            let tol = 1e-12 * scale;
            w[1] + tol < w[0] && w[1] + tol < w[2]
        });
        if strict_dip {
            return Err(Error::InvalidCurve(format!(
                "R(v) = v p(v) is not quasi-concave for {family:?}"
            )));
        }

        let best = rs
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |acc, (i, &r)| {
                if r > acc.1 {
                    (i, r)
                } else {
                    acc
                }
            })
            .0;
        let lo = vs[best.saturating_sub(1)];
        let hi = vs[(best + 1).min(vs.len() - 1)];
        let r = |v: f64| v * family.invert(v);
        let interior = golden_section_max(r, lo, hi, 1e-9);
        // a maximum on the boundary of [floor, 1] is returned exactly
        let v_star = [interior, lo, hi]
            .into_iter()
            .fold(interior, |acc, v| if r(v) > r(acc) { v } else { acc });

        Ok(Self {
            family,
            floor,
            v_star,
        })
    }

    pub fn exponential_power(a: f64, b: f64) -> Result<Self> {
        Self::new(CurveFamily::ExponentialPower { a, b })
    }

    pub fn linear(slope: f64) -> Result<Self> {
        Self::new(CurveFamily::Linear { slope })
    }

    pub fn family(&self) -> CurveFamily {
        self.family
    }

    /// `f(1)`: the smallest reachable acceptance probability.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// The maximizer `v*` of `R` on `[f(1), 1]`.
    pub fn v_star(&self) -> f64 {
        self.v_star
    }

    /// `f(x)`; errors when `x` is outside `[0, 1]`.
    pub fn accept_prob(&self, x: f64) -> Result<f64> {
        let x = check_range("proportion", x, 0.0, 1.0)?;
        Ok(self.family.eval(x))
    }

    /// `p(v) = f^{-1}(v)`; errors when `v` is outside `[f(1), 1]`.
    pub fn inverse_price(&self, v: f64) -> Result<f64> {
        let v = check_range("probability", v, self.floor, 1.0)?;
        Ok(self.price_of(v))
    }

    /// `R(v) = v p(v)`; errors when `v` is outside `[f(1), 1]`.
    pub fn revenue_curve(&self, v: f64) -> Result<f64> {
        let v = check_range("probability", v, self.floor, 1.0)?;
        Ok(self.revenue_of(v))
    }

    /// Argmax of `R` on `[f(1), 1]`.
    pub fn revenue_maximizer(&self) -> f64 {
        self.v_star
    }

    /// Unchecked `f`, with `x` clamped into `[0, 1]`.
    pub fn prob_of(&self, x: f64) -> f64 {
        self.family.eval(x.clamp(0.0, 1.0))
    }

    /// Unchecked `p`, with `v` clamped into `[f(1), 1]` and the result
    /// clamped into `[0, 1]`.
    pub fn price_of(&self, v: f64) -> f64 {
        self.family
            .invert(v.clamp(self.floor, 1.0))
            .clamp(0.0, 1.0)
    }

    /// Unchecked `R`, with `v` clamped into `[f(1), 1]`.
    pub fn revenue_of(&self, v: f64) -> f64 {
        let v = v.clamp(self.floor, 1.0);
        v * self.price_of(v)
    }

    /// Clamps a probability into the reachable range `[f(1), 1]`.
    pub fn clamp_prob(&self, v: f64) -> f64 {
        v.clamp(self.floor, 1.0)
    }
}

fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value.is_nan() || value < lo - DOMAIN_SLACK || value > hi + DOMAIN_SLACK {
        return Err(Error::Domain {
            what,
            value,
            lo,
            hi,
        });
    }
    Ok(value.clamp(lo, hi))
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| if k == n - 1 { hi } else { lo + step * k as f64 })
        .collect()
}

/// Golden-section search for the maximum of a unimodal function on
/// `[lo, hi]`, stopping once the bracket is narrower than `tol`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Serialized form of an [`Instance`] (TOML in files).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "c")]
    pub capacities: Vec<u32>,
    #[serde(rename = "r")]
    pub prices: Vec<f64>,
    #[serde(rename = "lambda")]
    pub rates: Vec<f64>,
    pub curves: Vec<CurveFamily>,
}

/// A validated problem instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    horizon: usize,
    capacities: Vec<u32>,
    ladder: PriceLadder,
    arrivals: ArrivalModel,
    curves: Vec<AcceptanceCurve>,
}

impl Instance {
    pub fn new(
        horizon: usize,
        capacities: Vec<u32>,
        ladder: PriceLadder,
        arrivals: ArrivalModel,
        curves: Vec<AcceptanceCurve>,
    ) -> Result<Self> {
        let n = ladder.len();
        if horizon == 0 {
            return Err(Error::InvalidInstance("horizon must be positive".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInstance(
                "need at least two resource types".into(),
            ));
        }
        if capacities.len() != n || arrivals.len() != n || curves.len() != n - 1 {
            return Err(Error::InvalidInstance(format!(
                "inconsistent lengths: |c|={}, |r|={}, |lambda|={}, |curves|={}",
                capacities.len(),
                n,
                arrivals.len(),
                curves.len()
            )));
        }
        Ok(Self {
            horizon,
            capacities,
            ladder,
            arrivals,
            curves,
        })
    }

    pub fn from_config(cfg: &InstanceConfig) -> Result<Self> {
        let curves = cfg
            .curves
            .iter()
            .map(|f| AcceptanceCurve::new(*f))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            cfg.horizon,
            cfg.capacities.clone(),
            PriceLadder::new(cfg.prices.clone())?,
            ArrivalModel::new(cfg.rates.clone())?,
            curves,
        )
    }

    pub fn to_config(&self) -> InstanceConfig {
        InstanceConfig {
            horizon: self.horizon,
            capacities: self.capacities.clone(),
            prices: self.ladder.as_slice().to_vec(),
            rates: self.arrivals.rates().to_vec(),
            curves: self.curves.iter().map(|c| c.family()).collect(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: InstanceConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_config(&cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.to_config()).expect("instance config serializes")
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_types(&self) -> usize {
        self.ladder.len()
    }

    pub fn capacities(&self) -> &[u32] {
        &self.capacities
    }

    pub fn capacity(&self, i: usize) -> u32 {
        self.capacities[i]
    }

    pub fn ladder(&self) -> &PriceLadder {
        &self.ladder
    }

    pub fn arrivals(&self) -> &ArrivalModel {
        &self.arrivals
    }

    pub fn curves(&self) -> &[AcceptanceCurve] {
        &self.curves
    }

    /// Curve of the edge `i -> i+1` (0-based).
    pub fn curve(&self, i: usize) -> &AcceptanceCurve {
        &self.curves[i]
    }

    /// Same instance with another horizon.
    pub fn with_horizon(&self, horizon: usize) -> Result<Self> {
        Self::new(
            horizon,
            self.capacities.clone(),
            self.ladder.clone(),
            self.arrivals.clone(),
            self.curves.clone(),
        )
    }

    /// Same instance with other capacities.
    pub fn with_capacities(&self, capacities: Vec<u32>) -> Result<Self> {
        Self::new(
            self.horizon,
            capacities,
            self.ladder.clone(),
            self.arrivals.clone(),
            self.curves.clone(),
        )
    }

    /// Same instance with other arrival rates.
    pub fn with_arrivals(&self, arrivals: ArrivalModel) -> Result<Self> {
        Self::new(
            self.horizon,
            self.capacities.clone(),
            self.ladder.clone(),
            arrivals,
            self.curves.clone(),
        )
    }

    /// For each type `i >= 2` (1-based), whether `c_i > lambda_i T`, i.e.
    /// the premium side of edge `i-1 -> i` has surplus over its expected
    /// demand.
    pub fn premium_surplus_flags(&self) -> Vec<bool> {
        (1..self.n_types())
            .map(|i| f64::from(self.capacities[i]) > self.arrivals.rate(i) * self.horizon as f64)
            .collect()
    }

    /// True when every premium surplus flag holds.
    pub fn premium_surplus_holds(&self) -> bool {
        self.premium_surplus_flags().into_iter().all(|b| b)
    }

    /// Human-readable warnings for violated standing assumptions.
    pub fn warnings(&self) -> Vec<String> {
        self.premium_surplus_flags()
            .into_iter()
            .enumerate()
            .filter(|(_, ok)| !ok)
            .map(|(k, _)| {
                let i = k + 1;
                format!(
                    "c_{} = {} does not exceed lambda_{} T = {}; upgrades into type {} may be void",
                    i + 1,
                    self.capacities[i],
                    i + 1,
                    self.arrivals.rate(i) * self.horizon as f64,
                    i + 1
                )
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(a: f64, b: f64) -> AcceptanceCurve {
        AcceptanceCurve::exponential_power(a, b).unwrap()
    }

    #[test]
    fn accept_prob_examples() {
        let c = exp(2.33, 1.0);
        assert_eq!(c.accept_prob(0.0).unwrap(), 1.0);
        assert!((c.accept_prob(0.5).unwrap() - (-1.165f64).exp()).abs() < 1e-12);
        assert!((c.accept_prob(0.5).unwrap() - 0.311_922_66).abs() < 1e-8);
        let c = exp(4.4853, 0.9889);
        assert!((c.accept_prob(1.0).unwrap() - 0.011_273_50).abs() < 1e-8);
        assert!(matches!(c.accept_prob(1.5), Err(Error::Domain { .. })));
        assert!(c.accept_prob(-0.1).is_err());
    }

    #[test]
    fn inverse_price_examples() {
        let c = exp(2.33, 1.0);
        assert_eq!(c.inverse_price(1.0).unwrap(), 0.0);
        assert!((c.inverse_price((-2.33f64).exp()).unwrap() - 1.0).abs() < 1e-12);
        let c = exp(1.0, 1.0);
        assert!((c.inverse_price(0.5).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert!(c.inverse_price(0.2).is_err());
        assert_eq!(AcceptanceCurve::linear(1.0).unwrap().inverse_price(1.0).unwrap(), 0.0);
    }

    #[test]
    fn revenue_curve_examples() {
        let c = exp(1.0, 1.0);
        assert_eq!(c.revenue_curve(1.0).unwrap(), 0.0);
        assert!((c.revenue_curve(0.5).unwrap() - 0.5 * 2f64.ln()).abs() < 1e-12);
        let e1 = (-1.0f64).exp();
        assert!((c.revenue_curve(e1).unwrap() - e1).abs() < 1e-12);
    }

    #[test]
    fn maximizer_examples() {
        let e1 = (-1.0f64).exp();
        assert!((exp(1.0, 1.0).revenue_maximizer() - e1).abs() < 1e-8);
        assert!((exp(2.0, 1.0).revenue_maximizer() - e1).abs() < 1e-8);
        assert!((AcceptanceCurve::linear(1.0).unwrap().revenue_maximizer() - 0.5).abs() < 1e-8);
        // a < 1/b pushes the maximizer onto the floor f(1)
        let c = exp(0.5, 1.0);
        assert!((c.revenue_maximizer() - c.floor()).abs() < 1e-8);
        // shallow linear curve: R increasing down to the floor
        let c = AcceptanceCurve::linear(0.3).unwrap();
        assert!((c.revenue_maximizer() - 0.7).abs() < 1e-8);
    }

    #[test]
    fn curve_params_rejected() {
        assert!(AcceptanceCurve::exponential_power(0.0, 1.0).is_err());
        assert!(AcceptanceCurve::exponential_power(1.0, -1.0).is_err());
        assert!(AcceptanceCurve::linear(1.5).is_err());
        assert!(AcceptanceCurve::linear(0.0).is_err());
    }

    #[test]
    fn ladder_and_arrivals_validate() {
        assert!(PriceLadder::new(vec![1.0, 1.0]).is_err());
        assert!(PriceLadder::new(vec![0.0, 1.0]).is_err());
        assert!(PriceLadder::new(vec![1.0, 2.0, 3.5]).is_ok());
        assert!(ArrivalModel::new(vec![0.7, 0.4]).is_err());
        assert!(ArrivalModel::new(vec![-0.1, 0.4]).is_err());
        let a = ArrivalModel::new(vec![0.4, 0.2]).unwrap();
        assert!((a.no_arrival_rate() + a.rates().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn instance_lengths_and_flags() {
        let ladder = PriceLadder::new(vec![1.0, 2.0]).unwrap();
        let arr = ArrivalModel::new(vec![0.3, 0.2]).unwrap();
        let curve = exp(1.0, 1.0);
        assert!(Instance::new(10, vec![3], ladder.clone(), arr.clone(), vec![curve.clone()]).is_err());
        assert!(Instance::new(10, vec![3, 4], ladder.clone(), arr.clone(), vec![]).is_err());
        let inst = Instance::new(10, vec![3, 4], ladder.clone(), arr.clone(), vec![curve.clone()]).unwrap();
        assert!(inst.premium_surplus_holds());
        let inst = inst.with_capacities(vec![3, 2]).unwrap();
        assert!(!inst.premium_surplus_holds());
        assert_eq!(inst.warnings().len(), 1);
    }

    #[test]
    fn toml_round_trip() {
        let text = r#"
T = 30
c = [10, 8, 5]
r = [1.0, 1.5, 2.5]
lambda = [0.3, 0.2, 0.1]

[[curves]]
family = "exponential_power"
a = 4.4853
b = 0.9889

[[curves]]
family = "linear"
slope = 1.0
"#;
        let inst = Instance::from_toml(text).unwrap();
        assert_eq!(inst.n_types(), 3);
        assert_eq!(inst.curve(1).family(), CurveFamily::Linear { slope: 1.0 });
        let back = Instance::from_toml(&inst.to_toml()).unwrap();
        assert_eq!(back, inst);
        assert!(Instance::from_toml("T = 3").is_err());
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = golden_section_max(|x| -(x - 0.3) * (x - 0.3), 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }
}
