//! The hybrid-programming benchmark.
//!
//! For one upgrade edge (basic type 1, premium type 2) with hindsight
//! arrival counts `L1, L2` and a fixed upgrade probability `v`, the hybrid
//! objective is
//!
//! ```text
//! w(v) = L2 r2 + min{ L1, (c2 - L2) / v, c1 / (1 - v) } (R(v) (r2 - r1) + r1)
//! ```
//!
//! Its maximizer has a closed form. Scarcity (`c1 + c2 < L1 + L2`) puts
//! the optimum where the two capacity terms cross; abundance projects `v*`
//! onto the interval on which `L1` is the binding term. The three-case
//! upper bound `w^U` re-prices the capacity-binding cases so that leftover
//! type-1 demand still earns `r1`; its expectation bounds every online
//! policy. [`solve_ntype`] chains the two-type solution from the top type
//! down.

use serde::{Deserialize, Serialize};

use crate::domain::AcceptanceCurve;
use crate::error::{Error, Result};

const CASE_REL_TOL: f64 = 1e-9;

/// Which term of `min{L1, (c2-L2)/v, c1/(1-v)}` binds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BindingCase {
    /// `L1` binds: no resource runs out.
    DemandBinding,
    /// `(c2 - L2)/v` binds: the premium resource runs out first.
    PremiumBinding,
    /// `c1/(1 - v)` binds: the basic resource runs out first.
    BasicBinding,
}

/// Optimal upgrade probability of one edge and the objective it attains.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpSolution {
    /// `v^H`, always inside `[f(1), 1]`.
    pub v_opt: f64,
    /// The formula value before clamping into `[f(1), 1]`.
    pub v_unclamped: f64,
    pub case: BindingCase,
    /// Objective value in currency.
    pub objective: f64,
    /// `Y1 = min{L1, (c2-L2)/v, c1/(1-v)}`, floored at zero.
    pub effective_accept: f64,
    /// `L2 >= c2`: the upgrade channel is void.
    pub degenerate: bool,
    /// `L1 = 0`: the objective does not depend on `v`; `v_opt` is `v*`.
    pub v_unused: bool,
}

/// Non-negative (realized or expected) arrival counts per type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountVector(Vec<f64>);

impl CountVector {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidInstance(format!(
                "counts must be finite and non-negative: {counts:?}"
            )));
        }
        Ok(Self(counts))
    }

    pub fn from_integers(counts: &[u32]) -> Self {
        Self(counts.iter().map(|&c| f64::from(c)).collect())
    }

    /// Expected counts `lambda_i * periods`.
    pub fn expected(rates: &[f64], periods: f64) -> Self {
        Self(rates.iter().map(|l| l * periods).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Capacities, prices and curve of one basic/premium edge.
#[derive(Clone, Copy, Debug)]
pub struct Pair<'a> {
    pub basic_cap: f64,
    pub premium_cap: f64,
    pub basic_price: f64,
    pub premium_price: f64,
    pub curve: &'a AcceptanceCurve,
}

impl<'a> Pair<'a> {
    pub fn new(c1: f64, c2: f64, r1: f64, r2: f64, curve: &'a AcceptanceCurve) -> Self {
        Self {
            basic_cap: c1,
            premium_cap: c2,
            basic_price: r1,
            premium_price: r2,
            curve,
        }
    }

    fn gap(&self) -> f64 {
        self.premium_price - self.basic_price
    }

    /// Expected fee per offer at probability `v`, in currency.
    fn fee_revenue(&self, v: f64) -> f64 {
        self.curve.revenue_of(v) * self.gap()
    }

    fn degenerate_value(&self, l1: f64, l2: f64) -> f64 {
        l2.min(self.premium_cap) * self.premium_price + l1.min(self.basic_cap) * self.basic_price
    }
}

/// `[L1, (c2 - L2)/v, c1/(1 - v)]` with the poles mapped to `+inf`.
pub fn binding_terms(v: f64, l1: f64, l2: f64, c1: f64, c2: f64) -> [f64; 3] {
    let premium = if v <= 0.0 { f64::INFINITY } else { (c2 - l2) / v };
    let basic = if v >= 1.0 { f64::INFINITY } else { c1 / (1.0 - v) };
    [l1, premium, basic]
}

fn case_of(terms: &[f64; 3]) -> BindingCase {
    let m = terms.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = CASE_REL_TOL * m.abs().max(1.0);
    if terms[0] <= m + tol {
        BindingCase::DemandBinding
    } else if terms[1] <= m + tol {
        BindingCase::PremiumBinding
    } else {
        BindingCase::BasicBinding
    }
}

/// Value of the hybrid objective plus a flag for the void-upgrade branch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HpValue {
    pub value: f64,
    pub degenerate: bool,
}

/// Evaluates the hybrid objective at `v` for counts `[L1, L2]`.
///
/// When `L2 >= c2` there is no premium surplus to upgrade into and the
/// value of the best feasible policy, `min{L2,c2} r2 + min{L1,c1} r1`, is
/// returned with the degenerate flag set.
pub fn hp_objective(v: f64, counts: [f64; 2], pair: &Pair<'_>) -> HpValue {
    let [l1, l2] = counts;
    if l2 >= pair.premium_cap {
        return HpValue {
            value: pair.degenerate_value(l1, l2),
            degenerate: true,
        };
    }
    let terms = binding_terms(v, l1, l2, pair.basic_cap, pair.premium_cap);
    let y = terms.iter().cloned().fold(f64::INFINITY, f64::min);
    let per_accept = if y > 0.0 {
        pair.fee_revenue(v) + pair.basic_price
    } else {
        0.0
    };
    HpValue {
        value: l2 * pair.premium_price + y * per_accept,
        degenerate: false,
    }
}

/// The closed-form maximizer for counts `[L1, L2]` before clamping into
/// `[f(1), 1]`; requires `L1 > 0`.
pub fn closed_form_v(l1: f64, l2: f64, c1: f64, c2: f64, v_star: f64) -> f64 {
    debug_assert!(l1 > 0.0);
    if c1 + c2 < l1 + l2 {
        let surplus = c2 - l2;
        if surplus <= 0.0 {
            0.0
        } else {
            (surplus / (c1 + surplus)).clamp(0.0, 1.0)
        }
    } else {
        v_star.min((c2 - l2) / l1).max(1.0 - c1 / l1)
    }
}

fn solution_at(v_unclamped: f64, v: f64, counts: [f64; 2], pair: &Pair<'_>, objective: f64) -> HpSolution {
    let [l1, l2] = counts;
    let terms = binding_terms(v, l1, l2, pair.basic_cap, pair.premium_cap);
    let y = terms.iter().cloned().fold(f64::INFINITY, f64::min);
    HpSolution {
        v_opt: v,
        v_unclamped,
        case: case_of(&terms),
        objective,
        effective_accept: y.max(0.0),
        degenerate: l2 >= pair.premium_cap,
        v_unused: l1 <= 0.0,
    }
}

/// Per-period re-solve of the hybrid program with expected counts over the
/// remaining `periods` (Algorithm-1 core). Errors when `lambda1 = 0`.
pub fn solve_hp_closed_form(
    periods: f64,
    pair: &Pair<'_>,
    lambda1: f64,
    lambda2: f64,
) -> Result<HpSolution> {
    if lambda1 <= 0.0 {
        return Err(Error::InvalidInstance(
            "no type-1 demand to price (lambda_1 = 0)".into(),
        ));
    }
    if periods < 1.0 {
        return Err(Error::InvalidInstance(format!(
            "remaining periods must be >= 1, got {periods}"
        )));
    }
    let counts = [lambda1 * periods, lambda2 * periods];
    let raw = closed_form_v(
        counts[0],
        counts[1],
        pair.basic_cap,
        pair.premium_cap,
        pair.curve.v_star(),
    );
    let v = pair.curve.clamp_prob(raw);
    let objective = hp_objective(v, counts, pair).value;
    Ok(solution_at(raw, v, counts, pair, objective))
}

/// Three-case upper bound `w^U` for realized counts `[L1, L2]`, evaluated
/// at the closed-form `v^H`.
pub fn upper_hp_value(counts: [f64; 2], pair: &Pair<'_>) -> (f64, HpSolution) {
    let [l1, l2] = counts;
    let (c1, c2) = (pair.basic_cap, pair.premium_cap);
    let (r1, r2) = (pair.basic_price, pair.premium_price);

    if l1 <= 0.0 {
        let v = pair.curve.v_star();
        let value = if l2 >= c2 {
            pair.degenerate_value(l1, l2)
        } else {
            l2 * r2
        };
        return (value, solution_at(v, v, counts, pair, value));
    }

    let raw = closed_form_v(l1, l2, c1, c2, pair.curve.v_star());
    let v = pair.curve.clamp_prob(raw);
    if l2 >= c2 {
        let value = pair.degenerate_value(l1, l2);
        return (value, solution_at(raw, v, counts, pair, value));
    }

    let terms = binding_terms(v, l1, l2, c1, c2);
    let fee = pair.fee_revenue(v);
    let tail = r1 * l1.min(c1 + c2 - l2);
    let value = match case_of(&terms) {
        BindingCase::DemandBinding => l2 * r2 + l1 * (fee + r1),
        BindingCase::PremiumBinding => l2 * r2 + terms[1] * fee + tail,
        BindingCase::BasicBinding => l2 * r2 + terms[2] * fee + tail,
    };
    (value, solution_at(raw, v, counts, pair, value))
}

/// Brute-force maximizer of [`hp_objective`] over the grid
/// `{f(1), f(1) + step, ..., 1}`; ties go to the smaller `v`.
pub fn solve_hp_grid(counts: [f64; 2], pair: &Pair<'_>, step: f64) -> HpSolution {
    assert!(step > 0.0 && step <= 0.01, "grid step must lie in (0, 0.01]");
    let floor = pair.curve.floor();
    let n = ((1.0 - floor) / step).floor() as usize;
    let mut best_v = floor;
    let mut best = f64::NEG_INFINITY;
    for k in 0..=n + 1 {
        let v = if k > n { 1.0 } else { (floor + step * k as f64).min(1.0) };
        let val = hp_objective(v, counts, pair).value;
        if val > best {
            best = val;
            best_v = v;
        }
    }
    solution_at(best_v, best_v, counts, pair, best)
}

/// Solution of the n-type recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NTypeSolution {
    /// `pairs[i]` solves edge `i -> i+1` (0-based), length `n - 1`.
    pub pairs: Vec<HpSolution>,
    /// Per-pair upper-bound values.
    pub pair_values: Vec<f64>,
    /// `surplus[i]`: type-`i` capacity left for upgrades from below.
    pub surplus: Vec<f64>,
    /// Sum of the pair values plus the top type's own revenue.
    pub total: f64,
}

/// Top-down recursion: the top type keeps `(c_n - L_n)^+` for upgrades;
/// each lower edge is a two-type problem with capacities
/// `(c_i, surplus_{i+1})`, counts `(L_i, 0)`, and leaves
/// `surplus_i = (c_i - L_i / (1 - v_i))^+` for the edge below.
pub fn solve_ntype(
    counts: &CountVector,
    caps: &[f64],
    prices: &[f64],
    curves: &[AcceptanceCurve],
) -> Result<NTypeSolution> {
    let n = caps.len();
    if n < 2 || counts.len() != n || prices.len() != n || curves.len() != n - 1 {
        return Err(Error::InvalidInstance(format!(
            "n-type recursion needs n >= 2 and consistent lengths (n={n}, counts={}, prices={}, curves={})",
            counts.len(),
            prices.len(),
            curves.len()
        )));
    }
    let mut surplus = vec![0.0; n];
    surplus[n - 1] = (caps[n - 1] - counts.get(n - 1)).max(0.0);
    let mut pairs = vec![None; n - 1];
    let mut pair_values = vec![0.0; n - 1];
    for i in (0..n - 1).rev() {
        let pair = Pair::new(caps[i], surplus[i + 1], prices[i], prices[i + 1], &curves[i]);
        let li = counts.get(i);
        let (value, sol) = upper_hp_value([li, 0.0], &pair);
        surplus[i] = if sol.v_opt >= 1.0 {
            (caps[i] - li).max(0.0)
        } else {
            (caps[i] - li / (1.0 - sol.v_opt)).max(0.0)
        };
        pairs[i] = Some(sol);
        pair_values[i] = value;
    }
    let top = counts.get(n - 1).min(caps[n - 1]) * prices[n - 1];
    let total = pair_values.iter().sum::<f64>() + top;
    Ok(NTypeSolution {
        pairs: pairs.into_iter().map(|p| p.expect("every pair solved")).collect(),
        pair_values,
        surplus,
        total,
    })
}
