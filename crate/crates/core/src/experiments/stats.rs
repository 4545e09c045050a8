//! Summary statistics with order-fixed compensated sums.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Neumaier-compensated sum, evaluated in iteration order.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean, standard deviation and standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub se: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n, mean: f64::NAN, sd: f64::NAN, se: f64::NAN };
        }
        let mean = neumaier_sum(xs.iter().copied()) / n as f64;
        if n == 1 {
            return Self { n, mean, sd: 0.0, se: 0.0 };
        }
        let ss = neumaier_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
        let sd = (ss / (n - 1) as f64).sqrt();
        Self { n, mean, sd, se: sd / (n as f64).sqrt() }
    }

    /// `|mean - target| <= k * se`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
    pub r2: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = neumaier_sum(x.iter().copied()) / n as f64;
    let my = neumaier_sum(y.iter().copied()) / n as f64;
    let sxx = neumaier_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let sxy = neumaier_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    let syy = neumaier_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { intercept, slope, r2 })
}

/// One-sided paired t-test of `H1: mean(diffs) > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub t: f64,
    pub p_value: f64,
}

pub fn paired_t_test_greater(diffs: &[f64]) -> TTest {
    let s = Summary::of(diffs);
    if s.n < 2 {
        return TTest { n: s.n, mean: s.mean, se: s.se, t: f64::NAN, p_value: 1.0 };
    }
    if s.se == 0.0 {
        let p = if s.mean > 0.0 { 0.0 } else { 1.0 };
        let t = if s.mean > 0.0 { f64::INFINITY } else { f64::NAN };
        return TTest { n: s.n, mean: s.mean, se: 0.0, t, p_value: p };
    }
    let t = s.mean / s.se;
    let dist = StudentsT::new(0.0, 1.0, (s.n - 1) as f64).expect("df > 0");
    TTest { n: s.n, mean: s.mean, se: s.se, t, p_value: 1.0 - dist.cdf(t) }
}
