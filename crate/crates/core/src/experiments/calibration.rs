//! Fitting `f(x) = exp(-a x^b)` to accept/decline observations.
//!
//! Samples are binned on `x`, bin frequencies are Laplace-smoothed and a
//! straight line through `(ln x, ln(-ln freq))` seeds `(ln a, b)`. The seed
//! is refined by Levenberg-Marquardt on the per-sample squared error
//! `sum (y_j - exp(-a x_j^b))^2`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::ols;
use crate::domain::AcceptanceCurve;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 100;
pub const MIN_BINS: usize = 5;
pub const N_BINS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub a: f64,
    pub b: f64,
    /// Per-sample residual sum of squares at the fit.
    pub rss: f64,
    pub samples: usize,
    /// Seed from the binned log-log regression.
    pub seed_a: f64,
    pub seed_b: f64,
}

/// `n` draws with `x ~ U(0, 1)` and acceptance `~ Bernoulli(f(x))`.
pub fn synthetic_samples(curve: &AcceptanceCurve, n: usize, seed: u64) -> Vec<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>();
            let u = rng.random::<f64>();
            (x, u < curve.prob_of(x))
        })
        .collect()
}

fn rss(samples: &[(f64, bool)], a: f64, b: f64) -> f64 {
    samples
        .iter()
        .map(|&(x, y)| {
            let r = f64::from(u8::from(y)) - (-a * x.powf(b)).exp();
            r * r
        })
        .sum()
}

pub fn fit_acceptance_curve(samples: &[(f64, bool)]) -> Result<CalibrationFit> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples, need at least {MIN_SAMPLES}",
            samples.len()
        )));
    }
    if samples.iter().any(|&(x, _)| !(0.0..=1.0).contains(&x)) {
        return Err(Error::InsufficientData("proportions must lie in [0, 1]".into()));
    }
    let accepted = samples.iter().filter(|s| s.1).count();
    if accepted == 0 || accepted == samples.len() {
        return Err(Error::InsufficientData(
            "all samples share one outcome; the curve is not identified".into(),
        ));
    }

    let lo = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let hi = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / N_BINS as f64;
    let mut n = [0usize; N_BINS];
    let mut k = [0usize; N_BINS];
    let mut sx = [0.0f64; N_BINS];
    for &(x, y) in samples {
        let i = if width > 0.0 {
            (((x - lo) / width) as usize).min(N_BINS - 1)
        } else {
            0
        };
        n[i] += 1;
        k[i] += usize::from(y);
        sx[i] += x;
    }
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for i in 0..N_BINS {
        if n[i] == 0 {
            continue;
        }
        let xm = sx[i] / n[i] as f64;
        if xm <= 0.0 {
            continue;
        }
        let freq = (k[i] as f64 + 1.0) / (n[i] as f64 + 2.0);
        lx.push(xm.ln());
        ly.push((-freq.ln()).ln());
    }
    if lx.len() < MIN_BINS {
        return Err(Error::InsufficientData(format!(
            "{} populated bins, need at least {MIN_BINS}",
            lx.len()
        )));
    }
    let line = ols(&lx, &ly).ok_or_else(|| Error::InsufficientData("degenerate bins".into()))?;
    let seed_a = line.intercept.exp();
    let seed_b = line.slope.max(0.05);

    let (a, b) = levenberg_marquardt(samples, seed_a, seed_b);
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InsufficientData(format!("fit left the domain: a = {a}, b = {b}")));
    }
    Ok(CalibrationFit {
        a,
        b,
        rss: rss(samples, a, b),
        samples: samples.len(),
        seed_a,
        seed_b,
    })
}

/// Two-parameter Levenberg-Marquardt on `(ln a, b)`, which keeps `a > 0`.
fn levenberg_marquardt(samples: &[(f64, bool)], a0: f64, b0: f64) -> (f64, f64) {
    let mut p = [a0.ln(), b0];
    let mut cost = rss(samples, a0, b0);
    let mut mu = 1e-3;
    for _ in 0..200 {
        let a = p[0].exp();
        let b = p[1];
        let (mut jtj, mut jtr) = ([[0.0f64; 2]; 2], [0.0f64; 2]);
        for &(x, y) in samples {
            if x <= 0.0 {
                // f(0) = 1 for every (a, b)
                continue;
            }
            let xb = x.powf(b);
            let f = (-a * xb).exp();
            let r = f64::from(u8::from(y)) - f;
            // derivatives of f with respect to ln a and b
            let j = [-a * xb * f, -a * xb * x.ln() * f];
            for u in 0..2 {
                jtr[u] += j[u] * r;
                for w in 0..2 {
                    jtj[u][w] += j[u] * j[w];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let m = [
                [jtj[0][0] * (1.0 + mu), jtj[0][1]],
                [jtj[1][0], jtj[1][1] * (1.0 + mu)],
            ];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let d = [
                (m[1][1] * jtr[0] - m[0][1] * jtr[1]) / det,
                (m[0][0] * jtr[1] - m[1][0] * jtr[0]) / det,
            ];
            let cand = [p[0] + d[0], (p[1] + d[1]).max(1e-6)];
            let c = rss(samples, cand[0].exp(), cand[1]);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                p = cand;
                cost = c;
                mu = (mu * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-14 {
                    return (p[0].exp(), p[1]);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p[0].exp(), p[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_frequencies_are_recovered() {
        // deterministic data: many copies per x with the exact acceptance share
        let c = AcceptanceCurve::exponential_power(3.0, 1.2).unwrap();
        let mut samples = Vec::new();
        for i in 1..=20 {
            let x = i as f64 / 20.0;
            let accept = (c.prob_of(x) * 1000.0).round() as usize;
            for j in 0..1000 {
                samples.push((x, j < accept));
            }
        }
        let fit = fit_acceptance_curve(&samples).unwrap();
        assert!((fit.a - 3.0).abs() < 0.02 && (fit.b - 1.2).abs() < 0.02, "{fit:?}");
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        let all: Vec<(f64, bool)> = (0..500).map(|i| (i as f64 / 500.0, true)).collect();
        assert!(matches!(fit_acceptance_curve(&all), Err(Error::InsufficientData(_))));
        let few: Vec<(f64, bool)> = (0..50).map(|i| (i as f64 / 50.0, i % 2 == 0)).collect();
        assert!(fit_acceptance_curve(&few).is_err());
        let one_x: Vec<(f64, bool)> = (0..500).map(|i| (0.4, i % 3 == 0)).collect();
        assert!(fit_acceptance_curve(&one_x).is_err());
    }

    #[test]
    fn synthetic_recovery_smoke() {
        let c = AcceptanceCurve::exponential_power(2.33, 1.0).unwrap();
        let fit = fit_acceptance_curve(&synthetic_samples(&c, 10_000, 11)).unwrap();
        assert!((fit.a / 2.33 - 1.0).abs() < 0.1 && (fit.b - 1.0).abs() < 0.1, "{fit:?}");
    }
}
