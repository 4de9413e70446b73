//! Empirical convergence-rate classification from an error sequence.

use std::fmt;

use serde::Serialize;

use crate::solver::{SolveTrace, Termination};

/// Errors at or below this are treated as converged to round-off.
pub const ERROR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateClass {
    #[serde(rename = "insufficient")]
    Insufficient,
    #[serde(rename = "linear-or-worse")]
    LinearOrWorse,
    #[serde(rename = "superlinear")]
    Superlinear,
    #[serde(rename = "quadratic")]
    Quadratic,
    #[serde(rename = "finite")]
    Finite,
}

impl RateClass {
    pub fn as_str(self) -> &'static str {
        match self {
            RateClass::Insufficient => "insufficient",
            RateClass::LinearOrWorse => "linear-or-worse",
            RateClass::Superlinear => "superlinear",
            RateClass::Quadratic => "quadratic",
            RateClass::Finite => "finite",
        }
    }
}

impl fmt::Display for RateClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    /// `e_{k+1}/e_k` over pairs with both errors above the floor.
    pub lambdas: Vec<f64>,
    /// `e_{k+1}/e_k²` over the same pairs.
    pub qs: Vec<f64>,
    pub classification: RateClass,
}

/// Classifies the trace's error sequence. Needs `f_star`; without it the
/// result is `Insufficient`.
pub fn rate_estimate(trace: &SolveTrace, f_star: Option<f64>) -> RateEstimate {
    match f_star {
        Some(fs) => classify(&trace.errors(fs), trace.termination == Some(Termination::Optimal)),
        None => RateEstimate {
            lambdas: Vec::new(),
            qs: Vec::new(),
            classification: RateClass::Insufficient,
        },
    }
}

/// Classification rules, in order:
/// * finite: the error drops from above the floor to the floor far faster
///   than the quadratic constant seen so far predicts (or the start was
///   already optimal);
/// * quadratic: `λ_k` decreasing and `q_k` within a factor 10 over the last
///   three usable pairs;
/// * superlinear: `λ_k` shrinking by at least 20% per step over the last
///   three steps;
/// * otherwise linear-or-worse, or insufficient with fewer than two pairs.
pub fn classify(errors: &[f64], terminated_optimal: bool) -> RateEstimate {
    let mut lambdas = Vec::new();
    let mut qs = Vec::new();
    for w in errors.windows(2) {
        if w[0] > ERROR_FLOOR && w[1] > ERROR_FLOOR {
            lambdas.push(w[1] / w[0]);
            qs.push(w[1] / (w[0] * w[0]));
        }
    }
    let done = |classification| RateEstimate {
        lambdas: lambdas.clone(),
        qs: qs.clone(),
        classification,
    };

    if terminated_optimal && errors.first().is_some_and(|&e| e <= ERROR_FLOOR) {
        return done(RateClass::Finite);
    }
    let mut q_seen: f64 = 1.0;
    for w in errors.windows(2) {
        if w[0] > ERROR_FLOOR && w[1] <= ERROR_FLOOR && w[1] <= 1e-3 * q_seen * w[0] * w[0] {
            return done(RateClass::Finite);
        }
        if w[0] > ERROR_FLOOR && w[1] > ERROR_FLOOR {
            q_seen = q_seen.max(w[1] / (w[0] * w[0]));
        }
    }

    if lambdas.len() < 2 {
        return done(RateClass::Insufficient);
    }
    let win = lambdas.len().min(3);
    let lam_w = &lambdas[lambdas.len() - win..];
    let q_w = &qs[qs.len() - win..];
    let lam_decreasing = lam_w.windows(2).all(|w| w[1] < w[0]);
    let q_max = q_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q_min = q_w.iter().copied().fold(f64::INFINITY, f64::min);
    if lam_decreasing && q_min > 0.0 && q_max <= 10.0 * q_min {
        return done(RateClass::Quadratic);
    }

    let win = lambdas.len().min(4);
    let lam_w = &lambdas[lambdas.len() - win..];
    if win >= 3 && lam_w.windows(2).all(|w| w[1] <= 0.8 * w[0]) {
        return done(RateClass::Superlinear);
    }
    done(RateClass::LinearOrWorse)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_sequences() {
        // e_{k+1} = e_k² / 8
        let mut e = vec![0.5];
        while *e.last().unwrap() > 1e-14 {
            let l = *e.last().unwrap();
            e.push(l * l / 8.0);
        }
        assert_eq!(classify(&e, true).classification, RateClass::Quadratic);

        // order 4/3
        let mut e = vec![0.5];
        for _ in 0..12 {
            let l: f64 = *e.last().unwrap();
            e.push(0.3 * l.powf(4.0 / 3.0));
        }
        let r = classify(&e, false);
        assert_eq!(r.classification, RateClass::Superlinear);
        assert!(r.qs.windows(2).all(|w| w[1] > w[0]));

        let e: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        assert_eq!(classify(&e, false).classification, RateClass::LinearOrWorse);

        assert_eq!(classify(&[1.0, 0.3, 0.0], true).classification, RateClass::Finite);
        assert_eq!(classify(&[0.0], true).classification, RateClass::Finite);
        assert_eq!(classify(&[1.0, 0.5], false).classification, RateClass::Insufficient);
    }
}
