//! Subgradient baseline and the equal-budget comparison against the
//! epi-projection method.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{all_finite, check_dim, Backend, SolverConfig, Vector};
use crate::problems::ProblemSpec;
use crate::solver::solve;

/// Step-size constant `a` in `a/√k`.
pub const STEP_SCALE: f64 = 1.0;

/// `f` at each oracle call of a run, in call order.
#[derive(Debug, Clone, Serialize)]
pub struct CallSeries {
    pub method: String,
    pub values: Vec<f64>,
}

impl CallSeries {
    /// Running minimum of the observed values.
    pub fn best_so_far(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.values
            .iter()
            .map(|&f| {
                best = best.min(f);
                best
            })
            .collect()
    }
}

/// Normalized subgradient method `x_{k+1} = x_k − (a/√k) g_k/‖g_k‖`, one
/// oracle call per step, exactly `budget` calls. Stops early only at an
/// exact zero subgradient, after which the remaining calls repeat the
/// optimal point.
pub fn subgradient_method(p: &ProblemSpec, x0: &Vector, budget: usize) -> Result<CallSeries> {
    if budget == 0 {
        return Err(Error::Usage("budget must be at least one oracle call".into()));
    }
    check_dim(p.dim(), x0.len())?;
    if !all_finite(x0) {
        return Err(Error::Usage("x0 must be finite".into()));
    }
    let mut x = x0.clone();
    let mut values = Vec::with_capacity(budget);
    for k in 1..=budget {
        let (f, g) = p.oracle_eval(&x)?;
        values.push(f);
        let gn = g.norm();
        if gn > 0.0 {
            x -= g * (STEP_SCALE / ((k as f64).sqrt() * gn));
        }
    }
    Ok(CallSeries {
        method: "subgradient".into(),
        values,
    })
}

/// Cutting-engine epi-projection capped at `budget` oracle calls. A run that
/// converges early is padded with its final value, so the series always has
/// `budget` entries.
pub fn epi_projection_series(p: &ProblemSpec, x0: &Vector, budget: usize, cfg: &SolverConfig) -> Result<CallSeries> {
    if budget == 0 {
        return Err(Error::Usage("budget must be at least one oracle call".into()));
    }
    let cfg = SolverConfig {
        backend: Backend::Cutting,
        max_oracle_calls: Some(budget),
        ..cfg.clone()
    };
    let trace = solve(p, x0, &cfg)?;
    let mut values = trace.call_values;
    if let Some(&last) = values.last() {
        values.resize(budget, last);
    }
    Ok(CallSeries {
        method: "epi-projection".into(),
        values,
    })
}

/// One row of the side-by-side table: best value after `call` oracle calls.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRow {
    pub call: usize,
    pub epi_best: f64,
    pub subgradient_best: f64,
    pub epi_error: Option<f64>,
    pub subgradient_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub problem: String,
    pub budget: usize,
    pub rows: Vec<CompareRow>,
}

impl Comparison {
    pub fn final_errors(&self) -> Option<(f64, f64)> {
        let last = self.rows.last()?;
        Some((last.epi_error?, last.subgradient_error?))
    }
}

pub fn compare(p: &ProblemSpec, x0: &Vector, budget: usize, cfg: &SolverConfig) -> Result<Comparison> {
    let epi = epi_projection_series(p, x0, budget, cfg)?;
    let sub = subgradient_method(p, x0, budget)?;
    let err = |f: f64| p.f_star.map(|fs| f - fs);
    let rows = epi
        .best_so_far()
        .into_iter()
        .zip(sub.best_so_far())
        .enumerate()
        .map(|(i, (e, s))| CompareRow {
            call: i + 1,
            epi_best: e,
            subgradient_best: s,
            epi_error: err(e),
            subgradient_error: err(s),
        })
        .collect();
    Ok(Comparison {
        problem: p.name.clone(),
        budget,
        rows,
    })
}
