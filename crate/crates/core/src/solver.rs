//! Outer loop: project `(ξ_k, 0)` onto `epi f*`, then move `ξ` up to the
//! support value `−f(x_p)`.

use std::fmt;

use serde::Serialize;

use crate::epiproject::{project_cutting, project_exact, trial_point, EpiProjection};
use crate::error::{Error, Result};
use crate::model::{check_dim, all_finite, Backend, Bundle, SolverConfig, Vector};
use crate::oracle::Oracle;
use crate::problems::ProblemSpec;

pub use crate::rates::{rate_estimate, RateClass, RateEstimate};

/// Number of consecutive tiny `ξ` increments that count as a stall.
const STALL_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// `‖g_p‖ ≤ eps_g`.
    Optimal,
    /// `ξ` stopped moving for several iterations.
    Stalled,
    MaxOuter,
    BudgetExhausted,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(self, Termination::Optimal | Termination::Stalled)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Optimal => "optimal",
            Termination::Stalled => "stalled",
            Termination::MaxOuter => "max_outer",
            Termination::BudgetExhausted => "budget_exhausted",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub xi_k: f64,
    pub xi_p: f64,
    pub g_norm: f64,
    pub x_p: Option<Vec<f64>>,
    pub f_xp: Option<f64>,
    /// `−f_star − ξ_k`, when `f_star` is known.
    pub e_k: Option<f64>,
    pub theta_k: Option<f64>,
    /// Oracle calls spent in this iteration.
    pub oracle_calls: usize,
    pub inner_iters: usize,
    /// Cuts appended to the bundle (cutting engine only).
    pub cuts_added: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveTrace {
    pub problem: String,
    pub backend: Backend,
    pub records: Vec<TraceRecord>,
    pub termination: Option<Termination>,
    /// Estimate of `f_star`: `−ξ` at the end of the run.
    pub f_hat: f64,
    pub best_x: Option<Vec<f64>>,
    pub best_f: f64,
    /// Oracle calls spent before the first iteration (evaluating `x0`).
    pub setup_calls: usize,
    /// `f` at every oracle call of the run, in call order.
    #[serde(skip)]
    pub call_values: Vec<f64>,
}

impl SolveTrace {
    pub fn converged(&self) -> bool {
        self.termination.is_some_and(Termination::converged)
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_oracle_calls(&self) -> usize {
        self.setup_calls + self.records.iter().map(|r| r.oracle_calls).sum::<usize>()
    }

    pub fn total_inner_iters(&self) -> usize {
        self.records.iter().map(|r| r.inner_iters).sum()
    }

    /// `ξ_0, ξ_1, …` including the value reached after the last step.
    pub fn xi_sequence(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.records.iter().map(|r| r.xi_k).collect();
        if let Some(last) = self.records.last() {
            if let Some(f) = last.f_xp {
                out.push(-f);
            }
        }
        out
    }

    /// Errors `e_k` aligned with [`SolveTrace::xi_sequence`].
    pub fn errors(&self, f_star: f64) -> Vec<f64> {
        self.xi_sequence().into_iter().map(|xi| -f_star - xi).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolveState {
    pub k: usize,
    pub xi_k: f64,
    pub bundle: Bundle,
    pub best_x: Option<Vector>,
    pub best_f: f64,
    pub trace: SolveTrace,
    stall: usize,
}

impl SolveState {
    pub fn new(p: &ProblemSpec, xi0: f64, cfg: &SolverConfig) -> Self {
        Self {
            k: 0,
            xi_k: xi0,
            bundle: Bundle::new(cfg.bundle_capacity),
            best_x: None,
            best_f: f64::INFINITY,
            trace: SolveTrace {
                problem: p.name.clone(),
                backend: cfg.backend,
                records: Vec::new(),
                termination: None,
                f_hat: -xi0,
                best_x: None,
                best_f: f64::INFINITY,
                setup_calls: 0,
                call_values: Vec::new(),
            },
            stall: 0,
        }
    }

    pub fn terminated(&self) -> bool {
        self.trace.termination.is_some()
    }

    fn offer(&mut self, x: &Vector, f: f64) {
        if f < self.best_f {
            self.best_f = f;
            self.best_x = Some(x.clone());
            self.trace.best_f = f;
            self.trace.best_x = Some(x.as_slice().to_vec());
        }
    }

    fn finish(&mut self, reason: Termination) {
        self.trace.termination = Some(reason);
    }
}

/// `ξ_0 = −f(x0) ≤ f*(0)`.
pub fn initial_xi(p: &ProblemSpec, x0: &Vector) -> Result<f64> {
    Ok(-p.oracle_eval(x0)?.0)
}

/// `∂f*(g_p; z) − ∂f*(0; z)` with `z = g_p/‖g_p‖`, using `x_p·z` for the
/// first term. `None` when `g_p = 0` or the solution set is unknown.
pub fn theta_diagnostic(p: &ProblemSpec, proj: &EpiProjection, xi_k: f64) -> Option<f64> {
    let gn = proj.g_norm();
    if gn == 0.0 {
        return None;
    }
    let z = &proj.g_p / gn;
    let x_p = match &proj.x_p {
        Some(x) => x.clone(),
        None => trial_point(xi_k, proj).ok()?,
    };
    let support = p.x_star_support(&z)?;
    Some(x_p.dot(&z) - support)
}

fn invariant_tol(cfg: &SolverConfig, scale: f64) -> f64 {
    let base = match cfg.backend {
        Backend::Exact => 1e-9,
        Backend::Cutting => 1e-6,
    };
    base * (1.0 + scale.abs())
}

/// One Project / Support-Update iteration.
pub fn step(p: &ProblemSpec, oracle: &mut Oracle<'_>, state: &mut SolveState, cfg: &SolverConfig) -> Result<()> {
    if state.terminated() {
        return Err(Error::Contract("step called on a terminated solve".into()));
    }
    let calls0 = oracle.calls();
    let xi_k = state.xi_k;
    let proj = match cfg.backend {
        Backend::Exact => project_exact(p, xi_k, cfg.eps_inner)?,
        Backend::Cutting => project_cutting(oracle, xi_k, &mut state.bundle, cfg)?,
    };
    let e_k = p.f_star.map(|fs| -fs - xi_k);
    let tol = invariant_tol(cfg, xi_k);
    if proj.xi_p < xi_k - tol {
        return Err(Error::AlgorithmInvariant(format!(
            "projection moved down: xi_p = {:e} < xi_k = {xi_k:e}",
            proj.xi_p
        )));
    }

    let g_norm = proj.g_norm();
    if g_norm <= cfg.eps_g {
        state.trace.records.push(TraceRecord {
            k: state.k,
            xi_k,
            xi_p: proj.xi_p,
            g_norm,
            x_p: None,
            f_xp: None,
            e_k,
            theta_k: None,
            oracle_calls: oracle.calls() - calls0,
            inner_iters: proj.inner_iters,
            cuts_added: proj.cuts_added,
        });
        state.trace.f_hat = -proj.xi_p;
        state.k += 1;
        state.finish(Termination::Optimal);
        return Ok(());
    }

    let x_p = match &proj.x_p {
        Some(x) => x.clone(),
        None => trial_point(xi_k, &proj)?,
    };
    let f_xp = match proj.f_xp {
        Some(f) => f,
        None => oracle.eval(&x_p)?.0,
    };
    let theta = theta_diagnostic(p, &proj, xi_k);
    let xi_next = -f_xp;
    if !(xi_next >= proj.xi_p - tol) {
        return Err(Error::AlgorithmInvariant(format!(
            "support update fell below the projection: -f(x_p) = {xi_next:e} < xi_p = {:e}",
            proj.xi_p
        )));
    }

    state.trace.records.push(TraceRecord {
        k: state.k,
        xi_k,
        xi_p: proj.xi_p,
        g_norm,
        x_p: Some(x_p.as_slice().to_vec()),
        f_xp: Some(f_xp),
        e_k,
        theta_k: theta,
        oracle_calls: oracle.calls() - calls0,
        inner_iters: proj.inner_iters,
        cuts_added: proj.cuts_added,
    });
    state.offer(&x_p, f_xp);
    state.trace.f_hat = -xi_next;
    state.stall = if xi_next - xi_k <= cfg.eps_xi { state.stall + 1 } else { 0 };
    state.xi_k = xi_next;
    state.k += 1;
    if state.stall >= STALL_STEPS {
        state.finish(Termination::Stalled);
    } else if state.k >= cfg.max_outer {
        state.finish(Termination::MaxOuter);
    }
    Ok(())
}

fn drive(p: &ProblemSpec, oracle: &mut Oracle<'_>, mut state: SolveState, cfg: &SolverConfig) -> Result<SolveTrace> {
    while !state.terminated() {
        match step(p, oracle, &mut state, cfg) {
            Ok(()) => {}
            Err(Error::BudgetExhausted(_)) => state.finish(Termination::BudgetExhausted),
            Err(e) => return Err(e),
        }
    }
    state.trace.call_values = std::mem::take(&mut oracle.history);
    Ok(state.trace)
}

/// Runs the method from `x0`, using `ξ_0 = −f(x0)`.
pub fn solve(p: &ProblemSpec, x0: &Vector, cfg: &SolverConfig) -> Result<SolveTrace> {
    cfg.validate()?;
    check_dim(p.dim(), x0.len())?;
    if !all_finite(x0) {
        return Err(Error::Usage("x0 must be finite".into()));
    }
    let mut oracle = Oracle::new(p, cfg.max_oracle_calls);
    let (f0, g0) = match oracle.eval(x0) {
        Ok(v) => v,
        Err(Error::BudgetExhausted(_)) => {
            let mut state = SolveState::new(p, f64::NEG_INFINITY, cfg);
            state.finish(Termination::BudgetExhausted);
            return Ok(state.trace);
        }
        Err(e) => return Err(e),
    };
    let mut state = SolveState::new(p, -f0, cfg);
    state.trace.setup_calls = oracle.calls();
    state.offer(x0, f0);
    if cfg.backend == Backend::Cutting {
        state.bundle.push(crate::model::Cut::new(x0.clone(), f0, g0))?;
    }
    drive(p, &mut oracle, state, cfg)
}

/// Runs the method from an explicit `ξ_0 ≤ f*(0)`.
pub fn solve_from_xi(p: &ProblemSpec, xi0: f64, cfg: &SolverConfig) -> Result<SolveTrace> {
    cfg.validate()?;
    if !xi0.is_finite() {
        return Err(Error::Usage("xi0 must be finite".into()));
    }
    let mut oracle = Oracle::new(p, cfg.max_oracle_calls);
    drive(p, &mut oracle, SolveState::new(p, xi0, cfg), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{find, sharp_l1};
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn initial_xi_examples() {
        let p1 = find("quad1d").unwrap();
        assert_eq!(initial_xi(&p1, &v(&[0.0])).unwrap(), -0.5);
        assert_eq!(initial_xi(&p1, &v(&[1.0])).unwrap(), 0.0);
        let p3 = sharp_l1("l1", Vector::zeros(3));
        assert_eq!(initial_xi(&p3, &Vector::from_element(3, 1.0)).unwrap(), -3.0);
    }

    #[test]
    fn optimal_start_terminates_immediately() {
        let p1 = find("quad1d").unwrap();
        let t = solve(&p1, &v(&[1.0]), &SolverConfig::default()).unwrap();
        assert_eq!(t.termination, Some(Termination::Optimal));
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.records[0].k, 0);
        assert_eq!(t.f_hat, 0.0);
        assert_eq!(t.total_oracle_calls(), 1);
    }

    #[test]
    fn worked_step_and_theta() {
        let p1 = find("quad1d").unwrap();
        let cfg = SolverConfig {
            max_outer: 1,
            ..SolverConfig::default()
        };
        let t = solve_from_xi(&p1, -1.0, &cfg).unwrap();
        let r = &t.records[0];
        assert_abs_diff_eq!(-r.f_xp.unwrap(), -0.08161, epsilon = 1e-4);
        let theta = r.theta_k.unwrap();
        assert_abs_diff_eq!(theta, 0.404, epsilon = 1e-3);
        assert!(0.0816 <= r.g_norm * theta);
        assert_eq!(t.termination, Some(Termination::MaxOuter));
    }

    #[test]
    fn quadrant_terminates_in_one_step() {
        let p3 = sharp_l1("l1", Vector::zeros(1));
        let t = solve_from_xi(&p3, -1.0, &SolverConfig::default()).unwrap();
        assert_eq!(t.iterations(), 1);
        assert_eq!(t.termination, Some(Termination::Optimal));
        assert_abs_diff_eq!(t.f_hat, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn at_the_foot_no_oracle_calls() {
        let p = find("quadN_2").unwrap();
        let t = solve_from_xi(&p, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(t.termination, Some(Termination::Optimal));
        assert_eq!(t.total_oracle_calls(), 0);
    }

    #[test]
    fn budget_exhaustion_is_a_termination() {
        let p = find("quad1d").unwrap();
        let mut cfg = SolverConfig::with_backend(Backend::Cutting);
        cfg.max_oracle_calls = Some(5);
        let t = solve(&p, &v(&[0.0]), &cfg).unwrap();
        assert_eq!(t.termination, Some(Termination::BudgetExhausted));
        assert!(!t.converged());
        assert!(t.total_oracle_calls() <= 5);
    }

    #[test]
    fn solves_catalog_with_exact_engine() {
        for p in crate::problems::catalog().into_iter().filter(|p| p.has_conjugate()) {
            let t = solve(&p, &Vector::zeros(p.dim()), &SolverConfig::default()).unwrap();
            assert!(t.converged(), "{}: {:?}", p.name, t.termination);
            assert!((t.f_hat - p.f_star.unwrap()).abs() <= 1e-8, "{}: {}", p.name, t.f_hat);
            let xs = t.xi_sequence();
            assert!(xs.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{}", p.name);
        }
    }

    #[test]
    fn dimension_and_finiteness_checks() {
        let p = find("quadN_2").unwrap();
        let cfg = SolverConfig::default();
        assert!(matches!(solve(&p, &v(&[0.0]), &cfg), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(solve(&p, &v(&[0.0, f64::NAN]), &cfg), Err(Error::Usage(_))));
    }
}
