//! Acceptance criteria, runnable from tests and from the command line.
//!
//! Every criterion returns a [`CriterionOutcome`] carrying the measured
//! quantity next to its threshold, so a failure says by how much.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::epiproject::{project_cutting, project_exact, trial_point};
use crate::error::{Error, Result};
use crate::model::{Backend, Bundle, Cut, EpiPoint, SolverConfig, Vector};
use crate::oracle::Oracle;
use crate::polyproj::{kkt_residual, project_cuts, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use crate::problems::{catalog, find, standard_normal, ProblemSpec};
use crate::rates::ERROR_FLOOR;
use crate::reference::{epi_projection_1d, grid_polyproj_1d};
use crate::solver::{solve, solve_from_xi, SolveTrace, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteKind {
    Rates,
    Lemmas,
    Engines,
    All,
}

impl SuiteKind {
    pub fn criteria(self) -> &'static [u8] {
        match self {
            SuiteKind::Rates => &[1, 2, 3, 4],
            SuiteKind::Lemmas => &[6, 7, 8],
            SuiteKind::Engines => &[5, 9, 10],
            SuiteKind::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        }
    }
}

impl std::str::FromStr for SuiteKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(SuiteKind::Rates),
            "lemmas" => Ok(SuiteKind::Lemmas),
            "engines" => Ok(SuiteKind::Engines),
            "all" => Ok(SuiteKind::All),
            other => Err(Error::Usage(format!("unknown suite `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub measured: String,
}

impl fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{verdict} [{:>2}] {}: {}", self.id, self.name, self.measured)
    }
}

/// Iteration counts of the finite-termination runs from `x0 = 0`, pinned
/// after the first verified run.
pub const PINNED_FINITE_ITERATIONS: [(&str, Backend, usize); 7] = [
    ("sharpL1_1", Backend::Exact, 2),
    ("sharpL1_2", Backend::Exact, 2),
    ("sharpL1_3", Backend::Exact, 2),
    ("sharpL1_4", Backend::Exact, 2),
    ("sharpL1_5", Backend::Exact, 3),
    ("maxAffine_2", Backend::Cutting, 2),
    ("maxAffine_3", Backend::Cutting, 3),
];

/// Worked example on `f(x) = ½(x − 1)²` from `ξ_0 = −1`:
/// `(g_p, ξ^p, x_p, ξ_1)`, pinned after the grid recomputation agreed.
pub const WORKED_EXAMPLE: [f64; 4] = [-0.4040, -0.3224, 0.5960, -0.0816];

pub fn run_suite(kind: SuiteKind, seed: u64) -> Vec<CriterionOutcome> {
    kind.criteria().iter().map(|&id| run_criterion(id, seed)).collect()
}

pub fn run_criterion(id: u8, seed: u64) -> CriterionOutcome {
    let (name, result) = match id {
        1 => ("monotone convergence", monotone_convergence()),
        2 => ("quadratic rate", quadratic_rate()),
        3 => ("finite termination", finite_termination()),
        4 => ("superlinear but not quadratic", superlinear_rate()),
        5 => ("engine equivalence", engine_equivalence()),
        6 => ("sub-quadratic conjugate at 0", sup_sub_lemma(seed)),
        7 => ("linear conjugate near 0", lincon_lemma(seed)),
        8 => ("decrease estimate", decrease_estimate()),
        9 => ("polyhedral projection", polyproj_correctness(seed)),
        10 => ("worked example", worked_example()),
        _ => ("unknown", Err(Error::Usage(format!("no criterion {id}")))),
    };
    match result {
        Ok((passed, measured)) => CriterionOutcome { id, name, passed, measured },
        Err(e) => CriterionOutcome {
            id,
            name,
            passed: false,
            measured: format!("error: {e}"),
        },
    }
}

type Check = Result<(bool, String)>;

fn conjugate_problems() -> Vec<ProblemSpec> {
    catalog().into_iter().filter(|p| p.has_conjugate()).collect()
}

fn problem(name: &str) -> Result<ProblemSpec> {
    find(name).ok_or_else(|| Error::Usage(format!("catalog lacks `{name}`")))
}

fn sample_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    let dir = Vector::from_fn(n, |_, _| standard_normal(rng));
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    let norm = dir.norm();
    if norm == 0.0 {
        Vector::zeros(n)
    } else {
        dir * (r / norm)
    }
}

fn tolerances(backend: Backend) -> (f64, f64) {
    match backend {
        Backend::Exact => (1e-9, 1e-8),
        Backend::Cutting => (1e-6, 1e-5),
    }
}

fn monotone_convergence() -> Check {
    let mut worst_drop: f64 = 0.0;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut failures = Vec::new();
    let mut runs = 0;
    for p in catalog() {
        let fs = p.f_star.expect("catalog problems know f_star");
        for backend in [Backend::Exact, Backend::Cutting] {
            let cfg = SolverConfig::with_backend(backend);
            let trace = match solve(&p, &Vector::zeros(p.dim()), &cfg) {
                Ok(t) => t,
                // no conjugate: the exact engine must refuse rather than guess
                Err(Error::Capability { .. }) if !p.has_conjugate() && backend == Backend::Exact => continue,
                Err(e) => {
                    failures.push(format!("{}/{backend}: {e}", p.name));
                    continue;
                }
            };
            runs += 1;
            let (sandwich, final_tol) = tolerances(backend);
            let xi = trace.xi_sequence();
            let drop = xi.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max);
            let excess = xi.iter().map(|x| x + fs).fold(f64::NEG_INFINITY, f64::max);
            worst_drop = worst_drop.max(drop);
            worst_excess = worst_excess.max(excess);
            let final_err = (-trace.records.last().map_or(f64::NAN, |r| r.xi_k) - fs).abs();
            if drop > 0.0 || excess > sandwich || !(final_err <= final_tol) || !trace.converged() {
                failures.push(format!(
                    "{}/{backend}: drop {drop:.1e}, excess {excess:.1e}, final error {final_err:.1e}",
                    p.name
                ));
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "{runs} runs; largest xi decrease {worst_drop:.1e}; max xi_k + f_star {worst_excess:.1e}{}",
            summary(&failures)
        ),
    ))
}

fn sci(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>().join(" ")
}

fn summary(failures: &[String]) -> String {
    if failures.is_empty() {
        String::new()
    } else {
        format!("; failures: {}", failures.join("; "))
    }
}

/// Start points with `e_0 ∈ [0.5, 2]`.
fn quadratic_starts() -> Vec<(&'static str, Vector)> {
    vec![
        ("quad1d", Vector::zeros(1)),
        ("quadN_2", Vector::zeros(2)),
        ("quadN_5", Vector::from_element(5, 0.5)),
    ]
}

fn quadratic_rate() -> Check {
    let mut failures = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    let mut iters = Vec::new();
    // tighter than the default stop so the run reaches the 1e-12 level
    let cfg = SolverConfig {
        eps_g: 1e-14,
        ..SolverConfig::with_backend(Backend::Exact)
    };
    for (name, x0) in quadratic_starts() {
        let p = problem(name)?;
        let tau = p.tau.expect("quadratic problems carry tau");
        let e = solve(&p, &x0, &cfg)?.errors(p.f_star.expect("known"));
        if !(0.5..=2.0).contains(&e[0]) {
            failures.push(format!("{name}: e_0 = {:.3} outside [0.5, 2]", e[0]));
        }
        for k in 1..e.len().saturating_sub(1) {
            if e[k] < 1e-12 {
                break;
            }
            let ratio = e[k + 1] / (2.0 / tau * e[k] * e[k]);
            worst_ratio = worst_ratio.max(ratio);
            if ratio > 1.0 {
                failures.push(format!("{name}: e_{} = {:.2e} above 2/tau e_{k}^2", k + 1, e[k + 1]));
            }
        }
        match e.iter().position(|&v| v < 1e-12) {
            Some(k) if k <= 8 => iters.push(format!("{name} {k}")),
            _ => failures.push(format!("{name}: no e_k < 1e-12 within 8 iterations ({})", sci(&e))),
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "max e_(k+1)/(2 e_k^2/tau) = {worst_ratio:.3}; iterations to 1e-12: {}{}",
            iters.join(", "),
            summary(&failures)
        ),
    ))
}

fn finite_termination() -> Check {
    let mut failures = Vec::new();
    let mut counts = Vec::new();
    for (name, backend, pinned) in PINNED_FINITE_ITERATIONS {
        let p = problem(name)?;
        let trace = solve(&p, &Vector::zeros(p.dim()), &SolverConfig::with_backend(backend))?;
        let last = trace.records.last().ok_or_else(|| Error::Engine("empty trace".into()))?;
        let err = (-last.xi_k - p.f_star.expect("known")).abs();
        let n = trace.iterations();
        counts.push(format!("{name} {n}"));
        if trace.termination != Some(Termination::Optimal) || last.g_norm > 1e-10 || err > 1e-10 || n > 10 {
            failures.push(format!(
                "{name}: {:?} after {n}, |g_p| {:.1e}, error {err:.1e}",
                trace.termination, last.g_norm
            ));
        }
        if n != pinned {
            failures.push(format!("{name}: {n} iterations, pinned {pinned}"));
        }
    }
    Ok((failures.is_empty(), format!("iterations: {}{}", counts.join(", "), summary(&failures))))
}

/// `(λ_k, q_k)` over consecutive errors both above the floor.
fn ratios(e: &[f64]) -> (Vec<f64>, Vec<f64>) {
    e.windows(2)
        .filter(|w| w[0] > ERROR_FLOOR && w[1] > ERROR_FLOOR)
        .map(|w| (w[1] / w[0], w[1] / (w[0] * w[0])))
        .unzip()
}

fn superlinear_rate() -> Check {
    let mut failures = Vec::new();
    let mut shown = Vec::new();
    for name in ["quartic_1", "quartic_3"] {
        let p = problem(name)?;
        let e = solve(&p, &Vector::zeros(p.dim()), &SolverConfig::with_backend(Backend::Exact))?
            .errors(p.f_star.expect("known"));
        let (lam, q) = ratios(&e);
        if lam.len() < 3 {
            failures.push(format!("{name}: only {} usable steps", lam.len()));
            continue;
        }
        let tail = &lam[lam.len() - 3..];
        let shrinking = tail.windows(2).all(|w| w[1] <= 0.8 * w[0]);
        let q_increasing = q.windows(2).all(|w| w[1] > w[0]);
        shown.push(format!("{name} lambda tail [{}], q [{}]", sci(tail), sci(&q)));
        if !shrinking {
            failures.push(format!("{name}: lambda not shrinking by 20%"));
        }
        if !q_increasing {
            failures.push(format!("{name}: q_k not increasing"));
        }
    }
    Ok((failures.is_empty(), format!("{}{}", shown.join("; "), summary(&failures))))
}

/// Starting levels `ξ = −f_star − e_0`.
const START_GAPS: [f64; 5] = [2.0, 1.0, 0.5, 0.1, 0.01];

fn engine_equivalence() -> Check {
    let tol = 1e-6;
    let cfg = SolverConfig::with_backend(Backend::Cutting);
    let mut worst_proj: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    let mut failures = Vec::new();
    let mut cases = 0;
    for p in conjugate_problems() {
        let fs = p.f_star.expect("known");
        for gap in START_GAPS {
            cases += 1;
            let xi = -fs - gap;
            let exact = project_exact(&p, xi, cfg.eps_inner)?;
            let mut oracle = Oracle::new(&p, None);
            let mut bundle = Bundle::new(cfg.bundle_capacity);
            let cut = project_cutting(&mut oracle, xi, &mut bundle, &cfg)?;
            let d = (exact.xi_p - cut.xi_p).abs().max((&exact.g_p - &cut.g_p).amax());
            worst_proj = worst_proj.max(d);
            if d > tol {
                failures.push(format!("{} xi={xi}: projection differs by {d:.1e}", p.name));
            }

            let te = solve_from_xi(&p, xi, &SolverConfig::with_backend(Backend::Exact))?;
            let tc = solve_from_xi(&p, xi, &cfg)?;
            let (se, sc) = (te.xi_sequence(), tc.xi_sequence());
            let d = se.iter().zip(&sc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // a run may take one extra step to certify; extra values must agree too
            let tail = |s: &[f64], other: &[f64]| {
                let end = *other.last().unwrap_or(&f64::NAN);
                s.iter().skip(other.len()).map(|v| (v - end).abs()).fold(0.0, f64::max)
            };
            let d = d.max(tail(&se, &sc)).max(tail(&sc, &se));
            worst_trace = worst_trace.max(d);
            if !(d <= tol) || !te.converged() || !tc.converged() {
                failures.push(format!("{} xi={xi}: traces differ by {d:.1e}", p.name));
            }
        }
    }
    Ok((
        failures.is_empty(),
        format!(
            "{cases} cases; max projection gap {worst_proj:.1e}; max trace gap {worst_trace:.1e}{}",
            summary(&failures)
        ),
    ))
}

fn sup_sub_lemma(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut samples = 0;
    for name in ["quad1d", "quadN_2", "quadN_5", "quadPlusL1_3"] {
        let p = problem(name)?;
        let tau = p.tau.expect("sup-quadratic problems carry tau");
        let xs = p.x_star.clone().expect("known");
        let f0 = p.conjugate_eval(&Vector::zeros(p.dim()))?;
        for _ in 0..1000 {
            let g = sample_ball(&mut rng, p.dim(), 1.0);
            let excess = p.conjugate_eval(&g)? - f0 - g.dot(&xs) - g.norm_squared() / (2.0 * tau);
            worst = worst.max(excess);
            samples += 1;
            if excess > 1e-12 {
                violations += 1;
            }
        }
    }
    Ok((
        violations == 0,
        format!("{samples} samples, {violations} violations, max excess over |g|^2/(2 tau) {worst:.1e}"),
    ))
}

fn lincon_lemma(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11c0);
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    let mut samples = 0;
    let names = catalog()
        .into_iter()
        .filter(|p| p.name.starts_with("sharpL1_") || p.polyhedral.is_some())
        .collect::<Vec<_>>();
    for p in names {
        let rho = p.rho.ok_or_else(|| Error::Usage(format!("{} has no sharpness radius", p.name)))?;
        let xs = p.x_star.clone().expect("sharp minimum is known");
        let fxs = p.oracle_eval(&xs)?.0;
        for _ in 0..1000 {
            let g = sample_ball(&mut rng, p.dim(), rho / 2.0);
            let conj = match &p.polyhedral {
                Some(m) => m.conjugate_lp(&g),
                None => p.conjugate_eval(&g)?,
            };
            let d = (conj - (g.dot(&xs) - fxs)).abs();
            worst = worst.max(d);
            samples += 1;
            if !(d <= 1e-12) {
                violations += 1;
            }
        }
    }
    Ok((
        violations == 0,
        format!("{samples} samples, {violations} violations, max |f*(g) - (g x* - f(x*))| {worst:.1e}"),
    ))
}

fn exact_traces() -> Result<Vec<(ProblemSpec, SolveTrace)>> {
    let cfg = SolverConfig::with_backend(Backend::Exact);
    let mut out = Vec::new();
    for p in conjugate_problems() {
        let t = solve(&p, &Vector::zeros(p.dim()), &cfg)?;
        out.push((p.clone(), t));
        let fs = p.f_star.expect("known");
        for gap in START_GAPS {
            out.push((p.clone(), solve_from_xi(&p, -fs - gap, &cfg)?));
        }
    }
    Ok(out)
}

fn decrease_estimate() -> Check {
    let mut steps = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    for (p, t) in exact_traces()? {
        let fs = p.f_star.expect("known");
        for r in &t.records {
            let (Some(theta), Some(f_xp)) = (r.theta_k, r.f_xp) else { continue };
            let excess = (f_xp - fs) - r.g_norm * theta;
            worst = worst.max(excess);
            steps += 1;
            if excess > 1e-8 {
                violations += 1;
            }
        }
    }
    Ok((
        violations == 0 && steps > 0,
        format!("{steps} steps, {violations} violations, max e_(k+1) - |g_p| theta_k {worst:.1e}"),
    ))
}

fn random_cuts(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Cut> {
    (0..m)
        .map(|_| {
            let x = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            Cut::new(x, rng.gen_range(-2.0..2.0), Vector::zeros(n))
        })
        .collect()
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> EpiPoint {
    EpiPoint::new(rng.gen_range(-3.0..3.0), Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0)))
}

fn polyproj_correctness(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9017);
    let mut worst_kkt: f64 = 0.0;
    let mut bad_kkt = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(1..=10);
        let cuts = random_cuts(&mut rng, n, m);
        let p = random_point(&mut rng, n);
        let r = project_cuts(&p, &cuts, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        let res = kkt_residual(&p, &r.point, &cuts, &r.multipliers)?;
        worst_kkt = worst_kkt.max(res);
        if !(res <= 1e-8) {
            bad_kkt += 1;
        }
    }
    let step = 1e-3;
    let mut worst_grid: f64 = 0.0;
    let mut bad_grid = 0;
    for _ in 0..50 {
        let m = rng.gen_range(1..=10);
        let cuts = random_cuts(&mut rng, 1, m);
        let p = random_point(&mut rng, 1);
        let r = project_cuts(&p, &cuts, DEFAULT_TOL, DEFAULT_MAX_SWEEPS)?;
        let q = grid_polyproj_1d(&p, &cuts, step);
        let d = (q.mu - r.point.mu).abs().max((q.g[0] - r.point.g[0]).abs());
        worst_grid = worst_grid.max(d);
        if d > 2.0 * step {
            bad_grid += 1;
        }
    }
    Ok((
        bad_kkt == 0 && bad_grid == 0,
        format!(
            "500 instances, max KKT residual {worst_kkt:.1e} ({bad_kkt} over 1e-8); 50 grid instances, max deviation {worst_grid:.1e} ({bad_grid} over 2e-3)"
        ),
    ))
}

fn worked_example() -> Check {
    let p = problem("quad1d")?;
    let xi0 = -1.0;
    let f = |x: f64| 0.5 * (x - 1.0) * (x - 1.0);
    let (g_ref, xi_p_ref) = epi_projection_1d(&f, xi0, (-20.0, 20.0), (-3.0, 3.0));
    let x_ref = -g_ref / (xi_p_ref - xi0);
    let grid = [g_ref, xi_p_ref, x_ref, -f(x_ref)];

    let proj = project_exact(&p, xi0, 1e-12)?;
    let x_p = trial_point(xi0, &proj)?;
    let xi1 = -p.oracle_eval(&x_p)?.0;
    let engine = [proj.g_p[0], proj.xi_p, x_p[0], xi1];

    let mut worst: f64 = 0.0;
    for i in 0..4 {
        worst = worst.max((grid[i] - WORKED_EXAMPLE[i]).abs());
        worst = worst.max((engine[i] - grid[i]).abs());
    }
    Ok((
        worst <= 1e-3,
        format!(
            "g_p {:.4}, xi_p {:.4}, x_p {:.4}, xi_1 {:.4}; max deviation from grid/pinned {worst:.1e}",
            engine[0], engine[1], engine[2], engine[3]
        ),
    ))
}
