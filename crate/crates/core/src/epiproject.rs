//! Projection of `(ξ_k, 0)` onto `epi f*`.
//!
//! The exact engine root-finds the scalar `λ = ξ^p − ξ_k` through the
//! conjugate's prox. The cutting engine only calls the subgradient oracle:
//! every oracle pair `(x, f(x), s)` yields both a half-space containing
//! `epi f*` and the point `(s·x − f(x), s)` on its graph, so the projection is
//! bracketed between an inner hull and an outer polyhedron.

use crate::error::{Error, Result};
use crate::model::{Bundle, EpiPoint, SolverConfig, Vector};
use crate::nnls::project_onto_hull;
use crate::oracle::Oracle;
use crate::polyproj::project_polyhedron;
use crate::problems::ProblemSpec;

#[derive(Debug, Clone)]
pub struct EpiProjection {
    pub xi_k: f64,
    pub xi_p: f64,
    pub g_p: Vector,
    /// `−g_p / (ξ^p − ξ_k)`; absent when `g_p = 0`.
    pub x_p: Option<Vector>,
    /// `f(x_p)` when the engine already paid for it.
    pub f_xp: Option<f64>,
    /// Violation of the projection optimality condition at the result.
    pub opt_residual: f64,
    /// Height of the candidate above the newest cut's hyperplane; zero once
    /// that cut supports the epigraph at the candidate.
    pub membership_gap: f64,
    pub cuts_added: usize,
    pub inner_iters: usize,
    pub oracle_calls: usize,
    /// Distances from `(ξ_k, 0)` to the outer model, one per inner iteration.
    pub outer_distances: Vec<f64>,
}

impl EpiProjection {
    fn at_point(xi_k: f64, xi_p: f64, dim: usize) -> Self {
        Self {
            xi_k,
            xi_p,
            g_p: Vector::zeros(dim),
            x_p: None,
            f_xp: None,
            opt_residual: 0.0,
            membership_gap: 0.0,
            cuts_added: 0,
            inner_iters: 0,
            oracle_calls: 0,
            outer_distances: Vec::new(),
        }
    }

    pub fn g_norm(&self) -> f64 {
        self.g_p.norm()
    }

    pub fn point(&self) -> EpiPoint {
        EpiPoint::new(self.xi_p, self.g_p.clone())
    }

    /// Squared distance `(ξ^p − ξ_k)² + ‖g_p‖²`.
    pub fn distance_squared(&self) -> f64 {
        (self.xi_p - self.xi_k).powi(2) + self.g_p.norm_squared()
    }
}

/// `x_p = −g_p / (ξ^p − ξ_k)`.
pub fn trial_point(xi_k: f64, proj: &EpiProjection) -> Result<Vector> {
    let denom = proj.xi_p - xi_k;
    if !(denom > 0.0) {
        return Err(Error::Contract(format!(
            "trial point needs xi_p > xi_k, got xi_p - xi_k = {denom:e}"
        )));
    }
    Ok(&proj.g_p * (-1.0 / denom))
}

const MAX_BRACKET_DOUBLINGS: usize = 200;
const MAX_BISECTIONS: usize = 400;

/// Exact projection through `g_p = prox_{λ f*}(0)` with `λ` the root of the
/// decreasing function `φ(λ) = f*(prox_{λ f*}(0)) − ξ_k − λ`.
pub fn project_exact(p: &ProblemSpec, xi_k: f64, tol: f64) -> Result<EpiProjection> {
    if !xi_k.is_finite() {
        return Err(Error::Usage(format!("xi_k must be finite, got {xi_k}")));
    }
    let n = p.dim();
    let zero = Vector::zeros(n);
    let f0 = p.conjugate_eval(&zero)?;
    p.conjugate_prox(&zero, 1.0)?;
    if f0 <= xi_k {
        // (ξ_k, 0) is already in the epigraph
        return Ok(EpiProjection::at_point(xi_k, xi_k, n));
    }

    let phi = |lam: f64| -> Result<(f64, Vector, f64)> {
        let g = p.conjugate_prox(&zero, lam)?;
        let fg = p.conjugate_eval(&g)?;
        Ok((fg - xi_k - lam, g, fg))
    };

    let mut lo = 0.0;
    let mut hi = f64::max(1.0, 2.0 * (f0 - xi_k));
    let mut doublings = 0;
    while phi(hi)?.0 >= 0.0 {
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(Error::Engine(format!("no bracket for the projection root at xi_k = {xi_k:e}")));
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut iters = 0;
    while hi - lo > 4.0 * f64::EPSILON * hi && iters < MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid)?.0 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iters += 1;
    }
    let lam = 0.5 * (lo + hi);
    let (resid, g, fg) = phi(lam)?;
    // the bracket has collapsed to round-off; a large residual means φ jumps
    // across its root, which only happens if the conjugate is inconsistent
    let scale = 1.0 + fg.abs() + xi_k.abs() + lam;
    if resid.abs() > tol.max(1e3 * f64::EPSILON * scale) {
        return Err(Error::Engine(format!(
            "projection root not resolved: residual {resid:e}"
        )));
    }
    let x_p = (g.norm() > 0.0 && lam > 0.0).then(|| &g * (-1.0 / lam));
    Ok(EpiProjection {
        xi_k,
        xi_p: fg,
        g_p: g,
        x_p,
        f_xp: None,
        opt_residual: resid.abs(),
        membership_gap: 0.0,
        cuts_added: 0,
        inner_iters: iters + doublings,
        oracle_calls: 0,
        outer_distances: Vec::new(),
    })
}

/// Oracle-only projection.
///
/// Each pass projects `(ξ_k, 0)` onto the inner model (hull of graph points
/// plus the upward ray), queries the oracle at the candidate's trial point
/// and stops once the Frank–Wolfe gap of the candidate is small relative to
/// its squared distance. The bundle is enriched in place and can be reused
/// for the next `ξ_k`.
pub fn project_cutting(
    oracle: &mut Oracle<'_>,
    xi_k: f64,
    bundle: &mut Bundle,
    cfg: &SolverConfig,
) -> Result<EpiProjection> {
    if !xi_k.is_finite() {
        return Err(Error::Usage(format!("xi_k must be finite, got {xi_k}")));
    }
    let n = oracle.problem().dim();
    let calls0 = oracle.calls();
    let p = EpiPoint::on_axis(xi_k, n);
    let mut cuts_added = 0;
    if bundle.is_empty() {
        bundle.push(oracle.cut(&Vector::zeros(n))?)?;
        cuts_added += 1;
    }

    let mut outer_distances = Vec::new();
    let mut degenerate_steps = 0i32;
    let mut last_gap = f64::INFINITY;
    let mut best_w = f64::INFINITY;
    let mut flat_steps = 0;

    for iter in 1..=cfg.max_inner {
        let atoms: Vec<EpiPoint> = bundle.cuts.iter().map(|c| c.contact_point()).collect();
        let hull = project_onto_hull(&p, &atoms)
            .ok_or_else(|| Error::Engine("inner model projection failed".into()))?;
        let c = hull.point.clone();
        let w_norm = c.distance(&p);
        let lam = c.mu - xi_k;

        // within round-off of the atoms that carry the hull point
        let atom_scale = atoms
            .iter()
            .zip(&hull.weights)
            .filter(|(_, &wt)| wt > 0.0)
            .map(|(v, _)| v.mu.abs().max(v.g.amax()))
            .fold(0.0, f64::max);
        if w_norm <= 16.0 * f64::EPSILON * (1.0 + xi_k.abs() + atom_scale) {
            let mut out = EpiProjection::at_point(xi_k, xi_k, n);
            out.cuts_added = cuts_added;
            out.inner_iters = iter;
            out.oracle_calls = oracle.calls() - calls0;
            out.outer_distances = outer_distances;
            return Ok(out);
        }

        let outer = project_polyhedron(&p, bundle, cfg.eps_inner).ok();
        if let Some(o) = &outer {
            outer_distances.push(o.point.distance(&p));
        }

        let degenerate = lam < 1e-3 * w_norm;
        let x_hat = if degenerate {
            degenerate_steps += 1;
            let scale = lam.max(w_norm * 2f64.powi(-degenerate_steps));
            &c.g * (-1.0 / scale)
        } else {
            &c.g * (-1.0 / lam)
        };
        let cut = oracle.cut(&x_hat)?;
        let fx = cut.fx;
        let g2 = c.g.norm_squared();
        if !degenerate {
            let gap = lam * c.mu + g2 + lam * fx;
            let floor = 64.0 * f64::EPSILON * (lam * c.mu.abs() + g2 + lam * fx.abs());
            last_gap = gap;
            // new cuts that no longer move the hull point mean the remaining
            // gap is below what the hull solve can resolve
            if w_norm >= best_w * (1.0 - 16.0 * f64::EPSILON) {
                flat_steps += 1;
            } else {
                flat_steps = 0;
                best_w = w_norm;
            }
            let stalled = flat_steps >= 3 && (gap / lam <= cfg.eps_inner || c.g.norm() <= cfg.eps_g);
            if stalled || gap <= cfg.eps_gap * w_norm * w_norm + floor {
                bundle.push(cut)?;
                cuts_added += 1;
                evict(bundle, &hull.weights, outer.as_ref().map(|o| o.multipliers.as_slice()));
                let g_zero = c.g.norm() == 0.0;
                return Ok(EpiProjection {
                    xi_k,
                    xi_p: c.mu,
                    x_p: (!g_zero).then_some(x_hat),
                    f_xp: (!g_zero).then_some(fx),
                    g_p: c.g,
                    opt_residual: gap.max(0.0),
                    membership_gap: (gap / lam).max(0.0),
                    cuts_added,
                    inner_iters: iter,
                    oracle_calls: oracle.calls() - calls0,
                    outer_distances,
                });
            }
        }
        bundle.push(cut)?;
        cuts_added += 1;
        evict(bundle, &hull.weights, outer.as_ref().map(|o| o.multipliers.as_slice()));
    }
    Err(Error::Engine(format!(
        "cutting projection did not converge in {} inner iterations (last gap {last_gap:e})",
        cfg.max_inner
    )))
}

/// Marks cuts carrying inner weight or outer multiplier as active (the cut
/// just appended is always active) and lets the bundle drop the rest.
fn evict(bundle: &mut Bundle, weights: &[f64], multipliers: Option<&[f64]>) {
    let over = bundle.capacity.is_some_and(|cap| bundle.len() > cap);
    if !over {
        return;
    }
    let active: Vec<bool> = (0..bundle.len())
        .map(|i| {
            weights.get(i).is_none_or(|&w| w > 0.0)
                || multipliers.and_then(|m| m.get(i)).is_some_and(|&l| l > 0.0)
        })
        .collect();
    bundle.evict(&active);
}
