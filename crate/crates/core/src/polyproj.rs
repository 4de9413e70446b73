//! Euclidean projection onto an intersection of cut half-spaces
//! `H_x = {(μ, g) : g·x − μ ≤ f(x)}`.
//!
//! Hildreth's dual coordinate ascent does the bulk of the work; an
//! active-set pass (least-distance form through NNLS) finishes to round-off
//! when nearly parallel cuts slow the sweeps down.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{check_dim, Bundle, Cut, EpiPoint, Vector};
use crate::nnls::nnls;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct PolyProjection {
    pub point: EpiPoint,
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub sweeps: usize,
}

fn stack(p: &EpiPoint) -> DVector<f64> {
    let mut v = DVector::zeros(p.dim() + 1);
    v[0] = p.mu;
    v.rows_mut(1, p.dim()).copy_from(&p.g);
    v
}

fn unstack(v: &DVector<f64>) -> EpiPoint {
    EpiPoint::new(v[0], Vector::from_iterator(v.len() - 1, v.iter().skip(1).copied()))
}

/// Rows `a_i = (−1, x_i)` and right-hand sides `b_i = f(x_i)`.
fn constraint_rows(cuts: &[Cut]) -> (Vec<DVector<f64>>, Vec<f64>) {
    let a = cuts.iter().map(|c| stack(&c.normal())).collect();
    let b = cuts.iter().map(|c| c.fx).collect();
    (a, b)
}

/// Largest violation among feasibility, stationarity, complementary slackness
/// and multiplier sign, recomputed from scratch.
pub fn kkt_residual(p: &EpiPoint, q: &EpiPoint, cuts: &[Cut], multipliers: &[f64]) -> Result<f64> {
    if multipliers.len() != cuts.len() {
        return Err(Error::DimensionMismatch {
            expected: cuts.len(),
            got: multipliers.len(),
        });
    }
    check_dim(p.dim(), q.dim())?;
    let mut stationarity = stack(q) - stack(p);
    let mut worst: f64 = 0.0;
    for (c, &lam) in cuts.iter().zip(multipliers) {
        check_dim(p.dim(), c.dim())?;
        let viol = c.violation_unchecked(q);
        worst = worst.max(viol).max(-lam).max(-lam * viol);
        stationarity += stack(&c.normal()) * lam;
    }
    Ok(worst.max(stationarity.amax()))
}

fn residual_of(p: &DVector<f64>, q: &DVector<f64>, a: &[DVector<f64>], b: &[f64], lam: &[f64]) -> f64 {
    let mut stat = q - p;
    let mut worst: f64 = 0.0;
    for ((ai, bi), &l) in a.iter().zip(b).zip(lam) {
        let viol = ai.dot(q) - bi;
        worst = worst.max(viol).max(-l).max(-l * viol);
        stat.axpy(l, ai, 1.0);
    }
    worst.max(stat.amax())
}

/// Active-set finish: the projection is a least-distance problem
/// `min ‖z‖ s.t. A z ≤ b − A p`, solved exactly through one NNLS on the
/// stacked system `[−Aᵀ; −(b − A p)ᵀ] u ≈ e_last`.
fn refine(p: &DVector<f64>, a: &[DVector<f64>], b: &[f64]) -> Option<(Vec<f64>, DVector<f64>)> {
    let m = a.len();
    let d = p.len();
    let mut e = DMatrix::zeros(d + 1, m);
    for (i, (ai, bi)) in a.iter().zip(b).enumerate() {
        for r in 0..d {
            e[(r, i)] = -ai[r];
        }
        e[(d, i)] = -(bi - ai.dot(p));
    }
    let mut f = DVector::zeros(d + 1);
    f[d] = 1.0;
    let sol = nnls(&e, &f);
    let resid = &e * &sol.x - &f;
    let denom = -resid[d];
    if !(denom > 0.0) {
        return None;
    }
    let lam: Vec<f64> = sol.x.iter().map(|u| u / denom).collect();
    let mut q = p.clone();
    for (ai, &l) in a.iter().zip(&lam) {
        if l != 0.0 {
            q.axpy(-l, ai, 1.0);
        }
    }
    Some((lam, q))
}

/// Projection of `p` onto the bundle's outer model.
pub fn project_polyhedron(p: &EpiPoint, bundle: &Bundle, tol: f64) -> Result<PolyProjection> {
    project_cuts(p, &bundle.cuts, tol, DEFAULT_MAX_SWEEPS)
}

pub fn project_cuts(p: &EpiPoint, cuts: &[Cut], tol: f64, max_sweeps: usize) -> Result<PolyProjection> {
    if cuts.is_empty() {
        return Err(Error::Usage("projection needs at least one cut".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Usage(format!("tolerance must be positive, got {tol}")));
    }
    for c in cuts {
        check_dim(p.dim(), c.dim())?;
    }
    let (a, b) = constraint_rows(cuts);
    let norms: Vec<f64> = a.iter().map(|ai| ai.norm_squared()).collect();
    let pv = stack(p);
    let m = cuts.len();
    let mut lam = vec![0.0; m];
    let mut q = pv.clone();
    let mut best = (f64::INFINITY, lam.clone(), q.clone());

    for sweep in 1..=max_sweeps {
        let mut change: f64 = 0.0;
        for i in 0..m {
            let viol = a[i].dot(&q) - b[i];
            let delta = (viol / norms[i]).max(-lam[i]);
            if delta != 0.0 {
                lam[i] += delta;
                q.axpy(-delta, &a[i], 1.0);
                change = change.max(delta.abs() * norms[i].sqrt());
            }
        }
        let res = residual_of(&pv, &q, &a, &b, &lam);
        if res < best.0 {
            best = (res, lam.clone(), q.clone());
        }
        if sweep == 1 || sweep % 10 == 0 || change <= tol {
            if let Some((lr, qr)) = refine(&pv, &a, &b) {
                let rr = residual_of(&pv, &qr, &a, &b, &lr);
                if rr < best.0 {
                    best = (rr, lr.clone(), qr.clone());
                }
                if rr <= tol {
                    return Ok(PolyProjection {
                        point: unstack(&qr),
                        multipliers: lr,
                        kkt_residual: rr,
                        sweeps: sweep,
                    });
                }
            }
        }
        if change <= tol && best.0 <= tol {
            return Ok(PolyProjection {
                point: unstack(&best.2),
                multipliers: best.1,
                kkt_residual: best.0,
                sweeps: sweep,
            });
        }
    }
    Err(Error::InnerSolver {
        best: unstack(&best.2),
        residual: best.0,
    })
}
