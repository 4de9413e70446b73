//! Shared domain types: points of the conjugate-space ambient `R × E`,
//! affine cuts generated by oracle calls, and solver configuration.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the primal space `E` (or of the conjugate space, same thing here).
pub type Vector = DVector<f64>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn all_finite(v: &Vector) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// A point `(mu, g)` of `R × E`, the ambient space of `epi f*`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpiPoint {
    pub mu: f64,
    pub g: Vector,
}

impl EpiPoint {
    pub fn new(mu: f64, g: Vector) -> Self {
        Self { mu, g }
    }

    /// `(xi, 0)`: a point on the vertical axis.
    pub fn on_axis(xi: f64, dim: usize) -> Self {
        Self {
            mu: xi,
            g: Vector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn dot(&self, other: &EpiPoint) -> f64 {
        self.mu * other.mu + self.g.dot(&other.g)
    }

    pub fn norm_squared(&self) -> f64 {
        self.mu * self.mu + self.g.norm_squared()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn sub(&self, other: &EpiPoint) -> EpiPoint {
        EpiPoint {
            mu: self.mu - other.mu,
            g: &self.g - &other.g,
        }
    }

    pub fn distance(&self, other: &EpiPoint) -> f64 {
        self.sub(other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.mu.is_finite() && all_finite(&self.g)
    }
}

/// One oracle call at `x`, read as the half-space
/// `H_x = {(mu, g) : g·x − mu ≤ f(x)}` which contains `epi f*`.
///
/// `subgrad` is the oracle's subgradient `s ∈ ∂f(x)`; the boundary of `H_x`
/// touches `epi f*` at [`Cut::contact_point`].
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub x: Vector,
    pub fx: f64,
    pub subgrad: Vector,
}

impl Cut {
    pub fn new(x: Vector, fx: f64, subgrad: Vector) -> Self {
        Self { x, fx, subgrad }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `(f*(s), s)` with `s` the stored subgradient; lies on the graph of `f*`
    /// because `x ∈ ∂f*(s)`.
    pub fn contact_point(&self) -> EpiPoint {
        EpiPoint::new(self.subgrad.dot(&self.x) - self.fx, self.subgrad.clone())
    }

    /// Coefficients `(−1, x)` of the cut's linear form in `(mu, g)`.
    pub fn normal(&self) -> EpiPoint {
        EpiPoint::new(-1.0, self.x.clone())
    }

    pub(crate) fn violation_unchecked(&self, p: &EpiPoint) -> f64 {
        p.g.dot(&self.x) - p.mu - self.fx
    }
}

/// `p.g·c.x − p.mu − c.fx`; positive when `p` lies outside `H_x`.
pub fn cut_violation(c: &Cut, p: &EpiPoint) -> Result<f64> {
    check_dim(c.dim(), p.dim())?;
    Ok(c.violation_unchecked(p))
}

/// Outward normal `−((xi_p, g_p) − (xi_k, 0))` at the projection of `(xi_k, 0)`.
pub fn support_direction(xi_k: f64, xi_p: f64, g_p: &Vector) -> Result<EpiPoint> {
    if !(xi_p > xi_k) {
        return Err(Error::Contract(format!(
            "support direction needs xi_p > xi_k (xi_p = {xi_p}, xi_k = {xi_k})"
        )));
    }
    Ok(EpiPoint::new(-(xi_p - xi_k), -g_p))
}

/// Ordered list of cuts forming an outer polyhedral model of `epi f*`.
#[derive(Debug, Clone, Default)]
pub struct Bundle {
    pub cuts: Vec<Cut>,
    /// `None` means unlimited.
    pub capacity: Option<usize>,
}

impl Bundle {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            cuts: Vec::new(),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.cuts.first().map(Cut::dim)
    }

    pub fn push(&mut self, cut: Cut) -> Result<()> {
        if let Some(d) = self.dim() {
            check_dim(d, cut.dim())?;
        }
        self.cuts.push(cut);
        Ok(())
    }

    /// Drops the oldest cuts not flagged in `active` until the capacity is met.
    /// Active cuts are never evicted, so the bundle may stay above capacity.
    pub fn evict(&mut self, active: &[bool]) {
        let Some(cap) = self.capacity else { return };
        debug_assert_eq!(active.len(), self.cuts.len());
        let mut excess = self.cuts.len().saturating_sub(cap);
        if excess == 0 {
            return;
        }
        let mut keep = Vec::with_capacity(self.cuts.len());
        for (cut, &is_active) in self.cuts.drain(..).zip(active) {
            if excess > 0 && !is_active {
                excess -= 1;
            } else {
                keep.push(cut);
            }
        }
        self.cuts = keep;
    }
}

/// Which projection engine the solver uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Root-finding on the analytic conjugate prox.
    Exact,
    /// Oracle-only cut model.
    Cutting,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Exact => write!(f, "exact"),
            Backend::Cutting => write!(f, "cutting"),
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "cutting" => Ok(Backend::Cutting),
            other => Err(Error::Usage(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Outer stop on `‖g_p‖`.
    pub eps_g: f64,
    /// Stall guard on the increment of `xi`.
    pub eps_xi: f64,
    /// Residual tolerance of the polyhedral projection and of the exact
    /// engine's foot-of-epigraph test.
    pub eps_inner: f64,
    /// Relative duality-gap tolerance of the cutting engine.
    pub eps_gap: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub bundle_capacity: Option<usize>,
    pub backend: Backend,
    /// Hard cap on oracle calls for one solve.
    pub max_oracle_calls: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps_g: 1e-10,
            eps_xi: 1e-12,
            eps_inner: 1e-10,
            eps_gap: 1e-14,
            max_outer: 100,
            max_inner: 10_000,
            bundle_capacity: Some(200),
            backend: Backend::Exact,
            max_oracle_calls: None,
        }
    }
}

impl SolverConfig {
    pub fn with_backend(backend: Backend) -> Self {
        Self {
            backend,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_g", self.eps_g),
            ("eps_xi", self.eps_xi),
            ("eps_inner", self.eps_inner),
            ("eps_gap", self.eps_gap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Usage(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::Usage("iteration limits must be positive".into()));
        }
        if self.bundle_capacity == Some(0) {
            return Err(Error::Usage("bundle capacity must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn cut(x: &[f64], fx: f64) -> Cut {
        Cut::new(v(x), fx, Vector::zeros(x.len()))
    }

    #[test]
    fn violation_examples() {
        // f(x) = x²/2 at x = 1
        let c = cut(&[1.0], 0.5);
        assert_abs_diff_eq!(cut_violation(&c, &EpiPoint::on_axis(0.0, 1)).unwrap(), -0.5);
        let c = cut(&[0.0], 0.0);
        assert_abs_diff_eq!(cut_violation(&c, &EpiPoint::on_axis(-1.0, 1)).unwrap(), 1.0);
        let c = cut(&[1.0, 1.0], 2.0);
        let p = EpiPoint::new(0.0, v(&[1.0, 1.0]));
        assert_abs_diff_eq!(cut_violation(&c, &p).unwrap(), 0.0);
    }

    #[test]
    fn violation_dimension_mismatch() {
        let c = cut(&[1.0, 2.0], 0.0);
        assert!(matches!(
            cut_violation(&c, &EpiPoint::on_axis(0.0, 1)),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn support_direction_examples() {
        let z = support_direction(-1.0, -0.32243, &v(&[-0.40400])).unwrap();
        assert_abs_diff_eq!(z.mu, -0.67757, epsilon = 1e-12);
        assert_abs_diff_eq!(z.g[0], 0.40400, epsilon = 1e-12);

        let z = support_direction(0.0, 1.0, &Vector::zeros(3)).unwrap();
        assert_eq!(z.mu, -1.0);
        assert!(z.g.iter().all(|&x| x == 0.0));

        let z = support_direction(-2.0, -1.0, &v(&[1.0])).unwrap();
        assert_eq!((z.mu, z.g[0]), (-1.0, -1.0));

        assert!(matches!(
            support_direction(0.0, 0.0, &v(&[1.0])),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn eviction_keeps_active_and_newest() {
        let mut b = Bundle::new(Some(2));
        for i in 0..4 {
            b.push(cut(&[i as f64], 0.0)).unwrap();
        }
        b.evict(&[true, false, false, false]);
        let xs: Vec<f64> = b.cuts.iter().map(|c| c.x[0]).collect();
        assert_eq!(xs, vec![0.0, 3.0]);

        let mut b = Bundle::new(Some(1));
        for i in 0..3 {
            b.push(cut(&[i as f64], 0.0)).unwrap();
        }
        b.evict(&[true, true, false]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn bundle_rejects_mixed_dimensions() {
        let mut b = Bundle::new(None);
        b.push(cut(&[1.0], 0.0)).unwrap();
        assert!(b.push(cut(&[1.0, 2.0], 0.0)).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            eps_inner: 0.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn violation_is_affine_in_point(
            x in prop::collection::vec(-5.0..5.0f64, 3),
            fx in -5.0..5.0f64,
            p1 in prop::collection::vec(-5.0..5.0f64, 4),
            p2 in prop::collection::vec(-5.0..5.0f64, 4),
            t in 0.0..1.0f64,
        ) {
            let c = cut(&x, fx);
            let a = EpiPoint::new(p1[0], v(&p1[1..]));
            let b = EpiPoint::new(p2[0], v(&p2[1..]));
            let mix = EpiPoint::new(
                t * a.mu + (1.0 - t) * b.mu,
                &a.g * t + &b.g * (1.0 - t),
            );
            let lhs = cut_violation(&c, &mix).unwrap();
            let rhs = t * cut_violation(&c, &a).unwrap() + (1.0 - t) * cut_violation(&c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-10);
        }
    }
}
