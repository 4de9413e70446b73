//! Test objectives with a first-order oracle, optional analytic conjugate
//! capabilities, and ground-truth metadata used by diagnostics.

use std::fmt;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use minilp::{ComparisonOp, OptimizationDirection, Problem as Lp};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{all_finite, check_dim, Vector};

/// A finite convex function `f : R^n → R` behind a subgradient oracle.
///
/// The conjugate capabilities default to "absent"; engines that need them
/// report a capability error.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// `(f(x), g)` with `g ∈ ∂f(x)`.
    fn eval(&self, x: &Vector) -> (f64, Vector);

    /// `f*(g)`, `+∞` outside `dom f*`.
    fn conjugate(&self, _g: &Vector) -> Option<f64> {
        None
    }

    /// `argmin_g { λ f*(g) + ½‖g − y‖² }`.
    fn conjugate_prox(&self, _y: &Vector, _lambda: f64) -> Option<Vector> {
        None
    }

    /// Some `x ∈ ∂f*(g)`.
    fn conjugate_subgrad(&self, _g: &Vector) -> Option<Vector> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemClass {
    General,
    SupQuadratic,
    Sharp,
    Polyhedral,
}

/// `sign` with `sign(0) = +1`.
fn sign(t: f64) -> f64 {
    if t >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `f(x) = ½ Σ q_i (x_i − c_i)²` with `q_i > 0`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub c: Vector,
    pub q: Vector,
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &Vector) -> (f64, Vector) {
        let d = x - &self.c;
        let g = self.q.component_mul(&d);
        (0.5 * g.dot(&d), g)
    }

    fn conjugate(&self, g: &Vector) -> Option<f64> {
        let quad: f64 = g.iter().zip(self.q.iter()).map(|(gi, qi)| gi * gi / qi).sum();
        Some(g.dot(&self.c) + 0.5 * quad)
    }

    fn conjugate_prox(&self, y: &Vector, lambda: f64) -> Option<Vector> {
        Some(Vector::from_fn(self.dim(), |i, _| {
            (y[i] - lambda * self.c[i]) / (1.0 + lambda / self.q[i])
        }))
    }

    fn conjugate_subgrad(&self, g: &Vector) -> Option<Vector> {
        Some(&self.c + g.component_div(&self.q))
    }
}

/// `f(x) = ‖x − c‖₁`; `f*` is `g·c` on the unit `ℓ∞` ball.
#[derive(Debug, Clone)]
pub struct ShiftedL1 {
    pub c: Vector,
}

impl Objective for ShiftedL1 {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &Vector) -> (f64, Vector) {
        let d = x - &self.c;
        (d.abs().sum(), d.map(sign))
    }

    fn conjugate(&self, g: &Vector) -> Option<f64> {
        if g.amax() <= 1.0 {
            Some(g.dot(&self.c))
        } else {
            Some(f64::INFINITY)
        }
    }

    fn conjugate_prox(&self, y: &Vector, lambda: f64) -> Option<Vector> {
        Some((y - &self.c * lambda).map(|t| t.clamp(-1.0, 1.0)))
    }

    fn conjugate_subgrad(&self, g: &Vector) -> Option<Vector> {
        (g.amax() <= 1.0).then(|| self.c.clone())
    }
}

/// `3·4^(−4/3)`, the constant in `(‖·‖⁴)*(g) = 3·4^(−4/3)‖g‖^(4/3)`.
pub fn quartic_conjugate_constant() -> f64 {
    3.0 * 4f64.powf(-4.0 / 3.0)
}

/// `f(x) = ‖x − c‖⁴`: convex, minimized at `c`, but flatter than any
/// quadratic there.
#[derive(Debug, Clone)]
pub struct Quartic {
    pub c: Vector,
}

impl Objective for Quartic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &Vector) -> (f64, Vector) {
        let d = x - &self.c;
        let n2 = d.norm_squared();
        (n2 * n2, d * (4.0 * n2))
    }

    fn conjugate(&self, g: &Vector) -> Option<f64> {
        Some(g.dot(&self.c) + quartic_conjugate_constant() * g.norm().powf(4.0 / 3.0))
    }

    fn conjugate_prox(&self, y: &Vector, lambda: f64) -> Option<Vector> {
        let w = y - &self.c * lambda;
        let r = w.norm();
        if r == 0.0 {
            return Some(w);
        }
        // radius s = u³ solves u³ + p·u = r with p = λ·4^(−1/3); the cubic is
        // convex and increasing on u ≥ 0, so Newton from the right is monotone
        let p = lambda * 4f64.powf(-1.0 / 3.0);
        let mut u = r.cbrt();
        if p > 0.0 {
            u = u.min(r / p);
        }
        for _ in 0..200 {
            let h = u * u * u + p * u - r;
            let next = u - h / (3.0 * u * u + p);
            if !(next < u) || next <= 0.0 {
                break;
            }
            u = next;
        }
        Some(w * (u * u * u / r))
    }

    fn conjugate_subgrad(&self, g: &Vector) -> Option<Vector> {
        let n = g.norm();
        if n == 0.0 {
            return Some(self.c.clone());
        }
        Some(&self.c + g * ((n / 4.0).cbrt() / n))
    }
}

/// `f(x) = ‖x − c‖² + ‖x − c‖₁`.
#[derive(Debug, Clone)]
pub struct QuadPlusL1 {
    pub c: Vector,
}

impl Objective for QuadPlusL1 {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn eval(&self, x: &Vector) -> (f64, Vector) {
        let d = x - &self.c;
        let f = d.norm_squared() + d.abs().sum();
        (f, d.map(|t| 2.0 * t + sign(t)))
    }

    fn conjugate(&self, g: &Vector) -> Option<f64> {
        let tail: f64 = g.iter().map(|t| (t.abs() - 1.0).max(0.0).powi(2) / 4.0).sum();
        Some(g.dot(&self.c) + tail)
    }

    fn conjugate_prox(&self, y: &Vector, lambda: f64) -> Option<Vector> {
        let w = y - &self.c * lambda;
        Some(w.map(|t| {
            if t.abs() <= 1.0 {
                t
            } else {
                sign(t) * (1.0 + (t.abs() - 1.0) / (1.0 + 0.5 * lambda))
            }
        }))
    }

    fn conjugate_subgrad(&self, g: &Vector) -> Option<Vector> {
        Some(Vector::from_fn(self.dim(), |i, _| {
            self.c[i] + sign(g[i]) * (g[i].abs() - 1.0).max(0.0) / 2.0
        }))
    }
}

/// `f(x) = max_i (a_i·x + b_i)`. No analytic conjugate capability; see
/// [`MaxAffine::conjugate_lp`] for an LP evaluation used by diagnostics.
#[derive(Debug, Clone)]
pub struct MaxAffine {
    pub a: Vec<Vector>,
    pub b: Vec<f64>,
}

impl MaxAffine {
    pub fn new(a: Vec<Vector>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::ProblemFile(
                "max_affine needs as many rows in A as entries in b (at least one)".into(),
            ));
        }
        let n = a[0].len();
        if n == 0 {
            return Err(Error::ProblemFile("max_affine rows must be nonempty".into()));
        }
        for row in &a {
            check_dim(n, row.len())?;
            if !all_finite(row) {
                return Err(Error::ProblemFile("non-finite entry in A".into()));
            }
        }
        if b.iter().any(|t| !t.is_finite()) {
            return Err(Error::ProblemFile("non-finite entry in b".into()));
        }
        Ok(Self { a, b })
    }

    /// `min_x f(x)` as an LP; returns `(f_star, x_star)` or an error when `f`
    /// is unbounded below.
    pub fn minimize_lp(&self) -> Result<(f64, Vector)> {
        let n = self.dim();
        let mut lp = Lp::new(OptimizationDirection::Minimize);
        let xs: Vec<_> = (0..n)
            .map(|_| lp.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
            .collect();
        let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for (ai, bi) in self.a.iter().zip(&self.b) {
            let mut row: Vec<_> = xs.iter().zip(ai.iter()).map(|(&v, &c)| (v, c)).collect();
            row.push((t, -1.0));
            lp.add_constraint(row.as_slice(), ComparisonOp::Le, -bi);
        }
        let sol = lp
            .solve()
            .map_err(|e| Error::ProblemFile(format!("max_affine has no finite minimum ({e})")))?;
        let x = Vector::from_fn(n, |i, _| sol[xs[i]]);
        // report the oracle value rather than the LP objective
        let (f, _) = self.eval(&x);
        Ok((f, x))
    }

    /// `f*(g) = min { −b·α : Σ α_i a_i = g, α ∈ Δ }`; `+∞` when infeasible.
    pub fn conjugate_lp(&self, g: &Vector) -> f64 {
        let n = self.dim();
        let mut lp = Lp::new(OptimizationDirection::Minimize);
        let alphas: Vec<_> = self.b.iter().map(|bi| lp.add_var(-bi, (0.0, f64::INFINITY))).collect();
        for j in 0..n {
            let row: Vec<_> = alphas.iter().zip(&self.a).map(|(&v, ai)| (v, ai[j])).collect();
            lp.add_constraint(row.as_slice(), ComparisonOp::Eq, g[j]);
        }
        let ones: Vec<_> = alphas.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
        match lp.solve() {
            Ok(sol) => sol.objective(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Indices of the pieces attaining `f(x)` within `tol`.
    pub fn active_pieces(&self, x: &Vector, tol: f64) -> Vec<usize> {
        let (f, _) = self.eval(x);
        (0..self.a.len())
            .filter(|&i| self.a[i].dot(x) + self.b[i] >= f - tol)
            .collect()
    }
}

impl Objective for MaxAffine {
    fn dim(&self) -> usize {
        self.a[0].len()
    }

    fn eval(&self, x: &Vector) -> (f64, Vector) {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, (ai, bi)) in self.a.iter().zip(&self.b).enumerate() {
            let v = ai.dot(x) + bi;
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        (best_val, self.a[best].clone())
    }
}

/// Radius of the largest origin-centred ball inside `conv(points)`, estimated
/// from above by the smallest ray length `max { t : t·d ∈ conv }` over a
/// deterministic set of unit directions `d`. Returns `None` when the origin is
/// not interior.
pub fn inscribed_radius(points: &[Vector], directions: usize, seed: u64) -> Option<f64> {
    let n = points.first()?.len();
    let mut dirs: Vec<Vector> = Vec::new();
    if n == 1 {
        dirs.push(Vector::from_element(1, 1.0));
        dirs.push(Vector::from_element(1, -1.0));
    } else if n == 2 {
        for k in 0..directions {
            let th = 2.0 * std::f64::consts::PI * k as f64 / directions as f64;
            dirs.push(Vector::from_column_slice(&[th.cos(), th.sin()]));
        }
    } else {
        for j in 0..n {
            for s in [1.0, -1.0] {
                let mut e = Vector::zeros(n);
                e[j] = s;
                dirs.push(e);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        while dirs.len() < directions {
            let d = Vector::from_fn(n, |_, _| standard_normal(&mut rng));
            let norm = d.norm();
            if norm > 1e-12 {
                dirs.push(d / norm);
            }
        }
    }
    let mut radius = f64::INFINITY;
    for d in &dirs {
        let mut lp = Lp::new(OptimizationDirection::Maximize);
        let alphas: Vec<_> = points.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let t = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
        for j in 0..n {
            let mut row: Vec<_> = alphas.iter().zip(points).map(|(&v, p)| (v, p[j])).collect();
            row.push((t, -d[j]));
            lp.add_constraint(row.as_slice(), ComparisonOp::Eq, 0.0);
        }
        let ones: Vec<_> = alphas.iter().map(|&v| (v, 1.0)).collect();
        lp.add_constraint(ones.as_slice(), ComparisonOp::Eq, 1.0);
        match lp.solve() {
            Ok(sol) => radius = radius.min(sol[t]),
            Err(_) => return None,
        }
    }
    (radius > 1e-9).then_some(radius)
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // Box–Muller; avoids pulling in a distributions crate for one sampler
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// An objective plus the ground truth the diagnostics need.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub objective: Arc<dyn Objective>,
    pub f_star: Option<f64>,
    /// The unique minimizer, when known.
    pub x_star: Option<Vector>,
    /// Sup-quadratic characteristic at `x_star`.
    pub tau: Option<f64>,
    /// Sharp-minimum radius: `f*` is affine on the ball of this radius.
    pub rho: Option<f64>,
    pub class: ProblemClass,
    /// Present for max-affine problems, which have no analytic conjugate.
    pub polyhedral: Option<Arc<MaxAffine>>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn oracle_eval(&self, x: &Vector) -> Result<(f64, Vector)> {
        check_dim(self.dim(), x.len())?;
        if !all_finite(x) {
            return Err(Error::Usage(format!(
                "oracle called at a non-finite point on `{}`",
                self.name
            )));
        }
        Ok(self.objective.eval(x))
    }

    fn capability(&self, capability: &'static str) -> Error {
        Error::Capability {
            problem: self.name.clone(),
            capability,
        }
    }

    pub fn has_conjugate(&self) -> bool {
        let zero = Vector::zeros(self.dim());
        self.objective.conjugate(&zero).is_some()
            && self.objective.conjugate_prox(&zero, 1.0).is_some()
    }

    pub fn conjugate_eval(&self, g: &Vector) -> Result<f64> {
        check_dim(self.dim(), g.len())?;
        self.objective
            .conjugate(g)
            .ok_or_else(|| self.capability("conjugate"))
    }

    pub fn conjugate_prox(&self, y: &Vector, lambda: f64) -> Result<Vector> {
        check_dim(self.dim(), y.len())?;
        if !(lambda >= 0.0) {
            return Err(Error::Usage(format!("prox parameter must be ≥ 0, got {lambda}")));
        }
        self.objective
            .conjugate_prox(y, lambda)
            .ok_or_else(|| self.capability("conjugate prox"))
    }

    pub fn conjugate_subgrad(&self, g: &Vector) -> Result<Vector> {
        check_dim(self.dim(), g.len())?;
        self.objective
            .conjugate_subgrad(g)
            .ok_or_else(|| self.capability("conjugate subgradient"))
    }

    /// Support function of the solution set, `d ↦ max_{x ∈ X*} d·x`
    /// (equivalently `∂f*(0; d)`).
    pub fn x_star_support(&self, d: &Vector) -> Option<f64> {
        self.x_star.as_ref().map(|x| x.dot(d))
    }

    pub fn x_star_norm(&self) -> Option<f64> {
        self.x_star.as_ref().map(|x| x.norm())
    }
}

fn vecf(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn quad(name: &str, c: Vector, q: Vector) -> ProblemSpec {
    let tau = q.min();
    ProblemSpec {
        name: name.into(),
        objective: Arc::new(Quadratic { c: c.clone(), q }),
        f_star: Some(0.0),
        x_star: Some(c),
        tau: Some(tau),
        rho: None,
        class: ProblemClass::SupQuadratic,
        polyhedral: None,
    }
}

pub fn sharp_l1(name: &str, c: Vector) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        objective: Arc::new(ShiftedL1 { c: c.clone() }),
        f_star: Some(0.0),
        x_star: Some(c),
        tau: None,
        rho: Some(1.0),
        class: ProblemClass::Sharp,
        polyhedral: None,
    }
}

pub fn quartic(name: &str, c: Vector) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        objective: Arc::new(Quartic { c: c.clone() }),
        f_star: Some(0.0),
        x_star: Some(c),
        tau: None,
        rho: None,
        class: ProblemClass::General,
        polyhedral: None,
    }
}

pub fn quad_plus_l1(name: &str, c: Vector) -> ProblemSpec {
    ProblemSpec {
        name: name.into(),
        objective: Arc::new(QuadPlusL1 { c: c.clone() }),
        f_star: Some(0.0),
        x_star: Some(c),
        // ‖d‖₁ ≥ g·d for every g in ∂f(c) = [−1, 1]^n, leaving ‖d‖² = ½·2·‖d‖²
        tau: Some(2.0),
        rho: None,
        class: ProblemClass::SupQuadratic,
        polyhedral: None,
    }
}

/// Builds a max-affine problem, solving for `f_star`, the minimizer and the
/// sharp-minimum radius with small LPs.
pub fn max_affine(name: &str, a: Vec<Vector>, b: Vec<f64>) -> Result<ProblemSpec> {
    let m = MaxAffine::new(a, b)?;
    let (f_star, x) = m.minimize_lp()?;
    let active: Vec<Vector> = m
        .active_pieces(&x, 1e-9 * (1.0 + f_star.abs()))
        .into_iter()
        .map(|i| m.a[i].clone())
        .collect();
    let rho = inscribed_radius(&active, 720, 0x5eed);
    let m = Arc::new(m);
    Ok(ProblemSpec {
        name: name.into(),
        objective: m.clone(),
        f_star: Some(f_star),
        // a sharp minimum is unique; otherwise the LP point is just one solution
        x_star: rho.map(|_| x),
        tau: None,
        rho,
        class: if rho.is_some() {
            ProblemClass::Sharp
        } else {
            ProblemClass::Polyhedral
        },
        polyhedral: Some(m),
    })
}

/// `max_i a_i·(x − c) + b_i` rewritten in the plain `a_i·x + b_i` form.
fn shifted_pieces(rows: &[[f64; 3]], dim: usize, c: &Vector, offsets: &[f64]) -> (Vec<Vector>, Vec<f64>) {
    let a: Vec<Vector> = rows.iter().map(|r| vecf(&r[..dim])).collect();
    let b = a.iter().zip(offsets).map(|(ai, &o)| o - ai.dot(c)).collect();
    (a, b)
}

fn build_catalog() -> Vec<ProblemSpec> {
    let shifts = [1.0, -0.5, 0.75, -1.25, 0.5];
    let mut out = vec![
        quad("quad1d", vecf(&[1.0]), vecf(&[1.0])),
        quad("quadN_2", vecf(&[1.0, -1.0]), vecf(&[1.0, 3.0])),
        quad("quadN_5", Vector::from_element(5, 1.0), Vector::from_element(5, 1.0)),
        quartic("quartic_1", vecf(&[1.0])),
        quartic("quartic_3", vecf(&[1.0, -0.5, 0.7])),
        quad_plus_l1("quadPlusL1_3", vecf(&[0.5, -1.0, 1.5])),
    ];
    for n in 1..=5 {
        out.push(sharp_l1(&format!("sharpL1_{n}"), vecf(&shifts[..n])));
    }

    // three pieces active at c with 0 strictly inside their hull, two inactive
    let rows2 = [
        [1.0, 0.2, 0.0],
        [-0.6, 1.0, 0.0],
        [-0.5, -1.0, 0.0],
        [1.5, 1.5, 0.0],
        [0.3, -2.0, 0.0],
    ];
    let c2 = vecf(&[0.5, -1.0]);
    let (a, b) = shifted_pieces(&rows2, 2, &c2, &[0.0, 0.0, 0.0, -1.0, -0.5]);
    out.push(max_affine("maxAffine_2", a, b).expect("catalog max-affine is bounded"));

    let rows3 = [
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [2.0, 0.5, -0.5],
        [0.0, 0.0, -2.0],
    ];
    let c3 = vecf(&[0.3, -0.7, 1.1]);
    let (a, b) = shifted_pieces(&rows3, 3, &c3, &[0.0, 0.0, 0.0, 0.0, -1.5, -0.8]);
    out.push(max_affine("maxAffine_3", a, b).expect("catalog max-affine is bounded"));

    out.sort_by(|x, y| x.name.cmp(&y.name));
    out
}

/// Built-in problems, sorted by name.
pub fn catalog() -> Vec<ProblemSpec> {
    static CATALOG: OnceLock<Vec<ProblemSpec>> = OnceLock::new();
    CATALOG.get_or_init(build_catalog).clone()
}

pub fn find(name: &str) -> Option<ProblemSpec> {
    catalog().into_iter().find(|p| p.name == name)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
enum ProblemFile {
    #[serde(rename = "quad")]
    Quad {
        #[serde(rename = "Q")]
        q: Vec<f64>,
        c: Vec<f64>,
    },
    #[serde(rename = "max_affine")]
    MaxAffine {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        /// optional shift: pieces become `a_i·(x − c) + b_i`
        c: Option<Vec<f64>>,
    },
}

/// Parses a problem definition (`{"type": "quad", ...}` or
/// `{"type": "max_affine", ...}`).
pub fn parse_problem(name: &str, text: &str) -> Result<ProblemSpec> {
    let file: ProblemFile =
        serde_json::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))?;
    match file {
        ProblemFile::Quad { q, c } => {
            if q.is_empty() || q.len() != c.len() {
                return Err(Error::ProblemFile("Q and c must have the same nonzero length".into()));
            }
            if q.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
                return Err(Error::ProblemFile("Q must be finite and strictly positive".into()));
            }
            if c.iter().any(|t| !t.is_finite()) {
                return Err(Error::ProblemFile("c must be finite".into()));
            }
            Ok(quad(name, vecf(&c), vecf(&q)))
        }
        ProblemFile::MaxAffine { a, b, c } => {
            let rows: Vec<Vector> = a.iter().map(|r| vecf(r)).collect();
            let b = match c {
                None => b,
                Some(c) => {
                    let c = vecf(&c);
                    if rows.iter().any(|r| r.len() != c.len()) {
                        return Err(Error::ProblemFile("c must match the row length of A".into()));
                    }
                    rows.iter().zip(&b).map(|(r, bi)| bi - r.dot(&c)).collect()
                }
            };
            max_affine(name, rows, b)
        }
    }
}

pub fn load_problem_file(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "file".into());
    parse_problem(&name, &text)
}

/// Outcome of one sampled check in [`validate_problem`].
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub samples: usize,
    pub violations: usize,
    pub worst: f64,
    pub witness: Option<String>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            violations: 0,
            worst: 0.0,
            witness: None,
        }
    }

    fn record(&mut self, excess: f64, witness: impl FnOnce() -> String) {
        self.samples += 1;
        if excess > 0.0 {
            self.violations += 1;
            if excess > self.worst {
                self.worst = excess;
                self.witness = Some(witness());
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub problem: String,
    pub checks: Vec<CheckReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.violations == 0)
    }

    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn fmt_vec(v: &Vector) -> String {
    let parts: Vec<String> = v.iter().map(|t| format!("{t:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// Samples the oracle (and conjugate, when available) and checks the
/// subgradient inequality, `f ≥ f_star`, Fenchel–Young, `f*(0) = −f_star` and
/// the sup-quadratic growth at `x_star`.
pub fn validate_problem(p: &ProblemSpec, samples: usize, seed: u64) -> ValidationReport {
    let n = p.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = p.x_star.clone().unwrap_or_else(|| Vector::zeros(n));
    let point = |rng: &mut ChaCha8Rng, r: f64| &center + Vector::from_fn(n, |_, _| rng.gen_range(-r..r));

    let mut subgrad = CheckReport::new("subgradient inequality");
    let mut lower = CheckReport::new("f >= f_star");
    let mut fy = CheckReport::new("Fenchel-Young inequality");
    let mut fy_eq = CheckReport::new("Fenchel-Young equality at oracle subgradient");
    let mut foot = CheckReport::new("f*(0) = -f_star");
    let mut supq = CheckReport::new("sup-quadratic growth at x_star");
    let conj = p.has_conjugate();

    for _ in 0..samples {
        let x = point(&mut rng, 2.0);
        let y = point(&mut rng, 2.0);
        let (fx, gx) = p.objective.eval(&x);
        let (fy_val, _) = p.objective.eval(&y);
        let rhs = fx + gx.dot(&(&y - &x));
        let tol = 1e-9 * (1.0 + fy_val.abs() + rhs.abs());
        subgrad.record(rhs - fy_val - tol, || {
            format!("x = {}, y = {}: f(y) = {fy_val:.6e} < {rhs:.6e}", fmt_vec(&x), fmt_vec(&y))
        });
        if let Some(fs) = p.f_star {
            lower.record(fs - fx - 1e-12, || format!("x = {}: f = {fx:.6e}", fmt_vec(&x)));
        }
        if conj {
            let g = Vector::from_fn(n, |_, _| rng.gen_range(-2.0..2.0));
            let fsg = p.objective.conjugate(&g).unwrap_or(f64::INFINITY);
            let gap = fx + fsg - g.dot(&x);
            fy.record(-gap - 1e-9 * (1.0 + fx.abs()), || {
                format!("x = {}, g = {}: gap {gap:.3e}", fmt_vec(&x), fmt_vec(&g))
            });
            let fsx = p.objective.conjugate(&gx).unwrap_or(f64::INFINITY);
            let gap = fx + fsx - gx.dot(&x);
            let tol = 1e-9 * (1.0 + fx.abs() + fsx.abs());
            fy_eq.record(gap.abs() - tol, || {
                format!("x = {}, g_x = {}: gap {gap:.3e}", fmt_vec(&x), fmt_vec(&gx))
            });
        }
        if let (Some(tau), Some(xs)) = (p.tau, p.x_star.as_ref()) {
            let (fs, gs) = p.objective.eval(xs);
            let d = &y - xs;
            let bound = fs + gs.dot(&d) + 0.5 * tau * d.norm_squared();
            supq.record(bound - fy_val - 1e-9 * (1.0 + bound.abs()), || {
                format!("y = {}: f(y) = {fy_val:.6e} < {bound:.6e}", fmt_vec(&y))
            });
        }
    }
    if let (true, Some(fs)) = (conj, p.f_star) {
        let f0 = p.objective.conjugate(&Vector::zeros(n)).unwrap_or(f64::INFINITY);
        foot.record((f0 + fs).abs() - 1e-12, || format!("f*(0) = {f0:.6e}, f_star = {fs:.6e}"));
    }

    let mut checks = vec![subgrad, lower];
    if conj {
        checks.extend([fy, fy_eq, foot]);
    }
    if p.tau.is_some() {
        checks.push(supq);
    }
    ValidationReport {
        problem: p.name.clone(),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn get(name: &str) -> ProblemSpec {
        find(name).unwrap_or_else(|| panic!("missing {name}"))
    }

    #[test]
    fn catalog_contents() {
        let cat = catalog();
        let names: Vec<&str> = cat.iter().map(|p| p.name.as_str()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for n in [
            "quad1d", "quadN_2", "quadN_5", "sharpL1_1", "sharpL1_5", "quartic_1", "quartic_3",
            "maxAffine_2", "maxAffine_3", "quadPlusL1_3",
        ] {
            assert!(names.contains(&n), "{n}");
        }
        let p1 = get("quad1d");
        assert_eq!(p1.f_star, Some(0.0));
        assert_eq!(p1.x_star.as_ref().unwrap()[0], 1.0);
        assert_eq!(p1.tau, Some(1.0));
    }

    #[test]
    fn oracle_examples() {
        let (f, g) = get("quad1d").oracle_eval(&vecf(&[0.0])).unwrap();
        assert_eq!((f, g[0]), (0.5, -1.0));

        let p3 = sharp_l1("l1", Vector::zeros(2));
        let (f, g) = p3.oracle_eval(&vecf(&[1.0, -2.0])).unwrap();
        assert_eq!(f, 3.0);
        assert_eq!(g, vecf(&[1.0, -1.0]));
        // sign(0) = +1
        let (_, g) = p3.oracle_eval(&vecf(&[0.0, 0.0])).unwrap();
        assert_eq!(g, vecf(&[1.0, 1.0]));
    }

    #[test]
    fn max_affine_tie_break_lowest_index() {
        let m = MaxAffine::new(vec![vecf(&[1.0]), vecf(&[-1.0]), vecf(&[2.0])], vec![0.0, 0.0, -5.0]).unwrap();
        let (f, g) = m.eval(&vecf(&[0.0]));
        assert_eq!(f, 0.0);
        assert_eq!(g[0], 1.0);
    }

    #[test]
    fn oracle_rejects_bad_points() {
        let p = get("quadN_2");
        assert!(matches!(p.oracle_eval(&vecf(&[1.0])), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(p.oracle_eval(&vecf(&[f64::NAN, 0.0])), Err(Error::Usage(_))));
    }

    #[test]
    fn conjugate_examples() {
        let p1 = get("quad1d");
        let v = p1.conjugate_eval(&vecf(&[-0.404])).unwrap();
        assert_abs_diff_eq!(v, -0.404 + 0.404 * 0.404 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, -0.32239, epsilon = 1e-4);
        // grid sup of g·x − f(x)
        let grid_sup = (0..=400_000)
            .map(|i| -2.0 + i as f64 * 1e-5)
            .map(|x| -0.404 * x - 0.5 * (x - 1.0) * (x - 1.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_abs_diff_eq!(v, grid_sup, epsilon = 1e-9);

        let p3 = sharp_l1("l1", Vector::zeros(2));
        assert_eq!(p3.conjugate_eval(&vecf(&[2.0, 0.0])).unwrap(), f64::INFINITY);
        assert_eq!(p3.conjugate_eval(&vecf(&[0.5, 0.0])).unwrap(), 0.0);
        let p3 = sharp_l1("l1", Vector::zeros(1));
        assert_eq!(p3.conjugate_eval(&vecf(&[0.5])).unwrap(), 0.0);

        let p2 = quad("q", Vector::zeros(3), Vector::from_element(3, 1.0));
        let y = vecf(&[1.0, -2.0, 0.5]);
        let prox = p2.conjugate_prox(&y, 3.0).unwrap();
        assert!((prox - &y / 4.0).amax() < 1e-15);
    }

    #[test]
    fn quartic_conjugate_matches_grid_sup() {
        let k = quartic_conjugate_constant();
        for gn in [0.1, 1.0, 3.7] {
            let grid = (0..=200_000)
                .map(|i| i as f64 * 1e-5)
                .map(|t| gn * t - t.powi(4))
                .fold(f64::NEG_INFINITY, f64::max);
            assert_abs_diff_eq!(k * f64::powf(gn, 4.0 / 3.0), grid, epsilon = 1e-8);
        }
        let p4 = get("quartic_3");
        let c = p4.x_star.clone().unwrap();
        let g = vecf(&[0.3, -1.0, 0.2]);
        let v = p4.conjugate_eval(&g).unwrap();
        assert_abs_diff_eq!(v - g.dot(&c), k * g.norm().powf(4.0 / 3.0), epsilon = 1e-14);
    }

    #[test]
    fn capability_error_for_max_affine() {
        let p5 = get("maxAffine_2");
        assert!(!p5.has_conjugate());
        assert!(matches!(
            p5.conjugate_eval(&Vector::zeros(2)),
            Err(Error::Capability { .. })
        ));
        assert!(matches!(
            p5.conjugate_prox(&Vector::zeros(2), 1.0),
            Err(Error::Capability { .. })
        ));
    }

    #[test]
    fn max_affine_metadata() {
        for name in ["maxAffine_2", "maxAffine_3"] {
            let p = get(name);
            assert_eq!(p.class, ProblemClass::Sharp);
            assert_abs_diff_eq!(p.f_star.unwrap(), 0.0, epsilon = 1e-9);
            let rho = p.rho.unwrap();
            assert!(rho > 0.05 && rho < 2.0, "{name}: rho = {rho}");
        }
        let p = get("maxAffine_2");
        assert!((p.x_star.clone().unwrap() - vecf(&[0.5, -1.0])).amax() < 1e-9);
    }

    #[test]
    fn inscribed_radius_of_square() {
        let pts = vec![vecf(&[1.0, 1.0]), vecf(&[-1.0, 1.0]), vecf(&[-1.0, -1.0]), vecf(&[1.0, -1.0])];
        let r = inscribed_radius(&pts, 720, 0).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-9);
        let off = vec![vecf(&[1.0, 1.0]), vecf(&[2.0, 1.0]), vecf(&[1.0, 2.0])];
        assert!(inscribed_radius(&off, 72, 0).is_none());
    }

    #[test]
    fn validator_passes_catalog() {
        for p in catalog() {
            let rep = validate_problem(&p, 200, 1);
            assert!(rep.passed(), "{}: {:?}", p.name, rep.checks);
        }
        let rep = validate_problem(&get("quad1d"), 1000, 0);
        assert!(rep.passed());
        assert_eq!(rep.check("subgradient inequality").unwrap().samples, 1000);
        assert_eq!(rep.check("f*(0) = -f_star").unwrap().violations, 0);
    }

    #[derive(Debug)]
    struct DoubledGradient(Quadratic);

    impl Objective for DoubledGradient {
        fn dim(&self) -> usize {
            self.0.dim()
        }
        fn eval(&self, x: &Vector) -> (f64, Vector) {
            let (f, g) = self.0.eval(x);
            (f, g * 2.0)
        }
    }

    #[test]
    fn validator_reports_corrupted_oracle() {
        let mut p = get("quad1d");
        p.objective = Arc::new(DoubledGradient(Quadratic {
            c: vecf(&[1.0]),
            q: vecf(&[1.0]),
        }));
        let rep = validate_problem(&p, 500, 3);
        assert!(!rep.passed());
        let c = rep.check("subgradient inequality").unwrap();
        assert!(c.violations > 0);
        assert!(c.witness.is_some());
    }

    #[test]
    fn problem_file_parsing() {
        let p = parse_problem("q", r#"{"type":"quad","Q":[1,2],"c":[0.5,-1]}"#).unwrap();
        assert_eq!(p.dim(), 2);
        assert_eq!(p.tau, Some(1.0));
        assert!(parse_problem("q", r#"{"type":"quad","Q":[1,-2],"c":[0,0]}"#).is_err());
        assert!(parse_problem("q", r#"{"type":"quad","Q":[1],"c":[0,0]}"#).is_err());

        let p = parse_problem(
            "m",
            r#"{"type":"max_affine","A":[[1,0],[0,1],[-1,-1]],"b":[0,0,0],"c":[1,2]}"#,
        )
        .unwrap();
        assert_eq!(p.class, ProblemClass::Sharp);
        assert_abs_diff_eq!(p.f_star.unwrap(), 0.0, epsilon = 1e-9);
        assert!((p.x_star.clone().unwrap() - vecf(&[1.0, 2.0])).amax() < 1e-8);

        // unbounded below
        assert!(parse_problem("m", r#"{"type":"max_affine","A":[[1,0]],"b":[0]}"#).is_err());
        assert!(parse_problem("m", r#"{"type":"cubic"}"#).is_err());
    }

    proptest! {
        #[test]
        fn fenchel_young_equality_at_oracle_subgradient(
            seed in 0u64..1000,
            idx in 0usize..16,
        ) {
            let cat: Vec<ProblemSpec> = catalog().into_iter().filter(|p| p.has_conjugate()).collect();
            let p = &cat[idx % cat.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Vector::from_fn(p.dim(), |_, _| rng.gen_range(-1.5..1.5));
            let (f, g) = p.objective.eval(&x);
            let gap = f + p.conjugate_eval(&g).unwrap() - g.dot(&x);
            prop_assert!((-1e-12..=1e-9).contains(&gap), "{}: gap {}", p.name, gap);
        }

        #[test]
        fn prox_satisfies_optimality(seed in 0u64..500, lambda in 0.01..20.0f64, idx in 0usize..16) {
            // λ·∂f*(g) + g − y ∋ 0 checked through the subgradient capability
            let cat: Vec<ProblemSpec> = catalog().into_iter().filter(|p| p.has_conjugate()).collect();
            let p = &cat[idx % cat.len()];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = Vector::from_fn(p.dim(), |_, _| rng.gen_range(-3.0..3.0));
            let g = p.conjugate_prox(&y, lambda).unwrap();
            let obj = |h: &Vector| lambda * p.conjugate_eval(h).unwrap() + 0.5 * (h - &y).norm_squared();
            let base = obj(&g);
            for _ in 0..20 {
                let h = &g + Vector::from_fn(p.dim(), |_, _| rng.gen_range(-0.1..0.1));
                prop_assert!(obj(&h) >= base - 1e-10, "{}: prox not minimal", p.name);
            }
        }
    }
}
