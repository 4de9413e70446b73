//! Brute-force reference computations, independent of the engines: the
//! conjugate by direct maximization, epigraph projections by search over
//! `g`, and polyhedral projections on a grid. Slow, one-dimensional, and
//! only meant for cross-checks.

use crate::model::{Cut, EpiPoint, Vector};

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Minimizer of a unimodal `h` on `[lo, hi]` by golden-section search.
pub fn golden_min(h: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let mut a = hi - GOLDEN * (hi - lo);
    let mut b = lo + GOLDEN * (hi - lo);
    let (mut ha, mut hb) = (h(a), h(b));
    for _ in 0..iters {
        if ha <= hb {
            hi = b;
            b = a;
            hb = ha;
            a = hi - GOLDEN * (hi - lo);
            ha = h(a);
        } else {
            lo = a;
            a = b;
            ha = hb;
            b = lo + GOLDEN * (hi - lo);
            hb = h(b);
        }
    }
    0.5 * (lo + hi)
}

/// `f*(g) = sup_x g·x − f(x)` for scalar `f`, searched on a coarse grid
/// over `[lo, hi]` and then refined. `f` must be convex.
pub fn conjugate_1d(f: &dyn Fn(f64) -> f64, g: f64, lo: f64, hi: f64) -> f64 {
    let n = 400;
    let h = (hi - lo) / n as f64;
    let obj = |x: f64| f(x) - g * x;
    let best = (0..=n)
        .map(|i| lo + i as f64 * h)
        .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
        .expect("grid is non-empty");
    let x = golden_min(obj, (best - h).max(lo), (best + h).min(hi), 120);
    -obj(x)
}

/// Projection of `(ξ, 0)` onto `epi f*` for scalar problems, with `f*`
/// itself computed by [`conjugate_1d`]. Returns `(g_p, ξ^p)`.
///
/// For each `g` the nearest epigraph point on that fiber is
/// `(max(f*(g), ξ), g)`; the squared distance is convex in `g`.
pub fn epi_projection_1d(f: &dyn Fn(f64) -> f64, xi: f64, x_range: (f64, f64), g_range: (f64, f64)) -> (f64, f64) {
    let conj = |g: f64| conjugate_1d(f, g, x_range.0, x_range.1);
    let dist2 = |g: f64| {
        let lift = (conj(g) - xi).max(0.0);
        lift * lift + g * g
    };
    let n = 400;
    let h = (g_range.1 - g_range.0) / n as f64;
    let best = (0..=n)
        .map(|i| g_range.0 + i as f64 * h)
        .min_by(|a, b| dist2(*a).total_cmp(&dist2(*b)))
        .expect("grid is non-empty");
    let g = golden_min(dist2, (best - h).max(g_range.0), (best + h).min(g_range.1), 120);
    (g, conj(g).max(xi))
}

/// Projection of `p` onto the intersection of one-dimensional cuts by
/// scanning `g` with spacing `step`. Exact in `μ` on each fiber, so the
/// error is at most one grid step in `g`.
pub fn grid_polyproj_1d(p: &EpiPoint, cuts: &[Cut], step: f64) -> EpiPoint {
    assert_eq!(p.dim(), 1, "grid projection is one-dimensional");
    let floor = |g: f64| cuts.iter().map(|c| g * c.x[0] - c.fx).fold(f64::NEG_INFINITY, f64::max);
    let g0 = p.g[0];
    // (max(μ, floor), g0) is feasible, so the projection lies within `reach`
    let reach = (floor(g0) - p.mu).max(0.0);
    let n = (reach / step).ceil() as i64 + 1;
    let mut best = (f64::INFINITY, p.mu, g0);
    for i in -n..=n {
        let g = g0 + i as f64 * step;
        let mu = floor(g).max(p.mu);
        let d = (mu - p.mu).powi(2) + (g - g0).powi(2);
        if d < best.0 {
            best = (d, mu, g);
        }
    }
    EpiPoint::new(best.1, Vector::from_element(1, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_finds_parabola_vertex() {
        let x = golden_min(|x| (x - 0.3) * (x - 0.3), -1.0, 2.0, 100);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-9);
    }

    #[test]
    fn conjugate_of_shifted_square() {
        let f = |x: f64| 0.5 * (x - 1.0) * (x - 1.0);
        for g in [-1.5, -0.404, 0.0, 0.7] {
            assert_abs_diff_eq!(conjugate_1d(&f, g, -10.0, 10.0), g + 0.5 * g * g, epsilon = 1e-10);
        }
    }

    #[test]
    fn projection_of_a_point_on_the_graph_is_itself() {
        let f = |x: f64| 0.5 * (x - 1.0) * (x - 1.0);
        let (g, mu) = epi_projection_1d(&f, 0.0, (-10.0, 10.0), (-2.0, 2.0));
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-7);
        assert_abs_diff_eq!(mu, 0.0, epsilon = 1e-7);
    }

    #[test]
    fn grid_projection_onto_one_half_plane() {
        // cut at x = 1 with f = −1: g − μ ≤ −1; p = 0 projects to (0.5, −0.5)
        let c = Cut::new(Vector::from_element(1, 1.0), -1.0, Vector::zeros(1));
        let q = grid_polyproj_1d(&EpiPoint::on_axis(0.0, 1), &[c], 1e-3);
        assert_abs_diff_eq!(q.mu, 0.5, epsilon = 2e-3);
        assert_abs_diff_eq!(q.g[0], -0.5, epsilon = 2e-3);
    }
}
