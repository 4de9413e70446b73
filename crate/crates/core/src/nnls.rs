//! Lawson–Hanson non-negative least squares, plus the nearest-point query on
//! a convex hull with one recession ray built on top of it.

use nalgebra::{DMatrix, DVector};

use crate::model::{EpiPoint, Vector};

#[derive(Debug, Clone)]
pub struct Nnls {
    pub x: DVector<f64>,
    pub residual: f64,
    pub iterations: usize,
}

/// Least squares on the passive columns. Columns are equilibrated first so
/// that short columns are not truncated away next to long ones.
fn passive_lstsq(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[usize], col_norms: &[f64]) -> DVector<f64> {
    let mut sub = a.select_columns(passive);
    for (pos, &j) in passive.iter().enumerate() {
        if col_norms[j] > 0.0 {
            sub.column_mut(pos).scale_mut(1.0 / col_norms[j]);
        }
    }
    let svd = sub.svd(true, true);
    let tol = f64::EPSILON * svd.singular_values.max() * (a.nrows().max(passive.len()) as f64);
    let mut y = svd.solve(b, tol).expect("svd computed with both factors");
    for (pos, &j) in passive.iter().enumerate() {
        if col_norms[j] > 0.0 {
            y[pos] /= col_norms[j];
        }
    }
    y
}

/// `argmin ‖A x − b‖` subject to `x ≥ 0`.
///
/// The entering test compares each dual component against the round-off in
/// computing it for that column, so columns of very different lengths are
/// judged on their own scale.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Nnls {
    let k = a.ncols();
    let m = a.nrows();
    let mut x = DVector::zeros(k);
    let mut passive = vec![false; k];
    let col_norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    let b_norm = b.norm();
    let max_iter = 3 * k + 30;
    let mut iterations = 0;

    loop {
        let r = b - a * &x;
        let w = a.tr_mul(&r);
        let r_scale = r.norm() + b_norm + (0..k).map(|j| x[j].abs() * col_norms[j]).sum::<f64>();
        let pick = (0..k)
            .filter(|&j| !passive[j] && w[j] > 8.0 * f64::EPSILON * (m as f64) * col_norms[j] * r_scale)
            .max_by(|&i, &j| (w[i] / col_norms[i]).total_cmp(&(w[j] / col_norms[j])));
        let Some(j) = pick else { break };
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        passive[j] = true;

        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let s_p = passive_lstsq(a, b, &idx, &col_norms);
            if s_p.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (pos, &i) in idx.iter().enumerate() {
                    x[i] = s_p[pos];
                }
                break;
            }
            // step back to the boundary of the feasible region
            let mut alpha: f64 = 1.0;
            for (pos, &i) in idx.iter().enumerate() {
                if s_p[pos] <= 0.0 {
                    let denom = x[i] - s_p[pos];
                    alpha = alpha.min(if denom > 0.0 { x[i] / denom } else { 0.0 });
                }
            }
            let x_max = x.amax();
            for (pos, &i) in idx.iter().enumerate() {
                x[i] += alpha * (s_p[pos] - x[i]);
                if x[i] <= 0.0 || (s_p[pos] <= 0.0 && x[i] <= 4.0 * f64::EPSILON * x_max) {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    let residual = (b - a * &x).norm();
    Nnls { x, residual, iterations }
}

/// Nearest point to `p` in `conv{atoms} + {t·(1, 0) : t ≥ 0}`.
#[derive(Debug, Clone)]
pub struct HullProjection {
    pub point: EpiPoint,
    /// Convex weights, one per atom.
    pub weights: Vec<f64>,
    /// Length of the vertical ray component.
    pub ray: f64,
}

/// Uses the homogenized system `min ‖Σ β_i (v_i − p) + β_r e_μ‖² + η²(1 − Σ β_i)²`
/// over `β ≥ 0`, whose minimizer rescales to the hull weights for any `η > 0`.
/// Picking `η` close to the final distance keeps both blocks of the residual
/// on the same scale, so the NNLS optimality test resolves the hull point
/// relative to its distance from `p` rather than in absolute terms.
pub fn project_onto_hull(p: &EpiPoint, atoms: &[EpiPoint]) -> Option<HullProjection> {
    let eta = atoms.iter().map(|v| v.distance(p)).fold(f64::INFINITY, f64::min);
    if !eta.is_finite() {
        return None;
    }
    // p itself, credited to the nearest atom
    let at_p = || {
        let nearest = atoms
            .iter()
            .map(|v| v.distance(p))
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(j, _)| j)
            .unwrap_or(0);
        let weights = (0..atoms.len()).map(|j| if j == nearest { 1.0 } else { 0.0 }).collect();
        HullProjection { point: p.clone(), weights, ray: 0.0 }
    };
    if eta == 0.0 {
        return Some(at_p());
    }
    let Some(first) = hull_nnls(p, atoms, eta) else {
        // no column correlates with the target above round-off: p sits on
        // the model to working precision
        return Some(at_p());
    };
    let d = first.point.distance(p);
    if d > 0.0 && d < 0.1 * eta {
        return hull_nnls(p, atoms, d).or(Some(first));
    }
    Some(first)
}

fn hull_nnls(p: &EpiPoint, atoms: &[EpiPoint], eta: f64) -> Option<HullProjection> {
    let n = p.dim();
    let m = atoms.len();
    let mut a = DMatrix::zeros(n + 2, m + 1);
    for (j, v) in atoms.iter().enumerate() {
        a[(0, j)] = v.mu - p.mu;
        for i in 0..n {
            a[(i + 1, j)] = v.g[i] - p.g[i];
        }
        a[(n + 1, j)] = eta;
    }
    a[(0, m)] = eta;
    let mut b = DVector::zeros(n + 2);
    b[n + 1] = eta;

    let sol = nnls(&a, &b);
    let total: f64 = sol.x.rows(0, m).sum();
    if !(total > 0.0) {
        return None;
    }
    let weights: Vec<f64> = (0..m).map(|j| sol.x[j] / total).collect();
    let ray = eta * sol.x[m] / total;
    // accumulate relative to p so that a hull point close to p keeps its
    // relative accuracy
    let mut dmu = ray;
    let mut dg = Vector::zeros(n);
    for (w, v) in weights.iter().zip(atoms) {
        if *w > 0.0 {
            dmu += w * (v.mu - p.mu);
            dg += (&v.g - &p.g) * *w;
        }
    }
    Some(HullProjection {
        point: EpiPoint::new(p.mu + dmu, &p.g + dg),
        weights,
        ray,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn nnls_unconstrained_interior() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        let s = nnls(&a, &b);
        assert_abs_diff_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[1], 2.0, epsilon = 1e-12);
        assert!(s.residual < 1e-12);
    }

    #[test]
    fn nnls_clamps_negative_component() {
        let a = DMatrix::identity(2, 2);
        let b = DVector::from_column_slice(&[-1.0, 2.0]);
        let s = nnls(&a, &b);
        assert_eq!(s.x[0], 0.0);
        assert_abs_diff_eq!(s.x[1], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn hull_projection_segment() {
        // segment from (1, −1) to (1, 1); nearest point to (0, 0) is (1, 0)
        let atoms = vec![
            EpiPoint::new(1.0, Vector::from_element(1, -1.0)),
            EpiPoint::new(1.0, Vector::from_element(1, 1.0)),
        ];
        let h = project_onto_hull(&EpiPoint::on_axis(0.0, 1), &atoms).unwrap();
        assert_abs_diff_eq!(h.point.mu, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.point.g[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(h.weights[0], 0.5, epsilon = 1e-14);
        assert_eq!(h.ray, 0.0);
    }

    #[test]
    fn hull_projection_uses_ray() {
        // single atom below the query point: the ray lifts it up to p
        let atoms = vec![EpiPoint::new(-1.0, Vector::from_element(1, 0.0))];
        let h = project_onto_hull(&EpiPoint::on_axis(2.0, 1), &atoms).unwrap();
        assert_abs_diff_eq!(h.point.mu, 2.0, epsilon = 1e-13);
        assert_abs_diff_eq!(h.ray, 3.0, epsilon = 1e-13);
    }

    fn brute_kkt(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> f64 {
        let w = a.tr_mul(&(b - a * x));
        let mut worst: f64 = 0.0;
        for j in 0..x.len() {
            worst = worst.max(-x[j]);
            if x[j] > 0.0 {
                worst = worst.max(w[j].abs());
            } else {
                worst = worst.max(w[j]);
            }
        }
        worst
    }

    proptest! {
        #[test]
        fn nnls_satisfies_kkt(
            entries in proptest::collection::vec(-3.0..3.0f64, 40),
            rhs in proptest::collection::vec(-3.0..3.0f64, 5),
            cols in 1usize..8,
        ) {
            let a = DMatrix::from_column_slice(5, cols, &entries[..5 * cols]);
            let b = DVector::from_column_slice(&rhs);
            let s = nnls(&a, &b);
            prop_assert!(brute_kkt(&a, &b, &s.x) < 1e-9);
        }
    }
}
