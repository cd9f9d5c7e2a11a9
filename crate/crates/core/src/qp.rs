//! Dense convex QP solver for small problems with a diagonal quadratic cost.
//!
//! Solves
//!
//! ```text
//!     minimize    Σ_k w_k (x_k − c_k)²
//!     subject to  a_iᵀ x ≤ b_i
//! ```
//!
//! with `w_k > 0`. The problem is rescaled to `y = √W (x − c)`, which turns
//! the cost into `‖y‖²` and the solution into the minimum-norm point of a
//! polyhedron. That point is found with the Goldfarb-Idnani dual active-set
//! method: start at the unconstrained minimum and add violated rows one at a
//! time while keeping the multipliers dual feasible.

use nalgebra::{DMatrix, DVector};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

/// One inequality row `coeffs · x ≤ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

impl QpRow {
    pub fn new(coeffs: Vec<f64>, rhs: f64) -> Self {
        Self { coeffs, rhs }
    }

    /// `coeffs · x − rhs`; positive means violated.
    pub fn violation(&self, x: &[f64]) -> f64 {
        dot(&self.coeffs, x) - self.rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub cost_weights: Vec<f64>,
    pub cost_center: Vec<f64>,
    pub rows: Vec<QpRow>,
}

impl QpProblem {
    pub fn new(cost_weights: Vec<f64>, cost_center: Vec<f64>) -> Self {
        assert_eq!(cost_weights.len(), cost_center.len());
        Self { cost_weights, cost_center, rows: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.cost_weights.len()
    }

    pub fn push_row(&mut self, coeffs: Vec<f64>, rhs: f64) {
        assert_eq!(coeffs.len(), self.dim());
        self.rows.push(QpRow::new(coeffs, rhs));
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        self.cost_weights.iter().zip(&self.cost_center).zip(x).map(|((w, c), xi)| w * (xi - c).powi(2)).sum()
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.rows.iter().map(|r| r.violation(x)).fold(0.0, f64::max)
    }

    fn is_well_formed(&self) -> bool {
        self.cost_weights.len() == self.cost_center.len()
            && self.cost_weights.iter().all(|w| *w > 0.0 && w.is_finite())
            && self.cost_center.iter().all(|c| c.is_finite())
            && self
                .rows
                .iter()
                .all(|r| r.coeffs.len() == self.dim() && r.rhs.is_finite() && r.coeffs.iter().all(|a| a.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One multiplier per row of the original problem (zero for inactive rows).
    pub multipliers: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub kkt_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// KKT residual of `(x, multipliers)` for `qp`: the largest of the
/// stationarity error (∞-norm), primal violation, dual infeasibility and
/// complementarity error. Rows are measured after normalising each to unit
/// coefficient norm so the value does not depend on row scaling.
pub fn kkt_residual(qp: &QpProblem, x: &[f64], multipliers: &[f64]) -> f64 {
    let mut grad: Vec<f64> =
        qp.cost_weights.iter().zip(&qp.cost_center).zip(x).map(|((w, c), xi)| 2.0 * w * (xi - c)).collect();
    let mut primal: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for (row, &lambda) in qp.rows.iter().zip(multipliers) {
        for (g, a) in grad.iter_mut().zip(&row.coeffs) {
            *g += lambda * a;
        }
        let norm = row.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt();
        let scale = if norm > 0.0 { norm } else { 1.0 };
        let slack = row.violation(x) / scale;
        primal = primal.max(slack);
        dual = dual.max(-lambda);
        comp = comp.max((lambda * scale * slack).abs());
    }
    let stationarity = grad.iter().fold(0.0_f64, |m, g| m.max(g.abs()));
    stationarity.max(primal).max(dual).max(comp)
}

/// Row in the rescaled problem, written as `normalᵀ y ≥ bound`.
struct ScaledRow {
    normal: DVector<f64>,
    bound: f64,
    /// Norm of the row before normalisation; maps multipliers back.
    scale: f64,
}

/// Solves `qp` to tolerance `tol` with at most `max_iter` active-set changes.
pub fn solve(qp: &QpProblem, tol: f64, max_iter: usize) -> QpSolution {
    let n = qp.dim();
    let m = qp.rows.len();
    if !qp.is_well_formed() {
        return QpSolution {
            x: qp.cost_center.clone(),
            multipliers: vec![0.0; m],
            status: QpStatus::Infeasible,
            iterations: 0,
            kkt_residual: f64::INFINITY,
        };
    }
    let sqrt_w: Vec<f64> = qp.cost_weights.iter().map(|w| w.sqrt()).collect();

    // a·x ≤ b  ⇔  (a/√w)·y ≤ b − a·c  ⇔  −n̂·y ≥ −β̂
    let mut rows = Vec::with_capacity(m);
    for row in &qp.rows {
        let raw = DVector::from_iterator(n, row.coeffs.iter().zip(&sqrt_w).map(|(a, s)| a / s));
        let beta = row.rhs - dot(&row.coeffs, &qp.cost_center);
        let norm = raw.norm();
        if norm <= f64::EPSILON {
            if beta < -tol {
                return infeasible(qp, 0);
            }
            rows.push(ScaledRow { normal: DVector::zeros(n), bound: f64::NEG_INFINITY, scale: 0.0 });
            continue;
        }
        rows.push(ScaledRow { normal: -raw / norm, bound: -beta / norm, scale: norm });
    }

    let mut y = DVector::<f64>::zeros(n);
    let mut active: Vec<usize> = Vec::new();
    let mut mu: Vec<f64> = Vec::new();
    let mut iterations = 0;

    let finish = |y: &DVector<f64>, active: &[usize], mu: &[f64], status, iterations| {
        let x: Vec<f64> = (0..n).map(|k| qp.cost_center[k] + y[k] / sqrt_w[k]).collect();
        let mut multipliers = vec![0.0; m];
        for (&idx, &val) in active.iter().zip(mu) {
            multipliers[idx] = 2.0 * val / rows[idx].scale;
        }
        let kkt_residual = kkt_residual(qp, &x, &multipliers);
        QpSolution { x, multipliers, status, iterations, kkt_residual }
    };

    loop {
        // Lowest-index violated row (Bland's rule).
        let entering = (0..m).find(|&i| {
            !active.contains(&i) && rows[i].bound.is_finite() && rows[i].normal.dot(&y) - rows[i].bound < -tol
        });
        let Some(p) = entering else {
            return finish(&y, &active, &mu, QpStatus::Optimal, iterations);
        };
        let np = rows[p].normal.clone();
        let mut mu_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return finish(&y, &active, &mu, QpStatus::MaxIter, iterations);
            }
            let (z, r) = step_directions(&rows, &active, &np);
            let znorm = z.norm();

            let mut t1 = f64::INFINITY;
            let mut blocking = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 1e-14 {
                    let ratio = mu[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        blocking = Some(k);
                    }
                }
            }

            let slack = np.dot(&y) - rows[p].bound;
            let t2 = if znorm > 1e-12 { -slack / z.dot(&np) } else { f64::INFINITY };

            if !t1.is_finite() && !t2.is_finite() {
                return infeasible(qp, iterations);
            }
            let t = t1.min(t2);
            if t2.is_finite() {
                y += &z * t;
            }
            for (k, rk) in r.iter().enumerate() {
                mu[k] -= t * rk;
            }
            mu_p += t;

            if t2 <= t1 {
                active.push(p);
                mu.push(mu_p);
                break;
            }
            let k = blocking.expect("finite t1 has a blocking row");
            active.remove(k);
            mu.remove(k);
        }
    }
}

/// Primal step `z = (I − N(NᵀN)⁻¹Nᵀ) n_p` and dual step `r = (NᵀN)⁻¹Nᵀ n_p`
/// for the active normals `N`.
fn step_directions(rows: &[ScaledRow], active: &[usize], np: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    if active.is_empty() {
        return (np.clone(), DVector::zeros(0));
    }
    let n = np.len();
    let cols: Vec<DVector<f64>> = active.iter().map(|&i| rows[i].normal.clone()).collect();
    let nmat = DMatrix::from_columns(&cols);
    let gram = nmat.transpose() * &nmat;
    let rhs = nmat.transpose() * np;
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(active.len())),
    };
    let z = np - &nmat * &r;
    debug_assert_eq!(z.len(), n);
    (z, r)
}

fn infeasible(qp: &QpProblem, iterations: usize) -> QpSolution {
    QpSolution {
        x: qp.cost_center.clone(),
        multipliers: vec![0.0; qp.rows.len()],
        status: QpStatus::Infeasible,
        iterations,
        kkt_residual: f64::INFINITY,
    }
}
