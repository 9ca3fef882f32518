//! The recovery linear program: maximize <phi, x> subject to
//! -y_i <= <a_i, x> <= y_i. Solved with a dense primal-dual path-following
//! interior-point method (Mehrotra predictor-corrector) on the n x n
//! normal equations; certified by KKT residuals; cross-checked by a
//! brute-force vertex enumeration oracle on tiny instances.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ensemble, Signal};
use crate::spectral::Anchor;

/// Maximal dimensions accepted by [`vertex_oracle`].
pub const ORACLE_MAX_N: usize = 6;
pub const ORACLE_MAX_M: usize = 12;

/// One LP instance: objective direction phi, constraint rows a_i, and
/// magnitude bounds y_i. x = 0 is always feasible, so the LP is never
/// infeasible (it may be unbounded when rank(A) < n).
#[derive(Debug, Clone)]
pub struct LpInstance {
    objective: Signal,
    constraint_rows: DMatrix<f64>,
    bounds: DVector<f64>,
}

impl LpInstance {
    pub fn new(objective: Signal, constraint_rows: DMatrix<f64>, bounds: DVector<f64>) -> Result<Self> {
        if constraint_rows.nrows() == 0 || constraint_rows.ncols() == 0 {
            return Err(Error::InvalidDimension("LP needs m >= 1 and n >= 1".into()));
        }
        if constraint_rows.ncols() != objective.len() {
            return Err(Error::ShapeMismatch(format!(
                "objective dimension {} vs {} columns",
                objective.len(),
                constraint_rows.ncols()
            )));
        }
        if constraint_rows.nrows() != bounds.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} constraint rows vs {} bounds",
                constraint_rows.nrows(),
                bounds.len()
            )));
        }
        if bounds.iter().any(|y| *y < 0.0) {
            return Err(Error::Domain("bounds must be nonnegative".into()));
        }
        Ok(Self { objective, constraint_rows, bounds })
    }

    /// Builds the instance straight from an anchor and a measured ensemble.
    pub fn from_measurements(anchor: &Anchor, e: &Ensemble) -> Result<Self> {
        Self::new(anchor.phi.clone(), e.rows().clone(), e.magnitudes().clone())
    }

    pub fn objective(&self) -> &Signal {
        &self.objective
    }

    pub fn constraint_rows(&self) -> &DMatrix<f64> {
        &self.constraint_rows
    }

    pub fn bounds(&self) -> &DVector<f64> {
        &self.bounds
    }

    pub fn num_constraints(&self) -> usize {
        self.constraint_rows.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.constraint_rows.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Unbounded,
    MaxIterations,
}

impl std::fmt::Display for LpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LpStatus::Optimal => write!(f, "optimal"),
            LpStatus::Unbounded => write!(f, "unbounded"),
            LpStatus::MaxIterations => write!(f, "max-iterations"),
        }
    }
}

/// Solver output. `lambda_upper`/`lambda_lower` are the nonnegative
/// multipliers of the upper/lower constraint rows, so dual feasibility
/// reads A^T (lambda_upper - lambda_lower) = phi. `ray` carries an
/// unboundedness certificate d with A d = 0, <phi, d> > 0.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x_hat: Signal,
    pub status: LpStatus,
    pub duality_gap: f64,
    pub primal_infeasibility: f64,
    pub iterations: usize,
    pub lambda_upper: DVector<f64>,
    pub lambda_lower: DVector<f64>,
    pub ray: Option<Signal>,
    /// Number of zero bounds perturbed to keep a strict interior.
    pub perturbed_bounds: usize,
}

impl LpSolution {
    pub fn objective_value(&self, inst: &LpInstance) -> f64 {
        inst.objective.as_vector().dot(self.x_hat.as_vector())
    }
}

/// KKT certificate report for an `optimal` solution.
#[derive(Debug, Clone, Serialize)]
pub struct KktReport {
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub multiplier_negativity: f64,
    pub complementarity_residual: f64,
    pub pass: bool,
}

/// Outcome of the brute-force oracle.
#[derive(Debug, Clone)]
pub enum OracleOutcome {
    Optimal { x_star: DVector<f64>, value: f64 },
    Unbounded,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut alpha = f64::INFINITY;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-v[i] / dv[i]);
        }
    }
    alpha
}

/// Searches the (near-)null space of A for a ray d with <phi, d> != 0,
/// sign-corrected so <phi, d> > 0.
fn unbounded_ray(a: &DMatrix<f64>, phi: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let rank_tol = sigma_max * 1e-10 * a.nrows().max(a.ncols()) as f64;
    let mut best: Option<(f64, DVector<f64>)> = None;
    for k in 0..v_t.nrows() {
        let sv = if k < svd.singular_values.len() { svd.singular_values[k] } else { 0.0 };
        if sv <= rank_tol {
            let d = v_t.row(k).transpose();
            let corr = phi.dot(&d);
            if corr.abs() > 1e-10 * phi.norm() {
                let d = if corr > 0.0 { d } else { -d };
                if best.as_ref().is_none_or(|(c, _)| corr.abs() > *c) {
                    best = Some((corr.abs(), d));
                }
            }
        }
    }
    // v_t from a thin SVD has min(m, n) rows; when m < n the trailing
    // null directions are missing, recover them by completing the basis
    if best.is_none() && a.nrows() < a.ncols() {
        // project phi onto null(A): phi - A^T (A A^T)^+ A phi
        let aat = a * a.transpose();
        let aphi = a * phi;
        if let Some(chol) = (aat + DMatrix::identity(a.nrows(), a.nrows()) * (1e-12 * sigma_max.max(1.0).powi(2))).cholesky() {
            let w = chol.solve(&aphi);
            let d = phi - a.transpose() * w;
            if phi.dot(&d) > 1e-10 * phi.norm().powi(2).max(f64::MIN_POSITIVE) && d.norm() > 1e-12 * phi.norm() {
                return Some(d);
            }
        }
    }
    best.map(|(_, d)| d)
}

/// Solves the LP with a primal-dual path-following interior-point method.
///
/// Termination: relative duality gap <= `gap_tol` and primal/dual
/// infeasibility <= `feas_tol`. Zero bounds are perturbed to
/// 1e-12 * max(y) so the strict interior is nonempty; the count is
/// reported in the solution.
pub fn solve_phasemax(
    inst: &LpInstance,
    gap_tol: f64,
    feas_tol: f64,
    max_iter: usize,
) -> Result<LpSolution> {
    let m = inst.num_constraints();
    let n = inst.dimension();
    let a = &inst.constraint_rows;
    let phi = inst.objective.as_vector();
    let y = &inst.bounds;

    if !phi.iter().all(|v| v.is_finite())
        || !y.iter().all(|v| v.is_finite())
        || !a.iter().all(|v| v.is_finite())
    {
        return Err(Error::Numerical("LP inputs contain non-finite values".into()));
    }

    // A potentially unbounded instance cannot have m >= n with full rank;
    // only run the (costly) null-space probe when m < n.
    if m < n {
        if let Some(d) = unbounded_ray(a, phi) {
            return Ok(LpSolution {
                x_hat: Signal::new(DVector::zeros(n))?,
                status: LpStatus::Unbounded,
                duality_gap: f64::INFINITY,
                primal_infeasibility: 0.0,
                iterations: 0,
                lambda_upper: DVector::zeros(m),
                lambda_lower: DVector::zeros(m),
                ray: Some(Signal::new(d)?),
                perturbed_bounds: 0,
            });
        }
    }

    let y_max = y.max();
    if y_max == 0.0 {
        // feasible set is {x : A x = 0}; with phi in the row space the
        // optimum is x = 0, otherwise the instance is unbounded (handled
        // above for m < n; for m >= n rank-deficiency is required)
        if let Some(d) = unbounded_ray(a, phi) {
            return Ok(LpSolution {
                x_hat: Signal::new(DVector::zeros(n))?,
                status: LpStatus::Unbounded,
                duality_gap: f64::INFINITY,
                primal_infeasibility: 0.0,
                iterations: 0,
                lambda_upper: DVector::zeros(m),
                lambda_lower: DVector::zeros(m),
                ray: Some(Signal::new(d)?),
                perturbed_bounds: 0,
            });
        }
        // least-squares multipliers: A^T (l+ - l-) = phi with l+/l- the
        // positive/negative parts of the minimum-norm solution
        let svd = a.transpose().svd(true, true);
        let mu = svd
            .solve(phi, 1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let lambda_upper = mu.map(|v| v.max(0.0));
        let lambda_lower = mu.map(|v| (-v).max(0.0));
        return Ok(LpSolution {
            x_hat: Signal::new(DVector::zeros(n))?,
            status: LpStatus::Optimal,
            duality_gap: 0.0,
            primal_infeasibility: 0.0,
            iterations: 0,
            lambda_upper,
            lambda_lower,
            ray: None,
            perturbed_bounds: 0,
        });
    }

    let floor = 1e-12 * y_max;
    let mut perturbed_bounds = 0usize;
    let y_eff = DVector::from_fn(m, |i, _| {
        if y[i] < floor {
            perturbed_bounds += 1;
            floor
        } else {
            y[i]
        }
    });

    // strictly feasible start: x = 0, slacks = y, multipliers = 1
    let mut x = DVector::zeros(n);
    let mut sp = y_eff.clone();
    let mut sm = y_eff.clone();
    let mut lp = DVector::from_element(m, 1.0);
    let mut lm = DVector::from_element(m, 1.0);

    let phi_scale = 1.0 + phi.amax();
    let mut iterations = 0usize;
    let mut status = LpStatus::MaxIterations;

    for iter in 1..=max_iter {
        iterations = iter;

        let ax = a * &x;
        let rd = phi - a.transpose() * (&lp - &lm);
        let rp_p = &y_eff - &ax - &sp;
        let rp_m = &y_eff + &ax - &sm;

        let primal_obj = phi.dot(&x);
        let dual_obj = y_eff.dot(&lp) + y_eff.dot(&lm);
        let rel_gap = (dual_obj - primal_obj).abs() / (1.0 + primal_obj.abs());
        let primal_infeas = (0..m)
            .map(|i| (ax[i].abs() - y[i]).max(0.0))
            .fold(0.0f64, f64::max);
        let dual_infeas = rd.amax() / phi_scale;

        if rel_gap <= gap_tol && primal_infeas <= feas_tol && dual_infeas <= feas_tol {
            status = LpStatus::Optimal;
            break;
        }

        let mu = (sp.dot(&lp) + sm.dot(&lm)) / (2 * m) as f64;

        // normal matrix A^T D A with D = diag(lp/sp + lm/sm),
        // formed as B^T B with B = D^{1/2} A
        let dp = lp.component_div(&sp);
        let dm = lm.component_div(&sm);
        let d = &dp + &dm;
        let mut b = a.clone();
        for i in 0..m {
            let scale = d[i].sqrt();
            b.row_mut(i).apply(|v| *v *= scale);
        }
        let ada = b.tr_mul(&b);

        let chol = match ada.clone().cholesky() {
            Some(c) => c,
            None => {
                let reg = 1e-12 * (ada.trace() / n as f64).max(1.0);
                match (ada + DMatrix::identity(n, n) * reg).cholesky() {
                    Some(c) => c,
                    None => {
                        if let Some(ray) = unbounded_ray(a, phi) {
                            status = LpStatus::Unbounded;
                            return Ok(LpSolution {
                                x_hat: Signal::new(x)?,
                                status,
                                duality_gap: rel_gap,
                                primal_infeasibility: primal_infeas,
                                iterations,
                                lambda_upper: lp,
                                lambda_lower: lm,
                                ray: Some(Signal::new(ray)?),
                                perturbed_bounds,
                            });
                        }
                        let cond = d.max() / d.min().max(f64::MIN_POSITIVE);
                        return Err(Error::IllConditioned { cond });
                    }
                }
            }
        };

        let solve_direction = |rc_p: &DVector<f64>, rc_m: &DVector<f64>| {
            let g = rc_p.component_div(&sp) - dp.component_mul(&rp_p)
                - rc_m.component_div(&sm) + dm.component_mul(&rp_m);
            let rhs = &rd - a.transpose() * &g;
            let dx = chol.solve(&rhs);
            let adx = a * &dx;
            let dsp = &rp_p - &adx;
            let dsm = &rp_m + &adx;
            let dlp = (rc_p - lp.component_mul(&dsp)).component_div(&sp);
            let dlm = (rc_m - lm.component_mul(&dsm)).component_div(&sm);
            (dx, dsp, dsm, dlp, dlm)
        };

        // predictor (affine scaling) step
        let rc_p_aff = -sp.component_mul(&lp);
        let rc_m_aff = -sm.component_mul(&lm);
        let (_, dsp_a, dsm_a, dlp_a, dlm_a) = solve_direction(&rc_p_aff, &rc_m_aff);

        let alpha_p_aff = max_step(&sp, &dsp_a).min(max_step(&sm, &dsm_a)).min(1.0);
        let alpha_d_aff = max_step(&lp, &dlp_a).min(max_step(&lm, &dlm_a)).min(1.0);
        let mu_aff = ((&sp + alpha_p_aff * &dsp_a).dot(&(&lp + alpha_d_aff * &dlp_a))
            + (&sm + alpha_p_aff * &dsm_a).dot(&(&lm + alpha_d_aff * &dlm_a)))
            / (2 * m) as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let target = sigma * mu;
        let rc_p = DVector::from_fn(m, |i, _| -sp[i] * lp[i] + target - dsp_a[i] * dlp_a[i]);
        let rc_m = DVector::from_fn(m, |i, _| -sm[i] * lm[i] + target - dsm_a[i] * dlm_a[i]);
        let (dx, dsp, dsm, dlp, dlm) = solve_direction(&rc_p, &rc_m);

        let tau = 0.99995;
        let alpha_p = (tau * max_step(&sp, &dsp).min(max_step(&sm, &dsm))).min(1.0);
        let alpha_d = (tau * max_step(&lp, &dlp).min(max_step(&lm, &dlm))).min(1.0);

        x += alpha_p * &dx;
        sp += alpha_p * &dsp;
        sm += alpha_p * &dsm;
        lp += alpha_d * &dlp;
        lm += alpha_d * &dlm;

        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("iterate diverged to non-finite values".into()));
        }
    }

    let ax = a * &x;
    let primal_obj = phi.dot(&x);
    let dual_obj = y_eff.dot(&lp) + y_eff.dot(&lm);
    let duality_gap = (dual_obj - primal_obj).abs() / (1.0 + primal_obj.abs());
    let primal_infeasibility = (0..m)
        .map(|i| (ax[i].abs() - y[i]).max(0.0))
        .fold(0.0f64, f64::max);

    Ok(LpSolution {
        x_hat: Signal::new(x)?,
        status,
        duality_gap,
        primal_infeasibility,
        iterations,
        lambda_upper: lp,
        lambda_lower: lm,
        ray: None,
        perturbed_bounds,
    })
}

/// Independent KKT check of an `optimal` solution: primal feasibility,
/// dual feasibility ||A^T(l+ - l-) - phi||_inf, multiplier nonnegativity,
/// and complementary slackness max_i |lambda_i * slack_i|.
pub fn verify_kkt(inst: &LpInstance, sol: &LpSolution, tol: f64) -> KktReport {
    let a = &inst.constraint_rows;
    let phi = inst.objective.as_vector();
    let y = &inst.bounds;
    let x = sol.x_hat.as_vector();
    let ax = a * x;
    let m = inst.num_constraints();

    let primal_residual = (0..m)
        .map(|i| (ax[i].abs() - y[i]).max(0.0))
        .fold(0.0f64, f64::max);
    let dual_residual = (a.transpose() * (&sol.lambda_upper - &sol.lambda_lower) - phi).amax();
    let multiplier_negativity = sol
        .lambda_upper
        .iter()
        .chain(sol.lambda_lower.iter())
        .fold(0.0f64, |acc, l| acc.max(-l));
    let complementarity_residual = (0..m)
        .map(|i| {
            let slack_up = y[i] - ax[i];
            let slack_lo = y[i] + ax[i];
            (sol.lambda_upper[i] * slack_up).abs().max((sol.lambda_lower[i] * slack_lo).abs())
        })
        .fold(0.0f64, f64::max);

    let pass = primal_residual <= tol
        && dual_residual <= tol
        && multiplier_negativity <= tol
        && complementarity_residual <= tol;
    KktReport {
        primal_residual,
        dual_residual,
        multiplier_negativity,
        complementarity_residual,
        pass,
    }
}

/// Brute-force LP oracle: enumerates every n-subset of the 2m hyperplanes
/// {<a_i, x> = y_i} and {<a_i, x> = -y_i}, solves the n x n systems,
/// keeps the feasible vertices, and returns the best one. Refuses
/// instances beyond n = 6, m = 12.
pub fn vertex_oracle(inst: &LpInstance) -> Result<OracleOutcome> {
    let m = inst.num_constraints();
    let n = inst.dimension();
    if n > ORACLE_MAX_N || m > ORACLE_MAX_M {
        return Err(Error::OracleScale { max_n: ORACLE_MAX_N, max_m: ORACLE_MAX_M });
    }
    let a = &inst.constraint_rows;
    let phi = inst.objective.as_vector();
    let y = &inst.bounds;

    if unbounded_ray(a, phi).is_some() {
        return Ok(OracleOutcome::Unbounded);
    }

    let feas_slack = 1e-9 * (1.0 + y.amax());
    let mut best: Option<(DVector<f64>, f64)> = None;

    for combo in (0..2 * m).combinations(n) {
        let mut system = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for (r, &j) in combo.iter().enumerate() {
            let (i, sign) = if j < m { (j, 1.0) } else { (j - m, -1.0) };
            system.row_mut(r).copy_from(&a.row(i));
            rhs[r] = sign * y[i];
        }
        let lu = system.full_piv_lu();
        let Some(x) = lu.solve(&rhs) else { continue };
        if !x.iter().all(|v| v.is_finite()) {
            continue;
        }
        let ax = a * &x;
        let feasible = (0..m).all(|i| ax[i].abs() <= y[i] + feas_slack);
        if feasible {
            let value = phi.dot(&x);
            if best.as_ref().is_none_or(|(_, v)| value > *v) {
                best = Some((x, value));
            }
        }
    }

    match best {
        Some((x_star, value)) => Ok(OracleOutcome::Optimal { x_star, value }),
        // full-rank A with nonnegative bounds always has the vertex set
        // of a bounded nonempty polytope; reaching here means the rank
        // probe missed a degeneracy
        None => Err(Error::Numerical("vertex enumeration found no feasible vertex".into())),
    }
}
