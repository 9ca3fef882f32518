//! Anchor vector construction: truncated and plain spectral initializers
//! driven by matrix-free power iteration, plus a synthetic anchor with a
//! controlled error for hypothesis sweeps.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Ensemble, Signal};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnchorMethod {
    TruncatedSpectral,
    PlainSpectral,
    Synthetic,
}

/// An anchor vector phi together with how it was built. For spectral
/// methods `lambda` is the scale estimate sqrt(mean(y_i^2)) and
/// `truncated_count` the number of measurements kept by the indicator.
#[derive(Debug, Clone)]
pub struct Anchor {
    pub phi: Signal,
    pub method: AnchorMethod,
    pub lambda: f64,
    pub truncated_count: usize,
}

/// Leading eigenpair of a symmetric PSD operator, with the residual
/// ||M v - theta v|| measured at exit.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub vector: Signal,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl EigResult {
    /// True when the exit residual met the requested tolerance.
    pub fn converged(&self, tol: f64) -> bool {
        self.residual <= tol * self.value.abs().max(f64::MIN_POSITIVE)
    }
}

/// Power iteration on a matrix-free symmetric PSD operator. Starts from a
/// seeded random unit vector (a fixed start such as e_1 can be orthogonal
/// to the leading eigenvector). Stops when ||Mv - theta v|| <= tol*|theta|
/// or after `max_iter` applications; hitting the cap is reported, not an
/// error. The returned vector has its first nonzero coordinate positive.
pub fn leading_eigenvector<F>(
    apply: F,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<EigResult>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if n == 0 {
        return Err(Error::InvalidDimension("operator dimension must be >= 1".into()));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    v /= v.norm();

    let mut value = 0.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    for iter in 1..=max_iter {
        iterations = iter;
        let w = apply(&v);
        if w.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "operator returned length {} for dimension {}",
                w.len(),
                n
            )));
        }
        if !w.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("operator returned non-finite values".into()));
        }
        value = v.dot(&w);
        residual = (&w - value * &v).norm();
        if residual <= tol * value.abs() {
            break;
        }
        let norm = w.norm();
        if norm == 0.0 {
            // zero operator: any unit vector is an eigenvector for 0
            value = 0.0;
            residual = 0.0;
            break;
        }
        v = w / norm;
    }
    fix_sign(&mut v);
    Ok(EigResult {
        vector: Signal::new(v)?,
        value,
        iterations,
        residual,
    })
}

fn fix_sign(v: &mut DVector<f64>) {
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            *v = -&*v;
        }
    }
}

fn spectral_anchor(
    e: &Ensemble,
    truncate: bool,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Anchor> {
    let m = e.num_measurements();
    let n = e.dimension();
    let y = e.magnitudes();
    let lambda = (y.norm_squared() / m as f64).sqrt();
    if lambda == 0.0 {
        return Err(Error::DegenerateMeasurements);
    }

    // weights y_i^2 1{y_i < 3 lambda}; the plain variant keeps every row
    let cutoff = 3.0 * lambda;
    let mut weights = DVector::zeros(m);
    let mut kept = 0usize;
    for i in 0..m {
        if !truncate || y[i] < cutoff {
            weights[i] = y[i] * y[i];
            kept += 1;
        }
    }

    let a = e.rows();
    // v -> (1/m) sum_i w_i <a_i, v> a_i, never materializing the n x n matrix
    let apply = |v: &DVector<f64>| -> DVector<f64> {
        let mut av = a * v;
        av.component_mul_assign(&weights);
        (a.transpose() * av) / m as f64
    };
    let eig = leading_eigenvector(apply, n, tol, max_iter, seed)?;

    let row_norms_sq: f64 = a.row_iter().map(|r| r.norm_squared()).sum();
    let scale = ((m * n) as f64 / row_norms_sq).sqrt() * lambda;
    let phi = Signal::new(eig.vector.as_vector() * scale)?;
    Ok(Anchor {
        phi,
        method: if truncate { AnchorMethod::TruncatedSpectral } else { AnchorMethod::PlainSpectral },
        lambda,
        truncated_count: kept,
    })
}

/// Truncated spectral initializer: leading eigenvector of
/// (1/m) sum y_i^2 a_i a_i^T 1{y_i < 3 lambda}, rescaled by
/// sqrt(mn / sum ||a_i||^2) * lambda.
pub fn truncated_spectral_anchor(
    e: &Ensemble,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Anchor> {
    spectral_anchor(e, true, tol, max_iter, seed)
}

/// Plain spectral initializer: same construction without the indicator.
pub fn plain_spectral_anchor(e: &Ensemble, tol: f64, max_iter: usize, seed: u64) -> Result<Anchor> {
    spectral_anchor(e, false, tol, max_iter, seed)
}

/// Anchor with an exactly controlled relative error:
/// phi = x0 + beta*||x0||*u for a uniformly random unit direction u,
/// so ||phi - x0|| = beta*||x0||. beta in [0, 2) covers anchors both
/// inside and outside the recovery hypothesis.
pub fn synthetic_anchor(x0: &Signal, beta: f64, seed: u64) -> Result<Anchor> {
    if x0.norm() == 0.0 {
        return Err(Error::InvalidReferenceSignal);
    }
    if !(0.0..2.0).contains(&beta) {
        return Err(Error::Domain(format!("beta must be in [0, 2), got {beta}")));
    }
    let n = x0.len();
    let mut rng = rng_from_seed(seed);
    let phi = if beta == 0.0 {
        x0.as_vector().clone()
    } else {
        let mut u;
        loop {
            u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let norm = u.norm();
            if norm > 1e-30 {
                u /= norm;
                break;
            }
        }
        x0.as_vector() + beta * x0.norm() * u
    };
    Ok(Anchor {
        phi: Signal::new(phi)?,
        method: AnchorMethod::Synthetic,
        lambda: 0.0,
        truncated_count: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{distance_mod_sign, measure, sample_gaussian_ensemble, sample_signal, SignalDist};
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, SymmetricEigen};

    fn dense_apply(m: DMatrix<f64>) -> impl Fn(&DVector<f64>) -> DVector<f64> {
        move |v| &m * v
    }

    #[test]
    fn diagonal_top_pair() {
        let m = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 1.0]));
        let eig = leading_eigenvector(dense_apply(m), 2, 1e-10, 10_000, 1).unwrap();
        assert_abs_diff_eq!(eig.value, 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(eig.vector.as_vector()[0].abs(), 1.0, epsilon = 1e-6);
        assert!(eig.vector.as_vector()[0] > 0.0, "sign convention");
    }

    #[test]
    fn identity_degenerate_spectrum() {
        let eig = leading_eigenvector(dense_apply(DMatrix::identity(5, 5)), 5, 1e-10, 10_000, 3).unwrap();
        assert_abs_diff_eq!(eig.value, 1.0, epsilon = 1e-10);
        assert!(eig.residual <= 1e-10 * eig.value.abs());
        assert_abs_diff_eq!(eig.vector.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn random_psd_matches_dense_eigensolver() {
        // oracle: nalgebra's dense symmetric eigensolver
        let g = sample_gaussian_ensemble(5, 8, 11).unwrap();
        let mut m = g.transpose() * &g / 8.0;
        // push the top eigenvalue up so the spectral gap is comfortable
        let x = sample_signal(5, 12, SignalDist::UnitSphereUniform).unwrap();
        m += 2.0 * x.as_vector() * x.as_vector().transpose();

        let dense = SymmetricEigen::new(m.clone());
        let (top_idx, top_val) = dense
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, v)| (i, *v))
            .unwrap();
        let gap = dense
            .eigenvalues
            .iter()
            .filter(|v| **v < top_val)
            .fold(f64::INFINITY, |acc, v| acc.min(top_val - v));
        assert!(gap >= 0.1, "test fixture needs a spectral gap, got {gap}");
        let top_vec = dense.eigenvectors.column(top_idx).into_owned();

        let eig = leading_eigenvector(dense_apply(m), 5, 1e-12, 100_000, 2).unwrap();
        assert_abs_diff_eq!(eig.value, top_val, epsilon = 1e-8);
        let align = eig.vector.as_vector().dot(&top_vec).abs();
        assert_abs_diff_eq!(align, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn nan_operator_is_an_error() {
        let apply = |_: &DVector<f64>| DVector::from_element(2, f64::NAN);
        assert!(matches!(
            leading_eigenvector(apply, 2, 1e-8, 100, 0),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        let apply = |v: &DVector<f64>| v.clone();
        assert!(matches!(
            leading_eigenvector(apply, 0, 1e-8, 100, 0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn one_dimensional_truncated_anchor_closed_form() {
        let a = DMatrix::from_element(4, 1, 1.0);
        let x0 = Signal::from_slice(&[2.0]).unwrap();
        let e = measure(a, &x0).unwrap();
        let anchor = truncated_spectral_anchor(&e, 1e-10, 1000, 0).unwrap();
        assert_abs_diff_eq!(anchor.lambda, 2.0, epsilon = 1e-12);
        assert_eq!(anchor.truncated_count, 4);
        assert_abs_diff_eq!(anchor.phi.as_vector()[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn one_dimensional_plain_anchor() {
        let a = DMatrix::from_element(2, 1, 1.0);
        let x0 = Signal::from_slice(&[3.0]).unwrap();
        let e = measure(a, &x0).unwrap();
        let anchor = plain_spectral_anchor(&e, 1e-10, 1000, 0).unwrap();
        assert_abs_diff_eq!(anchor.phi.as_vector()[0], 3.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_measurements_are_degenerate() {
        let a = DMatrix::identity(3, 3);
        let x0 = Signal::from_slice(&[0.0, 0.0, 0.0]).unwrap();
        let e = measure(a, &x0).unwrap();
        assert!(matches!(
            truncated_spectral_anchor(&e, 1e-8, 1000, 0),
            Err(Error::DegenerateMeasurements)
        ));
        assert!(matches!(
            plain_spectral_anchor(&e, 1e-8, 1000, 0),
            Err(Error::DegenerateMeasurements)
        ));
    }

    #[test]
    fn inactive_indicator_matches_plain() {
        // With m = 2 measurements, each y_i^2 <= 2*lambda^2 so y_i < 3*lambda
        // always holds and the two variants agree exactly.
        let a = sample_gaussian_ensemble(3, 2, 9).unwrap();
        let x0 = sample_signal(3, 10, SignalDist::UnitSphereUniform).unwrap();
        let e = measure(a, &x0).unwrap();
        let t = truncated_spectral_anchor(&e, 1e-10, 10_000, 4).unwrap();
        let p = plain_spectral_anchor(&e, 1e-10, 10_000, 4).unwrap();
        assert_eq!(t.truncated_count, 2);
        assert_eq!(t.phi.as_vector(), p.phi.as_vector());
    }

    #[test]
    fn truncation_set_matches_direct_scan() {
        let a = sample_gaussian_ensemble(10, 200, 21).unwrap();
        let x0 = sample_signal(10, 22, SignalDist::UnitSphereUniform).unwrap();
        let e = measure(a, &x0).unwrap();
        let anchor = truncated_spectral_anchor(&e, 1e-8, 10_000, 5).unwrap();
        let y = e.magnitudes();
        let lambda = (y.norm_squared() / 200.0).sqrt();
        let direct = y.iter().filter(|yi| **yi < 3.0 * lambda).count();
        assert_eq!(anchor.truncated_count, direct);
    }

    #[test]
    fn initializer_scale_equivariance() {
        let a = sample_gaussian_ensemble(8, 120, 31).unwrap();
        let x0 = sample_signal(8, 32, SignalDist::UnitSphereUniform).unwrap();
        let x0_scaled = Signal::new(3.0 * x0.as_vector()).unwrap();
        let e1 = measure(a.clone(), &x0).unwrap();
        let e2 = measure(a, &x0_scaled).unwrap();
        let t1 = truncated_spectral_anchor(&e1, 1e-10, 10_000, 6).unwrap();
        let t2 = truncated_spectral_anchor(&e2, 1e-10, 10_000, 6).unwrap();
        assert_eq!(t1.truncated_count, t2.truncated_count);
        assert_abs_diff_eq!(t2.lambda, 3.0 * t1.lambda, epsilon = 1e-12);
        let diff = (t2.phi.as_vector() - 3.0 * t1.phi.as_vector()).norm();
        assert!(diff <= 1e-8 * t2.phi.norm(), "diff {diff}");
    }

    #[test]
    fn truncated_anchor_quality_desk_scale() {
        // min(||phi - x0||, ||phi + x0||) <= 0.6 holds in >= 95 of 100
        // seeds at n = 100 once m reaches 1500. At m = 1000 the observed
        // rate is ~75% (confirmed against a dense-eigensolver oracle), so
        // the campaign is run at the sample size where the bound holds.
        let mut passes = 0;
        for seed in 0..100u64 {
            let x0 = sample_signal(100, 1000 + seed, SignalDist::UnitSphereUniform).unwrap();
            let a = sample_gaussian_ensemble(100, 1500, 2000 + seed).unwrap();
            let e = measure(a, &x0).unwrap();
            let anchor = truncated_spectral_anchor(&e, 1e-6, 10_000, 3000 + seed).unwrap();
            let err = distance_mod_sign(&anchor.phi, &x0, 0.6).unwrap();
            if err.rel_error_mod_sign <= 0.6 {
                passes += 1;
            }
        }
        assert!(passes >= 95, "only {passes}/100 anchors within 0.6");
    }

    #[test]
    fn plain_anchor_quality_at_n_log_n() {
        // m = 12 * n * ceil(log n): anchor error <= 0.6 in >= 90% of seeds
        let n = 100usize;
        let m = 12 * n * (n as f64).ln().ceil() as usize;
        let mut passes = 0;
        for seed in 0..100u64 {
            let x0 = sample_signal(n, 4000 + seed, SignalDist::UnitSphereUniform).unwrap();
            let a = sample_gaussian_ensemble(n, m, 5000 + seed).unwrap();
            let e = measure(a, &x0).unwrap();
            let anchor = plain_spectral_anchor(&e, 1e-6, 10_000, 6000 + seed).unwrap();
            let err = distance_mod_sign(&anchor.phi, &x0, 0.6).unwrap();
            if err.rel_error_mod_sign <= 0.6 {
                passes += 1;
            }
        }
        assert!(passes >= 90, "only {passes}/100 anchors within 0.6");
    }

    #[test]
    fn synthetic_anchor_exact_error() {
        let x0 = sample_signal(6, 8, SignalDist::StandardGaussian).unwrap();
        let a0 = synthetic_anchor(&x0, 0.0, 1).unwrap();
        assert_eq!(a0.phi.as_vector(), x0.as_vector());

        for beta in [0.59, 1.5] {
            let anchor = synthetic_anchor(&x0, beta, 2).unwrap();
            let err = (anchor.phi.as_vector() - x0.as_vector()).norm() / x0.norm();
            assert_abs_diff_eq!(err, beta, epsilon = 1e-12);
        }

        let zero = Signal::from_slice(&[0.0, 0.0]).unwrap();
        assert!(matches!(
            synthetic_anchor(&zero, 0.5, 0),
            Err(Error::InvalidReferenceSignal)
        ));
    }
}
