//! Signals, Gaussian measurement ensembles, magnitude measurements, and
//! the sign-invariant recovery metric.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Dense real vector of dimension n. Used for the true signal x0, LP
/// candidates, anchor vectors, and perturbation directions.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    entries: DVector<f64>,
}

impl Signal {
    pub fn new(entries: DVector<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidDimension("signal dimension must be >= 1".into()));
        }
        if !entries.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical("signal entries must be finite".into()));
        }
        Ok(Self { entries })
    }

    pub fn from_slice(entries: &[f64]) -> Result<Self> {
        Self::new(DVector::from_row_slice(entries))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.norm()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.entries
    }
}

/// Sampling distribution for synthetic signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalDist {
    UnitSphereUniform,
    StandardGaussian,
}

/// m x n Gaussian measurement matrix together with the magnitude
/// measurements y_i = |<a_i, x0>| and the generation seed.
#[derive(Debug, Clone)]
pub struct Ensemble {
    rows: DMatrix<f64>,
    magnitudes: DVector<f64>,
    seed: u64,
}

impl Ensemble {
    pub fn num_measurements(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dimension(&self) -> usize {
        self.rows.ncols()
    }

    /// The measurement matrix A, rows a_i.
    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn magnitudes(&self) -> &DVector<f64> {
        &self.magnitudes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Relative recovery error modulo the global sign ambiguity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RecoveryMetric {
    pub rel_error_mod_sign: f64,
    pub success: bool,
    pub threshold: f64,
}

/// Draws a deterministic signal of dimension `n` from the given
/// distribution. Unit-sphere samples have exact unit norm up to rounding.
pub fn sample_signal(n: usize, seed: u64, dist: SignalDist) -> Result<Signal> {
    if n == 0 {
        return Err(Error::InvalidDimension("signal dimension must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    loop {
        let v = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        match dist {
            SignalDist::StandardGaussian => return Signal::new(v),
            SignalDist::UnitSphereUniform => {
                let norm = v.norm();
                // resample on the (measure-zero) degenerate draw
                if norm > 1e-30 {
                    return Signal::new(v / norm);
                }
            }
        }
    }
}

/// Draws an m x n matrix with i.i.d. standard normal entries, filled
/// row by row so the variate order is part of the format.
pub fn sample_gaussian_ensemble(n: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidDimension(format!(
            "ensemble dimensions must be positive (m={m}, n={n})"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    Ok(a)
}

/// Computes magnitude measurements y_i = |<a_i, x0>| and packages them
/// with the matrix. The seed field defaults to 0; callers that know the
/// generation seed attach it with [`Ensemble::with_seed`].
pub fn measure(a: DMatrix<f64>, x0: &Signal) -> Result<Ensemble> {
    if a.ncols() != x0.len() {
        return Err(Error::ShapeMismatch(format!(
            "matrix has {} columns but signal has dimension {}",
            a.ncols(),
            x0.len()
        )));
    }
    let magnitudes = (&a * x0.as_vector()).abs();
    Ok(Ensemble { rows: a, magnitudes, seed: 0 })
}

/// Relative l2 distance minimized over the global sign:
/// min(||x - x0||, ||x + x0||) / ||x0||.
pub fn distance_mod_sign(x: &Signal, x0: &Signal, threshold: f64) -> Result<RecoveryMetric> {
    if x.len() != x0.len() {
        return Err(Error::ShapeMismatch(format!(
            "dimensions differ: {} vs {}",
            x.len(),
            x0.len()
        )));
    }
    let ref_norm = x0.norm();
    if ref_norm == 0.0 {
        return Err(Error::InvalidReferenceSignal);
    }
    let minus = (x.as_vector() - x0.as_vector()).norm();
    let plus = (x.as_vector() + x0.as_vector()).norm();
    let rel_error_mod_sign = minus.min(plus) / ref_norm;
    Ok(RecoveryMetric {
        rel_error_mod_sign,
        success: rel_error_mod_sign <= threshold,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn unit_sphere_sample_has_unit_norm() {
        let x = sample_signal(3, 7, SignalDist::UnitSphereUniform).unwrap();
        assert_abs_diff_eq!(x.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_sphere_is_pm_one() {
        let x = sample_signal(1, 0, SignalDist::UnitSphereUniform).unwrap();
        let v = x.as_vector()[0];
        assert!(v == 1.0 || v == -1.0, "got {v}");
    }

    #[test]
    fn signal_sampling_is_deterministic() {
        for dist in [SignalDist::UnitSphereUniform, SignalDist::StandardGaussian] {
            let a = sample_signal(3, 7, dist).unwrap();
            let b = sample_signal(3, 7, dist).unwrap();
            assert_eq!(a.as_vector(), b.as_vector());
        }
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(
            sample_signal(0, 0, SignalDist::StandardGaussian),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            sample_gaussian_ensemble(0, 3, 0),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            sample_gaussian_ensemble(3, 0, 0),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn ensemble_entries_are_standard_normal() {
        // CLT bound: mean within ~3/sqrt(mn) of 0, variance within the
        // same of 1, at m*n = 2.5e6 samples.
        let a = sample_gaussian_ensemble(50, 50_000, 1).unwrap();
        let count = (a.nrows() * a.ncols()) as f64;
        let mean = a.iter().sum::<f64>() / count;
        let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / count;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "variance {var}");
    }

    #[test]
    fn ensemble_sampling_is_deterministic_and_finite() {
        let a = sample_gaussian_ensemble(2, 3, 5).unwrap();
        let b = sample_gaussian_ensemble(2, 3, 5).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian_ensemble(10, 100, 2).unwrap();
        assert!(c.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn measure_identity_and_hadamard() {
        let x0 = Signal::from_slice(&[1.0, -2.0]).unwrap();
        let e = measure(DMatrix::identity(2, 2), &x0).unwrap();
        assert_eq!(e.magnitudes().as_slice(), &[1.0, 2.0]);

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let ones = Signal::from_slice(&[1.0, 1.0]).unwrap();
        let e = measure(a, &ones).unwrap();
        assert_eq!(e.magnitudes().as_slice(), &[2.0, 0.0]);

        let zero = Signal::from_slice(&[0.0, 0.0]).unwrap();
        let e = measure(DMatrix::identity(2, 2), &zero).unwrap();
        assert_eq!(e.magnitudes().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn measure_rejects_shape_mismatch() {
        let x0 = Signal::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            measure(DMatrix::identity(2, 2), &x0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn distance_mod_sign_basics() {
        let x = sample_signal(4, 3, SignalDist::UnitSphereUniform).unwrap();
        let m = distance_mod_sign(&x, &x, 1e-5).unwrap();
        assert_eq!(m.rel_error_mod_sign, 0.0);
        assert!(m.success);

        let neg = Signal::new(-x.as_vector().clone()).unwrap();
        let m = distance_mod_sign(&neg, &x, 1e-5).unwrap();
        assert_eq!(m.rel_error_mod_sign, 0.0);
        assert!(m.success);

        let e1 = Signal::from_slice(&[1.0, 0.0]).unwrap();
        let e2 = Signal::from_slice(&[0.0, 1.0]).unwrap();
        let m = distance_mod_sign(&e1, &e2, 1e-5).unwrap();
        assert_abs_diff_eq!(m.rel_error_mod_sign, 2.0_f64.sqrt(), epsilon = 1e-15);
        assert!(!m.success);
    }

    #[test]
    fn distance_mod_sign_rejects_zero_reference() {
        let x = Signal::from_slice(&[1.0]).unwrap();
        let zero = Signal::from_slice(&[0.0]).unwrap();
        assert!(matches!(
            distance_mod_sign(&x, &zero, 1e-5),
            Err(Error::InvalidReferenceSignal)
        ));
    }
}
