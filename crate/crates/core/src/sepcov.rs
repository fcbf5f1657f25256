//! Directional (separable) covariance estimation: between- and within-group
//! covariance factors in the frequency and time directions.

use nalgebra::DMatrix;

use crate::corpus::{Corpus, MeanSet};
use crate::error::{Error, Result};
use crate::numeric::pairwise_matrix_sum;

/// Relative floor for the smallest within-covariance eigenvalue, as a
/// fraction of trace/dim.
pub const RIDGE_EPS_DEFAULT: f64 = 1e-8;

/// The four directional covariance factors of the separable model.
#[derive(Debug, Clone)]
pub struct DirectionalCovariances {
    /// Between-group frequency covariance, n_f × n_f.
    pub b_f: DMatrix<f64>,
    /// Within-group frequency covariance, n_f × n_f, positive definite.
    pub w_f: DMatrix<f64>,
    /// Between-group time covariance, n_t × n_t.
    pub b_t: DMatrix<f64>,
    /// Within-group time covariance, n_t × n_t, positive definite.
    pub w_t: DMatrix<f64>,
    /// Diagonal ridge added to w_f / w_t to restore positive definiteness.
    pub ridge_w_f: f64,
    pub ridge_w_t: f64,
}

impl DirectionalCovariances {
    /// Checks the symmetry and definiteness invariants; used by tests and
    /// available to callers that construct instances by hand.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in [
            ("B_f", &self.b_f),
            ("W_f", &self.w_f),
            ("B_t", &self.b_t),
            ("W_t", &self.w_t),
        ] {
            let scale = m.amax().max(f64::MIN_POSITIVE);
            if (m - m.transpose()).amax() > 1e-12 * scale {
                return Err(Error::InvalidConfig(format!("{name} is not symmetric")));
            }
        }
        for (name, m) in [("W_f", &self.w_f), ("W_t", &self.w_t)] {
            let eigs = m.clone().symmetric_eigenvalues();
            if eigs.min() <= 0.0 {
                return Err(Error::NotPositiveDefinite(name.to_string()));
            }
        }
        for (name, m) in [("B_f", &self.b_f), ("B_t", &self.b_t)] {
            let eigs = m.clone().symmetric_eigenvalues();
            if eigs.min() < -1e-10 * eigs.max().max(f64::MIN_POSITIVE) {
                return Err(Error::InvalidConfig(format!("{name} is not PSD")));
            }
        }
        Ok(())
    }
}

/// Estimates the four directional covariances from a (gender-adjusted)
/// corpus and its mean hierarchy.
///
/// Between factors pool language-mean deviations from the grand mean with
/// weight m_l·/n_other; within factors pool observation deviations from the
/// language mean with divisor n − n_l. Contributions are accumulated with
/// pairwise summation.
pub fn estimate_directional(corpus: &Corpus, means: &MeanSet) -> Result<DirectionalCovariances> {
    estimate_directional_with(corpus, means, RIDGE_EPS_DEFAULT)
}

/// [`estimate_directional`] with a caller-chosen relative ridge floor.
pub fn estimate_directional_with(
    corpus: &Corpus,
    means: &MeanSet,
    ridge_eps: f64,
) -> Result<DirectionalCovariances> {
    if !(ridge_eps >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "ridge eps must be >= 0, got {ridge_eps}"
        )));
    }
    let (n_f, n_t) = (corpus.n_f(), corpus.n_t());
    let (n, n_l) = (corpus.n(), corpus.n_l());
    let required = max_min_ratio_ceil(n_f, n_t);
    if n < required {
        return Err(Error::RankCondition { n, required });
    }
    if n_l < 2 {
        return Err(Error::InvalidConfig(
            "between-group estimation needs at least 2 groups".into(),
        ));
    }
    if n <= n_l {
        return Err(Error::InvalidConfig(
            "within-group estimation needs n > n_l".into(),
        ));
    }

    // Canonical (label-sorted) accumulation order keeps the outputs
    // bit-identical under permutation of the input observations.
    let mut lang_order: Vec<usize> = (0..n_l).collect();
    lang_order.sort_by(|&a, &b| corpus.languages()[a].cmp(&corpus.languages()[b]));

    let mut between_f = Vec::with_capacity(n_l);
    let mut between_t = Vec::with_capacity(n_l);
    for &l in &lang_order {
        let dev = &means.language_means[l] - &means.grand_mean;
        let weight = corpus.language_count(l) as f64;
        between_f.push(&dev * dev.transpose() * (weight / n_t as f64));
        between_t.push(dev.transpose() * &dev * (weight / n_f as f64));
    }
    let b_f = pairwise_matrix_sum(between_f).unwrap() / (n_l - 1) as f64;
    let b_t = pairwise_matrix_sum(between_t).unwrap() / (n_l - 1) as f64;

    let mut within_f = Vec::with_capacity(n);
    let mut within_t = Vec::with_capacity(n);
    for idx in corpus.canonical_order() {
        let obs = &corpus.observations()[idx];
        let l = corpus.language_index(&obs.language).unwrap();
        let dev = &obs.values - &means.language_means[l];
        within_f.push(&dev * dev.transpose() / n_t as f64);
        within_t.push(dev.transpose() * &dev / n_f as f64);
    }
    let w_f = pairwise_matrix_sum(within_f).unwrap() / (n - n_l) as f64;
    let w_t = pairwise_matrix_sum(within_t).unwrap() / (n - n_l) as f64;

    let (w_f, ridge_w_f) = ridge_regularize(symmetrize(w_f), ridge_eps);
    let (w_t, ridge_w_t) = ridge_regularize(symmetrize(w_t), ridge_eps);

    Ok(DirectionalCovariances {
        b_f: symmetrize(b_f),
        w_f,
        b_t: symmetrize(b_t),
        w_t,
        ridge_w_f,
        ridge_w_t,
    })
}

fn max_min_ratio_ceil(a: usize, b: usize) -> usize {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi.div_ceil(lo)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Lifts the smallest eigenvalue of a symmetric matrix to at least
/// eps_rel × trace/dim by adding a diagonal ridge. A zero matrix falls back
/// to an absolute floor of eps_rel so it still becomes invertible.
pub fn ridge_regularize(m: DMatrix<f64>, eps_rel: f64) -> (DMatrix<f64>, f64) {
    let dim = m.nrows();
    let mut scale = m.trace() / dim as f64;
    if scale <= 0.0 {
        scale = 1.0;
    }
    let eps = eps_rel * scale;
    let lambda_min = m.clone().symmetric_eigenvalues().min();
    if lambda_min < eps {
        let ridge = eps - lambda_min;
        (m + DMatrix::identity(dim, dim) * ridge, ridge)
    } else {
        (m, 0.0)
    }
}
