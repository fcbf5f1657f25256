//! Tripod tree positivity diagnostics: between-group cross-covariances of
//! projected scores, the triple-product constraint over all group triples,
//! and the brute-force verification machinery around it.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cva::ScoreTable;
use crate::error::{Error, Result};

/// Between-group cross-covariance of one component's projected word means.
#[derive(Debug, Clone)]
pub struct CrossCovariance {
    pub component: usize,
    pub languages: Vec<String>,
    pub matrix: DMatrix<f64>,
}

/// One triple's constraint evaluation.
#[derive(Debug, Clone)]
pub struct TripleResult {
    /// (i, j, k) language indices, i < j < k.
    pub triple: (usize, usize, usize),
    /// σ_ij · σ_ik · σ_jk
    pub product: f64,
    pub satisfied: bool,
    /// True when any factor is tiny relative to the matrix norm, so the
    /// pass/fail verdict is numerically fragile.
    pub near_degenerate: bool,
}

/// Positivity diagnostic for one component.
#[derive(Debug, Clone)]
pub struct TreeDiagnostic {
    pub component: usize,
    pub triples: Vec<TripleResult>,
    /// Count of satisfied constraints, out of C(n_l, 3).
    pub t_count: usize,
    pub amenable: bool,
}

/// Relative magnitude below which a covariance entry is flagged
/// near-degenerate in the diagnostic.
pub const NEAR_DEGENERATE_REL: f64 = 1e-12;

/// Builds the between-group cross-covariance of component `i` from
/// projected word means:
/// σ_{l,l'} = Σ_d √m_ld √m_l'd (ȳ_ld − ȳ_d)(ȳ_l'd − ȳ_d) / (n_d − 1).
///
/// Cells with m_ld = 0 carry weight √0 = 0 and drop out. The result is a
/// Gram-form sum over words, hence symmetric PSD of rank ≤ n_d.
pub fn cross_covariance(scores: &ScoreTable, component: usize) -> Result<CrossCovariance> {
    if component >= scores.r {
        return Err(Error::ComponentOutOfRange {
            index: component,
            len: scores.r,
        });
    }
    let n_l = scores.languages.len();
    let n_d = scores.words.len();
    if n_d < 2 {
        return Err(Error::DegenerateDivisor(n_d));
    }

    let mut matrix = DMatrix::<f64>::zeros(n_l, n_l);
    for d in 0..n_d {
        let word_mean = scores.word_means[d][component];
        let mut dev = vec![0.0; n_l];
        for l in 0..n_l {
            if let Some(cell) = &scores.word_language_means[l][d] {
                let m_ld = scores.counts[l][d] as f64;
                dev[l] = m_ld.sqrt() * (cell[component] - word_mean);
            }
        }
        for l in 0..n_l {
            for lp in 0..n_l {
                matrix[(l, lp)] += dev[l] * dev[lp];
            }
        }
    }
    matrix /= (n_d - 1) as f64;

    Ok(CrossCovariance {
        component,
        languages: scores.languages.clone(),
        matrix,
    })
}

/// Number of triples C(n, 3).
pub fn triple_count(n: usize) -> usize {
    if n < 3 {
        0
    } else {
        n * (n - 1) * (n - 2) / 6
    }
}

/// Evaluates σ_ij·σ_ik·σ_jk ≥ 0 on every i < j < k. A product of exactly
/// zero counts as satisfied.
pub fn positivity_check(cov: &CrossCovariance) -> Result<TreeDiagnostic> {
    let n_l = cov.matrix.nrows();
    if n_l < 3 {
        return Err(Error::TooFewGroups(n_l));
    }
    let norm = cov.matrix.norm();
    let mut triples = Vec::with_capacity(triple_count(n_l));
    let mut t_count = 0;
    for i in 0..n_l {
        for j in i + 1..n_l {
            for k in j + 1..n_l {
                let (sij, sik, sjk) = (cov.matrix[(i, j)], cov.matrix[(i, k)], cov.matrix[(j, k)]);
                let product = sij * sik * sjk;
                let satisfied = product >= 0.0;
                if satisfied {
                    t_count += 1;
                }
                let floor = NEAR_DEGENERATE_REL * norm;
                triples.push(TripleResult {
                    triple: (i, j, k),
                    product,
                    satisfied,
                    near_degenerate: sij.abs() < floor || sik.abs() < floor || sjk.abs() < floor,
                });
            }
        }
    }
    Ok(TreeDiagnostic {
        component: cov.component,
        triples,
        t_count,
        amenable: t_count == triple_count(n_l),
    })
}

/// Monte Carlo verification that the positivity constraint is a necessary
/// condition for the Gaussian tripod: draws random 4×4 precision matrices
/// with the tripod zero pattern (manifest–manifest off-diagonals zero),
/// rejects non-PD draws, inverts, and checks the constraint on the 3×3
/// manifest margin. Returns the fraction of valid draws that satisfy it;
/// the ground truth is exactly 1.0.
pub fn tripod_oracle(seed: u64, trials: usize) -> f64 {
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut satisfied = 0usize;
    let mut done = 0usize;
    while done < trials {
        let precision = sample_tripod_precision(&mut rng);
        let Some(chol) = nalgebra::Cholesky::new(precision.clone()) else {
            continue; // not PD, rejected
        };
        let cov = chol.inverse();
        let product = cov[(0, 1)] * cov[(0, 2)] * cov[(1, 2)];
        if product >= 0.0 {
            satisfied += 1;
        }
        done += 1;
    }
    satisfied as f64 / trials as f64
}

/// Diagonal entries U(1,2), hidden–manifest entries U(−1,1),
/// manifest–manifest entries zero.
fn sample_tripod_precision(rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut k = DMatrix::<f64>::zeros(4, 4);
    for i in 0..4 {
        k[(i, i)] = rng.gen_range(1.0..2.0);
    }
    for i in 0..3 {
        let v = rng.gen_range(-1.0..1.0);
        k[(i, 3)] = v;
        k[(3, i)] = v;
    }
    k
}

/// Rejects matrices that break the tripod zero pattern: every
/// manifest–manifest off-diagonal (entries among the first three
/// rows/columns) must be exactly zero.
pub fn validate_tripod_pattern(precision: &DMatrix<f64>) -> bool {
    if precision.nrows() != 4 || precision.ncols() != 4 {
        return false;
    }
    for i in 0..3 {
        for j in 0..3 {
            if i != j && precision[(i, j)] != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Exhaustive census over all 2¹⁰ sign assignments of the off-diagonal
/// entries of a 5×5 covariance, returning how often each T count occurs.
/// Since every off-diagonal sits in exactly three of the ten triples, the
/// counts 1, 2, 8, and 9 never occur.
pub fn sign_pattern_census() -> Vec<usize> {
    let n_l = 5;
    let pairs: Vec<(usize, usize)> = (0..n_l)
        .flat_map(|i| (i + 1..n_l).map(move |j| (i, j)))
        .collect();
    debug_assert_eq!(pairs.len(), 10);

    let mut histogram = vec![0usize; triple_count(n_l) + 1];
    for mask in 0u32..(1 << pairs.len()) {
        let sign = |i: usize, j: usize| -> f64 {
            let idx = pairs.iter().position(|&p| p == (i, j)).unwrap();
            if mask & (1 << idx) == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut t = 0;
        for i in 0..n_l {
            for j in i + 1..n_l {
                for k in j + 1..n_l {
                    if sign(i, j) * sign(i, k) * sign(j, k) >= 0.0 {
                        t += 1;
                    }
                }
            }
        }
        histogram[t] += 1;
    }
    histogram
}
