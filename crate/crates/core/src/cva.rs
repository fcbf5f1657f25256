//! Separable canonical variate analysis: directional generalized
//! eigenproblems, Kronecker combination of their solutions, component
//! selection, projection, and Hadamard interpretation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::corpus::{compute_means, Corpus, MeanSet};
use crate::error::{Error, Result};
use crate::sepcov::DirectionalCovariances;

/// One directional eigenpair of W⁻¹B, unit Euclidean norm, first nonzero
/// coordinate positive.
#[derive(Debug, Clone)]
pub struct DirectionalEigenpair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// One combined component: eigenvalue product, outer-product matrix, and the
/// directional indices it came from.
#[derive(Debug, Clone)]
pub struct Component {
    pub value: f64,
    /// n_f × n_t outer product of a frequency and a time eigenvector.
    pub matrix: DMatrix<f64>,
    /// (q_f, q_t), zero-based indices into the directional solutions.
    pub source: (usize, usize),
}

/// Ordered basis combining the directional solutions.
#[derive(Debug, Clone)]
pub struct CanonicalBasis {
    pub components: Vec<Component>,
    pub freq_solution: Vec<DirectionalEigenpair>,
    pub time_solution: Vec<DirectionalEigenpair>,
}

/// Result of applying the cumulative-fraction threshold.
#[derive(Debug, Clone)]
pub struct Selection {
    /// Number of retained leading components.
    pub r: usize,
    /// Per-component explanatory fraction λ_i / Σλ.
    pub fractions: Vec<f64>,
    /// Running cumulative fractions.
    pub cumulative: Vec<f64>,
}

/// Score of one observation on the retained components, with its labels.
#[derive(Debug, Clone)]
pub struct ObservationScores {
    pub language: String,
    pub word: String,
    pub replicate: u32,
    pub values: Vec<f64>,
}

/// Projected data: per-observation scores plus the projected word-language
/// means ȳ_{ld} and count-weighted word means ȳ_d needed downstream.
///
/// Carries its own label and count bookkeeping so the cross-covariance step
/// does not need the corpus.
#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub r: usize,
    pub languages: Vec<String>,
    pub words: Vec<String>,
    /// counts[l][d] = m_ld
    pub counts: Vec<Vec<usize>>,
    pub observations: Vec<ObservationScores>,
    /// word_language_means[l][d], None where m_ld = 0; each entry has r scores.
    pub word_language_means: Vec<Vec<Option<Vec<f64>>>>,
    /// word_means[d] has r scores, the m_ld-weighted average over languages.
    pub word_means: Vec<Vec<f64>>,
}

/// Solves the generalized eigenproblem of W⁻¹B by symmetric reduction:
/// W = LLᵀ, eigen-decomposition of L⁻¹ B L⁻ᵀ, back-transformation of the
/// eigenvectors. Eigenvalues are clamped at zero (B is PSD, so negatives are
/// rounding) and sorted descending.
pub fn solve_directional(
    w: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<Vec<DirectionalEigenpair>> {
    if w.nrows() != w.ncols() || b.nrows() != b.ncols() || w.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected_rows: w.nrows(),
            expected_cols: w.nrows(),
            rows: b.nrows(),
            cols: b.ncols(),
            context: "generalized eigenproblem".into(),
        });
    }
    let chol = nalgebra::Cholesky::new(w.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("W in directional solve".into()))?;
    let l = chol.l();
    let t1 = l
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let s = l
        .solve_lower_triangular(&t1.transpose())
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?
        .transpose();
    let s = (&s + s.transpose()) * 0.5;

    let eig = SymmetricEigen::new(s);
    let lt = l.transpose();
    let mut pairs: Vec<DirectionalEigenpair> = Vec::with_capacity(w.nrows());
    for k in 0..w.nrows() {
        let u = eig.eigenvectors.column(k).into_owned();
        let a = lt
            .solve_upper_triangular(&u)
            .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
        pairs.push(DirectionalEigenpair {
            value: eig.eigenvalues[k].max(0.0),
            vector: normalize_signed(a),
        });
    }
    pairs.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
    Ok(pairs)
}

/// Unit Euclidean norm with the first nonzero coordinate positive.
fn normalize_signed(mut v: DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    if norm > 0.0 {
        v /= norm;
    }
    if let Some(first) = v.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            v = -v;
        }
    }
    v
}

/// Forms all n_f·n_t product pairs (λ_f·λ_t, c_f c_tᵀ), sorted by descending
/// eigenvalue with ties broken by ascending (q_f, q_t).
pub fn combine_kronecker(
    freq_solution: Vec<DirectionalEigenpair>,
    time_solution: Vec<DirectionalEigenpair>,
) -> CanonicalBasis {
    let mut components = Vec::with_capacity(freq_solution.len() * time_solution.len());
    for (qf, fp) in freq_solution.iter().enumerate() {
        for (qt, tp) in time_solution.iter().enumerate() {
            components.push(Component {
                value: fp.value * tp.value,
                matrix: &fp.vector * tp.vector.transpose(),
                source: (qf, qt),
            });
        }
    }
    components.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap()
            .then_with(|| a.source.cmp(&b.source))
    });
    CanonicalBasis {
        components,
        freq_solution,
        time_solution,
    }
}

/// Full basis from estimated directional covariances.
pub fn solve_basis(cov: &DirectionalCovariances) -> Result<CanonicalBasis> {
    let freq = solve_directional(&cov.w_f, &cov.b_f)?;
    let time = solve_directional(&cov.w_t, &cov.b_t)?;
    Ok(combine_kronecker(freq, time))
}

/// Smallest prefix whose cumulative eigenvalue fraction reaches the
/// threshold, plus the per-component fractions.
pub fn select_components(basis: &CanonicalBasis, cumulative_threshold: f64) -> Result<Selection> {
    if !(cumulative_threshold > 0.0 && cumulative_threshold <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "cumulative threshold must lie in (0,1], got {cumulative_threshold}"
        )));
    }
    let total: f64 = basis.components.iter().map(|c| c.value).sum();
    if total <= 0.0 {
        return Err(Error::NoSignal);
    }
    let fractions: Vec<f64> = basis.components.iter().map(|c| c.value / total).collect();
    let mut cumulative = Vec::with_capacity(fractions.len());
    let mut acc = 0.0;
    for f in &fractions {
        acc += f;
        cumulative.push(acc);
    }
    // Small slack so a threshold of exactly 1.0 is reachable under rounding.
    let r = cumulative
        .iter()
        .position(|&c| c >= cumulative_threshold - 1e-12)
        .map(|i| i + 1)
        .unwrap_or(cumulative.len());
    Ok(Selection {
        r,
        fractions,
        cumulative,
    })
}

/// Scores every observation and the word-language mean hierarchy on the
/// first `r` components. A score is the full frequency-time inner product of
/// the component with the (unconcatenated) matrix.
pub fn project(corpus: &Corpus, basis: &CanonicalBasis, r: usize) -> Result<ScoreTable> {
    if r > basis.components.len() {
        return Err(Error::ComponentOutOfRange {
            index: r,
            len: basis.components.len(),
        });
    }
    let retained = &basis.components[..r];
    for c in retained {
        if c.matrix.nrows() != corpus.n_f() || c.matrix.ncols() != corpus.n_t() {
            return Err(Error::DimensionMismatch {
                expected_rows: corpus.n_f(),
                expected_cols: corpus.n_t(),
                rows: c.matrix.nrows(),
                cols: c.matrix.ncols(),
                context: "projection basis".into(),
            });
        }
    }

    let score = |x: &DMatrix<f64>| -> Vec<f64> { retained.iter().map(|c| c.matrix.dot(x)).collect() };

    let observations = corpus
        .observations()
        .iter()
        .map(|o| ObservationScores {
            language: o.language.clone(),
            word: o.word.clone(),
            replicate: o.replicate,
            values: score(&o.values),
        })
        .collect();

    let means = compute_means(corpus);
    let mut word_language_means = vec![vec![None; corpus.n_d()]; corpus.n_l()];
    for l in 0..corpus.n_l() {
        for d in 0..corpus.n_d() {
            if let Some(m) = &means.word_language_means[l][d] {
                word_language_means[l][d] = Some(score(m));
            }
        }
    }

    let mut word_means = vec![vec![0.0; r]; corpus.n_d()];
    for d in 0..corpus.n_d() {
        let m_dot_d = corpus.word_count(d) as f64;
        for l in 0..corpus.n_l() {
            if let Some(scores) = &word_language_means[l][d] {
                let w = corpus.count(l, d) as f64;
                for i in 0..r {
                    word_means[d][i] += w * scores[i];
                }
            }
        }
        for i in 0..r {
            word_means[d][i] /= m_dot_d;
        }
    }

    let counts = (0..corpus.n_l())
        .map(|l| (0..corpus.n_d()).map(|d| corpus.count(l, d)).collect())
        .collect();

    Ok(ScoreTable {
        r,
        languages: corpus.languages().to_vec(),
        words: corpus.words().to_vec(),
        counts,
        observations,
        word_language_means,
        word_means,
    })
}

/// Entrywise product of a component with a language mean, plus the marginal
/// frequency profile (summed over time) and time profile (summed over
/// frequency).
#[derive(Debug, Clone)]
pub struct HadamardInterpretation {
    pub matrix: DMatrix<f64>,
    pub freq_profile: Vec<f64>,
    pub time_profile: Vec<f64>,
}

pub fn hadamard_interpret(
    basis: &CanonicalBasis,
    means: &MeanSet,
    component: usize,
    language: usize,
) -> Result<HadamardInterpretation> {
    let c = basis
        .components
        .get(component)
        .ok_or(Error::ComponentOutOfRange {
            index: component,
            len: basis.components.len(),
        })?;
    let mean = means
        .language_means
        .get(language)
        .ok_or(Error::ComponentOutOfRange {
            index: language,
            len: means.language_means.len(),
        })?;
    let matrix = c.matrix.component_mul(mean);
    let freq_profile = (0..matrix.nrows())
        .map(|f| matrix.row(f).sum())
        .collect();
    let time_profile = (0..matrix.ncols())
        .map(|t| matrix.column(t).sum())
        .collect();
    Ok(HadamardInterpretation {
        matrix,
        freq_profile,
        time_profile,
    })
}

/// Residual ‖B aᵀ − λ W aᵀ‖ of a directional eigenpair; used to verify
/// solutions against the stated bound.
pub fn directional_residual(
    w: &DMatrix<f64>,
    b: &DMatrix<f64>,
    pair: &DirectionalEigenpair,
) -> f64 {
    (b * &pair.vector - w * &pair.vector * pair.value).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Gender, LabeledSpectrogram};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        &g * g.transpose() + DMatrix::identity(n, n) * 0.5
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen::<f64>() - 0.5);
        &g * g.transpose()
    }

    /// Independent route: real parts of the (complex) eigenvalues of the
    /// nonsymmetric product W⁻¹B via LU + Schur.
    fn dense_eigenvalues(w: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
        let m = w.clone().lu().solve(b).unwrap();
        let mut vals: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        vals
    }

    #[test]
    fn identity_within_reduces_to_plain_eigenproblem() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = random_psd(&mut rng, 4);
        let w = DMatrix::identity(4, 4);
        let pairs = solve_directional(&w, &b).unwrap();
        let mut expect: Vec<f64> = b.clone().symmetric_eigenvalues().iter().copied().collect();
        expect.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (p, e) in pairs.iter().zip(expect) {
            assert!((p.value - e).abs() < 1e-10 * (1.0 + e.abs()));
        }
    }

    #[test]
    fn equal_scatter_gives_unit_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_spd(&mut rng, 5);
        let pairs = solve_directional(&w, &w).unwrap();
        for p in pairs {
            assert!((p.value - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matches_dense_generalized_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let w = random_spd(&mut rng, 5);
            let b = random_psd(&mut rng, 5);
            let pairs = solve_directional(&w, &b).unwrap();
            let dense = dense_eigenvalues(&w, &b);
            let scale = dense[0].abs().max(1.0);
            for (p, e) in pairs.iter().zip(dense) {
                assert!((p.value - e).abs() < 1e-8 * scale);
            }
        }
    }

    #[test]
    fn residual_bound_and_w_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_spd(&mut rng, 6);
        let b = random_psd(&mut rng, 6);
        let pairs = solve_directional(&w, &b).unwrap();
        let b_norm = b.norm();
        for p in &pairs {
            assert!(directional_residual(&w, &b, p) < 1e-8 * b_norm * p.vector.norm());
        }
        for i in 0..pairs.len() {
            for j in 0..pairs.len() {
                if i != j {
                    let cross = (pairs[i].vector.transpose() * &w * &pairs[j].vector)[(0, 0)];
                    assert!(
                        cross.abs() < 1e-8 * pairs[i].vector.norm() * pairs[j].vector.norm()
                    );
                }
            }
        }
    }

    #[test]
    fn kronecker_product_ordering() {
        let mk = |vals: &[f64]| {
            vals.iter()
                .enumerate()
                .map(|(i, &v)| DirectionalEigenpair {
                    value: v,
                    vector: DVector::from_fn(vals.len(), |r, _| if r == i { 1.0 } else { 0.0 }),
                })
                .collect::<Vec<_>>()
        };
        let basis = combine_kronecker(mk(&[4.0, 1.0]), mk(&[3.0, 2.0]));
        let values: Vec<f64> = basis.components.iter().map(|c| c.value).collect();
        assert_eq!(values, vec![12.0, 8.0, 3.0, 2.0]);
        // λ_1 is always the product of the two directional leaders.
        assert_eq!(basis.components[0].source, (0, 0));
    }

    #[test]
    fn kronecker_matches_dense_operator() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wf = random_spd(&mut rng, 3);
        let bf = random_psd(&mut rng, 3);
        let wt = random_spd(&mut rng, 2);
        let bt = random_psd(&mut rng, 2);
        let basis = combine_kronecker(
            solve_directional(&wf, &bf).unwrap(),
            solve_directional(&wt, &bt).unwrap(),
        );
        let dense = dense_eigenvalues(&wt.kronecker(&wf), &bt.kronecker(&bf));
        let scale = dense[0].abs().max(1.0);
        for (c, e) in basis.components.iter().zip(dense) {
            assert!((c.value - e).abs() < 1e-8 * scale);
        }
    }

    #[test]
    fn selection_thresholds() {
        let mk_basis = |vals: &[f64]| CanonicalBasis {
            components: vals
                .iter()
                .enumerate()
                .map(|(i, &v)| Component {
                    value: v,
                    matrix: DMatrix::zeros(1, 1),
                    source: (i, 0),
                })
                .collect(),
            freq_solution: vec![],
            time_solution: vec![],
        };

        let single = mk_basis(&[3.0, 0.0, 0.0]);
        assert_eq!(select_components(&single, 0.1).unwrap().r, 1);
        assert_eq!(select_components(&single, 1.0).unwrap().r, 1);

        let zero = mk_basis(&[0.0, 0.0]);
        assert!(matches!(
            select_components(&zero, 0.5).unwrap_err(),
            Error::NoSignal
        ));

        // Spectrum whose leading 15 values round to the reference table and
        // whose tail pads the total to 100, so the 97.5% cut keeps 15.
        let mut spectrum = vec![
            94.824, 0.884, 0.434, 0.304, 0.274, 0.174, 0.104, 0.084, 0.084, 0.074, 0.074, 0.064,
            0.054, 0.054, 0.054,
        ];
        spectrum.extend(std::iter::repeat(0.05).take(49));
        spectrum.push(0.01);
        let total: f64 = spectrum.iter().sum();
        assert!((total - 100.0).abs() < 1e-9);
        let basis = mk_basis(&spectrum);
        let sel = select_components(&basis, 0.975).unwrap();
        assert!((sel.fractions[0] - 0.94824).abs() < 1e-9);
        assert_eq!(sel.r, 15);
    }

    fn obs(values: DMatrix<f64>, l: &str, d: &str, m: u32) -> LabeledSpectrogram {
        LabeledSpectrogram {
            values,
            language: l.to_string(),
            word: d.to_string(),
            gender: Gender::Female,
            replicate: m,
        }
    }

    #[test]
    fn projection_inner_products_and_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let c1 = DMatrix::from_fn(2, 3, |_, _| rng.gen::<f64>());
        let c1 = &c1 / c1.norm();
        // Orthogonal complement direction inside the same space.
        let mut c2 = DMatrix::from_fn(2, 3, |_, _| rng.gen::<f64>());
        let proj = c1.dot(&c2);
        c2 -= &c1 * proj;
        let c2 = &c2 / c2.norm();
        let basis = CanonicalBasis {
            components: vec![
                Component {
                    value: 2.0,
                    matrix: c1.clone(),
                    source: (0, 0),
                },
                Component {
                    value: 1.0,
                    matrix: c2.clone(),
                    source: (1, 0),
                },
            ],
            freq_solution: vec![],
            time_solution: vec![],
        };
        let corpus = Corpus::new(vec![
            obs(c1.clone(), "a", "w", 0),
            obs(DMatrix::zeros(2, 3), "b", "w", 0),
        ])
        .unwrap();
        let table = project(&corpus, &basis, 2).unwrap();
        assert!((table.observations[0].values[0] - 1.0).abs() < 1e-12);
        assert!(table.observations[0].values[1].abs() < 1e-12);
        assert!(table.observations[1].values[0].abs() < 1e-12);

        // Linearity of the score map.
        let x = DMatrix::from_fn(2, 3, |_, _| rng.gen::<f64>());
        let z = DMatrix::from_fn(2, 3, |_, _| rng.gen::<f64>());
        let combo = &x * 1.5 + &z * (-0.25);
        let s = |m: &DMatrix<f64>| c1.dot(m);
        assert!((s(&combo) - (1.5 * s(&x) - 0.25 * s(&z))).abs() < 1e-12);
    }

    #[test]
    fn weighted_word_means_match_hand_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut list = Vec::new();
        for (l, n_obs) in [("a", 3usize), ("b", 1), ("c", 2)] {
            for m in 0..n_obs {
                list.push(obs(
                    DMatrix::from_fn(2, 2, |_, _| rng.gen::<f64>()),
                    l,
                    "w1",
                    m as u32,
                ));
            }
            list.push(obs(DMatrix::from_fn(2, 2, |_, _| rng.gen::<f64>()), l, "w2", 9));
        }
        let corpus = Corpus::new(list).unwrap();
        let means = compute_means(&corpus);
        let cov = crate::sepcov::estimate_directional(&corpus, &means).unwrap();
        let basis = solve_basis(&cov).unwrap();
        let table = project(&corpus, &basis, 2).unwrap();

        for d in 0..corpus.n_d() {
            for i in 0..2 {
                let mut acc = 0.0;
                let mut weight = 0.0;
                for l in 0..corpus.n_l() {
                    if let Some(scores) = &table.word_language_means[l][d] {
                        acc += corpus.count(l, d) as f64 * scores[i];
                        weight += corpus.count(l, d) as f64;
                    }
                }
                assert!((table.word_means[d][i] - acc / weight).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hadamard_identity_mask_and_bilinearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mean = DMatrix::from_fn(3, 4, |_, _| rng.gen::<f64>());
        let means = MeanSet {
            word_language_means: vec![vec![Some(mean.clone())]],
            language_means: vec![mean.clone()],
            grand_mean: mean.clone(),
        };
        let ones = DMatrix::from_element(3, 4, 1.0);
        let basis = CanonicalBasis {
            components: vec![Component {
                value: 1.0,
                matrix: ones,
                source: (0, 0),
            }],
            freq_solution: vec![],
            time_solution: vec![],
        };
        let h = hadamard_interpret(&basis, &means, 0, 0).unwrap();
        assert_eq!(h.matrix, mean);
        // Sum of all Hadamard entries equals the score of the mean.
        let total: f64 = h.matrix.iter().sum();
        assert!((total - basis.components[0].matrix.dot(&mean)).abs() < 1e-12);
        assert_eq!(h.freq_profile.len(), 3);
        assert_eq!(h.time_profile.len(), 4);
        let row_sum: f64 = h.matrix.row(1).iter().sum();
        assert!((h.freq_profile[1] - row_sum).abs() < 1e-12);
    }

    #[test]
    fn determinism_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random_spd(&mut rng, 5);
        let b = random_psd(&mut rng, 5);
        let p1 = solve_directional(&w, &b).unwrap();
        let p2 = solve_directional(&w, &b).unwrap();
        for (a, c) in p1.iter().zip(&p2) {
            assert_eq!(a.value.to_bits(), c.value.to_bits());
            assert_eq!(a.vector, c.vector);
        }
    }
}
