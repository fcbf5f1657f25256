//! Grouped spectrogram data model: labeled observations, count bookkeeping,
//! the three-level mean hierarchy, and gender centering.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Binary speaker covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gender {
    Female,
    Male,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Female => "F",
            Gender::Male => "M",
        }
    }

    pub fn parse(s: &str) -> Option<Gender> {
        match s {
            "F" | "f" | "female" | "Female" => Some(Gender::Female),
            "M" | "m" | "male" | "Male" => Some(Gender::Male),
            _ => None,
        }
    }
}

/// One power spectrogram with its group labels. Rows are frequency bins in
/// ascending Hz order, columns standardized time units.
#[derive(Debug, Clone)]
pub struct LabeledSpectrogram {
    pub values: DMatrix<f64>,
    pub language: String,
    pub word: String,
    pub gender: Gender,
    pub replicate: u32,
}

/// Immutable indexed collection of observations sharing one matrix shape.
///
/// Languages and words are ordered by first appearance, so a corpus built
/// from the same observation sequence is always indexed identically.
#[derive(Debug, Clone)]
pub struct Corpus {
    observations: Vec<LabeledSpectrogram>,
    languages: Vec<String>,
    words: Vec<String>,
    language_lookup: HashMap<String, usize>,
    word_lookup: HashMap<String, usize>,
    /// counts[l][d] = m_ld
    counts: Vec<Vec<usize>>,
    n_f: usize,
    n_t: usize,
}

/// The mean hierarchy: per word-language means, per-language means, and the
/// grand mean, with the count-weighted aggregation between levels.
#[derive(Debug, Clone)]
pub struct MeanSet {
    /// word_language_means[l][d]; None where m_ld = 0.
    pub word_language_means: Vec<Vec<Option<DMatrix<f64>>>>,
    pub language_means: Vec<DMatrix<f64>>,
    pub grand_mean: DMatrix<f64>,
}

impl Corpus {
    /// Validates uniform dimensions and finiteness, then derives the count
    /// table and label orderings.
    pub fn new(observations: Vec<LabeledSpectrogram>) -> Result<Corpus> {
        let first = observations.first().ok_or(Error::EmptyCorpus)?;
        let (n_f, n_t) = (first.values.nrows(), first.values.ncols());

        for obs in &observations {
            if obs.values.nrows() != n_f || obs.values.ncols() != n_t {
                return Err(Error::DimensionMismatch {
                    expected_rows: n_f,
                    expected_cols: n_t,
                    rows: obs.values.nrows(),
                    cols: obs.values.ncols(),
                    context: format!(
                        "observation (language={}, word={}, replicate={})",
                        obs.language, obs.word, obs.replicate
                    ),
                });
            }
            for col in 0..n_t {
                for row in 0..n_f {
                    if !obs.values[(row, col)].is_finite() {
                        return Err(Error::NonFinite {
                            row,
                            col,
                            context: format!(
                                "observation (language={}, word={}, replicate={})",
                                obs.language, obs.word, obs.replicate
                            ),
                        });
                    }
                }
            }
        }

        let mut languages: Vec<String> = Vec::new();
        let mut words: Vec<String> = Vec::new();
        let mut language_lookup: HashMap<String, usize> = HashMap::new();
        let mut word_lookup: HashMap<String, usize> = HashMap::new();
        for obs in &observations {
            if !language_lookup.contains_key(&obs.language) {
                language_lookup.insert(obs.language.clone(), languages.len());
                languages.push(obs.language.clone());
            }
            if !word_lookup.contains_key(&obs.word) {
                word_lookup.insert(obs.word.clone(), words.len());
                words.push(obs.word.clone());
            }
        }

        let mut counts = vec![vec![0usize; words.len()]; languages.len()];
        for obs in &observations {
            counts[language_lookup[&obs.language]][word_lookup[&obs.word]] += 1;
        }

        Ok(Corpus {
            observations,
            languages,
            words,
            language_lookup,
            word_lookup,
            counts,
            n_f,
            n_t,
        })
    }

    pub fn observations(&self) -> &[LabeledSpectrogram] {
        &self.observations
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_l(&self) -> usize {
        self.languages.len()
    }

    pub fn n_d(&self) -> usize {
        self.words.len()
    }

    /// Total observation count n = m_··.
    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// m_ld: observations of word `d` in language `l`.
    pub fn count(&self, l: usize, d: usize) -> usize {
        self.counts[l][d]
    }

    /// m_l· = Σ_d m_ld.
    pub fn language_count(&self, l: usize) -> usize {
        self.counts[l].iter().sum()
    }

    /// m_·d = Σ_l m_ld.
    pub fn word_count(&self, d: usize) -> usize {
        self.counts.iter().map(|row| row[d]).sum()
    }

    pub fn language_index(&self, language: &str) -> Option<usize> {
        self.language_lookup.get(language).copied()
    }

    pub fn word_index(&self, word: &str) -> Option<usize> {
        self.word_lookup.get(word).copied()
    }

    /// Observation indices sorted by (language, word, replicate). Summations
    /// that follow this order are bit-identical under input permutation.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.observations.len()).collect();
        order.sort_by(|&a, &b| {
            let oa = &self.observations[a];
            let ob = &self.observations[b];
            (&oa.language, &oa.word, oa.replicate).cmp(&(&ob.language, &ob.word, ob.replicate))
        });
        order
    }

    /// Triple-constraint diagnostics need at least three groups.
    pub fn require_triples(&self) -> Result<()> {
        if self.n_l() < 3 {
            return Err(Error::TooFewGroups(self.n_l()));
        }
        Ok(())
    }
}

/// Computes all three mean levels with the count-weighted aggregation:
/// language means are m_ld-weighted averages of word-language means and the
/// grand mean is the m_l·-weighted average of language means.
pub fn compute_means(corpus: &Corpus) -> MeanSet {
    let (n_f, n_t) = (corpus.n_f(), corpus.n_t());
    let zero = || DMatrix::<f64>::zeros(n_f, n_t);

    let mut sums = vec![vec![zero(); corpus.n_d()]; corpus.n_l()];
    for idx in corpus.canonical_order() {
        let obs = &corpus.observations()[idx];
        let l = corpus.language_index(&obs.language).unwrap();
        let d = corpus.word_index(&obs.word).unwrap();
        sums[l][d] += &obs.values;
    }

    let mut word_language_means = vec![vec![None; corpus.n_d()]; corpus.n_l()];
    for l in 0..corpus.n_l() {
        for d in 0..corpus.n_d() {
            let m_ld = corpus.count(l, d);
            if m_ld > 0 {
                word_language_means[l][d] = Some(&sums[l][d] / m_ld as f64);
            }
        }
    }

    // Aggregate in label-sorted order so rounding does not depend on the
    // first-appearance indexing of the corpus at hand.
    let mut word_order: Vec<usize> = (0..corpus.n_d()).collect();
    word_order.sort_by(|&a, &b| corpus.words()[a].cmp(&corpus.words()[b]));
    let mut lang_order: Vec<usize> = (0..corpus.n_l()).collect();
    lang_order.sort_by(|&a, &b| corpus.languages()[a].cmp(&corpus.languages()[b]));

    let mut language_means = vec![zero(); corpus.n_l()];
    for &l in &lang_order {
        let mut acc = zero();
        for &d in &word_order {
            if let Some(mean) = &word_language_means[l][d] {
                acc += mean * corpus.count(l, d) as f64;
            }
        }
        language_means[l] = acc / corpus.language_count(l) as f64;
    }

    let mut grand = zero();
    for &l in &lang_order {
        grand += &language_means[l] * corpus.language_count(l) as f64;
    }
    grand /= corpus.n() as f64;

    MeanSet {
        word_language_means,
        language_means,
        grand_mean: grand,
    }
}

/// Centers each gender group on the grand mean: every observation has
/// (gender-group mean − grand mean) subtracted. Idempotent, and leaves the
/// grand mean unchanged.
pub fn adjust_gender(corpus: &Corpus) -> Corpus {
    let (n_f, n_t) = (corpus.n_f(), corpus.n_t());
    let mut sums: [(DMatrix<f64>, usize); 2] = [
        (DMatrix::zeros(n_f, n_t), 0),
        (DMatrix::zeros(n_f, n_t), 0),
    ];
    let mut grand = DMatrix::<f64>::zeros(n_f, n_t);
    for obs in corpus.observations() {
        let slot = &mut sums[obs.gender as usize];
        slot.0 += &obs.values;
        slot.1 += 1;
        grand += &obs.values;
    }
    grand /= corpus.n() as f64;

    let offsets: Vec<Option<DMatrix<f64>>> = sums
        .iter()
        .map(|(sum, count)| {
            if *count == 0 {
                None
            } else {
                Some(sum / *count as f64 - &grand)
            }
        })
        .collect();

    let adjusted = corpus
        .observations()
        .iter()
        .map(|obs| {
            let mut out = obs.clone();
            if let Some(offset) = &offsets[obs.gender as usize] {
                out.values -= offset;
            }
            out
        })
        .collect();

    // Labels and shapes are untouched, so revalidation cannot fail.
    Corpus::new(adjusted).expect("adjusted corpus stays valid")
}
