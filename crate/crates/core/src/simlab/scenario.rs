//! Scenario resampling study: draw grouped word-mean scores from
//! cross-covariance sources with known constraint counts, map them back
//! through an invertible basis to pseudo-observations, then re-assess the
//! constraint the same way as on real data — cell means, projection with
//! the same basis, cross-covariance, positivity — and record how often each
//! source's component comes out tree-amenable.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, Gender, LabeledSpectrogram};
use crate::cva::{project, CanonicalBasis, Component};
use crate::error::{Error, Result};
use crate::numeric::spearman;
use crate::treecheck::{cross_covariance, positivity_check, triple_count, CrossCovariance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Component slot i always uses source i (sources tree-amenable).
    A,
    /// Same mapping, sources not tree-amenable.
    B,
    /// Each slot picks a source uniformly at random, independently per
    /// component and replication.
    C,
}

/// One cross-covariance source with its known constraint count and the
/// between-group scale applied to its slot.
#[derive(Debug, Clone)]
pub struct ScenarioSource {
    pub label: String,
    /// n_l × n_l symmetric PSD source matrix.
    pub matrix: DMatrix<f64>,
    /// T(Σ): number of satisfied triple constraints.
    pub t_count: usize,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub sources: Vec<ScenarioSource>,
    pub replications: usize,
    /// Number of pseudo-words per replication.
    pub words: usize,
    /// Base observations per (language, word) cell; actual counts alternate
    /// between base and base+1 so the design is unbalanced.
    pub replicates_per_cell: usize,
    /// Isotropic within-group noise added to every pseudo-observation.
    pub within_noise: f64,
    /// Square basis whose rows are the components; scores are pushed back
    /// through its inverse to form pseudo-observations.
    pub basis: DMatrix<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SourceOutcome {
    pub label: String,
    pub t_count: usize,
    /// Times this source was assigned to a slot across replications.
    pub uses: usize,
    /// Percentage of those uses whose rerun component was amenable.
    pub amenable_pct: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub per_source: Vec<SourceOutcome>,
    /// Spearman rank correlation between source T and amenability rate.
    pub rank_correlation: f64,
    /// Amenability percentage across all slots and replications.
    pub overall_pct: f64,
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::InvalidConfig("at least one source required".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.words < 2 {
            return Err(Error::InvalidConfig("need at least 2 pseudo-words".into()));
        }
        if self.replicates_per_cell < 1 {
            return Err(Error::InvalidConfig("need at least 1 replicate per cell".into()));
        }
        let slots = self.sources.len();
        if self.basis.nrows() != slots || self.basis.ncols() != slots {
            return Err(Error::InvalidConfig(format!(
                "basis must be {slots}x{slots} to be invertible over the component slots"
            )));
        }
        let n_l = self.sources[0].matrix.nrows();
        for s in &self.sources {
            if s.matrix.nrows() != n_l || s.matrix.ncols() != n_l {
                return Err(Error::InvalidConfig(
                    "all source matrices must share one group dimension".into(),
                ));
            }
        }
        if n_l < 3 {
            return Err(Error::TooFewGroups(n_l));
        }
        Ok(())
    }
}

pub fn run_scenarios(config: &ScenarioConfig) -> Result<ScenarioReport> {
    config.validate()?;
    let slots = config.sources.len();
    let n_l = config.sources[0].matrix.nrows();

    let basis_inverse = config
        .basis
        .clone()
        .try_inverse()
        .ok_or(Error::SingularBasis)?;
    // Fixed projection whose component j scores exactly the j-th basis row.
    let projection = CanonicalBasis {
        components: (0..slots)
            .map(|j| Component {
                value: (slots - j) as f64,
                matrix: DMatrix::from_fn(slots, 1, |i, _| config.basis[(j, i)]),
                source: (j, 0),
            })
            .collect(),
        freq_solution: Vec::new(),
        time_solution: Vec::new(),
    };
    let source_chols: Vec<_> = config
        .sources
        .iter()
        .map(|s| {
            // Tiny jitter keeps rank-deficient PSD sources sampleable.
            let jitter = DMatrix::identity(n_l, n_l) * 1e-12 * s.matrix.trace().max(1.0);
            Cholesky::new(&s.matrix + jitter)
                .ok_or_else(|| Error::InvalidConfig(format!("source {} is not PSD", s.label)))
        })
        .collect::<Result<_>>()?;

    let width = config.words.to_string().len();
    let mut uses = vec![0usize; slots];
    let mut amenable = vec![0usize; slots];

    for rep in 0..config.replications {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(rep as u64 + 1);

        // Which source feeds each component slot this replication.
        let assignment: Vec<usize> = (0..slots)
            .map(|slot| match config.scenario {
                Scenario::A | Scenario::B => slot,
                Scenario::C => rng.gen_range(0..slots),
            })
            .collect();

        // Word-mean score of each slot, per word, jointly over languages.
        let mut slot_scores = vec![vec![DVector::<f64>::zeros(n_l); config.words]; slots];
        for (slot, scores) in slot_scores.iter_mut().enumerate() {
            let src = assignment[slot];
            let scale = config.sources[src].scale;
            for word_scores in scores.iter_mut() {
                let z = DVector::from_fn(n_l, |_, _| rng.sample(StandardNormal));
                *word_scores = source_chols[src].l() * z * scale;
            }
        }

        // Pseudo-observations: invert the basis projection per cell, then
        // add within noise per replicate.
        let mut observations = Vec::new();
        for l in 0..n_l {
            for d in 0..config.words {
                let y = DVector::from_fn(slots, |i, _| slot_scores[i][d][l]);
                let cell_mean = &basis_inverse * y;
                let m_ld = config.replicates_per_cell + (l + d) % 2;
                for m in 0..m_ld {
                    let noise =
                        DVector::from_fn(slots, |_, _| rng.sample::<f64, _>(StandardNormal))
                            * config.within_noise;
                    let x = &cell_mean + noise;
                    observations.push(LabeledSpectrogram {
                        values: DMatrix::from_column_slice(slots, 1, x.as_slice()),
                        language: format!("L{l}"),
                        word: format!("w{d:0width$}"),
                        gender: Gender::Female,
                        replicate: m as u32,
                    });
                }
            }
        }

        let corpus = Corpus::new(observations)?;
        // The new sample undergoes the same basis change as the source data:
        // scores come from the known basis rows, not a re-estimated one.
        let table = project(&corpus, &projection, slots)?;
        for slot in 0..slots {
            let cross: CrossCovariance = cross_covariance(&table, slot)?;
            let diag = positivity_check(&cross)?;
            let src = assignment[slot];
            uses[src] += 1;
            if diag.amenable {
                amenable[src] += 1;
            }
        }
    }

    let per_source: Vec<SourceOutcome> = config
        .sources
        .iter()
        .enumerate()
        .map(|(i, s)| SourceOutcome {
            label: s.label.clone(),
            t_count: s.t_count,
            uses: uses[i],
            amenable_pct: if uses[i] == 0 {
                0.0
            } else {
                100.0 * amenable[i] as f64 / uses[i] as f64
            },
        })
        .collect();

    let used: Vec<&SourceOutcome> = per_source.iter().filter(|s| s.uses > 0).collect();
    let ts: Vec<f64> = used.iter().map(|s| s.t_count as f64).collect();
    let rates: Vec<f64> = used.iter().map(|s| s.amenable_pct).collect();
    let rank_correlation = if used.len() >= 2 {
        spearman(&ts, &rates)
    } else {
        f64::NAN
    };
    let total_uses: usize = uses.iter().sum();
    let total_amenable: usize = amenable.iter().sum();

    Ok(ScenarioReport {
        per_source,
        rank_correlation,
        overall_pct: 100.0 * total_amenable as f64 / total_uses as f64,
    })
}

/// Acceptance band for the smallest off-diagonal magnitude of a bundled
/// source after trace normalization. The cross-covariance estimator centers
/// scores across groups, so sources must already have zero row sums or the
/// centering would rewrite their sign pattern; a moderately fragile smallest
/// entry makes sampled constraint counts degrade gradually, so amenability
/// rates grade with the source's constraint count instead of saturating.
const MIN_OFF: f64 = 0.06;
const MAX_OFF: f64 = 0.12;

/// Deterministically searches for 5×5 centered Gram-matrix sources whose
/// constraint counts hit the given targets. Sources are Gram matrices of
/// group-centered factor scores (rank 1 for the fully amenable count of 10,
/// rank 2–3 otherwise), trace-normalized so all sources carry comparable
/// strength.
pub fn bundled_sources(seed: u64, targets: &[usize]) -> Vec<ScenarioSource> {
    let n_l = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(targets.len());
    for (slot, &target) in targets.iter().enumerate() {
        assert!(target <= triple_count(n_l));
        loop {
            let k = if target == triple_count(n_l) {
                1
            } else {
                rng.gen_range(2..4)
            };
            // Gram matrix of k centered factor columns: symmetric PSD with
            // zero row sums, like a genuine between-group cross-covariance.
            let mut factors =
                DMatrix::from_fn(n_l, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            for j in 0..k {
                let mean = factors.column(j).mean();
                for i in 0..n_l {
                    factors[(i, j)] -= mean;
                }
            }
            let mut gram = &factors * factors.transpose();
            let trace = gram.trace();
            if trace <= 0.0 {
                continue;
            }
            gram *= n_l as f64 / trace;
            let min_off = (0..n_l)
                .flat_map(|i| (i + 1..n_l).map(move |j| (i, j)))
                .map(|(i, j)| gram[(i, j)].abs())
                .fold(f64::INFINITY, f64::min);
            if !(MIN_OFF..=MAX_OFF).contains(&min_off) {
                continue;
            }
            let diag = positivity_check(&CrossCovariance {
                component: 0,
                languages: (0..n_l).map(|l| format!("L{l}")).collect(),
                matrix: gram.clone(),
            })
            .unwrap();
            if diag.t_count == target {
                out.push(ScenarioSource {
                    label: format!("T{target}-{slot}"),
                    matrix: gram,
                    t_count: target,
                    scale: 1.0,
                });
                break;
            }
        }
    }
    out
}

/// A deterministic, well-conditioned square basis for pushing scores back
/// into observation space: identity plus a small fixed off-diagonal tilt.
pub fn default_scenario_basis(slots: usize) -> DMatrix<f64> {
    DMatrix::from_fn(slots, slots, |i, j| {
        if i == j {
            1.0
        } else {
            0.15 / (1.0 + (i as f64 - j as f64).abs())
        }
    })
}
