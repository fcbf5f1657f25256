//! Five-leaf structural-equation tree simulation and the positivity
//! pass-rate table built on top of it.
//!
//! Topology: hidden root H1 with children H2, H3 and leaf X1; H2 has leaves
//! X2, X4; H3 has leaves X3, X5. Each edge scales its parent value by a
//! fixed random scalar loading and adds isotropic Gaussian noise (of the
//! configured variance), so every linear projection of the leaves follows a
//! univariate Gaussian tree while the root covariance couples the
//! coordinates.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, Gender, LabeledSpectrogram};
use crate::cva::{project, solve_basis};
use crate::error::{Error, Result};
use crate::sepcov::estimate_directional;
use crate::treecheck::{cross_covariance, positivity_check};
use crate::corpus::compute_means;

/// Per-entry sign corruption applied at every node transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Corruption {
    Off,
    /// Flip the sign of each entry independently with this probability.
    SignFlip(f64),
}

#[derive(Debug, Clone)]
pub struct TreeSimConfig {
    /// Dimension per node.
    pub dim: usize,
    /// Loading entries are drawn from U(−loading_bound, loading_bound).
    pub loading_bound: f64,
    /// Edge noise is N(0, noise_scale · I); the parameter is the noise
    /// variance.
    pub noise_scale: f64,
    /// Average observations per leaf; actual counts are deliberately
    /// unequal across leaves.
    pub sample_size: usize,
    /// Number of words. Each word is one joint draw of the tree; its
    /// replicate observations share the hidden values and differ only in
    /// leaf-edge noise. Sample size is spent on replicates per cell, so the
    /// number of words stays fixed as the sample grows, mirroring a corpus
    /// with a fixed vocabulary.
    pub words: usize,
    pub corruption: Corruption,
    pub seed: u64,
}

impl Default for TreeSimConfig {
    fn default() -> Self {
        TreeSimConfig {
            dim: 4,
            loading_bound: 5.0,
            noise_scale: 6.0,
            sample_size: 500,
            words: 16,
            corruption: Corruption::Off,
            seed: 0,
        }
    }
}

impl TreeSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::InvalidConfig("dim must be >= 1".into()));
        }
        if self.loading_bound <= 0.0 {
            return Err(Error::InvalidConfig("loading bound must be > 0".into()));
        }
        if self.noise_scale < 0.0 {
            return Err(Error::InvalidConfig("noise scale must be >= 0".into()));
        }
        if self.sample_size < 2 {
            return Err(Error::InvalidConfig("sample size must be >= 2".into()));
        }
        if self.words < 3 {
            return Err(Error::InvalidConfig("word count must be >= 3".into()));
        }
        if self.sample_size < self.words {
            return Err(Error::InvalidConfig(
                "sample size must cover at least one observation per word".into(),
            ));
        }
        if let Corruption::SignFlip(p) = self.corruption {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "flip probability must lie in [0,1], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Edges in generation order: H1→H2, H1→H3, H1→X1, H2→X2, H2→X4, H3→X3,
/// H3→X5.
pub const EDGE_COUNT: usize = 7;

/// Per-edge scalar loadings (each edge scales its parent by λ·I), fixed
/// within a replication. Scalar edges keep every linear projection of the
/// leaves an exact univariate Gaussian tree, which is what the positivity
/// diagnostic certifies.
#[derive(Debug, Clone)]
pub struct EdgeLoadings {
    pub scalars: Vec<f64>,
}

impl EdgeLoadings {
    pub fn identity() -> EdgeLoadings {
        EdgeLoadings {
            scalars: vec![1.0; EDGE_COUNT],
        }
    }

    pub fn random(rng: &mut ChaCha8Rng, bound: f64) -> EdgeLoadings {
        EdgeLoadings {
            scalars: (0..EDGE_COUNT)
                .map(|_| rng.gen_range(-bound..bound))
                .collect(),
        }
    }
}

/// Root covariance V = A + Aᵀ + dim·I with A entries U(0,1): diagonally
/// dominant, hence symmetric positive definite for every draw.
pub fn sample_root_covariance(rng: &mut ChaCha8Rng, dim: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |_, _| rng.gen::<f64>());
    &a + a.transpose() + DMatrix::identity(dim, dim) * dim as f64
}

fn standard_normal_vector(rng: &mut ChaCha8Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

fn corrupt(v: &mut DVector<f64>, corruption: Corruption, rng: &mut ChaCha8Rng) {
    if let Corruption::SignFlip(p) = corruption {
        for x in v.iter_mut() {
            if rng.gen::<f64>() < p {
                *x = -*x;
            }
        }
    }
}

/// Unequal replicate counts per word-language cell: leaf k (1-based)
/// receives round((sample_size / words) · (1 + 0.1·(k − 3))) observations
/// of every word, so the design is unbalanced across groups.
pub fn cell_replicates(sample_size: usize, words: usize) -> [usize; 5] {
    let base = sample_size as f64 / words as f64;
    core::array::from_fn(|k| {
        let factor = 1.0 + 0.1 * (k as f64 + 1.0 - 3.0);
        ((base * factor).round() as usize).max(1)
    })
}

/// Simulates the five-leaf tree with freshly drawn loadings.
pub fn simulate_tree(config: &TreeSimConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let edges = EdgeLoadings::random(&mut rng, config.loading_bound);
    simulate_tree_with(config, &edges, &mut rng)
}

/// Simulates the tree with the given edge loadings.
///
/// Each word fixes one root draw; within a word, replicate slot r is one
/// joint pass through the tree: hidden values H2, H3 are drawn once per
/// slot and shared by the sibling leaves, and every leaf applies its edge
/// with fresh noise. Replicate counts are unequal across leaves, so cells
/// are unevenly populated and slots past a leaf's count are simply unused
/// by that leaf.
pub fn simulate_tree_with(
    config: &TreeSimConfig,
    edges: &EdgeLoadings,
    rng: &mut ChaCha8Rng,
) -> Result<Corpus> {
    config.validate()?;
    let dim = config.dim;
    let v = sample_root_covariance(rng, dim);
    let root_chol = Cholesky::new(v).expect("root covariance is PD by construction");

    let cell_counts = cell_replicates(config.sample_size, config.words);
    let max_count = *cell_counts.iter().max().unwrap();
    let n_words = config.words;
    let width = n_words.to_string().len();
    // Leaf k hangs off parent H1 (X1), H2 (X2, X4), or H3 (X3, X5); edge
    // indices follow the generation order documented on `EDGE_COUNT`.
    const LEAF_PARENT: [usize; 5] = [0, 1, 2, 1, 2];
    const LEAF_EDGE: [usize; 5] = [2, 3, 5, 4, 6];

    let mut observations = Vec::new();
    for word in 0..n_words {
        let h1 = root_chol.l() * standard_normal_vector(rng, dim);
        for slot in 0..max_count {
            let mut child = |parent: &DVector<f64>, edge: usize| -> DVector<f64> {
                let mut value = parent * edges.scalars[edge]
                    + standard_normal_vector(rng, dim) * config.noise_scale.sqrt();
                corrupt(&mut value, config.corruption, rng);
                value
            };
            let h2 = child(&h1, 0);
            let h3 = child(&h1, 1);
            let parents = [&h1, &h2, &h3];
            for k in 0..5 {
                if slot >= cell_counts[k] {
                    continue;
                }
                let mut value = parents[LEAF_PARENT[k]] * edges.scalars[LEAF_EDGE[k]]
                    + standard_normal_vector(rng, dim) * config.noise_scale.sqrt();
                corrupt(&mut value, config.corruption, rng);
                observations.push(LabeledSpectrogram {
                    values: DMatrix::from_column_slice(dim, 1, value.as_slice()),
                    language: format!("X{}", k + 1),
                    word: format!("w{word:0width$}"),
                    gender: Gender::Female,
                    replicate: slot as u32,
                });
            }
        }
    }
    Corpus::new(observations)
}

/// Runs the full pipeline on a simulated corpus and reports, per component,
/// whether all positivity constraints hold.
pub fn pipeline_amenability(corpus: &Corpus) -> Result<Vec<bool>> {
    let means = compute_means(corpus);
    let cov = estimate_directional(corpus, &means)?;
    let basis = solve_basis(&cov)?;
    amenability_with_basis(corpus, &basis)
}

/// Positivity verdict per component for a corpus projected with an
/// externally supplied basis.
fn amenability_with_basis(corpus: &Corpus, basis: &crate::cva::CanonicalBasis) -> Result<Vec<bool>> {
    let r = corpus.n_f().min(basis.components.len());
    let table = project(corpus, basis, r)?;
    let mut out = Vec::with_capacity(r);
    for i in 0..r {
        let cross = cross_covariance(&table, i)?;
        out.push(positivity_check(&cross)?.amenable);
    }
    Ok(out)
}

/// Positivity pass rates (percent) per component for the clean and
/// corrupted data sets across sample sizes.
#[derive(Debug, Clone)]
pub struct Table1Report {
    pub sizes: Vec<usize>,
    pub components: usize,
    /// rates_clean[size_idx][component]
    pub rates_clean: Vec<Vec<f64>>,
    pub rates_corrupted: Vec<Vec<f64>>,
}

/// For each sample size and replication, simulates a clean data set and a
/// sign-corrupted counterpart sharing the same root covariance and edge
/// loadings, runs both through the pipeline, and tabulates the percentage
/// of replications in which each component satisfies all constraints.
pub fn run_table1(
    replications: usize,
    sizes: &[usize],
    config: &TreeSimConfig,
    flip_prob: f64,
) -> Result<Table1Report> {
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be >= 1".into()));
    }
    if sizes.is_empty() {
        return Err(Error::InvalidConfig("at least one sample size required".into()));
    }
    config.validate()?;
    let components = config.dim;

    let mut rates_clean = Vec::with_capacity(sizes.len());
    let mut rates_corrupted = Vec::with_capacity(sizes.len());
    for (size_idx, &size) in sizes.iter().enumerate() {
        let mut pass_clean = vec![0usize; components];
        let mut pass_corrupted = vec![0usize; components];
        for rep in 0..replications {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream((size_idx * replications + rep) as u64 + 1);
            let edges = EdgeLoadings::random(&mut rng, config.loading_bound);

            let clean_cfg = TreeSimConfig {
                sample_size: size,
                corruption: Corruption::Off,
                ..config.clone()
            };
            // Both data sets undergo the same basis change: the canonical
            // basis is solved on the clean data and reused to project the
            // corrupted counterpart.
            let clean = simulate_tree_with(&clean_cfg, &edges, &mut rng)?;
            let means = compute_means(&clean);
            let cov = estimate_directional(&clean, &means)?;
            let basis = solve_basis(&cov)?;
            for (i, ok) in amenability_with_basis(&clean, &basis)?.iter().enumerate() {
                if *ok {
                    pass_clean[i] += 1;
                }
            }

            let corrupted_cfg = TreeSimConfig {
                sample_size: size,
                corruption: Corruption::SignFlip(flip_prob),
                ..config.clone()
            };
            let corrupted = simulate_tree_with(&corrupted_cfg, &edges, &mut rng)?;
            for (i, ok) in amenability_with_basis(&corrupted, &basis)?.iter().enumerate() {
                if *ok {
                    pass_corrupted[i] += 1;
                }
            }
        }
        let pct = |v: &[usize]| -> Vec<f64> {
            v.iter()
                .map(|&c| 100.0 * c as f64 / replications as f64)
                .collect()
        };
        rates_clean.push(pct(&pass_clean));
        rates_corrupted.push(pct(&pass_corrupted));
    }

    Ok(Table1Report {
        sizes: sizes.to_vec(),
        components,
        rates_clean,
        rates_corrupted,
    })
}
