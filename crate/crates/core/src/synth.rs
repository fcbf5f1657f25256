//! Deterministic synthetic corpus generators used by tests, examples, and
//! the bundled demonstration data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{Corpus, Gender, LabeledSpectrogram};
use crate::error::Result;

/// Random grouped corpus with per-language mean offsets, mixed genders, and
/// mildly unbalanced cells.
pub fn random_grouped_corpus(
    seed: u64,
    n_f: usize,
    n_t: usize,
    n_l: usize,
    n_d: usize,
    base_replicates: usize,
) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let language_offsets: Vec<DMatrix<f64>> = (0..n_l)
        .map(|_| DMatrix::from_fn(n_f, n_t, |_, _| rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let word_offsets: Vec<DMatrix<f64>> = (0..n_d)
        .map(|_| {
            DMatrix::from_fn(n_f, n_t, |_, _| rng.sample::<f64, _>(StandardNormal)) * 0.5
        })
        .collect();

    let mut observations = Vec::new();
    for l in 0..n_l {
        for d in 0..n_d {
            let m_ld = base_replicates + (l + d) % 2;
            for m in 0..m_ld {
                let noise = DMatrix::from_fn(n_f, n_t, |_, _| rng.sample::<f64, _>(StandardNormal))
                    * 0.3;
                observations.push(LabeledSpectrogram {
                    values: &language_offsets[l] + &word_offsets[d] + noise,
                    language: format!("L{l}"),
                    word: format!("w{d}"),
                    gender: if (l + d + m) % 2 == 0 {
                        Gender::Female
                    } else {
                        Gender::Male
                    },
                    replicate: m as u32,
                });
            }
        }
    }
    Corpus::new(observations)
}

/// Corpus whose language means are pushed apart along one separable
/// direction u = u_f u_tᵀ with isotropic within noise. `snr` is the ratio of
/// the between-group shift scale to the within-noise standard deviation.
/// Returns the corpus together with the planted (unit-norm) direction.
pub fn planted_direction_corpus(
    seed: u64,
    n_f: usize,
    n_t: usize,
    n_l: usize,
    per_language: usize,
    snr: f64,
) -> Result<(Corpus, DMatrix<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u_f = nalgebra::DVector::from_fn(n_f, |_, _| rng.sample::<f64, _>(StandardNormal));
    u_f /= u_f.norm();
    let mut u_t = nalgebra::DVector::from_fn(n_t, |_, _| rng.sample::<f64, _>(StandardNormal));
    u_t /= u_t.norm();
    let direction = &u_f * u_t.transpose();

    let mut observations = Vec::new();
    for l in 0..n_l {
        // Centered group shifts so the between spread sits around zero.
        let shift = snr * (l as f64 - (n_l as f64 - 1.0) / 2.0);
        for m in 0..per_language {
            let noise = DMatrix::from_fn(n_f, n_t, |_, _| rng.sample::<f64, _>(StandardNormal));
            observations.push(LabeledSpectrogram {
                values: &direction * shift + noise,
                language: format!("L{l}"),
                word: format!("w{m}"),
                gender: Gender::Female,
                replicate: 0,
            });
        }
    }
    Ok((Corpus::new(observations)?, direction))
}
