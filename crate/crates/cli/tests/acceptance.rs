//! Acceptance gate: one test per release criterion, each printing a single
//! pass/fail line. Tolerances are fixed; a failing criterion is a failing
//! build.

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sepcva::cva::{combine_kronecker, solve_directional, ObservationScores, ScoreTable};
use sepcva::simlab::{
    bundled_sources, default_scenario_basis, run_scenarios, run_table1, Scenario, ScenarioConfig,
    TreeSimConfig,
};
use sepcva::{
    adjust_gender, compute_means, cross_covariance, estimate_directional, sign_pattern_census,
    solve_basis, tripod_oracle,
};

fn report(criterion: usize, name: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

/// 1. Tripod constraint necessity: 10,000 valid random tripod precision
/// draws satisfy the positivity constraint at rate exactly 1.0, in < 10 s.
#[test]
fn criterion_1_tripod_necessity() {
    let start = Instant::now();
    let rate = tripod_oracle(0, 10_000);
    let elapsed = start.elapsed();
    let pass = rate == 1.0 && elapsed.as_secs_f64() < 10.0;
    report(
        1,
        "tripod constraint necessity",
        pass,
        &format!("satisfaction rate {rate}, {elapsed:.2?}"),
    );
}

/// 2. Sign-pattern census: over all 2^10 sign assignments, T ∈ {1,2,8,9}
/// never occurs; all-positive gives T = 10; single-negative gives T = 7.
/// Runtime < 1 s.
#[test]
fn criterion_2_sign_pattern_census() {
    let start = Instant::now();
    let hist = sign_pattern_census();
    let elapsed = start.elapsed();
    let impossible_empty = [1usize, 2, 8, 9].iter().all(|&t| hist[t] == 0);

    // Direct spot checks of the two named patterns.
    let count_t = |signs: &dyn Fn(usize, usize) -> f64| -> usize {
        let mut t = 0;
        for i in 0..5 {
            for j in i + 1..5 {
                for k in j + 1..5 {
                    if signs(i, j) * signs(i, k) * signs(j, k) >= 0.0 {
                        t += 1;
                    }
                }
            }
        }
        t
    };
    let all_positive = count_t(&|_, _| 1.0);
    let single_negative = count_t(&|i, j| if (i, j) == (0, 1) { -1.0 } else { 1.0 });

    let pass = impossible_empty
        && all_positive == 10
        && single_negative == 7
        && elapsed.as_secs_f64() < 1.0;
    report(
        2,
        "sign-pattern census",
        pass,
        &format!(
            "histogram {hist:?}, all-positive T={all_positive}, single-negative T={single_negative}, {elapsed:.2?}"
        ),
    );
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    &g * g.transpose() + DMatrix::identity(n, n) * 0.5
}

fn random_psd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let k = rng.gen_range(1..=n);
    let h = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    &h * h.transpose()
}

/// 3. Kronecker eigen-equivalence: on 50 random separable instances (up to
/// 6×6 ⊗ 5×5), the sorted products of the directional eigenvalues match the
/// eigenvalues of the dense Kronecker operator within 1e-8 relative, in
/// < 30 s.
#[test]
fn criterion_3_kronecker_eigen_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n_f = rng.gen_range(2..=6);
        let n_t = rng.gen_range(2..=5);
        let (w_f, b_f) = (random_spd(&mut rng, n_f), random_psd(&mut rng, n_f));
        let (w_t, b_t) = (random_spd(&mut rng, n_t), random_psd(&mut rng, n_t));

        let basis = combine_kronecker(
            solve_directional(&w_f, &b_f).unwrap(),
            solve_directional(&w_t, &b_t).unwrap(),
        );
        let separable: Vec<f64> = basis.components.iter().map(|c| c.value).collect();

        let dense = solve_directional(&w_f.kronecker(&w_t), &b_f.kronecker(&b_t)).unwrap();
        let dense: Vec<f64> = dense.iter().map(|p| p.value).collect();

        assert_eq!(separable.len(), dense.len());
        let scale = dense[0].max(f64::MIN_POSITIVE);
        for (a, b) in separable.iter().zip(&dense) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    let elapsed = start.elapsed();
    let pass = worst < 1e-8 && elapsed.as_secs_f64() < 30.0;
    report(
        3,
        "Kronecker eigen-equivalence",
        pass,
        &format!("worst relative deviation {worst:.2e} over 50 instances, {elapsed:.2?}"),
    );
}

/// 4. Reduced-scale pass-rate table: defaults (dim 4, loading bound 5,
/// noise variance 6), 200 replications. Clean c₁ rate ≥ 92% at size 500 and
/// ≥ 80% at size 50; corrupted c₁ rate in [2%, 25%] at both sizes; clean
/// c₁ ≥ c₂ ≥ c₃ within a 5-point Monte Carlo tolerance.
#[test]
fn criterion_4_pass_rate_table() {
    let config = TreeSimConfig::default();
    let sizes = [50usize, 500];
    let table = run_table1(200, &sizes, &config, 0.5).unwrap();
    let idx = |size: usize| sizes.iter().position(|&s| s == size).unwrap();

    let clean_50 = &table.rates_clean[idx(50)];
    let clean_500 = &table.rates_clean[idx(500)];
    let corrupted: Vec<f64> = table.rates_corrupted.iter().map(|r| r[0]).collect();

    let mut pass = clean_500[0] >= 92.0 && clean_50[0] >= 80.0;
    for rate in &corrupted {
        pass &= (2.0..=25.0).contains(rate);
    }
    for rates in [clean_50, clean_500] {
        pass &= rates[0] + 5.0 >= rates[1] && rates[1] + 5.0 >= rates[2];
    }
    report(
        4,
        "reduced-scale pass-rate table",
        pass,
        &format!(
            "clean@50 {:?}, clean@500 {:?}, corrupted c1 {:?}",
            clean_50, clean_500, corrupted
        ),
    );
}

fn scenario_config(
    scenario: Scenario,
    targets: &[usize],
    replications: usize,
    seed: u64,
) -> ScenarioConfig {
    let sources = bundled_sources(seed, targets);
    let slots = sources.len();
    ScenarioConfig {
        scenario,
        sources,
        replications,
        words: 12,
        replicates_per_cell: 2,
        within_noise: 0.2,
        basis: default_scenario_basis(slots),
        seed,
    }
}

/// 5. Scenario correlation trend: with bundled sources spanning
/// T ∈ {4,…,10}, the rank correlation between source T and sampled
/// amenability percentage exceeds 0.5 over 500 replications, and a 50-50
/// mix yields an overall rate strictly between the two pure-source rates.
#[test]
fn criterion_5_scenario_correlation() {
    let targets = [10usize, 10, 10, 10, 7, 7, 7, 6, 6, 6, 5, 5, 4, 4, 4];
    let spanning = run_scenarios(&scenario_config(Scenario::A, &targets, 500, 0)).unwrap();

    let pure = run_scenarios(&scenario_config(Scenario::A, &[10, 4], 500, 0)).unwrap();
    let mixed = run_scenarios(&scenario_config(Scenario::C, &[10, 4], 500, 0)).unwrap();
    let (lo, hi) = (
        pure.per_source[0].amenable_pct.min(pure.per_source[1].amenable_pct),
        pure.per_source[0].amenable_pct.max(pure.per_source[1].amenable_pct),
    );

    let pass = spanning.rank_correlation > 0.5 && mixed.overall_pct > lo && mixed.overall_pct < hi;
    report(
        5,
        "scenario correlation trend",
        pass,
        &format!(
            "rank correlation {:.3}, pure rates [{lo:.1}%, {hi:.1}%], mixed overall {:.1}%",
            spanning.rank_correlation, mixed.overall_pct
        ),
    );
}

/// 6. Cross-covariance properties: on 1,000 random score tables the matrix
/// is symmetric PSD with rank ≤ n_d; under balanced designs every row sums
/// to zero (< 1e-10 absolute).
#[test]
fn criterion_6_cross_covariance_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut pass = true;
    let mut detail = String::from("all checks held");
    for case in 0..1000 {
        let n_l = rng.gen_range(3..=6);
        let n_d = rng.gen_range(2..=8);
        let balanced = case % 2 == 0;
        let per_word: Vec<usize> = (0..n_d).map(|_| rng.gen_range(1..=5)).collect();
        let counts: Vec<Vec<usize>> = (0..n_l)
            .map(|_| {
                if balanced {
                    per_word.clone()
                } else {
                    (0..n_d).map(|_| rng.gen_range(1..=5)).collect()
                }
            })
            .collect();
        let means: Vec<Vec<f64>> = (0..n_l)
            .map(|_| (0..n_d).map(|_| rng.gen_range(-10.0..10.0)).collect())
            .collect();
        let word_means: Vec<Vec<f64>> = (0..n_d)
            .map(|d| {
                let total: f64 = (0..n_l).map(|l| counts[l][d] as f64).sum();
                vec![(0..n_l).map(|l| counts[l][d] as f64 * means[l][d]).sum::<f64>() / total]
            })
            .collect();
        let table = ScoreTable {
            r: 1,
            languages: (0..n_l).map(|l| format!("L{l}")).collect(),
            words: (0..n_d).map(|d| format!("w{d}")).collect(),
            counts,
            observations: Vec::<ObservationScores>::new(),
            word_language_means: means
                .iter()
                .map(|row| row.iter().map(|&x| Some(vec![x])).collect())
                .collect(),
            word_means,
        };
        let cov = cross_covariance(&table, 0).unwrap();
        let m = &cov.matrix;

        let sym = (m - m.transpose()).amax() <= 1e-12 * m.amax().max(1.0);
        let eigs = m.clone().symmetric_eigenvalues();
        let max_eig = eigs.max().max(f64::MIN_POSITIVE);
        let psd = eigs.min() >= -1e-10 * max_eig;
        let rank = eigs.iter().filter(|&&e| e > 1e-8 * max_eig).count();
        let low_rank = rank <= n_d;
        let zero_rows = !balanced
            || (0..n_l).all(|l| m.row(l).iter().sum::<f64>().abs() < 1e-10);
        if !(sym && psd && low_rank && zero_rows) {
            pass = false;
            detail = format!(
                "case {case}: sym {sym}, psd {psd}, rank {rank} vs n_d {n_d}, zero rows {zero_rows}"
            );
            break;
        }
    }
    report(6, "cross-covariance properties", pass, &detail);
}

fn run_cli(args: &[&str]) {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_sepcva"))
        .args(args)
        .stdout(std::process::Stdio::null())
        .status()
        .expect("binary should launch");
    assert!(status.success(), "sepcva {args:?} failed");
}

fn dir_snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// 7. Determinism: `pipeline` and both `simulate` subcommands produce
/// byte-identical output trees across two runs with the same seed/inputs.
#[test]
fn criterion_7_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus_dir = tmp.path().join("corpus");
    let corpus = sepcva::synth::random_grouped_corpus(42, 6, 5, 4, 6, 2).unwrap();
    sepcva_cli::io::save_corpus(&corpus_dir, &corpus).unwrap();
    let corpus_str = corpus_dir.to_str().unwrap().to_owned();

    let mut pass = true;
    let mut detail = String::from("pipeline, table1, and scenarios byte-identical");
    let runs: Vec<(&str, Vec<String>)> = vec![
        (
            "pipeline",
            vec!["pipeline".into(), "--corpus".into(), corpus_str.clone(), "--dump-cov".into()],
        ),
        (
            "table1",
            vec![
                "simulate".into(), "table1".into(), "--reps".into(), "3".into(),
                "--sizes".into(), "64".into(), "--seed".into(), "5".into(),
            ],
        ),
        (
            "scenarios",
            vec![
                "simulate".into(), "scenarios".into(), "--scenario".into(), "c".into(),
                "--reps".into(), "5".into(), "--seed".into(), "3".into(),
            ],
        ),
    ];
    for (name, args) in &runs {
        let out_a = tmp.path().join(format!("{name}_a"));
        let out_b = tmp.path().join(format!("{name}_b"));
        for out in [&out_a, &out_b] {
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.push("--out");
            full.push(out.to_str().unwrap());
            run_cli(&full);
        }
        if dir_snapshot(&out_a) != dir_snapshot(&out_b) {
            pass = false;
            detail = format!("{name} outputs differ between identical runs");
            break;
        }
    }
    report(7, "pipeline determinism", pass, &detail);
}

/// 8. CVA recovery: with one planted separating direction at SNR 5:1, the
/// first component aligns with it (|cosine| > 0.99) on every one of 20
/// seeds.
#[test]
fn criterion_8_cva_recovery() {
    let mut worst = 1.0f64;
    for seed in 0..20 {
        let (corpus, direction) =
            sepcva::synth::planted_direction_corpus(seed, 8, 6, 4, 200, 5.0).unwrap();
        let means = compute_means(&corpus);
        let cov = estimate_directional(&corpus, &means).unwrap();
        let basis = solve_basis(&cov).unwrap();
        let c1 = &basis.components[0].matrix;
        let cosine = c1.dot(&direction).abs() / (c1.norm() * direction.norm());
        worst = worst.min(cosine);
    }
    let pass = worst > 0.99;
    report(
        8,
        "CVA recovery of planted direction",
        pass,
        &format!("worst |cosine| {worst:.5} over 20 seeds"),
    );
}

/// 9. Gender adjustment: post-adjustment gender-group means equal the grand
/// mean entrywise to 1e-12 × data scale, and the adjustment is idempotent.
#[test]
fn criterion_9_gender_adjustment() {
    let mut pass = true;
    let mut detail = String::from("centered and idempotent on 10 random corpora");
    for seed in 0..10 {
        let corpus = sepcva::synth::random_grouped_corpus(seed, 5, 4, 3, 5, 2).unwrap();
        let once = adjust_gender(&corpus);
        let twice = adjust_gender(&once);

        let (n_f, n_t) = (once.n_f(), once.n_t());
        let mut sums = [
            (DMatrix::<f64>::zeros(n_f, n_t), 0usize),
            (DMatrix::<f64>::zeros(n_f, n_t), 0usize),
        ];
        let mut grand = DMatrix::<f64>::zeros(n_f, n_t);
        let mut scale = 1.0f64;
        for o in once.observations() {
            sums[o.gender as usize].0 += &o.values;
            sums[o.gender as usize].1 += 1;
            grand += &o.values;
            scale = scale.max(o.values.amax());
        }
        grand /= once.n() as f64;

        let centered = sums.iter().all(|(sum, count)| {
            *count == 0 || (sum / *count as f64 - &grand).amax() < 1e-12 * scale
        });
        let idempotent = twice
            .observations()
            .iter()
            .zip(once.observations())
            .all(|(a, b)| (&a.values - &b.values).amax() < 1e-12 * scale);
        if !(centered && idempotent) {
            pass = false;
            detail = format!("seed {seed}: centered {centered}, idempotent {idempotent}");
            break;
        }
    }
    report(9, "gender adjustment", pass, &detail);
}
