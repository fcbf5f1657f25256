//! Subcommand implementations: the analysis pipeline stages and their
//! artifact exports, plus the two simulation studies.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use sepcva::simlab::{
    bundled_sources, default_scenario_basis, run_scenarios, run_table1, Scenario, ScenarioConfig,
    ScenarioReport, TreeSimConfig,
};
use sepcva::{
    adjust_gender, compute_means, cross_covariance, estimate_directional_with, hadamard_interpret,
    positivity_check, project, select_components, solve_basis, CanonicalBasis, Corpus,
    DirectionalCovariances, MeanSet, ScoreTable, Selection, TreeDiagnostic,
};

use crate::io::{self, fmt, sanitize_label, RunManifest};

/// Flags shared by every analysis subcommand.
#[derive(Debug, Clone, clap::Args)]
pub struct AnalysisFlags {
    /// Cumulative eigenvalue fraction that fixes the number of retained
    /// components.
    #[arg(long, default_value_t = 0.975)]
    pub threshold: f64,
    /// Relative floor for the smallest within-covariance eigenvalue.
    #[arg(long, default_value_t = sepcva::sepcov::RIDGE_EPS_DEFAULT)]
    pub ridge_eps: f64,
    /// Override the number of retained components instead of thresholding.
    #[arg(long)]
    pub components: Option<usize>,
}

impl AnalysisFlags {
    fn record(&self, manifest: &mut RunManifest) {
        manifest.param("threshold", fmt(self.threshold));
        manifest.param("ridge_eps", fmt(self.ridge_eps));
        manifest.param(
            "components",
            self.components.map_or("auto".to_string(), |c| c.to_string()),
        );
    }
}

/// Everything the analysis subcommands derive from a corpus directory.
pub struct Analysis {
    pub corpus: Corpus,
    pub means: MeanSet,
    pub cov: DirectionalCovariances,
    pub basis: CanonicalBasis,
    pub selection: Selection,
    /// Retained component count (threshold result or explicit override).
    pub r: usize,
    pub table: ScoreTable,
}

pub fn analyze(corpus_dir: &Path, flags: &AnalysisFlags) -> Result<Analysis> {
    let raw = io::load_corpus(corpus_dir)?;
    let corpus = adjust_gender(&raw);
    let means = compute_means(&corpus);
    let cov = estimate_directional_with(&corpus, &means, flags.ridge_eps)?;
    let basis = solve_basis(&cov)?;
    let selection = select_components(&basis, flags.threshold)?;
    let r = match flags.components {
        Some(c) => {
            if c == 0 || c > basis.components.len() {
                bail!(
                    "--components must lie in 1..={}, got {c}",
                    basis.components.len()
                );
            }
            c
        }
        None => selection.r,
    };
    let table = project(&corpus, &basis, r)?;
    Ok(Analysis {
        corpus,
        means,
        cov,
        basis,
        selection,
        r,
        table,
    })
}

fn export_means(out: &Path, analysis: &Analysis, manifest: &mut RunManifest) -> Result<()> {
    let rel = "means/grand_mean.csv";
    io::write_matrix_csv(&out.join(rel), &analysis.means.grand_mean)?;
    manifest.output(rel);
    for (l, label) in analysis.corpus.languages().iter().enumerate() {
        let rel = format!("means/language_{}.csv", sanitize_label(label));
        io::write_matrix_csv(&out.join(&rel), &analysis.means.language_means[l])?;
        manifest.output(&rel);
    }
    Ok(())
}

fn export_covariances(out: &Path, cov: &DirectionalCovariances, manifest: &mut RunManifest) -> Result<()> {
    for (name, m) in [
        ("B_f", &cov.b_f),
        ("W_f", &cov.w_f),
        ("B_t", &cov.b_t),
        ("W_t", &cov.w_t),
    ] {
        let rel = format!("covariances/{name}.csv");
        io::write_matrix_csv(&out.join(&rel), m)?;
        manifest.output(&rel);
    }
    Ok(())
}

fn export_basis(out: &Path, analysis: &Analysis, manifest: &mut RunManifest) -> Result<()> {
    let mut csv = String::from("component,lambda,fraction,cumulative,q_f,q_t\n");
    for (i, c) in analysis.basis.components.iter().enumerate() {
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            i + 1,
            fmt(c.value),
            fmt(analysis.selection.fractions[i]),
            fmt(analysis.selection.cumulative[i]),
            c.source.0,
            c.source.1
        )?;
    }
    let rel = "basis/eigenvalues.csv";
    io::write_atomic(&out.join(rel), csv.as_bytes())?;
    manifest.output(rel);

    let width = analysis.basis.components.len().to_string().len().max(4);
    for (i, c) in analysis.basis.components.iter().take(analysis.r).enumerate() {
        let rel = format!("basis/component_{:0width$}.csv", i + 1);
        io::write_matrix_csv(&out.join(&rel), &c.matrix)?;
        manifest.output(&rel);
    }
    Ok(())
}

fn export_scores(out: &Path, table: &ScoreTable, manifest: &mut RunManifest) -> Result<()> {
    let mut csv = String::from("observation,language,word");
    for i in 0..table.r {
        write!(csv, ",c{}", i + 1)?;
    }
    csv.push('\n');
    for (idx, obs) in table.observations.iter().enumerate() {
        write!(csv, "{idx},{},{}", obs.language, obs.word)?;
        for v in &obs.values {
            write!(csv, ",{}", fmt(*v))?;
        }
        csv.push('\n');
    }
    let rel = "scores.csv";
    io::write_atomic(&out.join(rel), csv.as_bytes())?;
    manifest.output(rel);
    Ok(())
}

/// Serialized treecheck report. Decimals are emitted as 17-significant-digit
/// strings so the JSON obeys the same numeric format as the CSV artifacts.
#[derive(Serialize)]
struct TripleReport {
    i: usize,
    j: usize,
    k: usize,
    product: String,
    satisfied: bool,
    near_degenerate: bool,
}

#[derive(Serialize)]
struct ComponentReport {
    component: usize,
    fraction: String,
    languages: Vec<String>,
    cross_covariance: Vec<Vec<String>>,
    triples: Vec<TripleReport>,
    t_count: usize,
    amenable: bool,
}

/// Per-component diagnostics for the retained components.
pub fn diagnose(analysis: &Analysis) -> Result<Vec<TreeDiagnostic>> {
    (0..analysis.r)
        .map(|i| {
            let cross = cross_covariance(&analysis.table, i)?;
            Ok(positivity_check(&cross)?)
        })
        .collect()
}

fn export_treecheck(
    out: &Path,
    analysis: &Analysis,
    diagnostics: &[TreeDiagnostic],
    manifest: &mut RunManifest,
) -> Result<()> {
    let mut reports = Vec::with_capacity(diagnostics.len());
    let mut summary = String::from("component,fraction,t_count,amenable\n");
    for (i, diag) in diagnostics.iter().enumerate() {
        let cross = cross_covariance(&analysis.table, i)?;
        reports.push(ComponentReport {
            component: i + 1,
            fraction: fmt(analysis.selection.fractions[i]),
            languages: cross.languages.clone(),
            cross_covariance: (0..cross.matrix.nrows())
                .map(|r| (0..cross.matrix.ncols()).map(|c| fmt(cross.matrix[(r, c)])).collect())
                .collect(),
            triples: diag
                .triples
                .iter()
                .map(|t| TripleReport {
                    i: t.triple.0,
                    j: t.triple.1,
                    k: t.triple.2,
                    product: fmt(t.product),
                    satisfied: t.satisfied,
                    near_degenerate: t.near_degenerate,
                })
                .collect(),
            t_count: diag.t_count,
            amenable: diag.amenable,
        });
        writeln!(
            summary,
            "{},{},{},{}",
            i + 1,
            fmt(analysis.selection.fractions[i]),
            diag.t_count,
            diag.amenable
        )?;
    }
    let mut json = serde_json::to_string_pretty(&reports)?;
    json.push('\n');
    io::write_atomic(&out.join("treecheck/report.json"), json.as_bytes())?;
    io::write_atomic(&out.join("treecheck/summary.csv"), summary.as_bytes())?;
    manifest.output("treecheck/report.json");
    manifest.output("treecheck/summary.csv");
    Ok(())
}

fn export_hadamard(
    out: &Path,
    analysis: &Analysis,
    component: usize,
    language: usize,
    manifest: &mut RunManifest,
) -> Result<()> {
    let h = hadamard_interpret(&analysis.basis, &analysis.means, component, language)?;
    let label = sanitize_label(&analysis.corpus.languages()[language]);
    let rel = format!("interpret/hadamard_c{}_{}.csv", component + 1, label);
    io::write_matrix_csv(&out.join(&rel), &h.matrix)?;
    manifest.output(&rel);

    let mut profiles = String::from("axis,index,value\n");
    for (i, v) in h.freq_profile.iter().enumerate() {
        writeln!(profiles, "freq,{i},{}", fmt(*v))?;
    }
    for (i, v) in h.time_profile.iter().enumerate() {
        writeln!(profiles, "time,{i},{}", fmt(*v))?;
    }
    let rel = format!("interpret/profiles_c{}_{}.csv", component + 1, label);
    io::write_atomic(&out.join(&rel), profiles.as_bytes())?;
    manifest.output(&rel);
    Ok(())
}

fn print_summary(analysis: &Analysis, diagnostics: &[TreeDiagnostic]) {
    println!(
        "retained r = {} of {} components",
        analysis.r,
        analysis.basis.components.len()
    );
    for (i, diag) in diagnostics.iter().enumerate() {
        println!(
            "component {}: fraction {:.4}, T = {}, amenable = {}",
            i + 1,
            analysis.selection.fractions[i],
            diag.t_count,
            diag.amenable
        );
    }
}

pub fn cmd_pipeline(
    corpus_dir: &Path,
    out: &Path,
    flags: &AnalysisFlags,
    dump_cov: bool,
) -> Result<()> {
    let analysis = analyze(corpus_dir, flags)?;
    let mut manifest = RunManifest::new("pipeline");
    flags.record(&mut manifest);
    manifest.param("dump_cov", dump_cov);
    manifest.input_dir(corpus_dir)?;

    export_means(out, &analysis, &mut manifest)?;
    if dump_cov {
        export_covariances(out, &analysis.cov, &mut manifest)?;
    }
    export_basis(out, &analysis, &mut manifest)?;
    export_scores(out, &analysis.table, &mut manifest)?;
    let diagnostics = diagnose(&analysis)?;
    export_treecheck(out, &analysis, &diagnostics, &mut manifest)?;
    for i in 0..analysis.r {
        for l in 0..analysis.corpus.n_l() {
            export_hadamard(out, &analysis, i, l, &mut manifest)?;
        }
    }
    manifest.write(out)?;
    print_summary(&analysis, &diagnostics);
    Ok(())
}

pub fn cmd_project(corpus_dir: &Path, out: &Path, flags: &AnalysisFlags) -> Result<()> {
    let analysis = analyze(corpus_dir, flags)?;
    let mut manifest = RunManifest::new("project");
    flags.record(&mut manifest);
    manifest.input_dir(corpus_dir)?;
    export_basis(out, &analysis, &mut manifest)?;
    export_scores(out, &analysis.table, &mut manifest)?;
    manifest.write(out)?;
    println!(
        "retained r = {} of {} components",
        analysis.r,
        analysis.basis.components.len()
    );
    Ok(())
}

pub fn cmd_treecheck(corpus_dir: &Path, out: &Path, flags: &AnalysisFlags) -> Result<()> {
    let analysis = analyze(corpus_dir, flags)?;
    let mut manifest = RunManifest::new("treecheck");
    flags.record(&mut manifest);
    manifest.input_dir(corpus_dir)?;
    let diagnostics = diagnose(&analysis)?;
    export_treecheck(out, &analysis, &diagnostics, &mut manifest)?;
    manifest.write(out)?;
    print_summary(&analysis, &diagnostics);
    Ok(())
}

pub fn cmd_interpret(
    corpus_dir: &Path,
    out: &Path,
    flags: &AnalysisFlags,
    component: usize,
    language: Option<&str>,
) -> Result<()> {
    if component == 0 {
        bail!("--component is 1-based; got 0");
    }
    let analysis = analyze(corpus_dir, flags)?;
    if component > analysis.basis.components.len() {
        bail!(
            "--component {component} out of range (have {})",
            analysis.basis.components.len()
        );
    }
    let mut manifest = RunManifest::new("interpret");
    flags.record(&mut manifest);
    manifest.param("component", component);
    manifest.param("language", language.unwrap_or("all"));
    manifest.input_dir(corpus_dir)?;

    let languages: Vec<usize> = match language {
        Some(label) => vec![analysis
            .corpus
            .language_index(label)
            .with_context(|| format!("unknown language {label:?}"))?],
        None => (0..analysis.corpus.n_l()).collect(),
    };
    for l in languages {
        export_hadamard(out, &analysis, component - 1, l, &mut manifest)?;
    }
    manifest.write(out)?;
    Ok(())
}

pub fn cmd_ingest(
    wav: &Path,
    corpus_dir: &Path,
    language: &str,
    word: &str,
    gender: &str,
    replicate: u32,
) -> Result<()> {
    if sepcva::Gender::parse(gender).is_none() {
        bail!("bad gender {gender:?}: expected F or M");
    }
    let samples = crate::stft::read_wav(wav)?;
    let spec = crate::stft::spectrogram(&samples)?;

    std::fs::create_dir_all(corpus_dir)?;
    let mut records = if corpus_dir.join("manifest.json").exists() {
        io::read_corpus_manifest(corpus_dir)?
    } else {
        Vec::new()
    };
    let file = format!(
        "obs_{}_{}_{}_{}.csv",
        sanitize_label(language),
        sanitize_label(word),
        sanitize_label(gender),
        replicate
    );
    if records.iter().any(|r| r.file == file) {
        bail!("corpus already contains an observation file named {file}");
    }
    io::write_matrix_csv(&corpus_dir.join(&file), &spec)?;
    records.push(io::CorpusRecord {
        file: file.clone(),
        language: language.to_string(),
        word: word.to_string(),
        gender: gender.to_string(),
        replicate,
    });
    io::write_corpus_manifest(corpus_dir, &records)?;
    println!("ingested {} -> {}", wav.display(), corpus_dir.join(file).display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate_table1(
    out: &Path,
    reps: usize,
    sizes: &[usize],
    seed: u64,
    flip_prob: f64,
    words: usize,
    dim: usize,
    loading_bound: f64,
    noise_scale: f64,
) -> Result<()> {
    let config = TreeSimConfig {
        dim,
        loading_bound,
        noise_scale,
        words,
        seed,
        ..Default::default()
    };
    let report = run_table1(reps, sizes, &config, flip_prob)?;

    let mut csv = String::from("size");
    for i in 0..report.components {
        write!(csv, ",D_c{}", i + 1)?;
    }
    for i in 0..report.components {
        write!(csv, ",Dstar_c{}", i + 1)?;
    }
    csv.push('\n');
    for (idx, size) in report.sizes.iter().enumerate() {
        write!(csv, "{size}")?;
        for v in &report.rates_clean[idx] {
            write!(csv, ",{}", fmt(*v))?;
        }
        for v in &report.rates_corrupted[idx] {
            write!(csv, ",{}", fmt(*v))?;
        }
        csv.push('\n');
    }
    io::write_atomic(&out.join("table1.csv"), csv.as_bytes())?;

    let mut manifest = RunManifest::new("simulate table1");
    manifest.param("reps", reps);
    manifest.param(
        "sizes",
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","),
    );
    manifest.param("seed", seed);
    manifest.param("flip_prob", fmt(flip_prob));
    manifest.param("words", words);
    manifest.param("dim", dim);
    manifest.param("loading_bound", fmt(loading_bound));
    manifest.param("noise_scale", fmt(noise_scale));
    manifest.output("table1.csv");
    manifest.write(out)?;

    for (idx, size) in report.sizes.iter().enumerate() {
        println!(
            "size {size}: D c1 {:.1}%, D* c1 {:.1}%",
            report.rates_clean[idx][0], report.rates_corrupted[idx][0]
        );
    }
    Ok(())
}

/// Which of the three resampling scenarios to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScenarioChoice {
    A,
    B,
    C,
    All,
}

fn scenario_config(
    scenario: Scenario,
    targets: &[usize],
    reps: usize,
    words: usize,
    within_noise: f64,
    seed: u64,
) -> ScenarioConfig {
    let sources = bundled_sources(seed, targets);
    let slots = sources.len();
    ScenarioConfig {
        scenario,
        sources,
        replications: reps,
        words,
        replicates_per_cell: 2,
        within_noise,
        basis: default_scenario_basis(slots),
        seed,
    }
}

pub fn cmd_simulate_scenarios(
    out: &Path,
    choice: ScenarioChoice,
    reps: usize,
    seed: u64,
    words: usize,
    within_noise: f64,
) -> Result<()> {
    // Scenario A maps amenable and near-amenable sources spanning the
    // achievable T range onto fixed slots; B uses only non-amenable
    // sources; C mixes an amenable and a strongly non-amenable source
    // uniformly at random per slot and replication.
    // Fifteen slots for A, mirroring the component count of the reference
    // analysis, with T values spanning the achievable range (counts 8 and 9
    // are impossible).
    let a_targets = vec![10, 10, 10, 10, 7, 7, 7, 6, 6, 6, 5, 5, 4, 4, 4];
    let b_targets = vec![7, 7, 6, 6, 5, 5, 4, 4];
    let c_targets = vec![10, 4];
    let runs: Vec<(&str, Scenario, Vec<usize>)> = match choice {
        ScenarioChoice::A => vec![("A", Scenario::A, a_targets)],
        ScenarioChoice::B => vec![("B", Scenario::B, b_targets)],
        ScenarioChoice::C => vec![("C", Scenario::C, c_targets)],
        ScenarioChoice::All => vec![
            ("A", Scenario::A, a_targets),
            ("B", Scenario::B, b_targets),
            ("C", Scenario::C, c_targets),
        ],
    };

    let mut per_source = String::from("scenario,source,t_count,uses,amenable_pct\n");
    let mut summary = String::from("scenario,rank_correlation,overall_pct\n");
    for (name, scenario, targets) in &runs {
        let config = scenario_config(*scenario, targets, reps, words, within_noise, seed);
        let report: ScenarioReport = run_scenarios(&config)?;
        for s in &report.per_source {
            writeln!(
                per_source,
                "{name},{},{},{},{}",
                s.label,
                s.t_count,
                s.uses,
                fmt(s.amenable_pct)
            )?;
        }
        writeln!(
            summary,
            "{name},{},{}",
            fmt(report.rank_correlation),
            fmt(report.overall_pct)
        )?;
        println!(
            "scenario {name}: overall {:.1}% amenable, rank correlation {:.3}",
            report.overall_pct, report.rank_correlation
        );
    }
    io::write_atomic(&out.join("scenarios.csv"), per_source.as_bytes())?;
    io::write_atomic(&out.join("summary.csv"), summary.as_bytes())?;

    let mut manifest = RunManifest::new("simulate scenarios");
    manifest.param("scenario", format!("{choice:?}"));
    manifest.param("reps", reps);
    manifest.param("seed", seed);
    manifest.param("words", words);
    manifest.param("within_noise", fmt(within_noise));
    manifest.output("scenarios.csv");
    manifest.output("summary.csv");
    manifest.write(out)?;
    Ok(())
}
