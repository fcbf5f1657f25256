//! Command-line front end for the separable canonical variate analysis
//! pipeline with Gaussian tree-constraint diagnostics.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sepcva_cli::commands::{self, AnalysisFlags, ScenarioChoice};

#[derive(Parser)]
#[command(
    name = "sepcva",
    version,
    about = "Separable CVA of grouped spectrograms with tripod-tree positivity diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a 16 kHz 16-bit mono PCM WAV into a labeled corpus observation.
    Ingest {
        /// WAV file to ingest.
        #[arg(long)]
        wav: PathBuf,
        /// Corpus directory to create or extend.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        language: String,
        #[arg(long)]
        word: String,
        /// F or M.
        #[arg(long)]
        gender: String,
        #[arg(long, default_value_t = 0)]
        replicate: u32,
    },
    /// Full pipeline: gender adjustment, directional covariances, basis,
    /// scores, tree diagnostics, and Hadamard interpretations.
    Pipeline {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisFlags,
        /// Also dump the four directional covariance matrices as CSV.
        #[arg(long)]
        dump_cov: bool,
    },
    /// Basis and score-table export only.
    Project {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisFlags,
    },
    /// Per-component tree-amenability diagnostics only.
    Treecheck {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisFlags,
    },
    /// Hadamard interpretation of one component against language means.
    Interpret {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        analysis: AnalysisFlags,
        /// 1-based component index.
        #[arg(long)]
        component: usize,
        /// Language label; omit to interpret against every language.
        #[arg(long)]
        language: Option<String>,
    },
    /// Monte Carlo validation studies.
    Simulate {
        #[command(subcommand)]
        study: Simulate,
    },
}

#[derive(Subcommand)]
enum Simulate {
    /// Positivity pass-rate table for the five-leaf tree simulation and its
    /// sign-corrupted counterpart.
    Table1 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        /// Comma-separated sample sizes (average observations per leaf).
        #[arg(long, value_delimiter = ',', default_values_t = vec![50usize, 500])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Per-entry sign-flip probability at each node transition.
        #[arg(long, default_value_t = 0.5)]
        flip_prob: f64,
        /// Fixed vocabulary size of the simulated corpus.
        #[arg(long, default_value_t = 16)]
        words: usize,
        /// Dimension per tree node.
        #[arg(long, default_value_t = 4)]
        dim: usize,
        /// Edge loadings are drawn from U(-bound, bound).
        #[arg(long, default_value_t = 5.0)]
        loading_bound: f64,
        /// Variance of the isotropic edge noise.
        #[arg(long, default_value_t = 6.0)]
        noise_scale: f64,
    },
    /// Amenability rates when resampling from cross-covariance sources with
    /// known constraint counts.
    Scenarios {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ScenarioChoice::All)]
        scenario: ScenarioChoice,
        #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pseudo-words per replication.
        #[arg(long, default_value_t = 12)]
        words: usize,
        /// Isotropic within-group noise added to pseudo-observations.
        #[arg(long, default_value_t = 0.2)]
        within_noise: f64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest {
            wav,
            corpus,
            language,
            word,
            gender,
            replicate,
        } => commands::cmd_ingest(&wav, &corpus, &language, &word, &gender, replicate),
        Command::Pipeline {
            corpus,
            out,
            analysis,
            dump_cov,
        } => commands::cmd_pipeline(&corpus, &out, &analysis, dump_cov),
        Command::Project { corpus, out, analysis } => {
            commands::cmd_project(&corpus, &out, &analysis)
        }
        Command::Treecheck { corpus, out, analysis } => {
            commands::cmd_treecheck(&corpus, &out, &analysis)
        }
        Command::Interpret {
            corpus,
            out,
            analysis,
            component,
            language,
        } => commands::cmd_interpret(&corpus, &out, &analysis, component, language.as_deref()),
        Command::Simulate { study } => match study {
            Simulate::Table1 {
                out,
                reps,
                sizes,
                seed,
                flip_prob,
                words,
                dim,
                loading_bound,
                noise_scale,
            } => commands::cmd_simulate_table1(
                &out,
                reps as usize,
                &sizes,
                seed,
                flip_prob,
                words,
                dim,
                loading_bound,
                noise_scale,
            ),
            Simulate::Scenarios {
                out,
                scenario,
                reps,
                seed,
                words,
                within_noise,
            } => commands::cmd_simulate_scenarios(
                &out,
                scenario,
                reps as usize,
                seed,
                words,
                within_noise,
            ),
        },
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
