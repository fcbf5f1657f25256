//! Artifact input/output: corpus directories, CSV matrices, atomic writes,
//! and the 17-significant-digit decimal format shared by every emitter.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sepcva::{Corpus, Gender, LabeledSpectrogram};

/// Decimal formatting used by every numeric artifact: scientific notation
/// with 16 fractional digits, i.e. 17 significant digits.
pub fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes bytes to a temporary sibling file and renames it into place, so a
/// crash never leaves a half-written artifact.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", path.display()))?;
    Ok(())
}

/// Serializes a matrix as comma-separated rows, one line per row.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt(m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_atomic(path, matrix_to_csv(m).as_bytes())
}

/// Parses a headerless CSV of decimal values into a matrix; every row must
/// have the same number of columns.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .with_context(|| format!("{}:{}: bad decimal {cell:?}", path.display(), lineno + 1))
            })
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!(
                    "{}:{}: row has {} columns, expected {}",
                    path.display(),
                    lineno + 1,
                    row.len(),
                    first.len()
                );
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: empty matrix file", path.display());
    }
    let (n_f, n_t) = (rows.len(), rows[0].len());
    Ok(DMatrix::from_fn(n_f, n_t, |r, c| rows[r][c]))
}

/// One record of a corpus directory's `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub file: String,
    pub language: String,
    pub word: String,
    pub gender: String,
    pub replicate: u32,
}

pub fn read_corpus_manifest(dir: &Path) -> Result<Vec<CorpusRecord>> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path)
        .with_context(|| format!("reading corpus manifest {}", path.display()))?;
    let records: Vec<CorpusRecord> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(records)
}

pub fn write_corpus_manifest(dir: &Path, records: &[CorpusRecord]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(records)?;
    text.push('\n');
    write_atomic(&dir.join("manifest.json"), text.as_bytes())
}

/// Loads a corpus directory: `manifest.json` plus one CSV matrix per record,
/// in manifest order.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let records = read_corpus_manifest(dir)?;
    if records.is_empty() {
        bail!("{}: corpus manifest lists no observations", dir.display());
    }
    let mut observations = Vec::with_capacity(records.len());
    for rec in &records {
        let gender = Gender::parse(&rec.gender)
            .with_context(|| format!("record {}: bad gender {:?}", rec.file, rec.gender))?;
        let values = read_matrix_csv(&dir.join(&rec.file))?;
        observations.push(LabeledSpectrogram {
            values,
            language: rec.language.clone(),
            word: rec.word.clone(),
            gender,
            replicate: rec.replicate,
        });
    }
    Ok(Corpus::new(observations)?)
}

/// Writes a whole corpus as a directory artifact (used by the simulation
/// subcommands and tests).
pub fn save_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir)?;
    let width = corpus.n().to_string().len();
    let mut records = Vec::with_capacity(corpus.n());
    for (i, obs) in corpus.observations().iter().enumerate() {
        let file = format!("obs_{i:0width$}.csv");
        write_matrix_csv(&dir.join(&file), &obs.values)?;
        records.push(CorpusRecord {
            file,
            language: obs.language.clone(),
            word: obs.word.clone(),
            gender: obs.gender.as_str().to_string(),
            replicate: obs.replicate,
        });
    }
    write_corpus_manifest(dir, &records)
}

/// Replaces filesystem-hostile characters in a label with underscores.
pub fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(format!("{digest:x}"))
}

/// A hashed input reference recorded in the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written as `manifest.json` in every output directory:
/// tool version, subcommand, resolved parameters, hashed inputs, and output
/// paths. Contains no timestamps, so identical runs produce identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub subcommand: String,
    pub parameters: std::collections::BTreeMap<String, String>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str) -> RunManifest {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            parameters: Default::default(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.parameters.insert(key.to_string(), value.to_string());
        self
    }

    /// Records every file of an input corpus directory with its hash.
    pub fn input_dir(&mut self, dir: &Path) -> Result<&mut Self> {
        let mut files: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        for f in files {
            self.inputs.push(InputRecord {
                path: f.display().to_string(),
                sha256: sha256_file(&f)?,
            });
        }
        Ok(self)
    }

    pub fn input_file(&mut self, path: &Path) -> Result<&mut Self> {
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn output(&mut self, rel: &str) -> &mut Self {
        self.outputs.push(rel.to_string());
        self
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_atomic(&out_dir.join("manifest.json"), text.as_bytes())
    }
}
