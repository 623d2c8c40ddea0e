//! Flat `key = value` configuration, CLI overrides, and the run manifest.
//!
//! Every experiment parameter is a config key; command-line flags mirror the
//! keys and win over the file. Each subcommand writes a `manifest.txt` into
//! the output directory holding the *fully resolved* configuration plus the
//! master seed, SHA-256 digests of the input files, and the artifact
//! version. A manifest is itself a valid config file, so
//! `climarket <subcommand> --config <out>/manifest.txt` replays the run and
//! reproduces its outputs byte-identically (provenance keys like `version`
//! and `digest_*` are accepted and ignored on load).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use climarket_core::bayes::InferenceSettings;
use climarket_core::climate::ForcingKind;
use climarket_core::sim::{Mode, ParamSet, ScoreKind, SimConfig};
use climarket_core::traders::IdeologyConvention;

use crate::CliError;

/// Fully resolved settings: defaults, then config file, then flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker threads for sweep parallelism; 0 keeps the library default.
    pub workers: usize,
    pub temperature_csv: PathBuf,
    pub co2_csv: PathBuf,
    pub tsi_csv: PathBuf,
    // Experiment parameters.
    pub ideo: f64,
    pub n_edge: usize,
    pub n_traders: usize,
    pub risk_tak: f64,
    pub seg: f64,
    pub true_model: ForcingKind,
    // Simulation shape.
    pub seq_length_years: usize,
    /// `None` falls back to the mode default (8 future, 14 historical).
    pub n_sequences: Option<usize>,
    pub bins_k: usize,
    pub bins_lo: f64,
    pub bins_hi: f64,
    pub n_draws: usize,
    pub burn_in: usize,
    pub passes_per_year: usize,
    pub ideology_convention: IdeologyConvention,
    pub historical_true_model: ForcingKind,
    pub score_kind: ScoreKind,
    // Sensitivity experiment.
    pub n_points: usize,
    pub replicates: usize,
    pub n_boot: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            workers: 0,
            temperature_csv: PathBuf::from("data/temperature_synthetic.csv"),
            co2_csv: PathBuf::from("data/co2_synthetic.csv"),
            tsi_csv: PathBuf::from("data/tsi_synthetic.csv"),
            ideo: 0.5,
            n_edge: 150,
            n_traders: 150,
            risk_tak: 0.5,
            seg: 0.05,
            true_model: ForcingKind::LogCo2,
            seq_length_years: 6,
            n_sequences: None,
            bins_k: 10,
            bins_lo: -1.0,
            bins_hi: 3.0,
            n_draws: 2000,
            burn_in: 500,
            passes_per_year: 1,
            ideology_convention: IdeologyConvention::Prose,
            historical_true_model: ForcingKind::LogCo2,
            score_kind: ScoreKind::TimeAverage,
            n_points: 100,
            replicates: 5,
            n_boot: 1000,
        }
    }
}

fn bad_value(key: &str, value: &str, expected: &str) -> CliError {
    CliError::config(format!("key '{key}': invalid value '{value}' ({expected})"))
}

impl Settings {
    /// Apply one `key = value` pair. Unknown keys are rejected; manifest
    /// provenance keys (`version`, `subcommand`, `digest_*`) are accepted
    /// and ignored so a manifest can be loaded back as a config.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        macro_rules! num {
            ($expected:literal) => {
                value.parse().map_err(|_| bad_value(key, value, $expected))?
            };
        }
        match key {
            "seed" => self.seed = num!("expected an unsigned integer"),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "workers" => self.workers = num!("expected an unsigned integer"),
            "temperature_csv" => self.temperature_csv = PathBuf::from(value),
            "co2_csv" => self.co2_csv = PathBuf::from(value),
            "tsi_csv" => self.tsi_csv = PathBuf::from(value),
            "ideo" => self.ideo = num!("expected a number"),
            "n_edge" => self.n_edge = num!("expected an unsigned integer"),
            "n_traders" => self.n_traders = num!("expected an unsigned integer"),
            "risk_tak" => self.risk_tak = num!("expected a number"),
            "seg" => self.seg = num!("expected a number"),
            "true_model" => {
                self.true_model = ForcingKind::parse(value)
                    .map_err(|_| bad_value(key, value, "expected co2 or tsi"))?;
            }
            "seq_length_years" => self.seq_length_years = num!("expected an unsigned integer"),
            "n_sequences" => self.n_sequences = Some(num!("expected an unsigned integer")),
            "bins_k" => self.bins_k = num!("expected an unsigned integer"),
            "bins_lo" => self.bins_lo = num!("expected a number"),
            "bins_hi" => self.bins_hi = num!("expected a number"),
            "n_draws" => self.n_draws = num!("expected an unsigned integer"),
            "burn_in" => self.burn_in = num!("expected an unsigned integer"),
            "passes_per_year" => self.passes_per_year = num!("expected an unsigned integer"),
            "ideology_convention" => {
                self.ideology_convention = IdeologyConvention::parse(value)
                    .map_err(|_| bad_value(key, value, "expected prose or literal"))?;
            }
            "historical_true_model" => {
                self.historical_true_model = ForcingKind::parse(value)
                    .map_err(|_| bad_value(key, value, "expected co2 or tsi"))?;
            }
            "score_kind" => {
                self.score_kind = ScoreKind::parse(value)
                    .map_err(|_| bad_value(key, value, "expected time_average or terminal"))?;
            }
            "n_points" => self.n_points = num!("expected an unsigned integer"),
            "replicates" => self.replicates = num!("expected an unsigned integer"),
            "n_boot" => self.n_boot = num!("expected an unsigned integer"),
            "version" | "subcommand" => {}
            k if k.starts_with("digest_") => {}
            _ => {
                return Err(CliError::config(format!("unknown configuration key '{key}'")));
            }
        }
        Ok(())
    }

    /// Load a flat `key = value` file on top of the current settings.
    /// Lines are trimmed; blank lines and `#` comments are skipped.
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "{}: line {}: expected 'key = value', got '{line}'",
                    path.display(),
                    idx + 1
                )));
            };
            self.apply(key.trim(), value.trim()).map_err(|e| {
                CliError::config(format!("{}: line {}: {}", path.display(), idx + 1, e.message()))
            })?;
        }
        Ok(())
    }

    /// Assemble the simulation configuration for one mode.
    pub fn sim_config(&self, mode: Mode) -> SimConfig {
        SimConfig {
            params: ParamSet {
                ideo: self.ideo,
                n_edge: self.n_edge,
                n_traders: self.n_traders,
                risk_tak: self.risk_tak,
                seg: self.seg,
                true_model: self.true_model,
            },
            seq_length_years: self.seq_length_years,
            n_sequences: self.n_sequences.unwrap_or(match mode {
                Mode::Future => 8,
                Mode::Historical => 14,
            }),
            bins_k: self.bins_k,
            bins_lo: self.bins_lo,
            bins_hi: self.bins_hi,
            inference: InferenceSettings {
                n_draws: self.n_draws,
                burn_in: self.burn_in,
            },
            mode,
            master_seed: self.seed,
            passes_per_year: self.passes_per_year,
            ideology_convention: self.ideology_convention,
            historical_true_model: self.historical_true_model,
            score_kind: self.score_kind,
        }
    }

    /// Render the manifest: the full resolved configuration (re-loadable as
    /// a config file) plus provenance. `mode` resolves the `n_sequences`
    /// default so the replayed run cannot drift; `digests` are
    /// `(key_suffix, sha256)` pairs for the files the run consumed.
    pub fn manifest_text(
        &self,
        subcommand: &str,
        mode: Mode,
        digests: &[(String, String)],
    ) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# climarket manifest; rerun with: climarket {subcommand} --config <this file>"
        );
        let kv = |out: &mut String, k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv(&mut out, "version", env!("CARGO_PKG_VERSION").to_string());
        kv(&mut out, "subcommand", subcommand.to_string());
        kv(&mut out, "seed", self.seed.to_string());
        kv(&mut out, "out_dir", self.out_dir.display().to_string());
        kv(&mut out, "workers", self.workers.to_string());
        kv(
            &mut out,
            "temperature_csv",
            self.temperature_csv.display().to_string(),
        );
        kv(&mut out, "co2_csv", self.co2_csv.display().to_string());
        kv(&mut out, "tsi_csv", self.tsi_csv.display().to_string());
        kv(&mut out, "ideo", self.ideo.to_string());
        kv(&mut out, "n_edge", self.n_edge.to_string());
        kv(&mut out, "n_traders", self.n_traders.to_string());
        kv(&mut out, "risk_tak", self.risk_tak.to_string());
        kv(&mut out, "seg", self.seg.to_string());
        kv(&mut out, "true_model", self.true_model.label().to_string());
        kv(
            &mut out,
            "seq_length_years",
            self.seq_length_years.to_string(),
        );
        kv(
            &mut out,
            "n_sequences",
            self.sim_config(mode).n_sequences.to_string(),
        );
        kv(&mut out, "bins_k", self.bins_k.to_string());
        kv(&mut out, "bins_lo", self.bins_lo.to_string());
        kv(&mut out, "bins_hi", self.bins_hi.to_string());
        kv(&mut out, "n_draws", self.n_draws.to_string());
        kv(&mut out, "burn_in", self.burn_in.to_string());
        kv(
            &mut out,
            "passes_per_year",
            self.passes_per_year.to_string(),
        );
        kv(
            &mut out,
            "ideology_convention",
            self.ideology_convention.label().to_string(),
        );
        kv(
            &mut out,
            "historical_true_model",
            self.historical_true_model.label().to_string(),
        );
        kv(&mut out, "score_kind", self.score_kind.label().to_string());
        kv(&mut out, "n_points", self.n_points.to_string());
        kv(&mut out, "replicates", self.replicates.to_string());
        kv(&mut out, "n_boot", self.n_boot.to_string());
        for (suffix, digest) in digests {
            kv(&mut out, &format!("digest_{suffix}"), digest.clone());
        }
        out
    }
}

/// SHA-256 of a file's bytes, rendered `sha256:<hex>`.
pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(7 + 2 * digest.len());
    hex.push_str("sha256:");
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    Ok(hex)
}
