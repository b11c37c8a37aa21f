//! Run configuration: a line-oriented `key = value` format with `#` comments,
//! strict key checking, range validation, and defaults matching the bundled
//! reference system.

use crate::bounds::BoundMethod;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid {field}: {message}")]
    Validation { field: &'static str, message: String },
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

/// What the CLI run should do.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bounds,
    Estimate,
    Keyrate,
    Optimize,
    Sweep,
    Maxdist,
    Table2,
    Figures,
    Coverage,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Bounds => "bounds",
            Mode::Estimate => "estimate",
            Mode::Keyrate => "keyrate",
            Mode::Optimize => "optimize",
            Mode::Sweep => "sweep",
            Mode::Maxdist => "maxdist",
            Mode::Table2 => "table2",
            Mode::Figures => "figures",
            Mode::Coverage => "coverage",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bounds" => Ok(Mode::Bounds),
            "estimate" => Ok(Mode::Estimate),
            "keyrate" => Ok(Mode::Keyrate),
            "optimize" => Ok(Mode::Optimize),
            "sweep" => Ok(Mode::Sweep),
            "maxdist" => Ok(Mode::Maxdist),
            "table2" => Ok(Mode::Table2),
            "figures" => Ok(Mode::Figures),
            "coverage" => Ok(Mode::Coverage),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn label(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

/// Everything a run needs: channel, protocol, source, and mode inputs.
/// Missing keys fall back to the bundled reference-system defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // channel
    pub eta_d: f64,
    pub y0: f64,
    pub e_d: f64,
    pub loss: f64,
    pub distance: f64,
    // protocol
    pub f_ec: f64,
    pub epsilon: f64,
    pub n_pulses: f64,
    pub q_z: f64,
    // source ensemble
    pub mu: f64,
    pub nu: f64,
    pub q_signal: f64,
    pub q_weak: f64,
    // run control
    pub mode: Mode,
    pub method: BoundMethod,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    // mode-specific inputs
    pub chi: f64,
    pub ch_trials: u64,
    pub tallies: Option<PathBuf>,
    pub sweep_from: f64,
    pub sweep_to: f64,
    pub sweep_step: f64,
    pub maxdist_n_min_exp: u32,
    pub maxdist_n_max_exp: u32,
    pub coverage_trials: u64,
    pub coverage_epsilon: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            eta_d: 0.045,
            y0: 1.7e-6,
            e_d: 0.033,
            loss: 0.21,
            distance: 100.0,
            f_ec: 1.22,
            epsilon: 1e-10,
            n_pulses: 1e10,
            q_z: 0.5,
            mu: 0.370,
            nu: 0.126,
            q_signal: 0.650,
            q_weak: 0.250,
            mode: Mode::Keyrate,
            method: BoundMethod::ExactChernoff,
            seed: 0,
            workers: 0,
            out: None,
            format: OutputFormat::Csv,
            chi: 0.0,
            ch_trials: 0,
            tallies: None,
            sweep_from: 0.0,
            sweep_to: 160.0,
            sweep_step: 5.0,
            maxdist_n_min_exp: 7,
            maxdist_n_max_exp: 14,
            coverage_trials: 100_000,
            coverage_epsilon: 1e-2,
        }
    }
}

macro_rules! parse_field {
    ($cfg:expr, $field:ident, $value:expr, $line:expr) => {
        $cfg.$field = $value.parse().map_err(|e| ConfigError::Parse {
            line: $line,
            message: format!("cannot parse {} '{}': {e}", stringify!($field), $value),
        })?
    };
}

/// Parses configuration text. Unknown keys are errors; missing keys keep
/// their defaults.
pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: line_no,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        match key {
            "eta_d" => parse_field!(cfg, eta_d, value, line_no),
            "y0" => parse_field!(cfg, y0, value, line_no),
            "e_d" => parse_field!(cfg, e_d, value, line_no),
            "loss" => parse_field!(cfg, loss, value, line_no),
            "distance" => parse_field!(cfg, distance, value, line_no),
            "f" => parse_field!(cfg, f_ec, value, line_no),
            "epsilon" => parse_field!(cfg, epsilon, value, line_no),
            "n_pulses" => parse_field!(cfg, n_pulses, value, line_no),
            "q_z" => parse_field!(cfg, q_z, value, line_no),
            "mu" => parse_field!(cfg, mu, value, line_no),
            "nu" => parse_field!(cfg, nu, value, line_no),
            "q_signal" => parse_field!(cfg, q_signal, value, line_no),
            "q_weak" => parse_field!(cfg, q_weak, value, line_no),
            "mode" => parse_field!(cfg, mode, value, line_no),
            "method" => parse_field!(cfg, method, value, line_no),
            "seed" => parse_field!(cfg, seed, value, line_no),
            "workers" => parse_field!(cfg, workers, value, line_no),
            "out" => cfg.out = Some(PathBuf::from(value)),
            "format" => parse_field!(cfg, format, value, line_no),
            "chi" => parse_field!(cfg, chi, value, line_no),
            "ch_trials" => parse_field!(cfg, ch_trials, value, line_no),
            "tallies" => cfg.tallies = Some(PathBuf::from(value)),
            "sweep_from" => parse_field!(cfg, sweep_from, value, line_no),
            "sweep_to" => parse_field!(cfg, sweep_to, value, line_no),
            "sweep_step" => parse_field!(cfg, sweep_step, value, line_no),
            "maxdist_n_min_exp" => parse_field!(cfg, maxdist_n_min_exp, value, line_no),
            "maxdist_n_max_exp" => parse_field!(cfg, maxdist_n_max_exp, value, line_no),
            "coverage_trials" => parse_field!(cfg, coverage_trials, value, line_no),
            "coverage_epsilon" => parse_field!(cfg, coverage_epsilon, value, line_no),
            other => {
                return Err(ConfigError::Parse {
                    line: line_no,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    Ok(cfg)
}

/// Loads and parses a config file.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

impl RunConfig {
    /// Range checks every numeric field; the first offending field is named.
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn require(field: &'static str, ok: bool, message: String) -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Validation { field, message })
            }
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v) && v.is_finite();
        require("eta_d", unit(self.eta_d), format!("probability expected, got {}", self.eta_d))?;
        require("y0", unit(self.y0), format!("probability expected, got {}", self.y0))?;
        require("e_d", unit(self.e_d), format!("probability expected, got {}", self.e_d))?;
        require("loss", self.loss >= 0.0 && self.loss.is_finite(), format!("must be >= 0, got {}", self.loss))?;
        require(
            "distance",
            self.distance >= 0.0 && self.distance.is_finite(),
            format!("must be >= 0, got {}", self.distance),
        )?;
        require("f", self.f_ec >= 1.0 && self.f_ec.is_finite(), format!("must be >= 1, got {}", self.f_ec))?;
        require(
            "epsilon",
            self.epsilon > 0.0 && self.epsilon < 1.0,
            format!("must lie in (0,1), got {}", self.epsilon),
        )?;
        require(
            "n_pulses",
            self.n_pulses >= 1.0 && self.n_pulses.is_finite(),
            format!("must be >= 1, got {}", self.n_pulses),
        )?;
        require(
            "q_z",
            self.q_z > 0.0 && self.q_z < 1.0,
            format!("must lie in (0,1), got {}", self.q_z),
        )?;
        require(
            "mu",
            self.mu > self.nu && self.mu.is_finite(),
            format!("must exceed nu = {}, got {}", self.nu, self.mu),
        )?;
        require("nu", self.nu > 0.0, format!("must be > 0, got {}", self.nu))?;
        require(
            "q_signal",
            self.q_signal > 0.0 && self.q_signal < 1.0,
            format!("must lie in (0,1), got {}", self.q_signal),
        )?;
        require(
            "q_weak",
            self.q_weak > 0.0 && self.q_signal + self.q_weak < 1.0,
            format!(
                "shares must leave a vacuum remainder, got q_signal + q_weak = {}",
                self.q_signal + self.q_weak
            ),
        )?;
        require("chi", self.chi >= 0.0 && self.chi.is_finite(), format!("must be >= 0, got {}", self.chi))?;
        require(
            "sweep_step",
            self.sweep_step > 0.0 && self.sweep_from <= self.sweep_to,
            format!(
                "need sweep_from <= sweep_to and sweep_step > 0, got {} ..= {} step {}",
                self.sweep_from, self.sweep_to, self.sweep_step
            ),
        )?;
        require(
            "maxdist_n_min_exp",
            self.maxdist_n_min_exp <= self.maxdist_n_max_exp,
            format!(
                "exponent range must be ordered, got {}..{}",
                self.maxdist_n_min_exp, self.maxdist_n_max_exp
            ),
        )?;
        require(
            "coverage_trials",
            self.coverage_trials >= 1,
            format!("must be >= 1, got {}", self.coverage_trials),
        )?;
        require(
            "coverage_epsilon",
            self.coverage_epsilon > 0.0 && self.coverage_epsilon < 1.0,
            format!("must lie in (0,1), got {}", self.coverage_epsilon),
        )?;
        Ok(())
    }

    /// Canonical text form; `parse_config_str` returns an identical config.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("eta_d", format!("{}", self.eta_d));
        kv("y0", format!("{}", self.y0));
        kv("e_d", format!("{}", self.e_d));
        kv("loss", format!("{}", self.loss));
        kv("distance", format!("{}", self.distance));
        kv("f", format!("{}", self.f_ec));
        kv("epsilon", format!("{}", self.epsilon));
        kv("n_pulses", format!("{}", self.n_pulses));
        kv("q_z", format!("{}", self.q_z));
        kv("mu", format!("{}", self.mu));
        kv("nu", format!("{}", self.nu));
        kv("q_signal", format!("{}", self.q_signal));
        kv("q_weak", format!("{}", self.q_weak));
        kv("mode", self.mode.label().to_string());
        kv("method", self.method.label().to_string());
        kv("seed", format!("{}", self.seed));
        kv("workers", format!("{}", self.workers));
        if let Some(out) = &self.out {
            kv("out", out.display().to_string());
        }
        kv("format", self.format.label().to_string());
        kv("chi", format!("{}", self.chi));
        kv("ch_trials", format!("{}", self.ch_trials));
        if let Some(t) = &self.tallies {
            kv("tallies", t.display().to_string());
        }
        kv("sweep_from", format!("{}", self.sweep_from));
        kv("sweep_to", format!("{}", self.sweep_to));
        kv("sweep_step", format!("{}", self.sweep_step));
        kv("maxdist_n_min_exp", format!("{}", self.maxdist_n_min_exp));
        kv("maxdist_n_max_exp", format!("{}", self.maxdist_n_max_exp));
        kv("coverage_trials", format!("{}", self.coverage_trials));
        kv("coverage_epsilon", format!("{}", self.coverage_epsilon));
        s
    }

    /// FNV-1a over the analysis-relevant fields; stable across runs and
    /// independent of output routing (out path, format, worker count).
    pub fn hash(&self) -> u64 {
        let canonical = Self {
            out: None,
            workers: 0,
            format: OutputFormat::Csv,
            ..self.clone()
        }
        .serialize();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in canonical.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}
