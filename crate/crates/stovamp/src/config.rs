//! Experiment configuration: a flat `key = value` text format, command-line
//! overrides, validation, and the canonical echo that makes every trace file
//! self-describing and re-runnable.
//!
//! The format is deliberately primitive so any language can parse it: one
//! `key = value` pair per line, `#` comments, no sections, no quoting.
//! Unknown keys are hard errors — a silently ignored typo is the fastest way
//! to "reproduce" the wrong experiment.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::solver::Schedule;

/// Which measurement ensemble the experiment samples and where the true
/// signal comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    /// Tall column-orthogonal blocks; signal drawn from the Gaussian prior.
    /// Needs `n` and `alpha`.
    Haar,
    /// Coded diffraction patterns (per-block random phase mask + DFT);
    /// signal loaded from a grayscale image. Needs `height`, `width`, and
    /// `input_image`.
    Cdp,
    /// Coded diffraction patterns on a signal drawn from the Gaussian prior:
    /// the synthetic variant of `cdp`, useful when no test image is at hand.
    /// Needs `n` (treated as a 1 x n grid) or `height`/`width`.
    Custom,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::Haar => "haar",
            ExperimentKind::Cdp => "cdp",
            ExperimentKind::Custom => "custom",
        })
    }
}

/// Which of the two solver entry points a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    /// Scalar measurement precision shared by all blocks.
    Vamp,
    /// Per-block measurement precisions.
    Stochastic,
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::Vamp => "vamp",
            SolverKind::Stochastic => "stochastic",
        })
    }
}

/// A fully validated experiment description.
///
/// Construct one with [`ExperimentConfig::from_file`] (optionally layering
/// command-line overrides) or [`ExperimentConfig::from_pairs`]. Every
/// constructor validates, so a value of this type is always runnable.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Measurement ensemble and signal source.
    pub kind: ExperimentKind,
    /// Signal length for `haar`, or for `custom` given as a flat vector.
    pub n: Option<usize>,
    /// Image height for `cdp` (or 2-D `custom`).
    pub height: Option<usize>,
    /// Image width for `cdp` (or 2-D `custom`).
    pub width: Option<usize>,
    /// Number of measurement blocks.
    pub l: usize,
    /// Requested sampling ratio M/N (haar only). The per-block row count is
    /// the nearest integer to `alpha * n / l`; the trace header echoes the
    /// ratio actually realized.
    pub alpha: Option<f64>,
    /// Signal-to-noise ratio of the magnitude observations, in dB.
    pub snr_db: f64,
    /// Damping factor in (0, 1] for the messages entering the denoisers.
    pub rho: f64,
    /// Number of outer iterations.
    pub k_it: usize,
    /// Block update schedule.
    pub schedule: Schedule,
    /// Seed for every random draw in the run.
    pub seed: u64,
    /// Solver entry point.
    pub solver: SolverKind,
    /// Grayscale image providing the true signal (`cdp` only).
    pub input_image: Option<PathBuf>,
    /// Directory receiving the trace, plot script, and reconstruction.
    pub output_dir: PathBuf,
}

/// Every key the format accepts, in canonical echo order.
const KNOWN_KEYS: [&str; 14] = [
    "experiment",
    "n",
    "height",
    "width",
    "l",
    "alpha",
    "snr_db",
    "rho",
    "k_it",
    "schedule",
    "seed",
    "solver",
    "input_image",
    "output_dir",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value
        .parse::<usize>()
        .map_err(|_| config_err(format!("key `{key}`: `{value}` is not a non-negative integer")))
}

fn parse_u64(key: &str, value: &str) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| config_err(format!("key `{key}`: `{value}` is not a non-negative integer")))
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    let parsed = value
        .parse::<f64>()
        .map_err(|_| config_err(format!("key `{key}`: `{value}` is not a number")))?;
    if !parsed.is_finite() {
        return Err(config_err(format!("key `{key}`: `{value}` is not finite")));
    }
    Ok(parsed)
}

/// Splits flat `key = value` text into pairs, skipping blank lines and `#`
/// comments. Duplicate keys are rejected: the file is a description, not a
/// program, and the last-one-wins convention hides mistakes.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected `key = value`, got `{line}`", idx + 1)))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(config_err(format!("line {}: empty key", idx + 1)));
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(config_err(format!("line {}: duplicate key `{key}`", idx + 1)));
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

impl ExperimentConfig {
    /// Reads a config file, layers `--key value` overrides on top, and
    /// validates the result.
    pub fn from_file(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut pairs = parse_pairs(&text)?;
        for (key, value) in overrides {
            match pairs.iter_mut().find(|(k, _)| k == key) {
                Some(slot) => slot.1 = value.clone(),
                None => pairs.push((key.clone(), value.clone())),
            }
        }
        Self::from_pairs(&pairs)
    }

    /// Builds a config from raw key/value pairs. Unknown keys, missing
    /// required keys, and out-of-domain values are all hard errors.
    pub fn from_pairs(pairs: &[(String, String)]) -> Result<Self> {
        for (key, _) in pairs {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(config_err(format!("unknown key `{key}`")));
            }
        }
        let get = |key: &str| -> Option<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let require = |key: &str| -> Result<&str> {
            get(key).ok_or_else(|| config_err(format!("missing required key `{key}`")))
        };

        let kind = match require("experiment")? {
            "haar" => ExperimentKind::Haar,
            "cdp" => ExperimentKind::Cdp,
            "custom" => ExperimentKind::Custom,
            other => {
                return Err(config_err(format!(
                    "key `experiment`: `{other}` is not one of haar|cdp|custom"
                )))
            }
        };
        let solver = match get("solver").unwrap_or("stochastic") {
            "vamp" => SolverKind::Vamp,
            "stochastic" => SolverKind::Stochastic,
            other => {
                return Err(config_err(format!(
                    "key `solver`: `{other}` is not one of vamp|stochastic"
                )))
            }
        };
        let schedule = match get("schedule").unwrap_or("sequential") {
            "sequential" => Schedule::Sequential,
            "parallel" => Schedule::Parallel,
            other => {
                return Err(config_err(format!(
                    "key `schedule`: `{other}` is not one of sequential|parallel"
                )))
            }
        };

        let config = ExperimentConfig {
            kind,
            n: get("n").map(|v| parse_usize("n", v)).transpose()?,
            height: get("height").map(|v| parse_usize("height", v)).transpose()?,
            width: get("width").map(|v| parse_usize("width", v)).transpose()?,
            l: parse_usize("l", require("l")?)?,
            alpha: get("alpha").map(|v| parse_f64("alpha", v)).transpose()?,
            snr_db: parse_f64("snr_db", require("snr_db")?)?,
            rho: parse_f64("rho", require("rho")?)?,
            k_it: get("k_it").map(|v| parse_usize("k_it", v)).transpose()?.unwrap_or(200),
            schedule,
            seed: get("seed").map(|v| parse_u64("seed", v)).transpose()?.unwrap_or(0),
            solver,
            input_image: get("input_image").map(PathBuf::from),
            output_dir: PathBuf::from(get("output_dir").unwrap_or(".")),
        };
        config.validate()?;
        Ok(config)
    }

    /// Rebuilds a config from the `# key = value` echo lines of a trace
    /// file, exactly as [`ExperimentConfig::echo_pairs`] wrote them.
    pub fn from_echo(echo: &[(String, String)]) -> Result<Self> {
        Self::from_pairs(echo)
    }

    fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(config_err("`l` must be at least 1"));
        }
        if self.k_it == 0 {
            return Err(config_err("`k_it` must be at least 1"));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(config_err(format!("`rho` must lie in (0, 1], got {}", self.rho)));
        }
        if self.n.is_some() && (self.height.is_some() || self.width.is_some()) {
            return Err(config_err("give either `n` or `height`/`width`, not both"));
        }
        if self.height.is_some() != self.width.is_some() {
            return Err(config_err("`height` and `width` must be given together"));
        }
        if let (Some(h), Some(w)) = (self.height, self.width) {
            if h == 0 || w == 0 {
                return Err(config_err("`height` and `width` must be at least 1"));
            }
        }
        if let Some(n) = self.n {
            if n == 0 {
                return Err(config_err("`n` must be at least 1"));
            }
        }
        match self.kind {
            ExperimentKind::Haar => {
                let n = self
                    .n
                    .ok_or_else(|| config_err("haar experiments need `n`"))?;
                let alpha = self
                    .alpha
                    .ok_or_else(|| config_err("haar experiments need `alpha`"))?;
                if alpha <= 0.0 {
                    return Err(config_err(format!("`alpha` must be positive, got {alpha}")));
                }
                if self.height.is_some() {
                    return Err(config_err("haar experiments take `n`, not `height`/`width`"));
                }
                if self.input_image.is_some() {
                    return Err(config_err("haar experiments do not read an image"));
                }
                let mbar = self.haar_block_rows()?;
                if mbar < n {
                    return Err(config_err(format!(
                        "per-block row count {mbar} (from alpha = {alpha}, l = {}) is below n = {n}; \
                         each block must be at least square",
                        self.l
                    )));
                }
            }
            ExperimentKind::Cdp => {
                if self.height.is_none() {
                    return Err(config_err("cdp experiments need `height` and `width`"));
                }
                if self.alpha.is_some() {
                    return Err(config_err("`alpha` applies to haar experiments only"));
                }
                if self.input_image.is_none() {
                    return Err(config_err("cdp experiments need `input_image`"));
                }
            }
            ExperimentKind::Custom => {
                if self.n.is_none() && self.height.is_none() {
                    return Err(config_err("custom experiments need `n` or `height`/`width`"));
                }
                if self.alpha.is_some() {
                    return Err(config_err("`alpha` applies to haar experiments only"));
                }
                if self.input_image.is_some() {
                    return Err(config_err("custom experiments draw the signal from the prior"));
                }
            }
        }
        Ok(())
    }

    /// Grid shape of the signal: `(height, width)`, with flat signals as one
    /// row.
    pub fn grid(&self) -> (usize, usize) {
        match (self.height, self.width, self.n) {
            (Some(h), Some(w), _) => (h, w),
            (_, _, Some(n)) => (1, n),
            _ => unreachable!("validated config always has a shape"),
        }
    }

    /// Total signal length.
    pub fn signal_len(&self) -> usize {
        let (h, w) = self.grid();
        h * w
    }

    /// Rows per measurement block for a haar experiment: the nearest integer
    /// to `alpha * n / l`. The requested ratio is rarely realizable exactly,
    /// so the realized ratio `l * rows / n` is echoed in the trace header.
    pub fn haar_block_rows(&self) -> Result<usize> {
        let n = self.n.ok_or_else(|| config_err("haar experiments need `n`"))?;
        let alpha = self
            .alpha
            .ok_or_else(|| config_err("haar experiments need `alpha`"))?;
        Ok((alpha * n as f64 / self.l as f64).round() as usize)
    }

    /// The sampling ratio actually realized after rounding the block row
    /// count, `l * rows / n`; equals `alpha` whenever that was realizable.
    pub fn effective_alpha(&self) -> Result<f64> {
        let rows = self.haar_block_rows()?;
        Ok(self.l as f64 * rows as f64 / self.n.unwrap() as f64)
    }

    /// The canonical `key = value` pairs that reproduce this config exactly:
    /// parsing them back yields an identical run. Keys appear in a fixed
    /// order so two equal configs echo byte-identically.
    pub fn echo_pairs(&self) -> Vec<(String, String)> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut push = |key: &str, value: String| pairs.push((key.to_string(), value));
        push("experiment", self.kind.to_string());
        if let Some(n) = self.n {
            push("n", n.to_string());
        }
        if let Some(h) = self.height {
            push("height", h.to_string());
        }
        if let Some(w) = self.width {
            push("width", w.to_string());
        }
        push("l", self.l.to_string());
        if let Some(alpha) = self.alpha {
            push("alpha", alpha.to_string());
        }
        push("snr_db", self.snr_db.to_string());
        push("rho", self.rho.to_string());
        push("k_it", self.k_it.to_string());
        push(
            "schedule",
            match self.schedule {
                Schedule::Sequential => "sequential".to_string(),
                Schedule::Parallel => "parallel".to_string(),
            },
        );
        push("seed", self.seed.to_string());
        push("solver", self.solver.to_string());
        if let Some(image) = &self.input_image {
            push("input_image", image.display().to_string());
        }
        push("output_dir", self.output_dir.display().to_string());
        pairs
    }
}
