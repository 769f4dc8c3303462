//! Plain-text `KEY=VALUE` run configuration. A file can pre-set any flag;
//! explicit command-line flags win over the file, which wins over defaults.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Every tunable a command can take, all optional; `None` means "not set
/// here", letting the merge order decide.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub memory: Option<usize>,
    pub order: Option<usize>,
    pub lambda: Option<f64>,
    pub kernel: Option<String>,
    pub sigma: Option<f64>,
    pub folds: Option<usize>,
    pub train_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub length: Option<usize>,
    pub out: Option<PathBuf>,
    pub transform: Option<String>,
    pub family_size: Option<usize>,
    pub prescale: Option<bool>,
    pub target: Option<String>,
}

impl RunConfig {
    /// Parses `KEY=VALUE` lines; `#` starts a comment, blank lines are
    /// ignored, unknown keys are configuration errors.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed.split_once('=').ok_or_else(|| {
                CliError::config(format!("config line {line_no}: expected KEY=VALUE"))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                CliError::config(format!("config line {line_no}: {key} must be {what}, got {value:?}"))
            };
            match key {
                "input" => cfg.input = Some(PathBuf::from(value)),
                "memory" => cfg.memory = Some(value.parse().map_err(|_| bad("an integer"))?),
                "order" => cfg.order = Some(value.parse().map_err(|_| bad("an integer"))?),
                "lambda" => cfg.lambda = Some(value.parse().map_err(|_| bad("a real"))?),
                "kernel" => cfg.kernel = Some(value.to_string()),
                "sigma" => cfg.sigma = Some(value.parse().map_err(|_| bad("a real"))?),
                "folds" => cfg.folds = Some(value.parse().map_err(|_| bad("an integer"))?),
                "train_fraction" => {
                    cfg.train_fraction = Some(value.parse().map_err(|_| bad("a real"))?)
                }
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad("an integer"))?),
                "runs" => cfg.runs = Some(value.parse().map_err(|_| bad("an integer"))?),
                "length" => cfg.length = Some(value.parse().map_err(|_| bad("an integer"))?),
                "out" => cfg.out = Some(PathBuf::from(value)),
                "transform" => cfg.transform = Some(value.to_string()),
                "family_size" => {
                    cfg.family_size = Some(value.parse().map_err(|_| bad("an integer"))?)
                }
                "prescale" => cfg.prescale = Some(value.parse().map_err(|_| bad("true or false"))?),
                "target" => cfg.target = Some(value.to_string()),
                _ => {
                    return Err(CliError::config(format!(
                        "config line {line_no}: unknown key {key:?}"
                    )))
                }
            }
        }
        Ok(cfg)
    }

    /// Loads a configuration file.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Renders the set keys back to `KEY=VALUE` lines; `parse` of the output
    /// reproduces the config exactly.
    #[cfg(test)]
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut push = |key: &str, value: String| {
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        };
        if let Some(v) = &self.input {
            push("input", v.display().to_string());
        }
        if let Some(v) = self.memory {
            push("memory", v.to_string());
        }
        if let Some(v) = self.order {
            push("order", v.to_string());
        }
        if let Some(v) = self.lambda {
            push("lambda", v.to_string());
        }
        if let Some(v) = &self.kernel {
            push("kernel", v.clone());
        }
        if let Some(v) = self.sigma {
            push("sigma", v.to_string());
        }
        if let Some(v) = self.folds {
            push("folds", v.to_string());
        }
        if let Some(v) = self.train_fraction {
            push("train_fraction", v.to_string());
        }
        if let Some(v) = self.seed {
            push("seed", v.to_string());
        }
        if let Some(v) = self.runs {
            push("runs", v.to_string());
        }
        if let Some(v) = self.length {
            push("length", v.to_string());
        }
        if let Some(v) = &self.out {
            push("out", v.display().to_string());
        }
        if let Some(v) = &self.transform {
            push("transform", v.clone());
        }
        if let Some(v) = self.family_size {
            push("family_size", v.to_string());
        }
        if let Some(v) = self.prescale {
            push("prescale", v.to_string());
        }
        if let Some(v) = &self.target {
            push("target", v.clone());
        }
        out
    }

    /// Fills any unset field of `self` from `fallback`. Applied as
    /// `flags.or_from(file)`, giving flags precedence.
    pub fn or_from(mut self, fallback: &RunConfig) -> Self {
        macro_rules! fill {
            ($($field:ident),*) => {
                $(if self.$field.is_none() {
                    self.$field = fallback.$field.clone();
                })*
            };
        }
        fill!(
            input, memory, order, lambda, kernel, sigma, folds, train_fraction, seed, runs,
            length, out, transform, family_size, prescale, target
        );
        self
    }
}
