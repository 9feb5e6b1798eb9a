use std::fs;
use std::path::Path;

use befair_core::befair::BefairConfig;
use befair_core::data::{load_csv, load_csv_pair, PreprocessConfig};
use befair_core::greedy::GreedyConfig;
use befair_core::{Dataset, OracleConfig, PfSolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Everything a run reads from `--config`. A bare preprocessing config is
/// accepted as the `data` section. The top-level `oracle` is used by every
/// method, including the BeFair learner and adversary.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PreprocessConfig>,
    pub oracle: OracleConfig,
    pub hpf_rounds: Option<usize>,
    pub befair: BefairConfig,
    pub pf: PfSolverConfig,
    pub greedy: GreedyConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let mut cfg = if value.get("label_column").is_some() {
            RunConfig {
                data: Some(serde_json::from_value(value)?),
                ..Default::default()
            }
        } else {
            serde_json::from_value::<RunConfig>(value)?
        };
        if let Some(d) = &cfg.data {
            d.validate()?;
        }
        cfg.befair.oracle = cfg.oracle.clone();
        Ok(cfg)
    }

    /// Applies `--seed` everywhere randomness enters; without it the data
    /// section's seed is used.
    pub fn apply_seed(&mut self, seed: Option<u64>) -> u64 {
        let seed = seed.unwrap_or_else(|| self.data.as_ref().map_or(0, |d| d.seed));
        if let Some(d) = &mut self.data {
            d.seed = seed;
        }
        self.oracle.seed = seed;
        self.befair.seed = seed;
        self.befair.oracle = self.oracle.clone();
        seed
    }

    pub fn load_data(&self, data: &Path, test: Option<&Path>) -> CliResult<(Dataset, Dataset)> {
        let pre = self
            .data
            .as_ref()
            .ok_or_else(|| CliError::Usage("--data needs a --config with a preprocessing section".into()))?;
        Ok(match test {
            Some(t) => load_csv_pair(data, t, pre)?,
            None => load_csv(data, pre)?,
        })
    }
}

/// Parses `a:step:b` into the inclusive grid `a, a+step, …, ≤ b`.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad grid `{s}`, expected start:step:end")))?;
    let [a, step, b] = parts[..] else {
        return Err(CliError::Usage(format!("bad grid `{s}`, expected start:step:end")));
    };
    if !(step > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(CliError::Usage(format!("bad grid `{s}`")));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| ((a + k as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Parses a comma-separated list of numbers.
pub fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number `{p}` in `{s}`"))))
        .collect()
}

/// Parses `a..b` (inclusive) or `a..=b`.
pub fn parse_seed_range(s: &str) -> CliResult<std::ops::Range<u64>> {
    let bad = || CliError::Usage(format!("bad seed range `{s}`, expected a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok(a..b + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:0.25:1").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_grid("0:0.05:0.5").unwrap().len(), 11);
        assert!(parse_grid("1:0:2").is_err());
        assert!(parse_grid("1:2").is_err());
        assert_eq!(parse_list("1.0, 1.05").unwrap(), vec![1.0, 1.05]);
        assert_eq!(parse_seed_range("0..199").unwrap(), 0..200);
        assert_eq!(parse_seed_range("3..=3").unwrap(), 3..4);
        assert!(parse_seed_range("5..2").is_err());
    }
}
