//! Run configuration: model parameters, initial-asset calibration, and run
//! options, read from a flat TOML file of `key = value` lines.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ModelParams, WeightInit};
use crate::neural::PretrainConfig;
use crate::sim::{ScfDistribution, DEFAULT_QUANTILES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Mpc,
    Scarring,
    Extreme,
    Pessimism,
    Longrun,
    All,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "mpc" => Experiment::Mpc,
            "scarring" => Experiment::Scarring,
            "extreme" => Experiment::Extreme,
            "pessimism" => Experiment::Pessimism,
            "longrun" => Experiment::Longrun,
            "all" => Experiment::All,
            _ => return Err(Error::Config(format!("unknown experiment `{s}`"))),
        })
    }

    pub fn includes(self, other: Experiment) -> bool {
        self == Experiment::All || self == other
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ModelParams,
    /// Initial assets at the 12.5/37.5/62.5/87.5/95th percentiles.
    pub scf_quantiles: [f64; 5],
    pub experiment: Experiment,
    pub seeds: Vec<u64>,
    pub classify_at: Vec<usize>,
    pub use_smoothed: bool,
    pub literal_update_sign: bool,
    pub all_employed: bool,
    pub pessimism_factor: f64,
    pub clustered_errors: bool,
    pub long_run_periods: usize,
    pub pretrain_learning_rate: f64,
    pub pretrain_patience: usize,
    pub pretrain_max_epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let pc = PretrainConfig::default();
        RunConfig {
            params: ModelParams::default(),
            scf_quantiles: DEFAULT_QUANTILES,
            experiment: Experiment::All,
            seeds: (1..=10).collect(),
            classify_at: (0..=40).step_by(5).collect(),
            use_smoothed: false,
            literal_update_sign: false,
            all_employed: false,
            pessimism_factor: 1.5,
            clustered_errors: false,
            long_run_periods: 240,
            pretrain_learning_rate: pc.learning_rate,
            pretrain_patience: pc.patience,
            pretrain_max_epochs: pc.max_epochs,
        }
    }
}

/// Parse `A..B` (inclusive) or a single integer.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed range `{s}`, expected N or A..B"));
    match s.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("`{key}` must be a number"))),
    }
}

fn as_usize(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::Config(format!("`{key}` must be a nonnegative integer"))),
    }
}

fn as_bool(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::Config(format!("`{key}` must be true or false")))
}

fn as_str<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| Error::Config(format!("`{key}` must be a string")))
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut c = RunConfig::default();
        for (key, v) in &table {
            let k = key.as_str();
            let p = &mut c.params;
            match k {
                "beta" => p.beta = as_f64(k, v)?,
                "gross_return" => p.gross_return = as_f64(k, v)?,
                "income_employed" => p.income_employed = as_f64(k, v)?,
                "income_unemployed" => p.income_unemployed = as_f64(k, v)?,
                "p_ee" => p.transition.p_ee = as_f64(k, v)?,
                "p_eu" => p.transition.p_eu = as_f64(k, v)?,
                "p_ue" => p.transition.p_ue = as_f64(k, v)?,
                "p_uu" => p.transition.p_uu = as_f64(k, v)?,
                "a_min" => p.a_min = as_f64(k, v)?,
                "a_max" => p.a_max = as_f64(k, v)?,
                "savings_grid_n" => p.savings_grid_n = as_usize(k, v)?,
                "train_grid_n" => p.train_grid_n = as_usize(k, v)?,
                "transfer" => p.transfer = as_f64(k, v)?,
                "n_agents" => p.n_agents = as_usize(k, v)?,
                "n_periods" => p.n_periods = as_usize(k, v)?,
                "learning_rate" => p.learning_rate = as_f64(k, v)?,
                "lr_decay_exponent" => p.lr_decay_exponent = as_f64(k, v)?,
                "poly_degree" => p.poly_degree = as_usize(k, v)?,
                "poly_eval_n" => p.poly_eval_n = as_usize(k, v)?,
                "hidden_dim" => p.hidden_dim = as_usize(k, v)?,
                "hidden_layers" => p.hidden_layers = as_usize(k, v)?,
                "pretrain_tolerance" => p.pretrain_tolerance = as_f64(k, v)?,
                "weight_init" => {
                    p.weight_init = match as_str(k, v)? {
                        "he" => WeightInit::He,
                        "sqrt2" => WeightInit::Sqrt2,
                        other => return Err(Error::Config(format!("unknown weight_init `{other}`"))),
                    }
                }
                "seed" => p.seed = as_usize(k, v)? as u64,
                "scf_q12_5" => c.scf_quantiles[0] = as_f64(k, v)?,
                "scf_q37_5" => c.scf_quantiles[1] = as_f64(k, v)?,
                "scf_q62_5" => c.scf_quantiles[2] = as_f64(k, v)?,
                "scf_q87_5" => c.scf_quantiles[3] = as_f64(k, v)?,
                "scf_q95" => c.scf_quantiles[4] = as_f64(k, v)?,
                "experiment" => c.experiment = Experiment::parse(as_str(k, v)?)?,
                "seeds" => c.seeds = parse_seeds(as_str(k, v)?)?,
                "classify_at" => {
                    let arr = v
                        .as_array()
                        .ok_or_else(|| Error::Config("`classify_at` must be an array".into()))?;
                    c.classify_at = arr.iter().map(|x| as_usize(k, x)).collect::<Result<_>>()?;
                }
                "use_smoothed" => c.use_smoothed = as_bool(k, v)?,
                "literal_update_sign" => c.literal_update_sign = as_bool(k, v)?,
                "all_employed" => c.all_employed = as_bool(k, v)?,
                "pessimism_factor" => c.pessimism_factor = as_f64(k, v)?,
                "clustered_errors" => c.clustered_errors = as_bool(k, v)?,
                "long_run_periods" => c.long_run_periods = as_usize(k, v)?,
                "pretrain_learning_rate" => c.pretrain_learning_rate = as_f64(k, v)?,
                "pretrain_patience" => c.pretrain_patience = as_usize(k, v)?,
                "pretrain_max_epochs" => c.pretrain_max_epochs = as_usize(k, v)?,
                _ => return Err(Error::Config(format!("unknown key `{k}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Normalize the transition matrix and check every option.
    pub fn validate(&mut self) -> Result<()> {
        self.params = self.params.validate()?;
        ScfDistribution::from_quantiles(self.scf_quantiles)?;
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if !(self.pessimism_factor > 0.0) {
            return Err(Error::Config("pessimism_factor must be positive".into()));
        }
        if self.pretrain_learning_rate <= 0.0 || self.pretrain_patience == 0 {
            return Err(Error::Config("pretraining step size and patience must be positive".into()));
        }
        Ok(())
    }

    pub fn scf(&self) -> ScfDistribution {
        ScfDistribution::from_quantiles(self.scf_quantiles).expect("validated")
    }

    pub fn pretrain_config(&self) -> PretrainConfig {
        PretrainConfig {
            learning_rate: self.pretrain_learning_rate,
            patience: self.pretrain_patience,
            max_epochs: self.pretrain_max_epochs,
            ..PretrainConfig::default()
        }
    }

    /// The snapshot echoed into output headers.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_file_matches_defaults() {
        let text = include_str!("../../../config/default.toml");
        let mut d = RunConfig::default();
        d.validate().unwrap();
        assert_eq!(RunConfig::from_toml_str(text).unwrap(), d);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c.params.beta, ModelParams::default().beta);
        assert_eq!(c.seeds.len(), 10);
        assert_eq!(c.classify_at, vec![0, 5, 10, 15, 20, 25, 30, 35, 40]);
    }

    #[test]
    fn keys_are_applied() {
        let c = RunConfig::from_toml_str(
            "beta = 0.95\nn_agents = 7\nseeds = \"3..5\"\nexperiment = \"extreme\"\nscf_q95 = 9.0\nclassify_at = [0, 10]\nweight_init = \"sqrt2\"\n",
        )
        .unwrap();
        assert_eq!(c.params.beta, 0.95);
        assert_eq!(c.params.n_agents, 7);
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.experiment, Experiment::Extreme);
        assert_eq!(c.scf_quantiles[4], 9.0);
        assert_eq!(c.classify_at, vec![0, 10]);
        assert_eq!(c.params.weight_init, WeightInit::Sqrt2);
    }

    #[test]
    fn unknown_and_invalid() {
        assert!(matches!(RunConfig::from_toml_str("bta = 0.9"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("beta = \"x\""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("beta = 0.999"), Err(Error::BetaRViolation { .. })));
        assert!(RunConfig::from_toml_str("scf_q95 = 1.0").is_err());
        assert!(parse_seeds("5..2").is_err());
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
    }
}
