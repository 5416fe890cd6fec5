//! Benchmark configuration: a flat key=value file where every key has a
//! default and unknown keys are errors.
//!
//! Keys (defaults in parentheses):
//!   tasks (1,2,3,4,5,6)        comma-separated fixture ids
//!   modes (sbl,dfl-seq,dfcl-ewc)  comma-separated training modes
//!   seeds (1,2,3)              training seeds
//!   train_days (402)           training days per task
//!   test_days (400)            test days per task
//!   eval_days (0)              cap on test days evaluated; 0 = all
//!   data_seed (7)              synthetic dataset seed
//!   data_csv ()                optional CSV path instead of the generator
//!   horizon (32)               scheduling slots per day
//!   lr (0.001)                 adaptive step size
//!   batch_size (8)
//!   pretrain_epochs (40)       statistical warm-start epochs
//!   epochs (10)                decision-focused epochs
//!   samples_per_epoch (48)
//!   dfl_pool (128)             day pool for the decision-focused phase; 0 = all
//!   early_stop_patience (20)
//!   ewc_scale (1.0)
//!   fisher_samples (24)
//!   memory_truth (32)          ground-truth memory entries per task
//!   memory_noisy (32)          noise-perturbed memory entries per task
//!   memory_noise_frac (0.05)   noise sigma as a fraction of signal std
//!   memory_cap (0)             FIFO cap on the cumulative memory; 0 = none
//!   sched_seed (11)            shared evaluation scheduler seed
//!   transfer_eval (true)       also evaluate the first checkpoint on all tasks
//!   out_dir (runs/latest)      artifact directory

use std::collections::BTreeMap;
use std::path::PathBuf;

use dfcl::{Hyper, TrainMode};

use crate::error::{BenchError, Result};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub tasks: Vec<usize>,
    pub modes: Vec<TrainMode>,
    pub seeds: Vec<u64>,
    pub train_days: usize,
    pub test_days: usize,
    pub eval_days: usize,
    pub data_seed: u64,
    pub data_csv: Option<PathBuf>,
    pub horizon: usize,
    pub hyper: Hyper,
    pub memory_truth: usize,
    pub memory_noisy: usize,
    pub memory_noise_frac: f64,
    pub memory_cap: usize,
    pub sched_seed: u64,
    pub transfer_eval: bool,
    pub out_dir: PathBuf,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            tasks: vec![1, 2, 3, 4, 5, 6],
            modes: vec![TrainMode::Sbl, TrainMode::DflSequential, TrainMode::DfclEwc],
            seeds: vec![1, 2, 3],
            train_days: 402,
            test_days: 400,
            eval_days: 0,
            data_seed: 7,
            data_csv: None,
            horizon: 32,
            hyper: Hyper::default(),
            memory_truth: 32,
            memory_noisy: 32,
            memory_noise_frac: 0.05,
            memory_cap: 0,
            sched_seed: 11,
            transfer_eval: true,
            out_dir: PathBuf::from("runs/latest"),
        }
    }
}

impl BenchConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = BenchConfig::default();
        let mut seen = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(BenchError::Config(format!("line {}: expected key=value", lineno + 1)));
            };
            let key = key.trim();
            let value = value.trim();
            if seen.insert(key.to_string(), lineno).is_some() {
                return Err(BenchError::Config(format!("duplicate key '{key}'")));
            }
            cfg.apply(key, value)?;
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse().map_err(|_| BenchError::Config(format!("bad integer '{v}'")))
        };
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse().map_err(|_| BenchError::Config(format!("bad number '{v}'")))
        };
        match key {
            "tasks" => {
                self.tasks = value
                    .split(',')
                    .map(|s| parse_usize(s.trim()))
                    .collect::<Result<Vec<_>>>()?;
            }
            "modes" => {
                self.modes = value
                    .split(',')
                    .map(|s| {
                        TrainMode::parse(s.trim())
                            .ok_or_else(|| BenchError::Config(format!("unknown mode '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "seeds" => {
                self.seeds = value
                    .split(',')
                    .map(|s| {
                        s.trim().parse::<u64>().map_err(|_| BenchError::Config(format!("bad seed '{s}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
            }
            "train_days" => self.train_days = parse_usize(value)?,
            "test_days" => self.test_days = parse_usize(value)?,
            "eval_days" => self.eval_days = parse_usize(value)?,
            "data_seed" => self.data_seed = value.parse().map_err(|_| BenchError::Config("bad data_seed".into()))?,
            "data_csv" => {
                self.data_csv = if value.is_empty() { None } else { Some(PathBuf::from(value)) }
            }
            "horizon" => self.horizon = parse_usize(value)?,
            "lr" => self.hyper.lr = parse_f64(value)?,
            "batch_size" => self.hyper.batch_size = parse_usize(value)?,
            "pretrain_epochs" => self.hyper.pretrain_epochs = parse_usize(value)?,
            "epochs" => self.hyper.epochs = parse_usize(value)?,
            "samples_per_epoch" => self.hyper.samples_per_epoch = parse_usize(value)?,
            "dfl_pool" => self.hyper.dfl_pool = parse_usize(value)?,
            "early_stop_patience" => self.hyper.early_stop_patience = parse_usize(value)?,
            "ewc_scale" => self.hyper.ewc_scale = parse_f64(value)?,
            "fisher_samples" => self.hyper.fisher_samples = parse_usize(value)?,
            "memory_truth" => self.memory_truth = parse_usize(value)?,
            "memory_noisy" => self.memory_noisy = parse_usize(value)?,
            "memory_noise_frac" => self.memory_noise_frac = parse_f64(value)?,
            "memory_cap" => self.memory_cap = parse_usize(value)?,
            "sched_seed" => self.sched_seed = value.parse().map_err(|_| BenchError::Config("bad sched_seed".into()))?,
            "transfer_eval" => {
                self.transfer_eval = match value {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    _ => return Err(BenchError::Config(format!("bad boolean '{value}'"))),
                }
            }
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => return Err(BenchError::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let cfg = BenchConfig::parse("train_days = 30\ntest_days=20\nmodes = sbl, dfcl-ewc\n").unwrap();
        assert_eq!(cfg.train_days, 30);
        assert_eq!(cfg.test_days, 20);
        assert_eq!(cfg.modes, vec![TrainMode::Sbl, TrainMode::DfclEwc]);
        assert_eq!(cfg.tasks, vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn unknown_key_is_an_error() {
        assert!(BenchConfig::parse("no_such_key=1\n").is_err());
    }

    #[test]
    fn comments_and_blank_lines_ok() {
        let cfg = BenchConfig::parse("# comment\n\nseeds = 5 # trailing\n").unwrap();
        assert_eq!(cfg.seeds, vec![5]);
    }
}
