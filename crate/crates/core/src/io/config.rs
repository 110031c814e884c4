use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::abs::{LossConfig, OptimizerConfig};
use crate::classes::ClassGrouping;
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::masking::{DEFAULT_MASK_ALPHA, DEFAULT_MASK_EPSILON};
use crate::nmfd::{NmfdCase, NmfdCaseId};
use crate::signal::StftConfig;

/// Settings read from a `section.key = value` file. Every key is optional.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub stft: StftConfig,
    pub loss: LossConfig,
    pub solver: OptimizerConfig,
    pub nmfd_case: NmfdCaseId,
    pub mask_alpha: f64,
    pub mask_epsilon: f64,
    pub eval: EvalConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::analysis(),
            loss: LossConfig::default(),
            solver: OptimizerConfig::default(),
            nmfd_case: NmfdCaseId::OneA,
            mask_alpha: DEFAULT_MASK_ALPHA,
            mask_epsilon: DEFAULT_MASK_EPSILON,
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

pub const CONFIG_KEYS: [&str; 12] = [
    "stft.window",
    "stft.hop",
    "loss.scales",
    "solver.steps",
    "solver.lr",
    "solver.clip",
    "nmfd.case",
    "masking.alpha",
    "masking.epsilon",
    "eval.grouping",
    "eval.tolerance_ms",
    "seed",
];

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, found `{line}`")))?;
            cfg.set(key.trim(), value.trim()).map_err(|e| match e {
                Error::Config(m) | Error::InvalidArgument(m) => err(m),
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
        }
        match key {
            "stft.window" => self.stft.window_size = num(key, value)?,
            "stft.hop" => self.stft.hop_size = num(key, value)?,
            "loss.scales" => {
                self.loss.scales = value
                    .trim_start_matches('[')
                    .trim_end_matches(']')
                    .split(',')
                    .map(|s| num(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "solver.steps" => self.solver.steps = num(key, value)?,
            "solver.lr" => self.solver.learning_rate = num(key, value)?,
            "solver.clip" => self.solver.grad_clip_norm = num(key, value)?,
            "nmfd.case" => self.nmfd_case = value.trim_matches('"').parse()?,
            "masking.alpha" => self.mask_alpha = num(key, value)?,
            "masking.epsilon" => self.mask_epsilon = num(key, value)?,
            "eval.grouping" => self.eval.grouping = value.parse()?,
            "eval.tolerance_ms" => self.eval.tolerance_secs = num::<f64>(key, value)? / 1000.0,
            "seed" => {
                self.seed = num(key, value)?;
                self.solver.seed = self.seed;
            }
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if !self.stft.is_cola() {
            return Err(Error::Config("stft.hop must not exceed half of stft.window".into()));
        }
        self.loss.validate()?;
        self.solver.validate()?;
        if !(self.mask_alpha > 0.0) || !(self.mask_epsilon > 0.0) {
            return Err(Error::Config("masking.alpha and masking.epsilon must be positive".into()));
        }
        if !(self.eval.tolerance_secs > 0.0) {
            return Err(Error::Config("eval.tolerance_ms must be positive".into()));
        }
        Ok(())
    }

    pub fn nmfd_case(&self) -> NmfdCase {
        NmfdCase {
            seed: self.seed,
            ..NmfdCase::new(self.nmfd_case)
        }
    }

    /// Canonical text form; parsing it yields `self`.
    pub fn to_text(&self) -> String {
        let grouping = match self.eval.grouping {
            ClassGrouping::Nine => 9,
            ClassGrouping::Five => 5,
        };
        let scales: Vec<String> = self.loss.scales.iter().map(usize::to_string).collect();
        let mut s = String::new();
        let _ = writeln!(s, "stft.window = {}", self.stft.window_size);
        let _ = writeln!(s, "stft.hop = {}", self.stft.hop_size);
        let _ = writeln!(s, "loss.scales = {}", scales.join(","));
        let _ = writeln!(s, "solver.steps = {}", self.solver.steps);
        let _ = writeln!(s, "solver.lr = {}", self.solver.learning_rate);
        let _ = writeln!(s, "solver.clip = {}", self.solver.grad_clip_norm);
        let _ = writeln!(s, "nmfd.case = {}", self.nmfd_case);
        let _ = writeln!(s, "masking.alpha = {}", self.mask_alpha);
        let _ = writeln!(s, "masking.epsilon = {}", self.mask_epsilon);
        let _ = writeln!(s, "eval.grouping = {grouping}");
        let _ = writeln!(s, "eval.tolerance_ms = {}", self.eval.tolerance_secs * 1000.0);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}
