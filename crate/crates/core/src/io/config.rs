use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::energies::EnergyConfig;
use crate::error::{invalid, Error, Result};
use crate::optimize::{DriverSettings, MultiviewSettings, OptimizerConfig, OptimizerKind};

/// Settings of one CLI run, stored as flat `key = value` lines.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub resolution: usize,
    pub iterations: usize,
    pub relabel_every: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr_attributes: f64,
    pub clamp_offsets: bool,
    pub pin_boundary: bool,
    pub lambda_recon: f64,
    pub lambda_surf: f64,
    pub lambda_lap: f64,
    pub lambda_del: f64,
    pub lambda_vol: f64,
    pub lambda_amips: f64,
    pub lambda_sm: f64,
    pub lambda_mask: f64,
    pub sample_count_target: usize,
    pub sample_count_pred: usize,
    pub threshold: f64,
    pub distance_samples: usize,
    pub smooth_iterations: usize,
    pub smooth_factor: f64,
    pub cull: bool,
    /// Trace log path; empty for none.
    pub trace_log: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = EnergyConfig::default();
        let o = OptimizerConfig::default();
        let d = DriverSettings::default();
        let m = MultiviewSettings::default();
        Self {
            resolution: 8,
            iterations: 300,
            relabel_every: 20,
            seed: 0,
            optimizer: o.kind,
            lr: o.lr,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            lr_attributes: m.lr_attributes,
            clamp_offsets: d.clamp_offsets,
            pin_boundary: d.pin_boundary,
            lambda_recon: e.lambda_recon,
            lambda_surf: e.lambda_surf,
            lambda_lap: e.lambda_lap,
            lambda_del: e.lambda_del,
            lambda_vol: e.lambda_vol,
            lambda_amips: e.lambda_amips,
            lambda_sm: e.lambda_sm,
            lambda_mask: e.lambda_mask,
            sample_count_target: e.sample_count_target,
            sample_count_pred: e.sample_count_pred,
            threshold: 0.5,
            distance_samples: crate::metrics::DEFAULT_DISTANCE_SAMPLES,
            smooth_iterations: 0,
            smooth_factor: 0.5,
            cull: m.cull,
            trace_log: String::new(),
        }
    }
}

fn value<T: FromStr>(raw: &str, key: &str, line: usize) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        message: format!("invalid value `{raw}` for `{key}`"),
    })
}

fn optimizer_name(kind: OptimizerKind) -> &'static str {
    match kind {
        OptimizerKind::Adam => "adam",
        OptimizerKind::Sgd => "sgd",
    }
}

impl RunConfig {
    pub fn energy(&self) -> EnergyConfig {
        EnergyConfig {
            lambda_recon: self.lambda_recon,
            lambda_surf: self.lambda_surf,
            lambda_lap: self.lambda_lap,
            lambda_del: self.lambda_del,
            lambda_vol: self.lambda_vol,
            lambda_amips: self.lambda_amips,
            lambda_sm: self.lambda_sm,
            lambda_mask: self.lambda_mask,
            sample_count_target: self.sample_count_target,
            sample_count_pred: self.sample_count_pred,
            seed: self.seed,
        }
    }

    pub fn driver(&self) -> DriverSettings {
        DriverSettings {
            optimizer: OptimizerConfig {
                kind: self.optimizer,
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
            },
            clamp_offsets: self.clamp_offsets,
            pin_boundary: self.pin_boundary,
        }
    }

    pub fn multiview(&self) -> MultiviewSettings {
        MultiviewSettings {
            driver: self.driver(),
            lr_attributes: self.lr_attributes,
            cull: self.cull,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.iterations == 0 || self.relabel_every == 0 {
            return Err(invalid("resolution, iterations and relabel_every must be positive"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(invalid(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if self.distance_samples == 0 {
            return Err(invalid("distance_samples must be positive"));
        }
        if !(0.0..1.0).contains(&self.smooth_factor) {
            return Err(invalid("smooth_factor must lie in [0, 1)"));
        }
        if !(self.lr_attributes.is_finite() && self.lr_attributes >= 0.0) {
            return Err(invalid("lr_attributes must be non-negative"));
        }
        if self.trace_log.contains(['#', '\n']) || self.trace_log.trim() != self.trace_log {
            return Err(invalid("trace_log must not contain `#`, newlines or surrounding spaces"));
        }
        self.energy().validate()?;
        self.driver().optimizer.validate()
    }

    fn set(&mut self, key: &str, raw: &str, line: usize) -> Result<()> {
        match key {
            "resolution" => self.resolution = value(raw, key, line)?,
            "iterations" => self.iterations = value(raw, key, line)?,
            "relabel_every" => self.relabel_every = value(raw, key, line)?,
            "seed" => self.seed = value(raw, key, line)?,
            "optimizer" => {
                self.optimizer = match raw {
                    "adam" => OptimizerKind::Adam,
                    "sgd" => OptimizerKind::Sgd,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: format!("optimizer must be `adam` or `sgd`, got `{raw}`"),
                        })
                    }
                }
            }
            "lr" => self.lr = value(raw, key, line)?,
            "beta1" => self.beta1 = value(raw, key, line)?,
            "beta2" => self.beta2 = value(raw, key, line)?,
            "eps" => self.eps = value(raw, key, line)?,
            "lr_attributes" => self.lr_attributes = value(raw, key, line)?,
            "clamp_offsets" => self.clamp_offsets = value(raw, key, line)?,
            "pin_boundary" => self.pin_boundary = value(raw, key, line)?,
            "lambda_recon" => self.lambda_recon = value(raw, key, line)?,
            "lambda_surf" => self.lambda_surf = value(raw, key, line)?,
            "lambda_lap" => self.lambda_lap = value(raw, key, line)?,
            "lambda_del" => self.lambda_del = value(raw, key, line)?,
            "lambda_vol" => self.lambda_vol = value(raw, key, line)?,
            "lambda_amips" => self.lambda_amips = value(raw, key, line)?,
            "lambda_sm" => self.lambda_sm = value(raw, key, line)?,
            "lambda_mask" => self.lambda_mask = value(raw, key, line)?,
            "sample_count_target" => self.sample_count_target = value(raw, key, line)?,
            "sample_count_pred" => self.sample_count_pred = value(raw, key, line)?,
            "threshold" => self.threshold = value(raw, key, line)?,
            "distance_samples" => self.distance_samples = value(raw, key, line)?,
            "smooth_iterations" => self.smooth_iterations = value(raw, key, line)?,
            "smooth_factor" => self.smooth_factor = value(raw, key, line)?,
            "cull" => self.cull = value(raw, key, line)?,
            "trace_log" => self.trace_log = raw.to_string(),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown key `{key}`"),
                })
            }
        }
        Ok(())
    }

    /// Every key, one per line, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("resolution", &self.resolution);
        put("iterations", &self.iterations);
        put("relabel_every", &self.relabel_every);
        put("seed", &self.seed);
        put("optimizer", &optimizer_name(self.optimizer));
        put("lr", &self.lr);
        put("beta1", &self.beta1);
        put("beta2", &self.beta2);
        put("eps", &self.eps);
        put("lr_attributes", &self.lr_attributes);
        put("clamp_offsets", &self.clamp_offsets);
        put("pin_boundary", &self.pin_boundary);
        put("lambda_recon", &self.lambda_recon);
        put("lambda_surf", &self.lambda_surf);
        put("lambda_lap", &self.lambda_lap);
        put("lambda_del", &self.lambda_del);
        put("lambda_vol", &self.lambda_vol);
        put("lambda_amips", &self.lambda_amips);
        put("lambda_sm", &self.lambda_sm);
        put("lambda_mask", &self.lambda_mask);
        put("sample_count_target", &self.sample_count_target);
        put("sample_count_pred", &self.sample_count_pred);
        put("threshold", &self.threshold);
        put("distance_samples", &self.distance_samples);
        put("smooth_iterations", &self.smooth_iterations);
        put("smooth_factor", &self.smooth_factor);
        put("cull", &self.cull);
        put("trace_log", &self.trace_log);
        s
    }
}

/// Parses `key = value` lines over the defaults. `#` starts a comment;
/// unknown and repeated keys are errors.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, val) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse {
                line,
                message: format!("`{key}` set twice"),
            });
        }
        config.set(key, val.trim(), line)?;
    }
    config.validate()?;
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip_and_comments() {
        let c = RunConfig::default();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        let c = parse_config("# run\nresolution = 12  # finer\n\niterations=5\noptimizer = sgd\n").unwrap();
        assert_eq!((c.resolution, c.iterations, c.optimizer), (12, 5, OptimizerKind::Sgd));
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn bad_input_is_rejected() {
        assert!(matches!(parse_config("lamda_lap = 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("\nseed = x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("seed 3\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("seed = 1\nseed = 2\n"), Err(Error::Parse { line: 2, .. })));
        assert!(parse_config("lambda_vol = -1\n").is_err());
        assert!(parse_config("threshold = 1.5\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip(
            resolution in 1usize..64,
            iterations in 1usize..10_000,
            relabel_every in 1usize..100,
            seed in any::<u64>(),
            sgd in any::<bool>(),
            lr in 0.0f64..1.0,
            beta1 in 0.0f64..0.999,
            lambdas in proptest::collection::vec(0.0f64..10.0, 8),
            counts in (1usize..100_000, 1usize..100_000, 1usize..1_000_000),
            threshold in 0.01f64..0.99,
            flags in (any::<bool>(), any::<bool>(), any::<bool>()),
            trace_log in "[a-z0-9_./-]{0,20}",
        ) {
            let c = RunConfig {
                resolution,
                iterations,
                relabel_every,
                seed,
                optimizer: if sgd { OptimizerKind::Sgd } else { OptimizerKind::Adam },
                lr,
                beta1,
                lambda_recon: lambdas[0],
                lambda_surf: lambdas[1],
                lambda_lap: lambdas[2],
                lambda_del: lambdas[3],
                lambda_vol: lambdas[4],
                lambda_amips: lambdas[5],
                lambda_sm: lambdas[6],
                lambda_mask: lambdas[7],
                sample_count_target: counts.0,
                sample_count_pred: counts.1,
                distance_samples: counts.2,
                threshold,
                clamp_offsets: flags.0,
                pin_boundary: flags.1,
                cull: flags.2,
                trace_log,
                ..RunConfig::default()
            };
            prop_assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        }
    }
}
