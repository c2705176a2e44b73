//! Experiment configuration files.
//!
//! A config is a JSON object. Every key is optional; missing keys take the
//! defaults of [`ExperimentConfig::default`]. Unknown keys are rejected. A
//! `sweep` key turns the file into a parameter sweep over one axis.

use std::fs;
use std::path::Path;

use privnet_core::channel::{ChannelParams, PairTable};
use privnet_core::control::{uniform_power_grid, ControlParams};
use privnet_core::harq::{CodeRates, HarqConfig};
use privnet_core::sim::{MetricsGranularity, SimConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_nodes: usize,
    /// Main-channel gain means are drawn uniformly from this range.
    pub main_gain_range: [f64; 2],
    /// Cross-channel gain means are drawn uniformly from this range.
    pub cross_gain_range: [f64; 2],
    /// Explicit main gain means, one per node. Overrides the range.
    pub main_gain_means: Option<Vec<f64>>,
    /// Explicit cross gain means for ordered pairs `(j, i)`, `j != i`,
    /// row-major in `j` with the diagonal skipped. Overrides the range.
    pub cross_gain_means: Option<Vec<f64>>,
    pub estimation_sigma: f64,
    pub r_hat_range: [f64; 2],
    pub r_hat_o_range: [f64; 2],
    pub r_hat_p_range: [f64; 2],
    /// Explicit code rates, one per node. Overrides the ranges and makes
    /// every realization identical.
    pub code_rates: Option<Vec<CodeRates>>,
    pub max_retransmissions: u32,
    pub v: f64,
    pub kappa: f64,
    pub a_max: f64,
    pub p_max: f64,
    pub power_grid_points: usize,
    pub admission_grid_resolution: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub flow_control_literal: bool,
    pub quadrature_order: usize,
    pub n_blocks: u64,
    /// Defaults to `n_blocks / 10`.
    pub warmup_blocks: Option<u64>,
    /// Seed of the fading and estimation-error stream.
    pub seed: u64,
    /// Seed of the topology (gain means) and code-rate draws.
    pub scenario_seed: u64,
    /// Index of the code-rate draw.
    pub realization: u64,
    pub metrics_granularity: MetricsGranularity,
    pub sweep: Option<SweepSection>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_nodes: 4,
            main_gain_range: [25.0, 50.0],
            cross_gain_range: [0.5, 1.5],
            main_gain_means: None,
            cross_gain_means: None,
            estimation_sigma: 1.0,
            r_hat_range: [15.0, 25.0],
            r_hat_o_range: [15.0, 25.0],
            r_hat_p_range: [5.0, 10.0],
            code_rates: None,
            max_retransmissions: 50,
            v: 50.0,
            kappa: 5.0,
            a_max: 10.0,
            p_max: 10.0,
            power_grid_points: 64,
            admission_grid_resolution: 10,
            gamma: 0.1,
            alpha: 1.0,
            flow_control_literal: false,
            quadrature_order: 32,
            n_blocks: 100_000,
            warmup_blocks: None,
            seed: 1,
            scenario_seed: 2012,
            realization: 0,
            metrics_granularity: MetricsGranularity::Summary,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Gamma,
    Alpha,
    #[serde(alias = "V")]
    V,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Gamma => "gamma",
            Axis::Alpha => "alpha",
            Axis::V => "V",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub values: Vec<f64>,
    #[serde(default = "one")]
    pub seeds_per_point: u64,
    #[serde(default = "one")]
    pub realizations_per_point: u64,
}

fn one() -> u64 {
    1
}

/// A validated sweep: the base config without its `sweep` key, plus the
/// axis description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ExperimentConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub seeds_per_point: u64,
    pub realizations_per_point: u64,
}

impl SweepSpec {
    pub fn from_config(mut config: ExperimentConfig) -> Result<Self, CliError> {
        let section = config
            .sweep
            .take()
            .ok_or_else(|| CliError::Validation(vec!["config has no sweep section".into()]))?;
        let spec = Self {
            base: config,
            axis: section.axis,
            values: section.values,
            seeds_per_point: section.seeds_per_point,
            realizations_per_point: section.realizations_per_point,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Every `(axis value, realization, seed)` point in output order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &value in &self.values {
            for r in 0..self.realizations_per_point {
                for s in 0..self.seeds_per_point {
                    let mut config = self.base.with_axis(self.axis, value);
                    config.realization = self.base.realization + r;
                    config.seed = self.base.seed + s;
                    out.push(SweepPoint { axis_value: value, config });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        if self.values.is_empty() {
            errs.push("sweep values must be nonempty".to_string());
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            errs.push("sweep values must be strictly increasing".to_string());
        }
        if self.seeds_per_point == 0 {
            errs.push("seeds_per_point must be >= 1".to_string());
        }
        if self.realizations_per_point == 0 {
            errs.push("realizations_per_point must be >= 1".to_string());
        }
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        // seeds only move the fading stream, so one seed per point suffices
        for &value in &self.values {
            for r in 0..self.realizations_per_point {
                let mut config = self.base.with_axis(self.axis, value);
                config.realization = self.base.realization + r;
                if let Err(e) = config.to_sim_config() {
                    for msg in e.messages() {
                        errs.push(format!("{}={value}, realization {}: {msg}", self.axis.name(), config.realization));
                    }
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub config: ExperimentConfig,
}

/// A parsed and validated config file.
#[derive(Debug, Clone, PartialEq)]
pub enum Experiment {
    Run(ExperimentConfig),
    Sweep(SweepSpec),
}

impl ExperimentConfig {
    pub fn with_axis(&self, axis: Axis, value: f64) -> Self {
        let mut c = self.clone();
        match axis {
            Axis::Gamma => c.gamma = value,
            Axis::Alpha => c.alpha = value,
            Axis::V => c.v = value,
        }
        c
    }

    pub fn warmup(&self) -> u64 {
        self.warmup_blocks.unwrap_or(self.n_blocks / 10)
    }

    fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.n_nodes;
        if n == 0 {
            errs.push("n_nodes must be >= 1".to_string());
        }
        let ranges = [
            ("main_gain_range", self.main_gain_range),
            ("cross_gain_range", self.cross_gain_range),
            ("r_hat_range", self.r_hat_range),
            ("r_hat_o_range", self.r_hat_o_range),
            ("r_hat_p_range", self.r_hat_p_range),
        ];
        for (name, [lo, hi]) in ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                errs.push(format!("{name} = [{lo}, {hi}] must satisfy 0 < lo <= hi < inf"));
            }
        }
        if let Some(m) = &self.main_gain_means {
            if m.len() != n {
                errs.push(format!("main_gain_means has {} entries for {n} nodes", m.len()));
            }
        }
        if let Some(c) = &self.cross_gain_means {
            let want = n * n.saturating_sub(1);
            if c.len() != want {
                errs.push(format!("cross_gain_means has {} entries, need {want}", c.len()));
            }
        }
        if let Some(r) = &self.code_rates {
            if r.len() != n {
                errs.push(format!("code_rates has {} entries for {n} nodes", r.len()));
            }
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            errs.push(format!("p_max = {} must be > 0", self.p_max));
        }
        if self.power_grid_points < 2 {
            errs.push(format!("power_grid_points = {} must be >= 2", self.power_grid_points));
        }
        errs
    }

    /// Draws the topology and code rates and assembles the simulator config.
    ///
    /// Gain means come from `scenario_seed` alone, so every realization and
    /// seed shares one topology. Code rates for realization `r` come from
    /// stream `r + 1` of the same seed.
    pub fn to_sim_config(&self) -> Result<SimConfig, CliError> {
        let errs = self.violations();
        if !errs.is_empty() {
            return Err(CliError::Validation(errs));
        }
        let n = self.n_nodes;
        let mut topo = ChaCha8Rng::seed_from_u64(self.scenario_seed);
        let [lo, hi] = self.main_gain_range;
        let drawn_main: Vec<f64> = (0..n).map(|_| topo.gen_range(lo..=hi)).collect();
        let [lo, hi] = self.cross_gain_range;
        let drawn_cross = PairTable::from_fn(n, |_, _| topo.gen_range(lo..=hi));
        let main = self.main_gain_means.clone().unwrap_or(drawn_main);
        let cross = match &self.cross_gain_means {
            Some(v) => PairTable::from_vec(n, v.clone()).map_err(|e| CliError::Validation(vec![e.to_string()]))?,
            None => drawn_cross,
        };

        let rates = match &self.code_rates {
            Some(r) => r.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.scenario_seed);
                rng.set_stream(self.realization + 1);
                (0..n)
                    .map(|_| {
                        let r_hat = rng.gen_range(self.r_hat_range[0]..=self.r_hat_range[1]);
                        let r_hat_o = rng.gen_range(self.r_hat_o_range[0]..=self.r_hat_o_range[1]);
                        let r_hat_p = rng.gen_range(self.r_hat_p_range[0]..=self.r_hat_p_range[1]);
                        CodeRates { r_hat, r_hat_p, r_hat_o }
                    })
                    .collect()
            }
        };

        let config = SimConfig {
            channel: ChannelParams {
                n_nodes: n,
                main_gain_means: main,
                cross_gain_means: cross,
                estimation_sigma: self.estimation_sigma,
                rng_seed: self.seed,
            },
            harq: HarqConfig {
                max_retransmissions: self.max_retransmissions,
                rates,
            },
            control: ControlParams {
                v: self.v,
                kappa: self.kappa,
                a_max: self.a_max,
                power_grid: uniform_power_grid(self.p_max, self.power_grid_points),
                admission_grid_resolution: self.admission_grid_resolution,
                gamma: vec![self.gamma; n],
                alpha: vec![self.alpha; n],
                flow_control_literal: self.flow_control_literal,
                quadrature_order: self.quadrature_order,
            },
            n_blocks: self.n_blocks,
            warmup_blocks: self.warmup(),
            metrics_granularity: self.metrics_granularity,
        };
        // per-node parameters repeat the same message once per node
        let mut errs = config.violations();
        let mut seen = std::collections::HashSet::new();
        errs.retain(|m| seen.insert(m.clone()));
        if errs.is_empty() {
            Ok(config)
        } else {
            Err(CliError::Validation(errs))
        }
    }
}

/// Parses JSON text into a validated experiment.
pub fn parse_config_str(text: &str) -> Result<Experiment, CliError> {
    let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Parse {
        file: None,
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    validate_experiment(config)
}

pub fn validate_experiment(config: ExperimentConfig) -> Result<Experiment, CliError> {
    if config.sweep.is_some() {
        SweepSpec::from_config(config).map(Experiment::Sweep)
    } else {
        config.to_sim_config()?;
        Ok(Experiment::Run(config))
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<Experiment, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text).map_err(|e| e.in_file(path))
}
