use std::path::{Path, PathBuf};

use footstep_core::models::{FeatureVariant, DEFAULT_RIDGE};
use footstep_core::planner::PlannerParams;
use footstep_core::sim::OracleParams;
use footstep_core::terrain::CostmapParams;
use footstep_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::collect::CollectSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub variant: FeatureVariant,
    pub lambda: f64,
    pub split_seed: u64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            variant: FeatureVariant::Full,
            lambda: DEFAULT_RIDGE,
            split_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    /// Built-in ids (`scenario_1`, `2`, `III`, ...) or paths to scenario files.
    pub scenarios: Vec<String>,
    pub horizons: Vec<usize>,
    pub trials: usize,
    /// Root of every per-episode noise seed.
    pub seed: u64,
    pub max_steps: usize,
    /// Log per-replan wall time and honor the planner time budget. Off
    /// makes episode logs byte-reproducible.
    pub record_timing: bool,
    /// Treat any failed episode as an error.
    pub strict: bool,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            scenarios: vec!["scenario_1".into(), "scenario_2".into(), "scenario_3".into()],
            horizons: vec![3, 5, 7],
            trials: 3,
            seed: 1,
            max_steps: 100,
            record_timing: true,
            strict: false,
        }
    }
}

/// Everything one experiment needs. Missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub oracle: OracleParams,
    pub collect: CollectSpec,
    pub train: TrainSpec,
    pub costmap: CostmapParams,
    pub planner: PlannerParams,
    pub run: RunSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            oracle: OracleParams::default(),
            collect: CollectSpec::default(),
            train: TrainSpec::default(),
            costmap: CostmapParams::default(),
            planner: PlannerParams::default(),
            run: RunSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Parse { column: None, message: format!("run config: {e}") })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        RunConfig::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.oracle.validate()?;
        self.collect.validate()?;
        self.planner.validate()?;
        let bad = |m: &str| Err(Error::InvalidParams(m.into()));
        if !(self.train.lambda >= 0.0 && self.train.lambda.is_finite()) {
            return bad("train.lambda must be >= 0");
        }
        if self.costmap.window % 2 == 0 || !(self.costmap.h_thr >= 0.0) {
            return bad("costmap.window must be odd and costmap.h_thr >= 0");
        }
        let run = &self.run;
        if run.scenarios.is_empty() || run.horizons.is_empty() {
            return bad("run.scenarios and run.horizons must be nonempty");
        }
        if run.horizons.contains(&0) {
            return bad("run.horizons must be >= 1");
        }
        if run.trials == 0 || run.max_steps == 0 {
            return bad("run.trials and run.max_steps must be >= 1");
        }
        Ok(())
    }
}

/// Noise seed of one episode. Independent of the horizon, so the horizons
/// of one trial see the same noise stream.
pub fn episode_seed(root: u64, scenario: &str, trial: usize) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in scenario.bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root
        .wrapping_add(h)
        .wrapping_add((trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
