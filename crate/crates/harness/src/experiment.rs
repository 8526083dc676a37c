//! collect → train → episodes, with every artifact written under one
//! output directory:
//!
//! ```text
//! config.toml            effective configuration
//! dataset.csv            training transitions
//! model.json             fitted models
//! ablation.json          held-out RMSE of every feature variant
//! scenarios/<name>.toml  scenario sources as run
//! episodes/<stem>.jsonl  one record per replan
//! episodes/<stem>.outcome.json
//! report/                see [`crate::report`]
//! ```
//!
//! `<stem>` is `<scenario>_N<horizon>_t<trial>`.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use footstep_core::geometry::Vec2;
use footstep_core::models::{ablation_suite, fit, AblationReport, ModelSet};
use footstep_core::planner::{
    receding_horizon_run, EpisodeConfig, EpisodeOutcome, EpisodeResult, StepRecord,
};
use footstep_core::sim::{read_log_csv, write_log_csv, TransitionLog};
use footstep_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::collect::collect;
use crate::config::{episode_seed, RunConfig, TrainSpec};
use crate::scenarios::{scenario_source, Scene};

pub const CONFIG_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.json";
pub const ABLATION_FILE: &str = "ablation.json";
pub const SCENARIOS_DIR: &str = "scenarios";
pub const EPISODES_DIR: &str = "episodes";
pub const OUTCOME_SUFFIX: &str = ".outcome.json";

/// Per-episode result file; the step records live in the `.jsonl` next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub scenario: String,
    pub horizon: usize,
    pub trial: usize,
    pub seed: u64,
    pub success: bool,
    pub outcome: EpisodeOutcome,
    pub steps: usize,
    pub start: Vec2,
    pub goal: Vec2,
    pub final_com: Vec2,
}

impl EpisodeSummary {
    pub fn stem(&self) -> String {
        episode_stem(&self.scenario, self.horizon, self.trial)
    }
}

pub fn episode_stem(scenario: &str, horizon: usize, trial: usize) -> String {
    format!("{scenario}_N{horizon}_t{trial}")
}

pub fn write_dataset(log: &TransitionLog, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_log_csv(log, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<TransitionLog> {
    read_log_csv(BufReader::new(File::open(path)?))
}

pub fn train(log: &TransitionLog, spec: &TrainSpec) -> Result<ModelSet> {
    fit(log, spec.variant, spec.lambda, spec.split_seed)
}

pub fn ablation(log: &TransitionLog, spec: &TrainSpec) -> Result<AblationReport> {
    ablation_suite(log, spec.lambda, spec.split_seed)
}

pub fn read_model(path: &Path) -> Result<ModelSet> {
    ModelSet::from_json(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        column: None,
        message: format!("{}: {e}", path.display()),
    })
}

/// Loads every scenario named in the run spec. Names must be unique.
pub fn load_scenes(cfg: &RunConfig) -> Result<Vec<Scene>> {
    let mut names = BTreeSet::new();
    let mut scenes = Vec::new();
    for id in &cfg.run.scenarios {
        let scene = Scene::from_source(scenario_source(id)?, cfg.costmap)?;
        if !names.insert(scene.spec.name.clone()) {
            return Err(Error::InvalidScenario(format!(
                "scenario name `{}` appears twice in the run",
                scene.spec.name
            )));
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

/// Runs one episode per (horizon, trial) on a scene.
pub fn run_scene(
    scene: &Scene,
    cfg: &RunConfig,
    models: &ModelSet,
) -> Result<Vec<(EpisodeSummary, EpisodeResult)>> {
    let mut out = Vec::new();
    let start = scene.start_state(&cfg.oracle);
    for &horizon in &cfg.run.horizons {
        for trial in 0..cfg.run.trials {
            let seed = episode_seed(cfg.run.seed, &scene.spec.name, trial);
            let params = footstep_core::planner::PlannerParams {
                horizon,
                ..cfg.planner.clone()
            };
            let ep = EpisodeConfig {
                max_steps: cfg.run.max_steps,
                seed: Some(seed),
                record_timing: cfg.run.record_timing,
            };
            let result = receding_horizon_run(
                &cfg.oracle,
                models,
                &scene.costmap,
                &start,
                scene.spec.goal,
                &params,
                &ep,
            )?;
            let summary = EpisodeSummary {
                scenario: scene.spec.name.clone(),
                horizon,
                trial,
                seed,
                success: result.success,
                outcome: result.outcome.clone(),
                steps: result.steps,
                start: scene.spec.start,
                goal: scene.spec.goal,
                final_com: result.final_state.p_com_w,
            };
            out.push((summary, result));
        }
    }
    Ok(out)
}

pub fn write_episode(dir: &Path, summary: &EpisodeSummary, records: &[StepRecord]) -> Result<()> {
    let stem = summary.stem();
    let mut out = BufWriter::new(File::create(dir.join(format!("{stem}.jsonl")))?);
    for r in records {
        serde_json::to_writer(&mut out, r).expect("serializable");
        out.write_all(b"\n")?;
    }
    out.flush()?;
    write_json(summary, &dir.join(format!("{stem}{OUTCOME_SUFFIX}")))
}

pub fn read_episode_records(path: &Path) -> Result<Vec<StepRecord>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                column: None,
                message: format!("{} line {}: {e}", path.display(), i + 1),
            })
        })
        .collect()
}

fn reset_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path)?;
    }
    fs::create_dir_all(path)?;
    Ok(())
}

/// Collects, trains and writes the dataset, model and ablation files.
/// The model is fitted on the dataset as re-read from disk, so `train` on
/// the same file gives the same model.
pub fn build_models(cfg: &RunConfig, out: &Path) -> Result<ModelSet> {
    let log = collect(&cfg.collect, &cfg.oracle)?;
    let dataset = out.join(DATASET_FILE);
    write_dataset(&log, &dataset)?;
    let log = read_dataset(&dataset)?;
    let models = train(&log, &cfg.train)?;
    fs::write(out.join(MODEL_FILE), models.to_json())?;
    write_json(&ablation(&log, &cfg.train)?, &out.join(ABLATION_FILE))?;
    Ok(models)
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub output_dir: PathBuf,
    pub episodes: Vec<EpisodeSummary>,
}

impl PipelineOutcome {
    pub fn failures(&self) -> usize {
        self.episodes.iter().filter(|e| !e.success).count()
    }
}

/// Full run into `cfg.output_dir`. With `models` given, collection and
/// training are skipped and the models are written as `model.json`.
pub fn run_pipeline(cfg: &RunConfig, models: Option<ModelSet>) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    fs::create_dir_all(&out)?;
    fs::write(out.join(CONFIG_FILE), cfg.to_toml())?;
    let scenes = load_scenes(cfg)?;
    let models = match models {
        Some(m) => {
            fs::write(out.join(MODEL_FILE), m.to_json())?;
            m
        }
        None => build_models(cfg, &out)?,
    };
    let scen_dir = out.join(SCENARIOS_DIR);
    let ep_dir = out.join(EPISODES_DIR);
    reset_dir(&scen_dir)?;
    reset_dir(&ep_dir)?;
    let mut episodes = Vec::new();
    for scene in &scenes {
        fs::write(scen_dir.join(format!("{}.toml", scene.spec.name)), &scene.source)?;
        for (summary, result) in run_scene(scene, cfg, &models)? {
            write_episode(&ep_dir, &summary, &result.records)?;
            episodes.push(summary);
        }
    }
    crate::report::generate(&out)?;
    Ok(PipelineOutcome {
        output_dir: out,
        episodes,
    })
}
