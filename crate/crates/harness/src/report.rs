//! Tables and overlays computed from the files an experiment leaves behind.
//!
//! `report/` holds `ablation.txt`/`.csv`, `scenarios.txt`/`.csv`, `mae.csv`,
//! `metrics.json` and `overlays/<stem>.pgm`. Rows are ordered by scenario
//! name, then horizon; ablation rows follow Full, NoHistory, NoFeet,
//! Quadratic.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use footstep_core::models::{AblationReport, ModelErrors};
use footstep_core::numfmt::sig9;
use footstep_core::planner::{EpisodeOutcome, StepRecord};
use footstep_core::sim::swing_touchdowns;
use footstep_core::terrain::{map_pgm, PgmMark};
use footstep_core::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::experiment::{
    read_episode_records, read_json, read_model, EpisodeSummary, ABLATION_FILE, CONFIG_FILE,
    EPISODES_DIR, MODEL_FILE, OUTCOME_SUFFIX, SCENARIOS_DIR,
};
use crate::scenarios::Scene;

pub const REPORT_DIR: &str = "report";

const FOOTHOLD_GRAY: u8 = 90;
const COM_GRAY: u8 = 160;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeStats {
    pub n: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

impl TimeStats {
    /// Median of the two middle samples for even counts; p99 by nearest rank.
    pub fn from_seconds(samples: &[f64]) -> Option<TimeStats> {
        if samples.is_empty() {
            return None;
        }
        let mut ms: Vec<f64> = samples.iter().map(|s| s * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let n = ms.len();
        let median = if n % 2 == 1 {
            ms[n / 2]
        } else {
            0.5 * (ms[n / 2 - 1] + ms[n / 2])
        };
        let rank = ((0.99 * n as f64).ceil() as usize).clamp(1, n);
        Some(TimeStats {
            n,
            mean_ms: ms.iter().sum::<f64>() / n as f64,
            median_ms: median,
            p99_ms: ms[rank - 1],
            max_ms: ms[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonCell {
    pub scenario: String,
    pub horizon: usize,
    pub episodes: usize,
    pub successes: usize,
    pub success_rate_pct: f64,
    pub unsafe_footholds: usize,
    pub plan_time: Option<TimeStats>,
    /// Mean over trials of the summed first-step costs.
    pub cumulative_cost: f64,
    pub steps: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineMae {
    pub fdm: f64,
    pub cdm: f64,
    pub cvm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMae {
    pub scenario: String,
    pub replans: usize,
    pub mae: OnlineMae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ablation: Option<AblationReport>,
    /// Held-out errors of the models the episodes ran with.
    pub model_test: Option<ModelErrors>,
    pub cells: Vec<HorizonCell>,
    pub mae: Vec<ScenarioMae>,
}

/// Cumulative first-step cost of one episode log.
pub fn cumulative_cost(records: &[StepRecord]) -> f64 {
    records.iter().map(|r| r.first_step_cost).sum()
}

fn mean_abs(pair: [f64; 2]) -> f64 {
    0.5 * (pair[0] + pair[1])
}

pub struct LoadedEpisode {
    pub summary: EpisodeSummary,
    pub records: Vec<StepRecord>,
}

/// Every episode under `dir/episodes`, sorted by scenario, horizon, trial.
pub fn load_episodes(dir: &Path) -> Result<Vec<LoadedEpisode>> {
    let ep_dir = dir.join(EPISODES_DIR);
    let mut out = Vec::new();
    for entry in fs::read_dir(&ep_dir)? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(stem) = name.strip_suffix(OUTCOME_SUFFIX) {
            let summary: EpisodeSummary = read_json(&path)?;
            let records = read_episode_records(&ep_dir.join(format!("{stem}.jsonl")))?;
            out.push(LoadedEpisode { summary, records });
        }
    }
    if out.is_empty() {
        return Err(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("no episode logs under {}", ep_dir.display()),
        )
        .into());
    }
    out.sort_by(|a, b| {
        let k = |e: &LoadedEpisode| (e.summary.scenario.clone(), e.summary.horizon, e.summary.trial);
        k(a).cmp(&k(b))
    });
    Ok(out)
}

pub fn metrics(dir: &Path, episodes: &[LoadedEpisode]) -> Result<MetricsReport> {
    let ablation_path = dir.join(ABLATION_FILE);
    let ablation = if ablation_path.exists() {
        Some(read_json::<AblationReport>(&ablation_path)?)
    } else {
        None
    };
    let model_path = dir.join(MODEL_FILE);
    let model_test = if model_path.exists() {
        Some(read_model(&model_path)?.meta.test)
    } else {
        None
    };

    let mut by_cell: BTreeMap<(String, usize), Vec<&LoadedEpisode>> = BTreeMap::new();
    let mut by_scenario: BTreeMap<String, Vec<&LoadedEpisode>> = BTreeMap::new();
    for e in episodes {
        by_cell
            .entry((e.summary.scenario.clone(), e.summary.horizon))
            .or_default()
            .push(e);
        by_scenario.entry(e.summary.scenario.clone()).or_default().push(e);
    }

    let cells = by_cell
        .into_iter()
        .map(|((scenario, horizon), eps)| {
            let n = eps.len();
            let successes = eps.iter().filter(|e| e.summary.success).count();
            let unsafe_footholds = eps
                .iter()
                .filter(|e| matches!(e.summary.outcome, EpisodeOutcome::UnsafeFoothold { .. }))
                .count();
            let times: Vec<f64> = eps
                .iter()
                .flat_map(|e| e.records.iter().filter_map(|r| r.plan_wall_time_s))
                .collect();
            HorizonCell {
                scenario,
                horizon,
                episodes: n,
                successes,
                success_rate_pct: 100.0 * successes as f64 / n as f64,
                unsafe_footholds,
                plan_time: TimeStats::from_seconds(&times),
                cumulative_cost: eps.iter().map(|e| cumulative_cost(&e.records)).sum::<f64>() / n as f64,
                steps: eps.iter().map(|e| e.records.len() as f64).sum::<f64>() / n as f64,
            }
        })
        .collect();

    let mae = by_scenario
        .into_iter()
        .map(|(scenario, eps)| {
            let mut sum = OnlineMae::default();
            let mut n = 0usize;
            for r in eps.iter().flat_map(|e| &e.records) {
                let m = &r.model_abs_errors;
                sum.fdm += mean_abs(m.fdm);
                sum.cdm += mean_abs(m.cdm);
                sum.cvm += mean_abs(m.cvm);
                n += 1;
            }
            let d = n.max(1) as f64;
            ScenarioMae {
                scenario,
                replans: n,
                mae: OnlineMae {
                    fdm: sum.fdm / d,
                    cdm: sum.cdm / d,
                    cvm: sum.cvm / d,
                },
            }
        })
        .collect();

    Ok(MetricsReport {
        ablation,
        model_test,
        cells,
        mae,
    })
}

fn fixed(v: f64, digits: usize) -> String {
    format!("{v:.digits$}")
}

pub fn ablation_text(a: &AblationReport) -> String {
    let mut s = format!(
        "Held-out test RMSE (split seed {}, lambda {})\n",
        a.split_seed,
        sig9(a.lambda)
    );
    let _ = writeln!(s, "{:<10} {:>12} {:>12} {:>12}", "variant", "FDM [m]", "CDM [m]", "CVM [m/s]");
    for r in &a.rows {
        let _ = writeln!(
            s,
            "{:<10} {:>12} {:>12} {:>12}",
            r.variant.name(),
            fixed(r.test.fdm.rmse, 6),
            fixed(r.test.cdm.rmse, 6),
            fixed(r.test.cvm.rmse, 6)
        );
    }
    s
}

pub fn ablation_csv(a: &AblationReport) -> String {
    let mut s = String::from("variant,fdm_rmse,cdm_rmse,cvm_rmse,fdm_mae,cdm_mae,cvm_mae\n");
    for r in &a.rows {
        let t = &r.test;
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.variant.name(),
            sig9(t.fdm.rmse),
            sig9(t.cdm.rmse),
            sig9(t.cvm.rmse),
            sig9(t.fdm.mae),
            sig9(t.cdm.mae),
            sig9(t.cvm.mae)
        );
    }
    s
}

pub fn scenarios_text(m: &MetricsReport) -> String {
    let mut s = String::from("Scenario results (mean over trials)\n");
    let _ = writeln!(
        s,
        "{:<12} {:>2} {:>12} {:>26} {:>10} {:>6}",
        "scenario", "N", "success", "plan ms mean/median/p99", "cum. cost", "steps"
    );
    for c in &m.cells {
        let time = match &c.plan_time {
            Some(t) => format!("{}/{}/{}", fixed(t.mean_ms, 3), fixed(t.median_ms, 3), fixed(t.p99_ms, 3)),
            None => "n/a".into(),
        };
        let _ = writeln!(
            s,
            "{:<12} {:>2} {:>12} {:>26} {:>10} {:>6}",
            c.scenario,
            c.horizon,
            format!("{}/{} {}%", c.successes, c.episodes, fixed(c.success_rate_pct, 0)),
            time,
            fixed(c.cumulative_cost, 2),
            fixed(c.steps, 1)
        );
    }
    s.push_str("\nOnline first-step MAE\n");
    let _ = writeln!(s, "{:<12} {:>12} {:>12} {:>12}", "scenario", "FDM [m]", "CDM [m]", "CVM [m/s]");
    for r in &m.mae {
        let _ = writeln!(
            s,
            "{:<12} {:>12} {:>12} {:>12}",
            r.scenario,
            fixed(r.mae.fdm, 6),
            fixed(r.mae.cdm, 6),
            fixed(r.mae.cvm, 6)
        );
    }
    if let Some(t) = &m.model_test {
        let _ = writeln!(
            s,
            "{:<12} {:>12} {:>12} {:>12}",
            "test RMSE",
            fixed(t.fdm.rmse, 6),
            fixed(t.cdm.rmse, 6),
            fixed(t.cvm.rmse, 6)
        );
    }
    s
}

pub fn scenarios_csv(m: &MetricsReport) -> String {
    let mut s = String::from(
        "scenario,horizon,episodes,successes,success_rate_pct,unsafe_footholds,plan_ms_mean,plan_ms_median,plan_ms_p99,plan_ms_max,cumulative_cost,steps\n",
    );
    for c in &m.cells {
        let t = |f: fn(&TimeStats) -> f64| c.plan_time.as_ref().map(|t| sig9(f(t))).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            c.scenario,
            c.horizon,
            c.episodes,
            c.successes,
            sig9(c.success_rate_pct),
            c.unsafe_footholds,
            t(|t| t.mean_ms),
            t(|t| t.median_ms),
            t(|t| t.p99_ms),
            t(|t| t.max_ms),
            sig9(c.cumulative_cost),
            sig9(c.steps)
        );
    }
    s
}

pub fn mae_csv(m: &MetricsReport) -> String {
    let mut s = String::from("scenario,replans,fdm_mae,cdm_mae,cvm_mae\n");
    for r in &m.mae {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.scenario,
            r.replans,
            sig9(r.mae.fdm),
            sig9(r.mae.cdm),
            sig9(r.mae.cvm)
        );
    }
    s
}

/// Costmap with the realized footholds and CoM path of one episode.
pub fn overlay(scene: &Scene, records: &[StepRecord]) -> String {
    let mut marks = Vec::new();
    for r in records {
        marks.push(PgmMark {
            p: r.state.p_com_w,
            gray: COM_GRAY,
            radius: 0,
        });
        for (_, p) in swing_touchdowns(&r.state.with_command(r.command), &r.realized_transition) {
            marks.push(PgmMark {
                p,
                gray: FOOTHOLD_GRAY,
                radius: 1,
            });
        }
    }
    map_pgm(&scene.map, Some(&scene.costmap), &marks)
}

/// Recomputes every table from the logs in `dir` and writes `dir/report`.
pub fn generate(dir: &Path) -> Result<MetricsReport> {
    let episodes = load_episodes(dir)?;
    let m = metrics(dir, &episodes)?;
    let cfg = RunConfig::load(&dir.join(CONFIG_FILE))?;

    let out = dir.join(REPORT_DIR);
    if out.exists() {
        fs::remove_dir_all(&out)?;
    }
    let overlays = out.join("overlays");
    fs::create_dir_all(&overlays)?;
    if let Some(a) = &m.ablation {
        fs::write(out.join("ablation.txt"), ablation_text(a))?;
        fs::write(out.join("ablation.csv"), ablation_csv(a))?;
    }
    fs::write(out.join("scenarios.txt"), scenarios_text(&m))?;
    fs::write(out.join("scenarios.csv"), scenarios_csv(&m))?;
    fs::write(out.join("mae.csv"), mae_csv(&m))?;
    crate::experiment::write_json(&m, &out.join("metrics.json"))?;

    let mut scenes: BTreeMap<String, Scene> = BTreeMap::new();
    for e in &episodes {
        let name = &e.summary.scenario;
        if !scenes.contains_key(name) {
            let src = fs::read_to_string(dir.join(SCENARIOS_DIR).join(format!("{name}.toml")))?;
            scenes.insert(name.clone(), Scene::from_source(src, cfg.costmap)?);
        }
        let pgm = overlay(&scenes[name], &e.records);
        fs::write(overlays.join(format!("{}.pgm", e.summary.stem())), pgm)?;
    }
    Ok(m)
}
