use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use footstep_core::models::{FeatureVariant, ModelSet};
use footstep_core::planner::plan;
use footstep_core::terrain::{costmap_csv, map_pgm};
use serde_json::json;

use crate::collect::collect;
use crate::config::RunConfig;
use crate::experiment::{
    ablation, read_dataset, read_model, run_pipeline, train, write_dataset, write_json,
};
use crate::scenarios::{scenario_source, Scene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "footstep", version, about = "Footstep planning experiments with learned motion models")]
pub struct Cli {
    /// Run configuration (TOML). Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MapFormat {
    Pgm,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Drive the simulator through the command schedule and write a dataset.
    Collect {
        #[arg(long, default_value = "dataset.csv")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the three motion models on a dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        variant: Option<FeatureVariant>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        split_seed: Option<u64>,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Also write the held-out RMSE of every variant here.
        #[arg(long)]
        ablation: Option<PathBuf>,
    },
    /// Plan once from a scenario's start state and print the plan.
    Plan {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        horizon: Option<usize>,
    },
    /// Run receding-horizon episodes and write logs and the report.
    Run {
        /// Use these models instead of collecting and training.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long = "horizon")]
        horizons: Vec<usize>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_steps: Option<usize>,
        /// Exit with status 3 if any episode fails.
        #[arg(long)]
        strict: bool,
        /// Do not record timing; logs become byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Regenerate the report from the logs in an output directory.
    Report {
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a scenario's elevation map and costmap.
    ExportMap {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value = "pgm")]
        format: MapFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Data(anyhow::Error),
    Episodes(usize),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Data(e.into())
    }
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run_cli<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Data(e)) => {
            let _ = writeln!(stderr, "error: {e:#}");
            EXIT_DATA
        }
        Err(Failure::Episodes(n)) => {
            let _ = writeln!(stderr, "error: {n} episode(s) failed");
            EXIT_FAILED
        }
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write) -> Result<(), Failure> {
    let mut cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Collect { out, seed } => {
            if let Some(s) = seed {
                cfg.collect.seed = s;
            }
            cfg.validate()?;
            let log = collect(&cfg.collect, &cfg.oracle)?;
            write_dataset(&log, &out)?;
            writeln!(stdout, "wrote {} transitions to {}", log.len(), out.display())?;
        }
        Command::Train {
            data,
            variant,
            lambda,
            split_seed,
            out,
            ablation: ablation_out,
        } => {
            let t = &mut cfg.train;
            t.variant = variant.unwrap_or(t.variant);
            t.lambda = lambda.unwrap_or(t.lambda);
            t.split_seed = split_seed.unwrap_or(t.split_seed);
            cfg.validate()?;
            let log = read_dataset(&data)?;
            let models = train(&log, &cfg.train)?;
            fs::write(&out, models.to_json())?;
            write_train_summary(stdout, &models)?;
            if let Some(path) = ablation_out {
                write_json(&ablation(&log, &cfg.train)?, &path)?;
            }
        }
        Command::Plan {
            model,
            scenario,
            horizon,
        } => {
            if let Some(n) = horizon {
                cfg.planner.horizon = n;
            }
            cfg.validate()?;
            let models = read_model(&model)?;
            let scene = Scene::from_source(scenario_source(&scenario)?, cfg.costmap)?;
            let start = scene.start_state(&cfg.oracle);
            let p = plan(&start, scene.spec.goal, &models, &scene.costmap, &cfg.planner)?;
            let value = json!({
                "scenario": scene.spec.name,
                "terminal": p.terminal,
                "cost": p.cost,
                "commands": p.commands,
                "steps": p.steps,
                "stats": p.stats,
            });
            writeln!(stdout, "{}", serde_json::to_string_pretty(&value)?)?;
        }
        Command::Run {
            model,
            output_dir,
            scenarios,
            horizons,
            trials,
            seed,
            max_steps,
            strict,
            no_timing,
        } => {
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let run = &mut cfg.run;
            if !scenarios.is_empty() {
                run.scenarios = scenarios;
            }
            if !horizons.is_empty() {
                run.horizons = horizons;
            }
            run.trials = trials.unwrap_or(run.trials);
            run.seed = seed.unwrap_or(run.seed);
            run.max_steps = max_steps.unwrap_or(run.max_steps);
            run.strict |= strict;
            run.record_timing &= !no_timing;
            cfg.validate()?;
            let models: Option<ModelSet> = model.as_deref().map(read_model).transpose()?;
            let outcome = run_pipeline(&cfg, models)?;
            let text = fs::read_to_string(outcome.output_dir.join("report/scenarios.txt"))?;
            write!(stdout, "{text}")?;
            let failed = outcome.failures();
            if failed > 0 && cfg.run.strict {
                return Err(Failure::Episodes(failed));
            }
        }
        Command::Report { output_dir } => {
            let dir = output_dir.unwrap_or(cfg.output_dir);
            crate::report::generate(&dir)?;
            let text = fs::read_to_string(dir.join("report/scenarios.txt"))?;
            write!(stdout, "{text}")?;
        }
        Command::ExportMap {
            scenario,
            format,
            out,
        } => {
            cfg.validate()?;
            let scene = Scene::from_source(scenario_source(&scenario)?, cfg.costmap)?;
            let text = match format {
                MapFormat::Pgm => map_pgm(&scene.map, Some(&scene.costmap), &[]),
                MapFormat::Csv => costmap_csv(&scene.map, &scene.costmap),
            };
            match out {
                Some(path) => fs::write(path, text)?,
                None => stdout.write_all(text.as_bytes())?,
            }
        }
    }
    Ok(())
}

fn write_train_summary(out: &mut dyn Write, m: &ModelSet) -> std::io::Result<()> {
    let meta = &m.meta;
    writeln!(
        out,
        "{} model, {} samples ({} train / {} test), lambda {}",
        m.variant, meta.n_samples, meta.n_train, meta.n_test, meta.lambda
    )?;
    writeln!(out, "{:<4} {:>12} {:>12}", "", "train RMSE", "test RMSE")?;
    for (name, tr, te) in [
        ("FDM", meta.train.fdm, meta.test.fdm),
        ("CDM", meta.train.cdm, meta.test.cdm),
        ("CVM", meta.train.cvm, meta.test.cvm),
    ] {
        writeln!(out, "{name:<4} {:>12.6e} {:>12.6e}", tr.rmse, te.rmse)?;
    }
    Ok(())
}
