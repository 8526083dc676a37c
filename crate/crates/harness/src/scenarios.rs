use std::path::Path;

use footstep_core::geometry::RobotState;
use footstep_core::sim::OracleParams;
use footstep_core::terrain::{compute_foot_costmap, scenario_map, CostmapParams, ElevationMap, FootCostmap, ScenarioSpec};
use footstep_core::Result;

pub const BUILTIN: [(&str, &str); 3] = [
    ("scenario_1", include_str!("../scenarios/scenario_1.toml")),
    ("scenario_2", include_str!("../scenarios/scenario_2.toml")),
    ("scenario_3", include_str!("../scenarios/scenario_3.toml")),
];

/// Source text of a built-in scenario (`scenario_1`, `1`, `I`, ...).
pub fn builtin_source(id: &str) -> Option<&'static str> {
    let name = match id {
        "1" | "I" | "i" => "scenario_1",
        "2" | "II" | "ii" => "scenario_2",
        "3" | "III" | "iii" => "scenario_3",
        other => other,
    };
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, src)| *src)
}

/// Source text of a scenario given by built-in id or file path.
pub fn scenario_source(id_or_path: &str) -> std::io::Result<String> {
    match builtin_source(id_or_path) {
        Some(src) => Ok(src.to_string()),
        None => std::fs::read_to_string(Path::new(id_or_path)),
    }
}

/// A scenario ready to run: map, costmap and start state.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: ScenarioSpec,
    pub source: String,
    pub map: ElevationMap,
    pub costmap: FootCostmap,
}

impl Scene {
    pub fn from_source(source: String, costmap: CostmapParams) -> Result<Scene> {
        let spec = ScenarioSpec::from_toml(&source)?;
        let map = scenario_map(&spec)?;
        let costmap = compute_foot_costmap(&map, costmap)?;
        Ok(Scene {
            spec,
            source,
            map,
            costmap,
        })
    }

    /// Standing still at the scenario start in the neutral stance.
    pub fn start_state(&self, oracle: &OracleParams) -> RobotState {
        RobotState::at_rest(self.spec.start, oracle.p_neutral)
    }
}
