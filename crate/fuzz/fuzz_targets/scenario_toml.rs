#![no_main]

use footstep_core::terrain::{compute_foot_costmap, scenario_map, CostmapParams, ScenarioSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(spec) = ScenarioSpec::from_toml(text) else {
        return;
    };
    // accepted specs must survive a round trip and build a map
    let again = ScenarioSpec::from_toml(&spec.to_toml()).expect("round trip");
    assert_eq!(again, spec);
    let c = spec.corridor;
    if (c.length / c.resolution) * (c.width / c.resolution) <= 250_000.0 {
        let map = scenario_map(&spec).expect("validated spec builds");
        let _ = compute_foot_costmap(&map, CostmapParams::default());
    }
});
