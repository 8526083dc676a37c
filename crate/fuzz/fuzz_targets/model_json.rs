#![no_main]

use footstep_core::geometry::{RobotState, Vec2};
use footstep_core::models::ModelSet;
use footstep_core::sim::default_stance;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(models) = ModelSet::from_json(text) else {
        return;
    };
    let _ = models.predict_state(&RobotState::at_rest(Vec2::ZERO, default_stance()));
    let _ = ModelSet::from_json(&models.to_json()).expect("round trip");
});
