#![no_main]

use footstep_core::sim::{read_log_csv, write_log_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if data.len() > 1 << 20 {
        return;
    }
    let Ok(log) = read_log_csv(data) else {
        return;
    };
    let mut out = Vec::new();
    write_log_csv(&log, &mut out).expect("parsed log writes");
    let again = read_log_csv(out.as_slice()).expect("written log parses");
    assert_eq!(again.len(), log.len());
});
