#![no_main]

use libfuzzer_sys::fuzz_target;
use tricoin::montecarlo::{parse_log_line, LogLine};

fuzz_target!(|data: &[u8]| {
    if let Ok(line) = std::str::from_utf8(data) {
        if let Ok(LogLine::Trial(record)) = parse_log_line(line) {
            // Anything accepted must survive a round trip.
            let again = serde_json::to_string(&record).unwrap();
            assert!(parse_log_line(&again).is_ok());
        }
    }
});
