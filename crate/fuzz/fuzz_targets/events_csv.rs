#![no_main]

use bdsbm::io::{parse_events, write_events};
use bdsbm::EventHistory;
use libfuzzer_sys::fuzz_target;

// Anything accepted as a history must survive a write/parse round trip.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(events) = parse_events(text) else {
        return;
    };
    let Some(last) = events.last().map(|e| e.time) else {
        return;
    };
    let t0 = events[0].time.min(0.0);
    let ids: Vec<usize> = (0..4).collect();
    if let Ok(history) = EventHistory::new(t0, last.max(t0) + 1.0, ids, events) {
        let again = parse_events(&write_events(&history)).expect("written events parse");
        assert_eq!(again, history.events());
    }
});
