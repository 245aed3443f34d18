#![no_main]

use bdsbm::io::{parse_snapshots, write_snapshots};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let times = [0.0, 0.5, 1.0, 2.0];
    if let Ok(snaps) = parse_snapshots(text, &times) {
        let again =
            parse_snapshots(&write_snapshots(&snaps), &times).expect("written snapshots parse");
        assert_eq!(again, snaps);
    }
});
