#![no_main]

use bdsbm::io::{parse_labels, write_labels};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(labels) = parse_labels(text, None) {
        let again =
            parse_labels(&write_labels(&labels), Some(labels.k())).expect("written labels parse");
        assert_eq!(
            again.iter().collect::<Vec<_>>(),
            labels.iter().collect::<Vec<_>>()
        );
    }
});
