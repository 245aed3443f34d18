#![no_main]

use bdsbm::io::{parse_params, write_params};
use libfuzzer_sys::fuzz_target;

// Accepted parameters are valid, so they can be written and read back unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = parse_params(text) {
        let written = write_params(&params).expect("valid parameters serialize");
        assert_eq!(
            parse_params(&written).expect("written parameters parse"),
            params
        );
    }
});
