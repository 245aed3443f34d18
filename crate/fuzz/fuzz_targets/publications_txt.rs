#![no_main]

use bdsbm::ingest::{ingest, parse_publications, IngestConfig, TieRule};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let Ok(records) = parse_publications(&text) else {
        return;
    };
    let config = IngestConfig {
        t_start: 0.0,
        t_end: 400.0,
        ancestor_len: 60.0,
        bin_width: 30.0,
        tie_rule: TieRule::DiscardFewerPublications,
        max_authors: None,
    };
    if let Ok(out) = ingest(&records, &config) {
        assert_eq!(out.authors.len(), out.history.n_individuals());
    }
});
