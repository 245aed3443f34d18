#![no_main]

use libfuzzer_sys::fuzz_target;

// events, meta and snapshots separated by NUL bytes.
fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let mut parts = text.split('\0');
    let (Some(events), Some(meta), Some(snapshots)) = (parts.next(), parts.next(), parts.next())
    else {
        return;
    };
    if let Ok(data) = bdsbm::io::load_dataset(events, meta, snapshots) {
        let _ = bdsbm::bd_rates::estimate_rates(data.history());
        let _ = bdsbm::init::similarity_matrix(&data);
    }
});
