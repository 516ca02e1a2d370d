#![no_main]

use ensemble_fusion::score_io::parse_split;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_split(text);
    }
});
