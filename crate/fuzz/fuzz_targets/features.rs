#![no_main]

use ensemble_fusion::score_io::{features_to_string, parse_features};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = parse_features(text, None) {
        let again = parse_features(&features_to_string(&set), Some(set.label_space())).expect("written features parse");
        assert_eq!(again.rows(), set.rows());
    }
});
