#![no_main]

use ensemble_fusion::combiners::EnsembleSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = EnsembleSpec::from_json(text) {
        assert_eq!(EnsembleSpec::from_json(&spec.to_json()).expect("serialized spec parses"), spec);
    }
});
