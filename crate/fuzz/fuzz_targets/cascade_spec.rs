#![no_main]

use ensemble_fusion::CascadeSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = CascadeSpec::from_json(text) {
        assert_eq!(CascadeSpec::from_json(&spec.to_json()).expect("serialized spec parses"), spec);
    }
});
