#![no_main]

use ensemble_fusion::combiners::ModelBundle;
use ensemble_fusion::LinearModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(bundle) = ModelBundle::from_json(text) {
        ModelBundle::from_json(&bundle.to_json()).expect("serialized bundle parses");
    }
    let _ = LinearModel::from_json(text);
});
