#![no_main]

use ensemble_fusion::score_io::{parse_score_table, score_table_to_string};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(parsed) = parse_score_table(text, "fuzz") {
        let again = parse_score_table(&score_table_to_string(&parsed.table), "fuzz").expect("written table parses");
        assert_eq!(again.table.len(), parsed.table.len());
        assert_eq!(again.table.label_space(), parsed.table.label_space());
    }
});
