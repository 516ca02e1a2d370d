#![no_main]

use ensemble_fusion::preprocess::{decode_image, encode_pgm};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        assert!(img.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        let again = decode_image(&encode_pgm(&img)).expect("encoded PGM decodes");
        assert_eq!((again.height(), again.width()), (img.height(), img.width()));
    }
});
