#![no_main]

use libfuzzer_sys::fuzz_target;
use palpsim::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = io::decode_class_image(data) {
        assert_eq!(io::encode_class_image(&img).unwrap(), data);
    }
});
