#![no_main]

use libfuzzer_sys::fuzz_target;
use palpsim::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = io::decode_real_image(data) {
        let again = io::decode_real_image(&io::encode_real_image(&img).unwrap()).unwrap();
        assert_eq!(again, img);
    }
});
