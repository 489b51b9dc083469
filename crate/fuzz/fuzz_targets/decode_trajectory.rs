#![no_main]

use libfuzzer_sys::fuzz_target;
use palpsim::io;

fuzz_target!(|data: &[u8]| {
    if let Ok(t) = io::decode_trajectory(data) {
        assert_eq!(io::encode_trajectory(&t), data);
    }
});
