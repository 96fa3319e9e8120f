#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(f) = lacuna::io::decode_field(data) {
        // a decoded field re-encodes to the same bytes
        assert_eq!(lacuna::io::encode_field(&f), data);
    }
});
