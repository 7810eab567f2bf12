#![no_main]

use bipgo::io::{parse_object, write_object};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(object) = parse_object(text) {
        assert_eq!(parse_object(&write_object(&object)).unwrap(), object);
    }
});
