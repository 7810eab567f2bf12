#![no_main]

use bipgo::io::{parse_poses, write_poses};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(set) = parse_poses(text) {
        assert_eq!(parse_poses(&write_poses(&set)).unwrap(), set);
    }
});
