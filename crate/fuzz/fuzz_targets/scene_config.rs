#![no_main]

use bipgo::synth::SceneConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = SceneConfig::parse(text) {
        assert_eq!(SceneConfig::parse(&cfg.to_text()).unwrap(), cfg);
    }
});
