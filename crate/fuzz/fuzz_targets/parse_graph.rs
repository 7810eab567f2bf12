#![no_main]

use bipgo::io::{parse_edges, parse_graph, write_edges};
use bipgo::synth::builtin_cube;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(edges) = parse_edges(text) {
        // Anything accepted must survive a write/parse cycle unchanged.
        assert_eq!(parse_edges(&write_edges(&edges)).unwrap(), edges);
    }
    let _ = parse_graph(text, &builtin_cube());
});
