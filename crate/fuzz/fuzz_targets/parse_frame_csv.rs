#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_ssm::io::{parse_frame_csv, write_frame_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(frame) = parse_frame_csv(text) {
        // Whatever parses must survive a write/parse round trip.
        let mut out = Vec::new();
        write_frame_csv(&mut out, &frame).unwrap();
        let again = parse_frame_csv(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again.size(), frame.size());
    }
});
