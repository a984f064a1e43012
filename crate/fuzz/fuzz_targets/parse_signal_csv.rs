#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_ssm::io::{parse_signal_csv, write_signal_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(u) = parse_signal_csv(text) {
        let mut out = Vec::new();
        write_signal_csv(&mut out, &u).unwrap();
        let again = parse_signal_csv(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again.len(), u.len());
    }
});
