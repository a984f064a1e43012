#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_ssm::io::{parse_matrix_csv, write_matrix_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = parse_matrix_csv(text) {
        let mut out = Vec::new();
        write_matrix_csv(&mut out, "", &m).unwrap();
        let again = parse_matrix_csv(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(again.shape(), m.shape());
    }
});
