#![no_main]

use libfuzzer_sys::fuzz_target;
use walrus_ssm::io::{encode_ssmk, parse_ssmk};

fuzz_target!(|data: &[u8]| {
    if let Ok(u) = parse_ssmk(data) {
        let again = parse_ssmk(&encode_ssmk(&u)).unwrap();
        assert_eq!(again.len(), u.len());
        assert!(again.iter().zip(&u).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
});
