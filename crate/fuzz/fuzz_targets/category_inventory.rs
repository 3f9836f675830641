#![no_main]

use libfuzzer_sys::fuzz_target;
use markabsa_core::CategoryInventory;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inv) = CategoryInventory::parse(text) {
        assert_eq!(CategoryInventory::parse(&inv.to_text()).unwrap(), inv);
    }
});
