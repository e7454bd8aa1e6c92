#[no_mangle]
pub extern "C" fn pgt_placeholder() -> u32 { pgtsim::placeholder() }
