pub fn placeholder() -> u32 { 1 }
