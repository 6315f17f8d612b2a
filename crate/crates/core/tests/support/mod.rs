#![allow(dead_code)]

pub mod geweke;
pub mod oracle;
pub mod pair_oracle;
