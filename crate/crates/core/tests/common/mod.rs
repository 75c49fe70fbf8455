#![allow(dead_code)]

pub mod checks;
pub mod frames;
pub mod oracle;
pub mod stub;
pub mod workspace;
