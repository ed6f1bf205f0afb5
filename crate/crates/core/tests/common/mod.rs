#![allow(dead_code)]

pub mod literal;

pub use literal::*;
