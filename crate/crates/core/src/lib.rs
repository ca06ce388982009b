#![no_std]

extern crate alloc;

pub mod folang;
pub mod grid;
pub mod image;
pub mod local;
pub mod numerics;
pub mod percolation;
pub mod thresholds;
