//! Command-line and network front ends for the evacuation simulator.

pub mod cli;
pub mod server;
