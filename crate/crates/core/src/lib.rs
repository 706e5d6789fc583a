//! Deterministic 2D building-evacuation simulator.
//!
//! The crate covers the scenario model ([`world`]), per-agent raycast
//! perception ([`perception`]), the physical step ([`dynamics`]), reward shaping
//! and the spawn curriculum ([`reward`]), a from-scratch PPO trainer ([`ppo`])
//! and the evacuation run loop ([`sim`]).

pub mod dynamics;
pub mod geometry;
pub mod perception;
pub mod ppo;
pub mod reward;
pub mod samples;
pub mod sim;
pub mod world;
