//! Core model of a single-gateway LoRa uplink network with per-node
//! multi-armed-bandit parameter adaptation.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. Modules:
//!
//! - [`params`]: LoRa transmission parameters and the per-node domains.
//! - [`phy`]: airtime, sensitivity, path loss, SINR and energy.
//! - [`collision`]: the time/SF/CF/capture collision rule.
//! - [`network`]: node and gateway ledgers, episode metrics, topology.
//! - [`bandit`]: UCB1 bandits, reward table and metric shaping terms.
//! - [`policy`]: the baseline allocation policies and the D-LoRa agent hook.
//! - [`engine`]: the discrete-event loop driving training and test episodes.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bandit;
pub mod collision;
pub mod engine;
mod error;
pub mod network;
pub mod params;
pub mod phy;
pub mod policy;
pub mod rng;

pub use error::{Error, Result};
pub use params::{LoRaParams, ParamDomains};
