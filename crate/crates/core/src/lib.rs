//! Liquidity geometry of payment channel networks.
//!
//! The model: a network `G` locks coins into channels; a liquidity state
//! splits each channel's capacity among its endpoints and projects to a
//! wealth vector. Feasibility of wealth targets and payments, the fiber
//! structure over wealth (circulations), expected cut widths of multi-party
//! channels, fee-driven depletion and its mitigations (convex fee schedules,
//! coordinated replenishment) are all computed exactly over the integers.

#![forbid(unsafe_code)]

pub mod convexfee;
pub mod depletion;
pub mod ensemble;
pub mod error;
pub mod feasibility;
pub mod fibers;
pub mod flow;
pub mod multiparty;
pub mod network;
pub mod replenish;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use network::{
    liquidity_network, wealth_of, Channel, ChannelGraph, ChannelSpec, LiquidityNetwork,
    LiquidityState, NetworkSpec, WealthVector,
};
