//! Secrecy capacity regions of multi-receiver wiretap channels on finite
//! alphabets: channel-ordering verification (degraded / less noisy), rate
//! region geometry with Fourier-Motzkin elimination, capacity evaluators for
//! the degraded, parallel, and switched channel classes, and desk-scale
//! simulation of superposition wiretap codes with exact equivocation.

// Indexed loops are the clearer form for the matrix kernels throughout.
#![allow(clippy::needless_range_loop)]

pub mod channel;
pub mod cli;
pub mod codesim;
pub mod geometry;
pub mod io;
pub mod orderings;
pub mod regions;
pub mod scalar;

pub use channel::{ChannelError, Terminal};

/// Concrete `f64` kernel types used by the search, simulation, and CLI layers.
pub type Distribution = channel::Distribution<f64>;
pub type Channel = channel::Channel<f64>;
pub type JointDistribution = channel::JointDistribution<f64>;
pub type BroadcastWiretapChannel = channel::BroadcastWiretapChannel<f64>;
pub type ParallelChannel = channel::ParallelChannel<f64>;
pub type AuxiliaryChain = channel::AuxiliaryChain<f64>;
