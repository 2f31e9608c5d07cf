//! System-level Monte-Carlo simulator of massive-MIMO base stations sharing
//! the unlicensed 5 GHz band with Wi-Fi.
//!
//! The pipeline per drop: hexagonal wrap-around layout and random node
//! placement ([`topology`]) → propagation coefficients ([`channel`]) →
//! silent-period covariance sensing, d.o.f. allocation and null-constrained
//! zero-forcing precoders ([`spatial`]) → channel-access decisions ([`lbt`])
//! → SINRs, interference and rates ([`metrics`]), orchestrated across seeded
//! parallel drops by [`run`] under a [`config::SimConfig`].

pub mod channel;
pub mod config;
pub mod error;
pub mod lbt;
pub mod linalg;
pub mod metrics;
pub mod run;
pub mod spatial;
pub mod topology;
pub mod units;

pub use error::{Result, SimError};
