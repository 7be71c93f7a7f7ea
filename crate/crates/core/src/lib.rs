//! Downlink rate-splitting multiple access (RSMA) sum-rate simulation with a
//! genetic-algorithm power allocator (PARGA).
//!
//! The pipeline is: scenario ([`channel`], [`config`]) → precoders
//! ([`precoding`]) → effective gains and rates ([`rates`]) → power
//! allocation by [`ga`], compared with the [`baselines`] and checked
//! against the exhaustive [`oracle`]. [`experiments`] drives SNR sweeps.

pub mod baselines;
pub mod channel;
pub mod config;
pub mod error;
pub mod experiments;
pub mod ga;
pub mod linalg;
pub mod oracle;
pub mod precoding;
pub mod rates;

pub use error::{Error, Result};
