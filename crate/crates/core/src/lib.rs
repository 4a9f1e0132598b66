//! Core algorithms for federated learning over space-air-ground integrated
//! networks.
//!
//! The crate is `no_std` (with `alloc`) and contains no IO. It covers:
//!
//! * [`constellation`]: Walker-Star geometry, coverage windows over a ground
//!   site and the serving pass sequence for a round.
//! * [`linkmodel`]: inter-satellite, ground-to-air and air-to-satellite rates.
//! * [`latency`]: per-node compute times, the multi-satellite handover
//!   recursion and the round-level min-max latencies.
//! * [`offload`]: the inter-layer data-offloading optimizer (nested bisection)
//!   and the bookkeeping that applies a plan to a [`ledger::DatasetLedger`].
//! * [`flcore`]: partitioning, local SGD, satellite training with handover,
//!   weighted aggregation and evaluation.
//! * [`diagnostics`]: convergence-constant estimation and the non-convex
//!   convergence bound.
#![no_std]
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod constellation;
pub mod diagnostics;
pub mod error;
pub mod flcore;
pub mod latency;
pub mod ledger;
pub mod linkmodel;
pub mod math;
pub mod offload;
pub mod rng;

pub use error::{Error, Result};

/// Serialises infinite durations as `null` so JSON stays valid.
#[cfg(feature = "serde")]
pub(crate) mod serde_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
