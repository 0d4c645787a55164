//! Allocation-light core of the federated SGD simulator.
//!
//! Everything in this crate is a pure function over plain values: the 2-3-2
//! backpropagation network ([`ann`]), the federated SGD step and aggregation
//! ([`fedsgd`]), the synthetic data and seed streams ([`datagen`]), and the
//! binary wire codec shared with out-of-process workers ([`protocol`]).
//!
//! The crate is `no_std` (with `alloc`) unless the default `std` feature is
//! enabled. With `std`, the sigmoid uses the platform `exp`, which is what
//! native workers linking the C library see; without it, `libm` is used.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ann;
pub mod datagen;
pub mod fedsgd;
pub mod protocol;

pub use ann::{Gradient, GradientMode, ModelWeights, Sample};
pub use datagen::{DataRng, DataSeed, InitialWeights};
pub use fedsgd::{ClientUpdate, FedError, LearningRate, Partition};
pub use protocol::{Assignment, DecodeError, ErrorReason, Message, Update};
