//! Core library for a goal-oriented distributed monitoring system: semantic
//! value assessment of status updates, fixed/adaptive semantic filtering,
//! truncated ARQ/HARQ error control, timeliness-utility analytics, Kraft-
//! constrained codeword optimization, and a seeded discrete-event link
//! simulator.
//!
//! The pipeline, end to end: a sensor observes a discrete source
//! ([`source::SourceSpec`]), every realization is scored by fusing intrinsic
//! and extrinsic features ([`value`]), a semantic filter admits the most
//! valuable realizations ([`filter`]), admitted packets are encoded with
//! lengths chosen to maximize the time-averaged semantics of information at
//! the monitors ([`optimizer`], [`soi`]), and transmitted over a block-fading
//! channel with truncated retransmissions ([`channel`]). [`sim`] replays the
//! whole thing as a continuous-time event simulation; [`scenario`] holds the
//! on-disk configuration schema and generators.

pub mod channel;
pub mod error;
pub mod filter;
pub mod optimizer;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod soi;
pub mod source;
pub mod value;

pub use error::{Error, Result};
