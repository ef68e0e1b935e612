//! Streaming voice conversion built from phonetic posteriorgrams.
//!
//! The engine runs three networks back to back: an acoustic model turns
//! MFCCs into phonetic posteriorgrams (PPGs), a conversion model maps PPGs
//! plus target pitch and speaker identity to vocoder features, and an
//! LPC-based neural vocoder turns those features into 16 kHz audio. Every
//! stage is causal up to a fixed number of look-ahead frames, which
//! [`pipeline::latency_of`] turns into an algorithmic latency figure.

pub mod dsp;
pub mod error;
pub mod lpc;
pub mod nn;
pub mod pipeline;
pub mod pitch;

pub use error::{Error, Result};
