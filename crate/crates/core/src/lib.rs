//! Link-level simulator and analytic interference calculator for
//! rectangular-pulse reduced-CP OTFS received through a band-limiting
//! front-end filter.

pub mod channel;
pub mod detector;
pub mod error;
mod fft;
pub mod grid;
pub mod harness;
pub mod modem;
pub mod interference;
pub mod waveform;

pub use error::{OtfsError, Result};
pub use grid::{Constellation, DDGrid, FrameParams, GridKind, SeedSpec, C64};
