//! Link-level simulation of AFDM with overlap-summation pulse shaping.
//!
//! The crate models the full transceiver chain (chirped multicarrier
//! modulation, extended cyclic prefix, pulse shaping, a doubly-selective
//! channel, receive windowing with overlap-summation), the effective
//! DAFT-domain channel matrix and its noise covariance, pilot-based channel
//! estimation, LMMSE equalization, and the Monte Carlo sweeps built on them.

pub mod channel;
pub mod config;
pub mod dsp;
pub mod equalizer;
pub mod estimation;
pub mod experiment;
pub mod error;
pub mod matrix;
pub mod pulse;
pub mod qam;
pub mod receiver;
pub mod report;
pub mod transmitter;
pub mod window;

pub use channel::{ChannelPath, ChannelRealization};
pub use config::{ExperimentConfig, GridConfig, Mode, Profile, ValidatedConfig, WindowKind};
pub use dsp::SignedBuf;
pub use error::{Error, Result};
pub use estimation::PathEstimate;
pub use experiment::{BerOptions, CondScope, Csi, NoiseModel};
pub use matrix::{ChannelMatrix, CMatrix, NoiseCovariance};
pub use num_complex::Complex64;
pub use pulse::SampledPulse;
pub use qam::QamSpec;
pub use receiver::{ReceiveMode, Receiver};
pub use report::{ExperimentReport, Format, ReportRow};
pub use transmitter::{FrameTaps, Transmitter, Waveform};
pub use window::Window;
