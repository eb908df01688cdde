//! Shared fixtures for the benchmarks.

use osps_afdm::config::{validate_config, Mode, Profile, ValidatedConfig};
use osps_afdm::experiment::{trial_channel, Experiment};
use osps_afdm::qam::QamSpec;
use osps_afdm::{ChannelRealization, Complex64};

/// Desk profile with the given receiver mode and, for overlap-summation, roll-off.
pub fn desk(mode: Mode, alpha: f64) -> ValidatedConfig {
    let cfg = validate_config(Profile::Desk.config()).expect("desk profile validates");
    let cfg = match mode {
        Mode::OsPs => cfg.with_alpha_w(alpha).expect("roll-off fits the grid"),
        _ => cfg,
    };
    cfg.with_mode(mode)
}

pub fn channel(cfg: &ValidatedConfig) -> ChannelRealization {
    trial_channel(cfg, Experiment::Cond, 0)
}

/// A full frame of QPSK symbols from a fixed bit pattern.
pub fn frame(cfg: &ValidatedConfig) -> Vec<Complex64> {
    let q = QamSpec::new(2).expect("qpsk");
    let bits: Vec<u8> = (0..2 * cfg.grid.m).map(|i| ((i * 7 + i / 3) % 2) as u8).collect();
    q.modulate(&bits).expect("whole symbols")
}
