//! Receive chain in three modes: windowing with overlap-summation of the
//! retained prefix, direct windowing of the data portion, and plain AFDM.
//!
//! All modes window after de-chirping. Direct windowing and plain mode
//! remove the whole prefix, so their windows live on `[0, M)`.

use num_complex::Complex64;
use num_rational::Rational64;

use crate::config::{GridConfig, Mode, ValidatedConfig, WindowKind};
use crate::dsp::{chirp_phase, fft_unitary, SignedBuf};
use crate::error::{Error, Result};
use crate::pulse::{make_rrc, SampledPulse};
use crate::transmitter::{FrameTaps, Waveform};
use crate::window::{make_chebyshev_window_on, make_rectangular_window, make_window, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveMode {
    pub kind: Mode,
    pub window: Window,
}

impl ReceiveMode {
    /// The mode's standard window: the configured kind on `[-D, M)` for
    /// overlap-summation, a Chebyshev window on `[0, M)` for direct
    /// windowing, and all ones for plain AFDM.
    pub fn standard(cfg: &ValidatedConfig, kind: Mode) -> Self {
        let m = cfg.grid.m;
        let window = match kind {
            Mode::OsPs => make_window(cfg.window_kind, m, cfg.grid.overlap(), cfg.cheb_atten_db),
            Mode::DirectWindow => make_chebyshev_window_on(m, 0, cfg.cheb_atten_db),
            Mode::Plain => make_rectangular_window(m, 0),
        };
        Self { kind, window }
    }

    pub fn from_config(cfg: &ValidatedConfig) -> Self {
        Self::standard(cfg, cfg.mode)
    }

    /// Samples dropped at the front of the received frame.
    pub fn prefix_removed(&self, grid: &GridConfig) -> usize {
        grid.prefix_len() - self.window.d
    }

    pub fn window_kind(&self) -> WindowKind {
        self.window.kind
    }
}

/// Filters the waveform with the receive pulse and samples it at ticks
/// `l * oversample` for `l` in `[-(L_D + L_W), M)`.
///
/// The filter delay is removed by centring the receive taps, so with
/// matched pulses `r[l]` carries `s[l]` at unit gain.
pub fn matched_filter_and_sample(waveform: &Waveform, rx_pulse: &SampledPulse, grid: &GridConfig) -> SignedBuf {
    let q = rx_pulse.oversample as i64;
    assert_eq!(waveform.oversample as i64, q, "waveform and pulse rates differ");
    let start = -(grid.prefix_len() as i64);
    let scale = 1.0 / q as f64;
    let c = rx_pulse.center as i64;
    let data = (start..grid.m as i64)
        .map(|l| {
            let tick = l * q;
            rx_pulse
                .taps
                .iter()
                .enumerate()
                .map(|(j, &t)| waveform.get(tick + c - j as i64) * t)
                .sum::<Complex64>()
                * scale
        })
        .collect();
    SignedBuf::new(start, data)
}

/// `r1[l] = r[l] e^{-j2pi c1 l^2}`.
pub fn dechirp(r: &SignedBuf, c1: Rational64) -> SignedBuf {
    let data = r
        .indices()
        .zip(&r.data)
        .map(|(l, &v)| v * chirp_phase(-c1, l))
        .collect();
    SignedBuf::new(r.start, data)
}

/// Drops the first `l_r` samples.
pub fn remove_partial_prefix(r1: &SignedBuf, l_r: usize) -> SignedBuf {
    let l_r = l_r.min(r1.len());
    SignedBuf::new(r1.start + l_r as i64, r1.data[l_r..].to_vec())
}

/// `r3[l] = W[l - M] r2[l - M] + W[l] r2[l]` for `l` in `[0, M)`.
pub fn window_overlap_sum(r2: &SignedBuf, window: &Window) -> Result<Vec<Complex64>> {
    let m = window.m();
    if r2.start != -(window.d as i64) || r2.end() != m as i64 {
        return Err(Error::SupportMismatch {
            expected: (-r2.start).max(0) as usize,
            found: window.d,
        });
    }
    let mi = m as i64;
    Ok((0..mi)
        .map(|l| window.get(l - mi) * r2.get(l - mi) + window.get(l) * r2.get(l))
        .collect())
}

/// Normalized M-point forward DFT.
pub fn fft_m(r3: &[Complex64]) -> Vec<Complex64> {
    let mut out = r3.to_vec();
    fft_unitary(&mut out);
    out
}

/// `y[m] = y0[m] e^{-j2pi c2 m^2}`.
pub fn deprechirp(y0: &[Complex64], c2: Rational64) -> Vec<Complex64> {
    y0.iter()
        .enumerate()
        .map(|(m, &v)| v * chirp_phase(-c2, m as i64))
        .collect()
}

/// Runs de-chirping through de-prechirping on a sampled frame over
/// `[-(L_D + L_W), M)`.
pub fn demodulate_frame(r: &SignedBuf, mode: &ReceiveMode, grid: &GridConfig) -> Result<(Vec<Complex64>, FrameTaps)> {
    let r1 = dechirp(r, grid.c1);
    let r2 = remove_partial_prefix(&r1, mode.prefix_removed(grid));
    let r3 = window_overlap_sum(&r2, &mode.window)?;
    let y0 = fft_m(&r3);
    let y = deprechirp(&y0, grid.c2);
    let taps = FrameTaps {
        r: Some(r.clone()),
        r1: Some(r1),
        r2: Some(r2),
        r3: Some(r3),
        y0: Some(y0),
        y: Some(y.clone()),
        ..FrameTaps::default()
    };
    Ok((y, taps))
}

/// The receive half of the link for one configuration and mode.
#[derive(Debug, Clone)]
pub struct Receiver {
    cfg: ValidatedConfig,
    mode: ReceiveMode,
    rx_pulse: SampledPulse,
}

impl Receiver {
    pub fn new(cfg: &ValidatedConfig, mode: ReceiveMode) -> Self {
        let rx_pulse = make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample);
        Self::with_pulse(cfg, mode, rx_pulse)
    }

    pub fn with_pulse(cfg: &ValidatedConfig, mode: ReceiveMode, rx_pulse: SampledPulse) -> Self {
        Self {
            cfg: cfg.clone(),
            mode,
            rx_pulse,
        }
    }

    pub fn mode(&self) -> &ReceiveMode {
        &self.mode
    }

    pub fn pulse(&self) -> &SampledPulse {
        &self.rx_pulse
    }

    pub fn demodulate(&self, r: &SignedBuf) -> Result<(Vec<Complex64>, FrameTaps)> {
        demodulate_frame(r, &self.mode, &self.cfg.grid)
    }

    pub fn demodulate_waveform(&self, waveform: &Waveform) -> Result<(Vec<Complex64>, FrameTaps)> {
        let r = matched_filter_and_sample(waveform, &self.rx_pulse, &self.cfg.grid);
        let (y, mut taps) = self.demodulate(&r)?;
        taps.waveform = Some(waveform.clone());
        Ok((y, taps))
    }
}
