//! Transmit chain: user-level prechirp, M-point IFFT, extended cyclic
//! prefix, cell-level chirp, and oversampled pulse shaping.
//!
//! The chirp is applied after the cyclic prefix on the signed index
//! `l' in [-(L_D + L_W), M)`, so the prefix comes out as a chirp-scaled copy
//! of the frame tail without an explicit prefix conversion step.

use num_complex::Complex64;
use num_rational::Rational64;

use crate::config::ValidatedConfig;
use crate::dsp::{chirp_phase, ifft_unitary, SignedBuf};
use crate::pulse::{make_rrc, SampledPulse};

/// Oversampled complex baseband waveform.
///
/// Sample `i` sits at tick `first_tick + i`; tick `k` is time
/// `k / oversample` in baseband samples, with tick 0 at `l' = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub data: Vec<Complex64>,
    pub first_tick: i64,
    pub oversample: usize,
}

impl Waveform {
    pub fn get(&self, tick: i64) -> Complex64 {
        let i = tick - self.first_tick;
        if i < 0 || i >= self.data.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.data[i as usize]
        }
    }

    pub fn end_tick(&self) -> i64 {
        self.first_tick + self.data.len() as i64
    }
}

/// Intermediate buffers of one frame through the chain, for stage-level
/// inspection. Stages that were not run stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameTaps {
    pub x: Option<Vec<Complex64>>,
    pub x0: Option<Vec<Complex64>>,
    pub s0: Option<Vec<Complex64>>,
    pub s1: Option<SignedBuf>,
    pub s: Option<SignedBuf>,
    pub waveform: Option<Waveform>,
    pub r: Option<SignedBuf>,
    pub r1: Option<SignedBuf>,
    pub r2: Option<SignedBuf>,
    pub r3: Option<Vec<Complex64>>,
    pub y0: Option<Vec<Complex64>>,
    pub y: Option<Vec<Complex64>>,
}

impl FrameTaps {
    pub const STAGES: [&'static str; 12] =
        ["x", "x0", "s0", "s1", "s", "waveform", "r", "r1", "r2", "r3", "y0", "y"];

    /// `(signed index, value)` pairs of a named stage.
    pub fn stage(&self, name: &str) -> Option<Vec<(i64, Complex64)>> {
        fn plain(v: &Option<Vec<Complex64>>) -> Option<Vec<(i64, Complex64)>> {
            v.as_ref()
                .map(|v| v.iter().enumerate().map(|(i, &c)| (i as i64, c)).collect())
        }
        fn signed(b: &Option<SignedBuf>) -> Option<Vec<(i64, Complex64)>> {
            b.as_ref().map(|b| b.indices().zip(b.data.iter().copied()).collect())
        }
        match name {
            "x" => plain(&self.x),
            "x0" => plain(&self.x0),
            "s0" => plain(&self.s0),
            "s1" => signed(&self.s1),
            "s" => signed(&self.s),
            "waveform" => self.waveform.as_ref().map(|w| {
                (w.first_tick..w.end_tick()).zip(w.data.iter().copied()).collect()
            }),
            "r" => signed(&self.r),
            "r1" => signed(&self.r1),
            "r2" => signed(&self.r2),
            "r3" => plain(&self.r3),
            "y0" => plain(&self.y0),
            "y" => plain(&self.y),
            _ => None,
        }
    }
}

/// `x0[m] = x[m] e^{j2pi c2 m^2}`.
pub fn prechirp(x: &[Complex64], c2: Rational64) -> Vec<Complex64> {
    x.iter()
        .enumerate()
        .map(|(m, &v)| v * chirp_phase(c2, m as i64))
        .collect()
}

/// Normalized M-point inverse DFT.
pub fn ifft_m(x0: &[Complex64]) -> Vec<Complex64> {
    let mut out = x0.to_vec();
    ifft_unitary(&mut out);
    out
}

/// Prepends `L_D + L_W` samples copied cyclically from the tail.
pub fn add_extended_cp(s0: &[Complex64], l_d: usize, l_w: usize) -> SignedBuf {
    let m = s0.len() as i64;
    let cp = (l_d + l_w) as i64;
    let data = (-cp..m).map(|l| s0[l.rem_euclid(m) as usize]).collect();
    SignedBuf::new(-cp, data)
}

/// `s[l] = s1[l] e^{j2pi c1 l^2}` on the signed index.
pub fn chirp(s1: &SignedBuf, c1: Rational64) -> SignedBuf {
    let data = s1
        .indices()
        .zip(&s1.data)
        .map(|(l, &v)| v * chirp_phase(c1, l))
        .collect();
    SignedBuf::new(s1.start, data)
}

/// Zero-stuffs `s` by the pulse oversampling factor and filters it with the
/// transmit pulse. The output keeps the full pulse tails.
pub fn shape_to_waveform(s: &SignedBuf, tx_pulse: &SampledPulse) -> Waveform {
    let q = tx_pulse.oversample;
    let taps = &tx_pulse.taps;
    let len = (s.len().saturating_sub(1)) * q + taps.len();
    let mut data = vec![Complex64::new(0.0, 0.0); len];
    for (i, &v) in s.data.iter().enumerate() {
        if v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let base = i * q;
        for (k, &t) in taps.iter().enumerate() {
            data[base + k] += v * t;
        }
    }
    Waveform {
        data,
        first_tick: s.start * q as i64 - tx_pulse.center as i64,
        oversample: q,
    }
}

/// The transmit half of the link for one configuration.
#[derive(Debug, Clone)]
pub struct Transmitter {
    cfg: ValidatedConfig,
    tx_pulse: SampledPulse,
}

impl Transmitter {
    pub fn new(cfg: &ValidatedConfig) -> Self {
        let tx_pulse = make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample);
        Self::with_pulse(cfg, tx_pulse)
    }

    pub fn with_pulse(cfg: &ValidatedConfig, tx_pulse: SampledPulse) -> Self {
        Self {
            cfg: cfg.clone(),
            tx_pulse,
        }
    }

    pub fn pulse(&self) -> &SampledPulse {
        &self.tx_pulse
    }

    /// Runs prechirp, IFFT, prefix and chirp; stops at the baseband `s`.
    pub fn modulate_baseband(&self, x: &[Complex64]) -> FrameTaps {
        let g = &self.cfg.grid;
        assert_eq!(x.len(), g.m, "frame must carry M symbols");
        let x0 = prechirp(x, g.c2);
        let s0 = ifft_m(&x0);
        let s1 = add_extended_cp(&s0, g.l_d, g.l_w);
        let s = chirp(&s1, g.c1);
        FrameTaps {
            x: Some(x.to_vec()),
            x0: Some(x0),
            s0: Some(s0),
            s1: Some(s1),
            s: Some(s),
            ..FrameTaps::default()
        }
    }

    /// All five transmit stages, including the oversampled waveform.
    pub fn modulate_frame(&self, x: &[Complex64]) -> FrameTaps {
        let mut taps = self.modulate_baseband(x);
        taps.waveform = Some(shape_to_waveform(taps.s.as_ref().unwrap(), &self.tx_pulse));
        taps
    }
}

/// Places `symbols` on the scheduled subcarriers of an otherwise empty grid.
pub fn map_scheduled(cfg: &ValidatedConfig, symbols: &[Complex64]) -> Vec<Complex64> {
    let g = &cfg.grid;
    assert_eq!(symbols.len(), g.scheduled_len());
    let mut x = vec![Complex64::new(0.0, 0.0); g.m];
    x[g.scheduled.clone()].copy_from_slice(symbols);
    x
}
