//! Time-domain shaping pulses on an oversampled grid.
//!
//! Time is measured in baseband samples (units of `1/(M delta_f)`); a pulse
//! with oversampling `q` has taps at `t = n/q`. All generated pulses have
//! unit energy, `sum |p|^2 / q = 1`, so a matched pair convolves to a pulse
//! that is exactly 1 at the origin.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPulse {
    pub taps: Vec<f64>,
    /// Tap index of `t = 0`.
    pub center: usize,
    /// Taps per baseband sample.
    pub oversample: usize,
    /// Support half-width in baseband samples; the pulse is zero beyond it.
    pub halfspan: usize,
}

/// Root-raised-cosine value at `t` (symbol period 1), with the removable
/// singularities at `t = 0` and `|t| = 1/(4 beta)` evaluated by their limits.
pub fn rrc_value(t: f64, beta: f64) -> f64 {
    if t.abs() < 1e-12 {
        return 1.0 - beta + 4.0 * beta / PI;
    }
    if beta > 0.0 && (t.abs() - 1.0 / (4.0 * beta)).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return beta / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Unit-energy RRC pulse truncated to `|t| <= halfspan`.
pub fn make_rrc(rolloff: f64, halfspan: usize, oversample: usize) -> SampledPulse {
    let c = halfspan * oversample;
    let mut taps: Vec<f64> = (0..=2 * c)
        .map(|n| rrc_value((n as f64 - c as f64) / oversample as f64, rolloff))
        .collect();
    let e: f64 = taps.iter().map(|v| v * v).sum::<f64>() / oversample as f64;
    let s = e.sqrt().recip();
    taps.iter_mut().for_each(|v| *v *= s);
    SampledPulse {
        taps,
        center: c,
        oversample,
        halfspan,
    }
}

/// Unit-energy discrete delta (a single tap of `sqrt(q)`).
pub fn make_delta(oversample: usize) -> SampledPulse {
    SampledPulse {
        taps: vec![(oversample as f64).sqrt()],
        center: 0,
        oversample,
        halfspan: 0,
    }
}

/// Overall pulse `g_tx * g_rx`, scaled by the tap spacing and normalized to
/// 1 at the origin.
pub fn overall_pulse(tx: &SampledPulse, rx: &SampledPulse) -> Result<SampledPulse> {
    if tx.oversample != rx.oversample {
        return Err(Error::RateMismatch(tx.oversample, rx.oversample));
    }
    let q = tx.oversample;
    let mut taps = vec![0.0; tx.taps.len() + rx.taps.len() - 1];
    for (i, a) in tx.taps.iter().enumerate() {
        for (j, b) in rx.taps.iter().enumerate() {
            taps[i + j] += a * b;
        }
    }
    let center = tx.center + rx.center;
    let peak = taps[center];
    taps.iter_mut().for_each(|v| *v /= peak);
    Ok(SampledPulse {
        taps,
        center,
        oversample: q,
        halfspan: tx.halfspan + rx.halfspan,
    })
}

impl SampledPulse {
    /// Drops every tap beyond `|t| = halfspan`.
    pub fn truncated(&self, halfspan: usize) -> SampledPulse {
        if halfspan >= self.halfspan {
            return self.clone();
        }
        let keep = halfspan * self.oversample;
        let lo = self.center.saturating_sub(keep);
        let hi = (self.center + keep).min(self.taps.len() - 1);
        SampledPulse {
            taps: self.taps[lo..=hi].to_vec(),
            center: self.center - lo,
            oversample: self.oversample,
            halfspan,
        }
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|v| v * v).sum::<f64>() / self.oversample as f64
    }

    fn tap(&self, n: i64) -> f64 {
        let i = n + self.center as i64;
        if i < 0 || i >= self.taps.len() as i64 {
            0.0
        } else {
            self.taps[i as usize]
        }
    }
}

const INTERP_HALFWIDTH: i64 = 32;
const INTERP_BETA: f64 = 14.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let y = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= y / (k as f64 * k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Kaiser-windowed sinc kernel of half-width `w` samples.
pub(crate) fn kaiser_sinc(x: f64, w: f64, beta: f64, i0_beta: f64) -> f64 {
    let r = x / w;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    sinc(x) * bessel_i0(beta * (1.0 - r * r).sqrt()) / i0_beta
}

/// Pulse value at continuous offset `t_over_dt` baseband samples.
///
/// Exact on the tap grid; between taps a Kaiser-windowed sinc interpolator
/// over the oversampled taps is used. Zero beyond the declared half-support.
pub fn sample_gt(pulse: &SampledPulse, t_over_dt: f64) -> f64 {
    if t_over_dt.abs() > pulse.halfspan as f64 {
        return 0.0;
    }
    let x = t_over_dt * pulse.oversample as f64;
    let base = x.floor();
    let frac = x - base;
    let base = base as i64;
    if frac < 1e-12 {
        return pulse.tap(base);
    }
    if 1.0 - frac < 1e-12 {
        return pulse.tap(base + 1);
    }
    let w = INTERP_HALFWIDTH as f64;
    let i0b = bessel_i0(INTERP_BETA);
    ((base - INTERP_HALFWIDTH + 1)..=(base + INTERP_HALFWIDTH))
        .map(|n| pulse.tap(n) * kaiser_sinc(x - n as f64, w, INTERP_BETA, i0b))
        .sum()
}
