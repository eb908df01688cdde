//! Doubly-selective multipath channel.
//!
//! Two backends apply the same realization: an oversampled waveform model
//! (fractional delays by windowed-sinc interpolation, narrowband Doppler
//! rotation) and the exact sampled-domain model behind the effective
//! channel matrix, which filters the baseband frame with the overall pulse
//! directly.

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{ChannelGenParams, GridConfig};
use crate::dsp::SignedBuf;
use crate::error::{Error, Result};
use crate::pulse::{bessel_i0, kaiser_sinc, sample_gt, SampledPulse};
use crate::transmitter::Waveform;

/// Physical quantities behind a path, when it was drawn from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalPath {
    pub beta: f64,
    /// Delay in seconds.
    pub tau: f64,
    /// Doppler in Hz.
    pub nu: f64,
    /// Radial velocity in m/s.
    pub velocity: f64,
    pub carrier_hz: f64,
}

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelPath {
    pub gain: Complex64,
    /// Normalized delay `tau / delta_t`, fractional.
    pub delay: f64,
    /// Normalized Doppler `nu / delta_f`, fractional.
    pub doppler: f64,
    pub physical: Option<PhysicalPath>,
}

impl ChannelPath {
    pub fn new(gain: Complex64, delay: f64, doppler: f64) -> Self {
        Self {
            gain,
            delay,
            doppler,
            physical: None,
        }
    }

    /// Path from physical parameters: `h = beta e^{-j2pi fc tau}`,
    /// `nu = -v fc / c`.
    pub fn from_physical(p: PhysicalPath, grid: &GridConfig) -> Self {
        let gain = p.beta * Complex64::from_polar(1.0, -2.0 * PI * p.carrier_hz * p.tau);
        let nu = -p.velocity * p.carrier_hz / SPEED_OF_LIGHT;
        let phys = PhysicalPath { nu, ..p };
        Self {
            gain,
            delay: p.tau / grid.delta_t(),
            doppler: nu / grid.delta_f,
            physical: Some(phys),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<ChannelPath>,
    pub params: Option<ChannelGenParams>,
}

impl ChannelRealization {
    pub fn new(paths: Vec<ChannelPath>) -> Self {
        Self { paths, params: None }
    }

    pub fn max_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.delay).fold(0.0, f64::max)
    }
}

/// Draws `P` paths: gains `CN(0, var)`, delays uniform on
/// `[delay_low, delay_high]`, Doppler `K_max cos(theta)` with uniform `theta`.
pub fn draw_channel<R: Rng + ?Sized>(params: &ChannelGenParams, rng: &mut R) -> ChannelRealization {
    let sd = (params.gain_variance / 2.0).sqrt();
    let normal = Normal::new(0.0, sd).expect("finite variance");
    let paths = (0..params.paths)
        .map(|_| {
            let gain = Complex64::new(normal.sample(rng), normal.sample(rng));
            let delay = if params.delay_high > params.delay_low {
                rng.random_range(params.delay_low..=params.delay_high)
            } else {
                params.delay_low
            };
            let theta = rng.random_range(0.0..2.0 * PI);
            ChannelPath::new(gain, delay, params.k_max as f64 * theta.cos())
        })
        .collect();
    ChannelRealization {
        paths,
        params: Some(params.clone()),
    }
}

const FRACTIONAL_DELAY_HALFWIDTH: i64 = 64;
const FRACTIONAL_DELAY_BETA: f64 = 14.0;

/// `out(t) = sum_p h_p in(t - l_p) e^{j2pi k_p t / M}` on the oversampled
/// grid, with `t` in baseband samples from the data start.
///
/// Delay variation across the frame only enters through the Doppler phase;
/// time scaling of the pulse is neglected.
pub fn apply_waveform_channel(input: &Waveform, realization: &ChannelRealization, m: usize) -> Waveform {
    let q = input.oversample as f64;
    let max_shift = (realization.max_delay() * q).ceil() as i64 + FRACTIONAL_DELAY_HALFWIDTH;
    let len = input.data.len() + max_shift.max(0) as usize;
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let i0b = bessel_i0(FRACTIONAL_DELAY_BETA);
    let hw = FRACTIONAL_DELAY_HALFWIDTH;

    for path in &realization.paths {
        let shift = path.delay * q;
        let whole = shift.floor();
        let frac = shift - whole;
        let whole = whole as i64;
        // interpolation kernel for in(tick - whole - frac)
        let kernel: Vec<(i64, f64)> = if frac < 1e-12 {
            vec![(0, 1.0)]
        } else {
            ((-hw + 1)..=hw)
                .map(|j| (j, kaiser_sinc(j as f64 - frac, hw as f64, FRACTIONAL_DELAY_BETA, i0b)))
                .collect()
        };
        let w = 2.0 * PI * path.doppler / (m as f64 * q);
        for (i, o) in out.iter_mut().enumerate() {
            let tick = input.first_tick + i as i64;
            let src = tick - whole;
            let v: Complex64 = kernel.iter().map(|&(j, k)| input.get(src - j) * k).sum();
            if v != Complex64::new(0.0, 0.0) {
                *o += path.gain * v * Complex64::from_polar(1.0, w * tick as f64);
            }
        }
    }
    Waveform {
        data: out,
        first_tick: input.first_tick,
        oversample: input.oversample,
    }
}

/// Sampled-domain channel over the frame's signed index range:
/// `r[l] = sum_p h_p e^{j2pi k_p l / M} sum_{l''} s[l - l''] g_T(l'' - l_p)`
/// with `l''` running over the pulse support around `l_p`.
///
/// Samples before the frame start are zero. Fails if any retained sample
/// (index `>= -D`) would need one of them.
pub fn apply_discrete_channel(
    s: &SignedBuf,
    realization: &ChannelRealization,
    g_t: &SampledPulse,
    grid: &GridConfig,
) -> Result<SignedBuf> {
    let hs = g_t.halfspan as i64;
    let first_kept = -(grid.overlap() as i64);
    let mut r = SignedBuf::zeros(s.start, s.len());
    for path in &realization.paths {
        let lo = path.delay.floor() as i64 - hs;
        let hi = path.delay.ceil() as i64 + hs;
        if first_kept - hi < s.start {
            return Err(Error::IndexOutOfSupport {
                index: first_kept - hi,
                frame_start: s.start,
            });
        }
        let taps: Vec<(i64, Complex64)> = (lo..=hi)
            .filter_map(|lpp| {
                let g = sample_gt(g_t, lpp as f64 - path.delay);
                (g != 0.0).then(|| (lpp, path.gain * g))
            })
            .collect();
        let w = 2.0 * PI * path.doppler / grid.m as f64;
        for (l, o) in r.indices().zip(r.data.iter_mut()) {
            let v: Complex64 = taps.iter().map(|&(lpp, t)| s.get(l - lpp) * t).sum();
            *o += v * Complex64::from_polar(1.0, w * l as f64);
        }
    }
    Ok(r)
}

/// Adds circular complex Gaussian noise of variance `sigma2` per sample.
pub fn add_noise<R: Rng + ?Sized>(r: &SignedBuf, sigma2: f64, rng: &mut R) -> SignedBuf {
    if sigma2 == 0.0 {
        return r.clone();
    }
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).expect("finite variance");
    let data = r
        .data
        .iter()
        .map(|&v| v + Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect();
    SignedBuf::new(r.start, data)
}

#[derive(Debug, Serialize, Deserialize)]
struct PathRow {
    p: usize,
    h_re: f64,
    h_im: f64,
    ell: f64,
    k: f64,
}

/// Writes `p,h_re,h_im,ell,k` rows.
pub fn write_realization_csv<W: Write>(realization: &ChannelRealization, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (p, path) in realization.paths.iter().enumerate() {
        wr.serialize(PathRow {
            p,
            h_re: path.gain.re,
            h_im: path.gain.im,
            ell: path.delay,
            k: path.doppler,
        })
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_realization_csv<R: Read>(r: R) -> Result<ChannelRealization> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows: Vec<PathRow> = rd
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(e.to_string()))?;
    rows.sort_by_key(|r| r.p);
    Ok(ChannelRealization::new(
        rows.into_iter()
            .map(|r| ChannelPath::new(Complex64::new(r.h_re, r.h_im), r.ell, r.k))
            .collect(),
    ))
}
