//! Effective DAFT-domain channel matrix, receiver noise covariance, and
//! condition numbers.
//!
//! Entry `(m, m')` of `H` sums, over paths `p` and lags `l'` in the pulse
//! support around `l_p`,
//!
//! `h_p e^{j2pi(c1 l'^2 + c2(m'^2 - m^2) - m' l'/M)} g_T(l' - l_p) g_W(m - m' + 2M c1 l' - k_p)`.
//!
//! `g_W` is periodic with period `M` (all window lags are integers), so for a
//! fixed `(p, l')` its values on the shifted integer grid come from one FFT.

use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::channel::{ChannelPath, ChannelRealization};
use crate::config::{ExperimentConfig, GridConfig, Mode};
use crate::dsp::{chirp_phase, root_of_unity};
use crate::error::{Error, Result};
use crate::pulse::{make_rrc, overall_pulse, sample_gt, SampledPulse};
use crate::receiver::ReceiveMode;
use crate::window::{gw_on_shifted_grid, Window};

pub type CMatrix = DMatrix<Complex64>;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: CMatrix,
    pub mode: Mode,
    pub fingerprint: String,
}

impl ChannelMatrix {
    pub fn nrows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols());
        (&self.entries * nalgebra::DVector::from_column_slice(x))
            .iter()
            .copied()
            .collect()
    }
}

/// Overall pulse `g_T` of the configured RRC pair, truncated to
/// `filter_halfspan`.
pub fn overall_gt(cfg: &ExperimentConfig) -> SampledPulse {
    let p = make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample);
    overall_pulse(&p, &p)
        .expect("matched pair shares its rate")
        .truncated(cfg.filter_halfspan)
}

/// One `(p, l')` term: scalar weight, lag, integer bin shift `a`, and
/// `g_W(n + delta)` on the integer grid.
struct Term {
    coef: Complex64,
    lag: i64,
    shift: i64,
    /// Integer part of `2M c1 l'`, the centre of the lag's Doppler slot.
    center: i64,
    gw: Vec<Complex64>,
}

fn terms(grid: &GridConfig, paths: &[ChannelPath], g_t: &SampledPulse, window: &Window) -> Vec<Term> {
    let m = grid.m as i64;
    let hs = g_t.halfspan as i64;
    let two_m_c1 = grid.c1 * Rational64::from_integer(2 * m);
    let mut planner = FftPlanner::new();
    let mut out = Vec::new();
    for path in paths {
        for lag in (path.delay.floor() as i64 - hs)..=(path.delay.ceil() as i64 + hs) {
            let g = sample_gt(g_t, lag as f64 - path.delay);
            if g == 0.0 {
                continue;
            }
            // 2M c1 l' - k_p = a + delta with integer a and delta in [0, 1)
            let r = two_m_c1 * Rational64::from_integer(lag);
            let whole = r.floor();
            let frac = crate::dsp::to_f64(r - whole) - path.doppler;
            let fl = frac.floor();
            let shift = *whole.numer() + fl as i64;
            let delta = frac - fl;
            out.push(Term {
                coef: path.gain * g * chirp_phase(grid.c1, lag),
                lag,
                shift,
                center: *whole.numer(),
                gw: gw_on_shifted_grid(window, delta, &mut planner),
            });
        }
    }
    out
}

/// Columns `cols` of `H` for the given geometry, all `M` rows.
pub fn build_h_block(
    grid: &GridConfig,
    paths: &[ChannelPath],
    g_t: &SampledPulse,
    window: &Window,
    cols: Range<usize>,
) -> CMatrix {
    block(grid, paths, g_t, window, cols, None)
}

/// Like [`build_h_block`], but each lag only contributes to the `2 guard + 1`
/// rows of its own Doppler slot; leakage outside the slot is dropped.
pub fn build_h_block_confined(
    grid: &GridConfig,
    paths: &[ChannelPath],
    g_t: &SampledPulse,
    window: &Window,
    cols: Range<usize>,
    guard: usize,
) -> CMatrix {
    block(grid, paths, g_t, window, cols, Some(guard))
}

fn block(
    grid: &GridConfig,
    paths: &[ChannelPath],
    g_t: &SampledPulse,
    window: &Window,
    cols: Range<usize>,
    guard: Option<usize>,
) -> CMatrix {
    let m = grid.m;
    assert_eq!(window.m(), m, "window length does not match M");
    let mi = m as i64;
    let terms = terms(grid, paths, g_t, window);
    let row_phase: Vec<Complex64> = (0..mi).map(|r| chirp_phase(-grid.c2, r)).collect();
    let columns: Vec<Vec<Complex64>> = cols
        .clone()
        .into_par_iter()
        .map(|mp| {
            let mut col = vec![Complex64::new(0.0, 0.0); m];
            for t in &terms {
                let w = t.coef * root_of_unity(-(mp as i64) * t.lag, mi);
                let off = (t.shift - mp as i64).rem_euclid(mi) as usize;
                match guard {
                    None => {
                        // row r reads gw[(r - m' + a) mod M]
                        let (head, tail) = t.gw.split_at(off);
                        for (c, g) in col.iter_mut().zip(tail.iter().chain(head)) {
                            *c += w * g;
                        }
                    }
                    Some(gd) => {
                        let gd = gd as i64;
                        for n in -gd..=gd {
                            let r = (mp as i64 - t.center + n).rem_euclid(mi) as usize;
                            col[r] += w * t.gw[(r + off) % m];
                        }
                    }
                }
            }
            let cp = chirp_phase(grid.c2, mp as i64);
            col.iter_mut().zip(&row_phase).for_each(|(c, rp)| *c *= cp * rp);
            col
        })
        .collect();
    CMatrix::from_iterator(m, cols.len(), columns.into_iter().flatten())
}

/// Full `M x M` effective channel matrix of the mode's receiver geometry.
pub fn build_h(
    cfg: &ExperimentConfig,
    realization: &ChannelRealization,
    g_t: &SampledPulse,
    mode: &ReceiveMode,
) -> ChannelMatrix {
    ChannelMatrix {
        entries: build_h_block(&cfg.grid, &realization.paths, g_t, &mode.window, 0..cfg.grid.m),
        mode: mode.kind,
        fingerprint: cfg.fingerprint(),
    }
}

/// `H` restricted to the scheduled columns, keeping every row. This is the
/// map from data symbols to the full received frame.
pub fn build_h_scheduled(
    cfg: &ExperimentConfig,
    realization: &ChannelRealization,
    g_t: &SampledPulse,
    mode: &ReceiveMode,
) -> ChannelMatrix {
    ChannelMatrix {
        entries: build_h_block(
            &cfg.grid,
            &realization.paths,
            g_t,
            &mode.window,
            cfg.grid.scheduled.clone(),
        ),
        mode: mode.kind,
        fingerprint: cfg.fingerprint(),
    }
}

/// Square block on the scheduled rows and columns.
pub fn scheduled_submatrix(h: &ChannelMatrix, grid: &GridConfig) -> ChannelMatrix {
    let r = &grid.scheduled;
    ChannelMatrix {
        entries: h.entries.view((r.start, r.start), (r.len(), r.len())).into_owned(),
        mode: h.mode,
        fingerprint: h.fingerprint.clone(),
    }
}

/// All rows, scheduled columns.
pub fn scheduled_columns(h: &ChannelMatrix, grid: &GridConfig) -> ChannelMatrix {
    let r = &grid.scheduled;
    ChannelMatrix {
        entries: h.entries.columns(r.start, r.len()).into_owned(),
        mode: h.mode,
        fingerprint: h.fingerprint.clone(),
    }
}

/// `sigma_max / sigma_min`; infinite when `sigma_min < 1e-300`. Tall
/// matrices are accepted (full column rank is what an equalizer needs).
pub fn condition_number(h: &CMatrix) -> Result<f64> {
    if h.nrows() < h.ncols() || h.ncols() == 0 {
        return Err(Error::NotSquare {
            rows: h.nrows(),
            cols: h.ncols(),
        });
    }
    let sv = h.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min < 1e-300 {
        Ok(f64::INFINITY)
    } else {
        Ok(max / min)
    }
}

/// Which stages of the receive chain were folded into a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CovarianceFactors {
    pub dechirp: bool,
    pub prefix_removal: bool,
    pub window: bool,
    pub overlap_sum: bool,
    pub dft: bool,
    pub deprechirp: bool,
}

impl CovarianceFactors {
    pub const ALL: CovarianceFactors = CovarianceFactors {
        dechirp: true,
        prefix_removal: true,
        window: true,
        overlap_sum: true,
        dft: true,
        deprechirp: true,
    };
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovariance {
    pub matrix: CMatrix,
    pub factors: CovarianceFactors,
}

impl NoiseCovariance {
    pub fn scaled(&self, s: f64) -> NoiseCovariance {
        NoiseCovariance {
            matrix: self.matrix.map(|v| v * s),
            factors: self.factors,
        }
    }

    pub fn block(&self, r: Range<usize>) -> CMatrix {
        self.matrix.view((r.start, r.start), (r.len(), r.len())).into_owned()
    }
}

/// Linear map from the sampled frame on `[-(L_D + L_W), M)` to `y`:
/// `T[m, n] = e^{-j2pi c2 m^2} M^{-1/2} e^{-j2pi m n / M} W[n] e^{-j2pi c1 n^2}`
/// for `n >= -D` and zero for the removed prefix.
pub fn receiver_transform(grid: &GridConfig, window: &Window) -> CMatrix {
    let m = grid.m as i64;
    let start = -(grid.prefix_len() as i64);
    let n_in = (m - start) as usize;
    let scale = 1.0 / (m as f64).sqrt();
    CMatrix::from_fn(m as usize, n_in, |row, col| {
        let n = start + col as i64;
        let w = window.get(n);
        if w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let r = row as i64;
        chirp_phase(-grid.c2, r) * root_of_unity(-r * n, m) * (w * scale) * chirp_phase(-grid.c1, n)
    })
}

/// `R_w = T R_n T^H` for a general input covariance over the whole frame.
pub fn build_noise_covariance(grid: &GridConfig, mode: &ReceiveMode, r_n: &CMatrix) -> Result<NoiseCovariance> {
    let n = grid.frame_len();
    if r_n.nrows() != n || r_n.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n}x{n}"),
            found: format!("{}x{}", r_n.nrows(), r_n.ncols()),
        });
    }
    if mode.window.m() != grid.m {
        return Err(Error::DimensionMismatch {
            expected: format!("window over M={}", grid.m),
            found: format!("window over M={}", mode.window.m()),
        });
    }
    let t = receiver_transform(grid, &mode.window);
    let mut matrix = &t * r_n * t.adjoint();
    hermitize(&mut matrix);
    Ok(NoiseCovariance {
        matrix,
        factors: CovarianceFactors::ALL,
    })
}

/// White-noise shortcut `R_n = sigma2 I`: the folded window power
/// `W[l]^2 + W[l-M]^2` makes `F diag(.) F^H` circulant.
pub fn white_noise_covariance(grid: &GridConfig, window: &Window, sigma2: f64) -> NoiseCovariance {
    let m = grid.m;
    let mut d: Vec<Complex64> = (0..m as i64)
        .map(|l| {
            let a = window.get(l);
            let b = window.get(l - m as i64);
            Complex64::new(a * a + b * b, 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut d);
    let s = sigma2 / m as f64;
    let phase: Vec<Complex64> = (0..m as i64).map(|r| chirp_phase(-grid.c2, r)).collect();
    let matrix = CMatrix::from_fn(m, m, |a, b| {
        let k = (a as i64 - b as i64).rem_euclid(m as i64) as usize;
        phase[a] * phase[b].conj() * d[k] * s
    });
    NoiseCovariance {
        matrix,
        factors: CovarianceFactors::ALL,
    }
}

fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for i in 0..n {
        a[(i, i)].im = 0.0;
        for j in (i + 1)..n {
            let v = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
    }
}

pub const MATRIX_MAGIC: &[u8; 8] = b"OSPSMAT1";

pub fn mode_code(mode: Mode) -> u8 {
    match mode {
        Mode::OsPs => 0,
        Mode::DirectWindow => 1,
        Mode::Plain => 2,
    }
}

fn mode_from_code(c: u8) -> Result<Mode> {
    match c {
        0 => Ok(Mode::OsPs),
        1 => Ok(Mode::DirectWindow),
        2 => Ok(Mode::Plain),
        _ => Err(Error::Parse(format!("unknown mode code {c}"))),
    }
}

/// Binary layout, little-endian: magic `OSPSMAT1`, `u32` rows, `u32` cols,
/// `u8` mode, `u64` seed, then row-major `f32` (re, im) pairs.
pub fn write_matrix_binary<W: Write>(mut w: W, a: &CMatrix, mode: Mode, seed: u64) -> Result<()> {
    w.write_all(MATRIX_MAGIC)?;
    w.write_all(&(a.nrows() as u32).to_le_bytes())?;
    w.write_all(&(a.ncols() as u32).to_le_bytes())?;
    w.write_all(&[mode_code(mode)])?;
    w.write_all(&seed.to_le_bytes())?;
    let mut buf = Vec::with_capacity(a.len() * 8);
    for r in 0..a.nrows() {
        for c in 0..a.ncols() {
            let v = a[(r, c)];
            buf.extend_from_slice(&(v.re as f32).to_le_bytes());
            buf.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix_binary<R: Read>(mut r: R) -> Result<(CMatrix, Mode, u64)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MATRIX_MAGIC {
        return Err(Error::Parse("bad matrix magic".into()));
    }
    let mut u32b = [0u8; 4];
    r.read_exact(&mut u32b)?;
    let rows = u32::from_le_bytes(u32b) as usize;
    r.read_exact(&mut u32b)?;
    let cols = u32::from_le_bytes(u32b) as usize;
    let mut mb = [0u8; 1];
    r.read_exact(&mut mb)?;
    let mode = mode_from_code(mb[0])?;
    let mut u64b = [0u8; 8];
    r.read_exact(&mut u64b)?;
    let seed = u64::from_le_bytes(u64b);
    let mut body = vec![0u8; rows * cols * 8];
    r.read_exact(&mut body)?;
    let f = |i: usize| f32::from_le_bytes(body[i..i + 4].try_into().unwrap()) as f64;
    let a = CMatrix::from_fn(rows, cols, |i, j| {
        let o = (i * cols + j) * 8;
        Complex64::new(f(o), f(o + 4))
    });
    Ok((a, mode, seed))
}

/// One line per row of comma-separated magnitudes.
pub fn write_magnitude_csv<W: Write>(mut w: W, a: &CMatrix) -> Result<()> {
    for r in 0..a.nrows() {
        let line: Vec<String> = (0..a.ncols()).map(|c| format!("{:e}", a[(r, c)].norm())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}
