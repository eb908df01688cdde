//! Receive shaping windows and their DTFT `g_W`.
//!
//! A window is indexed over `[-D, M)`, where `D` is the retained prefix. The
//! raised-cosine window is Nyquist: `W[l] + W[l - M] = 1` on `[0, M)`, which
//! is what makes overlap-summation transparent for periodic signals.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::config::{GridConfig, WindowKind};

#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `values[i]` holds `W[i - D]`.
    pub values: Vec<f64>,
    pub d: usize,
    pub kind: WindowKind,
}

impl Window {
    pub fn m(&self) -> usize {
        self.values.len() - self.d
    }

    /// `W[l]`, zero outside `[-D, M)`.
    pub fn get(&self, l: i64) -> f64 {
        let i = l + self.d as i64;
        if i < 0 || i >= self.values.len() as i64 {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    pub fn indices(&self) -> std::ops::Range<i64> {
        -(self.d as i64)..self.m() as i64
    }
}

pub fn make_rectangular_window(m: usize, d: usize) -> Window {
    Window {
        values: vec![1.0; m + d],
        d,
        kind: WindowKind::Rectangular,
    }
}

/// Raised-cosine Nyquist window with roll-off `alpha_W = D/M` on `[-D, M)`.
pub fn make_rc_window(grid: &GridConfig) -> Window {
    rc_window(grid.m, grid.overlap())
}

pub fn rc_window(m: usize, d: usize) -> Window {
    let span = (m - d) as i64;
    let values = (-(d as i64)..m as i64)
        .map(|l| {
            // twice the distance past the flat region, kept integral
            let excess2 = (2 * l - span).abs() - span;
            if excess2 <= 0 {
                1.0
            } else {
                (PI * excess2 as f64 / (4.0 * d as f64)).cos().powi(2)
            }
        })
        .collect();
    Window {
        values,
        d,
        kind: WindowKind::Rc,
    }
}

/// Dolph-Chebyshev window of `length` taps with `atten_db` sidelobe
/// attenuation, normalized to unit peak, placed on `[0, length)`.
pub fn make_chebyshev_window(length: usize, atten_db: f64) -> Window {
    Window {
        values: chebyshev_taps(length, atten_db),
        d: 0,
        kind: WindowKind::Chebyshev,
    }
}

/// Chebyshev window of length `M + D` occupying `[-D, M)`.
pub fn make_chebyshev_window_on(m: usize, d: usize, atten_db: f64) -> Window {
    Window {
        values: chebyshev_taps(m + d, atten_db),
        d,
        kind: WindowKind::Chebyshev,
    }
}

/// Samples the Chebyshev polynomial response on the DFT grid and
/// transforms it back to the time domain.
fn chebyshev_taps(n: usize, atten_db: f64) -> Vec<f64> {
    assert!(n >= 2, "chebyshev window needs at least two taps");
    let order = (n - 1) as f64;
    let r = 10f64.powf(atten_db / 20.0);
    let beta = (r.acosh() / order).cosh();
    let mut p: Vec<Complex64> = (0..n)
        .map(|k| {
            let x = beta * (PI * k as f64 / n as f64).cos();
            let v = if x > 1.0 {
                (order * x.acosh()).cosh()
            } else if x < -1.0 {
                let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
                sign * (order * (-x).acosh()).cosh()
            } else {
                (order * x.acos()).cos()
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    if n % 2 == 0 {
        for (k, v) in p.iter_mut().enumerate() {
            *v *= Complex64::from_polar(1.0, PI * k as f64 / n as f64);
        }
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut p);
    let w: Vec<f64> = p.iter().map(|c| c.re).collect();
    let mut out = Vec::with_capacity(n);
    if n % 2 == 1 {
        let h = n.div_ceil(2);
        out.extend(w[1..h].iter().rev());
        out.extend(&w[..h]);
    } else {
        let h = n / 2 + 1;
        out.extend(w[1..h].iter().rev());
        out.extend(&w[1..h]);
    }
    let peak = out.iter().cloned().fold(f64::MIN, f64::max);
    out.iter_mut().for_each(|v| *v /= peak);
    out
}

/// Builds the window of `kind` on `[-d, m)`.
pub fn make_window(kind: WindowKind, m: usize, d: usize, atten_db: f64) -> Window {
    match kind {
        WindowKind::Rc => rc_window(m, d),
        WindowKind::Chebyshev => make_chebyshev_window_on(m, d, atten_db),
        WindowKind::Rectangular => make_rectangular_window(m, d),
    }
}

/// `g_W` at `f = f_over_df * delta_f`:
/// `(1/M) sum_{l=-D}^{M-1} W[l] e^{-j 2pi (f_over_df / M) l}`.
pub fn eval_gw(window: &Window, f_over_df: f64, m: usize) -> Complex64 {
    let w = 2.0 * PI * f_over_df / m as f64;
    let acc: Complex64 = window
        .indices()
        .zip(&window.values)
        .map(|(l, &v)| v * Complex64::from_polar(1.0, -w * l as f64))
        .sum();
    acc / m as f64
}

/// `g_W(n + delta)` for every integer `n` in `[0, M)`.
///
/// `g_W` has period `M` in `f/delta_f` because every lag is an integer, so
/// the window is modulated by the fractional offset, folded modulo `M`, and
/// transformed with one length-`M` FFT.
pub fn gw_on_shifted_grid(window: &Window, delta: f64, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let m = window.m();
    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    let w = -2.0 * PI * delta / m as f64;
    for (l, &v) in window.indices().zip(&window.values) {
        if v != 0.0 {
            buf[l.rem_euclid(m as i64) as usize] += v * Complex64::from_polar(1.0, w * l as f64);
        }
    }
    planner.plan_fft_forward(m).process(&mut buf);
    let s = 1.0 / m as f64;
    buf.iter_mut().for_each(|v| *v *= s);
    buf
}
