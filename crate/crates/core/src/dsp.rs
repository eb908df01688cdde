//! Small numeric helpers shared by the transceiver stages: unitary DFTs,
//! exact rational chirp phases, and signed-index buffers.

use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::Rational64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place normalized forward DFT, `(1/sqrt(N)) sum x[n] e^{-j2pi kn/N}`.
pub fn fft_unitary(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// In-place normalized inverse DFT, `(1/sqrt(N)) sum X[k] e^{+j2pi kn/N}`.
pub fn ifft_unitary(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
    let scale = 1.0 / (buf.len() as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
}

/// `e^{j2pi c n^2}` with the fractional part of `c n^2` reduced exactly.
pub fn chirp_phase(c: Rational64, n: i64) -> Complex64 {
    let num = *c.numer() as i128;
    let den = *c.denom() as i128;
    let n2 = (n as i128) * (n as i128);
    let r = (num * n2).rem_euclid(den);
    Complex64::from_polar(1.0, 2.0 * PI * (r as f64) / (den as f64))
}

/// `e^{j2pi r}` for a rational `r`, reduced exactly.
pub fn rational_phase(r: Rational64) -> Complex64 {
    let num = *r.numer() as i128;
    let den = *r.denom() as i128;
    Complex64::from_polar(1.0, 2.0 * PI * (num.rem_euclid(den) as f64) / (den as f64))
}

/// `e^{j2pi num/den}` with `num` reduced modulo `den` first.
pub fn root_of_unity(num: i64, den: i64) -> Complex64 {
    let r = num.rem_euclid(den);
    Complex64::from_polar(1.0, 2.0 * PI * r as f64 / den as f64)
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// A complex buffer whose first element sits at signed index `start`.
///
/// Prefix samples carry negative indices so that quadratic phases like
/// `c1 l^2` are evaluated on the true time index.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedBuf {
    pub start: i64,
    pub data: Vec<Complex64>,
}

impl SignedBuf {
    pub fn new(start: i64, data: Vec<Complex64>) -> Self {
        Self { start, data }
    }

    pub fn zeros(start: i64, len: usize) -> Self {
        Self::new(start, vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// One past the last signed index.
    pub fn end(&self) -> i64 {
        self.start + self.data.len() as i64
    }

    /// Value at signed index `idx`, zero outside the buffer.
    pub fn get(&self, idx: i64) -> Complex64 {
        let off = idx - self.start;
        if off < 0 || off >= self.data.len() as i64 {
            Complex64::new(0.0, 0.0)
        } else {
            self.data[off as usize]
        }
    }

    pub fn indices(&self) -> std::ops::Range<i64> {
        self.start..self.end()
    }

    pub fn energy(&self) -> f64 {
        energy(&self.data)
    }
}

/// `||a - b|| / ||b||`, or `||a||` when `b` is zero.
pub fn relative_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let base = energy(b);
    if base == 0.0 {
        diff.sqrt()
    } else {
        (diff / base).sqrt()
    }
}
