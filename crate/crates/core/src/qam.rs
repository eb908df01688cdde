//! Gray-labeled square QAM with unit average energy.
//!
//! Each symbol carries `Q` bits: the first `Q/2` select the in-phase level
//! and the last `Q/2` the quadrature level, both through a binary-reflected
//! Gray code. Gray index 0 is the most positive level, so QPSK bits `00` map
//! to `(1 + j)/sqrt(2)`.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QamSpec {
    pub bits_per_symbol: u32,
    /// Point for each label, indexed by the label's integer value.
    pub constellation: Vec<Complex64>,
    levels: Vec<f64>,
    scale: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

impl QamSpec {
    pub fn new(bits_per_symbol: u32) -> Result<Self> {
        if bits_per_symbol == 0 || bits_per_symbol % 2 != 0 || bits_per_symbol > 20 {
            return Err(Error::BadLength(format!(
                "bits per symbol must be even and positive, got {bits_per_symbol}"
            )));
        }
        let half = bits_per_symbol / 2;
        let l = 1usize << half;
        let scale = (2.0 * ((l * l) as f64 - 1.0) / 3.0).sqrt().recip();
        // level at amplitude index i (0 = most positive)
        let amp = |i: usize| (l as f64 - 1.0 - 2.0 * i as f64) * scale;
        // label value g -> amplitude index i with gray(i) = g
        let mut levels = vec![0.0; l];
        for i in 0..l {
            levels[gray(i)] = amp(i);
        }
        let constellation = (0..l * l)
            .map(|label| Complex64::new(levels[label >> half], levels[label & (l - 1)]))
            .collect();
        Ok(Self {
            bits_per_symbol,
            constellation,
            levels,
            scale,
        })
    }

    pub fn side(&self) -> usize {
        self.levels.len()
    }

    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let q = self.bits_per_symbol as usize;
        if bits.len() % q != 0 {
            return Err(Error::BadLength(format!(
                "{} bits is not a multiple of {q}",
                bits.len()
            )));
        }
        Ok(bits
            .chunks(q)
            .map(|c| {
                let label = c.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.constellation[label]
            })
            .collect())
    }

    /// Minimum-distance hard decision, axis by axis.
    pub fn demodulate(&self, symbols: &[Complex64]) -> Vec<u8> {
        let half = (self.bits_per_symbol / 2) as usize;
        let l = self.side();
        let mut out = Vec::with_capacity(symbols.len() * 2 * half);
        let slice = |v: f64| -> usize {
            let i = ((l as f64 - 1.0 - v / self.scale) / 2.0).round();
            gray(i.clamp(0.0, (l - 1) as f64) as usize)
        };
        for s in symbols {
            for g in [slice(s.re), slice(s.im)] {
                out.extend((0..half).rev().map(|b| ((g >> b) & 1) as u8));
            }
        }
        out
    }
}

pub fn random_bits<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// `(errors, total)` between two bit streams.
pub fn ber_count(tx: &[u8], rx: &[u8]) -> Result<(u64, u64)> {
    if tx.len() != rx.len() {
        return Err(Error::BadLength(format!("{} vs {} bits", tx.len(), rx.len())));
    }
    let errors = tx.iter().zip(rx).filter(|(a, b)| a != b).count();
    Ok((errors as u64, tx.len() as u64))
}
