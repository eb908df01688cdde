//! Pilot-based channel estimation by matching pursuit over a fractional
//! delay-Doppler grid, and reconstruction of the effective channel matrix
//! from the estimated paths.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelPath;
use crate::config::ValidatedConfig;
use crate::error::{Error, Result};
use crate::matrix::{build_h_block, build_h_block_confined, ChannelMatrix, CMatrix};
use crate::pulse::SampledPulse;
use crate::receiver::ReceiveMode;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate {
    pub h_hat: Complex64,
    pub ell_hat: f64,
    pub k_hat: f64,
    /// Residual energy after this path was subtracted.
    pub residual_energy: f64,
}

impl PathEstimate {
    pub fn path(&self) -> ChannelPath {
        ChannelPath::new(self.h_hat, self.ell_hat, self.k_hat)
    }
}

/// Single impulse at the middle of the scheduled range.
pub fn pilot_frame(cfg: &ValidatedConfig) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); cfg.grid.m];
    let s = &cfg.grid.scheduled;
    x[s.start + s.len() / 2] = Complex64::new(1.0, 0.0);
    x
}

pub const GRID_STEP: f64 = 0.25;
const REFINE_ROUNDS: usize = 2;
const JOINT_ITERS: usize = 60;
const FD_STEP: f64 = 1e-4;

struct Atom {
    ell: f64,
    k: f64,
    v: Vec<Complex64>,
    norm2: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

/// Matching-pursuit estimator bound to one receiver geometry and pilot.
/// The grid dictionary depends only on the configuration, so one estimator
/// serves every channel draw.
pub struct Estimator {
    cfg: ValidatedConfig,
    g_t: SampledPulse,
    mode: ReceiveMode,
    pilot: Vec<Complex64>,
    delays: Vec<f64>,
    dopplers: Vec<f64>,
    dictionary: Vec<Atom>,
}

fn grid_points(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / GRID_STEP + 1e-9).floor() as usize;
    (0..=n).map(|i| lo + i as f64 * GRID_STEP).collect()
}

impl Estimator {
    pub fn new(cfg: &ValidatedConfig, g_t: &SampledPulse, mode: &ReceiveMode, pilot: &[Complex64]) -> Result<Self> {
        if pilot.len() != cfg.grid.m {
            return Err(Error::DimensionMismatch {
                expected: format!("pilot of {} symbols", cfg.grid.m),
                found: pilot.len().to_string(),
            });
        }
        let k = cfg.chan.k_max as f64;
        let mut est = Self {
            cfg: cfg.clone(),
            g_t: g_t.clone(),
            mode: mode.clone(),
            pilot: pilot.to_vec(),
            delays: grid_points(cfg.chan.delay_low, cfg.chan.delay_high),
            dopplers: grid_points(-k, k),
            dictionary: Vec::new(),
        };
        let cells: Vec<(f64, f64)> = est
            .delays
            .iter()
            .flat_map(|&l| est.dopplers.iter().map(move |&k| (l, k)))
            .collect();
        use rayon::prelude::*;
        est.dictionary = cells.par_iter().map(|&(l, k)| est.atom(l, k)).collect();
        Ok(est)
    }

    /// Noiseless pilot response of a unit-gain path, with each lag confined
    /// to its `2 (K_max + K_res) + 1` Doppler bins.
    fn response(&self, ell: f64, k: f64) -> Vec<Complex64> {
        let nz: Vec<usize> = (0..self.pilot.len()).filter(|&i| self.pilot[i] != Complex64::new(0.0, 0.0)).collect();
        let m = self.cfg.grid.m;
        let mut out = vec![Complex64::new(0.0, 0.0); m];
        let Some((&lo, &hi)) = nz.first().zip(nz.last()) else {
            return out;
        };
        let path = [ChannelPath::new(Complex64::new(1.0, 0.0), ell, k)];
        let guard = (self.cfg.chan.k_max + self.cfg.chan.k_res) as usize;
        let block = build_h_block_confined(&self.cfg.grid, &path, &self.g_t, &self.mode.window, lo..hi + 1, guard);
        for &c in &nz {
            let x = self.pilot[c];
            for (o, v) in out.iter_mut().zip(block.column(c - lo).iter()) {
                *o += v * x;
            }
        }
        out
    }

    fn atom(&self, ell: f64, k: f64) -> Atom {
        let v = self.response(ell, k);
        let norm2 = norm2(&v);
        Atom { ell, k, v, norm2 }
    }

    fn metric(atom: &Atom, r: &[Complex64]) -> f64 {
        if atom.norm2 == 0.0 {
            0.0
        } else {
            dot(&atom.v, r).norm_sqr() / atom.norm2
        }
    }

    fn clamp(&self, ell: f64, k: f64) -> (f64, f64) {
        let kmax = self.cfg.chan.k_max as f64;
        (
            ell.clamp(self.cfg.chan.delay_low, self.cfg.chan.delay_high),
            k.clamp(-kmax, kmax),
        )
    }

    /// Five-point least-squares parabola through the metric along one axis;
    /// the vertex replaces the current point only if it scores higher.
    fn refine_axis(&self, best: Atom, best_score: f64, r: &[Complex64], step: f64, delay_axis: bool) -> (Atom, f64) {
        let offsets = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let scores: Vec<f64> = offsets
            .iter()
            .map(|&o| {
                if o == 0.0 {
                    return best_score;
                }
                let (l, k) = if delay_axis {
                    (best.ell + o * step, best.k)
                } else {
                    (best.ell, best.k + o * step)
                };
                let (l, k) = self.clamp(l, k);
                Self::metric(&self.atom(l, k), r)
            })
            .collect();
        // fit s = a u^2 + b u + c over u = -2..2
        let su2: f64 = offsets.iter().zip(&scores).map(|(u, s)| u * u * s).sum();
        let su: f64 = offsets.iter().zip(&scores).map(|(u, s)| u * s).sum();
        let s0: f64 = scores.iter().sum();
        let a = (su2 - 2.0 * s0) / 14.0;
        let b = su / 10.0;
        if a >= 0.0 {
            return (best, best_score);
        }
        let u = (-b / (2.0 * a)).clamp(-2.0, 2.0);
        let (l, k) = if delay_axis {
            (best.ell + u * step, best.k)
        } else {
            (best.ell, best.k + u * step)
        };
        let (l, k) = self.clamp(l, k);
        let cand = self.atom(l, k);
        let score = Self::metric(&cand, r);
        if score > best_score {
            (cand, score)
        } else {
            (best, best_score)
        }
    }

    fn refine(&self, start: Atom, r: &[Complex64]) -> Atom {
        let mut best_score = Self::metric(&start, r);
        let mut best = start;
        let mut step = GRID_STEP / 2.0;
        for _ in 0..REFINE_ROUNDS {
            (best, best_score) = self.refine_axis(best, best_score, r, step, true);
            (best, best_score) = self.refine_axis(best, best_score, r, step, false);
            step /= 2.0;
        }
        best
    }

    /// Greedy estimation of up to `max_paths` paths from `y_pilot`, followed
    /// by a joint refit of all delays and Dopplers.
    pub fn estimate(&self, y_pilot: &[Complex64], max_paths: usize) -> Result<Vec<PathEstimate>> {
        let mut r = y_pilot.to_vec();
        let initial = norm2(&r);
        let mut prev = initial;
        let mut out = Vec::new();
        if initial == 0.0 {
            return Ok(out);
        }
        for it in 0..max_paths {
            let (idx, _) = self
                .dictionary
                .iter()
                .enumerate()
                .map(|(i, a)| (i, Self::metric(a, &r)))
                .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
            let cell = &self.dictionary[idx];
            let start = Atom {
                ell: cell.ell,
                k: cell.k,
                v: cell.v.clone(),
                norm2: cell.norm2,
            };
            let best = self.refine(start, &r);
            if best.norm2 == 0.0 {
                break;
            }
            let h = dot(&best.v, &r) / best.norm2;
            for (ri, ai) in r.iter_mut().zip(&best.v) {
                *ri -= h * ai;
            }
            let res = norm2(&r);
            if res > prev * (1.0 + 1e-12) {
                return Err(Error::NoConvergence(it));
            }
            prev = res;
            out.push(PathEstimate {
                h_hat: h,
                ell_hat: best.ell,
                k_hat: best.k,
                residual_energy: res,
            });
            if res <= 1e-14 * initial {
                return Ok(out);
            }
        }
        if !out.is_empty() {
            self.joint_refit(y_pilot, &mut out, initial);
        }
        Ok(out)
    }

    /// Least-squares gains for a set of atoms, and the residual they leave.
    fn project(&self, y: &[Complex64], atoms: &[Vec<Complex64>]) -> Option<(Vec<Complex64>, Vec<Complex64>)> {
        let m = y.len();
        let a = CMatrix::from_fn(m, atoms.len(), |i, j| atoms[j][i]);
        let yv = DVector::from_column_slice(y);
        let gains = a.clone().svd(true, true).solve(&yv, 1e-12).ok()?;
        let res = yv - &a * &gains;
        Some((gains.iter().copied().collect(), res.iter().copied().collect()))
    }

    /// Levenberg-Marquardt over all `(l, k)` pairs with the gains eliminated
    /// by least squares. Only steps that lower the residual are taken.
    fn joint_refit(&self, y: &[Complex64], out: &mut [PathEstimate], initial: f64) {
        let p = out.len();
        let mut theta: Vec<f64> = out.iter().flat_map(|e| [e.ell_hat, e.k_hat]).collect();
        let atom_at = |t: &[f64], i: usize| {
            let (l, k) = self.clamp(t[2 * i], t[2 * i + 1]);
            self.response(l, k)
        };
        let mut atoms: Vec<Vec<Complex64>> = (0..p).map(|i| atom_at(&theta, i)).collect();
        let Some((mut gains, mut res)) = self.project(y, &atoms) else {
            return;
        };
        let mut cost = norm2(&res);
        if cost > out[p - 1].residual_energy {
            return;
        }
        let mut lambda = 1e-3;
        for _ in 0..JOINT_ITERS {
            if cost <= 1e-20 * initial {
                break;
            }
            // central-difference Jacobian of the projected residual
            let mut jac = nalgebra::DMatrix::<f64>::zeros(2 * y.len(), 2 * p);
            for q in 0..2 * p {
                let i = q / 2;
                let col = |sign: f64| {
                    let mut t = theta.clone();
                    t[q] += sign * FD_STEP;
                    let mut at = atoms.clone();
                    at[i] = atom_at(&t, i);
                    self.project(y, &at).map(|(_, r)| r)
                };
                let (Some(rp), Some(rm)) = (col(1.0), col(-1.0)) else {
                    return;
                };
                for (n, (a, b)) in rp.iter().zip(&rm).enumerate() {
                    let d = (a - b) / (2.0 * FD_STEP);
                    jac[(2 * n, q)] = d.re;
                    jac[(2 * n + 1, q)] = d.im;
                }
            }
            let rv = nalgebra::DVector::<f64>::from_iterator(2 * y.len(), res.iter().flat_map(|c| [c.re, c.im]));
            let jtj = jac.transpose() * &jac;
            let jtr = jac.transpose() * rv;
            let mut improved = false;
            while lambda < 1e8 {
                let mut lhs = jtj.clone();
                for d in 0..2 * p {
                    lhs[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
                }
                let Some(step) = lhs.cholesky().map(|c| c.solve(&jtr)) else {
                    lambda *= 4.0;
                    continue;
                };
                let cand: Vec<f64> = theta
                    .iter()
                    .zip(step.iter())
                    .enumerate()
                    .map(|(q, (t, s))| {
                        let v = t - s;
                        if q % 2 == 0 {
                            v.clamp(self.cfg.chan.delay_low, self.cfg.chan.delay_high)
                        } else {
                            let kmax = self.cfg.chan.k_max as f64;
                            v.clamp(-kmax, kmax)
                        }
                    })
                    .collect();
                let cand_atoms: Vec<Vec<Complex64>> = (0..p).map(|i| atom_at(&cand, i)).collect();
                if let Some((g, r)) = self.project(y, &cand_atoms) {
                    let c = norm2(&r);
                    if c < cost {
                        let gain = (cost - c) / cost;
                        theta = cand;
                        atoms = cand_atoms;
                        gains = g;
                        res = r;
                        cost = c;
                        lambda = (lambda / 3.0).max(1e-9);
                        improved = gain > 1e-10;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        for (i, e) in out.iter_mut().enumerate() {
            let (l, k) = self.clamp(theta[2 * i], theta[2 * i + 1]);
            e.ell_hat = l;
            e.k_hat = k;
            e.h_hat = gains[i];
        }
        out[p - 1].residual_energy = cost;
    }
}

/// Convenience wrapper building a one-off estimator.
pub fn estimate_channel(
    y_pilot: &[Complex64],
    x_pilot: &[Complex64],
    cfg: &ValidatedConfig,
    g_t: &SampledPulse,
    mode: &ReceiveMode,
    max_paths: usize,
) -> Result<Vec<PathEstimate>> {
    Estimator::new(cfg, g_t, mode, x_pilot)?.estimate(y_pilot, max_paths)
}

/// Writes `p,h_re,h_im,ell,k,residual` rows.
pub fn write_estimates_csv<W: std::io::Write>(estimates: &[PathEstimate], mut w: W) -> Result<()> {
    writeln!(w, "p,h_re,h_im,ell,k,residual")?;
    for (p, e) in estimates.iter().enumerate() {
        writeln!(
            w,
            "{p},{},{},{},{},{}",
            e.h_hat.re, e.h_hat.im, e.ell_hat, e.k_hat, e.residual_energy
        )?;
    }
    Ok(())
}

/// Effective channel matrix of the estimated paths (same kernel as the
/// true matrix).
pub fn reconstruct_h(
    estimates: &[PathEstimate],
    cfg: &ValidatedConfig,
    g_t: &SampledPulse,
    mode: &ReceiveMode,
    cols: std::ops::Range<usize>,
) -> ChannelMatrix {
    let paths: Vec<ChannelPath> = estimates.iter().map(PathEstimate::path).collect();
    ChannelMatrix {
        entries: build_h_block(&cfg.grid, &paths, g_t, &mode.window, cols),
        mode: mode.kind,
        fingerprint: cfg.fingerprint(),
    }
}

/// `||H_hat - H||_F^2 / ||H||_F^2`.
pub fn nmse(h_hat: &CMatrix, h: &CMatrix) -> Result<f64> {
    if h_hat.shape() != h.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", h.shape()),
            found: format!("{:?}", h_hat.shape()),
        });
    }
    Ok((h_hat - h).norm_squared() / h.norm_squared())
}
