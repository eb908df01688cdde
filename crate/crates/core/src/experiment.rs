//! Seeded Monte Carlo sweeps: conditioning, noiseless estimation NMSE, and
//! uncoded BER with perfect or estimated channel knowledge.
//!
//! Every trial draws from RNG substreams keyed by `(seed, experiment,
//! trial, purpose)`, so all modes of one trial see the same channel, bits and
//! noise, and results do not depend on how trials are spread over threads.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{add_noise, apply_discrete_channel, draw_channel, ChannelRealization};
use crate::config::{Mode, ValidatedConfig};
use crate::equalizer::Lmmse;
use crate::error::{Error, Result};
use crate::estimation::{nmse, pilot_frame, reconstruct_h, Estimator};
use crate::matrix::{build_h_block, condition_number, overall_gt, white_noise_covariance, CMatrix};
use crate::pulse::SampledPulse;
use crate::qam::{ber_count, random_bits, QamSpec};
use crate::receiver::{demodulate_frame, ReceiveMode};
use crate::report::{median, ExperimentReport, ReportMetadata, ReportRow};
use crate::transmitter::{map_scheduled, Transmitter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Cond = 1,
    Nmse = 2,
    Ber = 3,
    Frame = 4,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Cond => "cond",
            Experiment::Nmse => "nmse",
            Experiment::Ber => "ber",
            Experiment::Frame => "frame",
        }
    }
}

pub const STREAM_CHANNEL: u64 = 0;
pub const STREAM_BITS: u64 = 1;
pub const STREAM_NOISE: u64 = 2;
pub const STREAM_PILOT_NOISE: u64 = 3;

/// Independent generator for one `(seed, experiment, trial, purpose)`.
pub fn substream(seed: u64, experiment: Experiment, trial: u64, purpose: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(experiment as u64).to_le_bytes());
    key[16..24].copy_from_slice(&trial.to_le_bytes());
    key[24..].copy_from_slice(&purpose.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Channel draw shared by every mode of a trial.
pub fn trial_channel(cfg: &ValidatedConfig, experiment: Experiment, trial: u64) -> ChannelRealization {
    draw_channel(&cfg.chan, &mut substream(cfg.seed, experiment, trial, STREAM_CHANNEL))
}

/// Which part of `H` a condition number is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondScope {
    /// Every row, scheduled columns: the system the equalizer inverts.
    ScheduledColumns,
    /// Scheduled rows and columns only.
    ScheduledBlock,
    Full,
}

impl std::str::FromStr for CondScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheduled-columns" | "scheduled_columns" => Ok(CondScope::ScheduledColumns),
            "scheduled-block" | "scheduled_block" => Ok(CondScope::ScheduledBlock),
            "full" => Ok(CondScope::Full),
            other => Err(Error::Parse(format!("unknown scope '{other}'"))),
        }
    }
}

/// A receiver variant in a sweep: a mode and, for overlap-summation, the
/// roll-off it runs at.
#[derive(Debug, Clone)]
pub struct Variant {
    pub cfg: ValidatedConfig,
    pub mode: ReceiveMode,
    pub alpha_w: f64,
}

/// Expands modes over the roll-off grid. Modes that remove the whole
/// prefix do not depend on the roll-off and appear once, at `alpha_W = 0`.
pub fn variants(cfg: &ValidatedConfig, modes: &[Mode], alpha_grid: &[f64]) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for &kind in modes {
        match kind {
            Mode::OsPs => {
                for &a in alpha_grid {
                    let c = cfg.with_alpha_w(a)?.with_mode(kind);
                    let mode = ReceiveMode::standard(&c, kind);
                    let alpha_w = c.grid.overlap() as f64 / c.grid.m as f64;
                    out.push(Variant { cfg: c, mode, alpha_w });
                }
            }
            _ => {
                let c = cfg.with_mode(kind);
                let mode = ReceiveMode::standard(&c, kind);
                out.push(Variant { cfg: c, mode, alpha_w: 0.0 });
            }
        }
    }
    Ok(out)
}

fn metadata(cfg: &ValidatedConfig) -> ReportMetadata {
    ReportMetadata {
        fingerprint: cfg.fingerprint(),
        seed: cfg.seed,
        version: crate::report::version_string(),
    }
}

fn row(exp: Experiment, v: &Variant, snr_db: Option<f64>, trial: String, metric: &str, value: f64) -> ReportRow {
    ReportRow {
        experiment: exp.as_str().into(),
        mode: v.mode.kind,
        window_kind: v.mode.window_kind(),
        alpha_w: v.alpha_w,
        snr_db,
        trial,
        metric: metric.into(),
        value,
    }
}

fn scope_matrix(v: &Variant, g_t: &SampledPulse, ch: &ChannelRealization, scope: CondScope) -> CMatrix {
    let g = &v.cfg.grid;
    match scope {
        CondScope::Full => build_h_block(g, &ch.paths, g_t, &v.mode.window, 0..g.m),
        CondScope::ScheduledColumns => build_h_block(g, &ch.paths, g_t, &v.mode.window, g.scheduled.clone()),
        CondScope::ScheduledBlock => {
            let cols = build_h_block(g, &ch.paths, g_t, &v.mode.window, g.scheduled.clone());
            cols.rows(g.scheduled.start, g.scheduled.len()).into_owned()
        }
    }
}

/// Condition number of `H` per trial and variant, plus per-variant medians.
pub fn run_condition_sweep(
    cfg: &ValidatedConfig,
    modes: &[Mode],
    alpha_grid: &[f64],
    trials: usize,
    scope: CondScope,
) -> Result<ExperimentReport> {
    let vars = variants(cfg, modes, alpha_grid)?;
    let g_t = overall_gt(cfg);
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ch = trial_channel(cfg, Experiment::Cond, t);
            vars.iter()
                .map(|v| condition_number(&scope_matrix(v, &g_t, &ch, scope)))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(metadata(cfg));
    for (i, v) in vars.iter().enumerate() {
        let vals: Vec<f64> = per_trial.iter().map(|r| r[i]).collect();
        for (t, &x) in vals.iter().enumerate() {
            report.rows.push(row(Experiment::Cond, v, None, t.to_string(), "cond", x));
        }
        report.rows.push(row(Experiment::Cond, v, None, "median".into(), "cond", median(&vals)));
    }
    report.sort();
    Ok(report)
}

/// Noiseless pilot estimation NMSE of the scheduled columns of `H`.
/// With `bypass`, the true paths stand in for the estimates.
pub fn run_nmse_sweep(
    cfg: &ValidatedConfig,
    modes: &[Mode],
    alpha_grid: &[f64],
    trials: usize,
    bypass: bool,
) -> Result<ExperimentReport> {
    let vars = variants(cfg, modes, alpha_grid)?;
    let g_t = overall_gt(cfg);
    let pilot = pilot_frame(cfg);
    let mp = pilot.iter().position(|v| v.norm() > 0.0).expect("pilot has one impulse");
    let estimators: Vec<Estimator> = vars
        .iter()
        .map(|v| Estimator::new(&v.cfg, &g_t, &v.mode, &pilot))
        .collect::<Result<_>>()?;
    let per_trial: Vec<Vec<f64>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let ch = trial_channel(cfg, Experiment::Nmse, t);
            vars.iter()
                .zip(&estimators)
                .map(|(v, est)| {
                    let g = &v.cfg.grid;
                    let h = build_h_block(g, &ch.paths, &g_t, &v.mode.window, g.scheduled.clone());
                    let paths = if bypass {
                        ch.paths
                            .iter()
                            .map(|p| crate::estimation::PathEstimate {
                                h_hat: p.gain,
                                ell_hat: p.delay,
                                k_hat: p.doppler,
                                residual_energy: 0.0,
                            })
                            .collect()
                    } else {
                        let y: Vec<Complex64> = h.column(mp - g.scheduled.start).iter().copied().collect();
                        est.estimate(&y, cfg.chan.paths)?
                    };
                    let h_hat = reconstruct_h(&paths, &v.cfg, &g_t, &v.mode, g.scheduled.clone());
                    nmse(&h_hat.entries, &h)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new(metadata(cfg));
    for (i, v) in vars.iter().enumerate() {
        let vals: Vec<f64> = per_trial.iter().map(|r| r[i]).collect();
        for (t, &x) in vals.iter().enumerate() {
            report.rows.push(row(Experiment::Nmse, v, None, t.to_string(), "nmse", x));
        }
        report.rows.push(row(Experiment::Nmse, v, None, "median".into(), "nmse", median(&vals)));
    }
    report.sort();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Csi {
    Perfect,
    Estimated,
}

impl std::str::FromStr for Csi {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(Csi::Perfect),
            "estimated" => Ok(Csi::Estimated),
            other => Err(Error::Parse(format!("unknown CSI kind '{other}'"))),
        }
    }
}

/// Noise covariance assumed by the LMMSE equalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// `sigma^2 I`, ignoring the colouring introduced by the receive window.
    White,
    /// The exact post-receiver covariance of white sampler noise.
    Colored,
}

impl std::str::FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "white" => Ok(NoiseModel::White),
            "colored" => Ok(NoiseModel::Colored),
            other => Err(Error::Parse(format!("unknown noise model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BerOptions {
    pub csi: Csi,
    pub noise: NoiseModel,
    /// Stop a point once [`EARLY_STOP_ERRORS`] bit errors have accumulated.
    pub early_stop: bool,
}

impl Default for BerOptions {
    fn default() -> Self {
        Self {
            csi: Csi::Perfect,
            noise: NoiseModel::White,
            early_stop: true,
        }
    }
}

/// Noise variance per baseband sample for unit-energy symbols.
pub fn noise_variance(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Shared per-sweep state for BER trials of one variant.
pub struct BerLink<'a> {
    pub variant: &'a Variant,
    pub g_t: &'a SampledPulse,
    pub qam: &'a QamSpec,
    pub estimator: Option<&'a Estimator>,
    pub noise: NoiseModel,
}

impl BerLink<'_> {
    /// Sends one frame of random data through the sampled channel and
    /// returns `(bit errors, bits)`.
    pub fn trial(&self, ch: &ChannelRealization, seed: u64, trial: u64, snr_idx: usize, snr_db: f64) -> Result<(u64, u64)> {
        let cfg = &self.variant.cfg;
        let g = &cfg.grid;
        let mode = &self.variant.mode;
        let sigma2 = noise_variance(snr_db);
        let n_bits = g.scheduled_len() * self.qam.bits_per_symbol as usize;
        let mut bit_rng = substream(seed, Experiment::Ber, trial, STREAM_BITS);
        let bits = random_bits(&mut bit_rng, n_bits);
        let x = map_scheduled(cfg, &self.qam.modulate(&bits)?);
        let tx = Transmitter::with_pulse(cfg, crate::pulse::make_delta(1));
        let mut noise_rng = substream(seed, Experiment::Ber, trial, STREAM_NOISE + 16 * snr_idx as u64);
        let s = tx.modulate_baseband(&x).s.expect("baseband stage");
        let r = add_noise(&apply_discrete_channel(&s, ch, self.g_t, g)?, sigma2, &mut noise_rng);
        let (y, _) = demodulate_frame(&r, mode, g)?;

        let h = match self.estimator {
            Some(est) => {
                let pilot = pilot_frame(cfg);
                let mut pr = substream(seed, Experiment::Ber, trial, STREAM_PILOT_NOISE + 16 * snr_idx as u64);
                let sp = tx.modulate_baseband(&pilot).s.expect("baseband stage");
                let rp = add_noise(&apply_discrete_channel(&sp, ch, self.g_t, g)?, sigma2, &mut pr);
                let (yp, _) = demodulate_frame(&rp, mode, g)?;
                let paths = est.estimate(&yp, cfg.chan.paths)?;
                reconstruct_h(&paths, cfg, self.g_t, mode, g.scheduled.clone()).entries
            }
            None => build_h_block(g, &ch.paths, self.g_t, &mode.window, g.scheduled.clone()),
        };
        let r_w = match self.noise {
            NoiseModel::White => CMatrix::identity(g.m, g.m) * Complex64::new(sigma2, 0.0),
            NoiseModel::Colored => white_noise_covariance(g, &mode.window, sigma2).matrix,
        };
        let x_hat = Lmmse::new(&h, &r_w, 1.0)?.apply(&y);
        ber_count(&bits, &self.qam.demodulate(&x_hat))
    }
}

/// Trials are taken in order until at least `stop_errors` bit errors have
/// accumulated; the cut-off does not depend on the degree of parallelism.
pub const EARLY_STOP_ERRORS: u64 = 200;

/// Uncoded BER per variant and SNR point.
pub fn run_ber_sweep(
    cfg: &ValidatedConfig,
    modes: &[Mode],
    alpha_grid: &[f64],
    snr_grid: &[f64],
    trials: usize,
    opts: BerOptions,
) -> Result<ExperimentReport> {
    let BerOptions { csi, noise, early_stop } = opts;
    let vars = variants(cfg, modes, alpha_grid)?;
    let g_t = overall_gt(cfg);
    let qam = QamSpec::new(cfg.qam_bits)?;
    let estimators: Vec<Option<Estimator>> = match csi {
        Csi::Perfect => vars.iter().map(|_| None).collect(),
        Csi::Estimated => vars
            .iter()
            .map(|v| Estimator::new(&v.cfg, &g_t, &v.mode, &pilot_frame(&v.cfg)).map(Some))
            .collect::<Result<_>>()?,
    };
    let chunk = rayon::current_num_threads().max(1) * 2;
    let mut report = ExperimentReport::new(metadata(cfg));
    let metric_suffix = match csi {
        Csi::Perfect => "",
        Csi::Estimated => "_est",
    };
    for (v, est) in vars.iter().zip(&estimators) {
        let link = BerLink {
            variant: v,
            g_t: &g_t,
            qam: &qam,
            estimator: est.as_ref(),
            noise,
        };
        for (si, &snr) in snr_grid.iter().enumerate() {
            let mut results: Vec<(u64, u64)> = Vec::new();
            let mut errors = 0;
            let mut next = 0u64;
            'outer: while (next as usize) < trials {
                let end = (next + chunk as u64).min(trials as u64);
                let batch: Vec<(u64, u64)> = (next..end)
                    .into_par_iter()
                    .map(|t| link.trial(&trial_channel(cfg, Experiment::Ber, t), cfg.seed, t, si, snr))
                    .collect::<Result<_>>()?;
                next = end;
                for b in batch {
                    results.push(b);
                    errors += b.0;
                    if early_stop && errors >= EARLY_STOP_ERRORS {
                        break 'outer;
                    }
                }
            }
            let (mut e_tot, mut n_tot) = (0, 0);
            for (t, &(e, n)) in results.iter().enumerate() {
                report.rows.push(row(
                    Experiment::Ber,
                    v,
                    Some(snr),
                    t.to_string(),
                    &format!("bit_errors{metric_suffix}"),
                    e as f64,
                ));
                e_tot += e;
                n_tot += n;
            }
            report.rows.push(row(
                Experiment::Ber,
                v,
                Some(snr),
                "pooled".into(),
                &format!("ber{metric_suffix}"),
                e_tot as f64 / n_tot as f64,
            ));
            report.rows.push(row(
                Experiment::Ber,
                v,
                Some(snr),
                "pooled".into(),
                &format!("bits{metric_suffix}"),
                n_tot as f64,
            ));
        }
    }
    report.sort();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{validate_config, Profile};
    use rand::Rng;

    fn tiny() -> ValidatedConfig {
        validate_config(Profile::Desk.config())
            .unwrap()
            .modify(|c| {
                c.grid.m = 128;
                c.grid.c1 = crate::config::compute_c1(3, 4, 128);
                c.grid.scheduled = 0..32;
                c.filter_halfspan = 8;
                c.chan.delay_low = 8.0;
                c.chan.delay_high = 12.0;
                c.grid.l_d = 20;
                c.grid.l_r = 20;
            })
            .unwrap()
    }

    #[test]
    fn substreams_are_distinct_and_stable() {
        let a: u64 = substream(1, Experiment::Cond, 0, 0).random();
        let b: u64 = substream(1, Experiment::Cond, 0, 0).random();
        let c: u64 = substream(1, Experiment::Cond, 1, 0).random();
        let d: u64 = substream(1, Experiment::Nmse, 0, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn variants_expand_alpha_for_overlap_only() {
        let cfg = tiny();
        let v = variants(&cfg, &Mode::ALL, &[0.1, 0.2]).unwrap();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0].cfg.grid.overlap(), 13);
        assert_eq!(v[2].alpha_w, 0.0);
        assert_eq!(v[3].mode.window.d, 0);
    }

    #[test]
    fn identity_like_channel_has_unit_condition() {
        let cfg = tiny()
            .modify(|c| {
                c.chan.paths = 1;
                c.chan.k_max = 0;
                c.chan.delay_low = 8.0;
                c.chan.delay_high = 8.0;
            })
            .unwrap();
        let r = run_condition_sweep(&cfg, &[Mode::Plain], &[], 1, CondScope::Full).unwrap();
        let v = r.rows.iter().find(|r| r.trial == "0").unwrap().value;
        assert!((v - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn condition_sweep_is_reproducible() {
        let cfg = tiny();
        let a = run_condition_sweep(&cfg, &Mode::ALL, &[0.25], 3, CondScope::ScheduledColumns).unwrap();
        let b = run_condition_sweep(&cfg, &Mode::ALL, &[0.25], 3, CondScope::ScheduledColumns).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.rows.len(), 3 * 4);
    }

    #[test]
    fn bypassed_estimator_has_zero_nmse() {
        let cfg = tiny();
        let r = run_nmse_sweep(&cfg, &[Mode::OsPs, Mode::Plain], &[0.2], 2, true).unwrap();
        assert!(r.rows.iter().all(|r| r.value == 0.0));
        assert!(r.rows.iter().any(|r| r.mode == Mode::Plain));
    }

    #[test]
    fn noiseless_ber_is_zero() {
        let cfg = tiny();
        let r = run_ber_sweep(&cfg, &[Mode::OsPs], &[0.2], &[200.0], 3, BerOptions::default()).unwrap();
        let ber = r.rows.iter().find(|r| r.metric == "ber").unwrap().value;
        assert_eq!(ber, 0.0);
    }
}
