//! Numerology, channel-generation and experiment configuration.
//!
//! All prefix lengths are integers and the overlap ratio `alpha_W = D/M` is
//! kept as an exact rational, so the receive window can be built without
//! floating-point drift in its breakpoints.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Deref, Range};
use std::path::Path;
use std::str::FromStr;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    /// Subcarrier count `M`.
    pub m: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Cell-level chirp rate, per sample squared.
    pub c1: Rational64,
    /// User-level prechirp rate, per symbol squared.
    pub c2: Rational64,
    /// Prefix length covering the delay spread.
    pub l_d: usize,
    /// Extended prefix length reserved for receive shaping.
    pub l_w: usize,
    /// Prefix length discarded at the receiver.
    pub l_r: usize,
    /// Contiguous data subcarriers `[lo, hi)`.
    pub scheduled: Range<usize>,
}

impl GridConfig {
    /// Total transmitted prefix, `L_D + L_W`.
    pub fn prefix_len(&self) -> usize {
        self.l_d + self.l_w
    }

    /// Samples per transmitted frame, prefix included.
    pub fn frame_len(&self) -> usize {
        self.m + self.prefix_len()
    }

    /// Retained prefix after partial removal, `D = L_D + L_W - L_R`.
    /// Negative only for invalid grids.
    pub fn overlap_signed(&self) -> i64 {
        self.prefix_len() as i64 - self.l_r as i64
    }

    pub fn overlap(&self) -> usize {
        self.overlap_signed().max(0) as usize
    }

    pub fn alpha_w(&self) -> Rational64 {
        Rational64::new(self.overlap_signed(), self.m as i64)
    }

    /// Sample spacing `1 / (M delta_f)`.
    pub fn delta_t(&self) -> f64 {
        1.0 / (self.m as f64 * self.delta_f)
    }

    pub fn scheduled_len(&self) -> usize {
        self.scheduled.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelGenParams {
    /// Path count `P`.
    pub paths: usize,
    /// Maximum normalized Doppler, in subcarriers.
    pub k_max: u32,
    /// Guard Doppler margin used in the chirp-rate formula.
    pub k_res: u32,
    pub delay_low: f64,
    pub delay_high: f64,
    /// Per-path gain variance, usually `1/P`.
    pub gain_variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Receive windowing with overlap-summation of the retained prefix.
    #[serde(alias = "os-ps")]
    OsPs,
    /// Full prefix removal followed by a multiplicative window on `[0, M)`.
    #[serde(alias = "direct-window")]
    DirectWindow,
    /// Plain AFDM: full prefix removal, no window.
    Plain,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::OsPs, Mode::DirectWindow, Mode::Plain];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::OsPs => "os_ps",
            Mode::DirectWindow => "direct_window",
            Mode::Plain => "plain",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "os_ps" => Ok(Mode::OsPs),
            "direct_window" => Ok(Mode::DirectWindow),
            "plain" => Ok(Mode::Plain),
            other => Err(Error::Parse(format!("unknown mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    Rc,
    Chebyshev,
    Rectangular,
}

impl WindowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowKind::Rc => "rc",
            WindowKind::Chebyshev => "chebyshev",
            WindowKind::Rectangular => "rectangular",
        }
    }
}

impl fmt::Display for WindowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rc" => Ok(WindowKind::Rc),
            "chebyshev" => Ok(WindowKind::Chebyshev),
            "rectangular" => Ok(WindowKind::Rectangular),
            other => Err(Error::Parse(format!("unknown window kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub chan: ChannelGenParams,
    pub pulse_rolloff: f64,
    pub oversample: usize,
    /// Half-support `L_T/2` of the overall pulse, in baseband samples.
    pub filter_halfspan: usize,
    pub window_kind: WindowKind,
    pub cheb_atten_db: f64,
    pub mode: Mode,
    pub qam_bits: u32,
    pub snr_grid_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

/// An [`ExperimentConfig`] that passed [`validate_config`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig(ExperimentConfig);

impl Deref for ValidatedConfig {
    type Target = ExperimentConfig;

    fn deref(&self) -> &ExperimentConfig {
        &self.0
    }
}

impl ValidatedConfig {
    pub fn into_inner(self) -> ExperimentConfig {
        self.0
    }

    /// Re-validates after an edit.
    pub fn modify(&self, f: impl FnOnce(&mut ExperimentConfig)) -> Result<ValidatedConfig> {
        let mut cfg = self.0.clone();
        f(&mut cfg);
        validate_config(cfg)
    }

    /// Sets `L_W` so that `D = round(alpha * M)` with `L_D`, `L_R` unchanged.
    pub fn with_alpha_w(&self, alpha: f64) -> Result<ValidatedConfig> {
        let g = &self.grid;
        let d = (alpha * g.m as f64).round() as i64;
        let l_w = d - g.l_d as i64 + g.l_r as i64;
        if l_w < 0 {
            return Err(Error::InvalidConfig(vec![Violation {
                field: "L_W",
                reason: format!("alpha_W={alpha} needs negative extended prefix"),
            }]));
        }
        self.modify(|c| c.grid.l_w = l_w as usize)
    }

    pub fn with_mode(&self, mode: Mode) -> ValidatedConfig {
        let mut cfg = self.0.clone();
        cfg.mode = mode;
        ValidatedConfig(cfg)
    }
}

/// Chirp rate `(2(K_max + K_res) + 1) / (2M)`; `2 M c1` is always odd.
pub fn compute_c1(k_max: u32, k_res: u32, m: usize) -> Rational64 {
    Rational64::new(2 * (k_max as i64 + k_res as i64) + 1, 2 * m as i64)
}

pub fn validate_config(cfg: ExperimentConfig) -> Result<ValidatedConfig> {
    let mut v = Vec::new();
    let mut bad = |field: &'static str, reason: String| v.push(Violation { field, reason });
    let g = &cfg.grid;
    let ch = &cfg.chan;

    if g.m == 0 {
        bad("M", "must be positive".into());
    }
    if !(g.delta_f > 0.0) {
        bad("delta_f", "must be positive".into());
    }
    if g.l_r > g.prefix_len() {
        bad("L_R", format!("exceeds transmitted prefix L_D+L_W={}", g.prefix_len()));
    } else if g.overlap() >= g.m {
        bad("L_W", format!("retained prefix D={} must be below M={}", g.overlap(), g.m));
    }
    if g.scheduled.start >= g.scheduled.end || g.scheduled.end > g.m {
        bad(
            "scheduled",
            format!("range {:?} must be non-empty within [0, {})", g.scheduled, g.m),
        );
    }
    if ch.paths == 0 {
        bad("P", "need at least one path".into());
    }
    if !(ch.gain_variance > 0.0) {
        bad("gain_variance", "must be positive".into());
    }
    if !(ch.delay_low <= ch.delay_high) {
        bad("delay_high", "must not be below delay_low".into());
    }
    if ch.delay_low < cfg.filter_halfspan as f64 {
        bad(
            "delay_low",
            format!("must be at least the pulse half-support {}", cfg.filter_halfspan),
        );
    }
    if (g.l_r as f64) < ch.delay_high.ceil() + cfg.filter_halfspan as f64 {
        bad("L_R", "prefix removal shorter than channel span".into());
    }
    if !(0.0..=1.0).contains(&cfg.pulse_rolloff) {
        bad("pulse_rolloff", "must lie in [0, 1]".into());
    }
    if cfg.oversample == 0 {
        bad("oversample", "must be at least 1".into());
    }
    if !(cfg.cheb_atten_db > 0.0) {
        bad("cheb_atten_db", "must be positive".into());
    }
    if cfg.qam_bits % 2 != 0 || !(2..=10).contains(&cfg.qam_bits) {
        bad("qam_bits", "must be even within [2, 10]".into());
    }
    if cfg.trials == 0 {
        bad("trials", "must be at least 1".into());
    }

    if v.is_empty() {
        Ok(ValidatedConfig(cfg))
    } else {
        Err(Error::InvalidConfig(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrefixStrategy {
    LowOverhead,
    LowSidelobe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrefixPlan {
    pub l_w: usize,
    pub l_r: usize,
    pub alpha_w: Rational64,
}

/// Chooses `L_W` and `L_R` from an estimated delay spread.
pub fn resolve_prefix_strategy(
    strategy: PrefixStrategy,
    l_tau_est: usize,
    l_w_min: usize,
    grid: &GridConfig,
) -> Result<PrefixPlan> {
    if l_tau_est > grid.l_d {
        return Err(Error::StrategyInfeasible(format!(
            "estimated delay spread {l_tau_est} exceeds L_D={}",
            grid.l_d
        )));
    }
    let l_w = match strategy {
        PrefixStrategy::LowOverhead => 0,
        PrefixStrategy::LowSidelobe => l_w_min,
    };
    let d = (grid.l_d + l_w) as i64 - l_tau_est as i64;
    if d < 0 || d >= grid.m as i64 {
        return Err(Error::StrategyInfeasible(format!(
            "retained prefix D={d} outside [0, M={})",
            grid.m
        )));
    }
    Ok(PrefixPlan {
        l_w,
        l_r: l_tau_est,
        alpha_w: Rational64::new(d, grid.m as i64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// M=512 scaled-down profile that runs in minutes.
    Desk,
    /// Full-size numerology (M=4096, 1024-QAM, 10 paths). Slow.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Parse(format!("unknown profile '{other}'"))),
        }
    }
}

impl Profile {
    pub fn config(self) -> ExperimentConfig {
        let file = match self {
            Profile::Desk => ConfigFile {
                m: Some(512),
                l_d: Some(36),
                l_w: Some(0),
                l_r: Some(36),
                scheduled: Some([0, 128]),
                paths: Some(4),
                delay_low: Some(16.0),
                delay_high: Some(20.0),
                qam_bits: Some(2),
                snr_grid_db: Some(vec![0.0, 4.0, 8.0, 12.0, 16.0, 20.0]),
                trials: Some(50),
                ..ConfigFile::default()
            },
            Profile::Paper => ConfigFile {
                m: Some(4096),
                l_d: Some(288),
                l_w: Some(0),
                l_r: Some(288),
                scheduled: Some([0, 600]),
                paths: Some(10),
                delay_low: Some(16.0),
                delay_high: Some(26.0),
                qam_bits: Some(10),
                snr_grid_db: Some(vec![20.0, 25.0, 30.0, 35.0, 40.0]),
                trials: Some(20),
                ..ConfigFile::default()
            },
        };
        file.resolve(None).expect("built-in profile is complete")
    }
}

/// Flat key-value configuration file. Keys missing from the file inherit
/// the base profile; unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_f: Option<f64>,
    /// `"p/q"`, an integer, or `"auto"` for the chirp-rate formula.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c2: Option<String>,
    #[serde(rename = "L_D", skip_serializing_if = "Option::is_none")]
    pub l_d: Option<usize>,
    #[serde(rename = "L_W", skip_serializing_if = "Option::is_none")]
    pub l_w: Option<usize>,
    #[serde(rename = "L_R", skip_serializing_if = "Option::is_none")]
    pub l_r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheduled: Option<[usize; 2]>,
    #[serde(rename = "P", skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[serde(rename = "K_max", skip_serializing_if = "Option::is_none")]
    pub k_max: Option<u32>,
    #[serde(rename = "K_res", skip_serializing_if = "Option::is_none")]
    pub k_res: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_low: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_high: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain_variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pulse_rolloff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oversample: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter_halfspan: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_kind: Option<WindowKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cheb_atten_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qam_bits: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub fn parse_rational(s: &str) -> Result<Rational64> {
    let s = s.trim();
    let bad = || Error::Parse(format!("'{s}' is not a rational p/q"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: i64 = p.trim().parse().map_err(|_| bad())?;
            let q: i64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0 {
                return Err(bad());
            }
            Ok(Rational64::new(p, q))
        }
        None => Ok(Rational64::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Fills missing keys from `base` (or fails if a key has no fallback).
    pub fn resolve(&self, base: Option<&ExperimentConfig>) -> Result<ExperimentConfig> {
        fn req<T: Clone>(v: &Option<T>, fallback: Option<T>, key: &'static str) -> Result<T> {
            v.clone()
                .or(fallback)
                .ok_or_else(|| Error::Parse(format!("missing key '{key}'")))
        }
        let bg = base.map(|b| &b.grid);
        let bc = base.map(|b| &b.chan);

        let m = req(&self.m, bg.map(|g| g.m), "M")?;
        let k_max = req(&self.k_max, Some(bc.map_or(3, |c| c.k_max)), "K_max")?;
        let k_res = req(&self.k_res, Some(bc.map_or(4, |c| c.k_res)), "K_res")?;
        let c1 = match self.c1.as_deref().map(str::trim) {
            None | Some("auto") => compute_c1(k_max, k_res, m),
            Some(s) => parse_rational(s)?,
        };
        let c2 = match self.c2.as_deref() {
            Some(s) => parse_rational(s)?,
            None => bg.map_or(Rational64::from_integer(0), |g| g.c2),
        };
        let paths = req(&self.paths, bc.map(|c| c.paths), "P")?;
        let gain_variance = match (self.gain_variance, self.paths) {
            (Some(v), _) => v,
            (None, Some(p)) => 1.0 / p as f64,
            (None, None) => bc.map_or(1.0 / paths as f64, |c| c.gain_variance),
        };
        let sched = req(&self.scheduled, bg.map(|g| [g.scheduled.start, g.scheduled.end]), "scheduled")?;

        Ok(ExperimentConfig {
            grid: GridConfig {
                m,
                delta_f: req(&self.delta_f, Some(bg.map_or(15e3, |g| g.delta_f)), "delta_f")?,
                c1,
                c2,
                l_d: req(&self.l_d, bg.map(|g| g.l_d), "L_D")?,
                l_w: req(&self.l_w, Some(bg.map_or(0, |g| g.l_w)), "L_W")?,
                l_r: req(&self.l_r, bg.map(|g| g.l_r), "L_R")?,
                scheduled: sched[0]..sched[1],
            },
            chan: ChannelGenParams {
                paths,
                k_max,
                k_res,
                delay_low: req(&self.delay_low, bc.map(|c| c.delay_low), "delay_low")?,
                delay_high: req(&self.delay_high, bc.map(|c| c.delay_high), "delay_high")?,
                gain_variance,
            },
            pulse_rolloff: req(&self.pulse_rolloff, Some(base.map_or(0.2, |b| b.pulse_rolloff)), "pulse_rolloff")?,
            oversample: req(&self.oversample, Some(base.map_or(8, |b| b.oversample)), "oversample")?,
            filter_halfspan: req(&self.filter_halfspan, Some(base.map_or(16, |b| b.filter_halfspan)), "filter_halfspan")?,
            window_kind: req(&self.window_kind, Some(base.map_or(WindowKind::Rc, |b| b.window_kind)), "window_kind")?,
            cheb_atten_db: req(&self.cheb_atten_db, Some(base.map_or(60.0, |b| b.cheb_atten_db)), "cheb_atten_db")?,
            mode: req(&self.mode, Some(base.map_or(Mode::OsPs, |b| b.mode)), "mode")?,
            qam_bits: req(&self.qam_bits, base.map(|b| b.qam_bits), "qam_bits")?,
            snr_grid_db: req(
                &self.snr_grid_db,
                Some(base.map_or_else(|| (0..=6).map(|i| 5.0 * i as f64).collect(), |b| b.snr_grid_db.clone())),
                "snr_grid_db",
            )?,
            trials: req(&self.trials, base.map(|b| b.trials), "trials")?,
            seed: req(&self.seed, Some(base.map_or(1, |b| b.seed)), "seed")?,
        })
    }
}

impl ExperimentConfig {
    /// Stable textual fingerprint of every field, used in report metadata.
    pub fn fingerprint(&self) -> String {
        let g = &self.grid;
        let c = &self.chan;
        let mut kv = BTreeMap::new();
        kv.insert("M", g.m.to_string());
        kv.insert("delta_f", g.delta_f.to_string());
        kv.insert("c1", g.c1.to_string());
        kv.insert("c2", g.c2.to_string());
        kv.insert("L_D", g.l_d.to_string());
        kv.insert("L_W", g.l_w.to_string());
        kv.insert("L_R", g.l_r.to_string());
        kv.insert("scheduled", format!("{}..{}", g.scheduled.start, g.scheduled.end));
        kv.insert("P", c.paths.to_string());
        kv.insert("K_max", c.k_max.to_string());
        kv.insert("K_res", c.k_res.to_string());
        kv.insert("delay", format!("{}..{}", c.delay_low, c.delay_high));
        kv.insert("gain_variance", c.gain_variance.to_string());
        kv.insert("pulse_rolloff", self.pulse_rolloff.to_string());
        kv.insert("oversample", self.oversample.to_string());
        kv.insert("filter_halfspan", self.filter_halfspan.to_string());
        kv.insert("window_kind", self.window_kind.to_string());
        kv.insert("cheb_atten_db", self.cheb_atten_db.to_string());
        kv.insert("mode", self.mode.to_string());
        kv.insert("qam_bits", self.qam_bits.to_string());
        kv.insert("trials", self.trials.to_string());
        kv.insert("seed", self.seed.to_string());
        kv.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper() -> ExperimentConfig {
        Profile::Paper.config()
    }

    #[test]
    fn paper_profile_is_valid() {
        let cfg = validate_config(paper()).unwrap();
        assert_eq!(cfg.grid.m, 4096);
        assert_eq!(cfg.grid.overlap(), 0);
        assert_eq!(cfg.grid.c1, Rational64::new(15, 8192));
        assert_eq!(cfg.chan.gain_variance, 0.1);
    }

    #[test]
    fn desk_profile_is_valid() {
        let cfg = validate_config(Profile::Desk.config()).unwrap();
        assert_eq!(cfg.grid.c1, Rational64::new(15, 1024));
        assert_eq!(cfg.grid.scheduled_len(), 128);
    }

    #[test]
    fn short_prefix_removal_is_rejected() {
        let mut cfg = paper();
        cfg.grid.l_r = 10;
        let err = validate_config(cfg).unwrap_err();
        match err {
            Error::InvalidConfig(v) => {
                assert!(v.iter().any(|x| x.field == "L_R"
                    && x.reason == "prefix removal shorter than channel span"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn extended_prefix_sets_alpha() {
        let mut cfg = Profile::Desk.config();
        cfg.grid.l_d = 36;
        cfg.grid.l_w = 36;
        cfg.grid.l_r = 36;
        let cfg = validate_config(cfg).unwrap();
        assert_eq!(cfg.grid.overlap(), 36);
        assert_eq!(cfg.grid.alpha_w(), Rational64::new(36, 512));
    }

    #[test]
    fn every_violation_is_reported() {
        let mut cfg = paper();
        cfg.qam_bits = 3;
        cfg.trials = 0;
        cfg.oversample = 0;
        let Err(Error::InvalidConfig(v)) = validate_config(cfg) else {
            panic!("expected violations");
        };
        let fields: Vec<_> = v.iter().map(|x| x.field).collect();
        assert_eq!(fields, ["oversample", "qam_bits", "trials"]);
    }

    #[test]
    fn overlap_must_stay_below_m() {
        let mut cfg = Profile::Desk.config();
        cfg.grid.l_w = 512;
        assert!(validate_config(cfg).is_err());
    }

    #[test]
    fn c1_values() {
        assert_eq!(compute_c1(3, 4, 4096), Rational64::new(15, 8192));
        assert_eq!(compute_c1(0, 0, 64), Rational64::new(1, 128));
        assert_eq!(compute_c1(3, 4, 512), Rational64::new(15, 1024));
    }

    #[test]
    fn prefix_strategies() {
        let grid = paper().grid;
        let p = resolve_prefix_strategy(PrefixStrategy::LowOverhead, 288, 0, &grid).unwrap();
        assert_eq!((p.l_w, p.l_r, p.alpha_w), (0, 288, Rational64::from_integer(0)));

        let p = resolve_prefix_strategy(PrefixStrategy::LowOverhead, 200, 0, &grid).unwrap();
        assert_eq!((p.l_w, p.l_r, p.alpha_w), (0, 200, Rational64::new(88, 4096)));

        let p = resolve_prefix_strategy(PrefixStrategy::LowSidelobe, 288, 819, &grid).unwrap();
        assert_eq!((p.l_w, p.l_r, p.alpha_w), (819, 288, Rational64::new(819, 4096)));
        assert!((crate::dsp::to_f64(p.alpha_w) - 0.2).abs() < 1e-3);
    }

    #[test]
    fn infeasible_strategy() {
        let grid = paper().grid;
        assert!(matches!(
            resolve_prefix_strategy(PrefixStrategy::LowSidelobe, 0, 4000, &grid),
            Err(Error::StrategyInfeasible(_))
        ));
        assert!(matches!(
            resolve_prefix_strategy(PrefixStrategy::LowOverhead, 300, 0, &grid),
            Err(Error::StrategyInfeasible(_))
        ));
    }

    #[test]
    fn config_file_round_trip_and_unknown_keys() {
        let text = r#"
            M = 64
            L_D = 36
            L_R = 36
            scheduled = [0, 16]
            c1 = "3/128"
            delay_high = 17.5
            mode = "plain"
        "#;
        let file = ConfigFile::parse(text).unwrap();
        let cfg = file.resolve(Some(&Profile::Desk.config())).unwrap();
        assert_eq!(cfg.grid.m, 64);
        assert_eq!(cfg.grid.c1, Rational64::new(3, 128));
        assert_eq!(cfg.mode, Mode::Plain);
        assert_eq!(cfg.chan.paths, 4);
        validate_config(cfg).unwrap();

        assert!(ConfigFile::parse("M = 64\nbogus = 1\n").is_err());
    }

    #[test]
    fn auto_c1_follows_m() {
        let file = ConfigFile::parse("M = 1024").unwrap();
        let cfg = file.resolve(Some(&Profile::Desk.config())).unwrap();
        assert_eq!(cfg.grid.c1, Rational64::new(15, 2048));
    }

    #[test]
    fn with_alpha_sets_extended_prefix() {
        let cfg = validate_config(Profile::Desk.config()).unwrap();
        let cfg = cfg.with_alpha_w(0.25).unwrap();
        assert_eq!(cfg.grid.l_w, 128);
        assert_eq!(cfg.grid.alpha_w(), Rational64::new(1, 4));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn c1_times_2m_is_odd(k in 0u32..50, r in 0u32..50, m in 1usize..10_000) {
                let c = compute_c1(k, r, m) * Rational64::from_integer(2 * m as i64);
                prop_assert!(c.is_integer());
                prop_assert_eq!(c.to_integer() % 2, 1);
            }

            #[test]
            fn overlap_equals_m_alpha(l_d in 0usize..100, l_w in 0usize..100, l_r in 0usize..100) {
                let mut cfg = Profile::Desk.config();
                cfg.grid.l_d = l_d;
                cfg.grid.l_w = l_w;
                cfg.grid.l_r = l_r;
                cfg.chan.delay_low = 0.0;
                cfg.chan.delay_high = 0.0;
                cfg.filter_halfspan = 0;
                if let Ok(v) = validate_config(cfg) {
                    let d = v.grid.alpha_w() * Rational64::from_integer(v.grid.m as i64);
                    prop_assert_eq!(d.to_integer(), (l_d + l_w) as i64 - l_r as i64);
                }
            }

            #[test]
            fn low_sidelobe_never_below_low_overhead(l_tau in 0usize..=288, l_w_min in 0usize..3000) {
                let grid = Profile::Paper.config().grid;
                let lo = resolve_prefix_strategy(PrefixStrategy::LowOverhead, l_tau, 0, &grid).unwrap();
                if let Ok(hi) = resolve_prefix_strategy(PrefixStrategy::LowSidelobe, l_tau, l_w_min, &grid) {
                    prop_assert!(hi.alpha_w >= lo.alpha_w);
                }
            }
        }
    }
}
