//! Waveform and discrete channel backends against each other.

use std::f64::consts::PI;

use osps_afdm::channel::{apply_discrete_channel, apply_waveform_channel};
use osps_afdm::config::{validate_config, Mode, Profile, ValidatedConfig};
use osps_afdm::dsp::relative_error;
use osps_afdm::matrix::overall_gt;
use osps_afdm::pulse::{make_rrc, overall_pulse, SampledPulse};
use osps_afdm::receiver::demodulate_frame;
use osps_afdm::transmitter::Transmitter;
use osps_afdm::{ChannelPath, ChannelRealization, Complex64, ReceiveMode, Receiver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DOPPLERS: [f64; 6] = [0.0, 0.25, 0.5, 1.0, 2.0, 3.0];

/// Desk grid with the discarded prefix widened to hold the untruncated overall pulse.
fn config() -> ValidatedConfig {
    let mut cfg = Profile::Desk.config();
    cfg.grid.l_d = 56;
    cfg.grid.l_r = 56;
    validate_config(cfg).unwrap()
}

fn symbols(m: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

/// Relative error between the two backends for one path per Doppler value.
fn errors(cfg: &ValidatedConfig, g_t: &SampledPulse, mode: Mode) -> Vec<f64> {
    let m = cfg.grid.m;
    let x = symbols(m, 5);
    let tx = Transmitter::new(cfg);
    let rmode = ReceiveMode::standard(cfg, mode);
    let rx = Receiver::new(cfg, rmode.clone());
    let frame = tx.modulate_frame(&x);
    let s = tx.modulate_baseband(&x).s.unwrap();
    DOPPLERS
        .iter()
        .map(|&k| {
            let ch = ChannelRealization::new(vec![ChannelPath::new(Complex64::new(0.8, 0.3), 17.3, k)]);
            let w = apply_waveform_channel(frame.waveform.as_ref().unwrap(), &ch, m);
            let (yw, _) = rx.demodulate_waveform(&w).unwrap();
            let r = apply_discrete_channel(&s, &ch, g_t, &cfg.grid).unwrap();
            let (yd, _) = demodulate_frame(&r, &rmode, &cfg.grid).unwrap();
            relative_error(&yw, &yd)
        })
        .collect()
}

/// RMS duration of a pulse in baseband samples.
fn rms_duration(p: &SampledPulse) -> f64 {
    let q = p.oversample as f64;
    let (num, den) = p.taps.iter().enumerate().fold((0.0, 0.0), |(n, d), (i, v)| {
        let t = (i as f64 - p.center as f64) / q;
        (n + t * t * v * v, d + v * v)
    });
    (num / den).sqrt()
}

#[test]
fn static_path_matches_with_full_pulse() {
    let cfg = config();
    let p = make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample);
    let full = overall_pulse(&p, &p).unwrap();
    for mode in Mode::ALL {
        let e = errors(&cfg, &full, mode)[0];
        assert!(e <= 1e-6, "{mode}: {e:.3e}");
    }
}

#[test]
fn doppler_error_is_monotone_and_within_narrowband_bound() {
    let cfg = config();
    let p = make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample);
    let full = overall_pulse(&p, &p).unwrap();
    // Doppler rotation across the receive filter, to first order in K/M.
    let slope = 2.0 * PI * rms_duration(&p) / cfg.grid.m as f64;
    let e = errors(&cfg, &full, Mode::Plain);
    for (w, k) in e.windows(2).zip(DOPPLERS.iter().skip(1)) {
        assert!(w[1] >= w[0], "not monotone at K={k}: {e:?}");
    }
    for (&ei, &k) in e.iter().zip(&DOPPLERS) {
        assert!(ei <= 1e-6 + slope * k, "K={k}: {ei:.3e} > {:.3e}", slope * k);
    }
}

#[test]
fn truncated_pulse_error_is_monotone() {
    let cfg = config();
    let e = errors(&cfg, &overall_gt(&cfg), Mode::Plain);
    assert!(e[0] < 5e-3, "{e:?}");
    for w in e.windows(2) {
        assert!(w[1] >= w[0], "{e:?}");
    }
}
