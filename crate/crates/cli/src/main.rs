use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use osps_afdm::channel::{add_noise, apply_discrete_channel, apply_waveform_channel, write_realization_csv};
use osps_afdm::config::{validate_config, ConfigFile, Mode, Profile, ValidatedConfig};
use osps_afdm::experiment::{
    run_ber_sweep, run_condition_sweep, run_nmse_sweep, substream, trial_channel, BerOptions, Csi, CondScope, Experiment,
    NoiseModel,
    STREAM_BITS, STREAM_NOISE,
};
use osps_afdm::matrix::{build_h, overall_gt, white_noise_covariance, write_magnitude_csv, write_matrix_binary};
use osps_afdm::pulse::make_rrc;
use osps_afdm::qam::{random_bits, QamSpec};
use osps_afdm::receiver::{ReceiveMode, Receiver};
use osps_afdm::report::{emit_report, Format};
use osps_afdm::transmitter::{map_scheduled, FrameTaps, Transmitter};

const WORKERS_ENV: &str = "OSPS_AFDM_WORKERS";

#[derive(Parser)]
#[command(name = "osps-afdm", version, about = "OS-PS AFDM link-level experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file overriding profile keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "desk")]
    profile: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Receiver modes, comma separated (os-ps, direct-window, plain).
    #[arg(long, value_delimiter = ',')]
    mode: Vec<String>,
    /// Window roll-off values for the overlap-summation receiver.
    #[arg(long = "alpha-w", value_delimiter = ',', allow_negative_numbers = true)]
    alpha_w: Vec<f64>,
    /// SNR points in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Vec<f64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    ScheduledColumns,
    ScheduledBlock,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum CsiArg {
    Perfect,
    Estimated,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    White,
    Colored,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Discrete,
    Waveform,
}

#[derive(Clone, Copy, ValueEnum)]
enum PulseArg {
    Tx,
    Overall,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixArg {
    H,
    Rw,
}

#[derive(Subcommand)]
enum Command {
    /// Condition number of the effective channel matrix per trial.
    Cond {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "scheduled-columns")]
        scope: ScopeArg,
    },
    /// Noiseless channel-estimation NMSE per trial.
    Nmse {
        #[command(flatten)]
        common: Common,
        /// Use the true paths instead of estimates.
        #[arg(long)]
        bypass: bool,
    },
    /// Uncoded BER with LMMSE equalization.
    Ber {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "perfect")]
        csi: CsiArg,
        /// Noise covariance assumed by the equalizer.
        #[arg(long, value_enum, default_value = "white")]
        noise_model: NoiseArg,
        /// Run every trial instead of stopping at 200 bit errors.
        #[arg(long)]
        no_early_stop: bool,
    },
    /// One frame through the chain; prints every stage as CSV.
    Frame {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "discrete")]
        backend: Backend,
        /// Only these stages, comma separated.
        #[arg(long, value_delimiter = ',')]
        taps: Vec<String>,
        /// Also write the channel realization as CSV.
        #[arg(long)]
        channel_out: Option<PathBuf>,
    },
    /// Receive window samples of one mode.
    DumpWindow {
        #[command(flatten)]
        common: Common,
    },
    /// Transmit or overall pulse taps.
    DumpPulse {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "overall")]
        which: PulseArg,
    },
    /// Effective channel matrix or noise covariance in binary layout.
    DumpH {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "h")]
        matrix: MatrixArg,
        /// Magnitude CSV alongside the binary dump.
        #[arg(long)]
        magnitude_csv: Option<PathBuf>,
    },
}

fn load_config(c: &Common) -> Result<ValidatedConfig> {
    let profile: Profile = c.profile.parse()?;
    let base = profile.config();
    let mut cfg = match &c.config {
        Some(path) => ConfigFile::load(path)
            .with_context(|| format!("reading {}", path.display()))?
            .resolve(Some(&base))?,
        None => base,
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(t) = c.trials {
        cfg.trials = t;
    }
    if !c.snr.is_empty() {
        cfg.snr_grid_db = c.snr.clone();
    }
    if let [m] = c.mode.as_slice() {
        cfg.mode = m.parse()?;
    }
    Ok(validate_config(cfg)?)
}

fn modes(c: &Common) -> Result<Vec<Mode>> {
    if c.mode.is_empty() {
        return Ok(Mode::ALL.to_vec());
    }
    c.mode.iter().map(|m| Ok(m.parse::<Mode>()?)).collect()
}

fn alphas(c: &Common) -> Vec<f64> {
    if c.alpha_w.is_empty() {
        vec![0.25]
    } else {
        c.alpha_w.clone()
    }
}

/// Configuration for single-variant subcommands: first mode, first alpha.
fn single_variant(c: &Common) -> Result<(ValidatedConfig, ReceiveMode)> {
    let cfg = load_config(c)?;
    let mode = modes(c)?.first().copied().unwrap_or(cfg.mode);
    let cfg = match mode {
        Mode::OsPs if !c.alpha_w.is_empty() => cfg.with_alpha_w(c.alpha_w[0])?,
        _ => cfg,
    }
    .with_mode(mode);
    let rm = ReceiveMode::standard(&cfg, mode);
    Ok((cfg, rm))
}

fn output(c: &Common) -> Result<Box<dyn Write>> {
    Ok(match &c.out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn format(c: &Common) -> Format {
    match c.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    }
}

fn write_taps(out: &mut dyn Write, taps: &FrameTaps, only: &[String]) -> Result<()> {
    writeln!(out, "stage,index,re,im")?;
    for name in FrameTaps::STAGES {
        if !only.is_empty() && !only.iter().any(|o| o == name) {
            continue;
        }
        if let Some(vals) = taps.stage(name) {
            for (i, v) in vals {
                writeln!(out, "{name},{i},{},{}", v.re, v.im)?;
            }
        }
    }
    Ok(())
}

fn run_frame(c: &Common, backend: Backend, only: &[String], channel_out: Option<&PathBuf>) -> Result<()> {
    let (cfg, rm) = single_variant(c)?;
    let g = &cfg.grid;
    let ch = trial_channel(&cfg, Experiment::Frame, 0);
    if let Some(p) = channel_out {
        write_realization_csv(&ch, File::create(p)?)?;
    }
    let qam = QamSpec::new(cfg.qam_bits)?;
    let mut bit_rng = substream(cfg.seed, Experiment::Frame, 0, STREAM_BITS);
    let bits = random_bits(&mut bit_rng, g.scheduled_len() * cfg.qam_bits as usize);
    let x = map_scheduled(&cfg, &qam.modulate(&bits)?);
    let snr = cfg.snr_grid_db.last().copied().unwrap_or(f64::INFINITY);
    let sigma2 = osps_afdm::experiment::noise_variance(snr);
    let mut noise_rng = substream(cfg.seed, Experiment::Frame, 0, STREAM_NOISE);
    let tx = Transmitter::new(&cfg);
    let rx = Receiver::new(&cfg, rm);
    let mut taps = tx.modulate_frame(&x);
    let (_, rx_taps) = match backend {
        Backend::Discrete => {
            let r = apply_discrete_channel(taps.s.as_ref().unwrap(), &ch, &overall_gt(&cfg), g)?;
            rx.demodulate(&add_noise(&r, sigma2, &mut noise_rng))?
        }
        Backend::Waveform => {
            let w = apply_waveform_channel(taps.waveform.as_ref().unwrap(), &ch, g.m);
            // noise per tick scaled so the matched-filter output carries sigma2
            let noisy = osps_afdm::SignedBuf::new(w.first_tick, w.data.clone());
            let noisy = add_noise(&noisy, sigma2 * cfg.oversample as f64, &mut noise_rng);
            let w = osps_afdm::Waveform {
                data: noisy.data,
                ..w
            };
            let (y, mut t) = rx.demodulate_waveform(&w)?;
            t.waveform = None;
            (y, t)
        }
    };
    taps.r = rx_taps.r;
    taps.r1 = rx_taps.r1;
    taps.r2 = rx_taps.r2;
    taps.r3 = rx_taps.r3;
    taps.y0 = rx_taps.y0;
    taps.y = rx_taps.y;
    let mut out = output(c)?;
    write_taps(&mut out, &taps, only)?;
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cond { common, scope } => {
            let cfg = load_config(&common)?;
            let scope = match scope {
                ScopeArg::ScheduledColumns => CondScope::ScheduledColumns,
                ScopeArg::ScheduledBlock => CondScope::ScheduledBlock,
                ScopeArg::Full => CondScope::Full,
            };
            let r = run_condition_sweep(&cfg, &modes(&common)?, &alphas(&common), cfg.trials, scope)?;
            emit_report(&r, format(&common), common.out.as_deref())?;
        }
        Command::Nmse { common, bypass } => {
            let cfg = load_config(&common)?;
            let r = run_nmse_sweep(&cfg, &modes(&common)?, &alphas(&common), cfg.trials, bypass)?;
            emit_report(&r, format(&common), common.out.as_deref())?;
        }
        Command::Ber {
            common,
            csi,
            noise_model,
            no_early_stop,
        } => {
            let cfg = load_config(&common)?;
            let csi = match csi {
                CsiArg::Perfect => Csi::Perfect,
                CsiArg::Estimated => Csi::Estimated,
            };
            let opts = BerOptions {
                csi,
                noise: match noise_model {
                    NoiseArg::White => NoiseModel::White,
                    NoiseArg::Colored => NoiseModel::Colored,
                },
                early_stop: !no_early_stop,
            };
            let r = run_ber_sweep(
                &cfg,
                &modes(&common)?,
                &alphas(&common),
                &cfg.snr_grid_db,
                cfg.trials,
                opts,
            )?;
            emit_report(&r, format(&common), common.out.as_deref())?;
        }
        Command::Frame {
            common,
            backend,
            taps,
            channel_out,
        } => run_frame(&common, backend, &taps, channel_out.as_ref())?,
        Command::DumpWindow { common } => {
            let (_, rm) = single_variant(&common)?;
            let mut out = output(&common)?;
            writeln!(out, "index,value")?;
            for (l, v) in rm.window.indices().zip(&rm.window.values) {
                writeln!(out, "{l},{v}")?;
            }
            out.flush()?;
        }
        Command::DumpPulse { common, which } => {
            let cfg = load_config(&common)?;
            let p = match which {
                PulseArg::Tx => make_rrc(cfg.pulse_rolloff, cfg.filter_halfspan, cfg.oversample),
                PulseArg::Overall => overall_gt(&cfg),
            };
            let mut out = output(&common)?;
            writeln!(out, "t,value")?;
            for (i, v) in p.taps.iter().enumerate() {
                let t = (i as f64 - p.center as f64) / p.oversample as f64;
                writeln!(out, "{t},{v}")?;
            }
            out.flush()?;
        }
        Command::DumpH {
            common,
            matrix,
            magnitude_csv,
        } => {
            let (cfg, rm) = single_variant(&common)?;
            let Some(path) = &common.out else {
                bail!("dump-h needs --out for the binary file");
            };
            let a = match matrix {
                MatrixArg::H => {
                    let ch = trial_channel(&cfg, Experiment::Cond, 0);
                    build_h(&cfg, &ch, &overall_gt(&cfg), &rm).entries
                }
                MatrixArg::Rw => white_noise_covariance(&cfg.grid, &rm.window, 1.0).matrix,
            };
            write_matrix_binary(BufWriter::new(File::create(path)?), &a, rm.kind, cfg.seed)?;
            if let Some(p) = magnitude_csv {
                write_magnitude_csv(BufWriter::new(File::create(p)?), &a)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let result = configure_pool().and_then(|_| run(Cli::parse()));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        // A closed downstream pipe (`| head`) is not a failure.
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn configure_pool() -> Result<()> {
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{WORKERS_ENV} must be a positive integer"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .map(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
            .unwrap_or(false)
            || matches!(c.downcast_ref::<osps_afdm::Error>(), Some(osps_afdm::Error::Io(io)) if io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
