//! Resolved run configuration: defaults, then a key=value file, then flags.

use std::path::Path;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use otfs_core::harness::{ChannelMode, ExperimentConfig, ReceiverMode};
use otfs_core::waveform::{design_lpf, FilterSpec};
use otfs_core::FrameParams;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum FilterChoice {
    /// Truncated sinc on [-th1 T, th2 T].
    Sinc,
    /// No filtering.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ideal,
    Practical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Awgn,
    Eva,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub m: usize,
    pub n: usize,
    pub delta_f: f64,
    /// Defaults to `M` when unset.
    pub cp_len: Option<usize>,
    pub q: usize,
    /// Filter support in units of `T`.
    pub th1: f64,
    pub th2: f64,
    pub filter: FilterChoice,
    pub esn0: Vec<f64>,
    pub mode: Mode,
    pub channel: Channel,
    pub fc: f64,
    pub speed: f64,
    pub frames: usize,
    pub min_errors: usize,
    pub min_bits: usize,
    pub mc_frames: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub nfft: Option<usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            m: 128,
            n: 16,
            delta_f: 15e3,
            cp_len: None,
            q: 16,
            th1: 1.0,
            th2: 1.0,
            filter: FilterChoice::Sinc,
            esn0: (0..=9).map(|i| 2.0 * i as f64).collect(),
            mode: Mode::Practical,
            channel: Channel::Awgn,
            fc: 5e9,
            speed: 120.0,
            frames: 1000,
            min_errors: 200,
            min_bits: 200_000,
            mc_frames: 0,
            seed: 1,
            threads: None,
            nfft: None,
        }
    }
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// key=value configuration file
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Delay bins per slot
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Doppler bins (slots per frame)
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Subcarrier spacing in Hz
    #[arg(long)]
    pub delta_f: Option<f64>,
    /// Cyclic prefix length in samples [default: M]
    #[arg(long)]
    pub cp_len: Option<usize>,
    /// Oversampling factor per T/M
    #[arg(long = "Q")]
    pub q: Option<usize>,
    /// Filter support before t = 0, in units of T
    #[arg(long)]
    pub th1: Option<f64>,
    /// Filter support after t = 0, in units of T
    #[arg(long)]
    pub th2: Option<f64>,
    #[arg(long, value_enum)]
    pub filter: Option<FilterChoice>,
    /// Es/N0 in dB: a value, a comma list, or start:step:stop
    #[arg(long)]
    pub esn0: Option<String>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub channel: Option<Channel>,
    /// Carrier frequency in Hz (EVA)
    #[arg(long)]
    pub fc: Option<f64>,
    /// Relative speed in km/h (EVA)
    #[arg(long)]
    pub speed: Option<f64>,
    /// Frame cap per BER point, or frames averaged by psd
    #[arg(long)]
    pub frames: Option<usize>,
    /// Bit errors required per BER point
    #[arg(long)]
    pub min_errors: Option<usize>,
    /// Bits required per BER point
    #[arg(long)]
    pub min_bits: Option<usize>,
    /// Monte-Carlo frames for the measured IDDI column
    #[arg(long)]
    pub mc_frames: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker thread cap
    #[arg(long)]
    pub threads: Option<usize>,
    /// Welch segment length in fine samples
    #[arg(long)]
    pub nfft: Option<usize>,
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("bad value for {key}: {v:?}")))
}

fn parse_enum<T: ValueEnum>(key: &str, v: &str) -> Result<T, CliError> {
    T::from_str(v.trim(), true).map_err(|_| CliError::Config(format!("bad value for {key}: {v:?}")))
}

/// `16`, `0,4,8` or `0:2:18` (inclusive).
pub fn parse_grid(v: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Config(format!("bad Es/N0 grid {v:?}"));
    let v = v.trim();
    let grid: Vec<f64> = if v.contains(':') {
        let parts: Vec<f64> = v.split(':').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?;
        let [start, step, stop] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + step * i as f64).collect()
    } else {
        v.split(',').map(|s| s.trim().parse()).collect::<Result<_, _>>().map_err(|_| bad())?
    };
    if grid.is_empty() || grid.iter().any(|x| x.is_nan()) {
        return Err(bad());
    }
    Ok(grid)
}

impl Settings {
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), CliError> {
        match key {
            "M" => self.m = parse(key, v)?,
            "N" => self.n = parse(key, v)?,
            "delta-f" => self.delta_f = parse(key, v)?,
            "cp-len" => self.cp_len = Some(parse(key, v)?),
            "Q" => self.q = parse(key, v)?,
            "th1" => self.th1 = parse(key, v)?,
            "th2" => self.th2 = parse(key, v)?,
            "filter" => self.filter = parse_enum(key, v)?,
            "esn0" => self.esn0 = parse_grid(v)?,
            "mode" => self.mode = parse_enum(key, v)?,
            "channel" => self.channel = parse_enum(key, v)?,
            "fc" => self.fc = parse(key, v)?,
            "speed" => self.speed = parse(key, v)?,
            "frames" => self.frames = parse(key, v)?,
            "min-errors" => self.min_errors = parse(key, v)?,
            "min-bits" => self.min_bits = parse(key, v)?,
            "mc-frames" => self.mc_frames = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = Some(parse(key, v)?),
            "nfft" => self.nfft = Some(parse(key, v)?),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    no + 1
                )));
            };
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn apply_flags(&mut self, o: &Overrides) -> Result<(), CliError> {
        macro_rules! take {
            ($($f:ident),*) => { $( if let Some(v) = o.$f.clone() { self.$f = v; } )* };
        }
        take!(m, n, delta_f, q, th1, th2, filter, mode, channel, fc, speed, frames, min_errors, min_bits, mc_frames, seed);
        if let Some(v) = o.cp_len {
            self.cp_len = Some(v);
        }
        if let Some(v) = o.threads {
            self.threads = Some(v);
        }
        if let Some(v) = o.nfft {
            self.nfft = Some(v);
        }
        if let Some(v) = &o.esn0 {
            self.esn0 = parse_grid(v)?;
        }
        Ok(())
    }

    /// Defaults, then the config file, then flags.
    pub fn resolve(o: &Overrides) -> Result<Self, CliError> {
        let mut s = Self::default();
        if let Some(path) = &o.config {
            s.apply_file(path)?;
        }
        s.apply_flags(o)?;
        Ok(s)
    }

    pub fn params(&self) -> Result<FrameParams, CliError> {
        Ok(FrameParams::new(
            self.m,
            self.n,
            self.delta_f,
            self.cp_len.unwrap_or(self.m),
            self.q,
        )?)
    }

    pub fn filter_spec(&self, p: &FrameParams) -> Result<FilterSpec, CliError> {
        Ok(match self.filter {
            FilterChoice::Sinc => design_lpf(p, self.th1 * p.t, self.th2 * p.t)?,
            FilterChoice::Identity => FilterSpec::identity(p),
        })
    }

    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        if self.filter == FilterChoice::Identity && self.mode == Mode::Practical {
            return Err(CliError::Config(
                "ber uses the sinc filter; choose --mode ideal for an unfiltered receiver".into(),
            ));
        }
        let p = self.params()?;
        let mut cfg = ExperimentConfig::new(p);
        cfg.receiver = match self.mode {
            Mode::Ideal => ReceiverMode::Ideal,
            Mode::Practical => ReceiverMode::Practical,
        };
        cfg.th1 = self.th1 * p.t;
        cfg.th2 = self.th2 * p.t;
        cfg.channel = match self.channel {
            Channel::Awgn => ChannelMode::Awgn,
            Channel::Eva => ChannelMode::EvaJakes {
                fc_hz: self.fc,
                v_kmh: self.speed,
            },
        };
        cfg.esn0_grid_db = self.esn0.clone();
        cfg.min_bit_errors = self.min_errors;
        cfg.min_bits = self.min_bits;
        cfg.max_frames = self.frames;
        cfg.seed = self.seed;
        cfg.validate()?;
        Ok(cfg)
    }
}
