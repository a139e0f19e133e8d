//! Monte-Carlo BER experiments over the full waveform-level link.
//!
//! Frame `f` draws its bits, channel and noise from streams `4f`, `4f + 1`
//! and `4f + 2` of the master seed, so every Es/N0 point sees the same
//! frames and channels (common random numbers). Frames are simulated in
//! fixed-size batches and accumulated in frame order, which makes the
//! stopping point and the counts independent of the worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{add_awgn, apply_channel, gen_eva_jakes, ChannelSpec, NoiseSpec, EVA_DELAYS_NS};
use crate::detector::{build_effective_channel, mp_detect, MpOptions};
use crate::error::{OtfsError, Result};
use crate::grid::{demap, map_bits, random_bits, Constellation, FrameParams, SeedSpec};
use crate::modem::{add_cp, dzt, idzt};
use crate::waveform::{apply_filter, design_lpf, sample_at_grid, to_analog, FilterSpec};

const BATCH: usize = 16;

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverMode {
    /// Samples the unfiltered waveform.
    Ideal,
    /// Low-pass filters before sampling.
    Practical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Awgn,
    EvaJakes { fc_hz: f64, v_kmh: f64 },
    Fixed(ChannelSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: FrameParams,
    pub qam_order: usize,
    pub sigma_s2: f64,
    pub receiver: ReceiverMode,
    /// Filter support `[-th1, th2]` in seconds, used by the practical receiver.
    pub th1: f64,
    pub th2: f64,
    pub channel: ChannelMode,
    pub esn0_grid_db: Vec<f64>,
    pub min_bit_errors: usize,
    /// Lower bound on simulated bits per point, on top of the error target.
    pub min_bits: usize,
    pub max_frames: usize,
    pub seed: u64,
    pub mp: MpOptions,
}

impl ExperimentConfig {
    /// 4-QAM, practical receiver with the default filter, AWGN, 200 errors.
    pub fn new(params: FrameParams) -> Self {
        Self {
            params,
            qam_order: 4,
            sigma_s2: 1.0,
            receiver: ReceiverMode::Practical,
            th1: params.t,
            th2: params.t,
            channel: ChannelMode::Awgn,
            esn0_grid_db: vec![16.0],
            min_bit_errors: 200,
            min_bits: 0,
            max_frames: 1000,
            seed: 1,
            mp: MpOptions::default(),
        }
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::qam(self.qam_order, self.sigma_s2)
    }

    /// The receiver filter, `None` in ideal mode.
    pub fn filter(&self) -> Result<Option<FilterSpec>> {
        match self.receiver {
            ReceiverMode::Ideal => Ok(None),
            ReceiverMode::Practical => design_lpf(&self.params, self.th1, self.th2).map(Some),
        }
    }

    /// Largest delay tap the channel mode can produce.
    pub fn max_delay_tap(&self) -> usize {
        match &self.channel {
            ChannelMode::Awgn => 0,
            ChannelMode::EvaJakes { .. } => {
                let last = EVA_DELAYS_NS[EVA_DELAYS_NS.len() - 1] * 1e-9;
                (last / self.params.sample_period()).round() as usize
            }
            ChannelMode::Fixed(spec) => spec.max_delay(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.constellation()?;
        if self.esn0_grid_db.is_empty() {
            return Err(OtfsError::Config("Es/N0 grid is empty".into()));
        }
        if self.esn0_grid_db.iter().any(|v| v.is_nan()) {
            return Err(OtfsError::Config("Es/N0 grid contains NaN".into()));
        }
        if self.max_frames == 0 {
            return Err(OtfsError::Config("max_frames must be positive".into()));
        }
        if let ChannelMode::Fixed(spec) = &self.channel {
            spec.validate(&self.params)?;
        }
        if self.max_delay_tap() > self.params.cp_len {
            return Err(OtfsError::Config(format!(
                "cyclic prefix of {} samples is shorter than the channel delay spread of {} taps",
                self.params.cp_len,
                self.max_delay_tap()
            )));
        }
        if self.receiver == ReceiverMode::Practical {
            design_lpf(&self.params, self.th1, self.th2)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub esn0_db: f64,
    pub bit_errors: u64,
    pub bits: u64,
    pub ber: f64,
    pub wilson_ci_95: (f64, f64),
    pub frames_used: u64,
}

impl BerPoint {
    pub fn new(esn0_db: f64, bit_errors: u64, bits: u64, frames_used: u64) -> Self {
        let ber = if bits == 0 { 0.0 } else { bit_errors as f64 / bits as f64 };
        Self {
            esn0_db,
            bit_errors,
            bits,
            ber,
            wilson_ci_95: wilson_interval(bit_errors, bits, Z95),
            frames_used,
        }
    }

    pub fn overlaps(&self, other: &BerPoint) -> bool {
        self.wilson_ci_95.0 <= other.wilson_ci_95.1 && other.wilson_ci_95.0 <= self.wilson_ci_95.1
    }
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = ((centre - half) / denom).clamp(0.0, p);
    let hi = ((centre + half) / denom).clamp(p, 1.0);
    (lo, hi)
}

/// Per-frame stream ids.
pub fn frame_stream(frame: u64, purpose: u64) -> u64 {
    (frame << 2) | purpose
}

pub const STREAM_BITS: u64 = 0;
pub const STREAM_CHANNEL: u64 = 1;
pub const STREAM_NOISE: u64 = 2;

/// Shared per-run state built once from the configuration.
struct Link<'a> {
    cfg: &'a ExperimentConfig,
    constellation: Constellation,
    filter: Option<FilterSpec>,
}

impl Link<'_> {
    fn channel(&self, frame: u64) -> Result<ChannelSpec> {
        let p = &self.cfg.params;
        match &self.cfg.channel {
            ChannelMode::Awgn => Ok(ChannelSpec::awgn()),
            ChannelMode::EvaJakes { fc_hz, v_kmh } => gen_eva_jakes(
                p,
                *fc_hz,
                *v_kmh,
                SeedSpec::new(self.cfg.seed, frame_stream(frame, STREAM_CHANNEL)),
            ),
            ChannelMode::Fixed(spec) => Ok(spec.clone()),
        }
    }

    /// Bit errors and bit count of one frame.
    fn frame(&self, frame: u64, esn0_db: f64) -> Result<(u64, u64)> {
        let cfg = self.cfg;
        let p = &cfg.params;
        let c = &self.constellation;
        let bits = random_bits(
            p.symbols() * c.bits_per_symbol,
            SeedSpec::new(cfg.seed, frame_stream(frame, STREAM_BITS)),
        );
        let x = map_bits(&bits, c, p)?;
        let tx = add_cp(&idzt(&x), p.cp_len)?;
        let mut w = to_analog(&tx, p)?;
        let ch = self.channel(frame)?;
        if ch != ChannelSpec::awgn() {
            w = apply_channel(&w, &ch, p)?;
        }
        if let Some(h) = &self.filter {
            w = apply_filter(&w, h)?;
        }
        let ns = NoiseSpec::new(esn0_db, cfg.sigma_s2);
        let y = add_awgn(
            &sample_at_grid(&w, p)?,
            &ns,
            SeedSpec::new(cfg.seed, frame_stream(frame, STREAM_NOISE)),
        );
        let yd = dzt(y.body(), p)?;
        let heff = build_effective_channel(&ch, p);
        // A vanishing noise level still needs a positive detector variance.
        let n0 = ns.n0().max(1e-10 * cfg.sigma_s2);
        let det = mp_detect(&yd, &heff, c, n0, &cfg.mp)?;
        let rx = demap(&det.symbols, c);
        let errors = rx.iter().zip(&bits).filter(|(a, b)| a != b).count();
        Ok((errors as u64, bits.len() as u64))
    }
}

/// Simulates frames until both the error and bit targets are met or
/// `max_frames` is reached.
pub fn run_ber_point(cfg: &ExperimentConfig, esn0_db: f64) -> Result<BerPoint> {
    cfg.validate()?;
    let link = Link {
        cfg,
        constellation: cfg.constellation()?,
        filter: cfg.filter()?,
    };
    run_with_link(&link, esn0_db)
}

fn run_with_link(link: &Link<'_>, esn0_db: f64) -> Result<BerPoint> {
    let cfg = link.cfg;
    let (mut errors, mut bits, mut frames) = (0u64, 0u64, 0u64);
    let done = |errors: u64, bits: u64| errors >= cfg.min_bit_errors as u64 && bits >= cfg.min_bits as u64;
    'outer: while (frames as usize) < cfg.max_frames {
        let end = (frames as usize + BATCH).min(cfg.max_frames) as u64;
        let batch: Vec<(u64, u64)> = (frames..end)
            .into_par_iter()
            .map(|f| link.frame(f, esn0_db))
            .collect::<Result<_>>()?;
        for (e, b) in batch {
            errors += e;
            bits += b;
            frames += 1;
            if done(errors, bits) {
                break 'outer;
            }
        }
    }
    Ok(BerPoint::new(esn0_db, errors, bits, frames))
}

/// Runs every grid point, in grid order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<BerPoint>> {
    cfg.validate()?;
    let link = Link {
        cfg,
        constellation: cfg.constellation()?,
        filter: cfg.filter()?,
    };
    cfg.esn0_grid_db
        .par_iter()
        .map(|&s| run_with_link(&link, s))
        .collect()
}

pub const BER_CSV_HEADER: &str = "esn0_db,ber,ci_lo,ci_hi,bits,frames";

pub fn ber_csv(points: &[BerPoint]) -> String {
    let mut out = String::from(BER_CSV_HEADER);
    out.push('\n');
    for pt in points {
        out.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e},{},{}\n",
            pt.esn0_db, pt.ber, pt.wilson_ci_95.0, pt.wilson_ci_95.1, pt.bits, pt.frames_used
        ));
    }
    out
}
