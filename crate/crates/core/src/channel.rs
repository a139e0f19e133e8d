//! Integer delay-Doppler multipath channels, AWGN and the EVA/Jakes generator.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};
use crate::grid::{FrameParams, SeedSpec, C64};
use crate::modem::TimeFrame;
use crate::waveform::AnalogWaveform;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Extended Vehicular A excess delays in ns.
pub const EVA_DELAYS_NS: [f64; 9] = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];

/// Extended Vehicular A relative tap powers in dB.
pub const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];

/// One propagation path on the DD lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "PathRepr", into = "PathRepr")]
pub struct Path {
    pub gain: C64,
    /// Delay in units of `T/M`.
    pub delay_tap: usize,
    /// Doppler shift in units of `1/(NT)`.
    pub doppler_tap: i64,
}

#[derive(Serialize, Deserialize)]
struct PathRepr {
    gain_re: f64,
    gain_im: f64,
    delay_tap: usize,
    doppler_tap: i64,
}

impl From<PathRepr> for Path {
    fn from(r: PathRepr) -> Self {
        Self {
            gain: C64::new(r.gain_re, r.gain_im),
            delay_tap: r.delay_tap,
            doppler_tap: r.doppler_tap,
        }
    }
}

impl From<Path> for PathRepr {
    fn from(p: Path) -> Self {
        Self {
            gain_re: p.gain.re,
            gain_im: p.gain.im,
            delay_tap: p.delay_tap,
            doppler_tap: p.doppler_tap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub paths: Vec<Path>,
}

impl ChannelSpec {
    /// The non-dispersive unit channel.
    pub fn awgn() -> Self {
        Self {
            paths: vec![Path {
                gain: C64::new(1.0, 0.0),
                delay_tap: 0,
                doppler_tap: 0,
            }],
        }
    }

    pub fn max_delay(&self) -> usize {
        self.paths.iter().map(|p| p.delay_tap).max().unwrap_or(0)
    }

    pub fn validate(&self, p: &FrameParams) -> Result<()> {
        if self.paths.is_empty() {
            return Err(OtfsError::Config("channel has no paths".into()));
        }
        if let Some(bad) = self.paths.iter().find(|q| !(q.gain.re.is_finite() && q.gain.im.is_finite())) {
            return Err(OtfsError::Config(format!("non-finite path gain {}", bad.gain)));
        }
        if self.max_delay() > p.cp_len {
            return Err(OtfsError::Config(format!(
                "delay tap {} exceeds the cyclic prefix of {} samples",
                self.max_delay(),
                p.cp_len
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| OtfsError::Config(format!("channel JSON: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub es_over_n0_db: f64,
    pub sigma_s2: f64,
}

impl NoiseSpec {
    pub fn new(es_over_n0_db: f64, sigma_s2: f64) -> Self {
        Self {
            es_over_n0_db,
            sigma_s2,
        }
    }

    /// Complex noise variance per sample.
    pub fn n0(&self) -> f64 {
        self.sigma_s2 / 10f64.powf(self.es_over_n0_db / 10.0)
    }
}

/// `sum_i a_i exp(j 2 pi nu_i (t - tau_i)) s(t - tau_i)` on the fine lattice.
///
/// The output shares the input grid. Content shifted past the last sample
/// is an error rather than silently dropped.
pub fn apply_channel(w: &AnalogWaveform, ch: &ChannelSpec, p: &FrameParams) -> Result<AnalogWaveform> {
    if ch.paths.is_empty() {
        return Err(OtfsError::Config("channel has no paths".into()));
    }
    if (w.dt - p.fine_period()).abs() > 1e-9 * p.fine_period() {
        return Err(OtfsError::Alignment("waveform is not on the T/(QM) lattice".into()));
    }
    let offset = w.lattice_offset()?;
    let period = (p.n * p.fine_per_slot()) as i64;
    let len = w.len();
    let mut out: Option<AnalogWaveform> = None;
    for path in &ch.paths {
        let shift = path.delay_tap * p.q;
        if shift >= len {
            return Err(OtfsError::Coverage(format!(
                "delay of {} fine samples exceeds the {len}-sample waveform",
                shift
            )));
        }
        if w.samples[len - shift..].iter().any(|z| *z != C64::new(0.0, 0.0)) {
            return Err(OtfsError::Coverage(format!(
                "delay tap {} pushes signal past the waveform end",
                path.delay_tap
            )));
        }
        // The phase argument nu (t - tau) is an exact multiple of 2 pi / (N M Q).
        let rot = |i: usize| -> C64 {
            let since = offset + i as i64 - shift as i64;
            let r = (path.doppler_tap.rem_euclid(period) * since.rem_euclid(period)) % period;
            path.gain * C64::from_polar(1.0, 2.0 * PI * r as f64 / period as f64)
        };
        let mut samples = vec![C64::new(0.0, 0.0); len];
        for i in shift..len {
            samples[i] = w.samples[i - shift] * rot(i);
        }
        let mut edges: Vec<(usize, C64)> = w
            .edges()
            .iter()
            .filter(|&&(i, _)| i + shift < len)
            .map(|&(i, left)| (i + shift, left * rot(i + shift)))
            .collect();
        if shift > 0 && w.samples[0] != C64::new(0.0, 0.0) {
            edges.push((shift, C64::new(0.0, 0.0)));
        }
        let part = AnalogWaveform::with_edges(samples, w.t0, w.dt, edges);
        out = Some(match out {
            None => part,
            Some(acc) => acc.add(&part)?,
        });
    }
    Ok(out.expect("at least one path"))
}

/// Adds circular complex Gaussian noise of variance `N0` to every sample.
pub fn add_awgn(f: &TimeFrame, ns: &NoiseSpec, seed: SeedSpec) -> TimeFrame {
    let n0 = ns.n0();
    let mut out = f.clone();
    if n0 == 0.0 {
        return out;
    }
    let std = (0.5 * n0).sqrt();
    let mut rng = seed.rng();
    for z in &mut out.samples {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *z += C64::new(re * std, im * std);
    }
    out
}

/// Maximum Doppler shift `fc v / c` for a speed in km/h.
pub fn max_doppler_hz(fc_hz: f64, v_kmh: f64) -> f64 {
    fc_hz * (v_kmh / 3.6) / SPEED_OF_LIGHT
}

/// One EVA channel draw with Jakes-distributed path Dopplers, both
/// rounded to the DD lattice.
pub fn gen_eva_jakes(p: &FrameParams, fc_hz: f64, v_kmh: f64, seed: SeedSpec) -> Result<ChannelSpec> {
    if !(fc_hz.is_finite() && fc_hz > 0.0 && v_kmh.is_finite() && v_kmh >= 0.0) {
        return Err(OtfsError::Config(format!(
            "carrier {fc_hz} Hz and speed {v_kmh} km/h must be positive"
        )));
    }
    let linear: Vec<f64> = EVA_POWERS_DB.iter().map(|db| 10f64.powf(db / 10.0)).collect();
    let total: f64 = linear.iter().sum();
    let nu_max = max_doppler_hz(fc_hz, v_kmh);
    let doppler_res = 1.0 / (p.n as f64 * p.t);
    let mut rng = seed.rng();
    let paths = EVA_DELAYS_NS
        .iter()
        .zip(&linear)
        .map(|(&ns, &pw)| {
            let theta: f64 = rng.random::<f64>() * 2.0 * PI;
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let scale = (0.5 * pw / total).sqrt();
            Path {
                gain: C64::new(re * scale, im * scale),
                delay_tap: (ns * 1e-9 / p.sample_period()).round() as usize,
                doppler_tap: (nu_max * theta.cos() / doppler_res).round() as i64,
            }
        })
        .collect();
    Ok(ChannelSpec { paths })
}

/// Mean path power profile of [`gen_eva_jakes`], normalized to unit sum.
pub fn eva_power_profile() -> [f64; 9] {
    let linear = EVA_POWERS_DB.map(|db| 10f64.powf(db / 10.0));
    let total: f64 = linear.iter().sum();
    linear.map(|v| v / total)
}
