//! Oversampled "analog" model of the frame: slot-windowed cyclic sinc
//! interpolation, receiver low-pass filtering, lattice sampling and spectra.
//!
//! Time is discretized on a fine lattice of spacing `T/(Q M)`. The
//! rectangular slot window makes the waveform discontinuous at slot
//! boundaries; [`AnalogWaveform`] stores right-continuous sample values
//! together with the left limits at those jumps. Continuous-kernel filters
//! integrate with the trapezoid rule (which sees the jump midpoint), while
//! sampling at the lattice returns the right-continuous value, i.e. the
//! sample that opens the slot.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{OtfsError, Result};
use crate::fft;
use crate::grid::{FrameParams, C64};
use crate::modem::TimeFrame;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Normalized sinc with zeros at the nonzero integers.
#[inline]
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// `sum_{r in Z} sinc(v - r M)`: the kernel of `M`-periodic sinc interpolation.
///
/// Closed form `sin(pi v) / (M tan(pi v / M))` for even `M` and
/// `sin(pi v) / (M sin(pi v / M))` for odd `M`.
pub fn periodic_sinc(v: f64, m: usize) -> f64 {
    let mf = m as f64;
    // Reduce to [-M/2, M/2); both forms are M-periodic.
    let r = v - mf * (v / mf).round();
    if r.abs() < 1e-12 {
        return 1.0;
    }
    let num = (PI * r).sin();
    let arg = PI * r / mf;
    if m % 2 == 0 {
        num / (mf * arg.tan())
    } else {
        num / (mf * arg.sin())
    }
}

/// `M`-periodic sinc kernel tabulated on the fine lattice: entry `j` holds
/// `periodic_sinc(j / Q, M)` for `j` in `[0, Q M)`.
pub fn periodic_sinc_table(m: usize, q: usize) -> Vec<f64> {
    let len = m * q;
    (0..len)
        .map(|j| {
            // Exact reduction of the sine arguments via integer arithmetic.
            let jj = if 2 * j >= len { j as i64 - len as i64 } else { j as i64 };
            if jj == 0 {
                return 1.0;
            }
            if jj % q as i64 == 0 {
                return 0.0;
            }
            let num = (PI * ((jj.rem_euclid(2 * q as i64)) as f64) / q as f64).sin();
            let arg = PI * jj as f64 / len as f64;
            if m % 2 == 0 {
                num / (m as f64 * arg.tan())
            } else {
                num / (m as f64 * arg.sin())
            }
        })
        .collect()
}

/// Uniformly sampled complex baseband waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogWaveform {
    pub samples: Vec<C64>,
    /// Time of `samples[0]` in seconds.
    pub t0: f64,
    /// Sample spacing in seconds.
    pub dt: f64,
    /// `(index, s(t-))` at jump discontinuities, sorted by index.
    edges: Vec<(usize, C64)>,
}

impl AnalogWaveform {
    pub fn new(samples: Vec<C64>, t0: f64, dt: f64) -> Self {
        Self {
            samples,
            t0,
            dt,
            edges: Vec::new(),
        }
    }

    pub fn with_edges(samples: Vec<C64>, t0: f64, dt: f64, mut edges: Vec<(usize, C64)>) -> Self {
        edges.sort_by_key(|e| e.0);
        edges.retain(|&(i, _)| i < samples.len());
        Self {
            samples,
            t0,
            dt,
            edges,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// Time just past the last sample.
    pub fn t_end(&self) -> f64 {
        self.time(self.samples.len())
    }

    pub fn edges(&self) -> &[(usize, C64)] {
        &self.edges
    }

    /// `s(t-)` at sample `i`.
    pub fn left_limit(&self, i: usize) -> C64 {
        match self.edges.binary_search_by_key(&i, |e| e.0) {
            Ok(pos) => self.edges[pos].1,
            Err(_) => self.samples[i],
        }
    }

    /// Sample values with every jump replaced by its midpoint, the values a
    /// trapezoid-rule integral over the waveform sees.
    pub fn midpoint_values(&self) -> Vec<C64> {
        let mut v = self.samples.clone();
        for &(i, left) in &self.edges {
            v[i] = 0.5 * (v[i] + left);
        }
        v
    }

    /// Fine-lattice offset of `samples[0]` relative to `t = 0`.
    pub fn lattice_offset(&self) -> Result<i64> {
        let x = self.t0 / self.dt;
        let r = x.round();
        if (x - r).abs() > 1e-6 {
            return Err(OtfsError::Alignment(format!(
                "t0 = {:.6e} s is {:.3e} samples off the lattice",
                self.t0,
                x - r
            )));
        }
        Ok(r as i64)
    }

    /// Index of the sample at time `t`, if `t` is on the sampling grid.
    pub fn index_at(&self, t: f64) -> Result<Option<usize>> {
        let x = (t - self.t0) / self.dt;
        let r = x.round();
        if (x - r).abs() > 1e-6 {
            return Err(OtfsError::Alignment(format!("t = {t:.6e} s is off the sampling grid")));
        }
        if r < 0.0 || r as usize >= self.samples.len() {
            return Ok(None);
        }
        Ok(Some(r as usize))
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dt
    }

    pub fn scaled(&self, a: C64) -> Self {
        Self {
            samples: self.samples.iter().map(|&z| z * a).collect(),
            t0: self.t0,
            dt: self.dt,
            edges: self.edges.iter().map(|&(i, z)| (i, z * a)).collect(),
        }
    }

    /// Zero-extends the waveform by `before` and `after` samples.
    pub fn padded(&self, before: usize, after: usize) -> Self {
        let mut samples = vec![ZERO; before];
        samples.extend_from_slice(&self.samples);
        samples.extend(std::iter::repeat_n(ZERO, after));
        let mut edges: Vec<_> = self.edges.iter().map(|&(i, z)| (i + before, z)).collect();
        if before > 0 && self.samples.first().is_some_and(|z| *z != ZERO) && self.edges.first().map(|e| e.0) != Some(0) {
            edges.insert(0, (before, ZERO));
        }
        let end = before + self.samples.len();
        if after > 0 && self.samples.last().is_some_and(|z| *z != ZERO) {
            edges.push((end, *self.samples.last().unwrap()));
        }
        Self {
            samples,
            t0: self.t0 - before as f64 * self.dt,
            dt: self.dt,
            edges,
        }
    }

    /// Sample-wise sum of two waveforms on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        let same_grid = self.samples.len() == other.samples.len()
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
            && (self.t0 - other.t0).abs() <= 1e-6 * self.dt;
        if !same_grid {
            return Err(OtfsError::Alignment("waveforms are on different grids".into()));
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        let mut idx: Vec<usize> = self.edges.iter().chain(&other.edges).map(|e| e.0).collect();
        idx.sort_unstable();
        idx.dedup();
        let edges = idx
            .into_iter()
            .map(|i| (i, self.left_limit(i) + other.left_limit(i)))
            .collect();
        Ok(Self {
            samples,
            t0: self.t0,
            dt: self.dt,
            edges,
        })
    }
}

/// Band-limited cyclic interpolation of one slot onto `Q M` fine samples.
///
/// Equivalent to `sum_l' s[(l')_M] sinc(u - l')` over all integers `l'`: a
/// trigonometric polynomial whose Nyquist term (even `M`) is split evenly
/// between `+M/2` and `-M/2`. Lattice samples are copied exactly.
pub fn interpolate_slot(slot: &[C64], q: usize) -> Vec<C64> {
    let m = slot.len();
    let len = m * q;
    let mut spec = slot.to_vec();
    fft::forward(m).process(&mut spec);
    let mut wide = vec![ZERO; len];
    let half = m / 2;
    if m % 2 == 0 {
        wide[..half].copy_from_slice(&spec[..half]);
        for k in half + 1..m {
            wide[len - m + k] = spec[k];
        }
        wide[half] = 0.5 * spec[half];
        wide[len - half] += 0.5 * spec[half];
    } else {
        wide[..=half].copy_from_slice(&spec[..=half]);
        for k in half + 1..m {
            wide[len - m + k] = spec[k];
        }
    }
    fft::inverse(len).process(&mut wide);
    let scale = 1.0 / m as f64;
    for z in &mut wide {
        *z *= scale;
    }
    for (l, &s) in slot.iter().enumerate() {
        wide[l * q] = s;
    }
    wide
}

/// Renders a discrete frame as the windowed, cyclically interpolated waveform.
///
/// Each slot `n` is the `M`-periodic sinc interpolation of its own `M`
/// samples gated to `[nT, (n+1)T)`. The `cp_len` prefix samples occupy
/// `[-cp_len T/M, 0)` and carry the frame tail `s(t + NT)`. The result
/// includes one slot of zero guard on each side, so it covers
/// `[-cp_len T/M - T, (N+1)T)`.
pub fn to_analog(f: &TimeFrame, p: &FrameParams) -> Result<AnalogWaveform> {
    let (m, n, q) = (p.m, p.n, p.q);
    let mq = m * q;
    let body = f.body();
    if body.len() != m * n {
        return Err(OtfsError::Dimension {
            expected: m * n,
            got: body.len(),
        });
    }
    let cp = f.cp_len;
    let mut wave = Vec::with_capacity(n * mq);
    for slot in body.chunks_exact(m) {
        wave.extend(interpolate_slot(slot, q));
    }

    let guard = mq;
    let signal_start = guard; // index of t = -cp T/M
    let zero_idx = guard + cp * q; // index of t = 0
    let total = zero_idx + n * mq + guard;
    let mut samples = vec![ZERO; total];
    let body_fine = n * mq;
    // CP: fine samples i in [-cp*q, 0) take the periodic continuation of the body.
    for j in 0..cp * q {
        let rel = j as i64 - (cp * q) as i64;
        samples[signal_start + j] = wave[rel.rem_euclid(body_fine as i64) as usize];
    }
    samples[zero_idx..zero_idx + body_fine].copy_from_slice(&wave);

    // Jumps: every slot boundary inside the signal, the CP start and the frame end.
    let mut edges = Vec::new();
    let first_rel = -((cp * q) as i64);
    let last_rel = body_fine as i64;
    let slot_left = |rel_end: i64| -> C64 {
        // Left limit at a slot boundary `rel_end` is the slot's own
        // periodic value at its start.
        let slot_start = (rel_end - mq as i64).rem_euclid(body_fine as i64) as usize;
        wave[slot_start]
    };
    let mut b = first_rel.div_euclid(mq as i64) * mq as i64;
    while b <= last_rel {
        if b >= first_rel {
            let left = if b > first_rel { slot_left(b) } else { ZERO };
            let idx = (zero_idx as i64 + b) as usize;
            edges.push((idx, left));
        }
        b += mq as i64;
    }
    if first_rel % mq as i64 != 0 {
        edges.push((signal_start, ZERO));
    }
    edges.retain(|&(i, left)| samples[i] != left);

    Ok(AnalogWaveform::with_edges(
        samples,
        -(zero_idx as f64) * p.fine_period(),
        p.fine_period(),
        edges,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FilterKind {
    /// `(M/T) sinc(t M / T)` truncated to `[-Th1, Th2]`; a continuous kernel.
    TruncatedSinc { bandwidth_hz: f64 },
    /// Arbitrary taps applied as a discrete FIR on the fine lattice.
    Custom,
}

/// Receiver low-pass filter tabulated on the fine lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// Support `[-th1, th2]` in seconds.
    pub th1: f64,
    pub th2: f64,
    /// Tap spacing in seconds.
    pub dt: f64,
    /// `taps[i]` is `h((i - origin) dt)` in 1/s.
    pub taps: Vec<C64>,
    pub origin: usize,
}

impl FilterSpec {
    /// `h` at lattice offset `j` (in fine samples), zero outside the support.
    #[inline]
    pub fn tap(&self, j: i64) -> C64 {
        let i = j + self.origin as i64;
        if i < 0 || i as usize >= self.taps.len() {
            ZERO
        } else {
            self.taps[i as usize]
        }
    }

    /// Fine samples of support before `t = 0`.
    pub fn lead(&self) -> usize {
        self.origin
    }

    /// Fine samples of support after `t = 0`.
    pub fn lag(&self) -> usize {
        self.taps.len() - 1 - self.origin
    }

    /// Whether the taps sample a continuous impulse response; such filters
    /// integrate across jumps with the trapezoid rule.
    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FilterKind::TruncatedSinc { .. })
    }

    /// A single tap of height `1/dt` at `t = 0`.
    pub fn identity(p: &FrameParams) -> Self {
        let dt = p.fine_period();
        Self {
            kind: FilterKind::Custom,
            th1: 0.0,
            th2: 0.0,
            dt,
            taps: vec![C64::new(1.0 / dt, 0.0)],
            origin: 0,
        }
    }

    pub fn custom(p: &FrameParams, taps: Vec<C64>, origin: usize) -> Result<Self> {
        if origin >= taps.len() {
            return Err(OtfsError::InvalidParams(format!(
                "filter origin {origin} outside {} taps",
                taps.len()
            )));
        }
        let dt = p.fine_period();
        Ok(Self {
            kind: FilterKind::Custom,
            th1: origin as f64 * dt,
            th2: (taps.len() - 1 - origin) as f64 * dt,
            dt,
            taps,
            origin,
        })
    }

    /// SHA-256 over the tap spacing and tap values, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.dt.to_le_bytes());
        h.update((self.origin as u64).to_le_bytes());
        for z in &self.taps {
            h.update(z.re.to_le_bytes());
            h.update(z.im.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Truncated-sinc receiver filter of bandwidth `M/T` on `[-th1, th2]`.
pub fn design_lpf(p: &FrameParams, th1: f64, th2: f64) -> Result<FilterSpec> {
    if !(th1 > 0.0 && th2 > 0.0 && th1.is_finite() && th2.is_finite()) {
        return Err(OtfsError::InvalidParams(format!(
            "filter support must be positive, got [{th1}, {th2}]"
        )));
    }
    let dt = p.fine_period();
    let lead = (th1 / dt + 1e-9).floor() as usize;
    let lag = (th2 / dt + 1e-9).floor() as usize;
    let peak = p.m as f64 / p.t;
    let q = p.q as f64;
    let taps = (0..=lead + lag)
        .map(|i| {
            let j = i as f64 - lead as f64;
            C64::new(peak * sinc(j / q), 0.0)
        })
        .collect();
    Ok(FilterSpec {
        kind: FilterKind::TruncatedSinc { bandwidth_hz: peak },
        th1,
        th2,
        dt,
        taps,
        origin: lead,
    })
}

/// The default receiver filter: truncated sinc with `Th1 = Th2 = T`.
pub fn default_lpf(p: &FrameParams) -> FilterSpec {
    design_lpf(p, p.t, p.t).expect("T is a valid support")
}

/// Convolves `w` with `h`, scaled by the sample period so that the sum
/// approximates the convolution integral.
///
/// Only outputs whose full filter support lies inside `w` are produced, so
/// the result is shorter than the input by the filter length minus one.
pub fn apply_filter(w: &AnalogWaveform, h: &FilterSpec) -> Result<AnalogWaveform> {
    if (w.dt - h.dt).abs() > 1e-9 * h.dt {
        return Err(OtfsError::Alignment(format!(
            "filter spacing {:.6e} s differs from waveform spacing {:.6e} s",
            h.dt, w.dt
        )));
    }
    let (lead, lag) = (h.lead(), h.lag());
    if w.len() <= lead + lag {
        return Err(OtfsError::Coverage(format!(
            "waveform of {} samples is shorter than the {}-tap filter",
            w.len(),
            h.taps.len()
        )));
    }
    let values = if h.is_continuous() {
        w.midpoint_values()
    } else {
        w.samples.clone()
    };
    let out_len = w.len() - lead - lag;
    let mut out = if h.taps.len() <= 64 {
        let mut out = vec![ZERO; out_len];
        for (i, y) in out.iter_mut().enumerate() {
            // Output i sits at input index i + lag.
            let centre = i + lag;
            let mut acc = ZERO;
            for (a, &tap) in h.taps.iter().enumerate() {
                acc += tap * values[centre + h.origin - a];
            }
            *y = acc;
        }
        out
    } else {
        let full = fft::convolve(&values, &h.taps);
        full[lead + lag..w.len()].to_vec()
    };
    for z in &mut out {
        *z *= h.dt;
    }
    Ok(AnalogWaveform::new(out, w.t0 + lag as f64 * w.dt, w.dt))
}

/// Picks the `M N` body samples at `t = nT + lT/M`.
pub fn sample_at_grid(w: &AnalogWaveform, p: &FrameParams) -> Result<TimeFrame> {
    if (w.dt - p.fine_period()).abs() > 1e-9 * p.fine_period() {
        return Err(OtfsError::Alignment(format!(
            "waveform spacing {:.6e} s is not T/(QM) = {:.6e} s",
            w.dt,
            p.fine_period()
        )));
    }
    let origin = -w.lattice_offset()?;
    let count = p.symbols();
    let first = origin;
    let last = origin + ((count - 1) * p.q) as i64;
    if first < 0 || last >= w.len() as i64 {
        return Err(OtfsError::Coverage(format!(
            "lattice spans samples [{first}, {last}] but the waveform has {}",
            w.len()
        )));
    }
    let body = (0..count)
        .map(|i| w.samples[(first + (i * p.q) as i64) as usize])
        .collect();
    Ok(TimeFrame::from_body(body))
}

/// Two-sided averaged-periodogram estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdTable {
    /// Ascending frequencies in Hz, from `-fs/2`.
    pub freq_hz: Vec<f64>,
    /// Power spectral density per Hz.
    pub psd: Vec<f64>,
    /// Equivalent noise bandwidth of one bin in Hz.
    pub enbw_hz: f64,
}

impl PsdTable {
    pub fn psd_db(&self) -> Vec<f64> {
        self.psd.iter().map(|&v| 10.0 * v.max(1e-300).log10()).collect()
    }

    /// Power an isolated bin-centred tone would show at bin `i`.
    pub fn bin_power(&self, i: usize) -> f64 {
        self.psd[i] * self.enbw_hz
    }

    /// `frequency_hz,psd_db` rows.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,psd_db\n");
        for (f, d) in self.freq_hz.iter().zip(self.psd_db()) {
            s.push_str(&format!("{f:.6e},{d:.6e}\n"));
        }
        s
    }
}

/// Welch estimate with a periodic Hann window, `nfft`-sample segments
/// advancing by `nfft - overlap`.
pub fn psd_estimate(w: &AnalogWaveform, nfft: usize, overlap: usize) -> Result<PsdTable> {
    if nfft == 0 || nfft > w.len() {
        return Err(OtfsError::InvalidParams(format!(
            "segment length {nfft} must be in [1, {}]",
            w.len()
        )));
    }
    if overlap >= nfft {
        return Err(OtfsError::InvalidParams(format!(
            "overlap {overlap} must be shorter than the segment {nfft}"
        )));
    }
    let window: Vec<f64> = (0..nfft)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / nfft as f64).cos())
        .collect();
    let w_sum: f64 = window.iter().sum();
    let w_energy: f64 = window.iter().map(|v| v * v).sum();
    let fs = 1.0 / w.dt;
    let step = nfft - overlap;
    let plan = fft::forward(nfft);
    let mut acc = vec![0.0; nfft];
    let mut segments = 0usize;
    let mut start = 0;
    let mut buf = vec![ZERO; nfft];
    while start + nfft <= w.len() {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = w.samples[start + i] * window[i];
        }
        plan.process(&mut buf);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let norm = 1.0 / (segments as f64 * fs * w_energy);
    let half = nfft / 2;
    let mut freq_hz = Vec::with_capacity(nfft);
    let mut psd = Vec::with_capacity(nfft);
    for i in 0..nfft {
        let bin = (i + half) % nfft; // fftshift
        let k = bin as i64 - if bin >= nfft - half { nfft as i64 } else { 0 };
        freq_hz.push(k as f64 * fs / nfft as f64);
        psd.push(acc[bin] * norm);
    }
    Ok(PsdTable {
        freq_hz,
        psd,
        enbw_hz: fs * w_energy / (w_sum * w_sum),
    })
}
