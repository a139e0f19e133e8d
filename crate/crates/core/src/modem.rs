//! Lossless transforms between the delay-Doppler, time-frequency and sampled
//! time domains, plus the frame-wise cyclic prefix.
//!
//! All transforms are unitary:
//!
//! * ISFFT: `X_tf[n,m] = 1/sqrt(MN) sum_k sum_l X[k,l] e^{j2pi(nk/N - ml/M)}`
//! * per-slot IDFT: `s[nM+l] = 1/sqrt(M) sum_m X_tf[n,m] e^{j2pi ml/M}`
//! * IDZT: `s[nM+l] = 1/sqrt(N) sum_k X[k,l] e^{j2pi nk/N}`
//!
//! so that the ISFFT followed by the per-slot IDFT equals the IDZT.

use crate::error::{OtfsError, Result};
use crate::fft;
use crate::grid::{DDGrid, FrameParams, GridKind, C64};

/// Time-frequency grid indexed (time `n`, subcarrier `m`), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TFGrid {
    n: usize,
    m: usize,
    data: Vec<C64>,
}

impl TFGrid {
    pub fn from_vec(n: usize, m: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != n * m {
            return Err(OtfsError::Dimension {
                expected: n * m,
                got: data.len(),
            });
        }
        Ok(Self { n, m, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.data[n * self.m + m]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }
}

/// Discrete time frame at rate `M/T`: `cp_len` prefix samples followed by the
/// `M*N` body samples `s[nM + l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFrame {
    pub samples: Vec<C64>,
    pub cp_len: usize,
}

impl TimeFrame {
    pub fn from_body(body: Vec<C64>) -> Self {
        Self {
            samples: body,
            cp_len: 0,
        }
    }

    pub fn body(&self) -> &[C64] {
        &self.samples[self.cp_len..]
    }

    pub fn body_mut(&mut self) -> &mut [C64] {
        let cp = self.cp_len;
        &mut self.samples[cp..]
    }

    pub fn body_len(&self) -> usize {
        self.samples.len() - self.cp_len
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }
}

pub fn isfft(x: &DDGrid) -> TFGrid {
    let (n, m) = (x.n(), x.m());
    let mut data = x.as_slice().to_vec();
    // +j along Doppler (k -> n), -j along delay (l -> m).
    fft::along_rows(&mut data, n, m, fft::inverse(n).as_ref());
    fft::along_cols(&mut data, m, fft::forward(m).as_ref());
    let scale = 1.0 / ((m * n) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    TFGrid { n, m, data }
}

pub fn sfft(y: &TFGrid) -> DDGrid {
    let (n, m) = (y.n, y.m);
    let mut data = y.data.clone();
    fft::along_rows(&mut data, n, m, fft::forward(n).as_ref());
    fft::along_cols(&mut data, m, fft::inverse(m).as_ref());
    let scale = 1.0 / ((m * n) as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    DDGrid::from_vec(n, m, data, GridKind::Received).expect("shape preserved")
}

/// Per-slot unitary `M`-point inverse DFT of a TF grid (OFDM modulation without CP).
pub fn slot_idft(x: &TFGrid) -> TimeFrame {
    let mut data = x.data.clone();
    fft::along_cols(&mut data, x.m, fft::inverse(x.m).as_ref());
    let scale = 1.0 / (x.m as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    TimeFrame::from_body(data)
}

/// Inverse discrete Zak transform; returns the body with `cp_len = 0`.
pub fn idzt(x: &DDGrid) -> TimeFrame {
    let (n, m) = (x.n(), x.m());
    let mut data = x.as_slice().to_vec();
    fft::along_rows(&mut data, n, m, fft::inverse(n).as_ref());
    let scale = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    // Row n of the buffer now holds slot n, i.e. s[nM + l].
    TimeFrame::from_body(data)
}

/// Discrete Zak transform of an `M*N` body.
pub fn dzt(body: &[C64], p: &FrameParams) -> Result<DDGrid> {
    let (n, m) = (p.n, p.m);
    if body.len() != n * m {
        return Err(OtfsError::Dimension {
            expected: n * m,
            got: body.len(),
        });
    }
    let mut data = body.to_vec();
    fft::along_rows(&mut data, n, m, fft::forward(n).as_ref());
    let scale = 1.0 / (n as f64).sqrt();
    data.iter_mut().for_each(|z| *z *= scale);
    DDGrid::from_vec(n, m, data, GridKind::Received)
}

/// Prepends the last `cp_len` body samples.
pub fn add_cp(f: &TimeFrame, cp_len: usize) -> Result<TimeFrame> {
    let body = f.body();
    if cp_len > body.len() {
        return Err(OtfsError::CpOutOfRange {
            cp_len,
            max: body.len(),
        });
    }
    let mut samples = Vec::with_capacity(body.len() + cp_len);
    samples.extend_from_slice(&body[body.len() - cp_len..]);
    samples.extend_from_slice(body);
    Ok(TimeFrame { samples, cp_len })
}

pub fn remove_cp(f: &TimeFrame) -> TimeFrame {
    TimeFrame::from_body(f.body().to_vec())
}
