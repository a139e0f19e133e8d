//! Delay-Doppler detection under the standard rectangular-pulse model.
//!
//! The receiver model deliberately ignores the front-end filter.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSpec;
use crate::error::{OtfsError, Result};
use crate::grid::{Constellation, DDGrid, FrameParams, GridKind, C64};

/// Sparse DD-domain channel matrix: `rows[k * M + l]` lists
/// `(input index, coefficient)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub n: usize,
    pub m: usize,
    pub rows: Vec<Vec<(usize, C64)>>,
}

impl EffectiveChannel {
    pub fn identity(n: usize, m: usize) -> Self {
        Self {
            n,
            m,
            rows: (0..n * m).map(|i| vec![(i, C64::new(1.0, 0.0))]).collect(),
        }
    }

    pub fn apply(&self, x: &DDGrid) -> Result<DDGrid> {
        if x.n() != self.n || x.m() != self.m {
            return Err(OtfsError::Dimension {
                expected: self.n * self.m,
                got: x.n() * x.m(),
            });
        }
        let xs = x.as_slice();
        let data = self
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, h)| h * xs[j]).sum())
            .collect();
        DDGrid::from_vec(self.n, self.m, data, GridKind::Received)
    }

    pub fn max_row_len(&self) -> usize {
        self.rows.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// DD input-output relation of an integer-tap channel with a frame-wise CP
/// at least as long as the largest delay.
///
/// Output `(k, l)` collects input `((k - k_i)_N, (l - l_i)_M)` with weight
/// `a_i exp(j 2 pi (l - l_i) k_i / (MN))`, times `exp(-j 2 pi (k - k_i)_N / N)`
/// when `l < l_i`.
pub fn build_effective_channel(ch: &ChannelSpec, p: &FrameParams) -> EffectiveChannel {
    let (n, m) = (p.n, p.m);
    let mn = (m * n) as i64;
    let mut rows = Vec::with_capacity(n * m);
    for k in 0..n {
        for l in 0..m {
            let mut row: Vec<(usize, C64)> = Vec::with_capacity(ch.paths.len());
            for path in &ch.paths {
                let li = path.delay_tap as i64;
                let ki = path.doppler_tap;
                let kk = (k as i64 - ki).rem_euclid(n as i64);
                let ll = (l as i64 - li).rem_euclid(m as i64);
                // Phase numerator over MN, reduced exactly.
                let mut r = ((l as i64 - li) * ki).rem_euclid(mn);
                if (l as i64) < li {
                    r = (r - kk * m as i64).rem_euclid(mn);
                }
                let h = path.gain * C64::from_polar(1.0, 2.0 * PI * r as f64 / mn as f64);
                let idx = kk as usize * m + ll as usize;
                match row.iter_mut().find(|e| e.0 == idx) {
                    Some(e) => e.1 += h,
                    None => row.push((idx, h)),
                }
            }
            rows.push(row);
        }
    }
    EffectiveChannel { n, m, rows }
}

/// Message-passing settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpOptions {
    pub damping: f64,
    pub max_iter: usize,
    /// Stop once no message probability moves by more than this.
    pub tol: f64,
    /// Floor applied to message probabilities.
    pub prob_floor: f64,
}

impl Default for MpOptions {
    fn default() -> Self {
        Self {
            damping: 0.7,
            max_iter: 50,
            tol: 1e-5,
            prob_floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub symbols: DDGrid,
    /// Constellation index per grid point.
    pub labels: Vec<usize>,
    pub iterations: usize,
}

/// Gaussian-approximation message passing on the factor graph of `H`.
///
/// Observation nodes model all but the target symbol as Gaussian; variable
/// nodes combine the resulting likelihoods with damping. The schedule is
/// fully parallel (flooding). Decisions pick the most probable point, ties
/// going to the lowest constellation index.
pub fn mp_detect(y: &DDGrid, h: &EffectiveChannel, c: &Constellation, n0: f64, opts: &MpOptions) -> Result<Detection> {
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(OtfsError::InvalidParams(format!("noise variance must be positive, got {n0}")));
    }
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(OtfsError::InvalidParams(format!("damping {} outside (0, 1]", opts.damping)));
    }
    if y.n() != h.n || y.m() != h.m {
        return Err(OtfsError::Dimension {
            expected: h.n * h.m,
            got: y.n() * y.m(),
        });
    }
    let q = c.order();
    let cells = h.n * h.m;
    let ys = y.as_slice();
    let pts = &c.points;
    let energies: Vec<f64> = pts.iter().map(|a| a.norm_sqr()).collect();

    // Edges in row order; each edge carries its own message p_{c -> d}.
    let mut edge_col = Vec::new();
    let mut edge_h = Vec::new();
    let mut row_start = Vec::with_capacity(cells + 1);
    for row in &h.rows {
        row_start.push(edge_col.len());
        for &(j, v) in row {
            edge_col.push(j);
            edge_h.push(v);
        }
    }
    row_start.push(edge_col.len());
    let edges = edge_col.len();
    let mut col_edges: Vec<Vec<usize>> = vec![Vec::new(); cells];
    for (e, &j) in edge_col.iter().enumerate() {
        col_edges[j].push(e);
    }

    let mut msg = vec![1.0 / q as f64; edges * q];
    let mut mu = vec![C64::new(0.0, 0.0); edges];
    let mut var = vec![0.0; edges];
    let mut loglik = vec![0.0; edges * q];
    let mut total = vec![0.0; q];
    let mut fresh = vec![0.0; q];
    let mut labels = vec![0usize; cells];
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        // Observation nodes: interference mean and variance per edge.
        for d in 0..cells {
            let (s, t) = (row_start[d], row_start[d + 1]);
            let mut m_sum = C64::new(0.0, 0.0);
            let mut v_sum = 0.0;
            for e in s..t {
                let pm = &msg[e * q..(e + 1) * q];
                let mean: C64 = pm.iter().zip(pts).map(|(&w, &a)| w * a).sum();
                let second: f64 = pm.iter().zip(&energies).map(|(&w, &a2)| w * a2).sum();
                let g = edge_h[e];
                mu[e] = g * mean;
                var[e] = g.norm_sqr() * (second - mean.norm_sqr()).max(0.0);
                m_sum += mu[e];
                v_sum += var[e];
            }
            for e in s..t {
                mu[e] = m_sum - mu[e];
                var[e] = (v_sum - var[e]).max(0.0) + n0;
            }
            for e in s..t {
                let resid = ys[d] - mu[e];
                for (a, &pt) in pts.iter().enumerate() {
                    loglik[e * q + a] = -(resid - edge_h[e] * pt).norm_sqr() / var[e];
                }
            }
        }
        // Variable nodes: extrinsic probabilities with damping.
        let mut change: f64 = 0.0;
        for (j, ce) in col_edges.iter().enumerate() {
            total.iter_mut().for_each(|v| *v = 0.0);
            for &e in ce {
                for a in 0..q {
                    total[a] += loglik[e * q + a];
                }
            }
            labels[j] = argmax(&total);
            for &e in ce {
                for a in 0..q {
                    fresh[a] = total[a] - loglik[e * q + a];
                }
                normalize_exp(&mut fresh, opts.prob_floor);
                for a in 0..q {
                    let old = msg[e * q + a];
                    let new = opts.damping * fresh[a] + (1.0 - opts.damping) * old;
                    change = change.max((new - old).abs());
                    msg[e * q + a] = new;
                }
            }
        }
        if change < opts.tol {
            break;
        }
    }

    let data = labels.iter().map(|&i| pts[i]).collect();
    Ok(Detection {
        symbols: DDGrid::from_vec(h.n, h.m, data, GridKind::Symbols)?,
        labels,
        iterations,
    })
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// In-place softmax of log-weights with a probability floor.
fn normalize_exp(v: &mut [f64], floor: f64) {
    let top = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - top).exp();
        sum += *x;
    }
    let mut sum2 = 0.0;
    for x in v.iter_mut() {
        *x = (*x / sum).max(floor);
        sum2 += *x;
    }
    v.iter_mut().for_each(|x| *x /= sum2);
}
