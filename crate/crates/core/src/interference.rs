//! Analytic interference engine for a band-limited receiver.
//!
//! With `u = t M / T` measured in delay samples, the slot-`q` quadrature is
//!
//! ```text
//! i(q)[l, l'] = integral over u in [qM, (q+1)M] of h(l - u) sinc(u - l') du
//! ```
//!
//! evaluated on the shared fine lattice (spacing `1/Q`). Continuous kernels
//! use the trapezoid rule; discrete-tap filters use half-open slot ownership,
//! matching how [`crate::waveform::apply_filter`] treats slot boundaries, so
//! the Monte-Carlo measurement and the analytic tables discretize the same
//! integral in the same way.
//!
//! Folding `l' = l2 M + l1` and summing over all `l2` turns the sinc into the
//! `M`-periodic sinc kernel, which is evaluated in closed form.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::fft;
use crate::grid::{random_symbols, Constellation, DDGrid, FrameParams, GridKind, SeedSpec, C64};
use crate::modem::{add_cp, dzt, idzt};
use crate::waveform::{apply_filter, periodic_sinc_table, sample_at_grid, sinc, to_analog, FilterSpec};

/// Slot offsets: preceding, current and succeeding slot.
pub const SLOT_OFFSETS: [i32; 3] = [-1, 0, 1];

fn slot_index(q: i32) -> usize {
    assert!((-1..=1).contains(&q), "slot offset {q} outside {{-1, 0, 1}}");
    (q + 1) as usize
}

/// Quadrature weight of fine sample `j` (relative to the slot start) in a
/// slot of `len` fine samples.
#[inline]
fn slot_weight(j: usize, len: usize, continuous: bool) -> f64 {
    match (continuous, j == 0, j == len) {
        (true, true, _) | (true, _, true) => 0.5,
        (false, _, true) => 0.0,
        _ => 1.0,
    }
}

/// Fine-sample range `[lo, hi]` of slot `q` on which `h(lQ - j)` can be nonzero.
fn support_in_slot(p: &FrameParams, h: &FilterSpec, q: i32, l: usize) -> Option<(i64, i64)> {
    let mq = p.fine_per_slot() as i64;
    let centre = (l * p.q) as i64;
    let lo = (q as i64 * mq).max(centre - h.lag() as i64);
    let hi = ((q as i64 + 1) * mq).min(centre + h.lead() as i64);
    (lo <= hi).then_some((lo, hi))
}

/// One interference quadrature `i(q)[l, l']` for a real-valued filter.
pub fn compute_iq(p: &FrameParams, h: &FilterSpec, q: i32, l: usize, l_prime: i64) -> f64 {
    let _ = slot_index(q);
    let mq = p.fine_per_slot() as i64;
    let Some((lo, hi)) = support_in_slot(p, h, q, l) else {
        return 0.0;
    };
    let centre = (l * p.q) as i64;
    let qf = p.q as f64;
    let continuous = h.is_continuous();
    let mut acc = 0.0;
    for j in lo..=hi {
        let w = slot_weight((j - q as i64 * mq) as usize, mq as usize, continuous);
        if w == 0.0 {
            continue;
        }
        acc += w * h.tap(centre - j).re * sinc((j - l_prime * p.q as i64) as f64 / qf);
    }
    acc * h.dt
}

/// `sum_q i(q)[l, l']`; equals `delta[l - l']` for an untruncated kernel.
pub fn orthogonality_check(p: &FrameParams, h: &FilterSpec, l: usize, l_prime: i64) -> f64 {
    SLOT_OFFSETS
        .iter()
        .map(|&q| compute_iq(p, h, q, l, l_prime))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub params: FrameParams,
    pub filter_fingerprint: String,
    /// `None` for the exact periodic fold.
    pub l2_max: Option<usize>,
}

/// Folded coefficients `I(q)[l, l1]` for `q` in `{-1, 0, 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceTables {
    pub m: usize,
    /// Three row-major `M x M` tables, ordered `q = -1, 0, 1`.
    pub iq: [Vec<f64>; 3],
    pub meta: TableMeta,
}

impl InterferenceTables {
    #[inline]
    pub fn get(&self, q: i32, l: usize, l1: usize) -> f64 {
        self.iq[slot_index(q)][l * self.m + l1]
    }

    pub fn table(&self, q: i32) -> &[f64] {
        &self.iq[slot_index(q)]
    }
}

const DIRECT_FOLD_TAPS: usize = 64;

/// Folded tables with the `l2` sum taken exactly through the periodic sinc.
pub fn fold_iq(p: &FrameParams, h: &FilterSpec) -> InterferenceTables {
    let (m, q_os) = (p.m, p.q);
    let mq = p.fine_per_slot();
    let kernel = periodic_sinc_table(m, q_os);
    let mut kernel_hat: Vec<C64> = kernel.iter().map(|&v| C64::new(v, 0.0)).collect();
    fft::forward(mq).process(&mut kernel_hat);
    let continuous = h.is_continuous();

    let tables = SLOT_OFFSETS.map(|q| {
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|l| {
                let mut row = vec![0.0; m];
                let Some((lo, hi)) = support_in_slot(p, h, q, l) else {
                    return row;
                };
                // Fold the weighted filter onto one period of the kernel.
                let centre = (l * q_os) as i64;
                let mut g = vec![C64::new(0.0, 0.0); mq];
                let mut active = Vec::new();
                for j in lo..=hi {
                    let w = slot_weight((j - q as i64 * mq as i64) as usize, mq, continuous);
                    let v = w * h.tap(centre - j).re * h.dt;
                    if v != 0.0 {
                        let r = j.rem_euclid(mq as i64) as usize;
                        g[r] += v;
                        active.push(r);
                    }
                }
                if active.len() <= DIRECT_FOLD_TAPS {
                    active.sort_unstable();
                    active.dedup();
                    for (l1, v) in row.iter_mut().enumerate() {
                        *v = active
                            .iter()
                            .map(|&r| g[r].re * kernel[(r + mq - l1 * q_os) % mq])
                            .sum();
                    }
                    return row;
                }
                // Circular cross-correlation with the kernel, read at l1 * Q.
                fft::forward(mq).process(&mut g);
                for (a, b) in g.iter_mut().zip(&kernel_hat) {
                    *a *= b.conj();
                }
                fft::inverse(mq).process(&mut g);
                for (l1, v) in row.iter_mut().enumerate() {
                    *v = g[l1 * q_os].re / mq as f64;
                }
                row
            })
            .collect();
        rows.concat()
    });
    InterferenceTables {
        m,
        iq: tables,
        meta: TableMeta {
            params: *p,
            filter_fingerprint: h.fingerprint(),
            l2_max: None,
        },
    }
}

/// Folded tables with the `l2` sum truncated to `[q - l2_max, q + l2_max]`.
pub fn fold_iq_truncated(p: &FrameParams, h: &FilterSpec, l2_max: usize) -> InterferenceTables {
    let m = p.m;
    let tables = SLOT_OFFSETS.map(|q| {
        (0..m * m)
            .into_par_iter()
            .map(|idx| {
                let (l, l1) = (idx / m, idx % m);
                let span = l2_max as i64;
                (q as i64 - span..=q as i64 + span)
                    .map(|l2| compute_iq(p, h, q, l, l2 * m as i64 + l1 as i64))
                    .sum()
            })
            .collect()
    });
    InterferenceTables {
        m,
        iq: tables,
        meta: TableMeta {
            params: *p,
            filter_fingerprint: h.fingerprint(),
            l2_max: Some(l2_max),
        },
    }
}

#[inline]
fn cis(x: f64) -> C64 {
    C64::from_polar(1.0, x)
}

/// Coupling of transmitted symbol `(k_prime, l1)` onto received point `(k, l)`.
///
/// Self-Doppler branch (`k_prime == k`):
/// `I0 + I-1 e^{-j2pi k/N} + I1 (e^{j2pi k/N} - e^{-j2pi k(N-1)/N} / N)`.
/// Cross-Doppler branch: `-I1 e^{-j2pi k(N-1)/N} / N`. The frame-termination
/// phase depends on the received Doppler index `k` in both branches.
pub fn deviation_c(t: &InterferenceTables, n: usize, k_prime: usize, k: usize, l: usize, l1: usize) -> C64 {
    let nf = n as f64;
    let theta = 2.0 * PI * k as f64 / nf;
    let tail = cis(-theta * (nf - 1.0)) / nf;
    let i1 = t.get(1, l, l1);
    if k_prime == k {
        C64::new(t.get(0, l, l1), 0.0) + t.get(-1, l, l1) * cis(-theta) + i1 * (cis(theta) - tail)
    } else {
        -i1 * tail
    }
}

/// Self-coupling map `C[k, l, l]`, row-major `N x M`.
pub fn self_coupling(t: &InterferenceTables, n: usize) -> Vec<C64> {
    let m = t.m;
    (0..n * m)
        .map(|idx| {
            let (k, l) = (idx / m, idx % m);
            deviation_c(t, n, k, k, l, l)
        })
        .collect()
}

/// Average inter-delay-Doppler interference power per grid point.
pub fn iddi_power_v(t: &InterferenceTables, n: usize, sigma_s2: f64) -> Vec<f64> {
    let m = t.m;
    let nf = n as f64;
    let cross: Vec<f64> = (0..m)
        .map(|l| (0..m).map(|l1| t.get(1, l, l1).powi(2)).sum::<f64>() * (nf - 1.0) / (nf * nf))
        .collect();
    (0..n * m)
        .into_par_iter()
        .map(|idx| {
            let (k, l) = (idx / m, idx % m);
            let same: f64 = (0..m)
                .filter(|&l1| l1 != l)
                .map(|l1| deviation_c(t, n, k, k, l, l1).norm_sqr())
                .sum();
            sigma_s2 * (same + cross[l])
        })
        .collect()
}

/// Signal-to-interference ratio in dB; `+inf` where `V = 0`.
pub fn sir_map(c_self: &[C64], v: &[f64], sigma_s2: f64) -> Vec<f64> {
    c_self
        .iter()
        .zip(v)
        .map(|(c, &v)| {
            if v <= 0.0 {
                f64::INFINITY
            } else {
                10.0 * (sigma_s2 * c.norm_sqr() / v).log10()
            }
        })
        .collect()
}

/// Delay-Doppler maps derived from one set of tables.
#[derive(Debug, Clone, PartialEq)]
pub struct DDMaps {
    pub n: usize,
    pub m: usize,
    pub sigma_s2: f64,
    pub c_self: Vec<C64>,
    pub v: Vec<f64>,
    pub sir_db: Vec<f64>,
}

impl DDMaps {
    pub fn compute(t: &InterferenceTables, n: usize, sigma_s2: f64) -> Self {
        let c_self = self_coupling(t, n);
        let v = iddi_power_v(t, n, sigma_s2);
        let sir_db = sir_map(&c_self, &v, sigma_s2);
        Self {
            n,
            m: t.m,
            sigma_s2,
            c_self,
            v,
            sir_db,
        }
    }

    #[inline]
    pub fn at(&self, k: usize, l: usize) -> usize {
        k * self.m + l
    }
}

/// Metadata stored next to an exported map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapMeta {
    pub m: usize,
    pub n: usize,
    pub q: usize,
    pub filter_fingerprint: String,
    pub l2_max: Option<usize>,
}

impl MapMeta {
    pub fn from_tables(t: &InterferenceTables) -> Self {
        Self {
            m: t.meta.params.m,
            n: t.meta.params.n,
            q: t.meta.params.q,
            filter_fingerprint: t.meta.filter_fingerprint.clone(),
            l2_max: t.meta.l2_max,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// `k,l,value` rows in grid order; infinities print as `inf`.
pub fn map_csv(values: &[f64], n: usize, m: usize) -> String {
    assert_eq!(values.len(), n * m, "map size");
    let mut s = String::from("k,l,value\n");
    for k in 0..n {
        for l in 0..m {
            s.push_str(&format!("{k},{l},{}\n", fmt_value(values[k * m + l])));
        }
    }
    s
}

/// Scientific notation, with `inf` / `-inf` for infinities.
pub fn fmt_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.9e}")
    }
}

/// Received grid assembled slot by slot from the folded tables:
/// `y[n,l] = sum_q sum_l1 I(q)[l,l1] s[n+q, l1]` with the CP slot
/// `s[-1] = s[N-1]` and nothing after the frame, followed by the DZT.
pub fn received_from_tables(t: &InterferenceTables, x: &DDGrid, p: &FrameParams) -> Result<DDGrid> {
    x.check_params(p)?;
    let (n, m) = (p.n, p.m);
    let s = idzt(x);
    let slot = |idx: i64| -> Option<&[C64]> {
        if idx == -1 {
            Some(&s.body()[(n - 1) * m..])
        } else if (0..n as i64).contains(&idx) {
            let i = idx as usize;
            Some(&s.body()[i * m..(i + 1) * m])
        } else {
            None
        }
    };
    let mut y = vec![C64::new(0.0, 0.0); n * m];
    for slot_n in 0..n {
        for &q in &SLOT_OFFSETS {
            let Some(src) = slot(slot_n as i64 + q as i64) else {
                continue;
            };
            let table = t.table(q);
            for l in 0..m {
                let row = &table[l * m..(l + 1) * m];
                let acc: C64 = row.iter().zip(src).map(|(&c, &v)| v * c).sum();
                y[slot_n * m + l] += acc;
            }
        }
    }
    dzt(&y, p)
}

/// Received grid from the coupling coefficients: `Y = sum C[k',l,l1] X[k',l1]`.
pub fn received_from_coupling(t: &InterferenceTables, x: &DDGrid, p: &FrameParams) -> Result<DDGrid> {
    x.check_params(p)?;
    let (n, m) = (p.n, p.m);
    let mut y = DDGrid::for_params(p, GridKind::Received);
    for k in 0..n {
        for l in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for kp in 0..n {
                for l1 in 0..m {
                    acc += deviation_c(t, n, kp, k, l, l1) * x.get(kp, l1);
                }
            }
            y.set(k, l, acc);
        }
    }
    Ok(y)
}

/// Noiseless band-limited receive chain for one symbol grid.
pub fn filtered_receive(x: &DDGrid, p: &FrameParams, h: &FilterSpec) -> Result<DDGrid> {
    let tx = add_cp(&idzt(x), p.cp_len)?;
    let w = to_analog(&tx, p)?;
    let y = sample_at_grid(&apply_filter(&w, h)?, p)?;
    dzt(y.body(), p)
}

const MC_BATCH: usize = 32;

/// Measured interference power: random unit-energy 4-QAM frames through the
/// noiseless, non-dispersive band-limited receiver, averaging
/// `|Y - C[k,l,l] X|^2` per grid point with the analytic `C`.
pub fn measure_interference_mc(
    p: &FrameParams,
    h: &FilterSpec,
    frames: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let tables = fold_iq(p, h);
    let c_self = self_coupling(&tables, p.n);
    measure_with_coupling(p, h, &c_self, frames, seed)
}

pub(crate) fn measure_with_coupling(
    p: &FrameParams,
    h: &FilterSpec,
    c_self: &[C64],
    frames: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let c = Constellation::qpsk();
    let cells = p.symbols();
    let mut total = vec![0.0; cells];
    let mut start = 0;
    while start < frames {
        let end = (start + MC_BATCH).min(frames);
        let batch: Vec<Vec<f64>> = (start..end)
            .into_par_iter()
            .map(|f| -> Result<Vec<f64>> {
                let x = random_symbols(p, &c, SeedSpec::new(seed, f as u64));
                let y = filtered_receive(&x, p, h)?;
                Ok(y.as_slice()
                    .iter()
                    .zip(x.as_slice())
                    .zip(c_self)
                    .map(|((yv, xv), cv)| (yv - cv * xv).norm_sqr())
                    .collect())
            })
            .collect::<Result<_>>()?;
        for frame in batch {
            for (t, v) in total.iter_mut().zip(frame) {
                *t += v;
            }
        }
        start = end;
    }
    let scale = 1.0 / frames.max(1) as f64;
    total.iter_mut().for_each(|v| *v *= scale);
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::default_lpf;

    fn params(m: usize, n: usize) -> FrameParams {
        FrameParams::with_defaults(m, n).unwrap()
    }

    /// Plain Riemann sum of the continuous integrand at a much finer step.
    fn riemann_iq(p: &FrameParams, q: i32, l: usize, l_prime: i64, steps_per_sample: usize) -> f64 {
        let m = p.m as f64;
        let du = 1.0 / steps_per_sample as f64;
        let lo = q as f64 * m;
        let count = p.m * steps_per_sample;
        let mut acc = 0.0;
        for i in 0..count {
            let u = lo + (i as f64 + 0.5) * du;
            let lag = l as f64 - u;
            if lag.abs() <= m {
                acc += sinc(lag) * sinc(u - l_prime as f64);
            }
        }
        acc * du
    }

    #[test]
    fn support_geometry_zeroes_edge_quadratures() {
        let p = params(32, 4);
        let h = default_lpf(&p);
        for lp in [-40i64, 0, 5, 31, 63] {
            assert!(compute_iq(&p, &h, 1, 0, lp).abs() < 1e-15);
        }
        // The last delay bin still overlaps the preceding slot on [-T/M, 0],
        // where the filter tail is bounded by 1/(pi (M-1)).
        for m in [32usize, 128] {
            let p = params(m, 4);
            let h = default_lpf(&p);
            for lp in -(m as i64)..2 * m as i64 {
                let v = compute_iq(&p, &h, -1, m - 1, lp);
                assert!(v.abs() < 1.0 / (std::f64::consts::PI * (m - 1) as f64), "M={m} l'={lp}: {v}");
            }
        }
    }

    #[test]
    fn centre_quadrature_matches_fine_oracle() {
        let p = params(32, 4);
        let h = default_lpf(&p);
        let l = p.m / 2;
        let got = compute_iq(&p, &h, 0, l, l as i64);
        let oracle = riemann_iq(&p, 0, l, l as i64, 128);
        assert!((got - oracle).abs() < 1e-4, "{got} vs {oracle}");
    }

    #[test]
    fn orthogonality_holds_near_the_centre() {
        let p = params(32, 4);
        let h = default_lpf(&p);
        let l = p.m / 2;
        assert!((orthogonality_check(&p, &h, l, l as i64) - 1.0).abs() < 5e-3);
        assert!(orthogonality_check(&p, &h, l, l as i64 + 1).abs() < 5e-3);
    }

    #[test]
    fn identity_filter_is_exactly_orthogonal() {
        let p = params(16, 4);
        let h = FilterSpec::identity(&p);
        for l in 0..p.m {
            for lp in 0..p.m as i64 {
                let expected = if l as i64 == lp { 1.0 } else { 0.0 };
                assert!((orthogonality_check(&p, &h, l, lp) - expected).abs() < 1e-12);
            }
        }
        let t = fold_iq(&p, &h);
        for l in 0..p.m {
            for l1 in 0..p.m {
                let expected = if l == l1 { 1.0 } else { 0.0 };
                assert!((t.get(0, l, l1) - expected).abs() < 1e-12);
                assert!(t.get(-1, l, l1).abs() < 1e-12);
                assert!(t.get(1, l, l1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exact_fold_matches_direct_kernel_sum() {
        let p = FrameParams::new(8, 4, 15e3, 8, 4).unwrap();
        let h = default_lpf(&p);
        let t = fold_iq(&p, &h);
        let kernel = periodic_sinc_table(p.m, p.q);
        let mq = p.fine_per_slot() as i64;
        for q in SLOT_OFFSETS {
            for l in 0..p.m {
                for l1 in 0..p.m {
                    let centre = (l * p.q) as i64;
                    let mut acc = 0.0;
                    for j in q as i64 * mq..=(q as i64 + 1) * mq {
                        let w = if j == q as i64 * mq || j == (q as i64 + 1) * mq { 0.5 } else { 1.0 };
                        let r = (j - (l1 * p.q) as i64).rem_euclid(mq) as usize;
                        acc += w * h.tap(centre - j).re * kernel[r];
                    }
                    acc *= h.dt;
                    assert!((t.get(q, l, l1) - acc).abs() < 1e-12, "q={q} l={l} l1={l1}");
                }
            }
        }
    }

    #[test]
    fn truncated_fold_approaches_exact_fold() {
        let p = params(32, 4);
        let h = default_lpf(&p);
        let exact = fold_iq(&p, &h);
        let err = |l2: usize| {
            let t = fold_iq_truncated(&p, &h, l2);
            SLOT_OFFSETS
                .iter()
                .flat_map(|&q| {
                    let (a, b) = (t.table(q).to_vec(), exact.table(q).to_vec());
                    a.into_iter().zip(b).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>()
                })
                .fold(0.0, f64::max)
        };
        let (e8, e16) = (err(8), err(16));
        assert!(e16 < e8, "truncation error must shrink: {e8} -> {e16}");
        assert!(e8 < 5e-3, "L2max=8 error {e8}");
    }

    #[test]
    fn coupling_form_equals_slot_form() {
        let p = FrameParams::new(8, 4, 15e3, 8, 8).unwrap();
        let h = default_lpf(&p);
        let t = fold_iq(&p, &h);
        let x = random_symbols(&p, &Constellation::qpsk(), SeedSpec::new(9, 0));
        let a = received_from_tables(&t, &x, &p).unwrap();
        let b = received_from_coupling(&t, &x, &p).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-12, "{}", a.max_abs_diff(&b));
    }

    #[test]
    fn waveform_pipeline_equals_table_prediction() {
        let p = FrameParams::new(16, 4, 15e3, 16, 8).unwrap();
        let h = default_lpf(&p);
        let t = fold_iq(&p, &h);
        let x = random_symbols(&p, &Constellation::qpsk(), SeedSpec::new(10, 0));
        let measured = filtered_receive(&x, &p, &h).unwrap();
        let predicted = received_from_tables(&t, &x, &p).unwrap();
        assert!(measured.max_abs_diff(&predicted) < 1e-10, "{}", measured.max_abs_diff(&predicted));
    }

    #[test]
    fn identity_filter_has_no_interference() {
        let p = params(16, 8);
        let h = FilterSpec::identity(&p);
        let maps = DDMaps::compute(&fold_iq(&p, &h), p.n, 1.0);
        assert!(maps.c_self.iter().all(|c| (c - C64::new(1.0, 0.0)).norm() < 1e-12));
        assert!(maps.v.iter().all(|&v| v.abs() < 1e-20));
        assert!(maps.sir_db.iter().all(|s| s.is_infinite() && *s > 0.0));
        let mc = measure_interference_mc(&p, &h, 4, 1).unwrap();
        assert!(mc.iter().all(|&v| v < 1e-10));
    }

    #[test]
    fn self_coupling_is_symmetric_in_doppler() {
        let p = params(32, 8);
        let maps = DDMaps::compute(&fold_iq(&p, &default_lpf(&p)), p.n, 1.0);
        for k in 1..p.n {
            for l in 0..p.m {
                let a = maps.c_self[maps.at(k, l)].norm();
                let b = maps.c_self[maps.at(p.n - k, l)].norm();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interference_depends_only_on_symbol_energy() {
        let p = params(16, 4);
        let t = fold_iq(&p, &default_lpf(&p));
        let qpsk = Constellation::qam(4, 2.0).unwrap();
        let qam16 = Constellation::qam(16, 2.0).unwrap();
        assert_eq!(
            iddi_power_v(&t, p.n, qpsk.avg_energy),
            iddi_power_v(&t, p.n, qam16.avg_energy)
        );
        let v = iddi_power_v(&t, p.n, 2.0);
        assert!(v.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn map_export_layout() {
        let p = params(8, 4);
        let t = fold_iq(&p, &FilterSpec::identity(&p));
        let maps = DDMaps::compute(&t, p.n, 1.0);
        let csv = map_csv(&maps.sir_db, p.n, p.m);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,l,value");
        assert_eq!(lines.len(), 1 + p.symbols());
        assert_eq!(lines[1], "0,0,inf");
        let meta: MapMeta = serde_json::from_str(&MapMeta::from_tables(&t).to_json()).unwrap();
        assert_eq!((meta.m, meta.n, meta.q, meta.l2_max), (8, 4, 16, None));
        assert_eq!(meta.filter_fingerprint.len(), 64);
    }
}
