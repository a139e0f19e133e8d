//! Frame dimensioning, constellation mapping and the seeding contract.
//!
//! Delay-Doppler grids are stored row-major with the Doppler index `k`
//! outer and the delay index `l` inner, i.e. entry `(k, l)` lives at
//! `k * M + l`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OtfsError, Result};

pub type C64 = Complex64;

/// Dimensional constants of one OTFS frame.
///
/// The slot duration is always derived as `T = 1 / delta_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameParams {
    /// Delay bins per slot.
    pub m: usize,
    /// Doppler bins, equal to the number of slots per frame.
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Slot duration in seconds.
    pub t: f64,
    /// Frame-wise cyclic prefix length in samples.
    pub cp_len: usize,
    /// Oversampling factor: fine samples per `T/M` interval.
    pub q: usize,
}

impl FrameParams {
    pub fn new(m: usize, n: usize, delta_f: f64, cp_len: usize, q: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(OtfsError::InvalidParams(format!(
                "M and N must be positive (M={m}, N={n})"
            )));
        }
        if !(delta_f.is_finite() && delta_f > 0.0) {
            return Err(OtfsError::InvalidParams(format!(
                "subcarrier spacing must be positive, got {delta_f}"
            )));
        }
        if q < 2 {
            return Err(OtfsError::InvalidParams(format!(
                "oversampling factor must be at least 2, got {q}"
            )));
        }
        if cp_len > m * n {
            return Err(OtfsError::CpOutOfRange { cp_len, max: m * n });
        }
        Ok(Self {
            m,
            n,
            delta_f,
            t: 1.0 / delta_f,
            cp_len,
            q,
        })
    }

    /// `M=m, N=n`, 15 kHz spacing, a one-slot CP and `Q=16`.
    pub fn with_defaults(m: usize, n: usize) -> Result<Self> {
        Self::new(m, n, 15e3, m, 16)
    }

    pub fn with_q(&self, q: usize) -> Result<Self> {
        Self::new(self.m, self.n, self.delta_f, self.cp_len, q)
    }

    pub fn with_cp_len(&self, cp_len: usize) -> Result<Self> {
        Self::new(self.m, self.n, self.delta_f, cp_len, self.q)
    }

    /// Number of DD symbols per frame.
    pub fn symbols(&self) -> usize {
        self.m * self.n
    }

    /// Delay resolution `T/M`.
    pub fn sample_period(&self) -> f64 {
        self.t / self.m as f64
    }

    /// Fine lattice spacing `T/(Q M)`.
    pub fn fine_period(&self) -> f64 {
        self.t / (self.q * self.m) as f64
    }

    /// Fine samples per slot.
    pub fn fine_per_slot(&self) -> usize {
        self.q * self.m
    }

    fn check_grid(&self, n: usize, m: usize) -> Result<()> {
        if n != self.n || m != self.m {
            return Err(OtfsError::Dimension {
                expected: self.symbols(),
                got: n * m,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridKind {
    Symbols,
    Received,
    Map,
}

/// An `N x M` complex array indexed by (Doppler `k`, delay `l`).
#[derive(Debug, Clone, PartialEq)]
pub struct DDGrid {
    n: usize,
    m: usize,
    data: Vec<C64>,
    pub kind: GridKind,
}

impl DDGrid {
    pub fn zeros(n: usize, m: usize, kind: GridKind) -> Self {
        Self {
            n,
            m,
            data: vec![C64::new(0.0, 0.0); n * m],
            kind,
        }
    }

    pub fn from_vec(n: usize, m: usize, data: Vec<C64>, kind: GridKind) -> Result<Self> {
        if data.len() != n * m {
            return Err(OtfsError::Dimension {
                expected: n * m,
                got: data.len(),
            });
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(OtfsError::Numeric("grid entries must be finite".into()));
        }
        Ok(Self { n, m, data, kind })
    }

    pub fn for_params(p: &FrameParams, kind: GridKind) -> Self {
        Self::zeros(p.n, p.m, kind)
    }

    /// Number of Doppler rows.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of delay columns.
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> C64 {
        self.data[k * self.m + l]
    }

    #[inline]
    pub fn set(&mut self, k: usize, l: usize, v: C64) {
        self.data[k * self.m + l] = v;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn check_params(&self, p: &FrameParams) -> Result<()> {
        p.check_grid(self.n, self.m)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Largest entry-wise absolute difference.
    pub fn max_abs_diff(&self, other: &DDGrid) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Rectangular QAM with per-axis Gray labeling.
///
/// `points[label]` is the point carrying `label`, read MSB first from the
/// bit stream; the first half of the label bits selects the in-phase level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    pub points: Vec<C64>,
    pub bits_per_symbol: usize,
    pub avg_energy: f64,
}

impl Constellation {
    /// Square `order`-QAM (`order` = 4, 16, 64, ...) with mean energy `avg_energy`.
    pub fn qam(order: usize, avg_energy: f64) -> Result<Self> {
        let bits = order.trailing_zeros() as usize;
        if order < 4 || !order.is_power_of_two() || bits % 2 != 0 {
            return Err(OtfsError::InvalidParams(format!(
                "QAM order must be an even power of two >= 4, got {order}"
            )));
        }
        if !(avg_energy.is_finite() && avg_energy > 0.0) {
            return Err(OtfsError::InvalidParams(format!(
                "average symbol energy must be positive, got {avg_energy}"
            )));
        }
        let axis_bits = bits / 2;
        let levels = 1usize << axis_bits;
        let raw_energy = 2.0 * ((levels * levels) as f64 - 1.0) / 3.0;
        let scale = (avg_energy / raw_energy).sqrt();
        let amplitude = |gray: usize| -> f64 {
            let idx = inverse_gray(gray);
            (levels as f64 - 1.0 - 2.0 * idx as f64) * scale
        };
        let points = (0..order)
            .map(|label| {
                let i_bits = label >> axis_bits;
                let q_bits = label & (levels - 1);
                C64::new(amplitude(i_bits), amplitude(q_bits))
            })
            .collect();
        Ok(Self {
            points,
            bits_per_symbol: bits,
            avg_energy,
        })
    }

    pub fn qpsk() -> Self {
        Self::qam(4, 1.0).expect("4-QAM is always valid")
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// Index of the nearest point; ties go to the lowest index.
    pub fn nearest(&self, z: C64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Splits `label` into `bits_per_symbol` bits, MSB first.
    pub fn label_bits(&self, label: usize, out: &mut Vec<u8>) {
        for b in (0..self.bits_per_symbol).rev() {
            out.push(((label >> b) & 1) as u8);
        }
    }
}

fn inverse_gray(mut g: usize) -> usize {
    let mut b = 0;
    while g != 0 {
        b ^= g;
        g >>= 1;
    }
    b
}

/// Maps a bit sequence onto a symbol grid, row-major (`k` outer, `l` inner).
pub fn map_bits(bits: &[u8], c: &Constellation, p: &FrameParams) -> Result<DDGrid> {
    let expected = p.symbols() * c.bits_per_symbol;
    if bits.len() != expected {
        return Err(OtfsError::Dimension {
            expected,
            got: bits.len(),
        });
    }
    let data = bits
        .chunks_exact(c.bits_per_symbol)
        .map(|chunk| {
            let label = chunk
                .iter()
                .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
            c.points[label]
        })
        .collect();
    Ok(DDGrid {
        n: p.n,
        m: p.m,
        data,
        kind: GridKind::Symbols,
    })
}

/// Hard nearest-point decisions, emitted in the same order `map_bits` consumes.
pub fn demap(grid: &DDGrid, c: &Constellation) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.data.len() * c.bits_per_symbol);
    for &z in &grid.data {
        c.label_bits(c.nearest(z), &mut out);
    }
    out
}

/// Keys an independent, platform-stable random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Same master seed, different stream.
    pub fn stream(&self, stream_id: u64) -> Self {
        Self {
            master_seed: self.master_seed,
            stream_id,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Uniform random bits for one frame.
pub fn random_bits(count: usize, seed: SeedSpec) -> Vec<u8> {
    use rand::Rng;
    let mut rng = seed.rng();
    let mut bits = Vec::with_capacity(count);
    while bits.len() < count {
        let word: u64 = rng.random();
        let take = (count - bits.len()).min(64);
        bits.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    bits
}

/// A grid of uniformly drawn constellation points.
pub fn random_symbols(p: &FrameParams, c: &Constellation, seed: SeedSpec) -> DDGrid {
    let bits = random_bits(p.symbols() * c.bits_per_symbol, seed);
    map_bits(&bits, c, p).expect("bit count matches by construction")
}
