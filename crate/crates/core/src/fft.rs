use std::cell::RefCell;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::grid::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

pub(crate) fn inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Applies an unnormalized DFT of length `len` to every strided column of a
/// row-major `rows x cols` buffer, along the row index.
pub(crate) fn along_rows(data: &mut [C64], rows: usize, cols: usize, fft: &dyn Fft<f64>) {
    let mut col = vec![C64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        fft.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// Applies an unnormalized DFT to each contiguous row.
pub(crate) fn along_cols(data: &mut [C64], cols: usize, fft: &dyn Fft<f64>) {
    for row in data.chunks_exact_mut(cols) {
        fft.process(row);
    }
}

/// Linear convolution of `a` and `b` via zero-padded FFTs.
pub(crate) fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa = vec![C64::new(0.0, 0.0); size];
    let mut fb = vec![C64::new(0.0, 0.0); size];
    fa[..a.len()].copy_from_slice(a);
    fb[..b.len()].copy_from_slice(b);
    let fwd = forward(size);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inverse(size).process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    for x in &mut fa {
        *x *= scale;
    }
    fa
}
