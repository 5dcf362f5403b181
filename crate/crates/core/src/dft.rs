//! Thin wrapper over `rustfft` with per-thread plan caching.
//!
//! Sign convention: `forward` computes `X_k = sum_j h_j e^{-2 pi i jk/N}`, which
//! evaluates the causal series `sum_j h_j z^{-j}` at `z = e^{i w_k}`.
//! `inverse` is normalized by `1/N` so that `inverse(forward(h)) == h`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub fn forward(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    fft.process(buf);
}

pub fn inverse(buf: &mut [Complex64]) {
    let n = buf.len();
    if n <= 1 {
        return;
    }
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(n));
    fft.process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

/// Forward transform of a real sequence zero-padded to `n`.
pub fn forward_real(coeffs: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (j, &c) in coeffs.iter().enumerate() {
        buf[j % n] += c;
    }
    forward(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let h: Vec<Complex64> = (0..16).map(|j| Complex64::new(j as f64, -(j as f64) * 0.5)).collect();
        let mut buf = h.clone();
        forward(&mut buf);
        inverse(&mut buf);
        for (a, b) in h.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn forward_evaluates_polynomial_in_z_inverse() {
        // 1 + z^{-1} at w = pi/2 (k = 1 of 4): 1 + e^{-i pi/2} = 1 - i
        let v = forward_real(&[1.0, 1.0], 4);
        assert!((v[1] - Complex64::new(1.0, -1.0)).norm() < 1e-14);
    }
}
