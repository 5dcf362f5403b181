use num_complex::Complex64;

use nalgebra::DMatrix;

use super::grid::GridSamples;
use super::transfer::TransferFunction;
use crate::linalg;

/// Fraction of total coefficient energy tolerated in the wrap-around band
/// before projections warn about aliasing.
pub const ALIASING_TOLERANCE: f64 = 1e-6;

/// `||X||_2^2`: quadrature of the squared Frobenius norm.
pub fn h2_norm_sq(x: &GridSamples) -> f64 {
    let w = x.grid().weight();
    x.data().iter().map(|v| v.norm_sqr()).sum::<f64>() * w
}

/// `||X||_1`: quadrature of the nuclear norm (sum of singular values).
pub fn l1_norm(x: &GridSamples) -> f64 {
    let w = x.grid().weight();
    if x.is_scalar() {
        return x.data().iter().map(|v| v.norm()).sum::<f64>() * w;
    }
    x.matrices().map(|m| linalg::nuclear_norm(&m)).sum::<f64>() * w
}

/// `<X, Y> = int tr(X^* Y) dw/2pi`.
pub fn inner_product(x: &GridSamples, y: &GridSamples) -> Complex64 {
    assert_eq!((x.rows(), x.cols()), (y.rows(), y.cols()));
    let w = x.grid().weight();
    x.data().iter().zip(y.data()).map(|(a, b)| a.conj() * b).sum::<Complex64>() * w
}

/// Pointwise conjugate transpose, `X^*(e^{iw}) = X(e^{iw})^H`.
pub fn adjoint(x: &GridSamples) -> GridSamples {
    if x.is_scalar() {
        return x.map_entries(|v| v.conj());
    }
    x.map_matrices(|_, m| m.adjoint())
}

/// Share of coefficient energy at lags `|j| >= 3n/8`, the band next to the
/// causal/anticausal wrap point. Large values mean the grid is too coarse
/// for the function's impulse response.
pub fn wraparound_energy_fraction(coeffs: &[Complex64], n: usize, block: usize) -> f64 {
    let lo = 3 * n / 8;
    let hi = n - lo;
    let mut tail = 0.0;
    let mut total = 0.0;
    for j in 0..n {
        let e: f64 = coeffs[j * block..(j + 1) * block].iter().map(|v| v.norm_sqr()).sum();
        total += e;
        if j >= lo && j < hi {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Energy share of the strictly anticausal coefficients.
pub fn anticausal_energy_fraction(x: &GridSamples) -> f64 {
    let coeffs = x.coefficients();
    let n = x.len();
    let block = x.rows() * x.cols();
    let grid = x.grid();
    let mut anti = 0.0;
    let mut total = 0.0;
    for j in 0..n {
        let e: f64 = coeffs[j * block..(j + 1) * block].iter().map(|v| v.norm_sqr()).sum();
        total += e;
        if !grid.is_causal_index(j) {
            anti += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        anti / total
    }
}

/// Causal projection together with the wrap-around energy diagnostic.
pub fn causal_projection_checked(x: &GridSamples) -> (GridSamples, f64) {
    let n = x.len();
    let block = x.rows() * x.cols();
    let grid = x.grid();
    let mut coeffs = x.coefficients();
    let tail = wraparound_energy_fraction(&coeffs, n, block);
    for j in 0..n {
        if !grid.is_causal_index(j) {
            for v in &mut coeffs[j * block..(j + 1) * block] {
                *v = Complex64::new(0.0, 0.0);
            }
        }
    }
    let out = GridSamples::from_coefficients(grid, x.rows(), x.cols(), coeffs)
        .expect("coefficient layout matches input");
    (out, tail)
}

/// `P_+`: orthogonal projection onto causal functions (nonnegative powers of `z^{-1}`).
pub fn causal_projection(x: &GridSamples) -> GridSamples {
    let (out, tail) = causal_projection_checked(x);
    if tail > ALIASING_TOLERANCE {
        log::warn!("causal projection: {tail:.2e} of coefficient energy near the wrap point; grid may alias");
    }
    out
}

/// Projection onto FIR functions with taps `0..taps`.
pub fn fir_projection(x: &GridSamples, taps: usize) -> GridSamples {
    let n = x.len();
    let block = x.rows() * x.cols();
    let mut coeffs = x.coefficients();
    for j in taps.min(n)..n {
        for v in &mut coeffs[j * block..(j + 1) * block] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    GridSamples::from_coefficients(x.grid(), x.rows(), x.cols(), coeffs).expect("layout preserved")
}

/// Real FIR with the first `taps` coefficients of `x`, plus the share of
/// coefficient energy left out (anticausal part, later taps and imaginary parts).
pub fn fir_truncation(x: &GridSamples, taps: usize) -> (TransferFunction, f64) {
    let n = x.len();
    let (r, c) = (x.rows(), x.cols());
    let block = r * c;
    let coeffs = x.coefficients();
    let total: f64 = coeffs.iter().map(|v| v.norm_sqr()).sum();
    let taps = taps.clamp(1, n);
    let mut kept = 0.0;
    let mut out = Vec::with_capacity(taps);
    for j in 0..taps {
        let blk = &coeffs[j * block..(j + 1) * block];
        kept += blk.iter().map(|v| v.re * v.re).sum::<f64>();
        out.push(DMatrix::from_row_iterator(r, c, blk.iter().map(|v| v.re)));
    }
    let dropped = if total > 0.0 { ((total - kept) / total).max(0.0) } else { 0.0 };
    (TransferFunction::Fir { coeffs: out }, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_core::{FrequencyGrid, TransferFunction};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn grid(n: usize) -> FrequencyGrid {
        FrequencyGrid::new(n).unwrap()
    }

    fn s_example() -> TransferFunction {
        TransferFunction::rational(vec![0.0, 1.0], vec![1.0, -0.9]).unwrap()
    }

    #[test]
    fn h2_examples() {
        let g = grid(4096);
        let one = TransferFunction::scalar_fir(&[1.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert_relative_eq!(h2_norm_sq(&one), 1.0, epsilon = 1e-14);
        let s = s_example().evaluate_on_grid(g).unwrap();
        assert!((h2_norm_sq(&s) - 1.0 / 0.19).abs() < 1e-6);
        let d = TransferFunction::delay(5).evaluate_on_grid(g).unwrap();
        assert_relative_eq!(h2_norm_sq(&d), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn l1_examples() {
        let g = grid(4096);
        let c = TransferFunction::scalar_fir(&[-2.5]).unwrap().evaluate_on_grid(g).unwrap();
        assert_relative_eq!(l1_norm(&c), 2.5, epsilon = 1e-14);
        let diag = TransferFunction::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]))
            .unwrap()
            .evaluate_on_grid(g)
            .unwrap();
        assert_relative_eq!(l1_norm(&diag), 3.0, epsilon = 1e-12);
        // |1 + e^{-iw}| = 2|cos(w/2)|, mean over the circle is 4/pi.
        let f = TransferFunction::scalar_fir(&[1.0, 1.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert!((l1_norm(&f) - 4.0 / std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn projection_examples() {
        let g = grid(64);
        // z^{+1} sits at index n-1
        let mut c = vec![Complex64::new(0.0, 0.0); 64];
        c[63] = Complex64::new(1.0, 0.0);
        let z = GridSamples::from_coefficients(g, 1, 1, c.clone()).unwrap();
        assert!(causal_projection(&z).max_abs() < 1e-14);

        let d3 = TransferFunction::delay(3).evaluate_on_grid(g).unwrap();
        assert!(causal_projection(&d3).max_distance(&d3) < 1e-13);

        c[0] = Complex64::new(1.0, 0.0);
        c[1] = Complex64::new(1.0, 0.0);
        let sym = GridSamples::from_coefficients(g, 1, 1, c).unwrap();
        let expect = TransferFunction::scalar_fir(&[1.0, 1.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert!(causal_projection(&sym).max_distance(&expect) < 1e-13);
    }

    #[test]
    fn fir_truncation_roundtrip() {
        let g = grid(64);
        let f = TransferFunction::scalar_fir(&[1.0, -0.5, 0.25]).unwrap();
        let (t, dropped) = fir_truncation(&f.evaluate_on_grid(g).unwrap(), 5);
        assert!(dropped < 1e-28);
        assert!(t.evaluate_on_grid(g).unwrap().max_distance(&f.evaluate_on_grid(g).unwrap()) < 1e-14);
        let (_, dropped) = fir_truncation(&f.evaluate_on_grid(g).unwrap(), 1);
        assert!((dropped - 0.3125 / 1.3125).abs() < 1e-12);
    }

    #[test]
    fn adjoint_examples() {
        let g = grid(32);
        let zinv = TransferFunction::delay(1).evaluate_on_grid(g).unwrap();
        let adj = adjoint(&zinv);
        let mut c = vec![Complex64::new(0.0, 0.0); 32];
        c[31] = Complex64::new(1.0, 0.0);
        let zplus = GridSamples::from_coefficients(g, 1, 1, c).unwrap();
        assert!(adj.max_distance(&zplus) < 1e-14);
        let m = TransferFunction::fir(vec![
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            DMatrix::from_row_slice(2, 3, &[0.5, -1.0, 0.0, 2.0, 1.0, -3.0]),
        ])
        .unwrap()
        .evaluate_on_grid(g)
        .unwrap();
        assert_eq!(adjoint(&adjoint(&m)), m);
        let k = TransferFunction::scalar_fir(&[0.7]).unwrap().evaluate_on_grid(g).unwrap();
        assert_eq!(adjoint(&k), k);
    }

    #[test]
    fn aliasing_fraction_flags_long_responses() {
        let g = grid(64);
        let slow = TransferFunction::rational(vec![1.0], vec![1.0, -0.99]).unwrap().evaluate_on_grid(g).unwrap();
        let (_, tail) = causal_projection_checked(&slow);
        assert!(tail > ALIASING_TOLERANCE);
        let fast = TransferFunction::rational(vec![1.0], vec![1.0, -0.1]).unwrap().evaluate_on_grid(g).unwrap();
        let (_, tail) = causal_projection_checked(&fast);
        assert!(tail < ALIASING_TOLERANCE);
    }

    fn taps_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, 1..20)
    }

    proptest! {
        #[test]
        fn parseval(taps in taps_strategy()) {
            let g = grid(64);
            let x = TransferFunction::scalar_fir(&taps).unwrap().evaluate_on_grid(g).unwrap();
            let direct: f64 = taps.iter().map(|t| t * t).sum();
            prop_assert!((h2_norm_sq(&x) - direct).abs() <= 1e-10 * direct.max(1e-300));
        }

        #[test]
        fn l1_bounded_by_h2(taps in taps_strategy()) {
            let g = grid(128);
            let x = TransferFunction::scalar_fir(&taps).unwrap().evaluate_on_grid(g).unwrap();
            prop_assert!(l1_norm(&x).powi(2) <= h2_norm_sq(&x) * (1.0 + 1e-12) + 1e-15);
        }

        #[test]
        fn projection_idempotent_and_contractive(coeffs in prop::collection::vec(-1.0f64..1.0, 64)) {
            let g = grid(64);
            let c: Vec<Complex64> = coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let x = GridSamples::from_coefficients(g, 1, 1, c).unwrap();
            let (p, _) = causal_projection_checked(&x);
            let (pp, _) = causal_projection_checked(&p);
            prop_assert!(pp.max_distance(&p) < 1e-12);
            prop_assert!(h2_norm_sq(&p) <= h2_norm_sq(&x) + 1e-12);
            // real coefficients in, conjugate-symmetric samples out
            prop_assert!(x.is_conjugate_symmetric(1e-12));
            prop_assert!(p.is_conjugate_symmetric(1e-12));
            prop_assert!(adjoint(&x).is_conjugate_symmetric(1e-12));
        }
    }
}
