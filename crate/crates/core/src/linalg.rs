//! Small dense helpers on complex matrices.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMatrix = DMatrix<Complex64>;

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Thin SVD with singular values sorted descending.
/// Returns `(u, sigma, v)` with `m = u * diag(sigma) * v^*`.
pub fn svd_sorted(m: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let (r, cc) = m.shape();
    if r == 1 && cc == 1 {
        let x = m[(0, 0)];
        let a = x.norm();
        let u = if a > 0.0 { x / a } else { c(1.0) };
        return (
            CMatrix::from_element(1, 1, u),
            vec![a],
            CMatrix::from_element(1, 1, c(1.0)),
        );
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap_or(std::cmp::Ordering::Equal));
    let k = sv.len();
    let mut us = CMatrix::zeros(r, k);
    let mut vs = CMatrix::zeros(cc, k);
    let mut ss = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v_t.row(src).adjoint());
        ss.push(sv[src]);
    }
    (us, ss, vs)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].norm()];
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

pub fn nuclear_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|v| v.norm_sqr()).sum()
}

/// Eigenvalues of a Hermitian matrix (ascending).
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 1 {
        return vec![m[(0, 0)].re];
    }
    let h = hermitian_part(m);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5)
}

/// Lower-triangular Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(m: &CMatrix) -> Option<CMatrix> {
    hermitian_part(m).cholesky().map(|ch| ch.l())
}

/// `U diag(f(sigma)) V^*` applied to the singular values of `m`.
pub fn map_singular_values(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (u, s, v) = svd_sorted(m);
    let d = DVector::from_iterator(s.len(), s.iter().map(|&x| c(f(x))));
    &u * CMatrix::from_diagonal(&d) * v.adjoint()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let m = CMatrix::from_row_slice(
            2,
            3,
            &[c(1.0), Complex64::new(0.0, 2.0), c(-1.0), c(0.5), c(3.0), Complex64::new(1.0, 1.0)],
        );
        let (u, s, v) = svd_sorted(&m);
        assert!(s[0] >= s[1]);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(2, s.iter().map(|&x| c(x))));
        let rec = &u * d * v.adjoint();
        assert!((rec - m).norm() < 1e-12);
    }

    #[test]
    fn cholesky_of_spd() {
        let a = CMatrix::from_row_slice(2, 2, &[c(4.0), c(2.0), c(2.0), c(3.0)]);
        let l = cholesky_lower(&a).unwrap();
        assert!((&l * l.adjoint() - &a).norm() < 1e-12);
        assert_eq!(l[(0, 1)], c(0.0));
    }
}
