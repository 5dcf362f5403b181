//! Spectral factorization (scalar cepstral, matrix Wilson), inner-outer
//! factorization and per-frequency SVD on the grid.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::dft;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::tf_core::{FrequencyGrid, GridSamples};

/// Hermitian tolerance for density samples.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Smallest admissible min/max ratio for a scalar density.
pub const MIN_DENSITY_RATIO: f64 = 1e-10;
pub const DEFAULT_TOL_RANK: f64 = 1e-8;
/// Below this, `log_sigma_diagnostic` signals near rank loss.
pub const LOG_SIGMA_WARNING: f64 = -30.0;

/// Hermitian positive semidefinite samples with a verified floor.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    samples: GridSamples,
    floor: f64,
}

impl SpectralDensity {
    /// Validates Hermitian symmetry and, when `floor > 0`, that the smallest
    /// eigenvalue stays at or above `floor` on the whole grid.
    pub fn new(samples: GridSamples, floor: f64) -> Result<Self> {
        if samples.rows() != samples.cols() {
            return Err(Error::DimensionMismatch("spectral density must be square".into()));
        }
        for k in 0..samples.len() {
            let m = samples.matrix(k);
            let scale = m.norm().max(1.0);
            if (&m - m.adjoint()).norm() > HERMITIAN_TOL * scale {
                return Err(Error::InvalidProblem(format!("density not Hermitian at grid index {k}")));
            }
            if floor > 0.0 {
                let min_eig = linalg::hermitian_eigenvalues(&m)[0];
                if min_eig < floor {
                    return Err(Error::IllConditionedDensity { min: min_eig, max: f64::NAN });
                }
            }
        }
        Ok(Self { samples, floor })
    }

    /// Builds `X X^*` pointwise; Hermitian by construction.
    pub fn gram(x: &GridSamples) -> Self {
        let adj = crate::tf_core::adjoint(x);
        let mut s = x.mul(&adj);
        hermitize(&mut s);
        Self { samples: s, floor: 0.0 }
    }

    pub fn samples(&self) -> &GridSamples {
        &self.samples
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn dim(&self) -> usize {
        self.samples.rows()
    }

    /// Smallest eigenvalue over the grid.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.samples.is_scalar() {
            return self.samples.data().iter().map(|v| v.re).fold(f64::INFINITY, f64::min);
        }
        self.samples
            .matrices()
            .map(|m| linalg::hermitian_eigenvalues(&m)[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        if self.samples.is_scalar() {
            return self.samples.data().iter().map(|v| v.re).fold(f64::NEG_INFINITY, f64::max);
        }
        self.samples
            .matrices()
            .map(|m| *linalg::hermitian_eigenvalues(&m).last().unwrap())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn hermitize(s: &mut GridSamples) {
    if s.is_scalar() {
        for v in s.data_mut() {
            *v = c(v.re);
        }
        return;
    }
    for k in 0..s.len() {
        let m = linalg::hermitian_part(&s.matrix(k));
        s.set_matrix(k, &m);
    }
}

/// Outer function with prescribed `log|H|` on the grid (cepstral method).
/// The constant term `exp(mean log|H|)` is real positive.
pub(crate) fn cepstral_outer(grid: FrequencyGrid, log_modulus: &[f64]) -> Vec<Complex64> {
    let n = grid.n_points();
    let mut cep: Vec<Complex64> = log_modulus.iter().map(|&v| c(v)).collect();
    dft::inverse(&mut cep);
    // log|H| = Re(log H); log H keeps the causal half at double weight
    for (j, v) in cep.iter_mut().enumerate() {
        if j == 0 || j == n / 2 {
            // unchanged: Re part already carries full weight at these indices
        } else if j < n / 2 {
            *v *= 2.0;
        } else {
            *v = c(0.0);
        }
    }
    dft::forward(&mut cep);
    cep.into_iter().map(|v| v.exp()).collect()
}

/// Outer (minimum-phase) `H` with `|H|^2 = phi` on the grid.
pub fn scalar_spectral_factor(phi: &SpectralDensity) -> Result<GridSamples> {
    let s = phi.samples();
    if !s.is_scalar() {
        return Err(Error::DimensionMismatch("scalar factorization of a matrix density".into()));
    }
    let vals: Vec<f64> = s.data().iter().map(|v| v.re).collect();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) || min / max < MIN_DENSITY_RATIO {
        return Err(Error::IllConditionedDensity { min, max });
    }
    let log_mod: Vec<f64> = vals.iter().map(|v| 0.5 * v.ln()).collect();
    GridSamples::from_scalars(s.grid(), cepstral_outer(s.grid(), &log_mod))
}

#[derive(Debug, Clone, Copy)]
pub struct WilsonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for WilsonOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct WilsonFactor {
    pub factor: GridSamples,
    pub iterations: usize,
    /// `||H H^* - phi|| / ||phi||` in grid-wise Frobenius norm.
    pub residual: f64,
    /// `(1/2) int log det phi - log|det H(infinity)|`; zero for an outer factor.
    pub outer_defect: f64,
}

/// Causal `H` with `H H^* = phi`, via Wilson's Newton iteration.
pub fn matrix_spectral_factor(phi: &SpectralDensity) -> Result<GridSamples> {
    matrix_spectral_factor_with(phi, WilsonOptions::default()).map(|f| f.factor)
}

pub fn matrix_spectral_factor_with(phi: &SpectralDensity, opts: WilsonOptions) -> Result<WilsonFactor> {
    let s = phi.samples();
    let grid = s.grid();
    let n = grid.n_points();
    let m = s.rows();
    let block = m * m;

    let mut gamma0 = CMatrix::zeros(m, m);
    for k in 0..n {
        gamma0 += s.matrix(k);
    }
    gamma0 /= c(n as f64);
    let l0 = linalg::cholesky_lower(&gamma0)
        .ok_or_else(|| Error::InvalidProblem("density mean is not positive definite".into()))?;
    let mut h = GridSamples::constant(grid, &l0);

    let phi_norm = s.data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let residual_of = |h: &GridSamples| -> f64 {
        let hh = h.mul(&crate::tf_core::adjoint(h));
        hh.sub(s).data().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / phi_norm
    };

    let eye = CMatrix::identity(m, m);
    let mut residual = residual_of(&h);
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        let mut g = GridSamples::zeros(grid, m, m);
        for k in 0..n {
            let hk = h.matrix(k);
            let hinv = hk
                .try_inverse()
                .ok_or(Error::SingularEvaluation { index: k, magnitude: 0.0 })?;
            let gk = &hinv * s.matrix(k) * hinv.adjoint() + &eye;
            g.set_matrix(k, &linalg::hermitian_part(&gk));
        }
        let mut coeffs = g.coefficients();
        for j in 0..n {
            let blk = &mut coeffs[j * block..(j + 1) * block];
            if j == 0 {
                for a in 0..m {
                    for b in 0..m {
                        if b > a {
                            blk[a * m + b] = c(0.0);
                        } else if a == b {
                            blk[a * m + b] = c(0.5 * blk[a * m + b].re);
                        }
                    }
                }
            } else if j >= n / 2 {
                blk.iter_mut().for_each(|v| *v = c(0.0));
            }
        }
        let plus = GridSamples::from_coefficients(grid, m, m, coeffs)?;
        h = h.mul(&plus);
        iterations += 1;
        residual = residual_of(&h);
        if !residual.is_finite() {
            break;
        }
    }
    if !(residual <= opts.tol) {
        return Err(Error::NonConvergence {
            what: "Wilson spectral factorization",
            iterations,
            residual,
        });
    }

    // constant term of H and the log-det integral of phi
    let coeffs = h.coefficients();
    let h0 = CMatrix::from_row_slice(m, m, &coeffs[0..block]);
    let mean_logdet: f64 = s
        .matrices()
        .map(|mk| linalg::hermitian_eigenvalues(&mk).iter().map(|e| e.ln()).sum::<f64>())
        .sum::<f64>()
        / n as f64;
    let outer_defect = 0.5 * mean_logdet - h0.determinant().norm().ln();
    Ok(WilsonFactor {
        factor: h,
        iterations,
        residual,
        outer_defect,
    })
}

/// `K = K_i K_o` with `K_i^* K_i = I` and `K_o` outer.
#[derive(Debug, Clone)]
pub struct InnerOuterPair {
    pub inner: GridSamples,
    pub outer: GridSamples,
    pub rank: usize,
}

fn check_rank(k: &GridSamples, tol_rank: f64) -> Result<()> {
    for idx in 0..k.len() {
        let sv = linalg::singular_values(&k.matrix(idx));
        let max = sv[0];
        let min = *sv.last().unwrap();
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if ratio < tol_rank {
            return Err(Error::RankDeficient { index: idx, ratio });
        }
    }
    Ok(())
}

/// Inner-outer factorization of a full-column-rank `K` (`n_s <= n_e`).
///
/// Scalar `K`: the outer factor has `log|K_o| = log|K|` (cepstral), so
/// `|K_i| = 1` exactly on the grid. Matrix `K`: `K_o` is the outer factor with
/// `K_o^* K_o = K^* K`, obtained by factoring the transposed density, and
/// `K_i = K K_o^{-1}`.
pub fn inner_outer_factorize(k: &GridSamples, tol_rank: f64) -> Result<InnerOuterPair> {
    check_rank(k, tol_rank)?;
    let grid = k.grid();
    if k.is_scalar() {
        let log_mod: Vec<f64> = k.data().iter().map(|v| v.norm().ln()).collect();
        let outer = GridSamples::from_scalars(grid, cepstral_outer(grid, &log_mod))?;
        let inner = GridSamples::from_scalars(
            grid,
            k.data().iter().zip(outer.data()).map(|(a, b)| a / b).collect(),
        )?;
        return Ok(InnerOuterPair { inner, outer, rank: 1 });
    }
    if k.cols() > k.rows() {
        return Err(Error::InvalidProblem(
            "inner-outer factorization needs full column rank (cols <= rows)".into(),
        ));
    }
    // K^T conj(K) is the transpose of K^* K; its causal factor F gives K_o = F^T.
    let gram_t = SpectralDensity::gram(&k.transpose());
    let f = matrix_spectral_factor(&gram_t)?;
    let outer = f.transpose();
    let inner = k.mul(&outer.inverse()?);
    Ok(InnerOuterPair {
        inner,
        outer,
        rank: k.cols(),
    })
}

/// Per-frequency thin SVD `X = U Sigma V^*`.
#[derive(Debug, Clone)]
pub struct GridSvd {
    pub u: GridSamples,
    /// Diagonal `r x r`, entries descending.
    pub sigma: GridSamples,
    pub v: GridSamples,
}

impl GridSvd {
    /// Singular values at grid index `k`.
    pub fn singular_values(&self, k: usize) -> Vec<f64> {
        let r = self.sigma.rows();
        (0..r).map(|i| self.sigma.entry(k, i, i).re).collect()
    }

    pub fn rank(&self) -> usize {
        self.sigma.rows()
    }
}

/// SVD at every grid point; each column of `V` is rotated so its first
/// nonzero entry is real and nonnegative.
pub fn svd_on_grid(x: &GridSamples) -> GridSvd {
    let grid = x.grid();
    let r = x.rows().min(x.cols());
    let mut u = GridSamples::zeros(grid, x.rows(), r);
    let mut sigma = GridSamples::zeros(grid, r, r);
    let mut v = GridSamples::zeros(grid, x.cols(), r);
    for k in 0..x.len() {
        let (mut uk, sk, mut vk) = linalg::svd_sorted(&x.matrix(k));
        for j in 0..r {
            let scale = vk.column(j).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if let Some(first) = vk.column(j).iter().find(|z| z.norm() > 1e-12 * scale).copied() {
                let rot = (first / first.norm()).conj();
                for i in 0..vk.nrows() {
                    vk[(i, j)] *= rot;
                }
                for i in 0..uk.nrows() {
                    uk[(i, j)] *= rot;
                }
            }
        }
        u.set_matrix(k, &uk);
        let d = CMatrix::from_diagonal(&DVector::from_iterator(r, sk.iter().map(|&s| c(s))));
        sigma.set_matrix(k, &d);
        v.set_matrix(k, &vk);
    }
    GridSvd { u, sigma, v }
}

/// `min_k int log sigma_k dw/2pi`; `-inf` if some singular value vanishes.
pub fn log_sigma_diagnostic(svd: &GridSvd) -> f64 {
    let r = svd.rank();
    let n = svd.sigma.len();
    let w = svd.sigma.grid().weight();
    let mut integrals = vec![0.0; r];
    for k in 0..n {
        for (i, s) in svd.singular_values(k).into_iter().enumerate() {
            if s == 0.0 {
                log::warn!("log-sigma diagnostic: singular value {i} vanishes at grid index {k}");
                return f64::NEG_INFINITY;
            }
            integrals[i] += w * s.ln();
        }
    }
    let out = integrals.into_iter().fold(f64::INFINITY, f64::min);
    if out < LOG_SIGMA_WARNING {
        log::warn!("log-sigma diagnostic {out:.2}: factor is close to losing rank");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tf_core::{anticausal_energy_fraction, TransferFunction};
    use nalgebra::DMatrix;

    fn grid(n: usize) -> FrequencyGrid {
        FrequencyGrid::new(n).unwrap()
    }

    fn scalar_density(g: FrequencyGrid, f: impl Fn(f64) -> f64) -> SpectralDensity {
        let vals = g.angles().map(|w| c(f(w))).collect();
        SpectralDensity::new(GridSamples::from_scalars(g, vals).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn constant_density_factor() {
        let g = grid(256);
        let h = scalar_spectral_factor(&scalar_density(g, |_| 4.0)).unwrap();
        for v in h.data() {
            assert!((v - c(2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn first_order_density_factor() {
        // 1.25 + cos w = |1 + 0.5 e^{-iw}|^2
        let g = grid(512);
        let h = scalar_spectral_factor(&scalar_density(g, |w| 1.25 + w.cos())).unwrap();
        let expect = TransferFunction::scalar_fir(&[1.0, 0.5]).unwrap().evaluate_on_grid(g).unwrap();
        assert!(h.max_distance(&expect) < 1e-8);
    }

    #[test]
    fn ill_conditioned_density_rejected() {
        let g = grid(64);
        let vals = g.angles().map(|w| c(if w < 1.0 { 0.0 } else { 1.0 })).collect();
        let d = SpectralDensity::new(GridSamples::from_scalars(g, vals).unwrap(), 0.0).unwrap();
        assert!(matches!(scalar_spectral_factor(&d), Err(Error::IllConditionedDensity { .. })));
    }

    #[test]
    fn floor_is_enforced() {
        let g = grid(64);
        let vals = g.angles().map(|w| c(1.0 + w.cos())).collect();
        assert!(SpectralDensity::new(GridSamples::from_scalars(g, vals).unwrap(), 0.1).is_err());
    }

    #[test]
    fn wilson_identity_and_cholesky() {
        let g = grid(64);
        let eye = SpectralDensity::new(GridSamples::identity(g, 2), 0.5).unwrap();
        let h = matrix_spectral_factor(&eye).unwrap();
        assert!(h.max_distance(&GridSamples::identity(g, 2)) < 1e-12);

        let a = CMatrix::from_row_slice(2, 2, &[c(4.0), c(1.0), c(1.0), c(2.0)]);
        let d = SpectralDensity::new(GridSamples::constant(g, &a), 0.0).unwrap();
        let h = matrix_spectral_factor(&d).unwrap();
        let l = linalg::cholesky_lower(&a).unwrap();
        assert!(h.max_distance(&GridSamples::constant(g, &l)) < 1e-10);
    }

    #[test]
    fn wilson_diagonal_density() {
        let g = grid(512);
        let samples = GridSamples::from_fn(g, 2, 2, |k| {
            let w = g.angle(k);
            CMatrix::from_row_slice(2, 2, &[c(1.25 + w.cos()), c(0.0), c(0.0), c(4.0)])
        });
        let d = SpectralDensity::new(samples, 0.0).unwrap();
        let f = matrix_spectral_factor_with(&d, WilsonOptions::default()).unwrap();
        let expect = TransferFunction::diagonal(vec![
            TransferFunction::scalar_fir(&[1.0, 0.5]).unwrap(),
            TransferFunction::scalar_fir(&[2.0]).unwrap(),
        ])
        .unwrap()
        .evaluate_on_grid(g)
        .unwrap();
        assert!(f.factor.max_distance(&expect) < 1e-6, "{}", f.factor.max_distance(&expect));
        assert!(f.outer_defect.abs() < 1e-8);
    }

    #[test]
    fn wilson_nonconvergence_reported() {
        let g = grid(256);
        let samples = GridSamples::from_fn(g, 2, 2, |k| {
            let w = g.angle(k);
            CMatrix::from_row_slice(2, 2, &[c(2.0 + w.cos()), c(0.3), c(0.3), c(1.5 - 0.5 * w.sin().powi(2))])
        });
        let d = SpectralDensity::new(samples, 0.0).unwrap();
        let err = matrix_spectral_factor_with(&d, WilsonOptions { tol: 1e-14, max_iter: 1 }).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn inner_outer_examples() {
        let g = grid(1024);
        let delay = TransferFunction::delay(1).evaluate_on_grid(g).unwrap();
        let io = inner_outer_factorize(&delay, DEFAULT_TOL_RANK).unwrap();
        assert!(io.inner.max_distance(&delay) < 1e-10);
        assert!(io.outer.max_distance(&GridSamples::identity(g, 1)) < 1e-10);

        let k = TransferFunction::scalar_fir(&[1.0, -2.0]).unwrap().evaluate_on_grid(g).unwrap();
        let io = inner_outer_factorize(&k, DEFAULT_TOL_RANK).unwrap();
        let ko = TransferFunction::scalar_fir(&[2.0, -1.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert!(io.outer.max_distance(&ko) < 1e-10);
        for v in io.inner.data() {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }

        let mp = TransferFunction::scalar_fir(&[1.0, 0.3, -0.2]).unwrap().evaluate_on_grid(g).unwrap();
        let io = inner_outer_factorize(&mp, DEFAULT_TOL_RANK).unwrap();
        assert!(io.outer.max_distance(&mp) < 1e-10);
        assert!(io.inner.max_distance(&GridSamples::identity(g, 1)) < 1e-10);
    }

    #[test]
    fn inner_outer_rank_deficiency() {
        let g = grid(64);
        let k = TransferFunction::scalar_fir(&[1.0, 1.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert!(matches!(inner_outer_factorize(&k, DEFAULT_TOL_RANK), Err(Error::RankDeficient { index: 32, .. })));
    }

    #[test]
    fn inner_outer_matrix() {
        let g = grid(512);
        // [[1, 0.5 z^-1], [z^-1, 2 - z^-1]] has a zero outside? use generic taps
        let k = TransferFunction::fir(vec![
            DMatrix::from_row_slice(3, 2, &[1.0, 0.2, 0.0, 1.0, 0.3, 0.1]),
            DMatrix::from_row_slice(3, 2, &[-1.5, 0.0, 0.4, 0.2, 0.0, -0.7]),
        ])
        .unwrap()
        .evaluate_on_grid(g)
        .unwrap();
        let io = inner_outer_factorize(&k, DEFAULT_TOL_RANK).unwrap();
        assert_eq!(io.rank, 2);
        let ii = crate::tf_core::adjoint(&io.inner).mul(&io.inner);
        assert!(ii.max_distance(&GridSamples::identity(g, 2)) < 1e-6);
        assert!(io.inner.mul(&io.outer).max_distance(&k) < 1e-6);
        assert!(anticausal_energy_fraction(&io.outer) < 1e-10);
        assert!(anticausal_energy_fraction(&io.inner) < 1e-10);
    }

    #[test]
    fn svd_examples() {
        let g = grid(16);
        let x = TransferFunction::scalar_fir(&[0.3, -1.0]).unwrap().evaluate_on_grid(g).unwrap();
        let s = svd_on_grid(&x);
        for k in 0..16 {
            let v = x.scalar(k);
            assert!((s.sigma.scalar(k).re - v.norm()).abs() < 1e-14);
            assert!((s.u.scalar(k) - v / v.norm()).norm() < 1e-14);
            assert!((s.v.scalar(k) - c(1.0)).norm() < 1e-14);
        }
        let d = TransferFunction::constant(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 3.0]))
            .unwrap()
            .evaluate_on_grid(g)
            .unwrap();
        let s = svd_on_grid(&d);
        assert_eq!(s.singular_values(3), vec![3.0, 1.0]);
        let p = CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!((s.u.matrix(0) - &p).norm() < 1e-12);
        assert!((s.v.matrix(0) - &p).norm() < 1e-12);
    }

    #[test]
    fn log_sigma_examples() {
        let g = grid(4096);
        assert!(log_sigma_diagnostic(&svd_on_grid(&GridSamples::identity(g, 2))).abs() < 1e-14);
        let ci = GridSamples::constant(g, &(CMatrix::identity(2, 2) * c(3.0)));
        assert!((log_sigma_diagnostic(&svd_on_grid(&ci)) - 3f64.ln()).abs() < 1e-12);
        let k = TransferFunction::scalar_fir(&[1.0, -2.0]).unwrap().evaluate_on_grid(g).unwrap();
        assert!((log_sigma_diagnostic(&svd_on_grid(&k)) - 2f64.ln()).abs() < 1e-10);
        let z = GridSamples::zeros(g, 1, 1);
        assert_eq!(log_sigma_diagnostic(&svd_on_grid(&z)), f64::NEG_INFINITY);
    }
}
