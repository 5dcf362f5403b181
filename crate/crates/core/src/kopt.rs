//! The reduced convex problem: minimize
//! `psi(X) = ||R - X||_2^2 + (1/snr) ||X N||_1^2` over causal real FIR `X`,
//! with `X = W K H`, and the certificates attached to its solution.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::dft;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix};
use crate::spectral::{self, SpectralDensity};
use crate::tf_core::{
    adjoint, causal_projection, fir_projection, h2_norm_sq, FrequencyGrid, GridSamples, TransferFunction,
};

pub const DEFAULT_FIR_ORDER: usize = 60;
/// `S S^* + M M^*` must keep its smallest eigenvalue above this share of the largest.
pub const COERCIVITY_RATIO: f64 = 1e-10;
/// Below this modulus the Euler-Lagrange certificate is not evaluated.
pub const EL_MIN_MODULUS: f64 = 1e-10;

/// A complete design problem.
///
/// Shapes: `S` is `n_s x q_s`, `M` is `n_s x q_m`, `P` is `n_e x n_s`,
/// `W` is `n_e x n_e` and `N` is `n_t x n_t`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub s: TransferFunction,
    pub m: TransferFunction,
    pub n: TransferFunction,
    pub w: TransferFunction,
    pub p: TransferFunction,
    /// Channel power over unit noise variance.
    pub snr: f64,
    pub n_t: usize,
    pub grid: FrequencyGrid,
    pub fir_order: usize,
}

impl ProblemSpec {
    /// Scalar problem with `N = W = 1`, default grid and FIR order.
    pub fn scalar(s: TransferFunction, m: TransferFunction, p: TransferFunction, snr: f64) -> Self {
        Self {
            s,
            m,
            n: TransferFunction::identity(1),
            w: TransferFunction::identity(1),
            p,
            snr,
            n_t: 1,
            grid: FrequencyGrid::default(),
            fir_order: DEFAULT_FIR_ORDER,
        }
    }

    pub fn with_grid(mut self, grid: FrequencyGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_fir_order(mut self, fir_order: usize) -> Self {
        self.fir_order = fir_order;
        self
    }

    pub fn with_snr(mut self, snr: f64) -> Self {
        self.snr = snr;
        self
    }

    pub fn n_s(&self) -> usize {
        self.s.rows()
    }

    pub fn n_e(&self) -> usize {
        self.p.rows()
    }

    pub fn is_scalar(&self) -> bool {
        self.n_s() == 1 && self.n_e() == 1 && self.n_t == 1
    }

    /// Shape, positivity and invertibility checks that do not need the grid.
    pub fn validate_structure(&self) -> Result<()> {
        if !(self.snr > 0.0) || !self.snr.is_finite() {
            return Err(Error::InvalidProblem(format!("snr must be positive (got {})", self.snr)));
        }
        if self.fir_order == 0 {
            return Err(Error::InvalidProblem("fir_order must be at least 1".into()));
        }
        if self.grid.n_points() < 2 * self.fir_order {
            return Err(Error::InvalidGrid(format!(
                "{} grid points cannot resolve {} FIR taps",
                self.grid.n_points(),
                self.fir_order
            )));
        }
        for (name, tf) in [("S", &self.s), ("M", &self.m), ("N", &self.n), ("W", &self.w), ("P", &self.p)] {
            tf.validate()
                .map_err(|e| Error::InvalidProblem(format!("{name}: {e}")))?;
        }
        let (n_s, n_e) = (self.n_s(), self.n_e());
        if self.m.rows() != n_s {
            return Err(Error::DimensionMismatch(format!("M has {} rows, S has {n_s}", self.m.rows())));
        }
        if self.p.cols() != n_s {
            return Err(Error::DimensionMismatch(format!("P has {} columns, expected {n_s}", self.p.cols())));
        }
        if self.w.rows() != n_e || self.w.cols() != n_e {
            return Err(Error::DimensionMismatch(format!("W must be {n_e}x{n_e}")));
        }
        if self.n_t == 0 || self.n.rows() != self.n_t || self.n.cols() != self.n_t {
            return Err(Error::DimensionMismatch(format!("N must be n_t x n_t with n_t = {}", self.n_t)));
        }
        if self.is_scalar() {
            if !self.n.is_invertible_in_h_infinity() {
                return Err(Error::InvalidProblem("N must be invertible in H-infinity".into()));
            }
            if !self.w.is_invertible_in_h_infinity() {
                return Err(Error::InvalidProblem("W must be invertible in H-infinity".into()));
            }
        } else {
            if !self.n.is_identity() || !self.w.is_identity() {
                return Err(Error::InvalidProblem("vector problems require N = W = I".into()));
            }
            if self.n_t < n_s.min(n_e) {
                return Err(Error::InvalidProblem(format!(
                    "n_t = {} is below min(n_s, n_e) = {}",
                    self.n_t,
                    n_s.min(n_e)
                )));
            }
        }
        Ok(())
    }

    /// Validates and evaluates every system on the grid.
    pub fn sample(&self) -> Result<SampledSpec> {
        self.validate_structure()?;
        let g = self.grid;
        let s = self.s.evaluate_on_grid(g)?;
        let m = self.m.evaluate_on_grid(g)?;
        let sm = hconcat(&s, &m);
        let phi = SpectralDensity::gram(&sm);
        let (min, max) = (phi.min_eigenvalue(), phi.max_eigenvalue());
        if !(min > 0.0) || min < COERCIVITY_RATIO * max {
            return Err(Error::InvalidProblem(format!(
                "S S^* + M M^* is not bounded away from zero on the grid (min {min:.3e}, max {max:.3e})"
            )));
        }
        Ok(SampledSpec {
            s,
            m,
            n: self.n.evaluate_on_grid(g)?,
            w: self.w.evaluate_on_grid(g)?,
            p: self.p.evaluate_on_grid(g)?,
            sm,
            phi,
            snr: self.snr,
            scalar: self.is_scalar(),
        })
    }
}

/// A problem evaluated on its grid.
#[derive(Debug, Clone)]
pub struct SampledSpec {
    pub s: GridSamples,
    pub m: GridSamples,
    pub n: GridSamples,
    pub w: GridSamples,
    pub p: GridSamples,
    /// `[S M]`.
    pub sm: GridSamples,
    pub phi: SpectralDensity,
    pub snr: f64,
    pub scalar: bool,
}

impl SampledSpec {
    /// `|N|` per frequency in the scalar case, ones otherwise.
    pub fn noise_weights(&self) -> Vec<f64> {
        if self.scalar {
            self.n.data().iter().map(|v| v.norm()).collect()
        } else {
            vec![1.0; self.n.len()]
        }
    }
}

pub(crate) fn hconcat(a: &GridSamples, b: &GridSamples) -> GridSamples {
    let (r, ca, cb) = (a.rows(), a.cols(), b.cols());
    GridSamples::from_fn(a.grid(), r, ca + cb, |k| {
        let mut out = CMatrix::zeros(r, ca + cb);
        out.view_mut((0, 0), (r, ca)).copy_from(&a.matrix(k));
        out.view_mut((0, ca), (r, cb)).copy_from(&b.matrix(k));
        out
    })
}

/// `R`, `H` and the constant `eta` of the reduced problem.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    /// `R = W P S S^* H^{-*}`.
    pub r: GridSamples,
    /// Channel noise filter `N`.
    pub n: GridSamples,
    /// Outer factor with `H H^* = S S^* + M M^*`.
    pub h: GridSamples,
    pub w: GridSamples,
    /// `||W P S||^2 - ||R||^2`; distortion is `psi + eta`.
    pub eta: f64,
    pub sigma_sq: f64,
    /// Per-frequency weights of the nuclear-norm term (`|N|`, or ones).
    pub nu: Vec<f64>,
    pub scalar: bool,
}

impl ReducedProblem {
    pub fn grid(&self) -> FrequencyGrid {
        self.r.grid()
    }

    /// `K = W^{-1} X H^{-1}` on the grid.
    pub fn recover_k(&self, x: &GridSamples) -> Result<GridSamples> {
        Ok(self.w.inverse()?.mul(x).mul(&self.h.inverse()?))
    }

    /// `X = W K H` on the grid.
    pub fn x_of_k(&self, k: &GridSamples) -> GridSamples {
        self.w.mul(k).mul(&self.h)
    }
}

pub fn reduce(spec: &ProblemSpec) -> Result<ReducedProblem> {
    reduce_sampled(&spec.sample()?)
}

pub fn reduce_sampled(ss: &SampledSpec) -> Result<ReducedProblem> {
    let h = if ss.phi.dim() == 1 {
        spectral::scalar_spectral_factor(&ss.phi)?
    } else {
        spectral::matrix_spectral_factor(&ss.phi)?
    };
    let wps = ss.w.mul(&ss.p).mul(&ss.s);
    let r = wps.mul(&adjoint(&ss.s)).mul(&adjoint(&h).inverse()?);
    let eta = h2_norm_sq(&wps) - h2_norm_sq(&r);
    Ok(ReducedProblem {
        r,
        n: ss.n.clone(),
        h,
        w: ss.w.clone(),
        eta,
        sigma_sq: ss.snr,
        nu: ss.noise_weights(),
        scalar: ss.scalar,
    })
}

fn weighted_nuclear(x: &GridSamples, nu: &[f64]) -> f64 {
    let w = x.grid().weight();
    if x.is_scalar() {
        return x.data().iter().zip(nu).map(|(v, n)| v.norm() * n).sum::<f64>() * w;
    }
    x.matrices().zip(nu).map(|(m, n)| linalg::nuclear_norm(&m) * n).sum::<f64>() * w
}

/// `psi` at grid samples of `X`.
pub fn psi_cost_samples(x: &GridSamples, rp: &ReducedProblem) -> f64 {
    let g = weighted_nuclear(x, &rp.nu);
    h2_norm_sq(&rp.r.sub(x)) + g * g / rp.sigma_sq
}

/// `psi` at the real FIR coefficients `x`.
pub fn psi_cost(x: &[DMatrix<f64>], rp: &ReducedProblem) -> Result<f64> {
    let xs = TransferFunction::fir(x.to_vec())?.evaluate_on_grid(rp.grid())?;
    Ok(psi_cost_samples(&xs, rp))
}

/// `phi(K) = ||W(P-K)S||^2 + ||W K M||^2 + (1/snr) ||W K [S M] N||_1^2`.
pub fn phi_cost(k: &GridSamples, spec: &ProblemSpec) -> Result<f64> {
    Ok(phi_cost_sampled(k, &spec.sample()?))
}

pub fn phi_cost_sampled(k: &GridSamples, ss: &SampledSpec) -> f64 {
    let wk = ss.w.mul(k);
    let t1 = h2_norm_sq(&ss.w.mul(&ss.p.sub(k)).mul(&ss.s));
    let t2 = h2_norm_sq(&wk.mul(&ss.m));
    let g = weighted_nuclear(&wk.mul(&ss.sm), &ss.noise_weights());
    t1 + t2 + g * g / ss.snr
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Target for the relative duality gap `(primal - dual) / primal`.
    pub tol: f64,
    pub max_iter: usize,
    /// Iterations between gap evaluations.
    pub check_every: usize,
    /// Initial primal step; the dual step starts at `1 / tau0`.
    pub tau0: f64,
    /// Reset the step sizes to their initial values every this many
    /// iterations (0 disables).
    pub restart_every: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50_000,
            check_every: 10,
            tau0: 1e4,
            restart_every: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// FIR taps of `X`, each `n_e x n_s`.
    pub x_opt: Vec<DMatrix<f64>>,
    pub x_samples: GridSamples,
    /// Discretized `psi` at `x_opt`.
    pub psi_value: f64,
    /// Best certified lower bound on the minimum of `psi`.
    pub dual_value: f64,
    /// `(psi_value - dual_value) / psi_value`.
    pub gap: f64,
    /// Euler-Lagrange residual over the FIR span (scalar problems only).
    pub el_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveReport {
    pub fn distortion(&self, rp: &ReducedProblem) -> f64 {
        self.psi_value + rp.eta
    }
}

/// Per-frequency SVD kept for soft-thresholding.
enum Factored {
    Scalar(Vec<f64>),
    Matrix(Vec<(CMatrix, Vec<f64>, CMatrix)>),
}

/// Discretized problem in coefficient space. `F` maps real taps to grid
/// samples and is an isometry for the weighted sample inner product.
struct Workspace {
    n: usize,
    rows: usize,
    cols: usize,
    taps: usize,
    weight: f64,
    nu: Vec<f64>,
    rho: Vec<f64>,
    c0: f64,
    alpha: f64,
    sigma_sq: f64,
}

impl Workspace {
    fn new(rp: &ReducedProblem, taps: usize) -> Self {
        let n = rp.r.len();
        let (rows, cols) = (rp.r.rows(), rp.r.cols());
        let b = rows * cols;
        let coeffs = rp.r.coefficients();
        let rho: Vec<f64> = coeffs[..taps * b].iter().map(|v| v.re).collect();
        let c0 = h2_norm_sq(&rp.r) - rho.iter().map(|v| v * v).sum::<f64>();
        Self {
            n,
            rows,
            cols,
            taps,
            weight: 1.0 / n as f64,
            nu: rp.nu.clone(),
            rho,
            c0: c0.max(0.0),
            alpha: 1.0 / rp.sigma_sq,
            sigma_sq: rp.sigma_sq,
        }
    }

    fn block(&self) -> usize {
        self.rows * self.cols
    }

    fn synth(&self, x: &[f64]) -> Vec<Complex64> {
        let (n, b) = (self.n, self.block());
        let mut out = vec![c(0.0); n * b];
        let mut buf = vec![c(0.0); n];
        for e in 0..b {
            buf.iter_mut().for_each(|v| *v = c(0.0));
            for j in 0..self.taps {
                buf[j] = c(x[j * b + e]);
            }
            dft::forward(&mut buf);
            for k in 0..n {
                out[k * b + e] = buf[k];
            }
        }
        out
    }

    fn analyze(&self, y: &[Complex64]) -> Vec<f64> {
        let (n, b) = (self.n, self.block());
        let mut out = vec![0.0; self.taps * b];
        let mut buf = vec![c(0.0); n];
        for e in 0..b {
            for k in 0..n {
                buf[k] = y[k * b + e];
            }
            dft::inverse(&mut buf);
            for j in 0..self.taps {
                out[j * b + e] = buf[j].re;
            }
        }
        out
    }

    fn matrix_at(&self, y: &[Complex64], k: usize) -> CMatrix {
        let b = self.block();
        CMatrix::from_row_slice(self.rows, self.cols, &y[k * b..(k + 1) * b])
    }

    fn factor(&self, u: &[Complex64]) -> Factored {
        if self.block() == 1 {
            Factored::Scalar(u.iter().map(|v| v.norm()).collect())
        } else {
            Factored::Matrix((0..self.n).map(|k| linalg::svd_sorted(&self.matrix_at(u, k))).collect())
        }
    }

    fn g_of(&self, f: &Factored) -> f64 {
        let w = self.weight;
        match f {
            Factored::Scalar(s) => s.iter().zip(&self.nu).map(|(a, n)| a * n).sum::<f64>() * w,
            Factored::Matrix(m) => {
                m.iter().zip(&self.nu).map(|((_, s, _), n)| s.iter().sum::<f64>() * n).sum::<f64>() * w
            }
        }
    }

    /// `max_k ||y_k||_op / nu_k`, the dual norm of `g`.
    fn dual_norm(&self, y: &[Complex64]) -> f64 {
        if self.block() == 1 {
            return y.iter().zip(&self.nu).map(|(v, n)| v.norm() / n).fold(0.0, f64::max);
        }
        (0..self.n)
            .map(|k| linalg::singular_values(&self.matrix_at(y, k))[0] / self.nu[k])
            .fold(0.0, f64::max)
    }

    fn primal(&self, x: &[f64], f: &Factored) -> f64 {
        let g = self.g_of(f);
        x.iter().zip(&self.rho).map(|(a, r)| (a - r).powi(2)).sum::<f64>() + self.c0 + self.alpha * g * g
    }

    /// Dual objective maximized along the ray through `y`.
    fn dual_on_ray(&self, y: &[Complex64]) -> f64 {
        let z = self.analyze(y);
        let a: f64 = z.iter().zip(&self.rho).map(|(p, q)| p * q).sum();
        let d = self.dual_norm(y);
        let b = z.iter().map(|v| v * v).sum::<f64>() / 4.0 + self.sigma_sq / 4.0 * d * d;
        if a <= 0.0 || b <= 0.0 {
            self.c0
        } else {
            self.c0 + a * a / (4.0 * b)
        }
    }

    /// A subgradient of `G` at `X`, a natural dual candidate.
    fn induced_dual(&self, f: &Factored, xs: &[Complex64]) -> Vec<Complex64> {
        let scale = 2.0 * self.alpha * self.g_of(f);
        match f {
            Factored::Scalar(s) => xs
                .iter()
                .zip(s)
                .zip(&self.nu)
                .map(|((v, a), n)| if *a > 0.0 { v * (scale * n / a) } else { c(0.0) })
                .collect(),
            Factored::Matrix(m) => {
                let b = self.block();
                let mut out = vec![c(0.0); self.n * b];
                for (k, (u, s, v)) in m.iter().enumerate() {
                    let tol = s[0] * 1e-14;
                    let mut acc = CMatrix::zeros(self.rows, self.cols);
                    for i in 0..s.len() {
                        if s[i] > tol && s[i] > 0.0 {
                            acc += u.column(i) * v.column(i).adjoint();
                        }
                    }
                    acc *= c(scale * self.nu[k]);
                    for (i, val) in acc.transpose().iter().enumerate() {
                        out[k * b + i] = *val;
                    }
                }
                out
            }
        }
    }

    /// `prox` of `beta * g^2` at `u`: soft-thresholding at `t * nu_k`, with
    /// `t = 2 beta g(result)` solved exactly (the map is piecewise linear).
    fn prox_g_sq(&self, u: &[Complex64], beta: f64) -> Vec<Complex64> {
        let f = self.factor(u);
        let w = self.weight;
        // (breakpoint, slope contribution to A, to B)
        let mut bps: Vec<(f64, f64, f64)> = Vec::new();
        match &f {
            Factored::Scalar(s) => {
                for (a, n) in s.iter().zip(&self.nu) {
                    if *a > 0.0 {
                        bps.push((a / n, w * n * a, w * n * n));
                    }
                }
            }
            Factored::Matrix(m) => {
                for ((_, s, _), n) in m.iter().zip(&self.nu) {
                    for a in s {
                        if *a > 0.0 {
                            bps.push((a / n, w * n * a, w * n * n));
                        }
                    }
                }
            }
        }
        bps.sort_unstable_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));
        let (mut a_sum, mut b_sum) = (0.0, 0.0);
        for &(bp, a, b) in &bps {
            if bp - 2.0 * beta * (a_sum - bp * b_sum) <= 0.0 {
                break;
            }
            a_sum += a;
            b_sum += b;
        }
        let t = 2.0 * beta * a_sum / (1.0 + 2.0 * beta * b_sum);
        match f {
            Factored::Scalar(s) => u
                .iter()
                .zip(&s)
                .zip(&self.nu)
                .map(|((v, a), n)| if *a > t * n { v * (1.0 - t * n / a) } else { c(0.0) })
                .collect(),
            Factored::Matrix(m) => {
                let b = self.block();
                let mut out = vec![c(0.0); self.n * b];
                for (k, (uu, s, vv)) in m.into_iter().enumerate() {
                    let thr = t * self.nu[k];
                    let mut acc = CMatrix::zeros(self.rows, self.cols);
                    for i in 0..s.len() {
                        if s[i] > thr {
                            acc += uu.column(i) * vv.column(i).adjoint() * c(s[i] - thr);
                        }
                    }
                    for (i, val) in acc.transpose().iter().enumerate() {
                        out[k * b + i] = *val;
                    }
                }
                out
            }
        }
    }

    fn taps_of(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let b = self.block();
        (0..self.taps)
            .map(|j| DMatrix::from_row_slice(self.rows, self.cols, &x[j * b..(j + 1) * b]))
            .collect()
    }
}

/// Minimizes the discretized `psi` over real causal FIR `X` with `fir_order`
/// taps, using the accelerated primal-dual method of Chambolle and Pock
/// (the quadratic term is 2-strongly convex). Stops on the relative duality gap.
pub fn minimize_psi(rp: &ReducedProblem, fir_order: usize, opts: &SolverOptions) -> Result<SolveReport> {
    if fir_order == 0 {
        return Err(Error::InvalidProblem("fir_order must be at least 1".into()));
    }
    if rp.r.len() < 2 * fir_order {
        return Err(Error::InvalidGrid(format!(
            "{} grid points cannot resolve {fir_order} FIR taps",
            rp.r.len()
        )));
    }
    let ws = Workspace::new(rp, fir_order);
    let dim = fir_order * ws.block();
    let gamma = 2.0;

    let mut x = vec![0.0; dim];
    let mut x_bar = x.clone();
    let mut y = vec![c(0.0); ws.n * ws.block()];
    let mut tau = opts.tau0;
    let mut sig = 1.0 / opts.tau0;

    let mut best_x = x.clone();
    let mut best_primal = f64::INFINITY;
    let mut best_dual = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    let evaluate = |x: &[f64], y: &[Complex64], best_primal: &mut f64, best_x: &mut Vec<f64>, best_dual: &mut f64| {
        let xs = ws.synth(x);
        let f = ws.factor(&xs);
        let p = ws.primal(x, &f);
        let d = ws.dual_on_ray(y).max(ws.dual_on_ray(&ws.induced_dual(&f, &xs)));
        if p < *best_primal {
            *best_primal = p;
            best_x.copy_from_slice(x);
        }
        *best_dual = best_dual.max(d);
        (*best_primal - *best_dual) / best_primal.abs().max(f64::MIN_POSITIVE)
    };

    gap = gap.min(evaluate(&x, &y, &mut best_primal, &mut best_x, &mut best_dual));
    if gap <= opts.tol {
        converged = true;
    }
    while !converged && iterations < opts.max_iter {
        let xb = ws.synth(&x_bar);
        let v: Vec<Complex64> = y.iter().zip(&xb).map(|(a, b)| a + b * sig).collect();
        let scaled: Vec<Complex64> = v.iter().map(|a| a / sig).collect();
        let p = ws.prox_g_sq(&scaled, ws.alpha / sig);
        for ((yy, vv), pp) in y.iter_mut().zip(&v).zip(&p) {
            *yy = vv - pp * sig;
        }
        let z = ws.analyze(&y);
        let x_old = x.clone();
        for i in 0..dim {
            x[i] = (2.0 * tau * ws.rho[i] + x[i] - tau * z[i]) / (1.0 + 2.0 * tau);
        }
        let theta = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
        tau *= theta;
        sig /= theta;
        for i in 0..dim {
            x_bar[i] = x[i] + theta * (x[i] - x_old[i]);
        }
        iterations += 1;
        if opts.restart_every > 0 && iterations % opts.restart_every == 0 {
            tau = opts.tau0;
            sig = 1.0 / opts.tau0;
            x_bar.copy_from_slice(&x);
        }
        if iterations % opts.check_every.max(1) == 0 || iterations == opts.max_iter {
            gap = evaluate(&x, &y, &mut best_primal, &mut best_x, &mut best_dual);
            if gap <= opts.tol {
                converged = true;
            }
        }
    }
    if !converged {
        log::warn!("psi minimization stopped after {iterations} iterations with relative gap {gap:.3e}");
    }

    let x_opt = ws.taps_of(&best_x);
    let x_samples = GridSamples::new(rp.grid(), ws.rows, ws.cols, ws.synth(&best_x))?;
    let el = if rp.scalar {
        match el_residual(&x_opt, rp) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("Euler-Lagrange certificate skipped: {e}");
                None
            }
        }
    } else {
        None
    };
    Ok(SolveReport {
        x_opt,
        x_samples,
        psi_value: best_primal,
        dual_value: best_dual,
        gap: gap.max(0.0),
        el_residual: el,
        iterations,
        converged,
    })
}

fn el_defect(x: &[DMatrix<f64>], rp: &ReducedProblem) -> Result<GridSamples> {
    if !rp.scalar {
        return Err(Error::UndefinedCertificate("Euler-Lagrange residual is defined for scalar problems".into()));
    }
    let xs = TransferFunction::fir(x.to_vec())?.evaluate_on_grid(rp.grid())?;
    let min_mod = xs.data().iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if xs.max_abs() == 0.0 {
        return Err(Error::UndefinedCertificate("X is identically zero".into()));
    }
    if min_mod < EL_MIN_MODULUS {
        return Err(Error::UndefinedCertificate(format!("|X| drops to {min_mod:.2e} on the grid")));
    }
    let g = weighted_nuclear(&xs, &rp.nu);
    let scale = g / rp.sigma_sq;
    let vals = xs
        .data()
        .iter()
        .zip(rp.r.data())
        .zip(&rp.nu)
        .map(|((xv, rv), n)| xv / xv.norm() * (scale * n) - (rv - xv))
        .collect();
    GridSamples::from_scalars(rp.grid(), vals)
}

/// `|| Pi_L( (||X N||_1 / snr) |N| X/|X| - (R - X) ) ||_2` with `Pi_L` the
/// projection onto taps `0..L`: zero exactly at the FIR-restricted optimum.
pub fn el_residual(x: &[DMatrix<f64>], rp: &ReducedProblem) -> Result<f64> {
    let v = el_defect(x, rp)?;
    Ok(h2_norm_sq(&fir_projection(&v, x.len())).sqrt())
}

/// Same residual with the full causal projection `P_+`; bounded below by
/// the FIR truncation error of the optimum.
pub fn el_residual_causal(x: &[DMatrix<f64>], rp: &ReducedProblem) -> Result<f64> {
    let v = el_defect(x, rp)?;
    Ok(h2_norm_sq(&causal_projection(&v)).sqrt())
}
