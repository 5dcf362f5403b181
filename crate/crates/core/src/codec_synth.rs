//! Encoder/decoder synthesis from the optimal product `K = D C`, and
//! validation of a design against the objective and the power constraint.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kopt::{
    minimize_psi, phi_cost_sampled, reduce_sampled, ProblemSpec, ReducedProblem, SampledSpec, SolveReport,
    SolverOptions,
};
use crate::linalg::{self, c, CMatrix};
use crate::spectral::{self, SpectralDensity};
use crate::tf_core::{
    adjoint, anticausal_energy_fraction, fir_truncation, h2_norm_sq, l1_norm, GridSamples, TransferFunction,
};

/// `||K||_2 <= ZERO_K_RATIO * ||R||_2` selects the `K = 0` branch.
pub const ZERO_K_RATIO: f64 = 1e-8;
/// Largest tolerated anticausal energy share of a synthesized decoder.
pub const MAX_ANTICAUSAL_ENERGY: f64 = 1e-6;
/// Relative power excess above which a design is reported infeasible.
pub const POWER_TOLERANCE: f64 = 1e-4;
/// Relative least-squares error at which the `D D^*` fit stops growing.
pub const FIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Certificates {
    /// `| ||C [S M]||^2 - snr | / snr`.
    pub power_gap: f64,
    /// `||D C - K|| / ||K||` on the grid.
    pub factorization_gap: f64,
    /// Relative deviation of `D D^*` from its optimal value.
    pub dd_star_gap: f64,
    /// `| ||W D N||^2 - ||W K H N||_1^2 / snr |`, relative.
    pub decoder_energy_gap: f64,
    /// `(J(C, D) - phi(K)) / phi(K)`.
    pub duality_gap: f64,
    pub d_anticausal_energy: f64,
    /// Largest coefficient energy share dropped when truncating `K`, `C`, `D`.
    pub truncation_energy: f64,
    /// Euler-Lagrange residual of the solved `X` (scalar problems).
    pub el_residual: Option<f64>,
    /// Trigonometric order used for the `D D^*` fit (vector problems).
    pub fit_order: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveSummary {
    pub iterations: usize,
    pub converged: bool,
    pub gap: f64,
    pub psi_value: f64,
    pub eta: f64,
}

impl SolveSummary {
    pub fn new(rep: &SolveReport, rp: &ReducedProblem) -> Self {
        Self {
            iterations: rep.iterations,
            converged: rep.converged,
            gap: rep.gap,
            psi_value: rep.psi_value,
            eta: rp.eta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DesignResult {
    pub k: TransferFunction,
    pub c: TransferFunction,
    pub d: TransferFunction,
    /// `phi(K)`.
    pub predicted_distortion: f64,
    /// `||C [S M]||_2^2`.
    pub predicted_power: f64,
    /// `J(C, D)` of the truncated filters.
    pub achieved_distortion: f64,
    pub certificates: Certificates,
    pub solver: Option<SolveSummary>,
}

impl DesignResult {
    pub fn converged(&self) -> bool {
        self.solver.as_ref().map_or(true, |s| s.converged)
    }
}

/// Objective and power of a `(C, D)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignValidation {
    pub j_value: f64,
    pub power: f64,
    pub phi_value: f64,
    /// `(J - phi) / phi`.
    pub duality_gap: f64,
    /// `(power - snr) / snr`.
    pub power_gap: f64,
    pub feasible: bool,
}

/// Solves, synthesizes and validates in one go.
#[derive(Debug, Clone)]
pub struct Design {
    pub result: DesignResult,
    pub report: SolveReport,
    pub reduced: ReducedProblem,
}

pub fn design(spec: &ProblemSpec, opts: &SolverOptions) -> Result<Design> {
    let ss = spec.sample()?;
    let rp = reduce_sampled(&ss)?;
    let report = minimize_psi(&rp, spec.fir_order, opts)?;
    let k = rp.recover_k(&report.x_samples)?;
    let mut result = if spec.is_scalar() {
        synthesize_scalar_sampled(&k, spec, &ss, &rp)?
    } else {
        synthesize_vector_sampled(&k, spec, &ss, &rp)?
    };
    result.certificates.el_residual = report.el_residual;
    result.solver = Some(SolveSummary::new(&report, &rp));
    Ok(Design {
        result,
        report,
        reduced: rp,
    })
}

fn output_taps(spec: &ProblemSpec) -> usize {
    4 * spec.fir_order
}

fn is_zero_k(k: &GridSamples, rp: &ReducedProblem) -> bool {
    h2_norm_sq(k).sqrt() <= ZERO_K_RATIO * h2_norm_sq(&rp.r).sqrt()
}

/// Scalar synthesis with an outer encoder:
/// `|C|^2 = snr / ||W K H N||_1 * |W K N| / |H|` and `D = K / C`.
pub fn synthesize_scalar(k: &GridSamples, spec: &ProblemSpec) -> Result<DesignResult> {
    if !spec.is_scalar() {
        return Err(Error::InvalidProblem("scalar synthesis of a vector problem".into()));
    }
    let ss = spec.sample()?;
    let rp = reduce_sampled(&ss)?;
    synthesize_scalar_sampled(k, spec, &ss, &rp)
}

fn synthesize_scalar_sampled(
    k: &GridSamples,
    spec: &ProblemSpec,
    ss: &SampledSpec,
    rp: &ReducedProblem,
) -> Result<DesignResult> {
    let grid = spec.grid;
    let snr = spec.snr;
    if is_zero_k(k, rp) {
        let c_grid = rp.h.inverse()?.scale(snr.sqrt());
        return finish(spec, ss, rp, GridSamples::zeros(grid, 1, 1), c_grid, GridSamples::zeros(grid, 1, 1), None);
    }
    let wkn = ss.w.mul(k).mul(&ss.n);
    let a = l1_norm(&wkn.mul(&rp.h));
    let mut log_mod = Vec::with_capacity(grid.n_points());
    for (i, (v, h)) in wkn.data().iter().zip(rp.h.data()).enumerate() {
        let m = v.norm();
        if !(m > 0.0) {
            return Err(Error::SynthesisFailure(format!("K vanishes at grid index {i}")));
        }
        log_mod.push(0.5 * ((snr / a).ln() + m.ln() - h.norm().ln()));
    }
    let c_grid = GridSamples::from_scalars(grid, spectral::cepstral_outer(grid, &log_mod))?;
    let d_grid = GridSamples::from_scalars(grid, k.data().iter().zip(c_grid.data()).map(|(x, y)| x / y).collect())?;
    let target: Vec<f64> = k
        .data()
        .iter()
        .zip(rp.h.data())
        .zip(ss.w.data().iter().zip(ss.n.data()))
        .map(|((kv, h), (w, n))| a / snr * (kv * h).norm() / (w * n).norm())
        .collect();
    let target = GridSamples::from_scalars(grid, target.into_iter().map(c).collect())?;
    finish(spec, ss, rp, k.clone(), c_grid, d_grid, Some((target, None)))
}

/// Hermitian trigonometric polynomial of order `nc` closest to `b` in the
/// grid-wise Frobenius norm: Fourier truncation to lags `|j| <= nc`.
pub fn fit_trig_polynomial(b: &GridSamples, nc: usize) -> Result<GridSamples> {
    let n = b.len();
    let block = b.rows() * b.cols();
    let mut coeffs = b.coefficients();
    for j in 0..n {
        let lag = b.grid().lag(j).unsigned_abs();
        if lag > nc {
            coeffs[j * block..(j + 1) * block].iter_mut().for_each(|v| *v = c(0.0));
        }
    }
    let a = GridSamples::from_coefficients(b.grid(), b.rows(), b.cols(), coeffs)?;
    Ok(a.map_matrices(|_, m| linalg::hermitian_part(&m)))
}

/// Fits `A` to the Hermitian target `b`, doubling the order from `nc0` until
/// the relative fit error drops below [`FIT_TOLERANCE`], and checks that `A`
/// stays positive definite.
fn fit_dd_star(b: &GridSamples, nc0: usize) -> Result<(GridSamples, usize)> {
    let n = b.len();
    let max_order = n / 2 - 1;
    let b_norm = h2_norm_sq(b).sqrt();
    let mut nc = nc0.clamp(1, max_order);
    loop {
        let a = fit_trig_polynomial(b, nc)?;
        let err = h2_norm_sq(&a.sub(b)).sqrt() / b_norm;
        let density = SpectralDensity::new(a.clone(), 0.0)?;
        let (min, max) = (density.min_eigenvalue(), density.max_eigenvalue());
        let positive = min > 1e-8 * max;
        if (positive && err <= FIT_TOLERANCE) || nc >= max_order {
            if !positive {
                return Err(Error::FitError { min_eig: min, max_eig: max });
            }
            if err > FIT_TOLERANCE {
                log::warn!("D D^* fit stopped at order {nc} with relative error {err:.2e}");
            }
            return Ok((a, nc));
        }
        nc = (nc * 2).min(max_order);
    }
}

/// Vector synthesis. For `n_e >= n_s`: `K = K_i K_o`, `K_o H = U Sigma V^*`,
/// `D = K_i D_o`, `C = D_o^{-1} K_o` with `D_o` the outer factor of the fitted
/// `(||K H||_1 / snr) U Sigma U^*`. For `n_e < n_s` the decoder is the outer
/// factor of `(||K H||_1 / snr) U Sigma U^*` from the SVD of `K H` and
/// `C = D^{-1} K`. Both are then padded to `n_t` channels.
pub fn synthesize_vector(k: &GridSamples, spec: &ProblemSpec) -> Result<DesignResult> {
    let ss = spec.sample()?;
    let rp = reduce_sampled(&ss)?;
    synthesize_vector_sampled(k, spec, &ss, &rp)
}

fn synthesize_vector_sampled(
    k: &GridSamples,
    spec: &ProblemSpec,
    ss: &SampledSpec,
    rp: &ReducedProblem,
) -> Result<DesignResult> {
    let grid = spec.grid;
    let snr = spec.snr;
    let (n_s, n_e, n_t) = (spec.n_s(), spec.n_e(), spec.n_t);
    if is_zero_k(k, rp) {
        let c_grid = pad_rows(&rp.h.inverse()?.scale((snr / n_s as f64).sqrt()), n_t);
        let d_grid = GridSamples::zeros(grid, n_e, n_t);
        return finish(spec, ss, rp, GridSamples::zeros(grid, n_e, n_s), c_grid, d_grid, None);
    }
    let kh = k.mul(&rp.h);
    let scale = l1_norm(&kh) / snr;
    let svd_kh = spectral::svd_on_grid(&kh);
    let target = svd_kh.u.mul(&svd_kh.sigma).mul(&adjoint(&svd_kh.u)).scale(scale);

    let (c_grid, d_grid, nc) = if n_e >= n_s {
        let io = spectral::inner_outer_factorize(k, spectral::DEFAULT_TOL_RANK)?;
        let svd_o = spectral::svd_on_grid(&io.outer.mul(&rp.h));
        let b = svd_o.u.mul(&svd_o.sigma).mul(&adjoint(&svd_o.u)).scale(scale);
        let (a, nc) = fit_dd_star(&b, spec.fir_order)?;
        let d_o = spectral::matrix_spectral_factor(&SpectralDensity::new(a, 0.0)?)?;
        let c_grid = d_o.inverse()?.mul(&io.outer);
        (c_grid, io.inner.mul(&d_o), nc)
    } else {
        let (a, nc) = fit_dd_star(&target, spec.fir_order)?;
        let d_o = spectral::matrix_spectral_factor(&SpectralDensity::new(a, 0.0)?)?;
        (d_o.inverse()?.mul(k), d_o, nc)
    };
    let c_grid = pad_rows(&c_grid, n_t);
    let d_grid = pad_cols(&d_grid, n_t);
    finish(spec, ss, rp, k.clone(), c_grid, d_grid, Some((target, Some(nc))))
}

fn pad_rows(x: &GridSamples, rows: usize) -> GridSamples {
    let (r, cc) = (x.rows(), x.cols());
    GridSamples::from_fn(x.grid(), rows, cc, |k| {
        let mut m = CMatrix::zeros(rows, cc);
        m.view_mut((0, 0), (r, cc)).copy_from(&x.matrix(k));
        m
    })
}

fn pad_cols(x: &GridSamples, cols: usize) -> GridSamples {
    let (r, cc) = (x.rows(), x.cols());
    GridSamples::from_fn(x.grid(), r, cols, |k| {
        let mut m = CMatrix::zeros(r, cols);
        m.view_mut((0, 0), (r, cc)).copy_from(&x.matrix(k));
        m
    })
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        a.abs() / b.abs()
    }
}

/// Truncates the grid filters and fills in every certificate.
fn finish(
    spec: &ProblemSpec,
    ss: &SampledSpec,
    rp: &ReducedProblem,
    k_grid: GridSamples,
    c_grid: GridSamples,
    d_grid: GridSamples,
    dd_target: Option<(GridSamples, Option<usize>)>,
) -> Result<DesignResult> {
    let taps = output_taps(spec);
    let d_anti = anticausal_energy_fraction(&d_grid);
    if d_anti > MAX_ANTICAUSAL_ENERGY {
        return Err(Error::SynthesisFailure(format!(
            "decoder has {d_anti:.2e} of its energy in anticausal taps"
        )));
    }
    let (k_fir, tk) = fir_truncation(&k_grid, taps);
    let (c_fir, tc) = fir_truncation(&c_grid, taps);
    let (d_fir, td) = fir_truncation(&d_grid, taps);
    let grid = spec.grid;
    let c_s = c_fir.evaluate_on_grid(grid)?;
    let d_s = d_fir.evaluate_on_grid(grid)?;

    let phi = phi_cost_sampled(&k_grid, ss);
    let v = validate_sampled(&c_s, &d_s, ss, phi);

    let k_norm = h2_norm_sq(&k_grid).sqrt();
    let factorization_gap = if k_norm > 0.0 {
        h2_norm_sq(&d_s.mul(&c_s).sub(&k_grid)).sqrt() / k_norm
    } else {
        h2_norm_sq(&d_s.mul(&c_s)).sqrt()
    };
    let wdn = h2_norm_sq(&ss.w.mul(&d_s).mul(&ss.n));
    let wkh = ss.w.mul(&k_grid).mul(&rp.h);
    let g = if ss.scalar { l1_norm(&wkh.mul(&ss.n)) } else { l1_norm(&wkh) };
    let decoder_energy = g * g / spec.snr;
    let (dd_star_gap, fit_order) = match dd_target {
        Some((t, nc)) => {
            let dd = if d_s.is_scalar() {
                d_s.map_entries(|z| c(z.norm_sqr()))
            } else {
                d_s.mul(&adjoint(&d_s))
            };
            (rel(h2_norm_sq(&dd.sub(&t)).sqrt(), h2_norm_sq(&t).sqrt()), nc)
        }
        None => (0.0, None),
    };
    Ok(DesignResult {
        k: k_fir,
        c: c_fir,
        d: d_fir,
        predicted_distortion: phi,
        predicted_power: v.power,
        achieved_distortion: v.j_value,
        certificates: Certificates {
            power_gap: rel(v.power - spec.snr, spec.snr),
            factorization_gap,
            dd_star_gap,
            decoder_energy_gap: if decoder_energy > 0.0 { rel(wdn - decoder_energy, decoder_energy) } else { wdn },
            duality_gap: v.duality_gap,
            d_anticausal_energy: d_anti,
            truncation_energy: tk.max(tc).max(td),
            el_residual: None,
            fit_order,
        },
        solver: None,
    })
}

fn validate_sampled(c_s: &GridSamples, d_s: &GridSamples, ss: &SampledSpec, phi: f64) -> DesignValidation {
    let dc = d_s.mul(c_s);
    let j_value = h2_norm_sq(&ss.w.mul(&ss.p.sub(&dc)).mul(&ss.s))
        + h2_norm_sq(&ss.w.mul(&dc).mul(&ss.m))
        + h2_norm_sq(&ss.w.mul(d_s).mul(&ss.n));
    let power = h2_norm_sq(&c_s.mul(&ss.sm));
    let power_gap = (power - ss.snr) / ss.snr;
    DesignValidation {
        j_value,
        power,
        phi_value: phi,
        duality_gap: if phi > 0.0 { (j_value - phi) / phi } else { j_value },
        power_gap,
        feasible: power_gap <= POWER_TOLERANCE,
    }
}

/// Evaluates `J(C, D)` and the transmit power of `result` by quadrature and
/// compares them with `phi(K)` and the power budget.
pub fn validate_design(result: &DesignResult, spec: &ProblemSpec) -> Result<DesignValidation> {
    let ss = spec.sample()?;
    let g = spec.grid;
    let c_s = result.c.evaluate_on_grid(g)?;
    let d_s = result.d.evaluate_on_grid(g)?;
    let k_s = result.k.evaluate_on_grid(g)?;
    let phi = phi_cost_sampled(&k_s, &ss);
    Ok(validate_sampled(&c_s, &d_s, &ss, phi))
}

/// Largest `| |C D| - |K| |` on the grid, relative to `max |K|` (scalar designs).
pub fn proportionality_defect(result: &DesignResult, spec: &ProblemSpec) -> Result<f64> {
    let g = spec.grid;
    let c_s = result.c.evaluate_on_grid(g)?;
    let d_s = result.d.evaluate_on_grid(g)?;
    let k_s = result.k.evaluate_on_grid(g)?;
    let kmax = k_s.max_abs();
    let dev = (0..g.n_points())
        .map(|i| ((c_s.scalar(i) * d_s.scalar(i)).norm() - k_s.scalar(i).norm()).abs())
        .fold(0.0, f64::max);
    Ok(if kmax > 0.0 { dev / kmax } else { dev })
}
