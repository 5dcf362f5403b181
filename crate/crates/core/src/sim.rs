//! Time-domain Monte Carlo check of a designed `(C, D)` pair.
//!
//! White Gaussian inputs drive the source chain `S`, the measurement noise
//! `M` and the channel noise `N`; every filter runs as a direct-form FIR on
//! its truncated impulse response.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::codec_synth::DesignResult;
use crate::error::{Error, Result};
use crate::kopt::ProblemSpec;
use crate::tf_core::{fir_truncation, wraparound_energy_fraction, GridSamples, TransferFunction, ALIASING_TOLERANCE};

pub const RNG_ALGORITHM: &str = "ChaCha20Rng + rand_distr::StandardNormal (Ziggurat)";
pub const DIVERGENCE_LIMIT: f64 = 1e12;
/// Tail energy fraction above which a truncation warning is recorded.
pub const TAIL_WARNING: f64 = 1e-6;
pub const MIN_BATCHES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    /// Defaults to ten times the longest truncated impulse response.
    pub burn_in: Option<usize>,
    pub truncation: usize,
    pub n_batches: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_samples: 1 << 20,
            burn_in: None,
            truncation: 4 * crate::kopt::DEFAULT_FIR_ORDER,
            n_batches: 64,
        }
    }
}

impl SimConfig {
    /// Defaults with the truncation tied to the problem's FIR order.
    pub fn for_spec(spec: &ProblemSpec, seed: u64) -> Self {
        Self {
            seed,
            truncation: 4 * spec.fir_order,
            ..Self::default()
        }
    }

    pub fn with_samples(mut self, n_samples: usize) -> Self {
        self.n_samples = n_samples;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub empirical_mse: f64,
    pub mse_stderr: f64,
    pub empirical_power: f64,
    pub power_stderr: f64,
    pub predicted_mse: f64,
    pub predicted_power: f64,
    pub seed: u64,
    pub n_samples: usize,
    pub burn_in: usize,
    pub truncation: usize,
    pub n_batches: usize,
    pub rng_algorithm: String,
    /// Largest tail energy fraction dropped by any filter truncation.
    pub truncation_tail: f64,
    pub truncation_warning: bool,
}

impl SimReport {
    pub fn mse_z(&self) -> f64 {
        (self.empirical_mse - self.predicted_mse) / self.mse_stderr
    }

    pub fn power_z(&self) -> f64 {
        (self.empirical_power - self.predicted_power) / self.power_stderr
    }

    /// Both statistics within `k` standard errors of the predictions.
    pub fn agrees_within(&self, k: f64) -> bool {
        self.mse_z().abs() <= k && self.power_z().abs() <= k
    }
}

/// First taps of a causal impulse response plus the energy fraction left out.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<DMatrix<f64>>,
    pub tail_energy: f64,
}

impl ImpulseResponse {
    pub fn rows(&self) -> usize {
        self.taps[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.taps[0].ncols()
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_squared()).sum()
    }
}

fn rational_response(num: &[f64], den: &[f64], length: usize) -> Vec<f64> {
    let mut h = vec![0.0; length];
    for k in 0..length {
        let mut acc = num.get(k).copied().unwrap_or(0.0);
        for (j, &a) in den.iter().enumerate().skip(1).take(k) {
            acc -= a * h[k - j];
        }
        h[k] = acc / den[0];
    }
    h
}

fn scalar_response(tf: &TransferFunction, length: usize) -> Result<(Vec<f64>, f64)> {
    match tf {
        TransferFunction::Rational { num, den } => {
            let ext = (16 * length).max(length + 8192);
            let h = rational_response(num, den, ext);
            let total: f64 = h.iter().map(|v| v * v).sum();
            let tail: f64 = h[length..].iter().map(|v| v * v).sum();
            Ok((h[..length].to_vec(), if total > 0.0 { tail / total } else { 0.0 }))
        }
        other => {
            let ir = impulse_response(other, length)?;
            Ok((ir.taps.iter().map(|t| t[(0, 0)]).collect(), ir.tail_energy))
        }
    }
}

/// First `length` impulse-response coefficients of a stable causal filter.
/// Rational filters run their difference equation; the tail fraction is
/// measured against a much longer run.
pub fn impulse_response(tf: &TransferFunction, length: usize) -> Result<ImpulseResponse> {
    if length == 0 {
        return Err(Error::InvalidProblem("impulse response length must be at least 1".into()));
    }
    tf.validate()?;
    let (r, c) = (tf.rows(), tf.cols());
    let mut taps = vec![DMatrix::zeros(r, c); length];
    let tail_energy = match tf {
        TransferFunction::Fir { coeffs } => {
            let total: f64 = coeffs.iter().map(|m| m.norm_squared()).sum();
            for (t, m) in taps.iter_mut().zip(coeffs) {
                t.copy_from(m);
            }
            let dropped: f64 = coeffs.iter().skip(length).map(|m| m.norm_squared()).sum();
            if total > 0.0 { dropped / total } else { 0.0 }
        }
        TransferFunction::Rational { .. } => {
            let (h, tail) = scalar_response(tf, length)?;
            for (t, v) in taps.iter_mut().zip(h) {
                t[(0, 0)] = v;
            }
            tail
        }
        TransferFunction::Delay { delay, dim } => {
            if *delay < length {
                taps[*delay] = DMatrix::identity(*dim, *dim);
                0.0
            } else {
                1.0
            }
        }
        TransferFunction::Diagonal(entries) => {
            let mut worst = 0.0f64;
            for (i, e) in entries.iter().enumerate() {
                let (h, tail) = scalar_response(e, length)?;
                for (t, v) in taps.iter_mut().zip(h) {
                    t[(i, i)] = v;
                }
                worst = worst.max(tail);
            }
            worst
        }
    };
    Ok(ImpulseResponse { taps, tail_energy })
}

/// Impulse response of a filter known only by grid samples.
pub fn impulse_response_from_samples(x: &GridSamples, length: usize) -> ImpulseResponse {
    let coeffs = x.coefficients();
    let alias = wraparound_energy_fraction(&coeffs, x.len(), x.rows() * x.cols());
    if alias > ALIASING_TOLERANCE {
        log::warn!("impulse response: {alias:.2e} of the energy sits near the wrap point; grid may alias");
    }
    let (tf, dropped) = fir_truncation(x, length);
    let taps = match tf {
        TransferFunction::Fir { coeffs } => coeffs,
        _ => unreachable!(),
    };
    let mut ir = ImpulseResponse { taps, tail_energy: dropped };
    let (r, c) = (ir.rows(), ir.cols());
    ir.taps.resize(length, DMatrix::zeros(r, c));
    ir
}

/// Sparse MIMO FIR: for every (output, input) pair the nonzero taps.
struct Filter {
    rows: usize,
    cols: usize,
    taps: Vec<Vec<Vec<(usize, f64)>>>,
    len: usize,
}

impl Filter {
    fn new(ir: &ImpulseResponse) -> Self {
        let (rows, cols) = (ir.rows(), ir.cols());
        let mut taps = vec![vec![Vec::new(); cols]; rows];
        for (lag, m) in ir.taps.iter().enumerate() {
            for i in 0..rows {
                for j in 0..cols {
                    if m[(i, j)] != 0.0 {
                        taps[i][j].push((lag, m[(i, j)]));
                    }
                }
            }
        }
        let len = ir
            .taps
            .iter()
            .rposition(|m| m.iter().any(|v| *v != 0.0))
            .map_or(1, |p| p + 1);
        Self { rows, cols, taps, len }
    }

    /// Channel-major signals in, channel-major signals out.
    fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = x.first().map_or(0, |v| v.len());
        let mut y = vec![vec![0.0; n]; self.rows];
        for (i, yi) in y.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate().take(self.cols) {
                for &(lag, h) in &self.taps[i][j] {
                    if lag >= n {
                        continue;
                    }
                    for (o, v) in yi[lag..].iter_mut().zip(&xj[..n - lag]) {
                        *o += h * v;
                    }
                }
            }
        }
        y
    }
}

fn check_finite(sig: &[Vec<f64>]) -> Result<()> {
    let mut first: Option<(usize, f64)> = None;
    for ch in sig {
        if let Some(k) = ch.iter().position(|v| !(v.abs() <= DIVERGENCE_LIMIT)) {
            if first.map_or(true, |(f, _)| k < f) {
                first = Some((k, ch[k].abs()));
            }
        }
    }
    match first {
        Some((sample, magnitude)) => Err(Error::Divergence { sample, magnitude }),
        None => Ok(()),
    }
}

fn sub(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
}

/// Sum over channels of the squared signal at every sample.
fn energy_per_sample(sig: &[Vec<f64>], range: std::ops::Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; range.len()];
    for ch in sig {
        for (o, v) in out.iter_mut().zip(&ch[range.clone()]) {
            *o += v * v;
        }
    }
    out
}

/// Mean and batch-means standard error.
fn batch_stats(x: &[f64], batches: usize) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let means: Vec<f64> = (0..batches)
        .map(|b| {
            let (lo, hi) = (b * n / batches, (b + 1) * n / batches);
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let bm = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// Runs the closed loop `s = S w_s`, `t = C (s + M w_m)`,
/// `e = W (P s - D (t + N w_n))` and compares `E|e|^2`, `E|t|^2` with the
/// design's frequency-domain values.
pub fn run_simulation(design: &DesignResult, spec: &ProblemSpec, cfg: &SimConfig) -> Result<SimReport> {
    if cfg.truncation == 0 {
        return Err(Error::InvalidProblem("truncation must keep at least one tap".into()));
    }
    if cfg.n_batches < MIN_BATCHES {
        return Err(Error::InvalidProblem(format!("at least {MIN_BATCHES} batches are needed")));
    }
    let irs = [&spec.s, &spec.m, &design.c, &spec.n, &design.d, &spec.p, &spec.w]
        .into_iter()
        .map(|tf| impulse_response(tf, cfg.truncation))
        .collect::<Result<Vec<_>>>()?;
    let truncation_tail = irs.iter().map(|ir| ir.tail_energy).fold(0.0, f64::max);
    let truncation_warning = truncation_tail > TAIL_WARNING;
    if truncation_warning {
        log::warn!("impulse responses truncated at {} taps drop up to {truncation_tail:.2e} of their energy", cfg.truncation);
    }
    let filters: Vec<Filter> = irs.iter().map(Filter::new).collect();
    let [fs, fm, fc, fnoise, fd, fp, fw] = <[Filter; 7]>::try_from(filters).ok().unwrap();
    let longest = [&fs, &fm, &fc, &fnoise, &fd, &fp, &fw].iter().map(|f| f.len).max().unwrap_or(1);
    let burn_in = cfg.burn_in.unwrap_or(10 * longest);
    if cfg.n_samples <= burn_in {
        return Err(Error::InvalidProblem(format!(
            "n_samples ({}) must exceed the burn-in ({burn_in})",
            cfg.n_samples
        )));
    }
    if cfg.n_samples < cfg.n_batches {
        return Err(Error::InvalidProblem("fewer samples than batches".into()));
    }
    if fs.rows != fm.rows || fc.cols != fs.rows || fnoise.rows != fc.rows || fd.cols != fc.rows {
        return Err(Error::DimensionMismatch("design filters do not fit the problem".into()));
    }

    let total = burn_in + cfg.n_samples;
    let widths = [fs.cols, fm.cols, fnoise.cols];
    let mut inputs: Vec<Vec<Vec<f64>>> = widths.iter().map(|&w| vec![vec![0.0; total]; w]).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    for k in 0..total {
        for group in inputs.iter_mut() {
            for ch in group.iter_mut() {
                ch[k] = StandardNormal.sample(&mut rng);
            }
        }
    }
    let [ws, wm, wn] = <[Vec<Vec<f64>>; 3]>::try_from(inputs).ok().unwrap();

    let s = fs.apply(&ws);
    check_finite(&s)?;
    let m = fm.apply(&wm);
    let x: Vec<Vec<f64>> = s.iter().zip(&m).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect();
    let t = fc.apply(&x);
    check_finite(&t)?;
    let noise = fnoise.apply(&wn);
    let r: Vec<Vec<f64>> = t.iter().zip(&noise).map(|(a, b)| a.iter().zip(b).map(|(p, q)| p + q).collect()).collect();
    let s_hat = fd.apply(&r);
    check_finite(&s_hat)?;
    let e = fw.apply(&sub(&fp.apply(&s), &s_hat));
    check_finite(&e)?;

    let window = burn_in..total;
    let (empirical_mse, mse_stderr) = batch_stats(&energy_per_sample(&e, window.clone()), cfg.n_batches);
    let (empirical_power, power_stderr) = batch_stats(&energy_per_sample(&t, window), cfg.n_batches);
    Ok(SimReport {
        empirical_mse,
        mse_stderr,
        empirical_power,
        power_stderr,
        predicted_mse: design.achieved_distortion,
        predicted_power: design.predicted_power,
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        burn_in,
        truncation: cfg.truncation,
        n_batches: cfg.n_batches,
        rng_algorithm: RNG_ALGORITHM.to_string(),
        truncation_tail,
        truncation_warning,
    })
}
