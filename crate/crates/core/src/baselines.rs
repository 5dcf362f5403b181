//! Reference curves: the infinite-SNR Wiener cost, the OPTA bound by
//! reverse water-filling, and the SNR/delay sweep driver.

use rayon::prelude::*;
use serde::Serialize;

use crate::codec_synth::design;
use crate::error::{Error, Result};
use crate::kopt::{reduce, ProblemSpec, SolverOptions};
use crate::spectral::SpectralDensity;
use crate::tf_core::{causal_projection, h2_norm_sq, GridSamples, TransferFunction};

/// Stop the water-level bisection once `|R(theta) - C|` is below this.
pub const RATE_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_DELAYS: [usize; 3] = [0, 2, 10];

/// Minimum distortion without the channel-noise term:
/// `||R - P_+ R||^2 + eta`.
pub fn wiener_cost(spec: &ProblemSpec) -> Result<f64> {
    if !spec.is_scalar() {
        return Err(Error::InvalidProblem("Wiener cost is computed for scalar problems".into()));
    }
    let rp = reduce(spec)?;
    Ok(h2_norm_sq(&rp.r.sub(&causal_projection(&rp.r))) + rp.eta)
}

/// AWGN capacity in nats per sample with the power split evenly over
/// `n_channels` unit-noise channels.
pub fn capacity_nats(snr: f64, n_channels: usize) -> f64 {
    let n = n_channels as f64;
    n * 0.5 * (snr / n).ln_1p()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptaPoint {
    pub snr: f64,
    pub capacity: f64,
    pub water_level: f64,
    pub d_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptaCurve {
    pub records: Vec<OptaPoint>,
}

fn density_values(phi: &SpectralDensity) -> Result<Vec<f64>> {
    if phi.dim() != 1 {
        return Err(Error::InvalidProblem("OPTA needs a scalar source spectrum".into()));
    }
    Ok(phi.samples().data().iter().map(|v| v.re.max(0.0)).collect())
}

/// `D(theta) = mean min(theta, phi)`.
pub fn water_distortion(phi: &[f64], theta: f64) -> f64 {
    phi.iter().map(|&p| p.min(theta)).sum::<f64>() / phi.len() as f64
}

/// `R(theta) = mean max(0, log(phi / theta) / 2)` in nats.
pub fn water_rate(phi: &[f64], theta: f64) -> f64 {
    phi.iter().map(|&p| if p > theta { 0.5 * (p / theta).ln() } else { 0.0 }).sum::<f64>() / phi.len() as f64
}

/// Reverse water-filling for rate `capacity`: returns `(theta, D(theta))`.
/// The water level is bisected (in `log theta`) on `[min phi * 1e-12, max phi]`.
pub fn reverse_water_fill(phi: &[f64], capacity: f64) -> (f64, f64) {
    let max = phi.iter().copied().fold(0.0, f64::max);
    let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = max;
    let mut lo = (min * 1e-12).max(max * 1e-300);
    if capacity <= 0.0 || max == 0.0 {
        return (hi, water_distortion(phi, hi));
    }
    if water_rate(phi, lo) < capacity {
        log::warn!("capacity {capacity:.3e} exceeds the water-filling bracket; clamping the water level");
        return (lo, water_distortion(phi, lo));
    }
    let mut theta = (lo * hi).sqrt();
    for _ in 0..400 {
        theta = (lo * hi).sqrt();
        let r = water_rate(phi, theta);
        if (r - capacity).abs() <= RATE_TOLERANCE {
            break;
        }
        if r > capacity {
            lo = theta;
        } else {
            hi = theta;
        }
        if hi / lo - 1.0 < 4.0 * f64::EPSILON {
            break;
        }
    }
    (theta, water_distortion(phi, theta))
}

/// Smallest distortion any scheme can reach: `R(D_min) = C`.
pub fn opta_distortion(source_spectrum: &SpectralDensity, snr: f64, n_channels: usize) -> Result<f64> {
    opta_point(source_spectrum, snr, n_channels).map(|p| p.d_min)
}

pub fn opta_point(source_spectrum: &SpectralDensity, snr: f64, n_channels: usize) -> Result<OptaPoint> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::Domain(format!("snr must be positive (got {snr})")));
    }
    if n_channels == 0 {
        return Err(Error::Domain("at least one channel is needed".into()));
    }
    let phi = density_values(source_spectrum)?;
    let capacity = capacity_nats(snr, n_channels);
    let (water_level, d_min) = reverse_water_fill(&phi, capacity);
    Ok(OptaPoint {
        snr,
        capacity,
        water_level,
        d_min,
    })
}

pub fn opta_curve(source_spectrum: &SpectralDensity, snrs: &[f64], n_channels: usize) -> Result<OptaCurve> {
    let records = snrs
        .iter()
        .map(|&s| opta_point(source_spectrum, s, n_channels))
        .collect::<Result<Vec<_>>>()?;
    Ok(OptaCurve { records })
}

/// `|S|^2` of a scalar-output source on the problem grid.
pub fn source_spectrum(spec: &ProblemSpec) -> Result<SpectralDensity> {
    let s = spec.s.evaluate_on_grid(spec.grid)?;
    if s.rows() != 1 {
        return Err(Error::InvalidProblem("OPTA needs a scalar source".into()));
    }
    let vals = (0..s.len())
        .map(|k| num_complex::Complex64::new(s.matrix(k).iter().map(|v| v.norm_sqr()).sum::<f64>(), 0.0))
        .collect();
    SpectralDensity::new(GridSamples::from_scalars(spec.grid, vals)?, 0.0)
}

/// `10^start .. 10^stop` in `points` log-spaced steps.
pub fn log_spaced(start_exp: f64, stop_exp: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![10f64.powf(start_exp)],
        _ => (0..points)
            .map(|i| 10f64.powf(start_exp + (stop_exp - start_exp) * i as f64 / (points - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub snr: f64,
    pub delay: usize,
    /// `phi(K)` of the design; NaN when the cell failed.
    pub distortion_linear: f64,
    pub distortion_opta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gap: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    pub fn failed(&self) -> bool {
        self.error.is_some() || !self.converged
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    /// Sorted by `(snr, delay)`.
    pub records: Vec<SweepRecord>,
}

impl SweepTable {
    pub fn any_failed(&self) -> bool {
        self.records.iter().any(|r| r.failed())
    }

    /// Records for one delay, in increasing SNR.
    pub fn for_delay(&self, delay: usize) -> Vec<&SweepRecord> {
        self.records.iter().filter(|r| r.delay == delay).collect()
    }

    pub fn for_snr(&self, snr: f64) -> Vec<&SweepRecord> {
        self.records.iter().filter(|r| r.snr == snr).collect()
    }
}

/// Designs every `(snr, delay)` cell of a scalar template (`P = z^{-d}`) and
/// records its distortion next to the OPTA bound. Cells run on up to `jobs`
/// threads; a failing cell is recorded and the sweep goes on.
pub fn sweep(
    template: &ProblemSpec,
    snrs: &[f64],
    delays: &[usize],
    opts: &SolverOptions,
    jobs: usize,
) -> Result<SweepTable> {
    if snrs.is_empty() || delays.is_empty() {
        return Err(Error::InvalidProblem("sweep needs at least one snr and one delay".into()));
    }
    if !template.is_scalar() {
        return Err(Error::InvalidProblem("sweeps run on scalar problems".into()));
    }
    template.validate_structure()?;
    let phi = source_spectrum(template)?;
    let mut cells: Vec<(f64, usize)> = snrs.iter().flat_map(|&s| delays.iter().map(move |&d| (s, d))).collect();
    cells.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    cells.dedup();

    let run = |&(snr, delay): &(f64, usize)| -> SweepRecord {
        let opta = opta_distortion(&phi, snr, 1).unwrap_or(f64::NAN);
        let mut spec = template.clone().with_snr(snr);
        spec.p = TransferFunction::delay(delay);
        match design(&spec, opts) {
            Ok(d) => SweepRecord {
                snr,
                delay,
                distortion_linear: d.result.predicted_distortion,
                distortion_opta: opta,
                converged: d.report.converged,
                iterations: d.report.iterations,
                gap: d.report.gap,
                error: None,
            },
            Err(e) => SweepRecord {
                snr,
                delay,
                distortion_linear: f64::NAN,
                distortion_opta: opta,
                converged: false,
                iterations: 0,
                gap: f64::NAN,
                error: Some(e.to_string()),
            },
        }
    };
    let records = if jobs <= 1 {
        cells.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidProblem(format!("thread pool: {e}")))?;
        pool.install(|| cells.par_iter().map(run).collect())
    };
    Ok(SweepTable { records })
}
