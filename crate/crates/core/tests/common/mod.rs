//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use jscc_core::kopt::ProblemSpec;
use jscc_core::tf_core::{FrequencyGrid, TransferFunction};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Direct O(N L) evaluation of `sum_j x_j e^{-i w_k j}`.
pub fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(j, &v)| Complex64::from_polar(v, -2.0 * PI * (j * k % n) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// `||R - X||^2 + (mean nu |X|)^2 / sigma^2` for real FIR coefficients `x`.
pub fn psi_value(x: &[f64], r: &[Complex64], nu: &[f64], sigma_sq: f64) -> f64 {
    let n = r.len();
    let xs = naive_dft(x, n);
    let fit: f64 = xs.iter().zip(r).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / n as f64;
    let g: f64 = xs.iter().zip(nu).map(|(a, w)| w * a.norm()).sum::<f64>() / n as f64;
    fit + g * g / sigma_sq
}

/// Subgradient method with `1/(mu t)` steps on the strongly convex scalar
/// objective; returns the best iterate and its value.
pub fn subgradient_psi(r: &[Complex64], nu: &[f64], sigma_sq: f64, taps: usize, iters: usize) -> (Vec<f64>, f64) {
    let n = r.len();
    let basis: Vec<Vec<Complex64>> = (0..taps)
        .map(|j| (0..n).map(|k| Complex64::from_polar(1.0, -2.0 * PI * (j * k % n) as f64 / n as f64)).collect())
        .collect();
    let mut x = vec![0.0; taps];
    let mut best = (x.clone(), psi_value(&x, r, nu, sigma_sq));
    for t in 1..=iters {
        let xs: Vec<Complex64> = (0..n).map(|k| (0..taps).map(|j| basis[j][k] * x[j]).sum()).collect();
        let g: f64 = xs.iter().zip(nu).map(|(a, w)| w * a.norm()).sum::<f64>() / n as f64;
        let grad: Vec<f64> = (0..taps)
            .map(|j| {
                let mut acc = 0.0;
                for k in 0..n {
                    let e = basis[j][k];
                    acc += 2.0 * ((xs[k] - r[k]).conj() * e).re;
                    if xs[k].norm() > 0.0 {
                        acc += 2.0 * g / sigma_sq * nu[k] * ((xs[k].conj() / xs[k].norm()) * e).re;
                    }
                }
                acc / n as f64
            })
            .collect();
        let step = 1.0 / (2.0 * t as f64);
        for (xj, gj) in x.iter_mut().zip(&grad) {
            *xj -= step * gj;
        }
        let v = psi_value(&x, r, nu, sigma_sq);
        if v < best.1 {
            best = (x.clone(), v);
        }
    }
    best
}

/// Polynomial roots from the companion matrix; `coeffs[0]` is the leading term.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let lead = coeffs[0];
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let mut comp = DMatrix::<f64>::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -coeffs[j + 1] / lead;
    }
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    comp.complex_eigenvalues().iter().copied().collect()
}

/// Real coefficients of `prod (1 - z_r x)` for conjugate-closed roots.
pub fn poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        let mut q = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            q[i] += c;
            q[i + 1] -= c * z;
        }
        p = q;
    }
    p.iter().map(|c| c.re).collect()
}

/// Outer factor of the FIR `sum_j k_j z^{-j}` by reflecting every zero
/// outside the unit disk, with a positive leading coefficient.
pub fn root_reflection_outer(k: &[f64], n: usize) -> Vec<Complex64> {
    let first = k.iter().position(|v| *v != 0.0).expect("nonzero FIR");
    let last = k.iter().rposition(|v| *v != 0.0).unwrap();
    let trimmed = &k[first..=last];
    let mut gain = trimmed[0].abs();
    let mut zeros = Vec::new();
    for z in poly_roots(trimmed) {
        if z.norm() > 1.0 {
            gain *= z.norm();
            zeros.push(1.0 / z.conj());
        } else {
            zeros.push(z);
        }
    }
    (0..n)
        .map(|idx| {
            let e = Complex64::from_polar(1.0, -2.0 * PI * idx as f64 / n as f64);
            zeros.iter().fold(Complex64::new(gain, 0.0), |acc, z| acc * (1.0 - z * e))
        })
        .collect()
}

/// Exact reverse water-filling on sampled densities: `R` is piecewise
/// affine in `log theta` between sorted samples.
pub fn water_filling_exact(phi: &[f64], capacity: f64) -> (f64, f64) {
    let n = phi.len() as f64;
    let mut sorted = phi.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut log_sum = 0.0;
    let mut theta = sorted[0];
    for m in 1..=sorted.len() {
        log_sum += sorted[m - 1].ln();
        // theta with the top m samples above water: (m/2n)(mean log - log theta) = C.
        let log_theta = log_sum / m as f64 - 2.0 * n * capacity / m as f64;
        let t = log_theta.exp();
        let next = sorted.get(m).copied().unwrap_or(0.0);
        if t >= next && t <= sorted[m - 1] {
            theta = t;
            break;
        }
    }
    let d = phi.iter().map(|&p| p.min(theta)).sum::<f64>() / n;
    (theta, d)
}

/// `|1 / (e^{iw} - a)|^2` on `n` points.
pub fn ar1_density(a: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let w = 2.0 * PI * k as f64 / n as f64;
            1.0 / (1.0 - 2.0 * a * w.cos() + a * a)
        })
        .collect()
}

pub fn first_order_source() -> TransferFunction {
    TransferFunction::rational(vec![0.0, 1.0], vec![1.0, -0.9]).unwrap()
}

/// `S = 1/(z - 0.9)`, `M = 0`, `P = z^{-d}`.
pub fn first_order_example(delay: usize, snr: f64) -> ProblemSpec {
    ProblemSpec::scalar(first_order_source(), TransferFunction::zero(1, 1), TransferFunction::delay(delay), snr)
}

pub fn white_example(snr: f64) -> ProblemSpec {
    ProblemSpec::scalar(
        TransferFunction::identity(1),
        TransferFunction::zero(1, 1),
        TransferFunction::identity(1),
        snr,
    )
}

/// Random real root set, conjugate-closed, moduli within `[lo, hi]`.
pub fn random_roots(rng: &mut impl Rng, count: usize, lo: f64, hi: f64) -> Vec<Complex64> {
    let mut roots = Vec::new();
    while roots.len() < count {
        let r = rng.random_range(lo..hi);
        if count - roots.len() >= 2 && rng.random_bool(0.5) {
            let z = Complex64::from_polar(r, rng.random_range(0.1..PI - 0.1));
            roots.push(z);
            roots.push(z.conj());
        } else {
            roots.push(Complex64::new(if rng.random_bool(0.5) { r } else { -r }, 0.0));
        }
    }
    roots
}

/// Stable rational with up to two poles of modulus below 0.85.
pub fn random_stable_rational(rng: &mut impl Rng, delayed: bool) -> TransferFunction {
    let count = rng.random_range(1..=2);
    let poles = random_roots(rng, count, 0.1, 0.85);
    let den = poly_from_roots(&poles);
    let mut num: Vec<f64> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(-1.0..1.0)).collect();
    num[0] += if num[0] >= 0.0 { 0.5 } else { -0.5 };
    if delayed {
        num.insert(0, 0.0);
    }
    TransferFunction::rational(num, den).unwrap()
}

/// Random scalar problem: stable `S` and `M`, delay up to 5, snr in `[0.1, 100]`.
pub fn random_scalar_problem(rng: &mut impl Rng) -> ProblemSpec {
    let delayed = rng.random_bool(0.5);
    let s = random_stable_rational(rng, delayed);
    let m = {
        let scale = rng.random_range(0.05..0.5);
        match random_stable_rational(rng, false) {
            TransferFunction::Rational { num, den } => {
                TransferFunction::rational(num.iter().map(|v| v * scale).collect(), den).unwrap()
            }
            _ => unreachable!(),
        }
    };
    let d = rng.random_range(0..=5);
    let snr = 10f64.powf(rng.random_range(-1.0..2.0));
    ProblemSpec::scalar(s, m, TransferFunction::delay(d), snr)
}

/// Trigonometric density `floor + |A(e^{iw})|^2` with random FIR `A`.
pub fn random_trig_density(rng: &mut impl Rng, n: usize, floor: f64) -> Vec<f64> {
    let taps: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| rng.random_range(-1.0..1.0)).collect();
    naive_dft(&taps, n).iter().map(|v| floor + v.norm_sqr()).collect()
}

pub fn grid(n: usize) -> FrequencyGrid {
    FrequencyGrid::new(n).unwrap()
}
