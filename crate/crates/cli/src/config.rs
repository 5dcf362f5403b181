//! TOML problem description.
//!
//! ```toml
//! snr = 10.0
//! s = { rational = { num = [0.0, 1.0], den = [1.0, -0.9] } }
//! p = { delay = 2 }
//!
//! [solver]
//! fir_order = 60
//! ```
//!
//! Transfer functions are one of `{ fir = [taps] }` (scalar taps, or a list
//! of matrices given as row lists), `{ rational = { num, den } }`,
//! `{ delay = d }` or `{ delay = { delay, dim } }`, `{ zero = { rows, cols } }`,
//! `{ identity = n }` and `{ diagonal = [entries] }`. Polynomials are in
//! ascending powers of `z^{-1}`.
//!
//! Defaults: `m` is zero, `p` and `w` are identities, `n` is the identity
//! on `dims.n_t` (itself defaulting to the source dimension), 4096 grid
//! points, 60 FIR taps, the core solver tolerances, seed 0, `2^20` samples,
//! and a sweep over 25 log-spaced SNRs from `1e-3` to `1e4` at delays 0, 2, 10.

use std::path::Path;

use jscc_core::baselines::log_spaced;
use jscc_core::kopt::{ProblemSpec, SolverOptions, DEFAULT_FIR_ORDER};
use jscc_core::tf_core::{FrequencyGrid, TransferFunction};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TfConfig {
    Fir(FirTaps),
    Rational { num: Vec<f64>, den: Vec<f64> },
    Delay(DelaySpec),
    Zero { rows: usize, cols: usize },
    Identity(usize),
    Diagonal(Vec<TfConfig>),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum FirTaps {
    Scalar(Vec<f64>),
    Matrix(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Scalar(usize),
    Block { delay: usize, dim: usize },
}

impl TfConfig {
    pub fn build(&self) -> Result<TransferFunction, String> {
        let tf = match self {
            TfConfig::Fir(FirTaps::Scalar(t)) => TransferFunction::scalar_fir(t),
            TfConfig::Fir(FirTaps::Matrix(taps)) => {
                let mut coeffs = Vec::with_capacity(taps.len());
                for rows in taps {
                    let r = rows.len();
                    let c = rows.first().map_or(0, |x| x.len());
                    if r == 0 || c == 0 || rows.iter().any(|x| x.len() != c) {
                        return Err("FIR matrix taps must be non-empty and rectangular".into());
                    }
                    coeffs.push(DMatrix::from_row_iterator(r, c, rows.iter().flatten().copied()));
                }
                TransferFunction::fir(coeffs)
            }
            TfConfig::Rational { num, den } => TransferFunction::rational(num.clone(), den.clone()),
            TfConfig::Delay(DelaySpec::Scalar(d)) => Ok(TransferFunction::delay(*d)),
            TfConfig::Delay(DelaySpec::Block { delay, dim }) => Ok(TransferFunction::Delay { delay: *delay, dim: *dim }),
            TfConfig::Zero { rows, cols } => Ok(TransferFunction::zero(*rows, *cols)),
            TfConfig::Identity(n) => Ok(TransferFunction::identity(*n)),
            TfConfig::Diagonal(entries) => {
                let built = entries.iter().map(|e| e.build()).collect::<Result<Vec<_>, _>>()?;
                TransferFunction::diagonal(built)
            }
        };
        let tf = tf.map_err(|e| e.to_string())?;
        tf.validate().map_err(|e| e.to_string())?;
        Ok(tf)
    }

    /// Exact description of a transfer function; FIR taps always use the
    /// matrix form so that shapes survive a round trip.
    pub fn describe(tf: &TransferFunction) -> TfConfig {
        match tf {
            TransferFunction::Fir { coeffs } => TfConfig::Fir(FirTaps::Matrix(
                coeffs
                    .iter()
                    .map(|m| (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
                    .collect(),
            )),
            TransferFunction::Rational { num, den } => TfConfig::Rational {
                num: num.clone(),
                den: den.clone(),
            },
            TransferFunction::Delay { delay, dim } => TfConfig::Delay(DelaySpec::Block {
                delay: *delay,
                dim: *dim,
            }),
            TransferFunction::Diagonal(e) => TfConfig::Diagonal(e.iter().map(TfConfig::describe).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_points: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub n_t: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub fir_order: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            fir_order: DEFAULT_FIR_ORDER,
            tol: o.tol,
            max_iter: o.max_iter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub seed: u64,
    pub n_samples: usize,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            seed: 0,
            n_samples: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SnrList {
    Values(Vec<f64>),
    LogSpaced(LogSpaced),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSpaced {
    pub start_exp: f64,
    pub stop_exp: f64,
    pub points: usize,
}

impl SnrList {
    pub fn values(&self) -> Vec<f64> {
        match self {
            SnrList::Values(v) => v.clone(),
            SnrList::LogSpaced(l) => log_spaced(l.start_exp, l.stop_exp, l.points),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub snr_list: SnrList,
    pub delay_list: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            snr_list: SnrList::LogSpaced(LogSpaced {
                start_exp: -3.0,
                stop_exp: 4.0,
                points: 25,
            }),
            delay_list: vec![0, 2, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub snr: f64,
    pub s: TfConfig,
    pub m: Option<TfConfig>,
    pub p: Option<TfConfig>,
    pub n: Option<TfConfig>,
    pub w: Option<TfConfig>,
    #[serde(default)]
    pub dims: DimsSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

pub fn parse(text: &str) -> Result<ConfigFile, Failure> {
    let de = toml::Deserializer::parse(text).map_err(|e| Failure::config(e.to_string()))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Failure::config(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn load(path: &Path) -> Result<ConfigFile, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text).map_err(|f| Failure::config(format!("{}: {}", path.display(), f.message)))
}

fn field(name: &str, tf: &TfConfig) -> Result<TransferFunction, Failure> {
    tf.build().map_err(|e| Failure::config(format!("at `{name}`: {e}")))
}

impl ConfigFile {
    pub fn problem(&self) -> Result<ProblemSpec, Failure> {
        let s = field("s", &self.s)?;
        let n_s = s.rows();
        let n_t = self.dims.n_t.unwrap_or(n_s);
        let m = match &self.m {
            Some(m) => field("m", m)?,
            None => TransferFunction::zero(n_s, 1),
        };
        let p = match &self.p {
            Some(p) => field("p", p)?,
            None => TransferFunction::identity(n_s),
        };
        let n_e = p.rows();
        let n = match &self.n {
            Some(n) => field("n", n)?,
            None => TransferFunction::identity(n_t),
        };
        let w = match &self.w {
            Some(w) => field("w", w)?,
            None => TransferFunction::identity(n_e),
        };
        let grid = FrequencyGrid::new(self.grid.n_points).map_err(|e| Failure::config(format!("at `grid.n_points`: {e}")))?;
        let spec = ProblemSpec {
            s,
            m,
            n,
            w,
            p,
            snr: self.snr,
            n_t,
            grid,
            fir_order: self.solver.fir_order,
        };
        spec.validate_structure().map_err(Failure::input)?;
        Ok(spec)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            ..SolverOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_a_minimal_file() {
        let c = parse("snr = 2.0\ns = { fir = [1.0, 0.5] }\n").unwrap();
        assert_eq!(c.grid.n_points, 4096);
        assert_eq!(c.solver.fir_order, DEFAULT_FIR_ORDER);
        assert_eq!(c.sweep.snr_list.values().len(), 25);
        assert_eq!(c.sweep.delay_list, vec![0, 2, 10]);
        let spec = c.problem().unwrap();
        assert!(spec.is_scalar());
        assert!(spec.p.is_identity());
    }

    #[test]
    fn transfer_functions_round_trip() {
        let text = r#"
snr = 1.0
s = { diagonal = [{ rational = { num = [1.0], den = [1.0, -0.5] } }, { delay = 1 }] }
p = { fir = [[[1.0, 0.0], [0.0, 1.0]], [[0.5, 0.0], [0.0, 0.0]]] }
"#;
        let c = parse(text).unwrap();
        for tf in [&c.s, c.p.as_ref().unwrap()] {
            let built = tf.build().unwrap();
            let again = TfConfig::describe(&built).build().unwrap();
            assert_eq!(built, again);
        }
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = parse("snr = 1.0\ns = { identity = 1 }\n[grid]\npoints = 8\n").unwrap_err();
        assert!(err.message.contains("grid") && err.message.contains("points"), "{}", err.message);
    }
}
