use std::path::{Path, PathBuf};

use jscc_core::baselines::{opta_curve, source_spectrum, sweep};
use jscc_core::codec_synth::{design, validate_design, Certificates, DesignResult, SolveSummary};
use jscc_core::sim::{run_simulation, SimConfig, SimReport};
use serde::{Deserialize, Serialize};

use crate::config::{self, ConfigFile, TfConfig};
use crate::output::{csv, float, to_json, write_file};
use crate::Failure;

pub const SWEEP_HEADER: [&str; 5] = ["snr", "delay", "distortion_linear", "distortion_opta", "converged"];
pub const OPTA_HEADER: [&str; 3] = ["snr", "capacity_nats", "d_min"];

pub struct Context {
    pub config: ConfigFile,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Context {
    pub fn new(config_path: &Path, out: PathBuf, jobs: Option<usize>, seed: Option<u64>) -> Result<Self, Failure> {
        let mut config = config::load(config_path)?;
        if let Some(s) = seed {
            config.sim.seed = s;
        }
        std::fs::create_dir_all(&out)
            .map_err(|e| Failure::runtime(format!("cannot create {}: {e}", out.display())))?;
        let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
        Ok(Self { config, out, jobs })
    }
}

#[derive(Debug, Serialize)]
struct DesignFile<'a> {
    k: TfConfig,
    c: TfConfig,
    d: TfConfig,
    snr: f64,
    fir_order: usize,
    predicted_distortion: f64,
    predicted_power: f64,
    achieved_distortion: f64,
    converged: bool,
    certificates: &'a Certificates,
    solver: &'a Option<SolveSummary>,
}

/// The part of `design.json` needed to rebuild the filters.
#[derive(Debug, Deserialize)]
struct DesignInput {
    k: TfConfig,
    c: TfConfig,
    d: TfConfig,
}

fn summary(r: &DesignResult, snr: f64) -> String {
    let mut lines = Vec::new();
    match &r.solver {
        Some(s) => lines.push(format!(
            "solver: {} after {} iterations, relative gap {:.3e}",
            if s.converged { "converged" } else { "NOT converged" },
            s.iterations,
            s.gap
        )),
        None => lines.push("solver: not run".to_string()),
    }
    lines.push(format!("distortion phi(K):   {:.10e}", r.predicted_distortion));
    lines.push(format!("distortion J(C, D):  {:.10e}", r.achieved_distortion));
    lines.push(format!("power:               {:.10e} (budget {snr:e})", r.predicted_power));
    let c = &r.certificates;
    lines.push(format!("power gap:           {:.3e}", c.power_gap));
    lines.push(format!("factorization gap:   {:.3e}", c.factorization_gap));
    lines.push(format!("J - phi (relative):  {:.3e}", c.duality_gap));
    lines.push(format!("decoder anticausal:  {:.3e}", c.d_anticausal_energy));
    lines.push(format!("truncation energy:   {:.3e}", c.truncation_energy));
    if let Some(el) = c.el_residual {
        lines.push(format!("EL residual:         {el:.3e}"));
    }
    if let Some(n) = c.fit_order {
        lines.push(format!("DD* fit order:       {n} (gap {:.3e})", c.dd_star_gap));
    }
    lines.join("\n") + "\n"
}

pub fn cmd_design(ctx: &Context) -> Result<(), Failure> {
    let spec = ctx.config.problem()?;
    let des = design(&spec, &ctx.config.solver_options()).map_err(Failure::input)?;
    let r = &des.result;
    let file = DesignFile {
        k: TfConfig::describe(&r.k),
        c: TfConfig::describe(&r.c),
        d: TfConfig::describe(&r.d),
        snr: spec.snr,
        fir_order: spec.fir_order,
        predicted_distortion: r.predicted_distortion,
        predicted_power: r.predicted_power,
        achieved_distortion: r.achieved_distortion,
        converged: r.converged(),
        certificates: &r.certificates,
        solver: &r.solver,
    };
    write_file(&ctx.out.join("design.json"), &to_json(&file)?)?;
    let text = summary(r, spec.snr);
    write_file(&ctx.out.join("summary.txt"), &text)?;
    print!("{text}");
    if r.converged() {
        Ok(())
    } else {
        Err(Failure::nonconvergence("solver did not reach its tolerance; design.json is flagged"))
    }
}

pub fn cmd_sweep(ctx: &Context) -> Result<(), Failure> {
    let spec = ctx.config.problem()?;
    let snrs = ctx.config.sweep.snr_list.values();
    let delays = &ctx.config.sweep.delay_list;
    if snrs.is_empty() {
        return Err(Failure::config("at `sweep.snr_list`: the list is empty"));
    }
    if delays.is_empty() {
        return Err(Failure::config("at `sweep.delay_list`: the list is empty"));
    }
    let table = sweep(&spec, &snrs, delays, &ctx.config.solver_options(), ctx.jobs).map_err(Failure::input)?;
    let rows: Vec<Vec<String>> = table
        .records
        .iter()
        .map(|r| {
            vec![
                float(r.snr),
                r.delay.to_string(),
                float(r.distortion_linear),
                float(r.distortion_opta),
                r.converged.to_string(),
            ]
        })
        .collect();
    write_file(&ctx.out.join("sweep.csv"), &csv(&SWEEP_HEADER, &rows))?;
    let failed: Vec<String> = table
        .records
        .iter()
        .filter(|r| r.failed())
        .map(|r| {
            format!(
                "snr {:e}, delay {}: {}",
                r.snr,
                r.delay,
                r.error.clone().unwrap_or_else(|| "not converged".into())
            )
        })
        .collect();
    println!("{} cells written, {} failed", table.records.len(), failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::partial(failed.join("\n")))
    }
}

pub fn cmd_opta(ctx: &Context) -> Result<(), Failure> {
    let spec = ctx.config.problem()?;
    let snrs = ctx.config.sweep.snr_list.values();
    if snrs.is_empty() {
        return Err(Failure::config("at `sweep.snr_list`: the list is empty"));
    }
    let phi = source_spectrum(&spec).map_err(Failure::input)?;
    let curve = opta_curve(&phi, &snrs, spec.n_t).map_err(Failure::input)?;
    let rows: Vec<Vec<String>> = curve
        .records
        .iter()
        .map(|p| vec![float(p.snr), float(p.capacity), float(p.d_min)])
        .collect();
    write_file(&ctx.out.join("opta.csv"), &csv(&OPTA_HEADER, &rows))?;
    println!("{} points written", rows.len());
    Ok(())
}

fn load_design(path: &Path) -> Result<DesignInput, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("cannot read design {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(&mut de)
        .map_err(|e| Failure::config(format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))
}

pub fn cmd_simulate(ctx: &Context, design_path: &Path) -> Result<(), Failure> {
    let spec = ctx.config.problem()?;
    let input = load_design(design_path)?;
    let build = |name: &str, tf: &TfConfig| {
        tf.build().map_err(|e| Failure::config(format!("{}: at `{name}`: {e}", design_path.display())))
    };
    let mut result = DesignResult {
        k: build("k", &input.k)?,
        c: build("c", &input.c)?,
        d: build("d", &input.d)?,
        predicted_distortion: f64::NAN,
        predicted_power: f64::NAN,
        achieved_distortion: f64::NAN,
        certificates: Certificates::default(),
        solver: None,
    };
    let v = validate_design(&result, &spec).map_err(Failure::input)?;
    result.predicted_distortion = v.phi_value;
    result.achieved_distortion = v.j_value;
    result.predicted_power = v.power;
    let cfg = SimConfig::for_spec(&spec, ctx.config.sim.seed).with_samples(ctx.config.sim.n_samples);
    let report: SimReport = run_simulation(&result, &spec, &cfg).map_err(Failure::input)?;
    write_file(&ctx.out.join("sim.json"), &to_json(&report)?)?;
    println!(
        "mse {:.6e} +- {:.2e} (predicted {:.6e}); power {:.6e} +- {:.2e} (predicted {:.6e})",
        report.empirical_mse,
        report.mse_stderr,
        report.predicted_mse,
        report.empirical_power,
        report.power_stderr,
        report.predicted_power
    );
    Ok(())
}
