use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use nalgebra::DMatrix;
use senselab::objective::soc_residuals;
use senselab::solver::{default_init, gradient_descent, perturbed_gd};
use senselab::{load_instance, IterTrace, ProblemInstance, SenseError, SolverConfig, StepSize};
use serde::{Deserialize, Serialize};

use crate::output::{from_row_major, row_major, write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algo {
    Gd,
    Pgd,
}

fn parse_step(s: &str) -> std::result::Result<StepSize, String> {
    if s == "auto" {
        return Ok(StepSize::Auto);
    }
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(StepSize::Fixed(v)),
        _ => Err(format!("expected `auto` or a positive number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "pgd")]
    pub algo: Algo,
    /// `auto` or a fixed positive step.
    #[arg(long, default_value = "auto", value_parser = parse_step)]
    pub step: StepSize,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long)]
    pub perturb_radius: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub trace_out: PathBuf,
    #[arg(long)]
    pub solution_out: PathBuf,
}

impl SolveArgs {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            step_size: self.step,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            perturb_radius: self.perturb_radius,
            record_every: self.record_every,
            seed: self.seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocFile {
    pub kappa_grad: f64,
    pub kappa_eig: f64,
    pub hess_min_eig: f64,
}

/// Final point of a run. Only `n`, `r` and `x` are needed to read it back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub n: usize,
    pub r: usize,
    /// Row-major `n x r` factor.
    pub x: Vec<f64>,
    #[serde(default)]
    pub termination: Option<String>,
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub step_size: Option<f64>,
    #[serde(default)]
    pub soc: Option<SocFile>,
    #[serde(default)]
    pub realized_eps: Option<f64>,
    #[serde(default)]
    pub err_frob: Option<f64>,
}

impl SolutionFile {
    pub fn from_trace(inst: &ProblemInstance, trace: &IterTrace) -> Result<Self> {
        let x = &trace.final_point.x;
        let soc = soc_residuals(inst, x)?;
        Ok(Self {
            n: x.nrows(),
            r: x.ncols(),
            x: row_major(x),
            termination: Some(trace.termination.as_str().to_string()),
            iterations: Some(trace.iterations),
            step_size: Some(trace.step_size),
            soc: Some(SocFile {
                kappa_grad: soc.kappa_grad,
                kappa_eig: soc.kappa_eig,
                hess_min_eig: soc.hess_min_eig,
            }),
            realized_eps: Some(inst.realized_eps()),
            err_frob: Some(inst.err_frob(x)),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let sol: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        if sol.x.len() != sol.n * sol.r {
            anyhow::bail!("solution x has {} entries, expected n*r = {}", sol.x.len(), sol.n * sol.r);
        }
        Ok(sol)
    }

    pub fn factor(&self) -> DMatrix<f64> {
        from_row_major(self.n, self.r, &self.x)
    }
}

pub fn run(args: &SolveArgs) -> Result<()> {
    let inst = load_instance(&args.instance).with_context(|| format!("loading {}", args.instance.display()))?;
    let config = args.solver_config();
    let x0 = default_init(&inst, args.seed);
    let result = match args.algo {
        Algo::Gd => gradient_descent(&inst, &x0, &config),
        Algo::Pgd => perturbed_gd(&inst, &x0, &config),
    };
    let trace = match result {
        Ok(trace) => trace,
        Err(err) => {
            if let SenseError::Divergence { trace, .. } = &err {
                write_atomic(&args.trace_out, &trace.to_csv())?;
            }
            return Err(err.into());
        }
    };
    write_atomic(&args.trace_out, &trace.to_csv())?;
    let solution = SolutionFile::from_trace(&inst, &trace)?;
    write_json(&args.solution_out, &solution)?;
    println!(
        "{} iterations, termination {}, err_frob {:e}",
        trace.iterations,
        trace.termination.as_str(),
        inst.err_frob(&trace.final_point.x)
    );
    Ok(())
}
