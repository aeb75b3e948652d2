//! End-to-end containment harness.
//!
//! Each trial generates an instance, runs perturbed gradient descent, takes
//! the realized `ε = ‖𝐀ᵀw‖` and achieved `κ`, and checks that the error lies
//! inside the conditional distance bound. The global dual certificate at the
//! same point is checked for feasibility and against `(1−δ)/(1+δ)`.

use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use nalgebra::DMatrix;
use rayon::prelude::*;
use senselab::bounds::{global_report, prior_bound, rip_threshold, BoundInputs, Branch};
use senselab::certify::{build_global_certificate, Construction};
use senselab::linalg;
use senselab::objective::soc_residuals;
use senselab::operator::instance_to_json;
use senselab::rng::derive_seed;
use senselab::solver::{default_init, perturbed_gd};
use senselab::{generate_instance, InstanceSpec, ProblemInstance, SenseError, SolverConfig};
use serde::Serialize;

use crate::gen::NoiseKind;
use crate::output::{row_major, write_json};
use crate::VerificationFailed;

/// Allowed gap in `(1−δ)/(1+δ) ≤ certificate objective`.
pub const SANDWICH_TOL: f64 = 1e-6;
/// Allowed certificate constraint violation.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    #[arg(long, default_value_t = 6)]
    pub r: usize,
    #[arg(long, default_value_t = 2)]
    pub r_star: usize,
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub delta_upper: f64,
    pub eps: f64,
    pub kappa: f64,
    pub err_frob: f64,
    pub sigma_r: f64,
    pub termination: String,
    pub iterations: usize,
    /// `checked`, or `hypothesis_violated` when `δ_upper` is above the RIP threshold.
    pub status: String,
    pub branch1: Option<f64>,
    pub branch2: Option<f64>,
    pub effective: Option<f64>,
    pub contained: Option<bool>,
    pub cert_construction: Option<Construction>,
    pub cert_objective: Option<f64>,
    pub cert_max_residual: Option<f64>,
    pub eta_lower: f64,
    pub sandwich: Option<bool>,
    pub cert_note: Option<String>,
    /// Reference bound for `δ < 1/10`, `r = r*`.
    pub prior_bound: Option<f64>,
}

impl TrialRecord {
    pub fn passed(&self) -> bool {
        self.contained != Some(false)
            && self.sandwich != Some(false)
            && self.cert_max_residual.is_none_or(|r| r <= RESIDUAL_TOL)
    }
}

pub struct TrialOutcome {
    pub record: TrialRecord,
    pub instance: ProblemInstance,
    pub x: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub failed_trials: Vec<usize>,
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub r_star: usize,
    pub sigma: f64,
    pub noise: String,
    pub seed: u64,
    pub grad_tol: f64,
    pub rows: Vec<TrialRecord>,
}

pub fn run_trial(args: &VerifyArgs, trial: usize) -> Result<TrialOutcome> {
    let seed = derive_seed(args.seed, trial as u64);
    let noise = args.noise.model(args.sigma);
    let inst = generate_instance(&InstanceSpec::new(args.n, args.m, args.r, args.r_star, noise, seed))?;
    let config = SolverConfig {
        grad_tol: args.grad_tol,
        max_iters: args.max_iters,
        record_every: 1000,
        seed,
        ..SolverConfig::default()
    };
    let trace = perturbed_gd(&inst, &default_init(&inst, seed), &config)?;
    let x = trace.final_point.x.clone();
    let kappa = soc_residuals(&inst, &x)?.max();
    let eps = inst.realized_eps();
    let delta = inst.operator().gram_spectrum().delta();
    let err_frob = inst.err_frob(&x);
    let sigma_r = linalg::sigma_r(&x);

    let mut record = TrialRecord {
        trial,
        seed,
        delta_upper: delta,
        eps,
        kappa,
        err_frob,
        sigma_r,
        termination: trace.termination.as_str().to_string(),
        iterations: trace.iterations,
        status: "checked".into(),
        branch1: None,
        branch2: None,
        effective: None,
        contained: None,
        cert_construction: None,
        cert_objective: None,
        cert_max_residual: None,
        eta_lower: (1.0 - delta) / (1.0 + delta),
        sandwich: None,
        cert_note: None,
        prior_bound: None,
    };

    if delta < rip_threshold(args.r, args.r_star) {
        let inputs = BoundInputs {
            sigma_r_x: Some(sigma_r),
            ..BoundInputs::new(delta, eps, kappa, args.r, args.r_star, inst.truth().frobenius_norm())
        };
        let report = global_report(&inputs)?;
        record.branch1 = Some(report.branch1);
        record.branch2 = Some(report.branch2);
        record.effective = Some(report.effective);
        debug_assert_ne!(report.chosen, Branch::Max);
        record.contained = Some(err_frob <= report.effective);
    } else {
        record.status = "hypothesis_violated".into();
    }
    if delta < 0.1 && args.r == args.r_star {
        record.prior_bound = Some(prior_bound(args.n as f64, args.m, args.sigma)?.distance);
    }

    match build_global_certificate(&x, inst.truth(), eps, kappa, delta, None) {
        Ok(cert) => {
            let max_res = cert.residuals.values().copied().fold(0.0, f64::max);
            record.cert_construction = Some(cert.construction);
            record.cert_objective = Some(cert.objective);
            record.cert_max_residual = Some(max_res);
            record.sandwich = Some(record.eta_lower <= cert.objective + SANDWICH_TOL);
        }
        Err(e @ (SenseError::Hypothesis(_) | SenseError::Domain(_))) => record.cert_note = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }

    Ok(TrialOutcome { record, instance: inst, x })
}

fn persist_failure(out: &Path, outcome: &TrialOutcome) -> Result<PathBuf> {
    #[derive(Serialize)]
    struct FailedTrial<'a> {
        record: &'a TrialRecord,
        x: Vec<f64>,
        instance: serde_json::Value,
    }
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("verify");
    let path = out.with_file_name(format!("{stem}.trial{}.json", outcome.record.trial));
    let state = FailedTrial {
        record: &outcome.record,
        x: row_major(&outcome.x),
        instance: serde_json::from_str(&instance_to_json(&outcome.instance))?,
    };
    write_json(&path, &state)?;
    Ok(path)
}

pub fn run(args: &VerifyArgs) -> Result<VerifyReport> {
    if args.trials == 0 {
        return Err(crate::UsageError("trials must be at least 1".into()).into());
    }
    let outcomes: Vec<TrialOutcome> = (0..args.trials)
        .into_par_iter()
        .map(|t| run_trial(args, t))
        .collect::<Result<_>>()?;
    let failed: Vec<&TrialOutcome> = outcomes.iter().filter(|o| !o.record.passed()).collect();
    let report = VerifyReport {
        trials: args.trials,
        passed: args.trials - failed.len(),
        pass_rate: (args.trials - failed.len()) as f64 / args.trials as f64,
        failed_trials: failed.iter().map(|o| o.record.trial).collect(),
        n: args.n,
        m: args.m,
        r: args.r,
        r_star: args.r_star,
        sigma: args.sigma,
        noise: format!("{:?}", args.noise).to_lowercase(),
        seed: args.seed,
        grad_tol: args.grad_tol,
        rows: outcomes.iter().map(|o| o.record.clone()).collect(),
    };
    write_json(&args.out, &report)?;
    println!("{}/{} trials passed", report.passed, report.trials);
    if let Some(first) = failed.first() {
        for o in &failed {
            persist_failure(&args.out, o)?;
        }
        return Err(VerificationFailed(format!(
            "{} of {} trials failed (first: trial {})",
            failed.len(),
            args.trials,
            first.record.trial
        ))
        .into());
    }
    Ok(report)
}
