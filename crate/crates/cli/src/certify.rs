use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use senselab::certify::{
    align_decompose, build_global_certificate, build_local_certificate, check_necessary, CertificateReport,
    NecessaryCheck,
};
use senselab::load_instance;
use serde::Serialize;

use crate::output::write_json;
use crate::solve::SolutionFile;
use crate::UsageError;

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub solution: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Relative radius of the local ball; the local certificate is built
    /// only inside it.
    #[arg(long, default_value_t = 0.2)]
    pub tau: f64,
    /// Second-order tolerance `κ`. Defaults to the residuals stored in the
    /// solution file, or 0 when it has none.
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyOutput {
    #[serde(flatten)]
    pub global: CertificateReport,
    pub eps: f64,
    pub kappa: f64,
    pub delta_upper: f64,
    pub err_frob: f64,
    pub necessary: NecessaryCheck,
    /// `(1−δ)/(1+δ) ≤ objective` up to `1e-6`.
    pub sandwich_holds: bool,
    pub local: Option<CertificateReport>,
}

pub fn run(args: &CertifyArgs) -> Result<CertifyOutput> {
    if !(args.tau > 0.0 && args.tau < 1.0) {
        return Err(UsageError(format!("tau must lie in (0, 1), got {}", args.tau)).into());
    }
    let inst = load_instance(&args.instance).with_context(|| format!("loading {}", args.instance.display()))?;
    let sol = SolutionFile::load(&args.solution).map_err(|e| UsageError(format!("{e:#}")))?;
    if sol.n != inst.n() || sol.r != inst.r() {
        return Err(UsageError(format!(
            "solution is {}x{} but the instance expects {}x{}",
            sol.n,
            sol.r,
            inst.n(),
            inst.r()
        ))
        .into());
    }
    let x = sol.factor();
    let kappa = match (args.kappa, &sol.soc) {
        (Some(k), _) if k >= 0.0 && k.is_finite() => k,
        (Some(k), _) => return Err(UsageError(format!("kappa must be finite and >= 0, got {k}")).into()),
        (None, Some(soc)) => soc.kappa_grad.max(soc.kappa_eig),
        (None, None) => 0.0,
    };
    let eps = inst.realized_eps();
    let delta = inst.operator().gram_spectrum().delta();

    let necessary = check_necessary(&inst, &x, kappa, eps)?;
    let stats = align_decompose(&x, inst.truth())?;
    let cert = build_global_certificate(&x, inst.truth(), eps, kappa, delta, None)?;
    let global = CertificateReport::new(&cert, &stats, delta)?;
    let local = if stats.e_norm <= args.tau * inst.truth().lambda_min_nonzero() {
        let lc = build_local_certificate(&x, inst.truth(), eps, args.tau)?;
        Some(CertificateReport::new(&lc, &stats, delta)?)
    } else {
        None
    };
    let out = CertifyOutput {
        sandwich_holds: global.eta_lower <= global.objective + crate::verify::SANDWICH_TOL,
        global,
        eps,
        kappa,
        delta_upper: delta,
        err_frob: inst.err_frob(&x),
        necessary,
        local,
    };
    write_json(&args.out, &out)?;
    println!(
        "{} certificate: objective {:.6}, lower {:.6}, max residual {:e}",
        out.global.construction.as_str(),
        out.global.objective,
        out.global.eta_lower,
        out.global.max_residual()
    );
    Ok(out)
}
