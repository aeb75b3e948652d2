use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use senselab::operator::estimate_rip;
use senselab::{generate_instance, save_instance, InstanceSpec, NoiseModel};

use crate::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Gaussian,
    Subg,
    None,
}

impl NoiseKind {
    /// A zero `sigma` always means noiseless.
    pub fn model(self, sigma: f64) -> NoiseModel {
        match self {
            _ if sigma == 0.0 => NoiseModel::None,
            NoiseKind::Gaussian => NoiseModel::Gaussian { sigma },
            NoiseKind::Subg => NoiseModel::SubGaussian { sigma },
            NoiseKind::None => NoiseModel::None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub r_star: usize,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: NoiseKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random rank-`g` samples for the lower RIP estimate.
    #[arg(long, default_value_t = 200)]
    pub rip_trials: usize,
    #[arg(long)]
    pub out: PathBuf,
}

impl GenArgs {
    pub fn spec(&self) -> Result<InstanceSpec> {
        if self.n == 0 || self.m == 0 {
            return Err(UsageError("n and m must be positive".into()).into());
        }
        if self.r_star == 0 || self.r_star > self.r || self.r > self.n {
            return Err(UsageError(format!(
                "ranks must satisfy 1 <= r-star <= r <= n, got r-star = {}, r = {}, n = {}",
                self.r_star, self.r, self.n
            ))
            .into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(UsageError(format!("sigma must be finite and >= 0, got {}", self.sigma)).into());
        }
        Ok(InstanceSpec::new(self.n, self.m, self.r, self.r_star, self.noise.model(self.sigma), self.seed))
    }
}

pub fn run(args: &GenArgs) -> Result<()> {
    let inst = generate_instance(&args.spec()?)?;
    save_instance(&inst, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let g = (args.r + args.r_star).min(args.n);
    let rip = estimate_rip(inst.operator(), g, args.rip_trials, args.seed)?;
    println!(
        "rank-{g} RIP: delta in [{:.4}, {:.4}] ({} samples); realized ‖Aᵀw‖ = {:e}",
        rip.delta_lower,
        rip.delta_upper,
        rip.trials,
        inst.realized_eps()
    );
    Ok(())
}
