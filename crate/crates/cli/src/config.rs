//! Experiment configuration, loadable from JSON.
//!
//! The shipped default is the formula-plot regime: `n = 50`, `m = 10`,
//! `‖𝐀‖₂ = 2`, `0.05`-sub-Gaussian noise, `‖M*‖_F = 3.3`, `λ₁ = 1.5`,
//! `λ_{r*} = 1`, search rank 10 with `r* ∈ {10, 2}`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// A `x`-by-probability grid. `x` is `δ` or a target distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    /// `None` runs `x` up to (not including) the hypothesis bound on `δ`.
    #[serde(default)]
    pub x_max: Option<f64>,
    pub x_steps: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub p_steps: usize,
}

impl GridConfig {
    fn validate(&self, name: &str) -> Result<()> {
        if self.x_steps < 2 || self.p_steps < 2 {
            bail!("{name}: grid steps must be at least 2");
        }
        if !(self.p_min > 0.0 && self.p_min < self.p_max && self.p_max < 1.0) {
            bail!("{name}: probability range must satisfy 0 < p_min < p_max < 1");
        }
        if !self.x_min.is_finite() || self.x_min < 0.0 {
            bail!("{name}: x_min must be finite and nonnegative");
        }
        if let Some(hi) = self.x_max {
            if !(hi > self.x_min && hi.is_finite()) {
                bail!("{name}: x_max must exceed x_min");
            }
        }
        Ok(())
    }

    /// Probability levels, both ends included.
    pub fn probs(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.p_steps)
    }
}

pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

/// `steps` points of `[lo, hi)`, the right end excluded.
pub fn half_open(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}

/// A `(r, r*)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ranks {
    pub r: usize,
    pub r_star: usize,
}

/// Parameters of the bound contour experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourConfig {
    pub n: usize,
    pub m: usize,
    pub a_norm: f64,
    pub sigma: f64,
    pub m_star_fro: f64,
    pub lam1: f64,
    pub lam_rstar: f64,
    #[serde(default)]
    pub kappa: f64,
    pub ranks: Vec<Ranks>,
    /// `τ` of the local-bound contour.
    pub tau: f64,
    /// Local `τ` values compared against the global guarantee in delta mode.
    pub delta_taus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub contour: ContourConfig,
    /// `δ` by probability.
    pub grid: GridConfig,
    /// Target distance by probability.
    pub distance_grid: GridConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            contour: ContourConfig {
                n: 50,
                m: 10,
                a_norm: 2.0,
                sigma: 0.05,
                m_star_fro: 3.3,
                lam1: 1.5,
                lam_rstar: 1.0,
                kappa: 0.0,
                ranks: vec![Ranks { r: 10, r_star: 10 }, Ranks { r: 10, r_star: 2 }],
                tau: 0.2,
                delta_taus: vec![0.2, 0.5, 0.8],
            },
            grid: GridConfig {
                x_min: 0.0,
                x_max: None,
                x_steps: 50,
                p_min: 0.01,
                p_max: 0.99,
                p_steps: 50,
            },
            distance_grid: GridConfig {
                x_min: 0.5,
                x_max: Some(20.0),
                x_steps: 50,
                p_min: 0.01,
                p_max: 0.99,
                p_steps: 50,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate("grid")?;
        self.distance_grid.validate("distance_grid")?;
        if self.distance_grid.x_max.is_none() {
            bail!("distance_grid: x_max is required");
        }
        let c = &self.contour;
        if !(c.sigma > 0.0 && c.a_norm > 0.0 && c.m_star_fro > 0.0) {
            bail!("contour: sigma, a_norm and m_star_fro must be positive");
        }
        if !(c.lam1 >= c.lam_rstar && c.lam_rstar > 0.0) {
            bail!("contour: need lam1 >= lam_rstar > 0");
        }
        if c.kappa < 0.0 || c.m == 0 {
            bail!("contour: kappa must be nonnegative and m positive");
        }
        if c.ranks.is_empty() || c.ranks.iter().any(|k| k.r_star == 0 || k.r_star > k.r) {
            bail!("contour: ranks must be nonempty with 1 <= r_star <= r");
        }
        if std::iter::once(c.tau).chain(c.delta_taus.iter().copied()).any(|t| !(t > 0.0 && t < 1.0)) {
            bail!("contour: every tau must lie in (0, 1)");
        }
        Ok(())
    }
}
