//! Bound grids over (`δ` or target distance) × probability.
//!
//! Every cell maps a probability `p` to the noise level `ε` with
//! `ℙ(‖𝐀ᵀw‖ ≤ ε) ≥ p` and evaluates the bounds at that `ε`. Cells outside a
//! bound's hypotheses keep their row with empty values and a reason.

use std::fmt::Write as _;

use anyhow::Result;
use rayon::prelude::*;
use senselab::bounds::{
    global_branch1, global_branch2, invert_eps, local_bound, required_delta, rip_threshold, BoundInputs, Branch,
    Guarantee,
};

use crate::config::{half_open, linspace, ExperimentConfig, GridConfig, Ranks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    /// Both global branches against `δ`.
    Global,
    /// Both local inner radii against `δ`.
    Local,
    /// Largest admissible `δ` against a target distance.
    Delta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourRow {
    pub x: f64,
    pub prob: f64,
    pub eps: f64,
    pub values: Vec<Option<f64>>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContourTable {
    /// File name, e.g. `global_r10_rs2.csv`.
    pub name: String,
    /// Names of the value columns following `x,prob,eps`.
    pub columns: Vec<&'static str>,
    pub rows: Vec<ContourRow>,
}

impl ContourTable {
    pub fn to_csv(&self) -> String {
        let mut out = format!("x,prob,eps,{},reason\n", self.columns.join(","));
        for row in &self.rows {
            write!(out, "{},{},{}", row.x, row.prob, row.eps).unwrap();
            for v in &row.values {
                match v {
                    Some(v) => write!(out, ",{v}").unwrap(),
                    None => out.push(','),
                }
            }
            writeln!(out, ",{}", row.reason).unwrap();
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.values[idx]).collect())
    }
}

fn x_values(grid: &GridConfig, sup: f64) -> Vec<f64> {
    match grid.x_max {
        Some(hi) => linspace(grid.x_min, hi, grid.x_steps),
        None => half_open(grid.x_min, sup, grid.x_steps),
    }
}

/// Evaluates `cell` on every (p, x) pair; rows are ordered by `p`, then `x`.
fn sweep<F>(grid: &GridConfig, xs: &[f64], cfg: &ExperimentConfig, cell: F) -> Result<Vec<ContourRow>>
where
    F: Fn(f64, f64) -> (Vec<Option<f64>>, String) + Sync,
{
    let c = &cfg.contour;
    let cells: Vec<(f64, f64)> = grid
        .probs()
        .into_iter()
        .flat_map(|p| xs.iter().map(move |&x| (p, x)))
        .collect();
    cells
        .par_iter()
        .map(|&(p, x)| {
            let eps = invert_eps(c.sigma, c.m, c.a_norm, p)?;
            let (values, reason) = cell(x, eps);
            Ok(ContourRow {
                x,
                prob: p,
                eps,
                values,
                reason,
            })
        })
        .collect()
}

fn tag(ranks: Ranks) -> String {
    format!("r{}_rs{}", ranks.r, ranks.r_star)
}

fn reason_of(e: &senselab::SenseError) -> String {
    e.to_string().replace(',', ";")
}

fn inputs(cfg: &ExperimentConfig, ranks: Ranks, eps: f64) -> BoundInputs {
    let c = &cfg.contour;
    BoundInputs {
        lam1: c.lam1,
        lam_rstar: c.lam_rstar,
        ..BoundInputs::new(0.0, eps, c.kappa, ranks.r, ranks.r_star, c.m_star_fro)
    }
}

fn global_table(cfg: &ExperimentConfig, ranks: Ranks) -> Result<ContourTable> {
    let c = &cfg.contour;
    let xs = x_values(&cfg.grid, rip_threshold(ranks.r, ranks.r_star));
    let rows = sweep(&cfg.grid, &xs, cfg, |delta, eps| {
        let b1 = global_branch1(delta, eps, c.kappa, ranks.r, c.m_star_fro);
        let b2 = global_branch2(delta, eps, c.kappa, ranks.r, ranks.r_star, c.m_star_fro);
        match (b1, b2) {
            (Ok(b1), Ok(b2)) => (vec![Some(b1), Some(b2), Some(b1.max(b2))], String::new()),
            (Ok(b1), Err(e)) => (vec![Some(b1), None, None], reason_of(&e)),
            (Err(e), _) => (vec![None, None, None], reason_of(&e)),
        }
    })?;
    Ok(ContourTable {
        name: format!("global_{}.csv", tag(ranks)),
        columns: vec!["branch1", "branch2", "effective"],
        rows,
    })
}

fn local_table(cfg: &ExperimentConfig, ranks: Ranks) -> Result<ContourTable> {
    let c = &cfg.contour;
    let xs = x_values(&cfg.grid, (1.0 - c.tau).sqrt());
    let rows = sweep(&cfg.grid, &xs, cfg, |delta, eps| {
        match local_bound(delta, eps, c.tau, c.lam1, c.lam_rstar, ranks.r, c.m_star_fro) {
            Ok(lb) => (vec![Some(lb.inner1), Some(lb.inner2), Some(lb.inner())], String::new()),
            Err(e) => (vec![None, None, None], reason_of(&e)),
        }
    })?;
    Ok(ContourTable {
        name: format!("local_tau{}_{}.csv", c.tau, tag(ranks)),
        columns: vec!["branch1", "branch2", "effective"],
        rows,
    })
}

fn delta_table(cfg: &ExperimentConfig, ranks: Ranks, guarantee: Guarantee) -> Result<ContourTable> {
    let grid = &cfg.distance_grid;
    let xs = x_values(grid, f64::NAN);
    let rows = sweep(grid, &xs, cfg, |target, eps| {
        match required_delta(target, eps, &inputs(cfg, ranks, eps), guarantee, Branch::Max) {
            Ok(rd) if rd.infeasible => (vec![None], "bound at delta = 0 exceeds the target".into()),
            Ok(rd) => (vec![Some(rd.delta_max)], String::new()),
            Err(e) => (vec![None], reason_of(&e)),
        }
    })?;
    let name = match guarantee {
        Guarantee::Global => format!("delta_global_{}.csv", tag(ranks)),
        Guarantee::Local { tau } => format!("delta_local_tau{tau}_{}.csv", tag(ranks)),
    };
    Ok(ContourTable {
        name,
        columns: vec!["delta_max"],
        rows,
    })
}

/// All tables of one figure, one per rank pair (and per `τ` in delta mode).
pub fn contour_tables(figure: Figure, cfg: &ExperimentConfig) -> Result<Vec<ContourTable>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &ranks in &cfg.contour.ranks {
        match figure {
            Figure::Global => out.push(global_table(cfg, ranks)?),
            Figure::Local => out.push(local_table(cfg, ranks)?),
            Figure::Delta => {
                out.push(delta_table(cfg, ranks, Guarantee::Global)?);
                for &tau in &cfg.contour.delta_taus {
                    out.push(delta_table(cfg, ranks, Guarantee::Local { tau })?);
                }
            }
        }
    }
    Ok(out)
}
