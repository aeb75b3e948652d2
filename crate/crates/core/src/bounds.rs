//! Closed-form distance bounds `‖X̂X̂ᵀ − M*‖_F ≤ d` for approximate
//! second-order critical points, and the probability of the noise event
//! `‖𝐀ᵀw‖ ≤ ε` under which they hold.
//!
//! Global guarantees (RIP constant below `1/(1+√(r*/r))`) split on
//! `σ_r(X̂)` against `√((ε+κ/2)/(1+δ))`:
//!
//! * small `σ_r`: `(1−δ)d² ≤ (ε+κ/2)√r·d + (4ε+2κ)√r‖M*‖_F`;
//! * large `σ_r`: `L·d ≤ (2ε+κ)√r* + c₁(√d + ‖M*‖_F^{1/2})`, with
//!   `L = (1−δ)/(1+δ) − √(r*/r)/(2+√(r*/r))` and `c₁ = 2√((2ε+κ)(1+δ))`.
//!
//! Each bound is the positive root of the corresponding quadratic.

use crate::error::{Result, SenseError};
use crate::operator::{NoiseModel, SensingOperator};
use crate::rng::{derive_seed, stream_rng};

/// `1/(1+√(r*/r))`, the largest RIP constant covered by the global bounds.
pub fn rip_threshold(r: usize, r_star: usize) -> f64 {
    1.0 / (1.0 + (r_star as f64 / r as f64).sqrt())
}

/// Positive root of `a x² − b x − c = 0` for `a > 0`, `b, c ≥ 0`.
pub fn positive_root(a: f64, b: f64, c: f64) -> f64 {
    let disc = b * b + 4.0 * a * c;
    (b + disc.sqrt()) / (2.0 * a)
}

fn check_common(delta: f64, eps: f64, kappa: f64) -> Result<()> {
    if !(0.0..1.0).contains(&delta) {
        return Err(SenseError::Parameter(format!("δ must lie in [0, 1), got {delta}")));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(SenseError::Parameter(format!("ε must be finite and >= 0, got {eps}")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(SenseError::Parameter(format!("κ must be finite and >= 0, got {kappa}")));
    }
    Ok(())
}

fn check_ranks(r: usize, r_star: usize) -> Result<()> {
    if r_star == 0 || r < r_star {
        return Err(SenseError::Parameter(format!("ranks must satisfy r >= r_star >= 1, got r={r}, r_star={r_star}")));
    }
    Ok(())
}

fn check_norm(m_star_fro: f64) -> Result<()> {
    if !(m_star_fro.is_finite() && m_star_fro >= 0.0) {
        return Err(SenseError::Parameter(format!("‖M*‖_F must be finite and >= 0, got {m_star_fro}")));
    }
    Ok(())
}

/// `√((ε+κ/2)/(1+δ))`, the `σ_r(X̂)` level that selects the branch.
pub fn branch_threshold(delta: f64, eps: f64, kappa: f64) -> f64 {
    ((eps + 0.5 * kappa) / (1.0 + delta)).sqrt()
}

fn branch1_coeffs(delta: f64, eps: f64, kappa: f64, r: usize, m_star_fro: f64) -> (f64, f64, f64) {
    let sr = (r as f64).sqrt();
    let a = 1.0 - delta;
    let b = (eps + 0.5 * kappa) * sr;
    let c = (4.0 * eps + 2.0 * kappa) * sr * m_star_fro;
    (a, b, c)
}

/// Small-`σ_r` bound: positive root of `(1−δ)d² − (ε+κ/2)√r·d − (4ε+2κ)√r‖M*‖_F = 0`.
pub fn global_branch1(delta: f64, eps: f64, kappa: f64, r: usize, m_star_fro: f64) -> Result<f64> {
    check_common(delta, eps, kappa)?;
    check_norm(m_star_fro)?;
    if r == 0 {
        return Err(SenseError::Parameter("r must be positive".into()));
    }
    let (a, b, c) = branch1_coeffs(delta, eps, kappa, r, m_star_fro);
    Ok(positive_root(a, b, c))
}

/// The same bound with a minus sign in front of `4ac` under the radical.
/// Defined only when that radicand is nonnegative; reported next to
/// [`global_branch1`] for comparison, never used for decisions.
pub fn global_branch1_minus_form(delta: f64, eps: f64, kappa: f64, r: usize, m_star_fro: f64) -> Result<Option<f64>> {
    check_common(delta, eps, kappa)?;
    check_norm(m_star_fro)?;
    let (a, b, c) = branch1_coeffs(delta, eps, kappa, r, m_star_fro);
    let rad = b * b - 4.0 * a * c;
    Ok((rad >= 0.0).then(|| (b + rad.sqrt()) / (2.0 * a)))
}

/// Coefficients `(L, c₁, c₀)` of `L s² − c₁ s − c₀ ≤ 0` in `s = d^{1/2}`.
pub fn branch2_coeffs(delta: f64, eps: f64, kappa: f64, r: usize, r_star: usize, m_star_fro: f64) -> (f64, f64, f64) {
    let q = (r_star as f64 / r as f64).sqrt();
    let l = (1.0 - delta) / (1.0 + delta) - q / (2.0 + q);
    let t = 2.0 * eps + kappa;
    let c1 = 2.0 * (t * (1.0 + delta)).sqrt();
    let c0 = t * (r_star as f64).sqrt() + c1 * m_star_fro.sqrt();
    (l, c1, c0)
}

/// Large-`σ_r` bound `d = s²`, `s` the positive root of `L s² − c₁ s − c₀ = 0`.
pub fn global_branch2(delta: f64, eps: f64, kappa: f64, r: usize, r_star: usize, m_star_fro: f64) -> Result<f64> {
    check_common(delta, eps, kappa)?;
    check_ranks(r, r_star)?;
    check_norm(m_star_fro)?;
    let (l, c1, c0) = branch2_coeffs(delta, eps, kappa, r, r_star, m_star_fro);
    if delta >= rip_threshold(r, r_star) || l <= 0.0 {
        return Err(SenseError::Hypothesis(format!(
            "δ = {delta} is not below the RIP threshold 1/(1+√(r*/r)) = {}",
            rip_threshold(r, r_star)
        )));
    }
    let s = positive_root(l, c1, c0);
    Ok(s * s)
}

/// Rank-one bound `3(1+√2)ε(1+δ)/(1−2δ)`.
pub fn rank1_bound(delta: f64, eps: f64) -> Result<f64> {
    check_common(delta, eps, 0.0)?;
    if delta >= 0.5 {
        return Err(SenseError::Hypothesis(format!("rank-one bound needs δ < 1/2, got {delta}")));
    }
    Ok(3.0 * (1.0 + std::f64::consts::SQRT_2) * eps * (1.0 + delta) / (1.0 - 2.0 * delta))
}

/// `C(τ, M*) = √(2(λ₁ + τλ_{r*}))`.
pub fn c_tau(tau: f64, lam1: f64, lam_rstar: f64) -> f64 {
    (2.0 * (lam1 + tau * lam_rstar)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBound {
    /// `τ λ_{r*}(M*)`: radius of the region the guarantee covers.
    pub outer_radius: f64,
    /// Small-`σ_r` inner radius.
    pub inner1: f64,
    /// Large-`σ_r` inner radius `√ε(1+δ)^{3/2} C(τ,M*)/(√(1−τ) − δ)`.
    pub inner2: f64,
    pub c_tau: f64,
}

impl LocalBound {
    pub fn inner(&self) -> f64 {
        self.inner1.max(self.inner2)
    }
}

/// Local guarantee: no local minimizer with `inner < ‖X̂X̂ᵀ − M*‖_F ≤ outer`.
pub fn local_bound(
    delta: f64,
    eps: f64,
    tau: f64,
    lam1: f64,
    lam_rstar: f64,
    r: usize,
    m_star_fro: f64,
) -> Result<LocalBound> {
    check_common(delta, eps, 0.0)?;
    check_norm(m_star_fro)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SenseError::Parameter(format!("τ must lie in (0, 1), got {tau}")));
    }
    if !(lam_rstar > 0.0 && lam1 >= lam_rstar && lam1.is_finite()) {
        return Err(SenseError::Parameter(format!(
            "eigenvalues must satisfy λ₁ >= λ_r* > 0, got {lam1}, {lam_rstar}"
        )));
    }
    let root = (1.0 - tau).sqrt();
    if delta >= root {
        return Err(SenseError::Hypothesis(format!("local bound needs δ < √(1−τ) = {root}, got {delta}")));
    }
    let c = c_tau(tau, lam1, lam_rstar);
    Ok(LocalBound {
        outer_radius: tau * lam_rstar,
        inner1: global_branch1(delta, eps, 0.0, r, m_star_fro)?,
        inner2: eps.sqrt() * (1.0 + delta).powf(1.5) * c / (root - delta),
        c_tau: c,
    })
}

/// Which branch an effective bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    One,
    Two,
    /// `σ_r(X̂)` unknown: the larger of both branches.
    Max,
}

/// All inputs a bound evaluation may need.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub delta: f64,
    pub eps: f64,
    pub kappa: f64,
    pub r: usize,
    pub r_star: usize,
    pub m_star_fro: f64,
    pub lam1: f64,
    pub lam_rstar: f64,
    pub tau: Option<f64>,
    pub sigma_r_x: Option<f64>,
}

impl BoundInputs {
    pub fn new(delta: f64, eps: f64, kappa: f64, r: usize, r_star: usize, m_star_fro: f64) -> Self {
        Self {
            delta,
            eps,
            kappa,
            r,
            r_star,
            m_star_fro,
            lam1: 0.0,
            lam_rstar: 0.0,
            tau: None,
            sigma_r_x: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub branch_threshold: f64,
    pub branch1: f64,
    /// Minus-sign variant of branch 1 when its radicand is nonnegative.
    pub branch1_minus_form: Option<f64>,
    pub branch2: f64,
    pub effective: f64,
    pub chosen: Branch,
    pub event_prob_lower: Option<f64>,
}

impl BoundReport {
    /// Attaches the sub-Gaussian lower bound on `ℙ(‖𝐀ᵀw‖ ≤ ε)`.
    pub fn with_event_prob(mut self, sigma: f64, m: usize, a_norm: f64) -> Result<Self> {
        self.event_prob_lower = Some(noise_event_prob(sigma, m, a_norm, self.inputs.eps)?);
        Ok(self)
    }
}

fn choose(threshold: f64, sigma_r_x: Option<f64>, b1: f64, b2: f64) -> (f64, Branch) {
    match sigma_r_x {
        Some(s) if s <= threshold => (b1, Branch::One),
        Some(_) => (b2, Branch::Two),
        None => (b1.max(b2), Branch::Max),
    }
}

/// Both global branches, with the effective one picked by `σ_r(X̂)`.
pub fn global_report(inputs: &BoundInputs) -> Result<BoundReport> {
    let BoundInputs {
        delta,
        eps,
        kappa,
        r,
        r_star,
        m_star_fro,
        sigma_r_x,
        ..
    } = *inputs;
    let branch1 = global_branch1(delta, eps, kappa, r, m_star_fro)?;
    let branch2 = global_branch2(delta, eps, kappa, r, r_star, m_star_fro)?;
    let threshold = branch_threshold(delta, eps, kappa);
    let (effective, chosen) = choose(threshold, sigma_r_x, branch1, branch2);
    Ok(BoundReport {
        inputs: *inputs,
        branch_threshold: threshold,
        branch1,
        branch1_minus_form: global_branch1_minus_form(delta, eps, kappa, r, m_star_fro)?,
        branch2,
        effective,
        chosen,
        event_prob_lower: None,
    })
}

/// Local guarantee with the inner radius picked by `σ_r(X̂)` against `√(ε/(1+δ))`.
pub fn local_report(inputs: &BoundInputs) -> Result<(LocalBound, f64, Branch)> {
    let tau = inputs
        .tau
        .ok_or_else(|| SenseError::Parameter("local bound requires τ".into()))?;
    let lb = local_bound(
        inputs.delta,
        inputs.eps,
        tau,
        inputs.lam1,
        inputs.lam_rstar,
        inputs.r,
        inputs.m_star_fro,
    )?;
    let threshold = branch_threshold(inputs.delta, inputs.eps, 0.0);
    let (inner, branch) = choose(threshold, inputs.sigma_r_x, lb.inner1, lb.inner2);
    Ok((lb, inner, branch))
}

/// Sub-Gaussian lower bound `max(0, 1 − 2exp(−w₀²/(16mσ²)))`, `w₀ = ε/‖𝐀‖₂`.
pub fn noise_event_prob(sigma: f64, m: usize, a_norm: f64, eps: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SenseError::Parameter(format!("σ must be positive, got {sigma}")));
    }
    if !(a_norm > 0.0 && a_norm.is_finite()) || m == 0 {
        return Err(SenseError::Parameter("‖𝐀‖₂ and m must be positive".into()));
    }
    if eps.is_nan() || eps < 0.0 {
        return Err(SenseError::Parameter(format!("ε must be >= 0, got {eps}")));
    }
    if eps.is_infinite() {
        return Ok(1.0);
    }
    let w0 = eps / a_norm;
    let p = 1.0 - 2.0 * (-(w0 * w0) / (16.0 * m as f64 * sigma * sigma)).exp();
    Ok(p.clamp(0.0, 1.0))
}

/// Noise level `ε` at which [`noise_event_prob`] equals `p`.
pub fn invert_eps(sigma: f64, m: usize, a_norm: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(SenseError::Parameter(format!("probability must lie in (0, 1), got {p}")));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(SenseError::Parameter(format!("σ must be positive, got {sigma}")));
    }
    if !(a_norm > 0.0 && a_norm.is_finite()) || m == 0 {
        return Err(SenseError::Parameter("‖𝐀‖₂ and m must be positive".into()));
    }
    Ok(a_norm * (16.0 * m as f64 * sigma * sigma * (2.0 / (1.0 - p)).ln()).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    /// 95% normal-approximation halfwidth `1.96√(p̂(1−p̂)/trials)`.
    pub halfwidth: f64,
    pub trials: usize,
}

/// Empirical `ℙ(‖𝐀ᵀw‖ ≤ ε)` over `trials` fresh noise draws.
pub fn noise_event_prob_mc(
    op: &SensingOperator,
    noise: &NoiseModel,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<McEstimate> {
    if trials == 0 {
        return Err(SenseError::Parameter("trials must be positive".into()));
    }
    let hits = if eps == f64::INFINITY {
        trials
    } else {
        let mut hits = 0;
        for t in 0..trials {
            let mut rng = stream_rng(derive_seed(seed, t as u64), 0);
            let w = noise.sample(&mut rng, op.m());
            if op.adjoint_vec(&w)?.norm() <= eps {
                hits += 1;
            }
        }
        hits
    };
    let p_hat = hits as f64 / trials as f64;
    Ok(McEstimate {
        p_hat,
        halfwidth: 1.96 * (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        trials,
    })
}

/// Earlier-work comparison bound for the exact-parametrized regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorBound {
    /// `20√(ln n / m)·σ_w`.
    pub distance: f64,
    /// `1 − 10/n²`.
    pub probability: f64,
    pub hypothesis: &'static str,
}

pub fn prior_bound(n: f64, m: usize, sigma_w: f64) -> Result<PriorBound> {
    if !(n >= 1.0) || m == 0 {
        return Err(SenseError::Parameter("n and m must be at least 1".into()));
    }
    Ok(PriorBound {
        distance: 20.0 * (n.ln() / m as f64).sqrt() * sigma_w,
        probability: 1.0 - 10.0 / (n * n),
        hypothesis: "δ < 1/10, r = r*",
    })
}

/// Which guarantee a RIP requirement is computed for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Guarantee {
    Global,
    Local { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RequiredDelta {
    /// Largest `δ` in the hypothesis region with bound `≤ target` (0 when infeasible).
    pub delta_max: f64,
    /// Even `δ = 0` gives a bound above the target.
    pub infeasible: bool,
    /// Supremum of the hypothesis region.
    pub delta_sup: f64,
}

/// Bound used by [`required_delta`] as a function of `δ`.
pub fn bound_at_delta(delta: f64, inputs: &BoundInputs, guarantee: Guarantee, branch: Branch) -> Result<f64> {
    let pick = |b1: f64, b2: f64| match branch {
        Branch::One => b1,
        Branch::Two => b2,
        Branch::Max => b1.max(b2),
    };
    match guarantee {
        Guarantee::Global => {
            let b1 = global_branch1(delta, inputs.eps, inputs.kappa, inputs.r, inputs.m_star_fro)?;
            let b2 = global_branch2(delta, inputs.eps, inputs.kappa, inputs.r, inputs.r_star, inputs.m_star_fro)?;
            Ok(pick(b1, b2))
        }
        Guarantee::Local { tau } => {
            let lb = local_bound(delta, inputs.eps, tau, inputs.lam1, inputs.lam_rstar, inputs.r, inputs.m_star_fro)?;
            Ok(pick(lb.inner1, lb.inner2))
        }
    }
}

/// Largest `δ` whose bound stays within `target`, by bisection on the
/// hypothesis region `[0, 1/(1+√(r*/r)))` (global) or `[0, √(1−τ))` (local).
pub fn required_delta(
    target: f64,
    eps: f64,
    inputs: &BoundInputs,
    guarantee: Guarantee,
    branch: Branch,
) -> Result<RequiredDelta> {
    if !(target > 0.0) {
        return Err(SenseError::Parameter(format!("target distance must be positive, got {target}")));
    }
    let inputs = BoundInputs { eps, ..*inputs };
    let delta_sup = match guarantee {
        Guarantee::Global => rip_threshold(inputs.r, inputs.r_star),
        Guarantee::Local { tau } => {
            if !(tau > 0.0 && tau < 1.0) {
                return Err(SenseError::Parameter(format!("τ must lie in (0, 1), got {tau}")));
            }
            (1.0 - tau).sqrt()
        }
    };
    let f = |d: f64| bound_at_delta(d, &inputs, guarantee, branch);

    const PROBES: usize = 16;
    let mut prev = f(0.0)?;
    for i in 1..PROBES {
        let d = delta_sup * i as f64 / PROBES as f64;
        let v = f(d)?;
        if v < prev * (1.0 - 1e-12) - 1e-300 {
            return Err(SenseError::Consistency(format!(
                "bound decreases in δ between {} and {d} ({prev} -> {v})",
                delta_sup * (i - 1) as f64 / PROBES as f64
            )));
        }
        prev = v;
    }

    if f(0.0)? > target {
        return Ok(RequiredDelta {
            delta_max: 0.0,
            infeasible: true,
            delta_sup,
        });
    }
    let mut lo = 0.0;
    let mut hi = delta_sup;
    let top = delta_sup * (1.0 - 1e-12);
    if f(top)? <= target {
        return Ok(RequiredDelta {
            delta_max: top,
            infeasible: false,
            delta_sup,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 {
            break;
        }
    }
    Ok(RequiredDelta {
        delta_max: lo,
        infeasible: false,
        delta_sup,
    })
}
