//! Gradient descent and perturbed gradient descent on the factorized objective.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SenseError};
use crate::linalg;
use crate::objective::{grad_residual, FactorPoint, Objective, SocResiduals, EIG_TOL};
use crate::operator::ProblemInstance;
use crate::rng::{derive_seed, gaussian_matrix, stream_rng, uniform_ball};

const INIT_STREAM: u64 = 3;
const PERTURB_STREAM: u64 = 4;
const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `η = 0.25 / L̂` with the smoothness surrogate
    /// `L̂ = (1 + δ_upper)(3‖X‖₂² + ‖mat_s(𝐀ᵀ(b − w))‖_F)`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub step_size: StepSize,
    pub max_iters: usize,
    /// Target `κ` for both second-order residuals.
    pub grad_tol: f64,
    /// Radius of the Frobenius-ball perturbation; `None` means `grad_tol`.
    pub perturb_radius: Option<f64>,
    pub perturb_interval: usize,
    pub eig_check_interval: usize,
    /// Keep every `record_every`-th iteration in the trace (the first and
    /// last iterations are always kept).
    pub record_every: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: StepSize::Auto,
            max_iters: 50_000,
            grad_tol: 1e-6,
            perturb_radius: None,
            perturb_interval: 50,
            eig_check_interval: 25,
            record_every: 1,
            seed: 0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if let StepSize::Fixed(eta) = self.step_size {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(SenseError::Parameter(format!("step size must be positive, got {eta}")));
            }
        }
        if !(self.grad_tol.is_finite() && self.grad_tol >= 0.0) {
            return Err(SenseError::Parameter(format!("grad_tol must be >= 0, got {}", self.grad_tol)));
        }
        if let Some(r) = self.perturb_radius {
            if !(r.is_finite() && r >= 0.0) {
                return Err(SenseError::Parameter(format!("perturb_radius must be >= 0, got {r}")));
            }
        }
        if self.record_every == 0 || self.eig_check_interval == 0 {
            return Err(SenseError::Parameter("record_every and eig_check_interval must be positive".into()));
        }
        Ok(())
    }

    pub fn radius(&self) -> f64 {
        self.perturb_radius.unwrap_or(self.grad_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub loss: f64,
    pub grad_norm: f64,
    /// `‖X_k X_kᵀ − M*‖_F`.
    pub err_frob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `κ_grad ≤ grad_tol` (plain gradient descent).
    GradTol,
    /// Both second-order residuals `≤ grad_tol`.
    SecondOrder,
    MaxIters,
    Diverged,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GradTol => "grad_tol",
            Termination::SecondOrder => "second_order",
            Termination::MaxIters => "max_iters",
            Termination::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterTrace {
    pub records: Vec<IterRecord>,
    pub final_point: FactorPoint,
    pub termination: Termination,
    /// Number of iterations performed (gradient steps or perturbations).
    pub iterations: usize,
    /// Step size in force at the end of the run.
    pub step_size: f64,
    /// Iterations at which a perturbation was applied.
    pub perturbations: Vec<usize>,
    /// Second-order residuals at the final point when they were evaluated.
    pub final_residuals: Option<SocResiduals>,
}

impl IterTrace {
    pub fn final_record(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,loss,grad_norm,err_frob\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:e},{:e},{:e}", r.iter, r.loss, r.grad_norm, r.err_frob);
        }
        out
    }
}

/// Gaussian start scaled so that `‖X0‖_F = ‖M*‖_F^{1/2}`.
pub fn default_init(inst: &ProblemInstance, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, INIT_STREAM);
    let g = gaussian_matrix(&mut rng, inst.n(), inst.r());
    let target = inst.truth().frobenius_norm().sqrt();
    let norm = g.norm();
    if norm == 0.0 {
        g
    } else {
        g * (target / norm)
    }
}

/// `‖X‖₂` through the `r x r` Gram matrix.
fn factor_norm(x: &DMatrix<f64>) -> f64 {
    if x.ncols() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(x.tr_mul(x)).eigenvalues.max().max(0.0).sqrt()
}

struct StepRule {
    fixed: Option<f64>,
    delta: f64,
    data_term: f64,
    ref_norm: f64,
    eta: f64,
}

impl StepRule {
    fn new(inst: &ProblemInstance, step: StepSize, x0_norm: f64) -> Self {
        match step {
            StepSize::Fixed(eta) => Self {
                fixed: Some(eta),
                delta: 0.0,
                data_term: 0.0,
                ref_norm: x0_norm,
                eta,
            },
            StepSize::Auto => {
                let delta = inst.operator().gram_spectrum().delta();
                let adj = inst
                    .operator()
                    .apply_adjoint(inst.measurements())
                    .expect("measurements have length m");
                let data_term = linalg::sym(&adj).norm();
                let mut rule = Self {
                    fixed: None,
                    delta,
                    data_term,
                    ref_norm: x0_norm,
                    eta: 0.0,
                };
                rule.eta = rule.auto_eta(x0_norm);
                rule
            }
        }
    }

    fn auto_eta(&self, norm: f64) -> f64 {
        let l = (1.0 + self.delta) * (3.0 * norm * norm + self.data_term);
        if l > 0.0 {
            0.25 / l
        } else {
            1.0
        }
    }

    fn update(&mut self, norm: f64) -> f64 {
        if self.fixed.is_none() && norm > self.ref_norm {
            self.ref_norm = norm;
            self.eta = self.auto_eta(norm);
        }
        self.eta
    }
}

/// Plain gradient descent `X_{k+1} = X_k − η∇f(X_k)`.
pub fn gradient_descent(inst: &ProblemInstance, x0: &DMatrix<f64>, config: &SolverConfig) -> Result<IterTrace> {
    run(inst, x0, config, false)
}

/// Gradient descent with random perturbations near first-order stationary
/// points that fail the curvature test. Stops at a `grad_tol`-approximate
/// second-order critical point.
pub fn perturbed_gd(inst: &ProblemInstance, x0: &DMatrix<f64>, config: &SolverConfig) -> Result<IterTrace> {
    run(inst, x0, config, true)
}

fn run(inst: &ProblemInstance, x0: &DMatrix<f64>, config: &SolverConfig, perturb: bool) -> Result<IterTrace> {
    config.validate()?;
    linalg::check_shape("initial point", x0, inst.n(), inst.r())?;
    let obj = Objective::new(inst);
    let m_star = inst.truth().m_star();
    let mut x = x0.clone();
    let mut rule = StepRule::new(inst, config.step_size, factor_norm(&x));
    let mut records = Vec::new();
    let mut perturbations = Vec::new();
    let mut last_perturb: Option<usize> = None;
    let mut last_eig_check: Option<usize> = None;
    let mut final_residuals = None;
    let mut perturb_rng = stream_rng(derive_seed(config.seed, 0), PERTURB_STREAM);
    let radius = config.radius();
    let mut initial_loss = f64::NAN;
    let termination;
    let mut k = 0usize;

    loop {
        let (loss, s) = obj.loss_and_curvature(&x)?;
        let grad = &s * &x * 2.0;
        let grad_norm = grad.norm();
        let record = IterRecord {
            iter: k,
            loss,
            grad_norm,
            err_frob: (&x * x.transpose() - m_star).norm(),
        };
        if k == 0 {
            initial_loss = loss;
        }
        let diverged = !loss.is_finite() || (k > 0 && loss > DIVERGENCE_FACTOR * initial_loss && loss > 0.0);
        let keep = k.is_multiple_of(config.record_every);
        if diverged {
            records.push(record);
            let trace = IterTrace {
                records,
                final_point: FactorPoint::new(x),
                termination: Termination::Diverged,
                iterations: k,
                step_size: rule.eta,
                perturbations,
                final_residuals: None,
            };
            return Err(SenseError::Divergence {
                iteration: k,
                loss,
                initial: initial_loss,
                trace: Box::new(trace),
            });
        }

        let x_norm = factor_norm(&x);
        let (kappa_grad, _) = if x_norm == 0.0 {
            grad_residual(&x, &grad)
        } else {
            (grad_norm / x_norm, false)
        };

        let mut stop = None;
        let mut do_perturb = false;
        if kappa_grad <= config.grad_tol {
            if !perturb {
                stop = Some(Termination::GradTol);
            } else {
                let allowed = last_perturb.is_none_or(|p| k - p >= config.perturb_interval);
                let due = last_eig_check.is_none_or(|c| k - c >= config.eig_check_interval);
                if allowed && due {
                    last_eig_check = Some(k);
                    let res = obj.soc_residuals_with(&x, &s, &grad)?;
                    if res.kappa_eig <= config.grad_tol {
                        final_residuals = Some(res);
                        stop = Some(Termination::SecondOrder);
                    } else {
                        do_perturb = true;
                    }
                }
            }
        }
        if stop.is_none() && k == config.max_iters {
            stop = Some(Termination::MaxIters);
        }
        if let Some(reason) = stop {
            records.push(record);
            termination = reason;
            break;
        }
        if keep {
            records.push(record);
        }

        if do_perturb {
            x += uniform_ball(&mut perturb_rng, inst.n(), inst.r(), radius);
            perturbations.push(k);
            last_perturb = Some(k);
        } else {
            let eta = rule.update(x_norm);
            x -= grad * eta;
        }
        k += 1;
    }

    Ok(IterTrace {
        records,
        final_point: FactorPoint::new(x),
        termination,
        iterations: k,
        step_size: rule.eta,
        perturbations,
        final_residuals,
    })
}

/// `κ̃ = min{λ0 − ε, Dε}`.
pub fn pgd_tolerance(d: f64, lambda0: f64, eps: f64) -> Result<f64> {
    if !(d > 0.0 && d <= 1.0) {
        return Err(SenseError::Parameter(format!("D must lie in (0, 1], got {d}")));
    }
    if !(lambda0 > 0.0 && lambda0.is_finite()) {
        return Err(SenseError::Parameter(format!("λ0 must be positive, got {lambda0}")));
    }
    if !(eps > 0.0 && eps < lambda0) {
        return Err(SenseError::Parameter(format!("ε must lie in (0, λ0) = (0, {lambda0}), got {eps}")));
    }
    Ok((lambda0 - eps).min(d * eps))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleProbe {
    /// `−max_samples λ_min(∇²f₀(X))`.
    pub lambda0: f64,
    /// False when some sample had `λ_min ≥ 0`, so no valid `λ0` was witnessed.
    pub valid: bool,
    pub samples: usize,
}

/// Samples `X` with `‖X‖₂ < D` (random direction, uniform radius) and
/// reports the weakest negative curvature of the noiseless Hessian.
pub fn saddle_probe(inst: &ProblemInstance, d: f64, samples: usize, seed: u64) -> Result<SaddleProbe> {
    if samples == 0 {
        return Err(SenseError::Parameter("saddle_probe needs at least one sample".into()));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(SenseError::Parameter(format!("D must be positive, got {d}")));
    }
    let obj = Objective::noiseless(inst);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..samples {
        let mut rng = stream_rng(derive_seed(seed, i as u64), 0);
        let dir = gaussian_matrix(&mut rng, inst.n(), inst.r());
        let norm = factor_norm(&dir);
        let u: f64 = rand::Rng::random(&mut rng);
        let x = if norm == 0.0 { dir } else { dir * (d * u / norm) };
        let (lam, _) = obj.min_hessian_eig(&x, EIG_TOL)?;
        worst = worst.max(lam);
    }
    Ok(SaddleProbe {
        lambda0: -worst,
        valid: worst < 0.0,
        samples,
    })
}
