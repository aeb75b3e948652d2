//! Optimality-condition checks and explicit dual certificates.
//!
//! At a candidate `X̂` the error `𝐞 = vec(X̂X̂ᵀ − M*)` is split relative to
//! `range(X̂)` ([`align_decompose`]); the split drives closed-form feasible
//! points of the dual programs whose objective upper-bounds `η*(X̂)`.
//! Feasibility is always checked numerically ([`verify_certificate`]).

mod align;
mod dual;
mod eta;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

pub use align::{align_decompose, AlignmentStats};
pub use dual::{
    build_global_certificate, build_local_certificate, psd_split, rank_two_split, verify_certificate,
    w_aggregate, CertificateCheck, CertificateKind, Construction, DualCertificate, LocalAngle, CERT_TOL,
};
pub use eta::{eta0, eta0_threshold, golden_section, interior_gamma, mixing_objective, psi, EtaBounds};

use crate::error::Result;
use crate::linalg;
use crate::objective::{Objective, EIG_TOL};
use crate::operator::ProblemInstance;

/// Margins of the first- and second-order necessary conditions measured on
/// the noiseless objective. Positive margins mean the condition holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NecessaryCheck {
    /// `‖𝐗̂ᵀ𝐇𝐞‖`.
    pub foc_lhs: f64,
    /// `(2ε + κ)‖X̂‖₂`.
    pub foc_rhs: f64,
    pub foc_margin: f64,
    /// `λ_min(2 I_r ⊗ mat_s(𝐇𝐞) + 𝐗̂ᵀ𝐇𝐗̂)`.
    pub soc_min_eig: f64,
    pub soc_margin: f64,
    pub passed: bool,
}

/// Checks `‖𝐗̂ᵀ𝐇𝐞‖ ≤ (2ε+κ)‖X̂‖₂` and
/// `2 I_r ⊗ mat_s(𝐇𝐞) + 𝐗̂ᵀ𝐇𝐗̂ ⪰ −(2ε+κ) I` with `𝐇 = 𝐀ᵀ𝐀`.
pub fn check_necessary(inst: &ProblemInstance, x: &DMatrix<f64>, kappa: f64, eps: f64) -> Result<NecessaryCheck> {
    linalg::check_shape("check_necessary X", x, inst.n(), inst.r())?;
    let f0 = Objective::noiseless(inst);
    let (_, s) = f0.loss_and_curvature(x)?;
    let grad = &s * x * 2.0;
    let slack = 2.0 * eps + kappa;
    let foc_lhs = grad.norm();
    let foc_rhs = slack * linalg::spectral_norm(x);
    let (soc_min_eig, _) = f0.min_hessian_eig_with(x, &s, EIG_TOL)?;
    let foc_margin = foc_rhs - foc_lhs;
    let soc_margin = soc_min_eig + slack;
    Ok(NecessaryCheck {
        foc_lhs,
        foc_rhs,
        foc_margin,
        soc_min_eig,
        soc_margin,
        passed: foc_margin >= 0.0 && soc_margin >= 0.0,
    })
}

/// Serializable summary of one certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateReport {
    pub kind: CertificateKind,
    pub construction: Construction,
    pub objective: f64,
    pub eta_lower: f64,
    pub eta0: f64,
    pub residuals: BTreeMap<String, f64>,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub perp_flag: bool,
    pub gamma: Option<f64>,
    pub sigma_margin: Option<f64>,
    pub local_angle: Option<LocalAngle>,
}

impl CertificateReport {
    pub fn new(cert: &DualCertificate, stats: &AlignmentStats, delta: f64) -> Result<Self> {
        Ok(Self {
            kind: cert.kind,
            construction: cert.construction,
            objective: cert.objective,
            eta_lower: (1.0 - delta) / (1.0 + delta),
            eta0: eta0(stats.alpha, stats.beta)?,
            residuals: cert.residuals.clone(),
            alpha: stats.alpha,
            beta: stats.beta,
            theta: stats.theta,
            perp_flag: stats.perp_flag,
            gamma: cert.gamma,
            sigma_margin: cert.sigma_margin,
            local_angle: cert.local_angle,
        })
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.values().copied().fold(0.0, f64::max)
    }
}
