use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::align::{align_decompose, AlignmentStats};
use super::eta::{interior_gamma, minimize_unit_interval, psi};
use crate::error::{Result, SenseError};
use crate::linalg;
use crate::objective::{lift_matrix, outer};
use crate::operator::GroundTruth;

/// Default feasibility tolerance used when a builder fills in residuals.
pub const CERT_TOL: f64 = 1e-8;

/// `σ_r(X̂) ≤ RANK_TOL · ‖X̂‖₂` counts as rank deficient.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    /// Dual of the program with the `W` block; bounds `η*` at approximate
    /// second-order points.
    Global,
    /// Dual without `W`; used inside the local ball.
    Local,
}

impl CertificateKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertificateKind::Global => "global",
            CertificateKind::Local => "local",
        }
    }
}

/// Which explicit construction produced the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    /// `Z⊥ ≠ 0`: mixes `𝐗̂ŷ` and `vec(Z⊥Z⊥ᵀ)` with weight `γ`.
    Mixed,
    /// `𝒫⊥Z = 0`: `𝐗̂ŷ = 𝐞` and `W = 0`.
    Aligned,
    /// `X̂ = 0`: `y = 0` and `W` built from `M*` alone.
    ZeroFactor,
    /// `𝐗̂ŷ = 0` without a `W` block: `U₁ = U₂ = 𝐞𝐞ᵀ/‖𝐞‖²`.
    Collapsed,
}

impl Construction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Construction::Mixed => "mixed",
            Construction::Aligned => "aligned",
            Construction::ZeroFactor => "zero_factor",
            Construction::Collapsed => "collapsed",
        }
    }
}

/// Result of the angle check `sin²θ ≤ τ/(2−τ)` inside the local ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalAngle {
    pub sin2_theta: f64,
    pub limit: f64,
    /// `‖X̂X̂ᵀ − M*‖_F ≤ τ λ_{r*}(M*)`.
    pub in_ball: bool,
    pub holds: bool,
}

/// An explicit dual feasible point.
///
/// `u1`, `u2` are `n² x n²`, `w_block`, `g` are `nr x nr` and `y ∈ ℝ^{nr}`,
/// all indexed like `vec` of an `n x r` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate {
    pub kind: CertificateKind,
    pub construction: Construction,
    pub u1: DMatrix<f64>,
    pub u2: DMatrix<f64>,
    pub w_block: Option<DMatrix<f64>>,
    pub g: DMatrix<f64>,
    pub lam: f64,
    pub y: DVector<f64>,
    pub objective: f64,
    pub residuals: BTreeMap<String, f64>,
    pub gamma: Option<f64>,
    /// `2ε + κ` (global) or `2ε` (local).
    pub scale: f64,
    /// `σ_r(X̂) − √((ε + κ/2)/(1+δ))`; the global bound needs it positive.
    pub sigma_margin: Option<f64>,
    pub local_angle: Option<LocalAngle>,
}

/// Per-constraint violations of a candidate dual point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub residuals: BTreeMap<String, f64>,
    pub tol: f64,
    pub passed: bool,
}

/// Splits a symmetric matrix into PSD parts with `M = [M]₊ − [M]₋`.
pub fn psd_split(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    linalg::check_square("psd_split", m, n)?;
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > 1e-10 * scale {
        return Err(SenseError::Parameter("psd_split needs a symmetric matrix".into()));
    }
    let (vals, vecs) = linalg::sym_eigen_sorted(m);
    let mut plus = DMatrix::zeros(n, n);
    let mut minus = DMatrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        let v = vecs.column(k);
        if lam > 0.0 {
            plus += v * v.transpose() * lam;
        } else if lam < 0.0 {
            minus -= v * v.transpose() * lam;
        }
    }
    Ok((linalg::sym(&plus), linalg::sym(&minus)))
}

/// PSD split of `abᵀ + baᵀ` in closed form:
/// `[M]± = ½‖a‖‖b‖ (â ± b̂)(â ± b̂)ᵀ`.
pub fn rank_two_split(a: &DVector<f64>, b: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (na, nb) = (a.norm(), b.norm());
    let d = a.len();
    if na == 0.0 || nb == 0.0 {
        return (DMatrix::zeros(d, d), DMatrix::zeros(d, d));
    }
    let (ah, bh) = (a / na, b / nb);
    let (p, q) = (&ah + &bh, &ah - &bh);
    let half = 0.5 * na * nb;
    (&p * p.transpose() * half, &q * q.transpose() * half)
}

/// `w_agg = Σⱼ vec(W_jj)` over the `n x n` diagonal blocks of `W`.
pub fn w_aggregate(w: &DMatrix<f64>, n: usize) -> DVector<f64> {
    let r = w.nrows() / n.max(1);
    let mut agg = DMatrix::zeros(n, n);
    for j in 0..r {
        agg += w.view((j * n, j * n), (n, n));
    }
    linalg::vec(&agg)
}

/// Dual objective `tr U₂ + ⟨𝐗̂ᵀ𝐗̂, W⟩ + c·tr W + c²‖X̂‖₂²λ + tr G`.
fn dual_objective(
    u2: &DMatrix<f64>,
    w: Option<&DMatrix<f64>>,
    g: &DMatrix<f64>,
    lam: f64,
    lift: &DMatrix<f64>,
    scale: f64,
    x_norm: f64,
) -> f64 {
    let w_terms = w.map_or(0.0, |w| {
        let lw = lift * w;
        lw.component_mul(lift).sum() + scale * w.trace()
    });
    u2.trace() + w_terms + scale * scale * x_norm * x_norm * lam + g.trace()
}

/// Negative part of the smallest eigenvalue, zero for PSD input.
fn psd_violation(m: &DMatrix<f64>) -> f64 {
    (-linalg::min_eigenvalue(m)).max(0.0)
}

/// Checks every constraint of the dual program and recomputes the objective.
pub fn verify_certificate(
    cert: &DualCertificate,
    x: &DMatrix<f64>,
    e: &DVector<f64>,
    eps: f64,
    kappa: f64,
    kind: CertificateKind,
    tol: f64,
) -> Result<CertificateCheck> {
    let (n, r) = x.shape();
    let (n2, nr) = (n * n, n * r);
    if e.len() != n2 {
        return Err(crate::error::dim_err("verify_certificate e", n2, e.len()));
    }
    linalg::check_square("verify_certificate U1", &cert.u1, n2)?;
    linalg::check_square("verify_certificate U2", &cert.u2, n2)?;
    linalg::check_square("verify_certificate G", &cert.g, nr)?;
    if cert.y.len() != nr {
        return Err(crate::error::dim_err("verify_certificate y", nr, cert.y.len()));
    }
    let w = match kind {
        CertificateKind::Global => cert.w_block.as_ref(),
        CertificateKind::Local => None,
    };
    if let Some(w) = w {
        linalg::check_square("verify_certificate W", w, nr)?;
    }
    let scale = match kind {
        CertificateKind::Global => 2.0 * eps + kappa,
        CertificateKind::Local => 2.0 * eps,
    };
    let lift = lift_matrix(x);
    let x_norm = linalg::spectral_norm(x);

    let mut residuals = BTreeMap::new();
    residuals.insert("trace_u1".to_string(), (cert.u1.trace() - 1.0).abs());

    let mut a = &lift * &cert.y;
    if let Some(w) = w {
        a -= w_aggregate(w, n);
    }
    let lhs = &a * e.transpose() + e * a.transpose();
    let eq = (lhs - (&cert.u1 - &cert.u2)).amax();
    residuals.insert("rank2_equation".to_string(), eq);

    residuals.insert("psd_u1".to_string(), psd_violation(&cert.u1));
    residuals.insert("psd_u2".to_string(), psd_violation(&cert.u2));
    if let Some(w) = w {
        residuals.insert("psd_w".to_string(), psd_violation(w));
    }
    let mut block = DMatrix::zeros(nr + 1, nr + 1);
    block.view_mut((0, 0), (nr, nr)).copy_from(&cert.g);
    block.view_mut((0, nr), (nr, 1)).copy_from(&(-&cert.y));
    block.view_mut((nr, 0), (1, nr)).copy_from(&(-cert.y.transpose()));
    block[(nr, nr)] = cert.lam;
    residuals.insert("psd_gy_block".to_string(), psd_violation(&block));

    let recomputed = dual_objective(&cert.u2, w, &cert.g, cert.lam, &lift, scale, x_norm);
    let obj_err = (recomputed - cert.objective).abs() / cert.objective.abs().max(1.0);
    residuals.insert("objective".to_string(), obj_err);

    let passed = residuals.values().all(|v| v.is_finite() && *v <= tol);
    Ok(CertificateCheck { residuals, tol, passed })
}

struct Parts<'a> {
    kind: CertificateKind,
    construction: Construction,
    x: &'a DMatrix<f64>,
    e: &'a DVector<f64>,
    y: DVector<f64>,
    w: Option<DMatrix<f64>>,
    scale: f64,
    gamma: Option<f64>,
}

/// Rescales `(y, W)` by `tr[M]₊` and completes `U₁, U₂, λ, G`.
fn assemble(parts: Parts<'_>, lift: &DMatrix<f64>) -> Result<DualCertificate> {
    let Parts {
        kind,
        construction,
        x,
        e,
        y,
        w,
        scale,
        gamma,
    } = parts;
    let n = x.nrows();
    let x_norm = linalg::spectral_norm(x);
    let mut a = lift * &y;
    if let Some(w) = &w {
        a -= w_aggregate(w, n);
    }

    let (u1, u2, y, w, construction) = if a.norm() == 0.0 {
        let u = e * e.transpose() / e.norm_squared();
        (u.clone(), u, y * 0.0, w, Construction::Collapsed)
    } else {
        let (plus, minus) = rank_two_split(&a, e);
        let t = plus.trace();
        (plus / t, minus / t, y / t, w.map(|w| w / t), construction)
    };

    let y_norm = y.norm();
    let (lam, g) = if y_norm == 0.0 {
        (0.0, DMatrix::zeros(y.len(), y.len()))
    } else {
        if scale * x_norm <= 0.0 {
            return Err(SenseError::Domain(
                "dual multiplier λ is unbounded: the constant 2ε + κ (or 2ε) is zero".into(),
            ));
        }
        let lam = y_norm / (scale * x_norm);
        (lam, &y * y.transpose() / lam)
    };
    let objective = dual_objective(&u2, w.as_ref(), &g, lam, lift, scale, x_norm);
    Ok(DualCertificate {
        kind,
        construction,
        u1,
        u2,
        w_block: w,
        g,
        lam,
        y,
        objective,
        residuals: BTreeMap::new(),
        gamma,
        scale,
        sigma_margin: None,
        local_angle: None,
    })
}

fn check_scalars(eps: f64, kappa: f64) -> Result<()> {
    if !(eps >= 0.0 && eps.is_finite() && kappa >= 0.0 && kappa.is_finite()) {
        return Err(SenseError::Parameter(format!(
            "ε and κ must be finite and nonnegative, got ε = {eps}, κ = {kappa}"
        )));
    }
    Ok(())
}

fn error_vector(x: &DMatrix<f64>, truth: &GroundTruth) -> DVector<f64> {
    linalg::vec(&(outer(x) - truth.m_star()))
}

fn prepare(x: &DMatrix<f64>, truth: &GroundTruth) -> Result<AlignmentStats> {
    let stats = align_decompose(x, truth)?;
    if stats.degenerate {
        return Err(SenseError::Hypothesis(
            "X̂X̂ᵀ = M*: there is no error direction to certify".into(),
        ));
    }
    Ok(stats)
}

/// `vec(V)vec(V)ᵀ` summed over `V_i = √(k gᵢ) pᵢ q₁ᵀ`, where `(gᵢ, pᵢ)` are
/// the eigenpairs of `Z⊥Z⊥ᵀ` and `q₁` is a bottom eigenvector of `X̂ᵀX̂`.
fn w_from_perp(x: &DMatrix<f64>, perp_gram: &DMatrix<f64>, k: f64) -> DMatrix<f64> {
    let (n, r) = x.shape();
    let (_, q) = linalg::sym_eigen_sorted(&x.tr_mul(x));
    let q1 = q.column(0).into_owned();
    let (g_vals, p) = linalg::sym_eigen_sorted(perp_gram);
    let mut w = DMatrix::zeros(n * r, n * r);
    for i in (0..n).rev().take(r) {
        let g = g_vals[i];
        if g <= 0.0 {
            continue;
        }
        let v = p.column(i) * q1.transpose() * (k * g).sqrt();
        let vv = linalg::vec(&v);
        w += &vv * vv.transpose();
    }
    linalg::sym(&w)
}

/// Value of the mixed construction as a function of `γ`.
struct MixedObjective {
    alpha: f64,
    beta: f64,
    /// `c · tr(Z⊥Z⊥ᵀ) / (‖Z⊥Z⊥ᵀ‖_F ‖𝐞‖)`.
    w_trace: f64,
    /// `2c‖X̂‖₂‖ŷ‖ / (‖𝐞‖‖𝐗̂ŷ‖)`.
    y_term: f64,
}

impl MixedObjective {
    fn value(&self, gamma: f64) -> f64 {
        let p = psi(gamma, self.alpha);
        let s = (1.0 - gamma * gamma).max(0.0).sqrt();
        (1.0 - p + 2.0 * self.beta * gamma + self.w_trace * gamma + self.y_term * s) / (1.0 + p)
    }
}

/// Explicit feasible point of the global dual program at `X̂`.
///
/// `gamma = None` selects the mixing weight minimizing the resulting objective.
pub fn build_global_certificate(
    x: &DMatrix<f64>,
    truth: &GroundTruth,
    eps: f64,
    kappa: f64,
    delta: f64,
    gamma: Option<f64>,
) -> Result<DualCertificate> {
    check_scalars(eps, kappa)?;
    if let Some(g) = gamma {
        if !(0.0..=1.0).contains(&g) {
            return Err(SenseError::Parameter(format!("γ must lie in [0, 1], got {g}")));
        }
    }
    let stats = prepare(x, truth)?;
    let n = x.nrows();
    let scale = 2.0 * eps + kappa;
    let e = error_vector(x, truth);
    let e_norm = stats.e_norm;
    let lift = lift_matrix(x);
    let y_hat = linalg::vec(&stats.y_hat);

    let parts = if stats.x_norm == 0.0 {
        let k = 1.0 / (e_norm * stats.perp_fro);
        Parts {
            kind: CertificateKind::Global,
            construction: Construction::ZeroFactor,
            x,
            e: &e,
            y: DVector::zeros(y_hat.len()),
            w: Some(w_from_perp(x, &stats.perp_gram, k)),
            scale,
            gamma: Some(1.0),
        }
    } else if stats.perp_flag {
        Parts {
            kind: CertificateKind::Global,
            construction: Construction::Aligned,
            x,
            e: &e,
            y: &y_hat / (e_norm * stats.xy_norm),
            w: None,
            scale,
            gamma: Some(0.0),
        }
    } else {
        let gamma = if stats.xy_norm <= RANK_TOL * e_norm {
            1.0
        } else if let Some(g) = gamma {
            g
        } else {
            let f = MixedObjective {
                alpha: stats.alpha,
                beta: stats.beta,
                w_trace: scale * stats.perp_trace / (stats.perp_fro * e_norm),
                y_term: 2.0 * scale * stats.x_norm * y_hat.norm() / (e_norm * stats.xy_norm),
            };
            let mut cands = vec![0.0, stats.alpha, 1.0];
            cands.extend(interior_gamma(stats.alpha, stats.beta));
            minimize_unit_interval(|g| f.value(g), &cands).0
        };
        let k = gamma / (e_norm * stats.perp_fro);
        let l = if stats.xy_norm > 0.0 {
            (1.0 - gamma * gamma).max(0.0).sqrt() / (e_norm * stats.xy_norm)
        } else {
            0.0
        };
        Parts {
            kind: CertificateKind::Global,
            construction: Construction::Mixed,
            x,
            e: &e,
            y: &y_hat * l,
            w: Some(w_from_perp(x, &stats.perp_gram, k)),
            scale,
            gamma: Some(gamma),
        }
    };
    debug_assert_eq!(parts.x.nrows(), n);
    let mut cert = assemble(parts, &lift)?;
    cert.sigma_margin = Some(stats.sigma_r - ((eps + kappa / 2.0) / (1.0 + delta)).max(0.0).sqrt());
    cert.residuals = verify_certificate(&cert, x, &e, eps, kappa, CertificateKind::Global, CERT_TOL)?.residuals;
    Ok(cert)
}

/// Explicit feasible point of the local dual program (no `W` block), with
/// the angle check for the ball of radius `τ λ_{r*}(M*)`.
pub fn build_local_certificate(
    x: &DMatrix<f64>,
    truth: &GroundTruth,
    eps: f64,
    tau: f64,
) -> Result<DualCertificate> {
    check_scalars(eps, 0.0)?;
    if !(tau > 0.0 && tau < 1.0) {
        return Err(SenseError::Parameter(format!("τ must lie in (0, 1), got {tau}")));
    }
    let stats = prepare(x, truth)?;
    let e = error_vector(x, truth);
    let lift = lift_matrix(x);
    let construction = if stats.perp_flag { Construction::Aligned } else { Construction::Mixed };
    let parts = Parts {
        kind: CertificateKind::Local,
        construction,
        x,
        e: &e,
        y: linalg::vec(&stats.y_hat),
        w: None,
        scale: 2.0 * eps,
        gamma: None,
    };
    let mut cert = assemble(parts, &lift)?;
    let sin2_theta = if stats.perp_flag { 0.0 } else { (stats.perp_fro / stats.e_norm).powi(2) };
    let limit = tau / (2.0 - tau);
    let in_ball = stats.e_norm <= tau * truth.lambda_min_nonzero();
    cert.local_angle = Some(LocalAngle {
        sin2_theta,
        limit,
        in_ball,
        holds: !in_ball || sin2_theta <= limit,
    });
    cert.sigma_margin = Some(stats.sigma_r);
    cert.residuals = verify_certificate(&cert, x, &e, eps, 0.0, CertificateKind::Local, CERT_TOL)?.residuals;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream_rng};

    fn truth(n: usize, r_star: usize, seed: u64) -> GroundTruth {
        let z = gaussian_matrix(&mut stream_rng(seed, 0), n, r_star);
        GroundTruth::new(outer(&z), r_star).unwrap()
    }

    fn max_residual(c: &DualCertificate) -> f64 {
        c.residuals.values().copied().fold(0.0, f64::max)
    }

    #[test]
    fn split_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -2.0]));
        let (p, q) = psd_split(&m).unwrap();
        assert!((p - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]))).amax() < 1e-15);
        assert!((q - DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0]))).amax() < 1e-15);
    }

    #[test]
    fn split_of_psd_input_has_no_negative_part() {
        let a = gaussian_matrix(&mut stream_rng(1, 0), 4, 4);
        let (p, q) = psd_split(&(&a * a.transpose())).unwrap();
        assert!((p - &a * a.transpose()).amax() < 1e-12);
        assert!(q.amax() < 1e-12);
    }

    #[test]
    fn split_rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(psd_split(&m), Err(SenseError::Parameter(_))));
    }

    #[test]
    fn rank_two_traces_follow_the_angle() {
        for seed in 0..10 {
            let mut rng = stream_rng(seed, 5);
            let a = gaussian_matrix(&mut rng, 6, 1).column(0).into_owned();
            let b = gaussian_matrix(&mut rng, 6, 1).column(0).into_owned();
            let m = &a * b.transpose() + &b * a.transpose();
            let (p, q) = psd_split(&m).unwrap();
            let (p2, q2) = rank_two_split(&a, &b);
            let cos = a.dot(&b) / (a.norm() * b.norm());
            let ab = a.norm() * b.norm();
            assert!((p.trace() - ab * (1.0 + cos)).abs() < 1e-9 * ab);
            assert!((q.trace() - ab * (1.0 - cos)).abs() < 1e-9 * ab);
            assert!((&p - &p2).amax() < 1e-10 && (&q - &q2).amax() < 1e-10);
        }
    }

    #[test]
    fn global_certificates_are_feasible() {
        for seed in 0..25 {
            let t = truth(5, 2, seed);
            let x = gaussian_matrix(&mut stream_rng(seed, 1), 5, 3) * 0.8;
            let eps = 0.01 * (seed % 5) as f64 + 1e-3;
            let cert = build_global_certificate(&x, &t, eps, 1e-4, 0.3, None).unwrap();
            assert_eq!(cert.construction, Construction::Mixed);
            assert!(max_residual(&cert) <= CERT_TOL, "{:?}", cert.residuals);
            assert!((cert.u1.trace() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn fixed_gamma_matches_scalar_formula() {
        let t = truth(5, 2, 4);
        let x = gaussian_matrix(&mut stream_rng(4, 1), 5, 3);
        let s = align_decompose(&x, &t).unwrap();
        let (eps, kappa) = (0.02, 0.0);
        let c = 2.0 * eps + kappa;
        for gamma in [0.0, 0.3, 0.8, 1.0] {
            let cert = build_global_certificate(&x, &t, eps, kappa, 0.2, Some(gamma)).unwrap();
            let f = MixedObjective {
                alpha: s.alpha,
                beta: s.beta,
                w_trace: c * s.perp_trace / (s.perp_fro * s.e_norm),
                y_term: 2.0 * c * s.x_norm * s.y_hat.norm() / (s.e_norm * s.xy_norm),
            };
            assert!((cert.objective - f.value(gamma)).abs() < 1e-9, "γ={gamma}");
        }
    }

    #[test]
    fn auto_gamma_is_no_worse_than_fixed_choices() {
        let t = truth(6, 2, 8);
        let x = gaussian_matrix(&mut stream_rng(8, 1), 6, 4);
        let auto = build_global_certificate(&x, &t, 0.01, 0.0, 0.2, None).unwrap();
        for gamma in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let fixed = build_global_certificate(&x, &t, 0.01, 0.0, 0.2, Some(gamma)).unwrap();
            assert!(auto.objective <= fixed.objective + 1e-9);
        }
    }

    #[test]
    fn aligned_case_obeys_closing_inequality() {
        let t = truth(6, 2, 3);
        let mut x = DMatrix::zeros(6, 3);
        x.columns_mut(0, 2).copy_from(&(t.factor() * 0.6));
        x.set_column(2, &(gaussian_matrix(&mut stream_rng(3, 7), 6, 1).column(0) * 0.5));
        let (eps, kappa, delta) = (0.02, 1e-3, 0.4);
        let cert = build_global_certificate(&x, &t, eps, kappa, delta, None).unwrap();
        assert_eq!(cert.construction, Construction::Aligned);
        assert!(max_residual(&cert) <= CERT_TOL);
        let e_norm = (outer(&x) - t.m_star()).norm();
        let bound = ((2.0 * eps + kappa) * (1.0 + delta)).sqrt() * linalg::spectral_norm(&x) / e_norm;
        // The closing inequality assumes σ_r(X̂) above the noise threshold.
        assert!(cert.sigma_margin.unwrap() > 0.0);
        assert!(cert.objective <= bound + 1e-9);
    }

    #[test]
    fn zero_factor_uses_truth_only() {
        let z = gaussian_matrix(&mut stream_rng(2, 0), 5, 1);
        let t = GroundTruth::new(outer(&z), 1).unwrap();
        let x = DMatrix::zeros(5, 1);
        let eps = 0.05;
        let cert = build_global_certificate(&x, &t, eps, 0.0, 0.1, None).unwrap();
        assert_eq!(cert.construction, Construction::ZeroFactor);
        assert!(max_residual(&cert) <= CERT_TOL, "{:?}", cert.residuals);
        assert!(cert.y.norm() == 0.0 && cert.lam == 0.0);
        let e_norm = t.frobenius_norm();
        assert!((cert.objective - eps / e_norm).abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_factor_is_still_feasible() {
        let t = truth(5, 2, 6);
        let mut x = gaussian_matrix(&mut stream_rng(6, 1), 5, 3);
        x.set_column(2, &(x.column(0) * 2.0));
        let cert = build_global_certificate(&x, &t, 0.01, 0.0, 0.1, None).unwrap();
        assert!(max_residual(&cert) <= CERT_TOL, "{:?}", cert.residuals);
        assert!(cert.sigma_margin.unwrap() < 0.0);
        let local = build_local_certificate(&x, &t, 0.01, 0.2).unwrap();
        assert!(max_residual(&local) <= CERT_TOL, "{:?}", local.residuals);
    }

    #[test]
    fn corrupted_multiplier_breaks_psd_block() {
        let t = truth(5, 2, 11);
        let x = gaussian_matrix(&mut stream_rng(11, 1), 5, 2);
        let mut cert = build_global_certificate(&x, &t, 0.03, 0.0, 0.2, Some(0.2)).unwrap();
        let e = error_vector(&x, &t);
        cert.lam = -cert.lam;
        let check = verify_certificate(&cert, &x, &e, 0.03, 0.0, CertificateKind::Global, CERT_TOL).unwrap();
        assert!(!check.passed);
        assert!(check.residuals["psd_gy_block"] > CERT_TOL);
    }

    #[test]
    fn dropping_negative_part_breaks_the_equation() {
        let t = truth(5, 2, 12);
        let x = gaussian_matrix(&mut stream_rng(12, 1), 5, 2);
        let mut cert = build_global_certificate(&x, &t, 0.03, 0.0, 0.2, None).unwrap();
        assert!(cert.u2.trace() > 1e-6);
        let e = error_vector(&x, &t);
        cert.u2.fill(0.0);
        let check = verify_certificate(&cert, &x, &e, 0.03, 0.0, CertificateKind::Global, CERT_TOL).unwrap();
        assert!(check.residuals["rank2_equation"] > CERT_TOL);
    }

    #[test]
    fn local_certificate_limit_without_noise() {
        let t = truth(6, 2, 13);
        let x = t.padded_factor(3).unwrap() + gaussian_matrix(&mut stream_rng(13, 1), 6, 3) * 0.05;
        let s = align_decompose(&x, &t).unwrap();
        let cert = build_local_certificate(&x, &t, 1e-14, 0.2).unwrap();
        assert!(max_residual(&cert) <= CERT_TOL, "{:?}", cert.residuals);
        let cos = s.theta.cos();
        assert!((cert.objective - (1.0 - cos) / (1.0 + cos)).abs() < 1e-9);
        assert!(matches!(build_local_certificate(&x, &t, 0.0, 0.2), Err(SenseError::Domain(_))));
    }
}
