//! The factorized objective `f(X) = ½‖𝒜(XXᵀ) − (b − w)‖²` and its derivatives.
//!
//! With `e = vec(XXᵀ − M*)` and `S = mat_s(𝐀ᵀ(𝐀e + w))`:
//!
//! * `∇f(X) = 2 S X`
//! * `∇²f(X)[U] = 2 S U + 2 mat_s(𝐀ᵀ𝐀 vec(XUᵀ + UXᵀ)) X`
//!
//! The free functions evaluate through the stacked operator directly.
//! [`Objective`] additionally offers a Gram-reduced path on symmetric
//! coordinates that solvers use when `m` is large relative to `n²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SenseError};
use crate::linalg::{self, lanczos_smallest, SymBasis};
use crate::operator::{ProblemInstance, SensingOperator};
use crate::rng::{gaussian_matrix, stream_rng};

/// Largest `nr` for which the dense Hessian is materialized.
pub const DENSE_HESSIAN_LIMIT: usize = 2000;

/// Default tolerance for Hessian eigenvalue estimates used in residuals.
pub const EIG_TOL: f64 = 1e-10;

const LANCZOS_SEED: u64 = 0x1a2c_3e5f;

/// A candidate factor with its extreme singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPoint {
    pub x: DMatrix<f64>,
    pub sigma_r: f64,
    pub op_norm: f64,
}

impl FactorPoint {
    pub fn new(x: DMatrix<f64>) -> Self {
        let s = linalg::singular_values(&x);
        let r = x.ncols();
        let sigma_r = if r > 0 && s.len() >= r { s[r - 1] } else { 0.0 };
        let op_norm = s.first().copied().unwrap_or(0.0);
        Self { x, sigma_r, op_norm }
    }
}

/// Loss, gradient and curvature at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReport {
    pub loss: f64,
    pub grad: DMatrix<f64>,
    pub grad_norm: f64,
    pub hess_min_eig: f64,
    /// `e = vec(XXᵀ − M*)`.
    pub residual: DVector<f64>,
}

/// Residuals of the approximate second-order conditions
/// `‖∇f(X)‖_F ≤ κ‖X‖₂` and `∇²f(X) ⪰ −κI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocResiduals {
    /// `‖∇f(X)‖_F / ‖X‖₂` (divided by 1 instead when `X = 0`).
    pub kappa_grad: f64,
    /// `max(0, −λ_min(∇²f(X)))`.
    pub kappa_eig: f64,
    pub hess_min_eig: f64,
    pub zero_point: bool,
}

impl SocResiduals {
    pub fn max(&self) -> f64 {
        self.kappa_grad.max(self.kappa_eig)
    }

    /// Whether `X` is a `κ`-approximate second-order critical point.
    pub fn satisfied(&self, kappa: f64) -> bool {
        self.max() <= kappa
    }
}

fn check_factor(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<()> {
    linalg::check_shape("factor X", x, inst.n(), inst.r())
}

/// `XXᵀ` forced to be exactly symmetric.
pub(crate) fn outer(x: &DMatrix<f64>) -> DMatrix<f64> {
    linalg::sym(&(x * x.transpose()))
}

/// `XUᵀ + UXᵀ`.
pub(crate) fn sym_product(x: &DMatrix<f64>, u: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x * u.transpose();
    &p + p.transpose()
}

pub fn loss(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<f64> {
    check_factor(inst, x)?;
    let fit = inst.operator().apply_forward(&outer(x))? - inst.measurements();
    Ok(0.5 * fit.norm_squared())
}

/// `(e, fit)` with `e = vec(XXᵀ − M*)` and `fit = 𝐀e + w`.
pub fn residual(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    check_factor(inst, x)?;
    let diff = outer(x) - inst.truth().m_star();
    let e = linalg::vec(&diff);
    let fit = inst.operator().matrix_form() * &e + inst.noise();
    Ok((e, fit))
}

/// `mat_s(𝐀ᵀ(𝐀e + w))` evaluated from observed data only.
fn curvature_matrix(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let op = inst.operator();
    let fit = op.apply_forward(&outer(x))? - inst.measurements();
    Ok(linalg::sym(&op.apply_adjoint(&fit)?))
}

pub fn gradient(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_factor(inst, x)?;
    Ok(curvature_matrix(inst, x)? * x * 2.0)
}

/// The matrix `𝐗̂ ∈ ℝ^{n² x nr}` with `𝐗̂ vec(U) = vec(XUᵀ + UXᵀ)`.
pub fn lift_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = x.shape();
    let mut out = DMatrix::zeros(n * n, n * r);
    for b in 0..r {
        for a in 0..n {
            let col = a + b * n;
            for i in 0..n {
                let xi = x[(i, b)];
                // x_b e_aᵀ contributes to entry (i, a); e_a x_bᵀ to (a, i).
                out[(i + a * n, col)] += xi;
                out[(a + i * n, col)] += xi;
            }
        }
    }
    out
}

/// Dense Hessian `2 I_r ⊗ S + 𝐗̂ᵀ𝐀ᵀ𝐀𝐗̂`, ordered like `vec(U)`.
pub fn hessian_dense(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_factor(inst, x)?;
    let (n, r) = x.shape();
    let order = n * r;
    if order > DENSE_HESSIAN_LIMIT {
        return Err(SenseError::Size {
            order,
            limit: DENSE_HESSIAN_LIMIT,
        });
    }
    let s = curvature_matrix(inst, x)?;
    let ax = inst.operator().matrix_form() * lift_matrix(x);
    let mut h = ax.tr_mul(&ax);
    for b in 0..r {
        let mut block = h.view_mut((b * n, b * n), (n, n));
        block += &s * 2.0;
    }
    Ok(linalg::sym(&h))
}

/// Hessian-vector product `∇²f(X)[U]` in matrix form.
pub fn hvp(inst: &ProblemInstance, x: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_factor(inst, x)?;
    linalg::check_shape("hvp direction", u, x.nrows(), x.ncols())?;
    let op = inst.operator();
    let s = curvature_matrix(inst, x)?;
    let k = linalg::sym(&op.apply_adjoint(&op.apply_forward(&sym_product(x, u))?)?);
    Ok((&s * u + &k * x) * 2.0)
}

/// Smallest Hessian eigenvalue and a unit eigen-direction (`n x r`).
pub fn min_hessian_eig(inst: &ProblemInstance, x: &DMatrix<f64>, tol: f64) -> Result<(f64, DMatrix<f64>)> {
    check_factor(inst, x)?;
    Objective::new(inst).min_hessian_eig(x, tol)
}

pub fn soc_residuals(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<SocResiduals> {
    check_factor(inst, x)?;
    Objective::new(inst).soc_residuals(x)
}

pub fn second_order_report(inst: &ProblemInstance, x: &DMatrix<f64>) -> Result<SecondOrderReport> {
    check_factor(inst, x)?;
    let (e, fit) = residual(inst, x)?;
    let grad = gradient(inst, x)?;
    let (hess_min_eig, _) = min_hessian_eig(inst, x, EIG_TOL)?;
    Ok(SecondOrderReport {
        loss: 0.5 * fit.norm_squared(),
        grad_norm: grad.norm(),
        grad,
        hess_min_eig,
        residual: e,
    })
}

#[derive(Debug, Clone)]
enum Path {
    Direct,
    /// `H_s = (𝐀P)ᵀ(𝐀P)` on symmetric coordinates and `c = coords(mat(𝐀ᵀy))`.
    Gram { basis: SymBasis, c: DVector<f64> },
}

/// Objective `½‖𝒜(XXᵀ) − y‖²` for a fixed target `y`, with a choice of
/// evaluation path. Results agree across paths up to round-off.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    op: &'a SensingOperator,
    y: DVector<f64>,
    y_norm2: f64,
    path: Path,
}

impl<'a> Objective<'a> {
    /// Picks the Gram path when `n(n+1)/2 ≤ 2m`.
    pub fn new(inst: &'a ProblemInstance) -> Self {
        Self::auto(inst.operator(), inst.measurements().clone())
    }

    /// The noiseless objective `f₀` with target `b = 𝒜(M*)`.
    pub fn noiseless(inst: &'a ProblemInstance) -> Self {
        Self::auto(inst.operator(), inst.clean_measurements())
    }

    pub fn direct(inst: &'a ProblemInstance) -> Self {
        Self::with_target(inst.operator(), inst.measurements().clone(), false)
    }

    pub fn gram(inst: &'a ProblemInstance) -> Self {
        Self::with_target(inst.operator(), inst.measurements().clone(), true)
    }

    fn auto(op: &'a SensingOperator, y: DVector<f64>) -> Self {
        let n = op.n();
        let use_gram = n * (n + 1) / 2 <= 2 * op.m();
        Self::with_target(op, y, use_gram)
    }

    fn with_target(op: &'a SensingOperator, y: DVector<f64>, gram: bool) -> Self {
        let y_norm2 = y.norm_squared();
        let path = if gram {
            let basis = SymBasis::new(op.n());
            let adj = op.apply_adjoint(&y).expect("target has length m");
            let c = basis.coords(&adj);
            Path::Gram { basis, c }
        } else {
            Path::Direct
        };
        Self { op, y, y_norm2, path }
    }

    pub fn uses_gram(&self) -> bool {
        matches!(self.path, Path::Gram { .. })
    }

    /// `(f(X), S)` with `S = mat_s(𝐀ᵀ(𝒜(XXᵀ) − y))`.
    pub fn loss_and_curvature(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let p = outer(x);
        match &self.path {
            Path::Direct => {
                let fit = self.op.apply_forward(&p)? - &self.y;
                let s = linalg::sym(&self.op.apply_adjoint(&fit)?);
                Ok((0.5 * fit.norm_squared(), s))
            }
            Path::Gram { basis, c } => {
                linalg::check_square("Objective", &p, self.op.n())?;
                let coords = basis.coords(&p);
                let hs = self.op.sym_gram() * &coords;
                let loss = 0.5 * coords.dot(&hs) - coords.dot(c) + 0.5 * self.y_norm2;
                Ok((loss.max(0.0), basis.matrix(&(hs - c))))
            }
        }
    }

    pub fn loss(&self, x: &DMatrix<f64>) -> Result<f64> {
        Ok(self.loss_and_curvature(x)?.0)
    }

    /// `(f(X), ∇f(X))`.
    pub fn loss_and_gradient(&self, x: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let (loss, s) = self.loss_and_curvature(x)?;
        Ok((loss, s * x * 2.0))
    }

    /// `mat_s(𝐀ᵀ𝐀 vec(V))` for symmetric `V`.
    fn gram_apply(&self, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match &self.path {
            Path::Direct => Ok(linalg::sym(&self.op.apply_adjoint(&self.op.apply_forward(v)?)?)),
            Path::Gram { basis, .. } => Ok(basis.matrix(&(self.op.sym_gram() * basis.coords(v)))),
        }
    }

    /// `∇²f(X)[U]` given the curvature matrix `S` at `X`.
    pub fn hvp_with(&self, x: &DMatrix<f64>, s: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let k = self.gram_apply(&sym_product(x, u))?;
        Ok((s * u + k * x) * 2.0)
    }

    pub fn min_hessian_eig(&self, x: &DMatrix<f64>, tol: f64) -> Result<(f64, DMatrix<f64>)> {
        let (_, s) = self.loss_and_curvature(x)?;
        self.min_hessian_eig_with(x, &s, tol)
    }

    pub fn min_hessian_eig_with(
        &self,
        x: &DMatrix<f64>,
        s: &DMatrix<f64>,
        tol: f64,
    ) -> Result<(f64, DMatrix<f64>)> {
        let (n, r) = x.shape();
        let dim = n * r;
        let start = gaussian_matrix(&mut stream_rng(LANCZOS_SEED, 0), dim, 1).column(0).into_owned();
        let apply = |v: &DVector<f64>| {
            let u = DMatrix::from_column_slice(n, r, v.as_slice());
            let hu = self.hvp_with(x, s, &u).expect("shapes fixed above");
            DVector::from_column_slice(hu.as_slice())
        };
        let (lam, v) = lanczos_smallest(dim, apply, &start, tol, 160, 400)?;
        Ok((lam, DMatrix::from_column_slice(n, r, v.as_slice())))
    }

    pub fn soc_residuals(&self, x: &DMatrix<f64>) -> Result<SocResiduals> {
        let (_, s) = self.loss_and_curvature(x)?;
        let grad = &s * x * 2.0;
        self.soc_residuals_with(x, &s, &grad)
    }

    pub(crate) fn soc_residuals_with(
        &self,
        x: &DMatrix<f64>,
        s: &DMatrix<f64>,
        grad: &DMatrix<f64>,
    ) -> Result<SocResiduals> {
        let (kappa_grad, zero_point) = grad_residual(x, grad);
        let (hess_min_eig, _) = self.min_hessian_eig_with(x, s, EIG_TOL)?;
        Ok(SocResiduals {
            kappa_grad,
            kappa_eig: (-hess_min_eig).max(0.0),
            hess_min_eig,
            zero_point,
        })
    }
}

/// `(‖∇f‖_F / ‖X‖₂, zero_point)`.
pub(crate) fn grad_residual(x: &DMatrix<f64>, grad: &DMatrix<f64>) -> (f64, bool) {
    let norm = linalg::spectral_norm(x);
    if norm == 0.0 {
        (grad.norm(), true)
    } else {
        (grad.norm() / norm, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{generate_instance, InstanceSpec, NoiseModel};

    fn instance(n: usize, m: usize, r: usize, rs: usize, sigma: f64, seed: u64) -> ProblemInstance {
        let noise = if sigma > 0.0 {
            NoiseModel::Gaussian { sigma }
        } else {
            NoiseModel::None
        };
        generate_instance(&InstanceSpec::new(n, m, r, rs, noise, seed)).unwrap()
    }

    fn truth_factor(inst: &ProblemInstance) -> DMatrix<f64> {
        inst.truth().padded_factor(inst.r()).unwrap()
    }

    #[test]
    fn exact_fit_has_zero_loss_and_gradient() {
        let inst = instance(5, 60, 2, 2, 0.0, 1);
        let z = truth_factor(&inst);
        assert!(loss(&inst, &z).unwrap() < 1e-25);
        assert!(residual(&inst, &z).unwrap().0.amax() < 1e-14);
        assert!(gradient(&inst, &z).unwrap().amax() < 1e-12);
    }

    #[test]
    fn loss_at_zero_is_half_measurement_energy() {
        let inst = instance(4, 30, 2, 1, 0.0, 2);
        let zero = DMatrix::zeros(4, 2);
        let expect = 0.5 * inst.measurements().norm_squared();
        assert!((loss(&inst, &zero).unwrap() - expect).abs() < 1e-14 * expect);
        assert_eq!(gradient(&inst, &zero).unwrap(), DMatrix::zeros(4, 2));
    }

    #[test]
    fn loss_equals_half_fit_norm() {
        let inst = instance(5, 40, 3, 2, 0.1, 3);
        let x = gaussian_matrix(&mut stream_rng(4, 0), 5, 3);
        let (_, fit) = residual(&inst, &x).unwrap();
        let l = loss(&inst, &x).unwrap();
        assert!((l - 0.5 * fit.norm_squared()).abs() < 1e-10 * (1.0 + l));
    }

    #[test]
    fn lift_matrix_matches_definition() {
        let mut rng = stream_rng(5, 0);
        let x = gaussian_matrix(&mut rng, 4, 2);
        let u = gaussian_matrix(&mut rng, 4, 2);
        let lhs = lift_matrix(&x) * linalg::vec(&u);
        assert!((lhs - linalg::vec(&sym_product(&x, &u))).amax() < 1e-13);
    }

    #[test]
    fn hvp_matches_dense() {
        let inst = instance(6, 50, 2, 2, 0.05, 6);
        let mut rng = stream_rng(6, 1);
        let x = gaussian_matrix(&mut rng, 6, 2);
        let u = gaussian_matrix(&mut rng, 6, 2);
        let h = hessian_dense(&inst, &x).unwrap();
        assert!((&h - h.transpose()).amax() < 1e-10);
        let dense = &h * linalg::vec(&u);
        let mv = hvp(&inst, &x, &u).unwrap();
        assert!((dense - linalg::vec(&mv)).amax() < 1e-10 * (1.0 + mv.amax()));
    }

    #[test]
    fn gram_and_direct_paths_agree() {
        let inst = instance(5, 80, 3, 2, 0.05, 7);
        let mut rng = stream_rng(7, 1);
        let x = gaussian_matrix(&mut rng, 5, 3);
        let u = gaussian_matrix(&mut rng, 5, 3);
        let d = Objective::direct(&inst);
        let g = Objective::gram(&inst);
        assert!(g.uses_gram() && !d.uses_gram());
        let (ld, sd) = d.loss_and_curvature(&x).unwrap();
        let (lg, sg) = g.loss_and_curvature(&x).unwrap();
        assert!((ld - lg).abs() < 1e-10 * (1.0 + ld));
        assert!((&sd - &sg).amax() < 1e-10 * (1.0 + sd.amax()));
        let hd = d.hvp_with(&x, &sd, &u).unwrap();
        let hg = g.hvp_with(&x, &sg, &u).unwrap();
        assert!((&hd - &hg).amax() < 1e-9 * (1.0 + hd.amax()));
        assert!((hd - hvp(&inst, &x, &u).unwrap()).amax() < 1e-10 * (1.0 + sd.amax()));
    }

    #[test]
    fn min_eig_matches_dense_solver() {
        let inst = instance(6, 50, 2, 2, 0.05, 8);
        let x = gaussian_matrix(&mut stream_rng(8, 1), 6, 2) * 0.3;
        let tol = 1e-9;
        let (lam, v) = min_hessian_eig(&inst, &x, tol).unwrap();
        let dense = linalg::min_eigenvalue(&hessian_dense(&inst, &x).unwrap());
        assert!((lam - dense).abs() <= tol * (1.0 + dense.abs()), "{lam} vs {dense}");
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn global_minimizer_has_nonnegative_curvature() {
        let inst = instance(6, 120, 2, 2, 0.0, 9);
        let z = truth_factor(&inst);
        let res = soc_residuals(&inst, &z).unwrap();
        assert!(res.hess_min_eig >= -1e-8);
        assert!(res.kappa_grad <= 1e-8 && res.kappa_eig <= 1e-8);
    }

    #[test]
    fn scaling_operator_scales_noiseless_curvature_quadratically() {
        let inst = instance(5, 40, 2, 2, 0.0, 10);
        let c = 1.7;
        let scaled = ProblemInstance::new(
            inst.operator().scaled(c),
            inst.truth().clone(),
            inst.r(),
            DVector::zeros(inst.m()),
            NoiseModel::None,
            0,
        )
        .unwrap();
        let x = gaussian_matrix(&mut stream_rng(10, 1), 5, 2);
        let (a, _) = min_hessian_eig(&inst, &x, 1e-11).unwrap();
        let (b, _) = min_hessian_eig(&scaled, &x, 1e-11).unwrap();
        assert!((b - c * c * a).abs() < 1e-8 * (1.0 + b.abs()));
    }

    #[test]
    fn zero_point_residuals_follow_curvature_formula() {
        let inst = instance(5, 60, 2, 2, 0.02, 11);
        let zero = DMatrix::zeros(5, 2);
        let res = soc_residuals(&inst, &zero).unwrap();
        assert!(res.zero_point);
        assert_eq!(res.kappa_grad, 0.0);
        let (_, fit) = residual(&inst, &zero).unwrap();
        let s = linalg::mat_s(&inst.operator().matrix_form().tr_mul(&fit)).unwrap();
        let expect = (-2.0 * linalg::min_eigenvalue(&s)).max(0.0);
        assert!((res.kappa_eig - expect).abs() < 1e-9 * (1.0 + expect));
    }

    #[test]
    fn dense_guard() {
        let big = generate_instance(&InstanceSpec::new(60, 2, 40, 1, NoiseModel::None, 0)).unwrap();
        let x = DMatrix::zeros(60, 40);
        assert!(matches!(hessian_dense(&big, &x), Err(SenseError::Size { .. })));
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let inst = instance(4, 10, 2, 2, 0.0, 0);
        assert!(loss(&inst, &DMatrix::zeros(3, 2)).is_err());
        assert!(gradient(&inst, &DMatrix::zeros(4, 3)).is_err());
    }
}
