use nalgebra::DMatrix;

use crate::error::Result;
use crate::linalg;
use crate::objective::{outer, sym_product};
use crate::operator::GroundTruth;

/// Singular values below this fraction of `σ₁(X̂)` are treated as zero when
/// forming the projector onto `range(X̂)`.
const RANGE_TOL: f64 = 1e-12;

/// `X̂X̂ᵀ` counts as equal to `M*` below this relative error.
const DEGENERATE_TOL: f64 = 1e-13;

/// `Z⊥` counts as zero when `‖Z⊥Z⊥ᵀ‖_F ≤ PERP_TOL · ‖X̂X̂ᵀ − M*‖_F`.
const PERP_TOL: f64 = 1e-12;

/// Splitting of the error `X̂X̂ᵀ − ZZᵀ` into a part reachable by moving `X̂`
/// and the part `Z⊥Z⊥ᵀ` orthogonal to `range(X̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentStats {
    /// `Z` with `ZZᵀ = M*` (top eigenpairs, zero-padded to `n x r`).
    pub z: DMatrix<f64>,
    /// Projector `𝒫` onto `range(X̂)`.
    pub proj: DMatrix<f64>,
    /// `𝒫⊥ = I − 𝒫`.
    pub proj_perp: DMatrix<f64>,
    /// `R = X̂⁺Z`, so that `X̂R = 𝒫Z`.
    pub r_mat: DMatrix<f64>,
    /// `Ŷ = ½X̂ − ½X̂RRᵀ − 𝒫⊥ZRᵀ`.
    pub y_hat: DMatrix<f64>,
    /// `Z⊥Z⊥ᵀ` with `Z⊥ = 𝒫⊥Z`.
    pub perp_gram: DMatrix<f64>,
    pub alpha: f64,
    pub beta: f64,
    /// Angle between `𝐗̂ŷ` and `𝐞`.
    pub theta: f64,
    pub perp_flag: bool,
    /// `X̂X̂ᵀ = M*`; every distance is zero and the remaining fields are trivial.
    pub degenerate: bool,
    /// `‖𝐞‖ = ‖X̂X̂ᵀ − M*‖_F`.
    pub e_norm: f64,
    /// `‖𝐗̂ŷ‖ = ‖X̂Ŷᵀ + ŶX̂ᵀ‖_F`.
    pub xy_norm: f64,
    pub perp_fro: f64,
    pub perp_trace: f64,
    pub sigma_r: f64,
    pub x_norm: f64,
}

impl AlignmentStats {
    /// `X̂Ŷᵀ + ŶX̂ᵀ`, the matrix form of `𝐗̂ŷ`.
    pub fn xy_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        sym_product(x, &self.y_hat)
    }
}

/// Decomposes `X̂X̂ᵀ − M*` relative to `range(X̂)`.
pub fn align_decompose(x: &DMatrix<f64>, truth: &GroundTruth) -> Result<AlignmentStats> {
    let n = truth.m_star().nrows();
    let r = x.ncols();
    linalg::check_shape("align_decompose X", x, n, r)?;
    let z = truth.padded_factor(r)?;

    let svd = x.clone().svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let s_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let mut proj = DMatrix::zeros(n, n);
    let mut pinv = DMatrix::zeros(r, n);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > RANGE_TOL * s_max && s > 0.0 {
            let uk = u.column(k);
            proj += uk * uk.transpose();
            pinv += v_t.row(k).transpose() * uk.transpose() / s;
        }
    }
    let proj = linalg::sym(&proj);
    let proj_perp = DMatrix::identity(n, n) - &proj;
    let r_mat = &pinv * &z;
    let z_perp = &proj_perp * &z;
    let y_hat = x * 0.5 - x * (&r_mat * r_mat.transpose()) * 0.5 - &z_perp * r_mat.transpose();
    let perp_gram = outer(&z_perp);

    let err = outer(x) - truth.m_star();
    let e_norm = err.norm();
    let a = sym_product(x, &y_hat);
    let xy_norm = a.norm();
    let sigma_r = linalg::sigma_r(x);
    let x_norm = s_max;
    let perp_trace = perp_gram.trace();

    if e_norm <= DEGENERATE_TOL * truth.frobenius_norm().max(1.0) {
        return Ok(AlignmentStats {
            z,
            proj,
            proj_perp,
            r_mat,
            y_hat,
            perp_gram,
            alpha: 0.0,
            beta: 0.0,
            theta: 0.0,
            perp_flag: true,
            degenerate: true,
            e_norm,
            xy_norm,
            perp_fro: 0.0,
            perp_trace: 0.0,
            sigma_r,
            x_norm,
        });
    }

    let raw_perp_fro = perp_gram.norm();
    let perp_flag = raw_perp_fro <= PERP_TOL * e_norm;
    let (alpha, beta, perp_fro) = if perp_flag {
        (0.0, 0.0, 0.0)
    } else {
        let alpha = (raw_perp_fro / e_norm).min(1.0);
        let beta = sigma_r * sigma_r * perp_trace / (e_norm * raw_perp_fro);
        (alpha, beta, raw_perp_fro)
    };
    let theta = if xy_norm > 0.0 {
        (linalg::frob_inner(&a, &err) / (xy_norm * e_norm)).clamp(-1.0, 1.0).acos()
    } else {
        std::f64::consts::FRAC_PI_2
    };

    Ok(AlignmentStats {
        z,
        proj,
        proj_perp,
        r_mat,
        y_hat,
        perp_gram,
        alpha,
        beta,
        theta,
        perp_flag,
        degenerate: false,
        e_norm,
        xy_norm,
        perp_fro,
        perp_trace,
        sigma_r,
        x_norm,
    })
}
