use serde::Serialize;

use crate::error::{Result, SenseError};

/// `ψ(γ) = γα + √(1−γ²)√(1−α²)`, the cosine between `𝐞` and the mixed direction.
pub fn psi(gamma: f64, alpha: f64) -> f64 {
    gamma * alpha + (1.0 - gamma * gamma).max(0.0).sqrt() * (1.0 - alpha * alpha).max(0.0).sqrt()
}

/// The `γ`-dependent part `(2βγ + 1 − ψ(γ)) / (1 + ψ(γ))` of the dual value.
pub fn mixing_objective(gamma: f64, alpha: f64, beta: f64) -> f64 {
    let p = psi(gamma, alpha);
    (2.0 * beta * gamma + 1.0 - p) / (1.0 + p)
}

/// Minimum of [`mixing_objective`] over `γ ∈ [0, 1]`, in closed form.
pub fn eta0(alpha: f64, beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) || beta < 0.0 || !beta.is_finite() {
        return Err(SenseError::Domain(format!(
            "eta0 needs α ∈ [0, 1] and β ≥ 0, got α = {alpha}, β = {beta}"
        )));
    }
    let s = (1.0 - alpha * alpha).sqrt();
    if beta >= alpha / (1.0 + s) {
        return Ok((1.0 - s) / (1.0 + s));
    }
    let denom = 1.0 - beta * alpha;
    if denom <= 0.0 {
        return Err(SenseError::Domain(format!("βα = {} ≥ 1", beta * alpha)));
    }
    Ok(beta * (alpha - beta) / denom)
}

/// `√(r*/r) / (2 + √(r*/r))`, the worst case of `η₀` over all alignments.
pub fn eta0_threshold(r: usize, r_star: usize) -> f64 {
    let q = (r_star as f64 / r as f64).sqrt();
    q / (2.0 + q)
}

/// Interior minimizer of [`mixing_objective`], when it lies in `[0, 1]`.
///
/// With `γ = sin φ`, `α = sin a` and `t = tan((φ − a)/2)` the objective is the
/// quadratic `βα + 2βt√(1−α²) + t²(1 − βα)` in `t`.
pub fn interior_gamma(alpha: f64, beta: f64) -> Option<f64> {
    let denom = 1.0 - beta * alpha;
    if denom <= 0.0 {
        return None;
    }
    let t = -beta * (1.0 - alpha * alpha).sqrt() / denom;
    let phi = alpha.asin() + 2.0 * t.atan();
    (0.0..=std::f64::consts::FRAC_PI_2).contains(&phi).then(|| phi.sin())
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Minimizes `f` on `[0, 1]` from the given candidates plus a uniform grid,
/// refining the best grid cell by golden-section search.
pub(crate) fn minimize_unit_interval(f: impl Fn(f64) -> f64, candidates: &[f64]) -> (f64, f64) {
    const GRID: usize = 256;
    let mut best = (0.0, f(0.0));
    let mut consider = |g: f64, v: f64| {
        if v < best.1 {
            best = (g, v);
        }
    };
    let mut best_cell = 0;
    let mut best_grid = f64::INFINITY;
    for i in 0..=GRID {
        let g = i as f64 / GRID as f64;
        let v = f(g);
        if v < best_grid {
            best_grid = v;
            best_cell = i;
        }
        consider(g, v);
    }
    for &g in candidates {
        if (0.0..=1.0).contains(&g) {
            consider(g, f(g));
        }
    }
    let lo = best_cell.saturating_sub(1) as f64 / GRID as f64;
    let hi = (best_cell + 1).min(GRID) as f64 / GRID as f64;
    let (g, v) = golden_section(&f, lo, hi, 1e-10);
    consider(g, v);
    best
}

/// The chain `η_lower ≤ η* ≤ η_upper` around a candidate point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaBounds {
    /// `(1−δ)/(1+δ)`.
    pub eta_lower: f64,
    pub eta0: f64,
    /// Dual certificate objective.
    pub eta_upper: f64,
    pub ratio_threshold: f64,
}

impl EtaBounds {
    pub fn new(delta: f64, eta0: f64, eta_upper: f64, r: usize, r_star: usize) -> Self {
        Self {
            eta_lower: (1.0 - delta) / (1.0 + delta),
            eta0,
            eta_upper,
            ratio_threshold: eta0_threshold(r, r_star),
        }
    }

    pub fn sandwich_holds(&self, tol: f64) -> bool {
        self.eta_lower <= self.eta_upper + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_peaks_at_alpha() {
        for alpha in [0.0, 0.2, 0.7, 1.0] {
            assert!((psi(alpha, alpha) - 1.0).abs() < 1e-15);
            for g in [0.0, 0.3, 0.9, 1.0] {
                assert!(psi(g, alpha) <= 1.0 + 1e-15 && psi(g, alpha) >= -1.0);
            }
        }
    }

    #[test]
    fn closed_form_edge_values() {
        assert_eq!(eta0(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(eta0(0.0, 3.0).unwrap(), 0.0);
        assert!((eta0(1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((eta0(0.6, 0.1).unwrap() - 0.05 / 0.94).abs() < 1e-15);
        assert!(matches!(eta0(1.2, 0.1), Err(SenseError::Domain(_))));
    }

    #[test]
    fn closed_form_matches_golden_section() {
        for &(alpha, beta) in &[(0.6, 0.1), (0.3, 0.05), (0.9, 0.8), (0.5, 2.0), (0.99, 0.01)] {
            let (_, v) = golden_section(|g| mixing_objective(g, alpha, beta), 0.0, 1.0, 1e-12);
            let (_, w) = minimize_unit_interval(|g| mixing_objective(g, alpha, beta), &[]);
            let e = eta0(alpha, beta).unwrap();
            assert!((v.min(w) - e).abs() < 1e-6, "α={alpha} β={beta}: {v} vs {e}");
        }
    }

    #[test]
    fn interior_candidate_attains_second_branch() {
        let (alpha, beta) = (0.6, 0.1);
        let g = interior_gamma(alpha, beta).unwrap();
        assert!((mixing_objective(g, alpha, beta) - eta0(alpha, beta).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn threshold_values() {
        assert!((eta0_threshold(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!(eta0_threshold(10, 2) < eta0_threshold(10, 10));
    }
}
