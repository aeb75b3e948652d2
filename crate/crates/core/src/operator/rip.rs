use nalgebra::DMatrix;

use super::SensingOperator;
use crate::error::{Result, SenseError};
use crate::rng::{derive_seed, gaussian_matrix, stream_rng};

/// Bracket `[delta_lower, delta_upper]` on the rank-`g` RIP constant.
#[derive(Debug, Clone, PartialEq)]
pub struct RipEstimate {
    pub g: usize,
    /// Spectral bound `max(1 − λ_min(𝐀ᵀ𝐀), λ_max(𝐀ᵀ𝐀) − 1)`, valid for every rank.
    pub delta_upper: f64,
    /// Largest `|‖𝒜(M)‖² − 1|` over the sampled unit-norm rank-`g` matrices.
    pub delta_lower: f64,
    pub trials: usize,
    pub worst_witness: Option<DMatrix<f64>>,
}

/// Distortion `|‖𝒜(M)‖²/‖M‖²_F − 1|` of a single matrix.
pub fn distortion(op: &SensingOperator, m: &DMatrix<f64>) -> Result<f64> {
    let norm2 = m.norm_squared();
    if norm2 == 0.0 {
        return Ok(0.0);
    }
    Ok((op.apply_forward(m)?.norm_squared() / norm2 - 1.0).abs())
}

/// Trial `i` draws `UVᵀ` from its own derived seed, so the estimate with
/// more trials is a maximum over a superset of samples.
pub fn estimate_rip(op: &SensingOperator, g: usize, trials: usize, seed: u64) -> Result<RipEstimate> {
    let n = op.n();
    if g == 0 || g > n {
        return Err(SenseError::Parameter(format!("rank parameter g must lie in 1..={n}, got {g}")));
    }
    let delta_upper = op.gram_spectrum().delta();
    let mut delta_lower = 0.0;
    let mut worst_witness = None;
    for t in 0..trials {
        let mut rng = stream_rng(derive_seed(seed, t as u64), 0);
        let u = gaussian_matrix(&mut rng, n, g);
        let v = gaussian_matrix(&mut rng, n, g);
        let mut m = u * v.transpose();
        let norm = m.norm();
        if norm == 0.0 {
            continue;
        }
        m /= norm;
        let d = distortion(op, &m)?;
        if worst_witness.is_none() || d > delta_lower {
            delta_lower = d;
            worst_witness = Some(m);
        }
    }
    Ok(RipEstimate {
        g,
        delta_upper,
        delta_lower,
        trials,
        worst_witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::operator::{generate_instance, InstanceSpec, NoiseModel};

    #[test]
    fn orthonormal_rows_have_zero_spectral_delta() {
        let n = 3;
        let q = gaussian_matrix(&mut stream_rng(4, 0), n * n, n * n).qr().q();
        let op = SensingOperator::from_matrix_form(n, q).unwrap();
        let est = estimate_rip(&op, 2, 10, 0).unwrap();
        assert!(est.delta_upper < 1e-12);
        assert!(est.delta_lower < 1e-12);
    }

    #[test]
    fn annihilated_witness_has_unit_distortion() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let op = SensingOperator::new(vec![a]).unwrap();
        let witness = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!(distortion(&op, &witness).unwrap() >= 1.0);
        assert!(estimate_rip(&op, 1, 50, 1).unwrap().delta_upper >= 1.0);
    }

    #[test]
    fn monte_carlo_interval_is_ordered() {
        let inst = generate_instance(&InstanceSpec::new(10, 400, 2, 2, NoiseModel::None, 5)).unwrap();
        let est = estimate_rip(inst.operator(), 2, 200, 7).unwrap();
        assert!(est.delta_lower <= est.delta_upper);
        let w = est.worst_witness.as_ref().unwrap();
        assert!(distortion(inst.operator(), w).unwrap() >= est.delta_lower - 1e-10);
        assert!(linalg::singular_values(w)[2] < 1e-10);
    }

    #[test]
    fn lower_estimate_grows_with_trials() {
        let inst = generate_instance(&InstanceSpec::new(6, 60, 2, 2, NoiseModel::None, 2)).unwrap();
        let mut prev = 0.0;
        for trials in [1, 5, 20, 80] {
            let est = estimate_rip(inst.operator(), 2, trials, 3).unwrap();
            assert!(est.delta_lower >= prev);
            prev = est.delta_lower;
        }
    }

    #[test]
    fn rank_above_n_rejected() {
        let op = SensingOperator::new(vec![DMatrix::identity(2, 2)]).unwrap();
        assert!(matches!(estimate_rip(&op, 3, 1, 0), Err(SenseError::Parameter(_))));
    }
}
