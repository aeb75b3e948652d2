use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::SensingOperator;
use crate::error::{dim_err, Result, SenseError};
use crate::linalg::{self, sym_eigen_sorted};
use crate::rng::{gaussian, gaussian_matrix, stream_rng};

const OPERATOR_STREAM: u64 = 0;
const TRUTH_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Distribution of the measurement noise `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    None,
    /// `w_i ~ N(0, σ²)`.
    Gaussian { sigma: f64 },
    /// `w_i ~ Uniform[-σ, σ]`, a bounded σ-sub-Gaussian law.
    SubGaussian { sigma: f64 },
}

impl NoiseModel {
    pub fn kind(&self) -> &'static str {
        match self {
            NoiseModel::None => "none",
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::SubGaussian { .. } => "subg",
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Gaussian { sigma } | NoiseModel::SubGaussian { sigma } => sigma,
        }
    }

    pub fn from_kind(kind: &str, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(SenseError::Parameter(format!("noise sigma must be finite and >= 0, got {sigma}")));
        }
        match kind {
            "none" => Ok(NoiseModel::None),
            "gaussian" => Ok(NoiseModel::Gaussian { sigma }),
            "subg" => Ok(NoiseModel::SubGaussian { sigma }),
            other => Err(SenseError::Parameter(format!(
                "unknown noise kind `{other}` (expected gaussian, subg or none)"
            ))),
        }
    }

    /// Draws a length-`m` noise vector.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, m: usize) -> DVector<f64> {
        match *self {
            NoiseModel::None => DVector::zeros(m),
            NoiseModel::Gaussian { sigma } => DVector::from_fn(m, |_, _| sigma * gaussian(rng)),
            NoiseModel::SubGaussian { sigma } => {
                DVector::from_fn(m, |_, _| sigma * (2.0 * rng.random::<f64>() - 1.0))
            }
        }
    }
}

/// A symmetric PSD ground truth `M*` of rank `r*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    m_star: DMatrix<f64>,
    r_star: usize,
    spectrum: Vec<f64>,
    factor: DMatrix<f64>,
}

impl GroundTruth {
    pub fn new(m_star: DMatrix<f64>, r_star: usize) -> Result<Self> {
        let n = m_star.nrows();
        linalg::check_square("GroundTruth", &m_star, n)?;
        if r_star == 0 || r_star > n {
            return Err(SenseError::Parameter(format!("r_star must lie in 1..={n}, got {r_star}")));
        }
        let scale = m_star.amax().max(1.0);
        if (&m_star - m_star.transpose()).amax() > 1e-12 * scale {
            return Err(SenseError::Validation {
                field: "m_star".into(),
                message: "ground truth is not symmetric".into(),
            });
        }
        let (vals, vecs) = sym_eigen_sorted(&m_star);
        let lam_max = vals.max().max(1.0);
        let mut spectrum = Vec::with_capacity(r_star);
        let mut factor = DMatrix::zeros(n, r_star);
        for k in 0..r_star {
            let idx = n - 1 - k;
            spectrum.push(vals[idx]);
            factor.set_column(k, &(vecs.column(idx) * vals[idx].max(0.0).sqrt()));
        }
        if spectrum[r_star - 1] <= 1e-12 {
            return Err(SenseError::DegenerateTruth(format!(
                "eigenvalue λ_{r_star} = {:e} is not positive",
                spectrum[r_star - 1]
            )));
        }
        if let Some(rest) = (0..n - r_star).map(|i| vals[i].abs()).reduce(f64::max) {
            if rest > 1e-10 * lam_max {
                return Err(SenseError::Validation {
                    field: "m_star".into(),
                    message: format!("rank exceeds r_star = {r_star} (residual eigenvalue {rest:e})"),
                });
            }
        }
        Ok(Self {
            m_star,
            r_star,
            spectrum,
            factor,
        })
    }

    pub fn m_star(&self) -> &DMatrix<f64> {
        &self.m_star
    }

    pub fn r_star(&self) -> usize {
        self.r_star
    }

    /// `λ_1 ≥ … ≥ λ_{r*} > 0`.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn lambda_max(&self) -> f64 {
        self.spectrum[0]
    }

    pub fn lambda_min_nonzero(&self) -> f64 {
        self.spectrum[self.r_star - 1]
    }

    /// `Z` with `ZZᵀ = M*`, built from the top eigenpairs (`n x r*`).
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `Z` zero-padded to `n x r`.
    pub fn padded_factor(&self, r: usize) -> Result<DMatrix<f64>> {
        if r < self.r_star {
            return Err(SenseError::Parameter(format!(
                "search rank {r} is below the true rank {}",
                self.r_star
            )));
        }
        let n = self.m_star.nrows();
        let mut z = DMatrix::zeros(n, r);
        z.columns_mut(0, self.r_star).copy_from(&self.factor);
        Ok(z)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.m_star.norm()
    }
}

/// Everything a run needs: operator, truth, noise and the search rank.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    operator: SensingOperator,
    truth: GroundTruth,
    r: usize,
    noise: DVector<f64>,
    measurements: DVector<f64>,
    noise_model: NoiseModel,
    seed: u64,
}

impl ProblemInstance {
    /// Assembles an instance; measurements are computed as `𝒜(M*) − w`.
    pub fn new(
        operator: SensingOperator,
        truth: GroundTruth,
        r: usize,
        noise: DVector<f64>,
        noise_model: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        if operator.n() != truth.m_star().nrows() {
            return Err(dim_err("ProblemInstance", operator.n(), truth.m_star().nrows()));
        }
        if noise.len() != operator.m() {
            return Err(dim_err("ProblemInstance noise", operator.m(), noise.len()));
        }
        if r < truth.r_star() {
            return Err(SenseError::Parameter(format!(
                "search rank r = {r} must be at least r_star = {}",
                truth.r_star()
            )));
        }
        let measurements = operator.apply_forward(truth.m_star())? - &noise;
        Ok(Self {
            operator,
            truth,
            r,
            noise,
            measurements,
            noise_model,
            seed,
        })
    }

    pub fn operator(&self) -> &SensingOperator {
        &self.operator
    }

    pub fn truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn n(&self) -> usize {
        self.operator.n()
    }

    pub fn m(&self) -> usize {
        self.operator.m()
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn r_star(&self) -> usize {
        self.truth.r_star()
    }

    pub fn noise(&self) -> &DVector<f64> {
        &self.noise
    }

    /// Observed, corrupted measurements `b − w`.
    pub fn measurements(&self) -> &DVector<f64> {
        &self.measurements
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.noise_model
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Noiseless measurements `b = 𝒜(M*)`.
    pub fn clean_measurements(&self) -> DVector<f64> {
        &self.measurements + &self.noise
    }

    /// Realized noise level `‖𝐀ᵀw‖`.
    pub fn realized_eps(&self) -> f64 {
        self.operator.adjoint_vec(&self.noise).expect("noise has length m").norm()
    }

    /// `‖XXᵀ − M*‖_F`.
    pub fn err_frob(&self, x: &DMatrix<f64>) -> f64 {
        (x * x.transpose() - self.truth.m_star()).norm()
    }

    /// Same instance with the noise removed.
    pub fn noiseless(&self) -> Self {
        Self::new(
            self.operator.clone(),
            self.truth.clone(),
            self.r,
            DVector::zeros(self.m()),
            NoiseModel::None,
            self.seed,
        )
        .expect("shapes already validated")
    }

    /// Same instance with a different search rank.
    pub fn with_rank(&self, r: usize) -> Result<Self> {
        Self::new(
            self.operator.clone(),
            self.truth.clone(),
            r,
            self.noise.clone(),
            self.noise_model,
            self.seed,
        )
    }

    pub(crate) fn from_parts_unchecked(
        operator: SensingOperator,
        truth: GroundTruth,
        r: usize,
        noise: DVector<f64>,
        measurements: DVector<f64>,
        noise_model: NoiseModel,
        seed: u64,
    ) -> Self {
        Self {
            operator,
            truth,
            r,
            noise,
            measurements,
            noise_model,
            seed,
        }
    }
}

/// Parameters of a synthetic Gaussian-ensemble instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub r_star: usize,
    pub spectrum: Vec<f64>,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl InstanceSpec {
    /// Spectrum spread linearly from 1.5 down to 1 (a single `1.0` when `r* = 1`).
    pub fn default_spectrum(r_star: usize) -> Vec<f64> {
        match r_star {
            0 => Vec::new(),
            1 => vec![1.0],
            k => (0..k).map(|i| 1.5 - 0.5 * i as f64 / (k - 1) as f64).collect(),
        }
    }

    pub fn new(n: usize, m: usize, r: usize, r_star: usize, noise: NoiseModel, seed: u64) -> Self {
        Self {
            n,
            m,
            r,
            r_star,
            spectrum: Self::default_spectrum(r_star),
            noise,
            seed,
        }
    }
}

/// Samples a Gaussian sensing operator (entries `N(0, 1/m)`), a random
/// rank-`r*` truth `UΛUᵀ` and noise, each from its own seeded stream.
pub fn generate_instance(spec: &InstanceSpec) -> Result<ProblemInstance> {
    let InstanceSpec {
        n,
        m,
        r,
        r_star,
        ref spectrum,
        noise,
        seed,
    } = *spec;
    if n == 0 || m == 0 {
        return Err(SenseError::Parameter("n and m must be positive".into()));
    }
    if r_star == 0 || r_star > n {
        return Err(SenseError::Parameter(format!("r_star must lie in 1..={n}, got {r_star}")));
    }
    if r < r_star {
        return Err(SenseError::Parameter(format!(
            "search rank r = {r} must be at least r_star = {r_star}"
        )));
    }
    if spectrum.len() != r_star {
        return Err(SenseError::Parameter(format!(
            "spectrum has {} entries, expected r_star = {r_star}",
            spectrum.len()
        )));
    }
    if let Some(bad) = spectrum.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(SenseError::Parameter(format!("spectrum entries must be positive, got {bad}")));
    }
    NoiseModel::from_kind(noise.kind(), noise.sigma())?;

    let mut op_rng = stream_rng(seed, OPERATOR_STREAM);
    let scale = 1.0 / (m as f64).sqrt();
    let sensing = (0..m)
        .map(|_| gaussian_matrix(&mut op_rng, n, n) * scale)
        .collect();
    let operator = SensingOperator::new(sensing)?;

    let mut truth_rng = stream_rng(seed, TRUTH_STREAM);
    let frame = gaussian_matrix(&mut truth_rng, n, r_star).qr().q();
    let mut weighted = frame.clone();
    for (k, lam) in spectrum.iter().enumerate() {
        weighted.column_mut(k).scale_mut(*lam);
    }
    let m_star = linalg::sym(&(weighted * frame.transpose()));
    let truth = GroundTruth::new(m_star, r_star)?;

    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let w = noise.sample(&mut noise_rng, m);

    ProblemInstance::new(operator, truth, r, w, noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_instance_measures_truth() {
        let inst = generate_instance(&InstanceSpec::new(5, 40, 2, 2, NoiseModel::None, 1)).unwrap();
        assert_eq!(inst.noise(), &DVector::zeros(40));
        let b = inst.operator().apply_forward(inst.truth().m_star()).unwrap();
        assert_eq!(inst.measurements(), &b);
        assert_eq!(inst.realized_eps(), 0.0);
    }

    #[test]
    fn spectrum_is_reproduced() {
        let mut spec = InstanceSpec::new(8, 50, 4, 3, NoiseModel::None, 2);
        assert_eq!(spec.spectrum, vec![1.5, 1.25, 1.0]);
        spec.spectrum = vec![1.5, 1.0, 1.0];
        let inst = generate_instance(&spec).unwrap();
        assert!((inst.truth().lambda_max() - 1.5).abs() < 1e-12);
        assert!((inst.truth().lambda_min_nonzero() - 1.0).abs() < 1e-12);
        let z = inst.truth().factor();
        assert!((z * z.transpose() - inst.truth().m_star()).amax() < 1e-12);
    }

    #[test]
    fn parameter_errors() {
        let bad_rank = InstanceSpec::new(5, 10, 1, 2, NoiseModel::None, 0);
        assert!(matches!(generate_instance(&bad_rank), Err(SenseError::Parameter(_))));
        let mut bad_spec = InstanceSpec::new(5, 10, 2, 2, NoiseModel::None, 0);
        bad_spec.spectrum = vec![1.0, 0.0];
        assert!(matches!(generate_instance(&bad_spec), Err(SenseError::Parameter(_))));
    }

    #[test]
    fn noise_is_sampled_and_subtracted() {
        let inst =
            generate_instance(&InstanceSpec::new(4, 30, 2, 1, NoiseModel::Gaussian { sigma: 0.1 }, 3)).unwrap();
        assert!(inst.noise().norm() > 0.0);
        let b = inst.operator().apply_forward(inst.truth().m_star()).unwrap();
        assert_eq!(inst.measurements(), &(b - inst.noise()));

        let sub =
            generate_instance(&InstanceSpec::new(4, 200, 2, 1, NoiseModel::SubGaussian { sigma: 0.1 }, 3)).unwrap();
        assert!(sub.noise().amax() <= 0.1);
    }

    #[test]
    fn changing_noise_keeps_operator_and_truth() {
        let a = generate_instance(&InstanceSpec::new(4, 20, 2, 2, NoiseModel::None, 11)).unwrap();
        let b = generate_instance(&InstanceSpec::new(4, 20, 2, 2, NoiseModel::Gaussian { sigma: 1.0 }, 11)).unwrap();
        assert_eq!(a.operator(), b.operator());
        assert_eq!(a.truth(), b.truth());
    }

    #[test]
    fn degenerate_truth_rejected() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0]));
        assert!(matches!(GroundTruth::new(m, 2), Err(SenseError::DegenerateTruth(_))));
    }
}
