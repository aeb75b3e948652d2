//! Linear sensing operators `𝒜(M) = [⟨A_1, M⟩, …, ⟨A_m, M⟩]ᵀ`, problem
//! instances and their persistence, and RIP estimation.

mod instance;
mod io;
mod rip;

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Result, SenseError};
use crate::linalg::{self, SymBasis};

pub use instance::{generate_instance, GroundTruth, InstanceSpec, NoiseModel, ProblemInstance};
pub use io::{load_instance, save_instance, instance_from_json, instance_to_json};
pub use rip::{distortion, estimate_rip, RipEstimate};

/// Eigenvalue range of `𝐀ᵀ𝐀` over all of `ℝ^{n²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramSpectrum {
    pub min: f64,
    pub max: f64,
}

impl GramSpectrum {
    /// `max(1 - λ_min, λ_max - 1)` clamped at zero. A valid RIP constant for every rank.
    pub fn delta(&self) -> f64 {
        (1.0 - self.min).max(self.max - 1.0).max(0.0)
    }
}

/// The `m` sensing matrices together with lazily built derived forms.
#[derive(Debug, Clone)]
pub struct SensingOperator {
    n: usize,
    sensing: Vec<DMatrix<f64>>,
    matrix_form: OnceLock<DMatrix<f64>>,
    spectrum: OnceLock<GramSpectrum>,
    sym_gram: OnceLock<DMatrix<f64>>,
}

impl PartialEq for SensingOperator {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.sensing == other.sensing
    }
}

impl SensingOperator {
    pub fn new(sensing: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = sensing
            .first()
            .ok_or_else(|| SenseError::Parameter("a sensing operator needs at least one matrix".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(SenseError::Parameter("sensing matrices must be non-empty".into()));
        }
        for a in &sensing {
            linalg::check_square("SensingOperator::new", a, n)?;
        }
        Ok(Self {
            n,
            sensing,
            matrix_form: OnceLock::new(),
            spectrum: OnceLock::new(),
            sym_gram: OnceLock::new(),
        })
    }

    /// Builds the operator from its stacked `m x n²` form (row `i` is `vec(A_i)`).
    pub fn from_matrix_form(n: usize, a: DMatrix<f64>) -> Result<Self> {
        if a.ncols() != n * n {
            return Err(dim_err("SensingOperator::from_matrix_form", n * n, a.ncols()));
        }
        let sensing = (0..a.nrows())
            .map(|i| DMatrix::from_iterator(n, n, a.row(i).iter().copied()))
            .collect();
        let op = Self::new(sensing)?;
        let _ = op.matrix_form.set(a);
        Ok(op)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.sensing.len()
    }

    pub fn sensing(&self) -> &[DMatrix<f64>] {
        &self.sensing
    }

    /// The stacked matrix `𝐀 ∈ ℝ^{m x n²}`.
    pub fn matrix_form(&self) -> &DMatrix<f64> {
        self.matrix_form.get_or_init(|| {
            let n2 = self.n * self.n;
            let mut a = DMatrix::zeros(self.m(), n2);
            for (i, ai) in self.sensing.iter().enumerate() {
                for (k, v) in ai.as_slice().iter().enumerate() {
                    a[(i, k)] = *v;
                }
            }
            a
        })
    }

    pub fn apply_forward(&self, m: &DMatrix<f64>) -> Result<DVector<f64>> {
        linalg::check_square("apply_forward", m, self.n)?;
        Ok(self.matrix_form() * linalg::vec(m))
    }

    pub fn apply_adjoint(&self, y: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y.len() != self.m() {
            return Err(dim_err("apply_adjoint", self.m(), y.len()));
        }
        let v = self.matrix_form().tr_mul(y);
        Ok(DMatrix::from_column_slice(self.n, self.n, v.as_slice()))
    }

    /// `𝐀ᵀ y` as a vector of length `n²`.
    pub fn adjoint_vec(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.m() {
            return Err(dim_err("adjoint_vec", self.m(), y.len()));
        }
        Ok(self.matrix_form().tr_mul(y))
    }

    /// Extreme eigenvalues of `𝐀ᵀ𝐀`; when `m < n²` the smallest one is zero.
    pub fn gram_spectrum(&self) -> GramSpectrum {
        *self.spectrum.get_or_init(|| {
            let a = self.matrix_form();
            let n2 = self.n * self.n;
            let small = if self.m() >= n2 { a.tr_mul(a) } else { a * a.transpose() };
            let eig = SymmetricEigen::new(small).eigenvalues;
            let max = eig.max().max(0.0);
            let min = if self.m() >= n2 { eig.min().max(0.0) } else { 0.0 };
            GramSpectrum { min, max }
        })
    }

    /// `‖𝐀‖₂`.
    pub fn op_norm(&self) -> f64 {
        self.gram_spectrum().max.sqrt()
    }

    /// `𝐀ᵀ𝐀` restricted to symmetric matrices, in [`SymBasis`] coordinates.
    pub fn sym_gram(&self) -> &DMatrix<f64> {
        self.sym_gram.get_or_init(|| {
            let basis = SymBasis::new(self.n);
            let restricted = basis
                .restrict_columns(self.matrix_form())
                .expect("matrix form has n² columns");
            restricted.tr_mul(&restricted)
        })
    }

    /// The operator with every `A_i` multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.sensing.iter().map(|a| a * c).collect()).expect("same shapes")
    }
}
