//! Vectorization and small dense linear-algebra helpers.
//!
//! `vec` stacks columns, matching nalgebra's column-major storage, so
//! `vec(M)[i + j*n] == M[(i, j)]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{dim_err, Result, SenseError};

/// Target shape of [`reshape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReshapeMode {
    /// Column stacking.
    Vec,
    /// Inverse of `Vec`.
    Mat,
    /// `Mat` followed by symmetrization `(M + Mᵀ)/2`.
    MatSym,
}

/// Either side of a reshape.
#[derive(Debug, Clone, PartialEq)]
pub enum Reshaped {
    Vector(DVector<f64>),
    Matrix(DMatrix<f64>),
}

/// Dispatching front end over [`vec`], [`mat`] and [`mat_s`].
pub fn reshape(value: &Reshaped, mode: ReshapeMode) -> Result<Reshaped> {
    match (value, mode) {
        (Reshaped::Matrix(m), ReshapeMode::Vec) => Ok(Reshaped::Vector(vec(m))),
        (Reshaped::Vector(v), ReshapeMode::Mat) => mat(v).map(Reshaped::Matrix),
        (Reshaped::Vector(v), ReshapeMode::MatSym) => mat_s(v).map(Reshaped::Matrix),
        (Reshaped::Vector(v), ReshapeMode::Vec) => Ok(Reshaped::Vector(v.clone())),
        (Reshaped::Matrix(m), ReshapeMode::Mat) => Ok(Reshaped::Matrix(m.clone())),
        (Reshaped::Matrix(m), ReshapeMode::MatSym) => Ok(Reshaped::Matrix(sym(m))),
    }
}

pub fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

/// Side length of a square matrix whose vectorization has length `len`.
pub fn square_side(len: usize) -> Result<usize> {
    let n = (len as f64).sqrt().round() as usize;
    if n * n != len {
        return Err(dim_err("mat", "a perfect-square length", len));
    }
    Ok(n)
}

pub fn mat(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    let n = square_side(v.len())?;
    Ok(DMatrix::from_column_slice(n, n, v.as_slice()))
}

pub fn mat_s(v: &DVector<f64>) -> Result<DMatrix<f64>> {
    mat(v).map(|m| sym(&m))
}

pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn frob_inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
pub fn sym_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(sym(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.min()
}

/// Singular values of `x` in descending order.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = x.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `‖x‖₂`.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    singular_values(x).first().copied().unwrap_or(0.0)
}

/// `σ_r(x)` for an `n x r` matrix: the r-th largest singular value (zero when `n < r`).
pub fn sigma_r(x: &DMatrix<f64>) -> f64 {
    let r = x.ncols();
    let s = singular_values(x);
    if r == 0 || s.len() < r {
        0.0
    } else {
        s[r - 1]
    }
}

/// Orthonormal coordinates on the space of symmetric `n x n` matrices.
///
/// Basis elements are `E_ii` and `(E_ij + E_ji)/√2` for `i < j`, so for
/// symmetric `S`, `‖coords(S)‖ = ‖S‖_F` and the coordinate map is the
/// restriction of an isometry. Operators of the form `v ↦ mat_s(H v)` on
/// symmetric inputs become `d x d` matrices with `d = n(n+1)/2`.
#[derive(Debug, Clone)]
pub struct SymBasis {
    n: usize,
    pairs: Vec<(usize, usize)>,
}

impl SymBasis {
    pub fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        for j in 0..n {
            for i in 0..=j {
                pairs.push((i, j));
            }
        }
        Self { n, pairs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.pairs.len()
    }

    /// Coordinates of the symmetric part of `m`.
    pub fn coords(&self, m: &DMatrix<f64>) -> DVector<f64> {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        DVector::from_iterator(
            self.dim(),
            self.pairs.iter().map(|&(i, j)| {
                if i == j {
                    m[(i, i)]
                } else {
                    (m[(i, j)] + m[(j, i)]) * s2
                }
            }),
        )
    }

    pub fn matrix(&self, c: &DVector<f64>) -> DMatrix<f64> {
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut m = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                m[(i, i)] = c[k];
            } else {
                let v = c[k] * s2;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Restricts an `m x n²` row-stacked operator to symmetric inputs: column
    /// `k` is `A · vec(basis_k)`.
    pub fn restrict_columns(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = self.n;
        if a.ncols() != n * n {
            return Err(dim_err("SymBasis::restrict_columns", n * n, a.ncols()));
        }
        let s2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut out = DMatrix::zeros(a.nrows(), self.dim());
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                out.set_column(k, &a.column(i + i * n));
            } else {
                let col = (a.column(i + j * n) + a.column(j + i * n)) * s2;
                out.set_column(k, &col);
            }
        }
        Ok(out)
    }
}

/// Smallest eigenpair of a symmetric linear map given only through its action.
///
/// Lanczos with full reorthogonalization, restarted from the current Ritz
/// vector whenever the Krylov basis reaches `max_basis`. Converged when the
/// Ritz residual is at most `tol * (1 + |θ|)`, or when the basis spans the
/// whole space.
pub fn lanczos_smallest<F>(
    dim: usize,
    apply: F,
    start: &DVector<f64>,
    tol: f64,
    max_basis: usize,
    max_restarts: usize,
) -> Result<(f64, DVector<f64>)>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if dim == 0 {
        return Err(SenseError::Parameter("eigenproblem of dimension zero".into()));
    }
    if !(tol > 0.0) {
        return Err(SenseError::Parameter(format!("tolerance must be positive, got {tol}")));
    }
    let kmax = max_basis.clamp(1, dim);
    let mut v0 = start.clone();
    if v0.len() != dim {
        return Err(dim_err("lanczos_smallest", dim, v0.len()));
    }
    if v0.normalize_mut() == 0.0 {
        v0 = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
    }
    let mut last_residual = f64::INFINITY;
    for _ in 0..=max_restarts {
        let mut basis: Vec<DVector<f64>> = vec![v0.clone()];
        let mut alphas: Vec<f64> = Vec::with_capacity(kmax);
        let mut betas: Vec<f64> = Vec::with_capacity(kmax);
        let mut ritz = (0.0, DVector::zeros(1));
        for j in 0..kmax {
            let mut w = apply(&basis[j]);
            let a = basis[j].dot(&w);
            alphas.push(a);
            for _ in 0..2 {
                for q in &basis {
                    let c = q.dot(&w);
                    w.axpy(-c, q, 1.0);
                }
            }
            let b = w.norm();
            let k = j + 1;
            let scale = alphas.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let exhausted = k == dim || b <= 1e-13 * scale;
            if exhausted || k == kmax || k % 4 == 0 {
                let mut t = DMatrix::zeros(k, k);
                for i in 0..k {
                    t[(i, i)] = alphas[i];
                    if i + 1 < k {
                        t[(i, i + 1)] = betas[i];
                        t[(i + 1, i)] = betas[i];
                    }
                }
                let (vals, vecs) = sym_eigen_sorted(&t);
                let theta = vals[0];
                let s = vecs.column(0);
                let residual = b * s[k - 1].abs();
                let mut x = DVector::zeros(dim);
                for (i, q) in basis.iter().enumerate() {
                    x.axpy(s[i], q, 1.0);
                }
                x.normalize_mut();
                ritz = (theta, x);
                last_residual = residual;
                if exhausted || residual <= tol * (1.0 + theta.abs()) {
                    return Ok(ritz);
                }
            }
            if k == kmax {
                break;
            }
            betas.push(b);
            basis.push(w / b);
        }
        v0 = ritz.1;
    }
    Err(SenseError::NonConvergence {
        iterations: (max_restarts + 1) * kmax,
        residual: last_residual,
    })
}

pub(crate) fn check_square(context: &'static str, m: &DMatrix<f64>, n: usize) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(dim_err(context, format!("{n}x{n}"), format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub(crate) fn check_shape(context: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(dim_err(
            context,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, stream_rng};

    #[test]
    fn mat_s_symmetrizes() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let s = mat_s(&vec(&m)).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, 2.5, 2.5, 4.0]));
    }

    #[test]
    fn vec_mat_inverse_pair() {
        let m = gaussian_matrix(&mut stream_rng(5, 0), 5, 5);
        assert_eq!(mat(&vec(&m)).unwrap(), m);
        let s = sym(&m);
        assert_eq!(mat_s(&vec(&s)).unwrap(), s);
    }

    #[test]
    fn vec_stacks_columns() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec(&m).as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn non_square_length_is_a_dimension_error() {
        let v = DVector::from_element(5, 1.0);
        assert!(matches!(mat(&v), Err(SenseError::Dimension { .. })));
        let r = reshape(&Reshaped::Vector(v), ReshapeMode::MatSym);
        assert!(r.is_err());
    }

    #[test]
    fn sym_basis_is_isometric() {
        let basis = SymBasis::new(4);
        assert_eq!(basis.dim(), 10);
        let s = sym(&gaussian_matrix(&mut stream_rng(2, 0), 4, 4));
        let c = basis.coords(&s);
        assert!((c.norm() - s.norm()).abs() < 1e-12);
        assert!((basis.matrix(&c) - &s).amax() < 1e-14);
    }

    #[test]
    fn lanczos_matches_dense_eigensolver() {
        let g = gaussian_matrix(&mut stream_rng(8, 0), 40, 40);
        let a = sym(&g);
        let start = gaussian_matrix(&mut stream_rng(9, 0), 40, 1).column(0).into_owned();
        let (lam, v) = lanczos_smallest(40, |x| &a * x, &start, 1e-10, 12, 200).unwrap();
        let exact = min_eigenvalue(&a);
        assert!((lam - exact).abs() < 1e-8, "{lam} vs {exact}");
        assert!((&a * &v - &v * lam).norm() < 1e-4);
    }

    #[test]
    fn sorted_eigen_ascending() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -1.0, 2.0]));
        let (vals, vecs) = sym_eigen_sorted(&m);
        assert_eq!(vals.as_slice(), &[-1.0, 2.0, 3.0]);
        assert!((vecs.column(0).abs() - DVector::from_vec(vec![0.0, 1.0, 0.0])).amax() < 1e-14);
    }
}
