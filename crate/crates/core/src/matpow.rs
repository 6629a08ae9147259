//! Power matrices `u^A = exp(A log u)` for symmetric positive-definite `A`.
//!
//! The primary path diagonalises `A = V diag(λ) Vᵀ` once (cyclic Jacobi) and
//! evaluates `u^A = V diag(u^λ) Vᵀ`. The truncated exponential series in
//! [`matrix_power_series`] is kept as an independent oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, check_positive, Error, Result};

/// Entrywise tolerance for accepting a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Eigenvalues at or below this are rejected for a tail index matrix.
pub const POSITIVE_DEFINITE_FLOOR: f64 = 1e-14;
/// Largest supported dimension.
pub const MAX_DIM: usize = 64;
/// Truncation target for the series oracle's next-term bound.
pub const SERIES_TAIL_BOUND: f64 = 1e-14;
/// Hard cap on the number of series terms.
pub const SERIES_MAX_TERMS: usize = 200;

const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted descending with the matching orthonormal eigenvectors
/// stored as the columns of `basis`, so that `A = basis · diag · basisᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    eigenvalues: DVector<f64>,
    basis: DMatrix<f64>,
}

impl EigenSystem {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// The orthogonal matrix `O = basisᵀ` of the factorisation `A = Oᵀ diag(λ) O`.
    pub fn orthogonal(&self) -> DMatrix<f64> {
        self.basis.transpose()
    }

    /// `basis · diag(f(λ_i)) · basisᵀ`.
    pub fn spectral_map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = self.eigenvalues.len();
        let mut scaled = self.basis.clone();
        for j in 0..d {
            let fj = f(self.eigenvalues[j]);
            for i in 0..d {
                scaled[(i, j)] *= fj;
            }
        }
        scaled * self.basis.transpose()
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.spectral_map(|x| x)
    }
}

fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    check_dim(a.nrows(), a.ncols())?;
    if a.nrows() == 0 {
        return Err(Error::domain("matrix must have dimension >= 1"));
    }
    if a.nrows() > MAX_DIM {
        return Err(Error::DimensionTooLarge { dim: a.nrows(), max: MAX_DIM });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("matrix entries must be finite"));
    }
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            let diff = (a[(i, j)] - a[(j, i)]).abs();
            if diff > SYMMETRY_TOL {
                return Err(Error::NonSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Eigenvalues come back sorted descending; ties keep the order of the input
/// columns. Each eigenvector is signed so that its largest-magnitude entry is
/// positive, which makes the output deterministic for a fixed input.
pub fn eigendecompose(a: &DMatrix<f64>) -> Result<EigenSystem> {
    check_symmetric(a)?;
    let n = a.nrows();
    // Work on the exactly symmetrised matrix.
    let mut m = (a + a.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let scale = m.norm().max(f64::MIN_POSITIVE);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps input column order on ties.
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| m[(i, i)]));
    let mut basis = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let mut pivot = 0;
        for k in 1..n {
            if col[k].abs() > col[pivot].abs() {
                pivot = k;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            basis[(k, dst)] = sign * col[k];
        }
    }
    Ok(EigenSystem { eigenvalues, basis })
}

/// Symmetric positive-definite matrix of tail indexes with a cached eigensystem.
#[derive(Debug, Clone, PartialEq)]
pub struct TailIndexMatrix {
    entries: DMatrix<f64>,
    eigen: EigenSystem,
    diagonal: Option<Vec<f64>>,
}

impl TailIndexMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let eigen = eigendecompose(&entries)?;
        if let Some(&min) = eigen.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
            if min <= POSITIVE_DEFINITE_FLOOR {
                return Err(Error::NotPositiveDefinite { eigenvalue: min });
            }
        }
        let n = entries.nrows();
        let is_diagonal = (0..n).all(|i| (0..n).all(|j| i == j || entries[(i, j)] == 0.0));
        let diagonal = is_diagonal.then(|| (0..n).map(|i| entries[(i, i)]).collect());
        Ok(Self { entries, eigen, diagonal })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// `values` in row-major order; must hold `dim * dim` entries.
    pub fn from_row_major(dim: usize, values: &[f64]) -> Result<Self> {
        check_dim(dim * dim, values.len())?;
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eigen
    }

    /// Diagonal entries when the matrix is exactly diagonal.
    pub fn as_diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref()
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal.is_some()
    }
}

fn check_scale(u: f64) -> Result<()> {
    check_positive("u", u).map(|_| ())
}

/// `u^A = Oᵀ diag(u^λ_1, …, u^λ_d) O`.
pub fn matrix_power(a: &TailIndexMatrix, u: f64) -> Result<DMatrix<f64>> {
    check_scale(u)?;
    let d = a.dim();
    if u == 1.0 {
        return Ok(DMatrix::identity(d, d));
    }
    if let Some(diag) = a.as_diagonal() {
        let pw = DVector::from_iterator(d, diag.iter().map(|&l| u.powf(l)));
        return Ok(DMatrix::from_diagonal(&pw));
    }
    Ok(a.eigen.spectral_map(|l| u.powf(l)))
}

/// Partial sum `Σ_{k<terms} Aᵏ (log u)ᵏ / k!` of the exponential series.
pub fn matrix_power_series(a: &DMatrix<f64>, u: f64, terms: usize) -> Result<DMatrix<f64>> {
    check_scale(u)?;
    check_dim(a.nrows(), a.ncols())?;
    if terms == 0 {
        return Err(Error::domain("series needs at least one term"));
    }
    let n = a.nrows();
    let step = a * u.ln();
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..terms {
        term = (&term * &step) / k as f64;
        sum += &term;
    }
    Ok(sum)
}

/// Number of series terms needed so the next-term bound
/// `‖A‖ᵏ |log u|ᵏ / k!` drops below [`SERIES_TAIL_BOUND`], capped at
/// [`SERIES_MAX_TERMS`]. Uses the Frobenius norm.
pub fn series_terms(a: &DMatrix<f64>, u: f64) -> usize {
    let x = a.norm() * u.ln().abs();
    let mut bound = 1.0;
    for k in 1..SERIES_MAX_TERMS {
        bound *= x / k as f64;
        if bound < SERIES_TAIL_BOUND {
            return k;
        }
    }
    SERIES_MAX_TERMS
}

/// `u^A w`.
pub fn apply_scaling(a: &TailIndexMatrix, u: f64, w: &[f64]) -> Result<Vec<f64>> {
    check_dim(a.dim(), w.len())?;
    if w.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("w must be finite"));
    }
    check_scale(u)?;
    if let Some(diag) = a.as_diagonal() {
        return Ok(diag.iter().zip(w).map(|(&l, &wi)| u.powf(l) * wi).collect());
    }
    let p = matrix_power(a, u)?;
    Ok((p * DVector::from_column_slice(w)).iter().copied().collect())
}

/// Whether `u^A w ≥ 0` componentwise for every `u` in `u_grid`.
///
/// This decides membership of `w` in the cone of directions kept nonnegative
/// for all sufficiently small `u`, using the caller's grid as a finite
/// surrogate for "sufficiently small". Returns `false` for an empty grid or a
/// `w` with a negative entry.
pub fn in_scaling_cone(a: &TailIndexMatrix, w: &[f64], u_grid: &[f64]) -> bool {
    if u_grid.is_empty() || w.len() != a.dim() || w.iter().any(|&x| !(x >= 0.0)) {
        return false;
    }
    if a.is_diagonal() {
        return true;
    }
    u_grid.iter().all(|&u| match apply_scaling(a, u, w) {
        Ok(s) => {
            let norm = s.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            s.iter().all(|&x| x >= -1e-13 * norm)
        }
        Err(_) => false,
    })
}
