//! Symmetric-matrix utilities shared by every other module: positive
//! semidefinite rank classification, Cholesky-backed SPD matrices, the
//! Frobenius norm, and the rank-one Woodbury quadratic form.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Errors from matrix construction and classification.
#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("matrix entries contain NaN or infinity")]
    NonFinite,
    #[error("matrix is not symmetric: entries ({0},{1}) and ({1},{0}) differ")]
    NotSymmetric(usize, usize),
    #[error("matrix is not positive definite (Cholesky factorization failed)")]
    NotPositiveDefinite,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension must be positive")]
    EmptyDimension,
}

/// A real symmetric matrix. Symmetry is enforced by construction: the
/// lower triangle is the source of truth and is mirrored exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: DMatrix<f64>,
}

impl SymMatrix {
    /// Build from any square matrix, averaging the two triangles.
    pub fn from_symmetrized(m: &DMatrix<f64>) -> Result<Self, MatrixError> {
        let d = m.nrows();
        if d == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        if m.ncols() != d {
            return Err(MatrixError::DimensionMismatch {
                expected: d,
                got: m.ncols(),
            });
        }
        let entries = DMatrix::from_fn(d, d, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
        Ok(SymMatrix { entries })
    }

    /// Build from a row-major slice, requiring the input to be symmetric
    /// to within `sym_tol` relative to the largest entry.
    pub fn from_row_major(d: usize, data: &[f64], sym_tol: f64) -> Result<Self, MatrixError> {
        if d == 0 {
            return Err(MatrixError::EmptyDimension);
        }
        if data.len() != d * d {
            return Err(MatrixError::DimensionMismatch {
                expected: d * d,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(MatrixError::NonFinite);
        }
        let scale = data.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (data[i * d + j] - data[j * d + i]).abs() > sym_tol * scale {
                    return Err(MatrixError::NotSymmetric(i, j));
                }
            }
        }
        let entries = DMatrix::from_fn(d, d, |i, j| {
            0.5 * (data[i * d + j] + data[j * d + i])
        });
        Ok(SymMatrix { entries })
    }

    /// Build from a function of (row, col); only i >= j is evaluated.
    pub fn from_fn<F: FnMut(usize, usize) -> f64>(d: usize, mut f: F) -> Self {
        assert!(d > 0, "dimension must be positive");
        let mut entries = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..=i {
                let v = f(i, j);
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        SymMatrix { entries }
    }

    pub fn zeros(d: usize) -> Self {
        assert!(d > 0);
        SymMatrix {
            entries: DMatrix::zeros(d, d),
        }
    }

    pub fn identity(d: usize) -> Self {
        assert!(d > 0);
        SymMatrix {
            entries: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    /// Scale by a constant.
    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            entries: &self.entries * c,
        }
    }

    /// Entrywise sum (dimensions must match).
    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        SymMatrix {
            entries: &self.entries + &other.entries,
        }
    }

    /// Half-vectorization: entries (i, j) with i <= j in row-major order
    /// of the upper triangle.
    pub fn vech(&self) -> DVector<f64> {
        let d = self.dim();
        let mut out = DVector::zeros(d * (d + 1) / 2);
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                out[k] = self.entries[(i, j)];
                k += 1;
            }
        }
        out
    }
}

/// Frobenius norm `[tr(M^2)]^{1/2}`.
pub fn frobenius_norm(m: &SymMatrix) -> f64 {
    m.as_matrix().iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A symmetric positive definite matrix with its Cholesky factor cached.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    entries: SymMatrix,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    /// Factorize; fails unless all eigenvalues are strictly positive.
    pub fn new(m: SymMatrix) -> Result<Self, MatrixError> {
        if !m.is_finite() {
            return Err(MatrixError::NonFinite);
        }
        let chol =
            Cholesky::new(m.as_matrix().clone()).ok_or(MatrixError::NotPositiveDefinite)?;
        Ok(SpdMatrix { entries: m, chol })
    }

    pub fn from_row_major(d: usize, data: &[f64], sym_tol: f64) -> Result<Self, MatrixError> {
        SpdMatrix::new(SymMatrix::from_row_major(d, data, sym_tol)?)
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix::new(SymMatrix::identity(d)).expect("identity is PD")
    }

    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    pub fn sym(&self) -> &SymMatrix {
        &self.entries
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        self.entries.as_matrix()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(i, j)
    }

    /// Lower-triangular factor L with `self = L L'`.
    pub fn chol_l(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Solve `self * x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    /// Dense inverse.
    pub fn inverse(&self) -> SymMatrix {
        SymMatrix::from_symmetrized(&self.chol.inverse()).expect("inverse keeps dimension")
    }

    pub fn determinant(&self) -> f64 {
        self.chol.determinant()
    }

    /// `ln det`, computed from the factor diagonal (no overflow).
    pub fn ln_determinant(&self) -> f64 {
        let l = self.chol.l_dirty();
        (0..self.dim()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
    }

    /// Quadratic form in the inverse: `v' self^{-1} v`.
    pub fn inv_quadratic_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&self.solve(v))
    }
}

/// Eigenstructure of a PSD matrix: sorted spectrum, orthogonal basis, and
/// the rank split `H = (H1 | H2)` with `H1` spanning the range.
#[derive(Debug, Clone)]
pub struct PsdClassification {
    pub rank: usize,
    /// Eigenvalues sorted descending; entries within tolerance of zero
    /// have been snapped to exactly zero.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, ordered to match `eigenvalues`.
    pub basis: DMatrix<f64>,
}

impl PsdClassification {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Columns spanning the range (first `rank` columns of the basis).
    pub fn h1(&self) -> DMatrix<f64> {
        self.basis.columns(0, self.rank).into_owned()
    }

    /// Columns spanning the null space.
    pub fn h2(&self) -> DMatrix<f64> {
        let d = self.dim();
        self.basis.columns(self.rank, d - self.rank).into_owned()
    }
}

/// Outcome of PSD classification: either an eigenstructure with a rank,
/// or a certificate that the matrix has a genuinely negative eigenvalue.
/// `NotPsd` is a value, not an error; the parameter-space classifier
/// consumes it.
#[derive(Debug, Clone)]
pub enum PsdOutcome {
    Psd(PsdClassification),
    NotPsd {
        eigenvalue: f64,
        direction: DVector<f64>,
    },
}

/// Classify a symmetric matrix as PSD-of-some-rank or not PSD.
///
/// The matrix is not PSD iff some eigenvalue falls below
/// `-rank_tol * ||M||_F`; otherwise the rank counts eigenvalues above
/// `rank_tol * max(1, ||M||_F)` and everything in between is treated as
/// zero.
pub fn classify_psd(m: &SymMatrix, rank_tol: f64) -> Result<PsdOutcome, MatrixError> {
    if !m.is_finite() {
        return Err(MatrixError::NonFinite);
    }
    assert!(rank_tol > 0.0, "rank_tol must be positive");
    let d = m.dim();
    let norm = frobenius_norm(m);
    let eig = m.as_matrix().clone().symmetric_eigen();

    // sort descending, carrying eigenvectors along
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("finite eigenvalues")
    });
    let mut eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut basis = DMatrix::zeros(d, d);
    for (new_col, &old_col) in order.iter().enumerate() {
        basis.set_column(new_col, &eig.eigenvectors.column(old_col));
    }

    let neg_floor = -rank_tol * norm;
    if eigenvalues[d - 1] < neg_floor {
        return Ok(PsdOutcome::NotPsd {
            eigenvalue: eigenvalues[d - 1],
            direction: basis.column(d - 1).into_owned(),
        });
    }
    let pos_floor = rank_tol * norm.max(1.0);
    let rank = eigenvalues.iter().filter(|&&l| l > pos_floor).count();
    for l in eigenvalues.iter_mut().skip(rank) {
        *l = 0.0;
    }
    Ok(PsdOutcome::Psd(PsdClassification {
        rank,
        eigenvalues,
        basis,
    }))
}

/// Default relative rank tolerance for [`classify_psd`].
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// `v' (U + v v')^{-1} v` through the rank-one Woodbury identity:
/// with `t = v' U^{-1} v` the value is `t / (1 + t)`, always in [0, 1).
pub fn woodbury_quadratic(u: &SpdMatrix, v: &DVector<f64>) -> Result<f64, MatrixError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(MatrixError::NonFinite);
    }
    if v.len() != u.dim() {
        return Err(MatrixError::DimensionMismatch {
            expected: u.dim(),
            got: v.len(),
        });
    }
    let t = u.inv_quadratic_form(v);
    if !t.is_finite() {
        return Err(MatrixError::NonFinite);
    }
    Ok(t / (1.0 + t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn diag(values: &[f64]) -> SymMatrix {
        SymMatrix::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[test]
    fn classify_identity_is_full_rank() {
        let out = classify_psd(&SymMatrix::identity(2), DEFAULT_RANK_TOL).unwrap();
        match out {
            PsdOutcome::Psd(c) => assert_eq!(c.rank, 2),
            _ => panic!("identity must be PSD"),
        }
    }

    #[test]
    fn classify_zero_matrix_rank_zero() {
        let out = classify_psd(&SymMatrix::zeros(3), DEFAULT_RANK_TOL).unwrap();
        match out {
            PsdOutcome::Psd(c) => {
                assert_eq!(c.rank, 0);
                assert!(c.eigenvalues.iter().all(|&l| l == 0.0));
            }
            _ => panic!("zero matrix is PSD of rank 0"),
        }
    }

    #[test]
    fn classify_indefinite_diag() {
        let out = classify_psd(&diag(&[1.0, -1.0]), DEFAULT_RANK_TOL).unwrap();
        match out {
            PsdOutcome::NotPsd { eigenvalue, .. } => {
                assert_relative_eq!(eigenvalue, -1.0, max_relative = 1e-12)
            }
            _ => panic!("diag(1,-1) is indefinite"),
        }
    }

    #[test]
    fn classify_rank_one_diag() {
        let out = classify_psd(&diag(&[5.0, 0.0]), DEFAULT_RANK_TOL).unwrap();
        match out {
            PsdOutcome::Psd(c) => {
                assert_eq!(c.rank, 1);
                let h1 = c.h1();
                assert_relative_eq!(h1[(0, 0)].abs(), 1.0, max_relative = 1e-12);
                assert!(h1[(1, 0)].abs() < 1e-12);
            }
            _ => panic!("diag(5,0) is PSD"),
        }
    }

    #[test]
    fn nonfinite_entries_are_rejected() {
        let m = SymMatrix::from_fn(2, |i, j| if i == j { f64::NAN } else { 0.0 });
        assert!(matches!(
            classify_psd(&m, DEFAULT_RANK_TOL),
            Err(MatrixError::NonFinite)
        ));
    }

    #[test]
    fn frobenius_reference_values() {
        assert_eq!(frobenius_norm(&SymMatrix::zeros(3)), 0.0);
        assert_relative_eq!(
            frobenius_norm(&SymMatrix::identity(4)),
            2.0,
            max_relative = 1e-15
        );
        // all-ones 2x2: tr(M^2) = 4
        let ones = SymMatrix::from_fn(2, |_, _| 1.0);
        assert_relative_eq!(frobenius_norm(&ones), 2.0, max_relative = 1e-15);
    }

    #[test]
    fn woodbury_scalar_cases() {
        let u = SpdMatrix::identity(1);
        let v = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(woodbury_quadratic(&u, &v).unwrap(), 0.5, max_relative = 1e-14);

        let u2 = SpdMatrix::identity(2);
        let zero = DVector::zeros(2);
        assert_eq!(woodbury_quadratic(&u2, &zero).unwrap(), 0.0);

        let v2 = DVector::from_vec(vec![3.0, 4.0]);
        assert_relative_eq!(
            woodbury_quadratic(&u2, &v2).unwrap(),
            25.0 / 26.0,
            max_relative = 1e-14
        );
        // cross-check against explicit inversion of I + vv'
        let m = DMatrix::identity(2, 2) + &v2 * v2.transpose();
        let direct = v2.dot(&(m.try_inverse().unwrap() * &v2));
        assert_relative_eq!(
            woodbury_quadratic(&u2, &v2).unwrap(),
            direct,
            max_relative = 1e-12
        );
    }

    #[test]
    fn spd_rejects_indefinite() {
        assert!(matches!(
            SpdMatrix::new(diag(&[1.0, -2.0])),
            Err(MatrixError::NotPositiveDefinite)
        ));
    }

    #[test]
    fn eigen_contract_on_random_matrices() {
        // residual ||M H - H diag(l)||_F <= 1e-8 ||M||_F and H orthogonal
        let mut state = 0x9E3779B97F4A7C15u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for d in 1..=6 {
            let m = SymMatrix::from_fn(d, |_, _| 4.0 * next());
            if let PsdOutcome::Psd(c) | PsdOutcome::NotPsd { .. } =
                classify_psd(&m, DEFAULT_RANK_TOL).unwrap()
            {
                let _ = c;
            }
            // re-run via raw eigen pieces for the residual check
            let eig = m.as_matrix().clone().symmetric_eigen();
            let lam = DMatrix::from_diagonal(&eig.eigenvalues);
            let resid = m.as_matrix() * &eig.eigenvectors - &eig.eigenvectors * lam;
            let mnorm = frobenius_norm(&m).max(1e-300);
            assert!(resid.norm() <= 1e-8 * mnorm);
            let ortho = &eig.eigenvectors * eig.eigenvectors.transpose()
                - DMatrix::<f64>::identity(d, d);
            assert!(ortho.norm() <= 1e-8);
        }
    }

    proptest! {
        #[test]
        fn chol_product_classifies_full_rank(seed in 0u64..500) {
            let d = (seed % 4 + 2) as usize;
            let mut state = seed.wrapping_mul(0x2545F4914F6CDD1D).wrapping_add(1);
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let mut l = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..=i {
                    l[(i, j)] = if i == j { 0.2 + next() } else { next() - 0.5 };
                }
            }
            let m = SymMatrix::from_symmetrized(&(&l * l.transpose())).unwrap();
            let out = classify_psd(&m, DEFAULT_RANK_TOL).unwrap();
            prop_assert!(matches!(out, PsdOutcome::Psd(c) if c.rank == d));
        }

        #[test]
        fn woodbury_in_unit_interval_and_matches_brute_force(seed in 0u64..500) {
            let d = (seed % 6 + 1) as usize;
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(7);
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64
            };
            let mut l = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in 0..=i {
                    l[(i, j)] = if i == j { 0.3 + next() } else { next() - 0.5 };
                }
            }
            let u = SpdMatrix::new(
                SymMatrix::from_symmetrized(&(&l * l.transpose())).unwrap()
            ).unwrap();
            let v = DVector::from_fn(d, |_, _| 4.0 * (next() - 0.5));
            let q = woodbury_quadratic(&u, &v).unwrap();
            prop_assert!((0.0..1.0).contains(&q));
            let m = u.as_matrix() + &v * v.transpose();
            let direct = v.dot(&(m.try_inverse().unwrap() * &v));
            prop_assert!((q - direct).abs() <= 1e-10 * direct.abs().max(1e-30));
        }

        #[test]
        fn frobenius_orthogonal_invariance(seed in 0u64..200) {
            let d = (seed % 4 + 2) as usize;
            let mut state = seed.wrapping_mul(0xD1B54A32D192ED03).wrapping_add(3);
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let m = SymMatrix::from_fn(d, |_, _| 3.0 * next());
            // orthogonal H from the eigenvectors of another random symmetric matrix
            let aux = SymMatrix::from_fn(d, |_, _| next());
            let h = aux.as_matrix().clone().symmetric_eigen().eigenvectors;
            let rotated = SymMatrix::from_symmetrized(&(&h * m.as_matrix() * h.transpose())).unwrap();
            let a = frobenius_norm(&m);
            let b = frobenius_norm(&rotated);
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }
}
