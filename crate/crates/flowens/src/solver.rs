//! Sparse direct solver behind the time stepping: factor the coupled matrix
//! once per step, then back-substitute every member's right-hand side against
//! the same factors.
//!
//! The fill-reducing ordering depends only on the sparsity pattern, which the
//! assembly keeps fixed across steps, so `refactorize` redoes the numeric
//! phase only. Multiple right-hand sides are solved column by column, making
//! results bitwise identical to repeated single solves.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};

use thiserror::Error;

use crate::sparse::SparseMatrix;

/// Relative residual above which `solve` runs refinement passes.
const REFINE_TRIGGER: f64 = 1e-12;

/// Refinement passes attempted per solve before accepting the best iterate.
const REFINE_PASSES: usize = 2;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("matrix is {nrows} x {ncols}, need square")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("row {row} has no entries; boundary or gauge processing was likely skipped")]
    EmptyRow { row: usize },
    #[error("matrix is singular: no pivot at elimination step {index}")]
    Singular { index: usize },
    #[error("matrix is numerically singular: exact zero pivot")]
    ZeroPivot,
    #[error("matrix values are not finite")]
    NonFinite,
    #[error("right-hand side has length {found}, system has {expected} unknowns")]
    RhsLength { expected: usize, found: usize },
    #[error("refactorize needs the sparsity pattern the system was built with")]
    PatternChanged,
    #[error("out of memory or index overflow in sparse factorization")]
    Resource,
}

fn map_lu_error(err: LuError) -> SolverError {
    match err {
        LuError::SymbolicSingular { index } => SolverError::Singular { index },
        LuError::Generic(_) => SolverError::Resource,
    }
}

/// Numeric phase of the factorization. The backend panics on an exactly zero
/// pivot rather than returning an error, so that case is caught here.
fn numeric_lu(
    symbolic: &SymbolicLu<usize>,
    csc: &SparseColMat<usize, f64>,
) -> Result<Lu<usize, f64>, SolverError> {
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        Lu::try_new_with_symbolic(symbolic.clone(), csc.as_ref())
    }))
    .map_err(|_| SolverError::ZeroPivot)?
    .map_err(map_lu_error)
}

/// LU factors of one coupled matrix, reusable across all right-hand sides of
/// a time step and, via `refactorize`, across steps sharing the pattern.
pub struct FactorizedSystem {
    matrix: SparseMatrix,
    /// Position of each CSR value inside the CSC value array.
    csr_to_csc: Vec<usize>,
    csc: SparseColMat<usize, f64>,
    symbolic: SymbolicLu<usize>,
    lu: Lu<usize, f64>,
    factorization_count: u64,
}

/// Computes the fill-reducing ordering, symbolic structure, and numeric
/// factors of `matrix`.
pub fn factorize(matrix: &SparseMatrix) -> Result<FactorizedSystem, SolverError> {
    if matrix.nrows() != matrix.ncols() {
        return Err(SolverError::NotSquare {
            nrows: matrix.nrows(),
            ncols: matrix.ncols(),
        });
    }
    let n = matrix.nrows();
    for r in 0..n {
        if matrix.row_ptr()[r] == matrix.row_ptr()[r + 1] {
            return Err(SolverError::EmptyRow { row: r });
        }
    }
    if matrix.values().iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite);
    }

    // Transpose CSR to CSC, remembering where each value lands so later
    // refactorizations can scatter new values without re-sorting.
    let nnz = matrix.nnz();
    let mut col_ptr = vec![0usize; n + 1];
    for &c in matrix.col_idx() {
        col_ptr[c + 1] += 1;
    }
    for i in 0..n {
        col_ptr[i + 1] += col_ptr[i];
    }
    let mut row_idx = vec![0usize; nnz];
    let mut vals = vec![0.0f64; nnz];
    let mut csr_to_csc = vec![0usize; nnz];
    let mut cursor = col_ptr.clone();
    for r in 0..n {
        for k in matrix.row_ptr()[r]..matrix.row_ptr()[r + 1] {
            let c = matrix.col_idx()[k];
            let pos = cursor[c];
            cursor[c] += 1;
            row_idx[pos] = r;
            vals[pos] = matrix.values()[k];
            csr_to_csc[k] = pos;
        }
    }
    let symbolic_csc = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
    let csc = SparseColMat::new(symbolic_csc, vals);
    let symbolic = SymbolicLu::try_new(csc.symbolic()).map_err(|_| SolverError::Resource)?;
    let lu = numeric_lu(&symbolic, &csc)?;
    Ok(FactorizedSystem {
        matrix: matrix.clone(),
        csr_to_csc,
        csc,
        symbolic,
        lu,
        factorization_count: 1,
    })
}

impl FactorizedSystem {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// The matrix the current factors were computed from.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// Numeric factorizations performed so far, including the initial one.
    pub fn factorization_count(&self) -> u64 {
        self.factorization_count
    }

    /// Refactors a matrix with the same pattern, reusing the symbolic
    /// analysis and fill-reducing ordering.
    pub fn refactorize(&mut self, matrix: &SparseMatrix) -> Result<(), SolverError> {
        if !matrix.same_pattern(&self.matrix) {
            return Err(SolverError::PatternChanged);
        }
        if matrix.values().iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFinite);
        }
        let dst = self.csc.val_mut();
        for (k, &pos) in self.csr_to_csc.iter().enumerate() {
            dst[pos] = matrix.values()[k];
        }
        self.lu = numeric_lu(&self.symbolic, &self.csc)?;
        self.matrix.values_mut().copy_from_slice(matrix.values());
        self.factorization_count += 1;
        Ok(())
    }

    /// Solves for one right-hand side. Solutions with a relative residual
    /// above `REFINE_TRIGGER` get up to `REFINE_PASSES` refinement passes
    /// against the existing factors before being returned.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        if rhs.len() != self.n() {
            return Err(SolverError::RhsLength {
                expected: self.n(),
                found: rhs.len(),
            });
        }
        let mut col = Mat::from_fn(self.n(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(col.as_mut());
        let mut x: Vec<f64> = (0..self.n()).map(|i| col[(i, 0)]).collect();
        let mut best = self.residual(&x, rhs);
        for _ in 0..REFINE_PASSES {
            if !(best.is_finite() && best > REFINE_TRIGGER) {
                break;
            }
            let ax = self.matrix.matvec(&x);
            let mut defect = Mat::from_fn(self.n(), 1, |i, _| rhs[i] - ax[i]);
            self.lu.solve_in_place(defect.as_mut());
            let refined: Vec<f64> = (0..self.n()).map(|i| x[i] + defect[(i, 0)]).collect();
            let r = self.residual(&refined, rhs);
            if r < best {
                x = refined;
                best = r;
            } else {
                break;
            }
        }
        Ok(x)
    }

    /// Solves a batch of right-hand sides against the same factors, column by
    /// column; results are bitwise identical to calling `solve` repeatedly.
    pub fn solve_multi(&self, rhs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SolverError> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }

    /// Relative residual ||A x - b|| / ||b|| against the factored matrix.
    pub fn residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let ax = self.matrix.matvec(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for (axi, bi) in ax.iter().zip(b) {
            num += (axi - bi) * (axi - bi);
            den += bi * bi;
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}
