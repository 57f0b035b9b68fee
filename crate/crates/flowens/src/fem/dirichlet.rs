//! Dirichlet boundary conditions and the pressure gauge.
//!
//! Constrained rows and columns are zeroed in place with a unit diagonal, so
//! the sparsity pattern survives and one symbolic factorization serves every
//! time step. Column contributions move to the right-hand sides first, which
//! preserves symmetry of symmetric blocks.

use std::collections::BTreeMap;

use crate::field::{Field2, FieldRef};
use crate::sparse::SparseMatrix;

use super::{FemError, TaylorHoodSpace};

/// Pressure is defined up to a constant; this vertex's pressure DOF is fixed
/// to zero and the solved field is shifted to zero mean afterwards.
pub const PINNED_PRESSURE_NODE: usize = 0;

/// Coupled-system index of the pinned pressure DOF.
pub fn pinned_pressure_dof(space: &TaylorHoodSpace) -> usize {
    space.n_velocity() + PINNED_PRESSURE_NODE
}

/// Boundary velocity data, either one field for the whole boundary or one
/// field per boundary tag.
#[derive(Clone)]
pub struct BoundaryData {
    by_tag: BTreeMap<u32, FieldRef>,
    fallback: Option<FieldRef>,
}

impl BoundaryData {
    pub fn uniform(field: FieldRef) -> Self {
        Self {
            by_tag: BTreeMap::new(),
            fallback: Some(field),
        }
    }

    pub fn by_tag(map: BTreeMap<u32, FieldRef>) -> Self {
        Self {
            by_tag: map,
            fallback: None,
        }
    }

    pub fn field_for(&self, tag: u32) -> Option<&dyn Field2> {
        self.by_tag
            .get(&tag)
            .or(self.fallback.as_ref())
            .map(|f| f.as_ref())
    }

    /// Checks every tagged boundary node has data.
    pub fn validate(&self, space: &TaylorHoodSpace) -> Result<(), FemError> {
        for node in 0..space.n_p2() {
            if let Some(tag) = space.boundary_tag(node) {
                if self.field_for(tag).is_none() {
                    return Err(FemError::MissingBoundaryTag { tag });
                }
            }
        }
        Ok(())
    }
}

/// Constrained DOFs of the coupled system: boundary velocity values plus the
/// pinned pressure, in increasing order.
pub fn constrained_dofs(space: &TaylorHoodSpace) -> Vec<usize> {
    let mut out = Vec::new();
    for node in 0..space.n_p2() {
        if space.boundary_tag(node).is_some() {
            out.push(space.velocity_dof(node, 0));
            out.push(space.velocity_dof(node, 1));
        }
    }
    out.push(pinned_pressure_dof(space));
    out
}

/// Values of all constrained DOFs embedded in a coupled-size vector,
/// boundary velocities by nodal interpolation and zero at the pinned pressure.
pub fn boundary_lift(
    space: &TaylorHoodSpace,
    bc: &BoundaryData,
    t: f64,
) -> Result<Vec<f64>, FemError> {
    let mut g = vec![0.0; space.n_coupled()];
    for node in 0..space.n_p2() {
        if let Some(tag) = space.boundary_tag(node) {
            let field = bc
                .field_for(tag)
                .ok_or(FemError::MissingBoundaryTag { tag })?;
            let [x, y] = space.p2_coord(node);
            let v = field.at(x, y, t);
            g[space.velocity_dof(node, 0)] = v[0];
            g[space.velocity_dof(node, 1)] = v[1];
        }
    }
    Ok(g)
}

/// Imposes one set of boundary values on every right-hand side in place.
///
/// Every right-hand side receives the lifting `rhs -= A g` on unconstrained
/// rows and the boundary value on constrained rows; the matrix then gets
/// identity rows and zeroed columns at the constrained DOFs.
pub fn apply_dirichlet(
    matrix: &mut SparseMatrix,
    rhs: &mut [Vec<f64>],
    space: &TaylorHoodSpace,
    bc: &BoundaryData,
    t: f64,
) -> Result<(), FemError> {
    let boundaries = vec![bc; rhs.len()];
    apply_dirichlet_multi(matrix, rhs, space, &boundaries, t)
}

/// Imposes boundary values on the coupled system in place, with each
/// right-hand side paired with its own boundary data; the shared matrix is
/// processed once. All liftings use the matrix values before zeroing.
pub fn apply_dirichlet_multi(
    matrix: &mut SparseMatrix,
    rhs: &mut [Vec<f64>],
    space: &TaylorHoodSpace,
    boundaries: &[&BoundaryData],
    t: f64,
) -> Result<(), FemError> {
    let n = space.n_coupled();
    assert_eq!(matrix.nrows(), n);
    assert_eq!(matrix.ncols(), n);
    assert_eq!(boundaries.len(), rhs.len(), "one boundary set per rhs");
    for r in rhs.iter() {
        assert_eq!(r.len(), n);
    }
    let mut constrained = vec![false; n];
    for dof in constrained_dofs(space) {
        constrained[dof] = true;
    }

    for (r, bc) in rhs.iter_mut().zip(boundaries) {
        let g = boundary_lift(space, bc, t)?;
        let lift = matrix.matvec(&g);
        for k in 0..n {
            if constrained[k] {
                r[k] = g[k];
            } else {
                r[k] -= lift[k];
            }
        }
    }

    let row_ptr = matrix.row_ptr().to_vec();
    let col_idx = matrix.col_idx().to_vec();
    let values = matrix.values_mut();
    for r in 0..n {
        for k in row_ptr[r]..row_ptr[r + 1] {
            let c = col_idx[k];
            if constrained[r] || constrained[c] {
                values[k] = if r == c && constrained[r] { 1.0 } else { 0.0 };
            }
        }
    }
    Ok(())
}
