//! Tensor-product grids of interior nodes over (0, L) x omega.
//!
//! All discrete operators live on the interior nodes only; Dirichlet values on
//! the boundary are implicit zeros. Nodes are indexed lexicographically with
//! the longitudinal index slowest and the last transverse index fastest, which
//! keeps the assembled matrices banded with half-bandwidth equal to the number
//! of transverse nodes per slice.

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TransverseDim {
    /// Interior node count.
    pub m: usize,
    /// Node spacing.
    pub dt: f64,
    /// omega extends over (-half_extent, half_extent) in this direction.
    pub half_extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    pub length: f64,
    /// Interior longitudinal node count.
    pub m_s: usize,
    pub ds: f64,
    pub t_dims: Vec<TransverseDim>,
}

impl TensorGrid {
    /// Uniform grid with `m_s` interior nodes along the axis and `m_t` interior
    /// nodes per transverse direction of `omega`.
    pub fn new(length: f64, m_s: usize, omega: &CrossSection, m_t: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("tube length must be positive, got {length}")));
        }
        if m_s < 8 || m_t < 8 {
            return Err(Error::Domain(format!(
                "grid needs at least 8 interior nodes per dimension, got {m_s} x {m_t}"
            )));
        }
        let t_dims = omega
            .half_extents()
            .iter()
            .map(|&half| TransverseDim {
                m: m_t,
                dt: 2.0 * half / (m_t as f64 + 1.0),
                half_extent: half,
            })
            .collect();
        Ok(TensorGrid {
            length,
            m_s,
            ds: length / (m_s as f64 + 1.0),
            t_dims,
        })
    }

    pub fn s_node(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.ds
    }

    /// Midpoint s_{i+1/2} between node i-1 and node i; plane 0 sits at ds/2.
    pub fn s_midpoint(&self, plane: usize) -> f64 {
        (plane as f64 + 0.5) * self.ds
    }

    pub fn t_node(&self, dim: usize, j: usize) -> f64 {
        let d = &self.t_dims[dim];
        -d.half_extent + (j as f64 + 1.0) * d.dt
    }

    pub fn transverse_len(&self) -> usize {
        self.t_dims.iter().map(|d| d.m).product()
    }

    pub fn len(&self) -> usize {
        self.m_s * self.transverse_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Product of all node spacings: the cell volume of the discrete L^2 measure.
    pub fn cell_volume(&self) -> f64 {
        self.ds * self.t_dims.iter().map(|d| d.dt).product::<f64>()
    }

    pub fn transverse_cell_volume(&self) -> f64 {
        self.t_dims.iter().map(|d| d.dt).product::<f64>()
    }

    /// Flatten a transverse multi-index (last dimension fastest).
    pub fn t_index(&self, jt: &[usize]) -> usize {
        debug_assert_eq!(jt.len(), self.t_dims.len());
        let mut idx = 0;
        for (d, &j) in self.t_dims.iter().zip(jt) {
            debug_assert!(j < d.m);
            idx = idx * d.m + j;
        }
        idx
    }

    pub fn index(&self, i_s: usize, jt: &[usize]) -> usize {
        debug_assert!(i_s < self.m_s);
        i_s * self.transverse_len() + self.t_index(jt)
    }

    /// Strides of the flattened transverse index per dimension.
    pub fn transverse_strides(&self) -> Vec<usize> {
        let n = self.t_dims.len();
        let mut strides = vec![1usize; n];
        for dim in (0..n.saturating_sub(1)).rev() {
            strides[dim] = strides[dim + 1] * self.t_dims[dim + 1].m;
        }
        strides
    }

    /// Inverse of `t_index`.
    pub fn t_unflatten(&self, mut flat: usize) -> Vec<usize> {
        let n = self.t_dims.len();
        let mut jt = vec![0usize; n];
        for dim in (0..n).rev() {
            let m = self.t_dims[dim].m;
            jt[dim] = flat % m;
            flat /= m;
        }
        jt
    }

    /// Transverse coordinates of a flattened transverse index.
    pub fn t_coords(&self, flat: usize) -> Vec<f64> {
        self.t_unflatten(flat)
            .iter()
            .enumerate()
            .map(|(dim, &j)| self.t_node(dim, j))
            .collect()
    }

    /// sup_{t in omega} |t| for the box hull of the grid.
    pub fn omega_radius(&self) -> f64 {
        self.t_dims
            .iter()
            .map(|d| d.half_extent * d.half_extent)
            .sum::<f64>()
            .sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_grid() -> TensorGrid {
        let omega = CrossSection::rectangle(vec![1.0, 1.0]).unwrap();
        TensorGrid::new(3.0, 10, &omega, 8).unwrap()
    }

    #[test]
    fn index_is_a_bijection() {
        let g = square_grid();
        let mut seen = vec![false; g.len()];
        for i_s in 0..g.m_s {
            for j2 in 0..g.t_dims[0].m {
                for j3 in 0..g.t_dims[1].m {
                    let idx = g.index(i_s, &[j2, j3]);
                    assert!(!seen[idx]);
                    seen[idx] = true;
                    assert_eq!(g.t_unflatten(g.t_index(&[j2, j3])), vec![j2, j3]);
                }
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn nodes_are_interior_and_uniform() {
        let g = square_grid();
        assert!(g.s_node(0) > 0.0);
        assert!(g.s_node(g.m_s - 1) < g.length);
        let d = &g.t_dims[0];
        assert!((g.t_node(0, 0) + d.half_extent - d.dt).abs() < 1e-15);
        assert!((g.t_node(0, d.m - 1) - (d.half_extent - d.dt)).abs() < 1e-12);
        // interior nodes of a symmetric interval come in +/- pairs
        assert!((g.t_node(0, 0) + g.t_node(0, d.m - 1)).abs() < 1e-15);
    }

    #[test]
    fn rejects_tiny_grids() {
        let omega = CrossSection::interval(1.0).unwrap();
        assert!(TensorGrid::new(1.0, 4, &omega, 20).is_err());
        assert!(TensorGrid::new(1.0, 20, &omega, 7).is_err());
    }
}
