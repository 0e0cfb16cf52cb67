//! Assembly of the generalized Floquet Hamiltonian on the level x time grid.
//!
//! With L levels and N grid points the operator H(t) + V(t) - i d/dt becomes
//! a dense complex (L N) x (L N) matrix: block-diagonal samples of H + V plus
//! the spectral derivative acting level-wise across time blocks. Index order
//! is time-major, so rows i L .. (i+1) L belong to grid point t_i and an
//! eigenvector chops into per-time level vectors lambda(t_i).

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::absorber::AbsorbingPotential;
use crate::models::SampledHamiltonian;
use crate::timegrid::{derivative_operator, DerivativeOperator, TimeGrid};
use crate::{Error, Result};

/// Assembled Floquet matrix plus the layout needed to interpret its
/// eigenvectors.
#[derive(Debug, Clone)]
pub struct FloquetMatrix {
    pub matrix: Array2<C64>,
    pub level_count: usize,
    pub grid: TimeGrid,
}

pub(crate) fn grids_match(a: &TimeGrid, b: &TimeGrid) -> bool {
    let tol = 1e-12 * a.t_total.max(b.t_total);
    a.n == b.n
        && (a.t_physical - b.t_physical).abs() <= tol
        && (a.t_total - b.t_total).abs() <= tol
}

/// Assembles with the signed-convention derivative.
pub fn assemble(h: &SampledHamiltonian, v: &AbsorbingPotential) -> Result<FloquetMatrix> {
    let d = derivative_operator(&h.grid);
    assemble_with(h, v, &d)
}

/// Assembles H + V - i d/dt with the given derivative operator.
pub fn assemble_with(
    h: &SampledHamiltonian,
    v: &AbsorbingPotential,
    d: &DerivativeOperator,
) -> Result<FloquetMatrix> {
    let grid = &h.grid;
    let n = grid.n;
    let l = h.level_count;
    if !grids_match(grid, &v.grid) {
        return Err(Error::invalid("Hamiltonian and absorber grids differ"));
    }
    if v.level_count() != l {
        return Err(Error::invalid(format!(
            "absorber acts on {} levels, Hamiltonian has {l}",
            v.level_count()
        )));
    }
    if d.matrix.nrows() != n {
        return Err(Error::invalid(format!(
            "derivative operator is {}x{}, grid has {n} points",
            d.matrix.nrows(),
            d.matrix.ncols()
        )));
    }
    let dim = l * n;
    let mut m = Array2::<C64>::zeros((dim, dim));
    for i in 0..n {
        let hi = &h.matrices[i];
        let vi = &v.matrices[i];
        for a in 0..l {
            for b in 0..l {
                m[[i * l + a, i * l + b]] = hi[[a, b]] + vi[[a, b]];
            }
        }
    }
    for i in 0..n {
        for ip in 0..n {
            let dv = d.matrix[[i, ip]];
            for a in 0..l {
                m[[i * l + a, ip * l + a]] += dv;
            }
        }
    }
    Ok(FloquetMatrix {
        matrix: m,
        level_count: l,
        grid: grid.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::absorber::single_channel;
    use crate::timegrid::build_grid;
    use ndarray::Array1;

    fn constant_h(grid: &TimeGrid, e: f64) -> SampledHamiltonian {
        SampledHamiltonian {
            grid: grid.clone(),
            matrices: (0..grid.n)
                .map(|_| Array2::from_elem((1, 1), C64::new(e, 0.0)))
                .collect(),
            level_count: 1,
        }
    }

    #[test]
    fn constant_level_shifts_every_fourier_mode() {
        // For L = 1 and H = E the Floquet matrix is E I + D, so samples of
        // e^{i k w0 t} are eigenvectors with eigenvalue E + k w0.
        let g = build_grid(8, 1.0, 2.0).unwrap();
        let h = constant_h(&g, 1.5);
        let v = single_channel(&g, 0, 1, 0.0).unwrap();
        let f = assemble(&h, &v).unwrap();
        assert_eq!(f.matrix.nrows(), 8);
        for k in [-3i64, 0, 2] {
            let vk: Array1<C64> = g
                .points
                .iter()
                .map(|&t| (C64::i() * (k as f64 * g.omega0() * t)).exp())
                .collect();
            let fv = f.matrix.dot(&vk);
            let expect = C64::new(1.5 + k as f64 * g.omega0(), 0.0);
            for (a, b) in fv.iter().zip(vk.iter()) {
                assert!((a - b * expect).norm() < 1e-12, "mode {k}");
            }
        }
    }

    #[test]
    fn block_layout_is_time_major() {
        let g = build_grid(4, 1.0, 2.0).unwrap();
        let mut mats = Vec::new();
        for i in 0..4 {
            let mut m = Array2::zeros((2, 2));
            m[[0, 1]] = C64::new(i as f64, 0.0);
            m[[1, 0]] = C64::new(i as f64, 0.0);
            mats.push(m);
        }
        let h = SampledHamiltonian {
            grid: g.clone(),
            matrices: mats,
            level_count: 2,
        };
        let v = single_channel(&g, 0, 2, 4.0).unwrap();
        let d = derivative_operator(&g);
        let f = assemble_with(&h, &v, &d).unwrap();
        assert_eq!(f.matrix.nrows(), 8);
        // Diagonal block i = H(t_i) + V(t_i) + D[i][i] I.
        let i = 3;
        assert!((f.matrix[[2 * i, 2 * i + 1]] - C64::new(3.0, 0.0)).norm() < 1e-13);
        let absorbed = f.matrix[[2 * i + 1, 2 * i + 1]] - d.matrix[[i, i]];
        assert!((absorbed - v.matrices[i][[1, 1]]).norm() < 1e-13);
        // Off-diagonal time blocks are D[i][j] on the level diagonal only.
        assert!((f.matrix[[0, 2 * i]] - d.matrix[[0, i]]).norm() < 1e-13);
        assert_eq!(f.matrix[[0, 2 * i + 1]], C64::new(0.0, 0.0));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let g = build_grid(8, 1.0, 2.0).unwrap();
        let g2 = build_grid(8, 1.0, 2.5).unwrap();
        let h = constant_h(&g, 1.0);
        let v = single_channel(&g2, 0, 1, 1.0).unwrap();
        assert!(assemble(&h, &v).is_err());
        let v2 = single_channel(&g, 0, 2, 1.0).unwrap();
        assert!(assemble(&h, &v2).is_err());
        let d4 = derivative_operator(&build_grid(4, 1.0, 2.0).unwrap());
        let v1 = single_channel(&g, 0, 1, 1.0).unwrap();
        assert!(assemble_with(&h, &v1, &d4).is_err());
    }
}
