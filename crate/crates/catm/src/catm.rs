//! Connected-state selection and trajectory reconstruction.
//!
//! After diagonalizing the Floquet matrix, exactly one eigenstate carries the
//! physical trajectory: the absorber pushes every other candidate deeper into
//! the lower half plane, so the connected eigenvalue is the one with the
//! smallest |Im| among the candidates whose real part lies in the interior of
//! the frequency window. The interior restriction matters: each physical
//! solution spawns a whole Brillouin family omega + k w0, and the family
//! members near the Nyquist edge of the window are distorted by the finite
//! grid, in both value and vector. Restricting to |Re| <= N w0 / 4 keeps only
//! well-resolved family representatives without pinning the choice to a
//! specific zone, which would be unstable for spectra that sit exactly on a
//! zone boundary. Near-ties in |Im| are broken by the overlap of the
//! eigenvector's t_1 block with the initial state.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::absorber::{single_channel, two_state_projector, AbsorbingPotential, InitialState};
use crate::eig::{EigenPair, Hessenberg, InvitWorkspace};
use crate::floquet::assemble_with;
use crate::models::{sample_hamiltonian, ModelSpec, SampledHamiltonian};
use crate::timegrid::{derivative_operator_with, Convention, TimeGrid};
use crate::{Error, Result};

/// Everything the eigenproblem says about the dynamics.
#[derive(Debug, Clone)]
pub struct CatmSolution {
    /// Connected Floquet eigenvalue omega_lambda.
    pub omega: C64,
    /// Reconstructed state at every grid point, Psi(t_i) = s e^{-i omega t_i}
    /// lambda(t_i).
    pub trajectory: Vec<Array1<C64>>,
    /// || s lambda(t_1) - c ||: how well the eigenstate connects to the
    /// initial condition.
    pub connection_residual: f64,
    /// Full spectrum, sorted by (Re, Im) ascending.
    pub spectrum: Vec<C64>,
    /// Position of the connected eigenvalue in `spectrum`.
    pub selected_index: usize,
    /// Eigensolver residual of the selected pair.
    pub selected_residual: f64,
    /// Set when another Brillouin family comes within the eigensolver's own
    /// accuracy of the connected |Im|: the selection is then not isolated.
    pub isolation_warning: bool,
    pub grid: TimeGrid,
    pub level_count: usize,
}

/// Solves with the signed frequency convention.
pub fn solve(
    spec: &ModelSpec,
    initial: &InitialState,
    v0: f64,
    grid: &TimeGrid,
) -> Result<CatmSolution> {
    solve_with(spec, initial, v0, grid, Convention::Signed)
}

/// Assembles the Floquet matrix for the model + absorber, diagonalizes it,
/// selects the connected eigenstate, and reconstructs the trajectory.
pub fn solve_with(
    spec: &ModelSpec,
    initial: &InitialState,
    v0: f64,
    grid: &TimeGrid,
    convention: Convention,
) -> Result<CatmSolution> {
    let h = sample_hamiltonian(spec, grid)?;
    let l = h.level_count;
    if initial.level_count() != l {
        return Err(Error::invalid(format!(
            "initial state has {} levels, model has {l}",
            initial.level_count()
        )));
    }
    let pot = absorber_for(&h, initial, v0)?;
    let d = derivative_operator_with(grid, convention);
    let f = assemble_with(&h, &pot, &d)?;
    let hess = Hessenberg::new(&f.matrix)?;
    let values = hess.eigenvalues()?;
    let mut spectrum = values;
    spectrum.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));

    let mut ws = InvitWorkspace::new(f.matrix.nrows());
    let mut cached: Option<(usize, Array1<C64>, f64)> = None;
    let selected_index = {
        let cached = &mut cached;
        select_index(&spectrum, grid, |idx| {
            let (vector, residual) = hess.eigenvector_with(spectrum[idx], &mut ws)?;
            let ov = overlap_with_initial(&vector, initial, l);
            *cached = Some((idx, vector, residual));
            Ok(ov)
        })?
    };
    let (vector, selected_residual) = match cached {
        Some((idx, v, r)) if idx == selected_index => (v, r),
        _ => hess.eigenvector_with(spectrum[selected_index], &mut ws)?,
    };
    let omega = spectrum[selected_index];
    let (trajectory, connection_residual) = reconstruct(omega, &vector, grid, l, initial)?;
    let isolation_warning =
        isolation_check(&spectrum, grid, selected_index, selected_residual * hess.norm());
    Ok(CatmSolution {
        omega,
        trajectory,
        connection_residual,
        spectrum,
        selected_index,
        selected_residual,
        isolation_warning,
        grid: grid.clone(),
        level_count: l,
    })
}

/// Picks the absorber appropriate for the initial state: single-channel for a
/// basis state, the two-level projector for a superposition.
fn absorber_for(
    h: &SampledHamiltonian,
    initial: &InitialState,
    v0: f64,
) -> Result<AbsorbingPotential> {
    let grid = &h.grid;
    let l = h.level_count;
    match initial.basis_index() {
        Some(keep) => single_channel(grid, keep, l, v0),
        None if l == 2 => {
            // The projector tracks the free phase evolution through the
            // extension, which only exists if the model is decoupled there.
            let max_h: f64 = h
                .matrices
                .iter()
                .flat_map(|m| m.iter())
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            for i in grid.i_t + 1..grid.n {
                let m = &h.matrices[i];
                if m[[0, 1]].norm() > 1e-10 * max_h.max(1.0)
                    || m[[1, 0]].norm() > 1e-10 * max_h.max(1.0)
                {
                    return Err(Error::invalid(
                        "superposition initial state needs a decoupled extension",
                    ));
                }
            }
            two_state_projector(grid, initial, &h.diagonal(0), &h.diagonal(1), v0)
        }
        None => Err(Error::invalid(
            "superposition initial states are supported for two-level models only",
        )),
    }
}

/// Candidate filter: eigenvalues with |Re| <= N w0 / 4, safely away from the
/// distorted Nyquist edge of the frequency window.
pub(crate) fn interior_candidates(values: &[C64], grid: &TimeGrid) -> Vec<usize> {
    let bound = grid.n as f64 * grid.omega0() / 4.0 * (1.0 + 1e-12);
    let inside: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].re.abs() <= bound)
        .collect();
    if inside.is_empty() {
        // A spectrum entirely outside the window (possible only for extreme
        // level energies) falls back to every eigenvalue.
        (0..values.len()).collect()
    } else {
        inside
    }
}

/// True when b sits on the Brillouin ladder of a: b = a + k w0 for integer k,
/// to within 1e-6.
pub(crate) fn in_same_family(a: C64, b: C64, omega0: f64) -> bool {
    let k = ((b.re - a.re) / omega0).round();
    let shifted = C64::new(a.re + k * omega0, a.im);
    (b - shifted).norm() < 1e-6
}

/// Core selection: smallest |Im| among interior candidates; candidates within
/// 1e-8 of the spectral radius of that minimum are tie-broken by the overlap
/// closure (larger wins).
fn select_index(
    values: &[C64],
    grid: &TimeGrid,
    mut overlap: impl FnMut(usize) -> Result<f64>,
) -> Result<usize> {
    let cand = interior_candidates(values, grid);
    let rho = values.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let best_abs_im = cand
        .iter()
        .map(|&i| values[i].im.abs())
        .fold(f64::INFINITY, f64::min);
    let mut tie: Vec<usize> = cand
        .into_iter()
        .filter(|&i| values[i].im.abs() - best_abs_im <= 1e-8 * rho.max(f64::MIN_POSITIVE))
        .collect();
    if tie.len() == 1 {
        return Ok(tie[0]);
    }
    // Members of one Brillouin family share the overlap, so order the tie by
    // |Re| and keep the first of equals: the zone-center representative.
    tie.sort_by(|&a, &b| {
        values[a]
            .re
            .abs()
            .total_cmp(&values[b].re.abs())
            .then(values[a].re.total_cmp(&values[b].re))
    });
    let mut best = tie[0];
    let mut best_ov = -1.0f64;
    for &i in &tie {
        let ov = overlap(i)?;
        if ov > best_ov + 1e-9 {
            best_ov = ov;
            best = i;
        }
    }
    Ok(best)
}

fn overlap_with_initial(vector: &Array1<C64>, initial: &InitialState, l: usize) -> f64 {
    let first = vector.slice(ndarray::s![0..l]);
    let nrm = first.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if nrm < 1e-12 {
        return 0.0;
    }
    let dot: C64 = initial
        .amplitudes
        .iter()
        .zip(first.iter())
        .map(|(c, z)| c.conj() * z)
        .sum();
    dot.norm() / nrm
}

/// Isolation check: the nearest |Im| among interior candidates of *other*
/// Brillouin families must clear the connected |Im| by more than ten times
/// the eigensolver's own absolute accuracy, else the selection is flagged.
fn isolation_check(
    spectrum: &[C64],
    grid: &TimeGrid,
    selected: usize,
    abs_accuracy: f64,
) -> bool {
    let omega = spectrum[selected];
    let w0 = grid.omega0();
    let second = interior_candidates(spectrum, grid)
        .into_iter()
        .filter(|&i| i != selected && !in_same_family(omega, spectrum[i], w0))
        .map(|i| spectrum[i].im.abs())
        .fold(f64::INFINITY, f64::min);
    if !second.is_finite() {
        return false;
    }
    (second - omega.im.abs()).abs() < 10.0 * abs_accuracy
}

/// Selects the connected eigenpair from a fully computed eigendecomposition.
/// The level count is inferred from the vector length and the grid.
pub fn select_connected(
    pairs: &[EigenPair],
    initial: &InitialState,
    grid: &TimeGrid,
) -> Result<usize> {
    if pairs.is_empty() {
        return Err(Error::invalid("no eigenpairs to select from"));
    }
    let dim = pairs[0].vector.len();
    if dim % grid.n != 0 {
        return Err(Error::invalid(format!(
            "vector length {dim} is not a multiple of the grid size {}",
            grid.n
        )));
    }
    let l = dim / grid.n;
    if initial.level_count() != l {
        return Err(Error::invalid(format!(
            "initial state has {} levels, vectors imply {l}",
            initial.level_count()
        )));
    }
    let values: Vec<C64> = pairs.iter().map(|p| p.value).collect();
    select_index(&values, grid, |i| {
        Ok(overlap_with_initial(&pairs[i].vector, initial, l))
    })
}

/// Rebuilds the physical trajectory from one Floquet eigenpair. The scale
/// s = <lambda(t_1)|c> / ||lambda(t_1)||^2 is the least-squares connection to
/// the initial state; its residual is returned alongside. A t_1 block with no
/// weight (norm below 1e-12) cannot be connected and errors out.
pub fn reconstruct(
    omega: C64,
    vector: &Array1<C64>,
    grid: &TimeGrid,
    level_count: usize,
    initial: &InitialState,
) -> Result<(Vec<Array1<C64>>, f64)> {
    let n = grid.n;
    let l = level_count;
    if vector.len() != n * l {
        return Err(Error::invalid(format!(
            "vector length {} does not match {n} points x {l} levels",
            vector.len()
        )));
    }
    if initial.level_count() != l {
        return Err(Error::invalid("initial state level count mismatch"));
    }
    let first = vector.slice(ndarray::s![0..l]);
    let nrm_sqr: f64 = first.iter().map(|z| z.norm_sqr()).sum();
    if nrm_sqr.sqrt() < 1e-12 {
        return Err(Error::DegenerateConnection(nrm_sqr.sqrt()));
    }
    let dot: C64 = first
        .iter()
        .zip(initial.amplitudes.iter())
        .map(|(z, c)| z.conj() * c)
        .sum();
    let s = dot / nrm_sqr;
    let mut connection = 0.0f64;
    for (z, c) in first.iter().zip(initial.amplitudes.iter()) {
        connection += (z * s - c).norm_sqr();
    }
    let connection = connection.sqrt();
    let trajectory = (0..n)
        .map(|i| {
            let phase = s * (-C64::i() * omega * grid.points[i]).exp();
            Array1::from_iter(
                vector
                    .slice(ndarray::s![i * l..(i + 1) * l])
                    .iter()
                    .map(|z| z * phase),
            )
        })
        .collect();
    Ok((trajectory, connection))
}
