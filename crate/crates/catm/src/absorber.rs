//! Time-dependent absorbing potentials confined to the artificial extension.
//!
//! The absorber -i V_opt(t) P acts only on (T, T'): V_opt rises and falls as
//! sin^2 with integral V0 (T'-T)/2, and the projector P spares exactly the
//! component that carries the physical trajectory. For a basis initial state
//! P just kills every other level; for a two-level superposition P must
//! follow the free phase evolution of the surviving pair, which makes it
//! non-Hermitian but still idempotent.

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// Normalized initial state c with sum |c_j|^2 = 1.
#[derive(Debug, Clone)]
pub struct InitialState {
    pub amplitudes: Vec<C64>,
}

impl InitialState {
    /// Normalizes the given amplitudes. Errors on empty, non-finite, or
    /// zero-norm input.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::invalid("initial state has no amplitudes"));
        }
        if amplitudes.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::invalid("initial state has non-finite amplitudes"));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            return Err(Error::invalid("initial state has zero norm"));
        }
        Ok(InitialState {
            amplitudes: amplitudes.into_iter().map(|z| z / norm).collect(),
        })
    }

    pub fn level_count(&self) -> usize {
        self.amplitudes.len()
    }

    /// `Some(j)` when the state is the basis state |j> (0-based), i.e. every
    /// other amplitude is below 1e-12.
    pub fn basis_index(&self) -> Option<usize> {
        let mut found = None;
        for (j, z) in self.amplitudes.iter().enumerate() {
            if z.norm() > 1e-12 {
                if found.is_some() {
                    return None;
                }
                found = Some(j);
            }
        }
        found
    }
}

/// Absorbing potential sampled on the grid: matrices[i] = -i V_opt(t_i) P(t_i).
#[derive(Debug, Clone)]
pub struct AbsorbingPotential {
    pub grid: TimeGrid,
    pub matrices: Vec<Array2<C64>>,
    pub v0: f64,
    /// Integral of V_opt over the extension, V0 (T'-T)/2.
    pub area: f64,
    /// True when a zero first amplitude forced the single-channel fallback.
    pub swapped_channel: bool,
}

impl AbsorbingPotential {
    pub fn level_count(&self) -> usize {
        self.matrices[0].nrows()
    }
}

/// Area of the envelope integral over the extension: V0 (T'-T)/2.
pub fn envelope_area(grid: &TimeGrid, v0: f64) -> f64 {
    0.5 * v0 * (grid.t_total - grid.t_physical)
}

/// Absorber amplitude at every grid point: V0 sin^2(pi (t-T)/(T'-T)) on the
/// extension, exactly zero on the physical points.
pub fn envelope(grid: &TimeGrid, v0: f64) -> Vec<f64> {
    let t = grid.t_physical;
    let span = grid.t_total - t;
    grid.points
        .iter()
        .enumerate()
        .map(|(i, &ti)| {
            if i <= grid.i_t {
                0.0
            } else {
                v0 * (std::f64::consts::PI * (ti - t) / span).sin().powi(2)
            }
        })
        .collect()
}

fn check_v0(v0: f64) -> Result<()> {
    if !v0.is_finite() || v0 < 0.0 {
        return Err(Error::invalid(format!(
            "absorber amplitude must be finite and non-negative, got {v0}"
        )));
    }
    Ok(())
}

fn build(grid: &TimeGrid, v0: f64, projector_at: impl Fn(usize) -> Array2<C64>) -> AbsorbingPotential {
    let env = envelope(grid, v0);
    let matrices = env
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v == 0.0 {
                let l = projector_at(i).nrows();
                Array2::zeros((l, l))
            } else {
                projector_at(i) * C64::new(0.0, -v)
            }
        })
        .collect();
    AbsorbingPotential {
        grid: grid.clone(),
        matrices,
        v0,
        area: envelope_area(grid, v0),
        swapped_channel: false,
    }
}

/// Absorber for a basis initial state |keep>: projects on every other level.
pub fn single_channel(
    grid: &TimeGrid,
    keep: usize,
    level_count: usize,
    v0: f64,
) -> Result<AbsorbingPotential> {
    check_v0(v0)?;
    if level_count == 0 || keep >= level_count {
        return Err(Error::invalid(format!(
            "kept channel {keep} outside a {level_count}-level system"
        )));
    }
    let mut p = Array2::<C64>::eye(level_count);
    p[[keep, keep]] = C64::new(0.0, 0.0);
    Ok(build(grid, v0, move |_| p.clone()))
}

/// Absorber for a two-level superposition (c1, c2). The projector
///
/// P(t) = [[0, 0], [-(c2/c1) e^{i phi(t)}, 1]],   phi(t) = int_t^{T'} (D2 - D1)
///
/// is idempotent and annihilates the freely evolving continuation of the
/// initial state through the extension, where the model is diagonal with
/// detunings D1, D2. A vanishing c1 degenerates P to the plain projector on
/// level 1, handled by falling back to [`single_channel`] with the kept
/// channel swapped (flagged on the result).
pub fn two_state_projector(
    grid: &TimeGrid,
    initial: &InitialState,
    delta1: &[C64],
    delta2: &[C64],
    v0: f64,
) -> Result<AbsorbingPotential> {
    check_v0(v0)?;
    if initial.level_count() != 2 {
        return Err(Error::invalid(format!(
            "projector absorber needs a two-level state, got {} levels",
            initial.level_count()
        )));
    }
    if delta1.len() != grid.n || delta2.len() != grid.n {
        return Err(Error::invalid("detuning samples do not match the grid"));
    }
    let c1 = initial.amplitudes[0];
    let c2 = initial.amplitudes[1];
    if c1.norm() < 1e-12 {
        let mut pot = single_channel(grid, 1, 2, v0)?;
        pot.swapped_channel = true;
        return Ok(pot);
    }
    let phi = integral_to_period_end(grid, delta1, delta2);
    let ratio = c2 / c1;
    Ok(build(grid, v0, move |i| {
        let mut p = Array2::zeros((2, 2));
        p[[1, 0]] = -ratio * (C64::i() * phi[i]).exp();
        p[[1, 1]] = C64::new(1.0, 0.0);
        p
    }))
}

/// phi_i = int_{t_i}^{T'} (delta2 - delta1) dt by the periodic trapezoid rule;
/// the sample at T' is the wrapped t_0 value.
fn integral_to_period_end(grid: &TimeGrid, delta1: &[C64], delta2: &[C64]) -> Vec<C64> {
    let n = grid.n;
    let dt = grid.dt();
    let d: Vec<C64> = (0..n).map(|i| delta2[i] - delta1[i]).collect();
    let mut phi = vec![C64::new(0.0, 0.0); n];
    let mut acc = C64::new(0.0, 0.0);
    for i in (0..n).rev() {
        let next = if i + 1 == n { d[0] } else { d[i + 1] };
        acc += (d[i] + next) * 0.5 * dt;
        phi[i] = acc;
    }
    phi
}
