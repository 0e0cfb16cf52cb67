//! Driven few-level model Hamiltonians sampled on the periodic grid.
//!
//! All built-in models are written in the rotating frame: the diagonal holds
//! detunings, the off-diagonal the (real) Rabi couplings. On the artificial
//! extension (T, T') the couplings are zero and any detuning that does not
//! already match its t = 0 value is ramped back smoothly so the sampled
//! Hamiltonian is continuous and T'-periodic.

use std::f64::consts::PI;
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64 as C64;

use crate::timegrid::TimeGrid;
use crate::{Error, Result};

/// Built-in model families plus externally sampled Hamiltonians.
#[derive(Debug, Clone)]
pub enum ModelSpec {
    /// Two-level RWA model: Omega(t) = Omega0 sin^2(pi t / T) coupling,
    /// Delta(t) = Delta0 cos(pi t / T + phi0) detuning on level 2.
    TwoLevelRwa {
        omega0: f64,
        delta0: f64,
        phi0: f64,
        t_pulse: f64,
    },
    /// Three-level ladder with the pump pulse first: Omega_p on [0, T1],
    /// Omega_s on [T1/2, 3T1/2], constant intermediate detuning Delta0.
    ThreeLevelIntuitive { omega0: f64, delta0: f64, t1: f64 },
    /// Same ladder with the pulse order swapped (Stokes first) and zero
    /// detuning: the counterintuitive STIRAP sequence.
    ThreeLevelStirap { omega0: f64, t1: f64 },
    /// Hamiltonian given by samples on the grid points.
    CustomSampled { matrices: Vec<Array2<C64>> },
}

impl ModelSpec {
    /// Number of levels L.
    pub fn level_count(&self) -> Result<usize> {
        match self {
            ModelSpec::TwoLevelRwa { .. } => Ok(2),
            ModelSpec::ThreeLevelIntuitive { .. } | ModelSpec::ThreeLevelStirap { .. } => Ok(3),
            ModelSpec::CustomSampled { matrices } => match matrices.first() {
                Some(m) => Ok(m.nrows()),
                None => Err(Error::invalid("custom model has no samples")),
            },
        }
    }

    /// Physical duration implied by the model parameters; `None` for custom
    /// samples, whose duration is whatever the grid says.
    pub fn t_physical(&self) -> Option<f64> {
        match self {
            ModelSpec::TwoLevelRwa { t_pulse, .. } => Some(*t_pulse),
            ModelSpec::ThreeLevelIntuitive { t1, .. } | ModelSpec::ThreeLevelStirap { t1, .. } => {
                Some(1.5 * t1)
            }
            ModelSpec::CustomSampled { .. } => None,
        }
    }
}

/// Model Hamiltonian evaluated at every grid point.
#[derive(Debug, Clone)]
pub struct SampledHamiltonian {
    pub grid: TimeGrid,
    pub matrices: Vec<Array2<C64>>,
    pub level_count: usize,
}

impl SampledHamiltonian {
    /// Diagonal entry j at every grid point (the detuning channel j feels).
    pub fn diagonal(&self, j: usize) -> Vec<C64> {
        self.matrices.iter().map(|m| m[[j, j]]).collect()
    }
}

/// sin^2 ramp from `from` at s = 0 to `to` at s = 1.
fn ramp(from: f64, to: f64, s: f64) -> f64 {
    let w = (PI * s / 2.0).sin().powi(2);
    from + (to - from) * w
}

/// The pulse formulas are tied to the grid durations: T must match the model's
/// own pulse length. The three-level sequences additionally fix the extension
/// to one base period; for the two-level model its length is free.
fn check_duration(name: &str, grid: &TimeGrid, t: f64, t_total: Option<f64>) -> Result<()> {
    let tol = 1e-9 * grid.t_total;
    if (grid.t_physical - t).abs() > tol {
        return Err(Error::invalid(format!(
            "{name} expects T = {t}, grid has T = {}",
            grid.t_physical
        )));
    }
    if let Some(tt) = t_total {
        if (grid.t_total - tt).abs() > tol {
            return Err(Error::invalid(format!(
                "{name} expects T' = {tt}, grid has T' = {}",
                grid.t_total
            )));
        }
    }
    Ok(())
}

/// Evaluates a built-in model at an arbitrary time in [0, T']. For custom
/// samples the value is interpolated linearly (periodically) between grid
/// points; built-ins use their closed forms, so the reference integrator can
/// evaluate them between grid points without interpolation error.
pub fn evaluate(spec: &ModelSpec, grid: &TimeGrid, t: f64) -> Result<Array2<C64>> {
    if !(0.0..=grid.t_total + 1e-12 * grid.t_total).contains(&t) {
        return Err(Error::invalid(format!(
            "time {t} outside [0, {}]",
            grid.t_total
        )));
    }
    match spec {
        ModelSpec::TwoLevelRwa {
            omega0,
            delta0,
            phi0,
            t_pulse,
        } => {
            check_duration("two-level model", grid, *t_pulse, None)?;
            let t_p = *t_pulse;
            let (coupling, delta) = if t <= t_p {
                (
                    omega0 * (PI * t / t_p).sin().powi(2),
                    delta0 * (PI * t / t_p + phi0).cos(),
                )
            } else {
                // Extension: no coupling; detuning ramps from its value at T
                // back to its value at 0 so the period closes smoothly.
                let s = (t - t_p) / (grid.t_total - t_p);
                let d_end = delta0 * (PI + phi0).cos();
                let d_start = delta0 * phi0.cos();
                (0.0, ramp(d_end, d_start, s))
            };
            let mut h = Array2::zeros((2, 2));
            h[[0, 1]] = C64::new(coupling, 0.0);
            h[[1, 0]] = C64::new(coupling, 0.0);
            h[[1, 1]] = C64::new(delta, 0.0);
            Ok(h)
        }
        ModelSpec::ThreeLevelIntuitive { omega0, t1, .. }
        | ModelSpec::ThreeLevelStirap { omega0, t1 } => {
            let delta0 = match spec {
                ModelSpec::ThreeLevelIntuitive { delta0, .. } => *delta0,
                _ => 0.0,
            };
            check_duration("three-level model", grid, 1.5 * t1, Some(2.5 * t1))?;
            // Early pulse on [0, T1], late pulse on [T1/2, 3T1/2].
            let early = if t <= *t1 {
                omega0 * (PI * t / t1).sin().powi(2)
            } else {
                0.0
            };
            let late = if (0.5 * t1..=1.5 * t1).contains(&t) {
                omega0 * (PI * (t - 0.5 * t1) / t1).sin().powi(2)
            } else {
                0.0
            };
            let (pump, stokes) = match spec {
                ModelSpec::ThreeLevelIntuitive { .. } => (early, late),
                _ => (late, early),
            };
            let mut h = Array2::zeros((3, 3));
            h[[0, 1]] = C64::new(pump, 0.0);
            h[[1, 0]] = C64::new(pump, 0.0);
            h[[1, 2]] = C64::new(stokes, 0.0);
            h[[2, 1]] = C64::new(stokes, 0.0);
            // Constant detuning needs no extension ramp.
            h[[1, 1]] = C64::new(delta0, 0.0);
            Ok(h)
        }
        ModelSpec::CustomSampled { matrices } => {
            let n = grid.n;
            if matrices.len() != n {
                return Err(Error::invalid(format!(
                    "custom model has {} samples, grid has {n} points",
                    matrices.len()
                )));
            }
            let x = (t / grid.dt()).clamp(0.0, n as f64);
            let i = (x.floor() as usize).min(n - 1);
            let frac = x - i as f64;
            let a = &matrices[i];
            let b = &matrices[(i + 1) % n];
            Ok(a * C64::new(1.0 - frac, 0.0) + b * C64::new(frac, 0.0))
        }
    }
}

/// Samples the model at every grid point. Built-ins use the grid index (not a
/// floating comparison) to decide physical vs extension, so the split is
/// consistent with [`TimeGrid::i_t`].
pub fn sample_hamiltonian(spec: &ModelSpec, grid: &TimeGrid) -> Result<SampledHamiltonian> {
    let level_count = spec.level_count()?;
    let matrices: Result<Vec<Array2<C64>>> = match spec {
        ModelSpec::CustomSampled { matrices } => {
            if matrices.len() != grid.n {
                return Err(Error::invalid(format!(
                    "custom model has {} samples, grid has {} points",
                    matrices.len(),
                    grid.n
                )));
            }
            for (i, m) in matrices.iter().enumerate() {
                if m.nrows() != level_count || m.ncols() != level_count {
                    return Err(Error::invalid(format!(
                        "custom sample {i} is {}x{}, expected {level_count}x{level_count}",
                        m.nrows(),
                        m.ncols()
                    )));
                }
            }
            Ok(matrices.clone())
        }
        _ => grid.points.iter().map(|&t| evaluate(spec, grid, t)).collect(),
    };
    Ok(SampledHamiltonian {
        grid: grid.clone(),
        matrices: matrices?,
        level_count,
    })
}

/// Closure view of the model for time-continuous integrators.
pub fn evaluator<'a>(
    spec: &'a ModelSpec,
    grid: &'a TimeGrid,
) -> impl Fn(f64) -> Array2<C64> + 'a {
    move |t| evaluate(spec, grid, t).expect("model evaluation inside [0, T']")
}

/// Reads grid-sampled Hamiltonians from a text file: one line per grid point,
/// L^2 whitespace-separated `re,im` entries in row-major order. L is inferred
/// from the first line; the line count must equal the grid size.
pub fn load_custom_samples(path: &Path, grid: &TimeGrid) -> Result<SampledHamiltonian> {
    let text = std::fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut matrices = Vec::with_capacity(grid.n);
    let mut level_count = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if matrices.is_empty() {
            let l = (tokens.len() as f64).sqrt().round() as usize;
            if l < 2 || l * l != tokens.len() {
                return Err(Error::Format {
                    path: name,
                    line: lineno,
                    message: format!(
                        "{} entries do not form a square matrix of dimension >= 2",
                        tokens.len()
                    ),
                });
            }
            level_count = l;
        } else if tokens.len() != level_count * level_count {
            return Err(Error::Format {
                path: name,
                line: lineno,
                message: format!(
                    "expected {} entries, found {}",
                    level_count * level_count,
                    tokens.len()
                ),
            });
        }
        let mut m = Array2::zeros((level_count, level_count));
        for (k, tok) in tokens.iter().enumerate() {
            let (re, im) = tok.split_once(',').ok_or_else(|| Error::Format {
                path: name.clone(),
                line: lineno,
                message: format!("entry {:?} is not re,im", tok),
            })?;
            let re: f64 = re.trim().parse().map_err(|_| Error::Format {
                path: name.clone(),
                line: lineno,
                message: format!("cannot parse {:?} as a real part", re),
            })?;
            let im: f64 = im.trim().parse().map_err(|_| Error::Format {
                path: name.clone(),
                line: lineno,
                message: format!("cannot parse {:?} as an imaginary part", im),
            })?;
            m[[k / level_count, k % level_count]] = C64::new(re, im);
        }
        matrices.push(m);
    }
    if matrices.len() != grid.n {
        return Err(Error::Format {
            path: name,
            line: text.lines().count() + 1,
            message: format!("{} sample rows for a grid of {} points", matrices.len(), grid.n),
        });
    }
    sample_hamiltonian(&ModelSpec::CustomSampled { matrices }, grid)
}
