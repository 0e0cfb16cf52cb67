//! Direct reference propagator: midpoint exponential integrator.
//!
//! Each step applies U_k = exp(-i H(t_k + h/2) h), which is unitary whenever
//! H is Hermitian and second-order accurate in h, so population errors fall
//! by 4x per step-doubling. The matrix exponential uses scaling-and-squaring
//! with a Taylor kernel (plenty for the level counts involved); 2x2 steps
//! take a closed form instead.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::absorber::InitialState;
use crate::{Error, Result};

/// Model Hamiltonian as a function of time.
pub type HamiltonianFn<'a> = dyn Fn(f64) -> Array2<C64> + 'a;

/// States of the direct integration: `states[k]` at `times[k]`.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array1<C64>>,
    /// Nominal step the integrator worked with.
    pub step: f64,
    /// Step count of the uniform lattice behind `step`.
    pub steps: usize,
}

impl ReferenceTrajectory {
    pub fn level_count(&self) -> usize {
        self.states[0].len()
    }

    /// Populations |c_j|^2 at sample k.
    pub fn populations(&self, k: usize) -> Vec<f64> {
        self.states[k].iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Matrix exponential by scaling-and-squaring over a Taylor kernel.
/// Restricted to the small dimensions this crate propagates (<= 8).
pub fn expm(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid("expm needs a square non-empty matrix"));
    }
    if n > 8 {
        return Err(Error::invalid(format!(
            "expm is for level-sized matrices (<= 8), got {n}"
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("expm input has non-finite entries"));
    }
    // 1-norm sets the scaling so the Taylor argument is small.
    let norm1 = (0..n)
        .map(|j| (0..n).map(|i| a[[i, j]].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let s = if norm1 <= 0.5 {
        0
    } else {
        (norm1.log2().ceil() as i32 + 1).max(1) as u32
    };
    let b = a / C64::new((2.0f64).powi(s as i32), 0.0);
    let mut term = Array2::<C64>::eye(n);
    let mut sum = Array2::<C64>::eye(n);
    for k in 1..=64u64 {
        term = term.dot(&b) / C64::new(k as f64, 0.0);
        sum += &term;
        let t: f64 = term.iter().map(|z| z.norm()).sum();
        let m: f64 = sum.iter().map(|z| z.norm()).sum();
        if t <= 1e-17 * m.max(1.0) {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..s {
        out = out.dot(&out);
    }
    Ok(out)
}

/// exp(-i h dt) for one 2x2 step: split off the trace, then use
/// exp(z B) = cosh(z q) I + sinh(z q)/q B for traceless B with
/// q^2 = B00^2 + B01 B10.
fn step_matrix_2(h: &Array2<C64>, dt: f64) -> Array2<C64> {
    let z = C64::new(0.0, -dt);
    let m = (h[[0, 0]] + h[[1, 1]]) * 0.5;
    let b00 = h[[0, 0]] - m;
    let b01 = h[[0, 1]];
    let b10 = h[[1, 0]];
    let q2 = b00 * b00 + b01 * b10;
    let q = q2.sqrt();
    let zq = z * q;
    let (cosh, sinhc) = if zq.norm() < 1e-4 {
        // sinh(x)/x and cosh via series; q may be exactly zero.
        let x2 = zq * zq;
        (
            C64::new(1.0, 0.0) + x2 * 0.5 + x2 * x2 / 24.0,
            C64::new(1.0, 0.0) + x2 / 6.0 + x2 * x2 / 120.0,
        )
    } else {
        (zq.cosh(), zq.sinh() / zq)
    };
    let pre = (z * m).exp();
    let mut u = Array2::zeros((2, 2));
    u[[0, 0]] = pre * (cosh + sinhc * z * b00);
    u[[0, 1]] = pre * sinhc * z * b01;
    u[[1, 0]] = pre * sinhc * z * b10;
    u[[1, 1]] = pre * (cosh - sinhc * z * b00);
    u
}

fn step_matrix(h: &Array2<C64>, dt: f64) -> Result<Array2<C64>> {
    if h.nrows() == 2 {
        Ok(step_matrix_2(h, dt))
    } else {
        expm(&(h * C64::new(0.0, -dt)))
    }
}

fn initial_array(initial: &InitialState) -> Array1<C64> {
    Array1::from_vec(initial.amplitudes.clone())
}

/// Propagates with M uniform midpoint steps on [0, t_end], recording every
/// lattice state.
pub fn propagate(
    h: &HamiltonianFn,
    initial: &InitialState,
    t_end: f64,
    m: usize,
) -> Result<ReferenceTrajectory> {
    if !(t_end > 0.0) {
        return Err(Error::invalid(format!("t_end must be positive, got {t_end}")));
    }
    if m == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    let dt = t_end / m as f64;
    let mut state = initial_array(initial);
    let mut times = Vec::with_capacity(m + 1);
    let mut states = Vec::with_capacity(m + 1);
    times.push(0.0);
    states.push(state.clone());
    for k in 0..m {
        let tm = (k as f64 + 0.5) * dt;
        let u = step_matrix(&h(tm), dt)?;
        state = u.dot(&state);
        times.push((k + 1) as f64 * dt);
        states.push(state.clone());
    }
    Ok(ReferenceTrajectory {
        times,
        states,
        step: dt,
        steps: m,
    })
}

/// Propagates to exactly the requested (ascending, non-negative) times. Each
/// gap is covered by ceil(gap/h) exact midpoint sub-steps with the nominal
/// h = t_last / m, so off-lattice sample points cost no interpolation error.
pub fn propagate_at(
    h: &HamiltonianFn,
    initial: &InitialState,
    times: &[f64],
    m: usize,
) -> Result<ReferenceTrajectory> {
    if times.is_empty() {
        return Err(Error::invalid("no sample times requested"));
    }
    if m == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sample times must be ascending and non-negative"));
    }
    let t_last = *times.last().unwrap();
    if !(t_last > 0.0) {
        return Err(Error::invalid("last sample time must be positive"));
    }
    let h_nom = t_last / m as f64;
    let mut state = initial_array(initial);
    let mut states = Vec::with_capacity(times.len());
    let mut t_prev = 0.0f64;
    for &t in times {
        let gap = t - t_prev;
        if gap > 0.0 {
            let nsub = (gap / h_nom).ceil().max(1.0) as usize;
            let dt = gap / nsub as f64;
            for k in 0..nsub {
                let tm = t_prev + (k as f64 + 0.5) * dt;
                let u = step_matrix(&h(tm), dt)?;
                state = u.dot(&state);
            }
        }
        states.push(state.clone());
        t_prev = t;
    }
    Ok(ReferenceTrajectory {
        times: times.to_vec(),
        states,
        step: h_nom,
        steps: m,
    })
}

/// Doubles the step count from 4096 until every population at every requested
/// time moves by less than 1e-10, up to `cap`; returns the converged
/// trajectory (at `cap` if the tolerance was never met).
pub fn converged_at(
    h: &HamiltonianFn,
    initial: &InitialState,
    times: &[f64],
    cap: usize,
) -> Result<ReferenceTrajectory> {
    let cap = cap.max(4096);
    let mut m = 4096usize;
    let mut prev = propagate_at(h, initial, times, m)?;
    while m < cap {
        m *= 2;
        let cur = propagate_at(h, initial, times, m)?;
        let mut maxdiff = 0.0f64;
        for (a, b) in prev.states.iter().zip(&cur.states) {
            for (x, y) in a.iter().zip(b.iter()) {
                maxdiff = maxdiff.max((x.norm_sqr() - y.norm_sqr()).abs());
            }
        }
        if maxdiff < 1e-10 {
            return Ok(cur);
        }
        prev = cur;
    }
    Ok(prev)
}

/// Propagator matrix over [t0, t1] with m midpoint steps: columns are the
/// propagated standard basis vectors.
pub fn propagator_matrix(h: &HamiltonianFn, t0: f64, t1: f64, m: usize) -> Result<Array2<C64>> {
    if !(t1 > t0) {
        return Err(Error::invalid(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    if m == 0 {
        return Err(Error::invalid("step count must be positive"));
    }
    let dt = (t1 - t0) / m as f64;
    let l = h(t0).nrows();
    let mut u = Array2::<C64>::eye(l);
    for k in 0..m {
        let tm = t0 + (k as f64 + 0.5) * dt;
        let step = step_matrix(&h(tm), dt)?;
        u = step.dot(&u);
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn init2(a: f64, b: f64) -> InitialState {
        InitialState::new(vec![C64::new(a, 0.0), C64::new(b, 0.0)]).unwrap()
    }

    #[test]
    fn expm_diagonal_and_nilpotent() {
        let mut d = Array2::<C64>::zeros((2, 2));
        d[[0, 0]] = C64::new(1.0, -0.5);
        d[[1, 1]] = C64::new(-2.0, 0.25);
        let e = expm(&d).unwrap();
        assert!((e[[0, 0]] - d[[0, 0]].exp()).norm() < 1e-14);
        assert!((e[[1, 1]] - d[[1, 1]].exp()).norm() < 1e-14);
        assert!(e[[0, 1]].norm() < 1e-15);

        let mut nil = Array2::<C64>::zeros((2, 2));
        nil[[0, 1]] = C64::new(3.0, 1.0);
        let e = expm(&nil).unwrap();
        assert!((e[[0, 1]] - nil[[0, 1]]).norm() < 1e-14);
        assert!((e[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expm_rotation_block() {
        let th = 0.7f64;
        let mut a = Array2::<C64>::zeros((2, 2));
        a[[0, 1]] = C64::new(th, 0.0);
        a[[1, 0]] = C64::new(-th, 0.0);
        let e = expm(&a).unwrap();
        assert!((e[[0, 0]].re - th.cos()).abs() < 1e-14);
        assert!((e[[0, 1]].re - th.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_rejects_large_dimensions() {
        assert!(expm(&Array2::<C64>::zeros((9, 9))).is_err());
        assert!(expm(&Array2::<C64>::eye(8)).is_ok());
    }

    #[test]
    fn closed_form_step_matches_expm() {
        let h = Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(0.3, -0.2),
                C64::new(1.1, 0.4),
                C64::new(1.1, -0.4),
                C64::new(-0.8, -0.1),
            ],
        )
        .unwrap();
        let dt = 0.37;
        let a = step_matrix_2(&h, dt);
        let b = expm(&(&h * C64::new(0.0, -dt))).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[[i, j]] - b[[i, j]]).norm() < 1e-13);
            }
        }
        // Degenerate q -> 0 branch: proportional rows make q^2 = 0 possible.
        let mut hz = Array2::<C64>::zeros((2, 2));
        hz[[0, 0]] = C64::new(1e-9, 0.0);
        let a = step_matrix_2(&hz, dt);
        let b = expm(&(&hz * C64::new(0.0, -dt))).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[[i, j]] - b[[i, j]]).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn free_evolution_keeps_populations() {
        let h = |_t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            m[[1, 1]] = C64::new(2.0, 0.0);
            m
        };
        let traj = propagate(&h, &init2(0.6, 0.8), 1.0, 64).unwrap();
        let p = traj.populations(64);
        assert!((p[0] - 0.36).abs() < 1e-12);
        assert!((p[1] - 0.64).abs() < 1e-12);
        // Phase of level 2 advances as e^{-i 2 t}.
        let z = traj.states[64][1];
        assert!((z - C64::new(0.8, 0.0) * (C64::new(0.0, -2.0)).exp()).norm() < 1e-10);
    }

    #[test]
    fn rabi_oscillation_analytic() {
        let om = 1.3f64;
        let h = move |_t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            m[[0, 1]] = C64::new(om, 0.0);
            m[[1, 0]] = C64::new(om, 0.0);
            m
        };
        let traj = propagate(&h, &init2(1.0, 0.0), 2.0, 4096).unwrap();
        for k in [1024usize, 2048, 4096] {
            let t = traj.times[k];
            let p2 = traj.populations(k)[1];
            assert!((p2 - (om * t).sin().powi(2)).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn off_lattice_times_match_dense_propagation() {
        let h = |t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            let om = 2.0 * (std::f64::consts::PI * t).sin().powi(2);
            m[[0, 1]] = C64::new(om, 0.0);
            m[[1, 0]] = C64::new(om, 0.0);
            m[[1, 1]] = C64::new(0.5, 0.0);
            m
        };
        let dense = propagate(&h, &init2(1.0, 0.0), 1.0, 8192).unwrap();
        // Lattice-aligned requests reproduce the dense run exactly.
        let times = [0.125, 0.5, 0.625, 1.0];
        let at = propagate_at(&h, &init2(1.0, 0.0), &times, 8192).unwrap();
        for (i, &t) in times.iter().enumerate() {
            let k = (t * 8192.0).round() as usize;
            let diff = (&at.states[i] - &dense.states[k])
                .iter()
                .map(|z| z.norm())
                .fold(0.0f64, f64::max);
            assert!(diff < 1e-12, "t = {t}: {diff:e}");
        }
        // Off-lattice requests converge to the same physics.
        let odd = [0.1, 0.7314159, 1.0];
        let a = propagate_at(&h, &init2(1.0, 0.0), &odd, 4096).unwrap();
        let b = propagate_at(&h, &init2(1.0, 0.0), &odd, 8192).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (u, v) in x.iter().zip(y.iter()) {
                assert!((u.norm_sqr() - v.norm_sqr()).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn midpoint_is_second_order() {
        let h = |t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            let om = 3.0 * (std::f64::consts::PI * t).sin().powi(2);
            m[[0, 1]] = C64::new(om, 0.0);
            m[[1, 0]] = C64::new(om, 0.0);
            m[[1, 1]] = C64::new(1.0 * (2.0 * t).cos(), 0.0);
            m
        };
        let exact = propagate(&h, &init2(1.0, 0.0), 1.0, 1 << 16).unwrap();
        let p_exact = exact.populations(1 << 16)[1];
        let mut errs = Vec::new();
        for m in [256usize, 512, 1024, 2048] {
            let traj = propagate(&h, &init2(1.0, 0.0), 1.0, m).unwrap();
            errs.push((traj.populations(m)[1] - p_exact).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!(ratio > 3.3 && ratio < 4.7, "ratios {errs:?}");
        }
    }

    #[test]
    fn convergence_protocol_stops_when_stable() {
        let h = |_t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            m[[0, 1]] = C64::new(1.0, 0.0);
            m[[1, 0]] = C64::new(1.0, 0.0);
            m
        };
        let traj = converged_at(&h, &init2(1.0, 0.0), &[0.5, 1.0], 1 << 20).unwrap();
        assert!(traj.steps <= 1 << 15, "constant H should converge early");
        let p = traj.populations(1)[1];
        assert!((p - 1.0f64.sin().powi(2)).abs() < 1e-10);
    }

    #[test]
    fn propagator_matrix_is_unitary_and_consistent() {
        let h = |t: f64| {
            let mut m = Array2::<C64>::zeros((2, 2));
            let om = 1.7 * (std::f64::consts::PI * t).sin().powi(2);
            m[[0, 1]] = C64::new(om, 0.0);
            m[[1, 0]] = C64::new(om, 0.0);
            m
        };
        let u = propagator_matrix(&h, 0.0, 1.0, 4096).unwrap();
        let id = u.t().mapv(|z| z.conj()).dot(&u);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id[[i, j]] - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        let init = init2(1.0, 0.0);
        let traj = propagate(&h, &init, 1.0, 4096).unwrap();
        let through = u.dot(&Array1::from_vec(init.amplitudes.clone()));
        let diff = (&through - &traj.states[4096])
            .iter()
            .map(|z| z.norm())
            .fold(0.0f64, f64::max);
        assert!(diff < 1e-13);
    }

    #[test]
    fn input_validation() {
        let h = |_t: f64| Array2::<C64>::zeros((2, 2));
        let init = init2(1.0, 0.0);
        assert!(propagate(&h, &init, 0.0, 16).is_err());
        assert!(propagate(&h, &init, 1.0, 0).is_err());
        assert!(propagate_at(&h, &init, &[], 16).is_err());
        assert!(propagate_at(&h, &init, &[0.5, 0.25], 16).is_err());
        assert!(propagate_at(&h, &init, &[-0.5, 0.25], 16).is_err());
        assert!(propagator_matrix(&h, 1.0, 1.0, 16).is_err());
    }
}
