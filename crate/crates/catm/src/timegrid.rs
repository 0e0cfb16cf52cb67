//! Uniform periodic time grid and the spectral form of the -i d/dt operator.
//!
//! The grid covers one artificial period [0, T') with points t_i = (i-1) T'/N
//! (1-based i; stored 0-based). The physical evolution lives on [0, T] and the
//! tail (T, T') hosts the absorbing potential. Because every sampled quantity
//! is treated as T'-periodic, -i d/dt acts diagonally in the discrete Fourier
//! basis and its grid representation is the dense circulant matrix
//! D = F^{-1} diag(hbar w_k) F.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::{Error, Result};

/// Frequency-bin convention for the spectral derivative.
///
/// `Signed` places bin n at k = n-1 for n-1 < ceil(N/2) and k = n-1-N above,
/// so modes are centered on zero. `Unsigned` keeps the raw bin index k = n-1.
/// Both give identical propagation results for states whose spectrum is
/// resolved; `Signed` is the default everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Signed,
    Unsigned,
}

/// Discretization of one artificial period [0, T').
#[derive(Debug, Clone)]
pub struct TimeGrid {
    /// Number of grid points N.
    pub n: usize,
    /// End of the physical interval, T.
    pub t_physical: f64,
    /// Artificial period, T' > T.
    pub t_total: f64,
    /// Grid points t_i = i T'/N for i = 0..N-1.
    pub points: Vec<f64>,
    /// Index of the last grid point with t_i <= T (0-based).
    pub i_t: usize,
}

impl TimeGrid {
    /// Grid spacing T'/N.
    pub fn dt(&self) -> f64 {
        self.t_total / self.n as f64
    }

    /// Fundamental angular frequency 2 pi / T'.
    pub fn omega0(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.t_total
    }

    /// The grid points inside the physical interval, t_0..t_{i_T}.
    pub fn physical_points(&self) -> &[f64] {
        &self.points[..=self.i_t]
    }
}

/// Builds the periodic grid. Errors on `n < 2`, non-positive `t_physical`,
/// or `t_total <= t_physical`.
pub fn build_grid(n: usize, t_physical: f64, t_total: f64) -> Result<TimeGrid> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
    }
    if !t_physical.is_finite() || t_physical <= 0.0 {
        return Err(Error::invalid(format!(
            "physical duration must be positive, got {t_physical}"
        )));
    }
    if !t_total.is_finite() || t_total <= t_physical {
        return Err(Error::invalid(format!(
            "total period {t_total} must exceed the physical duration {t_physical}"
        )));
    }
    let dt = t_total / n as f64;
    let points: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    // Tolerant comparison so that T landing exactly on a grid point is kept
    // even when the division above rounds it a few ulp upward.
    let tol = 1e-12 * t_total;
    let i_t = points
        .iter()
        .rposition(|&ti| ti <= t_physical + tol)
        .expect("t_0 = 0 is always physical");
    Ok(TimeGrid {
        n,
        t_physical,
        t_total,
        points,
        i_t,
    })
}

/// Angular frequencies hbar w_k of each Fourier bin in grid order (signed
/// convention).
pub fn fourier_frequencies(grid: &TimeGrid) -> Vec<f64> {
    fourier_frequencies_with(grid, Convention::Signed)
}

/// Angular frequencies of each Fourier bin under the given convention.
pub fn fourier_frequencies_with(grid: &TimeGrid, convention: Convention) -> Vec<f64> {
    let n = grid.n;
    let w0 = grid.omega0();
    let half = n.div_ceil(2);
    (0..n)
        .map(|idx| match convention {
            Convention::Signed => {
                if idx < half {
                    idx as f64 * w0
                } else {
                    (idx as f64 - n as f64) * w0
                }
            }
            Convention::Unsigned => idx as f64 * w0,
        })
        .collect()
}

/// Dense grid representation of -i d/dt together with its bin frequencies.
#[derive(Debug, Clone)]
pub struct DerivativeOperator {
    pub matrix: Array2<C64>,
    pub frequencies: Vec<f64>,
    pub convention: Convention,
}

/// Spectral derivative operator in the signed convention.
pub fn derivative_operator(grid: &TimeGrid) -> DerivativeOperator {
    derivative_operator_with(grid, Convention::Signed)
}

/// Spectral derivative operator under the given bin convention.
///
/// The matrix is circulant: row i, column j holds c[(i - j) mod N] where c is
/// the inverse DFT of the frequency vector. Applied to samples of e^{i k w0 t}
/// with representable k it returns hbar k w0 times the samples exactly (up to
/// roundoff); the Nyquist column of an even signed grid absorbs k = +N/2 into
/// -N/2.
pub fn derivative_operator_with(grid: &TimeGrid, convention: Convention) -> DerivativeOperator {
    let n = grid.n;
    let frequencies = fourier_frequencies_with(grid, convention);
    let spectrum: Vec<C64> = frequencies.iter().map(|&f| C64::new(f, 0.0)).collect();
    let column = idft(&spectrum);
    let mut matrix = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            matrix[[i, j]] = column[(n + i - j) % n];
        }
    }
    DerivativeOperator {
        matrix,
        frequencies,
        convention,
    }
}

/// Forward DFT, X_k = sum_m x_m e^{-2 pi i k m / N}, via rustfft.
#[cfg(test)]
pub(crate) fn dft(x: &[C64]) -> Vec<C64> {
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_forward(x.len()).process(&mut buf);
    buf
}

/// Inverse DFT, x_m = (1/N) sum_k X_k e^{+2 pi i k m / N}, via rustfft.
pub(crate) fn idft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    let mut buf = x.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    for v in &mut buf {
        *v *= scale;
    }
    buf
}

/// Direct O(N^2) forward DFT. Kept as an independent check of the fast path;
/// the twiddle angle is reduced through the integer product k*m mod N so it
/// stays exact for any N.
#[cfg(test)]
pub(crate) fn dft_direct(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = C64::new(0.0, 0.0);
        for (m, &v) in x.iter().enumerate() {
            let angle = -2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64;
            acc += v * C64::new(angle.cos(), angle.sin());
        }
        *o = acc;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid {
        build_grid(n, 1.0, 2.0).unwrap()
    }

    #[test]
    fn grid_points_and_split() {
        let g = grid(8);
        assert_eq!(g.points.len(), 8);
        assert_eq!(g.dt(), 0.25);
        assert_eq!(g.points[0], 0.0);
        assert_eq!(g.points[7], 1.75);
        assert_eq!(g.i_t, 4);
        assert_eq!(g.physical_points(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!((g.omega0() - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn grid_split_off_lattice() {
        // T between grid points: largest t_i <= T wins.
        let g = build_grid(256, 1.5, 2.5).unwrap();
        assert_eq!(g.i_t, 153);
        assert!(g.points[g.i_t] <= 1.5);
        assert!(g.points[g.i_t + 1] > 1.5);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(build_grid(1, 1.0, 2.0).is_err());
        assert!(build_grid(8, 0.0, 2.0).is_err());
        assert!(build_grid(8, -1.0, 2.0).is_err());
        assert!(build_grid(8, 1.0, 1.0).is_err());
        assert!(build_grid(8, 1.0, 0.5).is_err());
    }

    #[test]
    fn signed_frequencies_small_n() {
        let g = grid(4);
        let w0 = g.omega0();
        let f = fourier_frequencies(&g);
        let k: Vec<f64> = f.iter().map(|v| v / w0).collect();
        assert_eq!(k, vec![0.0, 1.0, -2.0, -1.0]);

        let g5 = build_grid(5, 1.0, 2.0).unwrap();
        let f5 = fourier_frequencies(&g5);
        let k5: Vec<f64> = f5.iter().map(|v| v / g5.omega0()).collect();
        assert_eq!(k5, vec![0.0, 1.0, 2.0, -2.0, -1.0]);
    }

    #[test]
    fn unsigned_frequencies_small_n() {
        let g = grid(4);
        let f = fourier_frequencies_with(&g, Convention::Unsigned);
        let k: Vec<f64> = f.iter().map(|v| v / g.omega0()).collect();
        assert_eq!(k, vec![0.0, 1.0, 2.0, 3.0]);
    }

    fn mode(g: &TimeGrid, k: i64) -> Vec<C64> {
        g.points
            .iter()
            .map(|&t| {
                let ph = k as f64 * g.omega0() * t;
                C64::new(ph.cos(), ph.sin())
            })
            .collect()
    }

    fn apply(d: &DerivativeOperator, v: &[C64]) -> Vec<C64> {
        let n = v.len();
        (0..n)
            .map(|i| (0..n).map(|j| d.matrix[[i, j]] * v[j]).sum())
            .collect()
    }

    #[test]
    fn derivative_is_exact_on_representable_modes() {
        let g = grid(8);
        let d = derivative_operator(&g);
        for k in -4i64..4 {
            let v = mode(&g, k);
            let dv = apply(&d, &v);
            for (a, b) in dv.iter().zip(&v) {
                let expect = b * C64::new(k as f64 * g.omega0(), 0.0);
                assert!((a - expect).norm() < 1e-12, "mode k={k}");
            }
        }
    }

    #[test]
    fn nyquist_mode_self_aliases() {
        // Samples of e^{+i(N/2) w0 t} coincide with those of e^{-i(N/2) w0 t},
        // so the signed operator returns the negative-frequency eigenvalue.
        let g = grid(8);
        let d = derivative_operator(&g);
        let v = mode(&g, 4);
        let dv = apply(&d, &v);
        for (a, b) in dv.iter().zip(&v) {
            let expect = b * C64::new(-4.0 * g.omega0(), 0.0);
            assert!((a - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn unsigned_modes_up_to_n_minus_one() {
        let g = grid(4);
        let d = derivative_operator_with(&g, Convention::Unsigned);
        let v = mode(&g, 3);
        let dv = apply(&d, &v);
        for (a, b) in dv.iter().zip(&v) {
            let expect = b * C64::new(3.0 * g.omega0(), 0.0);
            assert!((a - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn derivative_annihilates_constants() {
        let g = grid(16);
        let d = derivative_operator(&g);
        let v = vec![C64::new(1.0, 0.0); 16];
        for a in apply(&d, &v) {
            assert!(a.norm() < 1e-13);
        }
    }

    #[test]
    fn signed_operator_is_hermitian_with_expected_trace() {
        let g = grid(16);
        let d = derivative_operator(&g);
        for i in 0..16 {
            for j in 0..16 {
                let diff = d.matrix[[i, j]] - d.matrix[[j, i]].conj();
                assert!(diff.norm() < 1e-12);
            }
        }
        let tr: C64 = (0..16).map(|i| d.matrix[[i, i]]).sum();
        let expect = -(g.omega0()) * 16.0 / 2.0;
        assert!((tr.re - expect).abs() < 1e-10);
        assert!(tr.im.abs() < 1e-12);
    }

    #[test]
    fn fast_and_direct_dft_agree() {
        for n in [7usize, 12, 16] {
            let x: Vec<C64> = (0..n)
                .map(|i| C64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
                .collect();
            let a = dft(&x);
            let b = dft_direct(&x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).norm() < 1e-12, "n={n}");
            }
        }
    }
}
