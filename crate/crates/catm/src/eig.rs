//! Dense complex non-Hermitian eigensolver.
//!
//! The classical chain: Parlett-Reinsch balancing (scaling only), Householder
//! reduction to upper Hessenberg form, implicit single-shift QR with Wilkinson
//! shifts for the eigenvalues, then inverse iteration on the unreduced
//! Hessenberg matrix with back-transformation for the eigenvectors. Keeping
//! the Hessenberg form around makes one eigenvector an O(n^2) operation, so
//! callers that need only a few vectors out of a large spectrum (the usual
//! CATM situation) can ask for exactly those.
//!
//! Every vector is verified against the original input matrix; the relative
//! residual ships with the pair.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::{Error, Result};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Eigenvalue, unit-norm eigenvector, and the relative residual
/// ||A v - w v|| / ||A||_F measured against the original matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: C64,
    pub vector: Array1<C64>,
    pub residual: f64,
}

/// Cheap magnitude |re| + |im|, used for thresholds like LAPACK's cabs1.
#[inline]
fn cabs1(z: C64) -> f64 {
    z.re.abs() + z.im.abs()
}

fn check_input(a: &Array2<C64>) -> Result<usize> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::invalid(format!(
            "eigensolver needs a square non-empty matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(n)
}

/// Balanced and Hessenberg-reduced view of a matrix. Borrowing the original
/// keeps residual checks honest without a second dense copy.
pub struct Hessenberg<'a> {
    a: &'a Array2<C64>,
    n: usize,
    /// Balanced + reduced matrix, row-major. The part below the first
    /// subdiagonal stores the Householder vectors.
    work: Vec<C64>,
    taus: Vec<C64>,
    scale: Vec<f64>,
    norm_a: f64,
    hnorm: f64,
}

impl<'a> Hessenberg<'a> {
    pub fn new(a: &'a Array2<C64>) -> Result<Self> {
        let n = check_input(a)?;
        let mut work: Vec<C64> = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                work.push(a[[i, j]]);
            }
        }
        let norm_a = work.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let scale = balance(&mut work, n);
        let taus = reduce_to_hessenberg(&mut work, n);
        let mut hnorm = 0.0f64;
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                hnorm += work[i * n + j].norm_sqr();
            }
        }
        let hnorm = hnorm.sqrt();
        Ok(Hessenberg {
            a,
            n,
            work,
            taus,
            scale,
            norm_a,
            hnorm,
        })
    }

    /// Frobenius norm of the original matrix.
    pub fn norm(&self) -> f64 {
        self.norm_a
    }

    /// All eigenvalues by implicit single-shift QR, in deflation order.
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let n = self.n;
        // QR works on a clean copy: explicit zeros where `work` stores the
        // Householder vectors.
        let mut h = vec![ZERO; n * n];
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                h[i * n + j] = self.work[i * n + j];
            }
        }
        qr_eigenvalues(&mut h, n, self.hnorm)
    }

    /// Eigenvector for one eigenvalue by inverse iteration, back-transformed
    /// to the original basis, unit norm, with its relative residual. Repeated
    /// eigenvalues may map to linearly dependent vectors.
    pub fn eigenvector(&self, value: C64) -> Result<(Array1<C64>, f64)> {
        let mut ws = InvitWorkspace::new(self.n);
        self.eigenvector_with(value, &mut ws)
    }

    pub(crate) fn eigenvector_with(
        &self,
        value: C64,
        ws: &mut InvitWorkspace,
    ) -> Result<(Array1<C64>, f64)> {
        let delta = 1e-10 * self.hnorm.max(f64::MIN_POSITIVE);
        let shifts = [
            value,
            value + C64::new(delta, 0.0),
            value - C64::new(delta, 0.0),
            value + C64::new(0.0, delta),
        ];
        let mut best: Option<(Array1<C64>, f64)> = None;
        for &shift in &shifts {
            if let Some(v) = self.inverse_iteration(shift, ws) {
                let w = self.to_original_basis(&v);
                let res = self.relative_residual(&w, value);
                if res <= 1e-10 {
                    return Ok((w, res));
                }
                if best.as_ref().map_or(true, |(_, b)| res < *b) {
                    best = Some((w, res));
                }
            }
        }
        match best {
            Some((w, res)) if res <= 1e-8 => Ok((w, res)),
            _ => Err(Error::Convergence(format!(
                "inverse iteration failed for eigenvalue {value}"
            ))),
        }
    }

    /// One inverse-iteration run at a fixed shift on the Hessenberg form.
    /// Returns the (Hessenberg-basis) vector or None on numerical breakdown.
    fn inverse_iteration(&self, shift: C64, ws: &mut InvitWorkspace) -> Option<Vec<C64>> {
        let n = self.n;
        ws.factor(&self.work, n, shift, self.hnorm);
        let mut b = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
        for _ in 0..4 {
            let mut y = b.clone();
            ws.solve(&mut y);
            let nrm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !nrm.is_finite() || nrm == 0.0 {
                return None;
            }
            let inv = 1.0 / nrm;
            for z in &mut y {
                *z *= inv;
            }
            if y.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return None;
            }
            b = y;
            // Growth of 1/nrm per step: once the Hessenberg residual is at
            // roundoff there is nothing left to gain.
            if nrm.recip() <= 1e3 * f64::EPSILON * self.hnorm {
                break;
            }
        }
        Some(b)
    }

    /// Applies the stored Householder reflectors and the balancing to lift a
    /// Hessenberg-basis vector into the original basis; unit norm with a
    /// deterministic phase (largest component real positive).
    fn to_original_basis(&self, v: &[C64]) -> Array1<C64> {
        let n = self.n;
        let mut w = v.to_vec();
        if n > 2 {
            for k in (0..n - 2).rev() {
                let tau = self.taus[k];
                if tau == ZERO {
                    continue;
                }
                // Reflector vector: v[k+1] = 1, v[i] = work[i][k] for i >= k+2.
                let mut s = w[k + 1];
                for i in k + 2..n {
                    s += self.work[i * n + k].conj() * w[i];
                }
                s *= tau.conj();
                w[k + 1] -= s;
                for i in k + 2..n {
                    w[i] -= self.work[i * n + k] * s;
                }
            }
        }
        for (i, z) in w.iter_mut().enumerate() {
            *z *= self.scale[i];
        }
        let mut nrm = 0.0f64;
        let mut imax = 0;
        let mut amax = -1.0f64;
        for (i, z) in w.iter().enumerate() {
            let a = z.norm_sqr();
            nrm += a;
            if a > amax {
                amax = a;
                imax = i;
            }
        }
        let nrm = nrm.sqrt();
        let phase = if w[imax] == ZERO {
            ONE
        } else {
            w[imax].conj() / w[imax].norm()
        };
        let factor = phase / nrm;
        Array1::from_iter(w.into_iter().map(|z| z * factor))
    }

    fn relative_residual(&self, w: &Array1<C64>, value: C64) -> f64 {
        let r = self.a.dot(w) - w * value;
        let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        rn / self.norm_a.max(f64::MIN_POSITIVE)
    }
}

/// All eigenpairs, sorted by (Re, Im) ascending, every vector checked to a
/// relative residual of 1e-8 or better.
pub fn eig_dense(a: &Array2<C64>) -> Result<Vec<EigenPair>> {
    let n = check_input(a)?;
    if n == 1 {
        return Ok(vec![EigenPair {
            value: a[[0, 0]],
            vector: Array1::from_elem(1, ONE),
            residual: 0.0,
        }]);
    }
    let hess = Hessenberg::new(a)?;
    let mut values = hess.eigenvalues()?;
    values.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    let mut ws = InvitWorkspace::new(n);
    let mut out = Vec::with_capacity(n);
    for &value in &values {
        let (vector, residual) = hess.eigenvector_with(value, &mut ws)?;
        out.push(EigenPair {
            value,
            vector,
            residual,
        });
    }
    Ok(out)
}

/// Polishes a single eigenpair from a nearby guess: two fixed-shift inverse
/// iterations on the full matrix, then Rayleigh-quotient updates until the
/// relative residual drops below 1e-10. A shift that lands exactly on an
/// eigenvalue makes the solve singular; the shift is then perturbed by
/// 1e-10 ||A|| and the attempt repeated a bounded number of times.
pub fn refine_pair(a: &Array2<C64>, guess: C64) -> Result<EigenPair> {
    let n = check_input(a)?;
    if !guess.re.is_finite() || !guess.im.is_finite() {
        return Err(Error::invalid("eigenvalue guess is not finite"));
    }
    let norm_a = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let delta = 1e-10 * norm_a.max(f64::MIN_POSITIVE);
    let mut x = Array1::from_elem(n, C64::new(1.0 / (n as f64).sqrt(), 0.0));
    let mut mu = guess;
    let mut perturbations = 0usize;
    for it in 0..30 {
        let y = match solve_dense(a, mu, &x) {
            Some(y) => y,
            None => {
                perturbations += 1;
                if perturbations > 5 {
                    return Err(Error::Convergence(format!(
                        "singular shifts while refining near {guess}"
                    )));
                }
                mu += C64::new(delta, delta);
                continue;
            }
        };
        let nrm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !nrm.is_finite() || nrm == 0.0 {
            perturbations += 1;
            if perturbations > 5 {
                return Err(Error::Convergence(format!(
                    "breakdown while refining near {guess}"
                )));
            }
            mu += C64::new(delta, delta);
            continue;
        }
        x = y / C64::new(nrm, 0.0);
        let rayleigh = x.iter().zip(a.dot(&x).iter()).map(|(u, v)| u.conj() * v).sum::<C64>();
        let r = a.dot(&x) - &x * rayleigh;
        let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if rn <= 1e-10 * norm_a {
            return Ok(EigenPair {
                value: rayleigh,
                vector: x,
                residual: rn / norm_a.max(f64::MIN_POSITIVE),
            });
        }
        if it >= 1 {
            mu = rayleigh;
        }
    }
    Err(Error::Convergence(format!(
        "eigenpair refinement stalled near {guess}"
    )))
}

/// Dense LU solve of (A - mu I) y = b with partial pivoting; None when the
/// elimination hits an exactly zero pivot column.
fn solve_dense(a: &Array2<C64>, mu: C64, b: &Array1<C64>) -> Option<Array1<C64>> {
    let n = a.nrows();
    let mut m: Vec<C64> = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut v = a[[i, j]];
            if i == j {
                v -= mu;
            }
            m.push(v);
        }
    }
    let mut x: Vec<C64> = b.to_vec();
    for k in 0..n {
        let mut p = k;
        let mut pmax = m[k * n + k].norm_sqr();
        for i in k + 1..n {
            let v = m[i * n + k].norm_sqr();
            if v > pmax {
                pmax = v;
                p = i;
            }
        }
        if pmax == 0.0 {
            return None;
        }
        if p != k {
            for j in k..n {
                m.swap(k * n + j, p * n + j);
            }
            x.swap(k, p);
        }
        let piv = m[k * n + k];
        for i in k + 1..n {
            let f = m[i * n + k] / piv;
            if f == ZERO {
                continue;
            }
            for j in k + 1..n {
                let v = m[k * n + j];
                m[i * n + j] -= f * v;
            }
            let xk = x[k];
            x[i] -= f * xk;
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for j in i + 1..n {
            s -= m[i * n + j] * x[j];
        }
        x[i] = s / m[i * n + i];
    }
    Some(Array1::from_vec(x))
}

/// Parlett-Reinsch balancing restricted to diagonal similarity scaling with
/// radix-2 factors. Returns the scale vector d: the balanced matrix is
/// D^{-1} A D, and an eigenvector v of it lifts to D v.
fn balance(a: &mut [C64], n: usize) -> Vec<f64> {
    const RADIX: f64 = 2.0;
    let b2 = RADIX * RADIX;
    let mut scale = vec![1.0f64; n];
    for _ in 0..100 {
        let mut converged = true;
        for i in 0..n {
            let mut r = 0.0f64;
            let mut c = 0.0f64;
            for j in 0..n {
                if j != i {
                    c += cabs1(a[j * n + i]);
                    r += cabs1(a[i * n + j]);
                }
            }
            if r == 0.0 || c == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0f64;
            let mut c2 = c;
            while c2 < r / RADIX {
                f *= RADIX;
                c2 *= b2;
            }
            while c2 >= r * RADIX {
                f /= RADIX;
                c2 /= b2;
            }
            if (c2 + r) / f < 0.95 * s {
                converged = false;
                scale[i] *= f;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[i * n + j] *= inv;
                }
                for j in 0..n {
                    a[j * n + i] *= f;
                }
            }
        }
        if converged {
            break;
        }
    }
    scale
}

/// Householder reduction to upper Hessenberg form. The reflector vectors
/// (normalized so their first component is 1) are stored below the first
/// subdiagonal of `a`; the scalars tau are returned.
fn reduce_to_hessenberg(a: &mut [C64], n: usize) -> Vec<C64> {
    if n < 3 {
        return Vec::new();
    }
    let mut taus = vec![ZERO; n - 2];
    for k in 0..n - 2 {
        let alpha = a[(k + 1) * n + k];
        let xnorm_sqr: f64 = (k + 2..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if xnorm_sqr == 0.0 {
            taus[k] = ZERO;
            continue;
        }
        let norm = (alpha.norm_sqr() + xnorm_sqr).sqrt();
        let beta = if alpha.re >= 0.0 { -norm } else { norm };
        let tau = C64::new((beta - alpha.re) / beta, alpha.im / beta);
        let denom = alpha - beta;
        for i in k + 2..n {
            a[i * n + k] /= denom;
        }
        a[(k + 1) * n + k] = C64::new(beta, 0.0);
        taus[k] = tau;
        // Left: rows k+1..n of columns k+1..n get (I - tau v v^H) applied.
        for j in k + 1..n {
            let mut z = a[(k + 1) * n + j];
            for i in k + 2..n {
                z += a[i * n + k].conj() * a[i * n + j];
            }
            z *= tau;
            a[(k + 1) * n + j] -= z;
            for i in k + 2..n {
                let vi = a[i * n + k];
                a[i * n + j] -= vi * z;
            }
        }
        // Right: all rows, columns k+1..n get (I - conj(tau) v v^H) applied.
        let tauc = tau.conj();
        for i in 0..n {
            let mut w = a[i * n + k + 1];
            for j in k + 2..n {
                w += a[i * n + j] * a[j * n + k];
            }
            w *= tauc;
            a[i * n + k + 1] -= w;
            for j in k + 2..n {
                let vj = a[j * n + k].conj();
                a[i * n + j] -= w * vj;
            }
        }
    }
    taus
}

/// Both eigenvalues of [[a, b], [c, d]]; the second is computed from the
/// determinant when possible to dodge cancellation.
fn eig2(a: C64, b: C64, c: C64, d: C64) -> (C64, C64) {
    let m = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (m * m - det).sqrt();
    let l1 = if cabs1(m + disc) >= cabs1(m - disc) {
        m + disc
    } else {
        m - disc
    };
    let l2 = if l1 == ZERO { ZERO } else { det / l1 };
    (l1, l2)
}

/// Wilkinson shift: the eigenvalue of the trailing 2x2 closest to d.
fn wilkinson(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let (l1, l2) = eig2(a, b, c, d);
    if cabs1(l1 - d) <= cabs1(l2 - d) {
        l1
    } else {
        l2
    }
}

/// Complex Givens rotation: returns (c, s) with c real so that
/// [[c, s], [-conj(s), c]] [f; g] = [r; 0].
fn zrotg(f: C64, g: C64) -> (f64, C64) {
    if g == ZERO {
        return (1.0, ZERO);
    }
    if f == ZERO {
        return (0.0, g.conj() / g.norm());
    }
    let d = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = f.norm() / d;
    let s = (f / f.norm()) * (g.conj() / d);
    (c, s)
}

/// Implicit single-shift QR on an explicit upper Hessenberg matrix (zeros
/// below the subdiagonal). Eigenvalue-only: updates stay inside the active
/// window. Errors after a global budget of 30 n sweeps.
fn qr_eigenvalues(h: &mut [C64], n: usize, hnorm: f64) -> Result<Vec<C64>> {
    let eps = f64::EPSILON;
    let mut eigs = vec![ZERO; n];
    if n == 1 {
        eigs[0] = h[0];
        return Ok(eigs);
    }
    let budget = 30 * n;
    let mut sweeps = 0usize;
    let mut hi = n - 1;
    let mut its_since = 0usize;
    loop {
        // Find the active window [lo, hi]: split at the lowest negligible
        // subdiagonal at or below hi.
        let mut lo = 0;
        let mut i = hi;
        while i > 0 {
            let sub = cabs1(h[i * n + i - 1]);
            let s = cabs1(h[(i - 1) * n + i - 1]) + cabs1(h[i * n + i]);
            let thresh = if s > 0.0 { eps * s } else { eps * hnorm };
            if sub <= thresh {
                h[i * n + i - 1] = ZERO;
                lo = i;
                break;
            }
            i -= 1;
        }
        if lo == hi {
            eigs[hi] = h[hi * n + hi];
            if hi == 0 {
                break;
            }
            hi -= 1;
            its_since = 0;
            continue;
        }
        if lo + 1 == hi {
            let (l1, l2) = eig2(
                h[lo * n + lo],
                h[lo * n + hi],
                h[hi * n + lo],
                h[hi * n + hi],
            );
            eigs[hi] = l1;
            eigs[lo] = l2;
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            its_since = 0;
            continue;
        }
        sweeps += 1;
        its_since += 1;
        if sweeps > budget {
            return Err(Error::Convergence(format!(
                "QR iteration stuck at index {hi} after {budget} sweeps"
            )));
        }
        let sigma = if its_since % 10 == 0 {
            // Exceptional shift to break symmetry-induced cycling.
            h[hi * n + hi] + 0.75 * cabs1(h[hi * n + hi - 1])
        } else {
            wilkinson(
                h[(hi - 1) * n + hi - 1],
                h[(hi - 1) * n + hi],
                h[hi * n + hi - 1],
                h[hi * n + hi],
            )
        };
        let mut x = h[lo * n + lo] - sigma;
        let mut y = h[(lo + 1) * n + lo];
        for k in lo..hi {
            let (c, s) = zrotg(x, y);
            let jstart = if k == lo { lo } else { k - 1 };
            // Row pair k, k+1 from the left.
            for j in jstart..=hi {
                let u = h[k * n + j];
                let v = h[(k + 1) * n + j];
                h[k * n + j] = u * c + v * s;
                h[(k + 1) * n + j] = -u * s.conj() + v * c;
            }
            // Column pair k, k+1 from the right.
            let iend = (k + 2).min(hi);
            for i2 in lo..=iend {
                let u = h[i2 * n + k];
                let v = h[i2 * n + k + 1];
                h[i2 * n + k] = u * c + v * s.conj();
                h[i2 * n + k + 1] = -u * s + v * c;
            }
            if k + 1 < hi {
                x = h[(k + 1) * n + k];
                y = h[(k + 2) * n + k];
            }
        }
    }
    Ok(eigs)
}

/// Reusable buffers for Hessenberg inverse iteration: the shifted LU factors
/// and pivot bookkeeping.
pub(crate) struct InvitWorkspace {
    lu: Vec<C64>,
    mult: Vec<C64>,
    swapped: Vec<bool>,
}

impl InvitWorkspace {
    pub(crate) fn new(n: usize) -> Self {
        InvitWorkspace {
            lu: vec![ZERO; n * n],
            mult: vec![ZERO; n.saturating_sub(1)],
            swapped: vec![false; n.saturating_sub(1)],
        }
    }

    /// LU of (H - shift I) with pivoting between adjacent rows only, the
    /// textbook Hessenberg elimination. Zero pivots are replaced by a tiny
    /// multiple of the matrix norm so the subsequent solve blows up in the
    /// eigenvector direction instead of failing.
    fn factor(&mut self, work: &[C64], n: usize, shift: C64, hnorm: f64) {
        let lu = &mut self.lu;
        lu.iter_mut().for_each(|z| *z = ZERO);
        for i in 0..n {
            for j in i.saturating_sub(1)..n {
                lu[i * n + j] = work[i * n + j];
            }
            lu[i * n + i] -= shift;
        }
        let tiny = f64::EPSILON * (hnorm + shift.norm()).max(f64::MIN_POSITIVE);
        for k in 0..n - 1 {
            if lu[(k + 1) * n + k].norm_sqr() > lu[k * n + k].norm_sqr() {
                for j in k..n {
                    lu.swap(k * n + j, (k + 1) * n + j);
                }
                self.swapped[k] = true;
            } else {
                self.swapped[k] = false;
            }
            if lu[k * n + k] == ZERO {
                lu[k * n + k] = C64::new(tiny, 0.0);
            }
            let m = lu[(k + 1) * n + k] / lu[k * n + k];
            self.mult[k] = m;
            lu[(k + 1) * n + k] = ZERO;
            if m != ZERO {
                for j in k + 1..n {
                    let v = lu[k * n + j];
                    lu[(k + 1) * n + j] -= m * v;
                }
            }
        }
        if lu[(n - 1) * n + n - 1] == ZERO {
            lu[(n - 1) * n + n - 1] = C64::new(tiny, 0.0);
        }
    }

    fn solve(&self, b: &mut [C64]) {
        let n = b.len();
        for k in 0..n - 1 {
            if self.swapped[k] {
                b.swap(k, k + 1);
            }
            let m = self.mult[k];
            if m != ZERO {
                let v = b[k];
                b[k + 1] -= m * v;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * b[j];
            }
            b[i] = s / self.lu[i * n + i];
        }
    }
}
