//! Banded direct factorizations and a preconditioned conjugate-gradient
//! fallback for the structured five-point systems.

use crate::error::{Error, Result};
use crate::real::Real;

/// General band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Row `r` stores columns `r - kl ..= r + kl + ku`; the extra `kl` columns
/// hold the fill produced by partial pivoting.
#[derive(Clone, Debug)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Real> BandMatrix<T> {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![T::zero(); n * width] }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku, "({r},{c}) outside band");
        r * self.width + (c + self.kl - r)
    }

    /// Adds `v` at `(r, c)`; the entry must lie inside the declared band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: T) {
        assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r},{c}) outside band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        if c + self.kl < r || c > r + self.ku {
            return T::zero();
        }
        self.data[self.slot(r, c)]
    }

    /// Replaces row `r` by the identity row.
    pub fn set_identity_row(&mut self, r: usize) {
        let lo = r.saturating_sub(self.kl);
        let hi = (r + self.ku).min(self.n - 1);
        for c in lo..=hi {
            let s = self.slot(r, c);
            self.data[s] = T::zero();
        }
        let s = self.slot(r, r);
        self.data[s] = T::one();
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| {
                let lo = r.saturating_sub(self.kl);
                let hi = (r + self.ku).min(self.n - 1);
                (lo..=hi).fold(T::zero(), |acc, c| acc + self.get(r, c) * x[c])
            })
            .collect()
    }

    /// Transposed copy (bandwidths swap).
    pub fn transpose(&self) -> Self {
        let mut t = BandMatrix::new(self.n, self.ku, self.kl);
        for r in 0..self.n {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            for c in lo..=hi {
                let v = self.get(r, c);
                if v != T::zero() {
                    t.add(c, r, v);
                }
            }
        }
        t
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu<T>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let mut piv = vec![0usize; n];
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.slot(i, i)].abs();
            for r in i + 1..=rmax {
                let v = self.data[self.slot(r, i)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == T::zero() || !best.is_finite() {
                return Err(Error::LinearSolver {
                    reason: format!("singular band matrix at pivot {i}"),
                    residual: f64::NAN,
                });
            }
            piv[i] = p;
            let cmax = (i + kl + ku).min(n - 1);
            if p != i {
                for c in i..=cmax {
                    let (a, b) = (self.slot(i, c), self.slot(p, c));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(i, i)];
            let len = cmax - i;
            for r in i + 1..=rmax {
                let s = self.slot(r, i);
                let l = self.data[s] / pivot;
                self.data[s] = l;
                if l == T::zero() {
                    continue;
                }
                let src = self.slot(i, i + 1);
                let dst = self.slot(r, i + 1);
                // Row r starts after row i in storage, so the slices do not overlap.
                let (head, tail) = self.data.split_at_mut(dst);
                let src_row = &head[src..src + len];
                for (d, &s) in tail[..len].iter_mut().zip(src_row) {
                    *d -= l * s;
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factored band matrix.
#[derive(Clone, Debug)]
pub struct BandLu<T> {
    m: BandMatrix<T>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.m.n;
        let (kl, ku) = (self.m.kl, self.m.ku);
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi != T::zero() {
                for r in i + 1..=(i + kl).min(n - 1) {
                    b[r] -= self.m.data[self.m.slot(r, i)] * bi;
                }
            }
        }
        for i in (0..n).rev() {
            let cmax = (i + kl + ku).min(n - 1);
            let row = self.m.slot(i, i);
            let mut s = b[i];
            for (k, c) in (i + 1..=cmax).enumerate() {
                s -= self.m.data[row + 1 + k] * b[c];
            }
            b[i] = s / self.m.data[row];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// Symmetric band matrix storing the lower band: row `r` holds columns `r - bw ..= r`.
#[derive(Clone, Debug)]
pub struct SymBandMatrix<T> {
    n: usize,
    bw: usize,
    data: Vec<T>,
}

impl<T: Real> SymBandMatrix<T> {
    pub fn new(n: usize, bw: usize) -> Self {
        SymBandMatrix { n, bw, data: vec![T::zero(); n * (bw + 1)] }
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        r * (self.bw + 1) + (c + self.bw - r)
    }

    /// Adds `v` at `(r, c)` with `c <= r` (lower triangle).
    #[inline]
    pub fn add_lower(&mut self, r: usize, c: usize, v: T) {
        assert!(c <= r && r - c <= self.bw, "entry ({r},{c}) outside lower band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    /// Cholesky factorization `A = L Lᵀ`; fails on a nonpositive pivot.
    pub fn factor(mut self) -> Result<BandCholesky<T>> {
        let (n, bw) = (self.n, self.bw);
        let stride = bw + 1;
        for i in 0..n {
            let jlo = i.saturating_sub(bw);
            for j in jlo..=i {
                let klo = jlo.max(j.saturating_sub(bw));
                let len = j - klo;
                let ri = self.slot(i, klo);
                let rj = j * stride + (klo + bw - j);
                let mut s = self.data[self.slot(i, j)];
                let dot: T = self.data[ri..ri + len]
                    .iter()
                    .zip(&self.data[rj..rj + len])
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                s -= dot;
                let sij = self.slot(i, j);
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return Err(Error::LinearSolver {
                            reason: format!("nonpositive pivot {} at row {i}", s.to_f64_lossy()),
                            residual: f64::NAN,
                        });
                    }
                    self.data[sij] = s.sqrt();
                } else {
                    let d = self.data[j * stride + bw];
                    self.data[sij] = s / d;
                }
            }
        }
        Ok(BandCholesky { l: self })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky<T> {
    l: SymBandMatrix<T>,
}

impl<T: Real> BandCholesky<T> {
    pub fn solve_in_place(&self, b: &mut [T]) {
        let (n, bw) = (self.l.n, self.l.bw);
        let stride = bw + 1;
        let d = &self.l.data;
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            let row = i * stride + (lo + bw - i);
            let mut s = b[i];
            for (k, c) in (lo..i).enumerate() {
                s -= d[row + k] * b[c];
            }
            b[i] = s / d[i * stride + bw];
        }
        for i in (0..n).rev() {
            let xi = b[i] / d[i * stride + bw];
            b[i] = xi;
            let lo = i.saturating_sub(bw);
            let row = i * stride + (lo + bw - i);
            for (k, c) in (lo..i).enumerate() {
                b[c] -= d[row + k] * xi;
            }
        }
    }
}

/// Symmetric five-point matrix on an `nx × ny` grid: diagonal plus east (`p, p+1`)
/// and north (`p, p+nx`) couplings.
#[derive(Clone, Debug)]
pub struct FivePoint<T> {
    pub nx: usize,
    pub ny: usize,
    pub diag: Vec<T>,
    pub east: Vec<T>,
    pub north: Vec<T>,
}

impl<T: Real> FivePoint<T> {
    pub fn zeros(nx: usize, ny: usize) -> Self {
        let n = nx * ny;
        FivePoint { nx, ny, diag: vec![T::zero(); n], east: vec![T::zero(); n], north: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        let nx = self.nx;
        let n = self.len();
        for p in 0..n {
            y[p] = self.diag[p] * x[p];
        }
        for p in 0..n {
            let e = self.east[p];
            if e != T::zero() {
                y[p] += e * x[p + 1];
                y[p + 1] += e * x[p];
            }
            let no = self.north[p];
            if no != T::zero() {
                y[p] += no * x[p + nx];
                y[p + nx] += no * x[p];
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn to_sym_band(&self) -> SymBandMatrix<T> {
        let nx = self.nx;
        let mut m = SymBandMatrix::new(self.len(), nx);
        for p in 0..self.len() {
            m.add_lower(p, p, self.diag[p]);
            if self.east[p] != T::zero() {
                m.add_lower(p + 1, p, self.east[p]);
            }
            if self.north[p] != T::zero() {
                m.add_lower(p + nx, p, self.north[p]);
            }
        }
        m
    }

    /// Incomplete Cholesky with zero fill on the five-point pattern.
    fn ic0(&self) -> Result<Ic0<T>> {
        let nx = self.nx;
        let n = self.len();
        let mut d = vec![T::zero(); n];
        let mut le = vec![T::zero(); n];
        let mut ln = vec![T::zero(); n];
        for p in 0..n {
            let mut s = self.diag[p];
            if p >= 1 {
                s -= le[p - 1] * le[p - 1];
            }
            if p >= nx {
                s -= ln[p - nx] * ln[p - nx];
            }
            if !(s > T::zero()) {
                return Err(Error::LinearSolver {
                    reason: format!("incomplete Cholesky breakdown at row {p}"),
                    residual: f64::NAN,
                });
            }
            d[p] = s.sqrt();
            le[p] = self.east[p] / d[p];
            ln[p] = self.north[p] / d[p];
        }
        Ok(Ic0 { nx, d, le, ln })
    }
}

struct Ic0<T> {
    nx: usize,
    d: Vec<T>,
    le: Vec<T>,
    ln: Vec<T>,
}

impl<T: Real> Ic0<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        let (nx, n) = (self.nx, self.d.len());
        for p in 0..n {
            let mut s = r[p];
            if p >= 1 {
                s -= self.le[p - 1] * z[p - 1];
            }
            if p >= nx {
                s -= self.ln[p - nx] * z[p - nx];
            }
            z[p] = s / self.d[p];
        }
        for p in (0..n).rev() {
            let mut s = z[p];
            if p + 1 < n {
                s -= self.le[p] * z[p + 1];
            }
            if p + nx < n {
                s -= self.ln[p] * z[p + nx];
            }
            z[p] = s / self.d[p];
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Conjugate gradients preconditioned with IC(0). Stops when
/// `‖b − Ax‖₂ ≤ tol · (1 + ‖b‖₂)`.
pub fn pcg_ic0<T: Real>(a: &FivePoint<T>, b: &[T], x0: Option<&[T]>, tol: T, max_iter: usize) -> Result<Vec<T>> {
    let n = a.len();
    let pre = a.ic0()?;
    let mut x = x0.map(<[T]>::to_vec).unwrap_or_else(|| vec![T::zero(); n]);
    let mut r = a.matvec(&x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let target = tol * (T::one() + dot(b, b).sqrt());
    let mut z = vec![T::zero(); n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut res = dot(&r, &r).sqrt();
    for _ in 0..max_iter {
        if res <= target {
            return Ok(x);
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        res = dot(&r, &r).sqrt();
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    if res <= target {
        return Ok(x);
    }
    Err(Error::LinearSolver { reason: format!("PCG did not converge in {max_iter} iterations"), residual: res.to_f64_lossy() })
}
