//! Banded matrices and their LU factorization with partial pivoting.
//!
//! Storage is row-wise: row `i` keeps columns `i - kl ..= i + ku`.
//! Factorization and solves cost O(n·kl·(kl+ku)), linear in the dimension.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result, Waypoints};

/// Relative pivot threshold below which a system is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Square matrix with `kl` sub-diagonals and `ku` super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    bands: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, bands: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.bands.iter_mut().for_each(|x| *x = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.bands[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Sets entry `(i, j)`. Panics when the position lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.bands[s] = v;
    }

    /// Adds to entry `(i, j)`. Panics when the position lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let s = self.slot(i, j);
        self.bands[s] += v;
    }

    /// Column range of row `i` that may hold nonzeros.
    pub fn row_span(&self, i: usize) -> core::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            self.row_span(i).all(|j| libm::fabs(self.get(i, j) - self.get(j, i)) <= tol)
        })
    }

    /// Dense row-major copy, mostly for tests and diagnostics.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.row_span(i) {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row_span(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// Product with every column of `x` (rows of `x` index the matrix dimension).
    pub fn mul_waypoints(&self, x: &Waypoints) -> Waypoints {
        let mut out = Waypoints::zeros(self.n, x.cols());
        for i in 0..self.n {
            for j in self.row_span(i) {
                let a = self.get(i, j);
                if a != 0.0 {
                    for c in 0..x.cols() {
                        out[(i, c)] += a * x[(j, c)];
                    }
                }
            }
        }
        out
    }

    /// Band product `self · other`.
    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.row_span(i) {
                let a = self.get(i, k);
                for j in other.row_span(k) {
                    out.add(i, j, a * other.get(k, j));
                }
            }
        }
        out
    }

    /// `self + s·other`, widening the band as needed.
    pub fn add_scaled(&self, s: f64, other: &BandMatrix) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut out = BandMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.row_span(i) {
                out.add(i, j, self.get(i, j));
            }
            for j in other.row_span(i) {
                out.add(i, j, s * other.get(i, j));
            }
        }
        out
    }

    fn max_abs(&self) -> f64 {
        self.bands.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
    }

    /// Factors the matrix once so several right-hand sides can share the work.
    pub fn factor(&self) -> Result<BandLu> {
        BandLu::new(self)
    }

    /// Solves `self · x = rhs` column by column.
    pub fn solve(&self, rhs: &Waypoints) -> Result<Waypoints> {
        self.factor()?.solve(rhs)
    }
}

/// LU factors of a band matrix, `P·M = L·U`.
///
/// Row interchanges widen the upper band to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    /// Upper bandwidth of `U`.
    ku: usize,
    /// Row `i` holds columns `i - kl ..= i + ku`; multipliers live below the diagonal.
    w: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn new(m: &BandMatrix) -> Result<Self> {
        let n = m.n;
        let kl = m.kl;
        let ku = m.kl + m.ku;
        let width = kl + ku + 1;
        let mut w = vec![0.0; n * width];
        for i in 0..n {
            for j in m.row_span(i) {
                w[i * width + (j + kl - i)] = m.get(i, j);
            }
        }
        let idx = |i: usize, j: usize| i * width + (j + kl - i);
        let threshold = PIVOT_TOLERANCE * m.max_abs();
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = libm::fabs(w[idx(k, k)]);
            for i in k + 1..=last {
                let v = libm::fabs(w[idx(i, k)]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(Error::SingularSystem { pivot_index: k });
            }
            piv[k] = p;
            let jend = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jend {
                    w.swap(idx(k, j), idx(p, j));
                }
            }
            let d = w[idx(k, k)];
            for i in k + 1..=last {
                let l = w[idx(i, k)] / d;
                w[idx(i, k)] = l;
                if l != 0.0 {
                    for j in k + 1..=jend {
                        w[idx(i, j)] -= l * w[idx(k, j)];
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, w, piv })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place for a single right-hand side.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let width = self.kl + self.ku + 1;
        let idx = |i: usize, j: usize| i * width + (j + self.kl - i);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                    x[i] -= self.w[idx(i, k)] * xk;
                }
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= self.w[idx(i, j)] * x[j];
            }
            x[i] = s / self.w[idx(i, i)];
        }
    }

    /// Solves for every column of `rhs`.
    pub fn solve(&self, rhs: &Waypoints) -> Result<Waypoints> {
        if rhs.rows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rhs.rows() });
        }
        let mut out = rhs.clone();
        let mut col = vec![0.0; self.n];
        for c in 0..rhs.cols() {
            for (i, v) in col.iter_mut().enumerate() {
                *v = rhs[(i, c)];
            }
            self.solve_in_place(&mut col);
            for (i, v) in col.iter().enumerate() {
                out[(i, c)] = *v;
            }
        }
        Ok(out)
    }
}
