//! Real band matrices with an LU factorization using partial pivoting.

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals. Each row keeps
/// `kl` additional slots on the right for pivoting fill-in.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` to entry (i, j), which must lie inside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(self.in_band(i, j), "({i},{j}) outside band");
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    /// `self = alpha * self + beta * other` over the stored band (same shape).
    pub fn axpby(&mut self, alpha: f64, beta: f64, other: &BandMatrix) {
        debug_assert_eq!((self.n, self.kl, self.ku), (other.n, other.kl, other.ku));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = alpha * *a + beta * b;
        }
    }

    /// `self = alpha * self + d * I`.
    pub fn scale_shift(&mut self, alpha: f64, d: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
        for i in 0..self.n {
            let s = self.slot(i, i);
            self.data[s] += d;
        }
    }

    pub fn fill_from(&mut self, other: &BandMatrix) {
        self.data.copy_from_slice(&other.data);
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let base = i * self.width + self.kl - i;
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[base + j] * x[j];
            }
            y[i] = s;
        }
    }

    /// y += alpha A x.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let base = i * self.width + self.kl - i;
            let mut s = 0.0;
            for j in lo..=hi {
                s += self.data[base + j] * x[j];
            }
            y[i] += alpha * s;
        }
    }

    /// In-place LU factorization with partial pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        let mut piv = vec![0usize; n];
        let uw = ku + kl;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::numerical(format!(
                    "singular band matrix at pivot {k}"
                )));
            }
            piv[k] = p;
            let jend = (k + uw).min(n - 1);
            if p != k {
                for j in k..=jend {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last {
                let sik = self.slot(i, k);
                let l = self.data[sik] / pivot;
                self.data[sik] = l;
                if l != 0.0 {
                    let rk = k * w + kl - k;
                    let ri = i * w + kl - i;
                    let (top, bottom) = self.data.split_at_mut(ri + k + 1);
                    let src = &top[rk + k + 1..=rk + jend];
                    let dst = &mut bottom[..jend - k];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d -= l * s;
                    }
                }
            }
        }
        Ok(BandLu { m: self, piv })
    }
}

/// Factorized band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    piv: Vec<usize>,
}

impl BandLu {
    /// Solves A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        let m = &self.m;
        let (n, kl, ku, w) = (m.n, m.kl, m.ku, m.width);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    b[i] -= m.data[i * w + k + kl - i] * bk;
                }
            }
        }
        let uw = ku + kl;
        for k in (0..n).rev() {
            let row = k * w + kl - k;
            let mut s = b[k];
            for j in k + 1..=(k + uw).min(n - 1) {
                s -= m.data[row + j] * b[j];
            }
            b[k] = s / m.data[row + k];
        }
    }
}
