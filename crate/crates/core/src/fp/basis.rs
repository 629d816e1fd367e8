//! Spherical-harmonic Galerkin operators for the Néel Fokker-Planck equation.
//!
//! Operators are first built on complex harmonics `Y_ℓm` (Condon–Shortley
//! phase) from the ladder algebra of angular momentum and the exact
//! multiplication rule for `cos θ`, then transformed to real harmonics
//! `S_ℓ0 = Y_ℓ0`, `S_ℓμ ∝ P_ℓ^μ cos μφ`, `S_ℓ,-μ ∝ P_ℓ^μ sin μφ`.
//! Real unknowns are ordered by |m| first so that every operator is banded.

use num_complex::Complex64 as C64;

use super::banded::BandMatrix;
use crate::error::{Error, Result};

const I: C64 = C64 { re: 0.0, im: 1.0 };

#[inline]
fn cidx(l: usize, m: i64) -> usize {
    ((l * (l + 1)) as i64 + m) as usize
}

fn csize(l: usize) -> usize {
    (l + 1) * (l + 1)
}

/// Row-wise sparse complex matrix.
#[derive(Debug, Clone)]
pub(crate) struct Sparse {
    n: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl Sparse {
    fn zeros(n: usize) -> Self {
        Self {
            n,
            rows: vec![Vec::new(); n],
        }
    }

    fn identity(n: usize) -> Self {
        let mut s = Self::zeros(n);
        for i in 0..n {
            s.rows[i].push((i, C64::new(1.0, 0.0)));
        }
        s
    }

    fn push(&mut self, i: usize, j: usize, v: C64) {
        if i < self.n && j < self.n && v != C64::new(0.0, 0.0) {
            self.rows[i].push((j, v));
        }
    }

    fn from_dense_rows(n: usize, f: impl Fn(usize, &mut Vec<C64>)) -> Self {
        let mut out = Self::zeros(n);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            f(i, &mut buf);
            for (j, v) in buf.iter().enumerate() {
                if v.norm() > 0.0 {
                    out.rows[i].push((j, *v));
                }
            }
        }
        out
    }

    fn mul(&self, other: &Sparse) -> Sparse {
        Sparse::from_dense_rows(self.n, |i, buf| {
            for &(k, a) in &self.rows[i] {
                for &(j, b) in &other.rows[k] {
                    buf[j] += a * b;
                }
            }
        })
    }

    /// alpha * self + beta * other
    fn lin(&self, alpha: C64, other: &Sparse, beta: C64) -> Sparse {
        Sparse::from_dense_rows(self.n, |i, buf| {
            for &(j, a) in &self.rows[i] {
                buf[j] += alpha * a;
            }
            for &(j, b) in &other.rows[i] {
                buf[j] += beta * b;
            }
        })
    }

    fn scale(&self, alpha: C64) -> Sparse {
        let mut s = self.clone();
        s.rows.iter_mut().flatten().for_each(|(_, v)| *v *= alpha);
        s
    }

    fn commutator(&self, other: &Sparse) -> Sparse {
        self.mul(other)
            .lin(C64::new(1.0, 0.0), &other.mul(self), C64::new(-1.0, 0.0))
    }

    /// Leading `n × n` block.
    fn truncate(&self, n: usize) -> Sparse {
        let mut s = Sparse::zeros(n);
        for i in 0..n {
            s.rows[i] = self.rows[i]
                .iter()
                .copied()
                .filter(|(j, _)| *j < n)
                .collect();
        }
        s
    }

    #[cfg(test)]
    fn get(&self, i: usize, j: usize) -> C64 {
        self.rows[i]
            .iter()
            .filter(|(k, _)| *k == j)
            .map(|(_, v)| *v)
            .sum()
    }
}

/// Multiplication by cos θ on harmonics up to degree `l`.
fn cos_theta(l: usize) -> Sparse {
    let mut s = Sparse::zeros(csize(l));
    for ell in 0..=l {
        for m in -(ell as i64)..=(ell as i64) {
            let lf = ell as f64;
            let mf = m as f64;
            let a = (((lf + 1.0).powi(2) - mf * mf) / ((2.0 * lf + 1.0) * (2.0 * lf + 3.0))).sqrt();
            if ell < l {
                s.push(cidx(ell + 1, m), cidx(ell, m), C64::new(a, 0.0));
                s.push(cidx(ell, m), cidx(ell + 1, m), C64::new(a, 0.0));
            }
        }
    }
    s
}

/// Angular momentum operators (L_x, L_y, L_z) with L = −i m × ∇.
fn angular_momentum(l: usize) -> [Sparse; 3] {
    let n = csize(l);
    let mut lp = Sparse::zeros(n);
    let mut lm = Sparse::zeros(n);
    let mut lz = Sparse::zeros(n);
    for ell in 0..=l {
        let lf = ell as f64;
        for m in -(ell as i64)..=(ell as i64) {
            let mf = m as f64;
            lz.push(cidx(ell, m), cidx(ell, m), C64::new(mf, 0.0));
            if m < ell as i64 {
                let c = (lf * (lf + 1.0) - mf * (mf + 1.0)).sqrt();
                lp.push(cidx(ell, m + 1), cidx(ell, m), C64::new(c, 0.0));
            }
            if m > -(ell as i64) {
                let c = (lf * (lf + 1.0) - mf * (mf - 1.0)).sqrt();
                lm.push(cidx(ell, m - 1), cidx(ell, m), C64::new(c, 0.0));
            }
        }
    }
    let lx = lp.lin(C64::new(0.5, 0.0), &lm, C64::new(0.5, 0.0));
    let ly = lp.lin(C64::new(0.0, -0.5), &lm, C64::new(0.0, 0.5));
    [lx, ly, lz]
}

/// Diagonal of the Laplace–Beltrami operator, −ℓ(ℓ+1).
fn laplacian(l: usize) -> Vec<f64> {
    let mut d = Vec::with_capacity(csize(l));
    for ell in 0..=l {
        for _ in 0..(2 * ell + 1) {
            d.push(-((ell * (ell + 1)) as f64));
        }
    }
    d
}

/// `Λ X − X Λ` for diagonal Λ.
fn diag_commutator(lam: &[f64], x: &Sparse) -> Sparse {
    let mut s = x.clone();
    for (i, row) in s.rows.iter_mut().enumerate() {
        for (j, v) in row.iter_mut() {
            *v *= lam[i] - lam[*j];
        }
    }
    s
}

/// Multiplication operators by the moment components, in the complex basis.
pub(crate) struct ComplexOps {
    pub l: usize,
    pub m: [Sparse; 3],
    pub j: [Sparse; 3],
    pub g: Sparse,
    pub lam: Vec<f64>,
}

impl ComplexOps {
    pub fn new(l: usize) -> Self {
        let n = csize(l);
        let mz_ext = cos_theta(l + 1);
        let g = mz_ext.mul(&mz_ext).truncate(n);
        let mz = mz_ext.truncate(n);
        let [lx, ly, lz] = angular_momentum(l);
        let mx = ly.commutator(&mz).scale(-I);
        let my = lx.commutator(&mz).scale(I);
        let j = [lx.scale(I), ly.scale(I), lz.scale(I)];
        Self {
            l,
            m: [mx, my, mz],
            j,
            g,
            lam: laplacian(l),
        }
    }
}

/// Physical rates entering the semidiscrete operator (see `NeelCoefficients`).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    pub inv_two_tau: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
}

/// Complex operators `A0` and `A_c` with `dc/dt = (A0 + Σ h_c A_c) c`, in the
/// frame whose third axis is the easy axis.
pub(crate) fn complex_operators(ops: &ComplexOps, r: &Rates) -> (Sparse, [Sparse; 3]) {
    let n = csize(ops.l);
    let one = C64::new(1.0, 0.0);
    let lam = &ops.lam;
    let mut diff = Sparse::zeros(n);
    for (i, v) in lam.iter().enumerate() {
        diff.push(i, i, C64::new(r.inv_two_tau * v, 0.0));
    }
    // anisotropy alignment: ¼[ΛG − GΛ] + ½(I − 3G)
    let aniso = diag_commutator(lam, &ops.g)
        .lin(one, &Sparse::identity(n), C64::new(2.0, 0.0))
        .lin(one, &ops.g, C64::new(-6.0, 0.0));
    // anisotropy precession: (n·m) J_n
    let prec = ops.m[2].mul(&ops.j[2]);
    let a0 = diff.lin(one, &aniso, C64::new(-0.25 * r.alpha4, 0.0)).lin(
        one,
        &prec,
        C64::new(-r.alpha3, 0.0),
    );
    let field = |c: usize| {
        let align = diag_commutator(lam, &ops.m[c]).lin(one, &ops.m[c], C64::new(-2.0, 0.0));
        align.lin(
            C64::new(-0.5 * r.alpha2, 0.0),
            &ops.j[c],
            C64::new(-r.alpha1, 0.0),
        )
    };
    (a0, [field(0), field(1), field(2)])
}

/// Ordering of real harmonics: |m| blocks, cosine/sine interleaved.
#[derive(Debug, Clone)]
pub struct RealLayout {
    pub l: usize,
    /// (degree, signed order) per unknown; positive order is cosine, negative sine.
    pub entries: Vec<(usize, i64)>,
}

impl RealLayout {
    pub fn new(l: usize) -> Self {
        let mut entries = Vec::with_capacity(csize(l));
        for ell in 0..=l {
            entries.push((ell, 0));
        }
        for mu in 1..=l as i64 {
            for ell in mu as usize..=l {
                entries.push((ell, mu));
                entries.push((ell, -mu));
            }
        }
        Self { l, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn position(&self, ell: usize, s: i64) -> usize {
        self.entries
            .iter()
            .position(|&e| e == (ell, s))
            .expect("harmonic present in layout")
    }

    /// Number of leading unknowns forming the axisymmetric (m = 0) block.
    pub fn axisymmetric_len(&self) -> usize {
        self.l + 1
    }

    /// Rows of U with S = U Y, as (complex index, coefficient).
    fn transform_row(&self, r: usize) -> Vec<(usize, C64)> {
        let (ell, s) = self.entries[r];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        if s == 0 {
            return vec![(cidx(ell, 0), C64::new(1.0, 0.0))];
        }
        let mu = s.abs();
        let sign = if mu % 2 == 0 { 1.0 } else { -1.0 };
        if s > 0 {
            vec![
                (cidx(ell, mu), C64::new(sign * h, 0.0)),
                (cidx(ell, -mu), C64::new(h, 0.0)),
            ]
        } else {
            vec![
                (cidx(ell, mu), C64::new(0.0, -sign * h)),
                (cidx(ell, -mu), C64::new(0.0, h)),
            ]
        }
    }

    /// `conj(U) A Uᵀ` as a dense-row real sparse list; errors if the imaginary
    /// part does not vanish.
    pub(crate) fn to_real(&self, a: &Sparse) -> Result<Vec<Vec<(usize, f64)>>> {
        let n = self.len();
        // complex index → (real index, U entry)
        let mut inv: Vec<Vec<(usize, C64)>> = vec![Vec::new(); csize(self.l)];
        let rows: Vec<_> = (0..n).map(|r| self.transform_row(r)).collect();
        for (r, row) in rows.iter().enumerate() {
            for &(q, u) in row {
                inv[q].push((r, u));
            }
        }
        let mut out = Vec::with_capacity(n);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        let mut scale: f64 = 0.0;
        let mut worst_im: f64 = 0.0;
        for row in &rows {
            buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            for &(p, u) in row {
                for &(q, v) in &a.rows[p] {
                    for &(s, w) in &inv[q] {
                        buf[s] += u.conj() * v * w;
                    }
                }
            }
            let mut entries = Vec::new();
            for (s, v) in buf.iter().enumerate() {
                scale = scale.max(v.re.abs());
                worst_im = worst_im.max(v.im.abs());
                if v.re != 0.0 {
                    entries.push((s, v.re));
                }
            }
            out.push(entries);
        }
        if worst_im > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::numerical(format!(
                "real-basis operator has imaginary residue {worst_im:.3e} (scale {scale:.3e})"
            )));
        }
        Ok(out)
    }
}

/// Band widths (kl, ku) of a set of real sparse operators restricted to the
/// first `n` unknowns.
pub(crate) fn bandwidths(ops: &[&Vec<Vec<(usize, f64)>>], n: usize) -> (usize, usize) {
    let (mut kl, mut ku) = (0, 0);
    for op in ops {
        for (i, row) in op.iter().enumerate().take(n) {
            for &(j, _) in row {
                if j < n {
                    if j < i {
                        kl = kl.max(i - j);
                    } else {
                        ku = ku.max(j - i);
                    }
                }
            }
        }
    }
    (kl, ku)
}

pub(crate) fn to_band(op: &[Vec<(usize, f64)>], n: usize, kl: usize, ku: usize) -> BandMatrix {
    let mut b = BandMatrix::zeros(n, kl, ku);
    for (i, row) in op.iter().enumerate().take(n) {
        for &(j, v) in row {
            if j < n {
                b.add(i, j, v);
            }
        }
    }
    b
}

/// Real orthonormal harmonics at (cos θ = u, φ) in layout order.
pub fn real_harmonics(layout: &RealLayout, u: f64, phi: f64, out: &mut [f64]) {
    let l = layout.l;
    let s = (1.0 - u * u).max(0.0).sqrt();
    // q[m][ℓ] = N_ℓm P_ℓ^m(u) without Condon–Shortley phase
    let mut q = vec![vec![0.0; l + 1]; l + 1];
    let mut qmm = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
    for m in 0..=l {
        if m > 0 {
            let mf = m as f64;
            qmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        q[m][m] = qmm;
        if m < l {
            q[m][m + 1] = (2.0 * m as f64 + 3.0).sqrt() * u * qmm;
        }
        for ell in m + 2..=l {
            let (lf, mf) = (ell as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            q[m][ell] = a * (u * q[m][ell - 1] - b * q[m][ell - 2]);
        }
    }
    let r2 = std::f64::consts::SQRT_2;
    for (k, &(ell, sgn)) in layout.entries.iter().enumerate() {
        let mu = sgn.unsigned_abs() as usize;
        out[k] = if sgn == 0 {
            q[0][ell]
        } else if sgn > 0 {
            r2 * q[mu][ell] * (mu as f64 * phi).cos()
        } else {
            r2 * q[mu][ell] * (mu as f64 * phi).sin()
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre;

    #[test]
    fn real_harmonics_are_orthonormal() {
        let layout = RealLayout::new(6);
        let n = layout.len();
        let (u, w) = gauss_legendre(16);
        let nphi = 32;
        let mut gram = vec![vec![0.0; n]; n];
        let mut y = vec![0.0; n];
        for (ui, wi) in u.iter().zip(&w) {
            for j in 0..nphi {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
                real_harmonics(&layout, *ui, phi, &mut y);
                let wt = wi * 2.0 * std::f64::consts::PI / nphi as f64;
                for a in 0..n {
                    for b in 0..n {
                        gram[a][b] += wt * y[a] * y[b];
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let e = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a][b] - e).abs() < 1e-12, "{a} {b} {}", gram[a][b]);
            }
        }
    }

    /// Multiplication operators must reproduce pointwise products of the
    /// real harmonics (checked by quadrature projection).
    #[test]
    fn multiplication_operators_match_quadrature() {
        let l = 5;
        let ops = ComplexOps::new(l);
        let layout = RealLayout::new(l);
        let n = layout.len();
        let (u, w) = gauss_legendre(24);
        let nphi = 48;
        let mut y = vec![0.0; n];
        let mut proj = vec![vec![vec![0.0; n]; n]; 3];
        for (ui, wi) in u.iter().zip(&w) {
            for j in 0..nphi {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / nphi as f64;
                real_harmonics(&layout, *ui, phi, &mut y);
                let s = (1.0 - ui * ui).sqrt();
                let m = [s * phi.cos(), s * phi.sin(), *ui];
                let wt = wi * 2.0 * std::f64::consts::PI / nphi as f64;
                for c in 0..3 {
                    for a in 0..n {
                        for b in 0..n {
                            proj[c][a][b] += wt * y[a] * m[c] * y[b];
                        }
                    }
                }
            }
        }
        for c in 0..3 {
            let real = layout.to_real(&ops.m[c]).unwrap();
            for a in 0..n {
                for b in 0..n {
                    let v: f64 = real[a]
                        .iter()
                        .filter(|(j, _)| *j == b)
                        .map(|(_, v)| *v)
                        .sum();
                    assert!((v - proj[c][a][b]).abs() < 1e-12, "c={c} a={a} b={b}");
                }
            }
        }
    }

    /// J_z = ∂_φ: differentiating cos μφ gives −μ sin μφ.
    #[test]
    fn rotation_generator_z() {
        let l = 4;
        let ops = ComplexOps::new(l);
        let layout = RealLayout::new(l);
        let jz = layout.to_real(&ops.j[2]).unwrap();
        let c = layout.position(3, 2);
        let s = layout.position(3, -2);
        // d/dφ S_c = −2 S_s, so column c of J_z has entry −2 in row s
        let v: f64 = jz[s].iter().filter(|(j, _)| *j == c).map(|(_, v)| *v).sum();
        assert!((v + 2.0).abs() < 1e-14);
        assert!(ops.g.get(0, 0).re > 0.333 && ops.g.get(0, 0).re < 0.334);
    }
}
