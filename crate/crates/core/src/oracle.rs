//! Brute-force reference values: adaptive quadrature of the one-dimensional
//! integral representations of the partition function and its derivatives,
//! and direct product quadrature of the moment integral over the sphere.
//!
//! Nothing here is used by the production model evaluation.

use crate::error::{Error, Result};
use crate::physics::ParticleParams;
use crate::quadrature::{gauss_legendre, integrate};
use crate::series::SeriesParams;
use crate::vec3::{self, Vec3};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;
const SUBINTERVAL_BUDGET: usize = 10_000;

/// `e^{-y} I_ν(y)` by its Hankel asymptotic expansion (large y).
fn scaled_bessel_asymptotic(nu: f64, y: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * y);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum / (2.0 * std::f64::consts::PI * y).sqrt()
}

/// `e^{-y} I₀(y)` for y ≥ 0.
pub fn scaled_i0(y: f64) -> f64 {
    if y > 40.0 {
        return scaled_bessel_asymptotic(0.0, y);
    }
    let q = 0.25 * y * y;
    let (mut term, mut sum) = (1.0, 1.0);
    for k in 1..500 {
        term *= q / (k as f64 * k as f64);
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum * (-y).exp()
}

/// `e^{-y} I₁(y) / y` for y ≥ 0 (equal to ½ at y = 0).
pub fn scaled_i1_over_y(y: f64) -> f64 {
    if y > 40.0 {
        return scaled_bessel_asymptotic(1.0, y) / y;
    }
    let q = 0.25 * y * y;
    let (mut term, mut sum) = (0.5, 0.5);
    for k in 1..500 {
        term *= q / (k as f64 * (k as f64 + 1.0));
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    sum * (-y).exp()
}

/// Quadrature values of Z, z₃ and z_i/(βH̃_i); the true values are the fields
/// multiplied by `e^{scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValues {
    pub scale: f64,
    pub z: f64,
    pub z3: f64,
    pub z_perp: f64,
}

impl OracleValues {
    pub fn ln_z(&self) -> f64 {
        self.z.ln() + self.scale
    }
}

/// Integrates the three one-dimensional representations over [0, 1].
pub fn oracle_zz(p: SeriesParams, abs_tol: f64) -> Result<OracleValues> {
    p.validate()?;
    if !(abs_tol > 0.0) {
        return Err(Error::invalid("abs_tol must be positive"));
    }
    let SeriesParams { a, b, c } = p;
    let ab = b.abs();
    let sb = b.signum();
    // e^{-(a+|b|+c)} times the common factors, split to stay bounded
    let radial = move |x: f64| {
        let s = (1.0 - x * x).max(0.0).sqrt();
        let e_a = (-a * (1.0 - s)).exp();
        let e_c = (c * (x * x - 1.0)).exp();
        let ep = (-ab * (1.0 - x)).exp();
        let em = (-ab * (1.0 + x)).exp();
        (s, e_a * e_c, 0.5 * (ep + em), 0.5 * (ep - em))
    };
    let rel = 1e-13;
    let z = integrate(
        |x| {
            let (s, w, ch, _) = radial(x);
            scaled_i0(a * s) * w * ch
        },
        0.0,
        1.0,
        abs_tol,
        rel,
        SUBINTERVAL_BUDGET,
    )?;
    let z3 = integrate(
        |x| {
            let (s, w, _, sh) = radial(x);
            x * scaled_i0(a * s) * w * sh * sb
        },
        0.0,
        1.0,
        abs_tol,
        rel,
        SUBINTERVAL_BUDGET,
    )?;
    let zp = integrate(
        |x| {
            let (s, w, ch, _) = radial(x);
            s * s * scaled_i1_over_y(a * s) * w * ch
        },
        0.0,
        1.0,
        abs_tol,
        rel,
        SUBINTERVAL_BUDGET,
    )?;
    Ok(OracleValues {
        scale: a + ab + c,
        z: FOUR_PI * z.value,
        z3: FOUR_PI * z3.value,
        z_perp: FOUR_PI * zp.value,
    })
}

/// Relative deviations of the series from the quadrature oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCheck {
    pub params: SeriesParams,
    pub err_z: f64,
    pub err_z3: f64,
    pub err_z_perp: f64,
    pub terms_used: usize,
}

impl SeriesCheck {
    pub fn max_err(&self) -> f64 {
        self.err_z.max(self.err_z3).max(self.err_z_perp)
    }
}

/// Evaluates the series at `p` and compares Z, z₃ and z_⊥ with the oracle.
pub fn check_series(p: SeriesParams, series_tol: f64) -> Result<SeriesCheck> {
    let s = crate::series::eval_series(p, series_tol, crate::series::L_CAP)?;
    let o = oracle_zz(p, 1e-300)?;
    // ratio of the two Z values, both carrying their own exponential scale
    let ratio_z = (s.ln_z(&p) - o.ln_z()).exp();
    let rel = |num: f64, den: f64| {
        if den == 0.0 {
            num.abs()
        } else {
            (num / den - 1.0).abs()
        }
    };
    Ok(SeriesCheck {
        params: p,
        err_z: (ratio_z - 1.0).abs(),
        err_z3: rel(s.moment_parallel * ratio_z, o.z3 / o.z),
        err_z_perp: rel(s.moment_perp_coeff * ratio_z, o.z_perp / o.z),
        terms_used: s.terms_used,
    })
}

/// Normalised moment from an `n_theta × 2 n_theta` product rule in a frame
/// whose polar axis is the easy axis. `xi = βH`.
fn sphere_moment_at(xi: Vec3, n: Vec3, alpha_k: f64, n_theta: usize) -> Vec3 {
    let r = vec3::frame_with_axis(n);
    let h = vec3::mat_t_vec(&r, xi);
    let shift = vec3::norm(h) + alpha_k;
    let (u, w) = gauss_legendre(n_theta);
    let n_phi = 2 * n_theta;
    let dphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    let (cs, sn): (Vec<f64>, Vec<f64>) = (0..n_phi)
        .map(|j| ((j as f64 * dphi).cos(), (j as f64 * dphi).sin()))
        .unzip();
    let mut z = 0.0;
    let mut m = [0.0; 3];
    for (ui, wi) in u.iter().zip(&w) {
        let s = (1.0 - ui * ui).sqrt();
        for j in 0..n_phi {
            let p = [s * cs[j], s * sn[j], *ui];
            let e = (vec3::dot(h, p) + alpha_k * ui * ui - shift).exp() * wi;
            z += e;
            for d in 0..3 {
                m[d] += e * p[d];
            }
        }
    }
    vec3::mat_vec(&r, vec3::scale(1.0 / z, m))
}

/// Mean moment [A m²] by direct quadrature of the Boltzmann density on the
/// sphere, refining until successive resolutions differ by less than 1e-9 m0.
pub fn oracle_sphere_moment(
    h: Vec3,
    n: Vec3,
    alpha_k: f64,
    params: &ParticleParams,
) -> Result<Vec3> {
    if (vec3::norm(n) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("easy axis must have unit length"));
    }
    let xi = vec3::scale(params.beta(), h);
    let mut nt = 16;
    let mut prev = sphere_moment_at(xi, n, alpha_k, nt);
    loop {
        nt *= 2;
        let cur = sphere_moment_at(xi, n, alpha_k, nt);
        let change = vec3::norm(vec3::sub(cur, prev));
        prev = cur;
        if change < 1e-9 {
            break;
        }
        if nt >= 1024 {
            return Err(Error::numerical(
                "sphere quadrature did not settle at 1024 nodes",
            ));
        }
    }
    Ok(vec3::scale(params.m0(), prev))
}
