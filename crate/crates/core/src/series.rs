//! Truncated Bessel/Laguerre series for the partition function and the mean
//! magnetic moment of uniaxially anisotropic particles in equilibrium.
//!
//! With `a = β|H̃|₁₂`, `b = β H̃₃` and `c = α_K` (field components taken in a
//! frame whose third axis is the easy axis) the partition function is
//!
//! ```text
//! Z  = (2π)^{3/2} Σ_ℓ (2c)^ℓ L_ℓ^{(-1/2)}(t) I_{ℓ+1/2}(a)/a^{ℓ+1/2},   t = -b²/(4c)
//! z₃ = (2π)^{3/2} b Σ_ℓ (2c)^ℓ L_ℓ^{(1/2)}(t) I_{ℓ+3/2}(a)/a^{ℓ+3/2}
//! z_i = (2π)^{3/2} βH̃_i Σ_ℓ (2c)^ℓ L_ℓ^{(-1/2)}(t) I_{ℓ+3/2}(a)/a^{ℓ+3/2}
//! ```
//!
//! Every term is positive, so all sums are carried as logarithms.

use crate::error::{Error, Result};
use crate::physics::ParticleParams;
use crate::special::{ln_factorial, ln_gamma_half, log_add_exp, xlogy};
use crate::vec3::{self, Vec3};

/// Largest admissible truncation index.
pub const L_CAP: usize = 256;
/// Below this anisotropy the Laguerre argument is replaced by direct sums.
pub const SMALL_C: f64 = 1e-8;
/// Default relative tolerance of the adaptive truncation.
pub const DEFAULT_TOL: f64 = 1e-12;

const LN_TWO_PI_3_2: f64 = 2.756_815_599_614_018; // 1.5 ln(2π)

/// Langevin function coth(ξ) − 1/ξ.
pub fn langevin(xi: f64) -> f64 {
    if xi.abs() < 1e-3 {
        let x2 = xi * xi;
        xi * (1.0 / 3.0 - x2 * (1.0 / 45.0 - x2 * 2.0 / 945.0))
    } else {
        1.0 / xi.tanh() - 1.0 / xi
    }
}

/// Logarithms of `I_ν(a)/a^ν · e^{-a}` for `ν = ½, 3/2, …` (`count` values).
///
/// The ratios `ρ_ν = R_{ν-1}/R_ν` of `R_ν = I_ν(a)/a^ν` obey
/// `ρ_ν = 2ν + a²/ρ_{ν+1}`, which is evaluated downwards from a high order
/// and anchored at the closed form for `ν = ½`.
pub fn log_scaled_bessel_ratios(a: f64, count: usize) -> Result<Vec<f64>> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!(
            "Bessel argument must be finite and >= 0, got {a}"
        )));
    }
    if count > L_CAP + 2 {
        return Err(Error::invalid(format!(
            "requested {count} Bessel orders, cap is {}",
            L_CAP + 2
        )));
    }
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    let b_half = if a == 0.0 {
        0.0
    } else {
        (-(-2.0 * a).exp_m1() / (2.0 * a)).ln()
    };
    out.push(0.5 * (2.0 / std::f64::consts::PI).ln() + b_half);
    if count == 1 {
        return Ok(out);
    }
    // ρ for ν = 3/2 .. count - 1/2 (index j ↔ ν = j + ½, j ≥ 1)
    let extra = 30 + (8.0 * a.sqrt()).ceil() as usize;
    let top = count - 1 + extra;
    let a2 = a * a;
    let nu_top = top as f64 + 1.5;
    let mut rho = nu_top + (nu_top * nu_top + a2).sqrt();
    let mut rhos = vec![0.0; count];
    for j in (1..=top).rev() {
        let nu = j as f64 + 0.5;
        rho = 2.0 * nu + a2 / rho;
        if j < count {
            rhos[j] = rho;
        }
    }
    for j in 1..count {
        let prev = out[j - 1];
        out.push(prev - rhos[j].ln());
    }
    Ok(out)
}

/// Values `I_ν(a)/a^ν · e^{-a}` for `ν = ½, …, nu_max` (half-integers).
pub fn scaled_bessel_ratios(a: f64, nu_max: f64) -> Result<Vec<f64>> {
    let count = (nu_max - 0.5).round();
    if !(count >= 0.0) {
        return Err(Error::invalid("nu_max must be at least 1/2"));
    }
    Ok(log_scaled_bessel_ratios(a, count as usize + 1)?
        .into_iter()
        .map(f64::exp)
        .collect())
}

/// Streaming log-domain evaluation of `L_ℓ^{(α)}(t)` for `t ≤ 0`, `α > -1`.
#[derive(Debug, Clone)]
struct LaguerreLog {
    alpha: f64,
    t: f64,
    next_l: usize,
    log_value: f64,
    ratio: f64,
}

impl LaguerreLog {
    fn new(alpha: f64, t: f64) -> Self {
        Self {
            alpha,
            t,
            next_l: 0,
            log_value: 0.0,
            ratio: 1.0,
        }
    }

    /// Returns ln L_ℓ for the next ℓ.
    fn next_log(&mut self) -> f64 {
        let l = self.next_l;
        self.next_l += 1;
        if l == 0 {
            self.log_value = 0.0;
            return 0.0;
        }
        let r = if l == 1 {
            1.0 + self.alpha - self.t
        } else {
            let lm = (l - 1) as f64;
            ((2.0 * lm + 1.0 + self.alpha - self.t) - (lm + self.alpha) / self.ratio) / (lm + 1.0)
        };
        self.ratio = r;
        self.log_value += r.ln();
        self.log_value
    }
}

/// `(ln L_ℓ^{(α)}(t), sign)` for `ℓ = 0..count`.
///
/// For `t ≤ 0` and `α > -1` every coefficient of the polynomial in `-t` is
/// positive, so the sign is always +1.
pub fn laguerre_log_terms(alpha: f64, t: f64, count: usize) -> Result<Vec<(f64, i32)>> {
    if t > 0.0 || !t.is_finite() {
        return Err(Error::invalid(format!(
            "Laguerre argument must be <= 0, got {t}"
        )));
    }
    if alpha <= -1.0 {
        return Err(Error::invalid("Laguerre order must exceed -1"));
    }
    if count == 0 {
        return Err(Error::invalid("at least one Laguerre term required"));
    }
    let mut lag = LaguerreLog::new(alpha, t);
    Ok((0..count).map(|_| (lag.next_log(), 1)).collect())
}

/// Dimensionless arguments of the series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesParams {
    /// β times the field magnitude orthogonal to the easy axis.
    pub a: f64,
    /// β times the field component along the easy axis.
    pub b: f64,
    /// Anisotropy strength α_K.
    pub c: f64,
}

impl SeriesParams {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let p = Self { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(Error::invalid(format!("a must be >= 0, got {}", self.a)));
        }
        if !self.b.is_finite() {
            return Err(Error::invalid("b must be finite"));
        }
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("c must be >= 0, got {}", self.c)));
        }
        Ok(())
    }
}

/// Outcome of a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesResult {
    /// ln Z − a.
    pub log_z: f64,
    /// z₃ / Z.
    pub moment_parallel: f64,
    /// z_i / (β H̃_i Z), shared by both orthogonal components.
    pub moment_perp_coeff: f64,
    /// Number of summed terms.
    pub terms_used: usize,
}

impl SeriesResult {
    /// ln Z including the exponential scale.
    pub fn ln_z(&self, p: &SeriesParams) -> f64 {
        self.log_z + p.a
    }
}

/// Logarithms of the ℓ-th terms of the three sums (Z, z₃/b, z_i/(βH̃_i)).
struct TermStream {
    p: SeriesParams,
    l: usize,
    ln_2c: f64,
    lag_m: LaguerreLog,
    lag_p: LaguerreLog,
    bessel: Vec<f64>,
    small_c: bool,
}

impl TermStream {
    fn new(p: SeriesParams) -> Result<Self> {
        let small_c = p.c < SMALL_C;
        let t = if small_c {
            0.0
        } else {
            -p.b * p.b / (4.0 * p.c)
        };
        Ok(Self {
            p,
            l: 0,
            ln_2c: (2.0 * p.c).ln(),
            lag_m: LaguerreLog::new(-0.5, t),
            lag_p: LaguerreLog::new(0.5, t),
            bessel: log_scaled_bessel_ratios(p.a, 34)?,
            small_c,
        })
    }

    /// ln of `(2c)^ℓ L_ℓ^{(α)}(-b²/(4c))` through its finite sum in `b²` and
    /// `c`, valid down to `c = 0`. `half` selects α = −½ (0) or α = +½ (1).
    fn direct_log(&self, l: usize, half: usize) -> f64 {
        let mut acc = f64::NEG_INFINITY;
        for k in 0..=l {
            let lk = (l - k) as f64;
            let kf = k as f64;
            let ln_binom = ln_gamma_half(l + half) - ln_factorial(l - k) - ln_gamma_half(k + half);
            let v = l as f64 * std::f64::consts::LN_2
                + xlogy(lk, self.p.c)
                + xlogy(kf, self.p.b * self.p.b)
                - kf * 4f64.ln()
                - ln_factorial(k)
                + ln_binom;
            acc = log_add_exp(acc, v);
        }
        acc
    }

    fn next(&mut self) -> Result<[f64; 3]> {
        let l = self.l;
        if l + 2 > self.bessel.len() {
            let want = (2 * self.bessel.len()).min(L_CAP + 2);
            if l + 2 > want {
                return Err(Error::numerical("series exceeded the truncation cap"));
            }
            self.bessel = log_scaled_bessel_ratios(self.p.a, want)?;
        }
        let (lm, lp) = if self.small_c {
            (self.direct_log(l, 0), self.direct_log(l, 1))
        } else {
            let pre = if l == 0 { 0.0 } else { l as f64 * self.ln_2c };
            (pre + self.lag_m.next_log(), pre + self.lag_p.next_log())
        };
        self.l += 1;
        Ok([
            lm + self.bessel[l],
            lp + self.bessel[l + 1],
            lm + self.bessel[l + 1],
        ])
    }
}

fn finish(p: &SeriesParams, sums: [f64; 3], terms_used: usize) -> SeriesResult {
    SeriesResult {
        log_z: LN_TWO_PI_3_2 + sums[0],
        moment_parallel: p.b * (sums[1] - sums[0]).exp(),
        moment_perp_coeff: (sums[2] - sums[0]).exp(),
        terms_used,
    }
}

/// Adaptive evaluation: stops once three consecutive terms of every sum fall
/// below `tol` times the running partial sum.
pub fn eval_series(p: SeriesParams, tol: f64, l_max: usize) -> Result<SeriesResult> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if l_max > L_CAP || l_max == 0 {
        return Err(Error::invalid(format!("L_max must be in 1..={L_CAP}")));
    }
    let ln_tol = tol.ln();
    let mut stream = TermStream::new(p)?;
    let mut sums = [f64::NEG_INFINITY; 3];
    let mut small_run = 0;
    let mut last = [0.0; 3];
    for l in 0..l_max {
        let terms = stream.next()?;
        let mut all_small = true;
        for i in 0..3 {
            sums[i] = log_add_exp(sums[i], terms[i]);
            if terms[i] >= ln_tol + sums[i] {
                all_small = false;
            }
        }
        last = terms;
        small_run = if all_small { small_run + 1 } else { 0 };
        if small_run == 3 {
            return Ok(finish(&p, sums, l + 1));
        }
    }
    let rel = (last[0] - sums[0]).exp();
    Err(Error::numerical(format!(
        "series did not converge within {l_max} terms (last relative term {rel:.3e})"
    )))
}

/// Sum of exactly the first `l` terms.
pub fn eval_series_fixed(p: SeriesParams, l: usize) -> Result<SeriesResult> {
    p.validate()?;
    if l > L_CAP || l == 0 {
        return Err(Error::invalid(format!("L must be in 1..={L_CAP}")));
    }
    let mut stream = TermStream::new(p)?;
    let mut sums = [f64::NEG_INFINITY; 3];
    for _ in 0..l {
        let terms = stream.next()?;
        for i in 0..3 {
            sums[i] = log_add_exp(sums[i], terms[i]);
        }
    }
    Ok(finish(&p, sums, l))
}

/// Truncation rule for the equilibrium moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Adaptive { tol: f64 },
    Fixed(usize),
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Adaptive { tol: DEFAULT_TOL }
    }
}

/// Normalised equilibrium moment `m̄/m0` for the dimensionless field `ξ = βH`.
///
/// Returns the moment together with the number of series terms used (0 on the
/// isotropic closed-form path).
pub fn reduced_moment(xi: Vec3, n: Vec3, alpha_k: f64, trunc: Truncation) -> Result<(Vec3, usize)> {
    if !(alpha_k >= 0.0 && alpha_k.is_finite()) {
        return Err(Error::invalid("alpha_K must be >= 0"));
    }
    if alpha_k < SMALL_C {
        let mag = vec3::norm(xi);
        if mag == 0.0 {
            return Ok((vec3::ZERO, 0));
        }
        return Ok((vec3::scale(langevin(mag) / mag, xi), 0));
    }
    let b = vec3::dot(n, xi);
    let perp = vec3::sub(xi, vec3::scale(b, n));
    let a = vec3::norm(perp);
    let p = SeriesParams { a, b, c: alpha_k };
    let r = match trunc {
        Truncation::Adaptive { tol } => eval_series(p, tol, L_CAP)?,
        Truncation::Fixed(l) => eval_series_fixed(p, l)?,
    };
    Ok((
        vec3::add(
            vec3::scale(r.moment_parallel, n),
            vec3::scale(r.moment_perp_coeff, perp),
        ),
        r.terms_used,
    ))
}

/// Mean magnetic moment [A m²] of the anisotropic equilibrium model.
pub fn mean_moment(
    h: Vec3,
    n: Vec3,
    alpha_k: f64,
    params: &ParticleParams,
    tol: f64,
) -> Result<Vec3> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if (vec3::norm(n) - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("easy axis must have unit length"));
    }
    let beta = params.beta();
    let (m, _) = reduced_moment(
        vec3::scale(beta, h),
        n,
        alpha_k,
        Truncation::Adaptive { tol },
    )?;
    Ok(vec3::scale(params.m0(), m))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series for I_ν(a)/a^ν, fine for moderate a.
    fn bessel_ratio_series(nu: f64, a: f64) -> f64 {
        let q = a * a / 4.0;
        let mut term = 1.0 / (2f64.powf(nu) * gamma_half_plus(nu + 1.0));
        let mut sum = term;
        for k in 1..400 {
            term *= q / (k as f64 * (k as f64 + nu));
            sum += term;
            if term < 1e-18 * sum {
                break;
            }
        }
        sum
    }

    /// Γ(x) for x a positive half-integer or integer.
    fn gamma_half_plus(x: f64) -> f64 {
        let mut v = if (x - x.floor()).abs() < 1e-12 {
            1.0
        } else {
            std::f64::consts::PI.sqrt()
        };
        let mut y = if (x - x.floor()).abs() < 1e-12 {
            1.0
        } else {
            0.5
        };
        while y < x - 1e-12 {
            v *= y;
            y += 1.0;
        }
        v
    }

    fn laguerre_explicit(n: usize, alpha: f64, t: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..=n {
            let mut binom = 1.0;
            for j in 0..(n - k) {
                binom *= (n as f64 + alpha - j as f64) / (j as f64 + 1.0);
            }
            let mut pow = 1.0;
            for j in 1..=k {
                pow *= -t / j as f64;
            }
            s += binom * pow;
        }
        s
    }

    #[test]
    fn langevin_values() {
        assert_eq!(langevin(0.0), 0.0);
        assert!((langevin(1e-4) - 3.333_333_333_e-5).abs() < 1e-13);
        assert!((langevin(5.0) - 0.800_090_8).abs() < 1e-6);
        assert!((langevin(-5.0) + langevin(5.0)).abs() < 1e-15);
        let x = 1.0001e-3;
        assert!((langevin(x) - langevin(0.9999e-3)).abs() < 1e-6);
    }

    #[test]
    fn bessel_closed_forms() {
        let b0 = scaled_bessel_ratios(0.0, 0.5).unwrap();
        assert!((b0[0] - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-15);
        let b1 = scaled_bessel_ratios(1.0, 0.5).unwrap();
        assert!((b1[0] * 1f64.exp() - 0.937_674_888).abs() < 1e-8);
        let r0 = scaled_bessel_ratios(0.0, 6.5).unwrap();
        for (j, v) in r0.iter().enumerate() {
            let nu = j as f64 + 0.5;
            let exact = 1.0 / (2f64.powf(nu) * gamma_half_plus(nu + 1.0));
            assert!((v - exact).abs() < 1e-14 * exact);
        }
    }

    #[test]
    fn bessel_against_power_series() {
        for &a in &[1e-6, 0.3, 2.0, 10.0, 27.5, 45.0] {
            let logs = log_scaled_bessel_ratios(a, 60).unwrap();
            for (j, lv) in logs.iter().enumerate() {
                let nu = j as f64 + 0.5;
                let exact = bessel_ratio_series(nu, a).ln() - a;
                assert!(
                    (lv - exact).abs() < 2e-13 * exact.abs().max(1.0),
                    "a={a} nu={nu}"
                );
            }
        }
    }

    #[test]
    fn bessel_cap_rejected() {
        assert!(log_scaled_bessel_ratios(1.0, L_CAP + 3).is_err());
    }

    #[test]
    fn laguerre_examples() {
        let v = laguerre_log_terms(-0.5, -2.0, 3).unwrap();
        assert_eq!(v[0], (0.0, 1));
        assert!((v[1].0.exp() - 2.5).abs() < 1e-15);
        let w = laguerre_log_terms(0.5, -3.0, 6).unwrap();
        let exact = laguerre_explicit(5, 0.5, -3.0);
        assert!((w[5].0.exp() - exact).abs() < 1e-12 * exact);
        assert!(laguerre_log_terms(0.5, 0.1, 3).is_err());
    }

    #[test]
    fn laguerre_recurrence_matches_explicit_sum() {
        for &t in &[0.0, -0.01, -1.0, -7.5, -40.0, -900.0] {
            for &alpha in &[-0.5, 0.5] {
                let v = laguerre_log_terms(alpha, t, 25).unwrap();
                for (n, (lv, _)) in v.iter().enumerate() {
                    let e = laguerre_explicit(n, alpha, t);
                    assert!(
                        (lv.exp() - e).abs() < 1e-12 * e,
                        "t={t} alpha={alpha} n={n}"
                    );
                }
            }
        }
    }

    #[test]
    fn uniform_density() {
        let r = eval_series(SeriesParams::new(0.0, 0.0, 0.0).unwrap(), 1e-12, 64).unwrap();
        assert!((r.log_z.exp() - 4.0 * std::f64::consts::PI).abs() < 1e-13);
        assert_eq!(r.moment_parallel, 0.0);
        assert!((r.moment_perp_coeff - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn pure_anisotropy() {
        let r = eval_series(SeriesParams::new(0.0, 0.0, 1.0).unwrap(), 1e-14, 64).unwrap();
        // 4π ∫₀¹ e^{x²} dx, with ∫₀¹ e^{x²} dx = 1.4626517459071816
        assert!(
            (r.log_z.exp() - 4.0 * std::f64::consts::PI * 1.462_651_745_907_181_6).abs() < 1e-12
        );
    }

    #[test]
    fn small_c_paths_agree() {
        for &(a, b) in &[(0.0, 3.0), (2.0, -1.5), (7.0, 12.0)] {
            let lo = eval_series(SeriesParams::new(a, b, 0.9e-8).unwrap(), 1e-14, 200).unwrap();
            let hi = eval_series(SeriesParams::new(a, b, 1.1e-8).unwrap(), 1e-14, 200).unwrap();
            // both sides are exact; the residual difference is the genuine
            // O(Δc) change of the partition function
            assert!((lo.moment_parallel - hi.moment_parallel).abs() < 1e-8);
            assert!((lo.log_z - hi.log_z).abs() < 1e-8);
        }
    }

    #[test]
    fn isotropic_series_is_langevin() {
        // c = 0 through the series path (not the dispatch in reduced_moment).
        let (a, b) = (3.0, 4.0);
        let r = eval_series(SeriesParams::new(a, b, 0.0).unwrap(), 1e-15, 200).unwrap();
        let xi = 5.0;
        let l = langevin(xi) / xi;
        assert!((r.moment_parallel - l * b).abs() < 1e-13);
        assert!((r.moment_perp_coeff - l).abs() < 1e-13);
        let lnz = (4.0 * std::f64::consts::PI * xi.sinh() / xi).ln();
        assert!((r.ln_z(&SeriesParams { a, b, c: 0.0 }) - lnz).abs() < 1e-13);
    }

    #[test]
    fn fixed_and_adaptive_agree() {
        let p = SeriesParams::new(12.0, -8.0, 9.0).unwrap();
        let ad = eval_series(p, 1e-14, 256).unwrap();
        let fx = eval_series_fixed(p, 200).unwrap();
        assert!((ad.moment_parallel - fx.moment_parallel).abs() < 1e-13);
        assert!(ad.terms_used < 200);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(SeriesParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(SeriesParams::new(0.0, 0.0, -1.0).is_err());
        let p = SeriesParams::new(1.0, 1.0, 1.0).unwrap();
        assert!(eval_series(p, 0.0, 10).is_err());
        assert!(eval_series(p, 1e-8, 300).is_err());
        assert!(eval_series(SeriesParams::new(1.0, 30.0, 25.0).unwrap(), 1e-12, 3).is_err());
    }

    #[test]
    fn langevin_special_case() {
        let params = ParticleParams::with_diameter(20e-9).unwrap();
        let m = mean_moment([1000.0, 0.0, 0.0], vec3::E3, 0.0, &params, 1e-12).unwrap();
        let exp = params.m0() * langevin(params.beta() * 1000.0);
        assert!((m[0] - exp).abs() < 1e-10 * exp);
        assert_eq!(m[1], 0.0);
        let z = mean_moment([0.0; 3], vec3::E1, 5.0, &params, 1e-12).unwrap();
        assert_eq!(z, [0.0; 3]);
    }
}
