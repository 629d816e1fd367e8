//! Log-gamma values at integers and half-integers, cached.

use std::sync::OnceLock;

const TABLE: usize = 1200;

struct Tables {
    ln_fact: Vec<f64>,
    ln_gamma_half: Vec<f64>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut ln_fact = vec![0.0; TABLE];
        let mut ln_gamma_half = vec![0.0; TABLE];
        ln_gamma_half[0] = 0.5 * std::f64::consts::PI.ln();
        for j in 1..TABLE {
            ln_fact[j] = ln_fact[j - 1] + (j as f64).ln();
            ln_gamma_half[j] = ln_gamma_half[j - 1] + (j as f64 - 0.5).ln();
        }
        Tables {
            ln_fact,
            ln_gamma_half,
        }
    })
}

/// ln(n!) for n < 1200.
pub fn ln_factorial(n: usize) -> f64 {
    tables().ln_fact[n]
}

/// ln Γ(n + ½) for n < 1200.
pub fn ln_gamma_half(n: usize) -> f64 {
    tables().ln_gamma_half[n]
}

/// `n * ln(x)` with the convention 0·ln 0 = 0.
pub fn xlogy(n: f64, x: f64) -> f64 {
    if n == 0.0 {
        0.0
    } else {
        n * x.ln()
    }
}

/// Numerically stable ln(eˣ + eʸ).
pub fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}
