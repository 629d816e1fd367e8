//! Reduced equilibrium model for 2D Lissajous sequences: every system-matrix
//! row is a single Chebyshev summand, a separable kernel applied to the mixed
//! second derivative of the normalized mean moment.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::physics::MU0;
use crate::series::reduced_moment;
use crate::sysfn::{AssemblyInput, SystemMatrix, TransferFunction};
use crate::vec3;

/// Summand index `round(2 N_B k / (2N_B² + 2N_B + 1))`, halves rounded away
/// from zero.
pub fn lambda_star(k: i64, nb: i64) -> i64 {
    let num = 2 * nb * k;
    let den = 2 * nb * nb + 2 * nb + 1;
    num.signum() * ((2 * num.abs() + den) / (2 * den))
}

/// Summand index minimizing `n² + m²`, i.e. `round((2N_B + 1) k / (2N_B² + 2N_B + 1))`.
///
/// Differs from [`lambda_star`] once `κ_x (2N_B + 1) + κ_y` exceeds half the
/// denominator, e.g. for κ_x = 9 at N_B = 16.
pub fn lambda_nearest(k: i64, nb: i64) -> i64 {
    let num = (2 * nb + 1) * k;
    let den = 2 * nb * nb + 2 * nb + 1;
    num.signum() * ((2 * num.abs() + den) / (2 * den))
}

/// Chebyshev orders and phase of one summand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebIndex {
    pub k: i64,
    pub lambda: i64,
    pub n: i64,
    pub m: i64,
    /// θ = nφ_x + mφ_y [rad].
    pub theta: f64,
}

impl ChebIndex {
    /// Summand `lambda` of frequency `k`.
    pub fn new(k: i64, lambda: i64, nb: i64, phases: [f64; 2]) -> Self {
        let n = -k + lambda * (nb + 1);
        let m = k - lambda * nb;
        Self {
            k,
            lambda,
            n,
            m,
            theta: n as f64 * phases[0] + m as f64 * phases[1],
        }
    }

    /// The selected summand for frequency `k`.
    pub fn selected(k: i64, nb: i64, phases: [f64; 2]) -> Self {
        Self::new(k, lambda_star(k, nb), nb, phases)
    }
}

/// How the single summand of each row is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummandRule {
    /// [`lambda_star`].
    Published,
    /// [`lambda_nearest`], the summand with the lowest Chebyshev orders.
    #[default]
    Nearest,
}

impl SummandRule {
    pub fn lambda(self, k: i64, nb: i64) -> i64 {
        match self {
            SummandRule::Published => lambda_star(k, nb),
            SummandRule::Nearest => lambda_nearest(k, nb),
        }
    }
}

/// Frequency index of the pure mixing order (κ_x, κ_y).
pub fn mixing_frequency(kx: i64, ky: i64, nb: i64) -> i64 {
    kx * nb + ky * (nb + 1)
}

fn cheb_u(n: usize, xi: f64) -> f64 {
    let (mut u0, mut u1) = (1.0, 2.0 * xi);
    if n == 0 {
        return u0;
    }
    for _ in 1..n {
        let u2 = 2.0 * xi * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    u1
}

/// Kernel function `V_n`, an antiderivative of `T_n(ξ)/√(1-ξ²)`.
pub fn v_n(n: i64, xi: f64) -> f64 {
    if n == 0 {
        return xi.clamp(-1.0, 1.0).asin();
    }
    if xi.abs() > 1.0 {
        return 0.0;
    }
    let k = n.unsigned_abs() as usize;
    -cheb_u(k - 1, xi) * (1.0 - xi * xi).sqrt() / k as f64
}

/// Minimal number of fine points per drive excursion |A/G|.
pub const MIN_POINTS_PER_EXCURSION: usize = 64;

/// Fine grid nodes `j h`, `j = -P..=P`, covering the kernel support; the
/// kernel is sampled at the cell midpoints between nodes so that differences
/// of node values telescope exactly against a constant kernel.
struct Window {
    /// Signed drive excursion A/G.
    a: f64,
    h: f64,
    half: usize,
}

impl Window {
    fn new(a: f64, spacing: f64) -> Self {
        let per = ((4.0 * a.abs() / spacing).ceil() as usize).max(MIN_POINTS_PER_EXCURSION);
        Self {
            a,
            h: a.abs() / per as f64,
            half: per + 1,
        }
    }

    fn nodes(&self) -> usize {
        2 * self.half + 1
    }

    fn cells(&self) -> usize {
        2 * self.half
    }

    fn node(&self, j: usize) -> f64 {
        (j as f64 - self.half as f64) * self.h
    }

    /// Weighted kernel `h V_n(z_{j+1/2} / a)` on cell midpoints.
    fn kernel(&self, n: i64) -> Vec<f64> {
        (0..self.cells())
            .map(|j| self.h * v_n(n, (self.node(j) + 0.5 * self.h) / self.a))
            .collect()
    }

    /// V_0 at the first and last node.
    fn v0_ends(&self) -> (f64, f64) {
        (
            v_n(0, self.node(0) / self.a),
            v_n(0, self.node(self.nodes() - 1) / self.a),
        )
    }
}

/// Derivative data of one position and channel.
struct LocalData {
    /// ∂1∂2 ρ·𝓔 on the window cells, axis-1 index major.
    d: Vec<f64>,
    /// ∂2 ρ·𝓔 along the first and last axis-1 node lines.
    f1: [Vec<f64>; 2],
    /// ∂1 ρ·𝓔 along the first and last axis-2 node lines.
    f2: [Vec<f64>; 2],
}

/// Prepared reduced model for one grid, sequence and particle system.
///
/// Each position gets its own window of field points z around x, with the
/// anisotropy parameters of x, so the only approximation left is the
/// single-summand truncation (and the quadrature).
pub struct ReducedModel {
    win: [Window; 2],
    /// Per position, per channel.
    local: Vec<Vec<LocalData>>,
    nb: i64,
    phases: [f64; 2],
    rule: SummandRule,
}

impl ReducedModel {
    pub fn new(input: &AssemblyInput<'_>) -> Result<Self> {
        let seq = input.sequence;
        if seq.is_one_dimensional() || seq.amplitudes[0] == 0.0 {
            return Err(Error::invalid(
                "the reduced model needs a 2D Lissajous sequence",
            ));
        }
        if let crate::physics::AnisotropyModel::FluidB3 { q, .. } = input.anisotropy {
            if *q < 1.0 {
                return Err(Error::invalid(
                    "the reduced model needs q >= 1 for a differentiable mean moment",
                ));
            }
        }
        let grid = input.grid;
        let spacing = grid.spacing();
        let win = [0, 1].map(|d| {
            let a = seq.amplitudes[d] / seq.gradient[d];
            Window::new(
                a,
                if spacing[d] > 0.0 {
                    spacing[d]
                } else {
                    a.abs()
                },
            )
        });
        let beta = input.particle.beta();
        let trunc = input.settings.truncation;
        let (m1, m2) = (win[0].nodes(), win[1].nodes());
        let (h1, h2) = (win[0].h, win[1].h);
        let local = grid
            .positions()
            .par_iter()
            .map(|&x| {
                let (alpha_k, n) = input.anisotropy.at(input.particle, seq.gradient, x);
                let mut e = vec![vec3::ZERO; m1 * m2];
                for j1 in 0..m1 {
                    for j2 in 0..m2 {
                        let z = [x[0] + win[0].node(j1), x[1] + win[1].node(j2), x[2]];
                        let xi = vec3::scale(beta, seq.selection_field(z));
                        e[j1 * m2 + j2] = reduced_moment(xi, n, alpha_k, trunc)?.0;
                    }
                }
                Ok(input
                    .channels
                    .iter()
                    .map(|rho| {
                        let p: Vec<f64> = e.iter().map(|v| vec3::dot(*rho, *v)).collect();
                        let p = |j1: usize, j2: usize| p[j1 * m2 + j2];
                        let (c1, c2) = (m1 - 1, m2 - 1);
                        let mut d = vec![0.0; c1 * c2];
                        for j1 in 0..c1 {
                            for j2 in 0..c2 {
                                d[j1 * c2 + j2] =
                                    (p(j1 + 1, j2 + 1) - p(j1 + 1, j2) - p(j1, j2 + 1) + p(j1, j2))
                                        / (h1 * h2);
                            }
                        }
                        let d2 = |j1: usize| {
                            (0..c2).map(|j2| (p(j1, j2 + 1) - p(j1, j2)) / h2).collect()
                        };
                        let d1 = |j2: usize| {
                            (0..c1).map(|j1| (p(j1 + 1, j2) - p(j1, j2)) / h1).collect()
                        };
                        LocalData {
                            d,
                            f1: [d2(0), d2(c1)],
                            f2: [d1(0), d1(c2)],
                        }
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            win,
            local,
            nb: seq.divider as i64,
            phases: seq.phases,
            rule: input.settings.summand_rule,
        })
    }

    /// `ρ·m̂_k / m0` at every grid position (x fastest) from the given summands.
    pub fn normalized_spectrum(&self, channel: usize, summands: &[ChebIndex]) -> Vec<Complex64> {
        let (m1, m2) = (self.win[0].cells(), self.win[1].cells());
        let sign = (self.win[0].a.signum() * self.win[1].a.signum()) / std::f64::consts::PI.powi(2);
        let mut out = vec![Complex64::new(0.0, 0.0); self.local.len()];
        for s in summands {
            if s.n == 0 && s.m == 0 {
                continue;
            }
            let k1 = self.win[0].kernel(s.n);
            let k2 = self.win[1].kernel(s.m);
            let c = Complex64::new(0.0, -1.0).powi(s.lambda as i32)
                * Complex64::from_polar(sign, s.theta);
            let (lo1, hi1) = self.win[0].v0_ends();
            let (lo2, hi2) = self.win[1].v0_ends();
            for (o, pos) in out.iter_mut().zip(&self.local) {
                let ch = &pos[channel];
                let mut integral = 0.0;
                for j1 in 0..m1 {
                    if k1[j1] == 0.0 {
                        continue;
                    }
                    let row = &ch.d[j1 * m2..(j1 + 1) * m2];
                    integral += k1[j1] * row.iter().zip(&k2).map(|(a, b)| a * b).sum::<f64>();
                }
                // V_0 is constant outside the window; its tails integrate exactly
                if s.n == 0 {
                    integral += (0..m2)
                        .map(|j2| k2[j2] * (lo1 * ch.f1[0][j2] - hi1 * ch.f1[1][j2]))
                        .sum::<f64>();
                }
                if s.m == 0 {
                    integral += (0..m1)
                        .map(|j1| k1[j1] * (lo2 * ch.f2[0][j1] - hi2 * ch.f2[1][j1]))
                        .sum::<f64>();
                }
                *o += c * integral;
            }
        }
        out
    }

    /// Selected-summand index for frequency `k`.
    pub fn selected(&self, k: usize) -> ChebIndex {
        let k = k as i64;
        ChebIndex::new(k, self.rule.lambda(k, self.nb), self.nb, self.phases)
    }
}

/// Reduced-model system matrix, rows in parallel over frequency.
pub fn reduced_system_matrix(
    input: &AssemblyInput<'_>,
    tf: Option<&TransferFunction>,
) -> Result<SystemMatrix> {
    let model = ReducedModel::new(input)?;
    let seq = input.sequence;
    let n_freq = seq.n_freq();
    let n_pos = input.grid.len();
    let n_ch = input.channels.len();
    let m0 = input.particle.m0();
    let period = seq.period();
    let rows: Vec<Vec<Complex64>> = (0..n_ch * n_freq)
        .into_par_iter()
        .map(|r| {
            let (l, k) = (r / n_freq, r % n_freq);
            let g = tf.map_or(Complex64::new(1.0, 0.0), |tf| tf.gain(l, k));
            let w = 2.0 * std::f64::consts::PI * k as f64 / period;
            let f = -MU0 * m0 * g * Complex64::new(0.0, w);
            model
                .normalized_spectrum(l, &[model.selected(k)])
                .into_iter()
                .map(|v| f * v)
                .collect()
        })
        .collect();
    if let Some(tf) = tf {
        if tf.n_channels != n_ch || tf.n_freq != n_freq {
            return Err(Error::invalid("transfer function shape does not match"));
        }
    }
    Ok(SystemMatrix {
        n_freq,
        n_pos,
        channels: input.channels.to_vec(),
        period,
        grid: *input.grid,
        sequence: *seq,
        particle: *input.particle,
        anisotropy: *input.anisotropy,
        model: "reduced-eqanis".to_string(),
        tf_applied: tf.is_some(),
        data: rows.concat(),
    })
}
