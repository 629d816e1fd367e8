//! Néel-rotation Fokker-Planck reference model solved by the method of lines:
//! real spherical-harmonic Galerkin discretization in space and an adaptive
//! 4th-order L-stable Rosenbrock method in time.

pub mod banded;
pub mod basis;

use serde::{Deserialize, Serialize};

use self::banded::BandMatrix;
use self::basis::{
    bandwidths, complex_operators, real_harmonics, to_band, ComplexOps, Rates, RealLayout,
};
use crate::error::{Error, Result};
use crate::physics::{FieldSequence, ParticleParams, KB, MU0};
use crate::quadrature::gauss_legendre;
use crate::trace::MomentTrace;
use crate::vec3::{self, Mat3, Vec3};

pub const DEFAULT_GAMMA: f64 = 1.75e11;
pub const DEFAULT_DAMPING: f64 = 0.1;

/// Rates of the Néel drift field and the relaxation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeelCoefficients {
    /// Field precession rate per A/m.
    pub alpha1: f64,
    /// Field alignment rate per A/m.
    pub alpha2: f64,
    /// Anisotropy precession rate.
    pub alpha3: f64,
    /// Anisotropy alignment rate.
    pub alpha4: f64,
    /// Diffusion rate 1/(2τ).
    pub inv_two_tau: f64,
}

impl NeelCoefficients {
    /// Relaxation time τ (infinite without damping).
    pub fn tau(&self) -> f64 {
        if self.inv_two_tau > 0.0 {
            0.5 / self.inv_two_tau
        } else {
            f64::INFINITY
        }
    }

    fn rates(&self) -> Rates {
        Rates {
            inv_two_tau: self.inv_two_tau,
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            alpha4: self.alpha4,
        }
    }
}

/// Landau–Lifshitz–Gilbert parameterization of the drift and diffusion rates.
pub fn neel_coefficients(
    params: &ParticleParams,
    alpha_k: f64,
    gamma: f64,
    damping: f64,
) -> Result<NeelCoefficients> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gyromagnetic ratio must be positive"));
    }
    if !(damping >= 0.0) {
        return Err(Error::invalid("damping must be nonnegative"));
    }
    if !(alpha_k >= 0.0) {
        return Err(Error::invalid("alpha_K must be nonnegative"));
    }
    let g = gamma / (1.0 + damping * damping);
    let k_anis = alpha_k * MU0 * params.ms / params.beta();
    Ok(NeelCoefficients {
        alpha1: MU0 * g,
        alpha2: MU0 * g * damping,
        alpha3: 2.0 * g * k_anis / params.ms,
        alpha4: 2.0 * g * damping * k_anis / params.ms,
        inv_two_tau: g * damping * KB * params.temperature / params.m0(),
    })
}

/// Numerical settings of the Fokker-Planck solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximal spherical-harmonic degree.
    pub l_sph: usize,
    /// Length of the discarded warm-up in sequence periods.
    pub warmup_periods: f64,
    pub gamma: f64,
    pub damping: f64,
    /// Threshold on the relative energy in the two highest degrees.
    pub tail_tol: f64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            rel_tol: 2e-4,
            abs_tol: 1e-6,
            l_sph: 40,
            warmup_periods: 1.0,
            gamma: DEFAULT_GAMMA,
            damping: DEFAULT_DAMPING,
            tail_tol: 1e-6,
        }
    }
}

impl FpOptions {
    pub fn validate(&self) -> Result<()> {
        if self.l_sph < 10 {
            return Err(Error::invalid("L_sph must be at least 10"));
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        if !(self.warmup_periods >= 0.0) {
            return Err(Error::invalid("warm-up length must be nonnegative"));
        }
        Ok(())
    }
}

/// Applied field as a function of time.
pub trait FieldTrajectory: Sync {
    fn field(&self, t: f64) -> Vec3;
    fn field_rate(&self, t: f64) -> Vec3;
    /// A direction `d` with `H(t) ∥ d` for all t, if one exists.
    fn fixed_direction(&self) -> Option<Vec3>;
}

/// Time-independent field.
#[derive(Debug, Clone, Copy)]
pub struct StaticField(pub Vec3);

impl FieldTrajectory for StaticField {
    fn field(&self, _t: f64) -> Vec3 {
        self.0
    }
    fn field_rate(&self, _t: f64) -> Vec3 {
        vec3::ZERO
    }
    fn fixed_direction(&self) -> Option<Vec3> {
        Some(vec3::normalize(self.0).unwrap_or(vec3::E3))
    }
}

/// Field of a drive sequence seen at a fixed position.
#[derive(Debug, Clone, Copy)]
pub struct SequenceField<'a> {
    pub seq: &'a FieldSequence,
    pub x: Vec3,
}

impl FieldTrajectory for SequenceField<'_> {
    fn field(&self, t: f64) -> Vec3 {
        self.seq.applied_field(self.x, t)
    }
    fn field_rate(&self, t: f64) -> Vec3 {
        self.seq.drive_field_rate(t)
    }
    fn fixed_direction(&self) -> Option<Vec3> {
        let s = self.seq.selection_field(self.x);
        if self.seq.is_one_dimensional() && s[1] == 0.0 && s[2] == 0.0 {
            Some(vec3::E1)
        } else {
            None
        }
    }
}

/// Counters from one integration run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest relative energy seen in the two highest degrees.
    pub max_tail_energy: f64,
}

/// Semidiscrete Fokker-Planck system `dc/dt = (A0 + Σ h_c(t) A_c) c` in the
/// easy-axis frame.
pub struct FpSystem {
    frame: Mat3,
    layout: RealLayout,
    dim: usize,
    a0: BandMatrix,
    ac: [BandMatrix; 3],
    coeffs: NeelCoefficients,
    params: ParticleParams,
    alpha_k: f64,
    moment_idx: [Option<usize>; 3],
    tail_idx: Vec<usize>,
    opts: FpOptions,
}

// Rosenbrock coefficients (4th order, L-stable, with embedded error estimate
// and continuous extension).
const GAM: f64 = 0.25;
const C2: f64 = 0.386;
const C3: f64 = 0.21;
const C4: f64 = 0.63;
const D1: f64 = 0.25;
const D2: f64 = -0.1043;
const D3: f64 = 0.1035;
const D4: f64 = -0.362_000_000_000_002_3e-1;
const A21: f64 = 0.1544e1;
const A31: f64 = 0.946_678_528_081_582_6;
const A32: f64 = 0.255_701_169_898_328_4;
const A41: f64 = 0.331_482_518_706_852_1e1;
const A42: f64 = 0.289_612_401_597_220_1e1;
const A43: f64 = 0.998_641_913_997_781_7;
const A51: f64 = 0.122_122_450_922_664_1e1;
const A52: f64 = 0.601_913_448_128_862_9e1;
const A53: f64 = 0.125_370_833_293_208_7e2;
const A54: f64 = -0.687_886_036_105_895;
const C21: f64 = -0.56688e1;
const C31: f64 = -0.243_009_335_683_387_5e1;
const C32: f64 = -0.206_359_915_709_191_5;
const C41: f64 = -0.107_352_905_815_137_5;
const C42: f64 = -0.959_456_225_102_335_5e1;
const C43: f64 = -0.204_702_861_480_961_6e2;
const C51: f64 = 0.749_644_331_396_764_7e1;
const C52: f64 = -0.102_468_043_146_435_2e2;
const C53: f64 = -0.339_999_035_281_990_5e2;
const C54: f64 = 0.117_089_089_320_616e2;
const C61: f64 = 0.808_324_679_592_152_2e1;
const C62: f64 = -0.798_113_298_806_489_3e1;
const C63: f64 = -0.315_215_943_287_437_1e2;
const C64: f64 = 0.163_193_054_312_313_6e2;
const C65: f64 = -0.605_881_823_883_405_4e1;
const E21: f64 = 0.101_262_350_834_458_6e2;
const E22: f64 = -0.748_799_587_761_016_7e1;
const E23: f64 = -0.348_009_186_155_574_7e2;
const E24: f64 = -0.799_277_170_756_882_3e1;
const E25: f64 = 0.102_513_772_329_566_2e1;
const E31: f64 = -0.676_280_339_280_125_3;
const E32: f64 = 0.608_771_465_168_001_5e1;
const E33: f64 = 0.164_308_432_089_247_8e2;
const E34: f64 = 0.247_672_251_141_838_6e2;
const E35: f64 = -0.659_438_912_571_687_2e1;

/// Step-size controller with the predictive (Gustafsson) correction.
struct Controller {
    first: bool,
    reject: bool,
    err_old: f64,
    h_old: f64,
}

impl Controller {
    /// Returns `Ok(h_next)` on acceptance, `Err(h_retry)` on rejection.
    fn judge(&mut self, err: f64, h: f64) -> std::result::Result<f64, f64> {
        const SAFE: f64 = 0.9;
        const FAC1: f64 = 5.0;
        const FAC2: f64 = 1.0 / 6.0;
        let mut fac = (err.powf(0.25) / SAFE).clamp(FAC2, FAC1);
        let mut h_new = h / fac;
        if err <= 1.0 {
            if !self.first {
                let pred = ((self.h_old / h) * (err * err / self.err_old).powf(0.25) / SAFE)
                    .clamp(FAC2, FAC1);
                fac = fac.max(pred);
                h_new = h / fac;
            }
            self.first = false;
            self.h_old = h;
            self.err_old = err.max(0.01);
            if self.reject {
                h_new = h_new.min(h);
            }
            self.reject = false;
            Ok(h_new)
        } else {
            self.reject = true;
            Err(h_new)
        }
    }
}

impl FpSystem {
    /// Assembles the operators for easy axis `n`. With `axisymmetric` only the
    /// m = 0 block is kept, valid when the field stays parallel to `n`.
    pub fn new(
        n: Vec3,
        alpha_k: f64,
        params: &ParticleParams,
        opts: &FpOptions,
        axisymmetric: bool,
    ) -> Result<Self> {
        opts.validate()?;
        let n = vec3::normalize(n).ok_or_else(|| Error::invalid("easy axis must be nonzero"))?;
        let coeffs = neel_coefficients(params, alpha_k, opts.gamma, opts.damping)?;
        let l = opts.l_sph;
        let layout = RealLayout::new(l);
        let dim = if axisymmetric {
            layout.axisymmetric_len()
        } else {
            layout.len()
        };
        let cops = ComplexOps::new(l);
        let (a0c, acc) = complex_operators(&cops, &coeffs.rates());
        let a0r = layout.to_real(&a0c)?;
        let acr = [
            layout.to_real(&acc[0])?,
            layout.to_real(&acc[1])?,
            layout.to_real(&acc[2])?,
        ];
        let (kl, ku) = bandwidths(&[&a0r, &acr[0], &acr[1], &acr[2]], dim);
        let a0 = to_band(&a0r, dim, kl, ku);
        let ac = [
            to_band(&acr[0], dim, kl, ku),
            to_band(&acr[1], dim, kl, ku),
            to_band(&acr[2], dim, kl, ku),
        ];
        let pos = |e: (usize, i64)| {
            layout
                .entries
                .iter()
                .position(|x| *x == e)
                .filter(|p| *p < dim)
        };
        let moment_idx = [pos((1, 1)), pos((1, -1)), pos((1, 0))];
        let tail_idx = (0..dim).filter(|&i| layout.entries[i].0 + 1 >= l).collect();
        Ok(Self {
            frame: vec3::frame_with_axis(n),
            layout,
            dim,
            a0,
            ac,
            coeffs,
            params: *params,
            alpha_k,
            moment_idx,
            tail_idx,
            opts: *opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coefficients(&self) -> &NeelCoefficients {
        &self.coeffs
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        self.a0.bandwidths()
    }

    pub fn layout(&self) -> &RealLayout {
        &self.layout
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.dim < self.layout.len()
    }

    /// Coefficients of the uniform density.
    pub fn uniform_state(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        y[0] = 1.0 / (4.0 * std::f64::consts::PI).sqrt();
        y
    }

    fn to_frame(&self, h: Vec3) -> Vec3 {
        vec3::mat_t_vec(&self.frame, h)
    }

    fn check_field(&self, h: Vec3) -> Result<()> {
        if self.is_axisymmetric() && h[0].hypot(h[1]) > 1e-9 * vec3::norm(h) {
            return Err(Error::invalid(
                "field leaves the symmetry axis of an axisymmetric solve",
            ));
        }
        Ok(())
    }

    /// out = A(h) y with h given in the world frame.
    pub fn apply(&self, h_world: Vec3, y: &[f64], out: &mut [f64]) {
        let h = self.to_frame(h_world);
        self.a0.mul_vec(y, out);
        for c in 0..3 {
            if h[c] != 0.0 {
                self.ac[c].mul_vec_add(h[c], y, out);
            }
        }
    }

    fn apply_rate(&self, hd_world: Vec3, y: &[f64], out: &mut [f64]) {
        let hd = self.to_frame(hd_world);
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..3 {
            if hd[c] != 0.0 {
                self.ac[c].mul_vec_add(hd[c], y, out);
            }
        }
    }

    /// Mean moment [A m²] in the world frame.
    pub fn moment(&self, y: &[f64]) -> Vec3 {
        let s = (4.0 * std::f64::consts::PI / 3.0).sqrt() * self.params.m0();
        let mf: Vec3 = std::array::from_fn(|c| self.moment_idx[c].map_or(0.0, |i| s * y[i]));
        vec3::mat_vec(&self.frame, mf)
    }

    /// Relative energy of the two highest degrees.
    pub fn tail_energy(&self, y: &[f64]) -> f64 {
        let total: f64 = y.iter().map(|v| v * v).sum();
        let tail: f64 = self.tail_idx.iter().map(|&i| y[i] * y[i]).sum();
        tail / total
    }

    /// Density value in direction `m` (unit vector, world frame).
    pub fn pdf_at(&self, y: &[f64], m: Vec3) -> f64 {
        let mf = self.to_frame(m);
        let phi = mf[1].atan2(mf[0]);
        let mut s = vec![0.0; self.layout.len()];
        real_harmonics(&self.layout, mf[2].clamp(-1.0, 1.0), phi, &mut s);
        y.iter().zip(&s).map(|(a, b)| a * b).sum()
    }

    /// Galerkin projection of the normalized Boltzmann density for the static
    /// field `h` (world frame).
    pub fn project_boltzmann(&self, h: Vec3) -> Vec<f64> {
        let xi = vec3::scale(self.params.beta(), self.to_frame(h));
        let shift = vec3::norm(xi) + self.alpha_k;
        let nt = (2 * self.layout.l + 24).max(64);
        let nphi = 2 * nt;
        let (u, w) = gauss_legendre(nt);
        let mut y = vec![0.0; self.dim];
        let mut s = vec![0.0; self.layout.len()];
        let mut z = 0.0;
        let dphi = 2.0 * std::f64::consts::PI / nphi as f64;
        for (ui, wi) in u.iter().zip(&w) {
            let st = (1.0 - ui * ui).sqrt();
            for j in 0..nphi {
                let phi = j as f64 * dphi;
                let m = [st * phi.cos(), st * phi.sin(), *ui];
                let p = (vec3::dot(xi, m) + self.alpha_k * ui * ui - shift).exp() * wi * dphi;
                z += p;
                real_harmonics(&self.layout, *ui, phi, &mut s);
                for k in 0..self.dim {
                    y[k] += p * s[k];
                }
            }
        }
        y.iter_mut().for_each(|v| *v /= z);
        y
    }

    fn error_norm(&self, y: &[f64], y_out: &[f64], err: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            let sk = self.opts.abs_tol + self.opts.rel_tol * y[i].abs().max(y_out[i].abs());
            acc += (err[i] / sk).powi(2);
        }
        (acc / self.dim as f64).sqrt()
    }

    /// Integrates `y` from `t0` to `t1`, calling `on_sample(j, m)` with the
    /// mean moment at every `samples[j]` inside [t0, t1] (sorted ascending).
    pub fn integrate(
        &self,
        traj: &dyn FieldTrajectory,
        y: &mut [f64],
        t0: f64,
        t1: f64,
        samples: &[f64],
        mut on_sample: impl FnMut(usize, Vec3),
    ) -> Result<IntegrationStats> {
        let n = self.dim;
        let mut stats = IntegrationStats::default();
        let mut next_sample = samples.partition_point(|&s| s < t0);
        while next_sample < samples.len() && samples[next_sample] == t0 {
            on_sample(next_sample, self.moment(y));
            next_sample += 1;
        }
        if t1 <= t0 {
            return Ok(stats);
        }
        let span = t1 - t0;
        let tau = self.coeffs.tau();
        let mut h = (1e-3 * span).min(if tau.is_finite() {
            0.1 * tau
        } else {
            f64::INFINITY
        });
        let mut t = t0;
        let mut ctrl = Controller {
            first: true,
            reject: false,
            err_old: 1.0,
            h_old: h,
        };
        let mut w = self.a0.clone();
        let mut f0 = vec![0.0; n];
        let mut ft = vec![0.0; n];
        let mut ks: Vec<Vec<f64>> = vec![vec![0.0; n]; 5];
        let mut yt = vec![0.0; n];
        let mut ft_stage = vec![0.0; n];
        let mut yerr = vec![0.0; n];
        let mut yout = vec![0.0; n];
        let mut moments_old = self.moment(y);
        let idx: Vec<usize> = self.moment_idx.iter().flatten().copied().collect();
        while t < t1 {
            if t + h > t1 {
                h = t1 - t;
            }
            let hw = traj.field(t);
            self.check_field(self.to_frame(hw))?;
            let hf = self.to_frame(hw);
            self.apply(hw, y, &mut f0);
            self.apply_rate(traj.field_rate(t), y, &mut ft);
            loop {
                w.fill_from(&self.a0);
                for c in 0..3 {
                    if hf[c] != 0.0 {
                        w.axpby(1.0, hf[c], &self.ac[c]);
                    }
                }
                w.scale_shift(-1.0, 1.0 / (GAM * h));
                let lu = w.clone().factor()?;
                let ih = 1.0 / h;
                // stage 1
                for i in 0..n {
                    ks[0][i] = f0[i] + h * D1 * ft[i];
                }
                lu.solve(&mut ks[0]);
                // stage 2
                for i in 0..n {
                    yt[i] = y[i] + A21 * ks[0][i];
                }
                self.apply(traj.field(t + C2 * h), &yt, &mut ft_stage);
                for i in 0..n {
                    ks[1][i] = ft_stage[i] + h * D2 * ft[i] + C21 * ih * ks[0][i];
                }
                lu.solve(&mut ks[1]);
                // stage 3
                for i in 0..n {
                    yt[i] = y[i] + A31 * ks[0][i] + A32 * ks[1][i];
                }
                self.apply(traj.field(t + C3 * h), &yt, &mut ft_stage);
                for i in 0..n {
                    ks[2][i] =
                        ft_stage[i] + h * D3 * ft[i] + ih * (C31 * ks[0][i] + C32 * ks[1][i]);
                }
                lu.solve(&mut ks[2]);
                // stage 4
                for i in 0..n {
                    yt[i] = y[i] + A41 * ks[0][i] + A42 * ks[1][i] + A43 * ks[2][i];
                }
                self.apply(traj.field(t + C4 * h), &yt, &mut ft_stage);
                for i in 0..n {
                    ks[3][i] = ft_stage[i]
                        + h * D4 * ft[i]
                        + ih * (C41 * ks[0][i] + C42 * ks[1][i] + C43 * ks[2][i]);
                }
                lu.solve(&mut ks[3]);
                // stage 5
                for i in 0..n {
                    yt[i] =
                        y[i] + A51 * ks[0][i] + A52 * ks[1][i] + A53 * ks[2][i] + A54 * ks[3][i];
                }
                let h_end = traj.field(t + h);
                self.apply(h_end, &yt, &mut ft_stage);
                for i in 0..n {
                    ks[4][i] = ft_stage[i]
                        + ih * (C51 * ks[0][i] + C52 * ks[1][i] + C53 * ks[2][i] + C54 * ks[3][i]);
                }
                lu.solve(&mut ks[4]);
                // embedded error
                for i in 0..n {
                    yt[i] += ks[4][i];
                }
                self.apply(h_end, &yt, &mut ft_stage);
                for i in 0..n {
                    yerr[i] = ft_stage[i]
                        + ih * (C61 * ks[0][i]
                            + C62 * ks[1][i]
                            + C63 * ks[2][i]
                            + C64 * ks[3][i]
                            + C65 * ks[4][i]);
                }
                lu.solve(&mut yerr);
                for i in 0..n {
                    yout[i] = yt[i] + yerr[i];
                }
                let err = self.error_norm(y, &yout, &yerr);
                match ctrl.judge(err, h) {
                    Ok(h_next) => {
                        stats.steps += 1;
                        let t_new = t + h;
                        // continuous extension on the moment coefficients only
                        while next_sample < samples.len() && samples[next_sample] <= t_new {
                            let s = (samples[next_sample] - t) / h;
                            let s1 = 1.0 - s;
                            let mut yy = vec![0.0; n];
                            for &i in &idx {
                                let k = |j: usize| ks[j][i];
                                let c3 =
                                    E21 * k(0) + E22 * k(1) + E23 * k(2) + E24 * k(3) + E25 * k(4);
                                let c4 =
                                    E31 * k(0) + E32 * k(1) + E33 * k(2) + E34 * k(3) + E35 * k(4);
                                yy[i] = s1 * y[i] + s * (yout[i] + s1 * (c3 + s * c4));
                            }
                            on_sample(next_sample, self.moment(&yy));
                            next_sample += 1;
                        }
                        y.copy_from_slice(&yout);
                        stats.max_tail_energy = stats.max_tail_energy.max(self.tail_energy(y));
                        moments_old = self.moment(y);
                        t = if t1 - t_new < 1e-12 * span { t1 } else { t_new };
                        h = h_next;
                        break;
                    }
                    Err(h_retry) => {
                        stats.rejected += 1;
                        h = h_retry;
                        if h < 1e-14 * span.max(t.abs()) || !h.is_finite() {
                            return Err(Error::numerical(format!(
                                "Fokker-Planck step size underflow at t = {t:.6e} s"
                            )));
                        }
                    }
                }
            }
        }
        let _ = moments_old;
        Ok(stats)
    }
}

/// Mean-moment trace from the Fokker-Planck model.
#[derive(Debug, Clone, PartialEq)]
pub struct FpTrace {
    pub trace: MomentTrace,
    pub stats: IntegrationStats,
    /// Set when the two highest degrees carried more than `tail_tol` of the energy.
    pub tail_warning: bool,
}

/// Periodic steady-state moment trace for a field of period `period`, sampled
/// at `times` ⊂ [0, period), after the configured warm-up from a uniform density.
pub fn fp_solve(
    traj: &dyn FieldTrajectory,
    period: f64,
    times: &[f64],
    n: Vec3,
    alpha_k: f64,
    params: &ParticleParams,
    opts: &FpOptions,
) -> Result<FpTrace> {
    opts.validate()?;
    if !(period > 0.0) {
        return Err(Error::invalid("period must be positive"));
    }
    let (axis, axisym) = match traj.fixed_direction() {
        Some(d) if alpha_k == 0.0 => (d, true),
        Some(d) if vec3::norm(vec3::cross(d, n)) < 1e-12 => (n, true),
        _ => (n, false),
    };
    let sys = FpSystem::new(axis, alpha_k, params, opts, axisym)?;
    let mut y = sys.uniform_state();
    let t0 = -opts.warmup_periods * period;
    let mut moments = vec![vec3::ZERO; times.len()];
    let stats = sys.integrate(traj, &mut y, t0, period, times, |j, m| moments[j] = m)?;
    Ok(FpTrace {
        trace: MomentTrace::new(times.to_vec(), moments)?,
        stats,
        tail_warning: stats.max_tail_energy > opts.tail_tol,
    })
}

/// Convenience wrapper for a drive sequence at position `x`, sampled on the
/// sequence's own time grid.
pub fn fp_solve_sequence(
    seq: &FieldSequence,
    x: Vec3,
    n: Vec3,
    alpha_k: f64,
    params: &ParticleParams,
    opts: &FpOptions,
) -> Result<FpTrace> {
    let traj = SequenceField { seq, x };
    fp_solve(
        &traj,
        seq.period(),
        &seq.sample_times(),
        n,
        alpha_k,
        params,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn particle() -> ParticleParams {
        ParticleParams::with_diameter(20e-9).unwrap()
    }

    #[test]
    fn detailed_balance_relations() {
        let p = particle();
        let ak = p.alpha_k(2500.0);
        let c = neel_coefficients(&p, ak, DEFAULT_GAMMA, 0.3).unwrap();
        let tau = c.tau();
        assert!((c.alpha2 - p.beta() / (2.0 * tau)).abs() < 1e-12 * c.alpha2);
        assert!((c.alpha4 - ak / tau).abs() < 1e-12 * c.alpha4);
        assert!((c.alpha3 * p.beta() - 2.0 * c.alpha1 * ak).abs() < 1e-12 * c.alpha3 * p.beta());
    }

    #[test]
    fn undamped_limit() {
        let p = particle();
        let c = neel_coefficients(&p, 1.0, DEFAULT_GAMMA, 0.0).unwrap();
        assert_eq!(c.alpha2, 0.0);
        assert_eq!(c.alpha4, 0.0);
        assert!(c.tau().is_infinite());
        let d = neel_coefficients(&p, 1.0, DEFAULT_GAMMA, DEFAULT_DAMPING).unwrap();
        assert!(d.tau() > 0.0 && d.tau().is_finite());
    }

    #[test]
    fn probability_row_is_zero() {
        let p = particle();
        let opts = FpOptions {
            l_sph: 10,
            ..Default::default()
        };
        let sys = FpSystem::new([0.0, 0.6, 0.8], 3.0, &p, &opts, false).unwrap();
        let y: Vec<f64> = (0..sys.dim())
            .map(|i| ((i * 7919) % 13) as f64 - 6.0)
            .collect();
        let mut out = vec![0.0; sys.dim()];
        sys.apply([1200.0, -400.0, 300.0], &y, &mut out);
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn boltzmann_state_is_stationary() {
        let p = particle();
        let opts = FpOptions {
            l_sph: 24,
            ..Default::default()
        };
        let ak = 4.0;
        let n = vec3::normalize([1.0, 0.5, -0.3]).unwrap();
        let sys = FpSystem::new(n, ak, &p, &opts, false).unwrap();
        let h = vec3::scale(2.0 / p.beta(), [0.3, -0.8, 0.5]);
        let y = sys.project_boltzmann(h);
        let mut out = vec![0.0; sys.dim()];
        sys.apply(h, &y, &mut out);
        let scale = sys.coefficients().inv_two_tau * y.iter().map(|v| v.abs()).sum::<f64>();
        // rows of the top degrees couple to truncated coefficients
        let res = (0..sys.dim())
            .filter(|&i| sys.layout().entries[i].0 + 2 < opts.l_sph)
            .map(|i| out[i].abs())
            .fold(0.0, f64::max);
        assert!(res < 1e-12 * scale, "residual {res} vs {scale}");
        let m = sys.moment(&y);
        let e = crate::series::mean_moment(h, n, ak, &p, 1e-13).unwrap();
        for c in 0..3 {
            assert!((m[c] - e[c]).abs() < 1e-10 * p.m0(), "{m:?} vs {e:?}");
        }
    }

    #[test]
    fn relaxes_to_equilibrium() {
        let p = particle();
        let opts = FpOptions {
            l_sph: 16,
            ..Default::default()
        };
        let n = vec3::normalize([0.0, 1.0, 1.0]).unwrap();
        let ak = 2.0;
        let h = [1500.0, 800.0, -300.0];
        let sys = FpSystem::new(n, ak, &p, &opts, false).unwrap();
        let mut y = sys.uniform_state();
        let tau = sys.coefficients().tau();
        sys.integrate(&StaticField(h), &mut y, 0.0, 30.0 * tau, &[], |_, _| {})
            .unwrap();
        let m = sys.moment(&y);
        let e = crate::series::mean_moment(h, n, ak, &p, 1e-13).unwrap();
        for c in 0..3 {
            assert!((m[c] - e[c]).abs() < 1e-4 * p.m0(), "{m:?} vs {e:?}");
        }
        assert!((y[0] - sys.uniform_state()[0]).abs() < 1e-14);
    }
}
