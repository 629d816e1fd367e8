//! Physical constants, particle parameters, drive-field sequences and
//! anisotropy models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};

/// Vacuum permeability [T m / A].
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Boltzmann constant [J / K].
pub const KB: f64 = 1.380649e-23;
pub const DEFAULT_TEMPERATURE: f64 = 293.0;
pub const DEFAULT_MS: f64 = 474_000.0;

/// Converts a field given in mT/μ0 into A/m.
pub fn mt_to_am(mt: f64) -> f64 {
    mt * 1e-3 / MU0
}

/// Converts a gradient given in T/m/μ0 into A/m².
pub fn tm_to_am2(tm: f64) -> f64 {
    tm / MU0
}

/// Monodisperse particle description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleParams {
    /// Core diameter [m].
    pub diameter: f64,
    /// Saturation magnetization [A/m].
    pub ms: f64,
    /// Temperature [K].
    pub temperature: f64,
}

impl ParticleParams {
    pub fn new(diameter: f64, ms: f64, temperature: f64) -> Result<Self> {
        for (name, v) in [
            ("diameter", diameter),
            ("Ms", ms),
            ("temperature", temperature),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            diameter,
            ms,
            temperature,
        })
    }

    /// Particle with default magnetization and temperature.
    pub fn with_diameter(diameter: f64) -> Result<Self> {
        Self::new(diameter, DEFAULT_MS, DEFAULT_TEMPERATURE)
    }

    /// Core volume [m³].
    pub fn volume(&self) -> f64 {
        std::f64::consts::PI * self.diameter.powi(3) / 6.0
    }

    /// Magnetic moment magnitude [A m²].
    pub fn m0(&self) -> f64 {
        self.ms * self.volume()
    }

    /// Field coupling constant [m / A].
    pub fn beta(&self) -> f64 {
        MU0 * self.m0() / (KB * self.temperature)
    }

    /// Dimensionless anisotropy strength for an anisotropy constant `k` [J/m³].
    pub fn alpha_k(&self, k: f64) -> f64 {
        self.beta() * k / (MU0 * self.ms)
    }
}

/// Spatial description of the easy axis and anisotropy strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnisotropyModel {
    /// Immobilized particles with a common easy axis.
    Aligned { easy_axis: Vec3, k_anis: f64 },
    /// Fluid particles: radial easy axis, power-law strength.
    FluidB3 { k_max: f64, q: f64, h: f64 },
}

impl AnisotropyModel {
    pub fn aligned(easy_axis: Vec3, k_anis: f64) -> Result<Self> {
        let m = Self::Aligned { easy_axis, k_anis };
        m.validate()?;
        Ok(m)
    }

    pub fn fluid_b3(k_max: f64, q: f64, h: f64) -> Result<Self> {
        let m = Self::FluidB3 { k_max, q, h };
        m.validate()?;
        Ok(m)
    }

    /// Isotropic particles (no anisotropy).
    pub fn isotropic() -> Self {
        Self::Aligned {
            easy_axis: vec3::E3,
            k_anis: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Aligned { easy_axis, k_anis } => {
                if (vec3::norm(easy_axis) - 1.0).abs() > 1e-12 {
                    return Err(Error::invalid("easy axis must have unit length"));
                }
                if !(k_anis >= 0.0 && k_anis.is_finite()) {
                    return Err(Error::invalid("K_anis must be nonnegative"));
                }
            }
            Self::FluidB3 { k_max, q, h } => {
                if !(k_max >= 0.0 && k_max.is_finite()) {
                    return Err(Error::invalid("K_max must be nonnegative"));
                }
                if !(q > 0.0 && q.is_finite()) {
                    return Err(Error::invalid("exponent q must be positive"));
                }
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::invalid("boundary field h must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Anisotropy strength α_K and easy axis at position `x`.
    ///
    /// For the fluid model the easy axis follows the selection field; at the
    /// field-free centre α_K is 0 and the axis is reported as e₃.
    pub fn at(&self, params: &ParticleParams, gradient: Vec3, x: Vec3) -> (f64, Vec3) {
        match *self {
            Self::Aligned { easy_axis, k_anis } => (params.alpha_k(k_anis), easy_axis),
            Self::FluidB3 { k_max, q, h } => {
                let hs = [gradient[0] * x[0], gradient[1] * x[1], gradient[2] * x[2]];
                let mag = vec3::norm(hs);
                if mag == 0.0 {
                    return (0.0, vec3::E3);
                }
                let alpha = params.alpha_k(k_max) * (mag / h).powf(q);
                (alpha, vec3::scale(1.0 / mag, hs))
            }
        }
    }

    /// Whether the easy axis and strength are the same at every position.
    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Aligned { .. })
    }
}

/// Two-dimensional Lissajous drive-field sequence with a linear selection field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSequence {
    /// Diagonal of the gradient matrix [A/m²].
    pub gradient: Vec3,
    /// Drive amplitudes (A_x, A_y) [A/m].
    pub amplitudes: [f64; 2],
    /// Drive phases (φ_x, φ_y) [rad].
    pub phases: [f64; 2],
    /// Base frequency f_B [Hz].
    pub f_base: f64,
    /// Frequency divider N_B.
    pub divider: u32,
    /// Sampling rate [Hz].
    pub sample_rate: f64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl FieldSequence {
    pub fn new(
        gradient: Vec3,
        amplitudes: [f64; 2],
        phases: [f64; 2],
        f_base: f64,
        divider: u32,
        sample_rate: f64,
    ) -> Result<Self> {
        let seq = Self {
            gradient,
            amplitudes,
            phases,
            f_base,
            divider,
            sample_rate,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Builds the sequence from a scanner clock and the integer dividers of the
    /// two drive channels, `f_x = clock / div_x`, `f_y = clock / div_y`.
    ///
    /// The dividers must reduce to consecutive integers `N_B + 1` and `N_B`.
    pub fn from_dividers(
        gradient: Vec3,
        amplitudes: [f64; 2],
        phases: [f64; 2],
        clock: f64,
        dividers: [u64; 2],
        sample_rate: f64,
    ) -> Result<Self> {
        let [dx, dy] = dividers;
        if dx == 0 || dy == 0 {
            return Err(Error::invalid("dividers must be positive"));
        }
        let g = gcd(dx, dy);
        let (nx, ny) = (dx / g, dy / g);
        if nx != ny + 1 {
            return Err(Error::invalid(format!(
                "dividers {dx}/{dy} reduce to {nx}/{ny}, expected consecutive N_B+1/N_B"
            )));
        }
        let divider = u32::try_from(ny).map_err(|_| Error::invalid("divider too large"))?;
        Self::new(
            gradient,
            amplitudes,
            phases,
            clock / g as f64,
            divider,
            sample_rate,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.gradient.iter().any(|g| *g == 0.0 || !g.is_finite()) {
            return Err(Error::invalid("gradient must be invertible"));
        }
        if self.divider < 1 {
            return Err(Error::invalid("divider must be at least 1"));
        }
        if !(self.f_base > 0.0 && self.sample_rate > 0.0) {
            return Err(Error::invalid("frequencies must be positive"));
        }
        if self
            .amplitudes
            .iter()
            .chain(self.phases.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("amplitudes and phases must be finite"));
        }
        let n = self.period() * self.sample_rate;
        if (n - n.round()).abs() > 1e-6 * n.max(1.0) || n.round() < 2.0 {
            return Err(Error::invalid(format!(
                "sampling rate does not divide the period evenly ({n} samples)"
            )));
        }
        Ok(())
    }

    pub fn f_x(&self) -> f64 {
        self.f_base / (self.divider as f64 + 1.0)
    }

    pub fn f_y(&self) -> f64 {
        self.f_base / self.divider as f64
    }

    /// Sequence period T_D [s].
    pub fn period(&self) -> f64 {
        let nb = self.divider as f64;
        nb * (nb + 1.0) / self.f_base
    }

    /// Samples per period.
    pub fn n_samples(&self) -> usize {
        (self.period() * self.sample_rate).round() as usize
    }

    /// Number of one-sided frequency bins, `n_samples/2 + 1`.
    pub fn n_freq(&self) -> usize {
        self.n_samples() / 2 + 1
    }

    pub fn sample_times(&self) -> Vec<f64> {
        let dt = 1.0 / self.sample_rate;
        (0..self.n_samples()).map(|j| j as f64 * dt).collect()
    }

    /// True when only the x channel is driven.
    pub fn is_one_dimensional(&self) -> bool {
        self.amplitudes[1] == 0.0
    }

    pub fn drive_field(&self, t: f64) -> Vec3 {
        let tau = 2.0 * std::f64::consts::PI;
        [
            self.amplitudes[0] * (tau * self.f_x() * t + self.phases[0]).sin(),
            self.amplitudes[1] * (tau * self.f_y() * t + self.phases[1]).sin(),
            0.0,
        ]
    }

    pub fn drive_field_rate(&self, t: f64) -> Vec3 {
        let tau = 2.0 * std::f64::consts::PI;
        let (wx, wy) = (tau * self.f_x(), tau * self.f_y());
        [
            self.amplitudes[0] * wx * (wx * t + self.phases[0]).cos(),
            self.amplitudes[1] * wy * (wy * t + self.phases[1]).cos(),
            0.0,
        ]
    }

    pub fn selection_field(&self, x: Vec3) -> Vec3 {
        [
            self.gradient[0] * x[0],
            self.gradient[1] * x[1],
            self.gradient[2] * x[2],
        ]
    }

    /// Total field H(x, t) = Gx + H_D(t) [A/m].
    pub fn applied_field(&self, x: Vec3, t: f64) -> Vec3 {
        vec3::add(self.selection_field(x), self.drive_field(t))
    }

    /// Position of the field-free point at time `t`.
    pub fn ffp_position(&self, t: f64) -> Vec3 {
        let hd = self.drive_field(t);
        [
            -hd[0] / self.gradient[0],
            -hd[1] / self.gradient[1],
            -hd[2] / self.gradient[2],
        ]
    }

    /// Largest selection-field magnitude reached by the field-free point, i.e.
    /// the field at the corner of the drive-field covered region.
    pub fn scan_boundary_field(&self) -> f64 {
        self.amplitudes[0].hypot(self.amplitudes[1])
    }
}

/// Regular grid of cell centres in the x-y plane, row-major with x fastest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub nx: usize,
    pub ny: usize,
    /// Extent of the grid along x and y [m].
    pub fov: [f64; 2],
    /// Grid centre [m].
    #[serde(default)]
    pub center: Vec3,
}

impl ScanGrid {
    pub fn new(nx: usize, ny: usize, fov: [f64; 2]) -> Result<Self> {
        let g = Self {
            nx,
            ny,
            fov,
            center: vec3::ZERO,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::invalid("grid must contain at least one position"));
        }
        if self.fov.iter().any(|f| !(*f >= 0.0 && f.is_finite())) {
            return Err(Error::invalid("field of view must be nonnegative"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell spacing along x and y [m].
    pub fn spacing(&self) -> [f64; 2] {
        [self.fov[0] / self.nx as f64, self.fov[1] / self.ny as f64]
    }

    pub fn coord(&self, ix: usize, iy: usize) -> Vec3 {
        let [dx, dy] = self.spacing();
        [
            self.center[0] - 0.5 * self.fov[0] + (ix as f64 + 0.5) * dx,
            self.center[1] - 0.5 * self.fov[1] + (iy as f64 + 0.5) * dy,
            self.center[2],
        ]
    }

    pub fn positions(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(self.len());
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out.push(self.coord(ix, iy));
            }
        }
        out
    }

    /// Checks that every cell centre lies in the region swept by the FFP.
    pub fn check_within(&self, seq: &FieldSequence) -> Result<()> {
        let lim = [
            seq.amplitudes[0].abs() / seq.gradient[0].abs(),
            seq.amplitudes[1].abs() / seq.gradient[1].abs(),
        ];
        for p in self.positions() {
            for d in 0..2 {
                if p[d].abs() > lim[d] * (1.0 + 1e-9) + 1e-12 {
                    return Err(Error::invalid(format!(
                        "grid position {:?} lies outside the drive-field covered region",
                        p
                    )));
                }
            }
        }
        Ok(())
    }
}
