//! Configuration files, phantoms, simulated measurements and image output.

use std::path::Path;

use image::{ImageBuffer, Luma, Rgb};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::FpOptions;
use crate::physics::{
    mt_to_am, tm_to_am2, AnisotropyModel, FieldSequence, ParticleParams, ScanGrid,
};
use crate::recon::{MatRef, ReconConfig};
use crate::reduced::SummandRule;
use crate::series::{Truncation, DEFAULT_TOL};
use crate::sysfn::ModelSettings;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub diameter_nm: f64,
    #[serde(rename = "Ms_Am", default = "default_ms")]
    pub ms: f64,
    #[serde(rename = "temperature_K", default = "default_temperature")]
    pub temperature: f64,
}

fn default_ms() -> f64 {
    crate::physics::DEFAULT_MS
}

fn default_temperature() -> f64 {
    crate::physics::DEFAULT_TEMPERATURE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnisotropyConfig {
    Aligned {
        #[serde(rename = "K_anis")]
        k_anis: f64,
        easy_axis: Vec3,
    },
    FluidB3 {
        #[serde(rename = "K_max")]
        k_max: f64,
        q: f64,
        /// Field magnitude where K reaches K_max [mT/μ0]; defaults to the
        /// field at the corner of the drive-covered region.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        h_mt: Option<f64>,
    },
    Isotropic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    /// Diagonal of the gradient matrix [T/m/μ0].
    #[serde(rename = "gradient_Tm")]
    pub gradient: Vec3,
    #[serde(rename = "amplitudes_mT")]
    pub amplitudes: [f64; 2],
    #[serde(default)]
    pub phases: [f64; 2],
    /// Scanner clock the dividers refer to [Hz].
    #[serde(rename = "f_base_Hz")]
    pub f_base: f64,
    pub dividers: [u64; 2],
    #[serde(rename = "sample_rate_Hz")]
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    pub fov_mm: [f64; 2],
    #[serde(default)]
    pub center_mm: [f64; 2],
}

/// Phantom description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhantomSpec {
    Snake,
    Resolution { distance_mm: f64 },
    Delta { x_mm: f64, y_mm: f64 },
    Disk { radius_mm: f64 },
}

/// Complete run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub particle: ParticleConfig,
    pub anisotropy: AnisotropyConfig,
    pub sequence: SequenceConfig,
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<FpOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_tol: Option<f64>,
    /// Summand selection of the reduced model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summand_rule: Option<SummandRule>,
    /// Receive-coil directions; e_x and e_y when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phantom: Option<PhantomSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recon: Option<ReconConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn particle(&self) -> Result<ParticleParams> {
        ParticleParams::new(
            self.particle.diameter_nm * 1e-9,
            self.particle.ms,
            self.particle.temperature,
        )
    }

    pub fn sequence(&self) -> Result<FieldSequence> {
        let s = &self.sequence;
        FieldSequence::from_dividers(
            s.gradient.map(tm_to_am2),
            s.amplitudes.map(mt_to_am),
            s.phases,
            s.f_base,
            s.dividers,
            s.sample_rate,
        )
    }

    pub fn anisotropy(&self) -> Result<AnisotropyModel> {
        match self.anisotropy {
            AnisotropyConfig::Aligned { k_anis, easy_axis } => {
                AnisotropyModel::aligned(easy_axis, k_anis)
            }
            AnisotropyConfig::FluidB3 { k_max, q, h_mt } => {
                let h = match h_mt {
                    Some(v) => mt_to_am(v),
                    None => self.sequence()?.scan_boundary_field(),
                };
                AnisotropyModel::fluid_b3(k_max, q, h)
            }
            AnisotropyConfig::Isotropic => Ok(AnisotropyModel::isotropic()),
        }
    }

    pub fn grid(&self) -> Result<ScanGrid> {
        let g = &self.grid;
        let mut grid = ScanGrid::new(g.nx, g.ny, [g.fov_mm[0] * 1e-3, g.fov_mm[1] * 1e-3])?;
        grid.center = [g.center_mm[0] * 1e-3, g.center_mm[1] * 1e-3, 0.0];
        Ok(grid)
    }

    pub fn settings(&self) -> Result<ModelSettings> {
        let tol = self.series_tol.unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(Error::invalid("series_tol must be positive"));
        }
        let fp = self.fp.unwrap_or_default();
        fp.validate()?;
        Ok(ModelSettings {
            truncation: Truncation::Adaptive { tol },
            fp,
            summand_rule: self.summand_rule.unwrap_or_default(),
        })
    }

    pub fn channels(&self) -> Vec<Vec3> {
        self.channels
            .clone()
            .unwrap_or_else(crate::sysfn::default_channels)
    }
}

/// Concentration values on a scan grid (x fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub grid: ScanGrid,
    pub values: Vec<f64>,
    pub description: String,
}

/// Axis-aligned rectangle [x0, x1] × [y0, y1] in metres relative to the grid centre.
type Rect = [f64; 4];

fn rasterize(grid: &ScanGrid, rects: &[Rect], description: String) -> Result<Phantom> {
    let half = [0.5 * grid.fov[0], 0.5 * grid.fov[1]];
    let eps = 1e-9;
    for r in rects {
        if r[0] < -half[0] - eps
            || r[1] > half[0] + eps
            || r[2] < -half[1] - eps
            || r[3] > half[1] + eps
        {
            return Err(Error::invalid(format!(
                "phantom geometry '{description}' leaves the field of view"
            )));
        }
    }
    let mut values = vec![0.0; grid.len()];
    for iy in 0..grid.ny {
        for ix in 0..grid.nx {
            let p = grid.coord(ix, iy);
            let (x, y) = (p[0] - grid.center[0], p[1] - grid.center[1]);
            // half-open cells so that centres on a shared edge land in exactly one rod
            let inside = |v: f64, lo: f64, hi: f64| v >= lo - eps && v < hi - eps;
            if rects
                .iter()
                .any(|r| inside(x, r[0], r[1]) && inside(y, r[2], r[3]))
            {
                values[iy * grid.nx + ix] = 1.0;
            }
        }
    }
    Ok(Phantom {
        grid: *grid,
        values,
        description,
    })
}

/// Rasterizes a phantom by cell-centre inclusion.
pub fn phantom_generate(spec: &PhantomSpec, grid: &ScanGrid) -> Result<Phantom> {
    grid.validate()?;
    let mm = 1e-3;
    match *spec {
        PhantomSpec::Snake => {
            // five non-overlapping 2.5 mm rods of 20, 17.5, 15, 8.75 and 5 mm
            let rects = [
                [-10.0, 10.0, 7.5, 10.0],
                [7.5, 10.0, -10.0, 7.5],
                [-7.5, 7.5, -10.0, -7.5],
                [-7.5, -5.0, -7.5, 1.25],
                [-5.0, 0.0, -1.25, 1.25],
            ]
            .map(|r: [f64; 4]| r.map(|v| v * mm));
            rasterize(grid, &rects, "snake".into())
        }
        PhantomSpec::Resolution { distance_mm } => {
            if !(distance_mm > 0.0) {
                return Err(Error::invalid("rod distance must be positive"));
            }
            let (w, l) = (2.5, 20.0);
            let inner = 0.5 * distance_mm;
            let rects = [
                [-inner - w, -inner, -0.5 * l, 0.5 * l],
                [inner, inner + w, -0.5 * l, 0.5 * l],
            ]
            .map(|r: [f64; 4]| r.map(|v| v * mm));
            rasterize(grid, &rects, format!("resolution {distance_mm} mm"))
        }
        PhantomSpec::Delta { x_mm, y_mm } => {
            let [dx, dy] = grid.spacing();
            let fx = (x_mm * mm + 0.5 * grid.fov[0]) / dx - 0.5;
            let fy = (y_mm * mm + 0.5 * grid.fov[1]) / dy - 0.5;
            let (ix, iy) = (fx.round(), fy.round());
            if ix < 0.0 || iy < 0.0 || ix >= grid.nx as f64 || iy >= grid.ny as f64 {
                return Err(Error::invalid("delta position leaves the field of view"));
            }
            let mut values = vec![0.0; grid.len()];
            values[iy as usize * grid.nx + ix as usize] = 1.0;
            Ok(Phantom {
                grid: *grid,
                values,
                description: format!("delta ({x_mm}, {y_mm}) mm"),
            })
        }
        PhantomSpec::Disk { radius_mm } => {
            let r = radius_mm * mm;
            if !(r > 0.0) || r > 0.5 * grid.fov[0] || r > 0.5 * grid.fov[1] {
                return Err(Error::invalid(
                    "disk radius must be positive and inside the field of view",
                ));
            }
            let values = grid
                .positions()
                .iter()
                .map(|p| {
                    let (x, y) = (p[0] - grid.center[0], p[1] - grid.center[1]);
                    if x.hypot(y) <= r {
                        1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(Phantom {
                grid: *grid,
                values,
                description: format!("disk {radius_mm} mm"),
            })
        }
    }
}

/// Simulated frequency-domain measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub u: Vec<Complex64>,
    /// Noise standard deviation per row (complex, E|n|² = σ²).
    pub sigma: Vec<f64>,
}

/// `u = S c + n` with complex white noise scaled so that `‖Sc‖/‖n‖` matches
/// `snr_db` in expectation. An infinite SNR gives the noiseless product.
pub fn simulate_measurement(
    s: MatRef<'_>,
    c: &[f64],
    snr_db: f64,
    seed: u64,
) -> Result<Measurement> {
    if c.len() != s.cols {
        return Err(Error::invalid(
            "phantom size does not match the system matrix",
        ));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR must be a number"));
    }
    let clean: Vec<Complex64> = (0..s.rows)
        .map(|i| s.row(i).iter().zip(c).map(|(a, x)| a * x).sum())
        .collect();
    let energy = clean.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let sigma = if snr_db == f64::INFINITY {
        0.0
    } else if energy > 0.0 {
        energy / ((s.rows as f64).sqrt() * 10f64.powf(snr_db / 20.0))
    } else {
        // no signal: unit-σ noise keeps the call meaningful
        1.0
    };
    let mut u = clean;
    if sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, sigma / 2f64.sqrt()).expect("finite sigma");
        for v in u.iter_mut() {
            *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    Ok(Measurement {
        u,
        sigma: vec![sigma; s.rows],
    })
}

/// Pixels per grid cell in rendered images.
pub const CELL_PIXELS: u32 = 8;

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match i as u32 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Complex colormap: hue is the phase, brightness the magnitude relative to
/// the row maximum. Row order is x fastest; +y points up in the image.
pub fn complex_map_image(
    row: &[Complex64],
    grid: &ScanGrid,
) -> Result<ImageBuffer<Rgb<u8>, Vec<u8>>> {
    if row.len() != grid.len() {
        return Err(Error::invalid("row length does not match the grid"));
    }
    let max = row.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let (w, h) = (grid.nx as u32 * CELL_PIXELS, grid.ny as u32 * CELL_PIXELS);
    Ok(ImageBuffer::from_fn(w, h, |px, py| {
        let ix = (px / CELL_PIXELS) as usize;
        let iy = grid.ny - 1 - (py / CELL_PIXELS) as usize;
        let v = row[iy * grid.nx + ix];
        let mag = if max > 0.0 { v.norm() / max } else { 0.0 };
        let hue = v.arg() / (2.0 * std::f64::consts::PI);
        Rgb(hsv_to_rgb(hue, 1.0, mag))
    }))
}

pub fn render_complex_map(row: &[Complex64], grid: &ScanGrid, path: &Path) -> Result<()> {
    complex_map_image(row, grid)?.save(path)?;
    Ok(())
}

/// Grayscale image of a real vector on the grid, scaled to its maximum.
pub fn render_grayscale(values: &[f64], grid: &ScanGrid, path: &Path) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::invalid("value count does not match the grid"));
    }
    let max = values.iter().copied().fold(0.0, f64::max);
    let (w, h) = (grid.nx as u32 * CELL_PIXELS, grid.ny as u32 * CELL_PIXELS);
    let img = ImageBuffer::from_fn(w, h, |px, py| {
        let ix = (px / CELL_PIXELS) as usize;
        let iy = grid.ny - 1 - (py / CELL_PIXELS) as usize;
        let v = values[iy * grid.nx + ix].max(0.0);
        Luma([if max > 0.0 {
            (255.0 * v / max).round() as u8
        } else {
            0
        }])
    });
    img.save(path)?;
    Ok(())
}

/// Contour levels drawn on error heatmaps.
pub const CONTOUR_LEVELS: [f64; 4] = [0.001, 0.005, 0.01, 0.05];

/// Heatmap of a diameter × K map on a log color scale with contour lines
/// between cells on opposite sides of each level. Missing cells are gray.
pub fn render_heatmap(values: &[Option<f64>], n_d: usize, n_k: usize, path: &Path) -> Result<()> {
    if values.len() != n_d * n_k || values.is_empty() {
        return Err(Error::invalid("heatmap shape mismatch"));
    }
    let cell = 2 * CELL_PIXELS;
    let logs: Vec<Option<f64>> = values
        .iter()
        .map(|v| v.filter(|x| *x > 0.0).map(f64::log10))
        .collect();
    let (lo, hi) = logs
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let span = if hi > lo { hi - lo } else { 1.0 };
    let at = |i: usize, j: usize| values[i * n_k + j];
    // K along x, diameter along y (upwards)
    let img = ImageBuffer::from_fn(n_k as u32 * cell, n_d as u32 * cell, |px, py| {
        let j = (px / cell) as usize;
        let i = n_d - 1 - (py / cell) as usize;
        let (lx, ly) = (px % cell, py % cell);
        let v = at(i, j);
        let crosses = |other: Option<f64>| match (v, other) {
            (Some(a), Some(b)) => CONTOUR_LEVELS.iter().any(|&c| (a - c) * (b - c) < 0.0),
            _ => false,
        };
        let edge = (lx == cell - 1 && j + 1 < n_k && crosses(at(i, j + 1)))
            || (ly == cell - 1 && i > 0 && crosses(at(i - 1, j)));
        if edge {
            return Rgb([255, 255, 255]);
        }
        match logs[i * n_k + j] {
            Some(l) => Rgb(hsv_to_rgb(0.66 * (1.0 - (l - lo) / span), 0.9, 0.9)),
            None => Rgb([128, 128, 128]),
        }
    });
    img.save(path)?;
    Ok(())
}
