//! Time-domain and system-matrix error measures and (D, K) sweeps.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::physics::{AnisotropyModel, FieldSequence, ParticleParams};
use crate::series::Truncation;
use crate::sysfn::{simulate_trace, Model, ModelSettings};
use crate::trace::MomentTrace;
use crate::vec3::{self, Vec3};

/// Time-domain error of one position: mean Euclidean distance of the time
/// derivatives over the maximal reference derivative magnitude.
pub fn err_td_single(reference: &MomentTrace, approx: &MomentTrace) -> Result<f64> {
    if reference.len() != approx.len() {
        return Err(Error::invalid("traces have different sample counts"));
    }
    if reference.len() < 2 {
        return Err(Error::invalid("at least two samples are required"));
    }
    let dr = reference.derivative();
    let da = approx.derivative();
    let peak = dr.iter().map(|d| vec3::norm(*d)).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::invalid("reference trace has a vanishing derivative"));
    }
    let mean = dr
        .iter()
        .zip(&da)
        .map(|(a, b)| vec3::norm(vec3::sub(*a, *b)))
        .sum::<f64>()
        / dr.len() as f64;
    Ok(mean / peak)
}

/// Maximum of the per-position time-domain error.
pub fn err_td(reference: &[MomentTrace], approx: &[MomentTrace]) -> Result<f64> {
    if reference.len() != approx.len() || reference.is_empty() {
        return Err(Error::invalid("trace sets differ in size or are empty"));
    }
    reference
        .iter()
        .zip(approx)
        .map(|(r, a)| err_td_single(r, a))
        .try_fold(0.0f64, |acc, e| e.map(|v| acc.max(v)))
}

/// Row error `‖s_ref − s_approx‖₂ / (√N ‖s_ref‖_∞)`.
pub fn err_sm(reference: &[Complex64], approx: &[Complex64]) -> Result<f64> {
    if reference.len() != approx.len() || reference.is_empty() {
        return Err(Error::invalid("rows differ in length or are empty"));
    }
    let inf = reference.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if inf == 0.0 {
        return Err(Error::invalid("reference row is zero"));
    }
    let diff = reference
        .iter()
        .zip(approx)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(diff / ((reference.len() as f64).sqrt() * inf))
}

/// Root-mean-square error normalized by the value range of `truth`.
pub fn nrmse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() || truth.is_empty() {
        return Err(Error::invalid("vectors differ in length or are empty"));
    }
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if hi <= lo {
        return Err(Error::invalid("ground truth is constant"));
    }
    let mse = truth
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(mse.sqrt() / (hi - lo))
}

/// Parameter sweep over particle diameter and anisotropy constant with the
/// easy axis colinear to a 1D drive.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    /// Diameters [m].
    pub diameters: Vec<f64>,
    /// Anisotropy constants [J/m³].
    pub k_values: Vec<f64>,
    /// Field offsets along the drive axis [A/m].
    pub offsets: Vec<f64>,
    pub sequence: FieldSequence,
    /// Template for Ms and temperature.
    pub particle: ParticleParams,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.diameters.is_empty() || self.k_values.is_empty() || self.offsets.is_empty() {
            return Err(Error::invalid("sweep ranges must be nonempty"));
        }
        if !self.sequence.is_one_dimensional() {
            return Err(Error::invalid("sweeps need a 1D sequence"));
        }
        self.sequence.validate()
    }

    fn positions(&self) -> Vec<Vec3> {
        self.offsets
            .iter()
            .map(|h| [h / self.sequence.gradient[0], 0.0, 0.0])
            .collect()
    }

    fn cell(&self, i: usize, j: usize) -> Result<(ParticleParams, AnisotropyModel)> {
        let p = ParticleParams::new(
            self.diameters[i],
            self.particle.ms,
            self.particle.temperature,
        )?;
        let a = AnisotropyModel::aligned(vec3::E1, self.k_values[j])?;
        Ok((p, a))
    }

    fn cells(&self) -> Vec<(usize, usize)> {
        (0..self.diameters.len())
            .flat_map(|i| (0..self.k_values.len()).map(move |j| (i, j)))
            .collect()
    }
}

/// Values on the (D, K) grid, diameter-major; `None` marks failed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMap<T> {
    pub diameters: Vec<f64>,
    pub k_values: Vec<f64>,
    pub values: Vec<Option<T>>,
}

impl<T: Copy> ParamMap<T> {
    pub fn get(&self, i: usize, j: usize) -> Option<T> {
        self.values[i * self.k_values.len() + j]
    }
}

impl<T: std::fmt::Display> ParamMap<T> {
    /// CSV with columns `diameter_nm,K_Jm3,value` (empty value for failures).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("diameter_nm,K_Jm3,value\n");
        for (i, d) in self.diameters.iter().enumerate() {
            for (j, k) in self.k_values.iter().enumerate() {
                let v = self.values[i * self.k_values.len() + j]
                    .as_ref()
                    .map(|v| v.to_string())
                    .unwrap_or_default();
                s.push_str(&format!("{},{},{}\n", d * 1e9, k, v));
            }
        }
        s
    }
}

fn traces(
    model: Model,
    positions: &[Vec3],
    seq: &FieldSequence,
    anis: &AnisotropyModel,
    p: &ParticleParams,
    settings: &ModelSettings,
) -> Result<Vec<MomentTrace>> {
    positions
        .iter()
        .map(|&x| simulate_trace(model, x, seq, anis, p, settings).map(|o| o.trace))
        .collect()
}

/// ε^TD between two models per (D, K) cell, cells in parallel.
pub fn error_map(
    model_a: Model,
    model_b: Model,
    spec: &SweepSpec,
    settings: &ModelSettings,
) -> Result<ParamMap<f64>> {
    spec.validate()?;
    let positions = spec.positions();
    let values = spec
        .cells()
        .par_iter()
        .map(|&(i, j)| {
            let (p, a) = spec.cell(i, j).ok()?;
            let ta = traces(model_a, &positions, &spec.sequence, &a, &p, settings).ok()?;
            let tb = traces(model_b, &positions, &spec.sequence, &a, &p, settings).ok()?;
            err_td(&ta, &tb).ok()
        })
        .collect();
    Ok(ParamMap {
        diameters: spec.diameters.clone(),
        k_values: spec.k_values.clone(),
        values,
    })
}

/// Truncation requirements of one sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TruncationCell {
    /// Smallest fixed truncation whose ε^TD against the reference is below target.
    pub l_min: usize,
    /// Largest term count the adaptive rule used over all samples.
    pub l_adaptive: usize,
}

impl std::fmt::Display for TruncationCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.l_min, self.l_adaptive)
    }
}

/// Truncation index needed per cell: EQANIS traces with fixed truncation are
/// compared against a fixed `l_ref` reference.
pub fn truncation_map(
    spec: &SweepSpec,
    target: f64,
    l_ref: usize,
    adaptive_tol: f64,
) -> Result<ParamMap<TruncationCell>> {
    spec.validate()?;
    let positions = spec.positions();
    let settings_for = |t: Truncation| ModelSettings {
        truncation: t,
        ..ModelSettings::default()
    };
    let values = spec
        .cells()
        .par_iter()
        .map(|&(i, j)| {
            let (p, a) = spec.cell(i, j).ok()?;
            let seq = &spec.sequence;
            let reference = traces(
                Model::Eqanis,
                &positions,
                seq,
                &a,
                &p,
                &settings_for(Truncation::Fixed(l_ref)),
            )
            .ok()?;
            let l_min = (0..=l_ref).find(|&l| {
                traces(
                    Model::Eqanis,
                    &positions,
                    seq,
                    &a,
                    &p,
                    &settings_for(Truncation::Fixed(l)),
                )
                .and_then(|t| err_td(&reference, &t))
                .is_ok_and(|e| e < target)
            })?;
            let (alpha_k, n) = a.at(&p, seq.gradient, vec3::ZERO);
            let beta = p.beta();
            let mut l_adaptive = 0;
            for x in &positions {
                for t in seq.sample_times() {
                    let xi = vec3::scale(beta, seq.applied_field(*x, t));
                    let (_, used) = crate::series::reduced_moment(
                        xi,
                        n,
                        alpha_k,
                        Truncation::Adaptive { tol: adaptive_tol },
                    )
                    .ok()?;
                    l_adaptive = l_adaptive.max(used);
                }
            }
            Some(TruncationCell { l_min, l_adaptive })
        })
        .collect();
    Ok(ParamMap {
        diameters: spec.diameters.clone(),
        k_values: spec.k_values.clone(),
        values,
    })
}
