//! Signals and frequency-domain system matrices from the magnetization models.

use std::io::{Read, Write};
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fp::{fp_solve, FpOptions, SequenceField};
use crate::physics::{AnisotropyModel, FieldSequence, ParticleParams, ScanGrid, MU0};
use crate::reduced::SummandRule;
use crate::series::{reduced_moment, Truncation, DEFAULT_TOL};
use crate::trace::MomentTrace;
use crate::vec3::{self, Vec3};

/// Magnetization model used to fill a system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// Isotropic equilibrium (Langevin).
    Eq,
    /// Equilibrium with uniaxial anisotropy.
    Eqanis,
    /// Single-summand Chebyshev representation of the EQANIS rows.
    Reduced,
    /// Néel Fokker-Planck dynamics.
    Fp,
}

impl Model {
    pub fn descriptor(self) -> &'static str {
        match self {
            Model::Eq => "eq",
            Model::Eqanis => "eqanis",
            Model::Reduced => "reduced-eqanis",
            Model::Fp => "fp",
        }
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eq" => Ok(Model::Eq),
            "eqanis" => Ok(Model::Eqanis),
            "reduced" | "reduced-eqanis" => Ok(Model::Reduced),
            "fp" => Ok(Model::Fp),
            _ => Err(Error::invalid(format!("unknown model '{s}'"))),
        }
    }
}

/// Numerical settings shared by all models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSettings {
    pub truncation: Truncation,
    pub fp: FpOptions,
    pub summand_rule: SummandRule,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            truncation: Truncation::Adaptive { tol: DEFAULT_TOL },
            fp: FpOptions::default(),
            summand_rule: SummandRule::default(),
        }
    }
}

/// A simulated trace plus solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutput {
    pub trace: MomentTrace,
    /// The FP solve hit the tail-energy threshold.
    pub tail_warning: bool,
}

/// Equilibrium trace: the mean moment evaluated pointwise along the field.
fn equilibrium_trace(
    x: Vec3,
    seq: &FieldSequence,
    alpha_k: f64,
    n: Vec3,
    params: &ParticleParams,
    trunc: Truncation,
) -> Result<MomentTrace> {
    let times = seq.sample_times();
    let (beta, m0) = (params.beta(), params.m0());
    let moments = times
        .iter()
        .map(|&t| {
            let xi = vec3::scale(beta, seq.applied_field(x, t));
            reduced_moment(xi, n, alpha_k, trunc).map(|(m, _)| vec3::scale(m0, m))
        })
        .collect::<Result<Vec<_>>>()?;
    MomentTrace::new(times, moments)
}

/// Mean-moment trace over one period at position `x`.
pub fn simulate_trace(
    model: Model,
    x: Vec3,
    seq: &FieldSequence,
    anis: &AnisotropyModel,
    params: &ParticleParams,
    settings: &ModelSettings,
) -> Result<TraceOutput> {
    seq.validate()?;
    let (alpha_k, n) = anis.at(params, seq.gradient, x);
    let trace = match model {
        Model::Eq => equilibrium_trace(x, seq, 0.0, vec3::E3, params, settings.truncation)?,
        Model::Eqanis => equilibrium_trace(x, seq, alpha_k, n, params, settings.truncation)?,
        Model::Fp => {
            let traj = SequenceField { seq, x };
            let out = fp_solve(
                &traj,
                seq.period(),
                &seq.sample_times(),
                n,
                alpha_k,
                params,
                &settings.fp,
            )?;
            return Ok(TraceOutput {
                trace: out.trace,
                tail_warning: out.tail_warning,
            });
        }
        Model::Reduced => {
            return Err(Error::invalid("the reduced model has no time-domain trace"));
        }
    };
    Ok(TraceOutput {
        trace,
        tail_warning: false,
    })
}

/// Complex gain per (channel, frequency).
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub n_channels: usize,
    pub n_freq: usize,
    /// Channel-major gains.
    pub gains: Vec<Complex64>,
}

impl TransferFunction {
    pub fn identity(n_channels: usize, n_freq: usize) -> Self {
        Self {
            n_channels,
            n_freq,
            gains: vec![Complex64::new(1.0, 0.0); n_channels * n_freq],
        }
    }

    pub fn gain(&self, channel: usize, k: usize) -> Complex64 {
        self.gains[channel * self.n_freq + k]
    }

    fn check(&self, n_channels: usize, n_freq: usize) -> Result<()> {
        if self.n_channels != n_channels || self.n_freq != n_freq {
            return Err(Error::invalid("transfer function shape does not match"));
        }
        if self
            .gains
            .iter()
            .any(|g| !g.re.is_finite() || !g.im.is_finite())
        {
            return Err(Error::invalid("transfer function has non-finite gains"));
        }
        Ok(())
    }
}

/// Default receive channels: unit vectors along x and y.
pub fn default_channels() -> Vec<Vec3> {
    vec![vec3::E1, vec3::E2]
}

/// Frequency-domain signal rows `s_{ℓk} = -μ0 â_ℓ(ω_k) iω_k ρ_ℓ·m̂_k` for
/// `k = 0..N/2`, one vector per channel.
pub fn trace_to_rows(
    trace: &MomentTrace,
    channels: &[Vec3],
    tf: Option<&TransferFunction>,
) -> Result<Vec<Vec<Complex64>>> {
    let n_freq = trace.len() / 2 + 1;
    if let Some(tf) = tf {
        tf.check(channels.len(), n_freq)?;
    }
    let spec = trace.spectrum();
    let w = 2.0 * std::f64::consts::PI / trace.period();
    Ok(channels
        .iter()
        .enumerate()
        .map(|(l, rho)| {
            (0..n_freq)
                .map(|k| {
                    let proj = spec[0][k] * rho[0] + spec[1][k] * rho[1] + spec[2][k] * rho[2];
                    let g = tf.map_or(Complex64::new(1.0, 0.0), |tf| tf.gain(l, k));
                    -MU0 * g * Complex64::new(0.0, w * k as f64) * proj
                })
                .collect()
        })
        .collect())
}

/// Frequency-domain system matrix; rows are (channel, frequency) pairs in
/// channel-major order, columns are grid positions.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrix {
    pub n_freq: usize,
    pub n_pos: usize,
    /// Receive-coil sensitivity directions.
    pub channels: Vec<Vec3>,
    /// Sequence period; ω_k = 2πk / period.
    pub period: f64,
    pub grid: ScanGrid,
    pub sequence: FieldSequence,
    pub particle: ParticleParams,
    pub anisotropy: AnisotropyModel,
    pub model: String,
    pub tf_applied: bool,
    /// Row-major entries.
    pub data: Vec<Complex64>,
}

impl SystemMatrix {
    pub fn n_rows(&self) -> usize {
        self.channels.len() * self.n_freq
    }

    pub fn row_index(&self, channel: usize, k: usize) -> usize {
        channel * self.n_freq + k
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.n_pos..(r + 1) * self.n_pos]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        let n = self.n_pos;
        &mut self.data[r * n..(r + 1) * n]
    }

    pub fn omega(&self, k: usize) -> f64 {
        2.0 * std::f64::consts::PI * k as f64 / self.period
    }

    fn same_shape(&self, other: &SystemMatrix) -> bool {
        self.n_freq == other.n_freq
            && self.n_pos == other.n_pos
            && self.channels.len() == other.channels.len()
    }

    /// Multiplies every row by its transfer-function gain.
    pub fn apply_transfer_function(&mut self, tf: &TransferFunction) -> Result<()> {
        tf.check(self.channels.len(), self.n_freq)?;
        for l in 0..self.channels.len() {
            for k in 0..self.n_freq {
                let g = tf.gain(l, k);
                let r = self.row_index(l, k);
                self.row_mut(r).iter_mut().for_each(|v| *v *= g);
            }
        }
        self.tf_applied = true;
        Ok(())
    }
}

const SM_MAGIC: &[u8; 8] = b"EQSMBIN1";

#[derive(Serialize, Deserialize)]
struct SmHeader {
    n_rows: usize,
    n_freq: usize,
    n_pos: usize,
    channels: Vec<Vec3>,
    period: f64,
    grid: ScanGrid,
    sequence: FieldSequence,
    particle: ParticleParams,
    anisotropy: AnisotropyModel,
    model: String,
    tf_applied: bool,
}

impl SystemMatrix {
    /// Writes the JSON header line, the magic/offset record and the
    /// little-endian (re, im) payload.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = SmHeader {
            n_rows: self.n_rows(),
            n_freq: self.n_freq,
            n_pos: self.n_pos,
            channels: self.channels.clone(),
            period: self.period,
            grid: self.grid,
            sequence: self.sequence,
            particle: self.particle,
            anisotropy: self.anisotropy,
            model: self.model.clone(),
            tf_applied: self.tf_applied,
        };
        let mut head = serde_json::to_vec(&header)?;
        head.push(b'\n');
        let offset = head.len() as u64 + 16;
        w.write_all(&head)?;
        w.write_all(SM_MAGIC)?;
        w.write_all(&offset.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::invalid("system-matrix file has no header line"))?;
        let header: SmHeader = serde_json::from_slice(&bytes[..nl])?;
        let rec = bytes
            .get(nl + 1..nl + 17)
            .ok_or_else(|| Error::invalid("system-matrix file truncated in record"))?;
        if &rec[..8] != SM_MAGIC {
            return Err(Error::invalid("bad system-matrix magic"));
        }
        let offset = u64::from_le_bytes(rec[8..16].try_into().expect("8 bytes")) as usize;
        let count = header.n_rows * header.n_pos;
        if header.n_rows != header.channels.len() * header.n_freq {
            return Err(Error::invalid("system-matrix header shape is inconsistent"));
        }
        let payload = bytes
            .get(offset..)
            .filter(|p| p.len() == count * 16)
            .ok_or_else(|| Error::invalid("system-matrix payload has the wrong length"))?;
        let data = payload
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Ok(Self {
            n_freq: header.n_freq,
            n_pos: header.n_pos,
            channels: header.channels,
            period: header.period,
            grid: header.grid,
            sequence: header.sequence,
            particle: header.particle,
            anisotropy: header.anisotropy,
            model: header.model,
            tf_applied: header.tf_applied,
            data,
        })
    }
}

/// Everything needed to assemble a system matrix.
#[derive(Debug, Clone)]
pub struct AssemblyInput<'a> {
    pub grid: &'a ScanGrid,
    pub sequence: &'a FieldSequence,
    pub anisotropy: &'a AnisotropyModel,
    pub particle: &'a ParticleParams,
    pub channels: &'a [Vec3],
    pub settings: ModelSettings,
}

/// Assembly result with the number of FP positions that raised the tail flag.
#[derive(Debug, Clone)]
pub struct Assembly {
    pub matrix: SystemMatrix,
    pub tail_warnings: usize,
}

/// One trace per grid position, positions in parallel.
pub fn assemble_system_matrix(
    model: Model,
    input: &AssemblyInput<'_>,
    tf: Option<&TransferFunction>,
) -> Result<Assembly> {
    assemble_on_support(model, input, tf, None)
}

/// Like [`assemble_system_matrix`], but only the columns flagged in `support`
/// are simulated; all others are left zero. Enough to form `S c` for a
/// concentration that vanishes outside the support.
pub fn assemble_on_support(
    model: Model,
    input: &AssemblyInput<'_>,
    tf: Option<&TransferFunction>,
    support: Option<&[bool]>,
) -> Result<Assembly> {
    input.grid.validate()?;
    if support.is_some_and(|s| s.len() != input.grid.len()) {
        return Err(Error::invalid("support mask does not match the grid"));
    }
    input.sequence.validate()?;
    input.anisotropy.validate()?;
    if input.channels.is_empty() {
        return Err(Error::invalid("at least one receive channel is required"));
    }
    if model == Model::Reduced {
        if support.is_some() {
            return Err(Error::invalid(
                "the reduced model assembles full matrices only",
            ));
        }
        let matrix = crate::reduced::reduced_system_matrix(input, tf)?;
        return Ok(Assembly {
            matrix,
            tail_warnings: 0,
        });
    }
    let positions = input.grid.positions();
    let results: Vec<Result<(Vec<Vec<Complex64>>, bool)>> = positions
        .par_iter()
        .enumerate()
        .map(|(j, &x)| {
            if support.is_some_and(|s| !s[j]) {
                return Ok((Vec::new(), false));
            }
            let out = simulate_trace(
                model,
                x,
                input.sequence,
                input.anisotropy,
                input.particle,
                &input.settings,
            )?;
            Ok((
                trace_to_rows(&out.trace, input.channels, tf)?,
                out.tail_warning,
            ))
        })
        .collect();
    let mut failed = Vec::new();
    let mut first_err = None;
    for (j, r) in results.iter().enumerate() {
        if let Err(e) = r {
            failed.push(j);
            first_err.get_or_insert_with(|| e.to_string());
        }
    }
    if !failed.is_empty() {
        return Err(Error::numerical(format!(
            "assembly failed at positions {failed:?}: {}",
            first_err.unwrap_or_default()
        )));
    }
    let n_pos = positions.len();
    let n_freq = input.sequence.n_freq();
    let n_ch = input.channels.len();
    let mut data = vec![Complex64::new(0.0, 0.0); n_ch * n_freq * n_pos];
    let mut tail_warnings = 0;
    for (j, r) in results.into_iter().enumerate() {
        let (rows, warn) = r.expect("failures handled above");
        tail_warnings += warn as usize;
        for (l, row) in rows.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                data[(l * n_freq + k) * n_pos + j] = *v;
            }
        }
    }
    Ok(Assembly {
        matrix: SystemMatrix {
            n_freq,
            n_pos,
            channels: input.channels.to_vec(),
            period: input.sequence.period(),
            grid: *input.grid,
            sequence: *input.sequence,
            particle: *input.particle,
            anisotropy: *input.anisotropy,
            model: model.descriptor().to_string(),
            tf_applied: tf.is_some(),
            data,
        },
        tail_warnings,
    })
}

/// Per-row least-squares gain mapping the model rows onto the reference rows.
pub fn fit_transfer_function(
    model: &SystemMatrix,
    reference: &SystemMatrix,
) -> Result<TransferFunction> {
    if !model.same_shape(reference) {
        return Err(Error::invalid("system matrices differ in shape"));
    }
    let norms: Vec<f64> = (0..model.n_rows())
        .map(|r| model.row(r).iter().map(|v| v.norm_sqr()).sum::<f64>())
        .collect();
    let max_norm = norms.iter().fold(0.0f64, |a, &b| a.max(b.sqrt()));
    let gains = (0..model.n_rows())
        .map(|r| {
            if norms[r].sqrt() < 1e-12 * max_norm || norms[r] == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let num: Complex64 = model
                .row(r)
                .iter()
                .zip(reference.row(r))
                .map(|(m, s)| m.conj() * s)
                .sum();
            num / norms[r]
        })
        .collect();
    Ok(TransferFunction {
        n_channels: model.channels.len(),
        n_freq: model.n_freq,
        gains,
    })
}
