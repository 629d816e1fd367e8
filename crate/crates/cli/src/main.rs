use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use eqanis::io::{self, AnisotropyConfig, Config};
use eqanis::metrics::{self, SweepSpec};
use eqanis::oracle::check_series;
use eqanis::physics::{mt_to_am, ParticleParams};
use eqanis::recon::{kaczmarz, MatRef};
use eqanis::reduced::mixing_frequency;
use eqanis::series::{SeriesParams, DEFAULT_TOL};
use eqanis::sysfn::{
    assemble_on_support, assemble_system_matrix, AssemblyInput, Model, SystemMatrix,
};

#[derive(Parser)]
#[command(
    name = "eqanis",
    version,
    about = "Equilibrium and Fokker-Planck system matrices for MPI"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Shared configuration flags.
#[derive(Args, Clone, Default)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the particle core diameter [nm].
    #[arg(long)]
    diameter_nm: Option<f64>,
    /// Override the anisotropy constant (K_anis or K_max) [J/m³].
    #[arg(long = "k")]
    k: Option<f64>,
    /// Override the spherical-harmonic truncation of the FP solver.
    #[arg(long)]
    l_sph: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    snr_db: Option<f64>,
    /// Worker threads (all cores when absent).
    #[arg(long)]
    threads: Option<usize>,
}

/// Diameter, K and offset ranges of a parameter sweep.
#[derive(Args, Clone)]
struct Sweep {
    /// Diameters as `first,last,count` [nm].
    #[arg(long, default_value = "15,25,11")]
    diameters_nm: String,
    /// Anisotropy constants as `first,last,count` [J/m³].
    #[arg(long, default_value = "0,10000,11")]
    k_values: String,
    /// Drive-axis offsets as `first,last,count` [mT].
    #[arg(long, default_value = "0,12,13")]
    offsets_mt: String,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a system matrix.
    SimulateSm {
        #[arg(long)]
        model: Model,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare the series against the quadrature oracle at random points.
    OracleCheck {
        #[arg(long, default_value_t = 500)]
        points: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Time-domain error between two models over a (D, K) sweep.
    ErrorMap {
        #[arg(long, default_value = "fp")]
        model_a: Model,
        #[arg(long, default_value = "eqanis")]
        model_b: Model,
        #[command(flatten)]
        sweep: Sweep,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Truncation index needed per (D, K) cell.
    TruncationMap {
        #[command(flatten)]
        sweep: Sweep,
        #[arg(long, default_value_t = 1e-6)]
        target: f64,
        #[arg(long, default_value_t = 200)]
        l_ref: usize,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a noisy measurement of the configured phantom.
    Signal {
        #[arg(long, default_value = "fp")]
        model: Model,
        /// Use this system matrix instead of assembling one.
        #[arg(long)]
        sm: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a concentration from a measurement.
    Recon {
        #[arg(long)]
        sm: PathBuf,
        #[arg(long)]
        signal: PathBuf,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        lambda_rel: Option<f64>,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// ε^SM table over mixing orders 1..9 between two system matrices.
    CompareSm {
        reference: PathBuf,
        approx: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Render one system-matrix row as a complex-colored PNG.
    Render {
        #[arg(long)]
        sm: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        /// Frequency index; alternatively give --kx and --ky.
        #[arg(long, conflicts_with_all = ["kx", "ky"])]
        freq: Option<usize>,
        #[arg(long, requires = "ky")]
        kx: Option<i64>,
        #[arg(long, requires = "kx")]
        ky: Option<i64>,
        #[arg(short, long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Time system-matrix assembly of several models.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "eqanis,fp")]
        models: Vec<Model>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SimulateSm { common, .. }
            | Command::OracleCheck { common, .. }
            | Command::ErrorMap { common, .. }
            | Command::TruncationMap { common, .. }
            | Command::Signal { common, .. }
            | Command::Recon { common, .. }
            | Command::CompareSm { common, .. }
            | Command::Render { common, .. }
            | Command::Bench { common, .. } => common,
        }
    }
}

/// Measurement file written by `signal`.
#[derive(Serialize, Deserialize)]
struct SignalFile {
    model: String,
    snr_db: f64,
    seed: u64,
    nx: usize,
    ny: usize,
    phantom: String,
    /// Ground-truth concentration, x fastest.
    concentration: Vec<f64>,
    /// Measurement as (re, im) pairs in system-matrix row order.
    u: Vec<[f64; 2]>,
    sigma: Vec<f64>,
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    command: String,
    version: String,
    config_sha256: Option<String>,
    seed: Option<u64>,
    outputs: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn basename(path: &Path) -> String {
    path.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Path next to `out` with the stem extended by `suffix`.
fn sibling(out: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Records the outputs of one command in `manifest.json` next to them. Earlier
/// records in the same directory are kept, keyed by their first output.
fn write_manifest(
    command: &str,
    config: Option<&Config>,
    seed: Option<u64>,
    outputs: &[PathBuf],
) -> anyhow::Result<()> {
    let Some(first) = outputs.first() else {
        return Ok(());
    };
    let dir = first
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let config_sha256 = match config {
        Some(c) => Some(sha256_hex(serde_json::to_string(c)?.as_bytes())),
        None => None,
    };
    let entries = outputs
        .iter()
        .map(|p| {
            let bytes = fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ManifestEntry {
                file: basename(p),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let record = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256,
        seed,
        outputs: entries,
    };
    let path = dir.join("manifest.json");
    let mut all: BTreeMap<String, serde_json::Value> = match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
        Err(_) => BTreeMap::new(),
    };
    all.insert(basename(first), serde_json::to_value(record)?);
    fs::write(path, serde_json::to_string_pretty(&all)? + "\n")?;
    Ok(())
}

fn load_config(common: &Common) -> anyhow::Result<Config> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| eqanis::Error::invalid("--config is required"))?;
    let mut cfg = Config::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some(d) = common.diameter_nm {
        cfg.particle.diameter_nm = d;
    }
    if let Some(k) = common.k {
        match &mut cfg.anisotropy {
            AnisotropyConfig::Aligned { k_anis, .. } => *k_anis = k,
            AnisotropyConfig::FluidB3 { k_max, .. } => *k_max = k,
            AnisotropyConfig::Isotropic => {
                return Err(eqanis::Error::invalid("--k needs an anisotropic configuration").into())
            }
        }
    }
    if let Some(l) = common.l_sph {
        cfg.fp.get_or_insert_with(Default::default).l_sph = l;
    }
    if let Some(s) = common.seed {
        cfg.seed = Some(s);
    }
    if let Some(s) = common.snr_db {
        cfg.snr_db = Some(s);
    }
    Ok(cfg)
}

/// Builds the assembly input pieces owned by the caller.
struct Setup {
    grid: eqanis::physics::ScanGrid,
    sequence: eqanis::physics::FieldSequence,
    anisotropy: eqanis::physics::AnisotropyModel,
    particle: ParticleParams,
    channels: Vec<eqanis::vec3::Vec3>,
    settings: eqanis::sysfn::ModelSettings,
}

impl Setup {
    fn new(cfg: &Config) -> anyhow::Result<Self> {
        Ok(Self {
            grid: cfg.grid()?,
            sequence: cfg.sequence()?,
            anisotropy: cfg.anisotropy()?,
            particle: cfg.particle()?,
            channels: cfg.channels(),
            settings: cfg.settings()?,
        })
    }

    fn input(&self) -> AssemblyInput<'_> {
        AssemblyInput {
            grid: &self.grid,
            sequence: &self.sequence,
            anisotropy: &self.anisotropy,
            particle: &self.particle,
            channels: &self.channels,
            settings: self.settings,
        }
    }
}

fn read_sm(path: &Path) -> anyhow::Result<SystemMatrix> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(SystemMatrix::read_from(BufReader::new(f))?)
}

fn write_sm(sm: &SystemMatrix, path: &Path) -> anyhow::Result<()> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    sm.write_to(&mut w)?;
    std::io::Write::flush(&mut w)?;
    Ok(())
}

fn parse_range(text: &str, scale: f64) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [a, b, n] = parts[..] else {
        return Err(
            eqanis::Error::invalid(format!("range '{text}' must be first,last,count")).into(),
        );
    };
    let (a, b): (f64, f64) = (a.parse()?, b.parse()?);
    let n: usize = n.parse()?;
    if n == 0 {
        return Err(eqanis::Error::invalid("range count must be positive").into());
    }
    if n == 1 {
        return Ok(vec![a * scale]);
    }
    Ok((0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64) * scale)
        .collect())
}

fn sweep_spec(cfg: &Config, sweep: &Sweep) -> anyhow::Result<SweepSpec> {
    let sequence = cfg.sequence()?;
    let particle = cfg.particle()?;
    Ok(SweepSpec {
        diameters: parse_range(&sweep.diameters_nm, 1e-9)?,
        k_values: parse_range(&sweep.k_values, 1.0)?,
        offsets: parse_range(&sweep.offsets_mt, 1.0)?
            .into_iter()
            .map(mt_to_am)
            .collect(),
        sequence,
        particle,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.command.common().threads {
        if n == 0 {
            return Err(eqanis::Error::invalid("--threads must be positive").into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match cli.command {
        Command::SimulateSm { model, out, common } => {
            let cfg = load_config(&common)?;
            let setup = Setup::new(&cfg)?;
            let assembly = assemble_system_matrix(model, &setup.input(), None)?;
            if assembly.tail_warnings > 0 {
                eprintln!(
                    "warning: {} positions exceeded the FP tail threshold",
                    assembly.tail_warnings
                );
            }
            write_sm(&assembly.matrix, &out)?;
            println!(
                "{}: {} rows x {} positions -> {}",
                model.descriptor(),
                assembly.matrix.n_rows(),
                assembly.matrix.n_pos,
                out.display()
            );
            write_manifest("simulate-sm", Some(&cfg), cfg.seed, &[out])
        }
        Command::OracleCheck {
            points,
            tol,
            out,
            common,
        } => {
            let cfg = common
                .config
                .as_ref()
                .map(|_| load_config(&common))
                .transpose()?;
            let seed = common
                .seed
                .or(cfg.as_ref().and_then(|c| c.seed))
                .unwrap_or(0);
            let series_tol = cfg
                .as_ref()
                .and_then(|c| c.series_tol)
                .unwrap_or(DEFAULT_TOL);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut csv = String::from("a,b,c,err_z,err_z3,err_z_perp,terms\n");
            let mut worst = 0.0f64;
            for _ in 0..points {
                let p = SeriesParams::new(
                    rng.random_range(0.0..=30.0),
                    rng.random_range(-30.0..=30.0),
                    rng.random_range(0.0..=25.0),
                )?;
                let c = check_series(p, series_tol)?;
                worst = worst.max(c.max_err());
                csv.push_str(&format!(
                    "{},{},{},{:e},{:e},{:e},{}\n",
                    p.a, p.b, p.c, c.err_z, c.err_z3, c.err_z_perp, c.terms_used
                ));
            }
            println!(
                "oracle check: {points} points, max relative error {worst:.3e} (tolerance {tol:e})"
            );
            if let Some(out) = out {
                fs::write(&out, csv)?;
                write_manifest("oracle-check", cfg.as_ref(), Some(seed), &[out])?;
            }
            if worst > tol {
                return Err(eqanis::Error::numerical(format!(
                    "series deviates from the oracle by {worst:e}"
                ))
                .into());
            }
            Ok(())
        }
        Command::ErrorMap {
            model_a,
            model_b,
            sweep,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let spec = sweep_spec(&cfg, &sweep)?;
            let map = metrics::error_map(model_a, model_b, &spec, &cfg.settings()?)?;
            fs::write(&out, map.to_csv())?;
            let png = sibling(&out, "", "png");
            io::render_heatmap(&map.values, map.diameters.len(), map.k_values.len(), &png)?;
            let missing = map.values.iter().filter(|v| v.is_none()).count();
            if missing > 0 {
                eprintln!("warning: {missing} cells failed and are left empty");
            }
            println!(
                "error map {} vs {} -> {}",
                model_a.descriptor(),
                model_b.descriptor(),
                out.display()
            );
            write_manifest("error-map", Some(&cfg), cfg.seed, &[out, png])
        }
        Command::TruncationMap {
            sweep,
            target,
            l_ref,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let spec = sweep_spec(&cfg, &sweep)?;
            let tol = cfg.series_tol.unwrap_or(DEFAULT_TOL);
            let map = metrics::truncation_map(&spec, target, l_ref, tol)?;
            let mut csv = String::from("diameter_nm,K_Jm3,l_min,l_adaptive\n");
            for (i, d) in map.diameters.iter().enumerate() {
                for (j, k) in map.k_values.iter().enumerate() {
                    match map.get(i, j) {
                        Some(c) => csv.push_str(&format!(
                            "{},{},{},{}\n",
                            d * 1e9,
                            k,
                            c.l_min,
                            c.l_adaptive
                        )),
                        None => csv.push_str(&format!("{},{},,\n", d * 1e9, k)),
                    }
                }
            }
            fs::write(&out, csv)?;
            let max_l = map
                .values
                .iter()
                .flatten()
                .map(|c| c.l_min)
                .max()
                .unwrap_or(0);
            println!("truncation map: max L = {max_l} -> {}", out.display());
            write_manifest("truncation-map", Some(&cfg), cfg.seed, &[out])
        }
        Command::Signal {
            model,
            sm,
            out,
            common,
        } => {
            let cfg = load_config(&common)?;
            let setup = Setup::new(&cfg)?;
            let spec = cfg
                .phantom
                .clone()
                .ok_or_else(|| eqanis::Error::invalid("the configuration has no phantom"))?;
            let phantom = io::phantom_generate(&spec, &setup.grid)?;
            let seed = cfg.seed.unwrap_or(0);
            let snr_db = cfg.snr_db.unwrap_or(f64::INFINITY);
            let matrix = match sm {
                Some(path) => read_sm(&path)?,
                None => {
                    let support: Vec<bool> = phantom.values.iter().map(|v| *v != 0.0).collect();
                    let support = (model != Model::Reduced).then_some(support);
                    let a = assemble_on_support(model, &setup.input(), None, support.as_deref())?;
                    if a.tail_warnings > 0 {
                        eprintln!(
                            "warning: {} positions exceeded the FP tail threshold",
                            a.tail_warnings
                        );
                    }
                    a.matrix
                }
            };
            if matrix.n_pos != phantom.values.len() {
                return Err(
                    eqanis::Error::invalid("system matrix and phantom grids differ").into(),
                );
            }
            let s = MatRef::new(&matrix.data, matrix.n_rows(), matrix.n_pos)?;
            let meas = io::simulate_measurement(s, &phantom.values, snr_db, seed)?;
            let file = SignalFile {
                model: matrix.model.clone(),
                snr_db,
                seed,
                nx: setup.grid.nx,
                ny: setup.grid.ny,
                phantom: phantom.description.clone(),
                concentration: phantom.values.clone(),
                u: meas.u.iter().map(|v| [v.re, v.im]).collect(),
                sigma: meas.sigma,
            };
            fs::write(&out, serde_json::to_string(&file)?)?;
            let png = sibling(&out, "_phantom", "png");
            io::render_grayscale(&phantom.values, &setup.grid, &png)?;
            println!(
                "signal from {} ({}, {} dB) -> {}",
                file.model,
                file.phantom,
                snr_db,
                out.display()
            );
            write_manifest("signal", Some(&cfg), Some(seed), &[out, png])
        }
        Command::Recon {
            sm,
            signal,
            iterations,
            lambda_rel,
            out,
            common,
        } => {
            let cfg = common
                .config
                .as_ref()
                .map(|_| load_config(&common))
                .transpose()?;
            let matrix = read_sm(&sm)?;
            let sig: SignalFile = serde_json::from_str(&fs::read_to_string(&signal)?)
                .map_err(eqanis::Error::from)
                .with_context(|| format!("reading {}", signal.display()))?;
            if sig.u.len() != matrix.n_rows() || sig.concentration.len() != matrix.n_pos {
                return Err(
                    eqanis::Error::invalid("measurement and system matrix shapes differ").into(),
                );
            }
            let mut rc = cfg
                .as_ref()
                .and_then(|c| c.recon.clone())
                .unwrap_or_default();
            if let Some(n) = iterations {
                rc.iterations = n;
            }
            if let Some(l) = lambda_rel {
                rc.lambda_rel = l;
            }
            if rc.weights.is_none() && sig.sigma.iter().all(|s| *s > 0.0) {
                rc.weights = Some(sig.sigma.iter().map(|s| 1.0 / s).collect());
            }
            let u: Vec<Complex64> = sig.u.iter().map(|v| Complex64::new(v[0], v[1])).collect();
            let s = MatRef::new(&matrix.data, matrix.n_rows(), matrix.n_pos)?;
            let result = kaczmarz(s, &u, &rc)?;
            let grid = matrix.grid;
            let mut csv = String::from("ix,iy,x_mm,y_mm,c\n");
            for iy in 0..grid.ny {
                for ix in 0..grid.nx {
                    let p = grid.coord(ix, iy);
                    csv.push_str(&format!(
                        "{ix},{iy},{},{},{}\n",
                        p[0] * 1e3,
                        p[1] * 1e3,
                        result.c[iy * grid.nx + ix]
                    ));
                }
            }
            fs::write(&out, csv)?;
            let png = sibling(&out, "", "png");
            io::render_grayscale(&result.c, &grid, &png)?;
            let nrmse = metrics::nrmse(&sig.concentration, &result.c)?;
            println!(
                "reconstruction with {} matrix: NRMSE {nrmse:.4} -> {}",
                matrix.model,
                out.display()
            );
            write_manifest("recon", cfg.as_ref(), rc.shuffle_seed, &[out, png])
        }
        Command::CompareSm {
            reference,
            approx,
            out,
            common,
        } => {
            let cfg = common
                .config
                .as_ref()
                .map(|_| load_config(&common))
                .transpose()?;
            let a = read_sm(&reference)?;
            let b = read_sm(&approx)?;
            if a.n_rows() != b.n_rows() || a.n_pos != b.n_pos {
                return Err(eqanis::Error::invalid("system matrices differ in shape").into());
            }
            if a.sequence.is_one_dimensional() {
                return Err(eqanis::Error::invalid("mixing orders need a 2D sequence").into());
            }
            let nb = a.sequence.divider as i64;
            let mut csv = String::from("kx,ky,channel,k,err_sm\n");
            let (mut sum, mut count) = (0.0, 0);
            for kx in 1..=9 {
                for ky in 1..=9 {
                    let k = mixing_frequency(kx, ky, nb);
                    if k as usize >= a.n_freq {
                        bail!(eqanis::Error::invalid(format!(
                            "mixing order ({kx}, {ky}) exceeds the spectrum"
                        )));
                    }
                    for l in 0..a.channels.len() {
                        let r = a.row_index(l, k as usize);
                        let e = metrics::err_sm(a.row(r), b.row(r))?;
                        sum += e;
                        count += 1;
                        csv.push_str(&format!("{kx},{ky},{l},{k},{e}\n"));
                    }
                }
            }
            let mean = sum / count as f64;
            print!("{csv}");
            println!("mean {mean:.6}");
            if let Some(out) = out {
                fs::write(&out, csv)?;
                write_manifest("compare-sm", cfg.as_ref(), None, &[out])?;
            }
            Ok(())
        }
        Command::Render {
            sm,
            channel,
            freq,
            kx,
            ky,
            out,
            common,
        } => {
            let cfg = common
                .config
                .as_ref()
                .map(|_| load_config(&common))
                .transpose()?;
            let matrix = read_sm(&sm)?;
            let k = match (freq, kx, ky) {
                (Some(k), _, _) => k,
                (None, Some(kx), Some(ky)) => {
                    let k = mixing_frequency(kx, ky, matrix.sequence.divider as i64);
                    usize::try_from(k).map_err(|_| {
                        eqanis::Error::invalid("mixing order maps to a negative frequency")
                    })?
                }
                _ => return Err(eqanis::Error::invalid("give --freq or both --kx and --ky").into()),
            };
            if channel >= matrix.channels.len() || k >= matrix.n_freq {
                return Err(eqanis::Error::invalid("row outside the system matrix").into());
            }
            io::render_complex_map(matrix.row(matrix.row_index(channel, k)), &matrix.grid, &out)?;
            println!("row (channel {channel}, k = {k}) -> {}", out.display());
            write_manifest("render", cfg.as_ref(), None, &[out])
        }
        Command::Bench { models, common } => {
            let cfg = load_config(&common)?;
            let setup = Setup::new(&cfg)?;
            let threads = rayon::current_num_threads();
            let mut times = Vec::new();
            for model in &models {
                let t = Instant::now();
                assemble_system_matrix(*model, &setup.input(), None)?;
                let dt = t.elapsed().as_secs_f64();
                println!("{}: {dt:.3} s on {threads} threads", model.descriptor());
                times.push(dt);
            }
            for (i, model) in models.iter().enumerate().skip(1) {
                println!(
                    "speedup of {} over {}: {:.1}x",
                    models[0].descriptor(),
                    model.descriptor(),
                    times[i] / times[0]
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // sources already embedded in a message are not repeated
            let mut msg = String::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !msg.contains(&cause) {
                    msg = if msg.is_empty() {
                        cause
                    } else {
                        format!("{msg}: {cause}")
                    };
                }
            }
            eprintln!("error: {msg}");
            let numerical = e.chain().any(|c| {
                c.downcast_ref::<eqanis::Error>()
                    .is_some_and(|e| matches!(e, eqanis::Error::Numerical(_)))
            });
            ExitCode::from(if numerical { 2 } else { 1 })
        }
    }
}
