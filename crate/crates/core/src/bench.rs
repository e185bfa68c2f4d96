//! Convergence experiments: compare the trajectory ensemble `Θ_n(K)` with the
//! exact density matrix `ρ_n` over a list of ensemble sizes and write the
//! results to disk.
//!
//! Output directory layout:
//!
//! * `convergence.csv`: `K,n_collisions,D,max_elem_dev,wall_ms`, one row per
//!   ensemble size, flushed as soon as the row is computed.
//! * `theta.txt`, `rho.txt`: final `Θ_n(K_max)` and `ρ_n`, one matrix row per
//!   line, entries written as `re+imi`.
//! * `manifest.json`: the fully resolved configuration plus the fitted slope
//!   and observable summaries.
//!
//! Random streams: repetition `r`, row `j` and trajectory `k` use stream id
//! `r << 48 | j << 32 | k` under the master seed.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{Collider, CollisionConfig, ExactCollisionMap};
use crate::ops::{outer_product, pauli_on, Coupling, DensityMatrix, Pauli, SystemSpec};
use crate::state::{BasisLabel, StateVector};
use crate::stochastic::ThermalAncillaSpec;
use crate::{CMatrix, Error, Result};

pub const CSV_HEADER: &str = "K,n_collisions,D,max_elem_dev,wall_ms";

const DEFAULT_THETA_S: f64 = 0.3;
const DEFAULT_BETA: f64 = 1.0;
const DEFAULT_OMEGA: f64 = 1.0;
const DEFAULT_EPSILON: f64 = 0.1;
const DEFAULT_DT: f64 = 0.1;

const MAX_TRAJECTORIES: usize = 1 << 32;
const MAX_ROWS: usize = 1 << 16;
const MAX_REPETITIONS: usize = 1 << 16;

/// Stream id of trajectory `k` in row `row` of repetition `rep`.
pub fn stream_base(rep: usize, row: usize) -> u64 {
    ((rep as u64) << 48) | ((row as u64) << 32)
}

fn default_theta_s() -> f64 {
    DEFAULT_THETA_S
}
fn default_beta() -> f64 {
    DEFAULT_BETA
}
fn default_omega() -> f64 {
    DEFAULT_OMEGA
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_repetitions() -> usize {
    1
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Experiment description. Parsed from flat JSON; omitted optional fields are
/// filled by [`ExperimentConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_qubits: usize,
    /// Per-qubit splittings; defaults to `omega` on every qubit.
    #[serde(default)]
    pub splittings: Option<Vec<f64>>,
    /// Flip-flop couplings; defaults to a nearest-neighbour chain with
    /// `ε = 0.1`.
    #[serde(default)]
    pub couplings: Option<Vec<Coupling>>,
    /// Defaults to the last qubit.
    #[serde(default)]
    pub target_qubit: Option<usize>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_theta_s")]
    pub theta_s: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub n_collisions: usize,
    pub k_list: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Pauli observables named `X<q>`, `Y<q>` or `Z<q>`.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Initial basis state as a bit string; defaults to all zeros.
    #[serde(default)]
    pub initial_state: Option<String>,
}

impl ExperimentConfig {
    /// Parses JSON text; syntax and schema errors carry line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Fills defaults and validates every field.
    pub fn resolve(mut self) -> Result<Self> {
        let field = |name: &str, msg: String| Error::Config(format!("field `{name}`: {msg}"));
        let n = self.n_qubits;
        if n == 0 || n + 1 > crate::MAX_QUBITS {
            return Err(field(
                "n_qubits",
                format!("must be in 1..={}, got {n}", crate::MAX_QUBITS - 1),
            ));
        }
        let omega = self.omega;
        self.splittings.get_or_insert_with(|| vec![omega; n]);
        self.couplings.get_or_insert_with(|| {
            (1..n)
                .map(|i| Coupling { i, j: i + 1, epsilon: DEFAULT_EPSILON })
                .collect()
        });
        self.target_qubit.get_or_insert(n);
        self.initial_state.get_or_insert_with(|| "0".repeat(n));

        if self.k_list.is_empty() {
            return Err(field("k_list", "must not be empty".into()));
        }
        if self.k_list.len() > MAX_ROWS {
            return Err(field("k_list", format!("at most {MAX_ROWS} entries")));
        }
        if self.k_list[0] == 0 {
            return Err(field("k_list", "ensemble sizes must be >= 1".into()));
        }
        if self.k_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(field("k_list", "must be strictly increasing".into()));
        }
        if *self.k_list.last().unwrap() > MAX_TRAJECTORIES {
            return Err(field("k_list", format!("ensemble sizes must be <= {MAX_TRAJECTORIES}")));
        }
        if self.repetitions == 0 || self.repetitions > MAX_REPETITIONS {
            return Err(field(
                "repetitions",
                format!("must be in 1..={MAX_REPETITIONS}, got {}", self.repetitions),
            ));
        }
        let label = BasisLabel::parse(self.initial_state.as_deref().unwrap())
            .map_err(|e| field("initial_state", e.to_string()))?;
        if label.n_qubits() != n {
            return Err(field(
                "initial_state",
                format!("expected {n} digits, got {}", label.n_qubits()),
            ));
        }
        for name in &self.observables {
            parse_observable(name, n).map_err(|e| field("observables", e.to_string()))?;
        }
        self.collision_config().validate().map_err(|e| {
            let name = match &e {
                Error::InvalidCoupling { .. } => "couplings",
                Error::QubitOutOfRange { .. } => "target_qubit",
                Error::DimensionMismatch { .. } => "splittings",
                _ => "parameters",
            };
            field(name, e.to_string())
        })?;
        Ok(self)
    }

    /// Collision parameters with the largest ensemble size. Requires a
    /// resolved config.
    pub fn collision_config(&self) -> CollisionConfig {
        CollisionConfig {
            system: SystemSpec {
                n_qubits: self.n_qubits,
                splittings: self.splittings.clone().unwrap_or_default(),
                couplings: self.couplings.clone().unwrap_or_default(),
                target_qubit: self.target_qubit.unwrap_or(self.n_qubits),
            },
            ancilla: ThermalAncillaSpec {
                beta: self.beta,
                omega: self.omega,
            },
            theta_s: self.theta_s,
            dt: self.dt,
            n_collisions: self.n_collisions,
            ensemble_size: self.k_list.last().copied().unwrap_or(1),
            seed: self.seed,
        }
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let label = BasisLabel::parse(self.initial_state.as_deref().unwrap_or(""))?;
        StateVector::from_label(&label)
    }
}

/// Parses `X<q>`, `Y<q>` or `Z<q>` into a Pauli operator on qubit `q`.
pub fn parse_observable(name: &str, n_qubits: usize) -> Result<crate::engine::Observable> {
    let mut chars = name.chars();
    let pauli = match chars.next() {
        Some('X' | 'x') => Pauli::X,
        Some('Y' | 'y') => Pauli::Y,
        Some('Z' | 'z') => Pauli::Z,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "observable `{name}` must look like X1, Y2 or Z3"
            )))
        }
    };
    let q: usize = chars.as_str().parse().map_err(|_| {
        Error::InvalidParameter(format!("observable `{name}` must look like X1, Y2 or Z3"))
    })?;
    Ok(crate::engine::Observable {
        name: name.to_string(),
        operator: pauli_on(pauli, q, n_qubits)?,
    })
}

/// Mean squared element-wise deviation `Σ |ρ_ij - Θ_ij|² / dim²`.
pub fn distance(rho: &DensityMatrix, theta: &DensityMatrix) -> Result<f64> {
    matrix_distance(rho.matrix(), theta.matrix())
}

pub fn matrix_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum();
    Ok(total / (a.nrows() * a.ncols()) as f64)
}

/// Largest `|ρ_ij - Θ_ij|`.
pub fn max_elem_dev(rho: &DensityMatrix, theta: &DensityMatrix) -> Result<f64> {
    if rho.dim() != theta.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: theta.dim(),
        });
    }
    Ok(crate::ops::max_abs_diff(rho.matrix(), theta.matrix()))
}

/// Least-squares slope of `ln y` against `ln x`. Needs at least three points
/// with positive coordinates.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if logs.len() < 3 || logs.len() != points.len() {
        return None;
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub n_collisions: usize,
    /// Distance averaged over repetitions.
    pub d: f64,
    /// Largest element deviation averaged over repetitions.
    pub max_elem_dev: f64,
    pub wall_ms: u128,
    /// Distance of each repetition.
    #[serde(skip)]
    pub d_samples: Vec<f64>,
}

impl ConvergenceRow {
    /// CSV line without the trailing newline.
    pub fn csv_line(&self) -> String {
        format!("{},{}", self.data_fields(), self.wall_ms)
    }

    /// The deterministic columns `K,n_collisions,D,max_elem_dev`.
    pub fn data_fields(&self) -> String {
        format!(
            "{},{},{:e},{:e}",
            self.k, self.n_collisions, self.d, self.max_elem_dev
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableSummary {
    pub name: String,
    pub exact: f64,
    pub ensemble: f64,
}

#[derive(Clone, Debug)]
pub struct ScanReport {
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
    /// `Θ_n(K_max)` of the last repetition.
    pub theta: DensityMatrix,
    pub rho: DensityMatrix,
    pub observables: Vec<ObservableSummary>,
}

/// Runs the scan on the current rayon pool, reporting each row to `on_row`
/// as soon as it is complete.
pub fn convergence_scan<F>(cfg: &ExperimentConfig, mut on_row: F) -> Result<ScanReport>
where
    F: FnMut(&ConvergenceRow) -> Result<()>,
{
    let cfg = cfg.clone().resolve()?;
    let collision = cfg.collision_config();
    let collider = Collider::new(&collision)?;
    let psi0 = cfg.initial_state()?;
    let rho = ExactCollisionMap::new(&collision)?.iterate(&outer_product(&psi0), cfg.n_collisions)?;

    let mut rows = Vec::with_capacity(cfg.k_list.len());
    let mut theta = None;
    for (row_idx, &k) in cfg.k_list.iter().enumerate() {
        let start = Instant::now();
        let mut d_samples = Vec::with_capacity(cfg.repetitions);
        let mut dev_sum = 0.0;
        for rep in 0..cfg.repetitions {
            let t = collider
                .ensemble(&psi0, k, stream_base(rep, row_idx))?
                .finalize()?;
            d_samples.push(distance(&rho, &t)?);
            dev_sum += max_elem_dev(&rho, &t)?;
            theta = Some(t);
        }
        let reps = cfg.repetitions as f64;
        let row = ConvergenceRow {
            k,
            n_collisions: cfg.n_collisions,
            d: d_samples.iter().sum::<f64>() / reps,
            max_elem_dev: dev_sum / reps,
            wall_ms: start.elapsed().as_millis(),
            d_samples,
        };
        on_row(&row)?;
        rows.push(row);
    }
    let theta = theta.expect("k_list is non-empty");

    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.k as f64, r.d)).collect();
    let slope = fit_loglog_slope(&points);
    let observables = cfg
        .observables
        .iter()
        .map(|name| {
            let obs = parse_observable(name, cfg.n_qubits)?;
            Ok(ObservableSummary {
                name: name.clone(),
                exact: rho.expectation(&obs.operator)?.re,
                ensemble: theta.expectation(&obs.operator)?.re,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ScanReport {
        rows,
        slope,
        theta,
        rho,
        observables,
    })
}

/// Formats one entry as `re+imi` / `re-imi`.
pub fn format_entry(z: crate::C64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:e}{}{:e}i", z.re, sign, z.im.abs())
}

pub fn write_matrix(path: &Path, m: &CMatrix) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(format!("cannot create {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for r in 0..m.nrows() {
        let line: Vec<String> = (0..m.ncols()).map(|c| format_entry(m[(r, c)])).collect();
        writeln!(w, "{}", line.join(" ")).map_err(|e| Error::io(format!("cannot write {}", path.display()), e))?;
    }
    w.flush().map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

/// Parses a matrix written by [`write_matrix`].
pub fn read_matrix(text: &str) -> Result<CMatrix> {
    let rows: Vec<Vec<crate::C64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(parse_entry).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParameter("matrix dump is not square".into()));
    }
    Ok(CMatrix::from_fn(n, n, |r, c| rows[r][c]))
}

fn parse_entry(s: &str) -> Result<crate::C64> {
    let bad = || Error::InvalidParameter(format!("bad matrix entry `{s}`"));
    let body = s.strip_suffix('i').ok_or_else(bad)?;
    // the separator is the last sign not following an exponent marker
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && bytes[i - 1] != b'e' && bytes[i - 1] != b'E')
        .ok_or_else(bad)?;
    let re: f64 = body[..split].parse().map_err(|_| bad())?;
    let im: f64 = body[split..].parse().map_err(|_| bad())?;
    Ok(crate::C64::new(re, im))
}

/// Command-line overrides applied on top of the config file.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    pub quiet: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub rows: Vec<ConvergenceRow>,
    pub slope: Option<f64>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    config: &'a ExperimentConfig,
    threads: usize,
    complete: bool,
    slope: Option<f64>,
    observables: &'a [ObservableSummary],
    artifacts: [&'static str; 4],
}

fn write_manifest(path: &Path, manifest: &Manifest<'_>) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

/// Loads a config file, runs the scan and writes all artifacts.
pub fn run_experiment(config_path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::from_path(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &opts.out_dir {
        cfg.out_dir = dir.clone();
    }
    run_config(&cfg, opts)
}

/// Runs an already parsed config; see [`run_experiment`].
pub fn run_config(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = cfg.clone().resolve()?;
    let out = cfg.out_dir.clone();
    std::fs::create_dir_all(&out).map_err(|e| Error::io(format!("cannot create {}", out.display()), e))?;
    let artifacts = ["convergence.csv", "theta.txt", "rho.txt", "manifest.json"];
    let manifest_path = out.join("manifest.json");
    write_manifest(
        &manifest_path,
        &Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            threads: opts.threads,
            complete: false,
            slope: None,
            observables: &[],
            artifacts,
        },
    )?;

    let csv_path = out.join("convergence.csv");
    let csv_err = |e| Error::io(format!("cannot write {}", csv_path.display()), e);
    let mut csv = BufWriter::new(File::create(&csv_path).map_err(csv_err)?);
    writeln!(csv, "{CSV_HEADER}").map_err(csv_err)?;
    csv.flush().map_err(csv_err)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start thread pool: {e}")))?;
    let quiet = opts.quiet;
    let report = pool.install(|| {
        convergence_scan(&cfg, |row| {
            writeln!(csv, "{}", row.csv_line()).map_err(csv_err)?;
            csv.flush().map_err(csv_err)?;
            if !quiet {
                eprintln!(
                    "K = {:>8}  D = {:.6e}  max dev = {:.3e}  ({} ms)",
                    row.k, row.d, row.max_elem_dev, row.wall_ms
                );
            }
            Ok(())
        })
    })?;

    write_matrix(&out.join("theta.txt"), report.theta.matrix())?;
    write_matrix(&out.join("rho.txt"), report.rho.matrix())?;
    write_manifest(
        &manifest_path,
        &Manifest {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config: &cfg,
            threads: opts.threads,
            complete: true,
            slope: report.slope,
            observables: &report.observables,
            artifacts,
        },
    )?;
    if !quiet {
        match report.slope {
            Some(s) => eprintln!("log-log slope of D vs K: {s:.4}"),
            None => eprintln!("log-log slope of D vs K: n/a (needs 3 rows with D > 0)"),
        }
    }
    Ok(RunSummary {
        out_dir: out,
        rows: report.rows,
        slope: report.slope,
    })
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            _ => 3,
        }
    }
}
