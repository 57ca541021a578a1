//! Leakage/accuracy sweeps: calibrate the mask variance for each budget, run
//! repeated jobs on fresh Gaussian inputs, and tabulate the decoding error.
//!
//! A sweep is a grid of cells `(scheme, stragglers, δ)`. Every trial seeds
//! its own generator from `(master seed, cell, trial)`, so tables do not
//! depend on how many threads ran them.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{GaspParams, MatDotParams, SchemeParams, SchemeTag};
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, EvaluationPoints};
use crate::runtime::{run_job, Cluster, DelayModel, StragglerModel, TrialRecord};
use crate::security::{calibrate, Dims, InputDistribution, NoiseSpec, SearchStrategy};

/// One scheme line of a sweep. `n_servers` defaults to `K + stragglers`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum SchemeEntry {
    #[serde(rename = "matdot")]
    MatDot {
        p: usize,
        x: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_servers: Option<usize>,
    },
    Gasp {
        m: usize,
        n: usize,
        x: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_servers: Option<usize>,
    },
}

impl SchemeEntry {
    pub fn resolve(&self, stragglers: usize) -> Result<SchemeParams> {
        let (minimal, fixed): (SchemeParams, _) = match *self {
            SchemeEntry::MatDot { p, x, n_servers } => (MatDotParams::minimal(p, x)?.into(), n_servers),
            SchemeEntry::Gasp { m, n, x, n_servers } => (GaspParams::minimal(m, n, x)?.into(), n_servers),
        };
        let k = minimal.recovery_threshold();
        let params = minimal.with_servers(fixed.unwrap_or(k + stragglers))?;
        if stragglers > params.n_servers() - k {
            return Err(Error::InvalidParams(format!(
                "{} with {stragglers} stragglers: N − K = {}",
                params.describe(),
                params.n_servers() - k
            )));
        }
        Ok(params)
    }
}

fn default_dims() -> Dims {
    Dims::square(36)
}

fn default_trials() -> usize {
    1000
}

fn default_stragglers() -> Vec<usize> {
    vec![0]
}

fn default_variance() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub summary_csv: String,
    pub summary_json: String,
    /// Per-trial CSV, written only when set.
    #[serde(default)]
    pub trials_csv: Option<String>,
    /// Embed every trial record in the JSON output.
    #[serde(default)]
    pub json_trials: bool,
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            summary_csv: "summary.csv".into(),
            summary_json: "summary.json".into(),
            trials_csv: None,
            json_trials: false,
        }
    }
}

/// Sweep description, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schemes: Vec<SchemeEntry>,
    #[serde(default = "default_dims")]
    pub dims: Dims,
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Budgets as fractions of the input entropy.
    #[serde(default)]
    pub delta_relative: Vec<f64>,
    /// Budgets in bits; swept in addition to `delta_relative`.
    #[serde(default)]
    pub delta_bits: Vec<f64>,
    #[serde(default = "default_stragglers")]
    pub stragglers: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub input: InputDistribution,
    #[serde(default = "default_variance")]
    pub input_variance: f64,
    #[serde(default)]
    pub strategy: SearchStrategy,
    #[serde(default)]
    pub delay: DelayModel,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(schemes: Vec<SchemeEntry>, delta_relative: Vec<f64>) -> Self {
        Self {
            schemes,
            dims: default_dims(),
            trials: default_trials(),
            delta_relative,
            delta_bits: Vec::new(),
            stragglers: default_stragglers(),
            seed: 0,
            input: InputDistribution::default(),
            input_variance: default_variance(),
            strategy: SearchStrategy::default(),
            delay: DelayModel::default(),
            output: OutputPaths::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }

    /// Entropy in bits of one `(A, B)` input pair; the unit of `δ_relative`.
    pub fn input_entropy_bits(&self) -> f64 {
        self.input
            .input_entropy_bits(self.dims, self.input_variance, self.input_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParams("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParams("no schemes to sweep".into()));
        }
        if self.delta_relative.is_empty() && self.delta_bits.is_empty() {
            return Err(Error::InvalidParams("empty leakage budget sweep".into()));
        }
        if let Some(bad) = self
            .delta_relative
            .iter()
            .chain(&self.delta_bits)
            .find(|d| !(d.is_finite() && **d > 0.0))
        {
            return Err(Error::InvalidParams(format!("leakage budget {bad} is not positive")));
        }
        if !(self.input_variance.is_finite() && self.input_variance > 0.0) {
            return Err(Error::InvalidParams("input variance must be positive".into()));
        }
        if self.input_entropy_bits() <= 0.0 {
            return Err(Error::InvalidParams(
                "input entropy is not positive; relative budgets are undefined".into(),
            ));
        }
        for entry in &self.schemes {
            for &s in &self.stragglers {
                entry.resolve(s)?.check_dims(self.dims.as_tuple())?;
            }
        }
        Ok(())
    }

    /// Expands the grid: scheme-major, then stragglers, then budgets in the
    /// order listed (relative ones first).
    pub fn cells(&self) -> Result<Vec<Cell>> {
        self.validate()?;
        let entropy = self.input_entropy_bits();
        let budgets: Vec<(f64, f64)> = self
            .delta_relative
            .iter()
            .map(|&rel| (rel * entropy, rel))
            .chain(self.delta_bits.iter().map(|&bits| (bits, bits / entropy)))
            .collect();
        let mut cells = Vec::new();
        for entry in &self.schemes {
            for &stragglers in &self.stragglers {
                let params = entry.resolve(stragglers)?;
                for &(delta_bits, delta_relative) in &budgets {
                    cells.push(Cell {
                        id: cells.len(),
                        params,
                        stragglers,
                        delta_bits,
                        delta_relative,
                    });
                }
            }
        }
        Ok(cells)
    }
}

/// One grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: usize,
    pub params: SchemeParams,
    pub stragglers: usize,
    pub delta_bits: f64,
    pub delta_relative: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed from `(master, cell, trial)`.
pub fn derive_seed(master: u64, cell: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ cell as u64) ^ trial as u64)
}

/// Matrix with i.i.d. entries of the given distribution and variance
/// `E|z|² = variance`.
pub fn sample_input<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    dist: InputDistribution,
    variance: f64,
    rng: &mut R,
) -> ComplexMatrix {
    match dist {
        InputDistribution::RealGaussian => {
            let normal = Normal::new(0.0, variance.sqrt()).expect("positive variance");
            let data: Vec<f64> = (0..rows * cols).map(|_| normal.sample(rng)).collect();
            ComplexMatrix::from_real(rows, cols, &data).expect("finite samples")
        }
        InputDistribution::ComplexGaussian => {
            let normal = Normal::new(0.0, (variance / 2.0).sqrt()).expect("positive variance");
            ComplexMatrix::from_fn(rows, cols, |_, _| {
                num_complex::Complex64::new(normal.sample(rng), normal.sample(rng))
            })
        }
    }
}

/// One executed trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTrial {
    pub cell: usize,
    pub trial: usize,
    pub record: TrialRecord,
}

/// Aggregates for one cell. Errors are absolute Frobenius norms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: Cell,
    pub sigma2: f64,
    pub worst_set: Vec<usize>,
    pub trials: usize,
    pub mean_err: f64,
    pub median_err: f64,
    /// Sample standard deviation of the per-trial errors.
    pub std_err: f64,
    pub mean_cond: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_records: Option<Vec<TrialRecord>>,
}

impl CellSummary {
    pub fn scheme(&self) -> SchemeTag {
        self.cell.params.tag()
    }

    /// Standard error of the mean.
    pub fn sem(&self) -> f64 {
        self.std_err / (self.trials as f64).sqrt()
    }
}

/// Normalization metadata written next to the numbers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub input: InputDistribution,
    pub input_variance: f64,
    pub input_entries: usize,
    pub input_entropy_bits: f64,
    pub delta_relative_definition: String,
    pub error_metric: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub seed: u64,
    pub dims: Dims,
    pub normalization: Normalization,
    pub cells: Vec<CellSummary>,
    #[serde(skip)]
    pub trials: Vec<SweepTrial>,
}

impl SweepTable {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            seed: config.seed,
            dims: config.dims,
            normalization: normalization(config),
            cells: Vec::new(),
            trials: Vec::new(),
        }
    }
}

fn normalization(config: &ExperimentConfig) -> Normalization {
    Normalization {
        input: config.input,
        input_variance: config.input_variance,
        input_entries: config.dims.input_entries(),
        input_entropy_bits: config.input_entropy_bits(),
        delta_relative_definition: "delta_bits / (entropy of one input entry * (t*s + s*r))".into(),
        error_metric: "Frobenius norm of decoded product minus exact product".into(),
    }
}

fn run_trial(config: &ExperimentConfig, cell: &Cell, noise: &NoiseSpec, trial: usize) -> Result<SweepTrial> {
    let seed = derive_seed(config.seed, cell.id, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Dims { t, s, r } = config.dims;
    let a = sample_input(t, s, config.input, config.input_variance, &mut rng);
    let b = sample_input(s, r, config.input, config.input_variance, &mut rng);
    let job_seed = splitmix64(seed);
    let cluster = Cluster::Simulated { delay: config.delay };
    let outcome = run_job(
        &a,
        &b,
        &cell.params,
        noise,
        &StragglerModel::uniform(cell.stragglers),
        job_seed,
        &cluster,
    )?;
    Ok(SweepTrial {
        cell: cell.id,
        trial,
        record: outcome.record,
    })
}

fn summarize(cell: Cell, sigma2: f64, worst_set: Vec<usize>, records: Vec<TrialRecord>, keep: bool) -> CellSummary {
    let mut errs: Vec<f64> = records.iter().map(|r| r.abs_error).collect();
    let n = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / n;
    let var = if errs.len() > 1 {
        errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    errs.sort_by(f64::total_cmp);
    let mid = errs.len() / 2;
    let median = if errs.len() % 2 == 1 {
        errs[mid]
    } else {
        0.5 * (errs[mid - 1] + errs[mid])
    };
    let mean_cond = records.iter().map(|r| r.condition_number).sum::<f64>() / n;
    CellSummary {
        cell,
        sigma2,
        worst_set,
        trials: records.len(),
        mean_err: mean,
        median_err: median,
        std_err: var.sqrt(),
        mean_cond,
        trial_records: keep.then_some(records),
    }
}

/// Runs every cell of the sweep. Any failing trial aborts the sweep.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    let cells = config.cells()?;
    let mut table = SweepTable::empty(config);
    for cell in cells {
        let points = EvaluationPoints::canonical(cell.params.n_servers());
        let report = calibrate(
            cell.delta_bits,
            config.dims,
            &cell.params,
            &points,
            config.input_variance,
            config.input_variance,
            config.strategy,
        )?;
        let noise = NoiseSpec::new(report.sigma2, config.input_variance, config.input_variance)?;
        log::info!(
            "cell {}: {} stragglers={} δ={:.4e} bits σ²={:.4e}",
            cell.id,
            cell.params.describe(),
            cell.stragglers,
            cell.delta_bits,
            report.sigma2
        );
        let trials: Vec<SweepTrial> = (0..config.trials)
            .into_par_iter()
            .map(|t| run_trial(config, &cell, &noise, t))
            .collect::<Result<_>>()?;
        let records = trials.iter().map(|t| t.record.clone()).collect();
        table.cells.push(summarize(
            cell,
            report.sigma2,
            report.worst_set,
            records,
            config.output.json_trials,
        ));
        table.trials.extend(trials);
    }
    Ok(table)
}

/// Picks out one curve of a table. `None` fields match anything.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CellSelector {
    pub scheme: Option<SchemeTag>,
    pub p_or_mn: Option<usize>,
    pub x: Option<usize>,
    pub n_servers: Option<usize>,
    pub stragglers: Option<usize>,
}

impl CellSelector {
    pub fn matches(&self, cell: &Cell) -> bool {
        let p = &cell.params;
        self.scheme.is_none_or(|s| s == p.tag())
            && self.p_or_mn.is_none_or(|v| v == p.p_or_mn())
            && self.x.is_none_or(|v| v == p.x())
            && self.n_servers.is_none_or(|v| v == p.n_servers())
            && self.stragglers.is_none_or(|v| v == cell.stragglers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub delta_bits: f64,
    pub delta_relative: f64,
    pub stragglers: usize,
    pub mean_err: f64,
    pub sem: f64,
    pub mean_cond: f64,
}

fn series(table: &SweepTable, selector: &CellSelector) -> Result<Vec<SeriesPoint>> {
    let out: Vec<SeriesPoint> = table
        .cells
        .iter()
        .filter(|c| selector.matches(&c.cell))
        .map(|c| SeriesPoint {
            delta_bits: c.cell.delta_bits,
            delta_relative: c.cell.delta_relative,
            stragglers: c.cell.stragglers,
            mean_err: c.mean_err,
            sem: c.sem(),
            mean_cond: c.mean_cond,
        })
        .collect();
    if out.is_empty() {
        return Err(Error::UnknownCell(format!("{selector:?}")));
    }
    Ok(out)
}

/// Mean error against the leakage budget, sorted by increasing budget.
pub fn mean_error_vs_delta(table: &SweepTable, selector: &CellSelector) -> Result<Vec<SeriesPoint>> {
    let mut s = series(table, selector)?;
    s.sort_by(|a, b| a.delta_bits.total_cmp(&b.delta_bits));
    Ok(s)
}

/// Mean error against the straggler count, sorted by count.
pub fn mean_error_vs_stragglers(table: &SweepTable, selector: &CellSelector) -> Result<Vec<SeriesPoint>> {
    let mut s = series(table, selector)?;
    s.sort_by_key(|p| p.stragglers);
    Ok(s)
}

pub const CSV_HEADER: [&str; 13] = [
    "scheme",
    "p_or_mn",
    "X",
    "N",
    "stragglers",
    "delta_bits",
    "delta_relative",
    "sigma2",
    "trials",
    "mean_err",
    "median_err",
    "std_err",
    "mean_cond",
];

/// One summary CSV line, parsed back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scheme: String,
    pub p_or_mn: usize,
    #[serde(rename = "X")]
    pub x: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub stragglers: usize,
    pub delta_bits: f64,
    pub delta_relative: f64,
    pub sigma2: f64,
    pub trials: usize,
    pub mean_err: f64,
    pub median_err: f64,
    pub std_err: f64,
    pub mean_cond: f64,
}

/// 17 significant digits, enough to round-trip any double.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish_csv(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w.into_inner().map_err(|e| Error::file(path, e.into_error()))?;
    inner.flush().map_err(|e| Error::file(path, e))
}

pub fn emit_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record(CSV_HEADER)?;
    for c in &table.cells {
        let p = &c.cell.params;
        w.write_record([
            p.tag().name().to_string(),
            p.p_or_mn().to_string(),
            p.x().to_string(),
            p.n_servers().to_string(),
            c.cell.stragglers.to_string(),
            fmt_f64(c.cell.delta_bits),
            fmt_f64(c.cell.delta_relative),
            fmt_f64(c.sigma2),
            c.trials.to_string(),
            fmt_f64(c.mean_err),
            fmt_f64(c.median_err),
            fmt_f64(c.std_err),
            fmt_f64(c.mean_cond),
        ])?;
    }
    finish_csv(path, w)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<CsvRow>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut rows = Vec::new();
    for row in csv::Reader::from_reader(file).deserialize() {
        rows.push(row?);
    }
    Ok(rows)
}

/// One line per trial, for offline analysis.
pub fn emit_trials_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    w.write_record([
        "cell",
        "trial",
        "seed",
        "sigma2",
        "stragglers",
        "decoding_set",
        "abs_error",
        "rel_error",
        "condition_number",
    ])?;
    let join = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
    for t in &table.trials {
        let r = &t.record;
        w.write_record([
            t.cell.to_string(),
            t.trial.to_string(),
            r.seed.to_string(),
            fmt_f64(r.sigma2),
            join(&r.stragglers),
            join(&r.decoding_set),
            fmt_f64(r.abs_error),
            fmt_f64(r.rel_error),
            fmt_f64(r.condition_number),
        ])?;
    }
    finish_csv(path, w)
}

pub fn emit_json(table: &SweepTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, table)?;
    w.write_all(b"\n").map_err(|e| Error::file(path, e))?;
    w.flush().map_err(|e| Error::file(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::new(
            vec![SchemeEntry::MatDot {
                p: 2,
                x: 1,
                n_servers: None,
            }],
            vec![1e-2],
        );
        c.dims = Dims::square(4);
        c.trials = 3;
        c.seed = 11;
        c
    }

    #[test]
    fn seeds_differ_per_coordinate() {
        let s = derive_seed(1, 0, 0);
        assert_ne!(s, derive_seed(1, 0, 1));
        assert_ne!(s, derive_seed(1, 1, 0));
        assert_ne!(s, derive_seed(2, 0, 0));
        assert_eq!(s, derive_seed(1, 0, 0));
    }

    #[test]
    fn config_json_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"schemes":[{"scheme":"gasp","m":2,"n":2,"x":3}],"delta_relative":[0.01]}"#,
        )
        .unwrap();
        assert_eq!(c.trials, 1000);
        assert_eq!(c.dims, Dims::square(36));
        assert_eq!(c.input, InputDistribution::RealGaussian);
        assert_eq!(c.cells().unwrap()[0].params.n_servers(), 13);
    }

    #[test]
    fn invalid_configs() {
        let mut c = tiny();
        c.trials = 0;
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.delta_relative = vec![0.0];
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.dims = Dims::square(5);
        assert!(c.validate().is_err());
        let mut c = tiny();
        c.schemes = vec![SchemeEntry::MatDot {
            p: 2,
            x: 1,
            n_servers: Some(6),
        }];
        c.stragglers = vec![2];
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_order_and_entropy() {
        let mut c = tiny();
        c.stragglers = vec![0, 1];
        c.delta_relative = vec![1e-3, 1e-2];
        let cells = c.cells().unwrap();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[1].stragglers, 0);
        assert_eq!(cells[2].stragglers, 1);
        assert_eq!(cells[2].params.n_servers(), 6);
        let h = 32.0 * 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).log2();
        assert!((cells[1].delta_bits - 1e-2 * h).abs() < 1e-12);
    }

    #[test]
    fn median_of_even_count() {
        let cell = tiny().cells().unwrap()[0];
        let rec = |e: f64| TrialRecord {
            seed: 0,
            scheme: String::new(),
            sigma2: 1.0,
            stragglers: vec![],
            responders: vec![],
            decoding_set: vec![],
            abs_error: e,
            rel_error: e,
            condition_number: 1.0,
            timings: Default::default(),
        };
        let s = summarize(cell, 1.0, vec![0], vec![rec(4.0), rec(1.0), rec(2.0), rec(3.0)], false);
        assert_eq!(s.median_err, 2.5);
        assert_eq!(s.mean_err, 2.5);
        assert!((s.std_err - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn unknown_cell() {
        let table = SweepTable::empty(&tiny());
        assert!(matches!(
            mean_error_vs_delta(&table, &CellSelector::default()),
            Err(Error::UnknownCell(_))
        ));
    }
}
