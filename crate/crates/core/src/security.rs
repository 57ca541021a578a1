//! Leakage accounting for the analog codes.
//!
//! For a colluding set `X` of servers, the information one side's shares
//! reveal is bounded (in bits) by
//!
//! ```text
//! I(A; Ã_X) <= block_elements / (σ² ln 2) · Tr(Γ⁻¹ Σ')
//! ```
//!
//! where `Γ` is the Gram matrix of the mask columns of the generator
//! restricted to `X` and `Σ'` is the covariance those servers see from the
//! data terms. Both are indexed by colluding server. The bound is exactly
//! proportional to `1/σ²`, so the mask variance for a budget `δ` follows in
//! closed form from the worst colluding set.

use std::f64::consts::{E, LN_2, PI};

use itertools::Itertools;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codec::{SchemeParams, SchemeTag, Side};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_gram, powers, trace_of_solve, ComplexMatrix, EvaluationPoints};

/// Above this many subsets the automatic strategy falls back to the
/// consecutive-window heuristic.
pub const AUTO_EXHAUSTIVE_LIMIT: u128 = 20_000;
/// Hard cap for an explicitly requested exhaustive search.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Relative slack used when comparing bounds across colluding sets.
const TIE_TOLERANCE: f64 = 1e-9;

/// Shapes of the two inputs: `A` is `t×s`, `B` is `s×r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub t: usize,
    pub s: usize,
    pub r: usize,
}

impl Dims {
    pub fn new(t: usize, s: usize, r: usize) -> Self {
        Self { t, s, r }
    }

    pub fn square(n: usize) -> Self {
        Self::new(n, n, n)
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.t, self.s, self.r)
    }

    pub fn input_entries(&self) -> usize {
        self.t * self.s + self.s * self.r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Complex variance `E|z|²` of every mask entry.
    pub sigma2: f64,
    pub input_sigma2_a: f64,
    pub input_sigma2_b: f64,
}

impl NoiseSpec {
    pub fn new(sigma2: f64, input_sigma2_a: f64, input_sigma2_b: f64) -> Result<Self> {
        for (name, v) in [
            ("sigma2", sigma2),
            ("input_sigma2_a", input_sigma2_a),
            ("input_sigma2_b", input_sigma2_b),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            sigma2,
            input_sigma2_a,
            input_sigma2_b,
        })
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(sigma2, self.input_sigma2_a, self.input_sigma2_b)
    }

    fn input_variance(&self, side: Side) -> f64 {
        match side {
            Side::A => self.input_sigma2_a,
            Side::B => self.input_sigma2_b,
        }
    }
}

/// Declared distribution of the input entries, used for the entropy proxy
/// behind relative leakage budgets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputDistribution {
    #[default]
    RealGaussian,
    ComplexGaussian,
}

impl InputDistribution {
    /// Differential entropy in bits of one entry with the given variance.
    pub fn entry_entropy_bits(self, variance: f64) -> f64 {
        match self {
            InputDistribution::RealGaussian => 0.5 * (2.0 * PI * E * variance).log2(),
            InputDistribution::ComplexGaussian => (PI * E * variance).log2(),
        }
    }

    /// Entropy of all `ts + sr` input entries.
    pub fn input_entropy_bits(self, dims: Dims, var_a: f64, var_b: f64) -> f64 {
        (dims.t * dims.s) as f64 * self.entry_entropy_bits(var_a)
            + (dims.s * dims.r) as f64 * self.entry_entropy_bits(var_b)
    }
}

/// Generator rows of one side, evaluated at every point: `data_rows` has one
/// row per data block, `noise_rows` one row per mask.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSplit {
    pub side: Side,
    pub data_rows: ComplexMatrix,
    pub noise_rows: ComplexMatrix,
}

pub fn generator_split(params: &SchemeParams, points: &EvaluationPoints, side: Side) -> GeneratorSplit {
    let data = params.data_exponents(side);
    let noise = params.noise_exponents();
    let top = data.iter().chain(&noise).copied().max().unwrap_or(0);
    let table: Vec<Vec<Complex64>> = points.as_slice().iter().map(|&z| powers(z, top + 1)).collect();
    let rows = |exps: &[usize]| ComplexMatrix::from_fn(exps.len(), points.len(), |j, i| table[i][exps[j]]);
    GeneratorSplit {
        side,
        data_rows: rows(&data),
        noise_rows: rows(&noise),
    }
}

/// Sorted set of distinct colluding server ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CollusionSet(Vec<usize>);

impl CollusionSet {
    pub fn new(mut indices: Vec<usize>, n_servers: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams(format!("duplicate colluder in {indices:?}")));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= n_servers) {
            return Err(Error::InvalidParams(format!(
                "colluder {bad} outside [0, {n_servers})"
            )));
        }
        Ok(Self(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Whether the set is a window of cyclically adjacent servers.
    pub fn is_cyclically_consecutive(&self, n_servers: usize) -> bool {
        consecutive_sets(n_servers, self.len()).iter().any(|s| s == self)
    }
}

/// The `n` windows `{i, i+1, .., i+x−1} mod n` (deduplicated).
pub fn consecutive_sets(n: usize, x: usize) -> Vec<CollusionSet> {
    let mut out: Vec<CollusionSet> = (0..n)
        .map(|start| CollusionSet::new((0..x).map(|k| (start + k) % n).collect(), n))
        .filter_map(Result::ok)
        .collect();
    out.sort();
    out.dedup();
    out
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// `Γ`, `Σ'` and `Tr(Γ⁻¹ Σ')` for one side and one colluding set.
#[derive(Clone, Debug, PartialEq)]
pub struct SideTrace {
    pub gamma: ComplexMatrix,
    pub sigma_prime: ComplexMatrix,
    pub trace: f64,
}

pub fn side_trace(split: &GeneratorSplit, colluders: &CollusionSet, input_sigma2: f64) -> Result<SideTrace> {
    let cols = colluders.indices();
    let w = split.noise_rows.select_columns(cols);
    if w.rows() != cols.len() {
        return Err(Error::InvalidParams(format!(
            "collusion set of size {} does not match X = {}",
            cols.len(),
            w.rows()
        )));
    }
    let d = split.data_rows.select_columns(cols);
    // Both Gram matrices are indexed by colluding server: entry (i, l) sums
    // F[j][i] conj(F[j][l]) over the relevant generator rows j.
    let gamma = hermitian_gram(&w.transpose());
    let sigma_prime = hermitian_gram(&d.transpose()).scaled(Complex64::new(input_sigma2, 0.0));
    let trace = trace_of_solve(&gamma, &sigma_prime)?;
    Ok(SideTrace {
        gamma,
        sigma_prime,
        trace,
    })
}

/// Upper bound in bits on `I(input; shares of colluders)` for the side of
/// `split`.
pub fn leakage_bound(
    split: &GeneratorSplit,
    colluders: &CollusionSet,
    noise: &NoiseSpec,
    dims: Dims,
    params: &SchemeParams,
) -> Result<f64> {
    if colluders.len() != params.x() {
        return Err(Error::InvalidParams(format!(
            "collusion set has {} servers, scheme tolerates X = {}",
            colluders.len(),
            params.x()
        )));
    }
    let st = side_trace(split, colluders, noise.input_variance(split.side))?;
    Ok(bits_from_trace(st.trace, split.side, noise.sigma2, dims, params))
}

fn bits_from_trace(trace: f64, side: Side, sigma2: f64, dims: Dims, params: &SchemeParams) -> f64 {
    let elements = params.block_elements(side, dims.as_tuple()) as f64;
    (elements / LN_2) * trace / sigma2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchStrategy {
    Exhaustive,
    Consecutive,
    #[default]
    Auto,
}

/// Outcome of a worst-case colluding-set search.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstCollusion {
    pub set: CollusionSet,
    pub bound_a: f64,
    pub bound_b: f64,
    /// Strategy actually run (never `Auto`).
    pub strategy: SearchStrategy,
    /// `Auto` had to fall back to the consecutive heuristic.
    pub heuristic_fallback: bool,
}

impl WorstCollusion {
    pub fn total(&self) -> f64 {
        self.bound_a + self.bound_b
    }
}

fn resolve_strategy(n: usize, x: usize, strategy: SearchStrategy) -> Result<(SearchStrategy, bool)> {
    let count = binomial(n, x);
    match strategy {
        SearchStrategy::Exhaustive if count > EXHAUSTIVE_LIMIT => {
            Err(Error::SearchTooLarge { n, x, count })
        }
        SearchStrategy::Auto if count > AUTO_EXHAUSTIVE_LIMIT => {
            log::warn!("C({n}, {x}) = {count} colluding sets; using consecutive windows only");
            Ok((SearchStrategy::Consecutive, true))
        }
        SearchStrategy::Auto => Ok((SearchStrategy::Exhaustive, false)),
        other => Ok((other, false)),
    }
}

/// Maximizes `bound_a + bound_b` over colluding sets. Candidates are visited
/// in lexicographic order and only a strictly larger total replaces the
/// incumbent, so ties go to the lexicographically smallest set.
pub fn worst_collusion(
    split_a: &GeneratorSplit,
    split_b: &GeneratorSplit,
    noise: &NoiseSpec,
    dims: Dims,
    params: &SchemeParams,
    strategy: SearchStrategy,
) -> Result<WorstCollusion> {
    let n = params.n_servers();
    let x = params.x();
    let (used, fallback) = resolve_strategy(n, x, strategy)?;
    let candidates: Box<dyn Iterator<Item = CollusionSet>> = match used {
        SearchStrategy::Consecutive => Box::new(consecutive_sets(n, x).into_iter()),
        _ => Box::new((0..n).combinations(x).map(CollusionSet)),
    };

    let mut best: Option<(CollusionSet, f64, f64)> = None;
    for set in candidates {
        let a = leakage_bound(split_a, &set, noise, dims, params)?;
        let b = leakage_bound(split_b, &set, noise, dims, params)?;
        if best.as_ref().is_none_or(|(_, ba, bb)| a + b > ba + bb) {
            best = Some((set, a, b));
        }
    }
    let (set, bound_a, bound_b) =
        best.ok_or_else(|| Error::InvalidParams("no colluding sets to search".into()))?;
    Ok(WorstCollusion {
        set,
        bound_a,
        bound_b,
        strategy: used,
        heuristic_fallback: fallback,
    })
}

/// Leakage summary for one calibrated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub scheme: SchemeTag,
    pub params: SchemeParams,
    pub dims: Dims,
    pub delta_bits: f64,
    pub sigma2: f64,
    pub input_sigma2_a: f64,
    pub input_sigma2_b: f64,
    pub worst_set: Vec<usize>,
    pub bound_a_bits: f64,
    pub bound_b_bits: f64,
    pub strategy: SearchStrategy,
    pub heuristic_fallback: bool,
    /// Whether some cyclically consecutive window attains the exhaustive
    /// maximum; `None` when only windows were searched.
    pub conjecture_verified: Option<bool>,
    pub bound_kind: String,
    #[serde(skip)]
    pub worst_a: Option<SideTrace>,
    #[serde(skip)]
    pub worst_b: Option<SideTrace>,
}

impl LeakageReport {
    pub fn total_bits(&self) -> f64 {
        self.bound_a_bits + self.bound_b_bits
    }
}

fn bound_kind(params: &SchemeParams) -> &'static str {
    match params {
        SchemeParams::MatDot(_) => "analog-MatDot bound",
        SchemeParams::Gasp(_) => "analog-GASP bound (extended)",
    }
}

/// Smallest mask variance meeting a leakage budget of `delta_bits` over the
/// searched colluding sets.
pub fn calibrate_sigma2(
    delta_bits: f64,
    dims: Dims,
    params: &SchemeParams,
    points: &EvaluationPoints,
    input_sigma2_a: f64,
    input_sigma2_b: f64,
    strategy: SearchStrategy,
) -> Result<NoiseSpec> {
    let report = calibrate(delta_bits, dims, params, points, input_sigma2_a, input_sigma2_b, strategy)?;
    NoiseSpec::new(report.sigma2, input_sigma2_a, input_sigma2_b)
}

/// Full calibration: evaluates the worst set at unit mask variance and
/// rescales, since every bound is proportional to `1/σ²`.
pub fn calibrate(
    delta_bits: f64,
    dims: Dims,
    params: &SchemeParams,
    points: &EvaluationPoints,
    input_sigma2_a: f64,
    input_sigma2_b: f64,
    strategy: SearchStrategy,
) -> Result<LeakageReport> {
    if !(delta_bits > 0.0) || !delta_bits.is_finite() {
        return Err(Error::InvalidParams(format!("leakage budget must be positive, got {delta_bits}")));
    }
    params.validate()?;
    params.check_dims(dims.as_tuple())?;
    if points.len() != params.n_servers() {
        return Err(Error::InvalidParams(format!(
            "{} evaluation points for N = {}",
            points.len(),
            params.n_servers()
        )));
    }
    let unit = NoiseSpec::new(1.0, input_sigma2_a, input_sigma2_b)?;
    let split_a = generator_split(params, points, Side::A);
    let split_b = generator_split(params, points, Side::B);
    let worst = worst_collusion(&split_a, &split_b, &unit, dims, params, strategy)?;

    let conjecture_verified = if worst.strategy == SearchStrategy::Exhaustive {
        let windows =
            worst_collusion(&split_a, &split_b, &unit, dims, params, SearchStrategy::Consecutive)?;
        Some(windows.total() >= worst.total() * (1.0 - TIE_TOLERANCE))
    } else {
        None
    };

    let sigma2 = worst.total() / delta_bits;
    let worst_a = side_trace(&split_a, &worst.set, input_sigma2_a)?;
    let worst_b = side_trace(&split_b, &worst.set, input_sigma2_b)?;
    Ok(LeakageReport {
        scheme: params.tag(),
        params: *params,
        dims,
        delta_bits,
        sigma2,
        input_sigma2_a,
        input_sigma2_b,
        worst_set: worst.set.indices().to_vec(),
        bound_a_bits: worst.bound_a / sigma2,
        bound_b_bits: worst.bound_b / sigma2,
        strategy: worst.strategy,
        heuristic_fallback: worst.heuristic_fallback,
        conjecture_verified,
        bound_kind: bound_kind(params).to_string(),
        worst_a: Some(worst_a),
        worst_b: Some(worst_b),
    })
}

/// Exact `I(a + r·α; a)` in bits for scalar Gaussian secret `a` and mask `r`:
/// `½ log2(1 + σ_a² / (|α|² σ_r²))`.
pub fn scalar_leakage_exact(sigma_a2: f64, sigma_r2: f64, alpha: Complex64) -> Result<f64> {
    if !(sigma_a2 > 0.0) || !(sigma_r2 > 0.0) {
        return Err(Error::InvalidParams("variances must be positive".into()));
    }
    let gain = alpha.norm_sqr();
    if gain == 0.0 {
        return Err(Error::InvalidParams(
            "evaluation point 0 puts the secret into the share unmasked".into(),
        ));
    }
    Ok(0.5 * (1.0 + sigma_a2 / (gain * sigma_r2)).log2())
}
