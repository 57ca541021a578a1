//! Analog MatDot and GASP codecs.
//!
//! Both codes hide the data blocks behind `X` circular complex Gaussian
//! masks, evaluate the two encoding polynomials at roots of unity, and
//! recover the product by interpolating `h(x) = f(x) g(x)` from any `K`
//! server responses.

mod params;
pub mod wire;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub use self::params::{GaspParams, MatDotParams, SchemeParams, SchemeTag, Side};
use crate::error::{Error, Result};
use crate::linalg::{powers, solve_vandermonde, ComplexMatrix, EvaluationPoints};
use crate::partition::{assemble_outer, split_inner, split_outer, InnerPartition, OuterPartition};
use crate::security::NoiseSpec;

/// Shares sent to one server.
#[derive(Clone, Debug, PartialEq)]
pub struct Share {
    pub server: usize,
    /// Exponent `i` of the evaluation point `ζ_N^i`.
    pub point_index: u32,
    pub point: Complex64,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShareSet {
    pub scheme: SchemeTag,
    pub shares: Vec<Share>,
    pub noise: Option<NoiseSpec>,
}

/// One server's product `Ã_i B̃_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Response {
    pub server: usize,
    pub point_index: u32,
    pub point: Complex64,
    pub product: ComplexMatrix,
}

/// Responses in arrival order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResponseSet {
    responses: Vec<Response>,
}

impl ResponseSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_arrivals(responses: Vec<Response>) -> Self {
        Self { responses }
    }

    pub fn push(&mut self, response: Response) {
        self.responses.push(response);
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn responses(&self) -> &[Response] {
        &self.responses
    }

    /// Server ids in arrival order.
    pub fn responders(&self) -> Vec<usize> {
        self.responses.iter().map(|r| r.server).collect()
    }

    /// The first `k` arrivals, re-ordered by server id so the decoded value
    /// depends only on which servers answered.
    pub fn decoding_subset(&self, k: usize) -> Result<Vec<&Response>> {
        if self.responses.len() < k {
            return Err(Error::NotEnoughResponses {
                got: self.responses.len(),
                need: k,
            });
        }
        let mut used: Vec<&Response> = self.responses[..k].iter().collect();
        used.sort_by_key(|r| r.server);
        if let Some(w) = used.windows(2).find(|w| w[0].server == w[1].server) {
            return Err(Error::Malformed(format!("duplicate response from server {}", w[0].server)));
        }
        Ok(used)
    }
}

impl ShareSet {
    /// What each server sends back after multiplying its pair.
    pub fn respond_all(&self) -> Result<Vec<Response>> {
        self.shares
            .iter()
            .map(|s| {
                Ok(Response {
                    server: s.server,
                    point_index: s.point_index,
                    point: s.point,
                    product: crate::linalg::matmul(&s.a, &s.b)?,
                })
            })
            .collect()
    }
}

/// `count` matrices of i.i.d. circular complex Gaussians with total
/// variance `E|z|^2 = sigma2`.
pub fn sample_masks<R: Rng + ?Sized>(
    (rows, cols): (usize, usize),
    count: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<Vec<ComplexMatrix>> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::InvalidParams(format!("mask variance must be positive, got {sigma2}")));
    }
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt())
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok((0..count)
        .map(|_| {
            ComplexMatrix::from_fn(rows, cols, |_, _| {
                let re = normal.sample(rng);
                let im = normal.sample(rng);
                Complex64::new(re, im)
            })
        })
        .collect())
}

/// Evaluates `Σ terms[t].1 · α^{terms[t].0}` with terms accumulated in
/// increasing exponent order.
fn evaluate_poly(
    terms: &[(usize, &ComplexMatrix)],
    alpha_powers: &[Complex64],
) -> Result<ComplexMatrix> {
    let mut sorted: Vec<&(usize, &ComplexMatrix)> = terms.iter().collect();
    sorted.sort_by_key(|(e, _)| *e);
    let shape = sorted[0].1.shape();
    let mut acc = ComplexMatrix::zeros(shape.0, shape.1);
    for (e, m) in sorted {
        acc.add_scaled(m, alpha_powers[*e])?;
    }
    Ok(acc)
}

struct PolyPair<'a> {
    a_terms: Vec<(usize, &'a ComplexMatrix)>,
    b_terms: Vec<(usize, &'a ComplexMatrix)>,
}

fn check_uniform(label: &str, mats: &[&ComplexMatrix]) -> Result<()> {
    let shape = mats[0].shape();
    if let Some(bad) = mats.iter().find(|m| m.shape() != shape) {
        return Err(Error::InvalidParams(format!(
            "{label}: block {}x{} does not match {}x{}",
            bad.rows(),
            bad.cols(),
            shape.0,
            shape.1
        )));
    }
    Ok(())
}

fn encode_with(
    scheme: SchemeTag,
    polys: PolyPair<'_>,
    points: &EvaluationPoints,
) -> Result<ShareSet> {
    check_uniform("A side", &polys.a_terms.iter().map(|t| t.1).collect::<Vec<_>>())?;
    check_uniform("B side", &polys.b_terms.iter().map(|t| t.1).collect::<Vec<_>>())?;
    let max_exp = polys
        .a_terms
        .iter()
        .chain(&polys.b_terms)
        .map(|t| t.0)
        .max()
        .unwrap_or(0);

    let shares = points
        .as_slice()
        .iter()
        .enumerate()
        .map(|(server, &alpha)| {
            let pw = powers(alpha, max_exp + 1);
            Ok(Share {
                server,
                point_index: EvaluationPoints::point_index(server),
                point: alpha,
                a: evaluate_poly(&polys.a_terms, &pw)?,
                b: evaluate_poly(&polys.b_terms, &pw)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ShareSet {
        scheme,
        shares,
        noise: None,
    })
}

fn check_mask_counts(masks_r: &[ComplexMatrix], masks_s: &[ComplexMatrix]) -> Result<()> {
    if masks_r.is_empty() || masks_r.len() != masks_s.len() {
        return Err(Error::InvalidParams(format!(
            "need the same positive number of masks on both sides, got {} and {}",
            masks_r.len(),
            masks_s.len()
        )));
    }
    Ok(())
}

/// `Ã_i = Σ_j A_j α_i^{j−1} + Σ_k R_k α_i^{p+k−1}`,
/// `B̃_i = Σ_j B_j α_i^{p−j} + Σ_k S_k α_i^{p+k−1}`.
pub fn encode_matdot(
    part: &InnerPartition,
    masks_r: &[ComplexMatrix],
    masks_s: &[ComplexMatrix],
    points: &EvaluationPoints,
) -> Result<ShareSet> {
    check_mask_counts(masks_r, masks_s)?;
    let params = SchemeParams::MatDot(MatDotParams {
        p: part.p(),
        x: masks_r.len(),
        n_servers: points.len(),
    });
    encode_generic(&params, &part.blocks_a, &part.blocks_b, masks_r, masks_s, points)
}

/// `Ã_i = Σ_j A_j α_i^{j−1} + Σ_k R_k α_i^{mn+k−1}`,
/// `B̃_i = Σ_j B_j α_i^{m(j−1)} + Σ_k S_k α_i^{mn+k−1}`.
pub fn encode_gasp(
    part: &OuterPartition,
    masks_r: &[ComplexMatrix],
    masks_s: &[ComplexMatrix],
    points: &EvaluationPoints,
) -> Result<ShareSet> {
    check_mask_counts(masks_r, masks_s)?;
    let params = SchemeParams::Gasp(GaspParams {
        m: part.m(),
        n: part.n(),
        x: masks_r.len(),
        n_servers: points.len(),
    });
    encode_generic(&params, &part.blocks_a, &part.blocks_b, masks_r, masks_s, points)
}

fn encode_generic(
    params: &SchemeParams,
    blocks_a: &[ComplexMatrix],
    blocks_b: &[ComplexMatrix],
    masks_r: &[ComplexMatrix],
    masks_s: &[ComplexMatrix],
    points: &EvaluationPoints,
) -> Result<ShareSet> {
    let noise = params.noise_exponents();
    let a_terms = params
        .data_exponents(Side::A)
        .into_iter()
        .zip(blocks_a)
        .chain(noise.iter().copied().zip(masks_r))
        .collect();
    let b_terms = params
        .data_exponents(Side::B)
        .into_iter()
        .zip(blocks_b)
        .chain(noise.iter().copied().zip(masks_s))
        .collect();
    encode_with(params.tag(), PolyPair { a_terms, b_terms }, points)
}

/// Partitions `a` and `b`, draws `2X` masks of variance `noise.sigma2`
/// (all `R_k` first, then all `S_k`), and evaluates the shares at the
/// canonical roots of unity.
pub fn encode<R: Rng + ?Sized>(
    params: &SchemeParams,
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Result<ShareSet> {
    params.validate()?;
    let points = EvaluationPoints::canonical(params.n_servers());
    let x = params.x();
    let mut set = match params {
        SchemeParams::MatDot(p) => {
            let part = split_inner(a, b, p.p)?;
            let r = sample_masks(part.blocks_a[0].shape(), x, noise.sigma2, rng)?;
            let s = sample_masks(part.blocks_b[0].shape(), x, noise.sigma2, rng)?;
            encode_matdot(&part, &r, &s, &points)?
        }
        SchemeParams::Gasp(p) => {
            let part = split_outer(a, b, p.m, p.n)?;
            let r = sample_masks(part.blocks_a[0].shape(), x, noise.sigma2, rng)?;
            let s = sample_masks(part.blocks_b[0].shape(), x, noise.sigma2, rng)?;
            encode_gasp(&part, &r, &s, &points)?
        }
    };
    set.noise = Some(*noise);
    Ok(set)
}

fn interpolate(responses: &ResponseSet, k: usize) -> Result<Vec<ComplexMatrix>> {
    let used = responses.decoding_subset(k)?;
    let points: Vec<Complex64> = used.iter().map(|r| r.point).collect();
    let rhs: Vec<ComplexMatrix> = used.iter().map(|r| r.product.clone()).collect();
    solve_vandermonde(&points, &rhs)
}

/// Interpolates `h` from the first `K` responses and returns the
/// coefficient of `x^{p−1}`, which is `AB`.
pub fn decode_matdot(responses: &ResponseSet, params: &MatDotParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let mut coeffs = interpolate(responses, params.recovery_threshold())?;
    Ok(coeffs.swap_remove(params.p - 1))
}

/// Interpolates `h` and reads `A_j B_{j'}` off the coefficient of
/// `x^{m(j'−1)+j−1}`.
pub fn decode_gasp(responses: &ResponseSet, params: &GaspParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let coeffs = interpolate(responses, params.recovery_threshold())?;
    let grid: Vec<Vec<ComplexMatrix>> = (0..params.m)
        .map(|j| (0..params.n).map(|jp| coeffs[params.m * jp + j].clone()).collect())
        .collect();
    assemble_outer(&grid)
}

pub fn decode(responses: &ResponseSet, params: &SchemeParams) -> Result<ComplexMatrix> {
    match params {
        SchemeParams::MatDot(p) => decode_matdot(responses, p),
        SchemeParams::Gasp(p) => decode_gasp(responses, p),
    }
}
