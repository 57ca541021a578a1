//! Coordinator side of a job: encode, hand the shares to `N` workers, wait
//! for the fastest `K`, decode.
//!
//! Two deployments are supported. In simulation every worker runs
//! in-process and arrival order comes from pseudo-random delays drawn from
//! the job seed, so a job is fully reproducible. In networked mode the
//! shares travel to worker processes over TCP and arrival order is whatever
//! the network produces.

pub mod protocol;
pub mod worker;

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpStream};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use self::protocol::{Frame, ReadOutcome, FRAME_ERROR, FRAME_RESULT};
pub use self::worker::{worker_serve, TranscriptEntry, TranscriptLog, WorkerHandle, WorkerServer};
use crate::codec::{self, wire, Response, ResponseSet, SchemeParams, ShareSet};
use crate::error::{Error, Result};
use crate::linalg::{cmat, condition_number, frobenius_distance, matmul, vandermonde, ComplexMatrix};
use crate::security::NoiseSpec;

pub const DEFAULT_NETWORK_TIMEOUT: Duration = Duration::from_secs(30);

/// Simulated compute latency: `base + jitter · Exp(1)` seconds per worker.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayModel {
    pub base: f64,
    pub jitter: f64,
}

impl Default for DelayModel {
    fn default() -> Self {
        Self {
            base: 1.0,
            jitter: 0.25,
        }
    }
}

impl DelayModel {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e: f64 = Exp1.sample(rng);
        self.base + self.jitter * e
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StragglerSelection {
    #[default]
    UniformRandom,
    Fixed(Vec<usize>),
}

/// Stragglers never answer.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StragglerModel {
    pub count: usize,
    pub selection: StragglerSelection,
}

impl StragglerModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn uniform(count: usize) -> Self {
        Self {
            count,
            selection: StragglerSelection::UniformRandom,
        }
    }

    pub fn fixed(mut servers: Vec<usize>) -> Self {
        servers.sort_unstable();
        servers.dedup();
        Self {
            count: servers.len(),
            selection: StragglerSelection::Fixed(servers),
        }
    }

    /// Sorted straggler ids. Requires `count <= n − k`.
    pub fn choose<R: Rng + ?Sized>(&self, n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.count > n.saturating_sub(k) {
            return Err(Error::InvalidParams(format!(
                "{} stragglers exceed the N − K = {} the code tolerates",
                self.count,
                n.saturating_sub(k)
            )));
        }
        let mut out = match &self.selection {
            StragglerSelection::UniformRandom => sample(rng, n, self.count).into_vec(),
            StragglerSelection::Fixed(ids) => {
                if let Some(&bad) = ids.iter().find(|&&i| i >= n) {
                    return Err(Error::InvalidParams(format!("straggler {bad} is not a server")));
                }
                ids.clone()
            }
        };
        out.sort_unstable();
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkerMode {
    InProcess,
    Network(SocketAddr),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorkerConfig {
    pub id: usize,
    pub mode: WorkerMode,
    pub delay: DelayModel,
}

/// Where the `N` servers of a job live.
#[derive(Clone, Debug)]
pub enum Cluster {
    Simulated { delay: DelayModel },
    /// Server `i` is served by `endpoints[i % endpoints.len()]`.
    Networked {
        endpoints: Vec<SocketAddr>,
        timeout: Duration,
    },
}

impl Cluster {
    pub fn simulated() -> Self {
        Cluster::Simulated {
            delay: DelayModel::default(),
        }
    }

    pub fn networked(endpoints: Vec<SocketAddr>) -> Self {
        Cluster::Networked {
            endpoints,
            timeout: DEFAULT_NETWORK_TIMEOUT,
        }
    }

    /// Per-server configuration for a job with `n` servers.
    pub fn workers(&self, n: usize) -> Vec<WorkerConfig> {
        (0..n)
            .map(|id| match self {
                Cluster::Simulated { delay } => WorkerConfig {
                    id,
                    mode: WorkerMode::InProcess,
                    delay: *delay,
                },
                Cluster::Networked { endpoints, .. } => WorkerConfig {
                    id,
                    mode: WorkerMode::Network(endpoints[id % endpoints.len()]),
                    delay: DelayModel { base: 0.0, jitter: 0.0 },
                },
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub encode_secs: f64,
    pub compute_secs: f64,
    pub decode_secs: f64,
}

/// Everything observable about one job.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub scheme: String,
    pub sigma2: f64,
    pub stragglers: Vec<usize>,
    /// Servers whose responses were collected, in arrival order.
    pub responders: Vec<usize>,
    /// The `K` servers actually interpolated from, sorted.
    pub decoding_set: Vec<usize>,
    pub abs_error: f64,
    pub rel_error: f64,
    pub condition_number: f64,
    /// Wall-clock; the only non-reproducible field.
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug)]
pub struct JobOutcome {
    pub product: ComplexMatrix,
    pub record: TrialRecord,
    /// In-process worker logs, indexed by server (empty in networked mode).
    pub transcripts: Vec<TranscriptLog>,
}

/// Reads responses until `k` have arrived. Stops early with
/// `NotEnoughResponses` if the senders all hang up or `timeout` passes.
pub fn collect_fastest(
    pending: &Receiver<Response>,
    k: usize,
    timeout: Option<Duration>,
) -> Result<ResponseSet> {
    let deadline = timeout.map(|t| Instant::now() + t);
    let mut out = ResponseSet::new();
    while out.len() < k {
        let next = match deadline {
            None => pending.recv().map_err(|_| RecvTimeoutError::Disconnected),
            Some(d) => pending.recv_timeout(d.saturating_duration_since(Instant::now())),
        };
        match next {
            Ok(r) => out.push(r),
            Err(_) => {
                return Err(Error::NotEnoughResponses {
                    got: out.len(),
                    need: k,
                })
            }
        }
    }
    Ok(out)
}

/// Runs every non-straggler in-process and queues the responses in
/// simulated arrival order (delay, then server id).
fn dispatch_simulated<R: Rng + ?Sized>(
    shares: &ShareSet,
    stragglers: &[usize],
    delay: &DelayModel,
    rng: &mut R,
) -> Result<(Receiver<Response>, Vec<TranscriptLog>)> {
    let delays: Vec<f64> = shares.shares.iter().map(|_| delay.draw(rng)).collect();
    let transcripts: Vec<TranscriptLog> = shares.shares.iter().map(|_| TranscriptLog::new()).collect();

    let mut arrivals = Vec::new();
    for share in &shares.shares {
        if stragglers.binary_search(&share.server).is_ok() {
            continue;
        }
        let header = share.header(shares.scheme);
        let payload = wire::encode_share(&header, &share.a, &share.b);
        let (_, product) = worker::handle_task(share.server as u64, &payload, &transcripts[share.server])
            .map_err(|f| Error::Remote {
                code: f.code,
                message: f.message,
            })?;
        arrivals.push((
            delays[share.server],
            Response {
                server: share.server,
                point_index: share.point_index,
                point: share.point,
                product,
            },
        ));
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.server.cmp(&b.1.server)));

    let (tx, rx) = mpsc::channel();
    for (_, resp) in arrivals {
        tx.send(resp).expect("receiver held locally");
    }
    Ok((rx, transcripts))
}

fn remote_task(endpoint: SocketAddr, task: Frame, timeout: Duration) -> Result<ComplexMatrix> {
    let stream = TcpStream::connect_timeout(&endpoint, timeout)?;
    stream.set_read_timeout(Some(timeout))?;
    stream.set_write_timeout(Some(timeout))?;
    let _ = stream.set_nodelay(true);
    let mut writer = BufWriter::new(stream.try_clone()?);
    protocol::write_frame(&mut writer, &task)?;
    let mut reader = BufReader::new(stream);
    let reply = match protocol::read_frame(&mut reader)? {
        ReadOutcome::Frame(f) => f,
        ReadOutcome::Closed => return Err(Error::Malformed("worker closed the connection".into())),
        ReadOutcome::Malformed { reason, .. } => return Err(Error::Malformed(reason)),
    };
    if reply.task_id != task.task_id {
        return Err(Error::Malformed(format!(
            "reply for task {} to task {}",
            reply.task_id, task.task_id
        )));
    }
    match reply.kind {
        FRAME_RESULT => {
            let (m, used) = cmat::from_bytes(&reply.payload)?;
            if used != reply.payload.len() {
                return Err(Error::Malformed("trailing bytes in RESULT".into()));
            }
            Ok(m)
        }
        FRAME_ERROR => {
            let (code, message) = reply.parse_error()?;
            Err(Error::Remote { code, message })
        }
        other => Err(Error::Malformed(format!("unexpected frame type {other}"))),
    }
}

/// Sends every non-straggler's TASK concurrently; responses are delivered
/// in the order they come back.
fn dispatch_networked(
    shares: &ShareSet,
    stragglers: &[usize],
    endpoints: &[SocketAddr],
    timeout: Duration,
) -> Result<Receiver<Response>> {
    if endpoints.is_empty() {
        return Err(Error::InvalidParams("no worker endpoints".into()));
    }
    let (tx, rx) = mpsc::channel();
    for share in &shares.shares {
        if stragglers.binary_search(&share.server).is_ok() {
            continue;
        }
        let endpoint = endpoints[share.server % endpoints.len()];
        let payload = wire::encode_share(&share.header(shares.scheme), &share.a, &share.b);
        let task = Frame::task(share.server as u64, payload);
        let tx = tx.clone();
        let (server, point_index, point) = (share.server, share.point_index, share.point);
        thread::spawn(move || match remote_task(endpoint, task, timeout) {
            Ok(product) => {
                let _ = tx.send(Response {
                    server,
                    point_index,
                    point,
                    product,
                });
            }
            Err(e) => log::warn!("server {server} at {endpoint} failed: {e}"),
        });
    }
    Ok(rx)
}

/// Encode, dispatch, collect the fastest `K`, decode, and score against the
/// locally computed product.
///
/// The job seed drives, in order: the masks, the straggler draw, and (in
/// simulation) the worker delays.
pub fn run_job(
    a: &ComplexMatrix,
    b: &ComplexMatrix,
    params: &SchemeParams,
    noise: &NoiseSpec,
    stragglers: &StragglerModel,
    seed: u64,
    cluster: &Cluster,
) -> Result<JobOutcome> {
    params.validate()?;
    if a.cols() != b.rows() {
        return Err(Error::mismatch(a.shape(), b.shape()));
    }
    params.check_dims((a.rows(), a.cols(), b.cols()))?;
    let n = params.n_servers();
    let k = params.recovery_threshold();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let t0 = Instant::now();
    let shares = codec::encode(params, a, b, noise, &mut rng)?;
    let encode_secs = t0.elapsed().as_secs_f64();

    let straggler_set = stragglers.choose(n, k, &mut rng)?;

    let t1 = Instant::now();
    let (responses, transcripts) = match cluster {
        Cluster::Simulated { delay } => {
            let (rx, logs) = dispatch_simulated(&shares, &straggler_set, delay, &mut rng)?;
            (collect_fastest(&rx, k, None)?, logs)
        }
        Cluster::Networked { endpoints, timeout } => {
            let rx = dispatch_networked(&shares, &straggler_set, endpoints, *timeout)?;
            (collect_fastest(&rx, k, Some(*timeout))?, Vec::new())
        }
    };
    let compute_secs = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let product = codec::decode(&responses, params)?;
    let decode_secs = t2.elapsed().as_secs_f64();

    let used = responses.decoding_subset(k)?;
    let decoding_set: Vec<usize> = used.iter().map(|r| r.server).collect();
    let points: Vec<_> = used.iter().map(|r| r.point).collect();
    let cond = condition_number(&vandermonde(&points, k)?)?;

    let truth = matmul(a, b)?;
    let abs_error = frobenius_distance(&product, &truth)?;
    let norm = truth.frobenius_norm();
    let rel_error = if norm == 0.0 { abs_error } else { abs_error / norm };

    let record = TrialRecord {
        seed,
        scheme: params.describe(),
        sigma2: noise.sigma2,
        stragglers: straggler_set,
        responders: responses.responders(),
        decoding_set,
        abs_error,
        rel_error,
        condition_number: cond,
        timings: PhaseTimings {
            encode_secs,
            compute_secs,
            decode_secs,
        },
    };
    Ok(JobOutcome {
        product,
        record,
        transcripts,
    })
}
