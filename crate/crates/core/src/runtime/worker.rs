//! Honest-but-curious worker: multiplies whatever pair it is handed and
//! keeps a record of everything it saw.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Instant;

use super::protocol::{self, Frame, ReadOutcome, ERR_INTERNAL, ERR_MALFORMED, ERR_SHAPE, FRAME_TASK};
use crate::codec::wire::{decode_share, ShareHeader};
use crate::error::{Error, Result};
use crate::linalg::{cmat, matmul, ComplexMatrix};

/// One received task.
#[derive(Clone, Debug, PartialEq)]
pub struct TranscriptEntry {
    pub task_id: u64,
    pub header: ShareHeader,
    pub a: ComplexMatrix,
    pub b: ComplexMatrix,
    /// Seconds since the log was created.
    pub received_at: f64,
}

/// Append-only log shared between a worker's connections.
#[derive(Clone, Debug)]
pub struct TranscriptLog {
    started: Instant,
    entries: Arc<Mutex<Vec<TranscriptEntry>>>,
}

impl Default for TranscriptLog {
    fn default() -> Self {
        Self::new()
    }
}

impl TranscriptLog {
    pub fn new() -> Self {
        Self {
            started: Instant::now(),
            entries: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn append(&self, task_id: u64, header: ShareHeader, a: ComplexMatrix, b: ComplexMatrix) {
        let entry = TranscriptEntry {
            task_id,
            header,
            a,
            b,
            received_at: self.started.elapsed().as_secs_f64(),
        };
        self.entries.lock().expect("transcript lock poisoned").push(entry);
    }

    /// Snapshot of the entries so far.
    pub fn entries(&self) -> Vec<TranscriptEntry> {
        self.entries.lock().expect("transcript lock poisoned").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("transcript lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Worker-side failure, mapped onto an ERROR frame code.
#[derive(Debug)]
pub(crate) struct TaskFailure {
    pub code: u16,
    pub message: String,
}

/// Computes `Ã_i B̃_i` for one TASK payload and logs the shares.
pub(crate) fn handle_task(
    task_id: u64,
    payload: &[u8],
    log: &TranscriptLog,
) -> std::result::Result<(ShareHeader, ComplexMatrix), TaskFailure> {
    let (header, a, b, used) = decode_share(payload).map_err(|e| TaskFailure {
        code: ERR_MALFORMED,
        message: e.to_string(),
    })?;
    if used != payload.len() {
        return Err(TaskFailure {
            code: ERR_MALFORMED,
            message: format!("{} trailing bytes in TASK payload", payload.len() - used),
        });
    }
    if a.cols() != b.rows() {
        return Err(TaskFailure {
            code: ERR_SHAPE,
            message: format!(
                "cannot multiply {}x{} by {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            ),
        });
    }
    log.append(task_id, header, a.clone(), b.clone());
    let product = matmul(&a, &b).map_err(|e| TaskFailure {
        code: ERR_INTERNAL,
        message: e.to_string(),
    })?;
    Ok((header, product))
}

fn serve_connection(stream: TcpStream, log: TranscriptLog) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    loop {
        let reply = match protocol::read_frame(&mut reader)? {
            ReadOutcome::Closed => return Ok(()),
            ReadOutcome::Malformed { task_id, reason } => Frame::error(task_id, ERR_MALFORMED, &reason),
            ReadOutcome::Frame(frame) if frame.kind != FRAME_TASK => Frame::error(
                frame.task_id,
                ERR_MALFORMED,
                &format!("unexpected frame type {}", frame.kind),
            ),
            ReadOutcome::Frame(frame) => match handle_task(frame.task_id, &frame.payload, &log) {
                Ok((_, product)) => Frame::result(frame.task_id, cmat::to_bytes(&product)),
                Err(fail) => Frame::error(frame.task_id, fail.code, &fail.message),
            },
        };
        protocol::write_frame(&mut writer, &reply)?;
    }
}

/// A bound worker endpoint. Each accepted connection is served on its own
/// thread, one task at a time.
pub struct WorkerServer {
    listener: TcpListener,
    transcript: TranscriptLog,
    shutdown: Arc<AtomicBool>,
}

impl WorkerServer {
    pub fn bind(addr: impl ToSocketAddrs) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        Ok(Self {
            listener,
            transcript: TranscriptLog::new(),
            shutdown: Arc::new(AtomicBool::new(false)),
        })
    }

    pub fn local_addr(&self) -> Result<SocketAddr> {
        Ok(self.listener.local_addr()?)
    }

    pub fn transcript(&self) -> TranscriptLog {
        self.transcript.clone()
    }

    /// Accept loop; returns once shut down through a [`WorkerHandle`].
    pub fn serve(self) -> Result<()> {
        for conn in self.listener.incoming() {
            if self.shutdown.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let _ = stream.set_nodelay(true);
            let log = self.transcript.clone();
            thread::spawn(move || {
                if let Err(e) = serve_connection(stream, log) {
                    log::debug!("connection closed: {e}");
                }
            });
        }
        Ok(())
    }

    /// Serves on a background thread.
    pub fn spawn(self) -> Result<WorkerHandle> {
        let addr = self.local_addr()?;
        let transcript = self.transcript();
        let shutdown = self.shutdown.clone();
        let join = thread::spawn(move || self.serve());
        Ok(WorkerHandle {
            addr,
            transcript,
            shutdown,
            join: Some(join),
        })
    }
}

pub struct WorkerHandle {
    addr: SocketAddr,
    transcript: TranscriptLog,
    shutdown: Arc<AtomicBool>,
    join: Option<JoinHandle<Result<()>>>,
}

impl WorkerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn transcript(&self) -> &TranscriptLog {
        &self.transcript
    }

    pub fn shutdown(mut self) -> Result<()> {
        self.stop()
    }

    fn stop(&mut self) -> Result<()> {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        match self.join.take() {
            Some(j) => j
                .join()
                .map_err(|_| Error::Malformed("worker thread panicked".into()))?,
            None => Ok(()),
        }
    }
}

impl Drop for WorkerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Binds `addr` and serves TASK frames until the process exits.
pub fn worker_serve(addr: impl ToSocketAddrs) -> Result<()> {
    let server = WorkerServer::bind(addr)?;
    log::info!("worker listening on {}", server.local_addr()?);
    server.serve()
}
