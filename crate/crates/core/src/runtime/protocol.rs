//! Length-prefixed binary frames between coordinator and workers.
//!
//! ```text
//! u32 length | u8 type | u64 task id | payload
//! ```
//!
//! All integers are little-endian. `length` counts every byte after itself.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const FRAME_TASK: u8 = 1;
pub const FRAME_RESULT: u8 = 2;
pub const FRAME_ERROR: u8 = 3;

pub const ERR_MALFORMED: u16 = 1;
pub const ERR_SHAPE: u16 = 2;
pub const ERR_INTERNAL: u16 = 3;

/// Frames above this size are refused outright; the stream cannot be
/// resynchronized after that.
pub const MAX_FRAME_LEN: u32 = 1 << 30;

const FIXED_LEN: usize = 1 + 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub task_id: u64,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn task(task_id: u64, payload: Vec<u8>) -> Self {
        Self {
            kind: FRAME_TASK,
            task_id,
            payload,
        }
    }

    pub fn result(task_id: u64, payload: Vec<u8>) -> Self {
        Self {
            kind: FRAME_RESULT,
            task_id,
            payload,
        }
    }

    pub fn error(task_id: u64, code: u16, message: &str) -> Self {
        let msg = message.as_bytes();
        let msg = &msg[..msg.len().min(u16::MAX as usize)];
        let mut payload = Vec::with_capacity(4 + msg.len());
        payload.extend_from_slice(&code.to_le_bytes());
        payload.extend_from_slice(&(msg.len() as u16).to_le_bytes());
        payload.extend_from_slice(msg);
        Self {
            kind: FRAME_ERROR,
            task_id,
            payload,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let len = (FIXED_LEN + self.payload.len()) as u32;
        let mut buf = Vec::with_capacity(4 + len as usize);
        buf.extend_from_slice(&len.to_le_bytes());
        buf.push(self.kind);
        buf.extend_from_slice(&self.task_id.to_le_bytes());
        buf.extend_from_slice(&self.payload);
        buf
    }

    /// Decodes an ERROR payload into `(code, message)`.
    pub fn parse_error(&self) -> Result<(u16, String)> {
        let p = &self.payload;
        if p.len() < 4 {
            return Err(Error::Malformed("short ERROR payload".into()));
        }
        let code = u16::from_le_bytes([p[0], p[1]]);
        let len = u16::from_le_bytes([p[2], p[3]]) as usize;
        let msg = p
            .get(4..4 + len)
            .ok_or_else(|| Error::Malformed("truncated ERROR message".into()))?;
        Ok((code, String::from_utf8_lossy(msg).into_owned()))
    }
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    w.write_all(&frame.to_bytes())?;
    w.flush()
}

/// What came off the stream.
#[derive(Debug)]
pub enum ReadOutcome {
    Frame(Frame),
    /// Length prefix was readable but the frame body is too short to hold
    /// type and task id. The body has been consumed; the stream is still in
    /// sync.
    Malformed { task_id: u64, reason: String },
    /// Peer closed the connection between frames.
    Closed,
}

pub fn read_frame<R: Read>(r: &mut R) -> io::Result<ReadOutcome> {
    let mut len_buf = [0u8; 4];
    match r.read_exact(&mut len_buf) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(ReadOutcome::Closed),
        Err(e) => return Err(e),
    }
    let len = u32::from_le_bytes(len_buf);
    if len > MAX_FRAME_LEN {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("frame length {len} exceeds limit"),
        ));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    if body.len() < FIXED_LEN {
        let mut id = [0u8; 8];
        let avail = body.len().saturating_sub(1).min(8);
        if avail > 0 {
            id[..avail].copy_from_slice(&body[1..1 + avail]);
        }
        return Ok(ReadOutcome::Malformed {
            task_id: u64::from_le_bytes(id),
            reason: format!("frame body of {} bytes is shorter than {FIXED_LEN}", body.len()),
        });
    }
    let kind = body[0];
    let task_id = u64::from_le_bytes(body[1..9].try_into().unwrap());
    body.drain(..FIXED_LEN);
    Ok(ReadOutcome::Frame(Frame {
        kind,
        task_id,
        payload: body,
    }))
}
