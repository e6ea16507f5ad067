//! `ESF1` session files.
//!
//! Little-endian layout:
//!
//! ```text
//! "ESF1" | version u8 = 1 | channels u8 | subject u16 | exercise u8
//!        | sampling_rate_hz f32 | T u32
//!        | samples f32 × (T·C), channel fastest
//!        | labels u16 × T | repetitions u8 × T
//!        | CRC32 of every byte between the magic and the checksum
//! ```

use std::path::Path;

use super::EmgSession;
use crate::error::{Error, Result};

pub const ESF_MAGIC: &[u8; 4] = b"ESF1";
pub const ESF_VERSION: u8 = 1;
const HEADER_END: usize = 4 + 1 + 1 + 2 + 1 + 4 + 4;

pub fn session_to_bytes(s: &EmgSession) -> Vec<u8> {
    let t = s.len();
    let mut out = Vec::with_capacity(HEADER_END + t * (4 * s.channels() + 3) + 4);
    out.extend_from_slice(ESF_MAGIC);
    out.push(ESF_VERSION);
    out.push(s.channels() as u8);
    out.extend_from_slice(&s.subject.to_le_bytes());
    out.push(s.exercise);
    out.extend_from_slice(&s.sampling_rate_hz.to_le_bytes());
    out.extend_from_slice(&(t as u32).to_le_bytes());
    for v in s.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in s.labels() {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(s.repetitions());
    let crc = crc32fast::hash(&out[4..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn write_session(s: &EmgSession, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, session_to_bytes(s)).map_err(|e| Error::io(path, e))
}

pub fn load_session(path: impl AsRef<Path>) -> Result<EmgSession> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    session_from_bytes(&bytes)
}

pub fn session_from_bytes(b: &[u8]) -> Result<EmgSession> {
    if b.len() < 4 || &b[..4] != ESF_MAGIC {
        return Err(Error::format(0, "missing ESF1 magic"));
    }
    if b.len() < 5 {
        return Err(Error::integrity(4, "truncated before version"));
    }
    if b[4] != ESF_VERSION {
        return Err(Error::Version {
            offset: 4,
            found: b[4].into(),
            supported: ESF_VERSION.into(),
        });
    }
    if b.len() < HEADER_END {
        return Err(Error::integrity(b.len(), "truncated header"));
    }
    let channels = b[5] as usize;
    let subject = u16::from_le_bytes([b[6], b[7]]);
    let exercise = b[8];
    let rate = f32::from_le_bytes(b[9..13].try_into().unwrap());
    let t = u32::from_le_bytes(b[13..17].try_into().unwrap()) as usize;

    let samples_end = HEADER_END + 4 * t * channels;
    let labels_end = samples_end + 2 * t;
    let reps_end = labels_end + t;
    let expected = reps_end + 4;
    if b.len() < expected {
        return Err(Error::integrity(
            b.len(),
            format!("truncated: header implies {expected} bytes"),
        ));
    }
    if b.len() > expected {
        return Err(Error::format(expected, "trailing bytes after checksum"));
    }
    let stored = u32::from_le_bytes(b[reps_end..].try_into().unwrap());
    let actual = crc32fast::hash(&b[4..reps_end]);
    if stored != actual {
        return Err(Error::integrity(
            reps_end,
            format!("CRC mismatch: stored {stored:08x}, computed {actual:08x}"),
        ));
    }

    let samples = b[HEADER_END..samples_end]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = b[samples_end..labels_end]
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let repetitions = b[labels_end..reps_end].to_vec();
    EmgSession::new(subject, exercise, rate, channels, samples, labels, repetitions)
}
