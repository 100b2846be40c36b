//! Frames: a 4-byte big-endian length `N`, then `N` bytes of body.

use std::io::{self, Read, Write};

use crate::error::{Result, TransportError};

pub const HEADER_LEN: usize = 4;
pub const DEFAULT_MAX_FRAME: usize = 256 * 1024 * 1024;

fn check_len(len: usize, max: usize) -> Result<u32> {
    let too_large = TransportError::FrameTooLarge { len: len as u64, max };
    if len > max {
        return Err(too_large);
    }
    u32::try_from(len).map_err(|_| too_large)
}

pub fn encode_frame(body: &[u8], max: usize) -> Result<Vec<u8>> {
    let len = check_len(body.len(), max)?;
    let mut out = Vec::with_capacity(HEADER_LEN + body.len());
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

pub fn write_frame<W: Write>(w: &mut W, body: &[u8], max: usize) -> Result<()> {
    let len = check_len(body.len(), max)?;
    w.write_all(&len.to_be_bytes())?;
    w.write_all(body)?;
    w.flush()?;
    Ok(())
}

/// Reads one frame. `Ok(None)` on a clean end of stream between frames.
/// The length is checked against `max` before any body byte is read.
pub fn read_frame<R: Read>(r: &mut R, max: usize) -> Result<Option<Vec<u8>>> {
    let mut header = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(TransportError::ShortFrame),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > max {
        return Err(TransportError::FrameTooLarge { len: len as u64, max });
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => TransportError::ShortFrame,
        _ => e.into(),
    })?;
    Ok(Some(body))
}

/// Splits a byte buffer of concatenated frames, in order.
pub fn decode_frames(mut bytes: &[u8], max: usize) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    while let Some(body) = read_frame(&mut bytes, max)? {
        out.push(body);
    }
    Ok(out)
}
