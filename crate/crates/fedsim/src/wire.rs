//! Blocking frame IO over byte streams.

use std::io::{self, Read, Write};

use fedsim_core::protocol::{decode_payload, encode_frame, payload_length, LENGTH_PREFIX};
use fedsim_core::{DecodeError, Message};

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("connection closed by peer")]
    Closed,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed frame: {0}")]
    Decode(#[from] DecodeError),
}

/// Reads one frame. A clean end of stream before the first byte is
/// [`WireError::Closed`].
pub fn read_frame<R: Read + ?Sized>(reader: &mut R) -> Result<Message, WireError> {
    let mut header = [0u8; LENGTH_PREFIX];
    let mut filled = 0;
    while filled < LENGTH_PREFIX {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Err(WireError::Closed),
            Ok(0) => {
                return Err(WireError::Decode(DecodeError::Truncated {
                    offset: filled,
                    needed: LENGTH_PREFIX - filled,
                }))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = payload_length(&header)?;
    let mut payload = vec![0u8; len];
    reader.read_exact(&mut payload).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WireError::Decode(DecodeError::Truncated {
                offset: LENGTH_PREFIX,
                needed: len,
            })
        } else {
            WireError::Io(e)
        }
    })?;
    Ok(decode_payload(&payload)?)
}

pub fn write_frame<W: Write + ?Sized>(writer: &mut W, msg: &Message) -> io::Result<()> {
    writer.write_all(&encode_frame(msg))?;
    writer.flush()
}
