//! Binary wire format between the server and out-of-process workers.
//!
//! A frame is a 4-byte big-endian payload length followed by the payload.
//! The first payload byte is the message type. Integers are big-endian;
//! weights are 17 binary64 values, **little-endian**, in the canonical order
//! of [`ModelWeights::to_flat`].
//!
//! | type | message    | body                                                        |
//! |------|------------|-------------------------------------------------------------|
//! | 0x00 | HELLO      | version `u8`, client id `u32`                               |
//! | 0x01 | ASSIGNMENT | round `u32`, 17 × `f64`                                     |
//! | 0x02 | UPDATE     | round `u32`, client id `u32`, sample count `u32`, 17 × `f64` |
//! | 0x03 | SHUTDOWN   | empty                                                       |
//! | 0x04 | ACK        | empty                                                       |
//! | 0x7F | ERROR      | reason `u8`                                                 |

use alloc::vec::Vec;
use core::fmt;

use crate::ann::{ModelWeights, WEIGHT_COUNT};

pub const PROTOCOL_VERSION: u8 = 0x01;
/// Largest accepted payload length.
pub const MAX_PAYLOAD: usize = 4096;
pub const LENGTH_PREFIX: usize = 4;
/// Byte size of the encoded weight block.
pub const MODEL_BYTES: usize = WEIGHT_COUNT * 8;

pub const TYPE_HELLO: u8 = 0x00;
pub const TYPE_ASSIGNMENT: u8 = 0x01;
pub const TYPE_UPDATE: u8 = 0x02;
pub const TYPE_SHUTDOWN: u8 = 0x03;
pub const TYPE_ACK: u8 = 0x04;
pub const TYPE_ERROR: u8 = 0x7F;

/// Global model sent to a selected client.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub round: u32,
    pub model: ModelWeights,
}

/// Locally trained model returned by a client.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Update {
    pub round: u32,
    pub client_id: u32,
    pub model: ModelWeights,
    pub sample_count: u32,
}

/// Reason byte carried by an ERROR frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ErrorReason {
    VersionMismatch,
    MalformedFrame,
    ProtocolViolation,
    UnknownClient,
    Other(u8),
}

impl ErrorReason {
    pub fn to_byte(self) -> u8 {
        match self {
            ErrorReason::VersionMismatch => 0x01,
            ErrorReason::MalformedFrame => 0x02,
            ErrorReason::ProtocolViolation => 0x03,
            ErrorReason::UnknownClient => 0x04,
            ErrorReason::Other(b) => b,
        }
    }

    pub fn from_byte(b: u8) -> Self {
        match b {
            0x01 => ErrorReason::VersionMismatch,
            0x02 => ErrorReason::MalformedFrame,
            0x03 => ErrorReason::ProtocolViolation,
            0x04 => ErrorReason::UnknownClient,
            other => ErrorReason::Other(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Message {
    Hello { version: u8, client_id: u32 },
    Assignment(Assignment),
    Update(Update),
    Shutdown,
    Ack,
    Error(ErrorReason),
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Hello { .. } => TYPE_HELLO,
            Message::Assignment(_) => TYPE_ASSIGNMENT,
            Message::Update(_) => TYPE_UPDATE,
            Message::Shutdown => TYPE_SHUTDOWN,
            Message::Ack => TYPE_ACK,
            Message::Error(_) => TYPE_ERROR,
        }
    }
}

/// Decoding failure. Offsets count from the first byte of the frame, i.e.
/// the length prefix sits at offsets 0..4 and the type byte at offset 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecodeError {
    /// Fewer than `needed` bytes were available starting at `offset`.
    Truncated {
        offset: usize,
        needed: usize,
    },
    /// The length prefix disagrees with the number of bytes supplied.
    LengthMismatch {
        declared: usize,
        actual: usize,
    },
    FrameTooLarge {
        declared: usize,
    },
    UnknownType {
        offset: usize,
        byte: u8,
    },
    /// Bytes left over after a complete message body.
    TrailingBytes {
        offset: usize,
    },
    NonFiniteWeight {
        offset: usize,
    },
    /// A well-formed message of a different type than requested.
    UnexpectedType {
        offset: usize,
        expected: u8,
        found: u8,
    },
}

impl fmt::Display for DecodeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DecodeError::Truncated { offset, needed } => {
                write!(f, "truncated frame: {needed} more byte(s) needed at offset {offset}")
            }
            DecodeError::LengthMismatch { declared, actual } => write!(
                f,
                "length prefix declares {declared} payload bytes but {actual} were supplied (offset 0)"
            ),
            DecodeError::FrameTooLarge { declared } => {
                write!(f, "payload length {declared} exceeds {MAX_PAYLOAD} (offset 0)")
            }
            DecodeError::UnknownType { offset, byte } => {
                write!(f, "unknown message type 0x{byte:02X} at offset {offset}")
            }
            DecodeError::TrailingBytes { offset } => {
                write!(f, "unexpected trailing bytes at offset {offset}")
            }
            DecodeError::NonFiniteWeight { offset } => {
                write!(f, "non-finite weight at offset {offset}")
            }
            DecodeError::UnexpectedType { offset, expected, found } => write!(
                f,
                "expected message type 0x{expected:02X} but found 0x{found:02X} at offset {offset}"
            ),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for DecodeError {}

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn put_model(buf: &mut Vec<u8>, model: &ModelWeights) {
    for w in model.iter() {
        buf.extend_from_slice(&w.to_le_bytes());
    }
}

/// Payload bytes of `msg`, without the length prefix.
pub fn encode_payload(msg: &Message) -> Vec<u8> {
    let mut buf = Vec::with_capacity(1 + 12 + MODEL_BYTES);
    buf.push(msg.type_byte());
    match msg {
        Message::Hello { version, client_id } => {
            buf.push(*version);
            put_u32(&mut buf, *client_id);
        }
        Message::Assignment(a) => {
            put_u32(&mut buf, a.round);
            put_model(&mut buf, &a.model);
        }
        Message::Update(u) => {
            put_u32(&mut buf, u.round);
            put_u32(&mut buf, u.client_id);
            put_u32(&mut buf, u.sample_count);
            put_model(&mut buf, &u.model);
        }
        Message::Shutdown | Message::Ack => {}
        Message::Error(reason) => buf.push(reason.to_byte()),
    }
    buf
}

/// Complete frame: length prefix followed by the payload.
pub fn encode_frame(msg: &Message) -> Vec<u8> {
    let payload = encode_payload(msg);
    let mut frame = Vec::with_capacity(LENGTH_PREFIX + payload.len());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// Parses the length prefix at the start of `bytes`.
pub fn payload_length(bytes: &[u8]) -> Result<usize, DecodeError> {
    let header: [u8; LENGTH_PREFIX] = bytes
        .get(..LENGTH_PREFIX)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| DecodeError::Truncated {
            offset: bytes.len(),
            needed: LENGTH_PREFIX - bytes.len(),
        })?;
    let declared = u32::from_be_bytes(header) as usize;
    if declared > MAX_PAYLOAD {
        return Err(DecodeError::FrameTooLarge { declared });
    }
    Ok(declared)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        let end = self.pos + N;
        match self.bytes.get(self.pos..end) {
            Some(slice) => {
                let mut out = [0u8; N];
                out.copy_from_slice(slice);
                self.pos = end;
                Ok(out)
            }
            None => Err(DecodeError::Truncated {
                offset: self.base + self.bytes.len(),
                needed: end - self.bytes.len(),
            }),
        }
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take()?))
    }

    fn model(&mut self) -> Result<ModelWeights, DecodeError> {
        let mut flat = [0.0; WEIGHT_COUNT];
        for w in flat.iter_mut() {
            let offset = self.base + self.pos;
            let v = f64::from_le_bytes(self.take()?);
            if !v.is_finite() {
                return Err(DecodeError::NonFiniteWeight { offset });
            }
            *w = v;
        }
        Ok(ModelWeights::from_flat(&flat))
    }

    fn finish(&self) -> Result<(), DecodeError> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(DecodeError::TrailingBytes {
                offset: self.base + self.pos,
            })
        }
    }
}

/// Decodes a payload (no length prefix). Error offsets are reported as if
/// the payload were preceded by its 4-byte prefix.
pub fn decode_payload(payload: &[u8]) -> Result<Message, DecodeError> {
    let mut r = Reader {
        bytes: payload,
        pos: 0,
        base: LENGTH_PREFIX,
    };
    let ty = r.u8()?;
    let msg = match ty {
        TYPE_HELLO => {
            let version = r.u8()?;
            let client_id = r.u32()?;
            Message::Hello { version, client_id }
        }
        TYPE_ASSIGNMENT => {
            let round = r.u32()?;
            let model = r.model()?;
            Message::Assignment(Assignment { round, model })
        }
        TYPE_UPDATE => {
            let round = r.u32()?;
            let client_id = r.u32()?;
            let sample_count = r.u32()?;
            let model = r.model()?;
            Message::Update(Update {
                round,
                client_id,
                model,
                sample_count,
            })
        }
        TYPE_SHUTDOWN => Message::Shutdown,
        TYPE_ACK => Message::Ack,
        TYPE_ERROR => Message::Error(ErrorReason::from_byte(r.u8()?)),
        byte => {
            return Err(DecodeError::UnknownType {
                offset: LENGTH_PREFIX,
                byte,
            })
        }
    };
    r.finish()?;
    Ok(msg)
}

/// Decodes the first frame in `bytes`, returning the message and the number
/// of bytes it occupied. Extra bytes after the frame are left untouched.
pub fn decode_frame_prefix(bytes: &[u8]) -> Result<(Message, usize), DecodeError> {
    let declared = payload_length(bytes)?;
    let end = LENGTH_PREFIX + declared;
    let payload = bytes
        .get(LENGTH_PREFIX..end)
        .ok_or_else(|| DecodeError::Truncated {
            offset: bytes.len(),
            needed: end - bytes.len(),
        })?;
    Ok((decode_payload(payload)?, end))
}

/// Decodes exactly one frame; the length prefix must cover all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, DecodeError> {
    let declared = payload_length(bytes)?;
    let actual = bytes.len() - LENGTH_PREFIX;
    if declared != actual {
        return Err(DecodeError::LengthMismatch { declared, actual });
    }
    decode_payload(&bytes[LENGTH_PREFIX..])
}

fn expect_type(bytes: &[u8], expected: u8) -> Result<Message, DecodeError> {
    let msg = decode_frame(bytes)?;
    if msg.type_byte() == expected {
        Ok(msg)
    } else {
        Err(DecodeError::UnexpectedType {
            offset: LENGTH_PREFIX,
            expected,
            found: msg.type_byte(),
        })
    }
}

pub fn encode_assignment(a: &Assignment) -> Vec<u8> {
    encode_frame(&Message::Assignment(*a))
}

pub fn decode_assignment(bytes: &[u8]) -> Result<Assignment, DecodeError> {
    match expect_type(bytes, TYPE_ASSIGNMENT)? {
        Message::Assignment(a) => Ok(a),
        _ => unreachable!("type byte checked"),
    }
}

pub fn encode_update(u: &Update) -> Vec<u8> {
    encode_frame(&Message::Update(*u))
}

pub fn decode_update(bytes: &[u8]) -> Result<Update, DecodeError> {
    match expect_type(bytes, TYPE_UPDATE)? {
        Message::Update(u) => Ok(u),
        _ => unreachable!("type byte checked"),
    }
}

pub fn encode_hello(client_id: u32) -> Vec<u8> {
    encode_frame(&Message::Hello {
        version: PROTOCOL_VERSION,
        client_id,
    })
}

pub fn encode_shutdown() -> Vec<u8> {
    encode_frame(&Message::Shutdown)
}
