//! Binary framing for edge ↔ fog traffic.
//!
//! Every message travels in an envelope:
//!
//! | bytes | field                                  |
//! |-------|----------------------------------------|
//! | 1     | version (currently 1)                  |
//! | 1     | kind                                   |
//! | 8     | sender id, big-endian                  |
//! | 4     | payload length, big-endian             |
//! | n     | payload                                |
//!
//! Payload integers are big-endian, floats are IEEE-754 bit patterns, and
//! strings are a u16 byte length followed by UTF-8. Region pixels are
//! run-length encoded as `(u16 run, r, g, b)` records.

mod codec;
mod messages;

use std::io::{self, Read, Write};

use codec::{Reader, Writer};

pub use messages::{
    rle_decode, rle_encode, Ack, DispatchAction, FrameFeaturesMsg, Heartbeat, PersonFeatures, QueryDispatch,
    RegionBlob,
};

use crate::frame::CameraId;
use crate::provider::PoseResult;
use crate::query::MatchReport;
use crate::scalar::Real;

pub const PROTOCOL_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 14;
/// Envelopes announcing a larger payload are rejected before allocation.
pub const MAX_PAYLOAD: u32 = 64 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("protocol version {0} is not supported (expected {PROTOCOL_VERSION})")]
    VersionMismatch(u8),
    #[error("truncated payload: needed {needed} bytes, have {available}")]
    TruncatedPayload { needed: usize, available: usize },
    #[error("unknown message kind {0}")]
    UnknownKind(u8),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("message cannot be encoded: {0}")]
    Oversized(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MessageKind {
    QueryDispatch = 1,
    FrameFeatures = 2,
    MatchReport = 3,
    Heartbeat = 4,
    Ack = 5,
}

impl MessageKind {
    pub fn from_byte(b: u8) -> Result<Self, ProtocolError> {
        Ok(match b {
            1 => MessageKind::QueryDispatch,
            2 => MessageKind::FrameFeatures,
            3 => MessageKind::MatchReport,
            4 => MessageKind::Heartbeat,
            5 => MessageKind::Ack,
            other => return Err(ProtocolError::UnknownKind(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    QueryDispatch(QueryDispatch),
    FrameFeatures(FrameFeaturesMsg),
    MatchReport(MatchReport),
    Heartbeat(Heartbeat),
    Ack(Ack),
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::QueryDispatch(_) => MessageKind::QueryDispatch,
            Message::FrameFeatures(_) => MessageKind::FrameFeatures,
            Message::MatchReport(_) => MessageKind::MatchReport,
            Message::Heartbeat(_) => MessageKind::Heartbeat,
            Message::Ack(_) => MessageKind::Ack,
        }
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        let too_big = |what: &str| Err(ProtocolError::Oversized(what.to_string()));
        let str_ok = |s: &str| s.len() <= usize::from(u16::MAX);
        match self {
            Message::QueryDispatch(m) if !str_ok(&m.text) => too_big("query text"),
            Message::FrameFeatures(m) => {
                if !str_ok(m.camera_id.as_str()) {
                    return too_big("camera id");
                }
                if m.persons.len() > usize::from(u16::MAX) {
                    return too_big("person count");
                }
                for p in &m.persons {
                    if p.keypoints.len() > usize::from(u8::MAX) || p.regions.len() > usize::from(u8::MAX) {
                        return too_big("keypoint or region count");
                    }
                    if p.regions.iter().any(|r| r.pixels.len() > u32::MAX as usize) {
                        return too_big("region size");
                    }
                }
                Ok(())
            }
            Message::MatchReport(m) => {
                if !str_ok(m.camera_id.as_str()) || m.matched.iter().any(|c| !str_ok(&c.color)) {
                    return too_big("string field");
                }
                if m.matched.len() > usize::from(u8::MAX)
                    || m.evidence.len() > usize::from(u8::MAX)
                    || m.matched.iter().any(|c| c.k > usize::from(u16::MAX))
                    || m.person_index > u32::MAX as usize
                {
                    return too_big("report field");
                }
                Ok(())
            }
            Message::Heartbeat(m) if !str_ok(m.camera_id.as_str()) => too_big("camera id"),
            _ => Ok(()),
        }
    }

    pub fn payload(&self) -> Result<Vec<u8>, ProtocolError> {
        self.validate()?;
        let mut w = Writer::default();
        match self {
            Message::QueryDispatch(m) => messages::put_dispatch(&mut w, m),
            Message::FrameFeatures(m) => messages::put_features(&mut w, m),
            Message::MatchReport(m) => messages::put_report(&mut w, m),
            Message::Heartbeat(m) => messages::put_heartbeat(&mut w, m),
            Message::Ack(m) => {
                w.u8(m.kind);
                w.u64(m.reference);
            }
        }
        if w.buf.len() > MAX_PAYLOAD as usize {
            return Err(ProtocolError::Oversized(format!("payload of {} bytes", w.buf.len())));
        }
        Ok(w.buf)
    }

    pub fn from_payload(kind: MessageKind, payload: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(payload);
        let msg = match kind {
            MessageKind::QueryDispatch => Message::QueryDispatch(messages::get_dispatch(&mut r)?),
            MessageKind::FrameFeatures => Message::FrameFeatures(messages::get_features(&mut r)?),
            MessageKind::MatchReport => Message::MatchReport(messages::get_report(&mut r)?),
            MessageKind::Heartbeat => Message::Heartbeat(messages::get_heartbeat(&mut r)?),
            MessageKind::Ack => Message::Ack(Ack { kind: r.u8()?, reference: r.u64()? }),
        };
        r.finish()?;
        Ok(msg)
    }
}

/// A framed message as it appears on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub version: u8,
    pub kind: u8,
    pub sender_id: u64,
    pub payload: Vec<u8>,
}

impl Envelope {
    pub fn payload_length(&self) -> u32 {
        self.payload.len() as u32
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.push(self.version);
        out.push(self.kind);
        out.extend_from_slice(&self.sender_id.to_be_bytes());
        out.extend_from_slice(&self.payload_length().to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Parses one envelope that must span `bytes` exactly.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let (kind, sender_id, length) = parse_header(bytes)?;
        let needed = HEADER_LEN + length as usize;
        if bytes.len() < needed {
            return Err(ProtocolError::TruncatedPayload { needed, available: bytes.len() });
        }
        if bytes.len() > needed {
            return Err(ProtocolError::Malformed(format!("{} bytes after the envelope", bytes.len() - needed)));
        }
        Ok(Envelope { version: PROTOCOL_VERSION, kind, sender_id, payload: bytes[HEADER_LEN..].to_vec() })
    }

    pub fn into_message(self) -> Result<(u64, Message), ProtocolError> {
        let kind = MessageKind::from_byte(self.kind)?;
        Ok((self.sender_id, Message::from_payload(kind, &self.payload)?))
    }
}

fn parse_header(bytes: &[u8]) -> Result<(u8, u64, u32), ProtocolError> {
    if bytes.len() < HEADER_LEN {
        // A lone version byte is enough to reject foreign traffic early.
        if let Some(&v) = bytes.first() {
            if v != PROTOCOL_VERSION {
                return Err(ProtocolError::VersionMismatch(v));
            }
        }
        return Err(ProtocolError::TruncatedPayload { needed: HEADER_LEN, available: bytes.len() });
    }
    if bytes[0] != PROTOCOL_VERSION {
        return Err(ProtocolError::VersionMismatch(bytes[0]));
    }
    MessageKind::from_byte(bytes[1])?;
    let sender = u64::from_be_bytes(bytes[2..10].try_into().expect("8 bytes"));
    let length = u32::from_be_bytes(bytes[10..14].try_into().expect("4 bytes"));
    if length > MAX_PAYLOAD {
        return Err(ProtocolError::Oversized(format!("announced payload of {length} bytes")));
    }
    Ok((bytes[1], sender, length))
}

pub fn envelope(sender_id: u64, message: &Message) -> Result<Envelope, ProtocolError> {
    Ok(Envelope { version: PROTOCOL_VERSION, kind: message.kind() as u8, sender_id, payload: message.payload()? })
}

pub fn encode(sender_id: u64, message: &Message) -> Result<Vec<u8>, ProtocolError> {
    Ok(envelope(sender_id, message)?.to_bytes())
}

/// Decodes one complete envelope, returning the sender id and message.
pub fn decode(bytes: &[u8]) -> Result<(u64, Message), ProtocolError> {
    Envelope::from_bytes(bytes)?.into_message()
}

/// Exact encoded length of `message`, envelope header included.
pub fn byte_size(message: &Message) -> Result<usize, ProtocolError> {
    Ok(HEADER_LEN + message.payload()?.len())
}

/// Frames with no detected person are never sent.
pub fn should_transmit<T: Real>(pose: &PoseResult<T>) -> bool {
    !pose.skeletons.is_empty()
}

/// Stable 64-bit sender id for a camera (FNV-1a of its name). The fog uses 0.
pub fn sender_id_for(camera: &CameraId) -> u64 {
    camera.as_str().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub const FOG_SENDER_ID: u64 = 0;

/// Reads one envelope from a stream. Returns `Ok(None)` on a clean end of
/// stream between envelopes.
pub fn read_envelope<R: Read>(reader: &mut R) -> Result<Option<Envelope>, ProtocolError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(ProtocolError::TruncatedPayload { needed: HEADER_LEN, available: filled }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let (kind, sender_id, length) = parse_header(&header)?;
    let mut payload = Vec::with_capacity(length as usize);
    reader.take(u64::from(length)).read_to_end(&mut payload)?;
    if payload.len() < length as usize {
        return Err(ProtocolError::TruncatedPayload { needed: HEADER_LEN + length as usize, available: HEADER_LEN + payload.len() });
    }
    Ok(Some(Envelope { version: PROTOCOL_VERSION, kind, sender_id, payload }))
}

pub fn read_message<R: Read>(reader: &mut R) -> Result<Option<(u64, Message)>, ProtocolError> {
    read_envelope(reader)?.map(Envelope::into_message).transpose()
}

/// Writes one message and returns the number of bytes put on the wire.
pub fn write_message<W: Write>(writer: &mut W, sender_id: u64, message: &Message) -> Result<usize, ProtocolError> {
    let bytes = encode(sender_id, message)?;
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(bytes.len())
}
