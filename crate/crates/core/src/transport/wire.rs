//! Frame format shared by every backend, so byte counts are comparable
//! across engines.
//!
//! ```text
//! +----------------+------+---------+------------------------------+
//! | len: u32 (BE)  | kind | version | envelope (bincode, LE ints)  |
//! +----------------+------+---------+------------------------------+
//! ```
//!
//! `len` counts every byte after itself. `kind` is [`MessageKind::code`].
//! `version` is [`WIRE_VERSION`]; frames with any other version are rejected.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::message::{MessageKind, Payload};
use crate::types::NodeId;
use crate::{Error, Result};

pub const WIRE_VERSION: u8 = 1;
/// Length prefix plus kind and version bytes.
pub const FRAME_OVERHEAD: usize = 6;
const MAX_FRAME: u32 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub src: NodeId,
    pub dst: NodeId,
    pub send_time_us: u64,
    pub payload: Payload,
}

pub fn encode(env: &Envelope) -> Vec<u8> {
    let body = bincode::serialize(env).expect("envelope serialization cannot fail");
    let len = u32::try_from(body.len() + 2).expect("frame too large");
    let mut out = Vec::with_capacity(body.len() + FRAME_OVERHEAD);
    out.extend_from_slice(&len.to_be_bytes());
    out.push(env.payload.kind().code());
    out.push(WIRE_VERSION);
    out.extend_from_slice(&body);
    out
}

/// Decodes one complete frame. Returns the envelope and the bytes consumed.
pub fn decode(buf: &[u8]) -> Result<(Envelope, usize)> {
    if buf.len() < 4 {
        return Err(Error::Wire("short length prefix".into()));
    }
    let len = u32::from_be_bytes(buf[..4].try_into().unwrap());
    if !(2..=MAX_FRAME).contains(&len) {
        return Err(Error::Wire(format!("bad frame length {len}")));
    }
    let end = 4 + len as usize;
    if buf.len() < end {
        return Err(Error::Wire("truncated frame".into()));
    }
    let kind = MessageKind::from_code(buf[4]).ok_or_else(|| Error::Wire(format!("unknown kind {}", buf[4])))?;
    if buf[5] != WIRE_VERSION {
        return Err(Error::Wire(format!("unsupported wire version {}", buf[5])));
    }
    let env: Envelope = bincode::deserialize(&buf[6..end]).map_err(|e| Error::Wire(e.to_string()))?;
    if env.payload.kind() != kind {
        return Err(Error::Wire(format!("kind byte {kind} does not match payload {}", env.payload.kind())));
    }
    Ok((env, end))
}

pub fn write_frame(w: &mut impl Write, env: &Envelope) -> Result<usize> {
    let bytes = encode(env);
    w.write_all(&bytes)?;
    Ok(bytes.len())
}

/// Reads one frame; `Ok(None)` on clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Envelope>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let n = u32::from_be_bytes(len);
    if !(2..=MAX_FRAME).contains(&n) {
        return Err(Error::Wire(format!("bad frame length {n}")));
    }
    let mut buf = vec![0u8; 4 + n as usize];
    buf[..4].copy_from_slice(&len);
    r.read_exact(&mut buf[4..])?;
    decode(&buf).map(|(env, _)| Some(env))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::Timestamp;
    use crate::storage::TsVector;
    use crate::types::RotId;
    use proptest::prelude::*;

    fn env(payload: Payload) -> Envelope {
        Envelope { src: NodeId::client(0, 1), dst: NodeId::partition(0, 2), send_time_us: 99, payload }
    }

    #[test]
    fn frame_layout() {
        let e = env(Payload::Heartbeat { seq: 3, ts: Timestamp(5) });
        let bytes = encode(&e);
        let len = u32::from_be_bytes(bytes[..4].try_into().unwrap()) as usize;
        assert_eq!(len + 4, bytes.len());
        assert_eq!(bytes[4], MessageKind::Heartbeat.code());
        assert_eq!(bytes[5], WIRE_VERSION);
        assert_eq!(decode(&bytes).unwrap(), (e, bytes.len()));
    }

    #[test]
    fn rejects_bad_frames() {
        let mut bytes = encode(&env(Payload::StabExchange { vv: TsVector::zeros(2) }));
        assert!(decode(&bytes[..3]).is_err());
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[5] = 9;
        assert!(decode(&bytes).is_err());
        bytes[5] = WIRE_VERSION;
        bytes[4] = MessageKind::RotReq.code();
        assert!(decode(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn cclo_reads_round_trip(client: u32, seq: u32, keys in proptest::collection::vec("[a-z]{1,8}", 0..6)) {
            let e = env(Payload::CcloRead { rot: RotId { client, seq }, keys });
            let bytes = encode(&e);
            let mut cursor = std::io::Cursor::new(bytes);
            prop_assert_eq!(read_frame(&mut cursor).unwrap(), Some(e));
            prop_assert_eq!(read_frame(&mut cursor).unwrap(), None);
        }
    }
}
