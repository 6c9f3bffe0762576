//! Frame codec.

use std::io::Read;

use super::{ProtoError, RejectCode, Rejection};

pub const FRAME_MAGIC: &[u8; 4] = b"LITD";
pub const PROTOCOL_VERSION: u8 = 1;
pub const FRAME_HEADER_LEN: usize = 10;
pub const NONCE_LEN: usize = 16;
pub const TAG_LEN: usize = 32;

pub type Nonce = [u8; NONCE_LEN];
pub type Tag = [u8; TAG_LEN];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageType {
    Request = 1,
    Response = 2,
    Reject = 255,
}

impl MessageType {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            1 => Some(Self::Request),
            2 => Some(Self::Response),
            255 => Some(Self::Reject),
            _ => None,
        }
    }
}

fn format(detail: impl Into<String>) -> Rejection {
    Rejection::new(RejectCode::Format, detail)
}

pub fn encode_frame(kind: MessageType, payload: &[u8]) -> Result<Vec<u8>, Rejection> {
    let len = u32::try_from(payload.len())
        .map_err(|_| format(format!("payload of {} bytes does not fit a u32 length", payload.len())))?;
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(FRAME_MAGIC);
    out.push(PROTOCOL_VERSION);
    out.push(kind as u8);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Checks magic, version and type; returns the declared payload length.
pub fn parse_header(header: &[u8; FRAME_HEADER_LEN]) -> Result<(MessageType, usize), Rejection> {
    if &header[..4] != FRAME_MAGIC {
        return Err(format("bad magic"));
    }
    if header[4] != PROTOCOL_VERSION {
        return Err(format(format!("unsupported version {}", header[4])));
    }
    let kind = MessageType::from_u8(header[5]).ok_or_else(|| format(format!("unknown message type {}", header[5])))?;
    let len = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    Ok((kind, len))
}

pub fn decode_frame(buf: &[u8]) -> Result<(MessageType, &[u8]), Rejection> {
    let header: &[u8; FRAME_HEADER_LEN] = buf
        .get(..FRAME_HEADER_LEN)
        .and_then(|h| h.try_into().ok())
        .ok_or_else(|| format("truncated frame header"))?;
    let (kind, len) = parse_header(header)?;
    let payload = &buf[FRAME_HEADER_LEN..];
    if payload.len() != len {
        return Err(format(format!("frame declares {len} payload bytes, carries {}", payload.len())));
    }
    Ok((kind, payload))
}

/// Nonce, body and tag of an m1 or m2 payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sealed<'a> {
    pub nonce: Nonce,
    pub body: &'a [u8],
    pub tag: Tag,
}

pub fn encode_sealed(nonce: &Nonce, body: &[u8], tag: &Tag) -> Result<Vec<u8>, Rejection> {
    let len = u32::try_from(body.len())
        .map_err(|_| format(format!("ciphertext of {} bytes does not fit a u32 length", body.len())))?;
    let mut out = Vec::with_capacity(NONCE_LEN + 4 + body.len() + TAG_LEN);
    out.extend_from_slice(nonce);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(body);
    out.extend_from_slice(tag);
    Ok(out)
}

pub fn decode_sealed(payload: &[u8]) -> Result<Sealed<'_>, Rejection> {
    if payload.len() < NONCE_LEN + 4 + TAG_LEN {
        return Err(format("payload too short"));
    }
    let nonce: Nonce = payload[..NONCE_LEN].try_into().unwrap();
    let len = u32::from_le_bytes(payload[NONCE_LEN..NONCE_LEN + 4].try_into().unwrap()) as usize;
    if payload.len() != NONCE_LEN + 4 + len + TAG_LEN {
        return Err(format(format!(
            "ciphertext length {len} disagrees with a {}-byte payload",
            payload.len()
        )));
    }
    let body = &payload[NONCE_LEN + 4..NONCE_LEN + 4 + len];
    let tag: Tag = payload[payload.len() - TAG_LEN..].try_into().unwrap();
    Ok(Sealed { nonce, body, tag })
}

pub fn encode_reject(rejection: &Rejection) -> Vec<u8> {
    let mut payload = vec![rejection.code as u8];
    payload.extend_from_slice(rejection.detail.as_bytes());
    encode_frame(MessageType::Reject, &payload).expect("reject payloads are small")
}

pub fn decode_reject(payload: &[u8]) -> Result<Rejection, Rejection> {
    let (&code, detail) = payload.split_first().ok_or_else(|| format("empty reject payload"))?;
    let code = RejectCode::from_u8(code).ok_or_else(|| format(format!("unknown reject code {code}")))?;
    let detail = std::str::from_utf8(detail).map_err(|_| format("reject detail is not UTF-8"))?;
    Ok(Rejection::new(code, detail))
}

/// Reads one frame, refusing payloads above `max_payload` before reading them.
pub fn read_frame<R: Read>(reader: &mut R, max_payload: usize) -> Result<Vec<u8>, ProtoError> {
    let mut header = [0u8; FRAME_HEADER_LEN];
    reader.read_exact(&mut header)?;
    let (_, len) = parse_header(&header).map_err(ProtoError::Local)?;
    if len > max_payload {
        return Err(ProtoError::Local(format(format!(
            "frame of {len} bytes exceeds the {max_payload}-byte cap"
        ))));
    }
    let mut frame = header.to_vec();
    frame.resize(FRAME_HEADER_LEN + len, 0);
    reader.read_exact(&mut frame[FRAME_HEADER_LEN..])?;
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sealed_layout_is_bit_exact() {
        let payload = encode_sealed(&[7; 16], b"abc", &[9; 32]).unwrap();
        let frame = encode_frame(MessageType::Request, &payload).unwrap();
        assert_eq!(&frame[..10], b"LITD\x01\x01\x37\x00\x00\x00");
        assert_eq!(&frame[10..26], &[7; 16]);
        assert_eq!(&frame[26..30], &[3, 0, 0, 0]);
        assert_eq!(&frame[30..33], b"abc");
        assert_eq!(&frame[33..], &[9; 32]);
        let (kind, body) = decode_frame(&frame).unwrap();
        assert_eq!(kind, MessageType::Request);
        let sealed = decode_sealed(body).unwrap();
        assert_eq!(sealed.body, b"abc");
    }

    #[test]
    fn reject_roundtrip() {
        let r = Rejection::new(RejectCode::Freshness, "seen");
        let frame = encode_reject(&r);
        assert_eq!(frame[5], 255);
        assert_eq!(&frame[10..], b"\x02seen");
        let (kind, payload) = decode_frame(&frame).unwrap();
        assert_eq!(kind, MessageType::Reject);
        assert_eq!(decode_reject(payload).unwrap(), r);
    }
}
