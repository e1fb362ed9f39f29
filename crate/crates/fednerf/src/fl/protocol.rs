//! The length-prefixed wire protocol.
//!
//! Frame layout: magic `0x46 0x4E` ("FN"), payload length as u32
//! big-endian counting the type byte plus body, one type byte, then the
//! body. Multi-byte integers are big-endian; parameter payloads are f32
//! little-endian in flat parameter order.

use crate::error::{Error, Result};
use crate::fl::DeviceId;
use std::io::{Read, Write};

pub const MAGIC: [u8; 2] = [0x46, 0x4E];

/// Frames larger than this are rejected before any allocation.
pub const MAX_FRAME_LEN: u32 = 64 * 1024 * 1024;

const TYPE_HELLO: u8 = 0x01;
const TYPE_MODEL: u8 = 0x02;
const TYPE_UPDATE: u8 = 0x03;
const TYPE_FIN: u8 = 0x04;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Client announces itself after connecting.
    Hello { device_id: DeviceId },
    /// Server broadcasts the global parameters for one round.
    Model { round: u32, params: Vec<f32> },
    /// Client returns its locally trained parameters plus its channel
    /// report (rate quantized to 0.01 Mbit/s).
    Update {
        device_id: DeviceId,
        round: u32,
        num_samples: u32,
        rssi: u8,
        rate_mbps_x100: u32,
        params: Vec<f32>,
    },
    /// Server ends the session; the client exits cleanly.
    Fin,
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut body = Vec::new();
    let type_byte = match msg {
        Message::Hello { device_id } => {
            body.extend_from_slice(&device_id.0.to_be_bytes());
            TYPE_HELLO
        }
        Message::Model { round, params } => {
            body.extend_from_slice(&round.to_be_bytes());
            body.extend_from_slice(&(params.len() as u32).to_be_bytes());
            for p in params {
                body.extend_from_slice(&p.to_le_bytes());
            }
            TYPE_MODEL
        }
        Message::Update {
            device_id,
            round,
            num_samples,
            rssi,
            rate_mbps_x100,
            params,
        } => {
            body.extend_from_slice(&device_id.0.to_be_bytes());
            body.extend_from_slice(&round.to_be_bytes());
            body.extend_from_slice(&num_samples.to_be_bytes());
            body.push(*rssi);
            body.extend_from_slice(&rate_mbps_x100.to_be_bytes());
            body.extend_from_slice(&(params.len() as u32).to_be_bytes());
            for p in params {
                body.extend_from_slice(&p.to_le_bytes());
            }
            TYPE_UPDATE
        }
        Message::Fin => TYPE_FIN,
    };
    let mut frame = Vec::with_capacity(7 + body.len());
    frame.extend_from_slice(&MAGIC);
    frame.extend_from_slice(&(1 + body.len() as u32).to_be_bytes());
    frame.push(type_byte);
    frame.extend_from_slice(&body);
    frame
}

pub fn decode_message(frame: &[u8]) -> Result<Message> {
    let err = |what: &str| Error::Protocol(what.to_string());
    if frame.len() < 7 {
        return Err(err("frame shorter than header"));
    }
    if frame[0..2] != MAGIC {
        return Err(Error::Protocol(format!(
            "bad magic {:02x} {:02x}",
            frame[0], frame[1]
        )));
    }
    let declared = u32::from_be_bytes(frame[2..6].try_into().unwrap());
    if declared == 0 {
        return Err(err("declared length omits the type byte"));
    }
    if declared > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("declared length {declared} exceeds limit")));
    }
    if frame.len() as u64 != 6 + declared as u64 {
        return Err(Error::Protocol(format!(
            "declared length {declared} but frame carries {} payload bytes",
            frame.len() - 6
        )));
    }
    let body = &frame[7..];
    decode_body(frame[6], body)
}

fn decode_body(type_byte: u8, body: &[u8]) -> Result<Message> {
    let take_u32 = |at: usize, field: &str| -> Result<u32> {
        body.get(at..at + 4)
            .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Protocol(format!("truncated field {field}")))
    };
    let take_params = |at: usize| -> Result<Vec<f32>> {
        let count = take_u32(at, "param_count")? as usize;
        let bytes = body
            .get(at + 4..)
            .ok_or_else(|| Error::Protocol("truncated field params".into()))?;
        if bytes.len() != count * 4 {
            return Err(Error::Protocol(format!(
                "param_count {count} disagrees with {} payload bytes",
                bytes.len()
            )));
        }
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    };
    match type_byte {
        TYPE_HELLO => {
            if body.len() != 4 {
                return Err(Error::Protocol(format!(
                    "HELLO body is {} bytes, expected 4",
                    body.len()
                )));
            }
            Ok(Message::Hello {
                device_id: DeviceId(take_u32(0, "device_id")?),
            })
        }
        TYPE_MODEL => Ok(Message::Model {
            round: take_u32(0, "round")?,
            params: take_params(4)?,
        }),
        TYPE_UPDATE => {
            if body.len() < 17 {
                return Err(Error::Protocol(format!(
                    "UPDATE body is {} bytes, expected at least 17",
                    body.len()
                )));
            }
            Ok(Message::Update {
                device_id: DeviceId(take_u32(0, "device_id")?),
                round: take_u32(4, "round")?,
                num_samples: take_u32(8, "num_samples")?,
                rssi: body[12],
                rate_mbps_x100: take_u32(13, "rate_mbps_x100")?,
                params: take_params(17)?,
            })
        }
        TYPE_FIN => {
            if !body.is_empty() {
                return Err(Error::Protocol(format!(
                    "FIN carries {} unexpected body bytes",
                    body.len()
                )));
            }
            Ok(Message::Fin)
        }
        other => Err(Error::Protocol(format!("unknown type byte 0x{other:02x}"))),
    }
}

/// Write one frame to `w`.
pub fn write_message(w: &mut impl Write, msg: &Message) -> std::io::Result<()> {
    w.write_all(&encode_message(msg))?;
    w.flush()
}

/// Read exactly one frame from `r`. Returns `Ok(None)` on clean EOF at a
/// frame boundary.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>> {
    let mut header = [0u8; 6];
    match r.read_exact(&mut header) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(Error::Protocol(format!("read failed: {e}"))),
    }
    if header[0..2] != MAGIC {
        return Err(Error::Protocol(format!(
            "bad magic {:02x} {:02x}",
            header[0], header[1]
        )));
    }
    let declared = u32::from_be_bytes(header[2..6].try_into().unwrap());
    if declared == 0 || declared > MAX_FRAME_LEN {
        return Err(Error::Protocol(format!("declared length {declared} out of range")));
    }
    let mut rest = vec![0u8; declared as usize];
    r.read_exact(&mut rest)
        .map_err(|e| Error::Protocol(format!("truncated frame: {e}")))?;
    decode_body(rest[0], &rest[1..]).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn samples() -> Vec<Message> {
        vec![
            Message::Hello {
                device_id: DeviceId(3),
            },
            Message::Model {
                round: 7,
                params: vec![0.0, -1.5, 3.25e-3, f32::MIN_POSITIVE],
            },
            Message::Model {
                round: 0,
                params: vec![],
            },
            Message::Update {
                device_id: DeviceId(2),
                round: 44,
                num_samples: 4096,
                rssi: 66,
                rate_mbps_x100: 27043,
                params: vec![1.0, 2.0, -0.5],
            },
            Message::Fin,
        ]
    }

    #[test]
    fn round_trip_every_message_type() {
        for msg in samples() {
            let bytes = encode_message(&msg);
            assert_eq!(decode_message(&bytes).unwrap(), msg);
        }
    }

    #[test]
    fn hello_exact_bytes() {
        let bytes = encode_message(&Message::Hello {
            device_id: DeviceId(3),
        });
        assert_eq!(
            bytes,
            vec![0x46, 0x4E, 0x00, 0x00, 0x00, 0x05, 0x01, 0x00, 0x00, 0x00, 0x03]
        );
    }

    #[test]
    fn truncation_and_corruption_are_errors_not_panics() {
        for msg in samples() {
            let bytes = encode_message(&msg);
            for cut in 0..bytes.len() {
                assert!(decode_message(&bytes[..cut]).is_err());
            }
            let mut bad_magic = bytes.clone();
            bad_magic[0] = 0x00;
            assert!(matches!(
                decode_message(&bad_magic),
                Err(Error::Protocol(_))
            ));
            let mut bad_type = bytes.clone();
            bad_type[6] = 0x7F;
            assert!(decode_message(&bad_type).is_err());
        }
    }

    #[test]
    fn length_mismatch_names_the_field() {
        let mut bytes = encode_message(&Message::Model {
            round: 1,
            params: vec![1.0, 2.0],
        });
        // Lie about param_count.
        let at = 7 + 4;
        bytes[at..at + 4].copy_from_slice(&9u32.to_be_bytes());
        let err = decode_message(&bytes).unwrap_err();
        assert!(err.to_string().contains("param_count"), "{err}");
    }

    #[test]
    fn oversized_declared_length_is_rejected_without_allocation() {
        let mut bytes = encode_message(&Message::Fin);
        bytes[2..6].copy_from_slice(&u32::MAX.to_be_bytes());
        assert!(decode_message(&bytes).is_err());
        // Streaming path as well.
        let mut cursor = std::io::Cursor::new(bytes);
        assert!(read_message(&mut cursor).is_err());
    }

    #[test]
    fn fuzzed_frames_never_panic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xF122);
        for _ in 0..10_000 {
            let len = rng.gen_range(0..64usize);
            let mut bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            // Half the time start from a valid frame and corrupt one byte.
            if rng.gen_bool(0.5) {
                let msg = &samples()[rng.gen_range(0..5)];
                bytes = encode_message(msg);
                if !bytes.is_empty() {
                    let at = rng.gen_range(0..bytes.len());
                    bytes[at] = bytes[at].wrapping_add(rng.gen_range(1..=255));
                }
            }
            let _ = decode_message(&bytes); // must return, never panic
        }
    }

    #[test]
    fn streaming_read_handles_back_to_back_frames_and_eof() {
        let mut buf = Vec::new();
        for msg in samples() {
            buf.extend_from_slice(&encode_message(&msg));
        }
        let mut cursor = std::io::Cursor::new(buf);
        for msg in samples() {
            assert_eq!(read_message(&mut cursor).unwrap(), Some(msg));
        }
        assert_eq!(read_message(&mut cursor).unwrap(), None);
    }
}
