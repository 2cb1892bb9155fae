//! Device-to-host serial framing.
//!
//! ```text
//! +------+------+---------+--------------+---------+----------+
//! | sync | type | seq     | timestamp_ms | payload | checksum |
//! | A5   | 1    | 2 (LE)  | 4 (LE)       | 0..2    | 1        |
//! +------+------+---------+--------------+---------+----------+
//! ```
//!
//! Frame types: `0x01` sensor sample (1 payload byte: bit0 left on ink, bit1
//! right on ink, bit2 left fault, bit3 right fault, upper bits zero), `0x02`
//! heartbeat (no payload), `0x03` device status (battery percent, status
//! flags). The checksum is the XOR of every preceding byte of the frame.

use serde::{Deserialize, Serialize};

use crate::sensing::SensorReading;

pub const SYNC: u8 = 0xA5;
const HEADER_LEN: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FrameType {
    SensorSample = 0x01,
    Heartbeat = 0x02,
    DeviceStatus = 0x03,
}

impl FrameType {
    pub fn from_byte(b: u8) -> Option<FrameType> {
        match b {
            0x01 => Some(FrameType::SensorSample),
            0x02 => Some(FrameType::Heartbeat),
            0x03 => Some(FrameType::DeviceStatus),
            _ => None,
        }
    }

    pub fn payload_len(self) -> usize {
        match self {
            FrameType::SensorSample => 1,
            FrameType::Heartbeat => 0,
            FrameType::DeviceStatus => 2,
        }
    }

    /// Total encoded length including sync and checksum.
    pub fn frame_len(self) -> usize {
        HEADER_LEN + self.payload_len() + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Payload {
    SensorSample {
        left_on_ink: bool,
        right_on_ink: bool,
        left_fault: bool,
        right_fault: bool,
    },
    Heartbeat,
    DeviceStatus {
        battery_percent: u8,
        flags: u8,
    },
}

impl Payload {
    pub fn frame_type(&self) -> FrameType {
        match self {
            Payload::SensorSample { .. } => FrameType::SensorSample,
            Payload::Heartbeat => FrameType::Heartbeat,
            Payload::DeviceStatus { .. } => FrameType::DeviceStatus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WireFrame {
    pub seq: u16,
    pub timestamp_ms: u32,
    pub payload: Payload,
}

impl WireFrame {
    pub fn sensor_sample(seq: u16, reading: &SensorReading) -> Self {
        WireFrame {
            seq,
            timestamp_ms: reading.timestamp as u32,
            payload: Payload::SensorSample {
                left_on_ink: reading.left_on_ink,
                right_on_ink: reading.right_on_ink,
                left_fault: reading.left_fault,
                right_fault: reading.right_fault,
            },
        }
    }

    /// The reading carried by a sensor-sample frame.
    pub fn reading(&self) -> Option<SensorReading> {
        match self.payload {
            Payload::SensorSample {
                left_on_ink,
                right_on_ink,
                left_fault,
                right_fault,
            } => Some(SensorReading {
                timestamp: u64::from(self.timestamp_ms),
                left_on_ink,
                right_on_ink,
                left_fault,
                right_fault,
            }),
            _ => None,
        }
    }
}

pub fn checksum(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |acc, b| acc ^ b)
}

/// Appends the encoded frame to `out`.
pub fn encode_frame_into(frame: &WireFrame, out: &mut Vec<u8>) {
    let start = out.len();
    out.push(SYNC);
    out.push(frame.payload.frame_type() as u8);
    out.extend_from_slice(&frame.seq.to_le_bytes());
    out.extend_from_slice(&frame.timestamp_ms.to_le_bytes());
    match frame.payload {
        Payload::SensorSample {
            left_on_ink,
            right_on_ink,
            left_fault,
            right_fault,
        } => out.push(
            left_on_ink as u8 | (right_on_ink as u8) << 1 | (left_fault as u8) << 2 | (right_fault as u8) << 3,
        ),
        Payload::Heartbeat => {}
        Payload::DeviceStatus { battery_percent, flags } => {
            out.push(battery_percent);
            out.push(flags);
        }
    }
    let sum = checksum(&out[start..]);
    out.push(sum);
}

pub fn encode_frame(frame: &WireFrame) -> Vec<u8> {
    let mut out = Vec::with_capacity(frame.payload.frame_type().frame_len());
    encode_frame_into(frame, &mut out);
    out
}

/// Non-fatal decoder findings. Offsets are absolute stream positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Diagnostic {
    /// Bytes discarded while hunting for a sync byte.
    SkippedBytes { offset: u64, count: u64 },
    UnknownFrameType { offset: u64, frame_type: u8 },
    ChecksumMismatch { offset: u64, expected: u8, found: u8 },
    /// Sensor payload with reserved bits set.
    ReservedBits { offset: u64, payload: u8 },
    /// Sequence numbers skipped between two good frames.
    SequenceGap { offset: u64, expected: u16, found: u16, lost: u16 },
    /// Sequence number at or behind the previous frame.
    SequenceRegression { offset: u64, previous: u16, found: u16 },
}

/// Incremental frame decoder. Feeding a stream in any chunking produces the
/// same frames and diagnostics as feeding it at once.
#[derive(Debug, Clone, Default)]
pub struct StreamDecoder {
    buffer: Vec<u8>,
    /// Stream offset of `buffer[0]`.
    base: u64,
    /// Bytes skipped since the last sync candidate, reported lazily.
    pending_skip: Option<(u64, u64)>,
    last_seq: Option<u16>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeOutput {
    pub frames: Vec<WireFrame>,
    pub diagnostics: Vec<Diagnostic>,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes held waiting for the rest of a frame.
    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn feed(&mut self, bytes: &[u8]) -> DecodeOutput {
        let mut out = DecodeOutput::default();
        self.feed_into(bytes, &mut out);
        out
    }

    pub fn feed_into(&mut self, bytes: &[u8], out: &mut DecodeOutput) {
        self.buffer.extend_from_slice(bytes);
        let mut pos = 0;
        loop {
            // hunt for sync
            let Some(rel) = self.buffer[pos..].iter().position(|&b| b == SYNC) else {
                self.skip(pos as u64, (self.buffer.len() - pos) as u64);
                pos = self.buffer.len();
                break;
            };
            self.skip(pos as u64, rel as u64);
            pos += rel;
            let offset = self.base + pos as u64;

            let Some(&type_byte) = self.buffer.get(pos + 1) else {
                break;
            };
            let Some(kind) = FrameType::from_byte(type_byte) else {
                self.flush_skip(out);
                out.diagnostics.push(Diagnostic::UnknownFrameType {
                    offset,
                    frame_type: type_byte,
                });
                self.skip(pos as u64, 1);
                pos += 1;
                continue;
            };
            let len = kind.frame_len();
            if self.buffer.len() - pos < len {
                break;
            }
            let expected = checksum(&self.buffer[pos..pos + len - 1]);
            let found = self.buffer[pos + len - 1];
            if expected != found {
                self.flush_skip(out);
                out.diagnostics.push(Diagnostic::ChecksumMismatch { offset, expected, found });
                self.skip(pos as u64, 1);
                pos += 1;
                continue;
            }
            match parse_body(kind, &self.buffer[pos..pos + len]) {
                Ok(frame) => {
                    self.flush_skip(out);
                    self.check_sequence(offset, frame.seq, out);
                    out.frames.push(frame);
                    pos += len;
                }
                Err(payload) => {
                    self.flush_skip(out);
                    out.diagnostics.push(Diagnostic::ReservedBits { offset, payload });
                    self.skip(pos as u64, 1);
                    pos += 1;
                }
            }
        }
        self.buffer.drain(..pos);
        self.base += pos as u64;
    }

    /// Reports any bytes still skipped or buffered at end of stream.
    pub fn finish(&mut self) -> Vec<Diagnostic> {
        let mut out = DecodeOutput::default();
        let held = self.buffer.len() as u64;
        self.skip(0, held);
        self.base += held;
        self.buffer.clear();
        self.flush_skip(&mut out);
        out.diagnostics
    }

    fn skip(&mut self, rel_offset: u64, count: u64) {
        if count == 0 {
            return;
        }
        let offset = self.base + rel_offset;
        match &mut self.pending_skip {
            Some((start, n)) if *start + *n == offset => *n += count,
            _ => self.pending_skip = Some((offset, count)),
        }
    }

    fn flush_skip(&mut self, out: &mut DecodeOutput) {
        if let Some((offset, count)) = self.pending_skip.take() {
            out.diagnostics.push(Diagnostic::SkippedBytes { offset, count });
        }
    }

    fn check_sequence(&mut self, offset: u64, seq: u16, out: &mut DecodeOutput) {
        if let Some(prev) = self.last_seq {
            let expected = prev.wrapping_add(1);
            let ahead = seq.wrapping_sub(expected);
            if ahead != 0 {
                if ahead < 0x8000 {
                    out.diagnostics.push(Diagnostic::SequenceGap {
                        offset,
                        expected,
                        found: seq,
                        lost: ahead,
                    });
                } else {
                    out.diagnostics.push(Diagnostic::SequenceRegression {
                        offset,
                        previous: prev,
                        found: seq,
                    });
                }
            }
        }
        self.last_seq = Some(seq);
    }
}

fn parse_body(kind: FrameType, raw: &[u8]) -> Result<WireFrame, u8> {
    let seq = u16::from_le_bytes([raw[2], raw[3]]);
    let timestamp_ms = u32::from_le_bytes([raw[4], raw[5], raw[6], raw[7]]);
    let payload = match kind {
        FrameType::SensorSample => {
            let bits = raw[8];
            if bits & 0xF0 != 0 {
                return Err(bits);
            }
            Payload::SensorSample {
                left_on_ink: bits & 0x01 != 0,
                right_on_ink: bits & 0x02 != 0,
                left_fault: bits & 0x04 != 0,
                right_fault: bits & 0x08 != 0,
            }
        }
        FrameType::Heartbeat => Payload::Heartbeat,
        FrameType::DeviceStatus => Payload::DeviceStatus {
            battery_percent: raw[8],
            flags: raw[9],
        },
    };
    Ok(WireFrame {
        seq,
        timestamp_ms,
        payload,
    })
}

/// One-shot decode of a complete byte stream.
pub fn decode_all(bytes: &[u8]) -> DecodeOutput {
    let mut decoder = StreamDecoder::new();
    let mut out = decoder.feed(bytes);
    out.diagnostics.extend(decoder.finish());
    out
}
