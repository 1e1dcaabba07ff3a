//! Protocol messages and their payload encodings.
//!
//! Every payload is a fixed little-endian layout; the framing (length, tag,
//! sequence number) lives in [`super::transport`].

use crate::reconcile::SideInfo;
use crate::sim::Basis;
use crate::util::{pack_bits, unpack_bits};

use super::SessionError;

/// Abort reason codes carried on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum AbortReason {
    ConfigMismatch = 1,
    SequenceViolation = 2,
    EstimationOutOfBounds = 3,
    VerificationFailure = 4,
    NoPositiveKey = 5,
    AccountingMismatch = 6,
    UnexpectedMessage = 7,
}

impl AbortReason {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => Self::ConfigMismatch,
            2 => Self::SequenceViolation,
            3 => Self::EstimationOutOfBounds,
            4 => Self::VerificationFailure,
            5 => Self::NoPositiveKey,
            6 => Self::AccountingMismatch,
            7 => Self::UnexpectedMessage,
            _ => return None,
        })
    }
}

/// Sentinel frame index marking the session-completion acknowledgement.
pub const ACK_FRAME_INDEX: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    /// Opens the session: digest of the shared configuration plus a
    /// commitment to the sender's seed.
    SessionStart { config_digest: [u8; 32], seed_commitment: [u8; 32] },
    /// Simulated quantum exchange, Alice to Bob: what Bob's apparatus
    /// records (his basis choices and homodyne outcomes).
    QuantumBatch { bases: Vec<Basis>, bob_y: Vec<f64> },
    /// Bob reveals his measurement bases.
    BasisReveal { bases: Vec<Basis> },
    /// Disclosed values on the estimation subset; sent by Bob with his
    /// outcomes, answered by Alice with her projected symbols.
    EstimationDisclosure { indices: Vec<u32>, values: Vec<f64> },
    /// Bob's reconciliation disclosure for one frame.
    SideInfoMsg { frame_index: u64, side: SideInfo },
    /// Alice's per-frame verification verdict; `frame_index = u64::MAX`
    /// acknowledges session completion.
    VerifyResult { frame_index: u64, ok: bool },
    /// Bob's privacy-amplification seed and agreed output length.
    PaSeed { seed: u64, out_len: u64 },
    Abort { reason: AbortReason },
}

impl ProtocolMessage {
    pub fn tag(&self) -> u8 {
        match self {
            Self::SessionStart { .. } => 1,
            Self::QuantumBatch { .. } => 2,
            Self::BasisReveal { .. } => 3,
            Self::EstimationDisclosure { .. } => 4,
            Self::SideInfoMsg { .. } => 5,
            Self::VerifyResult { .. } => 6,
            Self::PaSeed { .. } => 7,
            Self::Abort { .. } => 8,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        match self {
            Self::SessionStart { config_digest, seed_commitment } => {
                let mut out = Vec::with_capacity(64);
                out.extend_from_slice(config_digest);
                out.extend_from_slice(seed_commitment);
                out
            }
            Self::QuantumBatch { bases, bob_y } => {
                let mut out = encode_bases(bases);
                for y in bob_y {
                    out.extend_from_slice(&y.to_le_bytes());
                }
                out
            }
            Self::BasisReveal { bases } => encode_bases(bases),
            Self::EstimationDisclosure { indices, values } => {
                let mut out = Vec::with_capacity(8 + indices.len() * 12);
                out.extend_from_slice(&(indices.len() as u64).to_le_bytes());
                for i in indices {
                    out.extend_from_slice(&i.to_le_bytes());
                }
                for v in values {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out
            }
            Self::SideInfoMsg { frame_index, side } => {
                let mut out = frame_index.to_le_bytes().to_vec();
                out.extend_from_slice(&side.to_bytes());
                out
            }
            Self::VerifyResult { frame_index, ok } => {
                let mut out = frame_index.to_le_bytes().to_vec();
                out.push(u8::from(*ok));
                out
            }
            Self::PaSeed { seed, out_len } => {
                let mut out = seed.to_le_bytes().to_vec();
                out.extend_from_slice(&out_len.to_le_bytes());
                out
            }
            Self::Abort { reason } => vec![*reason as u8],
        }
    }

    pub fn decode(tag: u8, payload: &[u8]) -> Result<Self, SessionError> {
        let bad = |msg: &str| SessionError::Framing(format!("tag {tag}: {msg}"));
        Ok(match tag {
            1 => {
                if payload.len() != 64 {
                    return Err(bad("session start must be 64 bytes"));
                }
                Self::SessionStart {
                    config_digest: payload[0..32].try_into().unwrap(),
                    seed_commitment: payload[32..64].try_into().unwrap(),
                }
            }
            2 => {
                let (bases, rest) = decode_bases(payload)?;
                if rest.len() != bases.len() * 8 {
                    return Err(bad("outcome section size mismatch"));
                }
                let bob_y = rest
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Self::QuantumBatch { bases, bob_y }
            }
            3 => {
                let (bases, rest) = decode_bases(payload)?;
                if !rest.is_empty() {
                    return Err(bad("trailing bytes"));
                }
                Self::BasisReveal { bases }
            }
            4 => {
                if payload.len() < 8 {
                    return Err(bad("truncated"));
                }
                let count = u64::from_le_bytes(payload[0..8].try_into().unwrap()) as usize;
                let need = 8 + count * 4 + count * 8;
                if payload.len() != need {
                    return Err(bad("disclosure size mismatch"));
                }
                let indices = payload[8..8 + count * 4]
                    .chunks_exact(4)
                    .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                let values = payload[8 + count * 4..]
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Self::EstimationDisclosure { indices, values }
            }
            5 => {
                if payload.len() < 8 {
                    return Err(bad("truncated"));
                }
                let frame_index = u64::from_le_bytes(payload[0..8].try_into().unwrap());
                let side = SideInfo::from_bytes(&payload[8..])
                    .map_err(|e| bad(&format!("side info: {e}")))?;
                Self::SideInfoMsg { frame_index, side }
            }
            6 => {
                if payload.len() != 9 {
                    return Err(bad("verify result must be 9 bytes"));
                }
                Self::VerifyResult {
                    frame_index: u64::from_le_bytes(payload[0..8].try_into().unwrap()),
                    ok: payload[8] != 0,
                }
            }
            7 => {
                if payload.len() != 16 {
                    return Err(bad("pa seed must be 16 bytes"));
                }
                Self::PaSeed {
                    seed: u64::from_le_bytes(payload[0..8].try_into().unwrap()),
                    out_len: u64::from_le_bytes(payload[8..16].try_into().unwrap()),
                }
            }
            8 => {
                if payload.len() != 1 {
                    return Err(bad("abort must be 1 byte"));
                }
                let reason = AbortReason::from_code(payload[0])
                    .ok_or_else(|| bad("unknown abort reason"))?;
                Self::Abort { reason }
            }
            _ => return Err(SessionError::Framing(format!("unknown message tag {tag}"))),
        })
    }
}

fn encode_bases(bases: &[Basis]) -> Vec<u8> {
    let bits: Vec<u8> = bases.iter().map(|b| u8::from(matches!(b, Basis::P))).collect();
    let mut out = (bases.len() as u64).to_le_bytes().to_vec();
    out.extend_from_slice(&pack_bits(&bits));
    out
}

fn decode_bases(payload: &[u8]) -> Result<(Vec<Basis>, &[u8]), SessionError> {
    if payload.len() < 8 {
        return Err(SessionError::Framing("basis section truncated".into()));
    }
    let n = u64::from_le_bytes(payload[0..8].try_into().unwrap()) as usize;
    let packed_len = n.div_ceil(8);
    if payload.len() < 8 + packed_len {
        return Err(SessionError::Framing("basis bits truncated".into()));
    }
    let bases = unpack_bits(&payload[8..8 + packed_len], n)
        .into_iter()
        .map(|b| if b == 1 { Basis::P } else { Basis::Q })
        .collect();
    Ok((bases, &payload[8 + packed_len..]))
}
