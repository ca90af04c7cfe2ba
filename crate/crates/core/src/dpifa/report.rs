use serde::{Deserialize, Serialize};

use super::counters::{Counter, LinkCounters};
use crate::identity::{ecdsa_sign, ecdsa_verify, ECDSA_SIGNATURE_LEN};
use crate::musig::{KeyPair, PublicKey};
use crate::RouterId;

/// Fixed field block: rid, nid, seq, version, flags, five packet counters,
/// cycle id and extension length.
pub const REPORT_HEADER_LEN: usize = 44;
/// Header, timestamp, nonce and signature. This is the per-report size used by
/// the storage and traffic figures.
pub const REPORT_MESSAGE_LEN: usize = REPORT_HEADER_LEN + 4 + 4 + ECDSA_SIGNATURE_LEN;
/// Trailing record with the five byte counters as u64.
pub const REPORT_EXTENSION_LEN: usize = 40;
pub const REPORT_WIRE_LEN: usize = REPORT_MESSAGE_LEN + REPORT_EXTENSION_LEN;
pub const REPORT_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("router {0} has no signing key")]
    NoSigningKey(RouterId),
    #[error("packet counter {0} does not fit the 4-byte report field")]
    CounterOverflow(u64),
    #[error("report must be {REPORT_WIRE_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("unsupported report version {0}")]
    BadVersion(u16),
    #[error("extension length field is {0}, expected {REPORT_EXTENSION_LEN}")]
    BadExtension(u32),
}

/// Everything in a report except the signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReportBody {
    pub rid: RouterId,
    pub nid: RouterId,
    pub seq: u32,
    pub cycle: u32,
    pub counters: LinkCounters,
    pub timestamp: u32,
    pub nonce: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DpifaReport {
    pub body: ReportBody,
    pub signature: [u8; ECDSA_SIGNATURE_LEN],
}

fn packets_u32(c: Counter) -> Result<u32, ReportError> {
    u32::try_from(c.packets).map_err(|_| ReportError::CounterOverflow(c.packets))
}

impl ReportBody {
    fn header(&self) -> Result<[u8; REPORT_HEADER_LEN], ReportError> {
        let mut h = [0u8; REPORT_HEADER_LEN];
        h[0..4].copy_from_slice(&self.rid.0.to_be_bytes());
        h[4..8].copy_from_slice(&self.nid.0.to_be_bytes());
        h[8..12].copy_from_slice(&self.seq.to_be_bytes());
        h[12..14].copy_from_slice(&REPORT_VERSION.to_be_bytes());
        // flags 14..16 stay zero
        for (i, c) in self.counters.fields().iter().enumerate() {
            let off = 16 + 4 * i;
            h[off..off + 4].copy_from_slice(&packets_u32(*c)?.to_be_bytes());
        }
        h[36..40].copy_from_slice(&self.cycle.to_be_bytes());
        h[40..44].copy_from_slice(&(REPORT_EXTENSION_LEN as u32).to_be_bytes());
        Ok(h)
    }

    fn extension(&self) -> [u8; REPORT_EXTENSION_LEN] {
        let mut e = [0u8; REPORT_EXTENSION_LEN];
        for (i, c) in self.counters.fields().iter().enumerate() {
            e[8 * i..8 * i + 8].copy_from_slice(&c.bytes.to_be_bytes());
        }
        e
    }

    /// Bytes covered by the signature: header, timestamp, nonce, extension.
    pub fn signing_bytes(&self) -> Result<Vec<u8>, ReportError> {
        let mut out = Vec::with_capacity(REPORT_HEADER_LEN + 8 + REPORT_EXTENSION_LEN);
        out.extend_from_slice(&self.header()?);
        out.extend_from_slice(&self.timestamp.to_be_bytes());
        out.extend_from_slice(&self.nonce.to_be_bytes());
        out.extend_from_slice(&self.extension());
        Ok(out)
    }

    pub fn sign(self, key: &KeyPair) -> Result<DpifaReport, ReportError> {
        let signature = ecdsa_sign(key, &self.signing_bytes()?);
        Ok(DpifaReport {
            body: self,
            signature,
        })
    }
}

impl DpifaReport {
    /// `header | timestamp | nonce | signature | extension`.
    pub fn to_wire(&self) -> Result<Vec<u8>, ReportError> {
        let mut out = Vec::with_capacity(REPORT_WIRE_LEN);
        out.extend_from_slice(&self.body.header()?);
        out.extend_from_slice(&self.body.timestamp.to_be_bytes());
        out.extend_from_slice(&self.body.nonce.to_be_bytes());
        out.extend_from_slice(&self.signature);
        out.extend_from_slice(&self.body.extension());
        Ok(out)
    }

    pub fn from_wire(bytes: &[u8]) -> Result<Self, ReportError> {
        if bytes.len() != REPORT_WIRE_LEN {
            return Err(ReportError::BadLength(bytes.len()));
        }
        let u32_at = |off: usize| u32::from_be_bytes(bytes[off..off + 4].try_into().unwrap());
        let u64_at = |off: usize| u64::from_be_bytes(bytes[off..off + 8].try_into().unwrap());
        let version = u16::from_be_bytes([bytes[12], bytes[13]]);
        if version != REPORT_VERSION {
            return Err(ReportError::BadVersion(version));
        }
        let ext_len = u32_at(40);
        if ext_len as usize != REPORT_EXTENSION_LEN {
            return Err(ReportError::BadExtension(ext_len));
        }
        let ext = REPORT_MESSAGE_LEN;
        let field = |i: usize| Counter {
            packets: u32_at(16 + 4 * i) as u64,
            bytes: u64_at(ext + 8 * i),
        };
        let counters = LinkCounters {
            input: field(0),
            output: field(1),
            started: field(2),
            terminated: field(3),
            origin_from_neighbor: field(4),
        };
        let body = ReportBody {
            rid: RouterId(u32_at(0)),
            nid: RouterId(u32_at(4)),
            seq: u32_at(8),
            cycle: u32_at(36),
            counters,
            timestamp: u32_at(44),
            nonce: u32_at(48),
        };
        let signature = bytes[52..REPORT_MESSAGE_LEN].try_into().unwrap();
        Ok(DpifaReport { body, signature })
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        match self.body.signing_bytes() {
            Ok(msg) => ecdsa_verify(key, &msg, &self.signature),
            Err(_) => false,
        }
    }
}
