//! Binary container shared by dataset and model files.
//!
//! ```text
//! offset 0   8 bytes   magic  \x89 O P L A B \r \n
//! offset 8   8 bytes   header length H, u64 little-endian
//! offset 16  H bytes   header, UTF-8 JSON object
//! offset 16+H          payload, little-endian f64 values
//! ```
//!
//! The header always carries `format_version`, `kind`, `payload_bytes` and
//! `payload_sha256` (hex SHA-256 of the payload bytes), plus kind-specific
//! metadata. Readers reject other versions before looking at anything else.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const MAGIC: [u8; 8] = *b"\x89OPLAB\r\n";
pub const FORMAT_VERSION: u64 = 1;
/// Headers beyond this size are treated as corruption rather than allocated.
const MAX_HEADER_BYTES: u64 = 1 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContainerError {
    #[error("not an oplab file (bad magic bytes)")]
    BadMagic,
    #[error("file truncated in the {section}: expected {expected} bytes, found {found}")]
    Truncated {
        section: &'static str,
        expected: u64,
        found: u64,
    },
    #[error("format version {found} is not supported (this build reads version {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },
    #[error("payload checksum mismatch: header records {expected}, payload hashes to {found}")]
    ChecksumMismatch { expected: String, found: String },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("expected a {expected} file, found {found}")]
    WrongKind { expected: &'static str, found: String },
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(u64),
}

impl ContainerError {
    pub fn code(&self) -> &'static str {
        match self {
            ContainerError::BadMagic => "magic",
            ContainerError::Truncated { .. } => "truncated",
            ContainerError::UnsupportedVersion { .. } => "version",
            ContainerError::ChecksumMismatch { .. } => "checksum",
            ContainerError::MalformedHeader(_) | ContainerError::TrailingBytes(_) => "header",
            ContainerError::WrongKind { .. } => "kind",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u64,
    kind: String,
    payload_bytes: u64,
    payload_sha256: String,
    meta: Value,
}

/// Serializes `meta` and `payload` into container bytes.
pub fn encode(kind: &str, meta: &impl Serialize, payload: &[f64]) -> Result<Vec<u8>, ContainerError> {
    let mut body = Vec::with_capacity(payload.len() * 8);
    for v in payload {
        body.extend_from_slice(&v.to_le_bytes());
    }
    let envelope = Envelope {
        format_version: FORMAT_VERSION,
        kind: kind.to_string(),
        payload_bytes: body.len() as u64,
        payload_sha256: hex::encode(Sha256::digest(&body)),
        meta: serde_json::to_value(meta).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?,
    };
    let header = serde_json::to_vec(&envelope).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    let mut out = Vec::with_capacity(16 + header.len() + body.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decoded container: kind-specific metadata and the payload values.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub meta: Value,
    pub payload: Vec<f64>,
}

pub fn decode(bytes: &[u8], expected_kind: &'static str) -> Result<Decoded, ContainerError> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let rest = &bytes[MAGIC.len()..];
    if rest.len() < 8 {
        return Err(ContainerError::Truncated {
            section: "header length",
            expected: 8,
            found: rest.len() as u64,
        });
    }
    let header_len = u64::from_le_bytes(rest[..8].try_into().expect("eight bytes"));
    if header_len > MAX_HEADER_BYTES {
        return Err(ContainerError::MalformedHeader(format!(
            "implausible header length {header_len}"
        )));
    }
    let rest = &rest[8..];
    if (rest.len() as u64) < header_len {
        return Err(ContainerError::Truncated {
            section: "header",
            expected: header_len,
            found: rest.len() as u64,
        });
    }
    let (header, body) = rest.split_at(header_len as usize);
    let raw: Map<String, Value> =
        serde_json::from_slice(header).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| ContainerError::MalformedHeader("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(ContainerError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let envelope: Envelope =
        serde_json::from_value(Value::Object(raw)).map_err(|e| ContainerError::MalformedHeader(e.to_string()))?;
    if envelope.kind != expected_kind {
        return Err(ContainerError::WrongKind {
            expected: expected_kind,
            found: envelope.kind,
        });
    }
    let found = body.len() as u64;
    if found < envelope.payload_bytes {
        return Err(ContainerError::Truncated {
            section: "payload",
            expected: envelope.payload_bytes,
            found,
        });
    }
    if found > envelope.payload_bytes {
        return Err(ContainerError::TrailingBytes(found - envelope.payload_bytes));
    }
    if !envelope.payload_bytes.is_multiple_of(8) {
        return Err(ContainerError::MalformedHeader(format!(
            "payload of {} bytes is not a whole number of f64 values",
            envelope.payload_bytes
        )));
    }
    let digest = hex::encode(Sha256::digest(body));
    if digest != envelope.payload_sha256 {
        return Err(ContainerError::ChecksumMismatch {
            expected: envelope.payload_sha256,
            found: digest,
        });
    }
    let payload = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")))
        .collect();
    Ok(Decoded {
        meta: envelope.meta,
        payload,
    })
}

/// Sequential reader over a decoded payload.
pub(crate) struct PayloadReader<'a> {
    values: &'a [f64],
    at: usize,
}

impl<'a> PayloadReader<'a> {
    pub(crate) fn new(values: &'a [f64]) -> Self {
        Self { values, at: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [f64], ContainerError> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.values.len())
            .ok_or_else(|| {
                ContainerError::MalformedHeader(format!(
                    "header describes more values than the payload holds ({} available after offset {})",
                    self.values.len(),
                    self.at
                ))
            })?;
        let out = &self.values[self.at..end];
        self.at = end;
        Ok(out)
    }

    pub(crate) fn finish(self) -> Result<(), ContainerError> {
        if self.at != self.values.len() {
            return Err(ContainerError::MalformedHeader(format!(
                "header accounts for {} of {} payload values",
                self.at,
                self.values.len()
            )));
        }
        Ok(())
    }
}
