//! On-disk container shared by datasets, simulation archives, hand presets
//! and model files.
//!
//! Layout:
//!
//! ```text
//! socketvib/<kind> v<version>\n
//! key=value\n            (UTF-8 manifest, any number of lines, '#' comments allowed)
//! payload_bytes=<n>\n
//! checksum=sha256:<hex>\n
//! ---\n
//! <n bytes of little-endian payload>
//! ```
//!
//! The checksum covers the payload only. A truncated or altered payload
//! surfaces as [`Error::Checksum`].

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const MAGIC_PREFIX: &str = "socketvib/";
const HEADER_END: &str = "---";

/// Ordered `key=value` map. Keys are unique; insertion order is preserved so
/// serialized output is stable.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        let value = value.to_string();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        debug_assert!(!value.contains('\n'), "manifest value for {key} has a newline");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_owned(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Format(format!("missing manifest key `{key}`")))
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Format(format!("bad value for `{key}`: {raw:?}")))
    }

    /// Parses `key` if present.
    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Error::Format(format!("bad value for `{key}`: {raw:?}"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Copies every entry of `other` under `prefix.`.
    pub fn merge_prefixed(&mut self, prefix: &str, other: &Manifest) {
        for (k, v) in other.iter() {
            self.set(&format!("{prefix}.{k}"), v);
        }
    }

    /// Entries under `prefix.` with the prefix stripped.
    pub fn sub(&self, prefix: &str) -> Manifest {
        let p = format!("{prefix}.");
        Manifest {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v)| k.strip_prefix(&p).map(|s| (s.to_owned(), v.clone())))
                .collect(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    /// Parses plain `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut m = Manifest::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("line {}: expected key=value, got {line:?}", lineno + 1))
            })?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn read_text_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn encode(kind: &str, version: u32, manifest: &Manifest, payload: &[u8]) -> Vec<u8> {
    let mut header = format!("{MAGIC_PREFIX}{kind} v{version}\n");
    header.push_str(&manifest.to_text());
    header.push_str(&format!("payload_bytes={}\n", payload.len()));
    header.push_str(&format!("checksum=sha256:{}\n", sha256_hex(payload)));
    header.push_str(HEADER_END);
    header.push('\n');
    let mut out = header.into_bytes();
    out.extend_from_slice(payload);
    out
}

/// Splits and verifies a container. Returns the manifest (without the
/// `payload_bytes` / `checksum` bookkeeping keys) and the payload.
pub fn decode(bytes: &[u8], kind: &str, version: u32) -> Result<(Manifest, Vec<u8>)> {
    let marker = format!("\n{HEADER_END}\n");
    let split = bytes
        .windows(marker.len())
        .position(|w| w == marker.as_bytes())
        .ok_or_else(|| Error::Format("header terminator not found".into()))?;
    let header = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let payload = &bytes[split + marker.len()..];

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or_default();
    let rest = magic
        .strip_prefix(MAGIC_PREFIX)
        .ok_or_else(|| Error::Format(format!("bad magic line {magic:?}")))?;
    let (found_kind, found_version) = rest
        .split_once(" v")
        .ok_or_else(|| Error::Format(format!("bad magic line {magic:?}")))?;
    if found_kind != kind {
        return Err(Error::Format(format!(
            "expected a `{kind}` file, found `{found_kind}`"
        )));
    }
    let found_version: u32 = found_version
        .parse()
        .map_err(|_| Error::Format(format!("bad version in {magic:?}")))?;
    if found_version != version {
        return Err(Error::Version {
            found: found_version,
            expected: version,
        });
    }

    let body: Vec<&str> = lines.collect();
    let mut manifest = Manifest::from_text(&body.join("\n"))?;
    let expected = manifest
        .require("checksum")?
        .strip_prefix("sha256:")
        .ok_or_else(|| Error::Format("checksum must be sha256".into()))?
        .to_owned();
    let actual = sha256_hex(payload);
    let declared_len: usize = manifest.parse("payload_bytes")?;
    if actual != expected || declared_len != payload.len() {
        return Err(Error::Checksum { expected, actual });
    }
    manifest.entries.retain(|(k, _)| k != "checksum" && k != "payload_bytes");
    Ok((manifest, payload.to_vec()))
}

pub fn write_file(
    path: &Path,
    kind: &str,
    version: u32,
    manifest: &Manifest,
    payload: &[u8],
) -> Result<()> {
    fs::write(path, encode(kind, version, manifest, payload)).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path, kind: &str, version: u32) -> Result<(Manifest, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, kind, version)
}

/// Little-endian 8-byte word writer.
#[derive(Debug, Default)]
pub struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, vs: &[f64]) {
        self.buf.reserve(vs.len() * 8);
        for &v in vs {
            self.f64(v);
        }
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }
}

pub struct PayloadReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PayloadReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn word(&mut self) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        let w = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("payload ended early".into()))?;
        self.pos = end;
        Ok(w.try_into().expect("slice of length 8"))
    }

    pub fn f64(&mut self) -> Result<f64> {
        self.word().map(f64::from_le_bytes)
    }

    pub fn u64(&mut self) -> Result<u64> {
        self.word().map(u64::from_le_bytes)
    }

    /// Reads a word that must hold a small non-negative integer.
    pub fn index(&mut self) -> Result<usize> {
        let v = self.f64()?;
        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
            return Err(Error::Format(format!("expected an index, found {v}")));
        }
        Ok(v as usize)
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing payload bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_text_round_trip() {
        let mut m = Manifest::new();
        m.set("a", 1).set("b", "two").set("a", 3.5);
        let back = Manifest::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.parse::<f64>("a").unwrap(), 3.5);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let m = Manifest::from_text("# hi\n\nx = 4\n").unwrap();
        assert_eq!(m.get("x"), Some("4"));
        assert!(Manifest::from_text("nope").is_err());
    }

    #[test]
    fn container_detects_corruption() {
        let mut m = Manifest::new();
        m.set("k", "v");
        let bytes = encode("thing", 1, &m, &[1, 2, 3, 4, 5, 6, 7, 8]);
        let (back, payload) = decode(&bytes, "thing", 1).unwrap();
        assert_eq!(back, m);
        assert_eq!(payload.len(), 8);

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(decode(truncated, "thing", 1), Err(Error::Checksum { .. })));
        assert!(matches!(decode(&bytes, "thing", 2), Err(Error::Version { .. })));
        assert!(matches!(decode(&bytes, "other", 1), Err(Error::Format(_))));
    }
}
