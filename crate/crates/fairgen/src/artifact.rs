//! Artifact plumbing shared by every output the tool writes.
//!
//! All files land via an atomic temp-file-and-rename so a crash never
//! leaves a half-written artifact, and every JSON artifact embeds a
//! [`RunMeta`] — tool version, seed, and a hash of the resolved
//! configuration — so a result can always be traced back to the run that
//! made it. Serialization uses struct field order and shortest
//! round-trip decimals, which makes identical runs byte-identical.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Provenance block embedded in JSON artifacts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
}

impl RunMeta {
    /// `config` should be the fully resolved configuration of the run;
    /// its canonical JSON form is hashed so that any change to an
    /// effective setting changes the hash.
    pub fn new(seed: u64, config: &impl Serialize) -> Result<RunMeta> {
        Ok(RunMeta {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_hash: config_hash(config)?,
        })
    }
}

/// First 16 hex characters of the SHA-256 of the value's JSON form.
pub fn config_hash(config: &impl Serialize) -> Result<String> {
    let json = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&json);
    Ok(hex_prefix(&digest, 16))
}

/// Full SHA-256 of a byte buffer, hex-encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex_prefix(&Sha256::digest(bytes), 64)
}

fn hex_prefix(digest: &[u8], chars: usize) -> String {
    let mut out = String::with_capacity(chars);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
        if out.len() >= chars {
            break;
        }
    }
    out.truncate(chars);
    out
}

/// Writes `bytes` to `path` atomically: a temp file in the same
/// directory is fully written, flushed, then renamed over the target.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => {
            std::fs::create_dir_all(d)?;
            tempfile::NamedTempFile::new_in(d)?
        }
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializes a JSON artifact with a trailing newline and writes it
/// atomically.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Renders a static bar chart: one bar per (label, value) pair, values
/// in `[0, 1]`. Pure text output, deterministic for equal inputs.
pub fn svg_bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 280.0;
    const MARGIN_L: f64 = 42.0;
    const MARGIN_B: f64 = 38.0;
    const MARGIN_T: f64 = 30.0;
    let plot_w = W - MARGIN_L - 12.0;
    let plot_h = H - MARGIN_T - MARGIN_B;
    let n = bars.len().max(1) as f64;
    let slot = plot_w / n;
    let bar_w = slot * 0.8;
    let max = bars.iter().map(|b| b.1).fold(0.0_f64, f64::max).max(1e-9);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"10\">\n"
    ));
    s.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"18\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_L + plot_w / 2.0,
        xml_escape(title)
    ));
    s.push_str(&format!(
        "  <line x1=\"{MARGIN_L}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    s.push_str(&format!(
        "  <line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.1}\" stroke=\"black\"/>\n",
        MARGIN_T + plot_h
    ));
    for (i, (label, value)) in bars.iter().enumerate() {
        let h = (value / max) * plot_h;
        let x = MARGIN_L + i as f64 * slot + (slot - bar_w) / 2.0;
        let y = MARGIN_T + plot_h - h;
        s.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"#4878a8\"/>\n"
        ));
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"8\">{}</text>\n",
            x + bar_w / 2.0,
            MARGIN_T + plot_h + 12.0,
            xml_escape(label)
        ));
        s.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"8\">{value:.3}</text>\n",
            x + bar_w / 2.0,
            (y - 3.0).max(MARGIN_T)
        ));
    }
    s.push_str("</svg>\n");
    s
}

fn xml_escape(raw: &str) -> String {
    raw.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
