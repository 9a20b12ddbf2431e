//! 16-bit mono PCM readers for RIFF WAV and NIST SPHERE files.

use std::path::Path;

use crate::error::{Error, Result};

const SPHERE_MAGIC: &[u8] = b"NIST_1A";

/// Samples scaled to `[-1, 1)`. Rejects anything that is not 16-bit mono PCM
/// at `expected_rate`.
pub fn read_audio(path: impl AsRef<Path>, expected_rate: u32) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(SPHERE_MAGIC) {
        read_sphere(&bytes, path, expected_rate)
    } else if bytes.starts_with(b"RIFF") {
        read_riff(&bytes, path, expected_rate)
    } else {
        Err(format_error(
            path,
            "neither a RIFF nor a NIST SPHERE header",
        ))
    }
}

fn format_error(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_riff(bytes: &[u8], path: &Path, expected_rate: u32) -> Result<Vec<f64>> {
    let reader = hound::WavReader::new(std::io::Cursor::new(bytes))
        .map_err(|e| format_error(path, e.to_string()))?;
    let wav = reader.spec();
    if wav.sample_format != hound::SampleFormat::Int || wav.bits_per_sample != 16 {
        return Err(format_error(path, "only 16-bit integer PCM is supported"));
    }
    if wav.channels != 1 {
        return Err(format_error(
            path,
            format!("{} channels, expected mono", wav.channels),
        ));
    }
    if wav.sample_rate != expected_rate {
        return Err(format_error(
            path,
            format!(
                "sample rate {} Hz, expected {expected_rate} Hz",
                wav.sample_rate
            ),
        ));
    }
    reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f64 / 32768.0))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format_error(path, e.to_string()))
}

/// Parsed fields of a SPHERE header.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SphereHeader {
    pub header_bytes: usize,
    pub sample_rate: Option<u32>,
    pub channel_count: Option<u32>,
    pub sample_n_bytes: Option<u32>,
    pub sample_count: Option<usize>,
    pub byte_format: Option<String>,
    pub coding: Option<String>,
}

/// Header layout: magic line, header size line, then `name -type value`
/// lines up to `end_head`.
pub fn parse_sphere_header(bytes: &[u8], path: &Path) -> Result<SphereHeader> {
    let head_end = bytes.len().min(1 << 16);
    let text = String::from_utf8_lossy(&bytes[..head_end]);
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("NIST_1A") {
        return Err(format_error(path, "missing NIST_1A magic line"));
    }
    let header_bytes: usize = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| format_error(path, "unreadable SPHERE header length"))?;
    let mut h = SphereHeader {
        header_bytes,
        ..SphereHeader::default()
    };
    for line in lines {
        let line = line.trim();
        if line == "end_head" {
            return Ok(h);
        }
        let mut parts = line.splitn(3, char::is_whitespace);
        let (Some(name), Some(_kind), Some(value)) = (parts.next(), parts.next(), parts.next())
        else {
            continue;
        };
        let value = value.trim();
        match name {
            "sample_rate" => h.sample_rate = value.parse().ok(),
            "channel_count" => h.channel_count = value.parse().ok(),
            "sample_n_bytes" => h.sample_n_bytes = value.parse().ok(),
            "sample_count" => h.sample_count = value.parse().ok(),
            "sample_byte_format" => h.byte_format = Some(value.to_string()),
            "sample_coding" => h.coding = Some(value.to_string()),
            _ => {}
        }
    }
    Err(format_error(path, "SPHERE header lacks end_head"))
}

fn read_sphere(bytes: &[u8], path: &Path, expected_rate: u32) -> Result<Vec<f64>> {
    let h = parse_sphere_header(bytes, path)?;
    if let Some(coding) = &h.coding {
        if coding.contains("shorten") || !coding.starts_with("pcm") {
            return Err(format_error(
                path,
                format!("unsupported sample coding {coding:?}"),
            ));
        }
    }
    if h.sample_n_bytes.unwrap_or(2) != 2 {
        return Err(format_error(path, "only 2-byte samples are supported"));
    }
    if h.channel_count.unwrap_or(1) != 1 {
        return Err(format_error(path, "only mono audio is supported"));
    }
    let rate = h
        .sample_rate
        .ok_or_else(|| format_error(path, "SPHERE header lacks sample_rate"))?;
    if rate != expected_rate {
        return Err(format_error(
            path,
            format!("sample rate {rate} Hz, expected {expected_rate} Hz"),
        ));
    }
    let big_endian = match h.byte_format.as_deref() {
        None | Some("01") => false,
        Some("10") => true,
        Some(other) => {
            return Err(format_error(
                path,
                format!("unsupported byte format {other:?}"),
            ));
        }
    };
    if h.header_bytes > bytes.len() {
        return Err(format_error(path, "file shorter than its declared header"));
    }
    let body = &bytes[h.header_bytes..];
    let n = h.sample_count.unwrap_or(body.len() / 2);
    if body.len() < 2 * n {
        return Err(format_error(
            path,
            format!("declares {n} samples but holds {} bytes", body.len()),
        ));
    }
    Ok(body[..2 * n]
        .chunks_exact(2)
        .map(|b| {
            let v = if big_endian {
                i16::from_be_bytes([b[0], b[1]])
            } else {
                i16::from_le_bytes([b[0], b[1]])
            };
            v as f64 / 32768.0
        })
        .collect())
}

/// Writes a minimal SPHERE file; used to fabricate corpora in tests.
pub fn write_sphere(
    path: impl AsRef<Path>,
    samples: &[i16],
    rate: u32,
    big_endian: bool,
) -> Result<()> {
    let path = path.as_ref();
    let mut header = format!(
        "NIST_1A\n   1024\nsample_count -i {}\nsample_rate -i {rate}\nchannel_count -i 1\n\
         sample_n_bytes -i 2\nsample_byte_format -s2 {}\nsample_coding -s3 pcm\nend_head\n",
        samples.len(),
        if big_endian { "10" } else { "01" }
    )
    .into_bytes();
    header.resize(1024, b' ');
    for s in samples {
        let b = if big_endian {
            s.to_be_bytes()
        } else {
            s.to_le_bytes()
        };
        header.extend_from_slice(&b);
    }
    std::fs::write(path, header).map_err(|e| Error::io(path, e))
}
