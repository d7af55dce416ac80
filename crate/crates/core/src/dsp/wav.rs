//! Minimal RIFF/WAVE reader and writer for 16-bit PCM.

use crate::error::{Error, Result};

use super::AudioClip;

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk> {
    if body.len() < 16 {
        return Err(Error::decode(
            "fmt ",
            format!("chunk too short ({} bytes)", body.len()),
        ));
    }
    let mut format = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let sample_rate = read_u32(body, 4);
    let block_align = read_u16(body, 12);
    let bits = read_u16(body, 14);

    if format == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) subformat GUID(16); the GUID
        // starts with the plain format tag.
        if body.len() < 40 {
            return Err(Error::decode(
                "fmt ",
                "truncated WAVE_FORMAT_EXTENSIBLE header",
            ));
        }
        format = read_u16(body, 24);
    }
    if format != FORMAT_PCM {
        return Err(Error::decode(
            "fmt ",
            format!("unsupported codec tag {format:#06x}, only PCM is accepted"),
        ));
    }
    if bits != 16 {
        return Err(Error::decode(
            "fmt ",
            format!("unsupported bit depth {bits}, expected 16"),
        ));
    }
    if channels == 0 || channels > 2 {
        return Err(Error::decode(
            "fmt ",
            format!("unsupported channel count {channels}"),
        ));
    }
    if sample_rate == 0 {
        return Err(Error::decode("fmt ", "sample rate is zero"));
    }
    if block_align != channels * 2 {
        return Err(Error::decode(
            "fmt ",
            format!("block align {block_align} inconsistent with {channels} x 16-bit"),
        ));
    }
    Ok(FmtChunk {
        channels,
        sample_rate,
        block_align,
    })
}

/// Decode a 16-bit PCM WAV file. Stereo input is averaged to mono and samples
/// are scaled by 1/32768.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 {
        return Err(Error::decode("RIFF", "file shorter than the RIFF header"));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(Error::decode("RIFF", "missing RIFF magic"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(Error::decode("RIFF", "RIFF form type is not WAVE"));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let name = String::from_utf8_lossy(id).into_owned();
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .ok_or_else(|| Error::decode(&name, "chunk size overflows"))?;

        match id {
            b"fmt " => {
                if body_end > bytes.len() {
                    return Err(Error::decode(&name, "chunk extends past end of file"));
                }
                fmt = Some(parse_fmt(&bytes[body_start..body_end])?);
            }
            b"data" => {
                let fmt =
                    fmt.ok_or_else(|| Error::decode("data", "data chunk precedes fmt chunk"))?;
                if body_end > bytes.len() {
                    return Err(Error::decode(
                        "data",
                        format!(
                            "truncated: header declares {size} bytes, {} present",
                            bytes.len() - body_start
                        ),
                    ));
                }
                if !size.is_multiple_of(fmt.block_align as usize) {
                    return Err(Error::decode(
                        "data",
                        format!(
                            "size {size} is not a multiple of block align {}",
                            fmt.block_align
                        ),
                    ));
                }
                let body = &bytes[body_start..body_end];
                let channels = fmt.channels as usize;
                let samples: Vec<f64> = body
                    .chunks_exact(fmt.block_align as usize)
                    .map(|frame| {
                        let sum: f64 = frame
                            .chunks_exact(2)
                            .map(|s| i16::from_le_bytes([s[0], s[1]]) as f64 / 32768.0)
                            .sum();
                        sum / channels as f64
                    })
                    .collect();
                return AudioClip::new(samples, fmt.sample_rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    if fmt.is_none() {
        Err(Error::decode("fmt ", "no fmt chunk found"))
    } else {
        Err(Error::decode("data", "no data chunk found"))
    }
}

/// Encode a mono clip as 16-bit PCM WAV. Samples are scaled by 32768,
/// rounded, and saturated to the i16 range.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s * 32768.0)
            .round()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}
