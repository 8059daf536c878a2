//! Minimal RIFF/WAVE reader for 8- and 16-bit linear PCM mono files.

use std::path::Path;

use super::{AudioClip, AudioError};

const FORMAT_PCM: u16 = 0x0001;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

struct FmtChunk {
    channels: u16,
    sample_rate: u32,
    bits_per_sample: u16,
}

/// Reads a WAV file from disk. The channel id is the file stem.
pub fn load_audio(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path)?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_wav(&bytes, id)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses an in-memory WAV image.
pub fn parse_wav(bytes: &[u8], channel_id: impl Into<String>) -> Result<AudioClip, AudioError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(AudioError::MalformedWav("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<FmtChunk> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| AudioError::MalformedWav(format!("chunk '{}' overruns file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => fmt = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| AudioError::MalformedWav("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| AudioError::MalformedWav("no data chunk".into()))?;

    if fmt.channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{} channels, only mono is supported",
            fmt.channels
        )));
    }
    let samples: Vec<f64> = match fmt.bits_per_sample {
        8 => data.iter().map(|&b| (b as f64 - 128.0) / 128.0).collect(),
        16 => {
            if data.len() % 2 != 0 {
                return Err(AudioError::MalformedWav("data chunk is not a whole number of samples".into()));
            }
            data.chunks_exact(2)
                .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                .collect()
        }
        bits => {
            return Err(AudioError::UnsupportedFormat(format!(
                "{bits}-bit samples, only 8 and 16 are supported"
            )))
        }
    };
    AudioClip::new(samples, fmt.sample_rate, channel_id)
}

fn parse_fmt(body: &[u8]) -> Result<FmtChunk, AudioError> {
    if body.len() < 16 {
        return Err(AudioError::MalformedWav("fmt chunk shorter than 16 bytes".into()));
    }
    let mut tag = u16_at(body, 0);
    if tag == FORMAT_EXTENSIBLE {
        // sub-format GUID starts at offset 24; its first two bytes hold the format tag
        if body.len() < 40 {
            return Err(AudioError::MalformedWav("truncated WAVE_FORMAT_EXTENSIBLE".into()));
        }
        tag = u16_at(body, 24);
    }
    if tag != FORMAT_PCM {
        return Err(AudioError::UnsupportedFormat(format!(
            "format tag {tag:#06x} is not linear PCM"
        )));
    }
    let sample_rate = u32_at(body, 4);
    if sample_rate == 0 {
        return Err(AudioError::MalformedWav("sample rate is zero".into()));
    }
    Ok(FmtChunk {
        channels: u16_at(body, 2),
        sample_rate,
        bits_per_sample: u16_at(body, 14),
    })
}

/// Encodes samples as a canonical 44-byte-header 16-bit PCM mono WAV.
///
/// Samples are clamped to [-1, 1] and rounded to the nearest code.
pub fn write_wav_pcm16(samples: &[f64], sample_rate_hz: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let code = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&code.to_le_bytes());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(channels: u16, rate: u32, bits: u16, tag: u16, data_len: u32) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut h = Vec::new();
        h.extend_from_slice(b"RIFF");
        h.extend_from_slice(&(36 + data_len).to_le_bytes());
        h.extend_from_slice(b"WAVEfmt ");
        h.extend_from_slice(&16u32.to_le_bytes());
        h.extend_from_slice(&tag.to_le_bytes());
        h.extend_from_slice(&channels.to_le_bytes());
        h.extend_from_slice(&rate.to_le_bytes());
        h.extend_from_slice(&(rate * block as u32).to_le_bytes());
        h.extend_from_slice(&block.to_le_bytes());
        h.extend_from_slice(&bits.to_le_bytes());
        h.extend_from_slice(b"data");
        h.extend_from_slice(&data_len.to_le_bytes());
        h
    }

    #[test]
    fn hundred_zero_samples() {
        let mut bytes = header(1, 8000, 16, 1, 200);
        assert_eq!(bytes.len(), 44);
        bytes.extend(std::iter::repeat_n(0u8, 200));
        let clip = parse_wav(&bytes, "a").unwrap();
        assert_eq!(clip.len(), 100);
        assert_eq!(clip.sample_rate_hz(), 8000);
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn pcm16_normalisation() {
        let mut bytes = header(1, 8000, 16, 1, 6);
        for v in [16384i16, -32768, 32767] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let clip = parse_wav(&bytes, "a").unwrap();
        assert_eq!(clip.samples()[0], 0.5);
        assert_eq!(clip.samples()[1], -1.0);
        assert_eq!(clip.samples()[2], 32767.0 / 32768.0);
    }

    #[test]
    fn pcm8_is_unsigned() {
        let mut bytes = header(1, 8000, 8, 1, 3);
        bytes.extend_from_slice(&[128, 0, 192]);
        let clip = parse_wav(&bytes, "a").unwrap();
        assert_eq!(clip.samples(), &[0.0, -1.0, 0.5]);
    }

    #[test]
    fn skips_unknown_chunks_with_padding() {
        let mut bytes = header(1, 8000, 16, 1, 4);
        let data = bytes.split_off(36);
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&[1, 2, 3, 0]);
        bytes.extend_from_slice(&data);
        bytes.extend_from_slice(&[0, 0x40, 0, 0xC0]);
        let clip = parse_wav(&bytes, "a").unwrap();
        assert_eq!(clip.samples(), &[0.5, -0.5]);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            parse_wav(b"RIFX\0\0\0\0WAVE", "a"),
            Err(AudioError::MalformedWav(_))
        ));
        let stereo = header(2, 8000, 16, 1, 0);
        assert!(matches!(parse_wav(&stereo, "a"), Err(AudioError::UnsupportedFormat(_))));
        let b24 = header(1, 8000, 24, 1, 0);
        assert!(matches!(parse_wav(&b24, "a"), Err(AudioError::UnsupportedFormat(_))));
        let alaw = header(1, 8000, 8, 6, 0);
        assert!(matches!(parse_wav(&alaw, "a"), Err(AudioError::UnsupportedFormat(_))));
        let mut truncated = header(1, 8000, 16, 1, 100);
        truncated.extend_from_slice(&[0; 10]);
        assert!(matches!(parse_wav(&truncated, "a"), Err(AudioError::MalformedWav(_))));
    }

    #[test]
    fn writer_round_trips_through_parser() {
        let samples = [0.0, 0.5, -0.5, -1.0, 0.25];
        let clip = parse_wav(&write_wav_pcm16(&samples, 16000), "x").unwrap();
        assert_eq!(clip.samples(), &samples);
        assert_eq!(clip.sample_rate_hz(), 16000);
    }
}
