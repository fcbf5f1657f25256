//! WAV ingestion: parses 16 kHz 16-bit mono PCM, computes a log-power
//! spectrogram with 100 Hz frequency bins up to the 8 kHz Nyquist and a
//! time axis linearly resampled to exactly 100 frames.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use rustfft::{num_complex::Complex, FftPlanner};

pub const SAMPLE_RATE: u32 = 16_000;
pub const WINDOW: usize = 512;
/// 75% overlap.
pub const HOP: usize = WINDOW / 4;
/// Frequency bins every 100 Hz from 0 to 8000 Hz inclusive.
pub const FREQ_BINS: usize = 81;
pub const TIME_FRAMES: usize = 100;
/// Power floor applied before the log, so silence maps to log10(1e-12).
pub const POWER_FLOOR: f64 = 1e-12;

/// Reads a RIFF/WAVE file, requiring mono 16-bit linear PCM at 16 kHz.
/// Returns samples scaled to [-1, 1).
pub fn read_wav(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        bail!("{}: not a RIFF/WAVE file", path.display());
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // format, channels, rate, bits
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = (pos + 8 + size).min(bytes.len());
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    bail!("{}: truncated fmt chunk", path.display());
                }
                fmt = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos += 8 + size + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.context("missing fmt chunk")?;
    if format != 1 {
        bail!("unsupported encoding {format}: need linear PCM");
    }
    if channels != 1 {
        bail!("unsupported channel count {channels}: need mono");
    }
    if rate != SAMPLE_RATE {
        bail!("unsupported sample rate {rate} Hz: need {SAMPLE_RATE} Hz");
    }
    if bits != 16 {
        bail!("unsupported bit depth {bits}: need 16-bit");
    }
    let data = data.context("missing data chunk")?;
    Ok(data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect())
}

/// Hann-windowed STFT power, averaged into 100 Hz frequency bins, floored
/// and log10-compressed, then linearly resampled to 100 time frames.
pub fn spectrogram(samples: &[f64]) -> Result<DMatrix<f64>> {
    if samples.len() < WINDOW {
        bail!(
            "clip too short: {} samples, need at least one {WINDOW}-sample window",
            samples.len()
        );
    }
    let frames = 1 + (samples.len() - WINDOW) / HOP;
    let window: Vec<f64> = (0..WINDOW)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / WINDOW as f64).cos()))
        .collect();

    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(WINDOW);
    let hz_per_fft_bin = SAMPLE_RATE as f64 / WINDOW as f64;

    // Raw frames, FREQ_BINS rows each.
    let mut raw = DMatrix::<f64>::zeros(FREQ_BINS, frames);
    let mut buf = vec![Complex::new(0.0, 0.0); WINDOW];
    for frame in 0..frames {
        let start = frame * HOP;
        for i in 0..WINDOW {
            buf[i] = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buf);
        // Average FFT-bin powers into the nearest 100 Hz bin.
        let mut power = vec![0.0f64; FREQ_BINS];
        let mut count = vec![0usize; FREQ_BINS];
        for (k, v) in buf.iter().enumerate().take(WINDOW / 2 + 1) {
            let bin = ((k as f64 * hz_per_fft_bin) / 100.0).round() as usize;
            let bin = bin.min(FREQ_BINS - 1);
            power[bin] += v.norm_sqr();
            count[bin] += 1;
        }
        for b in 0..FREQ_BINS {
            let p = if count[b] > 0 {
                power[b] / count[b] as f64
            } else {
                0.0
            };
            raw[(b, frame)] = p.max(POWER_FLOOR).log10();
        }
    }

    // Linear interpolation of the frame axis onto TIME_FRAMES points.
    let mut out = DMatrix::<f64>::zeros(FREQ_BINS, TIME_FRAMES);
    for t in 0..TIME_FRAMES {
        let pos = if TIME_FRAMES > 1 {
            t as f64 * (frames - 1) as f64 / (TIME_FRAMES - 1) as f64
        } else {
            0.0
        };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(frames - 1);
        let frac = pos - lo as f64;
        for b in 0..FREQ_BINS {
            out[(b, t)] = raw[(b, lo)] * (1.0 - frac) + raw[(b, hi)] * frac;
        }
    }
    Ok(out)
}

/// Serializes samples as a minimal mono 16-bit PCM WAV (used by tests).
pub fn encode_wav(samples: &[i16]) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}
