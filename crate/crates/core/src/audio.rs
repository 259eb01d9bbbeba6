//! Audio ingestion and signal preparation: WAV loading, windowed-sinc
//! resampling, and z-score normalization.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV: {0}")]
    Format(String),
    #[error("unsupported WAV encoding: {0}")]
    Unsupported(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("target sample rate must be positive")]
    BadTargetRate,
    #[error("buffer too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
}

/// Mono audio samples with their sample rate. Amplitudes are dimensionless,
/// nominally in [-1, 1] after ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

/// Loads a PCM WAV file (16-bit integer or 32-bit float, 1-2 channels).
///
/// Integer samples are scaled by 1/32768; stereo is downmixed by channel
/// mean.
pub fn load_wav(path: &Path) -> Result<AudioBuffer, AudioError> {
    let reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(source) => AudioError::Io {
            path: path.display().to_string(),
            source,
        },
        other => AudioError::Format(other.to_string()),
    })?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(AudioError::Unsupported(format!(
            "{} channels",
            spec.channels
        )));
    }
    let mono = |interleaved: Vec<f64>| -> Vec<f64> {
        if spec.channels == 1 {
            interleaved
        } else {
            interleaved
                .chunks_exact(2)
                .map(|fr| (fr[0] + fr[1]) / 2.0)
                .collect()
        }
    };
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => {
            let raw: Result<Vec<i16>, _> = reader.into_samples().collect();
            mono(raw
                .map_err(|e| AudioError::Format(e.to_string()))?
                .into_iter()
                .map(|v| f64::from(v) / 32768.0)
                .collect())
        }
        (hound::SampleFormat::Float, 32) => {
            let raw: Result<Vec<f32>, _> = reader.into_samples().collect();
            mono(raw
                .map_err(|e| AudioError::Format(e.to_string()))?
                .into_iter()
                .map(f64::from)
                .collect())
        }
        (fmt, bits) => {
            return Err(AudioError::Unsupported(format!("{bits}-bit {fmt:?}")));
        }
    };
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: spec.sample_rate,
    })
}

// Kernel geometry: 16 taps per phase, so 8 on each side of the output point.
const HALF_TAPS: i64 = 8;
const KAISER_BETA: f64 = 8.0;
const MAX_PHASE_TABLE: u64 = 4096;

fn bessel_i0(x: f64) -> f64 {
    // Power series; converges quickly for the argument range we use.
    let mut sum = 1.0;
    let mut term = 1.0;
    let half_x2 = (x / 2.0) * (x / 2.0);
    for k in 1..=40 {
        term *= half_x2 / ((k * k) as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        (std::f64::consts::PI * x).sin() / (std::f64::consts::PI * x)
    }
}

/// The 16 normalized taps for fractional offset `frac` in [0, 1) at relative
/// cutoff `fc` (1 for upsampling, out/in ratio for downsampling).
fn kernel_taps(frac: f64, fc: f64) -> [f64; 16] {
    let i0_beta = bessel_i0(KAISER_BETA);
    let mut taps = [0.0; 16];
    let mut sum = 0.0;
    for (i, tap) in taps.iter_mut().enumerate() {
        let j = i as i64 - (HALF_TAPS - 1); // offsets -7..=8
        let x = j as f64 - frac;
        let r = x / HALF_TAPS as f64;
        let w = if r.abs() >= 1.0 {
            0.0
        } else {
            bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
        };
        *tap = fc * sinc(fc * x) * w;
        sum += *tap;
    }
    // Unity DC gain per phase.
    for tap in &mut taps {
        *tap /= sum;
    }
    taps
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Resamples to `target_hz` with a Kaiser-windowed polyphase sinc filter
/// (16 taps per phase). Output length is `round(len * target / input)`; an
/// input already at the target rate passes through bit-identically. Edges
/// use even reflection.
pub fn resample(buf: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer, AudioError> {
    if target_hz == 0 {
        return Err(AudioError::BadTargetRate);
    }
    if buf.sample_rate_hz == target_hz {
        return Ok(buf.clone());
    }
    let in_len = buf.samples.len();
    let ratio = f64::from(target_hz) / f64::from(buf.sample_rate_hz);
    let out_len = (in_len as f64 * ratio).round() as usize;
    let fc = ratio.min(1.0);

    let g = gcd(u64::from(target_hz), u64::from(buf.sample_rate_hz));
    let phases = u64::from(target_hz) / g; // interpolation factor L
    let step = u64::from(buf.sample_rate_hz) / g; // decimation factor M

    let table: Option<Vec<[f64; 16]>> = (phases <= MAX_PHASE_TABLE).then(|| {
        (0..phases)
            .map(|p| kernel_taps(p as f64 / phases as f64, fc))
            .collect()
    });

    let sample_at = |idx: i64| -> f64 {
        if in_len == 0 {
            return 0.0;
        }
        let last = (in_len - 1) as i64;
        let mut i = idx;
        if i < 0 {
            i = -i;
        }
        if i > last {
            i = 2 * last - i;
        }
        buf.samples[i.clamp(0, last) as usize]
    };

    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len as u64 {
        let num = n * step; // input position = num / phases
        let i0 = (num / phases) as i64;
        let phase = num % phases;
        let taps_owned;
        let taps = match &table {
            Some(t) => &t[phase as usize],
            None => {
                taps_owned = kernel_taps(phase as f64 / phases as f64, fc);
                &taps_owned
            }
        };
        let mut acc = 0.0;
        for (i, tap) in taps.iter().enumerate() {
            let j = i as i64 - (HALF_TAPS - 1);
            acc += tap * sample_at(i0 + j);
        }
        out.push(acc);
    }
    Ok(AudioBuffer {
        samples: out,
        sample_rate_hz: target_hz,
    })
}

/// Shifts and scales to zero mean and unit population standard deviation.
/// A constant signal maps to all zeros. Needs at least two samples.
pub fn zscore_normalize(buf: &AudioBuffer) -> Result<AudioBuffer, AudioError> {
    let n = buf.samples.len();
    if n < 2 {
        return Err(AudioError::TooShort { need: 2, got: n });
    }
    let mean = buf.samples.iter().sum::<f64>() / n as f64;
    let var = buf
        .samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / n as f64;
    let std = var.sqrt();
    let samples = if std == 0.0 {
        vec![0.0; n]
    } else {
        buf.samples.iter().map(|&x| (x - mean) / std).collect()
    };
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: buf.sample_rate_hz,
    })
}
