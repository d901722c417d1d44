use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::sidecar::{sidecar_path, SidecarMetadata};
use crate::error::{Error, Result};

/// Planar real samples; integer PCM is scaled by `2^-(bits - 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultichannelBuffer {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

impl MultichannelBuffer {
    pub fn new(channels: Vec<Vec<f64>>, sample_rate: f64) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Shape("buffer has no channels".into()));
        }
        let frames = channels[0].len();
        if channels.iter().any(|c| c.len() != frames) {
            return Err(Error::Shape("all channels must have the same length".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self { channels, sample_rate })
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn frame_count(&self) -> usize {
        self.channels[0].len()
    }
}

/// Maps a hound error; while reading an already opened file, short reads
/// mean the header promises more than the file holds.
fn hound_error(path: &Path, e: hound::Error, reading: bool) -> Error {
    match e {
        hound::Error::IoError(io) if reading => Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: format!("truncated file ({io})"),
        },
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::FormatError(reason) => Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: reason.into(),
        },
        hound::Error::Unsupported => Error::UnsupportedCodec(format!("{}: unsupported WAV encoding", path.display())),
        other => Error::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Reads 16/24-bit PCM or 32-bit float WAV.
pub fn read_wav(path: &Path) -> Result<MultichannelBuffer> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let size = file.metadata().map_err(|e| Error::io(path, e))?.len();
    if size == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let reader = WavReader::new(BufReader::new(file)).map_err(|e| hound_error(path, e, true))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| hound_error(path, e, true))?,
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = 1.0 / f64::from(1u32 << (bits - 1));
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) * scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| hound_error(path, e, true))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec(format!(
                "{}: {bits}-bit {fmt:?} (supported: 16/24-bit PCM, 32-bit float)",
                path.display()
            )))
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: "data length is not a whole number of frames".into(),
        });
    }
    let frames = interleaved.len() / channels;
    let planar = (0..channels)
        .map(|c| (0..frames).map(|t| interleaved[t * channels + c]).collect())
        .collect();
    MultichannelBuffer::new(planar, f64::from(spec.sample_rate))
}

/// Writes 32-bit float WAV plus the `<path>.json` sidecar.
pub fn write_wav(path: &Path, buffer: &MultichannelBuffer, metadata: &SidecarMetadata) -> Result<()> {
    metadata.validate(buffer.channel_count())?;
    if buffer.frame_count() == 0 {
        return Err(Error::Validation("refusing to write a WAV without frames".into()));
    }
    if buffer.channel_count() > usize::from(u16::MAX) {
        return Err(Error::Validation(format!(
            "{} channels exceed the WAV limit",
            buffer.channel_count()
        )));
    }
    let rate = buffer.sample_rate.round();
    if (rate - buffer.sample_rate).abs() > 1e-9 || rate > f64::from(u32::MAX) {
        return Err(Error::Validation(format!(
            "WAV needs an integer sample rate, got {}",
            buffer.sample_rate
        )));
    }
    let spec = WavSpec {
        channels: buffer.channel_count() as u16,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut w = WavWriter::create(path, spec).map_err(|e| hound_error(path, e, false))?;
    for t in 0..buffer.frame_count() {
        for c in &buffer.channels {
            w.write_sample(c[t] as f32).map_err(|e| hound_error(path, e, false))?;
        }
    }
    w.finalize().map_err(|e| hound_error(path, e, false))?;
    super::write_json(&sidecar_path(path), metadata)
}
