//! Binary containers: 8-byte magic, `u64` LE header length, UTF-8 JSON
//! header, little-endian payload.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{EqualizationFilterBank, ModeFilter, RadialConfig};
use crate::renderer::HrtfGrid;
use num_complex::Complex64;

pub const BANK_MAGIC: &[u8; 8] = b"EMAFB001";
pub const HRTF_MAGIC: &[u8; 8] = b"EMAHRIR1";

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_container<H: Serialize>(path: &Path, magic: &[u8; 8], header: &H, payload: &[u8]) -> Result<()> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Validation(e.to_string()))?;
    let mut bytes = Vec::with_capacity(16 + json.len() + payload.len());
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&(json.len() as u64).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(payload);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_container<H: DeserializeOwned>(path: &Path, magic: &[u8; 8]) -> Result<(H, Vec<u8>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    if bytes.len() < 16 || &bytes[..8] != magic {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: format!("missing {} magic", String::from_utf8_lossy(magic)),
        });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::CorruptHeader {
            path: path.to_path_buf(),
            reason: format!("header length {len} runs past the end of the file"),
        })?;
    let header = serde_json::from_slice(&bytes[16..end]).map_err(|e| Error::CorruptHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    Ok((header, bytes[end..].to_vec()))
}

#[derive(Serialize, Deserialize)]
struct BankHeader {
    config: RadialConfig,
    modeling_delay: usize,
    bins: usize,
    /// Byte offset of each mode's taps from the start of the payload.
    mode_offsets: Vec<u64>,
    /// Per `|m|`, half-open bin ranges whose regularisation is active.
    limited_ranges: Vec<Vec<(usize, usize)>>,
    payload: String,
}

const BANK_PAYLOAD: &str = "for |m| = 0..=max_order: fir_length f64 taps, then bins (re, im) f64 pairs";

fn ranges(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (k, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                out.push((s, k));
                start = None;
            }
            _ => {}
        }
    }
    out
}

pub fn write_filter_bank(path: &Path, bank: &EqualizationFilterBank) -> Result<()> {
    let per_mode = (bank.config.fir_length + 2 * bank.config.bins()) * 8;
    let header = BankHeader {
        config: bank.config.clone(),
        modeling_delay: bank.modeling_delay,
        bins: bank.config.bins(),
        mode_offsets: (0..bank.modes.len()).map(|i| (i * per_mode) as u64).collect(),
        limited_ranges: bank.modes.iter().map(|m| ranges(&m.limited)).collect(),
        payload: BANK_PAYLOAD.into(),
    };
    let mut payload = Vec::new();
    for mode in &bank.modes {
        for t in &mode.fir {
            payload.extend_from_slice(&t.to_le_bytes());
        }
        for r in &mode.response {
            payload.extend_from_slice(&r.re.to_le_bytes());
            payload.extend_from_slice(&r.im.to_le_bytes());
        }
    }
    write_container(path, BANK_MAGIC, &header, &payload)
}

pub fn read_filter_bank(path: &Path) -> Result<EqualizationFilterBank> {
    let (h, payload): (BankHeader, _) = read_container(path, BANK_MAGIC)?;
    h.config.validate().map_err(|e| format_err(path, e.to_string()))?;
    let modes = h.config.max_order + 1;
    if h.bins != h.config.bins() || h.limited_ranges.len() != modes || h.modeling_delay >= h.config.fir_length {
        return Err(format_err(path, "header layout disagrees with its configuration"));
    }
    let per_mode = h.config.fir_length + 2 * h.bins;
    if h.mode_offsets.len() != modes
        || h.mode_offsets
            .iter()
            .enumerate()
            .any(|(i, &o)| o != (i * per_mode * 8) as u64)
    {
        return Err(format_err(path, "mode offsets do not match the documented layout"));
    }
    if payload.len() != modes * per_mode * 8 {
        return Err(format_err(
            path,
            format!(
                "payload holds {} bytes, expected {}",
                payload.len(),
                modes * per_mode * 8
            ),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let modes = values
        .chunks_exact(per_mode)
        .zip(&h.limited_ranges)
        .map(|(v, lim)| {
            let (fir, resp) = v.split_at(h.config.fir_length);
            let mut limited = vec![false; h.bins];
            for &(a, b) in lim {
                if a >= b || b > h.bins {
                    return Err(format_err(path, format!("bad limited range {a}..{b}")));
                }
                limited[a..b].iter_mut().for_each(|f| *f = true);
            }
            Ok(ModeFilter {
                response: resp.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect(),
                fir: fir.to_vec(),
                limited,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EqualizationFilterBank {
        config: h.config,
        modes,
        modeling_delay: h.modeling_delay,
    })
}

#[derive(Serialize, Deserialize)]
struct HrtfDirection {
    colatitude_deg: f64,
    azimuth_deg: f64,
}

#[derive(Serialize, Deserialize)]
struct HrtfHeader {
    sample_rate: f64,
    ir_length: usize,
    directions: Vec<HrtfDirection>,
    payload: String,
}

const HRTF_PAYLOAD: &str = "per direction: ir_length f32 left, then ir_length f32 right";

pub fn write_hrtf_grid(path: &Path, grid: &HrtfGrid) -> Result<()> {
    let header = HrtfHeader {
        sample_rate: grid.sample_rate,
        ir_length: grid.ir_length(),
        directions: grid
            .directions
            .iter()
            .map(|&(b, a)| HrtfDirection {
                colatitude_deg: b.to_degrees(),
                azimuth_deg: a.to_degrees(),
            })
            .collect(),
        payload: HRTF_PAYLOAD.into(),
    };
    let mut payload = Vec::new();
    for (l, r) in grid.left.iter().zip(&grid.right) {
        for v in l.iter().chain(r) {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    write_container(path, HRTF_MAGIC, &header, &payload)
}

pub fn read_hrtf_grid(path: &Path) -> Result<HrtfGrid> {
    let (h, payload): (HrtfHeader, _) = read_container(path, HRTF_MAGIC)?;
    let expected = h.directions.len() * 2 * h.ir_length * 4;
    if payload.len() != expected {
        return Err(format_err(
            path,
            format!("payload holds {} bytes, expected {expected}", payload.len()),
        ));
    }
    let values: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
        .collect();
    let (mut left, mut right) = (Vec::new(), Vec::new());
    if h.ir_length > 0 {
        for pair in values.chunks_exact(2 * h.ir_length) {
            left.push(pair[..h.ir_length].to_vec());
            right.push(pair[h.ir_length..].to_vec());
        }
    }
    let directions = h
        .directions
        .iter()
        .map(|d| (d.colatitude_deg.to_radians(), d.azimuth_deg.to_radians()))
        .collect();
    HrtfGrid::new(directions, left, right, h.sample_rate).map_err(|e| format_err(path, e.to_string()))
}
