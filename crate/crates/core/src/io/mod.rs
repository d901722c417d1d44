//! File formats: WAV with JSON sidecars, binary filter-bank and HRTF-grid
//! containers, and JSON descriptions of geometry and ground truth.

mod container;
mod sidecar;
mod wav;

pub use container::{read_filter_bank, read_hrtf_grid, write_filter_bank, write_hrtf_grid, BANK_MAGIC, HRTF_MAGIC};
pub use sidecar::{read_sidecar, sidecar_path, ContentKind, SidecarMetadata, TOOL_VERSION};
pub use wav::{read_wav, write_wav, MultichannelBuffer};

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::encoder::ArrayGeometry;
use crate::error::{Error, Result};
use crate::harmonics::acn_inverse;
use crate::simulator::PlaneWaveSource;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Validation(format!("cannot serialise {}: {e}", path.display())))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn read_geometry(path: &Path) -> Result<ArrayGeometry> {
    let g: ArrayGeometry = read_json(path)?;
    g.validate()?;
    Ok(g)
}

pub fn write_geometry(path: &Path, geom: &ArrayGeometry) -> Result<()> {
    write_json(path, geom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthCoefficient {
    pub acn: usize,
    pub n: usize,
    pub m: i32,
    pub value: f64,
}

/// Ideal ambisonic coefficients of a simulated plane wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub azimuth_deg: f64,
    pub amplitude: f64,
    pub signal: String,
    pub order: usize,
    pub channel_ordering: String,
    pub normalization: String,
    pub truncation: usize,
    pub coefficients: Vec<TruthCoefficient>,
}

impl TruthFile {
    pub fn new(src: &PlaneWaveSource, order: usize, truncation: usize, coeffs: &[f64]) -> Self {
        Self {
            azimuth_deg: src.azimuth.to_degrees(),
            amplitude: src.amplitude,
            signal: src.signal.to_string(),
            order,
            channel_ordering: "ACN".into(),
            normalization: "N3D".into(),
            truncation,
            coefficients: coeffs
                .iter()
                .enumerate()
                .map(|(acn, &value)| {
                    let ix = acn_inverse(acn);
                    TruthCoefficient {
                        acn,
                        n: ix.n,
                        m: ix.m,
                        value,
                    }
                })
                .collect(),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.value).collect()
    }
}

pub fn write_truth(path: &Path, truth: &TruthFile) -> Result<()> {
    write_json(path, truth)
}

pub fn read_truth(path: &Path) -> Result<TruthFile> {
    let t: TruthFile = read_json(path)?;
    if t.coefficients.iter().enumerate().any(|(i, c)| c.acn != i) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "coefficients must be listed in ACN order".into(),
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::SourceSignal;

    #[test]
    fn truth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.json");
        let src = PlaneWaveSource::new(0.5, SourceSignal::Impulse);
        let coeffs = src.truth_coefficients(3).unwrap();
        let t = TruthFile::new(&src, 3, 69, &coeffs);
        write_truth(&p, &t).unwrap();
        let back = read_truth(&p).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.values(), coeffs);
        assert_eq!(back.coefficients[14].n, 3);
        assert_eq!(back.coefficients[14].m, 2);
    }

    #[test]
    fn geometry_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("geom.json");
        let g = ArrayGeometry::new(0.0875, 16).unwrap();
        write_geometry(&p, &g).unwrap();
        assert_eq!(read_geometry(&p).unwrap(), g);
        std::fs::write(&p, r#"{"radius_m": 0.1, "mic_count": 2}"#).unwrap();
        assert!(read_geometry(&p).is_err());
    }
}
