use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoder::{AmbisonicSignalSet, ArrayGeometry};
use crate::error::{Error, Result};
use crate::harmonics::channel_count;

pub const TOOL_VERSION: &str = concat!("ema ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentKind {
    Mics,
    Ambisonics,
    Binaural,
}

/// Metadata written next to every WAV as `<path>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarMetadata {
    pub kind: ContentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_ordering: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<ArrayGeometry>,
    pub tool_version: String,
}

impl SidecarMetadata {
    pub fn mics(geometry: ArrayGeometry) -> Self {
        Self {
            kind: ContentKind::Mics,
            order: None,
            channel_ordering: None,
            normalization: None,
            geometry: Some(geometry),
            tool_version: TOOL_VERSION.into(),
        }
    }

    pub fn ambisonics(order: usize, geometry: Option<ArrayGeometry>) -> Self {
        Self {
            kind: ContentKind::Ambisonics,
            order: Some(order),
            channel_ordering: Some(AmbisonicSignalSet::ORDERING.into()),
            normalization: Some(AmbisonicSignalSet::NORMALIZATION.into()),
            geometry,
            tool_version: TOOL_VERSION.into(),
        }
    }

    pub fn binaural(order: usize) -> Self {
        Self {
            kind: ContentKind::Binaural,
            order: Some(order),
            channel_ordering: None,
            normalization: None,
            geometry: None,
            tool_version: TOOL_VERSION.into(),
        }
    }

    /// Checks the metadata against a buffer of `channels` channels.
    pub fn validate(&self, channels: usize) -> Result<()> {
        match self.kind {
            ContentKind::Ambisonics => {
                let order = self
                    .order
                    .ok_or_else(|| Error::Validation("ambisonic metadata must carry the order".into()))?;
                if self.channel_ordering.as_deref() != Some(AmbisonicSignalSet::ORDERING) {
                    return Err(Error::Validation(format!(
                        "ambisonic channel ordering must be {:?}, got {:?}",
                        AmbisonicSignalSet::ORDERING,
                        self.channel_ordering
                    )));
                }
                if self.normalization.as_deref() != Some(AmbisonicSignalSet::NORMALIZATION) {
                    return Err(Error::Validation(format!(
                        "ambisonic normalization must be {:?}, got {:?}",
                        AmbisonicSignalSet::NORMALIZATION,
                        self.normalization
                    )));
                }
                if channel_count(order) != channels {
                    return Err(Error::Validation(format!(
                        "order {order} needs {} channels, buffer has {channels}",
                        channel_count(order)
                    )));
                }
            }
            ContentKind::Mics => {
                if let Some(g) = &self.geometry {
                    g.validate()?;
                    if g.mic_count != channels {
                        return Err(Error::Validation(format!(
                            "geometry lists {} mics, buffer has {channels} channels",
                            g.mic_count
                        )));
                    }
                }
            }
            ContentKind::Binaural => {
                if channels != 2 {
                    return Err(Error::Validation(format!(
                        "binaural audio needs 2 channels, got {channels}"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub fn sidecar_path(wav: &Path) -> PathBuf {
    let mut s = wav.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Reads `<wav>.json`.
pub fn read_sidecar(wav: &Path) -> Result<SidecarMetadata> {
    super::read_json(&sidecar_path(wav))
}
