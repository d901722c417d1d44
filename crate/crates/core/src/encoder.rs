//! Microphone ring to ambisonics: circular-harmonic analysis of the ring,
//! per-mode radial equalization, expansion to `(n, m)` channels.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::Convolver;
use crate::error::{Error, Result};
use crate::harmonics::{channel_count, circular_harmonic, sh_indices, EquatorFactorTable, ShIndex};
use crate::radial::{EqualizationFilterBank, RadialConfig};

/// Uniform ring of `mic_count` microphones on the equator; mic `q` sits at
/// azimuth `2 pi q / Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    #[serde(rename = "radius_m")]
    pub radius: f64,
    pub mic_count: usize,
    #[serde(default = "default_speed_of_sound")]
    pub speed_of_sound: f64,
}

fn default_speed_of_sound() -> f64 {
    RadialConfig::DEFAULT_SPEED_OF_SOUND
}

impl ArrayGeometry {
    pub fn new(radius: f64, mic_count: usize) -> Result<Self> {
        let g = Self {
            radius,
            mic_count,
            speed_of_sound: default_speed_of_sound(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mic_count < 3 {
            return Err(Error::Geometry(format!(
                "need at least 3 microphones, got {}",
                self.mic_count
            )));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Geometry(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return Err(Error::Geometry(format!(
                "speed of sound must be positive, got {}",
                self.speed_of_sound
            )));
        }
        Ok(())
    }

    pub fn azimuth(&self, q: usize) -> f64 {
        2.0 * PI * q as f64 / self.mic_count as f64
    }

    pub fn azimuths(&self) -> Vec<f64> {
        (0..self.mic_count).map(|q| self.azimuth(q)).collect()
    }

    /// Highest circular-harmonic mode resolved without aliasing,
    /// `floor((Q - 1) / 2)`.
    pub fn max_mode(&self) -> usize {
        (self.mic_count - 1) / 2
    }

    /// Geometry error unless the ring resolves modes up to `order`.
    pub fn check_order(&self, order: usize) -> Result<()> {
        if order > self.max_mode() {
            return Err(Error::Geometry(format!(
                "order {order} needs at least {} microphones, have {}",
                2 * order + 1,
                self.mic_count
            )));
        }
        Ok(())
    }
}

/// Circular-harmonic signals of the ring, modes `-M..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct RingSpectra {
    max_mode: usize,
    sample_rate: f64,
    modes: Vec<Vec<f64>>,
}

impl RingSpectra {
    pub fn new(max_mode: usize, sample_rate: f64, modes: Vec<Vec<f64>>) -> Result<Self> {
        if modes.len() != 2 * max_mode + 1 {
            return Err(Error::Shape(format!(
                "expected {} mode signals, got {}",
                2 * max_mode + 1,
                modes.len()
            )));
        }
        Ok(Self {
            max_mode,
            sample_rate,
            modes,
        })
    }

    pub fn max_mode(&self) -> usize {
        self.max_mode
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn mode(&self, m: i32) -> &[f64] {
        &self.modes[(m + self.max_mode as i32) as usize]
    }

    pub fn len(&self) -> usize {
        self.modes.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn modes(&self) -> impl Iterator<Item = (i32, &[f64])> {
        let mm = self.max_mode as i32;
        self.modes
            .iter()
            .enumerate()
            .map(move |(i, s)| (i as i32 - mm, s.as_slice()))
    }
}

/// ACN-ordered, N3D-normalised ambisonic signals.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbisonicSignalSet {
    pub order: usize,
    pub sample_rate: f64,
    pub channels: Vec<Vec<f64>>,
}

impl AmbisonicSignalSet {
    pub const ORDERING: &'static str = "ACN";
    pub const NORMALIZATION: &'static str = "N3D";

    pub fn new(order: usize, sample_rate: f64, channels: Vec<Vec<f64>>) -> Result<Self> {
        if channels.len() != channel_count(order) {
            return Err(Error::Shape(format!(
                "order {order} needs {} channels, got {}",
                channel_count(order),
                channels.len()
            )));
        }
        if channels.iter().any(|c| c.len() != channels[0].len()) {
            return Err(Error::Shape("ambisonic channels differ in length".into()));
        }
        Ok(Self {
            order,
            sample_rate,
            channels,
        })
    }

    pub fn channel(&self, n: usize, m: i32) -> &[f64] {
        &self.channels[ShIndex { n, m }.acn()]
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// What to do with the modeling delay of the equalization FIRs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayHandling {
    /// Full convolution, `len + fir_length - 1` samples, delayed by the
    /// modeling delay.
    Keep,
    /// Drop the first `modeling_delay` samples and trim to the input length.
    #[default]
    Compensate,
}

pub(crate) fn check_signals(signals: &[Vec<f64>]) -> Result<usize> {
    let len = signals.first().map_or(0, Vec::len);
    if let Some((i, s)) = signals.iter().enumerate().find(|(_, s)| s.len() != len) {
        return Err(Error::Shape(format!(
            "signal {i} has {} samples, expected {len}",
            s.len()
        )));
    }
    Ok(len)
}

/// Real `(2M+1) x Q` analysis matrix, row `m + M` holding `C_m(alpha_q) / Q`.
pub fn analysis_matrix(geom: &ArrayGeometry, max_mode: usize) -> Vec<Vec<f64>> {
    let q = geom.mic_count as f64;
    let az = geom.azimuths();
    (-(max_mode as i32)..=max_mode as i32)
        .map(|m| az.iter().map(|&a| circular_harmonic(m, a) / q).collect())
        .collect()
}

/// Discrete ring integral `S_m(t) = 1/Q sum_q s_q(t) C_m(alpha_q)`.
pub fn ch_analyze(
    mic_signals: &[Vec<f64>],
    sample_rate: f64,
    geom: &ArrayGeometry,
    max_mode: usize,
) -> Result<RingSpectra> {
    geom.validate()?;
    if mic_signals.len() != geom.mic_count {
        return Err(Error::Shape(format!(
            "geometry has {} microphones but {} signals were given",
            geom.mic_count,
            mic_signals.len()
        )));
    }
    if geom.mic_count < 2 * max_mode + 1 {
        return Err(Error::Geometry(format!(
            "mode {max_mode} needs at least {} microphones, have {}",
            2 * max_mode + 1,
            geom.mic_count
        )));
    }
    let len = check_signals(mic_signals)?;
    let a = analysis_matrix(geom, max_mode);
    let modes = a
        .iter()
        .map(|row| {
            let mut out = vec![0.0; len];
            for (w, s) in row.iter().zip(mic_signals) {
                for (o, v) in out.iter_mut().zip(s) {
                    *o += w * v;
                }
            }
            out
        })
        .collect();
    RingSpectra::new(max_mode, sample_rate, modes)
}

/// Inverse of [`ch_analyze`] for mode coefficients given as `(m, value)`:
/// `s_q = sum_m c_m C_m(alpha_q)`.
pub fn ch_synthesize(coeffs: &[(i32, f64)], geom: &ArrayGeometry) -> Vec<f64> {
    geom.azimuths()
        .iter()
        .map(|&a| coeffs.iter().map(|&(m, c)| c * circular_harmonic(m, a)).sum())
        .collect()
}

/// Convolves each ring mode with the bank's FIR for `|m|`.
pub fn equalize(ring: &RingSpectra, bank: &EqualizationFilterBank, delay: DelayHandling) -> Result<RingSpectra> {
    if ring.max_mode() > bank.config.max_order {
        return Err(Error::Mismatch(format!(
            "ring has modes up to {} but the filter bank stops at {}",
            ring.max_mode(),
            bank.config.max_order
        )));
    }
    if (ring.sample_rate() - bank.config.sample_rate).abs() > 1e-9 * bank.config.sample_rate {
        return Err(Error::Mismatch(format!(
            "signals at {} Hz, filter bank at {} Hz",
            ring.sample_rate(),
            bank.config.sample_rate
        )));
    }
    let len = ring.len();
    let d = bank.modeling_delay;
    let modes = ring
        .modes
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let m = i as i32 - ring.max_mode as i32;
            let full = Convolver::new(&bank.mode(m).fir)?.convolve(s);
            Ok(match delay {
                DelayHandling::Keep => full,
                DelayHandling::Compensate => (0..len).map(|t| full.get(t + d).copied().unwrap_or(0.0)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    RingSpectra::new(ring.max_mode, ring.sample_rate, modes)
}

/// Channel `(n, m)` = equalized mode `m` scaled by `N_{n,m}(pi/2)`;
/// parity-null channels are written as literal zeros.
pub fn expand(ring_eq: &RingSpectra, table: &EquatorFactorTable, order: usize) -> Result<AmbisonicSignalSet> {
    if order > ring_eq.max_mode() {
        return Err(Error::Order(format!(
            "order {order} exceeds available ring modes (max {})",
            ring_eq.max_mode()
        )));
    }
    if order > table.max_order() {
        return Err(Error::Order(format!(
            "order {order} exceeds equator table order {}",
            table.max_order()
        )));
    }
    let len = ring_eq.len();
    let channels = sh_indices(order)
        .map(|ix| {
            if ix.is_equator_null() {
                return vec![0.0; len];
            }
            let f = table.get(ix.n, ix.m);
            ring_eq.mode(ix.m).iter().map(|v| v * f).collect()
        })
        .collect();
    AmbisonicSignalSet::new(order, ring_eq.sample_rate(), channels)
}

/// The full chain: analyze, equalize, expand.
///
/// The ring is analysed only up to `order`; modes above it would be dropped
/// by the expansion anyway.
pub fn encode(
    mic_signals: &[Vec<f64>],
    sample_rate: f64,
    geom: &ArrayGeometry,
    bank: &EqualizationFilterBank,
    table: &EquatorFactorTable,
    order: usize,
    delay: DelayHandling,
) -> Result<AmbisonicSignalSet> {
    geom.validate()?;
    geom.check_order(order)?;
    if order > bank.config.max_order {
        return Err(Error::Mismatch(format!(
            "order {order} exceeds filter bank order {}",
            bank.config.max_order
        )));
    }
    let rel = |a: f64, b: f64| (a - b).abs() > 1e-9 * b.abs();
    if rel(geom.radius, bank.config.radius) || rel(geom.speed_of_sound, bank.config.speed_of_sound) {
        return Err(Error::Mismatch(format!(
            "array radius {} m / c {} m/s differ from filter bank design ({} m / {} m/s)",
            geom.radius, geom.speed_of_sound, bank.config.radius, bank.config.speed_of_sound
        )));
    }
    let ring = ch_analyze(mic_signals, sample_rate, geom, order)?;
    let ring_eq = equalize(&ring, bank, delay)?;
    expand(&ring_eq, table, order)
}
