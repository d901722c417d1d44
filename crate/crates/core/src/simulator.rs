//! Analytic capture of a horizontal plane wave by the equatorial ring.
//!
//! Pressure at mic `q` is
//! `sum_n sum_m Y_{n,m}(pi/2, theta) b_n(kR) N_{n,m}(pi/2) C_m(alpha_q)`;
//! the ideal ambisonic coefficients are `Y_{n,m}(pi/2, theta)`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::encoder::ArrayGeometry;
use crate::error::{Error, Result};
use crate::harmonics::{circular_harmonic, equator_table, sh_indices, EquatorFactorTable};
use crate::radial::radial_terms;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum SourceSignal {
    /// Unit impulse at sample `length / 4`.
    Impulse,
    /// Uniform white noise in `[-1, 1)`, seeded.
    Noise {
        seed: u64,
    },
    Sine {
        frequency: f64,
    },
}

impl SourceSignal {
    pub fn impulse_onset(length: usize) -> usize {
        length / 4
    }

    pub fn render(&self, length: usize, sample_rate: f64) -> Vec<f64> {
        match *self {
            SourceSignal::Impulse => {
                let mut x = vec![0.0; length];
                if length > 0 {
                    x[Self::impulse_onset(length)] = 1.0;
                }
                x
            }
            SourceSignal::Noise { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..length).map(|_| rng.random_range(-1.0..1.0)).collect()
            }
            SourceSignal::Sine { frequency } => (0..length)
                .map(|t| (2.0 * std::f64::consts::PI * frequency * t as f64 / sample_rate).sin())
                .collect(),
        }
    }
}

impl FromStr for SourceSignal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "impulse" => Ok(SourceSignal::Impulse),
            "noise" => Ok(SourceSignal::Noise { seed: 0 }),
            _ => {
                if let Some(f) = s.strip_prefix("sine:") {
                    let frequency: f64 = f
                        .parse()
                        .map_err(|_| Error::Config(format!("bad sine frequency {f:?}")))?;
                    if !(frequency > 0.0 && frequency.is_finite()) {
                        return Err(Error::Config(format!("sine frequency must be positive, got {f}")));
                    }
                    return Ok(SourceSignal::Sine { frequency });
                }
                if let Some(seed) = s.strip_prefix("noise:") {
                    let seed = seed
                        .parse()
                        .map_err(|_| Error::Config(format!("bad noise seed {seed:?}")))?;
                    return Ok(SourceSignal::Noise { seed });
                }
                Err(Error::Config(format!(
                    "unknown signal {s:?} (expected impulse, noise, noise:SEED or sine:F)"
                )))
            }
        }
    }
}

impl fmt::Display for SourceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSignal::Impulse => write!(f, "impulse"),
            SourceSignal::Noise { seed } => write!(f, "noise:{seed}"),
            SourceSignal::Sine { frequency } => write!(f, "sine:{frequency}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveSource {
    /// Incidence azimuth in radians.
    pub azimuth: f64,
    pub amplitude: f64,
    pub signal: SourceSignal,
}

impl PlaneWaveSource {
    pub fn new(azimuth: f64, signal: SourceSignal) -> Self {
        Self {
            azimuth,
            amplitude: 1.0,
            signal,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude != 0.0) {
            return Err(Error::Config(format!(
                "source amplitude must be finite and nonzero, got {}",
                self.amplitude
            )));
        }
        if !self.azimuth.is_finite() {
            return Err(Error::Config("source azimuth must be finite".into()));
        }
        Ok(())
    }

    /// `amplitude * Y_{n,m}(pi/2, theta)` in ACN order up to `order`.
    pub fn truth_coefficients(&self, order: usize) -> Result<Vec<f64>> {
        let table = equator_table(order)?;
        Ok(sh_indices(order)
            .map(|ix| table.get(ix.n, ix.m) * circular_harmonic(ix.m, self.azimuth) * self.amplitude)
            .collect())
    }
}

/// `ceil(kR_max) + 30` with `kR_max` taken at Nyquist.
pub fn default_truncation(geom: &ArrayGeometry, sample_rate: f64) -> usize {
    let kr_max = std::f64::consts::PI * sample_rate * geom.radius / geom.speed_of_sound;
    kr_max.ceil() as usize + 30
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("omega must be > 0, got {omega}")));
    }
    Ok(())
}

/// Surface pressure at mic `q`, summed degree-first over the double series.
pub fn surface_pressure_spectrum(
    src: &PlaneWaveSource,
    geom: &ArrayGeometry,
    omega: f64,
    mic_index: usize,
    truncation: usize,
) -> Result<Complex64> {
    check_omega(omega)?;
    let table = equator_table(truncation)?;
    let b = radial_terms(truncation, omega * geom.radius / geom.speed_of_sound)?;
    let alpha = geom.azimuth(mic_index);
    let mut total = Complex64::new(0.0, 0.0);
    for ix in sh_indices(truncation) {
        let f = table.get(ix.n, ix.m);
        if f == 0.0 {
            continue;
        }
        let coeff = f * circular_harmonic(ix.m, src.azimuth);
        total += b[ix.n] * (coeff * f * circular_harmonic(ix.m, alpha));
    }
    Ok(total * src.amplitude)
}

/// Per-mode ring spectra `C_m(theta) sum_{n>=|m|} b_n N_{n,m}(pi/2)^2`,
/// modes `-truncation..=truncation`.
pub fn ring_mode_spectra(
    src: &PlaneWaveSource,
    omega: f64,
    geom: &ArrayGeometry,
    truncation: usize,
) -> Result<Vec<Complex64>> {
    check_omega(omega)?;
    let table = equator_table(truncation)?;
    let b = radial_terms(truncation, omega * geom.radius / geom.speed_of_sound)?;
    let strengths = mode_strengths(&b, &table, truncation);
    Ok((-(truncation as i32)..=truncation as i32)
        .map(|m| strengths[m.unsigned_abs() as usize] * (circular_harmonic(m, src.azimuth) * src.amplitude))
        .collect())
}

/// Surface pressure at mic `q`, regrouped mode-first:
/// `sum_m C_m(alpha_q) C_m(theta) sum_{n>=|m|} b_n N_{n,m}(pi/2)^2`.
pub fn surface_pressure_by_modes(
    src: &PlaneWaveSource,
    geom: &ArrayGeometry,
    omega: f64,
    mic_index: usize,
    truncation: usize,
) -> Result<Complex64> {
    let modes = ring_mode_spectra(src, omega, geom, truncation)?;
    let alpha = geom.azimuth(mic_index);
    Ok((-(truncation as i32)..=truncation as i32)
        .zip(modes)
        .map(|(m, s)| s * circular_harmonic(m, alpha))
        .sum())
}

fn mode_strengths(b: &[Complex64], table: &EquatorFactorTable, truncation: usize) -> Vec<Complex64> {
    (0..=truncation)
        .map(|am| {
            (am..=truncation)
                .step_by(2)
                .map(|n| {
                    let f = table.get(n, am as i32);
                    b[n] * (f * f)
                })
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub mic_signals: Vec<Vec<f64>>,
    /// Ideal ambisonic coefficients in ACN order up to `order`.
    pub truth_coeffs: Vec<f64>,
    pub order: usize,
    /// The source waveform (amplitude applied) the mic signals were made from.
    pub source_signal: Vec<f64>,
    pub sample_rate: f64,
    pub truncation: usize,
    /// Largest imaginary residue of the inverse transforms relative to the peak sample.
    pub imag_residue: f64,
}

/// Synthesises the mic signals on an FFT grid of `length` points.
///
/// Each mic's transfer function is sampled on the bins, set to the
/// incident pressure (1) at DC, made real at Nyquist, multiplied with the
/// source spectrum and transformed back, i.e. the source is convolved
/// circularly.
pub fn simulate_capture(
    src: &PlaneWaveSource,
    geom: &ArrayGeometry,
    sample_rate: f64,
    length: usize,
    truncation: Option<usize>,
    order: usize,
) -> Result<SimulationResult> {
    src.validate()?;
    geom.validate()?;
    if !length.is_power_of_two() || length < 2 {
        return Err(Error::Config(format!(
            "simulation length must be a power of two, got {length}"
        )));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Config(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    if let SourceSignal::Sine { frequency } = src.signal {
        if frequency >= sample_rate / 2.0 {
            return Err(Error::Config(format!(
                "sine at {frequency} Hz is not below Nyquist ({} Hz)",
                sample_rate / 2.0
            )));
        }
    }
    let truncation = truncation.unwrap_or_else(|| default_truncation(geom, sample_rate));
    let table = equator_table(truncation)?;

    let source: Vec<f64> = src
        .signal
        .render(length, sample_rate)
        .into_iter()
        .map(|v| v * src.amplitude)
        .collect();
    let spectrum = dsp::rfft(&source, length);

    let nm = truncation as i32;
    // weights C_m(theta) C_m(alpha_q), q-major
    let weights: Vec<Vec<f64>> = geom
        .azimuths()
        .iter()
        .map(|&a| {
            (-nm..=nm)
                .map(|m| circular_harmonic(m, src.azimuth) * circular_harmonic(m, a))
                .collect()
        })
        .collect();

    let bins = length / 2 + 1;
    let per_bin: Vec<Vec<Complex64>> = (0..bins)
        .into_par_iter()
        .map(|k| {
            if k == 0 {
                return Ok(vec![Complex64::new(1.0, 0.0); geom.mic_count]);
            }
            let kr = dsp::bin_omega(k, length, sample_rate) * geom.radius / geom.speed_of_sound;
            let b = radial_terms(truncation, kr)?;
            let strengths = mode_strengths(&b, &table, truncation);
            Ok(weights
                .iter()
                .map(|w| {
                    let mut h: Complex64 = (-nm..=nm)
                        .zip(w)
                        .map(|(m, &wm)| strengths[m.unsigned_abs() as usize] * wm)
                        .sum();
                    if k == bins - 1 {
                        h.im = 0.0;
                    }
                    h
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut residue = 0.0f64;
    let mic_signals: Vec<Vec<f64>> = (0..geom.mic_count)
        .map(|q| {
            let half: Vec<Complex64> = (0..bins).map(|k| per_bin[k][q] * spectrum[k]).collect();
            let (x, r) = dsp::irfft(&half, length);
            residue = residue.max(r);
            x
        })
        .collect();
    let peak = mic_signals.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));

    Ok(SimulationResult {
        mic_signals,
        truth_coeffs: src.truth_coefficients(order)?,
        order,
        source_signal: source,
        sample_rate,
        truncation,
        imag_residue: if peak > 0.0 { residue / peak } else { residue },
    })
}
