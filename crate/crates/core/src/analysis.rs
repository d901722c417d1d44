//! Comparison of encoded channels against ideal plane-wave coefficients.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::encoder::AmbisonicSignalSet;
use crate::error::{Error, Result};
use crate::harmonics::{acn_inverse, ShIndex};
use crate::radial::EqualizationFilterBank;

/// Spectrum of `output` divided by the spectrum of `source`, bins `0..=L/2`,
/// using an FFT as long as the longer of the two.
pub fn transfer_function(output: &[f64], source: &[f64]) -> Result<Vec<Complex64>> {
    let len = output.len().max(source.len()).next_power_of_two();
    let so = dsp::rfft(source, len);
    if so.iter().skip(1).any(|s| s.norm() == 0.0) {
        return Err(Error::Numerical("source spectrum has exact zeros".into()));
    }
    let out = dsp::rfft(output, len);
    Ok(out.iter().zip(&so).map(|(o, s)| o / s).collect())
}

fn bin_hz(k: usize, bins: usize, fs: f64) -> f64 {
    k as f64 * fs / (2 * (bins - 1)) as f64
}

fn band_bins(bins: usize, fs: f64, lo: f64, hi: f64) -> impl Iterator<Item = usize> {
    (1..bins).filter(move |&k| {
        let f = bin_hz(k, bins, fs);
        f >= lo && f <= hi
    })
}

/// Per-channel comparison against a nonzero truth value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelReport {
    pub acn: usize,
    pub n: usize,
    pub m: i32,
    pub truth: f64,
    /// Band actually evaluated for this channel, Hz.
    pub band_hz: (f64, f64),
    pub bins: usize,
    /// Largest `| 20 log10 |H| - 20 log10 |Y| |`.
    pub max_magnitude_error_db: f64,
    /// Largest `| 20 log10 |H / Y| |`, the signed-ratio magnitude error.
    pub max_ratio_error_db: f64,
    /// Largest `| arg(H / Y) |` in degrees.
    pub max_phase_error_deg: f64,
    /// For channels whose truth is zero: largest level relative to the
    /// strongest channel at the same bin, dB.
    pub max_relative_level_db: Option<f64>,
    pub parity_null: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingReport {
    pub order: usize,
    pub sample_rate: f64,
    /// Requested evaluation band, Hz.
    pub requested_band_hz: (f64, f64),
    /// Band where no equalizer up to the order is regularised.
    pub unregularized_band_hz: (f64, f64),
    /// Lowest unregularised frequency per `|m|`.
    pub mode_valid_from_hz: Vec<f64>,
    pub channels: Vec<ChannelReport>,
}

/// Tolerances applied by [`EncodingReport::check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub magnitude_db: f64,
    pub phase_deg: f64,
    /// Minimum attenuation of zero-truth channels below the strongest channel.
    pub null_floor_db: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            magnitude_db: 1.0,
            phase_deg: 5.0,
            null_floor_db: 40.0,
        }
    }
}

impl EncodingReport {
    /// Returns a description of every violated tolerance.
    pub fn check(&self, tol: &Tolerances) -> Vec<String> {
        let mut failures = Vec::new();
        for c in &self.channels {
            if c.parity_null {
                continue;
            }
            if c.bins == 0 {
                failures.push(format!("channel {} has no bins in band", c.acn));
                continue;
            }
            match c.max_relative_level_db {
                Some(level) => {
                    if level > -tol.null_floor_db {
                        failures.push(format!(
                            "channel {} (n={}, m={}) zero-truth level {:.1} dB",
                            c.acn, c.n, c.m, level
                        ));
                    }
                }
                None => {
                    if c.max_magnitude_error_db > tol.magnitude_db || c.max_ratio_error_db > tol.magnitude_db {
                        failures.push(format!(
                            "channel {} (n={}, m={}) magnitude error {:.3} dB",
                            c.acn,
                            c.n,
                            c.m,
                            c.max_magnitude_error_db.max(c.max_ratio_error_db)
                        ));
                    }
                    if c.max_phase_error_deg > tol.phase_deg {
                        failures.push(format!(
                            "channel {} (n={}, m={}) phase error {:.3} deg",
                            c.acn, c.n, c.m, c.max_phase_error_deg
                        ));
                    }
                }
            }
        }
        failures
    }
}

/// Transfer functions of every channel relative to `source`, compared with
/// `truth` (ACN order) over `band_hz` intersected with each channel's
/// unregularised range.
pub fn evaluate_encoding(
    ambi: &AmbisonicSignalSet,
    source: &[f64],
    truth: &[f64],
    bank: &EqualizationFilterBank,
    band_hz: (f64, f64),
) -> Result<EncodingReport> {
    if truth.len() != ambi.channels.len() {
        return Err(Error::Shape(format!(
            "{} truth coefficients for {} channels",
            truth.len(),
            ambi.channels.len()
        )));
    }
    let fs = ambi.sample_rate;
    let tfs = ambi
        .channels
        .iter()
        .map(|c| transfer_function(c, source))
        .collect::<Result<Vec<_>>>()?;
    let bins = tfs.first().map_or(0, Vec::len);
    let strongest: Vec<f64> = (0..bins)
        .map(|k| tfs.iter().map(|t| t[k].norm()).fold(0.0, f64::max))
        .collect();

    // C_m(theta) evaluates to ~1e-17 rather than 0 at its zeros
    let zero_tol = 1e-12 * truth.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let channels = tfs
        .iter()
        .enumerate()
        .map(|(acn, tf)| {
            let ShIndex { n, m } = acn_inverse(acn);
            let lo = band_hz.0.max(bank.mode_valid_from_hz(m));
            let hi = band_hz.1;
            let y = if truth[acn].abs() <= zero_tol { 0.0 } else { truth[acn] };
            let mut report = ChannelReport {
                acn,
                n,
                m,
                truth: y,
                band_hz: (lo, hi),
                bins: 0,
                max_magnitude_error_db: 0.0,
                max_ratio_error_db: 0.0,
                max_phase_error_deg: 0.0,
                max_relative_level_db: None,
                parity_null: ShIndex { n, m }.is_equator_null(),
            };
            let mut level = f64::NEG_INFINITY;
            for k in band_bins(bins, fs, lo, hi) {
                report.bins += 1;
                if y == 0.0 {
                    let rel = 20.0 * (tf[k].norm() / strongest[k]).log10();
                    level = level.max(if rel.is_nan() { f64::NEG_INFINITY } else { rel });
                } else {
                    let mag = (20.0 * (tf[k].norm().log10() - y.abs().log10())).abs();
                    let ratio = tf[k] / y;
                    report.max_magnitude_error_db = report.max_magnitude_error_db.max(mag);
                    report.max_ratio_error_db = report.max_ratio_error_db.max((20.0 * ratio.norm().log10()).abs());
                    report.max_phase_error_deg = report.max_phase_error_deg.max(ratio.arg().to_degrees().abs());
                }
            }
            if y == 0.0 {
                report.max_relative_level_db = Some(level);
            }
            report
        })
        .collect();

    Ok(EncodingReport {
        order: ambi.order,
        sample_rate: fs,
        requested_band_hz: band_hz,
        unregularized_band_hz: bank.valid_band_hz(ambi.order),
        mode_valid_from_hz: (0..=ambi.order).map(|m| bank.mode_valid_from_hz(m as i32)).collect(),
        channels,
    })
}
