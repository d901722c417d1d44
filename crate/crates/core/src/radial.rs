//! Rigid-sphere radial terms and the per-mode equalization filters that
//! invert the equatorial mode strength.
//!
//! For circular-harmonic mode `m` the ring signal carries
//! `sum_{n >= |m|} b_n(kR) N_{n,m}(pi/2)^2` times the mode's plane-wave
//! content. The filter bank stores the regularised reciprocal of that sum
//! per `|m|`, both as a half spectrum and as a real FIR delayed by half its
//! length.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp;
use crate::error::{Error, Result};
use crate::harmonics::{EquatorFactorTable, MAX_AMBISONIC_ORDER};
use crate::sphmath;

/// Attenuation above which a bin counts as regularised.
pub const LIMITED_THRESHOLD_DB: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialConfig {
    pub radius: f64,
    pub speed_of_sound: f64,
    pub sample_rate: f64,
    pub fir_length: usize,
    pub max_order: usize,
    pub truncation_order: usize,
    pub max_gain_db: f64,
}

impl RadialConfig {
    pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;
    pub const DEFAULT_FIR_LENGTH: usize = 2048;
    pub const DEFAULT_MAX_GAIN_DB: f64 = 40.0;
    /// Extra degrees summed past `max_order`; even, so the last term of the
    /// `|m| = max_order` sum is a surviving one.
    pub const DEFAULT_EXTRA_TERMS: usize = 40;

    pub fn new(radius: f64, sample_rate: f64, max_order: usize) -> Self {
        Self {
            radius,
            speed_of_sound: Self::DEFAULT_SPEED_OF_SOUND,
            sample_rate,
            fir_length: Self::DEFAULT_FIR_LENGTH,
            max_order,
            truncation_order: max_order + Self::DEFAULT_EXTRA_TERMS,
            max_gain_db: Self::DEFAULT_MAX_GAIN_DB,
        }
    }

    pub fn kr(&self, omega: f64) -> f64 {
        omega * self.radius / self.speed_of_sound
    }

    pub fn bins(&self) -> usize {
        self.fir_length / 2 + 1
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.fir_length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if !(self.speed_of_sound > 0.0 && self.speed_of_sound.is_finite()) {
            return bad(format!("speed of sound must be positive, got {}", self.speed_of_sound));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad(format!("sample rate must be positive, got {}", self.sample_rate));
        }
        if !self.max_gain_db.is_finite() {
            return bad("max gain must be finite".into());
        }
        if self.max_order > MAX_AMBISONIC_ORDER {
            return Err(Error::Cap {
                requested: self.max_order,
                cap: MAX_AMBISONIC_ORDER,
            });
        }
        if !self.fir_length.is_power_of_two() || self.fir_length < 2 * (self.max_order + 1) {
            return bad(format!(
                "fir length must be a power of two >= {}, got {}",
                2 * (self.max_order + 1),
                self.fir_length
            ));
        }
        // at least 8 surviving terms for |m| = max_order
        if self.truncation_order < self.max_order + 14 {
            return bad(format!(
                "truncation order {} leaves fewer than 8 terms for |m| = {} (need >= {})",
                self.truncation_order,
                self.max_order,
                self.max_order + 14
            ));
        }
        if self.truncation_order > sphmath::MAX_DEGREE {
            return Err(Error::Cap {
                requested: self.truncation_order,
                cap: sphmath::MAX_DEGREE,
            });
        }
        Ok(())
    }
}

/// `i^n` on the exact four-cycle.
pub fn i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Reciprocal that neither overflows `|z|^2` nor turns infinities into NaN.
fn recip(z: Complex64) -> Complex64 {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Complex64::new(0.0, 0.0);
    }
    let s = z.re.abs().max(z.im.abs());
    if s == 0.0 {
        return Complex64::new(f64::INFINITY, 0.0);
    }
    let w = z / s;
    w.conj() / (w.norm_sqr() * s)
}

/// `b_n(kR) = -4 pi i^n * i / (kR)^2 / h'^(2)_n(kR)` for `n = 0..=n_max`.
///
/// Where `h'` overflows double range the term underflows and is returned
/// as exact zero.
pub fn radial_terms(n_max: usize, kr: f64) -> Result<Vec<Complex64>> {
    if !(kr > 0.0) {
        return Err(Error::Domain(format!("radial term needs kR > 0, got {kr}")));
    }
    let dh = sphmath::sph_hankel2_deriv_seq(n_max, kr)?;
    let pre = Complex64::new(0.0, -4.0 * PI);
    Ok(dh
        .iter()
        .enumerate()
        .map(|(n, &d)| pre * i_pow(n) * recip(d * (kr * kr)))
        .collect())
}

pub fn radial_term(n: usize, kr: f64) -> Result<Complex64> {
    Ok(radial_terms(n, kr)?[n])
}

pub fn radial_term_bn(n: usize, omega: f64, cfg: &RadialConfig) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be > 0, got {omega}")));
    }
    radial_term(n, cfg.kr(omega))
}

/// `sum_{n=|m|}^{n_sum} b_n(kR) N_{n,m}(pi/2)^2` over the surviving parity.
pub fn mode_strength_sum_kr(m: i32, kr: f64, table: &EquatorFactorTable, truncation_order: usize) -> Result<Complex64> {
    let am = m.unsigned_abs() as usize;
    if truncation_order > table.max_order() {
        return Err(Error::Order(format!(
            "truncation order {truncation_order} exceeds equator table order {}",
            table.max_order()
        )));
    }
    if am > truncation_order {
        return Err(Error::Order(format!(
            "|m| = {am} above truncation order {truncation_order}"
        )));
    }
    let b = radial_terms(truncation_order, kr)?;
    Ok(strength_from_terms(am, &b, table, truncation_order))
}

fn strength_from_terms(am: usize, b: &[Complex64], table: &EquatorFactorTable, n_sum: usize) -> Complex64 {
    (am..=n_sum)
        .step_by(2)
        .map(|n| {
            let f = table.get(n, am as i32);
            b[n] * (f * f)
        })
        .sum()
}

pub fn mode_strength_sum(m: i32, omega: f64, table: &EquatorFactorTable, cfg: &RadialConfig) -> Result<Complex64> {
    if m.unsigned_abs() as usize > cfg.max_order {
        return Err(Error::Order(format!(
            "|m| = {} above max order {}",
            m.unsigned_abs(),
            cfg.max_order
        )));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("omega must be > 0, got {omega}")));
    }
    mode_strength_sum_kr(m, cfg.kr(omega), table, cfg.truncation_order)
}

/// Per-mode filter for one `|m|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFilter {
    /// Regularised response on bins `0..=fir_length/2`, delay not included.
    pub response: Vec<Complex64>,
    /// Real taps, `fir_length` long, delayed by the bank's modeling delay.
    pub fir: Vec<f64>,
    /// Bins whose regularisation attenuation exceeds [`LIMITED_THRESHOLD_DB`].
    pub limited: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EqualizationFilterBank {
    pub config: RadialConfig,
    /// Indexed by `|m|`.
    pub modes: Vec<ModeFilter>,
    pub modeling_delay: usize,
}

impl EqualizationFilterBank {
    /// Realises the given half-spectrum responses (one per `|m|`) through
    /// the same synthesis path as [`design_equalizers`].
    pub fn from_responses(
        config: RadialConfig,
        responses: Vec<Vec<Complex64>>,
        limited: Vec<Vec<bool>>,
    ) -> Result<Self> {
        let bins = config.bins();
        if responses.len() != config.max_order + 1 || limited.len() != responses.len() {
            return Err(Error::Shape(format!(
                "expected {} mode responses, got {}",
                config.max_order + 1,
                responses.len()
            )));
        }
        let modeling_delay = config.fir_length / 2;
        let modes = responses
            .into_iter()
            .zip(limited)
            .map(|(mut response, limited)| {
                if response.len() != bins || limited.len() != bins {
                    return Err(Error::Shape(format!("expected {bins} bins per response")));
                }
                dsp::enforce_hermitian(&mut response);
                let (fir, _) = dsp::synthesize_fir(&response, config.fir_length, modeling_delay);
                Ok(ModeFilter { response, fir, limited })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            modes,
            modeling_delay,
        })
    }

    pub fn mode(&self, m: i32) -> &ModeFilter {
        &self.modes[m.unsigned_abs() as usize]
    }

    /// Lowest frequency above which mode `|m|` is never regularised.
    pub fn mode_valid_from_hz(&self, m: i32) -> f64 {
        let f = self.mode(m);
        let last = f.limited.iter().rposition(|&l| l);
        match last {
            Some(k) => self.config.bin_frequency(k + 1),
            // bin 0 is DC and carries no information
            None => self.config.bin_frequency(1),
        }
    }

    /// Band `[lo, nyquist]` where no mode up to `order` is regularised.
    pub fn valid_band_hz(&self, order: usize) -> (f64, f64) {
        let lo = (0..=order.min(self.config.max_order))
            .map(|m| self.mode_valid_from_hz(m as i32))
            .fold(0.0, f64::max);
        (lo, self.config.sample_rate / 2.0)
    }
}

/// Regularised inverse `raw / (1 + (|raw| / (2 L))^2)`.
///
/// Its magnitude peaks at exactly `L` (where `|raw| = 2L`) and falls back to
/// zero as the raw inverse diverges, so the response approaches DC smoothly.
pub fn regularize(raw: Complex64, limit: f64) -> Complex64 {
    let u = raw.norm() / (2.0 * limit);
    raw / (1.0 + u * u)
}

fn attenuation_db(raw: Complex64, limit: f64) -> f64 {
    let u = raw.norm() / (2.0 * limit);
    20.0 * (1.0 + u * u).log10()
}

fn design_mode(am: usize, cfg: &RadialConfig, table: &EquatorFactorTable) -> Result<(Vec<Complex64>, Vec<bool>)> {
    let bins = cfg.bins();
    let mut raw = Vec::with_capacity(bins);
    raw.push(Complex64::new(0.0, 0.0));
    for k in 1..bins {
        let kr = cfg.kr(dsp::bin_omega(k, cfg.fir_length, cfg.sample_rate));
        let b = radial_terms(cfg.truncation_order, kr)?;
        let s = strength_from_terms(am, &b, table, cfg.truncation_order);
        if s == Complex64::new(0.0, 0.0) || !s.is_finite() {
            return Err(Error::Numerical(format!(
                "mode strength for |m| = {am} underflows at bin {k} ({:.3} Hz)",
                cfg.bin_frequency(k)
            )));
        }
        raw.push(recip(s));
    }
    let g_ref = raw[1..].iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min);
    let limit = 10f64.powf(cfg.max_gain_db / 20.0) * g_ref;

    let mut response = Vec::with_capacity(bins);
    let mut limited = Vec::with_capacity(bins);
    // DC: limit of the regularised response. Only |m| = 0 is nonzero there,
    // where the mode strength tends to b_0(0) N_00^2 = 1.
    response.push(if am == 0 {
        regularize(Complex64::new(1.0, 0.0), limit)
    } else {
        Complex64::new(0.0, 0.0)
    });
    limited.push(am != 0);
    for &r in &raw[1..] {
        response.push(regularize(r, limit));
        limited.push(attenuation_db(r, limit) > LIMITED_THRESHOLD_DB);
    }
    Ok((response, limited))
}

pub fn design_equalizers(cfg: &RadialConfig, table: &EquatorFactorTable) -> Result<EqualizationFilterBank> {
    cfg.validate()?;
    if table.max_order() < cfg.truncation_order {
        return Err(Error::Config(format!(
            "equator table order {} below truncation order {}",
            table.max_order(),
            cfg.truncation_order
        )));
    }
    let designed = (0..=cfg.max_order)
        .into_par_iter()
        .map(|am| design_mode(am, cfg, table))
        .collect::<Result<Vec<_>>>()?;
    let (responses, limited) = designed.into_iter().unzip();
    EqualizationFilterBank::from_responses(cfg.clone(), responses, limited)
}
