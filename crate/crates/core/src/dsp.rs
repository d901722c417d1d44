//! FFT plumbing shared by filter design, simulation and rendering.
//!
//! Forward transforms use the negative exponent; inverse transforms carry the
//! `1/L` factor. Half spectra hold bins `0..=L/2`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Forward FFT of a real signal zero-padded (or truncated) to `fft_len`,
/// returning the positive-frequency half.
pub fn rfft(signal: &[f64], fft_len: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..fft_len)
        .map(|i| Complex64::new(signal.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(fft_len).process(&mut buf);
    buf.truncate(fft_len / 2 + 1);
    buf
}

/// Inverse of [`rfft`] for an even `fft_len`.
///
/// The imaginary parts of the DC and Nyquist bins are ignored, which is the
/// Hermitian extension of the half spectrum. Returns the real signal and the
/// largest imaginary residue of the inverse transform.
pub fn irfft(half: &[Complex64], fft_len: usize) -> (Vec<f64>, f64) {
    assert!(fft_len >= 2 && fft_len.is_multiple_of(2), "fft length must be even");
    assert_eq!(half.len(), fft_len / 2 + 1, "half spectrum length");
    let mut full = vec![Complex64::new(0.0, 0.0); fft_len];
    full[0] = Complex64::new(half[0].re, 0.0);
    full[fft_len / 2] = Complex64::new(half[fft_len / 2].re, 0.0);
    for k in 1..fft_len / 2 {
        full[k] = half[k];
        full[fft_len - k] = half[k].conj();
    }
    FftPlanner::new().plan_fft_inverse(fft_len).process(&mut full);
    let scale = 1.0 / fft_len as f64;
    let residue = full.iter().fold(0.0f64, |acc, c| acc.max(c.im.abs())) * scale;
    (full.iter().map(|c| c.re * scale).collect(), residue)
}

/// Realises a half-spectrum frequency response as a real FIR of length
/// `fft_len`, circularly delayed by `delay` samples.
///
/// Returns the taps and the imaginary residue relative to the peak tap.
pub fn synthesize_fir(half: &[Complex64], fft_len: usize, delay: usize) -> (Vec<f64>, f64) {
    let (h, residue) = irfft(half, fft_len);
    let mut taps = vec![0.0; fft_len];
    for (t, v) in h.into_iter().enumerate() {
        taps[(t + delay) % fft_len] = v;
    }
    let peak = taps.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let rel = if peak > 0.0 { residue / peak } else { residue };
    (taps, rel)
}

/// Forces DC and Nyquist bins real so the half spectrum is a valid
/// Hermitian-symmetric real-signal spectrum.
pub fn enforce_hermitian(half: &mut [Complex64]) {
    if let Some(dc) = half.first_mut() {
        dc.im = 0.0;
    }
    if let Some(ny) = half.last_mut() {
        ny.im = 0.0;
    }
}

/// Angular frequency of bin `k` for an `fft_len`-point transform.
pub fn bin_omega(k: usize, fft_len: usize, sample_rate: f64) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 * sample_rate / fft_len as f64
}

/// Linear convolution by overlap-save.
///
/// The FFT block is the smallest power of two holding at least twice the
/// filter, so each block yields `block - taps + 1` output samples.
pub struct Convolver {
    taps: usize,
    block: usize,
    spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Convolver {
    pub fn new(fir: &[f64]) -> Result<Self> {
        if fir.is_empty() {
            return Err(Error::Shape("empty filter".into()));
        }
        let block = (2 * fir.len()).next_power_of_two().max(64);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(block);
        let inverse = planner.plan_fft_inverse(block);
        let mut spectrum: Vec<Complex64> = (0..block)
            .map(|i| Complex64::new(fir.get(i).copied().unwrap_or(0.0), 0.0))
            .collect();
        forward.process(&mut spectrum);
        let scale = 1.0 / block as f64;
        for s in spectrum.iter_mut() {
            *s *= scale;
        }
        Ok(Self {
            taps: fir.len(),
            block,
            spectrum,
            forward,
            inverse,
        })
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Full linear convolution, `input.len() + taps - 1` samples.
    pub fn convolve(&self, input: &[f64]) -> Vec<f64> {
        if input.is_empty() {
            return Vec::new();
        }
        let out_len = input.len() + self.taps - 1;
        let overlap = self.taps - 1;
        let hop = self.block - overlap;
        let mut out = Vec::with_capacity(out_len + hop);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.block];
        // padded input index p corresponds to input[p - overlap]
        let mut start = 0usize;
        while out.len() < out_len {
            for (i, b) in buf.iter_mut().enumerate() {
                let p = start + i;
                let v = if p >= overlap {
                    input.get(p - overlap).copied().unwrap_or(0.0)
                } else {
                    0.0
                };
                *b = Complex64::new(v, 0.0);
            }
            self.forward.process(&mut buf);
            for (b, h) in buf.iter_mut().zip(&self.spectrum) {
                *b *= h;
            }
            self.inverse.process(&mut buf);
            out.extend(buf[overlap..].iter().map(|c| c.re));
            start += hop;
        }
        out.truncate(out_len);
        out
    }
}
