//! Binaural rendering from spherical-harmonic HRTF coefficients.
//!
//! Each ear signal is `sum_{n,m} S_{n,m} * h_{n,m}`, where `h_{n,m}` is the
//! real FIR realisation of the HRTF coefficient `H_{n,m}(omega)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dsp::{self, Convolver};
use crate::encoder::{AmbisonicSignalSet, DelayHandling};
use crate::error::{Error, Result};
use crate::harmonics::{channel_count, sh_indices, sh_vector, MAX_AMBISONIC_ORDER};
use crate::radial::radial_terms;

/// Largest accepted condition number of the direction/SH matrix.
pub const MAX_CONDITION_NUMBER: f64 = 1e6;

/// Sphere radius of [`analytic_test_hrtf`], m.
pub const TEST_HEAD_RADIUS: f64 = 0.0875;
pub const TEST_SPEED_OF_SOUND: f64 = 343.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ear {
    Left,
    Right,
}

/// SH coefficients of a left/right HRTF pair on the bins `0..=fft_length/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfShSet {
    pub order: usize,
    pub sample_rate: f64,
    pub fft_length: usize,
    /// ACN-indexed, one half spectrum per coefficient.
    pub left: Vec<Vec<Complex64>>,
    pub right: Vec<Vec<Complex64>>,
}

impl HrtfShSet {
    pub fn new(
        order: usize,
        sample_rate: f64,
        fft_length: usize,
        left: Vec<Vec<Complex64>>,
        right: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        if fft_length < 2 || !fft_length.is_multiple_of(2) {
            return Err(Error::Config(format!("HRTF FFT length must be even, got {fft_length}")));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let c = channel_count(order);
        let bins = fft_length / 2 + 1;
        for (name, ear) in [("left", &left), ("right", &right)] {
            if ear.len() != c {
                return Err(Error::Shape(format!(
                    "{name} ear has {} coefficients, order {order} needs {c}",
                    ear.len()
                )));
            }
            if ear.iter().any(|r| r.len() != bins) {
                return Err(Error::Shape(format!("{name} ear responses must have {bins} bins")));
            }
        }
        Ok(Self {
            order,
            sample_rate,
            fft_length,
            left,
            right,
        })
    }

    pub fn bins(&self) -> usize {
        self.fft_length / 2 + 1
    }

    pub fn ear(&self, ear: Ear) -> &[Vec<Complex64>] {
        match ear {
            Ear::Left => &self.left,
            Ear::Right => &self.right,
        }
    }

    /// The first `(order + 1)^2` coefficients.
    pub fn truncated(&self, order: usize) -> Result<Self> {
        if order > self.order {
            return Err(Error::Order(format!(
                "cannot truncate an order-{} HRTF set to order {order}",
                self.order
            )));
        }
        let c = channel_count(order);
        Self::new(
            order,
            self.sample_rate,
            self.fft_length,
            self.left[..c].to_vec(),
            self.right[..c].to_vec(),
        )
    }

    /// `sum_c H_c Y_c(beta, alpha)` for one ear.
    pub fn evaluate(&self, ear: Ear, beta: f64, alpha: f64) -> Result<Vec<Complex64>> {
        let y = sh_vector(self.order, beta, alpha)?;
        let coeffs = self.ear(ear);
        Ok((0..self.bins())
            .map(|k| coeffs.iter().zip(&y).map(|(h, &w)| h[k] * w).sum())
            .collect())
    }
}

/// HRIRs measured (or sampled) on a set of directions.
#[derive(Debug, Clone, PartialEq)]
pub struct HrtfGrid {
    /// `(colatitude, azimuth)` in radians.
    pub directions: Vec<(f64, f64)>,
    pub left: Vec<Vec<f64>>,
    pub right: Vec<Vec<f64>>,
    pub sample_rate: f64,
}

impl HrtfGrid {
    pub fn new(
        directions: Vec<(f64, f64)>,
        left: Vec<Vec<f64>>,
        right: Vec<Vec<f64>>,
        sample_rate: f64,
    ) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Shape("HRTF grid has no directions".into()));
        }
        if left.len() != directions.len() || right.len() != directions.len() {
            return Err(Error::Shape(format!(
                "{} directions but {} left / {} right responses",
                directions.len(),
                left.len(),
                right.len()
            )));
        }
        let len = left[0].len();
        if len < 2 || left.iter().chain(&right).any(|h| h.len() != len) {
            return Err(Error::Shape("all HRIRs must share one length of at least 2".into()));
        }
        if directions.iter().any(|(b, a)| !b.is_finite() || !a.is_finite()) {
            return Err(Error::Shape("HRTF directions must be finite".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        Ok(Self {
            directions,
            left,
            right,
            sample_rate,
        })
    }

    pub fn ir_length(&self) -> usize {
        self.left[0].len()
    }
}

/// Least-squares SH coefficients of a grid and the per-bin relative residuals
/// `|Y c - H| / |H|` of each ear.
#[derive(Debug, Clone, PartialEq)]
pub struct ShTransformResult {
    pub set: HrtfShSet,
    pub residual_left: Vec<f64>,
    pub residual_right: Vec<f64>,
    pub condition_number: f64,
}

fn unit_vector(beta: f64, alpha: f64) -> [f64; 3] {
    [beta.sin() * alpha.cos(), beta.sin() * alpha.sin(), beta.cos()]
}

fn check_distinct(directions: &[(f64, f64)]) -> Result<()> {
    let v: Vec<[f64; 3]> = directions.iter().map(|&(b, a)| unit_vector(b, a)).collect();
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let d2: f64 = (0..3).map(|k| (v[i][k] - v[j][k]).powi(2)).sum();
            if d2 < 1e-18 {
                return Err(Error::Conditioning(format!("directions {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

/// Per-bin least-squares inversion of the SH expansion over the grid.
pub fn hrtf_sh_transform(grid: &HrtfGrid, order: usize) -> Result<ShTransformResult> {
    if order > MAX_AMBISONIC_ORDER {
        return Err(Error::Cap {
            requested: order,
            cap: MAX_AMBISONIC_ORDER,
        });
    }
    let c = channel_count(order);
    let d = grid.directions.len();
    if d < c {
        return Err(Error::Conditioning(format!(
            "{d} directions cannot determine {c} coefficients of order {order}"
        )));
    }
    check_distinct(&grid.directions)?;

    let rows = grid
        .directions
        .iter()
        .map(|&(b, a)| sh_vector(order, b, a))
        .collect::<Result<Vec<_>>>()?;
    let y = DMatrix::from_fn(d, c, |i, j| rows[i][j]);
    let svd = y.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition_number > MAX_CONDITION_NUMBER {
        return Err(Error::Conditioning(format!(
            "SH matrix condition number {condition_number:.3e} exceeds {MAX_CONDITION_NUMBER:e}"
        )));
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| Error::Numerical(format!("pseudo-inverse failed: {e}")))?;

    let fft_length = grid.ir_length().next_power_of_two().max(2);
    let bins = fft_length / 2 + 1;
    let fit = |irs: &[Vec<f64>]| -> (Vec<Vec<Complex64>>, Vec<f64>) {
        let spectra: Vec<Vec<Complex64>> = irs.par_iter().map(|h| dsp::rfft(h, fft_length)).collect();
        let coeffs: Vec<Vec<Complex64>> = (0..c)
            .map(|j| {
                (0..bins)
                    .map(|k| (0..d).map(|i| spectra[i][k] * pinv[(j, i)]).sum())
                    .collect()
            })
            .collect();
        let residual = (0..bins)
            .map(|k| {
                let mut err = 0.0;
                let mut norm = 0.0;
                for i in 0..d {
                    let model: Complex64 = (0..c).map(|j| coeffs[j][k] * y[(i, j)]).sum();
                    err += (model - spectra[i][k]).norm_sqr();
                    norm += spectra[i][k].norm_sqr();
                }
                if norm > 0.0 {
                    (err / norm).sqrt()
                } else {
                    err.sqrt()
                }
            })
            .collect();
        (coeffs, residual)
    };
    let (left, residual_left) = fit(&grid.left);
    let (right, residual_right) = fit(&grid.right);
    Ok(ShTransformResult {
        set: HrtfShSet::new(order, grid.sample_rate, fft_length, left, right)?,
        residual_left,
        residual_right,
        condition_number,
    })
}

/// Samples the set on `directions` and realises each response as an
/// `fft_length`-sample impulse response (no added delay).
pub fn sample_grid(set: &HrtfShSet, directions: &[(f64, f64)]) -> Result<HrtfGrid> {
    let realise = |ear: Ear| -> Result<Vec<Vec<f64>>> {
        directions
            .iter()
            .map(|&(b, a)| Ok(dsp::irfft(&set.evaluate(ear, b, a)?, set.fft_length).0))
            .collect()
    };
    HrtfGrid::new(
        directions.to_vec(),
        realise(Ear::Left)?,
        realise(Ear::Right)?,
        set.sample_rate,
    )
}

/// `count` quasi-uniform directions on a golden-angle spiral.
pub fn spiral_directions(count: usize) -> Vec<(f64, f64)> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2 * i + 1) as f64 / count as f64;
            let a = (golden * i as f64).rem_euclid(2.0 * std::f64::consts::PI);
            (z.acos(), a)
        })
        .collect()
}

fn check_fft_length(fft_length: usize, sample_rate: f64) -> Result<()> {
    if fft_length < 2 || !fft_length.is_power_of_two() {
        return Err(Error::Config(format!(
            "FFT length must be a power of two, got {fft_length}"
        )));
    }
    if !(sample_rate > 0.0 && sample_rate.is_finite()) {
        return Err(Error::Config(format!(
            "sample rate must be positive, got {sample_rate}"
        )));
    }
    Ok(())
}

/// Rigid-sphere pressure at the two equator points `alpha = +-pi/2` as
/// pseudo-ears: `H_{n,m} = b_n(kR) Y_{n,m}(pi/2, +-pi/2)`.
///
/// The DC bin is the `kR -> 0` limit (`sqrt(4 pi)` in the omni term, zero
/// elsewhere) and the Nyquist bin keeps its real part.
pub fn analytic_test_hrtf(order: usize, sample_rate: f64, fft_length: usize) -> Result<HrtfShSet> {
    check_fft_length(fft_length, sample_rate)?;
    if order > MAX_AMBISONIC_ORDER {
        return Err(Error::Cap {
            requested: order,
            cap: MAX_AMBISONIC_ORDER,
        });
    }
    let half_pi = std::f64::consts::FRAC_PI_2;
    let y_left = sh_vector(order, half_pi, half_pi)?;
    let y_right = sh_vector(order, half_pi, -half_pi)?;
    let bins = fft_length / 2 + 1;
    let b_per_bin = (0..bins)
        .map(|k| {
            if k == 0 {
                let mut b = vec![Complex64::new(0.0, 0.0); order + 1];
                b[0] = Complex64::new(4.0 * std::f64::consts::PI, 0.0);
                return Ok(b);
            }
            let kr = dsp::bin_omega(k, fft_length, sample_rate) * TEST_HEAD_RADIUS / TEST_SPEED_OF_SOUND;
            let mut b = radial_terms(order, kr)?;
            if k == bins - 1 {
                b.iter_mut().for_each(|v| v.im = 0.0);
            }
            Ok(b)
        })
        .collect::<Result<Vec<_>>>()?;
    let build = |y: &[f64]| -> Vec<Vec<Complex64>> {
        sh_indices(order)
            .zip(y)
            .map(|(ix, &w)| b_per_bin.iter().map(|b| b[ix.n] * w).collect())
            .collect()
    };
    HrtfShSet::new(order, sample_rate, fft_length, build(&y_left), build(&y_right))
}

/// `H_{0,0} = sqrt(4 pi)` for both ears, all other coefficients zero: each
/// ear hears the pressure at the sphere centre.
pub fn omnidirectional_hrtf(order: usize, sample_rate: f64, fft_length: usize) -> Result<HrtfShSet> {
    check_fft_length(fft_length, sample_rate)?;
    let bins = fft_length / 2 + 1;
    let mut coeffs = vec![vec![Complex64::new(0.0, 0.0); bins]; channel_count(order)];
    coeffs[0] = vec![Complex64::new((4.0 * std::f64::consts::PI).sqrt(), 0.0); bins];
    HrtfShSet::new(order, sample_rate, fft_length, coeffs.clone(), coeffs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinauralSignals {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
    pub sample_rate: f64,
    /// Order actually rendered.
    pub order: usize,
    /// Shared modeling delay of the coefficient filters, samples.
    pub modeling_delay: usize,
}

/// Renders ambisonic signals to two ears.
///
/// The rendering order is the smaller of the two orders. Per ear the
/// channel contributions are summed in ascending ACN order.
pub fn render_binaural(ambi: &AmbisonicSignalSet, hrtf: &HrtfShSet, delay: DelayHandling) -> Result<BinauralSignals> {
    if (ambi.sample_rate - hrtf.sample_rate).abs() > 1e-9 * hrtf.sample_rate {
        return Err(Error::Mismatch(format!(
            "ambisonic signals at {} Hz, HRTF set at {} Hz",
            ambi.sample_rate, hrtf.sample_rate
        )));
    }
    let order = ambi.order.min(hrtf.order);
    if ambi.order != hrtf.order {
        log::warn!(
            "ambisonic order {} and HRTF order {} differ, rendering at order {order}",
            ambi.order,
            hrtf.order
        );
    }
    let c = channel_count(order);
    let len = ambi.len();
    let d = hrtf.fft_length / 2;
    let out_len = match delay {
        DelayHandling::Keep => len + hrtf.fft_length - 1,
        DelayHandling::Compensate => len,
    };

    let render_ear = |coeffs: &[Vec<Complex64>]| -> Result<Vec<f64>> {
        let parts = (0..c)
            .into_par_iter()
            .map(|j| {
                let x = &ambi.channels[j];
                if x.iter().all(|&v| v == 0.0) || coeffs[j].iter().all(|h| h.norm() == 0.0) {
                    return Ok(None);
                }
                let mut h = coeffs[j].clone();
                dsp::enforce_hermitian(&mut h);
                let (fir, _) = dsp::synthesize_fir(&h, hrtf.fft_length, d);
                Ok(Some(Convolver::new(&fir)?.convolve(x)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; out_len];
        let offset = match delay {
            DelayHandling::Keep => 0,
            DelayHandling::Compensate => d,
        };
        for part in parts.into_iter().flatten() {
            for (t, o) in out.iter_mut().enumerate() {
                if let Some(v) = part.get(t + offset) {
                    *o += v;
                }
            }
        }
        Ok(out)
    };

    Ok(BinauralSignals {
        left: render_ear(&hrtf.left)?,
        right: render_ear(&hrtf.right)?,
        sample_rate: ambi.sample_rate,
        order,
        modeling_delay: d,
    })
}
