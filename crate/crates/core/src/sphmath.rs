//! Scalar special functions: associated Legendre functions (with the
//! Condon–Shortley phase), spherical Bessel functions of both kinds and the
//! spherical Hankel functions built from them.
//!
//! Spherical Bessel functions of the first kind use upward recurrence only
//! while `x > n`; otherwise the sequence is generated downward from a
//! continued-fraction estimate of `j_n / j_{n-1}` (Miller's algorithm) and
//! normalised against the closed forms of `j_0` / `j_1`. The second kind is
//! the dominant solution and is always recursed upward; beyond double range
//! it saturates to `-inf`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Highest degree accepted by the Bessel/Legendre kernels.
///
/// Large enough for the plane-wave simulator, which needs `ceil(kR_max) + 30`
/// terms at 48 kHz (69 for a head-sized sphere) and twice that in its
/// convergence checks.
pub const MAX_DEGREE: usize = 256;

fn check_degree(n: usize) -> Result<()> {
    if n > MAX_DEGREE {
        return Err(Error::Cap {
            requested: n,
            cap: MAX_DEGREE,
        });
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu.abs() <= 1.0) {
        return Err(Error::Domain(format!("|mu| must be <= 1, got {mu}")));
    }
    Ok(())
}

/// Associated Legendre function `P_n^m(mu)` including the `(-1)^m`
/// Condon–Shortley factor, i.e. `P_1^1(mu) = -(1 - mu^2)^{1/2}`.
///
/// Evaluated by the three-term recurrence in `n` seeded with the closed form
/// of `P_m^m`. Negative indices are unrepresentable by construction.
pub fn assoc_legendre(n: usize, m: usize, mu: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!(
            "associated Legendre needs m <= n, got n={n}, m={m}"
        )));
    }
    check_mu(mu)?;
    check_degree(n)?;

    let s = ((1.0 - mu) * (1.0 + mu)).sqrt();
    // P_m^m = (-1)^m (2m-1)!! s^m
    let mut pmm = 1.0;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * s;
    }
    if n == m {
        return Ok(pmm);
    }
    let mut p_prev = pmm;
    let mut p = mu * (2 * m + 1) as f64 * pmm;
    for l in (m + 2)..=n {
        let next = (mu * (2 * l - 1) as f64 * p - (l + m - 1) as f64 * p_prev) / (l - m) as f64;
        p_prev = p;
        p = next;
    }
    Ok(p)
}

/// Orthonormalised associated Legendre function
/// `sqrt((2n+1)/(4 pi) * (n-m)!/(n+m)!) * P_n^m(mu)`, Condon–Shortley phase
/// included.
///
/// Uses the normalised recurrence, so it stays finite for every degree up to
/// [`MAX_DEGREE`] where the unnormalised `P_n^m` would overflow.
pub fn assoc_legendre_normalized(n: usize, m: usize, mu: f64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!(
            "associated Legendre needs m <= n, got n={n}, m={m}"
        )));
    }
    check_mu(mu)?;
    check_degree(n)?;

    let s = ((1.0 - mu) * (1.0 + mu)).sqrt();
    let mut pmm = (0.25 / std::f64::consts::PI).sqrt();
    for k in 1..=m {
        let kf = k as f64;
        pmm *= -((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    if n == m {
        return Ok(pmm);
    }
    let mf = m as f64;
    let mut p_prev = pmm;
    let mut p = mu * (2.0 * mf + 3.0).sqrt() * pmm;
    for l in (m + 2)..=n {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lm1 = lf - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let next = a * (mu * p - b * p_prev);
        p_prev = p;
        p = next;
    }
    Ok(p)
}

const RESCALE_LIMIT: f64 = 1e250;

/// `j_n(x) / j_{n-1}(x)` from the continued fraction
/// `1 / ((2n+1)/x - 1 / ((2n+3)/x - ...))` via modified Lentz.
fn bessel_j_ratio(n: usize, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let b = |k: usize| (2 * (n + k) + 1) as f64 / x;
    let mut f = b(0);
    if f == 0.0 {
        f = TINY;
    }
    let mut c = f;
    let mut d = 0.0;
    for k in 1..100_000 {
        let bk = b(k);
        d = bk - d;
        if d == 0.0 {
            d = TINY;
        }
        c = bk - 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / f
}

fn j0_closed(x: f64) -> f64 {
    x.sin() / x
}

fn j1_closed(x: f64) -> f64 {
    x.sin() / (x * x) - x.cos() / x
}

/// `j_0(x) ..= j_{n_max}(x)` for `x >= 0`.
pub fn sph_bessel_j_seq(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "spherical Bessel j needs finite x >= 0, got {x}"
        )));
    }
    check_degree(n_max)?;
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return Ok(out);
    }
    out[0] = j0_closed(x);
    if n_max == 0 {
        return Ok(out);
    }
    out[1] = j1_closed(x);
    if x > n_max as f64 {
        for k in 1..n_max {
            out[k + 1] = (2 * k + 1) as f64 / x * out[k] - out[k - 1];
        }
        return Ok(out);
    }

    // Miller: unnormalised values f_k proportional to j_k, recursed downward.
    let mut f = vec![0.0; n_max + 1];
    f[n_max] = 1.0;
    f[n_max - 1] = 1.0 / bessel_j_ratio(n_max, x);
    for k in (1..n_max).rev() {
        let next = (2 * k + 1) as f64 / x * f[k] - f[k + 1];
        f[k - 1] = next;
        if next.abs() > RESCALE_LIMIT {
            for v in f[k - 1..].iter_mut() {
                *v /= RESCALE_LIMIT;
            }
        }
    }
    // Normalise against whichever closed form is further from a zero.
    let scale = if out[0].abs() >= out[1].abs() {
        out[0] / f[0]
    } else {
        out[1] / f[1]
    };
    for k in 2..=n_max {
        out[k] = f[k] * scale;
    }
    Ok(out)
}

/// `y_0(x) ..= y_{n_max}(x)` for `x > 0` by upward recurrence.
pub fn sph_bessel_y_seq(n_max: usize, x: f64) -> Result<Vec<f64>> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("spherical Bessel y needs finite x > 0, got {x}")));
    }
    check_degree(n_max)?;
    let mut out = vec![0.0; n_max + 1];
    out[0] = -x.cos() / x;
    if n_max >= 1 {
        out[1] = -x.cos() / (x * x) - x.sin() / x;
    }
    for k in 1..n_max {
        out[k + 1] = if out[k].is_finite() {
            (2 * k + 1) as f64 / x * out[k] - out[k - 1]
        } else {
            out[k]
        };
    }
    Ok(out)
}

/// Spherical Bessel function of the first kind; `j_n(0)` is `1` for `n = 0`
/// and `0` otherwise.
pub fn sph_bessel_j(n: usize, x: f64) -> Result<f64> {
    Ok(sph_bessel_j_seq(n, x)?[n])
}

pub fn sph_bessel_y(n: usize, x: f64) -> Result<f64> {
    Ok(sph_bessel_y_seq(n, x)?[n])
}

/// Derivative of `j_n` via `j'_n = (n j_{n-1} - (n+1) j_{n+1}) / (2n+1)`.
pub fn sph_bessel_j_deriv(n: usize, x: f64) -> Result<f64> {
    let j = sph_bessel_j_seq(n + 1, x)?;
    if n == 0 {
        return Ok(-j[1]);
    }
    Ok((n as f64 * j[n - 1] - (n + 1) as f64 * j[n + 1]) / (2 * n + 1) as f64)
}

pub fn sph_bessel_y_deriv(n: usize, x: f64) -> Result<f64> {
    let y = sph_bessel_y_seq(n + 1, x)?;
    if n == 0 {
        return Ok(-y[1]);
    }
    Ok(y[n - 1] - (n + 1) as f64 / x * y[n])
}

fn check_hankel_arg(x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!(
            "spherical Hankel functions are singular at x <= 0, got {x}"
        )));
    }
    Ok(())
}

/// `h^(2)_0(x) ..= h^(2)_{n_max}(x)` with `h^(2)_n = j_n - i y_n`.
pub fn sph_hankel2_seq(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    check_hankel_arg(x)?;
    let j = sph_bessel_j_seq(n_max, x)?;
    let y = sph_bessel_y_seq(n_max, x)?;
    Ok(j.iter().zip(&y).map(|(&jn, &yn)| Complex64::new(jn, -yn)).collect())
}

/// Derivatives `h'^(2)_0(x) ..= h'^(2)_{n_max}(x)` from
/// `h'_n = h_{n-1} - (n+1)/x h_n` and `h'_0 = -h_1`.
pub fn sph_hankel2_deriv_seq(n_max: usize, x: f64) -> Result<Vec<Complex64>> {
    let h = sph_hankel2_seq(n_max.max(1), x)?;
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(-h[1]);
    for n in 1..=n_max {
        let mut d = h[n - 1] - h[n] * ((n + 1) as f64 / x);
        if !h[n].im.is_finite() {
            // y_n overflowed; y'_n has the opposite sign and is larger still
            d.im = -h[n].im;
        }
        out.push(d);
    }
    Ok(out)
}

pub fn sph_hankel2(n: usize, x: f64) -> Result<Complex64> {
    Ok(sph_hankel2_seq(n, x)?[n])
}

pub fn sph_hankel2_deriv(n: usize, x: f64) -> Result<Complex64> {
    Ok(sph_hankel2_deriv_seq(n, x)?[n])
}

/// `h^(1)_n = j_n + i y_n`, the outgoing-wave solution under the opposite
/// time convention.
pub fn sph_hankel1(n: usize, x: f64) -> Result<Complex64> {
    check_hankel_arg(x)?;
    Ok(Complex64::new(sph_bessel_j(n, x)?, sph_bessel_y(n, x)?))
}
