//! Real circular and spherical harmonics, equator factors and ACN indexing.
//!
//! `Y_{n,m}(beta, alpha) = N_{n,m}(beta) C_m(alpha)` is the orthonormal
//! (N3D) real basis; negative `m` selects the sine family.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphmath::{self, MAX_DEGREE};

/// Highest ambisonic order accepted by encoder, renderer and filter design.
pub const MAX_AMBISONIC_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ShIndex {
    pub n: usize,
    pub m: i32,
}

impl ShIndex {
    pub fn new(n: usize, m: i32) -> Result<Self> {
        check_index(n, m)?;
        Ok(Self { n, m })
    }

    pub fn acn(self) -> usize {
        ((self.n * self.n + self.n) as isize + self.m as isize) as usize
    }

    /// `n + |m|` odd: the harmonic vanishes on the equator.
    pub fn is_equator_null(self) -> bool {
        (self.n + self.m.unsigned_abs() as usize) % 2 == 1
    }
}

fn check_index(n: usize, m: i32) -> Result<()> {
    if m.unsigned_abs() as usize > n {
        return Err(Error::Index {
            n: n as i64,
            m: m as i64,
        });
    }
    Ok(())
}

/// Number of channels of an order-`order` set, `(N+1)^2`.
pub fn channel_count(order: usize) -> usize {
    (order + 1) * (order + 1)
}

/// All `(n, m)` up to `order` in ACN order.
pub fn sh_indices(order: usize) -> impl Iterator<Item = ShIndex> {
    (0..=order).flat_map(|n| (-(n as i32)..=n as i32).map(move |m| ShIndex { n, m }))
}

pub fn circular_harmonic(m: i32, alpha: f64) -> f64 {
    match m {
        0 => 1.0,
        m if m < 0 => SQRT_2 * (m.unsigned_abs() as f64 * alpha).sin(),
        m => SQRT_2 * (m as f64 * alpha).cos(),
    }
}

/// `N_{n,m}(beta) = (-1)^m sqrt((2n+1)/(4 pi) (n-|m|)!/(n+|m|)!) P_n^{|m|}(cos beta)`.
///
/// `beta == pi/2` is evaluated at `cos beta = 0` exactly, so equator parity
/// zeros come out as literal zeros.
pub fn n_factor(n: usize, m: i32, beta: f64) -> Result<f64> {
    check_index(n, m)?;
    let mu = if beta == FRAC_PI_2 {
        0.0
    } else {
        beta.cos().clamp(-1.0, 1.0)
    };
    let am = m.unsigned_abs() as usize;
    let sign = if am.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sign * sphmath::assoc_legendre_normalized(n, am, mu)?)
}

pub fn sph_harmonic(n: usize, m: i32, beta: f64, alpha: f64) -> Result<f64> {
    Ok(n_factor(n, m, beta)? * circular_harmonic(m, alpha))
}

/// All `Y_{n,m}(beta, alpha)` up to `order`, ACN-ordered.
pub fn sh_vector(order: usize, beta: f64, alpha: f64) -> Result<Vec<f64>> {
    sh_indices(order)
        .map(|ix| sph_harmonic(ix.n, ix.m, beta, alpha))
        .collect()
}

pub fn acn(n: usize, m: i32) -> Result<usize> {
    Ok(ShIndex::new(n, m)?.acn())
}

pub fn acn_inverse(channel: usize) -> ShIndex {
    let mut n = (channel as f64).sqrt() as usize;
    // guard the float sqrt at perfect squares
    while n * n > channel {
        n -= 1;
    }
    while (n + 1) * (n + 1) <= channel {
        n += 1;
    }
    let m = channel as i64 - (n * n + n) as i64;
    ShIndex { n, m: m as i32 }
}

/// `N_{n,m}(pi/2)` for every `|m| <= n <= max_order`, stored in ACN layout.
#[derive(Debug, Clone, PartialEq)]
pub struct EquatorFactorTable {
    max_order: usize,
    values: Vec<f64>,
}

impl EquatorFactorTable {
    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// # Panics
    /// If `(n, m)` is not covered by the table.
    pub fn get(&self, n: usize, m: i32) -> f64 {
        assert!(
            n <= self.max_order && m.unsigned_abs() as usize <= n,
            "({n}, {m}) outside equator table of order {}",
            self.max_order
        );
        self.values[((n * n + n) as isize + m as isize) as usize]
    }

    pub fn try_get(&self, n: usize, m: i32) -> Result<f64> {
        check_index(n, m)?;
        if n > self.max_order {
            return Err(Error::Order(format!(
                "degree {n} outside equator table of order {}",
                self.max_order
            )));
        }
        Ok(self.get(n, m))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

pub fn equator_table(max_order: usize) -> Result<EquatorFactorTable> {
    if max_order > MAX_DEGREE {
        return Err(Error::Cap {
            requested: max_order,
            cap: MAX_DEGREE,
        });
    }
    let values = sh_indices(max_order)
        .map(|ix| {
            if ix.is_equator_null() {
                Ok(0.0)
            } else {
                n_factor(ix.n, ix.m, FRAC_PI_2)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EquatorFactorTable { max_order, values })
}

/// `Y_{0,0}`, the omnidirectional harmonic.
pub fn y00() -> f64 {
    (0.25 / PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    #[allow(clippy::approx_constant)]
    fn circular_examples() {
        assert_eq!(circular_harmonic(0, 1.234), 1.0);
        assert_relative_eq!(circular_harmonic(2, 0.0), 1.41421356, epsilon = 1e-8);
        assert_relative_eq!(circular_harmonic(-1, FRAC_PI_2), SQRT_2);
        assert!(circular_harmonic(3, PI / 6.0).abs() < 1e-15);
    }

    #[test]
    fn n_factor_examples() {
        assert_relative_eq!(
            n_factor(0, 0, FRAC_PI_2).unwrap(),
            1.0 / (4.0 * PI).sqrt(),
            epsilon = 1e-15
        );
        assert_relative_eq!(n_factor(0, 0, FRAC_PI_2).unwrap(), 0.28209479, epsilon = 1e-8);
        assert_eq!(n_factor(1, 0, FRAC_PI_2).unwrap(), 0.0);
        let expect = -(3.0 / (4.0 * PI) * 0.5).sqrt() * -1.0;
        assert_relative_eq!(n_factor(1, 1, FRAC_PI_2).unwrap(), expect, epsilon = 1e-15);
        assert_relative_eq!(expect, 0.34549414, epsilon = 1e-8);
        assert!(matches!(n_factor(1, 2, 0.3), Err(Error::Index { .. })));
    }

    #[test]
    fn n_factor_direct_formula() {
        // factorial ratio from two factorials is fine at these degrees
        let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
        for n in 0..=10usize {
            for m in -(n as i32)..=n as i32 {
                let am = m.unsigned_abs() as usize;
                for &beta in &[0.3, 1.1, 2.5] {
                    let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    let expect = sign
                        * ((2 * n + 1) as f64 / (4.0 * PI) * fact(n - am) / fact(n + am)).sqrt()
                        * sphmath::assoc_legendre(n, am, f64::cos(beta)).unwrap();
                    let got = n_factor(n, m, beta).unwrap();
                    assert!((got - expect).abs() < 1e-13, "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn sph_harmonic_examples() {
        assert_relative_eq!(sph_harmonic(0, 0, 0.7, 2.0).unwrap(), 0.28209479, epsilon = 1e-8);
        assert_relative_eq!(sph_harmonic(1, 1, FRAC_PI_2, 0.0).unwrap(), 0.48860251, epsilon = 1e-8);
        assert_relative_eq!(
            sph_harmonic(1, 1, FRAC_PI_2, 0.0).unwrap(),
            n_factor(1, 1, FRAC_PI_2).unwrap() * SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(sph_harmonic(2, -1, FRAC_PI_2, 0.77).unwrap(), 0.0);
    }

    #[test]
    fn table_examples() {
        let t0 = equator_table(0).unwrap();
        assert_eq!(t0.values().len(), 1);
        assert_relative_eq!(t0.get(0, 0), 0.28209479, epsilon = 1e-8);

        let t2 = equator_table(2).unwrap();
        assert_eq!(t2.get(2, 1), 0.0);
        assert_eq!(t2.get(2, -1), 0.0);

        let t4 = equator_table(4).unwrap();
        for ix in sh_indices(4) {
            let c = circular_harmonic(ix.m, 0.0);
            if c == 0.0 {
                // sine modes vanish at alpha = 0; recompute at alpha = pi/2 / |m|
                let a = FRAC_PI_2 / ix.m.unsigned_abs() as f64;
                let y = sph_harmonic(ix.n, ix.m, FRAC_PI_2, a).unwrap();
                assert!((t4.get(ix.n, ix.m) - y / circular_harmonic(ix.m, a)).abs() < 1e-14);
            } else {
                let y = sph_harmonic(ix.n, ix.m, FRAC_PI_2, 0.0).unwrap();
                assert!((t4.get(ix.n, ix.m) - y / c).abs() < 1e-14);
            }
        }
        assert!(matches!(equator_table(MAX_DEGREE + 1), Err(Error::Cap { .. })));
    }

    #[test]
    fn table_parity_and_symmetry() {
        let t = equator_table(40).unwrap();
        for ix in sh_indices(40) {
            let v = t.get(ix.n, ix.m);
            if ix.is_equator_null() {
                assert_eq!(v.to_bits(), 0.0f64.to_bits(), "({}, {})", ix.n, ix.m);
            } else {
                assert_ne!(v, 0.0);
            }
            assert_eq!(v, t.get(ix.n, -ix.m));
        }
    }

    #[test]
    fn acn_examples() {
        assert_eq!(acn(0, 0).unwrap(), 0);
        assert_eq!(acn(1, -1).unwrap(), 1);
        assert_eq!(acn(3, 2).unwrap(), 14);
        assert!(acn(1, 2).is_err());
        assert_eq!(acn_inverse(0), ShIndex { n: 0, m: 0 });
        assert_eq!(acn_inverse(6), ShIndex { n: 2, m: 0 });
        assert_eq!(acn_inverse(15), ShIndex { n: 3, m: 3 });
    }

    #[test]
    fn acn_round_trip_scan() {
        for c in 0..=1000usize {
            let ix = acn_inverse(c);
            assert!(ix.m.unsigned_abs() as usize <= ix.n);
            assert_eq!(acn(ix.n, ix.m).unwrap(), c);
        }
        for c in 0..65 * 65 {
            assert_eq!(acn_inverse(c).acn(), c);
        }
        let listed: Vec<usize> = sh_indices(6).map(ShIndex::acn).collect();
        assert_eq!(listed, (0..49).collect::<Vec<_>>());
    }

    #[test]
    fn circular_orthonormality() {
        let q = 1024;
        for m in -8..=8 {
            for mp in -8..=8 {
                let s: f64 = (0..q)
                    .map(|i| {
                        let a = 2.0 * PI * i as f64 / q as f64;
                        circular_harmonic(m, a) * circular_harmonic(mp, a)
                    })
                    .sum::<f64>()
                    / q as f64;
                let expect = if m == mp { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12, "m={m} m'={mp}: {s}");
            }
        }
    }

    #[test]
    fn m_symmetry_of_n_factor() {
        for n in 0..=12usize {
            for m in 0..=n as i32 {
                for &b in &[0.1, 0.9, FRAC_PI_2, 2.8] {
                    assert_eq!(n_factor(n, m, b).unwrap(), n_factor(n, -m, b).unwrap());
                }
            }
        }
    }

    #[test]
    fn high_degree_factors_stay_finite() {
        let t = equator_table(MAX_DEGREE).unwrap();
        assert!(t.values().iter().all(|v| v.is_finite()));
    }
}
