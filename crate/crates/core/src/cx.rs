//! Complex-number helpers and the `[re, im]` JSON encoding used by every schema.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `exp(2πik/M)`.
#[inline]
pub fn root_of_unity(k: usize, m: usize) -> C64 {
    C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / m as f64)
}

/// `|z|^{2p}` computed as `exp(2p log|z|)`; zero maps to zero.
#[inline]
pub fn abs_pow2p(z: C64, p: f64) -> f64 {
    let r = z.norm();
    if r == 0.0 {
        0.0
    } else {
        (2.0 * p * r.ln()).exp()
    }
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let x = a.get(i).copied().unwrap_or(ZERO);
            let y = b.get(i).copied().unwrap_or(ZERO);
            (x - y).norm()
        })
        .fold(0.0, f64::max)
}

/// Serde adapters for `[re, im]` pairs.
pub mod pair {
    use super::*;

    pub fn to_pair(z: C64) -> [f64; 2] {
        [z.re, z.im]
    }

    pub fn from_pair(p: [f64; 2]) -> C64 {
        C64::new(p[0], p[1])
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        to_pair(*z).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        <[f64; 2]>::deserialize(d).map(from_pair)
    }
}

pub mod pair_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|z| pair::to_pair(*z)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(pair::from_pair)
            .collect())
    }
}

pub mod pair_mat {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<C64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|z| pair::to_pair(*z)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<C64>>, D::Error> {
        Ok(Vec::<Vec<[f64; 2]>>::deserialize(d)?
            .into_iter()
            .map(|row| row.into_iter().map(pair::from_pair).collect())
            .collect())
    }
}
