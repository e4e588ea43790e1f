//! Hardy-space numerics on equispaced samples of the unit circle.

mod fit;

pub use fit::{membership_fit, FitCandidate, FitReport, FitVerdict};

use std::io::{Read, Write};

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::cx::{self, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::poly;

/// Samples `g(e^{2πik/M})`, `k = 0..M`, with `M` a power of two, `M ≥ 8`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryGrid {
    samples: Vec<C64>,
}

impl BoundaryGrid {
    pub fn new(samples: Vec<C64>) -> Result<Self> {
        check_grid_size(samples.len(), 8)?;
        Ok(Self { samples })
    }

    pub fn from_fn(m: usize, f: impl Fn(C64) -> C64) -> Result<Self> {
        Self::new((0..m).map(|k| f(cx::root_of_unity(k, m))).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn point(&self, k: usize) -> C64 {
        cx::root_of_unity(k, self.samples.len())
    }

    pub fn fourier(&self) -> Result<FourierCoefficients> {
        fourier_coefficients(&self.samples)
    }

    pub fn analyticity_defect(&self) -> Result<f64> {
        analyticity_defect(&self.samples)
    }
}

pub(crate) fn check_grid_size(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(Error::GridSize {
            got: m,
            reason: format!("must be at least {min}"),
        });
    }
    if !m.is_power_of_two() {
        return Err(Error::GridSize {
            got: m,
            reason: "must be a power of two".into(),
        });
    }
    Ok(())
}

/// Discrete Fourier coefficients `ĝ_k`, `k ∈ [−M/2, M/2)`, normalised so that
/// `g(θ_j) = Σ_k ĝ_k e^{ikθ_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoefficients {
    raw: Vec<C64>,
}

impl FourierCoefficients {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn min_index(&self) -> i64 {
        -((self.raw.len() / 2) as i64)
    }

    pub fn max_index(&self) -> i64 {
        self.raw.len() as i64 + self.min_index() - 1
    }

    /// Coefficient at `k`; indices outside the stored range alias modulo `M`.
    pub fn get(&self, k: i64) -> C64 {
        let m = self.raw.len() as i64;
        self.raw[k.rem_euclid(m) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, C64)> + '_ {
        (self.min_index()..=self.max_index()).map(|k| (k, self.get(k)))
    }

    pub fn max_abs(&self) -> f64 {
        self.raw.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

pub fn fourier_coefficients(samples: &[C64]) -> Result<FourierCoefficients> {
    if samples.is_empty() {
        return Err(Error::GridSize {
            got: 0,
            reason: "empty grid".into(),
        });
    }
    if let Some(i) = samples.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFiniteSample(i));
    }
    let m = samples.len();
    let mut buf = samples.to_vec();
    FftPlanner::<f64>::new().plan_fft_forward(m).process(&mut buf);
    let inv = 1.0 / m as f64;
    buf.iter_mut().for_each(|v| *v *= inv);
    Ok(FourierCoefficients { raw: buf })
}

/// Inverse of [`fourier_coefficients`] for coefficients given by index.
pub fn synthesize(m: usize, coeffs: &[(i64, C64)]) -> Vec<C64> {
    let mut buf = vec![ZERO; m];
    for &(k, v) in coeffs {
        buf[k.rem_euclid(m as i64) as usize] += v;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);
    buf
}

/// Largest negative-index Fourier magnitude: zero iff the samples are the
/// boundary trace of a polynomial (holomorphic extension).
pub fn analyticity_defect(samples: &[C64]) -> Result<f64> {
    let spec = fourier_coefficients(samples)?;
    Ok(spec
        .iter()
        .filter(|(k, _)| *k < 0)
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max))
}

/// Outer function given by the Taylor coefficients of its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterFunction {
    log_taylor: Vec<C64>,
}

impl OuterFunction {
    pub fn log_taylor(&self) -> &[C64] {
        &self.log_taylor
    }

    pub fn log_eval(&self, z: C64) -> C64 {
        poly::eval(&self.log_taylor, z)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.log_eval(z).exp()
    }
}

/// Builds the outer function with `|F*| = exp(logmod)` and `F(0) > 0`.
///
/// With real data `logmod = Σ ĉ_k e^{ikθ}`, the Schwarz integral gives
/// `log F = ĉ_0 + 2 Σ_{k ≥ 1} ĉ_k ζ^k`; the Nyquist term enters once.
pub fn outer_from_log_modulus(logmod: &[f64]) -> Result<OuterFunction> {
    let m = logmod.len();
    check_grid_size(m, 8)?;
    let data: Vec<C64> = logmod.iter().map(|&v| cx::re(v)).collect();
    let spec = fourier_coefficients(&data)?;
    let half = (m / 2) as i64;
    let mut log_taylor = Vec::with_capacity(m / 2 + 1);
    log_taylor.push(cx::re(spec.get(0).re));
    for k in 1..half {
        log_taylor.push(spec.get(k) * 2.0);
    }
    log_taylor.push(cx::re(spec.get(-half).re));
    Ok(OuterFunction { log_taylor })
}

/// `∏_k (λ − α_k)/(1 − ᾱ_k λ)`.
pub fn blaschke_eval(zeros: &[C64], lambda: C64) -> Result<C64> {
    if let Some(a) = zeros.iter().find(|a| a.norm() >= 1.0) {
        return Err(Error::OutsideDisc(format!("Blaschke zero {a}")));
    }
    if lambda.norm() > 1.0 + 1e-12 {
        return Err(Error::OutsideDisc(format!("argument {lambda}")));
    }
    Ok(zeros
        .iter()
        .map(|&a| (lambda - a) / (ONE - a.conj() * lambda))
        .product())
}

/// Boundary data split as `B · S · F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationTriple {
    #[serde(with = "cx::pair_vec")]
    pub blaschke_zeros: Vec<C64>,
    pub outer_log_modulus: Vec<f64>,
    /// RMS phase deviation of `φ*/(B* F*)` from a constant; a nonzero
    /// value means a singular inner factor (or missing zeros).
    pub singular_inner_defect: f64,
}

pub fn inner_outer_split(grid: &BoundaryGrid, zeros: &[C64]) -> Result<FactorizationTriple> {
    let m = grid.len();
    let logmod: Vec<f64> = grid
        .samples()
        .iter()
        .enumerate()
        .map(|(k, v)| {
            if v.norm() > 0.0 && v.norm().is_finite() {
                Ok(v.norm().ln())
            } else {
                Err(Error::NonFiniteSample(k))
            }
        })
        .collect::<Result<_>>()?;
    let outer = outer_from_log_modulus(&logmod)?;
    let mut inner = Vec::with_capacity(m);
    for (k, v) in grid.samples().iter().enumerate() {
        let z = grid.point(k);
        inner.push(v / (blaschke_eval(zeros, z)? * outer.eval(z)));
    }
    Ok(FactorizationTriple {
        blaschke_zeros: zeros.to_vec(),
        outer_log_modulus: logmod,
        singular_inner_defect: phase_spread(&inner),
    })
}

/// RMS of `arg(v_k / v̄)` about the circular mean direction `v̄`.
pub(crate) fn phase_spread(values: &[C64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mean: C64 = values.iter().map(|v| v / v.norm()).sum();
    let dir = if mean.norm() > 0.0 { mean / mean.norm() } else { ONE };
    let ss: f64 = values.iter().map(|v| (v / dir).arg().powi(2)).sum();
    (ss / values.len() as f64).sqrt()
}

/// Writes `n` component grids as CSV rows `angle_index,re_1,im_1,…`.
pub fn write_grids_csv<W: Write>(out: W, grids: &[Vec<C64>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["angle_index".to_string()];
    for j in 1..=grids.len() {
        header.push(format!("re_{j}"));
        header.push(format!("im_{j}"));
    }
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    let m = grids.first().map_or(0, Vec::len);
    for k in 0..m {
        let mut row = vec![k.to_string()];
        for g in grids {
            row.push(format!("{:e}", g[k].re));
            row.push(format!("{:e}", g[k].im));
        }
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grids_csv<R: Read>(input: R) -> Result<Vec<BoundaryGrid>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut cols: Vec<Vec<C64>> = Vec::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        if rec.len() < 3 || rec.len() % 2 == 0 {
            return Err(Error::Parse(format!("row {row_idx}: expected 1 + 2n fields")));
        }
        let idx: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {row_idx}: bad angle index")))?;
        if idx != row_idx {
            return Err(Error::Parse(format!("row {row_idx}: angle index {idx} out of order")));
        }
        let n = (rec.len() - 1) / 2;
        if cols.is_empty() {
            cols = vec![Vec::new(); n];
        } else if cols.len() != n {
            return Err(Error::Parse(format!("row {row_idx}: component count changed")));
        }
        for (j, col) in cols.iter_mut().enumerate() {
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {row_idx}: bad number {s:?}")))
            };
            col.push(cx::c(parse(&rec[1 + 2 * j])?, parse(&rec[2 + 2 * j])?));
        }
    }
    cols.into_iter().map(BoundaryGrid::new).collect()
}
