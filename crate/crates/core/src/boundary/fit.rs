//! Fitting candidate boundary data to the extremal family.
//!
//! On the circle the Blaschke factors are unimodular, so
//! `log|φ_j*| = log|a_j| + (1/p_j) Σ_k (log|1 − ᾱ_kj ζ| − log|1 − ᾱ_k0 ζ|)`.
//! The initial guess comes from the linear relation
//! `D(θ)·|φ_j*(θ)|^{2p_j} = N_j(θ)` between nonnegative trigonometric
//! polynomials of degree `m`, whose self-inversive factorizations give
//! `α_k0` (from `D`) and `α_kj` (from `N_j`); a damped Gauss–Newton fit of
//! the log-modulus then polishes the parameters.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::BoundaryGrid;
use crate::cx::{self, C64, ONE, ZERO};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::extremal_map::ExtremalMapParams;
use crate::lm::{self, LmConfig};
use crate::polyfactor::{self, SelfInversivePoly};

/// Boundary samples per component plus the interior zeros of each component.
#[derive(Debug, Clone)]
pub struct FitCandidate {
    pub components: Vec<BoundaryGrid>,
    pub zeros: Vec<Vec<C64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVerdict {
    InFamily,
    NotInFamily,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub m: usize,
    pub params: ExtremalMapParams,
    pub rms_log_modulus: Vec<f64>,
    pub constraint_residual: f64,
    /// RMS of `|log(φ_j*/φ_fit,j*)|`, phase included: a singular inner
    /// factor leaves the modulus untouched but shows up in the phase.
    pub singular_inner_defect: f64,
    pub boundary_u_defect: f64,
    pub excluded_points: usize,
    pub verdict: FitVerdict,
}

struct Layout {
    n: usize,
    m: usize,
    pinned: Vec<Vec<C64>>,
}

impl Layout {
    fn free_count(&self, j: usize) -> usize {
        self.m - self.pinned[j].len()
    }

    /// Unknowns: `log|a_j|`, then `α_k0`, then the free `α_kj` column by column.
    fn unpack(&self, x: &[f64]) -> (Vec<f64>, Vec<C64>, Vec<Vec<C64>>) {
        let log_a = x[..self.n].to_vec();
        let mut pos = self.n;
        let mut take = || {
            let v = cx::c(x[pos], x[pos + 1]);
            pos += 2;
            v
        };
        let alpha0: Vec<C64> = (0..self.m).map(|_| take()).collect();
        let cols: Vec<Vec<C64>> = (0..self.n)
            .map(|j| {
                let mut col = self.pinned[j].clone();
                col.extend((0..self.free_count(j)).map(|_| take()));
                col
            })
            .collect();
        (log_a, alpha0, cols)
    }

    fn pack(&self, log_a: &[f64], alpha0: &[C64], free: &[Vec<C64>]) -> Vec<f64> {
        let mut x = log_a.to_vec();
        for a in alpha0 {
            x.extend([a.re, a.im]);
        }
        for col in free {
            for a in col {
                x.extend([a.re, a.im]);
            }
        }
        x
    }
}

fn log_model(p: f64, log_a: f64, col: &[C64], alpha0: &[C64], z: C64) -> f64 {
    let s: f64 = col
        .iter()
        .zip(alpha0)
        .map(|(akj, ak0)| (ONE - akj.conj() * z).norm().ln() - (ONE - ak0.conj() * z).norm().ln())
        .sum();
    log_a + s / p
}

/// Coefficients of the self-inversive polynomial `ζ^m t(θ)` for
/// `t(θ) = x_0 + Σ_l (x_{2l−1} cos lθ + x_{2l} sin lθ)`.
fn trig_to_poly(x: &[f64], m: usize) -> Vec<C64> {
    let mut c = vec![ZERO; 2 * m + 1];
    c[m] = cx::re(x[0]);
    for l in 1..=m {
        let v = cx::c(x[2 * l - 1], -x[2 * l]) * 0.5;
        c[m + l] = v;
        c[m - l] = v.conj();
    }
    c
}

fn trig_basis(theta: f64, m: usize) -> Vec<f64> {
    let mut b = vec![1.0];
    for l in 1..=m {
        b.push((l as f64 * theta).cos());
        b.push((l as f64 * theta).sin());
    }
    b
}

/// Greedy nearest matching; returns the unmatched elements of `found`.
fn remove_matches(found: &[C64], pinned: &[C64]) -> Vec<C64> {
    let mut rest = found.to_vec();
    for p in pinned {
        if rest.is_empty() {
            break;
        }
        let (i, _) = rest
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - p).norm().partial_cmp(&(b.1 - p).norm()).unwrap())
            .unwrap();
        rest.swap_remove(i);
    }
    rest
}

fn clamp_disc(a: C64) -> C64 {
    if a.norm() > 0.999 {
        a / a.norm() * 0.999
    } else {
        a
    }
}

/// Initial `(α_k0, free α_kj)` from the null vector of the linear system
/// `D·|φ_j|^{2p_j} − N_j = 0`.
fn linear_init(
    layout: &Layout,
    e: &Ellipsoid,
    pts: &[(usize, f64)],
    moduli: &[Vec<f64>],
) -> Option<(Vec<C64>, Vec<Vec<C64>>)> {
    let (n, m) = (layout.n, layout.m);
    let width = 2 * m + 1;
    let cols = (n + 1) * width;
    let mut a = DMatrix::<f64>::zeros(n * pts.len(), cols);
    for j in 0..n {
        let p = e.exponents()[j];
        for (row, &(k, theta)) in pts.iter().enumerate() {
            let basis = trig_basis(theta, m);
            let w = (2.0 * p * moduli[j][k].ln()).exp();
            let r = j * pts.len() + row;
            for (i, b) in basis.iter().enumerate() {
                a[(r, i)] = w * b;
                a[(r, (j + 1) * width + i)] = -b;
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.partial_cmp(y.1).unwrap())?;
    let mut v: Vec<f64> = v_t.row(idx).iter().copied().collect();
    if v[0] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let factor_block = |block: &[f64]| -> Option<Vec<C64>> {
        let poly = SelfInversivePoly::new(trig_to_poly(block, m)).ok()?;
        polyfactor::factor(&poly, 1e-6).ok().map(|f| f.zeros)
    };
    let alpha0: Vec<C64> = factor_block(&v[..width])?.into_iter().map(clamp_disc).collect();
    let mut free = Vec::with_capacity(n);
    for j in 0..n {
        let found = factor_block(&v[(j + 1) * width..(j + 2) * width])?;
        let rest = remove_matches(&found, &layout.pinned[j]);
        free.push(rest.into_iter().take(layout.free_count(j)).map(clamp_disc).collect());
    }
    Some((alpha0, free))
}

pub fn membership_fit(
    candidate: &FitCandidate,
    e: &Ellipsoid,
    m: usize,
    tol: f64,
    seed: u64,
) -> Result<FitReport> {
    if !(tol > 0.0) {
        return Err(Error::NonPositiveTolerance(tol));
    }
    let n = e.dim();
    if candidate.components.len() != n || candidate.zeros.len() != n {
        return Err(Error::Dimension {
            expected: n,
            got: candidate.components.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParams("m must be positive".into()));
    }
    let big_m = candidate.components[0].len();
    if candidate.components.iter().any(|g| g.len() != big_m) {
        return Err(Error::Precondition("component grids differ in size".into()));
    }
    for (j, zs) in candidate.zeros.iter().enumerate() {
        if zs.len() > m {
            return Err(Error::Precondition(format!(
                "component {j} has {} zeros but m = {m}",
                zs.len()
            )));
        }
        if let Some(z) = zs.iter().find(|z| z.norm() >= 1.0) {
            return Err(Error::OutsideDisc(format!("zero {z} of component {j}")));
        }
    }

    let samples: Vec<&[C64]> = candidate.components.iter().map(|g| g.samples()).collect();
    let point = |k: usize| -> Vec<C64> { samples.iter().map(|s| s[k]).collect() };

    // boundary condition on finite samples
    let mut u_defect = 0.0f64;
    let mut singular = vec![false; big_m];
    let scale: Vec<f64> = samples
        .iter()
        .map(|s| s.iter().filter(|v| v.norm().is_finite()).map(|v| v.norm()).fold(0.0, f64::max))
        .collect();
    for (k, flag) in singular.iter_mut().enumerate() {
        let z = point(k);
        let finite = z.iter().all(|v| v.re.is_finite() && v.im.is_finite());
        if finite {
            u_defect = u_defect.max(e.defining_value_unchecked(&z).abs());
        }
        if !finite || z.iter().zip(&scale).any(|(v, s)| v.norm() <= 1e-10 * s) {
            *flag = true;
        }
    }
    if u_defect > tol {
        return Err(Error::OffBoundary(u_defect));
    }
    // drop detected singularities and their grid neighbours
    let excluded: Vec<bool> = (0..big_m)
        .map(|k| singular[k] || singular[(k + 1) % big_m] || singular[(k + big_m - 1) % big_m])
        .collect();
    let pts: Vec<(usize, f64)> = (0..big_m)
        .filter(|&k| !excluded[k])
        .map(|k| (k, std::f64::consts::TAU * k as f64 / big_m as f64))
        .collect();
    if pts.len() < 4 * m + 4 {
        return Err(Error::Precondition("too few usable boundary samples".into()));
    }
    let moduli: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|v| v.norm()).collect()).collect();
    let log_mod: Vec<Vec<f64>> = moduli.iter().map(|row| row.iter().map(|v| v.ln()).collect()).collect();

    let layout = Layout {
        n,
        m,
        pinned: candidate.zeros.clone(),
    };
    let points: Vec<C64> = pts.iter().map(|&(_, t)| C64::from_polar(1.0, t)).collect();
    let residual = |x: &[f64]| -> Option<Vec<f64>> {
        let (log_a, alpha0, cols) = layout.unpack(x);
        if alpha0.iter().chain(cols.iter().flatten()).any(|a| a.norm() > 1.0) {
            return None;
        }
        let mut out = Vec::with_capacity(n * pts.len());
        for j in 0..n {
            let p = e.exponents()[j];
            for (&(k, _), &z) in pts.iter().zip(&points) {
                out.push(log_mod[j][k] - log_model(p, log_a[j], &cols[j], &alpha0, z));
            }
        }
        Some(out)
    };

    // |a_j| from the mean log-modulus once the α are fixed
    let init_log_a = |alpha0: &[C64], free: &[Vec<C64>]| -> Vec<f64> {
        (0..n)
            .map(|j| {
                let mut col = layout.pinned[j].clone();
                col.extend(free[j].iter().copied());
                let p = e.exponents()[j];
                pts.iter()
                    .zip(&points)
                    .map(|(&(k, _), &z)| log_mod[j][k] - log_model(p, 0.0, &col, alpha0, z))
                    .sum::<f64>()
                    / pts.len() as f64
            })
            .collect()
    };

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((alpha0, free)) = linear_init(&layout, e, &pts, &moduli) {
        starts.push(layout.pack(&init_log_a(&alpha0, &free), &alpha0, &free));
    }
    let zero_free: Vec<Vec<C64>> = (0..n).map(|j| vec![ZERO; layout.free_count(j)]).collect();
    starts.push(layout.pack(&init_log_a(&vec![ZERO; m], &zero_free), &vec![ZERO; m], &zero_free));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = LmConfig {
        max_iter: 300,
        residual_tol: 1e-13,
        ..LmConfig::default()
    };

    let mut best: Option<lm::LmOutcome> = None;
    let mut attempt = 0;
    loop {
        let x0 = if attempt < starts.len() {
            starts[attempt].clone()
        } else {
            let mut rand_disc = || C64::from_polar(0.8 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU));
            let alpha0: Vec<C64> = (0..m).map(|_| rand_disc()).collect();
            let free: Vec<Vec<C64>> = (0..n)
                .map(|j| (0..layout.free_count(j)).map(|_| rand_disc()).collect())
                .collect();
            layout.pack(&init_log_a(&alpha0, &free), &alpha0, &free)
        };
        attempt += 1;
        if let Some(out) = lm::minimize(residual, &x0, &cfg) {
            let better = best.as_ref().is_none_or(|b| out.max_residual() < b.max_residual());
            if better {
                best = Some(out);
            }
        }
        let done = best.as_ref().is_some_and(|b| b.max_residual() < 1e-3 * tol);
        if done || attempt >= starts.len() + 8 {
            break;
        }
    }
    let best = best.ok_or_else(|| Error::FitDiverged("no start produced a finite residual".into()))?;
    if best.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::FitDiverged("non-finite parameters".into()));
    }

    let (log_a, alpha0, cols) = layout.unpack(&best.x);
    let rms_log_modulus: Vec<f64> = (0..n)
        .map(|j| {
            let chunk = &best.residual[j * pts.len()..(j + 1) * pts.len()];
            (chunk.iter().map(|v| v * v).sum::<f64>() / chunk.len() as f64).sqrt()
        })
        .collect();

    // assemble parameters; the phase of a_j is the mean phase of φ_j*/model
    let mut alpha = vec![vec![ZERO; n]; m];
    let mut r = vec![vec![0u8; n]; m];
    for j in 0..n {
        for k in 0..m {
            alpha[k][j] = cols[j][k];
            r[k][j] = u8::from(k < layout.pinned[j].len());
        }
    }
    let moduli_a: Vec<C64> = log_a.iter().map(|v| cx::re(v.exp())).collect();
    let mut params = ExtremalMapParams::new(moduli_a, alpha0, alpha, r)?;
    let mut ratios = vec![Vec::with_capacity(pts.len()); n];
    for &(k, _) in &pts {
        let model = params.eval_raw(e, cx::root_of_unity(k, big_m));
        for j in 0..n {
            ratios[j].push(samples[j][k] / model[j]);
        }
    }
    for j in 0..n {
        let mean: C64 = ratios[j].iter().map(|v| v / v.norm()).sum();
        if mean.norm() > 0.0 {
            params.a[j] *= mean / mean.norm();
        }
    }

    let mut ss = 0.0;
    let mut count = 0usize;
    for &(k, _) in &pts {
        let model = params.eval_raw(e, cx::root_of_unity(k, big_m));
        for j in 0..n {
            ss += (samples[j][k] / model[j]).ln().norm_sqr();
            count += 1;
        }
    }
    let singular_inner_defect = (ss / count as f64).sqrt();
    if !singular_inner_defect.is_finite() {
        return Err(Error::FitDiverged("model vanishes on the usable grid".into()));
    }
    let constraint_residual = params.constraint_residual(e)?;
    let worst = rms_log_modulus.iter().fold(0.0f64, |a, &b| a.max(b));
    let verdict = if worst <= tol && singular_inner_defect <= tol {
        FitVerdict::InFamily
    } else {
        FitVerdict::NotInFamily
    };
    Ok(FitReport {
        m,
        params,
        rms_log_modulus,
        constraint_residual,
        singular_inner_defect,
        boundary_u_defect: u_defect,
        excluded_points: big_m - pts.len(),
        verdict,
    })
}
