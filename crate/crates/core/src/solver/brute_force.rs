//! Direct search over polynomial competitor discs.
//!
//! For a fixed scalar the interpolation conditions are affine in the
//! coefficients, so `c_0` (and `c_1`) are eliminated and the remaining
//! coefficients are chosen to push `max_k u(g(ζ_k))` below zero. The set of
//! feasible scalars is an interval (reparametrise `g(rλ)`), which makes
//! bisection on the scalar valid; any answer is attained by an explicit
//! witness disc.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GeodesicProblem;
use crate::cx::{self, C64, I, ZERO};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::functionals::PolynomialDisc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceConfig {
    pub degree: usize,
    /// Circle samples seen by the optimizer.
    pub grid: usize,
    /// Circle samples used to certify a witness.
    pub check_grid: usize,
    /// Random restarts per feasibility test, after the warm and zero starts.
    pub restarts: usize,
    pub bisection_steps: usize,
    pub seed: u64,
}

impl Default for BruteForceConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            grid: 256,
            check_grid: 4096,
            restarts: 2,
            bisection_steps: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    /// Smallest feasible `σ` (two-point) or largest feasible `t`
    /// (point-direction) found.
    pub scalar: f64,
    /// Coefficients of the witness disc `g(λ) = Σ c_k λ^k`.
    pub witness: PolynomialDisc,
    /// `max u(g(ζ))` on the certification grid.
    pub max_u: f64,
    pub degree: usize,
}

/// `g_j(ζ) = base_j(ζ) + Σ_l c_{lj} basis_l(ζ)` sampled on a grid.
struct Affine<'a> {
    e: &'a Ellipsoid,
    n: usize,
    base: Vec<Vec<C64>>,
    basis: Vec<Vec<C64>>,
}

impl<'a> Affine<'a> {
    fn new(e: &'a Ellipsoid, problem: &GeodesicProblem, scalar: f64, degree: usize, grid: usize) -> Self {
        let n = e.dim();
        let pts: Vec<C64> = (0..grid).map(|k| cx::root_of_unity(k, grid)).collect();
        let (lin, two_point) = linear_part(problem, scalar);
        let z = problem.z();
        let base = pts
            .iter()
            .map(|&p| (0..n).map(|j| z[j] + lin[j] * p).collect())
            .collect();
        let basis = pts
            .iter()
            .map(|&p| {
                (2..=degree)
                    .map(|l| {
                        if two_point {
                            p.powu(l as u32) - p * scalar.powi(l as i32 - 1)
                        } else {
                            p.powu(l as u32)
                        }
                    })
                    .collect()
            })
            .collect();
        Self { e, n, base, basis }
    }

    fn unknowns(&self) -> usize {
        2 * self.n * self.basis.first().map_or(0, Vec::len)
    }

    fn coeff(&self, x: &[f64], l: usize, j: usize) -> C64 {
        let i = 2 * (l * self.n + j);
        cx::c(x[i], x[i + 1])
    }

    fn values(&self, x: &[f64], k: usize) -> Vec<C64> {
        (0..self.n)
            .map(|j| {
                let mut g = self.base[k][j];
                for (l, b) in self.basis[k].iter().enumerate() {
                    g += self.coeff(x, l, j) * b;
                }
                g
            })
            .collect()
    }

    fn max_u(&self, x: &[f64]) -> f64 {
        (0..self.base.len())
            .map(|k| self.e.defining_value_unchecked(&self.values(x, k)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Log-sum-exp of `β u_k` divided by `β`, and its gradient.
    fn soft_max(&self, x: &[f64], beta: f64) -> (f64, Vec<f64>) {
        let p = self.e.exponents();
        let mut us = Vec::with_capacity(self.base.len());
        let mut grads = Vec::with_capacity(self.base.len());
        for k in 0..self.base.len() {
            let g = self.values(x, k);
            let mut u = -1.0;
            let mut wirt = vec![ZERO; self.n];
            for j in 0..self.n {
                let t = cx::abs_pow2p(g[j], p[j]);
                u += t;
                if t > 0.0 {
                    wirt[j] = p[j] * t / g[j];
                }
            }
            us.push(u);
            grads.push(wirt);
        }
        let top = us.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let weights: Vec<f64> = us.iter().map(|u| (beta * (u - top)).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = top + total.ln() / beta;
        let mut grad = vec![0.0; x.len()];
        for k in 0..self.base.len() {
            let pi = weights[k] / total;
            for (l, b) in self.basis[k].iter().enumerate() {
                for j in 0..self.n {
                    let d = grads[k][j] * b;
                    let i = 2 * (l * self.n + j);
                    grad[i] += 2.0 * pi * d.re;
                    grad[i + 1] += 2.0 * pi * (d * I).re;
                }
            }
        }
        (value, grad)
    }
}

/// Coefficient of `λ` and whether the problem is two-point.
fn linear_part(problem: &GeodesicProblem, scalar: f64) -> (Vec<C64>, bool) {
    match problem {
        GeodesicProblem::TwoPoint { z, w } => (z.iter().zip(w).map(|(a, b)| (b - a) / scalar).collect(), true),
        GeodesicProblem::PointDirection { z: _, x } => (x.iter().map(|v| v * scalar).collect(), false),
    }
}

/// BFGS on the soft max with continuation in `β`; returns as soon as the
/// true maximum on the optimizer grid drops below `−slack`.
fn descend(f: &Affine, x0: &[f64], slack: f64) -> (Vec<f64>, bool) {
    let nx = x0.len();
    let mut x = x0.to_vec();
    if f.max_u(&x) < -slack {
        return (x, true);
    }
    if nx == 0 {
        return (x, false);
    }
    for &beta in &[20.0, 100.0, 500.0, 2.5e3, 1.25e4, 6e4, 3e5, 1.5e6] {
        let (mut val, mut grad) = f.soft_max(&x, beta);
        let mut hinv = vec![vec![0.0; nx]; nx];
        for (i, row) in hinv.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        for _ in 0..150 {
            let dir: Vec<f64> = (0..nx).map(|i| -(0..nx).map(|k| hinv[i][k] * grad[k]).sum::<f64>()).collect();
            let slope: f64 = dir.iter().zip(&grad).map(|(a, b)| a * b).sum();
            if !(slope < 0.0) {
                break;
            }
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..40 {
                let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                let (tv, tg) = f.soft_max(&trial, beta);
                if tv.is_finite() && tv <= val + 1e-4 * step * slope {
                    accepted = Some((trial, tv, tg));
                    break;
                }
                step *= 0.5;
            }
            let Some((trial, tv, tg)) = accepted else { break };
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = tg.iter().zip(&grad).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            x = trial;
            let decrease = val - tv;
            val = tv;
            grad = tg;
            if f.max_u(&x) < -slack {
                return (x, true);
            }
            if sy > 1e-300 {
                let hy: Vec<f64> = (0..nx).map(|i| (0..nx).map(|k| hinv[i][k] * y[k]).sum()).collect();
                let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                for i in 0..nx {
                    for k in 0..nx {
                        hinv[i][k] += (sy + yhy) * s[i] * s[k] / (sy * sy) - (hy[i] * s[k] + s[i] * hy[k]) / sy;
                    }
                }
            }
            if decrease < 1e-16 * (1.0 + val.abs()) {
                break;
            }
        }
        // the soft max overestimates the max by at most ln(M)/β; once even
        // the lower estimate is positive more sharpening will not help
        if val - (f.base.len() as f64).ln() / beta > 1e-9 {
            break;
        }
    }
    (x, false)
}

struct Search<'a> {
    e: &'a Ellipsoid,
    problem: &'a GeodesicProblem,
    cfg: BruteForceConfig,
    rng: ChaCha8Rng,
    warm: Vec<f64>,
}

impl Search<'_> {
    /// A certified feasible coefficient vector at `scalar`, if one is found.
    fn feasible(&mut self, scalar: f64) -> Option<(Vec<f64>, f64)> {
        let d = self.cfg.degree;
        let opt = Affine::new(self.e, self.problem, scalar, d, self.cfg.grid);
        let check = Affine::new(self.e, self.problem, scalar, d, self.cfg.check_grid);
        let nx = opt.unknowns();
        let mut starts = vec![self.warm.clone(), vec![0.0; nx]];
        for _ in 0..self.cfg.restarts {
            let s: Vec<f64> = (0..nx).map(|_| self.rng.gen_range(-0.3..0.3)).collect();
            starts.push(s);
        }
        if nx == 0 {
            starts.truncate(1);
        }
        for x0 in starts {
            let (x, ok) = descend(&opt, &x0, 1e-12);
            if ok {
                let m = check.max_u(&x);
                if m < 0.0 {
                    self.warm = x.clone();
                    return Some((x, m));
                }
            }
        }
        None
    }

    fn witness(&self, scalar: f64, x: &[f64]) -> PolynomialDisc {
        let n = self.e.dim();
        let d = self.cfg.degree;
        let (lin, two_point) = linear_part(self.problem, scalar);
        let z = self.problem.z();
        let coeffs = (0..n)
            .map(|j| {
                let mut c = vec![ZERO; d + 1];
                c[0] = z[j];
                c[1] = lin[j];
                for l in 2..=d {
                    let v = cx::c(x[2 * ((l - 2) * n + j)], x[2 * ((l - 2) * n + j) + 1]);
                    c[l] += v;
                    if two_point {
                        c[1] -= v * scalar.powi(l as i32 - 1);
                    }
                }
                c
            })
            .collect();
        PolynomialDisc::new(coeffs)
    }
}

/// Bisection on the scalar over polynomial discs of the configured degree.
/// Two-point problems return an upper bound for the extremal `σ`;
/// point-direction problems return a lower bound for the extremal `t`.
pub fn brute_force_disc(e: &Ellipsoid, problem: &GeodesicProblem, cfg: &BruteForceConfig) -> Result<BruteForceResult> {
    if cfg.degree == 0 {
        return Err(Error::Precondition("degree must be at least 1".into()));
    }
    problem.check(e)?;
    let nx = 2 * e.dim() * (cfg.degree - 1);
    let mut search = Search {
        e,
        problem,
        cfg: *cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        warm: vec![0.0; nx],
    };
    match problem {
        GeodesicProblem::TwoPoint { .. } => {
            let mut hi = 1.0 - 1e-9;
            let Some(mut best) = search.feasible(hi) else {
                return Err(Error::Infeasible(cfg.degree));
            };
            let mut lo = 0.0;
            for _ in 0..cfg.bisection_steps {
                let mid = 0.5 * (lo + hi);
                match search.feasible(mid) {
                    Some(found) => {
                        hi = mid;
                        best = found;
                    }
                    None => lo = mid,
                }
            }
            Ok(BruteForceResult {
                scalar: hi,
                witness: search.witness(hi, &best.0),
                max_u: best.1,
                degree: cfg.degree,
            })
        }
        GeodesicProblem::PointDirection { .. } => {
            let mut lo = 1e-9;
            let Some(mut best) = search.feasible(lo) else {
                return Err(Error::Infeasible(cfg.degree));
            };
            let mut hi = 1.0;
            loop {
                match search.feasible(hi) {
                    Some(found) => {
                        lo = hi;
                        best = found;
                        hi *= 2.0;
                        if hi > 1e12 {
                            return Err(Error::Precondition("extremal t unbounded".into()));
                        }
                    }
                    None => break,
                }
            }
            for _ in 0..cfg.bisection_steps {
                let mid = 0.5 * (lo + hi);
                match search.feasible(mid) {
                    Some(found) => {
                        lo = mid;
                        best = found;
                    }
                    None => hi = mid,
                }
            }
            Ok(BruteForceResult {
                scalar: lo,
                witness: search.witness(lo, &best.0),
                max_u: best.1,
                degree: cfg.degree,
            })
        }
    }
}
