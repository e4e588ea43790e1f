//! Two-point and point-direction extremal discs in `E(p)` from the `m = 1`
//! parametric family.
//!
//! The unknowns are `a_j, α_j ∈ C`, `α_0 ∈ C` and one real scalar (`σ` or
//! `t`), `4n + 3` reals in all. The equations are the `4n` real
//! interpolation conditions and the three real coefficient equations of the
//! constraint identity for `m = 1`:
//! `Σ w_j α_j = α_0` and `Σ w_j (1 + |α_j|²) = 1 + |α_0|²`.
//! Taking the scalar real and positive fixes the rotation gauge.

mod brute_force;
mod oracles;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use brute_force::{brute_force_disc, BruteForceConfig, BruteForceResult};
pub use oracles::{ball_point_direction, ball_two_point, mobius_point_direction, mobius_two_point, OracleSolution};

use crate::cx::{self, C64, ZERO};
use crate::ellipsoid::{Ellipsoid, Location};
use crate::error::{Error, Result};
use crate::extremal_map::ExtremalMapParams;
use crate::lm::{self, LmConfig};

/// Post-hoc gate on `max |φ(0) − z|, |φ(σ) − w|` (or `|φ'(0) − tX|`).
pub const INTERPOLATION_GATE: f64 = 1e-9;
/// Post-hoc gate on the constraint residual.
pub const CONSTRAINT_GATE: f64 = 1e-9;
/// Solutions whose scalars differ by less than this are ties.
pub const TIE_TOL: f64 = 1e-8;
/// Patterns are enumerated exhaustively up to this dimension.
pub const FULL_ENUMERATION_MAX_N: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeodesicProblem {
    TwoPoint {
        #[serde(with = "cx::pair_vec")]
        z: Vec<C64>,
        #[serde(with = "cx::pair_vec")]
        w: Vec<C64>,
    },
    PointDirection {
        #[serde(with = "cx::pair_vec")]
        z: Vec<C64>,
        #[serde(with = "cx::pair_vec")]
        x: Vec<C64>,
    },
}

impl GeodesicProblem {
    pub fn z(&self) -> &[C64] {
        match self {
            Self::TwoPoint { z, .. } | Self::PointDirection { z, .. } => z,
        }
    }

    /// `w` or `X`.
    pub fn second(&self) -> &[C64] {
        match self {
            Self::TwoPoint { w, .. } => w,
            Self::PointDirection { x, .. } => x,
        }
    }

    pub fn is_two_point(&self) -> bool {
        matches!(self, Self::TwoPoint { .. })
    }

    /// Dimensions, interior points, `z ≠ w`, `X ≠ 0`.
    pub fn check(&self, e: &Ellipsoid) -> Result<()> {
        let n = e.dim();
        for v in [self.z(), self.second()] {
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
        }
        let inside = |name: &str, v: &[C64]| -> Result<()> {
            let c = e.classify(v, 1e-12)?;
            if c.location != Location::Inside {
                return Err(Error::Precondition(format!("{name} is not inside E(p) (u = {:.3e})", c.value)));
            }
            Ok(())
        };
        inside("z", self.z())?;
        match self {
            Self::TwoPoint { z, w } => {
                inside("w", w)?;
                if z == w {
                    return Err(Error::Precondition("points must differ".into()));
                }
            }
            Self::PointDirection { x, .. } => {
                if x.iter().all(|v| *v == ZERO) {
                    return Err(Error::Precondition("direction X must be nonzero".into()));
                }
            }
        }
        Ok(())
    }

    /// Indices not forced to vanish identically.
    pub fn active_indices(&self) -> Vec<usize> {
        let (z, s) = (self.z(), self.second());
        (0..z.len()).filter(|&j| z[j] != ZERO || s[j] != ZERO).collect()
    }

    fn restrict(&self, idx: &[usize]) -> Self {
        let pick = |v: &[C64]| idx.iter().map(|&j| v[j]).collect::<Vec<_>>();
        match self {
            Self::TwoPoint { z, w } => Self::TwoPoint { z: pick(z), w: pick(w) },
            Self::PointDirection { z, x } => Self::PointDirection { z: pick(z), x: pick(x) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Gate on the boundary defect.
    pub tol: f64,
    /// Random starts per pattern, in addition to the heuristic start.
    pub starts: usize,
    pub seed: u64,
    /// Boundary grid for the post-hoc defect.
    pub grid: usize,
    /// Restricts the search to one `r` pattern (over all `n` indices).
    pub r_pattern: Option<Vec<u8>>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            starts: 8,
            seed: 0,
            grid: 512,
            r_pattern: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub interpolation: f64,
    pub constraint: f64,
    pub boundary: f64,
    pub boundary_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub patterns_tried: usize,
    pub starts_attempted: usize,
    pub starts_converged: usize,
    pub validated: usize,
    pub r_pattern: Vec<u8>,
    pub iterations: usize,
    /// `‖r‖∞` at the start and after the last few steps of the winning run.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Certification {
    /// Convex `E(p)`: every member of the family is extremal.
    #[serde(rename = "geodesic")]
    Geodesic,
    #[serde(rename = "candidate (necessary conditions only)")]
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternative {
    pub scalar: f64,
    pub params: ExtremalMapParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub problem: GeodesicProblem,
    /// Coordinates carried by `params`; the others vanish identically.
    pub active: Vec<usize>,
    pub params: ExtremalMapParams,
    /// `σ` for two-point problems, `t` for point-direction problems.
    pub scalar: f64,
    pub residuals: Residuals,
    pub diagnostics: Diagnostics,
    pub certification: Certification,
    /// Other validated solutions tied with `scalar`.
    pub alternatives: Vec<Alternative>,
}

impl SolveResult {
    /// The full `n`-dimensional disc at `λ`.
    pub fn evaluate(&self, e: &Ellipsoid, lambda: C64) -> Result<Vec<C64>> {
        let reduced = e.restrict(&self.active)?;
        let vals = self.params.evaluate(&reduced, lambda)?;
        let mut out = vec![ZERO; e.dim()];
        for (&j, v) in self.active.iter().zip(vals) {
            out[j] = v;
        }
        Ok(out)
    }
}

/// `φ(0) = z`, `φ(σ) = w` with the smallest `σ`.
pub fn solve_two_point(e: &Ellipsoid, z: &[C64], w: &[C64], cfg: &SolveConfig) -> Result<SolveResult> {
    solve(e, &GeodesicProblem::TwoPoint { z: z.to_vec(), w: w.to_vec() }, cfg)
}

/// `φ(0) = z`, `φ'(0) = tX` with the largest `t`.
pub fn solve_point_direction(e: &Ellipsoid, z: &[C64], x: &[C64], cfg: &SolveConfig) -> Result<SolveResult> {
    solve(e, &GeodesicProblem::PointDirection { z: z.to_vec(), x: x.to_vec() }, cfg)
}

pub fn solve(e: &Ellipsoid, problem: &GeodesicProblem, cfg: &SolveConfig) -> Result<SolveResult> {
    if !(cfg.tol > 0.0) {
        return Err(Error::NonPositiveTolerance(cfg.tol));
    }
    problem.check(e)?;
    let active = problem.active_indices();
    let er = e.restrict(&active)?;
    let pr = problem.restrict(&active);

    let patterns: Vec<Vec<u8>> = match &cfg.r_pattern {
        Some(full) => {
            if full.len() != e.dim() || full.iter().any(|&r| r > 1) {
                return Err(Error::InvalidParams(format!("r pattern must have {} entries in {{0,1}}", e.dim())));
            }
            vec![active.iter().map(|&j| full[j]).collect()]
        }
        None => patterns_for(&pr),
    };

    let mut diag = Diagnostics {
        patterns_tried: 0,
        starts_attempted: 0,
        starts_converged: 0,
        validated: 0,
        r_pattern: Vec::new(),
        iterations: 0,
        history: Vec::new(),
    };
    let mut found: Vec<(f64, ExtremalMapParams, Residuals, lm::LmOutcome)> = Vec::new();
    for (pi, r) in patterns.iter().enumerate() {
        if forced_violation(&pr, r) {
            continue;
        }
        diag.patterns_tried += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (pi as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let system = System { e: &er, problem: &pr, r };
        for s in 0..=cfg.starts {
            let Some(x0) = system.start(s, &mut rng) else { continue };
            diag.starts_attempted += 1;
            let lm_cfg = LmConfig {
                max_iter: 300,
                residual_tol: 1e-14,
                ..LmConfig::default()
            };
            let out = match system.direct(&x0, &lm_cfg) {
                Some(out) if out.max_residual() <= 1e-10 => out,
                _ => match system.continuation(&x0, &lm_cfg) {
                    Some(out) if out.max_residual() <= 1e-10 => out,
                    _ => continue,
                },
            };
            diag.starts_converged += 1;
            let (params, scalar) = system.unpack(&out.x);
            if let Some(res) = verify(&er, &pr, &params, scalar, cfg) {
                found.push((scalar, params, res, out));
            }
        }
    }
    diag.validated = found.len();
    if found.is_empty() {
        return Err(Error::NoConvergence(format!(
            "{} starts over {} patterns, {} converged, none validated",
            diag.starts_attempted, diag.patterns_tried, diag.starts_converged
        )));
    }

    // smallest σ, largest t; ties by pattern order then parameters
    let key = |s: f64| if pr.is_two_point() { s } else { -s };
    found.sort_by(|a, b| {
        key(a.0)
            .partial_cmp(&key(b.0))
            .unwrap()
            .then_with(|| a.1.r.cmp(&b.1.r))
    });
    let (scalar, params, residuals, run) = found[0].clone();
    let mut alternatives: Vec<Alternative> = Vec::new();
    for (s, p, _, _) in found.iter().skip(1) {
        if (s - scalar).abs() >= TIE_TOL {
            continue;
        }
        let same = |q: &ExtremalMapParams| q.r == p.r && params_distance(q, p) < 1e-6;
        if same(&params) || alternatives.iter().any(|a| same(&a.params)) {
            continue;
        }
        alternatives.push(Alternative { scalar: *s, params: p.clone() });
    }
    diag.r_pattern = params.r[0].clone();
    diag.iterations = run.iterations;
    let h = &run.history;
    diag.history = std::iter::once(h[0]).chain(h.iter().skip(1).rev().take(5).rev().copied()).collect();

    Ok(SolveResult {
        problem: problem.clone(),
        active,
        params,
        scalar,
        residuals,
        diagnostics: diag,
        certification: if e.is_convex() { Certification::Geodesic } else { Certification::Candidate },
        alternatives,
    })
}

fn params_distance(a: &ExtremalMapParams, b: &ExtremalMapParams) -> f64 {
    cx::max_abs_diff(&a.a, &b.a)
        .max(cx::max_abs_diff(&a.alpha0, &b.alpha0))
        .max(cx::max_abs_diff(&a.alpha[0], &b.alpha[0]))
}

/// A vanishing `z_j` or `w_j` can only come from a Blaschke factor.
fn forced_ones(problem: &GeodesicProblem) -> Vec<bool> {
    let (z, s) = (problem.z(), problem.second());
    (0..z.len())
        .map(|j| z[j] == ZERO || (problem.is_two_point() && s[j] == ZERO))
        .collect()
}

fn forced_violation(problem: &GeodesicProblem, r: &[u8]) -> bool {
    forced_ones(problem).iter().zip(r).any(|(&f, &rj)| f && rj == 0)
}

/// All patterns for small `n`; otherwise the forced ones plus a zero
/// wherever the straight segment from `z` toward `w` (or along `X`)
/// passes near the origin of that coordinate.
fn patterns_for(problem: &GeodesicProblem) -> Vec<Vec<u8>> {
    let n = problem.z().len();
    if n <= FULL_ENUMERATION_MAX_N {
        return (0..1u32 << n)
            .map(|bits| (0..n).map(|j| ((bits >> j) & 1) as u8).collect())
            .collect();
    }
    let forced = forced_ones(problem);
    let (z, s) = (problem.z(), problem.second());
    vec![(0..n)
        .map(|j| {
            let dir = if problem.is_two_point() { s[j] - z[j] } else { s[j] };
            let crossing = dir != ZERO && (-z[j] / dir).norm() < 1.0;
            u8::from(forced[j] || crossing)
        })
        .collect()]
}

/// Post-hoc residuals from the parameters alone; `None` if a gate fails.
fn verify(e: &Ellipsoid, problem: &GeodesicProblem, params: &ExtremalMapParams, scalar: f64, cfg: &SolveConfig) -> Option<Residuals> {
    params.validate().ok()?;
    if !(scalar > 0.0) || (problem.is_two_point() && !(scalar < 1.0)) {
        return None;
    }
    let at0 = params.evaluate(e, ZERO).ok()?;
    let second = match problem {
        GeodesicProblem::TwoPoint { .. } => params.evaluate(e, cx::re(scalar)).ok()?,
        GeodesicProblem::PointDirection { .. } => params
            .derivative(e, ZERO)
            .ok()?
            .into_iter()
            .map(|d| d / scalar)
            .collect(),
    };
    let interpolation = cx::max_abs_diff(&at0, problem.z()).max(cx::max_abs_diff(&second, problem.second()));
    let constraint = params.constraint_residual(e).ok()?;
    let defect = params.boundary_defect(e, cfg.grid).ok()?;
    let res = Residuals {
        interpolation,
        constraint,
        boundary: defect.max,
        boundary_excluded: defect.excluded,
    };
    (interpolation < INTERPOLATION_GATE && constraint < CONSTRAINT_GATE && defect.max < cfg.tol).then_some(res)
}

fn to_disc(b: C64) -> C64 {
    let r = b.norm();
    if r == 0.0 {
        ZERO
    } else {
        b * (r.tanh() / r)
    }
}

fn from_disc(a: C64) -> C64 {
    let r = a.norm();
    if r == 0.0 {
        ZERO
    } else {
        a * (r.min(1.0 - 1e-12).atanh() / r)
    }
}

/// The square system for one `r` pattern.
struct System<'a> {
    e: &'a Ellipsoid,
    problem: &'a GeodesicProblem,
    r: &'a [u8],
}

impl System<'_> {
    fn n(&self) -> usize {
        self.r.len()
    }

    /// Layout: `(a_j, α_j)` pairs as four reals each, then `α_0`, then the
    /// scalar. Disc points and the scalar go through unconstrained charts
    /// (radial `tanh`, logistic for `σ`, `exp` for `t`) so that no start or
    /// step can leave the domain; instances with `σ` close to 1 otherwise
    /// stall against the wall.
    fn unpack(&self, x: &[f64]) -> (ExtremalMapParams, f64) {
        let n = self.n();
        let a = (0..n).map(|j| cx::c(x[4 * j], x[4 * j + 1])).collect();
        let alpha = (0..n).map(|j| to_disc(cx::c(x[4 * j + 2], x[4 * j + 3]))).collect();
        let alpha0 = to_disc(cx::c(x[4 * n], x[4 * n + 1]));
        let params = ExtremalMapParams {
            a,
            alpha0: vec![alpha0],
            alpha: vec![alpha],
            r: vec![self.r.to_vec()],
        };
        let s = x[4 * n + 2];
        let scalar = if self.problem.is_two_point() { 1.0 / (1.0 + (-s).exp()) } else { s.exp() };
        (params, scalar)
    }

    fn pack(&self, params: &ExtremalMapParams, scalar: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(4 * self.n() + 3);
        for j in 0..self.n() {
            let (a, al) = (params.a[j], from_disc(params.alpha[0][j]));
            x.extend([a.re, a.im, al.re, al.im]);
        }
        let b0 = from_disc(params.alpha0[0]);
        let s = if self.problem.is_two_point() { (scalar / (1.0 - scalar)).ln() } else { scalar.ln() };
        x.extend([b0.re, b0.im, s]);
        x
    }

    /// `φ(σ)` or `φ'(0)/t`.
    fn second_value(&self, params: &ExtremalMapParams, s: f64) -> Vec<C64> {
        match self.problem {
            GeodesicProblem::TwoPoint { .. } => params.eval_raw(self.e, cx::re(s)),
            GeodesicProblem::PointDirection { .. } => {
                params.derivative_raw(self.e, ZERO).into_iter().map(|d| d / s).collect()
            }
        }
    }

    /// Interpolation residuals against `(z, target)` followed by the
    /// constraint equations; the second block is dropped when `target` is
    /// `None`.
    fn residual(&self, x: &[f64], target: Option<&[C64]>) -> Option<Vec<f64>> {
        let (params, s) = self.unpack(x);
        if !(s > 0.0) || (self.problem.is_two_point() && !(s < 1.0)) || !s.is_finite() {
            return None;
        }
        if params.a.contains(&ZERO) {
            return None;
        }
        let mut out = Vec::with_capacity(x.len());
        let at0 = params.eval_raw(self.e, ZERO);
        for (v, t) in at0.iter().zip(self.problem.z()) {
            out.extend([v.re - t.re, v.im - t.im]);
        }
        if let Some(target) = target {
            let scale = if self.problem.is_two_point() { 1.0 } else { s };
            for (v, t) in self.second_value(&params, s).iter().zip(target) {
                let d = (v - t) * scale;
                out.extend([d.re, d.im]);
            }
        }
        let weights = params.weights(self.e);
        let mut lin = -params.alpha0[0];
        let mut quad = -(1.0 + params.alpha0[0].norm_sqr());
        for j in 0..self.n() {
            lin += params.alpha[0][j] * weights[j];
            quad += weights[j] * (1.0 + params.alpha[0][j].norm_sqr());
        }
        out.extend([lin.re, lin.im, quad]);
        Some(out)
    }

    /// Newton from `x0` on the full system.
    fn direct(&self, x0: &[f64], cfg: &LmConfig) -> Option<lm::LmOutcome> {
        lm::minimize(|x| self.residual(x, Some(self.problem.second())), x0, cfg)
    }

    /// Homotopy fallback: first satisfy `φ(0) = z` and the constraint with
    /// the scalar frozen, then move the second datum from the value of that
    /// map to the requested one in adaptive steps.
    fn continuation(&self, x0: &[f64], cfg: &LmConfig) -> Option<lm::LmOutcome> {
        let k = x0.len() - 1;
        let frozen = x0[k];
        let partial = lm::minimize(
            |y| {
                let mut x = y.to_vec();
                x.push(frozen);
                self.residual(&x, None)
            },
            &x0[..k],
            cfg,
        )?;
        if partial.max_residual() > 1e-12 {
            return None;
        }
        let mut x = partial.x;
        x.push(frozen);
        let (params, s) = self.unpack(&x);
        let from = self.second_value(&params, s);
        let to = self.problem.second();
        let step_cfg = LmConfig { max_iter: 60, residual_tol: 1e-12, ..*cfg };
        let (mut tau, mut step) = (0.0f64, 0.2f64);
        while tau < 1.0 {
            let next = (tau + step).min(1.0);
            let target: Vec<C64> = from.iter().zip(to).map(|(a, b)| a + (b - a) * next).collect();
            match lm::minimize(|y| self.residual(y, Some(&target)), &x, &step_cfg) {
                Some(out) if out.max_residual() <= 1e-11 => {
                    x = out.x;
                    tau = next;
                    step = (step * 1.5).min(0.5);
                }
                _ => {
                    step *= 0.5;
                    if step < 1e-3 {
                        return None;
                    }
                }
            }
        }
        self.direct(&x, cfg)
    }

    /// Largest scalar (two-point: smallest `σ`) for which the straight disc
    /// through the data stays inside, found by bisection.
    fn linear_scalar(&self) -> f64 {
        let z = self.problem.z();
        let s = self.problem.second();
        let grid = 256;
        let fits = |v: f64| {
            (0..grid).all(|k| {
                let p = cx::root_of_unity(k, grid);
                let pt: Vec<C64> = match self.problem {
                    GeodesicProblem::TwoPoint { .. } => z.iter().zip(s).map(|(a, b)| a + (b - a) * p / v).collect(),
                    GeodesicProblem::PointDirection { .. } => z.iter().zip(s).map(|(a, b)| a + b * p * v).collect(),
                };
                self.e.defining_value_unchecked(&pt) < 0.0
            })
        };
        if self.problem.is_two_point() {
            let (mut lo, mut hi) = (0.0, 1.0);
            if !fits(0.999) {
                return 0.9;
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if fits(mid) {
                    hi = mid
                } else {
                    lo = mid
                }
            }
            hi
        } else {
            let (mut lo, mut hi) = (0.0, 1.0);
            while fits(hi) && hi < 1e8 {
                lo = hi;
                hi *= 2.0;
            }
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if fits(mid) {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            lo.max(1e-6)
        }
    }

    /// Start `0` is the straight-disc heuristic; later starts perturb it.
    /// Zeros are placed where the straight disc vanishes, `a_j` is read off
    /// from `φ(0) = z`, and the constraint is then balanced exactly.
    fn start(&self, index: usize, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
        let n = self.n();
        let z = self.problem.z();
        let s = self.problem.second();
        let lin = self.linear_scalar();
        let scalar = if index == 0 {
            lin
        } else if self.problem.is_two_point() {
            (lin * rng.gen_range(0.4..1.0)).clamp(1e-3, 0.999)
        } else {
            lin * rng.gen_range(1.0..2.5)
        };
        let spread = if index == 0 { 0.0 } else { 0.4 };
        let mut alpha = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        for j in 0..n {
            let jitter = cx::c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * spread;
            if self.r[j] == 1 {
                if z[j] == ZERO {
                    alpha.push(ZERO);
                    let slope = if self.problem.is_two_point() { s[j] / scalar } else { s[j] * scalar };
                    a.push(if slope == ZERO { cx::ONE } else { slope });
                    continue;
                }
                let dir = if self.problem.is_two_point() { (s[j] - z[j]) / scalar } else { s[j] * scalar };
                let mut al = if dir == ZERO { cx::re(0.5) } else { -z[j] / dir } + jitter;
                if al.norm() > 0.95 {
                    al *= 0.95 / al.norm();
                }
                if al == ZERO {
                    al = cx::re(0.1);
                }
                alpha.push(al);
                a.push(-z[j] / al);
            } else {
                let mut al = jitter;
                if al.norm() > 0.95 {
                    al *= 0.95 / al.norm();
                }
                alpha.push(al);
                a.push(z[j]);
            }
        }
        let weights: Vec<f64> = a.iter().zip(self.e.exponents()).map(|(&v, &p)| cx::abs_pow2p(v, p)).collect();
        let phases: Vec<f64> = a.iter().map(|v| v.arg()).collect();
        let params =
            ExtremalMapParams::balanced(self.e, vec![alpha], vec![self.r.to_vec()], &weights, &phases).ok()?;
        if params.alpha0[0].norm() > 1.0 {
            return None;
        }
        Some(self.pack(&params, scalar))
    }
}
