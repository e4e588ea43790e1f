//! The parametric family of extremal discs in `E(p)`:
//!
//! ```text
//! φ_j(λ) = a_j ∏_k ((λ − α_kj)/(1 − ᾱ_kj λ))^{r_kj} ((1 − ᾱ_kj λ)/(1 − ᾱ_k0 λ))^{1/p_j}
//! ```
//!
//! subject to the polynomial identity
//! `Σ_j |a_j|^{2p_j} ∏_k (ζ − α_kj)(1 − ᾱ_kj ζ) = ∏_k (ζ − α_k0)(1 − ᾱ_k0 ζ)`.
//!
//! Fractional powers use principal logarithms of each factor; this is the
//! holomorphic branch equal to 1 at the origin because `Re(1 − ᾱλ) > 0`
//! whenever `|α| ≤ 1` and `|λ| < 1`.

use serde::{Deserialize, Serialize};

use crate::boundary::check_grid_size;
use crate::cx::{self, abs_pow2p, C64, ONE, ZERO};
use crate::ellipsoid::Ellipsoid;
use crate::error::{Error, Result};
use crate::poly;
use crate::polyfactor::{self, SelfInversivePoly};

/// Slack on `|α| ≤ 1` when validating parameters produced by a solver.
pub const CLOSED_DISC_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ParamsJson", into = "ParamsJson")]
pub struct ExtremalMapParams {
    pub a: Vec<C64>,
    /// `α_k0`, one per `k`.
    pub alpha0: Vec<C64>,
    /// `α_kj`, indexed `[k][j]`.
    pub alpha: Vec<Vec<C64>>,
    /// `r_kj ∈ {0, 1}`, indexed `[k][j]`.
    pub r: Vec<Vec<u8>>,
}

#[derive(Serialize, Deserialize)]
struct ParamsJson {
    m: usize,
    n: usize,
    #[serde(with = "cx::pair_vec")]
    a: Vec<C64>,
    #[serde(with = "cx::pair_vec")]
    alpha0: Vec<C64>,
    #[serde(with = "cx::pair_mat")]
    alpha: Vec<Vec<C64>>,
    r: Vec<Vec<u8>>,
}

impl TryFrom<ParamsJson> for ExtremalMapParams {
    type Error = Error;

    fn try_from(j: ParamsJson) -> Result<Self> {
        let p = ExtremalMapParams::new(j.a, j.alpha0, j.alpha, j.r)?;
        if p.m() != j.m || p.n() != j.n {
            return Err(Error::InvalidParams(format!(
                "declared m = {}, n = {} but arrays give m = {}, n = {}",
                j.m,
                j.n,
                p.m(),
                p.n()
            )));
        }
        Ok(p)
    }
}

impl From<ExtremalMapParams> for ParamsJson {
    fn from(p: ExtremalMapParams) -> Self {
        ParamsJson {
            m: p.m(),
            n: p.n(),
            a: p.a,
            alpha0: p.alpha0,
            alpha: p.alpha,
            r: p.r,
        }
    }
}

/// Boundary samples `φ*(e^{2πik/M})`; `finite[k]` is false where some
/// factor `1 − ᾱ_k0 ζ` vanishes or the value overflowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace {
    /// `values[j][k]`
    pub values: Vec<Vec<C64>>,
    pub finite: Vec<bool>,
}

impl BoundaryTrace {
    pub fn grid_size(&self) -> usize {
        self.finite.len()
    }

    pub fn point(&self, k: usize) -> Vec<C64> {
        self.values.iter().map(|row| row[k]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDefect {
    pub max: f64,
    pub excluded: usize,
}

impl ExtremalMapParams {
    /// Shape-checked constructor. Disc-membership invariants are checked
    /// separately by [`validate`](Self::validate) so solvers can pass through
    /// infeasible points.
    pub fn new(a: Vec<C64>, alpha0: Vec<C64>, alpha: Vec<Vec<C64>>, r: Vec<Vec<u8>>) -> Result<Self> {
        let n = a.len();
        let m = alpha0.len();
        if n == 0 || m == 0 {
            return Err(Error::InvalidParams("need m ≥ 1 and n ≥ 1".into()));
        }
        if alpha.len() != m || r.len() != m {
            return Err(Error::InvalidParams(format!(
                "alpha and r must have m = {m} rows"
            )));
        }
        for k in 0..m {
            if alpha[k].len() != n || r[k].len() != n {
                return Err(Error::InvalidParams(format!("row {k} must have n = {n} entries")));
            }
            if let Some(&bad) = r[k].iter().find(|&&x| x > 1) {
                return Err(Error::InvalidParams(format!("r flag {bad} not in {{0,1}}")));
            }
        }
        Ok(Self { a, alpha0, alpha, r })
    }

    /// The map `λ ↦ a·λ^{r}` with all `α = 0` and `m = 1`.
    pub fn flat(a: Vec<C64>, r: Vec<u8>) -> Result<Self> {
        let n = a.len();
        Self::new(a, vec![ZERO], vec![vec![ZERO; n]], vec![r])
    }

    /// Builds parameters satisfying the constraint identity from the zeros
    /// `α_kj`, positive (unnormalised) weights and phases of `a_j`: the left
    /// side is factored to obtain `α_k0` and the common scale.
    pub fn balanced(
        ellipsoid: &Ellipsoid,
        alpha: Vec<Vec<C64>>,
        r: Vec<Vec<u8>>,
        weights: &[f64],
        phases: &[f64],
    ) -> Result<Self> {
        let n = ellipsoid.dim();
        if weights.len() != n || phases.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: weights.len().min(phases.len()),
            });
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidParams("weights must be positive".into()));
        }
        let m = alpha.len();
        let mut lhs = vec![ZERO; 2 * m + 1];
        for j in 0..n {
            let col: Vec<C64> = (0..m).map(|k| alpha[k][j]).collect();
            for (acc, c) in lhs.iter_mut().zip(poly::pair_product(&col)) {
                *acc += c * weights[j];
            }
        }
        let form = polyfactor::factor(&SelfInversivePoly::new(lhs)?, 1e-10)?;
        let a = (0..n)
            .map(|j| {
                let w = weights[j] / form.scale;
                C64::from_polar((w.ln() / (2.0 * ellipsoid.exponents()[j])).exp(), phases[j])
            })
            .collect();
        let params = Self::new(a, form.zeros, alpha, r)?;
        params.check_dim(ellipsoid)?;
        Ok(params)
    }

    pub fn m(&self) -> usize {
        self.alpha0.len()
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    fn check_dim(&self, e: &Ellipsoid) -> Result<()> {
        if e.dim() != self.n() {
            return Err(Error::Dimension {
                expected: self.n(),
                got: e.dim(),
            });
        }
        Ok(())
    }

    /// Checks `a_j ≠ 0`, `|α| ≤ 1`, and `|α_kj| < 1` where `r_kj = 1`.
    pub fn validate(&self) -> Result<()> {
        if let Some(j) = self.a.iter().position(|&a| a == ZERO || !a.norm().is_finite()) {
            return Err(Error::InvalidParams(format!("a[{j}] must be nonzero and finite")));
        }
        for (k, &a0) in self.alpha0.iter().enumerate() {
            if !(a0.norm() <= 1.0 + CLOSED_DISC_SLACK) {
                return Err(Error::InvalidParams(format!("|alpha0[{k}]| = {} > 1", a0.norm())));
            }
        }
        for k in 0..self.m() {
            for j in 0..self.n() {
                let x = self.alpha[k][j].norm();
                if !(x <= 1.0 + CLOSED_DISC_SLACK) {
                    return Err(Error::InvalidParams(format!("|alpha[{k}][{j}]| = {x} > 1")));
                }
                if self.r[k][j] == 1 && x >= 1.0 {
                    return Err(Error::InvalidParams(format!(
                        "alpha[{k}][{j}] must lie in the open disc when r = 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `w_j = |a_j|^{2p_j}`.
    pub fn weights(&self, e: &Ellipsoid) -> Vec<f64> {
        self.a
            .iter()
            .zip(e.exponents())
            .map(|(&a, &p)| abs_pow2p(a, p))
            .collect()
    }

    /// The two sides of the constraint identity as degree-`2m` polynomials.
    pub fn constraint_sides(&self, e: &Ellipsoid) -> (Vec<C64>, Vec<C64>) {
        let m = self.m();
        let w = self.weights(e);
        let mut lhs = vec![ZERO; 2 * m + 1];
        for (j, &wj) in w.iter().enumerate() {
            let col: Vec<C64> = (0..m).map(|k| self.alpha[k][j]).collect();
            for (acc, c) in lhs.iter_mut().zip(poly::pair_product(&col)) {
                *acc += c * wj;
            }
        }
        (lhs, poly::pair_product(&self.alpha0))
    }

    /// Largest coefficient mismatch in the constraint identity.
    pub fn constraint_residual(&self, e: &Ellipsoid) -> Result<f64> {
        self.check_dim(e)?;
        let (lhs, rhs) = self.constraint_sides(e);
        Ok(cx::max_abs_diff(&lhs, &rhs))
    }

    /// Evaluates `φ(λ)` for `|λ| < 1`.
    pub fn evaluate(&self, e: &Ellipsoid, lambda: C64) -> Result<Vec<C64>> {
        self.check_dim(e)?;
        if !(lambda.norm() < 1.0) {
            return Err(Error::OutsideDisc(format!("lambda = {lambda}")));
        }
        self.validate()?;
        Ok(self.eval_raw(e, lambda))
    }

    /// Formula evaluation without domain or invariant checks.
    pub(crate) fn eval_raw(&self, e: &Ellipsoid, lambda: C64) -> Vec<C64> {
        (0..self.n())
            .map(|j| self.component(e.exponents()[j], j, lambda))
            .collect()
    }

    fn component(&self, p: f64, j: usize, lambda: C64) -> C64 {
        let mut blaschke = ONE;
        let mut log_ratio = ZERO;
        for k in 0..self.m() {
            let akj = self.alpha[k][j];
            let base = ONE - akj.conj() * lambda;
            if self.r[k][j] == 1 {
                blaschke *= (lambda - akj) / base;
            }
            log_ratio += base.ln() - (ONE - self.alpha0[k].conj() * lambda).ln();
        }
        self.a[j] * blaschke * (log_ratio / p).exp()
    }

    /// `φ'(λ)` by logarithmic differentiation of the zero-free part and the
    /// product rule on the Blaschke numerators.
    pub fn derivative(&self, e: &Ellipsoid, lambda: C64) -> Result<Vec<C64>> {
        self.check_dim(e)?;
        if !(lambda.norm() < 1.0) {
            return Err(Error::OutsideDisc(format!("lambda = {lambda}")));
        }
        Ok(self.derivative_raw(e, lambda))
    }

    pub(crate) fn derivative_raw(&self, e: &Ellipsoid, lambda: C64) -> Vec<C64> {
        (0..self.n())
            .map(|j| {
                let p = e.exponents()[j];
                let zeros: Vec<C64> = (0..self.m())
                    .filter(|&k| self.r[k][j] == 1)
                    .map(|k| self.alpha[k][j])
                    .collect();
                // φ_j = Z·H with Z = ∏(λ − α) over r = 1 and H zero-free
                let z_val: C64 = zeros.iter().map(|&a| lambda - a).product();
                let z_der: C64 = (0..zeros.len())
                    .map(|i| {
                        zeros
                            .iter()
                            .enumerate()
                            .filter(|&(l, _)| l != i)
                            .map(|(_, &a)| lambda - a)
                            .product::<C64>()
                    })
                    .sum();
                let mut log_h = ZERO;
                let mut dlog_h = ZERO;
                for k in 0..self.m() {
                    let akj = self.alpha[k][j].conj();
                    let ak0 = self.alpha0[k].conj();
                    let base = ONE - akj * lambda;
                    let den = ONE - ak0 * lambda;
                    if self.r[k][j] == 1 {
                        log_h -= base.ln();
                        dlog_h += akj / base;
                    }
                    log_h += (base.ln() - den.ln()) / p;
                    dlog_h += (-akj / base + ak0 / den) / p;
                }
                let h = self.a[j] * log_h.exp();
                z_der * h + z_val * h * dlog_h
            })
            .collect()
    }

    pub fn boundary_trace(&self, e: &Ellipsoid, grid: usize) -> Result<BoundaryTrace> {
        self.check_dim(e)?;
        check_grid_size(grid, (4 * self.m() + 4).next_power_of_two())?;
        let mut values = vec![Vec::with_capacity(grid); self.n()];
        let mut finite = Vec::with_capacity(grid);
        for k in 0..grid {
            let z = cx::root_of_unity(k, grid);
            let pole = self.alpha0.iter().any(|a0| (ONE - a0.conj() * z) == ZERO);
            let v = self.eval_raw(e, z);
            let ok = !pole && v.iter().all(|x| x.re.is_finite() && x.im.is_finite());
            finite.push(ok);
            for (row, x) in values.iter_mut().zip(v) {
                row.push(if ok { x } else { C64::new(f64::NAN, f64::NAN) });
            }
        }
        Ok(BoundaryTrace { values, finite })
    }

    /// `max_k |u(φ*(ζ_k))|` over finite samples.
    pub fn boundary_defect(&self, e: &Ellipsoid, grid: usize) -> Result<BoundaryDefect> {
        let trace = self.boundary_trace(e, grid)?;
        let mut max = 0.0f64;
        let mut excluded = 0;
        for k in 0..grid {
            if !trace.finite[k] {
                excluded += 1;
                continue;
            }
            max = max.max(e.defining_value_unchecked(&trace.point(k)).abs());
        }
        if excluded == grid {
            return Err(Error::AllSamplesNonFinite);
        }
        Ok(BoundaryDefect { max, excluded })
    }

    /// For each `j`, the zeros `{α_kj : r_kj = 1}` of `φ_j` in the disc.
    pub fn component_zeros(&self) -> Vec<Vec<C64>> {
        (0..self.n())
            .map(|j| {
                (0..self.m())
                    .filter(|&k| self.r[k][j] == 1)
                    .map(|k| self.alpha[k][j])
                    .collect()
            })
            .collect()
    }

    /// Parameters of `λ ↦ diag(e^{iτ r_j}) φ(e^{−iτ} λ)`: every `α` rotated by `e^{iτ}`.
    pub fn rotated(&self, tau: f64) -> Self {
        let rot = C64::from_polar(1.0, tau);
        Self {
            a: self.a.clone(),
            alpha0: self.alpha0.iter().map(|a| a * rot).collect(),
            alpha: self
                .alpha
                .iter()
                .map(|row| row.iter().map(|a| a * rot).collect())
                .collect(),
            r: self.r.clone(),
        }
    }
}
