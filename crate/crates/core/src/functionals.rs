//! Real linear functionals `Φ(h) = (1/2π) ∫ Re(h*(e^{iθ}) • w(e^{iθ})) dθ` with
//! kernels `w` holomorphic on an annulus `ν < |ζ| < 1`, and the problems
//! built from them.
//!
//! Because `h • w` is holomorphic on the annulus, the integral may be taken
//! over the circle of radius `ν` instead of the boundary, which is how
//! [`eval_functional`] evaluates it.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cx::{self, C64, ONE, ZERO};
use crate::error::{Error, Result};

/// `coeff / (ζ − pole)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleTerm {
    #[serde(with = "cx::pair")]
    pub pole: C64,
    #[serde(with = "cx::pair")]
    pub coeff: C64,
}

/// One component of a kernel: finitely many Laurent terms plus simple poles.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "KernelJson", into = "KernelJson")]
pub struct Kernel {
    pub laurent: BTreeMap<i32, C64>,
    pub poles: Vec<PoleTerm>,
}

#[derive(Serialize, Deserialize)]
struct KernelJson {
    #[serde(default)]
    laurent: BTreeMap<i32, [f64; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    poles: Vec<PoleTerm>,
}

impl From<KernelJson> for Kernel {
    fn from(j: KernelJson) -> Self {
        Kernel {
            laurent: j.laurent.into_iter().map(|(k, v)| (k, cx::pair::from_pair(v))).collect(),
            poles: j.poles,
        }
    }
}

impl From<Kernel> for KernelJson {
    fn from(k: Kernel) -> Self {
        KernelJson {
            laurent: k.laurent.into_iter().map(|(i, v)| (i, cx::pair::to_pair(v))).collect(),
            poles: k.poles,
        }
    }
}

impl Kernel {
    pub fn monomial(index: i32, coeff: C64) -> Self {
        Kernel {
            laurent: BTreeMap::from([(index, coeff)]),
            poles: Vec::new(),
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let laurent: C64 = self.laurent.iter().map(|(&k, &c)| c * z.powi(k)).sum();
        let poles: C64 = self.poles.iter().map(|t| t.coeff / (z - t.pole)).sum();
        laurent + poles
    }

    pub fn bandwidth(&self) -> usize {
        self.laurent.keys().map(|k| k.unsigned_abs() as usize).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.laurent.values().all(|c| *c == ZERO) && self.poles.iter().all(|t| t.coeff == ZERO)
    }
}

/// `Φ` given by an `n`-vector of kernels and the contour radius `ν`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctional {
    pub nu: f64,
    pub kernels: Vec<Kernel>,
}

impl BoundaryFunctional {
    pub fn new(nu: f64, kernels: Vec<Kernel>) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(Error::InvalidParams(format!("nu = {nu} must lie in (0, 1)")));
        }
        for k in &kernels {
            if let Some(t) = k.poles.iter().find(|t| t.pole.norm() >= nu) {
                return Err(Error::InvalidParams(format!(
                    "pole {} not inside the contour radius {nu}",
                    t.pole
                )));
            }
        }
        Ok(Self { nu, kernels })
    }

    /// Kernel `coeff · ζ^index` in component `j` of `C^n`.
    pub fn unit(n: usize, j: usize, kernel: Kernel, nu: f64) -> Result<Self> {
        let mut kernels = vec![Kernel::default(); n];
        kernels[j] = kernel;
        Self::new(nu, kernels)
    }

    pub fn dim(&self) -> usize {
        self.kernels.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.kernels.iter().map(Kernel::bandwidth).max().unwrap_or(0)
    }
}

/// A holomorphic map of the disc into `C^n`.
pub trait DiscMap {
    fn dim(&self) -> usize;
    fn eval(&self, lambda: C64) -> Vec<C64>;
}

/// Polynomial disc `h_j(λ) = Σ_k coeffs[j][k] λ^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialDisc {
    #[serde(with = "cx::pair_mat")]
    pub coeffs: Vec<Vec<C64>>,
}

impl PolynomialDisc {
    pub fn new(coeffs: Vec<Vec<C64>>) -> Self {
        Self { coeffs }
    }

    /// `e_j · c · λ^k` in `C^n`.
    pub fn monomial(n: usize, j: usize, k: usize, c: C64) -> Self {
        let mut coeffs = vec![vec![ZERO]; n];
        coeffs[j] = vec![ZERO; k + 1];
        coeffs[j][k] = c;
        Self { coeffs }
    }

    pub fn constant(z: &[C64]) -> Self {
        Self {
            coeffs: z.iter().map(|&v| vec![v]).collect(),
        }
    }

    pub fn derivative_at_zero(&self) -> Vec<C64> {
        self.coeffs.iter().map(|c| c.get(1).copied().unwrap_or(ZERO)).collect()
    }
}

impl DiscMap for PolynomialDisc {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn eval(&self, lambda: C64) -> Vec<C64> {
        self.coeffs.iter().map(|c| crate::poly::eval(c, lambda)).collect()
    }
}

/// Wraps a closure as a disc map.
pub struct FnDisc<F: Fn(C64) -> Vec<C64>> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(C64) -> Vec<C64>> DiscMap for FnDisc<F> {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval(&self, lambda: C64) -> Vec<C64> {
        (self.f)(lambda)
    }
}

/// Trapezoidal rule on the circle of radius `ν`.
pub fn eval_functional(phi: &BoundaryFunctional, h: &dyn DiscMap, quad: usize) -> Result<f64> {
    if h.dim() != phi.dim() {
        return Err(Error::Dimension {
            expected: phi.dim(),
            got: h.dim(),
        });
    }
    let bw = phi.bandwidth();
    if quad <= 2 * bw || quad == 0 {
        return Err(Error::QuadratureTooSmall { got: quad, bandwidth: bw });
    }
    let mut acc = 0.0;
    for k in 0..quad {
        let z = cx::root_of_unity(k, quad) * phi.nu;
        let hv = h.eval(z);
        let dot: C64 = hv.iter().zip(&phi.kernels).map(|(hj, wj)| hj * wj.eval(z)).sum();
        acc += dot.re;
    }
    Ok(acc / quad as f64)
}

/// A problem of type `(P_m)`: functionals, real targets and the roots of `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub functionals: Vec<BoundaryFunctional>,
    pub targets: Vec<f64>,
    pub m: usize,
    #[serde(with = "cx::pair_vec")]
    pub sigma: Vec<C64>,
}

/// Contour radius halfway between the outermost root of `Q` and the circle.
pub fn default_nu(sigma: &[C64]) -> f64 {
    (1.0 + sigma.iter().map(|s| s.norm()).fold(0.0, f64::max)) / 2.0
}

impl ProblemSpec {
    pub fn len(&self) -> usize {
        self.functionals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functionals.is_empty()
    }

    pub fn evaluate(&self, h: &dyn DiscMap, quad: usize) -> Result<Vec<f64>> {
        self.functionals.iter().map(|f| eval_functional(f, h, quad)).collect()
    }

    /// `max_i |Φ_i(h) − a_i|`.
    pub fn residual(&self, h: &dyn DiscMap, quad: usize) -> Result<f64> {
        Ok(self
            .evaluate(h, quad)?
            .iter()
            .zip(&self.targets)
            .map(|(v, t)| (v - t).abs())
            .fold(0.0, f64::max))
    }

    /// Whether `Q·w_i` extends holomorphically to the disc for every kernel:
    /// each pole of `w_i` must be a root of `Q`, with poles at the origin
    /// counted against the multiplicity of `0` among the roots.
    pub fn is_type_pm(&self) -> bool {
        let origin_mult = self.sigma.iter().filter(|s| s.norm() == 0.0).count() as i32;
        self.functionals.iter().all(|f| {
            f.kernels.iter().all(|k| {
                k.laurent
                    .iter()
                    .all(|(&idx, c)| idx >= -origin_mult || *c == ZERO)
                    && k.poles
                        .iter()
                        .all(|t| t.coeff == ZERO || self.sigma.iter().any(|s| (s - t.pole).norm() < 1e-14))
            })
        })
    }
}

fn four_blocks(
    z: &[C64],
    second: &[C64],
    nu: f64,
    second_kernel: impl Fn(C64) -> Kernel,
) -> Result<(Vec<BoundaryFunctional>, Vec<f64>)> {
    let n = z.len();
    let minus_i = -cx::I;
    let mut functionals = Vec::with_capacity(4 * n);
    let mut targets = Vec::with_capacity(4 * n);
    for j in 0..n {
        functionals.push(BoundaryFunctional::unit(n, j, Kernel::monomial(0, ONE), nu)?);
        targets.push(z[j].re);
    }
    for j in 0..n {
        functionals.push(BoundaryFunctional::unit(n, j, Kernel::monomial(0, minus_i), nu)?);
        targets.push(z[j].im);
    }
    for j in 0..n {
        functionals.push(BoundaryFunctional::unit(n, j, second_kernel(ONE), nu)?);
        targets.push(second[j].re);
    }
    for j in 0..n {
        functionals.push(BoundaryFunctional::unit(n, j, second_kernel(minus_i), nu)?);
        targets.push(second[j].im);
    }
    Ok((functionals, targets))
}

/// Functionals reading `h(0)` and `h'(0)`: kernels `1`, `−i`, `1/ζ`, `−i/ζ` in
/// each coordinate, with targets `Re z_j`, `Im z_j`, `Re X_j`, `Im X_j`.
pub fn build_kappa_problem(z: &[C64], x: &[C64]) -> Result<ProblemSpec> {
    if z.len() != x.len() || z.is_empty() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: x.len(),
        });
    }
    if x.iter().all(|v| *v == ZERO) {
        return Err(Error::Precondition("direction X must be nonzero".into()));
    }
    let sigma = vec![ZERO];
    let (functionals, targets) = four_blocks(z, x, default_nu(&sigma), |c| Kernel::monomial(-1, c))?;
    Ok(ProblemSpec {
        functionals,
        targets,
        m: 1,
        sigma,
    })
}

/// Kernel `c·ζ/(ζ − σ) = c·(1 + σ/(ζ − σ))`, for which
/// `Φ(h) = Re(c·h_j(σ))` by the residue theorem. The pole coefficient is
/// `σ·c` and the constant term `c`.
pub fn point_evaluation_kernel(sigma: f64, c: C64) -> Kernel {
    Kernel {
        laurent: BTreeMap::from([(0, c)]),
        poles: vec![PoleTerm {
            pole: cx::re(sigma),
            coeff: c * sigma,
        }],
    }
}

/// Functionals reading `h(0)` and `h(σ)`; targets `Re/Im z_j`, `Re/Im w_j`.
pub fn build_ktilde_problem(z: &[C64], w: &[C64], sigma: f64) -> Result<ProblemSpec> {
    if z.len() != w.len() || z.is_empty() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: w.len(),
        });
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(Error::Precondition(format!("sigma = {sigma} must lie in (0, 1)")));
    }
    if z == w {
        return Err(Error::Precondition("points must differ".into()));
    }
    let roots = vec![cx::re(sigma)];
    let (functionals, targets) =
        four_blocks(z, w, default_nu(&roots), |c| point_evaluation_kernel(sigma, c))?;
    Ok(ProblemSpec {
        functionals,
        targets,
        m: 1,
        sigma: roots,
    })
}

/// Numerical rank of `[Φ_i(h_k)]` at tolerance `1e-8` (relative to the
/// largest singular value when that exceeds one).
pub fn independence_rank(spec: &ProblemSpec, trials: &[&dyn DiscMap], quad: usize) -> Result<usize> {
    let n_f = spec.len();
    if trials.len() < n_f {
        return Err(Error::Precondition(format!(
            "need at least {n_f} trial maps, got {}",
            trials.len()
        )));
    }
    let mut mat = DMatrix::<f64>::zeros(n_f, trials.len());
    for (k, h) in trials.iter().enumerate() {
        for (i, v) in spec.evaluate(*h, quad)?.into_iter().enumerate() {
            mat[(i, k)] = v;
        }
    }
    let sv = mat.singular_values();
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let thresh = 1e-8 * top.max(1.0);
    Ok(sv.iter().filter(|&&s| s > thresh).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::{c, re};

    const QUAD: usize = 256;

    #[test]
    fn constant_kernel_is_mean_value() {
        let h = PolynomialDisc::new(vec![vec![c(0.3, 0.2), c(0.5, -0.1), c(0.0, 0.7)]]);
        let phi = BoundaryFunctional::unit(1, 0, Kernel::monomial(0, ONE), 0.5).unwrap();
        assert!((eval_functional(&phi, &h, QUAD).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn inverse_kernel_reads_derivative() {
        let h = PolynomialDisc::new(vec![vec![ZERO], vec![c(0.3, 0.2), c(-0.8, 0.1), c(0.0, 0.7)]]);
        let phi = BoundaryFunctional::unit(2, 1, Kernel::monomial(-1, ONE), 0.6).unwrap();
        assert!((eval_functional(&phi, &h, QUAD).unwrap() + 0.8).abs() < 1e-15);
    }

    #[test]
    fn pole_kernel_matches_fine_quadrature() {
        // w = 1/(ζ − σ) against h = λ²; reference: the same integral at
        // M = 4096 directly on the unit circle where h is continuous
        let sigma = c(0.3, 0.2);
        let kernel = Kernel {
            laurent: BTreeMap::new(),
            poles: vec![PoleTerm { pole: sigma, coeff: ONE }],
        };
        let phi = BoundaryFunctional::unit(1, 0, kernel.clone(), 0.7).unwrap();
        let h = PolynomialDisc::new(vec![vec![ZERO, ZERO, ONE]]);
        let got = eval_functional(&phi, &h, 128).unwrap();
        let reference: f64 = (0..4096)
            .map(|k| {
                let z = cx::root_of_unity(k, 4096);
                (z * z * kernel.eval(z)).re
            })
            .sum::<f64>()
            / 4096.0;
        assert!((got - reference).abs() < 1e-12);
        // residues at 0 and σ: (σ² − 0)/σ = σ
        assert!((got - sigma.re).abs() < 1e-12);
    }

    #[test]
    fn quadrature_size_checked() {
        let phi = BoundaryFunctional::unit(1, 0, Kernel::monomial(-3, ONE), 0.5).unwrap();
        let h = PolynomialDisc::constant(&[ONE]);
        assert!(matches!(
            eval_functional(&phi, &h, 6),
            Err(Error::QuadratureTooSmall { .. })
        ));
        assert!(eval_functional(&phi, &h, 7).is_ok());
    }

    #[test]
    fn kappa_examples() {
        let spec = build_kappa_problem(&[ZERO], &[ONE]).unwrap();
        assert_eq!(spec.len(), 4);
        let id = PolynomialDisc::new(vec![vec![ZERO, ONE]]);
        let v = spec.evaluate(&id, QUAD).unwrap();
        for (got, want) in v.iter().zip([0.0, 0.0, 1.0, 0.0]) {
            assert!((got - want).abs() < 1e-15);
        }

        let z = [re(0.1), c(0.0, 0.2)];
        let x = [ONE, c(0.0, -1.0)];
        let spec = build_kappa_problem(&z, &x).unwrap();
        assert_eq!(spec.targets, vec![0.1, 0.0, 0.0, 0.2, 1.0, 0.0, 0.0, -1.0]);
        assert!(spec.is_type_pm());

        let v = spec.evaluate(&PolynomialDisc::constant(&z), QUAD).unwrap();
        let want = [0.1, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in v.iter().zip(want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(build_kappa_problem(&z, &[ZERO, ZERO]).is_err());
    }

    #[test]
    fn ktilde_examples() {
        let spec = build_ktilde_problem(&[ZERO], &[re(0.5)], 0.5).unwrap();
        assert!(spec.is_type_pm());
        let id = PolynomialDisc::new(vec![vec![ZERO, ONE]]);
        let v = spec.evaluate(&id, QUAD).unwrap();
        // independent check: the same integrals on the unit circle itself
        for (f, got) in spec.functionals.iter().zip(&v) {
            let direct: f64 = (0..4096)
                .map(|k| {
                    let z = cx::root_of_unity(k, 4096);
                    (z * f.kernels[0].eval(z)).re
                })
                .sum::<f64>()
                / 4096.0;
            assert!((got - direct).abs() < 1e-12);
        }
        assert!(spec.residual(&id, QUAD).unwrap() < 1e-14);

        let z = [c(0.2, -0.1)];
        let spec = build_ktilde_problem(&z, &[re(0.4)], 0.3).unwrap();
        let v = spec.evaluate(&PolynomialDisc::constant(&z), QUAD).unwrap();
        // a constant disc reads φ(σ) = z
        assert!((v[2] - 0.2).abs() < 1e-14 && (v[3] + 0.1).abs() < 1e-14);

        assert!(build_ktilde_problem(&z, &z, 0.5).is_err());
        assert!(build_ktilde_problem(&[ZERO], &[re(0.5)], 1.0).is_err());
    }

    #[test]
    fn independence_rank_examples() {
        let n = 2;
        let spec = build_kappa_problem(&[re(0.1), re(0.2)], &[ONE, ONE]).unwrap();
        let mut trials = Vec::new();
        for j in 0..n {
            for k in 0..2 {
                trials.push(PolynomialDisc::monomial(n, j, k, ONE));
                trials.push(PolynomialDisc::monomial(n, j, k, cx::I));
            }
        }
        let refs: Vec<&dyn DiscMap> = trials.iter().map(|t| t as &dyn DiscMap).collect();
        assert_eq!(independence_rank(&spec, &refs, QUAD).unwrap(), 4 * n);

        let mut dup = spec.clone();
        dup.functionals[1] = dup.functionals[0].clone();
        assert!(independence_rank(&dup, &refs, QUAD).unwrap() < 4 * n);

        let single = ProblemSpec {
            functionals: vec![BoundaryFunctional::unit(1, 0, Kernel::monomial(0, ONE), 0.5).unwrap()],
            targets: vec![1.0],
            m: 1,
            sigma: vec![ZERO],
        };
        let e1 = PolynomialDisc::constant(&[ONE]);
        assert_eq!(independence_rank(&single, &[&e1], QUAD).unwrap(), 1);
        assert!(independence_rank(&spec, &[&e1], QUAD).is_err());
    }

    #[test]
    fn json_shape() {
        let spec = build_ktilde_problem(&[ZERO], &[re(0.5)], 0.5).unwrap();
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains(r#""laurent":{"0":[1.0,0.0]}"#), "{s}");
        let back: ProblemSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cplx() -> impl Strategy<Value = C64> {
            (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| c(a, b))
        }

        fn disc(n: usize) -> impl Strategy<Value = PolynomialDisc> {
            proptest::collection::vec(proptest::collection::vec(cplx(), 1..6), n).prop_map(PolynomialDisc::new)
        }

        fn kernel() -> impl Strategy<Value = Kernel> {
            (proptest::collection::vec((-3i32..4, cplx()), 0..4), cplx(), -0.4..0.4f64).prop_map(|(terms, coeff, s)| {
                let mut k = Kernel::default();
                for (i, v) in terms {
                    *k.laurent.entry(i).or_insert(ZERO) += v;
                }
                k.poles.push(PoleTerm { pole: re(s), coeff });
                k
            })
        }

        proptest! {
            #[test]
            fn nu_independent(h in disc(2), k0 in kernel(), k1 in kernel()) {
                let vals: Vec<f64> = [0.5, 0.7, 0.9]
                    .iter()
                    .map(|&nu| {
                        let f = BoundaryFunctional::new(nu, vec![k0.clone(), k1.clone()]).unwrap();
                        eval_functional(&f, &h, QUAD).unwrap()
                    })
                    .collect();
                prop_assert!((vals[0] - vals[1]).abs() < 1e-10);
                prop_assert!((vals[0] - vals[2]).abs() < 1e-10);
            }

            #[test]
            fn linear_in_h(h1 in disc(2), h2 in disc(2), k0 in kernel(), k1 in kernel()) {
                let f = BoundaryFunctional::new(0.6, vec![k0, k1]).unwrap();
                let sum = PolynomialDisc::new(
                    (0..2)
                        .map(|j| {
                            let len = h1.coeffs[j].len().max(h2.coeffs[j].len());
                            (0..len)
                                .map(|k| {
                                    h1.coeffs[j].get(k).copied().unwrap_or(ZERO)
                                        + h2.coeffs[j].get(k).copied().unwrap_or(ZERO)
                                })
                                .collect()
                        })
                        .collect(),
                );
                let a = eval_functional(&f, &h1, QUAD).unwrap() + eval_functional(&f, &h2, QUAD).unwrap();
                let b = eval_functional(&f, &sum, QUAD).unwrap();
                prop_assert!((a - b).abs() < 1e-12);
            }

            #[test]
            fn kappa_reads_taylor(h in disc(3), z in proptest::collection::vec(cplx(), 3)) {
                let spec = build_kappa_problem(&z, &[ONE, ONE, ONE]).unwrap();
                let v = spec.evaluate(&h, QUAD).unwrap();
                let d = h.derivative_at_zero();
                for j in 0..3 {
                    let h0 = h.coeffs[j][0];
                    prop_assert!((v[j] - h0.re).abs() < 1e-12);
                    prop_assert!((v[3 + j] - h0.im).abs() < 1e-12);
                    prop_assert!((v[6 + j] - d[j].re).abs() < 1e-12);
                    prop_assert!((v[9 + j] - d[j].im).abs() < 1e-12);
                }
            }
        }
    }
}
