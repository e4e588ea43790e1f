//! Self-inversive polynomials and their factorization into
//! `r · ∏ (ζ − α_k)(1 − ᾱ_k ζ)`.
//!
//! A polynomial `P` of degree `2m` is self-inversive when its coefficients
//! satisfy `c_k = conj(c_{2m−k})`; then `ζ^{−m} P(ζ)` is real on the unit
//! circle. When that real function is also nonnegative, every root `β`
//! off the circle is paired with `1/β̄`, roots on the circle have even
//! multiplicity, and the in-disc representatives give the `α_k`.

use serde::{Deserialize, Serialize};

use crate::boundary::fourier_coefficients;
use crate::cx::{self, C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::poly;

#[derive(Debug, Clone, PartialEq)]
pub struct SelfInversivePoly {
    coeffs: Vec<C64>,
}

impl SelfInversivePoly {
    /// Wraps a coefficient vector of odd length `2m + 1`. Symmetry is not
    /// enforced here; see [`check_self_inversive`].
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len().is_multiple_of(2) {
            return Err(Error::EvenCoefficientCount(coeffs.len()));
        }
        Ok(Self { coeffs })
    }

    /// `r · ∏ (ζ − α_k)(1 − ᾱ_k ζ)`.
    pub fn from_factors(scale: f64, zeros: &[C64]) -> Self {
        let coeffs = poly::pair_product(zeros)
            .into_iter()
            .map(|c| c * scale)
            .collect();
        Self { coeffs }
    }

    pub fn m(&self) -> usize {
        self.coeffs.len() / 2
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn eval(&self, z: C64) -> C64 {
        poly::eval(&self.coeffs, z)
    }

    /// `ζ^{−m} P(ζ)` at `ζ = e^{iθ}`; real up to the symmetry residual.
    pub fn circle_value(&self, theta: f64) -> C64 {
        let z = C64::from_polar(1.0, theta);
        self.eval(z) * C64::from_polar(1.0, -(self.m() as f64) * theta)
    }

    pub fn symmetry_residual(&self) -> f64 {
        let d = self.coeffs.len() - 1;
        (0..=d)
            .map(|k| (self.coeffs[k] - self.coeffs[d - k].conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// `max_k |c_k − conj(c_{2m−k})|`.
pub fn check_self_inversive(coeffs: &[C64]) -> Result<f64> {
    Ok(SelfInversivePoly::new(coeffs.to_vec())?.symmetry_residual())
}

/// `r · ∏(ζ − α_k)(1 − ᾱ_k ζ) / ∏(1 − σ̄_k ζ)` with `r` real.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleRationalForm {
    pub scale: f64,
    #[serde(with = "cx::pair_vec")]
    pub zeros: Vec<C64>,
    #[serde(with = "cx::pair_vec")]
    pub sigma: Vec<C64>,
}

impl CircleRationalForm {
    pub fn eval(&self, z: C64) -> C64 {
        let num = poly::eval(&poly::pair_product(&self.zeros), z) * self.scale;
        let den: C64 = self.sigma.iter().map(|s| ONE - s.conj() * z).product();
        num / den
    }

    /// Numerator coefficients `r · ∏(ζ − α_k)(1 − ᾱ_k ζ)`.
    pub fn numerator(&self) -> SelfInversivePoly {
        SelfInversivePoly::from_factors(self.scale, &self.zeros)
    }
}

/// Roots whose modulus is within this distance of 1 are treated as lying on
/// the circle. Double roots split like the square root of the coefficient
/// perturbation, so the threshold scales as `sqrt(tol)`.
fn unimodular_threshold(tol: f64) -> f64 {
    tol.sqrt().clamp(1e-9, 0.1)
}

pub fn factor(p: &SelfInversivePoly, tol: f64) -> Result<CircleRationalForm> {
    if !(tol > 0.0) {
        return Err(Error::NonPositiveTolerance(tol));
    }
    let m = p.m();
    let scale = p.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(CircleRationalForm {
            scale: 0.0,
            zeros: vec![ZERO; m],
            sigma: vec![ZERO; m],
        });
    }
    let d = 2 * m;
    let q: Vec<C64> = p.coeffs.iter().map(|c| c / scale).collect();
    let sym = (0..=d)
        .map(|k| (q[k] - q[d - k].conj()).norm())
        .fold(0.0, f64::max);
    if sym > tol {
        return Err(Error::NotSelfInversive(sym));
    }
    // project onto the self-inversive class before root finding
    let q: Vec<C64> = (0..=d).map(|k| (q[k] + q[d - k].conj()) * 0.5).collect();
    let sym_poly = SelfInversivePoly { coeffs: q.clone() };

    let samples = 1024.max(16 * (d + 1));
    let min_circle = (0..samples)
        .map(|k| sym_poly.circle_value(std::f64::consts::TAU * k as f64 / samples as f64).re)
        .fold(f64::INFINITY, f64::min);
    if min_circle < -tol {
        return Err(Error::NegativeOnCircle(min_circle));
    }

    // P = ζ^k P̃ with P̃(0) ≠ 0 contributes k factors with α = 0
    let deficiency = q.iter().take(m).take_while(|c| c.norm() <= tol).count();
    let inner = &q[deficiency..=d - deficiency];
    let mut zeros = vec![ZERO; deficiency];

    let found: Vec<C64> = poly::roots(inner)?
        .into_iter()
        .map(|r| poly::polish(inner, r, 4))
        .collect();

    let u_tol = unimodular_threshold(tol);
    let mut inside = Vec::new();
    let mut outside = Vec::new();
    let mut on_circle = Vec::new();
    for r in found {
        let dist = r.norm() - 1.0;
        if dist.abs() < u_tol {
            on_circle.push(r);
        } else if dist < 0.0 {
            inside.push(r);
        } else {
            outside.push(r);
        }
    }
    if inside.len() != outside.len() {
        return Err(Error::RootFinding(format!(
            "{} roots inside the disc but {} outside",
            inside.len(),
            outside.len()
        )));
    }
    for beta in inside {
        let target = ONE / beta.conj();
        let (idx, partner) = outside
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - target)
                    .norm()
                    .partial_cmp(&(b.1 - target).norm())
                    .unwrap()
            })
            .map(|(i, &o)| (i, o))
            .expect("outside roots match inside count");
        if (partner - target).norm() > u_tol * (1.0 + beta.norm_sqr().recip()) {
            return Err(Error::RootFinding(format!(
                "root {beta} has no reflected partner"
            )));
        }
        outside.swap_remove(idx);
        zeros.push((beta + ONE / partner.conj()) * 0.5);
    }

    // unit-circle roots, grouped by angle, must come in even clusters
    on_circle.sort_by(|a, b| a.arg().partial_cmp(&b.arg()).unwrap());
    let mut clusters: Vec<Vec<C64>> = Vec::new();
    for r in on_circle {
        match clusters.last_mut() {
            Some(cl) if (cl[cl.len() - 1] - r).norm() < 4.0 * u_tol => cl.push(r),
            _ => clusters.push(vec![r]),
        }
    }
    // the angular sort may split a cluster across ±π
    if clusters.len() > 1 {
        let last = clusters.len() - 1;
        if (clusters[0][0] - clusters[last][clusters[last].len() - 1]).norm() < 4.0 * u_tol {
            let tail = clusters.pop().unwrap();
            clusters[0].extend(tail);
        }
    }
    for cl in clusters {
        if cl.len() % 2 == 1 {
            let mean: C64 = cl.iter().sum::<C64>() / cl.len() as f64;
            return Err(Error::OddUnimodularMultiplicity {
                count: cl.len(),
                root: format!("{mean}"),
            });
        }
        let mean: C64 = cl.iter().sum();
        let alpha = mean / mean.norm();
        zeros.extend(std::iter::repeat_n(alpha, cl.len() / 2));
    }
    debug_assert_eq!(zeros.len(), m);

    // least-squares real scale against the unnormalised coefficients
    let basis = poly::pair_product(&zeros);
    let dot: C64 = p
        .coeffs
        .iter()
        .zip(&basis)
        .map(|(c, b)| c * b.conj())
        .sum();
    let norm2: f64 = basis.iter().map(|b| b.norm_sqr()).sum();
    let r = dot / norm2;
    if r.im.abs() > tol * r.norm().max(scale / norm2.sqrt()) {
        return Err(Error::ScaleNotReal(r.im));
    }
    Ok(CircleRationalForm {
        scale: r.re,
        zeros,
        sigma: vec![ZERO; m],
    })
}

/// Recovers the rational form from boundary samples `φ*(e^{2πik/M})` whose
/// quotient by `∏(ζ − σ_k)` is positive on the circle.
pub fn reconstruct_from_boundary(
    samples: &[C64],
    sigma: &[C64],
    tol: f64,
) -> Result<CircleRationalForm> {
    let m = sigma.len();
    let big_m = samples.len();
    if big_m < 8 * m.max(1) {
        return Err(Error::GridSize {
            got: big_m,
            reason: format!("need at least {} samples for m = {m}", 8 * m.max(1)),
        });
    }
    if let Some(s) = sigma.iter().find(|s| s.norm() >= 1.0) {
        return Err(Error::OutsideDisc(format!("sigma {s}")));
    }
    let cleared: Vec<C64> = samples
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let z = cx::root_of_unity(k, big_m);
            v * sigma.iter().map(|s| ONE - s.conj() * z).product::<C64>()
        })
        .collect();
    let spectrum = fourier_coefficients(&cleared)?;
    let band = 0..=(2 * m) as i64;
    let scale = spectrum.max_abs().max(f64::MIN_POSITIVE);
    let out_of_band = spectrum
        .iter()
        .filter(|(k, _)| !band.contains(k))
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    if out_of_band > tol * scale.max(1.0) {
        return Err(Error::OutOfBand(out_of_band));
    }
    let coeffs: Vec<C64> = band.map(|k| spectrum.get(k)).collect();
    let mut form = factor(&SelfInversivePoly::new(coeffs)?, tol)?;
    form.sigma = sigma.to_vec();
    Ok(form)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::{c, re};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Symbolic expansion of `(ζ − α)(1 − ᾱζ)` worked by hand for α = 0.5.
    const HALF_PAIR: [f64; 3] = [-0.5, 1.25, -0.5];

    fn match_zeros(got: &[C64], want: &[C64]) -> f64 {
        let mut remaining = got.to_vec();
        let mut worst = 0.0f64;
        for w in want {
            let (i, d) = remaining
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - w).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap();
            worst = worst.max(d);
            remaining.swap_remove(i);
        }
        worst
    }

    #[test]
    fn self_inversive_residual_examples() {
        let p: Vec<C64> = HALF_PAIR.iter().map(|&x| re(x)).collect();
        assert_eq!(check_self_inversive(&p).unwrap(), 0.0);
        assert_eq!(check_self_inversive(&[re(0.), re(1.), re(0.)]).unwrap(), 0.0);
        assert_eq!(check_self_inversive(&[re(1.), re(0.), re(0.)]).unwrap(), 1.0);
        assert_eq!(
            check_self_inversive(&[re(1.), re(1.)]),
            Err(Error::EvenCoefficientCount(2))
        );
    }

    #[test]
    fn factor_examples() {
        let p = SelfInversivePoly::new(HALF_PAIR.iter().map(|&x| re(x)).collect()).unwrap();
        let f = factor(&p, 1e-10).unwrap();
        assert!((f.scale - 1.0).abs() < 1e-12);
        assert!((f.zeros[0] - re(0.5)).norm() < 1e-12);

        let zeta = SelfInversivePoly::new(vec![re(0.), re(1.), re(0.)]).unwrap();
        let f = factor(&zeta, 1e-10).unwrap();
        assert!((f.scale - 1.0).abs() < 1e-12);
        assert_eq!(f.zeros, vec![ZERO]);
    }

    #[test]
    fn factor_round_trip_m2() {
        let want = [c(0.3, -0.4), c(-0.6, 0.1)];
        let p = SelfInversivePoly::from_factors(2.5, &want);
        let f = factor(&p, 1e-10).unwrap();
        assert!((f.scale - 2.5).abs() < 1e-8);
        assert!(match_zeros(&f.zeros, &want) < 1e-8);
    }

    #[test]
    fn factor_double_root_on_circle() {
        let u = C64::from_polar(1.0, 0.7);
        let want = [u, c(0.2, 0.5)];
        let p = SelfInversivePoly::from_factors(1.3, &want);
        let f = factor(&p, 1e-10).unwrap();
        assert!(match_zeros(&f.zeros, &want) < 1e-4);
        let back = f.numerator();
        assert!(cx::max_abs_diff(back.coeffs(), p.coeffs()) < 1e-8);
    }

    #[test]
    fn factor_rejects_bad_inputs() {
        // −P is nonpositive on the circle
        let p = SelfInversivePoly::from_factors(-1.0, &[c(0.3, 0.0)]);
        assert!(matches!(factor(&p, 1e-10), Err(Error::NegativeOnCircle(_))));
        let p = SelfInversivePoly::new(vec![re(1.), re(0.), re(0.)]).unwrap();
        assert!(matches!(factor(&p, 1e-10), Err(Error::NotSelfInversive(_))));
        // simple root on the circle: ζ^{-1}P = 2cosθ − 2·… changes sign
        let p = SelfInversivePoly::new(vec![re(1.), re(0.), re(1.)]).unwrap();
        assert!(factor(&p, 1e-10).is_err());
    }

    #[test]
    fn random_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = rng.gen_range(1..=4);
            let zeros: Vec<C64> = (0..m)
                .map(|_| C64::from_polar(0.95 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..std::f64::consts::TAU)))
                .collect();
            let r = rng.gen_range(0.1..5.0);
            let p = SelfInversivePoly::from_factors(r, &zeros);
            let f = factor(&p, 1e-10).unwrap();
            assert!((f.scale - r).abs() < 1e-8 * r.max(1.0));
            assert!(match_zeros(&f.zeros, &zeros) < 1e-8, "{:?} vs {:?}", f.zeros, zeros);
            let back = f.numerator();
            assert!(cx::max_abs_diff(back.coeffs(), p.coeffs()) < 1e-8);
            let grid = 1024;
            for k in 0..grid {
                let v = back.circle_value(std::f64::consts::TAU * k as f64 / grid as f64);
                assert!(v.re >= -1e-12);
            }
        }
    }

    #[test]
    fn reconstruct_examples() {
        let m = 64;
        let grid: Vec<C64> = (0..m).map(|k| cx::root_of_unity(k, m)).collect();

        let samples: Vec<C64> = grid.iter().map(|&z| (z - 0.5) * (ONE - 0.5 * z)).collect();
        let f = reconstruct_from_boundary(&samples, &[ZERO], 1e-10).unwrap();
        assert!((f.scale - 1.0).abs() < 1e-12);
        assert!((f.zeros[0] - re(0.5)).norm() < 1e-10);

        let f = reconstruct_from_boundary(&grid, &[ZERO], 1e-10).unwrap();
        assert!((f.scale - 1.0).abs() < 1e-12);
        assert!(f.zeros[0].norm() < 1e-12);

        let cubes: Vec<C64> = grid.iter().map(|z| z.powi(3)).collect();
        assert!(matches!(
            reconstruct_from_boundary(&cubes, &[ZERO], 1e-10),
            Err(Error::OutOfBand(_))
        ));
    }

    #[test]
    fn reconstruct_with_interior_sigma() {
        let sigma = [c(0.3, 0.2)];
        let form = CircleRationalForm {
            scale: 0.7,
            zeros: vec![c(-0.4, 0.1)],
            sigma: sigma.to_vec(),
        };
        let m = 128;
        let samples: Vec<C64> = (0..m).map(|k| form.eval(cx::root_of_unity(k, m))).collect();
        let got = reconstruct_from_boundary(&samples, &sigma, 1e-10).unwrap();
        assert!((got.scale - 0.7).abs() < 1e-10);
        assert!((got.zeros[0] - form.zeros[0]).norm() < 1e-10);
        assert!(reconstruct_from_boundary(&samples, &[c(1.2, 0.0)], 1e-10).is_err());
    }
}
