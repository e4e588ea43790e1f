//! Closed-form references: Möbius maps of the disc and the Euclidean ball.

use serde::{Deserialize, Serialize};

use crate::cx::{C64, ONE, ZERO};
use crate::error::{Error, Result};
use crate::extremal_map::ExtremalMapParams;

/// Extremal scalar and the disc realising it, in parametric form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub scalar: f64,
    pub params: ExtremalMapParams,
}

fn check_disc(name: &str, z: C64) -> Result<()> {
    if !(z.norm() < 1.0) {
        return Err(Error::OutsideDisc(format!("{name} = {z}")));
    }
    Ok(())
}

/// `λ ↦ e^{iθ}(λ − α)/(1 − ᾱλ)` with `α = −z e^{−iθ}`, so `φ(0) = z`.
fn mobius_params(z: C64, phase: C64) -> ExtremalMapParams {
    let alpha = -z * phase.conj();
    ExtremalMapParams::new(vec![phase], vec![alpha], vec![vec![alpha]], vec![vec![1]])
        .expect("shape is fixed")
}

/// `σ = |(w − z)/(1 − z̄w)|` and the Möbius map with `φ(0) = z`, `φ(σ) = w`.
/// For `z = w` the scalar is zero and the returned map is the one through `z`
/// with unit phase.
pub fn mobius_two_point(z: C64, w: C64) -> Result<OracleSolution> {
    check_disc("z", z)?;
    check_disc("w", w)?;
    let u = (w - z) / (ONE - z.conj() * w);
    let sigma = u.norm();
    let phase = if sigma == 0.0 { ONE } else { u / sigma };
    Ok(OracleSolution {
        scalar: sigma,
        params: mobius_params(z, phase),
    })
}

/// `t = (1 − |z|²)/|X|` and the Möbius map with `φ(0) = z`, `φ'(0) = tX`.
pub fn mobius_point_direction(z: C64, x: C64) -> Result<OracleSolution> {
    check_disc("z", z)?;
    if x == ZERO {
        return Err(Error::Precondition("direction X must be nonzero".into()));
    }
    Ok(OracleSolution {
        scalar: (1.0 - z.norm_sqr()) / x.norm(),
        params: mobius_params(z, x / x.norm()),
    })
}

fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

fn check_ball(name: &str, v: &[C64]) -> Result<f64> {
    let s = inner(v, v).re;
    if !(s < 1.0) {
        return Err(Error::Precondition(format!("{name} not inside the unit ball")));
    }
    Ok(s)
}

/// Two-point extremal `σ` in the unit ball: the automorphism taking `z` to
/// the origin sends `w` to a point of norm `σ`, where
/// `1 − σ² = (1 − |z|²)(1 − |w|²)/|1 − ⟨w, z⟩|²`.
pub fn ball_two_point(p: &[f64], z: &[C64], w: &[C64]) -> Result<f64> {
    check_ball_exponents(p, z.len())?;
    if w.len() != z.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: w.len(),
        });
    }
    let zz = check_ball("z", z)?;
    let ww = check_ball("w", w)?;
    let q = (1.0 - zz) * (1.0 - ww) / (ONE - inner(w, z)).norm_sqr();
    Ok((1.0 - q).max(0.0).sqrt())
}

/// Point-direction extremal `t` in the unit ball:
/// `1/t² = |X|²/(1 − |z|²) + |⟨X, z⟩|²/(1 − |z|²)²`.
pub fn ball_point_direction(p: &[f64], z: &[C64], x: &[C64]) -> Result<f64> {
    check_ball_exponents(p, z.len())?;
    if x.len() != z.len() {
        return Err(Error::Dimension {
            expected: z.len(),
            got: x.len(),
        });
    }
    let zz = check_ball("z", z)?;
    let xx = inner(x, x).re;
    if xx == 0.0 {
        return Err(Error::Precondition("direction X must be nonzero".into()));
    }
    let d = 1.0 - zz;
    let metric = xx / d + inner(x, z).norm_sqr() / (d * d);
    Ok(1.0 / metric.sqrt())
}

fn check_ball_exponents(p: &[f64], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::Dimension { expected: n, got: p.len() });
    }
    if p.iter().any(|&x| x != 1.0) {
        return Err(Error::Precondition("ball oracle needs p = (1, …, 1)".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::{c, re};
    use crate::ellipsoid::Ellipsoid;

    #[test]
    fn mobius_examples() {
        assert!((mobius_two_point(ZERO, re(0.5)).unwrap().scalar - 0.5).abs() < 1e-15);
        assert!((mobius_two_point(re(0.2), re(0.6)).unwrap().scalar - 0.4 / 0.88).abs() < 1e-15);
        assert_eq!(mobius_two_point(c(0.1, 0.3), c(0.1, 0.3)).unwrap().scalar, 0.0);
        assert!(mobius_two_point(re(1.0), ZERO).is_err());
        assert!((mobius_point_direction(re(0.5), ONE).unwrap().scalar - 0.75).abs() < 1e-15);
    }

    #[test]
    fn mobius_params_interpolate() {
        let e = Ellipsoid::new(vec![1.7]).unwrap();
        let (z, w) = (c(0.3, -0.2), c(-0.4, 0.5));
        let sol = mobius_two_point(z, w).unwrap();
        assert!(sol.params.constraint_residual(&e).unwrap() < 1e-15);
        let at0 = sol.params.evaluate(&e, ZERO).unwrap()[0];
        let at_s = sol.params.evaluate(&e, re(sol.scalar)).unwrap()[0];
        assert!((at0 - z).norm() < 1e-15 && (at_s - w).norm() < 1e-14);

        let x = c(-0.3, 0.8);
        let sol = mobius_point_direction(z, x).unwrap();
        let d = sol.params.derivative(&e, ZERO).unwrap()[0];
        assert!((d - x * sol.scalar).norm() < 1e-14);
    }

    #[test]
    fn ball_examples() {
        let p = [1.0, 1.0];
        assert!((ball_two_point(&p, &[ZERO, ZERO], &[re(0.3), re(0.4)]).unwrap() - 0.5).abs() < 1e-15);
        let z = [c(0.1, 0.2), c(-0.3, 0.1)];
        assert!(ball_two_point(&p, &z, &z).unwrap() < 1e-8);
        assert!((ball_two_point(&p, &[ZERO, ZERO], &[c(0.0, -0.7), ZERO]).unwrap() - 0.7).abs() < 1e-15);
        assert!(ball_two_point(&[1.0, 2.0], &z, &z).is_err());
        assert!((ball_point_direction(&p, &[ZERO, ZERO], &[ONE, ZERO]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ball_reduces_to_mobius_on_a_slice() {
        let (z, w) = (c(0.3, -0.2), c(-0.4, 0.5));
        let s = ball_two_point(&[1.0, 1.0], &[z, ZERO], &[w, ZERO]).unwrap();
        assert!((s - mobius_two_point(z, w).unwrap().scalar).abs() < 1e-14);
        let x = c(0.2, 0.9);
        let t = ball_point_direction(&[1.0, 1.0], &[z, ZERO], &[x, ZERO]).unwrap();
        assert!((t - mobius_point_direction(z, x).unwrap().scalar).abs() < 1e-14);
    }
}
