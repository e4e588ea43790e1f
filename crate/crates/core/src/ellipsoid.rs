//! The complex ellipsoid `E(p) = { Σ |z_j|^{2p_j} < 1 }` and its defining function.

use serde::{Deserialize, Serialize};

use crate::cx::{abs_pow2p, C64};
use crate::error::{Error, Result};

/// Exponent vector `p = (p_1, …, p_n)` of a complex ellipsoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipsoidJson", into = "EllipsoidJson")]
pub struct Ellipsoid {
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct EllipsoidJson {
    p: Vec<f64>,
}

impl TryFrom<EllipsoidJson> for Ellipsoid {
    type Error = Error;

    fn try_from(j: EllipsoidJson) -> Result<Self> {
        Ellipsoid::new(j.p)
    }
}

impl From<Ellipsoid> for EllipsoidJson {
    fn from(e: Ellipsoid) -> Self {
        EllipsoidJson { p: e.p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Location {
    Inside,
    Boundary,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub location: Location,
    pub value: f64,
}

impl Ellipsoid {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidEllipsoid("empty exponent vector".into()));
        }
        if let Some((j, &pj)) = p
            .iter()
            .enumerate()
            .find(|(_, &pj)| !(pj > 0.0 && pj.is_finite()))
        {
            return Err(Error::InvalidEllipsoid(format!(
                "exponent p[{j}] = {pj} must be positive and finite"
            )));
        }
        Ok(Self { p })
    }

    /// The unit ball in `C^n`.
    pub fn ball(n: usize) -> Self {
        Self { p: vec![1.0; n.max(1)] }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.p
    }

    pub fn is_convex(&self) -> bool {
        self.p.iter().all(|&pj| pj >= 0.5)
    }

    pub fn is_ball(&self) -> bool {
        self.p.iter().all(|&pj| pj == 1.0)
    }

    /// The ellipsoid restricted to the given coordinate indices.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&j| self.p[j]).collect())
    }

    fn check_dim(&self, z: &[C64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// `u(z) = Σ_j |z_j|^{2p_j} − 1`.
    pub fn defining_value(&self, z: &[C64]) -> Result<f64> {
        self.check_dim(z)?;
        Ok(self.defining_value_unchecked(z))
    }

    pub(crate) fn defining_value_unchecked(&self, z: &[C64]) -> f64 {
        self.p
            .iter()
            .zip(z)
            .map(|(&pj, &zj)| abs_pow2p(zj, pj))
            .sum::<f64>()
            - 1.0
    }

    /// Wirtinger gradient `∂u/∂z_j = p_j |z_j|^{2p_j} / z_j`.
    pub fn wirtinger_gradient(&self, z: &[C64]) -> Result<Vec<C64>> {
        self.check_dim(z)?;
        self.p
            .iter()
            .zip(z)
            .enumerate()
            .map(|(j, (&pj, &zj))| {
                if zj == C64::new(0.0, 0.0) {
                    Err(Error::GradientUndefined { index: j })
                } else {
                    Ok(pj * abs_pow2p(zj, pj) / zj)
                }
            })
            .collect()
    }

    pub fn classify(&self, z: &[C64], tol: f64) -> Result<PointClassification> {
        if !(tol > 0.0) {
            return Err(Error::NonPositiveTolerance(tol));
        }
        let value = self.defining_value(z)?;
        let location = if value < -tol {
            Location::Inside
        } else if value.abs() <= tol {
            Location::Boundary
        } else {
            Location::Outside
        };
        Ok(PointClassification { location, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cx::c;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn defining_value_examples() {
        let e = Ellipsoid::new(vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e.defining_value(&[c(0., 0.), c(0., 0.)]).unwrap(), -1.0);
        assert_abs_diff_eq!(e.defining_value(&[c(1., 0.), c(0., 0.)]).unwrap(), 0.0);
        let e = Ellipsoid::new(vec![1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(
            e.defining_value(&[c(0.6, 0.), c(0.7, 0.)]).unwrap(),
            -0.3999,
            epsilon = 1e-14
        );
    }

    #[test]
    fn gradient_examples() {
        let e = Ellipsoid::new(vec![1.0, 1.0]).unwrap();
        let z = [c(0.3, -0.2), c(-0.1, 0.4)];
        let g = e.wirtinger_gradient(&z).unwrap();
        for (gj, zj) in g.iter().zip(&z) {
            assert_abs_diff_eq!((gj - zj.conj()).norm(), 0.0, epsilon = 1e-15);
        }
        let e2 = Ellipsoid::new(vec![2.0]).unwrap();
        let g = e2.wirtinger_gradient(&[c(0.5, 0.)]).unwrap();
        assert_abs_diff_eq!(g[0].re, 0.25, epsilon = 1e-15);
        assert_eq!(
            e.wirtinger_gradient(&[c(1., 0.), c(0., 0.)]),
            Err(Error::GradientUndefined { index: 1 })
        );
    }

    #[test]
    fn classify_examples() {
        let ball = Ellipsoid::ball(2);
        let zero = [c(0., 0.), c(0., 0.)];
        assert_eq!(ball.classify(&zero, 1e-12).unwrap().location, Location::Inside);
        let unit = [c(1., 0.), c(0., 0.)];
        assert_eq!(ball.classify(&unit, 1e-12).unwrap().location, Location::Boundary);
        let e = Ellipsoid::new(vec![1.0, 2.0]).unwrap();
        let pc = e.classify(&[c(1., 0.), c(1., 0.)], 1e-12).unwrap();
        assert_eq!(pc.location, Location::Outside);
        assert_abs_diff_eq!(pc.value, 1.0);
        assert!(matches!(ball.classify(&zero, 0.0), Err(Error::NonPositiveTolerance(_))));
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(Ellipsoid::new(vec![]).is_err());
        assert!(Ellipsoid::new(vec![1.0, 0.0]).is_err());
        assert!(Ellipsoid::new(vec![-1.0]).is_err());
        assert!(serde_json::from_str::<Ellipsoid>(r#"{"p":[1.0,-2.0]}"#).is_err());
        let e: Ellipsoid = serde_json::from_str(r#"{"p":[1.0,0.25]}"#).unwrap();
        assert!(!e.is_convex());
        assert_eq!(serde_json::to_string(&e).unwrap(), r#"{"p":[1.0,0.25]}"#);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<(f64, f64)>)> {
        (1usize..5).prop_flat_map(|n| {
            (
                prop::collection::vec(0.2f64..3.0, n),
                prop::collection::vec((-1.2f64..1.2, -1.2f64..1.2), n),
            )
        })
    }

    proptest! {
        #[test]
        fn modulus_invariance((p, z) in arb_case(), phases in prop::collection::vec(0.0f64..6.3, 4)) {
            let e = Ellipsoid::new(p).unwrap();
            let z: Vec<C64> = z.into_iter().map(|(a, b)| c(a, b)).collect();
            let rotated: Vec<C64> = z.iter().enumerate()
                .map(|(j, zj)| zj * C64::from_polar(1.0, phases[j % phases.len()]))
                .collect();
            let u0 = e.defining_value(&z).unwrap();
            let u1 = e.defining_value(&rotated).unwrap();
            prop_assert!((u0 - u1).abs() <= 1e-12 * (1.0 + u0.abs()));
        }

        #[test]
        fn gradient_matches_directional_difference((p, z) in arb_case()) {
            prop_assume!(z.iter().all(|&(a, b)| a.hypot(b) > 0.05));
            let e = Ellipsoid::new(p).unwrap();
            let z: Vec<C64> = z.into_iter().map(|(a, b)| c(a, b)).collect();
            let grad = e.wirtinger_gradient(&z).unwrap();
            // direction v = z, derivative of t ↦ u(z + t z) at t = 0
            let analytic: f64 = 2.0 * grad.iter().zip(&z).map(|(g, v)| g * v).sum::<C64>().re;
            let h = 1e-5;
            let plus: Vec<C64> = z.iter().map(|zj| zj * (1.0 + h)).collect();
            let minus: Vec<C64> = z.iter().map(|zj| zj * (1.0 - h)).collect();
            let fd = (e.defining_value(&plus).unwrap() - e.defining_value(&minus).unwrap()) / (2.0 * h);
            prop_assert!((analytic - fd).abs() <= 1e-6 * (1.0 + analytic.abs()));
        }

        #[test]
        fn classify_monotone_under_scaling((p, z) in arb_case(), s in 0.0f64..=1.0) {
            let e = Ellipsoid::new(p).unwrap();
            let z: Vec<C64> = z.into_iter().map(|(a, b)| c(a, b)).collect();
            if e.classify(&z, 1e-12).unwrap().location == Location::Inside {
                let scaled: Vec<C64> = z.iter().map(|zj| zj * s).collect();
                prop_assert_eq!(e.classify(&scaled, 1e-12).unwrap().location, Location::Inside);
            }
        }
    }
}
