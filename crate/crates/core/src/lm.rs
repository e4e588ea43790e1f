//! Damped Gauss–Newton (Levenberg–Marquardt) on a residual vector with a
//! finite-difference Jacobian. For square systems the damping vanishes near
//! a regular root and the iteration is Newton's method.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy)]
pub struct LmConfig {
    pub max_iter: usize,
    /// Stop once `‖r‖∞` falls below this.
    pub residual_tol: f64,
    /// Stop once the relative step falls below this.
    pub step_tol: f64,
    pub fd_step: f64,
    pub initial_damping: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            residual_tol: 1e-14,
            step_tol: 1e-15,
            fd_step: 1e-7,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub iterations: usize,
    /// `‖r‖∞` after each accepted step.
    pub history: Vec<f64>,
}

impl LmOutcome {
    pub fn max_residual(&self) -> f64 {
        inf_norm(&self.residual)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `f` returns `None` outside its domain; such points are never accepted.
pub fn minimize<F>(f: F, x0: &[f64], cfg: &LmConfig) -> Option<LmOutcome>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let nx = x.len();
    let nr = r.len();
    let mut mu = cfg.initial_damping;
    let mut history = vec![inf_norm(&r)];
    let mut iterations = 0;

    while iterations < cfg.max_iter && inf_norm(&r) > cfg.residual_tol {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(nr, nx);
        for i in 0..nx {
            let h = cfg.fd_step * (1.0 + x[i].abs());
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let col = match (f(&xp), f(&xm)) {
                (Some(rp), Some(rm)) => rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>(),
                (Some(rp), None) => rp.iter().zip(&r).map(|(a, b)| (a - b) / h).collect(),
                (None, Some(rm)) => r.iter().zip(&rm).map(|(a, b)| (a - b) / h).collect(),
                (None, None) => vec![0.0; nr],
            };
            for (k, v) in col.into_iter().enumerate() {
                jac[(k, i)] = v;
            }
        }
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &rv;
        let base = sq_norm(&r);
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..nx {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&jtr)) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            if let Some(rt) = f(&trial) {
                if rt.iter().all(|v| v.is_finite()) && sq_norm(&rt) < base {
                    let rel = step.norm() / (1.0 + DVector::from_column_slice(&x).norm());
                    x = trial;
                    r = rt;
                    mu = (mu / 5.0).max(1e-15);
                    accepted = true;
                    history.push(inf_norm(&r));
                    if rel < cfg.step_tol {
                        return Some(LmOutcome { x, residual: r, iterations, history });
                    }
                    break;
                }
            }
            mu *= 4.0;
        }
        if !accepted {
            break;
        }
    }
    Some(LmOutcome { x, residual: r, iterations, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_square_system() {
        // x² + y² = 4, x·y = 1
        let f = |v: &[f64]| Some(vec![v[0] * v[0] + v[1] * v[1] - 4.0, v[0] * v[1] - 1.0]);
        let out = minimize(f, &[2.0, 0.3], &LmConfig::default()).unwrap();
        assert!(out.max_residual() < 1e-13);
    }

    #[test]
    fn respects_domain() {
        // root at x = −1 is outside the domain x > 0; the other root is x = 2
        let f = |v: &[f64]| if v[0] > 0.0 { Some(vec![(v[0] - 2.0) * (v[0] + 1.0)]) } else { None };
        let out = minimize(f, &[1.0], &LmConfig::default()).unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-10);
    }
}
