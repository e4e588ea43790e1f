//! Dense complex polynomials stored lowest degree first.

use nalgebra::DMatrix;

use crate::cx::{C64, ONE, ZERO};
use crate::error::{Error, Result};

pub fn eval(coeffs: &[C64], x: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
}

pub fn derivative(coeffs: &[C64]) -> Vec<C64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| c * k as f64)
        .collect()
}

pub fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(ζ − α)(1 − ᾱζ) = −α + (1 + |α|²)ζ − ᾱζ²`.
pub fn pair_factor(alpha: C64) -> [C64; 3] {
    [-alpha, ONE * (1.0 + alpha.norm_sqr()), -alpha.conj()]
}

/// `∏_k (ζ − α_k)(1 − ᾱ_k ζ)`, a polynomial of degree `2·len`.
pub fn pair_product(alphas: &[C64]) -> Vec<C64> {
    alphas
        .iter()
        .fold(vec![ONE], |acc, &a| mul(&acc, &pair_factor(a)))
}

/// One-sided Parlett–Reinsch balancing with radix 2.
fn balance(m: &mut DMatrix<C64>) {
    let n = m.nrows();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut col = 0.0;
            let mut row = 0.0;
            for j in 0..n {
                if j != i {
                    col += m[(j, i)].norm();
                    row += m[(i, j)].norm();
                }
            }
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let s = col + row;
            let mut f = 1.0;
            let mut c = col;
            let mut r = row;
            while c < r / 2.0 {
                c *= 2.0;
                r /= 2.0;
                f *= 2.0;
            }
            while c >= r * 2.0 {
                c /= 2.0;
                r *= 2.0;
                f /= 2.0;
            }
            if (c + r) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// All roots of a polynomial whose leading coefficient is nonzero, from the
/// eigenvalues of the balanced companion matrix.
pub fn roots(coeffs: &[C64]) -> Result<Vec<C64>> {
    let d = coeffs.len().saturating_sub(1);
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = coeffs[d];
    if lead == ZERO {
        return Err(Error::RootFinding("vanishing leading coefficient".into()));
    }
    let mut m = DMatrix::<C64>::zeros(d, d);
    for i in 1..d {
        m[(i, i - 1)] = ONE;
    }
    for i in 0..d {
        m[(i, d - 1)] = -coeffs[i] / lead;
    }
    balance(&mut m);
    let schur = nalgebra::linalg::Schur::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::RootFinding("Schur iteration did not converge".into()))?;
    let eig = schur
        .eigenvalues()
        .ok_or_else(|| Error::RootFinding("Schur form not triangular".into()))?;
    Ok(eig.iter().copied().collect())
}

/// Newton polishing that only accepts steps reducing `|p|`.
pub fn polish(coeffs: &[C64], root: C64, iters: usize) -> C64 {
    let dp = derivative(coeffs);
    let mut x = root;
    let mut fx = eval(coeffs, x).norm();
    for _ in 0..iters {
        let d = eval(&dp, x);
        if d == ZERO || fx == 0.0 {
            break;
        }
        let y = x - eval(coeffs, x) / d;
        let fy = eval(coeffs, y).norm();
        if !(fy < fx) {
            break;
        }
        x = y;
        fx = fy;
    }
    x
}
