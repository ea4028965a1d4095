//! Small dense linear algebra: symmetric eigensolvers, Cholesky-type solves
//! and the standard normal CDF.

use crate::error::{Error, Result};

/// Standard normal CDF via `erfc`, accurate to roughly machine precision
/// (libm's erfc has max error below 1 ulp, far inside the 1e-12 contract).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    pub n: usize,
    pub a: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, a: vec![0.0; n * n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * self.n + j] = v;
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j) * self.get(i, j);
                }
            }
        }
        s.sqrt()
    }
}

/// Largest eigenvalue of a symmetric matrix.
///
/// Cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops below
/// 1e-10 (deterministic); falls back to fixed-count power iteration for
/// n > 200 where Jacobi's O(n^3) per sweep stops being reasonable.
pub fn max_eigenvalue_sym(m: &SymMatrix) -> Result<f64> {
    if m.a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "second-moment matrix".into() });
    }
    if m.n > 200 {
        return Ok(power_iteration_max(m));
    }
    let eig = jacobi_eigenvalues(m, 1e-10, 100)?;
    Ok(eig.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// All eigenvalues by cyclic Jacobi rotations (unsorted).
pub fn jacobi_eigenvalues(m: &SymMatrix, tol: f64, max_sweeps: usize) -> Result<Vec<f64>> {
    let n = m.n;
    if n == 0 {
        return Err(Error::InvalidParameter("empty matrix".into()));
    }
    if n == 1 {
        return Ok(vec![m.get(0, 0)]);
    }
    let mut a = m.clone();
    for _ in 0..max_sweeps {
        if a.off_diagonal_norm() <= tol {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
            }
        }
    }
    Ok((0..n).map(|i| a.get(i, i)).collect())
}

/// Deterministic power iteration with a fixed start vector and 1000 steps;
/// returns the Rayleigh quotient. Convergence is checked to 1e-8 between the
/// final two iterates but not enforced as an error (documented fallback).
fn power_iteration_max(m: &SymMatrix) -> f64 {
    let n = m.n;
    // Shift so the dominant eigenvalue of (A + shift I) is the largest in
    // magnitude even when A has large negative spectrum.
    let shift: f64 = m.a.iter().map(|v| v.abs()).fold(0.0, f64::max) * (n as f64) + 1.0;
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64) * 1e-3).collect();
    normalize(&mut v);
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut s = shift * v[i];
            for j in 0..n {
                s += m.get(i, j) * v[j];
            }
            w[i] = s;
        }
        normalize(&mut w);
        let mut rq = 0.0;
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += m.get(i, j) * w[j];
            }
            rq += w[i] * s;
        }
        lambda = rq;
        v = w;
    }
    lambda
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Solve the SPD system `A x = b` by Cholesky factorization.
pub fn cholesky_solve(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n;
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.len() });
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::Lp(format!("matrix not positive definite at pivot {i}")));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Spectral (operator) norm of a general k×d matrix given as rows, via the
/// eigenvalues of the k×k Gram matrix.
pub fn operator_norm(rows: &[Vec<f64>]) -> Result<f64> {
    let k = rows.len();
    if k == 0 {
        return Ok(0.0);
    }
    let mut g = SymMatrix::zeros(k);
    for i in 0..k {
        for j in 0..k {
            let dot: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            g.set(i, j, dot);
        }
    }
    Ok(max_eigenvalue_sym(&g)?.max(0.0).sqrt())
}

/// Gram-Schmidt orthonormalization of the given rows. Fails if the rows are
/// numerically rank-deficient (residual norm below `tol` before normalizing).
pub fn gram_schmidt(rows: &[Vec<f64>], tol: f64) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut v = r.clone();
        for u in &out {
            let proj: f64 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u.iter()).for_each(|(a, b)| *a -= proj * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= tol {
            return Err(Error::InvalidParameter("rows are rank-deficient".into()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        out.push(v);
    }
    Ok(out)
}
