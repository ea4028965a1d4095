//! Dense two-phase simplex with Bland's rule, generic over the scalar.
//!
//! The same engine runs in f64 (with a 1e-9 feasibility tolerance) for the
//! L1 regression trainer and in exact rational arithmetic for the
//! cube sandwiching LP, where termination and the optimal objective are
//! exact. Bland's rule (lowest eligible index enters, lowest basis index
//! breaks ratio ties) excludes cycling under exact arithmetic.
//!
//! Problems are stated as: minimize `c·x` subject to `A x ≤ b`, `x ≥ 0`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub trait LpScalar: Clone + std::fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn add_assign(&mut self, o: &Self);
    /// self -= a * b
    fn sub_mul_assign(&mut self, a: &Self, b: &Self);
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg_of(&self) -> Self;
    /// |self| within tolerance of zero (exact zero for rationals).
    fn is_zero_tol(&self) -> bool;
    /// self < -tolerance.
    fn is_negative_tol(&self) -> bool;
    fn lt(&self, o: &Self) -> bool;
}

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg_of(&self) -> Self {
        -self
    }
    fn is_zero_tol(&self) -> bool {
        self.abs() <= 1e-9
    }
    fn is_negative_tol(&self) -> bool {
        *self < -1e-9
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add_assign(&mut self, o: &Self) {
        *self += o;
    }
    fn sub_mul_assign(&mut self, a: &Self, b: &Self) {
        *self -= a * b;
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg_of(&self) -> Self {
        -self.clone()
    }
    fn is_zero_tol(&self) -> bool {
        self.is_zero()
    }
    fn is_negative_tol(&self) -> bool {
        self.is_negative()
    }
    fn lt(&self, o: &Self) -> bool {
        self < o
    }
}

/// minimize `objective · x` subject to `rows[i].0 · x ≤ rows[i].1`, `x ≥ 0`.
pub struct DenseLp<T> {
    pub ncols: usize,
    pub objective: Vec<T>,
    pub rows: Vec<(Vec<T>, T)>,
}

pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
    /// Dual values, one per constraint, satisfying `Σ duals[i]·b[i] = objective`
    /// at optimality (verified by the strong-duality checks in callers).
    pub duals: Vec<T>,
    pub iterations: usize,
}

struct Tableau<T> {
    m: usize,
    ncols: usize, // total columns excluding RHS
    rhs_col: usize,
    data: Vec<T>, // (m+1) x (ncols+1); last row is the objective
    basis: Vec<usize>,
}

impl<T: LpScalar> Tableau<T> {
    fn at(&self, r: usize, c: usize) -> &T {
        &self.data[r * (self.ncols + 1) + c]
    }

    fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * (self.ncols + 1) + c] = v;
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.ncols + 1;
        let pivot = self.at(row, col).clone();
        {
            let r = &mut self.data[row * width..(row + 1) * width];
            for v in r.iter_mut() {
                *v = v.div(&pivot);
            }
        }
        let pivot_row: Vec<T> = self.data[row * width..(row + 1) * width].to_vec();
        for r in 0..=self.m {
            if r == row {
                continue;
            }
            let factor = self.at(r, col).clone();
            if factor.is_zero_tol() {
                continue;
            }
            let dst = &mut self.data[r * width..(r + 1) * width];
            for (v, p) in dst.iter_mut().zip(&pivot_row) {
                v.sub_mul_assign(&factor, p);
            }
        }
        self.basis[row] = col;
    }

    /// Bland's rule: entering column is the lowest-index column with a
    /// negative reduced cost among `allowed`; leaving row has the minimum
    /// ratio, ties broken by lowest basis variable index. Returns false when
    /// optimal.
    fn step(&mut self, allowed: &[bool]) -> Result<bool> {
        let mut entering = None;
        for c in 0..self.ncols {
            if allowed[c] && self.at(self.m, c).is_negative_tol() {
                entering = Some(c);
                break;
            }
        }
        let Some(col) = entering else {
            return Ok(false);
        };
        let mut leave: Option<(usize, T)> = None;
        for r in 0..self.m {
            let a = self.at(r, col);
            if a.to_f64() > 0.0 && !a.is_zero_tol() {
                let ratio = self.at(r, self.rhs_col).div(a);
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        if ratio.lt(&best)
                            || (!best.lt(&ratio) && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::Lp("unbounded linear program".into()));
        };
        self.pivot(row, col);
        Ok(true)
    }
}

/// Solve the LP. `max_iters` bounds the total pivot count across both phases.
pub fn solve<T: LpScalar>(lp: &DenseLp<T>, max_iters: usize) -> Result<LpSolution<T>> {
    let m = lp.rows.len();
    let n = lp.ncols;
    for (a, _) in &lp.rows {
        if a.len() != n {
            return Err(Error::Lp(format!("row width {} != ncols {n}", a.len())));
        }
    }
    if lp.objective.len() != n {
        return Err(Error::Lp("objective width mismatch".into()));
    }

    // Rows with negative RHS are sign-flipped and get an artificial variable.
    let flipped: Vec<bool> = lp.rows.iter().map(|(_, b)| b.is_negative_tol()).collect();
    let n_art = flipped.iter().filter(|f| **f).count();
    let ncols = n + m + n_art;
    let width = ncols + 1;
    let mut t = Tableau {
        m,
        ncols,
        rhs_col: ncols,
        data: vec![T::zero(); (m + 1) * width],
        basis: vec![0; m],
    };

    let mut art_idx = n + m;
    for (r, (a, b)) in lp.rows.iter().enumerate() {
        let flip = flipped[r];
        for (c, v) in a.iter().enumerate() {
            t.set(r, c, if flip { v.neg_of() } else { v.clone() });
        }
        let slack = if flip { T::one().neg_of() } else { T::one() };
        t.set(r, n + r, slack);
        t.set(r, ncols, if flip { b.neg_of() } else { b.clone() });
        if flip {
            t.set(r, art_idx, T::one());
            t.basis[r] = art_idx;
            art_idx += 1;
        } else {
            t.basis[r] = n + r;
        }
    }

    let mut iterations = 0usize;

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for c in n + m..ncols {
            t.set(m, c, T::one());
        }
        // Price out the artificial basis.
        for r in 0..m {
            if t.basis[r] >= n + m {
                let row: Vec<T> = (0..width).map(|c| t.at(r, c).clone()).collect();
                for c in 0..width {
                    let mut v = t.at(m, c).clone();
                    v.sub_mul_assign(&T::one(), &row[c]);
                    t.set(m, c, v);
                }
            }
        }
        let allowed = vec![true; ncols];
        loop {
            if iterations >= max_iters {
                return Err(Error::Lp("phase-1 iteration cap exceeded".into()));
            }
            if !t.step(&allowed)? {
                break;
            }
            iterations += 1;
        }
        let p1 = t.at(m, ncols).neg_of();
        if !p1.is_zero_tol() {
            return Err(Error::Lp("infeasible linear program".into()));
        }
        // Drive any artificial still basic (at zero) out of the basis.
        for r in 0..m {
            if t.basis[r] >= n + m {
                let col = (0..n + m).find(|&c| !t.at(r, c).is_zero_tol());
                if let Some(c) = col {
                    t.pivot(r, c);
                }
            }
        }
        for c in 0..width {
            t.set(m, c, T::zero());
        }
    }

    // Phase 2: install the real objective and price out the basis.
    for (c, v) in lp.objective.iter().enumerate() {
        t.set(m, c, v.clone());
    }
    for r in 0..m {
        let bc = t.basis[r];
        if bc < n {
            let coeff = lp.objective[bc].clone();
            if !coeff.is_zero_tol() {
                let row: Vec<T> = (0..width).map(|c| t.at(r, c).clone()).collect();
                for c in 0..width {
                    let mut v = t.at(m, c).clone();
                    v.sub_mul_assign(&coeff, &row[c]);
                    t.set(m, c, v);
                }
            }
        }
    }
    let allowed: Vec<bool> = (0..ncols).map(|c| c < n + m).collect();
    loop {
        if iterations >= max_iters {
            return Err(Error::Lp("phase-2 iteration cap exceeded".into()));
        }
        if !t.step(&allowed)? {
            break;
        }
        iterations += 1;
    }

    let mut x = vec![T::zero(); n];
    for r in 0..m {
        if t.basis[r] < n {
            x[t.basis[r]] = t.at(r, ncols).clone();
        }
    }
    let objective = t.at(m, ncols).neg_of();

    // Dual value for row i from the reduced cost of its slack column. With
    // stored slack coefficient ±e_i and the row sign rolled into the
    // equality multiplier, both cases reduce to y_i = -r_{s_i}.
    let mut duals = Vec::with_capacity(m);
    for r in 0..m {
        duals.push(t.at(m, n + r).neg_of());
    }

    Ok(LpSolution { x, objective, duals, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rational(v: i64) -> BigRational {
        BigRational::from_integer(BigInt::from(v))
    }

    #[test]
    fn min_with_feasible_slack_start() {
        // minimize -x - y  s.t. x + y <= 4, x <= 3, y <= 2  -> x=3, y=1? no:
        // optimum at (3, 1) gives -4; (2, 2) also -4. Objective is -4.
        let lp = DenseLp {
            ncols: 2,
            objective: vec![-1.0, -1.0],
            rows: vec![
                (vec![1.0, 1.0], 4.0),
                (vec![1.0, 0.0], 3.0),
                (vec![0.0, 1.0], 2.0),
            ],
        };
        let sol = solve(&lp, 1000).unwrap();
        assert!((sol.objective - (-4.0)).abs() < 1e-9);
        // Strong duality.
        let dual_obj = sol.duals[0] * 4.0 + sol.duals[1] * 3.0 + sol.duals[2] * 2.0;
        assert!((dual_obj - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn phase_one_handles_negative_rhs() {
        // minimize x s.t. x >= 2 (written -x <= -2).
        let lp = DenseLp { ncols: 1, objective: vec![1.0], rows: vec![(vec![-1.0], -2.0)] };
        let sol = solve(&lp, 1000).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.objective - 2.0).abs() < 1e-9);
        let dual_obj = sol.duals[0] * -2.0;
        assert!((dual_obj - sol.objective).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and x >= 2.
        let lp = DenseLp {
            ncols: 1,
            objective: vec![0.0],
            rows: vec![(vec![1.0], 1.0), (vec![-1.0], -2.0)],
        };
        assert!(matches!(solve(&lp, 1000), Err(Error::Lp(_))));
    }

    #[test]
    fn detects_unbounded() {
        let lp = DenseLp { ncols: 1, objective: vec![-1.0], rows: vec![(vec![-1.0], 0.0)] };
        assert!(matches!(solve(&lp, 1000), Err(Error::Lp(_))));
    }

    #[test]
    fn exact_rational_solution() {
        // minimize -2x - 3y s.t. x + y <= 4, x + 3y <= 6 -> optimum at (3,1): -9.
        let lp = DenseLp {
            ncols: 2,
            objective: vec![rational(-2), rational(-3)],
            rows: vec![
                (vec![rational(1), rational(1)], rational(4)),
                (vec![rational(1), rational(3)], rational(6)),
            ],
        };
        let sol = solve(&lp, 1000).unwrap();
        assert_eq!(sol.objective, rational(-9));
        assert_eq!(sol.x, vec![rational(3), rational(1)]);
        let dual_obj = sol.duals[0].mul(&rational(4));
        let mut dual_obj = dual_obj;
        dual_obj.add_assign(&sol.duals[1].mul(&rational(6)));
        assert_eq!(dual_obj, sol.objective);
    }
}
