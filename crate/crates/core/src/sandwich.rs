//! Exact LP computation and verification of L1-sandwiching polynomial pairs
//! over small hypercubes.
//!
//! The pair (p_down, p_up) minimizes `E_Unif[p_up − p_down]` subject to
//! `p_down(x) ≤ f(x) ≤ p_up(x)` on all 2^d points, over multilinear
//! coefficients of degree ≤ ℓ (x_i² = 1 on the cube, so multilinear monomials
//! span everything). Upper and lower polynomials are solved as one joint LP.
//!
//! The LP runs in exact rational arithmetic: all inputs are ±1 integers, so
//! the optimal gap and the dual certificate are exact, never rounded. A
//! substitution `p_up = 1 + Σ a_α x^α`, `p_down = −1 + Σ b_α x^α` makes every
//! right-hand side nonnegative, so the slack basis is feasible and no phase-1
//! artificials are needed. Runtime grows with 2^{d+1} constraints; the
//! contract cap is d ≤ 14, comfortable use is d ≲ 10.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::concepts::Concept;
use crate::error::{Error, Result};
use crate::moments::MultiIndex;
use crate::simplex::{solve, DenseLp};

const DIM_CAP_LP: usize = 14;
const DIM_CAP_VERIFY: usize = 20;

/// A certified sandwiching pair for one concept on `{±1}^d`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichPair {
    pub dim: usize,
    pub degree: u32,
    /// Multilinear coefficients keyed by "a1,...,ad" (exponents in {0,1}).
    pub p_up: BTreeMap<String, f64>,
    pub p_down: BTreeMap<String, f64>,
    /// Optimal `E_Unif[p_up − p_down]`, exact in the LP and rounded once here.
    pub gap: f64,
    /// Largest absolute coefficient across both polynomials.
    pub coeff_bound: f64,
    /// Objective of the verified dual-feasible certificate; equals `gap`
    /// exactly in rational arithmetic.
    pub dual_objective: f64,
}

/// Multilinear multi-indices (exponents in {0,1}) with at most `degree` ones.
pub fn multilinear_indices(d: usize, degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; d];
    fn rec(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, left: u32) {
        if pos == cur.len() {
            out.push(MultiIndex(cur.clone()));
            return;
        }
        cur[pos] = 0;
        rec(out, cur, pos + 1, left);
        if left > 0 {
            cur[pos] = 1;
            rec(out, cur, pos + 1, left - 1);
            cur[pos] = 0;
        }
    }
    rec(&mut out, &mut cur, 0, degree);
    out.sort();
    out
}

fn cube_point(bits: usize, d: usize, out: &mut [f64]) {
    for (i, v) in out.iter_mut().enumerate().take(d) {
        *v = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
    }
}

/// Value of the multilinear monomial `x^α` at the cube point encoded by `bits`.
fn monomial_sign(alpha: &MultiIndex, bits: usize) -> i64 {
    let mut s = 1i64;
    for (i, &e) in alpha.0.iter().enumerate() {
        if e == 1 && bits >> i & 1 == 0 {
            s = -s;
        }
    }
    s
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Solve the joint sandwiching LP for `f` on `{±1}^d` at degree ≤ ℓ.
pub fn exact_sandwich_lp(f: &Concept, d: usize, degree: u32) -> Result<SandwichPair> {
    if d == 0 || d > DIM_CAP_LP {
        return Err(Error::InvalidParameter(format!("dimension {d} outside 1..={DIM_CAP_LP}")));
    }
    if degree as usize > d {
        return Err(Error::InvalidParameter(format!("degree {degree} exceeds dimension {d}")));
    }
    let fd = f.dim();
    if fd != 0 && fd != d {
        return Err(Error::DimensionMismatch { expected: fd, got: d });
    }

    let indices = multilinear_indices(d, degree);
    let nm = indices.len();
    let npoints = 1usize << d;
    let const_idx = indices
        .iter()
        .position(|a| a.total_degree() == 0)
        .expect("constant monomial always enumerated");

    // Variables: [a+ (nm), a- (nm), b+ (nm), b- (nm)], all >= 0, where
    // p_up = 1 + Σ a_α x^α and p_down = -1 + Σ b_α x^α.
    let ncols = 4 * nm;
    let mut rows = Vec::with_capacity(2 * npoints);
    let mut point = vec![0.0; d];
    let mut fvals = Vec::with_capacity(npoints);
    for bits in 0..npoints {
        cube_point(bits, d, &mut point);
        let fx = f.eval(&point)? as i64;
        fvals.push(fx);
        let signs: Vec<i64> = indices.iter().map(|a| monomial_sign(a, bits)).collect();

        // p_up(x) >= f(x)  <=>  -Σ a_α x^α <= 1 - f(x)
        let mut up = vec![BigRational::zero(); ncols];
        // p_down(x) <= f(x)  <=>  Σ b_α x^α <= f(x) + 1
        let mut down = vec![BigRational::zero(); ncols];
        for (j, &s) in signs.iter().enumerate() {
            up[j] = rat(-s);
            up[nm + j] = rat(s);
            down[2 * nm + j] = rat(s);
            down[3 * nm + j] = rat(-s);
        }
        rows.push((up, rat(1 - fx)));
        rows.push((down, rat(fx + 1)));
    }

    // minimize  a_0 - b_0  (the shifted constant coefficients); the real gap
    // is 2 + optimum.
    let mut objective = vec![BigRational::zero(); ncols];
    objective[const_idx] = rat(1);
    objective[nm + const_idx] = rat(-1);
    objective[2 * nm + const_idx] = rat(-1);
    objective[3 * nm + const_idx] = rat(1);

    let lp = DenseLp { ncols, objective: objective.clone(), rows: rows_clone(&rows) };
    let sol = solve(&lp, 2_000_000)?;

    // Independent optimality certificate: the dual vector must be feasible
    // (y ≤ 0, Aᵀy ≤ c) and its objective must equal the primal optimum,
    // all checked in exact arithmetic.
    for y in &sol.duals {
        if y.is_positive() {
            return Err(Error::Lp("dual certificate infeasible: positive multiplier".into()));
        }
    }
    for j in 0..ncols {
        let mut lhs = BigRational::zero();
        for (i, (a, _)) in rows.iter().enumerate() {
            lhs += &sol.duals[i] * &a[j];
        }
        if lhs > objective[j] {
            return Err(Error::Lp(format!("dual certificate infeasible at column {j}")));
        }
    }
    let mut dual_obj = BigRational::zero();
    for (y, (_, b)) in sol.duals.iter().zip(&rows) {
        dual_obj += y * b;
    }
    if dual_obj != sol.objective {
        return Err(Error::Lp("strong duality violated (degenerate arithmetic)".into()));
    }

    let gap_exact = rat(2) + sol.objective.clone();
    let dual_gap_exact = rat(2) + dual_obj;

    let mut p_up = BTreeMap::new();
    let mut p_down = BTreeMap::new();
    let mut coeff_bound = BigRational::zero();
    for (j, alpha) in indices.iter().enumerate() {
        let mut cu = &sol.x[j] - &sol.x[nm + j];
        let mut cd = &sol.x[2 * nm + j] - &sol.x[3 * nm + j];
        if j == const_idx {
            cu += rat(1);
            cd -= rat(1);
        }
        if cu.abs() > coeff_bound {
            coeff_bound = cu.abs();
        }
        if cd.abs() > coeff_bound {
            coeff_bound = cd.abs();
        }
        if !cu.is_zero() || j == const_idx {
            p_up.insert(alpha.key(), cu.to_f64().unwrap_or(f64::NAN));
        }
        if !cd.is_zero() || j == const_idx {
            p_down.insert(alpha.key(), cd.to_f64().unwrap_or(f64::NAN));
        }
    }

    Ok(SandwichPair {
        dim: d,
        degree,
        p_up,
        p_down,
        gap: gap_exact.to_f64().unwrap_or(f64::NAN),
        coeff_bound: coeff_bound.to_f64().unwrap_or(f64::NAN),
        dual_objective: dual_gap_exact.to_f64().unwrap_or(f64::NAN),
    })
}

fn rows_clone(rows: &[(Vec<BigRational>, BigRational)]) -> Vec<(Vec<BigRational>, BigRational)> {
    rows.to_vec()
}

/// Outcome of re-checking a pair against a concept by full enumeration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub ok: bool,
    /// Largest pointwise violation of either inequality (0 when ok).
    pub worst_violation: f64,
    /// Gap recomputed from the coefficient maps by enumeration.
    pub recomputed_gap: f64,
}

/// Enumerate all 2^d points and check `p_down ≤ f ≤ p_up` within 1e-9.
pub fn verify_sandwich(pair: &SandwichPair, f: &Concept) -> Result<SandwichCheck> {
    let d = pair.dim;
    if d == 0 || d > DIM_CAP_VERIFY {
        return Err(Error::InvalidParameter(format!("dimension {d} outside 1..={DIM_CAP_VERIFY}")));
    }
    let fd = f.dim();
    if fd != 0 && fd != d {
        return Err(Error::DimensionMismatch { expected: fd, got: d });
    }
    let parse = |m: &BTreeMap<String, f64>| -> Result<Vec<(MultiIndex, f64)>> {
        m.iter().map(|(k, v)| MultiIndex::parse_key(k).map(|a| (a, *v))).collect()
    };
    let up = parse(&pair.p_up)?;
    let down = parse(&pair.p_down)?;

    let npoints = 1usize << d;
    let mut point = vec![0.0; d];
    let mut worst: f64 = 0.0;
    let mut gap_sum = 0.0;
    for bits in 0..npoints {
        cube_point(bits, d, &mut point);
        let fx = f.eval(&point)? as f64;
        let pu: f64 = up.iter().map(|(a, c)| c * monomial_sign(a, bits) as f64).sum();
        let pd: f64 = down.iter().map(|(a, c)| c * monomial_sign(a, bits) as f64).sum();
        worst = worst.max(fx - pu).max(pd - fx);
        gap_sum += pu - pd;
    }
    let recomputed_gap = gap_sum / npoints as f64;
    Ok(SandwichCheck { ok: worst <= 1e-9, worst_violation: worst, recomputed_gap })
}
