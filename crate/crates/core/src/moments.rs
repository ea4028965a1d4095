//! Multi-index enumeration, empirical moments and Chow parameters,
//! closed-form reference moments, Gaussian grid-cell probabilities and the
//! largest eigenvalue of the empirical second-moment matrix.
//!
//! All empirical statistics use raw monomials `x^α` rather than an orthogonal
//! basis. Accumulation runs over fixed 65536-point chunks (sequential and in
//! input order within a chunk) whose partial sums are combined by a fixed
//! pairwise tree, so results are bit-identical regardless of thread count.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::concepts::Concept;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{self, SymMatrix};

const CHUNK: usize = 1 << 16;

/// Exponent vector α ∈ N^d addressing the monomial `x^α = Π x_i^{α_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn total_degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Key form used in JSON maps: `"a1,a2,...,ad"`.
    pub fn key(&self) -> String {
        self.0.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
    }

    pub fn parse_key(s: &str) -> Result<Self> {
        let parts: std::result::Result<Vec<u32>, _> = s.split(',').map(|p| p.trim().parse()).collect();
        parts
            .map(MultiIndex)
            .map_err(|_| Error::InvalidParameter(format!("bad multi-index key {s:?}")))
    }
}

/// `C(d + l, l)`, the number of multi-indices of degree ≤ l in d variables.
pub fn count_multi_indices(d: usize, degree: u32) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=degree as u128 {
        c = c.saturating_mul(d as u128 + i).saturating_div(i);
    }
    c
}

/// All α with `‖α‖₁ ≤ degree`, lexicographically ordered. Refuses (rather
/// than truncates) when the count exceeds `cap`.
pub fn enumerate_multi_indices(d: usize, degree: u32, cap: u128) -> Result<Vec<MultiIndex>> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let count = count_multi_indices(d, degree);
    if count > cap {
        return Err(Error::IndexCountExceeded { count, cap, d, degree });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut cur = vec![0u32; d];
    fill(&mut out, &mut cur, 0, degree);
    debug_assert_eq!(out.len() as u128, count);
    Ok(out)
}

fn fill(out: &mut Vec<MultiIndex>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos == cur.len() {
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for a in 0..=remaining {
        cur[pos] = a;
        fill(out, cur, pos + 1, remaining - a);
    }
    cur[pos] = 0;
}

/// Default enumeration cap.
pub const INDEX_CAP: u128 = 1_000_000;

/// `E[z^a]` for a standard normal coordinate: `(a-1)!!` for even a, else 0.
fn normal_raw_moment(a: u32) -> f64 {
    if a % 2 == 1 {
        return 0.0;
    }
    let mut m = 1.0;
    let mut k = a as i64 - 1;
    while k > 1 {
        m *= k as f64;
        k -= 2;
    }
    m
}

/// `E_{N_d}[x^α] = Π (α_i - 1)!!` when all α_i are even, 0 otherwise.
pub fn gaussian_moment(alpha: &MultiIndex) -> f64 {
    if alpha.0.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    alpha.0.iter().map(|&a| normal_raw_moment(a)).product()
}

/// `E_{Unif{±1}^d}[x^α]`: 1 when all α_i are even, 0 otherwise.
pub fn cube_moment(alpha: &MultiIndex) -> f64 {
    if alpha.0.iter().all(|a| a % 2 == 0) {
        1.0
    } else {
        0.0
    }
}

/// Estimates of `E[x^α]` (or `E[f(x)·x^α]`) for every α of degree ≤ `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    pub degree: u32,
    pub indices: Vec<MultiIndex>,
    pub values: Vec<f64>,
}

/// Same index layout as [`MomentVector`], interpreted as Chow parameters.
pub type ChowVector = MomentVector;

impl MomentVector {
    pub fn get(&self, alpha: &MultiIndex) -> Option<f64> {
        self.indices.iter().position(|a| a == alpha).map(|i| self.values[i])
    }
}

impl Serialize for MomentVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            degree: u32,
            entries: BTreeMap<String, f64>,
            #[serde(skip_serializing_if = "Option::is_none")]
            _phantom: Option<&'a ()>,
        }
        let entries = self
            .indices
            .iter()
            .zip(&self.values)
            .map(|(a, v)| (a.key(), *v))
            .collect();
        Repr { degree: self.degree, entries, _phantom: None }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MomentVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            degree: u32,
            entries: BTreeMap<String, f64>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let mut pairs: Vec<(MultiIndex, f64)> = repr
            .entries
            .into_iter()
            .map(|(k, v)| MultiIndex::parse_key(&k).map(|a| (a, v)))
            .collect::<Result<_>>()
            .map_err(D::Error::custom)?;
        pairs.sort_by(|a, b| a.0.cmp(&b.0));
        let (indices, values) = pairs.into_iter().unzip();
        Ok(MomentVector { degree: repr.degree, indices, values })
    }
}

/// Accumulates weighted monomial sums `Σ_x w(x)·x^α` over flat point
/// buffers, sequentially and in input order. Used by the in-memory moment
/// estimators below and by the streaming reference-sample consumers in the
/// Chow tester.
pub struct MonomialAccumulator {
    d: usize,
    degree: usize,
    /// Sparse form of each index: the (coordinate, exponent) pairs with
    /// exponent ≥ 1.
    sparse: Vec<Vec<(usize, usize)>>,
}

impl MonomialAccumulator {
    pub fn new(d: usize, indices: &[MultiIndex]) -> Self {
        let degree = indices.iter().map(|a| a.total_degree()).max().unwrap_or(0) as usize;
        let sparse = indices
            .iter()
            .map(|a| {
                a.0.iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(i, &e)| (i, e as usize))
                    .collect()
            })
            .collect();
        MonomialAccumulator { d, degree, sparse }
    }

    pub fn width(&self) -> usize {
        self.sparse.len()
    }

    /// Add `w(x)·x^α` for every point in the buffer to `acc`.
    pub fn accumulate<W: Fn(&[f64]) -> f64>(&self, flat: &[f64], weight: W, acc: &mut [f64]) {
        let step = self.degree + 1;
        let mut powers = vec![0.0; self.d * step];
        for point in flat.chunks_exact(self.d) {
            for (i, &x) in point.iter().enumerate() {
                let row = &mut powers[i * step..(i + 1) * step];
                row[0] = 1.0;
                for e in 1..=self.degree {
                    row[e] = row[e - 1] * x;
                }
            }
            let w = weight(point);
            for (j, terms) in self.sparse.iter().enumerate() {
                let mut t = w;
                for &(i, e) in terms {
                    t *= powers[i * step + e];
                }
                acc[j] += t;
            }
        }
    }

    /// One fused pass producing both the plain sums (weight 1) and the
    /// weighted sums. The plain side is bitwise identical to
    /// `accumulate(_, |_| 1.0, _)` because multiplying by exactly 1.0 is
    /// lossless.
    pub fn accumulate_dual<W: Fn(&[f64]) -> f64>(
        &self,
        flat: &[f64],
        weight: W,
        plain: &mut [f64],
        weighted: &mut [f64],
    ) {
        let step = self.degree + 1;
        let mut powers = vec![0.0; self.d * step];
        for point in flat.chunks_exact(self.d) {
            for (i, &x) in point.iter().enumerate() {
                let row = &mut powers[i * step..(i + 1) * step];
                row[0] = 1.0;
                for e in 1..=self.degree {
                    row[e] = row[e - 1] * x;
                }
            }
            let w = weight(point);
            for (j, terms) in self.sparse.iter().enumerate() {
                let mut t = 1.0;
                for &(i, e) in terms {
                    t *= powers[i * step + e];
                }
                plain[j] += t;
                weighted[j] += w * t;
            }
        }
    }
}

/// Mean of `w(x) · x^α` over the dataset for every α, where `w` is an
/// arbitrary per-point weight. Both the plain moments (w ≡ 1) and the Chow
/// parameters (w = f) run through this single accumulator, which is what
/// makes them bitwise comparable.
fn weighted_means<W>(ds: &Dataset, indices: &[MultiIndex], weight: W) -> Vec<f64>
where
    W: Fn(&[f64]) -> f64 + Sync,
{
    let d = ds.dim();
    let acc = MonomialAccumulator::new(d, indices);
    let flat = ds.as_flat();

    let partials: Vec<Vec<f64>> = flat
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut sums = vec![0.0; indices.len()];
            acc.accumulate(chunk, &weight, &mut sums);
            sums
        })
        .collect();

    let mut sums = pairwise_merge(partials, indices.len());
    let n = ds.n() as f64;
    sums.iter_mut().for_each(|s| *s /= n);
    sums
}

/// Fixed pairwise reduction over ordered chunk partials.
pub fn pairwise_merge(mut parts: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; width];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Empirical raw moments `Ê[x^α]` for all `‖α‖₁ ≤ degree`.
pub fn empirical_moments(ds: &Dataset, degree: u32) -> Result<MomentVector> {
    let indices = enumerate_multi_indices(ds.dim(), degree, INDEX_CAP)?;
    let values = weighted_means(ds, &indices, |_| 1.0);
    check_finite(&indices, &values)?;
    Ok(MomentVector { degree, indices, values })
}

/// Empirical Chow parameters `Ê[f(x)·x^α]` for all `‖α‖₁ ≤ degree`.
pub fn empirical_chow(ds: &Dataset, f: &Concept, degree: u32) -> Result<ChowVector> {
    let fd = f.dim();
    if fd != 0 && fd != ds.dim() {
        return Err(Error::DimensionMismatch { expected: fd, got: ds.dim() });
    }
    let indices = enumerate_multi_indices(ds.dim(), degree, INDEX_CAP)?;
    let values = weighted_means(ds, &indices, |x| f.eval_unchecked(x) as f64);
    check_finite(&indices, &values)?;
    Ok(MomentVector { degree, indices, values })
}

fn check_finite(indices: &[MultiIndex], values: &[f64]) -> Result<()> {
    for (a, v) in indices.iter().zip(values) {
        if !v.is_finite() {
            return Err(Error::NonFinite { context: format!("moment estimate for alpha = {}", a.key()) });
        }
    }
    Ok(())
}

/// `Pr_{N_k}[x ∈ Π [a_i, b_i]] = Π (Φ(b_i) − Φ(a_i))`.
pub fn gaussian_cell_probability(cell: &[(f64, f64)]) -> Result<f64> {
    let mut p = 1.0;
    for &(a, b) in cell {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite { context: "cell bounds".into() });
        }
        if a > b {
            return Err(Error::InvalidParameter(format!("inverted cell bounds [{a}, {b}]")));
        }
        p *= linalg::normal_cdf(b) - linalg::normal_cdf(a);
    }
    Ok(p.max(0.0))
}

/// Empirical second-moment matrix `(1/n) Σ x xᵀ`.
pub fn second_moment_matrix(ds: &Dataset) -> SymMatrix {
    let d = ds.dim();
    let flat = ds.as_flat();
    let partials: Vec<Vec<f64>> = flat
        .par_chunks(CHUNK * d)
        .map(|chunk| {
            let mut acc = vec![0.0; d * d];
            for point in chunk.chunks_exact(d) {
                for i in 0..d {
                    let xi = point[i];
                    for j in i..d {
                        acc[i * d + j] += xi * point[j];
                    }
                }
            }
            acc
        })
        .collect();
    let sums = pairwise_merge(partials, d * d);
    let n = ds.n() as f64;
    let mut m = SymMatrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let v = sums[i * d + j] / n;
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}

/// Largest eigenvalue of the empirical second-moment matrix.
pub fn max_eigenvalue(ds: &Dataset) -> Result<f64> {
    linalg::max_eigenvalue_sym(&second_moment_matrix(ds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::Concept;

    #[test]
    fn enumeration_counts_and_order() {
        let idx = enumerate_multi_indices(2, 1, INDEX_CAP).unwrap();
        let flat: Vec<Vec<u32>> = idx.iter().map(|a| a.0.clone()).collect();
        assert_eq!(flat, vec![vec![0, 0], vec![0, 1], vec![1, 0]]);
        assert_eq!(enumerate_multi_indices(1, 4, INDEX_CAP).unwrap().len(), 5);
        assert_eq!(enumerate_multi_indices(4, 2, INDEX_CAP).unwrap().len(), 15);
        assert_eq!(count_multi_indices(4, 2), 15);
    }

    #[test]
    fn enumeration_refuses_over_cap() {
        match enumerate_multi_indices(10, 4, 100) {
            Err(Error::IndexCountExceeded { count, .. }) => assert_eq!(count, 1001),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn gaussian_moments_closed_form() {
        assert_eq!(gaussian_moment(&MultiIndex(vec![0, 0, 0])), 1.0);
        assert_eq!(gaussian_moment(&MultiIndex(vec![2, 0])), 1.0);
        // E z^4 = 3 and E z^2 = 1; product rule gives 3. Cross-checked against
        // the quadrature oracle in tests/oracles.rs.
        assert_eq!(gaussian_moment(&MultiIndex(vec![4, 2])), 3.0);
        assert_eq!(gaussian_moment(&MultiIndex(vec![1, 2])), 0.0);
        assert_eq!(gaussian_moment(&MultiIndex(vec![6])), 15.0);
    }

    #[test]
    fn cube_moments_closed_form() {
        assert_eq!(cube_moment(&MultiIndex(vec![2, 4])), 1.0);
        assert_eq!(cube_moment(&MultiIndex(vec![1, 0])), 0.0);
        assert_eq!(cube_moment(&MultiIndex(vec![3, 2])), 0.0);
    }

    #[test]
    fn empirical_moments_single_point() {
        let ds = Dataset::from_flat(2, vec![2.0, 0.0]).unwrap();
        let mv = empirical_moments(&ds, 2).unwrap();
        assert_eq!(mv.get(&MultiIndex(vec![2, 0])), Some(4.0));
        assert_eq!(mv.get(&MultiIndex(vec![1, 1])), Some(0.0));
        assert_eq!(mv.get(&MultiIndex(vec![0, 0])), Some(1.0));
    }

    #[test]
    fn empirical_moments_cancellation() {
        let ds = Dataset::from_flat(2, vec![1.0, 1.0, -1.0, -1.0]).unwrap();
        let mv = empirical_moments(&ds, 1).unwrap();
        assert_eq!(mv.get(&MultiIndex(vec![1, 0])), Some(0.0));
    }

    #[test]
    fn chow_with_constant_plus_one_is_bitwise_moments() {
        use crate::distributions::{sample, DistributionSpec};
        use crate::rng::RngSpec;
        let ds = sample(&DistributionSpec::StandardGaussian { d: 3 }, 10_000, RngSpec::new(5, 0)).unwrap();
        let mv = empirical_moments(&ds, 3).unwrap();
        let cv = empirical_chow(&ds, &Concept::Constant(1), 3).unwrap();
        assert_eq!(mv.values, cv.values);
        let neg = empirical_chow(&ds, &Concept::Constant(-1), 3).unwrap();
        for (a, b) in mv.values.iter().zip(&neg.values) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn cell_probability_examples() {
        // Half line, truncated at 8 sigma.
        let half = gaussian_cell_probability(&[(0.0, 8.0)]).unwrap();
        assert!((half - 0.5).abs() < 1e-10);
        let square = gaussian_cell_probability(&[(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
        let phi1 = 2.0 * crate::linalg::normal_cdf(1.0) - 1.0;
        assert!((square - phi1 * phi1).abs() < 1e-12);
        assert!((square - 0.4660).abs() < 5e-4);
        assert_eq!(gaussian_cell_probability(&[(1.0, 1.0)]).unwrap(), 0.0);
        assert!(gaussian_cell_probability(&[(1.0, 0.0)]).is_err());
    }

    #[test]
    fn max_eigenvalue_rank_one() {
        let ds = Dataset::from_flat(3, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((max_eigenvalue(&ds).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn max_eigenvalue_permutation_invariant() {
        use crate::distributions::{sample, DistributionSpec};
        use crate::rng::RngSpec;
        let ds = sample(&DistributionSpec::StandardGaussian { d: 4 }, 5000, RngSpec::new(3, 1)).unwrap();
        let e1 = max_eigenvalue(&ds).unwrap();
        let reversed: Vec<Vec<f64>> = (0..ds.n()).rev().map(|i| ds.point(i).to_vec()).collect();
        let ds_rev = Dataset::from_rows(&reversed).unwrap();
        let e2 = max_eigenvalue(&ds_rev).unwrap();
        assert!((e1 - e2).abs() < 1e-9);
    }

    #[test]
    fn moment_vector_json_round_trip() {
        let ds = Dataset::from_flat(2, vec![1.0, 2.0, 0.5, -1.0]).unwrap();
        let mv = empirical_moments(&ds, 2).unwrap();
        let s = serde_json::to_string(&mv).unwrap();
        assert!(s.contains("\"0,1\""));
        let back: MomentVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, mv);
    }
}
