//! Concept representations and evaluation: halfspaces, intersections of
//! halfspaces, polynomial threshold functions and subspace juntas, plus
//! boundary membership and the Monte Carlo estimators for balance,
//! disagreement and boundary mass.
//!
//! Sign convention: `sign(0) = +1` everywhere, so every concept is a total
//! function into {−1, +1} and repeated runs agree on ties.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distributions::{sample, DistributionSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::moments::MultiIndex;
use crate::rng::RngSpec;

/// `x ↦ sign(w·x − τ)` with `‖w‖₂ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    w: Vec<f64>,
    tau: f64,
}

impl Halfspace {
    /// Requires `w` to already be unit within 1e-9.
    pub fn new(w: Vec<f64>, tau: f64) -> Result<Self> {
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "halfspace normal must be unit (norm {norm})"
            )));
        }
        if !tau.is_finite() {
            return Err(Error::NonFinite { context: "halfspace threshold".into() });
        }
        Ok(Halfspace { w, tau })
    }

    /// Normalizes the direction before constructing.
    pub fn from_direction(w: Vec<f64>, tau: f64) -> Result<Self> {
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParameter("zero or non-finite direction".into()));
        }
        Halfspace::new(w.iter().map(|x| x / norm).collect(), tau)
    }

    /// Axis-aligned halfspace `sign(x_i - τ)`.
    pub fn axis(d: usize, i: usize, tau: f64) -> Self {
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        Halfspace { w, tau }
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn margin(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - self.tau
    }

    /// Shift the threshold, keeping the direction.
    pub fn translated(&self, delta: f64) -> Self {
        Halfspace { w: self.w.clone(), tau: self.tau + delta }
    }
}

/// `+1` iff `w^i · x ≥ τ_i` for every i.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspaceIntersection {
    halfspaces: Vec<Halfspace>,
}

impl HalfspaceIntersection {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let d = match halfspaces.first() {
            Some(h) => h.dim(),
            None => return Err(Error::InvalidParameter("intersection needs k >= 1 halfspaces".into())),
        };
        if let Some(h) = halfspaces.iter().find(|h| h.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: h.dim() });
        }
        Ok(HalfspaceIntersection { halfspaces })
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn k(&self) -> usize {
        self.halfspaces.len()
    }

    pub fn dim(&self) -> usize {
        self.halfspaces[0].dim()
    }

    /// Signed distance to the nearest defining hyperplane.
    pub fn min_plane_distance(&self, x: &[f64]) -> f64 {
        self.halfspaces.iter().map(|h| h.margin(x).abs()).fold(f64::INFINITY, f64::min)
    }
}

/// `x ↦ sign(p(x) − t)` for a polynomial `p` given by monomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialThreshold {
    dim: usize,
    degree: u32,
    coeffs: Vec<(MultiIndex, f64)>,
    shift: f64,
}

impl PolynomialThreshold {
    pub fn new(dim: usize, degree: u32, coeffs: Vec<(MultiIndex, f64)>, shift: f64) -> Result<Self> {
        for (a, c) in &coeffs {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.dim() });
            }
            if a.total_degree() > degree {
                return Err(Error::InvalidParameter(format!(
                    "coefficient index {} exceeds degree {degree}",
                    a.key()
                )));
            }
            if !c.is_finite() {
                return Err(Error::NonFinite { context: format!("coefficient {}", a.key()) });
            }
        }
        if !shift.is_finite() {
            return Err(Error::NonFinite { context: "polynomial shift".into() });
        }
        Ok(PolynomialThreshold { dim, degree, coeffs, shift })
    }

    pub fn poly_value(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for (a, c) in &self.coeffs {
            let mut t = *c;
            for (i, &e) in a.0.iter().enumerate() {
                for _ in 0..e {
                    t *= x[i];
                }
            }
            s += t;
        }
        s
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn coeffs(&self) -> &[(MultiIndex, f64)] {
        &self.coeffs
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }
}

/// A concept of the form `x ↦ F(Vx)` for an orthonormal `k×d` basis `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceJunta {
    basis: Vec<Vec<f64>>,
    inner: Box<Concept>,
}

impl SubspaceJunta {
    /// Requires `V Vᵀ = I_k` within 1e-8; inputs that fail are rejected
    /// rather than silently re-orthonormalized.
    pub fn new(basis: Vec<Vec<f64>>, inner: Concept) -> Result<Self> {
        let k = basis.len();
        if k == 0 {
            return Err(Error::InvalidParameter("junta basis needs k >= 1 rows".into()));
        }
        let d = basis[0].len();
        if basis.iter().any(|r| r.len() != d) || k > d {
            return Err(Error::InvalidParameter("junta basis must be k×d with k <= d".into()));
        }
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = basis[i].iter().zip(&basis[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-8 {
                    return Err(Error::InvalidParameter(format!(
                        "basis rows {i},{j} not orthonormal (gram entry {dot})"
                    )));
                }
            }
        }
        if inner.dim() != k {
            return Err(Error::DimensionMismatch { expected: k, got: inner.dim() });
        }
        Ok(SubspaceJunta { basis, inner: Box::new(inner) })
    }

    /// Gram-Schmidt the rows (tolerance 1e-9) and construct.
    pub fn from_rows(rows: &[Vec<f64>], inner: Concept) -> Result<Self> {
        SubspaceJunta::new(linalg::gram_schmidt(rows, 1e-9)?, inner)
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn inner(&self) -> &Concept {
        &self.inner
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    pub fn project(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for row in &self.basis {
            out.push(row.iter().zip(x).map(|(a, b)| a * b).sum());
        }
    }
}

/// The concept union used throughout the testers.
#[derive(Debug, Clone, PartialEq)]
pub enum Concept {
    Halfspace(Halfspace),
    Intersection(HalfspaceIntersection),
    Polynomial(PolynomialThreshold),
    Junta(SubspaceJunta),
    Constant(i8),
}

impl Concept {
    pub fn dim(&self) -> usize {
        match self {
            Concept::Halfspace(h) => h.dim(),
            Concept::Intersection(f) => f.dim(),
            Concept::Polynomial(p) => p.dim,
            Concept::Junta(j) => j.basis[0].len(),
            // A constant is dimension-free; evaluators accept any input width.
            Concept::Constant(_) => 0,
        }
    }

    /// Evaluate with a dimension check.
    pub fn eval(&self, x: &[f64]) -> Result<i8> {
        let d = self.dim();
        if d != 0 && x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluate assuming the caller already validated dimensions.
    pub fn eval_unchecked(&self, x: &[f64]) -> i8 {
        match self {
            Concept::Halfspace(h) => sign_pm(h.margin(x)),
            Concept::Intersection(f) => {
                for h in &f.halfspaces {
                    if h.margin(x) < 0.0 {
                        return -1;
                    }
                }
                1
            }
            Concept::Polynomial(p) => sign_pm(p.poly_value(x) - p.shift),
            Concept::Junta(j) => {
                let mut proj = Vec::with_capacity(j.k());
                j.project(x, &mut proj);
                j.inner.eval_unchecked(&proj)
            }
            Concept::Constant(l) => *l,
        }
    }

    /// View a single halfspace as a 1-intersection, when applicable.
    pub fn as_intersection(&self) -> Option<HalfspaceIntersection> {
        match self {
            Concept::Halfspace(h) => Some(HalfspaceIntersection { halfspaces: vec![h.clone()] }),
            Concept::Intersection(f) => Some(f.clone()),
            _ => None,
        }
    }
}

#[inline]
fn sign_pm(v: f64) -> i8 {
    if v >= 0.0 {
        1
    } else {
        -1
    }
}

/// Slab-union membership in the ϱ-boundary of an intersection: true iff
/// `min_i |w^i·x − τ_i| ≤ ϱ`. This is a superset of the exact ϱ-boundary for
/// exterior points and coincides with it for points inside the intersection,
/// which is the set the boundary-proximity tester bounds.
pub fn boundary_membership(f: &HalfspaceIntersection, x: &[f64], varrho: f64) -> Result<bool> {
    if varrho <= 0.0 {
        return Err(Error::InvalidParameter(format!("varrho {varrho} must be positive")));
    }
    if x.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: x.len() });
    }
    Ok(f.min_plane_distance(x) <= varrho)
}

/// Empirical balance `min(P̂[f=+1], P̂[f=−1])` under `n` fresh samples.
pub fn estimate_balance(c: &Concept, sampler: &DistributionSpec, n: usize, rng: RngSpec) -> Result<f64> {
    let ds = sample(sampler, n, rng)?;
    check_dims(c, &ds)?;
    let pos = ds.iter_points().filter(|x| c.eval_unchecked(x) == 1).count();
    let p = pos as f64 / n as f64;
    Ok(p.min(1.0 - p))
}

/// Empirical `P̂[f(x) ≠ g(x)]` under `n` fresh samples.
pub fn estimate_disagreement(
    f: &Concept,
    g: &Concept,
    sampler: &DistributionSpec,
    n: usize,
    rng: RngSpec,
) -> Result<f64> {
    let ds = sample(sampler, n, rng)?;
    check_dims(f, &ds)?;
    check_dims(g, &ds)?;
    let cnt = ds
        .iter_points()
        .filter(|x| f.eval_unchecked(x) != g.eval_unchecked(x))
        .count();
    Ok(cnt as f64 / n as f64)
}

/// Empirical mass of the slab-union boundary region at width ϱ.
pub fn estimate_boundary_mass(
    f: &HalfspaceIntersection,
    varrho: f64,
    sampler: &DistributionSpec,
    n: usize,
    rng: RngSpec,
) -> Result<f64> {
    if varrho <= 0.0 {
        return Err(Error::InvalidParameter(format!("varrho {varrho} must be positive")));
    }
    let ds = sample(sampler, n, rng)?;
    if ds.dim() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: ds.dim() });
    }
    let cnt = ds.iter_points().filter(|x| f.min_plane_distance(x) <= varrho).count();
    Ok(cnt as f64 / n as f64)
}

fn check_dims(c: &Concept, ds: &Dataset) -> Result<()> {
    let d = c.dim();
    if d != 0 && ds.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: ds.dim() });
    }
    Ok(())
}

// ---- JSON representation -------------------------------------------------

impl Serialize for Halfspace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        HalfspaceRepr { w: self.w.clone(), tau: self.tau }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Halfspace {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = HalfspaceRepr::deserialize(d)?;
        Halfspace::new(r.w, r.tau).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ConceptRepr {
    Halfspace { w: Vec<f64>, tau: f64 },
    Intersection { halfspaces: Vec<HalfspaceRepr> },
    Polynomial { dim: usize, degree: u32, coeffs: std::collections::BTreeMap<String, f64>, shift: f64 },
    SubspaceJunta { basis: Vec<Vec<f64>>, inner: Box<ConceptRepr> },
    Constant { label: i8 },
}

#[derive(Serialize, Deserialize)]
struct HalfspaceRepr {
    w: Vec<f64>,
    tau: f64,
}

impl From<&Concept> for ConceptRepr {
    fn from(c: &Concept) -> Self {
        match c {
            Concept::Halfspace(h) => ConceptRepr::Halfspace { w: h.w.clone(), tau: h.tau },
            Concept::Intersection(f) => ConceptRepr::Intersection {
                halfspaces: f
                    .halfspaces
                    .iter()
                    .map(|h| HalfspaceRepr { w: h.w.clone(), tau: h.tau })
                    .collect(),
            },
            Concept::Polynomial(p) => ConceptRepr::Polynomial {
                dim: p.dim,
                degree: p.degree,
                coeffs: p.coeffs.iter().map(|(a, v)| (a.key(), *v)).collect(),
                shift: p.shift,
            },
            Concept::Junta(j) => ConceptRepr::SubspaceJunta {
                basis: j.basis.clone(),
                inner: Box::new(ConceptRepr::from(j.inner.as_ref())),
            },
            Concept::Constant(l) => ConceptRepr::Constant { label: *l },
        }
    }
}

impl TryFrom<ConceptRepr> for Concept {
    type Error = Error;

    fn try_from(r: ConceptRepr) -> Result<Self> {
        Ok(match r {
            ConceptRepr::Halfspace { w, tau } => Concept::Halfspace(Halfspace::new(w, tau)?),
            ConceptRepr::Intersection { halfspaces } => {
                let hs = halfspaces
                    .into_iter()
                    .map(|h| Halfspace::new(h.w, h.tau))
                    .collect::<Result<Vec<_>>>()?;
                Concept::Intersection(HalfspaceIntersection::new(hs)?)
            }
            ConceptRepr::Polynomial { dim, degree, coeffs, shift } => {
                let mut cs = Vec::with_capacity(coeffs.len());
                for (k, v) in coeffs {
                    cs.push((MultiIndex::parse_key(&k)?, v));
                }
                cs.sort_by(|a, b| a.0.cmp(&b.0));
                Concept::Polynomial(PolynomialThreshold::new(dim, degree, cs, shift)?)
            }
            ConceptRepr::SubspaceJunta { basis, inner } => {
                Concept::Junta(SubspaceJunta::new(basis, Concept::try_from(*inner)?)?)
            }
            ConceptRepr::Constant { label } => {
                if label != 1 && label != -1 {
                    return Err(Error::InvalidParameter("constant label must be ±1".into()));
                }
                Concept::Constant(label)
            }
        })
    }
}

impl Serialize for Concept {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ConceptRepr::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Concept {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ConceptRepr::deserialize(d)?;
        Concept::try_from(repr).map_err(D::Error::custom)
    }
}
