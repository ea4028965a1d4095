//! Samplers for training/test marginals and analytic structure profiles.
//!
//! Benign families (Gaussian, uniform cube, product Laplace, uniform ball)
//! come with certified concentration/anticoncentration profiles; adversarial
//! wrappers (mean shift, scale, mixtures, boundary spikes) deliberately do
//! not. The boundary spike concentrates mass in a slab around a hyperplane by
//! rejection and is the canonical soundness adversary for the geometric
//! testers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, Halfspace};
use crate::data::{Dataset, LabeledDataset};
use crate::error::{Error, Result};
use crate::rng::RngSpec;

const REJECTION_CAP: u64 = 1_000_000;

/// Marginal distribution over `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DistributionSpec {
    StandardGaussian { d: usize },
    UniformCube { d: usize },
    /// Each coordinate Laplace with scale 1/√2, so the variance is exactly 1.
    ProductLaplace { d: usize },
    /// Uniform on the ball of radius √(d+2), which makes it isotropic.
    UniformBall { d: usize },
    MeanShift { base: Box<DistributionSpec>, shift: Vec<f64> },
    Scale { base: Box<DistributionSpec>, factor: f64 },
    Mixture { components: Vec<MixtureComponent> },
    /// With probability `spike_mass`, resample `base` conditioned into the
    /// slab `|w·x − τ| ≤ width` by rejection.
    BoundarySpike { base: Box<DistributionSpec>, halfspace: Halfspace, width: f64, spike_mass: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub spec: DistributionSpec,
}

impl DistributionSpec {
    pub fn dim(&self) -> usize {
        match self {
            DistributionSpec::StandardGaussian { d }
            | DistributionSpec::UniformCube { d }
            | DistributionSpec::ProductLaplace { d }
            | DistributionSpec::UniformBall { d } => *d,
            DistributionSpec::MeanShift { base, .. }
            | DistributionSpec::Scale { base, .. }
            | DistributionSpec::BoundarySpike { base, .. } => base.dim(),
            DistributionSpec::Mixture { components } => {
                components.first().map(|c| c.spec.dim()).unwrap_or(0)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::StandardGaussian { d }
            | DistributionSpec::UniformCube { d }
            | DistributionSpec::ProductLaplace { d }
            | DistributionSpec::UniformBall { d } => {
                if *d == 0 {
                    return Err(Error::InvalidParameter("dimension must be positive".into()));
                }
            }
            DistributionSpec::MeanShift { base, shift } => {
                base.validate()?;
                if shift.len() != base.dim() {
                    return Err(Error::DimensionMismatch { expected: base.dim(), got: shift.len() });
                }
                if shift.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { context: "mean shift".into() });
                }
            }
            DistributionSpec::Scale { base, factor } => {
                base.validate()?;
                if !factor.is_finite() || *factor <= 0.0 {
                    return Err(Error::InvalidParameter(format!("scale factor {factor} must be positive")));
                }
            }
            DistributionSpec::Mixture { components } => {
                if components.is_empty() {
                    return Err(Error::InvalidParameter("mixture needs components".into()));
                }
                let d = components[0].spec.dim();
                let mut total = 0.0;
                for c in components {
                    c.spec.validate()?;
                    if c.weight < 0.0 {
                        return Err(Error::InvalidParameter("mixture weight negative".into()));
                    }
                    if c.spec.dim() != d {
                        return Err(Error::DimensionMismatch { expected: d, got: c.spec.dim() });
                    }
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidParameter(format!("mixture weights sum to {total}, not 1")));
                }
            }
            DistributionSpec::BoundarySpike { base, halfspace, width, spike_mass } => {
                base.validate()?;
                if halfspace.dim() != base.dim() {
                    return Err(Error::DimensionMismatch { expected: base.dim(), got: halfspace.dim() });
                }
                if !(*width > 0.0) {
                    return Err(Error::InvalidParameter(format!("spike width {width} must be positive")));
                }
                if !(0.0..=1.0).contains(spike_mass) {
                    return Err(Error::InvalidParameter(format!("spike mass {spike_mass} outside [0,1]")));
                }
            }
        }
        Ok(())
    }
}

/// Draw `n` i.i.d. points. Deterministic given `rng`.
pub fn sample(spec: &DistributionSpec, n: usize, rng: RngSpec) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    spec.validate()?;
    let d = spec.dim();
    let mut data = vec![0.0; n * d];
    let mut r = rng.rng();
    for i in 0..n {
        draw_into(spec, &mut r, &mut data[i * d..(i + 1) * d])?;
    }
    Dataset::from_flat(d, data)
}

/// Draw one point into `out`. Exposed for streaming consumers that cannot
/// afford to materialize the whole dataset.
pub fn draw_into(spec: &DistributionSpec, r: &mut ChaCha8Rng, out: &mut [f64]) -> Result<()> {
    match spec {
        DistributionSpec::StandardGaussian { .. } => {
            for v in out.iter_mut() {
                *v = StandardNormal.sample(r);
            }
        }
        DistributionSpec::UniformCube { .. } => {
            for v in out.iter_mut() {
                *v = if r.random::<bool>() { 1.0 } else { -1.0 };
            }
        }
        DistributionSpec::ProductLaplace { .. } => {
            let b = 1.0 / std::f64::consts::SQRT_2;
            for v in out.iter_mut() {
                // Inverse CDF; u is kept away from the endpoints by the
                // half-open [0,1) range plus the 1-u branch.
                let u: f64 = r.random();
                *v = if u < 0.5 {
                    b * (2.0 * u).max(f64::MIN_POSITIVE).ln()
                } else {
                    -b * (2.0 * (1.0 - u)).max(f64::MIN_POSITIVE).ln()
                };
            }
        }
        DistributionSpec::UniformBall { d } => {
            let mut norm2 = 0.0;
            for v in out.iter_mut() {
                let g: f64 = StandardNormal.sample(r);
                *v = g;
                norm2 += g * g;
            }
            let norm = norm2.sqrt().max(f64::MIN_POSITIVE);
            let u: f64 = r.random();
            let radius = (*d as f64 + 2.0).sqrt() * u.powf(1.0 / *d as f64);
            for v in out.iter_mut() {
                *v *= radius / norm;
            }
        }
        DistributionSpec::MeanShift { base, shift } => {
            draw_into(base, r, out)?;
            out.iter_mut().zip(shift).for_each(|(v, s)| *v += s);
        }
        DistributionSpec::Scale { base, factor } => {
            draw_into(base, r, out)?;
            out.iter_mut().for_each(|v| *v *= factor);
        }
        DistributionSpec::Mixture { components } => {
            let u: f64 = r.random();
            let mut acc = 0.0;
            let mut chosen = &components[components.len() - 1].spec;
            for c in components {
                acc += c.weight;
                if u < acc {
                    chosen = &c.spec;
                    break;
                }
            }
            draw_into(chosen, r, out)?;
        }
        DistributionSpec::BoundarySpike { base, halfspace, width, spike_mass } => {
            let u: f64 = r.random();
            if u < *spike_mass {
                let mut attempts = 0u64;
                loop {
                    draw_into(base, r, out)?;
                    if halfspace.margin(out).abs() <= *width {
                        break;
                    }
                    attempts += 1;
                    if attempts >= REJECTION_CAP {
                        return Err(Error::RejectionSamplingFailed { attempts });
                    }
                }
            } else {
                draw_into(base, r, out)?;
            }
        }
    }
    Ok(())
}

/// Label a dataset with a concept, flipping each label independently with
/// probability `noise_rate`.
pub fn label_with(
    c: &Concept,
    ds: &Dataset,
    noise_rate: f64,
    rng: RngSpec,
) -> Result<LabeledDataset> {
    if !(0.0..0.5).contains(&noise_rate) {
        return Err(Error::InvalidParameter(format!("noise rate {noise_rate} outside [0, 0.5)")));
    }
    let cd = c.dim();
    if cd != 0 && cd != ds.dim() {
        return Err(Error::DimensionMismatch { expected: cd, got: ds.dim() });
    }
    let mut r = rng.rng();
    let labels = ds
        .iter_points()
        .map(|x| {
            let mut l = c.eval_unchecked(x);
            if noise_rate > 0.0 && r.random::<f64>() < noise_rate {
                l = -l;
            }
            l
        })
        .collect();
    LabeledDataset::new(ds.clone(), labels)
}

/// Which closed-form profile family a spec belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// μ_c(p) = (2p−1)!!, μ_ac(R) = 1.
    Gaussian,
    /// μ_c(p) = (Cp)^{2p}, μ_ac(R) = (Ck)^k · e^{R²/2}.
    LogConcave,
    /// Subgaussian moments (μ_c(p) = (2p−1)!! by Gaussian domination of
    /// Rademacher sums) but no certified anticoncentration: the marginals are
    /// atomic, so μ_ac is +∞.
    BooleanCube,
}

/// The (μ_c, μ_ac) structure parameters of a known family, evaluated for
/// marginals of dimension `k`. These are inputs to the testers, never
/// inferred from data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredProfile {
    pub kind: ProfileKind,
    /// Dimension the anticoncentration bound applies to.
    pub k: usize,
    /// The explicit constant in the log-concave bounds (default 2).
    pub c: f64,
}

/// Default constant for the log-concave profile formulas.
pub const LOG_CONCAVE_C: f64 = 2.0;

impl StructuredProfile {
    pub fn gaussian(k: usize) -> Self {
        StructuredProfile { kind: ProfileKind::Gaussian, k, c: 1.0 }
    }

    pub fn log_concave(k: usize) -> Self {
        StructuredProfile { kind: ProfileKind::LogConcave, k, c: LOG_CONCAVE_C }
    }

    /// Same family, re-dimensioned to `k`-dimensional marginals (marginals of
    /// the supported families stay in the family).
    pub fn with_marginal_dim(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    /// Upper bound on `sup_v E[(v·x)^{2p}]`.
    pub fn mu_c(&self, p: u32) -> f64 {
        match self.kind {
            ProfileKind::Gaussian | ProfileKind::BooleanCube => {
                let mut m = 1.0;
                let mut j = 2 * p as i64 - 1;
                while j > 1 {
                    m *= j as f64;
                    j -= 2;
                }
                m
            }
            ProfileKind::LogConcave => (self.c * p as f64).powi(2 * p as i32),
        }
    }

    /// Upper bound on the k-dimensional marginal density ratio against the
    /// standard Gaussian, inside radius `r`.
    pub fn mu_ac(&self, r: f64) -> f64 {
        match self.kind {
            ProfileKind::Gaussian => 1.0,
            ProfileKind::LogConcave => {
                (self.c * self.k as f64).powi(self.k as i32) * (r * r / 2.0).exp()
            }
            ProfileKind::BooleanCube => f64::INFINITY,
        }
    }
}

/// Closed-form profile of an analytically profiled family. Adversarial
/// wrappers have no certified profile and are rejected.
pub fn profile_of(spec: &DistributionSpec) -> Result<StructuredProfile> {
    match spec {
        DistributionSpec::StandardGaussian { d } => Ok(StructuredProfile::gaussian(*d)),
        DistributionSpec::ProductLaplace { d } | DistributionSpec::UniformBall { d } => {
            Ok(StructuredProfile::log_concave(*d))
        }
        DistributionSpec::UniformCube { d } => {
            Ok(StructuredProfile { kind: ProfileKind::BooleanCube, k: *d, c: 1.0 })
        }
        _ => Err(Error::InvalidParameter(
            "no certified profile for this distribution family".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments;

    #[test]
    fn gaussian_sample_means_are_small() {
        let ds = sample(&DistributionSpec::StandardGaussian { d: 4 }, 100_000, RngSpec::new(1, 0)).unwrap();
        let mv = moments::empirical_moments(&ds, 1).unwrap();
        for (a, v) in mv.indices.iter().zip(&mv.values) {
            if a.total_degree() == 1 {
                assert!(v.abs() < 0.02, "coordinate mean {v} too large");
            }
        }
    }

    #[test]
    fn cube_sample_support() {
        let ds = sample(&DistributionSpec::UniformCube { d: 3 }, 2000, RngSpec::new(2, 0)).unwrap();
        assert!(ds.as_flat().iter().all(|v| *v == 1.0 || *v == -1.0));
    }

    #[test]
    fn mean_shift_moves_the_mean() {
        let spec = DistributionSpec::MeanShift {
            base: Box::new(DistributionSpec::StandardGaussian { d: 3 }),
            shift: vec![2.0, 0.0, 0.0],
        };
        let ds = sample(&spec, 100_000, RngSpec::new(3, 0)).unwrap();
        let mean0 = ds.iter_points().map(|p| p[0]).sum::<f64>() / ds.n() as f64;
        assert!((1.95..=2.05).contains(&mean0), "mean {mean0}");
    }

    #[test]
    fn laplace_variance_is_one() {
        let ds = sample(&DistributionSpec::ProductLaplace { d: 2 }, 200_000, RngSpec::new(4, 0)).unwrap();
        let var0 = ds.iter_points().map(|p| p[0] * p[0]).sum::<f64>() / ds.n() as f64;
        assert!((var0 - 1.0).abs() < 0.02, "variance {var0}");
        // Fourth moment of unit-variance Laplace is 6.
        let m4 = ds.iter_points().map(|p| p[0].powi(4)).sum::<f64>() / ds.n() as f64;
        assert!((m4 - 6.0).abs() < 0.35, "fourth moment {m4}");
    }

    #[test]
    fn ball_is_isotropic() {
        let ds = sample(&DistributionSpec::UniformBall { d: 3 }, 200_000, RngSpec::new(5, 0)).unwrap();
        let var0 = ds.iter_points().map(|p| p[0] * p[0]).sum::<f64>() / ds.n() as f64;
        assert!((var0 - 1.0).abs() < 0.02, "variance {var0}");
        let rmax = (3.0f64 + 2.0).sqrt();
        assert!(ds.iter_points().all(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt() <= rmax + 1e-12));
    }

    #[test]
    fn boundary_spike_hits_the_slab() {
        let h = Halfspace::axis(2, 0, 0.5);
        let spec = DistributionSpec::BoundarySpike {
            base: Box::new(DistributionSpec::StandardGaussian { d: 2 }),
            halfspace: h.clone(),
            width: 0.05,
            spike_mass: 0.4,
        };
        let n = 50_000;
        let ds = sample(&spec, n, RngSpec::new(6, 0)).unwrap();
        let in_slab = ds.iter_points().filter(|x| h.margin(x).abs() <= 0.05).count() as f64 / n as f64;
        // pi minus 3 binomial sigmas.
        let sigma = (0.4f64 * 0.6 / n as f64).sqrt();
        assert!(in_slab >= 0.4 - 3.0 * sigma, "slab mass {in_slab}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = DistributionSpec::Mixture {
            components: vec![
                MixtureComponent { weight: 0.5, spec: DistributionSpec::StandardGaussian { d: 2 } },
                MixtureComponent {
                    weight: 0.5,
                    spec: DistributionSpec::MeanShift {
                        base: Box::new(DistributionSpec::StandardGaussian { d: 2 }),
                        shift: vec![3.0, 0.0],
                    },
                },
            ],
        };
        let a = sample(&spec, 512, RngSpec::new(11, 7)).unwrap();
        let b = sample(&spec, 512, RngSpec::new(11, 7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labeling_noise_rate_is_respected() {
        let c = Concept::Halfspace(Halfspace::axis(2, 0, 0.0));
        let ds = sample(&DistributionSpec::StandardGaussian { d: 2 }, 100_000, RngSpec::new(7, 0)).unwrap();
        let clean = label_with(&c, &ds, 0.0, RngSpec::new(8, 0)).unwrap();
        for (x, y) in ds.iter_points().zip(&clean.labels) {
            assert_eq!(c.eval_unchecked(x), *y);
        }
        let noisy = label_with(&c, &ds, 0.1, RngSpec::new(8, 1)).unwrap();
        let flips = clean.labels.iter().zip(&noisy.labels).filter(|(a, b)| a != b).count();
        let rate = flips as f64 / ds.n() as f64;
        assert!((0.09..=0.11).contains(&rate), "flip rate {rate}");
    }

    #[test]
    fn profile_values() {
        let g = profile_of(&DistributionSpec::StandardGaussian { d: 5 }).unwrap();
        assert_eq!(g.mu_c(1), 1.0);
        assert_eq!(g.mu_c(2), 3.0);
        assert_eq!(g.mu_ac(10.0), 1.0);
        let l = profile_of(&DistributionSpec::ProductLaplace { d: 5 }).unwrap().with_marginal_dim(2);
        assert_eq!(l.mu_c(2), 256.0); // (2*2)^4
        assert!((l.mu_ac(1.0) - 16.0 * (0.5f64).exp()).abs() < 1e-12);
        assert!(profile_of(&DistributionSpec::MeanShift {
            base: Box::new(DistributionSpec::StandardGaussian { d: 2 }),
            shift: vec![1.0, 0.0],
        })
        .is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = DistributionSpec::BoundarySpike {
            base: Box::new(DistributionSpec::ProductLaplace { d: 3 }),
            halfspace: Halfspace::axis(3, 1, 0.25),
            width: 0.1,
            spike_mass: 0.3,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"type\":\"boundary_spike\""));
        let back: DistributionSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
