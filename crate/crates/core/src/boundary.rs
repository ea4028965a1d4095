//! Boundary-proximity testing for halfspace intersections, the two
//! concentration wrappers (moment matching and spectral), and the ϱ-net TDS
//! pipeline for balanced intersections.
//!
//! The boundary proximity tester rejects when any defining hyperplane of the
//! hypothesis attracts empirical slab mass above `3Cϱ`, where C caps the
//! one-dimensional marginal densities of the completeness class. Combined
//! with a concentration check this certifies that concepts within a small
//! Gaussian-disagreement neighborhood of the hypothesis cannot disagree with
//! it much under the test marginal: disagreement points must lie far from
//! the origin or inside the tested slabs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::chow::TDSOutcome;
use crate::concepts::{boundary_membership, Concept, HalfspaceIntersection};
use crate::data::{Dataset, LabeledDataset, Verdict};
use crate::distributions::{sample, DistributionSpec};
use crate::error::{Error, Result};
use crate::moments::{
    empirical_moments, enumerate_multi_indices, gaussian_moment, max_eigenvalue, INDEX_CAP,
};
use crate::rng::RngSpec;
use crate::training::{train, TrainerSpec};

/// Boundary proximity tester parameters.
///
/// `density_bound` is the 1-D marginal density cap C of the completeness
/// class (0.4 covers the standard Gaussian peak 1/√(2π)); the per-halfspace
/// rejection threshold is exactly `3Cϱ` and the derived boundary smoothness
/// is `σ̂ = 3Ck`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTesterConfig {
    pub varrho: f64,
    pub density_bound: f64,
    pub k: usize,
}

impl BoundaryTesterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.varrho > 0.0 && self.varrho.is_finite()) {
            return Err(Error::InvalidParameter(format!("varrho {} must be positive", self.varrho)));
        }
        if self.density_bound < 0.4 {
            return Err(Error::InvalidParameter(format!(
                "density bound {} below the Gaussian peak cap 0.4",
                self.density_bound
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn slab_threshold(&self) -> f64 {
        3.0 * self.density_bound * self.varrho
    }

    pub fn sigma_hat(&self) -> f64 {
        3.0 * self.density_bound * self.k as f64
    }
}

/// Reject iff some defining halfspace has empirical slab mass
/// `P̂[|w^i·x − τ_i| ≤ ϱ] > 3Cϱ`. Per-halfspace masses are reported in the
/// verdict thresholds as `slab_mass_i`.
pub fn boundary_proximity_test(
    ds: &Dataset,
    f_hat: &HalfspaceIntersection,
    cfg: &BoundaryTesterConfig,
) -> Result<Verdict> {
    cfg.validate()?;
    if ds.dim() != f_hat.dim() {
        return Err(Error::DimensionMismatch { expected: f_hat.dim(), got: ds.dim() });
    }
    let n = ds.n() as f64;
    let threshold = cfg.slab_threshold();
    let mut thresholds = BTreeMap::new();
    thresholds.insert("varrho".into(), cfg.varrho);
    thresholds.insert("density_bound".into(), cfg.density_bound);
    thresholds.insert("slab_threshold".into(), threshold);

    let mut worst: Option<(usize, f64)> = None;
    for (i, h) in f_hat.halfspaces().iter().enumerate() {
        let count = ds.iter_points().filter(|x| h.margin(x).abs() <= cfg.varrho).count();
        let mass = count as f64 / n;
        thresholds.insert(format!("slab_mass_{i}"), mass);
        if mass > threshold && worst.map(|(_, m)| mass > m).unwrap_or(true) {
            worst = Some((i, mass));
        }
    }
    Ok(match worst {
        Some((i, mass)) => Verdict::reject(format!("slab:{i}"), mass - threshold, thresholds),
        None => Verdict::accept(thresholds),
    })
}

/// Concentration wrapper run before the boundary test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ConcentrationConfig {
    /// Match all Gaussian moments of degree ≤ 2p within `Δ = 1/(2kd)^{2p}`.
    /// Tight and Gaussian-specific.
    MomentMatch { p: u32, k: usize },
    /// Reject iff the top eigenvalue of `(1/n)Σxxᵀ` exceeds `2μ_c`.
    /// Universal across every class with bounded directional moments.
    Spectral { mu_c: f64 },
}

impl ConcentrationConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConcentrationConfig::MomentMatch { p, k } => {
                if *p == 0 || *k == 0 {
                    return Err(Error::InvalidParameter("p and k must be >= 1".into()));
                }
            }
            ConcentrationConfig::Spectral { mu_c } => {
                if *mu_c < 1.0 {
                    return Err(Error::InvalidParameter(format!("mu_c {mu_c} must be >= 1")));
                }
            }
        }
        Ok(())
    }

    /// Moment tolerance `Δ = 1/(2kd)^{2p}` (moment-match variant only).
    pub fn moment_delta(&self, d: usize) -> Option<f64> {
        match self {
            ConcentrationConfig::MomentMatch { p, k } => {
                Some((2.0 * *k as f64 * d as f64).powi(-2 * *p as i32))
            }
            ConcentrationConfig::Spectral { .. } => None,
        }
    }
}

/// Run the configured concentration check against the Gaussian reference.
pub fn concentration_test(ds: &Dataset, cfg: &ConcentrationConfig) -> Result<Verdict> {
    cfg.validate()?;
    let d = ds.dim();
    let mut thresholds = BTreeMap::new();
    match cfg {
        ConcentrationConfig::MomentMatch { p, k } => {
            let delta = cfg.moment_delta(d).expect("moment variant");
            thresholds.insert("delta".into(), delta);
            thresholds.insert("p".into(), *p as f64);
            thresholds.insert("k".into(), *k as f64);
            let degree = 2 * p;
            let indices = enumerate_multi_indices(d, degree, INDEX_CAP)?;
            let mv = empirical_moments(ds, degree)?;
            let mut worst: Option<(String, f64)> = None;
            for (alpha, value) in indices.iter().zip(&mv.values) {
                let gap = (value - gaussian_moment(alpha)).abs();
                if gap > delta && worst.as_ref().map(|(_, g)| gap - delta > *g).unwrap_or(true) {
                    worst = Some((format!("moment:{}", alpha.key()), gap - delta));
                }
            }
            Ok(match worst {
                Some((check, gap)) => Verdict::reject(check, gap, thresholds),
                None => Verdict::accept(thresholds),
            })
        }
        ConcentrationConfig::Spectral { mu_c } => {
            let bound = 2.0 * mu_c;
            let eig = max_eigenvalue(ds)?;
            thresholds.insert("mu_c".into(), *mu_c);
            thresholds.insert("eigenvalue".into(), eig);
            thresholds.insert("eigenvalue_bound".into(), bound);
            Ok(if eig > bound {
                Verdict::reject("eigenvalue", eig - bound, thresholds)
            } else {
                Verdict::accept(thresholds)
            })
        }
    }
}

/// Slab width for a target disagreement slack:
/// `ϱ = (δ_e/β)^{1/k} · √k · e^{2R²/k}`, admissible only while
/// `δ_e ≤ β·r^k·k^{-k/2}·e^{-2R²}` (so that ϱ ≤ r, the local-balance
/// radius). Errors outside the admissible range.
pub fn varrho_for(slack_e: f64, beta: f64, k: usize, radius: f64, r_local: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) || k == 0 || radius < 1.0 || r_local <= 0.0 {
        return Err(Error::InvalidParameter("varrho_for parameters out of range".into()));
    }
    if slack_e <= 0.0 {
        return Err(Error::InvalidParameter("slack_e must be positive (it tends to 0 with ϱ)".into()));
    }
    let kf = k as f64;
    // log-space admissibility: ln δ_e ≤ ln β + k ln r − (k/2) ln k − 2R².
    let ln_cap = beta.ln() + kf * r_local.ln() - 0.5 * kf * kf.ln() - 2.0 * radius * radius;
    if slack_e.ln() > ln_cap + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "slack_e {slack_e} exceeds the admissible cap exp({ln_cap:.3}) for r={r_local}"
        )));
    }
    Ok(kf.sqrt() * (((slack_e / beta).ln() + 2.0 * radius * radius) / kf).exp())
}

/// Certified error level of the combined test:
/// moment variant `ε′ = 2(4kp/R²)^p + σ̂√k·(δ_e·e^{2R²}/β)^{1/k}`,
/// spectral variant `ε′ = 4kμ_c/R² + σ̂√k·(δ_e·e^{2R²}/β)^{1/k}`.
/// Evaluated in log space so large radii do not overflow prematurely.
pub fn eps_prime_boundary(
    variant: &ConcentrationConfig,
    k: usize,
    radius: f64,
    slack_e: f64,
    beta: f64,
    sigma_hat: f64,
) -> f64 {
    let kf = k as f64;
    let first = match variant {
        ConcentrationConfig::MomentMatch { p, .. } => {
            2.0 * (4.0 * kf * *p as f64 / (radius * radius)).powi(*p as i32)
        }
        ConcentrationConfig::Spectral { mu_c } => 4.0 * kf * mu_c / (radius * radius),
    };
    let second = if slack_e == 0.0 {
        0.0
    } else {
        sigma_hat * kf.sqrt() * ((slack_e.ln() + 2.0 * radius * radius - beta.ln()) / kf).exp()
    };
    first + second
}

/// ε′ at a net point ϱ, using the exact simplification
/// `(δ_e(ϱ)·e^{2R²}/β)^{1/k} = ϱ/√k`: the certified level is
/// `first_term + σ̂·ϱ` regardless of how large R is.
pub fn eps_prime_at_net_point(
    variant: &ConcentrationConfig,
    k: usize,
    radius: f64,
    varrho: f64,
    sigma_hat: f64,
) -> f64 {
    let kf = k as f64;
    let first = match variant {
        ConcentrationConfig::MomentMatch { p, .. } => {
            2.0 * (4.0 * kf * *p as f64 / (radius * radius)).powi(*p as i32)
        }
        ConcentrationConfig::Spectral { mu_c } => 4.0 * kf * mu_c / (radius * radius),
    };
    first + sigma_hat * varrho
}

/// Fraction of Gaussian samples that witness a localization failure:
/// `‖x‖₂ ≤ R`, the concepts disagree, and x is outside the slab-union
/// ϱ-boundary of `f_hat`. Zero for genuinely locally balanced instances.
pub fn check_localization(
    f: &HalfspaceIntersection,
    f_hat: &HalfspaceIntersection,
    radius: f64,
    varrho: f64,
    n: usize,
    rng: RngSpec,
) -> Result<f64> {
    if f.dim() != f_hat.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: f_hat.dim() });
    }
    let d = f.dim();
    let ds = sample(&DistributionSpec::StandardGaussian { d }, n, rng)?;
    let cf = Concept::Intersection(f.clone());
    let cg = Concept::Intersection(f_hat.clone());
    let mut violations = 0usize;
    for x in ds.iter_points() {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= radius
            && cf.eval_unchecked(x) != cg.eval_unchecked(x)
            && !boundary_membership(f_hat, x, varrho)?
        {
            violations += 1;
        }
    }
    Ok(violations as f64 / n as f64)
}

const NET_GRANULARITY: f64 = 10.0; // net step = ε/(10k²)
const NET_LIMIT_CONSTANT: f64 = 10.0; // net upper end = β/(10 k ln(k+1))
const AMPLIFICATION: usize = 5; // majority over 5 disjoint splits per net point

/// Pipeline configuration for TDS learning of balanced intersections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntersectionsPipelineConfig {
    pub epsilon: f64,
    pub beta: f64,
    pub k: usize,
    pub variant: ConcentrationConfig,
    /// 1-D density cap C of the completeness class (Gaussian: 0.4).
    pub density_bound: f64,
    /// Concentration radius R. Default balances the first ε′ term to ε/2.
    pub radius: Option<f64>,
    /// Local-balance radius r. Default β/(10·k·ln(k+1)).
    pub r_local: Option<f64>,
}

impl IntersectionsPipelineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidParameter("epsilon and beta must lie in (0,1)".into()));
        }
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        self.variant.validate()
    }

    pub fn default_radius(&self) -> f64 {
        let kf = self.k as f64;
        let r = match &self.variant {
            ConcentrationConfig::Spectral { mu_c } => (8.0 * kf * mu_c / self.epsilon).sqrt(),
            ConcentrationConfig::MomentMatch { p, .. } => {
                let pf = *p as f64;
                (4.0 * kf * pf / (self.epsilon / 4.0).powf(1.0 / pf)).sqrt()
            }
        };
        r.max(1.0)
    }

    pub fn effective_r_local(&self) -> f64 {
        self.r_local
            .unwrap_or(self.beta / (NET_LIMIT_CONSTANT * self.k as f64 * ((self.k + 1) as f64).ln()))
    }

    /// The ϱ-net `{j·ε/(10k²)} ∩ (0, β/(10·k·ln(k+1))]`.
    pub fn net(&self) -> Result<Vec<f64>> {
        let step = self.epsilon / (NET_GRANULARITY * (self.k * self.k) as f64);
        let limit = self.effective_r_local();
        let mut net = Vec::new();
        let mut j = 1usize;
        while j as f64 * step <= limit {
            net.push(j as f64 * step);
            j += 1;
        }
        if net.is_empty() {
            return Err(Error::Config(format!(
                "empty varrho net: step {step} exceeds limit {limit} (beta too small vs epsilon)"
            )));
        }
        Ok(net)
    }
}

/// Train, run the concentration wrapper once, then the boundary proximity
/// tester at every ϱ in the net, each amplified by a 5-vote majority over
/// disjoint splits of the test set. Accept iff everything accepts.
pub fn tds_intersections_run(
    train_data: &LabeledDataset,
    test_ds: &Dataset,
    trainer: &TrainerSpec,
    cfg: &IntersectionsPipelineConfig,
    rng: RngSpec,
) -> Result<TDSOutcome> {
    cfg.validate()?;
    if train_data.dim() != test_ds.dim() {
        return Err(Error::DimensionMismatch { expected: train_data.dim(), got: test_ds.dim() });
    }
    let report = train(trainer, train_data, rng.child(1))?;
    let f_hat = match report.hypothesis.as_intersection() {
        Some(f) => f,
        None => {
            return Err(Error::Training(
                "intersections pipeline needs a trainer that outputs a halfspace intersection".into(),
            ))
        }
    };

    let radius = cfg.radius.unwrap_or_else(|| cfg.default_radius());
    let sigma_hat = 3.0 * cfg.density_bound * cfg.k as f64;
    let net = cfg.net()?;

    let mut thresholds = BTreeMap::new();
    thresholds.insert("epsilon".into(), cfg.epsilon);
    thresholds.insert("beta".into(), cfg.beta);
    thresholds.insert("k".into(), cfg.k as f64);
    thresholds.insert("radius".into(), radius);
    thresholds.insert("sigma_hat".into(), sigma_hat);
    thresholds.insert("net_points".into(), net.len() as f64);
    thresholds.insert("net_min".into(), net[0]);
    thresholds.insert("net_max".into(), *net.last().unwrap());

    let reject = |check: String, gap: f64, mut th: BTreeMap<String, f64>, err_train: f64| {
        th.insert("eps_prime".into(), f64::NAN);
        TDSOutcome {
            verdict: Verdict::reject(check, gap, th),
            hypothesis: None,
            training_error: err_train,
            certified_error_bound: 1.0,
        }
    };

    // Step 1: concentration.
    let conc = concentration_test(test_ds, &cfg.variant)?;
    for (k2, v) in &conc.thresholds {
        thresholds.entry(format!("conc_{k2}")).or_insert(*v);
    }
    if !conc.accepted {
        return Ok(reject(
            format!("concentration:{}", conc.failed_check.unwrap_or_default()),
            conc.worst_gap,
            thresholds,
            report.err_train,
        ));
    }

    // Step 2: boundary proximity across the net, 5-vote majority on disjoint
    // contiguous splits per net point.
    let n = test_ds.n();
    let splits = AMPLIFICATION.min(n);
    let per = n / splits;
    if per == 0 {
        return Err(Error::InsufficientSamples { needed: splits, got: n });
    }
    let d = test_ds.dim();
    let flat = test_ds.as_flat();
    for &varrho in &net {
        let bcfg = BoundaryTesterConfig { varrho, density_bound: cfg.density_bound, k: cfg.k };
        let mut votes = 0usize;
        let mut worst_gap = 0.0f64;
        let mut worst_check = String::new();
        for s in 0..splits {
            let lo = s * per * d;
            let hi = if s + 1 == splits { flat.len() } else { (s + 1) * per * d };
            let part = Dataset::from_flat(d, flat[lo..hi].to_vec())?;
            let v = boundary_proximity_test(&part, &f_hat, &bcfg)?;
            if v.accepted {
                votes += 1;
            } else if v.worst_gap >= worst_gap {
                worst_gap = v.worst_gap;
                worst_check = v.failed_check.unwrap_or_default();
            }
        }
        if 2 * votes <= splits {
            thresholds.insert("rejecting_varrho".into(), varrho);
            return Ok(reject(
                format!("boundary:{worst_check}@varrho={varrho}"),
                worst_gap,
                thresholds,
                report.err_train,
            ));
        }
    }

    // Certified bound at the binding net point: the smallest ϱ whose implied
    // disagreement slack δ_e(ϱ) = β ϱ^k k^{-k/2} e^{-2R²} covers the
    // trainer-reported slack (holdout error). ε′ at that point simplifies to
    // first_term + σ̂·ϱ. When no net point covers the trainer slack the bound
    // is reported at the largest point and flagged.
    let kf = cfg.k as f64;
    let ln_slack_of = |varrho: f64| {
        cfg.beta.ln() + kf * varrho.ln() - 0.5 * kf * kf.ln() - 2.0 * radius * radius
    };
    let binding = if report.err_train == 0.0 {
        Some(net[0])
    } else {
        net.iter().copied().find(|&v| ln_slack_of(v) >= report.err_train.ln())
    };
    let (varrho_star, covered) = match binding {
        Some(v) => (v, 1.0),
        None => (*net.last().unwrap(), 0.0),
    };
    let eps_prime = eps_prime_at_net_point(&cfg.variant, cfg.k, radius, varrho_star, sigma_hat);
    thresholds.insert("binding_varrho".into(), varrho_star);
    thresholds.insert("trainer_slack_covered".into(), covered);
    thresholds.insert("eps_prime".into(), eps_prime);

    Ok(TDSOutcome {
        verdict: Verdict::accept(thresholds),
        hypothesis: Some(report.hypothesis.clone()),
        training_error: report.err_train,
        certified_error_bound: eps_prime + cfg.epsilon + report.err_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::Halfspace;
    use crate::distributions::label_with;

    fn single_halfspace(d: usize) -> HalfspaceIntersection {
        HalfspaceIntersection::new(vec![Halfspace::axis(d, 0, 0.0)]).unwrap()
    }

    #[test]
    fn gaussian_slab_mass_accepted() {
        let d = 3;
        let ds = sample(&DistributionSpec::StandardGaussian { d }, 100_000, RngSpec::new(1, 0)).unwrap();
        let cfg = BoundaryTesterConfig { varrho: 0.05, density_bound: 0.4, k: 1 };
        let v = boundary_proximity_test(&ds, &single_halfspace(d), &cfg).unwrap();
        // Slab mass ≈ 2(Φ(0.05)−Φ(0)) ≈ 0.0399, threshold 3·0.4·0.05 = 0.06.
        assert!(v.accepted, "{v:?}");
        let mass = v.thresholds["slab_mass_0"];
        assert!((mass - 0.0399).abs() < 0.005, "mass {mass}");
    }

    #[test]
    fn spike_on_a_plane_rejected() {
        let d = 3;
        let h = Halfspace::axis(d, 0, 0.0);
        let spec = DistributionSpec::BoundarySpike {
            base: Box::new(DistributionSpec::StandardGaussian { d }),
            halfspace: h,
            width: 0.05,
            spike_mass: 0.5,
        };
        let ds = sample(&spec, 50_000, RngSpec::new(2, 0)).unwrap();
        let cfg = BoundaryTesterConfig { varrho: 0.05, density_bound: 0.4, k: 1 };
        let v = boundary_proximity_test(&ds, &single_halfspace(d), &cfg).unwrap();
        assert_eq!(v.failed_check.as_deref(), Some("slab:0"));
        assert!(v.worst_gap > 0.3);
    }

    #[test]
    fn vacuous_threshold_always_accepts() {
        let d = 2;
        let ds = Dataset::from_flat(d, vec![0.0; 2 * 100]).unwrap();
        // 3C·varrho ≥ 1: mass can never exceed it.
        let cfg = BoundaryTesterConfig { varrho: 1.0, density_bound: 0.4, k: 1 };
        let v = boundary_proximity_test(&ds, &single_halfspace(d), &cfg).unwrap();
        assert!(v.accepted);
    }

    #[test]
    fn raising_density_bound_never_flips_accept_to_reject() {
        let d = 2;
        let spec = DistributionSpec::BoundarySpike {
            base: Box::new(DistributionSpec::StandardGaussian { d }),
            halfspace: Halfspace::axis(d, 0, 0.0),
            width: 0.05,
            spike_mass: 0.08,
        };
        let ds = sample(&spec, 50_000, RngSpec::new(3, 0)).unwrap();
        let mut prev_accepted = false;
        for c in [0.4, 0.5, 0.8, 1.6, 3.2] {
            let cfg = BoundaryTesterConfig { varrho: 0.05, density_bound: c, k: 1 };
            let v = boundary_proximity_test(&ds, &single_halfspace(d), &cfg).unwrap();
            assert!(!prev_accepted || v.accepted, "flip at C={c}");
            prev_accepted = v.accepted;
        }
        assert!(prev_accepted);
    }

    #[test]
    fn moment_match_accepts_gaussian_rejects_laplace() {
        let d = 3;
        let cfg = ConcentrationConfig::MomentMatch { p: 1, k: 1 };
        // Chebyshev-style budget at Δ = 1/36 for degree-2 moments.
        let n = 400_000;
        let g = sample(&DistributionSpec::StandardGaussian { d }, n, RngSpec::new(4, 0)).unwrap();
        assert!(concentration_test(&g, &cfg).unwrap().accepted);

        let cfg2 = ConcentrationConfig::MomentMatch { p: 2, k: 2 };
        let l = sample(&DistributionSpec::ProductLaplace { d }, 200_000, RngSpec::new(5, 0)).unwrap();
        let v = concentration_test(&l, &cfg2).unwrap();
        assert!(!v.accepted);
        // Fourth raw moment of unit-variance Laplace is 6 vs Gaussian 3.
        let check = v.failed_check.unwrap();
        assert!(check.starts_with("moment:"), "{check}");
        assert!(v.worst_gap > 2.0, "gap {}", v.worst_gap);
    }

    #[test]
    fn spectral_accepts_isotropic_laplace() {
        let d = 3;
        let l = sample(&DistributionSpec::ProductLaplace { d }, 200_000, RngSpec::new(6, 0)).unwrap();
        let v = concentration_test(&l, &ConcentrationConfig::Spectral { mu_c: 2.0 }).unwrap();
        assert!(v.accepted);
        let eig = v.thresholds["eigenvalue"];
        assert!((eig - 1.0).abs() < 0.05, "eig {eig}");
    }

    #[test]
    fn varrho_for_plug_in() {
        // k=1, R=1, beta=0.5, r=0.01, slack at the admissible cap:
        // delta_e = 0.5·0.01·e^{-2}; varrho = (delta_e/0.5)·e^{2} = 0.01.
        let slack = 0.5 * 0.01 * (-2.0f64).exp();
        let v = varrho_for(slack, 0.5, 1, 1.0, 0.01).unwrap();
        assert!((v - 0.01).abs() < 1e-12, "{v}");
        // Slightly above the cap: inadmissible.
        assert!(varrho_for(slack * 1.01, 0.5, 1, 1.0, 0.01).is_err());
        // Shrinking slack shrinks varrho.
        let v2 = varrho_for(slack / 8.0, 0.5, 1, 1.0, 0.01).unwrap();
        assert!(v2 < v);
    }

    #[test]
    fn eps_prime_examples() {
        let spectral = ConcentrationConfig::Spectral { mu_c: 1.0 };
        let e = eps_prime_boundary(&spectral, 1, 10.0, 0.0, 0.5, 1.0);
        assert!((e - 0.04).abs() < 1e-12);

        let moment = ConcentrationConfig::MomentMatch { p: 1, k: 1 };
        let e = eps_prime_boundary(&moment, 1, 4.0, 1e-16, 0.5, 1.0);
        let expect = 0.5 + (2e-16 * 32f64.exp());
        assert!((e - expect).abs() < 1e-9, "{e} vs {expect}");

        // Net-point form agrees with the direct formula at delta_e(varrho).
        let varrho: f64 = 0.01;
        let k = 2usize;
        let radius: f64 = 3.0;
        let beta = 0.4;
        let slack = beta * varrho.powi(k as i32) * (k as f64).powf(-(k as f64) / 2.0)
            * (-2.0 * radius * radius).exp();
        let a = eps_prime_boundary(&spectral, k, radius, slack, beta, 2.4);
        let b = eps_prime_at_net_point(&spectral, k, radius, varrho, 2.4);
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    #[test]
    fn localization_zero_for_identical_concepts() {
        let f = single_halfspace(3);
        let frac = check_localization(&f, &f, 3.0, 0.05, 10_000, RngSpec::new(7, 0)).unwrap();
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn localization_zero_for_small_translation() {
        let d = 3;
        let f = single_halfspace(d);
        let shifted =
            HalfspaceIntersection::new(vec![Halfspace::axis(d, 0, 0.03)]).unwrap();
        // Translation by 0.03 ≤ varrho = 0.05: every disagreement point sits
        // inside the slab of the translated hypothesis.
        let frac = check_localization(&f, &shifted, 3.0, 0.05, 100_000, RngSpec::new(8, 0)).unwrap();
        assert_eq!(frac, 0.0);
    }

    #[test]
    fn intersections_pipeline_accepts_matching_and_rejects_spike() {
        let d = 5;
        let k = 2;
        let truth = Concept::Intersection(
            HalfspaceIntersection::new(vec![Halfspace::axis(d, 0, -0.3), Halfspace::axis(d, 1, -0.3)])
                .unwrap(),
        );
        let train_ds = sample(&DistributionSpec::StandardGaussian { d }, 3000, RngSpec::new(9, 0)).unwrap();
        let train_data = label_with(&truth, &train_ds, 0.0, RngSpec::new(9, 1)).unwrap();
        let trainer = TrainerSpec::PlantedOracle {
            truth: truth.clone(),
            basis_rotation: 0.0,
            disagreement_target: 0.0,
        };
        let cfg = IntersectionsPipelineConfig {
            epsilon: 0.1,
            beta: 0.3,
            k,
            variant: ConcentrationConfig::Spectral { mu_c: 2.0 },
            density_bound: 0.4,
            radius: None,
            r_local: None,
        };

        let benign = sample(&DistributionSpec::StandardGaussian { d }, 100_000, RngSpec::new(10, 0)).unwrap();
        let out = tds_intersections_run(&train_data, &benign, &trainer, &cfg, RngSpec::new(11, 0)).unwrap();
        assert!(out.verdict.accepted, "{:?}", out.verdict);
        assert!(out.hypothesis.is_some());
        assert!(out.certified_error_bound < 0.5, "bound {}", out.certified_error_bound);
        assert_eq!(out.verdict.thresholds["trainer_slack_covered"], 1.0);

        let spiked = sample(
            &DistributionSpec::BoundarySpike {
                base: Box::new(DistributionSpec::StandardGaussian { d }),
                halfspace: Halfspace::axis(d, 0, -0.3),
                width: 0.01,
                spike_mass: 0.3,
            },
            100_000,
            RngSpec::new(12, 0),
        )
        .unwrap();
        let out = tds_intersections_run(&train_data, &spiked, &trainer, &cfg, RngSpec::new(11, 0)).unwrap();
        assert!(!out.verdict.accepted);
        assert!(out.verdict.failed_check.as_deref().unwrap().starts_with("boundary:"));
        assert_eq!(out.certified_error_bound, 1.0);
    }

    #[test]
    fn empty_net_is_a_config_error() {
        let cfg = IntersectionsPipelineConfig {
            epsilon: 0.5,
            beta: 0.01,
            k: 3,
            variant: ConcentrationConfig::Spectral { mu_c: 2.0 },
            density_bound: 0.4,
            radius: None,
            r_local: None,
        };
        assert!(matches!(cfg.net(), Err(Error::Config(_))));
    }
}
