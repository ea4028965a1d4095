//! The cylindrical grids tester for subspace juntas with smooth boundaries,
//! and the TDS pipeline wrapping it.
//!
//! The tester rejects a test sample when (a) the empirical second-moment
//! matrix has an eigenvalue above `2μ_c(1)`, (b) too much mass projects
//! outside the `‖Vx‖∞ ≤ R` box, or (c) some grid cell on the hypothesis's
//! relevant subspace holds more than `2μ_ac(R√k)` times its Gaussian mass.
//! Acceptance certifies that the test marginal cannot hide extra disagreement
//! mass near the boundary of any concept whose relevant subspace is close to
//! the hypothesis's.
//!
//! Cells are half-open boxes `[iη, (i+1)η)` so each projected point lands in
//! at most one cell; points with `‖Vx‖∞ > R` land in none and are charged to
//! the tail statistic instead.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chow::TDSOutcome;
use crate::concepts::Concept;
use crate::data::{Dataset, LabeledDataset, Verdict};
use crate::distributions::StructuredProfile;
use crate::error::{Error, Result};
use crate::moments::{gaussian_cell_probability, max_eigenvalue};
use crate::rng::RngSpec;
use crate::training::{train, TrainerSpec};

/// Geometry of a cylindrical grid: cells of side `eta` tiling
/// `[-mη, mη)^k` for `m = ⌈R/η⌉`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub eta: f64,
    pub radius: f64,
    pub k: usize,
}

pub const DEFAULT_CELL_CAP: u128 = 10_000_000;

impl GridSpec {
    pub fn half_range(&self) -> i64 {
        (self.radius / self.eta).ceil() as i64
    }

    pub fn cell_count(&self) -> u128 {
        let side = 2 * self.half_range() as u128;
        side.saturating_pow(self.k as u32)
    }

    pub fn validate(&self, cap: u128) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta {} must be positive", self.eta)));
        }
        if self.radius < 1.0 {
            return Err(Error::InvalidParameter(format!("radius {} must be >= 1", self.radius)));
        }
        if self.k == 0 || self.k > 8 {
            return Err(Error::InvalidParameter(format!("grid dimension {} outside 1..=8", self.k)));
        }
        let count = self.cell_count();
        if count > cap {
            return Err(Error::CellCapExceeded { count, cap });
        }
        Ok(())
    }

    /// The cell containing `x`, or `None` when `‖x‖∞ > R` (or `x` sits on
    /// the measure-zero far face of the outermost ring).
    pub fn cell_of(&self, x: &[f64]) -> Option<Vec<i64>> {
        if x.iter().any(|v| v.abs() > self.radius) {
            return None;
        }
        let m = self.half_range();
        let mut idx = Vec::with_capacity(self.k);
        for &v in x {
            let i = (v / self.eta).floor() as i64;
            if i < -m || i >= m {
                return None;
            }
            idx.push(i);
        }
        Some(idx)
    }

    pub fn cell_bounds(&self, idx: &[i64]) -> Vec<(f64, f64)> {
        idx.iter().map(|&i| (i as f64 * self.eta, (i + 1) as f64 * self.eta)).collect()
    }
}

/// Full tester configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTesterConfig {
    /// Moment order for the tail check.
    pub p: u32,
    pub radius: f64,
    pub profile: StructuredProfile,
    pub eta: f64,
    pub epsilon: f64,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: u128,
}

fn default_cell_cap() -> u128 {
    DEFAULT_CELL_CAP
}

impl GridTesterConfig {
    fn validate(&self, k: usize) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidParameter("moment order p must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside (0,1)", self.epsilon)));
        }
        GridSpec { eta: self.eta, radius: self.radius, k }.validate(self.cell_cap)
    }

    fn tail_bound(&self, k: usize) -> f64 {
        2.0 * k as f64 * self.profile.mu_c(self.p) / self.radius.powi(2 * self.p as i32)
    }

    fn mu_ac_eff(&self, k: usize) -> f64 {
        self.profile.with_marginal_dim(k).mu_ac(self.radius * (k as f64).sqrt())
    }
}

/// Neighborhood the certification applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborhoodKind {
    Subspace,
    Disagreement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    pub slack_s: f64,
    pub slack_e: f64,
    pub kind: NeighborhoodKind,
}

impl NeighborhoodSpec {
    pub fn subspace(slack_s: f64, slack_e: f64) -> Self {
        NeighborhoodSpec { slack_s, slack_e, kind: NeighborhoodKind::Subspace }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| (0.0..1.0).contains(&v);
        match self.kind {
            NeighborhoodKind::Subspace => {
                if !ok(self.slack_s) || !ok(self.slack_e) {
                    return Err(Error::InvalidParameter("subspace slacks must lie in [0,1)".into()));
                }
            }
            NeighborhoodKind::Disagreement => {
                if !ok(self.slack_e) {
                    return Err(Error::InvalidParameter("disagreement slack must lie in [0,1)".into()));
                }
            }
        }
        Ok(())
    }
}

/// Default smoothness for indicators of convex sets in k dimensions:
/// `10·k·ln(k+1)`, clamped to ≥ 1.
pub fn convex_smoothness(k: usize) -> f64 {
    (10.0 * k as f64 * ((k + 1) as f64).ln()).max(1.0)
}

/// Default smoothness for degree-ℓ polynomial threshold functions in k
/// dimensions: `10·ℓ³·k`.
pub fn ptf_smoothness(degree: u32, k: usize) -> f64 {
    (10.0 * (degree as f64).powi(3) * k as f64).max(1.0)
}

/// Cell side `η = δ_s·R^p / (2σ̂√k) · sqrt(μ_c(1)/μ_c(p))`.
pub fn choose_eta(
    slack_s: f64,
    radius: f64,
    p: u32,
    sigma_hat: f64,
    k: usize,
    profile: &StructuredProfile,
) -> Result<f64> {
    if slack_s <= 0.0 || radius < 1.0 || p == 0 || sigma_hat < 1.0 || k == 0 {
        return Err(Error::InvalidParameter("choose_eta parameters out of range".into()));
    }
    let ratio = (profile.mu_c(1) / profile.mu_c(p)).sqrt();
    Ok(slack_s * radius.powi(p as i32) / (2.0 * sigma_hat * (k as f64).sqrt()) * ratio)
}

/// Certified error level of the subspace-neighborhood test:
/// `ε′ = 14kμ_c(p)/R^{2p}
///     + 12·sqrt(2k R^{2p} μ_c(1) ln μ_ac(R√k) / μ_c(p)) · μ_ac(R√k)·σ·δ_s
///     + 2 μ_ac(R√k)·δ_e`.
pub fn eps_prime_grid(
    cfg: &GridTesterConfig,
    k: usize,
    sigma: f64,
    nb: &NeighborhoodSpec,
) -> Result<f64> {
    if nb.kind != NeighborhoodKind::Subspace {
        return Err(Error::InvalidParameter("eps_prime_grid needs a subspace neighborhood".into()));
    }
    nb.validate()?;
    let kf = k as f64;
    let mu_c_p = cfg.profile.mu_c(cfg.p);
    let mu_c_1 = cfg.profile.mu_c(1);
    let mu_ac = cfg.mu_ac_eff(k);
    let r2p = cfg.radius.powi(2 * cfg.p as i32);
    let first = 14.0 * kf * mu_c_p / r2p;
    let ln_mu = mu_ac.ln();
    let middle = if ln_mu == 0.0 || nb.slack_s == 0.0 {
        0.0
    } else {
        12.0 * (2.0 * kf * r2p * mu_c_1 * ln_mu / mu_c_p).sqrt() * mu_ac * sigma * nb.slack_s
    };
    Ok(first + middle + 2.0 * mu_ac * nb.slack_e)
}

/// Sample size at which the completeness guarantee holds verbatim:
/// `10μ_c(2)/μ_c(1)²·d⁴ + 12R^{2p}/(kμ_c(p))
///  + 14k(√(2π)·e^{R²})^k / (μ_ac(R√k)·η^k) · ln(3R/η) + 3/ε²`.
///
/// Far beyond desk scale for R ≥ 3, k ≥ 2; callers may run with smaller
/// samples and should then expect correspondingly weaker accept rates.
pub fn grid_completeness_budget(cfg: &GridTesterConfig, k: usize, d: usize) -> f64 {
    let kf = k as f64;
    let spectral = 10.0 * cfg.profile.mu_c(2) / cfg.profile.mu_c(1).powi(2) * (d as f64).powi(4);
    let tail = 12.0 * cfg.radius.powi(2 * cfg.p as i32) / (kf * cfg.profile.mu_c(cfg.p));
    let base = (2.0 * std::f64::consts::PI).sqrt() * (cfg.radius * cfg.radius).exp();
    let cells = 14.0 * kf * base.powi(k as i32) / (cfg.mu_ac_eff(k) * cfg.eta.powi(k as i32))
        * (3.0 * cfg.radius / cfg.eta).ln();
    spectral + tail + cells + 3.0 / (cfg.epsilon * cfg.epsilon)
}

struct GridStats {
    tail_rate: f64,
    /// (cell index, empirical probability, Gaussian bound), worst first.
    violations: Vec<(Vec<i64>, f64, f64)>,
    occupied: usize,
}

/// Tail and per-cell occupancy statistics over flat `k`-dimensional points.
fn grid_stats(flat: &[f64], k: usize, cfg: &GridTesterConfig) -> Result<GridStats> {
    let spec = GridSpec { eta: cfg.eta, radius: cfg.radius, k };
    let n = flat.len() / k;
    const CHUNK: usize = 1 << 16;

    let partials: Vec<(u64, HashMap<Vec<i64>, u64>)> = flat
        .par_chunks(CHUNK * k)
        .map(|chunk| {
            let mut tail = 0u64;
            let mut cells: HashMap<Vec<i64>, u64> = HashMap::new();
            for x in chunk.chunks_exact(k) {
                match spec.cell_of(x) {
                    Some(idx) => *cells.entry(idx).or_insert(0) += 1,
                    None => {
                        if x.iter().any(|v| v.abs() > spec.radius) {
                            tail += 1;
                        }
                    }
                }
            }
            (tail, cells)
        })
        .collect();

    let mut tail = 0u64;
    let mut cells: HashMap<Vec<i64>, u64> = HashMap::new();
    for (t, map) in partials {
        tail += t;
        for (idx, c) in map {
            *cells.entry(idx).or_insert(0) += c;
        }
    }

    let mu_ac = cfg.mu_ac_eff(k);
    let mut violations = Vec::new();
    for (idx, count) in &cells {
        let p_hat = *count as f64 / n as f64;
        let bound = 2.0 * mu_ac * gaussian_cell_probability(&spec.cell_bounds(idx))?;
        if p_hat > bound {
            violations.push((idx.clone(), p_hat, bound));
        }
    }
    // Deterministic ordering regardless of hash-map iteration: worst excess
    // first, then lexicographic cell index.
    violations.sort_by(|a, b| {
        let ga = a.1 - a.2;
        let gb = b.1 - b.2;
        gb.partial_cmp(&ga).unwrap().then_with(|| a.0.cmp(&b.0))
    });

    Ok(GridStats { tail_rate: tail as f64 / n as f64, violations, occupied: cells.len() })
}

fn cell_name(idx: &[i64]) -> String {
    let parts: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
    format!("cell:{}", parts.join(","))
}

/// The low-dimensional grids test: reject iff the tail mass beyond
/// `‖x‖∞ > R` exceeds `2kμ_c(p)/R^{2p}` or some cell holds more than
/// `2μ_ac(R√k)` times its Gaussian mass.
pub fn grids_test(ds_k: &Dataset, cfg: &GridTesterConfig) -> Result<Verdict> {
    let k = ds_k.dim();
    cfg.validate(k)?;
    let stats = grid_stats(ds_k.as_flat(), k, cfg)?;
    build_grid_verdict(stats, cfg, k, None)
}

/// Algorithm steps on the projected data plus the full-dimensional
/// eigenvalue gate: reject iff `λ_max((1/n)Σxxᵀ) > 2μ_c(1)` or the projected
/// tail/cell checks fail.
pub fn cylindrical_grid_test(
    ds: &Dataset,
    basis: &[Vec<f64>],
    cfg: &GridTesterConfig,
) -> Result<Verdict> {
    let d = ds.dim();
    let k = basis.len();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter("basis must have 1..=d rows".into()));
    }
    for row in basis {
        if row.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: row.len() });
        }
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
    cfg.validate(k)?;

    let eig = max_eigenvalue(ds)?;
    let eig_bound = 2.0 * cfg.profile.mu_c(1);
    if eig > eig_bound {
        let mut thresholds = BTreeMap::new();
        thresholds.insert("eigenvalue".into(), eig);
        thresholds.insert("eigenvalue_bound".into(), eig_bound);
        return Ok(Verdict::reject("eigenvalue", eig - eig_bound, thresholds));
    }

    // Project onto the hypothesis subspace.
    let flat = ds.as_flat();
    let projected: Vec<f64> = flat
        .par_chunks((1 << 16) * d)
        .flat_map_iter(|chunk| {
            let mut out = Vec::with_capacity(chunk.len() / d * k);
            for x in chunk.chunks_exact(d) {
                for row in basis {
                    out.push(row.iter().zip(x).map(|(a, b)| a * b).sum());
                }
            }
            out
        })
        .collect();

    let stats = grid_stats(&projected, k, cfg)?;
    build_grid_verdict(stats, cfg, k, Some((eig, eig_bound)))
}

fn build_grid_verdict(
    stats: GridStats,
    cfg: &GridTesterConfig,
    k: usize,
    eig: Option<(f64, f64)>,
) -> Result<Verdict> {
    let tail_bound = cfg.tail_bound(k);
    let mut thresholds = BTreeMap::new();
    thresholds.insert("eta".into(), cfg.eta);
    thresholds.insert("radius".into(), cfg.radius);
    thresholds.insert("p".into(), cfg.p as f64);
    thresholds.insert("tail_bound".into(), tail_bound);
    thresholds.insert("tail_rate".into(), stats.tail_rate);
    thresholds.insert("mu_ac".into(), cfg.mu_ac_eff(k));
    thresholds.insert("cell_factor".into(), 2.0 * cfg.mu_ac_eff(k));
    thresholds.insert("occupied_cells".into(), stats.occupied as f64);
    if let Some((e, b)) = eig {
        thresholds.insert("eigenvalue".into(), e);
        thresholds.insert("eigenvalue_bound".into(), b);
    }

    if stats.tail_rate > tail_bound {
        return Ok(Verdict::reject("tail", stats.tail_rate - tail_bound, thresholds));
    }
    if let Some((idx, p_hat, bound)) = stats.violations.first() {
        thresholds.insert("violated_cell_mass".into(), *p_hat);
        thresholds.insert("violated_cell_bound".into(), *bound);
        return Ok(Verdict::reject(cell_name(idx), p_hat - bound, thresholds));
    }
    Ok(Verdict::accept(thresholds))
}

/// Pipeline configuration for TDS learning of subspace juntas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JuntaPipelineConfig {
    pub p: u32,
    pub radius: f64,
    pub profile: StructuredProfile,
    pub epsilon: f64,
    /// Smoothness of the concept class (σ); convex defaults via
    /// [`convex_smoothness`].
    pub sigma: f64,
    /// Smoothness of the hypothesis (σ̂). When absent, the convex default
    /// for the hypothesis's own k is used.
    pub sigma_hat: Option<f64>,
    /// Explicit cell side. When absent, [`choose_eta`] sets it from the
    /// neighborhood's subspace slack; the override is recorded in the
    /// verdict thresholds.
    pub eta_override: Option<f64>,
    #[serde(default = "default_cell_cap")]
    pub cell_cap: u128,
}

/// Train, gate on the raw eigenvalue (threshold 2), then run the cylindrical
/// grids tester on the hypothesis's recovered subspace.
pub fn tds_subspace_junta_run(
    train_data: &LabeledDataset,
    test_ds: &Dataset,
    trainer: &TrainerSpec,
    cfg: &JuntaPipelineConfig,
    nb: &NeighborhoodSpec,
    rng: RngSpec,
) -> Result<TDSOutcome> {
    nb.validate()?;
    if train_data.dim() != test_ds.dim() {
        return Err(Error::DimensionMismatch { expected: train_data.dim(), got: test_ds.dim() });
    }
    let report = train(trainer, train_data, rng.child(1))?;
    let Concept::Junta(junta) = &report.hypothesis else {
        return Err(Error::Training(
            "junta pipeline needs a trainer that outputs a subspace junta with an explicit basis".into(),
        ));
    };
    let k = junta.k();
    let sigma_hat = cfg.sigma_hat.unwrap_or_else(|| convex_smoothness(k));

    // Extra gate from the pipeline (not part of the grids tester): the raw
    // second-moment spectrum against the fixed threshold 2.
    let eig = max_eigenvalue(test_ds)?;
    if eig > 2.0 {
        let mut thresholds = BTreeMap::new();
        thresholds.insert("eigenvalue".into(), eig);
        thresholds.insert("eigenvalue_bound".into(), 2.0);
        return Ok(TDSOutcome {
            verdict: Verdict::reject("eigenvalue_gate", eig - 2.0, thresholds),
            hypothesis: None,
            training_error: report.err_train,
            certified_error_bound: 1.0,
        });
    }

    let profile = cfg.profile.with_marginal_dim(k);
    let eta = match cfg.eta_override {
        Some(e) => e,
        None => choose_eta(nb.slack_s, cfg.radius, cfg.p, sigma_hat, k, &profile)?,
    };
    let grid_cfg = GridTesterConfig {
        p: cfg.p,
        radius: cfg.radius,
        profile,
        eta,
        epsilon: cfg.epsilon,
        cell_cap: cfg.cell_cap,
    };
    let mut verdict = cylindrical_grid_test(test_ds, junta.basis(), &grid_cfg)?;
    verdict
        .thresholds
        .insert("eta_overridden".into(), if cfg.eta_override.is_some() { 1.0 } else { 0.0 });

    let eps_prime = eps_prime_grid(&grid_cfg, k, cfg.sigma, nb)?;
    verdict.thresholds.insert("eps_prime".into(), eps_prime);

    let accepted = verdict.accepted;
    Ok(TDSOutcome {
        verdict,
        hypothesis: accepted.then_some(report.hypothesis.clone()),
        training_error: report.err_train,
        certified_error_bound: if accepted {
            eps_prime + cfg.epsilon + report.err_train
        } else {
            1.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{Halfspace, SubspaceJunta};
    use crate::distributions::{label_with, sample, DistributionSpec};

    fn gaussian_profile(k: usize) -> StructuredProfile {
        StructuredProfile::gaussian(k)
    }

    fn cfg_k2() -> GridTesterConfig {
        GridTesterConfig {
            p: 2,
            radius: 3.0,
            profile: gaussian_profile(2),
            eta: 0.25,
            epsilon: 0.2,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }

    #[test]
    fn choose_eta_plug_ins() {
        let g1 = gaussian_profile(1);
        let eta = choose_eta(0.1, 1.0, 1, 1.0, 1, &g1).unwrap();
        assert!((eta - 0.05).abs() < 1e-15);
        // Doubling sigma_hat halves eta.
        let eta2 = choose_eta(0.1, 1.0, 1, 2.0, 1, &g1).unwrap();
        assert!((eta2 - 0.025).abs() < 1e-15);
        // k=2, p=2 Gaussian: delta_s R^2 / (2 sigma_hat sqrt(2)) / sqrt(3).
        let g2 = gaussian_profile(2);
        let eta3 = choose_eta(0.3, 2.0, 2, 1.5, 2, &g2).unwrap();
        let want = 0.3 * 4.0 / (2.0 * 1.5 * 2.0f64.sqrt()) * (1.0f64 / 3.0).sqrt();
        assert!((eta3 - want).abs() < 1e-15);
    }

    #[test]
    fn eps_prime_reductions() {
        let cfg = GridTesterConfig {
            p: 1,
            radius: 10.0,
            profile: gaussian_profile(1),
            eta: 0.1,
            epsilon: 0.2,
            cell_cap: DEFAULT_CELL_CAP,
        };
        // Slack-free: 14 k mu_c(p) / R^{2p}.
        let e0 = eps_prime_grid(&cfg, 1, 1.0, &NeighborhoodSpec::subspace(0.0, 0.0)).unwrap();
        assert!((e0 - 0.14).abs() < 1e-12);
        // Gaussian profile: middle term vanishes, delta_e term survives.
        let e1 = eps_prime_grid(&cfg, 1, 1.0, &NeighborhoodSpec::subspace(0.5, 0.01)).unwrap();
        assert!((e1 - 0.16).abs() < 1e-12, "{e1}");
    }

    #[test]
    fn grid_cells_are_half_open_and_capped() {
        let spec = GridSpec { eta: 0.5, radius: 1.0, k: 2 };
        assert_eq!(spec.half_range(), 2);
        assert_eq!(spec.cell_count(), 16);
        assert_eq!(spec.cell_of(&[0.0, 0.0]), Some(vec![0, 0]));
        assert_eq!(spec.cell_of(&[0.49, -0.01]), Some(vec![0, -1]));
        assert_eq!(spec.cell_of(&[0.5, 0.0]), Some(vec![1, 0]));
        assert_eq!(spec.cell_of(&[1.2, 0.0]), None);
        let tight = GridSpec { eta: 0.01, radius: 3.0, k: 4 };
        assert!(tight.validate(DEFAULT_CELL_CAP).is_err());
    }

    #[test]
    fn gaussian_sample_is_accepted() {
        let cfg = cfg_k2();
        let ds = sample(&DistributionSpec::StandardGaussian { d: 2 }, 2_000_000, RngSpec::new(1, 0))
            .unwrap();
        let v = grids_test(&ds, &cfg).unwrap();
        assert!(v.accepted, "{v:?}");
    }

    #[test]
    fn point_mass_is_rejected_by_a_cell() {
        let cfg = cfg_k2();
        let ds = Dataset::from_flat(2, vec![0.0; 2 * 1000]).unwrap();
        let v = grids_test(&ds, &cfg).unwrap();
        assert!(!v.accepted);
        assert!(v.failed_check.as_deref().unwrap_or("").starts_with("cell:"), "{v:?}");
    }

    #[test]
    fn far_mass_is_rejected_by_the_tail_check() {
        let cfg = cfg_k2();
        let flat: Vec<f64> = (0..1000).flat_map(|_| [6.0, 6.0]).collect();
        let ds = Dataset::from_flat(2, flat).unwrap();
        let v = grids_test(&ds, &cfg).unwrap();
        assert_eq!(v.failed_check.as_deref(), Some("tail"));
    }

    #[test]
    fn scale_blowup_trips_the_eigenvalue_check() {
        let cfg = cfg_k2();
        let spec = DistributionSpec::Scale {
            base: Box::new(DistributionSpec::StandardGaussian { d: 6 }),
            factor: 3.0,
        };
        let ds = sample(&spec, 40_000, RngSpec::new(2, 0)).unwrap();
        let basis = vec![
            vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        ];
        let v = cylindrical_grid_test(&ds, &basis, &cfg).unwrap();
        assert_eq!(v.failed_check.as_deref(), Some("eigenvalue"));
        assert!(v.worst_gap > 6.0, "eig gap {}", v.worst_gap);
    }

    #[test]
    fn projected_gaussian_accepts_under_rotated_basis() {
        let cfg = cfg_k2();
        let ds = sample(&DistributionSpec::StandardGaussian { d: 5 }, 2_000_000, RngSpec::new(3, 0))
            .unwrap();
        let s = 0.5f64.sqrt();
        let basis = vec![vec![s, s, 0.0, 0.0, 0.0], vec![0.0, 0.0, s, -s, 0.0]];
        let v = cylindrical_grid_test(&ds, &basis, &cfg).unwrap();
        assert!(v.accepted, "{v:?}");
    }

    #[test]
    fn non_orthonormal_basis_is_an_error() {
        let cfg = cfg_k2();
        let ds = sample(&DistributionSpec::StandardGaussian { d: 3 }, 1000, RngSpec::new(4, 0)).unwrap();
        let basis = vec![vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]];
        assert!(cylindrical_grid_test(&ds, &basis, &cfg).is_err());
    }

    #[test]
    fn monotone_in_anticoncentration_threshold() {
        // A mild spike: rejected under the Gaussian profile, accepted under
        // the (much looser) log-concave profile.
        let spike = DistributionSpec::BoundarySpike {
            base: Box::new(DistributionSpec::StandardGaussian { d: 2 }),
            halfspace: Halfspace::axis(2, 0, 0.5),
            width: 0.05,
            spike_mass: 0.25,
        };
        let ds = sample(&spike, 500_000, RngSpec::new(5, 0)).unwrap();
        let tight = cfg_k2();
        let v_tight = grids_test(&ds, &tight).unwrap();
        assert!(!v_tight.accepted);
        let loose = GridTesterConfig { profile: StructuredProfile::log_concave(2), ..cfg_k2() };
        let v_loose = grids_test(&ds, &loose).unwrap();
        assert!(v_loose.accepted, "{v_loose:?}");
    }

    #[test]
    fn junta_pipeline_end_to_end() {
        let d = 6;
        let inner = Concept::Intersection(
            crate::concepts::HalfspaceIntersection::new(vec![
                Halfspace::axis(2, 0, -0.4),
                Halfspace::axis(2, 1, -0.4),
            ])
            .unwrap(),
        );
        let mut b0 = vec![0.0; d];
        b0[0] = 1.0;
        let mut b1 = vec![0.0; d];
        b1[1] = 1.0;
        let truth = Concept::Junta(SubspaceJunta::new(vec![b0, b1], inner).unwrap());

        let train_ds = sample(&DistributionSpec::StandardGaussian { d }, 4000, RngSpec::new(6, 0)).unwrap();
        let train_data = label_with(&truth, &train_ds, 0.0, RngSpec::new(6, 1)).unwrap();
        let trainer = TrainerSpec::PlantedOracle {
            truth: truth.clone(),
            basis_rotation: 0.0,
            disagreement_target: 0.0,
        };
        let cfg = JuntaPipelineConfig {
            p: 2,
            radius: 3.0,
            profile: StructuredProfile::gaussian(d),
            epsilon: 0.2,
            sigma: convex_smoothness(2),
            sigma_hat: None,
            eta_override: Some(0.25),
            cell_cap: DEFAULT_CELL_CAP,
        };
        let nb = NeighborhoodSpec::subspace(0.05, 0.01);

        let benign = sample(&DistributionSpec::StandardGaussian { d }, 2_000_000, RngSpec::new(7, 0)).unwrap();
        let out = tds_subspace_junta_run(&train_data, &benign, &trainer, &cfg, &nb, RngSpec::new(8, 0))
            .unwrap();
        assert!(out.verdict.accepted, "{:?}", out.verdict);
        assert!(out.hypothesis.is_some());
        let eps_prime = out.verdict.thresholds["eps_prime"];
        assert!((out.certified_error_bound - (eps_prime + 0.2 + out.training_error)).abs() < 1e-12);

        let scaled = sample(
            &DistributionSpec::Scale {
                base: Box::new(DistributionSpec::StandardGaussian { d }),
                factor: 3.0,
            },
            100_000,
            RngSpec::new(9, 0),
        )
        .unwrap();
        let out = tds_subspace_junta_run(&train_data, &scaled, &trainer, &cfg, &nb, RngSpec::new(8, 0))
            .unwrap();
        assert_eq!(out.verdict.failed_check.as_deref(), Some("eigenvalue_gate"));
        assert!(out.hypothesis.is_none());
    }

    #[test]
    fn non_junta_trainer_output_is_an_error() {
        let d = 3;
        let truth = Concept::Halfspace(Halfspace::axis(d, 0, 0.0));
        let train_ds = sample(&DistributionSpec::StandardGaussian { d }, 1000, RngSpec::new(10, 0)).unwrap();
        let train_data = label_with(&truth, &train_ds, 0.0, RngSpec::new(10, 1)).unwrap();
        let test = sample(&DistributionSpec::StandardGaussian { d }, 1000, RngSpec::new(10, 2)).unwrap();
        let trainer = TrainerSpec::PlantedOracle {
            truth,
            basis_rotation: 0.0,
            disagreement_target: 0.0,
        };
        let cfg = JuntaPipelineConfig {
            p: 1,
            radius: 3.0,
            profile: StructuredProfile::gaussian(d),
            epsilon: 0.2,
            sigma: 1.0,
            sigma_hat: None,
            eta_override: Some(0.5),
            cell_cap: DEFAULT_CELL_CAP,
        };
        let nb = NeighborhoodSpec::subspace(0.1, 0.01);
        assert!(tds_subspace_junta_run(&train_data, &test, &trainer, &cfg, &nb, RngSpec::new(11, 0))
            .is_err());
    }
}
