//! The Chow matching tester and the decoupled TDS pipeline built on it.
//!
//! The tester receives unlabeled test points and a reference hypothesis f̂
//! and accepts only when every low-degree moment `Ê[x^α]` and Chow parameter
//! `Ê[f̂(x)·x^α]` of the test sample sits strictly within Δ = ε/(B·d^{2ℓ}) of
//! its value under the reference marginal. Acceptance certifies that no
//! concept with a degree-ℓ, coefficient-bound-B sandwiching pair can
//! disagree with f̂ much more under the test marginal than under the
//! reference, which is what the pipeline's certified error bound uses.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::Concept;
use crate::data::{Dataset, LabeledDataset, Verdict};
use crate::distributions::{draw_into, DistributionSpec};
use crate::error::{Error, Result};
use crate::moments::{
    count_multi_indices, cube_moment, enumerate_multi_indices, gaussian_moment, pairwise_merge,
    ChowVector, MomentVector, MonomialAccumulator, MultiIndex, INDEX_CAP,
};
use crate::rng::RngSpec;
use crate::training::{train, TrainerSpec};

/// Reference training marginal the tester compares against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChowReference {
    Gaussian,
    Cube,
}

impl ChowReference {
    pub fn moment(&self, alpha: &MultiIndex) -> f64 {
        match self {
            ChowReference::Gaussian => gaussian_moment(alpha),
            ChowReference::Cube => cube_moment(alpha),
        }
    }
}

/// Tester parameters. `m_conc` is the concentration part of the sample
/// budget; the tester requires `m_conc + ⌈3/ε²⌉` points in total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChowTesterConfig {
    pub epsilon: f64,
    pub degree: u32,
    pub coeff_bound: f64,
    pub reference: ChowReference,
    pub m_conc: usize,
    /// Majority vote over this many disjoint splits of the test set
    /// (success-probability amplification). Default 1: single run.
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
}

fn default_repetitions() -> u32 {
    1
}

impl ChowTesterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon {} outside (0,1)", self.epsilon)));
        }
        if self.coeff_bound < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "coeff bound {} must be >= 1",
                self.coeff_bound
            )));
        }
        if self.m_conc == 0 || self.repetitions == 0 {
            return Err(Error::InvalidParameter("m_conc and repetitions must be >= 1".into()));
        }
        Ok(())
    }

    /// Δ = ε / (B · d^{2ℓ}).
    pub fn delta(&self, d: usize) -> Result<f64> {
        let denom = self.coeff_bound * (d as f64).powi(2 * self.degree as i32);
        let delta = self.epsilon / denom;
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = eps/(B d^(2l)) = {delta} not representable for d={d}, l={}",
                self.degree
            )));
        }
        Ok(delta)
    }

    /// Total samples the tester insists on: `m_conc + ⌈3/ε²⌉`.
    pub fn required_samples(&self) -> usize {
        self.m_conc + (3.0 / (self.epsilon * self.epsilon)).ceil() as usize
    }
}

/// Hard cap for the concentration budget.
pub const BUDGET_CAP: u128 = 1_000_000_000;

/// Chebyshev-plus-union-bound concentration budget: the smallest m with
/// `N · M₂max / (m · Δ²) ≤ δ₀`, where N counts the tested indices and M₂max
/// bounds `E_ref[x^{2α}]` (1 on the cube, `(2ℓ−1)!!` under the Gaussian).
/// Refuses budgets above [`BUDGET_CAP`].
pub fn compute_sample_budget_chow(
    d: usize,
    degree: u32,
    coeff_bound: f64,
    epsilon: f64,
    fail_prob: f64,
    reference: ChowReference,
) -> Result<u64> {
    if d == 0
        || coeff_bound < 1.0
        || !(epsilon > 0.0 && epsilon < 1.0)
        || !(fail_prob > 0.0 && fail_prob < 1.0)
    {
        return Err(Error::InvalidParameter("budget parameters out of range".into()));
    }
    let delta = epsilon / (coeff_bound * (d as f64).powi(2 * degree as i32));
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidParameter("delta underflows for these parameters".into()));
    }
    let n_indices = count_multi_indices(d, degree) as f64;
    let m2max = match reference {
        ChowReference::Cube => 1.0,
        ChowReference::Gaussian => {
            // max over ‖α‖₁ ≤ ℓ of Π(2α_i−1)!! is attained by one coordinate
            // at full degree: (2ℓ−1)!!.
            let mut m = 1.0;
            let mut j = 2 * degree as i64 - 1;
            while j > 1 {
                m *= j as f64;
                j -= 2;
            }
            m
        }
    };
    let m = (n_indices * m2max / (fail_prob * delta * delta)).ceil();
    if !m.is_finite() || m as u128 > BUDGET_CAP {
        return Err(Error::BudgetExceeded {
            computed: if m.is_finite() { m as u128 } else { u128::MAX },
            cap: BUDGET_CAP,
        });
    }
    Ok(m as u64)
}

/// Default Gaussian coefficient bound for degree-ℓ classes: `2·(10d)^ℓ`.
pub fn gaussian_coefficient_bound(d: usize, degree: u32) -> f64 {
    2.0 * (10.0 * d as f64).powi(degree as i32)
}

/// How a reference Chow vector was computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RefChowMethod {
    /// Exact average over all 2^d cube points.
    CubeEnumeration,
    /// Streaming Monte Carlo with an oversized sample.
    MonteCarlo { m_ref: u64 },
}

/// Reference-marginal Chow parameters of a hypothesis, with provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceChow {
    pub chow: ChowVector,
    pub method: RefChowMethod,
}

const REF_OVERSAMPLE: u64 = 64;
const REF_STREAM_CHUNK: usize = 1 << 20;

/// Compute `E_D[f̂(x)·x^α]` under the reference marginal.
///
/// Cube references with `2^d ≤ 2^20` are enumerated exactly (the sums are
/// small integers, so the result is exact in f64). Otherwise the expectation
/// is estimated from a streamed Monte Carlo sample of `64 · m_conc` points,
/// which keeps the reference noise roughly an order of magnitude below the
/// tester's own estimation noise at the configured budget.
pub fn reference_chow(
    f_hat: &Concept,
    d: usize,
    cfg: &ChowTesterConfig,
    rng: RngSpec,
) -> Result<ReferenceChow> {
    cfg.validate()?;
    let fd = f_hat.dim();
    if fd != 0 && fd != d {
        return Err(Error::DimensionMismatch { expected: fd, got: d });
    }
    let indices = enumerate_multi_indices(d, cfg.degree, INDEX_CAP)?;

    if cfg.reference == ChowReference::Cube && d <= 20 {
        let acc = MonomialAccumulator::new(d, &indices);
        let npoints = 1usize << d;
        let mut sums = vec![0.0; indices.len()];
        let mut point = vec![0.0; d];
        for bits in 0..npoints {
            for (i, v) in point.iter_mut().enumerate() {
                *v = if bits >> i & 1 == 1 { 1.0 } else { -1.0 };
            }
            acc.accumulate(&point, |x| f_hat.eval_unchecked(x) as f64, &mut sums);
        }
        let values: Vec<f64> = sums.into_iter().map(|s| s / npoints as f64).collect();
        return Ok(ReferenceChow {
            chow: MomentVector { degree: cfg.degree, indices, values },
            method: RefChowMethod::CubeEnumeration,
        });
    }

    let spec = match cfg.reference {
        ChowReference::Gaussian => DistributionSpec::StandardGaussian { d },
        ChowReference::Cube => DistributionSpec::UniformCube { d },
    };
    let m_ref = REF_OVERSAMPLE * cfg.m_conc as u64;
    let acc = MonomialAccumulator::new(d, &indices);
    let n_chunks = m_ref.div_ceil(REF_STREAM_CHUNK as u64);
    let partials: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|ci| {
            let count = REF_STREAM_CHUNK.min((m_ref - ci * REF_STREAM_CHUNK as u64) as usize);
            let mut r = rng.child(ci).rng();
            let mut buf = vec![0.0; count * d];
            for p in buf.chunks_exact_mut(d) {
                draw_into(&spec, &mut r, p).expect("validated spec cannot fail to sample");
            }
            let mut sums = vec![0.0; acc.width()];
            acc.accumulate(&buf, |x| f_hat.eval_unchecked(x) as f64, &mut sums);
            sums
        })
        .collect();
    let mut values = pairwise_merge(partials, indices.len());
    values.iter_mut().for_each(|v| *v /= m_ref as f64);
    Ok(ReferenceChow {
        chow: MomentVector { degree: cfg.degree, indices, values },
        method: RefChowMethod::MonteCarlo { m_ref },
    })
}

/// Run the Chow matching test: accept iff for every α with ‖α‖₁ ≤ ℓ both
/// `|Ê_X[x^α] − E_D[x^α]| < Δ` and `|Ê_X[f̂(x)·x^α] − E_D[f̂(x)·x^α]| < Δ`.
///
/// `rng` only drives the Monte Carlo estimation of the reference Chow
/// parameters (closed forms cover the moment side); the verdict is
/// deterministic given `(test_ds, f_hat, cfg, rng)`.
pub fn chow_matching_test(
    test_ds: &Dataset,
    f_hat: &Concept,
    cfg: &ChowTesterConfig,
    rng: RngSpec,
) -> Result<Verdict> {
    let reference = reference_chow(f_hat, test_ds.dim(), cfg, rng.child(0xCB0))?;
    chow_matching_test_with_reference(test_ds, f_hat, cfg, &reference)
}

/// Same test with a precomputed reference (reusable across many datasets for
/// a fixed hypothesis and config).
pub fn chow_matching_test_with_reference(
    test_ds: &Dataset,
    f_hat: &Concept,
    cfg: &ChowTesterConfig,
    reference: &ReferenceChow,
) -> Result<Verdict> {
    cfg.validate()?;
    let d = test_ds.dim();
    let fd = f_hat.dim();
    if fd != 0 && fd != d {
        return Err(Error::DimensionMismatch { expected: fd, got: d });
    }
    let needed = cfg.required_samples();
    if test_ds.n() < needed {
        return Err(Error::InsufficientSamples { needed, got: test_ds.n() });
    }
    let delta = cfg.delta(d)?;
    let indices = enumerate_multi_indices(d, cfg.degree, INDEX_CAP)?;
    if reference.chow.indices != indices {
        return Err(Error::Config("reference chow was computed for different indices".into()));
    }

    let r = cfg.repetitions as usize;
    let flat = test_ds.as_flat();
    let per = test_ds.n() / r;
    if per == 0 {
        return Err(Error::InsufficientSamples { needed: r, got: test_ds.n() });
    }

    let mut votes_accept = 0usize;
    let mut worst: Option<(String, f64)> = None;
    let mut worst_moment_stat = 0.0f64;
    let mut worst_chow_stat = 0.0f64;

    for rep in 0..r {
        let lo = rep * per * d;
        let hi = if rep + 1 == r { flat.len() } else { (rep + 1) * per * d };
        let slice = &flat[lo..hi];
        let n = (slice.len() / d) as f64;

        let acc = MonomialAccumulator::new(d, &indices);
        const CHUNK: usize = 1 << 16;
        let partials: Vec<(Vec<f64>, Vec<f64>)> = slice
            .par_chunks(CHUNK * d)
            .map(|chunk| {
                let mut plain = vec![0.0; indices.len()];
                let mut weighted = vec![0.0; indices.len()];
                acc.accumulate_dual(
                    chunk,
                    |x| f_hat.eval_unchecked(x) as f64,
                    &mut plain,
                    &mut weighted,
                );
                (plain, weighted)
            })
            .collect();
        let (plains, weighteds): (Vec<Vec<f64>>, Vec<Vec<f64>>) = partials.into_iter().unzip();
        let moments: Vec<f64> =
            pairwise_merge(plains, indices.len()).into_iter().map(|s| s / n).collect();
        let chows: Vec<f64> =
            pairwise_merge(weighteds, indices.len()).into_iter().map(|s| s / n).collect();

        let mut rep_ok = true;
        for (j, alpha) in indices.iter().enumerate() {
            let m_gap = (moments[j] - cfg.reference.moment(alpha)).abs();
            let c_gap = (chows[j] - reference.chow.values[j]).abs();
            worst_moment_stat = worst_moment_stat.max(m_gap);
            worst_chow_stat = worst_chow_stat.max(c_gap);
            if m_gap >= delta {
                rep_ok = false;
                if worst.as_ref().map(|(_, g)| m_gap - delta > *g).unwrap_or(true) {
                    worst = Some((format!("moment:{}", alpha.key()), m_gap - delta));
                }
            }
            if c_gap >= delta {
                rep_ok = false;
                if worst.as_ref().map(|(_, g)| c_gap - delta > *g).unwrap_or(true) {
                    worst = Some((format!("chow:{}", alpha.key()), c_gap - delta));
                }
            }
        }
        if rep_ok {
            votes_accept += 1;
        }
    }

    let mut thresholds = BTreeMap::new();
    thresholds.insert("delta".into(), delta);
    thresholds.insert("epsilon".into(), cfg.epsilon);
    thresholds.insert("degree".into(), cfg.degree as f64);
    thresholds.insert("coeff_bound".into(), cfg.coeff_bound);
    thresholds.insert("m_conc".into(), cfg.m_conc as f64);
    thresholds.insert("repetitions".into(), r as f64);
    thresholds.insert("worst_moment_stat".into(), worst_moment_stat);
    thresholds.insert("worst_chow_stat".into(), worst_chow_stat);

    if 2 * votes_accept > r {
        Ok(Verdict::accept(thresholds))
    } else {
        let (check, gap) = worst.unwrap_or_else(|| ("majority".into(), 0.0));
        Ok(Verdict::reject(check, gap, thresholds))
    }
}

/// Outcome of a decoupled train-then-test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TDSOutcome {
    pub verdict: Verdict,
    /// Present exactly when the verdict accepted.
    pub hypothesis: Option<Concept>,
    pub training_error: f64,
    /// `err_train + 3ε` on acceptance (the tester's discrepancy bound plus
    /// the trainer's holdout error); trivial bound 1 on rejection.
    pub certified_error_bound: f64,
}

/// Train on labeled data, then run the Chow matching tester on the unlabeled
/// test marginal; accept and release the hypothesis only if the tester does.
pub fn tds_chow_run(
    train_data: &LabeledDataset,
    test_ds: &Dataset,
    trainer: &TrainerSpec,
    cfg: &ChowTesterConfig,
    rng: RngSpec,
) -> Result<TDSOutcome> {
    if train_data.dim() != test_ds.dim() {
        return Err(Error::DimensionMismatch { expected: train_data.dim(), got: test_ds.dim() });
    }
    let report = train(trainer, train_data, rng.child(1))?;
    let verdict = chow_matching_test(test_ds, &report.hypothesis, cfg, rng.child(2))?;
    let accepted = verdict.accepted;
    Ok(TDSOutcome {
        verdict,
        hypothesis: accepted.then_some(report.hypothesis),
        training_error: report.err_train,
        certified_error_bound: if accepted { report.err_train + 3.0 * cfg.epsilon } else { 1.0 },
    })
}
