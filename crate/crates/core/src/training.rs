//! Pluggable trainers behind one interface: low-degree polynomial regression
//! with threshold selection, a heuristic proper ERM learner for halfspace
//! intersections, and a planted oracle that returns a perturbed copy of the
//! ground truth for testing-phase experiments.
//!
//! Every trainer fits on 80% of the data and reports its 0-1 error on the
//! held-out 20%, so pipelines get an estimate that is not biased by the fit.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::concepts::{Concept, Halfspace, HalfspaceIntersection, PolynomialThreshold, SubspaceJunta};
use crate::data::{split_labeled, LabeledDataset};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, operator_norm, SymMatrix};
use crate::moments::{enumerate_multi_indices, INDEX_CAP};
use crate::rng::RngSpec;
use crate::simplex::{solve, DenseLp};

const HOLDOUT_FRACTION: f64 = 0.8; // fit on the first part, hold out the rest
const L1_CONSTRAINT_CAP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    L1,
    #[default]
    L2,
}

/// Which trainer to run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrainerSpec {
    /// Fit a degree-ℓ polynomial to the ±1 labels (L1 via LP, L2 via ridge
    /// normal equations) and pick the 0-1-optimal threshold.
    PolyRegression {
        degree: u32,
        #[serde(default)]
        loss: Loss,
    },
    /// Coordinate-descent ERM over intersections of k halfspaces. Heuristic:
    /// reports its holdout error and claims no optimality.
    ProperIntersectionErm { k: usize, restarts: u32, iterations: u32 },
    /// Return the planted truth, optionally with its basis rotated so
    /// `‖W−V‖₂ = basis_rotation` and/or one boundary translated until the
    /// measured Gaussian disagreement lands in [0.8, 1.2]·disagreement_target.
    PlantedOracle {
        truth: Concept,
        #[serde(default)]
        basis_rotation: f64,
        #[serde(default)]
        disagreement_target: f64,
    },
}

/// Trainer output: a hypothesis and its holdout 0-1 error.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingReport {
    pub hypothesis: Concept,
    pub err_train: f64,
    pub wall_time: f64,
}

/// Run the trainer. Deterministic given `(spec, data, rng)` up to wall time.
pub fn train(spec: &TrainerSpec, data: &LabeledDataset, rng: RngSpec) -> Result<TrainingReport> {
    if data.n() < 10 {
        return Err(Error::Training(format!("need at least 10 samples, got {}", data.n())));
    }
    let start = Instant::now();
    let (fit, holdout) = split_labeled(data, HOLDOUT_FRACTION, rng.child(0x48))?;
    let hypothesis = match spec {
        TrainerSpec::PolyRegression { degree, loss } => poly_regression(&fit, *degree, *loss)?,
        TrainerSpec::ProperIntersectionErm { k, restarts, iterations } => {
            if *k == 0 || *restarts == 0 {
                return Err(Error::Training("k and restarts must be >= 1".into()));
            }
            proper_intersection_erm(&fit, *k, *restarts, *iterations, rng.child(0x45))?
        }
        TrainerSpec::PlantedOracle { truth, basis_rotation, disagreement_target } => {
            planted_oracle(truth, *basis_rotation, *disagreement_target, data.dim(), rng.child(0x50))?
        }
    };
    let err_train = zero_one_error(&hypothesis, &holdout)?;
    Ok(TrainingReport { hypothesis, err_train, wall_time: start.elapsed().as_secs_f64() })
}

/// Empirical 0-1 error of a concept on labeled data.
pub fn zero_one_error(c: &Concept, data: &LabeledDataset) -> Result<f64> {
    let cd = c.dim();
    if cd != 0 && cd != data.dim() {
        return Err(Error::DimensionMismatch { expected: cd, got: data.dim() });
    }
    let wrong = data
        .data
        .iter_points()
        .zip(&data.labels)
        .filter(|(x, y)| c.eval_unchecked(x) != **y)
        .count();
    Ok(wrong as f64 / data.n() as f64)
}

/// Pick the threshold minimizing the 0-1 error of `sign(score − t)`.
///
/// Candidates are a low sentinel (below every score, classifying everything
/// +1), the midpoints of consecutive distinct sorted scores, and a high
/// sentinel. Ties resolve to the smallest candidate.
pub fn fit_threshold(scores: &[f64], labels: &[i8]) -> (f64, f64) {
    assert_eq!(scores.len(), labels.len());
    assert!(!scores.is_empty());
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(a.cmp(&b)));

    let lo = scores[order[0]] - 1.0;
    let hi = scores[order[n - 1]] + 1.0;

    // At the low sentinel everything is classified +1.
    let mut wrong = labels.iter().filter(|&&y| y == -1).count() as i64;
    let mut best = (lo, wrong);
    let mut i = 0;
    while i < n {
        // Move the threshold just past this group of equal scores: they flip
        // from +1 to -1.
        let s = scores[order[i]];
        let mut j = i;
        while j < n && scores[order[j]] == s {
            wrong += match labels[order[j]] {
                1 => 1,
                _ => -1,
            };
            j += 1;
        }
        let t = if j < n { (s + scores[order[j]]) / 2.0 } else { hi };
        if wrong < best.1 {
            best = (t, wrong);
        }
        i = j;
    }
    (best.0, best.1 as f64 / n as f64)
}

fn poly_regression(fit: &LabeledDataset, degree: u32, loss: Loss) -> Result<Concept> {
    if degree == 0 {
        return Err(Error::Training("regression degree must be >= 1".into()));
    }
    let d = fit.dim();
    let indices = enumerate_multi_indices(d, degree, INDEX_CAP)?;
    let n = fit.n();
    let nf = indices.len();

    // Feature matrix, row per sample.
    let mut phi = vec![0.0; n * nf];
    for (i, x) in fit.data.iter_points().enumerate() {
        for (j, a) in indices.iter().enumerate() {
            let mut t = 1.0;
            for (coord, &e) in a.0.iter().enumerate() {
                for _ in 0..e {
                    t *= x[coord];
                }
            }
            phi[i * nf + j] = t;
        }
    }

    let coeffs = match loss {
        Loss::L2 => {
            // Normal equations with ridge 1e-8.
            let mut gram = SymMatrix::zeros(nf);
            let mut rhs = vec![0.0; nf];
            for i in 0..n {
                let row = &phi[i * nf..(i + 1) * nf];
                let y = fit.labels[i] as f64;
                for a in 0..nf {
                    rhs[a] += row[a] * y;
                    for b in a..nf {
                        let v = gram.get(a, b) + row[a] * row[b];
                        gram.set(a, b, v);
                        gram.set(b, a, v);
                    }
                }
            }
            for a in 0..nf {
                let v = gram.get(a, a) + 1e-8;
                gram.set(a, a, v);
            }
            cholesky_solve(&gram, &rhs)?
        }
        Loss::L1 => l1_fit(&phi, &fit.labels, n, nf)?,
    };

    let scores: Vec<f64> = (0..n)
        .map(|i| phi[i * nf..(i + 1) * nf].iter().zip(&coeffs).map(|(p, c)| p * c).sum())
        .collect();
    let (t, _) = fit_threshold(&scores, &fit.labels);

    let coeff_pairs = indices.into_iter().zip(coeffs).filter(|(_, c)| *c != 0.0).collect();
    Ok(Concept::Polynomial(PolynomialThreshold::new(d, degree, coeff_pairs, t)?))
}

/// Minimize `Σ_i |p(x_i) − y_i|` over coefficients via the slack-variable LP
/// `u_i ≥ ±(p(x_i) − y_i)`, coefficients split into positive parts.
fn l1_fit(phi: &[f64], labels: &[i8], n: usize, nf: usize) -> Result<Vec<f64>> {
    if 2 * n > L1_CONSTRAINT_CAP {
        return Err(Error::Training(format!(
            "L1 regression needs {} constraints, cap is {L1_CONSTRAINT_CAP}; subsample or use L2",
            2 * n
        )));
    }
    let ncols = 2 * nf + n;
    let mut rows = Vec::with_capacity(2 * n);
    for i in 0..n {
        let feats = &phi[i * nf..(i + 1) * nf];
        let y = labels[i] as f64;
        // p(x_i) - u_i <= y_i
        let mut r1 = vec![0.0; ncols];
        // -p(x_i) - u_i <= -y_i
        let mut r2 = vec![0.0; ncols];
        for j in 0..nf {
            r1[j] = feats[j];
            r1[nf + j] = -feats[j];
            r2[j] = -feats[j];
            r2[nf + j] = feats[j];
        }
        r1[2 * nf + i] = -1.0;
        r2[2 * nf + i] = -1.0;
        rows.push((r1, y));
        rows.push((r2, -y));
    }
    let mut objective = vec![0.0; ncols];
    objective[2 * nf..].iter_mut().for_each(|v| *v = 1.0);
    let sol = solve(&DenseLp { ncols, objective, rows }, 200_000)?;
    Ok((0..nf).map(|j| sol.x[j] - sol.x[nf + j]).collect())
}

fn proper_intersection_erm(
    fit: &LabeledDataset,
    k: usize,
    restarts: u32,
    iterations: u32,
    rng: RngSpec,
) -> Result<Concept> {
    let d = fit.dim();
    let n = fit.n();

    // Label-weighted mean direction.
    let mut base = vec![0.0; d];
    for (x, y) in fit.data.iter_points().zip(&fit.labels) {
        for (b, v) in base.iter_mut().zip(x) {
            *b += *y as f64 * v;
        }
    }
    let norm = base.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        base.iter_mut().for_each(|v| *v /= norm);
    } else {
        base[0] = 1.0;
    }

    let mut best: Option<(f64, HalfspaceIntersection)> = None;
    for restart in 0..restarts {
        let mut r = rng.child(restart as u64).rng();
        let mut planes: Vec<(Vec<f64>, f64)> = (0..k)
            .map(|_| {
                let mut w: Vec<f64> = base
                    .iter()
                    .map(|b| {
                        b + 0.3 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut r)
                    })
                    .collect();
                let nm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                w.iter_mut().for_each(|v| *v /= nm);
                (w, 0.0)
            })
            .collect();

        for _ in 0..iterations.max(1) {
            for i in 0..k {
                // Points accepted by every other halfspace.
                let mut scores = Vec::new();
                let mut labels = Vec::new();
                let mut active_idx = Vec::new();
                'points: for (idx, (x, y)) in fit.data.iter_points().zip(&fit.labels).enumerate() {
                    for (j, (w, tau)) in planes.iter().enumerate() {
                        if j != i {
                            let m: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
                            if m < *tau {
                                continue 'points;
                            }
                        }
                    }
                    let s: f64 = planes[i].0.iter().zip(x).map(|(a, b)| a * b).sum();
                    scores.push(s);
                    labels.push(*y);
                    active_idx.push(idx);
                }
                if scores.is_empty() {
                    continue;
                }
                let (t, e_old) = fit_threshold(&scores, &labels);
                planes[i].1 = t;

                // Refit the direction on the active samples, keeping the
                // refit only when its own 1-D search is no worse.
                let mut w_new = vec![0.0; d];
                for &idx in &active_idx {
                    let x = fit.data.point(idx);
                    let y = fit.labels[idx] as f64;
                    for (a, v) in w_new.iter_mut().zip(x) {
                        *a += y * v;
                    }
                }
                let nm = w_new.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nm > 1e-12 {
                    w_new.iter_mut().for_each(|v| *v /= nm);
                    let scores_new: Vec<f64> = active_idx
                        .iter()
                        .map(|&idx| w_new.iter().zip(fit.data.point(idx)).map(|(a, b)| a * b).sum())
                        .collect();
                    let (t_new, e_new) = fit_threshold(&scores_new, &labels);
                    if e_new <= e_old {
                        planes[i] = (w_new, t_new);
                    }
                }
            }
        }

        let hs = planes
            .iter()
            .map(|(w, t)| Halfspace::from_direction(w.clone(), *t))
            .collect::<Result<Vec<_>>>()?;
        let candidate = HalfspaceIntersection::new(hs)?;
        let err = {
            let c = Concept::Intersection(candidate.clone());
            let wrong = fit
                .data
                .iter_points()
                .zip(&fit.labels)
                .filter(|(x, y)| c.eval_unchecked(x) != **y)
                .count();
            wrong as f64 / n as f64
        };
        if best.as_ref().map(|(e, _)| err < *e).unwrap_or(true) {
            best = Some((err, candidate));
        }
    }
    Ok(Concept::Intersection(best.unwrap().1))
}

fn planted_oracle(
    truth: &Concept,
    basis_rotation: f64,
    disagreement_target: f64,
    dim: usize,
    rng: RngSpec,
) -> Result<Concept> {
    if !(0.0..1.0).contains(&basis_rotation) || !(0.0..1.0).contains(&disagreement_target) {
        return Err(Error::Training("planted slacks must lie in [0, 1)".into()));
    }
    let mut hypothesis = truth.clone();

    if basis_rotation > 0.0 {
        let Concept::Junta(j) = &hypothesis else {
            return Err(Error::Training("basis rotation requires a subspace-junta truth".into()));
        };
        let rotated = rotate_basis(j, basis_rotation, rng.child(1))?;
        // The operator-norm distance must hit the request almost exactly.
        let diff: Vec<Vec<f64>> = rotated
            .basis()
            .iter()
            .zip(j.basis())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let dist = operator_norm(&diff)?;
        if (dist - basis_rotation).abs() > 1e-9 {
            return Err(Error::Training(format!(
                "rotation produced basis distance {dist}, wanted {basis_rotation}"
            )));
        }
        hypothesis = Concept::Junta(rotated);
    }

    if disagreement_target > 0.0 {
        hypothesis =
            translate_to_disagreement(truth, &hypothesis, disagreement_target, dim, rng.child(2))?;
    }

    Ok(hypothesis)
}

/// Rotate the first basis row towards a fresh direction from the orthogonal
/// complement by the angle that makes `‖W − V‖₂ = delta`.
fn rotate_basis(j: &SubspaceJunta, delta: f64, rng: RngSpec) -> Result<SubspaceJunta> {
    let basis = j.basis();
    let k = basis.len();
    let d = basis[0].len();
    if k == d {
        return Err(Error::Training("cannot rotate: basis spans the whole space (k = d)".into()));
    }
    let mut r = rng.rng();
    let mut v = vec![0.0; d];
    let mut found = false;
    for _ in 0..64 {
        for val in v.iter_mut() {
            *val = StandardNormal.sample(&mut r);
        }
        for row in basis {
            let proj: f64 = v.iter().zip(row).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(row).for_each(|(a, b)| *a -= proj * b);
        }
        let nm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nm > 1e-9 {
            v.iter_mut().for_each(|x| *x /= nm);
            found = true;
            break;
        }
    }
    if !found {
        return Err(Error::Training("failed to draw a complement direction".into()));
    }
    // Only the first row moves: it is the `u` axis of the rotation plane and
    // the other rows are orthogonal to both u and v, so the rotated basis
    // stays orthonormal and ‖W − V‖₂ = 2 sin(θ/2).
    let theta = 2.0 * (delta / 2.0).asin();
    let mut new_basis = basis.to_vec();
    let u = &basis[0];
    new_basis[0] = u.iter().zip(&v).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
    SubspaceJunta::new(new_basis, j.inner().clone())
}

/// Translate the first boundary plane of the hypothesis until the measured
/// Gaussian disagreement against `truth` lands in [0.8, 1.2]·target.
fn translate_to_disagreement(
    truth: &Concept,
    hypothesis: &Concept,
    target: f64,
    dim: usize,
    rng: RngSpec,
) -> Result<Concept> {
    let n_mc = 200_000;
    let gaussian = DistributionSpec::StandardGaussian { d: dim };
    let measure = |c: &Concept, tag: u64| -> Result<f64> {
        crate::concepts::estimate_disagreement(truth, c, &gaussian, n_mc, rng.child(tag))
    };
    let translated = |delta: f64| -> Result<Concept> { translate_first_plane(hypothesis, delta) };

    // The base hypothesis may already disagree (e.g. after rotation).
    let band = 0.8 * target..=1.2 * target;
    if band.contains(&measure(hypothesis, 0)?) {
        return Ok(hypothesis.clone());
    }

    let mut lo = 0.0f64;
    let mut hi = 0.05f64;
    for i in 0..40 {
        let dis = measure(&translated(hi)?, 100 + i)?;
        if band.contains(&dis) {
            return translated(hi);
        }
        if dis > target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::Training(format!("cannot reach disagreement {target} by translation")));
        }
    }
    for i in 0..60 {
        let mid = 0.5 * (lo + hi);
        let dis = measure(&translated(mid)?, 200 + i)?;
        if band.contains(&dis) {
            return translated(mid);
        }
        if dis > target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Training(format!("bisection failed to land in [0.8, 1.2]·{target}")))
}

fn translate_first_plane(c: &Concept, delta: f64) -> Result<Concept> {
    Ok(match c {
        Concept::Halfspace(h) => Concept::Halfspace(h.translated(delta)),
        Concept::Intersection(f) => {
            let mut hs = f.halfspaces().to_vec();
            hs[0] = hs[0].translated(delta);
            Concept::Intersection(HalfspaceIntersection::new(hs)?)
        }
        Concept::Junta(j) => {
            let inner = translate_first_plane(j.inner(), delta)?;
            Concept::Junta(SubspaceJunta::new(j.basis().to_vec(), inner)?)
        }
        _ => {
            return Err(Error::Training("disagreement translation needs a halfspace-based truth".into()))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{label_with, sample};

    fn gaussian_labeled(c: &Concept, d: usize, n: usize, noise: f64, seed: u64) -> LabeledDataset {
        let ds = sample(&DistributionSpec::StandardGaussian { d }, n, RngSpec::new(seed, 0)).unwrap();
        label_with(c, &ds, noise, RngSpec::new(seed, 1)).unwrap()
    }

    #[test]
    fn fit_threshold_separable() {
        let (t, err) = fit_threshold(&[-1.0, 1.0], &[-1, 1]);
        assert_eq!(t, 0.0);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn fit_threshold_all_positive_uses_low_sentinel() {
        let (t, err) = fit_threshold(&[0.3, 0.5], &[1, 1]);
        assert!(t < 0.3);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn fit_threshold_tied_scores() {
        let (_, err) = fit_threshold(&[0.0, 0.0], &[1, -1]);
        assert_eq!(err, 0.5);
    }

    #[test]
    fn fit_threshold_takes_first_optimal_midpoint() {
        let (t, err) = fit_threshold(&[0.0, 1.0, 2.0, 3.0], &[-1, -1, 1, 1]);
        assert_eq!(t, 1.5);
        assert_eq!(err, 0.0);
    }

    #[test]
    fn l2_regression_learns_realizable_halfspace() {
        let truth = Concept::Halfspace(Halfspace::axis(3, 0, 0.0));
        let data = gaussian_labeled(&truth, 3, 5000, 0.0, 11);
        let spec = TrainerSpec::PolyRegression { degree: 1, loss: Loss::L2 };
        let report = train(&spec, &data, RngSpec::new(1, 0)).unwrap();
        assert!(report.err_train <= 0.03, "err {}", report.err_train);
    }

    #[test]
    fn l1_regression_learns_realizable_halfspace() {
        let truth = Concept::Halfspace(Halfspace::axis(2, 0, 0.2));
        let data = gaussian_labeled(&truth, 2, 600, 0.0, 12);
        let spec = TrainerSpec::PolyRegression { degree: 1, loss: Loss::L1 };
        let report = train(&spec, &data, RngSpec::new(2, 0)).unwrap();
        assert!(report.err_train <= 0.05, "err {}", report.err_train);
    }

    #[test]
    fn l1_objective_matches_grid_search_on_1d() {
        // Brute-force oracle: scan (a, b) over a grid and compare the L1
        // objective with the LP optimum on a tiny degree-1 instance.
        let xs = [-1.0, -0.4, 0.1, 0.8, 1.5];
        let ys = [-1i8, -1, 1, 1, 1];
        let n = xs.len();
        let nf = 2; // [1, x]
        let mut phi = vec![0.0; n * nf];
        for i in 0..n {
            phi[i * nf] = 1.0;
            phi[i * nf + 1] = xs[i];
        }
        let coeffs = l1_fit(&phi, &ys, n, nf).unwrap();
        let lp_obj: f64 =
            (0..n).map(|i| (coeffs[0] + coeffs[1] * xs[i] - ys[i] as f64).abs()).sum();
        let mut grid_best = f64::INFINITY;
        let steps = 400;
        for ai in 0..=steps {
            for bi in 0..=steps {
                let a = -3.0 + 6.0 * ai as f64 / steps as f64;
                let b = -3.0 + 6.0 * bi as f64 / steps as f64;
                let obj: f64 = (0..n).map(|i| (a + b * xs[i] - ys[i] as f64).abs()).sum();
                grid_best = grid_best.min(obj);
            }
        }
        assert!(lp_obj <= grid_best + 1e-6, "lp {lp_obj} vs grid {grid_best}");
        assert!(grid_best - lp_obj <= 0.1, "lp {lp_obj} vs grid {grid_best}");
    }

    #[test]
    fn regression_on_constant_labels_is_perfect() {
        let ds = sample(&DistributionSpec::StandardGaussian { d: 2 }, 200, RngSpec::new(3, 0)).unwrap();
        let data = label_with(&Concept::Constant(1), &ds, 0.0, RngSpec::new(3, 1)).unwrap();
        let report =
            train(&TrainerSpec::PolyRegression { degree: 1, loss: Loss::L2 }, &data, RngSpec::new(4, 0))
                .unwrap();
        assert_eq!(report.err_train, 0.0);
    }

    #[test]
    fn planted_oracle_identity_reports_noise_rate() {
        let truth = Concept::Halfspace(Halfspace::axis(3, 0, 0.0));
        let data = gaussian_labeled(&truth, 3, 20_000, 0.1, 13);
        let spec = TrainerSpec::PlantedOracle {
            truth: truth.clone(),
            basis_rotation: 0.0,
            disagreement_target: 0.0,
        };
        let report = train(&spec, &data, RngSpec::new(5, 0)).unwrap();
        assert_eq!(report.hypothesis, truth);
        assert!((report.err_train - 0.1).abs() < 0.02, "err {}", report.err_train);
    }

    #[test]
    fn planted_oracle_hits_requested_basis_distance() {
        let inner = Concept::Halfspace(Halfspace::axis(2, 0, 0.0));
        let basis = vec![vec![1.0, 0.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0, 0.0]];
        let truth = Concept::Junta(SubspaceJunta::new(basis.clone(), inner).unwrap());
        let data = gaussian_labeled(&truth, 5, 2000, 0.0, 14);
        let delta = 0.15;
        let spec = TrainerSpec::PlantedOracle { truth, basis_rotation: delta, disagreement_target: 0.0 };
        let report = train(&spec, &data, RngSpec::new(6, 0)).unwrap();
        let Concept::Junta(j) = &report.hypothesis else { panic!("expected junta") };
        let diff: Vec<Vec<f64>> = j
            .basis()
            .iter()
            .zip(&basis)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
            .collect();
        let dist = operator_norm(&diff).unwrap();
        assert!((dist - delta).abs() < 1e-9, "distance {dist}");
    }

    #[test]
    fn planted_oracle_rotation_needs_complement() {
        let inner = Concept::Halfspace(Halfspace::axis(2, 0, 0.0));
        let basis = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let truth = Concept::Junta(SubspaceJunta::new(basis, inner).unwrap());
        let data = gaussian_labeled(&truth, 2, 100, 0.0, 15);
        let spec = TrainerSpec::PlantedOracle { truth, basis_rotation: 0.1, disagreement_target: 0.0 };
        assert!(train(&spec, &data, RngSpec::new(7, 0)).is_err());
    }

    #[test]
    fn planted_oracle_reaches_disagreement_band() {
        let truth = Concept::Halfspace(Halfspace::axis(3, 0, 0.0));
        let data = gaussian_labeled(&truth, 3, 1000, 0.0, 16);
        let target = 0.05;
        let spec = TrainerSpec::PlantedOracle {
            truth: truth.clone(),
            basis_rotation: 0.0,
            disagreement_target: target,
        };
        let report = train(&spec, &data, RngSpec::new(8, 0)).unwrap();
        let measured = crate::concepts::estimate_disagreement(
            &truth,
            &report.hypothesis,
            &DistributionSpec::StandardGaussian { d: 3 },
            400_000,
            RngSpec::new(9, 0),
        )
        .unwrap();
        assert!(
            (0.75 * target..=1.25 * target).contains(&measured),
            "measured disagreement {measured}"
        );
    }

    #[test]
    fn erm_recovers_axis_aligned_wedge() {
        let truth = Concept::Intersection(
            HalfspaceIntersection::new(vec![Halfspace::axis(2, 0, -0.3), Halfspace::axis(2, 1, -0.3)])
                .unwrap(),
        );
        let data = gaussian_labeled(&truth, 2, 4000, 0.0, 17);
        let spec = TrainerSpec::ProperIntersectionErm { k: 2, restarts: 8, iterations: 6 };
        let report = train(&spec, &data, RngSpec::new(10, 0)).unwrap();
        assert!(report.err_train <= 0.08, "err {}", report.err_train);
        assert!(matches!(report.hypothesis, Concept::Intersection(_)));
    }

    #[test]
    fn training_is_deterministic() {
        let truth = Concept::Halfspace(Halfspace::axis(2, 0, 0.0));
        let data = gaussian_labeled(&truth, 2, 500, 0.05, 18);
        let spec = TrainerSpec::PolyRegression { degree: 2, loss: Loss::L2 };
        let a = train(&spec, &data, RngSpec::new(11, 0)).unwrap();
        let b = train(&spec, &data, RngSpec::new(11, 0)).unwrap();
        assert_eq!(a.hypothesis, b.hypothesis);
        assert_eq!(a.err_train, b.err_train);
    }

    #[test]
    fn trainer_spec_json_round_trip() {
        let spec = TrainerSpec::PlantedOracle {
            truth: Concept::Halfspace(Halfspace::axis(2, 1, 0.5)),
            basis_rotation: 0.1,
            disagreement_target: 0.02,
        };
        let s = serde_json::to_string(&spec).unwrap();
        let back: TrainerSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
