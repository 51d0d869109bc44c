//! Posterior over the lifetime. The marginal likelihood is constant between
//! consecutive cut times, so the posterior is a mixture over the intervals
//! `[τ_c, τ_{c+1})` with weights `k_c ∝ p(y | λ = τ_c) · P(τ_c ≤ λ < τ_{c+1})`.

use std::collections::HashMap;

use super::{ExactRidge, Replay, SweepData, SweepLearner, SweepTrace};
use crate::error::{Error, Result};
use crate::features::ColumnId;
use crate::mondrian::Forest;

/// Cumulative distribution function of a prior over the lifetime.
pub trait PriorCdf {
    fn cdf(&self, lambda: f64) -> f64;
}

/// Uniform prior on `[0, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformPrior {
    pub upper: f64,
}

impl PriorCdf for UniformPrior {
    fn cdf(&self, lambda: f64) -> f64 {
        (lambda / self.upper).clamp(0.0, 1.0)
    }
}

impl<F: Fn(f64) -> f64> PriorCdf for F {
    fn cdf(&self, lambda: f64) -> f64 {
        self(lambda)
    }
}

const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaPosterior {
    starts: Vec<f64>,
    ends: Vec<f64>,
    log_likelihoods: Vec<f64>,
    prior_masses: Vec<f64>,
    coefficients: Vec<f64>,
    log_evidence: f64,
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Mixing coefficients over the intervals of a trace that carries marginal
/// likelihoods. The prior must put all its mass on `[0, Λ]`.
pub fn posterior_over_lambda(trace: &SweepTrace, prior: &dyn PriorCdf) -> Result<LambdaPosterior> {
    if trace.rows.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let terminal = trace.terminal;
    let outside = prior.cdf(0.0) + (1.0 - prior.cdf(terminal));
    if !(outside.abs() <= MASS_TOLERANCE) {
        return Err(Error::PriorMassOutside(outside));
    }
    let starts: Vec<f64> = trace.rows.iter().map(|r| r.lambda).collect();
    let mut ends: Vec<f64> = starts[1..].to_vec();
    ends.push(terminal);
    let log_likelihoods: Vec<f64> = trace.rows.iter().map(|r| r.log_marginal_likelihood).collect();
    if log_likelihoods.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter("trace has no marginal likelihoods; sweep in exact mode".into()));
    }
    let prior_masses: Vec<f64> = starts
        .iter()
        .zip(&ends)
        .map(|(&a, &b)| (prior.cdf(b) - prior.cdf(a)).max(0.0))
        .collect();
    let log_weights: Vec<f64> = log_likelihoods
        .iter()
        .zip(&prior_masses)
        .map(|(l, m)| if *m > 0.0 { l + m.ln() } else { f64::NEG_INFINITY })
        .collect();
    let log_evidence = log_sum_exp(&log_weights);
    if !log_evidence.is_finite() {
        return Err(Error::Numerical("posterior over the lifetime has no mass".into()));
    }
    let coefficients = log_weights.iter().map(|w| (w - log_evidence).exp()).collect();
    Ok(LambdaPosterior {
        starts,
        ends,
        log_likelihoods,
        prior_masses,
        coefficients,
        log_evidence,
    })
}

impl LambdaPosterior {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn interval(&self, c: usize) -> (f64, f64) {
        (self.starts[c], self.ends[c])
    }

    pub fn log_likelihoods(&self) -> &[f64] {
        &self.log_likelihoods
    }

    pub fn prior_masses(&self) -> &[f64] {
        &self.prior_masses
    }

    /// `log p(y | X)` under the prior.
    pub fn log_evidence(&self) -> f64 {
        self.log_evidence
    }

    pub fn terminal(&self) -> f64 {
        *self.ends.last().expect("posterior has an interval")
    }

    /// Interval holding the posterior quantile `u ∈ [0, 1)`.
    pub fn interval_at_quantile(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (c, k) in self.coefficients.iter().enumerate() {
            acc += k;
            if u < acc {
                return c;
            }
        }
        self.len() - 1
    }

    /// Indices of the `k` intervals with the largest coefficients, ties by
    /// position.
    pub fn top_intervals(&self, k: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| self.coefficients[b].total_cmp(&self.coefficients[a]).then(a.cmp(&b)));
        order.truncate(k);
        order.sort_unstable();
        order
    }
}

/// Mean and variance of the mixture `Σ k_c N(m_c, v_c)`.
pub fn predictive_mixture(posterior: &LambdaPosterior, per_interval: &[(f64, f64)]) -> Result<(f64, f64)> {
    if per_interval.len() != posterior.len() {
        return Err(Error::DimensionMismatch {
            expected: posterior.len(),
            found: per_interval.len(),
        });
    }
    let mut mean = 0.0;
    let mut second = 0.0;
    for (k, (m, v)) in posterior.coefficients.iter().zip(per_interval) {
        mean += k * m;
        second += k * (v + m * m);
    }
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// Ridge weights of one interval, kept for fast mean predictions.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSnapshot {
    pub interval: usize,
    pub lambda: f64,
    pub coefficient: f64,
    pub weights: HashMap<ColumnId, f64>,
}

impl IntervalSnapshot {
    /// Features missing from the snapshot have weight zero.
    pub fn predict(&self, features: &[(ColumnId, f64)]) -> f64 {
        features
            .iter()
            .map(|(c, v)| v * self.weights.get(c).copied().unwrap_or(0.0))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixturePrediction {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Snapshots of the heaviest intervals.
    pub snapshots: Vec<IntervalSnapshot>,
    /// Posterior mass of intervals skipped as negligible.
    pub neglected_mass: f64,
}

/// Intervals lighter than this are left out of the variance computation.
const NEGLIGIBLE: f64 = 1e-15;

/// Posterior predictive mean and variance at `queries`, marginalising the
/// lifetime. Replays the sweep that produced `posterior` (same forest and
/// data), and keeps weight snapshots of the `top_k` heaviest intervals.
/// Extend the forest to the queries before that sweep: extension can add
/// cuts, and a posterior whose interval count no longer matches is rejected.
pub fn mixture_predictions(
    forest: &mut Forest,
    data: &SweepData,
    queries: &[Vec<f64>],
    posterior: &LambdaPosterior,
    delta2: f64,
    top_k: usize,
) -> Result<MixturePrediction> {
    forest.extend_to_points(data.val_x)?;
    forest.extend_to_points(queries)?;
    let mut replay = Replay::new(forest, data, queries, posterior.terminal())?;
    if replay.event_count() + 1 != posterior.len() {
        return Err(Error::InvalidParameter("posterior does not belong to this sweep".into()));
    }
    let first_query = data.train_x.len() + data.val_x.len();
    let keep = posterior.top_intervals(top_k);
    let mut learner = ExactRidge::new(delta2);
    learner.init(&replay.context())?;
    let mut mean = vec![0.0; queries.len()];
    let mut second = vec![0.0; queries.len()];
    let mut covered = 0.0;
    let mut snapshots = Vec::new();
    loop {
        let c = replay.interval();
        let k = posterior.coefficients[c];
        if k > NEGLIGIBLE {
            let ctx = replay.context();
            let state = learner.state();
            for q in 0..queries.len() {
                let phi = ctx.row_features(first_query + q);
                let m = state.predict(&phi)?;
                let v = state.predictive_variance(&phi)?;
                mean[q] += k * m;
                second[q] += k * (v + m * m);
            }
            covered += k;
        }
        if keep.binary_search(&c).is_ok() {
            snapshots.push(IntervalSnapshot {
                interval: c,
                lambda: replay.lifetime(),
                coefficient: k,
                weights: learner.state().weights().into_iter().collect(),
            });
        }
        match replay.step()? {
            Some(delta) => learner.on_cut(&delta, &replay.context())?,
            None => break,
        }
    }
    let variance = mean
        .iter_mut()
        .zip(&mut second)
        .map(|(m, s)| {
            *m /= covered;
            *s /= covered;
            (*s - *m * *m).max(0.0)
        })
        .collect();
    Ok(MixturePrediction {
        mean,
        variance,
        snapshots,
        neglected_mass: 1.0 - covered,
    })
}
