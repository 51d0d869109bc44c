//! Random Fourier features and random binning for the Laplace kernel. Both
//! are rebuilt from scratch for every lifetime.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Gamma};

use crate::error::{Error, Result};
use crate::features::ColumnId;
use crate::rng::stream_rng;

fn check_dims(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        })
    }
}

fn check_lifetime(lifetime: f64) -> Result<()> {
    if lifetime.is_finite() && lifetime >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLifetime(lifetime))
    }
}

/// `z_c(x) = √(2/C) cos(ω_cᵀx + b_c)` with Cauchy frequencies of scale `λ`.
#[derive(Clone, Debug)]
pub struct FourierFeatureSet {
    dim: usize,
    frequencies: Vec<Vec<f64>>,
    phases: Vec<f64>,
}

impl FourierFeatureSet {
    pub fn new(dim: usize, count: usize, lifetime: f64, seed: u64) -> Result<Self> {
        check_lifetime(lifetime)?;
        if count == 0 {
            return Err(Error::InvalidParameter("need at least one Fourier feature".into()));
        }
        let mut rng = stream_rng(seed, 0);
        let cauchy = (lifetime > 0.0).then(|| Cauchy::new(0.0, lifetime).expect("positive scale"));
        let mut frequencies = Vec::with_capacity(count);
        let mut phases = Vec::with_capacity(count);
        for _ in 0..count {
            frequencies.push(
                (0..dim)
                    .map(|_| cauchy.as_ref().map_or(0.0, |c| c.sample(&mut rng)))
                    .collect(),
            );
            phases.push(rng.random::<f64>() * std::f64::consts::TAU);
        }
        Ok(Self {
            dim,
            frequencies,
            phases,
        })
    }

    pub fn count(&self) -> usize {
        self.phases.len()
    }

    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dims(self.dim, x)?;
        let s = (2.0 / self.count() as f64).sqrt();
        Ok(self
            .frequencies
            .iter()
            .zip(&self.phases)
            .map(|(w, b)| s * (w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b).cos())
            .collect())
    }

    /// Dense rows in sparse form, for the ridge solver.
    pub fn encode(&self, data: &[Vec<f64>]) -> Result<Vec<Vec<(ColumnId, f64)>>> {
        data.iter()
            .map(|x| Ok(self.features(x)?.into_iter().enumerate().map(|(c, v)| (ColumnId(c), v)).collect()))
            .collect()
    }
}

/// Random regular grids: per repetition and dimension, a pitch drawn from
/// `Gamma(2, rate λ)` and a uniform offset.
#[derive(Clone, Debug)]
pub struct BinningFeatureSet {
    dim: usize,
    pitches: Vec<Vec<f64>>,
    offsets: Vec<Vec<f64>>,
}

/// Bin of a point in one repetition.
pub type BinKey = (usize, Vec<i64>);

impl BinningFeatureSet {
    pub fn new(dim: usize, repetitions: usize, lifetime: f64, seed: u64) -> Result<Self> {
        check_lifetime(lifetime)?;
        if repetitions == 0 {
            return Err(Error::InvalidParameter("need at least one repetition".into()));
        }
        let mut rng = stream_rng(seed, 0);
        let gamma = (lifetime > 0.0).then(|| Gamma::new(2.0, 1.0 / lifetime).expect("valid gamma"));
        let mut pitches = Vec::with_capacity(repetitions);
        let mut offsets = Vec::with_capacity(repetitions);
        for _ in 0..repetitions {
            let p: Vec<f64> = (0..dim)
                .map(|_| gamma.as_ref().map_or(f64::INFINITY, |g| g.sample(&mut rng)))
                .collect();
            let u: Vec<f64> = p
                .iter()
                .map(|&p| if p.is_finite() { rng.random::<f64>() * p } else { 0.0 })
                .collect();
            pitches.push(p);
            offsets.push(u);
        }
        Ok(Self { dim, pitches, offsets })
    }

    pub fn repetitions(&self) -> usize {
        self.pitches.len()
    }

    pub fn bins(&self, x: &[f64]) -> Result<Vec<BinKey>> {
        check_dims(self.dim, x)?;
        Ok((0..self.repetitions())
            .map(|r| {
                let key = x
                    .iter()
                    .zip(&self.pitches[r])
                    .zip(&self.offsets[r])
                    .map(|((v, p), u)| if p.is_finite() { ((v - u) / p).floor() as i64 } else { 0 })
                    .collect();
                (r, key)
            })
            .collect())
    }

    /// Sparse rows with one `1/√R` entry per repetition. Bins are numbered
    /// in order of first appearance in `data`; later points in unseen bins
    /// get no entry for that repetition.
    pub fn encode(&self, data: &[Vec<f64>], columns: &mut HashMap<BinKey, ColumnId>, grow: bool) -> Result<Vec<Vec<(ColumnId, f64)>>> {
        let v = (self.repetitions() as f64).powf(-0.5);
        let mut rows = Vec::with_capacity(data.len());
        for x in data {
            let mut row = Vec::with_capacity(self.repetitions());
            for key in self.bins(x)? {
                let next = ColumnId(columns.len());
                let id = if grow {
                    Some(*columns.entry(key).or_insert(next))
                } else {
                    columns.get(&key).copied()
                };
                if let Some(id) = id {
                    row.push((id, v));
                }
            }
            rows.push(row);
        }
        Ok(rows)
    }

    /// `⟨z(x), z(x′)⟩`: the fraction of repetitions placing both in one bin.
    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let a = self.bins(x)?;
        let b = self.bins(y)?;
        let same = a.iter().zip(&b).filter(|(p, q)| p == q).count();
        Ok(same as f64 / self.repetitions() as f64)
    }
}

/// One evaluated lifetime of a search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchStep {
    pub lifetime: f64,
    pub error: f64,
}

/// Lifetime search for methods that must be rebuilt per lifetime. Starting
/// from `start`, repeatedly double the largest or halve the smallest lifetime
/// tried, moving towards whichever endpoint has the lower error, until the
/// best lifetime is bracketed or `max_expansions` is reached. Then refine by
/// `refinements` rounds of bisection in log space around the best lifetime.
pub fn lifetime_search<F>(start: f64, max_expansions: usize, refinements: usize, mut evaluate: F) -> Result<Vec<SearchStep>>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::InvalidParameter(format!("search must start at a positive lifetime, got {start}")));
    }
    let mut steps = vec![SearchStep {
        lifetime: start,
        error: evaluate(start)?,
    }];
    let mut eval = |l: f64, steps: &mut Vec<SearchStep>| -> Result<f64> {
        let e = evaluate(l)?;
        steps.push(SearchStep { lifetime: l, error: e });
        Ok(e)
    };
    let (mut lo, mut hi) = (start, start);
    let (mut e_lo, mut e_hi) = (steps[0].error, steps[0].error);
    let best = |steps: &[SearchStep]| {
        *steps
            .iter()
            .min_by(|a, b| a.error.total_cmp(&b.error).then(a.lifetime.total_cmp(&b.lifetime)))
            .expect("nonempty")
    };
    for i in 0..max_expansions {
        let b = best(&steps);
        if i >= 1 && b.lifetime != lo && b.lifetime != hi {
            break;
        }
        if e_lo < e_hi {
            lo /= 2.0;
            e_lo = eval(lo, &mut steps)?;
        } else {
            hi *= 2.0;
            e_hi = eval(hi, &mut steps)?;
            if i == 0 {
                lo /= 2.0;
                e_lo = eval(lo, &mut steps)?;
            }
        }
    }
    for _ in 0..refinements {
        let b = best(&steps);
        let below = steps
            .iter()
            .filter(|s| s.lifetime < b.lifetime)
            .map(|s| s.lifetime)
            .fold(f64::NEG_INFINITY, f64::max);
        let above = steps
            .iter()
            .filter(|s| s.lifetime > b.lifetime)
            .map(|s| s.lifetime)
            .fold(f64::INFINITY, f64::min);
        let mut candidates = Vec::new();
        if below.is_finite() {
            candidates.push((below * b.lifetime).sqrt());
        }
        if above.is_finite() {
            candidates.push((above * b.lifetime).sqrt());
        }
        if candidates.is_empty() {
            break;
        }
        for c in candidates {
            eval(c, &mut steps)?;
        }
    }
    Ok(steps)
}
