//! One pass over all lifetimes `λ ∈ [0, Λ]`.
//!
//! The forest is sampled once up to `Λ`. Training, validation and optional
//! query points share one [`FeatureIndexer`] that starts from the trivial
//! partitions at `λ = 0`; cut events are replayed in time order and every
//! attached learner is updated after each one. Only training rows are ever
//! shown to the learners as data.

mod bayes;

pub use bayes::{
    mixture_predictions, posterior_over_lambda, predictive_mixture, IntervalSnapshot, LambdaPosterior,
    MixturePrediction, PriorCdf, UniformPrior,
};

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{ColumnDelta, ColumnId, FeatureIndexer};
use crate::mondrian::{CutEvent, Forest};
use crate::ridge::{ColumnData, RidgeState};
use crate::rng::{stream_rng, StreamRng};
use crate::sgd::{SgdConfig, SgdModel};

/// Read-only view handed to learners.
pub struct SweepContext<'a> {
    pub indexer: &'a FeatureIndexer,
    pub n_train: usize,
    pub train_y: &'a [f64],
}

impl SweepContext<'_> {
    pub fn row_features(&self, row: usize) -> Vec<(ColumnId, f64)> {
        let v = self.indexer.normalizer();
        self.indexer.row_columns(row).iter().map(|&c| (c, v)).collect()
    }

    /// Training rows of a split column, as sparse column data.
    pub fn training_rows(&self, rows: &[usize]) -> ColumnData {
        let v = self.indexer.normalizer();
        rows.iter().filter(|&&r| r < self.n_train).map(|&r| (r, v)).collect()
    }
}

/// A model that follows the feature space through the sweep.
pub trait SweepLearner {
    /// Called once with the trivial partitions at `λ = 0`.
    fn init(&mut self, ctx: &SweepContext) -> Result<()>;
    /// Spend the training budget for the interval `[from, to)`.
    fn advance(&mut self, _from: f64, _to: f64, _ctx: &SweepContext) -> Result<()> {
        Ok(())
    }
    fn on_cut(&mut self, delta: &ColumnDelta, ctx: &SweepContext) -> Result<()>;
    fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64>;
    fn log_marginal_likelihood(&self) -> Option<f64> {
        None
    }
}

/// Exact ridge regression refitted after every event.
#[derive(Clone, Debug)]
pub struct ExactRidge {
    delta2: f64,
    max_columns: usize,
    state: Option<RidgeState>,
}

pub const DEFAULT_MAX_EXACT_COLUMNS: usize = 6000;

impl ExactRidge {
    pub fn new(delta2: f64) -> Self {
        Self::with_capacity(delta2, DEFAULT_MAX_EXACT_COLUMNS)
    }

    /// Refuse to grow the dense factor beyond `max_columns` columns.
    pub fn with_capacity(delta2: f64, max_columns: usize) -> Self {
        Self {
            delta2,
            max_columns,
            state: None,
        }
    }

    pub fn state(&self) -> &RidgeState {
        self.state.as_ref().expect("learner initialised")
    }
}

impl SweepLearner for ExactRidge {
    fn init(&mut self, ctx: &SweepContext) -> Result<()> {
        let rows: Vec<_> = (0..ctx.n_train).map(|r| ctx.row_features(r)).collect();
        let cols = ctx.indexer.live_columns();
        self.state = Some(RidgeState::fit(&rows, ctx.train_y, &cols, self.delta2)?);
        Ok(())
    }

    fn on_cut(&mut self, delta: &ColumnDelta, ctx: &SweepContext) -> Result<()> {
        let state = self.state.as_mut().expect("learner initialised");
        if state.column_count() + 1 > self.max_columns {
            return Err(Error::InvalidParameter(format!(
                "exact ridge would exceed {} columns; lower the terminal lifetime or use the sgd mode",
                self.max_columns
            )));
        }
        state.split_column(
            delta.retired,
            &[
                (delta.left.0, ctx.training_rows(&delta.left.1)),
                (delta.right.0, ctx.training_rows(&delta.right.1)),
            ],
        )
    }

    fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        self.state().predict(features)
    }

    fn log_marginal_likelihood(&self) -> Option<f64> {
        Some(self.state().log_marginal_likelihood())
    }
}

/// SGD model reinitialised by weight copying at every cut, with a budget
/// of gradient steps between cuts.
#[derive(Clone, Debug)]
pub struct SgdLearner {
    delta2: f64,
    config: SgdConfig,
    /// Lifetime below which the per-decade budget is measured from.
    floor: f64,
    credit: f64,
    rng: StreamRng,
    model: Option<SgdModel>,
}

impl SgdLearner {
    pub fn new(delta2: f64, config: SgdConfig, seed: u64) -> Self {
        Self {
            delta2,
            config,
            floor: f64::NAN,
            credit: 0.0,
            rng: stream_rng(seed, 5),
            model: None,
        }
    }

    pub fn model(&self) -> &SgdModel {
        self.model.as_ref().expect("learner initialised")
    }

    fn run_steps(&mut self, steps: usize, ctx: &SweepContext) -> Result<()> {
        if ctx.n_train == 0 {
            return Ok(());
        }
        let model = self.model.as_mut().expect("learner initialised");
        for _ in 0..steps {
            let r = self.rng.random_range(0..ctx.n_train);
            model.sgd_step(&ctx.row_features(r), ctx.train_y[r])?;
        }
        Ok(())
    }
}

impl SweepLearner for SgdLearner {
    fn init(&mut self, ctx: &SweepContext) -> Result<()> {
        self.model = Some(SgdModel::new(
            ctx.indexer.column_id_bound(),
            self.delta2,
            ctx.n_train,
            &self.config,
        )?);
        Ok(())
    }

    fn advance(&mut self, from: f64, to: f64, ctx: &SweepContext) -> Result<()> {
        if self.floor.is_nan() {
            // the first interval [0, τ₁) counts as one decade
            self.floor = to / 10.0;
        }
        if to <= self.floor {
            return Ok(());
        }
        let decades = (to.max(self.floor) / from.max(self.floor)).log10();
        self.credit += decades * self.config.epochs_per_decade * ctx.n_train as f64;
        let steps = self.credit.floor();
        self.credit -= steps;
        self.run_steps(steps as usize, ctx)
    }

    fn on_cut(&mut self, delta: &ColumnDelta, _ctx: &SweepContext) -> Result<()> {
        self.model.as_mut().expect("learner initialised").reinit_on_cut(delta)
    }

    fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        self.model().predict(features)
    }
}

/// Points for one sweep. Query points are indexed alongside the others so
/// that their features exist at every lifetime, but carry no targets.
#[derive(Clone, Copy, Debug)]
pub struct SweepData<'a> {
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [f64],
    pub val_x: &'a [Vec<f64>],
    pub val_y: &'a [f64],
}

impl<'a> SweepData<'a> {
    pub fn new(train_x: &'a [Vec<f64>], train_y: &'a [f64], val_x: &'a [Vec<f64>], val_y: &'a [f64]) -> Result<Self> {
        if train_x.len() != train_y.len() || val_x.len() != val_y.len() {
            return Err(Error::InvalidParameter("inputs and targets differ in length".into()));
        }
        Ok(Self {
            train_x,
            train_y,
            val_x,
            val_y,
        })
    }
}

/// Event-by-event replay of a forest's cuts over an indexer.
pub struct Replay<'f> {
    forest: &'f Forest,
    events: Vec<CutEvent>,
    next: usize,
    indexer: FeatureIndexer,
    n_train: usize,
    train_y: Vec<f64>,
    terminal: f64,
}

impl<'f> Replay<'f> {
    /// The trees must already cover every point (see
    /// [`Forest::extend_to_points`]).
    pub fn new(forest: &'f Forest, data: &SweepData, queries: &[Vec<f64>], terminal: f64) -> Result<Self> {
        if !(terminal >= 0.0 && terminal <= forest.lifetime()) {
            return Err(Error::LifetimeBeyondTerminal {
                requested: terminal,
                terminal: forest.lifetime(),
            });
        }
        let points: Vec<&[f64]> = data
            .train_x
            .iter()
            .chain(data.val_x)
            .chain(queries)
            .map(|p| p.as_slice())
            .collect();
        let (indexer, _) = FeatureIndexer::build_features(forest, 0.0, &points)?;
        Ok(Self {
            forest,
            events: forest.cut_events(terminal),
            next: 0,
            indexer,
            n_train: data.train_x.len(),
            train_y: data.train_y.to_vec(),
            terminal,
        })
    }

    pub fn context(&self) -> SweepContext<'_> {
        SweepContext {
            indexer: &self.indexer,
            n_train: self.n_train,
            train_y: &self.train_y,
        }
    }

    pub fn indexer(&self) -> &FeatureIndexer {
        &self.indexer
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    /// Lifetime of the current feature space.
    pub fn lifetime(&self) -> f64 {
        self.indexer.lifetime()
    }

    /// End of the current interval: the next event time, or `Λ`.
    pub fn next_time(&self) -> f64 {
        self.events.get(self.next).map_or(self.terminal, |e| e.time)
    }

    /// Index of the current interval (0 before any cut).
    pub fn interval(&self) -> usize {
        self.next
    }

    pub fn is_done(&self) -> bool {
        self.next >= self.events.len()
    }

    /// Apply the next cut to the indexer.
    pub fn step(&mut self) -> Result<Option<ColumnDelta>> {
        let Some(event) = self.events.get(self.next).copied() else {
            return Ok(None);
        };
        self.next += 1;
        Ok(Some(self.indexer.apply_cut(self.forest, &event)?))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub event_index: usize,
    pub lambda: f64,
    pub columns: usize,
    pub train_rmse: f64,
    pub val_rmse: f64,
    /// `NaN` for learners without a likelihood.
    pub log_marginal_likelihood: f64,
}

/// One row per interval `[τ_c, τ_{c+1})` of the sweep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepTrace {
    pub rows: Vec<TraceRow>,
    /// Terminal lifetime `Λ`, the right end of the last interval.
    pub terminal: f64,
}

impl SweepTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lambda).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("event_index,lambda,C,train_rmse,val_rmse,log_marginal_likelihood\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:?},{},{:?},{:?},{:?}",
                r.event_index, r.lambda, r.columns, r.train_rmse, r.val_rmse, r.log_marginal_likelihood
            )
            .unwrap();
        }
        out
    }

    /// Row whose model is in use at lifetime `λ`.
    pub fn row_at(&self, lambda: f64) -> Option<&TraceRow> {
        let k = self.rows.partition_point(|r| r.lambda <= lambda);
        k.checked_sub(1).map(|i| &self.rows[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Criterion {
    ValidationError,
    MarginalLikelihood,
}

/// Best lifetime on the event grid: smallest validation RMSE, or largest
/// marginal likelihood. Ties go to the smaller lifetime.
pub fn select_lifetime(trace: &SweepTrace, criterion: Criterion) -> Result<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for r in &trace.rows {
        let score = match criterion {
            Criterion::ValidationError => r.val_rmse,
            Criterion::MarginalLikelihood => -r.log_marginal_likelihood,
        };
        if score.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((r.lambda, score));
        }
    }
    let (lambda, score) = best.ok_or(Error::EmptyTrace)?;
    Ok(match criterion {
        Criterion::ValidationError => (lambda, score),
        Criterion::MarginalLikelihood => (lambda, -score),
    })
}

fn rmse(learner: &dyn SweepLearner, ctx: &SweepContext, rows: std::ops::Range<usize>, y: &[f64]) -> Result<f64> {
    if rows.is_empty() {
        return Ok(f64::NAN);
    }
    let n = rows.len() as f64;
    let mut sse = 0.0;
    for (r, t) in rows.zip(y) {
        let e = t - learner.predict(&ctx.row_features(r))?;
        sse += e * e;
    }
    Ok((sse / n).sqrt())
}

fn record(
    learner: &dyn SweepLearner,
    replay: &Replay,
    data: &SweepData,
) -> Result<TraceRow> {
    let ctx = replay.context();
    let n = data.train_x.len();
    Ok(TraceRow {
        event_index: replay.interval(),
        lambda: replay.lifetime(),
        columns: replay.indexer().column_count(),
        train_rmse: rmse(learner, &ctx, 0..n, data.train_y)?,
        val_rmse: rmse(learner, &ctx, n..n + data.val_x.len(), data.val_y)?,
        log_marginal_likelihood: learner.log_marginal_likelihood().unwrap_or(f64::NAN),
    })
}

/// Sweep several learners through the same replay, returning one trace per
/// learner. The trees must cover the validation points.
pub fn run_sweep_with(
    forest: &Forest,
    data: &SweepData,
    terminal: f64,
    learners: &mut [&mut dyn SweepLearner],
) -> Result<Vec<SweepTrace>> {
    let mut replay = Replay::new(forest, data, &[], terminal)?;
    for l in learners.iter_mut() {
        l.init(&replay.context())?;
    }
    let mut traces = vec![
        SweepTrace {
            rows: Vec::new(),
            terminal
        };
        learners.len()
    ];
    loop {
        let (from, to) = (replay.lifetime(), replay.next_time());
        for (l, trace) in learners.iter_mut().zip(&mut traces) {
            l.advance(from, to, &replay.context())?;
            trace.rows.push(record(&**l, &replay, data)?);
        }
        match replay.step()? {
            Some(delta) => {
                for l in learners.iter_mut() {
                    l.on_cut(&delta, &replay.context())?;
                }
            }
            None => break,
        }
    }
    Ok(traces)
}

/// Which learner a sweep runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepMode {
    Exact,
    Sgd(SgdConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepConfig {
    pub delta2: f64,
    pub mode: SweepMode,
    pub max_exact_columns: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn exact(delta2: f64) -> Self {
        Self {
            delta2,
            mode: SweepMode::Exact,
            max_exact_columns: DEFAULT_MAX_EXACT_COLUMNS,
            seed: 0,
        }
    }

    pub fn sgd(delta2: f64, config: SgdConfig, seed: u64) -> Self {
        Self {
            delta2,
            mode: SweepMode::Sgd(config),
            max_exact_columns: DEFAULT_MAX_EXACT_COLUMNS,
            seed,
        }
    }
}

/// Extend the forest to the validation points and sweep one learner.
pub fn run_sweep(forest: &mut Forest, data: &SweepData, terminal: f64, config: &SweepConfig) -> Result<SweepTrace> {
    forest.extend_to_points(data.val_x)?;
    let mut traces = match config.mode {
        SweepMode::Exact => {
            let mut l = ExactRidge::with_capacity(config.delta2, config.max_exact_columns);
            run_sweep_with(forest, data, terminal, &mut [&mut l])?
        }
        SweepMode::Sgd(c) => {
            let mut l = SgdLearner::new(config.delta2, c, config.seed);
            run_sweep_with(forest, data, terminal, &mut [&mut l])?
        }
    };
    Ok(traces.remove(0))
}
