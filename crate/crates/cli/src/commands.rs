use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use mondrian_kernel::baselines::{lifetime_search, BinningFeatureSet, FourierFeatureSet};
use mondrian_kernel::data::{synthetic_laplace, Dataset};
use mondrian_kernel::features::{ColumnDelta, ColumnId, FeatureIndexer};
use mondrian_kernel::forest::{fit_forest, weight_histogram, ForestLearner};
use mondrian_kernel::kernels::pairwise_errors;
use mondrian_kernel::mondrian::Forest;
use mondrian_kernel::ridge::RidgeState;
use mondrian_kernel::rng::{derive_seed, stream_rng};
use mondrian_kernel::sgd::SgdConfig;
use mondrian_kernel::sweep::{
    mixture_predictions, posterior_over_lambda, run_sweep_with, select_lifetime, Criterion, ExactRidge, SgdLearner,
    SweepContext, SweepData, SweepLearner, SweepTrace, UniformPrior, DEFAULT_MAX_EXACT_COLUMNS,
};
use mondrian_kernel::{Error, Result};
use rand::Rng;

use crate::{Baseline, Common, Mode, SgdArgs};

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load(path: &Path) -> Result<Dataset> {
    let ds = Dataset::read(path)?;
    if ds.is_empty() {
        return Err(Error::InvalidParameter(format!("{} has no rows", path.display())));
    }
    Ok(ds)
}

fn same_dim(reference: &Dataset, other: &Dataset) -> Result<()> {
    if reference.dim() == other.dim() {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: reference.dim(),
            found: other.dim(),
        })
    }
}

fn empty_like(ds: &Dataset) -> Dataset {
    Dataset {
        feature_names: ds.feature_names.clone(),
        x: Vec::new(),
        y: Vec::new(),
    }
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    (sse / y.len().max(1) as f64).sqrt()
}

#[allow(clippy::too_many_arguments)]
pub fn gen_synthetic(
    n: usize,
    n_val: usize,
    n_test: usize,
    dim: usize,
    lifetime: f64,
    noise: f64,
    seed: u64,
    output: &Path,
) -> Result<()> {
    let all = synthetic_laplace(n + n_val + n_test, dim, lifetime, noise, seed)?;
    let (train, rest) = all.split_at(n);
    let (val, test) = rest.split_at(n_val);
    std::fs::create_dir_all(output)?;
    for (name, part) in [("train", &train), ("validation", &val), ("test", &test)] {
        if part.is_empty() {
            continue;
        }
        let path = output.join(format!("{name}.csv"));
        part.write_csv(&path)?;
        eprintln!("wrote {} rows to {}", part.len(), path.display());
    }
    Ok(())
}

pub fn approx_error(
    trees: &[usize],
    lifetime: f64,
    n: usize,
    dim: usize,
    repeats: usize,
    seed: u64,
    output: Option<&Path>,
) -> Result<()> {
    let mut rng = stream_rng(seed, 0);
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let mut out = String::from("trees,repeat,max_abs_error,mean_abs_error\n");
    for &m in trees {
        let mut maxima = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let forest = Forest::sample_on_points(&pts, m, lifetime, derive_seed(seed, r as u64 + 1))?;
            let e = pairwise_errors(&pts, &forest, lifetime)?;
            let max = e.iter().copied().fold(0.0, f64::max);
            let mean = e.iter().sum::<f64>() / e.len().max(1) as f64;
            writeln!(out, "{m},{r},{max:?},{mean:?}").unwrap();
            maxima.push(max);
        }
        maxima.sort_by(f64::total_cmp);
        if let Some(med) = maxima.get(maxima.len() / 2) {
            eprintln!("M={m}: median max error {med:.4}");
        }
    }
    emit(output, &out)
}

/// Records the wall-clock time at which each interval's model is ready.
struct Timed<L> {
    inner: L,
    start: Instant,
    marks: Vec<f64>,
}

impl<L> Timed<L> {
    fn new(inner: L) -> Self {
        Self {
            inner,
            start: Instant::now(),
            marks: Vec::new(),
        }
    }
}

impl<L: SweepLearner> SweepLearner for Timed<L> {
    fn init(&mut self, ctx: &SweepContext) -> Result<()> {
        self.inner.init(ctx)
    }

    fn advance(&mut self, from: f64, to: f64, ctx: &SweepContext) -> Result<()> {
        self.inner.advance(from, to, ctx)?;
        self.marks.push(self.start.elapsed().as_secs_f64());
        Ok(())
    }

    fn on_cut(&mut self, delta: &ColumnDelta, ctx: &SweepContext) -> Result<()> {
        self.inner.on_cut(delta, ctx)
    }

    fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        self.inner.predict(features)
    }

    fn log_marginal_likelihood(&self) -> Option<f64> {
        self.inner.log_marginal_likelihood()
    }
}

fn sgd_config(args: &SgdArgs) -> Result<SgdConfig> {
    if !(args.epochs_per_decade >= 0.0 && args.epochs_per_decade.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "epochs per decade must be non-negative, got {}",
            args.epochs_per_decade
        )));
    }
    Ok(SgdConfig {
        eta0: args.eta0,
        t0: args.t0,
        epochs_per_decade: args.epochs_per_decade,
    })
}

fn sweep_once(
    forest: &Forest,
    data: &SweepData,
    terminal: f64,
    mode: Mode,
    sgd: &SgdConfig,
    common: &Common,
) -> Result<(SweepTrace, Vec<f64>)> {
    let mut traces;
    let marks;
    if mode == Mode::Sgd {
        let mut l = Timed::new(SgdLearner::new(common.delta2, *sgd, common.seed));
        traces = run_sweep_with(forest, data, terminal, &mut [&mut l])?;
        marks = l.marks;
    } else {
        let mut l = Timed::new(ExactRidge::with_capacity(common.delta2, DEFAULT_MAX_EXACT_COLUMNS));
        traces = run_sweep_with(forest, data, terminal, &mut [&mut l])?;
        marks = l.marks;
    }
    Ok((traces.remove(0), marks))
}

fn with_timing(csv: &str, marks: &[f64]) -> String {
    let mut out = String::new();
    for (i, line) in csv.lines().enumerate() {
        if i == 0 {
            writeln!(out, "{line},elapsed_seconds").unwrap();
        } else {
            writeln!(out, "{line},{:?}", marks[i - 1]).unwrap();
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn sweep(
    input: &Path,
    validation: Option<&Path>,
    test: Option<&Path>,
    terminal: f64,
    mode: Mode,
    sgd: &SgdArgs,
    timing: bool,
    common: &Common,
) -> Result<()> {
    let train = load(input)?;
    let val = match validation {
        Some(p) => load(p)?,
        None => empty_like(&train),
    };
    let test = test.map(load).transpose()?;
    same_dim(&train, &val)?;
    if let Some(t) = &test {
        same_dim(&train, t)?;
    }
    let sgd = sgd_config(sgd)?;
    let mut forest = Forest::sample_on_points(&train.x, common.trees, terminal, common.seed)?;
    forest.extend_to_points(&val.x)?;
    if let Some(t) = &test {
        forest.extend_to_points(&t.x)?;
    }
    let data = SweepData::new(&train.x, &train.y, &val.x, &val.y)?;

    if mode == Mode::Bayes {
        let (trace, _) = sweep_once(&forest, &data, terminal, Mode::Exact, &sgd, common)?;
        let posterior = posterior_over_lambda(&trace, &UniformPrior { upper: terminal })?;
        let mut out = String::from("event_index,lambda,lambda_end,log_marginal_likelihood,prior_mass,posterior_weight\n");
        for (c, row) in trace.rows.iter().enumerate() {
            let (a, b) = posterior.interval(c);
            writeln!(
                out,
                "{},{a:?},{b:?},{:?},{:?},{:?}",
                row.event_index,
                row.log_marginal_likelihood,
                posterior.prior_masses()[c],
                posterior.coefficients()[c]
            )
            .unwrap();
        }
        emit(common.output.as_deref(), &out)?;
        let top = posterior.top_intervals(1)[0];
        let (a, b) = posterior.interval(top);
        eprintln!(
            "{} intervals; heaviest [{a:.4}, {b:.4}) with weight {:.4}; log evidence {:.4}",
            posterior.len(),
            posterior.coefficients()[top],
            posterior.log_evidence()
        );
        if let Some(t) = &test {
            let mix = mixture_predictions(&mut forest, &data, &t.x, &posterior, common.delta2, 1)?;
            eprintln!("posterior mean test RMSE {:.6}", rmse(&mix.mean, &t.y));
        }
        return Ok(());
    }

    let (trace, marks) = sweep_once(&forest, &data, terminal, mode, &sgd, common)?;
    let csv = trace.to_csv();
    emit(common.output.as_deref(), &if timing { with_timing(&csv, &marks) } else { csv })?;
    eprintln!(
        "{} intervals, {} columns at the terminal lifetime {terminal}",
        trace.len(),
        trace.rows.last().map_or(0, |r| r.columns)
    );
    let criterion = if val.is_empty() {
        if mode == Mode::Sgd {
            return Ok(());
        }
        Criterion::MarginalLikelihood
    } else {
        Criterion::ValidationError
    };
    let (best, score) = select_lifetime(&trace, criterion)?;
    eprintln!("selected lifetime {best:.6} ({criterion:?} {score:.6})");
    if let Some(t) = &test {
        let test_data = SweepData::new(&train.x, &train.y, &t.x, &t.y)?;
        let (test_trace, _) = sweep_once(&forest, &test_data, terminal, mode, &sgd, common)?;
        let row = test_trace.row_at(best).ok_or(Error::EmptyTrace)?;
        eprintln!("test RMSE at the selected lifetime {:.6}", row.val_rmse);
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn baseline_search(
    input: &Path,
    validation: Option<&Path>,
    baseline: Baseline,
    features: usize,
    start: f64,
    max_expansions: usize,
    refinements: usize,
    timing: bool,
    common: &Common,
) -> Result<()> {
    let train = load(input)?;
    let val = load(validation.ok_or_else(|| Error::InvalidParameter("a baseline search needs --validation".into()))?)?;
    same_dim(&train, &val)?;
    let dim = train.dim();
    let clock = Instant::now();
    let mut marks = Vec::new();
    let steps = lifetime_search(start, max_expansions, refinements, |lifetime| {
        let (rows, val_rows) = match baseline {
            Baseline::Fourier => {
                let f = FourierFeatureSet::new(dim, features, lifetime, common.seed)?;
                (f.encode(&train.x)?, f.encode(&val.x)?)
            }
            Baseline::Binning => {
                let b = BinningFeatureSet::new(dim, features, lifetime, common.seed)?;
                let mut columns = HashMap::new();
                let rows = b.encode(&train.x, &mut columns, true)?;
                if columns.len() > DEFAULT_MAX_EXACT_COLUMNS {
                    return Err(Error::InvalidParameter(format!(
                        "binning at lifetime {lifetime} has {} columns; use fewer repetitions",
                        columns.len()
                    )));
                }
                (rows, b.encode(&val.x, &mut columns, false)?)
            }
        };
        let state = RidgeState::fit_rows(&rows, &train.y, common.delta2)?;
        let e = rmse(&state.predict_rows(&val_rows)?, &val.y);
        marks.push(clock.elapsed().as_secs_f64());
        Ok(e)
    })?;
    let mut out = String::from(if timing {
        "step,lambda,val_rmse,elapsed_seconds\n"
    } else {
        "step,lambda,val_rmse\n"
    });
    for (i, s) in steps.iter().enumerate() {
        write!(out, "{i},{:?},{:?}", s.lifetime, s.error).unwrap();
        if timing {
            write!(out, ",{:?}", marks[i]).unwrap();
        }
        out.push('\n');
    }
    emit(common.output.as_deref(), &out)?;
    let best = steps.iter().min_by(|a, b| a.error.total_cmp(&b.error)).expect("search evaluates once");
    eprintln!("best lifetime {:.6} with validation RMSE {:.6}", best.lifetime, best.error);
    Ok(())
}

pub fn online(input: &Path, test: Option<&Path>, lifetime: f64, common: &Common) -> Result<()> {
    let data = load(input)?;
    let test = test.map(load).transpose()?;
    if let Some(t) = &test {
        same_dim(&data, t)?;
    }
    let mut forest = Forest::sample_on_points(&data.x[..1], common.trees, lifetime, common.seed)?;
    let mut indexer = FeatureIndexer::new(common.trees, lifetime);
    let mut state = RidgeState::fit(&[], &[], &[], common.delta2)?;
    let mut out = String::from("step,C,new_columns,prediction,y,squared_error,cumulative_rmse\n");
    let mut sse = 0.0;
    for (t, (x, &y)) in data.x.iter().zip(&data.y).enumerate() {
        let (phi, k) = indexer.extend_and_add(&mut forest, x)?;
        // columns created for this point still have their prior mean of zero
        let known: Vec<(ColumnId, f64)> = phi.entries().iter().copied().filter(|e| state.has_column(e.0)).collect();
        let prediction = state.predict(&known)?;
        let bound = indexer.column_id_bound();
        let fresh: Vec<(ColumnId, Vec<(usize, f64)>)> = (bound - k..bound).map(|c| (ColumnId(c), Vec::new())).collect();
        state.append_columns(&fresh)?;
        state.rank1_data_update(phi.entries(), y)?;
        let e = (y - prediction) * (y - prediction);
        sse += e;
        writeln!(
            out,
            "{t},{},{k},{prediction:?},{y:?},{e:?},{:?}",
            indexer.column_count(),
            (sse / (t + 1) as f64).sqrt()
        )
        .unwrap();
    }
    emit(common.output.as_deref(), &out)?;
    eprintln!(
        "{} points, {} columns, training RMSE {:.6}",
        data.len(),
        indexer.column_count(),
        state.train_rmse()
    );
    if let Some(t) = &test {
        // index the test points too so that re-keyed cells resolve, but
        // give the model no data for them
        let mut pred = Vec::with_capacity(t.len());
        for x in &t.x {
            let (phi, _) = indexer.extend_and_add(&mut forest, x)?;
            let known: Vec<(ColumnId, f64)> =
                phi.entries().iter().copied().filter(|e| state.has_column(e.0)).collect();
            pred.push(state.predict(&known)?);
        }
        eprintln!("test RMSE {:.6}", rmse(&pred, &t.y));
    }
    Ok(())
}

/// First event time at which every tree has made at least two cuts, or the
/// terminal lifetime if some tree never does.
fn default_histogram_lifetime(forest: &Forest, terminal: f64) -> f64 {
    forest
        .trees()
        .iter()
        .map(|t| {
            let mut times: Vec<f64> = t.cuts_until(terminal).map(|(_, c)| c.time).collect();
            times.sort_by(f64::total_cmp);
            times.get(1).copied().unwrap_or(terminal)
        })
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
pub fn compare_forest(
    input: &Path,
    test: &Path,
    terminal: f64,
    lifetimes: Option<&[f64]>,
    histogram: Option<&Path>,
    lifetime: Option<f64>,
    bins: usize,
    common: &Common,
) -> Result<()> {
    let train = load(input)?;
    let test = load(test)?;
    same_dim(&train, &test)?;
    let mut forest = Forest::sample_on_points(&train.x, common.trees, terminal, common.seed)?;
    forest.extend_to_points(&test.x)?;
    let data = SweepData::new(&train.x, &train.y, &test.x, &test.y)?;
    let mut kernel = ExactRidge::with_capacity(common.delta2, DEFAULT_MAX_EXACT_COLUMNS);
    let mut trees = ForestLearner::new(common.delta2)?;
    let traces = run_sweep_with(&forest, &data, terminal, &mut [&mut kernel, &mut trees])?;
    let lambdas: Vec<f64> = match lifetimes {
        Some(l) => {
            if let Some(&bad) = l.iter().find(|&&v| !(0.0..=terminal).contains(&v)) {
                return Err(Error::LifetimeBeyondTerminal {
                    requested: bad,
                    terminal,
                });
            }
            l.to_vec()
        }
        None => traces[0].lambdas(),
    };
    let mut out = String::from("lambda,kernel_train_rmse,kernel_test_rmse,forest_train_rmse,forest_test_rmse\n");
    for &l in &lambdas {
        let k = traces[0].row_at(l).ok_or(Error::EmptyTrace)?;
        let f = traces[1].row_at(l).ok_or(Error::EmptyTrace)?;
        writeln!(
            out,
            "{l:?},{:?},{:?},{:?},{:?}",
            k.train_rmse, k.val_rmse, f.train_rmse, f.val_rmse
        )
        .unwrap();
    }
    emit(common.output.as_deref(), &out)?;
    let last = traces[0].rows.len() - 1;
    eprintln!(
        "at the terminal lifetime: kernel test RMSE {:.6}, forest test RMSE {:.6}",
        traces[0].rows[last].val_rmse, traces[1].rows[last].val_rmse
    );

    if let Some(path) = histogram {
        let at = lifetime.unwrap_or_else(|| default_histogram_lifetime(&forest, terminal));
        if !(0.0..=terminal).contains(&at) {
            return Err(Error::LifetimeBeyondTerminal {
                requested: at,
                terminal,
            });
        }
        let (idx, phi) = FeatureIndexer::build_features(&forest, at, &train.x)?;
        let rows: Vec<Vec<(ColumnId, f64)>> = phi.rows.iter().map(|r| r.entries().to_vec()).collect();
        let k = RidgeState::fit(&rows, &train.y, &idx.live_columns(), common.delta2)?;
        let f = fit_forest(&idx, &train.y, common.delta2)?;
        let kernel_w: Vec<f64> = k.weights().into_iter().map(|(_, w)| w).collect();
        let mut forest_w: Vec<(ColumnId, f64)> = f.concatenated_weights().into_iter().collect();
        forest_w.sort_by_key(|e| e.0);
        let forest_w: Vec<f64> = forest_w.into_iter().map(|e| e.1).collect();
        let mut h = String::from("model,lower,upper,count\n");
        for (name, w) in [("kernel", &kernel_w), ("forest", &forest_w)] {
            for (lo, hi, n) in weight_histogram(w, bins) {
                writeln!(h, "{name},{lo:?},{hi:?},{n}").unwrap();
            }
        }
        std::fs::write(path, h)?;
        eprintln!("weight histograms at lifetime {at:.6} written to {}", path.display());
    }
    Ok(())
}
