//! Acceptance run: one PASS/FAIL line per criterion.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use mondrian_kernel::data::{synthetic_laplace, Dataset};
use mondrian_kernel::features::{ColumnId, FeatureIndexer};
use mondrian_kernel::forest::{compare_objectives, ForestLearner};
use mondrian_kernel::kernels::{laplace, max_abs_error, pairwise_errors};
use mondrian_kernel::mondrian::{AxisAlignedBox, Forest, MondrianTree};
use mondrian_kernel::ridge::RidgeState;
use mondrian_kernel::rng::stream_rng;
use mondrian_kernel::sgd::{SgdConfig, SgdModel};
use mondrian_kernel::sweep::{
    posterior_over_lambda, run_sweep, run_sweep_with, select_lifetime, Criterion, ExactRidge, PriorCdf, Replay,
    SgdLearner, SweepConfig, SweepData, SweepLearner,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

type Outcome = Result<String, String>;

fn uniform_points(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 77);
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

fn smooth_targets(x: &[Vec<f64>], noise: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 78);
    x.iter()
        .map(|p| {
            let s: f64 = p.iter().enumerate().map(|(d, v)| ((d + 2) as f64 * v).sin()).sum();
            s + noise * (rng.random::<f64>() - 0.5)
        })
        .collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn rows_of(indexer: &FeatureIndexer, rows: std::ops::Range<usize>) -> Vec<Vec<(ColumnId, f64)>> {
    let v = indexer.normalizer();
    rows.map(|r| indexer.row_columns(r).iter().map(|&c| (c, v)).collect()).collect()
}

/// Gaussian evidence `log N(y; 0, ΦΦᵀ + δ²I)` computed in the N×N dual form.
fn dual_evidence(rows: &[Vec<(ColumnId, f64)>], y: &[f64], delta2: f64) -> f64 {
    let n = y.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for (a, va) in &rows[i] {
                for (b, vb) in &rows[j] {
                    if a == b {
                        s += va * vb;
                    }
                }
            }
            k[(i, j)] = s;
        }
        k[(i, i)] += delta2;
    }
    let chol = k.cholesky().expect("evidence covariance is positive definite");
    let yv = DVector::from_column_slice(y);
    let alpha = chol.solve(&yv);
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    -0.5 * yv.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln()
}

/// Dense primal ridge solution over `columns`.
fn dense_ridge(rows: &[Vec<(ColumnId, f64)>], y: &[f64], columns: &[ColumnId], delta2: f64) -> Vec<f64> {
    let pos: HashMap<ColumnId, usize> = columns.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let c = columns.len();
    let mut a = DMatrix::<f64>::identity(c, c) * delta2;
    let mut b = DVector::<f64>::zeros(c);
    for (row, &t) in rows.iter().zip(y) {
        for &(ci, vi) in row {
            b[pos[&ci]] += vi * t;
            for &(cj, vj) in row {
                a[(pos[&ci], pos[&cj])] += vi * vj;
            }
        }
    }
    a.cholesky().expect("ridge matrix is positive definite").solve(&b).iter().copied().collect()
}

fn criterion_1() -> Outcome {
    let pts = uniform_points(40, 3, 1);
    let samples = 100_000u64;
    let mut worst: f64 = 0.0;
    for (li, &lam) in [0.5, 2.0, 10.0].iter().enumerate() {
        let mut same = [0u64; 20];
        for s in 0..samples {
            let tree = MondrianTree::sample_on_points(&pts, lam, (li as u64) << 40 | s).map_err(|e| e.to_string())?;
            for (p, hit) in same.iter_mut().enumerate() {
                let a = tree.cell_lookup(&pts[2 * p], lam).unwrap();
                let b = tree.cell_lookup(&pts[2 * p + 1], lam).unwrap();
                *hit += (a == b) as u64;
            }
        }
        for (p, &hit) in same.iter().enumerate() {
            let k = laplace(&pts[2 * p], &pts[2 * p + 1], lam).unwrap();
            let freq = hit as f64 / samples as f64;
            let se = (k * (1.0 - k) / samples as f64).sqrt();
            let z = if se > 0.0 { (freq - k).abs() / se } else if freq == k { 0.0 } else { f64::INFINITY };
            worst = worst.max(z);
        }
    }
    if worst <= 4.0 {
        Ok(format!("60 pair/lifetime cases, largest deviation {worst:.2} SE"))
    } else {
        Err(format!("largest deviation {worst:.2} SE exceeds 4"))
    }
}

fn criterion_2() -> Outcome {
    let mut at = HashMap::new();
    let mut min_frac: f64 = 1.0;
    for &m in &[25usize, 400] {
        let mut errs = Vec::new();
        for seed in 0..5u64 {
            let pts = uniform_points(100, 2, 100 + seed);
            let forest = Forest::sample_on_points(&pts, m, 10.0, seed).map_err(|e| e.to_string())?;
            errs.push(max_abs_error(&pts, &forest, 10.0).map_err(|e| e.to_string())?);
            if m == 400 {
                let pair = pairwise_errors(&pts, &forest, 10.0).map_err(|e| e.to_string())?;
                let ok = pair.iter().filter(|&&e| e <= 4.0 / (m as f64).sqrt()).count();
                min_frac = min_frac.min(ok as f64 / pair.len() as f64);
            }
        }
        at.insert(m, median(errs));
    }
    let (e25, e400) = (at[&25], at[&400]);
    if e400 < e25 && min_frac >= 0.99 {
        Ok(format!("median max error {e25:.4} (M=25) > {e400:.4} (M=400); {:.2}% of pairs within 4/√M", 100.0 * min_frac))
    } else {
        Err(format!("medians {e25:.4} vs {e400:.4}; pair fraction {min_frac:.4}"))
    }
}

fn criterion_3() -> Outcome {
    let unit = AxisAlignedBox::unit(2);
    let samples = 10_000u64;
    let mut worst = f64::NEG_INFINITY;
    for (ti, &t) in [0.25, 0.5, 1.0].iter().enumerate() {
        let counts: Vec<usize> = (0..samples)
            .map(|s| MondrianTree::sample(&unit, t, (ti as u64) << 40 | s).map(|tr| tr.cell_count(t)))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        for n in [2usize, 4, 8, 16] {
            let p = counts.iter().filter(|&&c| c > n).count() as f64 / samples as f64;
            let bound = (unit.linear_dimension() * t).exp() / n as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            let slack = p - (bound + 3.0 * se);
            worst = worst.max(slack);
            if slack > 0.0 {
                return Err(format!("|X|t={}, n={n}: frequency {p:.4} > bound {bound:.4} + 3 SE", 2.0 * t));
            }
        }
    }
    Ok(format!("12 grid cells respected, tightest margin {:.4}", -worst))
}

fn criterion_4() -> Outcome {
    let x = uniform_points(200, 5, 4);
    let y = smooth_targets(&x, 0.2, 4);
    let (lam, delta2) = (4.0, 1e-4);
    let forest = Forest::sample_on_points(&x, 10, lam, 4).map_err(|e| e.to_string())?;
    let data = SweepData::new(&x, &y, &[], &[]).map_err(|e| e.to_string())?;
    let mut replay = Replay::new(&forest, &data, &[], lam).map_err(|e| e.to_string())?;
    let mut learner = ExactRidge::new(delta2);
    learner.init(&replay.context()).map_err(|e| e.to_string())?;
    let events = replay.event_count();
    let mut rng = stream_rng(4, 9);
    let mut check: Vec<usize> = (0..10).map(|_| rng.random_range(0..=events)).collect();
    check.sort_unstable();
    let mut worst_ll: f64 = 0.0;
    loop {
        let c = replay.interval();
        if check.binary_search(&c).is_ok() {
            let ll = learner.log_marginal_likelihood().unwrap();
            let (direct, _) = FeatureIndexer::build_features(&forest, replay.lifetime(), &x).map_err(|e| e.to_string())?;
            let oracle = dual_evidence(&rows_of(&direct, 0..x.len()), &y, delta2);
            worst_ll = worst_ll.max((ll - oracle).abs() / oracle.abs());
        }
        match replay.step().map_err(|e| e.to_string())? {
            Some(d) => learner.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?,
            None => break,
        }
    }
    // from-scratch fit at Λ, matched to the sweep's columns by cell
    let (direct, _) = FeatureIndexer::build_features(&forest, lam, &x).map_err(|e| e.to_string())?;
    let cols = direct.live_columns();
    let w_direct = dense_ridge(&rows_of(&direct, 0..x.len()), &y, &cols, delta2);
    let by_cell: HashMap<(usize, usize), f64> = cols
        .iter()
        .zip(&w_direct)
        .map(|(&c, &w)| ((direct.column(c).tree, direct.column(c).node.0), w))
        .collect();
    let state = learner.state();
    let idx = replay.indexer();
    let (mut inc, mut oracle) = (Vec::new(), Vec::new());
    for (c, w) in state.weights() {
        let rec = idx.column(c);
        inc.push(w);
        oracle.push(by_cell.get(&(rec.tree, rec.node.0)).copied().unwrap_or(0.0));
    }
    let wr = rel_diff(&inc, &oracle);
    if inc.len() != cols.len() {
        return Err(format!("column sets differ: {} vs {}", inc.len(), cols.len()));
    }
    if wr <= 1e-8 && worst_ll <= 1e-8 {
        Ok(format!("{events} events, C={}; weight error {wr:.1e}, ℒ error {worst_ll:.1e}", inc.len()))
    } else {
        Err(format!("weight error {wr:.1e}, ℒ error {worst_ll:.1e} (limit 1e-8)"))
    }
}

/// The sweep spans several decades of lifetime, so the step size decays
/// over a horizon much longer than one epoch.
const WIDTH_RECOVERY_SGD: SgdConfig = SgdConfig {
    eta0: 0.1,
    t0: Some(50_000.0),
    epochs_per_decade: 20.0,
};

fn criterion_5() -> Outcome {
    let mut hits = 0;
    let mut found = Vec::new();
    for seed in 0..5u64 {
        let ds = synthetic_laplace(700, 2, 10.0, 0.1, 500 + seed).map_err(|e| e.to_string())?;
        let (train, val) = ds.split_at(500);
        let mut forest = Forest::sample_on_points(&train.x, 50, 100.0, seed).map_err(|e| e.to_string())?;
        let data = SweepData::new(&train.x, &train.y, &val.x, &val.y).map_err(|e| e.to_string())?;
        let trace = run_sweep(&mut forest, &data, 100.0, &SweepConfig::sgd(1e-4, WIDTH_RECOVERY_SGD, seed)).map_err(|e| e.to_string())?;
        let (lam, _) = select_lifetime(&trace, Criterion::ValidationError).map_err(|e| e.to_string())?;
        hits += (1.0..=100.0).contains(&lam) as usize;
        found.push(format!("{lam:.1}"));
    }
    let msg = format!("λ̂ per seed [{}], {hits}/5 within [1, 100]", found.join(", "));
    if hits >= 4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let x = uniform_points(300, 2, 6);
    let y = smooth_targets(&x, 0.2, 6);
    let (lam, delta2, m) = (6.0, 1e-4, 10);
    let mut forest = Forest::sample_on_points(&x[..1], m, lam, 6).map_err(|e| e.to_string())?;
    let mut online = FeatureIndexer::new(m, lam);
    let mut state = RidgeState::fit(&[], &[], &[], delta2).map_err(|e| e.to_string())?;
    let mut created = 0;
    for (p, &t) in x.iter().zip(&y) {
        let (phi, k) = online.extend_and_add(&mut forest, p).map_err(|e| e.to_string())?;
        let fresh: Vec<_> = phi
            .entries()
            .iter()
            .filter(|(c, _)| !state.has_column(*c))
            .map(|&(c, _)| (c, Vec::new()))
            .collect();
        if fresh.len() != k {
            return Err(format!("indexer reported {k} new columns, solver saw {}", fresh.len()));
        }
        created += k;
        state.append_columns(&fresh).map_err(|e| e.to_string())?;
        state.rank1_data_update(phi.entries(), t).map_err(|e| e.to_string())?;
    }
    let (batch, _) = FeatureIndexer::build_features(&forest, lam, &x).map_err(|e| e.to_string())?;
    let fit = RidgeState::fit(&rows_of(&batch, 0..x.len()), &y, &batch.live_columns(), delta2).map_err(|e| e.to_string())?;
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (c, w) in state.weights() {
        let rec = online.column(c);
        let bc = batch
            .column_of(rec.tree, rec.node)
            .ok_or_else(|| format!("online column {c:?} has no batch counterpart"))?;
        a.push(w);
        b.push(fit.weight(bc).unwrap());
    }
    if a.len() != batch.column_count() {
        return Err(format!("column counts differ: {} vs {}", a.len(), batch.column_count()));
    }
    let err = rel_diff(&a, &b);
    if err <= 1e-8 {
        Ok(format!("{created} columns created online; weight error {err:.1e}, {} guard rebuilds", state.rebuild_count()))
    } else {
        Err(format!("weight error {err:.1e} exceeds 1e-8"))
    }
}

/// Truncated Gamma(2, scale) prior on `[0, Λ]`.
struct GammaPrior {
    scale: f64,
    upper: f64,
}

impl GammaPrior {
    fn raw_cdf(&self, l: f64) -> f64 {
        let u = l / self.scale;
        1.0 - (-u).exp() * (1.0 + u)
    }

    fn pdf(&self, l: f64) -> f64 {
        let u = l / self.scale;
        u * (-u).exp() / self.scale / self.raw_cdf(self.upper)
    }
}

impl PriorCdf for GammaPrior {
    fn cdf(&self, l: f64) -> f64 {
        (self.raw_cdf(l.clamp(0.0, self.upper)) / self.raw_cdf(self.upper)).clamp(0.0, 1.0)
    }
}

fn criterion_7() -> Outcome {
    let x = uniform_points(40, 2, 7);
    let y = smooth_targets(&x, 0.3, 7);
    let (lam, delta2) = (12.0, 0.05);
    let mut forest = Forest::sample_on_points(&x, 3, lam, 7).map_err(|e| e.to_string())?;
    let data = SweepData::new(&x, &y, &[], &[]).map_err(|e| e.to_string())?;
    let trace = run_sweep(&mut forest, &data, lam, &SweepConfig::exact(delta2)).map_err(|e| e.to_string())?;
    let prior = GammaPrior { scale: 3.0, upper: lam };
    let post = posterior_over_lambda(&trace, &prior).map_err(|e| e.to_string())?;
    let sum: f64 = post.coefficients().iter().sum();

    // Gauss–Legendre quadrature of prior density × evidence, with the
    // evidence recomputed from scratch at every node.
    const GL: [(f64, f64); 5] = [
        (0.0, 0.568_888_888_888_888_9),
        (-0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (0.538_469_310_105_683, 0.478_628_670_499_366_5),
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let nodes_total = 10_000.0;
    let mut log_mass = Vec::with_capacity(post.len());
    let mut nodes = 0usize;
    for c in 0..post.len() {
        let (a, b) = post.interval(c);
        let panels = ((nodes_total / 5.0) * (b - a) / lam).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        let mut terms = Vec::new();
        for p in 0..panels {
            let mid = a + (p as f64 + 0.5) * h;
            for (t, w) in GL {
                let l = mid + 0.5 * h * t;
                let (idx, _) = FeatureIndexer::build_features(&forest, l, &x).map_err(|e| e.to_string())?;
                let ev = dual_evidence(&rows_of(&idx, 0..x.len()), &y, delta2);
                terms.push(ev + (0.5 * h * w * prior.pdf(l)).ln());
                nodes += 1;
            }
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        log_mass.push(m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln());
    }
    let m = log_mass.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = log_mass.iter().map(|l| (l - m).exp()).sum();
    let tv: f64 = 0.5
        * log_mass
            .iter()
            .zip(post.coefficients())
            .map(|(l, k)| ((l - m).exp() / z - k).abs())
            .sum::<f64>();
    if (sum - 1.0).abs() <= 1e-10 && tv <= 1e-6 {
        Ok(format!("{} intervals, {nodes} quadrature nodes; |Σk−1| = {:.1e}, TV = {tv:.1e}", post.len(), (sum - 1.0).abs()))
    } else {
        Err(format!("|Σk−1| = {:.1e}, TV = {tv:.1e}", (sum - 1.0).abs()))
    }
}

fn criterion_8() -> Outcome {
    // M = 1, γ² = δ²: identical predictions on train and validation rows
    let ds = synthetic_laplace(160, 2, 10.0, 0.1, 8).map_err(|e| e.to_string())?;
    let (train, val) = ds.split_at(100);
    let delta2 = 1e-4;
    let mut forest = Forest::sample_on_points(&train.x, 1, 30.0, 8).map_err(|e| e.to_string())?;
    forest.extend_to_points(&val.x).map_err(|e| e.to_string())?;
    let data = SweepData::new(&train.x, &train.y, &val.x, &val.y).map_err(|e| e.to_string())?;
    let mut replay = Replay::new(&forest, &data, &[], 30.0).map_err(|e| e.to_string())?;
    let mut kernel = ExactRidge::new(delta2);
    let mut trees = ForestLearner::new(delta2).map_err(|e| e.to_string())?;
    kernel.init(&replay.context()).map_err(|e| e.to_string())?;
    trees.init(&replay.context()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    loop {
        let ctx = replay.context();
        for r in 0..ctx.indexer.point_count() {
            let phi = ctx.row_features(r);
            let d = (kernel.predict(&phi).unwrap() - trees.predict(&phi).unwrap()).abs();
            worst = worst.max(d);
        }
        match replay.step().map_err(|e| e.to_string())? {
            Some(d) => {
                kernel.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?;
                trees.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?;
            }
            None => break,
        }
    }
    if worst > 1e-10 {
        return Err(format!("M=1 prediction gap {worst:.1e} exceeds 1e-10"));
    }

    // M = 50: training RMSE dominance at every event, Jensen per point
    let train50 = &train.x[..60];
    let y50 = &train.y[..60];
    let lam = 10.0;
    let forest = Forest::sample_on_points(train50, 50, lam, 9).map_err(|e| e.to_string())?;
    let data = SweepData::new(train50, y50, &[], &[]).map_err(|e| e.to_string())?;
    let mut replay = Replay::new(&forest, &data, &[], lam).map_err(|e| e.to_string())?;
    let mut kernel = ExactRidge::new(delta2);
    let mut trees = ForestLearner::new(delta2).map_err(|e| e.to_string())?;
    kernel.init(&replay.context()).map_err(|e| e.to_string())?;
    trees.init(&replay.context()).map_err(|e| e.to_string())?;
    let mut events = 0;
    let mut jensen = true;
    let mut margin = f64::INFINITY;
    loop {
        let ctx = replay.context();
        let k_rmse = kernel.state().train_rmse();
        let mut sse = 0.0;
        for (r, t) in y50.iter().enumerate() {
            let e = t - trees.predict(&ctx.row_features(r)).unwrap();
            sse += e * e;
        }
        let f_rmse = (sse / y50.len() as f64).sqrt();
        margin = margin.min(f_rmse - k_rmse);
        if k_rmse > f_rmse {
            return Err(format!("λ = {}: kernel train RMSE {k_rmse:.6} > forest {f_rmse:.6}", replay.lifetime()));
        }
        let cells: Vec<Vec<ColumnId>> = (0..y50.len()).map(|r| ctx.indexer.row_columns(r).to_vec()).collect();
        let kw: HashMap<ColumnId, f64> = kernel.state().weights().into_iter().collect();
        let report = compare_objectives(&kw, &trees.model(), &cells, y50, delta2).map_err(|e| e.to_string())?;
        jensen &= report.jensen_holds;
        match replay.step().map_err(|e| e.to_string())? {
            Some(d) => {
                events += 1;
                kernel.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?;
                trees.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?;
            }
            None => break,
        }
    }
    if !jensen {
        return Err("Jensen loss ordering violated".into());
    }
    Ok(format!(
        "M=1 gap {worst:.1e}; M=50 dominance at all {} event times (min margin {margin:.2e}); Jensen holds",
        events + 1
    ))
}

fn criterion_9() -> Outcome {
    let x = uniform_points(100, 3, 9);
    let y = smooth_targets(&x, 0.5, 9);
    let (lam, delta2, m) = (2.0, 0.1, 5);
    let forest = Forest::sample_on_points(&x, m, lam, 9).map_err(|e| e.to_string())?;
    let (idx, _) = FeatureIndexer::build_features(&forest, lam, &x).map_err(|e| e.to_string())?;
    let rows = rows_of(&idx, 0..x.len());
    let exact = RidgeState::fit(&rows, &y, &idx.live_columns(), delta2).map_err(|e| e.to_string())?;
    let target = exact.objective();
    let cfg = SgdConfig {
        eta0: 0.3,
        t0: Some(10.0 * x.len() as f64),
        ..SgdConfig::default()
    };
    let mut model = SgdModel::new(idx.column_id_bound(), delta2, x.len(), &cfg).map_err(|e| e.to_string())?;
    let mut rng = stream_rng(9, 10);
    let mut reached = None;
    for epoch in 1..=200 {
        model.epoch(&rows, &y, &mut rng).map_err(|e| e.to_string())?;
        let obj = model.objective(&rows, &y, delta2).map_err(|e| e.to_string())?;
        if reached.is_none() && (obj - target) / target <= 1e-3 {
            reached = Some(epoch);
        }
    }
    let final_gap = (model.objective(&rows, &y, delta2).unwrap() - target) / target;
    let Some(epoch) = reached else {
        return Err(format!("relative objective gap after 200 epochs is {final_gap:.2e}"));
    };

    // prediction preservation across cuts during an SGD sweep
    let data = SweepData::new(&x, &y, &[], &[]).map_err(|e| e.to_string())?;
    let mut replay = Replay::new(&forest, &data, &[], lam).map_err(|e| e.to_string())?;
    let mut learner = SgdLearner::new(delta2, cfg, 9);
    learner.init(&replay.context()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    loop {
        let (from, to) = (replay.lifetime(), replay.next_time());
        learner.advance(from, to, &replay.context()).map_err(|e| e.to_string())?;
        let before: Vec<f64> = (0..x.len())
            .map(|r| learner.predict(&replay.context().row_features(r)).unwrap())
            .collect();
        match replay.step().map_err(|e| e.to_string())? {
            Some(d) => learner.on_cut(&d, &replay.context()).map_err(|e| e.to_string())?,
            None => break,
        }
        for (r, b) in before.iter().enumerate() {
            let a = learner.predict(&replay.context().row_features(r)).unwrap();
            worst = worst.max((a - b).abs());
        }
    }
    if worst > 1e-12 {
        return Err(format!("reinit changed a training prediction by {worst:.1e}"));
    }
    Ok(format!(
        "within 1e-3 after {epoch} epochs (final gap {final_gap:.1e}); reinit prediction change {worst:.1e}"
    ))
}

/// Runs only when the CPU regression data are supplied as
/// `MONDRIAN_CPU_DATASET=train_file[:test_file]` (csv or libsvm).
fn criterion_10() -> Option<Outcome> {
    let paths = std::env::var("MONDRIAN_CPU_DATASET").ok()?;
    Some((|| {
        let mut parts = paths.splitn(2, ':');
        let train = Dataset::read(std::path::Path::new(parts.next().unwrap())).map_err(|e| e.to_string())?;
        let test = match parts.next() {
            Some(p) => Dataset::read(std::path::Path::new(p)).map_err(|e| e.to_string())?,
            None => {
                let n = train.len() * 8 / 9;
                let (a, b) = train.split_at(n);
                return run_cpu(&a, &b);
            }
        };
        run_cpu(&train, &test)
    })())
}

fn run_cpu(train: &Dataset, test: &Dataset) -> Outcome {
    // terminal lifetime in units of the data's linear dimension
    let extent = AxisAlignedBox::bounding(train.x.iter().map(|p| p.as_slice()))
        .ok_or("empty training set")?
        .linear_dimension();
    let terminal = 100.0 / extent;
    let mut forest = Forest::sample_on_points(&train.x, 50, terminal, 10).map_err(|e| e.to_string())?;
    let data = SweepData::new(&train.x, &train.y, &test.x, &test.y).map_err(|e| e.to_string())?;
    forest.extend_to_points(&test.x).map_err(|e| e.to_string())?;
    let mut l = SgdLearner::new(1e-4, SgdConfig::default(), 10);
    let trace = run_sweep_with(&forest, &data, terminal, &mut [&mut l]).map_err(|e| e.to_string())?.remove(0);
    let (lam, rmse) = select_lifetime(&trace, Criterion::ValidationError).map_err(|e| e.to_string())?;
    let scale = (test.y.iter().map(|v| v * v).sum::<f64>() / test.len() as f64).sqrt();
    let rel = rmse / scale;
    if rel.is_finite() {
        Ok(format!("protocol ran: best relative test error {:.2}% at λ = {lam:.2e}", 100.0 * rel))
    } else {
        Err("non-finite test error".into())
    }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let out = match (out, limit) {
        (Ok(m), Some(l)) if took > l => Err(format!("{m}; but took {took:.1?} > {l:?}")),
        (o, _) => o,
    };
    (out, took)
}

fn main() {
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    let criteria: Vec<(&str, Option<Duration>, fn() -> Outcome)> = vec![
        ("1 Mondrian-Laplace link", min(2), criterion_1),
        ("2 convergence in M", min(5), criterion_2),
        ("3 cell-count tail bound", None, criterion_3),
        ("4 sweep exactness", None, criterion_4),
        ("5 width recovery", min(5), criterion_5),
        ("6 online equals batch", None, criterion_6),
        ("7 Bayesian posterior", None, criterion_7),
        ("8 forest link", None, criterion_8),
        ("9 SGD consistency", None, criterion_9),
    ];
    let mut failed = 0;
    for (name, limit, f) in criteria {
        let (out, took) = timed(limit, f);
        match out {
            Ok(m) => println!("PASS  criterion {name}: {m} [{took:.1?}]"),
            Err(m) => {
                failed += 1;
                println!("FAIL  criterion {name}: {m} [{took:.1?}]");
            }
        }
    }
    match criterion_10() {
        None => println!("SKIP  criterion 10 CPU dataset: set MONDRIAN_CPU_DATASET to run; criteria 1-9 stand in"),
        Some(Ok(m)) => println!("PASS  criterion 10 CPU dataset: {m}"),
        Some(Err(m)) => {
            failed += 1;
            println!("FAIL  criterion 10 CPU dataset: {m}");
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
