//! Browser bindings for the demo page in `www/`. Each export returns a flat
//! `Float64Array`; the layouts are documented per function.

use mondrian_kernel::data::synthetic_laplace;
use mondrian_kernel::kernels::laplace;
use mondrian_kernel::mondrian::{AxisAlignedBox, Forest, MondrianTree};
use mondrian_kernel::sweep::{run_sweep, SweepConfig, SweepData};
use mondrian_kernel::Result;
use wasm_bindgen::prelude::*;

/// Cuts of one Mondrian sample on the unit square up to `lifetime`, as
/// `[x0, y0, x1, y1, time]` per cut segment.
pub fn partition_segments(lifetime: f64, seed: u64) -> Result<Vec<f64>> {
    let tree = MondrianTree::sample(&AxisAlignedBox::unit(2), lifetime, seed)?;
    let mut out = Vec::new();
    for (node, cut) in tree.cuts_until(lifetime) {
        let cell = tree.node(node).extent();
        let (lo, hi) = (cell.lower(), cell.upper());
        let seg = if cut.dimension == 0 {
            [cut.location, lo[1], cut.location, hi[1]]
        } else {
            [lo[0], cut.location, hi[0], cut.location]
        };
        out.extend(seg);
        out.push(cut.time);
    }
    Ok(out)
}

/// Kernel values between `(ax, ay)` and a `resolution × resolution` grid of
/// cell centres over the unit square, row-major from the bottom row: the
/// Mondrian estimate with `trees` trees, followed by the exact Laplace kernel.
pub fn kernel_grid(trees: usize, lifetime: f64, seed: u64, ax: f64, ay: f64, resolution: usize) -> Result<Vec<f64>> {
    let forest = Forest::sample_on_box(&AxisAlignedBox::unit(2), trees, lifetime, seed)?;
    let anchor = [ax.clamp(0.0, 1.0), ay.clamp(0.0, 1.0)];
    let anchor_cells = forest
        .trees()
        .iter()
        .map(|t| t.cell_lookup(&anchor, lifetime))
        .collect::<Result<Vec<_>>>()?;
    let n = resolution.max(1);
    let mut approx = Vec::with_capacity(n * n);
    let mut exact = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let p = [(j as f64 + 0.5) / n as f64, (i as f64 + 0.5) / n as f64];
            let mut shared = 0;
            for (t, &c) in forest.trees().iter().zip(&anchor_cells) {
                shared += (t.cell_lookup(&p, lifetime)? == c) as usize;
            }
            approx.push(shared as f64 / trees as f64);
            exact.push(laplace(&anchor, &p, lifetime)?);
        }
    }
    approx.extend(exact);
    Ok(approx)
}

/// Exact-ridge sweep over all lifetimes up to `terminal` on synthetic 2-D
/// data drawn with ground-truth lifetime `true_lifetime`. Returns
/// `[lambda, validation_rmse, log_marginal_likelihood]` per interval.
pub fn lifetime_sweep(
    n_train: usize,
    n_val: usize,
    true_lifetime: f64,
    trees: usize,
    terminal: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let data = synthetic_laplace(n_train + n_val, 2, true_lifetime, 0.1, seed)?;
    let (train, val) = data.split_at(n_train);
    let mut forest = Forest::sample_on_points(&train.x, trees, terminal, seed)?;
    let sweep_data = SweepData::new(&train.x, &train.y, &val.x, &val.y)?;
    let trace = run_sweep(&mut forest, &sweep_data, terminal, &SweepConfig::exact(1e-4))?;
    Ok(trace
        .rows
        .iter()
        .flat_map(|r| [r.lambda, r.val_rmse, r.log_marginal_likelihood])
        .collect())
}

fn js<T>(r: Result<T>) -> std::result::Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = partitionSegments)]
pub fn partition_segments_js(lifetime: f64, seed: u32) -> std::result::Result<Vec<f64>, JsValue> {
    js(partition_segments(lifetime, seed as u64))
}

#[wasm_bindgen(js_name = kernelGrid)]
pub fn kernel_grid_js(
    trees: usize,
    lifetime: f64,
    seed: u32,
    ax: f64,
    ay: f64,
    resolution: usize,
) -> std::result::Result<Vec<f64>, JsValue> {
    js(kernel_grid(trees, lifetime, seed as u64, ax, ay, resolution))
}

#[wasm_bindgen(js_name = lifetimeSweep)]
pub fn lifetime_sweep_js(
    n_train: usize,
    n_val: usize,
    true_lifetime: f64,
    trees: usize,
    terminal: f64,
    seed: u32,
) -> std::result::Result<Vec<f64>, JsValue> {
    js(lifetime_sweep(n_train, n_val, true_lifetime, trees, terminal, seed as u64))
}
