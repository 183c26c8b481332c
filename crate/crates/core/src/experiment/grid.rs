use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{cell_seed_base, derive_seed, Axis, ExperimentConfig};
use crate::recovery::recovery_success_with;
use crate::sensing::{
    assemble_observed, generate_bounded_noise, generate_matrix, generate_sparse_signal, SensingEnsemble, SparseProblem,
};
use crate::topology::{ErasureParams, Topology};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "p,y_axis_value,successes,trials,probability,stderr";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCell {
    pub p_index: usize,
    pub y_index: usize,
    pub p: f64,
    pub y: usize,
    pub successes: usize,
    pub trials: usize,
    pub seed_base: u64,
}

impl GridCell {
    pub fn probability(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }

    /// Binomial standard error `sqrt(p (1 - p) / n)` of the estimate.
    pub fn stderr(&self) -> f64 {
        let p = self.probability();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }
}

/// Success counts over `p_values x y_values`, stored p-major.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentGrid {
    pub axis: Axis,
    pub p_values: Vec<f64>,
    pub y_values: Vec<usize>,
    pub cells: Vec<GridCell>,
}

impl ExperimentGrid {
    pub fn cell(&self, i: usize, j: usize) -> &GridCell {
        &self.cells[i * self.y_values.len() + j]
    }

    /// Cells of the `i`-th p value, in increasing y.
    pub fn column(&self, i: usize) -> &[GridCell] {
        let n = self.y_values.len();
        &self.cells[i * n..(i + 1) * n]
    }

    /// Success probabilities as a `p x y` matrix.
    pub fn probabilities(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.p_values.len(), self.y_values.len(), |i, j| {
            self.cell(i, j).probability()
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * self.cells.len());
        out.push_str(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                c.p,
                c.y,
                c.successes,
                c.trials,
                c.probability(),
                c.stderr()
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Reads a grid CSV as written by [`ExperimentGrid::to_csv`]. Rows must be
/// p-major with the same y values in every p block. The axis is not stored
/// in the CSV and is taken from `axis`; seeds are not recovered.
pub fn parse_grid_csv(text: &str, axis: Axis) -> Result<ExperimentGrid> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some(h) if h.trim() == CSV_HEADER => {}
        _ => return Err(Error::config(format!("grid CSV must start with '{CSV_HEADER}'"))),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(Error::config(format!("grid CSV row {}: expected 6 fields", n + 1)));
        }
        let bad = |what: &str| Error::config(format!("grid CSV row {}: bad {what}", n + 1));
        let p: f64 = f[0].parse().map_err(|_| bad("p"))?;
        let y: usize = f[1].parse().map_err(|_| bad("y_axis_value"))?;
        let successes: usize = f[2].parse().map_err(|_| bad("successes"))?;
        let trials: usize = f[3].parse().map_err(|_| bad("trials"))?;
        if trials == 0 || successes > trials {
            return Err(bad("counts"));
        }
        rows.push((p, y, successes, trials));
    }
    let mut p_values: Vec<f64> = Vec::new();
    for r in &rows {
        if p_values.last() != Some(&r.0) {
            p_values.push(r.0);
        }
    }
    if rows.is_empty() || rows.len() % p_values.len() != 0 {
        return Err(Error::config("grid CSV is not a complete p x y grid"));
    }
    let ny = rows.len() / p_values.len();
    let y_values: Vec<usize> = rows[..ny].iter().map(|r| r.1).collect();
    let mut cells = Vec::with_capacity(rows.len());
    for (k, &(p, y, successes, trials)) in rows.iter().enumerate() {
        let (i, j) = (k / ny, k % ny);
        if p != p_values[i] || y != y_values[j] {
            return Err(Error::config("grid CSV is not a complete p-major grid"));
        }
        cells.push(GridCell {
            p_index: i,
            y_index: j,
            p,
            y,
            successes,
            trials,
            seed_base: 0,
        });
    }
    Ok(ExperimentGrid {
        axis,
        p_values,
        y_values,
        cells,
    })
}

/// One trial with an explicit seed. Draw order: matrix (row-major),
/// support, amplitudes, noise, channels. An empty observation set is a
/// failure.
pub fn run_trial(
    config: &ExperimentConfig,
    topology: &Topology,
    params: &ErasureParams<f64>,
    seed: u64,
) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = topology.measurements();
    let ensemble = SensingEnsemble::new(config.ensemble, m, config.n);
    let a: DMatrix<f64> = generate_matrix(&ensemble, &mut rng);
    let signal = generate_sparse_signal(config.n, config.s, config.amplitude, &mut rng)?;
    let noise = generate_bounded_noise(m, config.sigma, config.noise, &mut rng)?;
    let outcome = topology.sample_observation(params, &mut rng);
    if outcome.is_empty() {
        return Ok(false);
    }
    let problem = SparseProblem {
        signal,
        sigma: config.sigma,
        noise,
    };
    let system = assemble_observed(&a, &problem, &outcome, config.normalization)?;
    let x_hat = config.solver.solve(&system.a, &system.y, config.s)?;
    Ok(recovery_success_with(problem.x(), &x_hat, config.threshold))
}

fn cell_shell(config: &ExperimentConfig, i: usize, j: usize) -> GridCell {
    GridCell {
        p_index: i,
        y_index: j,
        p: config.p_grid[i],
        y: config.template.values[j],
        successes: 0,
        trials: config.trials,
        seed_base: cell_seed_base(config.seed, i, j),
    }
}

fn count_cell(config: &ExperimentConfig, i: usize, j: usize) -> Result<usize> {
    let topology = config.template.build(config.template.values[j])?;
    let params = config.params(config.p_grid[i])?;
    let mut successes = 0;
    for t in 0..config.trials {
        let seed = derive_seed(config.seed, i as u64, j as u64, t as u64);
        successes += run_trial(config, &topology, &params, seed)? as usize;
    }
    Ok(successes)
}

/// Recomputes a single cell in isolation.
pub fn run_cell(config: &ExperimentConfig, i: usize, j: usize) -> Result<GridCell> {
    config.validate()?;
    if i >= config.p_grid.len() || j >= config.template.values.len() {
        return Err(Error::invalid(format!("cell ({i}, {j}) is outside the grid")));
    }
    let mut cell = cell_shell(config, i, j);
    cell.successes = count_cell(config, i, j)?;
    Ok(cell)
}

/// Runs every trial of every cell. Work is split per trial; counts are
/// integers merged per cell, so the output is identical for any worker
/// count.
pub fn run_grid(config: &ExperimentConfig) -> Result<ExperimentGrid> {
    config.validate()?;
    let work = || -> Result<ExperimentGrid> {
        let ny = config.template.values.len();
        let np = config.p_grid.len();
        let mut setups = Vec::with_capacity(np * ny);
        for i in 0..np {
            for j in 0..ny {
                setups.push((
                    config.template.build(config.template.values[j])?,
                    config.params(config.p_grid[i])?,
                ));
            }
        }
        let trials = config.trials;
        let outcomes: Vec<bool> = (0..np * ny * trials)
            .into_par_iter()
            .map(|k| {
                let (cell, t) = (k / trials, k % trials);
                let (i, j) = (cell / ny, cell % ny);
                let (topology, params) = &setups[cell];
                let seed = derive_seed(config.seed, i as u64, j as u64, t as u64);
                run_trial(config, topology, params, seed)
            })
            .collect::<Result<_>>()?;
        let cells = (0..np * ny)
            .map(|cell| {
                let mut c = cell_shell(config, cell / ny, cell % ny);
                c.successes = outcomes[cell * trials..(cell + 1) * trials]
                    .iter()
                    .filter(|&&ok| ok)
                    .count();
                c
            })
            .collect();
        Ok(ExperimentGrid {
            axis: config.template.axis,
            p_values: config.p_grid.clone(),
            y_values: config.template.values.clone(),
            cells,
        })
    };
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    }
}
