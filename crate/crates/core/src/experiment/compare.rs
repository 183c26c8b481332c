use rayon::prelude::*;
use serde::Serialize;

use super::grid::{run_grid, run_trial, ExperimentGrid, GridCell};
use super::{derive_seed, splitmix64, Axis, ExperimentConfig, TopologyKind, TopologyTemplate};
use crate::topology::{ErasureParams, Topology};
use crate::{Error, Result};

/// A drop in success probability between neighbouring cells larger than
/// the allowed number of combined standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendViolation {
    /// `"p"` or `"y"`: the axis along which success should not decrease.
    pub along: &'static str,
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub drop: f64,
    pub allowed: f64,
}

fn combined_se(a: &GridCell, b: &GridCell) -> f64 {
    (a.stderr().powi(2) + b.stderr().powi(2)).sqrt()
}

/// Non-decreasing checks along both axes of `grid`, each neighbouring pair
/// allowed to dip by `sigmas` combined standard errors.
pub fn monotonicity_violations(grid: &ExperimentGrid, sigmas: f64) -> Vec<TrendViolation> {
    let (np, ny) = (grid.p_values.len(), grid.y_values.len());
    let mut out = Vec::new();
    let mut check = |along, a: &GridCell, b: &GridCell| {
        let drop = a.probability() - b.probability();
        let allowed = sigmas * combined_se(a, b);
        if drop > allowed {
            out.push(TrendViolation {
                along,
                from: (a.p_index, a.y_index),
                to: (b.p_index, b.y_index),
                drop,
                allowed,
            });
        }
    };
    for i in 0..np {
        for j in 0..ny {
            if i + 1 < np {
                check("p", grid.cell(i, j), grid.cell(i + 1, j));
            }
            if j + 1 < ny {
                check("y", grid.cell(i, j), grid.cell(i, j + 1));
            }
        }
    }
    out
}

/// Pooled two-proportion z statistic; 0 when both samples are all
/// successes or all failures.
pub fn two_proportion_z(s1: usize, n1: usize, s2: usize, n2: usize) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1f + n2f);
    let var = pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f);
    if var <= 0.0 {
        return 0.0;
    }
    (s1 as f64 / n1f - s2 as f64 / n2f) / var.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub cells: usize,
    pub max_abs_z: f64,
    /// `(p, y, z)` for every cell with `|z| > sigmas`.
    pub violations: Vec<(f64, usize, f64)>,
}

/// Cell-by-cell two-proportion test between grids of the same shape.
pub fn equivalence_test(a: &ExperimentGrid, b: &ExperimentGrid, sigmas: f64) -> Result<EquivalenceReport> {
    if a.p_values != b.p_values || a.cells.len() != b.cells.len() {
        return Err(Error::invalid("grids differ in shape"));
    }
    let mut max_abs_z: f64 = 0.0;
    let mut violations = Vec::new();
    for (x, y) in a.cells.iter().zip(&b.cells) {
        let z = two_proportion_z(x.successes, x.trials, y.successes, y.trials);
        max_abs_z = max_abs_z.max(z.abs());
        if z.abs() > sigmas {
            violations.push((x.p, x.y, z));
        }
    }
    Ok(EquivalenceReport {
        cells: a.cells.len(),
        max_abs_z,
        violations,
    })
}

/// Star, tree and serial networks with the same number of sensors `R K`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComparisonSpec {
    /// Solver, signal and trial settings; its topology template is ignored.
    pub base: ExperimentConfig,
    pub p_grid: Vec<f64>,
    /// `(R, K)` layouts; the star uses `m = R K`.
    pub layouts: Vec<(usize, usize)>,
    /// Relay observability of the tree.
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stat {
    pub successes: usize,
    pub trials: usize,
    pub probability: f64,
    pub stderr: f64,
}

impl Stat {
    fn new(successes: usize, trials: usize) -> Self {
        let probability = successes as f64 / trials as f64;
        Self {
            successes,
            trials,
            probability,
            stderr: (probability * (1.0 - probability) / trials as f64).sqrt(),
        }
    }

    /// `self >= other` up to three combined standard errors.
    fn dominates(&self, other: &Stat) -> bool {
        other.probability - self.probability <= 3.0 * (self.stderr.powi(2) + other.stderr.powi(2)).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub p: f64,
    pub r: usize,
    pub k: usize,
    pub m: usize,
    pub star: Stat,
    pub tree: Stat,
    pub serial: Stat,
    pub star_ge_tree: bool,
    pub star_ge_serial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub q: f64,
    pub rows: Vec<ComparisonRow>,
    pub all_hold: bool,
}

/// Success count of one cell. Each topology draws from its own stream
/// (`splitmix64(seed ^ stream)` as master), so the three estimates are
/// independent.
fn count(
    config: &ExperimentConfig,
    topology: &Topology,
    params: &ErasureParams<f64>,
    stream: u64,
    i: usize,
    j: usize,
) -> Result<usize> {
    let master = splitmix64(config.seed ^ stream);
    let hits: Vec<bool> = (0..config.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(
                config,
                topology,
                params,
                derive_seed(master, i as u64, j as u64, t as u64),
            )
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().filter(|&h| h).count())
}

/// Tabulates star vs tree vs serial success at equal sensor counts and
/// checks that the star is never worse beyond three standard errors.
pub fn compare_topologies(spec: &ComparisonSpec) -> Result<ComparisonReport> {
    let mut base = spec.base.clone();
    base.template.q = spec.q;
    base.p_grid = spec.p_grid.clone();
    base.validate()?;
    if spec.layouts.is_empty() {
        return Err(Error::config("comparison needs at least one (R, K) layout"));
    }
    let run = || -> Result<ComparisonReport> {
        let mut rows = Vec::new();
        for (i, &p) in spec.p_grid.iter().enumerate() {
            let params = ErasureParams::new(p, spec.q)?;
            for (j, &(r, k)) in spec.layouts.iter().enumerate() {
                let m = r * k;
                let star = Stat::new(count(&base, &Topology::star(m)?, &params, 1, i, j)?, base.trials);
                let tree = Stat::new(count(&base, &Topology::tree(r, k)?, &params, 2, i, j)?, base.trials);
                let serial = Stat::new(
                    count(&base, &Topology::serial_star(r, k)?, &params, 3, i, j)?,
                    base.trials,
                );
                rows.push(ComparisonRow {
                    p,
                    r,
                    k,
                    m,
                    star_ge_tree: star.dominates(&tree),
                    star_ge_serial: star.dominates(&serial),
                    star,
                    tree,
                    serial,
                });
            }
        }
        let all_hold = rows.iter().all(|r| r.star_ge_tree && r.star_ge_serial);
        Ok(ComparisonReport {
            q: spec.q,
            rows,
            all_hold,
        })
    };
    match base.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    }
}

/// K sweep at fixed R for the success ceiling of a tree or serial network.
#[derive(Clone, Debug, PartialEq)]
pub struct CeilingSpec {
    pub base: ExperimentConfig,
    pub kind: TopologyKind,
    pub r: usize,
    pub k_values: Vec<usize>,
    pub p: f64,
    pub q: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CeilingReport {
    /// `1 - (1 - q)^R` (tree), `1 - (1 - p)^R` (serial), 1 (star).
    pub ceiling: f64,
    pub cells: Vec<GridCell>,
    /// Pooled success over the upper half of the K values.
    pub plateau: f64,
    pub plateau_stderr: f64,
    /// Largest `(estimate - ceiling) / se`, with `se` the binomial standard
    /// error at the ceiling.
    pub max_excess_sigmas: f64,
    /// Some cell exceeds the ceiling by more than three standard errors.
    pub exceeds: bool,
}

pub fn analytic_ceiling(kind: TopologyKind, r: usize, p: f64, q: f64) -> f64 {
    match kind {
        TopologyKind::Star => 1.0,
        TopologyKind::Tree => 1.0 - (1.0 - q).powi(r as i32),
        TopologyKind::Serial => 1.0 - (1.0 - p).powi(r as i32),
    }
}

pub fn ceiling_probe(spec: &CeilingSpec) -> Result<CeilingReport> {
    let template = match spec.kind {
        TopologyKind::Tree => TopologyTemplate::tree(Axis::K, spec.k_values.clone(), spec.r, spec.q),
        TopologyKind::Serial => TopologyTemplate::serial(Axis::K, spec.k_values.clone(), spec.r),
        TopologyKind::Star => TopologyTemplate::star(spec.k_values.iter().map(|k| k * spec.r).collect()),
    };
    let mut config = spec.base.clone();
    config.template = template;
    config.p_grid = vec![spec.p];
    let grid = run_grid(&config)?;
    let ceiling = analytic_ceiling(spec.kind, spec.r, spec.p, spec.q);
    let cells = grid.cells;
    let upper = &cells[cells.len() / 2..];
    let (succ, tot) = upper.iter().fold((0, 0), |(s, n), c| (s + c.successes, n + c.trials));
    let plateau = succ as f64 / tot as f64;
    let plateau_stderr = (plateau * (1.0 - plateau) / tot as f64).sqrt();
    let mut max_excess_sigmas = f64::NEG_INFINITY;
    for c in &cells {
        let se = (ceiling * (1.0 - ceiling) / c.trials as f64).sqrt();
        let excess = c.probability() - ceiling;
        let z = if se > 0.0 {
            excess / se
        } else if excess > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        max_excess_sigmas = max_excess_sigmas.max(z);
    }
    Ok(CeilingReport {
        ceiling,
        exceeds: max_excess_sigmas > 3.0,
        cells,
        plateau,
        plateau_stderr,
        max_excess_sigmas,
    })
}
