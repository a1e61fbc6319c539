//! Reproducible parameter sweeps over independent solves.
//!
//! Grid points run in parallel and per-point failures are recorded in the
//! table rather than aborting the sweep. Selection-style sweeps (rating
//! scale, group index) pool every candidate partition found anywhere on the
//! grid and re-select per grid point from the common pool, which makes the
//! comparative-statics monotonicities exact instead of
//! solver-tolerance-approximate.

use crate::cost::{CostKind, MonitoringCostSpec};
use crate::env::{DeviationCosts, ProductEnv, ZEnv};
use crate::error::{Error, Result};
use crate::exec;
use crate::partition::{
    group_vs_individual_index, optimize_multitask, scale_candidates, select_scale,
    MultitaskSolution, ScaleCandidate,
};
use crate::utility::Utility;
use serde::Serialize;

/// Runs `f` once per grid value; failures land in the table, not the Result.
pub fn sweep<T, F>(grid: &[f64], f: F) -> Vec<(f64, Result<T>)>
where
    T: Send,
    F: Fn(f64) -> Result<T> + Sync + Send,
{
    exec::map_indexed(grid.len(), |i| (grid[i], f(grid[i])))
}

/// One row of a rating-scale sweep over mu.
#[derive(Debug, Clone, Serialize)]
pub struct ScaleSweepRow {
    pub mu: f64,
    pub n_star: usize,
    pub expected_wage: f64,
    /// Information content H (bits for entropy cost, f(N) for rating scale).
    pub information: f64,
    pub total_cost: f64,
    pub cutoffs: Vec<f64>,
}

/// Optimal rating scale along a mu-grid.
///
/// Candidates are optimized per (mu, N), pooled, and the per-mu winner is
/// selected from the pool (ties toward the smaller scale).
pub fn scale_sweep(
    env: &ZEnv,
    u: &Utility,
    c: f64,
    spec: &MonitoringCostSpec,
    mu_grid: &[f64],
) -> Result<Vec<ScaleSweepRow>> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidArgument("empty mu grid".into()));
    }
    let rating = matches!(spec.kind, CostKind::RatingScale { .. });
    let mut pool: Vec<ScaleCandidate> = Vec::new();
    if rating {
        // the inner optimization ignores mu entirely: one pool serves all
        pool = scale_candidates(env, u, c, spec)?;
    } else {
        let per_mu = exec::map_indexed(mu_grid.len(), |i| {
            let at = MonitoringCostSpec {
                kind: spec.kind.clone(),
                mu: mu_grid[i],
                k_max: spec.k_max,
            };
            scale_candidates(env, u, c, &at)
        });
        for cands in per_mu {
            pool.extend(cands?);
        }
    }
    Ok(mu_grid
        .iter()
        .map(|&mu| {
            let chosen = select_scale(&pool, mu).expect("nonempty pool");
            ScaleSweepRow {
                mu,
                n_star: chosen.n_cells,
                expected_wage: chosen.incentive_cost,
                information: chosen.information,
                total_cost: chosen.incentive_cost + mu * chosen.information,
                cutoffs: chosen.cutoffs.clone(),
            }
        })
        .collect())
}

/// One row of a group-vs-individual sweep over mu.
#[derive(Debug, Clone, Serialize)]
pub struct GroupIndexRow {
    pub mu: f64,
    pub index: f64,
    pub group_total: f64,
    pub individual_total: f64,
}

/// The cost ratio I along a mu-grid.
///
/// Under a rating-scale cost the optimal line and cutoffs do not depend on
/// mu, so both sides are solved once and the ratio follows by cost
/// accounting. Under other costs each grid point is solved independently and
/// the (incentive, information) candidates are pooled across the grid.
pub fn group_index_sweep(
    env2: &ProductEnv,
    utils: (&Utility, &Utility),
    costs: (f64, f64),
    spec: &MonitoringCostSpec,
    mu_grid: &[f64],
) -> Result<Vec<GroupIndexRow>> {
    if mu_grid.is_empty() {
        return Err(Error::InvalidArgument("empty mu grid".into()));
    }
    let spec_at = |mu: f64| MonitoringCostSpec {
        kind: spec.kind.clone(),
        mu,
        k_max: spec.k_max,
    };
    let rating = matches!(spec.kind, CostKind::RatingScale { .. });
    let solve_mus: Vec<f64> = if rating { vec![0.0] } else { mu_grid.to_vec() };
    let solved = exec::map_indexed(solve_mus.len(), |i| {
        group_vs_individual_index(env2, utils, costs, &spec_at(solve_mus[i]))
    });
    // pool (incentive, information) pairs per side
    let mut group_pool: Vec<(f64, f64)> = Vec::new();
    let mut indiv_pool: Vec<(f64, f64)> = Vec::new();
    for r in solved {
        let (_, g, ind) = r?;
        group_pool.push((g.incentive_cost, g.monitoring_cost));
        indiv_pool.push((ind.incentive_cost, ind.monitoring_cost));
    }
    let best_at = |pool: &[(f64, f64)], mu: f64| -> f64 {
        pool.iter()
            .map(|&(w, h)| w + mu * h)
            .fold(f64::INFINITY, f64::min)
    };
    Ok(mu_grid
        .iter()
        .map(|&mu| {
            let g = best_at(&group_pool, mu);
            let ind = best_at(&indiv_pool, mu);
            GroupIndexRow {
                mu,
                index: g / ind,
                group_total: g,
                individual_total: ind,
            }
        })
        .collect())
}

/// One row of a multi-task sweep over the first task's noise variance;
/// infeasible points carry their error.
#[derive(Debug, Clone)]
pub struct MultitaskSweepRow {
    pub sigma1_sq: f64,
    pub outcome: Result<MultitaskSolution>,
}

/// The assessment-weight ratio R along a sigma1^2 grid.
pub fn multitask_sweep(
    sigma1_grid: &[f64],
    sigma2_sq: f64,
    costs: DeviationCosts,
    u: &Utility,
    spec: &MonitoringCostSpec,
    n_cells: usize,
    resolution: usize,
) -> Vec<MultitaskSweepRow> {
    exec::map_indexed(sigma1_grid.len(), |i| {
        let outcome = crate::env::multi_task_env(sigma1_grid[i], sigma2_sq, costs)
            .map(|e| e.with_resolution(resolution))
            .and_then(|env| optimize_multitask(&env, u, spec, n_cells));
        MultitaskSweepRow {
            sigma1_sq: sigma1_grid[i],
            outcome,
        }
    })
}
