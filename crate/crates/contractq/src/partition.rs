//! Search over monitoring technologies: scalar cutoffs, separating lines,
//! per-agent product grids, and weighted-score directions for multiple
//! deviations. Each optimizer minimizes incentive cost plus mu-weighted
//! monitoring cost.
//!
//! The outer problems are nonconvex, so every optimizer runs a deterministic
//! multistart: structured starting points plus seeded random ones, cyclic
//! coordinate descent with golden-section line searches, and a Nelder–Mead
//! polish. Discrete-grid environments are handled exactly by enumerating the
//! finitely many cut positions. Starts are placed by quantiles of the score
//! distribution — the score range is tail-dominated for normal signals, so
//! range-fraction grids would waste nearly all resolution.

use crate::cost::{CostKind, MonitoringCostSpec};
use crate::env::{CellSummary, Line, MultiTaskEnv, ProductEnv, ZEnv};
use crate::error::{Error, Result};
use crate::exec;
use crate::search::{coordinate_descent, golden_min, nelder_mead};
use crate::utility::Utility;
use crate::wages::{
    solve_ll_multiaction_directed, solve_ll_single, DualCertificate, WageSchedule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Proposals must keep every cell at least this heavy.
pub const MIN_PROPOSAL_MASS: f64 = 1e-9;

/// Number of deterministic multistart seeds.
pub const MULTISTART: usize = 16;

/// Team or tournament, read from solved wage co-movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ContractForm {
    Team,
    Tournament,
}

/// A bi-partitional monitoring technology: one line in (z1, z2)-space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiPartitionLine {
    pub normal: [f64; 2],
    pub offset: f64,
    pub form: ContractForm,
}

/// The monitoring technology of a solved contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PartitionSpec {
    /// Right-half-open intervals of the scalar score.
    Cutoffs { cutoffs: Vec<f64> },
    /// Two half-planes.
    Line(BiPartitionLine),
    /// Product of per-agent cutoff partitions.
    Product {
        cutoffs1: Vec<f64>,
        cutoffs2: Vec<f64>,
    },
    /// Level sets of the weighted deviation score.
    WeightedScore {
        weights: [f64; 3],
        cutoffs: Vec<f64>,
    },
}

/// A solved contract: partition, wages, duals, and the cost split.
#[derive(Debug, Clone, Serialize)]
pub struct ContractSolution {
    pub partition: PartitionSpec,
    pub cells: Vec<CellSummary>,
    /// One schedule per agent (a single entry outside the two-agent model).
    pub wages: Vec<WageSchedule>,
    pub duals: Vec<DualCertificate>,
    pub incentive_cost: f64,
    /// Unweighted information content H of the signal.
    pub monitoring_cost: f64,
    pub mu: f64,
    pub total_cost: f64,
}

impl ContractSolution {
    /// Cost-accounting and ordering invariants of a returned solution:
    /// total = incentive + mu * H, strictly increasing z along wages
    /// (strict MLRP), zero lowest wage, and pairwise distinct wages.
    pub fn validate(&self) -> Result<()> {
        let recomputed = self.incentive_cost + self.mu * self.monitoring_cost;
        if (recomputed - self.total_cost).abs() > 1e-9 * (1.0 + self.total_cost.abs()) {
            return Err(Error::InvalidArgument(format!(
                "total {} != incentive {} + mu*H {}",
                self.total_cost,
                self.incentive_cost,
                self.mu * self.monitoring_cost
            )));
        }
        for (agent, ws) in self.wages.iter().enumerate() {
            let score = |i: usize| -> f64 {
                match &self.partition {
                    PartitionSpec::WeightedScore { weights, .. } => {
                        let z = &self.cells[i].z;
                        weights[0] * z[0] + weights[1] * z[1] + weights[2] * z[2]
                    }
                    _ => self.cells[i].z[agent.min(self.cells[i].z.len() - 1)],
                }
            };
            let mut order: Vec<usize> = (0..ws.wages.len()).collect();
            order.sort_by(|&a, &b| ws.wages[a].total_cmp(&ws.wages[b]));
            if ws.wages[order[0]].abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "agent {agent}: lowest wage {} != 0",
                    ws.wages[order[0]]
                )));
            }
            for w in order.windows(2) {
                // skip product-partition repeats along the other agent's axis
                let same_wage = (ws.wages[w[0]] - ws.wages[w[1]]).abs() <= 1e-8;
                let same_score = (score(w[0]) - score(w[1])).abs() <= 1e-8;
                if same_wage && same_score {
                    continue;
                }
                if same_wage {
                    return Err(Error::InvalidArgument(format!(
                        "agent {agent}: cells {} and {} share wage {}",
                        w[0], w[1], ws.wages[w[0]]
                    )));
                }
                if score(w[1]) - score(w[0]) <= 1e-8 {
                    return Err(Error::InvalidArgument(format!(
                        "agent {agent}: z not strictly increasing with wages ({} vs {})",
                        score(w[0]),
                        score(w[1])
                    )));
                }
            }
        }
        Ok(())
    }
}

fn masses(cells: &[CellSummary]) -> Vec<f64> {
    cells.iter().map(|c| c.mass).collect()
}

// ---------------------------------------------------------------------------
// scalar cutoffs
// ---------------------------------------------------------------------------

struct CutoffObjective<'a> {
    env: &'a ZEnv,
    u: &'a Utility,
    c: f64,
    spec: &'a MonitoringCostSpec,
}

impl CutoffObjective<'_> {
    /// Total cost of the partition at sorted quantile levels, or None when
    /// the proposal is degenerate or infeasible.
    fn eval_quantiles(&self, qs: &[f64]) -> Option<f64> {
        let mut prev = 0.0;
        for &q in qs {
            if q - prev < MIN_PROPOSAL_MASS || q >= 1.0 {
                return None;
            }
            prev = q;
        }
        if 1.0 - prev < MIN_PROPOSAL_MASS {
            return None;
        }
        let cutoffs: Vec<f64> = qs.iter().map(|&q| self.env.quantile(q)).collect();
        self.eval_cutoffs(&cutoffs).map(|(total, ..)| total)
    }

    fn eval_cutoffs(&self, cutoffs: &[f64]) -> Option<(f64, f64, f64)> {
        if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
            return None;
        }
        let cells = self.env.partition_moments(cutoffs).ok()?;
        if cells.iter().any(|c| c.0 < MIN_PROPOSAL_MASS) {
            return None;
        }
        let summaries: Vec<CellSummary> = cells
            .iter()
            .map(|&(m, z)| CellSummary::scalar(m, z))
            .collect();
        let (ws, _) = solve_ll_single(&summaries, self.c, self.u).ok()?;
        let h = self
            .spec
            .evaluate(&cells.iter().map(|c| c.0).collect::<Vec<_>>())
            .ok()?;
        Some((ws.expected_wage + self.spec.mu * h, ws.expected_wage, h))
    }
}

/// Builds the full solution at given cutoffs.
fn cutoff_solution(
    env: &ZEnv,
    u: &Utility,
    c: f64,
    spec: &MonitoringCostSpec,
    cutoffs: Vec<f64>,
) -> Result<ContractSolution> {
    let cells: Vec<CellSummary> = env
        .partition_moments(&cutoffs)?
        .into_iter()
        .map(|(m, z)| CellSummary::scalar(m, z))
        .collect();
    let (ws, dual) = solve_ll_single(&cells, c, u)?;
    let h = spec.evaluate(&masses(&cells))?;
    let incentive = ws.expected_wage;
    Ok(ContractSolution {
        partition: PartitionSpec::Cutoffs { cutoffs },
        total_cost: incentive + spec.mu * h,
        incentive_cost: incentive,
        monitoring_cost: h,
        mu: spec.mu,
        cells,
        wages: vec![ws],
        duals: vec![dual],
    })
}

/// Optimal N-cell cutoff partition of a scalar environment.
///
/// Discrete grids are solved exactly by enumerating cut positions between
/// atoms; continuous environments run the multistart descent in quantile
/// space.
pub fn optimize_cutoffs_single(
    env: &ZEnv,
    u: &Utility,
    c: f64,
    n_cells: usize,
    spec: &MonitoringCostSpec,
) -> Result<ContractSolution> {
    if n_cells < 2 {
        return Err(Error::NoIncentivePossible);
    }
    if n_cells > spec.k_max {
        return Err(Error::CellBudgetExceeded {
            cells: n_cells,
            k: spec.k_max,
        });
    }
    let obj = CutoffObjective { env, u, c, spec };

    if let Some(atoms) = env.atoms() {
        return optimize_cutoffs_discrete(env, &obj, atoms, n_cells);
    }

    let dim = n_cells - 1;
    let starts = quantile_starts(dim, MULTISTART, 0x5eed_c0de, env.cdf(0.0));
    let results = exec::map_indexed(starts.len(), |s| {
        let mut q = starts[s].clone();
        refine_quantiles(&obj, &mut q)
    });
    let best = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().map(|(v, q)| (*v, i, q)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((best_val, _, qs)) = best else {
        return Err(Error::AllCandidatesInfeasible(
            "every cutoff start failed the wage solve".into(),
        ));
    };
    let (_, qs) = zero_wage_repair(&obj, best_val, qs.clone());
    let cutoffs: Vec<f64> = qs.iter().map(|&q| env.quantile(q)).collect();
    cutoff_solution(env, u, c, spec, cutoffs)
}

/// Deterministic quantile-space starting points: an equispaced grid, two
/// grids concentrated in the paid (z > 0) region — the objective is flat in
/// cutoffs between zero-wage cells, so starts there see no gradient — then
/// seeded sorted uniforms.
fn quantile_starts(dim: usize, count: usize, seed: u64, q_zero: f64) -> Vec<Vec<f64>> {
    let mut starts = Vec::with_capacity(count + 2);
    let equi: Vec<f64> = (1..=dim).map(|k| k as f64 / (dim + 1) as f64).collect();
    starts.push(equi);
    if q_zero > 0.05 && q_zero < 0.95 {
        for base in [q_zero, 0.5 * (1.0 + q_zero)] {
            let paid: Vec<f64> = (1..=dim)
                .map(|k| base + (1.0 - base) * k as f64 / (dim + 1) as f64)
                .collect();
            starts.push(paid);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while starts.len() < count {
        let mut q: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.02..0.98)).collect();
        q.sort_by(f64::total_cmp);
        if q.windows(2).all(|w| w[1] - w[0] > 1e-3) {
            starts.push(q);
        }
    }
    starts
}

/// Escapes the flat plateau where two or more cells sit at the wage floor:
/// merging adjacent zero-wage cells and re-splitting the top cell strictly
/// improves any such configuration, so the move is accepted only when the
/// cost drops.
fn zero_wage_repair(
    obj: &CutoffObjective,
    mut best: f64,
    mut qs: Vec<f64>,
) -> (f64, Vec<f64>) {
    for _ in 0..qs.len() {
        let cutoffs: Vec<f64> = qs.iter().map(|&q| obj.env.quantile(q)).collect();
        let Ok(cells) = obj.env.partition_moments(&cutoffs) else {
            break;
        };
        let summaries: Vec<CellSummary> = cells
            .iter()
            .map(|&(m, z)| CellSummary::scalar(m, z))
            .collect();
        let Ok((ws, _)) = solve_ll_single(&summaries, obj.c, obj.u) else {
            break;
        };
        // first interior cutoff separating two zero-wage cells
        let trap = (0..qs.len()).find(|&k| ws.wages[k] == 0.0 && ws.wages[k + 1] == 0.0);
        let Some(k) = trap else {
            break;
        };
        let mut trial = qs.clone();
        trial.remove(k);
        // re-split the top cell at its mass midpoint
        let top_lo = trial.last().copied().unwrap_or(0.0);
        trial.push(0.5 * (top_lo + 1.0));
        trial.sort_by(f64::total_cmp);
        match refine_quantiles(obj, &mut trial) {
            Some((val, refined)) if val < best => {
                best = val;
                qs = refined;
            }
            _ => break,
        }
    }
    (best, qs)
}

/// Coordinate descent, Nelder–Mead in log-increment space, and a final
/// descent pass; returns (total cost, quantiles).
fn refine_quantiles(obj: &CutoffObjective, q: &mut Vec<f64>) -> Option<(f64, Vec<f64>)> {
    let dim = q.len();
    let inf = f64::INFINITY;
    let eval = |q: &[f64]| obj.eval_quantiles(q).unwrap_or(inf);

    let cd = |q: &mut Vec<f64>| {
        coordinate_descent(
            q,
            |x| obj.eval_quantiles(x).unwrap_or(inf),
            |i, x| {
                let lo = if i == 0 { 0.0 } else { x[i - 1] };
                let hi = if i + 1 == dim { 1.0 } else { x[i + 1] };
                (lo + 1e-7, hi - 1e-7)
            },
            8,
            1e-11,
        )
    };
    let mut best = cd(q);
    if !best.is_finite() {
        return None;
    }

    // log-increment reparametrization keeps proposals sorted inside the simplex
    let to_logs = |q: &[f64]| -> Vec<f64> {
        let mut prev = 0.0;
        let mut gaps: Vec<f64> = q
            .iter()
            .map(|&v| {
                let g = (v - prev).max(1e-12);
                prev = v;
                g
            })
            .collect();
        let last = (1.0 - prev).max(1e-12);
        gaps.iter_mut().for_each(|g| *g = (*g / last).ln());
        gaps
    };
    let from_logs = |x: &[f64]| -> Vec<f64> {
        let mut total = 1.0;
        let gaps: Vec<f64> = x
            .iter()
            .map(|&l| {
                let g = l.exp();
                total += g;
                g
            })
            .collect();
        let mut cum = 0.0;
        gaps.iter()
            .map(|g| {
                cum += g / total;
                cum
            })
            .collect()
    };
    let r = nelder_mead(
        |x| eval(&from_logs(x)),
        &to_logs(q),
        0.3,
        600 * dim,
        1e-13,
        1e-9,
    );
    if r.value < best {
        *q = from_logs(&r.x);
        best = r.value;
    }
    let after = cd(q);
    if after.is_finite() && after < best {
        best = after;
    }
    best.is_finite().then(|| (best, q.clone()))
}

/// Exact search on a discrete grid: cut positions live between consecutive
/// distinct atom scores, so N-cell partitions are finite in number.
fn optimize_cutoffs_discrete(
    env: &ZEnv,
    obj: &CutoffObjective,
    atoms: &[(f64, f64)],
    n_cells: usize,
) -> Result<ContractSolution> {
    let mut gaps = Vec::new();
    for w in atoms.windows(2) {
        if w[1].0 > w[0].0 + 1e-15 {
            gaps.push(0.5 * (w[0].0 + w[1].0));
        }
    }
    let dim = n_cells - 1;
    if gaps.len() < dim {
        return Err(Error::InstanceTooLarge(format!(
            "only {} cut positions for {} cells",
            gaps.len(),
            n_cells
        )));
    }
    let combos = combinations(gaps.len(), dim);
    if combos.is_empty() {
        return Err(Error::InstanceTooLarge("no cut combinations".into()));
    }
    let scored = exec::map_indexed(combos.len(), |i| {
        let cutoffs: Vec<f64> = combos[i].iter().map(|&g| gaps[g]).collect();
        obj.eval_cutoffs(&cutoffs).map(|(total, ..)| total)
    });
    let best = scored
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|t| (t, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((_, idx)) = best else {
        return Err(Error::AllCandidatesInfeasible(
            "every discrete cut combination infeasible".into(),
        ));
    };
    let cutoffs: Vec<f64> = combos[idx].iter().map(|&g| gaps[g]).collect();
    cutoff_solution(env, obj.u, obj.c, obj.spec, cutoffs)
}

/// All k-subsets of 0..n in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k == 0 || k > n {
        return out;
    }
    loop {
        out.push(idx.clone());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

// ---------------------------------------------------------------------------
// rating-scale selection
// ---------------------------------------------------------------------------

/// Incentive cost and information content of one optimized candidate scale.
#[derive(Debug, Clone)]
pub struct ScaleCandidate {
    pub n_cells: usize,
    pub incentive_cost: f64,
    pub information: f64,
    pub cutoffs: Vec<f64>,
}

/// Optimizes every scale N in 2..=K and returns the candidates.
/// Under a rating-scale cost the inner optimization ignores mu (the
/// monitoring term is constant given N); under entropy or custom costs each
/// N is optimized at `spec.mu`.
pub fn scale_candidates(
    env: &ZEnv,
    u: &Utility,
    c: f64,
    spec: &MonitoringCostSpec,
) -> Result<Vec<ScaleCandidate>> {
    let rating = matches!(spec.kind, CostKind::RatingScale { .. });
    let inner_spec = if rating {
        MonitoringCostSpec {
            kind: spec.kind.clone(),
            mu: 0.0,
            k_max: spec.k_max,
        }
    } else {
        spec.clone()
    };
    let scales: Vec<usize> = (2..=spec.k_max).collect();
    let sols = exec::map_indexed(scales.len(), |i| {
        optimize_cutoffs_single(env, u, c, scales[i], &inner_spec).ok()
    });
    let mut out = Vec::new();
    for sol in sols.into_iter().flatten() {
        let info = spec.evaluate(&masses(&sol.cells))?;
        let cutoffs = match sol.partition {
            PartitionSpec::Cutoffs { cutoffs } => cutoffs,
            _ => unreachable!("cutoff optimizer returns cutoff partitions"),
        };
        out.push(ScaleCandidate {
            n_cells: sol.cells.len(),
            incentive_cost: sol.incentive_cost,
            information: info,
            cutoffs,
        });
    }
    if out.is_empty() {
        return Err(Error::AllCandidatesInfeasible(
            "no feasible scale in 2..=K".into(),
        ));
    }
    Ok(out)
}

/// Selects the best candidate at price mu; ties break toward smaller N.
pub fn select_scale(candidates: &[ScaleCandidate], mu: f64) -> Option<&ScaleCandidate> {
    candidates
        .iter()
        .min_by(|a, b| {
            let ta = a.incentive_cost + mu * a.information;
            let tb = b.incentive_cost + mu * b.information;
            ta.total_cmp(&tb).then(a.n_cells.cmp(&b.n_cells))
        })
}

/// Optimal rating scale N* and the solved contract at that scale.
pub fn optimize_rating_scale(
    env: &ZEnv,
    u: &Utility,
    c: f64,
    spec: &MonitoringCostSpec,
) -> Result<(usize, ContractSolution)> {
    let candidates = scale_candidates(env, u, c, spec)?;
    let chosen = select_scale(&candidates, spec.mu).expect("candidates nonempty");
    let sol = cutoff_solution(env, u, c, spec, chosen.cutoffs.clone())?;
    Ok((chosen.n_cells, sol))
}

// ---------------------------------------------------------------------------
// bi-partitions
// ---------------------------------------------------------------------------

struct LineObjective<'a> {
    env2: &'a ProductEnv,
    utils: (&'a Utility, &'a Utility),
    costs: (f64, f64),
    spec: &'a MonitoringCostSpec,
}

impl LineObjective<'_> {
    fn eval(&self, theta: f64, t: f64) -> Option<(f64, [CellSummary; 2])> {
        let line = Line::new([theta.cos(), theta.sin()], t).ok()?;
        let cells = self.env2.halfplane_moments(&line).ok()?;
        if cells.iter().any(|c| c.mass < MIN_PROPOSAL_MASS) {
            return None;
        }
        let total = self.cost_at(&cells)?;
        Some((total, cells))
    }

    fn cost_at(&self, cells: &[CellSummary; 2]) -> Option<f64> {
        let mut incentive = 0.0;
        for (agent, (c, u)) in [
            (0usize, (self.costs.0, self.utils.0)),
            (1, (self.costs.1, self.utils.1)),
        ] {
            let projected: Vec<CellSummary> = cells
                .iter()
                .map(|cell| CellSummary::scalar(cell.mass, cell.z[agent]))
                .collect();
            let (ws, _) = solve_ll_single(&projected, c, u).ok()?;
            incentive += ws.expected_wage;
        }
        let h = self
            .spec
            .evaluate(&[cells[0].mass, cells[1].mass])
            .ok()?;
        Some(incentive + self.spec.mu * h)
    }

    fn score_range(&self, theta: f64) -> (f64, f64) {
        let (a, b) = (theta.cos(), theta.sin());
        let (l1, h1) = self.env2.agent1.support();
        let (l2, h2) = self.env2.agent2.support();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z1 in [l1, h1] {
            for z2 in [l2, h2] {
                let s = a * z1 + b * z2;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        (lo, hi)
    }
}

/// Minimal-cost two-cell contract over separating lines, classified as team
/// or tournament from the solved wages.
pub fn optimize_bipartition(
    env2: &ProductEnv,
    utils: (&Utility, &Utility),
    costs: (f64, f64),
    spec: &MonitoringCostSpec,
) -> Result<ContractSolution> {
    let obj = LineObjective {
        env2,
        utils,
        costs,
        spec,
    };
    const ANGLES: usize = 64;
    let discrete = env2.agent1.is_discrete() && env2.agent2.is_discrete();

    let mut angles: Vec<f64> = (0..ANGLES)
        .map(|k| k as f64 / ANGLES as f64 * std::f64::consts::TAU)
        .collect();
    if discrete {
        // directions normal to atom differences realize every separable split
        let a1: Vec<f64> = env2.agent1.atoms().unwrap().iter().map(|a| a.0).collect();
        let a2: Vec<f64> = env2.agent2.atoms().unwrap().iter().map(|a| a.0).collect();
        let mut pts = Vec::new();
        for &x in &a1 {
            for &y in &a2 {
                pts.push((x, y));
            }
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
                if dx.abs() + dy.abs() < 1e-12 {
                    continue;
                }
                let base = (-dy).atan2(dx) + std::f64::consts::FRAC_PI_2;
                for eps in [-1e-4, 1e-4] {
                    angles.push(base + eps);
                    angles.push(base + std::f64::consts::PI + eps);
                }
            }
        }
    }

    let per_angle = exec::map_indexed(angles.len(), |i| {
        let theta = angles[i];
        let (lo, hi) = obj.score_range(theta);
        if !(hi > lo) {
            return None;
        }
        let mut best: Option<(f64, f64)> = None; // (cost, t)
        if discrete {
            // finitely many distinct splits: every atom-score midpoint
            let mut scores = Vec::new();
            let (a, b) = (theta.cos(), theta.sin());
            for &(z1, _) in env2.agent1.atoms().unwrap() {
                for &(z2, _) in env2.agent2.atoms().unwrap() {
                    scores.push(a * z1 + b * z2);
                }
            }
            scores.sort_by(f64::total_cmp);
            scores.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
            for w in scores.windows(2) {
                let t = 0.5 * (w[0] + w[1]);
                if let Some((cost, _)) = obj.eval(theta, t) {
                    if best.is_none_or(|b| cost < b.0) {
                        best = Some((cost, t));
                    }
                }
            }
        } else {
            let span = hi - lo;
            let mut coarse: Option<(f64, f64)> = None;
            for k in 1..32 {
                let t = lo + span * k as f64 / 32.0;
                if let Some((cost, _)) = obj.eval(theta, t) {
                    if coarse.is_none_or(|b| cost < b.0) {
                        coarse = Some((cost, t));
                    }
                }
            }
            if let Some((_, t0)) = coarse {
                let window = span / 32.0;
                let (t, cost) = golden_min(
                    |t| obj.eval(theta, t).map_or(f64::INFINITY, |(c, _)| c),
                    t0 - window,
                    t0 + window,
                    1e-11,
                );
                best = Some((cost, t));
            }
        }
        best.map(|(cost, t)| (cost, theta, t))
    });

    let mut candidates: Vec<(f64, f64, f64)> = per_angle.into_iter().flatten().collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    if candidates.is_empty() {
        return Err(Error::AllCandidatesInfeasible(
            "no line yields a feasible two-cell contract".into(),
        ));
    }

    let mut best = candidates[0];
    if !discrete {
        for &(_, theta, t) in candidates.iter().take(4) {
            let r = nelder_mead(
                |x| obj.eval(x[0], x[1]).map_or(f64::INFINITY, |(c, _)| c),
                &[theta, t],
                0.05,
                800,
                1e-13,
                1e-10,
            );
            if r.value < best.0 {
                best = (r.value, r.x[0], r.x[1]);
            }
        }
    }

    let (_, theta, t) = best;
    let line = Line::new([theta.cos(), theta.sin()], t)?;
    let cells_arr = env2.halfplane_moments(&line)?;
    let mut wages = Vec::new();
    let mut duals = Vec::new();
    let mut incentive = 0.0;
    let mut paid_cell = [0usize; 2];
    for (agent, (c, u)) in [(0usize, (costs.0, utils.0)), (1, (costs.1, utils.1))] {
        let projected: Vec<CellSummary> = cells_arr
            .iter()
            .map(|cell| CellSummary::scalar(cell.mass, cell.z[agent]))
            .collect();
        let (ws, dual) = solve_ll_single(&projected, c, u)?;
        incentive += ws.expected_wage;
        paid_cell[agent] = if ws.wages[1] > ws.wages[0] { 1 } else { 0 };
        wages.push(ws);
        duals.push(dual);
    }
    let form = if paid_cell[0] == paid_cell[1] {
        ContractForm::Team
    } else {
        ContractForm::Tournament
    };
    let cells = cells_arr.to_vec();
    let h = spec.evaluate(&masses(&cells))?;
    Ok(ContractSolution {
        partition: PartitionSpec::Line(BiPartitionLine {
            normal: line.normal,
            offset: line.offset,
            form,
        }),
        total_cost: incentive + spec.mu * h,
        incentive_cost: incentive,
        monitoring_cost: h,
        mu: spec.mu,
        cells,
        wages,
        duals,
    })
}

// ---------------------------------------------------------------------------
// individual (product) contracts
// ---------------------------------------------------------------------------

/// Per-agent cutoff contracts on a product environment. Incentive costs
/// decouple across agents by independence; the monitoring cost is evaluated
/// on the joint product masses (for the entropy cost this equals the sum of
/// the per-agent entropies, so per-agent optimization is exact).
pub fn optimize_individual(
    env2: &ProductEnv,
    utils: (&Utility, &Utility),
    costs: (f64, f64),
    spec: &MonitoringCostSpec,
    scales: (usize, usize),
) -> Result<ContractSolution> {
    let cells_total = scales.0 * scales.1;
    if cells_total > spec.k_max {
        return Err(Error::CellBudgetExceeded {
            cells: cells_total,
            k: spec.k_max,
        });
    }
    // per-agent inner cost: entropy decomposes exactly; rating-scale and
    // custom costs are constant given the scale, so optimize incentives only
    let inner_spec = |n: usize| -> Result<MonitoringCostSpec> {
        match spec.kind {
            CostKind::EntropyBits => MonitoringCostSpec::entropy_bits(spec.mu, n.max(2)),
            _ => MonitoringCostSpec::linear_rating_scale(0.0, n.max(2)),
        }
    };
    let sol1 = optimize_cutoffs_single(
        &env2.agent1,
        utils.0,
        costs.0,
        scales.0,
        &inner_spec(scales.0)?,
    )?;
    let sol2 = optimize_cutoffs_single(
        &env2.agent2,
        utils.1,
        costs.1,
        scales.1,
        &inner_spec(scales.1)?,
    )?;

    let cut1 = match &sol1.partition {
        PartitionSpec::Cutoffs { cutoffs } => cutoffs.clone(),
        _ => unreachable!(),
    };
    let cut2 = match &sol2.partition {
        PartitionSpec::Cutoffs { cutoffs } => cutoffs.clone(),
        _ => unreachable!(),
    };

    // joint cells in row-major order (agent 1 index varies slowest)
    let mut cells = Vec::with_capacity(cells_total);
    let mut w1 = Vec::with_capacity(cells_total);
    let mut w2 = Vec::with_capacity(cells_total);
    for (j, c1) in sol1.cells.iter().enumerate() {
        for (k, c2) in sol2.cells.iter().enumerate() {
            cells.push(CellSummary {
                mass: c1.mass * c2.mass,
                z: vec![c1.z1(), c2.z1()],
            });
            w1.push(sol1.wages[0].wages[j]);
            w2.push(sol2.wages[0].wages[k]);
        }
    }
    let h = spec.evaluate(&masses(&cells))?;
    let incentive = sol1.incentive_cost + sol2.incentive_cost;
    let expected = |w: &[f64]| -> f64 {
        cells
            .iter()
            .zip(w)
            .map(|(cell, wage)| cell.mass * wage)
            .sum()
    };
    let wages = vec![
        WageSchedule {
            expected_wage: expected(&w1),
            wages: w1,
        },
        WageSchedule {
            expected_wage: expected(&w2),
            wages: w2,
        },
    ];
    let duals = vec![sol1.duals[0].clone(), sol2.duals[0].clone()];
    Ok(ContractSolution {
        partition: PartitionSpec::Product {
            cutoffs1: cut1,
            cutoffs2: cut2,
        },
        total_cost: incentive + spec.mu * h,
        incentive_cost: incentive,
        monitoring_cost: h,
        mu: spec.mu,
        cells,
        wages,
        duals,
    })
}

/// Group-vs-individual cost ratio I at `spec.mu`: bi-partition optimum
/// over individual optimum with two cells per agent. I < 1 says group
/// evaluation strictly dominates.
pub fn group_vs_individual_index(
    env2: &ProductEnv,
    utils: (&Utility, &Utility),
    costs: (f64, f64),
    spec: &MonitoringCostSpec,
) -> Result<(f64, ContractSolution, ContractSolution)> {
    let group = optimize_bipartition(env2, utils, costs, spec)?;
    let individual = optimize_individual(env2, utils, costs, spec, (2, 2))?;
    Ok((group.total_cost / individual.total_cost, group, individual))
}

// ---------------------------------------------------------------------------
// multi-task (weighted-score) contracts
// ---------------------------------------------------------------------------

/// A solved multi-task contract: the sorting direction on the nonnegative
/// unit sphere, the contract itself, the assessment-weight ratio
/// R = (l01 + l00)/(l10 + l00) from the dual certificate, and the angle
/// between the search direction and that dual.
#[derive(Debug, Clone, Serialize)]
pub struct MultitaskSolution {
    pub direction: [f64; 3],
    pub solution: ContractSolution,
    pub ratio: f64,
    pub consistency_angle: f64,
}

struct MultitaskObjective<'a> {
    env: &'a MultiTaskEnv,
    u: &'a Utility,
    spec: &'a MonitoringCostSpec,
    deltas: [f64; 3],
}

fn direction_from_angles(alpha: f64, beta: f64) -> [f64; 3] {
    [
        alpha.cos() * beta.cos(),
        alpha.cos() * beta.sin(),
        alpha.sin(),
    ]
}

impl MultitaskObjective<'_> {
    /// x = [alpha, beta, cutoffs...]; angles constrained to [0, pi/2].
    fn eval(&self, x: &[f64]) -> Option<f64> {
        let (alpha, beta) = (x[0], x[1]);
        const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
        if !(0.0..=HALF_PI).contains(&alpha) || !(0.0..=HALF_PI).contains(&beta) {
            return None;
        }
        let dir = direction_from_angles(alpha, beta);
        let mut cutoffs = x[2..].to_vec();
        cutoffs.sort_by(f64::total_cmp);
        if cutoffs.windows(2).any(|w| w[1] - w[0] < 1e-10) {
            return None;
        }
        let cells = self.env.zlambda_moments(dir, &cutoffs).ok()?;
        if cells.iter().any(|c| c.mass < MIN_PROPOSAL_MASS) {
            return None;
        }
        let (ws, _) =
            solve_ll_multiaction_directed(&cells, &self.deltas, self.u, Some(&dir)).ok()?;
        let h = self.spec.evaluate(&masses(&cells)).ok()?;
        Some(ws.expected_wage + self.spec.mu * h)
    }
}

/// Nested search for the multi-task model: outer over the direction on the
/// nonnegative unit sphere and the score cutoffs, inner multi-deviation wage
/// solve. The returned ratio R is read from the dual certificate at the
/// optimum, with the search direction used to resolve dual degeneracy.
pub fn optimize_multitask(
    env: &MultiTaskEnv,
    u: &Utility,
    spec: &MonitoringCostSpec,
    n_cells: usize,
) -> Result<MultitaskSolution> {
    if n_cells < 2 {
        return Err(Error::NoIncentivePossible);
    }
    if n_cells > spec.k_max {
        return Err(Error::CellBudgetExceeded {
            cells: n_cells,
            k: spec.k_max,
        });
    }
    let deltas = env.costs.deltas();
    let obj = MultitaskObjective {
        env,
        u,
        spec,
        deltas,
    };
    const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;
    let dim = 2 + (n_cells - 1);

    // structured direction starts plus seeded random ones
    let mut starts: Vec<Vec<f64>> = Vec::new();
    let angle_grid = [0.25 * HALF_PI, 0.6 * HALF_PI, 0.85 * HALF_PI];
    for &alpha in &angle_grid {
        for &beta in &[0.35 * HALF_PI, 0.65 * HALF_PI] {
            starts.push(vec![alpha, beta]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x0017_eed5);
    let qlevels: Vec<f64> = (1..n_cells)
        .map(|k| k as f64 / n_cells as f64)
        .collect();
    let mut full_starts = Vec::new();
    for s in &starts {
        let dir = direction_from_angles(s[0], s[1]);
        if let Ok(cuts) = quantile_cutoffs(env, dir, &qlevels) {
            let mut x = s.clone();
            x.extend(cuts);
            full_starts.push(x);
        }
    }
    while full_starts.len() < starts.len() + 2 {
        let alpha = rng.gen_range(0.05..HALF_PI - 0.05);
        let beta = rng.gen_range(0.05..HALF_PI - 0.05);
        let dir = direction_from_angles(alpha, beta);
        let qs: Vec<f64> = {
            let mut q: Vec<f64> = (1..n_cells)
                .map(|_| rng.gen_range(0.15..0.9))
                .collect();
            q.sort_by(f64::total_cmp);
            q
        };
        if let Ok(cuts) = quantile_cutoffs(env, dir, &qs) {
            let mut x = vec![alpha, beta];
            x.extend(cuts);
            full_starts.push(x);
        }
    }

    // coarse global scan for the two-cell case: the feasible pocket can be
    // tiny under tight deviation costs, and the scan also seeds the descent
    // with the best basins rather than trusting structured starts alone
    if n_cells == 2 {
        let mut scan = Vec::new();
        for ai in 1..12 {
            for bi in 1..12 {
                let alpha = ai as f64 / 12.0 * HALF_PI;
                let beta = bi as f64 / 12.0 * HALF_PI;
                let dir = direction_from_angles(alpha, beta);
                for qi in 1..20 {
                    let q = qi as f64 / 20.0;
                    if let Ok(cuts) = quantile_cutoffs(env, dir, &[q]) {
                        let mut x = vec![alpha, beta];
                        x.extend(cuts);
                        scan.push(x);
                    }
                }
            }
        }
        let vals = exec::map_indexed(scan.len(), |i| obj.eval(&scan[i]));
        let mut seeds: Vec<(f64, usize)> = vals
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|c| (c, i)))
            .collect();
        seeds.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, i) in seeds.iter().take(8) {
            full_starts.push(scan[i].clone());
        }
    }

    let refined = exec::map_indexed(full_starts.len(), |s| {
        let x0 = &full_starts[s];
        obj.eval(x0)?;
        let r = nelder_mead(
            |x| obj.eval(x).unwrap_or(f64::INFINITY),
            x0,
            0.08,
            300 * dim,
            1e-11,
            1e-7,
        );
        let mut x = r.x.clone();
        let mut best = r.value;
        let after = coordinate_descent(
            &mut x,
            |x| obj.eval(x).unwrap_or(f64::INFINITY),
            |i, xs| {
                if i < 2 {
                    (0.0, HALF_PI)
                } else {
                    let span = 0.2 * (1.0 + xs[i].abs());
                    (xs[i] - span, xs[i] + span)
                }
            },
            4,
            1e-11,
        );
        if after < best {
            best = after;
        }
        best.is_finite().then_some((best, x))
    });
    let best = refined
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().map(|(v, x)| (*v, i, x)))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let Some((_, _, x)) = best else {
        return Err(Error::AllCandidatesInfeasible(format!(
            "no (direction, cutoffs) pair deters all deviations {deltas:?}"
        )));
    };

    let dir = direction_from_angles(x[0], x[1]);
    let mut cutoffs = x[2..].to_vec();
    cutoffs.sort_by(f64::total_cmp);
    let cells = env.zlambda_moments(dir, &cutoffs)?;
    let (ws, dual) = solve_ll_multiaction_directed(&cells, &deltas, u, Some(&dir))?;
    let h = spec.evaluate(&masses(&cells))?;

    let lam = &dual.lambda;
    let ratio = (lam[0] + lam[2]) / (lam[1] + lam[2]);
    let norm: f64 = lam.iter().map(|l| l * l).sum::<f64>().sqrt();
    let consistency_angle = if norm > 0.0 {
        let dot: f64 = lam.iter().zip(&dir).map(|(l, d)| l / norm * d).sum();
        dot.clamp(-1.0, 1.0).acos()
    } else {
        std::f64::consts::FRAC_PI_2
    };
    if consistency_angle > 1e-2 {
        log::warn!(
            "multitask dual {:?} misaligned with search direction {:?} (angle {:.3e})",
            lam,
            dir,
            consistency_angle
        );
    }
    let incentive = ws.expected_wage;
    let solution = ContractSolution {
        partition: PartitionSpec::WeightedScore {
            weights: dir,
            cutoffs,
        },
        total_cost: incentive + spec.mu * h,
        incentive_cost: incentive,
        monitoring_cost: h,
        mu: spec.mu,
        cells,
        wages: vec![ws],
        duals: vec![dual],
    };
    Ok(MultitaskSolution {
        direction: dir,
        solution,
        ratio,
        consistency_angle,
    })
}

fn quantile_cutoffs(env: &MultiTaskEnv, dir: [f64; 3], qs: &[f64]) -> Result<Vec<f64>> {
    qs.iter()
        .map(|&q| env.score_quantile(dir, q))
        .collect()
}
