//! Exhaustive verification on small discretized instances.
//!
//! Assignments are enumerated in lexicographic order (base-N digits of the
//! assignment index), so any result is reproducible from its index. The
//! enumeration fans out over contiguous index ranges; the min-reduction keys
//! on (cost, index), which is associative and order-independent.

use crate::cost::MonitoringCostSpec;
use crate::env::CellSummary;
use crate::error::{Error, Result};
use crate::exec;
use crate::utility::Utility;
use crate::wages::solve_ll_single;
use serde::Serialize;

/// Largest single-score instance the enumerator accepts.
pub const MAX_ATOMS: usize = 14;
/// Largest category count.
pub const MAX_CELLS: usize = 3;

/// A small scored instance for brute-force certification.
#[derive(Debug, Clone)]
pub struct DiscreteInstance {
    /// (z, mass), sorted by z on construction; masses sum to 1, mean zero.
    pub atoms: Vec<(f64, f64)>,
    pub n_cells: usize,
    pub utility: Utility,
    pub effort_cost: f64,
    pub spec: MonitoringCostSpec,
}

impl DiscreteInstance {
    pub fn new(
        mut atoms: Vec<(f64, f64)>,
        n_cells: usize,
        utility: Utility,
        effort_cost: f64,
        spec: MonitoringCostSpec,
    ) -> Result<Self> {
        if atoms.len() > MAX_ATOMS {
            return Err(Error::InstanceTooLarge(format!(
                "{} atoms > {MAX_ATOMS}",
                atoms.len()
            )));
        }
        if !(2..=MAX_CELLS).contains(&n_cells) {
            return Err(Error::InstanceTooLarge(format!(
                "{n_cells} cells outside 2..={MAX_CELLS}"
            )));
        }
        if atoms.len() < n_cells {
            return Err(Error::InvalidArgument("fewer atoms than cells".into()));
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::MalformedProbabilities(format!("masses sum to {mass}")));
        }
        if mean.abs() > 1e-9 {
            return Err(Error::NonzeroMean {
                lo: atoms[0].0,
                hi: atoms[atoms.len() - 1].0,
                mean,
            });
        }
        Ok(DiscreteInstance {
            atoms,
            n_cells,
            utility,
            effort_cost,
            spec,
        })
    }

    /// Equal-mass atoms at the mid-quantiles of a scalar environment.
    pub fn from_env_quantiles(
        env: &crate::env::ZEnv,
        m: usize,
        n_cells: usize,
        utility: Utility,
        effort_cost: f64,
        spec: MonitoringCostSpec,
    ) -> Result<Self> {
        let mut atoms: Vec<(f64, f64)> = (0..m)
            .map(|i| (env.quantile((i as f64 + 0.5) / m as f64), 1.0 / m as f64))
            .collect();
        // recenter: quantile discretization leaves a small mean residual
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        atoms.iter_mut().for_each(|a| a.0 -= mean);
        Self::new(atoms, n_cells, utility, effort_cost, spec)
    }
}

/// Winner of a single-score enumeration.
#[derive(Debug, Clone, Serialize)]
pub struct BruteForceResult {
    /// Category of each atom (atoms in sorted-z order).
    pub assignment: Vec<usize>,
    /// Lexicographic index of the winning assignment.
    pub index: usize,
    pub cost: f64,
    /// Whether a cost-minimizing assignment groups atoms into contiguous
    /// z-intervals.
    pub is_interval: bool,
}

fn assignment_of(index: usize, m: usize, n: usize) -> Vec<usize> {
    let mut digits = [0usize; MAX_ATOMS];
    fill_assignment(index, m, n, &mut digits);
    digits[..m].to_vec()
}

fn fill_assignment(index: usize, m: usize, n: usize, digits: &mut [usize; MAX_ATOMS]) {
    let mut rest = index;
    for slot in (0..m).rev() {
        digits[slot] = rest % n;
        rest /= n;
    }
}

fn is_surjective(assign: &[usize], n: usize) -> bool {
    let mut seen = [false; MAX_CELLS];
    let mut count = 0;
    for &a in assign {
        if !seen[a] {
            seen[a] = true;
            count += 1;
        }
    }
    count == n
}

/// Contiguous-in-z grouping: each category occupies exactly one run.
fn is_interval_assignment(assign: &[usize], n: usize) -> bool {
    let mut runs = 0;
    let mut prev = usize::MAX;
    let mut seen = [false; MAX_CELLS];
    for &a in assign {
        if a != prev {
            if seen[a] {
                return false;
            }
            seen[a] = true;
            runs += 1;
            prev = a;
        }
    }
    runs == n
}

fn assignment_cost(inst: &DiscreteInstance, assign: &[usize]) -> Option<f64> {
    let n = inst.n_cells;
    let mut mass = [0.0f64; MAX_CELLS];
    let mut first = [0.0f64; MAX_CELLS];
    for (&(z, m), &a) in inst.atoms.iter().zip(assign) {
        mass[a] += m;
        first[a] += m * z;
    }
    // allocation-free square-root fast path; enumeration is the hot loop
    let wage = match &inst.utility {
        Utility::Sqrt => {
            let mut s = 0.0;
            for a in 0..n {
                let z = first[a] / mass[a];
                if z > 0.0 {
                    s += mass[a] * z * z;
                }
            }
            if s <= 0.0 {
                return None;
            }
            inst.effort_cost * inst.effort_cost / s
        }
        other => {
            let cells: Vec<CellSummary> = (0..n)
                .map(|a| CellSummary::scalar(mass[a], first[a] / mass[a]))
                .collect();
            solve_ll_single(&cells, inst.effort_cost, other)
                .ok()?
                .0
                .expected_wage
        }
    };
    let h = inst.spec.evaluate(&mass[..n]).ok()?;
    Some(wage + inst.spec.mu * h)
}

/// Enumerates every surjective assignment of atoms to categories and returns
/// the cheapest, plus whether an interval-shaped assignment attains it.
pub fn brute_force_single(inst: &DiscreteInstance) -> Result<BruteForceResult> {
    if !inst.atoms.iter().any(|a| a.0 > 0.0) {
        return Err(Error::NoInformativeCell);
    }
    let m = inst.atoms.len();
    let n = inst.n_cells;
    let total = n.pow(m as u32);

    let cost_of = |i: usize, interval_only: bool| -> f64 {
        let mut digits = [0usize; MAX_ATOMS];
        fill_assignment(i, m, n, &mut digits);
        let assign = &digits[..m];
        if !is_surjective(assign, n) {
            return f64::INFINITY;
        }
        if interval_only && !is_interval_assignment(assign, n) {
            return f64::INFINITY;
        }
        assignment_cost(inst, assign).unwrap_or(f64::INFINITY)
    };

    let overall = exec::min_indexed(total, |i| cost_of(i, false));
    let Some((best_cost, best_idx)) = overall.filter(|(v, _)| v.is_finite()) else {
        return Err(Error::AllCandidatesInfeasible(
            "no surjective assignment admits a feasible wage scheme".into(),
        ));
    };
    let interval = exec::min_indexed(total, |i| cost_of(i, true));
    let is_interval = interval
        .map(|(v, _)| v <= best_cost * (1.0 + 1e-12) + 1e-15)
        .unwrap_or(false);

    Ok(BruteForceResult {
        assignment: assignment_of(best_idx, m, n),
        index: best_idx,
        cost: best_cost,
        is_interval,
    })
}

/// A two-agent grid instance: product atoms of two scored margins.
#[derive(Debug, Clone)]
pub struct TwoAgentInstance {
    pub atoms1: Vec<(f64, f64)>,
    pub atoms2: Vec<(f64, f64)>,
    pub utils: (Utility, Utility),
    pub costs: (f64, f64),
    pub spec: MonitoringCostSpec,
}

/// Winner of the two-agent bipartition enumeration.
#[derive(Debug, Clone, Serialize)]
pub struct BruteForce2dResult {
    /// Bitmask over atoms in row-major order (agent-1 index slowest);
    /// set bits form the high cell.
    pub mask: u32,
    pub cost: f64,
    /// Whether some half-plane induces the winning split (linear
    /// separability of the two atom groups in (z1, z2)).
    pub is_halfplane_consistent: bool,
}

/// Enumerates all 2^(m1 m2) - 2 nontrivial bipartitions of the product grid.
pub fn brute_force_bipartition_2d(inst: &TwoAgentInstance) -> Result<BruteForce2dResult> {
    let (m1, m2) = (inst.atoms1.len(), inst.atoms2.len());
    if m1 > 3 || m2 > 3 || m1 == 0 || m2 == 0 {
        return Err(Error::InstanceTooLarge(format!(
            "grid {m1}x{m2} exceeds 3x3"
        )));
    }
    let count = m1 * m2;
    let total: usize = 1 << count;

    // product atoms in row-major order
    let mut atoms = Vec::with_capacity(count);
    for &(z1, p1) in &inst.atoms1 {
        for &(z2, p2) in &inst.atoms2 {
            atoms.push((z1, z2, p1 * p2));
        }
    }

    let cost_of = |mask: usize| -> f64 {
        if mask == 0 || mask == total - 1 {
            return f64::INFINITY;
        }
        let mut cell = [[0.0f64; 3]; 2]; // [cell][mass, e1, e2]
        for (i, &(z1, z2, p)) in atoms.iter().enumerate() {
            let c = usize::from(mask >> i & 1 == 1);
            cell[c][0] += p;
            cell[c][1] += p * z1;
            cell[c][2] += p * z2;
        }
        if cell[0][0] <= 0.0 || cell[1][0] <= 0.0 {
            return f64::INFINITY;
        }
        let mut totalw = 0.0;
        for (agent, (c, u)) in [
            (1usize, (inst.costs.0, &inst.utils.0)),
            (2, (inst.costs.1, &inst.utils.1)),
        ] {
            let cells: Vec<CellSummary> = (0..2)
                .map(|k| CellSummary::scalar(cell[k][0], cell[k][agent] / cell[k][0]))
                .collect();
            let Ok((ws, _)) = solve_ll_single(&cells, c, u) else {
                return f64::INFINITY;
            };
            totalw += ws.expected_wage;
        }
        match inst.spec.evaluate(&[cell[0][0], cell[1][0]]) {
            Ok(h) => totalw + inst.spec.mu * h,
            Err(_) => f64::INFINITY,
        }
    };

    let best = exec::min_indexed(total, cost_of);
    let Some((cost, mask)) = best.filter(|(v, _)| v.is_finite()) else {
        return Err(Error::AllCandidatesInfeasible(
            "no bipartition of the grid is feasible for both agents".into(),
        ));
    };

    let high: Vec<(f64, f64)> = atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &(z1, z2, _))| (z1, z2))
        .collect();
    let low: Vec<(f64, f64)> = atoms
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 0)
        .map(|(_, &(z1, z2, _))| (z1, z2))
        .collect();

    Ok(BruteForce2dResult {
        mask: mask as u32,
        cost,
        is_halfplane_consistent: linearly_separable(&high, &low),
    })
}

/// Exact linear separability of two small planar point sets: some direction
/// strictly orders every pair across the groups (boundary contact allowed up
/// to 1e-12). Candidate directions are the normals of all pairwise
/// difference vectors.
pub fn linearly_separable(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    if a.is_empty() || b.is_empty() {
        return true;
    }
    let mut dirs = Vec::new();
    let mut push_pairs = |pts: &[(f64, f64)]| {
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let (dx, dy) = (pts[j].0 - pts[i].0, pts[j].1 - pts[i].1);
                if dx.abs() + dy.abs() > 1e-12 {
                    dirs.push((-dy, dx));
                }
            }
        }
    };
    push_pairs(a);
    push_pairs(b);
    for &pa in a {
        for &pb in b {
            let (dx, dy) = (pb.0 - pa.0, pb.1 - pa.1);
            if dx.abs() + dy.abs() > 1e-12 {
                dirs.push((dx, dy));
                dirs.push((-dy, dx));
            }
        }
    }
    dirs.push((1.0, 0.0));
    dirs.push((0.0, 1.0));
    for &(nx, ny) in &dirs {
        let amax = a.iter().map(|p| nx * p.0 + ny * p.1).fold(f64::NEG_INFINITY, f64::max);
        let bmin = b.iter().map(|p| nx * p.0 + ny * p.1).fold(f64::INFINITY, f64::min);
        let amin = a.iter().map(|p| nx * p.0 + ny * p.1).fold(f64::INFINITY, f64::min);
        let bmax = b.iter().map(|p| nx * p.0 + ny * p.1).fold(f64::NEG_INFINITY, f64::max);
        if amax <= bmin + 1e-12 || bmax <= amin + 1e-12 {
            return true;
        }
    }
    false
}
