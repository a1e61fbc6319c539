//! Cost-minimizing wage schemes for a fixed partition summary.
//!
//! All programs are solved in utility space, where the objective
//! sum pi_n u^{-1}(v_n) is convex and the incentive constraints are linear.
//! The single-constraint limited-liability program reduces to a monotone
//! bisection on the Lagrange multiplier; the multi-constraint variants
//! (several deviations, or IC plus participation) maximize the concave dual
//! by coordinate ascent with a Newton polish on the binding set.

use crate::env::CellSummary;
use crate::error::{Error, Result};
use crate::utility::Utility;
use serde::Serialize;

/// Tolerance for a binding incentive constraint.
pub const IC_TOL: f64 = 1e-8;

/// Nonnegative wages per cell plus their expected value under the target action.
#[derive(Debug, Clone, Serialize)]
pub struct WageSchedule {
    pub wages: Vec<f64>,
    pub expected_wage: f64,
}

/// Lagrange multipliers and diagnostics of the binding constraints.
#[derive(Debug, Clone, Serialize)]
pub struct DualCertificate {
    /// One multiplier per incentive constraint.
    pub lambda: Vec<f64>,
    /// Participation multiplier; zero outside IR mode.
    pub gamma_ir: f64,
    /// Constraint surpluses (LHS - RHS); feasible when >= -1e-8.
    pub ic_residuals: Vec<f64>,
    /// Cells pinned at the limited-liability corner.
    pub ll_active: Vec<bool>,
    /// Pairs of distinct cells with identical z-vectors; the optimizer layer
    /// is responsible for merging them.
    pub mergeable_cells: Vec<(usize, usize)>,
}

fn mergeable_pairs(cells: &[CellSummary]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..cells.len() {
        for j in (i + 1)..cells.len() {
            let same = cells[i]
                .z
                .iter()
                .zip(&cells[j].z)
                .all(|(a, b)| (a - b).abs() <= 1e-12);
            if same {
                out.push((i, j));
            }
        }
    }
    out
}

fn validate_cells(cells: &[CellSummary], dim: usize) -> Result<()> {
    if cells.is_empty() {
        return Err(Error::InvalidArgument("no cells".into()));
    }
    let mut mass = 0.0;
    for c in cells {
        if c.z.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "cell z-vector has length {}, want {dim}",
                c.z.len()
            )));
        }
        if !(c.mass > 0.0) {
            return Err(Error::MalformedProbabilities(format!(
                "cell mass {} must be positive",
                c.mass
            )));
        }
        mass += c.mass;
    }
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::MalformedProbabilities(format!(
            "cell masses sum to {mass}"
        )));
    }
    Ok(())
}

/// Minimal expected wage subject to (IC) and limited liability for a scalar
/// z summary: w_n = 0 where z_n <= 0 and u'(w_n) = 1/(lambda z_n) elsewhere,
/// with lambda found by monotone bisection so the constraint binds.
pub fn solve_ll_single(
    cells: &[CellSummary],
    c: f64,
    u: &Utility,
) -> Result<(WageSchedule, DualCertificate)> {
    validate_cells(cells, 1)?;
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!("effort cost c = {c}")));
    }
    let n = cells.len();
    let mergeable = mergeable_pairs(cells);

    if c == 0.0 {
        let wages = vec![0.0; n];
        return Ok((
            WageSchedule {
                wages,
                expected_wage: 0.0,
            },
            DualCertificate {
                lambda: vec![0.0],
                gamma_ir: 0.0,
                ic_residuals: vec![0.0],
                ll_active: vec![true; n],
                mergeable_cells: mergeable,
            },
        ));
    }

    if !cells.iter().any(|cell| cell.z1() > 0.0) {
        return Err(Error::NoInformativeCell);
    }
    let bound = u.bound();
    if bound.is_finite() {
        let sup: f64 = cells
            .iter()
            .map(|cell| cell.mass * cell.z1().max(0.0) * bound)
            .sum();
        if sup <= c {
            return Err(Error::UtilityBound {
                constraint: 0,
                sup,
                required: c,
            });
        }
    }

    // IC left side at multiplier lambda; strictly increasing in lambda once
    // some wage is interior, which makes the root unique.
    let ic_at = |lambda: f64| -> f64 {
        cells
            .iter()
            .filter(|cell| cell.z1() > 0.0)
            .map(|cell| {
                let w = u.wage_from_marginal(1.0 / (lambda * cell.z1()));
                cell.mass * u.value(w) * cell.z1()
            })
            .sum()
    };

    let mut lo = 1e-12;
    let mut hi = 1e12;
    let mut guard = 0;
    while ic_at(hi) < c {
        hi *= 10.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::UtilityBound {
                constraint: 0,
                sup: ic_at(hi),
                required: c,
            });
        }
    }
    while ic_at(lo) > c {
        lo /= 10.0;
        guard += 1;
        if guard > 120 {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ic_at(mid) < c {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-16 * hi {
            break;
        }
    }
    let lambda = 0.5 * (lo + hi);

    let wages: Vec<f64> = cells
        .iter()
        .map(|cell| {
            if cell.z1() > 0.0 {
                u.wage_from_marginal(1.0 / (lambda * cell.z1()))
            } else {
                0.0
            }
        })
        .collect();
    let expected_wage = cells
        .iter()
        .zip(&wages)
        .map(|(cell, w)| cell.mass * w)
        .sum();
    let residual = ic_at(lambda) - c;
    let ll_active: Vec<bool> = wages.iter().map(|w| *w == 0.0).collect();
    Ok((
        WageSchedule {
            wages,
            expected_wage,
        },
        DualCertificate {
            lambda: vec![lambda],
            gamma_ir: 0.0,
            ic_residuals: vec![residual],
            ll_active,
            mergeable_cells: mergeable,
        },
    ))
}

/// Closed-form minimal incentive cost under square-root utility:
/// c^2 / sum_n pi_n max(0, z_n)^2.
pub fn closed_form_cost_sqrt(cells: &[CellSummary], c: f64) -> Result<f64> {
    validate_cells(cells, 1)?;
    let s: f64 = cells
        .iter()
        .map(|cell| cell.mass * cell.z1().max(0.0).powi(2))
        .sum();
    if s <= 0.0 {
        return Err(Error::NoInformativeCell);
    }
    Ok(c * c / s)
}

/// Two agents with technologically independent incentives: the joint program
/// decouples into one scalar solve per agent on (pi_n, z_{i,n}).
/// Infeasibility is reported per agent.
pub fn solve_ll_multiagent(
    cells: &[CellSummary],
    costs: (f64, f64),
    utils: (&Utility, &Utility),
) -> Result<[Result<(WageSchedule, DualCertificate)>; 2]> {
    validate_cells(cells, 2)?;
    let solve_agent = |idx: usize, c: f64, u: &Utility| {
        let projected: Vec<CellSummary> = cells
            .iter()
            .map(|cell| CellSummary::scalar(cell.mass, cell.z[idx]))
            .collect();
        solve_ll_single(&projected, c, u)
    };
    Ok([
        solve_agent(0, costs.0, utils.0),
        solve_agent(1, costs.1, utils.1),
    ])
}

/// Outcome of the generic utility-space program used by the multi-deviation
/// and IR solvers.
struct UtilityProgram {
    levels: Vec<f64>,
    lambda: Vec<f64>,
    residuals: Vec<f64>,
}

/// Maximizes the concave dual of: minimize sum pi_n u^{-1}(v_n) over
/// v in [0, bound) subject to sum_n pi_n v_n score[a][n] >= rhs[a].
///
/// Coordinate ascent with golden-section line searches, then a Newton polish
/// (finite-difference Jacobian) on the binding set. A diverging multiplier
/// signals joint infeasibility.
fn solve_utility_program(
    masses: &[f64],
    scores: &[Vec<f64>], // scores[n][a]
    rhs: &[f64],
    u: &Utility,
) -> Result<UtilityProgram> {
    let nd = rhs.len();
    let n = masses.len();
    let bound = u.bound();

    // Per-constraint attainability at the utility bound.
    for a in 0..nd {
        if rhs[a] <= 0.0 {
            continue;
        }
        let sup: f64 = if bound.is_finite() {
            (0..n)
                .map(|i| masses[i] * scores[i][a].max(0.0) * bound)
                .sum()
        } else if (0..n).any(|i| scores[i][a] > 0.0) {
            f64::INFINITY
        } else {
            0.0
        };
        if sup <= rhs[a] {
            return Err(Error::UtilityBound {
                constraint: a,
                sup,
                required: rhs[a],
            });
        }
    }

    // Joint attainability along mixture directions: for any theta >= 0 the
    // aggregated constraint needs bound * sum_n pi_n (theta.z_n)+ to exceed
    // theta.rhs. A coarse simplex grid certifies most infeasible proposals
    // without waiting for the dual to diverge.
    if nd >= 2 {
        for theta in simplex_grid(nd, 6) {
            let need: f64 = theta.iter().zip(rhs).map(|(t, r)| t * r).sum();
            if need <= 0.0 {
                continue;
            }
            let mixed_pos: f64 = (0..n)
                .map(|i| {
                    let s: f64 = scores[i].iter().zip(&theta).map(|(z, t)| z * t).sum();
                    masses[i] * s.max(0.0)
                })
                .sum();
            let sup = if bound.is_finite() {
                bound * mixed_pos
            } else if mixed_pos > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if sup <= need {
                return Err(Error::JointlyInfeasible { direction: theta });
            }
        }
    }

    let levels_at = |lambda: &[f64], out: &mut Vec<f64>| {
        out.clear();
        for score in scores.iter().take(n) {
            let s: f64 = score.iter().zip(lambda).map(|(z, l)| z * l).sum();
            out.push(u.level_for_score(s));
        }
    };
    let mut scratch = Vec::with_capacity(n);
    let dual = |lambda: &[f64], scratch: &mut Vec<f64>| -> f64 {
        levels_at(lambda, scratch);
        let mut q = 0.0;
        for i in 0..n {
            let v = scratch[i];
            let s: f64 = scores[i].iter().zip(lambda).map(|(z, l)| z * l).sum();
            q += masses[i] * (u.wage(v) - v * s);
        }
        q + lambda.iter().zip(rhs).map(|(l, r)| l * r).sum::<f64>()
    };

    let mut lambda = vec![1.0; nd];
    let mut q = dual(&lambda, &mut scratch);
    const LAMBDA_CAP: f64 = 1e9;
    for _sweep in 0..200 {
        let q_before = q;
        for a in 0..nd {
            let mut hi = (4.0 * lambda[a]).max(1.0);
            loop {
                let (best_x, best_q) = golden_max(
                    |x| {
                        let mut trial = lambda.clone();
                        trial[a] = x;
                        dual(&trial, &mut scratch)
                    },
                    0.0,
                    hi,
                );
                if best_x > 0.95 * hi && hi < LAMBDA_CAP {
                    hi *= 8.0;
                    continue;
                }
                if best_q >= q {
                    lambda[a] = best_x;
                    q = best_q;
                }
                break;
            }
        }
        if lambda.iter().any(|l| *l >= 0.5 * LAMBDA_CAP) {
            let norm: f64 = lambda.iter().map(|l| l * l).sum::<f64>().sqrt();
            return Err(Error::JointlyInfeasible {
                direction: lambda.iter().map(|l| l / norm).collect(),
            });
        }
        if q - q_before <= 1e-12 * (1.0 + q.abs()) {
            break;
        }
    }

    // Newton polish on the binding set drives residuals to ~1e-12.
    let residuals_at = |lambda: &[f64], scratch: &mut Vec<f64>| -> Vec<f64> {
        levels_at(lambda, scratch);
        (0..nd)
            .map(|a| {
                (0..n)
                    .map(|i| masses[i] * scratch[i] * scores[i][a])
                    .sum::<f64>()
                    - rhs[a]
            })
            .collect()
    };
    let mut res = residuals_at(&lambda, &mut scratch);
    let binding: Vec<usize> = (0..nd)
        .filter(|&a| lambda[a] > 1e-10 || res[a].abs() <= 1e-5 * (1.0 + rhs[a].abs()))
        .collect();
    if !binding.is_empty() {
        let m = binding.len();
        for _ in 0..60 {
            let fx: Vec<f64> = binding.iter().map(|&a| res[a]).collect();
            if fx.iter().all(|r| r.abs() < 1e-13) {
                break;
            }
            // finite-difference Jacobian over the binding coordinates
            let mut jac = vec![vec![0.0; m]; m];
            for (jcol, &aj) in binding.iter().enumerate() {
                let h = 1e-7 * (1.0 + lambda[aj].abs());
                let mut trial = lambda.clone();
                trial[aj] += h;
                let rp = residuals_at(&trial, &mut scratch);
                for (irow, &ai) in binding.iter().enumerate() {
                    jac[irow][jcol] = (rp[ai] - res[ai]) / h;
                }
            }
            let Some(step) = solve_dense(&mut jac, &fx) else {
                break;
            };
            let mut trial = lambda.clone();
            let mut ok = true;
            for (&a, s) in binding.iter().zip(&step) {
                trial[a] -= s;
                if trial[a] < 0.0 {
                    ok = false;
                }
            }
            if !ok {
                break;
            }
            let new_res = residuals_at(&trial, &mut scratch);
            let old: f64 = fx.iter().map(|r| r * r).sum();
            let new: f64 = binding.iter().map(|&a| new_res[a] * new_res[a]).sum();
            if new >= old {
                break;
            }
            lambda = trial;
            res = new_res;
        }
    }

    levels_at(&lambda, &mut scratch);
    let res = residuals_at(&lambda, &mut scratch);
    if res
        .iter()
        .zip(rhs)
        .any(|(r, rr)| *r < -1e-7 * (1.0 + rr.abs()))
    {
        let norm: f64 = lambda.iter().map(|l| l * l).sum::<f64>().sqrt().max(1e-300);
        return Err(Error::JointlyInfeasible {
            direction: lambda.iter().map(|l| l / norm).collect(),
        });
    }
    levels_at(&lambda, &mut scratch);
    Ok(UtilityProgram {
        levels: scratch,
        lambda,
        residuals: res,
    })
}

/// Nonnegative weight vectors on the simplex with denominator `den`.
fn simplex_grid(dim: usize, den: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), den)];
    while let Some((prefix, rest)) = stack.pop() {
        if prefix.len() + 1 == dim {
            let mut v = prefix.clone();
            v.push(rest as f64 / den as f64);
            out.push(v);
            continue;
        }
        for take in 0..=rest {
            let mut v = prefix.clone();
            v.push(take as f64 / den as f64);
            stack.push((v, rest - take));
        }
    }
    out
}

/// Golden-section maximizer of a concave 1-D function on [a, b].
fn golden_max<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..48 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
        if (hi - lo).abs() < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    let xm = 0.5 * (lo + hi);
    (xm, f(xm))
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve_dense(a: &mut [Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut x = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        x.swap(col, piv);
        for row in (col + 1)..n {
            let factor = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (dst, src) in bottom[0][col..n].iter_mut().zip(&top[col][col..n]) {
                *dst -= factor * src;
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        x[col] /= a[col][col];
        for row in 0..col {
            x[row] -= a[row][col] * x[col];
        }
    }
    Some(x)
}

/// Recovers the multiplier vector from active-cell stationarity
/// u'(w_n) (lambda . z_n) = 1, restricted to `support`, in least squares.
/// The system is underdetermined when few wages are interior; callers may
/// pass a `preferred` direction (the outer sorting direction) and the ray
/// along it is used whenever it solves the system equally well.
fn recover_lambda_ls(
    cells: &[CellSummary],
    wages: &[f64],
    u: &Utility,
    support: &[usize],
    fallback: &[f64],
    preferred: Option<&[f64]>,
) -> Vec<f64> {
    let nd = fallback.len();
    let active: Vec<usize> = (0..cells.len()).filter(|&i| wages[i] > 0.0).collect();
    if active.is_empty() || support.is_empty() {
        return fallback.to_vec();
    }
    let foc_err = |lambda: &[f64]| -> f64 {
        active
            .iter()
            .map(|&i| {
                let s: f64 = cells[i].z.iter().zip(lambda).map(|(z, l)| z * l).sum();
                (u.marginal(wages[i]) * s - 1.0).powi(2)
            })
            .sum()
    };
    let base_err = foc_err(fallback);

    // Ray along the preferred direction: one-dimensional least squares in t.
    if let Some(dir) = preferred {
        let mut num = 0.0;
        let mut den = 0.0;
        for &i in &active {
            let beta = u.marginal(wages[i])
                * cells[i].z.iter().zip(dir).map(|(z, l)| z * l).sum::<f64>();
            num += beta;
            den += beta * beta;
        }
        if den > 0.0 {
            let t = num / den;
            if t > 0.0 {
                let cand: Vec<f64> = dir.iter().map(|d| (d * t).max(0.0)).collect();
                if foc_err(&cand) <= base_err + 1e-12 {
                    return cand;
                }
            }
        }
    }

    // Min-norm least squares over the supported coordinates, with a
    // nonnegativity clean-up pass.
    let mut supp = support.to_vec();
    loop {
        if supp.is_empty() {
            return fallback.to_vec();
        }
        let m = supp.len();
        // normal equations of A lambda = 1 with rows over active cells
        let rows: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| {
                supp.iter()
                    .map(|&a| u.marginal(wages[i]) * cells[i].z[a])
                    .collect()
            })
            .collect();
        let mut ata = vec![vec![0.0; m]; m];
        let mut atb = vec![0.0; m];
        for row in &rows {
            for j in 0..m {
                atb[j] += row[j];
                for k in 0..m {
                    ata[j][k] += row[j] * row[k];
                }
            }
        }
        for (j, row) in ata.iter_mut().enumerate() {
            row[j] += 1e-12;
        }
        let Some(sol) = solve_dense(&mut ata, &atb) else {
            return fallback.to_vec();
        };
        if let Some(pos) = sol.iter().position(|v| *v < -1e-10) {
            supp.remove(pos);
            continue;
        }
        let mut lambda = vec![0.0; nd];
        for (k, &a) in supp.iter().enumerate() {
            lambda[a] = sol[k].max(0.0);
        }
        if foc_err(&lambda) <= base_err + 1e-12 {
            return lambda;
        }
        return fallback.to_vec();
    }
}

fn program_to_solution(
    cells: &[CellSummary],
    prog: UtilityProgram,
    u: &Utility,
    gamma_ir: bool,
    preferred: Option<&[f64]>,
) -> (WageSchedule, DualCertificate) {
    let wages: Vec<f64> = prog.levels.iter().map(|&v| u.wage(v)).collect();
    let expected_wage = cells
        .iter()
        .zip(&wages)
        .map(|(cell, w)| cell.mass * w)
        .sum();
    let ll_active: Vec<bool> = wages.iter().map(|w| *w <= 0.0).collect();

    let nd = prog.lambda.len();
    let ic_dims = if gamma_ir { nd - 1 } else { nd };
    let binding: Vec<usize> = (0..nd)
        .filter(|&a| prog.lambda[a] > 1e-10 || prog.residuals[a].abs() <= 1e-6)
        .collect();
    // augment cells with the IR column when present so recovery sees the
    // same score matrix the program used
    let aug: Vec<CellSummary>;
    let rec_cells: &[CellSummary] = if gamma_ir {
        aug = cells
            .iter()
            .map(|c| {
                let mut z = c.z.clone();
                z.push(1.0);
                CellSummary { mass: c.mass, z }
            })
            .collect();
        &aug
    } else {
        cells
    };
    let lambda_full = recover_lambda_ls(rec_cells, &wages, u, &binding, &prog.lambda, preferred);

    let (lambda, gamma) = if gamma_ir {
        (lambda_full[..ic_dims].to_vec(), lambda_full[ic_dims])
    } else {
        (lambda_full, 0.0)
    };
    (
        WageSchedule {
            wages,
            expected_wage,
        },
        DualCertificate {
            lambda,
            gamma_ir: gamma,
            ic_residuals: prog.residuals,
            ll_active,
            mergeable_cells: mergeable_pairs(cells),
        },
    )
}

/// Wage scheme deterring every deviation a with gain `delta_costs[a]`:
/// minimize the expected wage subject to
/// `sum_n pi_n u(w_n) z_{a,n} >= delta_costs[a]` for every a, wages >= 0.
pub fn solve_ll_multiaction(
    cells: &[CellSummary],
    delta_costs: &[f64],
    u: &Utility,
) -> Result<(WageSchedule, DualCertificate)> {
    solve_ll_multiaction_directed(cells, delta_costs, u, None)
}

/// [`solve_ll_multiaction`] with a preferred dual direction used to resolve
/// the multiplier when the stationarity system is underdetermined (few
/// interior wages). The optimizer passes its sorting direction here.
pub fn solve_ll_multiaction_directed(
    cells: &[CellSummary],
    delta_costs: &[f64],
    u: &Utility,
    preferred: Option<&[f64]>,
) -> Result<(WageSchedule, DualCertificate)> {
    let nd = delta_costs.len();
    if nd == 0 {
        return Err(Error::InvalidArgument("no deviations".into()));
    }
    validate_cells(cells, nd)?;
    if delta_costs.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "deviation gains must be positive, got {delta_costs:?}"
        )));
    }
    if nd == 1 {
        // single deviation: identical to the scalar bisection solve
        let scalar: Vec<CellSummary> = cells
            .iter()
            .map(|cell| CellSummary::scalar(cell.mass, cell.z[0]))
            .collect();
        return solve_ll_single(&scalar, delta_costs[0], u);
    }
    let masses: Vec<f64> = cells.iter().map(|c| c.mass).collect();
    let scores: Vec<Vec<f64>> = cells.iter().map(|c| c.z.clone()).collect();
    let prog = solve_utility_program(&masses, &scores, delta_costs, u)?;
    Ok(program_to_solution(cells, prog, u, false, preferred))
}

/// Wage scheme under incentive compatibility plus individual rationality
/// (reservation utility `ubar`), wages kept on the domain of u:
/// u'(w_n) = 1/(lambda z_n + gamma) at interior wages.
pub fn solve_ir_single(
    cells: &[CellSummary],
    c: f64,
    ubar: f64,
    u: &Utility,
) -> Result<(WageSchedule, DualCertificate)> {
    validate_cells(cells, 1)?;
    if !(c >= 0.0) {
        return Err(Error::InvalidArgument(format!("effort cost c = {c}")));
    }
    let bound = u.bound();
    if bound.is_finite() && c + ubar >= bound {
        return Err(Error::InfeasibleReservation {
            required: c + ubar,
            sup: bound,
        });
    }
    if c > 0.0 && !cells.iter().any(|cell| cell.z1() > 0.0) {
        return Err(Error::NoInformativeCell);
    }
    let masses: Vec<f64> = cells.iter().map(|cell| cell.mass).collect();
    let scores: Vec<Vec<f64>> = cells.iter().map(|cell| vec![cell.z1(), 1.0]).collect();
    let rhs = [c, c + ubar];
    let prog = solve_utility_program(&masses, &scores, &rhs, u).map_err(|e| match e {
        Error::UtilityBound { constraint: 1, sup, required } => {
            Error::InfeasibleReservation { required, sup }
        }
        other => other,
    })?;
    Ok(program_to_solution(cells, prog, u, true, None))
}
