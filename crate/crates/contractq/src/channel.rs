//! Random monitoring: a noisy channel from scored data to performance
//! categories, priced by the mutual information between score and category.
//!
//! The score space is discretized (by default uniformly in quantile space of
//! the Z-distribution) and the solver alternates between a Gibbs-form channel
//! update implied by the pointwise first-order condition,
//! q_n(z) proportional to pi_n exp((lambda u(w_n) z - w_n)/mu),
//! a marginal refresh, and a wage re-solve on the induced cell summaries.
//! Updates are damped and all exponentials go through log-sum-exp.

use crate::env::{CellSummary, ZEnv};
use crate::error::{Error, Result};
use crate::utility::Utility;
use crate::wages::solve_ll_single;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Damping on channel updates.
pub const DAMPING: f64 = 0.5;
/// Convergence threshold on the sup-change of the channel matrix.
pub const SUP_TOL: f64 = 1e-8;
/// Iteration budget.
pub const MAX_ITERS: usize = 10_000;
/// Categories lighter than this are pruned.
pub const PRUNE_MASS: f64 = 1e-10;

/// A stochastic map from score-grid points to categories.
/// `q[n][i]` is the probability of category n at grid point i; columns sum
/// to one.
#[derive(Debug, Clone, Serialize)]
pub struct Channel {
    pub grid_z: Vec<f64>,
    pub grid_p: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

impl Channel {
    pub fn new(grid_z: Vec<f64>, grid_p: Vec<f64>, q: Vec<Vec<f64>>) -> Result<Self> {
        let ch = Channel { grid_z, grid_p, q };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.grid_z.len();
        if m == 0 || self.grid_p.len() != m {
            return Err(Error::InvalidArgument("grid shape mismatch".into()));
        }
        let pm: f64 = self.grid_p.iter().sum();
        if (pm - 1.0).abs() > 1e-9 || self.grid_p.iter().any(|p| *p < 0.0) {
            return Err(Error::MalformedProbabilities(format!(
                "grid masses sum to {pm}"
            )));
        }
        for row in &self.q {
            if row.len() != m {
                return Err(Error::InvalidArgument("channel row length mismatch".into()));
            }
            if row.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                return Err(Error::MalformedProbabilities("negative channel entry".into()));
            }
        }
        for i in 0..m {
            let col: f64 = self.q.iter().map(|row| row[i]).sum();
            if (col - 1.0).abs() > 1e-9 {
                return Err(Error::MalformedProbabilities(format!(
                    "column {i} sums to {col}"
                )));
            }
        }
        Ok(())
    }

    /// Category marginals `pi_n = sum_i p_i q[n][i]`.
    pub fn marginals(&self) -> Vec<f64> {
        self.q
            .iter()
            .map(|row| row.iter().zip(&self.grid_p).map(|(q, p)| q * p).sum())
            .collect()
    }

    /// Conditional z-values of the categories; None where the marginal is 0.
    pub fn cell_z_values(&self) -> Vec<Option<f64>> {
        let pis = self.marginals();
        self.q
            .iter()
            .zip(&pis)
            .map(|(row, &pi)| {
                if pi <= 0.0 {
                    return None;
                }
                let first: f64 = row
                    .iter()
                    .zip(self.grid_p.iter().zip(&self.grid_z))
                    .map(|(q, (p, z))| q * p * z)
                    .sum();
                Some(first / pi)
            })
            .collect()
    }
}

/// Mutual information between score and category in nats:
/// `sum_n sum_i p_i q[n][i] log(q[n][i]/pi_n)`, with 0 log(0/.) = 0.
pub fn mutual_information(ch: &Channel) -> f64 {
    let pis = ch.marginals();
    let mut mi = 0.0;
    for (row, &pi) in ch.q.iter().zip(&pis) {
        if pi <= 0.0 {
            continue;
        }
        for (q, p) in row.iter().zip(&ch.grid_p) {
            if *q > 0.0 && *p > 0.0 {
                mi += p * q * (q / pi).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Mutual information in bits.
pub fn mutual_information_bits(ch: &Channel) -> f64 {
    mutual_information(ch) / std::f64::consts::LN_2
}

/// A solved random-monitoring contract. Categories are sorted by wage; the
/// objective history tracks expected wage + mu * MI(nats) per iteration.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelSolution {
    pub channel: Channel,
    pub wages: Vec<f64>,
    pub lambda: f64,
    pub expected_wage: f64,
    pub mutual_information_nats: f64,
    pub mutual_information_bits: f64,
    /// expected wage + mu * MI(nats)
    pub total_cost: f64,
    pub iterations: usize,
    pub objective_history: Vec<f64>,
}

/// Score grid uniform in quantile space of the environment: masses 1/m at
/// the mid-quantile scores.
pub fn quantile_grid(env: &ZEnv, m: usize) -> (Vec<f64>, Vec<f64>) {
    let zs: Vec<f64> = (0..m)
        .map(|i| env.quantile((i as f64 + 0.5) / m as f64))
        .collect();
    (zs, vec![1.0 / m as f64; m])
}

struct Iterate {
    q: Vec<Vec<f64>>,
    wages: Vec<f64>,
    lambda: f64,
    expected_wage: f64,
    mi: f64,
}

/// Solves the channel relaxation on a scored grid.
///
/// Alternates (i) the Gibbs channel update at the current wages and
/// multiplier, (ii) a marginal refresh, (iii) a wage re-solve on the induced
/// (pi_n, z_n), damping channel moves by 1/2, until the channel stops moving.
pub fn solve_channel(
    grid_z: &[f64],
    grid_p: &[f64],
    u: &Utility,
    c: f64,
    mu: f64,
    k: usize,
    seed: u64,
) -> Result<ChannelSolution> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!("mu must be positive, got {mu}")));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2 categories, got {k}")));
    }
    let m = grid_z.len();
    if m < 2 || grid_p.len() != m {
        return Err(Error::InvalidArgument("grid too small or shape mismatch".into()));
    }
    if !grid_z.iter().any(|z| *z > 0.0) {
        return Err(Error::NoInformativeCell);
    }

    // near-uniform start with small seeded perturbations; the exactly
    // uniform channel is an uninformative fixed point
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..m)
                .map(|_| (1.0 + 0.1 * rng.gen_range(-1.0..1.0)) / k as f64)
                .collect()
        })
        .collect();
    normalize_columns(&mut q, m);

    let mut history = Vec::new();
    let mut last_sup = f64::INFINITY;
    for iter in 0..MAX_ITERS {
        let state = evaluate(&q, grid_z, grid_p, u, c)?;
        history.push(state.expected_wage + mu * state.mi);

        // Gibbs target at current wages/multiplier, damped
        let pis: Vec<f64> = q
            .iter()
            .map(|row| row.iter().zip(grid_p).map(|(qv, p)| qv * p).sum())
            .collect();
        let mut target = vec![vec![0.0; m]; q.len()];
        for i in 0..m {
            let mut exps: Vec<f64> = (0..q.len())
                .map(|n| {
                    let drive = (state.lambda * u.value(state.wages[n]) * grid_z[i]
                        - state.wages[n])
                        / mu;
                    pis[n].max(1e-300).ln() + drive
                })
                .collect();
            let mx = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for e in exps.iter_mut() {
                *e = (*e - mx).exp();
                total += *e;
            }
            for (n, e) in exps.iter().enumerate() {
                target[n][i] = e / total;
            }
        }
        let mut sup = 0.0f64;
        for n in 0..q.len() {
            for i in 0..m {
                let next = (1.0 - DAMPING) * q[n][i] + DAMPING * target[n][i];
                sup = sup.max((next - q[n][i]).abs());
                q[n][i] = next;
            }
        }
        last_sup = sup;

        // prune featherweight categories and renormalize columns
        let pis: Vec<f64> = q
            .iter()
            .map(|row| row.iter().zip(grid_p).map(|(qv, p)| qv * p).sum())
            .collect();
        if pis.iter().any(|pi| *pi < PRUNE_MASS) {
            q = q
                .into_iter()
                .zip(&pis)
                .filter(|(_, &pi)| pi >= PRUNE_MASS)
                .map(|(row, _)| row)
                .collect();
            if q.len() < 2 {
                return Err(Error::NoConvergence {
                    iterations: iter,
                    sup_change: sup,
                });
            }
            normalize_columns(&mut q, m);
        }

        if sup < SUP_TOL {
            return finalize(q, grid_z, grid_p, u, c, mu, iter + 1, history);
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERS,
        sup_change: last_sup,
    })
}

fn normalize_columns(q: &mut [Vec<f64>], m: usize) {
    for i in 0..m {
        let col: f64 = q.iter().map(|row| row[i]).sum();
        if col > 0.0 {
            for row in q.iter_mut() {
                row[i] /= col;
            }
        }
    }
}

/// Wage solve and mutual information at the current channel.
fn evaluate(
    q: &[Vec<f64>],
    grid_z: &[f64],
    grid_p: &[f64],
    u: &Utility,
    c: f64,
) -> Result<Iterate> {
    let pis: Vec<f64> = q
        .iter()
        .map(|row| row.iter().zip(grid_p).map(|(qv, p)| qv * p).sum())
        .collect();
    let mut cells = Vec::new();
    let mut index = Vec::new();
    for (n, &pi) in pis.iter().enumerate() {
        if pi > 0.0 {
            let first: f64 = q[n]
                .iter()
                .zip(grid_p.iter().zip(grid_z))
                .map(|(qv, (p, z))| qv * p * z)
                .sum();
            cells.push(CellSummary::scalar(pi, first / pi));
            index.push(n);
        }
    }
    let (ws, dual) = solve_ll_single(&cells, c, u)?;
    let mut wages = vec![0.0; q.len()];
    for (slot, &n) in index.iter().enumerate() {
        wages[n] = ws.wages[slot];
    }
    let ch = Channel {
        grid_z: grid_z.to_vec(),
        grid_p: grid_p.to_vec(),
        q: q.to_vec(),
    };
    Ok(Iterate {
        q: q.to_vec(),
        wages,
        lambda: dual.lambda[0],
        expected_wage: ws.expected_wage,
        mi: mutual_information(&ch),
    })
}

#[allow(clippy::too_many_arguments)]
fn finalize(
    mut q: Vec<Vec<f64>>,
    grid_z: &[f64],
    grid_p: &[f64],
    u: &Utility,
    c: f64,
    mu: f64,
    iterations: usize,
    mut history: Vec<f64>,
) -> Result<ChannelSolution> {
    // snap to the exact Gibbs form at the converged wages: the damped
    // iterate differs from it by at most twice the sup tolerance, and the
    // snapped channel carries the monotone-ratio and equal-score properties
    // exactly by functional form
    let state = evaluate(&q, grid_z, grid_p, u, c)?;
    let pis: Vec<f64> = q
        .iter()
        .map(|row| row.iter().zip(grid_p).map(|(qv, p)| qv * p).sum())
        .collect();
    for (i, &z) in grid_z.iter().enumerate() {
        let mut exps: Vec<f64> = (0..q.len())
            .map(|n| {
                pis[n].max(1e-300).ln()
                    + (state.lambda * u.value(state.wages[n]) * z - state.wages[n]) / mu
            })
            .collect();
        let mx = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for e in exps.iter_mut() {
            *e = (*e - mx).exp();
            total += *e;
        }
        for (n, e) in exps.iter().enumerate() {
            q[n][i] = e / total;
        }
    }

    // merge categories that converged to the same wage (several zero-wage
    // categories can coexist in the relaxation; merging loses nothing --
    // equal wages mean identical Gibbs drives, so merged rows keep the form)
    let mut merged = true;
    while merged {
        merged = false;
        let st = evaluate(&q, grid_z, grid_p, u, c)?;
        'outer: for a in 0..q.len() {
            for b in (a + 1)..q.len() {
                if (st.wages[a] - st.wages[b]).abs() <= 1e-9 {
                    log::info!(
                        "merging categories {a} and {b} with equal wage {:.6}",
                        st.wages[a]
                    );
                    let row = q.remove(b);
                    for (dst, src) in q[a].iter_mut().zip(row) {
                        *dst += src;
                    }
                    merged = true;
                    break 'outer;
                }
            }
        }
    }
    let final_state = evaluate(&q, grid_z, grid_p, u, c)?;

    // canonical labeling: categories sorted by wage
    let mut order: Vec<usize> = (0..q.len()).collect();
    order.sort_by(|&a, &b| final_state.wages[a].total_cmp(&final_state.wages[b]));
    let q: Vec<Vec<f64>> = order.iter().map(|&n| final_state.q[n].clone()).collect();
    let wages: Vec<f64> = order.iter().map(|&n| final_state.wages[n]).collect();

    let channel = Channel {
        grid_z: grid_z.to_vec(),
        grid_p: grid_p.to_vec(),
        q,
    };
    let mi = mutual_information(&channel);
    let total = final_state.expected_wage + mu * mi;
    history.push(total);
    Ok(ChannelSolution {
        channel,
        wages,
        lambda: final_state.lambda,
        expected_wage: final_state.expected_wage,
        mutual_information_nats: mi,
        mutual_information_bits: mi / std::f64::consts::LN_2,
        total_cost: total,
        iterations,
        objective_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::uniform_z_env;

    fn two_point_channel() -> Channel {
        Channel::new(
            vec![-0.25, 0.25],
            vec![0.5, 0.5],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        )
        .unwrap()
    }

    #[test]
    fn mi_of_two_point_example() {
        let mi = mutual_information(&two_point_channel());
        assert!((mi - 0.3680642).abs() < 1e-6, "mi = {mi}");
    }

    #[test]
    fn mi_of_deterministic_channel_is_output_entropy() {
        let ch = Channel::new(
            vec![-0.3, 0.0, 0.3],
            vec![0.25, 0.5, 0.25],
            vec![vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        )
        .unwrap();
        let mi = mutual_information(&ch);
        let want = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((mi - want).abs() < 1e-12);
    }

    #[test]
    fn mi_of_constant_channel_is_zero() {
        let ch = Channel::new(
            vec![-0.3, 0.3],
            vec![0.5, 0.5],
            vec![vec![0.7, 0.7], vec![0.3, 0.3]],
        )
        .unwrap();
        assert!(mutual_information(&ch).abs() < 1e-15);
    }

    #[test]
    fn mi_invariant_under_relabeling() {
        let ch = two_point_channel();
        let swapped = Channel::new(
            ch.grid_z.clone(),
            ch.grid_p.clone(),
            vec![ch.q[1].clone(), ch.q[0].clone()],
        )
        .unwrap();
        assert!((mutual_information(&ch) - mutual_information(&swapped)).abs() < 1e-15);
    }

    #[test]
    fn small_mu_approaches_partition_cost() {
        let env = uniform_z_env(-0.5, 0.5).unwrap();
        let (zs, ps) = quantile_grid(&env, 101);
        let sol = solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, 1e-4, 2, 7).unwrap();
        assert!(
            (sol.total_cost - 27.0).abs() / 27.0 < 0.05,
            "total {} vs 27",
            sol.total_cost
        );
        // lowest active wage is zero
        assert!(sol.wages[0].abs() < 1e-12);
        // objective history decreases monotonically
        for w in sol.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "objective rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn likelihood_ratio_of_categories_increases_in_z() {
        let env = uniform_z_env(-0.5, 0.5).unwrap();
        let (zs, ps) = quantile_grid(&env, 61);
        let sol = solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, 0.05, 2, 11).unwrap();
        // q_hi(z)/q_lo(z) strictly increasing where both entries are resolvable
        let lo = &sol.channel.q[0];
        let hi = &sol.channel.q[1];
        let mut prev = f64::NEG_INFINITY;
        for i in 0..zs.len() {
            if lo[i] > 1e-250 && hi[i] > 1e-250 {
                let r = hi[i].ln() - lo[i].ln();
                assert!(r >= prev - 1e-9, "ratio fell at grid point {i}");
                prev = r;
            }
        }
    }

    #[test]
    fn equal_scores_get_equal_columns() {
        // duplicated grid point: the solved channel must treat both alike
        let env = uniform_z_env(-0.5, 0.5).unwrap();
        let (mut zs, _) = quantile_grid(&env, 40);
        zs.push(zs[20]);
        let m = zs.len();
        let ps = vec![1.0 / m as f64; m];
        let sol = solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, 0.05, 2, 3).unwrap();
        for row in &sol.channel.q {
            assert!(
                (row[20] - row[m - 1]).abs() < 1e-6,
                "{} vs {}",
                row[20],
                row[m - 1]
            );
        }
    }

    #[test]
    fn mi_weakly_decreases_as_mu_grows() {
        let env = uniform_z_env(-0.5, 0.5).unwrap();
        let (zs, ps) = quantile_grid(&env, 61);
        let mut prev = f64::INFINITY;
        for mu in [1e-3, 1e-2, 1e-1, 1.0] {
            let sol = solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, mu, 2, 7).unwrap();
            assert!(
                sol.mutual_information_nats <= prev + 1e-9,
                "MI rose at mu = {mu}"
            );
            prev = sol.mutual_information_nats;
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let env = uniform_z_env(-0.5, 0.5).unwrap();
        let (zs, ps) = quantile_grid(&env, 11);
        assert!(solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, 0.0, 2, 1).is_err());
        assert!(solve_channel(&zs, &ps, &Utility::sqrt(), 1.0, 0.1, 1, 1).is_err());
        let neg = vec![-0.2; 11];
        assert!(matches!(
            solve_channel(&neg, &ps, &Utility::sqrt(), 1.0, 0.1, 2, 1),
            Err(Error::NoInformativeCell)
        ));
    }
}
