//! Derivative-free minimization building blocks: golden-section line search,
//! Nelder–Mead simplex, and cyclic coordinate descent. All deterministic.

/// Golden-section minimizer of a function on [a, b]; returns (x, f(x)).
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 > f2 {
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
        if (hi - lo).abs() <= xtol * (1.0 + hi.abs()) {
            break;
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = f(xm);
    if f1 < fm && f1 <= f2 {
        (x1, f1)
    } else if f2 < fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// One pass of cyclic coordinate descent with golden-section searches,
/// each coordinate bracketed by `bracket(i, x)`.
pub fn coordinate_descent<F, B>(
    x: &mut [f64],
    mut f: F,
    mut bracket: B,
    sweeps: usize,
    xtol: f64,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
    B: FnMut(usize, &[f64]) -> (f64, f64),
{
    let mut best = f(x);
    for _ in 0..sweeps {
        let before = best;
        for i in 0..x.len() {
            let (lo, hi) = bracket(i, x);
            if !(hi > lo) {
                continue;
            }
            let xi = x[i];
            let (xb, fb) = golden_min(
                |v| {
                    x[i] = v;
                    let val = f(x);
                    x[i] = xi;
                    val
                },
                lo,
                hi,
                xtol,
            );
            if fb < best {
                x[i] = xb;
                best = fb;
            }
        }
        if before - best <= 1e-13 * (1.0 + best.abs()) {
            break;
        }
    }
    best
}

/// Result of a Nelder–Mead run.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction 1/2,
/// shrink 1/2) from `x0` with per-coordinate initial `step`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
    xtol: f64,
) -> SimplexResult {
    let dim = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let v0 = eval(x0, &mut evals);
    simplex.push((x0.to_vec(), v0));
    for i in 0..dim {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs() } else { step };
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        let spread = (worst - best).abs();
        let diameter = (0..dim)
            .map(|k| {
                simplex
                    .iter()
                    .map(|(x, _)| x[k])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    })
            })
            .map(|(lo, hi)| hi - lo)
            .fold(0.0f64, f64::max);
        if spread <= ftol * (1.0 + best.abs()) && diameter <= xtol {
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / dim as f64)
            .collect();
        let reflect: Vec<f64> = (0..dim)
            .map(|k| centroid[k] + (centroid[k] - simplex[dim].0[k]))
            .collect();
        let fr = eval(&reflect, &mut evals);

        if fr < simplex[0].1 {
            let expand: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 2.0 * (centroid[k] - simplex[dim].0[k]))
                .collect();
            let fe = eval(&expand, &mut evals);
            simplex[dim] = if fe < fr { (expand, fe) } else { (reflect, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflect, fr);
        } else {
            let outside = fr < simplex[dim].1;
            let anchor = if outside { &reflect } else { &simplex[dim].0 };
            let contract: Vec<f64> = (0..dim)
                .map(|k| centroid[k] + 0.5 * (anchor[k] - centroid[k]))
                .collect();
            let fc = eval(&contract, &mut evals);
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (contract, fc);
            } else {
                // shrink toward the best vertex
                let best_x = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    for (xk, bk) in entry.0.iter_mut().zip(&best_x) {
                        *xk = bk + 0.5 * (*xk - bk);
                    }
                    entry.1 = eval(&entry.0, &mut evals);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    SimplexResult {
        x: simplex[0].0.clone(),
        value: simplex[0].1,
        evals,
    }
}
