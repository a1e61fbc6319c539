//! Probability environments reduced to likelihood-ratio space.
//!
//! Everything downstream consumes the scalar statistic Z = 1 - p0/p1, whose
//! mean under the target action is zero and whose range lies below 1. An
//! environment exposes Z's distribution — cdf, pdf, quantiles, and interval
//! moments (mass and conditional mean) — rather than the raw data space.
//!
//! Interval moments are closed-form for the uniform and normal-signal kinds
//! (the normal case reduces to Gaussian partial expectations); tensor
//! Gauss–Legendre quadrature over a truncated domain of +-8 sigma around the
//! high-effort mean drives the two-dimensional integrals for product and
//! multi-task environments. The truncation leaves out O(1e-12) of mass, which
//! the refinement invariants in the test suite cover.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use serde::Serialize;
use statrs::function::erf;

/// Default Gauss–Legendre resolution per axis.
pub const DEFAULT_RESOLUTION: usize = 256;

/// Cells below this mass are treated as empty and rejected.
pub const MIN_CELL_MASS: f64 = 1e-14;

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf::erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf::erf_inv(2.0 * p - 1.0)
}

/// Distribution of the likelihood-ratio statistic Z under the target action.
#[derive(Debug, Clone)]
pub enum ZEnv {
    /// `Z ~ U[lo, hi]` with lo + hi = 0.
    Uniform { lo: f64, hi: f64, resolution: usize },
    /// Z = 1 - exp((1 - 2w)/(2 sigma^2)) with w ~ Normal(1, sigma^2).
    NormalSignal { sigma_sq: f64, resolution: usize },
    /// Finite atoms (z, mass), sorted by z; mass sums to 1, mean zero.
    DiscreteGrid { atoms: Vec<(f64, f64)> },
}

/// `Z ~ U[lo, hi]`; requires a symmetric interval so that E\[Z\] = 0.
pub fn uniform_z_env(lo: f64, hi: f64) -> Result<ZEnv> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidEnvironment(format!(
            "need lo < hi, got [{lo}, {hi}]"
        )));
    }
    if hi > 1.0 {
        return Err(Error::InvalidEnvironment(format!(
            "support must stay below 1, got hi = {hi}"
        )));
    }
    let mean = 0.5 * (lo + hi);
    if mean.abs() > 1e-12 {
        return Err(Error::NonzeroMean { lo, hi, mean });
    }
    Ok(ZEnv::Uniform {
        lo,
        hi,
        resolution: DEFAULT_RESOLUTION,
    })
}

/// Z for a unit effort shift observed through Normal(0, sigma^2) noise.
pub fn normal_signal_env(sigma_sq: f64) -> Result<ZEnv> {
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::InvalidEnvironment(format!(
            "noise variance must be positive, got {sigma_sq}"
        )));
    }
    Ok(ZEnv::NormalSignal {
        sigma_sq,
        resolution: DEFAULT_RESOLUTION,
    })
}

/// Finite scored atoms; masses must sum to 1 and the mean must be zero.
pub fn discrete_grid_env(mut atoms: Vec<(f64, f64)>) -> Result<ZEnv> {
    if atoms.is_empty() {
        return Err(Error::InvalidEnvironment("no atoms".into()));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mass: f64 = atoms.iter().map(|a| a.1).sum();
    let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
    if atoms.iter().any(|a| a.1 <= 0.0) {
        return Err(Error::InvalidEnvironment("atom with nonpositive mass".into()));
    }
    if atoms.iter().any(|a| a.0 >= 1.0) {
        return Err(Error::InvalidEnvironment("atom with z >= 1".into()));
    }
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::MalformedProbabilities(format!(
            "atom masses sum to {mass}"
        )));
    }
    if mean.abs() > 1e-9 {
        let (lo, hi) = (atoms[0].0, atoms[atoms.len() - 1].0);
        return Err(Error::NonzeroMean { lo, hi, mean });
    }
    Ok(ZEnv::DiscreteGrid { atoms })
}

impl ZEnv {
    /// Z(w) for the normal-signal model.
    pub fn z_of_omega(sigma_sq: f64, omega: f64) -> f64 {
        1.0 - ((1.0 - 2.0 * omega) / (2.0 * sigma_sq)).exp()
    }

    fn omega_of_z(sigma_sq: f64, z: f64) -> f64 {
        0.5 * (1.0 - 2.0 * sigma_sq * (1.0 - z).ln())
    }

    /// Support of Z; the normal-signal support is the +-8 sigma truncation
    /// of (-inf, 1) used by all quadrature.
    pub fn support(&self) -> (f64, f64) {
        match self {
            ZEnv::Uniform { lo, hi, .. } => (*lo, *hi),
            ZEnv::NormalSignal { sigma_sq, .. } => {
                let s = sigma_sq.sqrt();
                (
                    Self::z_of_omega(*sigma_sq, 1.0 - 8.0 * s),
                    Self::z_of_omega(*sigma_sq, 1.0 + 8.0 * s),
                )
            }
            ZEnv::DiscreteGrid { atoms } => (atoms[0].0, atoms[atoms.len() - 1].0),
        }
    }

    pub fn resolution(&self) -> usize {
        match self {
            ZEnv::Uniform { resolution, .. } | ZEnv::NormalSignal { resolution, .. } => {
                *resolution
            }
            ZEnv::DiscreteGrid { atoms } => atoms.len(),
        }
    }

    pub fn with_resolution(mut self, n: usize) -> Self {
        match &mut self {
            ZEnv::Uniform { resolution, .. } | ZEnv::NormalSignal { resolution, .. } => {
                *resolution = n.max(2)
            }
            ZEnv::DiscreteGrid { .. } => {}
        }
        self
    }

    /// P(Z <= z)
    pub fn cdf(&self, z: f64) -> f64 {
        match self {
            ZEnv::Uniform { lo, hi, .. } => ((z - lo) / (hi - lo)).clamp(0.0, 1.0),
            ZEnv::NormalSignal { sigma_sq, .. } => {
                if z >= 1.0 {
                    return 1.0;
                }
                let s = sigma_sq.sqrt();
                normal_cdf((Self::omega_of_z(*sigma_sq, z) - 1.0) / s)
            }
            ZEnv::DiscreteGrid { atoms } => atoms
                .iter()
                .take_while(|a| a.0 <= z)
                .map(|a| a.1)
                .sum(),
        }
    }

    /// Density of Z with respect to Lebesgue measure (continuous kinds);
    /// zero almost everywhere for the discrete grid.
    pub fn pdf(&self, z: f64) -> f64 {
        match self {
            ZEnv::Uniform { lo, hi, .. } => {
                if z >= *lo && z <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            ZEnv::NormalSignal { sigma_sq, .. } => {
                if z >= 1.0 {
                    return 0.0;
                }
                let s = sigma_sq.sqrt();
                let omega = Self::omega_of_z(*sigma_sq, z);
                // dw/dz = sigma^2/(1-z)
                normal_pdf((omega - 1.0) / s) / s * sigma_sq / (1.0 - z)
            }
            ZEnv::DiscreteGrid { .. } => 0.0,
        }
    }

    /// Inverse cdf.
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            ZEnv::Uniform { lo, hi, .. } => lo + p * (hi - lo),
            ZEnv::NormalSignal { sigma_sq, .. } => {
                let (zlo, zhi) = self.support();
                if p <= 0.0 {
                    return zlo;
                }
                if p >= 1.0 {
                    return zhi;
                }
                let s = sigma_sq.sqrt();
                Self::z_of_omega(*sigma_sq, 1.0 + s * normal_quantile(p)).clamp(zlo, zhi)
            }
            ZEnv::DiscreteGrid { atoms } => {
                let mut cum = 0.0;
                for &(z, m) in atoms {
                    cum += m;
                    if cum >= p - 1e-15 {
                        return z;
                    }
                }
                atoms[atoms.len() - 1].0
            }
        }
    }

    /// Mass and integral of z over `[lo, hi)`; bounds may be infinite.
    /// `closed_hi` includes atoms sitting exactly at `hi` (discrete kind only).
    pub(crate) fn seg_moments(&self, lo: f64, hi: f64, closed_hi: bool) -> (f64, f64) {
        match self {
            ZEnv::Uniform {
                lo: slo, hi: shi, ..
            } => {
                let a = lo.max(*slo);
                let b = hi.min(*shi);
                if b <= a {
                    return (0.0, 0.0);
                }
                let d = shi - slo;
                ((b - a) / d, 0.5 * (b * b - a * a) / d)
            }
            ZEnv::NormalSignal { sigma_sq, .. } => {
                let (zlo, zhi) = self.support();
                let a = lo.max(zlo);
                let b = hi.min(zhi);
                if b <= a {
                    return (0.0, 0.0);
                }
                let s = sigma_sq.sqrt();
                let ta = (Self::omega_of_z(*sigma_sq, a) - 1.0) / s;
                let tb = (Self::omega_of_z(*sigma_sq, b) - 1.0) / s;
                let mass = normal_cdf(tb) - normal_cdf(ta);
                // E[Z 1{.}] = mass - E[exp(X) 1{.}] with X = (1-2w)/(2 sigma^2);
                // the Gaussian partial expectation collapses to shifted cdfs.
                let shift = 1.0 / s;
                let expect = normal_cdf(tb + shift) - normal_cdf(ta + shift);
                (mass, mass - expect)
            }
            ZEnv::DiscreteGrid { atoms } => {
                let mut mass = 0.0;
                let mut first = 0.0;
                for &(z, m) in atoms {
                    let inside = z >= lo && (z < hi || (closed_hi && z <= hi));
                    if inside {
                        mass += m;
                        first += m * z;
                    }
                }
                (mass, first)
            }
        }
    }

    /// Mass and conditional mean of Z over `[lo, hi)`.
    pub fn cell_moments(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let (mass, first) = self.seg_moments(lo, hi, false);
        if mass <= MIN_CELL_MASS {
            return Err(Error::EmptyCell { lo, hi });
        }
        Ok((mass, first / mass))
    }

    /// Cells induced by strictly increasing interior cutoffs; the top cell is
    /// closed so a discrete grid's largest atom is always covered.
    pub fn partition_moments(&self, cutoffs: &[f64]) -> Result<Vec<(f64, f64)>> {
        validate_cutoffs(cutoffs)?;
        let (lo, hi) = self.support();
        let mut edges = Vec::with_capacity(cutoffs.len() + 2);
        edges.push(f64::NEG_INFINITY);
        edges.extend_from_slice(cutoffs);
        edges.push(f64::INFINITY);
        let _ = (lo, hi);
        let mut out = Vec::with_capacity(edges.len() - 1);
        for w in edges.windows(2) {
            let closed = w[1].is_infinite();
            let (mass, first) = self.seg_moments(w[0], w[1], closed);
            if mass <= MIN_CELL_MASS {
                return Err(Error::EmptyCell { lo: w[0], hi: w[1] });
            }
            out.push((mass, first / mass));
        }
        Ok(out)
    }

    /// `E[Z]` by Gauss–Legendre quadrature at the environment's resolution
    /// (exact summation for the discrete grid). Exposed for the mean-zero
    /// convergence checks.
    pub fn mean_z_quadrature(&self) -> f64 {
        let mut acc = 0.0;
        self.for_each_weighted_node(self.resolution(), f64::NEG_INFINITY, f64::INFINITY, |z, p| {
            acc += z * p;
        });
        acc
    }

    /// Visits quadrature nodes of Z's distribution restricted to `[zlo, zhi]`,
    /// passing (z, probability weight). Continuous kinds place `n`
    /// Gauss–Legendre nodes in their natural parametrization; the discrete
    /// kind visits its atoms.
    pub(crate) fn for_each_weighted_node<F: FnMut(f64, f64)>(
        &self,
        n: usize,
        zlo: f64,
        zhi: f64,
        mut f: F,
    ) {
        match self {
            ZEnv::Uniform { lo, hi, .. } => {
                let a = zlo.max(*lo);
                let b = zhi.min(*hi);
                if b <= a {
                    return;
                }
                let dens = 1.0 / (hi - lo);
                gauss_legendre(n).for_each_node(a, b, |z, w| f(z, w * dens));
            }
            ZEnv::NormalSignal { sigma_sq, .. } => {
                let (slo, shi) = self.support();
                let a = zlo.max(slo);
                let b = zhi.min(shi);
                if b <= a {
                    return;
                }
                let s = sigma_sq.sqrt();
                let wa = Self::omega_of_z(*sigma_sq, a);
                let wb = Self::omega_of_z(*sigma_sq, b);
                gauss_legendre(n).for_each_node(wa, wb, |omega, w| {
                    let z = Self::z_of_omega(*sigma_sq, omega);
                    f(z, w * normal_pdf((omega - 1.0) / s) / s);
                });
            }
            ZEnv::DiscreteGrid { atoms } => {
                for &(z, m) in atoms {
                    if z >= zlo && z <= zhi {
                        f(z, m);
                    }
                }
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ZEnv::DiscreteGrid { .. })
    }

    /// Atoms of a discrete grid.
    pub fn atoms(&self) -> Option<&[(f64, f64)]> {
        match self {
            ZEnv::DiscreteGrid { atoms } => Some(atoms),
            _ => None,
        }
    }
}

pub(crate) fn validate_cutoffs(cutoffs: &[f64]) -> Result<()> {
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::UnsortedCutoffs(cutoffs.to_vec()));
    }
    Ok(())
}

/// Probability mass and z-value vector of one performance category.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub mass: f64,
    pub z: Vec<f64>,
}

impl CellSummary {
    pub fn scalar(mass: f64, z: f64) -> Self {
        CellSummary { mass, z: vec![z] }
    }

    pub fn z1(&self) -> f64 {
        self.z[0]
    }
}

/// Two technologically independent agents: Z = (Z1, Z2) with a product law.
#[derive(Debug, Clone)]
pub struct ProductEnv {
    pub agent1: ZEnv,
    pub agent2: ZEnv,
    /// Nodes per axis for the joint quadrature.
    pub resolution: usize,
}

/// A separating line in (z1, z2)-space: cell+ = { normal . z >= offset }.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Line {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl Line {
    /// Normalizes the normal to unit length.
    pub fn new(normal: [f64; 2], offset: f64) -> Result<Self> {
        let n = (normal[0] * normal[0] + normal[1] * normal[1]).sqrt();
        if !(n > 1e-12) {
            return Err(Error::DegenerateLine);
        }
        Ok(Line {
            normal: [normal[0] / n, normal[1] / n],
            offset: offset / n,
        })
    }
}

impl ProductEnv {
    pub fn new(agent1: ZEnv, agent2: ZEnv) -> Self {
        ProductEnv {
            agent1,
            agent2,
            resolution: DEFAULT_RESOLUTION,
        }
    }

    pub fn with_resolution(mut self, n: usize) -> Self {
        self.resolution = n.max(2);
        self
    }

    /// Splits the plane along `line` and returns both cells' mass and
    /// (E[Z1|cell], E[Z2|cell]). Each cell is integrated directly — the
    /// complement is not derived from totals — so consistency checks across
    /// the two cells are meaningful.
    pub fn halfplane_moments(&self, line: &Line) -> Result<[CellSummary; 2]> {
        let line = Line::new(line.normal, line.offset)?;
        let plus = self.halfplane_cell(&line, true)?;
        let minus = self.halfplane_cell(&line, false)?;
        Ok([plus, minus])
    }

    /// One side of the line: side=true is { a z1 + b z2 >= t }.
    fn halfplane_cell(&self, line: &Line, side: bool) -> Result<CellSummary> {
        let [a, b] = line.normal;
        let t = line.offset;
        let (lo1, hi1) = self.agent1.support();
        let (lo2, hi2) = self.agent2.support();

        let mut mass = 0.0;
        let mut e1 = 0.0;
        let mut e2 = 0.0;

        if b.abs() < 1e-14 {
            // vertical split: membership depends on z1 alone and
            // independence pins E[Z2 | cell] = 0 exactly
            let cut = t / a;
            let (m, first) = if (a > 0.0) == side {
                self.agent1.seg_moments(cut, f64::INFINITY, true)
            } else {
                self.agent1.seg_moments(f64::NEG_INFINITY, cut, false)
            };
            mass = m;
            e1 = first;
        } else {
            // inner threshold c(z1) = (t - a z1)/b crosses the z2-support
            // edges at these z1 values; integrands are smooth between them
            let mut splits = vec![lo1, hi1];
            if a.abs() > 1e-14 {
                for edge in [lo2, hi2] {
                    let x = (t - b * edge) / a;
                    if x > lo1 && x < hi1 {
                        splits.push(x);
                    }
                }
            }
            splits.sort_by(f64::total_cmp);
            let n = self.resolution;
            for w in splits.windows(2) {
                if w[1] <= w[0] {
                    continue;
                }
                self.agent1.for_each_weighted_node(n, w[0], w[1], |z1, p1| {
                    let cut = (t - a * z1) / b;
                    let upper = (b > 0.0) == side;
                    let (m2, s2) = if upper {
                        self.agent2.seg_moments(cut, f64::INFINITY, true)
                    } else {
                        self.agent2.seg_moments(f64::NEG_INFINITY, cut, false)
                    };
                    mass += p1 * m2;
                    e1 += p1 * z1 * m2;
                    e2 += p1 * s2;
                });
            }
        }

        if mass <= MIN_CELL_MASS {
            return Err(Error::EmptyCell {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
            });
        }
        Ok(CellSummary {
            mass,
            z: vec![e1 / mass, e2 / mass],
        })
    }
}

/// Deviation costs for the two-task model; inducing both efforts must be the
/// most costly action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationCosts {
    pub c01: f64,
    pub c10: f64,
    pub c00: f64,
    pub c11: f64,
}

impl DeviationCosts {
    /// Deviation gains (c(11) - c(a)) ordered as [01, 10, 00].
    pub fn deltas(&self) -> [f64; 3] {
        [self.c11 - self.c01, self.c11 - self.c10, self.c11 - self.c00]
    }
}

/// Two independent tasks observed through normal noise, with the three
/// single- and double-shirking deviations. Per-task statistics are
/// Z_i = 1 - exp((1 - 2 w_i)/(2 sigma_i^2)); the deviation statistics are
/// Z01 = Z1, Z10 = Z2, Z00 = Z1 + Z2 - Z1 Z2.
#[derive(Debug, Clone)]
pub struct MultiTaskEnv {
    pub task1: ZEnv,
    pub task2: ZEnv,
    pub costs: DeviationCosts,
    pub resolution: usize,
}

pub fn multi_task_env(sigma1_sq: f64, sigma2_sq: f64, costs: DeviationCosts) -> Result<MultiTaskEnv> {
    for (a, c) in [("01", costs.c01), ("10", costs.c10), ("00", costs.c00)] {
        if !(costs.c11 > c) {
            return Err(Error::InvalidEnvironment(format!(
                "c(11) = {} must exceed c({a}) = {c}",
                costs.c11
            )));
        }
    }
    Ok(MultiTaskEnv {
        task1: normal_signal_env(sigma1_sq)?,
        task2: normal_signal_env(sigma2_sq)?,
        costs,
        resolution: DEFAULT_RESOLUTION,
    })
}

impl MultiTaskEnv {
    pub fn with_resolution(mut self, n: usize) -> Self {
        self.resolution = n.max(2);
        self
    }

    fn score_coeffs(weights: [f64; 3]) -> Result<(f64, f64, f64)> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::WeightPrecondition { weights });
        }
        let alpha = weights[0] + weights[2];
        let beta = weights[1] + weights[2];
        if !(alpha > 0.0) || !(beta > 0.0) {
            return Err(Error::WeightPrecondition { weights });
        }
        Ok((alpha, beta, weights[2]))
    }

    /// Range of the weighted score over the truncated support; the score is
    /// bilinear in (Z1, Z2) so its extremes sit at the support corners.
    pub fn score_range(&self, weights: [f64; 3]) -> Result<(f64, f64)> {
        let (alpha, beta, kappa) = Self::score_coeffs(weights)?;
        let (l1, h1) = self.task1.support();
        let (l2, h2) = self.task2.support();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for z1 in [l1, h1] {
            for z2 in [l2, h2] {
                let s = alpha * z1 + beta * z2 - kappa * z1 * z2;
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        Ok((lo, hi))
    }

    /// P(score < t); used to place cutoffs by quantile.
    pub fn score_cdf(&self, weights: [f64; 3], t: f64) -> Result<f64> {
        let cells = self.slab_moments_raw(weights, &[t])?;
        Ok(cells[0].0)
    }

    /// Score value at quantile level p by bisection.
    pub fn score_quantile(&self, weights: [f64; 3], p: f64) -> Result<f64> {
        let (mut lo, mut hi) = self.score_range(weights)?;
        let p = p.clamp(0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.score_cdf(weights, mid)? < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Cells are level-set slabs of the weighted score; per cell returns mass
    /// and conditional means of (Z01, Z10, Z00).
    pub fn zlambda_moments(&self, weights: [f64; 3], cutoffs: &[f64]) -> Result<Vec<CellSummary>> {
        validate_cutoffs(cutoffs)?;
        let raw = self.slab_moments_raw(weights, cutoffs)?;
        let mut out = Vec::with_capacity(raw.len());
        for (i, (mass, e01, e10, e00)) in raw.into_iter().enumerate() {
            if mass <= MIN_CELL_MASS {
                let lo = if i == 0 { f64::NEG_INFINITY } else { cutoffs[i - 1] };
                let hi = if i == cutoffs.len() { f64::INFINITY } else { cutoffs[i] };
                return Err(Error::EmptyCell { lo, hi });
            }
            out.push(CellSummary {
                mass,
                z: vec![e01 / mass, e10 / mass, e00 / mass],
            });
        }
        Ok(out)
    }

    /// Per-slab (mass, E[Z01 1], E[Z10 1], E[Z00 1]) without the empty-cell
    /// check. For fixed z1 the score is affine in z2, so each slab slices an
    /// interval out of the z2 axis that the inner environment integrates in
    /// closed form; the outer integral splits at the z1 values where slab
    /// boundaries cross the z2-support edges (and where the z2-coefficient
    /// changes sign), which keeps every piece smooth.
    fn slab_moments_raw(
        &self,
        weights: [f64; 3],
        cutoffs: &[f64],
    ) -> Result<Vec<(f64, f64, f64, f64)>> {
        let (alpha, beta, kappa) = Self::score_coeffs(weights)?;
        let (l1, h1) = self.task1.support();
        let (l2, h2) = self.task2.support();

        let mut splits = vec![l1, h1];
        if kappa > 0.0 {
            let sign_change = beta / kappa;
            if sign_change > l1 && sign_change < h1 {
                splits.push(sign_change);
            }
        }
        for &t in cutoffs {
            for edge in [l2, h2] {
                let denom = alpha - kappa * edge;
                if denom.abs() > 1e-14 {
                    let x = (t - beta * edge) / denom;
                    if x > l1 && x < h1 {
                        splits.push(x);
                    }
                }
            }
        }
        splits.sort_by(f64::total_cmp);
        splits.dedup_by(|a, b| (*a - *b).abs() < 1e-15);

        let ncells = cutoffs.len() + 1;
        let mut acc = vec![(0.0, 0.0, 0.0, 0.0); ncells];
        // budget nodes across pieces by their share of the (omega-space)
        // span so total work tracks the resolution, not the piece count
        let omega_span = |z: f64| -> f64 {
            match &self.task1 {
                ZEnv::NormalSignal { sigma_sq, .. } => ZEnv::omega_of_z(*sigma_sq, z),
                _ => z,
            }
        };
        let total_span = omega_span(h1) - omega_span(l1);
        for w in splits.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let frac = ((omega_span(w[1]) - omega_span(w[0])) / total_span).clamp(0.0, 1.0);
            let n = ((self.resolution as f64 * frac).ceil() as usize).max(24);
            self.task1.for_each_weighted_node(n, w[0], w[1], |z1, p1| {
                let g = beta - kappa * z1;
                let base = alpha * z1;
                for cell in 0..ncells {
                    let tlo = if cell == 0 {
                        f64::NEG_INFINITY
                    } else {
                        cutoffs[cell - 1]
                    };
                    let thi = if cell == ncells - 1 {
                        f64::INFINITY
                    } else {
                        cutoffs[cell]
                    };
                    let (m2, s2) = if g.abs() < 1e-14 {
                        if base >= tlo && base < thi {
                            self.task2.seg_moments(f64::NEG_INFINITY, f64::INFINITY, true)
                        } else {
                            (0.0, 0.0)
                        }
                    } else {
                        let (a2, b2) = if g > 0.0 {
                            ((tlo - base) / g, (thi - base) / g)
                        } else {
                            ((thi - base) / g, (tlo - base) / g)
                        };
                        self.task2.seg_moments(a2, b2, false)
                    };
                    if m2 == 0.0 && s2 == 0.0 {
                        continue;
                    }
                    let e = &mut acc[cell];
                    e.0 += p1 * m2;
                    e.1 += p1 * z1 * m2;
                    e.2 += p1 * s2;
                    e.3 += p1 * (z1 * m2 + (1.0 - z1) * s2);
                }
            });
        }
        Ok(acc)
    }
}
