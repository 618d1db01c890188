//! Monte-Carlo statistics over path ensembles: p-th moments with batch-means
//! confidence intervals, maximal-inequality ratio (BDG-constant) estimators,
//! sqrt(p)-growth and interpolation diagnostics, Doob ratios, empirical tails
//! with Wilson intervals, and the power-series Chernoff tail bound.
//!
//! Conventions, used everywhere: 95% intervals, batch means with 40 batches
//! for moments, Wilson score for proportions, 3*CI slack when accepting
//! inequalities.

use statrs::distribution::{ContinuousCDF, StudentsT};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gammanorm::GammaOperator;
use crate::linalg::C64;
use crate::model::LqSpace;
use crate::report::Estimate;
use crate::simulate::{
    ito_integral, wiener_increments, History, StepProcess, Strategy, TimeGrid,
};

pub const BATCHES: usize = 40;
const Z95: f64 = 1.959963984540054;

/// 95% t-interval for the mean from equal-size batch means.
pub fn batch_means_ci(batch_means: &[f64]) -> Estimate {
    let b = batch_means.len();
    let mean = batch_means.iter().sum::<f64>() / b as f64;
    if b < 2 {
        return Estimate::exact(mean);
    }
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b as f64 - 1.0);
    let t = StudentsT::new(0.0, 1.0, b as f64 - 1.0)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    let hw = t * (var / b as f64).sqrt();
    Estimate {
        value: mean,
        ci_low: mean - hw,
        ci_high: mean + hw,
    }
}

/// A p-th power mean `(E Z^p)^{1/p}` with its confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub p: f64,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

impl MomentReport {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            value: self.value,
            ci_low: self.ci_low,
            ci_high: self.ci_high,
        }
    }
}

/// Power mean `(mean of v^p)^{1/p}` with a batch-means CI. Values are split
/// into 40 batches in their given (path-index) order.
pub fn estimate_pth_moment(values: &[f64], p: f64) -> Result<MomentReport> {
    if !(p > 0.0) {
        return Err(Error::invalid("moment exponent p must be positive"));
    }
    if values.len() < 1000 {
        return Err(Error::invalid("moment estimation needs at least 1000 values"));
    }
    let per = values.len() / BATCHES;
    let used = per * BATCHES;
    let batch_means: Vec<f64> = (0..BATCHES)
        .map(|b| {
            values[b * per..(b + 1) * per]
                .iter()
                .map(|v| v.powf(p))
                .sum::<f64>()
                / per as f64
        })
        .collect();
    let ci = batch_means_ci(&batch_means);
    let inv = 1.0 / p;
    Ok(MomentReport {
        p,
        value: ci.value.max(0.0).powf(inv),
        ci_low: ci.ci_low.max(0.0).powf(inv),
        ci_high: ci.ci_high.max(0.0).powf(inv),
        n: used,
    })
}

/// Terminal-free maximal ratio of the discrete stochastic integral:
/// `sup_n (E ||sum_{i<=n} G_i dW_i||^p)^{1/p} / (E ||G||_{L^2(0,t_n)gamma}^p)^{1/p}`,
/// realized as the worst coarse grid node. The reported CI is the batch-means
/// interval of the per-batch ratio at that node.
pub fn bdg_ratio(
    proc: &StepProcess,
    grid: &TimeGrid,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<MomentReport> {
    if !(p > 0.0) {
        return Err(Error::invalid("moment exponent p must be positive"));
    }
    if n_paths < 1000 {
        return Err(Error::invalid("bdg_ratio needs at least 1000 paths"));
    }
    let n_coarse = proc.n_steps;
    if grid.n_steps() % n_coarse != 0 {
        return Err(Error::GridMismatch);
    }
    let factor = grid.n_steps() / n_coarse;
    let per = n_paths / BATCHES;

    use rayon::prelude::*;
    let per_batch: Result<Vec<(Vec<f64>, Vec<f64>)>> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut num = vec![0.0f64; n_coarse];
            let mut den = vec![0.0f64; n_coarse];
            for s in 0..per {
                let path_id = (b * per + s) as u64;
                let incs = wiener_increments(seed, path_id, grid, proc.noise_dim);
                let path = ito_integral(proc, grid, &incs)?;
                let space = path.space;
                let mut energy = vec![0.0f64; space.d];
                for c in 0..n_coarse {
                    let node = &path.nodes[(c + 1) * factor];
                    num[c] += space.norm_vec(node).powf(p);
                    for k in 0..space.d {
                        energy[k] += path.coarse_dts[c] * path.coarse_row_energy[c][k];
                    }
                    let moduli: Vec<f64> = energy.iter().map(|e| e.sqrt()).collect();
                    den[c] += space.norm_abs(&moduli).powf(p);
                }
            }
            Ok((num, den))
        })
        .collect();
    let per_batch = per_batch?;

    let mut worst = (0usize, f64::NEG_INFINITY);
    for c in 0..n_coarse {
        let num: f64 = per_batch.iter().map(|(n, _)| n[c]).sum();
        let den: f64 = per_batch.iter().map(|(_, d)| d[c]).sum();
        if den == 0.0 {
            return Err(Error::invalid("integrand has zero norm on the grid"));
        }
        let r = (num / den).powf(1.0 / p);
        if r > worst.1 {
            worst = (c, r);
        }
    }
    let c = worst.0;
    let batch_ratios: Vec<f64> = per_batch
        .iter()
        .map(|(n, d)| (n[c] / d[c]).powf(1.0 / p))
        .collect();
    let ci = batch_means_ci(&batch_ratios);
    Ok(MomentReport {
        p,
        value: worst.1,
        ci_low: ci.ci_low,
        ci_high: ci.ci_high,
        n: per * BATCHES,
    })
}

/// Named adversarial integrand family over which ratio suprema are taken.
/// Every member is adapted by construction and has pathwise process norm
/// at most 1 on a grid of total length `t_end` (equal to 1 for the
/// unimodular members).
pub struct StrategyFamily {
    pub members: Vec<(String, StepProcess)>,
}

impl StrategyFamily {
    pub fn adversarial(q: f64, d: usize, m: usize, n_steps: usize, t_end: f64) -> Result<Self> {
        if d == 0 || m == 0 || n_steps == 0 || !(t_end > 0.0) {
            return Err(Error::invalid("family needs positive dimensions and horizon"));
        }
        let scale = 1.0 / t_end.sqrt();
        let e1 = unit_rank_one(scale, 0, 0, d, m, q)?;

        let mut members: Vec<(String, StepProcess)> = Vec::new();

        // deterministic with oscillating sign
        let osc: Vec<GammaOperator> = (0..n_steps)
            .map(|i| e1.scaled(if i % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        members.push(("deterministic-oscillatory".into(), StepProcess::deterministic(osc)?));

        // sign flips driven by the last observed increment
        let f = e1.clone();
        let random_sign: Strategy = Arc::new(move |h: &History| {
            let s = h
                .increments
                .last()
                .map(|inc| if inc[0] >= 0.0 { 1.0 } else { -1.0 })
                .unwrap_or(1.0);
            f.scaled(s)
        });
        members.push((
            "random-sign".into(),
            StepProcess::adapted(n_steps, m, random_sign)?,
        ));

        // switch off once the running norm crosses a barrier
        let f = e1.clone();
        let space = LqSpace::new(q, d)?;
        let stop_loss: Strategy = Arc::new(move |h: &History| {
            let hit = h.states.iter().any(|s| space.norm_vec(s) >= 1.0);
            if hit {
                f.scaled(0.0)
            } else {
                f.clone()
            }
        });
        members.push((
            "stop-loss".into(),
            StepProcess::adapted(n_steps, m, stop_loss)?,
        ));

        // alternate concentrated and spread-out operators
        if d >= 2 && m >= 2 {
            let spread = {
                let mut op = unit_rank_one(scale / 2f64.sqrt(), 0, 0, d, m, q)?;
                let other = unit_rank_one(scale / 2f64.sqrt(), 1, 1, d, m, q)?;
                op.entries = &op.entries + &other.entries;
                op
            };
            let rank_varying: Vec<GammaOperator> = (0..n_steps)
                .map(|i| if i % 2 == 0 { e1.clone() } else { spread.clone() })
                .collect();
            members.push((
                "rank-varying".into(),
                StepProcess::deterministic(rank_varying)?,
            ));
        }

        Ok(StrategyFamily { members })
    }
}

fn unit_rank_one(
    scale: f64,
    row: usize,
    col: usize,
    d: usize,
    m: usize,
    q: f64,
) -> Result<GammaOperator> {
    let mut h = vec![0.0; m];
    h[col] = scale;
    let mut x = vec![C64::new(0.0, 0.0); d];
    x[row] = C64::new(1.0, 0.0);
    GammaOperator::rank_one(&h, &x, q)
}

/// Lower-bound estimate of the maximal ratio constant over a family:
/// max over members of the upper confidence bound of their ratio.
pub struct BdgEstimate {
    pub k_hat: f64,
    pub per_member: Vec<(String, MomentReport)>,
}

pub fn bdg_constant_estimate(
    family: &StrategyFamily,
    grid: &TimeGrid,
    p: f64,
    n_paths: usize,
    seed: u64,
) -> Result<BdgEstimate> {
    if family.members.is_empty() {
        return Err(Error::invalid("empty strategy family"));
    }
    let mut per_member = Vec::new();
    let mut k_hat = f64::NEG_INFINITY;
    for (i, (name, proc)) in family.members.iter().enumerate() {
        let r = bdg_ratio(proc, grid, p, n_paths, seed.wrapping_add(i as u64))?;
        k_hat = k_hat.max(r.ci_high);
        per_member.push((name.clone(), r));
    }
    Ok(BdgEstimate { k_hat, per_member })
}

/// Least-squares slope of log K vs log p, with the regression-based 95% CI.
pub fn sqrt_growth_slope(ps: &[f64], ks: &[f64]) -> Result<Estimate> {
    if ps.len() != ks.len() || ps.len() < 4 {
        return Err(Error::invalid("slope fit needs at least 4 (p, K) points"));
    }
    let xs: Vec<f64> = ps.iter().map(|p| p.ln()).collect();
    let ys: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    linear_fit_slope(&xs, &ys)
}

fn linear_fit_slope(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xm).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("degenerate abscissae in slope fit"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    if xs.len() == 2 {
        return Ok(Estimate::exact(slope));
    }
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let dof = n - 2.0;
    let se = (ssr / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    Ok(Estimate {
        value: slope,
        ci_low: slope - t * se,
        ci_high: slope + t * se,
    })
}

/// Interpolation defect `K_2^{1-theta} K_p^theta - K_q` with theta solving
/// `1/q = (1-theta)/2 + theta/p`; intervals propagated by monotonicity.
pub fn interpolation_gap(
    p: f64,
    q: f64,
    k_l2: &MomentReport,
    k_lq: &MomentReport,
    k_lp: &MomentReport,
) -> Result<Estimate> {
    if !(2.0 <= q && q <= p) {
        return Err(Error::invalid("interpolation needs 2 <= q <= p"));
    }
    let theta = if p == 2.0 {
        0.0
    } else {
        (1.0 / q - 0.5) / (1.0 / p - 0.5)
    };
    let comb = |a: f64, b: f64| a.powf(1.0 - theta) * b.powf(theta);
    Ok(Estimate {
        value: comb(k_l2.value, k_lp.value) - k_lq.value,
        ci_low: comb(k_l2.ci_low.max(0.0), k_lp.ci_low.max(0.0)) - k_lq.ci_high,
        ci_high: comb(k_l2.ci_high, k_lp.ci_high) - k_lq.ci_low,
    })
}

/// `(E sup^p)^{1/p} / (E terminal^p)^{1/p}` with a batch-means CI of the
/// per-batch ratio.
pub fn doob_ratio(sups: &[f64], terminals: &[f64], p: f64) -> Result<MomentReport> {
    if !(p > 1.0) {
        return Err(Error::invalid("Doob ratio needs p > 1"));
    }
    if sups.len() != terminals.len() || sups.len() < 1000 {
        return Err(Error::invalid("Doob ratio needs matched ensembles of >= 1000 paths"));
    }
    let per = sups.len() / BATCHES;
    let mut ratios = Vec::with_capacity(BATCHES);
    let (mut num_tot, mut den_tot) = (0.0f64, 0.0f64);
    for b in 0..BATCHES {
        let num: f64 = sups[b * per..(b + 1) * per].iter().map(|v| v.powf(p)).sum();
        let den: f64 = terminals[b * per..(b + 1) * per].iter().map(|v| v.powf(p)).sum();
        if den == 0.0 {
            return Err(Error::invalid("degenerate terminal values"));
        }
        ratios.push((num / den).powf(1.0 / p));
        num_tot += num;
        den_tot += den;
    }
    let ci = batch_means_ci(&ratios);
    Ok(MomentReport {
        p,
        value: (num_tot / den_tot).powf(1.0 / p),
        ci_low: ci.ci_low,
        ci_high: ci.ci_high,
        n: per * BATCHES,
    })
}

/// Empirical survival function with Wilson 95% intervals, plus the inputs of
/// the subgaussian bound comparison.
pub struct TailReport {
    pub lambdas: Vec<f64>,
    pub probs: Vec<Estimate>,
    pub n: usize,
}

pub fn wilson_interval(successes: usize, n: usize) -> Estimate {
    let nf = n as f64;
    let phat = successes as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (phat + z2 / (2.0 * nf)) / denom;
    let half = Z95 * (phat * (1.0 - phat) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    Estimate {
        value: phat,
        ci_low: (center - half).max(0.0),
        ci_high: (center + half).min(1.0),
    }
}

pub fn empirical_tail(sups: &[f64], lambda_grid: &[f64]) -> Result<TailReport> {
    if sups.is_empty() || lambda_grid.is_empty() {
        return Err(Error::invalid("empty ensemble or lambda grid"));
    }
    if lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("lambda grid must be strictly increasing"));
    }
    let n = sups.len();
    let mut sorted = sups.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let probs = lambda_grid
        .iter()
        .map(|&lam| {
            let below = sorted.partition_point(|&s| s < lam);
            wilson_interval(n - below, n)
        })
        .collect();
    Ok(TailReport {
        lambdas: lambda_grid.to_vec(),
        probs,
        n,
    })
}

/// Slope of `-log P(sup >= lambda)` against `lambda^2` over the grid points
/// with nondegenerate probabilities; positive slope with confidence is the
/// subgaussianity diagnostic.
pub fn tail_slope(report: &TailReport) -> Result<Estimate> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lam, p) in report.lambdas.iter().zip(&report.probs) {
        if p.value > 0.0 && p.value < 1.0 {
            xs.push(lam * lam);
            ys.push(-(p.value.ln()));
        }
    }
    if xs.len() < 3 {
        return Err(Error::invalid("too few nondegenerate tail points for a slope"));
    }
    linear_fit_slope(&xs, &ys)
}

/// The power-series tail bound at its optimal series parameter.
///
/// The moment ladder (E sup^{2n})^{1/(2n)} <= C sqrt(2nM) majorizes
/// E exp(eps sup^2) by the geometric series sum_n (2 M C^2 eps e)^n.
/// That series has ratio 1/2 (hence value 2) at eps* = 1/(4 e M C^2);
/// any larger eps, in particular 1/(2 e M C^2), makes it diverge.
pub struct Exp1Bound {
    /// eps* = 1 / (4 e M C^2): the parameter making the series ratio 1/2.
    pub eps_star: f64,
    /// 2 exp(-eps* lambda^2).
    pub bound: f64,
    /// Partial sums of sum_n (C^2 2 M eps* e)^n, converging to 2.
    pub partial_sums: Vec<f64>,
}

pub fn exp1_bound(m_bound: f64, c_tail: f64, lambda: f64) -> Result<Exp1Bound> {
    if !(m_bound > 0.0) || !(c_tail > 0.0) {
        return Err(Error::invalid("tail bound needs positive M and C"));
    }
    let eps_star = 1.0 / (4.0 * std::f64::consts::E * m_bound * c_tail * c_tail);
    let ratio = c_tail * c_tail * 2.0 * m_bound * eps_star * std::f64::consts::E;
    let mut partial_sums = Vec::with_capacity(30);
    let mut term = 1.0;
    let mut sum = 0.0;
    for _ in 0..30 {
        sum += term;
        partial_sums.push(sum);
        term *= ratio;
    }
    Ok(Exp1Bound {
        eps_star,
        bound: 2.0 * (-eps_star * lambda * lambda).exp(),
        partial_sums,
    })
}

/// Per-even-moment subgaussian check `(E sup^{2n})^{1/(2n)} <= C sqrt(2n M)`
/// for n = 1..5, and the smallest constant passing all of them.
pub struct ChernoffCheck {
    pub per_n: Vec<(usize, bool)>,
    pub calibrated_c: f64,
}

pub fn markov_chernoff_check(
    moments: &[MomentReport],
    m_bound: f64,
    c_tail: f64,
) -> Result<ChernoffCheck> {
    if moments.len() != 5 {
        return Err(Error::invalid("need moment reports for p = 2, 4, 6, 8, 10"));
    }
    let mut per_n = Vec::with_capacity(5);
    let mut calibrated: f64 = 0.0;
    for (idx, rep) in moments.iter().enumerate() {
        let n = idx + 1;
        if (rep.p - 2.0 * n as f64).abs() > 1e-12 {
            return Err(Error::invalid("moment reports must cover p = 2n, n = 1..5"));
        }
        let cap = (2.0 * n as f64 * m_bound).sqrt();
        per_n.push((n, rep.ci_high <= c_tail * cap));
        calibrated = calibrated.max(rep.ci_high / cap);
    }
    Ok(ChernoffCheck {
        per_n,
        calibrated_c: calibrated,
    })
}

/// Spearman rank correlation, for trend detection across a family index.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let (mut num, mut dx, mut dy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        num += (a - mx) * (b - mx);
        dx += (a - mx).powi(2);
        dy += (b - mx).powi(2);
    }
    if dx == 0.0 || dy == 0.0 {
        return 0.0;
    }
    num / (dx * dy).sqrt()
}
