//! Gamma-radonifying norms of finite operators H -> l^q.
//!
//! For X = l^q the canonical deterministic value is the square-function norm
//! `|| (sum_j |F h_j|^2)^{1/2} ||_q`; Gaussian Monte-Carlo sums serve as the
//! cross-validation oracle, with two-sided Khintchine bands
//! `sfn <= gamma-mc <= kappa_q * sfn` for q >= 2.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::estimators::batch_means_ci;
use crate::linalg::{CMat, CVec, C64};
use crate::model::LqSpace;
use crate::report::Estimate;
use crate::rng::stream_rng;

/// A finite operator H -> l^q_d, stored as the d x m matrix of images of an
/// orthonormal basis of the noise space H.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaOperator {
    pub entries: CMat,
    pub codomain: LqSpace,
}

impl GammaOperator {
    pub fn new(entries: CMat, q: f64) -> Result<Self> {
        let d = entries.nrows();
        let codomain = LqSpace::new(q, d)?;
        Ok(GammaOperator { entries, codomain })
    }

    pub fn zero(d: usize, m: usize, q: f64) -> Result<Self> {
        GammaOperator::new(CMat::from_elem((d, m), C64::new(0.0, 0.0)), q)
    }

    /// Rank-one operator `h (x) x`, i.e. `F e_j = h_j x`.
    pub fn rank_one(h: &[f64], x: &[C64], q: f64) -> Result<Self> {
        let d = x.len();
        let m = h.len();
        let mut entries = CMat::from_elem((d, m), C64::new(0.0, 0.0));
        for k in 0..d {
            for j in 0..m {
                entries[[k, j]] = x[k] * h[j];
            }
        }
        GammaOperator::new(entries, q)
    }

    pub fn noise_dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn scaled(&self, c: f64) -> Self {
        GammaOperator {
            entries: self.entries.mapv(|v| v * c),
            codomain: self.codomain,
        }
    }

    /// Apply to a real noise vector.
    pub fn apply_real(&self, gamma_vec: &[f64]) -> CVec {
        let (d, m) = (self.dim(), self.noise_dim());
        debug_assert_eq!(gamma_vec.len(), m);
        CVec::from_iter((0..d).map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..m {
                acc += self.entries[[k, j]] * gamma_vec[j];
            }
            acc
        }))
    }

    /// Left composition `B . F` with a d' x d matrix.
    pub fn composed_with(&self, b: &CMat) -> Result<Self> {
        if b.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: b.ncols(),
            });
        }
        GammaOperator::new(b.dot(&self.entries), self.codomain.q)
    }
}

/// Square-function norm `(sum_k (sum_j |F_kj|^2)^{q/2})^{1/q}`.
pub fn square_function_norm(f: &GammaOperator) -> f64 {
    let row_norms: Vec<f64> = (0..f.dim())
        .map(|k| {
            (0..f.noise_dim())
                .map(|j| f.entries[[k, j]].norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    f.codomain.norm_abs(&row_norms)
}

/// Gaussian absolute moment `kappa_q = (E|Z|^q)^{1/q}`,
/// closed form `(2^{q/2} Gamma((q+1)/2) / sqrt(pi))^{1/q}`.
pub fn kappa_q(q: f64) -> f64 {
    let moment = 2f64.powf(q / 2.0) * gamma((q + 1.0) / 2.0) / std::f64::consts::PI.sqrt();
    moment.powf(1.0 / q)
}

const BATCHES: usize = 40;

fn sqrt_mean_estimate(batch_means: &[f64]) -> Estimate {
    let sq = batch_means_ci(batch_means);
    Estimate {
        value: sq.value.max(0.0).sqrt(),
        ci_low: sq.ci_low.max(0.0).sqrt(),
        ci_high: sq.ci_high.max(0.0).sqrt(),
    }
}

/// `(E || sum_j gamma_j F h_j ||_X^2)^{1/2}` by Monte Carlo, with a
/// batch-means 95% confidence interval.
pub fn gamma_norm_mc(f: &GammaOperator, n: usize, seed: u64) -> Result<Estimate> {
    if n < 1000 {
        return Err(Error::invalid("gamma_norm_mc needs at least 1000 samples"));
    }
    let per_batch = n / BATCHES;
    let m = f.noise_dim();
    let batch_means: Vec<f64> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let mut gv = vec![0.0f64; m];
            let mut acc = 0.0;
            for _ in 0..per_batch {
                for g in gv.iter_mut() {
                    *g = rng.sample::<f64, _>(rand_distr::StandardNormal);
                }
                let v = f.apply_real(&gv);
                let nrm = f.codomain.norm_vec(&v);
                acc += nrm * nrm;
            }
            acc / per_batch as f64
        })
        .collect();
    Ok(sqrt_mean_estimate(&batch_means))
}

/// `||G||_{L^2(R_+; gamma(H,X))}` for a step-constant operator sequence:
/// `(sum_i dt_i * sfn(G_i)^2)^{1/2}`.
pub fn process_l2gamma_norm(ops: &[GammaOperator], dts: &[f64]) -> Result<f64> {
    if ops.is_empty() || ops.len() != dts.len() {
        return Err(Error::invalid("empty grid or step/operator count mismatch"));
    }
    let mut acc = 0.0;
    for (op, dt) in ops.iter().zip(dts) {
        let s = square_function_norm(op);
        acc += dt * s * s;
    }
    Ok(acc.sqrt())
}

/// Square-function value of `||G||_{gamma(L^2(0,T;H), X)}` for a
/// step-constant sequence: `|| k -> (sum_i dt_i sum_j |G_i,kj|^2)^{1/2} ||_q`.
pub fn process_square_function_norm(ops: &[GammaOperator], dts: &[f64]) -> Result<f64> {
    if ops.is_empty() || ops.len() != dts.len() {
        return Err(Error::invalid("empty grid or step/operator count mismatch"));
    }
    let d = ops[0].dim();
    let mut energy = vec![0.0f64; d];
    for (op, dt) in ops.iter().zip(dts) {
        for k in 0..d {
            let row: f64 = (0..op.noise_dim())
                .map(|j| op.entries[[k, j]].norm_sqr())
                .sum();
            energy[k] += dt * row;
        }
    }
    let moduli: Vec<f64> = energy.iter().map(|e| e.sqrt()).collect();
    Ok(ops[0].codomain.norm_abs(&moduli))
}

/// `||G||_{gamma(L^2(0,T;H), X)}` estimated through the Gaussian sum over the
/// step-indicator tensor basis: `(E || sum_i sqrt(dt_i) G_i gamma_i ||^2)^{1/2}`.
pub fn process_full_gamma_norm(
    ops: &[GammaOperator],
    dts: &[f64],
    n: usize,
    seed: u64,
) -> Result<Estimate> {
    if ops.is_empty() || ops.len() != dts.len() {
        return Err(Error::invalid("empty grid or step/operator count mismatch"));
    }
    if n < 1000 {
        return Err(Error::invalid(
            "process_full_gamma_norm needs at least 1000 samples",
        ));
    }
    let per_batch = n / BATCHES;
    let d = ops[0].dim();
    let m = ops[0].noise_dim();
    let q = ops[0].codomain;
    let roots: Vec<f64> = dts.iter().map(|dt| dt.sqrt()).collect();
    let batch_means: Vec<f64> = (0..BATCHES)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let mut gv = vec![0.0f64; m];
            let mut acc = 0.0;
            for _ in 0..per_batch {
                let mut v = CVec::from_elem(d, C64::new(0.0, 0.0));
                for (i, op) in ops.iter().enumerate() {
                    for g in gv.iter_mut() {
                        *g = rng.sample::<f64, _>(rand_distr::StandardNormal);
                    }
                    let w = op.apply_real(&gv);
                    for k in 0..d {
                        v[k] += w[k] * roots[i];
                    }
                }
                let nrm = q.norm_vec(&v);
                acc += nrm * nrm;
            }
            acc / per_batch as f64
        })
        .collect();
    Ok(sqrt_mean_estimate(&batch_means))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::identity;
    use approx::assert_abs_diff_eq;

    fn from_rows(rows: &[&[f64]], q: f64) -> GammaOperator {
        let d = rows.len();
        let m = rows[0].len();
        let mut e = CMat::from_elem((d, m), C64::new(0.0, 0.0));
        for i in 0..d {
            for j in 0..m {
                e[[i, j]] = C64::new(rows[i][j], 0.0);
            }
        }
        GammaOperator::new(e, q).unwrap()
    }

    #[test]
    fn square_function_norm_identity_l2() {
        let f = GammaOperator::new(identity(2), 2.0).unwrap();
        assert_abs_diff_eq!(square_function_norm(&f), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn square_function_norm_rank_one_factorizes() {
        // ||h|| = 2, ||x||_q = 3 -> 6
        let h = [2.0, 0.0];
        let x = [C64::new(3.0, 0.0), C64::new(0.0, 0.0)];
        for &q in &[1.0, 2.0, 3.0, 4.0] {
            let f = GammaOperator::rank_one(&h, &x, q).unwrap();
            assert_abs_diff_eq!(square_function_norm(&f), 6.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn square_function_norm_all_ones_into_l4() {
        let f = from_rows(&[&[1.0, 1.0], &[1.0, 1.0]], 4.0);
        assert_abs_diff_eq!(square_function_norm(&f), 8f64.powf(0.25), epsilon = 1e-12);
    }

    #[test]
    fn square_function_norm_zero_iff_zero() {
        let z = GammaOperator::zero(3, 2, 2.0).unwrap();
        assert_eq!(square_function_norm(&z), 0.0);
        let f = from_rows(&[&[0.0, 1e-12]], 2.0);
        assert!(square_function_norm(&f) > 0.0);
    }

    #[test]
    fn kappa_q_known_values() {
        // kappa_2 = 1, kappa_4 = 3^{1/4}
        assert_abs_diff_eq!(kappa_q(2.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kappa_q(4.0), 3f64.powf(0.25), epsilon = 1e-12);
    }

    #[test]
    fn gamma_mc_hilbert_case_covers_frobenius() {
        let f = GammaOperator::new(identity(2), 2.0).unwrap();
        let est = gamma_norm_mc(&f, 40_000, 11).unwrap();
        assert!(est.covers(2f64.sqrt()), "CI [{}, {}]", est.ci_low, est.ci_high);

        let h = [2.0, 0.0];
        let x = [C64::new(3.0, 0.0), C64::new(0.0, 0.0)];
        let r1 = GammaOperator::rank_one(&h, &x, 2.0).unwrap();
        let est = gamma_norm_mc(&r1, 40_000, 12).unwrap();
        assert!(est.covers(6.0), "CI [{}, {}]", est.ci_low, est.ci_high);
    }

    #[test]
    fn gamma_mc_khintchine_band_for_l4() {
        let f = GammaOperator::new(identity(2), 4.0).unwrap();
        let sfn = square_function_norm(&f);
        let est = gamma_norm_mc(&f, 60_000, 13).unwrap();
        let slack = 3.0 * est.half_width();
        assert!(est.value >= sfn - slack, "value {} below sfn {}", est.value, sfn);
        assert!(
            est.value <= kappa_q(4.0) * sfn + slack,
            "value {} above band {}",
            est.value,
            kappa_q(4.0) * sfn
        );
    }

    #[test]
    fn khintchine_band_random_operators() {
        let mut s = 0.9f64;
        let mut next = || {
            s = (s * 997.0 + 0.1234).fract();
            s - 0.5
        };
        for &q in &[2.0, 3.0, 4.0] {
            for trial in 0..3 {
                let mut e = CMat::from_elem((4, 3), C64::new(0.0, 0.0));
                for i in 0..4 {
                    for j in 0..3 {
                        e[[i, j]] = C64::new(next(), next());
                    }
                }
                let f = GammaOperator::new(e, q).unwrap();
                let sfn = square_function_norm(&f);
                let est = gamma_norm_mc(&f, 40_000, 100 + trial).unwrap();
                let slack = 3.0 * est.half_width() + 1e-9;
                assert!(est.value >= sfn - slack, "q={q}: {} < {}", est.value, sfn);
                assert!(
                    est.value <= kappa_q(q) * sfn + slack,
                    "q={q}: {} > {}",
                    est.value,
                    kappa_q(q) * sfn
                );
            }
        }
    }

    #[test]
    fn left_ideal_property_numerically() {
        let mut s = 0.25f64;
        let mut next = || {
            s = (s * 997.0 + 0.1234).fract();
            s - 0.5
        };
        for _ in 0..10 {
            let mut e = CMat::from_elem((3, 4), C64::new(0.0, 0.0));
            let mut b = CMat::from_elem((3, 3), C64::new(0.0, 0.0));
            for i in 0..3 {
                for j in 0..4 {
                    e[[i, j]] = C64::new(next(), next());
                }
                for j in 0..3 {
                    b[[i, j]] = C64::new(next(), next());
                }
            }
            for &q in &[2.0, 4.0] {
                let f = GammaOperator::new(e.clone(), q).unwrap();
                let bf = f.composed_with(&b).unwrap();
                let opn = crate::linalg::op_norm_2(&b);
                assert!(
                    square_function_norm(&bf) <= opn * square_function_norm(&f) * (1.0 + 1e-9),
                    "left ideal violated at q={q}"
                );
            }
        }
    }

    #[test]
    fn homogeneity_of_all_norms() {
        let f = from_rows(&[&[1.0, -2.0], &[0.5, 0.25]], 3.0);
        let c = 3.75;
        let fs = f.scaled(c);
        assert_abs_diff_eq!(
            square_function_norm(&fs),
            c * square_function_norm(&f),
            epsilon = 1e-12
        );
        let dts = [0.5, 0.25];
        let ops = [f.clone(), f.clone()];
        let scaled_ops = [fs.clone(), fs.clone()];
        assert_abs_diff_eq!(
            process_l2gamma_norm(&scaled_ops, &dts).unwrap(),
            c * process_l2gamma_norm(&ops, &dts).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn process_l2gamma_closed_forms() {
        let h = [1.0];
        let x = [C64::new(1.0, 0.0)];
        let f = GammaOperator::rank_one(&h, &x, 2.0).unwrap();
        // unit operator on [0,1], one step
        assert_abs_diff_eq!(
            process_l2gamma_norm(&[f.clone()], &[1.0]).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        // G == F on [0,2]
        let sfn = square_function_norm(&f);
        assert_abs_diff_eq!(
            process_l2gamma_norm(&[f.clone(), f.clone()], &[1.0, 1.0]).unwrap(),
            2f64.sqrt() * sfn,
            epsilon = 1e-14
        );
        // alternating F and 2F on two unit steps -> sqrt(5) * sfn
        assert_abs_diff_eq!(
            process_l2gamma_norm(&[f.clone(), f.scaled(2.0)], &[1.0, 1.0]).unwrap(),
            5f64.sqrt() * sfn,
            epsilon = 1e-14
        );
    }

    #[test]
    fn process_square_function_norm_constant_operator() {
        // constant G on [0, T]: norm is sqrt(T) * sfn(G) for every q
        let f = from_rows(&[&[1.0, 0.5], &[-0.25, 2.0]], 3.0);
        let sfn = square_function_norm(&f);
        let ops = [f.clone(), f.clone(), f.clone(), f.clone()];
        let dts = [0.5; 4];
        assert_abs_diff_eq!(
            process_square_function_norm(&ops, &dts).unwrap(),
            2f64.sqrt() * sfn,
            epsilon = 1e-12
        );
        // for q = 2 it coincides with the mixed L^2 norm
        let f2 = from_rows(&[&[1.0, 0.5], &[-0.25, 2.0]], 2.0);
        let ops2 = [f2.clone(), f2.scaled(3.0)];
        let dts2 = [0.25, 0.75];
        assert_abs_diff_eq!(
            process_square_function_norm(&ops2, &dts2).unwrap(),
            process_l2gamma_norm(&ops2, &dts2).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn full_gamma_norm_hilbert_case_matches_l2gamma() {
        let f = from_rows(&[&[1.0, 0.5], &[-0.25, 2.0]], 2.0);
        let ops = [f.clone(), f.scaled(0.5)];
        let dts = [0.5, 0.5];
        let l2 = process_l2gamma_norm(&ops, &dts).unwrap();
        let est = process_full_gamma_norm(&ops, &dts, 40_000, 5).unwrap();
        assert!(est.covers(l2), "CI [{}, {}] misses {}", est.ci_low, est.ci_high, l2);
    }

    #[test]
    fn full_gamma_norm_type2_band_for_l4() {
        let f = from_rows(&[&[1.0, 0.0], &[0.0, 1.0]], 4.0);
        let ops = [f.clone(), f.clone()];
        let dts = [0.5, 0.5];
        let sfn = process_square_function_norm(&ops, &dts).unwrap();
        let est = process_full_gamma_norm(&ops, &dts, 40_000, 6).unwrap();
        let slack = 3.0 * est.half_width();
        assert!(est.value >= sfn - slack, "gamma {} below sfn {}", est.value, sfn);
        assert!(
            est.value <= kappa_q(4.0) * sfn + slack,
            "gamma {} above kappa band {}",
            est.value,
            kappa_q(4.0) * sfn
        );
    }

    #[test]
    fn full_gamma_norm_zero_process() {
        let z = GammaOperator::zero(2, 2, 4.0).unwrap();
        let est = process_full_gamma_norm(&[z.clone(), z], &[0.5, 0.5], 2000, 1).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn sample_count_validation() {
        let f = GammaOperator::zero(2, 2, 2.0).unwrap();
        assert!(gamma_norm_mc(&f, 100, 0).is_err());
    }
}
