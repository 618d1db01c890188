//! State spaces, generators and semigroups: the finite-dimensional stand-ins
//! for a sectorial operator `A` on `X = l^q_d` and its analytic semigroup
//! `S(t) = e^{tA}`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{
    self, eigenvalues, expm, hermitian_top_eig, inverse, op_norm_2, schur_function,
    triangular_function, triangular_sqrt, CMat, CVec, C64,
};

/// The sequence space l^q in dimension d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LqSpace {
    pub q: f64,
    pub d: usize,
}

impl LqSpace {
    pub fn new(q: f64, d: usize) -> Result<Self> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::invalid("q must be >= 1"));
        }
        if d == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(LqSpace { q, d })
    }

    /// l^q norm of a complex vector.
    pub fn norm(&self, x: &[C64]) -> f64 {
        lq_norm(self.q, x.iter().map(|z| z.norm()))
    }

    pub fn norm_vec(&self, x: &CVec) -> f64 {
        lq_norm(self.q, x.iter().map(|z| z.norm()))
    }

    /// l^q norm of a nonnegative sequence (already moduli).
    pub fn norm_abs(&self, x: &[f64]) -> f64 {
        lq_norm(self.q, x.iter().copied())
    }
}

pub fn lq_norm(q: f64, moduli: impl Iterator<Item = f64>) -> f64 {
    if q == 2.0 {
        return moduli.map(|m| m * m).sum::<f64>().sqrt();
    }
    if q == 1.0 {
        return moduli.sum();
    }
    moduli.map(|m| m.powf(q)).sum::<f64>().powf(1.0 / q)
}

/// Diagonal generator `A = -diag(mu_k)` with `Re mu_k > 0`,
/// `|arg mu_k| < pi/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGenerator {
    pub modes: Vec<C64>,
    pub space: LqSpace,
}

impl SpectralGenerator {
    pub fn new(modes: Vec<C64>, q: f64) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("at least one mode required"));
        }
        for (k, mu) in modes.iter().enumerate() {
            if !(mu.re > 0.0) {
                return Err(Error::NonHurwitz(format!("mode {k}: mu = {mu}")));
            }
            if mu.arg().abs() >= FRAC_PI_2 {
                return Err(Error::NotSectorial(format!(
                    "mode {k} has |arg mu| >= pi/2"
                )));
            }
        }
        let space = LqSpace::new(q, modes.len())?;
        Ok(SpectralGenerator { modes, space })
    }

    /// Dirichlet-Laplacian eigenvalue surrogate: mu_k = k^2, k = 1..d.
    pub fn heat(d: usize, q: f64) -> Result<Self> {
        let modes = (1..=d)
            .map(|k| C64::new((k * k) as f64, 0.0))
            .collect();
        SpectralGenerator::new(modes, q)
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }

    /// Per-mode multipliers of `S(t) = e^{tA}`.
    pub fn semigroup_factors(&self, t: f64) -> Vec<C64> {
        self.modes.iter().map(|mu| (-mu * t).exp()).collect()
    }
}

/// Dense generator `A` (Hurwitz) acting on l^q_d.
#[derive(Debug, Clone)]
pub struct MatrixGenerator {
    pub a: CMat,
    pub space: LqSpace,
    eigs: Vec<C64>,
}

impl MatrixGenerator {
    pub fn new(a: CMat, q: f64) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(Error::invalid("generator matrix must be square and nonempty"));
        }
        let eigs = eigenvalues(&a)?;
        for lam in &eigs {
            if !(lam.re < 0.0) {
                return Err(Error::NonHurwitz(format!("eigenvalue {lam}")));
            }
        }
        let space = LqSpace::new(q, d)?;
        Ok(MatrixGenerator { a, space, eigs })
    }

    pub fn from_real_rows(rows: &[Vec<f64>], q: f64) -> Result<Self> {
        let d = rows.len();
        let mut a = CMat::from_elem((d, d), C64::new(0.0, 0.0));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::invalid("generator rows must form a square matrix"));
            }
            for (j, v) in row.iter().enumerate() {
                a[[i, j]] = C64::new(*v, 0.0);
            }
        }
        MatrixGenerator::new(a, q)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigs
    }

    /// `e^{tA}` as a dense matrix.
    pub fn semigroup_matrix(&self, t: f64) -> Result<CMat> {
        if t < 0.0 {
            return Err(Error::invalid("semigroup time must be nonnegative"));
        }
        expm(&self.a.mapv(|v| v * t))
    }

    /// `(-A)^alpha` as a dense matrix, via complex Schur.
    pub fn frac_power_matrix(&self, alpha: f64) -> Result<CMat> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid("alpha must lie in (0, 1]"));
        }
        let b = self.a.mapv(|v| -v);
        if alpha == 1.0 {
            return Ok(b);
        }
        if alpha == 0.5 {
            return schur_function(&b, triangular_sqrt);
        }
        schur_function(&b, |t| triangular_function(t, |z| z.powf(alpha), 1e-10))
    }
}

/// Either flavour of generator, behind one dispatch point.
#[derive(Debug, Clone)]
pub enum Generator {
    Spectral(SpectralGenerator),
    Matrix(MatrixGenerator),
}

impl Generator {
    pub fn space(&self) -> LqSpace {
        match self {
            Generator::Spectral(g) => g.space,
            Generator::Matrix(g) => g.space,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Generator::Spectral(g) => g.dim(),
            Generator::Matrix(g) => g.dim(),
        }
    }

    pub fn as_spectral(&self) -> Option<&SpectralGenerator> {
        match self {
            Generator::Spectral(g) => Some(g),
            Generator::Matrix(_) => None,
        }
    }

    /// Slowest decay rate min_k Re(mu_k) resp. the spectral abscissa.
    pub fn min_decay_rate(&self) -> f64 {
        match self {
            Generator::Spectral(g) => g
                .modes
                .iter()
                .map(|m| m.re)
                .fold(f64::INFINITY, f64::min),
            Generator::Matrix(g) => g
                .eigs
                .iter()
                .map(|l| -l.re)
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// `S(t) x = e^{tA} x`.
pub fn semigroup_apply(gen: &Generator, t: f64, x: &CVec) -> Result<CVec> {
    if t < 0.0 {
        return Err(Error::invalid("semigroup time must be nonnegative"));
    }
    if x.len() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: x.len(),
        });
    }
    match gen {
        Generator::Spectral(g) => {
            let f = g.semigroup_factors(t);
            Ok(CVec::from_iter(x.iter().zip(f).map(|(xi, fi)| xi * fi)))
        }
        Generator::Matrix(g) => {
            let s = g.semigroup_matrix(t)?;
            linalg::matvec(&s, x)
        }
    }
}

/// `(-A)^alpha x` for alpha in (0, 1].
pub fn frac_power_apply(gen: &Generator, alpha: f64, x: &CVec) -> Result<CVec> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha must lie in (0, 1]"));
    }
    if x.len() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: x.len(),
        });
    }
    match gen {
        Generator::Spectral(g) => Ok(CVec::from_iter(
            x.iter()
                .zip(&g.modes)
                .map(|(xi, mu)| xi * mu.powf(alpha)),
        )),
        Generator::Matrix(g) => {
            let m = g.frac_power_matrix(alpha)?;
            linalg::matvec(&m, x)
        }
    }
}

/// Sectoriality angle diagnostic.
///
/// For spectral generators this is `max_k |arg mu_k|` exactly. For matrix
/// generators it is the angle of a sampled boundary of the numerical range
/// of `-A`, which dominates the spectral angle. Errors if the numerical
/// range touches the closed left half-plane.
pub fn sectorial_angle(gen: &Generator) -> Result<f64> {
    match gen {
        Generator::Spectral(g) => Ok(g
            .modes
            .iter()
            .map(|mu| mu.arg().abs())
            .fold(0.0, f64::max)),
        Generator::Matrix(g) => {
            let b = g.a.mapv(|v| -v);
            let n_dirs = 360;
            let mut max_angle = 0.0f64;
            for j in 0..n_dirs {
                let theta = 2.0 * std::f64::consts::PI * (j as f64) / (n_dirs as f64);
                let rot = C64::from_polar(1.0, theta);
                let mut h = Array2::from_elem((g.dim(), g.dim()), C64::new(0.0, 0.0));
                for r in 0..g.dim() {
                    for c in 0..g.dim() {
                        h[[r, c]] = (rot * b[[r, c]] + (rot * b[[c, r]]).conj()) * 0.5;
                    }
                }
                let (_, v) = hermitian_top_eig(&h);
                // boundary point of the numerical range of -A in direction theta
                let bv = b.dot(&v);
                let num: C64 = v.iter().zip(bv.iter()).map(|(a, b)| a.conj() * b).sum();
                let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
                let z = num / den;
                if !(z.re > 0.0) {
                    return Err(Error::NotSectorial(format!(
                        "numerical range boundary point {z} touches the closed left half-plane"
                    )));
                }
                max_angle = max_angle.max(z.arg().abs());
            }
            Ok(max_angle)
        }
    }
}

/// `|| (lambda I - A)^{-1} ||` for diagnostic scans over the sector.
pub fn resolvent_norm(gen: &Generator, lambda: C64) -> Result<f64> {
    match gen {
        Generator::Spectral(g) => {
            let mut best = 0.0f64;
            for mu in &g.modes {
                let dist = (lambda + mu).norm();
                if dist == 0.0 {
                    return Err(Error::Numerical("lambda lies in the spectrum".into()));
                }
                best = best.max(1.0 / dist);
            }
            Ok(best)
        }
        Generator::Matrix(g) => {
            let d = g.dim();
            let mut m = g.a.mapv(|v| -v);
            for i in 0..d {
                m[[i, i]] += lambda;
            }
            let inv = inverse(&m).map_err(|_| Error::Numerical("lambda lies in the spectrum".into()))?;
            Ok(op_norm_2(&inv))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn spectral(modes: &[(f64, f64)], q: f64) -> Generator {
        Generator::Spectral(
            SpectralGenerator::new(
                modes.iter().map(|&(r, i)| C64::new(r, i)).collect(),
                q,
            )
            .unwrap(),
        )
    }

    #[test]
    fn lq_norm_triangle_and_homogeneity_on_random_triples() {
        let mut s = 0.3f64;
        let mut next = || {
            s = (s * 997.0 + 0.1234).fract();
            s - 0.5
        };
        for &q in &[1.0, 1.5, 2.0, 3.0, 4.0] {
            let sp = LqSpace::new(q, 6).unwrap();
            for _ in 0..50 {
                let x: Vec<C64> = (0..6).map(|_| C64::new(next(), next())).collect();
                let y: Vec<C64> = (0..6).map(|_| C64::new(next(), next())).collect();
                let sum: Vec<C64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
                assert!(sp.norm(&sum) <= sp.norm(&x) + sp.norm(&y) + 1e-12);
                let c = 2.5;
                let scaled: Vec<C64> = x.iter().map(|a| a * c).collect();
                assert_abs_diff_eq!(sp.norm(&scaled), c * sp.norm(&x), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let g = spectral(&[(1.0, 0.0)], 2.0);
        let x = CVec::from_vec(vec![C64::new(3.0, 0.0)]);
        let y = semigroup_apply(&g, 0.0, &x).unwrap();
        assert_abs_diff_eq!(y[0].re, 3.0, epsilon = 1e-15);
    }

    #[test]
    fn semigroup_scalar_exponential() {
        let g = spectral(&[(1.0, 0.0)], 2.0);
        let x = CVec::from_vec(vec![C64::new(1.0, 0.0)]);
        let y = semigroup_apply(&g, 1.0, &x).unwrap();
        assert_abs_diff_eq!(y[0].re, (-1.0f64).exp(), epsilon = 1e-14);
    }

    #[test]
    fn semigroup_jordan_block_closed_form() {
        let g = Generator::Matrix(
            MatrixGenerator::from_real_rows(
                &[vec![-1.0, 1.0], vec![0.0, -1.0]],
                2.0,
            )
            .unwrap(),
        );
        let x = CVec::from_vec(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]);
        let y = semigroup_apply(&g, 1.0, &x).unwrap();
        let em1 = (-1.0f64).exp();
        assert_abs_diff_eq!(y[0].re, em1, epsilon = 1e-13);
        assert_abs_diff_eq!(y[1].re, em1, epsilon = 1e-13);
    }

    #[test]
    fn frac_power_diagonal_square_roots() {
        let g = spectral(&[(4.0, 0.0)], 2.0);
        let x = CVec::from_vec(vec![C64::new(1.0, 0.0)]);
        let y = frac_power_apply(&g, 0.5, &x).unwrap();
        assert_abs_diff_eq!(y[0].re, 2.0, epsilon = 1e-14);

        let g2 = spectral(&[(1.0, 0.0), (9.0, 0.0)], 2.0);
        let x2 = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let y2 = frac_power_apply(&g2, 0.5, &x2).unwrap();
        assert_abs_diff_eq!(y2[0].re, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y2[1].re, 3.0, epsilon = 1e-14);
    }

    #[test]
    fn frac_power_spd_matrix_matches_eigendecomposition_oracle() {
        // A = -[[2,1],[1,2]]; eigenvalues of [[2,1],[1,2]] are 1 and 3 with
        // eigenvectors (1,1)/sqrt2 and (1,-1)/sqrt2, so
        // sqrt = [[(sqrt3+1)/2, (sqrt3-1)/2], [(sqrt3-1)/2, (sqrt3+1)/2]].
        let g = Generator::Matrix(
            MatrixGenerator::from_real_rows(
                &[vec![-2.0, -1.0], vec![-1.0, -2.0]],
                2.0,
            )
            .unwrap(),
        );
        let x = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let y = frac_power_apply(&g, 0.5, &x).unwrap();
        let s3 = 3.0f64.sqrt();
        assert_abs_diff_eq!(y[0].re, (s3 + 1.0) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y[1].re, (s3 - 1.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn frac_power_composition_gives_full_power() {
        let g = Generator::Matrix(
            MatrixGenerator::from_real_rows(
                &[vec![-3.0, 0.5, 0.0], vec![0.2, -2.0, 0.1], vec![0.0, -0.3, -4.0]],
                2.0,
            )
            .unwrap(),
        );
        let x = CVec::from_vec(vec![
            C64::new(1.0, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(0.25, 0.0),
        ]);
        let half = frac_power_apply(&g, 0.5, &x).unwrap();
        let full = frac_power_apply(&g, 0.5, &half).unwrap();
        let direct = frac_power_apply(&g, 1.0, &x).unwrap();
        let err: f64 = full
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale: f64 = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-8 * scale, "composition error {err}");
    }

    #[test]
    fn sectorial_angle_spectral_exact() {
        let g = spectral(&[(1.0, 0.0), (1.0, 1.0)], 2.0);
        assert_abs_diff_eq!(sectorial_angle(&g).unwrap(), FRAC_PI_4, epsilon = 1e-14);
        let g2 = spectral(&[(2.0, 0.0)], 2.0);
        assert_abs_diff_eq!(sectorial_angle(&g2).unwrap(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn sectorial_angle_identity_matrix_is_zero() {
        let g = Generator::Matrix(
            MatrixGenerator::from_real_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 2.0).unwrap(),
        );
        assert_abs_diff_eq!(sectorial_angle(&g).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn semigroup_law_on_random_inputs() {
        let gens = vec![
            spectral(&[(1.0, 0.3), (4.0, -1.0), (9.0, 2.0)], 2.0),
            Generator::Matrix(
                MatrixGenerator::from_real_rows(
                    &[vec![-2.0, 1.0, 0.0], vec![0.0, -3.0, 0.5], vec![0.1, 0.0, -1.5]],
                    2.0,
                )
                .unwrap(),
            ),
        ];
        let mut s = 0.7f64;
        let mut next = || {
            s = (s * 997.0 + 0.1234).fract();
            s
        };
        for gen in &gens {
            let sp = gen.space();
            for _ in 0..20 {
                let t = 5.0 * next();
                let u = 5.0 * next();
                let mut x = CVec::from_iter((0..gen.dim()).map(|_| C64::new(next() - 0.5, next() - 0.5)));
                let nx = sp.norm_vec(&x);
                x = x.mapv(|z| z / nx);
                let one = semigroup_apply(gen, t, &semigroup_apply(gen, u, &x).unwrap()).unwrap();
                let two = semigroup_apply(gen, t + u, &x).unwrap();
                let diff = CVec::from_iter(one.iter().zip(two.iter()).map(|(a, b)| a - b));
                assert!(sp.norm_vec(&diff) <= 1e-10, "semigroup law violated");
            }
        }
    }

    #[test]
    fn spectral_and_diagonal_matrix_agree() {
        let modes = [(1.0, 0.0), (2.5, 0.0), (7.0, 0.0)];
        let gs = spectral(&modes, 2.0);
        let gm = Generator::Matrix(
            MatrixGenerator::from_real_rows(
                &[vec![-1.0, 0.0, 0.0], vec![0.0, -2.5, 0.0], vec![0.0, 0.0, -7.0]],
                2.0,
            )
            .unwrap(),
        );
        let x = CVec::from_vec(vec![
            C64::new(1.0, 0.5),
            C64::new(-0.3, 0.0),
            C64::new(0.2, -0.1),
        ]);
        for &t in &[0.0, 0.1, 1.0, 3.0] {
            let a = semigroup_apply(&gs, t, &x).unwrap();
            let b = semigroup_apply(&gm, t, &x).unwrap();
            let err: f64 = a.iter().zip(b.iter()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "spectral/matrix disagreement {err} at t={t}");
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(LqSpace::new(0.5, 3).is_err());
        assert!(SpectralGenerator::new(vec![C64::new(-1.0, 0.0)], 2.0).is_err());
        assert!(MatrixGenerator::from_real_rows(&[vec![1.0]], 2.0).is_err());
        let g = spectral(&[(1.0, 0.0)], 2.0);
        let x = CVec::from_vec(vec![C64::new(1.0, 0.0)]);
        assert!(semigroup_apply(&g, -0.1, &x).is_err());
        let long = CVec::from_vec(vec![C64::new(1.0, 0.0); 2]);
        assert!(semigroup_apply(&g, 1.0, &long).is_err());
    }

    #[test]
    fn resolvent_norm_diagonal() {
        let g = spectral(&[(1.0, 0.0), (4.0, 0.0)], 2.0);
        // lambda = 1: distances |1+1| = 2, |1+4| = 5 -> norm 1/2
        let r = resolvent_norm(&g, C64::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(r, 0.5, epsilon = 1e-14);
    }
}
