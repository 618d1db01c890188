//! Poisson-kernel dilation of a diagonal analytic semigroup.
//!
//! For each mode mu with Re mu > 0 the space L^2(R) carries the density
//! `p_mu(xi) = (Re mu / pi) / ((Re mu)^2 + (xi + Im mu)^2)`; embedding
//! `(Jx)_k(xi) = p_{mu_k}(xi)^{1/2} x_k`, the modulation group
//! `(U(t)y)(xi) = e^{it xi} y(xi)` and the per-mode rank-one projection P
//! realize `J S(t) = P U(t) J` through the Fourier identity
//! `int e^{it xi} p_mu(xi) dxi = e^{-mu t}` (t >= 0). Note the density is
//! centered at -Im mu: modulation by e^{it xi} then picks up the phase
//! e^{-i t Im mu} that the semigroup of the mode -mu requires.
//!
//! Elements live on a fixed 512-node tangent-substituted Gauss grid per
//! mode. On that grid the Poisson mass is integrated exactly (the
//! substitution cancels the density against the Jacobian), so J is an
//! isometry and P a contraction to machine precision; only the oscillatory
//! Fourier factor needs the resolved quadrature from the quadrature module.

use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};
use crate::model::{LqSpace, SpectralGenerator};
use crate::quadrature::{gauss_legendre, poisson_fourier_factor};
use crate::simulate::{ProcessKind, StepProcess, TimeGrid};

pub const XI_NODES: usize = 512;

/// Poisson density of a mode, centered at -Im mu with scale Re mu.
pub fn poisson_density(mu: C64, xi: f64) -> f64 {
    let a = mu.re;
    let c = -mu.im;
    (a / PI) / (a * a + (xi - c) * (xi - c))
}

struct ModeGrid {
    xi: Vec<f64>,
    weight: Vec<f64>,
    sqrt_p: Vec<f64>,
}

/// The dilation data of a spectral generator: one xi-grid per mode.
pub struct DilationRep {
    pub gen: SpectralGenerator,
    modes: Vec<ModeGrid>,
}

/// An element of the dilation space: one complex function per mode, sampled
/// on that mode's grid. `||y||_Y = || ( (int |y_k|^2 dxi)^{1/2} )_k ||_q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilationElement {
    pub values: CMat,
    pub space: LqSpace,
}

impl DilationRep {
    pub fn new(gen: SpectralGenerator) -> Self {
        let (u, w) = gauss_legendre(XI_NODES);
        let modes = gen
            .modes
            .iter()
            .map(|mu| {
                let a = mu.re;
                let c = -mu.im;
                let mut xi = Vec::with_capacity(XI_NODES);
                let mut weight = Vec::with_capacity(XI_NODES);
                let mut sqrt_p = Vec::with_capacity(XI_NODES);
                for (uj, wj) in u.iter().zip(&w) {
                    let half = FRAC_PI_2 * uj;
                    let x = c + a * half.tan();
                    let jac = FRAC_PI_2 * a / (half.cos() * half.cos());
                    xi.push(x);
                    weight.push(wj * jac);
                    sqrt_p.push(poisson_density(*mu, x).sqrt());
                }
                ModeGrid { xi, weight, sqrt_p }
            })
            .collect();
        DilationRep { gen, modes }
    }

    pub fn dim(&self) -> usize {
        self.gen.dim()
    }

    /// Quadrature mass of mode k's density; exactly 1 up to rounding because
    /// the tangent substitution cancels the density against its Jacobian.
    pub fn poisson_mass(&self, k: usize) -> f64 {
        let g = &self.modes[k];
        g.weight
            .iter()
            .zip(&g.sqrt_p)
            .map(|(w, s)| w * s * s)
            .sum()
    }

    pub fn zero_element(&self) -> DilationElement {
        DilationElement {
            values: CMat::from_elem((self.dim(), XI_NODES), C64::new(0.0, 0.0)),
            space: self.gen.space,
        }
    }

    pub fn norm_y(&self, y: &DilationElement) -> f64 {
        let moduli: Vec<f64> = (0..self.dim())
            .map(|k| {
                let g = &self.modes[k];
                (0..XI_NODES)
                    .map(|j| g.weight[j] * y.values[[k, j]].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        self.gen.space.norm_abs(&moduli)
    }
}

/// `(Jx)_k(xi) = p_{mu_k}(xi)^{1/2} x_k`; an isometry of l^q into Y.
pub fn dilation_embed(rep: &DilationRep, x: &CVec) -> Result<DilationElement> {
    if x.len() != rep.dim() {
        return Err(Error::DimensionMismatch {
            expected: rep.dim(),
            got: x.len(),
        });
    }
    let mut y = rep.zero_element();
    for k in 0..rep.dim() {
        for j in 0..XI_NODES {
            y.values[[k, j]] = x[k] * rep.modes[k].sqrt_p[j];
        }
    }
    Ok(y)
}

/// Modulation group `(U(t)y)_k(xi) = e^{it xi} y_k(xi)`, defined for every
/// real t and exactly isometric.
pub fn dilation_group(rep: &DilationRep, t: f64, y: &DilationElement) -> DilationElement {
    let mut out = y.clone();
    for k in 0..rep.dim() {
        for j in 0..XI_NODES {
            out.values[[k, j]] *= Complex64::from_polar(1.0, t * rep.modes[k].xi[j]);
        }
    }
    out
}

/// Per-mode rank-one orthogonal projection onto the span of p^{1/2}:
/// `(Py)_k = p_k^{1/2} * int y_k p_k^{1/2} dxi`.
pub fn dilation_project(rep: &DilationRep, y: &DilationElement) -> DilationElement {
    let mut out = rep.zero_element();
    for k in 0..rep.dim() {
        let g = &rep.modes[k];
        let inner: C64 = (0..XI_NODES)
            .map(|j| y.values[[k, j]] * g.weight[j] * g.sqrt_p[j])
            .sum();
        for j in 0..XI_NODES {
            out.values[[k, j]] = inner * g.sqrt_p[j];
        }
    }
    out
}

/// Coordinates of an element of J(X): the per-mode inner products with
/// p^{1/2}. For y = Jx this returns x.
pub fn dilation_pullback(rep: &DilationRep, y: &DilationElement) -> CVec {
    CVec::from_iter((0..rep.dim()).map(|k| {
        let g = &rep.modes[k];
        (0..XI_NODES)
            .map(|j| y.values[[k, j]] * g.weight[j] * g.sqrt_p[j])
            .sum()
    }))
}

/// `||J S(t) x - P U(t) J x||_Y`. The grid algebra is exact, so the residual
/// reduces to the per-mode quadrature error of the oscillatory Fourier
/// factor against the analytic semigroup multiplier.
pub fn verify_dilation_identity(rep: &DilationRep, t: f64, x: &CVec) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::invalid("dilation identity is stated for t >= 0"));
    }
    if x.len() != rep.dim() {
        return Err(Error::DimensionMismatch {
            expected: rep.dim(),
            got: x.len(),
        });
    }
    // both sides are multiples of p^{1/2} in each mode and ||p^{1/2}||_{L^2}
    // is 1 on the grid, so the Y-norm of the difference is the l^q norm of
    // the coefficient gaps
    let moduli: Vec<f64> = (0..rep.dim())
        .map(|k| {
            let mu = rep.gen.modes[k];
            let exact = (-mu * t).exp();
            let quad = poisson_fourier_factor(mu, t);
            (exact - quad).norm() * x[k].norm()
        })
        .collect();
    Ok(rep.gen.space.norm_abs(&moduli))
}

/// Residual table over a (mode, t) lattice, for export.
pub fn dilation_residual_table(rep: &DilationRep, ts: &[f64]) -> Result<Vec<(usize, f64, f64)>> {
    let mut rows = Vec::with_capacity(rep.dim() * ts.len());
    for k in 0..rep.dim() {
        let mut x = CVec::from_elem(rep.dim(), C64::new(0.0, 0.0));
        x[k] = C64::new(1.0, 0.0);
        for &t in ts {
            rows.push((k, t, verify_dilation_identity(rep, t, &x)?));
        }
    }
    Ok(rows)
}

/// The dilation route to the stochastic convolution:
/// `Z(t_n) = sum_{i<=n} U(-t_{i-1}) J G_i dW_i`, then the pullback of
/// `P U(t_n) Z(t_n)` through J. Per mode this telescopes into quadrature
/// Fourier factors at lags `t_n - t_{i-1}`, which are memoized per lag.
/// Returns the node values and, for the maximal-estimate transfer check,
/// the Y-norms of Z at the nodes (which dominate the convolution norms
/// because J is isometric and ||P|| = ||U(t)|| = 1).
pub struct DilationConvolution {
    pub nodes: Vec<CVec>,
    pub z_norms: Vec<f64>,
}

pub fn convolve_via_dilation(
    rep: &DilationRep,
    proc: &StepProcess,
    grid: &TimeGrid,
    increments: &[Vec<f64>],
) -> Result<DilationConvolution> {
    let ops = match &proc.kind {
        ProcessKind::Deterministic(ops) => ops,
        ProcessKind::Adapted(_) => {
            return Err(Error::invalid(
                "dilation route needs a deterministic process (coupled noise)",
            ))
        }
    };
    let n = grid.n_steps();
    if n != proc.n_steps || increments.len() != n {
        return Err(Error::GridMismatch);
    }
    let d = rep.dim();
    if ops[0].dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: ops[0].dim(),
        });
    }

    // kicks G_i dW_i in X
    let kicks: Vec<CVec> = ops
        .iter()
        .zip(increments)
        .map(|(op, inc)| op.apply_real(inc))
        .collect();

    // memoized Fourier factors per (mode, lag); lags are differences of grid
    // times, keyed by bit pattern to be robust to non-uniform grids
    let mut factor_cache: Vec<std::collections::HashMap<u64, C64>> =
        (0..d).map(|_| std::collections::HashMap::new()).collect();
    let mut factor = |k: usize, lag: f64| -> C64 {
        let mu = rep.gen.modes[k];
        *factor_cache[k]
            .entry(lag.to_bits())
            .or_insert_with(|| poisson_fourier_factor(mu, lag))
    };

    let space = rep.gen.space;
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(CVec::from_elem(d, C64::new(0.0, 0.0)));
    let mut z_norms = Vec::with_capacity(n + 1);
    z_norms.push(0.0);
    // Z(t_n) accumulates U(-t_{i-1}) J G_i dW_i; its mode-k L^2 norm is the
    // norm of the accumulated grid function
    let mut z = rep.zero_element();
    for i in 0..n {
        let t_prev = grid.times[i];
        let jk = dilation_embed(rep, &kicks[i])?;
        let shifted = dilation_group(rep, -t_prev, &jk);
        z.values = &z.values + &shifted.values;
        z_norms.push(rep.norm_y(&z));

        let t_n = grid.times[i + 1];
        let mut y = CVec::from_elem(d, C64::new(0.0, 0.0));
        for k in 0..d {
            for (j, kick) in kicks.iter().take(i + 1).enumerate() {
                y[k] += factor(k, t_n - grid.times[j]) * kick[k];
            }
        }
        let _ = space;
        nodes.push(y);
    }
    Ok(DilationConvolution { nodes, z_norms })
}
