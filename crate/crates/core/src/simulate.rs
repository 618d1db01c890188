//! Cylindrical Wiener increments, Itô integrals and stochastic convolutions
//! on finite time grids, plus running suprema over path ensembles.
//!
//! Two integrators coexist on purpose: the exponential-Euler recursion is
//! pathwise coupled to explicit Wiener increments (needed wherever two routes
//! to the same path are compared), while the exact transition sampler matches
//! the true law at the grid nodes for step-constant integrands and serves all
//! moment and tail statistics.

use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gammanorm::GammaOperator;
use crate::linalg::{matvec, CMat, CVec, C64};
use crate::model::{Generator, LqSpace, SpectralGenerator};
use crate::rng::counter_gaussian;

/// Strictly increasing node sequence 0 = t_0 < ... < t_N = T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn uniform(t_end: f64, n: usize) -> Result<Self> {
        if !(t_end > 0.0) || n == 0 {
            return Err(Error::invalid("grid needs t_end > 0 and at least one step"));
        }
        let times = (0..=n).map(|i| t_end * i as f64 / n as f64).collect();
        Ok(TimeGrid { times })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn dts(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Dyadic-style refinement keeping every original node exactly.
    pub fn refined(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let mut times = Vec::with_capacity(self.n_steps() * factor + 1);
        for w in self.times.windows(2) {
            for j in 0..factor {
                let lam = j as f64 / factor as f64;
                times.push(w[0] + lam * (w[1] - w[0]));
            }
        }
        times.push(self.t_end());
        TimeGrid { times }
    }
}

/// All scaled increments of one path: `inc[i][j] ~ N(0, dt_i)`, addressed by
/// `(seed, path, step, component)` so the value never depends on evaluation
/// order.
pub fn wiener_increments(seed: u64, path: u64, grid: &TimeGrid, m: usize) -> Vec<Vec<f64>> {
    let dts = grid.dts();
    (0..grid.n_steps())
        .map(|i| {
            let s = dts[i].sqrt();
            (0..m)
                .map(|j| s * counter_gaussian(seed, path, (i * m + j) as u64))
                .collect()
        })
        .collect()
}

/// Sum fine increments in blocks of `factor`, recovering the increments of
/// the coarsened grid driven by the same Wiener path.
pub fn aggregate_increments(fine: &[Vec<f64>], factor: usize) -> Vec<Vec<f64>> {
    assert!(factor >= 1 && fine.len() % factor == 0);
    let m = fine[0].len();
    fine.chunks(factor)
        .map(|chunk| {
            (0..m)
                .map(|j| chunk.iter().map(|row| row[j]).sum())
                .collect()
        })
        .collect()
}

/// Path history visible to an adapted strategy when it chooses the operator
/// for the step starting at `times.last()`. Only past data is reachable.
pub struct History<'a> {
    /// Coarse node times observed so far, `t_0 ..= t_i`.
    pub times: &'a [f64],
    /// Convolution values at those nodes.
    pub states: &'a [CVec],
    /// Wiener increments of the completed coarse steps (one fewer than times).
    pub increments: &'a [Vec<f64>],
}

pub type Strategy = Arc<dyn Fn(&History) -> GammaOperator + Send + Sync>;

pub enum ProcessKind {
    Deterministic(Vec<GammaOperator>),
    Adapted(Strategy),
}

impl Clone for ProcessKind {
    fn clone(&self) -> Self {
        match self {
            ProcessKind::Deterministic(v) => ProcessKind::Deterministic(v.clone()),
            ProcessKind::Adapted(f) => ProcessKind::Adapted(f.clone()),
        }
    }
}

/// A step-constant integrand on a coarse grid of `n_steps` steps. Simulation
/// may run on any refinement of that grid; strategies are consulted once per
/// coarse step and see history at coarse nodes only.
#[derive(Clone)]
pub struct StepProcess {
    pub n_steps: usize,
    pub noise_dim: usize,
    pub kind: ProcessKind,
}

impl StepProcess {
    pub fn deterministic(ops: Vec<GammaOperator>) -> Result<Self> {
        if ops.is_empty() {
            return Err(Error::invalid("step process needs at least one step"));
        }
        let m = ops[0].noise_dim();
        let d = ops[0].dim();
        let q = ops[0].codomain.q;
        for op in &ops {
            if op.noise_dim() != m || op.dim() != d || op.codomain.q != q {
                return Err(Error::invalid("all step operators must share shape and codomain"));
            }
        }
        Ok(StepProcess {
            n_steps: ops.len(),
            noise_dim: m,
            kind: ProcessKind::Deterministic(ops),
        })
    }

    pub fn constant(op: GammaOperator, n_steps: usize) -> Result<Self> {
        StepProcess::deterministic(vec![op; n_steps.max(1)])
    }

    pub fn adapted(n_steps: usize, noise_dim: usize, strategy: Strategy) -> Result<Self> {
        if n_steps == 0 || noise_dim == 0 {
            return Err(Error::invalid("adapted process needs steps and noise dimension"));
        }
        Ok(StepProcess {
            n_steps,
            noise_dim,
            kind: ProcessKind::Adapted(strategy),
        })
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, ProcessKind::Deterministic(_))
    }
}

/// One simulated path: node values of the integral/convolution plus the
/// per-coarse-step row energies `sum_j |G_i,kj|^2` needed for the
/// gamma-norm denominator of maximal-inequality ratios.
pub struct SimulatedPath {
    pub nodes: Vec<CVec>,
    pub coarse_dts: Vec<f64>,
    pub coarse_row_energy: Vec<Vec<f64>>,
    pub space: LqSpace,
}

impl SimulatedPath {
    /// Pathwise square-function value of `||G||_{gamma(L^2(0,T;H),X)}`.
    pub fn integrand_norm(&self) -> f64 {
        let d = self.space.d;
        let mut energy = vec![0.0f64; d];
        for (dt, row) in self.coarse_dts.iter().zip(&self.coarse_row_energy) {
            for k in 0..d {
                energy[k] += dt * row[k];
            }
        }
        let moduli: Vec<f64> = energy.iter().map(|e| e.sqrt()).collect();
        self.space.norm_abs(&moduli)
    }
}

enum SemiStep {
    Identity,
    Factors(Vec<C64>),
    Matrix(CMat),
}

impl SemiStep {
    fn apply(&self, y: &mut CVec) -> Result<()> {
        match self {
            SemiStep::Identity => Ok(()),
            SemiStep::Factors(f) => {
                for (v, c) in y.iter_mut().zip(f) {
                    *v *= c;
                }
                Ok(())
            }
            SemiStep::Matrix(s) => {
                *y = matvec(s, y)?;
                Ok(())
            }
        }
    }
}

fn semi_step(gen: Option<&Generator>, dt: f64) -> Result<SemiStep> {
    match gen {
        None => Ok(SemiStep::Identity),
        Some(Generator::Spectral(g)) => Ok(SemiStep::Factors(g.semigroup_factors(dt))),
        Some(Generator::Matrix(g)) => Ok(SemiStep::Matrix(g.semigroup_matrix(dt)?)),
    }
}

fn row_energy(op: &GammaOperator) -> Vec<f64> {
    (0..op.dim())
        .map(|k| {
            (0..op.noise_dim())
                .map(|j| op.entries[[k, j]].norm_sqr())
                .sum()
        })
        .collect()
}

fn driven_path(
    gen: Option<&Generator>,
    proc: &StepProcess,
    grid: &TimeGrid,
    increments: &[Vec<f64>],
) -> Result<SimulatedPath> {
    let n = grid.n_steps();
    if increments.len() != n || n % proc.n_steps != 0 {
        return Err(Error::GridMismatch);
    }
    let factor = n / proc.n_steps;
    let dts = grid.dts();
    let mut semi_cache: HashMap<u64, SemiStep> = HashMap::new();

    let mut space: Option<LqSpace> = None;
    let mut y: Option<CVec> = None;
    let mut nodes: Vec<CVec> = Vec::with_capacity(n + 1);
    let mut coarse_times: Vec<f64> = vec![grid.times[0]];
    let mut coarse_states: Vec<CVec> = Vec::new();
    let mut coarse_incs: Vec<Vec<f64>> = Vec::new();
    let mut coarse_dts: Vec<f64> = Vec::with_capacity(proc.n_steps);
    let mut coarse_energy: Vec<Vec<f64>> = Vec::with_capacity(proc.n_steps);
    let mut current_op: Option<GammaOperator> = None;

    for i in 0..n {
        if i % factor == 0 {
            // entering a new coarse step: record the node and pick the operator
            let state = y
                .clone()
                .unwrap_or_else(|| CVec::from_elem(0, C64::new(0.0, 0.0)));
            if i == 0 {
                // state dimension unknown until the first operator is seen;
                // patched below once the first op fixes d
            } else {
                coarse_states.push(state);
            }
            let op = match &proc.kind {
                ProcessKind::Deterministic(ops) => ops[i / factor].clone(),
                ProcessKind::Adapted(strategy) => {
                    let hist = History {
                        times: &coarse_times,
                        states: &coarse_states,
                        increments: &coarse_incs,
                    };
                    strategy(&hist)
                }
            };
            if op.noise_dim() != proc.noise_dim {
                return Err(Error::DimensionMismatch {
                    expected: proc.noise_dim,
                    got: op.noise_dim(),
                });
            }
            if let Some(g) = gen {
                if op.dim() != g.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: g.dim(),
                        got: op.dim(),
                    });
                }
            }
            if space.is_none() {
                space = Some(op.codomain);
                let zero = CVec::from_elem(op.dim(), C64::new(0.0, 0.0));
                y = Some(zero.clone());
                nodes.push(zero.clone());
                coarse_states.push(zero);
            }
            coarse_energy.push(row_energy(&op));
            coarse_dts.push(dts[i..i + factor].iter().sum());
            coarse_incs.push(aggregate_increments(&increments[i..i + factor], factor).remove(0));
            current_op = Some(op);
        }
        let op = current_op.as_ref().unwrap();
        let yv = y.as_mut().unwrap();
        let kick = op.apply_real(&increments[i]);
        for (v, k) in yv.iter_mut().zip(kick.iter()) {
            *v += *k;
        }
        let key = dts[i].to_bits();
        if !semi_cache.contains_key(&key) {
            semi_cache.insert(key, semi_step(gen, dts[i])?);
        }
        semi_cache[&key].apply(yv)?;
        nodes.push(yv.clone());
        if (i + 1) % factor == 0 {
            coarse_times.push(grid.times[i + 1]);
        }
    }

    Ok(SimulatedPath {
        nodes,
        coarse_dts,
        coarse_row_energy: coarse_energy,
        space: space.unwrap(),
    })
}

/// Discrete Itô integral `sum_{i<=n} G_i dW_i` at every grid node.
pub fn ito_integral(
    proc: &StepProcess,
    grid: &TimeGrid,
    increments: &[Vec<f64>],
) -> Result<SimulatedPath> {
    driven_path(None, proc, grid, increments)
}

/// Exponential-Euler convolution `y_{i+1} = S(dt_i)(y_i + G_i dW_i)`, y_0 = 0,
/// pathwise coupled to the given increments.
pub fn convolve_exponential_euler(
    gen: &Generator,
    proc: &StepProcess,
    grid: &TimeGrid,
    increments: &[Vec<f64>],
) -> Result<SimulatedPath> {
    driven_path(Some(gen), proc, grid, increments)
}

/// Per-mode variance multiplier `(1 - e^{-2 Re mu dt}) / (2 Re mu)` of the
/// exact one-step stochastic-convolution increment.
pub fn ou_variance_coeff(mu: C64, dt: f64) -> f64 {
    (1.0 - (-2.0 * mu.re * dt).exp()) / (2.0 * mu.re)
}

fn ou_pseudo_coeff(mu: C64, dt: f64) -> C64 {
    (C64::new(1.0, 0.0) - (-2.0 * mu * dt).exp()) / (2.0 * mu)
}

/// Exact-in-law sampling of the convolution at the grid nodes for a spectral
/// generator and a deterministic step process. Not coupled to any explicit
/// Wiener increments; draws are addressed by `(seed, path, step, mode)`.
pub fn convolve_exact(
    gen: &SpectralGenerator,
    proc: &StepProcess,
    grid: &TimeGrid,
    seed: u64,
    path: u64,
) -> Result<SimulatedPath> {
    let ops = match &proc.kind {
        ProcessKind::Deterministic(ops) => ops,
        ProcessKind::Adapted(_) => {
            return Err(Error::invalid(
                "exact sampling requires a deterministic step process",
            ))
        }
    };
    let n = grid.n_steps();
    if n % proc.n_steps != 0 {
        return Err(Error::GridMismatch);
    }
    if ops[0].dim() != gen.dim() {
        return Err(Error::DimensionMismatch {
            expected: gen.dim(),
            got: ops[0].dim(),
        });
    }
    let factor = n / proc.n_steps;
    let d = gen.dim();
    let dts = grid.dts();
    // distinct stream family from wiener_increments so the two samplers never
    // share draws even under a common seed
    let stream = path | (1u64 << 63);

    let mut y = CVec::from_elem(d, C64::new(0.0, 0.0));
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(y.clone());
    // per coarse step and mode: (sum_j |G_kj|^2, sum_j G_kj^2)
    let mut energies: Vec<(Vec<f64>, Vec<C64>)> = Vec::with_capacity(ops.len());
    for op in ops {
        let abs2 = row_energy(op);
        let sq: Vec<C64> = (0..d)
            .map(|k| (0..op.noise_dim()).map(|j| op.entries[[k, j]] * op.entries[[k, j]]).sum())
            .collect();
        energies.push((abs2, sq));
    }

    for i in 0..n {
        let (abs2, sq) = &energies[i / factor];
        let dt = dts[i];
        for k in 0..d {
            let mu = gen.modes[k];
            let decay = (-mu * dt).exp();
            let v = abs2[k] * ou_variance_coeff(mu, dt);
            let w = sq[k] * ou_pseudo_coeff(mu, dt);
            let xi = if v > 0.0 {
                // real 2x2 covariance of (Re xi, Im xi) from E|xi|^2 and E xi^2
                let a = (0.5 * (v + w.re)).max(0.0);
                let b = (0.5 * (v - w.re)).max(0.0);
                let c = 0.5 * w.im;
                let l11 = a.sqrt();
                let l21 = if l11 > 0.0 { c / l11 } else { 0.0 };
                let l22 = (b - l21 * l21).max(0.0).sqrt();
                let z1 = counter_gaussian(seed, stream, 2 * (i * d + k) as u64);
                let z2 = counter_gaussian(seed, stream, 2 * (i * d + k) as u64 + 1);
                C64::new(l11 * z1, l21 * z1 + l22 * z2)
            } else {
                C64::new(0.0, 0.0)
            };
            y[k] = decay * y[k] + xi;
        }
        nodes.push(y.clone());
    }

    let coarse_dts: Vec<f64> = (0..proc.n_steps)
        .map(|i| dts[i * factor..(i + 1) * factor].iter().sum())
        .collect();
    Ok(SimulatedPath {
        nodes,
        coarse_dts,
        coarse_row_energy: energies.into_iter().map(|(abs2, _)| abs2).collect(),
        space: ops[0].codomain,
    })
}

/// `max_i ||y(t_i)||_q` over the grid nodes.
pub fn running_sup(nodes: &[CVec], space: LqSpace) -> f64 {
    nodes.iter().map(|v| space.norm_vec(v)).fold(0.0, f64::max)
}

/// Which integrator an ensemble uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    ExponentialEuler,
    Exact,
}

/// Ensemble summary: one entry per path, in path-index order regardless of
/// the worker count.
pub struct PathEnsemble {
    pub seed: u64,
    pub sups: Vec<f64>,
    pub terminals: Vec<f64>,
    /// Pathwise integrand gamma-norm (square-function value); constant across
    /// paths for deterministic processes.
    pub denominators: Vec<f64>,
    /// Norms at every grid node, kept only on request.
    pub node_norms: Option<Vec<Vec<f64>>>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.sups.len()
    }
}

pub fn simulate_ensemble(
    gen: &Generator,
    proc: &StepProcess,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
    integrator: Integrator,
    keep_node_norms: bool,
) -> Result<PathEnsemble> {
    if n_paths == 0 {
        return Err(Error::invalid("ensemble needs at least one path"));
    }
    let space = gen.space();
    let per_path: Result<Vec<(f64, f64, f64, Option<Vec<f64>>)>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = match integrator {
                Integrator::ExponentialEuler => {
                    let incs = wiener_increments(seed, p, grid, proc.noise_dim);
                    convolve_exponential_euler(gen, proc, grid, &incs)?
                }
                Integrator::Exact => {
                    let g = gen.as_spectral().ok_or_else(|| {
                        Error::invalid("exact integrator requires a spectral generator")
                    })?;
                    convolve_exact(g, proc, grid, seed, p)?
                }
            };
            let sup = running_sup(&path.nodes, space);
            let terminal = space.norm_vec(path.nodes.last().unwrap());
            let denom = path.integrand_norm();
            let norms = keep_node_norms
                .then(|| path.nodes.iter().map(|v| space.norm_vec(v)).collect());
            Ok((sup, terminal, denom, norms))
        })
        .collect();
    let per_path = per_path?;
    let mut ens = PathEnsemble {
        seed,
        sups: Vec::with_capacity(n_paths),
        terminals: Vec::with_capacity(n_paths),
        denominators: Vec::with_capacity(n_paths),
        node_norms: keep_node_norms.then(Vec::new),
    };
    for (sup, terminal, denom, norms) in per_path {
        ens.sups.push(sup);
        ens.terminals.push(terminal);
        ens.denominators.push(denom);
        if let (Some(all), Some(n)) = (&mut ens.node_norms, norms) {
            all.push(n);
        }
    }
    Ok(ens)
}

/// Truncation horizon: smallest T with `e^{-2 min Re mu T} < tol`, capped at
/// `t_max`. Sup statistics over [0, T] then stand in for sup over all time.
pub fn truncation_horizon(gen: &Generator, tol: f64, t_max: f64) -> f64 {
    let rate = gen.min_decay_rate();
    ((-tol.ln()) / (2.0 * rate)).min(t_max)
}
